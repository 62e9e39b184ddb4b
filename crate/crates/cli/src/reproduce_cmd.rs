use std::path::Path;
use std::time::Instant;

use offsetcal::simulator::{
    run_delta_grid, run_variance_sweep, ExperimentConfig, NoiseSpec, SweepResult,
};

use crate::args::{Figure, Format, ReproduceArgs};
use crate::error::{CliError, CliResult};
use crate::manifest::{write_artifacts, RunManifest};
use crate::svg::{delta_heatmap, trace_lines, XAxis};

pub const DEFAULT_SEED: u64 = 1;
pub const DEFAULT_STEP: usize = 10;
pub const AXIS_MAX: usize = 100;
pub const FIG1A_SIGMA2: f64 = 1e-3;
pub const LOG_UNIFORM_RANGE: (f64, f64) = (1e-4, 1e-2);

/// Sweep CSV columns, schema version 1.
pub const CSV_COLUMNS: [&str; 16] = [
    "figure",
    "cell_index",
    "n_sensors",
    "n_measurements",
    "runs",
    "master_seed",
    "single_ref_index",
    "empirical_trace_single",
    "empirical_trace_average",
    "stderr_single",
    "stderr_average",
    "ccrb_trace_single",
    "ccrb_trace_average",
    "delta_hat",
    "delta_ccrb",
    "low_confidence",
];

fn axis(step: usize) -> Vec<usize> {
    (DEFAULT_STEP..=AXIS_MAX).step_by(step).collect()
}

fn log_uniform() -> NoiseSpec {
    NoiseSpec::LogUniform {
        min_variance: LOG_UNIFORM_RANGE.0,
        max_variance: LOG_UNIFORM_RANGE.1,
    }
}

/// Built-in settings for each figure.
pub fn default_config(figure: Figure, step: usize) -> ExperimentConfig {
    match figure {
        Figure::Fig1a => ExperimentConfig::new(
            axis(step),
            axis(step),
            NoiseSpec::Homoscedastic {
                variance: FIG1A_SIGMA2,
            },
            DEFAULT_SEED,
        ),
        Figure::Fig1b => ExperimentConfig::new(vec![5], axis(step), log_uniform(), DEFAULT_SEED),
        Figure::Fig1c => ExperimentConfig::new(axis(step), vec![100], log_uniform(), DEFAULT_SEED),
    }
}

/// Reads either a bare experiment config or the `config` field of a manifest.
pub fn load_config(path: &Path) -> CliResult<ExperimentConfig> {
    let input_err = |message: String| CliError::Input {
        path: path.display().to_string(),
        message,
    };
    let text = std::fs::read_to_string(path).map_err(|e| input_err(format!("cannot read file: {e}")))?;
    let mut value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| input_err(e.to_string()))?;
    if let Some(inner) = value.get_mut("config") {
        value = inner.take();
    }
    serde_json::from_value(value).map_err(|e| input_err(e.to_string()))
}

/// Defaults, then the config file, then explicit flags.
pub fn resolve_config(args: &ReproduceArgs) -> CliResult<ExperimentConfig> {
    let step = args.step.unwrap_or(DEFAULT_STEP);
    if step == 0 {
        return Err(CliError::Usage("--step must be positive".into()));
    }
    let mut config = match &args.config {
        Some(path) => load_config(path)?,
        None => default_config(args.figure, step),
    };
    if args.config.is_some() && args.step.is_some() {
        let defaults = default_config(args.figure, step);
        config.n_values = defaults.n_values;
        config.k_values = defaults.k_values;
    }
    if let Some(seed) = args.seed {
        config.master_seed = seed;
    }
    if let Some(runs) = args.runs {
        config.runs_per_cell = runs;
    }
    if let Some(v) = args.sigma2 {
        if args.figure != Figure::Fig1a {
            return Err(CliError::Usage(
                "--sigma2 applies to fig1a only; use --config for other noise".into(),
            ));
        }
        config.noise = NoiseSpec::Homoscedastic { variance: v };
    }
    config.validate()?;
    Ok(config)
}

pub fn run_sweep(figure: Figure, config: &ExperimentConfig) -> CliResult<SweepResult> {
    Ok(match figure {
        Figure::Fig1a => run_delta_grid(config)?,
        Figure::Fig1b | Figure::Fig1c => run_variance_sweep(config)?,
    })
}

pub fn render_csv(figure: Figure, result: &SweepResult) -> CliResult<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_COLUMNS)?;
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for c in &result.cells {
        w.write_record([
            figure.name().to_string(),
            c.cell_index.to_string(),
            c.n_sensors.to_string(),
            c.n_measurements.to_string(),
            c.runs.to_string(),
            c.master_seed.to_string(),
            c.single_ref_index.to_string(),
            c.empirical_trace_single.to_string(),
            c.empirical_trace_average.to_string(),
            opt(c.stderr_single),
            opt(c.stderr_average),
            c.ccrb_trace_single.to_string(),
            c.ccrb_trace_average.to_string(),
            c.delta_hat.to_string(),
            c.delta_ccrb.to_string(),
            c.low_confidence.to_string(),
        ])?;
    }
    Ok(String::from_utf8(w.into_inner().map_err(|e| e.into_error())?).expect("csv is utf-8"))
}

pub fn render_svg(figure: Figure, result: &SweepResult) -> String {
    match figure {
        Figure::Fig1a => delta_heatmap(result, "average/single trace ratio"),
        Figure::Fig1b => trace_lines(result, XAxis::Measurements, "trace vs K"),
        Figure::Fig1c => trace_lines(result, XAxis::Sensors, "trace vs N"),
    }
}

pub struct ReproduceRun {
    pub rendered: String,
    pub manifest: Option<RunManifest>,
}

pub fn run(args: &ReproduceArgs) -> CliResult<ReproduceRun> {
    if args.svg && args.out.is_none() {
        return Err(CliError::Usage("--svg needs --out".into()));
    }
    let start = Instant::now();
    let config = resolve_config(args)?;
    let result = run_sweep(args.figure, &config)?;
    let name = args.figure.name();
    let (file, rendered) = match args.format {
        Format::Csv => (format!("{name}.csv"), render_csv(args.figure, &result)?),
        Format::Json => {
            let mut value = serde_json::to_value(&result)?;
            value["figure"] = name.into();
            (format!("{name}.json"), serde_json::to_string_pretty(&value)? + "\n")
        }
    };
    let manifest = match &args.out {
        Some(dir) => {
            let mut artifacts = vec![(file, rendered.clone().into_bytes())];
            if args.svg {
                artifacts.push((format!("{name}.svg"), render_svg(args.figure, &result).into_bytes()));
            }
            let mut m = RunManifest::new(
                &format!("reproduce {name}"),
                Some(config.master_seed),
                serde_json::to_value(&config)?,
            );
            m.timings.wall_seconds = start.elapsed().as_secs_f64();
            write_artifacts(dir, &artifacts, &mut m)?;
            Some(m)
        }
        None => None,
    };
    Ok(ReproduceRun { rendered, manifest })
}
