use std::time::Instant;

use offsetcal::estimator::{estimate_offsets, EstimateResult, EstimatorConfig};
use offsetcal::model::{MeasurementSet, NetworkShape};
use serde::Serialize;

use crate::args::{EstimateArgs, Format};
use crate::bounds_cmd::constraint_for;
use crate::error::{CliError, CliResult};
use crate::io::read_matrix;
use crate::manifest::{write_artifacts, RunManifest};
use crate::noise::{describe, noise_model};

#[derive(Debug, Serialize)]
pub struct EstimateOutput {
    pub constraint: String,
    pub theta_hat: Vec<f64>,
    pub lagrange_multiplier: Vec<f64>,
    pub residual_norm: f64,
    pub constraint_violation: f64,
}

impl EstimateOutput {
    fn new(label: String, r: &EstimateResult) -> Self {
        Self {
            constraint: label,
            theta_hat: r.theta_hat.as_vector().iter().copied().collect(),
            lagrange_multiplier: r.lagrange_multiplier.iter().copied().collect(),
            residual_norm: r.residual_norm,
            constraint_violation: r.constraint_violation,
        }
    }
}

/// Columns: `sensor,theta_hat,residual_norm,constraint_violation`; the two
/// scalars repeat on every row.
pub fn render_csv(out: &EstimateOutput) -> CliResult<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["sensor", "theta_hat", "residual_norm", "constraint_violation"])?;
    for (i, t) in out.theta_hat.iter().enumerate() {
        w.write_record([
            i.to_string(),
            t.to_string(),
            out.residual_norm.to_string(),
            out.constraint_violation.to_string(),
        ])?;
    }
    Ok(String::from_utf8(w.into_inner().map_err(|e| e.into_error())?).expect("csv is utf-8"))
}

pub struct EstimateRun {
    pub rendered: String,
    pub manifest: Option<RunManifest>,
}

pub fn run(args: &EstimateArgs) -> CliResult<EstimateRun> {
    let start = Instant::now();
    let samples = read_matrix(&args.input)?;
    let (n, k) = (samples.nrows(), samples.ncols());
    let path = args.input.display().to_string();
    for (flag, expected, found, what) in [("--n", args.n, n, "rows"), ("--k", args.k, k, "columns")] {
        if let Some(e) = expected {
            if e != found {
                return Err(CliError::Input {
                    path,
                    message: format!("{flag} {e} but file has {found} {what}"),
                });
            }
        }
    }
    let shape = NetworkShape::single_source(n, k)?;
    // The weighting is irrelevant under homoscedastic noise, so unit variance
    // is a safe default.
    let noise = noise_model(&args.noise, n, Some(1.0))?;
    let constraint = constraint_for(&shape, args.reference)?;
    let label = constraint.label().to_string();
    let y = MeasurementSet::new(samples)?;
    let result = estimate_offsets(&y, &noise, &EstimatorConfig::optimal(constraint))?;
    let out = EstimateOutput::new(label, &result);
    let rendered = match args.format {
        Format::Json => serde_json::to_string_pretty(&out)? + "\n",
        Format::Csv => render_csv(&out)?,
    };
    let manifest = match &args.out {
        Some(dir) => {
            let config = serde_json::json!({
                "input": path,
                "n_sensors": n,
                "n_measurements": k,
                "noise": describe(&noise, n),
                "constraint": out.constraint,
            });
            let mut m = RunManifest::new("estimate", None, config);
            let name = match args.format {
                Format::Json => "estimate.json",
                Format::Csv => "estimate.csv",
            };
            m.timings.wall_seconds = start.elapsed().as_secs_f64();
            write_artifacts(dir, &[(name.to_string(), rendered.clone().into_bytes())], &mut m)?;
            Some(m)
        }
        None => None,
    };
    Ok(EstimateRun { rendered, manifest })
}
