use std::fmt::Write as _;
use std::time::Instant;

use offsetcal::bounds::{bound_report, traces_diagonal_noise, DiagonalTraces};
use offsetcal::model::{
    average_reference_constraint, single_reference_constraint, NetworkShape, NoiseKind,
    ReferenceConstraint,
};
use serde::Serialize;

use crate::args::{BoundsArgs, Format, RefArg};
use crate::error::CliResult;
use crate::manifest::{write_artifacts, RunManifest};
use crate::noise::{describe, noise_model};

pub fn constraint_for(shape: &NetworkShape, reference: RefArg) -> CliResult<ReferenceConstraint> {
    Ok(match reference {
        RefArg::Average => average_reference_constraint(shape)?,
        RefArg::Single(i) => single_reference_constraint(shape, i)?,
    })
}

#[derive(Debug, Serialize)]
pub struct BoundsOutput {
    pub n_sensors: usize,
    pub n_measurements: usize,
    pub noise: serde_json::Value,
    pub constraint: String,
    pub ccrb_trace: f64,
    pub closed_form_trace: Option<f64>,
    /// Present for independent heteroscedastic noise only.
    pub diagonal: Option<DiagonalTraces>,
}

pub fn compute(args: &BoundsArgs) -> CliResult<BoundsOutput> {
    let shape = NetworkShape::single_source(args.n, args.k)?;
    let noise = noise_model(&args.noise, args.n, None)?;
    let constraint = constraint_for(&shape, args.reference)?;
    let report = bound_report(&shape, &noise, &constraint)?;
    let diagonal = match noise.kind() {
        NoiseKind::IndependentDiagonal { variances } if noise.uniform_variance(args.n).is_none() => {
            let ref_index = match args.reference {
                RefArg::Single(i) => i,
                RefArg::Average => offsetcal::bounds::min_variance_index(variances),
            };
            Some(traces_diagonal_noise(args.k, variances, ref_index)?)
        }
        _ => None,
    };
    Ok(BoundsOutput {
        n_sensors: args.n,
        n_measurements: args.k,
        noise: describe(&noise, args.n),
        constraint: report.constraint_label.to_string(),
        ccrb_trace: report.trace,
        closed_form_trace: report.closed_form_trace,
        diagonal,
    })
}

pub fn render_text(out: &BoundsOutput) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "sensors              {}", out.n_sensors);
    let _ = writeln!(s, "measurements         {}", out.n_measurements);
    let _ = writeln!(s, "noise                {}", out.noise["kind"].as_str().unwrap_or("?"));
    let _ = writeln!(s, "constraint           {}", out.constraint);
    let _ = writeln!(s, "ccrb trace           {:.12e}", out.ccrb_trace);
    match out.closed_form_trace {
        Some(t) => {
            let _ = writeln!(s, "closed-form trace    {t:.12e}");
        }
        None => {
            let _ = writeln!(s, "closed-form trace    n/a");
        }
    }
    if let Some(d) = &out.diagonal {
        let _ = writeln!(s, "single-ref trace     {:.12e}  (reference sensor {})", d.trace_single, d.ref_index);
        let _ = writeln!(s, "average-ref trace    {:.12e}", d.trace_average);
        let _ = writeln!(s, "gap (matrix)         {:.12e}", d.gap);
        let _ = writeln!(s, "gap (closed form)    {:.12e}", d.closed_form_gap);
        let _ = writeln!(
            s,
            "note: the closed-form gap expression differs from the matrix gap by {:.6e}; the matrix value is authoritative",
            d.gap_discrepancy()
        );
    }
    s
}

pub fn render_csv(out: &BoundsOutput) -> CliResult<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "n_sensors",
        "n_measurements",
        "constraint",
        "ccrb_trace",
        "closed_form_trace",
        "trace_single",
        "trace_average",
        "gap",
        "closed_form_gap",
    ])?;
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    let d = out.diagonal.as_ref();
    w.write_record([
        out.n_sensors.to_string(),
        out.n_measurements.to_string(),
        out.constraint.clone(),
        out.ccrb_trace.to_string(),
        opt(out.closed_form_trace),
        opt(d.map(|d| d.trace_single)),
        opt(d.map(|d| d.trace_average)),
        opt(d.map(|d| d.gap)),
        opt(d.map(|d| d.closed_form_gap)),
    ])?;
    Ok(String::from_utf8(w.into_inner().map_err(|e| e.into_error())?).expect("csv is utf-8"))
}

pub fn run(args: &BoundsArgs) -> CliResult<String> {
    let start = Instant::now();
    let out = compute(args)?;
    let rendered = match args.format {
        None => render_text(&out),
        Some(Format::Json) => serde_json::to_string_pretty(&out)? + "\n",
        Some(Format::Csv) => render_csv(&out)?,
    };
    if let Some(dir) = &args.out {
        let name = match args.format {
            Some(Format::Csv) => "bounds.csv",
            Some(Format::Json) => "bounds.json",
            None => "bounds.txt",
        };
        let config = serde_json::json!({
            "n_sensors": out.n_sensors,
            "n_measurements": out.n_measurements,
            "noise": out.noise,
            "constraint": out.constraint,
        });
        let mut manifest = RunManifest::new("bounds", None, config);
        manifest.timings.wall_seconds = start.elapsed().as_secs_f64();
        write_artifacts(dir, &[(name.to_string(), rendered.clone().into_bytes())], &mut manifest)?;
    }
    Ok(rendered)
}
