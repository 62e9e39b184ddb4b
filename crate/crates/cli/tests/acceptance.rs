//! Acceptance criteria 1-7. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails.

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use offsetcal::bounds::{
    bound_report, ccrb, fim_general, pseudo_inverse, trace_average_ref_homoscedastic,
    trace_single_ref_homoscedastic, traces_diagonal_noise,
};
use offsetcal::estimator::{estimate_offsets, feasible_projection, EstimatorConfig};
use offsetcal::linalg::trace;
use offsetcal::model::{
    average_reference_constraint, single_reference_constraint, single_source_projector,
    MeasurementSet, NetworkShape, NoiseModel, OffsetVector, ReferenceConstraint,
};
use offsetcal::simulator::{run_delta_grid, run_variance_sweep, ExperimentConfig, NoiseSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const GRID: [usize; 3] = [10, 50, 100];

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

fn shape(n: usize, k: usize) -> NetworkShape {
    NetworkShape::single_source(n, k).unwrap()
}

fn random_spd(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    &a * a.transpose() + DMatrix::identity(n, n) * 0.1
}

fn random_variances(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| 10f64.powf(rng.random_range(-4.0..0.0))).collect()
}

fn kron(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    DMatrix::from_fn(ar * br, ac * bc, |i, j| a[(i / br, j / bc)] * b[(i % br, j % bc)])
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let noise = NoiseModel::homoscedastic(1e-3).unwrap();
    let mut worst: f64 = 0.0;
    for n in GRID {
        for k in GRID {
            let s = shape(n, k);
            let single = bound_report(&s, &noise, &single_reference_constraint(&s, 0).unwrap()).unwrap();
            let average = bound_report(&s, &noise, &average_reference_constraint(&s).unwrap()).unwrap();
            worst = worst.max((average.trace / single.trace - 0.5).abs());
        }
    }
    let elapsed = start.elapsed();
    outcome(
        worst <= 1e-12 && elapsed < Duration::from_secs(1),
        format!("max |ratio - 0.5| = {worst:.2e} (tol 1e-12), {:.3} s (limit 1 s)", elapsed.as_secs_f64()),
    )
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let mut config = ExperimentConfig::new(
        GRID.to_vec(),
        GRID.to_vec(),
        NoiseSpec::Homoscedastic { variance: 1e-3 },
        2024,
    );
    config.runs_per_cell = 500;
    let result = run_delta_grid(&config).unwrap();
    let elapsed = start.elapsed();
    let (lo, hi) = result
        .cells
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), c| (lo.min(c.delta_hat), hi.max(c.delta_hat)));
    let inside = result.cells.iter().all(|c| (0.45..=0.55).contains(&c.delta_hat));
    outcome(
        inside && result.cells.len() == 9 && elapsed < Duration::from_secs(60),
        format!(
            "delta_hat over 9 cells in [{lo:.4}, {hi:.4}] (band [0.45, 0.55]), {:.2} s (limit 60 s)",
            elapsed.as_secs_f64()
        ),
    )
}

fn criterion_3() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut cases = 0;
    for n in 2..=50 {
        for k in [1, 10, 100] {
            for v in [1e-3, 1.0] {
                let s = shape(n, k);
                let noise = NoiseModel::homoscedastic(v).unwrap();
                let fim = fim_general(&single_source_projector(&s).unwrap(), &noise, k).unwrap();
                let single = ccrb(&fim, &single_reference_constraint(&s, n / 2).unwrap()).unwrap();
                let average = ccrb(&fim, &average_reference_constraint(&s).unwrap()).unwrap();
                worst = worst
                    .max(rel_err(trace_single_ref_homoscedastic(n, k, v), single.trace))
                    .max(rel_err(trace_average_ref_homoscedastic(n, k, v), average.trace));
                cases += 1;
            }
        }
    }
    outcome(
        worst <= 1e-10,
        format!("{cases} (N, K, sigma2) cases, max relative error {worst:.2e} (tol 1e-10)"),
    )
}

fn criterion_4() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst: f64 = 0.0;
    let mut worst_closed: f64 = 0.0;
    for _ in 0..100 {
        let n = rng.random_range(2..=12);
        let k = [1, 10, 100][rng.random_range(0..3)];
        let vars = random_variances(&mut rng, n);
        let ref_index = rng.random_range(0..n);
        let s = shape(n, k);
        let noise = NoiseModel::independent_diagonal(vars.clone()).unwrap();
        let fim = fim_general(&single_source_projector(&s).unwrap(), &noise, k).unwrap();
        let single = ccrb(&fim, &single_reference_constraint(&s, ref_index).unwrap()).unwrap();
        let average = ccrb(&fim, &average_reference_constraint(&s).unwrap()).unwrap();
        let direct = single.trace - average.trace;
        let t = traces_diagonal_noise(k, &vars, ref_index).unwrap();
        worst = worst.max(rel_err(t.gap, direct));
        worst_closed = worst_closed.max(rel_err(t.closed_form_gap, direct));
    }
    let mut report = String::new();
    let mut worked_ok = true;
    for k in [1usize, 10] {
        let t = traces_diagonal_noise(k, &[1.0, 2.0], 0).unwrap();
        let kf = k as f64;
        worked_ok &= rel_err(t.gap, 1.5 / kf) <= 1e-12 && rel_err(t.closed_form_gap, 4.0 / (3.0 * kf)) <= 1e-12;
        report.push_str(&format!(
            "; N=2 diag(1,2) K={k}: direct gap {:.6} (1.5/K), closed form {:.6} (4/(3K))",
            t.gap, t.closed_form_gap
        ));
    }
    outcome(
        worst <= 1e-10 && worked_ok,
        format!(
            "100 draws, max relative gap error {worst:.2e} (tol 1e-10); printed closed-form gap max relative error {worst_closed:.2e} (discrepancy report){report}"
        ),
    )
}

fn criterion_5() -> Outcome {
    let start = Instant::now();
    let noise = NoiseSpec::LogUniform {
        min_variance: 1e-4,
        max_variance: 1e-2,
    };
    let mut cells = Vec::new();
    for (ns, ks) in [(vec![5], vec![10, 100]), (vec![10, 50], vec![100])] {
        let mut config = ExperimentConfig::new(ns, ks, noise.clone(), 55);
        config.runs_per_cell = 10_000;
        cells.extend(run_variance_sweep(&config).unwrap().cells);
    }
    let elapsed = start.elapsed();
    let mut worst: f64 = 0.0;
    let mut parts = Vec::new();
    for c in &cells {
        let es = rel_err(c.empirical_trace_single, c.ccrb_trace_single);
        let ea = rel_err(c.empirical_trace_average, c.ccrb_trace_average);
        worst = worst.max(es).max(ea);
        parts.push(format!("(N={}, K={}) {:.1}%/{:.1}%", c.n_sensors, c.n_measurements, 100.0 * es, 100.0 * ea));
    }
    outcome(
        worst <= 0.05 && elapsed < Duration::from_secs(300),
        format!(
            "single/average deviation from bound: {}; max {:.2}% (tol 5%), {:.2} s (limit 300 s)",
            parts.join(", "),
            100.0 * worst,
            elapsed.as_secs_f64()
        ),
    )
}

fn criterion_6() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let n = rng.random_range(2..=12);
        let k = rng.random_range(1..=100);
        let sigma = random_spd(&mut rng, n);
        let s = shape(n, k);
        let noise = NoiseModel::general(sigma).unwrap();
        let fim = fim_general(&single_source_projector(&s).unwrap(), &noise, k).unwrap();
        let avg = ccrb(&fim, &average_reference_constraint(&s).unwrap()).unwrap();
        let pinv = trace(&pseudo_inverse(&fim));
        worst = worst.max(rel_err(avg.trace, pinv));
    }
    outcome(
        worst <= 1e-10,
        format!("100 random PD covariances, max relative |Tr(ccrb_avg) - Tr(pinv F)| = {worst:.2e} (tol 1e-10)"),
    )
}

/// Projected-domain KKT over the full `NK` system: whiten `(Γ⊗I)y` by
/// `(ΓΣΓᵀ)⁻¹⊗I` with design `Γ⊗1_K`.
fn dense_projected_wls(y: &DMatrix<f64>, sigma: &DMatrix<f64>, c: &ReferenceConstraint) -> DVector<f64> {
    let (n, k) = y.shape();
    let s = shape(n, k);
    let gamma = single_source_projector(&s).unwrap().matrix().clone();
    let ik = DMatrix::identity(k, k);
    let g = kron(&gamma, &DMatrix::from_element(k, 1, 1.0));
    let w = kron(&(&gamma * sigma * gamma.transpose()).try_inverse().unwrap(), &ik);
    let yv = DVector::from_fn(n * k, |i, _| y[(i / k, i % k)]);
    let z = kron(&gamma, &ik) * yv;
    let cm = c.gradient();
    let m = cm.nrows();
    let mut kkt = DMatrix::zeros(n + m, n + m);
    kkt.view_mut((0, 0), (n, n)).copy_from(&(g.transpose() * &w * &g));
    kkt.view_mut((0, n), (n, m)).copy_from(&cm.transpose());
    kkt.view_mut((n, 0), (m, n)).copy_from(cm);
    let mut rhs = DVector::zeros(n + m);
    rhs.rows_mut(0, n).copy_from(&(g.transpose() * &w * z));
    rhs.rows_mut(n, m).copy_from(c.response());
    kkt.lu().solve(&rhs).unwrap().rows(0, n).into_owned()
}

fn cli_run(dir: &Path, threads: &str) -> Result<(Vec<u8>, serde_json::Value), String> {
    let status = Command::new(env!("CARGO_BIN_EXE_offsetcal"))
        .args(["reproduce", "fig1a", "--seed", "9", "--runs", "40", "--step", "30", "--out"])
        .arg(dir)
        .env("OFFSETCAL_THREADS", threads)
        .output()
        .map_err(|e| e.to_string())?;
    if !status.status.success() {
        return Err(String::from_utf8_lossy(&status.stderr).into_owned());
    }
    let csv = std::fs::read(dir.join("fig1a.csv")).map_err(|e| e.to_string())?;
    let manifest: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.join("manifest.json")).map_err(|e| e.to_string())?)
            .map_err(|e| e.to_string())?;
    Ok((csv, manifest))
}

fn criterion_7() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut failures: Vec<String> = Vec::new();
    let mut check = |ok: bool, what: &str| {
        if !ok && !failures.iter().any(|f| f == what) {
            failures.push(what.to_string());
        }
    };

    for _ in 0..50 {
        let n = rng.random_range(2..=6);
        let k = rng.random_range(1..=6);
        let s = shape(n, k);
        let sigma = random_spd(&mut rng, n);
        let noise = NoiseModel::general(sigma.clone()).unwrap();
        let fim = fim_general(&single_source_projector(&s).unwrap(), &noise, k).unwrap();

        let reference = rng.random_range(0..n);
        for c in [single_reference_constraint(&s, reference).unwrap(), average_reference_constraint(&s).unwrap()] {
            // Basis invariance: U and U·R span the same nullspace.
            let r = DMatrix::from_fn(n - 1, n - 1, |i, j| if i == j { 2.0 } else { 0.0 })
                + DMatrix::from_fn(n - 1, n - 1, |_, _| rng.random_range(-0.3..0.3));
            let rotated = c.with_nullspace_basis(c.nullspace_basis() * r).unwrap();
            let a = ccrb(&fim, &c).unwrap().ccrb_matrix;
            let b = ccrb(&fim, &rotated).unwrap().ccrb_matrix;
            check((&a - &b).amax() <= 1e-9 * a.amax().max(1.0), "basis invariance");

            let theta = OffsetVector::new(DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0)));
            let signal: Vec<f64> = (0..k).map(|_| rng.random_range(-5.0..5.0)).collect();
            let clean = DMatrix::from_fn(n, k, |i, j| signal[j] + theta.as_vector()[i]);
            let noisy = &clean + DMatrix::from_fn(n, k, |_, _| rng.random_range(-0.1..0.1));
            let config = EstimatorConfig::optimal(c.clone());

            let est = estimate_offsets(&MeasurementSet::new(noisy.clone()).unwrap(), &noise, &config).unwrap();
            check(est.constraint_violation <= 1e-12, "constraint satisfaction");

            let target = feasible_projection(&theta, &c).unwrap();
            let exact = estimate_offsets(&MeasurementSet::new(clean.clone()).unwrap(), &noise, &config).unwrap();
            check((exact.theta_hat.as_vector() - target.as_vector()).amax() <= 1e-10, "noiseless recovery");

            let shifted = noisy.map(|v| v + 3.7);
            let est_shift = estimate_offsets(&MeasurementSet::new(shifted).unwrap(), &noise, &config).unwrap();
            check(
                (est_shift.theta_hat.as_vector() - est.theta_hat.as_vector()).amax() <= 1e-10,
                "global-shift invariance",
            );

            let dense = dense_projected_wls(&noisy, &sigma, &c);
            check((dense - est.theta_hat.as_vector()).amax() <= 1e-9, "dense equivalence");
        }
    }

    let tmp = std::env::temp_dir().join(format!("offsetcal-acceptance-{}", std::process::id()));
    let runs = [("1", tmp.join("a")), ("4", tmp.join("b")), ("1", tmp.join("c"))];
    let results: Vec<_> = runs.iter().map(|(t, d)| cli_run(d, t)).collect();
    let _ = std::fs::remove_dir_all(&tmp);
    match results.as_slice() {
        [Ok(a), Ok(b), Ok(c)] => {
            check(a.0 == b.0 && a.0 == c.0, "determinism bytes");
            check(
                a.1["outputs"] == b.1["outputs"] && a.1["outputs"] == c.1["outputs"],
                "determinism checksums",
            );
        }
        _ => {
            let errors: Vec<String> = results.iter().filter_map(|r| r.as_ref().err().cloned()).collect();
            failures.push(format!("cli run failed: {}", errors.join("; ")));
        }
    }

    if failures.is_empty() {
        outcome(
            true,
            "basis invariance, constraint satisfaction, noiseless recovery, global-shift invariance, dense equivalence (N, K <= 6), CLI byte-identical output across 1/4/1 threads".into(),
        )
    } else {
        outcome(false, format!("failed: {}", failures.join(", ")))
    }
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 7] = [
        ("factor-2 ratio on the N x K grid", criterion_1),
        ("delta-hat grid, 500 runs", criterion_2),
        ("closed forms vs matrix pipeline", criterion_3),
        ("heteroscedastic gap oracle", criterion_4),
        ("efficiency at 1e4 runs", criterion_5),
        ("MVUE pseudo-inverse identity", criterion_6),
        ("invariant suite", criterion_7),
    ];
    let mut all = true;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let o = run();
        all &= o.pass;
        println!("criterion {} [{}] {name}: {}", i + 1, if o.pass { "PASS" } else { "FAIL" }, o.detail);
    }
    if !all {
        std::process::exit(1);
    }
}
