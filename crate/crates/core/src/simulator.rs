//! Seeded Monte-Carlo simulation of a clock-synchronization network.
//!
//! Clock `i` reads `T_i = t + θ_i·1_K + η_i`. Every run draws its offsets and
//! noise from its own ChaCha8 stream: the key comes from the master seed and
//! the 64-bit stream id is `(cell_index << 32) | run_index`. Results are
//! gathered by run index and summed pairwise, so a sweep is bit-identical for
//! any worker count.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::{
    min_variance_index, trace_average_ref_homoscedastic, trace_single_ref_homoscedastic,
    traces_diagonal_noise,
};
use crate::error::{Error, Result};
use crate::estimator::{feasible_projection, EstimatorConfig, OffsetEstimator};
use crate::linalg::pairwise_sum;
use crate::model::{
    average_reference_constraint, single_reference_constraint, MeasurementSet, NetworkShape,
    NoiseModel, OffsetVector,
};

/// Cells with fewer runs than this are flagged as low confidence.
pub const LOW_CONFIDENCE_RUNS: usize = 30;

/// Stream reserved for drawing per-sensor variances; never a run stream
/// because cell indices stay below `2^31`.
const VARIANCE_STREAM: u64 = u64::MAX;
const MAX_CELLS: usize = 1 << 31;

/// Generator for run `run_index` of cell `cell_index`.
pub fn run_rng(master_seed: u64, cell_index: u32, run_index: u32) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(((cell_index as u64) << 32) | run_index as u64);
    rng
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClockScenario {
    pub true_time: DVector<f64>,
    pub offsets: OffsetVector,
    /// `None` samples noiseless readings.
    pub noise: Option<NoiseModel>,
}

impl ClockScenario {
    pub fn new(
        true_time: DVector<f64>,
        offsets: OffsetVector,
        noise: Option<NoiseModel>,
    ) -> Result<Self> {
        if true_time.is_empty() {
            return Err(Error::InvalidShape("need at least 1 time instant".into()));
        }
        NetworkShape::single_source(offsets.len(), true_time.len())?;
        if let Some(noise) = &noise {
            noise.check_sensors(offsets.len())?;
        }
        Ok(Self {
            true_time,
            offsets,
            noise,
        })
    }

    /// `t_k = k·step`.
    pub fn uniform_ramp(n_measurements: usize, step: f64) -> DVector<f64> {
        DVector::from_fn(n_measurements, |k, _| k as f64 * step)
    }

    pub fn n_sensors(&self) -> usize {
        self.offsets.len()
    }

    pub fn n_measurements(&self) -> usize {
        self.true_time.len()
    }
}

/// Draws correlated sensor noise `η ~ N(0, Σ)` one epoch at a time.
#[derive(Debug, Clone)]
enum NoiseSampler {
    Silent,
    Independent(Vec<f64>),
    Correlated(DMatrix<f64>),
}

impl NoiseSampler {
    fn new(noise: Option<&NoiseModel>, n: usize) -> Result<Self> {
        let Some(noise) = noise else {
            return Ok(Self::Silent);
        };
        if let Some(vars) = noise.diagonal_variances(n) {
            return Ok(Self::Independent(vars.iter().map(|v| v.sqrt()).collect()));
        }
        let chol = noise
            .covariance(n)?
            .cholesky()
            .ok_or_else(|| Error::InvalidNoise("covariance has no Cholesky factor".into()))?;
        Ok(Self::Correlated(chol.l()))
    }

    /// Adds noise to `samples` in place, epoch-major.
    fn add_to<R: Rng>(&self, samples: &mut DMatrix<f64>, rng: &mut R) {
        let (n, k) = samples.shape();
        match self {
            Self::Silent => {}
            Self::Independent(std_devs) => {
                for epoch in 0..k {
                    for (sensor, sd) in std_devs.iter().enumerate() {
                        let z: f64 = rng.sample(StandardNormal);
                        samples[(sensor, epoch)] += sd * z;
                    }
                }
            }
            Self::Correlated(l) => {
                let mut z = DVector::zeros(n);
                for epoch in 0..k {
                    for zi in z.iter_mut() {
                        *zi = rng.sample(StandardNormal);
                    }
                    let eta = l * &z;
                    for sensor in 0..n {
                        samples[(sensor, epoch)] += eta[sensor];
                    }
                }
            }
        }
    }
}

fn draw_readings<R: Rng>(
    true_time: &DVector<f64>,
    offsets: &DVector<f64>,
    sampler: &NoiseSampler,
    rng: &mut R,
) -> Result<MeasurementSet> {
    let mut samples = DMatrix::from_fn(offsets.len(), true_time.len(), |n, k| {
        true_time[k] + offsets[n]
    });
    sampler.add_to(&mut samples, rng);
    MeasurementSet::new(samples)
}

/// Row `n` is `t + θ_n·1 + η_n`; the same seed always yields the same matrix.
pub fn sample_measurements(scenario: &ClockScenario, seed: u64) -> Result<MeasurementSet> {
    let sampler = NoiseSampler::new(scenario.noise.as_ref(), scenario.n_sensors())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    draw_readings(&scenario.true_time, scenario.offsets.as_vector(), &sampler, &mut rng)
}

/// `(1/R)·Σ ‖θ̂ − target‖²`, the trace of the empirical error covariance
/// about a known target.
pub fn empirical_covariance_trace(estimates: &[OffsetVector], target: &OffsetVector) -> Result<f64> {
    if estimates.is_empty() {
        return Err(Error::EmptyCollection);
    }
    let squared = estimates
        .iter()
        .map(|e| {
            if e.len() != target.len() {
                return Err(Error::DimensionMismatch(format!(
                    "estimate has {} entries, target has {}",
                    e.len(),
                    target.len()
                )));
            }
            Ok((e.as_vector() - target.as_vector()).norm_squared())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(pairwise_sum(&squared) / squared.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseSpec {
    Homoscedastic { variance: f64 },
    /// Explicit per-sensor variances; cells use the first `N` entries.
    Diagonal { variances: Vec<f64> },
    /// Variances drawn log-uniformly once per sweep from the master seed.
    LogUniform { min_variance: f64, max_variance: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReferenceChoice {
    /// The sensor with the smallest noise variance.
    MinVariance,
    Index(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OffsetDistribution {
    /// `θ_n ~ N(0, std_dev²)` drawn fresh each run.
    Normal { std_dev: f64 },
    /// Same offsets every run.
    Fixed { offsets: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub n_values: Vec<usize>,
    pub k_values: Vec<usize>,
    pub noise: NoiseSpec,
    #[serde(default = "default_reference")]
    pub single_reference: ReferenceChoice,
    #[serde(default = "default_runs")]
    pub runs_per_cell: usize,
    pub master_seed: u64,
    #[serde(default = "default_offsets")]
    pub offsets: OffsetDistribution,
    /// Spacing of the true-time ramp, seconds.
    #[serde(default = "default_time_step")]
    pub time_step: f64,
}

fn default_reference() -> ReferenceChoice {
    ReferenceChoice::MinVariance
}

fn default_runs() -> usize {
    500
}

fn default_offsets() -> OffsetDistribution {
    OffsetDistribution::Normal { std_dev: 1.0 }
}

fn default_time_step() -> f64 {
    1.0
}

impl ExperimentConfig {
    pub fn new(n_values: Vec<usize>, k_values: Vec<usize>, noise: NoiseSpec, master_seed: u64) -> Self {
        Self {
            n_values,
            k_values,
            noise,
            single_reference: default_reference(),
            runs_per_cell: default_runs(),
            master_seed,
            offsets: default_offsets(),
            time_step: default_time_step(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.n_values.is_empty() || self.k_values.is_empty() {
            return bad("sweep axes must be non-empty".into());
        }
        if let Some(n) = self.n_values.iter().find(|&&n| n < 2) {
            return bad(format!("sensor counts must be >= 2, got {n}"));
        }
        if self.k_values.contains(&0) {
            return bad("measurement counts must be >= 1".into());
        }
        if self.runs_per_cell < 1 || self.runs_per_cell > u32::MAX as usize {
            return bad(format!("runs_per_cell out of range: {}", self.runs_per_cell));
        }
        if self.n_values.len() * self.k_values.len() >= MAX_CELLS {
            return bad("too many cells".into());
        }
        if !self.time_step.is_finite() {
            return bad("time_step must be finite".into());
        }
        let max_n = self.max_sensors();
        match &self.noise {
            NoiseSpec::Homoscedastic { variance } => {
                NoiseModel::homoscedastic(*variance)?;
            }
            NoiseSpec::Diagonal { variances } => {
                if variances.len() < max_n {
                    return bad(format!(
                        "{} variances given, sweep needs {max_n}",
                        variances.len()
                    ));
                }
                NoiseModel::independent_diagonal(variances.clone())?;
            }
            NoiseSpec::LogUniform {
                min_variance,
                max_variance,
            } => {
                if !(*min_variance > 0.0 && max_variance >= min_variance && max_variance.is_finite())
                {
                    return bad(format!(
                        "log-uniform range must satisfy 0 < min <= max, got [{min_variance}, {max_variance}]"
                    ));
                }
            }
        }
        match &self.offsets {
            OffsetDistribution::Normal { std_dev } if !(std_dev.is_finite() && *std_dev >= 0.0) => {
                return bad(format!("offset std_dev must be >= 0, got {std_dev}"));
            }
            OffsetDistribution::Fixed { offsets } if offsets.len() < max_n => {
                return bad(format!("{} fixed offsets given, sweep needs {max_n}", offsets.len()));
            }
            _ => {}
        }
        if let ReferenceChoice::Index(i) = self.single_reference {
            let min_n = *self.n_values.iter().min().unwrap_or(&0);
            if i >= min_n {
                return Err(Error::IndexOutOfRange {
                    index: i,
                    n_sensors: min_n,
                });
            }
        }
        Ok(())
    }

    fn max_sensors(&self) -> usize {
        self.n_values.iter().copied().max().unwrap_or(0)
    }

    /// Per-sensor variances for the largest network in the sweep, or `None`
    /// for homoscedastic noise. Cells take a prefix.
    pub fn resolve_variances(&self) -> Option<Vec<f64>> {
        let max_n = self.max_sensors();
        match &self.noise {
            NoiseSpec::Homoscedastic { .. } => None,
            NoiseSpec::Diagonal { variances } => Some(variances[..max_n].to_vec()),
            NoiseSpec::LogUniform {
                min_variance,
                max_variance,
            } => {
                let mut rng = ChaCha8Rng::seed_from_u64(self.master_seed);
                rng.set_stream(VARIANCE_STREAM);
                let (lo, hi) = (min_variance.ln(), max_variance.ln());
                Some(
                    (0..max_n)
                        .map(|_| (lo + (hi - lo) * rng.random::<f64>()).exp())
                        .collect(),
                )
            }
        }
    }

    fn cells(&self) -> Vec<(usize, usize)> {
        self.n_values
            .iter()
            .flat_map(|&n| self.k_values.iter().map(move |&k| (n, k)))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepKind {
    DeltaGrid,
    VarianceSweep,
}

/// One `(N, K)` cell: empirical traces for both references plus their bounds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellRecord {
    pub cell_index: usize,
    pub n_sensors: usize,
    pub n_measurements: usize,
    pub runs: usize,
    pub master_seed: u64,
    pub single_ref_index: usize,
    pub empirical_trace_single: f64,
    pub empirical_trace_average: f64,
    /// Monte-Carlo standard error of the empirical traces; `None` for one run.
    pub stderr_single: Option<f64>,
    pub stderr_average: Option<f64>,
    pub ccrb_trace_single: f64,
    pub ccrb_trace_average: f64,
    /// Empirical average/single trace ratio.
    pub delta_hat: f64,
    pub delta_ccrb: f64,
    pub low_confidence: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    pub kind: SweepKind,
    pub master_seed: u64,
    pub runs_per_cell: usize,
    /// Per-sensor variances used by the sweep (prefix per cell).
    pub variances: Option<Vec<f64>>,
    pub cells: Vec<CellRecord>,
}

struct CellStats {
    trace_single: f64,
    trace_average: f64,
    stderr_single: Option<f64>,
    stderr_average: Option<f64>,
}

fn mean_and_stderr(values: &[f64]) -> (f64, Option<f64>) {
    let r = values.len() as f64;
    let mean = pairwise_sum(values) / r;
    if values.len() < 2 {
        return (mean, None);
    }
    let dev: Vec<f64> = values.iter().map(|v| (v - mean).powi(2)).collect();
    let var = pairwise_sum(&dev) / (r - 1.0);
    (mean, Some((var / r).sqrt()))
}

/// Runs paired experiments for one cell: every run feeds the same readings
/// to the single-reference and average-reference estimators.
fn simulate_cell(
    config: &ExperimentConfig,
    cell_index: usize,
    shape: &NetworkShape,
    noise: &NoiseModel,
    ref_index: usize,
) -> Result<CellStats> {
    let n = shape.n_sensors();
    let single = single_reference_constraint(shape, ref_index)?;
    let average = average_reference_constraint(shape)?;
    let est_single = OffsetEstimator::new(noise, &EstimatorConfig::optimal(single.clone()))?;
    let est_average = OffsetEstimator::new(noise, &EstimatorConfig::optimal(average.clone()))?;
    let sampler = NoiseSampler::new(Some(noise), n)?;
    let time = ClockScenario::uniform_ramp(shape.n_measurements(), config.time_step);

    let errors = (0..config.runs_per_cell)
        .into_par_iter()
        .map(|run| {
            let mut rng = run_rng(config.master_seed, cell_index as u32, run as u32);
            let theta = match &config.offsets {
                OffsetDistribution::Normal { std_dev } => {
                    DVector::from_fn(n, |_, _| std_dev * rng.sample::<f64, _>(StandardNormal))
                }
                OffsetDistribution::Fixed { offsets } => DVector::from_column_slice(&offsets[..n]),
            };
            let y = draw_readings(&time, &theta, &sampler, &mut rng)?;
            let theta = OffsetVector(theta);
            let e1 = est_single.estimate_theta(&y)?.0 - feasible_projection(&theta, &single)?.0;
            let e2 = est_average.estimate_theta(&y)?.0 - feasible_projection(&theta, &average)?.0;
            Ok((e1.norm_squared(), e2.norm_squared()))
        })
        .collect::<Result<Vec<(f64, f64)>>>()?;

    let (s1, s2): (Vec<f64>, Vec<f64>) = errors.into_iter().unzip();
    let (trace_single, stderr_single) = mean_and_stderr(&s1);
    let (trace_average, stderr_average) = mean_and_stderr(&s2);
    Ok(CellStats {
        trace_single,
        trace_average,
        stderr_single,
        stderr_average,
    })
}

fn record(
    config: &ExperimentConfig,
    cell_index: usize,
    shape: &NetworkShape,
    ref_index: usize,
    stats: CellStats,
    bounds: (f64, f64),
) -> CellRecord {
    CellRecord {
        cell_index,
        n_sensors: shape.n_sensors(),
        n_measurements: shape.n_measurements(),
        runs: config.runs_per_cell,
        master_seed: config.master_seed,
        single_ref_index: ref_index,
        empirical_trace_single: stats.trace_single,
        empirical_trace_average: stats.trace_average,
        stderr_single: stats.stderr_single,
        stderr_average: stats.stderr_average,
        ccrb_trace_single: bounds.0,
        ccrb_trace_average: bounds.1,
        delta_hat: stats.trace_average / stats.trace_single,
        delta_ccrb: bounds.1 / bounds.0,
        low_confidence: config.runs_per_cell < LOW_CONFIDENCE_RUNS,
    }
}

/// Empirical `δ̂ = Tr(Σ̂_average)/Tr(Σ̂_single)` over an `(N, K)` grid under
/// homoscedastic noise, next to the bound ratio.
pub fn run_delta_grid(config: &ExperimentConfig) -> Result<SweepResult> {
    config.validate()?;
    let NoiseSpec::Homoscedastic { variance } = config.noise else {
        return Err(Error::InvalidConfig(
            "delta grid needs homoscedastic noise".into(),
        ));
    };
    let noise = NoiseModel::homoscedastic(variance)?;
    let cells = config
        .cells()
        .into_par_iter()
        .enumerate()
        .map(|(idx, (n, k))| {
            let shape = NetworkShape::single_source(n, k)?;
            let ref_index = match config.single_reference {
                ReferenceChoice::MinVariance => 0,
                ReferenceChoice::Index(i) => i,
            };
            let stats = simulate_cell(config, idx, &shape, &noise, ref_index)?;
            let bounds = (
                trace_single_ref_homoscedastic(n, k, variance),
                trace_average_ref_homoscedastic(n, k, variance),
            );
            Ok(record(config, idx, &shape, ref_index, stats, bounds))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepResult {
        kind: SweepKind::DeltaGrid,
        master_seed: config.master_seed,
        runs_per_cell: config.runs_per_cell,
        variances: None,
        cells,
    })
}

/// Empirical traces for both references under independent, non-identical
/// noise, with the matching CCRB traces. Cells come out `N`-major, so a
/// single-`N` config gives a `K` curve and a single-`K` config an `N` curve.
pub fn run_variance_sweep(config: &ExperimentConfig) -> Result<SweepResult> {
    config.validate()?;
    let variances = config.resolve_variances();
    let cells = config
        .cells()
        .into_par_iter()
        .enumerate()
        .map(|(idx, (n, k))| {
            let shape = NetworkShape::single_source(n, k)?;
            let vars = match (&variances, &config.noise) {
                (Some(v), _) => v[..n].to_vec(),
                (None, NoiseSpec::Homoscedastic { variance }) => vec![*variance; n],
                (None, _) => unreachable!("non-homoscedastic specs always resolve variances"),
            };
            let ref_index = match config.single_reference {
                ReferenceChoice::MinVariance => min_variance_index(&vars),
                ReferenceChoice::Index(i) => i,
            };
            let noise = NoiseModel::independent_diagonal(vars.clone())?;
            let stats = simulate_cell(config, idx, &shape, &noise, ref_index)?;
            let traces = traces_diagonal_noise(k, &vars, ref_index)?;
            Ok(record(
                config,
                idx,
                &shape,
                ref_index,
                stats,
                (traces.trace_single, traces.trace_average),
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepResult {
        kind: SweepKind::VarianceSweep,
        master_seed: config.master_seed,
        runs_per_cell: config.runs_per_cell,
        variances,
        cells,
    })
}
