//! Fisher information and constrained Cramér–Rao bounds for the offset model.
//!
//! For a projector `Γ` and sensor covariance `Σ` the Fisher information of the
//! projected data is `F = K·Γᵀ(ΓΣΓᵀ)⁻¹Γ`, which is rank deficient: offsets are
//! only identifiable up to the signal subspace. A constraint with nullspace
//! basis `U` restores identifiability and bounds the estimator covariance by
//! `U(UᵀFU)⁻¹Uᵀ`.
//!
//! Besides the matrix pipeline this module exposes the closed-form traces for
//! the homoscedastic and independent-diagonal noise cases, so each can be
//! cross-checked against the other.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{self, NULLSPACE_REL_TOL};
use crate::model::{
    average_reference_constraint, single_source_projector, ConstraintLabel, NetworkShape,
    NoiseModel, ProjectionMatrix, ReferenceConstraint,
};

#[derive(Debug, Clone, PartialEq)]
pub struct FisherInformation {
    matrix: DMatrix<f64>,
    n_measurements: usize,
}

impl FisherInformation {
    /// Wraps an externally computed information matrix. It must be square and
    /// symmetric; PSD-ness is checked with a small negative-eigenvalue slack.
    pub fn from_matrix(matrix: DMatrix<f64>, n_measurements: usize) -> Result<Self> {
        if !linalg::is_symmetric(&matrix, 1e-12) {
            return Err(Error::DimensionMismatch(
                "Fisher information must be square and symmetric".into(),
            ));
        }
        let eig = SymmetricEigen::new(linalg::symmetrize(&matrix));
        if eig.eigenvalues.min() < -1e-10 * eig.eigenvalues.amax().max(1.0) {
            return Err(Error::DimensionMismatch(
                "Fisher information is not positive semi-definite".into(),
            ));
        }
        Ok(Self {
            matrix,
            n_measurements,
        })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// The `K` multiplier baked into the matrix.
    pub fn n_measurements(&self) -> usize {
        self.n_measurements
    }

    pub fn n_sensors(&self) -> usize {
        self.matrix.nrows()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundReport {
    pub ccrb_matrix: DMatrix<f64>,
    pub trace: f64,
    pub constraint_label: ConstraintLabel,
    pub closed_form_trace: Option<f64>,
}

/// `F = K·Γᵀ(ΓΣΓᵀ)⁻¹Γ`.
pub fn fim_general(
    gamma: &ProjectionMatrix,
    noise: &NoiseModel,
    n_measurements: usize,
) -> Result<FisherInformation> {
    if n_measurements == 0 {
        return Err(Error::InvalidShape("need at least 1 measurement".into()));
    }
    let g = gamma.matrix();
    let sigma = noise.covariance(gamma.n_sensors())?;
    let projected = linalg::symmetrize(&(g * &sigma * g.transpose()));
    if !linalg::is_spd(&projected) {
        return Err(Error::SingularProjectedCovariance);
    }
    let chol = projected
        .cholesky()
        .ok_or(Error::SingularProjectedCovariance)?;
    let whitened = chol.solve(g);
    let f = (g.transpose() * whitened) * n_measurements as f64;
    Ok(FisherInformation {
        matrix: linalg::symmetrize(&f),
        n_measurements,
    })
}

/// `Ψ = U₂ᵀU₂ = I_{N−1} + 1·1ᵀ`.
pub fn psi(n_sensors: usize) -> DMatrix<f64> {
    let m = n_sensors - 1;
    DMatrix::identity(m, m) + DMatrix::from_element(m, m, 1.0)
}

/// `Ψ⁻¹ = I_{N−1} − 1·1ᵀ/N` by Sherman–Morrison with `A = I`, `b = 1`,
/// `μ = 1 + bᵀA⁻¹b = N`.
pub fn psi_inverse(n_sensors: usize) -> DMatrix<f64> {
    let m = n_sensors - 1;
    let mu = 1.0 + m as f64;
    DMatrix::identity(m, m) - DMatrix::from_element(m, m, 1.0 / mu)
}

/// `Ω = Σ̄ + σ²_ref·1·1ᵀ`, where `Σ̄` is the diagonal of the non-reference
/// variances in sensor order. Equals `U₂ᵀΣU₂` once the reference is moved to
/// the front.
pub fn omega(variances: &[f64], ref_index: usize) -> Result<DMatrix<f64>> {
    check_variances(variances)?;
    let n = variances.len();
    if ref_index >= n {
        return Err(Error::IndexOutOfRange {
            index: ref_index,
            n_sensors: n,
        });
    }
    let others: Vec<f64> = non_reference(variances, ref_index).collect();
    let m = n - 1;
    let base = variances[ref_index];
    Ok(DMatrix::from_fn(m, m, |i, j| {
        if i == j {
            others[i] + base
        } else {
            base
        }
    }))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProofIntermediates {
    pub psi: DMatrix<f64>,
    pub psi_inv: DMatrix<f64>,
    pub omega: DMatrix<f64>,
}

impl ProofIntermediates {
    pub fn new(variances: &[f64], ref_index: usize) -> Result<Self> {
        let n = variances.len();
        Ok(Self {
            psi: psi(n),
            psi_inv: psi_inverse(n),
            omega: omega(variances, ref_index)?,
        })
    }
}

/// `F = σ⁻²·K·U₂Ψ⁻¹U₂ᵀ` for `Σ = σ²I`.
pub fn fim_homoscedastic_closed_form(
    n_sensors: usize,
    n_measurements: usize,
    variance: f64,
) -> Result<FisherInformation> {
    if !(variance.is_finite() && variance > 0.0) {
        return Err(Error::InvalidNoise(format!(
            "variance must be strictly positive, got {variance}"
        )));
    }
    let shape = NetworkShape::single_source(n_sensors, n_measurements)?;
    let avg = average_reference_constraint(&shape)?;
    let u2 = avg.nullspace_basis();
    let f = u2 * psi_inverse(n_sensors) * u2.transpose() * (n_measurements as f64 / variance);
    Ok(FisherInformation {
        matrix: linalg::symmetrize(&f),
        n_measurements,
    })
}

/// `U(UᵀFU)⁻¹Uᵀ`, independent of which basis `U` of `null(C)` is supplied.
pub fn ccrb(fim: &FisherInformation, constraint: &ReferenceConstraint) -> Result<BoundReport> {
    if constraint.n_sensors() != fim.n_sensors() {
        return Err(Error::DimensionMismatch(format!(
            "constraint has {} sensors, Fisher information has {}",
            constraint.n_sensors(),
            fim.n_sensors()
        )));
    }
    let u = constraint.nullspace_basis();
    let reduced = linalg::symmetrize(&(u.transpose() * fim.matrix() * u));
    let eig = SymmetricEigen::new(reduced.clone());
    let max = eig.eigenvalues.max();
    if max.is_nan() || max <= 0.0 || eig.eigenvalues.min() <= NULLSPACE_REL_TOL * max {
        return Err(Error::ConstraintNotIdentifying);
    }
    let chol = reduced.cholesky().ok_or(Error::ConstraintNotIdentifying)?;
    let m = linalg::symmetrize(&(u * chol.solve(&u.transpose())));
    Ok(BoundReport {
        trace: linalg::trace(&m),
        ccrb_matrix: m,
        constraint_label: constraint.label(),
        closed_form_trace: None,
    })
}

/// Builds the single-source FIM for `shape`/`noise` and bounds it under
/// `constraint`, attaching the closed-form trace where one exists.
pub fn bound_report(
    shape: &NetworkShape,
    noise: &NoiseModel,
    constraint: &ReferenceConstraint,
) -> Result<BoundReport> {
    let gamma = single_source_projector(shape)?;
    let fim = fim_general(&gamma, noise, shape.n_measurements())?;
    let mut report = ccrb(&fim, constraint)?;
    let (n, k) = (shape.n_sensors(), shape.n_measurements());
    report.closed_form_trace = match (noise.uniform_variance(n), constraint.label()) {
        (Some(v), ConstraintLabel::Single(_)) => Some(trace_single_ref_homoscedastic(n, k, v)),
        (Some(v), ConstraintLabel::Average) => Some(trace_average_ref_homoscedastic(n, k, v)),
        (None, label) => match (noise.diagonal_variances(n), label) {
            (Some(vars), ConstraintLabel::Single(i)) => {
                Some(traces_diagonal_noise(k, &vars, i)?.trace_single)
            }
            (Some(vars), ConstraintLabel::Average) => {
                Some(traces_diagonal_noise(k, &vars, min_variance_index(&vars))?.trace_average)
            }
            _ => None,
        },
        _ => None,
    };
    Ok(report)
}

/// Moore–Penrose pseudo-inverse of the FIM (eigenvalues below
/// `1e-10·λ_max` are treated as zero).
pub fn pseudo_inverse(fim: &FisherInformation) -> DMatrix<f64> {
    linalg::pseudo_inverse_sym(fim.matrix())
}

/// Constraint whose gradient rows span the FIM nullspace. For single-source
/// models this is the average reference up to scale.
pub fn optimal_constraint_from_fim(fim: &FisherInformation) -> Result<ReferenceConstraint> {
    let eig = SymmetricEigen::new(linalg::symmetrize(fim.matrix()));
    let max = eig.eigenvalues.max();
    if max.is_nan() || max <= 0.0 {
        return Err(Error::DegenerateFisher);
    }
    let threshold = NULLSPACE_REL_TOL * max;
    let (null, range): (Vec<usize>, Vec<usize>) =
        (0..eig.eigenvalues.len()).partition(|&i| eig.eigenvalues[i] < threshold);
    if null.is_empty() {
        return Err(Error::NoConstraintNeeded);
    }
    let n = fim.n_sensors();
    let mut gradient = DMatrix::zeros(null.len(), n);
    for (row, &i) in null.iter().enumerate() {
        let v = eig.eigenvectors.column(i);
        // Fix the eigenvector sign so the gradient is reproducible.
        let sign = if v.sum() < 0.0 { -1.0 } else { 1.0 };
        gradient.row_mut(row).copy_from(&(v.transpose() * sign));
    }
    let basis = eig.eigenvectors.select_columns(range.iter());
    ReferenceConstraint::new(
        gradient,
        nalgebra::DVector::zeros(null.len()),
        basis,
        ConstraintLabel::FimNullspace,
    )
}

/// `2σ²(N−1)/K`.
pub fn trace_single_ref_homoscedastic(n_sensors: usize, n_measurements: usize, variance: f64) -> f64 {
    debug_assert!(n_sensors >= 2 && n_measurements >= 1);
    2.0 * variance * (n_sensors - 1) as f64 / n_measurements as f64
}

/// `σ²(N−1)/K`, half the single-reference trace.
pub fn trace_average_ref_homoscedastic(
    n_sensors: usize,
    n_measurements: usize,
    variance: f64,
) -> f64 {
    debug_assert!(n_sensors >= 2 && n_measurements >= 1);
    variance * (n_sensors - 1) as f64 / n_measurements as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DiagonalTraces {
    pub ref_index: usize,
    pub trace_single: f64,
    pub trace_average: f64,
    /// `trace_single − trace_average`, from the matrices. Authoritative.
    pub gap: f64,
    /// `(N/K)·σ²_ref·S/(σ²_ref + S)`, `S` the sum of non-reference variances.
    /// Reported for comparison only; it disagrees with `gap` unless all
    /// variances are equal.
    pub closed_form_gap: f64,
}

impl DiagonalTraces {
    pub fn gap_discrepancy(&self) -> f64 {
        self.gap - self.closed_form_gap
    }
}

/// CCRB traces under independent, non-identical noise with the single
/// reference at `ref_index`: `Tr(Ω)/K` and `Tr(ΩΨ⁻¹)/K`.
pub fn traces_diagonal_noise(
    n_measurements: usize,
    variances: &[f64],
    ref_index: usize,
) -> Result<DiagonalTraces> {
    if n_measurements == 0 {
        return Err(Error::InvalidShape("need at least 1 measurement".into()));
    }
    let n = variances.len();
    let om = omega(variances, ref_index)?;
    let k = n_measurements as f64;
    let trace_single = linalg::trace(&om) / k;
    let trace_average = linalg::trace(&(&om * psi_inverse(n))) / k;

    let reference = variances[ref_index];
    let s: f64 = non_reference(variances, ref_index).sum();
    let closed_form_gap = (n as f64 / k) * reference * s / (reference + s);

    Ok(DiagonalTraces {
        ref_index,
        trace_single,
        trace_average,
        gap: trace_single - trace_average,
        closed_form_gap,
    })
}

/// Index of the smallest variance (first one on ties).
pub fn min_variance_index(variances: &[f64]) -> usize {
    variances
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |best, (i, &v)| if v < best.1 { (i, v) } else { best })
        .0
}

fn non_reference(variances: &[f64], ref_index: usize) -> impl Iterator<Item = f64> + '_ {
    variances
        .iter()
        .enumerate()
        .filter(move |(i, _)| *i != ref_index)
        .map(|(_, &v)| v)
}

fn check_variances(variances: &[f64]) -> Result<()> {
    if variances.len() < 2 {
        return Err(Error::InvalidNoise("need at least 2 variances".into()));
    }
    if let Some((i, v)) = variances
        .iter()
        .enumerate()
        .find(|(_, v)| !(v.is_finite() && **v > 0.0))
    {
        return Err(Error::InvalidNoise(format!(
            "variance of sensor {i} must be strictly positive, got {v}"
        )));
    }
    Ok(())
}
