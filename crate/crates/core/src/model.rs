//! Measurement model for a sensor network with per-sensor offsets.
//!
//! Each of `N` sensors records `K` samples `y_n = s_n + θ_n·1_K + η_n`. The
//! stacked measurement vector is sensor-major: entry `(n, k)` of the `N×K`
//! sample matrix sits at index `n·K + k` of `vec(y)`. Noise is stationary
//! across epochs, so the full covariance is `Σ ⊗ I_K`; only the `N×N` factor
//! `Σ` is ever materialized.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;

/// Tolerance on `|C·U|` entries for a constructed constraint.
pub const CONSTRAINT_ORTHOGONALITY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkShape {
    n_sensors: usize,
    n_measurements: usize,
    subspace_rank: usize,
}

impl NetworkShape {
    pub fn new(n_sensors: usize, n_measurements: usize, subspace_rank: usize) -> Result<Self> {
        if n_sensors < 2 {
            return Err(Error::InvalidShape(format!(
                "need at least 2 sensors, got {n_sensors}"
            )));
        }
        if n_measurements < 1 {
            return Err(Error::InvalidShape("need at least 1 measurement".into()));
        }
        if subspace_rank < 1 || subspace_rank >= n_sensors {
            return Err(Error::InvalidShape(format!(
                "subspace rank must satisfy 1 <= r < N, got r={subspace_rank}, N={n_sensors}"
            )));
        }
        Ok(Self {
            n_sensors,
            n_measurements,
            subspace_rank,
        })
    }

    /// All sensors observe one common signal (`r = 1`).
    pub fn single_source(n_sensors: usize, n_measurements: usize) -> Result<Self> {
        Self::new(n_sensors, n_measurements, 1)
    }

    pub fn n_sensors(&self) -> usize {
        self.n_sensors
    }

    pub fn n_measurements(&self) -> usize {
        self.n_measurements
    }

    pub fn subspace_rank(&self) -> usize {
        self.subspace_rank
    }

    /// Number of constraint rows needed to make offsets identifiable.
    pub fn n_constraints(&self) -> usize {
        self.subspace_rank
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum NoiseKind {
    Homoscedastic { variance: f64 },
    IndependentDiagonal { variances: Vec<f64> },
    GeneralStationary { covariance: DMatrix<f64> },
}

/// Sensor noise covariance `Σ`, stationary across measurement epochs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    kind: NoiseKind,
}

impl NoiseModel {
    pub fn homoscedastic(variance: f64) -> Result<Self> {
        if !(variance.is_finite() && variance > 0.0) {
            return Err(Error::InvalidNoise(format!(
                "variance must be strictly positive, got {variance}"
            )));
        }
        Ok(Self {
            kind: NoiseKind::Homoscedastic { variance },
        })
    }

    pub fn independent_diagonal(variances: Vec<f64>) -> Result<Self> {
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
        Ok(Self {
            kind: NoiseKind::IndependentDiagonal { variances },
        })
    }

    pub fn general(covariance: DMatrix<f64>) -> Result<Self> {
        if !covariance.is_square() || covariance.nrows() < 2 {
            return Err(Error::InvalidNoise(format!(
                "covariance must be square with N >= 2, got {}x{}",
                covariance.nrows(),
                covariance.ncols()
            )));
        }
        if !linalg::is_spd(&covariance) {
            return Err(Error::InvalidNoise(
                "covariance is not symmetric positive definite".into(),
            ));
        }
        Ok(Self {
            kind: NoiseKind::GeneralStationary { covariance },
        })
    }

    /// Diagonal matrices become `IndependentDiagonal` (keeping the sensor
    /// count), anything else `GeneralStationary`.
    pub fn from_covariance(covariance: DMatrix<f64>) -> Result<Self> {
        let n = covariance.nrows();
        let off_diagonal_zero = covariance.is_square()
            && (0..n).all(|i| (0..n).all(|j| i == j || covariance[(i, j)] == 0.0));
        if !off_diagonal_zero {
            return Self::general(covariance);
        }
        Self::independent_diagonal(covariance.diagonal().iter().copied().collect())
    }

    pub fn kind(&self) -> &NoiseKind {
        &self.kind
    }

    /// Sensor count fixed by the model, if any (homoscedastic fits any N).
    pub fn n_sensors(&self) -> Option<usize> {
        match &self.kind {
            NoiseKind::Homoscedastic { .. } => None,
            NoiseKind::IndependentDiagonal { variances } => Some(variances.len()),
            NoiseKind::GeneralStationary { covariance } => Some(covariance.nrows()),
        }
    }

    pub fn check_sensors(&self, n: usize) -> Result<()> {
        match self.n_sensors() {
            Some(m) if m != n => Err(Error::DimensionMismatch(format!(
                "noise model has {m} sensors, network has {n}"
            ))),
            _ => Ok(()),
        }
    }

    /// Materializes the `N×N` sensor covariance `Σ`.
    pub fn covariance(&self, n: usize) -> Result<DMatrix<f64>> {
        self.check_sensors(n)?;
        Ok(match &self.kind {
            NoiseKind::Homoscedastic { variance } => DMatrix::identity(n, n) * *variance,
            NoiseKind::IndependentDiagonal { variances } => {
                DMatrix::from_diagonal(&DVector::from_column_slice(variances))
            }
            NoiseKind::GeneralStationary { covariance } => covariance.clone(),
        })
    }

    /// Per-sensor variances when `Σ` is diagonal.
    pub fn diagonal_variances(&self, n: usize) -> Option<Vec<f64>> {
        self.check_sensors(n).ok()?;
        match &self.kind {
            NoiseKind::Homoscedastic { variance } => Some(vec![*variance; n]),
            NoiseKind::IndependentDiagonal { variances } => Some(variances.clone()),
            NoiseKind::GeneralStationary { .. } => None,
        }
    }

    pub fn homoscedastic_variance(&self) -> Option<f64> {
        match &self.kind {
            NoiseKind::Homoscedastic { variance } => Some(*variance),
            _ => None,
        }
    }

    /// Common variance when every sensor has the same one, whatever the kind.
    pub fn uniform_variance(&self, n: usize) -> Option<f64> {
        let v = self.diagonal_variances(n)?;
        v.iter().all(|&x| x == v[0]).then_some(v[0])
    }
}

/// Full-row-rank `Γ` whose rows span the orthogonal complement of the signal
/// subspace.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionMatrix {
    gamma: DMatrix<f64>,
}

impl ProjectionMatrix {
    /// Validates an arbitrary projector for the given shape.
    pub fn from_matrix(gamma: DMatrix<f64>, shape: &NetworkShape) -> Result<Self> {
        let rows = shape.n_sensors() - shape.subspace_rank();
        if gamma.nrows() != rows || gamma.ncols() != shape.n_sensors() {
            return Err(Error::DimensionMismatch(format!(
                "projector must be {rows}x{}, got {}x{}",
                shape.n_sensors(),
                gamma.nrows(),
                gamma.ncols()
            )));
        }
        if linalg::numerical_rank(&gamma, 1e-12) != rows {
            return Err(Error::InvalidShape("projector rows are not independent".into()));
        }
        Ok(Self { gamma })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.gamma
    }

    pub fn n_sensors(&self) -> usize {
        self.gamma.ncols()
    }

    pub fn n_rows(&self) -> usize {
        self.gamma.nrows()
    }
}

/// `Γ = [−1_{N−1} | I_{N−1}]`, which annihilates the common-mode vector `1_N`.
pub fn single_source_projector(shape: &NetworkShape) -> Result<ProjectionMatrix> {
    if shape.subspace_rank() != 1 {
        return Err(Error::InvalidShape(format!(
            "single-source projector needs subspace rank 1, got {}",
            shape.subspace_rank()
        )));
    }
    let n = shape.n_sensors();
    let gamma = DMatrix::from_fn(n - 1, n, |i, j| {
        if j == 0 {
            -1.0
        } else if j == i + 1 {
            1.0
        } else {
            0.0
        }
    });
    Ok(ProjectionMatrix { gamma })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConstraintLabel {
    /// One sensor's offset pinned to the response.
    Single(usize),
    /// Mean of all offsets pinned to the response.
    Average,
    /// Gradient spanning the Fisher information nullspace.
    FimNullspace,
    Custom,
}

impl fmt::Display for ConstraintLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConstraintLabel::Single(i) => write!(f, "single:{i}"),
            ConstraintLabel::Average => write!(f, "average"),
            ConstraintLabel::FimNullspace => write!(f, "fim-nullspace"),
            ConstraintLabel::Custom => write!(f, "custom"),
        }
    }
}

/// Linear constraint `C·θ = d` together with a basis `U` of `null(C)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceConstraint {
    gradient: DMatrix<f64>,
    response: DVector<f64>,
    nullspace_basis: DMatrix<f64>,
    label: ConstraintLabel,
}

impl ReferenceConstraint {
    pub fn new(
        gradient: DMatrix<f64>,
        response: DVector<f64>,
        nullspace_basis: DMatrix<f64>,
        label: ConstraintLabel,
    ) -> Result<Self> {
        let k = gradient.nrows();
        let n = gradient.ncols();
        if k == 0 || k >= n {
            return Err(Error::InvalidConstraint(format!(
                "gradient must have 1..N-1 rows, got {k}x{n}"
            )));
        }
        if response.len() != k {
            return Err(Error::InvalidConstraint(format!(
                "response has length {}, gradient has {k} rows",
                response.len()
            )));
        }
        if nullspace_basis.nrows() != n || nullspace_basis.ncols() != n - k {
            return Err(Error::InvalidConstraint(format!(
                "nullspace basis must be {n}x{}, got {}x{}",
                n - k,
                nullspace_basis.nrows(),
                nullspace_basis.ncols()
            )));
        }
        if linalg::numerical_rank(&gradient, 1e-12) != k {
            return Err(Error::InvalidConstraint("gradient is not full row rank".into()));
        }
        if linalg::numerical_rank(&nullspace_basis, 1e-12) != n - k {
            return Err(Error::InvalidConstraint(
                "nullspace basis columns are not independent".into(),
            ));
        }
        let residual = (&gradient * &nullspace_basis).amax();
        if residual > CONSTRAINT_ORTHOGONALITY_TOL {
            return Err(Error::InvalidConstraint(format!(
                "basis is not in the gradient nullspace: max|C·U| = {residual:e}"
            )));
        }
        Ok(Self {
            gradient,
            response,
            nullspace_basis,
            label,
        })
    }

    /// Same constraint, different basis for the same nullspace.
    pub fn with_nullspace_basis(&self, basis: DMatrix<f64>) -> Result<Self> {
        Self::new(
            self.gradient.clone(),
            self.response.clone(),
            basis,
            self.label,
        )
    }

    pub fn gradient(&self) -> &DMatrix<f64> {
        &self.gradient
    }

    pub fn response(&self) -> &DVector<f64> {
        &self.response
    }

    pub fn nullspace_basis(&self) -> &DMatrix<f64> {
        &self.nullspace_basis
    }

    pub fn label(&self) -> ConstraintLabel {
        self.label
    }

    pub fn n_sensors(&self) -> usize {
        self.gradient.ncols()
    }

    pub fn n_rows(&self) -> usize {
        self.gradient.nrows()
    }
}

/// Pins sensor `ref_index` to zero offset.
pub fn single_reference_constraint(
    shape: &NetworkShape,
    ref_index: usize,
) -> Result<ReferenceConstraint> {
    let n = shape.n_sensors();
    if ref_index >= n {
        return Err(Error::IndexOutOfRange {
            index: ref_index,
            n_sensors: n,
        });
    }
    let gradient = DMatrix::from_fn(1, n, |_, j| if j == ref_index { 1.0 } else { 0.0 });
    // Columns: standard basis vectors of every sensor except the reference.
    let basis = DMatrix::from_fn(n, n - 1, |i, j| {
        let sensor = if j < ref_index { j } else { j + 1 };
        if i == sensor {
            1.0
        } else {
            0.0
        }
    });
    ReferenceConstraint::new(
        gradient,
        DVector::zeros(1),
        basis,
        ConstraintLabel::Single(ref_index),
    )
}

/// Pins the mean offset to zero: `C = 1ᵀ/N`, `U = [−1ᵀ; I]`.
pub fn average_reference_constraint(shape: &NetworkShape) -> Result<ReferenceConstraint> {
    let n = shape.n_sensors();
    let gradient = DMatrix::from_element(1, n, 1.0 / n as f64);
    let basis = DMatrix::from_fn(n, n - 1, |i, j| {
        if i == 0 {
            -1.0
        } else if i == j + 1 {
            1.0
        } else {
            0.0
        }
    });
    ReferenceConstraint::new(gradient, DVector::zeros(1), basis, ConstraintLabel::Average)
}

/// Length-`N` vector of per-sensor offsets.
#[derive(Debug, Clone, PartialEq)]
pub struct OffsetVector(pub DVector<f64>);

impl OffsetVector {
    pub fn new(theta: DVector<f64>) -> Self {
        Self(theta)
    }

    pub fn from_slice(theta: &[f64]) -> Self {
        Self(DVector::from_column_slice(theta))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_vector(&self) -> &DVector<f64> {
        &self.0
    }
}

/// `N×K` sample matrix; row `n` holds sensor `n`'s measurements.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementSet {
    samples: DMatrix<f64>,
}

impl MeasurementSet {
    pub fn new(samples: DMatrix<f64>) -> Result<Self> {
        if samples.nrows() < 2 || samples.ncols() < 1 {
            return Err(Error::DimensionMismatch(format!(
                "need at least 2 sensors and 1 measurement, got {}x{}",
                samples.nrows(),
                samples.ncols()
            )));
        }
        Ok(Self { samples })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let k = rows.first().map_or(0, Vec::len);
        if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != k) {
            return Err(Error::DimensionMismatch(format!(
                "row {i} has {} columns, expected {k}",
                r.len()
            )));
        }
        Self::new(DMatrix::from_fn(rows.len(), k, |i, j| rows[i][j]))
    }

    /// Inverse of [`MeasurementSet::vectorize`].
    pub fn from_vector(y: &DVector<f64>, n_sensors: usize, n_measurements: usize) -> Result<Self> {
        if y.len() != n_sensors * n_measurements {
            return Err(Error::DimensionMismatch(format!(
                "vector of length {} cannot hold {n_sensors}x{n_measurements}",
                y.len()
            )));
        }
        Self::new(DMatrix::from_fn(n_sensors, n_measurements, |n, k| {
            y[n * n_measurements + k]
        }))
    }

    pub fn samples(&self) -> &DMatrix<f64> {
        &self.samples
    }

    pub fn n_sensors(&self) -> usize {
        self.samples.nrows()
    }

    pub fn n_measurements(&self) -> usize {
        self.samples.ncols()
    }

    pub fn check_shape(&self, shape: &NetworkShape) -> Result<()> {
        if self.n_sensors() != shape.n_sensors() || self.n_measurements() != shape.n_measurements()
        {
            return Err(Error::DimensionMismatch(format!(
                "measurements are {}x{}, network is {}x{}",
                self.n_sensors(),
                self.n_measurements(),
                shape.n_sensors(),
                shape.n_measurements()
            )));
        }
        Ok(())
    }

    /// Sensor-major stacking: entry `(n, k)` lands at index `n·K + k`.
    pub fn vectorize(&self) -> DVector<f64> {
        let (n, k) = self.samples.shape();
        DVector::from_fn(n * k, |idx, _| self.samples[(idx / k, idx % k)])
    }

    /// Per-sensor mean over the `K` epochs.
    pub fn sensor_means(&self) -> DVector<f64> {
        let k = self.n_measurements() as f64;
        DVector::from_fn(self.n_sensors(), |n, _| self.samples.row(n).sum() / k)
    }
}

/// `Γ·Y`, the projected `(N−r)×K` data, without forming `Γ ⊗ I_K`.
pub fn project_measurements(
    y: &MeasurementSet,
    gamma: &ProjectionMatrix,
) -> Result<DMatrix<f64>> {
    if gamma.n_sensors() != y.n_sensors() {
        return Err(Error::DimensionMismatch(format!(
            "projector expects {} sensors, measurements have {}",
            gamma.n_sensors(),
            y.n_sensors()
        )));
    }
    Ok(gamma.matrix() * y.samples())
}
