//! Constrained weighted least-squares offset estimation.
//!
//! Minimizes `‖W̄P̄(y − Hθ)‖²` subject to `Cθ = d`, with `P̄ = P ⊗ I_K`,
//! `W̄ = W ⊗ I_K` and `H = I_N ⊗ 1_K`. Nothing of size `NK` is formed: the
//! normal matrix collapses to `K·PᵀWᵀWP` and the data enter only through the
//! per-sensor means. The constrained problem is solved through the stationarity
//! system of its Lagrangian `‖·‖² + λᵀ(Cθ − d)`.

use nalgebra::{DMatrix, DVector, LU};

use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{MeasurementSet, NoiseModel, OffsetVector, ReferenceConstraint};

/// Singular-value ratio below which the saddle-point system counts as singular.
const KKT_RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub enum Weighting {
    /// `W = Σ^{-1/2}`.
    OptimalWhitening,
    Identity,
    /// Any symmetric positive-definite `N×N` matrix.
    Custom(DMatrix<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorConfig {
    pub weighting: Weighting,
    pub constraint: ReferenceConstraint,
}

impl EstimatorConfig {
    pub fn optimal(constraint: ReferenceConstraint) -> Self {
        Self {
            weighting: Weighting::OptimalWhitening,
            constraint,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimateResult {
    pub theta_hat: OffsetVector,
    pub lagrange_multiplier: DVector<f64>,
    /// `‖W̄P̄(y − Hθ̂)‖₂`.
    pub residual_norm: f64,
    /// `max |Cθ̂ − d|`.
    pub constraint_violation: f64,
}

/// `P = I_N − 1·1ᵀ/N`.
pub fn centering_projector(n_sensors: usize) -> DMatrix<f64> {
    let n = n_sensors as f64;
    DMatrix::identity(n_sensors, n_sensors) - DMatrix::from_element(n_sensors, n_sensors, 1.0 / n)
}

/// Estimator with the saddle-point system factored once; reusable across
/// any number of measurement sets of the same network.
#[derive(Debug, Clone)]
pub struct OffsetEstimator {
    constraint: ReferenceConstraint,
    /// `B = W·P`.
    weighted_centering: DMatrix<f64>,
    /// `A = BᵀB / scale`.
    normal: DMatrix<f64>,
    scale: f64,
    kkt: LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
}

impl OffsetEstimator {
    pub fn new(noise: &NoiseModel, config: &EstimatorConfig) -> Result<Self> {
        let constraint = config.constraint.clone();
        let n = constraint.n_sensors();
        let k = constraint.n_rows();
        noise.check_sensors(n)?;

        let w = match &config.weighting {
            Weighting::OptimalWhitening => linalg::inv_sqrt_spd(&noise.covariance(n)?),
            Weighting::Identity => DMatrix::identity(n, n),
            Weighting::Custom(w) => {
                if w.shape() != (n, n) {
                    return Err(Error::DimensionMismatch(format!(
                        "weighting must be {n}x{n}, got {}x{}",
                        w.nrows(),
                        w.ncols()
                    )));
                }
                if !linalg::is_spd(w) {
                    return Err(Error::InvalidConfig(
                        "custom weighting is not symmetric positive definite".into(),
                    ));
                }
                w.clone()
            }
        };
        let weighted_centering = w * centering_projector(n);
        let normal_raw = linalg::symmetrize(&(weighted_centering.transpose() * &weighted_centering));
        let scale = normal_raw.amax();
        if scale.is_nan() || scale <= 0.0 {
            return Err(Error::Unidentifiable);
        }
        let normal = normal_raw / scale;

        let c = constraint.gradient();
        let mut kkt = DMatrix::zeros(n + k, n + k);
        kkt.view_mut((0, 0), (n, n)).copy_from(&normal);
        kkt.view_mut((0, n), (n, k)).copy_from(&c.transpose());
        kkt.view_mut((n, 0), (k, n)).copy_from(c);
        if linalg::numerical_rank(&kkt, KKT_RANK_TOL) < n + k {
            return Err(Error::Unidentifiable);
        }

        Ok(Self {
            constraint,
            weighted_centering,
            normal,
            scale,
            kkt: kkt.lu(),
        })
    }

    pub fn constraint(&self) -> &ReferenceConstraint {
        &self.constraint
    }

    /// Full estimate including residual norm and constraint violation.
    pub fn estimate(&self, y: &MeasurementSet) -> Result<EstimateResult> {
        let (theta, lambda) = self.solve(y)?;
        let residuals = y.samples() - &theta * DVector::from_element(y.n_measurements(), 1.0).transpose();
        let residual_norm = (&self.weighted_centering * residuals).norm();
        let violation = (self.constraint.gradient() * &theta - self.constraint.response()).amax();
        Ok(EstimateResult {
            theta_hat: OffsetVector(theta),
            lagrange_multiplier: lambda,
            residual_norm,
            constraint_violation: violation,
        })
    }

    /// Offsets only; skips the `O(N²K)` residual evaluation.
    pub fn estimate_theta(&self, y: &MeasurementSet) -> Result<OffsetVector> {
        self.solve(y).map(|(theta, _)| OffsetVector(theta))
    }

    fn solve(&self, y: &MeasurementSet) -> Result<(DVector<f64>, DVector<f64>)> {
        let n = self.constraint.n_sensors();
        let k = self.constraint.n_rows();
        if y.n_sensors() != n {
            return Err(Error::DimensionMismatch(format!(
                "estimator built for {n} sensors, measurements have {}",
                y.n_sensors()
            )));
        }
        let means = y.sensor_means();
        let mut rhs = DVector::zeros(n + k);
        rhs.rows_mut(0, n).copy_from(&(&self.normal * means));
        rhs.rows_mut(n, k).copy_from(self.constraint.response());
        let sol = self.kkt.solve(&rhs).ok_or(Error::Unidentifiable)?;
        let theta = sol.rows(0, n).into_owned();
        // Undo the normalization: the true stationarity row is
        // 2K·scale·A θ + Cᵀλ = 2K·scale·A ȳ.
        let lambda = sol.rows(n, k) * (2.0 * y.n_measurements() as f64 * self.scale);
        Ok((theta, lambda))
    }
}

/// One-shot constrained WLS estimate.
pub fn estimate_offsets(
    y: &MeasurementSet,
    noise: &NoiseModel,
    config: &EstimatorConfig,
) -> Result<EstimateResult> {
    OffsetEstimator::new(noise, config)?.estimate(y)
}

/// The offset vector the constrained estimator is unbiased for: `θ` shifted
/// along `1_N` onto the constraint set, `θ − ((Cθ − d)/(C·1))·1`. The removed
/// shift is the implicit network-wide bias the reference introduces.
pub fn feasible_projection(
    theta_true: &OffsetVector,
    constraint: &ReferenceConstraint,
) -> Result<OffsetVector> {
    let n = constraint.n_sensors();
    if theta_true.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "offset vector has {} entries, constraint has {n} sensors",
            theta_true.len()
        )));
    }
    if constraint.n_rows() != 1 {
        return Err(Error::InvalidConstraint(
            "feasible projection needs a single-row constraint".into(),
        ));
    }
    let c = constraint.gradient().row(0);
    let c_ones: f64 = c.sum();
    if c_ones.abs() <= 1e-12 * c.amax() {
        return Err(Error::ProjectionUndefined);
    }
    let theta = theta_true.as_vector();
    let shift = ((c * theta)[0] - constraint.response()[0]) / c_ones;
    Ok(OffsetVector(theta.add_scalar(-shift)))
}
