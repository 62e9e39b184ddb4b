use offsetcal::model::NoiseModel;

use crate::args::NoiseArgs;
use crate::error::{CliError, CliResult};
use crate::io::read_matrix;

/// Resolves the noise flags; `fallback` applies when none was given.
pub fn noise_model(args: &NoiseArgs, n: usize, fallback: Option<f64>) -> CliResult<NoiseModel> {
    let model = if let Some(v) = args.sigma2 {
        NoiseModel::homoscedastic(v)?
    } else if let Some(vars) = &args.variances {
        NoiseModel::independent_diagonal(vars.clone())?
    } else if let Some(path) = &args.cov_file {
        NoiseModel::from_covariance(read_matrix(path)?)?
    } else if let Some(v) = fallback {
        NoiseModel::homoscedastic(v)?
    } else {
        return Err(CliError::Usage(
            "one of --sigma2, --variances or --cov-file is required".into(),
        ));
    };
    model.check_sensors(n)?;
    Ok(model)
}

/// Short description for reports and manifests.
pub fn describe(model: &NoiseModel, n: usize) -> serde_json::Value {
    use offsetcal::model::NoiseKind;
    match model.kind() {
        NoiseKind::Homoscedastic { variance } => {
            serde_json::json!({ "kind": "homoscedastic", "variance": variance })
        }
        NoiseKind::IndependentDiagonal { variances } => {
            serde_json::json!({ "kind": "diagonal", "variances": variances })
        }
        NoiseKind::GeneralStationary { covariance } => {
            let rows: Vec<Vec<f64>> = (0..n)
                .map(|i| covariance.row(i).iter().copied().collect())
                .collect();
            serde_json::json!({ "kind": "general", "covariance": rows })
        }
    }
}
