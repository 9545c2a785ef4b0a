use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats;

/// Correlation and Bland–Altman summary of predictions against truth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgreementReport {
    pub pearson_r: f64,
    pub r_squared: f64,
    /// Mean of `pred − true`.
    pub mean_error: f64,
    pub loa_low: f64,
    pub loa_high: f64,
    pub n: usize,
}

pub fn agreement(y_true: &[f64], y_pred: &[f64]) -> Result<AgreementReport> {
    if y_true.len() != y_pred.len() {
        return Err(Error::LengthMismatch(y_true.len(), y_pred.len()));
    }
    let n = y_true.len();
    if n < 3 {
        return Err(Error::InsufficientData("agreement needs at least 3 pairs".into()));
    }
    let m = stats::mean(y_true);
    let ss_tot: f64 = y_true.iter().map(|y| (y - m) * (y - m)).sum();
    if ss_tot == 0.0 {
        return Err(Error::InsufficientData("reference values have zero variance".into()));
    }
    let ss_res: f64 = y_true.iter().zip(y_pred).map(|(y, p)| (y - p) * (y - p)).sum();
    // a constant prediction carries no linear information
    let pearson_r = stats::pearson(y_true, y_pred).unwrap_or(0.0);
    let diffs: Vec<f64> = y_true.iter().zip(y_pred).map(|(y, p)| p - y).collect();
    let mean_error = stats::mean(&diffs);
    let sd = stats::std_dev(&diffs);
    Ok(AgreementReport {
        pearson_r,
        r_squared: 1.0 - ss_res / ss_tot,
        mean_error,
        loa_low: mean_error - 1.96 * sd,
        loa_high: mean_error + 1.96 * sd,
        n,
    })
}

/// Extra unexplained variance from dropping inputs: `r2_opt − r2_red`.
/// An inverted pair (sampling noise on close values) is logged, not rejected.
pub fn variance_decomposition(r2_opt: f64, r2_red: f64) -> Result<f64> {
    for (name, v) in [("r2_opt", r2_opt), ("r2_red", r2_red)] {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::InvalidArgument(format!("{name} = {v} outside [0, 1]")));
        }
    }
    if r2_red > r2_opt {
        log::warn!("reduced model explains more variance ({r2_red:.4}) than the full one ({r2_opt:.4})");
    }
    Ok(r2_opt - r2_red)
}
