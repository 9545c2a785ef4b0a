//! Studies run on trained surrogates: pairwise sensitivity, response grids
//! with hypertension staging, agreement metrics, the inverse scenario suite
//! and the R_T–C_T uniqueness grid.

mod agreement;
mod grid;
mod inverse;
mod sensitivity;
pub mod svg;
mod uniqueness;

pub use agreement::{agreement, variance_decomposition, AgreementReport};
pub use grid::{
    contour_grid, isosurface_grid, project_points, AnalysisGrid, Bands, GridAxis, Stage, StagingBands,
};
pub use inverse::{
    clinical_inputs, evaluate_split, inverse_scenario_suite, rt_regressor_spec, table2_scenarios, train_rt_regressor,
    InverseSuite, RtRegressor, Scenario, ScenarioResult, FULL_SCENARIO,
};
pub use sensitivity::{pairwise_sensitivity, Sensitivity, SensitivityMatrix};
pub use uniqueness::{uniqueness_grid, UniquenessResult};

use std::collections::BTreeMap;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::neuro::{Feature, MlpModel};
use crate::pulse1d::HemoRecord;

/// Closed interval per feature.
pub type Ranges = BTreeMap<Feature, [f64; 2]>;

/// Fixed value per feature for everything not being swept.
pub type Reference = BTreeMap<Feature, f64>;

/// All multipliers at 1, cohort-mean inflow.
pub fn default_reference() -> Reference {
    use Feature::*;
    BTreeMap::from([
        (LambdaD, 1.0),
        (LambdaL, 1.0),
        (LambdaC, 1.0),
        (LambdaCt, 1.0),
        (LambdaRt, 1.0),
        (Hr, 63.1),
        (Co, 5.1),
    ])
}

/// Min/max of each feature over the converged records.
pub fn record_ranges(records: &[HemoRecord], features: &[Feature]) -> Result<Ranges> {
    let mut out = Ranges::new();
    for &f in features {
        let vals: Vec<f64> = records.iter().filter(|r| r.converged).filter_map(|r| f.value(r)).collect();
        if vals.is_empty() {
            return Err(Error::InsufficientData(format!("no values for '{f}'")));
        }
        let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        out.insert(f, [lo, hi]);
    }
    Ok(out)
}

pub(crate) fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 || lo == hi {
        return vec![lo];
    }
    (0..n)
        .map(|i| if i + 1 == n { hi } else { lo + (hi - lo) * i as f64 / (n - 1) as f64 })
        .collect()
}

pub(crate) fn checked_range(ranges: &Ranges, f: Feature) -> Result<[f64; 2]> {
    let r = *ranges
        .get(&f)
        .ok_or_else(|| Error::FeatureMismatch(format!("no range for '{f}'")))?;
    if !(r[0] <= r[1]) || !r[0].is_finite() || !r[1].is_finite() {
        return Err(Error::InvalidArgument(format!("bad range for '{f}': {r:?}")));
    }
    Ok(r)
}

/// Predicts at `points`, each a full assignment of the model inputs built by
/// overriding `reference`.
pub(crate) fn predict_points(
    model: &MlpModel,
    reference: &Reference,
    swept: &[Feature],
    points: &[Vec<f64>],
) -> Result<Array2<f64>> {
    let inputs = &model.spec().inputs;
    for f in swept {
        if !inputs.contains(f) {
            return Err(Error::FeatureMismatch(format!("model has no input '{f}'")));
        }
    }
    let mut xs = Array2::zeros((points.len(), inputs.len()));
    for (j, f) in inputs.iter().enumerate() {
        let col = swept.iter().position(|s| s == f);
        let fixed = match col {
            Some(_) => 0.0,
            None => *reference
                .get(f)
                .ok_or_else(|| Error::FeatureMismatch(format!("no reference value for '{f}'")))?,
        };
        for (i, p) in points.iter().enumerate() {
            xs[[i, j]] = col.map_or(fixed, |c| p[c]);
        }
    }
    model.predict_batch(xs.view())
}

pub(crate) fn output_index(model: &MlpModel, f: Feature) -> Result<usize> {
    model
        .spec()
        .outputs
        .iter()
        .position(|&o| o == f)
        .ok_or_else(|| Error::FeatureMismatch(format!("model has no output '{f}'")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linspace_hits_ends_exactly() {
        let v = linspace(0.1, 0.7, 7);
        assert_eq!(v.len(), 7);
        assert_eq!((v[0], v[6]), (0.1, 0.7));
        assert_eq!(linspace(2.0, 2.0, 5), vec![2.0]);
    }
}
