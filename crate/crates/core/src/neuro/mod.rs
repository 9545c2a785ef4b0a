//! Fully connected surrogate: `[in, 128, 256, 128, out]` with batch norm,
//! tanh and dropout on every hidden layer, trained with AdamW on a Huber loss.

mod model;
mod train;

pub use model::{HIDDEN_WIDTHS, MlpModel, Mode, Standardizer, TrainingMeta, MODEL_FORMAT, MODEL_VERSION};
pub use train::{gradient_check, huber_grad, huber_loss, mse, split_indices, train, Curves, GradCheck, Split, TrainConfig, Trained};

use std::fmt;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pulse1d::HemoRecord;

/// A scalar column that can be pulled out of a simulated record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Feature {
    LambdaD,
    LambdaL,
    LambdaC,
    LambdaCt,
    LambdaRt,
    Hr,
    Co,
    Sbp,
    Dbp,
    Rsbp,
    Rdbp,
    Cfpwv,
    Csbp,
}

impl Feature {
    pub const INPUTS: [Feature; 12] = [
        Feature::LambdaD,
        Feature::LambdaL,
        Feature::LambdaC,
        Feature::LambdaCt,
        Feature::LambdaRt,
        Feature::Hr,
        Feature::Co,
        Feature::Sbp,
        Feature::Dbp,
        Feature::Rsbp,
        Feature::Rdbp,
        Feature::Cfpwv,
    ];

    pub const OUTPUTS: [Feature; 5] = [Feature::Dbp, Feature::Sbp, Feature::Co, Feature::Csbp, Feature::LambdaRt];

    pub fn as_str(self) -> &'static str {
        match self {
            Feature::LambdaD => "lambda_d",
            Feature::LambdaL => "lambda_l",
            Feature::LambdaC => "lambda_c",
            Feature::LambdaCt => "lambda_ct",
            Feature::LambdaRt => "lambda_rt",
            Feature::Hr => "hr",
            Feature::Co => "co",
            Feature::Sbp => "sbp",
            Feature::Dbp => "dbp",
            Feature::Rsbp => "rsbp",
            Feature::Rdbp => "rdbp",
            Feature::Cfpwv => "cfpwv",
            Feature::Csbp => "csbp",
        }
    }

    pub fn parse(s: &str) -> Option<Feature> {
        Feature::INPUTS
            .iter()
            .chain(&[Feature::Csbp])
            .copied()
            .find(|f| f.as_str() == s.trim())
    }

    /// Value of the feature in `record`, `None` when the simulation produced no
    /// pressure features.
    pub fn value(self, record: &HemoRecord) -> Option<f64> {
        let p = &record.params;
        let f = record.features.as_ref();
        let v = match self {
            Feature::LambdaD => p.lambda_d,
            Feature::LambdaL => p.lambda_l,
            Feature::LambdaC => p.lambda_c,
            Feature::LambdaCt => p.lambda_ct,
            Feature::LambdaRt => p.lambda_rt,
            Feature::Hr => p.hr,
            Feature::Co => p.co,
            Feature::Cfpwv => p.cfpwv,
            Feature::Sbp => f?.brachial.sbp,
            Feature::Dbp => f?.brachial.dbp,
            Feature::Rsbp => f?.radial.sbp,
            Feature::Rdbp => f?.radial.dbp,
            Feature::Csbp => f?.aortic_root.sbp,
        };
        v.is_finite().then_some(v)
    }
}

impl fmt::Display for Feature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Ordered inputs and outputs of a surrogate.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub inputs: Vec<Feature>,
    pub outputs: Vec<Feature>,
}

impl FeatureSpec {
    pub fn new(inputs: Vec<Feature>, outputs: Vec<Feature>) -> Result<Self> {
        let spec = FeatureSpec { inputs, outputs };
        spec.validate()?;
        Ok(spec)
    }

    /// Forward mode: multipliers and inflow to brachial DBP and SBP.
    pub fn forward() -> Self {
        use Feature::*;
        FeatureSpec {
            inputs: vec![LambdaD, LambdaL, LambdaC, LambdaCt, LambdaRt, Hr, Co],
            outputs: vec![Dbp, Sbp],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.inputs.is_empty() || self.outputs.is_empty() {
            return Err(Error::FeatureMismatch("inputs and outputs must be non-empty".into()));
        }
        for f in &self.inputs {
            if !Feature::INPUTS.contains(f) {
                return Err(Error::FeatureMismatch(format!("'{f}' is not an input feature")));
            }
        }
        for f in &self.outputs {
            if !Feature::OUTPUTS.contains(f) {
                return Err(Error::FeatureMismatch(format!("'{f}' is not an output feature")));
            }
            if self.inputs.contains(f) {
                return Err(Error::FeatureMismatch(format!("'{f}' is both input and output")));
            }
        }
        let mut all: Vec<Feature> = self.inputs.iter().chain(&self.outputs).copied().collect();
        all.sort();
        if all.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::FeatureMismatch("duplicate feature".into()));
        }
        Ok(())
    }

    /// Parses comma-separated names.
    pub fn parse_list(s: &str) -> Result<Vec<Feature>> {
        s.split(',')
            .filter(|t| !t.trim().is_empty())
            .map(|t| Feature::parse(t).ok_or_else(|| Error::FeatureMismatch(format!("unknown feature '{}'", t.trim()))))
            .collect()
    }

    /// Indices of the records that are converged and carry every feature.
    pub fn usable(&self, records: &[HemoRecord]) -> Vec<usize> {
        records
            .iter()
            .enumerate()
            .filter(|(_, r)| r.converged && self.inputs.iter().chain(&self.outputs).all(|f| f.value(r).is_some()))
            .map(|(i, _)| i)
            .collect()
    }

    /// Input and output matrices for the records at `rows`.
    pub fn extract(&self, records: &[HemoRecord], rows: &[usize]) -> Result<(Array2<f64>, Array2<f64>)> {
        let pull = |features: &[Feature]| -> Result<Array2<f64>> {
            let mut m = Array2::zeros((rows.len(), features.len()));
            for (i, &r) in rows.iter().enumerate() {
                for (j, f) in features.iter().enumerate() {
                    m[[i, j]] = f
                        .value(&records[r])
                        .ok_or_else(|| Error::FeatureMismatch(format!("record {r} has no '{f}'")))?;
                }
            }
            Ok(m)
        };
        Ok((pull(&self.inputs)?, pull(&self.outputs)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spec_rules() {
        use Feature::*;
        assert!(FeatureSpec::new(vec![Sbp, Dbp], vec![Sbp]).is_err());
        assert!(FeatureSpec::new(vec![], vec![Co]).is_err());
        assert!(FeatureSpec::new(vec![Hr, Hr], vec![Co]).is_err());
        assert!(FeatureSpec::new(vec![Hr], vec![Hr]).is_err());
        assert!(FeatureSpec::new(vec![Csbp], vec![Co]).is_err());
        FeatureSpec::forward().validate().unwrap();
    }

    #[test]
    fn names_round_trip() {
        for f in Feature::INPUTS.iter().chain(&Feature::OUTPUTS) {
            assert_eq!(Feature::parse(f.as_str()), Some(*f));
            let json = serde_json::to_string(f).unwrap();
            assert_eq!(json, format!("\"{}\"", f.as_str()));
        }
        assert_eq!(
            FeatureSpec::parse_list("lambda_d, co,sbp").unwrap(),
            vec![Feature::LambdaD, Feature::Co, Feature::Sbp]
        );
        assert!(FeatureSpec::parse_list("lambda_x").is_err());
    }
}
