use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::agreement::{agreement, variance_decomposition, AgreementReport};
use crate::error::{Error, Result};
use crate::neuro::{train, Feature, FeatureSpec, MlpModel, TrainConfig, Trained};
use crate::pulse1d::HemoRecord;

/// Label of the scenario with every extra input.
pub const FULL_SCENARIO: &str = "X+RT+CT";

/// Inputs available at the bedside: geometry, compliance, HR and brachial cuff.
pub fn clinical_inputs() -> Vec<Feature> {
    use Feature::*;
    vec![LambdaD, LambdaL, LambdaC, Hr, Dbp, Sbp]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    /// Inputs added to the clinical set.
    pub extra: Vec<Feature>,
}

impl Scenario {
    pub fn new(name: &str, extra: &[Feature]) -> Self {
        Scenario {
            name: name.into(),
            extra: extra.to_vec(),
        }
    }

    pub fn spec(&self, outputs: &[Feature]) -> Result<FeatureSpec> {
        let mut inputs = clinical_inputs();
        inputs.extend(&self.extra);
        FeatureSpec::new(inputs, outputs.to_vec())
    }
}

/// The seven input sets: none, radial pressures, Windkessel multipliers.
pub fn table2_scenarios() -> Vec<Scenario> {
    use Feature::*;
    vec![
        Scenario::new("X", &[]),
        Scenario::new("X+rDBP+rSBP", &[Rdbp, Rsbp]),
        Scenario::new("X+rDBP", &[Rdbp]),
        Scenario::new("X+rSBP", &[Rsbp]),
        Scenario::new(FULL_SCENARIO, &[LambdaRt, LambdaCt]),
        Scenario::new("X+RT", &[LambdaRt]),
        Scenario::new("X+CT", &[LambdaCt]),
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioResult {
    pub scenario: Scenario,
    pub report: AgreementReport,
    /// `R²(full) − R²(this)`.
    pub delta_sigma_u: f64,
}

#[derive(Debug, Clone)]
pub struct InverseSuite {
    pub target: Feature,
    pub n_records: usize,
    pub n_test: usize,
    pub results: Vec<ScenarioResult>,
    /// Trained surrogates, parallel to `results`.
    pub models: Vec<MlpModel>,
}

impl InverseSuite {
    pub fn get(&self, name: &str) -> Option<&ScenarioResult> {
        self.results.iter().find(|r| r.scenario.name == name)
    }

    pub fn model(&self, name: &str) -> Option<&MlpModel> {
        let i = self.results.iter().position(|r| r.scenario.name == name)?;
        self.models.get(i)
    }

    pub fn r_squared(&self, name: &str) -> Option<f64> {
        self.get(name).map(|r| r.report.r_squared)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("scenario,inputs,n,pearson_r,r_squared,mean_error,loa_low,loa_high,delta_sigma_u\n");
        for r in &self.results {
            let inputs: Vec<&str> = r.scenario.extra.iter().map(|f| f.as_str()).collect();
            let a = &r.report;
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{},{}",
                r.scenario.name,
                inputs.join(";"),
                a.n,
                a.pearson_r,
                a.r_squared,
                a.mean_error,
                a.loa_low,
                a.loa_high,
                r.delta_sigma_u
            );
        }
        s
    }

    /// Aligned text table with Δσ² in percent.
    pub fn render_table(&self) -> String {
        let mut s = format!(
            "{:<14} {:>7} {:>7} {:>9}   target {}, n_test {}\n",
            "scenario", "r", "R2", "dsigma2%", self.target, self.n_test
        );
        for r in &self.results {
            let _ = writeln!(
                s,
                "{:<14} {:>7.3} {:>7.3} {:>9.1}",
                r.scenario.name,
                r.report.pearson_r,
                r.report.r_squared,
                100.0 * r.delta_sigma_u
            );
        }
        s
    }
}

/// Per-output agreement of `model` on `rows` of `records`.
pub fn evaluate_split(model: &MlpModel, records: &[HemoRecord], rows: &[usize]) -> Result<Vec<(Feature, AgreementReport)>> {
    let spec = model.spec();
    let (x, y) = spec.extract(records, rows)?;
    let pred = model.predict_batch(x.view())?;
    spec.outputs
        .iter()
        .enumerate()
        .map(|(j, &f)| {
            let truth: Vec<f64> = y.column(j).to_vec();
            let est: Vec<f64> = pred.column(j).to_vec();
            Ok((f, agreement(&truth, &est)?))
        })
        .collect()
}

/// Trains one surrogate per scenario for `target`. Records are first reduced
/// to those carrying every feature of every scenario so that all scenarios
/// share one train/test split.
pub fn inverse_scenario_suite(
    records: &[HemoRecord],
    scenarios: &[Scenario],
    cfg: &TrainConfig,
    target: Feature,
) -> Result<InverseSuite> {
    let full = scenarios
        .iter()
        .find(|s| s.name == FULL_SCENARIO)
        .ok_or_else(|| Error::InvalidArgument(format!("scenario list lacks '{FULL_SCENARIO}'")))?;
    let mut union = clinical_inputs();
    for s in scenarios {
        union.extend(s.extra.iter().filter(|f| !union.contains(f)).copied().collect::<Vec<_>>());
    }
    let union_spec = FeatureSpec::new(union, vec![target])?;
    let shared: Vec<HemoRecord> = union_spec.usable(records).into_iter().map(|i| records[i].clone()).collect();

    let mut fitted = Vec::with_capacity(scenarios.len());
    let mut n_test = 0;
    let mut models = Vec::with_capacity(scenarios.len());
    for s in scenarios {
        let Trained { model, split, .. } = train(&shared, &s.spec(&[target])?, cfg)?;
        let (_, report) = evaluate_split(&model, &shared, &split.test)?.remove(0);
        log::info!("scenario {}: r = {:.4}, R2 = {:.4}", s.name, report.pearson_r, report.r_squared);
        n_test = split.test.len();
        fitted.push((s.clone(), report));
        models.push(model);
    }
    let r2_full = fitted
        .iter()
        .find(|(s, _)| s.name == full.name)
        .map(|(_, r)| r.r_squared)
        .expect("full scenario present");
    let results = fitted
        .into_iter()
        .map(|(scenario, report)| {
            let delta_sigma_u = if scenario.name == FULL_SCENARIO {
                0.0
            } else {
                variance_decomposition(r2_full.clamp(0.0, 1.0), report.r_squared.clamp(0.0, 1.0))?
            };
            Ok(ScenarioResult {
                scenario,
                report,
                delta_sigma_u,
            })
        })
        .collect::<Result<_>>()?;
    Ok(InverseSuite {
        target,
        n_records: shared.len(),
        n_test,
        results,
        models,
    })
}

/// Geometry, cfPWV, inflow and cuff pressures to the resistance multiplier.
pub fn rt_regressor_spec() -> FeatureSpec {
    use Feature::*;
    FeatureSpec {
        inputs: vec![LambdaD, LambdaL, Cfpwv, Hr, Co, Sbp, Dbp],
        outputs: vec![LambdaRt],
    }
}

#[derive(Debug, Clone)]
pub struct RtRegressor {
    pub trained: Trained,
    pub test_pearson: f64,
    pub report: AgreementReport,
}

pub fn train_rt_regressor(records: &[HemoRecord], cfg: &TrainConfig) -> Result<RtRegressor> {
    let trained = train(records, &rt_regressor_spec(), cfg)?;
    let (_, report) = evaluate_split(&trained.model, records, &trained.split.test)?.remove(0);
    Ok(RtRegressor {
        test_pearson: report.pearson_r,
        report,
        trained,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seven_valid_scenarios() {
        let s = table2_scenarios();
        assert_eq!(s.len(), 7);
        assert_eq!(s.iter().filter(|s| s.name == FULL_SCENARIO).count(), 1);
        for sc in &s {
            sc.spec(&[Feature::Co]).unwrap();
        }
        rt_regressor_spec().validate().unwrap();
    }
}
