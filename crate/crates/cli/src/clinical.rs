//! Clinical CSV ingestion and inverse prediction of CO and central SBP.

use std::path::Path;

use hemoforge::analysis::{agreement, AgreementReport};
use hemoforge::hemonet::{anthropometric_multipliers, fit_lambda_c, ArterialNetwork, Sex};
use hemoforge::neuro::{Feature, MlpModel};
use hemoforge::pulse1d::HemoRecord;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub const COLUMNS: [&str; 10] = [
    "height_cm", "weight_kg", "age_y", "sex", "hr_bpm", "sbp_mmhg", "dbp_mmhg", "cfpwv_ms", "co_lmin", "csbp_mmhg",
];

/// Accepted closed intervals per numeric column.
pub const BOUNDS: [(&str, f64, f64); 9] = [
    ("height_cm", 120.0, 220.0),
    ("weight_kg", 30.0, 200.0),
    ("age_y", 18.0, 100.0),
    ("hr_bpm", 30.0, 150.0),
    ("sbp_mmhg", 70.0, 250.0),
    ("dbp_mmhg", 30.0, 150.0),
    ("cfpwv_ms", 3.0, 20.0),
    ("co_lmin", 1.0, 15.0),
    ("csbp_mmhg", 60.0, 250.0),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClinicalRecord {
    pub height_cm: f64,
    pub weight_kg: f64,
    pub age_y: f64,
    pub sex: Sex,
    pub hr_bpm: f64,
    pub sbp_mmhg: f64,
    pub dbp_mmhg: f64,
    pub cfpwv_ms: f64,
    /// Reference cardiac output, L/min.
    pub co_lmin: Option<f64>,
    /// Reference central SBP, mmHg.
    pub csbp_mmhg: Option<f64>,
}

impl ClinicalRecord {
    fn numeric(&self, column: &str) -> Option<f64> {
        match column {
            "height_cm" => Some(self.height_cm),
            "weight_kg" => Some(self.weight_kg),
            "age_y" => Some(self.age_y),
            "hr_bpm" => Some(self.hr_bpm),
            "sbp_mmhg" => Some(self.sbp_mmhg),
            "dbp_mmhg" => Some(self.dbp_mmhg),
            "cfpwv_ms" => Some(self.cfpwv_ms),
            "co_lmin" => self.co_lmin,
            "csbp_mmhg" => self.csbp_mmhg,
            _ => None,
        }
    }

    /// Every bound violation; empty when the record is usable.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        for (column, lo, hi) in BOUNDS {
            if let Some(v) = self.numeric(column) {
                if !(lo..=hi).contains(&v) {
                    out.push(format!("{column} = {v} outside [{lo}, {hi}]"));
                }
            }
        }
        if self.sbp_mmhg <= self.dbp_mmhg {
            out.push(format!("sbp_mmhg {} not above dbp_mmhg {}", self.sbp_mmhg, self.dbp_mmhg));
        }
        out
    }

    /// The record a simulated patient would produce at the bedside.
    pub fn from_simulation(r: &HemoRecord) -> Option<Self> {
        let f = r.converged_features()?;
        let p = &r.params;
        Some(ClinicalRecord {
            height_cm: p.height_cm,
            weight_kg: p.weight_kg,
            age_y: p.age_y,
            sex: p.sex,
            hr_bpm: p.hr,
            sbp_mmhg: f.brachial.sbp,
            dbp_mmhg: f.brachial.dbp,
            cfpwv_ms: p.cfpwv,
            co_lmin: Some(p.co),
            csbp_mmhg: Some(f.aortic_root.sbp),
        })
    }
}

/// A data row that could not be used, with 1-based data line number.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rejection {
    pub row: usize,
    pub reasons: Vec<String>,
}

/// Parses a clinical CSV. Rows with unparsable or out-of-range values are
/// returned as rejections instead of failing the whole file.
pub fn read_clinical_csv(path: &Path) -> CliResult<(Vec<(usize, ClinicalRecord)>, Vec<Rejection>)> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
    let headers = rdr.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    for required in &COLUMNS[..8] {
        if col(required).is_none() {
            return Err(CliError::config(format!("{}: missing column '{required}'", path.display())));
        }
    }
    let (mut ok, mut rejected) = (Vec::new(), Vec::new());
    for (i, row) in rdr.records().enumerate() {
        let line = i + 1;
        let row = row?;
        let mut reasons = Vec::new();
        let mut num = |name: &str, optional: bool| -> Option<f64> {
            let raw = col(name).and_then(|j| row.get(j)).unwrap_or("");
            if raw.is_empty() {
                if !optional {
                    reasons.push(format!("{name} missing"));
                }
                return None;
            }
            match raw.parse::<f64>() {
                Ok(v) if v.is_finite() => Some(v),
                _ => {
                    reasons.push(format!("{name} = '{raw}' is not a number"));
                    None
                }
            }
        };
        let values: Vec<Option<f64>> = COLUMNS
            .iter()
            .enumerate()
            .filter(|(_, c)| **c != "sex")
            .map(|(k, c)| num(c, k >= 8))
            .collect();
        let sex_raw = col("sex").and_then(|j| row.get(j)).unwrap_or("");
        let sex = Sex::parse(sex_raw);
        if sex.is_none() {
            reasons.push(format!("sex = '{sex_raw}' is not female/male"));
        }
        if !reasons.is_empty() {
            rejected.push(Rejection { row: line, reasons });
            continue;
        }
        let v = |k: usize| values[k].expect("required value checked");
        let rec = ClinicalRecord {
            height_cm: v(0),
            weight_kg: v(1),
            age_y: v(2),
            sex: sex.expect("checked"),
            hr_bpm: v(3),
            sbp_mmhg: v(4),
            dbp_mmhg: v(5),
            cfpwv_ms: v(6),
            co_lmin: values[7],
            csbp_mmhg: values[8],
        };
        let violations = rec.violations();
        if violations.is_empty() {
            ok.push((line, rec));
        } else {
            rejected.push(Rejection {
                row: line,
                reasons: violations,
            });
        }
    }
    Ok((ok, rejected))
}

pub fn write_clinical_csv(records: &[ClinicalRecord], path: &Path) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
    w.write_record(COLUMNS)?;
    let opt = |v: Option<f64>| v.map_or(String::new(), |v| v.to_string());
    for r in records {
        w.write_record([
            r.height_cm.to_string(),
            r.weight_kg.to_string(),
            r.age_y.to_string(),
            r.sex.as_str().to_string(),
            r.hr_bpm.to_string(),
            r.sbp_mmhg.to_string(),
            r.dbp_mmhg.to_string(),
            r.cfpwv_ms.to_string(),
            opt(r.co_lmin),
            opt(r.csbp_mmhg),
        ])?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClinicalPrediction {
    pub row: usize,
    pub lambda_l: f64,
    pub lambda_d: f64,
    pub lambda_c: f64,
    pub co: Option<f64>,
    pub csbp: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClinicalOutcome {
    pub predictions: Vec<ClinicalPrediction>,
    pub rejected: Vec<Rejection>,
    /// Present when at least three records carry the reference value.
    pub co_agreement: Option<AgreementReport>,
    pub csbp_agreement: Option<AgreementReport>,
}

impl ClinicalOutcome {
    pub fn to_csv(&self) -> String {
        let opt = |v: Option<f64>| v.map_or(String::new(), |v| v.to_string());
        let mut s = String::from("row,lambda_l,lambda_d,lambda_c,co,csbp\n");
        for p in &self.predictions {
            s.push_str(&format!(
                "{},{},{},{},{},{}\n",
                p.row,
                p.lambda_l,
                p.lambda_d,
                p.lambda_c,
                opt(p.co),
                opt(p.csbp)
            ));
        }
        s
    }
}

/// Derives the multipliers of each record and predicts whatever of CO and
/// central SBP the model outputs. Records whose multipliers cannot be
/// derived join `rejected`.
pub fn clinical_predict(
    model: &MlpModel,
    net: &ArterialNetwork,
    records: &[(usize, ClinicalRecord)],
    mut rejected: Vec<Rejection>,
) -> CliResult<ClinicalOutcome> {
    let spec = model.spec();
    let i_co = spec.outputs.iter().position(|&f| f == Feature::Co);
    let i_csbp = spec.outputs.iter().position(|&f| f == Feature::Csbp);
    if i_co.is_none() && i_csbp.is_none() {
        return Err(CliError::config("model predicts neither co nor csbp"));
    }
    const AVAILABLE: [Feature; 7] = [
        Feature::LambdaD,
        Feature::LambdaL,
        Feature::LambdaC,
        Feature::Hr,
        Feature::Sbp,
        Feature::Dbp,
        Feature::Cfpwv,
    ];
    if let Some(f) = spec.inputs.iter().find(|f| !AVAILABLE.contains(f)) {
        return Err(CliError::config(format!("model input '{f}' is not available from clinical records")));
    }

    let mut predictions = Vec::with_capacity(records.len());
    let (mut co_pairs, mut csbp_pairs) = (Vec::new(), Vec::new());
    for (row, r) in records {
        let derived = anthropometric_multipliers(r.height_cm, r.weight_kg, r.age_y, r.sex)
            .and_then(|(l, d)| Ok((l, d, fit_lambda_c(net, r.cfpwv_ms)?)));
        let (lambda_l, lambda_d, lambda_c) = match derived {
            Ok(v) => v,
            Err(e) => {
                rejected.push(Rejection {
                    row: *row,
                    reasons: vec![e.to_string()],
                });
                continue;
            }
        };
        let x: Vec<f64> = spec
            .inputs
            .iter()
            .map(|f| match f {
                Feature::LambdaD => lambda_d,
                Feature::LambdaL => lambda_l,
                Feature::LambdaC => lambda_c,
                Feature::Hr => r.hr_bpm,
                Feature::Sbp => r.sbp_mmhg,
                Feature::Dbp => r.dbp_mmhg,
                _ => r.cfpwv_ms,
            })
            .collect();
        let y = model.predict(&x)?;
        let co = i_co.map(|i| y[i]);
        let csbp = i_csbp.map(|i| y[i]);
        if let (Some(p), Some(t)) = (co, r.co_lmin) {
            co_pairs.push((t, p));
        }
        if let (Some(p), Some(t)) = (csbp, r.csbp_mmhg) {
            csbp_pairs.push((t, p));
        }
        predictions.push(ClinicalPrediction {
            row: *row,
            lambda_l,
            lambda_d,
            lambda_c,
            co,
            csbp,
        });
    }
    rejected.sort_by_key(|r| r.row);
    let report = |pairs: &[(f64, f64)]| -> Option<AgreementReport> {
        let (t, p): (Vec<f64>, Vec<f64>) = pairs.iter().copied().unzip();
        agreement(&t, &p).ok()
    };
    Ok(ClinicalOutcome {
        co_agreement: report(&co_pairs),
        csbp_agreement: report(&csbp_pairs),
        predictions,
        rejected,
    })
}
