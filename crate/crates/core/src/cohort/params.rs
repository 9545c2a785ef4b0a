use serde::{Deserialize, Serialize};

use crate::hemonet::{ScaleSet, Sex};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    ClinicalDraw,
    LhsAugment,
    /// Entered by hand (CLI `simulate`, tests).
    Manual,
}

impl Provenance {
    pub fn as_str(self) -> &'static str {
        match self {
            Provenance::ClinicalDraw => "clinical_draw",
            Provenance::LhsAugment => "lhs_augment",
            Provenance::Manual => "manual",
        }
    }

    pub fn parse(s: &str) -> Option<Provenance> {
        match s {
            "clinical_draw" => Some(Provenance::ClinicalDraw),
            "lhs_augment" => Some(Provenance::LhsAugment),
            "manual" => Some(Provenance::Manual),
            _ => None,
        }
    }
}

/// Inputs of one virtual patient: the seven surrogate inputs plus the
/// anthropometrics and cfPWV they were derived from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatientParams {
    pub index: usize,
    pub seed: u64,
    pub provenance: Provenance,
    pub sex: Sex,
    pub age_y: f64,
    pub height_cm: f64,
    pub weight_kg: f64,
    /// m/s.
    pub cfpwv: f64,
    pub lambda_d: f64,
    pub lambda_l: f64,
    pub lambda_c: f64,
    pub lambda_ct: f64,
    pub lambda_rt: f64,
    /// bpm.
    pub hr: f64,
    /// L/min.
    pub co: f64,
}

impl PatientParams {
    /// The unscaled reference subject at the given inflow.
    pub fn with_inflow(co: f64, hr: f64) -> Self {
        PatientParams {
            index: 0,
            seed: 0,
            provenance: Provenance::Manual,
            sex: Sex::Female,
            age_y: 45.76,
            height_cm: 169.12,
            weight_kg: 72.89,
            cfpwv: 0.0,
            lambda_d: 1.0,
            lambda_l: 1.0,
            lambda_c: 1.0,
            lambda_ct: 1.0,
            lambda_rt: 1.0,
            hr,
            co,
        }
    }

    pub fn scale_set(&self) -> ScaleSet {
        ScaleSet {
            lambda_l: self.lambda_l,
            lambda_d: self.lambda_d,
            lambda_c: self.lambda_c,
            lambda_rt: self.lambda_rt,
            lambda_ct: self.lambda_ct,
        }
    }
}
