use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sex {
    Female,
    Male,
}

impl Sex {
    /// 1 for male, 0 for female.
    pub fn indicator(self) -> f64 {
        match self {
            Sex::Female => 0.0,
            Sex::Male => 1.0,
        }
    }

    pub fn parse(s: &str) -> Option<Sex> {
        match s.trim().to_ascii_lowercase().as_str() {
            "f" | "female" | "w" | "woman" | "0" => Some(Sex::Female),
            "m" | "male" | "man" | "1" => Some(Sex::Male),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Sex::Female => "female",
            Sex::Male => "male",
        }
    }
}

/// Du Bois body surface area in m² (weight kg, height cm).
pub fn body_surface_area(height_cm: f64, weight_kg: f64) -> f64 {
    0.007184 * weight_kg.powf(0.425) * height_cm.powf(0.725)
}

/// Linear diameter model `λ_D = a0 + a1·BSA + a2·age + a3·male`, clamped.
///
/// `a0` is not stored: it is solved so the reference subject maps to exactly 1.
/// The slopes are placeholders of plausible magnitude, not a published fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnthropometricModel {
    pub reference_height_cm: f64,
    pub reference_weight_kg: f64,
    pub reference_age_y: f64,
    pub reference_sex: Sex,
    /// Per m² of BSA.
    pub bsa_coefficient: f64,
    /// Per year.
    pub age_coefficient: f64,
    /// Male minus female.
    pub sex_coefficient: f64,
    pub clamp_low: f64,
    pub clamp_high: f64,
}

impl Default for AnthropometricModel {
    fn default() -> Self {
        AnthropometricModel {
            reference_height_cm: 169.12,
            reference_weight_kg: 72.89,
            reference_age_y: 45.76,
            reference_sex: Sex::Female,
            bsa_coefficient: 0.25,
            age_coefficient: 0.004,
            sex_coefficient: 0.06,
            clamp_low: 0.7,
            clamp_high: 1.3,
        }
    }
}

impl AnthropometricModel {
    fn linear_part(&self, height: f64, weight: f64, age: f64, sex: Sex) -> f64 {
        self.bsa_coefficient * body_surface_area(height, weight)
            + self.age_coefficient * age
            + self.sex_coefficient * sex.indicator()
    }

    fn intercept(&self) -> f64 {
        1.0 - self.linear_part(
            self.reference_height_cm,
            self.reference_weight_kg,
            self.reference_age_y,
            self.reference_sex,
        )
    }

    /// Returns `(λ_L, λ_D)`.
    pub fn multipliers(&self, height_cm: f64, weight_kg: f64, age_y: f64, sex: Sex) -> Result<(f64, f64)> {
        if !(height_cm.is_finite() && height_cm > 0.0) {
            return Err(Error::InvalidArgument(format!("height must be > 0, got {height_cm}")));
        }
        if !(weight_kg.is_finite() && weight_kg > 0.0) {
            return Err(Error::InvalidArgument(format!("weight must be > 0, got {weight_kg}")));
        }
        if !(age_y.is_finite() && age_y >= 0.0) {
            return Err(Error::InvalidArgument(format!("age must be >= 0, got {age_y}")));
        }
        let lambda_l = height_cm / self.reference_height_cm;
        let lambda_d = (self.intercept() + self.linear_part(height_cm, weight_kg, age_y, sex))
            .clamp(self.clamp_low, self.clamp_high);
        Ok((lambda_l, lambda_d))
    }
}

/// `(λ_L, λ_D)` under the default [`AnthropometricModel`].
pub fn anthropometric_multipliers(height_cm: f64, weight_kg: f64, age_y: f64, sex: Sex) -> Result<(f64, f64)> {
    AnthropometricModel::default().multipliers(height_cm, weight_kg, age_y, sex)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_subject_maps_to_unity() {
        let (l, d) = anthropometric_multipliers(169.12, 72.89, 45.76, Sex::Female).unwrap();
        assert!((l - 1.0).abs() < 1e-15);
        assert!((d - 1.0).abs() < 1e-12);
    }

    #[test]
    fn length_is_height_ratio() {
        let (l, _) = anthropometric_multipliers(190.0, 72.89, 45.76, Sex::Female).unwrap();
        assert!((l - 190.0 / 169.12).abs() < 1e-15);
        assert!((l - 1.1235).abs() < 1e-4);
    }

    #[test]
    fn diameter_grows_with_weight() {
        let m = AnthropometricModel::default();
        let (_, a) = m.multipliers(170.0, 70.0, 45.0, Sex::Male).unwrap();
        let (_, b) = m.multipliers(170.0, 71.0, 45.0, Sex::Male).unwrap();
        assert!(b > a);
    }

    #[test]
    fn clamped_to_bounds() {
        let m = AnthropometricModel {
            bsa_coefficient: 5.0,
            ..Default::default()
        };
        let (_, d) = m.multipliers(200.0, 150.0, 45.0, Sex::Male).unwrap();
        assert_eq!(d, 1.3);
    }

    #[test]
    fn rejects_non_positive() {
        assert!(anthropometric_multipliers(0.0, 70.0, 40.0, Sex::Male).is_err());
        assert!(anthropometric_multipliers(170.0, -1.0, 40.0, Sex::Male).is_err());
        assert!(anthropometric_multipliers(170.0, 70.0, -1.0, Sex::Male).is_err());
    }

    #[test]
    fn du_bois_reference_value() {
        // 180 cm, 80 kg: 0.007184 * 80^0.425 * 180^0.725
        let bsa = body_surface_area(180.0, 80.0);
        assert!((bsa - 1.9964).abs() < 1e-3, "{bsa}");
    }
}
