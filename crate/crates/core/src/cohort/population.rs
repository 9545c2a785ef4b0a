use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variable {
    Age,
    Pwv,
    Height,
    Weight,
    Sbp,
    Dbp,
    Hr,
    Co,
}

impl Variable {
    pub fn as_str(self) -> &'static str {
        match self {
            Variable::Age => "age",
            Variable::Pwv => "pwv",
            Variable::Height => "height",
            Variable::Weight => "weight",
            Variable::Sbp => "sbp",
            Variable::Dbp => "dbp",
            Variable::Hr => "hr",
            Variable::Co => "co",
        }
    }
}

impl fmt::Display for Variable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Marginal {
    pub lo: f64,
    pub hi: f64,
    pub mean: f64,
    pub sd: f64,
}

impl Marginal {
    /// Truncation interval: the range intersected with `mean ± clip·sd`.
    pub fn support(&self, clip_sigma: f64) -> (f64, f64) {
        (
            self.lo.max(self.mean - clip_sigma * self.sd),
            self.hi.min(self.mean + clip_sigma * self.sd),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Correlation {
    /// Sampled variables, in matrix order.
    pub variables: Vec<Variable>,
    pub matrix: Vec<Vec<f64>>,
}

/// Total peripheral bounds for the Windkessel sampling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindkesselBounds {
    /// Total resistance, mmHg·s/mL.
    pub resistance: [f64; 2],
    /// Total compliance (1-D arteries plus terminals), mL/mmHg.
    pub compliance: [f64; 2],
    /// Smallest terminal compliance multiplier, used when the arterial
    /// compliance alone exceeds the lower compliance bound.
    pub min_lambda_ct: f64,
}

impl Default for WindkesselBounds {
    fn default() -> Self {
        WindkesselBounds {
            resistance: [0.40, 2.00],
            compliance: [0.10, 3.80],
            min_lambda_ct: 0.1,
        }
    }
}

/// Population statistics driving the virtual cohort.
///
/// The marginals follow the published cohort summary. The correlation
/// matrix and the DBP statistics are placeholders, not measured values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopulationStats {
    pub marginals: BTreeMap<Variable, Marginal>,
    pub correlation: Correlation,
    #[serde(default)]
    pub windkessel_bounds: WindkesselBounds,
    #[serde(default = "default_clip")]
    pub clip_sigma: f64,
    #[serde(default = "default_female_fraction")]
    pub female_fraction: f64,
}

fn default_clip() -> f64 {
    3.0
}

fn default_female_fraction() -> f64 {
    1301.0 / 2524.0
}

impl Default for PopulationStats {
    fn default() -> Self {
        let m = |lo, hi, mean, sd| Marginal { lo, hi, mean, sd };
        let marginals = BTreeMap::from([
            (Variable::Age, m(35.0, 57.0, 45.76, 5.61)),
            (Variable::Pwv, m(4.5, 9.0, 6.4, 0.92)),
            (Variable::Height, m(152.0, 190.0, 169.12, 7.92)),
            (Variable::Weight, m(48.0, 105.0, 72.89, 12.13)),
            (Variable::Sbp, m(102.0, 169.0, 129.64, 14.08)),
            (Variable::Dbp, m(40.0, 130.0, 78.0, 10.0)),
            (Variable::Hr, m(43.0, 85.0, 63.1, 8.07)),
            (Variable::Co, m(2.8, 7.5, 5.1, 0.96)),
        ]);
        use Variable::*;
        let variables = vec![Age, Pwv, Height, Weight, Hr, Co];
        let mut matrix = vec![vec![0.0; variables.len()]; variables.len()];
        for (i, row) in matrix.iter_mut().enumerate() {
            row[i] = 1.0;
        }
        let mut set = |a: Variable, b: Variable, r: f64| {
            let i = variables.iter().position(|&v| v == a).unwrap();
            let j = variables.iter().position(|&v| v == b).unwrap();
            matrix[i][j] = r;
            matrix[j][i] = r;
        };
        set(Height, Weight, 0.5);
        set(Age, Pwv, 0.4);
        set(Co, Weight, 0.3);
        PopulationStats {
            marginals,
            correlation: Correlation { variables, matrix },
            windkessel_bounds: WindkesselBounds::default(),
            clip_sigma: default_clip(),
            female_fraction: default_female_fraction(),
        }
    }
}

impl PopulationStats {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let stats: PopulationStats =
            serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
        stats.validate()?;
        Ok(stats)
    }

    pub fn marginal(&self, v: Variable) -> Result<&Marginal> {
        self.marginals
            .get(&v)
            .ok_or_else(|| Error::InvalidArgument(format!("no statistics for '{v}'")))
    }

    pub fn validate(&self) -> Result<()> {
        for (v, m) in &self.marginals {
            if !(m.sd > 0.0) {
                return Err(Error::InvalidArgument(format!("{v}: sd must be > 0")));
            }
            if !(m.lo <= m.mean && m.mean <= m.hi) {
                return Err(Error::InvalidArgument(format!("{v}: mean outside range")));
            }
        }
        for v in [Variable::Sbp, Variable::Dbp] {
            self.marginal(v)?;
        }
        if !(self.clip_sigma > 0.0) {
            return Err(Error::InvalidArgument("clip_sigma must be > 0".into()));
        }
        if !(0.0..=1.0).contains(&self.female_fraction) {
            return Err(Error::InvalidArgument("female_fraction must be in [0, 1]".into()));
        }
        let b = &self.windkessel_bounds;
        if !(0.0 < b.resistance[0] && b.resistance[0] < b.resistance[1]) {
            return Err(Error::InvalidArgument("resistance bounds must satisfy 0 < lo < hi".into()));
        }
        if !(0.0 < b.compliance[0] && b.compliance[0] < b.compliance[1]) {
            return Err(Error::InvalidArgument("compliance bounds must satisfy 0 < lo < hi".into()));
        }
        if !(b.min_lambda_ct > 0.0) {
            return Err(Error::InvalidArgument("min_lambda_ct must be > 0".into()));
        }

        let c = &self.correlation;
        let k = c.variables.len();
        for v in &c.variables {
            self.marginal(*v)?;
        }
        for required in [Variable::Age, Variable::Pwv, Variable::Height, Variable::Weight, Variable::Hr, Variable::Co] {
            if !c.variables.contains(&required) {
                return Err(Error::InvalidArgument(format!("correlation must include '{required}'")));
            }
        }
        if c.matrix.len() != k || c.matrix.iter().any(|r| r.len() != k) {
            return Err(Error::InvalidArgument(format!("correlation matrix must be {k}×{k}")));
        }
        for i in 0..k {
            if (c.matrix[i][i] - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidArgument("correlation diagonal must be 1".into()));
            }
            for j in 0..i {
                if (c.matrix[i][j] - c.matrix[j][i]).abs() > 1e-12 {
                    return Err(Error::InvalidArgument("correlation matrix must be symmetric".into()));
                }
            }
        }
        self.correlation_factor().map(|_| ())
    }

    /// `L` with `L Lᵀ = Σ`, from the eigendecomposition so that
    /// semidefinite matrices work too.
    pub(crate) fn correlation_factor(&self) -> Result<DMatrix<f64>> {
        let k = self.correlation.variables.len();
        let sigma = DMatrix::from_fn(k, k, |i, j| self.correlation.matrix[i][j]);
        let eig = SymmetricEigen::new(sigma);
        let smallest = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
        if smallest < -1e-10 {
            return Err(Error::NotPositiveSemidefinite(smallest));
        }
        let roots = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
        Ok(&eig.eigenvectors * DMatrix::from_diagonal(&roots))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        PopulationStats::default().validate().unwrap();
    }

    #[test]
    fn json_round_trip() {
        let s = PopulationStats::default();
        let text = serde_json::to_string(&s).unwrap();
        assert!(text.contains("\"marginals\""));
        assert!(text.contains("\"windkessel_bounds\""));
        let back: PopulationStats = serde_json::from_str(&text).unwrap();
        assert_eq!(s, back);
    }

    #[test]
    fn indefinite_matrix_rejected() {
        let mut s = PopulationStats::default();
        // three variables pairwise correlated at -0.9 cannot exist
        for (i, j) in [(0, 1), (0, 2), (1, 2)] {
            s.correlation.matrix[i][j] = -0.9;
            s.correlation.matrix[j][i] = -0.9;
        }
        assert!(matches!(s.validate(), Err(Error::NotPositiveSemidefinite(_))));
    }

    #[test]
    fn factor_reproduces_matrix() {
        let s = PopulationStats::default();
        let l = s.correlation_factor().unwrap();
        let back = &l * l.transpose();
        for i in 0..back.nrows() {
            for j in 0..back.ncols() {
                assert!((back[(i, j)] - s.correlation.matrix[i][j]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn asymmetric_or_bad_diagonal_rejected() {
        let mut s = PopulationStats::default();
        s.correlation.matrix[0][1] = 0.2;
        assert!(s.validate().is_err());
        let mut s = PopulationStats::default();
        s.correlation.matrix[2][2] = 0.9;
        assert!(s.validate().is_err());
    }

    #[test]
    fn mean_outside_range_rejected() {
        let mut s = PopulationStats::default();
        s.marginals.get_mut(&Variable::Co).unwrap().mean = 9.0;
        assert!(s.validate().is_err());
    }
}
