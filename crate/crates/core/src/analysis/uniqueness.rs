use serde::{Deserialize, Serialize};

use super::{linspace, output_index, predict_points, Reference};
use crate::error::{Error, Result};
use crate::neuro::{Feature, MlpModel};

const LEVELS: usize = 21;

/// CO over an (R_T, C_T) lattice for one fixed patient.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniquenessResult {
    pub rt: Vec<f64>,
    pub ct: Vec<f64>,
    /// `raw[i][j]` at `rt[i]`, `ct[j]`.
    pub raw: Vec<Vec<f64>>,
    /// Each fixed-R_T column divided by its maximum.
    pub normalized: Vec<Vec<f64>>,
    pub levels: Vec<f64>,
    /// Most sign changes of `normalized − α` along R_T over all C_T and α.
    pub max_root_count: usize,
    /// Share of adjacent R_T pairs moving in the dominant direction.
    pub monotone_fraction: f64,
    /// `+1` if CO mostly rises with R_T, `−1` if it mostly falls.
    pub direction: i8,
}

impl UniquenessResult {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("lambda_rt,lambda_ct,co,co_normalized\n");
        for (i, rt) in self.rt.iter().enumerate() {
            for (j, ct) in self.ct.iter().enumerate() {
                s.push_str(&format!("{rt},{ct},{},{}\n", self.raw[i][j], self.normalized[i][j]));
            }
        }
        s
    }
}

fn sign_changes(values: impl Iterator<Item = f64>) -> usize {
    let mut last = 0.0f64;
    let mut n = 0;
    for v in values {
        if v == 0.0 {
            continue;
        }
        if last != 0.0 && (v > 0.0) != (last > 0.0) {
            n += 1;
        }
        last = v;
    }
    n
}

/// Evaluates the CO surrogate on a `grid_n × grid_n` lattice of
/// `(λ_RT, λ_CT)` with the clinical inputs fixed at `x0`.
pub fn uniqueness_grid(
    model: &MlpModel,
    x0: &Reference,
    rt_range: [f64; 2],
    ct_range: [f64; 2],
    grid_n: usize,
) -> Result<UniquenessResult> {
    if grid_n < 20 {
        return Err(Error::InvalidArgument(format!("grid_n must be >= 20, got {grid_n}")));
    }
    for r in [rt_range, ct_range] {
        if !(r[0] < r[1]) || r[0] <= 0.0 {
            return Err(Error::InvalidArgument(format!("bad range {r:?}")));
        }
    }
    let i_co = output_index(model, Feature::Co)?;
    let rt = linspace(rt_range[0], rt_range[1], grid_n);
    let ct = linspace(ct_range[0], ct_range[1], grid_n);
    let points: Vec<Vec<f64>> = rt.iter().flat_map(|&a| ct.iter().map(move |&b| vec![a, b])).collect();
    let y = predict_points(model, x0, &[Feature::LambdaRt, Feature::LambdaCt], &points)?;
    let raw: Vec<Vec<f64>> = (0..grid_n)
        .map(|i| (0..grid_n).map(|j| y[[i * grid_n + j, i_co]]).collect())
        .collect();
    if raw.iter().flatten().any(|v| !(v.is_finite() && *v > 0.0)) {
        return Err(Error::InvalidArgument("surrogate CO must be finite and positive on the grid".into()));
    }
    let normalized: Vec<Vec<f64>> = raw
        .iter()
        .map(|col| {
            let m = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            col.iter().map(|v| v / m).collect()
        })
        .collect();

    let (lo, hi) = normalized
        .iter()
        .flatten()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let levels: Vec<f64> = if lo < hi {
        let v = linspace(lo, hi, LEVELS + 2);
        v[1..=LEVELS].to_vec()
    } else {
        vec![lo]
    };
    let mut max_root_count = 0;
    for j in 0..grid_n {
        for &a in &levels {
            max_root_count = max_root_count.max(sign_changes((0..grid_n).map(|i| normalized[i][j] - a)));
        }
    }

    let (mut up, mut down) = (0usize, 0usize);
    for j in 0..grid_n {
        for i in 1..grid_n {
            let d = raw[i][j] - raw[i - 1][j];
            up += (d > 0.0) as usize;
            down += (d < 0.0) as usize;
        }
    }
    let pairs = (grid_n * (grid_n - 1)) as f64;
    let direction = if up >= down { 1 } else { -1 };
    Ok(UniquenessResult {
        rt,
        ct,
        raw,
        normalized,
        levels,
        max_root_count,
        monotone_fraction: up.max(down) as f64 / pairs,
        direction,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sign_change_counting() {
        assert_eq!(sign_changes([1.0, -1.0, 2.0, -3.0].into_iter()), 3);
        assert_eq!(sign_changes([1.0, 0.0, 2.0].into_iter()), 0);
        assert_eq!(sign_changes([1.0, 0.0, -2.0].into_iter()), 1);
        assert_eq!(sign_changes([-1.0, -2.0].into_iter()), 0);
    }
}
