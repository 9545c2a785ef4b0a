use serde::{Deserialize, Serialize};

use super::{checked_range, linspace, output_index, predict_points, Ranges, Reference};
use crate::error::{Error, Result};
use crate::neuro::{Feature, MlpModel};

/// Pressure span (max − min, mmHg) for each pair of swept inputs; the
/// diagonal holds the 1-D sweeps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityMatrix {
    pub output: String,
    pub params: Vec<Feature>,
    pub values: Vec<Vec<f64>>,
}

impl SensitivityMatrix {
    fn new(output: &str, params: &[Feature]) -> Self {
        SensitivityMatrix {
            output: output.into(),
            params: params.to_vec(),
            values: vec![vec![0.0; params.len()]; params.len()],
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.params.len()).map(|i| self.values[i][i]).collect()
    }

    pub fn entry(&self, a: Feature, b: Feature) -> Option<f64> {
        let i = self.params.iter().position(|&p| p == a)?;
        let j = self.params.iter().position(|&p| p == b)?;
        Some(self.values[i][j])
    }

    /// Parameters with the `k` largest 1-D spans, largest first.
    pub fn top_diagonal(&self, k: usize) -> Vec<Feature> {
        let d = self.diagonal();
        let mut idx: Vec<usize> = (0..d.len()).collect();
        idx.sort_by(|&a, &b| d[b].total_cmp(&d[a]));
        idx.into_iter().take(k).map(|i| self.params[i]).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("param");
        for p in &self.params {
            s.push(',');
            s.push_str(p.as_str());
        }
        s.push('\n');
        for (p, row) in self.params.iter().zip(&self.values) {
            s.push_str(p.as_str());
            for v in row {
                s.push_str(&format!(",{v}"));
            }
            s.push('\n');
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sensitivity {
    pub grid_n: usize,
    pub dbp: SensitivityMatrix,
    pub sbp: SensitivityMatrix,
    pub pp: SensitivityMatrix,
}

/// Axis points: `n` evenly spaced values plus the reference value, so that
/// every pair grid contains both 1-D sweeps.
fn axis_points(range: [f64; 2], n: usize, reference: f64) -> Vec<f64> {
    let mut v = linspace(range[0], range[1], n);
    if !v.contains(&reference) {
        v.push(reference);
        v.sort_by(f64::total_cmp);
    }
    v
}

fn span(values: impl Iterator<Item = f64>) -> f64 {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    hi - lo
}

/// Pairwise pressure spans of the model's brachial DBP, SBP and PP over every
/// input pair, all other inputs held at `reference`.
pub fn pairwise_sensitivity(model: &MlpModel, ranges: &Ranges, reference: &Reference, grid_n: usize) -> Result<Sensitivity> {
    if grid_n < 11 {
        return Err(Error::InvalidArgument(format!("grid_n must be >= 11, got {grid_n}")));
    }
    let (i_dbp, i_sbp) = (output_index(model, Feature::Dbp)?, output_index(model, Feature::Sbp)?);
    let params = model.spec().inputs.clone();
    let mut axes = Vec::with_capacity(params.len());
    for &p in &params {
        let r = checked_range(ranges, p)?;
        let x0 = *reference
            .get(&p)
            .ok_or_else(|| Error::FeatureMismatch(format!("no reference value for '{p}'")))?;
        if !(r[0] <= x0 && x0 <= r[1]) {
            return Err(Error::InvalidArgument(format!("reference {p} = {x0} outside {r:?}")));
        }
        axes.push(axis_points(r, grid_n, x0));
    }

    let mut out = Sensitivity {
        grid_n,
        dbp: SensitivityMatrix::new("dbp", &params),
        sbp: SensitivityMatrix::new("sbp", &params),
        pp: SensitivityMatrix::new("pp", &params),
    };
    let mut record = |i: usize, j: usize, y: &ndarray::Array2<f64>| {
        let d = span(y.column(i_dbp).iter().copied());
        let s = span(y.column(i_sbp).iter().copied());
        let p = span(y.rows().into_iter().map(|r| r[i_sbp] - r[i_dbp]));
        for (m, v) in [(&mut out.dbp, d), (&mut out.sbp, s), (&mut out.pp, p)] {
            m.values[i][j] = v;
            m.values[j][i] = v;
        }
    };
    for i in 0..params.len() {
        let points: Vec<Vec<f64>> = axes[i].iter().map(|&a| vec![a]).collect();
        let y = predict_points(model, reference, &params[i..=i], &points)?;
        record(i, i, &y);
        for j in i + 1..params.len() {
            let points: Vec<Vec<f64>> = axes[i]
                .iter()
                .flat_map(|&a| axes[j].iter().map(move |&b| vec![a, b]))
                .collect();
            let y = predict_points(model, reference, &[params[i], params[j]], &points)?;
            record(i, j, &y);
        }
    }
    Ok(out)
}
