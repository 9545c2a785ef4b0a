use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{checked_range, linspace, output_index, predict_points, Ranges, Reference};
use crate::error::{Error, Result};
use crate::neuro::{Feature, MlpModel};
use crate::pulse1d::HemoRecord;

/// Hypertension stage of one pressure value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    NonPhysiological,
    Low,
    Normal,
    Stage1,
    Stage2,
}

impl Stage {
    pub fn as_str(self) -> &'static str {
        match self {
            Stage::NonPhysiological => "non_physiological",
            Stage::Low => "low",
            Stage::Normal => "normal",
            Stage::Stage1 => "stage1",
            Stage::Stage2 => "stage2",
        }
    }
}

/// Thresholds for one pressure (mmHg). Values at or above `stage2` up to the
/// physiological ceiling count as stage 2.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bands {
    pub normal: f64,
    pub stage1: f64,
    pub stage2: f64,
    pub physiological: [f64; 2],
}

impl Bands {
    pub fn classify(&self, v: f64) -> Stage {
        if !(self.physiological[0] <= v && v <= self.physiological[1]) {
            Stage::NonPhysiological
        } else if v < self.normal {
            Stage::Low
        } else if v < self.stage1 {
            Stage::Normal
        } else if v < self.stage2 {
            Stage::Stage1
        } else {
            Stage::Stage2
        }
    }

    /// Ordinal position with the non-physiological tails at either end.
    pub fn rank(&self, v: f64) -> i32 {
        match self.classify(v) {
            Stage::NonPhysiological if v < self.physiological[0] => -1,
            Stage::NonPhysiological => 4,
            Stage::Low => 0,
            Stage::Normal => 1,
            Stage::Stage1 => 2,
            Stage::Stage2 => 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StagingBands {
    pub sbp: Bands,
    pub dbp: Bands,
}

impl Default for StagingBands {
    fn default() -> Self {
        StagingBands {
            sbp: Bands {
                normal: 90.0,
                stage1: 130.0,
                stage2: 140.0,
                physiological: [70.0, 200.0],
            },
            dbp: Bands {
                normal: 60.0,
                stage1: 80.0,
                stage2: 90.0,
                physiological: [40.0, 130.0],
            },
        }
    }
}

impl StagingBands {
    pub fn for_output(&self, f: Feature) -> Option<&Bands> {
        match f {
            Feature::Sbp => Some(&self.sbp),
            Feature::Dbp => Some(&self.dbp),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridAxis {
    pub feature: Feature,
    pub values: Vec<f64>,
}

/// Surrogate predictions on a regular lattice. Cells are stored with the
/// last axis varying fastest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisGrid {
    pub axes: Vec<GridAxis>,
    pub outputs: Vec<Feature>,
    /// `values[cell][output]`.
    pub values: Vec<Vec<f64>>,
    /// `labels[cell][output]`, present for staged grids.
    pub labels: Option<Vec<Vec<Stage>>>,
}

impl AnalysisGrid {
    pub fn shape(&self) -> Vec<usize> {
        self.axes.iter().map(|a| a.values.len()).collect()
    }

    pub fn n_cells(&self) -> usize {
        self.shape().iter().product()
    }

    /// Per-axis indices of a flat cell index.
    pub fn unravel(&self, mut cell: usize) -> Vec<usize> {
        let shape = self.shape();
        let mut idx = vec![0; shape.len()];
        for (k, &n) in shape.iter().enumerate().rev() {
            idx[k] = cell % n;
            cell /= n;
        }
        idx
    }

    pub fn ravel(&self, idx: &[usize]) -> usize {
        self.shape().iter().zip(idx).fold(0, |acc, (&n, &i)| acc * n + i)
    }

    pub fn output_column(&self, f: Feature) -> Option<usize> {
        self.outputs.iter().position(|&o| o == f)
    }

    /// Flat cell indices of every line running along `axis`.
    pub fn lines(&self, axis: usize) -> Vec<Vec<usize>> {
        let shape = self.shape();
        let mut out = Vec::new();
        for cell in 0..self.n_cells() {
            let idx = self.unravel(cell);
            if idx[axis] != 0 {
                continue;
            }
            out.push(
                (0..shape[axis])
                    .map(|i| {
                        let mut j = idx.clone();
                        j[axis] = i;
                        self.ravel(&j)
                    })
                    .collect(),
            );
        }
        out
    }

    /// Fraction of neighbouring cell pairs along `axis` for which
    /// `ok(previous, next)` holds for output `f`.
    pub fn adjacent_fraction(&self, axis: usize, f: Feature, ok: impl Fn(f64, f64) -> bool) -> Option<f64> {
        let col = self.output_column(f)?;
        let (mut good, mut total) = (0usize, 0usize);
        for line in self.lines(axis) {
            for w in line.windows(2) {
                total += 1;
                good += ok(self.values[w[0]][col], self.values[w[1]][col]) as usize;
            }
        }
        (total > 0).then(|| good as f64 / total as f64)
    }

    /// Fraction of lines along `axis` whose stage never decreases.
    pub fn stage_monotone_fraction(&self, axis: usize, f: Feature, bands: &Bands) -> Option<f64> {
        let col = self.output_column(f)?;
        let lines = self.lines(axis);
        let good = lines
            .iter()
            .filter(|line| {
                line.windows(2)
                    .all(|w| bands.rank(self.values[w[0]][col]) <= bands.rank(self.values[w[1]][col]))
            })
            .count();
        (!lines.is_empty()).then(|| good as f64 / lines.len() as f64)
    }

    /// One row per cell: axis coordinates, outputs, then labels if any.
    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        let mut header: Vec<String> = self.axes.iter().map(|a| a.feature.to_string()).collect();
        header.extend(self.outputs.iter().map(|o| o.to_string()));
        if self.labels.is_some() {
            header.extend(self.outputs.iter().map(|o| format!("{o}_stage")));
        }
        s.push_str(&header.join(","));
        s.push('\n');
        for cell in 0..self.n_cells() {
            let idx = self.unravel(cell);
            let mut fields: Vec<String> = idx
                .iter()
                .zip(&self.axes)
                .map(|(&i, a)| a.values[i].to_string())
                .collect();
            fields.extend(self.values[cell].iter().map(|v| v.to_string()));
            if let Some(labels) = &self.labels {
                fields.extend(labels[cell].iter().map(|l| l.as_str().to_string()));
            }
            let _ = writeln!(s, "{}", fields.join(","));
        }
        s
    }
}

fn build_grid(
    model: &MlpModel,
    axes: &[Feature],
    ranges: &Ranges,
    reference: &Reference,
    n: usize,
) -> Result<AnalysisGrid> {
    let axes: Vec<GridAxis> = axes
        .iter()
        .map(|&f| {
            let r = checked_range(ranges, f)?;
            Ok(GridAxis {
                feature: f,
                values: linspace(r[0], r[1], n),
            })
        })
        .collect::<Result<_>>()?;
    let mut grid = AnalysisGrid {
        axes,
        outputs: model.spec().outputs.clone(),
        values: Vec::new(),
        labels: None,
    };
    let points: Vec<Vec<f64>> = (0..grid.n_cells())
        .map(|cell| {
            grid.unravel(cell)
                .iter()
                .zip(&grid.axes)
                .map(|(&i, a)| a.values[i])
                .collect()
        })
        .collect();
    let features: Vec<Feature> = grid.axes.iter().map(|a| a.feature).collect();
    let y = predict_points(model, reference, &features, &points)?;
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::BlowUp {
            segment: -1,
            cell: 0,
            reason: "non-finite surrogate prediction".into(),
        });
    }
    grid.values = y.rows().into_iter().map(|r| r.to_vec()).collect();
    Ok(grid)
}

/// Dense 2-D grid of the model outputs over `pair`.
pub fn contour_grid(
    model: &MlpModel,
    pair: (Feature, Feature),
    ranges: &Ranges,
    reference: &Reference,
    grid_n: usize,
) -> Result<AnalysisGrid> {
    if grid_n < 2 {
        return Err(Error::InvalidArgument("grid resolution must be >= 2".into()));
    }
    if pair.0 == pair.1 {
        return Err(Error::InvalidArgument("contour axes must differ".into()));
    }
    build_grid(model, &[pair.0, pair.1], ranges, reference, grid_n)
}

/// 3-D lattice with every cell staged for SBP and DBP.
pub fn isosurface_grid(
    model: &MlpModel,
    axes: [Feature; 3],
    ranges: &Ranges,
    reference: &Reference,
    resolution: usize,
    bands: &StagingBands,
) -> Result<AnalysisGrid> {
    if resolution < 8 {
        return Err(Error::InvalidArgument(format!("resolution must be >= 8, got {resolution}")));
    }
    if axes[0] == axes[1] || axes[1] == axes[2] || axes[0] == axes[2] {
        return Err(Error::InvalidArgument("isosurface axes must differ".into()));
    }
    output_index(model, Feature::Sbp)?;
    output_index(model, Feature::Dbp)?;
    let mut grid = build_grid(model, &axes, ranges, reference, resolution)?;
    let labels = grid
        .values
        .iter()
        .map(|row| {
            grid.outputs
                .iter()
                .zip(row)
                .map(|(&f, &v)| bands.for_output(f).map_or(Stage::NonPhysiological, |b| b.classify(v)))
                .collect()
        })
        .collect();
    grid.labels = Some(labels);
    Ok(grid)
}

/// Training points projected onto `pair`, for overlays on a contour grid.
pub fn project_points(records: &[HemoRecord], rows: &[usize], pair: (Feature, Feature)) -> Vec<[f64; 2]> {
    rows.iter()
        .filter_map(|&i| Some([pair.0.value(&records[i])?, pair.1.value(&records[i])?]))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn staging_partition() {
        let b = StagingBands::default();
        let cases = [
            (65.0, Stage::NonPhysiological),
            (85.0, Stage::Low),
            (90.0, Stage::Normal),
            (129.9, Stage::Normal),
            (130.0, Stage::Stage1),
            (140.0, Stage::Stage2),
            (190.0, Stage::Stage2),
            (200.5, Stage::NonPhysiological),
        ];
        for (v, s) in cases {
            assert_eq!(b.sbp.classify(v), s, "sbp {v}");
        }
        assert_eq!(b.dbp.classify(85.0), Stage::Stage1);
        assert_eq!(b.dbp.classify(35.0), Stage::NonPhysiological);
        assert!(b.sbp.rank(65.0) < b.sbp.rank(85.0) && b.sbp.rank(190.0) < b.sbp.rank(250.0));
    }

    #[test]
    fn ravel_round_trip_and_lines() {
        let grid = AnalysisGrid {
            axes: vec![
                GridAxis {
                    feature: Feature::Co,
                    values: vec![1.0, 2.0, 3.0],
                },
                GridAxis {
                    feature: Feature::Hr,
                    values: vec![10.0, 20.0],
                },
            ],
            outputs: vec![Feature::Sbp],
            values: (0..6).map(|i| vec![i as f64]).collect(),
            labels: None,
        };
        for c in 0..grid.n_cells() {
            assert_eq!(grid.ravel(&grid.unravel(c)), c);
        }
        assert_eq!(grid.lines(0), vec![vec![0, 2, 4], vec![1, 3, 5]]);
        assert_eq!(grid.lines(1), vec![vec![0, 1], vec![2, 3], vec![4, 5]]);
        assert_eq!(grid.adjacent_fraction(0, Feature::Sbp, |a, b| b >= a), Some(1.0));
        let csv = grid.to_csv();
        assert_eq!(csv.lines().count(), 7);
        assert!(csv.starts_with("co,hr,sbp\n1,10,0\n"));
    }
}
