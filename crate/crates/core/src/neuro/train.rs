use ndarray::{Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::model::{MlpModel, Standardizer, TrainingMeta};
use super::FeatureSpec;
use crate::error::{Error, Result};
use crate::pulse1d::HemoRecord;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub train_fraction: f64,
    /// Huber threshold in standardized output units.
    pub huber_beta: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 3e-4,
            weight_decay: 1e-4,
            batch_size: 128,
            epochs: 2000,
            train_fraction: 0.8,
            huber_beta: 1.0,
            seed: 42,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) || !(self.weight_decay >= 0.0) || !(self.huber_beta > 0.0) {
            return Err(Error::InvalidArgument(
                "learning_rate and huber_beta must be > 0, weight_decay >= 0".into(),
            ));
        }
        if self.batch_size == 0 || self.epochs == 0 {
            return Err(Error::InvalidArgument("batch_size and epochs must be > 0".into()));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::InvalidArgument("train_fraction must be in (0, 1)".into()));
        }
        Ok(())
    }
}

/// Per-epoch mean squared error in standardized output units, evaluation mode.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Curves {
    pub train_mse: Vec<f64>,
    pub test_mse: Vec<f64>,
}

/// Record indices of the train/test partition.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct Trained {
    pub model: MlpModel,
    pub curves: Curves,
    pub split: Split,
}

/// Mean Huber loss: `½r²` for `|r| < β`, `β(|r| − ½β)` beyond.
pub fn huber_loss(y: &[f64], yhat: &[f64], beta: f64) -> Result<f64> {
    if y.len() != yhat.len() {
        return Err(Error::LengthMismatch(y.len(), yhat.len()));
    }
    if !(beta > 0.0) {
        return Err(Error::InvalidArgument("huber beta must be > 0".into()));
    }
    if y.is_empty() {
        return Ok(0.0);
    }
    let sum: f64 = y.iter().zip(yhat).map(|(a, b)| huber(a - b, beta)).sum();
    Ok(sum / y.len() as f64)
}

fn huber(r: f64, beta: f64) -> f64 {
    if r.abs() < beta {
        0.5 * r * r
    } else {
        beta * (r.abs() - 0.5 * beta)
    }
}

/// `∂ huber_loss / ∂ yhat`, elementwise.
pub fn huber_grad(y: ArrayView2<f64>, yhat: ArrayView2<f64>, beta: f64) -> Array2<f64> {
    let n = y.len() as f64;
    let mut g = &yhat - &y;
    g.mapv_inplace(|d| d.clamp(-beta, beta) / n);
    g
}

pub fn mse(y: ArrayView2<f64>, yhat: ArrayView2<f64>) -> f64 {
    let d = &y - &yhat;
    d.mapv(|v| v * v).mean().unwrap_or(0.0)
}

/// Seeded shuffle of `rows`, first `train_fraction` of them for training.
/// Both halves come back sorted.
pub fn split_indices(rows: &[usize], train_fraction: f64, seed: u64) -> Split {
    let mut order = rows.to_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    order.shuffle(&mut rng);
    let n_train = ((rows.len() as f64 * train_fraction).round() as usize).clamp(1, rows.len().saturating_sub(1));
    let mut train = order[..n_train].to_vec();
    let mut test = order[n_train..].to_vec();
    train.sort_unstable();
    test.sort_unstable();
    Split { train, test }
}

/// Smallest usable record count accepted by [`train`].
pub(crate) fn min_records(spec: &FeatureSpec) -> usize {
    (10 * spec.inputs.len()).max(32)
}

struct AdamW {
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    t: i32,
    lr: f64,
    wd: f64,
}

impl AdamW {
    const B1: f64 = 0.9;
    const B2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(model: &MlpModel, lr: f64, wd: f64) -> Self {
        let zeros: Vec<Vec<f64>> = model.param_slices().iter().map(|s| vec![0.0; s.len()]).collect();
        AdamW {
            m: zeros.clone(),
            v: zeros,
            t: 0,
            lr,
            wd,
        }
    }

    fn step(&mut self, model: &mut MlpModel, grads: &[Vec<f64>]) {
        self.t += 1;
        let c1 = 1.0 - Self::B1.powi(self.t);
        let c2 = 1.0 - Self::B2.powi(self.t);
        for (k, p) in model.param_slices_mut().into_iter().enumerate() {
            let (m, v, g) = (&mut self.m[k], &mut self.v[k], &grads[k]);
            for i in 0..p.len() {
                p[i] -= self.lr * self.wd * p[i];
                m[i] = Self::B1 * m[i] + (1.0 - Self::B1) * g[i];
                v[i] = Self::B2 * v[i] + (1.0 - Self::B2) * g[i] * g[i];
                p[i] -= self.lr * (m[i] / c1) / ((v[i] / c2).sqrt() + Self::EPS);
            }
        }
    }
}

fn rows_of(a: &Array2<f64>, idx: &[usize]) -> Array2<f64> {
    a.select(Axis(0), idx)
}

/// Trains a surrogate on the converged records carrying every feature of `spec`.
pub fn train(records: &[HemoRecord], spec: &FeatureSpec, cfg: &TrainConfig) -> Result<Trained> {
    cfg.validate()?;
    spec.validate()?;
    let usable = spec.usable(records);
    let need = min_records(spec);
    if usable.len() < need {
        return Err(Error::InsufficientData(format!(
            "{} usable records, need at least {need}",
            usable.len()
        )));
    }
    let split = split_indices(&usable, cfg.train_fraction, cfg.seed);
    let (x_train, y_train) = spec.extract(records, &split.train)?;
    let (x_test, y_test) = spec.extract(records, &split.test)?;
    let x_std = Standardizer::fit(x_train.view(), &spec.inputs)?;
    let y_std = Standardizer::fit(y_train.view(), &spec.outputs)?;
    let (zx, zy) = (x_std.transform(x_train.view()), y_std.transform(y_train.view()));
    let (tx, ty) = (x_std.transform(x_test.view()), y_std.transform(y_test.view()));

    let mut model = MlpModel::new(spec.clone(), x_std, y_std, cfg.seed)?;
    let mut opt = AdamW::new(&model, cfg.learning_rate, cfg.weight_decay);
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    shuffle_rng.set_stream(3);
    let mut dropout_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    dropout_rng.set_stream(4);

    let initial_test_mse = mse(ty.view(), model.eval_std(tx.view()).view());
    let mut curves = Curves::default();
    let mut order: Vec<usize> = (0..zx.nrows()).collect();
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut shuffle_rng);
        for batch in order.chunks(cfg.batch_size) {
            let (bx, by) = (rows_of(&zx, batch), rows_of(&zy, batch));
            let masks = model.dropout_masks(batch.len(), &mut dropout_rng);
            let (out, tape) = model.train_forward(bx.view(), &masks);
            let dout = huber_grad(by.view(), out.view(), cfg.huber_beta);
            let grads = model.backward(&tape, dout.view());
            model.update_running(&tape, batch.len());
            opt.step(&mut model, &grads);
        }
        curves.train_mse.push(mse(zy.view(), model.eval_std(zx.view()).view()));
        curves.test_mse.push(mse(ty.view(), model.eval_std(tx.view()).view()));
        if !curves.train_mse[epoch].is_finite() {
            return Err(Error::BlowUp {
                segment: -1,
                cell: epoch,
                reason: "training loss is not finite".into(),
            });
        }
        if (epoch + 1) % 500 == 0 {
            log::debug!(
                "epoch {}: train {:.4e} test {:.4e}",
                epoch + 1,
                curves.train_mse[epoch],
                curves.test_mse[epoch]
            );
        }
    }

    model.set_meta(TrainingMeta {
        seed: cfg.seed,
        epochs: cfg.epochs,
        n_train: split.train.len(),
        n_test: split.test.len(),
        learning_rate: cfg.learning_rate,
        weight_decay: cfg.weight_decay,
        batch_size: cfg.batch_size,
        huber_beta: cfg.huber_beta,
        initial_test_mse,
        final_train_mse: *curves.train_mse.last().expect("epochs > 0"),
        final_test_mse: *curves.test_mse.last().expect("epochs > 0"),
    });
    Ok(Trained { model, curves, split })
}

/// Analytic versus central-difference gradient of one parameter tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct GradCheck {
    /// e.g. `hidden0.w`, `hidden2.gamma`, `output.b`.
    pub tensor: String,
    pub rel_error: f64,
}

fn tensor_names(model: &MlpModel) -> Vec<String> {
    let mut names = Vec::new();
    for i in 0..model.hidden.len() {
        for p in ["w", "b", "gamma", "beta"] {
            names.push(format!("hidden{i}.{p}"));
        }
    }
    names.push("output.w".into());
    names.push("output.b".into());
    names
}

/// Compares backpropagated gradients of the Huber objective on the
/// standardized batch `(z, y)` with central differences of step `h`.
/// Dropout masks are drawn once from `seed` and held fixed. At most
/// `max_per_tensor` evenly spaced entries of each tensor are probed.
///
/// The error per tensor is `‖g − g_fd‖ / max(‖g‖ + ‖g_fd‖, 1e-6)`; the floor
/// covers the pre-batch-norm biases, whose exact gradient is zero.
pub fn gradient_check(
    model: &MlpModel,
    z: ArrayView2<f64>,
    y: ArrayView2<f64>,
    beta: f64,
    h: f64,
    seed: u64,
    max_per_tensor: usize,
) -> Vec<GradCheck> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let masks = model.dropout_masks(z.nrows(), &mut rng);
    let loss = |m: &MlpModel| -> f64 {
        let out = m.train_forward(z, &masks).0;
        let (a, b) = (y.iter().copied().collect::<Vec<_>>(), out.iter().copied().collect::<Vec<_>>());
        huber_loss(&a, &b, beta).expect("same shape")
    };
    let (out, tape) = model.train_forward(z, &masks);
    let analytic = model.backward(&tape, huber_grad(y, out.view(), beta).view());

    let mut probe = model.clone();
    let names = tensor_names(model);
    let mut report = Vec::with_capacity(names.len());
    for (k, name) in names.into_iter().enumerate() {
        let len = analytic[k].len();
        let stride = len.div_ceil(max_per_tensor.max(1));
        let mut diff2 = 0.0;
        let (mut a2, mut n2) = (0.0, 0.0);
        for i in (0..len).step_by(stride) {
            let orig = probe.param_slices()[k][i];
            probe.param_slices_mut()[k][i] = orig + h;
            let up = loss(&probe);
            probe.param_slices_mut()[k][i] = orig - h;
            let down = loss(&probe);
            probe.param_slices_mut()[k][i] = orig;
            let fd = (up - down) / (2.0 * h);
            let g = analytic[k][i];
            diff2 += (g - fd) * (g - fd);
            a2 += g * g;
            n2 += fd * fd;
        }
        let denom = (a2.sqrt() + n2.sqrt()).max(1e-6);
        report.push(GradCheck {
            tensor: name,
            rel_error: diff2.sqrt() / denom,
        });
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neuro::{Feature, Mode};
    use ndarray::array;
    use rand::Rng;

    fn small_model(dropout: f64) -> MlpModel {
        let spec = FeatureSpec::new(vec![Feature::Hr, Feature::Co, Feature::LambdaRt], vec![Feature::Sbp, Feature::Dbp]).unwrap();
        let s = |n| Standardizer {
            mean: vec![0.0; n],
            sd: vec![1.0; n],
        };
        let mut m = MlpModel::new(spec, s(3), s(2), 11).unwrap();
        m.dropout = dropout;
        m
    }

    fn batch(n: usize, seed: u64) -> (Array2<f64>, Array2<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let z = Array2::from_shape_simple_fn((n, 3), || rng.random_range(-1.5..1.5));
        let y = Array2::from_shape_simple_fn((n, 2), || rng.random_range(-2.0..2.0));
        (z, y)
    }

    #[test]
    fn huber_branches() {
        assert_eq!(huber_loss(&[0.5], &[0.0], 1.0).unwrap(), 0.125);
        assert_eq!(huber_loss(&[2.0], &[0.0], 1.0).unwrap(), 1.5);
        // value and slope match at |r| = β
        let beta = 0.7;
        let eps = 1e-9;
        let left = huber(beta - eps, beta);
        let right = huber(beta + eps, beta);
        assert!((left - 0.5 * beta * beta).abs() < 1e-8 && (right - 0.5 * beta * beta).abs() < 1e-8);
        let slope_l = (huber(beta - eps, beta) - huber(beta - 2.0 * eps, beta)) / eps;
        let slope_r = (huber(beta + 2.0 * eps, beta) - huber(beta + eps, beta)) / eps;
        assert!((slope_l - beta).abs() < 1e-5 && (slope_r - beta).abs() < 1e-5);
        assert!(huber_loss(&[1.0], &[1.0, 2.0], 1.0).is_err());
        assert!(huber_loss(&[1.0], &[1.0], 0.0).is_err());
    }

    #[test]
    fn huber_with_huge_beta_is_half_squared_error() {
        let y = [1.0, -2.0, 0.3, 4.0];
        let yhat = [0.5, 1.0, 0.2, -3.0];
        let half_mse: f64 = y.iter().zip(&yhat).map(|(a, b)| 0.5 * (a - b) * (a - b)).sum::<f64>() / 4.0;
        assert!((huber_loss(&y, &yhat, 1e12).unwrap() - half_mse).abs() < 1e-10);
    }

    #[test]
    fn full_stack_gradient_check() {
        let m = small_model(0.1);
        let (z, y) = batch(4, 5);
        for c in gradient_check(&m, z.view(), y.view(), 1.0, 1e-4, 9, 512) {
            assert!(c.rel_error < 1e-4, "{}: {:.3e}", c.tensor, c.rel_error);
        }
    }

    #[test]
    fn gradient_check_per_layer_kind() {
        // dense and batch-norm parameters with and without dropout, and the
        // quadratic-only branch of the loss
        for (dropout, beta) in [(0.0, 1.0), (0.5, 1.0), (0.1, 1e6)] {
            let m = small_model(dropout);
            let (z, y) = batch(4, 17);
            let report = gradient_check(&m, z.view(), y.view(), beta, 1e-4, 3, 64);
            for kind in [".w", ".b", ".gamma", ".beta"] {
                let worst = report
                    .iter()
                    .filter(|c| c.tensor.ends_with(kind))
                    .map(|c| c.rel_error)
                    .fold(0.0, f64::max);
                assert!(worst < 1e-4, "{kind} dropout {dropout}: {worst:.3e}");
            }
        }
    }

    #[test]
    fn zero_residual_gives_zero_output_gradients() {
        let m = small_model(0.0);
        let (z, _) = batch(4, 1);
        let masks = m.dropout_masks(4, &mut ChaCha8Rng::seed_from_u64(0));
        let (out, tape) = m.train_forward(z.view(), &masks);
        let grads = m.backward(&tape, huber_grad(out.view(), out.view(), 1.0).view());
        let n = grads.len();
        assert!(grads[n - 2].iter().chain(&grads[n - 1]).all(|&g| g == 0.0));
    }

    #[test]
    fn seeded_dropout_reproducible() {
        let m = small_model(0.3);
        let (z, y) = batch(6, 2);
        let run = || {
            let masks = m.dropout_masks(6, &mut ChaCha8Rng::seed_from_u64(4));
            let (out, tape) = m.train_forward(z.view(), &masks);
            m.backward(&tape, huber_grad(y.view(), out.view(), 1.0).view())
        };
        assert_eq!(run(), run());
        let a = m.forward(z.view(), Mode::Train { seed: 8 }).unwrap();
        let b = m.forward(z.view(), Mode::Train { seed: 8 }).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn split_is_seeded_partition() {
        let rows: Vec<usize> = (0..50).map(|i| 2 * i).collect();
        let s = split_indices(&rows, 0.8, 3);
        assert_eq!((s.train.len(), s.test.len()), (40, 10));
        let mut all: Vec<usize> = s.train.iter().chain(&s.test).copied().collect();
        all.sort_unstable();
        assert_eq!(all, rows);
        assert_eq!(s, split_indices(&rows, 0.8, 3));
        assert_ne!(s, split_indices(&rows, 0.8, 4));
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        for bad in [
            TrainConfig { train_fraction: 1.0, ..Default::default() },
            TrainConfig { learning_rate: 0.0, ..Default::default() },
            TrainConfig { batch_size: 0, ..Default::default() },
        ] {
            assert!(bad.validate().is_err());
        }
    }

    #[test]
    fn mse_basic() {
        let a = array![[1.0, 2.0], [3.0, 4.0]];
        let b = array![[1.0, 0.0], [3.0, 6.0]];
        assert_eq!(mse(a.view(), b.view()), 2.0);
    }
}
