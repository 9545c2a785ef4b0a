use std::path::Path;

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Feature, FeatureSpec};
use crate::error::{Error, Result};

pub const HIDDEN_WIDTHS: [usize; 3] = [128, 256, 128];
pub const MODEL_FORMAT: &str = "hemoforge-mlp";
pub const MODEL_VERSION: u32 = 1;

/// Per-column affine map to zero mean and unit variance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub sd: Vec<f64>,
}

impl Standardizer {
    /// Fits on the rows of `x`; `names` label the columns for error messages.
    pub fn fit(x: ArrayView2<f64>, names: &[Feature]) -> Result<Self> {
        if x.nrows() < 2 {
            return Err(Error::InsufficientData("standardizer needs at least two rows".into()));
        }
        let mean = x.mean_axis(Axis(0)).expect("non-empty");
        let sd = x.std_axis(Axis(0), 0.0);
        for (j, (&m, &s)) in mean.iter().zip(&sd).enumerate() {
            if !(s > 1e-12 * m.abs().max(1.0)) {
                let name = names.get(j).map_or_else(|| format!("column {j}"), |f| f.to_string());
                return Err(Error::ConstantFeature(name));
            }
        }
        Ok(Standardizer {
            mean: mean.to_vec(),
            sd: sd.to_vec(),
        })
    }

    pub fn transform(&self, x: ArrayView2<f64>) -> Array2<f64> {
        let mut z = x.to_owned();
        for (mut col, (m, s)) in z.columns_mut().into_iter().zip(self.mean.iter().zip(&self.sd)) {
            col.mapv_inplace(|v| (v - m) / s);
        }
        z
    }

    pub fn inverse(&self, z: ArrayView2<f64>) -> Array2<f64> {
        let mut x = z.to_owned();
        for (mut col, (m, s)) in x.columns_mut().into_iter().zip(self.mean.iter().zip(&self.sd)) {
            col.mapv_inplace(|v| v * s + m);
        }
        x
    }

    pub fn len(&self) -> usize {
        self.mean.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mean.is_empty()
    }
}

/// Forward-pass mode. Training mode normalizes with batch statistics and
/// applies dropout drawn from `seed`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train { seed: u64 },
    Eval,
}

/// Provenance of a fitted model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub seed: u64,
    pub epochs: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    pub huber_beta: f64,
    pub initial_test_mse: f64,
    pub final_train_mse: f64,
    pub final_test_mse: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Dense {
    /// `in × out`, so a batch maps as `x · w + b`.
    pub w: Array2<f64>,
    pub b: Array1<f64>,
}

impl Dense {
    fn init(n_in: usize, n_out: usize, rng: &mut ChaCha8Rng) -> Self {
        let k = 1.0 / (n_in as f64).sqrt();
        Dense {
            w: Array2::from_shape_simple_fn((n_in, n_out), || rng.random_range(-k..k)),
            b: Array1::from_shape_simple_fn(n_out, || rng.random_range(-k..k)),
        }
    }

    fn apply(&self, x: ArrayView2<f64>) -> Array2<f64> {
        x.dot(&self.w) + &self.b
    }
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct BatchNorm {
    pub gamma: Array1<f64>,
    pub beta: Array1<f64>,
    pub running_mean: Array1<f64>,
    pub running_var: Array1<f64>,
}

impl BatchNorm {
    fn new(n: usize) -> Self {
        BatchNorm {
            gamma: Array1::ones(n),
            beta: Array1::zeros(n),
            running_mean: Array1::zeros(n),
            running_var: Array1::ones(n),
        }
    }

    /// Normalization with the frozen running statistics.
    fn eval(&self, mut u: Array2<f64>, eps: f64) -> Array2<f64> {
        for (j, mut col) in u.columns_mut().into_iter().enumerate() {
            let scale = self.gamma[j] / (self.running_var[j] + eps).sqrt();
            let (m, b) = (self.running_mean[j], self.beta[j]);
            col.mapv_inplace(|v| (v - m) * scale + b);
        }
        u
    }
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Hidden {
    pub dense: Dense,
    pub bn: BatchNorm,
}

/// Intermediate values of one hidden layer in a training pass.
pub(crate) struct HiddenTape {
    input: Array2<f64>,
    xhat: Array2<f64>,
    inv_std: Array1<f64>,
    act: Array2<f64>,
    mask: Array2<f64>,
    mean: Array1<f64>,
    var: Array1<f64>,
}

pub(crate) struct Tape {
    hidden: Vec<HiddenTape>,
    last: Array2<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    spec: FeatureSpec,
    pub(crate) hidden: Vec<Hidden>,
    pub(crate) output: Dense,
    x_std: Standardizer,
    y_std: Standardizer,
    pub(crate) dropout: f64,
    pub(crate) bn_eps: f64,
    pub(crate) bn_momentum: f64,
    meta: Option<TrainingMeta>,
}

impl MlpModel {
    /// Freshly initialized network with uniform fan-in weights.
    pub fn new(spec: FeatureSpec, x_std: Standardizer, y_std: Standardizer, seed: u64) -> Result<Self> {
        spec.validate()?;
        if x_std.len() != spec.inputs.len() || y_std.len() != spec.outputs.len() {
            return Err(Error::FeatureMismatch("standardizer width does not match the feature spec".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(2);
        let mut width = spec.inputs.len();
        let mut hidden = Vec::with_capacity(HIDDEN_WIDTHS.len());
        for &h in &HIDDEN_WIDTHS {
            hidden.push(Hidden {
                dense: Dense::init(width, h, &mut rng),
                bn: BatchNorm::new(h),
            });
            width = h;
        }
        let output = Dense::init(width, spec.outputs.len(), &mut rng);
        Ok(MlpModel {
            spec,
            hidden,
            output,
            x_std,
            y_std,
            dropout: 0.1,
            bn_eps: 1e-5,
            bn_momentum: 0.1,
            meta: None,
        })
    }

    pub fn spec(&self) -> &FeatureSpec {
        &self.spec
    }

    pub fn meta(&self) -> Option<&TrainingMeta> {
        self.meta.as_ref()
    }

    pub(crate) fn set_meta(&mut self, meta: TrainingMeta) {
        self.meta = Some(meta);
    }

    pub fn input_standardizer(&self) -> &Standardizer {
        &self.x_std
    }

    pub fn output_standardizer(&self) -> &Standardizer {
        &self.y_std
    }

    pub fn widths(&self) -> Vec<usize> {
        let mut w = vec![self.spec.inputs.len()];
        w.extend(self.hidden.iter().map(|h| h.bn.gamma.len()));
        w.push(self.spec.outputs.len());
        w
    }

    pub fn n_params(&self) -> usize {
        self.param_slices().iter().map(|s| s.len()).sum()
    }

    /// Raw features in, raw outputs out.
    pub fn forward(&self, xs: ArrayView2<f64>, mode: Mode) -> Result<Array2<f64>> {
        if xs.ncols() != self.spec.inputs.len() {
            return Err(Error::FeatureMismatch(format!(
                "expected {} input columns, got {}",
                self.spec.inputs.len(),
                xs.ncols()
            )));
        }
        let z = self.x_std.transform(xs);
        let out = match mode {
            Mode::Eval => {
                if self.meta.is_none() {
                    return Err(Error::Unfitted("no running batch-norm statistics".into()));
                }
                self.eval_std(z.view())
            }
            Mode::Train { seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(4);
                let masks = self.dropout_masks(z.nrows(), &mut rng);
                self.train_forward(z.view(), &masks).0
            }
        };
        Ok(self.y_std.inverse(out.view()))
    }

    /// Evaluation-mode prediction for a batch of raw inputs.
    pub fn predict_batch(&self, xs: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.forward(xs, Mode::Eval)
    }

    pub fn predict(&self, x: &[f64]) -> Result<Vec<f64>> {
        let xs = ArrayView2::from_shape((1, x.len()), x).map_err(|e| Error::FeatureMismatch(e.to_string()))?;
        Ok(self.predict_batch(xs)?.row(0).to_vec())
    }

    /// Evaluation pass in standardized units.
    pub(crate) fn eval_std(&self, z: ArrayView2<f64>) -> Array2<f64> {
        let mut a = z.to_owned();
        for h in &self.hidden {
            a = h.bn.eval(h.dense.apply(a.view()), self.bn_eps).mapv(f64::tanh);
        }
        self.output.apply(a.view())
    }

    pub(crate) fn dropout_masks(&self, n: usize, rng: &mut ChaCha8Rng) -> Vec<Array2<f64>> {
        let keep = 1.0 - self.dropout;
        self.hidden
            .iter()
            .map(|h| {
                Array2::from_shape_simple_fn((n, h.bn.gamma.len()), || {
                    if self.dropout > 0.0 && rng.random::<f64>() < self.dropout {
                        0.0
                    } else {
                        1.0 / keep
                    }
                })
            })
            .collect()
    }

    /// Training pass in standardized units with batch statistics and the
    /// given dropout masks.
    pub(crate) fn train_forward(&self, z: ArrayView2<f64>, masks: &[Array2<f64>]) -> (Array2<f64>, Tape) {
        let n = z.nrows() as f64;
        let mut a = z.to_owned();
        let mut tapes = Vec::with_capacity(self.hidden.len());
        for (h, mask) in self.hidden.iter().zip(masks) {
            let u = h.dense.apply(a.view());
            let mean = u.mean_axis(Axis(0)).expect("non-empty batch");
            let centered = &u - &mean;
            let var = centered.mapv(|v| v * v).sum_axis(Axis(0)) / n;
            let inv_std = var.mapv(|v| 1.0 / (v + self.bn_eps).sqrt());
            let xhat = &centered * &inv_std;
            let act = (&xhat * &h.bn.gamma + &h.bn.beta).mapv(f64::tanh);
            let out = &act * mask;
            tapes.push(HiddenTape {
                input: std::mem::replace(&mut a, out),
                xhat,
                inv_std,
                act,
                mask: mask.clone(),
                mean,
                var,
            });
        }
        let y = self.output.apply(a.view());
        (y, Tape { hidden: tapes, last: a })
    }

    /// Parameter gradients given `dout = ∂loss/∂output`, flattened in
    /// [`Self::param_slices`] order.
    pub(crate) fn backward(&self, tape: &Tape, dout: ArrayView2<f64>) -> Vec<Vec<f64>> {
        let n = dout.nrows() as f64;
        let mut grads: Vec<Vec<f64>> = Vec::with_capacity(4 * self.hidden.len() + 2);
        let flat = |a: &Array2<f64>| a.iter().copied().collect::<Vec<f64>>();

        let out_w = tape.last.t().dot(&dout);
        let out_b = dout.sum_axis(Axis(0));
        let mut da = dout.dot(&self.output.w.t());

        let mut rev = Vec::with_capacity(self.hidden.len());
        for (h, t) in self.hidden.iter().zip(&tape.hidden).rev() {
            let dact = &da * &t.mask;
            let dy = &dact * &t.act.mapv(|v| 1.0 - v * v);
            let dgamma = (&dy * &t.xhat).sum_axis(Axis(0));
            let dbeta = dy.sum_axis(Axis(0));
            let dxhat = &dy * &h.bn.gamma;
            let s1 = dxhat.sum_axis(Axis(0));
            let s2 = (&dxhat * &t.xhat).sum_axis(Axis(0));
            let du = (&dxhat * n - &s1 - &(&t.xhat * &s2)) * &(&t.inv_std / n);
            let dw = t.input.t().dot(&du);
            let db = du.sum_axis(Axis(0));
            da = du.dot(&h.dense.w.t());
            rev.push([flat(&dw), db.to_vec(), dgamma.to_vec(), dbeta.to_vec()]);
        }
        for layer in rev.into_iter().rev() {
            grads.extend(layer);
        }
        grads.push(flat(&out_w));
        grads.push(out_b.to_vec());
        grads
    }

    /// Exponential update of the running batch-norm statistics.
    pub(crate) fn update_running(&mut self, tape: &Tape, batch: usize) {
        let m = self.bn_momentum;
        let unbias = if batch > 1 { batch as f64 / (batch as f64 - 1.0) } else { 1.0 };
        for (h, t) in self.hidden.iter_mut().zip(&tape.hidden) {
            h.bn.running_mean = &h.bn.running_mean * (1.0 - m) + &t.mean * m;
            h.bn.running_var = &h.bn.running_var * (1.0 - m) + &t.var * (m * unbias);
        }
    }

    /// Trainable tensors: per hidden layer `w, b, gamma, beta`, then the output `w, b`.
    pub(crate) fn param_slices(&self) -> Vec<&[f64]> {
        let mut v: Vec<&[f64]> = Vec::new();
        for h in &self.hidden {
            v.push(h.dense.w.as_slice().expect("standard layout"));
            v.push(h.dense.b.as_slice().expect("standard layout"));
            v.push(h.bn.gamma.as_slice().expect("standard layout"));
            v.push(h.bn.beta.as_slice().expect("standard layout"));
        }
        v.push(self.output.w.as_slice().expect("standard layout"));
        v.push(self.output.b.as_slice().expect("standard layout"));
        v
    }

    pub(crate) fn param_slices_mut(&mut self) -> Vec<&mut [f64]> {
        let mut v: Vec<&mut [f64]> = Vec::new();
        for h in &mut self.hidden {
            v.push(h.dense.w.as_slice_mut().expect("standard layout"));
            v.push(h.dense.b.as_slice_mut().expect("standard layout"));
            v.push(h.bn.gamma.as_slice_mut().expect("standard layout"));
            v.push(h.bn.beta.as_slice_mut().expect("standard layout"));
        }
        v.push(self.output.w.as_slice_mut().expect("standard layout"));
        v.push(self.output.b.as_slice_mut().expect("standard layout"));
        v
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(&ModelFile::from(self)).expect("model serializes")
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(text)?;
        file.into_model()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json_string()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_str(&text)
    }
}

#[derive(Serialize, Deserialize)]
struct DenseFile {
    shape: [usize; 2],
    weights: Vec<f64>,
    bias: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct HiddenFile {
    dense: DenseFile,
    bn_gamma: Vec<f64>,
    bn_beta: Vec<f64>,
    bn_running_mean: Vec<f64>,
    bn_running_var: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    version: u32,
    feature_spec: FeatureSpec,
    widths: Vec<usize>,
    activation: String,
    dropout: f64,
    bn_eps: f64,
    bn_momentum: f64,
    hidden: Vec<HiddenFile>,
    output: DenseFile,
    input_standardizer: Standardizer,
    output_standardizer: Standardizer,
    training_meta: Option<TrainingMeta>,
}

impl From<&Dense> for DenseFile {
    fn from(d: &Dense) -> Self {
        DenseFile {
            shape: [d.w.nrows(), d.w.ncols()],
            weights: d.w.iter().copied().collect(),
            bias: d.b.to_vec(),
        }
    }
}

impl DenseFile {
    fn into_dense(self, n_in: usize, n_out: usize) -> Result<Dense> {
        if self.shape != [n_in, n_out] || self.bias.len() != n_out {
            return Err(Error::Parse(format!(
                "layer shape {:?} does not match expected [{n_in}, {n_out}]",
                self.shape
            )));
        }
        let w = Array2::from_shape_vec((n_in, n_out), self.weights).map_err(|e| Error::Parse(e.to_string()))?;
        Ok(Dense {
            w,
            b: Array1::from(self.bias),
        })
    }
}

impl From<&MlpModel> for ModelFile {
    fn from(m: &MlpModel) -> Self {
        ModelFile {
            format: MODEL_FORMAT.into(),
            version: MODEL_VERSION,
            feature_spec: m.spec.clone(),
            widths: m.widths(),
            activation: "tanh".into(),
            dropout: m.dropout,
            bn_eps: m.bn_eps,
            bn_momentum: m.bn_momentum,
            hidden: m
                .hidden
                .iter()
                .map(|h| HiddenFile {
                    dense: DenseFile::from(&h.dense),
                    bn_gamma: h.bn.gamma.to_vec(),
                    bn_beta: h.bn.beta.to_vec(),
                    bn_running_mean: h.bn.running_mean.to_vec(),
                    bn_running_var: h.bn.running_var.to_vec(),
                })
                .collect(),
            output: DenseFile::from(&m.output),
            input_standardizer: m.x_std.clone(),
            output_standardizer: m.y_std.clone(),
            training_meta: m.meta.clone(),
        }
    }
}

impl ModelFile {
    fn into_model(self) -> Result<MlpModel> {
        if self.format != MODEL_FORMAT {
            return Err(Error::Parse(format!("not a model file (format '{}')", self.format)));
        }
        if self.version != MODEL_VERSION {
            return Err(Error::Parse(format!("unsupported model version {}", self.version)));
        }
        if self.activation != "tanh" {
            return Err(Error::Parse(format!("unsupported activation '{}'", self.activation)));
        }
        self.feature_spec.validate()?;
        let (n_in, n_out) = (self.feature_spec.inputs.len(), self.feature_spec.outputs.len());
        let mut expected = vec![n_in];
        expected.extend(HIDDEN_WIDTHS);
        expected.push(n_out);
        if self.widths != expected || self.hidden.len() != HIDDEN_WIDTHS.len() {
            return Err(Error::Parse(format!("widths {:?}, expected {expected:?}", self.widths)));
        }
        let widths_ok = |s: &Standardizer, n: usize| s.len() == n && s.sd.len() == n;
        if !widths_ok(&self.input_standardizer, n_in) || !widths_ok(&self.output_standardizer, n_out) {
            return Err(Error::Parse("standardizer width does not match the feature spec".into()));
        }
        let mut hidden = Vec::with_capacity(self.hidden.len());
        for (i, h) in self.hidden.into_iter().enumerate() {
            let w = HIDDEN_WIDTHS[i];
            if [&h.bn_gamma, &h.bn_beta, &h.bn_running_mean, &h.bn_running_var]
                .iter()
                .any(|v| v.len() != w)
            {
                return Err(Error::Parse(format!("batch-norm width mismatch in layer {i}")));
            }
            hidden.push(Hidden {
                dense: h.dense.into_dense(expected[i], w)?,
                bn: BatchNorm {
                    gamma: Array1::from(h.bn_gamma),
                    beta: Array1::from(h.bn_beta),
                    running_mean: Array1::from(h.bn_running_mean),
                    running_var: Array1::from(h.bn_running_var),
                },
            });
        }
        Ok(MlpModel {
            spec: self.feature_spec,
            hidden,
            output: self.output.into_dense(HIDDEN_WIDTHS[HIDDEN_WIDTHS.len() - 1], n_out)?,
            x_std: self.input_standardizer,
            y_std: self.output_standardizer,
            dropout: self.dropout,
            bn_eps: self.bn_eps,
            bn_momentum: self.bn_momentum,
            meta: self.training_meta,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn toy_model() -> MlpModel {
        let spec = FeatureSpec::new(vec![Feature::Hr, Feature::Co], vec![Feature::Sbp]).unwrap();
        let x_std = Standardizer {
            mean: vec![60.0, 5.0],
            sd: vec![8.0, 1.0],
        };
        let y_std = Standardizer {
            mean: vec![120.0],
            sd: vec![15.0],
        };
        MlpModel::new(spec, x_std, y_std, 3).unwrap()
    }

    #[test]
    fn zero_output_layer_predicts_output_mean() {
        let mut m = toy_model();
        m.output.w.fill(0.0);
        m.output.b.fill(0.0);
        m.meta = Some(TrainingMeta {
            seed: 0,
            epochs: 0,
            n_train: 0,
            n_test: 0,
            learning_rate: 0.0,
            weight_decay: 0.0,
            batch_size: 1,
            huber_beta: 1.0,
            initial_test_mse: 0.0,
            final_train_mse: 0.0,
            final_test_mse: 0.0,
        });
        let xs = array![[50.0, 3.0], [70.0, 7.0], [-1e3, 1e3]];
        let y = m.predict_batch(xs.view()).unwrap();
        assert!(y.iter().all(|&v| v == 120.0));
    }

    #[test]
    fn eval_requires_fitted_model() {
        let m = toy_model();
        assert!(matches!(m.predict(&[60.0, 5.0]), Err(Error::Unfitted(_))));
        // training mode only needs batch statistics
        let xs = array![[50.0, 3.0], [70.0, 7.0]];
        assert!(m.forward(xs.view(), Mode::Train { seed: 1 }).is_ok());
    }

    #[test]
    fn wrong_width_rejected() {
        let m = toy_model();
        let xs = array![[1.0, 2.0, 3.0]];
        assert!(matches!(m.forward(xs.view(), Mode::Train { seed: 1 }), Err(Error::FeatureMismatch(_))));
    }

    #[test]
    fn eval_batch_norm_is_affine() {
        let mut bn = BatchNorm::new(3);
        bn.running_mean = array![0.3, -1.0, 2.0];
        bn.running_var = array![2.5, 0.1, 9.0];
        bn.gamma = array![1.7, -0.4, 1.0];
        bn.beta = array![-0.2, 0.0, 3.0];
        let u = array![[0.8, -2.0, 5.0]];
        let v = array![[-1.9, 0.7, 0.1]];
        let alpha = 0.35;
        let mix = &u * alpha + &v * (1.0 - alpha);
        let lhs = bn.eval(mix, 1e-5);
        let rhs = bn.eval(u, 1e-5) * alpha + bn.eval(v, 1e-5) * (1.0 - alpha);
        for (a, b) in lhs.iter().zip(&rhs) {
            assert!((a - b).abs() < 1e-13, "{a} vs {b}");
        }
    }

    #[test]
    fn json_round_trip_is_exact() {
        let m = toy_model();
        let back = MlpModel::from_json_str(&m.to_json_string()).unwrap();
        assert_eq!(m, back);
        assert_eq!(m.widths(), vec![2, 128, 256, 128, 1]);
    }

    #[test]
    fn corrupt_model_file_rejected() {
        let m = toy_model();
        let mut v: serde_json::Value = serde_json::from_str(&m.to_json_string()).unwrap();
        v["widths"][1] = 64.into();
        assert!(MlpModel::from_json_str(&v.to_string()).is_err());
        let mut v: serde_json::Value = serde_json::from_str(&m.to_json_string()).unwrap();
        v["hidden"][0]["bn_gamma"].as_array_mut().unwrap().pop();
        assert!(MlpModel::from_json_str(&v.to_string()).is_err());
        let mut v: serde_json::Value = serde_json::from_str(&m.to_json_string()).unwrap();
        v["format"] = "other".into();
        assert!(MlpModel::from_json_str(&v.to_string()).is_err());
    }

    #[test]
    fn standardizer_rejects_constant_column() {
        let x = array![[1.0, 2.0], [1.0, 3.0], [1.0, 4.0]];
        let err = Standardizer::fit(x.view(), &[Feature::Hr, Feature::Co]).unwrap_err();
        assert!(err.to_string().contains("hr"), "{err}");
    }

    #[test]
    fn standardizer_round_trip() {
        let x = array![[1.0, 250.0], [2.5, 0.9], [7.0, 13.0], [0.2, 4.4]];
        let s = Standardizer::fit(x.view(), &[]).unwrap();
        let z = s.transform(x.view());
        for col in z.columns() {
            assert!(col.mean().unwrap().abs() < 1e-12);
        }
        let back = s.inverse(z.view());
        for (a, b) in x.iter().zip(&back) {
            assert!((a - b).abs() <= 1e-12 * a.abs(), "{a} vs {b}");
        }
    }
}
