use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::AnnError;
use crate::model::Label;

/// Per-feature affine map of inputs onto [-1, 1], fitted on training data.
///
/// Features that are constant in the training data map to 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputScaling {
    pub center: Vec<f64>,
    pub gain: Vec<f64>,
}

impl InputScaling {
    pub fn fit<'a>(rows: impl IntoIterator<Item = &'a [f64]>) -> Option<InputScaling> {
        let mut lo: Vec<f64> = Vec::new();
        let mut hi: Vec<f64> = Vec::new();
        for row in rows {
            if lo.is_empty() {
                lo = row.to_vec();
                hi = row.to_vec();
                continue;
            }
            for ((l, h), v) in lo.iter_mut().zip(hi.iter_mut()).zip(row) {
                *l = l.min(*v);
                *h = h.max(*v);
            }
        }
        if lo.is_empty() {
            return None;
        }
        let center = lo.iter().zip(&hi).map(|(l, h)| 0.5 * (l + h)).collect();
        let gain = lo
            .iter()
            .zip(&hi)
            .map(|(l, h)| if h > l { 2.0 / (h - l) } else { 0.0 })
            .collect();
        Some(InputScaling { center, gain })
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.center.iter().zip(&self.gain))
            .map(|(v, (c, g))| (v - c) * g)
            .collect()
    }
}

/// One-hidden-layer classifier: `softmax(W2 · tanh(W1 · x + b1) + b2)`.
///
/// Parameters live in one flat vector in the order W1 (hidden × in,
/// row-major), b1, W2 (out × hidden, row-major), b2. Gradients use the same
/// order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    in_dim: usize,
    hidden: usize,
    classes: Vec<Label>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    scaling: Option<InputScaling>,
    params: Vec<f64>,
}

fn param_count(in_dim: usize, hidden: usize, out: usize) -> usize {
    hidden * in_dim + hidden + out * hidden + out
}

fn check_dims(in_dim: usize, hidden: usize, classes: &[Label]) -> Result<(), AnnError> {
    if in_dim == 0 || hidden == 0 || classes.is_empty() {
        return Err(AnnError::BadDimensions(format!(
            "in={in_dim} hidden={hidden} out={}",
            classes.len()
        )));
    }
    let mut sorted = classes.to_vec();
    sorted.sort();
    sorted.dedup();
    if sorted.len() != classes.len() {
        return Err(AnnError::BadDimensions("duplicate output classes".into()));
    }
    Ok(())
}

/// Random initial network: weights ~ N(0, 1/fan_in), biases zero.
pub fn mlp_init(
    in_dim: usize,
    hidden: usize,
    classes: Vec<Label>,
    seed: u64,
) -> Result<MlpModel, AnnError> {
    let mut model = MlpModel::zeros(in_dim, hidden, classes)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w1 = Normal::new(0.0, 1.0 / (in_dim as f64).sqrt()).expect("positive sd");
    let w2 = Normal::new(0.0, 1.0 / (hidden as f64).sqrt()).expect("positive sd");
    let l = model.layout();
    for v in &mut model.params[l.w1.clone()] {
        *v = w1.sample(&mut rng);
    }
    for v in &mut model.params[l.w2.clone()] {
        *v = w2.sample(&mut rng);
    }
    Ok(model)
}

#[derive(Debug, Clone)]
pub(crate) struct ParamLayout {
    pub w1: std::ops::Range<usize>,
    pub b1: std::ops::Range<usize>,
    pub w2: std::ops::Range<usize>,
    pub b2: std::ops::Range<usize>,
}

/// Shape of the network without its parameters; evaluates loss and gradient
/// for any flat parameter vector.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Shape {
    pub in_dim: usize,
    pub hidden: usize,
    pub out: usize,
}

/// Inputs (already scaled) and class indices, row-major.
#[derive(Debug, Clone)]
pub(crate) struct Batch {
    pub x: Vec<f64>,
    pub y: Vec<usize>,
    pub dim: usize,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.x[i * self.dim..(i + 1) * self.dim]
    }
}

impl Shape {
    pub fn layout(&self) -> ParamLayout {
        let a = self.hidden * self.in_dim;
        let b = a + self.hidden;
        let c = b + self.out * self.hidden;
        ParamLayout {
            w1: 0..a,
            b1: a..b,
            w2: b..c,
            b2: c..c + self.out,
        }
    }

    /// Hidden activations and output logits for one (scaled) input.
    fn activations(&self, params: &[f64], x: &[f64], h: &mut [f64], z: &mut [f64]) {
        let l = self.layout();
        let w1 = &params[l.w1];
        let b1 = &params[l.b1];
        for (j, hj) in h.iter_mut().enumerate() {
            let row = &w1[j * self.in_dim..(j + 1) * self.in_dim];
            let a: f64 = row.iter().zip(x).map(|(w, v)| w * v).sum();
            *hj = (a + b1[j]).tanh();
        }
        let w2 = &params[l.w2];
        let b2 = &params[l.b2];
        for (k, zk) in z.iter_mut().enumerate() {
            let row = &w2[k * self.hidden..(k + 1) * self.hidden];
            *zk = row.iter().zip(h.iter()).map(|(w, v)| w * v).sum::<f64>() + b2[k];
        }
    }

    pub fn posterior(&self, params: &[f64], x: &[f64]) -> Vec<f64> {
        let mut h = vec![0.0; self.hidden];
        let mut z = vec![0.0; self.out];
        self.activations(params, x, &mut h, &mut z);
        softmax_in_place(&mut z);
        z
    }

    /// Mean cross-entropy over the batch.
    pub fn loss(&self, params: &[f64], batch: &Batch) -> f64 {
        let mut h = vec![0.0; self.hidden];
        let mut z = vec![0.0; self.out];
        let mut total = 0.0;
        for i in 0..batch.len() {
            self.activations(params, batch.row(i), &mut h, &mut z);
            total += log_sum_exp(&z) - z[batch.y[i]];
        }
        total / batch.len() as f64
    }

    /// Mean cross-entropy and its gradient with respect to `params`.
    pub fn loss_and_grad(&self, params: &[f64], batch: &Batch) -> (f64, Vec<f64>) {
        let l = self.layout();
        let mut grad = vec![0.0; params.len()];
        let mut h = vec![0.0; self.hidden];
        let mut z = vec![0.0; self.out];
        let mut dh = vec![0.0; self.hidden];
        let mut total = 0.0;
        let w2 = &params[l.w2.clone()];
        for i in 0..batch.len() {
            let x = batch.row(i);
            let y = batch.y[i];
            self.activations(params, x, &mut h, &mut z);
            let lse = log_sum_exp(&z);
            total += lse - z[y];
            // z becomes dL/dz = softmax - onehot
            for zk in z.iter_mut() {
                *zk = (*zk - lse).exp();
            }
            z[y] -= 1.0;
            dh.iter_mut().for_each(|v| *v = 0.0);
            let (gw1, rest) = grad.split_at_mut(l.b1.start);
            let (gb1, rest) = rest.split_at_mut(self.hidden);
            let (gw2, gb2) = rest.split_at_mut(self.out * self.hidden);
            for (k, dz) in z.iter().enumerate() {
                gb2[k] += dz;
                let grow = &mut gw2[k * self.hidden..(k + 1) * self.hidden];
                let wrow = &w2[k * self.hidden..(k + 1) * self.hidden];
                for j in 0..self.hidden {
                    grow[j] += dz * h[j];
                    dh[j] += dz * wrow[j];
                }
            }
            for j in 0..self.hidden {
                let da = dh[j] * (1.0 - h[j] * h[j]);
                gb1[j] += da;
                if da != 0.0 {
                    let grow = &mut gw1[j * self.in_dim..(j + 1) * self.in_dim];
                    for (g, v) in grow.iter_mut().zip(x) {
                        *g += da * v;
                    }
                }
            }
        }
        let n = batch.len() as f64;
        grad.iter_mut().for_each(|g| *g /= n);
        (total / n, grad)
    }
}

fn log_sum_exp(z: &[f64]) -> f64 {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    m + z.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

fn softmax_in_place(z: &mut [f64]) {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in z.iter_mut() {
        *v = (*v - m).exp();
        sum += *v;
    }
    for v in z.iter_mut() {
        *v /= sum;
    }
}

impl MlpModel {
    /// A network with every weight and bias zero; its posterior is uniform.
    pub fn zeros(in_dim: usize, hidden: usize, classes: Vec<Label>) -> Result<MlpModel, AnnError> {
        check_dims(in_dim, hidden, &classes)?;
        let n = param_count(in_dim, hidden, classes.len());
        Ok(MlpModel {
            in_dim,
            hidden,
            classes,
            scaling: None,
            params: vec![0.0; n],
        })
    }

    /// Builds a model from a flat parameter vector in the documented order.
    pub fn from_params(
        in_dim: usize,
        hidden: usize,
        classes: Vec<Label>,
        params: Vec<f64>,
    ) -> Result<MlpModel, AnnError> {
        check_dims(in_dim, hidden, &classes)?;
        let n = param_count(in_dim, hidden, classes.len());
        if params.len() != n {
            return Err(AnnError::BadDimensions(format!(
                "expected {n} parameters, got {}",
                params.len()
            )));
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(AnnError::BadDimensions("non-finite parameter".into()));
        }
        Ok(MlpModel {
            in_dim,
            hidden,
            classes,
            scaling: None,
            params,
        })
    }

    pub fn with_scaling(mut self, scaling: InputScaling) -> Result<Self, AnnError> {
        if scaling.center.len() != self.in_dim || scaling.gain.len() != self.in_dim {
            return Err(AnnError::DimensionMismatch {
                expected: self.in_dim,
                got: scaling.center.len(),
            });
        }
        self.scaling = Some(scaling);
        Ok(self)
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    pub fn out_dim(&self) -> usize {
        self.classes.len()
    }

    pub fn classes(&self) -> &[Label] {
        &self.classes
    }

    pub fn scaling(&self) -> Option<&InputScaling> {
        self.scaling.as_ref()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub(crate) fn set_params(&mut self, params: Vec<f64>) {
        debug_assert_eq!(params.len(), self.params.len());
        self.params = params;
    }

    pub(crate) fn shape(&self) -> Shape {
        Shape {
            in_dim: self.in_dim,
            hidden: self.hidden,
            out: self.classes.len(),
        }
    }

    pub(crate) fn layout(&self) -> ParamLayout {
        self.shape().layout()
    }

    fn check_input(&self, x: &[f64]) -> Result<(), AnnError> {
        if x.len() != self.in_dim {
            return Err(AnnError::DimensionMismatch {
                expected: self.in_dim,
                got: x.len(),
            });
        }
        Ok(())
    }

    pub(crate) fn scale(&self, x: &[f64]) -> Vec<f64> {
        match &self.scaling {
            Some(s) => s.apply(x),
            None => x.to_vec(),
        }
    }

    pub(crate) fn class_index(&self, label: Label) -> Option<usize> {
        self.classes.iter().position(|c| *c == label)
    }

    /// Builds a scaled training batch from (input, class index) pairs.
    pub(crate) fn batch<'a>(
        &self,
        samples: impl IntoIterator<Item = (&'a [f64], usize)>,
    ) -> Result<Batch, AnnError> {
        let mut x = Vec::new();
        let mut y = Vec::new();
        for (v, c) in samples {
            self.check_input(v)?;
            if c >= self.out_dim() {
                return Err(AnnError::ClassOutOfRange(c));
            }
            x.extend(self.scale(v));
            y.push(c);
        }
        if y.is_empty() {
            return Err(AnnError::EmptyBatch);
        }
        Ok(Batch {
            x,
            y,
            dim: self.in_dim,
        })
    }

    /// Class posterior for one input; entries are positive and sum to 1.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>, AnnError> {
        self.check_input(x)?;
        Ok(self.shape().posterior(&self.params, &self.scale(x)))
    }

    /// Mean cross-entropy over `(input, class index)` pairs and its gradient
    /// in flat parameter order.
    pub fn loss_and_grad(&self, batch: &[(Vec<f64>, usize)]) -> Result<(f64, Vec<f64>), AnnError> {
        let b = self.batch(batch.iter().map(|(x, c)| (x.as_slice(), *c)))?;
        Ok(self.shape().loss_and_grad(&self.params, &b))
    }

    pub fn loss(&self, batch: &[(Vec<f64>, usize)]) -> Result<f64, AnnError> {
        let b = self.batch(batch.iter().map(|(x, c)| (x.as_slice(), *c)))?;
        Ok(self.shape().loss(&self.params, &b))
    }

    /// All classes by descending posterior; equal posteriors keep class order.
    pub fn predict_ranked(&self, x: &[f64]) -> Result<Vec<(Label, f64)>, AnnError> {
        let post = self.forward(x)?;
        let mut ranked: Vec<(Label, f64)> = self.classes.iter().copied().zip(post).collect();
        ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        Ok(ranked)
    }

    pub fn predict(&self, x: &[f64]) -> Result<Label, AnnError> {
        Ok(self.predict_ranked(x)?[0].0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Digit;

    fn digits() -> Vec<Label> {
        Label::all_digits()
    }

    #[test]
    fn init_is_deterministic_and_scaled() {
        let a = mlp_init(150, 20, digits(), 9).unwrap();
        let b = mlp_init(150, 20, digits(), 9).unwrap();
        let c = mlp_init(150, 20, digits(), 10).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        let l = a.layout();
        assert!(a.params()[l.b1].iter().all(|v| *v == 0.0));
        assert!(a.params()[l.b2].iter().all(|v| *v == 0.0));
        let w1 = &a.params()[l.w1];
        let var = w1.iter().map(|v| v * v).sum::<f64>() / w1.len() as f64;
        assert!((var * 150.0 - 1.0).abs() < 0.1, "variance {var}");
    }

    #[test]
    fn bad_dimensions() {
        assert!(matches!(mlp_init(150, 0, digits(), 1), Err(AnnError::BadDimensions(_))));
        assert!(matches!(mlp_init(0, 5, digits(), 1), Err(AnnError::BadDimensions(_))));
        assert!(matches!(mlp_init(3, 5, vec![], 1), Err(AnnError::BadDimensions(_))));
        let dup = vec![Label::Digit(Digit::new(1).unwrap()); 2];
        assert!(matches!(MlpModel::zeros(3, 5, dup), Err(AnnError::BadDimensions(_))));
        assert!(MlpModel::from_params(2, 2, digits(), vec![0.0; 3]).is_err());
    }

    #[test]
    fn zero_model_is_uniform() {
        let m = MlpModel::zeros(150, 7, digits()).unwrap();
        let x: Vec<f64> = (0..150).map(|i| i as f64 * 0.3 - 4.0).collect();
        let p = m.forward(&x).unwrap();
        assert!(p.iter().all(|v| (*v - 0.1).abs() < 1e-15));
        let batch = vec![(x.clone(), 3), (x, 8)];
        let loss = m.loss(&batch).unwrap();
        assert!((loss - 10f64.ln()).abs() < 1e-12);
        let ranked = m.predict_ranked(&vec![0.0; 150]).unwrap();
        let order: Vec<_> = ranked.iter().map(|(l, _)| *l).collect();
        assert_eq!(order, digits());
    }

    #[test]
    fn dimension_checks() {
        let m = MlpModel::zeros(4, 2, digits()).unwrap();
        assert_eq!(
            m.forward(&[1.0]),
            Err(AnnError::DimensionMismatch { expected: 4, got: 1 })
        );
        assert_eq!(m.loss_and_grad(&[]), Err(AnnError::EmptyBatch));
        assert_eq!(
            m.loss_and_grad(&[(vec![0.0; 4], 10)]),
            Err(AnnError::ClassOutOfRange(10))
        );
    }

    #[test]
    fn confident_correct_prediction_has_near_zero_loss() {
        let classes = vec![Label::Digit(Digit::new(0).unwrap()), Label::Digit(Digit::new(1).unwrap())];
        // hidden unit copies the input sign; outputs split on it with large weights
        let params = vec![
            5.0, // W1
            0.0, // b1
            -40.0, 40.0, // W2
            0.0, 0.0, // b2
        ];
        let m = MlpModel::from_params(1, 1, classes, params).unwrap();
        let loss = m.loss(&[(vec![1.0], 1), (vec![-1.0], 0)]).unwrap();
        assert!(loss < 1e-15, "{loss}");
    }

    #[test]
    fn scaling_maps_to_unit_interval() {
        let rows = [vec![0.0, 5.0, 1.0], vec![10.0, 5.0, 3.0]];
        let s = InputScaling::fit(rows.iter().map(|r| r.as_slice())).unwrap();
        assert_eq!(s.apply(&[0.0, 5.0, 1.0]), [-1.0, 0.0, -1.0]);
        assert_eq!(s.apply(&[10.0, 7.0, 2.0]), [1.0, 0.0, 0.0]);
        assert!(InputScaling::fit(std::iter::empty()).is_none());
    }
}
