//! Dense feed-forward networks with hand-written reverse mode.
//!
//! Every hidden layer applies ReLU; the output layer is either linear or a
//! sigmoid. Inputs are batched row-major: one sample per row.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputActivation {
    Linear,
    Sigmoid,
}

/// One affine layer. `weight` has shape `(out, in)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Dense {
    pub fn zeros(in_dim: usize, out_dim: usize) -> Self {
        Self {
            weight: Array2::zeros((out_dim, in_dim)),
            bias: Array1::zeros(out_dim),
        }
    }

    /// Uniform in `±1/sqrt(fan_in)` for weights and biases alike.
    pub fn fan_in_uniform<R: Rng + ?Sized>(in_dim: usize, out_dim: usize, rng: &mut R) -> Self {
        let limit = 1.0 / (in_dim as f64).sqrt();
        let weight = Array2::from_shape_simple_fn((out_dim, in_dim), || {
            rng.random_range(-limit..limit)
        });
        let bias = Array1::from_shape_simple_fn(out_dim, || rng.random_range(-limit..limit));
        Self { weight, bias }
    }

    pub fn in_dim(&self) -> usize {
        self.weight.ncols()
    }

    pub fn out_dim(&self) -> usize {
        self.weight.nrows()
    }
}

/// Gradients with the same layout as the network parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpGrads {
    pub layers: Vec<Dense>,
}

impl MlpGrads {
    pub fn zeros_like(net: &Mlp) -> Self {
        Self {
            layers: net
                .layers
                .iter()
                .map(|l| Dense::zeros(l.in_dim(), l.out_dim()))
                .collect(),
        }
    }

    /// All gradient entries flattened in parameter order.
    pub fn flatten(&self) -> Vec<f64> {
        flatten_layers(&self.layers)
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weight.iter().chain(l.bias.iter()).all(|v| v.is_finite()))
    }
}

/// Intermediate values of a batched forward pass, needed by `backward`.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// Input to each layer (the network input for layer 0).
    inputs: Vec<Array2<f64>>,
    /// Pre-activations of each hidden layer.
    hidden_pre: Vec<Array2<f64>>,
    output: Array2<f64>,
}

impl ForwardCache {
    pub fn output(&self) -> &Array2<f64> {
        &self.output
    }

    pub fn into_output(self) -> Array2<f64> {
        self.output
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MlpRecord", into = "MlpRecord")]
pub struct Mlp {
    layers: Vec<Dense>,
    output: OutputActivation,
}

impl Mlp {
    /// Two ReLU hidden layers of width `hidden` followed by the output layer.
    pub fn three_layer<R: Rng + ?Sized>(
        in_dim: usize,
        hidden: usize,
        out_dim: usize,
        output: OutputActivation,
        rng: &mut R,
    ) -> Result<Self> {
        if in_dim == 0 || hidden == 0 || out_dim == 0 {
            return Err(Error::config("network dimensions must be positive"));
        }
        let layers = vec![
            Dense::fan_in_uniform(in_dim, hidden, rng),
            Dense::fan_in_uniform(hidden, hidden, rng),
            Dense::fan_in_uniform(hidden, out_dim, rng),
        ];
        Self::from_layers(layers, output)
    }

    pub fn from_layers(layers: Vec<Dense>, output: OutputActivation) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::config("network needs at least one layer"));
        }
        for (i, l) in layers.iter().enumerate() {
            if l.bias.len() != l.out_dim() {
                return Err(Error::config(format!(
                    "layer {i}: bias length {} does not match {} outputs",
                    l.bias.len(),
                    l.out_dim()
                )));
            }
            if l.in_dim() == 0 || l.out_dim() == 0 {
                return Err(Error::config(format!("layer {i} has an empty dimension")));
            }
        }
        for (i, pair) in layers.windows(2).enumerate() {
            if pair[0].out_dim() != pair[1].in_dim() {
                return Err(Error::config(format!(
                    "layer {i} emits {} values but layer {} expects {}",
                    pair[0].out_dim(),
                    i + 1,
                    pair[1].in_dim()
                )));
            }
        }
        let net = Self { layers, output };
        if !net.is_finite() {
            return Err(Error::config("network parameters must be finite"));
        }
        Ok(net)
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Dense] {
        &mut self.layers
    }

    pub fn output_activation(&self) -> OutputActivation {
        self.output
    }

    pub fn in_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn out_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].out_dim()
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(|l| l.weight.len() + l.bias.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weight.iter().chain(l.bias.iter()).all(|v| v.is_finite()))
    }

    pub fn same_shape(&self, other: &Mlp) -> bool {
        self.layers.len() == other.layers.len()
            && self
                .layers
                .iter()
                .zip(&other.layers)
                .all(|(a, b)| a.weight.dim() == b.weight.dim())
    }

    /// Parameters flattened layer by layer: weights row-major, then biases.
    pub fn flatten(&self) -> Vec<f64> {
        flatten_layers(&self.layers)
    }

    /// Overwrites parameters from a vector laid out like [`Mlp::flatten`].
    pub fn set_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.num_params() {
            return Err(Error::config(format!(
                "expected {} parameters, got {}",
                self.num_params(),
                flat.len()
            )));
        }
        let mut it = flat.iter().copied();
        for l in &mut self.layers {
            for w in l.weight.iter_mut().chain(l.bias.iter_mut()) {
                *w = it.next().expect("length checked");
            }
        }
        Ok(())
    }

    /// Single-sample evaluation.
    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        if input.len() != self.in_dim() {
            return Err(Error::config(format!(
                "network expects {} inputs, got {}",
                self.in_dim(),
                input.len()
            )));
        }
        let x = ArrayView2::from_shape((1, input.len()), input).expect("row view");
        Ok(self.forward_batch(x).into_output().into_raw_vec_and_offset().0)
    }

    /// Batched evaluation keeping what `backward` needs.
    ///
    /// Panics if the column count does not match the input layer.
    pub fn forward_batch(&self, input: ArrayView2<f64>) -> ForwardCache {
        assert_eq!(input.ncols(), self.in_dim(), "input width mismatch");
        let last = self.layers.len() - 1;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut hidden_pre = Vec::with_capacity(last);
        let mut x = input.to_owned();
        for (i, layer) in self.layers.iter().enumerate() {
            let mut z = x.dot(&layer.weight.t());
            z += &layer.bias;
            inputs.push(x);
            if i < last {
                let act = z.mapv(relu);
                hidden_pre.push(z);
                x = act;
            } else {
                x = match self.output {
                    OutputActivation::Linear => z,
                    OutputActivation::Sigmoid => z.mapv(sigmoid),
                };
            }
        }
        ForwardCache {
            inputs,
            hidden_pre,
            output: x,
        }
    }

    /// Gradients of `sum(upstream * output)` with respect to every parameter
    /// and to the input.
    pub fn backward(&self, cache: &ForwardCache, upstream: &Array2<f64>) -> (MlpGrads, Array2<f64>) {
        let (grads, input_grad) = self.backprop(cache, upstream, true);
        (grads.expect("parameter gradients requested"), input_grad)
    }

    /// Like [`Mlp::backward`] but only the input gradient; used when the
    /// network is frozen and only serves as a differentiable function.
    pub fn backward_input(&self, cache: &ForwardCache, upstream: &Array2<f64>) -> Array2<f64> {
        self.backprop(cache, upstream, false).1
    }

    fn backprop(
        &self,
        cache: &ForwardCache,
        upstream: &Array2<f64>,
        want_params: bool,
    ) -> (Option<MlpGrads>, Array2<f64>) {
        assert_eq!(upstream.dim(), cache.output.dim(), "upstream shape mismatch");
        let mut delta = match self.output {
            OutputActivation::Linear => upstream.clone(),
            OutputActivation::Sigmoid => upstream * &cache.output.mapv(|y| y * (1.0 - y)),
        };
        let mut layer_grads: Vec<Dense> = Vec::with_capacity(self.layers.len());
        for i in (0..self.layers.len()).rev() {
            let layer = &self.layers[i];
            if want_params {
                layer_grads.push(Dense {
                    weight: delta.t().dot(&cache.inputs[i]),
                    bias: delta.sum_axis(Axis(0)),
                });
            }
            let mut d_in = delta.dot(&layer.weight);
            if i > 0 {
                ndarray::Zip::from(&mut d_in)
                    .and(&cache.hidden_pre[i - 1])
                    .for_each(|d, &z| {
                        if z <= 0.0 {
                            *d = 0.0;
                        }
                    });
            }
            delta = d_in;
        }
        let grads = want_params.then(|| {
            layer_grads.reverse();
            MlpGrads {
                layers: layer_grads,
            }
        });
        (grads, delta)
    }
}

/// Soft target update: `target = (1 - tau) * target + tau * source`.
pub fn polyak_update(target: &mut Mlp, source: &Mlp, tau: f64) {
    assert!(target.same_shape(source), "polyak_update shape mismatch");
    assert!((0.0..=1.0).contains(&tau), "tau must lie in [0, 1]");
    for (t, s) in target.layers.iter_mut().zip(&source.layers) {
        t.weight.zip_mut_with(&s.weight, |a, &b| *a = (1.0 - tau) * *a + tau * b);
        t.bias.zip_mut_with(&s.bias, |a, &b| *a = (1.0 - tau) * *a + tau * b);
    }
}

#[inline]
fn relu(x: f64) -> f64 {
    x.max(0.0)
}

#[inline]
pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn flatten_layers(layers: &[Dense]) -> Vec<f64> {
    layers
        .iter()
        .flat_map(|l| l.weight.iter().chain(l.bias.iter()).copied())
        .collect()
}

#[derive(Serialize, Deserialize)]
struct LayerRecord {
    rows: usize,
    cols: usize,
    weight: Vec<f64>,
    bias: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct MlpRecord {
    output: OutputActivation,
    layers: Vec<LayerRecord>,
}

impl From<Mlp> for MlpRecord {
    fn from(net: Mlp) -> Self {
        MlpRecord {
            output: net.output,
            layers: net
                .layers
                .into_iter()
                .map(|l| LayerRecord {
                    rows: l.out_dim(),
                    cols: l.in_dim(),
                    weight: l.weight.iter().copied().collect(),
                    bias: l.bias.to_vec(),
                })
                .collect(),
        }
    }
}

impl TryFrom<MlpRecord> for Mlp {
    type Error = Error;

    fn try_from(rec: MlpRecord) -> Result<Self> {
        let layers = rec
            .layers
            .into_iter()
            .map(|l| {
                let weight = Array2::from_shape_vec((l.rows, l.cols), l.weight)
                    .map_err(|e| Error::config(format!("bad weight matrix: {e}")))?;
                Ok(Dense {
                    weight,
                    bias: Array1::from(l.bias),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Mlp::from_layers(layers, rec.output)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Straight-line evaluator used as the reference for `forward`.
    fn reference_forward(net: &Mlp, x: &[f64]) -> Vec<f64> {
        let mut cur = x.to_vec();
        let n = net.layers().len();
        for (i, l) in net.layers().iter().enumerate() {
            let mut next = vec![0.0; l.out_dim()];
            for r in 0..l.out_dim() {
                let mut acc = l.bias[r];
                for c in 0..l.in_dim() {
                    acc += l.weight[[r, c]] * cur[c];
                }
                next[r] = if i + 1 < n {
                    if acc > 0.0 {
                        acc
                    } else {
                        0.0
                    }
                } else {
                    match net.output_activation() {
                        OutputActivation::Linear => acc,
                        OutputActivation::Sigmoid => 1.0 / (1.0 + (-acc).exp()),
                    }
                };
            }
            cur = next;
        }
        cur
    }

    #[test]
    fn zero_weights_return_last_bias() {
        let mut layers = vec![Dense::zeros(3, 4), Dense::zeros(4, 4), Dense::zeros(4, 2)];
        layers[2].bias = array![0.7, -1.5];
        let net = Mlp::from_layers(layers, OutputActivation::Linear).unwrap();
        assert_eq!(net.forward(&[1.0, -2.0, 3.0]).unwrap(), vec![0.7, -1.5]);
    }

    #[test]
    fn relu_kills_negative_input() {
        let mut l0 = Dense::zeros(1, 1);
        l0.weight[[0, 0]] = 1.0;
        let mut l1 = Dense::zeros(1, 1);
        l1.weight[[0, 0]] = 1.0;
        let net = Mlp::from_layers(vec![l0, l1], OutputActivation::Linear).unwrap();
        assert_eq!(net.forward(&[-1.0]).unwrap(), vec![0.0]);
        assert_eq!(net.forward(&[2.0]).unwrap(), vec![2.0]);
    }

    #[test]
    fn forward_matches_reference_evaluator() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for output in [OutputActivation::Linear, OutputActivation::Sigmoid] {
            let net = Mlp::three_layer(5, 16, 3, output, &mut rng).unwrap();
            for _ in 0..20 {
                let x: Vec<f64> = (0..5).map(|_| rng.random_range(-2.0..2.0)).collect();
                let got = net.forward(&x).unwrap();
                let want = reference_forward(&net, &x);
                for (g, w) in got.iter().zip(&want) {
                    assert!((g - w).abs() <= 1e-12, "{g} vs {w}");
                }
            }
        }
    }

    #[test]
    fn sigmoid_outputs_in_open_unit_interval() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let net = Mlp::three_layer(2, 8, 1, OutputActivation::Sigmoid, &mut rng).unwrap();
        for x in [-100.0, -1.0, 0.0, 1.0, 100.0] {
            let y = net.forward(&[x, -x]).unwrap()[0];
            assert!(y > 0.0 && y < 1.0);
        }
    }

    #[test]
    fn dimension_mismatch_is_config_error() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let net = Mlp::three_layer(3, 4, 1, OutputActivation::Linear, &mut rng).unwrap();
        assert!(matches!(net.forward(&[1.0]), Err(Error::Config(_))));
        let bad = vec![Dense::zeros(3, 4), Dense::zeros(5, 1)];
        assert!(Mlp::from_layers(bad, OutputActivation::Linear).is_err());
    }

    #[test]
    fn zero_upstream_gives_zero_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let net = Mlp::three_layer(3, 8, 2, OutputActivation::Sigmoid, &mut rng).unwrap();
        let x = array![[0.3, -0.2, 1.0], [0.5, 0.5, -0.5]];
        let cache = net.forward_batch(x.view());
        let (g, dx) = net.backward(&cache, &Array2::zeros((2, 2)));
        assert!(g.flatten().iter().all(|&v| v == 0.0));
        assert!(dx.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn single_linear_layer_gradient_is_input() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let layer = Dense::fan_in_uniform(3, 1, &mut rng);
        let net = Mlp::from_layers(vec![layer], OutputActivation::Linear).unwrap();
        let x = array![[0.25, -1.5, 2.0]];
        let cache = net.forward_batch(x.view());
        let (g, _) = net.backward(&cache, &array![[1.0]]);
        assert_eq!(g.layers[0].weight, array![[0.25, -1.5, 2.0]]);
        assert_eq!(g.layers[0].bias, array![1.0]);
    }

    #[test]
    fn backward_matches_central_differences() {
        let h = 1e-5;
        for seed in 0..5 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for output in [OutputActivation::Linear, OutputActivation::Sigmoid] {
                let net = Mlp::three_layer(4, 8, 2, output, &mut rng).unwrap();
                let x = Array2::from_shape_simple_fn((3, 4), || rng.random_range(-1.0..1.0));
                let up = Array2::from_shape_simple_fn((3, 2), || rng.random_range(-1.0..1.0));
                let objective = |n: &Mlp, x: &Array2<f64>| -> f64 {
                    (n.forward_batch(x.view()).output() * &up).sum()
                };
                let cache = net.forward_batch(x.view());
                let (g, dx) = net.backward(&cache, &up);

                let base = net.flatten();
                let mut numeric = Vec::with_capacity(base.len());
                let mut probe = net.clone();
                for i in 0..base.len() {
                    let mut p = base.clone();
                    p[i] += h;
                    probe.set_flat(&p).unwrap();
                    let fp = objective(&probe, &x);
                    p[i] -= 2.0 * h;
                    probe.set_flat(&p).unwrap();
                    let fm = objective(&probe, &x);
                    numeric.push((fp - fm) / (2.0 * h));
                }
                assert!(rel_err(&g.flatten(), &numeric) <= 1e-4);

                let mut numeric_x = Vec::new();
                for i in 0..x.len() {
                    let mut xp = x.clone();
                    xp.as_slice_mut().unwrap()[i] += h;
                    let mut xm = x.clone();
                    xm.as_slice_mut().unwrap()[i] -= h;
                    numeric_x.push((objective(&net, &xp) - objective(&net, &xm)) / (2.0 * h));
                }
                assert!(rel_err(dx.as_slice().unwrap(), &numeric_x) <= 1e-4);
            }
        }
    }

    fn rel_err(a: &[f64], b: &[f64]) -> f64 {
        let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
        let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
        diff / na.max(nb).max(1e-12)
    }

    #[test]
    fn polyak_limits_and_midpoint() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let src = Mlp::three_layer(2, 4, 1, OutputActivation::Linear, &mut rng).unwrap();
        let tgt = Mlp::three_layer(2, 4, 1, OutputActivation::Linear, &mut rng).unwrap();

        let mut t = tgt.clone();
        polyak_update(&mut t, &src, 1.0);
        assert_eq!(t, src);

        let mut t = tgt.clone();
        polyak_update(&mut t, &src, 0.0);
        assert_eq!(t, tgt);

        let mut zero = tgt.clone();
        zero.set_flat(&vec![0.0; tgt.num_params()]).unwrap();
        let mut two = tgt.clone();
        two.set_flat(&vec![2.0; tgt.num_params()]).unwrap();
        polyak_update(&mut zero, &two, 0.5);
        assert!(zero.flatten().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn json_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let net = Mlp::three_layer(3, 5, 2, OutputActivation::Sigmoid, &mut rng).unwrap();
        let text = serde_json::to_string(&net).unwrap();
        let back: Mlp = serde_json::from_str(&text).unwrap();
        assert_eq!(net, back);
    }

    proptest::proptest! {
        #[test]
        fn polyak_is_a_contraction(tau in 0.0f64..=1.0, seed in 0u64..1000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let src = Mlp::three_layer(2, 3, 1, OutputActivation::Linear, &mut rng).unwrap();
            let tgt = Mlp::three_layer(2, 3, 1, OutputActivation::Linear, &mut rng).unwrap();
            let mut out = tgt.clone();
            polyak_update(&mut out, &src, tau);
            for ((o, t), s) in out.flatten().iter().zip(tgt.flatten()).zip(src.flatten()) {
                let lhs = (o - s).abs();
                let rhs = (1.0 - tau) * (t - s).abs();
                proptest::prop_assert!((lhs - rhs).abs() <= 1e-12);
            }
        }
    }
}
