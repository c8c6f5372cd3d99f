//! Three cascaded ensemble linear blocks with summed outputs.
//!
//! Parameters live in one flat vector. Each layer stores its weight matrix
//! row-major as `fan_in × fan_out` followed by its bias, so a batch forward
//! step is `Z = A·W + b` with samples as rows.

use ndarray::linalg::general_mat_mul;
use ndarray::{Array2, ArrayView2, ArrayViewMut2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{par, Error, Result};

pub const BLOCKS: usize = 3;
pub const LAYERS_PER_BLOCK: usize = 6;

/// Rows per gradient work unit. Chunk gradients are summed in chunk order,
/// which keeps results identical for any thread count.
pub const CHUNK: usize = 8;

/// Scale on the init bound of each block's output layer. Three summed
/// blocks at full scale start with a loss far above the target variance.
pub const OUTPUT_GAIN: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    #[default]
    Relu,
    Tanh,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            // keeps NaN visible, unlike f64::max
            Activation::Relu => {
                if z < 0.0 {
                    0.0
                } else {
                    z
                }
            }
            Activation::Tanh => z.tanh(),
        }
    }

    /// Derivative expressed through the activation output.
    fn derivative_at(self, a: f64) -> f64 {
        match self {
            Activation::Relu => {
                if a > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - a * a,
        }
    }
}

/// Hidden widths of one block. The widest layer comes first and the rest
/// taper off.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ElbSpec {
    pub hidden: [usize; LAYERS_PER_BLOCK - 1],
    #[serde(default)]
    pub activation: Activation,
}

impl Default for ElbSpec {
    fn default() -> Self {
        Self::with_max_hidden(512)
    }
}

impl ElbSpec {
    /// `max · [1, 3/4, 1/2, 1/4, 1/8]`, so 512 gives 512, 384, 256, 128, 64.
    pub fn with_max_hidden(max: usize) -> Self {
        let h = |num: usize, den: usize| (max * num / den).max(1);
        Self {
            hidden: [h(1, 1), h(3, 4), h(1, 2), h(1, 4), h(1, 8)],
            activation: Activation::Relu,
        }
    }

    pub fn max_hidden(&self) -> usize {
        self.hidden[0]
    }

    pub fn validate(&self) -> Result<()> {
        if self.hidden.contains(&0) {
            return Err(Error::InvalidConfig(format!("hidden widths must be positive, got {:?}", self.hidden)));
        }
        if self.hidden.windows(2).any(|w| w[0] < w[1]) {
            return Err(Error::InvalidConfig(format!(
                "hidden widths must not increase after the first layer, got {:?}",
                self.hidden
            )));
        }
        Ok(())
    }

    /// Seven layer widths from `input` through the hidden layers to `output`.
    pub fn block_dims(&self, input: usize, output: usize) -> [usize; LAYERS_PER_BLOCK + 1] {
        let mut d = [0; LAYERS_PER_BLOCK + 1];
        d[0] = input;
        d[1..LAYERS_PER_BLOCK].copy_from_slice(&self.hidden);
        d[LAYERS_PER_BLOCK] = output;
        d
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Layer {
    fan_in: usize,
    fan_out: usize,
    offset: usize,
}

impl Layer {
    fn weight_len(&self) -> usize {
        self.fan_in * self.fan_out
    }

    fn len(&self) -> usize {
        self.weight_len() + self.fan_out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub input_dim: usize,
    pub output_dim: usize,
    pub spec: ElbSpec,
    /// Sum all three block outputs. When off, only the last block's output
    /// is returned.
    pub residual: bool,
    pub params: Vec<f64>,
    layers: Vec<Layer>,
}

/// Per-layer outputs of one block for one batch; `acts[0]` is the input.
struct BlockTrace {
    acts: Vec<Array2<f64>>,
}

impl BlockTrace {
    fn output(&self) -> &Array2<f64> {
        self.acts.last().expect("block has layers")
    }
}

impl Network {
    /// Zero weights and biases.
    pub fn zeros(input_dim: usize, output_dim: usize, spec: ElbSpec) -> Result<Self> {
        spec.validate()?;
        if input_dim == 0 || output_dim == 0 {
            return Err(Error::InvalidConfig(format!(
                "network dims must be positive, got {input_dim} → {output_dim}"
            )));
        }
        let mut layers = Vec::with_capacity(BLOCKS * LAYERS_PER_BLOCK);
        let mut offset = 0;
        for block in 0..BLOCKS {
            let input = if block == 0 { input_dim } else { output_dim };
            let dims = spec.block_dims(input, output_dim);
            for l in 0..LAYERS_PER_BLOCK {
                let layer = Layer {
                    fan_in: dims[l],
                    fan_out: dims[l + 1],
                    offset,
                };
                offset += layer.len();
                layers.push(layer);
            }
        }
        Ok(Self {
            input_dim,
            output_dim,
            spec,
            residual: true,
            params: vec![0.0; offset],
            layers,
        })
    }

    /// Uniform weights in `±sqrt(k / fan_in)` with `k = 6` ahead of a ReLU and
    /// `k = 3` otherwise, shrunk by [`OUTPUT_GAIN`] on block output layers;
    /// zero biases.
    pub fn new(input_dim: usize, output_dim: usize, spec: ElbSpec, seed: u64) -> Result<Self> {
        let mut net = Self::zeros(input_dim, output_dim, spec)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for (i, layer) in net.layers.clone().into_iter().enumerate() {
            let last = i % LAYERS_PER_BLOCK == LAYERS_PER_BLOCK - 1;
            let k = if !last && spec.activation == Activation::Relu { 6.0 } else { 3.0 };
            let gain = if last { OUTPUT_GAIN } else { 1.0 };
            let bound = gain * (k / layer.fan_in as f64).sqrt();
            for w in &mut net.params[layer.offset..layer.offset + layer.weight_len()] {
                *w = rng.random_range(-bound..=bound);
            }
        }
        Ok(net)
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    /// Widths of every layer in every block, for display.
    pub fn layer_dims(&self) -> Vec<[usize; LAYERS_PER_BLOCK + 1]> {
        (0..BLOCKS)
            .map(|b| {
                let input = if b == 0 { self.input_dim } else { self.output_dim };
                self.spec.block_dims(input, self.output_dim)
            })
            .collect()
    }

    fn layer(&self, block: usize, l: usize) -> Layer {
        self.layers[block * LAYERS_PER_BLOCK + l]
    }

    fn weights(&self, layer: Layer) -> ArrayView2<'_, f64> {
        ArrayView2::from_shape(
            (layer.fan_in, layer.fan_out),
            &self.params[layer.offset..layer.offset + layer.weight_len()],
        )
        .expect("layout matches parameter vector")
    }

    fn bias(&self, layer: Layer) -> &[f64] {
        &self.params[layer.offset + layer.weight_len()..layer.offset + layer.len()]
    }

    fn block_forward(&self, block: usize, input: Array2<f64>) -> BlockTrace {
        let mut acts = Vec::with_capacity(LAYERS_PER_BLOCK + 1);
        acts.push(input);
        for l in 0..LAYERS_PER_BLOCK {
            let layer = self.layer(block, l);
            let mut z = acts[l].dot(&self.weights(layer));
            let bias = self.bias(layer);
            let act = self.spec.activation;
            let hidden = l + 1 < LAYERS_PER_BLOCK;
            for mut row in z.rows_mut() {
                for (v, b) in row.iter_mut().zip(bias) {
                    *v += b;
                    if hidden {
                        *v = act.apply(*v);
                    }
                }
            }
            acts.push(z);
        }
        BlockTrace { acts }
    }

    /// Accumulates parameter gradients of one block given the gradient at its
    /// output. Returns the gradient at its input unless `need_input` is off.
    fn block_backward(&self, block: usize, trace: &BlockTrace, d_out: Array2<f64>, grad: &mut [f64], need_input: bool) -> Option<Array2<f64>> {
        let mut delta = d_out;
        for l in (0..LAYERS_PER_BLOCK).rev() {
            let layer = self.layer(block, l);
            if l + 1 < LAYERS_PER_BLOCK {
                let act = self.spec.activation;
                delta.zip_mut_with(&trace.acts[l + 1], |d, &a| *d *= act.derivative_at(a));
            }
            let (gw, gb) = grad[layer.offset..layer.offset + layer.len()].split_at_mut(layer.weight_len());
            let mut gw = ArrayViewMut2::from_shape((layer.fan_in, layer.fan_out), gw).expect("layout matches gradient vector");
            general_mat_mul(1.0, &trace.acts[l].t(), &delta, 1.0, &mut gw);
            for (g, s) in gb.iter_mut().zip(delta.sum_axis(Axis(0))) {
                *g += s;
            }
            if l > 0 || need_input {
                delta = delta.dot(&self.weights(layer).t());
            }
        }
        need_input.then_some(delta)
    }

    fn check_input(&self, x: &ArrayView2<f64>) -> Result<()> {
        if x.ncols() != self.input_dim {
            return Err(Error::shape(format!("{} input columns", self.input_dim), x.ncols()));
        }
        Ok(())
    }

    fn traces(&self, x: ArrayView2<f64>) -> [BlockTrace; BLOCKS] {
        let t1 = self.block_forward(0, x.to_owned());
        let t2 = self.block_forward(1, t1.output().clone());
        let t3 = self.block_forward(2, t2.output().clone());
        [t1, t2, t3]
    }

    /// Outputs `h₁, h₂, h₃` of the three blocks for a batch of rows.
    pub fn block_outputs(&self, x: ArrayView2<f64>) -> Result<[Array2<f64>; BLOCKS]> {
        self.check_input(&x)?;
        let [t1, t2, t3] = self.traces(x);
        Ok([t1.output().clone(), t2.output().clone(), t3.output().clone()])
    }

    fn combine(&self, traces: &[BlockTrace; BLOCKS]) -> Array2<f64> {
        if self.residual {
            traces[0].output() + traces[1].output() + traces[2].output()
        } else {
            traces[2].output().clone()
        }
    }

    /// Batch forward pass, one sample per row.
    pub fn forward(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check_input(&x)?;
        let n = x.nrows();
        let parts = par::map_range(n.div_ceil(CHUNK), |c| {
            let rows = x.slice(ndarray::s![c * CHUNK..((c + 1) * CHUNK).min(n), ..]);
            self.combine(&self.traces(rows))
        });
        let views: Vec<_> = parts.iter().map(|p| p.view()).collect();
        if views.is_empty() {
            return Ok(Array2::zeros((0, self.output_dim)));
        }
        Ok(ndarray::concatenate(Axis(0), &views).expect("chunks share column count"))
    }

    /// Loss `Σ w²·(out − y)²` of a chunk of rows and its gradient, added into
    /// `grad`.
    fn chunk_gradient(&self, x: ArrayView2<f64>, y: ArrayView2<f64>, w2: ArrayView2<f64>, grad: &mut [f64]) -> f64 {
        let traces = self.traces(x);
        let out = self.combine(&traces);
        let mut loss = 0.0;
        let mut g = Array2::zeros(out.raw_dim());
        ndarray::Zip::from(&mut g)
            .and(&out)
            .and(&y)
            .and(&w2)
            .for_each(|g, &o, &t, &w| {
                let r = o - t;
                loss += w * r * r;
                *g = 2.0 * w * r;
            });
        let [t1, t2, t3] = &traces;
        let d3 = g.clone();
        let back3 = self.block_backward(2, t3, d3, grad, true).expect("input gradient requested");
        let d2 = if self.residual { &g + &back3 } else { back3 };
        let back2 = self.block_backward(1, t2, d2, grad, true).expect("input gradient requested");
        let d1 = if self.residual { &g + &back2 } else { back2 };
        self.block_backward(0, t1, d1, grad, false);
        loss
    }

    fn check_targets(&self, x: &ArrayView2<f64>, y: &ArrayView2<f64>, w2: &ArrayView2<f64>) -> Result<()> {
        self.check_input(x)?;
        let expected = (x.nrows(), self.output_dim);
        for (name, m) in [("targets", y), ("weights", w2)] {
            if m.dim() != expected {
                return Err(Error::shape(format!("{name} of shape {expected:?}"), format!("{:?}", m.dim())));
            }
        }
        Ok(())
    }

    /// Summed loss over the rows of a batch and the gradient of that sum.
    /// `w2` holds squared weights per output entry.
    pub fn loss_and_gradient(&self, x: ArrayView2<f64>, y: ArrayView2<f64>, w2: ArrayView2<f64>) -> Result<(f64, Vec<f64>)> {
        self.check_targets(&x, &y, &w2)?;
        let n = x.nrows();
        if n == 0 {
            return Err(Error::Data("empty batch".into()));
        }
        let parts = par::map_range(n.div_ceil(CHUNK), |c| {
            let r = ndarray::s![c * CHUNK..((c + 1) * CHUNK).min(n), ..];
            let mut grad = vec![0.0; self.params.len()];
            let loss = self.chunk_gradient(x.slice(r), y.slice(r), w2.slice(r), &mut grad);
            (loss, grad)
        });
        let mut parts = parts.into_iter();
        let (mut loss, mut grad) = parts.next().expect("non-empty batch");
        for (l, g) in parts {
            loss += l;
            for (a, b) in grad.iter_mut().zip(&g) {
                *a += b;
            }
        }
        Ok((loss, grad))
    }

    /// Summed loss without gradients.
    pub fn loss(&self, x: ArrayView2<f64>, y: ArrayView2<f64>, w2: ArrayView2<f64>) -> Result<f64> {
        self.check_targets(&x, &y, &w2)?;
        let out = self.forward(x)?;
        let mut loss = 0.0;
        ndarray::Zip::from(&out).and(&y).and(&w2).for_each(|&o, &t, &w| loss += w * (o - t) * (o - t));
        Ok(loss)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;

    fn toy_spec(activation: Activation) -> ElbSpec {
        ElbSpec {
            hidden: [8, 7, 6, 4, 3],
            activation,
        }
    }

    fn toy_batch(rows: usize, input: usize, output: usize, seed: u64) -> (Array2<f64>, Array2<f64>, Array2<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = Array2::from_shape_fn((rows, input), |_| rng.random_range(-1.0..1.0));
        let y = Array2::from_shape_fn((rows, output), |_| rng.random_range(-1.0..1.0));
        let w = Array2::from_shape_fn((rows, output), |_| *[1.0, 1e-2, 0.0, 1.0].get(rng.random_range(0..4)).unwrap());
        (x, y, w.mapv(|w: f64| w * w))
    }

    /// Scalar reference forward pass written without matrices.
    fn naive_blocks(net: &Network, x: &[f64]) -> Vec<Vec<f64>> {
        let mut outs = Vec::new();
        let mut a = x.to_vec();
        for b in 0..BLOCKS {
            for l in 0..LAYERS_PER_BLOCK {
                let layer = net.layer(b, l);
                let mut z = vec![0.0; layer.fan_out];
                for (o, zo) in z.iter_mut().enumerate() {
                    let mut s = net.params[layer.offset + layer.weight_len() + o];
                    for (i, ai) in a.iter().enumerate() {
                        s += ai * net.params[layer.offset + i * layer.fan_out + o];
                    }
                    *zo = if l + 1 < LAYERS_PER_BLOCK { net.spec.activation.apply(s) } else { s };
                }
                a = z;
            }
            outs.push(a.clone());
        }
        outs
    }

    #[test]
    fn default_spec_widths() {
        assert_eq!(ElbSpec::default().hidden, [512, 384, 256, 128, 64]);
        assert_eq!(ElbSpec::with_max_hidden(32).hidden, [32, 24, 16, 8, 4]);
        assert!(ElbSpec { hidden: [4, 8, 2, 2, 1], activation: Activation::Relu }.validate().is_err());
    }

    #[test]
    fn same_seed_same_parameters() {
        let a = Network::new(6, 3, toy_spec(Activation::Relu), 11).unwrap();
        let b = Network::new(6, 3, toy_spec(Activation::Relu), 11).unwrap();
        let c = Network::new(6, 3, toy_spec(Activation::Relu), 12).unwrap();
        assert_eq!(a.params, b.params);
        assert_ne!(a.params, c.params);
    }

    #[test]
    fn zero_network_outputs_zero() {
        let net = Network::zeros(5, 3, toy_spec(Activation::Relu)).unwrap();
        let (x, _, _) = toy_batch(4, 5, 3, 1);
        assert!(net.forward(x.view()).unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn forward_equals_sum_of_naive_blocks() {
        for act in [Activation::Relu, Activation::Tanh] {
            let mut net = Network::new(5, 3, toy_spec(act), 3).unwrap();
            let (x, _, _) = toy_batch(11, 5, 3, 2);
            for residual in [true, false] {
                net.residual = residual;
                let out = net.forward(x.view()).unwrap();
                for r in 0..x.nrows() {
                    let h = naive_blocks(&net, x.row(r).as_slice().unwrap());
                    for o in 0..3 {
                        let expect = if residual { h[0][o] + h[1][o] + h[2][o] } else { h[2][o] };
                        assert!((out[[r, o]] - expect).abs() < 1e-12, "{act:?} residual={residual}");
                    }
                }
            }
        }
    }

    #[test]
    fn zero_loss_weights_give_zero_gradient() {
        let net = Network::new(5, 3, toy_spec(Activation::Relu), 4).unwrap();
        let (x, y, _) = toy_batch(6, 5, 3, 5);
        let (loss, grad) = net.loss_and_gradient(x.view(), y.view(), Array2::zeros((6, 3)).view()).unwrap();
        assert_eq!(loss, 0.0);
        assert!(grad.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn batch_gradient_is_sum_of_single_rows() {
        let net = Network::new(5, 3, toy_spec(Activation::Tanh), 6).unwrap();
        let (x, y, w2) = toy_batch(19, 5, 3, 7);
        let (loss, grad) = net.loss_and_gradient(x.view(), y.view(), w2.view()).unwrap();
        let mut sum_loss = 0.0;
        let mut sum = vec![0.0; grad.len()];
        for r in 0..19 {
            let s = ndarray::s![r..r + 1, ..];
            let (l, g) = net.loss_and_gradient(x.slice(s), y.slice(s), w2.slice(s)).unwrap();
            sum_loss += l;
            sum.iter_mut().zip(&g).for_each(|(a, b)| *a += b);
        }
        assert!((loss - sum_loss).abs() <= 1e-12 * loss.abs().max(1.0));
        for (a, b) in grad.iter().zip(&sum) {
            assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
        }
    }

    #[test]
    fn loss_matches_gradient_pass() {
        let net = Network::new(5, 3, toy_spec(Activation::Relu), 8).unwrap();
        let (x, y, w2) = toy_batch(10, 5, 3, 9);
        let (a, _) = net.loss_and_gradient(x.view(), y.view(), w2.view()).unwrap();
        let b = net.loss(x.view(), y.view(), w2.view()).unwrap();
        assert!((a - b).abs() < 1e-12 * a);
    }

    #[test]
    fn wrong_shapes_rejected() {
        let net = Network::new(5, 3, toy_spec(Activation::Relu), 8).unwrap();
        let (x, y, w2) = toy_batch(4, 4, 3, 9);
        assert!(net.forward(x.view()).is_err());
        assert!(net.loss_and_gradient(x.view(), y.view(), w2.view()).is_err());
    }
}
