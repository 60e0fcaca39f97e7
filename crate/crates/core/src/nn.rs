//! Dense multi-layer perceptrons with exact reverse-mode gradients.
//!
//! Parameters live in one flat `Vec<f64>`. Layer `l` occupies a contiguous
//! block: its weight matrix (`out x in`, row-major) followed by its bias
//! vector. [`GradBuffer`] uses the same layout, so optimizers and Polyak
//! averaging can treat parameters as plain slices.
//!
//! Batched passes store rows contiguously (`batch x dim`). The single-sample
//! [`Mlp::forward`] and [`Mlp::backward`] are the batch path with one row.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::check_dim;
use crate::{Error, Result, Rng};

/// Hidden-layer nonlinearity. The output layer is always affine.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Tanh,
    Identity,
}

impl Activation {
    #[inline]
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Tanh => x.tanh(),
            Activation::Identity => x,
        }
    }

    /// Derivative expressed through the activation's output.
    #[inline]
    fn derivative_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Relu => {
                if y > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - y * y,
            Activation::Identity => 1.0,
        }
    }
}

/// Parameters of one MLP (`MlpParams`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    layer_sizes: Vec<usize>,
    activation: Activation,
    params: Vec<f64>,
}

/// Accumulated partial derivatives, shape-congruent with an [`Mlp`].
#[derive(Debug, Clone, PartialEq)]
pub struct GradBuffer {
    values: Vec<f64>,
}

impl GradBuffer {
    pub fn zeros_like(mlp: &Mlp) -> Self {
        GradBuffer {
            values: vec![0.0; mlp.num_params()],
        }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn fill_zero(&mut self) {
        self.values.iter_mut().for_each(|g| *g = 0.0);
    }

    pub fn scale(&mut self, factor: f64) {
        self.values.iter_mut().for_each(|g| *g *= factor);
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|g| g.is_finite())
    }
}

/// Result of a single-sample backward pass.
#[derive(Debug, Clone)]
pub struct Backward {
    pub params: GradBuffer,
    pub input: Vec<f64>,
}

/// Activations recorded by [`Mlp::forward_batch`], consumed by
/// [`Mlp::backward_batch`].
#[derive(Debug, Clone)]
pub struct ForwardCache {
    batch: usize,
    /// `layers[0]` is the input; `layers[l + 1]` is the post-activation
    /// output of layer `l`.
    layers: Vec<Vec<f64>>,
}

impl ForwardCache {
    pub fn batch(&self) -> usize {
        self.batch
    }

    /// Network output, `batch x out_dim` row-major.
    pub fn output(&self) -> &[f64] {
        self.layers.last().expect("cache always holds the input")
    }

    pub fn input(&self) -> &[f64] {
        &self.layers[0]
    }
}

impl Mlp {
    /// Creates a network with weights and biases drawn from
    /// `U(-1/sqrt(fan_in), 1/sqrt(fan_in))`.
    pub fn new(layer_sizes: &[usize], activation: Activation, rng: &mut Rng) -> Result<Self> {
        let mut mlp = Self::zeros(layer_sizes, activation)?;
        let mut offset = 0;
        for w in layer_sizes.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let bound = 1.0 / (fan_in as f64).sqrt();
            for p in &mut mlp.params[offset..offset + fan_out * (fan_in + 1)] {
                *p = rng.random_range(-bound..bound);
            }
            offset += fan_out * (fan_in + 1);
        }
        Ok(mlp)
    }

    /// All-zero network of the given shape.
    pub fn zeros(layer_sizes: &[usize], activation: Activation) -> Result<Self> {
        if layer_sizes.len() < 2 {
            return Err(Error::Config(format!(
                "an MLP needs at least input and output sizes, got {layer_sizes:?}"
            )));
        }
        if layer_sizes.contains(&0) {
            return Err(Error::Config(format!(
                "layer sizes must be positive, got {layer_sizes:?}"
            )));
        }
        let n = layer_sizes.windows(2).map(|w| w[1] * (w[0] + 1)).sum();
        Ok(Mlp {
            layer_sizes: layer_sizes.to_vec(),
            activation,
            params: vec![0.0; n],
        })
    }

    /// Builds a network from explicit per-layer weights (`out x in`,
    /// row-major) and biases.
    pub fn from_layers(
        layer_sizes: &[usize],
        activation: Activation,
        weights: &[Vec<f64>],
        biases: &[Vec<f64>],
    ) -> Result<Self> {
        let mut mlp = Self::zeros(layer_sizes, activation)?;
        check_dim("from_layers weight count", mlp.num_layers(), weights.len())?;
        check_dim("from_layers bias count", mlp.num_layers(), biases.len())?;
        for l in 0..mlp.num_layers() {
            let (w, b) = mlp.layer_mut(l);
            check_dim("from_layers weights", w.len(), weights[l].len())?;
            check_dim("from_layers biases", b.len(), biases[l].len())?;
            w.copy_from_slice(&weights[l]);
            b.copy_from_slice(&biases[l]);
        }
        if !mlp.is_finite() {
            return Err(Error::NonFinite("MLP parameters"));
        }
        Ok(mlp)
    }

    /// Wraps a flat parameter vector in the layout described at module level.
    pub fn from_flat(layer_sizes: &[usize], activation: Activation, params: Vec<f64>) -> Result<Self> {
        let mut mlp = Self::zeros(layer_sizes, activation)?;
        check_dim("from_flat", mlp.params.len(), params.len())?;
        mlp.params = params;
        if !mlp.is_finite() {
            return Err(Error::NonFinite("MLP parameters"));
        }
        Ok(mlp)
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }

    pub fn num_layers(&self) -> usize {
        self.layer_sizes.len() - 1
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn is_finite(&self) -> bool {
        self.params.iter().all(|p| p.is_finite())
    }

    fn layer_offset(&self, layer: usize) -> usize {
        self.layer_sizes[..=layer]
            .windows(2)
            .take(layer)
            .map(|w| w[1] * (w[0] + 1))
            .sum()
    }

    /// Weight matrix (`out x in`) and bias of one layer.
    pub fn layer(&self, layer: usize) -> (&[f64], &[f64]) {
        let (fan_in, fan_out) = (self.layer_sizes[layer], self.layer_sizes[layer + 1]);
        let start = self.layer_offset(layer);
        let block = &self.params[start..start + fan_out * (fan_in + 1)];
        block.split_at(fan_out * fan_in)
    }

    pub fn layer_mut(&mut self, layer: usize) -> (&mut [f64], &mut [f64]) {
        let (fan_in, fan_out) = (self.layer_sizes[layer], self.layer_sizes[layer + 1]);
        let start = self.layer_offset(layer);
        let block = &mut self.params[start..start + fan_out * (fan_in + 1)];
        block.split_at_mut(fan_out * fan_in)
    }

    /// Single-sample forward pass.
    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        Ok(self.forward_batch(input, 1)?.layers.pop().unwrap())
    }

    /// Single-sample reverse pass: gradients of `<upstream, output>` with
    /// respect to every parameter and to the input.
    pub fn backward(&self, input: &[f64], upstream: &[f64]) -> Result<Backward> {
        let cache = self.forward_batch(input, 1)?;
        let mut params = GradBuffer::zeros_like(self);
        let input = self.backward_batch(&cache, upstream, Some(&mut params))?;
        Ok(Backward { params, input })
    }

    /// Batched forward pass over `batch` rows of `inputs`.
    pub fn forward_batch(&self, inputs: &[f64], batch: usize) -> Result<ForwardCache> {
        check_dim("mlp input", batch * self.input_dim(), inputs.len())?;
        let mut layers = Vec::with_capacity(self.layer_sizes.len());
        layers.push(inputs.to_vec());
        let last = self.num_layers() - 1;
        for l in 0..self.num_layers() {
            let (fan_in, fan_out) = (self.layer_sizes[l], self.layer_sizes[l + 1]);
            let (w, b) = self.layer(l);
            let x = &layers[l];
            let mut y = Vec::with_capacity(batch * fan_out);
            for _ in 0..batch {
                y.extend_from_slice(b);
            }
            // y (B x out) += x (B x in) . w^T (in x out)
            gemm(batch, fan_in, fan_out, 1.0, x, (fan_in, 1), w, (1, fan_in), 1.0, &mut y, fan_out);
            if l != last && self.activation != Activation::Identity {
                let act = self.activation;
                y.iter_mut().for_each(|v| *v = act.apply(*v));
            }
            layers.push(y);
        }
        Ok(ForwardCache { batch, layers })
    }

    /// Batched reverse pass for the objective `sum_rows <upstream_row, output_row>`.
    ///
    /// Parameter gradients are *added* into `grads` when given; pass `None`
    /// when only input gradients are needed. Returns the input gradients,
    /// `batch x in_dim` row-major.
    pub fn backward_batch(
        &self,
        cache: &ForwardCache,
        upstream: &[f64],
        mut grads: Option<&mut GradBuffer>,
    ) -> Result<Vec<f64>> {
        let batch = cache.batch;
        check_dim("mlp upstream", batch * self.output_dim(), upstream.len())?;
        check_dim("mlp cache depth", self.layer_sizes.len(), cache.layers.len())?;
        if let Some(g) = grads.as_deref() {
            check_dim("grad buffer", self.num_params(), g.len())?;
        }
        let mut delta = upstream.to_vec();
        let last = self.num_layers() - 1;
        for l in (0..self.num_layers()).rev() {
            let (fan_in, fan_out) = (self.layer_sizes[l], self.layer_sizes[l + 1]);
            if l != last && self.activation != Activation::Identity {
                let act = self.activation;
                for (d, &y) in delta.iter_mut().zip(&cache.layers[l + 1]) {
                    *d *= act.derivative_from_output(y);
                }
            }
            let x = &cache.layers[l];
            if let Some(g) = grads.as_deref_mut() {
                let start = self.layer_offset(l);
                let block = &mut g.values[start..start + fan_out * (fan_in + 1)];
                let (gw, gb) = block.split_at_mut(fan_out * fan_in);
                // gw (out x in) += delta^T (out x B) . x (B x in)
                gemm(fan_out, batch, fan_in, 1.0, &delta, (1, fan_out), x, (fan_in, 1), 1.0, gw, fan_in);
                for row in delta.chunks_exact(fan_out) {
                    for (acc, d) in gb.iter_mut().zip(row) {
                        *acc += d;
                    }
                }
            }
            let (w, _) = self.layer(l);
            // dx (B x in) = delta (B x out) . w (out x in)
            let mut dx = vec![0.0; batch * fan_in];
            gemm(batch, fan_out, fan_in, 1.0, &delta, (fan_out, 1), w, (fan_in, 1), 0.0, &mut dx, fan_in);
            delta = dx;
        }
        Ok(delta)
    }
}

/// `c (m x n, row stride ldc) = alpha * a (m x k) . b (k x n) + beta * c`,
/// with `a` and `b` addressed through (row stride, column stride) pairs.
#[allow(clippy::too_many_arguments)]
fn gemm(
    m: usize,
    k: usize,
    n: usize,
    alpha: f64,
    a: &[f64],
    a_strides: (usize, usize),
    b: &[f64],
    b_strides: (usize, usize),
    beta: f64,
    c: &mut [f64],
    ldc: usize,
) {
    if m == 0 || n == 0 {
        return;
    }
    assert!(a.len() >= span(m, k, a_strides));
    assert!(b.len() >= span(k, n, b_strides));
    assert!(c.len() >= span(m, n, (ldc, 1)));
    // SAFETY: the asserts above bound every index the kernel touches.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            alpha,
            a.as_ptr(),
            a_strides.0 as isize,
            a_strides.1 as isize,
            b.as_ptr(),
            b_strides.0 as isize,
            b_strides.1 as isize,
            beta,
            c.as_mut_ptr(),
            ldc as isize,
            1,
        );
    }
}

fn span(rows: usize, cols: usize, (rs, cs): (usize, usize)) -> usize {
    if rows == 0 || cols == 0 {
        0
    } else {
        (rows - 1) * rs + (cols - 1) * cs + 1
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeded_rng;

    #[test]
    fn zero_network_outputs_zero() {
        let mlp = Mlp::zeros(&[3, 5, 2], Activation::Relu).unwrap();
        assert_eq!(mlp.forward(&[1.0, -2.0, 0.5]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn affine_scalar_network() {
        let mlp = Mlp::from_layers(&[1, 1], Activation::Identity, &[vec![2.0]], &[vec![1.0]]).unwrap();
        assert_eq!(mlp.forward(&[3.0]).unwrap(), vec![7.0]);
    }

    #[test]
    fn hand_evaluated_relu_network() {
        // hidden = relu([[1, 2], [-1, 0.5]] x + [0.5, 0.25])
        //   at x = [1, -1]: [1 - 2 + 0.5, -1 - 0.5 + 0.25] = [-0.5, -1.25] -> [0, 0]
        // Use a second bias so one unit is active.
        let mlp = Mlp::from_layers(
            &[2, 2, 1],
            Activation::Relu,
            &[vec![1.0, 2.0, -1.0, 0.5], vec![3.0, -2.0]],
            &[vec![1.5, 0.25], vec![0.1]],
        )
        .unwrap();
        // hidden pre = [1 - 2 + 1.5, -1 - 0.5 + 0.25] = [0.5, -1.25] -> [0.5, 0]
        // out = 3 * 0.5 - 2 * 0 + 0.1 = 1.6
        let y = mlp.forward(&[1.0, -1.0]).unwrap();
        assert!((y[0] - 1.6).abs() < 1e-15);
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let mlp = Mlp::zeros(&[3, 2], Activation::Tanh).unwrap();
        assert!(matches!(mlp.forward(&[1.0]), Err(Error::Dimension { .. })));
        assert!(matches!(mlp.backward(&[1.0, 2.0, 3.0], &[1.0]), Err(Error::Dimension { .. })));
    }

    #[test]
    fn zero_upstream_gives_zero_gradients() {
        let mut rng = seeded_rng(3);
        let mlp = Mlp::new(&[3, 4, 2], Activation::Tanh, &mut rng).unwrap();
        let b = mlp.backward(&[0.3, -0.2, 1.0], &[0.0, 0.0]).unwrap();
        assert!(b.params.as_slice().iter().all(|&g| g == 0.0));
        assert!(b.input.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn scalar_chain_rule() {
        let (w, x) = (-1.5, 0.7);
        let mlp = Mlp::from_layers(&[1, 1], Activation::Identity, &[vec![w]], &[vec![0.2]]).unwrap();
        let b = mlp.backward(&[x], &[1.0]).unwrap();
        assert_eq!(b.params.as_slice(), &[x, 1.0]);
        assert_eq!(b.input, vec![w]);
    }

    #[test]
    fn init_respects_fan_in_bound() {
        let mut rng = seeded_rng(0);
        let mlp = Mlp::new(&[16, 4, 1], Activation::Relu, &mut rng).unwrap();
        let (w0, b0) = mlp.layer(0);
        assert!(w0.iter().chain(b0).all(|v| v.abs() <= 0.25));
        let (w1, b1) = mlp.layer(1);
        assert!(w1.iter().chain(b1).all(|v| v.abs() <= 0.5));
    }

    #[test]
    fn batch_rows_match_single_sample_passes() {
        let mut rng = seeded_rng(9);
        let mlp = Mlp::new(&[3, 7, 5, 2], Activation::Relu, &mut rng).unwrap();
        let inputs = [0.1, -0.4, 0.9, 1.2, 0.3, -0.8, -0.5, 0.0, 0.25];
        let upstream = [1.0, -0.5, 0.25, 2.0, -1.0, 0.0];
        let cache = mlp.forward_batch(&inputs, 3).unwrap();
        let mut grads = GradBuffer::zeros_like(&mlp);
        let dx = mlp.backward_batch(&cache, &upstream, Some(&mut grads)).unwrap();
        let mut summed = GradBuffer::zeros_like(&mlp);
        for r in 0..3 {
            let y = mlp.forward(&inputs[3 * r..3 * r + 3]).unwrap();
            for (a, b) in y.iter().zip(&cache.output()[2 * r..2 * r + 2]) {
                assert!((a - b).abs() < 1e-14);
            }
            let b = mlp.backward(&inputs[3 * r..3 * r + 3], &upstream[2 * r..2 * r + 2]).unwrap();
            for (a, b) in b.input.iter().zip(&dx[3 * r..3 * r + 3]) {
                assert!((a - b).abs() < 1e-14);
            }
            for (s, g) in summed.as_mut_slice().iter_mut().zip(b.params.as_slice()) {
                *s += g;
            }
        }
        for (a, b) in summed.as_slice().iter().zip(grads.as_slice()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn from_flat_rejects_non_finite() {
        let n = Mlp::zeros(&[1, 1], Activation::Identity).unwrap().num_params();
        let mut p = vec![0.0; n];
        p[0] = f64::NAN;
        assert!(matches!(
            Mlp::from_flat(&[1, 1], Activation::Identity, p),
            Err(Error::NonFinite(_))
        ));
    }
}
