//! A small fully-connected Q-network: ReLU hidden layers, linear output,
//! hand-rolled forward/backward passes. At ~50k parameters there is nothing
//! to gain from a tensor library.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    rows: usize,
    cols: usize,
    /// Row-major `rows x cols` weight matrix.
    w: Vec<f64>,
    b: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QNetwork {
    layer_sizes: Vec<usize>,
    layers: Vec<Layer>,
}

/// Per-layer activations from a cached forward pass. `post[0]` is the input;
/// `post[i]` is layer `i`'s output after its nonlinearity.
pub struct ForwardCache {
    pub pre: Vec<Vec<f64>>,
    pub post: Vec<Vec<f64>>,
}

/// Gradient accumulator shaped like the network.
#[derive(Debug, Clone)]
pub struct Gradients {
    w: Vec<Vec<f64>>,
    b: Vec<Vec<f64>>,
}

impl Gradients {
    pub fn weight(&self, layer: usize, index: usize) -> f64 {
        self.w[layer][index]
    }

    pub fn bias(&self, layer: usize, index: usize) -> f64 {
        self.b[layer][index]
    }
}

/// Adam state: first and second moment estimates shaped like the network.
#[derive(Debug, Clone)]
pub struct AdamState {
    m: Gradients,
    v: Gradients,
    step: u64,
}

impl AdamState {
    pub fn new(net: &QNetwork) -> Self {
        AdamState {
            m: net.zero_gradients(),
            v: net.zero_gradients(),
            step: 0,
        }
    }

    /// One Adam update with bias correction.
    pub fn apply(
        &mut self,
        net: &mut QNetwork,
        grads: &Gradients,
        lr: f64,
        beta1: f64,
        beta2: f64,
        eps: f64,
    ) {
        self.step += 1;
        let bc1 = 1.0 - beta1.powi(self.step as i32);
        let bc2 = 1.0 - beta2.powi(self.step as i32);
        for li in 0..net.layers.len() {
            let layer = &mut net.layers[li];
            for (idx, g) in grads.w[li].iter().enumerate() {
                let m = &mut self.m.w[li][idx];
                let v = &mut self.v.w[li][idx];
                *m = beta1 * *m + (1.0 - beta1) * g;
                *v = beta2 * *v + (1.0 - beta2) * g * g;
                layer.w[idx] -= lr * (*m / bc1) / ((*v / bc2).sqrt() + eps);
            }
            for (idx, g) in grads.b[li].iter().enumerate() {
                let m = &mut self.m.b[li][idx];
                let v = &mut self.v.b[li][idx];
                *m = beta1 * *m + (1.0 - beta1) * g;
                *v = beta2 * *v + (1.0 - beta2) * g * g;
                layer.b[idx] -= lr * (*m / bc1) / ((*v / bc2).sqrt() + eps);
            }
        }
    }
}

impl QNetwork {
    /// He-uniform initialization over the given sizes `[input, hidden.., output]`.
    pub fn new(layer_sizes: &[usize], rng: &mut impl Rng) -> Result<Self> {
        let mut net = Self::zeros(layer_sizes)?;
        for layer in &mut net.layers {
            let limit = (6.0 / layer.cols as f64).sqrt();
            for w in &mut layer.w {
                *w = rng.random_range(-limit..limit);
            }
        }
        Ok(net)
    }

    pub fn zeros(layer_sizes: &[usize]) -> Result<Self> {
        if layer_sizes.len() < 2 || layer_sizes.iter().any(|&s| s == 0) {
            return Err(Error::Config(format!(
                "invalid layer sizes {layer_sizes:?}"
            )));
        }
        let layers = layer_sizes
            .windows(2)
            .map(|win| Layer {
                rows: win[1],
                cols: win[0],
                w: vec![0.0; win[0] * win[1]],
                b: vec![0.0; win[1]],
            })
            .collect();
        Ok(QNetwork {
            layer_sizes: layer_sizes.to_vec(),
            layers,
        })
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.w.len() + l.b.len()).sum()
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        let cache = self.forward_cached(input)?;
        Ok(cache.post.into_iter().next_back().expect("nonempty"))
    }

    pub fn forward_cached(&self, input: &[f64]) -> Result<ForwardCache> {
        if input.len() != self.input_dim() {
            return Err(Error::Shape {
                expected: self.input_dim(),
                got: input.len(),
            });
        }
        let depth = self.layers.len();
        let mut pre = Vec::with_capacity(depth);
        let mut post = Vec::with_capacity(depth + 1);
        post.push(input.to_vec());
        for (li, layer) in self.layers.iter().enumerate() {
            let x = &post[li];
            let mut z = vec![0.0; layer.rows];
            for (r, out) in z.iter_mut().enumerate() {
                let row = &layer.w[r * layer.cols..(r + 1) * layer.cols];
                let mut acc = layer.b[r];
                for (wi, xi) in row.iter().zip(x.iter()) {
                    acc += wi * xi;
                }
                *out = acc;
            }
            let activated = if li + 1 == depth {
                z.clone()
            } else {
                z.iter().map(|&v| v.max(0.0)).collect()
            };
            pre.push(z);
            post.push(activated);
        }
        Ok(ForwardCache { pre, post })
    }

    pub fn zero_gradients(&self) -> Gradients {
        Gradients {
            w: self.layers.iter().map(|l| vec![0.0; l.w.len()]).collect(),
            b: self.layers.iter().map(|l| vec![0.0; l.b.len()]).collect(),
        }
    }

    /// Accumulates dL/dparams into `grads` for one sample, given dL/d(output).
    pub fn backprop_into(
        &self,
        cache: &ForwardCache,
        dloss_dout: &[f64],
        grads: &mut Gradients,
    ) {
        let depth = self.layers.len();
        let mut delta = dloss_dout.to_vec();
        for li in (0..depth).rev() {
            let layer = &self.layers[li];
            let x = &cache.post[li];
            let gw = &mut grads.w[li];
            for (r, &d) in delta.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                grads.b[li][r] += d;
                let row = &mut gw[r * layer.cols..(r + 1) * layer.cols];
                for (g, xi) in row.iter_mut().zip(x.iter()) {
                    *g += d * xi;
                }
            }
            if li == 0 {
                break;
            }
            let mut prev = vec![0.0; layer.cols];
            for (r, &d) in delta.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                let row = &layer.w[r * layer.cols..(r + 1) * layer.cols];
                for (p, wi) in prev.iter_mut().zip(row.iter()) {
                    *p += d * wi;
                }
            }
            // ReLU gate of the previous hidden layer.
            for (p, &a) in prev.iter_mut().zip(cache.post[li].iter()) {
                if a <= 0.0 {
                    *p = 0.0;
                }
            }
            delta = prev;
        }
    }

    /// One SGD step: `params -= lr * grads`.
    pub fn apply_gradients(&mut self, grads: &Gradients, lr: f64) {
        for (li, layer) in self.layers.iter_mut().enumerate() {
            for (w, g) in layer.w.iter_mut().zip(&grads.w[li]) {
                *w -= lr * g;
            }
            for (b, g) in layer.b.iter_mut().zip(&grads.b[li]) {
                *b -= lr * g;
            }
        }
    }

    /// Flat per-layer weight and bias arrays (checkpoint form).
    pub fn to_arrays(&self) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        (
            self.layers.iter().map(|l| l.w.clone()).collect(),
            self.layers.iter().map(|l| l.b.clone()).collect(),
        )
    }

    pub fn from_arrays(
        layer_sizes: &[usize],
        weights: Vec<Vec<f64>>,
        biases: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let mut net = Self::zeros(layer_sizes)?;
        if weights.len() != net.layers.len() || biases.len() != net.layers.len() {
            return Err(Error::Shape {
                expected: net.layers.len(),
                got: weights.len(),
            });
        }
        for (li, layer) in net.layers.iter_mut().enumerate() {
            if weights[li].len() != layer.w.len() {
                return Err(Error::Shape {
                    expected: layer.w.len(),
                    got: weights[li].len(),
                });
            }
            if biases[li].len() != layer.b.len() {
                return Err(Error::Shape {
                    expected: layer.b.len(),
                    got: biases[li].len(),
                });
            }
            layer.w = weights[li].clone();
            layer.b = biases[li].clone();
        }
        Ok(net)
    }

    /// Mutable access to one layer's `(weights, biases)` for tests and
    /// hand-constructed networks. Weights are row-major `rows x cols`.
    pub fn layer_mut(&mut self, index: usize) -> (&mut [f64], &mut [f64]) {
        let layer = &mut self.layers[index];
        (&mut layer.w, &mut layer.b)
    }

    pub fn layer_dims(&self, index: usize) -> (usize, usize) {
        (self.layers[index].rows, self.layers[index].cols)
    }

    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }
}

/// Huber loss value and derivative with respect to the error.
pub fn huber(err: f64, delta: f64) -> (f64, f64) {
    if err.abs() <= delta {
        (0.5 * err * err, err)
    } else {
        (delta * (err.abs() - 0.5 * delta), delta * err.signum())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_network_outputs_zeros() {
        let net = QNetwork::zeros(&[6, 4, 3]).unwrap();
        let out = net.forward(&[1.0, -2.0, 3.0, 0.5, 0.0, 9.0]).unwrap();
        assert_eq!(out, vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn output_length_matches_last_layer() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let net = QNetwork::new(&[5, 7, 7, 3], &mut rng).unwrap();
        let out = net.forward(&[0.1, 0.2, 0.3, 0.4, 0.5]).unwrap();
        assert_eq!(out.len(), 3);
        assert_eq!(net.param_count(), 5 * 7 + 7 + 7 * 7 + 7 + 7 * 3 + 3);
    }

    #[test]
    fn shape_mismatch_rejected() {
        let net = QNetwork::zeros(&[4, 3]).unwrap();
        assert!(matches!(
            net.forward(&[1.0, 2.0]),
            Err(Error::Shape { expected: 4, got: 2 })
        ));
    }

    #[test]
    fn forward_matches_hand_computation() {
        // 2 -> 2 -> 1 with hand-set weights; ReLU clips the second unit.
        let mut net = QNetwork::zeros(&[2, 2, 1]).unwrap();
        {
            let (w, b) = net.layer_mut(0);
            w.copy_from_slice(&[1.0, 2.0, -1.0, 0.5]); // rows: [1,2], [-1,0.5]
            b.copy_from_slice(&[0.5, 0.0]);
        }
        {
            let (w, b) = net.layer_mut(1);
            w.copy_from_slice(&[3.0, 4.0]);
            b.copy_from_slice(&[-1.0]);
        }
        // x = (1, 1): z1 = (3.5, -0.5) -> a1 = (3.5, 0); out = 3*3.5 - 1 = 9.5
        let out = net.forward(&[1.0, 1.0]).unwrap();
        assert_eq!(out, vec![9.5]);
    }

    #[test]
    fn huber_matches_definition() {
        let (l, d) = huber(0.5, 1.0);
        assert_eq!(l, 0.125);
        assert_eq!(d, 0.5);
        let (l, d) = huber(-3.0, 1.0);
        assert_eq!(l, 2.5);
        assert_eq!(d, -1.0);
        assert!(huber(0.0, 1.0).0 == 0.0);
    }

    /// DERIVED oracle: central finite differences on the scalar Huber loss.
    /// The loss is piecewise smooth (ReLU and Huber kinks); configurations
    /// are resampled until every pre-activation and error term sits at least
    /// a margin away from a kink, where the comparison is valid.
    #[test]
    fn analytic_gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut checked = 0;
        let mut attempts = 0;
        while checked < 10 {
            attempts += 1;
            assert!(attempts < 200, "too many kink rejections");
            let sizes = [4usize, 6, 5, 3];
            let mut net = QNetwork::new(&sizes, &mut rng).unwrap();
            // Nonzero biases move pre-activations off zero.
            for li in 0..net.num_layers() {
                let (_, b) = net.layer_mut(li);
                for v in b.iter_mut() {
                    *v = rng.random_range(-0.5..0.5);
                }
            }
            let input: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
            let action = rng.random_range(0..3usize);
            let target = rng.random_range(-1.5..1.5);
            let delta = 1.0;

            if !smooth_at(&net, &input, action, target, delta, 1e-2) {
                continue;
            }
            checked += 1;

            let loss_of = |net: &QNetwork| -> f64 {
                let q = net.forward(&input).unwrap();
                huber(q[action] - target, delta).0
            };

            // Analytic gradients.
            let cache = net.forward_cached(&input).unwrap();
            let q = cache.post.last().unwrap().clone();
            let (_, dhuber) = huber(q[action] - target, delta);
            let mut dout = vec![0.0; 3];
            dout[action] = dhuber;
            let mut grads = net.zero_gradients();
            net.backprop_into(&cache, &dout, &mut grads);

            for li in 0..net.num_layers() {
                let (rows, cols) = net.layer_dims(li);
                for idx in 0..rows * cols + rows {
                    let eps = 1e-5;
                    let mut plus = net.clone();
                    let mut minus = net.clone();
                    {
                        let (w, b) = plus.layer_mut(li);
                        if idx < rows * cols {
                            w[idx] += eps;
                        } else {
                            b[idx - rows * cols] += eps;
                        }
                    }
                    {
                        let (w, b) = minus.layer_mut(li);
                        if idx < rows * cols {
                            w[idx] -= eps;
                        } else {
                            b[idx - rows * cols] -= eps;
                        }
                    }
                    let numeric = (loss_of(&plus) - loss_of(&minus)) / (2.0 * eps);
                    let analytic = if idx < rows * cols {
                        grads.w[li][idx]
                    } else {
                        grads.b[li][idx - rows * cols]
                    };
                    let scale = analytic.abs().max(numeric.abs()).max(1e-6);
                    assert!(
                        (analytic - numeric).abs() / scale < 1e-4,
                        "layer {li} param {idx}: analytic {analytic} vs numeric {numeric}"
                    );
                }
            }
        }
    }

    /// True when every ReLU pre-activation and the Huber error are at least
    /// `margin` from their kinks for this (net, input) pair.
    pub(crate) fn smooth_at(
        net: &QNetwork,
        input: &[f64],
        action: usize,
        target: f64,
        delta: f64,
        margin: f64,
    ) -> bool {
        let cache = net.forward_cached(input).unwrap();
        let depth = net.num_layers();
        for (li, z) in cache.pre.iter().enumerate() {
            if li + 1 == depth {
                continue;
            }
            if z.iter().any(|v| v.abs() < margin) {
                return false;
            }
        }
        let err = cache.post.last().unwrap()[action] - target;
        (err.abs() - delta).abs() > margin && err.abs() > margin
    }
}
