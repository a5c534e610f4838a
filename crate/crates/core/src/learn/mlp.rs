//! Fully connected networks with hand-written reverse mode. Rows of every batch
//! matrix are samples.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    Elu,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => z.tanh(),
            Activation::Elu => {
                if z > 0.0 {
                    z
                } else {
                    z.exp_m1()
                }
            }
        }
    }

    /// Derivative expressed through the pre-activation `z` and output `a`.
    fn derivative(self, z: f64, a: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - a * a,
            Activation::Elu => {
                if z > 0.0 {
                    1.0
                } else {
                    a + 1.0
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    /// `out × in`.
    pub w: Array2<f64>,
    pub b: Array1<f64>,
}

/// Hidden layers use `activation`; the output layer is linear.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub layers: Vec<Dense>,
    pub activation: Activation,
}

/// Pre- and post-activations of every layer from one forward pass.
#[derive(Debug, Clone)]
pub struct MlpCache {
    input: Array2<f64>,
    pre: Vec<Array2<f64>>,
    post: Vec<Array2<f64>>,
}

/// Gradients with the same shapes as the layers.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpGrads {
    pub layers: Vec<Dense>,
}

impl Mlp {
    /// `sizes` = `[input, hidden..., output]`. Scaled Gaussian init, zero biases; the
    /// output layer is scaled by `out_gain`.
    pub fn new<R: Rng + ?Sized>(sizes: &[usize], activation: Activation, out_gain: f64, rng: &mut R) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(Error::Config(format!("invalid layer sizes {sizes:?}")));
        }
        let n = sizes.len() - 1;
        let layers = sizes
            .windows(2)
            .enumerate()
            .map(|(l, io)| {
                let (fan_in, fan_out) = (io[0], io[1]);
                let gain = if l + 1 == n { out_gain } else { 1.0 };
                let std = gain / (fan_in as f64).sqrt();
                let w = Array2::from_shape_simple_fn((fan_out, fan_in), || {
                    let z: f64 = StandardNormal.sample(rng);
                    z * std
                });
                Dense { w, b: Array1::zeros(fan_out) }
            })
            .collect();
        Ok(Self { layers, activation })
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].w.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map(|l| l.w.nrows()).unwrap_or(0)
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![self.input_dim()];
        s.extend(self.layers.iter().map(|l| l.w.nrows()));
        s
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(|l| l.w.len() + l.b.len()).sum()
    }

    pub fn forward_batch(&self, x: ArrayView2<f64>) -> Result<(Array2<f64>, MlpCache)> {
        if x.ncols() != self.input_dim() {
            return Err(Error::Shape {
                expected: self.input_dim(),
                got: x.ncols(),
            });
        }
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut post: Vec<Array2<f64>> = Vec::with_capacity(self.layers.len());
        let last = self.layers.len() - 1;
        for (l, layer) in self.layers.iter().enumerate() {
            let input = if l == 0 { x.view() } else { post[l - 1].view() };
            let z = input.dot(&layer.w.t()) + &layer.b;
            let a = if l == last { z.clone() } else { z.mapv(|v| self.activation.apply(v)) };
            pre.push(z);
            post.push(a);
        }
        let out = post[last].clone();
        Ok((
            out,
            MlpCache {
                input: x.to_owned(),
                pre,
                post,
            },
        ))
    }

    /// Output only, without keeping the cache.
    pub fn predict(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        if x.ncols() != self.input_dim() {
            return Err(Error::Shape {
                expected: self.input_dim(),
                got: x.ncols(),
            });
        }
        let last = self.layers.len() - 1;
        let mut h = x.to_owned();
        for (l, layer) in self.layers.iter().enumerate() {
            h = h.dot(&layer.w.t()) + &layer.b;
            if l != last {
                h.mapv_inplace(|v| self.activation.apply(v));
            }
        }
        Ok(h)
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        let view = ArrayView2::from_shape((1, x.len()), x).map_err(|_| Error::Shape {
            expected: self.input_dim(),
            got: x.len(),
        })?;
        Ok(self.predict(view)?.into_raw_vec_and_offset().0)
    }

    /// Parameter gradients of `Σ_rows grad_out · output`.
    pub fn backward(&self, cache: &MlpCache, grad_out: ArrayView2<f64>) -> MlpGrads {
        let n = self.layers.len();
        let mut grads: Vec<Dense> = Vec::with_capacity(n);
        let mut g = grad_out.to_owned();
        for l in (0..n).rev() {
            let input = if l == 0 { &cache.input } else { &cache.post[l - 1] };
            let dw = g.t().dot(input);
            let db = g.sum_axis(Axis(0));
            if l > 0 {
                let mut gp = g.dot(&self.layers[l].w);
                ndarray::Zip::from(&mut gp)
                    .and(&cache.pre[l - 1])
                    .and(&cache.post[l - 1])
                    .for_each(|gv, &z, &a| *gv *= self.activation.derivative(z, a));
                g = gp;
            }
            grads.push(Dense { w: dw, b: db });
        }
        grads.reverse();
        MlpGrads { layers: grads }
    }

    /// Mutable flat views of every parameter tensor, in a fixed order.
    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = Vec::with_capacity(2 * self.layers.len());
        for l in &mut self.layers {
            out.push(l.w.as_slice_mut().expect("standard layout"));
            out.push(l.b.as_slice_mut().expect("standard layout"));
        }
        out
    }
}

impl MlpGrads {
    pub fn tensors(&self) -> Vec<&[f64]> {
        let mut out = Vec::with_capacity(2 * self.layers.len());
        for l in &self.layers {
            out.push(l.w.as_slice().expect("standard layout"));
            out.push(l.b.as_slice().expect("standard layout"));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Straight-line loop implementation used as an oracle.
    fn naive_forward(net: &Mlp, x: &[f64]) -> Vec<f64> {
        let mut h = x.to_vec();
        for (l, layer) in net.layers.iter().enumerate() {
            let mut next = vec![0.0; layer.w.nrows()];
            for (o, out) in next.iter_mut().enumerate() {
                let mut s = layer.b[o];
                for (i, hi) in h.iter().enumerate() {
                    s += layer.w[[o, i]] * hi;
                }
                *out = if l + 1 < net.layers.len() {
                    match net.activation {
                        Activation::Tanh => s.tanh(),
                        Activation::Elu => {
                            if s > 0.0 {
                                s
                            } else {
                                s.exp() - 1.0
                            }
                        }
                    }
                } else {
                    s
                };
            }
            h = next;
        }
        h
    }

    #[test]
    fn zero_weights_output_biases() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut net = Mlp::new(&[3, 4, 2], Activation::Tanh, 1.0, &mut rng).unwrap();
        for l in &mut net.layers {
            l.w.fill(0.0);
        }
        net.layers[1].b = array![0.5, -1.5];
        assert_eq!(net.forward(&[1.0, 2.0, 3.0]).unwrap(), vec![0.5, -1.5]);
    }

    #[test]
    fn single_linear_layer_is_affine() {
        let net = Mlp {
            layers: vec![Dense {
                w: array![[1.0, 0.0], [2.0, -1.0]],
                b: array![0.5, 0.0],
            }],
            activation: Activation::Tanh,
        };
        assert_eq!(net.forward(&[3.0, 4.0]).unwrap(), vec![3.5, 2.0]);
        assert!(net.forward(&[1.0]).is_err());
    }

    #[test]
    fn matches_loop_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for act in [Activation::Tanh, Activation::Elu] {
            let net = Mlp::new(&[5, 16, 8, 3], act, 1.0, &mut rng).unwrap();
            let x: Vec<f64> = (0..5).map(|i| (i as f64 - 2.0) * 0.7).collect();
            let got = net.forward(&x).unwrap();
            for (a, b) in got.iter().zip(naive_forward(&net, &x)) {
                assert_abs_diff_eq!(*a, b, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn zero_upstream_gives_zero_grads() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let net = Mlp::new(&[3, 6, 2], Activation::Elu, 1.0, &mut rng).unwrap();
        let x = array![[0.1, 0.2, 0.3], [-1.0, 0.0, 1.0]];
        let (_, cache) = net.forward_batch(x.view()).unwrap();
        let g = net.backward(&cache, Array2::zeros((2, 2)).view());
        assert!(g.tensors().iter().all(|t| t.iter().all(|v| *v == 0.0)));
    }

    #[test]
    fn linear_net_gradient_is_outer_product() {
        let net = Mlp {
            layers: vec![Dense {
                w: array![[0.3, -0.2, 0.1], [1.0, 2.0, 3.0]],
                b: array![0.0, 0.0],
            }],
            activation: Activation::Tanh,
        };
        let x = array![[1.0, 2.0, 3.0]];
        let up = array![[0.5, -2.0]];
        let (_, cache) = net.forward_batch(x.view()).unwrap();
        let g = net.backward(&cache, up.view());
        let outer = up.t().dot(&x);
        assert_eq!(g.layers[0].w, outer);
        assert_eq!(g.layers[0].b, array![0.5, -2.0]);
    }

    /// Central finite differences of `Σ up · f(x)` against `backward`.
    pub(crate) fn max_gradient_rel_error(net: &Mlp, x: &Array2<f64>, up: &Array2<f64>) -> f64 {
        let eps = 1e-5;
        let (_, cache) = net.forward_batch(x.view()).unwrap();
        let analytic = net.backward(&cache, up.view());
        let objective = |n: &Mlp| (n.predict(x.view()).unwrap() * up).sum();
        let mut probe = net.clone();
        let mut worst: f64 = 0.0;
        let analytic_tensors: Vec<Vec<f64>> = analytic.tensors().iter().map(|t| t.to_vec()).collect();
        for (t, grad) in analytic_tensors.iter().enumerate() {
            for k in 0..grad.len() {
                let orig = probe.tensors_mut()[t][k];
                probe.tensors_mut()[t][k] = orig + eps;
                let plus = objective(&probe);
                probe.tensors_mut()[t][k] = orig - eps;
                let minus = objective(&probe);
                probe.tensors_mut()[t][k] = orig;
                let fd = (plus - minus) / (2.0 * eps);
                let err = (fd - grad[k]).abs() / fd.abs().max(grad[k].abs()).max(1e-3);
                worst = worst.max(err);
            }
        }
        worst
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for act in [Activation::Tanh, Activation::Elu] {
            let net = Mlp::new(&[4, 32, 32, 3], act, 1.0, &mut rng).unwrap();
            let x = Array2::from_shape_simple_fn((3, 4), || rng.random_range(-1.0..1.0));
            let up = Array2::from_shape_simple_fn((3, 3), || rng.random_range(-1.0..1.0));
            let err = max_gradient_rel_error(&net, &x, &up);
            assert!(err < 1e-5, "{act:?}: {err}");
        }
    }
}
