//! Feed-forward scorer: ReLU hidden layers and a single linear output unit,
//! evaluated on row batches with hand-written backpropagation.

use ndarray::{Array1, Array2, Axis};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    /// in × out
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Dense {
    fn init<R: Rng>(input: usize, output: usize, gain: f64, rng: &mut R) -> Self {
        let normal = Normal::new(0.0, (gain / input as f64).sqrt()).expect("valid std");
        Dense {
            weight: Array2::from_shape_simple_fn((input, output), || normal.sample(rng)),
            bias: Array1::zeros(output),
        }
    }

    fn zeros_like(&self) -> Self {
        Dense { weight: Array2::zeros(self.weight.raw_dim()), bias: Array1::zeros(self.bias.len()) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ffnn {
    pub layers: Vec<Dense>,
}

/// Activations kept for the backward pass: the input followed by each
/// hidden layer's post-ReLU output.
#[derive(Debug, Clone)]
pub struct FfnnCache {
    acts: Vec<Array2<f64>>,
}

impl FfnnCache {
    pub fn input(&self) -> &Array2<f64> {
        &self.acts[0]
    }
}

impl Ffnn {
    pub fn new<R: Rng>(input: usize, hidden: usize, hidden_layers: usize, rng: &mut R) -> Self {
        let mut layers = Vec::with_capacity(hidden_layers + 1);
        let mut width = input;
        for _ in 0..hidden_layers {
            layers.push(Dense::init(width, hidden, 2.0, rng));
            width = hidden;
        }
        layers.push(Dense::init(width, 1, 1.0, rng));
        Ffnn { layers }
    }

    pub fn zeros_like(&self) -> Self {
        Ffnn { layers: self.layers.iter().map(Dense::zeros_like).collect() }
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].weight.nrows()
    }

    /// One score per row of `x`.
    pub fn forward(&self, x: Array2<f64>) -> (Array1<f64>, FfnnCache) {
        let mut acts = vec![x];
        let last = self.layers.len() - 1;
        for layer in &self.layers[..last] {
            let mut z = acts.last().expect("input present").dot(&layer.weight);
            z += &layer.bias;
            z.mapv_inplace(|v| v.max(0.0));
            acts.push(z);
        }
        let out_layer = &self.layers[last];
        let out = acts.last().expect("input present").dot(&out_layer.weight.column(0)) + out_layer.bias[0];
        (out, FfnnCache { acts })
    }

    /// Accumulates parameter gradients into `grad` and returns d(input).
    pub fn backward(&self, cache: &FfnnCache, d_out: &Array1<f64>, grad: &mut Ffnn) -> Array2<f64> {
        let last = self.layers.len() - 1;
        let top = &cache.acts[last];
        grad.layers[last].weight.column_mut(0).scaled_add(1.0, &top.t().dot(d_out));
        grad.layers[last].bias[0] += d_out.sum();
        let w_out = self.layers[last].weight.column(0);
        let mut dz = Array2::from_shape_fn((d_out.len(), w_out.len()), |(r, c)| d_out[r] * w_out[c]);
        for l in (0..last).rev() {
            // relu mask of layer l's output
            dz.zip_mut_with(&cache.acts[l + 1], |g, &a| {
                if a <= 0.0 {
                    *g = 0.0
                }
            });
            let input = &cache.acts[l];
            grad.layers[l].weight.scaled_add(1.0, &input.t().dot(&dz));
            grad.layers[l].bias.scaled_add(1.0, &dz.sum_axis(Axis(0)));
            dz = dz.dot(&self.layers[l].weight.t());
        }
        dz
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_output_layer_gives_bias() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut net = Ffnn::new(4, 5, 2, &mut rng);
        net.layers[2].weight.fill(0.0);
        net.layers[2].bias[0] = 0.25;
        let x = Array2::from_shape_fn((3, 4), |(r, c)| (r + c) as f64);
        let (out, _) = net.forward(x);
        assert!(out.iter().all(|&v| v == 0.25));
    }

    #[test]
    fn backward_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let net = Ffnn::new(3, 4, 2, &mut rng);
        let x = Array2::from_shape_fn((2, 3), |(r, c)| 0.3 * r as f64 - 0.7 * c as f64 + 0.5);
        let weights = Array1::from(vec![1.0, -2.0]);
        let loss = |n: &Ffnn, x: &Array2<f64>| n.forward(x.clone()).0.dot(&weights);
        let (_, cache) = net.forward(x.clone());
        let mut grad = net.zeros_like();
        let dx = net.backward(&cache, &weights, &mut grad);
        let h = 1e-6;
        for l in 0..net.layers.len() {
            for idx in 0..net.layers[l].weight.len() {
                let mut plus = net.clone();
                plus.layers[l].weight.as_slice_mut().unwrap()[idx] += h;
                let mut minus = net.clone();
                minus.layers[l].weight.as_slice_mut().unwrap()[idx] -= h;
                let numeric = (loss(&plus, &x) - loss(&minus, &x)) / (2.0 * h);
                let analytic = grad.layers[l].weight.as_slice().unwrap()[idx];
                assert!((numeric - analytic).abs() < 1e-6, "layer {l} idx {idx}: {numeric} vs {analytic}");
            }
        }
        for idx in 0..x.len() {
            let mut xp = x.clone();
            xp.as_slice_mut().unwrap()[idx] += h;
            let mut xm = x.clone();
            xm.as_slice_mut().unwrap()[idx] -= h;
            let numeric = (loss(&net, &xp) - loss(&net, &xm)) / (2.0 * h);
            assert!((numeric - dx.as_slice().unwrap()[idx]).abs() < 1e-6);
        }
    }
}
