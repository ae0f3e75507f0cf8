//! Minimal dense-layer building blocks with hand-rolled gradients.

use rand::Rng;

/// Numerically stable logistic sigmoid.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Fully connected layer with sigmoid activation.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    pub n_in: usize,
    pub n_out: usize,
    /// Row-major `n_out x n_in`.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl DenseLayer {
    pub fn zeros(n_in: usize, n_out: usize) -> Self {
        DenseLayer {
            n_in,
            n_out,
            weights: vec![0.0; n_in * n_out],
            bias: vec![0.0; n_out],
        }
    }

    /// Glorot-uniform weights in ±sqrt(6/(n_in+n_out)), zero bias.
    pub fn glorot(n_in: usize, n_out: usize, rng: &mut impl Rng) -> Self {
        let limit = (6.0 / (n_in + n_out) as f64).sqrt();
        DenseLayer {
            n_in,
            n_out,
            weights: (0..n_in * n_out)
                .map(|_| (rng.gen::<f64>() * 2.0 - 1.0) * limit)
                .collect(),
            bias: vec![0.0; n_out],
        }
    }

    pub fn param_count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }

    /// sigmoid(Wx + b)
    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.n_in);
        (0..self.n_out)
            .map(|i| {
                let row = &self.weights[i * self.n_in..(i + 1) * self.n_in];
                let z = row.iter().zip(x).map(|(w, xi)| w * xi).sum::<f64>() + self.bias[i];
                sigmoid(z)
            })
            .collect()
    }

    /// Accumulates weight/bias gradients into `grads` and returns d_input.
    /// `out` must be the activation produced by `forward(x)`.
    pub fn backward(
        &self,
        x: &[f64],
        out: &[f64],
        d_out: &[f64],
        grads: &mut DenseGrads,
    ) -> Vec<f64> {
        debug_assert_eq!(d_out.len(), self.n_out);
        let mut d_x = vec![0.0; self.n_in];
        for i in 0..self.n_out {
            // sigmoid'(z) expressed through the activation itself
            let delta = d_out[i] * out[i] * (1.0 - out[i]);
            grads.bias[i] += delta;
            let row = &self.weights[i * self.n_in..(i + 1) * self.n_in];
            let grow = &mut grads.weights[i * self.n_in..(i + 1) * self.n_in];
            for j in 0..self.n_in {
                grow[j] += delta * x[j];
                d_x[j] += delta * row[j];
            }
        }
        d_x
    }
}

/// Gradient accumulator shaped like a [`DenseLayer`].
#[derive(Debug, Clone, PartialEq)]
pub struct DenseGrads {
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl DenseGrads {
    pub fn zeros_like(layer: &DenseLayer) -> Self {
        DenseGrads {
            weights: vec![0.0; layer.weights.len()],
            bias: vec![0.0; layer.bias.len()],
        }
    }

    pub fn add_assign(&mut self, other: &DenseGrads) {
        for (a, b) in self.weights.iter_mut().zip(&other.weights) {
            *a += b;
        }
        for (a, b) in self.bias.iter_mut().zip(&other.bias) {
            *a += b;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn sigmoid_basics() {
        assert!((sigmoid(0.0) - 0.5).abs() < 1e-15);
        assert!(sigmoid(40.0) <= 1.0 && sigmoid(40.0) > 0.999_999);
        assert!(sigmoid(-40.0) > 0.0 && sigmoid(-40.0) < 1e-6);
        assert!(sigmoid(-800.0).is_finite());
        assert!(sigmoid(800.0).is_finite());
    }

    #[test]
    fn zero_layer_outputs_half() {
        let layer = DenseLayer::zeros(3, 2);
        let out = layer.forward(&[0.3, -0.7, 2.0]);
        assert_eq!(out, vec![0.5, 0.5]);
    }

    #[test]
    fn backward_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let layer = DenseLayer::glorot(4, 3, &mut rng);
        let x: Vec<f64> = (0..4).map(|i| 0.3 * i as f64 - 0.5).collect();
        let d_out = [0.7, -1.1, 0.4];

        let out = layer.forward(&x);
        let mut grads = DenseGrads::zeros_like(&layer);
        let d_x = layer.backward(&x, &out, &d_out, &mut grads);

        let scalar = |l: &DenseLayer, x: &[f64]| -> f64 {
            l.forward(x).iter().zip(&d_out).map(|(o, d)| o * d).sum()
        };
        let h = 1e-6;
        for idx in 0..layer.weights.len() {
            let mut lp = layer.clone();
            lp.weights[idx] += h;
            let mut lm = layer.clone();
            lm.weights[idx] -= h;
            let fd = (scalar(&lp, &x) - scalar(&lm, &x)) / (2.0 * h);
            assert!((fd - grads.weights[idx]).abs() < 1e-8);
        }
        for j in 0..x.len() {
            let mut xp = x.clone();
            xp[j] += h;
            let mut xm = x.clone();
            xm[j] -= h;
            let fd = (scalar(&layer, &xp) - scalar(&layer, &xm)) / (2.0 * h);
            assert!((fd - d_x[j]).abs() < 1e-8);
        }
    }

    #[test]
    fn glorot_is_seed_deterministic_and_bounded() {
        let mut r1 = ChaCha8Rng::seed_from_u64(9);
        let mut r2 = ChaCha8Rng::seed_from_u64(9);
        let a = DenseLayer::glorot(5, 7, &mut r1);
        let b = DenseLayer::glorot(5, 7, &mut r2);
        assert_eq!(a, b);
        let limit = (6.0 / 12.0f64).sqrt();
        assert!(a.weights.iter().all(|w| w.abs() <= limit));
        assert!(a.bias.iter().all(|&b| b == 0.0));
    }
}
