//! Fully connected networks with hand-derived vector-Jacobian products.
//!
//! Parameter flattening order is layer-major, weights before biases, so
//! gradient vectors are comparable across all gradient engines.

use crate::linalg::{elu_grad_scalar, elu_scalar, tanh_grad_scalar, Tensor};
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Elu,
    Tanh,
    None,
}

impl Activation {
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Elu => elu_scalar(x),
            Activation::Tanh => x.tanh(),
            Activation::None => x,
        }
    }

    fn grad(self, x: f64) -> f64 {
        match self {
            Activation::Elu => elu_grad_scalar(x),
            Activation::Tanh => tanh_grad_scalar(x),
            Activation::None => 1.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Layer {
    pub w: Tensor,
    pub b: Tensor,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MlpParams {
    pub layers: Vec<Layer>,
    pub hidden_activation: Activation,
    pub output_activation: Activation,
}

impl MlpParams {
    /// Seeded init: weights uniform in ±1/√fan_in, biases zero.
    pub fn new(
        dims: &[usize],
        hidden_activation: Activation,
        output_activation: Activation,
        rng: &mut impl Rng,
    ) -> Self {
        assert!(dims.len() >= 2, "need at least input and output dims");
        let layers = dims
            .windows(2)
            .map(|io| {
                let (inp, out) = (io[0], io[1]);
                let bound = 1.0 / (inp as f64).sqrt();
                let w = Tensor::matrix(
                    out,
                    inp,
                    (0..out * inp).map(|_| rng.gen_range(-bound..bound)).collect(),
                );
                Layer { w, b: Tensor::zeros(vec![out]) }
            })
            .collect();
        MlpParams { layers, hidden_activation, output_activation }
    }

    /// Single affine layer with planted weights, no activation.
    pub fn linear(w: Tensor, b: Tensor) -> Self {
        MlpParams {
            layers: vec![Layer { w, b }],
            hidden_activation: Activation::None,
            output_activation: Activation::None,
        }
    }

    pub fn in_dim(&self) -> usize {
        self.layers[0].w.cols()
    }

    pub fn out_dim(&self) -> usize {
        self.layers.last().unwrap().w.rows()
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.w.len() + l.b.len()).sum()
    }

    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for l in &self.layers {
            out.extend_from_slice(&l.w.data);
            out.extend_from_slice(&l.b.data);
        }
        out
    }

    pub fn set_from_flat(&mut self, flat: &[f64]) {
        assert_eq!(flat.len(), self.param_count());
        let mut off = 0;
        for l in &mut self.layers {
            l.w.data.copy_from_slice(&flat[off..off + l.w.len()]);
            off += l.w.len();
            l.b.data.copy_from_slice(&flat[off..off + l.b.len()]);
            off += l.b.len();
        }
    }

    fn activation_for(&self, layer_idx: usize) -> Activation {
        if layer_idx + 1 == self.layers.len() {
            self.output_activation
        } else {
            self.hidden_activation
        }
    }

    pub fn forward(&self, input: &[f64]) -> Vec<f64> {
        assert_eq!(input.len(), self.in_dim(), "mlp input dim mismatch");
        let mut h = input.to_vec();
        for (idx, layer) in self.layers.iter().enumerate() {
            let act = self.activation_for(idx);
            let mut next = layer.b.data.clone();
            for (r, slot) in next.iter_mut().enumerate() {
                let row = &layer.w.data[r * layer.w.cols()..(r + 1) * layer.w.cols()];
                *slot += row.iter().zip(&h).map(|(w, v)| w * v).sum::<f64>();
                *slot = act.apply(*slot);
            }
            h = next;
        }
        h
    }

    /// Reverse-mode pullback of `cotangent` through the network.
    /// Returns (gradient w.r.t. input, gradient w.r.t. flattened params).
    pub fn vjp(&self, input: &[f64], cotangent: &[f64]) -> (Vec<f64>, Vec<f64>) {
        assert_eq!(cotangent.len(), self.out_dim(), "mlp cotangent dim mismatch");
        // Forward pass caching pre-activations and layer inputs.
        let mut inputs: Vec<Vec<f64>> = Vec::with_capacity(self.layers.len());
        let mut pres: Vec<Vec<f64>> = Vec::with_capacity(self.layers.len());
        let mut h = input.to_vec();
        for layer in &self.layers {
            inputs.push(h.clone());
            let mut pre = layer.b.data.clone();
            for (r, slot) in pre.iter_mut().enumerate() {
                let row = &layer.w.data[r * layer.w.cols()..(r + 1) * layer.w.cols()];
                *slot += row.iter().zip(&h).map(|(w, v)| w * v).sum::<f64>();
            }
            let act = self.activation_for(pres.len());
            h = pre.iter().map(|&p| act.apply(p)).collect();
            pres.push(pre);
        }

        // Backward sweep.
        let mut grad_params = vec![0.0; self.param_count()];
        let mut offsets: Vec<usize> = Vec::with_capacity(self.layers.len());
        let mut off = 0;
        for l in &self.layers {
            offsets.push(off);
            off += l.w.len() + l.b.len();
        }

        let mut delta = cotangent.to_vec();
        for (idx, layer) in self.layers.iter().enumerate().rev() {
            let act = self.activation_for(idx);
            for (d, &p) in delta.iter_mut().zip(&pres[idx]) {
                *d *= act.grad(p);
            }
            let base = offsets[idx];
            let cols = layer.w.cols();
            let x = &inputs[idx];
            for (r, &dr) in delta.iter().enumerate() {
                for (c, &xc) in x.iter().enumerate() {
                    grad_params[base + r * cols + c] += dr * xc;
                }
                grad_params[base + layer.w.len() + r] += dr;
            }
            let mut prev = vec![0.0; cols];
            for (r, &dr) in delta.iter().enumerate() {
                let row = &layer.w.data[r * cols..(r + 1) * cols];
                for (c, &wrc) in row.iter().enumerate() {
                    prev[c] += wrc * dr;
                }
            }
            delta = prev;
        }
        (delta, grad_params)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_weights_give_activated_bias() {
        let mut mlp = MlpParams::linear(Tensor::matrix(2, 2, vec![0.0; 4]), Tensor::vector(vec![
            0.5, -0.5,
        ]));
        mlp.output_activation = Activation::Tanh;
        let out = mlp.forward(&[3.0, -7.0]);
        assert!((out[0] - 0.5f64.tanh()).abs() < 1e-15);
        assert!((out[1] - (-0.5f64).tanh()).abs() < 1e-15);
    }

    #[test]
    fn identity_layer_is_passthrough() {
        let mlp = MlpParams::linear(
            Tensor::matrix(3, 3, vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]),
            Tensor::zeros(vec![3]),
        );
        let input = [0.3, -1.2, 4.0];
        assert_eq!(mlp.forward(&input), input.to_vec());
    }

    #[test]
    fn forward_matches_straight_line_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let mlp = MlpParams::new(&[3, 4, 2], Activation::Elu, Activation::None, &mut rng);
        let input = [0.4, -0.9, 1.3];
        // Independent re-evaluation: explicit loops, no shared code path.
        let l0 = &mlp.layers[0];
        let mut h = vec![0.0; 4];
        for r in 0..4 {
            let mut acc = l0.b.data[r];
            for c in 0..3 {
                acc += l0.w.at(r, c) * input[c];
            }
            h[r] = if acc > 0.0 { acc } else { acc.exp() - 1.0 };
        }
        let l1 = &mlp.layers[1];
        let mut expect = vec![0.0; 2];
        for r in 0..2 {
            let mut acc = l1.b.data[r];
            for c in 0..4 {
                acc += l1.w.at(r, c) * h[c];
            }
            expect[r] = acc;
        }
        let got = mlp.forward(&input);
        for (g, e) in got.iter().zip(&expect) {
            assert!((g - e).abs() < 1e-14);
        }
    }

    #[test]
    fn linear_vjp_is_w_transpose() {
        let w = Tensor::matrix(2, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let mlp = MlpParams::linear(w.clone(), Tensor::zeros(vec![2]));
        let cot = [1.0, -1.0];
        let (grad_in, _) = mlp.vjp(&[0.1, 0.2, 0.3], &cot);
        for c in 0..3 {
            let expect = w.at(0, c) * cot[0] + w.at(1, c) * cot[1];
            assert!((grad_in[c] - expect).abs() < 1e-14);
        }
    }

    #[test]
    fn zero_cotangent_gives_zero_grads() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mlp = MlpParams::new(&[2, 5, 2], Activation::Tanh, Activation::None, &mut rng);
        let (gi, gp) = mlp.vjp(&[0.7, -0.2], &[0.0, 0.0]);
        assert!(gi.iter().all(|&x| x == 0.0));
        assert!(gp.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn vjp_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mlp = MlpParams::new(&[3, 6, 2], Activation::Elu, Activation::Tanh, &mut rng);
        let input = [0.3, -0.8, 0.5];
        let cot = [0.9, -0.4];
        let (grad_in, grad_p) = mlp.vjp(&input, &cot);
        let h = 1e-5;
        let scalar = |m: &MlpParams, x: &[f64]| -> f64 {
            m.forward(x).iter().zip(&cot).map(|(o, c)| o * c).sum()
        };
        for i in 0..input.len() {
            let mut xp = input.to_vec();
            let mut xm = input.to_vec();
            xp[i] += h;
            xm[i] -= h;
            let fd = (scalar(&mlp, &xp) - scalar(&mlp, &xm)) / (2.0 * h);
            assert!(
                (fd - grad_in[i]).abs() / fd.abs().max(1e-8) < 1e-6,
                "input grad {i}: fd {fd} vs {}",
                grad_in[i]
            );
        }
        let flat = mlp.flatten();
        for i in 0..flat.len() {
            let mut mp = mlp.clone();
            let mut mm = mlp.clone();
            let mut fp = flat.clone();
            let mut fm = flat.clone();
            fp[i] += h;
            fm[i] -= h;
            mp.set_from_flat(&fp);
            mm.set_from_flat(&fm);
            let fd = (scalar(&mp, &input) - scalar(&mm, &input)) / (2.0 * h);
            assert!(
                (fd - grad_p[i]).abs() / fd.abs().max(1e-8) < 1e-6,
                "param grad {i}: fd {fd} vs {}",
                grad_p[i]
            );
        }
    }

    #[test]
    fn flatten_roundtrip() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mlp = MlpParams::new(&[2, 3, 1], Activation::Elu, Activation::None, &mut rng);
        let flat = mlp.flatten();
        assert_eq!(flat.len(), mlp.param_count());
        assert_eq!(flat.len(), 2 * 3 + 3 + 3 + 1);
        let mut copy = mlp.clone();
        copy.set_from_flat(&flat);
        assert_eq!(copy.flatten(), flat);
    }
}
