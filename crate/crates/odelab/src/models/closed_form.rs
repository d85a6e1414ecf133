//! Coefficient-style acceleration fields with analytic derivatives.
//!
//! These are the "single linear layer" model family used for system
//! identification: the coefficients are the learnable parameters and
//! recovering them is the point of the experiment.

use serde::{Deserialize, Serialize};

/// External forcing signal sampled from data, linearly interpolated.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub enum Control {
    #[default]
    None,
    Samples {
        times: Vec<f64>,
        values: Vec<f64>,
    },
}

impl Control {
    pub fn eval(&self, t: f64) -> f64 {
        match self {
            Control::None => 0.0,
            Control::Samples { times, values } => {
                if times.is_empty() {
                    return 0.0;
                }
                if t <= times[0] {
                    return values[0];
                }
                if t >= *times.last().unwrap() {
                    return *values.last().unwrap();
                }
                let idx = times.partition_point(|&x| x <= t).min(times.len() - 1);
                let (t0, t1) = (times[idx - 1], times[idx]);
                let (v0, v1) = (values[idx - 1], values[idx]);
                v0 + (v1 - v0) * (t - t0) / (t1 - t0)
            }
        }
    }
}

/// Acceleration templates `f(x, v, t)` linear in their coefficients.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "template", rename_all = "snake_case")]
pub enum ClosedForm {
    /// Per-dimension `f_i = stiffness_i * x_i + damping_i * v_i`.
    LinearOsc { stiffness: Vec<f64>, damping: Vec<f64> },
    /// 1-D Duffing-style circuit model `f = a*v + b*x + c*x^3 + d*u(t)`.
    Duffing { a: f64, b: f64, c: f64, d: f64 },
    /// 1-D forced Van der Pol `f = mu*(1-x^2)*v + k*x + amp*cos(omega_t*t)`;
    /// `omega_t` is structural, not learned.
    VdpForced { mu: f64, k: f64, amp: f64, omega_t: f64 },
    /// Per-dimension affine `f_i = wx_i * x_i + wv_i * v_i + bias_i`.
    CustomAffine { wx: Vec<f64>, wv: Vec<f64>, bias: Vec<f64> },
}

impl ClosedForm {
    pub fn dim(&self) -> usize {
        match self {
            ClosedForm::LinearOsc { stiffness, .. } => stiffness.len(),
            ClosedForm::Duffing { .. } | ClosedForm::VdpForced { .. } => 1,
            ClosedForm::CustomAffine { wx, .. } => wx.len(),
        }
    }

    pub fn param_count(&self) -> usize {
        match self {
            ClosedForm::LinearOsc { stiffness, .. } => 2 * stiffness.len(),
            ClosedForm::Duffing { .. } => 4,
            ClosedForm::VdpForced { .. } => 3,
            ClosedForm::CustomAffine { wx, .. } => 3 * wx.len(),
        }
    }

    pub fn flatten(&self) -> Vec<f64> {
        match self {
            ClosedForm::LinearOsc { stiffness, damping } => {
                stiffness.iter().chain(damping).copied().collect()
            }
            ClosedForm::Duffing { a, b, c, d } => vec![*a, *b, *c, *d],
            ClosedForm::VdpForced { mu, k, amp, .. } => vec![*mu, *k, *amp],
            ClosedForm::CustomAffine { wx, wv, bias } => {
                wx.iter().chain(wv).chain(bias).copied().collect()
            }
        }
    }

    pub fn set_from_flat(&mut self, flat: &[f64]) {
        assert_eq!(flat.len(), self.param_count());
        match self {
            ClosedForm::LinearOsc { stiffness, damping } => {
                let n = stiffness.len();
                stiffness.copy_from_slice(&flat[..n]);
                damping.copy_from_slice(&flat[n..]);
            }
            ClosedForm::Duffing { a, b, c, d } => {
                *a = flat[0];
                *b = flat[1];
                *c = flat[2];
                *d = flat[3];
            }
            ClosedForm::VdpForced { mu, k, amp, .. } => {
                *mu = flat[0];
                *k = flat[1];
                *amp = flat[2];
            }
            ClosedForm::CustomAffine { wx, wv, bias } => {
                let n = wx.len();
                wx.copy_from_slice(&flat[..n]);
                wv.copy_from_slice(&flat[n..2 * n]);
                bias.copy_from_slice(&flat[2 * n..]);
            }
        }
    }

    pub fn eval(&self, t: f64, x: &[f64], v: &[f64], control: &Control) -> Vec<f64> {
        match self {
            ClosedForm::LinearOsc { stiffness, damping } => (0..x.len())
                .map(|i| stiffness[i] * x[i] + damping[i] * v[i])
                .collect(),
            ClosedForm::Duffing { a, b, c, d } => {
                vec![a * v[0] + b * x[0] + c * x[0].powi(3) + d * control.eval(t)]
            }
            ClosedForm::VdpForced { mu, k, amp, omega_t } => {
                vec![mu * (1.0 - x[0] * x[0]) * v[0] + k * x[0] + amp * (omega_t * t).cos()]
            }
            ClosedForm::CustomAffine { wx, wv, bias } => {
                (0..x.len()).map(|i| wx[i] * x[i] + wv[i] * v[i] + bias[i]).collect()
            }
        }
    }

    /// Pullback of `cot` through the field.
    /// Returns (grad_x, grad_v, grad_coefficients).
    pub fn vjp(
        &self,
        t: f64,
        x: &[f64],
        v: &[f64],
        control: &Control,
        cot: &[f64],
    ) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        match self {
            ClosedForm::LinearOsc { stiffness, damping } => {
                let gx: Vec<f64> = (0..x.len()).map(|i| cot[i] * stiffness[i]).collect();
                let gv: Vec<f64> = (0..x.len()).map(|i| cot[i] * damping[i]).collect();
                let mut gp = Vec::with_capacity(2 * x.len());
                gp.extend((0..x.len()).map(|i| cot[i] * x[i]));
                gp.extend((0..x.len()).map(|i| cot[i] * v[i]));
                (gx, gv, gp)
            }
            ClosedForm::Duffing { a, b, c, .. } => {
                let gx = vec![cot[0] * (b + 3.0 * c * x[0] * x[0])];
                let gv = vec![cot[0] * a];
                let gp = vec![
                    cot[0] * v[0],
                    cot[0] * x[0],
                    cot[0] * x[0].powi(3),
                    cot[0] * control.eval(t),
                ];
                (gx, gv, gp)
            }
            ClosedForm::VdpForced { mu, k, omega_t, .. } => {
                let gx = vec![cot[0] * (-2.0 * mu * x[0] * v[0] + k)];
                let gv = vec![cot[0] * mu * (1.0 - x[0] * x[0])];
                let gp = vec![
                    cot[0] * (1.0 - x[0] * x[0]) * v[0],
                    cot[0] * x[0],
                    cot[0] * (omega_t * t).cos(),
                ];
                (gx, gv, gp)
            }
            ClosedForm::CustomAffine { wx, wv, .. } => {
                let gx: Vec<f64> = (0..x.len()).map(|i| cot[i] * wx[i]).collect();
                let gv: Vec<f64> = (0..x.len()).map(|i| cot[i] * wv[i]).collect();
                let mut gp = Vec::with_capacity(3 * x.len());
                gp.extend((0..x.len()).map(|i| cot[i] * x[i]));
                gp.extend((0..x.len()).map(|i| cot[i] * v[i]));
                gp.extend(cot.iter().copied());
                (gx, gv, gp)
            }
        }
    }
}
