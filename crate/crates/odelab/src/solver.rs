//! Fixed-step and adaptive explicit Runge–Kutta integration with NFE
//! instrumentation and dense output at requested timestamps.
//!
//! Backward spans (t1 < t0) are handled by an internal time negation so
//! the same steppers serve forward solves and adjoint sweeps.

use crate::linalg::Tensor;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("solver failed to converge: {0}")]
    NonConvergence(String),
    #[error("numerical instability: {0}")]
    Instability(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Rk4,
    Dopri5,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SolverConfig {
    pub method: Method,
    pub rtol: f64,
    pub atol: f64,
    /// Initial step for dopri5; target step for rk4 (N = ceil(span/h_init)).
    pub h_init: f64,
    pub h_min: f64,
    pub max_steps: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            method: Method::Dopri5,
            rtol: 1e-6,
            atol: 1e-6,
            h_init: 0.1,
            h_min: 1e-12,
            max_steps: 100_000,
        }
    }
}

impl SolverConfig {
    /// Tight tolerances for ground-truth generation and gradient checks.
    pub fn strict() -> Self {
        SolverConfig { rtol: 1e-9, atol: 1e-9, ..Default::default() }
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.rtol = tol;
        self.atol = tol;
        self
    }

    pub fn rk4(n_steps_hint: f64) -> Self {
        SolverConfig { method: Method::Rk4, h_init: n_steps_hint, ..Default::default() }
    }
}

/// Ordered (time, state) samples plus a count of vector-field evaluations.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Tensor>,
    pub nfe: usize,
}

impl Trajectory {
    pub fn state(&self, i: usize) -> &[f64] {
        &self.states[i].data
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

pub type Field<'a> = &'a mut dyn FnMut(f64, &[f64]) -> Vec<f64>;

/// Integrate `ż = field(t, z)` from `t0` to `t1` (either direction).
/// Returns the terminal state and the number of field evaluations.
pub fn integrate(
    field: Field,
    z0: &[f64],
    t0: f64,
    t1: f64,
    cfg: &SolverConfig,
) -> Result<(Vec<f64>, usize), SolverError> {
    integrate_with_observer(field, z0, t0, t1, cfg, &mut None)
}

/// Observer fires at every accepted dopri5 step with (t, h, err_norm);
/// used by tests to check the error-control contract.
pub type StepObserver<'a> = Option<&'a mut dyn FnMut(f64, f64, f64)>;

pub fn integrate_with_observer(
    field: Field,
    z0: &[f64],
    t0: f64,
    t1: f64,
    cfg: &SolverConfig,
    observer: &mut StepObserver,
) -> Result<(Vec<f64>, usize), SolverError> {
    if t0 == t1 {
        return Ok((z0.to_vec(), 0));
    }
    if t1 > t0 {
        return integrate_ascending(field, z0, t0, t1, cfg, observer);
    }
    // Negate time: w(τ) = z(-τ) runs forward on [-t0, -t1].
    let mut flipped = |tau: f64, z: &[f64]| -> Vec<f64> {
        field(-tau, z).iter().map(|v| -v).collect()
    };
    integrate_ascending(&mut flipped, z0, -t0, -t1, cfg, observer)
}

fn check_finite(dz: &[f64], t: f64) -> Result<(), SolverError> {
    if dz.iter().any(|v| !v.is_finite()) {
        return Err(SolverError::Instability(format!("non-finite field output at t={t}")));
    }
    Ok(())
}

fn integrate_ascending(
    field: Field,
    z0: &[f64],
    t0: f64,
    t1: f64,
    cfg: &SolverConfig,
    observer: &mut StepObserver,
) -> Result<(Vec<f64>, usize), SolverError> {
    match cfg.method {
        Method::Rk4 => rk4_span(field, z0, t0, t1, cfg),
        Method::Dopri5 => dopri5_span(field, z0, t0, t1, cfg, observer),
    }
}

fn rk4_span(
    field: Field,
    z0: &[f64],
    t0: f64,
    t1: f64,
    cfg: &SolverConfig,
) -> Result<(Vec<f64>, usize), SolverError> {
    let span = t1 - t0;
    let n_steps = ((span / cfg.h_init).ceil() as usize).max(1);
    if n_steps > cfg.max_steps {
        return Err(SolverError::NonConvergence(format!(
            "rk4 needs {n_steps} steps, max is {}",
            cfg.max_steps
        )));
    }
    let h = span / n_steps as f64;
    let mut z = z0.to_vec();
    let mut nfe = 0;
    let n = z.len();
    for step in 0..n_steps {
        let t = t0 + h * step as f64;
        let k1 = field(t, &z);
        let y2: Vec<f64> = (0..n).map(|i| z[i] + 0.5 * h * k1[i]).collect();
        let k2 = field(t + 0.5 * h, &y2);
        let y3: Vec<f64> = (0..n).map(|i| z[i] + 0.5 * h * k2[i]).collect();
        let k3 = field(t + 0.5 * h, &y3);
        let y4: Vec<f64> = (0..n).map(|i| z[i] + h * k3[i]).collect();
        let k4 = field(t + h, &y4);
        nfe += 4;
        check_finite(&k4, t + h)?;
        for i in 0..n {
            z[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        if z.iter().any(|v| !v.is_finite()) {
            return Err(SolverError::Instability(format!("non-finite state at t={}", t + h)));
        }
    }
    Ok((z, nfe))
}

// Dormand–Prince 5(4) Butcher tableau.
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
// Difference between 5th- and 4th-order weights for the error estimate.
const E: [f64; 7] = [
    71.0 / 57_600.0,
    0.0,
    -71.0 / 16_695.0,
    71.0 / 1_920.0,
    -17_253.0 / 339_200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

fn dopri5_span(
    field: Field,
    z0: &[f64],
    t0: f64,
    t1: f64,
    cfg: &SolverConfig,
    observer: &mut StepObserver,
) -> Result<(Vec<f64>, usize), SolverError> {
    let n = z0.len();
    let mut t = t0;
    let mut z = z0.to_vec();
    let mut h = cfg.h_init.min(t1 - t0);
    let mut nfe = 0;

    // FSAL: k[0] carried across accepted steps.
    let mut k: Vec<Vec<f64>> = vec![vec![0.0; n]; 7];
    k[0] = field(t, &z);
    nfe += 1;
    check_finite(&k[0], t)?;

    let mut attempts = 0usize;
    while t < t1 {
        if attempts >= cfg.max_steps {
            return Err(SolverError::NonConvergence(format!(
                "exceeded max_steps={} at t={t}",
                cfg.max_steps
            )));
        }
        if h < cfg.h_min {
            return Err(SolverError::NonConvergence(format!("step underflow at t={t}")));
        }
        h = h.min(t1 - t);
        attempts += 1;

        for stage in 1..7 {
            let mut y = z.clone();
            for (j, kj) in k.iter().enumerate().take(stage) {
                let a = A[stage][j];
                if a != 0.0 {
                    for i in 0..n {
                        y[i] += h * a * kj[i];
                    }
                }
            }
            k[stage] = field(t + C[stage] * h, &y);
            check_finite(&k[stage], t + C[stage] * h)?;
        }
        nfe += 6;

        // 5th-order solution is stage 7's argument (A row 6 == weights).
        let mut z_new = z.clone();
        for (j, kj) in k.iter().enumerate().take(6) {
            let a = A[6][j];
            if a != 0.0 {
                for i in 0..n {
                    z_new[i] += h * a * kj[i];
                }
            }
        }

        let mut err_sq = 0.0;
        for i in 0..n {
            let e: f64 = (0..7).map(|j| E[j] * k[j][i]).sum::<f64>() * h;
            let scale = cfg.atol + cfg.rtol * z[i].abs().max(z_new[i].abs());
            err_sq += (e / scale) * (e / scale);
        }
        let err = (err_sq / n as f64).sqrt();

        let factor = if err == 0.0 {
            10.0
        } else {
            (0.9 * err.powf(-0.2)).clamp(0.2, 10.0)
        };
        if err <= 1.0 {
            t += h;
            z = z_new;
            k[0] = k[6].clone(); // FSAL reuse
            if let Some(obs) = observer.as_mut() {
                obs(t, h, err);
            }
            h *= factor;
        } else {
            h *= factor;
        }
    }
    Ok((z, nfe))
}

/// Integrate through every requested timestamp, recording the state at
/// each one. `times` must be strictly ascending; `times[0]` is t0.
pub fn integrate_dense(
    field: Field,
    z0: &[f64],
    times: &[f64],
    cfg: &SolverConfig,
) -> Result<Trajectory, SolverError> {
    assert!(!times.is_empty(), "integrate_dense needs at least one time");
    assert!(
        times.windows(2).all(|w| w[1] > w[0]),
        "integrate_dense times must be strictly increasing"
    );
    let mut states = Vec::with_capacity(times.len());
    states.push(Tensor::vector(z0.to_vec()));
    let mut z = z0.to_vec();
    let mut nfe = 0;
    for w in times.windows(2) {
        let (out, evals) = integrate(field, &z, w[0], w[1], cfg)?;
        nfe += evals;
        z = out;
        states.push(Tensor::vector(z.clone()));
    }
    Ok(Trajectory { times: times.to_vec(), states, nfe })
}

/// Evenly spaced grid including both endpoints.
pub fn linspace(t0: f64, t1: f64, n: usize) -> Vec<f64> {
    assert!(n >= 2);
    let step = (t1 - t0) / (n - 1) as f64;
    (0..n).map(|i| if i == n - 1 { t1 } else { t0 + step * i as f64 }).collect()
}
