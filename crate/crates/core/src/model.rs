//! System models: delayed drift, input gain, feedback and impulse laws.
//!
//! Concrete models are restricted to finitely many discrete delays: the
//! drift receives the current state and the states `x(t - d_j)` for each
//! listed delay `d_j`.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

/// `f(t, x(t), [x(t - d_0), x(t - d_1), ...], out)`.
pub type DriftFn = Arc<dyn Fn(f64, &[f64], &[Vec<f64>], &mut [f64]) + Send + Sync>;

/// State map `x -> out`, used for the feedback law `k` and impulse law `g`.
pub type StateMapFn = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;

/// Initial history `phi` on `[t0 - tau, t0]`.
#[derive(Clone)]
pub enum InitialHistory {
    Constant(Vec<f64>),
    /// Function of absolute time, sampled on the solver grid.
    Function(Arc<dyn Fn(f64) -> Vec<f64> + Send + Sync>),
}

impl InitialHistory {
    pub fn at(&self, t: f64) -> Vec<f64> {
        match self {
            InitialHistory::Constant(v) => v.clone(),
            InitialHistory::Function(f) => f(t),
        }
    }
}

impl fmt::Debug for InitialHistory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InitialHistory::Constant(v) => f.debug_tuple("Constant").field(v).finish(),
            InitialHistory::Function(_) => f.write_str("Function(..)"),
        }
    }
}

#[derive(Clone)]
pub struct SystemModel {
    dim: usize,
    input_dim: usize,
    delays: Vec<f64>,
    drift: DriftFn,
    /// `dim x input_dim`, row-major.
    input_gain: Vec<f64>,
    feedback: StateMapFn,
    impulse: StateMapFn,
    initial: InitialHistory,
    t0: f64,
}

impl fmt::Debug for SystemModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SystemModel")
            .field("dim", &self.dim)
            .field("input_dim", &self.input_dim)
            .field("delays", &self.delays)
            .field("input_gain", &self.input_gain)
            .field("initial", &self.initial)
            .field("t0", &self.t0)
            .finish_non_exhaustive()
    }
}

impl SystemModel {
    /// Model with identity input gain (`m = n`), zero feedback, zero impulse
    /// law and zero initial history starting at `t0 = 0`.
    pub fn new(dim: usize, delays: Vec<f64>, drift: DriftFn) -> Result<Self> {
        if dim == 0 {
            return Err(Error::validation("dim", "state dimension must be positive"));
        }
        if let Some(d) = delays.iter().find(|d| !(d.is_finite() && **d >= 0.0)) {
            return Err(Error::validation("delays", format!("delay {d} must be finite and >= 0")));
        }
        let mut input_gain = vec![0.0; dim * dim];
        for i in 0..dim {
            input_gain[i * dim + i] = 1.0;
        }
        Ok(Self {
            dim,
            input_dim: dim,
            delays,
            drift,
            input_gain,
            feedback: Arc::new(|_, out| out.fill(0.0)),
            impulse: Arc::new(|_, out| out.fill(0.0)),
            initial: InitialHistory::Constant(vec![0.0; dim]),
            t0: 0.0,
        })
    }

    pub fn with_input_gain(mut self, input_dim: usize, gain: Vec<f64>) -> Result<Self> {
        if gain.len() != self.dim * input_dim || input_dim == 0 {
            return Err(Error::validation(
                "input_gain",
                format!("expected {}x{} entries, got {}", self.dim, input_dim, gain.len()),
            ));
        }
        self.input_dim = input_dim;
        self.input_gain = gain;
        Ok(self)
    }

    pub fn with_feedback(mut self, law: StateMapFn) -> Self {
        self.feedback = law;
        self
    }

    pub fn with_impulse(mut self, law: StateMapFn) -> Self {
        self.impulse = law;
        self
    }

    pub fn with_initial(mut self, t0: f64, initial: InitialHistory) -> Self {
        self.t0 = t0;
        self.initial = initial;
        self
    }

    /// Scalar linear system `x' = b x(t - r) + u`, `u = k x(t_i)`,
    /// jumps `x+ = (1 + beta) x-`, constant initial history `phi`.
    pub fn scalar_delay(b: f64, r: f64, k: f64, beta: f64, phi: f64) -> Result<Self> {
        if !(r.is_finite() && r > 0.0) {
            return Err(Error::validation("r", "delay must be positive"));
        }
        let model = Self::new(
            1,
            vec![r],
            Arc::new(move |_, _, delayed, out| out[0] = b * delayed[0][0]),
        )?
        .with_input_gain(1, vec![1.0])?
        .with_feedback(Arc::new(move |x, out| out[0] = k * x[0]))
        .with_impulse(Arc::new(move |x, out| out[0] = beta * x[0]))
        .with_initial(0.0, InitialHistory::Constant(vec![phi]));
        Ok(model)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn delays(&self) -> &[f64] {
        &self.delays
    }

    /// Largest delay, `tau`.
    pub fn tau(&self) -> f64 {
        self.delays.iter().copied().fold(0.0, f64::max)
    }

    pub fn min_positive_delay(&self) -> Option<f64> {
        self.delays
            .iter()
            .copied()
            .filter(|&d| d > 0.0)
            .reduce(f64::min)
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn initial(&self) -> &InitialHistory {
        &self.initial
    }

    pub fn drift(&self, t: f64, x: &[f64], delayed: &[Vec<f64>], out: &mut [f64]) {
        (self.drift)(t, x, delayed, out)
    }

    pub fn feedback(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.input_dim];
        (self.feedback)(x, &mut out);
        out
    }

    pub fn impulse_input(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.input_dim];
        (self.impulse)(x, &mut out);
        out
    }

    /// `out += B u`.
    pub fn add_input(&self, u: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            let row = &self.input_gain[i * self.input_dim..(i + 1) * self.input_dim];
            *o += row.iter().zip(u).map(|(b, u)| b * u).sum::<f64>();
        }
    }

    /// `B u` as a fresh vector.
    pub fn apply_gain(&self, u: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.add_input(u, &mut out);
        out
    }

    /// Checks that `f(t, 0) = 0`, `k(0) = 0` and `g(0) = 0`.
    pub fn admits_trivial_solution(&self, t: f64) -> bool {
        let zero = vec![0.0; self.dim];
        let delayed = vec![zero.clone(); self.delays.len()];
        let mut f = vec![0.0; self.dim];
        self.drift(t, &zero, &delayed, &mut f);
        f.iter().all(|v| *v == 0.0)
            && self.feedback(&zero).iter().all(|v| *v == 0.0)
            && self.impulse_input(&zero).iter().all(|v| *v == 0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scalar_example_structure() {
        let m = SystemModel::scalar_delay(-0.1, 16.0, -0.2, -0.293, 1.0).unwrap();
        assert_eq!(m.tau(), 16.0);
        assert_eq!(m.min_positive_delay(), Some(16.0));
        assert!(m.admits_trivial_solution(0.0));
        assert_eq!(m.feedback(&[1.0]), vec![-0.2]);
        assert_eq!(m.impulse_input(&[1.0]), vec![-0.293]);
        let mut f = [0.0];
        m.drift(0.0, &[5.0], &[vec![1.0]], &mut f);
        assert_eq!(f, [-0.1]);
    }

    #[test]
    fn affine_drift_is_not_trivial() {
        let m = SystemModel::new(1, vec![], Arc::new(|_, _, _, out| out[0] = 1.0)).unwrap();
        assert!(!m.admits_trivial_solution(0.0));
    }

    #[test]
    fn rejects_bad_shapes() {
        let drift: DriftFn = Arc::new(|_, _, _, out| out.fill(0.0));
        assert!(SystemModel::new(0, vec![], drift.clone()).is_err());
        assert!(SystemModel::new(1, vec![-1.0], drift.clone()).is_err());
        let m = SystemModel::new(2, vec![], drift).unwrap();
        assert!(m.clone().with_input_gain(1, vec![1.0]).is_err());
        let m = m.with_input_gain(1, vec![1.0, 2.0]).unwrap();
        assert_eq!(m.apply_gain(&[3.0]), vec![3.0, 6.0]);
    }
}
