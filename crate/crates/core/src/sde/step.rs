use serde::{Deserialize, Serialize};

use super::truncation::TruncatedModel;
use crate::error::{PathFailure, SimError};
use crate::noise::NoiseSlab;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum System {
    Nonlinear,
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    /// Euler–Maruyama.
    Em,
    /// Euler–Maruyama followed by projection onto the initial energy sphere.
    Conservative,
    /// Exact integrating factor for the isotropic correction with
    /// variance-matched noise; stable for any `dt`.
    Exponential,
}

/// Shell amplitudes `X_1..X_N`, flattened `N x d`.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedState {
    pub shells: usize,
    pub d: usize,
    pub t: f64,
    pub step: u64,
    pub x: Vec<f64>,
    pub energy0: f64,
}

impl TruncatedState {
    pub fn new(shells: usize, d: usize, x: Vec<f64>) -> Result<Self, SimError> {
        if x.len() != shells * d {
            return Err(SimError::StateShape {
                got: x.len() / d.max(1),
                got_d: d,
                want: shells,
                want_d: d,
            });
        }
        let energy0 = x.iter().map(|v| v * v).sum();
        Ok(Self {
            shells,
            d,
            t: 0.0,
            step: 0,
            x,
            energy0,
        })
    }

    pub fn zeros(shells: usize, d: usize) -> Self {
        Self::new(shells, d, vec![0.0; shells * d]).expect("shape is consistent")
    }

    /// Unit energy on one-based shell `n`, first component.
    pub fn unit(shells: usize, d: usize, n: usize) -> Self {
        let mut x = vec![0.0; shells * d];
        x[(n - 1) * d] = 1.0;
        Self::new(shells, d, x).expect("shape is consistent")
    }

    pub fn shell(&self, n: usize) -> &[f64] {
        &self.x[(n - 1) * self.d..n * self.d]
    }

    pub fn shell_sq(&self, n: usize) -> f64 {
        self.shell(n).iter().map(|v| v * v).sum()
    }

    pub fn energy(&self) -> f64 {
        self.x.iter().map(|v| v * v).sum()
    }
}

/// Reusable scratch for stepping many paths on one truncation.
#[derive(Debug, Clone)]
pub struct Integrator<'a> {
    model: &'a TruncatedModel,
    inc: Vec<f64>,
    decay: Vec<f64>,
    src_scale: Vec<f64>,
    prepared_dt: f64,
}

impl<'a> Integrator<'a> {
    pub fn new(model: &'a TruncatedModel) -> Self {
        let len = model.shells() * model.dim();
        Self {
            model,
            inc: vec![0.0; len],
            decay: vec![1.0; model.shells()],
            src_scale: vec![1.0; model.shells()],
            prepared_dt: f64::NAN,
        }
    }

    pub fn model(&self) -> &TruncatedModel {
        self.model
    }

    fn check(&self, state: &TruncatedState, slab: &NoiseSlab, dt: f64) -> Result<(), SimError> {
        if state.shells != self.model.shells() || state.d != self.model.dim() {
            return Err(SimError::StateShape {
                got: state.shells,
                got_d: state.d,
                want: self.model.shells(),
                want_d: self.model.dim(),
            });
        }
        if slab.dt != dt || !(dt > 0.0) {
            return Err(SimError::StepMismatch { slab: slab.dt, step: dt });
        }
        if slab.layout() != self.model.layout() {
            return Err(SimError::Setting("noise slab window does not match the truncation".into()));
        }
        Ok(())
    }

    fn finish(state: &mut TruncatedState, dt: f64, path: u64) -> Result<(), SimError> {
        state.t += dt;
        state.step += 1;
        if let Some((idx, &v)) = state.x.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(SimError::PathFailure(PathFailure {
                path,
                step: state.step,
                t: state.t,
                shell: idx / state.d + 1,
                value: v,
            }));
        }
        Ok(())
    }

    pub fn step_em(&mut self, state: &mut TruncatedState, slab: &NoiseSlab, system: System, path: u64) -> Result<(), SimError> {
        let dt = slab.dt;
        self.check(state, slab, dt)?;
        self.inc.iter_mut().for_each(|v| *v = 0.0);
        if system == System::Nonlinear {
            self.model.add_bilinear(&state.x, dt, &mut self.inc);
        }
        self.model.add_correction(&state.x, dt, &mut self.inc);
        self.model.add_diffusion(&state.x, slab, None, &mut self.inc);
        for (x, i) in state.x.iter_mut().zip(&self.inc) {
            *x += i;
        }
        Self::finish(state, dt, path)
    }

    pub fn step_conservative(
        &mut self,
        state: &mut TruncatedState,
        slab: &NoiseSlab,
        system: System,
        path: u64,
    ) -> Result<(), SimError> {
        self.step_em(state, slab, system, path)?;
        let e = state.energy();
        if e > 0.0 {
            let f = (state.energy0 / e).sqrt();
            state.x.iter_mut().for_each(|v| *v *= f);
        }
        Ok(())
    }

    fn prepare_exponential(&mut self, dt: f64) -> Result<(), SimError> {
        if self.prepared_dt == dt {
            return Ok(());
        }
        let rates = self.model.isotropic_rates().ok_or_else(|| {
            SimError::Setting("exponential scheme needs an isotropic Itô correction (identity L_i)".into())
        })?;
        if !self.model.spec().non_identity_grams().is_empty() {
            return Err(SimError::Setting(
                "exponential scheme needs every L_i to be the identity".into(),
            ));
        }
        for (n, &r) in rates.iter().enumerate() {
            let z = r * dt;
            self.decay[n] = (-0.5 * z).exp();
            self.src_scale[n] = if z > 1e-12 { (-(-z).exp_m1() / z).sqrt() } else { 1.0 };
        }
        self.prepared_dt = dt;
        Ok(())
    }

    pub fn step_exponential(
        &mut self,
        state: &mut TruncatedState,
        slab: &NoiseSlab,
        system: System,
        path: u64,
    ) -> Result<(), SimError> {
        let dt = slab.dt;
        self.check(state, slab, dt)?;
        self.prepare_exponential(dt)?;
        self.inc.iter_mut().for_each(|v| *v = 0.0);
        if system == System::Nonlinear {
            self.model.add_bilinear(&state.x, dt, &mut self.inc);
        }
        self.model.add_diffusion(&state.x, slab, Some(&self.src_scale), &mut self.inc);
        let d = state.d;
        for (n, chunk) in state.x.chunks_mut(d).enumerate() {
            let f = self.decay[n];
            for (x, i) in chunk.iter_mut().zip(&self.inc[n * d..(n + 1) * d]) {
                *x = f * *x + i;
            }
        }
        Self::finish(state, dt, path)
    }

    pub fn step(
        &mut self,
        scheme: Scheme,
        state: &mut TruncatedState,
        slab: &NoiseSlab,
        system: System,
        path: u64,
    ) -> Result<(), SimError> {
        match scheme {
            Scheme::Em => self.step_em(state, slab, system, path),
            Scheme::Conservative => self.step_conservative(state, slab, system, path),
            Scheme::Exponential => self.step_exponential(state, slab, system, path),
        }
    }
}

pub fn step_em(model: &TruncatedModel, state: &mut TruncatedState, slab: &NoiseSlab, system: System) -> Result<(), SimError> {
    Integrator::new(model).step_em(state, slab, system, 0)
}

pub fn step_conservative(
    model: &TruncatedModel,
    state: &mut TruncatedState,
    slab: &NoiseSlab,
    system: System,
) -> Result<(), SimError> {
    Integrator::new(model).step_conservative(state, slab, system, 0)
}

pub fn step_exponential(
    model: &TruncatedModel,
    state: &mut TruncatedState,
    slab: &NoiseSlab,
    system: System,
) -> Result<(), SimError> {
    Integrator::new(model).step_exponential(state, slab, system, 0)
}
