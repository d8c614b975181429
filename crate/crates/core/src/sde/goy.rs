//! Complex-coordinate GOY integrator used as an independent reference for
//! the real general-model step.

use num_complex::Complex64;

use crate::algebra::{ModelSpec, Preset};
use crate::error::{ModelError, SimError};
use crate::noise::{goy_noise_bridge, BridgeVariant, NoiseSlab};

use super::step::System;

#[derive(Debug, Clone)]
pub struct ComplexGoy {
    a: f64,
    b: f64,
    c: f64,
    sigma_tilde: f64,
    shells: usize,
    /// `lam[j] = lambda^(j - 2)` for `j - 2 >= 1`, else zero.
    lam: Vec<f64>,
    /// Itô rate per shell, `lam_n^2 v_n + lam_{n-1}^2 v_{n-1}` scaled by
    /// `sigma_tilde^2`, where `v_1` is the share of the first noise family.
    kappa: Vec<f64>,
}

impl ComplexGoy {
    pub fn new(spec: &ModelSpec, shells: usize) -> Result<Self, ModelError> {
        let Some(Preset::Goy {
            a,
            b,
            c,
            lambda,
            sigma_tilde,
        }) = spec.preset
        else {
            return Err(ModelError::Parameter("complex integrator needs a GOY preset".into()));
        };
        let lam: Vec<f64> = (0..shells + 5)
            .map(|j| {
                let n = j as i64 - 2;
                if n >= 1 {
                    lambda.powi(n as i32)
                } else {
                    0.0
                }
            })
            .collect();
        let v1 = a * a / (a * a + c * c / (lambda * lambda));
        let share = |n: usize| if n == 1 { v1 } else { 1.0 };
        let kappa = (1..=shells)
            .map(|n| {
                let l = lam[n + 2];
                let lm = lam[n + 1];
                let prev = if n >= 2 { lm * lm * share(n - 1) } else { 0.0 };
                sigma_tilde * sigma_tilde * (l * l * share(n) + prev)
            })
            .collect();
        Ok(Self {
            a,
            b,
            c,
            sigma_tilde,
            shells,
            lam,
            kappa,
        })
    }

    fn lam(&self, n: i64) -> f64 {
        self.lam[(n + 2) as usize]
    }

    /// Complex increments `dw_1..dw_N` matched to a real slab.
    pub fn increments(&self, spec: &ModelSpec, slab: &NoiseSlab) -> Result<Vec<Complex64>, SimError> {
        (1..=self.shells as i64)
            .map(|n| goy_noise_bridge(spec, slab, n, BridgeVariant::Active).map_err(SimError::from))
            .collect()
    }

    /// One Euler–Maruyama step of the complex Itô equation.
    pub fn step(&self, u: &mut [Complex64], dw: &[Complex64], dt: f64, system: System) {
        let nn = self.shells as i64;
        let get = |v: &[Complex64], n: i64| -> Complex64 {
            if n >= 1 && n <= nn {
                v[(n - 1) as usize]
            } else {
                Complex64::new(0.0, 0.0)
            }
        };
        let i = Complex64::i();
        let old = u.to_vec();
        for n in 1..=nn {
            let mut du = Complex64::new(0.0, 0.0);
            if system == System::Nonlinear {
                du += i * self.a * self.lam(n) * get(&old, n + 1).conj() * get(&old, n + 2).conj() * dt;
                du += i * self.b * self.lam(n - 1) * get(&old, n - 1).conj() * get(&old, n + 1).conj() * dt;
                du += i * self.c * self.lam(n - 2) * get(&old, n - 1).conj() * get(&old, n - 2).conj() * dt;
            }
            du -= self.kappa[(n - 1) as usize] * get(&old, n) * dt;
            du += i * self.sigma_tilde * self.lam(n) * get(&old, n + 1).conj() * get(dw, n);
            du -= i * self.sigma_tilde * self.lam(n - 1) * get(&old, n - 1).conj() * get(dw, n - 1);
            u[(n - 1) as usize] += du;
        }
    }
}
