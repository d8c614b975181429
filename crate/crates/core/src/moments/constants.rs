use nalgebra::DMatrix;
use serde::Serialize;

use crate::algebra::{ModelSpec, Preset};
use crate::error::MomentError;

/// Relative change of `nu` tolerated when the truncation grows by
/// [`TAIL_STEP`] levels.
pub const TAIL_TOL: f64 = 1e-3;
pub const TAIL_STEP: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum Threshold {
    Defined { value: f64 },
    Undefined { radicand: f64 },
}

impl Threshold {
    pub fn value(&self) -> Option<f64> {
        match self {
            Threshold::Defined { value } => Some(*value),
            Threshold::Undefined { .. } => None,
        }
    }
}

/// `sqrt(2) (lambda - 1/lambda) sqrt(a^2 - c^2/lambda^2) sigma^2`.
pub fn smallness_threshold_goy_sabra(a: f64, c: f64, lambda: f64, sigma: f64) -> Threshold {
    let radicand = a * a - c * c / (lambda * lambda);
    if radicand > 0.0 {
        Threshold::Defined {
            value: 2f64.sqrt() * (lambda - 1.0 / lambda) * radicand.sqrt() * sigma * sigma,
        }
    } else {
        Threshold::Undefined { radicand }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecayConstants {
    pub shells: usize,
    pub sigma: f64,
    pub x_norm_sq: f64,
    /// `E[V_n | V_n > 0]` for the killed embedded chain.
    pub visits: Vec<f64>,
    pub nu_n: Vec<f64>,
    pub nu: f64,
    #[serde(rename = "Lambda")]
    pub entropy: f64,
    pub mu: f64,
    #[serde(rename = "C")]
    pub c: f64,
    pub rho: f64,
    pub theta_max: f64,
    pub threshold: Option<Threshold>,
    /// Relative change of `nu` against a truncation `TAIL_STEP` levels higher.
    pub tail_change: f64,
}

/// Embedded-chain transition matrix on `1..=N` with mass leaving the range
/// discarded; independent of `sigma`.
pub fn embedded_matrix(spec: &ModelSpec, shells: usize) -> Result<DMatrix<f64>, MomentError> {
    spec.check_structure()?;
    let mut p = DMatrix::zeros(shells, shells);
    for n in 1..=shells as i64 {
        let total = spec.sigma_free_rate(n);
        if !(total > 0.0) {
            return Err(MomentError::ZeroRate(n as usize));
        }
        for (i, it) in spec.interactions.iter().enumerate() {
            let m = n + it.r;
            if spec.is_active(i, n) && m >= 1 && m <= shells as i64 && m != n {
                p[((n - 1) as usize, (m - 1) as usize)] += spec.k_eff(i, n).powi(2) / total;
            }
        }
    }
    Ok(p)
}

/// Diagonal of the fundamental matrix `(I - P)^{-1}`.
pub fn expected_visits(spec: &ModelSpec, shells: usize) -> Result<Vec<f64>, MomentError> {
    let p = embedded_matrix(spec, shells)?;
    let g = (DMatrix::identity(shells, shells) - p)
        .lu()
        .try_inverse()
        .ok_or(MomentError::Singular)?;
    Ok((0..shells).map(|n| g[(n, n)]).collect())
}

fn occupation(spec: &ModelSpec, shells: usize) -> Result<(Vec<f64>, Vec<f64>), MomentError> {
    let visits = expected_visits(spec, shells)?;
    let nu_n = visits
        .iter()
        .enumerate()
        .map(|(j, g)| g / spec.total_rate(j as i64 + 1))
        .collect();
    Ok((visits, nu_n))
}

/// Decay constants for initial energy `x_norm_sq`, with occupation times
/// from the fundamental matrix on `1..=N`.
pub fn decay_constants(spec: &ModelSpec, x_norm_sq: f64, shells: usize) -> Result<DecayConstants, MomentError> {
    let bad = spec.non_identity_grams();
    if !bad.is_empty() {
        return Err(MomentError::NonIdentityGram(bad));
    }
    if !(x_norm_sq.is_finite() && x_norm_sq >= 0.0) {
        return Err(MomentError::BadInitial(0));
    }
    let (visits, nu_n) = occupation(spec, shells)?;
    let nu: f64 = nu_n.iter().sum();
    let (_, nu_far) = occupation(spec, shells + TAIL_STEP)?;
    let nu_plus: f64 = nu_far.iter().sum();
    let tail_change = (nu_plus - nu).abs() / nu_plus;
    if tail_change > TAIL_TOL {
        return Err(MomentError::TailNotConverged {
            n: shells,
            n_plus: shells + TAIL_STEP,
            rel: tail_change,
        });
    }
    let entropy = -nu_n.iter().map(|v| if *v > 0.0 { v * v.ln() } else { 0.0 }).sum::<f64>();
    let s2 = spec.sigma * spec.sigma;
    let mu = s2 * nu;
    let c = x_norm_sq * nu * (entropy / nu).exp();
    let rho = (mu * spec.len() as f64).sqrt() * x_norm_sq.sqrt() / (2.0 * s2);
    let theta_max = s2 / (mu * x_norm_sq);
    let threshold = match spec.preset {
        Some(Preset::Goy { a, c, lambda, .. }) | Some(Preset::Sabra { a, c, lambda, .. }) => {
            Some(smallness_threshold_goy_sabra(a, c, lambda, spec.sigma))
        }
        _ => None,
    };
    Ok(DecayConstants {
        shells,
        sigma: spec.sigma,
        x_norm_sq,
        visits,
        nu_n,
        nu,
        entropy,
        mu,
        c,
        rho,
        theta_max,
        threshold,
        tail_change,
    })
}
