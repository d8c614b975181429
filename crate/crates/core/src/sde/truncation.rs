use serde::{Deserialize, Serialize};

use crate::algebra::{ModelSpec, ALGEBRA_TOL};
use crate::error::SimError;
use crate::noise::{NoiseSlab, SlabLayout, DEFAULT_MAX_SHELLS};

/// How the Itô correction treats interactions whose source shell lies
/// outside `1..=N`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    /// Full correction on every shell; energy leaks past `N` and second
    /// moments follow the truncated rate matrix with absorbing escape.
    #[default]
    Absorbing,
    /// Correction only from interactions that stay inside `1..=N`; the Itô
    /// energy balance closes and expected energy is conserved.
    Closed,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Term {
    pub(crate) interaction: usize,
    pub(crate) coeff: f64,
    pub(crate) source: usize,
    pub(crate) partner: Option<usize>,
    pub(crate) root: usize,
    pub(crate) noise_shell: i64,
}

/// Precomputed stencil of a model truncated to shells `1..=N`.
#[derive(Debug, Clone)]
pub struct TruncatedModel {
    spec: ModelSpec,
    shells: usize,
    boundary: Boundary,
    pub(crate) terms: Vec<Vec<Term>>,
    correction: Vec<Vec<f64>>,
    isotropic: Option<Vec<f64>>,
    layout: SlabLayout,
}

impl TruncatedModel {
    pub fn new(spec: &ModelSpec, shells: usize, boundary: Boundary) -> Result<Self, SimError> {
        Self::with_max_shells(spec, shells, boundary, DEFAULT_MAX_SHELLS)
    }

    pub fn with_max_shells(
        spec: &ModelSpec,
        shells: usize,
        boundary: Boundary,
        max_shells: usize,
    ) -> Result<Self, SimError> {
        let layout = SlabLayout::new(spec, shells, max_shells)?;
        let d = spec.d;
        let s2 = spec.sigma * spec.sigma;
        let grams: Vec<Vec<f64>> = spec.interactions.iter().map(|it| it.map.gram()).collect();
        let mut terms = Vec::with_capacity(shells);
        let mut correction = Vec::with_capacity(shells);
        for n in 1..=shells as i64 {
            let mut row = Vec::new();
            let mut corr = vec![0.0; d * d];
            for (i, it) in spec.interactions.iter().enumerate() {
                let k = spec.k_eff(i, n);
                if !spec.is_active(i, n) {
                    continue;
                }
                let src = n + it.r;
                let inside = src >= 1 && src <= shells as i64;
                if inside || boundary == Boundary::Absorbing {
                    for (c, g) in corr.iter_mut().zip(&grams[i]) {
                        *c -= 0.5 * s2 * k * k * g;
                    }
                }
                if !inside {
                    continue;
                }
                let ph = n + it.h;
                row.push(Term {
                    interaction: i,
                    coeff: k,
                    source: (src - 1) as usize,
                    partner: (ph >= 1 && ph <= shells as i64).then(|| (ph - 1) as usize),
                    root: layout_root(spec, i),
                    noise_shell: ph,
                });
            }
            terms.push(row);
            correction.push(corr);
        }
        let isotropic = correction
            .iter()
            .map(|c| {
                let diag = c[0];
                let ok = (0..d * d).all(|idx| {
                    let target = if idx / d == idx % d { diag } else { 0.0 };
                    (c[idx] - target).abs() <= ALGEBRA_TOL * diag.abs().max(f64::MIN_POSITIVE)
                });
                ok.then_some(-2.0 * diag)
            })
            .collect::<Option<Vec<f64>>>();
        Ok(Self {
            spec: spec.clone(),
            shells,
            boundary,
            terms,
            correction,
            isotropic,
            layout,
        })
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn shells(&self) -> usize {
        self.shells
    }

    pub fn dim(&self) -> usize {
        self.spec.d
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    pub fn layout(&self) -> &SlabLayout {
        &self.layout
    }

    /// Correction matrix at one-based shell `n`.
    pub fn correction(&self, n: usize) -> &[f64] {
        &self.correction[n - 1]
    }

    /// Per-shell decay rates when every correction is a multiple of the
    /// identity.
    pub fn isotropic_rates(&self) -> Option<&[f64]> {
        self.isotropic.as_deref()
    }

    pub fn max_rate(&self) -> f64 {
        (1..=self.shells as i64).map(|n| self.spec.total_rate(n)).fold(0.0, f64::max)
    }

    fn check_state(&self, x: &[f64]) -> Result<(), SimError> {
        if x.len() != self.shells * self.dim() {
            return Err(SimError::StateShape {
                got: x.len() / self.dim().max(1),
                got_d: self.dim(),
                want: self.shells,
                want_d: self.dim(),
            });
        }
        Ok(())
    }

    /// `out += scale * sum_i k_{i,n} B_i(x_{n+r_i}, x_{n+h_i})`.
    pub(crate) fn add_bilinear(&self, x: &[f64], scale: f64, out: &mut [f64]) {
        let d = self.dim();
        for (n, row) in self.terms.iter().enumerate() {
            let o = &mut out[n * d..(n + 1) * d];
            for t in row {
                if let Some(p) = t.partner {
                    self.spec.interactions[t.interaction].map.accumulate(
                        scale * t.coeff,
                        &x[t.source * d..(t.source + 1) * d],
                        &x[p * d..(p + 1) * d],
                        o,
                    );
                }
            }
        }
    }

    /// `out += scale * C_n x_n`.
    pub(crate) fn add_correction(&self, x: &[f64], scale: f64, out: &mut [f64]) {
        let d = self.dim();
        if let Some(rates) = &self.isotropic {
            for (n, r) in rates.iter().enumerate() {
                let f = -0.5 * r * scale;
                for a in 0..d {
                    out[n * d + a] += f * x[n * d + a];
                }
            }
            return;
        }
        for (n, c) in self.correction.iter().enumerate() {
            for a in 0..d {
                let mut acc = 0.0;
                for b in 0..d {
                    acc += c[a * d + b] * x[n * d + b];
                }
                out[n * d + a] += scale * acc;
            }
        }
    }

    /// `out += sum_i sigma k_{i,n} B_i(scale_src * x_{n+r_i}, dW_{i,n+h_i})`.
    pub(crate) fn add_diffusion(&self, x: &[f64], slab: &NoiseSlab, src_scale: Option<&[f64]>, out: &mut [f64]) {
        let d = self.dim();
        let sigma = self.spec.sigma;
        let mut buf = [0.0f64; 8];
        for (n, row) in self.terms.iter().enumerate() {
            let o = &mut out[n * d..(n + 1) * d];
            for t in row {
                let dw = slab.root_values(t.root, t.noise_shell);
                let src = &x[t.source * d..(t.source + 1) * d];
                let map = &self.spec.interactions[t.interaction].map;
                match src_scale {
                    None => map.accumulate(sigma * t.coeff, src, dw, o),
                    Some(s) if d <= buf.len() => {
                        for (b, v) in buf.iter_mut().zip(src) {
                            *b = v * s[t.source];
                        }
                        map.accumulate(sigma * t.coeff, &buf[..d], dw, o);
                    }
                    Some(s) => {
                        let scaled: Vec<f64> = src.iter().map(|v| v * s[t.source]).collect();
                        map.accumulate(sigma * t.coeff, &scaled, dw, o);
                    }
                }
            }
        }
    }

    /// Bilinear transport plus Itô correction.
    pub fn drift_nonlinear(&self, x: &[f64]) -> Result<Vec<f64>, SimError> {
        self.check_state(x)?;
        let mut out = vec![0.0; x.len()];
        self.add_bilinear(x, 1.0, &mut out);
        self.add_correction(x, 1.0, &mut out);
        Ok(out)
    }

    /// Itô correction only.
    pub fn drift_linear(&self, x: &[f64]) -> Result<Vec<f64>, SimError> {
        self.check_state(x)?;
        let mut out = vec![0.0; x.len()];
        self.add_correction(x, 1.0, &mut out);
        Ok(out)
    }

    /// Bilinear transport alone.
    pub fn bilinear(&self, x: &[f64]) -> Result<Vec<f64>, SimError> {
        self.check_state(x)?;
        let mut out = vec![0.0; x.len()];
        self.add_bilinear(x, 1.0, &mut out);
        Ok(out)
    }

    /// Noise increment for one step.
    pub fn diffusion_apply(&self, x: &[f64], slab: &NoiseSlab) -> Result<Vec<f64>, SimError> {
        self.check_state(x)?;
        if slab.layout() != &self.layout {
            return Err(SimError::Setting("noise slab window does not match the truncation".into()));
        }
        let mut out = vec![0.0; x.len()];
        self.add_diffusion(x, slab, None, &mut out);
        Ok(out)
    }
}

fn layout_root(spec: &ModelSpec, i: usize) -> usize {
    spec.noise_root(i).expect("layout construction checked noise owners")
}
