//! Interaction algebra of general shell models.
//!
//! A model is a finite family of interactions `i`, each with a shell offset
//! `r_i`, a noise offset `h_i`, a coefficient `k_i` and a bilinear map `B_i`
//! on `R^d`. The effective coefficient at shell `n` is `lambda^n k_i` when
//! both `n + r_i >= 1` and `n + h_i >= 1`, and zero otherwise.

use std::collections::HashSet;
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::ModelError;

/// Relative tolerance for identities among coefficients.
pub const ALGEBRA_TOL: f64 = 1e-12;

/// Dense bilinear map `B^{a,b,c}` stored row-major in `(a, b, c)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BilinearMap {
    dim: usize,
    entries: Vec<f64>,
}

impl BilinearMap {
    pub fn new(dim: usize, entries: Vec<f64>) -> Result<Self, ModelError> {
        if dim == 0 {
            return Err(ModelError::Structural("bilinear map dimension must be >= 1".into()));
        }
        if entries.len() != dim * dim * dim {
            return Err(ModelError::Structural(format!(
                "bilinear map of dimension {dim} needs {} entries, got {}",
                dim * dim * dim,
                entries.len()
            )));
        }
        Ok(Self { dim, entries })
    }

    pub fn zeros(dim: usize) -> Self {
        assert!(dim > 0, "dimension must be positive");
        Self {
            dim,
            entries: vec![0.0; dim * dim * dim],
        }
    }

    /// Builds from a closure over zero-based `(a, b, c)`.
    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(dim);
        for a in 0..dim {
            for b in 0..dim {
                for c in 0..dim {
                    m.entries[(a * dim + b) * dim + c] = f(a, b, c);
                }
            }
        }
        m
    }

    /// Scalar product map `B(u, v) = uv` on `R^1`.
    pub fn scalar() -> Self {
        Self {
            dim: 1,
            entries: vec![1.0],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    #[inline]
    pub fn entry(&self, a: usize, b: usize, c: usize) -> f64 {
        self.entries[(a * self.dim + b) * self.dim + c]
    }

    /// `out += scale * B(u, v)`.
    #[inline]
    pub fn accumulate(&self, scale: f64, u: &[f64], v: &[f64], out: &mut [f64]) {
        let d = self.dim;
        if d == 1 {
            out[0] += scale * self.entries[0] * u[0] * v[0];
            return;
        }
        let mut idx = 0;
        for o in out.iter_mut().take(d) {
            let mut acc = 0.0;
            for &ub in u.iter().take(d) {
                let row = &self.entries[idx..idx + d];
                let mut inner = 0.0;
                for (bc, &vc) in row.iter().zip(v) {
                    inner += bc * vc;
                }
                acc += ub * inner;
                idx += d;
            }
            *o += scale * acc;
        }
    }

    pub fn apply(&self, u: &[f64], v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.accumulate(1.0, u, v, &mut out);
        out
    }

    /// `L = B B^T`, i.e. `L^{a,b} = sum_{c,e} B^{a,c,e} B^{b,c,e}`, row-major.
    pub fn gram(&self) -> Vec<f64> {
        let d = self.dim;
        let dd = d * d;
        let mut l = vec![0.0; dd];
        for a in 0..d {
            for b in 0..d {
                let ra = &self.entries[a * dd..(a + 1) * dd];
                let rb = &self.entries[b * dd..(b + 1) * dd];
                l[a * d + b] = ra.iter().zip(rb).map(|(x, y)| x * y).sum();
            }
        }
        l
    }

    pub fn gram_is_identity(&self, tol: f64) -> bool {
        let d = self.dim;
        self.gram().iter().enumerate().all(|(idx, &v)| {
            let target = if idx / d == idx % d { 1.0 } else { 0.0 };
            (v - target).abs() <= tol
        })
    }

    fn max_abs(&self) -> f64 {
        self.entries.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Interaction {
    pub id: String,
    pub r: i64,
    pub h: i64,
    pub k: f64,
    pub map: BilinearMap,
}

impl Interaction {
    pub fn new(id: impl Into<String>, r: i64, h: i64, k: f64, map: BilinearMap) -> Self {
        Self {
            id: id.into(),
            r,
            h,
            k,
            map,
        }
    }
}

/// Parameters a model was built from, when it came from a named family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "preset", rename_all = "lowercase")]
pub enum Preset {
    Goy {
        a: f64,
        b: f64,
        c: f64,
        lambda: f64,
        sigma_tilde: f64,
    },
    Sabra {
        a: f64,
        b: f64,
        c: f64,
        lambda: f64,
        sigma1_tilde: f64,
        sigma2_tilde: f64,
    },
    Novikov {
        lambda: f64,
        sigma: f64,
    },
}

impl Preset {
    pub fn name(&self) -> &'static str {
        match self {
            Preset::Goy { .. } => "goy",
            Preset::Sabra { .. } => "sabra",
            Preset::Novikov { .. } => "novikov",
        }
    }

    pub fn build(&self) -> Result<ModelSpec, ModelError> {
        match *self {
            Preset::Goy {
                a,
                b,
                c,
                lambda,
                sigma_tilde,
            } => build_goy(a, b, c, lambda, sigma_tilde),
            Preset::Sabra {
                a,
                b,
                c,
                lambda,
                sigma1_tilde,
                sigma2_tilde,
            } => build_sabra(a, b, c, lambda, sigma1_tilde, sigma2_tilde),
            Preset::Novikov { lambda, sigma } => build_novikov(lambda, sigma),
        }
    }

    pub fn default_goy() -> Self {
        Preset::Goy {
            a: 1.0,
            b: -1.5,
            c: 0.5,
            lambda: 2.0,
            sigma_tilde: 1.0,
        }
    }

    pub fn default_sabra() -> Self {
        Preset::Sabra {
            a: 1.0,
            b: -1.25,
            c: 0.25,
            lambda: 2.0,
            sigma1_tilde: 1.0,
            sigma2_tilde: 0.125,
        }
    }

    pub fn default_novikov() -> Self {
        Preset::Novikov {
            lambda: 2.0,
            sigma: 1.0,
        }
    }
}

/// Full algebraic description of a shell model.
///
/// `pairing[i]` is the index of the partner interaction and `istar` lists
/// the interactions that own independent noise; the partner of an `istar`
/// member reuses its Brownian family.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub d: usize,
    pub lambda: f64,
    pub sigma: f64,
    pub interactions: Vec<Interaction>,
    pub pairing: Vec<usize>,
    pub istar: Vec<usize>,
    pub preset: Option<Preset>,
}

impl ModelSpec {
    /// Checks array shapes and index ranges only.
    pub fn check_structure(&self) -> Result<(), ModelError> {
        if self.d == 0 {
            return Err(ModelError::Structural("dimension d must be >= 1".into()));
        }
        let len = self.interactions.len();
        let mut ids = HashSet::new();
        for it in &self.interactions {
            if it.map.dim() != self.d || it.map.entries().len() != self.d.pow(3) {
                return Err(ModelError::Structural(format!(
                    "interaction {} has a bilinear map of dimension {}, model dimension is {}",
                    it.id,
                    it.map.dim(),
                    self.d
                )));
            }
            if !ids.insert(it.id.as_str()) {
                return Err(ModelError::Structural(format!("duplicate interaction id {}", it.id)));
            }
        }
        if self.pairing.len() != len {
            return Err(ModelError::Structural(format!(
                "pairing has {} entries for {len} interactions",
                self.pairing.len()
            )));
        }
        if let Some(bad) = self.pairing.iter().find(|&&p| p >= len) {
            return Err(ModelError::Structural(format!("pairing refers to unknown index {bad}")));
        }
        let mut seen = HashSet::new();
        for &s in &self.istar {
            if s >= len {
                return Err(ModelError::Structural(format!("I* refers to unknown index {s}")));
            }
            if !seen.insert(s) {
                return Err(ModelError::Structural(format!("I* lists index {s} twice")));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.interactions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.interactions.is_empty()
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.interactions.iter().position(|it| it.id == id)
    }

    /// Position in `istar` of the Brownian family driving interaction `i`.
    pub fn noise_root(&self, i: usize) -> Option<usize> {
        self.istar
            .iter()
            .position(|&s| s == i)
            .or_else(|| self.istar.iter().position(|&s| s == self.pairing[i]))
    }

    #[inline]
    pub fn is_active(&self, i: usize, n: i64) -> bool {
        let it = &self.interactions[i];
        n >= 1 && n + it.r >= 1 && n + it.h >= 1
    }

    /// `k_{i,n}`.
    pub fn k_eff(&self, i: usize, n: i64) -> f64 {
        if self.is_active(i, n) {
            self.lambda.powi(n as i32) * self.interactions[i].k
        } else {
            0.0
        }
    }

    /// Index from which every interaction is active.
    pub fn n0(&self) -> i64 {
        let m = self
            .interactions
            .iter()
            .flat_map(|it| [it.r, it.h])
            .fold(0, i64::min);
        1 - m
    }

    pub fn max_h(&self) -> i64 {
        self.interactions.iter().map(|it| it.h).max().unwrap_or(0)
    }

    pub fn min_h(&self) -> i64 {
        self.interactions.iter().map(|it| it.h).min().unwrap_or(0)
    }

    pub fn max_abs_r(&self) -> i64 {
        self.interactions.iter().map(|it| it.r.abs()).max().unwrap_or(0)
    }

    /// `pi_n = sigma^2 sum_{i in I_n} k_{i,n}^2`.
    pub fn total_rate(&self, n: i64) -> f64 {
        self.sigma * self.sigma * self.sigma_free_rate(n)
    }

    /// `lambda^{2n} sum_{i in I_n} k_i^2`.
    pub fn sigma_free_rate(&self, n: i64) -> f64 {
        (0..self.len()).map(|i| self.k_eff(i, n).powi(2)).sum()
    }

    /// Ids of interactions whose `L_i` is not the identity.
    pub fn non_identity_grams(&self) -> Vec<String> {
        self.interactions
            .iter()
            .filter(|it| !it.map.gram_is_identity(1e-12))
            .map(|it| it.id.clone())
            .collect()
    }

    pub fn require_identity_grams(&self) -> Result<(), ModelError> {
        let bad = self.non_identity_grams();
        if bad.is_empty() {
            Ok(())
        } else {
            Err(ModelError::NonIdentityGram(bad))
        }
    }

    pub fn with_sigma(&self, sigma: f64) -> Self {
        let mut s = self.clone();
        s.sigma = sigma;
        s.preset = None;
        s
    }

    pub fn effective_coefficients(&self, n_max: usize) -> EffectiveCoefficients {
        let values = (1..=n_max as i64)
            .map(|n| (0..self.len()).map(|i| self.k_eff(i, n)).collect())
            .collect();
        let active = (1..=n_max as i64)
            .map(|n| (0..self.len()).filter(|&i| self.is_active(i, n)).collect())
            .collect();
        EffectiveCoefficients {
            n0: self.n0(),
            values,
            active,
        }
    }
}

/// Table of `k_{i,n}` for shells `1..=n_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct EffectiveCoefficients {
    pub n0: i64,
    /// `values[n-1][i]`.
    pub values: Vec<Vec<f64>>,
    /// `active[n-1]` lists `I_n`.
    pub active: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Requirement {
    FiniteInteractionSet,
    NoSelfInteraction,
    ExponentialCoefficients,
    EvenCardinality,
    PairingInvolution,
    IStarPartition,
    CoefficientCancellation,
    OffsetReversal,
    NoiseOffsetShift,
    BilinearAlias,
    NonNegativeMaxNoiseOffset,
    PositiveNoise,
}

impl Requirement {
    pub const ALL: [Requirement; 12] = [
        Requirement::FiniteInteractionSet,
        Requirement::NoSelfInteraction,
        Requirement::ExponentialCoefficients,
        Requirement::EvenCardinality,
        Requirement::PairingInvolution,
        Requirement::IStarPartition,
        Requirement::CoefficientCancellation,
        Requirement::OffsetReversal,
        Requirement::NoiseOffsetShift,
        Requirement::BilinearAlias,
        Requirement::NonNegativeMaxNoiseOffset,
        Requirement::PositiveNoise,
    ];

    pub fn describe(&self) -> &'static str {
        match self {
            Requirement::FiniteInteractionSet => "(i) finite, non-empty interaction set with finite data",
            Requirement::NoSelfInteraction => "(ii) no self-interaction: r_i != 0",
            Requirement::ExponentialCoefficients => "(iii) exponential coefficients: lambda > 1",
            Requirement::EvenCardinality => "(iv) |I| is even",
            Requirement::PairingInvolution => "(iv) pairing is an involution without fixed points",
            Requirement::IStarPartition => "(iv) I = I* disjoint-union pairing(I*)",
            Requirement::CoefficientCancellation => "(iv) k_pair = -k_i lambda^(-r_i)",
            Requirement::OffsetReversal => "(iv) r_pair = -r_i",
            Requirement::NoiseOffsetShift => "(iv) h_pair = h_i - r_i",
            Requirement::BilinearAlias => "(iv) <u, B_pair(v,w)> = <v, B_i(u,w)>",
            Requirement::NonNegativeMaxNoiseOffset => "max_i h_i >= 0",
            Requirement::PositiveNoise => "sigma > 0",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub requirement: Requirement,
    pub description: String,
    pub passed: bool,
    pub offending: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub checks: Vec<CheckResult>,
}

impl ValidationReport {
    pub fn accepted(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> Vec<Requirement> {
        self.checks
            .iter()
            .filter(|c| !c.passed)
            .map(|c| c.requirement)
            .collect()
    }

    pub fn check(&self, req: Requirement) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.requirement == req)
    }

    pub fn into_result(self) -> Result<(), ModelError> {
        if self.accepted() {
            Ok(())
        } else {
            Err(ModelError::Rejected(self.to_string()))
        }
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (idx, c) in self.checks.iter().enumerate() {
            if idx > 0 {
                writeln!(f)?;
            }
            write!(f, "{} {}", if c.passed { "PASS" } else { "FAIL" }, c.description)?;
            if !c.offending.is_empty() {
                write!(f, " [offending: {}]", c.offending.join(", "))?;
            }
        }
        Ok(())
    }
}

fn rel_close(x: f64, y: f64, tol: f64) -> bool {
    let scale = x.abs().max(y.abs());
    (x - y).abs() <= tol * scale || (x - y).abs() == 0.0
}

/// Checks every model requirement and reports each one.
pub fn validate_model(spec: &ModelSpec) -> Result<ValidationReport, ModelError> {
    spec.check_structure()?;
    let its = &spec.interactions;
    let ids = |v: Vec<usize>| -> Vec<String> { v.into_iter().map(|i| its[i].id.clone()).collect() };
    let mut checks = Vec::with_capacity(Requirement::ALL.len());
    let mut push = |req: Requirement, offending: Vec<String>, passed: bool| {
        checks.push(CheckResult {
            requirement: req,
            description: req.describe().to_string(),
            passed,
            offending,
        });
    };

    let nonfinite: Vec<usize> = (0..its.len())
        .filter(|&i| !its[i].k.is_finite() || its[i].map.entries().iter().any(|v| !v.is_finite()))
        .collect();
    let finite_ok = !its.is_empty() && nonfinite.is_empty();
    push(Requirement::FiniteInteractionSet, ids(nonfinite), finite_ok);

    let selfs: Vec<usize> = (0..its.len()).filter(|&i| its[i].r == 0).collect();
    push(Requirement::NoSelfInteraction, ids(selfs.clone()), selfs.is_empty());

    let exp_ok = spec.lambda.is_finite() && spec.lambda > 1.0;
    push(Requirement::ExponentialCoefficients, vec![], exp_ok);

    push(Requirement::EvenCardinality, vec![], its.len() % 2 == 0);

    let tau = &spec.pairing;
    let bad_inv: Vec<usize> = (0..its.len()).filter(|&i| tau[i] == i || tau[tau[i]] != i).collect();
    push(Requirement::PairingInvolution, ids(bad_inv.clone()), bad_inv.is_empty());

    let mut cover = vec![0usize; its.len()];
    for &s in &spec.istar {
        cover[s] += 1;
        cover[tau[s]] += 1;
    }
    let bad_part: Vec<usize> = (0..its.len()).filter(|&i| cover[i] != 1).collect();
    push(Requirement::IStarPartition, ids(bad_part.clone()), bad_part.is_empty());

    let pairs: Vec<(usize, usize)> = (0..its.len()).map(|i| (i, tau[i])).collect();
    let bad_k: Vec<usize> = pairs
        .iter()
        .filter(|&&(i, j)| {
            let target = -its[i].k * spec.lambda.powi(-its[i].r as i32);
            !rel_close(its[j].k, target, ALGEBRA_TOL)
        })
        .map(|&(i, _)| i)
        .collect();
    push(Requirement::CoefficientCancellation, ids(bad_k.clone()), bad_k.is_empty());

    let bad_r: Vec<usize> = pairs
        .iter()
        .filter(|&&(i, j)| its[j].r != -its[i].r)
        .map(|&(i, _)| i)
        .collect();
    push(Requirement::OffsetReversal, ids(bad_r.clone()), bad_r.is_empty());

    let bad_h: Vec<usize> = pairs
        .iter()
        .filter(|&&(i, j)| its[j].h != its[i].h - its[i].r)
        .map(|&(i, _)| i)
        .collect();
    push(Requirement::NoiseOffsetShift, ids(bad_h.clone()), bad_h.is_empty());

    let d = spec.d;
    let bad_b: Vec<usize> = pairs
        .iter()
        .filter(|&&(i, j)| {
            let (bi, bj) = (&its[i].map, &its[j].map);
            let scale = bi.max_abs().max(bj.max_abs()).max(1.0);
            (0..d).any(|a| {
                (0..d).any(|b| {
                    (0..d).any(|c| (bj.entry(a, b, c) - bi.entry(b, a, c)).abs() > ALGEBRA_TOL * scale)
                })
            })
        })
        .map(|&(i, _)| i)
        .collect();
    push(Requirement::BilinearAlias, ids(bad_b.clone()), bad_b.is_empty());

    push(Requirement::NonNegativeMaxNoiseOffset, vec![], !its.is_empty() && spec.max_h() >= 0);
    push(
        Requirement::PositiveNoise,
        vec![],
        spec.sigma.is_finite() && spec.sigma > 0.0,
    );

    Ok(ValidationReport { checks })
}

/// `-(sigma^2/2) sum_i k_{i,n}^2 L_i`, row-major `d x d`.
pub fn ito_correction(spec: &ModelSpec, n: i64) -> Vec<f64> {
    let d = spec.d;
    let mut out = vec![0.0; d * d];
    for (i, it) in spec.interactions.iter().enumerate() {
        let k = spec.k_eff(i, n);
        if k == 0.0 {
            continue;
        }
        let w = -0.5 * spec.sigma * spec.sigma * k * k;
        for (o, l) in out.iter_mut().zip(it.map.gram()) {
            *o += w * l;
        }
    }
    out
}

fn check_common(lambda: f64, sigma: f64, name: &str) -> Result<(), ModelError> {
    if !(lambda.is_finite() && lambda > 1.0) {
        return Err(ModelError::Parameter(format!("lambda must exceed 1, got {lambda}")));
    }
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(ModelError::Parameter(format!("{name} must be positive, got {sigma}")));
    }
    Ok(())
}

fn check_sum(a: f64, b: f64, c: f64) -> Result<(), ModelError> {
    let scale = a.abs().max(b.abs()).max(c.abs()).max(1.0);
    if !(a + b + c).is_finite() || (a + b + c).abs() > ALGEBRA_TOL * scale {
        return Err(ModelError::Parameter(format!(
            "a + b + c must vanish, got a + b + c = {:e}",
            a + b + c
        )));
    }
    Ok(())
}

fn two_by_two_table(
    a: f64,
    c: f64,
    lambda: f64,
    sigma: f64,
    maps: [BilinearMap; 4],
    preset: Preset,
) -> ModelSpec {
    let s2 = std::f64::consts::SQRT_2;
    let li = 1.0 / lambda;
    let [m1, m2, m3, m4] = maps;
    ModelSpec {
        d: 2,
        lambda,
        sigma,
        interactions: vec![
            Interaction::new("1", 1, 2, s2 * a, m1),
            Interaction::new("2", -1, -2, s2 * li * li * c, m2),
            Interaction::new("3", -1, 1, -s2 * li * a, m3),
            Interaction::new("4", 1, -1, -s2 * li * c, m4),
        ],
        pairing: vec![2, 3, 0, 1],
        istar: vec![0, 1],
        preset: Some(preset),
    }
}

/// Real form of the stochastic GOY model.
pub fn build_goy(a: f64, b: f64, c: f64, lambda: f64, sigma_tilde: f64) -> Result<ModelSpec, ModelError> {
    check_common(lambda, sigma_tilde, "sigma_tilde")?;
    check_sum(a, b, c)?;
    let norm = (a * a + c * c / (lambda * lambda)).sqrt();
    if norm == 0.0 {
        return Err(ModelError::Parameter(
            "(a, c) = (0, 0) makes the noise normalization sqrt(a^2 + c^2/lambda^2) vanish".into(),
        ));
    }
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let m = BilinearMap::from_fn(2, |x, y, z| match x + y + z + 3 {
        4 => h,
        6 => -h,
        _ => 0.0,
    });
    let preset = Preset::Goy {
        a,
        b,
        c,
        lambda,
        sigma_tilde,
    };
    let spec = two_by_two_table(
        a,
        c,
        lambda,
        sigma_tilde / norm,
        [m.clone(), m.clone(), m.clone(), m],
        preset,
    );
    validate_model(&spec)?.into_result()?;
    Ok(spec)
}

fn sabra_map(negative: (usize, usize, usize)) -> BilinearMap {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    BilinearMap::from_fn(2, |x, y, z| {
        if (x + y + z) % 2 == 0 {
            0.0
        } else if (x, y, z) == negative {
            -h
        } else {
            h
        }
    })
}

/// Real form of the stochastic Sabra model.
pub fn build_sabra(
    a: f64,
    b: f64,
    c: f64,
    lambda: f64,
    sigma1_tilde: f64,
    sigma2_tilde: f64,
) -> Result<ModelSpec, ModelError> {
    check_common(lambda, sigma1_tilde, "sigma1_tilde")?;
    check_common(lambda, sigma2_tilde, "sigma2_tilde")?;
    check_sum(a, b, c)?;
    if a == 0.0 || c == 0.0 {
        return Err(ModelError::Parameter("Sabra noise needs a != 0 and c != 0".into()));
    }
    let required = lambda * a / c;
    let ratio = sigma1_tilde / sigma2_tilde;
    if !rel_close(ratio, required, ALGEBRA_TOL) {
        return Err(ModelError::Parameter(format!(
            "sigma1_tilde / sigma2_tilde must equal lambda a / c = {required}, got {ratio}"
        )));
    }
    let sigma = sigma1_tilde / a;
    if sigma <= 0.0 {
        return Err(ModelError::Parameter(format!(
            "sigma = sigma1_tilde / a must be positive, got {sigma}"
        )));
    }
    // Zero-based (x, y, z); the odd-sum test above is the even one-based sum.
    let m13 = sabra_map((0, 0, 1));
    let m2 = sabra_map((1, 0, 0));
    let m4 = sabra_map((0, 1, 0));
    let preset = Preset::Sabra {
        a,
        b,
        c,
        lambda,
        sigma1_tilde,
        sigma2_tilde,
    };
    let spec = two_by_two_table(a, c, lambda, sigma, [m13.clone(), m2, m13, m4], preset);
    validate_model(&spec)?.into_result()?;
    Ok(spec)
}

/// Scalar stochastic Novikov-type model.
pub fn build_novikov(lambda: f64, sigma: f64) -> Result<ModelSpec, ModelError> {
    check_common(lambda, sigma, "sigma")?;
    let spec = ModelSpec {
        d: 1,
        lambda,
        sigma,
        interactions: vec![
            Interaction::new("1", -1, -1, 1.0 / lambda, BilinearMap::scalar()),
            Interaction::new("2", 1, 0, -1.0, BilinearMap::scalar()),
        ],
        pairing: vec![1, 0],
        istar: vec![0],
        preset: Some(Preset::Novikov { lambda, sigma }),
    };
    validate_model(&spec)?.into_result()?;
    Ok(spec)
}

pub fn embed_complex(u: &[Complex64]) -> Vec<[f64; 2]> {
    u.iter().map(|z| [z.re, z.im]).collect()
}

pub fn lift_real(x: &[[f64; 2]]) -> Vec<Complex64> {
    x.iter().map(|p| Complex64::new(p[0], p[1])).collect()
}
