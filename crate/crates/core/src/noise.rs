//! Brownian increments for a truncated model.
//!
//! Only interactions in `I*` own randomness. A lookup for any other
//! interaction resolves to its partner's values, so aliased families are
//! identical bit for bit.

use num_complex::Complex64;
use rand_distr::{Distribution, StandardNormal};

use crate::algebra::{ModelSpec, Preset};
use crate::error::NoiseError;
use crate::rng::{keyed_rng, Domain};

pub const DEFAULT_MAX_SHELLS: usize = 1024;

/// Identifies the randomness of one time step of one path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NoiseKey {
    pub seed: u64,
    pub path: u64,
    pub step: u64,
}

impl NoiseKey {
    pub fn new(seed: u64, path: u64, step: u64) -> Self {
        Self { seed, path, step }
    }
}

/// Shape of the increments touched by shells `1..=N`.
#[derive(Debug, Clone, PartialEq)]
pub struct SlabLayout {
    pub d: usize,
    pub lo: i64,
    pub hi: i64,
    roots: usize,
    root_of: Vec<usize>,
}

impl SlabLayout {
    pub fn new(spec: &ModelSpec, shells: usize, max_shells: usize) -> Result<Self, NoiseError> {
        spec.check_structure()?;
        if shells == 0 || shells > max_shells {
            return Err(NoiseError::WindowOverflow {
                requested: shells,
                max: max_shells,
            });
        }
        let hbar = spec.max_h().max(0);
        let root_of = (0..spec.len())
            .map(|i| {
                spec.noise_root(i).ok_or_else(|| {
                    crate::error::ModelError::Structural(format!(
                        "interaction {} has no noise owner in I*",
                        spec.interactions[i].id
                    ))
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self {
            d: spec.d,
            lo: 1 - hbar,
            hi: shells as i64 + hbar,
            roots: spec.istar.len(),
            root_of,
        })
    }

    pub fn width(&self) -> usize {
        (self.hi - self.lo + 1) as usize
    }

    pub fn len(&self) -> usize {
        self.roots * self.width() * self.d
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn zeros(&self, dt: f64) -> NoiseSlab {
        NoiseSlab {
            layout: self.clone(),
            dt,
            values: vec![0.0; self.len()],
        }
    }

    pub fn sample(&self, dt: f64, key: NoiseKey) -> NoiseSlab {
        let mut slab = self.zeros(dt);
        self.refill(&mut slab, dt, key);
        slab
    }

    /// Overwrites `slab` with fresh increments for `key`.
    pub fn refill(&self, slab: &mut NoiseSlab, dt: f64, key: NoiseKey) {
        debug_assert_eq!(slab.values.len(), self.len());
        let mut rng = keyed_rng(Domain::Noise, key.seed, key.path, key.step);
        let s = dt.sqrt();
        for v in slab.values.iter_mut() {
            let z: f64 = StandardNormal.sample(&mut rng);
            *v = s * z;
        }
        slab.dt = dt;
    }
}

/// Increments `Delta W_{i,m}` for one step.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSlab {
    layout: SlabLayout,
    pub dt: f64,
    values: Vec<f64>,
}

impl NoiseSlab {
    pub fn layout(&self) -> &SlabLayout {
        &self.layout
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    fn offset(&self, root: usize, m: i64) -> usize {
        (root * self.layout.width() + (m - self.layout.lo) as usize) * self.layout.d
    }

    fn check(&self, m: i64) -> Result<(), NoiseError> {
        if m < self.layout.lo || m > self.layout.hi {
            Err(NoiseError::OutOfWindow {
                shell: m,
                lo: self.layout.lo,
                hi: self.layout.hi,
            })
        } else {
            Ok(())
        }
    }

    /// Increment of interaction `i` at noise shell `m`.
    pub fn lookup(&self, i: usize, m: i64) -> Result<&[f64], NoiseError> {
        self.check(m)?;
        let o = self.offset(self.layout.root_of[i], m);
        Ok(&self.values[o..o + self.layout.d])
    }

    /// Unchecked variant for hot loops; `root` indexes `I*`.
    #[inline]
    pub fn root_values(&self, root: usize, m: i64) -> &[f64] {
        let o = self.offset(root, m);
        &self.values[o..o + self.layout.d]
    }

    pub fn set(&mut self, i: usize, m: i64, v: &[f64]) -> Result<(), NoiseError> {
        self.check(m)?;
        let o = self.offset(self.layout.root_of[i], m);
        let d = self.layout.d;
        self.values[o..o + d].copy_from_slice(&v[..d]);
        Ok(())
    }
}

/// Convenience wrapper around [`SlabLayout::sample`].
pub fn sample_slab(spec: &ModelSpec, shells: usize, dt: f64, key: NoiseKey) -> Result<NoiseSlab, NoiseError> {
    Ok(SlabLayout::new(spec, shells, DEFAULT_MAX_SHELLS)?.sample(dt, key))
}

/// Which real increments feed the complex GOY increment at low shells.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BridgeVariant {
    /// Both `W_{1,n+2}` and `W_{2,n-1}`.
    Full,
    /// Drops `W_{2,n-1}` when `n - 1 <= 0`, matching the increments the
    /// real model actually consumes.
    Active,
}

fn goy_params(spec: &ModelSpec) -> Result<(f64, f64, f64), NoiseError> {
    match spec.preset {
        Some(Preset::Goy { a, c, lambda, .. }) => Ok((a, c, lambda)),
        _ => Err(NoiseError::NotGoy),
    }
}

fn mix(a: f64, c: f64, lambda: f64, w1: &[f64], w2: Option<&[f64]>) -> Complex64 {
    let lc = c / lambda;
    let norm = (a * a + lc * lc).sqrt();
    let (r2, i2) = w2.map_or((0.0, 0.0), |w| (w[0], w[1]));
    Complex64::new((a * w1[0] - lc * r2) / norm, -(a * w1[1] - lc * i2) / norm)
}

/// Complex increment `dw_n` assembled from the real family.
pub fn goy_noise_bridge(
    spec: &ModelSpec,
    slab: &NoiseSlab,
    n: i64,
    variant: BridgeVariant,
) -> Result<Complex64, NoiseError> {
    let (a, c, lambda) = goy_params(spec)?;
    let w1 = slab.lookup(0, n + 2)?;
    let w2 = if variant == BridgeVariant::Active && n - 1 < 1 {
        None
    } else {
        Some(slab.lookup(1, n - 1)?)
    };
    Ok(mix(a, c, lambda, w1, w2))
}

/// Orthogonal complement of [`goy_noise_bridge`] in the span of
/// `(W_{1,n+2}, W_{2,n-1})`.
pub fn goy_noise_complement(spec: &ModelSpec, slab: &NoiseSlab, n: i64) -> Result<Complex64, NoiseError> {
    let (a, c, lambda) = goy_params(spec)?;
    let w1 = slab.lookup(0, n + 2)?;
    let w2 = slab.lookup(1, n - 1)?;
    let lc = c / lambda;
    let norm = (a * a + lc * lc).sqrt();
    Ok(Complex64::new(
        (lc * w1[0] + a * w2[0]) / norm,
        -(lc * w1[1] + a * w2[1]) / norm,
    ))
}

/// Inverse of the bridge: recovers `(W_{1,n+2}, W_{2,n-1})` from the
/// increment and its complement.
pub fn goy_noise_split(spec: &ModelSpec, dw: Complex64, complement: Complex64) -> Result<([f64; 2], [f64; 2]), NoiseError> {
    let (a, c, lambda) = goy_params(spec)?;
    let lc = c / lambda;
    let norm = (a * a + lc * lc).sqrt();
    let (wr, wi) = (dw.re, -dw.im);
    let (cr, ci) = (complement.re, -complement.im);
    let w1 = [(a * wr + lc * cr) / norm, (a * wi + lc * ci) / norm];
    let w2 = [(-lc * wr + a * cr) / norm, (-lc * wi + a * ci) / norm];
    Ok((w1, w2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{build_goy, build_novikov};

    #[test]
    fn aliased_lookup_is_identical() {
        let s = build_goy(1.0, -1.5, 0.5, 2.0, 1.0).unwrap();
        let slab = sample_slab(&s, 6, 1e-3, NoiseKey::new(9, 1, 2)).unwrap();
        for i in 0..4 {
            let j = s.pairing[i];
            for m in slab.layout().lo..=slab.layout().hi {
                assert_eq!(slab.lookup(i, m).unwrap(), slab.lookup(j, m).unwrap());
            }
        }
    }

    #[test]
    fn deterministic_and_windowed() {
        let s = build_novikov(2.0, 1.0).unwrap();
        let a = sample_slab(&s, 5, 0.01, NoiseKey::new(3, 4, 5)).unwrap();
        let b = sample_slab(&s, 5, 0.01, NoiseKey::new(3, 4, 5)).unwrap();
        assert_eq!(a, b);
        assert_eq!((a.layout().lo, a.layout().hi), (1, 5));
        assert!(a.lookup(0, 6).is_err());
        assert!(matches!(
            SlabLayout::new(&s, 2000, DEFAULT_MAX_SHELLS),
            Err(NoiseError::WindowOverflow { .. })
        ));
    }

    #[test]
    fn bridge_with_zero_c_uses_first_family_only() {
        let s = build_goy(1.0, -1.0, 0.0, 2.0, 1.0).unwrap();
        let mut slab = sample_slab(&s, 4, 0.01, NoiseKey::new(1, 1, 1)).unwrap();
        let before = goy_noise_bridge(&s, &slab, 2, BridgeVariant::Full).unwrap();
        slab.set(1, 1, &[5.0, -7.0]).unwrap();
        let after = goy_noise_bridge(&s, &slab, 2, BridgeVariant::Full).unwrap();
        assert_eq!(before, after);
        let w1 = slab.lookup(0, 4).unwrap();
        assert_eq!(after, Complex64::new(w1[0], -w1[1]));
    }

    #[test]
    fn split_inverts_bridge() {
        let s = build_goy(1.0, -1.5, 0.5, 2.0, 1.0).unwrap();
        let slab = sample_slab(&s, 5, 0.3, NoiseKey::new(2, 0, 0)).unwrap();
        for n in 1..=4 {
            let dw = goy_noise_bridge(&s, &slab, n, BridgeVariant::Full).unwrap();
            let cw = goy_noise_complement(&s, &slab, n).unwrap();
            let (w1, w2) = goy_noise_split(&s, dw, cw).unwrap();
            let (e1, e2) = (slab.lookup(0, n + 2).unwrap(), slab.lookup(1, n - 1).unwrap());
            for k in 0..2 {
                assert!((w1[k] - e1[k]).abs() < 1e-14);
                assert!((w2[k] - e2[k]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn active_bridge_drops_unused_low_increment() {
        let s = build_goy(1.0, -1.5, 0.5, 2.0, 1.0).unwrap();
        let mut slab = sample_slab(&s, 4, 0.01, NoiseKey::new(1, 2, 3)).unwrap();
        let a = goy_noise_bridge(&s, &slab, 1, BridgeVariant::Active).unwrap();
        slab.set(1, 0, &[3.0, 3.0]).unwrap();
        assert_eq!(a, goy_noise_bridge(&s, &slab, 1, BridgeVariant::Active).unwrap());
        assert_ne!(a, goy_noise_bridge(&s, &slab, 1, BridgeVariant::Full).unwrap());
    }
}
