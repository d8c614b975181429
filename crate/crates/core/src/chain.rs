//! Continuous-time jump chain on the shell levels, simulated through its
//! embedded chain and exponential holding times.

use std::collections::BTreeMap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::algebra::ModelSpec;
use crate::error::ChainError;
use crate::moments::expected_visits;
use crate::rng::{keyed_rng, Domain};

const BLOCK: usize = 256;

/// Walker alias table over level offsets.
#[derive(Debug, Clone, PartialEq)]
struct AliasRow {
    offsets: Vec<i64>,
    prob: Vec<f64>,
    alias: Vec<usize>,
}

impl AliasRow {
    fn new(weights: &BTreeMap<i64, f64>) -> Option<Self> {
        let total: f64 = weights.values().sum();
        if !(total > 0.0) {
            return None;
        }
        let offsets: Vec<i64> = weights.keys().copied().collect();
        let k = offsets.len();
        let mut scaled: Vec<f64> = weights.values().map(|w| w / total * k as f64).collect();
        let mut prob = vec![1.0; k];
        let mut alias: Vec<usize> = (0..k).collect();
        let (mut small, mut large): (Vec<usize>, Vec<usize>) = (0..k).partition(|&i| scaled[i] < 1.0);
        while let (Some(s), Some(&l)) = (small.pop(), large.last()) {
            prob[s] = scaled[s];
            alias[s] = l;
            scaled[l] -= 1.0 - scaled[s];
            if scaled[l] < 1.0 {
                large.pop();
                small.push(l);
            }
        }
        Some(Self { offsets, prob, alias })
    }

    #[inline]
    fn sample(&self, rng: &mut ChaCha8Rng) -> i64 {
        let k = self.offsets.len();
        let u: f64 = rng.random::<f64>() * k as f64;
        let idx = (u as usize).min(k - 1);
        let frac = u - idx as f64;
        if frac < self.prob[idx] {
            self.offsets[idx]
        } else {
            self.offsets[self.alias[idx]]
        }
    }
}

/// Limits that turn an unbounded walk into a finite computation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Caps {
    pub max_jumps: u64,
    pub max_level: usize,
}

impl Default for Caps {
    fn default() -> Self {
        Self {
            max_jumps: 10_000_000,
            max_level: 60,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Alive,
    ExplodedLevelCap,
    ExplodedJumpCap,
    Absorbed,
}

impl Status {
    pub fn exploded(&self) -> bool {
        matches!(self, Status::ExplodedLevelCap | Status::ExplodedJumpCap)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChainTrajectory {
    pub times: Vec<f64>,
    pub positions: Vec<usize>,
    pub status: Status,
    /// Time the walk was declared exploded, if it was.
    pub explosion_time: Option<f64>,
}

/// Jump chain of a model: rows for levels below the stabilisation index
/// and one shared row above it.
#[derive(Debug, Clone)]
pub struct JumpChain {
    spec: ModelSpec,
    n0: usize,
    low_rows: Vec<Option<AliasRow>>,
    stationary: Option<AliasRow>,
}

fn row_weights(spec: &ModelSpec, n: i64) -> BTreeMap<i64, f64> {
    let mut w = BTreeMap::new();
    for (i, it) in spec.interactions.iter().enumerate() {
        if spec.is_active(i, n) && it.r != 0 && it.k != 0.0 {
            *w.entry(it.r).or_insert(0.0) += it.k * it.k;
        }
    }
    w
}

impl JumpChain {
    pub fn new(spec: &ModelSpec) -> Result<Self, ChainError> {
        spec.check_structure()?;
        spec.require_identity_grams()?;
        let n0 = spec.n0().max(1) as usize;
        let low_rows = (1..n0).map(|n| AliasRow::new(&row_weights(spec, n as i64))).collect();
        let stationary = AliasRow::new(&row_weights(spec, n0 as i64));
        Ok(Self {
            spec: spec.clone(),
            n0,
            low_rows,
            stationary,
        })
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn n0(&self) -> usize {
        self.n0
    }

    fn row(&self, n: usize) -> Option<&AliasRow> {
        if n < self.n0 {
            self.low_rows[n - 1].as_ref()
        } else {
            self.stationary.as_ref()
        }
    }

    /// `pi_n`.
    pub fn rate(&self, n: usize) -> f64 {
        self.spec.total_rate(n as i64)
    }

    /// Next embedded position, or `None` when level `n` has no exits.
    pub fn embedded_step(&self, n: usize, rng: &mut ChaCha8Rng) -> Option<usize> {
        assert!(n >= 1, "levels start at 1");
        let r = self.row(n)?.sample(rng);
        Some((n as i64 + r) as usize)
    }

    /// Exact transition probabilities out of level `n`.
    pub fn transition_row(&self, n: usize) -> BTreeMap<usize, f64> {
        let w = row_weights(&self.spec, n as i64);
        let total: f64 = w.values().sum();
        w.into_iter()
            .map(|(r, v)| ((n as i64 + r) as usize, v / total))
            .collect()
    }

    fn holding(&self, n: usize, rng: &mut ChaCha8Rng) -> f64 {
        let u: f64 = rng.random::<f64>();
        -(1.0 - u).ln() / self.rate(n)
    }
}

fn sample_start(start: &[f64], rng: &mut ChaCha8Rng) -> usize {
    let total: f64 = start.iter().sum();
    let mut u = rng.random::<f64>() * total;
    for (j, p) in start.iter().enumerate() {
        if u < *p {
            return j + 1;
        }
        u -= p;
    }
    start.iter().rposition(|p| *p > 0.0).map_or(1, |j| j + 1)
}

fn check_start(start: &[f64]) -> Result<(), ChainError> {
    let ok = start.iter().all(|p| p.is_finite() && *p >= 0.0) && start.iter().sum::<f64>() > 0.0;
    if ok {
        Ok(())
    } else {
        Err(ChainError::BadStart)
    }
}

/// Walks until the horizon or a cap, feeding `(jump time, new level)`.
fn walk(
    chain: &JumpChain,
    start: usize,
    horizon: f64,
    caps: Caps,
    rng: &mut ChaCha8Rng,
    mut visit: impl FnMut(f64, usize),
) -> (Status, Option<f64>) {
    let mut n = start;
    let mut t = 0.0;
    let mut jumps = 0u64;
    visit(0.0, n);
    if n > caps.max_level {
        return (Status::ExplodedLevelCap, Some(0.0));
    }
    loop {
        let rate = chain.rate(n);
        if chain.row(n).is_none() || rate <= 0.0 {
            return (Status::Absorbed, None);
        }
        let next_t = t + chain.holding(n, rng);
        if next_t > horizon {
            return (Status::Alive, None);
        }
        if jumps >= caps.max_jumps {
            return (Status::ExplodedJumpCap, Some(next_t));
        }
        t = next_t;
        jumps += 1;
        n = chain.embedded_step(n, rng).expect("row checked above");
        visit(t, n);
        if n > caps.max_level {
            return (Status::ExplodedLevelCap, Some(t));
        }
    }
}

pub fn simulate_chain(
    chain: &JumpChain,
    start_dist: &[f64],
    horizon: f64,
    caps: Caps,
    rng: &mut ChaCha8Rng,
) -> Result<ChainTrajectory, ChainError> {
    check_start(start_dist)?;
    let start = sample_start(start_dist, rng);
    let mut times = Vec::new();
    let mut positions = Vec::new();
    let (status, explosion_time) = walk(chain, start, horizon, caps, rng, |t, n| {
        times.push(t);
        positions.push(n);
    });
    Ok(ChainTrajectory {
        times,
        positions,
        status,
        explosion_time,
    })
}

/// Offsets and their probabilities for levels where every interaction is
/// active, with the mean offset.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IncrementDistribution {
    pub q: BTreeMap<i64, f64>,
    pub drift: f64,
}

pub fn increment_distribution(spec: &ModelSpec) -> IncrementDistribution {
    let mut q = BTreeMap::new();
    let total: f64 = spec.interactions.iter().map(|it| it.k * it.k).sum();
    for it in &spec.interactions {
        *q.entry(it.r).or_insert(0.0) += it.k * it.k / total;
    }
    let drift = q.iter().map(|(r, p)| *r as f64 * p).sum();
    IncrementDistribution { q, drift }
}

/// Empirical mean of embedded increments taken from levels `>= n0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DriftEstimate {
    pub mean: f64,
    pub se: f64,
    pub steps: u64,
}

pub fn empirical_drift(chain: &JumpChain, steps: u64, seed: u64) -> DriftEstimate {
    let mut rng = keyed_rng(Domain::Chain, seed, u64::MAX, 0);
    let mut n = chain.n0();
    let (mut s, mut s2, mut count) = (0.0, 0.0, 0u64);
    for _ in 0..steps {
        let Some(m) = chain.embedded_step(n, &mut rng) else {
            break;
        };
        if n >= chain.n0() {
            let inc = m as f64 - n as f64;
            s += inc;
            s2 += inc * inc;
            count += 1;
        }
        n = m;
    }
    let c = count.max(1) as f64;
    let mean = s / c;
    let var = if count > 1 { (s2 - s * mean) / (c - 1.0) } else { 0.0 };
    DriftEstimate {
        mean,
        se: (var.max(0.0) / c).sqrt(),
        steps: count,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SurvivalCurve {
    pub times: Vec<f64>,
    pub survival: Vec<f64>,
    pub se: Vec<f64>,
    /// `occupancy[j][n-1]` estimates `P(xi_{t_j} = n)` for `n <= max_level`.
    pub occupancy: Vec<Vec<f64>>,
    pub replicates: usize,
    pub exploded: usize,
    pub jump_cap_hits: usize,
    pub absorbed: usize,
    /// Upper estimate of the expected time still needed to reach infinity
    /// from above the level cap.
    pub residual_time_bound: f64,
    pub caps: Caps,
}

impl SurvivalCurve {
    /// Binomial standard error of an occupancy estimate.
    pub fn occupancy_se(&self, j: usize, n: usize) -> f64 {
        let p = self.occupancy[j][n - 1];
        (p * (1.0 - p) / self.replicates as f64).sqrt()
    }
}

#[derive(Debug, Clone)]
struct Counts {
    alive: Vec<u64>,
    occ: Vec<u64>,
    exploded: usize,
    jump_cap: usize,
    absorbed: usize,
}

impl Counts {
    fn new(points: usize, levels: usize) -> Self {
        Self {
            alive: vec![0; points],
            occ: vec![0; points * levels],
            exploded: 0,
            jump_cap: 0,
            absorbed: 0,
        }
    }

    fn merge(mut self, o: Counts) -> Counts {
        self.alive.iter_mut().zip(&o.alive).for_each(|(a, b)| *a += b);
        self.occ.iter_mut().zip(&o.occ).for_each(|(a, b)| *a += b);
        self.exploded += o.exploded;
        self.jump_cap += o.jump_cap;
        self.absorbed += o.absorbed;
        self
    }
}

/// Sum over levels above `level` of `E[V_n | V_n > 0] / pi_n`.
pub fn residual_time_bound(spec: &ModelSpec, level: usize) -> Result<f64, ChainError> {
    const WINDOW: usize = 20;
    let visits = expected_visits(spec, level + 2 * WINDOW)?;
    let mut sum = 0.0;
    for n in level + 1..=level + WINDOW {
        sum += visits[n - 1] / spec.total_rate(n as i64);
    }
    let last = level + WINDOW;
    let g = visits[last - 1];
    let q = spec.total_rate(last as i64) / spec.total_rate(last as i64 + 1);
    if q < 1.0 {
        sum += g / spec.total_rate(last as i64) * q / (1.0 - q);
    } else {
        sum = f64::INFINITY;
    }
    Ok(sum)
}

/// Monte Carlo survival `P(tau > t)` and level occupancy on a time grid.
pub fn survival_curve(
    chain: &JumpChain,
    start_dist: &[f64],
    tgrid: &[f64],
    replicates: usize,
    caps: Caps,
    seed: u64,
) -> Result<SurvivalCurve, ChainError> {
    check_start(start_dist)?;
    if !(tgrid.iter().all(|t| t.is_finite() && *t >= 0.0) && tgrid.windows(2).all(|w| w[0] <= w[1])) {
        return Err(ChainError::BadGrid);
    }
    let points = tgrid.len();
    let levels = caps.max_level;
    let horizon = tgrid.last().copied().unwrap_or(0.0);
    let blocks = replicates.div_ceil(BLOCK);
    let counts = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut c = Counts::new(points, levels);
            for rep in b * BLOCK..((b + 1) * BLOCK).min(replicates) {
                let mut rng = keyed_rng(Domain::Chain, seed, rep as u64, 0);
                let start = sample_start(start_dist, &mut rng);
                let mut j = 0;
                let mut current = start;
                let (status, texp) = walk(chain, start, horizon, caps, &mut rng, |t, n| {
                    while j < points && tgrid[j] < t {
                        if current <= levels {
                            c.alive[j] += 1;
                            c.occ[j * levels + current - 1] += 1;
                        }
                        j += 1;
                    }
                    current = n;
                });
                let cutoff = texp.unwrap_or(f64::INFINITY);
                while j < points {
                    let alive = !status.exploded() || tgrid[j] < cutoff;
                    if alive && current <= levels {
                        c.alive[j] += 1;
                        c.occ[j * levels + current - 1] += 1;
                    }
                    j += 1;
                }
                match status {
                    Status::ExplodedLevelCap => c.exploded += 1,
                    Status::ExplodedJumpCap => {
                        c.exploded += 1;
                        c.jump_cap += 1;
                    }
                    Status::Absorbed => c.absorbed += 1,
                    Status::Alive => {}
                }
            }
            c
        })
        .collect::<Vec<_>>()
        .into_iter()
        .reduce(Counts::merge)
        .unwrap_or_else(|| Counts::new(points, levels));
    let r = replicates.max(1) as f64;
    let survival: Vec<f64> = counts.alive.iter().map(|&a| a as f64 / r).collect();
    let se = survival.iter().map(|p| (p * (1.0 - p) / r).sqrt()).collect();
    let occupancy = (0..points)
        .map(|j| (0..levels).map(|n| counts.occ[j * levels + n] as f64 / r).collect())
        .collect();
    Ok(SurvivalCurve {
        times: tgrid.to_vec(),
        survival,
        se,
        occupancy,
        replicates,
        exploded: counts.exploded,
        jump_cap_hits: counts.jump_cap,
        absorbed: counts.absorbed,
        residual_time_bound: residual_time_bound(chain.spec(), levels)?,
        caps,
    })
}

/// Visit counts `V_n = #{k >= 1 : zeta_k = n}` of the embedded chain killed
/// above level `N`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VisitStats {
    pub shells: usize,
    pub replicates: usize,
    /// Replicates with `V_n > 0`.
    pub reached: Vec<u64>,
    /// `E[V_n | V_n > 0]`.
    pub mean: Vec<f64>,
    pub se: Vec<f64>,
    /// `histogram[n-1][v]` counts replicates with `V_n = v` (last bin is
    /// `>=`).
    pub histogram: Vec<Vec<u64>>,
}

impl VisitStats {
    /// `P(V_n > k+1 | V_n > k)` with its binomial standard error.
    pub fn tail_ratio(&self, n: usize, k: usize) -> Option<(f64, f64)> {
        let h = &self.histogram[n - 1];
        let above = |k: usize| -> u64 { h.iter().skip(k + 1).sum() };
        let denom = above(k);
        if denom == 0 || k + 2 >= h.len() {
            return None;
        }
        let p = above(k + 1) as f64 / denom as f64;
        Some((p, (p * (1.0 - p) / denom as f64).sqrt()))
    }
}

pub const VISIT_BINS: usize = 64;

pub fn visit_statistics(
    chain: &JumpChain,
    shells: usize,
    replicates: usize,
    start_level: usize,
    seed: u64,
) -> VisitStats {
    let blocks = replicates.div_ceil(BLOCK);
    let parts: Vec<(Vec<u64>, Vec<f64>, Vec<f64>, Vec<u64>)> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut reached = vec![0u64; shells];
            let mut s = vec![0.0; shells];
            let mut s2 = vec![0.0; shells];
            let mut hist = vec![0u64; shells * VISIT_BINS];
            let mut v = vec![0u64; shells];
            for rep in b * BLOCK..((b + 1) * BLOCK).min(replicates) {
                let mut rng = keyed_rng(Domain::Chain, seed, rep as u64, 1);
                v.iter_mut().for_each(|x| *x = 0);
                let mut n = start_level;
                while let Some(m) = chain.embedded_step(n, &mut rng) {
                    if m > shells {
                        break;
                    }
                    v[m - 1] += 1;
                    n = m;
                }
                for (j, &c) in v.iter().enumerate() {
                    hist[j * VISIT_BINS + (c as usize).min(VISIT_BINS - 1)] += 1;
                    if c > 0 {
                        reached[j] += 1;
                        s[j] += c as f64;
                        s2[j] += (c * c) as f64;
                    }
                }
            }
            (reached, s, s2, hist)
        })
        .collect();
    let mut reached = vec![0u64; shells];
    let mut s = vec![0.0; shells];
    let mut s2 = vec![0.0; shells];
    let mut hist = vec![0u64; shells * VISIT_BINS];
    for (r, a, b, h) in parts {
        reached.iter_mut().zip(r).for_each(|(x, y)| *x += y);
        s.iter_mut().zip(a).for_each(|(x, y)| *x += y);
        s2.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        hist.iter_mut().zip(h).for_each(|(x, y)| *x += y);
    }
    let mut mean = vec![f64::NAN; shells];
    let mut se = vec![f64::NAN; shells];
    for j in 0..shells {
        let c = reached[j] as f64;
        if c > 0.0 {
            mean[j] = s[j] / c;
            let var = if c > 1.0 { (s2[j] - s[j] * mean[j]) / (c - 1.0) } else { 0.0 };
            se[j] = (var.max(0.0) / c).sqrt();
        }
    }
    VisitStats {
        shells,
        replicates,
        reached,
        mean,
        se,
        histogram: (0..shells).map(|j| hist[j * VISIT_BINS..(j + 1) * VISIT_BINS].to_vec()).collect(),
    }
}

/// Medians of the jump count and time needed to first exceed each level.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PassageStats {
    pub levels: Vec<usize>,
    pub median_jumps: Vec<f64>,
    pub median_time: Vec<f64>,
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.total_cmp(b));
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

pub fn passage_statistics(chain: &JumpChain, levels: &[usize], replicates: usize, start_level: usize, seed: u64) -> PassageStats {
    let top = levels.iter().copied().max().unwrap_or(0);
    let per_rep: Vec<(Vec<f64>, Vec<f64>)> = (0..replicates)
        .into_par_iter()
        .map(|rep| {
            let mut rng = keyed_rng(Domain::Chain, seed, rep as u64, 2);
            let mut jumps = vec![f64::NAN; levels.len()];
            let mut times = vec![f64::NAN; levels.len()];
            let mut n = start_level;
            let (mut t, mut k) = (0.0, 0u64);
            while n <= top {
                t += chain.holding(n, &mut rng);
                k += 1;
                let Some(m) = chain.embedded_step(n, &mut rng) else {
                    break;
                };
                n = m;
                for (idx, &l) in levels.iter().enumerate() {
                    if n > l && jumps[idx].is_nan() {
                        jumps[idx] = k as f64;
                        times[idx] = t;
                    }
                }
            }
            (jumps, times)
        })
        .collect();
    let col = |sel: fn(&(Vec<f64>, Vec<f64>)) -> &Vec<f64>, idx: usize| -> f64 {
        median(per_rep.iter().map(|r| sel(r)[idx]).filter(|v| !v.is_nan()).collect())
    };
    PassageStats {
        levels: levels.to_vec(),
        median_jumps: (0..levels.len()).map(|i| col(|r| &r.0, i)).collect(),
        median_time: (0..levels.len()).map(|i| col(|r| &r.1, i)).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{build_goy, build_novikov};

    #[test]
    fn novikov_rows() {
        let ch = JumpChain::new(&build_novikov(2.0, 1.0).unwrap()).unwrap();
        let r1 = ch.transition_row(1);
        assert_eq!(r1.len(), 1);
        assert_eq!(r1[&2], 1.0);
        let r = ch.transition_row(5);
        assert!((r[&6] - 0.8).abs() < 1e-15);
        assert!((r[&4] - 0.2).abs() < 1e-15);
    }

    #[test]
    fn increment_drifts() {
        let inc = increment_distribution(&build_novikov(2.0, 1.0).unwrap());
        assert!((inc.q[&1] - 0.8).abs() < 1e-15 && (inc.q[&-1] - 0.2).abs() < 1e-15);
        assert!((inc.drift - 0.6).abs() < 1e-15);
        let goy = increment_distribution(&build_goy(1.0, -1.5, 0.5, 2.0, 1.0).unwrap());
        assert!((goy.drift - 0.6).abs() < 1e-15);
        assert!((goy.q.values().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn survival_starts_at_one() {
        let ch = JumpChain::new(&build_novikov(2.0, 1.0).unwrap()).unwrap();
        let c = survival_curve(&ch, &[1.0], &[0.0, 0.5], 500, Caps::default(), 1).unwrap();
        assert_eq!(c.survival[0], 1.0);
        assert_eq!(c.occupancy[0][0], 1.0);
    }

    #[test]
    fn zero_rate_row_absorbs() {
        let mut s = build_novikov(2.0, 1.0).unwrap();
        s.interactions[1].k = 0.0;
        s.interactions[0].k = 0.0;
        let ch = JumpChain::new(&s).unwrap();
        let mut rng = keyed_rng(Domain::Aux, 0, 0, 0);
        let tr = simulate_chain(&ch, &[1.0], 1.0, Caps::default(), &mut rng).unwrap();
        assert_eq!(tr.status, Status::Absorbed);
    }
}
