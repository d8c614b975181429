use serde::Serialize;

use crate::algebra::ModelSpec;
use crate::error::{ModelError, MomentError};

/// Truncated rate matrix of the second-moment equation on levels `1..=N`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QMatrix {
    pub shells: usize,
    pub sigma: f64,
    /// Row-major `N x N`: `pi_{n,m}` off the diagonal, `-pi_n` on it.
    pub entries: Vec<f64>,
    /// `pi_n` for `n = 1..=N`.
    pub total: Vec<f64>,
    /// Rate leaking past the truncation from each row.
    pub escape: Vec<f64>,
    /// Largest relative gap between `pi_{n,m}` and `pi_{m,n}` before the
    /// upper triangle was mirrored.
    pub raw_asymmetry: f64,
}

impl QMatrix {
    #[inline]
    pub fn rate(&self, n: usize, m: usize) -> f64 {
        self.entries[(n - 1) * self.shells + (m - 1)]
    }

    /// Whether row `n` leaks rate past the truncation.
    pub fn is_boundary_row(&self, n: usize) -> bool {
        self.escape[n - 1] > 1e-12 * self.total[n - 1]
    }

    pub fn row_sum(&self, n: usize) -> f64 {
        self.entries[(n - 1) * self.shells..n * self.shells].iter().sum()
    }
}

/// Builds the rate matrix; needs every `L_i` to be the identity.
pub fn build_qmatrix(spec: &ModelSpec, shells: usize) -> Result<QMatrix, MomentError> {
    spec.check_structure()?;
    let bad = spec.non_identity_grams();
    if !bad.is_empty() {
        return Err(MomentError::NonIdentityGram(bad));
    }
    if shells == 0 {
        return Err(MomentError::Model(ModelError::Parameter("truncation must have at least one level".into())));
    }
    let s2 = spec.sigma * spec.sigma;
    let nn = shells;
    let mut entries = vec![0.0; nn * nn];
    let mut total = vec![0.0; nn];
    for n in 1..=nn as i64 {
        let row = (n - 1) as usize;
        for (i, it) in spec.interactions.iter().enumerate() {
            if !spec.is_active(i, n) {
                continue;
            }
            let k = spec.k_eff(i, n);
            let rate = s2 * k * k;
            total[row] += rate;
            let m = n + it.r;
            if m >= 1 && m <= nn as i64 && m != n {
                entries[row * nn + (m - 1) as usize] += rate;
            }
        }
    }
    let mut raw_asymmetry = 0.0_f64;
    for n in 0..nn {
        for m in n + 1..nn {
            let (a, b) = (entries[n * nn + m], entries[m * nn + n]);
            let scale = a.abs().max(b.abs());
            if scale > 0.0 {
                let gap = (a - b).abs() / scale;
                if gap > 1e-12 {
                    return Err(MomentError::Asymmetric {
                        n: n + 1,
                        m: m + 1,
                        gap: (a - b).abs(),
                    });
                }
                raw_asymmetry = raw_asymmetry.max(gap);
            }
            entries[m * nn + n] = a;
        }
    }
    let mut escape = vec![0.0; nn];
    for n in 0..nn {
        let off: f64 = (0..nn).filter(|&m| m != n).map(|m| entries[n * nn + m]).sum();
        escape[n] = total[n] - off;
        entries[n * nn + n] = -total[n];
    }
    Ok(QMatrix {
        shells,
        sigma: spec.sigma,
        entries,
        total,
        escape,
        raw_asymmetry,
    })
}
