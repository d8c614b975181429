use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::qmatrix::QMatrix;
use crate::error::MomentError;
use crate::linalg::{expm, jacobi_eigen, sdirk2_propagator};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolveMode {
    /// Eigen-decomposition of the symmetric generator.
    #[default]
    Spectral,
    /// Padé scaling-and-squaring exponential at each grid time.
    Expm,
    /// Adaptive L-stable SDIRK with step doubling.
    Implicit,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ForwardSolution {
    pub times: Vec<f64>,
    /// `u[j][n-1]` at `times[j]`.
    pub u: Vec<Vec<f64>>,
    pub mass: Vec<f64>,
}

const IMPLICIT_RTOL: f64 = 1e-9;
const IMPLICIT_MAX_SUBSTEPS: usize = 1 << 14;

fn check_inputs(q: &QMatrix, u0: &[f64], tgrid: &[f64]) -> Result<(), MomentError> {
    if u0.len() != q.shells {
        return Err(MomentError::Dimension {
            got: u0.len(),
            want: q.shells,
        });
    }
    if let Some(idx) = u0.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(MomentError::BadInitial(idx + 1));
    }
    let ok = tgrid.iter().all(|t| t.is_finite() && *t >= 0.0) && tgrid.windows(2).all(|w| w[0] <= w[1]);
    if !ok {
        return Err(MomentError::BadGrid);
    }
    Ok(())
}

fn clamp(mut v: Vec<f64>) -> Vec<f64> {
    for x in v.iter_mut() {
        if *x < 0.0 {
            *x = 0.0;
        }
    }
    v
}

/// Solves `u' = u Pi` on the grid.
pub fn solve_forward(q: &QMatrix, u0: &[f64], tgrid: &[f64], mode: SolveMode) -> Result<ForwardSolution, MomentError> {
    check_inputs(q, u0, tgrid)?;
    let u = match mode {
        SolveMode::Spectral => spectral(q, u0, tgrid)?,
        SolveMode::Expm => by_expm(q, u0, tgrid)?,
        SolveMode::Implicit => implicit(q, u0, tgrid)?,
    };
    let u: Vec<Vec<f64>> = u.into_iter().map(clamp).collect();
    let mass = u.iter().map(|row| row.iter().sum()).collect();
    Ok(ForwardSolution {
        times: tgrid.to_vec(),
        u,
        mass,
    })
}

fn spectral(q: &QMatrix, u0: &[f64], tgrid: &[f64]) -> Result<Vec<Vec<f64>>, MomentError> {
    let n = q.shells;
    let h: Vec<f64> = q.entries.iter().map(|v| -v).collect();
    let sweeps = 100;
    let eig = jacobi_eigen(&h, n, sweeps).ok_or(MomentError::Eigen(sweeps))?;
    let coeff: Vec<f64> = (0..n)
        .map(|k| (0..n).map(|j| u0[j] * eig.vectors[k * n + j]).sum())
        .collect();
    Ok(tgrid
        .iter()
        .map(|&t| {
            let mut out = vec![0.0; n];
            for k in 0..n {
                let w = coeff[k] * (-t * eig.values[k]).exp();
                if w == 0.0 {
                    continue;
                }
                let col = &eig.vectors[k * n..(k + 1) * n];
                for (o, v) in out.iter_mut().zip(col) {
                    *o += w * v;
                }
            }
            out
        })
        .collect())
}

fn generator(q: &QMatrix) -> DMatrix<f64> {
    // Symmetric, so the row-vector equation u' = u Pi is v' = Pi v.
    DMatrix::from_row_slice(q.shells, q.shells, &q.entries)
}

fn by_expm(q: &QMatrix, u0: &[f64], tgrid: &[f64]) -> Result<Vec<Vec<f64>>, MomentError> {
    let a = generator(q);
    let v0 = DVector::from_column_slice(u0);
    tgrid
        .iter()
        .map(|&t| {
            let e = expm(&(&a * t)).ok_or(MomentError::Singular)?;
            Ok((e.transpose() * &v0).iter().copied().collect())
        })
        .collect()
}

fn implicit(q: &QMatrix, u0: &[f64], tgrid: &[f64]) -> Result<Vec<Vec<f64>>, MomentError> {
    let a = generator(q);
    let mut v = DVector::from_column_slice(u0);
    let mut t = 0.0;
    let mut out = Vec::with_capacity(tgrid.len());
    for &target in tgrid {
        let span = target - t;
        if span > 0.0 {
            let advance = |m: usize| -> Option<DVector<f64>> {
                let p = sdirk2_propagator(&a, span / m as f64)?;
                let mut w = v.clone();
                for _ in 0..m {
                    w = &p * w;
                }
                Some(w)
            };
            let mut m = 1;
            let mut prev = advance(m).ok_or(MomentError::Singular)?;
            loop {
                m *= 2;
                if m > IMPLICIT_MAX_SUBSTEPS {
                    return Err(MomentError::Stiffness {
                        t0: t,
                        t1: target,
                        substeps: m / 2,
                    });
                }
                let next = advance(m).ok_or(MomentError::Singular)?;
                let scale = next.amax().max(f64::MIN_POSITIVE);
                let gap = (&next - &prev).amax();
                prev = next;
                // Richardson: the finer result has about a third of the gap as error.
                if gap / 3.0 <= IMPLICIT_RTOL * scale {
                    break;
                }
            }
            v = prev;
            t = target;
        }
        out.push(v.iter().copied().collect());
    }
    Ok(out)
}

/// `[0, t_min, ..., t_max]` with geometric spacing after zero.
pub fn geometric_grid(t_min: f64, t_max: f64, points: usize) -> Vec<f64> {
    assert!(t_min > 0.0 && t_max >= t_min && points >= 2, "invalid grid request");
    let ratio = (t_max / t_min).ln() / (points - 1) as f64;
    let mut g = vec![0.0];
    g.extend((0..points).map(|j| {
        if j + 1 == points {
            t_max
        } else {
            t_min * (ratio * j as f64).exp()
        }
    }));
    g
}

pub fn linear_grid(t_max: f64, points: usize) -> Vec<f64> {
    assert!(points >= 2, "invalid grid request");
    (0..points).map(|j| t_max * j as f64 / (points - 1) as f64).collect()
}
