//! Dense kernels for the moment equation: a graded-accurate symmetric
//! eigensolver, a Padé matrix exponential and an L-stable SDIRK stepper.

use nalgebra::DMatrix;

/// Eigen-decomposition `A = V diag(w) V^T` of a symmetric matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricEigen {
    pub n: usize,
    pub values: Vec<f64>,
    /// Column-major eigenvectors: column `k` is `vectors[k*n..(k+1)*n]`.
    pub vectors: Vec<f64>,
    pub sweeps: usize,
}

/// Two-sided cyclic Jacobi with the relative off-diagonal test
/// `|a_pq| <= eps sqrt(|a_pp a_qq|)`, which keeps small eigenvalues of
/// strongly graded definite matrices to high relative accuracy.
pub fn jacobi_eigen(a: &[f64], n: usize, max_sweeps: usize) -> Option<SymmetricEigen> {
    assert_eq!(a.len(), n * n, "matrix must be n x n");
    let mut m = a.to_vec();
    let mut v = vec![0.0; n * n];
    for k in 0..n {
        v[k * n + k] = 1.0;
    }
    let eps = f64::EPSILON;
    let mut sweeps = 0;
    loop {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let app = m[p * n + p];
                let aqq = m[q * n + q];
                if apq.abs() <= eps * (app * aqq).abs().sqrt() {
                    m[p * n + q] = 0.0;
                    m[q * n + p] = 0.0;
                    continue;
                }
                rotated = true;
                let theta = (aqq - app) / (2.0 * apq);
                let t = if theta.abs() > 1e150 {
                    0.5 / theta
                } else {
                    theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                m[p * n + p] = app - t * apq;
                m[q * n + q] = aqq + t * apq;
                m[p * n + q] = 0.0;
                m[q * n + p] = 0.0;
                for r in 0..n {
                    if r != p && r != q {
                        let arp = m[r * n + p];
                        let arq = m[r * n + q];
                        let np = c * arp - s * arq;
                        let nq = s * arp + c * arq;
                        m[r * n + p] = np;
                        m[p * n + r] = np;
                        m[r * n + q] = nq;
                        m[q * n + r] = nq;
                    }
                }
                for r in 0..n {
                    let vp = v[p * n + r];
                    let vq = v[q * n + r];
                    v[p * n + r] = c * vp - s * vq;
                    v[q * n + r] = s * vp + c * vq;
                }
            }
        }
        sweeps += 1;
        if !rotated {
            break;
        }
        if sweeps >= max_sweeps {
            return None;
        }
    }
    Some(SymmetricEigen {
        n,
        values: (0..n).map(|k| m[k * n + k]).collect(),
        vectors: v,
        sweeps,
    })
}

const PADE3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const PADE5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const PADE7: [f64; 8] = [17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0];
const PADE9: [f64; 10] = [
    17643225600.0,
    8821612800.0,
    2075673600.0,
    302702400.0,
    30270240.0,
    2162160.0,
    110880.0,
    3960.0,
    90.0,
    1.0,
];
const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];
const THETA: [(usize, f64); 4] = [
    (3, 1.495585217958292e-2),
    (5, 2.539398330063230e-1),
    (7, 9.504178996162932e-1),
    (9, 2.097847961257068),
];
const THETA13: f64 = 5.371920351148152;

fn one_norm(a: &DMatrix<f64>) -> f64 {
    a.column_iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

fn pade_low(a: &DMatrix<f64>, b: &[f64]) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = a.nrows();
    let a2 = a * a;
    let mut pow = DMatrix::identity(n, n);
    let mut u = DMatrix::zeros(n, n);
    let mut v = DMatrix::zeros(n, n);
    for j in (0..b.len()).step_by(2) {
        v += &pow * b[j];
        if j + 1 < b.len() {
            u += &pow * b[j + 1];
        }
        pow = &pow * &a2;
    }
    (a * u, v)
}

/// Scaling-and-squaring Padé exponential.
pub fn expm(a: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let n = a.nrows();
    let norm = one_norm(a);
    if !norm.is_finite() {
        return None;
    }
    for (m, theta) in THETA {
        if norm <= theta {
            let b: &[f64] = match m {
                3 => &PADE3,
                5 => &PADE5,
                7 => &PADE7,
                _ => &PADE9,
            };
            let (u, v) = pade_low(a, b);
            return (&v - &u).lu().solve(&(&v + &u));
        }
    }
    let s = (norm / THETA13).log2().ceil().max(0.0) as i32;
    let a = a / 2f64.powi(s);
    let id = DMatrix::<f64>::identity(n, n);
    let a2 = &a * &a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let b = PADE13;
    let inner_u = &a6 * (&a6 * b[13] + &a4 * b[11] + &a2 * b[9]) + &a6 * b[7] + &a4 * b[5] + &a2 * b[3] + &id * b[1];
    let u = &a * inner_u;
    let v = &a6 * (&a6 * b[12] + &a4 * b[10] + &a2 * b[8]) + &a6 * b[6] + &a4 * b[4] + &a2 * b[2] + &id * b[0];
    let mut r = (&v - &u).lu().solve(&(&v + &u))?;
    for _ in 0..s {
        r = &r * &r;
    }
    Some(r)
}

/// Stiffly accurate two-stage SDIRK (order 2, L-stable) for `y' = A y`
/// with a fixed step `h`; returns the propagator for one step.
pub fn sdirk2_propagator(a: &DMatrix<f64>, h: f64) -> Option<DMatrix<f64>> {
    let n = a.nrows();
    let gamma = 1.0 - std::f64::consts::FRAC_1_SQRT_2;
    let id = DMatrix::<f64>::identity(n, n);
    let m = &id - a * (gamma * h);
    let lu = m.lu();
    let y1 = lu.solve(&id)?;
    let rhs = &id + a * ((1.0 - gamma) * h) * &y1;
    lu.solve(&rhs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jacobi_reconstructs() {
        let a = [4.0, 1.0, 0.5, 1.0, 3.0, 0.2, 0.5, 0.2, 1e-6];
        let e = jacobi_eigen(&a, 3, 50).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let mut s = 0.0;
                for k in 0..3 {
                    s += e.vectors[k * 3 + i] * e.values[k] * e.vectors[k * 3 + j];
                }
                assert!((s - a[i * 3 + j]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn expm_of_diagonal_and_rotation() {
        let d = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![-1.0, 2.0, -30.0]));
        let e = expm(&d).unwrap();
        assert!((e[(0, 0)] - (-1f64).exp()).abs() < 1e-15);
        assert!((e[(1, 1)] / 2f64.exp() - 1.0).abs() < 1e-14);
        assert!((e[(2, 2)] / (-30f64).exp() - 1.0).abs() < 1e-9);
        let r = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        let e = expm(&r).unwrap();
        assert!((e[(0, 0)] - 1f64.cos()).abs() < 1e-14);
        assert!((e[(0, 1)] - 1f64.sin()).abs() < 1e-14);
    }

    #[test]
    fn sdirk_is_second_order() {
        let a = DMatrix::from_row_slice(1, 1, &[-1.0]);
        let err = |h: f64| {
            let p = sdirk2_propagator(&a, h).unwrap()[(0, 0)];
            let steps = (1.0 / h).round() as i32;
            (p.powi(steps) - (-1f64).exp()).abs()
        };
        let ratio = err(0.01) / err(0.005);
        assert!(ratio > 3.8 && ratio < 4.2, "ratio {ratio}");
    }
}
