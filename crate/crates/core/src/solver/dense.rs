//! Dense reference eigensolver: Householder reduction to tridiagonal form
//! followed by implicit-shift QL, eigenvalues only. Deliberately kept free
//! of any code shared with the Lanczos path.

use crate::error::{CoreError, Result};
use crate::fock::SparseHamiltonian;

pub const DENSE_ORACLE_MAX_DIM: usize = 2000;

/// Smallest eigenvalue of the full matrix. Refuses dimensions past
/// [`DENSE_ORACLE_MAX_DIM`]; this is a test oracle, not a production path.
pub fn dense_ground_oracle(h: &SparseHamiltonian) -> Result<f64> {
    if h.dim > DENSE_ORACLE_MAX_DIM {
        return Err(CoreError::ResourceBudget {
            what: "dense oracle".into(),
            needed: h.dim as u64,
            budget: DENSE_ORACLE_MAX_DIM as u64,
        });
    }
    if h.dim == 0 {
        return Err(CoreError::EmptyInput("empty matrix".into()));
    }
    let mut a = h.to_dense();
    let n = h.dim;
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    tridiagonalize(&mut a, n, &mut d, &mut e);
    ql_eigenvalues(&mut d, &mut e, n)?;
    Ok(d.iter().cloned().fold(f64::INFINITY, f64::min))
}

/// Householder reduction of a symmetric matrix (row-major, lower triangle
/// read) to tridiagonal form. On exit `d` is the diagonal and `e[1..]` the
/// subdiagonal.
fn tridiagonalize(a: &mut [f64], n: usize, d: &mut [f64], e: &mut [f64]) {
    for i in (1..n).rev() {
        let l = i - 1;
        let mut h = 0.0;
        if l > 0 {
            let scale: f64 = (0..=l).map(|k| a[i * n + k].abs()).sum();
            if scale == 0.0 {
                e[i] = a[i * n + l];
            } else {
                for k in 0..=l {
                    a[i * n + k] /= scale;
                    h += a[i * n + k] * a[i * n + k];
                }
                let f = a[i * n + l];
                let g = if f >= 0.0 { -h.sqrt() } else { h.sqrt() };
                e[i] = scale * g;
                h -= f * g;
                a[i * n + l] = f - g;
                let mut fsum = 0.0;
                for j in 0..=l {
                    let mut g = 0.0;
                    for k in 0..=j {
                        g += a[j * n + k] * a[i * n + k];
                    }
                    for k in (j + 1)..=l {
                        g += a[k * n + j] * a[i * n + k];
                    }
                    e[j] = g / h;
                    fsum += e[j] * a[i * n + j];
                }
                let hh = fsum / (h + h);
                for j in 0..=l {
                    let f = a[i * n + j];
                    let g = e[j] - hh * f;
                    e[j] = g;
                    for k in 0..=j {
                        a[j * n + k] -= f * e[k] + g * a[i * n + k];
                    }
                }
            }
        } else {
            e[i] = a[i * n + l];
        }
        d[i] = h;
    }
    e[0] = 0.0;
    for i in 0..n {
        d[i] = a[i * n + i];
    }
}

/// Implicit-shift QL on a tridiagonal matrix, eigenvalues only.
fn ql_eigenvalues(d: &mut [f64], e: &mut [f64], n: usize) -> Result<()> {
    if n == 1 {
        return Ok(());
    }
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 64 {
                return Err(CoreError::NonConvergence {
                    what: "ql eigenvalue sweep".into(),
                    detail: format!("row {l} after {iter} rotations"),
                });
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let mut s = 1.0;
            let mut c = 1.0;
            let mut p = 0.0;
            let mut underflow = false;
            for i in (l..m).rev() {
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    Ok(())
}
