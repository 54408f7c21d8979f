//! Complex Schur decomposition `A = Q T Qᴴ` by Householder reduction to
//! Hessenberg form followed by single-shift implicit QR sweeps.

use super::{CMatrix, C64, ONE, ZERO};
use crate::error::{NepvError, Result};

#[derive(Clone, Debug)]
pub struct Schur {
    /// Upper triangular factor.
    pub t: CMatrix,
    /// Unitary factor.
    pub q: CMatrix,
}

impl Schur {
    pub fn new(a: &CMatrix) -> Result<Self> {
        assert!(a.is_square(), "Schur decomposition of non-square matrix");
        if !a.is_finite() {
            return Err(NepvError::ConvergenceFailure);
        }
        let n = a.rows();
        let mut h = a.clone();
        let mut q = CMatrix::identity(n);
        hessenberg(&mut h, &mut q);
        qr_sweeps(&mut h, &mut q)?;
        for j in 0..n {
            for i in j + 1..n {
                h[(i, j)] = ZERO;
            }
        }
        Ok(Self { t: h, q })
    }

    pub fn eigenvalues(&self) -> Vec<C64> {
        (0..self.t.rows()).map(|i| self.t[(i, i)]).collect()
    }
}

fn hessenberg(h: &mut CMatrix, q: &mut CMatrix) {
    let n = h.rows();
    if n < 3 {
        return;
    }
    for k in 0..n - 2 {
        let x: Vec<C64> = (k + 1..n).map(|i| h[(i, k)]).collect();
        let xnorm = super::norm2(&x);
        if xnorm == 0.0 {
            continue;
        }
        let phase = if x[0].norm() > 0.0 { x[0] / x[0].norm() } else { ONE };
        let alpha = -phase * xnorm;
        let mut v = x;
        v[0] -= alpha;
        let vnorm = super::norm2(&v);
        if vnorm == 0.0 {
            continue;
        }
        for vi in v.iter_mut() {
            *vi /= vnorm;
        }
        // H <- (I - 2 v vᴴ) H on rows k+1..n
        for j in 0..n {
            let mut s = ZERO;
            for (idx, vi) in v.iter().enumerate() {
                s += vi.conj() * h[(k + 1 + idx, j)];
            }
            s *= 2.0;
            for (idx, vi) in v.iter().enumerate() {
                h[(k + 1 + idx, j)] -= vi * s;
            }
        }
        // H <- H (I - 2 v vᴴ), Q <- Q (I - 2 v vᴴ) on columns k+1..n
        for m in [&mut *h, &mut *q] {
            for i in 0..n {
                let mut s = ZERO;
                for (idx, vi) in v.iter().enumerate() {
                    s += m[(i, k + 1 + idx)] * vi;
                }
                s *= 2.0;
                for (idx, vi) in v.iter().enumerate() {
                    m[(i, k + 1 + idx)] -= s * vi.conj();
                }
            }
        }
        for i in k + 2..n {
            h[(i, k)] = ZERO;
        }
    }
}

/// Rotation `G = [[c, s], [-s̄, c]]` with `G [a; b] = [r; 0]`.
fn givens(a: C64, b: C64) -> (f64, C64) {
    if b == ZERO {
        return (1.0, ZERO);
    }
    if a == ZERO {
        return (0.0, b.conj() / b.norm());
    }
    let na = a.norm();
    let nu = na.hypot(b.norm());
    let alpha = a / na;
    (na / nu, alpha * b.conj() / nu)
}

fn rotate_rows(h: &mut CMatrix, k: usize, c: f64, s: C64, cols: std::ops::Range<usize>) {
    for j in cols {
        let x = h[(k, j)];
        let y = h[(k + 1, j)];
        h[(k, j)] = c * x + s * y;
        h[(k + 1, j)] = -s.conj() * x + c * y;
    }
}

fn rotate_cols(m: &mut CMatrix, k: usize, c: f64, s: C64, rows: std::ops::Range<usize>) {
    for i in rows {
        let x = m[(i, k)];
        let y = m[(i, k + 1)];
        m[(i, k)] = c * x + s.conj() * y;
        m[(i, k + 1)] = -s * x + c * y;
    }
}

fn wilkinson_shift(a: C64, b: C64, c: C64, d: C64) -> C64 {
    let half = (a - d) * 0.5;
    let disc = (half * half + b * c).sqrt();
    let mid = (a + d) * 0.5;
    let mu1 = mid + disc;
    let mu2 = mid - disc;
    if (mu1 - d).norm() <= (mu2 - d).norm() {
        mu1
    } else {
        mu2
    }
}

fn qr_sweeps(h: &mut CMatrix, q: &mut CMatrix) -> Result<()> {
    let n = h.rows();
    if n < 2 {
        return Ok(());
    }
    let hnorm = h.frobenius_norm();
    let eps = f64::EPSILON;
    let small = f64::MIN_POSITIVE * (n as f64) / eps;
    let mut hi = n - 1;
    let mut iter_since_deflation = 0usize;
    let max_total = 100 * n;
    let mut total = 0usize;
    while hi > 0 {
        // locate the start of the unreduced block ending at `hi`
        let mut lo = hi;
        while lo > 0 {
            let sub = h[(lo, lo - 1)].norm();
            let mut scale = h[(lo, lo)].norm() + h[(lo - 1, lo - 1)].norm();
            if scale == 0.0 {
                scale = hnorm;
            }
            if sub <= (eps * scale).max(small) {
                h[(lo, lo - 1)] = ZERO;
                break;
            }
            lo -= 1;
        }
        if lo == hi {
            hi -= 1;
            iter_since_deflation = 0;
            continue;
        }
        total += 1;
        iter_since_deflation += 1;
        if total > max_total {
            return Err(NepvError::ConvergenceFailure);
        }
        let shift = if iter_since_deflation % 11 == 10 {
            // exceptional shift to break cycles
            h[(hi, hi)] + C64::new(0.75 * h[(hi, hi - 1)].norm(), 0.0)
        } else {
            wilkinson_shift(
                h[(hi - 1, hi - 1)],
                h[(hi - 1, hi)],
                h[(hi, hi - 1)],
                h[(hi, hi)],
            )
        };
        let mut x = h[(lo, lo)] - shift;
        let mut y = h[(lo + 1, lo)];
        for k in lo..hi {
            let (c, s) = givens(x, y);
            let first_col = if k > lo { k - 1 } else { lo };
            rotate_rows(h, k, c, s, first_col..n);
            let last_row = (k + 2).min(hi);
            rotate_cols(h, k, c, s, 0..last_row + 1);
            rotate_cols(q, k, c, s, 0..n);
            if k > lo {
                h[(k + 1, k - 1)] = ZERO;
            }
            if k + 1 < hi {
                x = h[(k + 1, k)];
                y = h[(k + 2, k)];
            }
        }
    }
    Ok(())
}
