//! Schur-based (Bartels–Stewart) solvers for Sylvester equations.

use super::schur::Schur;
use super::{CMatrix, Lu, C64, ZERO};
use crate::error::{NepvError, Result};

/// Prepared solver for `A X + X B = C` with `A` (m×m) and `B` (n×n) fixed.
///
/// Shifted denominators smaller than `ε·(‖A‖ + ‖B‖)` are floored to that
/// size in the back substitution, as inverse iteration expects; only an
/// exactly singular operator is rejected.
#[derive(Clone, Debug)]
pub struct Sylvester {
    a: Schur,
    b: Schur,
    floor: f64,
    floored: usize,
}

impl Sylvester {
    pub fn new(a: &CMatrix, b: &CMatrix) -> Result<Self> {
        let a = Schur::new(a)?;
        let b = Schur::new(b)?;
        let scale = a.t.frobenius_norm() + b.t.frobenius_norm();
        let floor = f64::EPSILON * scale.max(f64::MIN_POSITIVE);
        let mut floored = 0;
        for ea in a.eigenvalues() {
            for eb in b.eigenvalues() {
                let d = (ea + eb).norm();
                if d == 0.0 || !d.is_finite() {
                    return Err(NepvError::SingularSylvesterOperator);
                }
                if d < floor {
                    floored += 1;
                }
            }
        }
        Ok(Self { a, b, floor, floored })
    }

    /// Number of eigenvalue sums `λ(A) + λ(B)` below the pivot floor.
    pub fn floored_pivots(&self) -> usize {
        self.floored
    }

    pub fn solve(&self, c: &CMatrix) -> CMatrix {
        let ta = &self.a.t;
        let tb = &self.b.t;
        let m = ta.rows();
        let n = tb.rows();
        assert_eq!((c.rows(), c.cols()), (m, n), "Sylvester right-hand side shape");
        let f = self.a.q.adjoint().matmul(c).matmul(&self.b.q);
        let mut y = CMatrix::zeros(m, n);
        for k in 0..n {
            let mut rhs: Vec<C64> = f.col(k).to_vec();
            for j in 0..k {
                let t = tb[(j, k)];
                if t != ZERO {
                    for i in 0..m {
                        rhs[i] -= t * y[(i, j)];
                    }
                }
            }
            let shift = tb[(k, k)];
            for i in (0..m).rev() {
                let mut s = rhs[i];
                for l in i + 1..m {
                    s -= ta[(i, l)] * y[(l, k)];
                }
                let mut d = ta[(i, i)] + shift;
                let size = d.norm();
                if size < self.floor {
                    d = d * (self.floor / size);
                }
                y[(i, k)] = s / d;
            }
        }
        self.a.q.matmul(&y).matmul(&self.b.q.adjoint())
    }
}

/// Which pair of coefficients gets inverted to reach standard form.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Reduction {
    /// invert `P` on the left and `R` on the right
    LeftFirstRightSecond,
    /// invert `Q` on the left and `C` on the right
    LeftSecondRightFirst,
}

/// Prepared solver for the generalized equation `P Z Cᵀ − Q Z Rᵀ = F`.
///
/// Inverting one coefficient on each side turns it into a standard
/// Sylvester equation; the better-conditioned pair is chosen.
pub struct GeneralizedSylvester {
    #[cfg_attr(not(test), allow(dead_code))]
    reduction: Reduction,
    left: Lu,
    right: Lu,
    core: Sylvester,
}

impl GeneralizedSylvester {
    pub fn new(p: &CMatrix, c: &CMatrix, q: &CMatrix, r: &CMatrix) -> Result<Self> {
        let n = p.rows();
        for m in [p, c, q, r] {
            if m.rows() != n || m.cols() != n {
                return Err(NepvError::DimensionMismatch(
                    "generalized Sylvester coefficients must be square and equal-sized".into(),
                ));
            }
        }
        let (lp, lq, lr, lc) = (Lu::new(p), Lu::new(q), Lu::new(r), Lu::new(c));
        let score_1 = lp.cond_1().max(lr.cond_1());
        let score_2 = lq.cond_1().max(lc.cond_1());
        if !score_1.is_finite() && !score_2.is_finite() {
            return Err(NepvError::SingularSylvesterOperator);
        }
        let (reduction, left, right, a, b) = if score_1 <= score_2 {
            // Z Cᵀ R⁻ᵀ − P⁻¹Q Z = P⁻¹ F R⁻ᵀ
            let a = lp.solve_matrix(q).scaled(C64::new(-1.0, 0.0));
            let b = right_solve_transpose(&lr, c).transpose();
            (Reduction::LeftFirstRightSecond, lp, lr, a, b)
        } else {
            // Q⁻¹P Z − Z Rᵀ C⁻ᵀ = Q⁻¹ F C⁻ᵀ
            let a = lq.solve_matrix(p);
            let b = right_solve_transpose(&lc, r)
                .transpose()
                .scaled(C64::new(-1.0, 0.0));
            (Reduction::LeftSecondRightFirst, lq, lc, a, b)
        };
        let core = Sylvester::new(&a, &b)?;
        Ok(Self {
            reduction,
            left,
            right,
            core,
        })
    }

    /// See [`Sylvester::floored_pivots`].
    pub fn floored_pivots(&self) -> usize {
        self.core.floored_pivots()
    }

    pub fn solve(&self, f: &CMatrix) -> CMatrix {
        let g = self.left.solve_matrix(f);
        let h = right_solve_transpose(&self.right, &g.transpose()).transpose();
        self.core.solve(&h)
    }
}

/// `M⁻¹ X` where `lu` factors `M`; right division uses `X M⁻ᵀ = (M⁻¹ Xᵀ)ᵀ`.
fn right_solve_transpose(lu: &Lu, x: &CMatrix) -> CMatrix {
    lu.solve_matrix(x)
}
