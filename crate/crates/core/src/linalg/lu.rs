use faer::linalg::solvers::{PartialPivLu, Solve};
use faer::MatMut;

use super::{CMatrix, C64, ZERO};

/// Partial-pivoting LU factorization of a square matrix.
pub struct Lu {
    n: usize,
    lu: PartialPivLu<C64>,
    norm_1: f64,
    singular: bool,
}

impl Lu {
    pub fn new(a: &CMatrix) -> Self {
        assert!(a.is_square(), "LU of non-square matrix");
        let lu = a.as_faer().partial_piv_lu();
        let u = lu.U();
        let singular = (0..a.rows()).any(|i| {
            let d = u[(i, i)];
            d == ZERO || !d.re.is_finite() || !d.im.is_finite()
        });
        Self {
            n: a.rows(),
            lu,
            norm_1: a.norm_1(),
            singular,
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// True if an exact zero (or non-finite) pivot appeared.
    pub fn is_exactly_singular(&self) -> bool {
        self.singular
    }

    pub fn solve(&self, b: &[C64]) -> Vec<C64> {
        let mut x = b.to_vec();
        self.lu
            .solve_in_place(MatMut::from_column_major_slice_mut(&mut x, self.n, 1));
        x
    }

    /// Solves `Aᵀ x = b` (unconjugated transpose).
    pub fn solve_transpose(&self, b: &[C64]) -> Vec<C64> {
        let mut x = b.to_vec();
        self.lu
            .solve_transpose_in_place(MatMut::from_column_major_slice_mut(&mut x, self.n, 1));
        x
    }

    pub fn solve_matrix(&self, b: &CMatrix) -> CMatrix {
        let mut x = b.clone();
        self.lu.solve_in_place(x.as_faer_mut());
        x
    }

    pub fn solve_transpose_matrix(&self, b: &CMatrix) -> CMatrix {
        let mut x = b.clone();
        self.lu.solve_transpose_in_place(x.as_faer_mut());
        x
    }

    /// Solves `Aᴴ x = b`.
    fn solve_adjoint(&self, b: &[C64]) -> Vec<C64> {
        let conj_b = super::conj(b);
        super::conj(&self.solve_transpose(&conj_b))
    }

    /// Estimated 1-norm condition number; infinite for an exactly singular factor.
    pub fn cond_1(&self) -> f64 {
        if self.singular {
            return f64::INFINITY;
        }
        let inv_norm = hager_inverse_norm_1(self);
        let c = self.norm_1 * inv_norm;
        if c.is_finite() {
            c
        } else {
            f64::INFINITY
        }
    }
}

/// Hager–Higham estimate of `‖A⁻¹‖₁` using a handful of solves.
fn hager_inverse_norm_1(lu: &Lu) -> f64 {
    let n = lu.n;
    if n == 0 {
        return 0.0;
    }
    let mut x = vec![C64::new(1.0 / n as f64, 0.0); n];
    let mut estimate = 0.0_f64;
    let mut last_j = usize::MAX;
    for _ in 0..5 {
        let y = lu.solve(&x);
        let est: f64 = y.iter().map(|z| z.norm()).sum();
        if !est.is_finite() {
            return f64::INFINITY;
        }
        if est <= estimate {
            break;
        }
        estimate = est;
        let xi: Vec<C64> = y
            .iter()
            .map(|z| if z.norm() > 0.0 { z / z.norm() } else { C64::new(1.0, 0.0) })
            .collect();
        let w = lu.solve_adjoint(&xi);
        let (j, wmax) = w
            .iter()
            .enumerate()
            .map(|(i, z)| (i, z.re))
            .fold((0, f64::NEG_INFINITY), |acc, (i, v)| if v > acc.1 { (i, v) } else { acc });
        let ztx: f64 = w.iter().zip(&x).map(|(a, b)| (a.conj() * b).re).sum();
        if wmax <= ztx || j == last_j {
            break;
        }
        last_j = j;
        x = vec![ZERO; n];
        x[j] = C64::new(1.0, 0.0);
    }
    // alternating-sign probe guards against the estimator's known blind spots
    let probe: Vec<C64> = (0..n)
        .map(|i| {
            let s = if i % 2 == 0 { 1.0 } else { -1.0 };
            C64::new(s * (1.0 + i as f64 / (n.max(2) - 1) as f64), 0.0)
        })
        .collect();
    let y = lu.solve(&probe);
    let alt = 2.0 * y.iter().map(|z| z.norm()).sum::<f64>() / (3.0 * n as f64);
    estimate.max(alt)
}

/// Convenience wrapper: estimated 1-norm condition number of `a`.
pub fn cond_1_estimate(a: &CMatrix) -> f64 {
    Lu::new(a).cond_1()
}
