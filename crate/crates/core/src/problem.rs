//! The NEPv model, its nonlinear functionals, residual and solution count.

use serde::{Deserialize, Serialize};

use crate::dense::SpuriousReport;
use crate::error::{NepvError, Result};
use crate::linalg::{dot_t, norm2, CMatrix, C64};

/// Default numerical thresholds.
pub mod tol {
    /// `|sᵀx| ≤ DENOMINATOR · ‖s‖‖x‖` counts as a vanishing denominator.
    pub const DENOMINATOR: f64 = 1e-12;
    /// Residual below which a symmetric GEP eigenpair is accepted as a solution.
    pub const ACCEPT: f64 = 1e-8;
    /// Largest symmetry defect of a factored eigenvector still called symmetric.
    pub const SYMMETRY: f64 = 1e-6;
    /// Largest rank-one fit error still called decomposable.
    pub const FIT: f64 = 1e-6;
    /// Eigenvalues closer than this (absolute plus relative) are one cluster.
    pub const DEDUP: f64 = 1e-8;
}

/// `(A + λB + Σᵢ fᵢ(x) Cᵢ) x = 0` with `fᵢ(x) = rᵢᵀx / sᵢᵀx`.
#[derive(Clone, Debug, PartialEq)]
pub struct NepvProblem {
    a: CMatrix,
    b: CMatrix,
    c: Vec<CMatrix>,
    r: Vec<Vec<C64>>,
    s: Vec<Vec<C64>>,
}

impl NepvProblem {
    pub fn new(
        a: CMatrix,
        b: CMatrix,
        c: Vec<CMatrix>,
        r: Vec<Vec<C64>>,
        s: Vec<Vec<C64>>,
    ) -> Result<Self> {
        let n = a.rows();
        if n == 0 {
            return Err(NepvError::InvalidProblem("dimension n must be positive".into()));
        }
        let m = c.len();
        if m == 0 {
            return Err(NepvError::InvalidProblem("at least one nonlinear term is required".into()));
        }
        if r.len() != m || s.len() != m {
            return Err(NepvError::DimensionMismatch(format!(
                "expected {m} vectors in r and s, got {} and {}",
                r.len(),
                s.len()
            )));
        }
        let square = |name: &str, mat: &CMatrix| {
            if mat.rows() != n || mat.cols() != n {
                Err(NepvError::DimensionMismatch(format!(
                    "{name} is {}x{}, expected {n}x{n}",
                    mat.rows(),
                    mat.cols()
                )))
            } else if !mat.is_finite() {
                Err(NepvError::InvalidProblem(format!("{name} has non-finite entries")))
            } else {
                Ok(())
            }
        };
        square("A", &a)?;
        square("B", &b)?;
        for (i, ci) in c.iter().enumerate() {
            square(&format!("C[{i}]"), ci)?;
        }
        for (name, vs) in [("r", &r), ("s", &s)] {
            for (i, v) in vs.iter().enumerate() {
                if v.len() != n {
                    return Err(NepvError::DimensionMismatch(format!(
                        "{name}[{i}] has length {}, expected {n}",
                        v.len()
                    )));
                }
                if v.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                    return Err(NepvError::InvalidProblem(format!("{name}[{i}] has non-finite entries")));
                }
            }
        }
        if let Some(i) = s.iter().position(|v| norm2(v) == 0.0) {
            return Err(NepvError::InvalidProblem(format!("s[{i}] is the zero vector")));
        }
        Ok(Self { a, b, c, r, s })
    }

    pub fn n(&self) -> usize {
        self.a.rows()
    }

    pub fn m(&self) -> usize {
        self.c.len()
    }

    pub fn a(&self) -> &CMatrix {
        &self.a
    }

    pub fn b(&self) -> &CMatrix {
        &self.b
    }

    pub fn c(&self) -> &[CMatrix] {
        &self.c
    }

    pub fn r(&self) -> &[Vec<C64>] {
        &self.r
    }

    pub fn s(&self) -> &[Vec<C64>] {
        &self.s
    }

    /// `A + λB + Σᵢ μᵢCᵢ`.
    pub fn pencil(&self, lambda: C64, mu: &[C64]) -> CMatrix {
        assert_eq!(mu.len(), self.m());
        let mut t = self.a.clone();
        t.add_scaled(lambda, &self.b);
        for (ci, &mi) in self.c.iter().zip(mu) {
            t.add_scaled(mi, ci);
        }
        t
    }

    /// All `fᵢ(x)`.
    pub fn f_all(&self, x: &[C64]) -> Result<Vec<C64>> {
        (0..self.m()).map(|i| f_eval(self, i, x)).collect()
    }
}

/// `fᵢ(x) = rᵢᵀx / sᵢᵀx` for the zero-based term index `i`.
pub fn f_eval(p: &NepvProblem, i: usize, x: &[C64]) -> Result<C64> {
    if i >= p.m() {
        return Err(NepvError::DimensionMismatch(format!(
            "term index {i} out of range for m = {}",
            p.m()
        )));
    }
    if x.len() != p.n() {
        return Err(NepvError::DimensionMismatch(format!(
            "vector has length {}, expected {}",
            x.len(),
            p.n()
        )));
    }
    let den = dot_t(&p.s[i], x);
    if den.norm() <= tol::DENOMINATOR * norm2(&p.s[i]) * norm2(x) {
        return Err(NepvError::DenominatorNearZero {
            index: i,
            value: den.norm(),
        });
    }
    Ok(dot_t(&p.r[i], x) / den)
}

/// Relative residual
/// `‖(A + λB + Σ fᵢ(x)Cᵢ)x‖ / ((‖A‖_F + |λ|‖B‖_F + Σ|fᵢ(x)|‖Cᵢ‖_F)‖x‖)`.
pub fn nepv_residual(p: &NepvProblem, lambda: C64, x: &[C64]) -> Result<f64> {
    let f = p.f_all(x)?;
    let t = p.pencil(lambda, &f);
    let num = norm2(&t.matvec(x));
    let mut scale = p.a.frobenius_norm() + lambda.norm() * p.b.frobenius_norm();
    for (ci, fi) in p.c.iter().zip(&f) {
        scale += fi.norm() * ci.frobenius_norm();
    }
    let den = scale * norm2(x);
    if den == 0.0 {
        return Ok(if num == 0.0 { 0.0 } else { f64::INFINITY });
    }
    Ok(num / den)
}

/// Generic number of isolated solutions, `binomial(n + m, m + 1)`.
pub fn count_solutions(n: usize, m: usize) -> Result<u64> {
    if n == 0 || m == 0 {
        return Err(NepvError::InvalidProblem("count_solutions needs n ≥ 1 and m ≥ 1".into()));
    }
    let top = n as u128 + m as u128;
    let k = (m as u128 + 1).min(top - (m as u128 + 1));
    let mut acc: u128 = 1;
    for j in 1..=k {
        // acc * (top - k + j) / j stays integral at every step
        acc = acc
            .checked_mul(top - k + j)
            .ok_or(NepvError::CountOverflow { n, m })?
            / j;
        if acc > i64::MAX as u128 {
            return Err(NepvError::CountOverflow { n, m });
        }
    }
    Ok(acc as u64)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Classification {
    True,
    Spurious,
    NonSymmetric,
}

/// One eigentuple recovered by the dense path.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SolutionRecord {
    /// Position of the underlying eigenpair in the GEP output.
    pub gep_index: usize,
    pub lambda: C64,
    pub mu: Vec<C64>,
    /// First Kronecker factor, unit 2-norm with its largest entry real positive.
    pub x: Vec<C64>,
    pub classification: Classification,
    /// NEPv residual of `(λ, x)`; infinite when some `sᵢᵀx` vanishes.
    pub residual: f64,
    pub fit: f64,
    pub symmetry_defect: f64,
    /// False when the eigenvalue sits in a numerical cluster, where the
    /// symmetric/non-symmetric split of eigenvectors is not determined.
    pub symmetry_known: bool,
    /// True when `λ`, `x` and the residual come from a short residual
    /// inverse iteration started at the factored eigenvector.
    pub refined: bool,
    pub diagnostics: Option<SpuriousReport>,
}
