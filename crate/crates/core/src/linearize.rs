//! Linearization of the NEPv to an (m+1)-parameter linear MEP.
//!
//! Equation `i` of the MEP reads `V_{i,0} x = (λ V_{i,1} + Σⱼ μⱼ V_{i,1+j}) x`.
//! Row 0 is the NEPv with `fⱼ(x)` replaced by `μⱼ`; row `i ≥ 1` adds the
//! rank-one term `gᵢ(rᵢᵀ − μᵢ sᵢᵀ)`, which vanishes exactly when `μᵢ = fᵢ(x)`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error::{NepvError, Result};
use crate::linalg::{norm2, sin_angle, CMatrix, C64, ONE};
use crate::problem::NepvProblem;
use crate::rng::SplitMix64;

/// Smallest admissible sine of the angle between two g vectors.
pub const G_INDEPENDENCE: f64 = 1e-8;

/// Stream tag offset used for `gᵢ`.
pub(crate) const G_TAG: u64 = 4096;

#[derive(Clone, Debug, PartialEq, Error, Serialize, Deserialize)]
pub enum GFailure {
    #[error("expected {expected} g vectors, got {got}")]
    WrongCount { expected: usize, got: usize },
    #[error("g[{index}] has length {got}, expected {expected}")]
    WrongLength { index: usize, expected: usize, got: usize },
    #[error("g[{index}] has non-finite entries")]
    NonFinite { index: usize },
    #[error("g[{index}] is the zero vector")]
    ZeroVector { index: usize },
    #[error("g[{i}] and g[{j}] are linearly dependent")]
    PairwiseDependent { i: usize, j: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub struct GValidation {
    pub failure: Option<GFailure>,
    /// Smallest pairwise sine angle (1 when m = 1).
    pub min_sin_angle: f64,
}

impl GValidation {
    pub fn passed(&self) -> bool {
        self.failure.is_none()
    }
}

pub fn validate_g(p: &NepvProblem, g: &[Vec<C64>]) -> GValidation {
    let fail = |f| GValidation {
        failure: Some(f),
        min_sin_angle: f64::NAN,
    };
    let (n, m) = (p.n(), p.m());
    if g.len() != m {
        return fail(GFailure::WrongCount {
            expected: m,
            got: g.len(),
        });
    }
    for (index, gi) in g.iter().enumerate() {
        if gi.len() != n {
            return fail(GFailure::WrongLength {
                index,
                expected: n,
                got: gi.len(),
            });
        }
        if gi.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return fail(GFailure::NonFinite { index });
        }
        if norm2(gi) == 0.0 {
            return fail(GFailure::ZeroVector { index });
        }
    }
    let mut min_sin: f64 = 1.0;
    let mut failure = None;
    for i in 0..m {
        for j in i + 1..m {
            let s = sin_angle(&g[i], &g[j]);
            min_sin = min_sin.min(s);
            if s <= G_INDEPENDENCE && failure.is_none() {
                failure = Some(GFailure::PairwiseDependent { i, j });
            }
        }
    }
    GValidation {
        failure,
        min_sin_angle: min_sin,
    }
}

/// Seeded real standard-normal g vectors that always pass validation.
pub fn random_g(n: usize, m: usize, seed: u64) -> Vec<Vec<C64>> {
    let draw = |i: usize, attempt: u64| -> Vec<C64> {
        let mut rng = SplitMix64::stream(seed, G_TAG + i as u64 + (attempt << 32));
        rng.normals(n).into_iter().map(|v| C64::new(v, 0.0)).collect()
    };
    let mut g: Vec<Vec<C64>> = (0..m).map(|i| draw(i, 0)).collect();
    for i in 0..m {
        let mut attempt = 0;
        while norm2(&g[i]) == 0.0 || (0..i).any(|j| sin_angle(&g[i], &g[j]) <= G_INDEPENDENCE) {
            attempt += 1;
            g[i] = draw(i, attempt);
        }
    }
    g
}

/// Linear MEP with coefficient array `V` of shape (m+1) × (m+2).
#[derive(Clone, Debug)]
pub struct MepProblem {
    v: Vec<Vec<CMatrix>>,
    g: Vec<Vec<C64>>,
    problem: NepvProblem,
}

pub fn build_mep(p: &NepvProblem, g: &[Vec<C64>]) -> Result<MepProblem> {
    if let Some(f) = validate_g(p, g).failure {
        return Err(NepvError::InvalidG(f));
    }
    let m = p.m();
    let minus_a = p.a().scaled(-ONE);
    let mut first = vec![minus_a.clone(), p.b().clone()];
    first.extend(p.c().iter().cloned());
    let mut v = vec![first];
    for i in 0..m {
        let mut row = Vec::with_capacity(m + 2);
        let mut lhs = minus_a.clone();
        lhs.add_outer(-ONE, &g[i], &p.r()[i]);
        row.push(lhs);
        row.push(p.b().clone());
        for j in 0..m {
            let mut cj = p.c()[j].clone();
            if j == i {
                cj.add_outer(-ONE, &g[i], &p.s()[i]);
            }
            row.push(cj);
        }
        v.push(row);
    }
    Ok(MepProblem {
        v,
        g: g.to_vec(),
        problem: p.clone(),
    })
}

impl MepProblem {
    /// Number of equations, m + 1.
    pub fn equations(&self) -> usize {
        self.v.len()
    }

    pub fn n(&self) -> usize {
        self.problem.n()
    }

    pub fn m(&self) -> usize {
        self.problem.m()
    }

    /// `V_{i,j}` with zero-based row `i` and column `j` (0 is the left-hand side).
    pub fn v(&self, i: usize, j: usize) -> &CMatrix {
        &self.v[i][j]
    }

    pub fn g(&self) -> &[Vec<C64>] {
        &self.g
    }

    pub fn problem(&self) -> &NepvProblem {
        &self.problem
    }

    /// `Tᵢ(λ, μ) = −V_{i,0} + λV_{i,1} + Σⱼ μⱼV_{i,1+j}`, so that row `i`
    /// of the MEP reads `Tᵢ(λ, μ) xᵢ = 0`.
    pub fn t_matrix(&self, i: usize, lambda: C64, mu: &[C64]) -> CMatrix {
        assert_eq!(mu.len(), self.m());
        let row = &self.v[i];
        let mut t = row[0].scaled(-ONE);
        t.add_scaled(lambda, &row[1]);
        for (j, &mj) in mu.iter().enumerate() {
            t.add_scaled(mj, &row[2 + j]);
        }
        t
    }

    /// Largest `‖Tᵢ(λ, μ) x‖ / ‖x‖` over all rows, with one vector for every row.
    pub fn embedding_residual(&self, lambda: C64, mu: &[C64], x: &[C64]) -> f64 {
        let nx = norm2(x);
        (0..self.equations())
            .map(|i| norm2(&self.t_matrix(i, lambda, mu).matvec(x)) / nx)
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    fn small() -> NepvProblem {
        NepvProblem::new(
            CMatrix::from_real_rows(&[[1.0, 1.0], [0.0, 1.0]]),
            CMatrix::from_real_rows(&[[1.0, 2.0], [3.0, 4.0]]),
            vec![CMatrix::from_real_rows(&[[2.0, 0.0], [0.0, 1.0]])],
            vec![vec![c(3.0), c(2.0)]],
            vec![vec![c(4.0), c(3.0)]],
        )
        .unwrap()
    }

    #[test]
    fn second_row_matches_hand_arithmetic() {
        let mep = build_mep(&small(), &[vec![c(1.0), c(3.0)]]).unwrap();
        assert_eq!(*mep.v(1, 0), CMatrix::from_real_rows(&[[-4.0, -3.0], [-9.0, -7.0]]));
        assert_eq!(*mep.v(1, 2), CMatrix::from_real_rows(&[[-2.0, -3.0], [-12.0, -8.0]]));
        assert_eq!(*mep.v(0, 0), CMatrix::from_real_rows(&[[-1.0, -1.0], [0.0, -1.0]]));
        assert_eq!(mep.v(1, 1), mep.v(0, 1));
    }

    #[test]
    fn row_difference_vanishes_at_mu_equal_f() {
        let p = small();
        let mep = build_mep(&p, &[vec![c(1.0), c(3.0)]]).unwrap();
        let x = [C64::new(0.4, 0.2), C64::new(-1.1, 0.7)];
        let mu = p.f_all(&x).unwrap();
        let lambda = C64::new(0.3, -2.0);
        let d = mep
            .t_matrix(1, lambda, &mu)
            .sub(&mep.t_matrix(0, lambda, &mu))
            .matvec(&x);
        assert!(norm2(&d) < 1e-14);
    }

    #[test]
    fn g_validation_reasons() {
        let p = NepvProblem::new(
            CMatrix::identity(3),
            CMatrix::identity(3),
            vec![CMatrix::identity(3), CMatrix::identity(3)],
            vec![vec![c(1.0); 3], vec![c(2.0); 3]],
            vec![vec![c(1.0); 3], vec![c(1.0); 3]],
        )
        .unwrap();
        let same = vec![c(1.0), c(2.0), c(3.0)];
        let r = validate_g(&p, &[same.clone(), same.clone()]);
        assert_eq!(r.failure, Some(GFailure::PairwiseDependent { i: 0, j: 1 }));
        let r = validate_g(&p, &[vec![c(0.0); 3], same.clone()]);
        assert_eq!(r.failure, Some(GFailure::ZeroVector { index: 0 }));
        assert!(matches!(
            build_mep(&p, &[same.clone(), same]),
            Err(NepvError::InvalidG(GFailure::PairwiseDependent { .. }))
        ));
    }

    #[test]
    fn random_g_is_deterministic_and_valid() {
        assert_eq!(random_g(5, 1, 9), random_g(5, 1, 9));
        assert_ne!(random_g(5, 1, 9), random_g(5, 1, 10));
        let g = random_g(10, 2, 3);
        let p = NepvProblem::new(
            CMatrix::identity(10),
            CMatrix::identity(10),
            vec![CMatrix::identity(10), CMatrix::identity(10)],
            vec![vec![c(1.0); 10]; 2],
            vec![vec![c(1.0); 10]; 2],
        )
        .unwrap();
        assert!(validate_g(&p, &g).passed());
    }
}
