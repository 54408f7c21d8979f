//! Residual inverse iteration for the linearized MEP.
//!
//! Shifts `σ, τ` stay frozen. Each step solves a small (m+1)×(m+1) system for
//! the eigenvalue updates and then applies one residual correction per
//! eigenvector. The symmetric variant keeps a single vector for all rows.

use serde::{Deserialize, Serialize};

use crate::error::{NepvError, Result};
use crate::linalg::{conj, dot_h, dot_t, rel_diff, CMatrix, Lu, C64, ZERO};
use crate::linearize::MepProblem;
use crate::opdet::SINGULAR_COND;
use crate::problem::nepv_residual;

/// Condition limit of the parameter update system.
pub const UPDATE_COND_LIMIT: f64 = 1e12;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RiConfig {
    pub sigma: C64,
    /// Defaults to `fᵢ(x⁰)`.
    pub tau: Option<Vec<C64>>,
    /// Defaults to `conj(x⁰) / (x⁰ᴴx⁰)`.
    pub v: Option<Vec<C64>>,
    pub x0: Vec<C64>,
    /// Per-row starting vectors for [`ri_solve`]; all equal to `x0` if absent.
    pub x0_rows: Option<Vec<Vec<C64>>>,
    /// Per-row normalization vectors for [`ri_solve`]; all equal to `v` if absent.
    pub v_rows: Option<Vec<Vec<C64>>>,
    pub max_iter: usize,
    pub tol: f64,
    pub record_history: bool,
}

impl RiConfig {
    pub fn new(sigma: C64, x0: Vec<C64>) -> Self {
        Self {
            sigma,
            tau: None,
            v: None,
            x0,
            x0_rows: None,
            v_rows: None,
            max_iter: 100,
            tol: 1e-12,
            record_history: true,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Status {
    Converged,
    NotConverged,
    /// Residual stopped improving above the tolerance; the best iterate is returned.
    Stagnated,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub iter: usize,
    pub residual: f64,
    pub lambda: C64,
    pub mu: Vec<C64>,
    /// Largest relative difference between the row vectors (unsymmetric RI only).
    pub symmetry_gap: Option<f64>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SolverStats {
    pub factorizations: usize,
    pub solves: usize,
    /// Number of n-vectors replaced by a correction step.
    pub vector_updates: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct IterationResult {
    pub lambda: C64,
    pub mu: Vec<C64>,
    pub x: Vec<C64>,
    pub converged: bool,
    pub status: Status,
    pub iterations: usize,
    pub residual: f64,
    pub history: Vec<HistoryEntry>,
    pub stats: SolverStats,
    /// Iteration at which a hybrid run handed over to the second solver.
    pub switch_at: Option<usize>,
    /// Final per-row vectors of the unsymmetric method.
    pub row_vectors: Option<Vec<Vec<C64>>>,
}

/// `Tᵢ(λ, μ)` for the zero-based MEP row `i`.
pub fn make_t(mep: &MepProblem, i: usize, lambda: C64, mu: &[C64]) -> CMatrix {
    mep.t_matrix(i, lambda, mu)
}

/// `Tᵢ(λ, μ) x` in O(m n²) via `Tᵢ₊₁x = T₀x + gᵢ(rᵢᵀx − μᵢ sᵢᵀx)`.
pub fn apply_t(mep: &MepProblem, i: usize, lambda: C64, mu: &[C64], x: &[C64]) -> Vec<C64> {
    let p = mep.problem();
    let mut y = p.a().matvec(x);
    let bx = p.b().matvec(x);
    for (yi, b) in y.iter_mut().zip(&bx) {
        *yi += lambda * b;
    }
    for (cj, &mj) in p.c().iter().zip(mu) {
        let cx = cj.matvec(x);
        for (yi, c) in y.iter_mut().zip(&cx) {
            *yi += mj * c;
        }
    }
    if i > 0 {
        let j = i - 1;
        let coef = dot_t(&p.r()[j], x) - mu[j] * dot_t(&p.s()[j], x);
        for (yi, g) in y.iter_mut().zip(&mep.g()[j]) {
            *yi += coef * g;
        }
    }
    y
}

/// Frozen factorizations `Tᵢ(σ, τ)` and the functionals
/// `ψ_{φ,i}ᵀ = vᵢᵀ Tᵢ(σ,τ)⁻¹ ∂Tᵢ/∂φ`.
pub struct ShiftedRows {
    lus: Vec<Lu>,
    /// `uᵢ = Tᵢ(σ,τ)⁻ᵀ vᵢ`
    u: Vec<Vec<C64>>,
    /// `psi[i][φ]`, φ = 0 for λ and 1 + j for μⱼ
    psi: Vec<Vec<Vec<C64>>>,
}

impl ShiftedRows {
    /// `vs` holds one normalization vector per row.
    pub fn new(mep: &MepProblem, sigma: C64, tau: &[C64], vs: &[Vec<C64>]) -> Result<Self> {
        let k = mep.equations();
        let mut lus = Vec::with_capacity(k);
        let mut u = Vec::with_capacity(k);
        let mut psi = Vec::with_capacity(k);
        for i in 0..k {
            let t = mep.t_matrix(i, sigma, tau);
            let lu = Lu::new(&t);
            if lu.is_exactly_singular() || !(lu.cond_1() < SINGULAR_COND) {
                return Err(NepvError::SingularShiftedMatrix { row: i });
            }
            let ui = lu.solve_transpose(&vs[i]);
            let row_psi: Vec<Vec<C64>> = (1..=k).map(|phi| mep.v(i, phi).matvec_t(&ui)).collect();
            lus.push(lu);
            u.push(ui);
            psi.push(row_psi);
        }
        Ok(Self { lus, u, psi })
    }

    pub fn lu(&self, i: usize) -> &Lu {
        &self.lus[i]
    }

    /// Updates `(Δλ, Δμ)` from row vectors `xs` (one per row) at `(λ, μ)`:
    /// `γᵢ + Σ_φ (ψ_{φ,i}ᵀxᵢ) Δφ = 0` with `γᵢ = vᵢᵀTᵢ(σ,τ)⁻¹Tᵢ(λ,μ)xᵢ`.
    pub fn parameter_update(
        &self,
        mep: &MepProblem,
        lambda: C64,
        mu: &[C64],
        xs: &[&[C64]],
    ) -> Result<(C64, Vec<C64>)> {
        let k = mep.equations();
        let mut mat = CMatrix::zeros(k, k);
        let mut rhs = vec![ZERO; k];
        for i in 0..k {
            let x = xs[i];
            rhs[i] = -dot_t(&self.u[i], &apply_t(mep, i, lambda, mu, x));
            for phi in 0..k {
                mat[(i, phi)] = dot_t(&self.psi[i][phi], x);
            }
        }
        let lu = Lu::new(&mat);
        let cond = lu.cond_1();
        if !(cond <= UPDATE_COND_LIMIT) {
            return Err(NepvError::SingularUpdateSystem { cond });
        }
        let d = lu.solve(&rhs);
        Ok((d[0], d[1..].to_vec()))
    }

    /// `x − Tᵢ(σ,τ)⁻¹ Tᵢ(λ, μ) x`.
    pub fn correct(&self, mep: &MepProblem, i: usize, lambda: C64, mu: &[C64], x: &[C64]) -> Vec<C64> {
        let y = self.lus[i].solve(&apply_t(mep, i, lambda, mu, x));
        x.iter().zip(&y).map(|(a, b)| a - b).collect()
    }
}

/// Rescales `x` so that `vᵀx = 1`.
fn normalize_by(v: &[C64], x: &mut [C64]) -> Result<()> {
    let s = dot_t(v, x);
    if s == ZERO || !s.is_finite() {
        return Err(NepvError::InvalidConfig(
            "normalization functional vanishes on the iterate".into(),
        ));
    }
    for xi in x.iter_mut() {
        *xi /= s;
    }
    Ok(())
}

pub(crate) fn default_v(x0: &[C64]) -> Vec<C64> {
    let nn = dot_h(x0, x0);
    conj(x0).into_iter().map(|z| z / nn).collect()
}

struct Setup {
    tau: Vec<C64>,
    v: Vec<C64>,
    x0: Vec<C64>,
}

fn setup(mep: &MepProblem, cfg: &RiConfig) -> Result<Setup> {
    let (n, m) = (mep.n(), mep.m());
    if cfg.x0.len() != n {
        return Err(NepvError::DimensionMismatch(format!(
            "x0 has length {}, expected {n}",
            cfg.x0.len()
        )));
    }
    if cfg.x0.iter().all(|z| *z == ZERO) {
        return Err(NepvError::InvalidConfig("x0 must be nonzero".into()));
    }
    let tau = match &cfg.tau {
        Some(t) if t.len() != m => {
            return Err(NepvError::DimensionMismatch(format!("tau has {} entries, expected {m}", t.len())))
        }
        Some(t) => t.clone(),
        None => mep.problem().f_all(&cfg.x0)?,
    };
    let v = match &cfg.v {
        Some(v) if v.len() != n => {
            return Err(NepvError::DimensionMismatch(format!("v has length {}, expected {n}", v.len())))
        }
        Some(v) => v.clone(),
        None => default_v(&cfg.x0),
    };
    let mut x0 = cfg.x0.clone();
    normalize_by(&v, &mut x0)?;
    Ok(Setup { tau, v, x0 })
}

fn residual_or_inf(mep: &MepProblem, lambda: C64, x: &[C64]) -> f64 {
    nepv_residual(mep.problem(), lambda, x).unwrap_or(f64::INFINITY)
}

/// Symmetric residual inverse iteration: one eigenvector shared by all rows.
pub fn ris_solve(mep: &MepProblem, cfg: &RiConfig) -> Result<IterationResult> {
    let Setup { tau, v, x0: mut x } = setup(mep, cfg)?;
    let k = mep.equations();
    // factored on first use, so an exact start never touches the singular T(σ, τ)
    let mut rows: Option<ShiftedRows> = None;
    let mut stats = SolverStats::default();
    let (mut lambda, mut mu) = (cfg.sigma, tau.clone());
    let mut history = Vec::new();
    let mut iter = 0;
    let (status, residual) = loop {
        let residual = residual_or_inf(mep, lambda, &x);
        if cfg.record_history {
            history.push(HistoryEntry {
                iter,
                residual,
                lambda,
                mu: mu.clone(),
                symmetry_gap: None,
            });
        }
        if residual < cfg.tol {
            break (Status::Converged, residual);
        }
        if iter == cfg.max_iter || !lambda.is_finite() {
            break (Status::NotConverged, residual);
        }
        let rows = match &mut rows {
            Some(r) => r,
            None => {
                stats.factorizations += k;
                stats.solves += k;
                rows.insert(ShiftedRows::new(mep, cfg.sigma, &tau, &vec![v.clone(); k])?)
            }
        };
        let xs: Vec<&[C64]> = vec![&x; k];
        let (dl, dmu) = rows.parameter_update(mep, lambda, &mu, &xs)?;
        lambda += dl;
        for (mj, d) in mu.iter_mut().zip(&dmu) {
            *mj += d;
        }
        x = rows.correct(mep, 0, lambda, &mu, &x);
        stats.solves += 1;
        stats.vector_updates += 1;
        normalize_by(&v, &mut x)?;
        iter += 1;
    };
    Ok(IterationResult {
        lambda,
        mu,
        x,
        converged: status == Status::Converged,
        status,
        iterations: iter,
        residual,
        history,
        stats,
        switch_at: None,
        row_vectors: None,
    })
}

/// Unsymmetric residual inverse iteration with one vector per MEP row.
/// The NEPv residual is measured on the first row's vector.
pub fn ri_solve(mep: &MepProblem, cfg: &RiConfig) -> Result<IterationResult> {
    let Setup { tau, v, x0 } = setup(mep, cfg)?;
    let k = mep.equations();
    let vs = match &cfg.v_rows {
        Some(vs) if vs.len() != k => {
            return Err(NepvError::DimensionMismatch(format!("expected {k} row functionals")))
        }
        Some(vs) => vs.clone(),
        None => vec![v; k],
    };
    let mut xs = match &cfg.x0_rows {
        Some(xs) if xs.len() != k => {
            return Err(NepvError::DimensionMismatch(format!("expected {k} row start vectors")))
        }
        Some(xs) => xs.clone(),
        None => vec![x0; k],
    };
    for (x, vi) in xs.iter_mut().zip(&vs) {
        if x.len() != mep.n() || vi.len() != mep.n() {
            return Err(NepvError::DimensionMismatch("row vector length differs from n".into()));
        }
        normalize_by(vi, x)?;
    }
    let mut rows: Option<ShiftedRows> = None;
    let mut stats = SolverStats::default();
    let (mut lambda, mut mu) = (cfg.sigma, tau.clone());
    let mut history = Vec::new();
    let mut iter = 0;
    let (status, residual) = loop {
        let residual = residual_or_inf(mep, lambda, &xs[0]);
        if cfg.record_history {
            let gap = xs[1..].iter().map(|x| rel_diff(x, &xs[0])).fold(0.0, f64::max);
            history.push(HistoryEntry {
                iter,
                residual,
                lambda,
                mu: mu.clone(),
                symmetry_gap: Some(gap),
            });
        }
        if residual < cfg.tol {
            break (Status::Converged, residual);
        }
        if iter == cfg.max_iter || !lambda.is_finite() {
            break (Status::NotConverged, residual);
        }
        let rows = match &mut rows {
            Some(r) => r,
            None => {
                stats.factorizations += k;
                stats.solves += k;
                rows.insert(ShiftedRows::new(mep, cfg.sigma, &tau, &vs)?)
            }
        };
        let refs: Vec<&[C64]> = xs.iter().map(|x| x.as_slice()).collect();
        let (dl, dmu) = rows.parameter_update(mep, lambda, &mu, &refs)?;
        lambda += dl;
        for (mj, d) in mu.iter_mut().zip(&dmu) {
            *mj += d;
        }
        for i in 0..k {
            xs[i] = rows.correct(mep, i, lambda, &mu, &xs[i]);
            normalize_by(&vs[i], &mut xs[i])?;
        }
        stats.solves += k;
        stats.vector_updates += k;
        iter += 1;
    };
    Ok(IterationResult {
        lambda,
        mu,
        x: xs[0].clone(),
        converged: status == Status::Converged,
        status,
        iterations: iter,
        residual,
        history,
        stats,
        switch_at: None,
        row_vectors: Some(xs),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{norm2, normalized};
    use crate::linearize::build_mep;
    use crate::problem::NepvProblem;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    fn small_mep() -> MepProblem {
        let p = NepvProblem::new(
            CMatrix::from_real_rows(&[[1.0, 1.0], [0.0, 1.0]]),
            CMatrix::from_real_rows(&[[1.0, 2.0], [3.0, 4.0]]),
            vec![CMatrix::from_real_rows(&[[2.0, 0.0], [0.0, 1.0]])],
            vec![vec![c(3.0), c(2.0)]],
            vec![vec![c(4.0), c(3.0)]],
        )
        .unwrap();
        build_mep(&p, &[vec![c(1.0), c(3.0)]]).unwrap()
    }

    #[test]
    fn t_matrices_by_hand() {
        let mep = small_mep();
        assert_eq!(make_t(&mep, 0, ZERO, &[ZERO]), CMatrix::from_real_rows(&[[1.0, 1.0], [0.0, 1.0]]));
        assert_eq!(make_t(&mep, 1, ZERO, &[ZERO]), CMatrix::from_real_rows(&[[4.0, 3.0], [9.0, 7.0]]));
        let d = make_t(&mep, 1, ZERO, &[c(1.0)]).sub(&make_t(&mep, 1, ZERO, &[ZERO]));
        assert_eq!(d, CMatrix::from_real_rows(&[[-2.0, -3.0], [-12.0, -8.0]]));
    }

    #[test]
    fn fast_apply_matches_explicit_matrix() {
        let mep = small_mep();
        let x = [C64::new(0.2, 1.0), c(-0.7)];
        let (l, mu) = (C64::new(1.5, -0.5), [C64::new(0.3, 0.9)]);
        for i in 0..2 {
            let a = apply_t(&mep, i, l, &mu, &x);
            let b = make_t(&mep, i, l, &mu).matvec(&x);
            assert!(rel_diff(&a, &b) < 1e-15);
        }
    }

    #[test]
    fn ris_converges_on_small_problem() {
        let mep = small_mep();
        let cfg = RiConfig::new(c(5.2), normalized(&[c(-0.8), c(0.6)]));
        let res = ris_solve(&mep, &cfg).unwrap();
        assert!(res.converged, "{:?}", res.history.last());
        assert!((res.lambda - c(5.2462)).norm() < 5e-5);
        assert!(res.residual < 1e-12);
        assert_eq!(res.stats.vector_updates, res.iterations);
    }

    #[test]
    fn exact_start_is_fixed_point() {
        let mep = small_mep();
        let first = ris_solve(&mep, &RiConfig::new(c(5.2), normalized(&[c(-0.8), c(0.6)]))).unwrap();
        let mut cfg = RiConfig::new(first.lambda, first.x.clone());
        cfg.tol = 1e-12;
        let again = ris_solve(&mep, &cfg).unwrap();
        assert_eq!(again.iterations, 0);
        assert!(again.converged);
        let ri = ri_solve(&mep, &cfg).unwrap();
        assert_eq!(ri.iterations, 0);
    }

    #[test]
    fn ri_with_equal_starts_tracks_ris() {
        let mep = small_mep();
        let cfg = RiConfig::new(c(5.2), normalized(&[c(-0.8), c(0.6)]));
        let a = ris_solve(&mep, &cfg).unwrap();
        let b = ri_solve(&mep, &cfg).unwrap();
        for (ha, hb) in a.history.iter().zip(&b.history) {
            if ha.residual > 1e-6 {
                assert!((ha.lambda - hb.lambda).norm() < 1e-8 * (1.0 + ha.lambda.norm()));
                assert!(hb.symmetry_gap.unwrap() < 1e-10);
            }
        }
        assert!(norm2(&b.x) > 0.0);
    }

    #[test]
    fn bad_normalization_is_rejected() {
        let mep = small_mep();
        let mut cfg = RiConfig::new(c(5.2), vec![c(1.0), c(0.0)]);
        cfg.v = Some(vec![c(0.0), c(1.0)]);
        assert!(matches!(ris_solve(&mep, &cfg), Err(NepvError::InvalidConfig(_))));
    }
}
