//! The all-solutions path: solve `Δ₁z = λΔ₀z`, factor each eigenvector into
//! Kronecker form and keep the symmetric ones that solve the NEPv.

use std::cell::OnceCell;

use serde::{Deserialize, Serialize};

use crate::error::{NepvError, Result};
use crate::linalg::{
    conj, dot_h, dot_t, fix_phase, kron_vec, norm2, normalized, sin_angle, CMatrix, Lu, C64, ONE,
};
use crate::linearize::MepProblem;
use crate::opdet::{DeltaSystem, Nonsingularity};
use crate::resinv::{ris_solve, RiConfig};
use crate::problem::{nepv_residual, tol, Classification, NepvProblem, SolutionRecord};

/// Pencils up to this size go through QZ; larger ones through `Δ₀⁻¹Δ₁`.
pub const QZ_MAX_DIM: usize = 256;

/// Normalized `|gⱼᵀyⱼ₊₁|` below this flags a failed left-vector condition.
pub const G_ORTHOGONALITY: f64 = 1e-8;

/// Residual inverse iteration steps spent on a symmetric candidate whose
/// factored vector misses the residual test.
pub const POLISH_STEPS: usize = 3;

/// Largest relative move of `λ`, and largest angle move of `x`, that
/// polishing may make while still speaking for the same eigenpair.
pub const POLISH_DRIFT: f64 = 1e-6;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GepEigenpair {
    pub lambda: C64,
    /// Right eigenvector, unit 2-norm.
    pub z: Vec<C64>,
    /// Left eigenvector `w` with `wᵀΔ₁ = λ wᵀΔ₀`, unit 2-norm.
    pub left_w: Option<Vec<C64>>,
    /// `‖Δ₁z − λΔ₀z‖ / (‖Δ₁‖_F + |λ|‖Δ₀‖_F)`.
    pub backward_error: f64,
}

/// All eigenpairs of the pencil `(Δ₁, Δ₀)`.
pub fn solve_gep(delta1: &CMatrix, delta0: &CMatrix) -> Result<Vec<GepEigenpair>> {
    check_pencil(delta1, delta0)?;
    if delta1.rows() <= QZ_MAX_DIM {
        solve_qz(delta1, delta0)
    } else {
        solve_reduced(delta1, delta0, &Lu::new(delta0))
    }
}

fn check_pencil(delta1: &CMatrix, delta0: &CMatrix) -> Result<()> {
    if !delta1.is_square() || delta1.rows() != delta0.rows() || delta1.cols() != delta0.cols() {
        return Err(NepvError::DimensionMismatch("pencil matrices must be square and equal-sized".into()));
    }
    if !delta1.is_finite() || !delta0.is_finite() {
        return Err(NepvError::SingularPencil);
    }
    Ok(())
}

fn solve_qz(delta1: &CMatrix, delta0: &CMatrix) -> Result<Vec<GepEigenpair>> {
    let n = delta1.rows();
    let gev = delta1
        .as_faer()
        .generalized_eigen(delta0.as_faer())
        .map_err(|_| NepvError::ConvergenceFailure)?;
    let (sa, sb, u) = (gev.S_a(), gev.S_b(), gev.U());
    let scale = delta0.frobenius_norm().max(delta1.frobenius_norm());
    let mut lambdas = Vec::with_capacity(n);
    for k in 0..n {
        let (alpha, beta) = (sa[k], sb[k]);
        if beta.norm() <= f64::EPSILON * scale * 1e-3 || !(alpha / beta).is_finite() {
            return Err(NepvError::SingularPencil);
        }
        lambdas.push(alpha / beta);
    }
    Ok(pairs_from(delta1, delta0, lambdas, CMatrix::from_faer(u)))
}

fn solve_reduced(delta1: &CMatrix, delta0: &CMatrix, lu0: &Lu) -> Result<Vec<GepEigenpair>> {
    if lu0.is_exactly_singular() {
        return Err(NepvError::SingularPencil);
    }
    let gamma = lu0.solve_matrix(delta1);
    if !gamma.is_finite() {
        return Err(NepvError::SingularPencil);
    }
    let n = delta1.rows();
    // real pencils (the common case) run the Schur reduction in real arithmetic
    let evd = if gamma.as_slice().iter().all(|z| z.im == 0.0) {
        faer::Mat::<f64>::from_fn(n, n, |i, j| gamma[(i, j)].re).eigen()
    } else {
        gamma.as_faer().eigen()
    }
    .map_err(|_| NepvError::ConvergenceFailure)?;
    let lambdas = (0..n).map(|k| evd.S()[k]).collect();
    Ok(pairs_from(delta1, delta0, lambdas, CMatrix::from_faer(evd.U())))
}

/// Pairs eigenvalues with the columns of `u`, normalized, and records
/// backward errors from two blocked products.
fn pairs_from(delta1: &CMatrix, delta0: &CMatrix, lambdas: Vec<C64>, mut u: CMatrix) -> Vec<GepEigenpair> {
    let n = u.rows();
    for k in 0..u.cols() {
        let col = &mut u.as_mut_slice()[k * n..(k + 1) * n];
        let nrm = norm2(col);
        if nrm > 0.0 {
            col.iter_mut().for_each(|z| *z /= nrm);
        }
    }
    let (r1, r0) = (delta1.matmul(&u), delta0.matmul(&u));
    let (n1, n0) = (delta1.frobenius_norm(), delta0.frobenius_norm());
    lambdas
        .into_iter()
        .enumerate()
        .map(|(k, lambda)| {
            let r: Vec<C64> = r1.col(k).iter().zip(r0.col(k)).map(|(a, b)| a - lambda * b).collect();
            let scale = n1 + lambda.norm() * n0;
            GepEigenpair {
                lambda,
                z: u.col(k).to_vec(),
                left_w: None,
                backward_error: if scale > 0.0 { norm2(&r) / scale } else { 0.0 },
            }
        })
        .collect()
}

/// Fills `left_w` for every pair from `Y = (Δ₀U)⁻ᵀ`, whose columns satisfy
/// `yₖᵀΔ₁ = λₖ yₖᵀΔ₀` when the right eigenvectors `U` are independent.
pub fn attach_left_eigenvectors(pairs: &mut [GepEigenpair], delta0: &CMatrix) {
    let n = delta0.rows();
    let u = CMatrix::from_fn(n, pairs.len(), |i, k| pairs[k].z[i]);
    let w = delta0.matmul(&u);
    let y = Lu::new(&w).solve_transpose_matrix(&CMatrix::identity(n));
    for (k, p) in pairs.iter_mut().enumerate() {
        let col = y.col(k);
        p.left_w = if col.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
            Some(normalized(col))
        } else {
            None
        };
    }
}

/// `μ = zᴴΔz / zᴴΔ₀z`.
pub fn mu_from_rayleigh(z: &[C64], delta: &CMatrix, delta0: &CMatrix) -> Result<C64> {
    rayleigh_ratio(z, &delta.matvec(z), &delta0.matvec(z), delta0.frobenius_norm())
}

/// `zᴴ(Δz) / zᴴ(Δ₀z)` from precomputed products; `norm0 = ‖Δ₀‖_F`.
fn rayleigh_ratio(z: &[C64], dz: &[C64], d0z: &[C64], norm0: f64) -> Result<C64> {
    let den = dot_h(z, d0z);
    if den.norm() <= 1e-12 * norm0 * norm2(z).powi(2) {
        return Err(NepvError::DegenerateRayleigh);
    }
    Ok(dot_h(z, dz) / den)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RankOneFactorization {
    /// `x₁, …, x_{m+1}`, each unit norm with the largest entry real positive.
    pub factors: Vec<Vec<C64>>,
    /// `‖z − α x₁⊗…⊗x_{m+1}‖ / ‖z‖`.
    pub fit: f64,
    pub alpha: C64,
    pub symmetric: bool,
    /// Largest `sin∠(xᵢ, x₁)`.
    pub symmetry_defect: f64,
}

/// Best rank-one Kronecker factorization of `z ∈ ℂ^{n^{m+1}}` by successive
/// unfoldings `Z₁ = (x₂⊗…⊗x_{m+1}) x₁ᵀ`.
pub fn factor_rank_one(z: &[C64], n: usize, m: usize) -> RankOneFactorization {
    assert_eq!(z.len(), n.pow(m as u32 + 1), "vector length is not n^(m+1)");
    let mut factors = Vec::with_capacity(m + 1);
    let mut rest = z.to_vec();
    for _ in 0..m {
        let rows = rest.len() / n;
        let (x, u) = dominant_pair(&CMatrix::unvec(&rest, rows));
        factors.push(x);
        rest = u;
    }
    factors.push(normalized(&rest));
    for f in factors.iter_mut() {
        fix_phase(f);
    }
    let prod = factors[1..]
        .iter()
        .fold(factors[0].clone(), |acc, f| kron_vec(&acc, f));
    let alpha = dot_h(&prod, z);
    let zn = norm2(z);
    let fit = if zn == 0.0 {
        0.0
    } else {
        let resid: Vec<C64> = z.iter().zip(&prod).map(|(a, b)| a - alpha * b).collect();
        norm2(&resid) / zn
    };
    let symmetry_defect = factors[1..]
        .iter()
        .map(|f| sin_angle(f, &factors[0]))
        .fold(0.0, f64::max);
    RankOneFactorization {
        symmetric: fit < tol::FIT && symmetry_defect < tol::SYMMETRY,
        factors,
        fit,
        alpha,
        symmetry_defect,
    }
}

/// For `Z ≈ σ u vᴴ` returns `(conj(v), u)`, so that `Z ≈ σ u (conj v)ᵀ`.
fn dominant_pair(zmat: &CMatrix) -> (Vec<C64>, Vec<C64>) {
    let (rows, cols) = (zmat.rows(), zmat.cols());
    if let Ok(svd) = zmat.as_faer().thin_svd() {
        let s = svd.S().column_vector();
        let k = (0..s.nrows())
            .max_by(|&a, &b| s[a].re.total_cmp(&s[b].re))
            .unwrap_or(0);
        let (u, v) = (svd.U(), svd.V());
        let x: Vec<C64> = (0..cols).map(|i| v[(i, k)].conj()).collect();
        let w: Vec<C64> = (0..rows).map(|i| u[(i, k)]).collect();
        if x.iter().chain(&w).all(|c| c.re.is_finite() && c.im.is_finite()) {
            return (x, w);
        }
    }
    // power iteration fallback on ZᴴZ
    let mut x = vec![ONE; cols];
    for _ in 0..200 {
        let w = zmat.matvec(&x);
        x = normalized(&conj(&zmat.matvec_t(&conj(&w))));
    }
    let w = normalized(&zmat.matvec(&x));
    (conj(&x), w)
}

/// Diagnosis of an eigenpair that does not map back to an NEPv solution.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SpuriousReport {
    /// Factors `y₁, …, y_{m+1}` of the left eigenvector.
    pub left_factors: Vec<Vec<C64>>,
    pub left_fit: f64,
    /// Normalized `|gⱼᵀyⱼ₊₁| / (‖gⱼ‖‖yⱼ₊₁‖)`.
    pub g_dot_y: Vec<f64>,
    /// Normalized `|sⱼᵀx₁| / (‖sⱼ‖‖x₁‖)`.
    pub s_dot_x: Vec<f64>,
    pub g_condition_fails: Vec<bool>,
    pub s_condition_fails: Vec<bool>,
}

impl SpuriousReport {
    pub fn any_failure(&self) -> bool {
        self.g_condition_fails.iter().chain(&self.s_condition_fails).any(|&f| f)
    }
}

/// Checks the two back-mapping hypotheses `sⱼᵀx₁ ≠ 0` and `gⱼᵀyⱼ₊₁ ≠ 0`.
pub fn diagnose_spurious(mep: &MepProblem, pair: &GepEigenpair) -> Result<SpuriousReport> {
    let w = pair.left_w.as_ref().ok_or_else(|| {
        NepvError::InvalidConfig("left eigenvector required for diagnosis".into())
    })?;
    let (n, m) = (mep.n(), mep.m());
    let right = factor_rank_one(&pair.z, n, m);
    let left = factor_rank_one(w, n, m);
    let x1 = &right.factors[0];
    let normalized_dot = |a: &[C64], b: &[C64]| dot_t(a, b).norm() / (norm2(a) * norm2(b));
    let g_dot_y: Vec<f64> = (0..m)
        .map(|j| normalized_dot(&mep.g()[j], &left.factors[j + 1]))
        .collect();
    let s_dot_x: Vec<f64> = (0..m).map(|j| normalized_dot(&mep.problem().s()[j], x1)).collect();
    Ok(SpuriousReport {
        g_condition_fails: g_dot_y.iter().map(|&v| v < G_ORTHOGONALITY).collect(),
        s_condition_fails: s_dot_x.iter().map(|&v| v <= tol::DENOMINATOR).collect(),
        left_factors: left.factors,
        left_fit: left.fit,
        g_dot_y,
        s_dot_x,
    })
}

/// Which non-solutions get a left-eigenvector diagnosis.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Diagnose {
    /// Spurious always; non-symmetric only for pencils up to `QZ_MAX_DIM`.
    #[default]
    Auto,
    All,
    SpuriousOnly,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExtractOptions {
    /// Residual below which a symmetric eigenpair counts as a solution.
    pub accept: f64,
    pub diagnose: Diagnose,
}

impl Default for ExtractOptions {
    fn default() -> Self {
        Self {
            accept: tol::ACCEPT,
            diagnose: Diagnose::Auto,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DenseSolution {
    pub eigenpairs: Vec<GepEigenpair>,
    /// One record per distinct eigenpair, sorted by `|λ|`.
    pub records: Vec<SolutionRecord>,
}

impl DenseSolution {
    pub fn true_solutions(&self) -> impl Iterator<Item = &SolutionRecord> {
        self.records
            .iter()
            .filter(|r| r.classification == Classification::True)
    }
}

pub fn extract_nepv_solutions(
    p: &NepvProblem,
    mep: &MepProblem,
    ds: &DeltaSystem,
) -> Result<DenseSolution> {
    extract_with(p, mep, ds, &ExtractOptions::default())
}

pub fn extract_with(
    p: &NepvProblem,
    mep: &MepProblem,
    ds: &DeltaSystem,
    opts: &ExtractOptions,
) -> Result<DenseSolution> {
    if ds.nonsingular() == Nonsingularity::No {
        return Err(NepvError::SingularDelta0 { cond: ds.cond() });
    }
    let (n, m) = (p.n(), p.m());
    let delta1 = ds.delta(1);
    let delta0 = ds.delta0();
    check_pencil(delta1, delta0)?;
    let mut pairs = if ds.dim() <= QZ_MAX_DIM {
        solve_qz(delta1, delta0)?
    } else {
        solve_reduced(delta1, delta0, ds.lu0())?
    };

    let mut order: Vec<usize> = (0..pairs.len()).collect();
    order.sort_by(|&a, &b| {
        let (la, lb) = (pairs[a].lambda, pairs[b].lambda);
        la.norm()
            .total_cmp(&lb.norm())
            .then(la.im.total_cmp(&lb.im))
            .then(la.re.total_cmp(&lb.re))
    });

    // Δ₀Z and Δⱼ₊₁Z for every eigenvector at once, built on first use
    let products: OnceCell<(CMatrix, Vec<CMatrix>)> = OnceCell::new();
    let norm0 = delta0.frobenius_norm();
    let rayleigh = |k: usize| -> Vec<C64> {
        let (d0z, dz) = products.get_or_init(|| {
            let u = CMatrix::from_fn(ds.dim(), pairs.len(), |i, j| pairs[j].z[i]);
            let dz = (0..m).map(|j| ds.delta(j + 2).matmul(&u)).collect();
            (delta0.matmul(&u), dz)
        });
        dz.iter()
            .map(|d| {
                rayleigh_ratio(&pairs[k].z, d.col(k), d0z.col(k), norm0).unwrap_or(C64::new(f64::NAN, f64::NAN))
            })
            .collect()
    };
    let close = |a: C64, b: C64| (a - b).norm() <= tol::DEDUP * (1.0 + a.norm().max(b.norm()));
    let factors: Vec<RankOneFactorization> = pairs.iter().map(|q| factor_rank_one(&q.z, n, m)).collect();

    let mut records: Vec<SolutionRecord> = Vec::with_capacity(pairs.len());
    let mut kept: Vec<usize> = Vec::new();
    for &k in &order {
        let duplicate = kept.iter().any(|&j| {
            close(pairs[j].lambda, pairs[k].lambda)
                && sin_angle(&factors[j].factors[0], &factors[k].factors[0]) < tol::DEDUP
                && sin_angle(&pairs[j].z, &pairs[k].z) < tol::DEDUP
        });
        if duplicate {
            continue;
        }
        kept.push(k);
        let clustered = pairs
            .iter()
            .enumerate()
            .any(|(j, q)| j != k && close(q.lambda, pairs[k].lambda));
        let mut record = classify(p, mep, &pairs[k], &factors[k], k, !clustered, opts.accept, || rayleigh(k));
        if record.refined
            && records.iter().any(|r| {
                r.classification == Classification::True
                    && close(r.lambda, record.lambda)
                    && sin_angle(&r.x, &record.x) < POLISH_DRIFT
            })
        {
            record.classification = Classification::Spurious;
        }
        records.push(record);
    }

    let wants = |r: &SolutionRecord| match r.classification {
        Classification::True => false,
        Classification::Spurious => true,
        Classification::NonSymmetric => match opts.diagnose {
            Diagnose::All => true,
            Diagnose::SpuriousOnly => false,
            Diagnose::Auto => ds.dim() <= QZ_MAX_DIM,
        },
    };
    if records.iter().any(|r| wants(r)) {
        attach_left_eigenvectors(&mut pairs, delta0);
        for r in records.iter_mut() {
            if wants(r) && pairs[r.gep_index].left_w.is_some() {
                r.diagnostics = Some(diagnose_spurious(mep, &pairs[r.gep_index])?);
            }
        }
    }
    Ok(DenseSolution {
        eigenpairs: pairs,
        records,
    })
}

fn classify(
    p: &NepvProblem,
    mep: &MepProblem,
    pair: &GepEigenpair,
    fr: &RankOneFactorization,
    index: usize,
    symmetry_known: bool,
    accept: f64,
    rayleigh: impl Fn() -> Vec<C64>,
) -> SolutionRecord {
    let x = fr.factors[0].clone();
    let mut record = SolutionRecord {
        gep_index: index,
        lambda: pair.lambda,
        mu: Vec::new(),
        x: x.clone(),
        classification: Classification::NonSymmetric,
        residual: f64::INFINITY,
        fit: fr.fit,
        symmetry_defect: fr.symmetry_defect,
        symmetry_known,
        refined: false,
        diagnostics: None,
    };
    match (p.f_all(&x), nepv_residual(p, pair.lambda, &x)) {
        (Ok(mu), Ok(res)) => {
            record.residual = res;
            if fr.symmetric {
                record.mu = mu;
                record.classification = Classification::Spurious;
                if res < accept {
                    record.classification = Classification::True;
                } else if let Some((lambda, x, mu, res)) = polish(mep, pair.lambda, &record.mu, &x, accept) {
                    record.lambda = lambda;
                    record.x = x;
                    record.mu = mu;
                    record.residual = res;
                    record.refined = true;
                    record.classification = Classification::True;
                }
            } else {
                record.mu = rayleigh();
            }
        }
        _ => {
            record.mu = rayleigh();
            if fr.symmetric {
                record.classification = Classification::Spurious;
            }
        }
    }
    record
}

/// A few residual inverse iteration steps from `(λ, x)`; `Some` only when
/// the result passes the residual test without drifting off the eigenpair.
fn polish(
    mep: &MepProblem,
    lambda: C64,
    mu: &[C64],
    x: &[C64],
    accept: f64,
) -> Option<(C64, Vec<C64>, Vec<C64>, f64)> {
    let offset = 0.1 * POLISH_DRIFT * (1.0 + lambda.norm());
    let mut cfg = RiConfig::new(lambda + C64::new(offset, 0.0), x.to_vec());
    cfg.tau = Some(mu.to_vec());
    cfg.max_iter = POLISH_STEPS;
    cfg.tol = f64::EPSILON;
    let out = ris_solve(mep, &cfg).ok()?;
    let mut xp = normalized(&out.x);
    fix_phase(&mut xp);
    let stays = (out.lambda - lambda).norm() <= POLISH_DRIFT * (1.0 + lambda.norm())
        && sin_angle(&xp, x) <= POLISH_DRIFT;
    if !(stays && out.residual < accept) {
        return None;
    }
    let mu = mep.problem().f_all(&xp).ok()?;
    Some((out.lambda, xp, mu, out.residual))
}
