//! Inverse iteration on the pencil `(Δ₁, Δ₀)` from symmetric starts, with a
//! Sylvester-equation step for m = 1 and a hybrid driver that hands over to
//! symmetric residual inverse iteration.

use serde::{Deserialize, Serialize};

use crate::dense::{factor_rank_one, mu_from_rayleigh};
use crate::error::{NepvError, Result};
use crate::linalg::sylvester::GeneralizedSylvester;
use crate::linalg::{dot_h, kron_power, norm2, normalized, CMatrix, Lu, C64, ONE, ZERO};
use crate::linearize::MepProblem;
use crate::opdet::{build_deltas, DeltaSystem};
use crate::problem::{nepv_residual, NepvProblem};
use crate::resinv::{ris_solve, HistoryEntry, IterationResult, RiConfig, SolverStats, Status};

/// Window (iterations) without improvement after which II reports stagnation.
pub const STAGNATION_WINDOW: usize = 10;

/// Auto path switches to the Sylvester step above this n when m = 1.
pub const SYLVESTER_MIN_N: usize = 8;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub enum IiStart {
    /// `z₀ = x⁰ ⊗ … ⊗ x⁰`
    Symmetric(Vec<C64>),
    Explicit(Vec<C64>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum IiPath {
    Dense,
    Sylvester,
    Auto,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct IiConfig {
    pub sigma: C64,
    pub start: IiStart,
    pub max_iter: usize,
    pub tol: f64,
    pub path: IiPath,
}

impl IiConfig {
    pub fn new(sigma: C64, x0: Vec<C64>) -> Self {
        Self {
            sigma,
            start: IiStart::Symmetric(x0),
            max_iter: 100,
            tol: 1e-12,
            path: IiPath::Auto,
        }
    }
}

/// The m = 1 step: solves
/// `(A + g rᵀ + σB) Z Cᵀ − (C − g sᵀ) Z (A + σB)ᵀ = (C − g sᵀ) Z_k Bᵀ − B Z_k Cᵀ`,
/// which is `(Δ₁ − σΔ₀) vec(Z) = Δ₀ vec(Z_k)` with `z = x₁ ⊗ x₂ ⇔ Z = x₂x₁ᵀ`.
pub struct SylvesterStep {
    solver: GeneralizedSylvester,
    b: CMatrix,
    c: CMatrix,
    q: CMatrix,
    /// `A + g rᵀ`
    a_g: CMatrix,
    a: CMatrix,
}

impl SylvesterStep {
    pub fn new(mep: &MepProblem, sigma: C64) -> Result<Self> {
        if mep.m() != 1 {
            return Err(NepvError::InvalidConfig("the Sylvester step needs m = 1".into()));
        }
        let p = mep.problem();
        let (a, b, c) = (p.a().clone(), p.b().clone(), p.c()[0].clone());
        let q = mep.v(1, 2).clone();
        let a_g = mep.v(1, 0).scaled(-ONE);
        let mut pp = a_g.clone();
        pp.add_scaled(sigma, &b);
        let mut r = a.clone();
        r.add_scaled(sigma, &b);
        let solver = GeneralizedSylvester::new(&pp, &c, &q, &r)?;
        Ok(Self { solver, b, c, q, a_g, a })
    }

    /// `Z_{k+1}` (unnormalized).
    pub fn step(&self, zk: &CMatrix) -> CMatrix {
        let rhs = self.apply_delta0(zk);
        self.solver.solve(&rhs)
    }

    /// `Δ₀ vec(Z) = vec(Q Z Bᵀ − B Z Cᵀ)`.
    pub fn apply_delta0(&self, z: &CMatrix) -> CMatrix {
        self.q
            .matmul(z)
            .matmul(&self.b.transpose())
            .sub(&self.b.matmul(z).matmul(&self.c.transpose()))
    }

    /// `Δ₁ vec(Z) = vec((A + g rᵀ) Z Cᵀ − Q Z Aᵀ)`.
    pub fn apply_delta1(&self, z: &CMatrix) -> CMatrix {
        self.a_g
            .matmul(z)
            .matmul(&self.c.transpose())
            .sub(&self.q.matmul(z).matmul(&self.a.transpose()))
    }
}

/// One Sylvester step from `Z_k`.
pub fn sylvester_step(mep: &MepProblem, sigma: C64, zk: &CMatrix) -> Result<CMatrix> {
    Ok(SylvesterStep::new(mep, sigma)?.step(zk))
}

enum Stepper<'a> {
    Dense { lu: Lu, ds: DsRef<'a> },
    Sylvester(SylvesterStep),
}

enum DsRef<'a> {
    Borrowed(&'a DeltaSystem),
    Owned(Box<DeltaSystem>),
}

impl DsRef<'_> {
    fn get(&self) -> &DeltaSystem {
        match self {
            DsRef::Borrowed(d) => d,
            DsRef::Owned(d) => d,
        }
    }
}

impl Stepper<'_> {
    fn step(&self, z: &[C64], n: usize) -> Vec<C64> {
        match self {
            Stepper::Dense { lu, ds } => lu.solve(&ds.get().delta0().matvec(z)),
            Stepper::Sylvester(s) => s.step(&CMatrix::unvec(z, n)).into_vec(),
        }
    }

    fn rayleigh_lambda(&self, z: &[C64], n: usize) -> Result<C64> {
        match self {
            Stepper::Dense { ds, .. } => {
                let ds = ds.get();
                mu_from_rayleigh(z, ds.delta(1), ds.delta0())
            }
            Stepper::Sylvester(s) => {
                let zm = CMatrix::unvec(z, n);
                let d0 = s.apply_delta0(&zm);
                let den = dot_h(z, d0.as_slice());
                let scale = s.b.frobenius_norm() * (s.q.frobenius_norm() + s.c.frobenius_norm());
                if den.norm() <= 1e-12 * scale * norm2(z).powi(2) {
                    return Err(NepvError::DegenerateRayleigh);
                }
                Ok(dot_h(z, s.apply_delta1(&zm).as_slice()) / den)
            }
        }
    }
}

/// The path `ii_solve` takes: `Auto` picks Sylvester for `m = 1` above
/// `SYLVESTER_MIN_N`.
pub fn resolve_path(mep: &MepProblem, path: IiPath) -> IiPath {
    match path {
        IiPath::Auto if mep.m() == 1 && mep.n() > SYLVESTER_MIN_N => IiPath::Sylvester,
        IiPath::Auto => IiPath::Dense,
        p => p,
    }
}

/// `λ` from `xᴴ(A + λB + Σ μᵢCᵢ)x = 0`, used when `zᴴΔ₀z` degenerates.
fn pencil_rayleigh(p: &NepvProblem, mu: &[C64], x: &[C64]) -> C64 {
    let den = dot_h(x, &p.b().matvec(x));
    -dot_h(x, &p.pencil(ZERO, mu).matvec(x)) / den
}

fn start_vector(mep: &MepProblem, start: &IiStart) -> Result<Vec<C64>> {
    let (n, m) = (mep.n(), mep.m());
    let z = match start {
        IiStart::Symmetric(x) if x.len() != n => {
            return Err(NepvError::DimensionMismatch(format!("x0 has length {}, expected {n}", x.len())))
        }
        IiStart::Symmetric(x) => kron_power(x, m + 1),
        IiStart::Explicit(z) if z.len() != n.pow(m as u32 + 1) => {
            return Err(NepvError::DimensionMismatch("z0 length is not n^(m+1)".into()))
        }
        IiStart::Explicit(z) => z.clone(),
    };
    if norm2(&z) == 0.0 {
        return Err(NepvError::InvalidConfig("starting vector must be nonzero".into()));
    }
    Ok(normalized(&z))
}

/// Inverse iteration `z_{k+1} = normalize((Δ₁ − σΔ₀)⁻¹ Δ₀ z_k)`.
/// Builds the Δ-system when the dense path needs it.
pub fn ii_solve(mep: &MepProblem, cfg: &IiConfig) -> Result<IterationResult> {
    ii_run(mep, None, cfg)
}

/// As [`ii_solve`] with a prebuilt Δ-system for the dense path.
pub fn ii_solve_with(mep: &MepProblem, ds: &DeltaSystem, cfg: &IiConfig) -> Result<IterationResult> {
    ii_run(mep, Some(ds), cfg)
}

fn ii_run(mep: &MepProblem, ds: Option<&DeltaSystem>, cfg: &IiConfig) -> Result<IterationResult> {
    let (n, m) = (mep.n(), mep.m());
    let path = resolve_path(mep, cfg.path);
    let mut stats = SolverStats::default();
    let stepper = match path {
        IiPath::Sylvester => Stepper::Sylvester(SylvesterStep::new(mep, cfg.sigma).map_err(|e| match e {
            NepvError::SingularSylvesterOperator => NepvError::SingularShiftedPencil,
            e => e,
        })?),
        _ => {
            let ds = match ds {
                Some(d) => DsRef::Borrowed(d),
                None => DsRef::Owned(Box::new(build_deltas(mep)?)),
            };
            let mut shifted = ds.get().delta(1).clone();
            shifted.add_scaled(-cfg.sigma, ds.get().delta0());
            let lu = Lu::new(&shifted);
            if lu.is_exactly_singular() || !(lu.cond_1() < crate::opdet::SINGULAR_COND) {
                return Err(NepvError::SingularShiftedPencil);
            }
            Stepper::Dense { lu, ds }
        }
    };
    stats.factorizations = 1;

    let p = mep.problem();
    let mut z = start_vector(mep, &cfg.start)?;
    let mut history = Vec::new();
    let estimate = |z: &[C64]| -> (C64, Vec<C64>, Vec<C64>, f64) {
        let x = factor_rank_one(z, n, m).factors.swap_remove(0);
        let mu = p.f_all(&x).unwrap_or_else(|_| vec![C64::new(f64::NAN, f64::NAN); m]);
        let lambda = stepper
            .rayleigh_lambda(z, n)
            .unwrap_or_else(|_| pencil_rayleigh(p, &mu, &x));
        let res = nepv_residual(p, lambda, &x).unwrap_or(f64::INFINITY);
        (lambda, mu, x, if res.is_nan() { f64::INFINITY } else { res })
    };

    let (l0, mu0, x0, r0) = estimate(&z);
    history.push(HistoryEntry {
        iter: 0,
        residual: r0,
        lambda: l0,
        mu: mu0.clone(),
        symmetry_gap: None,
    });
    let mut last = (l0, mu0, x0, r0);
    let mut best = last.clone();
    let mut best_iter = 0usize;
    let mut status = Status::NotConverged;
    let mut iter = 0;
    while iter < cfg.max_iter {
        iter += 1;
        let next = stepper.step(&z, n);
        stats.solves += 1;
        stats.vector_updates += 1;
        let nn = norm2(&next);
        if !(nn > 0.0 && nn.is_finite()) {
            return Err(NepvError::SingularShiftedPencil);
        }
        z = next.into_iter().map(|v| v / nn).collect();
        last = estimate(&z);
        history.push(HistoryEntry {
            iter,
            residual: last.3,
            lambda: last.0,
            mu: last.1.clone(),
            symmetry_gap: None,
        });
        if last.3 < cfg.tol {
            status = Status::Converged;
            break;
        }
        if last.3 < best.3 * (1.0 - 1e-3) {
            best = last.clone();
            best_iter = iter;
        } else if iter - best_iter >= STAGNATION_WINDOW {
            status = Status::Stagnated;
            break;
        }
    }
    let (lambda, mu, x, residual) = if status == Status::Stagnated { best } else { last };
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

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HybridConfig {
    pub ii: IiConfig,
    /// Number of inverse-iteration steps before switching.
    pub k_switch: usize,
    pub ris_max_iter: usize,
    pub ris_tol: f64,
}

/// Runs `k_switch` inverse-iteration steps, then residual inverse iteration
/// seeded with the factored iterate `x̂`, `σ` = its Rayleigh estimate and
/// `τᵢ = fᵢ(x̂)`. With `k_switch = 0` the seed is the raw start and the II
/// shift. With `k_switch ≥ ii.max_iter`, or if II converges first, the
/// inverse-iteration result is returned unchanged.
pub fn hybrid_solve(mep: &MepProblem, cfg: &HybridConfig) -> Result<IterationResult> {
    hybrid_run(mep, None, cfg)
}

/// As [`hybrid_solve`] with a prebuilt Δ-system for a dense II phase.
pub fn hybrid_solve_with(mep: &MepProblem, ds: &DeltaSystem, cfg: &HybridConfig) -> Result<IterationResult> {
    hybrid_run(mep, Some(ds), cfg)
}

fn hybrid_run(mep: &MepProblem, ds: Option<&DeltaSystem>, cfg: &HybridConfig) -> Result<IterationResult> {
    let (n, m) = (mep.n(), mep.m());
    if cfg.k_switch >= cfg.ii.max_iter {
        return ii_run(mep, ds, &cfg.ii);
    }
    let (sigma, x_hat, mut head, stats) = if cfg.k_switch == 0 {
        let z = start_vector(mep, &cfg.ii.start)?;
        let x = match &cfg.ii.start {
            IiStart::Symmetric(x) => x.clone(),
            IiStart::Explicit(_) => factor_rank_one(&z, n, m).factors.swap_remove(0),
        };
        (cfg.ii.sigma, x, Vec::new(), SolverStats::default())
    } else {
        let mut ii_cfg = cfg.ii.clone();
        ii_cfg.max_iter = cfg.k_switch;
        let ii = ii_run(mep, ds, &ii_cfg)?;
        if ii.converged {
            return Ok(ii);
        }
        (ii.lambda, ii.x, ii.history, ii.stats)
    };
    if !sigma.is_finite() {
        return Err(NepvError::DegenerateRayleigh);
    }
    let mut ris_cfg = RiConfig::new(sigma, x_hat);
    ris_cfg.max_iter = cfg.ris_max_iter;
    ris_cfg.tol = cfg.ris_tol;
    let mut ris = ris_solve(mep, &ris_cfg)?;
    if cfg.k_switch == 0 {
        return Ok(ris);
    }
    let offset = cfg.k_switch;
    head.extend(ris.history.drain(..).skip(1).map(|mut h| {
        h.iter += offset;
        h
    }));
    ris.history = head;
    ris.iterations += offset;
    ris.switch_at = Some(offset);
    ris.stats.factorizations += stats.factorizations;
    ris.stats.solves += stats.solves;
    ris.stats.vector_updates += stats.vector_updates;
    Ok(ris)
}
