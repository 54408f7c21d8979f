//! Seeded problem generators and a brute-force solver for small instances.

use serde::{Deserialize, Serialize};

use crate::error::{NepvError, Result};
use crate::linalg::schur::Schur;
use crate::linalg::{dot_t, fix_phase, norm2, normalized, sin_angle, CMatrix, Lu, C64, ONE, ZERO};
use crate::linearize::random_g;
use crate::problem::{count_solutions, nepv_residual, tol, NepvProblem};
use crate::rng::SplitMix64;

/// Stream tags of the generated objects; see [`crate::rng`].
pub mod tags {
    pub const A: u64 = 1;
    pub const B: u64 = 2;
    pub const C: u64 = 16;
    pub const R: u64 = 1024;
    pub const S: u64 = 2048;
    pub const X0: u64 = 8192;
}

fn real_matrix(n: usize, seed: u64, tag: u64) -> CMatrix {
    let mut rng = SplitMix64::stream(seed, tag);
    CMatrix::from_fn(n, n, |_, _| C64::new(rng.next_normal(), 0.0))
}

fn real_vector(n: usize, seed: u64, tag: u64) -> Vec<C64> {
    let mut rng = SplitMix64::stream(seed, tag);
    (0..n).map(|_| C64::new(rng.next_normal(), 0.0)).collect()
}

/// Random problem with real standard-normal data and its g vectors.
/// Matrices are filled in column-major order from their own streams.
pub fn gen_random(n: usize, m: usize, seed: u64) -> Result<(NepvProblem, Vec<Vec<C64>>)> {
    if n < 2 || m < 1 {
        return Err(NepvError::InvalidProblem("gen_random needs n ≥ 2 and m ≥ 1".into()));
    }
    let a = real_matrix(n, seed, tags::A);
    let b = real_matrix(n, seed, tags::B);
    let c = (0..m).map(|i| real_matrix(n, seed, tags::C + i as u64)).collect();
    let r = (0..m).map(|i| real_vector(n, seed, tags::R + i as u64)).collect();
    let s = (0..m).map(|i| real_vector(n, seed, tags::S + i as u64)).collect();
    let p = NepvProblem::new(a, b, c, r, s)?;
    Ok((p, random_g(n, m, seed)))
}

/// Seeded complex start vector, unit norm.
pub fn random_start(n: usize, seed: u64) -> Vec<C64> {
    let mut rng = SplitMix64::stream(seed, tags::X0);
    let x: Vec<C64> = (0..n).map(|_| C64::new(rng.next_normal(), rng.next_normal())).collect();
    normalized(&x)
}

/// Finite-difference discretization of
/// `u'' + λ k₁(x) u + (∫ w(x)u dx / u'(0)) k₂(x) u = 0` on `[−1, 1]`
/// with homogeneous Dirichlet conditions and `n` interior nodes.
#[derive(Clone, Copy, Debug)]
pub struct PdeSpec {
    pub n: usize,
    pub gamma: f64,
    pub k1: fn(f64) -> f64,
    pub k2: fn(f64) -> f64,
    /// Weight `w(x; γ)` of the integral functional.
    pub weight: fn(f64, f64) -> f64,
}

fn default_k1(x: f64) -> f64 {
    1.0 + (5.0 * x).tanh() / 2.0
}

fn default_k2(x: f64) -> f64 {
    1.0 + (std::f64::consts::PI * x).cos() / 2.0
}

fn default_weight(x: f64, gamma: f64) -> f64 {
    (-gamma * x * x).exp()
}

impl Default for PdeSpec {
    fn default() -> Self {
        Self {
            n: 100,
            gamma: 10.0,
            k1: default_k1,
            k2: default_k2,
            weight: default_weight,
        }
    }
}

impl PdeSpec {
    pub fn with_n(n: usize) -> Self {
        Self { n, ..Self::default() }
    }

    pub fn h(&self) -> f64 {
        2.0 / (self.n as f64 + 1.0)
    }

    /// Interior nodes `x_j = −1 + jh`, j = 1..n.
    pub fn grid(&self) -> Vec<f64> {
        let h = self.h();
        (1..=self.n).map(|j| -1.0 + j as f64 * h).collect()
    }
}

pub fn gen_pde(spec: &PdeSpec) -> Result<NepvProblem> {
    let n = spec.n;
    if n < 3 {
        return Err(NepvError::InvalidProblem("PDE grid needs at least 3 interior nodes".into()));
    }
    let h = spec.h();
    let xs = spec.grid();
    let inv_h2 = 1.0 / (h * h);
    let a = CMatrix::from_fn(n, n, |i, j| {
        let v = if i == j {
            -2.0
        } else if i.abs_diff(j) == 1 {
            1.0
        } else {
            0.0
        };
        C64::new(v * inv_h2, 0.0)
    });
    let k1: Vec<C64> = xs.iter().map(|&x| C64::new((spec.k1)(x), 0.0)).collect();
    let k2: Vec<C64> = xs.iter().map(|&x| C64::new((spec.k2)(x), 0.0)).collect();
    let w: Vec<C64> = xs
        .iter()
        .map(|&x| C64::new(h * (spec.weight)(x, spec.gamma), 0.0))
        .collect();
    let mut b = vec![ZERO; n];
    if n % 2 == 0 {
        // nodes n/2 and n/2 + 1 (1-based) sit at ∓h/2
        b[n / 2] = C64::new(1.0 / h, 0.0);
        b[n / 2 - 1] = C64::new(-1.0 / h, 0.0);
    } else {
        let mid = (n + 1) / 2 - 1;
        b[mid + 1] = C64::new(0.5 / h, 0.0);
        b[mid - 1] = C64::new(-0.5 / h, 0.0);
    }
    NepvProblem::new(a, CMatrix::diag(&k1), vec![CMatrix::diag(&k2)], vec![w], vec![b])
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OracleSolution {
    pub lambda: C64,
    pub mu: Vec<C64>,
    pub x: Vec<C64>,
    pub residual: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum OraclePath {
    Resultant,
    Multistart,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OracleOutput {
    pub path: OraclePath,
    pub solutions: Vec<OracleSolution>,
    /// All `Cᵢ` vanish, so μ carries no information about the solution.
    pub mu_unidentifiable: bool,
    /// Multistart found fewer than the generic count.
    pub incomplete: bool,
}

/// Solves small instances without the linearization: a resultant in one
/// variable for n = 2, m = 1 and multistart Newton for n(m+1) ≤ 12.
pub fn brute_force_solve(p: &NepvProblem) -> Result<OracleOutput> {
    let (n, m) = (p.n(), p.m());
    let mu_unidentifiable = p.c().iter().all(|c| c.frobenius_norm() == 0.0);
    let (path, mut solutions) = if n == 2 && m == 1 {
        (OraclePath::Resultant, resultant_2x2(p)?)
    } else if n * (m + 1) <= 12 {
        (OraclePath::Multistart, multistart(p)?)
    } else {
        return Err(NepvError::InvalidProblem(
            "brute force supports n = 2, m = 1 or n(m+1) ≤ 12".into(),
        ));
    };
    solutions.sort_by(|a, b| {
        a.lambda
            .re
            .total_cmp(&b.lambda.re)
            .then(a.lambda.im.total_cmp(&b.lambda.im))
    });
    let ns = count_solutions(n, m)? as usize;
    Ok(OracleOutput {
        path,
        incomplete: path == OraclePath::Multistart && solutions.len() < ns,
        solutions,
        mu_unidentifiable,
    })
}

type Poly = Vec<C64>;

fn poly_mul(a: &[C64], b: &[C64]) -> Poly {
    let mut out = vec![ZERO; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

fn poly_sub(a: &[C64], b: &[C64]) -> Poly {
    let len = a.len().max(b.len());
    (0..len)
        .map(|i| a.get(i).copied().unwrap_or(ZERO) - b.get(i).copied().unwrap_or(ZERO))
        .collect()
}

fn poly_eval(a: &[C64], t: C64) -> C64 {
    a.iter().rev().fold(ZERO, |acc, c| acc * t + c)
}

fn poly_derivative(a: &[C64]) -> Poly {
    a.iter()
        .enumerate()
        .skip(1)
        .map(|(k, c)| c * k as f64)
        .collect()
}

/// Roots by eigenvalues of the companion matrix, each polished by Newton.
fn poly_roots(coeffs: &[C64]) -> Result<Vec<C64>> {
    let scale = coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max);
    if scale == 0.0 {
        return Ok(Vec::new());
    }
    let mut deg = coeffs.len() - 1;
    while deg > 0 && coeffs[deg].norm() <= 1e-14 * scale {
        deg -= 1;
    }
    if deg == 0 {
        return Ok(Vec::new());
    }
    let lead = coeffs[deg];
    let comp = CMatrix::from_fn(deg, deg, |i, j| {
        if i == 0 {
            -coeffs[deg - 1 - j] / lead
        } else if i == j + 1 {
            ONE
        } else {
            ZERO
        }
    });
    let poly = &coeffs[..=deg];
    let dpoly = poly_derivative(poly);
    Ok(Schur::new(&comp)?
        .eigenvalues()
        .into_iter()
        .map(|mut t| {
            for _ in 0..3 {
                let d = poly_eval(&dpoly, t);
                if d.norm() == 0.0 {
                    break;
                }
                let step = poly_eval(poly, t) / d;
                if !step.is_finite() {
                    break;
                }
                t -= step;
            }
            t
        })
        .collect())
}

/// `M (1, t)ᵀ` as two linear polynomials in t.
fn mat_times_line(mat: &CMatrix) -> [Poly; 2] {
    [vec![mat[(0, 0)], mat[(0, 1)]], vec![mat[(1, 0)], mat[(1, 1)]]]
}

fn resultant_2x2(p: &NepvProblem) -> Result<Vec<OracleSolution>> {
    let (r, s) = (&p.r()[0], &p.s()[0]);
    let num: Poly = vec![r[0], r[1]];
    let den: Poly = vec![s[0], s[1]];
    let [ax1, ax2] = mat_times_line(p.a());
    let [bx1, bx2] = mat_times_line(p.b());
    let [cx1, cx2] = mat_times_line(&p.c()[0]);
    // rows D·(Ax)ₖ + N·(Cx)ₖ + λ D·(Bx)ₖ = 0; eliminating λ leaves D · q(t)
    let det_a = poly_sub(&poly_mul(&ax1, &bx2), &poly_mul(&ax2, &bx1));
    let det_c = poly_sub(&poly_mul(&cx1, &bx2), &poly_mul(&cx2, &bx1));
    let q = {
        let u = poly_mul(&den, &det_a);
        let v = poly_mul(&num, &det_c);
        u.iter().zip(&v).map(|(a, b)| a + b).collect::<Vec<_>>()
    };
    let mut candidates: Vec<Vec<C64>> = poly_roots(&q)?
        .into_iter()
        .filter(|t| t.is_finite())
        .map(|t| vec![ONE, t])
        .collect();
    candidates.push(vec![ZERO, ONE]);
    let mut out: Vec<OracleSolution> = Vec::new();
    for x in candidates {
        if let Some(sol) = back_substitute(p, &x) {
            push_unique(&mut out, sol);
        }
    }
    Ok(out)
}

/// Least-squares λ for a fixed x; kept if the NEPv residual is small.
fn back_substitute(p: &NepvProblem, x: &[C64]) -> Option<OracleSolution> {
    let mu = p.f_all(x).ok()?;
    let rest = {
        let mut t = p.a().clone();
        for (c, &m) in p.c().iter().zip(&mu) {
            t.add_scaled(m, c);
        }
        t.matvec(x)
    };
    let bx = p.b().matvec(x);
    let bb: f64 = bx.iter().map(|z| z.norm_sqr()).sum();
    if bb == 0.0 {
        return None;
    }
    let lambda = -bx.iter().zip(&rest).map(|(b, a)| b.conj() * a).sum::<C64>() / bb;
    let mut x = normalized(x);
    fix_phase(&mut x);
    let residual = nepv_residual(p, lambda, &x).ok()?;
    (residual < 1e-10).then_some(OracleSolution {
        lambda,
        mu,
        x,
        residual,
    })
}

fn push_unique(out: &mut Vec<OracleSolution>, sol: OracleSolution) {
    let dup = out.iter().any(|o| {
        (o.lambda - sol.lambda).norm() <= tol::DEDUP * (1.0 + o.lambda.norm())
            && sin_angle(&o.x, &sol.x) <= tol::DEDUP
    });
    if !dup {
        out.push(sol);
    }
}

/// Damped Newton on `[(A + λB + Σ fᵢ(x)Cᵢ)x; vᵀx − 1]` from seeded starts.
fn multistart(p: &NepvProblem) -> Result<Vec<OracleSolution>> {
    let (n, m) = (p.n(), p.m());
    let ns = count_solutions(n, m)? as usize;
    let starts = 200 * ns;
    let lam_scale = p.a().frobenius_norm() / p.b().frobenius_norm().max(f64::MIN_POSITIVE);
    let mut rng = SplitMix64::stream(0x6f72_6163_6c65, n as u64 * 31 + m as u64);
    let mut out = Vec::new();
    for _ in 0..starts {
        let x0: Vec<C64> = (0..n).map(|_| C64::new(rng.next_normal(), rng.next_normal())).collect();
        let l0 = C64::new(rng.next_normal(), rng.next_normal()) * lam_scale;
        if let Some((lambda, x)) = newton(p, x0, l0) {
            let mut x = normalized(&x);
            fix_phase(&mut x);
            let Ok(residual) = nepv_residual(p, lambda, &x) else { continue };
            if residual < 1e-12 {
                let mu = p.f_all(&x)?;
                push_unique(&mut out, OracleSolution { lambda, mu, x, residual });
            }
        }
    }
    Ok(out)
}

fn newton(p: &NepvProblem, x0: Vec<C64>, l0: C64) -> Option<(C64, Vec<C64>)> {
    let (n, m) = (p.n(), p.m());
    let v: Vec<C64> = crate::linalg::conj(&x0).iter().map(|z| z / norm2(&x0).powi(2)).collect();
    let eval = |x: &[C64], l: C64| -> Option<Vec<C64>> {
        let f = p.f_all(x).ok()?;
        let mut out = p.pencil(l, &f).matvec(x);
        out.push(dot_t(&v, x) - ONE);
        Some(out)
    };
    let (mut x, mut l) = (x0, l0);
    let mut fx = eval(&x, l)?;
    for _ in 0..100 {
        let fnorm = norm2(&fx);
        if fnorm < 1e-15 {
            break;
        }
        let f = p.f_all(&x).ok()?;
        let mut jac = CMatrix::zeros(n + 1, n + 1);
        let t = p.pencil(l, &f);
        for j in 0..n {
            for i in 0..n {
                jac[(i, j)] = t[(i, j)];
            }
        }
        for i in 0..m {
            // ∇fᵢ = (rᵢ sᵢᵀx − sᵢ rᵢᵀx) / (sᵢᵀx)²
            let (r, s) = (&p.r()[i], &p.s()[i]);
            let (rx, sx) = (dot_t(r, &x), dot_t(s, &x));
            let cx = p.c()[i].matvec(&x);
            for j in 0..n {
                let grad = (r[j] * sx - s[j] * rx) / (sx * sx);
                for k in 0..n {
                    jac[(k, j)] += cx[k] * grad;
                }
            }
        }
        let bx = p.b().matvec(&x);
        for k in 0..n {
            jac[(k, n)] = bx[k];
            jac[(n, k)] = v[k];
        }
        let lu = Lu::new(&jac);
        if lu.is_exactly_singular() {
            return None;
        }
        let step = lu.solve(&fx);
        if !step.iter().all(|z| z.is_finite()) {
            return None;
        }
        let mut alpha = 1.0;
        loop {
            let xn: Vec<C64> = x.iter().zip(&step).map(|(a, d)| a - d * alpha).collect();
            let ln = l - step[n] * alpha;
            if let Some(fn_) = eval(&xn, ln) {
                if norm2(&fn_) < fnorm || alpha < 1e-4 {
                    x = xn;
                    l = ln;
                    fx = fn_;
                    break;
                }
            }
            alpha *= 0.5;
            if alpha < 1e-4 {
                return None;
            }
        }
    }
    l.is_finite().then_some((l, x))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn generators_are_deterministic() {
        let (p1, g1) = gen_random(5, 1, 42).unwrap();
        let (p2, g2) = gen_random(5, 1, 42).unwrap();
        assert_eq!(p1, p2);
        assert_eq!(g1, g2);
        let (p3, _) = gen_random(5, 1, 43).unwrap();
        assert_ne!(p1, p3);
    }

    #[test]
    fn pde_structure() {
        let p = gen_pde(&PdeSpec::default()).unwrap();
        let h = 2.0 / 101.0;
        let b = &p.s()[0];
        let nz: Vec<usize> = (0..100).filter(|&i| b[i] != ZERO).collect();
        assert_eq!(nz, vec![49, 50]);
        assert!((b[50].re - 1.0 / h).abs() < 1e-12 && (b[49].re + 1.0 / h).abs() < 1e-12);
        assert!((b[50].re - 50.5).abs() < 1e-12);
        assert!(p.r()[0].iter().all(|a| a.re > 0.0));
        for i in 0..100 {
            assert!((0.5..=1.5).contains(&p.b()[(i, i)].re));
            assert!((0.5..=1.5).contains(&p.c()[0][(i, i)].re));
        }
        assert_eq!(p.a(), &p.a().transpose());
        let odd = gen_pde(&PdeSpec::with_n(7)).unwrap();
        let nz: Vec<usize> = (0..7).filter(|&i| odd.s()[0][i] != ZERO).collect();
        assert_eq!(nz, vec![2, 4]);
    }

    #[test]
    fn pde_weight_concentrates_for_large_gamma() {
        let spec = PdeSpec {
            gamma: 100.0,
            ..PdeSpec::default()
        };
        let p = gen_pde(&spec).unwrap();
        for (x, a) in spec.grid().iter().zip(&p.r()[0]) {
            if x.abs() > 0.5 {
                assert!(a.re / spec.h() < 1e-6);
            }
        }
    }

    #[test]
    fn decoupled_instance() {
        let p = NepvProblem::new(
            CMatrix::diag(&[c(-1.0), c(-2.0)]),
            CMatrix::identity(2),
            vec![CMatrix::zeros(2, 2)],
            vec![vec![c(1.0), c(2.0)]],
            vec![vec![c(1.0), c(1.0)]],
        )
        .unwrap();
        let out = brute_force_solve(&p).unwrap();
        assert!(out.mu_unidentifiable);
        let ls: Vec<f64> = out.solutions.iter().map(|s| s.lambda.re).collect();
        assert_eq!(ls.len(), 2);
        assert!((ls[0] - 1.0).abs() < 1e-12 && (ls[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn resultant_on_small_problem() {
        let p = NepvProblem::new(
            CMatrix::from_real_rows(&[[1.0, 1.0], [0.0, 1.0]]),
            CMatrix::from_real_rows(&[[1.0, 2.0], [3.0, 4.0]]),
            vec![CMatrix::from_real_rows(&[[2.0, 0.0], [0.0, 1.0]])],
            vec![vec![c(3.0), c(2.0)]],
            vec![vec![c(4.0), c(3.0)]],
        )
        .unwrap();
        let out = brute_force_solve(&p).unwrap();
        let mut ls: Vec<f64> = out.solutions.iter().map(|s| s.lambda.re).collect();
        ls.sort_by(f64::total_cmp);
        assert_eq!(ls.len(), 3);
        for (got, want) in ls.iter().zip([-0.4367, -0.4224, 5.2462]) {
            assert!((got - want).abs() < 5e-5, "{got} vs {want}");
        }
        for s in &out.solutions {
            assert!(s.residual < 1e-12);
        }
    }

    #[test]
    fn multistart_finds_generic_count_for_n3() {
        let (p, _) = gen_random(3, 1, 5).unwrap();
        let out = brute_force_solve(&p).unwrap();
        assert_eq!(out.path, OraclePath::Multistart);
        assert!(out.solutions.len() <= 6);
        for s in &out.solutions {
            assert!(s.residual < 1e-12);
        }
    }

    #[test]
    fn random_generic_counts() {
        let mut full = 0;
        for seed in 0..50 {
            let (p, _) = gen_random(2, 1, seed).unwrap();
            let k = brute_force_solve(&p).unwrap().solutions.len();
            assert!(k <= 3);
            full += (k == 3) as usize;
        }
        assert!(full >= 48, "{full}");
    }
}
