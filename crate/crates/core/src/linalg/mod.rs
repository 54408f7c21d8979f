//! Dense complex linear algebra used throughout the crate.
//!
//! Matrices are stored column-major. The same layout defines `vec(Z)`: the
//! columns of `Z` stacked top to bottom, so that
//! `(M ⊗ N) vec(Z) = vec(N Z Mᵀ)`.

mod lu;
mod matrix;
pub mod schur;
pub mod sylvester;

pub use lu::{cond_1_estimate, Lu};
pub use matrix::CMatrix;

use num_complex::Complex64;

pub type C64 = Complex64;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);

/// Unconjugated bilinear form `uᵀ v`.
pub fn dot_t(u: &[C64], v: &[C64]) -> C64 {
    debug_assert_eq!(u.len(), v.len());
    u.iter().zip(v).map(|(a, b)| a * b).sum()
}

/// Sesquilinear form `uᴴ v`.
pub fn dot_h(u: &[C64], v: &[C64]) -> C64 {
    debug_assert_eq!(u.len(), v.len());
    u.iter().zip(v).map(|(a, b)| a.conj() * b).sum()
}

pub fn norm2(v: &[C64]) -> f64 {
    let ss: f64 = v.iter().map(|z| z.norm_sqr()).sum();
    if ss.is_finite() && ss > 1e-280 {
        return ss.sqrt();
    }
    // rescale when the plain sum of squares over- or underflows
    let scale = v.iter().map(|z| z.norm()).fold(0.0_f64, f64::max);
    if scale == 0.0 || !scale.is_finite() {
        return scale;
    }
    let ss: f64 = v.iter().map(|z| (z / scale).norm_sqr()).sum();
    scale * ss.sqrt()
}

/// Returns `v / ‖v‖₂`; a zero vector is returned unchanged.
pub fn normalized(v: &[C64]) -> Vec<C64> {
    let nrm = norm2(v);
    if nrm == 0.0 {
        return v.to_vec();
    }
    v.iter().map(|z| z / nrm).collect()
}

pub fn scale(v: &[C64], alpha: C64) -> Vec<C64> {
    v.iter().map(|z| z * alpha).collect()
}

pub fn axpy(alpha: C64, x: &[C64], y: &mut [C64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn sub(u: &[C64], v: &[C64]) -> Vec<C64> {
    u.iter().zip(v).map(|(a, b)| a - b).collect()
}

pub fn conj(v: &[C64]) -> Vec<C64> {
    v.iter().map(|z| z.conj()).collect()
}

/// Rotates `v` so that its largest-modulus entry is real and positive.
pub fn fix_phase(v: &mut [C64]) {
    let Some(pivot) = v
        .iter()
        .copied()
        .max_by(|a, b| a.norm().total_cmp(&b.norm()))
    else {
        return;
    };
    if pivot.norm() == 0.0 {
        return;
    }
    let phase = pivot.conj() / pivot.norm();
    for z in v.iter_mut() {
        *z *= phase;
    }
}

/// Sine of the angle between the complex lines spanned by `u` and `v`.
/// Returns 1 when either vector is zero.
pub fn sin_angle(u: &[C64], v: &[C64]) -> f64 {
    let nu = norm2(u);
    let nv = norm2(v);
    if nu == 0.0 || nv == 0.0 {
        return 1.0;
    }
    let cos = (dot_h(u, v).norm() / (nu * nv)).min(1.0);
    // 1 - cos² loses everything below ~1e-8; use the projection residual instead
    let c = dot_h(u, v) / (nu * nu);
    let resid: Vec<C64> = v.iter().zip(u).map(|(vi, ui)| vi - c * ui).collect();
    let s = norm2(&resid) / nv;
    if s.is_finite() {
        s.min(1.0)
    } else {
        (1.0 - cos * cos).max(0.0).sqrt()
    }
}

/// Kronecker product of vectors, `u ⊗ v`.
pub fn kron_vec(u: &[C64], v: &[C64]) -> Vec<C64> {
    let mut out = Vec::with_capacity(u.len() * v.len());
    for a in u {
        out.extend(v.iter().map(|b| a * b));
    }
    out
}

/// `x ⊗ x ⊗ … ⊗ x` with `copies` factors.
pub fn kron_power(x: &[C64], copies: usize) -> Vec<C64> {
    let mut z = vec![ONE];
    for _ in 0..copies {
        z = kron_vec(&z, x);
    }
    z
}

/// Relative difference `‖u - v‖ / max(‖u‖, ‖v‖)`, zero when both vanish.
pub fn rel_diff(u: &[C64], v: &[C64]) -> f64 {
    let d = norm2(&sub(u, v));
    let s = norm2(u).max(norm2(v));
    if s == 0.0 {
        0.0
    } else {
        d / s
    }
}
