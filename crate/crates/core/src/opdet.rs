//! Operator determinants of block arrays and the Δ-system of a linear MEP.

use serde::{Deserialize, Serialize};

use crate::error::{NepvError, Result};
use crate::linalg::{CMatrix, Lu, C64, ONE};
use crate::linearize::MepProblem;

/// Default cap on the number of complex entries of one Δ matrix.
pub const DEFAULT_MEMORY_CAP: u128 = 200_000_000;

/// Condition numbers above this make Δ₀ numerically singular.
pub const SINGULAR_COND: f64 = 1e-3 / f64::EPSILON;

/// Operator determinant of a k×k array of n×n blocks, expanded along the
/// first block row with the Kronecker product in place of multiplication:
/// `Σⱼ (−1)ʲ D₀ⱼ ⊗ det(minor₀ⱼ)`.
pub fn operator_determinant(blocks: &[Vec<CMatrix>]) -> Result<CMatrix> {
    let k = blocks.len();
    if k == 0 {
        return Err(NepvError::DimensionMismatch("empty block array".into()));
    }
    let n = blocks[0][0].rows();
    for row in blocks {
        if row.len() != k {
            return Err(NepvError::DimensionMismatch(format!(
                "block array must be {k}x{k}, found a row with {} blocks",
                row.len()
            )));
        }
        if row.iter().any(|b| b.rows() != n || b.cols() != n) {
            return Err(NepvError::DimensionMismatch(format!(
                "all blocks must be {n}x{n}"
            )));
        }
    }
    let refs: Vec<Vec<&CMatrix>> = blocks.iter().map(|r| r.iter().collect()).collect();
    Ok(expand(&refs, n))
}

fn expand(blocks: &[Vec<&CMatrix>], n: usize) -> CMatrix {
    let k = blocks.len();
    if k == 1 {
        return blocks[0][0].clone();
    }
    let dim = n.pow(k as u32);
    let mut out = CMatrix::zeros(dim, dim);
    for j in 0..k {
        let minor: Vec<Vec<&CMatrix>> = blocks[1..]
            .iter()
            .map(|row| {
                row.iter()
                    .enumerate()
                    .filter(|&(c, _)| c != j)
                    .map(|(_, b)| *b)
                    .collect()
            })
            .collect();
        let sub = expand(&minor, n);
        let sign = if j % 2 == 0 { ONE } else { -ONE };
        blocks[0][j].kron_into(&sub, sign, &mut out);
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Nonsingularity {
    Yes,
    No,
    Unknown,
}

/// Δ₀ and Δ₁, …, Δ_{m+1} of a linear MEP.
pub struct DeltaSystem {
    n_kron: usize,
    delta0: CMatrix,
    deltas: Vec<CMatrix>,
    nonsingular: Nonsingularity,
    cond: f64,
    lu0: Lu,
}

impl std::fmt::Debug for DeltaSystem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DeltaSystem")
            .field("n_kron", &self.n_kron)
            .field("nonsingular", &self.nonsingular)
            .field("cond", &self.cond)
            .finish_non_exhaustive()
    }
}

impl DeltaSystem {
    /// Kronecker dimension `n^{m+1}`.
    pub fn dim(&self) -> usize {
        self.n_kron
    }

    pub fn delta0(&self) -> &CMatrix {
        &self.delta0
    }

    /// `Δ_{i}` for `i = 1..=m+1`; `delta(1)` belongs to λ, `delta(1+j)` to μⱼ.
    pub fn delta(&self, i: usize) -> &CMatrix {
        assert!(i >= 1 && i <= self.deltas.len(), "Δ index out of range");
        &self.deltas[i - 1]
    }

    pub fn count(&self) -> usize {
        self.deltas.len()
    }

    pub fn nonsingular(&self) -> Nonsingularity {
        self.nonsingular
    }

    /// Estimated 1-norm condition number of Δ₀.
    pub fn cond(&self) -> f64 {
        self.cond
    }

    /// LU factors of Δ₀.
    pub fn lu0(&self) -> &Lu {
        &self.lu0
    }

    /// Entries of one Kronecker matrix for `n`, `m`, with overflow saturation.
    pub fn entries_needed(n: usize, m: usize) -> u128 {
        let mut dim: u128 = 1;
        for _ in 0..=m {
            dim = dim.saturating_mul(n as u128);
        }
        dim.saturating_mul(dim)
    }
}

/// Block array of Δ₀ (`column = None`) or of Δ_{column} (1-based).
pub fn delta_blocks(mep: &MepProblem, column: Option<usize>) -> Vec<Vec<CMatrix>> {
    let k = mep.equations();
    (0..k)
        .map(|i| {
            (1..=k)
                .map(|j| {
                    if Some(j) == column {
                        mep.v(i, 0).clone()
                    } else {
                        mep.v(i, j).clone()
                    }
                })
                .collect()
        })
        .collect()
}

pub fn build_deltas(mep: &MepProblem) -> Result<DeltaSystem> {
    build_deltas_with_cap(mep, DEFAULT_MEMORY_CAP)
}

pub fn build_deltas_with_cap(mep: &MepProblem, cap: u128) -> Result<DeltaSystem> {
    let (n, m) = (mep.n(), mep.m());
    let entries = DeltaSystem::entries_needed(n, m);
    let dim = (n as u128).checked_pow(m as u32 + 1).unwrap_or(u128::MAX);
    if entries > cap || dim > usize::MAX as u128 {
        return Err(NepvError::MemoryBudgetExceeded {
            dim: dim.min(usize::MAX as u128) as usize,
            entries,
            cap,
        });
    }
    let delta0 = operator_determinant(&delta_blocks(mep, None))?;
    let deltas = (1..=mep.equations())
        .map(|c| operator_determinant(&delta_blocks(mep, Some(c))))
        .collect::<Result<Vec<_>>>()?;
    let lu0 = Lu::new(&delta0);
    let cond = lu0.cond_1();
    let nonsingular = if lu0.is_exactly_singular() || !cond.is_finite() {
        Nonsingularity::No
    } else if cond < SINGULAR_COND {
        Nonsingularity::Yes
    } else {
        Nonsingularity::Unknown
    };
    Ok(DeltaSystem {
        n_kron: dim as usize,
        delta0,
        deltas,
        nonsingular,
        cond,
        lu0,
    })
}

/// Largest normalized commutator `‖ΓᵢΓⱼ − ΓⱼΓᵢ‖_F / (‖Γᵢ‖_F‖Γⱼ‖_F)` over
/// `Γᵢ = Δ₀⁻¹Δᵢ`.
pub fn commute_check(ds: &DeltaSystem) -> Result<f64> {
    if ds.nonsingular == Nonsingularity::No {
        return Err(NepvError::SingularDelta0 { cond: ds.cond });
    }
    if ds.deltas.len() < 2 {
        return Ok(0.0);
    }
    let gammas: Vec<CMatrix> = ds.deltas.iter().map(|d| ds.lu0.solve_matrix(d)).collect();
    let mut worst: f64 = 0.0;
    for i in 0..gammas.len() {
        for j in i + 1..gammas.len() {
            let c = gammas[i]
                .matmul(&gammas[j])
                .sub(&gammas[j].matmul(&gammas[i]));
            let scale = gammas[i].frobenius_norm() * gammas[j].frobenius_norm();
            worst = worst.max(if scale == 0.0 { 0.0 } else { c.frobenius_norm() / scale });
        }
    }
    Ok(worst)
}

/// Deviations from the three column rules of operator determinants.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ColumnPropertyReport {
    /// `‖det(swap i,j) + det‖_F`
    pub swap: f64,
    /// `‖det(column i := column j)‖_F`
    pub duplicate: f64,
    /// `‖det(column i += 2·column j) − det‖_F`
    pub add_multiple: f64,
}

impl ColumnPropertyReport {
    pub fn max_deviation(&self) -> f64 {
        self.swap.max(self.duplicate).max(self.add_multiple)
    }
}

/// Checks the column rules on block columns `i ≠ j` (zero-based).
pub fn column_property_check(
    blocks: &[Vec<CMatrix>],
    i: usize,
    j: usize,
) -> Result<ColumnPropertyReport> {
    let k = blocks.len();
    if i == j || i >= k || j >= k {
        return Err(NepvError::DimensionMismatch(format!(
            "column indices {i}, {j} invalid for a {k}x{k} block array"
        )));
    }
    let base = operator_determinant(blocks)?;

    let mut swapped = blocks.to_vec();
    for row in swapped.iter_mut() {
        row.swap(i, j);
    }
    let swap = operator_determinant(&swapped)?.add(&base).frobenius_norm();

    let mut dup = blocks.to_vec();
    for row in dup.iter_mut() {
        row[i] = row[j].clone();
    }
    let duplicate = operator_determinant(&dup)?.frobenius_norm();

    let mut added = blocks.to_vec();
    for row in added.iter_mut() {
        let bj = row[j].clone();
        row[i].add_scaled(C64::new(2.0, 0.0), &bj);
    }
    let add_multiple = operator_determinant(&added)?.sub(&base).frobenius_norm();

    Ok(ColumnPropertyReport {
        swap,
        duplicate,
        add_multiple,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::kron_vec;
    use crate::rng::SplitMix64;

    fn random(n: usize, rng: &mut SplitMix64) -> CMatrix {
        CMatrix::from_fn(n, n, |_, _| C64::new(rng.next_normal(), rng.next_normal()))
    }

    fn m(rows: &[[f64; 2]; 2]) -> CMatrix {
        CMatrix::from_real_rows(rows)
    }

    #[test]
    fn single_block_is_returned() {
        let b = m(&[[1.0, 2.0], [3.0, 4.0]]);
        assert_eq!(operator_determinant(&[vec![b.clone()]]).unwrap(), b);
    }

    #[test]
    fn two_by_two_matches_closed_form_bitwise() {
        let mut rng = SplitMix64::new(3);
        let (p, q, r, s) = (random(3, &mut rng), random(3, &mut rng), random(3, &mut rng), random(3, &mut rng));
        let det = operator_determinant(&[vec![p.clone(), q.clone()], vec![r.clone(), s.clone()]]).unwrap();
        let closed = p.kron(&s).sub(&q.kron(&r));
        assert_eq!(det, closed);
    }

    #[test]
    fn three_by_three_matches_explicit_expansion() {
        let mut rng = SplitMix64::new(4);
        let b: Vec<Vec<CMatrix>> = (0..3).map(|_| (0..3).map(|_| random(2, &mut rng)).collect()).collect();
        let minor = |j1: usize, j2: usize| b[1][j1].kron(&b[2][j2]).sub(&b[1][j2].kron(&b[2][j1]));
        let explicit = b[0][0]
            .kron(&minor(1, 2))
            .sub(&b[0][1].kron(&minor(0, 2)))
            .add(&b[0][2].kron(&minor(0, 1)));
        let det = operator_determinant(&b).unwrap();
        assert!(det.sub(&explicit).frobenius_norm() <= 1e-14 * explicit.frobenius_norm());
    }

    #[test]
    fn kron_acts_on_kron_vectors() {
        let mut rng = SplitMix64::new(5);
        let (a, b) = (random(3, &mut rng), random(4, &mut rng));
        let u: Vec<C64> = (0..3).map(|_| C64::new(rng.next_normal(), 0.0)).collect();
        let v: Vec<C64> = (0..4).map(|_| C64::new(0.0, rng.next_normal())).collect();
        let lhs = a.kron(&b).matvec(&kron_vec(&u, &v));
        let rhs = kron_vec(&a.matvec(&u), &b.matvec(&v));
        assert!(crate::linalg::rel_diff(&lhs, &rhs) < 1e-14);
    }

    #[test]
    fn column_rules_hold() {
        let mut rng = SplitMix64::new(6);
        for k in [2, 3] {
            let b: Vec<Vec<CMatrix>> = (0..k).map(|_| (0..k).map(|_| random(2, &mut rng)).collect()).collect();
            let scale = operator_determinant(&b).unwrap().frobenius_norm();
            let rep = column_property_check(&b, 0, k - 1).unwrap();
            assert!(rep.max_deviation() <= 1e-13 * scale, "{rep:?}");
        }
    }

    #[test]
    fn rejects_ragged_arrays() {
        let b = CMatrix::identity(2);
        let err = operator_determinant(&[vec![b.clone(), b.clone()], vec![b.clone()]]);
        assert!(matches!(err, Err(NepvError::DimensionMismatch(_))));
        let err = operator_determinant(&[vec![b.clone(), CMatrix::identity(3)], vec![b.clone(), b]]);
        assert!(matches!(err, Err(NepvError::DimensionMismatch(_))));
    }
}
