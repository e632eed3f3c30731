//! Operators acting on the database factor of a joint state.
//!
//! Point `e` (0-based) owns the register `D_{e+1}` of dimension `e + 1`,
//! which holds the factor target `t_e`.

use rayon::prelude::*;

use crate::error::{Error, Result};
use serde::Serialize;

use crate::linalg::{BasisPermutation, Diagonal, FnOperator, C64};
use crate::oracle::{Database, JointState, Reg};
use crate::perm::Direction;
use crate::relation::Relation;

/// Replaces each `t_e`-fiber of blocks by its mean, i.e. applies `|+><+|` on `D_{e+1}`.
fn average_fibers(amps: &mut [C64], block: usize, db: &Database, e: usize) {
    let stride = db.stride(e);
    let dim = e + 1;
    let scale = 1.0 / dim as f64;
    for d in (0..db.size()).filter(|&d| db.digit(d, e) == 0) {
        for j in 0..block {
            let mean: C64 = (0..dim).map(|t| amps[(d + t * stride) * block + j]).sum::<C64>() * scale;
            for t in 0..dim {
                amps[(d + t * stride) * block + j] = mean;
            }
        }
    }
}

pub fn plus_projector(state: &JointState, db: &Database, e: usize) -> JointState {
    let mut out = state.clone();
    average_fibers(&mut out.amps, state.block_len(), db, e);
    out
}

/// `(I - |+><+|)` on `D_{e+1}`.
pub fn plus_complement(state: &JointState, db: &Database, e: usize) -> JointState {
    let plus = plus_projector(state, db, e);
    let mut out = state.clone();
    out.amps.iter_mut().zip(&plus.amps).for_each(|(a, p)| *a -= p);
    out
}

/// Keeps the blocks of permutations with `π(e) ∈ R_e`.
pub fn relation_filter(state: &JointState, db: &Database, rel: &Relation, e: usize) -> JointState {
    let b = state.block_len();
    let mut out = state.clone();
    out.amps.par_chunks_mut(b).enumerate().for_each(|(d, chunk)| {
        if !rel.contains(e, db.image(d, e)) {
            chunk.iter_mut().for_each(|a| *a = C64::new(0.0, 0.0));
        }
    });
    out
}

/// The progress measurement `Π^{R,e} (I - |+><+|_{D_{e+1}})`.
pub fn progress_apply(state: &JointState, db: &Database, rel: &Relation, e: usize) -> JointState {
    relation_filter(&plus_complement(state, db, e), db, rel, e)
}

/// `w[d * N + z]`: squared norm of block `d` restricted to `X = z`.
pub fn x_weights(state: &JointState) -> Vec<f64> {
    let frame = state.frame;
    let n = frame.n;
    let mut w = vec![0.0; state.blocks * n];
    w.par_chunks_mut(n).enumerate().for_each(|(d, row)| {
        for (i, a) in state.block(d).iter().enumerate() {
            row[frame.digit(i, Reg::X)] += a.norm_sqr();
        }
    });
    w
}

/// Each database basis state must carry weight `1/N!`.
pub fn check_uniform_weights(state: &JointState, db: &Database, tol: f64) -> Result<()> {
    let target = 1.0 / db.size() as f64;
    for d in 0..db.size() {
        let w: f64 = state.block(d).iter().map(|a| a.norm_sqr()).sum();
        if (w - target).abs() > tol {
            return Err(Error::Precondition(format!(
                "database weight of {} is {w}, expected {target}",
                db.permutation(d)
            )));
        }
    }
    Ok(())
}

// The operators below act on `C^block ⊗ D` laid out as `d * block + j`;
// `block = 1` gives the database alone, `block = N` the `Y D` slice.

fn keep_mask(db: &Database, rel: &Relation, e: usize) -> Vec<bool> {
    (0..db.size()).map(|d| rel.contains(e, db.image(d, e))).collect()
}

fn mask(v: &[C64], keep: &[bool], block: usize) -> Vec<C64> {
    v.iter()
        .enumerate()
        .map(|(i, a)| if keep[i / block] { *a } else { C64::new(0.0, 0.0) })
        .collect()
}

/// `Π^{R,e}`.
pub fn relation_projector(db: &Database, rel: &Relation, e: usize, block: usize) -> Diagonal {
    let keep = keep_mask(db, rel, e);
    Diagonal {
        entries: (0..db.size() * block)
            .map(|i| C64::new(if keep[i / block] { 1.0 } else { 0.0 }, 0.0))
            .collect(),
    }
}

/// `|+><+|` on `D_{e+1}`.
pub fn plus_operator(db: &Database, e: usize, block: usize) -> FnOperator {
    let db = db.clone();
    FnOperator::hermitian(db.size() * block, move |v: &[C64]| {
        let mut out = v.to_vec();
        average_fibers(&mut out, block, &db, e);
        out
    })
}

/// `E^{R,e} = Π^{R,e} (I - |+><+|)`.
pub fn progress_operator(db: &Database, rel: &Relation, e: usize, block: usize) -> FnOperator {
    let keep = keep_mask(db, rel, e);
    let keep_adj = keep.clone();
    let (db_f, db_a) = (db.clone(), db.clone());
    FnOperator::new(
        db.size() * block,
        move |v: &[C64]| {
            let mut p = v.to_vec();
            average_fibers(&mut p, block, &db_f, e);
            let diff: Vec<C64> = v.iter().zip(p).map(|(a, m)| a - m).collect();
            mask(&diff, &keep, block)
        },
        move |v: &[C64]| {
            let masked = mask(v, &keep_adj, block);
            let mut p = masked.clone();
            average_fibers(&mut p, block, &db_a, e);
            masked.iter().zip(p).map(|(a, m)| a - m).collect()
        },
    )
}

/// How a query writes its answer into `Y`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Combine {
    Xor,
    /// Addition mod `N`, for domains that are not powers of two.
    ModAdd,
}

impl Combine {
    pub fn for_points(n: usize) -> Self {
        if n.is_power_of_two() {
            Combine::Xor
        } else {
            Combine::ModAdd
        }
    }

    pub fn apply(self, y: usize, v: usize, n: usize) -> usize {
        match self {
            Combine::Xor => y ^ v,
            Combine::ModAdd => (y + v) % n,
        }
    }
}

/// The query with `X = z` fixed, on the `Y D` slice (index `d * N + y`).
pub fn slice_query(db: &Database, z: usize, direction: Direction, combine: Combine) -> BasisPermutation {
    let n = db.n();
    BasisPermutation {
        map: (0..db.size() * n)
            .map(|i| {
                let (d, y) = (i / n, i % n);
                d * n + combine.apply(y, db.lookup(d, z, direction), n)
            })
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{operator_norm, LinearOperator, NormConfig};
    use crate::oracle::{spo_init, Frame};

    #[test]
    fn uniform_database_has_no_progress() {
        let db = Database::new(4).unwrap();
        let s = spo_init(&JointState::concrete(Frame::new(1, false, 4)), &db).unwrap();
        let rel = Relation::full(4);
        for e in 0..4 {
            assert!(progress_apply(&s, &db, &rel, e).norm_sqr() < 1e-30);
        }
        check_uniform_weights(&s, &db, 1e-12).unwrap();
    }

    #[test]
    fn plus_operator_is_a_projector() {
        let db = Database::new(4).unwrap();
        for e in 0..4 {
            let p = plus_operator(&db, e, 1).to_dense().unwrap();
            let diff = &p * &p - &p;
            assert!(diff.norm() < 1e-12);
            let rank: f64 = (0..24).map(|i| p[(i, i)].re).sum();
            assert!((rank - 24.0 / (e + 1) as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn progress_operator_adjoint_consistent() {
        let db = Database::new(3).unwrap();
        let rel = Relation::from_pairs(3, [(2, 0), (2, 1)]);
        let op = progress_operator(&db, &rel, 2, 2);
        let m = op.to_dense().unwrap();
        let v: Vec<C64> = (0..12).map(|i| C64::new(i as f64, 1.0)).collect();
        let adj = op.apply_adjoint(&v);
        let expect = m.adjoint() * nalgebra::DVector::from_vec(v);
        for (a, b) in adj.iter().zip(expect.iter()) {
            assert!((a - b).norm() < 1e-12);
        }
        assert!(operator_norm(&op, &NormConfig::default()).unwrap().value <= 1.0 + 1e-12);
    }
}
