//! Post-selection on a database register leaving `|+>`: the fundamental
//! inequality, its database-only upper bound and the progress measure.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::circuit::{run, Backend, QueryCircuit};
use crate::error::{Error, Result};
use crate::linalg::{operator_norm, FnOperator, LinearOperator, NormConfig, C64};
use crate::oracle::{twirl, Database, JointState, Reg};
use crate::perm::{Estimate, Permutation, ENUMERATION_LIMIT};
use crate::relation::Relation;

use super::db::{plus_operator, progress_apply, relation_projector};
use super::report::{timed, VerificationReport};
use super::sampling::{twirl_average, TwirlMode};

/// `‖Π^{Y,e} |+><+|_{D_{e+1}}‖` on the database of `n` points.
pub fn help_norm(n: usize, e: usize, y_set: &[usize]) -> Result<f64> {
    if n > 7 {
        return Err(Error::SizeLimit {
            what: "help norm database",
            requested: n,
            limit: 7,
        });
    }
    if e >= n || y_set.iter().any(|&y| y >= n) {
        return Err(Error::OutOfRange(format!("point outside 1..={n}")));
    }
    let db = Database::new(n)?;
    let rel = Relation::from_pairs(n, y_set.iter().map(|&y| (e, y)));
    let keep = relation_projector(&db, &rel, e, 1);
    let plus = plus_operator(&db, e, 1);
    let (k2, p2) = (keep.clone(), plus_operator(&db, e, 1));
    let op = FnOperator::new(
        db.size(),
        move |v: &[C64]| keep.apply(&plus.apply(v)),
        move |v: &[C64]| p2.apply(&k2.apply(v)),
    );
    Ok(operator_norm(&op, &NormConfig::default())?.value)
}

/// `√(|Y| / x)` with `x = e + 1`.
pub fn help_bound(e: usize, y_len: usize) -> f64 {
    (y_len as f64 / (e + 1) as f64).sqrt()
}

/// Which part of the front state enters the post-selected norm.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Slice {
    /// Only `X = x, Y = y` for the pair being tested.
    Outputs,
    /// The whole front state.
    Whole,
}

/// `Σ_{(x,y)∈R} Σ_{π: τ^{-1}πσ(x) = y} ‖<π|(I - |+><+|_{σ(x)}) ψ‖²` for the
/// twirled state `ψ = L^τ R^σ φ`, restricted to `slice`.
///
/// Within a `D_{σ(x)}` fiber the values `π(σ(x))` are distinct, so at most one
/// member contributes; its post-selected amplitude is its value minus the fiber mean.
fn post_selected_mass(
    state: &JointState,
    db: &Database,
    rel: &Relation,
    sigma: &Permutation,
    tau: &Permutation,
    slice: Slice,
) -> f64 {
    let frame = state.frame;
    let block = frame.block();
    let n = db.n();
    let source = db.sandwich_map(&tau.inverse(), sigma);
    let offsets_for = |x: usize, y: usize| -> Vec<usize> {
        match slice {
            Slice::Whole => (0..block).collect(),
            Slice::Outputs => {
                let zdim = frame.dim(Reg::Z);
                (0..frame.work)
                    .flat_map(|a| (0..zdim).map(move |z| (a, z)))
                    .map(|(a, z)| frame.index(a, z, x, y))
                    .collect()
            }
        }
    };
    let mut total = 0.0;
    let mut mean = vec![C64::new(0.0, 0.0); block];
    for x in 0..n {
        let e = sigma.apply(x);
        let stride = db.stride(e);
        let width = e + 1;
        for y in rel.row(x) {
            let target = tau.apply(y);
            let offsets = match slice {
                Slice::Whole => offsets_for(0, 0),
                Slice::Outputs => offsets_for(x, y),
            };
            for base in (0..db.size()).filter(|&d| db.digit(d, e) == 0) {
                let Some(hit) = (0..width).find(|&t| db.image(base + t * stride, e) == target) else {
                    continue;
                };
                let amp = |t: usize, o: usize| state.amps[source[base + t * stride] * block + o];
                for (m, &o) in mean.iter_mut().zip(&offsets) {
                    *m = (0..width).map(|t| amp(t, o)).sum::<C64>() / width as f64;
                }
                total += offsets
                    .iter()
                    .zip(&mean)
                    .map(|(&o, m)| (amp(hit, o) - m).norm_sqr())
                    .sum::<f64>();
            }
        }
    }
    total
}

fn check_output_pair(circuit: &QueryCircuit) -> Result<()> {
    if circuit.output != [Reg::X, Reg::Y] {
        return Err(Error::Precondition("circuit must output the pair (X, Y)".into()));
    }
    if circuit.n > ENUMERATION_LIMIT {
        return Err(Error::SizeLimit {
            what: "database points",
            requested: circuit.n,
            limit: ENUMERATION_LIMIT,
        });
    }
    Ok(())
}

/// Final state of `circuit` against the untwirled database oracle.
pub fn spo_final_state(circuit: &QueryCircuit, db: &Database) -> Result<JointState> {
    run(circuit, &Backend::Spo(db))
}

/// Probability that the measured pair satisfies `π(x) = y` and `(x, y) ∈ R`,
/// read off the database branches of `state`.
pub fn real_success(state: &JointState, db: &Database, rel: &Relation) -> f64 {
    let frame = state.frame;
    (0..state.blocks)
        .map(|d| {
            state
                .block(d)
                .iter()
                .enumerate()
                .filter(|(i, _)| {
                    let (x, y) = (frame.digit(*i, Reg::X), frame.digit(*i, Reg::Y));
                    db.image(d, x) == y && rel.contains(x, y)
                })
                .map(|(_, a)| a.norm_sqr())
                .sum::<f64>()
        })
        .sum()
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct ExperimentProbabilities {
    pub p_i: f64,
    pub p_ii: f64,
    /// Standard error of `p_ii`; absent when exact.
    pub p_ii_stderr: Option<f64>,
}

/// Success probabilities of the plain and the post-selected experiment.
pub fn experiment_probabilities(circuit: &QueryCircuit, rel: &Relation, mode: TwirlMode) -> Result<ExperimentProbabilities> {
    check_output_pair(circuit)?;
    let db = Database::new(circuit.n)?;
    let state = spo_final_state(circuit, &db)?;
    let p_i = real_success(&state, &db, rel);
    let p_ii = twirl_average(circuit.n, mode, |s, t| post_selected_mass(&state, &db, rel, s, t, Slice::Outputs))?;
    Ok(ExperimentProbabilities {
        p_i,
        p_ii: p_ii.mean,
        p_ii_stderr: p_ii.stderr,
    })
}

/// `√p_i <= √p_ii + √((ln N + 1)/N)`.
pub fn fundamental_check(name: &str, circuit: &QueryCircuit, rel: &Relation, mode: TwirlMode, tol: f64) -> Result<VerificationReport> {
    let (probs, ms) = timed(|| experiment_probabilities(circuit, rel, mode));
    let probs = probs?;
    let n = circuit.n as f64;
    let slack_term = ((n.ln() + 1.0) / n).sqrt();
    let lhs = probs.p_i.sqrt();
    let root = probs.p_ii.max(0.0).sqrt();
    let report = match probs.p_ii_stderr {
        None => VerificationReport::exact(name, lhs, root + slack_term, tol),
        Some(se) => {
            // Delta method for √p; near zero fall back to √se.
            let se_root = if se == 0.0 {
                0.0
            } else if probs.p_ii < se {
                se.sqrt()
            } else {
                se / (2.0 * root)
            };
            VerificationReport::monte_carlo(name, lhs, root + slack_term, se_root)
        }
    };
    Ok(report.with_runtime(ms))
}

/// The database-only expression that dominates `p_ii`.
pub fn p2_upper_bound(circuit: &QueryCircuit, rel: &Relation, mode: TwirlMode) -> Result<Estimate> {
    check_output_pair(circuit)?;
    let db = Database::new(circuit.n)?;
    let state = spo_final_state(circuit, &db)?;
    twirl_average(circuit.n, mode, |s, t| post_selected_mass(&state, &db, rel, s, t, Slice::Whole))
}

/// `E_{x,σ,τ} ‖E^{R^{σ,τ},x} φ^{σ,τ}‖²`, built from explicitly twirled states
/// and twirled relations.
pub fn progress_measure(circuit: &QueryCircuit, rel: &Relation, mode: TwirlMode) -> Result<Estimate> {
    if circuit.n > ENUMERATION_LIMIT {
        return Err(Error::SizeLimit {
            what: "database points",
            requested: circuit.n,
            limit: ENUMERATION_LIMIT,
        });
    }
    let db = Database::new(circuit.n)?;
    let state = spo_final_state(circuit, &db)?;
    Ok(progress_of_state(&state, &db, rel, mode)?)
}

pub(crate) fn progress_of_state(state: &JointState, db: &Database, rel: &Relation, mode: TwirlMode) -> Result<Estimate> {
    let n = db.n();
    twirl_average(n, mode, |s, t| {
        let twirled = twirl(state, db, s, t);
        let r = rel.twirl(s, t);
        (0..n).map(|e| progress_apply(&twirled, db, &r, e).norm_sqr()).sum::<f64>() / n as f64
    })
}

/// Dense reference for [`help_norm`]: explicit matrix of `Π |+><+|`.
pub fn help_norm_dense(n: usize, e: usize, y_set: &[usize]) -> Result<f64> {
    let db = Database::new(n)?;
    let size = db.size();
    let width = e + 1;
    let stride = db.stride(e);
    let mut m = DMatrix::<C64>::zeros(size, size);
    for i in 0..size {
        if !y_set.contains(&db.image(i, e)) {
            continue;
        }
        let base = i - db.digit(i, e) * stride;
        for t in 0..width {
            m[(i, base + t * stride)] = C64::new(1.0 / width as f64, 0.0);
        }
    }
    Ok(m.singular_values().iter().fold(0.0f64, |a, &s| a.max(s)))
}
