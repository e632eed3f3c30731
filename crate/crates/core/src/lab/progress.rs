//! Per-query growth of the progress measure and its twirled average.
//!
//! Points are 0-based: point `e` is the `x = e + 1` of the formulas, and
//! its database register has dimension `x`.

use serde::Serialize;

use crate::circuit::{apply_gate, run, run_traced, standard_form, Backend, Gate, QueryCircuit};
use crate::error::{Error, Result};
use crate::linalg::{operator_norm, Diagonal, NormConfig, Product, C64};
use crate::oracle::{spo_query, Database, JointState, Reg};
use crate::perm::{Direction, Factorization, Permutation, Side, ENUMERATION_LIMIT};
use crate::relation::Relation;

use super::db::{
    check_uniform_weights, plus_complement, plus_operator, progress_apply, progress_operator, relation_projector,
    slice_query, x_weights, Combine,
};
use super::report::{timed, VerificationReport};
use super::sampling::{twirl_average_many, TwirlMode};

/// Tolerance on the `1/N!` database weights required by the query lemmas.
pub const WEIGHT_TOL: f64 = 1e-9;

/// The four parts of the error term of a single query at one point.
///
/// The forward error uses the first three parts, the inverse error all four
/// (with its own third part).
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct ZetaTerms {
    /// `|R_x|/x · ‖<x|_X φ‖²`.
    pub relation_weight: f64,
    /// `|R_x| / (x² N)`.
    pub uniform: f64,
    /// Mass on inputs below `x` that may already reach `R_x`.
    pub low_inputs: f64,
    /// Inverse only: mass on inputs above `x` routed through factor `x`.
    pub collisions: f64,
}

impl ZetaTerms {
    pub fn total(&self) -> f64 {
        self.relation_weight + self.uniform + self.low_inputs + self.collisions
    }
}

/// Error coefficient in front of `√ζ`.
pub fn zeta_coefficient(direction: Direction) -> f64 {
    match direction {
        Direction::Forward => 2.0,
        Direction::Inverse => 4.0,
    }
}

/// The error term of one `direction` query at point `e`.
///
/// Fibers of `D_{e+1}` share the complement `π_{x^c}` (factor `e` set to the
/// identity) and the upper product `π_{>e}`; both are read off the fiber base.
pub fn zeta_terms(state: &JointState, db: &Database, rel: &Relation, e: usize, direction: Direction) -> Result<ZetaTerms> {
    check_uniform_weights(state, db, WEIGHT_TOL)?;
    let n = db.n();
    let w = x_weights(state);
    let x = (e + 1) as f64;
    let r_x = rel.row_len(e) as f64;
    let stride = db.stride(e);
    let relation_weight = r_x / x * (0..db.size()).map(|d| w[d * n + e]).sum::<f64>();
    let uniform = r_x / (x * x * n as f64);
    let mut low_inputs = 0.0;
    let mut collisions = 0.0;
    for base in (0..db.size()).filter(|&d| db.digit(d, e) == 0) {
        let fiber = |z: usize| (0..=e).map(|t| w[(base + t * stride) * n + z]).sum::<f64>();
        match direction {
            Direction::Forward => {
                let complement = base + e * stride;
                low_inputs += (0..e)
                    .filter(|&z| rel.contains(e, db.image(complement, z)))
                    .map(fiber)
                    .sum::<f64>();
            }
            Direction::Inverse => {
                let above = Factorization::from_index(n, base).partial_product(e, Side::Above);
                let above_inv = above.inverse();
                low_inputs += rel.row(e).filter(|&z| above_inv.apply(z) < e).map(fiber).sum::<f64>();
                let hits = (0..=e).filter(|&t| rel.contains(e, above.apply(t))).count() as f64;
                if hits > 0.0 {
                    collisions += hits * (e + 1..n).filter(|&z| above_inv.apply(z) == e).map(fiber).sum::<f64>();
                }
            }
        }
    }
    Ok(ZetaTerms {
        relation_weight,
        uniform,
        low_inputs: low_inputs / x,
        collisions: collisions / x,
    })
}

fn plus_complement_norm(state: &JointState, db: &Database, e: usize) -> f64 {
    plus_complement(state, db, e).norm_sqr().sqrt()
}

fn progress_norm(state: &JointState, db: &Database, rel: &Relation, e: usize) -> f64 {
    progress_apply(state, db, rel, e).norm_sqr().sqrt()
}

/// `‖E Q φ‖ - ‖E φ‖ <= √(|R_x|/x) ‖(I - |+><+|) φ‖ + c √ζ` for one query.
pub fn query_step_check(
    name: &str,
    state: &JointState,
    db: &Database,
    rel: &Relation,
    e: usize,
    direction: Direction,
    tol: f64,
) -> Result<VerificationReport> {
    let (bounds, ms) = timed(|| -> Result<(f64, f64)> {
        let mut after = state.clone();
        spo_query(&mut after, db, direction)?;
        let lhs = progress_norm(&after, db, rel, e) - progress_norm(state, db, rel, e);
        let zeta = zeta_terms(state, db, rel, e, direction)?.total();
        let help = (rel.row_len(e) as f64 / (e + 1) as f64).sqrt();
        Ok((lhs, help * plus_complement_norm(state, db, e) + zeta_coefficient(direction) * zeta.sqrt()))
    });
    let (lhs, rhs) = bounds?;
    Ok(VerificationReport::exact(name, lhs, rhs, tol).with_runtime(ms))
}

fn check_points(n: usize) -> Result<()> {
    if n > ENUMERATION_LIMIT {
        return Err(Error::SizeLimit {
            what: "database points",
            requested: n,
            limit: ENUMERATION_LIMIT,
        });
    }
    Ok(())
}

/// Norms of the two query-step operators on the `Y D` slice, maximised over `z`:
/// `‖E Q^z (I - Π)‖` and `‖E Q^z |+><+|‖`.
pub fn easy_norms(db: &Database, rel: &Relation, e: usize, direction: Direction) -> Result<(f64, f64)> {
    let n = db.n();
    let progress = progress_operator(db, rel, e, n);
    let outside = Diagonal {
        entries: relation_projector(db, rel, e, n)
            .entries
            .iter()
            .map(|k| C64::new(1.0, 0.0) - k)
            .collect(),
    };
    let plus = plus_operator(db, e, n);
    let cfg = NormConfig::default();
    let mut worst = (0.0f64, 0.0f64);
    for z in 0..n {
        let q = slice_query(db, z, direction, Combine::Xor);
        let first = operator_norm(
            &Product {
                factors: vec![&progress, &q, &outside],
            },
            &cfg,
        )?;
        let third = operator_norm(
            &Product {
                factors: vec![&progress, &q, &plus],
            },
            &cfg,
        )?;
        worst = (worst.0.max(first.value), worst.1.max(third.value));
    }
    Ok(worst)
}

/// Both operator bounds of a single query at every point, as reports.
pub fn easy_lemma_checks(n: usize, rel: &Relation, tol: f64) -> Result<Vec<VerificationReport>> {
    let db = Database::new(n)?;
    let mut out = Vec::new();
    for e in 0..n {
        for direction in [Direction::Forward, Direction::Inverse] {
            let (norms, ms) = timed(|| easy_norms(&db, rel, e, direction));
            let (first, third) = norms?;
            let help = (rel.row_len(e) as f64 / (e + 1) as f64).sqrt();
            let tag = format!("x={} {}", e + 1, direction_name(direction));
            out.push(VerificationReport::exact(format!("easy outside-relation {tag}"), first, help, tol).with_runtime(ms));
            out.push(VerificationReport::exact(format!("easy plus-state {tag}"), third, 2.0 * help, tol).with_runtime(ms));
        }
    }
    Ok(out)
}

fn direction_name(direction: Direction) -> &'static str {
    match direction {
        Direction::Forward => "forward",
        Direction::Inverse => "inverse",
    }
}

/// Per-query steps and their accumulation along an untwirled run.
///
/// For every point the final progress norm is compared with the summed
/// step bound and with its Cauchy-Schwarz relaxation; the relaxation must
/// dominate the sum.
pub fn accumulation_checks(circuit: &QueryCircuit, rel: &Relation, tol: f64) -> Result<Vec<VerificationReport>> {
    check_points(circuit.n)?;
    let db = Database::new(circuit.n)?;
    let trace = run_traced(circuit, &Backend::Spo(&db))?;
    let q = trace.pre_query.len() as f64;
    let mut out = Vec::new();
    for e in 0..circuit.n {
        let help_sq = rel.row_len(e) as f64 / (e + 1) as f64;
        let mut linear = 0.0;
        let mut squares = 0.0;
        for (j, (direction, state)) in trace.pre_query.iter().enumerate() {
            out.push(query_step_check(
                &format!("query step x={} j={}", e + 1, j + 1),
                state,
                &db,
                rel,
                e,
                *direction,
                tol,
            )?);
            let a = help_sq.sqrt() * plus_complement_norm(state, &db, e);
            let zeta = zeta_terms(state, &db, rel, e, *direction)?.total();
            linear += a + 4.0 * zeta.sqrt();
            squares += a * a + 16.0 * zeta;
        }
        let lhs = progress_norm(&trace.final_state, &db, rel, e);
        let relaxed = (2.0 * q * squares).sqrt();
        out.push(VerificationReport::exact(format!("accumulated x={}", e + 1), lhs, linear, tol));
        out.push(VerificationReport::exact(format!("accumulated squared x={}", e + 1), lhs * lhs, relaxed * relaxed, tol));
        out.push(VerificationReport::exact(format!("relaxation dominates x={}", e + 1), linear, relaxed, tol));
    }
    Ok(out)
}

fn relabel_x(state: &JointState, perm: &Permutation) -> Result<JointState> {
    let mut s = state.clone();
    apply_gate(
        &mut s,
        &Gate::Relabel {
            reg: Reg::X,
            perm: perm.clone(),
        },
    )?;
    Ok(s)
}

/// Twirled averages feeding the hard-database bound, one entry per query of
/// the standard-form circuit.
#[derive(Clone, Debug, Serialize)]
pub struct HardDatabaseTerms {
    /// `E_{x,σ,τ} ‖E^{R^{σ,τ},x} φ^{σ,τ}‖²` with the twirled oracle.
    pub progress: f64,
    /// The same average computed from explicitly twirled untwirled states.
    pub progress_twirled_state: f64,
    /// `Σ_j E_{x,σ,τ} ‖(I - |+><+|_x) φ^{σ,τ,(j)}‖² / x`.
    pub plus_complement_sum: f64,
    pub low_inputs: Vec<f64>,
    pub low_preimages: Vec<f64>,
    pub collisions: Vec<f64>,
    pub zeta: Vec<f64>,
    pub directions: Vec<Direction>,
    /// Largest standard error among the averages; absent when exact.
    pub stderr: Option<f64>,
}

/// Evaluates every term of the hard-database bound for `circuit` and `rel`.
///
/// Pre-query states come from running the standard form of `circuit` against
/// the twirled oracle; the error terms are taken for the relabelled states
/// `V_X^σ φ` (forward queries) and `V_X^τ φ` (inverse queries).
pub fn hard_database_terms(circuit: &QueryCircuit, rel: &Relation, mode: TwirlMode) -> Result<HardDatabaseTerms> {
    check_points(circuit.n)?;
    let n = circuit.n;
    let db = Database::new(n)?;
    let doubled = standard_form(circuit)?;
    let directions = doubled.query_directions();
    let steps = directions.len();
    let untwirled = run(circuit, &Backend::Spo(&db))?;
    let len = 3 + 4 * steps;
    let inv_n = 1.0 / n as f64;
    let estimates = twirl_average_many(n, mode, len, |sigma, tau| {
        let r = rel.twirl(sigma, tau);
        let eval = || -> Result<Vec<f64>> {
            let backend = Backend::Tspo { db: &db, sigma, tau };
            let mut v = vec![0.0; len];
            let fin = run(circuit, &backend)?;
            v[0] = (0..n).map(|e| progress_norm(&fin, &db, &r, e).powi(2)).sum::<f64>() * inv_n;
            let twirled = crate::oracle::twirl(&untwirled, &db, sigma, tau);
            v[1] = (0..n).map(|e| progress_norm(&twirled, &db, &r, e).powi(2)).sum::<f64>() * inv_n;
            let trace = run_traced(&doubled, &backend)?;
            for (j, (direction, state)) in trace.pre_query.iter().enumerate() {
                v[2] += (0..n)
                    .map(|e| plus_complement_norm(state, &db, e).powi(2) / (e + 1) as f64)
                    .sum::<f64>()
                    * inv_n;
                let fwd = relabel_x(state, sigma)?;
                let inv = relabel_x(state, tau)?;
                for e in 0..n {
                    let f = zeta_terms(&fwd, &db, &r, e, Direction::Forward)?;
                    let i = zeta_terms(&inv, &db, &r, e, Direction::Inverse)?;
                    v[3 + j] += f.low_inputs * inv_n;
                    v[3 + steps + j] += i.low_inputs * inv_n;
                    v[3 + 2 * steps + j] += i.collisions * inv_n;
                    v[3 + 3 * steps + j] += match direction {
                        Direction::Forward => f.total(),
                        Direction::Inverse => i.total(),
                    } * inv_n;
                }
            }
            Ok(v)
        };
        // A violated precondition surfaces as NaN and is rejected below.
        eval().unwrap_or_else(|_| vec![f64::NAN; len])
    })?;
    if estimates.iter().any(|e| e.mean.is_nan()) {
        return Err(Error::Precondition(
            "a twirled pre-query state lost the uniform database weights".into(),
        ));
    }
    let mean = |k: usize| estimates[k].mean;
    let slice = |from: usize| (from..from + steps).map(mean).collect::<Vec<f64>>();
    let stderr = estimates
        .iter()
        .map(|e| e.stderr)
        .try_fold(0.0f64, |acc, s| s.map(|s| acc.max(s)));
    Ok(HardDatabaseTerms {
        progress: mean(0),
        progress_twirled_state: mean(1),
        plus_complement_sum: mean(2),
        low_inputs: slice(3),
        low_preimages: slice(3 + steps),
        collisions: slice(3 + 2 * steps),
        zeta: slice(3 + 3 * steps),
        directions,
        stderr,
    })
}

/// `384 q² r (ln N + 2) / N² + 4 q r Σ_j E ‖(I - |+><+|) φ^{(j)}‖² / x`.
pub fn hard_database_rhs(q: usize, n: usize, r_max: usize, plus_complement_sum: f64) -> f64 {
    let (q, n, r) = (q as f64, n as f64, r_max as f64);
    384.0 * q * q * r * (n.ln() + 2.0) / (n * n) + 4.0 * q * r * plus_complement_sum
}

/// Hard-database bound, the three averaged error parts and the averaged
/// error terms, all as reports.
pub fn hard_database_checks(circuit: &QueryCircuit, rel: &Relation, mode: TwirlMode, tol: f64) -> Result<Vec<VerificationReport>> {
    let (terms, ms) = timed(|| hard_database_terms(circuit, rel, mode));
    let terms = terms?;
    let n = circuit.n as f64;
    let r = rel.r_max() as f64;
    let unit = r / (n * n);
    let report = |name: String, lhs: f64, rhs: f64| match terms.stderr {
        None => VerificationReport::exact(name, lhs, rhs, tol),
        Some(se) => VerificationReport::monte_carlo(name, lhs, rhs, se),
    };
    let mut out = vec![
        report(
            "hard database".into(),
            terms.progress,
            hard_database_rhs(circuit.query_count(), circuit.n, rel.r_max(), terms.plus_complement_sum),
        )
        .with_runtime(ms),
        match terms.stderr {
            None => VerificationReport::equality("twirled oracle matches twirled state", terms.progress, terms.progress_twirled_state, tol),
            Some(se) => VerificationReport::monte_carlo_equality(
                "twirled oracle matches twirled state",
                terms.progress,
                terms.progress_twirled_state,
                se,
            ),
        },
    ];
    let q = circuit.query_count() as f64;
    out.push(report(
        "weighted sparsity".into(),
        4.0 * q * r * terms.plus_complement_sum,
        72.0 * q.powi(3) * (n.ln() + 1.0) * unit,
    ));
    for j in 0..terms.directions.len() {
        let tag = format!("j={}", j + 1);
        out.push(report(format!("forward low inputs {tag}"), terms.low_inputs[j], (n.ln() + 3.0) * unit));
        out.push(report(format!("inverse low preimages {tag}"), terms.low_preimages[j], (n.ln() + 1.0) * unit));
        out.push(report(format!("inverse collisions {tag}"), terms.collisions[j], (n.ln() + 1.0) * unit));
        let zeta_bound = match terms.directions[j] {
            Direction::Forward => 2.0 * n.ln() + 6.0,
            Direction::Inverse => 3.0 * n.ln() + 5.0,
        };
        out.push(report(format!("expected error term {tag}"), terms.zeta[j], zeta_bound * unit));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{classical_probe, random_circuit};
    use crate::oracle::{spo_init, Frame};
    use crate::perm::permutations;

    /// ζ by enumerating permutations and reading each one's factors directly.
    fn zeta_brute(state: &JointState, db: &Database, rel: &Relation, e: usize, direction: Direction) -> ZetaTerms {
        let n = db.n();
        let w = x_weights(state);
        let x = (e + 1) as f64;
        let r_x = rel.row_len(e) as f64;
        let mut t = ZetaTerms {
            relation_weight: r_x / x * (0..db.size()).map(|d| w[d * n + e]).sum::<f64>(),
            uniform: r_x / (x * x * n as f64),
            ..Default::default()
        };
        for p in permutations(n) {
            let f = p.factorize();
            let d = db.index_of(&p);
            let weight = |z: usize| w[d * n + z];
            match direction {
                Direction::Forward => {
                    let complement = f.without(e);
                    for z in 0..e {
                        if rel.contains(e, complement.apply(z)) {
                            t.low_inputs += weight(z) / x;
                        }
                    }
                }
                Direction::Inverse => {
                    let above = f.partial_product(e, Side::Above);
                    for z in 0..n {
                        let pre = above.inverse().apply(z);
                        if rel.contains(e, z) && pre < e {
                            t.low_inputs += weight(z) / x;
                        }
                        if z > e && pre == e {
                            let hits = (0..=e).filter(|&s| rel.contains(e, above.apply(s))).count();
                            t.collisions += hits as f64 * weight(z) / x;
                        }
                    }
                }
            }
        }
        t
    }

    fn close(a: &ZetaTerms, b: &ZetaTerms) -> bool {
        [
            (a.relation_weight, b.relation_weight),
            (a.uniform, b.uniform),
            (a.low_inputs, b.low_inputs),
            (a.collisions, b.collisions),
        ]
        .iter()
        .all(|(u, v)| (u - v).abs() < 1e-12)
    }

    #[test]
    fn zeta_matches_enumeration() {
        let db = Database::new(4).unwrap();
        let fresh = spo_init(&JointState::concrete(Frame::new(1, false, 4)), &db).unwrap();
        let c = standard_form(&random_circuit(5, 2, 1, 4).unwrap()).unwrap();
        let trace = run_traced(&c, &Backend::Spo(&db)).unwrap();
        let mut states = vec![fresh];
        states.extend(trace.pre_query.into_iter().map(|(_, s)| s));
        for rel in [Relation::full(4), Relation::random(4, 0.4, 8)] {
            for s in &states {
                for e in 0..4 {
                    for dir in [Direction::Forward, Direction::Inverse] {
                        let fast = zeta_terms(s, &db, &rel, e, dir).unwrap();
                        assert!(close(&fast, &zeta_brute(s, &db, &rel, e, dir)), "e={e} {dir:?}");
                    }
                }
            }
        }
    }

    #[test]
    fn fresh_state_terms() {
        // X = 0 initially: only the uniform part and, at e = 0, the relation weight survive.
        let db = Database::new(4).unwrap();
        let s = spo_init(&JointState::concrete(Frame::new(1, false, 4)), &db).unwrap();
        let rel = Relation::full(4);
        let t0 = zeta_terms(&s, &db, &rel, 0, Direction::Forward).unwrap();
        assert!((t0.relation_weight - 4.0).abs() < 1e-12);
        let t2 = zeta_terms(&s, &db, &rel, 2, Direction::Forward).unwrap();
        assert!((t2.uniform - 4.0 / 36.0).abs() < 1e-15);
        // Every complement sends 0 somewhere in the full relation.
        assert!((t2.low_inputs - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn zeta_requires_uniform_database() {
        let db = Database::new(2).unwrap();
        let mut s = spo_init(&JointState::concrete(Frame::new(1, false, 2)), &db).unwrap();
        s.amps[0] *= 2.0;
        assert!(zeta_terms(&s, &db, &Relation::full(2), 0, Direction::Forward).is_err());
    }

    #[test]
    fn single_query_steps_hold() {
        let c = random_circuit(21, 3, 1, 4).unwrap();
        let rel = Relation::random(4, 0.3, 4);
        let reports = accumulation_checks(&c, &rel, 1e-10).unwrap();
        assert!(reports.iter().all(|r| r.pass), "{reports:#?}");
        let probe = accumulation_checks(&classical_probe(4, 1, Direction::Inverse).unwrap(), &Relation::full(4), 1e-10).unwrap();
        assert!(probe.iter().all(|r| r.pass));
    }

    #[test]
    fn easy_norms_within_bounds() {
        let rel = Relation::random(4, 0.5, 2);
        assert!(easy_lemma_checks(4, &rel, 1e-10).unwrap().iter().all(|r| r.pass));
    }

    #[test]
    fn hard_database_bound_on_small_circuits() {
        let rel = Relation::random(4, 0.3, 6);
        for c in [classical_probe(4, 2, Direction::Forward).unwrap(), random_circuit(3, 2, 1, 4).unwrap()] {
            let reports = hard_database_checks(&c, &rel, TwirlMode::Exhaustive, 1e-10).unwrap();
            assert!(reports.iter().all(|r| r.pass), "{reports:#?}");
        }
    }
}
