//! Closed-form success bounds and the end-to-end theorem check.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::circuit::{concrete_ensemble, run, success_probability, Backend, QueryCircuit};
use crate::error::{Error, Result};
use crate::oracle::{Database, Reg};
use crate::perm::{sample_uniform, Direction, Permutation, ENUMERATION_LIMIT};
use crate::relation::Relation;

use super::report::{timed, VerificationReport};

/// A bound as computed and as a probability.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BoundValue {
    pub raw: f64,
    pub clamped: f64,
    /// The clamped value is 1, so the bound says nothing.
    pub vacuous: bool,
}

impl BoundValue {
    pub fn new(raw: f64) -> Self {
        let clamped = raw.clamp(0.0, 1.0);
        Self {
            raw,
            clamped,
            vacuous: clamped >= 1.0,
        }
    }
}

fn cube(q: u64) -> f64 {
    (q as f64).powi(3)
}

/// `914 q³ r (ln N + 2) / N` for a domain of `n` points.
pub fn main_bound(q: u64, n: f64, r_max: f64) -> BoundValue {
    BoundValue::new(914.0 * cube(q) * r_max * (n.ln() + 2.0) / n)
}

/// `914 q³ (n + 2) / 2^{min(c, n - c)}` for an `n_bits`-bit permutation with capacity `c`.
pub fn sponge_bound(q: u64, n_bits: u32, c: u32) -> BoundValue {
    let exp = c.min(n_bits.saturating_sub(c));
    BoundValue::new(914.0 * cube(q) * (f64::from(n_bits) + 2.0) / 2f64.powi(exp as i32))
}

/// `1828 q³ (n + 1) / 2^c` for a `2n`-bit permutation.
pub fn zero_search_bound(q: u64, half_bits: u32, c: u32) -> BoundValue {
    BoundValue::new(1828.0 * cube(q) * (f64::from(half_bits) + 1.0) / 2f64.powi(c as i32))
}

/// The zero-search bound for any width: `914 q³ (n + 2) / 2^c`, which is
/// [`zero_search_bound`] when `n_bits` is even.
pub fn zero_search_bound_bits(q: u64, n_bits: u32, c: u32) -> BoundValue {
    BoundValue::new(914.0 * cube(q) * (f64::from(n_bits) + 2.0) / 2f64.powi(c as i32))
}

/// How the theorem check averages over the permutation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum PermutationAverage {
    /// Every permutation, through the database oracle and the concrete ensemble.
    Exact,
    Sampled { trials: usize, seed: u64 },
}

#[derive(Clone, Debug, Serialize)]
pub struct TheoremCheck {
    pub reports: Vec<VerificationReport>,
    pub bound: BoundValue,
    /// Queries charged to the bound: those of the circuit plus the loading query.
    pub queries: u64,
}

/// Success probabilities of a circuit that outputs `x` only, one per sampled permutation.
pub fn sampled_success(circuit: &QueryCircuit, rel: &Relation, trials: usize, seed: u64) -> Result<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let perms: Vec<Permutation> = (0..trials).map(|_| sample_uniform(circuit.n, &mut rng)).collect();
    perms
        .par_iter()
        .map(|p| {
            let backend = Backend::Concrete(p);
            Ok(success_probability(&run(circuit, &backend)?, &backend, rel))
        })
        .collect()
}

/// Mean and standard error of the mean.
pub fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0).max(1.0);
    (mean, (var / n).sqrt())
}

/// `Pr[(x, π(x)) ∈ R]` for the output `x` against the clamped main bound.
///
/// The bound is charged one extra query: the proof loads `π(x)` into `Y`
/// before testing the pair. On the exact path that loading query is run
/// against the database oracle and the result compared with the concrete
/// ensemble average.
pub fn theorem_check(circuit: &QueryCircuit, rel: &Relation, average: PermutationAverage, tol: f64) -> Result<TheoremCheck> {
    if circuit.output != [Reg::X] {
        return Err(Error::Precondition("circuit must output X alone".into()));
    }
    let queries = circuit.query_count() as u64 + 1;
    let bound = main_bound(queries, circuit.n as f64, rel.r_max() as f64);
    let tag = if bound.vacuous { " (vacuous)" } else { "" };
    let name = format!("main theorem{tag}");
    let mut reports = Vec::new();
    match average {
        PermutationAverage::Exact => {
            if circuit.n > ENUMERATION_LIMIT {
                return Err(Error::SizeLimit {
                    what: "database points",
                    requested: circuit.n,
                    limit: ENUMERATION_LIMIT,
                });
            }
            let db = Database::new(circuit.n)?;
            let (values, ms) = timed(|| -> Result<(f64, f64)> {
                let ens = concrete_ensemble(circuit, &db)?;
                let frame = circuit.frame();
                let concrete = ens
                    .entries
                    .iter()
                    .map(|(p, amps)| {
                        amps.iter()
                            .enumerate()
                            .filter(|(i, _)| {
                                let x = frame.digit(*i, Reg::X);
                                rel.contains(x, p.apply(x))
                            })
                            .map(|(_, a)| a.norm_sqr())
                            .sum::<f64>()
                    })
                    .sum();
                let mut with_load = circuit.clone();
                with_load.query(Direction::Forward);
                let backend = Backend::Spo(&db);
                Ok((concrete, success_probability(&run(&with_load, &backend)?, &backend, rel)))
            });
            let (concrete, loaded) = values?;
            reports.push(VerificationReport::exact(name, concrete, bound.clamped, tol).with_runtime(ms));
            reports.push(VerificationReport::equality("loading query path matches", loaded, concrete, tol));
        }
        PermutationAverage::Sampled { trials, seed } => {
            let (values, ms) = timed(|| sampled_success(circuit, rel, trials, seed));
            let (mean, se) = mean_stderr(&values?);
            reports.push(VerificationReport::monte_carlo(name, mean, bound.clamped, se).with_runtime(ms));
        }
    }
    Ok(TheoremCheck { reports, bound, queries })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{grover_preimage, Gate};

    #[test]
    fn fixture_values() {
        let m = main_bound(1, 2f64.powi(20), 1.0);
        assert!((m.raw - 914.0 * (20.0 * 2f64.ln() + 2.0) / 2f64.powi(20)).abs() < 1e-18);
        assert!((m.raw - 1.383e-2).abs() < 1e-5);
        assert!((sponge_bound(1, 60, 30).raw - 5.277e-5).abs() < 1e-8);
        assert!((zero_search_bound(1, 40, 40).raw - 6.82e-8).abs() < 1e-10);
        assert_eq!(zero_search_bound(2, 4, 3).raw, zero_search_bound_bits(2, 8, 3).raw);
        assert!(main_bound(1, 4.0, 1.0).vacuous);
        assert!(!m.vacuous);
    }

    #[test]
    fn guess_without_queries() {
        // Output x = 2; every row of R has two entries, so success is 2/N.
        let mut c = QueryCircuit::new(4, 1);
        c.output = vec![Reg::X];
        c.push(Gate::Relabel {
            reg: Reg::X,
            perm: Permutation::transposition(4, 0, 2),
        });
        let rel = Relation::from_predicate(4, |x, y| (x + y) % 2 == 0);
        let t = theorem_check(&c, &rel, PermutationAverage::Exact, 1e-12).unwrap();
        assert!((t.reports[0].lhs - 0.5).abs() < 1e-12);
        assert!(t.reports.iter().all(|r| r.pass));
        assert!(t.bound.vacuous && t.reports[0].name.contains("vacuous"));
        let empty = theorem_check(&c, &Relation::empty(4), PermutationAverage::Exact, 1e-12).unwrap();
        assert_eq!(empty.reports[0].lhs, 0.0);
    }

    #[test]
    fn grover_at_eight_points() {
        let c = grover_preimage(3, 1, 1, 1).unwrap();
        let rel = Relation::sponge(3, 1, 1);
        let t = theorem_check(&c, &rel, PermutationAverage::Exact, 1e-10).unwrap();
        assert!(t.reports.iter().all(|r| r.pass), "{:#?}", t.reports);
        assert_eq!(t.queries, 3);
    }
}
