//! Amplitude-amplification attacks against a random permutation, with their
//! predicted success and the matching corollary bounds.

use serde::Serialize;

use crate::circuit::{grover_preimage, run, success_probability, zero_search_adversary, Backend, QueryCircuit};
use crate::error::{Error, Result};
use crate::oracle::Database;
use crate::perm::{permutations, ENUMERATION_LIMIT};
use crate::relation::Relation;

use super::bounds::{mean_stderr, sampled_success, sponge_bound, zero_search_bound_bits, BoundValue};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum AttackKind {
    /// Preimage of an output prefix `target` (the sponge rate part).
    Sponge { target: usize },
    /// Input and output both ending in `c` zero bits.
    ZeroSearch,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AttackBackend {
    Concrete,
    Spo,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct AttackConfig {
    pub kind: AttackKind,
    pub n_bits: usize,
    pub c: usize,
    pub iterations: usize,
    pub backend: AttackBackend,
    /// Sampled permutations for the concrete backend; 0 enumerates all of them.
    pub trials: usize,
    pub seed: u64,
}

#[derive(Clone, Debug, Serialize)]
pub struct AttackReport {
    pub config: AttackConfig,
    pub queries: usize,
    pub success: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stderr: Option<f64>,
    /// `sin²((2k+1) θ)` with `sin² θ` the expected marked fraction of inputs.
    pub reference: f64,
    /// The same prediction averaged over the hypergeometric number of marked inputs.
    pub reference_marked_average: f64,
    pub bound: BoundValue,
}

impl AttackConfig {
    pub fn circuit(&self) -> Result<QueryCircuit> {
        match self.kind {
            AttackKind::Sponge { target } => grover_preimage(self.n_bits, self.c, target, self.iterations),
            AttackKind::ZeroSearch => zero_search_adversary(self.n_bits, self.c, self.iterations),
        }
    }

    pub fn relation(&self) -> Relation {
        match self.kind {
            AttackKind::Sponge { target } => Relation::sponge(self.n_bits, self.c, target),
            AttackKind::ZeroSearch => Relation::zero_search(self.n_bits, self.c),
        }
    }

    /// Inputs searched and outputs accepted.
    fn counts(&self) -> (usize, usize) {
        let inputs = 1usize << (self.n_bits - self.c);
        let marked = match self.kind {
            AttackKind::Sponge { .. } => 1usize << self.c,
            AttackKind::ZeroSearch => 1usize << (self.n_bits - self.c),
        };
        (inputs, marked)
    }
}

fn amplified(k: usize, fraction: f64) -> f64 {
    ((2 * k + 1) as f64 * fraction.sqrt().asin()).sin().powi(2)
}

fn ln_choose(ln_fact: &[f64], n: usize, k: usize) -> f64 {
    ln_fact[n] - ln_fact[k] - ln_fact[n - k]
}

/// `E_M sin²((2k+1) asin √(M/D))` for `M` hypergeometric: `D` inputs drawn
/// from `N` outputs of which `K` are marked.
pub fn marked_average(k: usize, population: usize, marked: usize, draws: usize) -> f64 {
    let mut ln_fact = vec![0.0; population + 1];
    for i in 1..=population {
        ln_fact[i] = ln_fact[i - 1] + (i as f64).ln();
    }
    let lo = (draws + marked).saturating_sub(population);
    (lo..=marked.min(draws))
        .map(|m| {
            let ln_p = ln_choose(&ln_fact, marked, m) + ln_choose(&ln_fact, population - marked, draws - m)
                - ln_choose(&ln_fact, population, draws);
            ln_p.exp() * amplified(k, m as f64 / draws as f64)
        })
        .sum()
}

pub fn run_attack(cfg: &AttackConfig) -> Result<AttackReport> {
    let circuit = cfg.circuit()?;
    let rel = cfg.relation();
    let n = circuit.n;
    let (success, stderr) = match cfg.backend {
        AttackBackend::Spo => {
            if n > ENUMERATION_LIMIT {
                return Err(Error::SizeLimit {
                    what: "database oracle points",
                    requested: n,
                    limit: ENUMERATION_LIMIT,
                });
            }
            let db = Database::new(n)?;
            let backend = Backend::Spo(&db);
            (success_probability(&run(&circuit, &backend)?, &backend, &rel), None)
        }
        AttackBackend::Concrete if cfg.trials == 0 => {
            if n > ENUMERATION_LIMIT {
                return Err(Error::SizeLimit {
                    what: "enumerated permutation points",
                    requested: n,
                    limit: ENUMERATION_LIMIT,
                });
            }
            let values = permutations(n)
                .map(|p| {
                    let backend = Backend::Concrete(&p);
                    Ok(success_probability(&run(&circuit, &backend)?, &backend, &rel))
                })
                .collect::<Result<Vec<f64>>>()?;
            (values.iter().sum::<f64>() / values.len() as f64, None)
        }
        AttackBackend::Concrete => {
            if cfg.trials < 2 {
                return Err(Error::OutOfRange("need at least two sampled permutations".into()));
            }
            let (mean, se) = mean_stderr(&sampled_success(&circuit, &rel, cfg.trials, cfg.seed)?);
            (mean, Some(se))
        }
    };
    let (inputs, marked) = cfg.counts();
    let queries = circuit.query_count();
    // Fewer than `q` queries: the bound is charged `q = queries + 1`.
    let q = queries as u64 + 1;
    let bound = match cfg.kind {
        AttackKind::Sponge { .. } => sponge_bound(q, cfg.n_bits as u32, cfg.c as u32),
        AttackKind::ZeroSearch => zero_search_bound_bits(q, cfg.n_bits as u32, cfg.c as u32),
    };
    Ok(AttackReport {
        config: *cfg,
        queries,
        success,
        stderr,
        reference: amplified(cfg.iterations, marked as f64 / n as f64),
        reference_marked_average: marked_average(cfg.iterations, n, marked, inputs),
        bound,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(kind: AttackKind, n_bits: usize, c: usize, iterations: usize, backend: AttackBackend) -> AttackConfig {
        AttackConfig {
            kind,
            n_bits,
            c,
            iterations,
            backend,
            trials: 0,
            seed: 1,
        }
    }

    #[test]
    fn database_and_concrete_agree() {
        for kind in [AttackKind::Sponge { target: 2 }, AttackKind::ZeroSearch] {
            for k in 0..3 {
                let spo = run_attack(&config(kind, 3, 1, k, AttackBackend::Spo)).unwrap();
                let conc = run_attack(&config(kind, 3, 1, k, AttackBackend::Concrete)).unwrap();
                assert!((spo.success - conc.success).abs() < 1e-9);
                // Exhaustive averages are exactly the marked-count prediction.
                assert!((conc.success - conc.reference_marked_average).abs() < 1e-9, "{kind:?} {k}");
            }
        }
    }

    #[test]
    fn no_iterations_hits_marked_fraction() {
        let r = run_attack(&config(AttackKind::ZeroSearch, 4, 2, 0, AttackBackend::Concrete)).unwrap_err();
        assert!(matches!(r, Error::SizeLimit { .. }));
        let mut cfg = config(AttackKind::ZeroSearch, 4, 2, 0, AttackBackend::Concrete);
        cfg.trials = 50;
        let r = run_attack(&cfg).unwrap();
        assert!((r.reference - 0.25).abs() < 1e-12);
        assert!((r.reference_marked_average - 0.25).abs() < 1e-12);
        assert!((r.success - 0.25).abs() <= 3.0 * r.stderr.unwrap());
    }

    #[test]
    fn hypergeometric_weights_sum_to_one() {
        // With zero iterations the prediction is E[M]/D = K/N.
        assert!((marked_average(0, 256, 16, 16) - 1.0 / 16.0).abs() < 1e-12);
    }
}
