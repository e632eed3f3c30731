//! Named verification suites and the adversary cases they share.

use std::fmt;
use std::ops::RangeInclusive;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::circuit::{
    classical_probe, concrete_ensemble, grover_preimage, output_distribution, random_circuit, run, standard_form, Backend,
    QueryCircuit,
};
use crate::error::{Error, Result};
use crate::linalg::{trace_distance, C64};
use crate::oracle::{
    check_power_of_two, left_twirl, right_twirl, spo_init, spo_query, spo_recover, tspo_query, tspo_recover, twirl, Database,
    Frame, JointState, Reg,
};
use crate::perm::{
    active_set, apply_via_active, expected_active_size, factorial, forward_expectation, forward_log_bound,
    inverse_linear_bound, permutations, sample_uniform, Direction, ExpectationMethod, Factorization, Permutation,
};
use crate::relation::Relation;

use super::fundamental::{experiment_probabilities, fundamental_check, help_bound, help_norm, p2_upper_bound, progress_measure};
use super::gamma::{commutator_growth_check, gamma_checks, sparsity_trajectory_check};
use super::progress::{accumulation_checks, easy_lemma_checks, hard_database_checks};
use super::report::{timed, SuiteReport, VerificationReport};
use super::sampling::TwirlMode;

/// Inequality tolerance on exact paths.
pub const TOL: f64 = 1e-9;
/// Tolerance for identities between relabelled states.
pub const IDENTITY_TOL: f64 = 1e-12;
/// Tolerance for the progress identity.
pub const PROGRESS_TOL: f64 = 1e-10;

/// Largest domain whose twirl pairs are enumerated by the state-level suites.
const PAIR_LIMIT: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    Factorization,
    ActiveSets,
    SpoEquivalence,
    Twirl,
    Fundamental,
    HelpNorm,
    Progress,
    Gamma,
    Commutator,
    Sparsity,
    All,
}

impl Suite {
    /// Every suite that `all` runs, in report order.
    pub const COMPONENTS: [Suite; 10] = [
        Suite::Factorization,
        Suite::ActiveSets,
        Suite::SpoEquivalence,
        Suite::Twirl,
        Suite::Fundamental,
        Suite::HelpNorm,
        Suite::Progress,
        Suite::Gamma,
        Suite::Commutator,
        Suite::Sparsity,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Factorization => "factorization",
            Suite::ActiveSets => "active-sets",
            Suite::SpoEquivalence => "spo-equivalence",
            Suite::Twirl => "twirl",
            Suite::Fundamental => "fundamental",
            Suite::HelpNorm => "help-norm",
            Suite::Progress => "progress",
            Suite::Gamma => "gamma",
            Suite::Commutator => "commutator",
            Suite::Sparsity => "sparsity",
            Suite::All => "all",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::COMPONENTS
            .into_iter()
            .chain([Suite::All])
            .find(|suite| suite.name() == s)
            .ok_or_else(|| Error::UnknownSuite(s.to_string()))
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SuiteConfig {
    pub suite: Suite,
    /// Domain size; suites that sweep sizes run `n..=n_max`.
    pub n: usize,
    pub n_max: Option<usize>,
    pub seed: u64,
    /// Twirl pairs per average when pairs are sampled.
    pub samples: usize,
    /// Draws for the sampler uniformity test.
    pub trials: usize,
}

impl SuiteConfig {
    pub fn new(suite: Suite, n: usize) -> Self {
        Self {
            suite,
            n,
            n_max: None,
            seed: 0,
            samples: 2000,
            trials: 1_000_000,
        }
    }

    fn sizes(&self) -> RangeInclusive<usize> {
        self.n..=self.n_max.unwrap_or(self.n).max(self.n)
    }

    fn mode(&self, n: usize) -> TwirlMode {
        TwirlMode::auto(n, self.samples, self.seed)
    }
}

/// Runs the configured suite; the report embeds the configuration.
pub fn run_suite(cfg: &SuiteConfig) -> Result<SuiteReport> {
    if cfg.n == 0 {
        return Err(Error::OutOfRange("domain size must be at least 1".into()));
    }
    let cases = match cfg.suite {
        Suite::All => {
            let mut all = Vec::new();
            for suite in Suite::COMPONENTS {
                all.extend(prefixed(suite.name(), suite_cases(suite, cfg)?));
            }
            all
        }
        suite => suite_cases(suite, cfg)?,
    };
    Ok(SuiteReport::new(cfg.suite.name(), cfg.n, Some(cfg.seed), serde_json::to_value(cfg)?, cases))
}

fn suite_cases(suite: Suite, cfg: &SuiteConfig) -> Result<Vec<VerificationReport>> {
    match suite {
        Suite::Factorization => factorization_suite(cfg),
        Suite::ActiveSets => active_sets_suite(cfg),
        Suite::SpoEquivalence => spo_equivalence_suite(cfg),
        Suite::Twirl => twirl_suite(cfg),
        Suite::Fundamental => fundamental_suite(cfg),
        Suite::HelpNorm => help_norm_suite(cfg),
        Suite::Progress => progress_suite(cfg),
        Suite::Gamma => sweep(cfg, 1, super::gamma::GAMMA_DENSE_LIMIT, |n| gamma_checks(n, TOL)),
        Suite::Commutator => sweep(cfg, 2, super::gamma::GAMMA_DENSE_LIMIT, |n| commutator_growth_check(n, TOL)),
        Suite::Sparsity => sparsity_suite(cfg),
        Suite::All => unreachable!("expanded by run_suite"),
    }
}

fn prefixed(prefix: &str, reports: Vec<VerificationReport>) -> Vec<VerificationReport> {
    reports
        .into_iter()
        .map(|mut r| {
            r.name = format!("{prefix}: {}", r.name);
            r
        })
        .collect()
}

fn check_limit(what: &'static str, n: usize, limit: usize) -> Result<()> {
    if n > limit {
        return Err(Error::SizeLimit {
            what,
            requested: n,
            limit,
        });
    }
    Ok(())
}

/// The sizes in range, all checked against `limit` before any work starts.
fn sizes_within(cfg: &SuiteConfig, what: &'static str, limit: usize) -> Result<Vec<usize>> {
    let sizes: Vec<usize> = cfg.sizes().collect();
    for &n in &sizes {
        check_limit(what, n, limit)?;
    }
    Ok(sizes)
}

/// One size per `N` in range, sizes below `from` skipped.
fn sweep(
    cfg: &SuiteConfig,
    from: usize,
    limit: usize,
    f: impl Fn(usize) -> Result<Vec<VerificationReport>>,
) -> Result<Vec<VerificationReport>> {
    let mut out = Vec::new();
    for n in sizes_within(cfg, "suite points", limit)?.into_iter().filter(|&n| n >= from) {
        out.extend(prefixed(&format!("N={n}"), f(n)?));
    }
    Ok(out)
}

/// Sizes for the oracle suites: the powers of two in range, up to `limit`.
fn oracle_sizes(cfg: &SuiteConfig, limit: usize) -> Result<Vec<usize>> {
    let sizes: Vec<usize> = cfg.sizes().filter(|n| n.is_power_of_two()).collect();
    if sizes.is_empty() {
        return Err(Error::NotPowerOfTwo(cfg.n));
    }
    for &n in &sizes {
        check_limit("oracle suite points", n, limit)?;
    }
    Ok(sizes)
}

/// A named circuit of the adversary suite; every case outputs `(X, Y)`.
#[derive(Clone, Debug)]
pub struct AdversaryCase {
    pub name: String,
    pub circuit: QueryCircuit,
}

/// Classical probes, random circuits and a loaded Grover search on `n` points.
pub fn adversary_circuits(n: usize, seed: u64) -> Result<Vec<AdversaryCase>> {
    check_power_of_two(n)?;
    let mut cases = Vec::new();
    let probe_points: Vec<usize> = if n <= 4 { (0..n).collect() } else { vec![0, n - 1] };
    for &x in &probe_points {
        for direction in [Direction::Forward, Direction::Inverse] {
            cases.push(AdversaryCase {
                name: format!("probe x={} {}", x + 1, direction_name(direction)),
                circuit: classical_probe(n, x, direction)?,
            });
        }
    }
    let shapes: &[(usize, usize)] = if n <= 4 { &[(2, 2), (3, 1)] } else { &[(1, 1)] };
    for (i, &(q, work)) in shapes.iter().enumerate() {
        let s = seed.wrapping_add(i as u64);
        cases.push(AdversaryCase {
            name: format!("random seed={s} q={q}"),
            circuit: random_circuit(s, q, work, n)?,
        });
    }
    if n >= 4 {
        // One amplification round, then a query loading `π(x)` into Y.
        let mut c = grover_preimage(n.trailing_zeros() as usize, 1, 0, 1)?;
        c.query(Direction::Forward);
        c.output = vec![Reg::X, Reg::Y];
        cases.push(AdversaryCase {
            name: "grover loaded".into(),
            circuit: c,
        });
    }
    Ok(cases)
}

/// Full, random, graph and empty relations; the dense ones only for `n <= 4`.
pub fn adversary_relations(n: usize, seed: u64) -> Vec<(String, Relation)> {
    let reversal = Permutation::from_images((0..n).rev().collect()).expect("reversal is a permutation");
    let mut rels = Vec::new();
    if n <= 4 {
        rels.push(("full".to_string(), Relation::full(n)));
    }
    let density = if n <= 4 { 0.5 } else { 1.0 / n as f64 };
    rels.push(("random".to_string(), Relation::random(n, density, seed)));
    rels.push(("graph".to_string(), Relation::graph(&reversal)));
    rels.push(("empty".to_string(), Relation::empty(n)));
    rels
}

fn direction_name(d: Direction) -> &'static str {
    match d {
        Direction::Forward => "forward",
        Direction::Inverse => "inverse",
    }
}

fn factorization_suite(cfg: &SuiteConfig) -> Result<Vec<VerificationReport>> {
    let mut out = Vec::new();
    for n in sizes_within(cfg, "factorization points", 8)? {
        let ((forward, backward, distinct), ms) = timed(|| {
            let size = factorial(n);
            let forward = permutations(n).filter(|p| p.factorize().compose() != *p).count();
            let mut seen = vec![false; size];
            let mut backward = 0usize;
            for i in 0..size {
                let f = Factorization::from_index(n, i);
                let p = f.compose();
                if p.factorize() != f {
                    backward += 1;
                }
                seen[p.index()] = true;
            }
            (forward, backward, seen.iter().filter(|&&s| s).count())
        });
        out.push(VerificationReport::equality(format!("compose after factorize N={n}"), forward as f64, 0.0, 0.0).with_runtime(ms));
        out.push(VerificationReport::equality(format!("factorize after compose N={n}"), backward as f64, 0.0, 0.0));
        out.push(VerificationReport::equality(
            format!("distinct products N={n}"),
            distinct as f64,
            factorial(n) as f64,
            0.0,
        ));
        if (2..=5).contains(&n) && cfg.trials >= 5 * factorial(n) {
            out.push(uniformity_check(n, cfg.trials, cfg.seed));
        }
    }
    Ok(out)
}

/// Pearson statistic of `draws` uniform samples against its mean `N! - 1`,
/// accepted within four standard deviations `√(2 (N! - 1))`.
fn uniformity_check(n: usize, draws: usize, seed: u64) -> VerificationReport {
    let (report, ms) = timed(|| {
        let cells = factorial(n);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut counts = vec![0u64; cells];
        for _ in 0..draws {
            counts[sample_uniform(n, &mut rng).index()] += 1;
        }
        let expected = draws as f64 / cells as f64;
        let chi2: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
        let df = (cells - 1) as f64;
        VerificationReport::monte_carlo_within(format!("uniform sampler chi-square N={n}"), chi2, df, (2.0 * df).sqrt(), 4.0)
    });
    report.with_runtime(ms)
}

fn active_sets_suite(cfg: &SuiteConfig) -> Result<Vec<VerificationReport>> {
    let mut out = Vec::new();
    for n in sizes_within(cfg, "active-set points", 7)? {
        let (mismatches, ms) = timed(|| {
            permutations(n)
                .map(|p| {
                    let f = p.factorize();
                    let inv = p.inverse();
                    (0..n)
                        .filter(|&x| {
                            apply_via_active(&f, x, Direction::Forward) != p.apply(x)
                                || apply_via_active(&f, x, Direction::Inverse) != inv.apply(x)
                        })
                        .count()
                })
                .sum::<usize>()
        });
        out.push(VerificationReport::equality(format!("evaluation via active factors N={n}"), mismatches as f64, 0.0, 0.0).with_runtime(ms));
        let (dev, ms) = timed(|| independence_deviation(n));
        out.push(VerificationReport::equality(format!("active independence N={n}"), dev, 0.0, IDENTITY_TOL).with_runtime(ms));
        for x in 0..n {
            let exact = expected_active_size(n, x, Direction::Forward, ExpectationMethod::Exact)?.mean;
            out.push(VerificationReport::exact(
                format!("forward expectation N={n} x={}", x + 1),
                exact,
                forward_log_bound(n, x),
                TOL,
            ));
            out.push(VerificationReport::equality(
                format!("forward closed form N={n} x={}", x + 1),
                exact,
                forward_expectation(n, x),
                IDENTITY_TOL,
            ));
            let inv = expected_active_size(n, x, Direction::Inverse, ExpectationMethod::Exact)?.mean;
            out.push(VerificationReport::exact(
                format!("inverse expectation N={n} y={}", x + 1),
                inv,
                inverse_linear_bound(n, x),
                TOL,
            ));
            let rec = expected_active_size(n, x, Direction::Inverse, ExpectationMethod::Recurrence)?.mean;
            out.push(VerificationReport::equality(
                format!("inverse recurrence N={n} y={}", x + 1),
                rec,
                inv,
                IDENTITY_TOL,
            ));
        }
    }
    Ok(out)
}

/// Largest gap between `Pr[k active for x | t_0..t_{k-1}]` and
/// `1/(k+1)` (x < k), `1` (x = k), `0` (x > k), over every prefix.
fn independence_deviation(n: usize) -> f64 {
    let size = factorial(n);
    // hits[x][k][prefix], the prefix being the mixed-radix index of t_0..t_{k-1}.
    let mut hits: Vec<Vec<Vec<u32>>> = (0..n).map(|_| (0..n).map(|k| vec![0; factorial(k)]).collect()).collect();
    for i in 0..size {
        let f = Factorization::from_index(n, i);
        for (x, row) in hits.iter_mut().enumerate() {
            for k in active_set(&f, x).members {
                row[k][i % factorial(k)] += 1;
            }
        }
    }
    let mut worst = 0.0f64;
    for (x, row) in hits.iter().enumerate() {
        for (k, prefixes) in row.iter().enumerate() {
            let expected = match x.cmp(&k) {
                std::cmp::Ordering::Less => 1.0 / (k + 1) as f64,
                std::cmp::Ordering::Equal => 1.0,
                std::cmp::Ordering::Greater => 0.0,
            };
            let per_prefix = (size / prefixes.len()) as f64;
            for &h in prefixes {
                worst = worst.max((h as f64 / per_prefix - expected).abs());
            }
        }
    }
    worst
}

fn help_norm_suite(cfg: &SuiteConfig) -> Result<Vec<VerificationReport>> {
    let mut out = Vec::new();
    for n in sizes_within(cfg, "help-norm points", 5)? {
        let (worst, ms) = timed(|| -> Result<(f64, f64, usize, usize)> {
            let mut worst = (f64::NEG_INFINITY, 0.0, 0, 0);
            for e in 0..n {
                for mask in 0..1usize << n {
                    let ys: Vec<usize> = (0..n).filter(|y| mask >> y & 1 == 1).collect();
                    let lhs = help_norm(n, e, &ys)?;
                    let rhs = help_bound(e, ys.len());
                    if lhs - rhs > worst.0 - worst.1 {
                        worst = (lhs, rhs, e, ys.len());
                    }
                }
            }
            Ok(worst)
        });
        let (lhs, rhs, e, len) = worst?;
        out.push(
            VerificationReport::exact(format!("help norm N={n} tightest at x={} |Y|={len}", e + 1), lhs, rhs, TOL).with_runtime(ms),
        );
    }
    out.push(VerificationReport::equality(
        "help norm equality N=2 x=2 |Y|=1",
        help_norm(2, 1, &[0])?,
        help_bound(1, 1),
        IDENTITY_TOL,
    ));
    Ok(out)
}

fn all_pairs(n: usize) -> Vec<(Permutation, Permutation)> {
    permutations(n)
        .flat_map(|s| permutations(n).map(move |t| (s.clone(), t)))
        .collect()
}

fn max_gap(a: &[C64], b: &[C64]) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    a.iter().zip(b).map(|(u, v)| (u - v).norm()).fold(0.0, f64::max)
}

/// The random circuits of the simulation experiments: 20 circuits with
/// `q <= 3` queries and work dimension at most 4.
fn simulation_circuits(n: usize, seed: u64) -> Result<Vec<AdversaryCase>> {
    (0..20u64)
        .map(|i| {
            let q = (i % 4) as usize;
            let work = 1 + (i / 4 % 4) as usize;
            let s = seed.wrapping_add(100 + i);
            Ok(AdversaryCase {
                name: format!("random seed={s} q={q} work={work}"),
                circuit: random_circuit(s, q, work, n)?,
            })
        })
        .collect()
}

fn spo_equivalence_suite(cfg: &SuiteConfig) -> Result<Vec<VerificationReport>> {
    let mut out = Vec::new();
    for n in oracle_sizes(cfg, PAIR_LIMIT)? {
        let db = Database::new(n)?;
        let pairs = all_pairs(n);
        let mut cases = simulation_circuits(n, cfg.seed)?;
        cases.extend(adversary_circuits(n, cfg.seed)?);
        for case in &cases {
            let c = &case.circuit;
            let tag = format!("N={n} {}", case.name);
            let (res, ms) = timed(|| -> Result<Vec<VerificationReport>> {
                let concrete = concrete_ensemble(c, &db)?;
                let spo_state = run(c, &Backend::Spo(&db))?;
                let spo = spo_recover(&spo_state, &db);
                let td = trace_distance(&concrete, &spo)?;
                // Concrete runs laid side by side give the averaged output distribution.
                let side_by_side = JointState {
                    frame: c.frame(),
                    blocks: db.size(),
                    amps: concrete.entries.values().flatten().copied().collect(),
                };
                let a = output_distribution(&side_by_side, &c.output);
                let b = output_distribution(&spo_state, &c.output);
                let dist_gap = a
                    .keys()
                    .chain(b.keys())
                    .map(|k| (a.get(k).unwrap_or(&0.0) - b.get(k).unwrap_or(&0.0)).abs())
                    .fold(0.0, f64::max);
                let twirled = pairs
                    .par_iter()
                    .map(|(s, t)| {
                        let state = run(c, &Backend::Tspo { db: &db, sigma: s, tau: t })?;
                        trace_distance(&tspo_recover(&state, &db, s, t), &spo)
                    })
                    .collect::<Result<Vec<f64>>>()?;
                let worst = twirled.iter().copied().fold(0.0, f64::max);
                let joint = twirled.iter().sum::<f64>() / twirled.len() as f64;
                Ok(vec![
                    VerificationReport::equality(format!("{tag}: concrete vs database ensemble"), td, 0.0, TOL),
                    VerificationReport::equality(format!("{tag}: output distributions"), dist_gap, 0.0, TOL),
                    VerificationReport::equality(format!("{tag}: fixed twirl ensemble"), worst, 0.0, TOL),
                    VerificationReport::equality(format!("{tag}: random twirl joint ensemble"), joint, 0.0, TOL),
                ])
            });
            let mut reports = res?;
            reports[0].runtime_ms = ms;
            out.extend(reports);
        }
    }
    Ok(out)
}

/// A joint state on the plain frame with distinct amplitudes, so equal images
/// under two basis permutations force the permutations to agree.
fn labelled_state(n: usize, db: &Database) -> JointState {
    let frame = Frame::new(1, false, n);
    let len = frame.block() * db.size();
    JointState {
        frame,
        blocks: db.size(),
        amps: (0..len).map(|i| C64::new((i + 1) as f64, 0.0)).collect(),
    }
}

/// The same state with an auxiliary register in `|0>`.
fn with_aux(state: &JointState) -> JointState {
    let plain = state.frame;
    let frame = Frame::new(plain.work, true, plain.n);
    let mut amps = vec![C64::new(0.0, 0.0); frame.block() * state.blocks];
    for d in 0..state.blocks {
        for (i, a) in state.block(d).iter().enumerate() {
            let j = frame.index(plain.digit(i, Reg::A), 0, plain.digit(i, Reg::X), plain.digit(i, Reg::Y));
            amps[d * frame.block() + j] = *a;
        }
    }
    JointState {
        frame,
        blocks: state.blocks,
        amps,
    }
}

fn twirl_suite(cfg: &SuiteConfig) -> Result<Vec<VerificationReport>> {
    let mut out = Vec::new();
    for n in oracle_sizes(cfg, PAIR_LIMIT)? {
        let db = Database::new(n)?;
        let pairs = all_pairs(n);
        let labelled = labelled_state(n, &db);
        for direction in [Direction::Forward, Direction::Inverse] {
            let (gap, ms) = timed(|| -> Result<f64> {
                let gaps = pairs
                    .par_iter()
                    .map(|(s, t)| {
                        let mut lhs = labelled.clone();
                        tspo_query(&mut lhs, &db, s, t, direction)?;
                        let mut rhs = twirl(&labelled, &db, &s.inverse(), &t.inverse());
                        spo_query(&mut rhs, &db, direction)?;
                        Ok(max_gap(&lhs.amps, &twirl(&rhs, &db, s, t).amps))
                    })
                    .collect::<Result<Vec<f64>>>()?;
                Ok(gaps.into_iter().fold(0.0, f64::max))
            });
            out.push(
                VerificationReport::equality(
                    format!("N={n} twirled oracle via database oracle {}", direction_name(direction)),
                    gap?,
                    0.0,
                    IDENTITY_TOL,
                )
                .with_runtime(ms),
            );
        }
        let commute = pairs
            .par_iter()
            .map(|(s, t)| {
                let a = left_twirl(&right_twirl(&labelled, &db, s), &db, t);
                let b = right_twirl(&left_twirl(&labelled, &db, t), &db, s);
                max_gap(&a.amps, &b.amps)
            })
            .reduce(|| 0.0, f64::max);
        out.push(VerificationReport::equality(format!("N={n} left and right twirls commute"), commute, 0.0, IDENTITY_TOL));
        let fresh = spo_init(&JointState::concrete(Frame::new(1, false, n)), &db)?;
        let invariance = pairs
            .par_iter()
            .map(|(s, t)| max_gap(&twirl(&fresh, &db, s, t).amps, &fresh.amps))
            .reduce(|| 0.0, f64::max);
        out.push(VerificationReport::equality(format!("N={n} uniform database twirl invariant"), invariance, 0.0, IDENTITY_TOL));

        for case in adversary_circuits(n, cfg.seed)? {
            let c = &case.circuit;
            let tag = format!("N={n} {}", case.name);
            let doubled = standard_form(c)?;
            let untwirled = run(c, &Backend::Spo(&db))?;
            let (gaps, ms) = timed(|| -> Result<[f64; 3]> {
                let per_pair = pairs
                    .par_iter()
                    .map(|(s, t)| -> Result<[f64; 3]> {
                        let tspo = Backend::Tspo { db: &db, sigma: s, tau: t };
                        let plain = run(c, &tspo)?;
                        let twisted = max_gap(&plain.amps, &twirl(&untwirled, &db, s, t).amps);
                        let first = with_aux(&plain);
                        let second = run(&doubled, &tspo)?;
                        let third = run(&doubled, &Backend::SpoSandwich { db: &db, sigma: s, tau: t })?;
                        Ok([twisted, max_gap(&first.amps, &second.amps), max_gap(&first.amps, &third.amps)])
                    })
                    .collect::<Result<Vec<[f64; 3]>>>()?;
                Ok(per_pair.iter().fold([0.0; 3], |acc, g| [acc[0].max(g[0]), acc[1].max(g[1]), acc[2].max(g[2])]))
            });
            let [twisted, second, third] = gaps?;
            out.push(VerificationReport::equality(format!("{tag}: twirled run is twirled state"), twisted, 0.0, IDENTITY_TOL).with_runtime(ms));
            out.push(VerificationReport::equality(format!("{tag}: standard form under twirled oracle"), second, 0.0, IDENTITY_TOL));
            out.push(VerificationReport::equality(format!("{tag}: standard form via relabelled database oracle"), third, 0.0, IDENTITY_TOL));
            out.push(VerificationReport::equality(
                format!("{tag}: standard form query count"),
                doubled.query_count() as f64,
                2.0 * c.query_count() as f64,
                0.0,
            ));
        }
    }
    Ok(out)
}

fn fundamental_suite(cfg: &SuiteConfig) -> Result<Vec<VerificationReport>> {
    let mut out = Vec::new();
    for n in oracle_sizes(cfg, crate::perm::ENUMERATION_LIMIT)? {
        let mode = cfg.mode(n);
        for case in adversary_circuits(n, cfg.seed)? {
            for (rel_name, rel) in adversary_relations(n, cfg.seed) {
                let name = format!("N={n} {} R={rel_name}", case.name);
                out.push(fundamental_check(&name, &case.circuit, &rel, mode, TOL)?);
            }
        }
    }
    Ok(out)
}

/// Cases for the hard-database bound, kept small: it reruns the doubled circuit per twirl pair.
fn hard_database_case(case: &AdversaryCase, rel_name: &str) -> bool {
    rel_name == "random" || (rel_name == "full" && case.name.starts_with("probe x=1 "))
}

fn progress_suite(cfg: &SuiteConfig) -> Result<Vec<VerificationReport>> {
    let mut out = Vec::new();
    for n in oracle_sizes(cfg, PAIR_LIMIT)? {
        let mode = cfg.mode(n);
        let relations = adversary_relations(n, cfg.seed);
        for (rel_name, rel) in &relations {
            out.extend(prefixed(&format!("N={n} R={rel_name}"), easy_lemma_checks(n, rel, TOL)?));
        }
        for case in adversary_circuits(n, cfg.seed)? {
            let c = &case.circuit;
            for (rel_name, rel) in &relations {
                let tag = format!("N={n} {} R={rel_name}", case.name);
                out.extend(prefixed(&tag, accumulation_checks(c, rel, TOL)?));
                let (pair, ms) = timed(|| -> Result<_> {
                    let measure = progress_measure(c, rel, mode)?;
                    let upper = p2_upper_bound(c, rel, mode)?;
                    let probs = experiment_probabilities(c, rel, mode)?;
                    Ok((
                        VerificationReport::equality(
                            format!("{tag}: N times progress equals p_ii expression"),
                            n as f64 * measure.mean,
                            upper.mean,
                            PROGRESS_TOL,
                        ),
                        VerificationReport::exact(format!("{tag}: p_ii expression dominates p_ii"), probs.p_ii, upper.mean, TOL),
                    ))
                });
                let (identity, p_ii) = pair?;
                let identity = identity.with_runtime(ms);
                out.push(identity);
                out.push(p_ii);
                if hard_database_case(&case, rel_name) {
                    out.extend(prefixed(&tag, hard_database_checks(c, rel, mode, TOL)?));
                }
            }
        }
    }
    Ok(out)
}

fn sparsity_suite(cfg: &SuiteConfig) -> Result<Vec<VerificationReport>> {
    let mut out = Vec::new();
    for n in oracle_sizes(cfg, PAIR_LIMIT)? {
        for case in adversary_circuits(n, cfg.seed)? {
            out.extend(prefixed(
                &format!("N={n} {}", case.name),
                sparsity_trajectory_check(&case.circuit, cfg.mode(n), TOL)?,
            ));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::perm::inverse_active_set;

    fn without_runtimes(report: &SuiteReport) -> String {
        let mut v = serde_json::to_value(report).unwrap();
        for case in v["cases"].as_array_mut().unwrap() {
            case["runtime_ms"] = serde_json::Value::Null;
        }
        v.to_string()
    }

    #[test]
    fn suite_names_parse() {
        for suite in Suite::COMPONENTS.into_iter().chain([Suite::All]) {
            assert_eq!(suite.name().parse::<Suite>().unwrap(), suite);
        }
        assert!(matches!("bogus".parse::<Suite>(), Err(Error::UnknownSuite(_))));
    }

    #[test]
    fn minimal_full_run_passes_and_repeats() {
        let cfg = SuiteConfig::new(Suite::All, 2);
        let a = run_suite(&cfg).unwrap();
        assert!(a.all_pass(), "{:?}", a.cases.iter().filter(|c| !c.pass).collect::<Vec<_>>());
        assert_eq!(a.config["seed"], 0);
        let b = run_suite(&cfg).unwrap();
        assert_eq!(without_runtimes(&a), without_runtimes(&b));
    }

    #[test]
    fn oracle_suites_need_power_of_two() {
        let cfg = SuiteConfig::new(Suite::Twirl, 3);
        assert!(matches!(run_suite(&cfg), Err(Error::NotPowerOfTwo(3))));
        let mut big = SuiteConfig::new(Suite::HelpNorm, 1);
        big.n_max = Some(9);
        assert!(matches!(run_suite(&big), Err(Error::SizeLimit { .. })));
    }

    #[test]
    fn adversary_cases_output_pairs() {
        for n in [2, 4, 8] {
            let cases = adversary_circuits(n, 3).unwrap();
            assert!(cases.iter().all(|c| c.circuit.output == [Reg::X, Reg::Y]));
            assert_eq!(cases.iter().filter(|c| c.name.starts_with("grover")).count(), usize::from(n >= 4));
        }
        assert_eq!(adversary_relations(8, 0).len(), 3);
    }

    #[test]
    fn independence_is_exact() {
        for n in 1..=6 {
            assert!(independence_deviation(n) < 1e-12);
        }
    }

    #[test]
    fn aux_embedding_places_zero() {
        let frame = Frame::new(2, false, 2);
        let mut s = JointState::concrete(frame);
        s.amps[0] = C64::new(0.0, 0.0);
        s.amps[frame.index(1, 0, 1, 0)] = C64::new(1.0, 0.0);
        let t = with_aux(&s);
        assert_eq!(t.amps[t.frame.index(1, 0, 1, 0)], C64::new(1.0, 0.0));
        assert_eq!(t.norm_sqr(), 1.0);
    }

    /// Inverse-active sets of `π` and active sets of `π^{-1}` are different
    /// notions; they first disagree at two points, for the swap and `y = 1`.
    #[test]
    fn inverse_active_differs_from_active_of_inverse() {
        let first = (1..=6).find(|&n| {
            permutations(n).any(|p| {
                let f = p.factorize();
                let g = p.inverse().factorize();
                (0..n).any(|y| inverse_active_set(&f, y).members != active_set(&g, y).members)
            })
        });
        assert_eq!(first, Some(2));
        let swap = Permutation::transposition(2, 0, 1);
        assert_eq!(inverse_active_set(&swap.factorize(), 0).members, vec![1]);
        assert_eq!(active_set(&swap.inverse().factorize(), 0).members, vec![0, 1]);
    }
}
