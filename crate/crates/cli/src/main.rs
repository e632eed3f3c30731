//! `permlab`: verification suites, attacks, bounds and factorizations from the command line.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use permlab::circuit::QueryCircuit;
use permlab::lab::attack::{run_attack, AttackBackend, AttackConfig, AttackKind};
use permlab::lab::bounds::{main_bound, sponge_bound, theorem_check, zero_search_bound, BoundValue, PermutationAverage};
use permlab::lab::report::SuiteReport;
use permlab::lab::suite::{run_suite, Suite, SuiteConfig, TOL};
use permlab::perm::{active_set, inverse_active_set, Permutation};
use permlab::relation::Relation;

#[derive(Parser)]
#[command(name = "permlab", version, about = "Random-permutation search bounds: verification suites, attacks and bounds")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Clone, Copy, ValueEnum)]
enum AttackName {
    Sponge,
    ZeroSearch,
}

#[derive(Clone, Copy, ValueEnum)]
enum BackendName {
    Concrete,
    Spo,
}

#[derive(Clone, Copy, ValueEnum)]
enum BoundName {
    Main,
    Sponge,
    ZeroSearch,
}

#[derive(Clone, Copy, ValueEnum)]
enum RelationName {
    Full,
    Empty,
    Random,
    Sponge,
    ZeroSearch,
}

#[derive(Subcommand)]
enum Command {
    /// Run a verification suite and write its report; exits 1 if any case fails.
    Verify {
        #[arg(long, value_parser = parse_suite)]
        suite: Suite,
        /// Domain size `N`.
        #[arg(long, default_value_t = 4)]
        n: usize,
        /// Upper end of the size sweep, inclusive.
        #[arg(long)]
        n_max: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Twirl pairs per average when `N > 4`.
        #[arg(long, default_value_t = 2000)]
        samples: usize,
        /// Draws for the sampler uniformity test.
        #[arg(long, default_value_t = 1_000_000)]
        trials: usize,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
    },
    /// Run a Grover-type attack and compare with its prediction and bound.
    Attack {
        #[arg(long, value_enum)]
        kind: AttackName,
        /// Permutation width in bits.
        #[arg(long)]
        n: usize,
        /// Capacity bits.
        #[arg(long)]
        c: usize,
        #[arg(long, default_value_t = 1)]
        iterations: usize,
        /// Output prefix searched by the sponge attack.
        #[arg(long, default_value_t = 0)]
        target: usize,
        #[arg(long, value_enum, default_value_t = BackendName::Concrete)]
        backend: BackendName,
        /// Sampled permutations; 0 enumerates all of them.
        #[arg(long, default_value_t = 200)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate a success bound, raw and clamped to [0, 1].
    Bound {
        #[arg(long, value_enum)]
        kind: BoundName,
        #[arg(long)]
        q: u64,
        /// Domain size `N` (main), width in bits (sponge) or half width (zero-search).
        #[arg(long)]
        n: f64,
        /// Capacity bits (sponge, zero-search).
        #[arg(long)]
        c: Option<u32>,
        /// Largest row or column of the relation (main).
        #[arg(long)]
        r_max: Option<f64>,
        #[arg(long, value_enum)]
        format: Option<Format>,
    },
    /// Factor a permutation given in one-line notation, e.g. "2 3 1".
    Factorize {
        perm: String,
        /// Also list the active and inverse-active sets of every point.
        #[arg(long)]
        active: bool,
    },
    /// Check the main theorem for a circuit file against a relation.
    Theorem {
        #[arg(long)]
        circuit: PathBuf,
        #[arg(long, value_enum)]
        relation: RelationName,
        #[arg(long, default_value_t = 0.5)]
        density: f64,
        /// Capacity bits for the sponge and zero-search relations.
        #[arg(long, default_value_t = 1)]
        c: usize,
        #[arg(long, default_value_t = 0)]
        target: usize,
        /// Sampled permutations; 0 averages exactly.
        #[arg(long, default_value_t = 0)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn parse_suite(s: &str) -> Result<Suite, String> {
    s.parse().map_err(|e: permlab::Error| e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(code) => code,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Run(e)) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

enum Failure {
    Usage(String),
    Run(permlab::Error),
}

impl From<permlab::Error> for Failure {
    fn from(e: permlab::Error) -> Self {
        Failure::Run(e)
    }
}

fn emit(text: &str, out: Option<&PathBuf>) -> Result<(), Failure> {
    match out {
        Some(path) => fs::write(path, text).map_err(|e| Failure::Run(e.into())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn execute(command: Command) -> Result<ExitCode, Failure> {
    match command {
        Command::Verify {
            suite,
            n,
            n_max,
            seed,
            samples,
            trials,
            out,
            format,
        } => {
            let cfg = SuiteConfig {
                suite,
                n,
                n_max,
                seed,
                samples,
                trials,
            };
            let report = run_suite(&cfg)?;
            let text = match format {
                Format::Json => report.to_json()? + "\n",
                Format::Csv => report.to_csv()?,
            };
            emit(&text, out.as_ref())?;
            summarize(&report);
            Ok(if report.all_pass() { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
        Command::Attack {
            kind,
            n,
            c,
            iterations,
            target,
            backend,
            trials,
            seed,
            out,
        } => {
            let cfg = AttackConfig {
                kind: match kind {
                    AttackName::Sponge => AttackKind::Sponge { target },
                    AttackName::ZeroSearch => AttackKind::ZeroSearch,
                },
                n_bits: n,
                c,
                iterations,
                backend: match backend {
                    BackendName::Concrete => AttackBackend::Concrete,
                    BackendName::Spo => AttackBackend::Spo,
                },
                trials,
                seed,
            };
            let report = run_attack(&cfg)?;
            let text = serde_json::to_string_pretty(&report).map_err(|e| Failure::Run(e.into()))? + "\n";
            emit(&text, out.as_ref())?;
            eprintln!(
                "success {:.6}{} reference {:.6} (marked-count average {:.6}) bound {:.6e}{}",
                report.success,
                report.stderr.map(|s| format!(" ± {s:.6}")).unwrap_or_default(),
                report.reference,
                report.reference_marked_average,
                report.bound.raw,
                if report.bound.vacuous { " (vacuous)" } else { "" },
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Bound {
            kind,
            q,
            n,
            c,
            r_max,
            format,
        } => {
            let need_c = || c.ok_or_else(|| Failure::Usage("--c is required for this bound".into()));
            let value = match kind {
                BoundName::Main => main_bound(q, n, r_max.unwrap_or(1.0)),
                BoundName::Sponge => sponge_bound(q, whole(n)?, need_c()?),
                BoundName::ZeroSearch => zero_search_bound(q, whole(n)?, need_c()?),
            };
            print_bound(&value, format)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Factorize { perm, active } => {
            let images = perm
                .split_whitespace()
                .map(|t| t.parse::<usize>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| Failure::Usage(format!("malformed permutation {perm:?}: {e}")))?;
            let p = Permutation::from_one_line(&images).map_err(|e| Failure::Usage(e.to_string()))?;
            print!("{}", factorization_text(&p, active));
            Ok(ExitCode::SUCCESS)
        }
        Command::Theorem {
            circuit,
            relation,
            density,
            c,
            target,
            trials,
            seed,
        } => {
            let text = fs::read_to_string(&circuit).map_err(|e| Failure::Run(e.into()))?;
            let circ = QueryCircuit::parse(&text)?;
            let n = circ.n;
            let bits = n.trailing_zeros() as usize;
            let rel = match relation {
                RelationName::Full => Relation::full(n),
                RelationName::Empty => Relation::empty(n),
                RelationName::Random => Relation::random(n, density, seed),
                RelationName::Sponge => Relation::sponge(bits, c, target),
                RelationName::ZeroSearch => Relation::zero_search(bits, c),
            };
            let average = if trials == 0 {
                PermutationAverage::Exact
            } else {
                PermutationAverage::Sampled { trials, seed }
            };
            let check = theorem_check(&circ, &rel, average, TOL)?;
            let text = serde_json::to_string_pretty(&check).map_err(|e| Failure::Run(e.into()))? + "\n";
            print!("{text}");
            let pass = check.reports.iter().all(|r| r.pass);
            Ok(if pass { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
    }
}

fn whole(n: f64) -> Result<u32, Failure> {
    if n.fract() != 0.0 || !(1.0..=f64::from(u32::MAX)).contains(&n) {
        return Err(Failure::Usage(format!("--n must be a positive integer here, got {n}")));
    }
    Ok(n as u32)
}

fn print_bound(value: &BoundValue, format: Option<Format>) -> Result<(), Failure> {
    match format {
        Some(Format::Json) => {
            println!("{}", serde_json::to_string_pretty(value).map_err(|e| Failure::Run(e.into()))?);
        }
        Some(Format::Csv) => println!("raw,clamped,vacuous\n{:e},{},{}", value.raw, value.clamped, value.vacuous),
        None => {
            println!("raw: {:.12e}", value.raw);
            println!("clamped: {}", value.clamped);
            println!("vacuous: {}", value.vacuous);
        }
    }
    Ok(())
}

fn one_based(v: &[usize]) -> String {
    v.iter().map(|k| (k + 1).to_string()).collect::<Vec<_>>().join(" ")
}

fn factorization_text(p: &Permutation, active: bool) -> String {
    let f = p.factorize();
    let t: Vec<String> = f.one_based().iter().map(|v| v.to_string()).collect();
    // Product order: the largest factor is applied last and written first.
    let factors: Vec<String> = f.nontrivial().map(|(k, tk)| format!("({} {})", k + 1, tk + 1)).collect();
    let mut s = format!(
        "t: {}\nfactors: {}\ndistance: {}\n",
        t.join(" "),
        if factors.is_empty() { "none".to_string() } else { factors.join(" ") },
        f.cayley_distance()
    );
    if active {
        for x in 0..p.len() {
            s += &format!("active x={}: {}\n", x + 1, one_based(&active_set(&f, x).members));
        }
        for y in 0..p.len() {
            s += &format!("inverse-active y={}: {}\n", y + 1, one_based(&inverse_active_set(&f, y).members));
        }
    }
    s
}

fn summarize(report: &SuiteReport) {
    for case in report.cases.iter().filter(|c| !c.pass) {
        eprintln!("FAIL {}: lhs {:e} rhs {:e}", case.name, case.lhs, case.rhs);
    }
    eprintln!(
        "suite {} N={}: {}/{} passed",
        report.suite, report.n, report.totals.passed, report.totals.cases
    );
}
