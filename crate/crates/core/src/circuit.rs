//! Query algorithms: local gates interleaved with oracle calls.
//!
//! Every run starts from `|0>` on all front registers. A circuit also has a
//! line-oriented text form, one step per line:
//!
//! ```text
//! circuit   := line*
//! line      := comment | header | step
//! comment   := '#' any*                       (also blank lines)
//! header    := 'points' N                     (required; N is a power of two)
//!            | 'work' DIM                     (default 1)
//!            | 'aux'                          (adds the Z register)
//!            | 'output' REG+                  (default X Y)
//! step      := 'unitary' REG (',' REG)* 'seed' U64   Haar unitary drawn from the seed
//!            | 'swap' REG REG
//!            | 'xor' REG REG                  second ^= first
//!            | 'relabel' REG P1 .. PN         |v> -> |p(v)>, 1-based one-line
//!            | 'prepare' REG LABEL+           Householder swap of |0> and uniform(LABELs)
//!            | 'reflect' REG LABEL+           I - 2|s><s|, s = uniform(LABELs)
//!            | 'phase' REG LABEL+             -1 on the listed labels
//!            | 'query' ('forward'|'inverse') ['second']
//! REG       := 'A' | 'Z' | 'X' | 'Y'
//! LABEL     := 0-based register label
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;

use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{haar_unitary, ClassicalQuantumEnsemble, C64};
use crate::oracle::{
    check_power_of_two, concrete_query, spo_init, spo_query, tspo_query, Database, Frame, JointState, Reg,
};
use crate::perm::{Direction, Permutation};
use crate::relation::Relation;

/// Which of the two oracles of a query pair a query uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Slot {
    First,
    Second,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Gate {
    Unitary {
        targets: Vec<Reg>,
        matrix: DMatrix<C64>,
        seed: Option<u64>,
    },
    Swap(Reg, Reg),
    XorInto {
        source: Reg,
        target: Reg,
    },
    Relabel {
        reg: Reg,
        perm: Permutation,
    },
    Prepare {
        reg: Reg,
        support: Vec<usize>,
    },
    Reflect {
        reg: Reg,
        support: Vec<usize>,
    },
    Phase {
        reg: Reg,
        flipped: Vec<usize>,
    },
}

impl Gate {
    pub fn haar(targets: Vec<Reg>, dim: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Gate::Unitary {
            targets,
            matrix: haar_unitary(dim, &mut rng),
            seed: Some(seed),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Step {
    Local(Gate),
    Query { direction: Direction, slot: Slot },
}

#[derive(Clone, Debug, PartialEq)]
pub struct QueryCircuit {
    pub n: usize,
    pub work_dim: usize,
    pub aux: bool,
    pub steps: Vec<Step>,
    pub output: Vec<Reg>,
}

impl QueryCircuit {
    pub fn new(n: usize, work_dim: usize) -> Self {
        Self {
            n,
            work_dim,
            aux: false,
            steps: Vec::new(),
            output: vec![Reg::X, Reg::Y],
        }
    }

    pub fn frame(&self) -> Frame {
        Frame::new(self.work_dim, self.aux, self.n)
    }

    pub fn query_count(&self) -> usize {
        self.steps.iter().filter(|s| matches!(s, Step::Query { .. })).count()
    }

    pub fn query_directions(&self) -> Vec<Direction> {
        self.steps
            .iter()
            .filter_map(|s| match s {
                Step::Query { direction, .. } => Some(*direction),
                Step::Local(_) => None,
            })
            .collect()
    }

    pub fn push(&mut self, gate: Gate) -> &mut Self {
        self.steps.push(Step::Local(gate));
        self
    }

    pub fn query(&mut self, direction: Direction) -> &mut Self {
        self.steps.push(Step::Query {
            direction,
            slot: Slot::First,
        });
        self
    }

    pub fn validate(&self) -> Result<()> {
        check_power_of_two(self.n)?;
        if self.work_dim == 0 {
            return Err(Error::Dimension("work register needs dimension at least 1".into()));
        }
        let frame = self.frame();
        let uses = |r: Reg| r != Reg::Z || self.aux;
        for step in &self.steps {
            if let Step::Local(g) = step {
                let regs: Vec<Reg> = match g {
                    Gate::Unitary { targets, matrix, .. } => {
                        let d: usize = targets.iter().map(|&r| frame.dim(r)).product();
                        if matrix.nrows() != d || matrix.ncols() != d {
                            return Err(Error::Dimension(format!("unitary of size {} on span {d}", matrix.nrows())));
                        }
                        targets.clone()
                    }
                    Gate::Swap(a, b) | Gate::XorInto { source: a, target: b } => {
                        if frame.dim(*a) != frame.dim(*b) || a == b {
                            return Err(Error::Dimension("two-register gate needs distinct equal registers".into()));
                        }
                        vec![*a, *b]
                    }
                    Gate::Relabel { reg, perm } => {
                        if perm.len() != frame.dim(*reg) {
                            return Err(Error::Dimension("relabel size".into()));
                        }
                        vec![*reg]
                    }
                    Gate::Prepare { reg, support } | Gate::Reflect { reg, support } | Gate::Phase { reg, flipped: support } => {
                        if support.iter().any(|&l| l >= frame.dim(*reg)) {
                            return Err(Error::Dimension("label outside register".into()));
                        }
                        vec![*reg]
                    }
                };
                if !regs.into_iter().all(uses) {
                    return Err(Error::Dimension("Z register used without aux".into()));
                }
            }
        }
        Ok(())
    }

    pub fn to_text(&self) -> Result<String> {
        let mut s = String::new();
        let list = |v: &[usize]| v.iter().map(|l| l.to_string()).collect::<Vec<_>>().join(" ");
        writeln!(s, "points {}", self.n).unwrap();
        writeln!(s, "work {}", self.work_dim).unwrap();
        if self.aux {
            writeln!(s, "aux").unwrap();
        }
        for step in &self.steps {
            match step {
                Step::Query { direction, slot } => {
                    let d = match direction {
                        Direction::Forward => "forward",
                        Direction::Inverse => "inverse",
                    };
                    let tail = if *slot == Slot::Second { " second" } else { "" };
                    writeln!(s, "query {d}{tail}").unwrap();
                }
                Step::Local(g) => match g {
                    Gate::Unitary { targets, seed, .. } => {
                        let seed = seed.ok_or_else(|| {
                            Error::Precondition("only seeded unitaries have a text form".into())
                        })?;
                        let regs: Vec<&str> = targets.iter().map(|r| r.name()).collect();
                        writeln!(s, "unitary {} seed {seed}", regs.join(",")).unwrap();
                    }
                    Gate::Swap(a, b) => writeln!(s, "swap {} {}", a.name(), b.name()).unwrap(),
                    Gate::XorInto { source, target } => {
                        writeln!(s, "xor {} {}", source.name(), target.name()).unwrap()
                    }
                    Gate::Relabel { reg, perm } => writeln!(s, "relabel {} {perm}", reg.name()).unwrap(),
                    Gate::Prepare { reg, support } => writeln!(s, "prepare {} {}", reg.name(), list(support)).unwrap(),
                    Gate::Reflect { reg, support } => writeln!(s, "reflect {} {}", reg.name(), list(support)).unwrap(),
                    Gate::Phase { reg, flipped } => writeln!(s, "phase {} {}", reg.name(), list(flipped)).unwrap(),
                },
            }
        }
        let out: Vec<&str> = self.output.iter().map(|r| r.name()).collect();
        writeln!(s, "output {}", out.join(" ")).unwrap();
        Ok(s)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut n = None;
        let mut work = 1;
        let mut aux = false;
        let mut output = vec![Reg::X, Reg::Y];
        let mut pending: Vec<(usize, Vec<String>)> = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let words: Vec<String> = line.split_whitespace().map(str::to_string).collect();
            let err = |message: &str| Error::Parse {
                line: i + 1,
                message: message.to_string(),
            };
            match words[0].as_str() {
                "points" => n = Some(parse_num(words.get(1), i)?),
                "work" => work = parse_num(words.get(1), i)?,
                "aux" => aux = true,
                "output" => {
                    output = words[1..]
                        .iter()
                        .map(|w| Reg::parse(w).ok_or_else(|| err("unknown register")))
                        .collect::<Result<_>>()?;
                }
                _ => pending.push((i, words)),
            }
        }
        let n = n.ok_or(Error::Parse {
            line: 0,
            message: "missing 'points' header".into(),
        })?;
        let mut c = QueryCircuit {
            n,
            work_dim: work,
            aux,
            steps: Vec::new(),
            output,
        };
        let frame = c.frame();
        for (i, words) in pending {
            let err = |message: &str| Error::Parse {
                line: i + 1,
                message: message.to_string(),
            };
            let reg = |k: usize| -> Result<Reg> {
                words.get(k).and_then(|w| Reg::parse(w)).ok_or_else(|| err("expected register A, Z, X or Y"))
            };
            let labels = |from: usize| -> Result<Vec<usize>> {
                words[from..]
                    .iter()
                    .map(|w| w.parse().map_err(|_| err("expected a label")))
                    .collect()
            };
            let step = match words[0].as_str() {
                "query" => {
                    let direction = match words.get(1).map(String::as_str) {
                        Some("forward") => Direction::Forward,
                        Some("inverse") => Direction::Inverse,
                        _ => return Err(err("query needs 'forward' or 'inverse'")),
                    };
                    let slot = match words.get(2).map(String::as_str) {
                        None => Slot::First,
                        Some("second") => Slot::Second,
                        _ => return Err(err("unexpected token after query")),
                    };
                    Step::Query { direction, slot }
                }
                "unitary" => {
                    let targets = words
                        .get(1)
                        .ok_or_else(|| err("missing registers"))?
                        .split(',')
                        .map(|w| Reg::parse(w).ok_or_else(|| err("unknown register")))
                        .collect::<Result<Vec<_>>>()?;
                    if words.get(2).map(String::as_str) != Some("seed") {
                        return Err(err("expected 'seed'"));
                    }
                    let seed: u64 = parse_num(words.get(3), i)?;
                    let dim = targets.iter().map(|&r| frame.dim(r)).product();
                    Step::Local(Gate::haar(targets, dim, seed))
                }
                "swap" => Step::Local(Gate::Swap(reg(1)?, reg(2)?)),
                "xor" => Step::Local(Gate::XorInto {
                    source: reg(1)?,
                    target: reg(2)?,
                }),
                "relabel" => {
                    let one_based = labels(2)?;
                    let perm = Permutation::from_one_line(&one_based).map_err(|e| err(&e.to_string()))?;
                    Step::Local(Gate::Relabel { reg: reg(1)?, perm })
                }
                "prepare" => Step::Local(Gate::Prepare {
                    reg: reg(1)?,
                    support: labels(2)?,
                }),
                "reflect" => Step::Local(Gate::Reflect {
                    reg: reg(1)?,
                    support: labels(2)?,
                }),
                "phase" => Step::Local(Gate::Phase {
                    reg: reg(1)?,
                    flipped: labels(2)?,
                }),
                other => return Err(err(&format!("unknown instruction '{other}'"))),
            };
            c.steps.push(step);
        }
        c.validate().map_err(|e| Error::Parse {
            line: 0,
            message: e.to_string(),
        })?;
        Ok(c)
    }
}

fn parse_num<T: std::str::FromStr>(w: Option<&String>, line: usize) -> Result<T> {
    w.and_then(|w| w.parse().ok()).ok_or(Error::Parse {
        line: line + 1,
        message: "expected a number".into(),
    })
}

/// Applies a block-local gate to every block.
pub fn apply_gate(state: &mut JointState, gate: &Gate) -> Result<()> {
    let frame = state.frame;
    let b = frame.block();
    match gate {
        Gate::Unitary { targets, matrix, .. } => {
            let (offsets, bases) = frame.split(targets);
            if matrix.nrows() != offsets.len() {
                return Err(Error::Dimension("unitary does not match its targets".into()));
            }
            let d = offsets.len();
            state.amps.par_chunks_mut(b).for_each(|chunk| {
                let mut buf = vec![C64::new(0.0, 0.0); d];
                for &base in &bases {
                    for (slot, o) in buf.iter_mut().zip(&offsets) {
                        *slot = chunk[base + o];
                    }
                    for (i, o) in offsets.iter().enumerate() {
                        chunk[base + o] = (0..d).map(|j| matrix[(i, j)] * buf[j]).sum();
                    }
                }
            });
        }
        Gate::Swap(r1, r2) => {
            let (s1, s2) = (frame.stride(*r1), frame.stride(*r2));
            let map: Vec<usize> = (0..b)
                .map(|i| {
                    let (d1, d2) = (frame.digit(i, *r1), frame.digit(i, *r2));
                    i - d1 * s1 - d2 * s2 + d2 * s1 + d1 * s2
                })
                .collect();
            permute_within_blocks(state, &map);
        }
        Gate::XorInto { source, target } => {
            let map: Vec<usize> = (0..b)
                .map(|i| {
                    let (s, t) = (frame.digit(i, *source), frame.digit(i, *target));
                    i - t * frame.stride(*target) + (t ^ s) * frame.stride(*target)
                })
                .collect();
            permute_within_blocks(state, &map);
        }
        Gate::Relabel { reg, perm } => {
            let map: Vec<usize> = (0..b)
                .map(|i| {
                    let v = frame.digit(i, *reg);
                    i - v * frame.stride(*reg) + perm.apply(v) * frame.stride(*reg)
                })
                .collect();
            permute_within_blocks(state, &map);
        }
        Gate::Prepare { reg, support } => {
            let dim = frame.dim(*reg);
            let s = uniform_on(dim, support);
            let mut w: Vec<f64> = s.iter().map(|v| -v).collect();
            w[0] += 1.0;
            let norm = w.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 1e-15 {
                w.iter_mut().for_each(|v| *v /= norm);
                householder(state, *reg, &w);
            }
        }
        Gate::Reflect { reg, support } => {
            let s = uniform_on(frame.dim(*reg), support);
            householder(state, *reg, &s);
        }
        Gate::Phase { reg, flipped } => {
            let mut sign = vec![false; frame.dim(*reg)];
            for &l in flipped {
                sign[l] = true;
            }
            let reg = *reg;
            state.amps.par_chunks_mut(b).for_each(|chunk| {
                for (i, a) in chunk.iter_mut().enumerate() {
                    if sign[frame.digit(i, reg)] {
                        *a = -*a;
                    }
                }
            });
        }
    }
    Ok(())
}

fn uniform_on(dim: usize, support: &[usize]) -> Vec<f64> {
    let mut s = vec![0.0; dim];
    let a = 1.0 / (support.len() as f64).sqrt();
    for &l in support {
        s[l] = a;
    }
    s
}

/// `I - 2|w><w|` on one register, `w` real and unit.
fn householder(state: &mut JointState, reg: Reg, w: &[f64]) {
    let frame = state.frame;
    let (offsets, bases) = frame.split(&[reg]);
    state.amps.par_chunks_mut(frame.block()).for_each(|chunk| {
        for &base in &bases {
            let dot: C64 = offsets.iter().zip(w).map(|(o, wi)| chunk[base + o] * wi).sum();
            for (o, wi) in offsets.iter().zip(w) {
                chunk[base + o] -= dot * (2.0 * wi);
            }
        }
    });
}

fn permute_within_blocks(state: &mut JointState, map: &[usize]) {
    let b = state.frame.block();
    state.amps.par_chunks_mut(b).for_each(|chunk| {
        let src = chunk.to_vec();
        for (i, &j) in map.iter().enumerate() {
            chunk[j] = src[i];
        }
    });
}

/// How queries are answered.
#[derive(Clone, Copy, Debug)]
pub enum Backend<'a> {
    Concrete(&'a Permutation),
    Spo(&'a Database),
    Tspo {
        db: &'a Database,
        sigma: &'a Permutation,
        tau: &'a Permutation,
    },
    /// Database oracle conjugated by relabelings of X and Y; each slot of a
    /// query pair gets its own conjugation so the pair matches the twirled
    /// oracle on the doubled circuit.
    SpoSandwich {
        db: &'a Database,
        sigma: &'a Permutation,
        tau: &'a Permutation,
    },
}

impl Backend<'_> {
    pub fn database(&self) -> Option<&Database> {
        match self {
            Backend::Concrete(_) => None,
            Backend::Spo(db) | Backend::Tspo { db, .. } | Backend::SpoSandwich { db, .. } => Some(db),
        }
    }

    fn points(&self) -> usize {
        match self {
            Backend::Concrete(p) => p.len(),
            _ => self.database().unwrap().n(),
        }
    }
}

fn answer(state: &mut JointState, backend: &Backend<'_>, direction: Direction, slot: Slot) -> Result<()> {
    match *backend {
        Backend::Concrete(p) => concrete_query(state, p, direction),
        Backend::Spo(db) => spo_query(state, db, direction),
        Backend::Tspo { db, sigma, tau } => tspo_query(state, db, sigma, tau, direction),
        Backend::SpoSandwich { db, sigma, tau } => {
            let relabel = |state: &mut JointState, reg: Reg, perm: &Permutation| {
                apply_gate(state, &Gate::Relabel { reg, perm: perm.clone() })
            };
            // In and out of the database frame: X through `a`, Y through `b`.
            let (a, b) = match direction {
                Direction::Forward => (sigma, tau),
                Direction::Inverse => (tau, sigma),
            };
            match slot {
                Slot::First => {
                    relabel(state, Reg::X, a)?;
                    spo_query(state, db, direction)?;
                    relabel(state, Reg::Y, &b.inverse())?;
                    relabel(state, Reg::X, &a.inverse())
                }
                Slot::Second => {
                    relabel(state, Reg::Y, b)?;
                    relabel(state, Reg::X, a)?;
                    spo_query(state, db, direction)?;
                    relabel(state, Reg::X, &a.inverse())
                }
            }
        }
    }
}

/// Runs `circuit`, handing each pre-query state to `observe` together with
/// the index and direction of the query about to be made.
pub fn run_observed(
    circuit: &QueryCircuit,
    backend: &Backend<'_>,
    mut observe: impl FnMut(usize, Direction, &JointState) -> Result<()>,
) -> Result<JointState> {
    circuit.validate()?;
    if backend.points() != circuit.n {
        return Err(Error::Dimension(format!(
            "circuit on {} points, oracle on {}",
            circuit.n,
            backend.points()
        )));
    }
    let front = JointState::concrete(circuit.frame());
    let mut state = match backend.database() {
        Some(db) => spo_init(&front, db)?,
        None => front,
    };
    let mut j = 0;
    for step in &circuit.steps {
        match step {
            Step::Local(g) => apply_gate(&mut state, g)?,
            Step::Query { direction, slot } => {
                observe(j, *direction, &state)?;
                answer(&mut state, backend, *direction, *slot)?;
                j += 1;
            }
        }
    }
    Ok(state)
}

pub fn run(circuit: &QueryCircuit, backend: &Backend<'_>) -> Result<JointState> {
    run_observed(circuit, backend, |_, _, _| Ok(()))
}

/// Final state plus every pre-query state.
pub struct Trace {
    pub pre_query: Vec<(Direction, JointState)>,
    pub final_state: JointState,
}

pub fn run_traced(circuit: &QueryCircuit, backend: &Backend<'_>) -> Result<Trace> {
    let mut pre = Vec::new();
    let final_state = run_observed(circuit, backend, |_, d, s| {
        pre.push((d, s.clone()));
        Ok(())
    })?;
    Ok(Trace {
        pre_query: pre,
        final_state,
    })
}

/// Born distribution of the listed front registers.
pub fn output_distribution(state: &JointState, output: &[Reg]) -> BTreeMap<Vec<usize>, f64> {
    let frame = state.frame;
    let mut dist = BTreeMap::new();
    for (i, a) in state.amps.iter().enumerate() {
        let p = a.norm_sqr();
        if p == 0.0 {
            continue;
        }
        let local = i % frame.block();
        let key: Vec<usize> = output.iter().map(|&r| frame.digit(local, r)).collect();
        *dist.entry(key).or_insert(0.0) += p;
    }
    dist
}

/// `Pr[(x, π(x)) ∈ R]` with `x` read from X.
pub fn success_probability(state: &JointState, backend: &Backend<'_>, relation: &Relation) -> f64 {
    let frame = state.frame;
    let image = |d: usize, x: usize| match backend {
        Backend::Concrete(p) => p.apply(x),
        Backend::Spo(db) | Backend::SpoSandwich { db, .. } => db.image(d, x),
        Backend::Tspo { db, sigma, tau } => tau.inverse().apply(db.image(d, sigma.apply(x))),
    };
    (0..state.blocks)
        .map(|d| {
            state
                .block(d)
                .iter()
                .enumerate()
                .filter(|(i, _)| {
                    let x = frame.digit(*i, Reg::X);
                    relation.contains(x, image(d, x))
                })
                .map(|(_, a)| a.norm_sqr())
                .sum::<f64>()
        })
        .sum()
}

/// Residual front states of concrete runs, each weighted by `1/sqrt(N!)`.
pub fn concrete_ensemble(circuit: &QueryCircuit, db: &Database) -> Result<ClassicalQuantumEnsemble<Permutation>> {
    let scale = 1.0 / (db.size() as f64).sqrt();
    let runs: Vec<Result<(Permutation, Vec<C64>)>> = (0..db.size())
        .into_par_iter()
        .map(|d| {
            let p = db.permutation(d);
            let s = run(circuit, &Backend::Concrete(&p))?;
            Ok((p, s.amps.iter().map(|a| a * scale).collect()))
        })
        .collect();
    let mut e = ClassicalQuantumEnsemble::new();
    for r in runs {
        let (p, v) = r?;
        e.insert(p, v);
    }
    Ok(e)
}

/// One query at a fixed input; outputs `(x, π(x))` or `(x, π^{-1}(x))`.
pub fn classical_probe(n: usize, x: usize, direction: Direction) -> Result<QueryCircuit> {
    if x >= n {
        return Err(Error::OutOfRange(format!("probe point {} outside 1..={n}", x + 1)));
    }
    let mut c = QueryCircuit::new(n, 1);
    c.push(Gate::Relabel {
        reg: Reg::X,
        perm: Permutation::transposition(n, 0, x),
    })
    .query(direction);
    Ok(c)
}

/// Adds the `Z` register and replaces every query by
/// `swap(Y,Z) · query · xor(Y→Z) · query(second) · swap(Y,Z)`, which acts
/// as the original query whenever `Z` starts in `|0>`. Query count doubles.
pub fn standard_form(circuit: &QueryCircuit) -> Result<QueryCircuit> {
    if circuit.aux {
        return Err(Error::Precondition("circuit already uses the Z register".into()));
    }
    let mut out = QueryCircuit {
        aux: true,
        steps: Vec::with_capacity(circuit.steps.len() + 4 * circuit.query_count()),
        ..circuit.clone()
    };
    for step in &circuit.steps {
        match *step {
            Step::Local(_) => out.steps.push(step.clone()),
            Step::Query { direction, .. } => out.steps.extend([
                Step::Local(Gate::Swap(Reg::Y, Reg::Z)),
                Step::Query {
                    direction,
                    slot: Slot::First,
                },
                Step::Local(Gate::XorInto {
                    source: Reg::Y,
                    target: Reg::Z,
                }),
                Step::Query {
                    direction,
                    slot: Slot::Second,
                },
                Step::Local(Gate::Swap(Reg::Y, Reg::Z)),
            ]),
        }
    }
    Ok(out)
}

fn check_attack_shape(n_bits: usize, c: usize) -> Result<()> {
    if c == 0 || c >= n_bits {
        return Err(Error::OutOfRange(format!("capacity {c} must lie in 1..{n_bits}")));
    }
    if n_bits > 16 {
        return Err(Error::SizeLimit {
            what: "attack bits",
            requested: n_bits,
            limit: 16,
        });
    }
    Ok(())
}

/// Amplitude amplification over inputs `x || 0^c` with a compute-phase-uncompute oracle.
fn amplification(n_bits: usize, c: usize, marked_outputs: Vec<usize>, iterations: usize) -> QueryCircuit {
    let n = 1usize << n_bits;
    let inputs: Vec<usize> = (0..1usize << (n_bits - c)).map(|x| x << c).collect();
    let mut circ = QueryCircuit::new(n, 1);
    circ.output = vec![Reg::X];
    circ.push(Gate::Prepare {
        reg: Reg::X,
        support: inputs.clone(),
    });
    for _ in 0..iterations {
        circ.query(Direction::Forward)
            .push(Gate::Phase {
                reg: Reg::Y,
                flipped: marked_outputs.clone(),
            })
            .query(Direction::Forward)
            .push(Gate::Reflect {
                reg: Reg::X,
                support: inputs.clone(),
            });
    }
    circ
}

/// Searches for `x` whose padded image starts with `target`.
pub fn grover_preimage(n_bits: usize, c: usize, target: usize, iterations: usize) -> Result<QueryCircuit> {
    check_attack_shape(n_bits, c)?;
    if target >> (n_bits - c) != 0 {
        return Err(Error::OutOfRange(format!("target {target} wider than {} bits", n_bits - c)));
    }
    let marked = (0..1usize << c).map(|low| (target << c) | low).collect();
    Ok(amplification(n_bits, c, marked, iterations))
}

/// Searches for `x` whose padded image ends in `c` zero bits.
pub fn zero_search_adversary(n_bits: usize, c: usize, iterations: usize) -> Result<QueryCircuit> {
    check_attack_shape(n_bits, c)?;
    let marked = (0..1usize << (n_bits - c)).map(|high| high << c).collect();
    Ok(amplification(n_bits, c, marked, iterations))
}

/// Haar unitaries on `A ⊗ X ⊗ Y` between randomly directed queries.
pub fn random_circuit(seed: u64, q: usize, work_dim: usize, n: usize) -> Result<QueryCircuit> {
    check_power_of_two(n)?;
    let dim = work_dim * n * n;
    if dim > 4096 {
        return Err(Error::SizeLimit {
            what: "random unitary dimension",
            requested: dim,
            limit: 4096,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut c = QueryCircuit::new(n, work_dim);
    let targets = vec![Reg::A, Reg::X, Reg::Y];
    c.push(Gate::haar(targets.clone(), dim, rng.gen()));
    for _ in 0..q {
        let direction = if rng.gen_bool(0.5) {
            Direction::Forward
        } else {
            Direction::Inverse
        };
        c.query(direction).push(Gate::haar(targets.clone(), dim, rng.gen()));
    }
    Ok(c)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn probe_outputs_image() {
        let p = Permutation::from_one_line(&[3, 1, 4, 2]).unwrap();
        for x in 0..4 {
            for dir in [Direction::Forward, Direction::Inverse] {
                let c = classical_probe(4, x, dir).unwrap();
                let s = run(&c, &Backend::Concrete(&p)).unwrap();
                let dist = output_distribution(&s, &c.output);
                let y = match dir {
                    Direction::Forward => p.apply(x),
                    Direction::Inverse => p.inverse().apply(x),
                };
                assert!((dist[&vec![x, y]] - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn swap_and_xor_gates() {
        let mut c = QueryCircuit::new(4, 1);
        c.aux = true;
        c.push(Gate::Relabel {
            reg: Reg::Y,
            perm: Permutation::transposition(4, 0, 3),
        })
        .push(Gate::XorInto {
            source: Reg::Y,
            target: Reg::X,
        })
        .push(Gate::Swap(Reg::Y, Reg::Z));
        c.output = vec![Reg::X, Reg::Y, Reg::Z];
        let p = Permutation::identity(4);
        let s = run(&c, &Backend::Concrete(&p)).unwrap();
        let dist = output_distribution(&s, &c.output);
        assert!((dist[&vec![3, 0, 3]] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn circuit_text_round_trip() {
        let mut c = random_circuit(9, 2, 2, 4).unwrap();
        c.aux = true;
        c.push(Gate::Swap(Reg::Y, Reg::Z))
            .push(Gate::Phase {
                reg: Reg::Y,
                flipped: vec![1, 2],
            })
            .push(Gate::Prepare {
                reg: Reg::X,
                support: vec![0, 2],
            });
        c.steps.push(Step::Query {
            direction: Direction::Inverse,
            slot: Slot::Second,
        });
        let text = c.to_text().unwrap();
        assert_eq!(QueryCircuit::parse(&text).unwrap(), c);
        assert!(QueryCircuit::parse("work 2\n").is_err());
        assert!(matches!(
            QueryCircuit::parse("points 4\nfrobnicate X\n"),
            Err(Error::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn random_circuits_are_deterministic() {
        assert_eq!(random_circuit(5, 3, 2, 4).unwrap(), random_circuit(5, 3, 2, 4).unwrap());
        assert_eq!(random_circuit(5, 0, 2, 4).unwrap().query_count(), 0);
    }

    #[test]
    fn grover_matches_textbook_for_fixed_permutation() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for (n_bits, c, iters) in [(4, 2, 1), (5, 2, 2), (6, 3, 3)] {
            let p = crate::perm::sample_uniform(1 << n_bits, &mut rng);
            let target = 1;
            let circ = grover_preimage(n_bits, c, target, iters).unwrap();
            assert_eq!(circ.query_count(), 2 * iters);
            let s = run(&circ, &Backend::Concrete(&p)).unwrap();
            let rel = Relation::sponge(n_bits, c, target);
            let got = success_probability(&s, &Backend::Concrete(&p), &rel);
            let space = 1usize << (n_bits - c);
            let marked = (0..space).filter(|x| p.apply(x << c) >> c == target).count();
            let theta = (marked as f64 / space as f64).sqrt().asin();
            let expect = ((2 * iters + 1) as f64 * theta).sin().powi(2);
            assert!((got - expect).abs() < 1e-9, "{got} vs {expect}");
        }
    }

    #[test]
    fn attack_shape_errors() {
        assert!(grover_preimage(4, 4, 0, 1).is_err());
        assert!(zero_search_adversary(4, 0, 1).is_err());
    }
}
