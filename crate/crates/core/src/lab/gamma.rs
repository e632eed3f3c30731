//! The twirl-averaged sparsity operator `Γ` on the database register and the
//! growth of its expectation under queries.

use nalgebra::DMatrix;
use num_complex::Complex;

use crate::circuit::{run_traced, Backend, QueryCircuit};
use crate::error::{Error, Result};
use crate::linalg::{operator_norm, Commutator, LinearOperator, NormConfig, C64};
use crate::oracle::{twirl, Database, JointState};
use crate::perm::{Direction, Permutation};

use super::db::{plus_complement, slice_query, Combine};
use super::report::{timed, VerificationReport};
use super::sampling::{twirl_average, TwirlMode};

/// Largest `N` for the dense and the brute-force constructions.
pub const GAMMA_DENSE_LIMIT: usize = 6;

/// Largest `N` for the matrix-free closed form.
pub const GAMMA_LIMIT: usize = 8;

/// `Σ_{k=1}^n 1/k^order`.
pub fn harmonic(n: usize, order: i32) -> f64 {
    (1..=n).map(|k| (k as f64).powi(-order)).sum()
}

/// All cycles of length 2 or 3 on `n` points.
pub fn cycles(n: usize, len: usize) -> Result<Vec<Permutation>> {
    let from = |pairs: &[(usize, usize)]| {
        let mut img: Vec<usize> = (0..n).collect();
        for &(a, b) in pairs {
            img[a] = b;
        }
        Permutation::from_images(img)
    };
    match len {
        2 => (0..n)
            .flat_map(|a| (a + 1..n).map(move |b| (a, b)))
            .map(|(a, b)| Ok(Permutation::transposition(n, a, b)))
            .collect(),
        3 => {
            let mut out = Vec::new();
            for a in 0..n {
                for b in a + 1..n {
                    for c in b + 1..n {
                        out.push(from(&[(a, b), (b, c), (c, a)])?);
                        out.push(from(&[(a, c), (c, b), (b, a)])?);
                    }
                }
            }
            Ok(out)
        }
        _ => Err(Error::OutOfRange(format!("cycle length {len} is not 2 or 3"))),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Action {
    /// `φ(π) -> φ(π γ)`.
    Right,
    /// `φ(π) -> φ(γ π)`.
    Left,
}

/// Uniform average of the action of all `len`-cycles, on `C^block ⊗ D`.
///
/// The cycle class is closed under inversion, so the average is symmetric.
pub struct CycleAverage {
    maps: Vec<Vec<usize>>,
    block: usize,
}

impl CycleAverage {
    pub fn new(db: &Database, len: usize, action: Action, block: usize) -> Result<Self> {
        let n = db.n();
        if n < len {
            return Err(Error::OutOfRange(format!("no {len}-cycles on {n} points")));
        }
        let id = Permutation::identity(n);
        let maps = cycles(n, len)?
            .iter()
            .map(|g| match action {
                Action::Right => db.sandwich_map(&id, g),
                Action::Left => db.sandwich_map(g, &id),
            })
            .collect();
        Ok(Self { maps, block })
    }

    fn accumulate(&self, v: &[C64], scale: f64, out: &mut [C64]) {
        let b = self.block;
        let w = scale / self.maps.len() as f64;
        for map in &self.maps {
            for (d, &src) in map.iter().enumerate() {
                for j in 0..b {
                    out[d * b + j] += v[src * b + j] * w;
                }
            }
        }
    }
}

impl LinearOperator for CycleAverage {
    fn dim(&self) -> usize {
        self.maps[0].len() * self.block
    }

    fn apply(&self, v: &[C64]) -> Vec<C64> {
        let mut out = vec![C64::new(0.0, 0.0); v.len()];
        self.accumulate(v, 1.0, &mut out);
        out
    }

    fn apply_adjoint(&self, v: &[C64]) -> Vec<C64> {
        self.apply(v)
    }
}

/// Weights of `I`, `W2` and `W3` in `Γ = a I - b W2 - c W3`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GammaCoefficients {
    pub identity: f64,
    pub transpositions: f64,
    pub three_cycles: f64,
}

pub fn gamma_coefficients(n: usize) -> GammaCoefficients {
    let (h1, h2, h3) = (harmonic(n, 1), harmonic(n, 2), harmonic(n, 3));
    let n = n as f64;
    GammaCoefficients {
        identity: (h1 - h2) / n,
        transpositions: 2.0 * (h2 - h3) / n,
        three_cycles: (h1 - 3.0 * h2 + 2.0 * h3) / n,
    }
}

/// Matrix-free closed form of `Γ ⊗ I_block`.
pub struct Gamma {
    coefficients: GammaCoefficients,
    pairs: Option<CycleAverage>,
    triples: Option<CycleAverage>,
    dim: usize,
}

impl Gamma {
    pub fn new(db: &Database, block: usize) -> Result<Self> {
        let n = db.n();
        if n > GAMMA_LIMIT {
            return Err(Error::SizeLimit {
                what: "sparsity operator points",
                requested: n,
                limit: GAMMA_LIMIT,
            });
        }
        Ok(Self {
            coefficients: gamma_coefficients(n),
            pairs: (n >= 2).then(|| CycleAverage::new(db, 2, Action::Right, block)).transpose()?,
            triples: (n >= 3).then(|| CycleAverage::new(db, 3, Action::Right, block)).transpose()?,
            dim: db.size() * block,
        })
    }

    /// `<φ|Γ|φ>` for a joint state whose blocks match this operator's block size.
    pub fn expectation(&self, state: &JointState) -> Result<f64> {
        if state.amps.len() != self.dim {
            return Err(Error::Dimension(format!(
                "state of length {} against operator of dimension {}",
                state.amps.len(),
                self.dim
            )));
        }
        let g = self.apply(&state.amps);
        Ok(state.amps.iter().zip(&g).map(|(a, b)| (a.conj() * b).re).sum())
    }
}

impl LinearOperator for Gamma {
    fn dim(&self) -> usize {
        self.dim
    }

    fn apply(&self, v: &[C64]) -> Vec<C64> {
        let c = self.coefficients;
        let mut out: Vec<C64> = v.iter().map(|a| a * c.identity).collect();
        if let Some(w) = &self.pairs {
            w.accumulate(v, -c.transpositions, &mut out);
        }
        if let Some(w) = &self.triples {
            w.accumulate(v, -c.three_cycles, &mut out);
        }
        out
    }

    fn apply_adjoint(&self, v: &[C64]) -> Vec<C64> {
        self.apply(v)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GammaMethod {
    ClosedForm,
    BruteForce,
}

fn check_dense(n: usize) -> Result<()> {
    if n > GAMMA_DENSE_LIMIT {
        return Err(Error::SizeLimit {
            what: "dense sparsity operator points",
            requested: n,
            limit: GAMMA_DENSE_LIMIT,
        });
    }
    Ok(())
}

/// Dense real matrix of `Γ` on the database alone.
///
/// The brute-force route averages `(L^τ R^σ)^† (I - |+><+|_x) (L^τ R^σ) / x`
/// over every `x`, `σ`, `τ`, using that the conjugated projector has entries
/// `P[m(i), m(j)]` for the basis map `m` of the twirl.
pub fn gamma_matrix(n: usize, method: GammaMethod) -> Result<DMatrix<f64>> {
    check_dense(n)?;
    let db = Database::new(n)?;
    let size = db.size();
    let mut m = DMatrix::<f64>::zeros(size, size);
    match method {
        GammaMethod::ClosedForm => {
            let c = gamma_coefficients(n);
            let id = Permutation::identity(n);
            for i in 0..size {
                m[(i, i)] += c.identity;
            }
            for (len, weight) in [(2, c.transpositions), (3, c.three_cycles)] {
                if n < len {
                    continue;
                }
                let all = cycles(n, len)?;
                let w = weight / all.len() as f64;
                for g in &all {
                    for (i, j) in db.sandwich_map(&id, g).into_iter().enumerate() {
                        m[(i, j)] -= w;
                    }
                }
            }
        }
        GammaMethod::BruteForce => {
            let perms: Vec<Permutation> = crate::perm::permutations(n).collect();
            let pair_weight = 1.0 / (size * size) as f64;
            let diag: f64 = (1..=n).map(|x| 1.0 / x as f64).sum::<f64>() / n as f64;
            for i in 0..size {
                m[(i, i)] = diag;
            }
            for sigma in &perms {
                for tau in &perms {
                    let map = db.twirl_map(sigma, tau);
                    let mut inv = vec![0; size];
                    for (i, &j) in map.iter().enumerate() {
                        inv[j] = i;
                    }
                    for e in 0..n {
                        let width = e + 1;
                        let stride = db.stride(e);
                        let w = pair_weight / (n * width * width) as f64;
                        for (i, &a) in map.iter().enumerate() {
                            let base = a - db.digit(a, e) * stride;
                            for t in 0..width {
                                m[(i, inv[base + t * stride])] -= w;
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(m)
}

/// Character of the `Y` shift group at frequency `k`.
fn character(combine: Combine, n: usize, k: usize, v: usize) -> C64 {
    match combine {
        Combine::Xor => C64::new(if (k & v).count_ones() % 2 == 0 { 1.0 } else { -1.0 }, 0.0),
        Combine::ModAdd => Complex::from_polar(1.0, 2.0 * std::f64::consts::PI * (k * v) as f64 / n as f64),
    }
}

/// `‖[Γ, Q^z]‖` on the `Y D` slice via the Fourier transform of `Y`.
///
/// The shift by `f(π)` is diagonal in the character basis, so the slice splits
/// into `N` blocks `[Γ, D_k]` with `D_k = diag χ_k(f(π))`; as `D_k` is unitary
/// the block norm equals that of the Hermitian `D_k^† Γ D_k - Γ`.
pub fn commutator_norm_fourier(
    gamma: &DMatrix<f64>,
    db: &Database,
    z: usize,
    direction: Direction,
    combine: Combine,
) -> f64 {
    let n = db.n();
    let size = db.size();
    let f: Vec<usize> = (0..size).map(|d| db.lookup(d, z, direction)).collect();
    // Frequencies `k` and `N - k` give complex-conjugate blocks under addition mod `N`.
    let top = match combine {
        Combine::Xor => n - 1,
        Combine::ModAdd => n / 2,
    };
    (1..=top)
        .map(|k| {
            let chi: Vec<C64> = f.iter().map(|&v| character(combine, n, k, v)).collect();
            let h = DMatrix::<C64>::from_fn(size, size, |i, j| {
                C64::new(gamma[(i, j)], 0.0) * (chi[i].conj() * chi[j] - 1.0)
            });
            h.symmetric_eigenvalues().iter().fold(0.0f64, |a, v| a.max(v.abs()))
        })
        .fold(0.0, f64::max)
}

/// `‖[Γ ⊗ I_Y, Q^z]‖` on the `Y D` slice without any decomposition.
pub fn commutator_norm_direct(db: &Database, z: usize, direction: Direction, combine: Combine) -> Result<f64> {
    let n = db.n();
    let gamma = Gamma::new(db, n)?;
    let q = slice_query(db, z, direction, combine);
    let comm = Commutator { a: &gamma, b: &q };
    Ok(operator_norm(&comm, &NormConfig::default())?.value)
}

/// `6 (ln N + 1) / N²`.
pub fn commutator_bound(n: usize) -> f64 {
    let n = n as f64;
    6.0 * (n.ln() + 1.0) / (n * n)
}

fn direction_name(direction: Direction) -> &'static str {
    match direction {
        Direction::Forward => "forward",
        Direction::Inverse => "inverse",
    }
}

/// Largest commutator norm over `z` for each query direction.
pub fn max_commutator_norms(n: usize) -> Result<[(Direction, f64); 2]> {
    check_dense(n)?;
    let db = Database::new(n)?;
    let gamma = gamma_matrix(n, GammaMethod::ClosedForm)?;
    let combine = Combine::for_points(n);
    let worst = |direction| {
        (0..n)
            .map(|z| commutator_norm_fourier(&gamma, &db, z, direction, combine))
            .fold(0.0, f64::max)
    };
    Ok([Direction::Forward, Direction::Inverse].map(|d| (d, worst(d))))
}

/// Structure of `Γ`: closed form against the defining average, positivity,
/// norm bound, and left/right agreement of the cycle averages.
pub fn gamma_checks(n: usize, tol: f64) -> Result<Vec<VerificationReport>> {
    let (closed, ms) = timed(|| gamma_matrix(n, GammaMethod::ClosedForm));
    let closed = closed?;
    let mut out = Vec::new();
    if n <= 5 {
        let (brute, ms_brute) = timed(|| gamma_matrix(n, GammaMethod::BruteForce));
        let gap = (&closed - brute?).abs().max();
        out.push(VerificationReport::equality("closed form equals twirl average", gap, 0.0, tol).with_runtime(ms + ms_brute));
    }
    let eig = closed.clone().symmetric_eigenvalues();
    let (lo, hi) = eig.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
    out.push(VerificationReport::exact("positive semidefinite", -lo, 0.0, tol));
    let nf = n as f64;
    out.push(VerificationReport::exact("norm bound", hi.max(-lo), (nf.ln() + 1.0) / nf, tol));
    let db = Database::new(n)?;
    for len in [2, 3].into_iter().filter(|&l| l <= n) {
        let right = CycleAverage::new(&db, len, Action::Right, 1)?.to_dense()?;
        let left = CycleAverage::new(&db, len, Action::Left, 1)?.to_dense()?;
        let gap = (right - left).iter().fold(0.0f64, |a, v| a.max(v.norm()));
        out.push(VerificationReport::equality(format!("left and right {len}-cycle averages agree"), gap, 0.0, tol));
    }
    if n == 2 {
        let mut spec: Vec<f64> = eig.iter().copied().collect();
        spec.sort_by(f64::total_cmp);
        out.push(VerificationReport::equality("smallest eigenvalue", spec[0], 0.0, tol));
        out.push(VerificationReport::equality("largest eigenvalue", spec[1], 0.25, tol));
    }
    Ok(out)
}

/// Commutator bound for both query directions, with a direct-norm cross-check
/// at `z = 0` and the exact commutation with cycles fixing the query point.
pub fn commutator_growth_check(n: usize, tol: f64) -> Result<Vec<VerificationReport>> {
    let (norms, ms) = timed(|| max_commutator_norms(n));
    let mut out: Vec<VerificationReport> = norms?
        .iter()
        .map(|&(d, v)| {
            VerificationReport::exact(format!("commutator {}", direction_name(d)), v, commutator_bound(n), tol).with_runtime(ms)
        })
        .collect();
    let db = Database::new(n)?;
    let combine = Combine::for_points(n);
    let gamma = gamma_matrix(n, GammaMethod::ClosedForm)?;
    for direction in [Direction::Forward, Direction::Inverse] {
        let (direct, ms) = timed(|| commutator_norm_direct(&db, 0, direction, combine));
        let fourier = commutator_norm_fourier(&gamma, &db, 0, direction, combine);
        out.push(
            VerificationReport::equality(
                format!("fourier blocks match direct norm {}", direction_name(direction)),
                fourier,
                direct?,
                1e-6,
            )
            .with_runtime(ms),
        );
    }
    if n >= 3 {
        // A transposition away from the query point commutes with it exactly.
        let fixes = CycleAverage {
            maps: vec![db.sandwich_map(&Permutation::identity(n), &Permutation::transposition(n, 1, 2))],
            block: n,
        };
        let q = slice_query(&db, 0, Direction::Forward, combine);
        let comm = Commutator { a: &fixes, b: &q };
        let v: Vec<C64> = (0..comm.dim()).map(|i| C64::new((i % 7) as f64, (i % 3) as f64)).collect();
        let residual = crate::linalg::norm_sqr(&comm.apply(&v)).sqrt();
        out.push(VerificationReport::equality("fixed-point cycle commutes with query", residual, 0.0, 0.0));
    }
    Ok(out)
}

/// `<φ^{(m)}|Γ|φ^{(m)}>` along an untwirled run, after `m` queries, with the
/// per-query increments and (when exhaustive) the twirl identity that
/// defines `Γ`.
pub fn sparsity_trajectory_check(circuit: &QueryCircuit, mode: TwirlMode, tol: f64) -> Result<Vec<VerificationReport>> {
    let n = circuit.n;
    check_dense(n)?;
    let db = Database::new(n)?;
    let trace = run_traced(circuit, &Backend::Spo(&db))?;
    let mut states: Vec<(Option<Direction>, &JointState)> = trace.pre_query.iter().map(|(d, s)| (Some(*d), s)).collect();
    states.push((None, &trace.final_state));
    let gamma = Gamma::new(&db, trace.final_state.block_len())?;
    let growth = max_commutator_norms(n)?;
    let growth_for = |d: Direction| growth.iter().find(|(g, _)| *g == d).map(|(_, v)| *v).unwrap_or(0.0);
    let mut out = Vec::new();
    let mut prev: Option<(Direction, f64)> = None;
    for (m, (next, state)) in states.iter().enumerate() {
        let g = gamma.expectation(state)?;
        let bound = m as f64 * commutator_bound(n);
        out.push(if m == 0 {
            VerificationReport::equality("sparsity m=0", g, 0.0, tol)
        } else {
            VerificationReport::exact(format!("sparsity m={m}"), g, bound, tol)
        });
        if let Some((d, before)) = prev {
            out.push(VerificationReport::exact(format!("sparsity increment m={m}"), g - before, growth_for(d), tol));
        }
        if mode.is_exact() && m > 0 {
            let twirled = twirl_average(n, mode, |s, t| {
                let psi = twirl(state, &db, s, t);
                (0..n)
                    .map(|e| plus_complement(&psi, &db, e).norm_sqr() / (e + 1) as f64)
                    .sum::<f64>()
                    / n as f64
            })?;
            out.push(VerificationReport::equality(format!("twirl identity m={m}"), twirled.mean, g, tol));
        }
        prev = next.map(|d| (d, g));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{classical_probe, random_circuit};

    #[test]
    fn harmonic_values() {
        assert_eq!(harmonic(1, 1), 1.0);
        assert!((harmonic(4, 1) - 25.0 / 12.0).abs() < 1e-15);
        let mut prev = f64::INFINITY;
        for n in 1..=10_000 {
            let gap = harmonic(n, 1) - (n as f64).ln();
            assert!(gap < prev && gap <= 1.0);
            prev = gap;
        }
    }

    #[test]
    fn cycle_counts() {
        assert_eq!(cycles(5, 2).unwrap().len(), 10);
        assert_eq!(cycles(5, 3).unwrap().len(), 20);
        assert!(cycles(4, 3).unwrap().iter().all(|c| c.cycle_count() == 2));
    }

    #[test]
    fn two_point_gamma() {
        let m = gamma_matrix(2, GammaMethod::BruteForce).unwrap();
        let c = gamma_matrix(2, GammaMethod::ClosedForm).unwrap();
        assert!((&m - &c).abs().max() < 1e-15);
        assert!((m[(0, 0)] - 0.125).abs() < 1e-15 && (m[(0, 1)] + 0.125).abs() < 1e-15);
        let w = CycleAverage::new(&Database::new(2).unwrap(), 2, Action::Right, 1).unwrap().to_dense().unwrap();
        assert_eq!(w[(0, 1)], C64::new(1.0, 0.0));
        assert!(gamma_checks(2, 1e-12).unwrap().iter().all(|r| r.pass));
    }

    #[test]
    fn one_point_gamma_is_zero() {
        assert_eq!(gamma_matrix(1, GammaMethod::ClosedForm).unwrap()[(0, 0)], 0.0);
        assert_eq!(gamma_matrix(1, GammaMethod::BruteForce).unwrap()[(0, 0)], 0.0);
    }

    #[test]
    fn closed_form_matches_average() {
        for n in 3..=4 {
            let r = gamma_checks(n, 1e-10).unwrap();
            assert!(r.iter().all(|c| c.pass), "{r:#?}");
        }
    }

    #[test]
    fn matrix_free_matches_dense() {
        let db = Database::new(4).unwrap();
        let dense = gamma_matrix(4, GammaMethod::ClosedForm).unwrap();
        let op = Gamma::new(&db, 1).unwrap().to_dense().unwrap();
        assert!(op.iter().zip(dense.iter()).all(|(a, b)| (a.re - b).abs() < 1e-14 && a.im == 0.0));
    }

    #[test]
    fn commutators_small() {
        for n in 2..=4 {
            let r = commutator_growth_check(n, 1e-10).unwrap();
            assert!(r.iter().all(|c| c.pass), "{r:#?}");
        }
    }

    #[test]
    fn sparsity_along_runs() {
        for c in [random_circuit(2, 3, 1, 4).unwrap(), classical_probe(4, 3, Direction::Inverse).unwrap()] {
            let r = sparsity_trajectory_check(&c, TwirlMode::Exhaustive, 1e-10).unwrap();
            assert!(r.iter().all(|c| c.pass), "{r:#?}");
        }
    }
}
