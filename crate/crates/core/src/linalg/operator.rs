use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Dense matrices above this size are never formed.
pub const DENSE_CAP: usize = 4096;

/// Square matrix-free operator on `C^dim`.
pub trait LinearOperator: Sync {
    fn dim(&self) -> usize;
    fn apply(&self, v: &[C64]) -> Vec<C64>;
    fn apply_adjoint(&self, v: &[C64]) -> Vec<C64>;

    fn to_dense(&self) -> Result<DMatrix<C64>> {
        let d = self.dim();
        if d > DENSE_CAP {
            return Err(Error::SizeLimit {
                what: "dense operator",
                requested: d,
                limit: DENSE_CAP,
            });
        }
        let mut m = DMatrix::<C64>::zeros(d, d);
        let mut e = vec![C64::new(0.0, 0.0); d];
        for j in 0..d {
            e[j] = C64::new(1.0, 0.0);
            for (i, v) in self.apply(&e).into_iter().enumerate() {
                m[(i, j)] = v;
            }
            e[j] = C64::new(0.0, 0.0);
        }
        Ok(m)
    }
}

#[derive(Clone, Debug)]
pub struct DenseOperator {
    pub matrix: DMatrix<C64>,
}

impl DenseOperator {
    pub fn new(matrix: DMatrix<C64>) -> Self {
        assert_eq!(matrix.nrows(), matrix.ncols(), "operators are square");
        Self { matrix }
    }
}

impl LinearOperator for DenseOperator {
    fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    fn apply(&self, v: &[C64]) -> Vec<C64> {
        let d = self.dim();
        let mut out = vec![C64::new(0.0, 0.0); d];
        // Column-major storage: accumulate column by column.
        for (j, &vj) in v.iter().enumerate() {
            if vj == C64::new(0.0, 0.0) {
                continue;
            }
            let col = self.matrix.column(j);
            for (o, m) in out.iter_mut().zip(col.iter()) {
                *o += m * vj;
            }
        }
        out
    }

    fn apply_adjoint(&self, v: &[C64]) -> Vec<C64> {
        (0..self.dim())
            .map(|j| {
                self.matrix
                    .column(j)
                    .iter()
                    .zip(v)
                    .map(|(m, x)| m.conj() * x)
                    .sum()
            })
            .collect()
    }

    fn to_dense(&self) -> Result<DMatrix<C64>> {
        Ok(self.matrix.clone())
    }
}

/// Sends basis vector `i` to basis vector `map[i]`.
#[derive(Clone, Debug)]
pub struct BasisPermutation {
    pub map: Vec<usize>,
}

impl LinearOperator for BasisPermutation {
    fn dim(&self) -> usize {
        self.map.len()
    }

    fn apply(&self, v: &[C64]) -> Vec<C64> {
        let mut out = vec![C64::new(0.0, 0.0); v.len()];
        for (i, &j) in self.map.iter().enumerate() {
            out[j] = v[i];
        }
        out
    }

    fn apply_adjoint(&self, v: &[C64]) -> Vec<C64> {
        self.map.iter().map(|&j| v[j]).collect()
    }
}

#[derive(Clone, Debug)]
pub struct Diagonal {
    pub entries: Vec<C64>,
}

impl LinearOperator for Diagonal {
    fn dim(&self) -> usize {
        self.entries.len()
    }

    fn apply(&self, v: &[C64]) -> Vec<C64> {
        v.iter().zip(&self.entries).map(|(x, d)| x * d).collect()
    }

    fn apply_adjoint(&self, v: &[C64]) -> Vec<C64> {
        v.iter().zip(&self.entries).map(|(x, d)| x * d.conj()).collect()
    }
}

type Action = Box<dyn Fn(&[C64]) -> Vec<C64> + Sync + Send>;

/// Operator given by a pair of closures for itself and its adjoint.
pub struct FnOperator {
    dim: usize,
    forward: Action,
    adjoint: Action,
}

impl FnOperator {
    pub fn new(
        dim: usize,
        forward: impl Fn(&[C64]) -> Vec<C64> + Sync + Send + 'static,
        adjoint: impl Fn(&[C64]) -> Vec<C64> + Sync + Send + 'static,
    ) -> Self {
        Self {
            dim,
            forward: Box::new(forward),
            adjoint: Box::new(adjoint),
        }
    }

    /// Self-adjoint operator.
    pub fn hermitian(dim: usize, action: impl Fn(&[C64]) -> Vec<C64> + Sync + Send + Clone + 'static) -> Self {
        Self::new(dim, action.clone(), action)
    }
}

impl LinearOperator for FnOperator {
    fn dim(&self) -> usize {
        self.dim
    }

    fn apply(&self, v: &[C64]) -> Vec<C64> {
        (self.forward)(v)
    }

    fn apply_adjoint(&self, v: &[C64]) -> Vec<C64> {
        (self.adjoint)(v)
    }
}

/// `a b - b a`.
pub struct Commutator<'a> {
    pub a: &'a dyn LinearOperator,
    pub b: &'a dyn LinearOperator,
}

impl LinearOperator for Commutator<'_> {
    fn dim(&self) -> usize {
        self.a.dim()
    }

    fn apply(&self, v: &[C64]) -> Vec<C64> {
        let ab = self.a.apply(&self.b.apply(v));
        let ba = self.b.apply(&self.a.apply(v));
        ab.into_iter().zip(ba).map(|(x, y)| x - y).collect()
    }

    fn apply_adjoint(&self, v: &[C64]) -> Vec<C64> {
        // (ab - ba)^† = b^† a^† - a^† b^†
        let ba = self.b.apply_adjoint(&self.a.apply_adjoint(v));
        let ab = self.a.apply_adjoint(&self.b.apply_adjoint(v));
        ba.into_iter().zip(ab).map(|(x, y)| x - y).collect()
    }
}

/// `factors[0] · factors[1] · ...`; the last factor acts first.
pub struct Product<'a> {
    pub factors: Vec<&'a dyn LinearOperator>,
}

impl LinearOperator for Product<'_> {
    fn dim(&self) -> usize {
        self.factors[0].dim()
    }

    fn apply(&self, v: &[C64]) -> Vec<C64> {
        self.factors.iter().rev().fold(v.to_vec(), |acc, f| f.apply(&acc))
    }

    fn apply_adjoint(&self, v: &[C64]) -> Vec<C64> {
        self.factors.iter().fold(v.to_vec(), |acc, f| f.apply_adjoint(&acc))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
pub enum NormMethod {
    DenseSvd,
    PowerIteration,
}

#[derive(Clone, Copy, Debug)]
pub struct NormEstimate {
    pub value: f64,
    /// `|A v|` for the final unit iterate; equals `value` on the dense path.
    pub lower: f64,
    pub method: NormMethod,
    pub iterations: usize,
}

#[derive(Clone, Copy, Debug)]
pub struct NormConfig {
    pub dense_cap: usize,
    pub rel_tol: f64,
    pub max_iterations: usize,
    pub seed: u64,
}

impl Default for NormConfig {
    fn default() -> Self {
        Self {
            dense_cap: DENSE_CAP,
            rel_tol: 1e-8,
            max_iterations: 50_000,
            seed: 0x5eed,
        }
    }
}

/// Spectral norm: singular values when small, otherwise power iteration on `A^† A`.
pub fn operator_norm(op: &dyn LinearOperator, cfg: &NormConfig) -> Result<NormEstimate> {
    let d = op.dim();
    if d == 0 {
        return Ok(NormEstimate {
            value: 0.0,
            lower: 0.0,
            method: NormMethod::DenseSvd,
            iterations: 0,
        });
    }
    if d <= cfg.dense_cap.min(DENSE_CAP) {
        let m = op.to_dense()?;
        let s = m
            .singular_values()
            .iter()
            .fold(0.0f64, |acc, &x| acc.max(x));
        return Ok(NormEstimate {
            value: s,
            lower: s,
            method: NormMethod::DenseSvd,
            iterations: 0,
        });
    }
    power_iteration(op, cfg)
}

pub fn power_iteration(op: &dyn LinearOperator, cfg: &NormConfig) -> Result<NormEstimate> {
    let d = op.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut v: Vec<C64> = (0..d)
        .map(|_| C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
        .collect();
    normalize(&mut v);
    let mut prev = 0.0;
    let mut lower = 0.0;
    for it in 1..=cfg.max_iterations {
        let w = op.apply(&v);
        lower = super::layout::norm_sqr(&w).sqrt();
        if lower == 0.0 {
            return Ok(NormEstimate {
                value: 0.0,
                lower: 0.0,
                method: NormMethod::PowerIteration,
                iterations: it,
            });
        }
        let mut u = op.apply_adjoint(&w);
        // |A^† A v| / |A v| is a second, sharper estimate of the norm.
        let estimate = super::layout::norm_sqr(&u).sqrt() / lower;
        normalize(&mut u);
        v = u;
        if (estimate - prev).abs() <= cfg.rel_tol * estimate {
            let certified = super::layout::norm_sqr(&op.apply(&v)).sqrt();
            return Ok(NormEstimate {
                value: estimate.max(certified),
                lower: certified,
                method: NormMethod::PowerIteration,
                iterations: it,
            });
        }
        prev = estimate;
    }
    Err(Error::NotConverged {
        iterations: cfg.max_iterations,
        lower,
        estimate: prev,
    })
}

fn normalize(v: &mut [C64]) {
    let n = super::layout::norm_sqr(v).sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
}

/// Haar-random unitary from the QR decomposition of a complex Gaussian matrix.
pub fn haar_unitary<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> DMatrix<C64> {
    let g = DMatrix::<C64>::from_fn(dim, dim, |_, _| {
        C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)) / std::f64::consts::SQRT_2
    });
    let qr = g.qr();
    let (mut q, r) = qr.unpack();
    // Fix column phases so the distribution is Haar.
    for j in 0..dim {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { C64::new(1.0, 0.0) };
        for i in 0..dim {
            q[(i, j)] *= phase;
        }
    }
    q
}

/// Checks `|U v| = |v|` on random vectors.
pub fn probe_isometry(op: &dyn LinearOperator, trials: usize, seed: u64, tol: f64) -> bool {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..trials).all(|_| {
        let v: Vec<C64> = (0..op.dim())
            .map(|_| C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
            .collect();
        let before = super::layout::norm_sqr(&v);
        let after = super::layout::norm_sqr(&op.apply(&v));
        (before - after).abs() <= tol * before.max(1.0)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn dense_and_power_paths_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = DMatrix::<C64>::from_fn(12, 12, |_, _| C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)));
        let op = DenseOperator::new(m);
        let dense = operator_norm(&op, &NormConfig::default()).unwrap();
        let cfg = NormConfig {
            dense_cap: 0,
            rel_tol: 1e-12,
            ..NormConfig::default()
        };
        let power = operator_norm(&op, &cfg).unwrap();
        assert_eq!(power.method, NormMethod::PowerIteration);
        assert!((dense.value - power.value).abs() < 1e-6 * dense.value);
        assert!(power.lower <= dense.value * (1.0 + 1e-12));
    }

    #[test]
    fn diagonal_norm_is_largest_entry() {
        let op = Diagonal {
            entries: vec![c(0.5), c(-2.0), C64::new(0.0, 1.5)],
        };
        assert!((operator_norm(&op, &NormConfig::default()).unwrap().value - 2.0).abs() < 1e-12);
    }

    #[test]
    fn haar_unitary_is_unitary() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let u = haar_unitary(6, &mut rng);
        let id = u.adjoint() * &u;
        for i in 0..6 {
            for j in 0..6 {
                let target = if i == j { 1.0 } else { 0.0 };
                assert!((id[(i, j)] - c(target)).norm() < 1e-12);
            }
        }
        assert!(probe_isometry(&DenseOperator::new(u), 4, 1, 1e-12));
    }

    #[test]
    fn permutation_adjoint_inverts() {
        let op = BasisPermutation { map: vec![2, 0, 1] };
        let v = vec![c(1.0), c(2.0), c(3.0)];
        assert_eq!(op.apply_adjoint(&op.apply(&v)), v);
    }

    #[test]
    fn commutator_of_commuting_operators_vanishes() {
        let a = Diagonal { entries: vec![c(1.0), c(2.0)] };
        let b = Diagonal { entries: vec![c(3.0), c(-1.0)] };
        let comm = Commutator { a: &a, b: &b };
        assert!(operator_norm(&comm, &NormConfig::default()).unwrap().value < 1e-15);
    }
}
