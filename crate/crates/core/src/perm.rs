//! Permutations and the monotone transposition factorization.
//!
//! Every permutation of `n` points factors uniquely as
//! `<n-1 t[n-1]> ... <1 t[1]> <0 t[0]>` (rightmost applied first) with
//! `t[k] <= k`. The tuple `t` doubles as a mixed-radix index in
//! `0..n!` with `t[1]` least significant, which is how the database
//! registers of the simulator are laid out.
//!
//! Points are 0-based throughout the library. Text input and output use
//! 1-based one-line notation.

use std::fmt;

use num_rational::Ratio;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Largest `n` for which whole-group enumeration is offered.
pub const ENUMERATION_LIMIT: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize)]
pub enum Direction {
    Forward,
    Inverse,
}

#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Permutation {
    images: Vec<usize>,
}

impl Permutation {
    pub fn identity(n: usize) -> Self {
        Self {
            images: (0..n).collect(),
        }
    }

    pub fn from_images(images: Vec<usize>) -> Result<Self> {
        let n = images.len();
        let mut seen = vec![false; n];
        for &v in &images {
            if v >= n || seen[v] {
                return Err(Error::InvalidPermutation {
                    n,
                    detail: format!("{:?}", images.iter().map(|v| v + 1).collect::<Vec<_>>()),
                });
            }
            seen[v] = true;
        }
        Ok(Self { images })
    }

    /// Parses 1-based one-line notation.
    pub fn from_one_line(one_based: &[usize]) -> Result<Self> {
        let n = one_based.len();
        let images = one_based
            .iter()
            .map(|&v| {
                v.checked_sub(1).ok_or_else(|| Error::InvalidPermutation {
                    n,
                    detail: format!("{one_based:?}"),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_images(images).map_err(|_| Error::InvalidPermutation {
            n,
            detail: format!("{one_based:?}"),
        })
    }

    pub fn transposition(n: usize, a: usize, b: usize) -> Self {
        let mut images: Vec<usize> = (0..n).collect();
        images.swap(a, b);
        Self { images }
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    #[inline]
    pub fn apply(&self, x: usize) -> usize {
        self.images[x]
    }

    pub fn images(&self) -> &[usize] {
        &self.images
    }

    pub fn one_line(&self) -> Vec<usize> {
        self.images.iter().map(|v| v + 1).collect()
    }

    pub fn inverse(&self) -> Self {
        let mut inv = vec![0; self.len()];
        for (x, &y) in self.images.iter().enumerate() {
            inv[y] = x;
        }
        Self { images: inv }
    }

    /// `self ∘ other`: apply `other` first.
    pub fn compose(&self, other: &Self) -> Self {
        debug_assert_eq!(self.len(), other.len());
        Self {
            images: other.images.iter().map(|&v| self.images[v]).collect(),
        }
    }

    pub fn cycle_count(&self) -> usize {
        let mut seen = vec![false; self.len()];
        let mut cycles = 0;
        for start in 0..self.len() {
            if seen[start] {
                continue;
            }
            cycles += 1;
            let mut cur = start;
            while !seen[cur] {
                seen[cur] = true;
                cur = self.images[cur];
            }
        }
        cycles
    }

    pub fn factorize(&self) -> Factorization {
        Factorization {
            targets: factor_targets(&self.images),
        }
    }

    /// Position of this permutation in the mixed-radix database order.
    pub fn index(&self) -> usize {
        index_of_images(&self.images)
    }
}

impl fmt::Debug for Permutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Permutation{:?}", self.one_line())
    }
}

impl fmt::Display for Permutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.one_line().iter().map(|v| v.to_string()).collect();
        f.write_str(&parts.join(" "))
    }
}

/// Peels off the largest factor repeatedly; `O(n)` using an inverse table.
fn factor_targets(images: &[usize]) -> Vec<usize> {
    let n = images.len();
    let mut p = images.to_vec();
    let mut inv = vec![0; n];
    for (x, &y) in p.iter().enumerate() {
        inv[y] = x;
    }
    let mut t = vec![0; n];
    for k in (0..n).rev() {
        let tk = p[k];
        t[k] = tk;
        // p <- <k tk> ∘ p: the point mapping to k now maps to tk.
        let j = inv[k];
        p[j] = tk;
        inv[tk] = j;
        p[k] = k;
        inv[k] = k;
    }
    t
}

pub(crate) fn index_of_images(images: &[usize]) -> usize {
    let t = factor_targets(images);
    let mut idx = 0;
    for k in (1..t.len()).rev() {
        idx = idx * (k + 1) + t[k];
    }
    idx
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    /// Factors with position greater than `k`.
    Above,
    /// Factors with position less than `k`.
    Below,
}

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Factorization {
    targets: Vec<usize>,
}

impl Factorization {
    pub fn new(targets: Vec<usize>) -> Result<Self> {
        for (k, &t) in targets.iter().enumerate() {
            if t > k {
                return Err(Error::InvalidFactor {
                    position: k + 1,
                    value: t + 1,
                });
            }
        }
        Ok(Self { targets })
    }

    pub fn from_one_based(targets: &[usize]) -> Result<Self> {
        let zero = targets
            .iter()
            .enumerate()
            .map(|(k, &t)| {
                t.checked_sub(1).ok_or(Error::InvalidFactor {
                    position: k + 1,
                    value: t,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(zero)
    }

    pub fn from_index(n: usize, mut index: usize) -> Self {
        let mut targets = vec![0; n];
        for (k, t) in targets.iter_mut().enumerate().skip(1) {
            *t = index % (k + 1);
            index /= k + 1;
        }
        Self { targets }
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn targets(&self) -> &[usize] {
        &self.targets
    }

    #[inline]
    pub fn target(&self, k: usize) -> usize {
        self.targets[k]
    }

    pub fn one_based(&self) -> Vec<usize> {
        self.targets.iter().map(|t| t + 1).collect()
    }

    pub fn index(&self) -> usize {
        let mut idx = 0;
        for k in (1..self.len()).rev() {
            idx = idx * (k + 1) + self.targets[k];
        }
        idx
    }

    /// Multiplies out the factors whose positions lie in `range`.
    fn product_over(&self, range: std::ops::Range<usize>) -> Permutation {
        let mut images: Vec<usize> = (0..self.len()).collect();
        // Right-multiplying by <k t> swaps array positions k and t.
        for k in range.rev() {
            images.swap(k, self.targets[k]);
        }
        Permutation { images }
    }

    pub fn compose(&self) -> Permutation {
        self.product_over(0..self.len())
    }

    pub fn partial_product(&self, k: usize, side: Side) -> Permutation {
        match side {
            Side::Above => self.product_over(k + 1..self.len()),
            Side::Below => self.product_over(0..k),
        }
    }

    /// The permutation with factor `k` replaced by the identity.
    pub fn without(&self, k: usize) -> Permutation {
        let mut t = self.targets.clone();
        t[k] = k;
        Factorization { targets: t }.compose()
    }

    pub fn cayley_distance(&self) -> usize {
        self.targets.iter().enumerate().filter(|&(k, &t)| t != k).count()
    }

    /// Non-identity factors as `(k, t_k)`, largest position first.
    pub fn nontrivial(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.targets
            .iter()
            .enumerate()
            .rev()
            .filter(|&(k, &t)| t != k)
            .map(|(k, &t)| (k, t))
    }

    #[inline]
    fn swap_at(&self, k: usize, v: usize) -> usize {
        let t = self.targets[k];
        if v == k {
            t
        } else if v == t {
            k
        } else {
            v
        }
    }
}

impl fmt::Debug for Factorization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Factorization{:?}", self.one_based())
    }
}

pub fn factorial(n: usize) -> usize {
    (1..=n).product()
}

/// All permutations of `n` points in database index order.
pub fn permutations(n: usize) -> impl Iterator<Item = Permutation> {
    (0..factorial(n)).map(move |i| Factorization::from_index(n, i).compose())
}

/// Uniform sample: each factor target is drawn independently.
pub fn sample_uniform<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Permutation {
    let targets = (0..n).map(|k| rng.gen_range(0..=k)).collect();
    Factorization { targets }.compose()
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ActiveSet {
    pub direction: Direction,
    /// Factor positions in increasing order.
    pub members: Vec<usize>,
}

/// `k` is active for `x` when the partial product below `k` sends `x` into
/// `{k, t_k}`, i.e. when factor `k` actually moves the running point.
pub fn active_set(f: &Factorization, x: usize) -> ActiveSet {
    let mut members = Vec::new();
    let mut cur = x;
    for k in 0..f.len() {
        if cur == k || cur == f.target(k) {
            members.push(k);
        }
        cur = f.swap_at(k, cur);
    }
    ActiveSet {
        direction: Direction::Forward,
        members,
    }
}

/// `k` is inverse-active for `y` when the inverse of the product above `k`
/// sends `y` into `{k, t_k}`.
pub fn inverse_active_set(f: &Factorization, y: usize) -> ActiveSet {
    let mut members = Vec::new();
    let mut cur = y;
    for k in (0..f.len()).rev() {
        if cur == k || cur == f.target(k) {
            members.push(k);
        }
        cur = f.swap_at(k, cur);
    }
    members.reverse();
    ActiveSet {
        direction: Direction::Inverse,
        members,
    }
}

/// Evaluates the permutation (or its inverse) using only the active factors.
pub fn apply_via_active(f: &Factorization, arg: usize, direction: Direction) -> usize {
    match direction {
        Direction::Forward => active_set(f, arg)
            .members
            .iter()
            .fold(arg, |v, &k| f.swap_at(k, v)),
        Direction::Inverse => inverse_active_set(f, arg)
            .members
            .iter()
            .rev()
            .fold(arg, |v, &k| f.swap_at(k, v)),
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ExpectationMethod {
    Exact,
    Recurrence,
    MonteCarlo { samples: usize, seed: u64 },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: Option<f64>,
}

/// Expected active-set size for a uniform permutation of `n` points.
pub fn expected_active_size(
    n: usize,
    arg: usize,
    direction: Direction,
    method: ExpectationMethod,
) -> Result<Estimate> {
    if arg >= n {
        return Err(Error::OutOfRange(format!("point {} not in 1..={n}", arg + 1)));
    }
    let size = |f: &Factorization| match direction {
        Direction::Forward => active_set(f, arg).members.len(),
        Direction::Inverse => inverse_active_set(f, arg).members.len(),
    };
    match method {
        ExpectationMethod::Exact => {
            if n > ENUMERATION_LIMIT {
                return Err(Error::SizeLimit {
                    what: "exact enumeration",
                    requested: n,
                    limit: ENUMERATION_LIMIT,
                });
            }
            let total: usize = (0..factorial(n))
                .map(|i| size(&Factorization::from_index(n, i)))
                .sum();
            Ok(Estimate {
                mean: total as f64 / factorial(n) as f64,
                stderr: None,
            })
        }
        ExpectationMethod::Recurrence => match direction {
            Direction::Forward => Err(Error::UnsupportedMethod(
                "recurrence is only defined for inverse active sets".into(),
            )),
            Direction::Inverse => Ok(Estimate {
                mean: 1.0 + inverse_recurrence(arg)[arg] / n as f64,
                stderr: None,
            }),
        },
        ExpectationMethod::MonteCarlo { samples, seed } => {
            if samples < 2 {
                return Err(Error::OutOfRange("need at least two samples".into()));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut sum = 0.0;
            let mut sum_sq = 0.0;
            for _ in 0..samples {
                let f = sample_uniform(n, &mut rng).factorize();
                let s = size(&f) as f64;
                sum += s;
                sum_sq += s * s;
            }
            let m = samples as f64;
            let mean = sum / m;
            let var = (sum_sq - m * mean * mean) / (m - 1.0);
            Ok(Estimate {
                mean,
                stderr: Some((var.max(0.0) / m).sqrt()),
            })
        }
    }
}

/// `g(0..=m)` with `g(0) = 0` and `g(j) = j + mean(g(0..j))`.
pub fn inverse_recurrence(m: usize) -> Vec<f64> {
    let mut g = vec![0.0; m + 1];
    let mut prefix = 0.0;
    for j in 1..=m {
        g[j] = j as f64 + prefix / j as f64;
        prefix += g[j];
    }
    g
}

/// Exact rational version of [`inverse_recurrence`].
pub fn inverse_recurrence_exact(m: usize) -> Vec<Ratio<i128>> {
    let mut g = vec![Ratio::from_integer(0); m + 1];
    let mut prefix = Ratio::from_integer(0);
    for j in 1..=m {
        g[j] = Ratio::from_integer(j as i128) + prefix / Ratio::from_integer(j as i128);
        prefix += g[j];
    }
    g
}

/// Closed form `1 + H_n - H_{x+1}` of the forward expectation.
pub fn forward_expectation(n: usize, x: usize) -> f64 {
    1.0 + harmonic_partial(x + 2, n)
}

/// `1 + ln(n / (x+1))`, the forward logarithmic bound.
pub fn forward_log_bound(n: usize, x: usize) -> f64 {
    1.0 + (n as f64 / (x + 1) as f64).ln()
}

/// `1 + 2y/n` for 0-based `y`; always below 3.
pub fn inverse_linear_bound(n: usize, y: usize) -> f64 {
    1.0 + 2.0 * y as f64 / n as f64
}

fn harmonic_partial(from: usize, to: usize) -> f64 {
    (from..=to).map(|k| 1.0 / k as f64).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::collections::HashSet;

    fn one_line(v: &[usize]) -> Permutation {
        Permutation::from_one_line(v).unwrap()
    }

    // Brute-force oracle: multiply explicit transposition matrices.
    fn compose_naive(t: &[usize]) -> Permutation {
        let n = t.len();
        let mut acc = Permutation::identity(n);
        for (k, &tk) in t.iter().enumerate() {
            acc = Permutation::transposition(n, k, tk).compose(&acc);
        }
        acc
    }

    #[test]
    fn factorization_examples() {
        assert_eq!(one_line(&[2, 3, 1]).factorize().one_based(), vec![1, 1, 1]);
        assert_eq!(one_line(&[1, 3, 2]).factorize().one_based(), vec![1, 2, 2]);
        assert_eq!(Permutation::identity(1).factorize().one_based(), vec![1]);
        assert!(Permutation::from_one_line(&[2, 1, 1]).is_err());
        assert!(Factorization::from_one_based(&[1, 3, 1]).is_err());
    }

    #[test]
    fn factor_tuple_multiplies_back() {
        for n in 1..=6 {
            for i in 0..factorial(n) {
                let f = Factorization::from_index(n, i);
                assert_eq!(f.compose(), compose_naive(f.targets()));
                assert_eq!(f.index(), i);
                assert_eq!(f.compose().index(), i);
            }
        }
    }

    #[test]
    fn partial_products_split_the_product() {
        let f = one_line(&[4, 1, 5, 2, 3]).factorize();
        for k in 0..5 {
            let above = f.partial_product(k, Side::Above);
            let below = f.partial_product(k, Side::Below);
            let mid = Permutation::transposition(5, k, f.target(k));
            assert_eq!(above.compose(&mid).compose(&below), f.compose());
        }
    }

    #[test]
    fn inverse_reverses_factor_order() {
        let f = one_line(&[3, 1, 4, 2]).factorize();
        let mut inv = Permutation::identity(4);
        for (k, &t) in f.targets().iter().enumerate().rev() {
            inv = Permutation::transposition(4, k, t).compose(&inv);
        }
        assert_eq!(inv, f.compose().inverse());
    }

    #[test]
    fn active_set_example() {
        let f = one_line(&[1, 3, 2]).factorize();
        assert_eq!(active_set(&f, 1).members, vec![1, 2]);
    }

    #[test]
    fn forward_expectation_small_case() {
        let e = expected_active_size(2, 0, Direction::Forward, ExpectationMethod::Exact).unwrap();
        assert!((e.mean - 1.5).abs() < 1e-15);
        assert!(matches!(
            expected_active_size(9, 0, Direction::Forward, ExpectationMethod::Exact),
            Err(Error::SizeLimit { .. })
        ));
        assert!(matches!(
            expected_active_size(4, 0, Direction::Forward, ExpectationMethod::Recurrence),
            Err(Error::UnsupportedMethod(_))
        ));
    }

    #[test]
    fn recurrence_matches_rational() {
        let exact = inverse_recurrence_exact(12);
        let float = inverse_recurrence(12);
        for (e, f) in exact.iter().zip(&float) {
            let q = *e.numer() as f64 / *e.denom() as f64;
            assert!((q - f).abs() <= 1e-12 * q.max(1.0));
        }
    }

    #[test]
    fn monte_carlo_brackets_exact() {
        let exact = expected_active_size(7, 2, Direction::Inverse, ExpectationMethod::Exact).unwrap();
        let mc = expected_active_size(
            7,
            2,
            Direction::Inverse,
            ExpectationMethod::MonteCarlo { samples: 20_000, seed: 7 },
        )
        .unwrap();
        assert!((mc.mean - exact.mean).abs() <= 4.0 * mc.stderr.unwrap());
    }

    #[test]
    fn display_round_trip() {
        let p = one_line(&[2, 3, 1]);
        assert_eq!(p.to_string(), "2 3 1");
    }

    proptest! {
        #[test]
        fn factorize_then_compose_is_identity(seed in any::<u64>(), n in 1usize..12) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let p = sample_uniform(n, &mut rng);
            let f = p.factorize();
            prop_assert_eq!(f.compose(), p.clone());
            prop_assert_eq!(f.cayley_distance(), n - p.cycle_count());
        }

        #[test]
        fn active_evaluation_agrees(seed in any::<u64>(), n in 1usize..10) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let p = sample_uniform(n, &mut rng);
            let f = p.factorize();
            let inv = p.inverse();
            for x in 0..n {
                prop_assert_eq!(apply_via_active(&f, x, Direction::Forward), p.apply(x));
                prop_assert_eq!(apply_via_active(&f, x, Direction::Inverse), inv.apply(x));
                let set: HashSet<_> = active_set(&f, x).members.into_iter().collect();
                prop_assert!(set.contains(&x));
            }
        }
    }
}
