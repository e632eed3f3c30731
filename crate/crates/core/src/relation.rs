//! Binary relations on `[N] × [N]` stored as a bitset.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::perm::Permutation;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Relation {
    n: usize,
    words: Vec<u64>,
}

impl Relation {
    pub fn empty(n: usize) -> Self {
        Self {
            n,
            words: vec![0; (n * n).div_ceil(64)],
        }
    }

    pub fn full(n: usize) -> Self {
        Self::from_predicate(n, |_, _| true)
    }

    pub fn from_predicate(n: usize, mut pred: impl FnMut(usize, usize) -> bool) -> Self {
        let mut r = Self::empty(n);
        for x in 0..n {
            for y in 0..n {
                if pred(x, y) {
                    r.insert(x, y);
                }
            }
        }
        r
    }

    pub fn from_pairs(n: usize, pairs: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let mut r = Self::empty(n);
        for (x, y) in pairs {
            r.insert(x, y);
        }
        r
    }

    /// The graph `{(x, p(x))}`.
    pub fn graph(p: &Permutation) -> Self {
        Self::from_pairs(p.len(), (0..p.len()).map(|x| (x, p.apply(x))))
    }

    /// Each pair present independently with probability `density`.
    pub fn random(n: usize, density: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self::from_predicate(n, |_, _| rng.gen_bool(density))
    }

    /// Preimages of a sponge output: inputs end in `c` zero bits, outputs
    /// start with the `(n - c)`-bit `target`.
    pub fn sponge(n_bits: usize, c: usize, target: usize) -> Self {
        let n = 1usize << n_bits;
        let low = (1usize << c) - 1;
        Self::from_predicate(n, |x, y| x & low == 0 && y >> c == target)
    }

    /// Inputs and outputs both end in `c` zero bits.
    pub fn zero_search(n_bits: usize, c: usize) -> Self {
        let n = 1usize << n_bits;
        let low = (1usize << c) - 1;
        Self::from_predicate(n, |x, y| x & low == 0 && y & low == 0)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn insert(&mut self, x: usize, y: usize) {
        let i = x * self.n + y;
        self.words[i / 64] |= 1 << (i % 64);
    }

    #[inline]
    pub fn contains(&self, x: usize, y: usize) -> bool {
        let i = x * self.n + y;
        self.words[i / 64] >> (i % 64) & 1 == 1
    }

    /// `R_x`.
    pub fn row(&self, x: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.n).filter(move |&y| self.contains(x, y))
    }

    /// `R^inv_y`.
    pub fn column(&self, y: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.n).filter(move |&x| self.contains(x, y))
    }

    pub fn row_len(&self, x: usize) -> usize {
        self.row(x).count()
    }

    pub fn len(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Largest row or column.
    pub fn r_max(&self) -> usize {
        (0..self.n)
            .map(|i| self.row(i).count().max(self.column(i).count()))
            .max()
            .unwrap_or(0)
    }

    /// `(x, y) ∈ R^{σ,τ}` iff `(σ^{-1} x, τ^{-1} y) ∈ R`.
    pub fn twirl(&self, sigma: &Permutation, tau: &Permutation) -> Self {
        let mut out = Self::empty(self.n);
        for x in 0..self.n {
            for y in self.row(x) {
                out.insert(sigma.apply(x), tau.apply(y));
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sponge_row_sizes() {
        let r = Relation::sponge(4, 2, 1);
        assert_eq!(r.row_len(0), 4);
        assert_eq!(r.row_len(1), 0);
        assert_eq!(r.r_max(), 4);
        assert_eq!(Relation::sponge(4, 1, 0).r_max(), 8);
    }

    #[test]
    fn zero_search_rmax() {
        assert_eq!(Relation::zero_search(4, 1).r_max(), 8);
    }

    #[test]
    fn twirl_definition() {
        let r = Relation::random(4, 0.4, 5);
        let s = Permutation::from_one_line(&[2, 3, 4, 1]).unwrap();
        let t = Permutation::from_one_line(&[4, 1, 3, 2]).unwrap();
        let tw = r.twirl(&s, &t);
        let (si, ti) = (s.inverse(), t.inverse());
        for x in 0..4 {
            for y in 0..4 {
                assert_eq!(tw.contains(x, y), r.contains(si.apply(x), ti.apply(y)));
            }
        }
        assert_eq!(tw.r_max(), r.r_max());
    }
}
