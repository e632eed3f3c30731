use std::collections::BTreeMap;

use num_complex::Complex64 as C64;

use super::layout::{inner, norm_sqr};
use crate::error::{Error, Result};

/// Classical label paired with the unnormalized pure residual state it heralds.
///
/// The ensemble stands for the block-diagonal operator `Σ_l |l><l| ⊗ |ψ_l><ψ_l|`.
#[derive(Clone, Debug)]
pub struct ClassicalQuantumEnsemble<L: Ord> {
    pub entries: BTreeMap<L, Vec<C64>>,
}

impl<L: Ord + Clone> Default for ClassicalQuantumEnsemble<L> {
    fn default() -> Self {
        Self {
            entries: BTreeMap::new(),
        }
    }
}

impl<L: Ord + Clone> ClassicalQuantumEnsemble<L> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, label: L, residual: Vec<C64>) {
        self.entries.insert(label, residual);
    }

    pub fn probability(&self, label: &L) -> f64 {
        self.entries.get(label).map_or(0.0, |v| norm_sqr(v))
    }

    pub fn total_weight(&self) -> f64 {
        self.entries.values().map(|v| norm_sqr(v)).sum()
    }

    pub fn map_labels<M: Ord + Clone>(self, f: impl Fn(L) -> M) -> ClassicalQuantumEnsemble<M> {
        ClassicalQuantumEnsemble {
            entries: self.entries.into_iter().map(|(l, v)| (f(l), v)).collect(),
        }
    }
}

/// `1/2 |ρ - σ|_1` for block-diagonal classical-quantum states.
///
/// Each block difference `|a><a| - |b><b|` has rank at most two; its nonzero
/// eigenvalues are `(|a|²-|b|²)/2 ± sqrt(((|a|²+|b|²)/2)² - |<a|b>|²)`, so the
/// block's trace norm is `sqrt((|a|²+|b|²)² - 4|<a|b>|²)`. That expression is
/// evaluated through `d = b - a` to keep near-equal blocks accurate.
pub fn trace_distance<L: Ord + Clone>(
    a: &ClassicalQuantumEnsemble<L>,
    b: &ClassicalQuantumEnsemble<L>,
) -> Result<f64> {
    let mut total = 0.0;
    for (label, va) in &a.entries {
        match b.entries.get(label) {
            Some(vb) => {
                if va.len() != vb.len() {
                    return Err(Error::Dimension("residual states of different dimension".into()));
                }
                total += block_trace_norm(va, vb);
            }
            None => total += norm_sqr(va),
        }
    }
    for (label, vb) in &b.entries {
        if !a.entries.contains_key(label) {
            total += norm_sqr(vb);
        }
    }
    Ok(total / 2.0)
}

fn block_trace_norm(a: &[C64], b: &[C64]) -> f64 {
    let d: Vec<C64> = b.iter().zip(a).map(|(y, x)| y - x).collect();
    let na = norm_sqr(a);
    let nd = norm_sqr(&d);
    let ad = inner(a, &d);
    // (|a|²+|b|²)² - 4|<a|b>|² = (|a|²-|b|²)² + 4 Gram(a, d).
    let diff = 2.0 * ad.re + nd;
    let gram = (na * nd - ad.norm_sqr()).max(0.0);
    (diff * diff + 4.0 * gram).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    // Brute force: eigenvalues of the explicit density-matrix difference.
    fn dense_block(a: &[C64], b: &[C64]) -> f64 {
        let d = a.len();
        let m = DMatrix::from_fn(d, d, |i, j| a[i] * a[j].conj() - b[i] * b[j].conj());
        m.symmetric_eigenvalues().iter().map(|e| e.abs()).sum()
    }

    #[test]
    fn closed_form_matches_eigenvalues() {
        let a = vec![C64::new(0.3, 0.1), C64::new(-0.2, 0.4), C64::new(0.0, 0.2)];
        let b = vec![C64::new(0.1, 0.0), C64::new(0.5, -0.1), C64::new(0.2, 0.2)];
        assert!((block_trace_norm(&a, &b) - dense_block(&a, &b)).abs() < 1e-12);
    }

    #[test]
    fn disjoint_labels_are_fully_distinguishable() {
        let mut e = ClassicalQuantumEnsemble::new();
        e.insert(0u8, vec![C64::new(1.0, 0.0)]);
        let mut f = ClassicalQuantumEnsemble::new();
        f.insert(1u8, vec![C64::new(1.0, 0.0)]);
        assert!((trace_distance(&e, &f).unwrap() - 1.0).abs() < 1e-15);
        assert!(trace_distance(&e, &e).unwrap() < 1e-15);
    }

    #[test]
    fn phase_is_invisible() {
        let mut e = ClassicalQuantumEnsemble::new();
        e.insert(0u8, vec![C64::new(0.6, 0.0), C64::new(0.0, 0.8)]);
        let mut f = ClassicalQuantumEnsemble::new();
        f.insert(0u8, vec![C64::new(0.0, 0.6), C64::new(-0.8, 0.0)]);
        assert!(trace_distance(&e, &f).unwrap() < 1e-7);
    }
}
