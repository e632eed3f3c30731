//! Averages over twirl pairs `(σ, τ) ∈ S_N × S_N`.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::perm::{permutations, sample_uniform, Estimate, Factorization, Permutation};

/// Largest `N` for which all `(N!)^2` pairs are enumerated.
pub const EXHAUSTIVE_LIMIT: usize = 5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum TwirlMode {
    Exhaustive,
    /// Stratified on `σ(N-1)`: equal sample counts per stratum.
    Sampled { samples: usize, seed: u64 },
}

impl TwirlMode {
    /// Exhaustive where affordable, sampled otherwise.
    pub fn auto(n: usize, samples: usize, seed: u64) -> Self {
        if n <= 4 {
            TwirlMode::Exhaustive
        } else {
            TwirlMode::Sampled { samples, seed }
        }
    }

    pub fn is_exact(&self) -> bool {
        matches!(self, TwirlMode::Exhaustive)
    }
}

/// Uniform `σ` conditioned on `σ(n-1) = top`.
fn sample_with_top<R: Rng + ?Sized>(n: usize, top: usize, rng: &mut R) -> Permutation {
    let mut targets: Vec<usize> = (0..n).map(|k| rng.gen_range(0..=k)).collect();
    targets[n - 1] = top;
    Factorization::new(targets).expect("targets in range").compose()
}

/// Mean of `f(σ, τ)` over uniform pairs, exact or estimated.
pub fn twirl_average<F>(n: usize, mode: TwirlMode, f: F) -> Result<Estimate>
where
    F: Fn(&Permutation, &Permutation) -> f64 + Sync,
{
    let mut v = twirl_average_many(n, mode, 1, |s, t| vec![f(s, t)])?;
    Ok(v.remove(0))
}

/// Componentwise means of a vector-valued `f(σ, τ)` of length `len`.
///
/// Evaluation runs in parallel; the reduction order is fixed so results are
/// reproducible bit for bit.
pub fn twirl_average_many<F>(n: usize, mode: TwirlMode, len: usize, f: F) -> Result<Vec<Estimate>>
where
    F: Fn(&Permutation, &Permutation) -> Vec<f64> + Sync,
{
    let add = |mut acc: Vec<f64>, v: Vec<f64>| {
        debug_assert_eq!(v.len(), len);
        acc.iter_mut().zip(v).for_each(|(a, x)| *a += x);
        acc
    };
    match mode {
        TwirlMode::Exhaustive => {
            if n > EXHAUSTIVE_LIMIT {
                return Err(Error::SizeLimit {
                    what: "exhaustive twirl enumeration",
                    requested: n,
                    limit: EXHAUSTIVE_LIMIT,
                });
            }
            let all: Vec<Permutation> = permutations(n).collect();
            let rows: Vec<Vec<f64>> = all
                .par_iter()
                .map(|sigma| all.iter().map(|tau| f(sigma, tau)).fold(vec![0.0; len], add))
                .collect();
            let count = (all.len() * all.len()) as f64;
            Ok(rows
                .into_iter()
                .fold(vec![0.0; len], add)
                .into_iter()
                .map(|s| Estimate {
                    mean: s / count,
                    stderr: None,
                })
                .collect())
        }
        TwirlMode::Sampled { samples, seed } => {
            if samples < 2 * n {
                return Err(Error::OutOfRange(format!("need at least {} twirl samples, got {samples}", 2 * n)));
            }
            let per = samples.div_ceil(n);
            let weight = 1.0 / n as f64;
            let mut mean = vec![0.0; len];
            let mut var = vec![0.0; len];
            for top in 0..n {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(top as u64);
                let pairs: Vec<(Permutation, Permutation)> = (0..per)
                    .map(|_| {
                        let sigma = sample_with_top(n, top, &mut rng);
                        (sigma, sample_uniform(n, &mut rng))
                    })
                    .collect();
                let vals: Vec<Vec<f64>> = pairs.par_iter().map(|(s, t)| f(s, t)).collect();
                for k in 0..len {
                    let m = vals.iter().map(|v| v[k]).sum::<f64>() / per as f64;
                    let v = vals.iter().map(|v| (v[k] - m) * (v[k] - m)).sum::<f64>() / (per - 1) as f64;
                    mean[k] += weight * m;
                    var[k] += weight * weight * v / per as f64;
                }
            }
            Ok(mean
                .into_iter()
                .zip(var)
                .map(|(mean, v)| Estimate {
                    mean,
                    stderr: Some(v.sqrt()),
                })
                .collect())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exhaustive_average_of_fixed_point_indicator() {
        // E[σ(0) = τ(0)] = 1/N.
        let e = twirl_average(4, TwirlMode::Exhaustive, |s, t| f64::from(u8::from(s.apply(0) == t.apply(0)))).unwrap();
        assert!((e.mean - 0.25).abs() < 1e-15);
    }

    #[test]
    fn stratification_removes_top_variance() {
        // f depends on σ only through σ(N-1): every stratum is constant.
        let mode = TwirlMode::Sampled { samples: 400, seed: 3 };
        let e = twirl_average(6, mode, |s, _| s.apply(5) as f64).unwrap();
        assert!((e.mean - 2.5).abs() < 1e-12);
        assert!(e.stderr.unwrap() < 1e-12);
    }

    #[test]
    fn sampled_is_reproducible_and_consistent() {
        let mode = TwirlMode::Sampled { samples: 2000, seed: 9 };
        let f = |s: &Permutation, t: &Permutation| f64::from(u8::from(s.apply(0) == t.apply(1)));
        let a = twirl_average(6, mode, f).unwrap();
        let b = twirl_average(6, mode, f).unwrap();
        assert_eq!(a.mean.to_bits(), b.mean.to_bits());
        assert!((a.mean - 1.0 / 6.0).abs() < 4.0 * a.stderr.unwrap());
    }
}
