use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use permlab::lab::report::VerificationReport;
use permlab::linalg::operator::{haar_unitary, DenseOperator, LinearOperator};
use permlab::linalg::{norm_sqr, project_basis, trace_distance, ClassicalQuantumEnsemble, RegisterLayout, StateVector, C64};
use permlab::perm::{sample_uniform, Permutation};
use permlab::relation::Relation;

const DIM: usize = 3;
const LABELS: usize = 3;

fn amplitudes(len: usize) -> impl Strategy<Value = Vec<C64>> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), len).prop_map(|v| v.into_iter().map(|(re, im)| C64::new(re, im)).collect())
}

/// A normalized ensemble over `LABELS` labels with `DIM`-dimensional residuals.
fn ensemble() -> impl Strategy<Value = ClassicalQuantumEnsemble<usize>> {
    amplitudes(DIM * LABELS).prop_filter_map("zero vector", |amps| {
        let total = norm_sqr(&amps);
        (total > 1e-6).then(|| {
            let scale = 1.0 / total.sqrt();
            let mut e = ClassicalQuantumEnsemble::new();
            for (label, chunk) in amps.chunks(DIM).enumerate() {
                e.insert(label, chunk.iter().map(|a| a * scale).collect());
            }
            e
        })
    })
}

fn rotate(e: &ClassicalQuantumEnsemble<usize>, u: &DenseOperator) -> ClassicalQuantumEnsemble<usize> {
    let mut out = ClassicalQuantumEnsemble::new();
    for (label, v) in &e.entries {
        out.insert(*label, u.apply(v));
    }
    out
}

proptest! {
    #[test]
    fn trace_distance_is_a_metric(a in ensemble(), b in ensemble(), c in ensemble()) {
        let ab = trace_distance(&a, &b).unwrap();
        let bc = trace_distance(&b, &c).unwrap();
        let ac = trace_distance(&a, &c).unwrap();
        prop_assert!(ac <= ab + bc + 1e-9);
        prop_assert!((ab - trace_distance(&b, &a).unwrap()).abs() < 1e-12);
        prop_assert!(trace_distance(&a, &a).unwrap() < 1e-12);
        prop_assert!(ab <= 1.0 + 1e-9);
    }

    #[test]
    fn trace_distance_ignores_common_unitaries(a in ensemble(), b in ensemble(), seed in any::<u64>()) {
        let u = DenseOperator::new(haar_unitary(DIM, &mut ChaCha8Rng::seed_from_u64(seed)));
        let before = trace_distance(&a, &b).unwrap();
        let after = trace_distance(&rotate(&a, &u), &rotate(&b, &u)).unwrap();
        prop_assert!((before - after).abs() < 1e-9);
    }

    #[test]
    fn projections_partition_the_norm(amps in amplitudes(12), cut in 0usize..4) {
        let layout = RegisterLayout::new([("A", 3), ("B", 4)]);
        let state = StateVector { layout, amps };
        let kept = project_basis(&state, "B", |b| b < cut).unwrap();
        let rest = project_basis(&state, "B", |b| b >= cut).unwrap();
        prop_assert!((kept.norm_sqr() + rest.norm_sqr() - state.norm_sqr()).abs() < 1e-10);
    }

    #[test]
    fn operators_are_linear_and_unitaries_isometric(
        x in amplitudes(4),
        y in amplitudes(4),
        re in -2.0f64..2.0,
        im in -2.0f64..2.0,
        seed in any::<u64>(),
    ) {
        let u = DenseOperator::new(haar_unitary(4, &mut ChaCha8Rng::seed_from_u64(seed)));
        let alpha = C64::new(re, im);
        let combined: Vec<C64> = x.iter().zip(&y).map(|(a, b)| alpha * a + b).collect();
        let lhs = u.apply(&combined);
        let (ux, uy) = (u.apply(&x), u.apply(&y));
        for i in 0..4 {
            prop_assert!((lhs[i] - (alpha * ux[i] + uy[i])).norm() < 1e-10);
        }
        prop_assert!((norm_sqr(&ux) - norm_sqr(&x)).abs() < 1e-10);
    }

    #[test]
    fn inverse_composes_to_identity(seed in any::<u64>(), n in 1usize..10) {
        let p = sample_uniform(n, &mut ChaCha8Rng::seed_from_u64(seed));
        prop_assert_eq!(p.inverse().compose(&p), Permutation::identity(n));
        prop_assert_eq!(p.compose(&p.inverse()), Permutation::identity(n));
    }

    #[test]
    fn twirling_keeps_section_sizes(seed in any::<u64>(), n in 1usize..8, density in 0.0f64..1.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rel = Relation::random(n, density, seed);
        let (sigma, tau) = (sample_uniform(n, &mut rng), sample_uniform(n, &mut rng));
        let twirled = rel.twirl(&sigma, &tau);
        prop_assert_eq!(twirled.r_max(), rel.r_max());
        prop_assert_eq!(twirled.len(), rel.len());
        let id = Permutation::identity(n);
        prop_assert_eq!(rel.twirl(&id, &id), rel.clone());
        // Undoing the twirl restores the relation.
        prop_assert_eq!(twirled.twirl(&sigma.inverse(), &tau.inverse()), rel);
    }

    #[test]
    fn report_pass_tracks_slack(lhs in -2.0f64..2.0, rhs in -2.0f64..2.0, se in 0.0f64..0.5) {
        let exact = VerificationReport::exact("case", lhs, rhs, 1e-9);
        prop_assert_eq!(exact.slack, rhs - lhs);
        prop_assert_eq!(exact.pass, exact.slack >= -1e-9);
        let sampled = VerificationReport::monte_carlo("case", lhs, rhs, se);
        prop_assert_eq!(sampled.pass, sampled.slack >= -3.0 * se);
    }
}
