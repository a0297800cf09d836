use leafspace::entropy::von_neumann_entropy;
use leafspace::operator::{isometry_deviation, trace_product, CMatrix};
use leafspace::random::{ginibre, haar_stiefel_with, haar_unitary, random_density, stream_rng};
use leafspace::roof::{entanglement_of_formation, hjw_ensemble, Ensemble, RoofOptions, StiefelPoint};
use leafspace::{Block, DensityMatrix, SubalgebraSpec};
use proptest::prelude::*;

/// A random subalgebra of `M_d`: block structure from `shape`, framed by a Haar unitary.
fn subalgebra(d: usize, shape: u8, seed: u64) -> SubalgebraSpec {
    let blocks = match (d, shape % 3) {
        (_, 0) => vec![Block::new(1, 1); d],
        (4, 1) => vec![Block::new(2, 2)],
        (_, 1) => vec![Block::new(d - 1, 1), Block::new(1, 1)],
        _ => vec![Block::new(1, d)],
    };
    SubalgebraSpec::framed(blocks, haar_unitary(seed, d)).unwrap()
}

fn quick() -> RoofOptions {
    RoofOptions::default().with_restarts(8)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn restriction_is_dual_to_its_adjoint(d in 2usize..5, shape in 0u8..3, seed in 0u64..1000) {
        let a = subalgebra(d, shape, seed);
        let mut rng = stream_rng(seed, 1);
        let x = ginibre(&mut rng, d, d);
        let y = a.restrict(&ginibre(&mut rng, d, d)).unwrap();
        let lhs = a.restrict(&x).unwrap().pairing(&y);
        let rhs = trace_product(&x, &a.adjoint_restrict(&y).unwrap());
        prop_assert!((lhs - rhs).norm() < 1e-10);
    }

    #[test]
    fn restriction_preserves_trace(d in 2usize..5, shape in 0u8..3, seed in 0u64..1000) {
        let a = subalgebra(d, shape, seed);
        let rho = random_density(seed, d, d);
        let r = a.restrict(rho.matrix()).unwrap();
        prop_assert!((r.trace().re - 1.0).abs() < 1e-12);
        prop_assert!(r.eigenvalues().iter().all(|&l| l > -1e-12));
    }

    #[test]
    fn restricted_entropy_is_bounded(d in 2usize..5, shape in 0u8..3, seed in 0u64..1000) {
        let a = subalgebra(d, shape, seed);
        let rho = random_density(seed, d, 1 + (seed as usize % d));
        let s = a.restricted_entropy(&rho).unwrap();
        prop_assert!(s >= -1e-12);
        prop_assert!(s <= (a.restricted_dim() as f64).ln() + 1e-12);
    }

    #[test]
    fn hjw_ensembles_reconstruct_the_state(d in 2usize..5, extra in 0usize..4, seed in 0u64..1000) {
        let r = 1 + (seed as usize % d);
        let rho = random_density(seed, d, r);
        let v = StiefelPoint::new(haar_stiefel_with(&mut stream_rng(seed, 2), r + extra, r)).unwrap();
        let ens = hjw_ensemble(&v, &rho).unwrap();
        prop_assert!(ens.reconstruction_error() < 1e-10);
        prop_assert!((ens.weights().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn retraction_stays_on_the_stiefel_manifold(n in 2usize..7, seed in 0u64..1000, t in 0.0f64..2.0) {
        let r = 1 + (seed as usize % n);
        let mut rng = stream_rng(seed, 3);
        let v = StiefelPoint::new(haar_stiefel_with(&mut rng, n, r)).unwrap();
        let z = v.project_tangent(&ginibre(&mut rng, n, r));
        let w = v.retract(&z, t);
        prop_assert!(isometry_deviation(w.matrix()) < 1e-10);
        let vz = v.matrix().adjoint() * &z;
        prop_assert!((&vz + vz.adjoint()).norm() < 1e-10);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn roof_lies_between_zero_and_any_decomposition(d in 2usize..4, shape in 0u8..3, seed in 0u64..1000) {
        let a = subalgebra(d, shape, seed);
        let rho = random_density(seed, d, d);
        let e = entanglement_of_formation(&rho, &a, &quick()).unwrap().value;
        let eigen = Ensemble::from_unnormalized(leafspace::roof::HjwFactor::new(&rho).matrix().column_iter().map(|c| c.into_owned()).collect(), rho.clone())
            .unwrap()
            .roof_value(&a)
            .unwrap();
        prop_assert!(e >= -1e-12);
        prop_assert!(e <= eigen + 1e-9);
        prop_assert!(e <= a.restricted_entropy(&rho).unwrap() + 1e-9);
    }

    #[test]
    fn roof_is_covariant_under_normalizing_unitaries(d in 2usize..4, seed in 0u64..1000) {
        let a = SubalgebraSpec::diagonal(d).unwrap();
        let rho = random_density(seed, d, d);
        let mut p = CMatrix::zeros(d, d);
        for i in 0..d {
            p[((i + 1 + seed as usize) % d, i)] = leafspace::C64::new(1.0, 0.0);
        }
        prop_assert!(a.is_normalized_by(&p));
        let moved = rho.conjugate_by(&p).unwrap();
        let e1 = entanglement_of_formation(&rho, &a, &quick()).unwrap().value;
        let e2 = entanglement_of_formation(&moved, &a, &quick()).unwrap().value;
        prop_assert!((e1 - e2).abs() < 1e-6);
    }

    #[test]
    fn roof_is_convex_at_midpoints(seed in 0u64..1000) {
        let a = SubalgebraSpec::diagonal(3).unwrap();
        let r1 = random_density(seed, 3, 2);
        let r2 = random_density(seed + 5000, 3, 2);
        let mid = r1.mix(&r2, 0.5).unwrap();
        let e = |r: &DensityMatrix| entanglement_of_formation(r, &a, &quick()).unwrap().value;
        prop_assert!(e(&mid) <= 0.5 * (e(&r1) + e(&r2)) + 1e-6);
    }

    #[test]
    fn pure_states_need_no_optimization(d in 2usize..5, shape in 0u8..3, seed in 0u64..1000) {
        let a = subalgebra(d, shape, seed);
        let psi = leafspace::random::random_pure(seed, d);
        let rho = DensityMatrix::from_pure(&psi);
        let e = entanglement_of_formation(&rho, &a, &quick()).unwrap().value;
        prop_assert!((e - a.restricted_entropy(&rho).unwrap()).abs() < 1e-10);
        prop_assert!(von_neumann_entropy(&rho).unwrap().abs() < 1e-10);
    }
}
