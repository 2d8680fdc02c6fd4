mod common;

use common::oracle::{brute_force_procrustes_2x2, random_orthogonal, random_spd};
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use spd_power::{dist_power, dist_procrustes_power, matrix_power, PowerParam, SymMatrix};

fn pp(a: f64) -> PowerParam {
    PowerParam::new(a).unwrap()
}

#[test]
fn procrustes_rotation_is_orthogonal() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for m in [2, 3] {
        for _ in 0..200 {
            let a = random_spd(&mut rng, m, 0.1, 5.0);
            let b = random_spd(&mut rng, m, 0.1, 5.0);
            let fit = dist_procrustes_power(&a, &b, pp(0.5)).unwrap();
            let gram = &fit.rotation * fit.rotation.transpose();
            assert!((gram - DMatrix::identity(m, m)).norm() < 1e-10);
        }
    }
}

#[test]
fn procrustes_matches_scan_over_orthogonal_group() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for alpha in [0.5, 1.0, -0.5] {
        for _ in 0..10 {
            let s1 = random_spd(&mut rng, 2, 0.2, 4.0);
            let s2 = random_spd(&mut rng, 2, 0.2, 4.0);
            let a = matrix_power(&s1, alpha).unwrap().to_dmatrix();
            let b = matrix_power(&s2, alpha).unwrap().to_dmatrix();
            let oracle = brute_force_procrustes_2x2(&a, &b) / alpha.abs();
            let fit = dist_procrustes_power(&s1, &s2, pp(alpha)).unwrap();
            assert!(
                (fit.distance - oracle).abs() < 1e-6,
                "{} vs {oracle}",
                fit.distance
            );
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn power_metric_axioms(seed in any::<u64>(), ai in 0usize..4) {
        let alpha = [-0.5, 0.5, 1.0, 2.0][ai];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = random_spd(&mut rng, 3, 0.1, 10.0);
        let y = random_spd(&mut rng, 3, 0.1, 10.0);
        let z = random_spd(&mut rng, 3, 0.1, 10.0);
        let d = |a: &SymMatrix, b: &SymMatrix| dist_power(a, b, pp(alpha)).unwrap();
        prop_assert!(d(&x, &y) >= 0.0);
        prop_assert_eq!(d(&x, &x), 0.0);
        prop_assert_eq!(d(&x, &y), d(&y, &x));
        prop_assert!(d(&x, &z) <= d(&x, &y) + d(&y, &z) + 1e-10);
    }

    #[test]
    fn conjugation_preserves_distance(seed in any::<u64>(), ai in 0usize..5) {
        let alpha = [-0.5, 0.0, 0.5, 1.0, 2.0][ai];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = random_spd(&mut rng, 3, 0.1, 10.0);
        let y = random_spd(&mut rng, 3, 0.1, 10.0);
        let q = random_orthogonal(&mut rng, 3);
        let before = dist_power(&x, &y, pp(alpha)).unwrap();
        let after = dist_power(&x.congruence(&q), &y.congruence(&q), pp(alpha)).unwrap();
        prop_assert!((before - after).abs() < 1e-8);
    }

    #[test]
    fn procrustes_never_exceeds_power(seed in any::<u64>(), ai in 0usize..3) {
        let alpha = [-0.5, 0.5, 2.0][ai];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = random_spd(&mut rng, 3, 0.1, 10.0);
        let y = random_spd(&mut rng, 3, 0.1, 10.0);
        let p = dist_procrustes_power(&x, &y, pp(alpha)).unwrap().distance;
        prop_assert!(p <= dist_power(&x, &y, pp(alpha)).unwrap() + 1e-12);
    }
}
