use proptest::prelude::*;
use qbd_core::clearing::ClearingParams;
use qbd_core::series::{
    brute, negbin_tail_sum, negbin_truncated_sum, negbin_upper_sum, weighted_occupancy_sums_equal,
    weighted_occupancy_sums_split,
};

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 400, ..ProptestConfig::default() })]

    #[test]
    fn tail_sum(beta in 0.05f64..0.95, n in 0u64..=5) {
        let c = negbin_tail_sum(beta, n).unwrap();
        prop_assert!(rel(c, brute::negbin_tail_sum(beta, n)) <= 1e-10);
    }

    #[test]
    fn truncated_sum(beta in 0.05f64..0.95, n in 0u64..=5, j0 in 0u64..4, a in 1u64..30) {
        let c = negbin_truncated_sum(beta, n, j0 + a, j0).unwrap();
        prop_assert!(rel(c, brute::negbin_truncated_sum(beta, n, j0 + a, j0)) <= 1e-10);
    }

    #[test]
    fn upper_sum(beta in 0.05f64..0.95, n in 0u64..=5, j0 in 0u64..4, a in 0u64..30) {
        let c = negbin_upper_sum(beta, n, j0 + a, j0).unwrap();
        prop_assert!(rel(c, brute::negbin_upper_sum(beta, n, j0 + a, j0)) <= 1e-10);
    }

    #[test]
    fn truncated_plus_upper_is_tail(beta in 0.05f64..0.95, n in 0u64..=5, a in 1u64..30) {
        let (j0, j) = (2, 2 + a);
        let lower = negbin_truncated_sum(beta, n, j, j0).unwrap();
        // Upper sum is indexed from β^0 at ℓ = j; shift to the tail's β^{ℓ−j0+1}.
        let upper = negbin_upper_sum(beta, n, j, j0).unwrap() * beta.powi((j - j0 + 1) as i32);
        let full = negbin_tail_sum(beta, n).unwrap();
        prop_assert!(rel(lower + upper, full) <= 1e-12);
    }

    #[test]
    fn equal_base_sums(
        lambda in 0.3f64..2.0,
        gap in 0.2f64..2.0,
        alpha in 0.0f64..1.5,
        u in 0u64..=5,
        j0 in 0u64..3,
        a in 1u64..8,
    ) {
        let p = ClearingParams::new(lambda, lambda + gap, alpha).unwrap();
        let r0 = p.derive().unwrap().r;
        let closed = weighted_occupancy_sums_equal(&p, r0, u, j0 + a, j0).unwrap();
        let direct = brute::weighted_occupancy_sums(&p, r0, u, j0 + a, j0).unwrap();
        for s in 0..3 {
            prop_assert!(rel(closed[s], direct[s]) <= 1e-10, "shift {}: {} vs {}", s as i64 - 1, closed[s], direct[s]);
        }
    }

    #[test]
    fn split_base_sums(
        lambda in 0.3f64..2.0,
        gap in 0.2f64..2.0,
        r0 in 0.05f64..0.95,
        u in 0u64..=5,
        j0 in 0u64..3,
        a in 1u64..8,
    ) {
        let p = ClearingParams::new(lambda, lambda + gap, 0.0).unwrap();
        let r_m = p.derive().unwrap().r;
        prop_assume!((r0 - r_m).abs() > 1e-3);
        let closed = weighted_occupancy_sums_split(&p, r0, r_m, u, j0 + a, j0).unwrap();
        let direct = brute::weighted_occupancy_sums(&p, r0, u, j0 + a, j0).unwrap();
        for s in 0..3 {
            let scale = closed[s].abs().max(direct[s].abs());
            // Individual sums can cross zero; compare relative to the terms' size there.
            let tol = 1e-10 * scale.max(1e-8 * (1.0 / (1.0 - r0)).powi(u as i32 + 1));
            prop_assert!((closed[s] - direct[s]).abs() <= tol, "shift {}: {} vs {}", s as i64 - 1, closed[s], direct[s]);
        }
    }
}

#[test]
fn spec_examples() {
    assert!(rel(negbin_tail_sum(0.5, 0).unwrap(), 1.0) < 1e-15);
    assert!(rel(negbin_tail_sum(0.5, 1).unwrap(), 2.0) < 1e-15);
    assert!(rel(negbin_tail_sum(0.3, 3).unwrap(), 1.249479383590171) < 1e-12);
    assert!(
        rel(
            negbin_upper_sum(0.4, 2, 3, 0).unwrap(),
            brute::negbin_upper_sum(0.4, 2, 3, 0)
        ) < 1e-12
    );
    assert!(negbin_tail_sum(0.0, 1).is_err());
    assert!(negbin_upper_sum(1.2, 1, 3, 0).is_err());
}
