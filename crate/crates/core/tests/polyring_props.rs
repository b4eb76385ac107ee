use proptest::prelude::*;
use sosub_core::numerics::BigReal;
use sosub_core::polyring::{MultiIndex, Polynomial};

const P: usize = 128;

fn poly(n_vars: usize, degree: u32) -> impl Strategy<Value = Polynomial> {
    let basis = MultiIndex::all_up_to(n_vars, degree);
    prop::collection::vec(-5i64..=5, basis.len()).prop_map(move |coeffs| {
        let mut p = Polynomial::zero(n_vars);
        for (idx, c) in basis.iter().zip(coeffs) {
            p.add_term(idx.clone(), BigReal::from_i64(c, P));
        }
        p
    })
}

fn point(n_vars: usize) -> impl Strategy<Value = Vec<BigReal>> {
    prop::collection::vec(-2.0f64..2.0, n_vars).prop_map(|v| v.into_iter().map(|x| BigReal::from_f64(x, P)).collect())
}

proptest! {
    #[test]
    fn pow_is_repeated_mul(p in poly(2, 2), k in 0u32..=6) {
        let mut folded = Polynomial::constant(BigReal::one(P), 2);
        for _ in 0..k {
            folded = folded.mul(&p).unwrap();
        }
        prop_assert_eq!(p.pow(k), folded);
    }

    #[test]
    fn eval_is_multiplicative((p, q, x) in (1usize..=3).prop_flat_map(|n| (poly(n, 3), poly(n, 3), point(n)))) {
        let lhs = p.mul(&q).unwrap().eval(&x).unwrap();
        let rhs = p.eval(&x).unwrap() * q.eval(&x).unwrap();
        let scale = rhs.abs().to_f64().max(1.0);
        prop_assert!((lhs - rhs).abs().to_f64() <= 1e-30 * scale);
    }

    #[test]
    fn scaling_by_power_of_two_inverts_exactly(p in poly(2, 4), k in -6i64..=6) {
        let c = BigReal::pow2(k, P);
        let back = p.scale_variables(&c).unwrap().scale_variables(&c.recip()).unwrap();
        prop_assert_eq!(back, p);
    }

    #[test]
    fn scale_variables_matches_evaluation(p in poly(2, 4), x in point(2), c in -3.0f64..3.0) {
        prop_assume!(c.abs() > 1e-3);
        let c = BigReal::from_f64(c, P);
        let scaled_point: Vec<BigReal> = x.iter().map(|v| v * &c).collect();
        let lhs = p.scale_variables(&c).unwrap().eval(&x).unwrap();
        let rhs = p.eval(&scaled_point).unwrap();
        prop_assert!((&lhs - &rhs).abs().to_f64() <= 1e-30 * rhs.abs().to_f64().max(1.0));
    }
}
