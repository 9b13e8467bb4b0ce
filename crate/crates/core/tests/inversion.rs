mod common;

use common::q;
use proptest::prelude::*;
use rug::ops::Pow;
use rug::{Float, Rational};
use sepprob::inversion::{
    affine_map, build_tables, gegenbauer_tail, legendre_tail, tail, tail_coefficients, InversionError, Method, Number,
    NumericMode,
};
use sepprob::moments::{moment_sequence, MomentSequence, Scenario, Variable};

fn scenario(v: Variable, a: Rational, k: Rational) -> Scenario {
    Scenario::new(v, a, k).unwrap()
}

#[test]
fn affine_constants() {
    assert_eq!(affine_map(&q(-1, 16), &q(1, 432)), (q(13, 14), q(216, 7)));
    assert_eq!(affine_map(&q(-1, 16), &q(1, 256)), (q(15, 17), q(512, 17)));
    let t = build_tables(&q(-1, 16), &q(1, 432), 0, 1).unwrap();
    assert_eq!((t.c0.clone(), t.c1.clone()), (q(13, 14), q(216, 7)));
}

#[test]
fn uniform_baseline() {
    let seq = moment_sequence(&scenario(Variable::PtDet, q(1, 1), q(0, 1)), 0).unwrap();
    let est = legendre_tail(&seq, &q(0, 1), 0, NumericMode::Exact).unwrap();
    assert_eq!(est.value, Number::Exact(q(1, 17)));
    let est = gegenbauer_tail(&seq, 0, &q(0, 1), 0, NumericMode::Exact).unwrap();
    assert_eq!(est.value, Number::Exact(q(1, 17)));
}

#[test]
fn coefficients_ignore_moment_values() {
    let s = scenario(Variable::Diff, q(1, 2), q(1, 1));
    let real = moment_sequence(&s, 30).unwrap();
    let fake = MomentSequence { scenario: s, mu: (0..=30).map(|i| q(i * i - 7, 3 + i)).collect() };
    for method in [Method::Legendre, Method::Gegenbauer(1), Method::Gegenbauer(3)] {
        let a = tail(&real, method, &q(0, 1), 30, NumericMode::Exact).unwrap();
        let b = tail(&fake, method, &q(0, 1), 30, NumericMode::Exact).unwrap();
        assert_eq!(a.coeffs, b.coeffs);
        assert_ne!(a.value, b.value);
    }
}

// Float mode at p digits must keep p - 10 significant digits of the exact value.
#[test]
fn float_mode_keeps_requested_digits() {
    let s = scenario(Variable::PtDet, q(1, 1), q(0, 1));
    let seq = moment_sequence(&s, 200).unwrap();
    for m in [1, 40, 120, 200] {
        let exact = legendre_tail(&seq, &q(0, 1), m, NumericMode::Exact).unwrap().value;
        let exact = exact.as_exact().unwrap().clone();
        for digits in [30, 120, 300] {
            let Number::Float(v) = legendre_tail(&seq, &q(0, 1), m, NumericMode::BigFloat(digits)).unwrap().value else {
                panic!("float mode returned an exact value");
            };
            let prec = v.prec() + 64;
            let rel = Float::with_val(prec, &v - &exact).abs() / Float::with_val(prec, &exact).abs();
            let allowed = Float::with_val(prec, 10).pow(-(digits as i32 - 10));
            assert!(rel <= allowed, "m={m} digits={digits}: relative error {rel:.3e}");
        }
    }
}

#[test]
fn argument_errors() {
    let seq = moment_sequence(&scenario(Variable::PtDet, q(1, 1), q(0, 1)), 5).unwrap();
    assert!(matches!(
        legendre_tail(&seq, &q(0, 1), 6, NumericMode::Exact),
        Err(InversionError::LengthMismatch { needed: 6, available: 5 })
    ));
    assert!(matches!(legendre_tail(&seq, &q(1, 2), 3, NumericMode::Exact), Err(InversionError::Argument(_))));
    assert!(matches!(
        tail_coefficients(&q(1, 1), &q(0, 1), Method::Legendre, &q(1, 2), 3, NumericMode::Exact),
        Err(InversionError::Argument(_))
    ));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn endpoints_are_exact(
        v in prop::sample::select(vec![Variable::PtDet, Variable::Diff]),
        a in prop::sample::select(vec![q(1, 2), q(1, 1), q(2, 1)]),
        k in prop::sample::select(vec![q(0, 1), q(1, 2), q(3, 1)]),
        alpha_w in 0u32..4,
        m in 0u32..=40,
    ) {
        let s = scenario(v, a, k);
        let (lo, hi) = s.interval();
        let seq = moment_sequence(&s, m).unwrap();
        let method = if alpha_w == 0 { Method::Legendre } else { Method::Gegenbauer(alpha_w) };
        prop_assert_eq!(tail(&seq, method, &lo, m, NumericMode::Exact).unwrap().value, Number::Exact(q(1, 1)));
        prop_assert_eq!(tail(&seq, method, &hi, m, NumericMode::Exact).unwrap().value, Number::Exact(q(0, 1)));
    }

    #[test]
    fn gegenbauer_zero_is_legendre(
        v in prop::sample::select(vec![Variable::PtDet, Variable::Diff]),
        xi_num in -100i64..=3,
        m in 0u32..=50,
    ) {
        let (lo, hi) = v.interval();
        let xi = Rational::from((xi_num, 1600));
        prop_assume!(xi >= lo && xi <= hi);
        let leg = tail_coefficients(&lo, &hi, Method::Legendre, &xi, m, NumericMode::Exact).unwrap();
        let geg = tail_coefficients(&lo, &hi, Method::Gegenbauer(0), &xi, m, NumericMode::Exact).unwrap();
        prop_assert_eq!(leg, geg);
    }
}
