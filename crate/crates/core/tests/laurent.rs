use proptest::prelude::*;
use qdissect::klaurent::{
    builtin_combos, check_recurrences, eval_at_k, p_poly, p_series, substitute_k_equals_l_plus_4,
};
use qdissect::{CoeffRing, LaurentPoly, PIndex, Symbol};

fn poly() -> impl Strategy<Value = LaurentPoly> {
    prop::collection::vec((-4i64..5, -30i64..30), 0..6)
        .prop_map(|t| LaurentPoly::from_terms(Symbol::K, &t))
}

#[test]
fn p_polynomials_match_their_series() {
    let ring = CoeffRing::Exact;
    for m in 0..=5 {
        for n in -6..=6 {
            let idx = PIndex::new(m, n).unwrap();
            let via_k = eval_at_k(&p_poly(idx).unwrap(), 300, ring).unwrap();
            let direct = p_series(idx, 300, ring).unwrap();
            assert_eq!(
                via_k.first_difference(&direct, 300).unwrap(),
                None,
                "P({m},{n})"
            );
        }
    }
    assert!(check_recurrences().unwrap() > 100);
}

#[test]
fn low_p_values() {
    // P(0,0) = 2, P(1,0) = K
    assert_eq!(
        p_poly(PIndex::new(0, 0).unwrap()).unwrap(),
        LaurentPoly::constant(Symbol::K, 2)
    );
    assert_eq!(
        p_poly(PIndex::new(1, 0).unwrap()).unwrap(),
        LaurentPoly::monomial(Symbol::K, 1, 1)
    );
    assert!(PIndex::new(-1, 0).is_err());
}

#[test]
fn every_builtin_combo_checks() {
    for (name, entry) in builtin_combos() {
        let c = entry.check(name).unwrap();
        assert!(c.passed(), "{name}: {c:?}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn evaluation_is_a_ring_morphism(a in poly(), b in poly()) {
        let ring = CoeffRing::Modular(1_000_003);
        let n = 40;
        let prod = eval_at_k(&a.mul(&b).unwrap(), n, ring).unwrap();
        let sep = eval_at_k(&a, n + 10, ring).unwrap().mul(&eval_at_k(&b, n + 10, ring).unwrap()).unwrap();
        prop_assert_eq!(prod.first_difference(&sep, n).unwrap(), None);
        let sum = eval_at_k(&a.add(&b).unwrap(), n, ring).unwrap();
        let sep = eval_at_k(&a, n, ring).unwrap().add(&eval_at_k(&b, n, ring).unwrap()).unwrap();
        prop_assert_eq!(sum.first_difference(&sep, n).unwrap(), None);
    }

    #[test]
    fn display_round_trips(a in poly()) {
        prop_assert_eq!(LaurentPoly::parse(&a.to_string()).unwrap(), a);
    }

    #[test]
    fn l_substitution_preserves_value(a in poly()) {
        let ring = CoeffRing::Modular(1_000_003);
        let c = substitute_k_equals_l_plus_4(&a).unwrap();
        let k_pole = LaurentPoly::monomial(Symbol::K, 1, -(c.pole_order as i64));
        let lhs = eval_at_k(&a, 30, ring).unwrap();
        let rhs = eval_at_k(&k_pole, 60, ring).unwrap().mul(&eval_at_k(&c.numerator, 60, ring).unwrap()).unwrap();
        prop_assert_eq!(lhs.first_difference(&rhs, 30).unwrap(), None);
    }
}
