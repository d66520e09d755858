use num_bigint::BigInt;
use num_integer::Integer;
use proptest::prelude::*;
use qdissect::{CoeffRing, Series};

fn ring() -> impl Strategy<Value = CoeffRing> {
    prop_oneof![
        Just(CoeffRing::Exact),
        Just(CoeffRing::Modular(5)),
        Just(CoeffRing::Modular(25)),
        Just(CoeffRing::Modular(3125)),
        Just(CoeffRing::Modular(1_000_000_007)),
    ]
}

fn series_in(r: CoeffRing, max_len: usize) -> impl Strategy<Value = Series> {
    (-4i64..6, prop::collection::vec(-40i64..40, 1..max_len))
        .prop_map(move |(v, c)| Series::from_i64(r, v, &c, v + c.len() as i64))
}

fn pair(max_len: usize) -> impl Strategy<Value = (Series, Series)> {
    ring().prop_flat_map(move |r| (series_in(r, max_len), series_in(r, max_len)))
}

fn triple(max_len: usize) -> impl Strategy<Value = (Series, Series, Series)> {
    ring().prop_flat_map(move |r| {
        (
            series_in(r, max_len),
            series_in(r, max_len),
            series_in(r, max_len),
        )
    })
}

/// Agreement on every exponent both series know.
fn agree(a: &Series, b: &Series) -> bool {
    let n = a.precision().min(b.precision());
    a.first_difference(b, n).unwrap().is_none()
}

fn is_unit(s: &Series) -> bool {
    if s.is_zero() {
        return false;
    }
    let c = s.coeff(s.valuation()).unwrap();
    match s.ring() {
        CoeffRing::Exact => c == BigInt::from(1) || c == BigInt::from(-1),
        CoeffRing::Modular(m) => c.gcd(&BigInt::from(m)) == BigInt::from(1),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn addition_is_a_commutative_group((a, b, c) in triple(30)) {
        prop_assert!(agree(&a.add(&b).unwrap(), &b.add(&a).unwrap()));
        let l = a.add(&b).unwrap().add(&c).unwrap();
        let r = a.add(&b.add(&c).unwrap()).unwrap();
        prop_assert!(agree(&l, &r));
        prop_assert!(a.sub(&a).unwrap().is_zero());
    }

    #[test]
    fn multiplication_axioms((a, b, c) in triple(25)) {
        prop_assert!(agree(&a.mul(&b).unwrap(), &b.mul(&a).unwrap()));
        let l = a.mul(&b).unwrap().mul(&c).unwrap();
        let r = a.mul(&b.mul(&c).unwrap()).unwrap();
        prop_assert!(agree(&l, &r));
        let l = a.mul(&b.add(&c).unwrap()).unwrap();
        let r = a.mul(&b).unwrap().add(&a.mul(&c).unwrap()).unwrap();
        prop_assert!(agree(&l, &r));
        let one = Series::one(a.ring(), 100);
        prop_assert!(agree(&a.mul(&one).unwrap(), &a));
    }

    #[test]
    fn inverse_times_series_is_one(a in ring().prop_flat_map(|r| series_in(r, 30))) {
        prop_assume!(is_unit(&a));
        let inv = a.invert().unwrap();
        let prod = a.mul(&inv).unwrap();
        prop_assert!(prod.precision() >= 1);
        prop_assert!(agree(&prod, &Series::one(a.ring(), prod.precision())));
    }

    #[test]
    fn pow_is_additive(a in ring().prop_flat_map(|r| series_in(r, 15)), i in 0i64..4, j in 0i64..4) {
        let l = a.pow(i).unwrap().mul(&a.pow(j).unwrap()).unwrap();
        let r = a.pow(i + j).unwrap();
        prop_assert!(agree(&l, &r));
    }

    #[test]
    fn negative_pow_matches_inverse(a in ring().prop_flat_map(|r| series_in(r, 15)), i in 1i64..4) {
        prop_assume!(is_unit(&a));
        prop_assert!(agree(&a.pow(-i).unwrap(), &a.invert().unwrap().pow(i).unwrap()));
    }

    /// Results computed from truncated inputs never claim coefficients that
    /// the full inputs would contradict.
    #[test]
    fn precision_is_sound((a, b) in pair(40), cut_a in 1usize..40, cut_b in 1usize..40) {
        let ta = a.truncate(a.valuation().min(a.precision()) + cut_a as i64);
        let tb = b.truncate(b.valuation().min(b.precision()) + cut_b as i64);
        prop_assert!(agree(&ta.mul(&tb).unwrap(), &a.mul(&b).unwrap()));
        prop_assert!(agree(&ta.add(&tb).unwrap(), &a.add(&b).unwrap()));
        if is_unit(&ta) {
            prop_assert!(agree(&ta.invert().unwrap(), &a.invert().unwrap()));
        }
        for m in [2u64, 5] {
            for r in 0..m as i64 {
                prop_assert!(agree(&ta.extract(m, r).unwrap(), &a.extract(m, r).unwrap()));
            }
        }
        prop_assert!(agree(&ta.substitute_power(5).unwrap(), &a.substitute_power(5).unwrap()));
    }

    #[test]
    fn reduction_is_a_ring_morphism(
        (a, b) in (series_in(CoeffRing::Exact, 25), series_in(CoeffRing::Exact, 25)),
        m in prop::sample::select(vec![5u64, 25, 125, 7]),
    ) {
        let red = |s: &Series| s.reduce_mod(m).unwrap();
        prop_assert!(agree(&red(&a.mul(&b).unwrap()), &red(&a).mul(&red(&b)).unwrap()));
        prop_assert!(agree(&red(&a.add(&b).unwrap()), &red(&a).add(&red(&b)).unwrap()));
    }

    #[test]
    fn dissection_is_complete(
        f in ring().prop_flat_map(|r| series_in(r, 60)),
        m in prop::sample::select(vec![2u64, 5, 10]),
    ) {
        let mut acc = Series::zero(f.ring(), f.precision());
        for r in 0..m as i64 {
            let part = f.extract(m, r).unwrap().substitute_power(m).unwrap().shift(r);
            acc = acc.add(&part).unwrap();
        }
        prop_assert!(acc.precision() > f.precision() - m as i64);
        prop_assert!(agree(&acc, &f));
    }

    #[test]
    fn extract_is_linear(
        (a, b) in pair(60),
        x in -9i64..9,
        y in -9i64..9,
        m in prop::sample::select(vec![2u64, 5, 10]),
        r in 0i64..10,
    ) {
        let r = r % m as i64;
        let lin = |s: &Series, t: &Series| s.scale(&BigInt::from(x)).add(&t.scale(&BigInt::from(y))).unwrap();
        let l = lin(&a, &b).extract(m, r).unwrap();
        let rhs = lin(&a.extract(m, r).unwrap(), &b.extract(m, r).unwrap());
        prop_assert!(agree(&l, &rhs));
    }

    #[test]
    fn extract_undoes_substitution(f in ring().prop_flat_map(|r| series_in(r, 40)), m in 1u64..12) {
        let back = f.substitute_power(m).unwrap().extract(m, 0).unwrap();
        prop_assert_eq!(back.precision(), f.precision());
        prop_assert!(agree(&back, &f));
    }
}

#[test]
fn extract_precision_formula() {
    let f = Series::from_i64(CoeffRing::Exact, 0, &[1; 23], 23);
    for (m, r) in [(5u64, 0i64), (5, 3), (5, 4), (2, 1), (10, 9)] {
        let want = (23 - 1 - r).div_euclid(m as i64) + 1;
        assert_eq!(f.extract(m, r).unwrap().precision(), want, "m={m} r={r}");
    }
}
