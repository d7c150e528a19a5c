use nonsing_core::measure::fixtures::{alternating, fair, kosloff, no_limit, perturbed, step};
use nonsing_core::measure::*;
use nonsing_core::numeric::ExactSum;
use nonsing_core::BigIndex;
use proptest::prelude::*;

// √0.45 + √0.05 and 2(1 − h), evaluated to 30 digits independently
const H_09: f64 = 0.894_427_190_999_915_878_563_669_467_49;
const D_09: f64 = 0.211_145_618_000_168_242_872_661_065_02;
const NEG_LOG_H_09: f64 = 0.111_571_775_657_104_877_883_219_404_1;

fn idx(k: i64) -> BigIndex {
    BigIndex::from(k)
}

fn naive_distance(p: &ProductMeasure, q: &ProductMeasure, lo: i64, hi: i64) -> f64 {
    let mut s = ExactSum::new();
    for k in lo..=hi {
        s.add(p.factor_at(&idx(k)).distance_term(&q.factor_at(&idx(k))));
    }
    s.value()
}

#[test]
fn factor_at_examples() {
    let big = "1".to_string() + &"0".repeat(300);
    assert_eq!(fair().factor_at(&big.parse().unwrap()), Factor::FAIR);
    let k = kosloff(2).unwrap();
    assert_eq!(k.factor_at(&idx(5)), Factor::FAIR);
    let f = k.factor_at(&idx(-1));
    assert!((f.p0() - 2.0 / 3.0).abs() < 1e-16 && (f.p1() - 1.0 / 3.0).abs() < 1e-16);
}

#[test]
fn kosloff_block_layout() {
    let k = kosloff(2).unwrap();
    let two_thirds = k.factor_at(&idx(-1));
    assert_eq!(k.factor_at(&idx(-2)), two_thirds);
    for j in -6..=-3 {
        assert_eq!(k.factor_at(&idx(j)), Factor::FAIR, "{j}");
    }
    // e^(1/32)/(1 + e^(1/32)) = 0.507811864279204432601...
    let lam2 = k.factor_at(&idx(-7));
    assert!((lam2.p0() - 0.507_811_864_279_204_4).abs() < 1e-16);
    assert_eq!(k.factor_at(&idx(-361)), lam2);
    assert_eq!(k.factor_at(&idx(-362)), Factor::FAIR);
    // every index ≤ −1 lies in exactly one block
    let blocks = k.rule().blocks();
    for w in blocks.windows(2) {
        assert_eq!(&w[0].hi + 1, w[1].lo);
    }
    assert_eq!(blocks.last().unwrap().hi, BigIndex::from(-1));
}

#[test]
fn factor_examples() {
    let p = Factor::new(0.9).unwrap();
    assert!((factor_affinity(&p, &Factor::FAIR) - H_09).abs() < 1e-15);
    assert!((factor_distance_term(&p, &Factor::FAIR) - D_09).abs() < 1e-15);
    let (a, b) = (Factor::new(1.0).unwrap(), Factor::new(0.0).unwrap());
    assert_eq!(factor_affinity(&a, &b), 0.0);
    assert_eq!(factor_distance_term(&a, &b), 2.0);
}

#[test]
fn truncated_distance_examples() {
    assert_eq!(kakutani_distance_truncated(&fair(), &fair(), &idx(50)).unwrap(), 0.0);
    let d = kakutani_distance_truncated(&perturbed(0.9), &fair(), &idx(5)).unwrap();
    assert!((d - D_09).abs() < 1e-15);
    let s = step(0.9);
    let d = kakutani_distance_truncated(&s, &s.shift_by(3), &idx(10)).unwrap();
    assert!((d - 3.0 * D_09).abs() < 1e-14);
    assert!(matches!(
        kakutani_distance_truncated(&s, &s, &idx(-1)),
        Err(MeasureError::NegativeWindow(_))
    ));
}

#[test]
fn budget_is_enforced() {
    let p = no_limit(0.3, 0.7);
    let q = p.shift_by(1);
    let r = nonsing_core::measure::paired_segments(&p, &q, &idx(-5000), &idx(0), 10);
    assert!(r.is_err());
}

#[test]
fn exact_distance_examples() {
    let s = step(0.9);
    assert_eq!(
        kakutani_distance_exact(&s, &s).unwrap(),
        ExactDistance::Finite { value: 0.0, tail_bound: 0.0 }
    );
    match kakutani_distance_exact(&s, &fair()).unwrap() {
        ExactDistance::Diverges { witness: DivergenceWitness::NegativeTail { per_term, .. } } => {
            assert!((per_term - D_09).abs() < 1e-15)
        }
        other => panic!("{other:?}"),
    }
    match kakutani_distance_exact(&perturbed(0.9), &fair()).unwrap() {
        ExactDistance::Finite { value, tail_bound } => {
            assert!((value - D_09).abs() < 1e-15);
            assert_eq!(tail_bound, 0.0);
        }
        other => panic!("{other:?}"),
    }
    // unrelated tails are reported, not guessed
    assert!(matches!(
        kakutani_distance_exact(&no_limit(0.3, 0.7), &kosloff(1).unwrap()),
        Err(MeasureError::Undecidable(_))
    ));
}

#[test]
fn affinity_examples() {
    assert_eq!(hellinger_affinity(&step(0.9), &step(0.9), &idx(100)).unwrap(), 1.0);
    let h = hellinger_affinity(&perturbed(0.9), &fair(), &idx(0)).unwrap();
    assert!((h - H_09).abs() < 1e-15);
    let s = step(0.9);
    for n in 1..=8 {
        let h = hellinger_affinity(&s, &s.shift_by(n), &idx(1000)).unwrap();
        assert!((h - H_09.powi(n as i32)).abs() < 1e-14, "{n}");
    }
    // 0.894427191^5 = 0.572433402239946...
    let h5 = hellinger_affinity(&s, &s.shift_by(5), &idx(1000)).unwrap();
    assert!((h5 - 0.572_433_402_239_946).abs() < 1e-14);
}

#[test]
fn proportionality_examples() {
    let r = proportionality_check(&step(0.9), &step(0.9), &idx(10)).unwrap();
    assert_eq!((r.d, r.neg_log_rho, r.c), (0.0, 0.0, 1.0));
    assert!(r.lower_holds && r.upper_holds);

    let r = proportionality_check(&perturbed(0.9), &fair(), &idx(10)).unwrap();
    assert!((r.d - D_09).abs() < 1e-15);
    assert!((r.neg_log_rho - NEG_LOG_H_09).abs() < 1e-15);
    assert!((r.c - H_09).abs() < 1e-15);
    assert!(r.lower_holds && r.upper_holds);
    // d/(2c) = 0.118033988749894...
    assert!((r.d / (2.0 * r.c) - 0.118_033_988_749_894_85).abs() < 1e-14);

    let s = step(0.9);
    let r = proportionality_check(&s, &s.shift_by(5), &idx(10)).unwrap();
    assert!((r.d - 5.0 * D_09).abs() < 1e-14);
    assert!((r.neg_log_rho - 5.0 * NEG_LOG_H_09).abs() < 1e-14);

    let one = perturbed(1.0);
    let zero = perturbed(0.0);
    assert!(matches!(
        proportionality_check(&one, &zero, &idx(3)),
        Err(MeasureError::DegenerateFactor(_))
    ));
}

#[test]
fn classifier_fixtures() {
    match classify(&fair()) {
        Classification::EquivalentInvariant { q, distance, tail_bound } => {
            assert_eq!(q.factor_at(&idx(-7)), Factor::FAIR);
            assert_eq!((distance, tail_bound), (0.0, 0.0));
        }
        other => panic!("{other:?}"),
    }
    match classify(&perturbed(0.9)) {
        Classification::EquivalentInvariant { distance, .. } => {
            assert!((distance - D_09).abs() < 1e-9)
        }
        other => panic!("{other:?}"),
    }
    assert_eq!(classify(&step(0.9)).label(), "ZeroType(SingularToLimitProduct)");
    match classify(&alternating(0.3, 0.7)) {
        Classification::NotNonsingular { witness: DivergenceWitness::Periodic { per_period, .. } } => {
            // 2 − 4√0.21 per mismatched coordinate, two per period
            assert!((per_period - 2.0 * 0.166_969_722_017_663_6).abs() < 1e-14, "{per_period}");
        }
        other => panic!("{other:?}"),
    }
    assert_eq!(classify(&no_limit(0.3, 0.7)).label(), "ZeroType(NoLimit)");
    assert_eq!(classify(&perturbed(1.0)).label(), "EquivalentInvariant");
    assert_eq!(classify(&step(1.0)).label(), "Degenerate");
}

#[test]
fn no_limit_fixture_is_certified_nonsingular() {
    let p = no_limit(0.3, 0.7);
    match kakutani_distance_exact(&p, &p.shift_by(1)).unwrap() {
        ExactDistance::Finite { value, tail_bound } => {
            assert!(value.is_finite() && value > 0.0);
            assert!(tail_bound < 1e-2, "{tail_bound}");
        }
        other => panic!("{other:?}"),
    }
    // and it is singular to either constant product
    assert!(!kakutani_distance_exact(&p, &ProductMeasure::constant(Factor::new(0.3).unwrap()))
        .unwrap()
        .is_finite());
}

#[test]
fn kosloff_measures_are_nonsingular() {
    for levels in 1..=3 {
        let k = kosloff(levels).unwrap();
        for n in [1i64, 2, 7, 64] {
            match kakutani_distance_exact(&k, &k.shift_by(n)).unwrap() {
                ExactDistance::Finite { value, tail_bound } => {
                    assert!(value.is_finite() && tail_bound.is_finite())
                }
                other => panic!("{levels} {n} {other:?}"),
            }
        }
    }
}

#[test]
fn kosloff_classification() {
    // with minimal n_t the deviations from the fair coin are summable
    for levels in 1..=3 {
        match classify(&kosloff(levels).unwrap()) {
            Classification::EquivalentInvariant { distance, tail_bound, .. } => {
                assert!(distance > 0.0 && distance < 1.0, "{distance}");
                assert!(tail_bound < 0.1);
            }
            other => panic!("{other:?}"),
        }
    }
}

#[test]
fn exact_affinity_certificates() {
    match hellinger_affinity_exact(&perturbed(0.9), &fair()).unwrap() {
        AffinityCertificate::Positive { lower, upper } => {
            assert!((lower - H_09).abs() < 1e-15 && (upper - H_09).abs() < 1e-15)
        }
        other => panic!("{other:?}"),
    }
    assert!(matches!(
        hellinger_affinity_exact(&step(0.9), &fair()).unwrap(),
        AffinityCertificate::Zero { .. }
    ));
    assert!(matches!(
        hellinger_affinity_exact(&perturbed(1.0), &perturbed(0.0)).unwrap(),
        AffinityCertificate::SingularCoordinate { .. }
    ));
}

// Random piecewise-constant rules with constant, periodic or excursion tails.
fn arb_factor() -> impl Strategy<Value = Factor> {
    (0.02f64..0.98).prop_map(|p| Factor::new(p).unwrap())
}

fn arb_measure() -> impl Strategy<Value = ProductMeasure> {
    let tail = prop_oneof![
        arb_factor().prop_map(TailDescriptor::EventuallyConstant),
        (arb_factor(), arb_factor(), 1u64..4, 0u64..3, 1u64..4).prop_filter_map(
            "distinct accumulation points",
            |(low, high, pb, rb, g)| {
                (low != high).then_some(TailDescriptor::TwoAccumulationPoints(Excursions {
                    low,
                    high,
                    plateau_base: pb,
                    ramp_base: rb,
                    growth: g,
                }))
            }
        ),
    ];
    (
        -60i64..60,
        prop::collection::vec((1i64..40, arb_factor()), 1..8),
        arb_factor(),
        tail,
    )
        .prop_map(|(start, lens, pos, tail)| {
            let mut lo = start;
            let blocks = lens
                .into_iter()
                .map(|(len, factor)| {
                    let b = Block { lo: lo.into(), hi: (lo + len - 1).into(), factor };
                    lo += len;
                    b
                })
                .collect();
            ProductMeasure::new(BlockRule::new(blocks, pos, tail).unwrap())
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn block_sweep_equals_naive_sum(p in arb_measure(), n in 0i64..=1000, s in -100i64..=100) {
        let q = p.shift_by(s);
        let fast = kakutani_distance_truncated(&p, &q, &idx(n)).unwrap();
        prop_assert_eq!(fast, naive_distance(&p, &q, -n, n));
    }

    #[test]
    fn shift_consistency(p in arb_measure(), n in -100i64..=100, k in -500i64..500) {
        prop_assert_eq!(p.shift_by(n).factor_at(&idx(k)), p.factor_at(&idx(k - n)));
        prop_assert_eq!(p.shift_by(n).shift_by(-n), p.clone());
    }

    #[test]
    fn symmetric_and_monotone(p in arb_measure(), q in arb_measure(), n in 0i64..300) {
        let d = kakutani_distance_truncated(&p, &q, &idx(n)).unwrap();
        prop_assert_eq!(d, kakutani_distance_truncated(&q, &p, &idx(n)).unwrap());
        prop_assert!(d <= kakutani_distance_truncated(&p, &q, &idx(n + 1)).unwrap());
        let r = hellinger_affinity(&p, &q, &idx(n)).unwrap();
        prop_assert!(r >= hellinger_affinity(&p, &q, &idx(n + 1)).unwrap());
        prop_assert!((0.0..=1.0).contains(&r));
    }

    #[test]
    fn proportionality_bounds_hold(p in arb_measure(), s in -20i64..20, n in 0i64..200) {
        let r = proportionality_check(&p, &p.shift_by(s), &idx(n)).unwrap();
        prop_assert!(r.lower_holds && r.upper_holds, "{:?}", r);
    }

    #[test]
    fn classify_is_swap_invariant(p in arb_measure()) {
        prop_assert_eq!(classify(&p).label(), classify(&p.swapped()).label());
    }

    #[test]
    fn exact_distance_encloses_truncations(p in arb_measure(), s in -6i64..6) {
        let q = p.shift_by(s);
        match kakutani_distance_exact(&p, &q) {
            Ok(ExactDistance::Finite { value, tail_bound }) => {
                for n in [10i64, 100, 1000] {
                    let dn = kakutani_distance_truncated(&p, &q, &idx(n)).unwrap();
                    prop_assert!(dn <= value + tail_bound + 1e-12, "{} > {} + {}", dn, value, tail_bound);
                }
            }
            Ok(ExactDistance::Diverges { .. }) | Err(MeasureError::Undecidable(_)) => {}
            Err(e) => prop_assert!(false, "{}", e),
        }
    }

    #[test]
    fn certificates_coincide(p in arb_measure(), s in -6i64..6) {
        let q = p.shift_by(s);
        let d = kakutani_distance_exact(&p, &q);
        let rho = hellinger_affinity_exact(&p, &q);
        match (d, rho) {
            (Ok(ExactDistance::Diverges { .. }), Ok(AffinityCertificate::Zero { .. })) => {}
            (Ok(ExactDistance::Finite { .. }), Ok(AffinityCertificate::Positive { lower, upper })) => {
                prop_assert!(0.0 < lower && lower <= upper && upper <= 1.0);
            }
            (Err(MeasureError::Undecidable(_)), Err(MeasureError::Undecidable(_))) => {}
            (a, b) => prop_assert!(false, "{:?} vs {:?}", a, b),
        }
    }
}
