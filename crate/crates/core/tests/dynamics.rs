use nonsing_core::dynamics::*;
use nonsing_core::measure::fixtures::{fair, kosloff, perturbed, step};
use nonsing_core::measure::{Block, BlockRule, Factor, ProductMeasure, TailDescriptor};
use nonsing_core::BigIndex;
use proptest::prelude::*;

const H_09: f64 = 0.894_427_190_999_915_878_563_669_467_49;
const D_09: f64 = 0.211_145_618_000_168_242_872_661_065_02;

fn window(lo: i64, hi: i64) -> Window {
    Window::from_i64(lo, hi).unwrap()
}

fn path(lo: i64, bits: &[u8]) -> SamplePath {
    SamplePath::from_symbols(lo, bits.to_vec()).unwrap()
}

/// `a` below 0 and `b` from 0 on.
fn two_sided_step(a: f64, b: f64) -> ProductMeasure {
    let (a, b) = (Factor::new(a).unwrap(), Factor::new(b).unwrap());
    let blocks = vec![
        Block { lo: (-1).into(), hi: (-1).into(), factor: a },
        Block { lo: 0.into(), hi: 0.into(), factor: b },
    ];
    ProductMeasure::new(BlockRule::new(blocks, b, TailDescriptor::EventuallyConstant(a)).unwrap())
}

#[test]
fn fair_marginals() {
    let paths = sample_paths(&fair(), window(0, 99), 11, 100_000).unwrap();
    let sigma = (0.25f64 / 100_000.0).sqrt();
    for k in 0..100 {
        let zeros = paths.iter().filter(|w| w.symbol(k) == Some(0)).count() as f64;
        assert!((zeros / 1e5 - 0.5).abs() <= 4.0 * sigma, "coordinate {k}");
    }
}

#[test]
fn kosloff_marginal_at_minus_one() {
    let p = kosloff(2).unwrap();
    let count = 50_000;
    let paths = sample_paths(&p, window(-3, 0), 5, count).unwrap();
    let zeros = paths.iter().filter(|w| w.symbol(-1) == Some(0)).count() as f64 / count as f64;
    let sigma = (2.0 / 9.0 / count as f64).sqrt();
    assert!((zeros - 2.0 / 3.0).abs() <= 4.0 * sigma, "{zeros}");
}

#[test]
fn sampling_is_reproducible() {
    let p = kosloff(2).unwrap();
    let a = sample_paths(&p, window(-50, 10), 42, 1).unwrap();
    let b = sample_paths(&p, window(-50, 10), 42, 1).unwrap();
    assert_eq!(a, b);
    let c = sample_paths(&p, window(-50, 10), 43, 1).unwrap();
    assert_ne!(a[0].symbols, c[0].symbols);
    assert!(sample_paths(&p, window(-50, 10), 42, 0).is_err());
    assert!(matches!(
        Window::new(&BigIndex::from(0), &BigIndex::from(1i64 << 40)),
        Err(DynamicsError::WindowTooLarge { .. })
    ));
}

#[test]
fn rn_examples() {
    let s = step(0.9);
    let w0 = path(-3, &[0, 1, 1, 0, 1, 0, 0]);
    assert_eq!(rn_derivative_windowed(&s, 0, &w0).unwrap(), 0.0);
    assert!((rn_derivative_windowed(&s, 1, &w0).unwrap().exp() - 1.8).abs() < 1e-14);
    let w1 = path(-3, &[0, 1, 1, 1, 1, 0, 0]);
    assert!((rn_derivative_windowed(&s, 1, &w1).unwrap().exp() - 0.2).abs() < 1e-14);
    // a zero-probability observation is an error, a vanishing numerator is 0
    let deg = step(1.0);
    let w = path(-2, &[0, 1, 0]);
    assert!(matches!(
        rn_derivative_windowed(&deg, -1, &w),
        Err(DynamicsError::ZeroDensity { at: -1, bit: 1 })
    ));
    let w = path(-2, &[0, 0, 1]);
    assert_eq!(rn_derivative_windowed(&deg, 1, &w).unwrap(), f64::NEG_INFINITY);
}

fn brute_force_mean(p: &ProductMeasure, n: i64, lo: i64, len: usize) -> f64 {
    let mut total = 0.0;
    for mask in 0u32..(1 << len) {
        let bits: Vec<u8> = (0..len).map(|i| ((mask >> i) & 1) as u8).collect();
        let weight: f64 = bits
            .iter()
            .enumerate()
            .map(|(i, &b)| p.factor_at(&BigIndex::from(lo + i as i64)).prob(b == 1))
            .product();
        total += weight * rn_derivative_windowed(p, n, &path(lo, &bits)).unwrap().exp();
    }
    total
}

#[test]
fn expectation_by_enumeration() {
    assert!((brute_force_mean(&step(0.9), 3, -3, 7) - 1.0).abs() < 1e-12);
    assert!((brute_force_mean(&perturbed(0.9), -2, -4, 8) - 1.0).abs() < 1e-12);
    assert!((brute_force_mean(&kosloff(2).unwrap(), 3, -12, 16) - 1.0).abs() < 1e-12);
}

#[test]
fn mean_rn_checks() {
    let r = mean_rn_check(&fair(), 0, window(-5, 5), 1, 100).unwrap();
    assert_eq!(r.factorized, 1.0);
    assert_eq!(r.monte_carlo.mean, 1.0);
    let r = mean_rn_check(&step(0.9), 3, window(-10, 10), 7, 100_000).unwrap();
    assert_eq!(r.factorized, 1.0);
    assert!(r.within_4_sigma, "{r:?}");
    assert_eq!(r.outside_window_mass, Some(0.0));
    let r = mean_rn_check(&kosloff(2).unwrap(), 3, window(-400, 10), 7, 2_000).unwrap();
    assert_eq!(r.factorized, 1.0);
}

#[test]
fn sqrt_rn_estimates() {
    let r = sqrt_rn_estimator(&step(0.9), 0, window(-5, 5), 3, 100).unwrap();
    assert_eq!((r.monte_carlo.mean, r.monte_carlo.std_err), (1.0, 0.0));
    let r = sqrt_rn_estimator(&step(0.9), 5, window(-10, 10), 3, 100_000).unwrap();
    assert!((r.target - 0.572_433_402_239_946).abs() < 1e-14);
    assert!(r.within_4_sigma, "{r:?}");
    let r = sqrt_rn_estimator(&perturbed(0.9), 1, window(-10, 10), 3, 100_000).unwrap();
    assert!((r.target - H_09 * H_09).abs() < 1e-14);
    assert!(r.within_4_sigma, "{r:?}");
}

#[test]
fn zero_type_profiles() {
    let half = BigIndex::from(1000);
    for row in zero_type_profile(&fair(), &[1, 5, 20], &half).unwrap() {
        assert_eq!((row.distance, row.rho_upper), (0.0, 1.0));
    }
    let d = Factor::new(0.9).unwrap().distance_term(&Factor::FAIR);
    assert!((d - D_09).abs() < 1e-15);
    let rows = zero_type_profile(&step(0.9), &[1, 2, 4, 8], &half).unwrap();
    for row in rows {
        assert_eq!(row.kind, DistanceKind::Exact);
        assert_eq!(row.distance, row.n as f64 * d);
    }
    let k = kosloff(2).unwrap();
    let ns: Vec<i64> = (1..=10).collect();
    let rows = zero_type_profile(&k, &ns, &half).unwrap();
    for row in &rows {
        // every mismatch lies in [−362 − n, 0]
        let naive: f64 = (-500i64..=100)
            .map(|j| {
                let j = BigIndex::from(j);
                k.factor_at(&j).distance_term(&k.factor_at(&(&j - row.n)))
            })
            .sum();
        assert_eq!(row.kind, DistanceKind::Exact);
        assert!((row.distance - naive).abs() < 1e-10, "{row:?} vs {naive}");
        assert!(row.tail_bound < 1e-100);
    }
}

#[test]
fn power_rn_examples() {
    let s = step(0.9);
    let w = path(-5, &[0; 11]);
    let one = PowerSpec::new(vec![1]).unwrap();
    assert_eq!(
        power_rn(&s, &one, 3, std::slice::from_ref(&w)).unwrap(),
        rn_derivative_windowed(&s, 3, &w).unwrap()
    );
    let pm = PowerSpec::new(vec![1, -1]).unwrap();
    assert_eq!(power_rn(&s, &pm, 0, &[w.clone(), w.clone()]).unwrap(), 0.0);
    let spec = PowerSpec::new(vec![1, 2]).unwrap();
    let v = power_rn(&s, &spec, 1, &[w.clone(), w.clone()]).unwrap().exp();
    assert!((v - 5.832).abs() < 1e-12);
    assert!(PowerSpec::new(vec![]).is_err());
    assert!(PowerSpec::new(vec![1, 0]).is_err());
    assert!(power_rn(&s, &spec, 1, &[w]).is_err());
}

#[test]
fn conservativity_examples() {
    let spec = PowerSpec::new(vec![1]).unwrap();
    let paths = sample_paths(&fair(), window(-20, 20), 1, 1).unwrap();
    let r = conservativity_sums(&fair(), &spec, &paths, 50).unwrap();
    assert_eq!(r.partial_sums.last(), Some(&50.0));
    assert!(r.level_bounds.is_empty());

    let k = kosloff(2).unwrap();
    let w = covering_window(&k, 400).unwrap();
    let paths = sample_paths(&k, w, 9, 1).unwrap();
    let r = conservativity_sums(&k, &spec, &paths, 400).unwrap();
    assert!(r.partial_sums.windows(2).all(|p| p[0] <= p[1]));
    let b1 = &r.level_bounds[0];
    // (4 − 3)·2^−4
    assert_eq!((b1.log2_bound, b1.at_least_half), (-4.0, false));
    assert!(r.level_bounds[1].at_least_half);
    assert_eq!(r.pointwise[0].checked, 2);
    assert_eq!(r.pointwise[1].checked, 400 - 362 + 1);
}

fn binomial_cdf(n: u32, j: i64) -> f64 {
    (0..=j.min(n as i64))
        .map(|i| {
            let mut c = 1.0;
            for t in 0..i {
                c = c * (n as f64 - t as f64) / (t as f64 + 1.0);
            }
            c * 0.5f64.powi(n as i32)
        })
        .sum()
}

#[test]
fn rn_tends_to_zero_for_step() {
    let count = 20_000;
    let ns: Vec<i64> = (1..=20).collect();
    let rows = rn_tends_zero_diagnostic(&step(0.9), &ns, window(-25, 25), 17, count).unwrap();
    let eps = 4.0 * (0.25 / count as f64).sqrt();
    for row in &rows {
        let n = row.n as u32;
        // median = 1.8^j · 0.2^(n−j) with j ~ Bin(n, 1/2) the count of zeros
        let j = ((row.median.ln() - n as f64 * 0.2f64.ln()) / (9.0f64).ln()).round() as i64;
        assert!(binomial_cdf(n, j - 1) <= 0.5 + eps && binomial_cdf(n, j) >= 0.5 - eps, "{row:?}");
    }
    assert!(rows[19].median < rows[0].median);
    let again = rn_tends_zero_diagnostic(&step(0.9), &ns, window(-25, 25), 17, count).unwrap();
    assert_eq!(rows, again);
    for row in rn_tends_zero_diagnostic(&fair(), &[1, 7], window(-5, 5), 1, 100).unwrap() {
        assert!(row.deciles.iter().all(|&d| d == 1.0) && row.median == 1.0);
    }
}

#[test]
fn nearest_rank_convention() {
    let v = [1.0, 2.0, 3.0, 4.0];
    assert_eq!(nearest_rank(&v, 0.5), 2.0);
    assert_eq!(nearest_rank(&v, 0.51), 3.0);
    assert_eq!(nearest_rank(&v, 0.0), 1.0);
    assert_eq!(nearest_rank(&v, 1.0), 4.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn cocycle_identity(a in 0.05f64..0.95, b in 0.05f64..0.95, n in -5i64..=5, m in -5i64..=5,
                        bits in prop::collection::vec(0u8..2, 20)) {
        let p = two_sided_step(a, b);
        let w = path(-10, &bits);
        let lhs = rn_derivative_windowed(&p, n + m, &w).unwrap();
        let rhs = rn_derivative_windowed(&p, m, &w).unwrap()
            + rn_derivative_windowed(&p, n, &w.shifted(m)).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()), "{} vs {}", lhs, rhs);
    }

    #[test]
    fn power_rn_is_permutation_invariant(seed in 0u64..1000, l1 in 1i64..4, l2 in -3i64..0, n in 0i64..4) {
        let p = step(0.7);
        let paths = sample_paths(&p, window(-20, 20), seed, 2).unwrap();
        let a = power_rn(&p, &PowerSpec::new(vec![l1, l2]).unwrap(), n, &paths).unwrap();
        let rev: Vec<_> = paths.iter().rev().cloned().collect();
        let b = power_rn(&p, &PowerSpec::new(vec![l2, l1]).unwrap(), n, &rev).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()));
    }

    #[test]
    fn factorized_mean_is_exactly_one(p0 in 0.0f64..=1.0, n in -50i64..50) {
        let r = mean_rn_check(&step(p0.max(1e-3)), n, window(-60, 60), 1, 1).unwrap();
        prop_assert_eq!(r.factorized, 1.0);
    }
}
