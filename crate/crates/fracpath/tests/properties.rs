//! Property-based tests of the structural invariants: covariance symmetry
//! and scaling, payoff convexity and left-derivative consistency, linearity
//! of the integral operators, and grid round-trips.

use proptest::prelude::*;

use fracpath::fbm::{covariance, sample_fbm, HurstParam, SampleMethod, SeedSpec};
use fracpath::frac_calc::{rl_derivative_left, rl_integral_left};
use fracpath::grid::{SamplePath, TimeGrid};
use fracpath::path_model::ConvexPayoff;
use fracpath::riemann::{tagged_sum, Tag};

fn hurst() -> impl Strategy<Value = HurstParam> {
    (0.05f64..0.95).prop_map(|h| HurstParam::new(h).unwrap())
}

/// Any convex payoff the library can build, with parameters in a hedging-
/// relevant range.
fn payoff() -> impl Strategy<Value = ConvexPayoff> {
    prop_oneof![
        (-3.0f64..3.0, -2.0f64..2.0)
            .prop_map(|(slope, intercept)| ConvexPayoff::Affine { slope, intercept }),
        (0.0f64..4.0, -2.0f64..2.0, -2.0f64..2.0)
            .prop_map(|(a, b, c)| ConvexPayoff::quadratic(a, b, c).unwrap()),
        (0.1f64..3.0).prop_map(|strike| ConvexPayoff::Call { strike }),
        (0.1f64..3.0).prop_map(|strike| ConvexPayoff::Put { strike }),
        (-2.0f64..2.0).prop_map(|center| ConvexPayoff::AbsShift { center }),
        (
            proptest::collection::vec(-2.0f64..2.0, 1..5),
            proptest::collection::vec(-3.0f64..3.0, 2..6),
            -1.0f64..1.0,
        )
            .prop_filter_map("knot/slope shapes must match", |(mut knots, mut slopes, v)| {
                knots.sort_by(f64::total_cmp);
                knots.dedup_by(|a, b| (*a - *b).abs() < 1e-6);
                slopes.sort_by(f64::total_cmp);
                slopes.truncate(knots.len() + 1);
                if slopes.len() != knots.len() + 1 {
                    return None;
                }
                ConvexPayoff::piecewise_linear(knots, slopes, v).ok()
            }),
    ]
}

proptest! {
    #[test]
    fn covariance_is_symmetric_and_diagonal_scales(
        h in hurst(),
        s in 0.0f64..2.0,
        t in 0.0f64..2.0,
    ) {
        let cst = covariance(s, t, h).unwrap();
        let cts = covariance(t, s, h).unwrap();
        prop_assert!((cst - cts).abs() <= 1e-12 * cst.abs().max(1.0));
        let var_t = covariance(t, t, h).unwrap();
        prop_assert!((var_t - t.powf(2.0 * h.value())).abs() <= 1e-12 * var_t.max(1.0));
        // Cauchy-Schwarz in the Gaussian law
        let var_s = covariance(s, s, h).unwrap();
        prop_assert!(cst.abs() <= (var_s * var_t).sqrt() + 1e-12);
    }

    #[test]
    fn payoffs_are_midpoint_convex(f in payoff(), x in -4.0f64..4.0, y in -4.0f64..4.0) {
        let mid = f.eval(0.5 * (x + y));
        let chord = 0.5 * (f.eval(x) + f.eval(y));
        prop_assert!(mid <= chord + 1e-9 * chord.abs().max(1.0), "mid {mid} chord {chord}");
    }

    #[test]
    fn left_derivative_is_monotone_and_subgradient(
        f in payoff(),
        x in -4.0f64..4.0,
        y in -4.0f64..4.0,
    ) {
        let (lo, hi) = if x <= y { (x, y) } else { (y, x) };
        prop_assert!(f.left_derivative(lo) <= f.left_derivative(hi) + 1e-12);
        // f'_- is a subgradient of a convex function at every point
        let support = f.eval(x) + f.left_derivative(x) * (y - x);
        prop_assert!(f.eval(y) >= support - 1e-9 * support.abs().max(1.0));
    }

    #[test]
    fn tagged_sums_are_bilinear(
        phi in proptest::collection::vec(-5.0f64..5.0, 2..40),
        a in -3.0f64..3.0,
        b in -3.0f64..3.0,
    ) {
        let n = phi.len();
        let g1: Vec<f64> = (0..n).map(|i| ((i * 7 + 3) % 11) as f64 / 11.0).collect();
        let g2: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin()).collect();
        let combo: Vec<f64> = g1.iter().zip(&g2).map(|(u, v)| a * u + b * v).collect();
        for tag in [Tag::Left, Tag::Midpoint] {
            let lhs = tagged_sum(&phi, &combo, tag);
            let rhs = a * tagged_sum(&phi, &g1, tag) + b * tagged_sum(&phi, &g2, tag);
            prop_assert!((lhs - rhs).abs() <= 1e-9 * rhs.abs().max(1.0));

            let phi2: Vec<f64> = phi.iter().map(|v| a * v).collect();
            let lhs = tagged_sum(&phi2, &g1, tag);
            let rhs = a * tagged_sum(&phi, &g1, tag);
            prop_assert!((lhs - rhs).abs() <= 1e-9 * rhs.abs().max(1.0));
        }
    }

    #[test]
    fn fractional_operators_are_linear(
        a in -2.0f64..2.0,
        b in -2.0f64..2.0,
        alpha in 0.1f64..0.9,
        freq in 0.5f64..4.0,
    ) {
        let grid = TimeGrid::new(1.0, 128).unwrap();
        let f1 = SamplePath::from_fn(grid, |t| (freq * t).sin());
        let f2 = SamplePath::from_fn(grid, |t| t * t);
        let combo = SamplePath::new(
            grid,
            f1.values().iter().zip(f2.values()).map(|(u, v)| a * u + b * v).collect(),
        )
        .unwrap();
        let x = 0.75;
        let lhs = rl_integral_left(&combo, alpha, x).unwrap();
        let rhs = a * rl_integral_left(&f1, alpha, x).unwrap()
            + b * rl_integral_left(&f2, alpha, x).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-9 * rhs.abs().max(1.0));
        let lhs = rl_derivative_left(&combo, alpha, x).unwrap();
        let rhs = a * rl_derivative_left(&f1, alpha, x).unwrap()
            + b * rl_derivative_left(&f2, alpha, x).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-8 * rhs.abs().max(1.0));
    }

    #[test]
    fn grid_point_index_round_trip(n in 1usize..512, horizon in 0.1f64..10.0) {
        let grid = TimeGrid::new(horizon, n).unwrap();
        for i in [0, n / 2, n] {
            prop_assert_eq!(grid.index_of(grid.point(i)), Some(i));
        }
        prop_assert_eq!(grid.index_of(horizon * 1.5), None);
    }

    #[test]
    fn sampling_is_deterministic_in_the_seed(
        h in hurst(),
        seed in 0u64..u64::MAX,
        path_index in 0u64..1000,
    ) {
        let grid = TimeGrid::new(1.0, 32).unwrap();
        let a = sample_fbm(&grid, h, SeedSpec::new(seed, path_index), SampleMethod::Circulant)
            .unwrap();
        let b = sample_fbm(&grid, h, SeedSpec::new(seed, path_index), SampleMethod::Circulant)
            .unwrap();
        prop_assert_eq!(a.values(), b.values());
        prop_assert_eq!(a.value(0), 0.0);
        // a different path index decorrelates the stream
        let c = sample_fbm(
            &grid,
            h,
            SeedSpec::new(seed, path_index + 1),
            SampleMethod::Circulant,
        )
        .unwrap();
        prop_assert_ne!(a.values(), c.values());
    }
}
