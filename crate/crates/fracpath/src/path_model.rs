//! Derived processes of the model — geometric fBm S = e^B, the running
//! geometric-average functional G, the running arithmetic-average functional
//! X — plus convex payoffs with exact left derivatives and empirical
//! regularity estimators.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fbm::{FbmSampler, HurstParam, SampleMethod, SeedSpec};
use crate::grid::{SamplePath, TimeGrid};
use crate::stats::least_squares_slope;

/// Convex payoff with exact evaluation and exact left derivative.
///
/// A closed enumeration rather than user closures: the representation
/// identities need the exact left derivative at kinks, and finite
/// differencing a black-box closure at a kink is wrong by construction. The
/// `SmoothCustom` escape hatch takes the derivative analytically.
#[derive(Debug, Clone)]
pub enum ConvexPayoff {
    /// slope * x + intercept
    Affine { slope: f64, intercept: f64 },
    /// a x^2 + b x + c with a >= 0
    Quadratic { a: f64, b: f64, c: f64 },
    /// (x - strike)^+
    Call { strike: f64 },
    /// (strike - x)^+
    Put { strike: f64 },
    /// |x - center|
    AbsShift { center: f64 },
    /// Piecewise-linear convex function: slopes[k] on (knots[k-1], knots[k]),
    /// anchored by its value at knots[0].
    PiecewiseLinear {
        knots: Vec<f64>,
        slopes: Vec<f64>,
        anchor_value: f64,
    },
    /// Smooth convex function with an analytically supplied derivative.
    SmoothCustom { f: fn(f64) -> f64, df: fn(f64) -> f64 },
}

impl ConvexPayoff {
    pub fn identity() -> Self {
        ConvexPayoff::Affine { slope: 1.0, intercept: 0.0 }
    }

    pub fn quadratic(a: f64, b: f64, c: f64) -> Result<Self> {
        if a < 0.0 {
            return Err(Error::invalid("a", "quadratic payoff needs a >= 0 for convexity"));
        }
        Ok(ConvexPayoff::Quadratic { a, b, c })
    }

    pub fn piecewise_linear(knots: Vec<f64>, slopes: Vec<f64>, anchor_value: f64) -> Result<Self> {
        if knots.is_empty() || slopes.len() != knots.len() + 1 {
            return Err(Error::invalid(
                "slopes",
                "need one more slope than knots (slopes surround the knots)",
            ));
        }
        if knots.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("knots", "knots must be strictly increasing"));
        }
        if slopes.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::invalid("slopes", "slopes must be nondecreasing for convexity"));
        }
        Ok(ConvexPayoff::PiecewiseLinear { knots, slopes, anchor_value })
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self {
            ConvexPayoff::Affine { slope, intercept } => slope * x + intercept,
            ConvexPayoff::Quadratic { a, b, c } => (a * x + b) * x + c,
            ConvexPayoff::Call { strike } => (x - strike).max(0.0),
            ConvexPayoff::Put { strike } => (strike - x).max(0.0),
            ConvexPayoff::AbsShift { center } => (x - center).abs(),
            ConvexPayoff::PiecewiseLinear { knots, slopes, anchor_value } => {
                // integrate the slope function from the anchor knot to x
                let mut v = *anchor_value;
                if x >= knots[0] {
                    let mut prev = knots[0];
                    for (k, &knot) in knots.iter().enumerate().skip(1) {
                        if x < knot {
                            return v + slopes[k] * (x - prev);
                        }
                        v += slopes[k] * (knot - prev);
                        prev = knot;
                    }
                    v + slopes[knots.len()] * (x - prev)
                } else {
                    // knots[0] is the smallest knot, so only slopes[0] applies
                    v + slopes[0] * (x - knots[0])
                }
            }
            ConvexPayoff::SmoothCustom { f, .. } => f(x),
        }
    }

    /// Exact left derivative f'_-(x); at a kink this is the slope from the
    /// left, e.g. 0 for a call at its strike.
    pub fn left_derivative(&self, x: f64) -> f64 {
        match self {
            ConvexPayoff::Affine { slope, .. } => *slope,
            ConvexPayoff::Quadratic { a, b, .. } => 2.0 * a * x + b,
            ConvexPayoff::Call { strike } => {
                if x > *strike {
                    1.0
                } else {
                    0.0
                }
            }
            ConvexPayoff::Put { strike } => {
                if x <= *strike {
                    -1.0
                } else {
                    0.0
                }
            }
            ConvexPayoff::AbsShift { center } => {
                if x <= *center {
                    -1.0
                } else {
                    1.0
                }
            }
            ConvexPayoff::PiecewiseLinear { knots, slopes, .. } => {
                // slope of the segment immediately left of x
                let mut k = 0;
                while k < knots.len() && x > knots[k] {
                    k += 1;
                }
                slopes[k]
            }
            ConvexPayoff::SmoothCustom { df, .. } => df(x),
        }
    }

    /// Short label for reports and manifests.
    pub fn describe(&self) -> String {
        match self {
            ConvexPayoff::Affine { slope, intercept } => format!("affine({slope},{intercept})"),
            ConvexPayoff::Quadratic { a, b, c } => format!("quadratic({a},{b},{c})"),
            ConvexPayoff::Call { strike } => format!("call({strike})"),
            ConvexPayoff::Put { strike } => format!("put({strike})"),
            ConvexPayoff::AbsShift { center } => format!("abs_shift({center})"),
            ConvexPayoff::PiecewiseLinear { knots, .. } => {
                format!("piecewise_linear({} knots)", knots.len())
            }
            ConvexPayoff::SmoothCustom { .. } => "smooth_custom".to_string(),
        }
    }
}

/// Pointwise exponential: the geometric fBm price path S = e^B.
pub fn gfbm(b: &SamplePath) -> SamplePath {
    b.map(f64::exp)
}

/// Running geometric-average functional
/// G(t) = exp((1/T) * Quad(log s; 0..t)) * s(t)^{(T-t)/T}
/// with composite-trapezoid quadrature on the grid.
pub fn geometric_average_path(s: &SamplePath, horizon: f64) -> Result<SamplePath> {
    check_horizon(s, horizon)?;
    if s.values().iter().any(|&v| v <= 0.0) {
        return Err(Error::domain(
            "geometric average requires a strictly positive price path",
        ));
    }
    let log_s = s.map(f64::ln);
    let cum = log_s.running_trapezoid();
    let t_grid = s.grid();
    let values = (0..t_grid.n_points())
        .map(|i| {
            let t = t_grid.point(i);
            let w = (horizon - t) / horizon;
            (cum.value(i) / horizon + w * log_s.value(i)).exp()
        })
        .collect();
    SamplePath::new(*t_grid, values)
}

/// Running arithmetic-average functional
/// X(t) = ((T-t)/T) s(t) + (1/T) * Quad(s; 0..t).
pub fn arithmetic_average_path(s: &SamplePath, horizon: f64) -> Result<SamplePath> {
    check_horizon(s, horizon)?;
    let cum = s.running_trapezoid();
    let t_grid = s.grid();
    let values = (0..t_grid.n_points())
        .map(|i| {
            let t = t_grid.point(i);
            (horizon - t) / horizon * s.value(i) + cum.value(i) / horizon
        })
        .collect();
    SamplePath::new(*t_grid, values)
}

fn check_horizon(s: &SamplePath, horizon: f64) -> Result<()> {
    let g = s.grid().horizon();
    if (g - horizon).abs() > 1e-12 * horizon.abs().max(1.0) {
        return Err(Error::invalid(
            "horizon_T",
            format!("path grid spans {g}, averaging horizon is {horizon}"),
        ));
    }
    Ok(())
}

/// The full bundle (B, S, G, X) derived from one fBm path.
#[derive(Debug, Clone)]
pub struct AveragePathBundle {
    pub b_path: SamplePath,
    pub s_path: SamplePath,
    pub g_path: SamplePath,
    pub x_path: SamplePath,
    pub horizon: f64,
}

impl AveragePathBundle {
    pub fn from_fbm(b: SamplePath) -> Result<Self> {
        let horizon = b.grid().horizon();
        let s = gfbm(&b);
        let g = geometric_average_path(&s, horizon)?;
        let x = arithmetic_average_path(&s, horizon)?;
        Ok(AveragePathBundle {
            b_path: b,
            s_path: s,
            g_path: g,
            x_path: x,
            horizon,
        })
    }

    pub fn grid(&self) -> &TimeGrid {
        self.b_path.grid()
    }

    /// Bundle restricted to every `factor`-th grid point, with G and X
    /// recomputed on the coarser grid (they are quadrature functionals, not
    /// pointwise ones).
    pub fn subsample(&self, factor: usize) -> Result<Self> {
        AveragePathBundle::from_fbm(self.b_path.subsample(factor)?)
    }

    /// CSV export: header `t,B,S,G,X`.
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "t,B,S,G,X")?;
        let grid = self.grid();
        for i in 0..grid.n_points() {
            writeln!(
                w,
                "{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}",
                grid.point(i),
                self.b_path.value(i),
                self.s_path.value(i),
                self.g_path.value(i),
                self.x_path.value(i)
            )?;
        }
        Ok(())
    }
}

/// Result of the pathwise Hölder regression. `degenerate` marks constant
/// paths, for which the exponent is reported as +infinity.
#[derive(Debug, Clone, Copy)]
pub struct HolderEstimate {
    pub exponent: f64,
    pub degenerate: bool,
}

/// Estimate the Hölder exponent of a path: least-squares slope of
/// log sup |p(t+delta) - p(t)| against log delta over dyadic lags.
///
/// The sup is taken over a fixed set of 64 anchor points per lag. Taking it
/// over all pairs would multiply each lag's sup by an extreme-value factor
/// ~ sqrt(2 ln(n/k)) that varies with the lag and biases the slope downward;
/// a lag-independent anchor count makes that factor cancel in the regression.
pub fn holder_exponent_estimate(p: &SamplePath) -> Result<HolderEstimate> {
    let n = p.grid().n_steps();
    if n < 64 {
        return Err(Error::invalid("n_steps", "Hölder regression needs at least 64 steps"));
    }
    let v = p.values();
    let stride = (n / 64).max(1);
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for j in 0..7 {
        let k = 1usize << j;
        if k > n {
            break;
        }
        let mut sup: f64 = 0.0;
        let mut a = 0;
        while a + k <= n {
            sup = sup.max((v[a + k] - v[a]).abs());
            a += stride;
        }
        if sup > 0.0 {
            xs.push((k as f64).ln());
            ys.push(sup.ln());
        }
    }
    if xs.len() < 2 {
        return Ok(HolderEstimate {
            exponent: f64::INFINITY,
            degenerate: true,
        });
    }
    Ok(HolderEstimate {
        exponent: least_squares_slope(&xs, &ys),
        degenerate: false,
    })
}

/// Process selector for the increment-moment scaling study.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScalingProcess {
    Fbm,
    LogG,
    X,
}

impl std::str::FromStr for ScalingProcess {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fbm" => Ok(ScalingProcess::Fbm),
            "log_g" => Ok(ScalingProcess::LogG),
            "x" => Ok(ScalingProcess::X),
            other => Err(Error::invalid(
                "process",
                format!("unknown process '{other}' (expected fbm | log_g | x)"),
            )),
        }
    }
}

/// Monte Carlo regression slope of log E|Z(t+k dt) - Z(t)|^p against
/// log(k dt) over dyadic lags. For fBm and the derived averages the slope is
/// ~ p*H at small lags.
pub fn increment_moment_scaling(
    process: ScalingProcess,
    p: f64,
    h: HurstParam,
    n_paths: usize,
    grid: &TimeGrid,
    master_seed: u64,
) -> Result<f64> {
    if !(1.0..=4.0).contains(&p) {
        return Err(Error::invalid("p", "moment order must lie in [1, 4]"));
    }
    if n_paths < 1000 {
        return Err(Error::invalid("n_paths", "moment regression needs at least 1000 paths"));
    }
    let n = grid.n_steps();
    if n < 64 {
        return Err(Error::invalid("n_steps", "moment regression needs at least 64 steps"));
    }
    let lags: Vec<usize> = [1usize, 2, 4, 8, 16, 32]
        .into_iter()
        .filter(|&k| k <= n / 2)
        .collect();
    let sampler = FbmSampler::new(*grid, h, SampleMethod::Circulant)?;
    let horizon = grid.horizon();

    let sums: Vec<(Vec<f64>, Vec<usize>)> = (0..n_paths as u64)
        .into_par_iter()
        .map(|i| {
            let b = sampler.sample(SeedSpec::new(master_seed, i));
            let z = match process {
                ScalingProcess::Fbm => b,
                ScalingProcess::LogG => {
                    let s = gfbm(&b);
                    geometric_average_path(&s, horizon)
                        .expect("s is positive")
                        .map(f64::ln)
                }
                ScalingProcess::X => {
                    let s = gfbm(&b);
                    arithmetic_average_path(&s, horizon).expect("grid matches")
                }
            };
            let v = z.values();
            let mut sum = vec![0.0; lags.len()];
            let mut count = vec![0usize; lags.len()];
            for (li, &k) in lags.iter().enumerate() {
                for i in 0..=(n - k) {
                    sum[li] += (v[i + k] - v[i]).abs().powf(p);
                }
                count[li] = n - k + 1;
            }
            (sum, count)
        })
        .collect();

    let mut xs = Vec::with_capacity(lags.len());
    let mut ys = Vec::with_capacity(lags.len());
    for (li, &k) in lags.iter().enumerate() {
        let total: f64 = sums.iter().map(|(s, _)| s[li]).sum();
        let count: usize = sums.iter().map(|(_, c)| c[li]).sum();
        xs.push((k as f64 * grid.dt()).ln());
        ys.push((total / count as f64).ln());
    }
    Ok(least_squares_slope(&xs, &ys))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gfbm_is_pointwise_exponential() {
        let g = TimeGrid::new(1.0, 2).unwrap();
        let zero = SamplePath::new(g, vec![0.0; 3]).unwrap();
        assert!(gfbm(&zero).values().iter().all(|&v| v == 1.0));

        let p = SamplePath::new(g, vec![0.0, 2.0_f64.ln(), 0.0]).unwrap();
        let s = gfbm(&p);
        assert!((s.value(1) - 2.0).abs() < 1e-15);
        // log is the exact inverse
        let back = s.map(f64::ln);
        for i in 0..3 {
            assert!((back.value(i) - p.value(i)).abs() < 1e-15);
        }
    }

    #[test]
    fn averages_of_constant_paths_are_constant() {
        let g = TimeGrid::new(2.0, 16).unwrap();
        let s = SamplePath::from_fn(g, |_| 3.0);
        let gp = geometric_average_path(&s, 2.0).unwrap();
        let xp = arithmetic_average_path(&s, 2.0).unwrap();
        for i in 0..=16 {
            assert!((gp.value(i) - 3.0).abs() < 1e-13);
            assert!((xp.value(i) - 3.0).abs() < 1e-13);
        }
    }

    #[test]
    fn geometric_average_is_exact_for_exponential_price() {
        // s(u) = e^u: log s is linear so the trapezoid rule is exact and
        // G(1) = exp(int_0^1 u du) = e^{1/2}.
        let g = TimeGrid::new(1.0, 32).unwrap();
        let s = SamplePath::from_fn(g, f64::exp);
        let gp = geometric_average_path(&s, 1.0).unwrap();
        assert!((gp.value(32) - 0.5_f64.exp()).abs() < 1e-14);
        assert!((gp.value(0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn arithmetic_average_matches_quadrature_oracle() {
        // s(u) = u (positivity irrelevant for the quadrature itself):
        // X(1) = int_0^1 u du = 1/2, exact for the trapezoid rule.
        let g = TimeGrid::new(1.0, 16).unwrap();
        let s = SamplePath::from_fn(g, |t| t);
        let xp = arithmetic_average_path(&s, 1.0).unwrap();
        assert!((xp.value(16) - 0.5).abs() < 1e-15);
        assert_eq!(xp.value(0), s.value(0));
    }

    #[test]
    fn nonpositive_price_is_a_domain_error() {
        let g = TimeGrid::new(1.0, 4).unwrap();
        let s = SamplePath::new(g, vec![1.0, 0.5, 0.0, 0.5, 1.0]).unwrap();
        assert!(geometric_average_path(&s, 1.0).is_err());
    }

    #[test]
    fn quadrature_error_shrinks_at_second_order() {
        let horizon = 1.0;
        let smooth = |t: f64| (1.0 + t).sin().exp();
        let end_value = |n: usize| {
            let g = TimeGrid::new(horizon, n).unwrap();
            let s = SamplePath::from_fn(g, smooth);
            let gp = geometric_average_path(&s, horizon).unwrap();
            let xp = arithmetic_average_path(&s, horizon).unwrap();
            (gp.value(n), xp.value(n))
        };
        let (g1, x1) = end_value(64);
        let (g2, x2) = end_value(128);
        let (g4, x4) = end_value(256);
        // doubling the grid shrinks the change by ~4x (trapezoid order)
        assert!((g1 - g2).abs() / (g2 - g4).abs() > 3.0);
        assert!((x1 - x2).abs() / (x2 - x4).abs() > 3.0);
    }

    #[test]
    fn payoff_values_and_left_derivatives() {
        let call = ConvexPayoff::Call { strike: 1.0 };
        assert_eq!(call.eval(1.0), 0.0);
        assert_eq!(call.left_derivative(1.0), 0.0);
        assert_eq!(call.left_derivative(1.5), 1.0);

        let abs0 = ConvexPayoff::AbsShift { center: 0.0 };
        assert_eq!(abs0.eval(0.0), 0.0);
        assert_eq!(abs0.left_derivative(0.0), -1.0);

        let quad = ConvexPayoff::quadratic(1.0, 0.0, 0.0).unwrap();
        assert_eq!(quad.eval(3.0), 9.0);
        assert_eq!(quad.left_derivative(3.0), 6.0);

        let put = ConvexPayoff::Put { strike: 2.0 };
        assert_eq!(put.eval(1.0), 1.0);
        assert_eq!(put.left_derivative(2.0), -1.0);
        assert_eq!(put.left_derivative(2.5), 0.0);
    }

    #[test]
    fn quadratic_left_derivative_matches_central_difference() {
        let quad = ConvexPayoff::quadratic(0.7, -0.3, 2.0).unwrap();
        let h = 1e-5;
        for x in [-2.0, 0.0, 1.3, 4.0] {
            let fd = (quad.eval(x + h) - quad.eval(x - h)) / (2.0 * h);
            assert!((quad.left_derivative(x) - fd).abs() < 1e-9);
        }
    }

    #[test]
    fn piecewise_linear_payoff() {
        // hockey-stick with knots at 0 and 1, slopes -1, 0, 1, value 0 at x=0
        let f = ConvexPayoff::piecewise_linear(vec![0.0, 1.0], vec![-1.0, 0.0, 1.0], 0.0).unwrap();
        assert_eq!(f.eval(-2.0), 2.0);
        assert_eq!(f.eval(0.5), 0.0);
        assert_eq!(f.eval(3.0), 2.0);
        assert_eq!(f.left_derivative(-0.5), -1.0);
        assert_eq!(f.left_derivative(0.0), -1.0); // slope from the left at a knot
        assert_eq!(f.left_derivative(0.5), 0.0);
        assert_eq!(f.left_derivative(1.0), 0.0);
        assert_eq!(f.left_derivative(2.0), 1.0);

        assert!(ConvexPayoff::piecewise_linear(vec![0.0, 1.0], vec![1.0, 0.0, 1.0], 0.0).is_err());
        assert!(ConvexPayoff::quadratic(-1.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn bundle_invariants_hold_on_a_sampled_path() {
        let g = TimeGrid::new(1.0, 256).unwrap();
        let b = crate::fbm::sample_fbm(
            &g,
            HurstParam::new(0.7).unwrap(),
            SeedSpec::new(5, 0),
            SampleMethod::Circulant,
        )
        .unwrap();
        let bundle = AveragePathBundle::from_fbm(b).unwrap();
        for i in 0..=256 {
            assert_eq!(bundle.s_path.value(i), bundle.b_path.value(i).exp());
            assert!(bundle.s_path.value(i) > 0.0);
            assert!(bundle.g_path.value(i) > 0.0);
            assert!(bundle.x_path.value(i) > 0.0);
        }
        assert_eq!(bundle.g_path.value(0), bundle.s_path.value(0));
        assert_eq!(bundle.x_path.value(0), bundle.s_path.value(0));
    }

    #[test]
    fn holder_estimate_on_simple_paths() {
        let g = TimeGrid::new(1.0, 1024).unwrap();
        let lin = SamplePath::from_fn(g, |t| t);
        let est = holder_exponent_estimate(&lin).unwrap();
        assert!(!est.degenerate);
        assert!((est.exponent - 1.0).abs() < 0.05, "linear exponent {}", est.exponent);

        let flat = SamplePath::from_fn(g, |_| 2.5);
        let est = holder_exponent_estimate(&flat).unwrap();
        assert!(est.degenerate);
        assert!(est.exponent.is_infinite());

        let tiny = TimeGrid::new(1.0, 16).unwrap();
        assert!(holder_exponent_estimate(&SamplePath::from_fn(tiny, |t| t)).is_err());
    }

    #[test]
    fn moment_scaling_slope_for_fbm_is_near_2h() {
        let g = TimeGrid::new(1.0, 256).unwrap();
        let slope = increment_moment_scaling(
            ScalingProcess::Fbm,
            2.0,
            HurstParam::new(0.7).unwrap(),
            1000,
            &g,
            11,
        )
        .unwrap();
        assert!((slope - 1.4).abs() < 0.1, "slope {slope}");
    }

    #[test]
    fn moment_scaling_validates_inputs() {
        let g = TimeGrid::new(1.0, 256).unwrap();
        let h = HurstParam::new(0.7).unwrap();
        assert!(increment_moment_scaling(ScalingProcess::Fbm, 0.5, h, 1000, &g, 1).is_err());
        assert!(increment_moment_scaling(ScalingProcess::Fbm, 2.0, h, 10, &g, 1).is_err());
    }
}
