//! Riemann–Liouville fractional integrals and derivatives, fractional Besov
//! (semi)norms, and the generalized Lebesgue–Stieltjes (GLS) integral
//! pairing D^beta_{0+} f with D^{1-beta}_{t-} g_{t-}.
//!
//! All singular kernels are integrated in closed form against the
//! piecewise-linear interpolant of the grid data, cell by cell: naive
//! quadrature of (x-s)^{-alpha-1} diverges, while the cell-exact primitives
//! are cheap and O(N^2) overall. Pointwise derivatives use the Marchaud
//! rewriting of the Riemann–Liouville definition (numerically stable;
//! equivalence with the d/dx-of-convolution form is covered by tests on
//! smooth functions rather than assumed).

use rayon::prelude::*;
use serde::Serialize;
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use crate::fbm::HurstParam;
use crate::grid::{IntegralResult, SamplePath};
use crate::path_model::{AveragePathBundle, ConvexPayoff};
use crate::stats::least_squares_slope;

/// A deterministic function or realized path tabulated on a grid; same
/// carrier as [`SamplePath`], named for its role in the fractional operators.
pub type GridFunction = SamplePath;

/// Besov regularity index, constrained to (0, 1). Integrand checks against
/// fBm of Hurst index h additionally need the window 1 - h < beta < 1/2.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BesovIndex(f64);

impl BesovIndex {
    pub fn new(beta: f64) -> Result<Self> {
        if !(beta > 0.0 && beta < 1.0) {
            return Err(Error::invalid("beta", format!("Besov index must lie in (0, 1), got {beta}")));
        }
        Ok(BesovIndex(beta))
    }

    pub fn value(&self) -> f64 {
        self.0
    }

    /// Enforce the integrand-check window 1 - h < beta < 1/2.
    pub fn check_window(&self, h: HurstParam) -> Result<()> {
        let lo = 1.0 - h.value();
        if !(self.0 > lo && self.0 < 0.5) {
            return Err(Error::invalid(
                "beta",
                format!(
                    "beta = {} outside the admissible window ({lo}, 0.5) for H = {}",
                    self.0,
                    h.value()
                ),
            ));
        }
        Ok(())
    }
}

fn check_alpha_integral(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::invalid("alpha", format!("integral order must lie in (0, 1], got {alpha}")));
    }
    Ok(())
}

fn check_alpha_derivative(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::invalid("alpha", format!("derivative order must lie in (0, 1), got {alpha}")));
    }
    Ok(())
}

/// Index of the grid cell containing `x`, clamped so that `x` on the last
/// node still maps to the last cell.
fn cell_of(x: f64, dt: f64, m: usize) -> usize {
    ((x / dt + 1e-12).floor() as usize).min(m - 1)
}

fn slopes(values: &[f64], dt: f64) -> Vec<f64> {
    values.windows(2).map(|w| (w[1] - w[0]) / dt).collect()
}

/// Left Riemann–Liouville fractional integral
/// (I^alpha_{0+} f)(x) = (1/Gamma(alpha)) * int_0^x f(s) (x-s)^{alpha-1} ds.
pub fn rl_integral_left(f: &GridFunction, alpha: f64, x: f64) -> Result<f64> {
    check_alpha_integral(alpha)?;
    let t_max = f.grid().horizon();
    if !(0.0..=t_max * (1.0 + 1e-12)).contains(&x) {
        return Err(Error::domain(format!("x = {x} outside [0, {t_max}]")));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    let dt = f.grid().dt();
    let m = f.grid().n_steps();
    let v = f.values();
    let sl = slopes(v, dt);
    let jx = cell_of(x, dt, m);
    let mut acc = 0.0;
    for (j, &mj) in sl.iter().enumerate().take(jx + 1) {
        let a = j as f64 * dt;
        let e = ((j + 1) as f64 * dt).min(x);
        if e <= a {
            break;
        }
        // u = x - s decreasing from ub to ua over the cell
        let ua = x - e;
        let ub = x - a;
        let c = v[j] + mj * (x - a); // linear extension of the cell at s = x
        acc += c * (ub.powf(alpha) - ua.powf(alpha)) / alpha
            - mj * (ub.powf(alpha + 1.0) - ua.powf(alpha + 1.0)) / (alpha + 1.0);
    }
    Ok(acc / gamma(alpha))
}

/// Right Riemann–Liouville fractional integral
/// (I^alpha_{t-} f)(x) = (1/Gamma(alpha)) * int_x^t f(s) (s-x)^{alpha-1} ds.
pub fn rl_integral_right(f: &GridFunction, alpha: f64, x: f64, t: f64) -> Result<f64> {
    check_alpha_integral(alpha)?;
    let t_max = f.grid().horizon();
    if !(0.0 <= x && x <= t && t <= t_max * (1.0 + 1e-12)) {
        return Err(Error::domain(format!("need 0 <= x <= t <= {t_max}, got x = {x}, t = {t}")));
    }
    if x == t {
        return Ok(0.0);
    }
    let dt = f.grid().dt();
    let m = f.grid().n_steps();
    let v = f.values();
    let sl = slopes(v, dt);
    let jx = cell_of(x, dt, m);
    let jt = cell_of(t, dt, m);
    let mut acc = 0.0;
    for (j, &mj) in sl.iter().enumerate().take(jt + 1).skip(jx) {
        let a = (j as f64 * dt).max(x);
        let e = ((j + 1) as f64 * dt).min(t);
        if e <= a {
            continue;
        }
        let ua = a - x;
        let ub = e - x;
        let c = v[j] + mj * (x - j as f64 * dt); // linear extension at s = x
        acc += c * (ub.powf(alpha) - ua.powf(alpha)) / alpha
            + mj * (ub.powf(alpha + 1.0) - ua.powf(alpha + 1.0)) / (alpha + 1.0);
    }
    Ok(acc / gamma(alpha))
}

/// Left Riemann–Liouville fractional derivative in Marchaud form:
/// (D^alpha_{0+} f)(x) = (1/Gamma(1-alpha)) [ f(x) x^{-alpha}
///   + alpha * int_0^x (f(x) - f(s)) (x-s)^{-alpha-1} ds ].
pub fn rl_derivative_left(f: &GridFunction, alpha: f64, x: f64) -> Result<f64> {
    check_alpha_derivative(alpha)?;
    let t_max = f.grid().horizon();
    if !(x > 0.0 && x <= t_max * (1.0 + 1e-12)) {
        return Err(Error::domain(format!(
            "x = {x} outside (0, {t_max}]; the kernel is singular at x = 0"
        )));
    }
    let dt = f.grid().dt();
    let m = f.grid().n_steps();
    let v = f.values();
    let sl = slopes(v, dt);
    let jx = cell_of(x, dt, m);
    let fx = v[jx] + sl[jx] * (x - jx as f64 * dt);
    let mut tail = marchaud_left_tail(v, &sl, dt, jx, x, fx, alpha);
    tail *= alpha;
    Ok((fx * x.powf(-alpha) + tail) / gamma(1.0 - alpha))
}

/// int_0^x (f(x) - f(s)) (x-s)^{-alpha-1} ds, cell-exact. The adjacent
/// (possibly partial) cell [jx dt, x] has the integrand's constant part
/// vanishing identically, which removes the 0^{-alpha} singularity.
fn marchaud_left_tail(
    v: &[f64],
    sl: &[f64],
    dt: f64,
    jx: usize,
    x: f64,
    fx: f64,
    alpha: f64,
) -> f64 {
    let mut acc = 0.0;
    let part = x - jx as f64 * dt;
    if part > 0.0 {
        acc += sl[jx] * part.powf(1.0 - alpha) / (1.0 - alpha);
    }
    for (j, &mj) in sl.iter().enumerate().take(jx) {
        let ua = x - j as f64 * dt;
        let ub = x - (j + 1) as f64 * dt;
        let c = fx - v[j] - mj * ua;
        if ub > 0.0 {
            acc += c * (ub.powf(-alpha) - ua.powf(-alpha)) / alpha;
        }
        acc += mj * (ua.powf(1.0 - alpha) - ub.powf(1.0 - alpha)) / (1.0 - alpha);
    }
    acc
}

/// Right Riemann–Liouville fractional derivative of g_{t-}(x) := g(x) - g(t)
/// in Marchaud form, with the -1/Gamma(1-alpha) prefactor:
/// (D^alpha_{t-} g_{t-})(x) = (-1/Gamma(1-alpha)) [ (g(x) - g(t)) (t-x)^{-alpha}
///   + alpha * int_x^t (g(x) - g(s)) (s-x)^{-alpha-1} ds ].
///
/// The sign convention is pinned by requiring the GLS pairing to reproduce
/// the classical Stieltjes integral on smooth functions (tested).
pub fn rl_derivative_right(g: &GridFunction, alpha: f64, x: f64, t: f64) -> Result<f64> {
    check_alpha_derivative(alpha)?;
    let t_max = g.grid().horizon();
    if !(0.0 <= x && x < t && t <= t_max * (1.0 + 1e-12)) {
        return Err(Error::domain(format!(
            "need 0 <= x < t <= {t_max}, got x = {x}, t = {t}"
        )));
    }
    let dt = g.grid().dt();
    let m = g.grid().n_steps();
    let v = g.values();
    let sl = slopes(v, dt);
    let jx = cell_of(x, dt, m);
    let jt = cell_of(t, dt, m);
    let gx = v[jx] + sl[jx] * (x - jx as f64 * dt);
    let gt = v[jt] + sl[jt] * (t - jt as f64 * dt);
    let mut tail = marchaud_right_tail(v, &sl, dt, jx, jt, x, t, gx, alpha);
    tail *= alpha;
    Ok(-((gx - gt) * (t - x).powf(-alpha) + tail) / gamma(1.0 - alpha))
}

/// int_x^t (g(x) - g(s)) (s-x)^{-alpha-1} ds, cell-exact; the adjacent cell
/// at x again contributes only through the slope term.
#[allow(clippy::too_many_arguments)]
fn marchaud_right_tail(
    v: &[f64],
    sl: &[f64],
    dt: f64,
    jx: usize,
    jt: usize,
    x: f64,
    t: f64,
    gx: f64,
    alpha: f64,
) -> f64 {
    let mut acc = 0.0;
    let e0 = ((jx + 1) as f64 * dt).min(t);
    if e0 > x {
        acc -= sl[jx] * (e0 - x).powf(1.0 - alpha) / (1.0 - alpha);
    }
    for j in (jx + 1)..=jt {
        let a = j as f64 * dt;
        let e = ((j + 1) as f64 * dt).min(t);
        if e <= a {
            continue;
        }
        let ua = a - x;
        let ub = e - x;
        let c = gx - v[j] + sl[j] * (a - x);
        acc += c * (ua.powf(-alpha) - ub.powf(-alpha)) / alpha
            - sl[j] * (ub.powf(1.0 - alpha) - ua.powf(1.0 - alpha)) / (1.0 - alpha);
    }
    acc
}

/// Power tables for one fractional offset of the oversampled outer grid:
/// distances from x = (i + q/r) dt to grid nodes are (k ± q/r) dt, so each
/// offset q needs only O(m) transcendental evaluations.
struct OffsetTables {
    qf: f64,
    /// ((k + qf) dt)^{-beta}, index k (k = 0 entry unused when qf = 0)
    left_mb: Vec<f64>,
    /// ((k + qf) dt)^{1-beta}
    left_1mb: Vec<f64>,
    /// ((k - qf) dt)^{-alpha}, valid for k >= 1
    right_ma: Vec<f64>,
    /// ((k - qf) dt)^{1-alpha}
    right_1ma: Vec<f64>,
}

impl OffsetTables {
    fn build(m: usize, dt: f64, beta: f64, q: usize, r: usize) -> Self {
        let qf = q as f64 / r as f64;
        let alpha = 1.0 - beta;
        let mut left_mb = Vec::with_capacity(m + 1);
        let mut left_1mb = Vec::with_capacity(m + 1);
        let mut right_ma = vec![0.0; m + 1];
        let mut right_1ma = vec![0.0; m + 1];
        for k in 0..=m {
            let u = (k as f64 + qf) * dt;
            left_mb.push(if u > 0.0 { u.powf(-beta) } else { f64::INFINITY });
            left_1mb.push(u.powf(1.0 - beta));
            if k >= 1 {
                let w = (k as f64 - qf) * dt;
                right_ma[k] = w.powf(-alpha);
                right_1ma[k] = w.powf(1.0 - alpha);
            }
        }
        OffsetTables {
            qf,
            left_mb,
            left_1mb,
            right_ma,
            right_1ma,
        }
    }
}

/// GLS integral of f against g over [0, x_t] on one grid, with the outer
/// integral oversampled `r` points per cell. The f(x) x^{-beta} part of the
/// product is integrated with exact power-weighted cells; the remainder by
/// trapezoid on the oversampled points.
fn gls_single_level(f: &[f64], g: &[f64], beta: f64, dt: f64, r: usize) -> f64 {
    debug_assert_eq!(f.len(), g.len());
    let m = f.len() - 1;
    let alpha = 1.0 - beta;
    let ga_beta = gamma(1.0 - beta); // left-derivative prefactor
    let ga_alpha = gamma(beta); // = Gamma(1 - alpha), right-derivative prefactor
    let mf = slopes(f, dt);
    let mg = slopes(g, dt);
    let tables: Vec<OffsetTables> = (0..r).map(|q| OffsetTables::build(m, dt, beta, q, r)).collect();
    let h = dt / r as f64;
    let mr = m * r;

    // A(x) carries the x^{-beta} weight; B(x) is smooth enough for trapezoid.
    // Both vanish at x = t because the right derivative does.
    let mut pts = vec![(0.0f64, 0.0f64); mr + 1];
    pts[..mr]
        .par_iter_mut()
        .enumerate()
        .for_each(|(jq, slot)| {
            let i = jq / r;
            let q = jq % r;
            let tb = &tables[q];
            let qf = tb.qf;

            // right Marchaud derivative of g_{t-} at x = (i + qf) dt
            let gx = g[i] + mg[i] * (qf * dt);
            let mut mm = -mg[i] * tb.right_1ma[1] / (1.0 - alpha);
            for j in (i + 1)..m {
                let k = j - i;
                let c = gx - g[j] + mg[j] * ((k as f64 - qf) * dt);
                mm += c * (tb.right_ma[k] - tb.right_ma[k + 1]) / alpha
                    - mg[j] * (tb.right_1ma[k + 1] - tb.right_1ma[k]) / (1.0 - alpha);
            }
            let dg = -((gx - g[m]) * tb.right_ma[m - i] + alpha * mm) / ga_alpha;

            // Marchaud tail of f at the same point
            let fx = f[i] + mf[i] * (qf * dt);
            let mut tail = if q > 0 {
                mf[i] * tb.left_1mb[0] / (1.0 - beta)
            } else {
                0.0
            };
            for j in 0..i {
                let k = i - j;
                let c = fx - f[j] - mf[j] * ((k as f64 + qf) * dt);
                if k > 1 || q > 0 {
                    tail += c * (tb.left_mb[k - 1] - tb.left_mb[k]) / beta;
                }
                tail += mf[j] * (tb.left_1mb[k] - tb.left_1mb[k - 1]) / (1.0 - beta);
            }
            tail *= beta;

            *slot = (fx * dg / ga_beta, tail * dg / ga_beta);
        });

    let mut val = 0.0;
    let mut a_pow1 = 0.0; // a^{1-beta} at the running left edge
    let mut a_pow2 = 0.0; // a^{2-beta}
    for k in 0..mr {
        let a = k as f64 * h;
        let b = (k + 1) as f64 * h;
        let b_pow1 = b.powf(1.0 - beta);
        let b_pow2 = b.powf(2.0 - beta);
        let (a0, b0) = pts[k];
        let (a1, b1) = pts[k + 1];
        let slope_a = (a1 - a0) / h;
        val += (a0 - slope_a * a) * (b_pow1 - a_pow1) / (1.0 - beta)
            + slope_a * (b_pow2 - a_pow2) / (2.0 - beta);
        val += 0.5 * (b0 + b1) * h;
        a_pow1 = b_pow1;
        a_pow2 = b_pow2;
    }
    val
}

/// Default outer oversampling factor: 4 sub-points per cell keep the outer
/// quadrature error well below the inner cell-exact accuracy even on rough
/// (fBm-like) data.
pub const GLS_DEFAULT_OVERSAMPLE: usize = 4;

/// One-level GLS sum over raw equal-length sample slices with the default
/// oversampling, for callers that manage their own refinement levels.
pub fn gls_level_sum(f: &[f64], g: &[f64], beta: f64, dt: f64) -> f64 {
    gls_single_level(f, g, beta, dt, GLS_DEFAULT_OVERSAMPLE)
}

/// Generalized Lebesgue–Stieltjes integral
/// int_0^t (D^beta_{0+} f)(x) (D^{1-beta}_{t-} g_{t-})(x) dx
/// with refinement diagnostics over up to three nested grids. The headline
/// value is Richardson-extrapolated across the levels when the order
/// estimate is trustworthy.
///
/// `t` must be a grid point. A cheap refinement check of ||f||_{2,beta} runs
/// first and reports clear divergence as an error carrying the norm
/// trajectory; the Hölder regularity of g is a standing assumption reported
/// by the Besov diagnostics rather than enforced here.
pub fn gls_integral(
    f: &GridFunction,
    g: &GridFunction,
    beta: BesovIndex,
    t: f64,
) -> Result<IntegralResult> {
    gls_integral_with(f, g, beta, t, GLS_DEFAULT_OVERSAMPLE)
}

pub fn gls_integral_with(
    f: &GridFunction,
    g: &GridFunction,
    beta: BesovIndex,
    t: f64,
    oversample: usize,
) -> Result<IntegralResult> {
    if oversample == 0 {
        return Err(Error::invalid("oversample", "must be at least 1"));
    }
    if f.grid() != g.grid() {
        return Err(Error::invalid("f", "integrand and integrator must share a grid"));
    }
    let idx = f
        .grid()
        .index_of(t)
        .ok_or_else(|| Error::domain(format!("t = {t} is not a grid point")))?;
    if idx == 0 {
        return Err(Error::domain("t must be positive".to_string()));
    }
    let strides: Vec<usize> = [4usize, 2, 1]
        .into_iter()
        .filter(|&s| idx % s == 0 && idx / s >= 4)
        .collect();
    let strides = if strides.is_empty() { vec![1] } else { strides };

    // divergence pre-check on the integrand's W_2 norm trajectory
    let mut norms = Vec::with_capacity(strides.len());
    for &s in &strides {
        let fv: Vec<f64> = f.values()[..=idx].iter().step_by(s).copied().collect();
        norms.push(besov_norm_2_slice(&fv, f.grid().dt() * s as f64, beta.value()));
    }
    if norms.len() >= 2 {
        let (prev, last) = (norms[norms.len() - 2], norms[norms.len() - 1]);
        if prev > 0.0 && last / prev > 2.0 {
            return Err(Error::BesovDivergent { beta: beta.value(), norms });
        }
    }

    let dt = f.grid().dt();
    let mut grid_sizes = Vec::with_capacity(strides.len());
    let mut values = Vec::with_capacity(strides.len());
    for &s in &strides {
        let fv: Vec<f64> = f.values()[..=idx].iter().step_by(s).copied().collect();
        let gv: Vec<f64> = g.values()[..=idx].iter().step_by(s).copied().collect();
        grid_sizes.push(idx / s);
        values.push(gls_single_level(&fv, &gv, beta.value(), dt * s as f64, oversample));
    }
    Ok(IntegralResult::from_levels(grid_sizes, values, Some(beta.value())))
}

/// Fractional Besov seminorm ||f||_{1,beta}: sup over s < t of
/// |f(t)-f(s)|/(t-s)^beta + int_s^t |f(u)-f(s)|/(u-s)^{beta+1} du,
/// evaluated on grid pairs. The cell adjacent to the inner integral's
/// singularity is integrated exactly against the linear interpolant (the
/// "local Hölder model"); the rest by trapezoid.
pub fn besov_seminorm_1(f: &GridFunction, beta: BesovIndex) -> f64 {
    besov_seminorm_1_slice(f.values(), f.grid().dt(), beta.value())
}

fn besov_seminorm_1_slice(v: &[f64], dt: f64, beta: f64) -> f64 {
    let n = v.len() - 1;
    if n == 0 {
        return 0.0;
    }
    let lag_b: Vec<f64> = (1..=n).map(|k| (k as f64 * dt).powf(-beta)).collect();
    let lag_b1: Vec<f64> = (1..=n).map(|k| (k as f64 * dt).powf(-beta - 1.0)).collect();
    (0..n)
        .into_par_iter()
        .map(|i| {
            let first = (v[i + 1] - v[i]).abs() * dt.powf(-beta) / (1.0 - beta);
            let mut cum = 0.0;
            let mut prev_w = 0.0;
            let mut best = 0.0f64;
            for k in 1..=(n - i) {
                let d = (v[i + k] - v[i]).abs();
                let w = d * lag_b1[k - 1];
                if k > 1 {
                    cum += 0.5 * (prev_w + w) * dt;
                }
                prev_w = w;
                best = best.max(d * lag_b[k - 1] + first + cum);
            }
            best
        })
        .reduce(|| 0.0, f64::max)
}

/// Fractional Besov norm ||f||_{2,beta}:
/// int_0^T |f(t)| t^{-beta} dt
/// + int_0^T int_0^t |f(t)-f(s)| (t-s)^{-beta-1} ds dt,
///
/// with the singular first cell and the near-diagonal cells integrated
/// exactly against the linear interpolant.
pub fn besov_norm_2(f: &GridFunction, beta: BesovIndex) -> f64 {
    besov_norm_2_slice(f.values(), f.grid().dt(), beta.value())
}

fn besov_norm_2_slice(v: &[f64], dt: f64, beta: f64) -> f64 {
    let n = v.len() - 1;
    if n == 0 {
        return 0.0;
    }
    let lag_b1: Vec<f64> = (1..=n).map(|k| (k as f64 * dt).powf(-beta - 1.0)).collect();

    // single integral: first cell exact on the linear interpolant of |f|
    let af: Vec<f64> = v.iter().map(|x| x.abs()).collect();
    let m0 = (af[1] - af[0]) / dt;
    let mut v1 = af[0] * dt.powf(1.0 - beta) / (1.0 - beta) + m0 * dt.powf(2.0 - beta) / (2.0 - beta);
    for i in 1..n {
        let ti = i as f64 * dt;
        let tj = (i + 1) as f64 * dt;
        v1 += 0.5 * (af[i] * ti.powf(-beta) + af[i + 1] * tj.powf(-beta)) * dt;
    }

    // double integral: for each outer t_i, inner trapezoid over s plus the
    // exact near-diagonal cell [t - dt, t]
    let v2: f64 = (1..=n)
        .into_par_iter()
        .map(|i| {
            let near = (v[i] - v[i - 1]).abs() * dt.powf(-beta) / (1.0 - beta);
            let mut inner = near;
            if i > 1 {
                let mut prev_w = (v[i] - v[0]).abs() * lag_b1[i - 1];
                for j in 1..i {
                    let w = (v[i] - v[j]).abs() * lag_b1[i - 1 - j];
                    inner += 0.5 * (prev_w + w) * dt;
                    prev_w = w;
                }
            }
            inner * dt
        })
        .sum();
    v1 + v2
}

/// Near-diagonal local Hölder exponent: regression slope of
/// log mean |f(t + k dt) - f(t)| against log k over dyadic lags. This is the
/// local Hölder model used to classify ||.||_{1,beta} refinement behavior.
pub fn local_increment_exponent(f: &GridFunction) -> Result<f64> {
    let n = f.grid().n_steps();
    let v = f.values();
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for &k in &[1usize, 2, 4, 8, 16] {
        if k > n / 4 {
            break;
        }
        let mut acc = 0.0;
        for i in 0..=(n - k) {
            acc += (v[i + k] - v[i]).abs();
        }
        let mean = acc / (n - k + 1) as f64;
        if mean > 0.0 {
            xs.push((k as f64).ln());
            ys.push(mean.ln());
        }
    }
    if xs.len() < 2 {
        return Err(Error::domain(
            "path too short or degenerate for the local exponent regression".to_string(),
        ));
    }
    Ok(least_squares_slope(&xs, &ys))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BesovVerdict {
    Stable,
    Divergent,
}

/// ||.||_{1,beta} refinement diagnostic for one path.
#[derive(Debug, Clone, Serialize)]
pub struct BesovDiagnostic {
    pub beta: f64,
    pub grid_sizes: Vec<usize>,
    pub norms: Vec<f64>,
    /// near-diagonal local Hölder exponent of the path
    pub local_exponent: f64,
    pub verdict: BesovVerdict,
}

/// Refinement study of ||f||_{1,beta} over up to three nested grids.
///
/// The verdict extrapolates via the local Hölder model: the seminorm is
/// finite in the limit iff the path's local exponent exceeds beta. (The raw
/// norm trajectory at desk-scale grids is reported but cannot separate the
/// two regimes reliably on its own; the exponent classifier can.)
pub fn besov_w1_refinement(f: &GridFunction, beta: BesovIndex) -> Result<BesovDiagnostic> {
    let n = f.grid().n_steps();
    if n < 64 {
        return Err(Error::invalid("n_steps", "refinement study needs at least 64 steps"));
    }
    let dt = f.grid().dt();
    let mut grid_sizes = Vec::new();
    let mut norms = Vec::new();
    for s in [4usize, 2, 1] {
        if !n.is_multiple_of(s) {
            continue;
        }
        let fv: Vec<f64> = f.values().iter().step_by(s).copied().collect();
        grid_sizes.push(n / s);
        norms.push(besov_seminorm_1_slice(&fv, dt * s as f64, beta.value()));
    }
    let local_exponent = local_increment_exponent(f)?;
    let verdict = if local_exponent < beta.value() {
        BesovVerdict::Divergent
    } else {
        BesovVerdict::Stable
    };
    Ok(BesovDiagnostic {
        beta: beta.value(),
        grid_sizes,
        norms,
        local_exponent,
        verdict,
    })
}

/// Which averaged process the representation integrand is built on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AverageKind {
    Geom,
    Arith,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FiniteVerdict {
    Finite,
    Unstable,
}

/// ||.||_{2,beta} refinement diagnostic of a representation integrand.
#[derive(Debug, Clone, Serialize)]
pub struct IntegrandCheck {
    pub beta: f64,
    pub grid_sizes: Vec<usize>,
    pub norms: Vec<f64>,
    pub verdict: FiniteVerdict,
}

/// Check the representation integrand (T-s)/T * f'_-(G(s)) * G(s) (or the
/// arithmetic analogue f'_-(X(s)) * (T-s)/T * S(s)) for a finite
/// ||.||_{2,beta} under refinement: verdict is `Finite` when the norm moves
/// by at most 10% across the top two grids (or vanishes identically).
pub fn integrand_besov_check(
    bundle: &AveragePathBundle,
    payoff: &ConvexPayoff,
    which: AverageKind,
    h: HurstParam,
    beta: BesovIndex,
) -> Result<IntegrandCheck> {
    beta.check_window(h)?;
    let grid = bundle.grid();
    let n = grid.n_steps();
    let horizon = bundle.horizon;
    let phi: Vec<f64> = (0..grid.n_points())
        .map(|i| {
            let w = (horizon - grid.point(i)) / horizon;
            match which {
                AverageKind::Geom => {
                    let gv = bundle.g_path.value(i);
                    w * payoff.left_derivative(gv) * gv
                }
                AverageKind::Arith => {
                    payoff.left_derivative(bundle.x_path.value(i)) * w * bundle.s_path.value(i)
                }
            }
        })
        .collect();
    let mut grid_sizes = Vec::new();
    let mut norms = Vec::new();
    for s in [4usize, 2, 1] {
        if !n.is_multiple_of(s) || n / s < 4 {
            continue;
        }
        let fv: Vec<f64> = phi.iter().step_by(s).copied().collect();
        grid_sizes.push(n / s);
        norms.push(besov_norm_2_slice(&fv, grid.dt() * s as f64, beta.value()));
    }
    let verdict = match norms.as_slice() {
        [.., prev, last] => {
            if *last == 0.0 || (*prev > 0.0 && (last / prev - 1.0).abs() <= 0.10) {
                FiniteVerdict::Finite
            } else {
                FiniteVerdict::Unstable
            }
        }
        _ => FiniteVerdict::Finite,
    };
    Ok(IntegrandCheck {
        beta: beta.value(),
        grid_sizes,
        norms,
        verdict,
    })
}
