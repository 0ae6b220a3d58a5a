//! Vertical and horizontal derivatives of non-anticipative path functionals,
//! with numerical checks of the chain and product rules.
//!
//! A functional here is evaluated from the path restricted to [0, t] only.
//! Running integrals inside the functionals use left sums: the left rule
//! never touches the value at the right endpoint t, so vertical bumps at t
//! do not leak into the integral term and the closed-form derivatives of the
//! averaged functionals hold exactly at the grid level (the horizontal
//! derivative of both averages is exactly zero, and that of the running
//! integral is exactly x(t)).

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{SamplePath, TimeGrid};

/// Smooth scalar maps used for compositions; closed enumeration so the
/// analytic derivative is available for the chain-rule references.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SmoothMap {
    Identity,
    Square,
    Exp,
}

impl SmoothMap {
    pub fn eval(&self, u: f64) -> f64 {
        match self {
            SmoothMap::Identity => u,
            SmoothMap::Square => u * u,
            SmoothMap::Exp => u.exp(),
        }
    }

    pub fn derivative(&self, u: f64) -> f64 {
        match self {
            SmoothMap::Identity => 1.0,
            SmoothMap::Square => 2.0 * u,
            SmoothMap::Exp => u.exp(),
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            SmoothMap::Identity => "id",
            SmoothMap::Square => "square",
            SmoothMap::Exp => "exp",
        }
    }
}

/// Non-anticipative path functionals F_t(x). A closed enumeration: each kind
/// carries an exact evaluation rule over grid data, which is what makes the
/// non-anticipativity invariant testable as an exact assertion.
#[derive(Debug, Clone, PartialEq)]
pub enum PathFunctional {
    /// x(t)^2
    EndpointSquare,
    /// int_0^t x(u) du (left sum)
    RunningIntegral,
    /// exp((1/T) int_0^t x du) * exp(((T-t)/T) x(t)): the geometric-average
    /// functional of S = e^x written through log S = x
    GeomAverage { horizon: f64 },
    /// ((T-t)/T) e^{x(t)} + (1/T) int_0^t e^{x(u)} du
    ArithAverage { horizon: f64 },
    Product(Box<PathFunctional>, Box<PathFunctional>),
    Compose(SmoothMap, Box<PathFunctional>),
}

impl PathFunctional {
    pub fn geom(horizon: f64) -> Result<Self> {
        if !horizon.is_finite() || horizon <= 0.0 {
            return Err(Error::invalid("horizon", "must be positive"));
        }
        Ok(PathFunctional::GeomAverage { horizon })
    }

    pub fn arith(horizon: f64) -> Result<Self> {
        if !horizon.is_finite() || horizon <= 0.0 {
            return Err(Error::invalid("horizon", "must be positive"));
        }
        Ok(PathFunctional::ArithAverage { horizon })
    }

    pub fn describe(&self) -> String {
        match self {
            PathFunctional::EndpointSquare => "endpoint_square".to_string(),
            PathFunctional::RunningIntegral => "running_integral".to_string(),
            PathFunctional::GeomAverage { .. } => "geom_average".to_string(),
            PathFunctional::ArithAverage { .. } => "arith_average".to_string(),
            PathFunctional::Product(f, e) => {
                format!("product({},{})", f.describe(), e.describe())
            }
            PathFunctional::Compose(phi, f) => {
                format!("compose({},{})", phi.label(), f.describe())
            }
        }
    }

    /// F_t(x) from the samples up to and including index `idx` (t = idx * dt).
    pub fn eval(&self, x: &SamplePath, idx: usize) -> Result<f64> {
        if idx >= x.grid().n_points() {
            return Err(Error::domain(format!(
                "index {idx} beyond path end ({} points)",
                x.grid().n_points()
            )));
        }
        let v = x.values();
        let dt = x.grid().dt();
        let t = idx as f64 * dt;
        Ok(match self {
            PathFunctional::EndpointSquare => v[idx] * v[idx],
            PathFunctional::RunningIntegral => left_sum(&v[..idx], dt),
            PathFunctional::GeomAverage { horizon } => {
                let w = (horizon - t) / horizon;
                (left_sum(&v[..idx], dt) / horizon + w * v[idx]).exp()
            }
            PathFunctional::ArithAverage { horizon } => {
                let w = (horizon - t) / horizon;
                let integral: f64 = v[..idx].iter().map(|&u| u.exp()).sum::<f64>() * dt;
                w * v[idx].exp() + integral / horizon
            }
            PathFunctional::Product(f, e) => f.eval(x, idx)? * e.eval(x, idx)?,
            PathFunctional::Compose(phi, f) => phi.eval(f.eval(x, idx)?),
        })
    }
}

fn left_sum(values: &[f64], dt: f64) -> f64 {
    values.iter().sum::<f64>() * dt
}

/// Difference steps for the numerical derivatives.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BumpSpec {
    /// central-difference step for the vertical derivatives
    pub h_vertical: f64,
    /// forward step for the horizontal derivative; multiples of the grid
    /// step only, so the extension appends whole cells
    pub h_horizontal: f64,
    pub richardson: bool,
}

impl BumpSpec {
    pub fn new(h_vertical: f64, h_horizontal: f64, richardson: bool) -> Result<Self> {
        if !h_vertical.is_finite() || h_vertical <= 0.0 {
            return Err(Error::invalid("h_vertical", "must be positive"));
        }
        if !h_horizontal.is_finite() || h_horizontal <= 0.0 {
            return Err(Error::invalid("h_horizontal", "must be positive"));
        }
        Ok(BumpSpec {
            h_vertical,
            h_horizontal,
            richardson,
        })
    }

    fn halved(&self) -> BumpSpec {
        BumpSpec {
            h_vertical: 0.5 * self.h_vertical,
            h_horizontal: 0.5 * self.h_horizontal,
            richardson: self.richardson,
        }
    }
}

fn index_of_checked(x: &SamplePath, t: f64) -> Result<usize> {
    x.grid()
        .index_of(t)
        .ok_or_else(|| Error::domain(format!("t = {t} is not a grid point of the path")))
}

/// The vertically perturbed path x^t_h: the value at t shifted by h, all
/// other samples unchanged.
pub fn vertical_perturb(x: &SamplePath, t: f64, h: f64) -> Result<SamplePath> {
    let idx = index_of_checked(x, t)?;
    let mut values = x.values().to_vec();
    values[idx] += h;
    SamplePath::new(*x.grid(), values)
}

/// The horizontal extension x_{t,h}: the path up to t, then frozen at x(t)
/// on (t, t+h]. `h` must be a positive multiple of the grid step; the result
/// lives on a fresh grid of idx + h/dt cells.
pub fn horizontal_extend(x: &SamplePath, t: f64, h: f64) -> Result<SamplePath> {
    let idx = index_of_checked(x, t)?;
    let dt = x.grid().dt();
    let k = (h / dt).round() as i64;
    if k < 1 || (h - k as f64 * dt).abs() > 1e-9 * dt {
        return Err(Error::invalid(
            "h_horizontal",
            format!("h = {h} is not a positive multiple of the grid step {dt}"),
        ));
    }
    let k = k as usize;
    let n = idx + k;
    let grid = TimeGrid::new(dt * n as f64, n)?;
    let mut values = x.values()[..=idx].to_vec();
    values.extend(std::iter::repeat_n(x.value(idx), k));
    SamplePath::new(grid, values)
}

/// Vertical derivative by central difference [F(x^t_h) - F(x^t_{-h})]/(2h);
/// with `richardson` the h and h/2 estimates are combined to cancel the
/// leading O(h^2) term.
pub fn vertical_derivative(
    f: &PathFunctional,
    x: &SamplePath,
    t: f64,
    spec: &BumpSpec,
) -> Result<f64> {
    let central = |h: f64| -> Result<f64> {
        let idx = index_of_checked(x, t)?;
        let up = f.eval(&vertical_perturb(x, t, h)?, idx)?;
        let dn = f.eval(&vertical_perturb(x, t, -h)?, idx)?;
        Ok((up - dn) / (2.0 * h))
    };
    let d = central(spec.h_vertical)?;
    if spec.richardson {
        let d_half = central(0.5 * spec.h_vertical)?;
        Ok((4.0 * d_half - d) / 3.0)
    } else {
        Ok(d)
    }
}

/// Second vertical derivative by the symmetric second difference
/// [F(x^t_h) - 2 F(x) + F(x^t_{-h})]/h^2.
pub fn second_vertical_derivative(
    f: &PathFunctional,
    x: &SamplePath,
    t: f64,
    spec: &BumpSpec,
) -> Result<f64> {
    let second = |h: f64| -> Result<f64> {
        let idx = index_of_checked(x, t)?;
        let up = f.eval(&vertical_perturb(x, t, h)?, idx)?;
        let mid = f.eval(x, idx)?;
        let dn = f.eval(&vertical_perturb(x, t, -h)?, idx)?;
        Ok((up - 2.0 * mid + dn) / (h * h))
    };
    let d = second(spec.h_vertical)?;
    if spec.richardson {
        let d_half = second(0.5 * spec.h_vertical)?;
        Ok((4.0 * d_half - d) / 3.0)
    } else {
        Ok(d)
    }
}

/// Horizontal derivative by the one-sided difference
/// [F_{t+h}(x_{t,h}) - F_t(x)]/h, matching the definition's h -> 0+ form.
/// With `richardson`, h and h/2 (both must be grid-step multiples) cancel
/// the leading O(h) term.
pub fn horizontal_derivative(
    f: &PathFunctional,
    x: &SamplePath,
    t: f64,
    spec: &BumpSpec,
) -> Result<f64> {
    let forward = |h: f64| -> Result<f64> {
        let idx = index_of_checked(x, t)?;
        let base = f.eval(x, idx)?;
        let ext = horizontal_extend(x, t, h)?;
        let ext_idx = ext.grid().n_steps();
        Ok((f.eval(&ext, ext_idx)? - base) / h)
    };
    let d = forward(spec.h_horizontal)?;
    if spec.richardson {
        let d_half = forward(0.5 * spec.h_horizontal)?;
        Ok(2.0 * d_half - d)
    } else {
        Ok(d)
    }
}

/// Closed-form vertical derivative of the geometric-average functional at a
/// grid point: ((T-t)/T) * F_t(x).
pub fn geom_average_vertical_reference(x: &SamplePath, t: f64, horizon: f64) -> Result<f64> {
    let idx = index_of_checked(x, t)?;
    let w = (horizon - t) / horizon;
    Ok(w * PathFunctional::geom(horizon)?.eval(x, idx)?)
}

/// Closed-form second vertical derivative: ((T-t)/T)^2 * F_t(x).
pub fn geom_average_second_vertical_reference(
    x: &SamplePath,
    t: f64,
    horizon: f64,
) -> Result<f64> {
    let idx = index_of_checked(x, t)?;
    let w = (horizon - t) / horizon;
    Ok(w * w * PathFunctional::geom(horizon)?.eval(x, idx)?)
}

/// Closed-form first and second vertical derivative of the
/// arithmetic-average functional (they coincide): ((T-t)/T) e^{x(t)}.
pub fn arith_average_vertical_reference(x: &SamplePath, t: f64, horizon: f64) -> Result<f64> {
    let idx = index_of_checked(x, t)?;
    Ok((horizon - t) / horizon * x.value(idx).exp())
}

/// |d_x phi(F) - phi'(F) d_x F| with the vertical derivatives numerical and
/// phi' analytic.
pub fn check_vertical_chain_rule(
    phi: SmoothMap,
    f: &PathFunctional,
    x: &SamplePath,
    t: f64,
    spec: &BumpSpec,
) -> Result<f64> {
    let idx = index_of_checked(x, t)?;
    let composed = PathFunctional::Compose(phi, Box::new(f.clone()));
    let lhs = vertical_derivative(&composed, x, t, spec)?;
    let rhs = phi.derivative(f.eval(x, idx)?) * vertical_derivative(f, x, t, spec)?;
    Ok((lhs - rhs).abs())
}

/// |d_x (F E) - (F d_x E + E d_x F)| with all derivatives numerical.
pub fn check_product_rule(
    f: &PathFunctional,
    e: &PathFunctional,
    x: &SamplePath,
    t: f64,
    spec: &BumpSpec,
) -> Result<f64> {
    let idx = index_of_checked(x, t)?;
    let product = PathFunctional::Product(Box::new(f.clone()), Box::new(e.clone()));
    let lhs = vertical_derivative(&product, x, t, spec)?;
    let rhs = f.eval(x, idx)? * vertical_derivative(e, x, t, spec)?
        + e.eval(x, idx)? * vertical_derivative(f, x, t, spec)?;
    Ok((lhs - rhs).abs())
}

/// |D_t phi(F) - phi'(F) D_t F| with the horizontal derivatives numerical.
pub fn check_horizontal_chain_rule(
    phi: SmoothMap,
    f: &PathFunctional,
    x: &SamplePath,
    t: f64,
    spec: &BumpSpec,
) -> Result<f64> {
    let idx = index_of_checked(x, t)?;
    let composed = PathFunctional::Compose(phi, Box::new(f.clone()));
    let lhs = horizontal_derivative(&composed, x, t, spec)?;
    let rhs = phi.derivative(f.eval(x, idx)?) * horizontal_derivative(f, x, t, spec)?;
    Ok((lhs - rhs).abs())
}

/// One point of a step-halving residual sweep.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct RuleResidual {
    pub h_vertical: f64,
    pub h_horizontal: f64,
    pub residual: f64,
}

/// Run a rule check across `n_levels` step halvings starting from `spec`.
pub fn residual_sweep(
    check: impl Fn(&BumpSpec) -> Result<f64>,
    spec: &BumpSpec,
    n_levels: usize,
) -> Result<Vec<RuleResidual>> {
    if n_levels == 0 {
        return Err(Error::invalid("n_levels", "need at least one level"));
    }
    let mut out = Vec::with_capacity(n_levels);
    let mut s = *spec;
    for _ in 0..n_levels {
        out.push(RuleResidual {
            h_vertical: s.h_vertical,
            h_horizontal: s.h_horizontal,
            residual: check(&s)?,
        });
        s = s.halved();
    }
    Ok(out)
}

/// Whether the residual sequence is nonincreasing (the refinement property
/// the rule checks are held to).
pub fn residuals_monotone(rs: &[RuleResidual]) -> bool {
    rs.windows(2).all(|w| w[1].residual <= w[0].residual)
}
