//! Assembly and Monte Carlo verification of the pathwise integral
//! representations f(A(t)) = f(S(0)) + int_0^t phi dB for the averaged
//! processes A = G (geometric), A = X (arithmetic) and the plain-fBm
//! variant, plus the hedging/arbitrage experiments they imply.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fbm::{FbmSampler, HurstParam, SampleMethod, SeedSpec};
use crate::frac_calc::{gls_level_sum, BesovIndex};
use crate::grid::{IntegralResult, SamplePath, TimeGrid};
use crate::path_model::{AveragePathBundle, ConvexPayoff};
use crate::riemann::{tagged_sum, PartitionSpec, Tag};
use crate::stats::{median, quantile};

/// Which identity is being verified.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum IdentityKind {
    /// G(t) = 1 + int (T-s)/T G dB (identity payoff implied)
    PropHedge1,
    /// X(t) = 1 + int (T-s)/T S dB (identity payoff implied)
    PropArithmavg,
    /// f(G(t)) = f(S(0)) + int (T-s)/T f'_-(G) G dB
    ThmLimit1,
    /// f(X(t)) = f(S(0)) + int f'_-(X) (T-s)/T S dB
    ThmLimit2,
    /// f(Y(t)) = f(0) + int (T-s)/T f'_-(Y) dB for
    /// Y(s) = ((T-s)/T) B(s) + (1/T) int_0^s B
    RemarkFbm,
}

impl IdentityKind {
    pub fn is_proposition(&self) -> bool {
        matches!(self, IdentityKind::PropHedge1 | IdentityKind::PropArithmavg)
    }

    pub fn label(&self) -> &'static str {
        match self {
            IdentityKind::PropHedge1 => "prop_hedge1",
            IdentityKind::PropArithmavg => "prop_arithmavg",
            IdentityKind::ThmLimit1 => "thm_limit1",
            IdentityKind::ThmLimit2 => "thm_limit2",
            IdentityKind::RemarkFbm => "remark_fbm",
        }
    }
}

impl std::str::FromStr for IdentityKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "prop_hedge1" => Ok(IdentityKind::PropHedge1),
            "prop_arithmavg" => Ok(IdentityKind::PropArithmavg),
            "thm_limit1" => Ok(IdentityKind::ThmLimit1),
            "thm_limit2" => Ok(IdentityKind::ThmLimit2),
            "remark_fbm" => Ok(IdentityKind::RemarkFbm),
            other => Err(Error::invalid("which", format!("unknown identity '{other}'"))),
        }
    }
}

/// Integral construction used on the right-hand side. The Riemann-sum
/// integrator is the default (the limit-of-Riemann-sums reading); the GLS
/// integrator is the independent cross-check of the same object.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Integrator {
    Riemann,
    Gls { beta: f64 },
}

/// A verifiable representation identity: which statement, the payoff, the
/// checkpoint times and the integrator.
#[derive(Debug, Clone)]
pub struct IdentitySpec {
    kind: IdentityKind,
    payoff: ConvexPayoff,
    checkpoints: Vec<f64>,
    integrator: Integrator,
}

impl IdentitySpec {
    /// Spec for one of the identity-payoff propositions.
    pub fn proposition(
        kind: IdentityKind,
        checkpoints: Vec<f64>,
        integrator: Integrator,
    ) -> Result<Self> {
        if !kind.is_proposition() {
            return Err(Error::invalid("which", "use IdentitySpec::theorem for payoff identities"));
        }
        Self::build(kind, ConvexPayoff::identity(), checkpoints, integrator)
    }

    /// Spec for one of the convex-payoff theorems (or the fBm remark).
    pub fn theorem(
        kind: IdentityKind,
        payoff: ConvexPayoff,
        checkpoints: Vec<f64>,
        integrator: Integrator,
    ) -> Result<Self> {
        if kind.is_proposition() {
            return Err(Error::invalid(
                "which",
                "the propositions imply the identity payoff; use IdentitySpec::proposition",
            ));
        }
        Self::build(kind, payoff, checkpoints, integrator)
    }

    fn build(
        kind: IdentityKind,
        payoff: ConvexPayoff,
        checkpoints: Vec<f64>,
        integrator: Integrator,
    ) -> Result<Self> {
        if checkpoints.is_empty() {
            return Err(Error::invalid("checkpoints", "need at least one checkpoint"));
        }
        if checkpoints.iter().any(|&t| t <= 0.0) {
            return Err(Error::invalid("checkpoints", "checkpoints must be positive times"));
        }
        if let Integrator::Gls { beta } = integrator {
            BesovIndex::new(beta)?;
        }
        Ok(IdentitySpec {
            kind,
            payoff,
            checkpoints,
            integrator,
        })
    }

    /// Default checkpoints {T/4, T/2, 3T/4, T}: interior points catch
    /// time-localization bugs that the t = T corollaries would miss.
    pub fn default_checkpoints(horizon: f64) -> Vec<f64> {
        vec![0.25 * horizon, 0.5 * horizon, 0.75 * horizon, horizon]
    }

    pub fn kind(&self) -> IdentityKind {
        self.kind
    }

    pub fn payoff(&self) -> &ConvexPayoff {
        &self.payoff
    }

    pub fn checkpoints(&self) -> &[f64] {
        &self.checkpoints
    }

    pub fn integrator(&self) -> Integrator {
        self.integrator
    }

    pub fn describe(&self) -> String {
        let integ = match self.integrator {
            Integrator::Riemann => "riemann".to_string(),
            Integrator::Gls { beta } => format!("gls(beta={beta})"),
        };
        format!(
            "{} f={} integrator={}",
            self.kind.label(),
            self.payoff.describe(),
            integ
        )
    }
}

/// The process whose payoff appears on the identity's left-hand side: G, X,
/// or Y(s) = ((T-s)/T) B(s) + (1/T) int_0^s B for the fBm remark.
pub fn base_path(kind: IdentityKind, bundle: &AveragePathBundle) -> SamplePath {
    match kind {
        IdentityKind::PropHedge1 | IdentityKind::ThmLimit1 => bundle.g_path.clone(),
        IdentityKind::PropArithmavg | IdentityKind::ThmLimit2 => bundle.x_path.clone(),
        IdentityKind::RemarkFbm => {
            let grid = bundle.grid();
            let horizon = bundle.horizon;
            let cum = bundle.b_path.running_trapezoid();
            let values = (0..grid.n_points())
                .map(|i| {
                    let t = grid.point(i);
                    (horizon - t) / horizon * bundle.b_path.value(i) + cum.value(i) / horizon
                })
                .collect();
            SamplePath::new(*grid, values).expect("length matches grid")
        }
    }
}

/// Left-hand side f(A(t)) at a checkpoint.
pub fn lhs_value(spec: &IdentitySpec, bundle: &AveragePathBundle, t: f64) -> Result<f64> {
    let idx = bundle
        .grid()
        .index_of(t)
        .ok_or_else(|| Error::domain(format!("checkpoint t = {t} is not a grid point")))?;
    let base = base_path(spec.kind, bundle);
    Ok(spec.payoff.eval(base.value(idx)))
}

/// The identity's integrand phi on the bundle grid; the (T-s)/T factor makes
/// it vanish at s = T.
pub fn integrand_path(spec: &IdentitySpec, bundle: &AveragePathBundle) -> SamplePath {
    let grid = bundle.grid();
    let horizon = bundle.horizon;
    let base = base_path(spec.kind, bundle);
    let values = (0..grid.n_points())
        .map(|i| {
            let w = (horizon - grid.point(i)) / horizon;
            match spec.kind {
                IdentityKind::PropHedge1 | IdentityKind::ThmLimit1 => {
                    let gv = base.value(i);
                    w * spec.payoff.left_derivative(gv) * gv
                }
                IdentityKind::PropArithmavg | IdentityKind::ThmLimit2 => {
                    spec.payoff.left_derivative(base.value(i)) * w * bundle.s_path.value(i)
                }
                IdentityKind::RemarkFbm => w * spec.payoff.left_derivative(base.value(i)),
            }
        })
        .collect();
    SamplePath::new(*grid, values).expect("length matches grid")
}

/// Initial capital f(A(0)) of the right-hand side: f(S(0)) for the averaged
/// processes, f(0) for the fBm remark.
fn rhs_initial(spec: &IdentitySpec, bundle: &AveragePathBundle) -> f64 {
    let base = base_path(spec.kind, bundle);
    spec.payoff.eval(base.value(0))
}

/// One level's right-hand side value on the (sub-sampled) grid.
fn rhs_on_level(
    spec: &IdentitySpec,
    phi: &[f64],
    b: &[f64],
    initial: f64,
    dt: f64,
) -> f64 {
    match spec.integrator {
        // midpoint-tagged sums: for H > 1/2 the tag is immaterial in the
        // limit, and averaging the cell endpoints cancels the second-order
        // (Delta B)^2 drift that dominates the left-sum error at desk grids
        Integrator::Riemann => initial + tagged_sum(phi, b, Tag::Midpoint),
        Integrator::Gls { beta } => initial + gls_level_sum(phi, b, beta, dt),
    }
}

/// Right-hand side f(S(0)) + int_0^t phi dB with refinement diagnostics over
/// up to three nested sub-grids of the bundle grid; the headline value is
/// the finest level's.
pub fn rhs_value(spec: &IdentitySpec, bundle: &AveragePathBundle, t: f64) -> Result<IntegralResult> {
    let idx = bundle
        .grid()
        .index_of(t)
        .ok_or_else(|| Error::domain(format!("checkpoint t = {t} is not a grid point")))?;
    if idx == 0 {
        return Err(Error::domain("checkpoint must be positive".to_string()));
    }
    let phi = integrand_path(spec, bundle);
    let initial = rhs_initial(spec, bundle);
    let dt = bundle.grid().dt();
    let strides: Vec<usize> = [4usize, 2, 1]
        .into_iter()
        .filter(|&s| idx % s == 0 && idx / s >= 4)
        .collect();
    let strides = if strides.is_empty() { vec![1] } else { strides };
    let mut grid_sizes = Vec::new();
    let mut values = Vec::new();
    for &s in &strides {
        let pv: Vec<f64> = phi.values()[..=idx].iter().step_by(s).copied().collect();
        let bv: Vec<f64> = bundle.b_path.values()[..=idx].iter().step_by(s).copied().collect();
        grid_sizes.push(idx / s);
        values.push(rhs_on_level(spec, &pv, &bv, initial, dt * s as f64));
    }
    let beta = match spec.integrator {
        Integrator::Gls { beta } => Some(beta),
        Integrator::Riemann => None,
    };
    Ok(IntegralResult::from_levels_raw(grid_sizes, values, beta))
}

/// One residual observation.
#[derive(Debug, Clone, Serialize)]
pub struct ResidualRecord {
    pub path_index: u64,
    pub level_n: usize,
    pub t: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub residual: f64,
    /// |residual| / max(|lhs|, 1): kink payoffs sit arbitrarily close to
    /// zero, and S(0) = 1 fixes the payoff scale.
    pub relative_residual: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct LevelSummary {
    pub level_n: usize,
    pub median_relative: f64,
    pub p95_relative: f64,
}

/// Per-path, per-checkpoint residuals of one identity across grid levels.
#[derive(Debug, Clone, Serialize)]
pub struct VerificationReport {
    pub spec: String,
    pub h: f64,
    pub horizon: f64,
    pub master_seed: u64,
    pub n_paths: usize,
    pub levels: Vec<usize>,
    pub records: Vec<ResidualRecord>,
    pub summary: Vec<LevelSummary>,
    /// whether the median |relative residual| is nonincreasing across levels
    pub monotone_refinement: bool,
}

impl VerificationReport {
    pub fn top_level_median(&self) -> f64 {
        self.summary.last().map(|s| s.median_relative).unwrap_or(f64::NAN)
    }

    /// Flat CSV form of the records for plotting.
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "path_index,level_n,t,lhs,rhs,residual,relative_residual")?;
        for r in &self.records {
            writeln!(
                w,
                "{},{},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}",
                r.path_index, r.level_n, r.t, r.lhs, r.rhs, r.residual, r.relative_residual
            )?;
        }
        Ok(())
    }
}

/// Monte Carlo refinement study of one identity: sample fBm at the finest
/// level, re-derive the bundle at every level, and record the left/right
/// residual at each checkpoint.
pub fn verify_identity(
    spec: &IdentitySpec,
    h: HurstParam,
    horizon: f64,
    levels: &PartitionSpec,
    master_seed: u64,
    n_paths: usize,
) -> Result<VerificationReport> {
    if !h.is_long_memory() {
        return Err(Error::invalid(
            "h",
            format!("the representation identities require H > 1/2, got {}", h.value()),
        ));
    }
    if levels.levels().len() < 2 {
        return Err(Error::invalid("levels", "refinement study needs at least 2 grid levels"));
    }
    if n_paths == 0 {
        return Err(Error::invalid("n_paths", "need at least one path"));
    }
    let coarsest = TimeGrid::new(horizon, levels.levels()[0])?;
    for &t in spec.checkpoints() {
        if coarsest.index_of(t).is_none() {
            return Err(Error::invalid(
                "checkpoints",
                format!("t = {t} is not a grid point of the coarsest level"),
            ));
        }
    }
    let finest_grid = TimeGrid::new(horizon, levels.finest())?;
    let sampler = FbmSampler::new(finest_grid, h, SampleMethod::Circulant)?;

    let records: Vec<ResidualRecord> = (0..n_paths as u64)
        .into_par_iter()
        .map(|path_index| {
            let b = sampler.sample(SeedSpec::new(master_seed, path_index));
            let mut recs = Vec::with_capacity(levels.levels().len() * spec.checkpoints().len());
            for &n in levels.levels() {
                let stride = levels.finest() / n;
                let bundle = AveragePathBundle::from_fbm(
                    b.subsample(stride).expect("levels divide the finest grid"),
                )
                .expect("exp path is positive");
                for &t in spec.checkpoints() {
                    let lhs = lhs_value(spec, &bundle, t).expect("checkpoint on coarsest grid");
                    let rhs = rhs_value(spec, &bundle, t)
                        .expect("checkpoint on coarsest grid")
                        .values
                        .last()
                        .copied()
                        .expect("at least one level");
                    let residual = lhs - rhs;
                    recs.push(ResidualRecord {
                        path_index,
                        level_n: n,
                        t,
                        lhs,
                        rhs,
                        residual,
                        relative_residual: residual.abs() / lhs.abs().max(1.0),
                    });
                }
            }
            recs
        })
        .flatten()
        .collect();

    let mut summary = Vec::new();
    for &n in levels.levels() {
        let rel: Vec<f64> = records
            .iter()
            .filter(|r| r.level_n == n)
            .map(|r| r.relative_residual)
            .collect();
        summary.push(LevelSummary {
            level_n: n,
            median_relative: median(&rel),
            p95_relative: quantile(&rel, 0.95),
        });
    }
    let monotone_refinement = summary
        .windows(2)
        .all(|w| w[1].median_relative <= w[0].median_relative);

    Ok(VerificationReport {
        spec: spec.describe(),
        h: h.value(),
        horizon,
        master_seed,
        n_paths,
        levels: levels.levels().to_vec(),
        records,
        summary,
        monotone_refinement,
    })
}

/// Hedge ratio psi(s) = f'_-(X(s)) * ((T-s)/T) * S(s), the identity's
/// integrand read as a position in S (dS = S dB).
pub fn hedging_strategy(bundle: &AveragePathBundle, payoff: &ConvexPayoff, s_index: usize) -> f64 {
    let grid = bundle.grid();
    let w = (bundle.horizon - grid.point(s_index)) / bundle.horizon;
    payoff.left_derivative(bundle.x_path.value(s_index)) * w * bundle.s_path.value(s_index)
}

#[derive(Debug, Clone)]
pub struct ArbitrageConfig {
    pub strike: f64,
    pub h: HurstParam,
    pub horizon: f64,
    pub n_steps: usize,
    /// observation time at which out-of-the-money paths are selected
    pub t_obs: f64,
    pub n_paths: usize,
    pub master_seed: u64,
}

/// Replication study among paths that are out of the money at `t_obs`
/// (X(t_obs) < K, so the call on the running average costs nothing to hedge
/// from there on).
#[derive(Debug, Clone, Serialize)]
pub struct ArbitrageReport {
    pub strike: f64,
    pub t_obs: f64,
    pub n_paths: usize,
    pub otm_count: usize,
    pub otm_fraction: f64,
    /// among OTM-at-t_obs paths, how many finish with positive payoff
    pub itm_at_maturity_count: usize,
    pub itm_fraction_among_otm: Option<f64>,
    /// |f(X(T)) - (f(X(t_obs)) + int_{t_obs}^T psi dB)| over OTM paths
    pub median_abs_residual: Option<f64>,
    pub p95_abs_residual: Option<f64>,
}

/// Monte Carlo arbitrage experiment for the average-strike call: zero
/// capital at an OTM observation time still replicates a payoff that ends
/// strictly positive on a nonvanishing fraction of paths.
pub fn arbitrage_experiment(cfg: &ArbitrageConfig) -> Result<ArbitrageReport> {
    if !cfg.h.is_long_memory() {
        return Err(Error::invalid("h", "the hedging identity requires H > 1/2"));
    }
    if !(cfg.t_obs > 0.0 && cfg.t_obs < cfg.horizon) {
        return Err(Error::invalid("t_obs", "observation time must lie strictly inside (0, T)"));
    }
    if cfg.n_paths == 0 {
        return Err(Error::invalid("n_paths", "need at least one path"));
    }
    let grid = TimeGrid::new(cfg.horizon, cfg.n_steps)?;
    let i0 = grid
        .index_of(cfg.t_obs)
        .ok_or_else(|| Error::invalid("t_obs", "observation time must be a grid point"))?;
    let sampler = FbmSampler::new(grid, cfg.h, SampleMethod::Circulant)?;
    let payoff = ConvexPayoff::Call { strike: cfg.strike };

    // per path: Some((itm at maturity, |replication residual|)) when OTM
    let outcomes: Vec<Option<(bool, f64)>> = (0..cfg.n_paths as u64)
        .into_par_iter()
        .map(|i| {
            let bundle =
                AveragePathBundle::from_fbm(sampler.sample(SeedSpec::new(cfg.master_seed, i)))
                    .expect("exp path is positive");
            let n = grid.n_steps();
            if bundle.x_path.value(i0) >= cfg.strike {
                return None;
            }
            let psi: Vec<f64> = (i0..=n).map(|j| hedging_strategy(&bundle, &payoff, j)).collect();
            let b_tail = &bundle.b_path.values()[i0..=n];
            let gain = tagged_sum(&psi, b_tail, Tag::Midpoint);
            // capital at t_obs is f(X(t_obs)) = 0 by the OTM selection
            let residual = payoff.eval(bundle.x_path.value(n)) - gain;
            Some((bundle.x_path.value(n) > cfg.strike, residual.abs()))
        })
        .collect();

    let otm: Vec<&(bool, f64)> = outcomes.iter().flatten().collect();
    let otm_count = otm.len();
    let itm_at_maturity_count = otm.iter().filter(|(itm, _)| *itm).count();
    let residuals: Vec<f64> = otm.iter().map(|(_, r)| *r).collect();
    Ok(ArbitrageReport {
        strike: cfg.strike,
        t_obs: cfg.t_obs,
        n_paths: cfg.n_paths,
        otm_count,
        otm_fraction: otm_count as f64 / cfg.n_paths as f64,
        itm_at_maturity_count,
        itm_fraction_among_otm: (otm_count > 0)
            .then(|| itm_at_maturity_count as f64 / otm_count as f64),
        median_abs_residual: (otm_count > 0).then(|| median(&residuals)),
        p95_abs_residual: (otm_count > 0).then(|| quantile(&residuals, 0.95)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fbm::sample_fbm;

    fn fbm_bundle(n: usize, seed: u64) -> AveragePathBundle {
        let grid = TimeGrid::new(1.0, n).unwrap();
        let b = sample_fbm(
            &grid,
            HurstParam::new(0.7).unwrap(),
            SeedSpec::new(seed, 0),
            SampleMethod::Circulant,
        )
        .unwrap();
        AveragePathBundle::from_fbm(b).unwrap()
    }

    fn constant_bundle(n: usize, b_level: f64) -> AveragePathBundle {
        let grid = TimeGrid::new(1.0, n).unwrap();
        // constant B != 0 is not an fBm path but exercises the algebra
        let b = SamplePath::from_fn(grid, |_| b_level);
        AveragePathBundle {
            b_path: b.clone(),
            s_path: b.map(f64::exp),
            g_path: b.map(f64::exp),
            x_path: b.map(f64::exp),
            horizon: 1.0,
        }
    }

    #[test]
    fn lhs_reduces_to_the_base_process_for_identity_payoff() {
        let bundle = fbm_bundle(64, 1);
        let spec = IdentitySpec::theorem(
            IdentityKind::ThmLimit2,
            ConvexPayoff::identity(),
            vec![0.5],
            Integrator::Riemann,
        )
        .unwrap();
        let v = lhs_value(&spec, &bundle, 0.5).unwrap();
        assert_eq!(v, bundle.x_path.value(32));
    }

    #[test]
    fn lhs_on_constant_path_is_the_payoff_of_the_constant() {
        let bundle = constant_bundle(16, 0.3);
        let c = 0.3f64.exp();
        let spec = IdentitySpec::theorem(
            IdentityKind::ThmLimit1,
            ConvexPayoff::Call { strike: 1.0 },
            vec![0.25, 1.0],
            Integrator::Riemann,
        )
        .unwrap();
        for t in [0.25, 1.0] {
            assert!((lhs_value(&spec, &bundle, t).unwrap() - (c - 1.0)).abs() < 1e-15);
        }
    }

    #[test]
    fn remark_lhs_on_zero_path_is_payoff_at_zero() {
        let grid = TimeGrid::new(1.0, 16).unwrap();
        let b = SamplePath::from_fn(grid, |_| 0.0);
        let bundle = AveragePathBundle::from_fbm(b).unwrap();
        let f = ConvexPayoff::AbsShift { center: -0.5 };
        let spec = IdentitySpec::theorem(
            IdentityKind::RemarkFbm,
            f.clone(),
            vec![0.5],
            Integrator::Riemann,
        )
        .unwrap();
        assert_eq!(lhs_value(&spec, &bundle, 0.5).unwrap(), f.eval(0.0));
    }

    #[test]
    fn integrand_reductions_and_endpoint_zero() {
        let bundle = fbm_bundle(64, 2);
        // affine slope 1 recovers the proposition integrand (T-s)/T G
        let thm = IdentitySpec::theorem(
            IdentityKind::ThmLimit1,
            ConvexPayoff::identity(),
            vec![1.0],
            Integrator::Riemann,
        )
        .unwrap();
        let phi = integrand_path(&thm, &bundle);
        for i in [0usize, 13, 40] {
            let t = bundle.grid().point(i);
            let expect = (1.0 - t) * bundle.g_path.value(i);
            assert_eq!(phi.value(i), expect * 1.0);
        }
        assert_eq!(phi.value(64), 0.0);

        // a far strike makes the call integrand vanish
        let far = IdentitySpec::theorem(
            IdentityKind::ThmLimit1,
            ConvexPayoff::Call { strike: 1e9 },
            vec![1.0],
            Integrator::Riemann,
        )
        .unwrap();
        assert!(integrand_path(&far, &bundle).values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn integrand_matches_direct_composition_at_sample_points() {
        let bundle = fbm_bundle(128, 3);
        let payoff = ConvexPayoff::quadratic(1.0, 0.0, 0.0).unwrap();
        let spec = IdentitySpec::theorem(
            IdentityKind::ThmLimit2,
            payoff.clone(),
            vec![1.0],
            Integrator::Riemann,
        )
        .unwrap();
        let phi = integrand_path(&spec, &bundle);
        for i in [5usize, 31, 64, 99, 127] {
            let t = bundle.grid().point(i);
            let direct = 2.0 * bundle.x_path.value(i) * (1.0 - t) * bundle.s_path.value(i);
            assert!((phi.value(i) - direct).abs() < 1e-14 * direct.abs().max(1.0));
        }
    }

    #[test]
    fn rhs_on_constant_path_is_constant() {
        let bundle = constant_bundle(64, 0.0);
        let spec = IdentitySpec::proposition(
            IdentityKind::PropArithmavg,
            vec![0.25, 1.0],
            Integrator::Riemann,
        )
        .unwrap();
        for t in [0.25, 1.0] {
            let r = rhs_value(&spec, &bundle, t).unwrap();
            for v in &r.values {
                assert!((v - 1.0).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn theorems_with_identity_payoff_reduce_bitwise_to_propositions() {
        let bundle = fbm_bundle(256, 4);
        for (prop_kind, thm_kind) in [
            (IdentityKind::PropHedge1, IdentityKind::ThmLimit1),
            (IdentityKind::PropArithmavg, IdentityKind::ThmLimit2),
        ] {
            let checkpoints = vec![0.25, 0.5, 1.0];
            let prop =
                IdentitySpec::proposition(prop_kind, checkpoints.clone(), Integrator::Riemann)
                    .unwrap();
            let thm = IdentitySpec::theorem(
                thm_kind,
                ConvexPayoff::identity(),
                checkpoints.clone(),
                Integrator::Riemann,
            )
            .unwrap();
            for &t in &checkpoints {
                assert_eq!(
                    lhs_value(&prop, &bundle, t).unwrap().to_bits(),
                    lhs_value(&thm, &bundle, t).unwrap().to_bits()
                );
                let rp = rhs_value(&prop, &bundle, t).unwrap();
                let rt = rhs_value(&thm, &bundle, t).unwrap();
                for (a, b) in rp.values.iter().zip(&rt.values) {
                    assert_eq!(a.to_bits(), b.to_bits());
                }
            }
        }
    }

    #[test]
    fn verify_identity_rejects_short_memory_h() {
        let spec =
            IdentitySpec::proposition(IdentityKind::PropHedge1, vec![1.0], Integrator::Riemann)
                .unwrap();
        let levels = PartitionSpec::dyadic(64, 2).unwrap();
        let err = verify_identity(
            &spec,
            HurstParam::new(0.5).unwrap_or(HurstParam::new(0.45).unwrap()),
            1.0,
            &levels,
            1,
            2,
        );
        assert!(err.is_err());
    }

    #[test]
    fn verify_identity_smoke_run() {
        let spec = IdentitySpec::proposition(
            IdentityKind::PropHedge1,
            vec![0.5, 1.0],
            Integrator::Riemann,
        )
        .unwrap();
        let levels = PartitionSpec::dyadic(128, 2).unwrap();
        let report = verify_identity(
            &spec,
            HurstParam::new(0.7).unwrap(),
            1.0,
            &levels,
            7,
            10,
        )
        .unwrap();
        assert_eq!(report.records.len(), 10 * 2 * 2);
        assert_eq!(report.summary.len(), 2);
        // desk-scale sanity: residuals are small even at these coarse grids
        assert!(report.top_level_median() < 0.05, "median {}", report.top_level_median());
        // checkpoint off the coarsest grid is rejected
        let bad = IdentitySpec::proposition(
            IdentityKind::PropHedge1,
            vec![1.0 / 3.0],
            Integrator::Riemann,
        )
        .unwrap();
        assert!(verify_identity(&bad, HurstParam::new(0.7).unwrap(), 1.0, &levels, 7, 2).is_err());
    }

    #[test]
    fn hedging_strategy_limits() {
        let bundle = fbm_bundle(64, 5);
        // strike far above: f'_- = 0 everywhere
        let deep_otm = ConvexPayoff::Call { strike: 1e9 };
        assert_eq!(hedging_strategy(&bundle, &deep_otm, 10), 0.0);
        // strike 0: f'_- = 1, psi = (T-s)/T S
        let deep_itm = ConvexPayoff::Call { strike: 0.0 };
        let t = bundle.grid().point(10);
        let expect = (1.0 - t) * bundle.s_path.value(10);
        assert!((hedging_strategy(&bundle, &deep_itm, 10) - expect).abs() < 1e-15);
        // psi -> 0 at maturity
        assert_eq!(hedging_strategy(&bundle, &deep_itm, 64), 0.0);
    }

    #[test]
    fn arbitrage_trivial_strikes() {
        let base = ArbitrageConfig {
            strike: 1e12,
            h: HurstParam::new(0.7).unwrap(),
            horizon: 1.0,
            n_steps: 128,
            t_obs: 0.5,
            n_paths: 50,
            master_seed: 11,
        };
        let r = arbitrage_experiment(&base).unwrap();
        assert_eq!(r.otm_count, 50);
        assert_eq!(r.itm_at_maturity_count, 0);

        let r = arbitrage_experiment(&ArbitrageConfig { strike: 0.0, ..base }).unwrap();
        // X > 0 always, so no path is OTM; reported, not an error
        assert_eq!(r.otm_count, 0);
        assert!(r.median_abs_residual.is_none());
    }

    #[test]
    fn mollified_call_integrals_converge_to_the_kink_value() {
        // Norm-convergence transfer: smoothing the call's left derivative
        // with a tanh ramp of width eps makes the integrand converge in
        // ||.||_{2,beta}, and the GLS integrals follow it to the kink-payoff
        // value. On a single path the signed gap can wobble (contributions of
        // opposite sign cancel differently at each eps), so the decay is
        // asserted on the median over a small path ensemble.
        let strike = 1.05;
        let beta = 0.35;
        let eps_levels = [0.8, 0.4, 0.2, 0.1, 0.05];
        let n_paths = 8;
        let mut gaps = vec![Vec::new(); eps_levels.len()];
        let mut norms = vec![Vec::new(); eps_levels.len()];
        for seed in 0..n_paths {
            let bundle = fbm_bundle(2048, 800 + seed);
            let grid = bundle.grid();
            let dt = grid.dt();
            let phi_of = |deriv: &dyn Fn(f64) -> f64| -> Vec<f64> {
                (0..grid.n_points())
                    .map(|i| {
                        let w = 1.0 - grid.point(i);
                        let gv = bundle.g_path.value(i);
                        w * deriv(gv) * gv
                    })
                    .collect()
            };
            let kink = phi_of(&|x| if x > strike { 1.0 } else { 0.0 });
            let i_kink =
                crate::frac_calc::gls_level_sum(&kink, bundle.b_path.values(), beta, dt);
            for (li, &eps) in eps_levels.iter().enumerate() {
                let smooth = phi_of(&|x: f64| 0.5 * (1.0 + ((x - strike) / eps).tanh()));
                let diff = SamplePath::new(
                    *grid,
                    smooth.iter().zip(&kink).map(|(a, b)| a - b).collect(),
                )
                .unwrap();
                norms[li].push(crate::frac_calc::besov_norm_2(
                    &diff,
                    crate::frac_calc::BesovIndex::new(beta).unwrap(),
                ));
                let i_eps =
                    crate::frac_calc::gls_level_sum(&smooth, bundle.b_path.values(), beta, dt);
                gaps[li].push((i_eps - i_kink).abs());
            }
        }
        let med_norms: Vec<f64> = norms.iter().map(|v| median(v)).collect();
        let med_gaps: Vec<f64> = gaps.iter().map(|v| median(v)).collect();
        assert!(
            med_norms.windows(2).all(|w| w[1] < w[0]),
            "median integrand norms not shrinking: {med_norms:?}"
        );
        assert!(
            med_gaps.windows(2).all(|w| w[1] <= w[0]),
            "median integral gaps not shrinking: {med_gaps:?}"
        );
        assert!(
            *med_gaps.last().unwrap() <= 0.25 * med_gaps.first().unwrap()
                && *med_gaps.last().unwrap() <= 0.02,
            "final median gap too large: {med_gaps:?}"
        );
    }

    #[test]
    fn shift_covariance_of_hedging() {
        // replacing B by B + ln c and K by cK scales psi and payoffs by c
        let c = 2.0f64;
        let bundle = fbm_bundle(128, 6);
        let shifted = AveragePathBundle::from_fbm(bundle.b_path.map(|v| v + c.ln())).unwrap();
        let k = 1.1;
        let f = ConvexPayoff::Call { strike: k };
        let fc = ConvexPayoff::Call { strike: c * k };
        for i in [0usize, 17, 64, 100] {
            let psi = hedging_strategy(&bundle, &f, i);
            let psi_c = hedging_strategy(&shifted, &fc, i);
            assert!((psi_c - c * psi).abs() < 1e-12 * psi.abs().max(1.0));
            let pay = f.eval(bundle.x_path.value(i));
            let pay_c = fc.eval(shifted.x_path.value(i));
            assert!((pay_c - c * pay).abs() < 1e-12 * pay.abs().max(1.0));
        }
    }
}
