//! Command-line experiment driver.
//!
//! Grammar: `fracpath <command> [--config FILE] [--key value ...] --out DIR`.
//! Every parameter is a `--key value` pair; a config file supplies the same
//! keys as flat `key = value` lines and flags win over the file. The
//! uniform pair grammar is parsed directly rather than through an
//! option-parsing crate, which would need one declared flag per key and
//! could not share the key set with the config files.
//!
//! All commands write their outputs plus a `manifest.json` listing each
//! output file with its SHA-256 digest. Only `verify` gates the exit status;
//! the exploratory commands exit 0 on any completed run.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::fbm::{FbmSampler, HurstParam, SampleMethod, SeedSpec};
use crate::frac_calc::{
    besov_norm_2, besov_w1_refinement, gls_integral_with, integrand_besov_check, AverageKind,
    BesovIndex, FiniteVerdict, GLS_DEFAULT_OVERSAMPLE,
};
use crate::funcderiv::{
    check_horizontal_chain_rule, check_product_rule, check_vertical_chain_rule, residual_sweep,
    residuals_monotone, BumpSpec, PathFunctional, RuleResidual, SmoothMap,
};
use crate::grid::{SamplePath, TimeGrid};
use crate::path_model::{AveragePathBundle, ConvexPayoff, ScalingProcess};
use crate::representation::{
    arbitrage_experiment, verify_identity, ArbitrageConfig, IdentityKind, IdentitySpec,
    Integrator,
};
use crate::riemann::{riemann_stieltjes, PartitionSpec, Tag};

/// Environment variable overriding `master_seed` everywhere.
pub const SEED_ENV: &str = "FRACPATH_SEED";

const MANIFEST_FILE: &str = "manifest.json";

/// Parse a flat `key = value` config file body. `#` starts a comment; blank
/// lines are ignored.
pub fn parse_config_str(body: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (lineno, raw) in body.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::Config(format!("line {}: expected 'key = value', got '{raw}'", lineno + 1))
        })?;
        let key = key.trim();
        let value = value.trim();
        if key.is_empty() || value.is_empty() {
            return Err(Error::Config(format!("line {}: empty key or value", lineno + 1)));
        }
        map.insert(key.to_string(), value.to_string());
    }
    Ok(map)
}

/// Serialize a config map back to the flat file format (sorted keys), the
/// inverse of [`parse_config_str`].
pub fn serialize_config(map: &BTreeMap<String, String>) -> String {
    let mut out = String::new();
    for (k, v) in map {
        let _ = writeln!(out, "{k} = {v}");
    }
    out
}

/// Raw command line split into the command word and its `--key value` pairs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawArgs {
    pub command: String,
    pub pairs: Vec<(String, String)>,
}

/// Split `fracpath <command> [--key value ...]` arguments (program name
/// already stripped).
pub fn parse_args(args: &[String]) -> Result<RawArgs> {
    let mut it = args.iter();
    let command = it
        .next()
        .ok_or_else(|| Error::Config("missing command; see `fracpath help`".to_string()))?
        .clone();
    if command.starts_with("--") {
        return Err(Error::Config(format!("expected a command before '{command}'")));
    }
    let mut pairs = Vec::new();
    while let Some(tok) = it.next() {
        let key = tok
            .strip_prefix("--")
            .ok_or_else(|| Error::Config(format!("expected '--key value', got '{tok}'")))?;
        if key.is_empty() {
            return Err(Error::Config("empty option name '--'".to_string()));
        }
        let value = it
            .next()
            .ok_or_else(|| Error::Config(format!("option '--{key}' is missing its value")))?;
        pairs.push((key.to_string(), value.clone()));
    }
    Ok(RawArgs { command, pairs })
}

/// Resolved parameters of one command: config file merged with flag
/// overrides (flags win) and `FRACPATH_SEED` applied on top of both.
#[derive(Debug, Clone)]
pub struct Params {
    map: BTreeMap<String, String>,
}

impl Params {
    /// Merge config file + flag pairs, validate the key set against the
    /// command's vocabulary and apply the seed environment override.
    fn resolve(
        pairs: &[(String, String)],
        allowed: &[&str],
        env_seed: Option<&str>,
    ) -> Result<(Params, Option<PathBuf>)> {
        let mut config_path = None;
        let mut out_dir = None;
        let mut overrides = Vec::new();
        for (k, v) in pairs {
            match k.as_str() {
                "config" => config_path = Some(PathBuf::from(v)),
                "out" => out_dir = Some(PathBuf::from(v)),
                _ => overrides.push((k.clone(), v.clone())),
            }
        }
        let mut map = match &config_path {
            Some(p) => parse_config_str(&std::fs::read_to_string(p)?)?,
            None => BTreeMap::new(),
        };
        for (k, v) in overrides {
            map.insert(k, v);
        }
        if let Some(seed) = env_seed {
            let parsed: u64 = seed.parse().map_err(|_| {
                Error::Config(format!("{SEED_ENV} must be an unsigned integer, got '{seed}'"))
            })?;
            map.insert("master_seed".to_string(), parsed.to_string());
        }
        for key in map.keys() {
            if !allowed.contains(&key.as_str()) {
                return Err(Error::Config(format!(
                    "unknown key '{key}' (expected one of: {})",
                    allowed.join(", ")
                )));
            }
        }
        Ok((Params { map }, out_dir))
    }

    pub fn snapshot(&self) -> &BTreeMap<String, String> {
        &self.map
    }

    fn raw(&self, key: &str) -> Option<&str> {
        self.map.get(key).map(|s| s.as_str())
    }

    fn get_str(&self, key: &str, default: &str) -> String {
        self.raw(key).unwrap_or(default).to_string()
    }

    fn get_f64(&self, key: &str, default: f64) -> Result<f64> {
        match self.raw(key) {
            None => Ok(default),
            Some(s) => s
                .parse()
                .map_err(|_| Error::Config(format!("invalid {key}: '{s}' is not a number"))),
        }
    }

    fn get_usize(&self, key: &str, default: usize) -> Result<usize> {
        match self.raw(key) {
            None => Ok(default),
            Some(s) => s.parse().map_err(|_| {
                Error::Config(format!("invalid {key}: '{s}' is not a nonnegative integer"))
            }),
        }
    }

    fn get_u64(&self, key: &str, default: u64) -> Result<u64> {
        match self.raw(key) {
            None => Ok(default),
            Some(s) => s.parse().map_err(|_| {
                Error::Config(format!("invalid {key}: '{s}' is not an unsigned integer"))
            }),
        }
    }

    fn get_bool(&self, key: &str, default: bool) -> Result<bool> {
        match self.raw(key) {
            None => Ok(default),
            Some("true") => Ok(true),
            Some("false") => Ok(false),
            Some(s) => Err(Error::Config(format!(
                "invalid {key}: expected true or false, got '{s}'"
            ))),
        }
    }

    fn get_f64_list(&self, key: &str, default: &[f64]) -> Result<Vec<f64>> {
        match self.raw(key) {
            None => Ok(default.to_vec()),
            Some(s) => s
                .split(',')
                .map(|tok| {
                    tok.trim().parse().map_err(|_| {
                        Error::Config(format!("invalid {key}: '{tok}' is not a number"))
                    })
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct OutputDigest {
    pub file: String,
    pub sha256: String,
}

/// Manifest written alongside every command's outputs.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub timestamp_unix: u64,
    pub config: BTreeMap<String, String>,
    pub outputs: Vec<OutputDigest>,
}

/// Output directory with atomic writes and digest bookkeeping.
struct OutDir {
    dir: PathBuf,
    outputs: Vec<OutputDigest>,
}

impl OutDir {
    fn new(dir: PathBuf) -> Result<Self> {
        std::fs::create_dir_all(&dir)?;
        Ok(OutDir {
            dir,
            outputs: Vec::new(),
        })
    }

    /// Write one output file atomically (temp file + rename) and record its
    /// digest.
    fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let target = self.dir.join(name);
        let tmp = self.dir.join(format!("{name}.tmp"));
        std::fs::write(&tmp, bytes)?;
        std::fs::rename(&tmp, &target)?;
        self.outputs.push(OutputDigest {
            file: name.to_string(),
            sha256: sha256_hex(bytes),
        });
        Ok(())
    }

    fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut bytes = serde_json::to_vec_pretty(value)?;
        bytes.push(b'\n');
        self.write(name, &bytes)
    }

    fn finish(mut self, command: &str, params: &Params) -> Result<()> {
        let manifest = RunManifest {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            timestamp_unix: std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
            config: params.snapshot().clone(),
            outputs: std::mem::take(&mut self.outputs),
        };
        let mut bytes = serde_json::to_vec_pretty(&manifest)?;
        bytes.push(b'\n');
        let tmp = self.dir.join(format!("{MANIFEST_FILE}.tmp"));
        std::fs::write(&tmp, &bytes)?;
        std::fs::rename(tmp, self.dir.join(MANIFEST_FILE))?;
        Ok(())
    }
}

/// Verify that every file listed in a directory's manifest exists and
/// matches its recorded digest.
pub fn check_manifest(dir: &Path) -> Result<()> {
    let body = std::fs::read_to_string(dir.join(MANIFEST_FILE))?;
    let manifest: serde_json::Value = serde_json::from_str(&body)?;
    let outputs = manifest["outputs"]
        .as_array()
        .ok_or_else(|| Error::Config("manifest has no outputs array".to_string()))?;
    for entry in outputs {
        let file = entry["file"]
            .as_str()
            .ok_or_else(|| Error::Config("manifest output without file name".to_string()))?;
        let want = entry["sha256"].as_str().unwrap_or("");
        let bytes = std::fs::read(dir.join(file))?;
        let got = sha256_hex(&bytes);
        if got != want {
            return Err(Error::Config(format!(
                "digest mismatch for {file}: manifest {want}, file {got}"
            )));
        }
    }
    Ok(())
}

fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut s = String::with_capacity(64);
    for b in digest {
        let _ = write!(s, "{b:02x}");
    }
    s
}

/// Run the CLI with already-split arguments (program name stripped).
/// Returns the process exit code: 0 success, 1 verify-gate failure,
/// 2 usage/validation/runtime error (the caller prints the error).
pub fn run(args: &[String]) -> Result<i32> {
    let raw = parse_args(args)?;
    if raw.command == "help" || raw.command == "--help" {
        print!("{}", usage());
        return Ok(0);
    }
    let env_seed = std::env::var(SEED_ENV).ok();
    dispatch(&raw, env_seed.as_deref())
}

type CommandSpec = (&'static [&'static str], fn(&Params, &mut OutDir) -> Result<i32>);

fn dispatch(raw: &RawArgs, env_seed: Option<&str>) -> Result<i32> {
    let spec: CommandSpec = match raw.command.as_str() {
        "generate" => (
            &["h", "horizon", "n_steps", "n_paths", "master_seed", "method", "bundle"],
            cmd_generate,
        ),
        "verify" => (
            &[
                "which", "payoff", "strike", "center", "qa", "qb", "qc", "h", "horizon",
                "coarsest_n", "n_levels", "n_paths", "master_seed", "integrator", "beta",
                "checkpoints", "max_median", "require_monotone",
            ],
            cmd_verify,
        ),
        "fraccalc" => (
            &["f", "g", "beta", "n_steps", "horizon", "oversample"],
            cmd_fraccalc,
        ),
        "besov" => (
            &[
                "mode", "h", "beta", "n_steps", "n_paths", "master_seed", "horizon", "average",
                "payoff", "strike", "center", "qa", "qb", "qc",
            ],
            cmd_besov,
        ),
        "scaling" => (
            &["process", "p", "h", "n_steps", "n_paths", "master_seed", "horizon"],
            cmd_scaling,
        ),
        "funcderiv" => (
            &[
                "functional", "phi", "h", "horizon", "n_steps", "master_seed", "t",
                "h_vertical", "h_horizontal", "n_levels", "richardson",
            ],
            cmd_funcderiv,
        ),
        "arbitrage" => (
            &["strike", "h", "horizon", "n_steps", "t_obs", "n_paths", "master_seed"],
            cmd_arbitrage,
        ),
        other => {
            return Err(Error::Config(format!(
                "unknown command '{other}'; expected generate | verify | fraccalc | besov | scaling | funcderiv | arbitrage"
            )))
        }
    };
    let (params, out_dir) = Params::resolve(&raw.pairs, spec.0, env_seed)?;
    let out_dir = out_dir
        .ok_or_else(|| Error::Config("missing required --out DIR".to_string()))?;
    let mut out = OutDir::new(out_dir)?;
    let code = spec.1(&params, &mut out)?;
    out.finish(&raw.command, &params)?;
    Ok(code)
}

pub fn usage() -> String {
    "fracpath <command> [--config FILE] [--key value ...] --out DIR\n\
     commands:\n\
     \u{20} generate   sample fBm paths (or full B/S/G/X bundles) to CSV\n\
     \u{20} verify     Monte Carlo check of a representation identity (gates exit status)\n\
     \u{20} fraccalc   GLS vs Riemann-Stieltjes integral on closed-form data\n\
     \u{20} besov      fractional Besov norm diagnostics of paths or integrands\n\
     \u{20} scaling    increment-moment scaling slope of fbm | log_g | x\n\
     \u{20} funcderiv  functional-derivative rule-check residual sweeps\n\
     \u{20} arbitrage  average-strike call replication experiment\n\
     environment: FRACPATH_SEED overrides master_seed\n"
        .to_string()
}

fn hurst(params: &Params) -> Result<HurstParam> {
    HurstParam::new(params.get_f64("h", 0.7)?)
}

fn payoff_from(params: &Params) -> Result<ConvexPayoff> {
    match params.get_str("payoff", "id").as_str() {
        "id" => Ok(ConvexPayoff::identity()),
        "call" => Ok(ConvexPayoff::Call {
            strike: params.get_f64("strike", 1.05)?,
        }),
        "put" => Ok(ConvexPayoff::Put {
            strike: params.get_f64("strike", 1.05)?,
        }),
        "abs_shift" => Ok(ConvexPayoff::AbsShift {
            center: params.get_f64("center", 1.0)?,
        }),
        "quadratic" => ConvexPayoff::quadratic(
            params.get_f64("qa", 1.0)?,
            params.get_f64("qb", 0.0)?,
            params.get_f64("qc", 0.0)?,
        ),
        other => Err(Error::Config(format!(
            "invalid payoff: '{other}' (expected id | call | put | abs_shift | quadratic)"
        ))),
    }
}

fn sample_method(params: &Params) -> Result<SampleMethod> {
    params.get_str("method", "circulant").parse()
}

fn cmd_generate(params: &Params, out: &mut OutDir) -> Result<i32> {
    let h = hurst(params)?;
    let horizon = params.get_f64("horizon", 1.0)?;
    let n_steps = params.get_usize("n_steps", 1024)?;
    let n_paths = params.get_usize("n_paths", 1)?;
    if n_paths == 0 {
        return Err(Error::invalid("n_paths", "need at least one path"));
    }
    let master_seed = params.get_u64("master_seed", 42)?;
    let bundle = params.get_bool("bundle", false)?;
    let grid = TimeGrid::new(horizon, n_steps)?;
    let sampler = FbmSampler::new(grid, h, sample_method(params)?)?;
    for i in 0..n_paths as u64 {
        let b = sampler.sample(SeedSpec::new(master_seed, i));
        let mut buf = Vec::new();
        let name = if bundle {
            AveragePathBundle::from_fbm(b)?.write_csv(&mut buf)?;
            format!("bundle_{i:04}.csv")
        } else {
            b.write_csv(&mut buf)?;
            format!("path_{i:04}.csv")
        };
        out.write(&name, &buf)?;
    }
    println!(
        "generate: {n_paths} path(s), H = {}, {n_steps} steps over [0, {horizon}]",
        h.value()
    );
    Ok(0)
}

fn cmd_verify(params: &Params, out: &mut OutDir) -> Result<i32> {
    let kind: IdentityKind = params.get_str("which", "prop_hedge1").parse()?;
    let h = hurst(params)?;
    let horizon = params.get_f64("horizon", 1.0)?;
    let coarsest_n = params.get_usize("coarsest_n", 1024)?;
    let n_levels = params.get_usize("n_levels", 3)?;
    let n_paths = params.get_usize("n_paths", 100)?;
    let master_seed = params.get_u64("master_seed", 42)?;
    let checkpoints =
        params.get_f64_list("checkpoints", &IdentitySpec::default_checkpoints(horizon))?;
    let integrator = match params.get_str("integrator", "riemann").as_str() {
        "riemann" => Integrator::Riemann,
        "gls" => {
            let beta = BesovIndex::new(params.get_f64("beta", 0.35)?)?;
            beta.check_window(h)?;
            Integrator::Gls { beta: beta.value() }
        }
        other => {
            return Err(Error::Config(format!(
                "invalid integrator: '{other}' (expected riemann | gls)"
            )))
        }
    };

    let payoff_key = params.get_str("payoff", "id");
    let (spec, smooth) = if kind.is_proposition() {
        if payoff_key != "id" {
            return Err(Error::Config(
                "the propositions imply the identity payoff; drop the payoff key or use a theorem"
                    .to_string(),
            ));
        }
        (IdentitySpec::proposition(kind, checkpoints, integrator)?, true)
    } else {
        let payoff = payoff_from(params)?;
        let smooth = matches!(
            payoff,
            ConvexPayoff::Affine { .. } | ConvexPayoff::Quadratic { .. }
        );
        (IdentitySpec::theorem(kind, payoff, checkpoints, integrator)?, smooth)
    };
    let default_median = if kind.is_proposition() {
        0.005
    } else if smooth {
        0.01
    } else {
        0.02
    };
    let max_median = params.get_f64("max_median", default_median)?;
    let require_monotone = params.get_bool("require_monotone", true)?;

    let levels = PartitionSpec::dyadic(coarsest_n, n_levels)?;
    let report = verify_identity(&spec, h, horizon, &levels, master_seed, n_paths)?;

    out.write_json("report.json", &report)?;
    let mut csv = Vec::new();
    report.write_csv(&mut csv)?;
    out.write("residuals.csv", &csv)?;

    println!("verify: {}", report.spec);
    for s in &report.summary {
        println!(
            "  n = {:6}: median |rel residual| = {:.3e}, p95 = {:.3e}",
            s.level_n, s.median_relative, s.p95_relative
        );
    }
    let median_ok = report.top_level_median() <= max_median;
    let monotone_ok = !require_monotone || report.monotone_refinement;
    if median_ok && monotone_ok {
        println!(
            "verify: PASS (top-level median {:.3e} <= {max_median:.3e}, refinement monotone: {})",
            report.top_level_median(),
            report.monotone_refinement
        );
        Ok(0)
    } else {
        println!(
            "verify: FAIL (top-level median {:.3e}, threshold {max_median:.3e}, \
             refinement monotone: {})",
            report.top_level_median(),
            report.monotone_refinement
        );
        Ok(1)
    }
}

fn monomial(selector: &str) -> Result<fn(f64) -> f64> {
    Ok(match selector {
        "one" => |_| 1.0,
        "id" => |t| t,
        "square" => |t| t * t,
        "cube" => |t| t * t * t,
        other => {
            return Err(Error::Config(format!(
                "invalid function selector '{other}' (expected one | id | square | cube)"
            )))
        }
    })
}

fn cmd_fraccalc(params: &Params, out: &mut OutDir) -> Result<i32> {
    let f_sel = params.get_str("f", "one");
    let g_sel = params.get_str("g", "id");
    let beta = BesovIndex::new(params.get_f64("beta", 0.35)?)?;
    let n_steps = params.get_usize("n_steps", 8192)?;
    let horizon = params.get_f64("horizon", 1.0)?;
    let oversample = params.get_usize("oversample", GLS_DEFAULT_OVERSAMPLE)?;
    let grid = TimeGrid::new(horizon, n_steps)?;
    let f = SamplePath::from_fn(grid, monomial(&f_sel)?);
    let g = SamplePath::from_fn(grid, monomial(&g_sel)?);

    let gls = gls_integral_with(&f, &g, beta, horizon, oversample)?;
    let spec = PartitionSpec::dyadic(n_steps / 4, 3)?;
    let riemann = riemann_stieltjes(&f, &g, &spec, Tag::Midpoint)?;

    out.write_json("gls.json", &gls)?;
    out.write_json("riemann.json", &riemann)?;
    println!(
        "fraccalc: int {f_sel} d({g_sel}) over [0, {horizon}]: gls = {:.9}, riemann = {:.9} \
         (disagreement {:.3e})",
        gls.value,
        riemann.value,
        (gls.value - riemann.value).abs()
    );
    Ok(0)
}

#[derive(Serialize)]
struct BesovPathRecord {
    path_index: u64,
    w1: crate::frac_calc::BesovDiagnostic,
    w2_norm: f64,
}

#[derive(Serialize)]
struct BesovIntegrandRecord {
    path_index: u64,
    check: crate::frac_calc::IntegrandCheck,
}

fn cmd_besov(params: &Params, out: &mut OutDir) -> Result<i32> {
    let h = hurst(params)?;
    let horizon = params.get_f64("horizon", 1.0)?;
    let n_steps = params.get_usize("n_steps", 4096)?;
    let n_paths = params.get_usize("n_paths", 1)?;
    let master_seed = params.get_u64("master_seed", 42)?;
    let mode = params.get_str("mode", "path");
    let grid = TimeGrid::new(horizon, n_steps)?;
    let sampler = FbmSampler::new(grid, h, SampleMethod::Circulant)?;

    match mode.as_str() {
        "path" => {
            let beta = BesovIndex::new(params.get_f64("beta", h.value() - 0.05)?)?;
            let mut records = Vec::with_capacity(n_paths);
            for i in 0..n_paths as u64 {
                let b = sampler.sample(SeedSpec::new(master_seed, i));
                records.push(BesovPathRecord {
                    path_index: i,
                    w1: besov_w1_refinement(&b, beta)?,
                    w2_norm: besov_norm_2(&b, beta),
                });
            }
            let stable = records
                .iter()
                .filter(|r| r.w1.verdict == crate::frac_calc::BesovVerdict::Stable)
                .count();
            out.write_json("besov.json", &records)?;
            println!(
                "besov: {n_paths} path(s), beta = {}, W1 stable on {stable}/{n_paths}",
                beta.value()
            );
        }
        "integrand" => {
            let beta = BesovIndex::new(params.get_f64("beta", 0.35)?)?;
            let which = match params.get_str("average", "geom").as_str() {
                "geom" => AverageKind::Geom,
                "arith" => AverageKind::Arith,
                other => {
                    return Err(Error::Config(format!(
                        "invalid average: '{other}' (expected geom | arith)"
                    )))
                }
            };
            let payoff = payoff_from(params)?;
            let mut records = Vec::with_capacity(n_paths);
            for i in 0..n_paths as u64 {
                let bundle =
                    AveragePathBundle::from_fbm(sampler.sample(SeedSpec::new(master_seed, i)))?;
                records.push(BesovIntegrandRecord {
                    path_index: i,
                    check: integrand_besov_check(&bundle, &payoff, which, h, beta)?,
                });
            }
            let finite = records
                .iter()
                .filter(|r| r.check.verdict == FiniteVerdict::Finite)
                .count();
            out.write_json("besov.json", &records)?;
            println!(
                "besov: integrand ({}, {}), beta = {}, finite verdict on {finite}/{n_paths}",
                params.get_str("average", "geom"),
                payoff.describe(),
                beta.value()
            );
        }
        other => {
            return Err(Error::Config(format!(
                "invalid mode: '{other}' (expected path | integrand)"
            )))
        }
    }
    Ok(0)
}

#[derive(Serialize)]
struct ScalingReport {
    process: String,
    p: f64,
    h: f64,
    slope: f64,
    expected: f64,
}

fn cmd_scaling(params: &Params, out: &mut OutDir) -> Result<i32> {
    let process: ScalingProcess = params.get_str("process", "fbm").parse()?;
    let p = params.get_f64("p", 2.0)?;
    let h = hurst(params)?;
    let n_steps = params.get_usize("n_steps", 1024)?;
    let n_paths = params.get_usize("n_paths", 2000)?;
    let master_seed = params.get_u64("master_seed", 42)?;
    let horizon = params.get_f64("horizon", 1.0)?;
    let grid = TimeGrid::new(horizon, n_steps)?;
    let slope =
        crate::path_model::increment_moment_scaling(process, p, h, n_paths, &grid, master_seed)?;
    let report = ScalingReport {
        process: params.get_str("process", "fbm"),
        p,
        h: h.value(),
        slope,
        expected: p * h.value(),
    };
    out.write_json("scaling.json", &report)?;
    println!(
        "scaling: {} p = {p}: slope = {slope:.4} (expected {:.4})",
        report.process, report.expected
    );
    Ok(0)
}

#[derive(Serialize)]
struct FuncDerivSummary {
    functional: String,
    phi: String,
    t: f64,
    vertical_chain_monotone: bool,
    product_rule_monotone: bool,
    horizontal_chain_monotone: bool,
}

fn sweep_csv(rows: &[RuleResidual], horizontal: bool) -> Vec<u8> {
    let mut s = String::from("h,residual\n");
    for r in rows {
        let h = if horizontal { r.h_horizontal } else { r.h_vertical };
        let _ = writeln!(s, "{:.17e},{:.17e}", h, r.residual);
    }
    s.into_bytes()
}

fn cmd_funcderiv(params: &Params, out: &mut OutDir) -> Result<i32> {
    let h = hurst(params)?;
    let horizon = params.get_f64("horizon", 1.0)?;
    let n_steps = params.get_usize("n_steps", 256)?;
    let master_seed = params.get_u64("master_seed", 42)?;
    let t = params.get_f64("t", 0.5 * horizon)?;
    let n_levels = params.get_usize("n_levels", 4)?;
    let richardson = params.get_bool("richardson", false)?;
    let grid = TimeGrid::new(horizon, n_steps)?;
    let x = FbmSampler::new(grid, h, SampleMethod::Circulant)?
        .sample(SeedSpec::new(master_seed, 0));
    let h_vertical = params.get_f64("h_vertical", 1e-2)?;
    let h_horizontal = params.get_f64("h_horizontal", 16.0 * grid.dt())?;
    let spec = BumpSpec::new(h_vertical, h_horizontal, richardson)?;

    let functional = match params.get_str("functional", "geom").as_str() {
        "endpoint_square" => PathFunctional::EndpointSquare,
        "running_integral" => PathFunctional::RunningIntegral,
        "geom" => PathFunctional::geom(horizon)?,
        "arith" => PathFunctional::arith(horizon)?,
        other => {
            return Err(Error::Config(format!(
                "invalid functional: '{other}' (expected endpoint_square | running_integral | geom | arith)"
            )))
        }
    };
    let phi = match params.get_str("phi", "exp").as_str() {
        "id" => SmoothMap::Identity,
        "square" => SmoothMap::Square,
        "exp" => SmoothMap::Exp,
        other => {
            return Err(Error::Config(format!(
                "invalid phi: '{other}' (expected id | square | exp)"
            )))
        }
    };

    let vertical = residual_sweep(
        |s| check_vertical_chain_rule(phi, &functional, &x, t, s),
        &spec,
        n_levels,
    )?;
    let product = residual_sweep(
        |s| check_product_rule(&functional, &functional, &x, t, s),
        &spec,
        n_levels,
    )?;
    let horizontal = residual_sweep(
        |s| check_horizontal_chain_rule(phi, &functional, &x, t, s),
        &spec,
        n_levels,
    )?;

    out.write("vertical_chain.csv", &sweep_csv(&vertical, false))?;
    out.write("product_rule.csv", &sweep_csv(&product, false))?;
    out.write("horizontal_chain.csv", &sweep_csv(&horizontal, true))?;
    let summary = FuncDerivSummary {
        functional: functional.describe(),
        phi: phi.label().to_string(),
        t,
        vertical_chain_monotone: residuals_monotone(&vertical),
        product_rule_monotone: residuals_monotone(&product),
        horizontal_chain_monotone: residuals_monotone(&horizontal),
    };
    out.write_json("summary.json", &summary)?;
    println!(
        "funcderiv: {} with phi = {}: residual sweeps monotone = {}/{}/{} (vertical/product/horizontal)",
        summary.functional,
        summary.phi,
        summary.vertical_chain_monotone,
        summary.product_rule_monotone,
        summary.horizontal_chain_monotone
    );
    Ok(0)
}

fn cmd_arbitrage(params: &Params, out: &mut OutDir) -> Result<i32> {
    let cfg = ArbitrageConfig {
        strike: params.get_f64("strike", 1.0)?,
        h: hurst(params)?,
        horizon: params.get_f64("horizon", 1.0)?,
        n_steps: params.get_usize("n_steps", 4096)?,
        t_obs: params.get_f64("t_obs", 0.5)?,
        n_paths: params.get_usize("n_paths", 10_000)?,
        master_seed: params.get_u64("master_seed", 42)?,
    };
    let report = arbitrage_experiment(&cfg)?;
    out.write_json("arbitrage.json", &report)?;
    println!(
        "arbitrage: K = {}, {} paths: OTM at t_obs {} ({:.1}%), ITM at maturity among them {} \
         ({}), median |replication residual| {}",
        report.strike,
        report.n_paths,
        report.otm_count,
        100.0 * report.otm_fraction,
        report.itm_at_maturity_count,
        report
            .itm_fraction_among_otm
            .map(|f| format!("{:.2}%", 100.0 * f))
            .unwrap_or_else(|| "n/a".to_string()),
        report
            .median_abs_residual
            .map(|r| format!("{r:.3e}"))
            .unwrap_or_else(|| "n/a".to_string()),
    );
    Ok(0)
}
