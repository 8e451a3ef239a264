//! Config-driven batch runner behind the `minimaxkern` binary.
//!
//! Config files are line oriented: `key = value`, `#` starts a comment,
//! lists are comma separated. Each run writes `<command>.csv` and
//! `<command>.json` (a manifest) into the output directory.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::Parser;
use serde_json::json;

use crate::error::{Error, Result};
use crate::estimator::{decompose, EstimatorConfig};
use crate::holder::{check_weak_holder, validate_beta};
use crate::lowerbound::{bayes_bound_with_kernel, build_kernel, sigma_nu_sq, DEFAULT_KERNEL_RESOLUTION};
use crate::martingale::truncation_report;
use crate::model::{FunctionSpec, NoiseSpec, ScaleSpec};
use crate::par::{with_threads, Execution};
use crate::risk::{risk_row, FamilyBuilder, RiskConfig, FAMILY_LABELS};

/// Environment variable that overrides the configured seed.
pub const SEED_ENV: &str = "MINIMAXKERN_SEED";
pub const DEFAULT_SEED: u64 = 42;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_MODULE: i32 = 3;

const RISK_HEADER: &str = "n,beta,z0,delta,function,noise,qn,phin,risk_mc,stderr,risk_oracle,bias_phin_Bn";

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    RiskTable,
    LowerBound,
    CltCheck,
    HolderCheck,
    Convergence,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::RiskTable => "risk-table",
            Command::LowerBound => "lower-bound",
            Command::CltCheck => "clt-check",
            Command::HolderCheck => "holder-check",
            Command::Convergence => "convergence",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        [
            Command::RiskTable,
            Command::LowerBound,
            Command::CltCheck,
            Command::HolderCheck,
            Command::Convergence,
        ]
        .into_iter()
        .find(|c| c.name() == s)
    }

    fn file_stem(self) -> String {
        self.name().replace('-', "_")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SeedSource {
    Default,
    Config,
    Environment,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct ExperimentConfig {
    pub command: Command,
    pub n_list: Vec<usize>,
    pub beta: f64,
    pub z0: f64,
    pub delta_list: Vec<f64>,
    pub reps: usize,
    pub seed: u64,
    pub seed_source: SeedSource,
    pub alpha: [f64; 4],
    pub noises: Vec<String>,
    pub functions: Vec<String>,
    pub nu_list: Vec<f64>,
    pub b_list: Vec<f64>,
    pub output: PathBuf,
}

impl ExperimentConfig {
    pub fn scale(&self) -> ScaleSpec {
        let [a0, a1, a2, a3] = self.alpha;
        ScaleSpec::new(a0, a1, a2, a3).expect("validated by parse_config")
    }

    pub fn noise_specs(&self) -> Vec<NoiseSpec> {
        self.noises
            .iter()
            .map(|l| NoiseSpec::from_label(l).expect("validated by parse_config"))
            .collect()
    }

    /// Replaces the seed with the value of [`SEED_ENV`], if given.
    pub fn apply_seed_override(&mut self, value: Option<&str>) -> Result<()> {
        if let Some(v) = value {
            self.seed = v.trim().parse().map_err(|_| Error::Config {
                line: 0,
                message: format!("{SEED_ENV} = `{v}` is not a 64-bit unsigned integer"),
            })?;
            self.seed_source = SeedSource::Environment;
        }
        Ok(())
    }
}

const KEYS: [&str; 17] = [
    "command",
    "n_list",
    "beta",
    "z0",
    "delta_list",
    "reps",
    "seed",
    "alpha0",
    "alpha1",
    "alpha2",
    "alpha3",
    "noises",
    "functions",
    "nu_list",
    "b_list",
    "output",
    "#",
];

fn config_err(line: usize, message: impl Into<String>) -> Error {
    Error::Config {
        line,
        message: message.into(),
    }
}

fn parse_list<T: std::str::FromStr>(line: usize, key: &str, value: &str) -> Result<Vec<T>> {
    let items: Vec<&str> = value.split(',').map(str::trim).filter(|s| !s.is_empty()).collect();
    if items.is_empty() {
        return Err(config_err(line, format!("`{key}` needs at least one value")));
    }
    items
        .iter()
        .map(|s| {
            s.parse::<T>()
                .map_err(|_| config_err(line, format!("`{key}`: cannot parse `{s}`")))
        })
        .collect()
}

/// Accepts plain integers and exact scientific forms such as `1e5`.
fn parse_count(line: usize, key: &str, s: &str) -> Result<usize> {
    if let Ok(v) = s.parse::<usize>() {
        return Ok(v);
    }
    match s.parse::<f64>() {
        Ok(f) if f >= 0.0 && f.fract() == 0.0 && f <= 1e15 => Ok(f as usize),
        _ => Err(config_err(
            line,
            format!("`{key}`: `{s}` is not a non-negative integer"),
        )),
    }
}

fn parse_real(line: usize, key: &str, s: &str) -> Result<f64> {
    s.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| config_err(line, format!("`{key}`: cannot parse `{s}` as a real number")))
}

/// Parses and validates a config file. Errors name the offending line.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let mut entries: BTreeMap<&str, (usize, &str)> = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| config_err(line, format!("expected `key = value`, got `{content}`")))?;
        let (key, value) = (key.trim(), value.trim());
        if !KEYS[..KEYS.len() - 1].contains(&key) {
            return Err(config_err(line, format!("unknown key `{key}`")));
        }
        if value.is_empty() {
            return Err(config_err(line, format!("`{key}` has no value")));
        }
        if let Some((first, _)) = entries.insert(key, (line, value)) {
            return Err(config_err(line, format!("`{key}` already set on line {first}")));
        }
    }
    let get = |k: &str| entries.get(k).copied();

    let command = match get("command") {
        Some((line, v)) => Command::parse(v).ok_or_else(|| config_err(line, format!("unknown command `{v}`")))?,
        None => return Err(config_err(0, "missing required key `command`")),
    };

    let n_list = match get("n_list") {
        Some((line, v)) => {
            let items: Vec<usize> = v
                .split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(|s| parse_count(line, "n_list", s))
                .collect::<Result<_>>()?;
            if items.is_empty() || items.contains(&0) {
                return Err(config_err(line, "`n_list` needs positive integers"));
            }
            items
        }
        None => vec![1_000, 10_000, 100_000],
    };

    let beta = match get("beta") {
        Some((line, v)) => {
            let b = parse_real(line, "beta", v)?;
            validate_beta(b).map_err(|_| config_err(line, format!("beta = {b} outside β ∈ (1, 2]")))?;
            b
        }
        None => 2.0,
    };

    let z0 = match get("z0") {
        Some((line, v)) => {
            let z = parse_real(line, "z0", v)?;
            if !(z > 0.0 && z < 1.0) {
                return Err(config_err(line, format!("z0 = {z} outside (0, 1)")));
            }
            z
        }
        None => 0.5,
    };

    let delta_list = match get("delta_list") {
        Some((line, v)) => {
            let d: Vec<f64> = parse_list(line, "delta_list", v)?;
            if let Some(bad) = d.iter().find(|x| !(**x > 0.0 && **x < 1.0)) {
                return Err(config_err(line, format!("delta = {bad} outside (0, 1)")));
            }
            d
        }
        None => vec![0.1],
    };

    let reps = match get("reps") {
        Some((line, v)) => {
            let r = parse_count(line, "reps", v)?;
            if r < 2 {
                return Err(config_err(line, "`reps` must be at least 2"));
            }
            r
        }
        None => crate::risk::DEFAULT_REPS,
    };

    let (seed, seed_source) = match get("seed") {
        Some((line, v)) => (
            v.parse::<u64>()
                .map_err(|_| config_err(line, format!("seed `{v}` is not a 64-bit unsigned integer")))?,
            SeedSource::Config,
        ),
        None => (DEFAULT_SEED, SeedSource::Default),
    };

    let defaults = [1.0, 0.5, 0.5, 0.5];
    let mut alpha = defaults;
    for (i, key) in ["alpha0", "alpha1", "alpha2", "alpha3"].iter().enumerate() {
        if let Some((line, v)) = get(key) {
            alpha[i] = parse_real(line, key, v)?;
        }
    }
    if let Err(e) = ScaleSpec::new(alpha[0], alpha[1], alpha[2], alpha[3]) {
        let line = ["alpha0", "alpha1", "alpha2", "alpha3"]
            .iter()
            .filter_map(|k| get(k).map(|(l, _)| l))
            .min()
            .unwrap_or(0);
        return Err(config_err(line, e.to_string()));
    }

    let noises = match get("noises") {
        Some((line, v)) => {
            let labels: Vec<String> = parse_list(line, "noises", v)?;
            expand_all(labels, || {
                NoiseSpec::catalog().iter().map(|p| p.label().to_string()).collect()
            })
            .into_iter()
            .map(|l| {
                NoiseSpec::from_label(&l)
                    .map(|_| l.clone())
                    .ok_or_else(|| config_err(line, format!("unknown noise `{l}`")))
            })
            .collect::<Result<Vec<_>>>()?
        }
        None => vec!["gaussian".to_string()],
    };

    let functions = match get("functions") {
        Some((line, v)) => {
            let labels: Vec<String> = parse_list(line, "functions", v)?;
            let labels = expand_all(labels, || FAMILY_LABELS.iter().map(|s| s.to_string()).collect());
            if let Some(bad) = labels.iter().find(|l| !FAMILY_LABELS.contains(&l.as_str())) {
                return Err(config_err(line, format!("unknown function `{bad}`")));
            }
            labels
        }
        None => FAMILY_LABELS.iter().map(|s| s.to_string()).collect(),
    };

    let nu_list = match get("nu_list") {
        Some((line, v)) => {
            let l: Vec<f64> = parse_list(line, "nu_list", v)?;
            if let Some(bad) = l.iter().find(|x| !(**x > 0.0 && **x < 0.25)) {
                return Err(config_err(line, format!("nu = {bad} outside (0, 1/4)")));
            }
            l
        }
        None => vec![0.2, 0.1, 0.05, 0.01],
    };

    let b_list = match get("b_list") {
        Some((line, v)) => {
            let l: Vec<f64> = parse_list(line, "b_list", v)?;
            if let Some(bad) = l.iter().find(|x| !(**x > 1.0)) {
                return Err(config_err(line, format!("b = {bad} must exceed 1")));
            }
            l
        }
        None => vec![4.0, 16.0, 100.0, 10_000.0],
    };

    let output = get("output")
        .map(|(_, v)| PathBuf::from(v))
        .unwrap_or_else(|| PathBuf::from("out"));

    Ok(ExperimentConfig {
        command,
        n_list,
        beta,
        z0,
        delta_list,
        reps,
        seed,
        seed_source,
        alpha,
        noises,
        functions,
        nu_list,
        b_list,
        output,
    })
}

fn expand_all(labels: Vec<String>, all: impl Fn() -> Vec<String>) -> Vec<String> {
    let mut out = Vec::new();
    for l in labels {
        if l == "all" {
            out.extend(all());
        } else {
            out.push(l);
        }
    }
    out
}

/// 12 significant digits in scientific notation; `nan`/`inf` spelled out.
pub fn fmt_num(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        }
    } else {
        format!("{x:.11e}")
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Output of one run: the CSV body and run-specific manifest entries.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub csv: String,
    pub rows: usize,
    pub details: serde_json::Value,
}

fn progress(quiet: bool, msg: impl FnOnce() -> String) {
    if !quiet {
        eprintln!("{}", msg());
    }
}

/// Builds the family for one `(n, δ)` cell in config order.
fn family_for(builder: &mut FamilyBuilder, cfg: &ExperimentConfig, n: usize) -> Result<Vec<FunctionSpec>> {
    let labels: Vec<&str> = cfg.functions.iter().map(String::as_str).collect();
    builder.family(&labels, n)
}

fn sorted_labels(v: &[String]) -> Vec<String> {
    let mut s = v.to_vec();
    s.sort();
    s.dedup();
    s
}

fn run_risk_table(cfg: &ExperimentConfig, exec: Execution, quiet: bool) -> Result<RunOutput> {
    let scale = cfg.scale();
    let mut n_list = cfg.n_list.clone();
    n_list.sort_unstable();
    n_list.dedup();
    let mut deltas = cfg.delta_list.clone();
    deltas.sort_by(f64::total_cmp);
    deltas.dedup();
    let functions = sorted_labels(&cfg.functions);
    let noises = sorted_labels(&cfg.noises);
    let mut builder = FamilyBuilder::new(cfg.z0, deltas[0], cfg.beta)?;
    let mut out = String::from(RISK_HEADER);
    out.push('\n');
    let mut rows = 0;
    for &n in &n_list {
        let ecfg = EstimatorConfig::new(n, cfg.beta, cfg.z0)?;
        for &delta in &deltas {
            builder = builder.at_delta(delta)?;
            let labels: Vec<&str> = functions.iter().map(String::as_str).collect();
            let family = builder.family(&labels, n)?;
            let base = RiskConfig::new(
                ecfg,
                delta,
                cfg.reps,
                cfg.seed,
                family.clone(),
                scale,
                NoiseSpec::gaussian(),
            )?
            .with_execution(exec);
            for s in &family {
                for label in &noises {
                    let noise = NoiseSpec::from_label(label).expect("validated");
                    progress(quiet, || {
                        format!("risk-table n={n} delta={delta} function={} noise={label}", s.label())
                    });
                    let row = risk_row(s, &base.with_noise(noise))?;
                    let oracle = row.risk_oracle.map(fmt_num).unwrap_or_default();
                    writeln!(
                        out,
                        "{n},{},{},{},{},{},{},{},{},{},{},{}",
                        fmt_num(cfg.beta),
                        fmt_num(cfg.z0),
                        fmt_num(delta),
                        csv_field(&row.function),
                        csv_field(&row.noise),
                        row.q_n,
                        fmt_num(row.phi_n),
                        fmt_num(row.risk_mc),
                        fmt_num(row.stderr),
                        oracle,
                        fmt_num(row.bias_phin_bn)
                    )
                    .expect("writing to a String");
                    rows += 1;
                }
            }
        }
    }
    Ok(RunOutput {
        csv: out,
        rows,
        details: json!({ "family_labels": functions, "noise_labels": noises }),
    })
}

fn run_lower_bound(cfg: &ExperimentConfig, quiet: bool) -> Result<RunOutput> {
    let scale = cfg.scale();
    let g0 = scale.eval(cfg.z0, &FunctionSpec::constant(0.0));
    let mut out = String::from("nu,b,sigma_nu_sq,bayes_bound\n");
    let mut rows = 0;
    for &nu in &cfg.nu_list {
        progress(quiet, || format!("lower-bound nu={nu}"));
        let kernel = build_kernel(nu, DEFAULT_KERNEL_RESOLUTION)?;
        let s2 = sigma_nu_sq(&kernel, g0);
        for &b in &cfg.b_list {
            let bound = bayes_bound_with_kernel(&kernel, b, g0)?;
            writeln!(out, "{},{},{},{}", fmt_num(nu), fmt_num(b), fmt_num(s2), fmt_num(bound)).expect("String");
            rows += 1;
        }
    }
    Ok(RunOutput {
        csv: out,
        rows,
        details: json!({
            "g_z0_at_zero_function": g0,
            "kernel_resolution": DEFAULT_KERNEL_RESOLUTION,
            "kernel_grid": crate::lowerbound::KERNEL_GRID,
        }),
    })
}

fn run_clt_check(cfg: &ExperimentConfig, exec: Execution, quiet: bool) -> Result<RunOutput> {
    if cfg.reps < 100 {
        return Err(Error::Config {
            line: 0,
            message: format!("clt-check needs reps >= 100, got {}", cfg.reps),
        });
    }
    let scale = cfg.scale();
    let mut builder = FamilyBuilder::new(cfg.z0, cfg.delta_list[0], cfg.beta)?;
    let mut out = String::from(
        "noise,n,function,a_n,K_p,r_n,ks_distance,a_threshold,tau_n,second_moment_zeta_dd,second_moment_mc,second_moment_se\n",
    );
    let mut rows = 0;
    for label in &cfg.noises {
        let noise = NoiseSpec::from_label(label).expect("validated");
        for &n in &cfg.n_list {
            let ecfg = EstimatorConfig::new(n, cfg.beta, cfg.z0)?;
            for s in family_for(&mut builder, cfg, n)? {
                progress(quiet, || {
                    format!("clt-check noise={label} n={n} function={}", s.label())
                });
                let r = truncation_report(&s, &scale, &noise, &ecfg, cfg.reps, cfg.seed, exec)?;
                writeln!(
                    out,
                    "{},{n},{},{},{},{},{},{},{},{},{},{}",
                    csv_field(label),
                    csv_field(s.label()),
                    fmt_num(r.a_n),
                    fmt_num(r.k_p),
                    fmt_num(r.r_n),
                    fmt_num(r.ks_distance),
                    fmt_num(r.a_threshold),
                    r.tau_n,
                    fmt_num(r.second_moment_zeta_dd),
                    fmt_num(r.second_moment_mc),
                    fmt_num(r.second_moment_se)
                )
                .expect("String");
                rows += 1;
            }
        }
    }
    let certificates: Vec<_> = cfg.noise_specs().iter().map(NoiseSpec::certify).collect();
    Ok(RunOutput {
        csv: out,
        rows,
        details: json!({ "noise_certificates": certificates }),
    })
}

fn run_holder_check(cfg: &ExperimentConfig, quiet: bool) -> Result<RunOutput> {
    let mut out = String::from("n,delta,function,member,sup_derivative,derivative_limit,max_defect,worst_h\n");
    let mut rows = 0;
    let mut builder = FamilyBuilder::new(cfg.z0, cfg.delta_list[0], cfg.beta)?;
    for &n in &cfg.n_list {
        for &delta in &cfg.delta_list {
            builder = builder.at_delta(delta)?;
            progress(quiet, || format!("holder-check n={n} delta={delta}"));
            for s in family_for(&mut builder, cfg, n)? {
                let r = check_weak_holder(&s, &builder.params);
                writeln!(
                    out,
                    "{n},{},{},{},{},{},{},{}",
                    fmt_num(delta),
                    csv_field(s.label()),
                    r.member,
                    fmt_num(r.sup_derivative),
                    fmt_num(r.derivative_limit),
                    fmt_num(r.max_defect),
                    fmt_num(r.worst_h)
                )
                .expect("String");
                rows += 1;
            }
        }
    }
    Ok(RunOutput {
        csv: out,
        rows,
        details: json!({
            "h_points": crate::holder::DEFAULT_H_POINTS,
            "h_ratio": crate::holder::DEFAULT_H_RATIO,
            "resolution": crate::holder::DEFAULT_RESOLUTION,
        }),
    })
}

fn run_convergence(cfg: &ExperimentConfig, quiet: bool) -> Result<RunOutput> {
    let scale = cfg.scale();
    let mut out =
        String::from("n,delta,function,qn,sigma_n_sq,g_sq_z0,sigma_rel_gap,r_n,r_n_bound,bias_phin_Bn,integral_term\n");
    let mut rows = 0;
    let mut builder = FamilyBuilder::new(cfg.z0, cfg.delta_list[0], cfg.beta)?;
    for &n in &cfg.n_list {
        let ecfg = EstimatorConfig::new(n, cfg.beta, cfg.z0)?;
        for &delta in &cfg.delta_list {
            builder = builder.at_delta(delta)?;
            progress(quiet, || format!("convergence n={n} delta={delta}"));
            for s in family_for(&mut builder, cfg, n)? {
                let d = decompose(&s, &scale, &ecfg, None)?;
                let g2 = scale.bind(&s).g_squared(cfg.z0);
                writeln!(
                    out,
                    "{n},{},{},{},{},{},{},{},{},{},{}",
                    fmt_num(delta),
                    csv_field(s.label()),
                    d.q_n,
                    fmt_num(d.sigma_n_sq),
                    fmt_num(g2),
                    fmt_num((d.sigma_n_sq - g2).abs() / g2),
                    fmt_num(d.r_n),
                    fmt_num(6.0 / (delta * n as f64)),
                    fmt_num(ecfg.phi_n * d.b_n.abs()),
                    fmt_num(d.integral_term)
                )
                .expect("String");
                rows += 1;
            }
        }
    }
    Ok(RunOutput {
        csv: out,
        rows,
        details: json!({}),
    })
}

/// Runs the configured command and returns the CSV body.
pub fn execute(cfg: &ExperimentConfig, exec: Execution, quiet: bool) -> Result<RunOutput> {
    match cfg.command {
        Command::RiskTable => run_risk_table(cfg, exec, quiet),
        Command::LowerBound => run_lower_bound(cfg, quiet),
        Command::CltCheck => run_clt_check(cfg, exec, quiet),
        Command::HolderCheck => run_holder_check(cfg, quiet),
        Command::Convergence => run_convergence(cfg, quiet),
    }
}

/// Paths written by [`run`].
#[derive(Debug, Clone, PartialEq)]
pub struct RunFiles {
    pub csv: PathBuf,
    pub manifest: PathBuf,
}

fn manifest(
    cfg: &ExperimentConfig,
    output: &RunOutput,
    threads: Option<usize>,
    started: u64,
    wall: f64,
) -> serde_json::Value {
    let scale = cfg.scale();
    json!({
        "command": cfg.command,
        "config": cfg,
        "seed": cfg.seed,
        "seed_source": cfg.seed_source,
        "seed_env_var": SEED_ENV,
        "scale": {
            "alpha0": scale.alpha0, "alpha1": scale.alpha1,
            "alpha2": scale.alpha2, "alpha3": scale.alpha3,
            "g_floor": scale.g_floor(), "g_ceil": scale.g_ceil(),
        },
        "noise_class": { "epsilon": NoiseSpec::DEFAULT_EPSILON, "l_bound": NoiseSpec::DEFAULT_L },
        "constants": {
            "efficiency_constant": crate::EFFICIENCY_CONSTANT,
            "scale_quadrature_panels": crate::model::SCALE_QUADRATURE_PANELS,
            "defect_panels": crate::holder::DEFECT_PANELS,
        },
        "versions": {
            "minimaxkern": env!("CARGO_PKG_VERSION"),
            "parallel_feature": cfg!(feature = "parallel"),
        },
        "threads": threads,
        "rows": output.rows,
        "details": output.details,
        "started_unix_seconds": started,
        "wall_clock_seconds": wall,
    })
}

/// Runs a config and writes `<command>.csv` and `<command>.json` under
/// `out_dir` (the config's `output` when `None`). Files are written only
/// after every computation succeeded; a failed write removes both.
pub fn run(cfg: &ExperimentConfig, out_dir: Option<&Path>, threads: Option<usize>, quiet: bool) -> Result<RunFiles> {
    let dir = out_dir.map(Path::to_path_buf).unwrap_or_else(|| cfg.output.clone());
    std::fs::create_dir_all(&dir)?;
    let started = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let clock = Instant::now();
    let output = with_threads(threads, || execute(cfg, Execution::Parallel, quiet))
        .map_err(|e| Error::param("threads", e))??;
    let wall = clock.elapsed().as_secs_f64();
    let stem = cfg.command.file_stem();
    let files = RunFiles {
        csv: dir.join(format!("{stem}.csv")),
        manifest: dir.join(format!("{stem}.json")),
    };
    let body = serde_json::to_string_pretty(&manifest(cfg, &output, threads, started, wall))
        .map_err(|e| Error::Io(e.to_string()))?;
    let written = std::fs::write(&files.csv, &output.csv).and_then(|_| std::fs::write(&files.manifest, body + "\n"));
    if let Err(e) = written {
        let _ = std::fs::remove_file(&files.csv);
        let _ = std::fs::remove_file(&files.manifest);
        return Err(e.into());
    }
    Ok(files)
}

#[derive(Debug, Parser)]
#[command(
    name = "minimaxkern",
    version,
    about = "Pointwise kernel regression risk experiments"
)]
pub struct Args {
    /// Experiment config (`key = value` lines).
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory; overrides the config's `output`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads. Changes speed only, never results.
    #[arg(long)]
    pub threads: Option<usize>,
    /// Suppress progress messages.
    #[arg(long)]
    pub quiet: bool,
}

/// Binary entry point: returns the process exit code.
pub fn main_with_args(args: Args) -> i32 {
    let text = match std::fs::read_to_string(&args.config) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", args.config.display());
            return EXIT_CONFIG;
        }
    };
    let mut cfg = match parse_config(&text) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {}: {e}", args.config.display());
            return EXIT_CONFIG;
        }
    };
    if let Err(e) = cfg.apply_seed_override(std::env::var(SEED_ENV).ok().as_deref()) {
        eprintln!("error: {e}");
        return EXIT_CONFIG;
    }
    if args.threads == Some(0) {
        eprintln!("error: --threads must be positive");
        return EXIT_CONFIG;
    }
    match run(&cfg, args.out.as_deref(), args.threads, args.quiet) {
        Ok(files) => {
            if !args.quiet {
                eprintln!("wrote {} and {}", files.csv.display(), files.manifest.display());
            }
            EXIT_OK
        }
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Config { .. } => EXIT_CONFIG,
                _ => EXIT_MODULE,
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_minimal_config() {
        let c = parse_config("command = lower-bound\nbeta = 2.0\nz0 = 0.5\n").unwrap();
        assert_eq!(c.command, Command::LowerBound);
        assert_eq!(c.beta, 2.0);
        assert_eq!(c.seed, DEFAULT_SEED);
        assert_eq!(c.seed_source, SeedSource::Default);
        assert_eq!(c.functions.len(), FAMILY_LABELS.len());
    }

    #[test]
    fn lists_comments_and_scientific_counts() {
        let c = parse_config(
            "# header\ncommand = risk-table # trailing\nn_list = 1e3, 10000,1e5\ndelta_list = 0.5,0.1\nnoises = all\nseed = 7\n",
        )
        .unwrap();
        assert_eq!(c.n_list, vec![1000, 10_000, 100_000]);
        assert_eq!(c.delta_list, vec![0.5, 0.1]);
        assert_eq!(c.noises.len(), 5);
        assert_eq!((c.seed, c.seed_source), (7, SeedSource::Config));
    }

    #[test]
    fn errors_name_the_line() {
        let e = parse_config("command = risk-table\n\nbeta = 3.0\n").unwrap_err();
        match e {
            Error::Config { line, message } => {
                assert_eq!(line, 3);
                assert!(message.contains("(1, 2]"), "{message}");
            }
            other => panic!("{other:?}"),
        }
        for (text, line) in [
            ("command = risk-table\ncolour = red\n", 2),
            ("command = risk-table\nn_list = 10, x\n", 2),
            ("command = nope\n", 1),
            ("command = risk-table\nnoises = cauchy\n", 2),
            ("command = risk-table\nfunctions = zero, spiky\n", 2),
            ("command = risk-table\nreps = 1\n", 2),
            ("command = risk-table\nbeta = 2\nbeta = 1.5\n", 3),
            ("command = risk-table\nalpha0 = -1\n", 2),
            ("command = risk-table\njust words\n", 2),
        ] {
            match parse_config(text) {
                Err(Error::Config { line: l, .. }) => assert_eq!(l, line, "{text}"),
                other => panic!("{text}: {other:?}"),
            }
        }
        assert!(parse_config("beta = 2\n").is_err());
    }

    #[test]
    fn seed_override() {
        let mut c = parse_config("command = lower-bound\nseed = 3\n").unwrap();
        c.apply_seed_override(None).unwrap();
        assert_eq!(c.seed, 3);
        c.apply_seed_override(Some("99")).unwrap();
        assert_eq!((c.seed, c.seed_source), (99, SeedSource::Environment));
        assert!(c.apply_seed_override(Some("x")).is_err());
    }

    #[test]
    fn number_format() {
        assert_eq!(fmt_num(0.5641895835477563), "5.64189583548e-1");
        assert_eq!(fmt_num(0.0), "0.00000000000e0");
        assert_eq!(fmt_num(f64::NAN), "nan");
        assert_eq!(fmt_num(-2.5), "-2.50000000000e0");
    }
}
