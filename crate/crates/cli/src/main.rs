//! `ppratio` experiment runner.
//!
//! Exit status: 0 on success, 1 when a `verify` experiment fails its
//! threshold, 2 on configuration or domain errors. The last line written to
//! stderr is always a JSON object with `status`, `exit_code` and `reason`.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use ppratio::io::{self, LawRow};
use ppratio::limit_laws::{self, LaplaceProbe, LawSpec, ProbeForm};
use ppratio::par::{try_map_trials, with_threads};
use ppratio::quad::QuadSpec;
use ppratio::samplers::{self, NbMethod, DEFAULT_CAP, DEFAULT_EPSILON};
use ppratio::verify::{self, ClassifierConfig, ConditioningBin, MonteCarlo, PointMassConfig, SweepTarget};
use ppratio::{Error, RngStream, TailModel};

/// Seed used when neither `--seed` nor a config file provides one.
pub const DEFAULT_SEED: u64 = 20_240_601;
const DEFAULT_TRIALS: u64 = 100_000;

#[derive(Parser)]
#[command(name = "ppratio", version, about = "Ratio statistics of Poisson point processes near zero intensity")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample ratio configurations (or negative binomial process draws) to trials.csv
    Simulate(Flags),
    /// Tabulate a limit law on a grid to law_table.csv
    Laws(Flags),
    /// Run a verification experiment; writes report.json and sweep.csv
    Verify(Flags),
    /// Estimate the tail index from simulated ratios; writes estimate.json
    Estimate(Flags),
    /// Classify the tail regime; writes classification.json
    Classify(Flags),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Simulate(_) => "simulate",
            Command::Laws(_) => "laws",
            Command::Verify(_) => "verify",
            Command::Estimate(_) => "estimate",
            Command::Classify(_) => "classify",
        }
    }

    fn flags(&self) -> &Flags {
        match self {
            Command::Simulate(f) | Command::Laws(f) | Command::Verify(f) | Command::Estimate(f) | Command::Classify(f) => f,
        }
    }
}

/// Every flag is optional here; required fields are checked per experiment
/// after merging with `--config`.
#[derive(Args, Default, Clone)]
struct Flags {
    /// Flat key=value file; explicit flags take precedence
    #[arg(long)]
    config: Option<PathBuf>,
    /// pareto | pareto_log | pareto_perturbed | rapid_zero | slow_zero
    #[arg(long)]
    tail: Option<String>,
    #[arg(long)]
    alpha: Option<String>,
    #[arg(long)]
    beta: Option<String>,
    #[arg(long)]
    c: Option<String>,
    #[arg(long)]
    gamma: Option<String>,
    #[arg(long)]
    r: Option<String>,
    #[arg(long)]
    n: Option<String>,
    #[arg(long)]
    t: Option<String>,
    /// Comma-separated, strictly decreasing
    #[arg(long = "t-grid")]
    t_grid: Option<String>,
    #[arg(long)]
    trials: Option<String>,
    #[arg(long)]
    epsilon: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long = "out-dir")]
    out_dir: Option<String>,
    /// wlaw | ratio_tail_n1 | successive_ratios | gamma_nc | independence |
    /// identities | nb_functional | z_insensitivity | conditional_gamma
    #[arg(long)]
    target: Option<String>,
    /// indicator_step | linear_ramp
    #[arg(long = "probe-form")]
    probe_form: Option<String>,
    #[arg(long = "probe-amplitude")]
    probe_amplitude: Option<String>,
    #[arg(long = "probe-a")]
    probe_a: Option<String>,
    #[arg(long = "probe-b")]
    probe_b: Option<String>,
    /// Worker threads; 0 uses all cores
    #[arg(long)]
    threads: Option<String>,
    /// w | j | l | successive | ratio_tail
    #[arg(long)]
    law: Option<String>,
    /// lo:hi:count
    #[arg(long)]
    grid: Option<String>,
    /// Conditioning value for the j law
    #[arg(long)]
    u: Option<String>,
    /// ratios | negbin
    #[arg(long)]
    process: Option<String>,
    /// limit_ratios | mixed_poisson
    #[arg(long)]
    method: Option<String>,
    /// Point cap for ratio configurations
    #[arg(long)]
    cap: Option<String>,
    /// Quantile bins for conditional checks
    #[arg(long)]
    bins: Option<String>,
    #[arg(long)]
    delta: Option<String>,
    #[arg(long)]
    eta: Option<String>,
    #[arg(long = "big-m")]
    big_m: Option<String>,
    #[arg(long)]
    spread: Option<String>,
}

impl Flags {
    fn pairs(&self) -> Vec<(&'static str, &Option<String>)> {
        vec![
            ("tail", &self.tail),
            ("alpha", &self.alpha),
            ("beta", &self.beta),
            ("c", &self.c),
            ("gamma", &self.gamma),
            ("r", &self.r),
            ("n", &self.n),
            ("t", &self.t),
            ("t_grid", &self.t_grid),
            ("trials", &self.trials),
            ("epsilon", &self.epsilon),
            ("seed", &self.seed),
            ("out_dir", &self.out_dir),
            ("target", &self.target),
            ("probe_form", &self.probe_form),
            ("probe_amplitude", &self.probe_amplitude),
            ("probe_a", &self.probe_a),
            ("probe_b", &self.probe_b),
            ("threads", &self.threads),
            ("law", &self.law),
            ("grid", &self.grid),
            ("u", &self.u),
            ("process", &self.process),
            ("method", &self.method),
            ("cap", &self.cap),
            ("bins", &self.bins),
            ("delta", &self.delta),
            ("eta", &self.eta),
            ("big_m", &self.big_m),
            ("spread", &self.spread),
        ]
    }
}

/// A failure with its exit code and machine-readable reason.
struct Failure {
    code: u8,
    reason: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let reason = match &e {
            Error::Domain(msg) => msg.clone(),
            other => other.to_string(),
        };
        Failure { code: 2, reason }
    }
}

fn config_error(reason: impl Into<String>) -> Failure {
    Failure {
        code: 2,
        reason: reason.into(),
    }
}

/// Merged configuration: file entries overlaid by explicit flags.
struct Config {
    values: BTreeMap<String, String>,
}

impl Config {
    fn load(flags: &Flags) -> Result<Self, Failure> {
        let mut values = BTreeMap::new();
        if let Some(path) = &flags.config {
            let text = fs::read_to_string(path)
                .map_err(|e| config_error(format!("cannot read config {}: {e}", path.display())))?;
            for (lineno, line) in text.lines().enumerate() {
                let line = line.trim();
                if line.is_empty() || line.starts_with('#') {
                    continue;
                }
                let (k, v) = line
                    .split_once('=')
                    .ok_or_else(|| config_error(format!("config line {} is not key=value", lineno + 1)))?;
                values.insert(k.trim().replace('-', "_"), v.trim().to_string());
            }
        }
        for (key, flag) in flags.pairs() {
            if let Some(v) = flag {
                if let Some(old) = values.get(key) {
                    if old != v {
                        eprintln!("warning: --{} overrides config value {key}={old}", key.replace('_', "-"));
                    }
                }
                values.insert(key.to_string(), v.clone());
            }
        }
        Ok(Self { values })
    }

    fn raw(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    fn parse<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>, Failure> {
        match self.raw(key) {
            None => Ok(None),
            Some(s) => s
                .trim()
                .parse()
                .map(Some)
                .map_err(|_| config_error(format!("invalid value for {key}: '{s}'"))),
        }
    }

    fn require<T: std::str::FromStr>(&self, key: &str) -> Result<T, Failure> {
        self.parse(key)?
            .ok_or_else(|| config_error(format!("missing field: {key}")))
    }

    fn or<T: std::str::FromStr>(&self, key: &str, default: T) -> Result<T, Failure> {
        Ok(self.parse(key)?.unwrap_or(default))
    }

    fn tail(&self) -> Result<TailModel, Failure> {
        let kind = self.raw("tail").ok_or_else(|| config_error("missing field: tail"))?;
        let mut pairs = vec![("kind", kind)];
        for key in ["alpha", "beta", "c", "gamma"] {
            if let Some(v) = self.raw(key) {
                pairs.push((key, v));
            }
        }
        Ok(TailModel::from_key_values(pairs)?)
    }

    fn t_grid(&self) -> Result<Vec<f64>, Failure> {
        if let Some(raw) = self.raw("t_grid") {
            return raw
                .split(',')
                .map(|s| {
                    s.trim()
                        .parse::<f64>()
                        .map_err(|_| config_error(format!("invalid value in t_grid: '{s}'")))
                })
                .collect();
        }
        if let Some(t) = self.parse::<f64>("t")? {
            return Ok(vec![t]);
        }
        Ok((1..=6).map(|k| 10f64.powi(-k)).collect())
    }

    fn probe(&self) -> Result<LaplaceProbe, Failure> {
        let form: ProbeForm = self.or("probe_form", ProbeForm::IndicatorStep)?;
        let amplitude = self.require("probe_amplitude")?;
        let a = self.require("probe_a")?;
        let b = self.require("probe_b")?;
        Ok(LaplaceProbe::new(form, amplitude, a, b)?)
    }

    fn montecarlo(&self) -> Result<MonteCarlo, Failure> {
        Ok(MonteCarlo::new(self.or("trials", DEFAULT_TRIALS)?, self.or("seed", DEFAULT_SEED)?))
    }

    fn out_dir(&self) -> PathBuf {
        PathBuf::from(self.raw("out_dir").unwrap_or("."))
    }

    /// Statistical parameters echoed into every artifact.
    fn echo(&self, mc: &MonteCarlo) -> Result<Vec<(String, String)>, Failure> {
        Ok(vec![
            ("trials".into(), mc.trials.to_string()),
            ("seed".into(), mc.seed.to_string()),
            ("epsilon".into(), format!("{:?}", self.or("epsilon", DEFAULT_EPSILON)?)),
        ])
    }
}

fn write_artifact(dir: &Path, name: &str, contents: &str) -> Result<(), Failure> {
    fs::create_dir_all(dir).map_err(|e| config_error(format!("cannot create {}: {e}", dir.display())))?;
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| config_error(format!("cannot write {}: {e}", path.display())))?;
    eprintln!("wrote {}", path.display());
    Ok(())
}

fn to_json(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("json value serializes");
    s.push('\n');
    s
}

fn meta_with(mut meta: Vec<(String, String)>, extra: &[(&str, String)]) -> Vec<(String, String)> {
    meta.extend(extra.iter().map(|(k, v)| (k.to_string(), v.clone())));
    meta
}

fn tail_meta(model: &TailModel) -> Vec<(String, String)> {
    model
        .to_key_values()
        .into_iter()
        .map(|(k, v)| (if k == "kind" { "tail".to_string() } else { k }, v))
        .collect()
}

fn simulate(cfg: &Config) -> Result<u8, Failure> {
    let mc = cfg.montecarlo()?;
    let epsilon = cfg.or("epsilon", DEFAULT_EPSILON)?;
    let n: usize = cfg.require("n")?;
    let process = cfg.raw("process").unwrap_or("ratios");
    let text = match process {
        "negbin" | "nb" => {
            let alpha: f64 = cfg.require("alpha")?;
            let method: NbMethod = cfg.or("method", NbMethod::LimitRatios)?;
            let rows = try_map_trials(mc.exec, mc.trials, |i| {
                samplers::sample_negbin_process(n, alpha, epsilon, method, RngStream::new(mc.seed, i)).map(|s| (i, s))
            })?;
            let meta = meta_with(
                cfg.echo(&mc)?,
                &[
                    ("process", "negbin".into()),
                    ("method", method.as_str().into()),
                    ("n", n.to_string()),
                    ("alpha", format!("{alpha:?}")),
                ],
            );
            io::nb_points_csv(&meta, &rows)
        }
        "ratios" => {
            let model = cfg.tail()?;
            let r: usize = cfg.require("r")?;
            let t: f64 = cfg.require("t")?;
            let cap = cfg.or("cap", DEFAULT_CAP)?;
            let inverse = mc.inverse;
            let rows = try_map_trials(mc.exec, mc.trials, |i| {
                samplers::sample_ratio_configuration(&model, t, r, n, epsilon, RngStream::new(mc.seed, i), cap, &inverse)
                    .map(|c| (i, t, c))
            })?;
            let mut meta = meta_with(cfg.echo(&mc)?, &[("process", "ratios".into())]);
            meta.extend(tail_meta(&model));
            meta.extend([("r".to_string(), r.to_string()), ("n".to_string(), n.to_string())]);
            meta.extend([("t".to_string(), format!("{t:?}")), ("cap".to_string(), cap.to_string())]);
            io::trials_csv(&meta, &rows)
        }
        other => return Err(config_error(format!("unknown process '{other}'"))),
    };
    write_artifact(&cfg.out_dir(), "trials.csv", &text)?;
    Ok(0)
}

fn parse_grid(raw: &str) -> Result<Vec<f64>, Failure> {
    let parts: Vec<&str> = raw.split(':').collect();
    let bad = || config_error(format!("grid must be lo:hi:count, got '{raw}'"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let lo: f64 = parts[0].trim().parse().map_err(|_| bad())?;
    let hi: f64 = parts[1].trim().parse().map_err(|_| bad())?;
    let count: usize = parts[2].trim().parse().map_err(|_| bad())?;
    if count < 2 || !(hi > lo) {
        return Err(bad());
    }
    Ok((0..count).map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64).collect())
}

fn laws(cfg: &Config) -> Result<u8, Failure> {
    let mc = cfg.montecarlo()?;
    let law = cfg.raw("law").ok_or_else(|| config_error("missing field: law"))?.to_string();
    let alpha: f64 = cfg.require("alpha")?;
    let grid = parse_grid(cfg.raw("grid").ok_or_else(|| config_error("missing field: grid"))?)?;
    let mut rows = Vec::with_capacity(grid.len());
    let mut push = |params: String, x: f64, d: limit_laws::DensityCdf| {
        rows.push(LawRow {
            law: law.clone(),
            params,
            x,
            density: d.density,
            cdf: d.cdf,
        })
    };
    match law.as_str() {
        "w" => {
            let spec = LawSpec::w(alpha, cfg.require("r")?, cfg.require("n")?);
            let p = format!("alpha={alpha:?};r={};n={}", spec.r, spec.n);
            for &x in &grid {
                push(p.clone(), x, limit_laws::w_law(&spec, x)?);
            }
        }
        "j" => {
            let spec = LawSpec {
                u: cfg.require("u")?,
                ..LawSpec::w(alpha, 1, 1)
            };
            let p = format!("alpha={alpha:?};u={:?}", spec.u);
            for &x in &grid {
                push(p.clone(), x, limit_laws::j_law(&spec, x)?);
            }
        }
        "l" => {
            let p = format!("alpha={alpha:?}");
            for &x in &grid {
                push(p.clone(), x, limit_laws::l_law(alpha, x)?);
            }
        }
        "successive" => {
            let k: u32 = cfg.require("r")?;
            let p = format!("alpha={alpha:?};k={k}");
            for &x in &grid {
                let d = limit_laws::DensityCdf {
                    density: limit_laws::successive_ratio_density(k, alpha, x),
                    cdf: limit_laws::successive_ratio_cdf(k, alpha, x)?,
                };
                push(p.clone(), x, d);
            }
        }
        "ratio_tail" => {
            let r: u32 = cfg.require("r")?;
            let p = format!("alpha={alpha:?};r={r}");
            let ra = r as f64 * alpha;
            for &x in &grid {
                let (density, cdf) = if x < 1.0 {
                    (0.0, 0.0)
                } else {
                    (ra * x.powf(-ra - 1.0), 1.0 - limit_laws::ratio_tail_n1(r, alpha, x))
                };
                push(p.clone(), x, limit_laws::DensityCdf { density, cdf });
            }
        }
        other => return Err(config_error(format!("unknown law '{other}'"))),
    }
    let meta = meta_with(cfg.echo(&mc)?, &[("law", law.clone())]);
    write_artifact(&cfg.out_dir(), "law_table.csv", &io::law_table_csv(&meta, &rows))?;
    Ok(0)
}

fn verify_cmd(cfg: &Config) -> Result<u8, Failure> {
    let mc = cfg.montecarlo()?;
    let target = cfg.raw("target").ok_or_else(|| config_error("missing field: target"))?;
    let mut report = match target.replace('-', "_").as_str() {
        "independence" => {
            let model = cfg.tail()?;
            verify::independence_check(
                &model,
                cfg.require("t")?,
                cfg.require("r")?,
                cfg.require("n")?,
                &mc,
                &PointMassConfig {
                    delta: cfg.or("delta", PointMassConfig::default().delta)?,
                },
            )?
        }
        "identities" => verify::identity_checks(
            cfg.require("alpha")?,
            cfg.require("r")?,
            cfg.require("n")?,
            &mc,
            &ConditioningBin::default(),
        )?,
        "nb_functional" => verify::nb_functional_check(
            cfg.require("n")?,
            cfg.require("alpha")?,
            &cfg.probe()?,
            cfg.or("epsilon", DEFAULT_EPSILON)?,
            cfg.or("method", NbMethod::LimitRatios)?,
            &mc,
            &QuadSpec::default(),
        )?,
        "z_insensitivity" => verify::z_insensitivity_check(
            &cfg.tail()?,
            cfg.require("t")?,
            cfg.require("r")?,
            cfg.require("n")?,
            cfg.or("bins", 4)?,
            &mc,
        )?,
        "conditional_gamma" => verify::conditional_gamma_check(
            &cfg.tail()?,
            cfg.require("t")?,
            cfg.require("r")?,
            cfg.require("n")?,
            cfg.or("bins", 4)?,
            &mc,
        )?,
        other => {
            let sweep: SweepTarget = other.parse()?;
            let model = cfg.tail()?;
            let r = cfg.require("r")?;
            let n = cfg.require("n")?;
            verify::convergence_sweep(&model, r, n, &cfg.t_grid()?, sweep, &mc)?
        }
    };
    report
        .parameters
        .insert("epsilon".into(), json!(cfg.or("epsilon", DEFAULT_EPSILON)?));
    let dir = cfg.out_dir();
    write_artifact(&dir, "report.json", &(report.to_json() + "\n"))?;
    write_artifact(&dir, "sweep.csv", &report.to_csv())?;
    if report.pass {
        Ok(0)
    } else {
        Err(Failure {
            code: 1,
            reason: format!("{} failed its threshold", report.experiment_id),
        })
    }
}

fn estimate(cfg: &Config) -> Result<u8, Failure> {
    let mc = cfg.montecarlo()?;
    let model = cfg.tail()?;
    let t: f64 = cfg.require("t")?;
    let r: usize = cfg.require("r")?;
    let est = verify::estimate_alpha_mc(&model, t, r, &mc)?;
    let doc = json!({
        "alpha_hat": est.alpha_hat,
        "stderr": est.stderr,
        "samples": est.samples,
        "tail": serde_json::to_value(model).expect("model serializes"),
        "t": t,
        "r": r,
        "trials": mc.trials,
        "seed": mc.seed,
        "epsilon": cfg.or("epsilon", DEFAULT_EPSILON)?,
    });
    write_artifact(&cfg.out_dir(), "estimate.json", &to_json(&doc))?;
    Ok(0)
}

fn classify(cfg: &Config) -> Result<u8, Failure> {
    let mc = cfg.montecarlo()?;
    let model = cfg.tail()?;
    let t: f64 = cfg.require("t")?;
    let r: usize = cfg.require("r")?;
    let d = ClassifierConfig::default();
    let cc = ClassifierConfig {
        delta: cfg.or("delta", d.delta)?,
        eta: cfg.or("eta", d.eta)?,
        big_m: cfg.or("big_m", d.big_m)?,
        spread: cfg.or("spread", d.spread)?,
    };
    let c = verify::classify_tail(&model, t, r, &mc, &cc)?;
    let doc = json!({
        "classification": serde_json::to_value(c).expect("classification serializes"),
        "config": serde_json::to_value(cc).expect("config serializes"),
        "tail": serde_json::to_value(model).expect("model serializes"),
        "t": t,
        "r": r,
        "trials": mc.trials,
        "seed": mc.seed,
        "epsilon": cfg.or("epsilon", DEFAULT_EPSILON)?,
    });
    write_artifact(&cfg.out_dir(), "classification.json", &to_json(&doc))?;
    Ok(0)
}

fn run(command: &Command) -> Result<u8, Failure> {
    let cfg = Config::load(command.flags())?;
    let threads: usize = cfg.or("threads", 0)?;
    with_threads(threads, || match command {
        Command::Simulate(_) => simulate(&cfg),
        Command::Laws(_) => laws(&cfg),
        Command::Verify(_) => verify_cmd(&cfg),
        Command::Estimate(_) => estimate(&cfg),
        Command::Classify(_) => classify(&cfg),
    })
}

fn finish(experiment: &str, code: u8, reason: &str) -> ExitCode {
    let status = match code {
        0 => "ok",
        1 => "fail",
        _ => "error",
    };
    eprintln!(
        "{}",
        json!({ "status": status, "exit_code": code, "experiment": experiment, "reason": reason })
    );
    ExitCode::from(code)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            if code == 0 {
                return ExitCode::SUCCESS;
            }
            let reason = e.kind().to_string();
            return finish("", 2, &reason);
        }
    };
    let name = cli.command.name();
    match run(&cli.command) {
        Ok(code) => finish(name, code, ""),
        Err(f) => {
            eprintln!("error: {}", f.reason);
            finish(name, f.code, &f.reason)
        }
    }
}
