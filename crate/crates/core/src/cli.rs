use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};

use robust_gittins::index::{build_surface, write_surface, IndexConfig};
use robust_gittins::oracle::{run_suite, SuiteConfig};
use robust_gittins::policy::{PolicySpec, UCB_DEFAULT_LAMBDA};
use robust_gittins::sim::{run_batch, write_results, write_trace, GammaParam, ScenarioConfig};
use robust_gittins::{Error, Result};

#[derive(Debug, Parser)]
#[command(name = "robust-gittins", version, about = "Robust Gittins indices for Bernoulli bandits")]
pub struct Cli {
    /// Worker threads for parallel stages (defaults to one per core).
    #[arg(long, global = true, env = "ROBUST_GITTINS_THREADS")]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Tabulate the index surface and its difference from p.
    Surface(SurfaceArgs),
    /// Benchmark policies on random Bernoulli scenarios.
    Simulate(SimulateArgs),
    /// Run the brute-force verification suite.
    Verify(VerifyArgs),
}

#[derive(Debug, Args)]
pub struct SurfaceArgs {
    /// Plain-text key=value file; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Credible level of the posterior interval.
    #[arg(long)]
    pub k: Option<f64>,
    /// Discount factor in (0, 1).
    #[arg(long)]
    pub beta: Option<f64>,
    /// Number of stages.
    #[arg(long, visible_alias = "T")]
    pub horizon: Option<usize>,
    /// Prior pseudo-count at stage zero.
    #[arg(long)]
    pub n0: Option<f64>,
    /// Points on the p grid.
    #[arg(long)]
    pub np: Option<usize>,
    /// Points on the index grid.
    #[arg(long)]
    pub ngamma: Option<usize>,
    /// Surface CSV; the difference table goes next to it with `.diff.csv`.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Plain-text key=value file; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Arms per scenario.
    #[arg(long, visible_alias = "m")]
    pub arms: Option<usize>,
    /// Charged plays per episode.
    #[arg(long, visible_alias = "l")]
    pub horizon: Option<usize>,
    /// Uncharged initial plays of every arm.
    #[arg(long)]
    pub warmup: Option<usize>,
    /// Shape of the scenario Gamma law.
    #[arg(long)]
    pub gamma_shape: Option<f64>,
    /// Rate or scale of the scenario Gamma law, per `--gamma-param`.
    #[arg(long)]
    pub gamma_second: Option<f64>,
    /// `rate` or `scale`.
    #[arg(long)]
    pub gamma_param: Option<String>,
    /// Prior mean of every arm before warm-up.
    #[arg(long)]
    pub prior_mean: Option<f64>,
    /// Prior pseudo-count of every arm.
    #[arg(long)]
    pub prior_count: Option<f64>,
    /// Root seed of all random streams.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Paired episodes per policy.
    #[arg(long)]
    pub sims: Option<usize>,
    /// Semicolon-separated list such as
    /// `dr:k=0.5,beta=0.9999;greedy;thompson:a0=1,b0=1;ucb:lambda=2`.
    #[arg(long)]
    pub policies: Option<String>,
    /// Per-policy summary CSV.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    /// Also write per-step running totals to this file.
    #[arg(long)]
    pub trace: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Plain-text key=value file; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Seed of the first instance; instance `i` uses `seed + i`.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Depth of the single-arm trees (1 to 4).
    #[arg(long)]
    pub depth: Option<usize>,
    /// Random instances to check.
    #[arg(long)]
    pub instances: Option<usize>,
    /// Random weight processes per delay check.
    #[arg(long)]
    pub delay_trials: Option<usize>,
    /// Also write the report to this file.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    /// Make the named check's tolerances unsatisfiable.
    #[arg(long, hide = true)]
    pub break_tolerance: Option<String>,
}

/// Outcome of a command that ran to completion.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Success,
    ChecksFailed,
}

/// Values from a `--config` file, consumed key by key so leftovers can be
/// reported as unknown.
struct ConfigFile {
    path: Option<PathBuf>,
    values: HashMap<String, String>,
}

impl ConfigFile {
    fn load(path: Option<&Path>) -> Result<Self> {
        let mut values = HashMap::new();
        if let Some(path) = path {
            let text = fs::read_to_string(path).map_err(|e| Error::Io {
                path: path.to_path_buf(),
                source: e,
            })?;
            for (i, line) in text.lines().enumerate() {
                let line = line.trim();
                if line.is_empty() || line.starts_with('#') {
                    continue;
                }
                let (key, value) = line.split_once('=').ok_or_else(|| {
                    Error::Parse(format!("{}:{}: expected key=value", path.display(), i + 1))
                })?;
                values.insert(key.trim().replace('-', "_"), value.trim().to_string());
            }
        }
        Ok(Self {
            path: path.map(Path::to_path_buf),
            values,
        })
    }

    /// Flag value, else file value, else `default`.
    fn resolve<T: FromStr>(&mut self, key: &str, flag: Option<T>, default: T) -> Result<T> {
        let from_file = self.values.remove(key);
        if let Some(v) = flag {
            return Ok(v);
        }
        match from_file {
            Some(text) => text
                .parse()
                .map_err(|_| Error::Parse(format!("bad value `{text}` for `{key}`"))),
            None => Ok(default),
        }
    }

    fn finish(self) -> Result<()> {
        let mut unknown: Vec<_> = self.values.into_keys().collect();
        if unknown.is_empty() {
            return Ok(());
        }
        unknown.sort();
        Err(Error::Parse(format!(
            "unknown keys in {}: {}",
            self.path.as_deref().unwrap_or(Path::new("config")).display(),
            unknown.join(", ")
        )))
    }
}

/// The companion difference table: `surface.csv` becomes `surface.diff.csv`.
pub fn diff_path(output: &Path) -> PathBuf {
    output.with_extension("diff.csv")
}

fn cmd_surface(args: SurfaceArgs) -> Result<Status> {
    let mut file = ConfigFile::load(args.config.as_deref())?;
    let k = file.resolve("k", args.k, 0.5)?;
    let beta = file.resolve("beta", args.beta, 0.9999)?;
    let horizon = file.resolve("horizon", args.horizon, 100)?;
    let n0 = file.resolve("n0", args.n0, 1.0)?;
    let np = file.resolve("np", args.np, 101)?;
    let ngamma = file.resolve("ngamma", args.ngamma, 201)?;
    let output = file.resolve("output", args.output, PathBuf::from("surface.csv"))?;
    file.finish()?;

    let config = IndexConfig::with_grids(k, beta, horizon, n0, np, ngamma)?;
    let surface = build_surface(&config);
    write_surface(&surface, &output)?;
    let diff = diff_path(&output);
    fs::write(&diff, robust_gittins::index::surface_diff_to_csv(&surface))
        .map_err(|e| Error::Io {
            path: diff.clone(),
            source: e,
        })?;
    eprintln!("wrote {} and {}", output.display(), diff.display());
    Ok(Status::Success)
}

/// Parses `tag:key=value,key=value` entries separated by semicolons.
pub fn parse_policies(text: &str, scenario: &ScenarioConfig) -> Result<Vec<PolicySpec>> {
    let mut out = Vec::new();
    for entry in text.split(';').map(str::trim).filter(|e| !e.is_empty()) {
        let (tag, params) = entry.split_once(':').unwrap_or((entry, ""));
        let mut values = HashMap::new();
        for pair in params.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (key, value) = pair
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("expected key=value in `{entry}`")))?;
            let value: f64 = value
                .trim()
                .parse()
                .map_err(|_| Error::Parse(format!("bad number `{value}` in `{entry}`")))?;
            values.insert(key.trim().to_string(), value);
        }
        let mut take = |key: &str, default: f64| values.remove(key).unwrap_or(default);
        let spec = match tag.trim() {
            "dr" => {
                let (k, beta) = (take("k", 0.5), take("beta", 0.9999));
                scenario.dr_policy(k, beta)?
            }
            "greedy" => PolicySpec::Greedy,
            "thompson" => PolicySpec::Thompson {
                a0: take("a0", 1.0),
                b0: take("b0", 1.0),
            },
            "ucb" => PolicySpec::Ucb {
                lambda: take("lambda", UCB_DEFAULT_LAMBDA),
            },
            other => {
                return Err(Error::Parse(format!(
                    "unknown policy `{other}`; expected dr, greedy, thompson or ucb"
                )))
            }
        };
        if let Some(key) = values.keys().next() {
            return Err(Error::Parse(format!("unknown parameter `{key}` in `{entry}`")));
        }
        spec.validate()?;
        out.push(spec);
    }
    if out.is_empty() {
        return Err(Error::Parse("no policies given".into()));
    }
    Ok(out)
}

fn parse_gamma_param(text: &str) -> Result<GammaParam> {
    match text {
        "rate" => Ok(GammaParam::Rate),
        "scale" => Ok(GammaParam::Scale),
        other => Err(Error::Parse(format!(
            "gamma parameterization must be `rate` or `scale`, got `{other}`"
        ))),
    }
}

pub const DEFAULT_POLICIES: &str = "dr:k=0.5,beta=0.9999;greedy;thompson:a0=1,b0=1;ucb:lambda=2";

fn cmd_simulate(args: SimulateArgs) -> Result<Status> {
    let mut file = ConfigFile::load(args.config.as_deref())?;
    let d = ScenarioConfig::default();
    let gamma_param = file.resolve("gamma_param", args.gamma_param, "rate".to_string())?;
    let scenario = ScenarioConfig {
        arms: file.resolve("arms", args.arms, d.arms)?,
        horizon: file.resolve("horizon", args.horizon, d.horizon)?,
        warmup: file.resolve("warmup", args.warmup, d.warmup)?,
        gamma_shape: file.resolve("gamma_shape", args.gamma_shape, d.gamma_shape)?,
        gamma_second: file.resolve("gamma_second", args.gamma_second, d.gamma_second)?,
        gamma_param: parse_gamma_param(&gamma_param)?,
        prior_mean: file.resolve("prior_mean", args.prior_mean, d.prior_mean)?,
        prior_count: file.resolve("prior_count", args.prior_count, d.prior_count)?,
        seed: file.resolve("seed", args.seed, d.seed)?,
    };
    let sims = file.resolve("sims", args.sims, 100)?;
    let policies = file.resolve("policies", args.policies, DEFAULT_POLICIES.to_string())?;
    let output = file.resolve("output", args.output, PathBuf::from("results.csv"))?;
    let trace = match (args.trace, file.values.remove("trace")) {
        (Some(p), _) => Some(p),
        (None, Some(p)) => Some(PathBuf::from(p)),
        (None, None) => None,
    };
    file.finish()?;
    scenario.validate()?;

    let specs = parse_policies(&policies, &scenario)?;
    let batch = run_batch(&specs, &scenario, sims, trace.is_some())?;
    write_results(&batch.table(), &output)?;
    eprintln!("wrote {}", output.display());
    if let Some(trace) = trace {
        write_trace(&batch, &trace)?;
        eprintln!("wrote {}", trace.display());
    }
    Ok(Status::Success)
}

fn cmd_verify(args: VerifyArgs) -> Result<Status> {
    let mut file = ConfigFile::load(args.config.as_deref())?;
    let d = SuiteConfig::default();
    let config = SuiteConfig {
        seed: file.resolve("seed", args.seed, d.seed)?,
        depth: file.resolve("depth", args.depth, d.depth)?,
        instances: file.resolve("instances", args.instances, d.instances)?,
        delay_trials: file.resolve("delay_trials", args.delay_trials, d.delay_trials)?,
        orthant_samples: d.orthant_samples,
        broken: args.break_tolerance,
    };
    let output = match (args.output, file.values.remove("output")) {
        (Some(p), _) => Some(p),
        (None, p) => p.map(PathBuf::from),
    };
    file.finish()?;

    let report = run_suite(&config)?;
    let mut text = format!(
        "# seed={} depth={} instances={} delay_trials={} orthant_samples={}\n",
        config.seed, config.depth, config.instances, config.delay_trials, config.orthant_samples
    );
    for r in &report.reports {
        text.push_str(&r.to_string());
        text.push('\n');
    }
    let failed = report.failed().count();
    text.push_str(&format!(
        "# {} reports, {} failed\n",
        report.reports.len(),
        failed
    ));
    print!("{text}");
    if let Some(path) = output {
        fs::write(&path, &text).map_err(|e| Error::Io { path, source: e })?;
    }
    Ok(if report.passed() {
        Status::Success
    } else {
        Status::ChecksFailed
    })
}

pub fn run(cli: Cli) -> Result<Status> {
    if let Some(threads) = cli.threads {
        if threads == 0 {
            return Err(Error::Domain("thread count must be positive".into()));
        }
        // A second initialization only happens in tests; the first pool stays.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global();
    }
    match cli.command {
        Command::Surface(args) => cmd_surface(args),
        Command::Simulate(args) => cmd_simulate(args),
        Command::Verify(args) => cmd_verify(args),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scenario() -> ScenarioConfig {
        ScenarioConfig {
            horizon: 20,
            warmup: 1,
            ..ScenarioConfig::default()
        }
    }

    #[test]
    fn policy_lists() {
        let specs = parse_policies("greedy; thompson:a0=2 ;ucb", &scenario()).unwrap();
        let labels: Vec<String> = specs.iter().map(ToString::to_string).collect();
        assert_eq!(labels, ["greedy", "thompson(a0=2,b0=1)", "ucb(lambda=2)"]);
        let dr = parse_policies("dr:k=0.3,beta=0.9", &scenario()).unwrap();
        assert_eq!(dr[0].to_string(), "dr(k=0.3,beta=0.9)");
    }

    #[test]
    fn bad_policy_lists() {
        for text in ["", "bandit", "ucb:lambda", "ucb:gamma=1", "thompson:a0=x", "ucb:lambda=-1"] {
            assert!(parse_policies(text, &scenario()).is_err(), "{text}");
        }
    }

    #[test]
    fn companion_path() {
        assert_eq!(diff_path(Path::new("out/s.csv")), PathBuf::from("out/s.diff.csv"));
        assert_eq!(diff_path(Path::new("s")), PathBuf::from("s.diff.csv"));
    }

    #[test]
    fn flags_override_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.conf");
        fs::write(&path, "# comment\nbeta = 0.9\nk=0.2\n").unwrap();
        let mut file = ConfigFile::load(Some(&path)).unwrap();
        assert_eq!(file.resolve("k", Some(0.4), 0.5).unwrap(), 0.4);
        assert_eq!(file.resolve("beta", None, 0.5).unwrap(), 0.9);
        assert_eq!(file.resolve("n0", None, 1.0).unwrap(), 1.0);
        assert!(file.finish().is_ok());

        fs::write(&path, "bogus=1\n").unwrap();
        assert!(ConfigFile::load(Some(&path)).unwrap().finish().is_err());
        fs::write(&path, "no equals sign\n").unwrap();
        assert!(ConfigFile::load(Some(&path)).is_err());
    }
}
