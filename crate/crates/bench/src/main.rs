use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use noisy_mc::cartpole::{CartPoleParams, ReturnOracle, POLICY_BOUND};
use noisy_mc::diagnostics::{chain_moments, GroundTruth, Provenance, TruthCache};
use noisy_mc::rng::{stream, ORACLE_STREAM, SAMPLER_STREAM};
use noisy_mc::samplers::{noisy_mh, GaussianRandomWalk, NoisyMhMode, RunLimits};
use noisy_mc_bench::config::preset_listing;
use noisy_mc_bench::runner::policy_return;
use noisy_mc_bench::{emit_csv, quadrature_truth, run_experiment, summarize, ConfigError, Experiment, ExperimentConfig};

#[derive(Parser)]
#[command(name = "noisy-bench", version, about = "Benchmarks for noisy Monte Carlo samplers")]
struct Cli {
    /// List the experiment presets and exit.
    #[arg(long)]
    list: bool,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand)]
enum Command {
    /// Run repetitions of one experiment/algorithm pair.
    Run(RunArgs),
    /// Compute and cache a ground truth for an experiment.
    Groundtruth(TruthArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Flat key = value file; command-line options override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    experiment: Option<String>,
    #[arg(long)]
    algorithm: Option<String>,
    #[arg(long)]
    budget: Option<String>,
    #[arg(long)]
    k: Option<String>,
    #[arg(long)]
    t_surr: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    reps: Option<String>,
    /// Any other config key, as key=value. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// CSV output path.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Ground-truth cache consulted before quadrature.
    #[arg(long)]
    truth_cache: Option<PathBuf>,
    /// Record wall time per run (makes the CSV non-reproducible).
    #[arg(long)]
    timing: bool,
    /// Suppress the summary table on stdout.
    #[arg(long)]
    quiet: bool,
}

#[derive(Args)]
struct TruthArgs {
    #[arg(long)]
    experiment: String,
    /// PM-MH iterations for the cart-pole reference chain.
    #[arg(long, default_value_t = 1_000_000)]
    iters: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 5.0)]
    proposal_scale: f64,
    /// Cache file updated with the computed moments.
    #[arg(long, default_value = "groundtruth.txt")]
    cache: PathBuf,
    /// Marginal histogram output (cart-pole only).
    #[arg(long, default_value = "cartpole_marginals.txt")]
    histogram: PathBuf,
}

enum Failure {
    Config(String),
    Runtime(String),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.to_string())
    }
}

fn runtime<E: std::fmt::Display>(e: E) -> Failure {
    Failure::Runtime(e.to_string())
}

fn build_config(a: &RunArgs) -> Result<ExperimentConfig, Failure> {
    let mut pairs: Vec<(String, String)> = Vec::new();
    if let Some(path) = &a.config {
        let text = std::fs::read_to_string(path).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
        let base = ExperimentConfig::parse(&text)?;
        pairs.extend(base.to_text().lines().filter_map(|l| l.split_once('=')).map(|(k, v)| (k.trim().into(), v.trim().into())));
    }
    let named = [
        ("experiment", &a.experiment),
        ("algorithm", &a.algorithm),
        ("budget", &a.budget),
        ("k", &a.k),
        ("t_surr", &a.t_surr),
        ("seed", &a.seed),
        ("reps", &a.reps),
    ];
    for (k, v) in named {
        if let Some(v) = v {
            pairs.push((k.into(), v.clone()));
        }
    }
    for s in &a.set {
        let (k, v) = s.split_once('=').ok_or_else(|| Failure::Config(format!("--set expects KEY=VALUE, got '{s}'")))?;
        pairs.push((k.trim().into(), v.trim().into()));
    }
    let exp: Experiment = pairs
        .iter()
        .rev()
        .find(|(k, _)| k == "experiment")
        .ok_or(ConfigError::Missing("experiment"))?
        .1
        .parse()?;
    let mut cfg = ExperimentConfig::preset(exp);
    for (k, v) in &pairs {
        cfg.set(k, v)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn load_cache(path: &Path) -> Result<TruthCache, Failure> {
    match std::fs::File::open(path) {
        Ok(f) => TruthCache::read_text(std::io::BufReader::new(f)).map_err(runtime),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(TruthCache::new()),
        Err(e) => Err(Failure::Runtime(format!("{}: {e}", path.display()))),
    }
}

fn save_cache(cache: &TruthCache, path: &Path) -> Result<(), Failure> {
    let f = std::fs::File::create(path).map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))?;
    cache.write_text(std::io::BufWriter::new(f)).map_err(runtime)
}

fn cmd_run(a: &RunArgs) -> Result<(), Failure> {
    let cfg = build_config(a)?;
    let cached = match &a.truth_cache {
        Some(p) => load_cache(p)?.get(cfg.experiment.name()).cloned(),
        None => None,
    };
    let truth = match cached {
        Some(t) => Some(t),
        None => quadrature_truth(&cfg).map_err(runtime)?,
    };
    let rows = run_experiment(&cfg, truth.as_ref(), a.timing).map_err(runtime)?;
    if let Some(out) = &a.out {
        emit_csv(&rows, out).map_err(runtime)?;
    }
    if !a.quiet {
        print!("{}", summarize(&rows));
    }
    Ok(())
}

fn cmd_groundtruth(a: &TruthArgs) -> Result<(), Failure> {
    let exp: Experiment = a.experiment.parse()?;
    let mut cache = load_cache(&a.cache)?;
    let truth = if exp == Experiment::Cartpole {
        cartpole_reference(a)?
    } else {
        quadrature_truth(&ExperimentConfig::preset(exp)).map_err(runtime)?.expect("quadrature target")
    };
    println!("{exp}: mean {:?}", truth.mean);
    println!("{exp}: var  {:?}", truth.var);
    cache.insert(exp.name(), truth).map_err(runtime)?;
    save_cache(&cache, &a.cache)
}

fn cartpole_reference(a: &TruthArgs) -> Result<GroundTruth, Failure> {
    if a.iters == 0 {
        return Err(Failure::Config("--iters must be positive".into()));
    }
    let mut oracle = ReturnOracle::new(CartPoleParams::default(), 1, stream(a.seed, 0, ORACLE_STREAM)).map_err(runtime)?;
    let mut srng = stream(a.seed, 0, SAMPLER_STREAM);
    let proposal = GaussianRandomWalk::new(a.proposal_scale).map_err(|e| Failure::Config(e.to_string()))?;
    let theta0 = noisy_mc::cartpole::policy_domain().sample_uniform(&mut srng);
    let limits = RunLimits::new(a.iters, a.iters as u64 + 1);
    let chain = noisy_mh(&mut oracle, &proposal, &theta0, limits, NoisyMhMode::PseudoMarginal, &mut srng).map_err(runtime)?;
    let m = chain_moments(&chain, 0.2).map_err(runtime)?;

    let bins = 60;
    let width = 2.0 * POLICY_BOUND / bins as f64;
    let kept = &chain.states[chain.states.len() / 5..];
    let mut counts = vec![vec![0u64; bins]; 6];
    for s in kept {
        for (j, x) in s.iter().enumerate() {
            let b = (((x + POLICY_BOUND) / width) as usize).min(bins - 1);
            counts[j][b] += 1;
        }
    }
    let f = std::fs::File::create(&a.histogram).map_err(|e| Failure::Runtime(format!("{}: {e}", a.histogram.display())))?;
    let mut w = std::io::BufWriter::new(f);
    let io = |e: std::io::Error| Failure::Runtime(e.to_string());
    writeln!(w, "# component bin_lo bin_hi count").map_err(io)?;
    for (j, c) in counts.iter().enumerate() {
        for (b, n) in c.iter().enumerate() {
            let lo = -POLICY_BOUND + b as f64 * width;
            writeln!(w, "{} {} {} {}", j + 1, lo, lo + width, n).map_err(io)?;
        }
    }
    let ret = policy_return(&m.mean, 200, &mut stream(a.seed, 0, 2)).map_err(runtime)?;
    println!("cartpole: MMSE policy return over 200 episodes {ret}");
    Ok(GroundTruth { mean: m.mean, var: m.var, provenance: Provenance::Quadrature })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.list {
        print!("{}", preset_listing());
        return ExitCode::SUCCESS;
    }
    let result = match &cli.command {
        Some(Command::Run(a)) => cmd_run(a),
        Some(Command::Groundtruth(a)) => cmd_groundtruth(a),
        None => Err(Failure::Config("no command given; use `run`, `groundtruth` or `--list`".into())),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(m)) => {
            eprintln!("config error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
    }
}
