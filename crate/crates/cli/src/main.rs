use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use lar_core::abstraction::PredicateSet;
use lar_core::driver::render_summary;
use lar_core::learner::select_model;
use lar_core::trace::{sample_batch, CommandSampler, HiddenDtmcSimulator, SimulatorConfig};
use lar_core::{
    export_report, lar, load_traces, parse_property, sample_bound, LarConfig, Predicate, Sampler, TraceSet, Verdict,
};

/// Stream of the seed used for the initial trace batch of `sample`.
const BATCH_STREAM: u64 = 0;
/// Stream of the seed used for hypothesis-test sampling in `verify`.
const SPRT_STREAM: u64 = 1;

#[derive(Parser)]
#[command(
    name = "lar",
    version,
    about = "Learn, abstract and refine models of stochastic systems from traces"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check `P <= r [ F phi ]` against a black-box system.
    Verify(VerifyArgs),
    /// Draw traces from a simulator configuration.
    Sample(SampleArgs),
    /// Learn an abstract model from traces under a fixed set of predicates.
    Learn(LearnArgs),
    /// Per-state visit count needed for epsilon-accurate transition estimates.
    Bound(BoundArgs),
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long)]
    traces: PathBuf,
    /// Property text, or a file containing it.
    #[arg(long)]
    property: String,
    /// `builtin:<simulator config>` or `exec:<command>`.
    #[arg(long)]
    sampler: String,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long, default_value_t = 0.05)]
    beta: f64,
    #[arg(long, default_value_t = 0.05)]
    delta: f64,
    #[arg(long, default_value_t = 64.0)]
    epsilon_max: f64,
    #[arg(long, default_value_t = 50)]
    max_iterations: usize,
    #[arg(long, default_value_t = 1_000_000)]
    k_max: usize,
    #[arg(long, default_value_t = 100_000)]
    max_samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SampleArgs {
    /// Simulator configuration file.
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value_t = 1000)]
    count: usize,
    #[arg(long, default_value_t = 1)]
    min_length: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct LearnArgs {
    #[arg(long)]
    traces: PathBuf,
    /// Abstraction predicate; repeat for several.
    #[arg(long = "predicate", required = true)]
    predicates: Vec<String>,
    #[arg(long, default_value_t = 64.0)]
    epsilon_max: f64,
    /// Output file for the model in explicit-state format.
    #[arg(long)]
    out: PathBuf,
    /// Also write a DOT rendering here.
    #[arg(long)]
    dot: Option<PathBuf>,
}

#[derive(Args)]
struct BoundArgs {
    #[arg(long)]
    states: u64,
    #[arg(long)]
    epsilon: f64,
    #[arg(long)]
    delta: f64,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(3)
        }
    }
}

fn run(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Verify(args) => verify(args),
        Command::Sample(args) => sample(args).map(|()| 0),
        Command::Learn(args) => learn(args).map(|()| 0),
        Command::Bound(args) => {
            println!("{}", sample_bound(args.states, args.epsilon, args.delta)?);
            Ok(0)
        }
    }
}

fn property_text(arg: &str) -> Result<String> {
    let path = Path::new(arg);
    if path.is_file() {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let lines: Vec<&str> = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .collect();
        Ok(lines.join(" "))
    } else {
        Ok(arg.to_string())
    }
}

fn build_sampler(spec: &str, traces: &TraceSet, seed: u64) -> Result<Box<dyn Sampler>> {
    if let Some(path) = spec.strip_prefix("builtin:") {
        let config = SimulatorConfig::load(path)?;
        if config.schema.names() != traces.schema().names() {
            bail!(
                "simulator variables {:?} differ from trace variables {:?}",
                config.schema.names(),
                traces.schema().names()
            );
        }
        let sim = HiddenDtmcSimulator::from_config(&config, seed)?.reseeded(seed, SPRT_STREAM);
        Ok(Box::new(sim))
    } else if let Some(cmd) = spec.strip_prefix("exec:") {
        Ok(Box::new(CommandSampler::new(cmd, traces.schema().clone())?))
    } else {
        bail!("sampler must be `builtin:<config>` or `exec:<command>`, got `{spec}`")
    }
}

fn verify(args: VerifyArgs) -> Result<u8> {
    let traces = load_traces(&args.traces)?;
    let property = parse_property(&property_text(&args.property)?, traces.schema())
        .with_context(|| format!("parsing property `{}`", args.property))?;
    let mut sampler = build_sampler(&args.sampler, &traces, args.seed)?;
    let mut config = LarConfig {
        max_iterations: args.max_iterations,
        k_max: args.k_max,
        seed: args.seed,
        ..LarConfig::default()
    };
    config.learner.epsilon_max = args.epsilon_max;
    config.sprt.alpha = args.alpha;
    config.sprt.beta = args.beta;
    config.sprt.delta = args.delta;
    config.sprt.max_samples = args.max_samples;

    let report = lar(traces, &property, &config, sampler.as_mut())?;
    print!("{}", render_summary(&report));
    if let Some(dir) = &args.out {
        let files = export_report(&report, dir)?;
        log::info!("wrote {} files to {}", files.files.len(), dir.display());
    }
    Ok(match report.verdict {
        Verdict::Verified { .. } => 0,
        Verdict::Violated { .. } => 1,
        Verdict::Inconclusive { .. } => 2,
    })
}

fn sample(args: SampleArgs) -> Result<()> {
    let config = SimulatorConfig::load(&args.config)?;
    let mut sim = HiddenDtmcSimulator::from_config(&config, args.seed)?.reseeded(args.seed, BATCH_STREAM);
    let batch = sample_batch(&mut sim, args.count, args.min_length)?;
    batch.write_to(&args.out)?;
    Ok(())
}

fn learn(args: LearnArgs) -> Result<()> {
    let traces = load_traces(&args.traces)?;
    let predicates = args
        .predicates
        .iter()
        .map(|p| Predicate::parse(p, traces.schema()).with_context(|| format!("parsing predicate `{p}`")))
        .collect::<Result<Vec<_>>>()?;
    let predicates = PredicateSet::new(predicates)?;
    let abstract_traces = predicates.abstract_trace_set(&traces)?;
    let learner = lar_core::LearnerConfig {
        epsilon_max: args.epsilon_max,
        ..Default::default()
    };
    let selection = select_model(&abstract_traces, &learner)?;
    let dtmc = selection.model.dtmc();
    fs::write(&args.out, dtmc.to_explicit_string()).with_context(|| format!("writing {}", args.out.display()))?;
    if let Some(dot) = &args.dot {
        fs::write(dot, dtmc.to_dot()).with_context(|| format!("writing {}", dot.display()))?;
    }
    println!(
        "learned {} states, {} transitions (epsilon {})",
        dtmc.num_states(),
        dtmc.num_transitions(),
        selection.epsilon
    );
    Ok(())
}
