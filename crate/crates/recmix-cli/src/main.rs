//! recmix: recency-weighted mixture state estimation experiments.
//!
//! Subcommands emit reproducible data files: mixing-weight curves, chain
//! compositions, filter traces, oracle-comparison distances, synthetic
//! observation streams, and a constant-cost benchmark report. Every run is
//! deterministic given its configuration and seed; identical invocations
//! produce identical bytes. See FORMATS.md for the file schemas.

mod config;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use config::{FileConfig, GeneratorArg, KernelArg, ModelArg, PriorArg, ResamplingArg};
use recmix::bench::{bench_filter, BenchParams};
use recmix::chain::{run_chain, ChainParams, LagComposition};
use recmix::filter::{run_filter, FilterConfig, StepSummary};
use recmix::io::{
    chain_rows, ingest, write_chain_csv, write_distance_csv, write_records_jsonl,
    write_trace_csv, write_weights_csv, OutputHeader,
};
use recmix::metrics::{MetricReport, MetricRow};
use recmix::mixing::{closed_form_weights, DecaySpec, Horizon};
use recmix::models::{generate, GeneratorSpec};
use recmix::oracle::{oracle_vs_chain_distance, CompareParams};
use recmix::rng::derive_seed;
use recmix::{Error, Result};

#[derive(Parser)]
#[command(name = "recmix", version, about = "Recency-weighted mixture state estimation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Emit mixing-coefficient curves (beta, lag, theta) as CSV
    Weights(WeightsArgs),
    /// Evolve the latent sample set and emit lag compositions as CSV
    Chain(ChainArgs),
    /// Generate a synthetic observation stream as JSONL
    Generate(GenerateArgs),
    /// Run the importance filter over observations and emit a trace CSV
    Filter(FilterArgs),
    /// Compare the fixed-budget chain against the explicit-history oracle
    CompareOracle(CompareArgs),
    /// Measure per-step latency over a long run and report JSON
    Bench(BenchArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// TOML config file; explicit flags override file values
    #[arg(long)]
    config: Option<PathBuf>,

    /// RNG seed
    #[arg(long)]
    seed: Option<u64>,

    /// Output path (stdout when omitted)
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct WeightsArgs {
    #[command(flatten)]
    common: CommonArgs,

    /// Decay rates, comma separated
    #[arg(long = "beta", value_delimiter = ',')]
    betas: Vec<f64>,

    /// Largest lag to emit
    #[arg(long)]
    max_lag: Option<usize>,
}

#[derive(Args)]
struct ChainArgs {
    #[command(flatten)]
    common: CommonArgs,

    /// Fraction of samples refreshed per step
    #[arg(long)]
    beta: Option<f64>,

    /// Sample budget L
    #[arg(long)]
    particles: Option<usize>,

    /// Number of evolution steps
    #[arg(long)]
    steps: Option<usize>,

    /// Independent replicas averaged into the composition columns
    #[arg(long)]
    runs: Option<usize>,

    /// Transition kernel: identity, linear:A, or random-walk:STD
    #[arg(long)]
    kernel: Option<KernelArg>,

    /// Initial distribution: normal:MEAN,STD or point:VALUE
    #[arg(long)]
    prior: Option<PriorArg>,
}

#[derive(Args)]
struct GenerateArgs {
    #[command(flatten)]
    common: CommonArgs,

    /// Stream kind: changepoint, drift, or sinusoid
    #[arg(long)]
    generator: Option<GeneratorArg>,

    /// Stream length
    #[arg(long)]
    steps: Option<usize>,

    /// Observation noise std
    #[arg(long)]
    obs_std: Option<f64>,

    /// Changepoint levels, comma separated
    #[arg(long, value_delimiter = ',')]
    levels: Option<Vec<f64>>,

    /// Changepoint times, comma separated, strictly increasing
    #[arg(long, value_delimiter = ',')]
    times: Option<Vec<u64>>,

    /// Drift std
    #[arg(long)]
    drift_std: Option<f64>,

    /// Sinusoid amplitude
    #[arg(long)]
    amp: Option<f64>,

    /// Sinusoid period
    #[arg(long)]
    period: Option<f64>,
}

#[derive(Args)]
struct FilterArgs {
    #[command(flatten)]
    common: CommonArgs,

    /// Observation file (JSONL, or CSV by extension); exclusive with
    /// --generator
    #[arg(long)]
    input: Option<PathBuf>,

    /// Fraction of particles refreshed from the posterior per step
    #[arg(long)]
    beta: Option<f64>,

    /// Particle count L
    #[arg(long)]
    particles: Option<usize>,

    /// System noise std added to every particle each step
    #[arg(long)]
    noise_std: Option<f64>,

    /// Observation model std (gaussian model)
    #[arg(long)]
    obs_std: Option<f64>,

    /// Observation model: gaussian or bernoulli-logit
    #[arg(long)]
    model: Option<ModelArg>,

    /// Transition kernel: identity, linear:A, or random-walk:STD
    #[arg(long)]
    kernel: Option<KernelArg>,

    /// Initial distribution: normal:MEAN,STD or point:VALUE
    #[arg(long)]
    prior: Option<PriorArg>,

    /// Posterior sampling scheme: multinomial or systematic
    #[arg(long)]
    resampling: Option<ResamplingArg>,

    /// Write a JSON metric report (RMSE, ESS aggregates) here
    #[arg(long)]
    report: Option<PathBuf>,

    /// Stream kind when generating instead of reading --input
    #[arg(long)]
    generator: Option<GeneratorArg>,

    /// Generated stream length
    #[arg(long)]
    steps: Option<usize>,

    /// Changepoint levels, comma separated
    #[arg(long, value_delimiter = ',')]
    levels: Option<Vec<f64>>,

    /// Changepoint times, comma separated, strictly increasing
    #[arg(long, value_delimiter = ',')]
    times: Option<Vec<u64>>,

    /// Drift std
    #[arg(long)]
    drift_std: Option<f64>,

    /// Sinusoid amplitude
    #[arg(long)]
    amp: Option<f64>,

    /// Sinusoid period
    #[arg(long)]
    period: Option<f64>,
}

#[derive(Args)]
struct CompareArgs {
    #[command(flatten)]
    common: CommonArgs,

    /// Fraction of samples refreshed per step
    #[arg(long)]
    beta: Option<f64>,

    /// Sample budget L
    #[arg(long)]
    particles: Option<usize>,

    /// Comparison length
    #[arg(long)]
    steps: Option<usize>,

    /// Transition kernel: identity, linear:A, or random-walk:STD
    #[arg(long)]
    kernel: Option<KernelArg>,

    /// Initial distribution: normal:MEAN,STD or point:VALUE
    #[arg(long)]
    prior: Option<PriorArg>,
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    common: CommonArgs,

    /// Fraction of particles refreshed per step
    #[arg(long)]
    beta: Option<f64>,

    /// Particle count L
    #[arg(long)]
    particles: Option<usize>,

    /// Run length; at least 10000 so the late window is meaningful
    #[arg(long)]
    steps: Option<usize>,

    /// System noise std
    #[arg(long)]
    noise_std: Option<f64>,

    /// Observation noise std of the synthetic stream
    #[arg(long)]
    obs_std: Option<f64>,
}

fn main() {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Weights(args) => cmd_weights(args),
        Command::Chain(args) => cmd_chain(args),
        Command::Generate(args) => cmd_generate(args),
        Command::Filter(args) => cmd_filter(args),
        Command::CompareOracle(args) => cmd_compare_oracle(args),
        Command::Bench(args) => cmd_bench(args),
    };
    match outcome {
        Ok(()) => {}
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(exit_code(&e));
        }
    }
}

/// 2 input trouble, 3 degenerate weights, 4 invalid parameters.
fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Input { .. } | Error::NoData | Error::Io(_) => 2,
        Error::DegenerateWeights(_) => 3,
        Error::InvalidParameter(_)
        | Error::NonNormalizable(_)
        | Error::InvalidState(_)
        | Error::Unsupported(_) => 4,
    }
}

fn open_output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(std::io::stdout())),
    })
}

fn warn_if_frozen(beta: f64) {
    if beta == 0.0 {
        eprintln!("warning: beta = 0 freezes the sample set; nothing is ever refreshed");
    }
}

fn join_floats(xs: &[f64]) -> String {
    xs.iter()
        .map(f64::to_string)
        .collect::<Vec<_>>()
        .join(",")
}

fn join_ints(xs: &[u64]) -> String {
    xs.iter().map(u64::to_string).collect::<Vec<_>>().join(",")
}

fn cmd_weights(args: WeightsArgs) -> Result<()> {
    let file = FileConfig::load(args.common.config.as_deref())?;
    let betas = if !args.betas.is_empty() {
        args.betas
    } else if let Some(bs) = file.betas.clone() {
        bs
    } else if let Some(b) = file.beta {
        vec![b]
    } else {
        return Err(Error::invalid_parameter("weights needs at least one --beta"));
    };
    let max_lag = args.max_lag.or(file.max_lag).unwrap_or(5);
    if max_lag == 0 {
        return Err(Error::invalid_parameter("--max-lag must be >= 1"));
    }

    let mut rows = Vec::with_capacity(betas.len() * max_lag);
    for &beta in &betas {
        let thetas = closed_form_weights(beta, max_lag)?;
        for (lag, theta) in (1..=max_lag).zip(thetas) {
            rows.push((beta, lag, theta));
        }
    }

    let header = OutputHeader::new("weights")
        .field("beta", join_floats(&betas))
        .field("max_lag", max_lag);
    let output = args.common.output.or(file.output);
    write_weights_csv(open_output(output.as_deref())?, &header, &rows)
}

fn cmd_chain(args: ChainArgs) -> Result<()> {
    let file = FileConfig::load(args.common.config.as_deref())?;
    let beta = args.beta.or(file.beta).unwrap_or(0.5);
    let particles = args.particles.or(file.particles).unwrap_or(1000);
    let steps = args.steps.or(file.steps).unwrap_or(20);
    let seed = args.common.seed.or(file.seed).unwrap_or(0);
    let runs = args.runs.or(file.runs).unwrap_or(1);
    let kernel = args
        .kernel
        .or(file.kernel_arg()?)
        .unwrap_or_else(|| "identity".parse().expect("static"));
    let prior = args
        .prior
        .or(file.prior_arg()?)
        .unwrap_or_else(|| "normal:0,1".parse().expect("static"));
    if runs == 0 {
        return Err(Error::invalid_parameter("--runs must be >= 1"));
    }
    warn_if_frozen(beta);

    let mut compositions: Vec<Vec<LagComposition>> = Vec::with_capacity(runs);
    for r in 0..runs {
        let run = run_chain(&ChainParams {
            particles,
            prior: prior.0.clone(),
            kernel: kernel.0.clone(),
            beta,
            steps,
            seed: derive_seed(seed, r as u64),
        })?;
        compositions.push(run.compositions);
    }
    let rows = chain_rows(&compositions, particles, beta);

    let header = OutputHeader::new("chain")
        .field("beta", beta)
        .field("particles", particles)
        .field("steps", steps)
        .field("seed", seed)
        .field("runs", runs)
        .field("kernel", kernel.canonical())
        .field("prior", prior.canonical());
    let output = args.common.output.or(file.output);
    write_chain_csv(open_output(output.as_deref())?, &header, &rows)
}

struct GeneratorResolution {
    spec: GeneratorSpec,
    header_fields: Vec<(&'static str, String)>,
}

#[allow(clippy::too_many_arguments)]
fn resolve_generator(
    generator: Option<GeneratorArg>,
    steps: Option<usize>,
    obs_std: Option<f64>,
    levels: Option<Vec<f64>>,
    times: Option<Vec<u64>>,
    drift_std: Option<f64>,
    amp: Option<f64>,
    period: Option<f64>,
    seed: u64,
) -> Result<GeneratorResolution> {
    let generator =
        generator.ok_or_else(|| Error::invalid_parameter("a --generator kind is required"))?;
    let steps = steps.unwrap_or(100);
    let obs_std = obs_std.unwrap_or(1.0);
    let mut header_fields = vec![("generator", generator.canonical().to_string())];
    match generator {
        GeneratorArg::Changepoint => {
            if let Some(l) = &levels {
                header_fields.push(("levels", join_floats(l)));
            }
            if let Some(t) = &times {
                header_fields.push(("times", join_ints(t)));
            }
        }
        GeneratorArg::Drift => {
            if let Some(d) = drift_std {
                header_fields.push(("drift_std", d.to_string()));
            }
        }
        GeneratorArg::Sinusoid => {
            if let Some(a) = amp {
                header_fields.push(("amp", a.to_string()));
            }
            if let Some(p) = period {
                header_fields.push(("period", p.to_string()));
            }
        }
    }
    let kind = generator.to_kind(levels, times, drift_std, amp, period)?;
    let spec = GeneratorSpec {
        kind,
        obs_std,
        steps,
        seed,
    };
    spec.validate()?;
    Ok(GeneratorResolution {
        spec,
        header_fields,
    })
}

fn cmd_generate(args: GenerateArgs) -> Result<()> {
    let file = FileConfig::load(args.common.config.as_deref())?;
    let seed = args.common.seed.or(file.seed).unwrap_or(0);
    let resolution = resolve_generator(
        args.generator.or(file.generator_arg()?),
        args.steps.or(file.steps),
        args.obs_std.or(file.obs_std),
        args.levels.or(file.levels.clone()),
        args.times.or(file.times.clone()),
        args.drift_std.or(file.drift_std),
        args.amp.or(file.amp),
        args.period.or(file.period),
        seed,
    )?;
    let records = generate(&resolution.spec)?;

    let mut header = OutputHeader::new("generate");
    for (k, v) in &resolution.header_fields {
        header = header.field(k, v);
    }
    header = header
        .field("obs_std", resolution.spec.obs_std)
        .field("steps", resolution.spec.steps)
        .field("seed", seed);
    let output = args.common.output.or(file.output);
    write_records_jsonl(open_output(output.as_deref())?, &header, &records)
}

fn cmd_filter(args: FilterArgs) -> Result<()> {
    let file = FileConfig::load(args.common.config.as_deref())?;
    let beta = args.beta.or(file.beta).unwrap_or(0.5);
    let particles = args.particles.or(file.particles).unwrap_or(1000);
    let seed = args.common.seed.or(file.seed).unwrap_or(0);
    let noise_std = args.noise_std.or(file.noise_std).unwrap_or(0.0);
    let obs_std = args.obs_std.or(file.obs_std).unwrap_or(1.0);
    let model = args.model.or(file.model_arg()?).unwrap_or(ModelArg::Gaussian);
    let kernel = args
        .kernel
        .or(file.kernel_arg()?)
        .unwrap_or_else(|| "identity".parse().expect("static"));
    let prior = args
        .prior
        .or(file.prior_arg()?)
        .unwrap_or_else(|| "normal:0,1".parse().expect("static"));
    let resampling = args
        .resampling
        .or(file.resampling_arg()?)
        .unwrap_or(ResamplingArg(recmix::filter::Resampling::Multinomial));
    let input = args.input.or(file.input.clone());
    let generator = args.generator.or(file.generator_arg()?);

    let mut header = OutputHeader::new("filter")
        .field("beta", beta)
        .field("particles", particles)
        .field("seed", seed)
        .field("noise_std", noise_std)
        .field("obs_std", obs_std)
        .field("model", model.canonical())
        .field("kernel", kernel.canonical())
        .field("prior", prior.canonical())
        .field("resampling", resampling.canonical());

    let records = match (&input, generator) {
        (Some(path), None) => {
            header = header.field("input", path.display());
            let records = ingest(path)?;
            if records.is_empty() {
                return Err(Error::NoData);
            }
            records
        }
        (None, Some(generator)) => {
            let resolution = resolve_generator(
                Some(generator),
                args.steps.or(file.steps),
                // the generator reuses the observation-model noise level
                Some(obs_std),
                args.levels.or(file.levels.clone()),
                args.times.or(file.times.clone()),
                args.drift_std.or(file.drift_std),
                args.amp.or(file.amp),
                args.period.or(file.period),
                derive_seed(seed, 1000),
            )?;
            for (k, v) in &resolution.header_fields {
                header = header.field(k, v);
            }
            header = header.field("steps", resolution.spec.steps);
            generate(&resolution.spec)?
        }
        (Some(_), Some(_)) => {
            return Err(Error::invalid_parameter(
                "--input and --generator are mutually exclusive",
            ))
        }
        (None, None) => {
            return Err(Error::invalid_parameter(
                "filter needs exactly one of --input or --generator",
            ))
        }
    };

    warn_if_frozen(beta);
    let decay = if beta == 0.0 {
        DecaySpec::new(0.0, Horizon::Finite(1))?
    } else {
        DecaySpec::new(beta, Horizon::Unbounded)?
    };
    let config = FilterConfig {
        particles,
        decay,
        noise_std,
        prior: prior.0.clone(),
        kernel: kernel.0.clone(),
        obs_model: model.to_spec(obs_std)?,
        resampling: resampling.0,
        seed,
    };
    let trace = run_filter(config, &records)?;

    let output = args.common.output.or(file.output);
    write_trace_csv(open_output(output.as_deref())?, &header, &trace)?;

    if let Some(report_path) = args.report.or(file.report) {
        let report = metric_report(&trace)?;
        let mut w = BufWriter::new(File::create(report_path)?);
        writeln!(w, "{}", report.to_json())?;
    }
    Ok(())
}

fn metric_report(trace: &[StepSummary]) -> Result<MetricReport> {
    let rows = trace
        .iter()
        .map(|s| {
            if s.summary.mean.len() != 1 {
                return Err(Error::Unsupported(
                    "metric report is defined for scalar filters".into(),
                ));
            }
            Ok(MetricRow {
                t: s.t,
                mean: s.summary.mean[0],
                std: s.summary.std[0],
                ess: s.summary.ess,
                log_marginal_increment: s.summary.log_marginal_increment,
                abs_error: s.abs_error.as_ref().map(|e| e[0]),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    MetricReport::from_rows(rows)
}

fn cmd_compare_oracle(args: CompareArgs) -> Result<()> {
    let file = FileConfig::load(args.common.config.as_deref())?;
    let beta = args.beta.or(file.beta).unwrap_or(0.5);
    let particles = args.particles.or(file.particles).unwrap_or(1000);
    let steps = args.steps.or(file.steps).unwrap_or(20);
    let seed = args.common.seed.or(file.seed).unwrap_or(0);
    let kernel = args
        .kernel
        .or(file.kernel_arg()?)
        .unwrap_or_else(|| "identity".parse().expect("static"));
    let prior = args
        .prior
        .or(file.prior_arg()?)
        .unwrap_or_else(|| "normal:0,1".parse().expect("static"));

    let rows = oracle_vs_chain_distance(&CompareParams {
        particles,
        prior: prior.0.clone(),
        kernel: kernel.0.clone(),
        beta,
        steps,
        seed,
    })?;

    let header = OutputHeader::new("compare-oracle")
        .field("beta", beta)
        .field("particles", particles)
        .field("steps", steps)
        .field("seed", seed)
        .field("kernel", kernel.canonical())
        .field("prior", prior.canonical());
    let output = args.common.output.or(file.output);
    write_distance_csv(open_output(output.as_deref())?, &header, &rows)
}

fn cmd_bench(args: BenchArgs) -> Result<()> {
    let file = FileConfig::load(args.common.config.as_deref())?;
    let steps = args.steps.or(file.steps).unwrap_or(10_000);
    if steps < 10_000 {
        return Err(Error::invalid_parameter(
            "bench needs --steps >= 10000 for a meaningful late window",
        ));
    }
    let report = bench_filter(&BenchParams {
        particles: args.particles.or(file.particles).unwrap_or(1000),
        beta: args.beta.or(file.beta).unwrap_or(0.5),
        steps,
        noise_std: args.noise_std.or(file.noise_std).unwrap_or(0.1),
        obs_std: args.obs_std.or(file.obs_std).unwrap_or(1.0),
        seed: args.common.seed.or(file.seed).unwrap_or(0),
    })?;
    // JSON output: the config echo lives inside the document (a # header
    // would break JSON parsers)
    let output = args.common.output.or(file.output);
    let mut w = open_output(output.as_deref())?;
    writeln!(w, "{}", report.to_json())?;
    Ok(())
}
