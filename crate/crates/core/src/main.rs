use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;
use serde_json::json;

use locvar::analysis::{
    chain_fraction_R, critical_probability, path_count, product_ratio, product_ratio_exact, threshold_ratio,
    wilson_interval,
};
use locvar::decoder::{sample_trial, DecoderMode, DistanceMetric};
use locvar::harness::{
    cell_seed, emit_results, format_g10, render, run_experiment, trial_rng, write_metadata, ExperimentConfig,
    OutputFormat,
};
use locvar::lattice::{build_graph, CodeKind};
use locvar::matching::{brute_force_matching, min_weight_perfect_matching, MatchingInstance};
use locvar::noise::{DistKind, RateDistribution, TemporalMode};
use locvar::{Error, Result};

#[derive(Parser)]
#[command(name = "locvar", version, about = "Logical error rates under locally varying measurement noise")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one cell.
    Simulate(SimulateArgs),
    /// Run a grid of cells over distance, p_mu and sigma.
    Sweep(SweepArgs),
    /// Analytical significance measures.
    #[command(subcommand)]
    Analyze(Analyze),
    /// Inspect decoding graphs.
    #[command(subcommand)]
    Graph(GraphCmd),
    /// Solve matching instances.
    #[command(name = "match", subcommand)]
    Match(MatchCmd),
    /// Inspect sampled syndromes.
    #[command(subcommand)]
    Syndrome(SyndromeCmd),
}

#[derive(Clone, Copy, ValueEnum)]
enum CodeArg {
    Repetition,
    Surface,
}

impl From<CodeArg> for CodeKind {
    fn from(c: CodeArg) -> Self {
        match c {
            CodeArg::Repetition => CodeKind::Repetition,
            CodeArg::Surface => CodeKind::Surface,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum DistArg {
    Constant,
    Bimodal,
    Uniform,
}

impl From<DistArg> for DistKind {
    fn from(d: DistArg) -> Self {
        match d {
            DistArg::Constant => DistKind::Constant,
            DistArg::Bimodal => DistKind::Bimodal,
            DistArg::Uniform => DistKind::Uniform,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum TemporalArg {
    Static,
    Dynamic,
}

impl From<TemporalArg> for TemporalMode {
    fn from(t: TemporalArg) -> Self {
        match t {
            TemporalArg::Static => TemporalMode::Static,
            TemporalArg::Dynamic => TemporalMode::Dynamic,
        }
    }
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum DecoderArg {
    Mean,
    Local,
    Both,
}

#[derive(Clone, Copy, ValueEnum)]
enum MetricArg {
    Dijkstra,
    Static,
}

#[derive(Clone, Copy, ValueEnum)]
enum Switch {
    On,
    Off,
}

impl Switch {
    fn on(self) -> bool {
        matches!(self, Switch::On)
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long, value_enum, default_value = "repetition")]
    code: CodeArg,
    /// Noisy rounds; defaults to the distance.
    #[arg(long)]
    rounds: Option<usize>,
    #[arg(long, value_enum, default_value = "bimodal")]
    dist: DistArg,
    #[arg(long, value_enum, default_value = "dynamic")]
    temporal: TemporalArg,
    /// Decoders to run; `both` runs mean then local.
    #[arg(long, value_enum, value_delimiter = ',', default_value = "both")]
    decoder: Vec<DecoderArg>,
    #[arg(long, value_enum, default_value = "dijkstra")]
    metric: MetricArg,
    #[arg(long, default_value_t = 100_000)]
    trials: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Worker threads; defaults to the available parallelism.
    #[arg(long, env = "LOCVAR_THREADS")]
    threads: Option<usize>,
    /// Output file; a `.meta.json` sidecar is written next to it.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    format: FormatArg,
    /// Share each trial's noise sample across decoders.
    #[arg(long, value_enum, default_value = "on")]
    paired: Switch,
    /// Verify that every correction clears its syndrome.
    #[arg(long, value_enum, default_value = "on")]
    check_residual: Switch,
    /// Report wall_ms as 0 so output depends only on the configuration.
    #[arg(long)]
    no_wall_time: bool,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    run: RunArgs,
    #[arg(long)]
    distance: usize,
    #[arg(long, default_value_t = 0.091)]
    p_mu: f64,
    #[arg(long, default_value_t = 0.5)]
    sigma: f64,
    /// Lower end of a uniform law; use with `--b`.
    #[arg(long, requires = "b")]
    a: Option<f64>,
    #[arg(long, requires = "a")]
    b: Option<f64>,
    /// Replay a cell from the `seed` column of an earlier run.
    #[arg(long)]
    cell_seed: Option<u64>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    run: RunArgs,
    #[arg(long, value_delimiter = ',', required = true)]
    distance: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "0.091")]
    p_mu: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "0.5")]
    sigma: Vec<f64>,
}

#[derive(Subcommand)]
enum Analyze {
    /// P(X = L/2) / P(X >= L/2) for even L up to `--l-max`.
    RRatio {
        #[arg(long)]
        p: f64,
        #[arg(long)]
        l_max: u64,
    },
    /// Monte Carlo and closed-form product-variance ratio for L = 1..=l-max.
    ProductRatio {
        #[arg(long, value_enum)]
        dist: DistArg,
        #[arg(long)]
        p_mu: f64,
        #[arg(long)]
        sigma: f64,
        #[arg(long)]
        l_max: usize,
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Critical probability bound for dimension m and separation n.
    CriticalP {
        #[arg(long)]
        m: u32,
        #[arg(long)]
        n: u64,
    },
    /// Accuracy threshold over the large-n critical probability.
    ThresholdRatio {
        #[arg(long)]
        p_th: f64,
        #[arg(long)]
        m: u32,
    },
    /// Number of direct lattice paths for the given per-dimension steps.
    PathCount {
        #[arg(long, value_delimiter = ',', required = true)]
        d: Vec<u64>,
    },
    /// Wilson score interval.
    Wilson {
        #[arg(long)]
        k: u64,
        #[arg(long)]
        n: u64,
        #[arg(long, default_value_t = 3.0)]
        z: f64,
    },
}

#[derive(Subcommand)]
enum GraphCmd {
    /// Print nodes and edges as JSON.
    Dump {
        #[arg(long, value_enum, default_value = "repetition")]
        code: CodeArg,
        #[arg(long)]
        distance: usize,
        #[arg(long)]
        rounds: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum MatchCmd {
    /// Solve `{"n": .., "edges": [[i, j, w], ..]}` read from a file or stdin.
    Solve {
        #[arg(long)]
        input: Option<PathBuf>,
        /// Use exhaustive search instead of the blossom solver.
        #[arg(long)]
        brute_force: bool,
    },
}

#[derive(Subcommand)]
enum SyndromeCmd {
    /// Sample one trial and print its errors and defects as JSON.
    Show {
        #[arg(long, value_enum, default_value = "repetition")]
        code: CodeArg,
        #[arg(long)]
        distance: usize,
        #[arg(long)]
        rounds: Option<usize>,
        #[arg(long, value_enum, default_value = "bimodal")]
        dist: DistArg,
        #[arg(long, default_value_t = 0.091)]
        p_mu: f64,
        #[arg(long, default_value_t = 0.5)]
        sigma: f64,
        #[arg(long, value_enum, default_value = "dynamic")]
        temporal: TemporalArg,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Trial index within cell 0.
        #[arg(long, default_value_t = 0)]
        trial: u64,
    },
}

fn decoders(list: &[DecoderArg]) -> Vec<DecoderMode> {
    let mut out = Vec::new();
    for d in list {
        let modes: &[DecoderMode] = match d {
            DecoderArg::Mean => &[DecoderMode::MeanRate],
            DecoderArg::Local => &[DecoderMode::LocalRate],
            DecoderArg::Both => &[DecoderMode::MeanRate, DecoderMode::LocalRate],
        };
        for m in modes {
            if !out.contains(m) {
                out.push(*m);
            }
        }
    }
    out
}

fn default_threads() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn base_config(run: &RunArgs) -> ExperimentConfig {
    ExperimentConfig {
        code: run.code.into(),
        rounds: run.rounds,
        dist: run.dist.into(),
        temporal: run.temporal.into(),
        decoders: decoders(&run.decoder),
        metric: match run.metric {
            MetricArg::Dijkstra => DistanceMetric::Dijkstra,
            MetricArg::Static => DistanceMetric::Static,
        },
        trials: run.trials,
        seed: run.seed,
        threads: run.threads.unwrap_or_else(default_threads),
        paired: run.paired.on(),
        check_residual: run.check_residual.on(),
        record_wall_time: !run.no_wall_time,
        ..ExperimentConfig::default()
    }
}

fn format_of(f: FormatArg) -> OutputFormat {
    match f {
        FormatArg::Csv => OutputFormat::Csv,
        FormatArg::Json => OutputFormat::Json,
    }
}

fn write_out(out: Option<&Path>, body: &str) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, body).map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: e,
        }),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(body.as_bytes())
                .and_then(|_| stdout.flush())
                .map_err(|e| Error::Io {
                    path: "<stdout>".into(),
                    source: e,
                })
        }
    }
}

fn meta_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".meta.json");
    PathBuf::from(s)
}

fn run(config: ExperimentConfig, run: &RunArgs) -> Result<()> {
    let results = run_experiment(&config)?;
    let format = format_of(run.format);
    match &run.out {
        Some(path) => {
            emit_results(&results, format, path)?;
            write_metadata(&config, &meta_path(path))?;
        }
        None => write_out(None, &render(&results, format)?)?,
    }
    match results.iter().find_map(|r| r.error.as_deref()) {
        Some(e) => Err(Error::Integrity(format!("a cell failed: {e}"))),
        None => Ok(()),
    }
}

fn csv(header: &str, rows: impl IntoIterator<Item = String>) -> String {
    let mut s = format!("{header}\n");
    for r in rows {
        s.push_str(&r);
        s.push('\n');
    }
    s
}

fn analyze(cmd: Analyze) -> Result<String> {
    Ok(match cmd {
        Analyze::RRatio { p, l_max } => {
            let rows = (2..=l_max)
                .step_by(2)
                .map(|l| Ok(format!("{l},{},{}", format_g10(p), format_g10(chain_fraction_R(l, p)?))))
                .collect::<Result<Vec<_>>>()?;
            csv("L,p,R", rows)
        }
        Analyze::ProductRatio {
            dist,
            p_mu,
            sigma,
            l_max,
            samples,
            seed,
        } => {
            let d = RateDistribution::from_mean_width(dist.into(), p_mu, sigma)?;
            let mut rows = Vec::new();
            for l in 1..=l_max {
                let mut rng = trial_rng(cell_seed(seed, l as u64), 0);
                let est = product_ratio(&d, l, samples, &mut rng)?;
                rows.push(format!(
                    "{l},{},{},{}",
                    format_g10(est.value),
                    format_g10(est.std_error),
                    format_g10(product_ratio_exact(&d, l)?)
                ));
            }
            csv("L,ratio,std_error,exact", rows)
        }
        Analyze::CriticalP { m, n } => csv(
            "m,n,p_critical",
            [format!("{m},{n},{}", format_g10(critical_probability(m, n)?))],
        ),
        Analyze::ThresholdRatio { p_th, m } => csv(
            "p_th,m,ratio",
            [format!("{},{m},{}", format_g10(p_th), format_g10(threshold_ratio(p_th, m)?))],
        ),
        Analyze::PathCount { d } => {
            let list: Vec<String> = d.iter().map(u64::to_string).collect();
            csv("d,count", [format!("{},{}", list.join(" "), path_count(&d))])
        }
        Analyze::Wilson { k, n, z } => {
            let (lo, hi) = wilson_interval(k, n, z)?;
            csv(
                "k,n,z,lo,hi",
                [format!("{k},{n},{},{},{}", format_g10(z), format_g10(lo), format_g10(hi))],
            )
        }
    })
}

#[derive(Deserialize)]
struct RawInstance {
    n: usize,
    edges: Vec<(usize, usize, f64)>,
}

fn solve_matching(input: Option<&Path>, brute: bool) -> Result<String> {
    let mut text = String::new();
    match input {
        Some(p) => text = std::fs::read_to_string(p).map_err(|e| Error::Io { path: p.into(), source: e })?,
        None => {
            std::io::stdin().read_to_string(&mut text).map_err(|e| Error::Io {
                path: "<stdin>".into(),
                source: e,
            })?;
        }
    }
    let raw: RawInstance = serde_json::from_str(&text).map_err(|e| Error::Config(format!("bad instance: {e}")))?;
    let inst = MatchingInstance::new(raw.n, raw.edges)?;
    let m = if brute {
        brute_force_matching(&inst)?
    } else {
        min_weight_perfect_matching(&inst)?
    };
    Ok(serde_json::to_string_pretty(&m)? + "\n")
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate(a) => {
            let mut cfg = base_config(&a.run);
            cfg.distances = vec![a.distance];
            cfg.p_mus = vec![a.p_mu];
            cfg.sigmas = vec![a.sigma];
            cfg.cell_seed = a.cell_seed;
            if let (Some(lo), Some(hi)) = (a.a, a.b) {
                cfg.dist = DistKind::Uniform;
                cfg.uniform_bounds = Some((lo, hi));
            }
            run(cfg, &a.run)
        }
        Command::Sweep(a) => {
            let mut cfg = base_config(&a.run);
            cfg.distances = a.distance;
            cfg.p_mus = a.p_mu;
            cfg.sigmas = a.sigma;
            run(cfg, &a.run)
        }
        Command::Analyze(cmd) => write_out(None, &analyze(cmd)?),
        Command::Graph(GraphCmd::Dump {
            code,
            distance,
            rounds,
            out,
        }) => {
            let g = build_graph(code.into(), distance, rounds.unwrap_or(distance))?;
            write_out(out.as_deref(), &(serde_json::to_string_pretty(&g.to_json())? + "\n"))
        }
        Command::Match(MatchCmd::Solve { input, brute_force }) => {
            write_out(None, &solve_matching(input.as_deref(), brute_force)?)
        }
        Command::Syndrome(SyndromeCmd::Show {
            code,
            distance,
            rounds,
            dist,
            p_mu,
            sigma,
            temporal,
            seed,
            trial,
        }) => {
            let g = build_graph(code.into(), distance, rounds.unwrap_or(distance))?;
            let d = RateDistribution::from_mean_width(dist.into(), p_mu, sigma)?;
            let mut rng: ChaCha8Rng = trial_rng(cell_seed(seed, 0), trial);
            let s = sample_trial(&g, &d, d.mean(), temporal.into(), &mut rng)?;
            let body = json!({
                "code": g.code().as_str(),
                "distance": g.distance(),
                "rounds": g.rounds(),
                "errors": s.errors.edges(),
                "defects": s.syndrome.defects,
                "time_edge_rates": g.edges().iter().filter(|e| e.kind == locvar::lattice::EdgeKind::Time)
                    .map(|e| s.assignment.rate(e.id)).collect::<Vec<_>>(),
            });
            write_out(None, &(serde_json::to_string_pretty(&body)? + "\n"))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_configuration() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
