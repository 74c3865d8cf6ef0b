//! Experiment orchestration: deterministic seeding, parallel trials,
//! aggregation and result emission.
//!
//! Every trial draws from its own ChaCha8 stream whose seed is a pure
//! function of `(master seed, stream id, trial index)`, so results do not
//! depend on the thread count or on scheduling.

use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::analysis::wilson_interval;
use crate::decoder::{sample_trial, Decoder, DecoderMode, DistanceMetric};
use crate::error::{Error, Result};
use crate::lattice::{build_graph, CodeKind, DecodingGraph};
use crate::noise::{DistKind, RateDistribution, TemporalMode};

/// Name and version of the per-trial stream construction, recorded in output metadata.
pub const RNG_NAME: &str = "chacha8-splitmix64-v1";

/// z-score of the reported Wilson interval.
pub const WILSON_Z: f64 = 3.0;

pub const CSV_HEADER: &str =
    "code,distance,rounds,p_mu,sigma,dist,temporal,decoder,trials,failures,rate,wilson_lo,wilson_hi,seed,wall_ms";

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// `mix(a, b) = splitmix64(splitmix64(a) ^ b)`.
pub fn mix(a: u64, b: u64) -> u64 {
    splitmix64(splitmix64(a) ^ b)
}

/// Seed recorded for a cell: `mix(master, stream)`.
pub fn cell_seed(master: u64, stream: u64) -> u64 {
    mix(master, stream)
}

/// Stream for one trial of a cell. The 32-byte ChaCha key is four
/// consecutive splitmix64 outputs starting from `mix(cell_seed, trial)`.
pub fn trial_rng(cell_seed: u64, trial: u64) -> ChaCha8Rng {
    let mut state = mix(cell_seed, trial);
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        state = splitmix64(state);
        chunk.copy_from_slice(&state.to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
}

/// A grid of cells over `(L, p_mu, sigma)`, each run under every decoder in
/// `decoders`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub code: CodeKind,
    pub distances: Vec<usize>,
    /// Noisy rounds; `None` means `T = L`.
    pub rounds: Option<usize>,
    pub p_mus: Vec<f64>,
    pub sigmas: Vec<f64>,
    pub dist: DistKind,
    /// Explicit `[a, b]` for a uniform law; replaces the `(p_mu, sigma)` grid.
    pub uniform_bounds: Option<(f64, f64)>,
    pub temporal: TemporalMode,
    pub decoders: Vec<DecoderMode>,
    pub metric: DistanceMetric,
    pub trials: u64,
    pub seed: u64,
    pub threads: usize,
    /// Share each trial's sample across decoders.
    pub paired: bool,
    pub check_residual: bool,
    pub record_wall_time: bool,
    /// Overrides the derived seed of every cell.
    pub cell_seed: Option<u64>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            code: CodeKind::Repetition,
            distances: vec![9],
            rounds: None,
            p_mus: vec![0.091],
            sigmas: vec![0.5],
            dist: DistKind::Bimodal,
            uniform_bounds: None,
            temporal: TemporalMode::Dynamic,
            decoders: vec![DecoderMode::MeanRate, DecoderMode::LocalRate],
            metric: DistanceMetric::Dijkstra,
            trials: 100_000,
            seed: 0,
            threads: 1,
            paired: true,
            check_residual: true,
            record_wall_time: true,
            cell_seed: None,
        }
    }
}

/// One point of the grid, before decoders are applied.
#[derive(Clone, Debug, PartialEq)]
pub struct Cell {
    pub index: usize,
    pub distance: usize,
    pub rounds: usize,
    pub p_mu: f64,
    pub sigma: f64,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.trials < 1 {
            return Err(Error::config("trials must be at least 1"));
        }
        if self.distances.is_empty() || self.decoders.is_empty() {
            return Err(Error::config("at least one distance and one decoder are required"));
        }
        if self.uniform_bounds.is_none() && (self.p_mus.is_empty() || self.sigmas.is_empty()) {
            return Err(Error::config("at least one p_mu and one sigma are required"));
        }
        if self.uniform_bounds.is_some() && self.dist != DistKind::Uniform {
            return Err(Error::config("explicit bounds need the uniform law"));
        }
        if self.threads < 1 {
            return Err(Error::config("threads must be at least 1"));
        }
        let mut seen = Vec::new();
        for d in &self.decoders {
            if seen.contains(d) {
                return Err(Error::config(format!("decoder {} listed twice", d.as_str())));
            }
            seen.push(*d);
        }
        if self.metric == DistanceMetric::Static
            && (self.code != CodeKind::Repetition || self.temporal != TemporalMode::Static)
        {
            return Err(Error::config("the static metric needs the repetition code with static noise"));
        }
        for cell in self.cells() {
            build_graph(self.code, cell.distance, cell.rounds)?;
            self.distribution(&cell)?;
        }
        Ok(())
    }

    /// Cells in emission order: distance, then p_mu, then sigma.
    pub fn cells(&self) -> Vec<Cell> {
        let points: Vec<(f64, f64)> = match self.uniform_bounds {
            Some((a, b)) => {
                let mean = 0.5 * (a + b);
                let width = if mean > 0.0 { (b - a) / (a + b) } else { 0.0 };
                vec![(mean, width)]
            }
            None => self
                .p_mus
                .iter()
                .flat_map(|&p| self.sigmas.iter().map(move |&s| (p, s)))
                .collect(),
        };
        let mut out = Vec::new();
        for &l in &self.distances {
            for &(p_mu, sigma) in &points {
                out.push(Cell {
                    index: out.len(),
                    distance: l,
                    rounds: self.rounds.unwrap_or(l),
                    p_mu,
                    sigma,
                });
            }
        }
        out
    }

    pub fn distribution(&self, cell: &Cell) -> Result<RateDistribution> {
        match self.uniform_bounds {
            Some((a, b)) => RateDistribution::uniform(a, b),
            None => RateDistribution::from_mean_width(self.dist, cell.p_mu, cell.sigma),
        }
    }
}

mod nan_as_null {
    use super::*;

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
        if v.is_nan() {
            s.serialize_none()
        } else {
            s.serialize_f64(*v)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
    }
}

/// One output row: a cell under one decoder.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub code: CodeKind,
    pub distance: usize,
    pub rounds: usize,
    pub p_mu: f64,
    pub sigma: f64,
    pub dist: DistKind,
    pub temporal: TemporalMode,
    pub decoder: DecoderMode,
    pub trials: u64,
    pub failures: u64,
    #[serde(with = "nan_as_null")]
    pub rate: f64,
    #[serde(with = "nan_as_null")]
    pub wilson_lo: f64,
    #[serde(with = "nan_as_null")]
    pub wilson_hi: f64,
    pub seed: u64,
    pub wall_ms: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl ExperimentResult {
    pub fn is_error(&self) -> bool {
        self.error.is_some()
    }
}

/// `(rate_local - rate_mean) / rate_mean`; `None` when the mean rate is zero
/// or either row is an error row.
pub fn relative_change(local: &ExperimentResult, mean: &ExperimentResult) -> Option<f64> {
    if local.is_error() || mean.is_error() || !(mean.rate > 0.0) {
        return None;
    }
    Some((local.rate - mean.rate) / mean.rate)
}

/// Trial outcome of a group of decoders sharing one stream.
#[derive(Clone, Debug)]
struct GroupCounts {
    failures: Vec<u64>,
}

/// First error by trial index so the reported failure is scheduling independent.
type TrialError = (u64, Error);

fn run_group(
    graph: &DecodingGraph,
    dist: RateDistribution,
    config: &ExperimentConfig,
    seed: u64,
    modes: &[DecoderMode],
) -> std::result::Result<GroupCounts, TrialError> {
    let p_space = dist.mean();
    let k = modes.len();
    let make = || {
        Decoder::new(graph, dist, p_space, config.metric).map(|d| d.with_residual_check(config.check_residual))
    };
    // surface setup errors before any trial runs
    make().map_err(|e| (0, e))?;
    (0..config.trials)
        .into_par_iter()
        .map_init(
            || make().expect("decoder construction validated above"),
            |decoder, t| -> std::result::Result<Vec<u64>, TrialError> {
                let mut rng = trial_rng(seed, t);
                let sample =
                    sample_trial(graph, &dist, p_space, config.temporal, &mut rng).map_err(|e| (t, e))?;
                let mut out = vec![0; k];
                for (slot, &mode) in modes.iter().enumerate() {
                    let failed = decoder
                        .logical_failure(&sample.errors, &sample.syndrome, &sample.assignment, mode)
                        .map_err(|e| (t, e))?;
                    out[slot] = u64::from(failed);
                }
                Ok(out)
            },
        )
        .try_reduce_with(|mut a, b| {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
            Ok(a)
        })
        .unwrap_or_else(|| Ok(vec![0; k]))
        .map(|failures| GroupCounts { failures })
}

fn lowest_error(results: Vec<std::result::Result<GroupCounts, TrialError>>) -> std::result::Result<Vec<GroupCounts>, Error> {
    let mut ok = Vec::new();
    let mut first: Option<TrialError> = None;
    for r in results {
        match r {
            Ok(c) => ok.push(c),
            Err((t, e)) => {
                if first.as_ref().map_or(true, |(ft, _)| t < *ft) {
                    first = Some((t, e));
                }
            }
        }
    }
    match first {
        Some((_, e)) => Err(e),
        None => Ok(ok),
    }
}

fn cell_rows(config: &ExperimentConfig, cell: &Cell) -> Vec<ExperimentResult> {
    let start = Instant::now();
    let k = config.decoders.len();
    // paired runs share one stream per cell, unpaired runs take one per decoder
    let groups: Vec<(u64, Vec<DecoderMode>)> = if config.paired {
        vec![(cell.index as u64, config.decoders.clone())]
    } else {
        config
            .decoders
            .iter()
            .enumerate()
            .map(|(i, &d)| ((cell.index * k + i) as u64, vec![d]))
            .collect()
    };
    let seeds: Vec<u64> = groups
        .iter()
        .map(|(stream, _)| config.cell_seed.unwrap_or_else(|| cell_seed(config.seed, *stream)))
        .collect();
    let outcome = config
        .distribution(cell)
        .and_then(|dist| Ok((dist, build_graph(config.code, cell.distance, cell.rounds)?)))
        .and_then(|(dist, graph)| {
            let runs = groups
                .iter()
                .zip(&seeds)
                .map(|((_, modes), &seed)| run_group(&graph, dist, config, seed, modes))
                .collect();
            lowest_error(runs)
        });
    let wall_ms = if config.record_wall_time {
        start.elapsed().as_secs_f64() * 1e3
    } else {
        0.0
    };
    let mut rows = Vec::with_capacity(k);
    for (i, &mode) in config.decoders.iter().enumerate() {
        let (group, slot) = if config.paired { (0, i) } else { (i, 0) };
        let mut row = ExperimentResult {
            code: config.code,
            distance: cell.distance,
            rounds: cell.rounds,
            p_mu: cell.p_mu,
            sigma: cell.sigma,
            dist: config.dist,
            temporal: config.temporal,
            decoder: mode,
            trials: config.trials,
            failures: 0,
            rate: f64::NAN,
            wilson_lo: f64::NAN,
            wilson_hi: f64::NAN,
            seed: seeds[group],
            wall_ms,
            error: None,
        };
        match &outcome {
            Ok(counts) => {
                let failures = counts[group].failures[slot];
                let (lo, hi) = wilson_interval(failures, config.trials, WILSON_Z).expect("trials >= 1");
                row.failures = failures;
                row.rate = failures as f64 / config.trials as f64;
                row.wilson_lo = lo;
                row.wilson_hi = hi;
            }
            Err(e) => row.error = Some(e.to_string()),
        }
        rows.push(row);
    }
    rows
}

/// Runs every cell in declared order. Component failures inside a cell
/// become error rows; only an invalid configuration is an `Err`.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Vec<ExperimentResult>> {
    config.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.threads)
        .build()
        .map_err(|e| Error::config(format!("cannot start {} worker threads: {e}", config.threads)))?;
    Ok(pool.install(|| config.cells().iter().flat_map(|cell| cell_rows(config, cell)).collect()))
}

/// `%.10g`-style rendering.
pub fn format_g10(v: f64) -> String {
    if v.is_nan() {
        return "NaN".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return "0".into();
    }
    let sci = format!("{v:.9e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..10).contains(&exp) {
        let decimals = (9 - exp).max(0) as usize;
        trim_zeros(format!("{v:.decimals$}"))
    } else {
        let m = trim_zeros(mantissa.to_string());
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{m}e{sign}{:02}", exp.abs())
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

pub fn to_csv(results: &[ExperimentResult]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in results {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.code.as_str(),
            r.distance,
            r.rounds,
            format_g10(r.p_mu),
            format_g10(r.sigma),
            r.dist.as_str(),
            r.temporal.as_str(),
            r.decoder.as_str(),
            r.trials,
            r.failures,
            format_g10(r.rate),
            format_g10(r.wilson_lo),
            format_g10(r.wilson_hi),
            r.seed,
            format_g10(r.wall_ms),
        );
    }
    out
}

pub fn to_json(results: &[ExperimentResult]) -> Result<String> {
    let mut s = serde_json::to_string_pretty(results)?;
    s.push('\n');
    Ok(s)
}

pub fn render(results: &[ExperimentResult], format: OutputFormat) -> Result<String> {
    match format {
        OutputFormat::Csv => Ok(to_csv(results)),
        OutputFormat::Json => to_json(results),
    }
}

/// Writes `results` to `path` in `format`.
pub fn emit_results(results: &[ExperimentResult], format: OutputFormat, path: &Path) -> Result<()> {
    if results.is_empty() {
        return Err(Error::Contract("no results to emit".into()));
    }
    let body = render(results, format)?;
    std::fs::write(path, body).map_err(|e| Error::io(path, e))
}

/// Provenance written next to the results.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunMetadata {
    pub rng: String,
    pub rng_construction: String,
    pub wilson_z: f64,
    pub metric: DistanceMetric,
    pub rounds_policy: String,
    pub p_space: String,
    pub config: ExperimentConfig,
}

impl RunMetadata {
    pub fn new(config: &ExperimentConfig) -> Self {
        RunMetadata {
            rng: RNG_NAME.into(),
            rng_construction: "ChaCha8 (rand_chacha 0.3) keyed by four splitmix64 outputs from \
                               mix(mix(seed, stream), trial), mix(a, b) = splitmix64(splitmix64(a) ^ b)"
                .into(),
            wilson_z: WILSON_Z,
            metric: config.metric,
            rounds_policy: match config.rounds {
                Some(t) => format!("fixed T={t}"),
                None => "T=L".into(),
            },
            p_space: "p_mu".into(),
            config: config.clone(),
        }
    }
}

pub fn write_metadata(config: &ExperimentConfig, path: &Path) -> Result<()> {
    let body = serde_json::to_string_pretty(&RunMetadata::new(config))?;
    std::fs::write(path, body + "\n").map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> ExperimentConfig {
        ExperimentConfig {
            distances: vec![3, 5],
            p_mus: vec![0.05],
            sigmas: vec![0.5],
            trials: 300,
            seed: 9,
            record_wall_time: false,
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn g10_formatting() {
        assert_eq!(format_g10(0.0), "0");
        assert_eq!(format_g10(0.091), "0.091");
        assert_eq!(format_g10(1.0 / 3.0), "0.3333333333");
        assert_eq!(format_g10(123456.0), "123456");
        assert_eq!(format_g10(1e-7), "1e-07");
        assert_eq!(format_g10(2.5e12), "2.5e+12");
        assert_eq!(format_g10(0.09 / 1.09), "0.08256880734");
        assert_eq!(format_g10(f64::NAN), "NaN");
    }

    #[test]
    fn stream_seeds_are_distinct() {
        let a = cell_seed(1, 0);
        assert_ne!(a, cell_seed(1, 1));
        assert_ne!(a, cell_seed(2, 0));
        use rand::RngCore;
        assert_ne!(trial_rng(a, 0).next_u64(), trial_rng(a, 1).next_u64());
        assert_eq!(trial_rng(a, 5).next_u64(), trial_rng(a, 5).next_u64());
    }

    #[test]
    fn zero_noise_cell() {
        let cfg = ExperimentConfig {
            distances: vec![5],
            p_mus: vec![0.0],
            sigmas: vec![0.0],
            dist: DistKind::Constant,
            trials: 100,
            ..ExperimentConfig::default()
        };
        let rows = run_experiment(&cfg).unwrap();
        assert_eq!(rows.len(), 2);
        for r in rows {
            assert_eq!(r.failures, 0);
            assert_eq!(r.rate, 0.0);
            assert_eq!(r.wilson_lo, 0.0);
            assert!((r.wilson_hi - 0.0826).abs() < 1e-4);
        }
    }

    #[test]
    fn rows_follow_declared_order() {
        let rows = run_experiment(&small()).unwrap();
        let keys: Vec<_> = rows.iter().map(|r| (r.distance, r.decoder)).collect();
        assert_eq!(
            keys,
            vec![
                (3, DecoderMode::MeanRate),
                (3, DecoderMode::LocalRate),
                (5, DecoderMode::MeanRate),
                (5, DecoderMode::LocalRate)
            ]
        );
        assert!(rows.iter().all(|r| r.wilson_lo <= r.rate && r.rate <= r.wilson_hi));
    }

    #[test]
    fn thread_count_does_not_change_results() {
        let one = run_experiment(&small()).unwrap();
        let four = run_experiment(&ExperimentConfig { threads: 4, ..small() }).unwrap();
        assert_eq!(to_csv(&one), to_csv(&four));
    }

    #[test]
    fn constant_law_pairs_identically() {
        let cfg = ExperimentConfig {
            dist: DistKind::Constant,
            sigmas: vec![0.0],
            ..small()
        };
        let rows = run_experiment(&cfg).unwrap();
        for pair in rows.chunks(2) {
            assert_eq!(pair[0].failures, pair[1].failures);
        }
    }

    #[test]
    fn unpaired_streams_differ() {
        let cfg = ExperimentConfig {
            paired: false,
            ..small()
        };
        let rows = run_experiment(&cfg).unwrap();
        assert_ne!(rows[0].seed, rows[1].seed);
        let paired = run_experiment(&small()).unwrap();
        assert_eq!(paired[0].seed, paired[1].seed);
    }

    #[test]
    fn relative_change_examples() {
        let mut mean = run_experiment(&small()).unwrap().remove(0);
        let mut local = mean.clone();
        mean.rate = 0.10;
        local.rate = 0.07;
        assert!((relative_change(&local, &mean).unwrap() + 0.30).abs() < 1e-12);
        local.rate = 0.09;
        assert!((relative_change(&local, &mean).unwrap() + 0.10).abs() < 1e-12);
        assert_eq!(relative_change(&mean, &mean), Some(0.0));
        mean.rate = 0.0;
        assert_eq!(relative_change(&local, &mean), None);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let bad = [
            ExperimentConfig { trials: 0, ..small() },
            ExperimentConfig { distances: vec![4], ..small() },
            ExperimentConfig { p_mus: vec![0.6], ..small() },
            ExperimentConfig { decoders: vec![], ..small() },
            ExperimentConfig {
                metric: DistanceMetric::Static,
                ..small()
            },
        ];
        for cfg in bad {
            assert!(run_experiment(&cfg).unwrap_err().is_configuration());
        }
    }
}
