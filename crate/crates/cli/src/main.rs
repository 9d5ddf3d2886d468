//! `mediaweb`: simulate, ingest, estimate, score and analyze citation logs.
//!
//! Exit status is 0 on success, 2 for usage and configuration problems
//! (missing or malformed inputs, invalid options) and 1 for data errors.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use mediaweb::analysis::{
    degree_distribution, fit_power_law_tail_auto, fit_recency_decay, power_law_gof, Binning,
    DecayFit, PowerLawFit,
};
use mediaweb::estimation::{estimate_params, DEFAULT_BINS};
use mediaweb::ingest::{self, IngestReport, LogFormat};
use mediaweb::likelihood::{relative_curves, replay};
use mediaweb::simulator::{generate_batch, SimConfig, SimStats};
use mediaweb::theory::recency_curve;
use mediaweb::{
    EdgeLog, EstimateOptions, ModelParams, ModelReport, ModelSpec, ReplayOptions, ReplayParams,
};

const TOOL: &str = "mediaweb";
const VERSION: &str = env!("CARGO_PKG_VERSION");
const SECONDS_PER_DAY: f64 = 86_400.0;

#[derive(Parser)]
#[command(
    name = "mediaweb",
    version,
    about = "Growth models for media citation graphs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate an edge log from a simulation config
    Simulate(SimulateArgs),
    /// Clean a raw TSV link log
    Ingest(IngestArgs),
    /// Estimate routing, recency timescales and rates from a log
    Estimate(EstimateArgs),
    /// Replay a log and score it under several models
    Likelihood(LikelihoodArgs),
    /// Recency curve, degree distribution and fits of a log
    Analyze(AnalyzeArgs),
}

#[derive(Args, Serialize)]
struct SimulateArgs {
    /// Simulation config (JSON)
    #[arg(long)]
    config: PathBuf,
    /// Overrides the seed in the config
    #[arg(long)]
    seed: Option<u64>,
    /// Output edge log; with several runs, run r goes to `<stem>.<r>.<ext>`
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 1)]
    runs: u64,
    #[arg(long, default_value_t = 1)]
    threads: usize,
    /// Seconds in one simulation time unit
    #[arg(long, default_value_t = SECONDS_PER_DAY)]
    seconds_per_unit: f64,
}

#[derive(Args, Serialize)]
struct IngestArgs {
    #[arg(long)]
    input: PathBuf,
    /// Canonical TSV of the kept edges
    #[arg(long)]
    out: PathBuf,
    /// Ingest report (JSON)
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct EstimateArgs {
    #[arg(long)]
    log: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Histogram bin width in seconds
    #[arg(long, default_value_t = SECONDS_PER_DAY)]
    day: f64,
    #[arg(long, default_value_t = DEFAULT_BINS)]
    bins: usize,
    /// Degree offset of degree models
    #[arg(long, default_value_t = 1.0)]
    d0: f64,
}

#[derive(Args, Serialize)]
struct LikelihoodArgs {
    #[arg(long)]
    log: PathBuf,
    /// Parameter file written by `estimate`
    #[arg(long)]
    params: PathBuf,
    /// Comma-separated models: d,q,e,dq,de,qe,dqe,uniform or `all`
    #[arg(long, default_value = "all")]
    models: String,
    #[arg(long)]
    out: PathBuf,
    /// Route uniformly across hosts instead of using the estimated matrix
    #[arg(long)]
    no_rho: bool,
    /// Directory for sorted and relative probability curves (CSV)
    #[arg(long)]
    curves: Option<PathBuf>,
    /// Baseline of the relative curves
    #[arg(long, default_value = "d")]
    baseline: String,
    #[arg(long, default_value_t = 1)]
    threads: usize,
}

#[derive(Args, Serialize)]
struct AnalyzeArgs {
    #[arg(long)]
    log: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Seconds in one threshold unit
    #[arg(long, default_value_t = SECONDS_PER_DAY)]
    unit: f64,
    /// Comma-separated age thresholds, in units
    #[arg(long, default_value = "0,0.5,1,1.5,2,2.5,3,4,5,6,7,8,9,10")]
    thresholds: String,
    /// Simulation config whose mean-field recency curve is added as a column
    #[arg(long)]
    config: Option<PathBuf>,
    /// CSV of (T, e_T, one_minus_e_T[, theory])
    #[arg(long)]
    recency_csv: Option<PathBuf>,
    /// CSV of log-binned (degree, density)
    #[arg(long)]
    degree_csv: Option<PathBuf>,
    /// Minimum share of positive degrees in a fitted power-law tail
    #[arg(long, default_value_t = 0.1)]
    tail_fraction: f64,
    /// Bootstrap replicates of the power-law goodness-of-fit test
    #[arg(long, default_value_t = 200)]
    gof_reps: usize,
    /// Seed of the bootstrap
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

enum Failure {
    Usage(anyhow::Error),
    Data(anyhow::Error),
}

type Outcome<T> = Result<T, Failure>;

fn usage(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Usage(e.into())
}

fn data(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Data(e.into())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Meta {
    tool: String,
    version: String,
    seed: Option<u64>,
    config_digest: String,
}

impl Meta {
    fn new(seed: Option<u64>, config_digest: String) -> Self {
        Self {
            tool: TOOL.into(),
            version: VERSION.into(),
            seed,
            config_digest,
        }
    }
}

#[derive(Serialize, Deserialize)]
struct Stamped<T> {
    #[serde(default)]
    meta: Option<Meta>,
    #[serde(flatten)]
    body: T,
}

#[derive(Serialize)]
struct LogSidecar<'a> {
    meta: &'a Meta,
    seconds_per_unit: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    run: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    stats: Option<&'a SimStats>,
    #[serde(skip_serializing_if = "Option::is_none")]
    ingest: Option<&'a IngestReport>,
}

fn digest(parts: &[&[u8]]) -> String {
    let mut h = Sha256::new();
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p);
    }
    hex::encode(h.finalize())
}

fn read_input(path: &Path, what: &str) -> Outcome<Vec<u8>> {
    fs::read(path)
        .with_context(|| format!("cannot read {what} `{}`", path.display()))
        .map_err(usage)
}

fn read_json<T: DeserializeOwned>(path: &Path, what: &str) -> Outcome<(T, Vec<u8>)> {
    let bytes = read_input(path, what)?;
    let value = serde_json::from_slice(&bytes)
        .with_context(|| format!("{what} `{}` is not valid", path.display()))
        .map_err(usage)?;
    Ok((value, bytes))
}

fn read_log(path: &Path) -> Outcome<(EdgeLog, Vec<u8>)> {
    let bytes = read_input(path, "edge log")?;
    let (log, _) = ingest::parse(bytes.as_slice(), LogFormat::Tsv)
        .with_context(|| format!("edge log `{}`", path.display()))
        .map_err(data)?;
    if log.is_empty() {
        return Err(data(anyhow!("edge log `{}` has no edges", path.display())));
    }
    Ok((log, bytes))
}

/// Seed recorded next to a log by `simulate`, if any.
fn sidecar_seed(log: &Path) -> Option<u64> {
    let text = fs::read(sidecar_path(log)).ok()?;
    let v: serde_json::Value = serde_json::from_slice(&text).ok()?;
    v.get("meta")?.get("seed")?.as_u64()
}

fn sidecar_path(log: &Path) -> PathBuf {
    log.with_extension("meta.json")
}

fn options_json<T: Serialize>(args: &T) -> Vec<u8> {
    serde_json::to_vec(args).expect("arguments serialize")
}

fn create(path: &Path) -> Outcome<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)
            .with_context(|| format!("cannot create directory `{}`", dir.display()))
            .map_err(usage)?;
    }
    File::create(path)
        .map(BufWriter::new)
        .with_context(|| format!("cannot create `{}`", path.display()))
        .map_err(usage)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Outcome<()> {
    let mut out = create(path)?;
    serde_json::to_writer_pretty(&mut out, value)
        .map_err(anyhow::Error::from)
        .and_then(|_| writeln!(out).map_err(Into::into))
        .and_then(|_| out.flush().map_err(Into::into))
        .with_context(|| format!("cannot write `{}`", path.display()))
        .map_err(data)
}

fn write_log(path: &Path, log: &EdgeLog, seconds_per_unit: f64) -> Outcome<()> {
    let out = create(path)?;
    ingest::write(log, seconds_per_unit, out)
        .with_context(|| format!("cannot write `{}`", path.display()))
        .map_err(data)
}

fn thread_pool(threads: usize) -> Outcome<rayon::ThreadPool> {
    if threads == 0 {
        return Err(usage(anyhow!("--threads must be at least 1")));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(usage)
}

fn run_path(out: &Path, run: u64, runs: u64) -> PathBuf {
    if runs == 1 {
        return out.to_path_buf();
    }
    let stem = out
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let name = match out.extension() {
        Some(ext) => format!("{stem}.{run}.{}", ext.to_string_lossy()),
        None => format!("{stem}.{run}"),
    };
    out.with_file_name(name)
}

fn simulate(args: SimulateArgs) -> Outcome<String> {
    let (mut config, _) = read_json::<SimConfig>(&args.config, "config file")?;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    config
        .validate()
        .with_context(|| format!("config file `{}`", args.config.display()))
        .map_err(usage)?;
    if args.runs == 0 {
        return Err(usage(anyhow!("--runs must be at least 1")));
    }
    if !(args.seconds_per_unit > 0.0) {
        return Err(usage(anyhow!("--seconds-per-unit must be > 0")));
    }
    let config_digest = digest(&[&serde_json::to_vec(&config).expect("config serializes")]);
    let pool = thread_pool(args.threads)?;
    let results = pool
        .install(|| generate_batch(&config, args.runs))
        .map_err(data)?;

    let (mut pages, mut edges, mut dropped) = (0, 0, 0);
    for (r, (log, stats)) in results.iter().enumerate() {
        let r = r as u64;
        let path = run_path(&args.out, r, args.runs);
        write_log(&path, log, args.seconds_per_unit)?;
        let meta = Meta::new(Some(config.seed.wrapping_add(r)), config_digest.clone());
        let sidecar = LogSidecar {
            meta: &meta,
            seconds_per_unit: args.seconds_per_unit,
            run: (args.runs > 1).then_some(r),
            stats: Some(stats),
            ingest: None,
        };
        write_json(&sidecar_path(&path), &sidecar)?;
        pages += stats.pages_created;
        edges += stats.edges_created;
        dropped += stats.edges_dropped;
    }
    Ok(format!(
        "simulate: {} run(s) of {} with seed {}: {pages} pages, {edges} edges, {dropped} links dropped -> {}",
        args.runs,
        config.spec,
        config.seed,
        args.out.display()
    ))
}

fn ingest_cmd(args: IngestArgs) -> Outcome<String> {
    let raw = read_input(&args.input, "input log")?;
    let (log, report) = ingest::parse(raw.as_slice(), LogFormat::Tsv)
        .with_context(|| format!("input log `{}`", args.input.display()))
        .map_err(data)?;
    let meta = Meta::new(None, digest(&[&options_json(&args), &raw]));
    write_log(&args.out, &log, 1.0)?;
    let sidecar = LogSidecar {
        meta: &meta,
        seconds_per_unit: 1.0,
        run: None,
        stats: None,
        ingest: Some(&report),
    };
    write_json(&sidecar_path(&args.out), &sidecar)?;
    if let Some(path) = &args.report {
        write_json(
            path,
            &Stamped {
                meta: Some(meta.clone()),
                body: &report,
            },
        )?;
    }
    Ok(format!(
        "ingest: read {} lines, kept {} edges, dropped {} future and {} malformed -> {}",
        report.lines_read,
        report.edges_kept,
        report.dropped_future,
        report.dropped_malformed,
        args.out.display()
    ))
}

fn estimate(args: EstimateArgs) -> Outcome<String> {
    if !(args.day > 0.0) || args.bins < 2 || !(args.d0 >= 0.0) {
        return Err(usage(anyhow!("need --day > 0, --bins >= 2 and --d0 >= 0")));
    }
    let (log, raw) = read_log(&args.log)?;
    let opts = EstimateOptions {
        day: args.day,
        bins: args.bins,
        d0: args.d0,
    };
    let params = estimate_params(&log, &opts).map_err(data)?;
    let meta = Meta::new(
        sidecar_seed(&args.log),
        digest(&[&options_json(&args), &raw]),
    );
    write_json(
        &args.out,
        &Stamped {
            meta: Some(meta),
            body: &params,
        },
    )?;
    let taus: Vec<String> = params
        .tau
        .iter()
        .map(|t| format!("{:.3}", t / args.day))
        .collect();
    Ok(format!(
        "estimate: {} hosts, {} edges, tau [{}] bins -> {}",
        params.hosts.len(),
        log.edges().len(),
        taus.join(", "),
        args.out.display()
    ))
}

fn write_curve(path: &Path, values: &[f64]) -> Outcome<()> {
    let mut out = create(path)?;
    let mut body = String::from("rank,value\n");
    for (i, v) in values.iter().enumerate() {
        body += &format!("{},{v}\n", i + 1);
    }
    out.write_all(body.as_bytes())
        .and_then(|_| out.flush())
        .with_context(|| format!("cannot write `{}`", path.display()))
        .map_err(data)
}

fn likelihood(args: LikelihoodArgs) -> Outcome<String> {
    let specs = ModelSpec::parse_list(&args.models)
        .context("--models")
        .map_err(usage)?;
    let baseline: ModelSpec = args.baseline.parse().context("--baseline").map_err(usage)?;
    let (params, params_raw) = read_json::<Stamped<ModelParams>>(&args.params, "parameter file")?;
    let (log, raw) = read_log(&args.log)?;
    let replay_params = ReplayParams::for_log(&params.body, &log)
        .with_context(|| {
            format!(
                "parameter file `{}` does not match the log",
                args.params.display()
            )
        })
        .map_err(data)?;
    let pool = thread_pool(args.threads)?;
    let options = ReplayOptions {
        use_rho: !args.no_rho,
    };
    let report = pool
        .install(|| replay(&log, &specs, &replay_params, options))
        .map_err(data)?;

    if let Some(dir) = &args.curves {
        for (spec, values) in report.models.iter().zip(&report.sorted_probabilities) {
            write_curve(&dir.join(format!("sorted_{spec}.csv")), values)?;
        }
        if report.index_of(baseline).is_some() {
            let curves = relative_curves(&report, baseline).map_err(data)?;
            for (spec, values) in report.models.iter().zip(&curves) {
                write_curve(
                    &dir.join(format!("relative_{spec}_vs_{baseline}.csv")),
                    values,
                )?;
            }
        }
    }

    let seed = sidecar_seed(&args.log).or(params.meta.and_then(|m| m.seed));
    let meta = Meta::new(seed, digest(&[&options_json(&args), &params_raw, &raw]));
    write_json(
        &args.out,
        &Stamped {
            meta: Some(meta),
            body: &report,
        },
    )?;
    Ok(summarize_report(&report, &args.out))
}

fn summarize_report(report: &ModelReport, out: &Path) -> String {
    let best = match report.best_model() {
        Some(m) => format!(
            "best {m} ({:.4})",
            report.mean_log_prob_of(m).unwrap_or(f64::NAN)
        ),
        None => "no unique best model".into(),
    };
    format!(
        "likelihood: scored {} of {} edges under {} models, {best} -> {}",
        report.scored_edges,
        report.total_edges,
        report.models.len(),
        out.display()
    )
}

#[derive(Serialize)]
struct RecencyRow {
    t: f64,
    e_t: f64,
    one_minus_e_t: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    theory: Option<f64>,
}

#[derive(Serialize)]
struct TailReport {
    #[serde(flatten)]
    fit: PowerLawFit,
    gof_p_value: f64,
    gof_reps: usize,
}

#[derive(Serialize)]
struct Analysis {
    unit_seconds: f64,
    edges: usize,
    pages: usize,
    recency: Vec<RecencyRow>,
    /// Timescale in threshold units.
    recency_fit: Option<DecayFit>,
    degree_raw: Vec<(f64, f64)>,
    degree_log_binned: Vec<(f64, f64)>,
    power_law: Option<TailReport>,
    notes: Vec<String>,
}

fn parse_thresholds(s: &str) -> Outcome<Vec<f64>> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite() && *v >= 0.0)
                .ok_or_else(|| usage(anyhow!("--thresholds: `{t}` is not a non-negative number")))
        })
        .collect()
}

fn analyze(args: AnalyzeArgs) -> Outcome<String> {
    if !(args.unit > 0.0) {
        return Err(usage(anyhow!("--unit must be > 0")));
    }
    let thresholds = parse_thresholds(&args.thresholds)?;
    let config = match &args.config {
        Some(path) => {
            let (c, raw) = read_json::<SimConfig>(path, "config file")?;
            c.validate()
                .with_context(|| format!("config file `{}`", path.display()))
                .map_err(usage)?;
            Some((c, raw))
        }
        None => None,
    };
    let (log, raw) = read_log(&args.log)?;
    let mut notes = Vec::new();

    let scaled: Vec<f64> = thresholds.iter().map(|t| t * args.unit).collect();
    let e = mediaweb::analysis::empirical_recency(&log, &scaled).map_err(data)?;
    let mut theory: Vec<Option<f64>> = vec![None; thresholds.len()];
    if let Some((c, _)) = &config {
        for (slot, &t) in theory.iter_mut().zip(&thresholds) {
            match recency_curve(&c.hosts, &c.rho, c.spec, t) {
                Ok(v) => *slot = Some(v),
                Err(err) => {
                    notes.push(format!("no mean-field recency curve: {err}"));
                    break;
                }
            }
        }
    }
    let recency: Vec<RecencyRow> = thresholds
        .iter()
        .zip(&e)
        .zip(&theory)
        .map(|((&t, &e_t), &th)| RecencyRow {
            t,
            e_t,
            one_minus_e_t: 1.0 - e_t,
            theory: th,
        })
        .collect();

    let recency_fit = match fit_recency_decay(&log, 31) {
        Ok((fit, _)) => Some(DecayFit {
            timescale: fit.timescale / args.unit,
            intercept: fit.intercept,
            ..fit
        }),
        Err(err) => {
            notes.push(format!("no recency fit: {err}"));
            None
        }
    };
    let degree_raw = degree_distribution(&log, Binning::Raw).map_err(data)?;
    let degree_log_binned = degree_distribution(
        &log,
        Binning::LogBinned {
            factor: Binning::DEFAULT_FACTOR,
        },
    )
    .map_err(data)?;
    let degrees: Vec<u64> = log.pages().iter().map(|p| p.indegree as u64).collect();
    let power_law = match fit_power_law_tail_auto(&degrees, args.tail_fraction) {
        Ok(fit) => {
            let p = power_law_gof(&fit, args.gof_reps.max(1), args.seed).map_err(usage)?;
            Some(TailReport {
                fit,
                gof_p_value: p,
                gof_reps: args.gof_reps.max(1),
            })
        }
        Err(mediaweb::Error::InvalidArgument(msg)) => {
            return Err(usage(anyhow!("--tail-fraction: {msg}")))
        }
        Err(err) => {
            notes.push(format!("no power-law fit: {err}"));
            None
        }
    };

    if let Some(path) = &args.recency_csv {
        let mut body = String::from("T,e_T,one_minus_e_T");
        body += if config.is_some() { ",theory\n" } else { "\n" };
        for r in &recency {
            body += &format!("{},{},{}", r.t, r.e_t, r.one_minus_e_t);
            match (&config, r.theory) {
                (Some(_), Some(v)) => body += &format!(",{v}\n"),
                (Some(_), None) => body += ",\n",
                (None, _) => body += "\n",
            }
        }
        write_text(path, &body)?;
    }
    if let Some(path) = &args.degree_csv {
        let mut body = String::from("degree,density\n");
        for (d, v) in &degree_log_binned {
            body += &format!("{d},{v}\n");
        }
        write_text(path, &body)?;
    }

    let config_raw = config.as_ref().map(|c| c.1.clone()).unwrap_or_default();
    let meta = Meta::new(
        sidecar_seed(&args.log),
        digest(&[&options_json(&args), &raw, &config_raw]),
    );
    let analysis = Analysis {
        unit_seconds: args.unit,
        edges: log.edges().len(),
        pages: log.pages().len(),
        recency,
        recency_fit,
        degree_raw,
        degree_log_binned,
        power_law,
        notes,
    };
    write_json(
        &args.out,
        &Stamped {
            meta: Some(meta),
            body: &analysis,
        },
    )?;
    let fit = analysis
        .recency_fit
        .map(|f| {
            format!(
                "recency timescale {:.3} (R2 {:.3})",
                f.timescale, f.r_squared
            )
        })
        .unwrap_or_else(|| "no recency fit".into());
    let tail = analysis
        .power_law
        .as_ref()
        .map(|t| {
            format!(
                "tail exponent {:.2} (gof p {:.2})",
                t.fit.exponent, t.gof_p_value
            )
        })
        .unwrap_or_else(|| "no tail fit".into());
    Ok(format!(
        "analyze: {} edges, {fit}, {tail} -> {}",
        analysis.edges,
        args.out.display()
    ))
}

fn write_text(path: &Path, body: &str) -> Outcome<()> {
    let mut out = create(path)?;
    out.write_all(body.as_bytes())
        .and_then(|_| out.flush())
        .with_context(|| format!("cannot write `{}`", path.display()))
        .map_err(data)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Ingest(a) => ingest_cmd(a),
        Command::Estimate(a) => estimate(a),
        Command::Likelihood(a) => likelihood(a),
        Command::Analyze(a) => analyze(a),
    };
    match result {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Data(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
