use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{Args, Parser, Subcommand};

use slameval::alignment::AlignmentMode;
use slameval::datasets::{self, ParseMode, PerturbationWindow};
use slameval::error::{Error, Result};
use slameval::geometry::{associate, AssociationMethod, AssociationPolicy, Trajectory};
use slameval::harness::{
    self, ExperimentConfig, FrameSchedule, ProcessSut, SimModel, SimulatedSut, SimulatedSutConfig,
    Sut,
};
use slameval::metrics::{self, CrtMode, RpeDelta};
use slameval::report::{self, ExperimentMetadata, ResultDocument, RunSummary, SequenceSummary};

/// Trajectory evaluation and robustness benchmarking for SLAM systems.
#[derive(Parser)]
#[command(name = "slameval", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Batch ATE/RPE evaluation of an estimated trajectory against ground truth.
    Eval(EvalArgs),
    /// Run experiments from a manifest against a simulated or external SUT.
    Run(RunArgs),
    /// Compare result documents and emit plot-ready data files.
    Report(ReportArgs),
    /// List the built-in simulator models.
    Simulate,
}

#[derive(Args)]
struct CommonMetricArgs {
    /// Maximum time difference for timestamp association, seconds.
    #[arg(long, default_value_t = 0.02)]
    max_time_diff: f64,
    /// Interpolate ground truth at estimate timestamps instead of
    /// nearest-neighbor matching.
    #[arg(long)]
    interpolate: bool,
    /// Align in Sim(3) (estimate scale) instead of SE(3).
    #[arg(long)]
    sim3: bool,
    /// RPE interval: e.g. "1s" (seconds) or "1f" (frames).
    #[arg(long, default_value = "1s")]
    rpe_delta: String,
}

impl CommonMetricArgs {
    fn policy(&self) -> AssociationPolicy {
        AssociationPolicy {
            max_time_diff: self.max_time_diff,
            method: if self.interpolate {
                AssociationMethod::Interpolate
            } else {
                AssociationMethod::Nearest
            },
        }
    }

    fn alignment(&self) -> AlignmentMode {
        if self.sim3 {
            AlignmentMode::Sim3
        } else {
            AlignmentMode::Se3
        }
    }

    fn rpe_delta(&self) -> Result<RpeDelta> {
        let s = self.rpe_delta.trim();
        let parse_num = |txt: &str| {
            txt.parse::<f64>()
                .map_err(|_| Error::InvalidArgument(format!("bad RPE delta {s:?}")))
        };
        if let Some(frames) = s.strip_suffix('f') {
            let k = parse_num(frames)? as usize;
            Ok(RpeDelta::Frames(k))
        } else {
            let secs = parse_num(s.strip_suffix('s').unwrap_or(s))?;
            Ok(RpeDelta::Seconds(secs))
        }
    }
}

#[derive(Args)]
struct EvalArgs {
    /// Estimated trajectory (TUM format).
    est_path: PathBuf,
    /// Ground-truth trajectory.
    gt_path: PathBuf,
    /// Ground-truth format.
    #[arg(long, default_value = "tum", value_parser = ["tum", "euroc"])]
    gt_format: String,
    #[command(flatten)]
    common: CommonMetricArgs,
    /// Also compute CRT at this ATE threshold, meters.
    #[arg(long)]
    crt_threshold: Option<f64>,
    /// Time-weighted CRT instead of frame-count.
    #[arg(long)]
    crt_time_weighted: bool,
    /// Skip malformed input rows with a warning instead of failing.
    #[arg(long)]
    lenient: bool,
    /// Write the result document here instead of stdout.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    /// Sequence manifest (TOML).
    manifest: PathBuf,
    /// SUT spec: a simulator model (see `slameval simulate`) or
    /// `cmd:PROGRAM ARGS...` for an out-of-process wrapper.
    #[arg(long)]
    sut: String,
    /// Independent repetitions per sequence.
    #[arg(long, default_value_t = 1)]
    repeat: usize,
    /// Run all manifest sequences as one lifelong session.
    #[arg(long)]
    lifelong: bool,
    /// Fresh SUT instance per sequence in lifelong mode.
    #[arg(long)]
    reset_between: bool,
    /// Perturbation-window sidecar applied to every sequence (overrides
    /// per-sequence windows_path from the manifest).
    #[arg(long)]
    windows: Option<PathBuf>,
    /// Base RNG seed; run k uses seed + k.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Per-frame timeout, seconds.
    #[arg(long, default_value_t = 30.0)]
    timeout_secs: f64,
    #[command(flatten)]
    common: CommonMetricArgs,
    /// Output directory for documents and series files.
    #[arg(long, default_value = "results", env = "SLAMEVAL_OUT_DIR")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct ReportArgs {
    /// Result documents to compare.
    #[arg(required = true)]
    result_paths: Vec<PathBuf>,
    /// Directory for plot-data files.
    #[arg(long, default_value = "report-out", env = "SLAMEVAL_REPORT_DIR")]
    out_dir: PathBuf,
}

fn main() {
    let cli = Cli::parse();
    let code = match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    };
    std::process::exit(code);
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Eval(args) => cmd_eval(args),
        Command::Run(args) => cmd_run(args),
        Command::Report(args) => cmd_report(args),
        Command::Simulate => {
            println!("available simulator models:");
            for (spec, desc) in SimModel::descriptions() {
                println!("  {spec:<40} {desc}");
            }
            Ok(())
        }
    }
}

fn load_trajectory(path: &Path, format: &str, mode: ParseMode) -> Result<Trajectory> {
    let file = std::fs::File::open(path)?;
    let reader = BufReader::new(file);
    let parsed = match format {
        "euroc" => datasets::parse_euroc_groundtruth(reader, mode)?,
        _ => datasets::parse_tum_trajectory(reader, mode)?,
    };
    for w in &parsed.warnings {
        eprintln!("warning: {}: {w}", path.display());
    }
    Ok(parsed.trajectory)
}

fn cmd_eval(args: EvalArgs) -> Result<()> {
    let mode = if args.lenient {
        ParseMode::Lenient
    } else {
        ParseMode::Strict
    };
    let est = load_trajectory(&args.est_path, "tum", mode)?;
    let gt = load_trajectory(&args.gt_path, &args.gt_format, mode)?;

    let policy = args.common.policy();
    let matched = associate(&est, &gt, &policy);
    if matched.is_empty() {
        eprintln!(
            "warning: no associations within {} s ({} estimates, {} ground truth)",
            policy.max_time_diff,
            est.len(),
            gt.len()
        );
    }
    let ate = metrics::ate(&matched, args.common.alignment())?;
    let rpe = metrics::rpe(&matched, args.common.rpe_delta()?).ok();
    let crt = match args.crt_threshold {
        Some(threshold) => {
            let tracked = vec![true; ate.per_pose_errors.len()];
            let mode = if args.crt_time_weighted {
                CrtMode::TimeWeighted
            } else {
                CrtMode::FrameCount
            };
            Some(metrics::crt(
                &ate.per_pose_errors,
                &tracked,
                threshold,
                mode,
            )?)
        }
        None => None,
    };
    let normalized = metrics::normalized_ate_rmse(ate.rmse, gt.metric_length()?)?;

    let mut doc = ResultDocument::new(ExperimentMetadata {
        sut: format!("file:{}", args.est_path.display()),
        sequence: args.gt_path.display().to_string(),
        seed: 0,
        repetitions: 1,
    });
    doc.runs.push(RunSummary {
        run_index: 0,
        exit: "completed".into(),
        ate_rmse: Some(ate.rmse),
        ate_mean: Some(ate.mean),
        ate_median: Some(ate.median),
        ate_max: Some(ate.max),
        rpe_trans_rmse: rpe.as_ref().map(|r| r.trans_rmse),
        rpe_rot_rmse: rpe.as_ref().map(|r| r.rot_rmse),
        crt: crt.as_ref().map(|c| c.correct_ratio),
        normalized_ate: Some(normalized),
        frame_rate: None,
        series_file: None,
    });
    doc.recompute_aggregate();

    let json = serde_json::to_string_pretty(&doc).map_err(|e| Error::Format(e.to_string()))?;
    match args.output {
        Some(path) => report::write_atomic(&path, json.as_bytes())?,
        None => println!("{json}"),
    }
    Ok(())
}

enum SutSpec {
    Simulated {
        model: SimModel,
        frame_delay: Option<Duration>,
    },
    Process(Vec<String>),
}

fn parse_sut_spec(spec: &str) -> Result<SutSpec> {
    if let Some(cmdline) = spec.strip_prefix("cmd:") {
        let parts: Vec<String> = cmdline.split_whitespace().map(String::from).collect();
        if parts.is_empty() {
            return Err(Error::Config("empty SUT command".into()));
        }
        return Ok(SutSpec::Process(parts));
    }
    let (model, frame_delay) = SimModel::parse(spec)?;
    Ok(SutSpec::Simulated { model, frame_delay })
}

fn make_sut(spec: &SutSpec, gt: &Trajectory, seed: u64, timeout: Duration) -> Result<Box<dyn Sut>> {
    Ok(match spec {
        SutSpec::Simulated { model, frame_delay } => Box::new(SimulatedSut::new(
            SimulatedSutConfig {
                model: model.clone(),
                seed,
                frame_delay: *frame_delay,
            },
            gt.clone(),
        )),
        SutSpec::Process(cmd) => Box::new(ProcessSut::new(cmd.clone(), timeout)?),
    })
}

fn sut_label(spec: &str) -> String {
    spec.replace([':', '/', ' ', ','], "_")
}

fn load_sequence_windows(
    manifest: &datasets::SequenceManifest,
    entry: &datasets::SequenceEntry,
    override_path: &Option<PathBuf>,
) -> Result<Option<Vec<PerturbationWindow>>> {
    let path = match override_path {
        Some(p) => Some(p.clone()),
        None => entry.windows_path.as_ref().map(|p| manifest.resolve(p)),
    };
    path.map(|p| datasets::load_windows(&p)).transpose()
}

fn cmd_run(args: RunArgs) -> Result<()> {
    let manifest = datasets::load_manifest(&args.manifest)?;
    let spec = parse_sut_spec(&args.sut)?;
    let timeout = Duration::from_secs_f64(args.timeout_secs);
    let config = ExperimentConfig {
        frame_timeout: timeout,
        monitor: true,
        policy: args.common.policy(),
        alignment: args.common.alignment(),
    };
    let rpe_delta = args.common.rpe_delta()?;
    std::fs::create_dir_all(&args.out_dir)?;

    if args.lifelong {
        return cmd_run_lifelong(&args, &manifest, &spec, config, rpe_delta);
    }

    for entry in &manifest.sequences {
        let gt = load_trajectory(&manifest.resolve(&entry.gt_path), "tum", ParseMode::Strict)?;
        let times = datasets::parse_frame_times(BufReader::new(std::fs::File::open(
            manifest.resolve(&entry.frames_path),
        )?))?;
        let schedule = FrameSchedule::from_times(&times)?;
        let windows = load_sequence_windows(&manifest, entry, &args.windows)?;

        let outcome = harness::run_repeated(
            |run_idx| {
                make_sut(&spec, &gt, args.seed + run_idx as u64, timeout)
                    .expect("SUT construction failed")
            },
            &schedule,
            &gt,
            args.repeat,
            &config,
            rpe_delta,
            entry.crt_threshold,
        )?;

        let label = sut_label(&args.sut);
        let mut doc = ResultDocument::new(ExperimentMetadata {
            sut: args.sut.clone(),
            sequence: entry.id.clone(),
            seed: args.seed,
            repetitions: args.repeat,
        });
        for (k, run) in outcome.runs.iter().enumerate() {
            let series_name = format!("{label}_{}_run{k}.series.csv", entry.id);
            report::write_atomic(
                &args.out_dir.join(&series_name),
                report::render_series_csv(&run.series, &run.record).as_bytes(),
            )?;
            let mut summary = RunSummary::from_metrics(k, &run.record, &run.metrics);
            summary.series_file = Some(series_name);
            doc.runs.push(summary);
        }
        doc.recompute_aggregate();

        if let Some(windows) = &windows {
            // Correlate on the first run that produced a series.
            if let Some(run) = outcome.runs.iter().find(|r| !r.series.entries.is_empty()) {
                doc.window_correlation =
                    Some(datasets::correlate_windows_series(&run.series, windows));
            }
        }

        let doc_path = args.out_dir.join(format!("{label}_{}.json", entry.id));
        report::write_document(&doc_path, &doc)?;
        println!(
            "{}: aggregate normalized ATE {} crash rate {:.2} -> {}",
            entry.id,
            doc.aggregate
                .median_normalized_ate
                .map(|v| format!("{v:.6}"))
                .unwrap_or_else(|| "unavailable".into()),
            doc.aggregate.crash_rate,
            doc_path.display()
        );
    }
    Ok(())
}

fn cmd_run_lifelong(
    args: &RunArgs,
    manifest: &datasets::SequenceManifest,
    spec: &SutSpec,
    config: ExperimentConfig,
    rpe_delta: RpeDelta,
) -> Result<()> {
    // The lifelong SUT sees all sequences; simulators get the first
    // sequence's ground truth merged view is unnecessary since poses are
    // derived per frame from each sequence's own ground truth. A fresh
    // factory call reloads the upcoming sequence's ground truth.
    let mut seq_index = 0usize;
    let gts: Vec<Trajectory> = manifest
        .sequences
        .iter()
        .map(|e| load_trajectory(&manifest.resolve(&e.gt_path), "tum", ParseMode::Strict))
        .collect::<Result<_>>()?;

    let opts = harness::LifelongOptions {
        reset_between: args.reset_between,
        config,
        rpe_delta,
        crt_mode: CrtMode::FrameCount,
    };
    let outcome = harness::run_lifelong(
        || {
            let gt = gts[seq_index.min(gts.len() - 1)].clone();
            seq_index += 1;
            make_sut(spec, &gt, args.seed, config_timeout(args)).expect("SUT construction failed")
        },
        manifest,
        &opts,
    )?;

    let label = sut_label(&args.sut);
    let mut doc = ResultDocument::new(ExperimentMetadata {
        sut: args.sut.clone(),
        sequence: "lifelong".into(),
        seed: args.seed,
        repetitions: 1,
    });
    let mut summaries = Vec::new();
    for (i, seq) in outcome.sequences.iter().enumerate() {
        let series_name = format!("{label}_lifelong_{}.series.csv", seq.id);
        report::write_atomic(
            &args.out_dir.join(&series_name),
            report::render_series_csv(&seq.series, &seq.record).as_bytes(),
        )?;
        let mut run = RunSummary::from_metrics(i, &seq.record, &seq.metrics);
        run.series_file = Some(series_name);
        doc.runs.push(run);
        summaries.push(SequenceSummary {
            id: seq.id.clone(),
            crt_threshold: seq.crt_threshold,
            exit: seq.record.exit.to_string(),
            ate_rmse: seq.metrics.ate.as_ref().map(|a| a.rmse),
            rpe_trans_rmse: seq.metrics.rpe.as_ref().map(|r| r.trans_rmse),
            crt: seq.metrics.crt.as_ref().map(|c| c.correct_ratio),
            normalized_ate: seq.metrics.normalized_ate,
        });
    }
    doc.lifelong = Some(summaries);
    doc.restarts = Some(outcome.restarts);
    doc.recompute_aggregate();

    if let Some(windows_path) = &args.windows {
        let windows = datasets::load_windows(windows_path)?;
        if let Some(seq) = outcome
            .sequences
            .iter()
            .find(|s| !s.series.entries.is_empty())
        {
            doc.window_correlation =
                Some(datasets::correlate_windows_series(&seq.series, &windows));
        }
    }

    let doc_path = args.out_dir.join(format!("{label}_lifelong.json"));
    report::write_document(&doc_path, &doc)?;
    println!(
        "lifelong session: {} sequences, {} restarts -> {}",
        outcome.sequences.len(),
        outcome.restarts,
        doc_path.display()
    );
    Ok(())
}

fn config_timeout(args: &RunArgs) -> Duration {
    Duration::from_secs_f64(args.timeout_secs)
}

fn cmd_report(args: ReportArgs) -> Result<()> {
    let mut docs = Vec::new();
    let mut base_dirs = Vec::new();
    for path in &args.result_paths {
        let doc = report::read_document(path)?;
        doc.verify_consistency()?;
        base_dirs.push(
            path.parent()
                .map(Path::to_path_buf)
                .unwrap_or_else(|| PathBuf::from(".")),
        );
        docs.push(doc);
    }

    print!("{}", report::comparison_table(&docs));
    println!();
    print!("{}", report::frame_rate_table(&docs));

    std::fs::create_dir_all(&args.out_dir)?;
    report::write_atomic(
        &args.out_dir.join("crt_bars.csv"),
        report::render_crt_bars(&docs).as_bytes(),
    )?;
    let (series, missing) = report::render_error_over_time(&docs, &base_dirs);
    report::write_atomic(&args.out_dir.join("error_over_time.csv"), series.as_bytes())?;
    for m in missing {
        eprintln!("warning: missing series file {m}");
    }
    println!("plot data written to {}", args.out_dir.display());
    Ok(())
}
