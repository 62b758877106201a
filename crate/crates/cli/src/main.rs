//! `poc`: generate prompted-object datasets and evaluate anomaly maps.
//!
//! Exit status: 0 on success, 1 when there was no work or every sample
//! failed, 2 on invalid configuration.

mod config;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use poc_core::backend::http::HttpBackend;
use poc_core::backend::mock::{MockInpainter, MockSegmenter};
use poc_core::backend::{InpaintBackend, SegmentBackend};
use poc_core::catalog::{catalog, load_catalog, CatalogName};
use poc_core::dataset::manifest::MANIFEST_FILE;
use poc_core::dataset::{run, Mode};
use poc_core::evaluate::{evaluate_dirs, EvalRequest};
use poc_core::provenance::Provenance;

use config::{named_convention, AppConfig, ConfigError, GenerateOverrides};

#[derive(Debug, Parser)]
#[command(
    name = "poc",
    version,
    about = "Prompted object insertion for segmentation datasets"
)]
struct Cli {
    /// Log filter, e.g. `info` or `poc_core=debug`. Overrides `log_level`.
    #[arg(long, global = true)]
    log_level: Option<String>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Insert prompted objects into a dataset.
    Generate(GenerateArgs),
    /// Score anomaly maps against ground-truth labels.
    Evaluate(EvaluateArgs),
    /// Tabulate and plot evaluation reports.
    Report(ReportArgs),
    /// Print the built-in object catalogs.
    Catalogs {
        /// Catalog to print; all when omitted.
        name: Option<String>,
    },
}

#[derive(Debug, Args)]
struct GenerateArgs {
    /// TOML configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// anomaly-test, ood-finetune or extend.
    #[arg(long, value_parser = parse_mode)]
    mode: Option<Mode>,
    /// Global seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Use the deterministic procedural backends instead of a model server.
    #[arg(long)]
    mock: bool,
    /// Directory with `images/*.png` and `labels/*.png`.
    #[arg(long)]
    input_dir: Option<PathBuf>,
    /// Receives `images/`, `labels/` and `manifest.jsonl`.
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// Worker threads.
    #[arg(long)]
    concurrency: Option<usize>,
    /// Augmentations per input image.
    #[arg(long)]
    augmentations: Option<u32>,
    /// Insert all augmentations of an image into a single output image.
    #[arg(long)]
    compose: bool,
    /// Replace an existing output directory.
    #[arg(long, conflicts_with = "resume")]
    overwrite: bool,
    /// Continue an interrupted run in the same output directory.
    #[arg(long)]
    resume: bool,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    /// TOML configuration file; its `[eval]` section supplies defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Directory of score maps (`<stem>.bin`).
    #[arg(long)]
    scores: Option<PathBuf>,
    /// Directory of label maps (`<stem>.png`).
    #[arg(long)]
    labels: Option<PathBuf>,
    /// Output report (JSON).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Histogram bins; 0 evaluates with the exact sweep.
    #[arg(long)]
    bins: Option<usize>,
    #[arg(long)]
    dataset: Option<String>,
    #[arg(long)]
    method: Option<String>,
    /// Label convention of the ground truth: `anomaly` or `cityscapes`.
    #[arg(long)]
    convention: Option<String>,
}

#[derive(Debug, Args)]
struct ReportArgs {
    /// Evaluation reports (JSON).
    #[arg(required = true)]
    reports: Vec<PathBuf>,
    /// Directory for the CSV table and SVG plots.
    #[arg(long)]
    out_dir: PathBuf,
}

fn parse_mode(s: &str) -> Result<Mode, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string()))
        .map_err(|_| format!("unknown mode `{s}` (expected anomaly-test, ood-finetune or extend)"))
}

/// Work finished but produced nothing usable; maps to exit status 1.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
struct NoOutput(String);

fn exit_status(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<ConfigError>().is_some() {
        return 2;
    }
    match err.downcast_ref::<poc_core::Error>() {
        Some(
            poc_core::Error::Config(_)
            | poc_core::Error::OutputExists(_)
            | poc_core::Error::CatalogNotFound(_),
        ) => 2,
        _ => 1,
    }
}

fn init_logging(cli_level: Option<&str>, config_level: Option<&str>) {
    let mut builder =
        env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"));
    if let Some(level) = cli_level.or(config_level) {
        builder.parse_filters(level);
    }
    let _ = builder.format_timestamp_millis().try_init();
}

fn cmd_generate(args: GenerateArgs, log_level: Option<&str>) -> anyhow::Result<()> {
    let cfg = AppConfig::load_optional(args.config.as_deref())?;
    init_logging(log_level, cfg.log_level.as_deref());
    let ov = GenerateOverrides {
        mode: args.mode,
        seed: args.seed,
        mock: args.mock,
        input_dir: args.input_dir,
        output_dir: args.output_dir,
        concurrency: args.concurrency,
        augmentations: args.augmentations,
        compose: args.compose,
        overwrite: args.overwrite,
        resume: args.resume,
    };
    let job = cfg.generation_job(&ov)?;
    let summary = if cfg.use_mock(&ov) {
        log::info!("using mock backends");
        run(&job, &MockInpainter, &MockSegmenter::default())?
    } else {
        let http_cfg = cfg.http_config();
        log::info!("using model server at {}", http_cfg.base_url);
        let http = HttpBackend::new(&http_cfg)?;
        let (inpainter, segmenter): (&dyn InpaintBackend, &dyn SegmentBackend) = (&http, &http);
        run(&job, inpainter, segmenter)?
    };

    println!(
        "mode:          {}",
        serde_json::to_value(job.mode)?.as_str().unwrap_or_default()
    );
    println!("accepted:      {}", summary.accepted());
    println!("rejected:      {}", summary.rejected());
    println!("output images: {}", summary.output_images);
    println!("elapsed:       {:.2} s", summary.elapsed.as_secs_f64());
    println!("throughput:    {:.2} samples/s", summary.samples_per_sec());
    println!(
        "manifest:      {}",
        job.output_dir.join(MANIFEST_FILE).display()
    );
    if summary.manifest.entries.is_empty() {
        return Err(NoOutput(format!(
            "no input images found under {}",
            job.input_dir.display()
        ))
        .into());
    }
    if summary.accepted() == 0 {
        return Err(NoOutput("every sample was rejected".into()).into());
    }
    Ok(())
}

fn required<T>(v: Option<T>, field: &str, flag: &str) -> anyhow::Result<T> {
    v.ok_or_else(|| {
        ConfigError(format!(
            "eval.{field}: missing (set it in the config or pass --{flag})"
        ))
        .into()
    })
}

fn cmd_evaluate(args: EvaluateArgs, log_level: Option<&str>) -> anyhow::Result<()> {
    let cfg = AppConfig::load_optional(args.config.as_deref())?;
    init_logging(log_level, cfg.log_level.as_deref());
    let e = cfg.eval;
    let scores = required(args.scores.or(e.scores_dir), "scores_dir", "scores")?;
    let labels = required(args.labels.or(e.labels_dir), "labels_dir", "labels")?;
    let out = required(args.out.or(e.out), "out", "out")?;
    let n_bins = args.bins.or(e.bins).unwrap_or(0);
    let dataset = args
        .dataset
        .or(e.dataset)
        .unwrap_or_else(|| "dataset".into());
    let method = args.method.or(e.method).unwrap_or_else(|| "method".into());
    let convention_name = args
        .convention
        .or(e.convention)
        .unwrap_or_else(|| "anomaly".into());
    let convention = named_convention(&convention_name).ok_or_else(|| {
        ConfigError(format!(
            "eval.convention: unknown convention `{convention_name}` (expected `anomaly` or `cityscapes`)"
        ))
    })?;
    for (field, dir) in [("scores_dir", &scores), ("labels_dir", &labels)] {
        if !dir.is_dir() {
            return Err(ConfigError(format!(
                "eval.{field}: {} is not a directory",
                dir.display()
            ))
            .into());
        }
    }

    let settings = serde_json::json!({
        "n_bins": n_bins,
        "convention": convention_name,
        "dataset": dataset,
        "method": method,
    });
    let outcome = evaluate_dirs(EvalRequest {
        scores_dir: &scores,
        labels_dir: &labels,
        convention: &convention,
        n_bins,
        dataset: &dataset,
        method: &method,
        provenance: Provenance::for_config(&settings, None),
    })
    .map_err(|e| match e {
        poc_core::Error::EmptyInput(msg) => NoOutput(msg).into(),
        other => anyhow::Error::from(other),
    })?;
    for p in &outcome.unpaired {
        eprintln!("warning: unpaired file skipped: {}", p.display());
    }
    for (p, why) in &outcome.skipped {
        eprintln!("warning: unreadable pair skipped: {}: {why}", p.display());
    }
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(&out, serde_json::to_vec_pretty(&outcome.report)?)
        .with_context(|| format!("writing {}", out.display()))?;
    let r = &outcome.report;
    println!("pairs:   {}", outcome.pairs);
    println!("F1:      {:.4}", r.max_f1);
    println!("AuPRC:   {:.4}", r.auprc);
    println!("FPR95:   {:.4}", r.fpr_at_95tpr);
    println!("report:  {}", out.display());
    Ok(())
}

fn cmd_report(args: ReportArgs) -> anyhow::Result<()> {
    let reports = report::sorted(report::load_reports(&args.reports)?);
    for path in report::write_all(&args.out_dir, &reports)? {
        println!("{}", path.display());
    }
    Ok(())
}

fn cmd_catalogs(name: Option<String>) -> anyhow::Result<()> {
    let catalogs = match name {
        Some(n) => vec![load_catalog(&n)?],
        None => CatalogName::ALL.iter().map(|&c| catalog(c)).collect(),
    };
    let many = catalogs.len() > 1;
    for (i, c) in catalogs.iter().enumerate() {
        if many {
            if i > 0 {
                println!();
            }
            println!("# {} ({})", c.name.as_str(), c.len());
        }
        for p in c.prompts() {
            println!("{p}");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = cli.log_level.as_deref();
    let result = match cli.command {
        Command::Generate(args) => cmd_generate(args, level),
        Command::Evaluate(args) => cmd_evaluate(args, level),
        Command::Report(args) => cmd_report(args),
        Command::Catalogs { name } => cmd_catalogs(name),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_status(&e))
        }
    }
}
