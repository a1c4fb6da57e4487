//! Command-line front end.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage error.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::cache::{CacheStore, CACHE_ENV};
use crate::dataset::{load_dataset, stats, validate_manifest};
use crate::evaluator::{render_report, ReportFormat};
use crate::model::BackendKind;
use crate::pipeline::{
    rank_screenshots, FusionStrategy, RatingDecision, RefusalFallback, ScreenshotAssessment, TraceEntry,
};
use crate::run::{extract_one, rate_one, run_experiment, RunConfig, DEFAULT_BASE_URL};

const STRATEGY_HELP: &str = "Strategies: description-only, screenshot-only, basic-fusion, \
image-caption-fusion, global-cot, selective-cot, random-ablation, text-cot-image, image-select-text-cot";

#[derive(Debug, Parser)]
#[command(
    name = "maturity-rater",
    version,
    about = "Rate app maturity from descriptions and screenshots"
)]
pub struct Cli {
    /// Debug logging; `rate` and `extract` also print the request trace.
    #[arg(short, long, global = true)]
    pub verbose: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Rate one app.
    #[command(after_help = STRATEGY_HELP)]
    Rate {
        #[command(flatten)]
        run: RunArgs,
        /// App manifest (JSON).
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        app_id: String,
        #[arg(long, default_value = "selective-cot")]
        strategy: FusionStrategy,
        /// Write decision.json into this directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run content extraction and ranking for one app, without rating it.
    Extract {
        #[command(flatten)]
        run: RunArgs,
        /// App manifest (JSON).
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        app_id: String,
        /// Write findings.json into this directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Rate every app with each strategy and write reports.
    #[command(after_help = STRATEGY_HELP)]
    Experiment {
        #[command(flatten)]
        run: RunArgs,
        /// App manifest (JSON).
        #[arg(long, required_unless_present = "config")]
        manifest: Option<PathBuf>,
        /// Comma-separated strategy names.
        #[arg(
            long,
            value_delimiter = ',',
            default_value = "basic-fusion,image-caption-fusion,global-cot,selective-cot"
        )]
        strategies: Vec<FusionStrategy>,
        /// Rate a stratified sample of this many apps per class.
        #[arg(long)]
        sample_per_class: Option<usize>,
        /// Replay a saved run_config.json. Only --out and --cache-dir still apply.
        #[arg(long, conflicts_with_all = ["manifest", "strategies", "sample_per_class"])]
        config: Option<PathBuf>,
        #[arg(long, default_value = "runs/latest")]
        out: PathBuf,
    },
    /// Check a manifest and print dataset statistics.
    Validate {
        #[arg(long)]
        manifest: PathBuf,
    },
    /// Inspect or empty the response cache.
    Cache {
        #[arg(long, env = CACHE_ENV)]
        cache_dir: PathBuf,
        #[command(subcommand)]
        action: CacheAction,
    },
}

#[derive(Debug, Subcommand)]
pub enum CacheAction {
    Stats,
    Clear,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BackendArg {
    Mock,
    Http,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RefusalArg {
    TreatAsNone,
    Fail,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long, value_enum, default_value = "http")]
    pub backend: BackendArg,
    /// Mock answers; required with `--backend mock`.
    #[arg(long, required_if_eq("backend", "mock"))]
    pub fixture: Option<PathBuf>,
    #[arg(long, default_value = DEFAULT_BASE_URL)]
    pub base_url: String,
    #[arg(long = "model", default_value = "gpt-4o")]
    pub model_id: String,
    #[arg(long, env = CACHE_ENV)]
    pub cache_dir: Option<PathBuf>,
    /// Top-ranked screenshots fused into the final request.
    #[arg(long, default_value_t = 1)]
    pub k: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Apps rated in parallel.
    #[arg(long, default_value_t = 4)]
    pub concurrency: usize,
    #[arg(long, default_value_t = 4)]
    pub max_in_flight: usize,
    #[arg(long)]
    pub requests_per_minute: Option<u32>,
    #[arg(long, default_value_t = 0.0)]
    pub temperature: f64,
    #[arg(long, default_value_t = 64)]
    pub max_tokens: u32,
    /// Longest image side sent to the model, in pixels.
    #[arg(long, default_value_t = crate::model::DEFAULT_MAX_SIDE)]
    pub max_side: u32,
    /// Append Step-1 findings to the rating prompt.
    #[arg(long)]
    pub append_findings: bool,
    #[arg(long, default_value_t = 1)]
    pub parse_retries: u32,
    #[arg(long, value_enum, default_value = "treat-as-none")]
    pub on_refusal: RefusalArg,
    /// Policy table JSON; the built-in App Store table by default.
    #[arg(long)]
    pub policy: Option<PathBuf>,
}

impl RunArgs {
    fn resolve(&self, manifest: PathBuf, strategies: Vec<FusionStrategy>) -> RunConfig {
        RunConfig {
            manifest,
            strategies,
            k: self.k,
            seed: self.seed,
            backend: match self.backend {
                BackendArg::Mock => BackendKind::Mock,
                BackendArg::Http => BackendKind::Http,
            },
            base_url: self.base_url.clone(),
            fixture: self.fixture.clone(),
            model_id: self.model_id.clone(),
            cache_dir: self.cache_dir.clone(),
            out_dir: None,
            concurrency: self.concurrency,
            temperature: self.temperature,
            max_tokens: self.max_tokens,
            max_side: self.max_side,
            append_findings: self.append_findings,
            parse_retries: self.parse_retries,
            refusal_fallback: match self.on_refusal {
                RefusalArg::TreatAsNone => RefusalFallback::TreatAsNone,
                RefusalArg::Fail => RefusalFallback::Fail,
            },
            requests_per_minute: self.requests_per_minute,
            max_in_flight: self.max_in_flight,
            policy: self.policy.clone(),
            sample_per_class: None,
        }
    }
}

fn init_logging(verbose: bool) {
    let level = if verbose { "debug" } else { "warn" };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .try_init();
}

/// Parse `args` and run; the binary is a thin wrapper over this.
pub fn run_from<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    init_logging(cli.verbose);
    match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn write_json(dir: &Path, name: &str, value: &impl serde::Serialize) -> anyhow::Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(name);
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(&path, text)?;
    Ok(path)
}

fn execute(cli: Cli) -> anyhow::Result<ExitCode> {
    let mut stdout = std::io::stdout().lock();
    match cli.command {
        Command::Rate {
            run,
            manifest,
            app_id,
            strategy,
            out,
        } => {
            let config = run.resolve(manifest, vec![strategy]);
            let outcome = rate_one(&config, &app_id)?;
            print_decision(&mut stdout, &outcome.decision, cli.verbose)?;
            if let Some(dir) = out {
                let path = write_json(&dir, "decision.json", &outcome.decision)?;
                writeln!(stdout, "wrote {}", path.display())?;
            }
        }
        Command::Extract {
            run,
            manifest,
            app_id,
            out,
        } => {
            let config = run.resolve(manifest, vec![FusionStrategy::SelectiveCot]);
            let (assessments, trace) = extract_one(&config, &app_id)?;
            print_assessments(&mut stdout, &assessments)?;
            let ranking = rank_screenshots(&assessments);
            writeln!(stdout, "ranking: {}", join(&ranking))?;
            if cli.verbose {
                print_trace(&mut stdout, &trace)?;
            }
            if let Some(dir) = out {
                let path = write_json(&dir, "findings.json", &assessments)?;
                writeln!(stdout, "wrote {}", path.display())?;
            }
        }
        Command::Experiment {
            run,
            manifest,
            strategies,
            sample_per_class,
            config,
            out,
        } => {
            let mut config = match config {
                Some(path) => {
                    let mut saved = RunConfig::from_file(&path)?;
                    if run.cache_dir.is_some() {
                        saved.cache_dir = run.cache_dir.clone();
                    }
                    saved
                }
                None => RunConfig {
                    sample_per_class,
                    ..run.resolve(manifest.unwrap_or_default(), strategies)
                },
            };
            config.out_dir = Some(out.clone());
            let result = run_experiment(&config)?;
            result.write_outputs(&out)?;
            write!(stdout, "{}", render_report(&result.reports, ReportFormat::TableText))?;
            writeln!(
                stdout,
                "run {}: {} decision(s), {} failure(s), {} backend call(s), {} cache hit(s); outputs in {}",
                result.run_id,
                result.outcome.decisions.len(),
                result.outcome.failures.len(),
                result.backend_calls,
                result.cache_hits,
                out.display()
            )?;
            for f in &result.outcome.failures {
                eprintln!("failed: {} with {}: {}", f.app_id, f.strategy, f.error);
            }
        }
        Command::Validate { manifest } => {
            let report = validate_manifest(&manifest)?;
            for w in &report.warnings {
                writeln!(stdout, "warning: {w}")?;
            }
            for e in &report.errors {
                writeln!(stdout, "error: {e}")?;
            }
            if !report.is_valid() {
                writeln!(stdout, "{} error(s)", report.errors.len())?;
                return Ok(ExitCode::from(1));
            }
            let apps = load_dataset(&manifest)?;
            writeln!(stdout, "{}", stats(&apps))?;
        }
        Command::Cache { cache_dir, action } => {
            let store = CacheStore::open(&cache_dir)?;
            match action {
                CacheAction::Stats => {
                    let s = store.stats()?;
                    writeln!(
                        stdout,
                        "{}: {} entries, {} bytes",
                        cache_dir.display(),
                        s.entries,
                        s.bytes
                    )?;
                }
                CacheAction::Clear => {
                    let removed = store.clear()?;
                    writeln!(stdout, "removed {removed} entries from {}", cache_dir.display())?;
                }
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn join(items: &[usize]) -> String {
    items.iter().map(usize::to_string).collect::<Vec<_>>().join(", ")
}

fn print_assessments(out: &mut impl Write, assessments: &[ScreenshotAssessment]) -> std::io::Result<()> {
    writeln!(out, "{:>4}  {:<14}  findings", "shot", "max severity")?;
    for a in assessments {
        let findings: Vec<String> = a
            .findings
            .iter()
            .map(|f| match f.intensity {
                crate::policy::IntensityLevel::NotApplicable => f.category.label().to_string(),
                level => format!("{} ({level})", f.category.label()),
            })
            .collect();
        let mut line = findings.join("; ");
        if a.refused {
            line.push_str(" [refused]");
        }
        writeln!(
            out,
            "{:>4}  {:<14}  {line}",
            a.screenshot_index,
            a.max_severity.to_string()
        )?;
    }
    Ok(())
}

fn print_trace(out: &mut impl Write, trace: &[TraceEntry]) -> std::io::Result<()> {
    writeln!(out, "trace:")?;
    for t in trace {
        writeln!(out, "  [{}] {} -> {:?}", t.step, t.summary, t.response)?;
    }
    Ok(())
}

fn print_decision(out: &mut impl Write, d: &RatingDecision, verbose: bool) -> std::io::Result<()> {
    writeln!(out, "app: {}", d.app_id)?;
    writeln!(out, "strategy: {} (k={})", d.strategy, d.k)?;
    match d.ground_truth {
        Some(gt) => writeln!(out, "rating: {} (ground truth {gt})", d.rating)?,
        None => writeln!(out, "rating: {}", d.rating)?,
    }
    writeln!(out, "selected screenshots: {}", join(&d.selected_screenshots))?;
    if !d.assessments.is_empty() {
        print_assessments(out, &d.assessments)?;
    }
    for f in &d.description_findings {
        writeln!(out, "description: {} ({})", f.category.label(), f.intensity)?;
    }
    for w in &d.warnings {
        writeln!(out, "warning: {w}")?;
    }
    if verbose {
        print_trace(out, &d.trace)?;
    }
    Ok(())
}
