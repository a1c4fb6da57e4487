//! Fully resolved run configuration and the batch entry points built on it.
//!
//! A [`RunConfig`] is written next to every run's outputs. Loading it back
//! and running again with the same cache reproduces the run without backend
//! calls.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::cache::{CacheError, CacheStore};
use crate::dataset::{load_dataset, sample_stratified, App, DatasetError};
use crate::evaluator::{confusion_matrix, decision_pairs, metrics, render_report, MetricsReport, ReportFormat};
use crate::model::{mock_from_fixture, BackendKind, HttpBackend, LimiterConfig, ModelClient, ModelError};
use crate::pipeline::{
    ExperimentOutcome, FailureRecord, FusionStrategy, Pipeline, PipelineConfig, PipelineError, RatingDecision,
    RefusalFallback, ScreenshotAssessment, TraceEntry,
};
use crate::policy::{PolicyError, PolicyTable};

pub const DEFAULT_BASE_URL: &str = "https://api.openai.com";

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Cache(#[from] CacheError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error("no app with id {0:?} in the manifest")]
    UnknownApp(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("I/O error at {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("no strategy produced a decision; {0} failure(s)")]
    NothingCompleted(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub manifest: PathBuf,
    pub strategies: Vec<FusionStrategy>,
    pub k: usize,
    pub seed: u64,
    pub backend: BackendKind,
    /// Only used with the HTTP backend.
    pub base_url: String,
    /// Only used with the mock backend.
    pub fixture: Option<PathBuf>,
    pub model_id: String,
    pub cache_dir: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
    pub concurrency: usize,
    pub temperature: f64,
    pub max_tokens: u32,
    pub max_side: u32,
    pub append_findings: bool,
    pub parse_retries: u32,
    pub refusal_fallback: RefusalFallback,
    pub requests_per_minute: Option<u32>,
    pub max_in_flight: usize,
    /// Policy table file; the built-in App Store table when absent.
    pub policy: Option<PathBuf>,
    /// Stratified sample of this many apps per ground-truth class.
    pub sample_per_class: Option<usize>,
}

impl RunConfig {
    /// Defaults for everything except the manifest.
    pub fn new(manifest: impl Into<PathBuf>) -> Self {
        let p = PipelineConfig::default();
        Self {
            manifest: manifest.into(),
            strategies: FusionStrategy::FUSION.to_vec(),
            k: p.k,
            seed: p.seed,
            backend: BackendKind::Http,
            base_url: DEFAULT_BASE_URL.into(),
            fixture: None,
            model_id: p.model_id,
            cache_dir: None,
            out_dir: None,
            concurrency: p.concurrency,
            temperature: p.temperature,
            max_tokens: p.max_tokens,
            max_side: p.max_side,
            append_findings: p.append_findings,
            parse_retries: p.parse_retries,
            refusal_fallback: p.refusal_fallback,
            requests_per_minute: None,
            max_in_flight: LimiterConfig::default().max_in_flight,
            policy: None,
            sample_per_class: None,
        }
    }

    /// Mock backend driven by `fixture`.
    pub fn mock(manifest: impl Into<PathBuf>, fixture: impl Into<PathBuf>) -> Self {
        Self {
            backend: BackendKind::Mock,
            fixture: Some(fixture.into()),
            ..Self::new(manifest)
        }
    }

    pub fn from_file(path: &Path) -> Result<Self, RunError> {
        let text = std::fs::read_to_string(path).map_err(|source| RunError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        serde_json::from_str(&text).map_err(|e| RunError::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("config serializes");
        s.push('\n');
        s
    }

    pub fn validate(&self) -> Result<(), RunError> {
        if self.strategies.is_empty() {
            return Err(RunError::Config("no strategies requested".into()));
        }
        if self.k == 0 {
            return Err(RunError::Config("k must be at least 1".into()));
        }
        if self.concurrency == 0 || self.max_in_flight == 0 {
            return Err(RunError::Config(
                "concurrency and max_in_flight must be at least 1".into(),
            ));
        }
        if !(0.0..=2.0).contains(&self.temperature) {
            return Err(RunError::Config(format!(
                "temperature {} outside [0, 2]",
                self.temperature
            )));
        }
        if self.backend == BackendKind::Mock && self.fixture.is_none() {
            return Err(RunError::Config("the mock backend needs a fixture file".into()));
        }
        Ok(())
    }

    /// Stable id over everything that affects results; output and cache
    /// locations are excluded.
    pub fn run_id(&self) -> String {
        let mut material = self.clone();
        material.out_dir = None;
        material.cache_dir = None;
        let json = serde_json::to_string(&material).expect("config serializes");
        hex::encode(&Sha256::digest(json.as_bytes())[..6])
    }

    pub fn pipeline_config(&self) -> PipelineConfig {
        PipelineConfig {
            model_id: self.model_id.clone(),
            temperature: self.temperature,
            max_tokens: self.max_tokens,
            max_side: self.max_side,
            k: self.k,
            seed: self.seed,
            append_findings: self.append_findings,
            parse_retries: self.parse_retries,
            refusal_fallback: self.refusal_fallback,
            concurrency: self.concurrency,
        }
    }

    pub fn load_policy(&self) -> Result<PolicyTable, RunError> {
        Ok(match &self.policy {
            Some(path) => PolicyTable::from_file(path)?,
            None => PolicyTable::builtin(),
        })
    }

    pub fn build_client(&self) -> Result<ModelClient, RunError> {
        let client = match self.backend {
            BackendKind::Mock => {
                let fixture = self
                    .fixture
                    .as_ref()
                    .ok_or_else(|| RunError::Config("the mock backend needs a fixture file".into()))?;
                ModelClient::new(mock_from_fixture(fixture)?)
            }
            BackendKind::Http => ModelClient::new(HttpBackend::from_env(&self.base_url)?),
        };
        let client = client.with_limiter(LimiterConfig {
            requests_per_minute: self.requests_per_minute,
            max_in_flight: self.max_in_flight,
        });
        Ok(match &self.cache_dir {
            Some(dir) => client.with_cache(CacheStore::open(dir)?),
            None => client,
        })
    }

    pub fn load_apps(&self) -> Result<Vec<App>, RunError> {
        let apps = load_dataset(&self.manifest)?;
        Ok(match self.sample_per_class {
            Some(n) => sample_stratified(&apps, n, self.seed),
            None => apps,
        })
    }
}

/// Decision file contents; `config` is the resolved run configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionLog {
    pub run_id: String,
    pub config: RunConfig,
    pub decisions: Vec<RatingDecision>,
    pub failures: Vec<FailureRecord>,
}

/// Contents of `report.json`. Holds only results, so warm-cache reruns
/// produce the same bytes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportFile {
    pub run_id: String,
    pub reports: Vec<MetricsReport>,
    pub failures: Vec<FailureRecord>,
}

#[derive(Debug)]
pub struct ExperimentRun {
    pub run_id: String,
    pub config: RunConfig,
    pub outcome: ExperimentOutcome,
    /// One per strategy with at least one labelled decision, best F1 first.
    pub reports: Vec<MetricsReport>,
    pub backend_calls: u64,
    pub cache_hits: u64,
}

pub fn run_experiment(config: &RunConfig) -> Result<ExperimentRun, RunError> {
    config.validate()?;
    let apps = config.load_apps()?;
    let table = config.load_policy()?;
    let client = config.build_client()?;
    let outcome = run_with(config, &client, &table, &apps);
    let reports = reports_for(&outcome, &config.strategies);
    if outcome.decisions.is_empty() {
        return Err(RunError::NothingCompleted(outcome.failures.len()));
    }
    Ok(ExperimentRun {
        run_id: config.run_id(),
        config: config.clone(),
        outcome,
        reports,
        backend_calls: client.backend_calls(),
        cache_hits: client.cache_hits(),
    })
}

/// Run with a caller-supplied client and policy table.
pub fn run_with(config: &RunConfig, client: &ModelClient, table: &PolicyTable, apps: &[App]) -> ExperimentOutcome {
    Pipeline::new(client, table, config.pipeline_config()).run_experiment(apps, &config.strategies)
}

pub fn reports_for(outcome: &ExperimentOutcome, strategies: &[FusionStrategy]) -> Vec<MetricsReport> {
    let mut reports: Vec<MetricsReport> = strategies
        .iter()
        .filter_map(|&s| {
            let pairs = decision_pairs(outcome.decisions_for(s));
            (!pairs.is_empty()).then(|| metrics(&confusion_matrix(pairs)).labeled(s.display_name(), s.modality()))
        })
        .collect();
    reports.sort_by(|a, b| b.macro_avg.f1.total_cmp(&a.macro_avg.f1));
    reports
}

fn write(path: PathBuf, contents: impl AsRef<[u8]>) -> Result<PathBuf, RunError> {
    std::fs::write(&path, contents).map_err(|source| RunError::Io {
        path: path.clone(),
        source,
    })?;
    Ok(path)
}

impl ExperimentRun {
    pub fn report_json(&self) -> String {
        let file = ReportFile {
            run_id: self.run_id.clone(),
            reports: self.reports.clone(),
            failures: self.outcome.failures.clone(),
        };
        let mut s = serde_json::to_string_pretty(&file).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn decisions_json(&self) -> String {
        let log = DecisionLog {
            run_id: self.run_id.clone(),
            config: self.config.clone(),
            decisions: self.outcome.decisions.clone(),
            failures: self.outcome.failures.clone(),
        };
        let mut s = serde_json::to_string_pretty(&log).expect("decisions serialize");
        s.push('\n');
        s
    }

    /// Write run_config.json, decisions.json, report.{json,csv,txt} and one
    /// confusion_<strategy>.csv per reported strategy. Returns the paths written.
    pub fn write_outputs(&self, dir: &Path) -> Result<Vec<PathBuf>, RunError> {
        std::fs::create_dir_all(dir).map_err(|source| RunError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
        let mut written = vec![
            write(dir.join("run_config.json"), self.config.to_json())?,
            write(dir.join("decisions.json"), self.decisions_json())?,
            write(dir.join("report.json"), self.report_json())?,
            write(dir.join("report.csv"), render_report(&self.reports, ReportFormat::Csv))?,
            write(
                dir.join("report.txt"),
                render_report(&self.reports, ReportFormat::TableText),
            )?,
        ];
        for &s in &self.config.strategies {
            if let Some(r) = self.reports.iter().find(|r| r.method == s.display_name()) {
                written.push(write(
                    dir.join(format!("confusion_{}.csv", s.name())),
                    r.confusion.to_csv(),
                )?);
            }
        }
        Ok(written)
    }
}

#[derive(Debug)]
pub struct RateOutcome {
    pub decision: RatingDecision,
    pub backend_calls: u64,
    pub cache_hits: u64,
}

fn find_app(config: &RunConfig, app_id: &str) -> Result<App, RunError> {
    load_dataset(&config.manifest)?
        .into_iter()
        .find(|a| a.id == app_id)
        .ok_or_else(|| RunError::UnknownApp(app_id.to_string()))
}

/// Rate one app with the first strategy of `config`.
pub fn rate_one(config: &RunConfig, app_id: &str) -> Result<RateOutcome, RunError> {
    config.validate()?;
    let app = find_app(config, app_id)?;
    let table = config.load_policy()?;
    let client = config.build_client()?;
    let pipeline = Pipeline::new(&client, &table, config.pipeline_config());
    let decision = pipeline.rate_app(&app, config.strategies[0])?;
    Ok(RateOutcome {
        decision,
        backend_calls: client.backend_calls(),
        cache_hits: client.cache_hits(),
    })
}

/// Step 1 only for one app.
pub fn extract_one(config: &RunConfig, app_id: &str) -> Result<(Vec<ScreenshotAssessment>, Vec<TraceEntry>), RunError> {
    config.validate()?;
    let app = find_app(config, app_id)?;
    let table = config.load_policy()?;
    let client = config.build_client()?;
    let pipeline = Pipeline::new(&client, &table, config.pipeline_config());
    Ok(pipeline.extract_findings_traced(&app)?)
}
