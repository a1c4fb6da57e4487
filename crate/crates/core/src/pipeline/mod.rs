//! The staged rating procedure.
//!
//! Step 1 asks the model, screenshot by screenshot, which maturity content is
//! present and how intense each intensity-sensitive item is. Findings are
//! mapped to policy severities and the screenshots ranked by them. Step 2
//! sends the selected screenshot(s) with the app description and asks for
//! the final rating. The comparison strategies reuse the same building blocks
//! with different request plans; see [`FusionStrategy`].

mod experiment;
mod strategy;

use std::cmp::Reverse;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::dataset::App;
use crate::model::{encode_image, EncodedImage, ImageError, ModelClient, ModelError, ModelRequest};
use crate::policy::{ContentCategory, IntensityLevel, PolicyError, PolicyTable, RatingLevel, SeverityScore};
use crate::prompts::{
    self, parse_content_response, parse_intensity_response, parse_rating_response, PromptError, PromptKind, PromptText,
    RatingPrompt,
};

pub use self::experiment::{ExperimentOutcome, FailureRecord};
pub use self::strategy::{FusionStrategy, UnknownStrategy};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("missing modality: strategy {strategy} needs screenshots but app {app_id:?} has none")]
    MissingModality { app_id: String, strategy: FusionStrategy },
    #[error("app {app_id:?}, {step}: {source}")]
    Model {
        app_id: String,
        step: String,
        #[source]
        source: ModelError,
    },
    #[error("app {app_id:?}: {source}")]
    Image {
        app_id: String,
        #[source]
        source: ImageError,
    },
    #[error("app {app_id:?}: rating undetermined, last response {last_response:?}")]
    RatingUndetermined {
        app_id: String,
        last_response: String,
        trace: Box<Vec<TraceEntry>>,
    },
    #[error(transparent)]
    Policy(#[from] PolicyError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RefusalFallback {
    /// Record the screenshot as showing no mature content and carry on.
    TreatAsNone,
    /// Fail the app.
    Fail,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub model_id: String,
    pub temperature: f64,
    pub max_tokens: u32,
    pub max_side: u32,
    /// Number of top-ranked screenshots fused in the final request.
    pub k: usize,
    pub seed: u64,
    /// Append Step-1 findings as text to the final rating prompt.
    pub append_findings: bool,
    /// Extra attempts after an unparseable answer.
    pub parse_retries: u32,
    pub refusal_fallback: RefusalFallback,
    /// Apps processed concurrently by [`Pipeline::run_experiment`].
    pub concurrency: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            model_id: "gpt-4o".into(),
            temperature: 0.0,
            max_tokens: 64,
            max_side: crate::model::DEFAULT_MAX_SIDE,
            k: 1,
            seed: 0,
            append_findings: false,
            parse_retries: 1,
            refusal_fallback: RefusalFallback::TreatAsNone,
            concurrency: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContentFinding {
    /// `None` for findings extracted from the description text.
    pub screenshot_index: Option<usize>,
    pub category: ContentCategory,
    pub intensity: IntensityLevel,
    pub severity: SeverityScore,
    pub raw_content_response: String,
    pub raw_intensity_response: Option<String>,
}

impl ContentFinding {
    pub fn rating(&self) -> RatingLevel {
        self.severity.rating()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScreenshotAssessment {
    pub screenshot_index: usize,
    pub findings: Vec<ContentFinding>,
    pub max_severity: SeverityScore,
    pub refused: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

/// One request/response exchange.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub step: String,
    pub kind: PromptKind,
    pub summary: String,
    pub image_digests: Vec<String>,
    pub prompt: String,
    pub response: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RatingDecision {
    pub app_id: String,
    pub strategy: FusionStrategy,
    pub rating: RatingLevel,
    pub ground_truth: Option<RatingLevel>,
    pub selected_screenshots: Vec<usize>,
    pub assessments: Vec<ScreenshotAssessment>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub description_findings: Vec<ContentFinding>,
    pub k: usize,
    pub trace: Vec<TraceEntry>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl RatingDecision {
    /// Trace entries of the final rating request(s).
    pub fn rating_requests(&self) -> impl Iterator<Item = &TraceEntry> {
        self.trace.iter().filter(|t| t.kind == PromptKind::Rating)
    }
}

/// Screenshot indices ordered most severe first; ties keep listing order.
pub fn rank_screenshots(assessments: &[ScreenshotAssessment]) -> Vec<usize> {
    let mut order: Vec<(SeverityScore, usize)> = assessments
        .iter()
        .map(|a| (a.max_severity, a.screenshot_index))
        .collect();
    order.sort_by_key(|&(severity, index)| (Reverse(severity), index));
    order.into_iter().map(|(_, index)| index).collect()
}

enum Answer<T> {
    Parsed(T, String),
    Unparseable(String),
    Refused(String),
}

/// Per-app working state: lazily encoded screenshots and the running trace.
struct AppRun<'a> {
    app: &'a App,
    images: Vec<Option<EncodedImage>>,
    trace: Vec<TraceEntry>,
    warnings: Vec<String>,
}

impl<'a> AppRun<'a> {
    fn new(app: &'a App) -> Self {
        Self {
            app,
            images: vec![None; app.screenshot_paths.len()],
            trace: Vec::new(),
            warnings: Vec::new(),
        }
    }
}

/// Step-1 output shared between strategies rating the same app.
#[derive(Debug, Clone, Default)]
pub(crate) struct Step1Memo {
    screenshots: Option<(Vec<ScreenshotAssessment>, Vec<TraceEntry>)>,
    description: Option<(Vec<ContentFinding>, Vec<TraceEntry>)>,
}

#[derive(Debug)]
pub struct Pipeline<'a> {
    client: &'a ModelClient,
    table: &'a PolicyTable,
    config: PipelineConfig,
}

impl<'a> Pipeline<'a> {
    pub fn new(client: &'a ModelClient, table: &'a PolicyTable, config: PipelineConfig) -> Self {
        Self { client, table, config }
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    pub fn client(&self) -> &ModelClient {
        self.client
    }

    fn image(&self, run: &mut AppRun<'_>, index: usize) -> Result<EncodedImage, PipelineError> {
        if let Some(img) = &run.images[index] {
            return Ok(img.clone());
        }
        let img = encode_image(&run.app.screenshot_paths[index], self.config.max_side).map_err(|source| {
            PipelineError::Image {
                app_id: run.app.id.clone(),
                source,
            }
        })?;
        run.images[index] = Some(img.clone());
        Ok(img)
    }

    fn request(&self, prompt: PromptText, images: Vec<EncodedImage>) -> ModelRequest {
        ModelRequest {
            model_id: self.config.model_id.clone(),
            temperature: self.config.temperature,
            prompt,
            images,
            max_tokens: self.config.max_tokens,
        }
    }

    /// Send one prompt, re-asking with a format reminder while the answer
    /// does not parse. Refusals end the exchange immediately.
    fn ask<T>(
        &self,
        run: &mut AppRun<'_>,
        step: &str,
        prompt: &PromptText,
        images: &[EncodedImage],
        parse: impl Fn(&str) -> Result<T, PromptError>,
    ) -> Result<Answer<T>, PipelineError> {
        let mut last = String::new();
        for attempt in 0..=self.config.parse_retries {
            let prompt = if attempt == 0 {
                prompt.clone()
            } else {
                prompt.with_format_reminder(attempt)
            };
            let request = self.request(prompt, images.to_vec());
            let mut entry = TraceEntry {
                step: step.to_string(),
                kind: request.prompt.kind,
                summary: request.summary(),
                image_digests: request.image_digests().iter().map(|d| d.to_string()).collect(),
                prompt: request.prompt.text.clone(),
                response: String::new(),
            };
            match self.client.complete(&request) {
                Ok(resp) => {
                    entry.response = resp.text.clone();
                    run.trace.push(entry);
                    match parse(&resp.text) {
                        Ok(value) => return Ok(Answer::Parsed(value, resp.text)),
                        Err(_) => last = resp.text,
                    }
                }
                Err(ModelError::Refused(text)) => {
                    entry.response = text.clone();
                    run.trace.push(entry);
                    return Ok(Answer::Refused(text));
                }
                Err(source) => {
                    return Err(PipelineError::Model {
                        app_id: run.app.id.clone(),
                        step: step.to_string(),
                        source,
                    })
                }
            }
        }
        Ok(Answer::Unparseable(last))
    }

    fn none_finding(&self, index: Option<usize>, raw: String) -> Result<ContentFinding, PolicyError> {
        Ok(ContentFinding {
            screenshot_index: index,
            category: ContentCategory::None,
            intensity: IntensityLevel::NotApplicable,
            severity: self
                .table
                .severity_of(ContentCategory::None, IntensityLevel::NotApplicable)?,
            raw_content_response: raw,
            raw_intensity_response: None,
        })
    }

    fn refused(&self, run: &mut AppRun<'_>, step: &str, text: String) -> Result<(), PipelineError> {
        match self.config.refusal_fallback {
            RefusalFallback::TreatAsNone => {
                let msg = format!("{step}: model refused; treated as no mature content");
                log::warn!("app {:?}: {msg}", run.app.id);
                run.warnings.push(msg);
                Ok(())
            }
            RefusalFallback::Fail => Err(PipelineError::Model {
                app_id: run.app.id.clone(),
                step: step.to_string(),
                source: ModelError::Refused(text),
            }),
        }
    }

    /// Content then intensity extraction for one source (a screenshot, or the
    /// description when `images` is empty). Returns the findings and whether
    /// the model refused.
    fn extract_one(
        &self,
        run: &mut AppRun<'_>,
        index: Option<usize>,
        images: &[EncodedImage],
    ) -> Result<(Vec<ContentFinding>, bool, Vec<String>), PipelineError> {
        let label = match index {
            Some(i) => format!("screenshot {i}"),
            None => "description".to_string(),
        };
        let warnings_before = run.warnings.len();
        let content_prompt = match index {
            Some(_) => prompts::render_content_prompt(self.table),
            None => prompts::render_text_content_prompt(self.table, &run.app.description),
        };
        let step = format!("content {label}");
        let parsed = match self.ask(run, &step, &content_prompt, images, |raw| {
            parse_content_response(raw, self.table)
        })? {
            Answer::Parsed(p, _) => p,
            Answer::Refused(text) => {
                self.refused(run, &step, text.clone())?;
                let finding = self.none_finding(index, text)?;
                return Ok((vec![finding], true, run.warnings.split_off(warnings_before)));
            }
            Answer::Unparseable(raw) => {
                let msg = format!("{step}: unparseable content answer {raw:?}; recorded as None");
                log::warn!("app {:?}: {msg}", run.app.id);
                run.warnings.push(msg);
                let finding = self.none_finding(index, raw)?;
                return Ok((vec![finding], false, run.warnings.split_off(warnings_before)));
            }
        };

        let mut findings = Vec::with_capacity(parsed.categories.len());
        for &category in &parsed.categories {
            let (intensity, raw_intensity) = if category.intensity_sensitive() {
                let prompt = match index {
                    Some(_) => prompts::render_intensity_prompt(category),
                    None => prompts::render_text_intensity_prompt(category, &run.app.description),
                }
                .expect("category is intensity-sensitive");
                let step = format!("intensity {label} [{}]", category.label());
                match self.ask(run, &step, &prompt, images, parse_intensity_response)? {
                    Answer::Parsed(level, raw) => (level, Some(raw)),
                    Answer::Unparseable(raw) => {
                        let msg = format!("{step}: unparseable intensity {raw:?}; assumed mild");
                        log::warn!("app {:?}: {msg}", run.app.id);
                        run.warnings.push(msg);
                        (IntensityLevel::Mild, Some(raw))
                    }
                    Answer::Refused(text) => {
                        self.refused(run, &step, text.clone())?;
                        let finding = self.none_finding(index, text)?;
                        return Ok((vec![finding], true, run.warnings.split_off(warnings_before)));
                    }
                }
            } else {
                (IntensityLevel::NotApplicable, None)
            };
            findings.push(ContentFinding {
                screenshot_index: index,
                category,
                intensity,
                severity: self.table.severity_of(category, intensity)?,
                raw_content_response: parsed.raw.clone(),
                raw_intensity_response: raw_intensity,
            });
        }
        Ok((findings, false, run.warnings.split_off(warnings_before)))
    }

    fn extract_screenshots(&self, run: &mut AppRun<'_>) -> Result<Vec<ScreenshotAssessment>, PipelineError> {
        let n = run.app.screenshot_paths.len();
        let mut assessments = Vec::with_capacity(n);
        for index in 0..n {
            let image = self.image(run, index)?;
            let (findings, refused, warnings) = self.extract_one(run, Some(index), std::slice::from_ref(&image))?;
            let max_severity = findings
                .iter()
                .map(|f| f.severity)
                .max()
                .expect("at least one finding per screenshot");
            assessments.push(ScreenshotAssessment {
                screenshot_index: index,
                findings,
                max_severity,
                refused,
                warnings,
            });
        }
        Ok(assessments)
    }

    /// Step 1 over every screenshot of `app`, in screenshot order.
    pub fn extract_findings(&self, app: &App) -> Result<Vec<ScreenshotAssessment>, PipelineError> {
        self.extract_findings_traced(app).map(|(a, _)| a)
    }

    /// Like [`extract_findings`](Self::extract_findings), also returning the
    /// request trace.
    pub fn extract_findings_traced(
        &self,
        app: &App,
    ) -> Result<(Vec<ScreenshotAssessment>, Vec<TraceEntry>), PipelineError> {
        if app.screenshot_paths.is_empty() {
            return Err(PipelineError::MissingModality {
                app_id: app.id.clone(),
                strategy: FusionStrategy::SelectiveCot,
            });
        }
        let mut run = AppRun::new(app);
        let assessments = self.extract_screenshots(&mut run)?;
        Ok((assessments, run.trace))
    }

    fn screenshot_step(
        &self,
        run: &mut AppRun<'_>,
        memo: &mut Step1Memo,
    ) -> Result<Vec<ScreenshotAssessment>, PipelineError> {
        if let Some((assessments, trace)) = &memo.screenshots {
            run.trace.extend(trace.iter().cloned());
            for a in assessments {
                run.warnings.extend(a.warnings.iter().cloned());
            }
            return Ok(assessments.clone());
        }
        let start = run.trace.len();
        let assessments = self.extract_screenshots(run)?;
        for a in &assessments {
            run.warnings.extend(a.warnings.iter().cloned());
        }
        memo.screenshots = Some((assessments.clone(), run.trace[start..].to_vec()));
        Ok(assessments)
    }

    fn description_step(
        &self,
        run: &mut AppRun<'_>,
        memo: &mut Step1Memo,
    ) -> Result<Vec<ContentFinding>, PipelineError> {
        if let Some((findings, trace)) = &memo.description {
            run.trace.extend(trace.iter().cloned());
            return Ok(findings.clone());
        }
        let start = run.trace.len();
        let (findings, _, warnings) = self.extract_one(run, None, &[])?;
        run.warnings.extend(warnings);
        memo.description = Some((findings.clone(), run.trace[start..].to_vec()));
        Ok(findings)
    }

    /// Rate one app with one strategy.
    pub fn rate_app(&self, app: &App, strategy: FusionStrategy) -> Result<RatingDecision, PipelineError> {
        self.rate_app_memo(app, strategy, &mut Step1Memo::default())
    }

    pub(crate) fn rate_app_memo(
        &self,
        app: &App,
        strategy: FusionStrategy,
        memo: &mut Step1Memo,
    ) -> Result<RatingDecision, PipelineError> {
        let n = app.screenshot_paths.len();
        if strategy.needs_screenshots() && n == 0 {
            return Err(PipelineError::MissingModality {
                app_id: app.id.clone(),
                strategy,
            });
        }
        let k = self.config.k.max(1);
        let mut run = AppRun::new(app);

        let assessments = if strategy.uses_extraction() {
            self.screenshot_step(&mut run, memo)?
        } else {
            Vec::new()
        };
        let ranking = rank_screenshots(&assessments);
        let top_k: Vec<usize> = ranking.iter().copied().take(k.min(n)).collect();

        let description_findings = match strategy {
            FusionStrategy::TextCotImage | FusionStrategy::ImageSelectTextCot => {
                self.description_step(&mut run, memo)?
            }
            _ => Vec::new(),
        };

        let mut caption = None;
        let (selected, with_description): (Vec<usize>, bool) = match strategy {
            FusionStrategy::DescriptionOnly => (vec![], true),
            FusionStrategy::ScreenshotOnly => ((0..n).collect(), false),
            FusionStrategy::BasicFusion | FusionStrategy::TextCotImage => (vec![0], true),
            FusionStrategy::GlobalCot => ((0..n).collect(), true),
            FusionStrategy::SelectiveCot | FusionStrategy::ImageSelectTextCot => (top_k.clone(), true),
            FusionStrategy::ImageCaptionFusion => (vec![ranking[0]], true),
            FusionStrategy::RandomAblation => {
                let pick = self.pick_outside(app, &ranking, &top_k, &mut run.warnings);
                (vec![pick], true)
            }
        };

        if strategy == FusionStrategy::ImageCaptionFusion {
            let image = self.image(&mut run, selected[0])?;
            let step = format!("caption screenshot {}", selected[0]);
            let prompt = prompts::render_caption_prompt();
            match self.ask(&mut run, &step, &prompt, &[image], |raw| {
                Ok::<_, PromptError>(raw.trim().to_string())
            })? {
                Answer::Parsed(text, _) => caption = Some(text),
                Answer::Refused(text) => {
                    self.refused(&mut run, &step, text)?;
                    caption = Some("(caption unavailable)".to_string());
                }
                Answer::Unparseable(_) => unreachable!("captions always parse"),
            }
        }

        // the caption strategy rates on text only
        let attached: Vec<usize> = if strategy == FusionStrategy::ImageCaptionFusion {
            Vec::new()
        } else {
            selected.clone()
        };
        let mut images = Vec::with_capacity(attached.len());
        for &i in &attached {
            images.push(self.image(&mut run, i)?);
        }

        let findings_text = self.findings_text(strategy, &assessments, &attached, &description_findings);
        let prompt = RatingPrompt {
            description: with_description.then_some(app.description.as_str()),
            screenshot_count: images.len(),
            caption: caption.as_deref(),
            findings: findings_text.as_deref(),
        }
        .render();

        let rating = match self.ask(&mut run, "rating", &prompt, &images, parse_rating_response)? {
            Answer::Parsed(r, _) => r,
            Answer::Unparseable(raw) => {
                return Err(PipelineError::RatingUndetermined {
                    app_id: app.id.clone(),
                    last_response: raw,
                    trace: Box::new(run.trace),
                })
            }
            Answer::Refused(text) => {
                return Err(PipelineError::Model {
                    app_id: app.id.clone(),
                    step: "rating".into(),
                    source: ModelError::Refused(text),
                })
            }
        };

        Ok(RatingDecision {
            app_id: app.id.clone(),
            strategy,
            rating,
            ground_truth: app.ground_truth,
            selected_screenshots: selected,
            assessments,
            description_findings,
            k,
            trace: run.trace,
            warnings: run.warnings,
        })
    }

    /// Seeded uniform pick among screenshots outside the top-k; falls back to
    /// the lowest-ranked screenshot when the top-k covers everything.
    fn pick_outside(&self, app: &App, ranking: &[usize], top_k: &[usize], warnings: &mut Vec<String>) -> usize {
        let pool: Vec<usize> = (0..ranking.len()).filter(|i| !top_k.contains(i)).collect();
        if pool.is_empty() {
            let msg = format!(
                "all {} screenshot(s) are in the top-{}; using the lowest-ranked one",
                ranking.len(),
                top_k.len()
            );
            log::warn!("app {:?}: {msg}", app.id);
            warnings.push(msg);
            return *ranking.last().expect("non-empty ranking");
        }
        let mut rng = ChaCha8Rng::seed_from_u64(app_seed(self.config.seed, &app.id));
        pool[rng.gen_range(0..pool.len())]
    }

    fn findings_text(
        &self,
        strategy: FusionStrategy,
        assessments: &[ScreenshotAssessment],
        attached: &[usize],
        description_findings: &[ContentFinding],
    ) -> Option<String> {
        let mut lines = Vec::new();
        if self.config.append_findings {
            for &i in attached {
                if let Some(a) = assessments.iter().find(|a| a.screenshot_index == i) {
                    for f in &a.findings {
                        lines.push(format!("- screenshot {}: {}", i, describe(f)));
                    }
                }
            }
        }
        if matches!(
            strategy,
            FusionStrategy::TextCotImage | FusionStrategy::ImageSelectTextCot
        ) {
            for f in description_findings {
                lines.push(format!("- description: {}", describe(f)));
            }
        }
        (!lines.is_empty()).then(|| lines.join("\n"))
    }

    /// One decision per (app, strategy); see [`ExperimentOutcome`].
    pub fn run_experiment(&self, apps: &[App], strategies: &[FusionStrategy]) -> ExperimentOutcome {
        experiment::run(self, apps, strategies)
    }
}

fn describe(f: &ContentFinding) -> String {
    match f.intensity {
        IntensityLevel::NotApplicable => f.category.label().to_string(),
        level => format!("{} ({})", f.category.label(), level),
    }
}

/// Per-app RNG seed, independent of processing order.
fn app_seed(seed: u64, app_id: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(app_id.as_bytes());
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
}

#[cfg(test)]
mod tests;
