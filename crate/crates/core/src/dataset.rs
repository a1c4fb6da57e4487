//! App manifests: loading, validation, statistics and stratified sampling.
//!
//! Manifest schema:
//!
//! ```json
//! {"apps": [{"id": "shark", "name": "...", "genre": "...", "description": "...",
//!            "screenshots": ["shots/shark_0.png"], "ground_truth_rating": "17+"}]}
//! ```
//!
//! Screenshot paths are resolved against the manifest's directory.

use std::collections::{BTreeMap, HashSet};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::policy::RatingLevel;

/// Screenshot counts observed in the reference App Store crawl.
pub const TYPICAL_SCREENSHOTS: std::ops::RangeInclusive<usize> = 2..=7;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("cannot read manifest {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("manifest parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("duplicate app id {0:?}")]
    DuplicateId(String),
    #[error("app {app_id:?}: unknown rating {value:?} (expected 4+, 9+, 12+ or 17+)")]
    UnknownRating { app_id: String, value: String },
    #[error("app at index {index}: empty id")]
    EmptyId { index: usize },
    #[error("app {app_id:?}: screenshot {path} does not exist")]
    MissingScreenshot { app_id: String, path: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct App {
    pub id: String,
    pub name: String,
    pub genre: String,
    pub description: String,
    /// Resolved screenshot paths, in listing order.
    pub screenshot_paths: Vec<PathBuf>,
    pub ground_truth: Option<RatingLevel>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestRecord {
    pub id: String,
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub genre: String,
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub screenshots: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ground_truth_rating: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub apps: Vec<ManifestRecord>,
}

impl Manifest {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serializes");
        s.push('\n');
        s
    }
}

impl App {
    /// Manifest record with screenshot paths made relative to `base` again.
    pub fn to_record(&self, base: &Path) -> ManifestRecord {
        ManifestRecord {
            id: self.id.clone(),
            name: self.name.clone(),
            genre: self.genre.clone(),
            description: self.description.clone(),
            screenshots: self
                .screenshot_paths
                .iter()
                .map(|p| p.strip_prefix(base).unwrap_or(p).to_string_lossy().replace('\\', "/"))
                .collect(),
            ground_truth_rating: self.ground_truth.map(|r| r.label().to_string()),
        }
    }
}

/// Everything wrong with a manifest, collected rather than failing fast.
#[derive(Debug, Default)]
pub struct ValidationReport {
    pub apps: Vec<App>,
    pub errors: Vec<DatasetError>,
    pub warnings: Vec<String>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.errors.is_empty()
    }
}

fn read_manifest(path: &Path) -> Result<(Manifest, PathBuf), DatasetError> {
    let text = std::fs::read_to_string(path).map_err(|source| DatasetError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let manifest: Manifest = serde_json::from_str(&text).map_err(|e| DatasetError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let base = path
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("."));
    Ok((manifest, base))
}

/// Convert parsed records to apps, collecting every violation. Records with
/// an error are left out of `apps`.
pub fn validate_records(records: &[ManifestRecord], base: &Path) -> ValidationReport {
    check_records(records, base, false)
}

fn check_records(records: &[ManifestRecord], base: &Path, check_files: bool) -> ValidationReport {
    let mut report = ValidationReport::default();
    let mut seen = HashSet::new();
    for (index, rec) in records.iter().enumerate() {
        let errors_before = report.errors.len();
        if rec.id.trim().is_empty() {
            report.errors.push(DatasetError::EmptyId { index });
        } else if !seen.insert(rec.id.clone()) {
            report.errors.push(DatasetError::DuplicateId(rec.id.clone()));
        }
        let ground_truth = rec.ground_truth_rating.as_ref().and_then(|value| {
            let parsed = RatingLevel::from_label(value);
            if parsed.is_none() {
                report.errors.push(DatasetError::UnknownRating {
                    app_id: rec.id.clone(),
                    value: value.clone(),
                });
            }
            parsed
        });
        let n = rec.screenshots.len();
        if !TYPICAL_SCREENSHOTS.contains(&n) {
            report.warnings.push(format!(
                "app {:?} has {n} screenshot(s), outside the typical {}-{} range",
                rec.id,
                TYPICAL_SCREENSHOTS.start(),
                TYPICAL_SCREENSHOTS.end()
            ));
        }
        let screenshot_paths: Vec<PathBuf> = rec.screenshots.iter().map(|s| base.join(s)).collect();
        if check_files {
            for shot in screenshot_paths.iter().filter(|p| !p.is_file()) {
                report.errors.push(DatasetError::MissingScreenshot {
                    app_id: rec.id.clone(),
                    path: shot.display().to_string(),
                });
            }
        }
        if report.errors.len() == errors_before {
            report.apps.push(App {
                id: rec.id.clone(),
                name: rec.name.clone(),
                genre: rec.genre.clone(),
                description: rec.description.clone(),
                screenshot_paths,
                ground_truth,
            });
        }
    }
    report
}

/// Validate a manifest file, also checking that screenshot files exist.
pub fn validate_manifest(path: &Path) -> Result<ValidationReport, DatasetError> {
    let (manifest, base) = read_manifest(path)?;
    Ok(check_records(&manifest.apps, &base, true))
}

/// Load a manifest; the first violation is returned as the error.
pub fn load_dataset(path: &Path) -> Result<Vec<App>, DatasetError> {
    let (manifest, base) = read_manifest(path)?;
    let mut report = validate_records(&manifest.apps, &base);
    if !report.errors.is_empty() {
        return Err(report.errors.swap_remove(0));
    }
    Ok(report.apps)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DatasetStats {
    pub total: usize,
    pub per_rating: BTreeMap<RatingLevel, usize>,
    pub unlabeled: usize,
    pub screenshots_min: usize,
    pub screenshots_max: usize,
    pub screenshots_mean: f64,
}

impl DatasetStats {
    pub fn labeled(&self) -> usize {
        self.per_rating.values().sum()
    }
}

impl std::fmt::Display for DatasetStats {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "apps: {}", self.total)?;
        for r in RatingLevel::ALL {
            writeln!(
                f,
                "  {:>4}: {}",
                r.label(),
                self.per_rating.get(&r).copied().unwrap_or(0)
            )?;
        }
        if self.unlabeled > 0 {
            writeln!(f, "  unlabeled: {}", self.unlabeled)?;
        }
        write!(
            f,
            "screenshots per app: min {} / max {} / mean {:.2}",
            self.screenshots_min, self.screenshots_max, self.screenshots_mean
        )
    }
}

pub fn stats(apps: &[App]) -> DatasetStats {
    let mut per_rating = BTreeMap::new();
    let mut unlabeled = 0;
    for app in apps {
        match app.ground_truth {
            Some(r) => *per_rating.entry(r).or_insert(0) += 1,
            None => unlabeled += 1,
        }
    }
    let counts: Vec<usize> = apps.iter().map(|a| a.screenshot_paths.len()).collect();
    let mean = if counts.is_empty() {
        0.0
    } else {
        counts.iter().sum::<usize>() as f64 / counts.len() as f64
    };
    DatasetStats {
        total: apps.len(),
        per_rating,
        unlabeled,
        screenshots_min: counts.iter().copied().min().unwrap_or(0),
        screenshots_max: counts.iter().copied().max().unwrap_or(0),
        screenshots_mean: mean,
    }
}

/// Up to `per_class` labeled apps from each rating class, chosen with a
/// seeded shuffle. The result keeps the input order.
pub fn sample_stratified(apps: &[App], per_class: usize, seed: u64) -> Vec<App> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chosen = Vec::new();
    for rating in RatingLevel::ALL {
        let mut members: Vec<usize> = apps
            .iter()
            .enumerate()
            .filter(|(_, a)| a.ground_truth == Some(rating))
            .map(|(i, _)| i)
            .collect();
        if members.len() < per_class {
            log::warn!(
                "class {rating} has only {} labeled app(s), fewer than the requested {per_class}; taking all",
                members.len()
            );
        }
        members.shuffle(&mut rng);
        members.truncate(per_class);
        chosen.extend(members);
    }
    chosen.sort_unstable();
    chosen.into_iter().map(|i| apps[i].clone()).collect()
}
