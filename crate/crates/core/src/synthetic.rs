//! Synthetic dataset and scripted mock fixture for offline runs.
//!
//! Every app gets a target rating (classes cycle 4+, 9+, 12+, 17+) and 2 to 7
//! placeholder screenshots with distinct pixels. Each screenshot is scripted
//! with content ids and one intensity answer whose policy ratings never
//! exceed the target, and one screenshot is forced to reach it. Rating
//! requests answer with the policy rating of the first attached screenshot,
//! so fusing the most severe screenshot reproduces the policy outcome.

use std::path::{Path, PathBuf};

use image::{Rgb, RgbImage};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dataset::{Manifest, ManifestRecord};
use crate::model::{file_digest, MockAnswer, MockDefaults, MockFixture};
use crate::policy::{combine_ratings, ContentCategory, IntensityLevel, PolicyTable, RatingLevel};
use crate::prompts::PromptKind;

#[derive(Debug, thiserror::Error)]
pub enum SyntheticError {
    #[error("I/O error at {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("image encoding failed for {path}: {source}")]
    Image { path: PathBuf, source: image::ImageError },
}

#[derive(Debug, Clone, Copy)]
pub struct SyntheticOptions {
    pub apps: usize,
    pub seed: u64,
    /// Apps whose ground truth is shifted one class away from the policy outcome.
    pub label_noise_every: Option<usize>,
}

impl Default for SyntheticOptions {
    fn default() -> Self {
        Self {
            apps: 40,
            seed: 7,
            label_noise_every: Some(10),
        }
    }
}

/// What was scripted for one screenshot.
#[derive(Debug, Clone)]
pub struct ScriptedShot {
    pub path: PathBuf,
    pub digest: String,
    pub categories: Vec<ContentCategory>,
    pub intensity: IntensityLevel,
    pub rating: RatingLevel,
}

#[derive(Debug, Clone)]
pub struct ScriptedApp {
    pub id: String,
    pub policy_rating: RatingLevel,
    pub ground_truth: RatingLevel,
    pub shots: Vec<ScriptedShot>,
}

#[derive(Debug, Clone)]
pub struct SyntheticDataset {
    pub manifest_path: PathBuf,
    pub fixture_path: PathBuf,
    pub apps: Vec<ScriptedApp>,
}

const NAMES: [&str; 40] = [
    "Shark",
    "Puzzle Garden",
    "Pixel Knights",
    "Night Ward",
    "Daily Sudoku",
    "Storybook Zoo",
    "Ghost Manor",
    "Street Racer",
    "Color Splash",
    "Dragon Quest Mini",
    "Poker Night",
    "Web Browser Pro",
    "Math Buddy",
    "Monster Hunt",
    "Bar Tycoon",
    "Lucky Slots",
    "Alphabet Fun",
    "Zombie Siege",
    "Clinic Sim",
    "Dating Chat",
    "Farm Friends",
    "Laser Tag",
    "Comedy Club",
    "Battle Royale X",
    "Bubble Pop",
    "Haunted Trails",
    "Trivia Cash",
    "Street Fighter Z",
    "Kids Piano",
    "Ninja Dash",
    "Med Tracker",
    "Casino Royale",
    "Sticker Book",
    "Space Blaster",
    "Rap Battles",
    "Tactical Ops",
    "Yoga Time",
    "Spooky Tales",
    "Wine Cellar",
    "Sniper Elite",
];

const GENRES: [&str; 7] = [
    "Games",
    "Entertainment",
    "Education",
    "Social Networking",
    "Lifestyle",
    "Medical",
    "Casino",
];

fn slug(name: &str) -> String {
    name.to_ascii_lowercase()
        .split(|c: char| !c.is_ascii_alphanumeric())
        .filter(|s| !s.is_empty())
        .collect::<Vec<_>>()
        .join("-")
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> SyntheticError + '_ {
    move |source| SyntheticError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Pick categories for one screenshot under `intensity`, each rated at most
/// `target`. With `must_reach`, at least one category is rated exactly `target`.
fn script_shot(
    table: &PolicyTable,
    rng: &mut ChaCha8Rng,
    target: RatingLevel,
    must_reach: bool,
) -> (Vec<ContentCategory>, IntensityLevel) {
    let rating = |c: ContentCategory, i: IntensityLevel| -> RatingLevel {
        let i = if c.intensity_sensitive() {
            i
        } else {
            IntensityLevel::NotApplicable
        };
        table.lookup_rating(c, i).expect("legal pair")
    };
    let mut intensities = [IntensityLevel::Mild, IntensityLevel::Intense];
    intensities.shuffle(rng);
    for intensity in intensities {
        let eligible: Vec<ContentCategory> = ContentCategory::ALL[1..]
            .iter()
            .copied()
            .filter(|&c| rating(c, intensity) <= target)
            .collect();
        let reaching: Vec<ContentCategory> = eligible
            .iter()
            .copied()
            .filter(|&c| rating(c, intensity) == target)
            .collect();
        if must_reach {
            let Some(&anchor) = reaching.choose(rng) else { continue };
            let mut cats = vec![anchor];
            if rng.gen_bool(0.35) {
                if let Some(&extra) = eligible.choose(rng) {
                    if !cats.contains(&extra) {
                        cats.push(extra);
                    }
                }
            }
            return (cats, intensity);
        }
        if eligible.is_empty() || rng.gen_bool(0.45) {
            continue;
        }
        let count = if rng.gen_bool(0.3) { 2 } else { 1 };
        let cats: Vec<ContentCategory> = eligible.choose_multiple(rng, count).copied().collect();
        return (cats, intensity);
    }
    (vec![ContentCategory::None], IntensityLevel::Mild)
}

fn content_text(rng: &mut ChaCha8Rng, cats: &[ContentCategory]) -> String {
    let ids: Vec<String> = cats.iter().map(|c| c.id().to_string()).collect();
    match rng.gen_range(0..3) {
        0 => ids.join(", "),
        1 => ids.join(","),
        _ => format!("IDs: {}", ids.join(", ")),
    }
}

fn intensity_text(rng: &mut ChaCha8Rng, level: IntensityLevel) -> String {
    let word = level.as_str();
    match rng.gen_range(0..3) {
        0 => word.to_string(),
        1 => format!("{}{}.", word[..1].to_ascii_uppercase(), &word[1..]),
        _ => format!("The content is {word}."),
    }
}

fn rating_text(rng: &mut ChaCha8Rng, rating: RatingLevel) -> String {
    match rng.gen_range(0..3) {
        0 => rating.label().to_string(),
        1 => format!("Rating: {}", rating.label()),
        _ => format!("{} is the appropriate rating.", rating.label()),
    }
}

fn draw_screenshot(app_index: usize, shot: usize) -> RgbImage {
    // the base colour alone keeps every (app, shot) pair distinct
    let base = [
        (app_index * 37 % 256) as u8,
        (shot * 71 % 256) as u8,
        ((app_index * 13 + shot * 29) % 256) as u8,
    ];
    RgbImage::from_fn(24, 48, |_, y| {
        if ((y / 6) as usize).is_multiple_of(shot + 2) {
            Rgb([255 - base[0], 255 - base[1], 255 - base[2]])
        } else {
            Rgb(base)
        }
    })
}

fn shift(r: RatingLevel, rng: &mut ChaCha8Rng) -> RatingLevel {
    let rank = r.rank() as i32;
    let up = rank == 0 || (rank < 3 && rng.gen_bool(0.5));
    RatingLevel::from_rank((rank + if up { 1 } else { -1 }) as u8).expect("in range")
}

/// Write `apps.json`, `mock.json` and `screenshots/*.png` under `dir`.
pub fn generate(dir: &Path, options: SyntheticOptions) -> Result<SyntheticDataset, SyntheticError> {
    let table = PolicyTable::builtin();
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let shots_dir = dir.join("screenshots");
    std::fs::create_dir_all(&shots_dir).map_err(io_err(&shots_dir))?;

    let mut records = Vec::new();
    let mut answers = Vec::new();
    let mut scripted = Vec::new();

    for i in 0..options.apps {
        let name = if i < NAMES.len() {
            NAMES[i].to_string()
        } else {
            format!("App {i}")
        };
        let id = slug(&name);
        // Shark leads the 17+ class
        let target = RatingLevel::from_rank(((i + 3) % 4) as u8).expect("rank");
        let n = rng.gen_range(2..=7usize);
        let hero = rng.gen_range(0..n);
        let mut shots = Vec::with_capacity(n);
        let mut rel_paths = Vec::with_capacity(n);
        for s in 0..n {
            let (categories, intensity) = if target == RatingLevel::FourPlus {
                (vec![ContentCategory::None], IntensityLevel::Mild)
            } else {
                script_shot(&table, &mut rng, target, s == hero)
            };
            let rating = combine_ratings(categories.iter().map(|&c| {
                let i = if c.intensity_sensitive() {
                    intensity
                } else {
                    IntensityLevel::NotApplicable
                };
                table.lookup_rating(c, i).expect("legal pair")
            }));
            let rel = format!("screenshots/{id}_{s}.png");
            let path = dir.join(&rel);
            draw_screenshot(i, s)
                .save_with_format(&path, image::ImageFormat::Png)
                .map_err(|source| SyntheticError::Image {
                    path: path.clone(),
                    source,
                })?;
            let digest = file_digest(&std::fs::read(&path).map_err(io_err(&path))?);

            answers.push(MockAnswer {
                digest: digest.clone(),
                kind: PromptKind::Content,
                text: content_text(&mut rng, &categories),
            });
            if categories.iter().any(|c| c.intensity_sensitive()) {
                answers.push(MockAnswer {
                    digest: digest.clone(),
                    kind: PromptKind::Intensity,
                    text: intensity_text(&mut rng, intensity),
                });
            }
            answers.push(MockAnswer {
                digest: digest.clone(),
                kind: PromptKind::Rating,
                text: rating_text(&mut rng, rating),
            });
            answers.push(MockAnswer {
                digest: digest.clone(),
                kind: PromptKind::Caption,
                text: format!("Screen {} of the {name} app showing its main interface.", s + 1),
            });
            rel_paths.push(rel);
            shots.push(ScriptedShot {
                path,
                digest,
                categories,
                intensity,
                rating,
            });
        }
        let policy_rating = combine_ratings(shots.iter().map(|s| s.rating));
        debug_assert_eq!(policy_rating, target);
        let ground_truth = match options.label_noise_every {
            Some(every) if every > 0 && i % every == every - 1 => shift(policy_rating, &mut rng),
            _ => policy_rating,
        };
        let genre = GENRES[i % GENRES.len()];
        records.push(ManifestRecord {
            id: id.clone(),
            name: name.clone(),
            genre: genre.to_string(),
            description: format!(
                "{name} is a {} app. Explore, play and share with friends. \
                 Regular updates bring new levels and features.",
                genre.to_ascii_lowercase()
            ),
            screenshots: rel_paths,
            ground_truth_rating: Some(ground_truth.label().to_string()),
        });
        scripted.push(ScriptedApp {
            id,
            policy_rating,
            ground_truth,
            shots,
        });
    }

    let manifest_path = dir.join("apps.json");
    std::fs::write(&manifest_path, Manifest { apps: records }.to_json()).map_err(io_err(&manifest_path))?;
    let fixture = MockFixture {
        defaults: MockDefaults {
            content: Some("0".into()),
            intensity: Some("mild".into()),
            rating: Some("4+".into()),
            caption: Some("A mobile app screen.".into()),
        },
        answers,
    };
    let fixture_path = dir.join("mock.json");
    std::fs::write(&fixture_path, fixture.to_json()).map_err(io_err(&fixture_path))?;

    Ok(SyntheticDataset {
        manifest_path,
        fixture_path,
        apps: scripted,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{load_dataset, stats};

    #[test]
    fn generates_balanced_valid_dataset() {
        let dir = tempfile::tempdir().unwrap();
        let set = generate(dir.path(), SyntheticOptions::default()).unwrap();
        let apps = load_dataset(&set.manifest_path).unwrap();
        assert_eq!(apps.len(), 40);
        assert_eq!(apps[0].id, "shark");
        assert_eq!(set.apps[0].policy_rating, RatingLevel::SeventeenPlus);
        let s = stats(&apps);
        assert!(s.screenshots_min >= 2 && s.screenshots_max <= 7);
        let policy: Vec<usize> = RatingLevel::ALL
            .iter()
            .map(|r| set.apps.iter().filter(|a| a.policy_rating == *r).count())
            .collect();
        assert_eq!(policy, vec![10, 10, 10, 10]);
        let noisy = set.apps.iter().filter(|a| a.ground_truth != a.policy_rating).count();
        assert_eq!(noisy, 4);
        let digests: std::collections::HashSet<_> = set
            .apps
            .iter()
            .flat_map(|a| a.shots.iter().map(|s| s.digest.clone()))
            .collect();
        assert_eq!(digests.len(), set.apps.iter().map(|a| a.shots.len()).sum::<usize>());
    }

    #[test]
    fn deterministic_for_a_seed() {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let sa = generate(a.path(), SyntheticOptions::default()).unwrap();
        let sb = generate(b.path(), SyntheticOptions::default()).unwrap();
        assert_eq!(
            std::fs::read(&sa.fixture_path).unwrap(),
            std::fs::read(&sb.fixture_path).unwrap()
        );
        assert_eq!(
            std::fs::read(&sa.manifest_path).unwrap(),
            std::fs::read(&sb.manifest_path).unwrap()
        );
    }
}
