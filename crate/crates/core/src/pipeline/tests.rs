use std::path::PathBuf;

use proptest::prelude::*;

use super::*;
use crate::model::{file_digest, MockAnswer, MockBackend, MockDefaults, MockFixture, RetryPolicy};

struct Shot<'a> {
    content: &'a str,
    intensity: Option<&'a str>,
    rating: Option<&'a str>,
}

fn shot<'a>(content: &'a str, intensity: Option<&'a str>, rating: Option<&'a str>) -> Shot<'a> {
    Shot {
        content,
        intensity,
        rating,
    }
}

struct Fixture {
    _dir: tempfile::TempDir,
    app: App,
    client: ModelClient,
}

fn fixture(shots: &[Shot<'_>]) -> Fixture {
    let dir = tempfile::tempdir().unwrap();
    let mut paths = Vec::new();
    let mut answers = Vec::new();
    for (i, s) in shots.iter().enumerate() {
        let path = dir.path().join(format!("s{i}.png"));
        image::RgbImage::from_pixel(4, 8, image::Rgb([i as u8 * 40, 7, 200]))
            .save(&path)
            .unwrap();
        let digest = file_digest(&std::fs::read(&path).unwrap());
        answers.push(MockAnswer {
            digest: digest.clone(),
            kind: PromptKind::Content,
            text: s.content.into(),
        });
        if let Some(t) = s.intensity {
            answers.push(MockAnswer {
                digest: digest.clone(),
                kind: PromptKind::Intensity,
                text: t.into(),
            });
        }
        if let Some(t) = s.rating {
            answers.push(MockAnswer {
                digest: digest.clone(),
                kind: PromptKind::Rating,
                text: t.into(),
            });
        }
        paths.push(path);
    }
    let mock = MockBackend::new(MockFixture {
        defaults: MockDefaults {
            content: Some("0".into()),
            intensity: Some("mild".into()),
            rating: Some("4+".into()),
            caption: Some("A game screen.".into()),
        },
        answers,
    })
    .unwrap();
    Fixture {
        app: app_with(paths),
        client: ModelClient::new(mock).with_retry(RetryPolicy::no_delay(1)),
        _dir: dir,
    }
}

fn app_with(paths: Vec<PathBuf>) -> App {
    App {
        id: "demo".into(),
        name: "Demo".into(),
        genre: "Games".into(),
        description: "A shooting game.".into(),
        screenshot_paths: paths,
        ground_truth: Some(RatingLevel::SeventeenPlus),
    }
}

fn sev(rank: u8, row: u8) -> SeverityScore {
    SeverityScore { rating_rank: rank, row }
}

fn assessment(index: usize, severity: SeverityScore) -> ScreenshotAssessment {
    ScreenshotAssessment {
        screenshot_index: index,
        findings: Vec::new(),
        max_severity: severity,
        refused: false,
        warnings: Vec::new(),
    }
}

#[test]
fn step1_maps_findings_to_severity() {
    let f = fixture(&[shot("0", None, None), shot("5", Some("intense"), None)]);
    let table = PolicyTable::builtin();
    let pipeline = Pipeline::new(&f.client, &table, PipelineConfig::default());
    let a = pipeline.extract_findings(&f.app).unwrap();
    assert_eq!(a[0].max_severity, sev(0, 1));
    assert_eq!(a[1].max_severity, sev(3, 11));
    assert_eq!(a[1].findings[0].category, ContentCategory::SexualContentOrNudity);
    assert_eq!(a[1].findings[0].intensity, IntensityLevel::Intense);
    // one content request each, one intensity request for screenshot 1
    assert_eq!(f.client.backend_calls(), 3);
}

#[test]
fn insensitive_category_skips_intensity() {
    let f = fixture(&[shot("10", Some("mild"), None)]);
    let table = PolicyTable::builtin();
    let pipeline = Pipeline::new(&f.client, &table, PipelineConfig::default());
    let a = pipeline.extract_findings(&f.app).unwrap();
    assert_eq!(a[0].max_severity, sev(3, 20));
    assert_eq!(a[0].findings[0].intensity, IntensityLevel::NotApplicable);
    assert_eq!(f.client.backend_calls(), 1);
}

#[test]
fn ranking_examples() {
    let a = [
        assessment(0, sev(0, 1)),
        assessment(1, sev(3, 11)),
        assessment(2, sev(2, 5)),
    ];
    assert_eq!(rank_screenshots(&a), vec![1, 2, 0]);
    let ties = [
        assessment(0, sev(1, 2)),
        assessment(1, sev(1, 2)),
        assessment(2, sev(1, 2)),
    ];
    assert_eq!(rank_screenshots(&ties), vec![0, 1, 2]);
    assert_eq!(rank_screenshots(&[assessment(0, sev(0, 1))]), vec![0]);
}

proptest! {
    #[test]
    fn ranking_is_a_sorted_permutation(scores in prop::collection::vec((0u8..4, 1u8..22), 1..12)) {
        let a: Vec<_> = scores.iter().enumerate().map(|(i, &(r, w))| assessment(i, sev(r, w))).collect();
        let order = rank_screenshots(&a);
        let mut seen = order.clone();
        seen.sort_unstable();
        prop_assert_eq!(seen, (0..a.len()).collect::<Vec<_>>());
        for pair in order.windows(2) {
            let (x, y) = (a[pair[0]].max_severity, a[pair[1]].max_severity);
            prop_assert!(x > y || (x == y && pair[0] < pair[1]));
        }
    }
}

#[test]
fn selective_cot_sends_most_severe_screenshot() {
    let f = fixture(&[
        shot("0", None, Some("4+")),
        shot("5", Some("intense"), Some("17+")),
        shot("1", Some("mild"), Some("9+")),
    ]);
    let table = PolicyTable::builtin();
    let pipeline = Pipeline::new(&f.client, &table, PipelineConfig::default());
    let d = pipeline.rate_app(&f.app, FusionStrategy::SelectiveCot).unwrap();
    assert_eq!(d.rating, RatingLevel::SeventeenPlus);
    assert_eq!(d.selected_screenshots, vec![1]);
    let rating: Vec<_> = d.rating_requests().collect();
    assert_eq!(rating.len(), 1);
    assert_eq!(rating[0].image_digests.len(), 1);
    assert!(rating[0].prompt.contains("A shooting game."));
    // n content + c intensity + 1 rating
    assert_eq!(f.client.backend_calls(), 3 + 2 + 1);
}

#[test]
fn selective_with_k_n_matches_global_image_set() {
    let f = fixture(&[
        shot("3", Some("mild"), None),
        shot("5", Some("intense"), None),
        shot("0", None, None),
    ]);
    let table = PolicyTable::builtin();
    let config = PipelineConfig {
        k: 3,
        ..PipelineConfig::default()
    };
    let pipeline = Pipeline::new(&f.client, &table, config);
    let sel = pipeline.rate_app(&f.app, FusionStrategy::SelectiveCot).unwrap();
    let glob = pipeline.rate_app(&f.app, FusionStrategy::GlobalCot).unwrap();
    let mut a = sel.selected_screenshots.clone();
    a.sort_unstable();
    assert_eq!(a, glob.selected_screenshots);
    assert_eq!(sel.selected_screenshots, vec![1, 0, 2]);
}

#[test]
fn description_only_needs_no_screenshots() {
    let f = fixture(&[]);
    let table = PolicyTable::builtin();
    let pipeline = Pipeline::new(&f.client, &table, PipelineConfig::default());
    let d = pipeline.rate_app(&f.app, FusionStrategy::DescriptionOnly).unwrap();
    assert_eq!(d.rating, RatingLevel::FourPlus);
    assert!(d.selected_screenshots.is_empty());
    assert_eq!(f.client.backend_calls(), 1);
    let err = pipeline.rate_app(&f.app, FusionStrategy::ScreenshotOnly).unwrap_err();
    assert!(matches!(err, PipelineError::MissingModality { .. }), "{err}");
}

#[test]
fn random_ablation_is_seeded_and_avoids_top_k() {
    let shots: Vec<_> = (0..6)
        .map(|i| {
            if i == 2 {
                shot("6", Some("intense"), None)
            } else {
                shot("0", None, None)
            }
        })
        .collect();
    let f = fixture(&shots);
    let table = PolicyTable::builtin();
    let pipeline = Pipeline::new(
        &f.client,
        &table,
        PipelineConfig {
            seed: 11,
            ..PipelineConfig::default()
        },
    );
    let first = pipeline.rate_app(&f.app, FusionStrategy::RandomAblation).unwrap();
    let again = pipeline.rate_app(&f.app, FusionStrategy::RandomAblation).unwrap();
    assert_eq!(first.selected_screenshots, again.selected_screenshots);
    assert_ne!(first.selected_screenshots, vec![2]);
    let picks: std::collections::BTreeSet<usize> = (0..40)
        .map(|seed| {
            let p = Pipeline::new(
                &f.client,
                &table,
                PipelineConfig {
                    seed,
                    ..PipelineConfig::default()
                },
            );
            p.rate_app(&f.app, FusionStrategy::RandomAblation)
                .unwrap()
                .selected_screenshots[0]
        })
        .collect();
    assert!(!picks.contains(&2));
    assert!(picks.len() > 1);
}

#[test]
fn random_ablation_single_screenshot_falls_back() {
    let f = fixture(&[shot("0", None, None)]);
    let table = PolicyTable::builtin();
    let pipeline = Pipeline::new(&f.client, &table, PipelineConfig::default());
    let d = pipeline.rate_app(&f.app, FusionStrategy::RandomAblation).unwrap();
    assert_eq!(d.selected_screenshots, vec![0]);
    assert_eq!(d.warnings.len(), 1);
}

#[test]
fn caption_fusion_rates_on_text() {
    let f = fixture(&[shot("0", None, None), shot("1", Some("intense"), None)]);
    let table = PolicyTable::builtin();
    let pipeline = Pipeline::new(&f.client, &table, PipelineConfig::default());
    let d = pipeline.rate_app(&f.app, FusionStrategy::ImageCaptionFusion).unwrap();
    assert_eq!(d.selected_screenshots, vec![1]);
    let rating: Vec<_> = d.rating_requests().collect();
    assert!(rating[0].image_digests.is_empty());
    assert!(rating[0].prompt.contains("A game screen."));
}

#[test]
fn refusal_falls_back_to_none_or_fails() {
    let f = fixture(&[
        shot("I'm sorry, but I can't help with that.", None, Some("12+")),
        shot("2", Some("mild"), Some("12+")),
    ]);
    let table = PolicyTable::builtin();
    let pipeline = Pipeline::new(&f.client, &table, PipelineConfig::default());
    let a = pipeline.extract_findings(&f.app).unwrap();
    assert!(a[0].refused);
    assert_eq!(a[0].max_severity, sev(0, 1));
    assert_eq!(a[0].warnings.len(), 1);

    let strict = Pipeline::new(
        &f.client,
        &table,
        PipelineConfig {
            refusal_fallback: RefusalFallback::Fail,
            ..PipelineConfig::default()
        },
    );
    let err = strict.extract_findings(&f.app).unwrap_err();
    assert!(
        matches!(
            err,
            PipelineError::Model {
                source: ModelError::Refused(_),
                ..
            }
        ),
        "{err}"
    );
}

#[test]
fn unparseable_rating_is_retried_then_reported() {
    let f = fixture(&[shot("0", None, Some("It depends on the audience."))]);
    let table = PolicyTable::builtin();
    let pipeline = Pipeline::new(&f.client, &table, PipelineConfig::default());
    let err = pipeline.rate_app(&f.app, FusionStrategy::BasicFusion).unwrap_err();
    match err {
        PipelineError::RatingUndetermined {
            last_response, trace, ..
        } => {
            assert_eq!(last_response, "It depends on the audience.");
            let ratings = trace.iter().filter(|t| t.kind == PromptKind::Rating).count();
            assert_eq!(ratings, 2);
        }
        other => panic!("unexpected {other}"),
    }
}

#[test]
fn unparseable_intensity_assumes_mild() {
    let f = fixture(&[shot("1", Some("hard to say"), None)]);
    let table = PolicyTable::builtin();
    let pipeline = Pipeline::new(&f.client, &table, PipelineConfig::default());
    let a = pipeline.extract_findings(&f.app).unwrap();
    assert_eq!(a[0].findings[0].intensity, IntensityLevel::Mild);
    assert_eq!(a[0].warnings.len(), 1);
}

#[test]
fn experiment_records_failures_and_continues() {
    let f = fixture(&[shot("5", Some("intense"), Some("17+")), shot("0", None, None)]);
    let table = PolicyTable::builtin();
    let pipeline = Pipeline::new(&f.client, &table, PipelineConfig::default());
    let mut bare = app_with(Vec::new());
    bare.id = "bare".into();
    let apps = vec![bare, f.app.clone()];
    let strategies = [
        FusionStrategy::DescriptionOnly,
        FusionStrategy::SelectiveCot,
        FusionStrategy::GlobalCot,
    ];
    let out = pipeline.run_experiment(&apps, &strategies);
    assert_eq!(out.failures.len(), 2);
    assert!(out.failures.iter().all(|x| x.app_id == "bare"));
    assert_eq!(out.decisions.len(), 4);
    assert_eq!(out.decisions[0].app_id, "bare");
    let sel = out.decisions_for(FusionStrategy::SelectiveCot).next().unwrap();
    assert_eq!(sel.rating, RatingLevel::SeventeenPlus);
    // two description-only ratings, one shared Step 1 (2 content + 1 intensity), two fused ratings
    let calls = 2 + 3 + 2;
    assert_eq!(f.client.backend_calls(), calls);
}

#[test]
fn app_seed_depends_on_app_not_order() {
    assert_eq!(app_seed(3, "a"), app_seed(3, "a"));
    assert_ne!(app_seed(3, "a"), app_seed(3, "b"));
    assert_ne!(app_seed(3, "a"), app_seed(4, "a"));
}
