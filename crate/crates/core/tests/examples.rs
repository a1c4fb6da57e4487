//! Every example runs, and the checked-in generated files are current.

macro_rules! example {
    ($module:ident, $file:literal) => {
        #[allow(dead_code)]
        mod $module {
            include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/", $file));
        }
    };
}

example!(policy_lookup, "policy_lookup.rs");
example!(render_prompts, "render_prompts.rs");
example!(rate_with_mock, "rate_with_mock.rs");
example!(extract_findings, "extract_findings.rs");
example!(run_experiment, "run_experiment.rs");
example!(ablation, "ablation.rs");
example!(evaluate_metrics, "evaluate_metrics.rs");
example!(cache_replay, "cache_replay.rs");
example!(validate_dataset, "validate_dataset.rs");
example!(inspect_http_request, "inspect_http_request.rs");
example!(generate_fixture, "generate_fixture.rs");

use std::path::Path;

use maturity_rater::pipeline::FusionStrategy;
use maturity_rater::policy::RatingLevel;

#[test]
fn policy_lookup_runs() {
    assert_eq!(policy_lookup::run_example().unwrap(), RatingLevel::TwelvePlus);
}

#[test]
fn prompt_catalog_is_current() {
    let on_disk = std::fs::read_to_string(render_prompts::catalog_path()).unwrap();
    assert_eq!(
        on_disk,
        render_prompts::run_example(),
        "docs/prompts.md is stale; run `cargo run --example render_prompts -- --write`"
    );
}

#[test]
fn rate_with_mock_runs() {
    let d = rate_with_mock::run_example("shark").unwrap();
    assert_eq!(d.rating, RatingLevel::SeventeenPlus);
    assert!(rate_with_mock::run_example("no-such-app").is_err());
}

#[test]
fn extract_findings_runs() {
    let ranking = extract_findings::run_example("ghost-manor").unwrap();
    let mut sorted = ranking.clone();
    sorted.sort_unstable();
    assert_eq!(sorted, (0..ranking.len()).collect::<Vec<_>>());
}

#[test]
fn run_experiment_runs() {
    let dir = tempfile::tempdir().unwrap();
    let run = run_experiment::run_example(dir.path()).unwrap();
    assert_eq!(run.reports.len(), FusionStrategy::ALL.len());
    assert!(run.outcome.failures.is_empty());
    for name in [
        "run_config.json",
        "decisions.json",
        "report.json",
        "report.csv",
        "report.txt",
        "confusion_selective-cot.csv",
    ] {
        assert!(dir.path().join(name).is_file(), "{name}");
    }
    assert_eq!(run.reports[0].method, "Selective CoT Fusion");
}

#[test]
fn ablation_runs() {
    let (selective, ablated) = ablation::run_example(&[0, 1, 2]).unwrap();
    assert!(ablated.iter().all(|&a| a < selective));
}

#[test]
fn evaluate_metrics_runs() {
    let reports = evaluate_metrics::run_example().unwrap();
    assert!((reports[1].accuracy - 920.0 / 1281.0).abs() < 1e-12);
}

#[test]
fn cache_replay_runs() {
    let (cold, warm) = cache_replay::run_example().unwrap();
    assert!(cold > 0);
    assert_eq!(warm, 0);
}

#[test]
fn validate_dataset_runs() {
    let manifest = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/apps.json");
    let (good, bad) = validate_dataset::run_example(&manifest).unwrap();
    assert!(good.is_valid() && good.warnings.is_empty());
    assert_eq!(bad.errors.len(), 3);
    assert_eq!(bad.warnings.len(), 2);
}

#[test]
fn inspect_http_request_runs() {
    let body = inspect_http_request::run_example().unwrap();
    assert_eq!(body["messages"][0]["content"][1]["type"], "image_url");
}

#[test]
fn shipped_fixture_matches_generator() {
    use maturity_rater::synthetic::{generate, SyntheticOptions};
    let dir = tempfile::tempdir().unwrap();
    let set = generate(dir.path(), SyntheticOptions::default()).unwrap();
    let shipped = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    for name in ["apps.json", "mock.json"] {
        assert_eq!(
            std::fs::read(dir.path().join(name)).unwrap(),
            std::fs::read(shipped.join(name)).unwrap(),
            "fixtures/{name} is stale; run `cargo run --example generate_fixture`"
        );
    }
    for shot in set.apps.iter().flat_map(|a| &a.shots) {
        let rel = shot.path.strip_prefix(dir.path()).unwrap();
        assert_eq!(
            std::fs::read(&shot.path).unwrap(),
            std::fs::read(shipped.join(rel)).unwrap()
        );
    }
}
