// Rate one fixture app with Selective CoT fusion against the scripted mock.
//
// ```text
// cargo run --example rate_with_mock -- [APP_ID]
// ```

use std::path::PathBuf;

use maturity_rater::dataset::load_dataset;
use maturity_rater::model::{mock_from_fixture, ModelClient};
use maturity_rater::pipeline::{FusionStrategy, Pipeline, PipelineConfig, RatingDecision};
use maturity_rater::policy::PolicyTable;

pub fn run_example(app_id: &str) -> Result<RatingDecision, Box<dyn std::error::Error>> {
    let fixtures = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let apps = load_dataset(&fixtures.join("apps.json"))?;
    let app = apps
        .iter()
        .find(|a| a.id == app_id)
        .ok_or_else(|| format!("no app {app_id:?} in the fixture"))?;

    let client = ModelClient::new(mock_from_fixture(&fixtures.join("mock.json"))?);
    let table = PolicyTable::builtin();
    let pipeline = Pipeline::new(&client, &table, PipelineConfig::default());
    let decision = pipeline.rate_app(app, FusionStrategy::SelectiveCot)?;

    for a in &decision.assessments {
        let cats: Vec<&str> = a.findings.iter().map(|f| f.category.label()).collect();
        println!(
            "screenshot {}: {} [{}]",
            a.screenshot_index,
            a.max_severity,
            cats.join(", ")
        );
    }
    println!("selected: {:?}", decision.selected_screenshots);
    match decision.ground_truth {
        Some(gt) => println!("{}: {} (ground truth {gt})", app.name, decision.rating),
        None => println!("{}: {}", app.name, decision.rating),
    }
    println!("{} model requests", client.backend_calls());
    Ok(decision)
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    let app_id = std::env::args().nth(1).unwrap_or_else(|| "shark".into());
    run_example(&app_id).map(|_| ())
}
