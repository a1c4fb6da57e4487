// Run only the content-extraction step and print the screenshot ranking.
//
// ```text
// cargo run --example extract_findings -- [APP_ID]
// ```

use std::path::PathBuf;

use maturity_rater::dataset::load_dataset;
use maturity_rater::model::{mock_from_fixture, ModelClient};
use maturity_rater::pipeline::{rank_screenshots, Pipeline, PipelineConfig};
use maturity_rater::policy::PolicyTable;

pub fn run_example(app_id: &str) -> Result<Vec<usize>, Box<dyn std::error::Error>> {
    let fixtures = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let app = load_dataset(&fixtures.join("apps.json"))?
        .into_iter()
        .find(|a| a.id == app_id)
        .ok_or_else(|| format!("no app {app_id:?}"))?;
    let client = ModelClient::new(mock_from_fixture(&fixtures.join("mock.json"))?);
    let table = PolicyTable::builtin();
    let pipeline = Pipeline::new(&client, &table, PipelineConfig::default());

    let (assessments, trace) = pipeline.extract_findings_traced(&app)?;
    for a in &assessments {
        println!("screenshot {} -> {}", a.screenshot_index, a.max_severity);
        for f in &a.findings {
            println!("    {} / {} -> {}", f.category, f.intensity, f.rating());
        }
    }
    let ranking = rank_screenshots(&assessments);
    println!("ranking, most severe first: {ranking:?}");
    println!("{} requests:", trace.len());
    for t in &trace {
        println!("    {:<48} {:?}", t.step, t.response);
    }
    Ok(ranking)
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    let app_id = std::env::args().nth(1).unwrap_or_else(|| "ghost-manor".into());
    run_example(&app_id).map(|_| ())
}
