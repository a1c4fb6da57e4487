// Selective CoT against a random pick outside the top-ranked screenshot,
// across several seeds.
//
// ```text
// cargo run --example ablation
// ```

use std::path::PathBuf;

use maturity_rater::dataset::load_dataset;
use maturity_rater::evaluator::{confusion_matrix, decision_pairs, metrics};
use maturity_rater::model::{mock_from_fixture, ModelClient};
use maturity_rater::pipeline::{FusionStrategy, Pipeline, PipelineConfig};
use maturity_rater::policy::PolicyTable;

/// Accuracy of the random-pick ablation per seed, plus Selective CoT's.
pub fn run_example(seeds: &[u64]) -> Result<(f64, Vec<f64>), Box<dyn std::error::Error>> {
    let fixtures = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let apps = load_dataset(&fixtures.join("apps.json"))?;
    let client = ModelClient::new(mock_from_fixture(&fixtures.join("mock.json"))?);
    let table = PolicyTable::builtin();

    let accuracy = |seed: u64, strategy: FusionStrategy| {
        let config = PipelineConfig {
            seed,
            ..PipelineConfig::default()
        };
        let out = Pipeline::new(&client, &table, config).run_experiment(&apps, &[strategy]);
        metrics(&confusion_matrix(decision_pairs(&out.decisions))).accuracy
    };
    let selective = accuracy(0, FusionStrategy::SelectiveCot);
    println!("w/ CoT image:  {:.2}%", selective * 100.0);
    let mut ablated = Vec::new();
    for &seed in seeds {
        let acc = accuracy(seed, FusionStrategy::RandomAblation);
        println!("w/o CoT image, seed {seed}: {:.2}%", acc * 100.0);
        ablated.push(acc);
    }
    Ok((selective, ablated))
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example(&[0, 1, 2, 3, 4]).map(|_| ())
}
