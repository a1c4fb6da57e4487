// Validate a manifest and print its statistics. A second, broken manifest
// shows what violations look like.
//
// ```text
// cargo run --example validate_dataset -- [MANIFEST]
// ```

use std::path::{Path, PathBuf};

use maturity_rater::dataset::{load_dataset, stats, validate_manifest, ValidationReport};

pub fn run_example(manifest: &Path) -> Result<(ValidationReport, ValidationReport), Box<dyn std::error::Error>> {
    let good = validate_manifest(manifest)?;
    println!(
        "{}: {} error(s), {} warning(s)",
        manifest.display(),
        good.errors.len(),
        good.warnings.len()
    );
    if good.is_valid() {
        println!("{}", stats(&load_dataset(manifest)?));
    }

    let dir = tempfile::tempdir()?;
    let broken = dir.path().join("apps.json");
    std::fs::write(
        &broken,
        r#"{"apps": [
            {"id": "a", "name": "A", "genre": "Games", "description": "", "screenshots": ["a.png"], "ground_truth_rating": "13+"},
            {"id": "a", "name": "A again", "genre": "Games", "description": "", "screenshots": [], "ground_truth_rating": "4+"}
        ]}"#,
    )?;
    let bad = validate_manifest(&broken)?;
    for e in &bad.errors {
        println!("error: {e}");
    }
    for w in &bad.warnings {
        println!("warning: {w}");
    }
    Ok((good, bad))
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    let manifest = std::env::args_os()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/apps.json"));
    run_example(&manifest).map(|_| ())
}
