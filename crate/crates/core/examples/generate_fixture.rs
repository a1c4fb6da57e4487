// Regenerate the synthetic 40-app dataset and its scripted mock answers.
//
// ```text
// cargo run --example generate_fixture -- [OUT_DIR]
// ```
// Defaults to `fixtures/` inside this crate.

use std::path::PathBuf;

use maturity_rater::synthetic::{generate, SyntheticOptions};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::env::args_os()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures"));
    let set = generate(&out, SyntheticOptions::default())?;
    let shots: usize = set.apps.iter().map(|a| a.shots.len()).sum();
    println!("{} apps, {shots} screenshots", set.apps.len());
    println!("manifest: {}", set.manifest_path.display());
    println!("fixture:  {}", set.fixture_path.display());
    Ok(())
}
