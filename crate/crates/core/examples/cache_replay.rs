// Run the same experiment twice against one response cache. The second
// run is answered entirely from disk.
//
// ```text
// cargo run --example cache_replay
// ```

use std::path::PathBuf;

use maturity_rater::cache::CacheStore;
use maturity_rater::pipeline::FusionStrategy;
use maturity_rater::run::{run_experiment, RunConfig};

/// Backend calls of the cold and the warm run.
pub fn run_example() -> Result<(u64, u64), Box<dyn std::error::Error>> {
    let fixtures = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let cache_dir = tempfile::tempdir()?;
    let config = RunConfig {
        strategies: vec![FusionStrategy::GlobalCot, FusionStrategy::SelectiveCot],
        cache_dir: Some(cache_dir.path().to_path_buf()),
        ..RunConfig::mock(fixtures.join("apps.json"), fixtures.join("mock.json"))
    };

    let cold = run_experiment(&config)?;
    let stats = CacheStore::open(cache_dir.path())?.stats()?;
    println!(
        "cold: {} backend calls, cache now {} entries ({} bytes)",
        cold.backend_calls, stats.entries, stats.bytes
    );
    let warm = run_experiment(&config)?;
    println!(
        "warm: {} backend calls, {} cache hits",
        warm.backend_calls, warm.cache_hits
    );
    println!("reports identical: {}", cold.report_json() == warm.report_json());
    Ok((cold.backend_calls, warm.backend_calls))
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example().map(|_| ())
}
