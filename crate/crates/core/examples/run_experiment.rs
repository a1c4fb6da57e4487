// Compare every strategy on the 40-app fixture and write the report files.
//
// ```text
// cargo run --example run_experiment -- [OUT_DIR]
// ```

use std::path::{Path, PathBuf};

use maturity_rater::evaluator::{render_report, ReportFormat};
use maturity_rater::pipeline::FusionStrategy;
use maturity_rater::run::{run_experiment, ExperimentRun, RunConfig};

pub fn run_example(out: &Path) -> Result<ExperimentRun, Box<dyn std::error::Error>> {
    let fixtures = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let config = RunConfig {
        strategies: FusionStrategy::ALL.to_vec(),
        seed: 7,
        out_dir: Some(out.to_path_buf()),
        ..RunConfig::mock(fixtures.join("apps.json"), fixtures.join("mock.json"))
    };
    let run = run_experiment(&config)?;
    print!("{}", render_report(&run.reports, ReportFormat::TableText));
    for path in run.write_outputs(out)? {
        println!("wrote {}", path.display());
    }
    println!("{} backend calls", run.backend_calls);
    Ok(run)
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::env::args_os()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("runs/example"));
    run_example(&out).map(|_| ())
}
