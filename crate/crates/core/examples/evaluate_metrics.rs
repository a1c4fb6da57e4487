// Metrics and report rendering from a hand-written confusion matrix.
//
// ```text
// cargo run --example evaluate_metrics
// ```

use maturity_rater::evaluator::{
    confusion_matrix, metrics, render_report, ConfusionMatrix, MetricsReport, ReportFormat,
};
use maturity_rater::policy::RatingLevel::{self, *};

pub fn run_example() -> Result<Vec<MetricsReport>, Box<dyn std::error::Error>> {
    // rows are actual ratings, columns predictions
    let cm = ConfusionMatrix::from_counts([[161, 1, 0, 0], [6, 331, 152, 7], [2, 40, 258, 94], [1, 6, 52, 170]]);
    print!("{}", cm.to_text());
    let big = metrics(&cm).labeled("Selective CoT Fusion", "Screenshot+Description");
    for (class, m) in &big.per_class {
        println!(
            "{:>4}: precision {:.4} recall {:.4} f1 {:.4} support {}",
            class.label(),
            m.precision,
            m.recall,
            m.f1,
            m.support
        );
    }

    let pairs: Vec<(RatingLevel, RatingLevel)> = [
        (FourPlus, FourPlus),
        (FourPlus, FourPlus),
        (FourPlus, FourPlus),
        (FourPlus, NinePlus),
        (NinePlus, NinePlus),
        (NinePlus, NinePlus),
        (NinePlus, FourPlus),
        (NinePlus, FourPlus),
    ]
    .into();
    let small = metrics(&confusion_matrix(pairs)).labeled("Basic Fusion", "Screenshot+Description");
    let flagged: Vec<_> = small
        .per_class
        .iter()
        .filter(|(_, m)| !m.flags.is_empty())
        .map(|(c, _)| c.label())
        .collect();
    println!("classes with undefined ratios: {flagged:?}");

    let reports = vec![small, big];
    print!("{}", render_report(&reports, ReportFormat::TableText));
    print!("{}", render_report(&reports, ReportFormat::Csv));
    Ok(reports)
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example().map(|_| ())
}
