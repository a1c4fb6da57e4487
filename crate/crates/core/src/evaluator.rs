//! Classification metrics over rating decisions and report rendering.
//!
//! Precision, recall and F1 are reported per class, as an unweighted (macro)
//! mean over the four classes, and weighted by support. Undefined ratios are
//! reported as 0 and flagged.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::pipeline::RatingDecision;
use crate::policy::RatingLevel;

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    /// `counts[actual][predicted]`, indexed by rating rank.
    pub counts: [[u64; 4]; 4],
    pub total: u64,
}

impl ConfusionMatrix {
    pub fn add(&mut self, actual: RatingLevel, predicted: RatingLevel) {
        self.counts[actual.rank() as usize][predicted.rank() as usize] += 1;
        self.total += 1;
    }

    pub fn get(&self, actual: RatingLevel, predicted: RatingLevel) -> u64 {
        self.counts[actual.rank() as usize][predicted.rank() as usize]
    }

    /// Build from raw counts, deriving the total.
    pub fn from_counts(counts: [[u64; 4]; 4]) -> Self {
        let total = counts.iter().flatten().sum();
        Self { counts, total }
    }

    pub fn diagonal(&self) -> u64 {
        (0..4).map(|i| self.counts[i][i]).sum()
    }

    /// Row sum: apps whose actual rating is `class`.
    pub fn support(&self, class: RatingLevel) -> u64 {
        self.counts[class.rank() as usize].iter().sum()
    }

    /// Column sum: apps predicted as `class`.
    pub fn predicted(&self, class: RatingLevel) -> u64 {
        self.counts.iter().map(|row| row[class.rank() as usize]).sum()
    }

    /// 4x4 CSV with actual ratings as rows and predictions as columns.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["actual\\predicted".to_string()];
        header.extend(RatingLevel::ALL.iter().map(|r| r.label().to_string()));
        w.write_record(&header).expect("in-memory write");
        for actual in RatingLevel::ALL {
            let mut row = vec![actual.label().to_string()];
            row.extend(self.counts[actual.rank() as usize].iter().map(u64::to_string));
            w.write_record(&row).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
    }

    /// Aligned text grid with row and column totals.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = write!(out, "{:>14}", "actual \\ pred");
        for r in RatingLevel::ALL {
            let _ = write!(out, "{:>7}", r.label());
        }
        let _ = writeln!(out, "{:>8}", "total");
        for actual in RatingLevel::ALL {
            let _ = write!(out, "{:>14}", actual.label());
            for c in self.counts[actual.rank() as usize] {
                let _ = write!(out, "{c:>7}");
            }
            let _ = writeln!(out, "{:>8}", self.support(actual));
        }
        let _ = write!(out, "{:>14}", "total");
        for r in RatingLevel::ALL {
            let _ = write!(out, "{:>7}", self.predicted(r));
        }
        let _ = writeln!(out, "{:>8}", self.total);
        out
    }
}

pub fn confusion_matrix<I>(pairs: I) -> ConfusionMatrix
where
    I: IntoIterator<Item = (RatingLevel, RatingLevel)>,
{
    let mut cm = ConfusionMatrix::default();
    for (actual, predicted) in pairs {
        cm.add(actual, predicted);
    }
    cm
}

/// (ground truth, prediction) pairs of labelled decisions; unlabelled ones are skipped.
pub fn decision_pairs<'a>(decisions: impl IntoIterator<Item = &'a RatingDecision>) -> Vec<(RatingLevel, RatingLevel)> {
    decisions
        .into_iter()
        .filter_map(|d| d.ground_truth.map(|gt| (gt, d.rating)))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MetricFlag {
    /// Nothing was predicted as this class; precision set to 0.
    NoPredictions,
    /// No app has this class as ground truth; recall set to 0.
    NoSupport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub flags: Vec<MetricFlag>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Averages {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub method: String,
    pub modality: String,
    pub accuracy: f64,
    pub per_class: BTreeMap<RatingLevel, ClassMetrics>,
    #[serde(rename = "macro")]
    pub macro_avg: Averages,
    pub weighted: Averages,
    pub confusion: ConfusionMatrix,
}

impl MetricsReport {
    pub fn labeled(mut self, method: impl Into<String>, modality: impl Into<String>) -> Self {
        self.method = method.into();
        self.modality = modality.into();
        self
    }
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

pub fn metrics(cm: &ConfusionMatrix) -> MetricsReport {
    let mut per_class = BTreeMap::new();
    for class in RatingLevel::ALL {
        let tp = cm.get(class, class);
        let support = cm.support(class);
        let mut flags = Vec::new();
        let precision = ratio(tp, cm.predicted(class)).unwrap_or_else(|| {
            flags.push(MetricFlag::NoPredictions);
            0.0
        });
        let recall = ratio(tp, support).unwrap_or_else(|| {
            flags.push(MetricFlag::NoSupport);
            0.0
        });
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        per_class.insert(
            class,
            ClassMetrics {
                precision,
                recall,
                f1,
                support,
                flags,
            },
        );
    }

    let n = per_class.len() as f64;
    let macro_avg = Averages {
        precision: per_class.values().map(|c| c.precision).sum::<f64>() / n,
        recall: per_class.values().map(|c| c.recall).sum::<f64>() / n,
        f1: per_class.values().map(|c| c.f1).sum::<f64>() / n,
    };
    let weight = |c: &ClassMetrics| {
        if cm.total > 0 {
            c.support as f64 / cm.total as f64
        } else {
            0.0
        }
    };
    let weighted = Averages {
        precision: per_class.values().map(|c| c.precision * weight(c)).sum(),
        recall: per_class.values().map(|c| c.recall * weight(c)).sum(),
        f1: per_class.values().map(|c| c.f1 * weight(c)).sum(),
    };

    MetricsReport {
        method: String::new(),
        modality: String::new(),
        accuracy: ratio(cm.diagonal(), cm.total).unwrap_or(0.0),
        per_class,
        macro_avg,
        weighted,
        confusion: cm.clone(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReportFormat {
    TableText,
    Csv,
    Json,
}

pub const REPORT_COLUMNS: [&str; 6] = ["Method", "Modality", "Accuracy", "Precision", "Recall", "F1"];

fn pct(x: f64) -> String {
    format!("{:.2}", x * 100.0)
}

/// Reports ordered by macro F1, best first; ties keep input order.
pub fn sorted_reports(reports: &[MetricsReport]) -> Vec<&MetricsReport> {
    let mut sorted: Vec<&MetricsReport> = reports.iter().collect();
    sorted.sort_by(|a, b| b.macro_avg.f1.total_cmp(&a.macro_avg.f1));
    sorted
}

fn row(r: &MetricsReport) -> [String; 6] {
    [
        r.method.clone(),
        r.modality.clone(),
        pct(r.accuracy),
        pct(r.macro_avg.precision),
        pct(r.macro_avg.recall),
        pct(r.macro_avg.f1),
    ]
}

/// Comparison table, one row per report. Text and CSV carry macro scores as
/// percentages with two decimals; JSON carries every field.
pub fn render_report(reports: &[MetricsReport], format: ReportFormat) -> String {
    let sorted = sorted_reports(reports);
    match format {
        ReportFormat::Json => {
            let mut s = serde_json::to_string_pretty(&sorted).expect("reports serialize");
            s.push('\n');
            s
        }
        ReportFormat::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(REPORT_COLUMNS).expect("in-memory write");
            for r in &sorted {
                w.write_record(row(r)).expect("in-memory write");
            }
            String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
        }
        ReportFormat::TableText => {
            let rows: Vec<[String; 6]> = sorted
                .iter()
                .map(|r| {
                    let mut cells = row(r);
                    for c in &mut cells[2..] {
                        c.push('%');
                    }
                    cells
                })
                .collect();
            let mut widths = REPORT_COLUMNS.map(str::len);
            for cells in &rows {
                for (w, c) in widths.iter_mut().zip(cells) {
                    *w = (*w).max(c.chars().count());
                }
            }
            let line = |cells: &[String]| -> String {
                let parts: Vec<String> = cells
                    .iter()
                    .zip(widths)
                    .enumerate()
                    .map(|(i, (c, w))| if i < 2 { format!("{c:<w$}") } else { format!("{c:>w$}") })
                    .collect();
                format!("| {} |\n", parts.join(" | "))
            };
            let header: Vec<String> = REPORT_COLUMNS.iter().map(|s| s.to_string()).collect();
            let mut out = line(&header);
            let rule: Vec<String> = widths.iter().map(|&w| "-".repeat(w)).collect();
            out.push_str(&format!("|-{}-|\n", rule.join("-|-")));
            for cells in &rows {
                out.push_str(&line(cells));
            }
            out
        }
    }
}
