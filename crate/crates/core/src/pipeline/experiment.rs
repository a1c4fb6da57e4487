use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::{FusionStrategy, Pipeline, RatingDecision, Step1Memo};
use crate::dataset::App;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FailureRecord {
    pub app_id: String,
    pub strategy: FusionStrategy,
    pub error: String,
}

/// Decisions ordered app-major in input order, then by requested strategy.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExperimentOutcome {
    pub decisions: Vec<RatingDecision>,
    pub failures: Vec<FailureRecord>,
}

impl ExperimentOutcome {
    pub fn decisions_for(&self, strategy: FusionStrategy) -> impl Iterator<Item = &RatingDecision> {
        self.decisions.iter().filter(move |d| d.strategy == strategy)
    }
}

type AppResult = Vec<Result<RatingDecision, FailureRecord>>;

/// Apps are spread over a bounded worker pool. Each worker rates one app with
/// every strategy in turn, sharing that app's Step-1 results between them.
pub(super) fn run(pipeline: &Pipeline<'_>, apps: &[App], strategies: &[FusionStrategy]) -> ExperimentOutcome {
    let workers = pipeline
        .config
        .concurrency
        .max(1)
        .min(pipeline.client.max_in_flight())
        .min(apps.len().max(1));
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<AppResult>>> = apps.iter().map(|_| Mutex::new(None)).collect();

    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(app) = apps.get(i) else { break };
                let mut memo = Step1Memo::default();
                let results: AppResult = strategies
                    .iter()
                    .map(|&strategy| {
                        pipeline.rate_app_memo(app, strategy, &mut memo).map_err(|e| {
                            log::error!("app {:?} with {strategy}: {e}", app.id);
                            FailureRecord {
                                app_id: app.id.clone(),
                                strategy,
                                error: e.to_string(),
                            }
                        })
                    })
                    .collect();
                *slots[i].lock().expect("slot lock") = Some(results);
            });
        }
    });

    let mut outcome = ExperimentOutcome::default();
    for slot in slots {
        for result in slot.into_inner().expect("slot lock").unwrap_or_default() {
            match result {
                Ok(d) => outcome.decisions.push(d),
                Err(f) => outcome.failures.push(f),
            }
        }
    }
    outcome
}
