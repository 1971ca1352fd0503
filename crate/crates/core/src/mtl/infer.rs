use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::features::featurize;
use super::network::MtlModel;
use crate::dataset::LabelRecord;
use crate::error::{Error, Result};
use crate::solvers::optimal_allocation;
use crate::system::{decisions_from_index, make_solution, OffloadInstance, OffloadSolution};

/// How the offloading decision is read off the network outputs.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum DecisionRule {
    /// Most probable joint decision class; ties go to the lowest index.
    #[default]
    ClassArgmax,
    /// Offload exactly the vehicles whose predicted allocation exceeds
    /// `threshold`. Meant for models trained without the classification term.
    AllocSupport { threshold: f64 },
}

pub fn infer_solution(model: &MtlModel, inst: &OffloadInstance) -> Result<OffloadSolution> {
    infer_solution_with(model, inst, DecisionRule::ClassArgmax)
}

/// Single forward pass, then repair into a feasible solution: the predicted
/// allocation is masked to the chosen offloaders and rescaled to fill the
/// budget. If any offloader would end up with a non-positive share, the
/// closed-form allocation for that decision is used instead. The cost is
/// recomputed from the instance.
pub fn infer_solution_with(
    model: &MtlModel,
    inst: &OffloadInstance,
    rule: DecisionRule,
) -> Result<OffloadSolution> {
    let n = inst.n_vehicles();
    if n != model.n_vehicles {
        return Err(Error::Shape(format!(
            "model was trained for {} vehicles, instance has {n}",
            model.n_vehicles
        )));
    }
    let x = featurize(inst, &model.stats)?;
    let (decisions, pred) = match rule {
        DecisionRule::ClassArgmax => {
            let p = model.forward(&x)?;
            let mut best = 0;
            for (k, q) in p.class_probs.iter().enumerate() {
                if *q > p.class_probs[best] {
                    best = k;
                }
            }
            (decisions_from_index(best, n), p.alloc)
        }
        DecisionRule::AllocSupport { threshold } => {
            let alloc = model.forward_alloc(&x)?;
            (alloc.iter().map(|a| *a > threshold).collect(), alloc)
        }
    };

    let masked: Vec<f64> = pred
        .iter()
        .zip(&decisions)
        .map(|(a, &d)| if d { *a } else { 0.0 })
        .collect();
    let total: f64 = masked.iter().sum();
    let scaled: Vec<f64> = masked.iter().map(|a| a / total).collect();
    let usable = total.is_finite()
        && total > 0.0
        && scaled
            .iter()
            .zip(&decisions)
            .all(|(a, &d)| !d || (*a > 0.0 && a.is_finite()));
    let alloc = if usable {
        scaled
    } else {
        optimal_allocation(inst, &decisions)
    };
    make_solution(inst, decisions, alloc)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EvalMetrics {
    /// Fraction of exact decision-vector matches.
    pub class_accuracy: f64,
    /// Mean over samples of the per-entry squared allocation error.
    pub reg_mse: f64,
    /// Seconds per solved instance.
    pub mean_inference_time: f64,
}

/// Accuracy and allocation MSE of arbitrary predictions against labels, so
/// solver outputs can be scored the same way as the network.
pub fn score_predictions(
    labels: &[LabelRecord],
    predictions: &[OffloadSolution],
) -> Result<(f64, f64)> {
    if labels.is_empty() || labels.len() != predictions.len() {
        return Err(Error::Shape(format!(
            "{} labels vs {} predictions",
            labels.len(),
            predictions.len()
        )));
    }
    let mut hits = 0usize;
    let mut sq = 0.0;
    for (l, p) in labels.iter().zip(predictions) {
        if p.decision_index() == l.decision {
            hits += 1;
        }
        let n = l.alloc.len() as f64;
        sq += l
            .alloc
            .iter()
            .zip(&p.alloc)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            / n;
    }
    let count = labels.len() as f64;
    Ok((hits as f64 / count, sq / count))
}

/// Minimum number of timed inference calls.
pub const MIN_TIMED_CALLS: usize = 1000;

pub fn evaluate(model: &MtlModel, test: &[LabelRecord], rule: DecisionRule) -> Result<EvalMetrics> {
    if test.is_empty() {
        return Err(Error::InvalidParameter("test set is empty".into()));
    }
    let predictions = test
        .iter()
        .map(|r| infer_solution_with(model, &r.instance, rule))
        .collect::<Result<Vec<_>>>()?;
    let (class_accuracy, reg_mse) = score_predictions(test, &predictions)?;

    let rounds = MIN_TIMED_CALLS.div_ceil(test.len());
    let start = Instant::now();
    for _ in 0..rounds {
        for r in test {
            std::hint::black_box(infer_solution_with(model, &r.instance, rule)?);
        }
    }
    let mean_inference_time = start.elapsed().as_secs_f64() / (rounds * test.len()) as f64;
    Ok(EvalMetrics {
        class_accuracy,
        reg_mse,
        mean_inference_time,
    })
}
