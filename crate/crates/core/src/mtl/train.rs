use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::features::{featurize, raw_features, FeatureStats};
use super::network::{project_alloc, project_alloc_backward, softmax_in_place, MtlModel, Tape};
use crate::dataset::LabelRecord;
use crate::error::{Error, Result};
use crate::instance_gen::derive_seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    /// Weight of the cross-entropy (decision) term.
    pub chi_c: f64,
    /// Weight of the allocation MSE term. Also accepted as `chi_l`.
    #[serde(alias = "chi_l")]
    pub chi_r: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_epsilon: f64,
    pub seed: u64,
    pub train_fraction: f64,
    pub hidden_sizes: Vec<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            chi_c: 1.0,
            chi_r: 1.0,
            epochs: 200,
            batch_size: 128,
            learning_rate: 1e-3,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_epsilon: 1e-8,
            seed: 0,
            train_fraction: 1.0,
            hidden_sizes: vec![16, 8],
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.chi_c >= 0.0 && self.chi_r >= 0.0) || self.chi_c + self.chi_r <= 0.0 {
            return Err(Error::Config(format!(
                "loss weights must be non-negative with a positive sum (chi_c = {}, chi_r = {})",
                self.chi_c, self.chi_r
            )));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction <= 1.0) {
            return Err(Error::Config(format!(
                "train_fraction must lie in (0, 1], got {}",
                self.train_fraction
            )));
        }
        if self.batch_size == 0 || self.epochs == 0 {
            return Err(Error::Config(
                "epochs and batch_size must be positive".into(),
            ));
        }
        if !(self.learning_rate > 0.0)
            || !(0.0..1.0).contains(&self.adam_beta1)
            || !(0.0..1.0).contains(&self.adam_beta2)
            || !(self.adam_epsilon > 0.0)
        {
            return Err(Error::Config("invalid Adam hyperparameters".into()));
        }
        if self.hidden_sizes.is_empty() || self.hidden_sizes.contains(&0) {
            return Err(Error::Config(format!(
                "hidden_sizes must be non-empty and positive, got {:?}",
                self.hidden_sizes
            )));
        }
        Ok(())
    }
}

/// One normalized training example.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub features: Vec<f64>,
    pub class: usize,
    pub alloc: Vec<f64>,
}

impl Sample {
    pub fn from_record(record: &LabelRecord, stats: &FeatureStats) -> Result<Self> {
        Ok(Sample {
            features: featurize(&record.instance, stats)?,
            class: record.decision,
            alloc: record.alloc.clone(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct LossTerms {
    pub total: f64,
    /// Mean cross-entropy (unweighted).
    pub ce: f64,
    /// Mean squared allocation error (unweighted).
    pub mse: f64,
}

/// `chi_c * mean cross-entropy + chi_r * mean squared allocation error`.
/// The squared error of one sample is averaged over its `N` entries.
pub fn loss(model: &MtlModel, batch: &[Sample], chi_c: f64, chi_r: f64) -> f64 {
    loss_terms(model, batch, chi_c, chi_r).total
}

pub fn loss_terms(model: &MtlModel, batch: &[Sample], chi_c: f64, chi_r: f64) -> LossTerms {
    let mut tape = Tape::new(model);
    let mut terms = LossTerms::default();
    for s in batch {
        let (ce, mse) = sample_terms(model, &mut tape, s);
        terms.ce += ce;
        terms.mse += mse;
    }
    let count = batch.len() as f64;
    terms.ce /= count;
    terms.mse /= count;
    terms.total = chi_c * terms.ce + chi_r * terms.mse;
    terms
}

fn sample_terms(model: &MtlModel, tape: &mut Tape, s: &Sample) -> (f64, f64) {
    model.run(&s.features, tape, true);
    let mut probs = tape.logits.clone();
    softmax_in_place(&mut probs);
    let ce = -probs[s.class].max(f64::MIN_POSITIVE).ln();
    let (y, _) = project_alloc(&tape.reg_raw);
    let mse = y
        .iter()
        .zip(&s.alloc)
        .map(|(p, t)| (p - t) * (p - t))
        .sum::<f64>()
        / y.len() as f64;
    (ce, mse)
}

/// Loss and its gradient for every tensor in [`MtlModel::tensors`] order.
pub fn loss_and_gradients(
    model: &MtlModel,
    batch: &[Sample],
    chi_c: f64,
    chi_r: f64,
) -> (LossTerms, Vec<Vec<f64>>) {
    let mut grads = model.zero_grads();
    let mut tape = Tape::new(model);
    let terms = accumulate(model, batch, chi_c, chi_r, &mut tape, &mut grads);
    (terms, grads)
}

fn accumulate(
    model: &MtlModel,
    batch: &[Sample],
    chi_c: f64,
    chi_r: f64,
    tape: &mut Tape,
    grads: &mut [Vec<f64>],
) -> LossTerms {
    let count = batch.len() as f64;
    let n = model.n_vehicles as f64;
    let mut dlogits = vec![0.0; model.n_classes()];
    let mut dy = vec![0.0; model.n_vehicles];
    let mut dreg = vec![0.0; model.n_vehicles];
    let mut terms = LossTerms::default();
    for s in batch {
        model.run(&s.features, tape, true);
        let mut probs = tape.logits.clone();
        softmax_in_place(&mut probs);
        terms.ce -= probs[s.class].max(f64::MIN_POSITIVE).ln();
        let (y, sum) = project_alloc(&tape.reg_raw);
        for ((g, p), t) in dy.iter_mut().zip(&y).zip(&s.alloc) {
            terms.mse += (p - t) * (p - t) / n;
            *g = chi_r * 2.0 * (p - t) / (n * count);
        }
        project_alloc_backward(&tape.reg_raw, &y, sum, &dy, &mut dreg);
        let dl = if chi_c > 0.0 {
            for (k, (d, p)) in dlogits.iter_mut().zip(&probs).enumerate() {
                let target = if k == s.class { 1.0 } else { 0.0 };
                *d = chi_c * (p - target) / count;
            }
            Some(dlogits.as_slice())
        } else {
            None
        };
        model.backward(tape, dl, &dreg, grads);
    }
    terms.ce /= count;
    terms.mse /= count;
    terms.total = chi_c * terms.ce + chi_r * terms.mse;
    terms
}

struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    step: i32,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    fn new(cfg: &TrainConfig, model: &MtlModel) -> Self {
        Adam {
            lr: cfg.learning_rate,
            beta1: cfg.adam_beta1,
            beta2: cfg.adam_beta2,
            eps: cfg.adam_epsilon,
            step: 0,
            m: model.zero_grads(),
            v: model.zero_grads(),
        }
    }

    fn update(&mut self, model: &mut MtlModel, grads: &[Vec<f64>]) {
        self.step += 1;
        let c1 = 1.0 - self.beta1.powi(self.step);
        let c2 = 1.0 - self.beta2.powi(self.step);
        for (((p, g), m), v) in model
            .tensors_mut()
            .into_iter()
            .zip(grads)
            .zip(&mut self.m)
            .zip(&mut self.v)
        {
            for i in 0..p.len() {
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * g[i];
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * g[i] * g[i];
                let m_hat = m[i] / c1;
                let v_hat = v[i] / c2;
                p[i] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub loss: f64,
    pub ce_term: f64,
    pub mse_term: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: MtlModel,
    pub log: Vec<EpochLog>,
    /// Dataset indices used for training, in shuffled order.
    pub train_indices: Vec<usize>,
    /// Remaining indices, available as a held-out set.
    pub holdout_indices: Vec<usize>,
}

/// Seeded shuffle of `0..len` split into the first `fraction` (at least one
/// element) and the rest.
pub fn split_indices(len: usize, fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..len).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(derive_seed(seed, 1)));
    let n_train = ((fraction * len as f64).round() as usize).clamp(1.min(len), len);
    let holdout = idx.split_off(n_train);
    (idx, holdout)
}

fn check_dataset(dataset: &[LabelRecord]) -> Result<usize> {
    let first = dataset
        .first()
        .ok_or_else(|| Error::InvalidParameter("training set is empty".into()))?;
    let n = first.instance.n_vehicles();
    for (i, r) in dataset.iter().enumerate() {
        if r.instance.n_vehicles() != n || r.alloc.len() != n || r.decision >= (1 << n) {
            return Err(Error::Shape(format!(
                "record {i} does not match a {n}-vehicle dataset"
            )));
        }
    }
    Ok(n)
}

/// Mini-batch Adam on the weighted loss. Deterministic for a given
/// `cfg.seed`; parameters are rounded to `f32` at the end so the returned
/// model equals its serialized form.
pub fn train(dataset: &[LabelRecord], cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    let n = check_dataset(dataset)?;
    let (train_indices, holdout_indices) =
        split_indices(dataset.len(), cfg.train_fraction, cfg.seed);

    let raw: Vec<Vec<f64>> = train_indices
        .iter()
        .map(|&i| raw_features(&dataset[i].instance))
        .collect();
    let mut stats = FeatureStats::fit(&raw)?;
    stats.mean.iter_mut().for_each(|v| *v = *v as f32 as f64);
    stats.std.iter_mut().for_each(|v| *v = *v as f32 as f64);
    let mut samples: Vec<Sample> = train_indices
        .iter()
        .map(|&i| Sample::from_record(&dataset[i], &stats))
        .collect::<Result<_>>()?;

    let mut init_rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, 2));
    let mut model = MtlModel::init(n, &cfg.hidden_sizes, stats, &mut init_rng)?;
    let mut adam = Adam::new(cfg, &model);
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, 3));
    let mut tape = Tape::new(&model);
    let mut grads = model.zero_grads();
    let mut log = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        samples.shuffle(&mut shuffle_rng);
        let mut sum = LossTerms::default();
        for (b, batch) in samples.chunks(cfg.batch_size).enumerate() {
            grads
                .iter_mut()
                .for_each(|g| g.iter_mut().for_each(|x| *x = 0.0));
            let terms = accumulate(&model, batch, cfg.chi_c, cfg.chi_r, &mut tape, &mut grads);
            if !terms.total.is_finite() {
                return Err(Error::Divergence {
                    epoch,
                    batch: b,
                    loss: terms.total,
                });
            }
            adam.update(&mut model, &grads);
            let w = batch.len() as f64;
            sum.total += terms.total * w;
            sum.ce += terms.ce * w;
            sum.mse += terms.mse * w;
        }
        let count = samples.len() as f64;
        log.push(EpochLog {
            epoch,
            loss: sum.total / count,
            ce_term: sum.ce / count,
            mse_term: sum.mse / count,
        });
    }

    model.round_to_f32();
    Ok(TrainOutcome {
        model,
        log,
        train_indices,
        holdout_indices,
    })
}

/// Training log as CSV with header `epoch,loss,ce_term,mse_term`.
pub fn log_csv(log: &[EpochLog]) -> String {
    let mut out = String::from("epoch,loss,ce_term,mse_term\n");
    for e in log {
        out.push_str(&format!(
            "{},{},{},{}\n",
            e.epoch, e.loss, e.ce_term, e.mse_term
        ));
    }
    out
}
