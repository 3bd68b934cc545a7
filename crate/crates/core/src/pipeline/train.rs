use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::model::{predicted_label, Model, PreparedSpg};
use crate::spg::Spg;
use crate::tensor::Adam;

use super::{split_dataset, PipelineError, ProgramSpgs};

/// Largest accepted patience.
pub const MAX_PATIENCE: usize = 200;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    /// Epochs without held-out improvement before stopping.
    pub patience: usize,
    pub max_epochs: usize,
    /// Share of training programs held out for early stopping.
    pub validation_fraction: f64,
    pub seed: u64,
    /// Oversample the minority class each epoch.
    pub balanced: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig { learning_rate: 1e-3, patience: 20, max_epochs: 200, validation_fraction: 0.2, seed: 0, balanced: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpochStats {
    pub epoch: usize,
    /// Mean loss of the epoch's updates.
    pub train_loss: f64,
    /// Mean loss on the held-out programs, or on the training set when none are held out.
    pub held_out_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainReport {
    pub history: Vec<EpochStats>,
    /// Epoch whose parameters were kept, 1-based.
    pub best_epoch: usize,
    pub train_programs: usize,
    pub held_out_programs: usize,
    pub train_spgs: usize,
}

impl TrainReport {
    pub fn epochs(&self) -> usize {
        self.history.len()
    }
}

struct Sample {
    prep: PreparedSpg,
    label: u8,
}

fn prepare(model: &Model, programs: &[&ProgramSpgs]) -> Result<Vec<Sample>, PipelineError> {
    programs
        .iter()
        .flat_map(|p| p.spgs.iter().map(move |s| (p, s)))
        .map(|(p, s)| {
            let label = s
                .label
                .ok_or_else(|| PipelineError::Config(format!("{}: SPG at line {} has no label", p.path, s.criterion.line)))?;
            Ok(Sample { prep: model.prepare(s), label })
        })
        .collect()
}

fn mean_loss(model: &Model, samples: &[Sample]) -> Result<f64, PipelineError> {
    let mut total = 0.0;
    for s in samples {
        let p = model.predict(&s.prep)?;
        total += -p[usize::from(s.label)].max(crate::model::PROB_FLOOR).ln();
    }
    Ok(total / samples.len() as f64)
}

/// Sample order for one epoch, oversampled to class balance when asked.
fn epoch_order(samples: &[Sample], balanced: bool, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut order: Vec<usize> = (0..samples.len()).collect();
    if balanced {
        let (pos, neg): (Vec<usize>, Vec<usize>) = order.iter().partition(|&&i| samples[i].label == 1);
        let (small, large) = if pos.len() < neg.len() { (pos, neg) } else { (neg, pos) };
        order = large.clone();
        order.extend(small.iter().copied().cycle().take(large.len()));
    }
    order.shuffle(rng);
    order
}

/// Trains `model` in place with per-SPG Adam steps. Held-out programs are
/// split off by program, training stops once the held-out loss has not
/// improved for `patience` epochs, and the best parameters are restored.
pub fn train(model: &mut Model, programs: &[ProgramSpgs], cfg: &TrainConfig) -> Result<TrainReport, PipelineError> {
    if cfg.patience > MAX_PATIENCE {
        return Err(PipelineError::Config(format!("patience {} exceeds {MAX_PATIENCE}", cfg.patience)));
    }
    if cfg.max_epochs == 0 {
        return Err(PipelineError::Config("max_epochs must be positive".into()));
    }
    if !(0.0..1.0).contains(&cfg.validation_fraction) {
        return Err(PipelineError::Config(format!("validation fraction {} is outside [0, 1)", cfg.validation_fraction)));
    }
    let labels: BTreeSet<u8> = programs.iter().flat_map(|p| &p.spgs).filter_map(|s| s.label).collect();
    if labels.len() < 2 {
        return Err(PipelineError::Config(format!(
            "training set needs both labels, found {:?} across {} programs",
            labels,
            programs.len()
        )));
    }

    let with_spgs: Vec<&ProgramSpgs> = programs.iter().filter(|p| !p.spgs.is_empty()).collect();
    let (fit, held): (Vec<&ProgramSpgs>, Vec<&ProgramSpgs>) =
        if cfg.validation_fraction > 0.0 && with_spgs.len() >= 2 {
            let (a, b) = split_dataset(with_spgs.len(), 1.0 - cfg.validation_fraction, cfg.seed ^ 0x5eed)?;
            (a.iter().map(|&i| with_spgs[i]).collect(), b.iter().map(|&i| with_spgs[i]).collect())
        } else {
            (with_spgs.clone(), Vec::new())
        };
    let fit_samples = prepare(model, &fit)?;
    if fit_samples.iter().map(|s| s.label).collect::<BTreeSet<_>>().len() < 2 {
        return Err(PipelineError::Config("the programs left for fitting carry a single label".into()));
    }
    let held_samples = prepare(model, &held)?;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut adam = Adam::new(&model.params, cfg.learning_rate);
    let mut best = (f64::INFINITY, model.params.clone(), 0);
    let mut since_best = 0;
    let mut history = Vec::new();
    for epoch in 1..=cfg.max_epochs {
        let order = epoch_order(&fit_samples, cfg.balanced, &mut rng);
        let mut total = 0.0;
        for &i in &order {
            let s = &fit_samples[i];
            let (l, grads) = model.loss_and_grads(&s.prep, s.label)?;
            total += l;
            adam.update(&mut model.params, grads.into_iter().map(Some).collect())?;
        }
        let held_out_loss =
            if held_samples.is_empty() { mean_loss(model, &fit_samples)? } else { mean_loss(model, &held_samples)? };
        history.push(EpochStats { epoch, train_loss: total / order.len() as f64, held_out_loss });
        log::debug!("epoch {epoch}: train loss {:.5}, held-out loss {held_out_loss:.5}", total / order.len() as f64);
        if held_out_loss < best.0 {
            best = (held_out_loss, model.params.clone(), epoch);
            since_best = 0;
        } else {
            since_best += 1;
        }
        if since_best >= cfg.patience {
            break;
        }
    }
    model.params = best.1;
    Ok(TrainReport {
        history,
        best_epoch: best.2,
        train_programs: fit.len(),
        held_out_programs: held.len(),
        train_spgs: fit_samples.len(),
    })
}

/// `p(vulnerable)` and the predicted label of each SPG, in input order.
/// Runs in parallel.
pub fn predict_all(model: &Model, spgs: &[Spg]) -> Result<Vec<(f64, u8)>, PipelineError> {
    spgs.par_iter()
        .map(|s| {
            let p = model.predict(&model.prepare(s))?;
            Ok((p[1], predicted_label(p)))
        })
        .collect()
}
