use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::adam::{adam_step, AdamConfig, AdamState};
use super::bptt::{loss_and_grad, ResetGradient};
use super::loss::{loss, one_hot};
use super::metrics::{format_mean_std, mean_std, ConfusionMatrix, EpochMetrics, Metrics};
use super::split::stratified_split;
use crate::error::{Error, Result};
use crate::events::Dataset;
use crate::graph::TactileGraph;
use crate::lif::SpikeMode;
use crate::network::{vote, ModelParams, NetworkConfig, TactileSgNet};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub rounds: usize,
    pub split_fraction: f64,
    pub seed: u64,
    pub adam_betas: (f64, f64),
    pub adam_eps: f64,
    pub reset: ResetGradient,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 100,
            learning_rate: 1e-3,
            batch_size: 1,
            rounds: 10,
            split_fraction: 0.8,
            seed: 0,
            adam_betas: (0.9, 0.999),
            adam_eps: 1e-8,
            reset: ResetGradient::Detached,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if !(self.split_fraction > 0.0 && self.split_fraction < 1.0) {
            return bad(format!("split_fraction must lie in (0, 1), got {}", self.split_fraction));
        }
        if self.rounds == 0 {
            return bad("rounds must be positive".into());
        }
        if self.batch_size == 0 {
            return bad("batch_size must be positive".into());
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning_rate must be positive, got {}", self.learning_rate));
        }
        let (b1, b2) = self.adam_betas;
        if !((0.0..1.0).contains(&b1) && (0.0..1.0).contains(&b2)) {
            return bad(format!("adam_betas must lie in [0, 1), got ({b1}, {b2})"));
        }
        if !(self.adam_eps.is_finite() && self.adam_eps > 0.0) {
            return bad(format!("adam_eps must be positive, got {}", self.adam_eps));
        }
        Ok(())
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            learning_rate: self.learning_rate,
            beta1: self.adam_betas.0,
            beta2: self.adam_betas.1,
            eps: self.adam_eps,
        }
    }
}

/// Mean loss, accuracy and confusion counts of `model` on `data` (hard spikes, no gradients).
pub fn evaluate(model: &TactileSgNet, data: &Dataset) -> Result<(f64, f64, ConfusionMatrix)> {
    let num_classes = model.config().num_classes;
    if data.num_classes() != num_classes {
        return Err(Error::Dataset(format!(
            "dataset has {} classes, model {num_classes}",
            data.num_classes()
        )));
    }
    let results: Vec<(f64, usize)> = data
        .samples
        .par_iter()
        .map(|s| {
            let state = model.forward(&s.spikes, SpikeMode::Hard)?;
            let l = loss(state.outputs(), model.voting(), &one_hot(s.label, num_classes))?;
            let (_, predicted) = vote(state.outputs(), model.voting())?;
            Ok((l, predicted))
        })
        .collect::<Result<_>>()?;
    let mut confusion = ConfusionMatrix::new(data.class_names.clone());
    let mut total = 0.0;
    for (s, (l, predicted)) in data.samples.iter().zip(&results) {
        confusion.record(s.label, *predicted);
        total += l;
    }
    let mean = if results.is_empty() { 0.0 } else { total / results.len() as f64 };
    Ok((mean, confusion.accuracy(), confusion))
}

pub fn confusion_matrix(model: &TactileSgNet, test: &Dataset) -> Result<ConfusionMatrix> {
    evaluate(model, test).map(|(_, _, c)| c)
}

fn batch_gradient(
    model: &TactileSgNet,
    data: &Dataset,
    batch: &[usize],
    reset: ResetGradient,
) -> Result<(f64, ModelParams)> {
    let num_classes = model.config().num_classes;
    let mut sum = model.params().zeros_like();
    let mut total = 0.0;
    for &i in batch {
        let s = &data.samples[i];
        let frames = s.spikes.to_frames();
        let y = one_hot(s.label, num_classes);
        let (l, g) = loss_and_grad(model, frames.view(), &y, SpikeMode::Hard, reset)?;
        total += l;
        for ((_, acc), (_, _, d)) in sum.tensors_mut().into_iter().zip(g.tensors()) {
            acc.iter_mut().zip(d).for_each(|(a, b)| *a += b);
        }
    }
    let scale = 1.0 / batch.len() as f64;
    for (_, acc) in sum.tensors_mut() {
        acc.iter_mut().for_each(|a| *a *= scale);
    }
    Ok((total, sum))
}

/// Trains `model` on `train`, evaluating on `test` after every epoch.
///
/// Sample order is reshuffled each epoch from `cfg.seed`. Gradients within a batch are averaged.
pub fn train(
    mut model: TactileSgNet,
    train: &Dataset,
    test: &Dataset,
    cfg: &TrainConfig,
) -> Result<(TactileSgNet, Metrics)> {
    cfg.validate()?;
    let mut metrics = Metrics::default();
    if cfg.epochs == 0 {
        return Ok((model, metrics));
    }
    if train.is_empty() {
        return Err(Error::Dataset("training set is empty".into()));
    }
    if train.num_classes() != model.config().num_classes {
        return Err(Error::Dataset(format!(
            "training set has {} classes, model {}",
            train.num_classes(),
            model.config().num_classes
        )));
    }
    let adam = cfg.adam();
    let mut state = AdamState::new(model.params());
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(1);
    let mut order: Vec<usize> = (0..train.len()).collect();
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let (l, grad) = batch_gradient(&model, train, batch, cfg.reset)?;
            total += l;
            adam_step(model.params_mut(), &grad, &mut state, &adam)?;
        }
        let (test_loss, test_acc, confusion) = evaluate(&model, test)?;
        metrics.epochs.push(EpochMetrics {
            epoch,
            train_loss: total / train.len() as f64,
            test_loss,
            test_acc,
        });
        metrics.confusion = Some(confusion);
    }
    Ok((model, metrics))
}

#[derive(Debug, Clone)]
pub struct RoundResult {
    pub round: usize,
    pub seed: u64,
    pub model: TactileSgNet,
    pub metrics: Metrics,
}

impl RoundResult {
    pub fn final_accuracy(&self) -> f64 {
        self.metrics.final_accuracy().unwrap_or(0.0)
    }
}

/// Outcome of a multi-round experiment over one fixed split.
#[derive(Debug, Clone)]
pub struct RoundsSummary {
    pub train_indices: Vec<usize>,
    pub test_indices: Vec<usize>,
    pub rounds: Vec<RoundResult>,
}

impl RoundsSummary {
    pub fn accuracies(&self) -> Vec<f64> {
        self.rounds.iter().map(RoundResult::final_accuracy).collect()
    }

    /// Mean and sample standard deviation of the final test accuracies, as fractions.
    pub fn mean_std(&self) -> (f64, f64) {
        mean_std(&self.accuracies())
    }

    /// Percentages with two decimals, e.g. `89.44 (0.55)`.
    pub fn formatted(&self) -> String {
        format_mean_std(&self.accuracies())
    }
}

/// Splits `dataset` once with `cfg.seed`, then trains `cfg.rounds` freshly initialized models.
///
/// Round `r` initializes and shuffles with seed `cfg.seed + r`. `on_round` sees each result as
/// soon as it finishes.
pub fn run_rounds(
    dataset: &Dataset,
    graph: &TactileGraph,
    network: &NetworkConfig,
    cfg: &TrainConfig,
    mut on_round: impl FnMut(&RoundResult) -> Result<()>,
) -> Result<RoundsSummary> {
    cfg.validate()?;
    let (train_indices, test_indices) = stratified_split(&dataset.labels(), cfg.split_fraction, cfg.seed)?;
    let train_set = dataset.subset(&train_indices);
    let test_set = dataset.subset(&test_indices);
    let mut rounds = Vec::with_capacity(cfg.rounds);
    for round in 0..cfg.rounds {
        let seed = cfg.seed.wrapping_add(round as u64);
        let model = TactileSgNet::new(network.clone(), graph.clone(), seed)?;
        let round_cfg = TrainConfig { seed, ..cfg.clone() };
        let (model, metrics) = train(model, &train_set, &test_set, &round_cfg)?;
        let result = RoundResult { round, seed, model, metrics };
        on_round(&result)?;
        rounds.push(result);
    }
    Ok(RoundsSummary { train_indices, test_indices, rounds })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::events::{Sample, SpikeTensor};
    use crate::graph::{build_manual, TaxelLayout};
    use crate::network::{FeatureLayer, NetworkConfig};
    use ndarray::Array3;

    fn graph() -> TactileGraph {
        let layout = TaxelLayout::new(vec![[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]]).unwrap();
        build_manual(&layout, &[(0, 1), (1, 2)]).unwrap()
    }

    fn config() -> NetworkConfig {
        let mut c = NetworkConfig::new(2, 1);
        c.feature = FeatureLayer::TagConv { hops: 1, features: 4 };
        c.fc_sizes = vec![8, 8];
        c
    }

    /// Class 0 drives taxel 0 on every step, class 1 drives taxel 2.
    fn toy(per_class: usize) -> Dataset {
        let samples = (0..2 * per_class)
            .map(|i| {
                let label = i % 2;
                let mut data = Array3::<u8>::zeros((8, 3, 1));
                for t in 0..8 {
                    if (t + i) % 4 != 0 {
                        data[[t, 2 * label, 0]] = 1;
                    }
                }
                Sample { spikes: SpikeTensor::new(data, 0.02).unwrap(), label }
            })
            .collect();
        Dataset { samples, class_names: vec!["a".into(), "b".into()] }
    }

    #[test]
    fn zero_epochs_is_identity() {
        let model = TactileSgNet::new(config(), graph(), 1).unwrap();
        let before = model.params().clone();
        let data = toy(3);
        let cfg = TrainConfig { epochs: 0, ..Default::default() };
        let (after, metrics) = train(model, &data, &data, &cfg).unwrap();
        assert_eq!(after.params(), &before);
        assert!(metrics.epochs.is_empty() && metrics.confusion.is_none());
    }

    #[test]
    fn same_seed_same_curve() {
        let data = toy(4);
        let cfg = TrainConfig { epochs: 3, learning_rate: 1e-2, seed: 9, ..Default::default() };
        let run = || {
            let model = TactileSgNet::new(config(), graph(), 3).unwrap();
            train(model, &data, &data, &cfg).unwrap().1
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn confusion_rows_match_class_counts() {
        let data = toy(5);
        let cfg = TrainConfig { epochs: 2, learning_rate: 1e-2, ..Default::default() };
        let model = TactileSgNet::new(config(), graph(), 0).unwrap();
        let (_, metrics) = train(model, &data, &data, &cfg).unwrap();
        let c = metrics.confusion.unwrap();
        assert_eq!(c.row_sums(), vec![5, 5]);
        assert_eq!(c.accuracy(), metrics.epochs[1].test_acc);
    }

    #[test]
    fn batches_average_gradients() {
        let data = toy(2);
        let model = TactileSgNet::new(config(), graph(), 4).unwrap();
        let (_, one) = batch_gradient(&model, &data, &[0], ResetGradient::Detached).unwrap();
        let (_, two) = batch_gradient(&model, &data, &[0, 0], ResetGradient::Detached).unwrap();
        assert_eq!(one, two);
    }

    #[test]
    fn rounds_report_each_run() {
        let data = toy(5);
        let cfg = TrainConfig { epochs: 2, rounds: 2, learning_rate: 1e-2, seed: 5, ..Default::default() };
        let mut seen = Vec::new();
        let summary = run_rounds(&data, &graph(), &config(), &cfg, |r| {
            seen.push(r.seed);
            Ok(())
        })
        .unwrap();
        assert_eq!(seen, vec![5, 6]);
        assert_eq!(summary.rounds.len(), 2);
        assert_eq!(summary.train_indices.len() + summary.test_indices.len(), 10);
        assert!(summary.formatted().contains('('));
    }

    #[test]
    fn rejects_bad_config() {
        let data = toy(2);
        let model = TactileSgNet::new(config(), graph(), 0).unwrap();
        let cfg = TrainConfig { batch_size: 0, ..Default::default() };
        assert!(train(model, &data, &data, &cfg).is_err());
    }
}
