//! Training: binary cross entropy, Adam, the per-graph loop with a fixed
//! train/validation split, threshold metrics and sweep grids.
//!
//! Batch size is one graph; every number produced is a deterministic
//! function of (data, config, seed). The event split is drawn once from
//! `split_seed` and shared by all model seeds, which vary only the
//! initialization.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::graph::HitGraph;
use crate::model::{backward, forward, forward_traced, ModelConfig, ModelParams};

/// Prediction clamp applied before the logs.
pub const BCE_EPSILON: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    /// Model-initialization seeds; one training run per entry.
    pub seeds: Vec<u64>,
    pub split_ratio: f64,
    /// Decision threshold for accuracy/precision/recall.
    pub threshold: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Seed of the train/validation split, fixed across model seeds.
    pub split_seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.01,
            epochs: 10,
            seeds: vec![1, 2, 3, 4, 5],
            split_ratio: 0.5,
            threshold: 0.5,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            split_seed: 42,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.learning_rate.is_finite() || self.learning_rate <= 0.0 {
            return Err(Error::InvalidConfig("learning_rate must be > 0".into()));
        }
        if !(self.split_ratio > 0.0 && self.split_ratio < 1.0) {
            return Err(Error::InvalidConfig("split_ratio must be in (0, 1)".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::InvalidConfig("need at least one seed".into()));
        }
        if self.epochs == 0 {
            return Err(Error::InvalidConfig("epochs must be >= 1".into()));
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Loss

fn clamp_pred(e: f64) -> f64 {
    e.clamp(BCE_EPSILON, 1.0 - BCE_EPSILON)
}

/// Mean binary cross entropy with clamped predictions.
pub fn bce_loss(y: &[u8], e_hat: &[f64]) -> Result<f64> {
    if y.is_empty() {
        return Err(Error::EmptyInput("bce_loss on an empty edge set"));
    }
    if y.len() != e_hat.len() {
        return Err(Error::LengthMismatch {
            what: "bce labels vs predictions",
            expected: y.len(),
            actual: e_hat.len(),
        });
    }
    let sum: f64 = y
        .iter()
        .zip(e_hat)
        .map(|(&yi, &ei)| {
            let e = clamp_pred(ei);
            if yi == 1 {
                -e.ln()
            } else {
                -(1.0 - e).ln()
            }
        })
        .sum();
    Ok(sum / y.len() as f64)
}

/// Loss and dL/dê. The clamp makes the loss constant outside
/// [ε, 1-ε], so the gradient there is exactly zero.
pub fn bce_loss_grad(y: &[u8], e_hat: &[f64]) -> Result<(f64, Vec<f64>)> {
    let loss = bce_loss(y, e_hat)?;
    let n = y.len() as f64;
    let grad = y
        .iter()
        .zip(e_hat)
        .map(|(&yi, &ei)| {
            if !(BCE_EPSILON..=1.0 - BCE_EPSILON).contains(&ei) {
                0.0
            } else if yi == 1 {
                -1.0 / (ei * n)
            } else {
                1.0 / ((1.0 - ei) * n)
            }
        })
        .collect();
    Ok((loss, grad))
}

// ---------------------------------------------------------------------------
// Adam

/// First/second moment accumulators of the Adam optimizer.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
}

impl AdamState {
    pub fn new(n_params: usize) -> Self {
        AdamState {
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
            t: 0,
        }
    }
}

/// One bias-corrected Adam update in place.
pub fn adam_step(
    params: &mut [f64],
    grads: &[f64],
    state: &mut AdamState,
    cfg: &TrainConfig,
) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.m.len() {
        return Err(Error::LengthMismatch {
            what: "adam parameter/gradient/state",
            expected: params.len(),
            actual: grads.len().min(state.m.len()),
        });
    }
    if let Some(idx) = grads.iter().position(|g| !g.is_finite()) {
        return Err(Error::NonFinite(format!(
            "gradient component {} is {}",
            idx, grads[idx]
        )));
    }
    state.t += 1;
    let bc1 = 1.0 - cfg.beta1.powi(state.t as i32);
    let bc2 = 1.0 - cfg.beta2.powi(state.t as i32);
    for i in 0..params.len() {
        state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * grads[i];
        state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * grads[i] * grads[i];
        let m_hat = state.m[i] / bc1;
        let v_hat = state.v[i] / bc2;
        params[i] -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.epsilon);
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Metrics

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub loss: f64,
    pub accuracy: f64,
    /// Undefined when nothing is predicted positive.
    pub precision: Option<f64>,
    /// Undefined when there are no positive labels.
    pub recall: Option<f64>,
    /// Undefined on a single-class edge set.
    pub auc: Option<f64>,
}

/// Trapezoidal ROC area; ties between scores count half, matching the
/// pair-counting definition. `None` when only one class is present.
pub fn auc(scores: &[f64], labels: &[u8]) -> Option<f64> {
    let pos = labels.iter().filter(|&&y| y == 1).count() as f64;
    let neg = labels.len() as f64 - pos;
    if pos == 0.0 || neg == 0.0 {
        return None;
    }
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).expect("finite scores"));

    let mut u = 0.0;
    let mut seen_pos = 0.0;
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        let (mut tp_g, mut fp_g) = (0.0, 0.0);
        while j < idx.len() && scores[idx[j]] == scores[idx[i]] {
            if labels[idx[j]] == 1 {
                tp_g += 1.0;
            } else {
                fp_g += 1.0;
            }
            j += 1;
        }
        // negatives in this group lose to positives above, tie within
        u += fp_g * seen_pos + 0.5 * tp_g * fp_g;
        seen_pos += tp_g;
        i = j;
    }
    Some(u / (pos * neg))
}

/// Threshold metrics plus AUC over a pooled score/label set.
pub fn metrics_from_scores(scores: &[f64], labels: &[u8], threshold: f64) -> Result<EpochMetrics> {
    if scores.is_empty() {
        return Err(Error::EmptyInput("metrics on an empty edge set"));
    }
    let loss = bce_loss(labels, scores)?;
    let mut tp = 0usize;
    let mut tn = 0usize;
    let mut fp = 0usize;
    let mut fnn = 0usize;
    for (&s, &y) in scores.iter().zip(labels) {
        let pred = s >= threshold;
        match (pred, y == 1) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fnn += 1,
            (false, false) => tn += 1,
        }
    }
    let accuracy = (tp + tn) as f64 / scores.len() as f64;
    let precision = if tp + fp > 0 {
        Some(tp as f64 / (tp + fp) as f64)
    } else {
        None
    };
    let recall = if tp + fnn > 0 {
        Some(tp as f64 / (tp + fnn) as f64)
    } else {
        None
    };
    Ok(EpochMetrics {
        loss,
        accuracy,
        precision,
        recall,
        auc: auc(scores, labels),
    })
}

/// Runs the model over a set of graphs and pools all edges into one metric
/// set (each edge weighted equally).
pub fn evaluate(graphs: &[&HitGraph], params: &ModelParams, threshold: f64) -> Result<EpochMetrics> {
    let mut scores = Vec::new();
    let mut labels = Vec::new();
    for g in graphs {
        scores.extend(forward(g, params)?);
        labels.extend_from_slice(&g.y);
    }
    metrics_from_scores(&scores, &labels, threshold)
}

// ---------------------------------------------------------------------------
// Training loop

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train: EpochMetrics,
    pub valid: EpochMetrics,
}

/// Per-seed training history. `initial` holds the untrained (epoch 0)
/// evaluation; `history` has exactly `epochs` entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainRecord {
    pub seed: u64,
    pub initial: EpochRecord,
    pub history: Vec<EpochRecord>,
    pub best_valid_loss: f64,
    pub best_epoch: usize,
    /// Informational only; never written into artifacts.
    pub wall_clock_secs: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub record: TrainRecord,
    /// Parameters at the best-validation epoch.
    pub best_params: ModelParams,
}

/// Seeded shuffle split of `n` graphs into disjoint train/validation index
/// sets covering everything; both sides are guaranteed non-empty.
pub fn split_indices(n: usize, split_ratio: f64, split_seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(split_seed);
    idx.shuffle(&mut rng);
    let n_train = ((n as f64 * split_ratio).round() as usize).clamp(1, n - 1);
    let valid = idx.split_off(n_train);
    (idx, valid)
}

fn format_opt(v: Option<f64>) -> String {
    match v {
        Some(x) => format!("{}", x),
        None => "nan".to_string(),
    }
}

/// CSV rows `epoch,split,loss,accuracy,precision,recall,auc`, including the
/// untrained epoch-0 evaluation.
pub fn train_record_csv(record: &TrainRecord) -> String {
    let mut out = String::from("epoch,split,loss,accuracy,precision,recall,auc\n");
    let row = |epoch: usize, split: &str, m: &EpochMetrics, out: &mut String| {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            epoch,
            split,
            m.loss,
            m.accuracy,
            format_opt(m.precision),
            format_opt(m.recall),
            format_opt(m.auc)
        )
        .expect("string write");
    };
    row(0, "train", &record.initial.train, &mut out);
    row(0, "valid", &record.initial.valid, &mut out);
    for r in &record.history {
        row(r.epoch, "train", &r.train, &mut out);
        row(r.epoch, "valid", &r.valid, &mut out);
    }
    out
}

/// Trains one model seed on explicit train/validation sets.
pub fn train_one_seed(
    train_graphs: &[&HitGraph],
    valid_graphs: &[&HitGraph],
    model_cfg: &ModelConfig,
    train_cfg: &TrainConfig,
    seed: u64,
) -> Result<TrainOutcome> {
    train_cfg.validate()?;
    if train_graphs.is_empty() || valid_graphs.is_empty() {
        return Err(Error::EmptyInput("training needs non-empty splits"));
    }
    let started = std::time::Instant::now();

    let mut params = ModelParams::init(model_cfg, seed)?;
    let mut flat = params.to_flat();
    let mut adam = AdamState::new(flat.len());

    let initial = EpochRecord {
        epoch: 0,
        train: evaluate(train_graphs, &params, train_cfg.threshold)?,
        valid: evaluate(valid_graphs, &params, train_cfg.threshold)?,
    };
    let mut best_valid_loss = initial.valid.loss;
    let mut best_epoch = 0usize;
    let mut best_params = params.clone();
    let mut history = Vec::with_capacity(train_cfg.epochs);

    let mut order: Vec<usize> = (0..train_graphs.len()).collect();
    for epoch in 1..=train_cfg.epochs {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(epoch as u64);
        order.shuffle(&mut rng);

        for &gi in &order {
            let graph = train_graphs[gi];
            let (e, trace) = forward_traced(graph, &params)?;
            let (_, d_e) = bce_loss_grad(&graph.y, &e)?;
            let grads = backward(graph, &params, &trace, &d_e)?;
            adam_step(&mut flat, &grads, &mut adam, train_cfg)?;
            params.set_from_flat(&flat)?;
        }

        let record = EpochRecord {
            epoch,
            train: evaluate(train_graphs, &params, train_cfg.threshold)?,
            valid: evaluate(valid_graphs, &params, train_cfg.threshold)?,
        };
        if record.valid.loss < best_valid_loss {
            best_valid_loss = record.valid.loss;
            best_epoch = epoch;
            best_params = params.clone();
        }
        history.push(record);
    }

    Ok(TrainOutcome {
        record: TrainRecord {
            seed,
            initial,
            history,
            best_valid_loss,
            best_epoch,
            wall_clock_secs: started.elapsed().as_secs_f64(),
        },
        best_params,
    })
}

/// Splits the graphs once and trains every seed in the config.
pub fn train(
    graphs: &[HitGraph],
    model_cfg: &ModelConfig,
    train_cfg: &TrainConfig,
) -> Result<Vec<TrainOutcome>> {
    train_cfg.validate()?;
    if graphs.len() < 2 {
        return Err(Error::EmptyInput("training needs at least 2 graphs"));
    }
    let (train_idx, valid_idx) = split_indices(graphs.len(), train_cfg.split_ratio, train_cfg.split_seed);
    let train_graphs: Vec<&HitGraph> = train_idx.iter().map(|&i| &graphs[i]).collect();
    let valid_graphs: Vec<&HitGraph> = valid_idx.iter().map(|&i| &graphs[i]).collect();
    train_cfg
        .seeds
        .iter()
        .map(|&seed| train_one_seed(&train_graphs, &valid_graphs, model_cfg, train_cfg, seed))
        .collect()
}

// ---------------------------------------------------------------------------
// Sweeps

/// One grid point of a sweep: a label for the varied quantity plus the full
/// model configuration.
#[derive(Debug, Clone)]
pub struct SweepPoint {
    pub label: String,
    pub config: ModelConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepPointResult {
    pub label: String,
    pub mode: String,
    pub preset: String,
    pub mean_best_loss: f64,
    pub std_best_loss: f64,
    pub best_losses: Vec<f64>,
}

/// Mean and sample standard deviation (0 for a single value).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Trains every grid point over all seeds and collects best-loss statistics.
pub fn sweep(
    graphs: &[HitGraph],
    points: &[SweepPoint],
    train_cfg: &TrainConfig,
) -> Result<Vec<SweepPointResult>> {
    points
        .iter()
        .map(|point| {
            let outcomes = train(graphs, &point.config, train_cfg)?;
            let best_losses: Vec<f64> =
                outcomes.iter().map(|o| o.record.best_valid_loss).collect();
            let (mean, std) = mean_std(&best_losses);
            Ok(SweepPointResult {
                label: point.label.clone(),
                mode: match point.config.mode {
                    crate::model::Mode::Hybrid => "hybrid".into(),
                    crate::model::Mode::Classical => "classical".into(),
                },
                preset: point.config.preset_label().to_string(),
                mean_best_loss: mean,
                std_best_loss: std,
                best_losses,
            })
        })
        .collect()
}

/// CSV table `<axis>,mode,preset,mean_best_loss,std`, one row per grid point.
pub fn sweep_csv(axis_column: &str, results: &[SweepPointResult]) -> String {
    let mut out = format!("{},mode,preset,mean_best_loss,std\n", axis_column);
    for r in results {
        writeln!(
            out,
            "{},{},{},{},{}",
            r.label, r.mode, r.preset, r.mean_best_loss, r.std_best_loss
        )
        .expect("string write");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bce_closed_forms() {
        // confident correct predictions: loss ~ 0
        let l = bce_loss(&[1, 0], &[1.0 - BCE_EPSILON, BCE_EPSILON]).unwrap();
        assert!(l < 1e-6);
        // maximally uncertain: ln 2
        let l = bce_loss(&[1, 0, 1], &[0.5, 0.5, 0.5]).unwrap();
        assert!((l - std::f64::consts::LN_2).abs() < 1e-12);
        // clamping keeps the loss finite at the boundaries
        assert!(bce_loss(&[1], &[0.0]).unwrap().is_finite());
        assert!(bce_loss(&[0], &[1.0]).unwrap().is_finite());
        assert!(bce_loss(&[], &[]).is_err());
    }

    #[test]
    fn bce_grad_matches_finite_differences() {
        let y = [1u8, 0, 1, 0, 1];
        let e = [0.3, 0.7, 0.9, 0.2, 0.5];
        let (_, grad) = bce_loss_grad(&y, &e).unwrap();
        let h = 1e-7;
        for k in 0..e.len() {
            let mut ep = e;
            ep[k] += h;
            let mut em = e;
            em[k] -= h;
            let fd = (bce_loss(&y, &ep).unwrap() - bce_loss(&y, &em).unwrap()) / (2.0 * h);
            assert!((fd - grad[k]).abs() < 1e-6, "k={}", k);
        }
    }

    #[test]
    fn adam_zero_gradient_keeps_params() {
        let cfg = TrainConfig::default();
        let mut p = vec![1.0, -2.0, 0.5];
        let mut state = AdamState::new(3);
        adam_step(&mut p, &[0.0, 0.0, 0.0], &mut state, &cfg).unwrap();
        assert_eq!(p, vec![1.0, -2.0, 0.5]);
    }

    #[test]
    fn adam_first_step_magnitude_is_lr() {
        let cfg = TrainConfig::default();
        let mut p = vec![0.0];
        let mut state = AdamState::new(1);
        adam_step(&mut p, &[0.3], &mut state, &cfg).unwrap();
        // bias-corrected first step is lr * g/(|g| + eps') ~ lr * sign(g)
        assert!((p[0] + cfg.learning_rate).abs() < 1e-6);
    }

    #[test]
    fn adam_descends_on_quadratic() {
        let cfg = TrainConfig {
            learning_rate: 0.1,
            ..TrainConfig::default()
        };
        let mut w = vec![1.0f64];
        let mut state = AdamState::new(1);
        let mut prev = w[0].abs();
        for _ in 0..10 {
            let g = vec![2.0 * w[0]];
            adam_step(&mut w, &g, &mut state, &cfg).unwrap();
            assert!(w[0].abs() < prev);
            prev = w[0].abs();
        }
    }

    #[test]
    fn adam_rejects_non_finite_gradients() {
        let cfg = TrainConfig::default();
        let mut p = vec![0.0];
        let mut state = AdamState::new(1);
        let err = adam_step(&mut p, &[f64::NAN], &mut state, &cfg).unwrap_err();
        assert!(matches!(err, Error::NonFinite(_)));
    }

    #[test]
    fn auc_reference_cases() {
        // perfect ranking
        assert_eq!(auc(&[0.9, 0.8, 0.2, 0.1], &[1, 1, 0, 0]), Some(1.0));
        // perfectly wrong
        assert_eq!(auc(&[0.1, 0.2, 0.8, 0.9], &[1, 1, 0, 0]), Some(0.0));
        // all tied: 0.5 by convention
        assert_eq!(auc(&[0.5, 0.5, 0.5, 0.5], &[1, 0, 1, 0]), Some(0.5));
        // single class undefined
        assert_eq!(auc(&[0.5, 0.6], &[1, 1]), None);
    }

    #[test]
    fn perfect_scores_are_perfect_metrics() {
        let y = [1u8, 0, 1, 0];
        let s = [1.0, 0.0, 1.0, 0.0];
        let m = metrics_from_scores(&s, &y, 0.5).unwrap();
        assert_eq!(m.accuracy, 1.0);
        assert_eq!(m.precision, Some(1.0));
        assert_eq!(m.recall, Some(1.0));
        assert_eq!(m.auc, Some(1.0));
    }

    #[test]
    fn random_scores_have_half_auc() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        use rand::Rng;
        let n = 20_000;
        let scores: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
        let labels: Vec<u8> = (0..n).map(|i| (i % 2) as u8).collect();
        let a = auc(&scores, &labels).unwrap();
        assert!((a - 0.5).abs() < 0.02);
    }

    #[test]
    fn split_is_disjoint_and_covering() {
        let (train, valid) = split_indices(101, 0.5, 42);
        assert!(!train.is_empty() && !valid.is_empty());
        let mut all: Vec<usize> = train.iter().chain(valid.iter()).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..101).collect::<Vec<_>>());
        // deterministic
        assert_eq!(split_indices(101, 0.5, 42), (train, valid));
    }

    #[test]
    fn mean_std_reference() {
        let (m, s) = mean_std(&[1.0, 2.0, 3.0]);
        assert!((m - 2.0).abs() < 1e-15);
        assert!((s - 1.0).abs() < 1e-12);
        let (m, s) = mean_std(&[4.0]);
        assert_eq!((m, s), (4.0, 0.0));
    }

    #[test]
    fn sweep_csv_schema() {
        let results = vec![SweepPointResult {
            label: "4".into(),
            mode: "hybrid".into(),
            preset: "circuit10".into(),
            mean_best_loss: 0.25,
            std_best_loss: 0.01,
            best_losses: vec![0.24, 0.26],
        }];
        let csv = sweep_csv("hidden_dim", &results);
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("hidden_dim,mode,preset,mean_best_loss,std"));
        assert_eq!(lines.next(), Some("4,hybrid,circuit10,0.25,0.01"));
    }
}
