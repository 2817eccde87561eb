//! One-epoch DP-SGD on a two-blob logistic regression task.
//!
//! The last training record is the adversary's target. Every round records
//! what a worst-case adversary sees: the noisy averaged update, the clipped
//! sum of every other batch member, and the target's clipped gradient at the
//! current (public) weights. Under zero-out adjacency the ghost dataset
//! replaces the target's gradient by zero.

use std::io::{Read, Write};

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::samplers::{poisson_sample, shuffle_sample, BatchPlan, RngSeed};

/// Fraction of the generated records held out for evaluation.
pub const HOLDOUT_FRACTION: f64 = 0.25;

/// The default synthetic task: dimensions, class distance and the DP-SGD
/// settings calibrated for it.
pub mod toy_defaults {
    pub const N: usize = 4096;
    pub const D: usize = 16;
    pub const DISTANCE: f64 = 3.0;
    pub const BATCH: usize = 8;
    pub const CLIP: f64 = 5.0;
    pub const LEARNING_RATE: f64 = 0.5;
}

const STREAM_DATA: u64 = 0;
const STREAM_PLAN: u64 = 1;
const STREAM_NOISE: u64 = 2;

#[derive(Debug, Clone, PartialEq)]
pub struct ToyDataset {
    pub features: Vec<Vec<f64>>,
    pub labels: Vec<bool>,
    pub seed: u64,
}

impl ToyDataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.first().map_or(0, Vec::len)
    }

    /// Records `0..n_train` train, the remainder is held out.
    pub fn n_train(&self) -> usize {
        self.len() - (self.len() as f64 * HOLDOUT_FRACTION).ceil() as usize
    }
}

/// Two unit-covariance Gaussian blobs centred at ±(distance/2)·e₁ with
/// exactly balanced labels in a seed-determined order.
pub fn make_synthetic_dataset(n: usize, d: usize, distance: f64, seed: u64) -> Result<ToyDataset> {
    if n < 2 || d == 0 {
        return Err(invalid(format!(
            "synthetic dataset: need n >= 2 and d >= 1 (n = {n}, d = {d})"
        )));
    }
    if !(distance >= 0.0 && distance.is_finite()) {
        return Err(invalid(format!(
            "synthetic dataset: separation distance {distance} must be finite and >= 0"
        )));
    }
    let mut rng = RngSeed::new(seed, STREAM_DATA).rng();
    let mut labels: Vec<bool> = (0..n).map(|i| i % 2 == 0).collect();
    for i in (1..n).rev() {
        let j = rng.random_range(0..=i);
        labels.swap(i, j);
    }
    let features = labels
        .iter()
        .map(|&y| {
            let mut x: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
            x[0] += if y { 0.5 * distance } else { -0.5 * distance };
            x
        })
        .collect();
    Ok(ToyDataset {
        features,
        labels,
        seed,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplerKind {
    Shuffle,
    Poisson,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub batch_size: usize,
    /// Clipping bound; `f64::INFINITY` disables clipping.
    pub clip: f64,
    pub sigma: f64,
    pub learning_rate: f64,
    pub sampler: SamplerKind,
    pub seed: u64,
    /// Replace the target's gradient by zero (the ghost neighbour).
    pub ghost_target: bool,
    /// Keep each round's noise draw in its record.
    pub retain_noise: bool,
}

impl TrainConfig {
    pub fn validate(&self, n_train: usize) -> Result<()> {
        if self.batch_size == 0 || self.batch_size > n_train {
            return Err(invalid(format!(
                "train: batch size {} must lie in [1, {n_train}]",
                self.batch_size
            )));
        }
        if !(self.clip > 0.0) {
            return Err(invalid(format!(
                "train: clip C = {} must be > 0",
                self.clip
            )));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(invalid(format!(
                "train: sigma = {} must be >= 0",
                self.sigma
            )));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(invalid(format!(
                "train: learning rate {} must be > 0",
                self.learning_rate
            )));
        }
        Ok(())
    }

    /// M = ⌊n / b⌋ for both samplers; Poisson uses q = b / n.
    pub fn rounds(&self, n_train: usize) -> usize {
        n_train / self.batch_size
    }

    pub fn batch_plan(&self, n_train: usize) -> Result<BatchPlan> {
        self.validate(n_train)?;
        let mut rng = RngSeed::new(self.seed, STREAM_PLAN).rng();
        let m = self.rounds(n_train);
        match self.sampler {
            SamplerKind::Shuffle => shuffle_sample(n_train, m, &mut rng),
            SamplerKind::Poisson => {
                let q = self.batch_size as f64 / n_train as f64;
                if q >= 1.0 {
                    return Err(invalid("train: Poisson sampling needs batch size < n"));
                }
                poisson_sample(n_train, q, m, &mut rng)
            }
        }
    }
}

/// What the adversary observes in round `round`.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundRecord {
    pub round: usize,
    /// Realised |S_j|.
    pub batch_size: usize,
    /// Divisor applied to the noisy sum: b for shuffling, the expected batch
    /// size qN for Poisson.
    pub normalizer: f64,
    pub noisy_update: Vec<f64>,
    /// Clipped gradient sum of every batch member except the target.
    pub partial_sum: Vec<f64>,
    /// Target's clipped gradient at this round's weights (zero for a ghost).
    pub target_clipped: Vec<f64>,
    pub membership: bool,
    pub noise: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    /// Feature weights followed by the bias.
    pub weights: Vec<f64>,
    pub records: Vec<RoundRecord>,
    pub test_accuracy: f64,
}

pub fn l2_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// g · min(1, C/‖g‖₂).
pub fn clip_gradient(g: &[f64], clip: f64) -> Result<Vec<f64>> {
    if !(clip > 0.0) {
        return Err(invalid(format!("clip_gradient: C = {clip} must be > 0")));
    }
    Ok(clip_unchecked(g, clip))
}

fn clip_unchecked(g: &[f64], clip: f64) -> Vec<f64> {
    let norm = l2_norm(g);
    if norm <= clip {
        return g.to_vec();
    }
    let scale = clip / norm;
    let mut out: Vec<f64> = g.iter().map(|x| x * scale).collect();
    // Rounding can leave the norm one ulp above C.
    while l2_norm(&out) > clip {
        for x in out.iter_mut() {
            *x *= 1.0 - f64::EPSILON;
        }
    }
    out
}

fn gaussian_noise<R: Rng + ?Sized>(dim: usize, std: f64, rng: &mut R) -> Vec<f64> {
    (0..dim)
        .map(|_| std * rng.sample::<f64, _>(StandardNormal))
        .collect()
}

/// (Σ g_i + z) / batch_size with z ~ N(0, (Cσ)² I). An empty gradient list
/// contributes a zero sum. σ = 0 draws no noise.
pub fn noisy_batch_update<R: Rng + ?Sized>(
    clipped: &[Vec<f64>],
    dim: usize,
    clip: f64,
    sigma: f64,
    batch_size: f64,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if !(batch_size > 0.0) {
        return Err(invalid("noisy_batch_update: batch size must be positive"));
    }
    if !(sigma >= 0.0) {
        return Err(invalid(format!(
            "noisy_batch_update: sigma = {sigma} must be >= 0"
        )));
    }
    if clipped.iter().any(|g| g.len() != dim) {
        return Err(invalid("noisy_batch_update: gradient dimension mismatch"));
    }
    let mut sum = vec![0.0; dim];
    for g in clipped {
        add_into(&mut sum, g);
    }
    if sigma > 0.0 {
        add_into(&mut sum, &gaussian_noise(dim, clip * sigma, rng));
    }
    Ok(sum.into_iter().map(|x| x / batch_size).collect())
}

fn add_into(acc: &mut [f64], v: &[f64]) {
    for (a, x) in acc.iter_mut().zip(v) {
        *a += x;
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn logit(weights: &[f64], x: &[f64]) -> f64 {
    let d = x.len();
    weights[..d].iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + weights[d]
}

/// Per-example log-loss gradient with respect to (weights, bias).
pub fn logistic_gradient(weights: &[f64], x: &[f64], y: bool) -> Vec<f64> {
    let r = sigmoid(logit(weights, x)) - if y { 1.0 } else { 0.0 };
    let mut g: Vec<f64> = x.iter().map(|v| r * v).collect();
    g.push(r);
    g
}

pub fn accuracy(weights: &[f64], data: &ToyDataset, range: std::ops::Range<usize>) -> f64 {
    let n = range.len();
    if n == 0 {
        return 0.0;
    }
    let correct = range
        .filter(|&i| (logit(weights, &data.features[i]) >= 0.0) == data.labels[i])
        .count();
    correct as f64 / n as f64
}

/// One epoch of DP-SGD over the configured batch plan.
pub fn train(data: &ToyDataset, config: &TrainConfig) -> Result<TrainOutcome> {
    let n_train = data.n_train();
    let plan = config.batch_plan(n_train)?;
    train_on_plan(data, config, &plan)
}

/// As [`train`], with an externally supplied plan over the training records.
pub fn train_on_plan(
    data: &ToyDataset,
    config: &TrainConfig,
    plan: &BatchPlan,
) -> Result<TrainOutcome> {
    let n_train = data.n_train();
    config.validate(n_train)?;
    if plan.n != n_train {
        return Err(invalid(
            "train: batch plan does not cover the training split",
        ));
    }
    let dim = data.dim() + 1;
    let target = n_train - 1;
    let normalizer = config.batch_size as f64;
    let mut noise_rng = RngSeed::new(config.seed, STREAM_NOISE).rng();
    let mut weights = vec![0.0; dim];
    let mut records = Vec::with_capacity(plan.m);

    for (round, batch) in plan.rounds.iter().enumerate() {
        let target_clipped = if config.ghost_target {
            vec![0.0; dim]
        } else {
            clip_unchecked(
                &logistic_gradient(&weights, &data.features[target], data.labels[target]),
                config.clip,
            )
        };
        let mut sum = vec![0.0; dim];
        let mut partial_sum = vec![0.0; dim];
        let mut membership = false;
        for &i in batch {
            if i == target {
                membership = true;
                add_into(&mut sum, &target_clipped);
            } else {
                let g = clip_unchecked(
                    &logistic_gradient(&weights, &data.features[i], data.labels[i]),
                    config.clip,
                );
                add_into(&mut sum, &g);
                add_into(&mut partial_sum, &g);
            }
        }
        let noise = if config.sigma > 0.0 {
            let z = gaussian_noise(dim, config.clip * config.sigma, &mut noise_rng);
            add_into(&mut sum, &z);
            Some(z)
        } else {
            None
        };
        let noisy_update: Vec<f64> = sum.iter().map(|x| x / normalizer).collect();
        for (w, u) in weights.iter_mut().zip(&noisy_update) {
            *w -= config.learning_rate * u;
        }
        records.push(RoundRecord {
            round,
            batch_size: batch.len(),
            normalizer,
            noisy_update,
            partial_sum,
            target_clipped,
            membership,
            noise: if config.retain_noise {
                Some(noise.unwrap_or_else(|| vec![0.0; dim]))
            } else {
                None
            },
        });
    }

    let test_accuracy = accuracy(&weights, data, n_train..data.len());
    Ok(TrainOutcome {
        weights,
        records,
        test_accuracy,
    })
}

/// Z_j = normalizer · G̃_j - G_j⁽⁻⁾: pure noise under the ghost dataset,
/// membership · [g]_C + noise under the real one.
pub fn reconstruct_contribution(record: &RoundRecord) -> Vec<f64> {
    record
        .noisy_update
        .iter()
        .zip(&record.partial_sum)
        .map(|(u, p)| record.normalizer * u - p)
        .collect()
}

/// Projection of Z_j onto the target's clipped direction, in units of the
/// noise standard deviation Cσ. Distributed N(membership/σ, 1) when the
/// target's gradient norm is at least C.
pub fn projected_statistic(record: &RoundRecord, clip: f64, sigma: f64) -> Option<f64> {
    let norm = l2_norm(&record.target_clipped);
    if norm == 0.0 || !(sigma > 0.0) {
        return None;
    }
    let z = reconstruct_contribution(record);
    let dot: f64 = z
        .iter()
        .zip(&record.target_clipped)
        .map(|(a, b)| a * b)
        .sum();
    Some(dot / norm / (clip * sigma))
}

/// Run-log CSV row: `round,batch_size,membership,update_norm,z_norm`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunLogRow {
    pub round: usize,
    pub batch_size: usize,
    pub membership: bool,
    pub update_norm: f64,
    pub z_norm: f64,
}

impl From<&RoundRecord> for RunLogRow {
    fn from(r: &RoundRecord) -> Self {
        Self {
            round: r.round,
            batch_size: r.batch_size,
            membership: r.membership,
            update_norm: l2_norm(&r.noisy_update),
            z_norm: l2_norm(&reconstruct_contribution(r)),
        }
    }
}

/// `accuracy_clean,accuracy_dp,sigma,M,C`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub accuracy_clean: f64,
    pub accuracy_dp: f64,
    pub sigma: f64,
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(rename = "C")]
    pub clip: f64,
}

pub fn write_run_log_csv<W: Write>(records: &[RoundRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        w.serialize(RunLogRow::from(r))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_run_log_csv<R: Read>(input: R) -> Result<Vec<RunLogRow>> {
    let mut r = csv::Reader::from_reader(input);
    r.deserialize()
        .map(|row| row.map_err(Error::from))
        .collect()
}

pub fn write_metrics_csv<W: Write>(row: &MetricsRow, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.serialize(row)?;
    w.flush()?;
    Ok(())
}

pub fn read_metrics_csv<R: Read>(input: R) -> Result<MetricsRow> {
    let mut r = csv::Reader::from_reader(input);
    r.deserialize()
        .next()
        .ok_or_else(|| invalid("metrics CSV has no data row"))?
        .map_err(Error::from)
}
