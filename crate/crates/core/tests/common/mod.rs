#![allow(dead_code)]

use sepdp::dpsgd_toy::{logistic_gradient, ToyDataset};
use sepdp::numerics::phi;
use sepdp::samplers::BatchPlan;

/// Asymptotic Kolmogorov–Smirnov p-value of `sample` against N(mean, 1).
pub fn ks_normal_pvalue(sample: &[f64], mean: f64) -> (f64, f64) {
    let mut xs: Vec<f64> = sample.to_vec();
    xs.sort_unstable_by(f64::total_cmp);
    let n = xs.len() as f64;
    let d = xs
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = phi(x - mean);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max);
    let sqrt_n = n.sqrt();
    let lambda = (sqrt_n + 0.12 + 0.11 / sqrt_n) * d;
    let mut q = 0.0;
    for k in 1..=100 {
        let k = k as f64;
        let term = 2.0 * (-2.0 * k * k * lambda * lambda).exp();
        q += if k as u64 % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (d, q.clamp(0.0, 1.0))
}

/// Mini-batch SGD on logistic loss with no clipping and no noise: the
/// update is the mean gradient over the realised batch.
pub fn plain_sgd(data: &ToyDataset, plan: &BatchPlan, lr: f64) -> Vec<f64> {
    let dim = data.dim() + 1;
    let mut w = vec![0.0; dim];
    for batch in &plan.rounds {
        let mut sum = vec![0.0; dim];
        for &i in batch {
            let g = logistic_gradient(&w, &data.features[i], data.labels[i]);
            for k in 0..dim {
                sum[k] += g[k];
            }
        }
        let b = batch.len() as f64;
        for k in 0..dim {
            w[k] -= lr * (sum[k] / b);
        }
    }
    w
}

pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Replays a run from its records and checks every per-example clipped
/// gradient: returns the largest norm seen and whether each round's
/// non-target sum matches the recorded one bit for bit.
pub fn replay_clipping(data: &ToyDataset, config: &sepdp::dpsgd_toy::TrainConfig) -> (f64, bool) {
    use sepdp::dpsgd_toy::{clip_gradient, l2_norm, train};
    let n_train = data.n_train();
    let plan = config.batch_plan(n_train).unwrap();
    let outcome = train(data, config).unwrap();
    let dim = data.dim() + 1;
    let target = n_train - 1;
    let mut w = vec![0.0; dim];
    let mut max_norm: f64 = 0.0;
    let mut sums_match = true;
    for (batch, rec) in plan.rounds.iter().zip(&outcome.records) {
        let mut partial = vec![0.0; dim];
        for &i in batch {
            let g = clip_gradient(
                &logistic_gradient(&w, &data.features[i], data.labels[i]),
                config.clip,
            )
            .unwrap();
            max_norm = max_norm.max(l2_norm(&g));
            if i != target {
                for k in 0..dim {
                    partial[k] += g[k];
                }
            }
        }
        max_norm = max_norm.max(l2_norm(&rec.target_clipped));
        sums_match &= partial == rec.partial_sum;
        for (wk, u) in w.iter_mut().zip(&rec.noisy_update) {
            *wk -= config.learning_rate * u;
        }
    }
    sums_match &= w == outcome.weights;
    (max_norm, sums_match)
}

/// Projected statistics from many small shuffled runs whose clip bound is
/// far below every gradient norm, split by the target's membership.
pub fn projection_samples(members_wanted: usize, sigma: f64) -> (Vec<f64>, Vec<f64>) {
    use sepdp::dpsgd_toy::{
        make_synthetic_dataset, projected_statistic, train, SamplerKind, TrainConfig,
    };
    let clip = 0.01;
    let mut members = Vec::with_capacity(members_wanted);
    let mut others = Vec::new();
    let mut seed = 0u64;
    while members.len() < members_wanted {
        let data = make_synthetic_dataset(40, 2, 2.0, seed).unwrap();
        let config = TrainConfig {
            batch_size: 4,
            clip,
            sigma,
            learning_rate: 0.1,
            sampler: SamplerKind::Shuffle,
            seed,
            ghost_target: false,
            retain_noise: false,
        };
        for rec in train(&data, &config).unwrap().records {
            let t = projected_statistic(&rec, clip, sigma).unwrap();
            if rec.membership {
                if members.len() < members_wanted {
                    members.push(t);
                }
            } else {
                others.push(t);
            }
        }
        seed += 1;
    }
    (members, others)
}
