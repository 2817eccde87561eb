//! Monte Carlo membership tests on the reduced observation model.
//!
//! After projecting every round's update onto the target's clipped gradient
//! and normalising, the adversary sees `M` scalars. Under H0 they are i.i.d.
//! N(0, 1). Under H1 a shift of 1/σ is added to exactly one uniformly chosen
//! coordinate (shuffling) or to each coordinate independently with
//! probability q (Poisson subsampling).
//!
//! Trial `i` draws its H0 vector from stream `2i` and its H1 vector from
//! stream `2i + 1` of the run seed, so results do not depend on the thread
//! count or the order in which trials are evaluated.

use std::f64::consts::SQRT_2;
use std::io::{Read, Write};

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::numerics::{ln_phi, phi};
use crate::samplers::RngSeed;

pub const DEFAULT_THRESHOLDS: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ObservationScheme {
    Shuffled,
    Poisson { q: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObservationModel {
    pub scheme: ObservationScheme,
    pub rounds: usize,
    pub sigma: f64,
}

impl ObservationModel {
    pub fn shuffled(rounds: usize, sigma: f64) -> Result<Self> {
        Self::new(ObservationScheme::Shuffled, rounds, sigma)
    }

    pub fn poisson(rounds: usize, q: f64, sigma: f64) -> Result<Self> {
        Self::new(ObservationScheme::Poisson { q }, rounds, sigma)
    }

    pub fn new(scheme: ObservationScheme, rounds: usize, sigma: f64) -> Result<Self> {
        if rounds == 0 {
            return Err(invalid("observation model: M must be >= 1"));
        }
        if !(sigma > 0.0) {
            return Err(invalid(format!(
                "observation model: sigma = {sigma} must be > 0"
            )));
        }
        if let ObservationScheme::Poisson { q } = scheme {
            if !(q > 0.0 && q < 1.0) {
                return Err(invalid(format!(
                    "observation model: q = {q} must lie in (0, 1)"
                )));
            }
        }
        Ok(Self {
            scheme,
            rounds,
            sigma,
        })
    }

    pub fn shift(&self) -> f64 {
        1.0 / self.sigma
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Hypothesis {
    H0,
    H1,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TestKind {
    /// Threshold max_j x_j.
    Max,
    /// Threshold the log-likelihood ratio of the model's own H1 against H0.
    Np,
}

/// Fills `out` (length `M`) with one observation vector.
pub fn draw_observation_into<R: Rng + ?Sized>(
    model: &ObservationModel,
    hypothesis: Hypothesis,
    rng: &mut R,
    out: &mut [f64],
) {
    debug_assert_eq!(out.len(), model.rounds);
    let shift = model.shift();
    match (hypothesis, model.scheme) {
        (Hypothesis::H0, _) => {
            for x in out.iter_mut() {
                *x = rng.sample(StandardNormal);
            }
        }
        (Hypothesis::H1, ObservationScheme::Shuffled) => {
            let hit = rng.random_range(0..model.rounds);
            for x in out.iter_mut() {
                *x = rng.sample(StandardNormal);
            }
            out[hit] += shift;
        }
        (Hypothesis::H1, ObservationScheme::Poisson { q }) => {
            for x in out.iter_mut() {
                let z: f64 = rng.sample(StandardNormal);
                *x = if rng.random_bool(q) { z + shift } else { z };
            }
        }
    }
}

pub fn draw_observation<R: Rng + ?Sized>(
    model: &ObservationModel,
    hypothesis: Hypothesis,
    rng: &mut R,
) -> Vec<f64> {
    let mut out = vec![0.0; model.rounds];
    draw_observation_into(model, hypothesis, rng, &mut out);
    out
}

pub fn max_statistic(obs: &[f64]) -> Result<f64> {
    if obs.is_empty() {
        return Err(invalid("max_statistic: empty observation"));
    }
    Ok(obs.iter().copied().fold(f64::NEG_INFINITY, f64::max))
}

/// (1/M) Σ_j exp(x_j/σ - 1/(2σ²)), the shuffled-model likelihood ratio.
/// May overflow to +inf; [`np_log_statistic`] does not.
pub fn np_statistic(obs: &[f64], m: usize, sigma: f64) -> Result<f64> {
    if obs.len() != m || m == 0 {
        return Err(invalid(format!(
            "np_statistic: observation length {} does not match M = {m}",
            obs.len()
        )));
    }
    if !(sigma > 0.0) {
        return Err(invalid(format!(
            "np_statistic: sigma = {sigma} must be > 0"
        )));
    }
    Ok(np_log_statistic(obs, sigma).exp())
}

/// ln of [`np_statistic`], by log-sum-exp.
pub fn np_log_statistic(obs: &[f64], sigma: f64) -> f64 {
    let offset = 1.0 / (2.0 * sigma * sigma);
    let top = obs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = obs.iter().map(|&x| ((x - top) / sigma).exp()).sum();
    top / sigma - offset + sum.ln() - (obs.len() as f64).ln()
}

/// ln Π_j (1 - q + q exp(x_j/σ - 1/(2σ²))), the Poisson-model likelihood ratio.
pub fn poisson_log_likelihood_ratio(obs: &[f64], q: f64, sigma: f64) -> f64 {
    let offset = 1.0 / (2.0 * sigma * sigma);
    let ln_keep = (-q).ln_1p();
    let ln_q = q.ln();
    obs.iter()
        .map(|&x| {
            let a = ln_keep;
            let b = ln_q + x / sigma - offset;
            let (hi, lo) = if a > b { (a, b) } else { (b, a) };
            hi + (lo - hi).exp().ln_1p()
        })
        .sum()
}

fn statistic(model: &ObservationModel, test: TestKind, obs: &[f64]) -> f64 {
    match (test, model.scheme) {
        (TestKind::Max, _) => obs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        (TestKind::Np, ObservationScheme::Shuffled) => np_log_statistic(obs, model.sigma),
        (TestKind::Np, ObservationScheme::Poisson { q }) => {
            poisson_log_likelihood_ratio(obs, q, model.sigma)
        }
    }
}

/// Sorted test statistics under each hypothesis.
#[derive(Debug, Clone, PartialEq)]
pub struct StatisticSample {
    pub test: TestKind,
    pub h0: Vec<f64>,
    pub h1: Vec<f64>,
}

/// One empirical trade-off point. Rejection happens when the statistic is
/// at least the threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmpiricalTradeoffPoint {
    pub threshold: f64,
    pub alpha_hat: f64,
    pub beta_hat: f64,
    pub alpha_se: f64,
    pub beta_se: f64,
    pub trials_h0: usize,
    pub trials_h1: usize,
}

fn binomial_se(p: f64, n: usize) -> f64 {
    (p * (1.0 - p) / n as f64).sqrt()
}

impl StatisticSample {
    pub fn point(&self, threshold: f64) -> EmpiricalTradeoffPoint {
        let (n0, n1) = (self.h0.len(), self.h1.len());
        let accept0 = self.h0.partition_point(|&x| x < threshold);
        let accept1 = self.h1.partition_point(|&x| x < threshold);
        let alpha_hat = (n0 - accept0) as f64 / n0 as f64;
        let beta_hat = accept1 as f64 / n1 as f64;
        EmpiricalTradeoffPoint {
            threshold,
            alpha_hat,
            beta_hat,
            alpha_se: binomial_se(alpha_hat, n0),
            beta_se: binomial_se(beta_hat, n1),
            trials_h0: n0,
            trials_h1: n1,
        }
    }

    /// Points for an ascending threshold list.
    pub fn tradeoff(&self, thresholds: &[f64]) -> Result<Vec<EmpiricalTradeoffPoint>> {
        check_thresholds(thresholds)?;
        Ok(thresholds.iter().map(|&h| self.point(h)).collect())
    }

    /// `count` thresholds at evenly spaced quantiles of the pooled statistics.
    pub fn quantile_thresholds(&self, count: usize) -> Vec<f64> {
        let pooled = merge_sorted(&self.h0, &self.h1);
        if pooled.is_empty() || count == 0 {
            return Vec::new();
        }
        let len = pooled.len();
        let mut out: Vec<f64> = (0..count)
            .map(|c| {
                let idx = (((c as f64 + 0.5) / count as f64) * len as f64) as usize;
                pooled[idx.min(len - 1)]
            })
            .collect();
        out.dedup();
        out
    }

    /// Smallest threshold whose empirical type I error is `alpha` rounded to
    /// the nearest multiple of 1/n.
    pub fn threshold_for_alpha(&self, alpha: f64) -> f64 {
        let n0 = self.h0.len();
        let k = (alpha.clamp(0.0, 1.0) * n0 as f64).round() as usize;
        match (k, self.h0.last()) {
            (_, None) => f64::INFINITY,
            (0, Some(&top)) => top.next_up(),
            _ => self.h0[n0 - k],
        }
    }
}

fn merge_sorted(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        if a[i] <= b[j] {
            out.push(a[i]);
            i += 1;
        } else {
            out.push(b[j]);
            j += 1;
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
    out
}

fn check_thresholds(thresholds: &[f64]) -> Result<()> {
    if thresholds.is_empty() {
        return Err(invalid("thresholds must be nonempty"));
    }
    if thresholds.iter().any(|h| h.is_nan()) {
        return Err(invalid("thresholds must not contain NaN"));
    }
    if thresholds.windows(2).any(|w| w[0] > w[1]) {
        return Err(invalid("thresholds must be sorted ascending"));
    }
    Ok(())
}

/// Runs `trials` H0 and `trials` H1 draws and evaluates every requested test
/// on the same observation vectors.
///
/// `threads = Some(k)` runs on a dedicated pool of `k` workers; `None` uses
/// the global rayon pool. The output is identical either way.
pub fn simulate_statistics(
    model: &ObservationModel,
    tests: &[TestKind],
    trials: usize,
    seed: u64,
    threads: Option<usize>,
) -> Result<Vec<StatisticSample>> {
    if trials == 0 {
        return Err(invalid("simulate: trials must be >= 1"));
    }
    if tests.is_empty() {
        return Err(invalid("simulate: at least one test is required"));
    }
    let run = || {
        let h0 = run_hypothesis(model, tests, Hypothesis::H0, trials, seed);
        let h1 = run_hypothesis(model, tests, Hypothesis::H1, trials, seed);
        (h0, h1)
    };
    let (h0, h1) = match threads {
        Some(k) => rayon::ThreadPoolBuilder::new()
            .num_threads(k.max(1))
            .build()
            .map_err(|e| invalid(format!("thread pool: {e}")))?
            .install(run),
        None => run(),
    };
    Ok(tests
        .iter()
        .enumerate()
        .map(|(t, &test)| StatisticSample {
            test,
            h0: column_sorted(&h0, tests.len(), t),
            h1: column_sorted(&h1, tests.len(), t),
        })
        .collect())
}

fn run_hypothesis(
    model: &ObservationModel,
    tests: &[TestKind],
    hypothesis: Hypothesis,
    trials: usize,
    seed: u64,
) -> Vec<f64> {
    let k = tests.len();
    let lane = match hypothesis {
        Hypothesis::H0 => 0,
        Hypothesis::H1 => 1,
    };
    let mut out = vec![0.0; trials * k];
    out.par_chunks_mut(k).enumerate().for_each_init(
        || vec![0.0; model.rounds],
        |buf, (i, slot)| {
            let mut rng = RngSeed::new(seed, 2 * i as u64 + lane).rng();
            draw_observation_into(model, hypothesis, &mut rng, buf);
            for (s, &test) in slot.iter_mut().zip(tests) {
                *s = statistic(model, test, buf);
            }
        },
    );
    out
}

fn column_sorted(flat: &[f64], k: usize, col: usize) -> Vec<f64> {
    let mut v: Vec<f64> = flat.iter().skip(col).step_by(k).copied().collect();
    v.sort_unstable_by(f64::total_cmp);
    v
}

#[derive(Debug, Clone, PartialEq)]
pub enum Thresholds {
    /// Evenly spaced quantiles of the pooled statistics.
    Quantiles(usize),
    Explicit(Vec<f64>),
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds::Quantiles(DEFAULT_THRESHOLDS)
    }
}

/// Empirical trade-off curve of one test. For [`TestKind::Np`] thresholds are
/// on the log-likelihood-ratio scale.
pub fn estimate_tradeoff(
    model: &ObservationModel,
    test: TestKind,
    thresholds: &Thresholds,
    trials: usize,
    seed: u64,
    threads: Option<usize>,
) -> Result<Vec<EmpiricalTradeoffPoint>> {
    if let Thresholds::Explicit(h) = thresholds {
        check_thresholds(h)?;
    }
    let sample = simulate_statistics(model, &[test], trials, seed, threads)?
        .pop()
        .expect("one test requested");
    match thresholds {
        Thresholds::Quantiles(count) => sample.tradeoff(&sample.quantile_thresholds(*count)),
        Thresholds::Explicit(h) => sample.tradeoff(h),
    }
}

/// max over points of ((1 - α̂) - β̂)/√2.
pub fn estimate_separation(points: &[EmpiricalTradeoffPoint]) -> Result<f64> {
    if points.is_empty() {
        return Err(invalid("estimate_separation: no points"));
    }
    Ok(points
        .iter()
        .map(|p| ((1.0 - p.alpha_hat) - p.beta_hat) / SQRT_2)
        .fold(f64::NEG_INFINITY, f64::max))
}

/// Exact (α, β) of the max test at threshold `h` under the shuffled model:
/// α = 1 - Φ(h)^M, β = Φ(h - 1/σ) Φ(h)^{M-1}.
pub fn max_test_closed_form(rounds: usize, sigma: f64, h: f64) -> (f64, f64) {
    let m = rounds as f64;
    let ln_phi_h = ln_phi(h);
    let alpha = -(m * ln_phi_h).exp_m1();
    let beta = phi(h - 1.0 / sigma) * ((m - 1.0) * ln_phi_h).exp();
    (alpha, beta)
}

/// CSV row: `threshold,alpha_hat,beta_hat,alpha_se,beta_se`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TradeoffRow {
    pub threshold: f64,
    pub alpha_hat: f64,
    pub beta_hat: f64,
    pub alpha_se: f64,
    pub beta_se: f64,
}

impl From<&EmpiricalTradeoffPoint> for TradeoffRow {
    fn from(p: &EmpiricalTradeoffPoint) -> Self {
        Self {
            threshold: p.threshold,
            alpha_hat: p.alpha_hat,
            beta_hat: p.beta_hat,
            alpha_se: p.alpha_se,
            beta_se: p.beta_se,
        }
    }
}

pub fn write_tradeoff_csv<W: Write>(points: &[EmpiricalTradeoffPoint], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for p in points {
        w.serialize(TradeoffRow::from(p))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_tradeoff_csv<R: Read>(input: R) -> Result<Vec<TradeoffRow>> {
    let mut r = csv::Reader::from_reader(input);
    r.deserialize()
        .map(|row| row.map_err(Error::from))
        .collect()
}
