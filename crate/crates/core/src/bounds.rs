//! Closed-form separation and privacy-parameter bounds.
//!
//! `m` is always the number of rounds in one epoch. Every formula that divides
//! by √(ln m) requires `m >= 2`; `m = 1` is rejected with a domain error.

use std::f64::consts::{E, FRAC_1_SQRT_2, PI, SQRT_2};
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{domain, invalid, Error, Result};
use crate::numerics::{ln_phi, phi};

/// Largest exponent for which `exp` stays finite.
const EXP_LIMIT: f64 = 700.0;

fn check_rounds(op: &str, m: u64) -> Result<f64> {
    if m < 2 {
        return Err(domain(format!(
            "{op}: M = {m} but M >= 2 is required (ln M must be > 0)"
        )));
    }
    Ok(m as f64)
}

fn check_probability(op: &str, name: &str, v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(domain(format!("{op}: {name} = {v} must lie in [0, 1]")))
    }
}

/// Noise multiplier below which the shuffled separation bound applies:
/// 1/√(2 ln M).
pub fn sigma_threshold(m: u64) -> Result<f64> {
    let m = check_rounds("sigma_threshold", m)?;
    Ok(1.0 / (2.0 * m.ln()).sqrt())
}

/// ε_M = 2 / (M √(4π ln M)).
pub fn epsilon_m(m: u64) -> Result<f64> {
    let mf = check_rounds("epsilon_m", m)?;
    Ok(2.0 / (mf * (4.0 * PI * mf.ln()).sqrt()))
}

/// (1/√8)(1 - 1/√(4π ln M)), optionally times (1 - ε_M).
pub fn kappa_shuf_lower(m: u64, with_correction: bool) -> Result<f64> {
    let mf = check_rounds("kappa_shuf_lower", m)?;
    let base = (1.0 - 1.0 / (4.0 * PI * mf.ln()).sqrt()) / 8f64.sqrt();
    if with_correction {
        Ok(base * (1.0 - epsilon_m(m)?))
    } else {
        Ok(base)
    }
}

/// (1 - 1/e) times the uncorrected shuffled bound.
pub fn kappa_pois_lower(m: u64) -> Result<f64> {
    Ok((1.0 - 1.0 / E) * kappa_shuf_lower(m, false)?)
}

/// The type I error where the inner argument of f_sub vanishes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AStar {
    /// a⋆ = 1 - Φ(1/σ)^M.
    pub value: f64,
    /// 1/√(4π ln M); `None` for M = 1.
    pub bound: Option<f64>,
    /// Whether σ ≤ 1/√(2 ln M), the regime in which `value <= bound` holds.
    pub bound_applies: bool,
}

impl AStar {
    pub fn within_bound(&self) -> Option<bool> {
        self.bound.map(|b| self.value <= b)
    }
}

pub fn a_star(m: u64, sigma: f64) -> Result<AStar> {
    if m == 0 {
        return Err(domain("a_star: M must be >= 1"));
    }
    if !(sigma > 0.0) {
        return Err(domain(format!("a_star: sigma = {sigma} must be > 0")));
    }
    // 1 - (1 - Φ(-1/σ))^M without cancelling the tiny tail.
    let value = -((m as f64) * (-phi(-1.0 / sigma)).ln_1p()).exp_m1();
    let (bound, bound_applies) = if m >= 2 {
        let b = 1.0 / (4.0 * PI * (m as f64).ln()).sqrt();
        (Some(b), sigma <= sigma_threshold(m)?)
    } else {
        (None, false)
    };
    let out = AStar {
        value,
        bound,
        bound_applies,
    };
    debug_assert!(!bound_applies || out.within_bound() == Some(true));
    Ok(out)
}

/// Separation of the (ε, δ)-DP curve: (e^ε - 1 + 2δ) / ((1 + e^ε) √2).
pub fn kappa_eps_delta(eps: f64, delta: f64) -> Result<f64> {
    if !(eps >= 0.0) {
        return Err(domain(format!("kappa_eps_delta: eps = {eps} must be >= 0")));
    }
    check_probability("kappa_eps_delta", "delta", delta)?;
    if eps.is_infinite() {
        return Ok(FRAC_1_SQRT_2);
    }
    Ok((eps.exp_m1() + 2.0 * delta) / ((1.0 + eps.exp()) * SQRT_2))
}

/// Smallest ε compatible with separation κ at the given δ:
/// ln((1 + κ√2 - 2δ) / (1 - κ√2)).
pub fn eps_min_from_kappa(kappa: f64, delta: f64) -> Result<f64> {
    if !(0.0..FRAC_1_SQRT_2).contains(&kappa) {
        return Err(domain(format!(
            "eps_min_from_kappa: kappa = {kappa} must satisfy 0 <= kappa < 1/sqrt(2)"
        )));
    }
    check_probability("eps_min_from_kappa", "delta", delta)?;
    let k = kappa * SQRT_2;
    Ok(((1.0 + k - 2.0 * delta) / (1.0 - k)).ln())
}

/// Closed-form separation of G_μ: (2Φ(μ/2) - 1)/√2.
pub fn sep_gaussian(mu: f64) -> Result<f64> {
    if !(mu >= 0.0) {
        return Err(domain(format!("sep_gaussian: mu = {mu} must be >= 0")));
    }
    Ok(libm::erf(mu / (2.0 * SQRT_2)) * FRAC_1_SQRT_2)
}

/// Asymptotic μ-GDP parameter of Poisson-subsampled noisy SGD after `epochs`
/// epochs of `m` rounds:
/// μ = √2 √(E/M) √(e^{σ⁻²} Φ(1.5σ⁻¹) + 3Φ(-0.5σ⁻¹) - 2).
///
/// For σ⁻² beyond the `exp` range the radicand is evaluated in log space; an
/// overflow error is returned only when μ itself is not representable.
pub fn mu_gdp_asymptotic(m: u64, epochs: f64, sigma: f64) -> Result<f64> {
    if m == 0 {
        return Err(domain("mu_gdp_asymptotic: M must be >= 1"));
    }
    if !(epochs > 0.0 && epochs.is_finite()) {
        return Err(domain(format!(
            "mu_gdp_asymptotic: E = {epochs} must be > 0"
        )));
    }
    if !(sigma > 0.0) {
        return Err(domain(format!(
            "mu_gdp_asymptotic: sigma = {sigma} must be > 0"
        )));
    }
    let inv = 1.0 / sigma;
    let inv2 = inv * inv;
    let scale = SQRT_2 * (epochs / m as f64).sqrt();
    let tail = 3.0 * phi(-0.5 * inv) - 2.0;
    if inv2 <= EXP_LIMIT {
        let radicand = inv2.exp() * phi(1.5 * inv) + tail;
        // Clamp the cancellation noise around σ⁻¹ → 0.
        let radicand = if radicand < 0.0 && radicand > -1e-15 {
            0.0
        } else {
            radicand
        };
        if radicand < 0.0 {
            return Err(domain(format!(
                "mu_gdp_asymptotic: negative radicand {radicand} at sigma = {sigma}"
            )));
        }
        return Ok(scale * radicand.sqrt());
    }
    // ln(e^{σ⁻²}Φ(1.5σ⁻¹) + tail), with tail negligible relative to the first term.
    let ln_lead = inv2 + ln_phi(1.5 * inv);
    let ln_radicand = ln_lead + (tail * (-ln_lead).exp()).ln_1p();
    let ln_mu = scale.ln() + 0.5 * ln_radicand;
    let mu = ln_mu.exp();
    if !mu.is_finite() {
        return Err(Error::Overflow(format!(
            "mu_gdp_asymptotic: mu is not representable at sigma = {sigma} (ln mu = {ln_mu})"
        )));
    }
    Ok(mu)
}

/// Gaussian-tail lower bound on sep(G_μ): 1/√2 - (2/√π) e^{-μ²/8} / μ.
/// Can be negative for small μ; never exceeds [`sep_gaussian`].
pub fn sep_tail_lower(mu: f64) -> Result<f64> {
    if !(mu > 0.0) {
        return Err(domain(format!("sep_tail_lower: mu = {mu} must be > 0")));
    }
    Ok(FRAC_1_SQRT_2 - (2.0 / PI.sqrt()) * (-mu * mu / 8.0).exp() / mu)
}

/// Explicit one-epoch separation lower bound under the schedule σ = s/√(ln M):
///
/// 1/√2 - (2/√π) exp(-M^{1/s² - 1}/16) / ((1/√2) M^{1/(2s²) - 1/2}).
///
/// Requires M^{1/s²} >= 4.
pub fn explicit_sep_lower(m: u64, s: f64) -> Result<f64> {
    let mf = check_rounds("explicit_sep_lower", m)?;
    if !(s > 0.0 && s.is_finite()) {
        return Err(domain(format!("explicit_sep_lower: s = {s} must be > 0")));
    }
    let inv_s2 = 1.0 / (s * s);
    let ln_m = mf.ln();
    if inv_s2 * ln_m < 4f64.ln() {
        return Err(domain(format!(
            "explicit_sep_lower: validity condition M^(1/s^2) >= 4 fails for M = {m}, s = {s}"
        )));
    }
    // Work with logs: exponents grow without bound as s → 0.
    let ln_num = -((inv_s2 - 1.0) * ln_m).exp() / 16.0;
    let ln_den = -0.5 * 2f64.ln() + (0.5 * inv_s2 - 0.5) * ln_m;
    let term = (2.0 / PI.sqrt()) * (ln_num - ln_den).exp();
    Ok(FRAC_1_SQRT_2 - term)
}

/// One row of the minimum-ε table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundsRow {
    #[serde(rename = "M")]
    pub m: u64,
    pub kappa_shuf: f64,
    pub eps_min_shuf: f64,
    pub kappa_pois: f64,
    pub eps_min_pois: f64,
    pub sigma_threshold: f64,
}

/// Minimum-ε table for one epoch with δ = 1/N, using the uncorrected
/// shuffled bound and its (1 - 1/e) Poisson transfer.
pub fn bounds_table(m_list: &[u64], n: u64) -> Result<Vec<BoundsRow>> {
    if n == 0 {
        return Err(invalid("bounds_table: N must be >= 1"));
    }
    let delta = 1.0 / n as f64;
    m_list
        .iter()
        .map(|&m| {
            let kappa_shuf = kappa_shuf_lower(m, false)?;
            let kappa_pois = kappa_pois_lower(m)?;
            Ok(BoundsRow {
                m,
                kappa_shuf,
                eps_min_shuf: eps_min_from_kappa(kappa_shuf, delta)?,
                kappa_pois,
                eps_min_pois: eps_min_from_kappa(kappa_pois, delta)?,
                sigma_threshold: sigma_threshold(m)?,
            })
        })
        .collect()
}

pub fn write_bounds_csv<W: Write>(rows: &[BoundsRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_bounds_csv<R: Read>(input: R) -> Result<Vec<BoundsRow>> {
    let mut r = csv::Reader::from_reader(input);
    r.deserialize()
        .map(|row| row.map_err(Error::from))
        .collect()
}

/// Rounds to `digits` decimals with ties going to the even neighbour.
pub fn round_half_even(x: f64, digits: u32) -> f64 {
    let scale = 10f64.powi(digits as i32);
    let y = x * scale;
    let r = y.round();
    let r = if (y - y.trunc()).abs() == 0.5 && r % 2.0 != 0.0 {
        r - y.signum()
    } else {
        r
    };
    r / scale
}

/// Fixed-width text rendering at printed precision: κ to 3 decimals,
/// ε to 2, σ to 2.
pub fn format_bounds_table(rows: &[BoundsRow]) -> String {
    let mut s = format!(
        "{:>10} {:>10} {:>12} {:>10} {:>12} {:>9}\n",
        "M", "kappa_shuf", "eps_min_shuf", "kappa_pois", "eps_min_pois", "sigma_thr"
    );
    for r in rows {
        s.push_str(&format!(
            "{:>10} {:>10.3} {:>12.2} {:>10.3} {:>12.2} {:>9.2}\n",
            r.m,
            round_half_even(r.kappa_shuf, 3),
            round_half_even(r.eps_min_shuf, 2),
            round_half_even(r.kappa_pois, 3),
            round_half_even(r.eps_min_pois, 2),
            round_half_even(r.sigma_threshold, 2),
        ));
    }
    s
}

/// Data behind the asymptotic-separation figures for one M.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    #[serde(rename = "M")]
    pub m: u64,
    pub s: f64,
    pub sigma: f64,
    #[serde(rename = "E")]
    pub epochs: f64,
    pub mu: f64,
    pub sep_gdp: f64,
    pub tail_lower: f64,
    /// `None` where M^(1/s²) < 4.
    pub explicit_lower: Option<f64>,
}

/// Evaluates μ, sep(G_μ), its tail bound and the explicit bound at
/// σ = s/√(ln M) for every M in `m_list`.
pub fn sweep_m(m_list: &[u64], s: f64, epochs: f64) -> Result<Vec<SweepRow>> {
    if !(s > 0.0 && s.is_finite()) {
        return Err(domain(format!("sweep_m: s = {s} must be > 0")));
    }
    m_list
        .iter()
        .map(|&m| {
            let mf = check_rounds("sweep_m", m)?;
            let sigma = s / mf.ln().sqrt();
            let mu = mu_gdp_asymptotic(m, epochs, sigma)?;
            let explicit_lower = match explicit_sep_lower(m, s) {
                Ok(v) => Some(v),
                Err(Error::Domain(_)) => None,
                Err(e) => return Err(e),
            };
            Ok(SweepRow {
                m,
                s,
                sigma,
                epochs,
                mu,
                sep_gdp: sep_gaussian(mu)?,
                tail_lower: if mu > 0.0 {
                    sep_tail_lower(mu)?
                } else {
                    f64::NEG_INFINITY
                },
                explicit_lower,
            })
        })
        .collect()
}

pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_sweep_csv<R: Read>(input: R) -> Result<Vec<SweepRow>> {
    let mut r = csv::Reader::from_reader(input);
    r.deserialize()
        .map(|row| row.map_err(Error::from))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tradeoff::TradeoffCurve;

    // Frozen from 40-digit evaluation.
    const EPS_M_1000: f64 = 2.146_627_021_669_674e-4;
    const EPS_M_2: f64 = 0.338_830_375_801_552_5;
    const KAPPA_CORR_1000: f64 = 0.315_538_278_658_067_6;
    const KAPPA_POIS_1E4: f64 = 0.202_714_748_425_816_45;
    const A_STAR_100: f64 = 0.113_432_862_188_045_93;
    const A_STAR_BOUND_100: f64 = 0.131_453_521_779_026_72;
    const MU_100_1_03: f64 = 36.581_038_608_094_36;
    const TAIL_2: f64 = 0.364_908_500_874_331;

    #[test]
    fn sigma_threshold_examples() {
        assert!((sigma_threshold(5000).unwrap() - 0.2423).abs() < 1e-4);
        assert!((sigma_threshold(23_000_000).unwrap() - 0.1717).abs() < 1e-4);
        assert!((sigma_threshold(390).unwrap() - 0.2895).abs() < 1e-4);
        assert!(matches!(sigma_threshold(1), Err(Error::Domain(_))));
        assert!(sigma_threshold(0).is_err());
    }

    #[test]
    fn epsilon_m_examples() {
        assert!((epsilon_m(1000).unwrap() - EPS_M_1000).abs() < 1e-15);
        assert!((epsilon_m(2).unwrap() - EPS_M_2).abs() < 1e-14);
        let mut prev = f64::INFINITY;
        for m in [2u64, 3, 10, 100, 1000, 10_u64.pow(6), 10_u64.pow(9)] {
            let e = epsilon_m(m).unwrap();
            assert!(e < prev);
            prev = e;
        }
        assert!(epsilon_m(1).is_err());
    }

    #[test]
    fn kappa_shuf_examples() {
        assert!((kappa_shuf_lower(1000, false).unwrap() - 0.316).abs() < 5e-4);
        assert!((kappa_shuf_lower(5_000_000, false).unwrap() - 0.328).abs() < 5e-4);
        assert!((kappa_shuf_lower(1000, true).unwrap() - KAPPA_CORR_1000).abs() < 1e-14);
        assert!(kappa_shuf_lower(1, true).is_err());
    }

    #[test]
    fn kappa_shuf_increasing_and_bounded() {
        let mut prev = 0.0;
        let mut m = 2u64;
        while m < 10_u64.pow(12) {
            let k = kappa_shuf_lower(m, false).unwrap();
            assert!(k > prev && k < 1.0 / 8f64.sqrt());
            prev = k;
            m = m * 3 / 2 + 1;
        }
    }

    #[test]
    fn kappa_pois_examples() {
        assert!((kappa_pois_lower(1000).unwrap() - 0.200).abs() < 5e-4);
        assert!((kappa_pois_lower(100_000).unwrap() - 0.205).abs() < 5e-4);
        assert!((kappa_pois_lower(10_000).unwrap() - KAPPA_POIS_1E4).abs() < 1e-14);
    }

    #[test]
    fn a_star_examples() {
        let one = a_star(1, 0.7).unwrap();
        assert!((one.value - phi(-1.0 / 0.7)).abs() < 1e-15);
        assert_eq!(one.bound, None);

        let s = sigma_threshold(100).unwrap();
        let a = a_star(100, s).unwrap();
        assert!((a.value - A_STAR_100).abs() < 1e-12);
        assert!((a.bound.unwrap() - A_STAR_BOUND_100).abs() < 1e-14);
        assert!(a.bound_applies);
        assert_eq!(a.within_bound(), Some(true));

        let big = a_star(7, 1e9).unwrap();
        assert!((big.value - (1.0 - 0.5f64.powi(7))).abs() < 1e-9);
        assert!(!big.bound_applies);
        assert!(a_star(0, 1.0).is_err());
        assert!(a_star(3, 0.0).is_err());
    }

    #[test]
    fn a_star_bound_across_decades() {
        for k in 1..=6 {
            let m = 10u64.pow(k);
            let a = a_star(m, sigma_threshold(m).unwrap()).unwrap();
            assert!(a.value <= a.bound.unwrap(), "M = {m}");
        }
    }

    #[test]
    fn kappa_eps_delta_examples() {
        assert_eq!(kappa_eps_delta(0.0, 0.0).unwrap(), 0.0);
        assert!((kappa_eps_delta(1.0, 0.0).unwrap() - 0.326_766_175_601_203).abs() < 1e-12);
        for eps in [0.5, 1.0, 2.0] {
            for delta in [0.0, 1e-8] {
                let closed = kappa_eps_delta(eps, delta).unwrap();
                let solved = TradeoffCurve::eps_delta(eps, delta)
                    .unwrap()
                    .global_separation()
                    .unwrap()
                    .kappa;
                assert!((closed - solved).abs() < 1e-8);
            }
        }
        assert!(kappa_eps_delta(-1.0, 0.0).is_err());
        assert!(kappa_eps_delta(1.0, 2.0).is_err());
    }

    #[test]
    fn eps_min_examples() {
        let d = 1e-8;
        assert!((eps_min_from_kappa(0.3156, d).unwrap() - 0.96).abs() < 5e-3);
        assert_eq!(eps_min_from_kappa(0.0, 0.0).unwrap(), 0.0);
        let back = eps_min_from_kappa(kappa_eps_delta(1.0, 0.0).unwrap(), 0.0).unwrap();
        assert!((back - 1.0).abs() < 1e-9);
        assert!(matches!(
            eps_min_from_kappa(FRAC_1_SQRT_2, 0.0),
            Err(Error::Domain(_))
        ));
        assert!(eps_min_from_kappa(-0.1, 0.0).is_err());
    }

    #[test]
    fn mu_gdp_examples() {
        assert!(mu_gdp_asymptotic(100, 1.0, 1e9).unwrap().abs() < 1e-6);
        let a = mu_gdp_asymptotic(50, 2.0, 0.7).unwrap();
        let b = mu_gdp_asymptotic(200, 8.0, 0.7).unwrap();
        assert_eq!(a, b);
        let v = mu_gdp_asymptotic(100, 1.0, 0.3).unwrap();
        assert!((v - MU_100_1_03).abs() < 1e-10 * MU_100_1_03);
    }

    #[test]
    fn mu_gdp_log_space_branch_is_continuous() {
        let s_edge = 1.0 / EXP_LIMIT.sqrt();
        let below = mu_gdp_asymptotic(1000, 1.0, s_edge * (1.0 + 1e-13)).unwrap();
        let above = mu_gdp_asymptotic(1000, 1.0, s_edge * (1.0 - 1e-13)).unwrap();
        assert!(((below - above) / below).abs() < 1e-9);
        // σ⁻² ≈ 1111 overflows exp but μ ≈ e^555 is still representable.
        assert!(mu_gdp_asymptotic(1000, 1.0, 0.03).unwrap().is_finite());
        assert!(matches!(
            mu_gdp_asymptotic(1000, 1.0, 0.01),
            Err(Error::Overflow(_))
        ));
    }

    #[test]
    fn tail_lower_examples() {
        assert!((sep_tail_lower(2.0).unwrap() - TAIL_2).abs() < 1e-14);
        assert!((sep_tail_lower(60.0).unwrap() - FRAC_1_SQRT_2).abs() < 1e-15);
        for mu in [0.5, 1.0, 2.0, 4.0, 8.0] {
            assert!(sep_tail_lower(mu).unwrap() <= sep_gaussian(mu).unwrap());
        }
        assert!(sep_tail_lower(0.0).is_err());
    }

    #[test]
    fn explicit_bound_examples() {
        let v = explicit_sep_lower(10_000, FRAC_1_SQRT_2).unwrap();
        assert!((v - FRAC_1_SQRT_2).abs() < 1e-12);
        assert!((explicit_sep_lower(100, 0.05).unwrap() - FRAC_1_SQRT_2).abs() < 1e-15);
        // M^(1/s²) = 2^(1/4) < 4.
        assert!(matches!(explicit_sep_lower(2, 2.0), Err(Error::Domain(_))));
        let mut prev = f64::NEG_INFINITY;
        for m in [10u64, 30, 100, 300, 1000, 10_000, 100_000] {
            let v = explicit_sep_lower(m, 0.9).unwrap();
            assert!(v >= prev);
            prev = v;
        }
    }

    #[test]
    fn table_rows_and_csv() {
        let rows = bounds_table(&[2, 1000, 100_000], 100_000_000).unwrap();
        let r = rows[1];
        assert!((r.kappa_shuf - 0.316).abs() < 1e-3);
        assert!((r.eps_min_shuf - 0.96).abs() < 1e-2);
        assert!((r.kappa_pois - 0.200).abs() < 1e-3);
        assert!((r.eps_min_pois - 0.58).abs() < 1e-2);
        for r in &rows {
            assert!((r.kappa_pois - (1.0 - 1.0 / E) * r.kappa_shuf).abs() < 1e-12);
            assert!(r.kappa_shuf > 0.0 && r.kappa_shuf < FRAC_1_SQRT_2);
        }
        let two = rows[0];
        assert_eq!(two.kappa_shuf, kappa_shuf_lower(2, false).unwrap());
        assert_eq!(
            two.eps_min_pois,
            eps_min_from_kappa(two.kappa_pois, 1e-8).unwrap()
        );

        let mut buf = Vec::new();
        write_bounds_csv(&rows, &mut buf).unwrap();
        assert!(
            buf.starts_with(b"M,kappa_shuf,eps_min_shuf,kappa_pois,eps_min_pois,sigma_threshold\n")
        );
        assert_eq!(read_bounds_csv(&buf[..]).unwrap(), rows);
        assert!(bounds_table(&[1000, 1], 10).is_err());
    }

    #[test]
    fn half_even_rounding() {
        assert_eq!(round_half_even(0.125, 2), 0.12);
        assert_eq!(round_half_even(0.375, 2), 0.38);
        assert_eq!(round_half_even(0.3156, 3), 0.316);
        let txt = format_bounds_table(&bounds_table(&[1000], 100_000_000).unwrap());
        assert!(txt.contains("0.316") && txt.contains("0.96") && txt.contains("0.58"));
    }

    #[test]
    fn dichotomy_chain_on_sub_curve() {
        for m in [2u64, 5, 20, 100, 1000, 100_000] {
            let thr = sigma_threshold(m).unwrap();
            for frac in [0.5, 0.9, 0.999] {
                let sigma = thr * frac;
                let a = a_star(m, sigma).unwrap();
                let curve = TradeoffCurve::sub_shuffled(m, sigma).unwrap();
                let x_prime = curve.pointwise_separation(a.value).unwrap();
                assert!(
                    x_prime >= kappa_shuf_lower(m, true).unwrap() - 1e-9,
                    "M={m} s={sigma}"
                );
            }
        }
    }

    #[test]
    fn sweep_rows_csv_round_trip() {
        let rows = sweep_m(&[10, 100, 1000], FRAC_1_SQRT_2, 1.0).unwrap();
        assert_eq!(rows.len(), 3);
        let mut buf = Vec::new();
        write_sweep_csv(&rows, &mut buf).unwrap();
        assert_eq!(read_sweep_csv(&buf[..]).unwrap(), rows);
    }
}
