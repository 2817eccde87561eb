//! Standard-normal special functions and one-dimensional solvers.
//!
//! Infinities are ordinary values here: `phi(-inf) == 0`, `phi_inv(1) == inf`,
//! so curve evaluation at the ends of `[0, 1]` needs no special casing.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use crate::error::{invalid, Error, Result};

const GRID_POINTS: usize = 1024;
const GOLDEN: f64 = 0.618_033_988_749_894_9;
const MAX_BISECTIONS: usize = 400;

/// Φ(x), the standard normal CDF. NaN propagates.
pub fn phi(x: f64) -> f64 {
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

/// Standard normal density.
pub fn phi_density(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// ln Φ(x), accurate in the far lower tail where Φ(x) underflows.
pub fn ln_phi(x: f64) -> f64 {
    if x > -30.0 {
        phi(x).ln()
    } else {
        // Mills-ratio asymptotic series; relative error < 1e-12 for x < -30.
        let t = 1.0 / (x * x);
        let series = 1.0 - t + 3.0 * t * t - 15.0 * t * t * t + 105.0 * t.powi(4);
        -0.5 * x * x - (-x).ln() - 0.5 * (2.0 * PI).ln() + series.ln()
    }
}

/// Checked Φ: rejects NaN.
pub fn std_normal_cdf(x: f64) -> Result<f64> {
    if x.is_nan() {
        return Err(invalid("std_normal_cdf: argument is NaN"));
    }
    Ok(phi(x))
}

/// Checked Φ⁻¹ on `[0, 1]`, with Φ⁻¹(0) = -inf and Φ⁻¹(1) = +inf.
pub fn std_normal_cdf_inv(p: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(invalid(format!(
            "std_normal_cdf_inv: p = {p} is outside [0, 1]"
        )));
    }
    Ok(phi_inv(p))
}

/// Φ⁻¹(p). Caller guarantees `p` in `[0, 1]`.
pub fn phi_inv(p: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    if p > 0.5 {
        // 1 - p is exact here.
        return -lower_quantile(1.0 - p);
    }
    lower_quantile(p)
}

/// Φ⁻¹(1 - q) computed from the tail mass `q` directly, so that
/// arguments extremely close to 1 keep full relative precision.
pub fn phi_inv_upper(q: f64) -> f64 {
    -phi_inv(q)
}

/// Quantile for p in (0, 0.5]: AS241 starting value plus one Newton step.
fn lower_quantile(p: f64) -> f64 {
    let x = as241(p);
    if !x.is_finite() {
        return x;
    }
    let density = phi_density(x);
    if density <= 0.0 {
        return x;
    }
    x - (phi(x) - p) / density
}

/// Wichura's AS241 (PPND16) rational approximation.
#[allow(clippy::inconsistent_digit_grouping, clippy::excessive_precision)]
fn as241(p: f64) -> f64 {
    const A: [f64; 8] = [
        3.387_132_872_796_366_6,
        133.141_667_891_784_38,
        1971.590_950_306_551_4,
        13731.693_765_509_461,
        45921.953_931_549_871,
        67265.770_927_008_700,
        33430.575_583_588_128,
        2509.080_928_730_122_7,
    ];
    const B: [f64; 8] = [
        1.0,
        42.313_330_701_600_911,
        687.187_007_492_057_91,
        5394.196_021_424_751_1,
        21213.794_301_586_596,
        39307.895_800_092_711,
        28729.085_735_721_943,
        5226.495_278_852_545_9,
    ];
    const C: [f64; 8] = [
        1.423_437_110_749_683_6,
        4.630_337_846_156_545_3,
        5.769_497_221_460_691_4,
        3.647_848_324_763_204_6,
        1.270_458_252_452_368_4,
        0.241_780_725_177_450_61,
        0.022_723_844_989_269_185,
        7.745_450_142_783_414e-4,
    ];
    const D: [f64; 8] = [
        1.0,
        2.053_191_626_637_758_8,
        1.676_384_830_183_803_8,
        0.689_767_334_985_100_0,
        0.148_103_976_427_480_07,
        0.015_198_666_563_616_457,
        5.475_938_084_995_345e-4,
        1.050_750_071_644_416_8e-9,
    ];
    const E: [f64; 8] = [
        6.657_904_643_501_103_8,
        5.463_784_911_164_114_4,
        1.784_826_539_917_291_3,
        0.296_560_571_828_504_89,
        0.026_532_189_526_576_123,
        1.242_660_947_388_078_4e-3,
        2.711_555_568_743_487_6e-5,
        2.010_334_399_292_288_1e-7,
    ];
    const F: [f64; 8] = [
        1.0,
        0.599_832_206_555_887_94,
        0.136_929_880_922_735_81,
        0.014_875_361_290_850_615,
        7.868_691_311_456_132_6e-4,
        1.846_318_317_510_054_7e-5,
        1.421_511_758_316_445_9e-7,
        2.044_263_103_389_939_8e-15,
    ];

    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        return q * horner(&A, r) / horner(&B, r);
    }
    let tail = if q < 0.0 { p } else { 1.0 - p };
    let r = (-tail.ln()).sqrt();
    let x = if r <= 5.0 {
        let r = r - 1.6;
        horner(&C, r) / horner(&D, r)
    } else {
        let r = r - 5.0;
        horner(&E, r) / horner(&F, r)
    };
    if q < 0.0 {
        -x
    } else {
        x
    }
}

fn horner(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
}

/// Bisection root finder on a sign-changing bracket.
///
/// Returns the midpoint of a final bracket of width at most `tol`. An exact
/// zero at either end is returned directly.
pub fn find_root<F>(f: F, lo: f64, hi: f64, tol: f64) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    if !(tol > 0.0) {
        return Err(invalid(format!("find_root: tol = {tol} must be > 0")));
    }
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(invalid(format!("find_root: bad bracket [{lo}, {hi}]")));
    }
    let (mut a, mut b) = (lo, hi);
    let (f_lo, f_hi) = (f(a), f(b));
    if f_lo == 0.0 {
        return Ok(a);
    }
    if f_hi == 0.0 {
        return Ok(b);
    }
    if !(f_lo.signum() * f_hi.signum() < 0.0) {
        return Err(Error::Bracket { lo, hi, f_lo, f_hi });
    }
    let lo_negative = f_lo < 0.0;
    for _ in 0..MAX_BISECTIONS {
        if b - a <= tol {
            break;
        }
        let mid = a + 0.5 * (b - a);
        if mid <= a || mid >= b {
            break;
        }
        let f_mid = f(mid);
        if f_mid == 0.0 {
            return Ok(mid);
        }
        if (f_mid < 0.0) == lo_negative {
            a = mid;
        } else {
            b = mid;
        }
    }
    Ok(a + 0.5 * (b - a))
}

/// Global maximizer: a 1024-interval grid scan followed by golden-section
/// refinement around the best grid point. Returns `(argmax, max)`.
///
/// NaN evaluations are treated as `-inf`.
pub fn maximize_scalar<F>(f: F, lo: f64, hi: f64, tol: f64) -> Result<(f64, f64)>
where
    F: Fn(f64) -> f64,
{
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(invalid(format!(
            "maximize_scalar: empty or non-finite interval [{lo}, {hi}]"
        )));
    }
    if !(tol > 0.0) {
        return Err(invalid(format!("maximize_scalar: tol = {tol} must be > 0")));
    }
    let eval = |x: f64| {
        let y = f(x);
        if y.is_nan() {
            f64::NEG_INFINITY
        } else {
            y
        }
    };
    let step = (hi - lo) / GRID_POINTS as f64;
    let grid = |i: usize| {
        if i == GRID_POINTS {
            hi
        } else {
            lo + step * i as f64
        }
    };

    let mut best_i = 0;
    let mut best_y = eval(lo);
    for i in 1..=GRID_POINTS {
        let y = eval(grid(i));
        if y > best_y {
            best_i = i;
            best_y = y;
        }
    }
    let mut best_x = grid(best_i);

    let mut a = grid(best_i.saturating_sub(1));
    let mut b = grid((best_i + 1).min(GRID_POINTS));
    let mut c = b - GOLDEN * (b - a);
    let mut d = a + GOLDEN * (b - a);
    let mut fc = eval(c);
    let mut fd = eval(d);
    while b - a > tol {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - GOLDEN * (b - a);
            fc = eval(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + GOLDEN * (b - a);
            fd = eval(d);
        }
        if c <= a || d >= b {
            break;
        }
    }
    let mid = a + 0.5 * (b - a);
    for (x, y) in [(c, fc), (d, fd), (mid, eval(mid))] {
        if y > best_y {
            best_x = x;
            best_y = y;
        }
    }
    Ok((best_x, best_y))
}


#[cfg(test)]
mod proptests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn round_trip(x in -6.0f64..6.0) {
            // For x > 0 the f64 value of Φ(x) is too coarse near 1, so the
            // upper half is exercised through the complementary form.
            let back = if x <= 0.0 { phi_inv(phi(x)) } else { phi_inv_upper(phi(-x)) };
            prop_assert!((back - x).abs() <= 1e-9);
        }

        #[test]
        fn symmetry(x in -8.0f64..8.0) {
            prop_assert!((phi(-x) - (1.0 - phi(x))).abs() <= 1e-14);
        }

        #[test]
        fn monotone(x in -8.0f64..8.0, dx in 0.0f64..1.0) {
            prop_assert!(phi(x + dx) >= phi(x));
        }
    }
}
