//! f-DP trade-off curves and their separation from random guessing.
//!
//! A trade-off curve maps a type I error α to the smallest achievable type II
//! error β. All curves here lie on or below the diagonal β = 1 - α, so the
//! signed gap `(1 - α - f(α)) / √2` is the Euclidean distance from the point
//! `(α, f(α))` to that diagonal.

use std::f64::consts::SQRT_2;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::numerics::{find_root, maximize_scalar, phi, phi_inv_upper};

pub const DEFAULT_ROOT_TOL: f64 = 1e-12;
pub const DEFAULT_MAX_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub enum CurveKind {
    RandomGuess,
    /// G_μ(α) = Φ(Φ⁻¹(1 - α) - μ).
    Gaussian {
        mu: f64,
    },
    /// Piecewise-linear (ε, δ)-DP curve.
    EpsDelta {
        eps: f64,
        delta: f64,
    },
    /// Curve induced by thresholding the maximum of `rounds` observations.
    SubShuffled {
        rounds: u64,
        sigma: f64,
    },
    /// p·(1 - α) + (1 - p)·base(α).
    PoissonMixture {
        base: Box<TradeoffCurve>,
        p: f64,
    },
}

/// An immutable trade-off curve plus the structural claims the separation
/// solver is allowed to rely on.
#[derive(Debug, Clone, PartialEq)]
pub struct TradeoffCurve {
    kind: CurveKind,
    symmetric: bool,
    convex: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeparationMethod {
    FixedPoint,
    Maximization,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeparationResult {
    pub kappa: f64,
    pub attaining_alpha: f64,
    pub method: SeparationMethod,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverTolerances {
    pub root: f64,
    pub maximization: f64,
}

impl Default for SolverTolerances {
    fn default() -> Self {
        Self {
            root: DEFAULT_ROOT_TOL,
            maximization: DEFAULT_MAX_TOL,
        }
    }
}

fn check_probability(name: &str, v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(invalid(format!("{name} = {v} must lie in [0, 1]")))
    }
}

impl TradeoffCurve {
    pub fn random_guess() -> Self {
        Self {
            kind: CurveKind::RandomGuess,
            symmetric: true,
            convex: true,
        }
    }

    pub fn gaussian(mu: f64) -> Result<Self> {
        if !(mu >= 0.0 && mu.is_finite()) {
            return Err(invalid(format!(
                "gaussian curve: mu = {mu} must be finite and >= 0"
            )));
        }
        Ok(Self {
            kind: CurveKind::Gaussian { mu },
            symmetric: true,
            convex: true,
        })
    }

    pub fn eps_delta(eps: f64, delta: f64) -> Result<Self> {
        if !(eps >= 0.0 && eps.is_finite()) {
            return Err(invalid(format!(
                "eps_delta curve: eps = {eps} must be finite and >= 0"
            )));
        }
        check_probability("eps_delta curve: delta", delta)?;
        Ok(Self {
            kind: CurveKind::EpsDelta { eps, delta },
            symmetric: true,
            convex: true,
        })
    }

    /// The max-statistic curve. Neither symmetry nor convexity is claimed.
    pub fn sub_shuffled(rounds: u64, sigma: f64) -> Result<Self> {
        if rounds == 0 {
            return Err(invalid("sub_shuffled curve: rounds must be >= 1"));
        }
        if !(sigma > 0.0) {
            return Err(invalid(format!(
                "sub_shuffled curve: sigma = {sigma} must be > 0"
            )));
        }
        Ok(Self {
            kind: CurveKind::SubShuffled { rounds, sigma },
            symmetric: false,
            convex: false,
        })
    }

    pub fn poisson_mixture(base: TradeoffCurve, p: f64) -> Result<Self> {
        check_probability("poisson_mixture: p", p)?;
        Ok(Self {
            kind: CurveKind::PoissonMixture {
                base: Box::new(base),
                p,
            },
            symmetric: false,
            convex: false,
        })
    }

    pub fn kind(&self) -> &CurveKind {
        &self.kind
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    pub fn is_convex(&self) -> bool {
        self.convex
    }

    pub fn eval(&self, alpha: f64) -> Result<f64> {
        check_probability("alpha", alpha)?;
        Ok(self.eval_unchecked(alpha))
    }

    /// Evaluation without the range check on α.
    pub fn eval_unchecked(&self, alpha: f64) -> f64 {
        match &self.kind {
            CurveKind::RandomGuess => 1.0 - alpha,
            CurveKind::Gaussian { mu } => phi(phi_inv_upper(alpha) - mu),
            CurveKind::EpsDelta { eps, delta } => {
                let e = eps.exp();
                let a = 1.0 - delta - e * alpha;
                let b = (1.0 - delta - alpha) / e;
                a.max(b).max(0.0)
            }
            CurveKind::SubShuffled { rounds, sigma } => sub_shuffled_eval(*rounds, *sigma, alpha),
            CurveKind::PoissonMixture { base, p } => {
                p * (1.0 - alpha) + (1.0 - p) * base.eval_unchecked(alpha)
            }
        }
    }

    pub fn pointwise_separation(&self, alpha: f64) -> Result<f64> {
        Ok(((1.0 - alpha) - self.eval(alpha)?) / SQRT_2)
    }

    /// The unique â with f(â) = â, by bisection on f(a) - a.
    pub fn fixed_point(&self) -> Result<f64> {
        self.fixed_point_with_tol(DEFAULT_ROOT_TOL)
    }

    pub fn fixed_point_with_tol(&self, tol: f64) -> Result<f64> {
        let g = |a: f64| self.eval_unchecked(a) - a;
        let (g0, g1) = (g(0.0), g(1.0));
        if !(g0 > 0.0 && g1 < 0.0) {
            return Err(Error::FixedPointNotFound(format!(
                "f(0) - 0 = {g0}, f(1) - 1 = {g1}; need a sign change on [0, 1]"
            )));
        }
        find_root(g, 0.0, 1.0, tol).map_err(|e| Error::FixedPointNotFound(e.to_string()))
    }

    /// κ = max_α (1 - α - f(α))/√2.
    ///
    /// Symmetric convex curves use the fixed-point shortcut κ = (1 - 2â)/√2;
    /// all others go through [`maximize_scalar`].
    pub fn global_separation(&self) -> Result<SeparationResult> {
        self.global_separation_with(SolverTolerances::default())
    }

    pub fn global_separation_with(&self, tol: SolverTolerances) -> Result<SeparationResult> {
        if self.symmetric && self.convex {
            let a_hat = self.fixed_point_with_tol(tol.root)?;
            Ok(SeparationResult {
                kappa: ((1.0 - 2.0 * a_hat) / SQRT_2).max(0.0),
                attaining_alpha: a_hat,
                method: SeparationMethod::FixedPoint,
            })
        } else {
            self.separation_by_maximization(tol.maximization)
        }
    }

    /// Maximization path regardless of the symmetry claim.
    pub fn separation_by_maximization(&self, tol: f64) -> Result<SeparationResult> {
        let gap = |a: f64| ((1.0 - a) - self.eval_unchecked(a)) / SQRT_2;
        let (alpha, kappa) = maximize_scalar(gap, 0.0, 1.0, tol)?;
        Ok(SeparationResult {
            kappa: kappa.max(0.0),
            attaining_alpha: alpha,
            method: SeparationMethod::Maximization,
        })
    }

    /// `points` evenly spaced α values on `[0, 1]`, endpoints included.
    pub fn sample(&self, points: usize) -> Result<Vec<CurvePoint>> {
        if points < 2 {
            return Err(invalid(format!(
                "curve sample: points = {points} must be >= 2"
            )));
        }
        let last = (points - 1) as f64;
        Ok((0..points)
            .map(|i| {
                let alpha = if i == points - 1 {
                    1.0
                } else {
                    i as f64 / last
                };
                CurvePoint {
                    alpha,
                    beta: self.eval_unchecked(alpha),
                }
            })
            .collect())
    }
}

/// f_sub(α) = Φ(Φ⁻¹((1-α)^{1/M}) - 1/σ) · (1-α)^{(M-1)/M}.
///
/// (1-α)^{1/M} is carried as its tail mass 1 - (1-α)^{1/M} = -expm1(ln(1-α)/M)
/// so large M does not cancel to 1.
fn sub_shuffled_eval(rounds: u64, sigma: f64, alpha: f64) -> f64 {
    if alpha >= 1.0 {
        return 0.0;
    }
    let log_keep = (-alpha).ln_1p();
    let m = rounds as f64;
    let tail = -(log_keep / m).exp_m1();
    let inner = phi(phi_inv_upper(tail) - 1.0 / sigma);
    if rounds == 1 {
        inner
    } else {
        inner * (log_keep * (m - 1.0) / m).exp()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub alpha: f64,
    pub beta: f64,
}

/// Writes `alpha,beta` rows at full precision.
pub fn write_curve_csv<W: Write>(points: &[CurvePoint], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for p in points {
        w.serialize(p)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_curve_csv<R: std::io::Read>(input: R) -> Result<Vec<CurvePoint>> {
    let mut r = csv::Reader::from_reader(input);
    r.deserialize()
        .map(|row| row.map_err(Error::from))
        .collect()
}
