//! Power regularization schedules `λₙ = c·n^(−γ)` and their validity under
//! the consistency conditions.
//!
//! For power schedules every limit condition reduces to the sign of an
//! exponent, so verdicts are decided in exact rational arithmetic.

use num_rational::Rational64;
use num_traits::{Signed, Zero};

use crate::error::{Error, Result};
use crate::kernel::KernelSpec;
use crate::linalg;
use crate::loss::{LossFamily, LossSpec};
use crate::mixing::{self, Coefficient};
use crate::par::Execution;
use crate::process::MarkovChain;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScheduleSpec {
    pub c: f64,
    pub gamma: Rational64,
}

impl ScheduleSpec {
    pub fn new(c: f64, gamma: Rational64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::param("c", format!("must be positive and finite, got {c}")));
        }
        if gamma.is_negative() {
            return Err(Error::param("gamma", format!("must be >= 0, got {gamma}")));
        }
        Ok(Self { c, gamma })
    }

    /// `λₙ = c·n^(−γ)`.
    pub fn lambda(&self, n: usize) -> f64 {
        assert!(n >= 1, "schedules start at n = 1");
        self.c * (n as f64).powf(-to_f64(self.gamma))
    }

    pub fn is_null_sequence(&self) -> bool {
        self.gamma > Rational64::zero()
    }
}

pub fn to_f64(r: Rational64) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

/// `B_λ = ‖k‖∞ · √(c/λ)`, the a priori sup-norm radius of SVM solutions.
pub fn b_lambda(k_sup: f64, c_loss: f64, lambda: f64) -> Result<f64> {
    if !(k_sup > 0.0 && c_loss > 0.0 && lambda > 0.0) {
        return Err(Error::param("b_lambda", "inputs must be positive"));
    }
    Ok(k_sup * (c_loss / lambda).sqrt())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Verdict {
    pub valid: bool,
    /// The smallest margin among the exponent conditions; the schedule is
    /// valid iff it is positive and `γ > 0`.
    pub limiting_exponent: Rational64,
    pub binding_condition: String,
}

const NULL_SEQUENCE: &str = "lambda_n -> 0 (gamma > 0)";

fn check_unit(name: &'static str, v: Rational64) -> Result<()> {
    if v <= Rational64::zero() || v > Rational64::from_integer(1) {
        return Err(Error::param(name, format!("must lie in (0, 1], got {v}")));
    }
    Ok(())
}

/// Verdict for a locally Lipschitz loss with finite `sup_y L(y, 0)`:
/// `|L|⁴_{B_λ,1} / (λₙ² n^α) → 0`.
///
/// With `|L|_{B,1} ~ B^g` and `B_λ ~ λ^(−1/2)` the ratio behaves like
/// `n^(2γ(1+g) − α)`, so the margin is `α − 2γ(1 + g)`.
pub fn validate_classification(
    s: &ScheduleSpec,
    loss: &LossSpec,
    k: &KernelSpec,
    domain_bound: Option<f64>,
    alpha: Rational64,
) -> Result<Verdict> {
    check_unit("alpha", alpha)?;
    if !loss.sup_at_zero().is_finite() {
        return Err(Error::Unsupported(format!(
            "loss `{}` has unbounded L(y, 0) on its label range",
            loss.name()
        )));
    }
    if !k.sup_norm(domain_bound)?.is_finite() {
        return Err(Error::UnboundedKernel);
    }
    let g = Rational64::from_integer(loss.lip_growth() as i64);
    let two = Rational64::from_integer(2);
    let margin = alpha - two * s.gamma * (Rational64::from_integer(1) + g);
    let binding = if g.is_zero() {
        "lambda_n^2 n^alpha -> inf"
    } else {
        "|L|_{B,1}^4 / (lambda_n^2 n^alpha) -> 0"
    };
    Ok(verdict(s, vec![(margin, binding.to_string())]))
}

/// Verdict for a distance-based loss of growth type `p ∈ [1, 2]`:
/// `λₙ^p n^(2α) → ∞` and `λₙ^(2p) n^β → ∞`.
pub fn validate_regression(s: &ScheduleSpec, p: Rational64, alpha: Rational64, beta: Rational64) -> Result<Verdict> {
    if p < Rational64::from_integer(1) || p > Rational64::from_integer(2) {
        return Err(Error::param("p", format!("growth type must lie in [1, 2], got {p}")));
    }
    check_unit("alpha", alpha)?;
    check_unit("beta", beta)?;
    let two = Rational64::from_integer(2);
    Ok(verdict(
        s,
        vec![
            (two * alpha - p * s.gamma, "lambda_n^p n^(2 alpha) -> inf".into()),
            (beta - two * p * s.gamma, "lambda_n^(2p) n^beta -> inf".into()),
        ],
    ))
}

/// Dispatches on the loss family. Margin-based losses use the
/// classification conditions; distance-based losses the regression ones.
pub fn validate_for_loss(
    s: &ScheduleSpec,
    loss: &LossSpec,
    k: &KernelSpec,
    domain_bound: Option<f64>,
    alpha: Rational64,
    beta: Rational64,
) -> Result<Verdict> {
    match loss.family() {
        LossFamily::MarginBased => validate_classification(s, loss, k, domain_bound, alpha),
        LossFamily::DistanceBased => {
            let p = loss.growth_constants()?.p_upper;
            validate_regression(s, Rational64::approximate_float(p).expect("finite growth order"), alpha, beta)
        }
    }
}

fn verdict(s: &ScheduleSpec, conditions: Vec<(Rational64, String)>) -> Verdict {
    let (margin, binding) = conditions
        .into_iter()
        .reduce(|a, b| if b.0 < a.0 { b } else { a })
        .expect("at least one condition");
    if !s.is_null_sequence() {
        return Verdict {
            valid: false,
            limiting_exponent: margin,
            binding_condition: NULL_SEQUENCE.into(),
        };
    }
    Verdict {
        valid: margin > Rational64::zero(),
        limiting_exponent: margin,
        binding_condition: binding,
    }
}

/// Fitted decay exponents of a finite-state chain.
#[derive(Debug, Clone, PartialEq)]
pub struct MixingExponents {
    /// Exponent of the marginal-average deviation, capped at 1.
    pub alpha: f64,
    pub alpha_residual: f64,
    /// The chain starts in its invariant law, so the deviation vanishes.
    pub stationary: bool,
    /// Exponent of the α bi-mixing average, capped at 1.
    pub beta: f64,
    pub beta_residual: f64,
    /// `(n, sup_B |P_n(B) − P(B)|)`, the envelope over `[n, 2n]`.
    pub deviations: Vec<(usize, f64)>,
    /// `(n, bi-mixing average)`.
    pub bi_mixing: Vec<(usize, f64)>,
}

impl MixingExponents {
    /// The exponent valid for both decay conditions.
    pub fn combined(&self) -> f64 {
        self.alpha.min(self.beta)
    }
}

/// Least-squares slope and RMS residual of `log y` against `log x`.
pub fn log_log_fit(points: &[(usize, f64)]) -> Option<(f64, f64)> {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|(_, y)| *y > 0.0)
        .map(|(x, y)| ((*x as f64).ln(), y.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let rms = (pts.iter().map(|p| (p.1 - my - slope * (p.0 - mx)).powi(2)).sum::<f64>() / n).sqrt();
    Some((slope, rms))
}

const STATIONARY_TOL: f64 = 1e-15;

/// Estimates the decay exponents of `sup_B |(1/n) Σ μ(Zᵢ ∈ B) − P(B)|` and of
/// the α bi-mixing average over `n_grid`, from exact matrix computations.
///
/// The deviation of periodic chains vanishes at some `n` (every full period),
/// so the fit uses its envelope `max_{n ≤ m ≤ 2n}`.
pub fn mixing_exponent_from_chain(chain: &MarkovChain, n_grid: &[usize], exec: Execution) -> Result<MixingExponents> {
    if n_grid.len() < 2 || n_grid.contains(&0) {
        return Err(Error::Config("n_grid needs at least two positive sizes".into()));
    }
    let n_max = *n_grid.iter().max().unwrap();
    let pi = chain.stationary_law();
    let averages = chain.marginal_averages(2 * n_max);
    let tv: Vec<f64> = averages
        .iter()
        .map(|pn| 0.5 * pn.iter().zip(&pi).map(|(a, b)| (a - b).abs()).sum::<f64>())
        .collect();
    let deviations: Vec<(usize, f64)> = n_grid
        .iter()
        .map(|&n| (n, tv[n - 1..2 * n].iter().cloned().fold(0.0, f64::max)))
        .collect();
    let stationary = chain.is_stationary() || deviations.iter().all(|(_, d)| *d <= STATIONARY_TOL);
    let (alpha, alpha_residual) = if stationary {
        (1.0, 0.0)
    } else {
        match log_log_fit(&deviations) {
            Some((slope, res)) => ((-slope).min(1.0), res),
            None => (1.0, 0.0),
        }
    };

    let mut bi_mixing = Vec::with_capacity(n_grid.len());
    for &n in n_grid {
        let avg = if chain.is_stationary() {
            mixing::bi_mixing_average_stationary(chain, n, Coefficient::Alpha)?
        } else {
            mixing::bi_mixing_average_direct(chain, n, Coefficient::Alpha, exec)?
        };
        bi_mixing.push((n, avg));
    }
    let (beta, beta_residual) = if bi_mixing.iter().all(|(_, v)| *v <= STATIONARY_TOL) {
        (1.0, 0.0)
    } else {
        match log_log_fit(&bi_mixing) {
            Some((slope, res)) => ((-slope).min(1.0), res),
            None => (1.0, 0.0),
        }
    };
    Ok(MixingExponents {
        alpha,
        alpha_residual,
        stationary,
        beta,
        beta_residual,
        deviations,
        bi_mixing,
    })
}

/// Whether some power of the transition matrix is strictly positive; such
/// chains satisfy the Doeblin condition.
pub fn doeblin_witness(chain: &MarkovChain) -> Option<usize> {
    linalg::primitivity_index(chain.trans())
}
