//! Stage-2 optimal production rules and the interim payoff W.
//!
//! The stage-2 best reply is q_i = (a - b E[q_j | t_i] - E[C | t_i]) / (2b),
//! which specializes to
//!
//! ```text
//! sharing:     q(t)   = (a - pooled_estimate) / (3b)       (both insurers)
//! non-sharing: q(Z_i) = alpha0 + alpha1 Z_i                (affine rule)
//! ```
//!
//! with alpha0 = a / (3b) and alpha1 the fixed point of the two-equation
//! system alpha1_i = -delta_i (1 + b alpha1_j) / (2b). Substituting the
//! optimal rule back, the interim payoff collapses to b q^2 - h.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market::MarketParams;

/// Production rule under mandatory sharing: q = (a - pooled estimate) / (3b).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SharingRule {
    pub a: f64,
    pub b: f64,
}

impl SharingRule {
    pub fn new(params: &MarketParams) -> Result<Self> {
        params.require_identical_products()?;
        Ok(SharingRule { a: params.a, b: params.b })
    }

    pub fn quantity(&self, pooled_est: f64) -> f64 {
        (self.a - pooled_est) / (3.0 * self.b)
    }
}

/// Affine production rule of one insurer under no sharing: q = alpha0 + alpha1 z.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AffineRule {
    /// Intercept a / (3b).
    pub alpha0: f64,
    /// Signal loading; negative for all positive variances.
    pub alpha1: f64,
}

impl AffineRule {
    pub fn quantity(&self, z: f64) -> f64 {
        self.alpha0 + self.alpha1 * z
    }
}

/// Best reply of the stage-2 Cournot game given the conditional expectations:
/// (a - b expected_rival_q - cost_estimate) / (2b). Unique maximizer since the
/// second derivative of the expected profit is -2b < 0.
pub fn best_reply_quantity(expected_rival_q: f64, cost_estimate: f64, params: &MarketParams) -> f64 {
    (params.a - params.b * expected_rival_q - cost_estimate) / (2.0 * params.b)
}

/// Sharing-regime quantity: both insurers produce (a - pooled_est) / (3b).
pub fn sharing_quantity(pooled_est: f64, params: &MarketParams) -> f64 {
    (params.a - pooled_est) / (3.0 * params.b)
}

/// Closed-form affine coefficients for insurer i under no sharing:
///
/// ```text
/// alpha0 = a / (3b)
/// alpha1 = sigma (2 (sigma + m_j) - sigma) / (b (sigma^2 - 4 (sigma + m_i)(sigma + m_j)))
/// ```
pub fn nonsharing_coefficients(
    sigma: f64,
    m_i: f64,
    m_j: f64,
    params: &MarketParams,
) -> Result<AffineRule> {
    params.require_identical_products()?;
    if !(sigma > 0.0 && m_i > 0.0 && m_j > 0.0) {
        return Err(Error::domain(format!(
            "nonsharing_coefficients requires positive variances, got sigma = {sigma}, m_i = {m_i}, m_j = {m_j}"
        )));
    }
    let b = params.b;
    let denom = sigma * sigma - 4.0 * (sigma + m_i) * (sigma + m_j);
    // denom = sigma^2 - 4 x_i x_j < -3 sigma^2 for positive variances;
    // the guard only fires on degenerate floating-point input.
    if denom == 0.0 {
        return Err(Error::domain("affine-rule denominator is zero".to_string()));
    }
    let alpha1 = sigma * (2.0 * (sigma + m_j) - sigma) / (b * denom);
    Ok(AffineRule { alpha0: params.a / (3.0 * b), alpha1 })
}

/// Evaluate the affine rule at a signal realization.
pub fn nonsharing_quantity(z_i: f64, rule: &AffineRule) -> f64 {
    rule.quantity(z_i)
}

/// Interim payoff of the stage-2 game at the optimal rule: b q^2 - h.
pub fn interim_payoff(q: f64, h: f64, params: &MarketParams) -> f64 {
    params.b * q * q - h
}

/// Residuals of the affine fixed-point system
/// alpha0_i = (a - b alpha0_j) / (2b), alpha1_i = -delta_i (1 + b alpha1_j) / (2b),
/// evaluated at the closed-form coefficients of both insurers. Used by tests
/// and certification; both components vanish for a correct solution.
pub fn affine_fixed_point_residual(
    sigma: f64,
    m_i: f64,
    m_j: f64,
    params: &MarketParams,
) -> Result<(f64, f64)> {
    let rule_i = nonsharing_coefficients(sigma, m_i, m_j, params)?;
    let rule_j = nonsharing_coefficients(sigma, m_j, m_i, params)?;
    let b = params.b;
    let delta_i = sigma / (sigma + m_i);
    let r0 = rule_i.alpha0 - (params.a - b * rule_j.alpha0) / (2.0 * b);
    let r1 = rule_i.alpha1 - (-delta_i * (1.0 + b * rule_j.alpha1) / (2.0 * b));
    Ok((r0, r1))
}
