//! Stage-1 expected payoffs J_i(m_i, m_j) and their first and second
//! derivatives in m_i, in closed form, for both regimes.
//!
//! Sharing:
//!
//! ```text
//! J = (sigma_hat + a^2) / (9b) - h(m_i),   sigma_hat = sigma^2 (m_i + m_j) / k0
//! dJ/dm_i   = (sigma^2 / 9b) (-m_j^2) / k0^2 + 1 / (m_i ln alpha)
//! d2J/dm_i2 = (sigma^2 / 9b) 2 m_j^2 (sigma + m_j) / k0^3 - 1 / (m_i^2 ln alpha)
//! ```
//!
//! where k0 = (sigma + m_i)(sigma + m_j) - sigma^2.
//!
//! Non-sharing, with x_i = sigma + m_i, x_j = sigma + m_j and
//! D = 4 x_i x_j - sigma^2:
//!
//! ```text
//! J = a^2 / (9b) + sigma^2 (2 x_j - sigma)^2 x_i / (b D^2) - h(m_i)
//! dJ/dm_i   = 1 / ((x_i - sigma) ln alpha) - (sigma^2 / b) f1 f2
//! d2J/dm_i2 = -1 / (m_i^2 ln alpha)
//!             + (16 sigma^2 / b) x_j (2 x_i x_j + sigma^2) (2 x_j - sigma)^2 / D^4
//! ```
//!
//! with f1 = (4 x_i x_j + sigma^2) / D and f2 = (2 x_j - sigma)^2 / D^2.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::market::{check_noise, investment_cost, InfoTech, MarketParams, Regime};

/// The helper quantities the non-sharing marginal is written in.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarginalHelpers {
    pub x_i: f64,
    pub x_j: f64,
    /// (4 x_j x_i + sigma^2) / (4 x_j x_i - sigma^2), always > 1.
    pub f1: f64,
    /// (2 x_j - sigma)^2 / (4 x_j x_i - sigma^2)^2.
    pub f2: f64,
}

impl MarginalHelpers {
    pub fn new(sigma: f64, m_i: f64, m_j: f64) -> Self {
        let x_i = sigma + m_i;
        let x_j = sigma + m_j;
        let d = 4.0 * x_i * x_j - sigma * sigma;
        MarginalHelpers {
            x_i,
            x_j,
            f1: (4.0 * x_i * x_j + sigma * sigma) / d,
            f2: (2.0 * x_j - sigma).powi(2) / (d * d),
        }
    }
}

/// A regime-tagged payoff surface on (0, m0] x (0, m0].
#[derive(Debug, Clone, Copy)]
pub struct PayoffSurface {
    pub regime: Regime,
    pub params: MarketParams,
    pub tech: InfoTech,
}

impl PayoffSurface {
    pub fn new(regime: Regime, params: MarketParams, tech: InfoTech) -> Result<Self> {
        params.require_identical_products()?;
        Ok(PayoffSurface { regime, params, tech })
    }

    pub fn payoff(&self, m_i: f64, m_j: f64) -> Result<f64> {
        match self.regime {
            Regime::Sharing => payoff_sharing(m_i, m_j, &self.params, &self.tech),
            Regime::NonSharing => payoff_nonsharing(m_i, m_j, &self.params, &self.tech),
        }
    }

    pub fn marginal(&self, m_i: f64, m_j: f64) -> Result<f64> {
        match self.regime {
            Regime::Sharing => marginal_sharing(m_i, m_j, &self.params, &self.tech),
            Regime::NonSharing => marginal_nonsharing(m_i, m_j, &self.params, &self.tech),
        }
    }

    pub fn second_derivative(&self, m_i: f64, m_j: f64) -> Result<f64> {
        match self.regime {
            Regime::Sharing => second_derivative_sharing(m_i, m_j, &self.params, &self.tech),
            Regime::NonSharing => second_derivative_nonsharing(m_i, m_j, &self.params, &self.tech),
        }
    }
}

fn check_point(m_i: f64, m_j: f64, tech: &InfoTech) -> Result<()> {
    check_noise(m_i, tech)?;
    check_noise(m_j, tech)
}

/// Expected stage-1 payoff of insurer i under mandatory sharing.
pub fn payoff_sharing(m_i: f64, m_j: f64, params: &MarketParams, tech: &InfoTech) -> Result<f64> {
    check_point(m_i, m_j, tech)?;
    let sigma = tech.sigma;
    let k0 = sigma * (m_i + m_j) + m_i * m_j;
    let sigma_hat = sigma * sigma * (m_i + m_j) / k0;
    Ok((sigma_hat + params.a * params.a) / (9.0 * params.b) - investment_cost(m_i, tech)?)
}

/// Expected stage-1 payoff of insurer i when signals are private.
pub fn payoff_nonsharing(m_i: f64, m_j: f64, params: &MarketParams, tech: &InfoTech) -> Result<f64> {
    check_point(m_i, m_j, tech)?;
    let sigma = tech.sigma;
    let x_i = sigma + m_i;
    let x_j = sigma + m_j;
    let d = sigma * sigma - 4.0 * x_i * x_j;
    let info_term = sigma * sigma * (2.0 * x_j - sigma).powi(2) * x_i / (params.b * d * d);
    Ok(params.a * params.a / (9.0 * params.b) + info_term - investment_cost(m_i, tech)?)
}

/// dJ/dm_i under sharing. Diverges to +infinity as m_i -> 0 (the log-cost pole).
pub fn marginal_sharing(m_i: f64, m_j: f64, params: &MarketParams, tech: &InfoTech) -> Result<f64> {
    check_point(m_i, m_j, tech)?;
    let sigma = tech.sigma;
    let k0 = sigma * (m_i + m_j) + m_i * m_j;
    Ok(sigma * sigma / (9.0 * params.b) * (-m_j * m_j) / (k0 * k0)
        + 1.0 / (m_i * tech.ln_alpha()))
}

/// d2J/dm_i2 under sharing.
pub fn second_derivative_sharing(
    m_i: f64,
    m_j: f64,
    params: &MarketParams,
    tech: &InfoTech,
) -> Result<f64> {
    check_point(m_i, m_j, tech)?;
    let sigma = tech.sigma;
    let k0 = sigma * (m_i + m_j) + m_i * m_j;
    Ok(sigma * sigma / (9.0 * params.b) * 2.0 * m_j * m_j * (sigma + m_j) / k0.powi(3)
        - 1.0 / (m_i * m_i * tech.ln_alpha()))
}

/// dJ/dm_i under no sharing, written through [`MarginalHelpers`].
pub fn marginal_nonsharing(
    m_i: f64,
    m_j: f64,
    params: &MarketParams,
    tech: &InfoTech,
) -> Result<f64> {
    check_point(m_i, m_j, tech)?;
    let sigma = tech.sigma;
    let h = MarginalHelpers::new(sigma, m_i, m_j);
    Ok(1.0 / ((h.x_i - sigma) * tech.ln_alpha()) - sigma * sigma / params.b * h.f1 * h.f2)
}

/// d2J/dm_i2 under no sharing.
pub fn second_derivative_nonsharing(
    m_i: f64,
    m_j: f64,
    params: &MarketParams,
    tech: &InfoTech,
) -> Result<f64> {
    check_point(m_i, m_j, tech)?;
    let sigma = tech.sigma;
    let x_i = sigma + m_i;
    let x_j = sigma + m_j;
    let d = 4.0 * x_i * x_j - sigma * sigma;
    Ok(-1.0 / (m_i * m_i * tech.ln_alpha())
        + 16.0 * sigma * sigma / params.b * x_j * (2.0 * x_i * x_j + sigma * sigma)
            * (2.0 * x_j - sigma).powi(2)
            / d.powi(4))
}

/// Sign-determining factor of the non-sharing second derivative on the FOC
/// locus: g = 16 x_j (sigma^2 + 2 x_i x_j)(x_i - sigma) - (4 x_i x_j + sigma^2)(4 x_i x_j - sigma^2).
/// On points satisfying dJ/dm_i = 0, d2J/dm_i2 has the sign of g.
pub fn nonsharing_soc_factor(m_i: f64, m_j: f64, sigma: f64) -> f64 {
    let x_i = sigma + m_i;
    let x_j = sigma + m_j;
    16.0 * x_j * (sigma * sigma + 2.0 * x_i * x_j) * (x_i - sigma)
        - (4.0 * x_i * x_j + sigma * sigma) * (4.0 * x_i * x_j - sigma * sigma)
}
