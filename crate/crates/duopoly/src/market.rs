//! Primitive market model: inverse demand, investment technology and
//! realized profit.
//!
//! Two insurers offer `q_i`, `q_j` policies at the price
//!
//! ```text
//! p(q_i, q_j) = a - b q_i - d q_j
//! ```
//!
//! and face a common random marginal cost C ~ N(0, sigma). Each insurer
//! observes a private noisy signal Z_i = C + E_i with E_i ~ N(0, m_i).
//! The noise variance m_i is bought down from the baseline m0 through an
//! investment h, with m = m0 * alpha^(-h).
//!
//! Note on notation: `sigma` and the `m` values are *variances* throughout
//! the crate, never standard deviations.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Inverse-demand parameters. Quantities are real-valued; negative prices
/// and quantities are propagated, not clamped (reports flag them instead).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarketParams {
    /// Demand intercept.
    pub a: f64,
    /// Own-quantity slope.
    pub b: f64,
    /// Cross-quantity slope. The analysis path requires b = d.
    pub d: f64,
}

impl MarketParams {
    pub fn new(a: f64, b: f64, d: f64) -> Result<Self> {
        if !(a > 0.0) {
            return Err(Error::domain(format!("a must be positive, got {a}")));
        }
        if !(b > 0.0) {
            return Err(Error::domain(format!("b must be positive, got {b}")));
        }
        if !(d > 0.0) {
            return Err(Error::domain(format!("d must be positive, got {d}")));
        }
        Ok(MarketParams { a, b, d })
    }

    /// Identical products (b = d), required by every analysis operation.
    pub fn symmetric(a: f64, b: f64) -> Result<Self> {
        MarketParams::new(a, b, b)
    }

    /// Errors unless b = d (relative tolerance 1e-9).
    pub fn require_identical_products(&self) -> Result<()> {
        if (self.b - self.d).abs() > 1e-9 * self.b.abs().max(self.d.abs()) {
            return Err(Error::domain(format!(
                "analysis requires identical products (b = d), got b = {}, d = {}",
                self.b, self.d
            )));
        }
        Ok(())
    }
}

/// Information technology: prior cost variance, baseline signal noise and
/// the efficacy of investments at reducing that noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InfoTech {
    /// Prior variance of the marginal cost C.
    pub sigma: f64,
    /// Signal-noise variance with zero investment.
    pub m0: f64,
    /// Noise-reduction efficacy (base of the investment logarithm), > 1.
    pub alpha: f64,
}

impl InfoTech {
    pub fn new(sigma: f64, m0: f64, alpha: f64) -> Result<Self> {
        if !(sigma > 0.0) {
            return Err(Error::domain(format!("sigma must be positive, got {sigma}")));
        }
        if !(m0 > 0.0) {
            return Err(Error::domain(format!("m0 must be positive, got {m0}")));
        }
        if !(alpha > 1.0) {
            return Err(Error::domain(format!("alpha must exceed 1, got {alpha}")));
        }
        Ok(InfoTech { sigma, m0, alpha })
    }

    /// ln(alpha), the one constant both the investment cost and the
    /// derivative terms are built from (prevents log-base drift).
    pub fn ln_alpha(&self) -> f64 {
        self.alpha.ln()
    }
}

/// Information regime fixed before the game starts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Regime {
    /// Both insurers observe both signals: t_i = (Z_i, Z_j).
    Sharing,
    /// Each insurer observes only its own signal: t_i = (Z_i).
    NonSharing,
}

impl std::fmt::Display for Regime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Regime::Sharing => write!(f, "sharing"),
            Regime::NonSharing => write!(f, "non-sharing"),
        }
    }
}

/// A pair of stage-1 noise choices, tagged with the regime they were made under.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StrategyProfile {
    pub m_i: f64,
    pub m_j: f64,
    pub regime: Regime,
}

impl StrategyProfile {
    pub fn new(m_i: f64, m_j: f64, regime: Regime, tech: &InfoTech) -> Result<Self> {
        check_noise(m_i, tech)?;
        check_noise(m_j, tech)?;
        Ok(StrategyProfile { m_i, m_j, regime })
    }
}

/// One joint draw of the cost and both signal noises.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignalRealization {
    pub c: f64,
    pub e_i: f64,
    pub e_j: f64,
}

impl SignalRealization {
    pub fn z_i(&self) -> f64 {
        self.c + self.e_i
    }

    pub fn z_j(&self) -> f64 {
        self.c + self.e_j
    }
}

pub(crate) fn check_noise(m: f64, tech: &InfoTech) -> Result<()> {
    // m -> 0 is the pole of the investment cost; the appendix KKT lemma
    // proves m = 0 is never feasible, so keep solvers out of that region.
    if !(m >= 1e-12 * tech.m0) {
        return Err(Error::domain(format!(
            "noise variance {m} too close to the m = 0 pole (floor {})",
            1e-12 * tech.m0
        )));
    }
    if m > tech.m0 {
        return Err(Error::domain(format!(
            "noise variance {m} exceeds baseline m0 = {} (negative investment not modeled)",
            tech.m0
        )));
    }
    Ok(())
}

/// Investment needed to reach noise variance `m`: h(m) = log_alpha(m0 / m).
///
/// Zero at m = m0, strictly decreasing and convex in m, infinite at m = 0.
pub fn investment_cost(m: f64, tech: &InfoTech) -> Result<f64> {
    check_noise(m, tech)?;
    Ok((tech.m0 / m).ln() / tech.ln_alpha())
}

/// Noise variance bought by investment `h`: m = m0 * alpha^(-h).
/// Inverse of [`investment_cost`].
pub fn noise_from_investment(h: f64, tech: &InfoTech) -> Result<f64> {
    if !(h >= 0.0) {
        return Err(Error::domain(format!("investment must be non-negative, got {h}")));
    }
    Ok(tech.m0 * tech.alpha.powf(-h))
}

/// Inverse demand: p = a - b q_i - d q_j.
pub fn price(q_i: f64, q_j: f64, params: &MarketParams) -> f64 {
    params.a - params.b * q_i - params.d * q_j
}

/// Ex-post profit: income minus production and risk-assessment costs,
/// q_i * p(q_i, q_j) - q_i * c - h.
pub fn realized_profit(q_i: f64, q_j: f64, c: f64, h: f64, params: &MarketParams) -> f64 {
    q_i * price(q_i, q_j, params) - q_i * c - h
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn tech(sigma: f64, m0: f64, alpha: f64) -> InfoTech {
        InfoTech::new(sigma, m0, alpha).unwrap()
    }

    #[test]
    fn investment_cost_endpoints() {
        let t = tech(4.0, 9.0, 3.0);
        assert_eq!(investment_cost(9.0, &t).unwrap(), 0.0);
        assert!((investment_cost(1.0, &t).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn investment_cost_paper_scale_point() {
        // ln(49.1543 / 10) / ln 3 evaluated with high-precision arithmetic.
        let t = tech(4.0, 49.1543, 3.0);
        let h = investment_cost(10.0, &t).unwrap();
        assert!((h - 1.449_446_045_234_638).abs() < 1e-12, "h = {h}");
    }

    #[test]
    fn investment_cost_domain_errors() {
        let t = tech(4.0, 9.0, 3.0);
        assert!(investment_cost(0.0, &t).is_err());
        assert!(investment_cost(-1.0, &t).is_err());
        assert!(investment_cost(9.0 + 1e-6, &t).is_err());
    }

    #[test]
    fn noise_from_investment_endpoints() {
        let t = tech(4.0, 9.0, 3.0);
        assert_eq!(noise_from_investment(0.0, &t).unwrap(), 9.0);
        assert!((noise_from_investment(2.0, &t).unwrap() - 1.0).abs() < 1e-12);
        assert!(noise_from_investment(-0.1, &t).is_err());
    }

    #[test]
    fn investment_round_trip_paper_scale() {
        let t = tech(4.0, 49.1543, 3.0);
        let h = investment_cost(10.0, &t).unwrap();
        let m = noise_from_investment(h, &t).unwrap();
        assert!((m - 10.0).abs() < 1e-9);
    }

    #[test]
    fn price_points() {
        let p = MarketParams::symmetric(10.0, 1.0).unwrap();
        assert_eq!(price(0.0, 0.0, &p), 10.0);
        assert_eq!(price(3.0, 3.0, &p), 4.0);
        assert_eq!(price(10.0, 0.0, &p), 0.0);
    }

    #[test]
    fn realized_profit_points() {
        let p = MarketParams::symmetric(10.0, 1.0).unwrap();
        assert_eq!(realized_profit(0.0, 5.0, 2.0, 0.7, &p), -0.7);
        assert_eq!(realized_profit(3.0, 3.0, 1.0, 0.0, &p), 9.0);
        assert!((realized_profit(3.0, 3.0, 4.0, 0.5, &p) - (-0.5)).abs() < 1e-12);
    }

    #[test]
    fn params_reject_nonpositive() {
        assert!(MarketParams::new(0.0, 1.0, 1.0).is_err());
        assert!(MarketParams::new(1.0, -1.0, 1.0).is_err());
        assert!(InfoTech::new(1.0, 1.0, 1.0).is_err());
        assert!(InfoTech::new(0.0, 1.0, 2.0).is_err());
    }

    proptest! {
        #[test]
        fn investment_round_trip(m in 1e-6f64..9.0) {
            let t = tech(4.0, 9.0, 3.0);
            let h = investment_cost(m, &t).unwrap();
            let back = noise_from_investment(h, &t).unwrap();
            prop_assert!((back - m).abs() <= 1e-12 * m.abs().max(1.0));
        }

        #[test]
        fn investment_cost_decreasing_convex(m in 1e-3f64..8.9) {
            let t = tech(4.0, 9.0, 3.0);
            let dm = 1e-4 * m;
            let lo = investment_cost(m - dm, &t).unwrap();
            let mid = investment_cost(m, &t).unwrap();
            let hi = investment_cost(m + dm, &t).unwrap();
            prop_assert!(hi < mid && mid < lo);
            // convexity: midpoint below chord
            prop_assert!(mid <= 0.5 * (lo + hi) + 1e-12);
        }

        #[test]
        fn price_is_affine(q_i in -10.0f64..10.0, q_j in -10.0f64..10.0, delta in -5.0f64..5.0) {
            let p = MarketParams::symmetric(10.0, 2.0).unwrap();
            let lhs = price(q_i + delta, q_j, &p) - price(q_i, q_j, &p);
            prop_assert!((lhs - (-2.0 * delta)).abs() < 1e-9);
        }

        #[test]
        fn zero_cost_symmetric_profit(q in -5.0f64..5.0) {
            let p = MarketParams::symmetric(10.0, 1.5).unwrap();
            let lhs = realized_profit(q, q, 0.0, 0.0, &p);
            let rhs = q * (10.0 - 2.0 * 1.5 * q);
            prop_assert!((lhs - rhs).abs() < 1e-9);
        }
    }
}
