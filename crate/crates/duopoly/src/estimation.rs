//! Conditional (Bayesian) cost estimation from normal signals.
//!
//! With C ~ N(0, sigma) and Z_k = C + E_k, E_k ~ N(0, m_k):
//!
//! ```text
//! E[C | Z_i]       = delta_i Z_i,            delta_i = sigma / (sigma + m_i)
//! E[C | Z_i, Z_j]  = (sigma m_j Z_i + sigma m_i Z_j) / k0
//! k0               = sigma m_i + sigma m_j + m_i m_j
//! Var(pooled mean) = sigma^2 (m_i + m_j) / k0
//! ```
//!
//! All `sigma`/`m` arguments are variances.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The shrinkage and pooling weights, exposed so the equilibrium module can
/// reuse them without recomputation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimatorWeights {
    /// Single-signal shrinkage sigma / (sigma + m_i).
    pub delta_i: f64,
    /// Pooling normalizer sigma m_i + sigma m_j + m_i m_j.
    pub k0: f64,
    /// Loading of the pooled estimate on the cost C: sigma (m_i + m_j) / k0.
    pub k_c: f64,
    /// Loading on E_i: sigma m_j / k0.
    pub k_i: f64,
    /// Loading on E_j: sigma m_i / k0.
    pub k_j: f64,
}

impl EstimatorWeights {
    pub fn new(sigma: f64, m_i: f64, m_j: f64) -> Result<Self> {
        let k0 = pooling_normalizer(sigma, m_i, m_j)?;
        Ok(EstimatorWeights {
            delta_i: sigma / (sigma + m_i),
            k0,
            k_c: sigma * (m_i + m_j) / k0,
            k_i: sigma * m_j / k0,
            k_j: sigma * m_i / k0,
        })
    }
}

fn pooling_normalizer(sigma: f64, m_i: f64, m_j: f64) -> Result<f64> {
    let k0 = sigma * m_i + sigma * m_j + m_i * m_j;
    if k0 == 0.0 {
        // Both signals noiseless: unreachable under the investment
        // technology (the cost of m = 0 is infinite), so fail loudly.
        return Err(Error::domain(
            "pooling normalizer k0 = 0 (both signals noiseless)".to_string(),
        ));
    }
    Ok(k0)
}

/// E[C | Z_i] = delta_i z_i.
pub fn single_signal_estimate(z_i: f64, sigma: f64, m_i: f64) -> f64 {
    sigma / (sigma + m_i) * z_i
}

/// E[C | Z_i, Z_j] = (sigma m_j z_i + sigma m_i z_j) / k0.
pub fn pooled_estimate(z_i: f64, z_j: f64, sigma: f64, m_i: f64, m_j: f64) -> Result<f64> {
    let k0 = pooling_normalizer(sigma, m_i, m_j)?;
    Ok((sigma * m_j * z_i + sigma * m_i * z_j) / k0)
}

/// Variance of the pooled posterior mean: sigma^2 (m_i + m_j) / k0.
///
/// Strictly below sigma, decreasing in each m (noisier signals shrink the
/// estimator toward the prior mean), and approaching sigma as both signals
/// become perfect. The residual uncertainty about C is sigma minus this.
pub fn pooled_variance(sigma: f64, m_i: f64, m_j: f64) -> Result<f64> {
    let k0 = pooling_normalizer(sigma, m_i, m_j)?;
    Ok(sigma * sigma * (m_i + m_j) / k0)
}

/// E[Z_j | Z_i]. Since Z_j = C + E_j with E_j independent of Z_i, this equals
/// E[C | Z_i], i.e. the single-signal estimate.
pub fn adversary_signal_expectation(z_i: f64, sigma: f64, m_i: f64) -> f64 {
    single_signal_estimate(z_i, sigma, m_i)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    #[test]
    fn single_signal_points() {
        assert_eq!(single_signal_estimate(0.0, 4.0, 2.0), 0.0);
        assert_eq!(single_signal_estimate(3.0, 4.0, 0.0), 3.0);
        assert!((single_signal_estimate(3.0, 4.0, 2.0) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn adversary_expectation_matches_single_signal() {
        assert_eq!(adversary_signal_expectation(0.0, 4.0, 2.0), 0.0);
        assert!((adversary_signal_expectation(3.0, 4.0, 2.0) - 2.0).abs() < 1e-12);
        assert_eq!(adversary_signal_expectation(5.0, 4.0, 0.0), 5.0);
    }

    #[test]
    fn pooled_estimate_points() {
        assert_eq!(pooled_estimate(0.0, 0.0, 4.0, 2.0, 2.0).unwrap(), 0.0);
        let v = pooled_estimate(3.0, 0.0, 4.0, 2.0, 2.0).unwrap();
        assert!((v - 1.2).abs() < 1e-12);
    }

    #[test]
    fn pooled_estimate_uninformative_second_signal_limit() {
        // m_j -> infinity recovers the single-signal estimate.
        let v = pooled_estimate(3.0, 100.0, 4.0, 2.0, 1e12).unwrap();
        assert!((v - single_signal_estimate(3.0, 4.0, 2.0)).abs() < 1e-6);
    }

    #[test]
    fn pooled_estimate_degenerate_k0_errors() {
        assert!(pooled_estimate(1.0, 2.0, 4.0, 0.0, 0.0).is_err());
        assert!(pooled_variance(4.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn pooled_variance_points() {
        let v = pooled_variance(4.0, 2.0, 2.0).unwrap();
        assert!((v - 3.2).abs() < 1e-12);
        // perfect-information limit: the estimator becomes C itself
        assert!((pooled_variance(4.0, 1e-12, 1e-12).unwrap() - 4.0).abs() < 1e-10);
        // m_i -> infinity limit equals sigma^2 / (sigma + m_j) = sigma * delta_j
        let lim = pooled_variance(4.0, 1e14, 2.0).unwrap();
        assert!((lim - 16.0 / 6.0).abs() < 1e-6);
    }

    #[test]
    fn weights_decompose() {
        let w = EstimatorWeights::new(4.0, 2.0, 3.0).unwrap();
        assert!((w.k_c - (w.k_i + w.k_j)).abs() < 1e-12);
        assert!((w.k0 - (4.0 * 2.0 + 4.0 * 3.0 + 6.0)).abs() < 1e-12);
        assert!(w.delta_i > 0.0 && w.delta_i < 1.0);
    }

    #[test]
    fn tower_check_by_simulation() {
        // E[ E[C|Z_i] ] = 0: mean of the estimator over 10^6 draws is within
        // 4 standard errors of zero.
        let (sigma, m_i) = (4.0f64, 2.0f64);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let cost = Normal::new(0.0, sigma.sqrt()).unwrap();
        let noise = Normal::new(0.0, (m_i as f64).sqrt()).unwrap();
        let n = 1_000_000usize;
        let mut sum = 0.0;
        let mut sumsq = 0.0;
        for _ in 0..n {
            let z = cost.sample(&mut rng) + noise.sample(&mut rng);
            let est = single_signal_estimate(z, sigma, m_i);
            sum += est;
            sumsq += est * est;
        }
        let mean = sum / n as f64;
        let var = sumsq / n as f64 - mean * mean;
        let se = (var / n as f64).sqrt();
        assert!(mean.abs() < 4.0 * se, "mean {mean}, se {se}");
    }

    proptest! {
        #[test]
        fn pooled_symmetry(z in -5.0f64..5.0, zp in -5.0f64..5.0,
                           m in 0.1f64..10.0, mp in 0.1f64..10.0) {
            let a = pooled_estimate(z, zp, 4.0, m, mp).unwrap();
            let b = pooled_estimate(zp, z, 4.0, mp, m).unwrap();
            prop_assert!((a - b).abs() < 1e-12);
        }

        #[test]
        fn pooled_equal_signals_is_half_noise_shrinkage(z in -5.0f64..5.0, m in 0.1f64..10.0) {
            let sigma = 4.0;
            let a = pooled_estimate(z, z, sigma, m, m).unwrap();
            let b = 2.0 * sigma * z / (2.0 * sigma + m);
            prop_assert!((a - b).abs() < 1e-10);
        }

        #[test]
        fn second_signal_reduces_residual_uncertainty(m_i in 0.01f64..50.0, m_j in 0.01f64..50.0) {
            // Var(C | both signals) = sigma - pooled < sigma - single = Var(C | Z_i):
            // equivalently the estimator variance rises toward sigma with more info.
            let sigma = 4.0;
            let pooled = pooled_variance(sigma, m_i, m_j).unwrap();
            let single = sigma * sigma / (sigma + m_i); // variance of delta_i Z_i
            prop_assert!(pooled > single);
            prop_assert!(pooled < sigma);
        }
    }
}
