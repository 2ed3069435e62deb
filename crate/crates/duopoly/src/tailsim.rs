//! Monte-Carlo validation of the closed-form payoffs and a heavy-tail
//! robustness check.
//!
//! The cost model is extended to a spliced mixture: with weight w1 a normal
//! body truncated at x0, with weight w2 a generalized-Pareto (GPD) right tail
//! starting at x0. Finite variance requires shape xi < 1/2. The production
//! rules derived for the normal model are then compared against the
//! tail-adjusted rules q_i = q~_i - delta_i, where delta_i solves the linear
//! fixed point delta_i = (2 eps_i + eps_j) / (3b) with eps the expected cost
//! shift created by the tail. The payoff gap between the two rules, measured
//! on common random numbers, gives conservative epsilon-NE bounds.
//!
//! Simulation shards across threads with per-shard deterministic RNG streams
//! and a fixed reduction order, so results are identical for any thread count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::estimation::pooled_estimate;
use crate::market::{investment_cost, realized_profit, InfoTech, MarketParams, Regime, StrategyProfile};
use crate::production::{nonsharing_coefficients, sharing_quantity, AffineRule};

const SHARD: u64 = 1 << 16;

/// Spliced cost distribution: normal body below x0, GPD tail above.
///
/// `sigma` is the body variance (matching the normal model being stressed).
/// When w2 = 0 the mixture degenerates to the untruncated normal model
/// itself, so every downstream comparison against the normal closed forms is
/// exact rather than truncated-at-x0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailMixture {
    pub w1: f64,
    pub w2: f64,
    /// Splice threshold (cost units).
    pub x0: f64,
    /// Body variance.
    pub sigma: f64,
    /// GPD shape; < 1/2 so the tail has finite mean and variance.
    pub xi: f64,
    /// GPD scale.
    pub beta: f64,
}

impl TailMixture {
    pub fn new(w1: f64, w2: f64, x0: f64, sigma: f64, xi: f64, beta: f64) -> Result<Self> {
        if !(w1 >= 0.0 && w2 >= 0.0 && (w1 + w2 - 1.0).abs() <= 1e-12) {
            return Err(Error::domain(format!(
                "mixture weights must be non-negative and sum to 1, got w1 = {w1}, w2 = {w2}"
            )));
        }
        if !(xi < 0.5) {
            return Err(Error::domain(format!(
                "GPD shape xi = {xi} >= 1/2 gives an infinite-variance tail"
            )));
        }
        if !(beta > 0.0) {
            return Err(Error::domain(format!("GPD scale must be positive, got {beta}")));
        }
        if !(sigma > 0.0) {
            return Err(Error::domain(format!("body variance must be positive, got {sigma}")));
        }
        if !x0.is_finite() {
            return Err(Error::domain(format!("splice threshold must be finite, got {x0}")));
        }
        Ok(TailMixture { w1, w2, x0, sigma, xi, beta })
    }

    /// Default stress mixture for body variance `sigma`: 5% tail mass,
    /// xi = 1/4, splice at two body standard deviations, and the GPD scale
    /// chosen so the spliced density is continuous at x0.
    pub fn default_for(sigma: f64) -> Result<Self> {
        let w2 = 0.05;
        let x0 = 2.0 * sigma.sqrt();
        let beta = continuous_splice_scale(sigma, x0, 1.0 - w2, w2)?;
        TailMixture::new(1.0 - w2, w2, x0, sigma, 0.25, beta)
    }

    /// Mean of the mixture: w1 E[body | body <= x0] + w2 (x0 + beta/(1-xi)).
    pub fn mean(&self) -> f64 {
        self.w1 * self.body_mean() + self.w2 * self.tail_mean()
    }

    /// Mean of the GPD tail component, x0 + beta / (1 - xi).
    pub fn tail_mean(&self) -> f64 {
        self.x0 + self.beta / (1.0 - self.xi)
    }

    fn body_mean(&self) -> f64 {
        if self.w2 == 0.0 {
            return 0.0; // degenerate case: untruncated normal
        }
        let sd = self.sigma.sqrt();
        let std = Normal::new(0.0, 1.0).expect("unit normal");
        let t = self.x0 / sd;
        // E[X | X <= x0] for X ~ N(0, sigma): -sd phi(t) / Phi(t)
        -sd * std.pdf(t) / std.cdf(t)
    }

    /// Expected cost shift relative to the zero-mean normal model; this is
    /// the eps_i entering the production fixed point.
    pub fn expected_shift(&self) -> f64 {
        self.mean()
    }
}

/// GPD scale making the spliced density continuous at x0 given the weights:
/// w1 f_body(x0) = w2 / beta, with the body renormalized to mass 1 below x0.
pub fn continuous_splice_scale(sigma: f64, x0: f64, w1: f64, w2: f64) -> Result<f64> {
    if !(sigma > 0.0 && w1 > 0.0 && w2 > 0.0) {
        return Err(Error::domain(
            "continuous splice needs positive sigma and both weights".to_string(),
        ));
    }
    let sd = sigma.sqrt();
    let std = Normal::new(0.0, 1.0).expect("unit normal");
    let t = x0 / sd;
    let body_density_at_x0 = std.pdf(t) / (sd * std.cdf(t));
    Ok(w2 / (w1 * body_density_at_x0))
}

/// Empirical stage-2 moments of insurer i under the normal signal model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimulationResult {
    pub n: u64,
    pub mean_profit: f64,
    /// Sample standard deviation of profit divided by sqrt(n).
    pub profit_std_error: f64,
    pub mean_quantity: f64,
    pub quantity_variance: f64,
    pub seed: u64,
}

/// Payoff perturbation bounds from the heavy-tail comparison; the strategy
/// profile is an epsilon-NE with epsilon = phi_lower + phi_upper.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpsilonBounds {
    pub phi_lower: f64,
    pub phi_upper: f64,
    pub epsilon: f64,
}

fn shard_rng(seed: u64, shard: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(shard + 1);
    rng
}

fn shard_sizes(n: u64) -> Vec<u64> {
    let full = n / SHARD;
    let rem = n % SHARD;
    let mut v = vec![SHARD; full as usize];
    if rem > 0 {
        v.push(rem);
    }
    v
}

#[derive(Clone, Copy, Default)]
struct Moments {
    sum_p: f64,
    sumsq_p: f64,
    sum_q: f64,
    sumsq_q: f64,
    count: u64,
}

impl Moments {
    fn push(&mut self, p: f64, q: f64) {
        self.sum_p += p;
        self.sumsq_p += p * p;
        self.sum_q += q;
        self.sumsq_q += q * q;
        self.count += 1;
    }

    fn merge(mut self, o: Moments) -> Moments {
        self.sum_p += o.sum_p;
        self.sumsq_p += o.sumsq_p;
        self.sum_q += o.sum_q;
        self.sumsq_q += o.sumsq_q;
        self.count += o.count;
        self
    }
}

enum Rules {
    Sharing,
    NonSharing { rule_i: AffineRule, rule_j: AffineRule },
}

fn build_rules(profile: &StrategyProfile, params: &MarketParams, tech: &InfoTech) -> Result<Rules> {
    match profile.regime {
        Regime::Sharing => {
            params.require_identical_products()?;
            Ok(Rules::Sharing)
        }
        Regime::NonSharing => Ok(Rules::NonSharing {
            rule_i: nonsharing_coefficients(tech.sigma, profile.m_i, profile.m_j, params)?,
            rule_j: nonsharing_coefficients(tech.sigma, profile.m_j, profile.m_i, params)?,
        }),
    }
}

fn quantities(
    rules: &Rules,
    z_i: f64,
    z_j: f64,
    sigma: f64,
    m_i: f64,
    m_j: f64,
    params: &MarketParams,
) -> Result<(f64, f64)> {
    match rules {
        Rules::Sharing => {
            let q_i = sharing_quantity(pooled_estimate(z_i, z_j, sigma, m_i, m_j)?, params);
            let q_j = sharing_quantity(pooled_estimate(z_j, z_i, sigma, m_j, m_i)?, params);
            Ok((q_i, q_j))
        }
        Rules::NonSharing { rule_i, rule_j } => Ok((rule_i.quantity(z_i), rule_j.quantity(z_j))),
    }
}

/// Draw n joint realizations of (C, E_i, E_j) from the normal model, apply
/// the regime's stage-2 production rules, and average insurer i's realized
/// profit. Reproducible bit-for-bit for a fixed seed and any thread count.
pub fn simulate_stage2(
    profile: &StrategyProfile,
    params: &MarketParams,
    tech: &InfoTech,
    n: u64,
    seed: u64,
) -> Result<SimulationResult> {
    if n == 0 {
        return Err(Error::domain("simulation needs n >= 1".to_string()));
    }
    let rules = build_rules(profile, params, tech)?;
    let h_i = investment_cost(profile.m_i, tech)?;
    let sd_c = tech.sigma.sqrt();
    let sd_i = profile.m_i.sqrt();
    let sd_j = profile.m_j.sqrt();

    let per_shard: Vec<Result<Moments>> = shard_sizes(n)
        .par_iter()
        .enumerate()
        .map(|(k, &size)| {
            let mut rng = shard_rng(seed, k as u64);
            let mut acc = Moments::default();
            for _ in 0..size {
                let c = sd_c * rng.sample::<f64, _>(StandardNormal);
                let z_i = c + sd_i * rng.sample::<f64, _>(StandardNormal);
                let z_j = c + sd_j * rng.sample::<f64, _>(StandardNormal);
                let (q_i, q_j) =
                    quantities(&rules, z_i, z_j, tech.sigma, profile.m_i, profile.m_j, params)?;
                acc.push(realized_profit(q_i, q_j, c, h_i, params), q_i);
            }
            Ok(acc)
        })
        .collect();

    let mut total = Moments::default();
    for m in per_shard {
        total = total.merge(m?);
    }
    Ok(finish(total, seed))
}

fn finish(m: Moments, seed: u64) -> SimulationResult {
    let n = m.count as f64;
    let mean_p = m.sum_p / n;
    let var_p = ((m.sumsq_p - n * mean_p * mean_p) / (n - 1.0).max(1.0)).max(0.0);
    let mean_q = m.sum_q / n;
    let var_q = ((m.sumsq_q - n * mean_q * mean_q) / (n - 1.0).max(1.0)).max(0.0);
    SimulationResult {
        n: m.count,
        mean_profit: mean_p,
        profit_std_error: (var_p / n).sqrt(),
        mean_quantity: mean_q,
        quantity_variance: var_q,
        seed,
    }
}

fn draw_mixture(mix: &TailMixture, rng: &mut ChaCha8Rng) -> f64 {
    let pick: f64 = rng.gen();
    let u: f64 = rng.gen();
    if mix.w2 == 0.0 {
        // degenerate mixture: the untruncated normal model itself
        let std = Normal::new(0.0, 1.0).expect("unit normal");
        return mix.sigma.sqrt() * std.inverse_cdf(u.max(f64::MIN_POSITIVE));
    }
    if pick < mix.w2 {
        // GPD tail via inverse CDF; u < 1 always for this generator
        if mix.xi.abs() < 1e-12 {
            mix.x0 - mix.beta * (1.0 - u).ln()
        } else {
            mix.x0 + mix.beta * ((1.0 - u).powf(-mix.xi) - 1.0) / mix.xi
        }
    } else {
        // normal body truncated to (-inf, x0]
        let std = Normal::new(0.0, 1.0).expect("unit normal");
        let sd = mix.sigma.sqrt();
        let cap = std.cdf(mix.x0 / sd);
        sd * std.inverse_cdf((u * cap).max(f64::MIN_POSITIVE))
    }
}

/// Sample n i.i.d. costs from the spliced mixture; deterministic in the seed.
pub fn sample_tail_mixture(mix: &TailMixture, n: u64, seed: u64) -> Result<Vec<f64>> {
    // validate by round-tripping through the constructor
    TailMixture::new(mix.w1, mix.w2, mix.x0, mix.sigma, mix.xi, mix.beta)?;
    let sizes = shard_sizes(n);
    let mut offsets = Vec::with_capacity(sizes.len());
    let mut acc = 0u64;
    for &s in &sizes {
        offsets.push(acc);
        acc += s;
    }
    let mut out = vec![0.0; n as usize];
    let chunks: Vec<(usize, Vec<f64>)> = sizes
        .par_iter()
        .enumerate()
        .map(|(k, &size)| {
            let mut rng = shard_rng(seed, k as u64);
            let v: Vec<f64> = (0..size).map(|_| draw_mixture(mix, &mut rng)).collect();
            (offsets[k] as usize, v)
        })
        .collect();
    for (off, v) in chunks {
        out[off..off + v.len()].copy_from_slice(&v);
    }
    Ok(out)
}

/// Tail adjustment of the production rule: delta_i = (2 eps_i + eps_j)/(3b),
/// the solution of the symmetric linear fixed point created by shifting both
/// insurers' expected costs by eps.
pub fn tail_quantity_adjustment(eps_i: f64, eps_j: f64, params: &MarketParams) -> f64 {
    (2.0 * eps_i + eps_j) / (3.0 * params.b)
}

/// Estimate how far the normal-model payoff is from the payoff under the
/// heavy-tail cost, by simulating stage 2 under the mixture cost with the
/// tail-adjusted rule versus the normal-approximation rule on common random
/// numbers. Returns conservative bounds (estimated gap plus 3 SE each side).
pub fn tail_payoff_bounds(
    profile: &StrategyProfile,
    params: &MarketParams,
    tech: &InfoTech,
    mix: &TailMixture,
    n: u64,
    seed: u64,
) -> Result<EpsilonBounds> {
    if n == 0 {
        return Err(Error::domain("simulation needs n >= 1".to_string()));
    }
    TailMixture::new(mix.w1, mix.w2, mix.x0, mix.sigma, mix.xi, mix.beta)?;
    let rules = build_rules(profile, params, tech)?;
    let h_i = investment_cost(profile.m_i, tech)?;
    let eps = mix.expected_shift();
    let delta = tail_quantity_adjustment(eps, eps, params);
    let sd_i = profile.m_i.sqrt();
    let sd_j = profile.m_j.sqrt();

    // accumulate moments of the per-draw payoff gap (adjusted - base)
    let per_shard: Vec<Result<(f64, f64, u64)>> = shard_sizes(n)
        .par_iter()
        .enumerate()
        .map(|(k, &size)| {
            let mut rng = shard_rng(seed, k as u64);
            let (mut sum, mut sumsq) = (0.0, 0.0);
            for _ in 0..size {
                let c = draw_mixture(mix, &mut rng);
                let z_i = c + sd_i * rng.sample::<f64, _>(StandardNormal);
                let z_j = c + sd_j * rng.sample::<f64, _>(StandardNormal);
                let (q_i, q_j) =
                    quantities(&rules, z_i, z_j, tech.sigma, profile.m_i, profile.m_j, params)?;
                let base = realized_profit(q_i, q_j, c, h_i, params);
                let adj = realized_profit(q_i - delta, q_j - delta, c, h_i, params);
                let gap = adj - base;
                sum += gap;
                sumsq += gap * gap;
            }
            Ok((sum, sumsq, size))
        })
        .collect();

    let (mut sum, mut sumsq, mut count) = (0.0, 0.0, 0u64);
    for r in per_shard {
        let (s, ss, c) = r?;
        sum += s;
        sumsq += ss;
        count += c;
    }
    let nf = count as f64;
    let mean = sum / nf;
    let var = ((sumsq - nf * mean * mean) / (nf - 1.0).max(1.0)).max(0.0);
    let se = (var / nf).sqrt();
    let phi_lower = (-mean).max(0.0) + 3.0 * se;
    let phi_upper = mean.max(0.0) + 3.0 * se;
    Ok(EpsilonBounds { phi_lower, phi_upper, epsilon: phi_lower + phi_upper })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::payoff::{payoff_nonsharing, payoff_sharing};

    fn worked_point() -> (MarketParams, InfoTech) {
        (
            MarketParams::symmetric(10.0, 1.0).unwrap(),
            InfoTech::new(4.0, 2.0, 3.0).unwrap(),
        )
    }

    #[test]
    fn sharing_mean_matches_closed_form() {
        let (p, t) = worked_point();
        let prof = StrategyProfile::new(2.0, 2.0, Regime::Sharing, &t).unwrap();
        let r = simulate_stage2(&prof, &p, &t, 1_000_000, 11).unwrap();
        let j = payoff_sharing(2.0, 2.0, &p, &t).unwrap();
        assert!((j - 11.466_666_666_666_667).abs() < 1e-12);
        assert!((r.mean_profit - j).abs() < 3.0 * r.profit_std_error, "{r:?}");
    }

    #[test]
    fn nonsharing_mean_matches_closed_form() {
        let (p, t) = worked_point();
        let prof = StrategyProfile::new(2.0, 2.0, Regime::NonSharing, &t).unwrap();
        let r = simulate_stage2(&prof, &p, &t, 1_000_000, 12).unwrap();
        let j = payoff_nonsharing(2.0, 2.0, &p, &t).unwrap();
        assert!((j - 11.486_111_111_111_111).abs() < 1e-12);
        assert!((r.mean_profit - j).abs() < 3.0 * r.profit_std_error, "{r:?}");
    }

    #[test]
    fn mean_quantity_is_intercept_in_both_regimes() {
        let (p, t) = worked_point();
        for regime in [Regime::Sharing, Regime::NonSharing] {
            let prof = StrategyProfile::new(2.0, 1.5, regime, &t).unwrap();
            let r = simulate_stage2(&prof, &p, &t, 400_000, 5).unwrap();
            let se = (r.quantity_variance / r.n as f64).sqrt();
            assert!((r.mean_quantity - 10.0 / 3.0).abs() < 3.0 * se, "{regime:?} {r:?}");
        }
    }

    #[test]
    fn seed_determinism_and_thread_invariance() {
        let (p, t) = worked_point();
        let prof = StrategyProfile::new(2.0, 2.0, Regime::Sharing, &t).unwrap();
        let a = simulate_stage2(&prof, &p, &t, 150_000, 9).unwrap();
        let b = simulate_stage2(&prof, &p, &t, 150_000, 9).unwrap();
        assert_eq!(a, b);
        let single = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(|| simulate_stage2(&prof, &p, &t, 150_000, 9).unwrap());
        assert_eq!(a, single);
        let c = simulate_stage2(&prof, &p, &t, 150_000, 10).unwrap();
        assert_ne!(a.mean_profit, c.mean_profit);
    }

    #[test]
    fn mixture_validation() {
        assert!(TailMixture::new(0.9, 0.1, 4.0, 4.0, 0.5, 1.0).is_err()); // xi
        assert!(TailMixture::new(0.5, 0.4, 4.0, 4.0, 0.2, 1.0).is_err()); // weights
        assert!(TailMixture::new(0.9, 0.1, 4.0, 4.0, 0.2, 0.0).is_err()); // beta
        assert!(TailMixture::new(0.9, 0.1, 4.0, -1.0, 0.2, 1.0).is_err()); // sigma
        let m = TailMixture::default_for(4.0).unwrap();
        assert!((m.w1 + m.w2 - 1.0).abs() < 1e-12);
        assert_eq!(m.x0, 4.0);
    }

    #[test]
    fn pure_normal_when_tail_weight_zero() {
        let mix = TailMixture::new(1.0, 0.0, 4.0, 4.0, 0.25, 1.0).unwrap();
        let xs = sample_tail_mixture(&mix, 1_000_000, 3).unwrap();
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
        // SE of the sample variance of a normal is sigma^2 sqrt(2/n)
        let se_var = 4.0 * (2.0 / n).sqrt();
        assert!(mean.abs() < 4.0 * (4.0f64 / n).sqrt(), "mean = {mean}");
        assert!((var - 4.0).abs() < 4.0 * se_var, "var = {var}");
    }

    #[test]
    fn pure_gpd_exponential_special_case() {
        // w1 = 0, xi = 0, beta = 1, x0 = 0 is a unit exponential
        let mix = TailMixture::new(0.0, 1.0, 0.0, 1.0, 0.0, 1.0).unwrap();
        let xs = sample_tail_mixture(&mix, 1_000_000, 4).unwrap();
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        assert!((mean - 1.0).abs() < 4.0 / n.sqrt(), "mean = {mean}");
        assert!(xs.iter().all(|&x| x >= 0.0));
    }

    #[test]
    fn mixture_mean_matches_analytic() {
        let mix = TailMixture::new(0.95, 0.05, 4.0, 4.0, 0.25, 2.0).unwrap();
        let xs = sample_tail_mixture(&mix, 1_000_000, 8).unwrap();
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
        let se = (var / n).sqrt();
        assert!((mean - mix.mean()).abs() < 4.0 * se, "mean = {mean} vs {}", mix.mean());
        assert!((mix.tail_mean() - (4.0 + 2.0 / 0.75)).abs() < 1e-12);
    }

    #[test]
    fn zero_tail_weight_gives_zero_epsilon() {
        let (p, t) = worked_point();
        let prof = StrategyProfile::new(2.0, 2.0, Regime::Sharing, &t).unwrap();
        let mix = TailMixture::new(1.0, 0.0, 4.0, 4.0, 0.25, 1.0).unwrap();
        let b = tail_payoff_bounds(&prof, &p, &t, &mix, 100_000, 2).unwrap();
        assert_eq!(b.epsilon, 0.0);
    }

    #[test]
    fn symmetric_shift_gives_delta_eps_over_b() {
        let p = MarketParams::symmetric(10.0, 2.0).unwrap();
        assert!((tail_quantity_adjustment(0.6, 0.6, &p) - 0.3).abs() < 1e-15);
    }

    #[test]
    fn epsilon_nondecreasing_in_tail_weight() {
        let (p, t) = worked_point();
        let prof = StrategyProfile::new(2.0, 2.0, Regime::NonSharing, &t).unwrap();
        let mut last = -1.0;
        for w2 in [0.0, 0.01, 0.05] {
            let mix = TailMixture::new(1.0 - w2, w2, 4.0, 4.0, 0.25, 1.5).unwrap();
            let b = tail_payoff_bounds(&prof, &p, &t, &mix, 200_000, 6).unwrap();
            assert!(b.phi_lower >= 0.0 && b.phi_upper >= 0.0);
            assert!(b.epsilon >= last, "w2 = {w2}: {} < {last}", b.epsilon);
            last = b.epsilon;
        }
    }
}
