//! Stage-1 equilibrium analysis: KKT feasibility certificates, closed-form
//! NE classification per regime, interior-candidate solvers, and the
//! independent brute-force / epsilon-NE oracles.
//!
//! The closed-form classifiers cover the parameter regions the propositions
//! decide. In the gap between the "never invest" and "invest" thresholds the
//! propositions are silent; there the report is labeled
//! `IndeterminateByProposition` and carries a clearly-marked numeric
//! fallback (KKT certification plus a grid search), never presented as a
//! closed-form claim.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market::{InfoTech, MarketParams, Regime, StrategyProfile};
use crate::payoff::PayoffSurface;

/// Relative tolerance for threshold and payoff-tie comparisons.
pub const REL_TOL: f64 = 1e-9;

/// NE categories of the stage-1 game, plus an explicit label for the
/// parameter regions the propositions leave undecided.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum NECategory {
    NeitherInvests,
    OneInvests,
    BothInvestSymmetric,
    BothInvestAsymmetric,
    IndeterminateByProposition,
}

impl std::fmt::Display for NECategory {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            NECategory::NeitherInvests => "NeitherInvests",
            NECategory::OneInvests => "OneInvests",
            NECategory::BothInvestSymmetric => "BothInvestSymmetric",
            NECategory::BothInvestAsymmetric => "BothInvestAsymmetric",
            NECategory::IndeterminateByProposition => "IndeterminateByProposition",
        };
        write!(f, "{s}")
    }
}

/// Thresholds of the sharing-regime proposition.
///
/// `sigma_hat_thr` is the *investment threshold* on sigma; the paper reuses
/// the symbol sigma-hat for both this threshold and the pooled-estimate
/// variance, so the two are deliberately named apart here.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SharingThresholds {
    /// 36 b / ln(alpha): below this baseline noise nobody ever invests.
    pub m0_crit: f64,
    /// 36 b m0 / (m0 ln(alpha) - 36 b); defined only when m0 ln(alpha) > 36 b.
    pub sigma_tilde: Option<f64>,
    /// Gamma = sqrt(m0 ln(alpha) / (9 b)).
    pub gamma: f64,
    /// m0 / (Gamma - 2); defined only when Gamma > 2.
    pub sigma_hat_thr: Option<f64>,
}

impl SharingThresholds {
    pub fn compute(params: &MarketParams, tech: &InfoTech) -> Self {
        let (b, m0, ln_a) = (params.b, tech.m0, tech.ln_alpha());
        let m0_crit = 36.0 * b / ln_a;
        let sigma_tilde =
            (m0 * ln_a > 36.0 * b).then(|| 36.0 * b * m0 / (m0 * ln_a - 36.0 * b));
        let gamma = (m0 * ln_a / (9.0 * b)).sqrt();
        let sigma_hat_thr = (gamma > 2.0).then(|| m0 / (gamma - 2.0));
        SharingThresholds { m0_crit, sigma_tilde, gamma, sigma_hat_thr }
    }
}

/// Thresholds of the non-sharing-regime proposition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NonSharingThresholds {
    /// 27 b / (5 ln(alpha)): below this, (m0, m0) is the only NE for any sigma.
    pub m0_low: f64,
    /// 9 b / ln(alpha): above this, investing equilibria become possible.
    pub m0_mid: f64,
    /// 5 m0 ln(alpha) / (3 b).
    pub gamma_tilde: f64,
    /// m0 ln(alpha) / b.
    pub gamma_hat: f64,
    /// 2 m0 / (sqrt(gamma_tilde) - 3); defined only when gamma_tilde > 9.
    pub sigma_acute: Option<f64>,
    /// 2 m0 / (sqrt(gamma_hat) - 3); defined only when gamma_hat > 9.
    pub sigma_breve: Option<f64>,
}

impl NonSharingThresholds {
    pub fn compute(params: &MarketParams, tech: &InfoTech) -> Self {
        let (b, m0, ln_a) = (params.b, tech.m0, tech.ln_alpha());
        let gamma_tilde = 5.0 * m0 * ln_a / (3.0 * b);
        let gamma_hat = m0 * ln_a / b;
        NonSharingThresholds {
            m0_low: 27.0 * b / (5.0 * ln_a),
            m0_mid: 9.0 * b / ln_a,
            gamma_tilde,
            gamma_hat,
            sigma_acute: (gamma_tilde > 9.0).then(|| 2.0 * m0 / (gamma_tilde.sqrt() - 3.0)),
            sigma_breve: (gamma_hat > 9.0).then(|| 2.0 * m0 / (gamma_hat.sqrt() - 3.0)),
        }
    }
}

/// Both regimes' thresholds, echoed in every report so output is self-describing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub sharing: SharingThresholds,
    pub non_sharing: NonSharingThresholds,
}

impl Thresholds {
    pub fn compute(params: &MarketParams, tech: &InfoTech) -> Self {
        Thresholds {
            sharing: SharingThresholds::compute(params, tech),
            non_sharing: NonSharingThresholds::compute(params, tech),
        }
    }
}

/// The three KKT cases of the stage-1 decision problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum KktCase {
    InteriorFoc,
    BoundaryM0,
    Infeasible,
}

/// KKT certificate for one player's strategy m_i against a fixed m_j.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityCertificate {
    pub m_i: f64,
    pub m_j: f64,
    pub regime: Regime,
    pub kkt_case: KktCase,
    /// Value of dJ/dm_i at the point.
    pub foc_residual: f64,
    /// Value of d2J/dm_i2 at the point.
    pub soc_value: f64,
}

/// A candidate or certified NE point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NePoint {
    pub m_i: f64,
    pub m_j: f64,
    pub category: NECategory,
}

/// Result of the grid oracle attached to indeterminate reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NumericFallback {
    pub grid_size: usize,
    pub profiles: Vec<StrategyProfile>,
    pub categories: Vec<NECategory>,
}

/// Full classification output: category, thresholds, NE points, per-player
/// certificates and free-text diagnostics (e.g. negative-quantity flags).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumReport {
    pub regime: Regime,
    pub category: NECategory,
    /// All NE categories the proposition certifies feasible at these
    /// parameters (may be more than one under no sharing).
    pub feasible_categories: Vec<NECategory>,
    pub thresholds: Thresholds,
    pub ne_points: Vec<NePoint>,
    pub certificates: Vec<FeasibilityCertificate>,
    pub diagnostics: Vec<String>,
    /// True when the parameters fall in a region the propositions leave open.
    pub proposition_gap: bool,
    /// Grid-oracle result, attached only for gap parameters.
    pub numeric_fallback: Option<NumericFallback>,
}

/// KKT classification of m_i as a stage-1 decision against m_j.
///
/// m_i = 0 is never feasible (the marginal payoff diverges there); the
/// boundary m_i = m0 is feasible iff dJ/dm_i >= 0 at m0; interior points
/// need a vanishing first derivative and non-positive second derivative.
pub fn kkt_feasible(
    m_i: f64,
    m_j: f64,
    regime: Regime,
    params: &MarketParams,
    tech: &InfoTech,
) -> Result<FeasibilityCertificate> {
    let surface = PayoffSurface::new(regime, *params, *tech)?;
    let foc = surface.marginal(m_i, m_j)?;
    let soc = surface.second_derivative(m_i, m_j)?;
    let at_boundary = (tech.m0 - m_i).abs() <= REL_TOL * tech.m0;
    let foc_scale = 1.0 + 1.0 / (m_i * tech.ln_alpha());
    let kkt_case = if at_boundary {
        if foc >= -REL_TOL * foc_scale {
            KktCase::BoundaryM0
        } else {
            KktCase::Infeasible
        }
    } else if foc.abs() <= 1e-7 * foc_scale && soc <= REL_TOL * foc_scale {
        KktCase::InteriorFoc
    } else {
        KktCase::Infeasible
    };
    Ok(FeasibilityCertificate { m_i, m_j, regime, kkt_case, foc_residual: foc, soc_value: soc })
}

/// Real roots in (0, m0] of the sharing-regime interior FOC against a rival
/// at m0, i.e. of A m^2 + B m + C = 0 with
///
/// ```text
/// A = 9 b (sigma + m0)^2
/// B = 18 b sigma m0 (sigma + m0) - sigma^2 m0^2 ln(alpha)
/// C = 9 b sigma^2 m0^2
/// ```
///
/// Empty when the discriminant is negative, i.e. when
/// sigma m0 ln(alpha) < 36 b (sigma + m0).
pub fn sharing_interior_candidates(params: &MarketParams, tech: &InfoTech) -> Vec<f64> {
    let (b, sigma, m0, ln_a) = (params.b, tech.sigma, tech.m0, tech.ln_alpha());
    let a = 9.0 * b * (sigma + m0) * (sigma + m0);
    let b_coef = 18.0 * b * sigma * m0 * (sigma + m0) - sigma * sigma * m0 * m0 * ln_a;
    let c = 9.0 * b * sigma * sigma * m0 * m0;
    let disc = b_coef * b_coef - 4.0 * a * c;
    if disc < 0.0 {
        return Vec::new();
    }
    // numerically stable quadratic roots
    let q = -0.5 * (b_coef + b_coef.signum() * disc.sqrt());
    let mut roots = vec![q / a, c / q];
    roots.sort_by(|x, y| x.partial_cmp(y).unwrap());
    roots.dedup();
    roots.retain(|&r| r > 0.0 && r <= m0 * (1.0 + REL_TOL));
    roots
}

/// Free-rider locus feasibility: (m, sigma^2 / (4m)) can be a NE under no
/// sharing iff (sqrt(3)-1)/2 * sigma <= m <= (1+sqrt(3))/4 * sigma (closed
/// interval), the locus exists (2 m0 > sigma), and the partner's point stays
/// inside the strategy space (sigma^2 / (4m) <= m0).
pub fn free_rider_locus_feasible(m: f64, sigma: f64, m0: f64) -> bool {
    let lo = (3.0f64.sqrt() - 1.0) / 2.0 * sigma;
    let hi = (1.0 + 3.0f64.sqrt()) / 4.0 * sigma;
    m >= lo && m <= hi && 2.0 * m0 > sigma && sigma * sigma / (4.0 * m) <= m0
}

/// Symmetric locus feasibility: (m, m) can be a NE under no sharing iff sigma > 2m.
pub fn symmetric_locus_feasible(m: f64, sigma: f64) -> bool {
    sigma > 2.0 * m
}

/// Numeric argmax of J_i(., m_j) over (0, m0]: the KKT candidate set
/// (interior FOC roots with non-positive second derivative, plus m0) ranked
/// by payoff, with ties broken toward m0 (no investment).
pub fn best_response(
    m_j: f64,
    regime: Regime,
    params: &MarketParams,
    tech: &InfoTech,
) -> Result<f64> {
    let surface = PayoffSurface::new(regime, *params, *tech)?;
    let mut candidates = interior_maxima(&surface, m_j)?;
    candidates.push(tech.m0);
    let j_m0 = surface.payoff(tech.m0, m_j)?;
    let mut best = tech.m0;
    let mut best_j = j_m0;
    for &c in &candidates {
        let j = surface.payoff(c, m_j)?;
        if j > best_j {
            best = c;
            best_j = j;
        }
    }
    // deterministic tie-break toward the no-investment boundary
    if (best_j - j_m0).abs() <= 1e-12 * best_j.abs().max(1.0) {
        best = tech.m0;
    }
    Ok(best)
}

/// Interior roots of dJ/dm_i = 0 with d2J/dm_i2 <= 0, found by bisection on
/// sign changes over a log-spaced bracket grid. The marginal diverges to
/// +infinity at m -> 0, so every descent into negative territory is bracketed.
fn interior_maxima(surface: &PayoffSurface, m_j: f64) -> Result<Vec<f64>> {
    const BRACKETS: usize = 256;
    let m0 = surface.tech.m0;
    let lo = 1e-9 * m0;
    let ratio = (m0 / lo).powf(1.0 / (BRACKETS as f64 - 1.0));
    let mut roots = Vec::new();
    let mut prev_m = lo;
    let mut prev_f = surface.marginal(prev_m, m_j)?;
    for k in 1..BRACKETS {
        let m = if k == BRACKETS - 1 { m0 } else { lo * ratio.powi(k as i32) };
        let f = surface.marginal(m, m_j)?;
        if prev_f == 0.0 {
            roots.push(prev_m);
        } else if prev_f.signum() != f.signum() {
            roots.push(bisect(surface, m_j, prev_m, m, prev_f)?);
        }
        prev_m = m;
        prev_f = f;
    }
    let mut maxima = Vec::new();
    for r in roots {
        if surface.second_derivative(r, m_j)? <= 1e-12 {
            maxima.push(r);
        }
    }
    Ok(maxima)
}

fn bisect(surface: &PayoffSurface, m_j: f64, mut lo: f64, mut hi: f64, f_lo: f64) -> Result<f64> {
    let lo_positive = f_lo > 0.0;
    while hi - lo > 1e-13 * hi {
        let mid = 0.5 * (lo + hi);
        let f = surface.marginal(mid, m_j)?;
        if (f > 0.0) == lo_positive {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Grid-search NE oracle, independent of the closed-form classifiers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BruteForceNe {
    pub grid: Vec<f64>,
    pub profiles: Vec<StrategyProfile>,
    pub categories: Vec<NECategory>,
}

impl BruteForceNe {
    pub fn unique_categories(&self) -> Vec<NECategory> {
        let mut cats = self.categories.clone();
        cats.sort();
        cats.dedup();
        cats
    }
}

/// Exhaustive grid search for mutual best responses. The grid is log-spaced
/// (thresholds span orders of magnitude) and always contains m0 exactly so
/// boundary NE are representable. Categories map grid NE to [`NECategory`]
/// with a boundary tolerance of one grid cell.
pub fn brute_force_ne(
    regime: Regime,
    params: &MarketParams,
    tech: &InfoTech,
    grid_size: usize,
) -> Result<BruteForceNe> {
    if grid_size < 50 {
        return Err(Error::domain(format!("grid_size must be >= 50, got {grid_size}")));
    }
    let surface = PayoffSurface::new(regime, *params, *tech)?;
    let m0 = tech.m0;
    let lo = 1e-6 * m0;
    let ratio = (m0 / lo).powf(1.0 / grid_size as f64);
    let mut grid: Vec<f64> = (0..grid_size).map(|k| lo * ratio.powi(k as i32)).collect();
    grid.push(m0);
    let n = grid.len();

    // payoff[i][j] = J of the player choosing grid[i] against grid[j];
    // row-parallel, deterministic regardless of thread count.
    let payoff: Vec<Vec<f64>> = grid
        .par_iter()
        .map(|&m_i| grid.iter().map(|&m_j| surface.payoff(m_i, m_j).unwrap()).collect())
        .collect();

    let mut col_max = vec![f64::NEG_INFINITY; n];
    for row in &payoff {
        for (j, &v) in row.iter().enumerate() {
            if v > col_max[j] {
                col_max[j] = v;
            }
        }
    }
    let is_best =
        |i: usize, j: usize| payoff[i][j] >= col_max[j] - 1e-12 * col_max[j].abs().max(1.0);

    let mut profiles = Vec::new();
    let mut categories = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if is_best(i, j) && is_best(j, i) {
                profiles.push(StrategyProfile { m_i: grid[i], m_j: grid[j], regime });
                categories.push(grid_category(i, j, n));
            }
        }
    }
    Ok(BruteForceNe { grid, profiles, categories })
}

fn grid_category(i: usize, j: usize, n: usize) -> NECategory {
    // boundary tolerance: within one grid cell of m0
    let at_m0 = |k: usize| k + 2 >= n;
    let cell_apart = i.abs_diff(j) <= 1;
    match (at_m0(i), at_m0(j)) {
        (true, true) => NECategory::NeitherInvests,
        (true, false) | (false, true) => NECategory::OneInvests,
        (false, false) if cell_apart => NECategory::BothInvestSymmetric,
        (false, false) => NECategory::BothInvestAsymmetric,
    }
}

/// Outcome of an epsilon-NE verification.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpsilonNeOutcome {
    /// epsilon = eta + delta, the lemma's bound.
    pub epsilon: f64,
    /// Best unilateral deviation found exceeding epsilon, if any:
    /// (player index 0/1, deviating m, payoff improvement).
    pub violation: Option<(usize, f64, f64)>,
}

/// Checks that no unilateral deviation (searched on a log grid plus m0)
/// improves either player's payoff by more than epsilon = eta + delta.
pub fn epsilon_ne_check(
    profile: &StrategyProfile,
    params: &MarketParams,
    tech: &InfoTech,
    eta: f64,
    delta: f64,
) -> Result<EpsilonNeOutcome> {
    if eta < 0.0 || delta < 0.0 {
        return Err(Error::domain("eta and delta must be non-negative".to_string()));
    }
    let epsilon = eta + delta;
    let surface = PayoffSurface::new(profile.regime, *params, *tech)?;
    let m0 = tech.m0;
    let lo = 1e-6 * m0;
    let steps = 400usize;
    let ratio = (m0 / lo).powf(1.0 / steps as f64);
    let mut deviations: Vec<f64> = (0..steps).map(|k| lo * ratio.powi(k as i32)).collect();
    deviations.push(m0);

    let mut violation: Option<(usize, f64, f64)> = None;
    for (player, (own, other)) in
        [(profile.m_i, profile.m_j), (profile.m_j, profile.m_i)].into_iter().enumerate()
    {
        let base = surface.payoff(own, other)?;
        for &dev in &deviations {
            let gain = surface.payoff(dev, other)? - base;
            if gain > epsilon + 1e-12 * base.abs().max(1.0) {
                match violation {
                    Some((_, _, g)) if g >= gain => {}
                    _ => violation = Some((player, dev, gain)),
                }
            }
        }
    }
    Ok(EpsilonNeOutcome { epsilon, violation })
}

/// Appendix exclusion property: (m_hat, m0) and (m0, m0) can both be NE only
/// on the knife edge where they yield the same payoff. Returns true when the
/// exclusion holds (or the knife-edge equality explains the coincidence).
pub fn mutually_exclusive_check(
    params: &MarketParams,
    tech: &InfoTech,
    regime: Regime,
) -> Result<bool> {
    let surface = PayoffSurface::new(regime, *params, *tech)?;
    let m0 = tech.m0;
    let br_to_m0 = best_response(m0, regime, params, tech)?;

    let boundary_ne = br_to_m0 == m0;
    let free_rider_ne = if br_to_m0 < m0 {
        // (m_hat, m0) is a NE if m0 is in turn a best reply to m_hat
        best_response(br_to_m0, regime, params, tech)? == m0
    } else {
        false
    };

    if boundary_ne && free_rider_ne {
        let j_hat = surface.payoff(br_to_m0, m0)?;
        let j_m0 = surface.payoff(m0, m0)?;
        return Ok((j_hat - j_m0).abs() <= REL_TOL * j_m0.abs().max(1.0));
    }
    Ok(true)
}

/// Closed-form NE classification under mandatory sharing.
pub fn classify_sharing(params: &MarketParams, tech: &InfoTech) -> Result<EquilibriumReport> {
    params.require_identical_products()?;
    let thresholds = Thresholds::compute(params, tech);
    let sh = thresholds.sharing;
    let (sigma, m0) = (tech.sigma, tech.m0);
    let mut report = EquilibriumReport {
        regime: Regime::Sharing,
        category: NECategory::IndeterminateByProposition,
        feasible_categories: Vec::new(),
        thresholds,
        ne_points: Vec::new(),
        certificates: Vec::new(),
        diagnostics: Vec::new(),
        proposition_gap: false,
        numeric_fallback: None,
    };

    let below_crit = m0 < sh.m0_crit;
    let below_tilde = sh.sigma_tilde.map_or(true, |st| sigma < st);
    let above_hat = sh.sigma_hat_thr.is_some_and(|shh| sigma >= shh);

    if below_crit || below_tilde {
        report.category = NECategory::NeitherInvests;
        report.feasible_categories = vec![NECategory::NeitherInvests];
        report.ne_points.push(NePoint { m_i: m0, m_j: m0, category: NECategory::NeitherInvests });
        report.certificates.push(kkt_feasible(m0, m0, Regime::Sharing, params, tech)?);
    } else if above_hat {
        let roots = sharing_interior_candidates(params, tech);
        let m_hat = *roots.first().ok_or_else(|| {
            Error::Internal("sharing classifier: no interior candidate above threshold".into())
        })?;
        report.category = NECategory::OneInvests;
        report.feasible_categories = vec![NECategory::OneInvests];
        // the labeling of the investing insurer is arbitrary: report the pair
        report.ne_points.push(NePoint { m_i: m_hat, m_j: m0, category: NECategory::OneInvests });
        report.ne_points.push(NePoint { m_i: m0, m_j: m_hat, category: NECategory::OneInvests });
        report.certificates.push(kkt_feasible(m_hat, m0, Regime::Sharing, params, tech)?);
        report.certificates.push(kkt_feasible(m0, m_hat, Regime::Sharing, params, tech)?);
    } else {
        numeric_gap_fallback(&mut report, Regime::Sharing, params, tech)?;
    }
    Ok(report)
}

/// Closed-form NE classification when signals stay private.
pub fn classify_nonsharing(params: &MarketParams, tech: &InfoTech) -> Result<EquilibriumReport> {
    params.require_identical_products()?;
    let thresholds = Thresholds::compute(params, tech);
    let ns = thresholds.non_sharing;
    let (sigma, m0) = (tech.sigma, tech.m0);
    let mut report = EquilibriumReport {
        regime: Regime::NonSharing,
        category: NECategory::IndeterminateByProposition,
        feasible_categories: Vec::new(),
        thresholds,
        ne_points: Vec::new(),
        certificates: Vec::new(),
        diagnostics: Vec::new(),
        proposition_gap: false,
        numeric_fallback: None,
    };

    let only_ne = m0 <= ns.m0_low;
    let below_acute = !only_ne && ns.sigma_acute.is_some_and(|sa| sigma <= sa);
    let invest_feasible =
        m0 > ns.m0_mid && ns.sigma_breve.is_some_and(|sb| sigma >= sb);

    if only_ne || below_acute {
        report.category = NECategory::NeitherInvests;
        report.feasible_categories = vec![NECategory::NeitherInvests];
        report.ne_points.push(NePoint { m_i: m0, m_j: m0, category: NECategory::NeitherInvests });
        report.certificates.push(kkt_feasible(m0, m0, Regime::NonSharing, params, tech)?);
        if only_ne {
            report.diagnostics.push("m0 <= 27b/(5 ln alpha): (m0, m0) is the only NE".into());
        }
    } else if invest_feasible {
        report.category = NECategory::BothInvestSymmetric;
        report.feasible_categories = vec![NECategory::OneInvests, NECategory::BothInvestSymmetric];
        // symmetric interior candidate: fixed point of the best response on
        // the diagonal, located by bisection on dJ/dm_i(m, m)
        if let Some(m_sym) = symmetric_foc_root(params, tech)? {
            report.ne_points.push(NePoint {
                m_i: m_sym,
                m_j: m_sym,
                category: NECategory::BothInvestSymmetric,
            });
            report
                .certificates
                .push(kkt_feasible(m_sym, m_sym, Regime::NonSharing, params, tech)?);
        }
        // one-invests candidate against a rival at m0
        let br = best_response(m0, Regime::NonSharing, params, tech)?;
        if br < m0 {
            report.ne_points.push(NePoint { m_i: br, m_j: m0, category: NECategory::OneInvests });
            report.ne_points.push(NePoint { m_i: m0, m_j: br, category: NECategory::OneInvests });
            report.certificates.push(kkt_feasible(br, m0, Regime::NonSharing, params, tech)?);
        }
    } else {
        numeric_gap_fallback(&mut report, Regime::NonSharing, params, tech)?;
    }
    Ok(report)
}

/// Root of dJ/dm_i(m, m) = 0 on the diagonal under no sharing, if any.
fn symmetric_foc_root(params: &MarketParams, tech: &InfoTech) -> Result<Option<f64>> {
    let surface = PayoffSurface::new(Regime::NonSharing, *params, *tech)?;
    let m0 = tech.m0;
    let f = |m: f64| -> Result<f64> { surface.marginal(m, m) };
    let mut lo = 1e-9 * m0;
    if f(lo)? <= 0.0 || f(m0)? > 0.0 {
        return Ok(None);
    }
    let mut hi = m0;
    while hi - lo > 1e-13 * hi {
        let mid = 0.5 * (lo + hi);
        if f(mid)? > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(Some(0.5 * (lo + hi)))
}

/// Fills a report for parameters in a proposition gap: the category stays
/// `IndeterminateByProposition`; numeric KKT + grid results are attached and
/// clearly labeled as numeric.
fn numeric_gap_fallback(
    report: &mut EquilibriumReport,
    regime: Regime,
    params: &MarketParams,
    tech: &InfoTech,
) -> Result<()> {
    report.proposition_gap = true;
    report.category = NECategory::IndeterminateByProposition;
    report.diagnostics.push(
        "parameters fall in a proposition gap; attached results are numeric (grid + KKT), \
         not closed-form claims"
            .into(),
    );
    let bf = brute_force_ne(regime, params, tech, 200)?;
    report.feasible_categories = bf.unique_categories();
    for (profile, category) in bf.profiles.iter().zip(&bf.categories) {
        report.ne_points.push(NePoint { m_i: profile.m_i, m_j: profile.m_j, category: *category });
        report.certificates.push(kkt_feasible(profile.m_i, profile.m_j, regime, params, tech)?);
    }
    report.numeric_fallback = Some(NumericFallback {
        grid_size: 200,
        profiles: bf.profiles,
        categories: bf.categories,
    });
    Ok(())
}

/// Classify under either regime.
pub fn classify(regime: Regime, params: &MarketParams, tech: &InfoTech) -> Result<EquilibriumReport> {
    match regime {
        Regime::Sharing => classify_sharing(params, tech),
        Regime::NonSharing => classify_nonsharing(params, tech),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::payoff::{marginal_sharing, payoff_sharing, second_derivative_sharing};

    fn paper_setup(sigma: f64) -> (MarketParams, InfoTech) {
        let m0 = 1.5 * 36.0 / 3.0f64.ln();
        (
            MarketParams::symmetric(10.0, 1.0).unwrap(),
            InfoTech::new(sigma, m0, 3.0).unwrap(),
        )
    }

    #[test]
    fn threshold_values_at_paper_scale() {
        let (p, t) = paper_setup(50.0);
        let th = Thresholds::compute(&p, &t);
        let m0 = t.m0;
        // m0 ln alpha = 54 exactly, so Gamma^2 = 6, gamma_tilde = 90, gamma_hat = 54
        assert!((th.sharing.gamma * th.sharing.gamma - 6.0).abs() < 1e-12);
        assert!((th.sharing.sigma_tilde.unwrap() - 2.0 * m0).abs() < 1e-9 * m0);
        assert!(
            (th.sharing.sigma_hat_thr.unwrap() - m0 / (6.0f64.sqrt() - 2.0)).abs() < 1e-9 * m0
        );
        assert!((th.non_sharing.gamma_tilde - 90.0).abs() < 1e-12);
        assert!((th.non_sharing.gamma_hat - 54.0).abs() < 1e-12);
        assert!(
            (th.non_sharing.sigma_acute.unwrap() - 2.0 * m0 / (90.0f64.sqrt() - 3.0)).abs()
                < 1e-9 * m0
        );
        assert!(
            (th.non_sharing.sigma_breve.unwrap() - 2.0 * m0 / (54.0f64.sqrt() - 3.0)).abs()
                < 1e-9 * m0
        );
        // ordering
        assert!(th.non_sharing.sigma_acute.unwrap() < th.non_sharing.sigma_breve.unwrap());
        assert!(th.sharing.sigma_tilde.unwrap() < th.sharing.sigma_hat_thr.unwrap());
    }

    #[test]
    fn thresholds_undefined_below_crit() {
        let p = MarketParams::symmetric(10.0, 1.0).unwrap();
        let t = InfoTech::new(10.0, 16.0, 3.0).unwrap(); // m0 ln alpha < 36 b
        let th = Thresholds::compute(&p, &t);
        assert!(th.sharing.sigma_tilde.is_none());
        assert!(th.sharing.sigma_hat_thr.is_none());
    }

    #[test]
    fn sharing_interior_candidates_cases() {
        let p = MarketParams::symmetric(10.0, 1.0).unwrap();
        // m0 below 36b/ln alpha: always empty
        let t = InfoTech::new(100.0, 16.0, 3.0).unwrap();
        assert!(sharing_interior_candidates(&p, &t).is_empty());
        // paper m0, sigma below sigma_tilde: empty
        let (_, t) = paper_setup(90.0);
        assert!(sharing_interior_candidates(&p, &t).is_empty());
        // sigma above the investment threshold: exactly one root in (0, m0]
        let (_, t) = paper_setup(120.0);
        let roots = sharing_interior_candidates(&p, &t);
        assert_eq!(roots.len(), 1, "roots = {roots:?}");
        assert!((roots[0] - 21.124_328_87).abs() < 1e-6, "root = {}", roots[0]);
    }

    #[test]
    fn classify_sharing_proposition_cases() {
        // m0 = 0.5 * 36 / ln 3: neither invests for any sigma
        let p = MarketParams::symmetric(10.0, 1.0).unwrap();
        let t = InfoTech::new(500.0, 0.5 * 36.0 / 3.0f64.ln(), 3.0).unwrap();
        let r = classify_sharing(&p, &t).unwrap();
        assert_eq!(r.category, NECategory::NeitherInvests);

        // paper m0, sigma = 0.9 sigma_tilde: neither invests
        let (p, t0) = paper_setup(1.0);
        let sigma_tilde = Thresholds::compute(&p, &t0).sharing.sigma_tilde.unwrap();
        let t = InfoTech::new(0.9 * sigma_tilde, t0.m0, 3.0).unwrap();
        let r = classify_sharing(&p, &t).unwrap();
        assert_eq!(r.category, NECategory::NeitherInvests);

        // paper m0, sigma = 1.2 sigma_hat_thr: one invests
        let sigma_hat = Thresholds::compute(&p, &t0).sharing.sigma_hat_thr.unwrap();
        let t = InfoTech::new(1.2 * sigma_hat, t0.m0, 3.0).unwrap();
        let r = classify_sharing(&p, &t).unwrap();
        assert_eq!(r.category, NECategory::OneInvests);
        assert_eq!(r.ne_points.len(), 2); // unordered pair, both labelings
        assert!(r.ne_points[0].m_i < t0.m0);

        // in the gap: indeterminate with numeric fallback
        let t = InfoTech::new(0.5 * (sigma_tilde + sigma_hat), t0.m0, 3.0).unwrap();
        let r = classify_sharing(&p, &t).unwrap();
        assert_eq!(r.category, NECategory::IndeterminateByProposition);
        assert!(r.proposition_gap);
        assert!(r.numeric_fallback.is_some());
    }

    #[test]
    fn classify_nonsharing_proposition_cases() {
        let p = MarketParams::symmetric(10.0, 1.0).unwrap();
        // m0 = 4 < 27/(5 ln 3) =~ 4.915: neither invests for any sigma
        let t = InfoTech::new(300.0, 4.0, 3.0).unwrap();
        let r = classify_nonsharing(&p, &t).unwrap();
        assert_eq!(r.category, NECategory::NeitherInvests);

        // paper m0, sigma = 10 < sigma_acute =~ 15.16: neither invests
        let (_, t0) = paper_setup(10.0);
        let r = classify_nonsharing(&p, &t0).unwrap();
        assert_eq!(r.category, NECategory::NeitherInvests);

        // sigma = 30 > sigma_breve =~ 22.61: investing equilibria feasible
        let t = InfoTech::new(30.0, t0.m0, 3.0).unwrap();
        let r = classify_nonsharing(&p, &t).unwrap();
        assert!(r.feasible_categories.contains(&NECategory::OneInvests));
        assert!(r.feasible_categories.contains(&NECategory::BothInvestSymmetric));
        // symmetric candidate present and feasibility-certified
        let sym = r
            .ne_points
            .iter()
            .find(|n| n.category == NECategory::BothInvestSymmetric)
            .expect("symmetric NE candidate");
        assert!(sym.m_i < t.m0 && (sym.m_i - sym.m_j).abs() < 1e-9);

        // gap between sigma_acute and sigma_breve: indeterminate
        let t = InfoTech::new(18.0, t0.m0, 3.0).unwrap();
        let r = classify_nonsharing(&p, &t).unwrap();
        assert_eq!(r.category, NECategory::IndeterminateByProposition);
        assert!(r.numeric_fallback.is_some());
    }

    #[test]
    fn free_rider_locus_cases() {
        assert!(free_rider_locus_feasible(2.0, 4.0, 49.0));
        assert!(!free_rider_locus_feasible(1.0, 4.0, 49.0)); // below interval
        // upper endpoint inclusive: m = (1+sqrt(3))/4 * sigma
        let m = (1.0 + 3.0f64.sqrt()) / 4.0 * 4.0;
        assert!(free_rider_locus_feasible(m, 4.0, 49.0));
        // locus must exist: 2 m0 > sigma
        assert!(!free_rider_locus_feasible(2.0, 4.0, 1.9));
        // partner point sigma^2/(4m) must stay inside (0, m0]
        assert!(!free_rider_locus_feasible(1.8, 4.0, 2.15));
    }

    #[test]
    fn symmetric_locus_cases() {
        assert!(symmetric_locus_feasible(2.0, 5.0));
        assert!(!symmetric_locus_feasible(2.0, 4.0)); // strict
    }

    #[test]
    fn free_rider_implies_symmetric() {
        // a feasible free-rider point implies a feasible symmetric point at
        // the same (sigma, m0), except on the degenerate diagonal m = sigma/2
        // where the pair (m, sigma^2/(4m)) collapses onto the strict
        // sigma > 2m boundary
        assert!(!symmetric_locus_feasible(0.5, 1.0));
        for sigma in [1.0, 4.0, 10.0, 33.0] {
            for frac in [0.4, 0.45, 0.6] {
                let m = frac * sigma;
                let m0 = sigma; // 2 m0 > sigma holds
                if free_rider_locus_feasible(m, sigma, m0) {
                    // take m' = m (the smaller of the pair): sigma > 2m must hold
                    let m_small = m.min(sigma * sigma / (4.0 * m));
                    assert!(
                        symmetric_locus_feasible(m_small, sigma),
                        "sigma {sigma}, m {m}"
                    );
                }
            }
        }
    }

    #[test]
    fn kkt_cases_at_paper_points() {
        let p = MarketParams::symmetric(10.0, 1.0).unwrap();
        // sharing with small m0: (m0, m0) is a boundary optimum
        let t = InfoTech::new(50.0, 16.0, 3.0).unwrap();
        let cert = kkt_feasible(t.m0, t.m0, Regime::Sharing, &p, &t).unwrap();
        assert_eq!(cert.kkt_case, KktCase::BoundaryM0);

        // a symmetric interior sharing FOC point is a local minimum: infeasible
        let t = InfoTech::new(120.0, 49.0, 3.0).unwrap();
        let f = |m: f64| marginal_sharing(m, m, &p, &t).unwrap();
        let (mut lo, mut hi) = (1e-6, 49.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(mid) > 0.0 {
                lo = mid
            } else {
                hi = mid
            }
        }
        let m = 0.5 * (lo + hi);
        let cert = kkt_feasible(m, m, Regime::Sharing, &p, &t).unwrap();
        assert_eq!(cert.kkt_case, KktCase::Infeasible);
        assert!(cert.soc_value > 0.0);
        assert!(second_derivative_sharing(m, m, &p, &t).unwrap() > 0.0);
    }

    #[test]
    fn best_response_boundary_when_m0_small() {
        let p = MarketParams::symmetric(10.0, 1.0).unwrap();
        let t = InfoTech::new(50.0, 16.0, 3.0).unwrap(); // m0 < 36b/ln alpha
        for m_j in [0.5, 4.0, 16.0] {
            assert_eq!(best_response(m_j, Regime::Sharing, &p, &t).unwrap(), t.m0);
        }
    }

    #[test]
    fn best_response_crosses_diagonal_nonsharing() {
        // Fig.-7-style parameters: interior symmetric NE exists, so the best
        // response crosses the diagonal at an interior point.
        let (p, t) = paper_setup(30.0);
        let br_at_m0 = best_response(t.m0, Regime::NonSharing, &p, &t).unwrap();
        assert!(br_at_m0 < t.m0);
        let m_sym = symmetric_foc_root(&p, &t).unwrap().expect("symmetric FOC root");
        let br = best_response(m_sym, Regime::NonSharing, &p, &t).unwrap();
        assert!((br - m_sym).abs() < 1e-6 * m_sym, "br {br} vs m_sym {m_sym}");
    }

    #[test]
    fn best_response_nonincreasing_nonsharing() {
        let (p, t) = paper_setup(30.0);
        let mut prev = f64::INFINITY;
        for k in 0..30 {
            let m_j = t.m0 * (0.05 + 0.95 * k as f64 / 29.0);
            let br = best_response(m_j, Regime::NonSharing, &p, &t).unwrap();
            if br < t.m0 && prev < f64::INFINITY {
                assert!(br <= prev * (1.0 + 1e-9), "br increased at m_j = {m_j}");
            }
            if br < t.m0 {
                prev = br;
            }
        }
    }

    #[test]
    fn brute_force_matches_classifier_probe_points() {
        let p = MarketParams::symmetric(10.0, 1.0).unwrap();
        // sharing, small m0: unique grid NE at (m0, m0)
        let t = InfoTech::new(50.0, 16.0, 3.0).unwrap();
        let bf = brute_force_ne(Regime::Sharing, &p, &t, 200).unwrap();
        assert_eq!(bf.unique_categories(), vec![NECategory::NeitherInvests]);
        assert!(bf.profiles.iter().any(|pr| pr.m_i == t.m0 && pr.m_j == t.m0));

        // sharing at one-invests parameters: grid NE pair (m_hat, m0) / (m0, m_hat)
        let (p, t0) = paper_setup(1.0);
        let sigma_hat = Thresholds::compute(&p, &t0).sharing.sigma_hat_thr.unwrap();
        let t = InfoTech::new(1.2 * sigma_hat, t0.m0, 3.0).unwrap();
        let bf = brute_force_ne(Regime::Sharing, &p, &t, 200).unwrap();
        assert_eq!(bf.unique_categories(), vec![NECategory::OneInvests]);

        // non-sharing at sigma = 30: symmetric grid NE present
        let t = InfoTech::new(30.0, t0.m0, 3.0).unwrap();
        let bf = brute_force_ne(Regime::NonSharing, &p, &t, 200).unwrap();
        assert!(bf.unique_categories().contains(&NECategory::BothInvestSymmetric));
    }

    #[test]
    fn brute_force_rejects_small_grid() {
        let (p, t) = paper_setup(30.0);
        assert!(brute_force_ne(Regime::Sharing, &p, &t, 10).is_err());
    }

    #[test]
    fn epsilon_ne_accepts_exact_ne_and_sums_bounds() {
        let p = MarketParams::symmetric(10.0, 1.0).unwrap();
        let t = InfoTech::new(50.0, 16.0, 3.0).unwrap();
        let profile = StrategyProfile { m_i: t.m0, m_j: t.m0, regime: Regime::Sharing };
        let out = epsilon_ne_check(&profile, &p, &t, 0.0, 0.0).unwrap();
        assert_eq!(out.epsilon, 0.0);
        assert!(out.violation.is_none());
        let out = epsilon_ne_check(&profile, &p, &t, 0.1, 0.2).unwrap();
        assert!((out.epsilon - 0.3).abs() < 1e-15);
    }

    #[test]
    fn epsilon_ne_reports_violation_witness() {
        // perturb an exact NE away from the optimum: with epsilon = 0 the
        // checker must produce a witness deviation
        let (p, t0) = paper_setup(1.0);
        let sigma_hat = Thresholds::compute(&p, &t0).sharing.sigma_hat_thr.unwrap();
        let t = InfoTech::new(1.2 * sigma_hat, t0.m0, 3.0).unwrap();
        let m_hat = sharing_interior_candidates(&p, &t)[0];
        let perturbed = StrategyProfile {
            m_i: (m_hat * 1.5).min(t.m0),
            m_j: t.m0,
            regime: Regime::Sharing,
        };
        let out = epsilon_ne_check(&perturbed, &p, &t, 0.0, 0.0).unwrap();
        let (player, dev, gain) = out.violation.expect("expected a witness");
        assert_eq!(player, 0);
        assert!(gain > 0.0);
        assert!(dev < t.m0);
    }

    #[test]
    fn mutual_exclusion_at_figure_parameters() {
        let (p, t0) = paper_setup(1.0);
        let th = Thresholds::compute(&p, &t0).sharing;
        // one-invests parameters: only (m_hat, m0) certified
        let t = InfoTech::new(1.2 * th.sigma_hat_thr.unwrap(), t0.m0, 3.0).unwrap();
        assert!(mutually_exclusive_check(&p, &t, Regime::Sharing).unwrap());
        assert!(best_response(t.m0, Regime::Sharing, &p, &t).unwrap() < t.m0);
        // neither-invests parameters: only (m0, m0) certified
        let t = InfoTech::new(0.9 * th.sigma_tilde.unwrap(), t0.m0, 3.0).unwrap();
        assert!(mutually_exclusive_check(&p, &t, Regime::Sharing).unwrap());
        assert_eq!(best_response(t.m0, Regime::Sharing, &p, &t).unwrap(), t.m0);
    }

    #[test]
    fn knife_edge_equal_payoffs_flagged_allowed() {
        // Root-find sigma where J(m_hat, m0) = J(m0, m0): at the switch point
        // both profiles are payoff-equivalent and the exclusion lemma allows
        // the coincidence.
        let (p, t0) = paper_setup(1.0);
        let m0 = t0.m0;
        let diff = |sigma: f64| -> f64 {
            let t = InfoTech::new(sigma, m0, 3.0).unwrap();
            let roots = sharing_interior_candidates(&p, &t);
            match roots.first() {
                Some(&m_hat) => {
                    payoff_sharing(m_hat, m0, &p, &t).unwrap()
                        - payoff_sharing(m0, m0, &p, &t).unwrap()
                }
                None => -1.0,
            }
        };
        let th = Thresholds::compute(&p, &t0).sharing;
        let (mut lo, mut hi) = (th.sigma_tilde.unwrap() * 1.001, th.sigma_hat_thr.unwrap() * 1.5);
        assert!(diff(lo) < 0.0 && diff(hi) > 0.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if diff(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let sigma_star = 0.5 * (lo + hi);
        assert!(diff(sigma_star).abs() < 1e-9);
        let t = InfoTech::new(sigma_star, m0, 3.0).unwrap();
        assert!(mutually_exclusive_check(&p, &t, Regime::Sharing).unwrap());
    }
}
