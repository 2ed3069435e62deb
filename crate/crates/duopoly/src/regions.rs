//! Maps the (sigma, m0) plane to NE categories per regime and computes the
//! policy-comparison regions:
//!
//! * Region A: switching to mandatory sharing removes all investment (the
//!   non-sharing NE involves investment while the sharing NE is (m0, m0)).
//! * Region B: mandatory sharing forecloses the symmetric-investment NE,
//!   leaving only free-riding (sharing admits only OneInvests while
//!   non-sharing admits BothInvestSymmetric).
//!
//! Output is a cell grid plus deterministic CSV/JSON exports; rendering is
//! delegated to external tools.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::equilibrium::{classify, EquilibriumReport, NECategory};
use crate::error::{Error, Result};
use crate::market::{InfoTech, MarketParams, Regime};

/// Regime-change label of one grid cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ComparisonLabel {
    Same,
    RegionA,
    RegionB,
    Other,
}

impl std::fmt::Display for ComparisonLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            ComparisonLabel::Same => "Same",
            ComparisonLabel::RegionA => "A",
            ComparisonLabel::RegionB => "B",
            ComparisonLabel::Other => "Other",
        };
        write!(f, "{s}")
    }
}

/// Classification of one (sigma, m0) cell under one or both regimes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionCell {
    pub sigma: f64,
    pub m0: f64,
    pub sharing: Option<CellOutcome>,
    pub non_sharing: Option<CellOutcome>,
    pub comparison: Option<ComparisonLabel>,
}

/// Per-regime outcome of a cell. `gap` marks proposition-gap cells whose
/// category comes from the numeric fallback, so plots can hatch them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellOutcome {
    pub category: NECategory,
    pub feasible: Vec<NECategory>,
    pub gap: bool,
}

impl CellOutcome {
    fn from_report(r: &EquilibriumReport) -> Self {
        CellOutcome {
            category: r.category,
            feasible: r.feasible_categories.clone(),
            gap: r.proposition_gap,
        }
    }

    fn invests(&self) -> bool {
        self.feasible.iter().any(|c| {
            matches!(
                c,
                NECategory::OneInvests
                    | NECategory::BothInvestSymmetric
                    | NECategory::BothInvestAsymmetric
            )
        })
    }
}

/// Axis specification: strictly increasing sample points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum AxisScale {
    /// Geometric spacing (default: thresholds are ratio-driven).
    Geometric,
    /// Linear spacing, for visual parity with linear-axis figures.
    Linear,
}

pub fn axis(lo: f64, hi: f64, n: usize, scale: AxisScale) -> Result<Vec<f64>> {
    if !(lo > 0.0 && hi > lo) || n < 2 {
        return Err(Error::domain(format!(
            "axis requires 0 < lo < hi and n >= 2, got lo = {lo}, hi = {hi}, n = {n}"
        )));
    }
    let mut pts = match scale {
        AxisScale::Geometric => {
            let r = (hi / lo).powf(1.0 / (n as f64 - 1.0));
            (0..n).map(|k| lo * r.powi(k as i32)).collect::<Vec<f64>>()
        }
        AxisScale::Linear => {
            let step = (hi - lo) / (n as f64 - 1.0);
            (0..n).map(|k| lo + step * k as f64).collect::<Vec<f64>>()
        }
    };
    // pin the endpoints exactly: rounding in powi/mul can overshoot hi by an
    // ulp, which matters when hi is a hard domain boundary like m0
    pts[0] = lo;
    pts[n - 1] = hi;
    Ok(pts)
}

/// A full grid over the (sigma, m0) plane. Cells are stored row-major by m0
/// then sigma (canonical output ordering).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionGrid {
    pub sigma_axis: Vec<f64>,
    pub m0_axis: Vec<f64>,
    pub cells: Vec<RegionCell>,
}

impl RegionGrid {
    /// Counts of comparison labels, for the JSON summary.
    pub fn comparison_counts(&self) -> RegionSummary {
        let mut s = RegionSummary::default();
        for c in &self.cells {
            match c.comparison {
                Some(ComparisonLabel::Same) => s.same += 1,
                Some(ComparisonLabel::RegionA) => s.region_a += 1,
                Some(ComparisonLabel::RegionB) => s.region_b += 1,
                Some(ComparisonLabel::Other) => s.other += 1,
                None => {}
            }
        }
        s.total = self.cells.len();
        s
    }

    /// Deterministic CSV: one row per cell.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "sigma,m0,category_sharing,category_nonsharing,comparison_label,gap_flag\n",
        );
        for c in &self.cells {
            let cat = |o: &Option<CellOutcome>| {
                o.as_ref().map_or(String::new(), |o| {
                    o.feasible
                        .iter()
                        .map(|c| c.to_string())
                        .collect::<Vec<_>>()
                        .join("|")
                })
            };
            let gap = c.sharing.as_ref().map_or(false, |o| o.gap)
                || c.non_sharing.as_ref().map_or(false, |o| o.gap);
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                c.sigma,
                c.m0,
                cat(&c.sharing),
                cat(&c.non_sharing),
                c.comparison.map_or(String::new(), |l| l.to_string()),
                gap as u8,
            ));
        }
        out
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegionSummary {
    pub total: usize,
    pub same: usize,
    pub region_a: usize,
    pub region_b: usize,
    pub other: usize,
}

/// Classify every cell under one regime. `params` supplies (a, b, d);
/// `alpha` the investment efficacy; sigma and m0 come from the axes.
pub fn region_map(
    sigma_axis: &[f64],
    m0_axis: &[f64],
    regime: Regime,
    params: &MarketParams,
    alpha: f64,
) -> Result<RegionGrid> {
    check_axes(sigma_axis, m0_axis)?;
    let cells = par_cells(sigma_axis, m0_axis, params, alpha, |p, t| {
        let r = classify(regime, p, t)?;
        let outcome = CellOutcome::from_report(&r);
        Ok(RegionCell {
            sigma: t.sigma,
            m0: t.m0,
            sharing: (regime == Regime::Sharing).then(|| outcome.clone()),
            non_sharing: (regime == Regime::NonSharing).then_some(outcome),
            comparison: None,
        })
    })?;
    Ok(RegionGrid {
        sigma_axis: sigma_axis.to_vec(),
        m0_axis: m0_axis.to_vec(),
        cells,
    })
}

/// Classify every cell under both regimes and attach comparison labels.
pub fn regime_comparison(
    sigma_axis: &[f64],
    m0_axis: &[f64],
    params: &MarketParams,
    alpha: f64,
) -> Result<RegionGrid> {
    check_axes(sigma_axis, m0_axis)?;
    let cells = par_cells(sigma_axis, m0_axis, params, alpha, |p, t| {
        let sharing = CellOutcome::from_report(&classify(Regime::Sharing, p, t)?);
        let non_sharing = CellOutcome::from_report(&classify(Regime::NonSharing, p, t)?);
        let comparison = Some(compare(&sharing, &non_sharing));
        Ok(RegionCell {
            sigma: t.sigma,
            m0: t.m0,
            sharing: Some(sharing),
            non_sharing: Some(non_sharing),
            comparison,
        })
    })?;
    Ok(RegionGrid {
        sigma_axis: sigma_axis.to_vec(),
        m0_axis: m0_axis.to_vec(),
        cells,
    })
}

fn compare(sharing: &CellOutcome, non_sharing: &CellOutcome) -> ComparisonLabel {
    let sharing_none = sharing.category == NECategory::NeitherInvests;
    let sharing_only_one = sharing.feasible == vec![NECategory::OneInvests];
    if non_sharing.invests() && sharing_none {
        ComparisonLabel::RegionA
    } else if sharing_only_one
        && non_sharing.feasible.contains(&NECategory::BothInvestSymmetric)
    {
        ComparisonLabel::RegionB
    } else if sharing.feasible == non_sharing.feasible {
        ComparisonLabel::Same
    } else {
        ComparisonLabel::Other
    }
}

fn check_axes(sigma_axis: &[f64], m0_axis: &[f64]) -> Result<()> {
    for (name, ax) in [("sigma", sigma_axis), ("m0", m0_axis)] {
        if ax.len() < 2 {
            return Err(Error::domain(format!("{name} axis needs >= 2 points")));
        }
        if ax.windows(2).any(|w| !(w[1] > w[0])) || !(ax[0] > 0.0) {
            return Err(Error::domain(format!("{name} axis must be strictly increasing and positive")));
        }
    }
    Ok(())
}

fn par_cells(
    sigma_axis: &[f64],
    m0_axis: &[f64],
    params: &MarketParams,
    alpha: f64,
    f: impl Fn(&MarketParams, &InfoTech) -> Result<RegionCell> + Sync,
) -> Result<Vec<RegionCell>> {
    let points: Vec<(f64, f64)> = m0_axis
        .iter()
        .flat_map(|&m0| sigma_axis.iter().map(move |&sigma| (sigma, m0)))
        .collect();
    points
        .par_iter()
        .map(|&(sigma, m0)| {
            let tech = InfoTech::new(sigma, m0, alpha)?;
            f(params, &tech)
        })
        .collect()
}
