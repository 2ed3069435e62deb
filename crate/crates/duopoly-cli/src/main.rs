//! Command-line front end: scenario loading, one subcommand per analysis,
//! and figure-data reproduction. Every subcommand is a pure function of
//! (config, seed) to bytes on disk.
//!
//! Exit codes: 0 success, 2 config error, 3 verification mismatch, 4 I/O error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::{json, Value};

use duopoly::equilibrium::{
    best_response, brute_force_ne, classify, EquilibriumReport, Thresholds,
};
use duopoly::estimation::{pooled_estimate, pooled_variance, single_signal_estimate};
use duopoly::market::{investment_cost, InfoTech, MarketParams, Regime, StrategyProfile};
use duopoly::payoff::PayoffSurface;
use duopoly::regions::{axis, regime_comparison, region_map, AxisScale, RegionGrid};
use duopoly::scenario::ScenarioConfig;
use duopoly::tailsim::{
    continuous_splice_scale, sample_tail_mixture, simulate_stage2, tail_payoff_bounds, TailMixture,
};

#[derive(Parser)]
#[command(name = "duopoly", version, about = "Cournot duopoly of cyber insurers: payoffs, equilibria, region maps, and Monte-Carlo validation")]
struct Cli {
    /// JSON scenario file; omitted = built-in reference parameters
    /// (a = 10, b = 1, alpha = 3, m0 = 54/ln 3, sigma = 30)
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Override a scenario field, e.g. --set sigma=120 (repeatable)
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    set: Vec<String>,

    /// Output directory
    #[arg(long, default_value = "out", global = true)]
    out: PathBuf,

    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Payoff, marginal, and curvature at the configured (m_i, m_j)
    Payoff,
    /// Closed-form NE classification with KKT certificates
    Equilibrium {
        /// Cross-check against the grid-search oracle with this resolution;
        /// disagreement exits with code 3
        #[arg(long, value_name = "N")]
        verify_grid: Option<usize>,
    },
    /// (sigma, m0) region map under both regimes, CSV + JSON summary
    Regions,
    /// Monte-Carlo stage-2 validation plus heavy-tail epsilon-NE bounds
    Simulate,
    /// Emit all figure datasets (densities, best responses, region maps)
    ReproduceFigures,
}

enum CliError {
    Config(String),
    Mismatch(String),
    Io(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Mismatch(_) => 3,
            CliError::Io(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Config(m) | CliError::Mismatch(m) | CliError::Io(m) => m,
        }
    }
}

impl From<duopoly::Error> for CliError {
    fn from(e: duopoly::Error) -> Self {
        CliError::Config(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_threads();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}

/// The only environment variable read: default rayon thread count.
fn init_threads() {
    if let Ok(v) = std::env::var("DUOPOLY_THREADS") {
        if let Ok(n) = v.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
}

fn default_scenario() -> String {
    let m0 = 1.5 * 36.0 / 3.0f64.ln();
    serde_json::to_string(&json!({
        "a": 10.0, "b": 1.0, "sigma": 30.0, "m0": m0, "alpha": 3.0
    }))
    .expect("static scenario")
}

fn load_config(cli: &Cli) -> Result<ScenarioConfig, CliError> {
    let text = match &cli.config {
        Some(path) => std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))?,
        None => default_scenario(),
    };
    Ok(ScenarioConfig::from_json_with_overrides(&text, &cli.set)?)
}

fn write_out(dir: &Path, name: &str, bytes: &[u8]) -> Result<PathBuf, CliError> {
    std::fs::create_dir_all(dir)
        .map_err(|e| CliError::Io(format!("cannot create {}: {e}", dir.display())))?;
    let path = dir.join(name);
    std::fs::write(&path, bytes)
        .map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))?;
    Ok(path)
}

fn write_json(dir: &Path, name: &str, value: &Value) -> Result<PathBuf, CliError> {
    let mut text = serde_json::to_string_pretty(value).expect("serializable value");
    text.push('\n');
    write_out(dir, name, text.as_bytes())
}

fn run(cli: &Cli) -> Result<(), CliError> {
    match &cli.cmd {
        Cmd::Payoff => cmd_payoff(cli),
        Cmd::Equilibrium { verify_grid } => cmd_equilibrium(cli, *verify_grid),
        Cmd::Regions => cmd_regions(cli),
        Cmd::Simulate => cmd_simulate(cli),
        Cmd::ReproduceFigures => cmd_reproduce_figures(&cli.out),
    }
}

fn cmd_payoff(cli: &Cli) -> Result<(), CliError> {
    let cfg = load_config(cli)?;
    let surface = PayoffSurface::new(cfg.regime, cfg.params, cfg.tech)?;
    let (m_i, m_j) = (cfg.m_i, cfg.m_j);
    let report = json!({
        "scenario": cfg,
        "point": {
            "m_i": m_i,
            "m_j": m_j,
            "payoff": surface.payoff(m_i, m_j)?,
            "marginal": surface.marginal(m_i, m_j)?,
            "second_derivative": surface.second_derivative(m_i, m_j)?,
            "investment_cost": investment_cost(m_i, &cfg.tech)?,
            "pooled_variance": pooled_variance(cfg.tech.sigma, m_i, m_j)?,
        },
        "thresholds": Thresholds::compute(&cfg.params, &cfg.tech),
    });
    let path = write_json(&cli.out, "payoff.json", &report)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn cmd_equilibrium(cli: &Cli, verify_grid: Option<usize>) -> Result<(), CliError> {
    let cfg = load_config(cli)?;
    let report = classify(cfg.regime, &cfg.params, &cfg.tech)?;
    let verification = match verify_grid {
        None => Value::Null,
        Some(n) => verify_against_grid(&cfg, &report, n)?,
    };
    let out = json!({
        "scenario": cfg,
        "report": report,
        "grid_verification": verification,
    });
    let path = write_json(&cli.out, "equilibrium.json", &out)?;
    println!(
        "{} regime: {} (feasible: {})",
        report.regime,
        report.category,
        report
            .feasible_categories
            .iter()
            .map(|c| c.to_string())
            .collect::<Vec<_>>()
            .join(", ")
    );
    println!("wrote {}", path.display());
    Ok(())
}

/// Proposition/grid agreement: every category the grid oracle finds must be
/// among the proposition's feasible categories. Gap parameters are exempt
/// (the propositions make no claim there); the grid result is still attached.
fn verify_against_grid(
    cfg: &ScenarioConfig,
    report: &EquilibriumReport,
    n: usize,
) -> Result<Value, CliError> {
    let grid = brute_force_ne(cfg.regime, &cfg.params, &cfg.tech, n)?;
    let found = grid.unique_categories();
    let agrees = report.proposition_gap
        || (!found.is_empty() && found.iter().all(|c| report.feasible_categories.contains(c)));
    let summary = json!({
        "grid_size": n,
        "categories_found": found,
        "in_proposition_gap": report.proposition_gap,
        "agrees": agrees,
    });
    if !agrees {
        return Err(CliError::Mismatch(format!(
            "grid oracle (N = {n}) found {found:?} but the proposition certifies {:?}",
            report.feasible_categories
        )));
    }
    Ok(summary)
}

/// Axis ranges bracketing every proposition threshold at the configured
/// (b, alpha); used when the scenario does not pin ranges explicitly.
fn auto_ranges(params: &MarketParams, alpha: f64) -> ((f64, f64), (f64, f64)) {
    let ln_a = alpha.ln();
    let m0_crit = 36.0 * params.b / ln_a; // largest m0 threshold
    let m0_low = 27.0 * params.b / (5.0 * ln_a); // smallest
    let m0_range = (0.5 * m0_low, 3.0 * m0_crit);
    // sigma_hat_thr at the top of the m0 range is the largest sigma threshold
    let gamma = (m0_range.1 * ln_a / (9.0 * params.b)).sqrt();
    let sigma_hi = 2.0 * m0_range.1 / (gamma - 2.0);
    let sigma_range = (0.05 * m0_crit, sigma_hi);
    (sigma_range, m0_range)
}

fn build_grid(cfg: &ScenarioConfig) -> Result<(RegionGrid, (f64, f64), (f64, f64)), CliError> {
    let (auto_sigma, auto_m0) = auto_ranges(&cfg.params, cfg.tech.alpha);
    let sigma_range = cfg.sigma_range.unwrap_or(auto_sigma);
    let m0_range = cfg.m0_range.unwrap_or(auto_m0);
    let sigma_axis = axis(sigma_range.0, sigma_range.1, cfg.resolution.0, cfg.axis_scale)?;
    let m0_axis = axis(m0_range.0, m0_range.1, cfg.resolution.1, cfg.axis_scale)?;
    let grid = regime_comparison(&sigma_axis, &m0_axis, &cfg.params, cfg.tech.alpha)?;
    Ok((grid, sigma_range, m0_range))
}

fn cmd_regions(cli: &Cli) -> Result<(), CliError> {
    let cfg = load_config(cli)?;
    let (grid, sigma_range, m0_range) = build_grid(&cfg)?;
    let csv_path = write_out(&cli.out, "regions.csv", grid.to_csv().as_bytes())?;
    let summary = json!({
        "scenario": cfg,
        "sigma_range": sigma_range,
        "m0_range": m0_range,
        "resolution": cfg.resolution,
        "axis_scale": cfg.axis_scale,
        "cell_counts": grid.comparison_counts(),
        "thresholds_at_config": Thresholds::compute(&cfg.params, &cfg.tech),
    });
    let json_path = write_json(&cli.out, "regions_summary.json", &summary)?;
    println!("wrote {}", csv_path.display());
    println!("wrote {}", json_path.display());
    Ok(())
}

fn build_mixture(cfg: &ScenarioConfig) -> Result<TailMixture, CliError> {
    let sigma = cfg.tech.sigma;
    let w2 = cfg.w2.unwrap_or(0.05);
    let x0 = cfg.x0.unwrap_or(2.0 * sigma.sqrt());
    let xi = cfg.xi.unwrap_or(0.25);
    let beta = match cfg.beta {
        Some(b) => b,
        None if w2 > 0.0 => continuous_splice_scale(sigma, x0, 1.0 - w2, w2)?,
        None => 1.0, // tail absent; scale is irrelevant
    };
    Ok(TailMixture::new(1.0 - w2, w2, x0, sigma, xi, beta)?)
}

fn cmd_simulate(cli: &Cli) -> Result<(), CliError> {
    let cfg = load_config(cli)?;
    let profile = StrategyProfile::new(cfg.m_i, cfg.m_j, cfg.regime, &cfg.tech)?;
    let result = simulate_stage2(&profile, &cfg.params, &cfg.tech, cfg.n, cfg.seed)?;
    let mixture = build_mixture(&cfg)?;
    let bounds = tail_payoff_bounds(&profile, &cfg.params, &cfg.tech, &mixture, cfg.n, cfg.seed)?;
    let surface = PayoffSurface::new(cfg.regime, cfg.params, cfg.tech)?;
    let out = json!({
        "scenario": cfg,
        "closed_form_payoff": surface.payoff(cfg.m_i, cfg.m_j)?,
        "simulation": result,
        "tail_mixture": mixture,
        "epsilon_bounds": bounds,
    });
    let path = write_json(&cli.out, "simulate.json", &out)?;
    println!("wrote {}", path.display());
    Ok(())
}

// ---------------------------------------------------------------------------
// Figure-data reproduction (reference parameters a = 10, b = 1, alpha = 3)
// ---------------------------------------------------------------------------

fn cmd_reproduce_figures(out: &Path) -> Result<(), CliError> {
    let params = MarketParams::symmetric(10.0, 1.0)?;
    let alpha = 3.0;
    let m0 = 1.5 * 36.0 / 3.0f64.ln();
    let tech = InfoTech::new(30.0, m0, alpha)?; // sigma replaced per figure
    let thresholds = Thresholds::compute(&params, &tech);
    let sigma_tilde = thresholds.sharing.sigma_tilde.expect("defined at reference scale");
    let sigma_hat_thr = thresholds.sharing.sigma_hat_thr.expect("defined at reference scale");

    let mut files = Vec::new();
    files.push(write_signal_density(out)?);
    files.push(write_conditional_density(out)?);

    // best-response curves: sharing below sigma_tilde (nobody invests),
    // sharing above sigma_hat_thr (only one invests), non-sharing in its
    // investing region
    for (name, regime, sigma) in [
        ("br_sharing_neither.csv", Regime::Sharing, 0.9 * sigma_tilde),
        ("br_sharing_one.csv", Regime::Sharing, 1.2 * sigma_hat_thr),
        ("br_nonsharing_invest.csv", Regime::NonSharing, 30.0),
    ] {
        files.push(write_best_response(out, name, regime, sigma, &params, m0, alpha)?);
    }

    // region maps: per regime and the policy comparison
    let (sigma_range, m0_range) = auto_ranges(&params, alpha);
    let sigma_axis = axis(sigma_range.0, sigma_range.1, 60, AxisScale::Geometric)?;
    let m0_axis = axis(m0_range.0, m0_range.1, 60, AxisScale::Geometric)?;
    for (name, regime) in [
        ("region_sharing.csv", Some(Regime::Sharing)),
        ("region_nonsharing.csv", Some(Regime::NonSharing)),
        ("region_comparison.csv", None),
    ] {
        let grid = match regime {
            Some(r) => region_map(&sigma_axis, &m0_axis, r, &params, alpha)?,
            None => regime_comparison(&sigma_axis, &m0_axis, &params, alpha)?,
        };
        files.push(write_out(out, name, grid.to_csv().as_bytes())?);
    }

    // tail-mixture density data for the heavy-tail robustness discussion
    files.push(write_tail_sample_moments(out)?);

    let manifest = json!({
        "parameters": {"a": 10.0, "b": 1.0, "alpha": alpha, "m0": m0},
        "thresholds": thresholds,
        "figure_sigmas": {
            "br_sharing_neither": 0.9 * sigma_tilde,
            "br_sharing_one": 1.2 * sigma_hat_thr,
            "br_nonsharing_invest": 30.0,
            "densities": 4.0,
        },
        "region_axis_ranges": {"sigma": sigma_range, "m0": m0_range, "resolution": [60, 60]},
        "files": files.iter().map(|p| p.file_name().unwrap().to_string_lossy().into_owned()).collect::<Vec<_>>(),
    });
    let manifest_path = write_json(out, "manifest.json", &manifest)?;
    for f in &files {
        println!("wrote {}", f.display());
    }
    println!("wrote {}", manifest_path.display());
    Ok(())
}

/// Joint density of the two signals at sigma = 4, m_i = m_j = 2:
/// bivariate normal, covariance [[sigma+m, sigma], [sigma, sigma+m]].
fn write_signal_density(out: &Path) -> Result<PathBuf, CliError> {
    let (sigma, m) = (4.0, 2.0);
    let (v, c) = (sigma + m, sigma);
    let det: f64 = v * v - c * c;
    let norm = 1.0 / (2.0 * std::f64::consts::PI * det.sqrt());
    let mut csv = String::from("z_i,z_j,density\n");
    for gi in 0..=40 {
        let z_i = -8.0 + 0.4 * gi as f64;
        for gj in 0..=40 {
            let z_j = -8.0 + 0.4 * gj as f64;
            let quad = (v * z_i * z_i - 2.0 * c * z_i * z_j + v * z_j * z_j) / det;
            csv.push_str(&format!("{},{},{}\n", z_i, z_j, norm * (-0.5 * quad).exp()));
        }
    }
    write_out(out, "signal_density.csv", csv.as_bytes())
}

/// Conditional cost densities at sigma = 4, m_i = m_j = 2, signals
/// z_i = 3, z_j = 1: prior, one-signal, and two-signal posteriors. Each
/// extra observation shrinks the conditional variance.
fn write_conditional_density(out: &Path) -> Result<PathBuf, CliError> {
    let (sigma, m) = (4.0, 2.0);
    let (z_i, z_j) = (3.0, 1.0);
    let mean_one = single_signal_estimate(z_i, sigma, m);
    let var_one = sigma * m / (sigma + m);
    let mean_two = pooled_estimate(z_i, z_j, sigma, m, m)?;
    let var_two = sigma - pooled_variance(sigma, m, m)?;
    let pdf = |x: f64, mean: f64, var: f64| {
        (-0.5 * (x - mean) * (x - mean) / var).exp() / (2.0 * std::f64::consts::PI * var).sqrt()
    };
    let mut csv = String::from(
        "c,prior_pdf,one_signal_pdf,two_signal_pdf,var_prior,var_one_signal,var_two_signals\n",
    );
    for k in 0..=160 {
        let c = -8.0 + 0.1 * k as f64;
        csv.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            c,
            pdf(c, 0.0, sigma),
            pdf(c, mean_one, var_one),
            pdf(c, mean_two, var_two),
            sigma,
            var_one,
            var_two,
        ));
    }
    write_out(out, "conditional_density.csv", csv.as_bytes())
}

fn write_best_response(
    out: &Path,
    name: &str,
    regime: Regime,
    sigma: f64,
    params: &MarketParams,
    m0: f64,
    alpha: f64,
) -> Result<PathBuf, CliError> {
    let tech = InfoTech::new(sigma, m0, alpha)?;
    let pts = axis(1e-3 * m0, m0, 80, AxisScale::Geometric)?;
    let mut csv = String::from("m_j,best_response_m_i\n");
    for &m_j in &pts {
        csv.push_str(&format!("{},{}\n", m_j, best_response(m_j, regime, params, &tech)?));
    }
    write_out(out, name, csv.as_bytes())
}

/// Empirical moments of the spliced cost mixture against the pure normal
/// body, for the heavy-tail discussion.
fn write_tail_sample_moments(out: &Path) -> Result<PathBuf, CliError> {
    let sigma = 4.0f64;
    let mut csv = String::from("w2,analytic_mean,empirical_mean,empirical_variance\n");
    for w2 in [0.0, 0.01, 0.05] {
        let x0 = 2.0 * sigma.sqrt();
        let beta = if w2 > 0.0 {
            continuous_splice_scale(sigma, x0, 1.0 - w2, w2)?
        } else {
            1.0
        };
        let mix =
            TailMixture::new(1.0 - w2, w2, x0, sigma, 0.25, beta)?;
        let xs = sample_tail_mixture(&mix, 200_000, 17)?;
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
        csv.push_str(&format!("{},{},{},{}\n", w2, mix.mean(), mean, var));
    }
    write_out(out, "tail_mixture_moments.csv", csv.as_bytes())
}
