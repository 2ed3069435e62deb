//! Two-stage Cournot duopoly of cyber insurers with noisy cost signals.
//!
//! Two insurers sell identical policies against a common random marginal
//! cost they only observe through noisy private signals. In stage 1 each
//! buys down its signal-noise variance `m` from a baseline `m0`; in stage 2
//! costs realize, signals are (or are not) pooled depending on the
//! information regime, and quantities are chosen Cournot-style.
//!
//! The crate computes, in closed form where one exists:
//!
//! * optimal stage-2 production rules for both regimes ([`production`]),
//! * Bayesian cost estimators from one or two signals ([`estimation`]),
//! * stage-1 expected payoffs and their derivatives ([`payoff`]),
//! * Nash-equilibrium classification with feasibility certificates, plus
//!   independent brute-force and epsilon-NE oracles ([`equilibrium`]),
//! * `(sigma, m0)` region maps comparing the two regimes ([`regions`]),
//! * Monte-Carlo validation and a heavy-tail (normal + generalized Pareto
//!   mixture) robustness check ([`tailsim`]).
//!
//! All `sigma`/`m` parameters are variances, never standard deviations.

pub mod error;
pub mod estimation;
pub mod equilibrium;
pub mod market;
pub mod payoff;
pub mod production;
pub mod regions;
pub mod scenario;
pub mod tailsim;

pub use error::{Error, Result};
pub use market::{InfoTech, MarketParams, Regime, SignalRealization, StrategyProfile};
