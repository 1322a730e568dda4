//! Competitive-equilibrium check on simulated paths: every period's primary
//! surplus plus net bond issuance must cover the (non-negative) transfer.

use serde::{Deserialize, Serialize};

use super::SimPath;
use crate::params::Economy;
use crate::solver::EdSolution;
use crate::stochastic::OfferEvent;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathViolation {
    pub t: usize,
    pub g_index: usize,
    pub debt: f64,
    pub access: bool,
    pub what: String,
    /// Size of the discrepancy.
    pub amount: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ImplementabilityReport {
    /// `Z_t + phi_t (p_t B_{t+1} - delta_t B_t)` per period: the transfer the
    /// budget can pay.
    pub slack: Vec<f64>,
    pub violations: Vec<PathViolation>,
}

impl ImplementabilityReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn min_slack(&self) -> f64 {
        self.slack.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Validates a path of the economy with default, including that the recorded
/// prices are the solution's.
pub fn validate_implementability(
    path: &SimPath,
    econ: &Economy,
    sol: &EdSolution,
    tol: f64,
) -> ImplementabilityReport {
    check(path, econ, tol, |t| {
        let (g, i, j) = (path.g_index[t], path.debt_index[t], path.debt_next_index[t]);
        if path.access[t] {
            sol.price_repay[sol.idx(g, j)]
        } else {
            sol.price_autarky[sol.idx(g, i)]
        }
    })
}

/// Validates a path of the risk-free economy, where bonds trade at `beta`.
pub fn validate_amss_path(path: &SimPath, econ: &Economy, tol: f64) -> ImplementabilityReport {
    let beta = econ.beta();
    check(path, econ, tol, |_| beta)
}

fn check<F: Fn(usize) -> f64>(
    path: &SimPath,
    econ: &Economy,
    tol: f64,
    price: F,
) -> ImplementabilityReport {
    let mut report = ImplementabilityReport::default();
    let b = &econ.grid.b_values;
    let prefs = econ.model.preferences();
    let mut access_prev = path.initial_access;
    for t in 0..path.len() {
        let mut flag = |what: &str, amount: f64| {
            report.violations.push(PathViolation {
                t,
                g_index: path.g_index[t],
                debt: path.debt[t],
                access: path.access[t],
                what: what.to_string(),
                amount,
            })
        };
        let phi = path.access[t];
        let kappa = econ.model.kappa_for(phi);
        let n = path.labor[t];
        let g = path.g[t];

        // Surplus from the recorded tax: revenue = kappa tau n.
        let revenue = kappa * path.tax[t] * n;
        let z = revenue - g;
        let tax_implied = 1.0 - prefs.h_prime(1.0 - n) / kappa;
        if !((path.tax[t] - tax_implied).abs() <= tol) {
            flag("tax inconsistent with labor", path.tax[t] - tax_implied);
        }
        if !((path.output[t] - kappa * n).abs() <= tol) {
            flag("output inconsistent with labor", path.output[t] - kappa * n);
        }
        if !(path.tax[t] >= -tol) {
            flag("negative tax", path.tax[t]);
        }

        let slack = if phi {
            z + path.price[t] * path.debt_next[t] - path.obligation[t]
        } else {
            z
        };
        report.slack.push(slack);
        if !(slack >= -tol) {
            flag("budget not covered", slack);
        }
        if !((path.transfer[t] - slack.max(0.0)).abs() <= tol) {
            flag(
                "transfer differs from budget slack",
                path.transfer[t] - slack,
            );
        }
        if !phi && !(slack.abs() <= tol) {
            flag("autarky budget not balanced", slack);
        }

        let expected = price(t);
        if !((path.price[t] - expected).abs() <= tol) {
            flag("price differs from the solution", path.price[t] - expected);
        }

        // Law of motion for market access.
        let d = path.default[t] as u8 as f64;
        let a = path.accept[t] as u8 as f64;
        let prev = access_prev as u8 as f64;
        let phi_lom = prev * (1.0 - d) + (1.0 - prev) * a;
        if phi_lom != phi as u8 as f64 {
            flag("access law of motion", phi_lom - phi as u8 as f64);
        }
        if path.default[t] && (!access_prev || path.debt[t] <= 0.0) {
            flag("default without market access or debt", path.debt[t]);
        }
        if path.accept[t] && !matches!(path.event[t], OfferEvent::Offer(_)) {
            flag("acceptance without an offer", 0.0);
        }
        match (access_prev, path.event[t]) {
            (true, OfferEvent::Due) | (false, OfferEvent::NoOffer | OfferEvent::Offer(_)) => {}
            _ => flag("repayment event inconsistent with access", 0.0),
        }

        if !phi && path.debt_next[t] != path.debt[t] {
            flag("debt changed in autarky", path.debt_next[t] - path.debt[t]);
        }
        if phi {
            let legacy = if path.accept[t] {
                path.delta[t] * path.debt[t] - path.snap_error[t]
            } else {
                path.debt[t]
            };
            if !((legacy - path.obligation[t]).abs() <= tol) {
                flag(
                    "obligation differs from the debt due",
                    path.obligation[t] - legacy,
                );
            }
        }
        if t + 1 < path.len() && path.debt[t + 1] != path.debt_next[t] {
            flag(
                "debt not carried over",
                path.debt[t + 1] - path.debt_next[t],
            );
        }
        if path.debt_index[t] >= b.len() || b[path.debt_index[t]] != path.debt[t] {
            flag("debt off the grid", path.debt[t]);
        }
        access_prev = phi;
    }
    report
}
