//! Deterministic impulse responses, default-episode windows and the
//! no-default counterfactual.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::moments::{quantile, MomentSettings};
use super::{amss_step, check_compatible, ed_step, simulate_amss_with, simulate_with, SimPath};
use crate::error::Result;
use crate::params::Economy;
use crate::solver::{forced_repayment, AmssSolution, EdSolution, ForcedRepayment};
use crate::stochastic::{OfferEvent, SimRng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IrfSeries {
    pub access: Vec<bool>,
    pub debt: Vec<f64>,
    pub debt_next: Vec<f64>,
    /// Primary surplus `Z_t = R_t - g_t`.
    pub surplus: Vec<f64>,
    pub tax: Vec<f64>,
    pub multiplier: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IrfPanel {
    /// Spending levels actually used (grid points).
    pub g: Vec<f64>,
    pub g_index: Vec<usize>,
    pub ed: IrfSeries,
    pub amss: IrfSeries,
}

fn series(path: &SimPath) -> IrfSeries {
    IrfSeries {
        access: path.access.clone(),
        debt: path.debt.clone(),
        debt_next: path.debt_next.clone(),
        surplus: path
            .revenue
            .iter()
            .zip(&path.g)
            .map(|(r, g)| r - g)
            .collect(),
        tax: path.tax.clone(),
        multiplier: path.multiplier.clone(),
    }
}

/// Rolls both economies forward from zero debt along a given spending path.
/// Each level is mapped to the nearest grid state; levels outside the grid
/// are rejected. In the economy with default no offer arrives during the
/// rollout, so a default is followed by autarky.
pub fn impulse_response(
    econ: &Economy,
    ed: &EdSolution,
    amss: &AmssSolution,
    g_path: &[f64],
) -> Result<IrfPanel> {
    check_compatible(econ, &ed.g_values, &ed.b_values)?;
    check_compatible(econ, &amss.g_values, &amss.b_values)?;
    let g_index = g_path
        .iter()
        .map(|&g| econ.chain.nearest(g))
        .collect::<Result<Vec<_>>>()?;
    let mut ed_path = SimPath::with_capacity(g_path.len(), 0);
    let mut rf_path = SimPath::with_capacity(g_path.len(), 0);
    let (mut i, mut access, mut k) = (0, true, 0);
    for &g in &g_index {
        let event = if access {
            OfferEvent::Due
        } else {
            OfferEvent::NoOffer
        };
        let step = ed_step(econ, ed, g, i, event);
        ed_path.push(econ, step);
        access = step.access;
        i = step.next;
        let step = amss_step(econ, amss, g, k)?;
        rf_path.push(econ, step);
        k = step.next;
    }
    Ok(IrfPanel {
        g: g_index.iter().map(|&g| econ.chain.g_values[g]).collect(),
        g_index,
        ed: series(&ed_path),
        amss: series(&rf_path),
    })
}

/// Selection and alignment of default episodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpisodeSpec {
    /// Periods shown before the default date.
    pub before: usize,
    /// Periods shown after the default date.
    pub after: usize,
    /// Required periods of market access immediately before default.
    pub access_before: usize,
    /// Required periods in autarky from the default date on (inclusive).
    pub autarky_after: usize,
    /// Periods forced to repay in the counterfactual, starting at the default date.
    pub forced_periods: usize,
    /// Stop after this many episodes.
    pub max_episodes: usize,
}

impl Default for EpisodeSpec {
    fn default() -> Self {
        Self {
            before: 4,
            after: 4,
            access_before: 6,
            autarky_after: 5,
            forced_periods: 5,
            max_episodes: 1000,
        }
    }
}

/// Forced-repayment path from one episode's default date.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Counterfactual {
    pub tax: Vec<f64>,
    pub revenue: Vec<f64>,
    pub debt: Vec<f64>,
    /// False when repayment was infeasible at some forced date.
    pub feasible: bool,
    /// Revenue at the default date covers `g + B - max_B' P1(g, B') B'`.
    pub bound_holds: bool,
}

/// One aligned episode; entry `k` refers to date `k - before`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeWindow {
    pub replication: usize,
    /// Period of default within the replication.
    pub date: usize,
    pub g: Vec<f64>,
    pub tax: Vec<f64>,
    pub tax_amss: Vec<f64>,
    pub debt: Vec<f64>,
    pub counterfactual: Counterfactual,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantileBand {
    pub q25: Vec<f64>,
    pub median: Vec<f64>,
    pub q75: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodePanel {
    /// Dates relative to default, `-before..=after`.
    pub offsets: Vec<i64>,
    pub requested: usize,
    pub count: usize,
    pub g: QuantileBand,
    pub tax: QuantileBand,
    pub tax_amss: QuantileBand,
    /// Counterfactual tax on the forced dates (`0..forced_periods`), over
    /// feasible episodes.
    pub tax_counterfactual: QuantileBand,
    pub counterfactual_infeasible: usize,
    /// Share of feasible episodes whose counterfactual tax at the default
    /// date exceeds the actual one.
    pub counterfactual_exceeds: f64,
    pub windows: Vec<EpisodeWindow>,
}

fn band(rows: &[&[f64]], width: usize) -> QuantileBand {
    let mut b = QuantileBand {
        q25: Vec::with_capacity(width),
        median: Vec::with_capacity(width),
        q75: Vec::with_capacity(width),
    };
    for k in 0..width {
        let mut col: Vec<f64> = rows
            .iter()
            .map(|r| r[k])
            .filter(|v| v.is_finite())
            .collect();
        col.sort_by(f64::total_cmp);
        b.q25.push(quantile(&col, 0.25));
        b.median.push(quantile(&col, 0.5));
        b.q75.push(quantile(&col, 0.75));
    }
    b
}

/// Forced repayment from `(g_index[0], debt_index)` along the realized
/// spending states.
pub fn counterfactual_no_default(
    econ: &Economy,
    sol: &EdSolution,
    forced: &ForcedRepayment,
    g_index: &[usize],
    debt_index: usize,
) -> Counterfactual {
    let n_b = sol.n_b();
    let mut out = Counterfactual {
        tax: Vec::new(),
        revenue: Vec::new(),
        debt: Vec::new(),
        feasible: true,
        bound_holds: true,
    };
    let mut i = debt_index;
    for (s, &g) in g_index.iter().take(forced.values.len()).enumerate() {
        let c = g * n_b + i;
        out.debt.push(sol.b_values[i]);
        let Some(j) = forced.policy_debt[s][c] else {
            out.feasible = false;
            out.tax.push(f64::NAN);
            out.revenue.push(f64::NAN);
            break;
        };
        let r = forced.policy_revenue[s][c];
        if s == 0 {
            let best = sol.debt_revenue(g).into_iter().fold(0.0, f64::max);
            out.bound_holds = r >= sol.g_values[g] + sol.b_values[i] - best - 1e-12;
        }
        let n = econ.model.labor_from_revenue(1.0, r).unwrap_or(f64::NAN);
        out.tax.push(econ.model.tax_rate(1.0, n));
        out.revenue.push(r);
        i = j;
    }
    out
}

fn windows_in(
    econ: &Economy,
    sol: &EdSolution,
    forced: &ForcedRepayment,
    path: &SimPath,
    rf: &SimPath,
    spec: &EpisodeSpec,
    replication: usize,
) -> Vec<EpisodeWindow> {
    let mut out = Vec::new();
    let kept = path.kept();
    let lead = spec.before.max(spec.access_before);
    let tail = spec
        .after
        .max(spec.autarky_after.saturating_sub(1))
        .max(spec.forced_periods.saturating_sub(1));
    for t in kept.clone() {
        if !path.default[t] || t < kept.start + lead || t + tail >= path.len() {
            continue;
        }
        if !(t - spec.access_before..t).all(|s| path.access[s]) {
            continue;
        }
        if !(t..t + spec.autarky_after).all(|s| !path.access[s]) {
            continue;
        }
        let range = t - spec.before..=t + spec.after;
        let forced_g: Vec<usize> = (t..t + spec.forced_periods)
            .map(|s| path.g_index[s])
            .collect();
        out.push(EpisodeWindow {
            replication,
            date: t,
            g: path.g[range.clone()].to_vec(),
            tax: path.tax[range.clone()].to_vec(),
            tax_amss: rf.tax[range.clone()].to_vec(),
            debt: path.debt[range].to_vec(),
            counterfactual: counterfactual_no_default(
                econ,
                sol,
                forced,
                &forced_g,
                path.debt_index[t],
            ),
        });
    }
    out
}

/// Aligns qualifying default episodes of paired paths (same spending draws)
/// and summarizes them by date.
pub fn episode_windows(
    econ: &Economy,
    sol: &EdSolution,
    paths: &[(SimPath, SimPath)],
    spec: &EpisodeSpec,
) -> EpisodePanel {
    let forced = forced_repayment(econ, sol, spec.forced_periods);
    let windows: Vec<EpisodeWindow> = paths
        .iter()
        .enumerate()
        .flat_map(|(r, (p, rf))| windows_in(econ, sol, &forced, p, rf, spec, r))
        .take(spec.max_episodes)
        .collect();
    summarize(windows, spec)
}

/// Simulates paired replications until `spec.max_episodes` qualifying
/// episodes are found or `settings.replications` is exhausted.
pub fn collect_episodes(
    econ: &Economy,
    ed: &EdSolution,
    amss: &AmssSolution,
    settings: &MomentSettings,
    spec: &EpisodeSpec,
    seed: u64,
) -> Result<EpisodePanel> {
    settings.sim.validate()?;
    check_compatible(econ, &ed.g_values, &ed.b_values)?;
    check_compatible(econ, &amss.g_values, &amss.b_values)?;
    let forced = forced_repayment(econ, ed, spec.forced_periods);
    let per_rep: Vec<Vec<EpisodeWindow>> = (0..settings.replications)
        .into_par_iter()
        .map(|r| {
            let p = simulate_with(
                econ,
                ed,
                settings.sim,
                &mut SimRng::for_replication(seed, r as u64),
            );
            let rf = simulate_amss_with(
                econ,
                amss,
                settings.sim,
                &mut SimRng::for_replication(seed, r as u64),
            )?;
            Ok(windows_in(econ, ed, &forced, &p, &rf, spec, r))
        })
        .collect::<Result<_>>()?;
    let windows = per_rep
        .into_iter()
        .flatten()
        .take(spec.max_episodes)
        .collect();
    Ok(summarize(windows, spec))
}

fn summarize(windows: Vec<EpisodeWindow>, spec: &EpisodeSpec) -> EpisodePanel {
    let width = spec.before + spec.after + 1;
    let rows = |f: fn(&EpisodeWindow) -> &[f64]| -> Vec<&[f64]> { windows.iter().map(f).collect() };
    let g = band(&rows(|w| &w.g), width);
    let tax = band(&rows(|w| &w.tax), width);
    let tax_amss = band(&rows(|w| &w.tax_amss), width);
    let feasible: Vec<&EpisodeWindow> = windows
        .iter()
        .filter(|w| w.counterfactual.feasible)
        .collect();
    let cf_rows: Vec<&[f64]> = feasible
        .iter()
        .map(|w| w.counterfactual.tax.as_slice())
        .collect();
    let tax_counterfactual = band(&cf_rows, spec.forced_periods);
    let exceeds = feasible
        .iter()
        .filter(|w| w.counterfactual.tax[0] > w.tax[spec.before])
        .count();
    EpisodePanel {
        offsets: (-(spec.before as i64)..=spec.after as i64).collect(),
        requested: spec.max_episodes,
        count: windows.len(),
        g,
        tax,
        tax_amss,
        tax_counterfactual,
        counterfactual_infeasible: windows.len() - feasible.len(),
        counterfactual_exceeds: if feasible.is_empty() {
            f64::NAN
        } else {
            exceeds as f64 / feasible.len() as f64
        },
        windows,
    }
}
