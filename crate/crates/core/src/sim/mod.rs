//! Monte Carlo simulation of both economies and the statistics built on it.

mod experiments;
mod martingale;
mod moments;
mod validate;

pub use experiments::{
    collect_episodes, counterfactual_no_default, episode_windows, impulse_response, Counterfactual,
    EpisodePanel, EpisodeSpec, EpisodeWindow, IrfPanel, IrfSeries, QuantileBand,
};
pub use martingale::{amss_martingale, ed_markup, price_elasticity, MartingaleReport};
pub use moments::{
    mc_moments, renegotiation_stats, renegotiation_table, Histogram, MomentReport, MomentSettings,
    RenegotiationRow, ReplicationStats,
};
pub use validate::{
    validate_amss_path, validate_implementability, ImplementabilityReport, PathViolation,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::Economy;
use crate::solver::{AmssSolution, EdSolution};
use crate::stochastic::{draw_period, OfferEvent, SimRng};

/// One simulated trajectory. Entry `t` of every vector refers to period `t`;
/// `debt[t]` is the stock carried into the period and `debt_next[t]` the
/// stock carried out of it.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SimPath {
    /// Periods at the start of the path excluded from statistics.
    pub burn_in: usize,
    /// Market access in the period before the first one.
    pub initial_access: bool,
    pub g_index: Vec<usize>,
    pub g: Vec<f64>,
    /// Market access `phi_t` after this period's default/acceptance decision.
    pub access: Vec<bool>,
    pub event: Vec<OfferEvent>,
    pub debt: Vec<f64>,
    pub debt_index: Vec<usize>,
    pub debt_next: Vec<f64>,
    pub debt_next_index: Vec<usize>,
    /// Payoff per unit of legacy debt: 1 when due and repaid, the accepted
    /// offer after a restructuring, 0 otherwise.
    pub delta: Vec<f64>,
    /// Payment made on legacy debt this period (restructured debt is on-grid).
    pub obligation: Vec<f64>,
    pub default: Vec<bool>,
    pub accept: Vec<bool>,
    pub revenue: Vec<f64>,
    pub tax: Vec<f64>,
    pub labor: Vec<f64>,
    pub output: Vec<f64>,
    /// `P1` of the debt issued with access, `P0` of the defaulted debt otherwise.
    pub price: Vec<f64>,
    /// `1/p - 1/beta`.
    pub spread: Vec<f64>,
    pub transfer: Vec<f64>,
    pub multiplier: Vec<f64>,
    /// `delta B - snapped(delta B)` for accepted offers, zero otherwise.
    pub snap_error: Vec<f64>,
}

impl SimPath {
    pub fn len(&self) -> usize {
        self.g.len()
    }

    pub fn is_empty(&self) -> bool {
        self.g.is_empty()
    }

    /// Indices of the periods used for statistics.
    pub fn kept(&self) -> std::ops::Range<usize> {
        self.burn_in.min(self.len())..self.len()
    }

    pub fn debt_output(&self, t: usize) -> f64 {
        self.debt[t] / self.output[t]
    }

    fn with_capacity(n: usize, burn_in: usize) -> Self {
        Self {
            burn_in,
            initial_access: true,
            g_index: Vec::with_capacity(n),
            g: Vec::with_capacity(n),
            access: Vec::with_capacity(n),
            event: Vec::with_capacity(n),
            debt: Vec::with_capacity(n),
            debt_index: Vec::with_capacity(n),
            debt_next: Vec::with_capacity(n),
            debt_next_index: Vec::with_capacity(n),
            delta: Vec::with_capacity(n),
            obligation: Vec::with_capacity(n),
            default: Vec::with_capacity(n),
            accept: Vec::with_capacity(n),
            revenue: Vec::with_capacity(n),
            tax: Vec::with_capacity(n),
            labor: Vec::with_capacity(n),
            output: Vec::with_capacity(n),
            price: Vec::with_capacity(n),
            spread: Vec::with_capacity(n),
            transfer: Vec::with_capacity(n),
            multiplier: Vec::with_capacity(n),
            snap_error: Vec::with_capacity(n),
        }
    }
}

/// What happened in one period, before the allocation is filled in.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Step {
    pub g: usize,
    pub i: usize,
    pub event: OfferEvent,
    pub access: bool,
    pub default: bool,
    pub accept: bool,
    pub delta: f64,
    /// Debt index whose repayment policy is followed (after restructuring).
    pub repay_from: usize,
    pub snap_error: f64,
    pub next: usize,
    pub revenue: f64,
    pub price: f64,
}

impl SimPath {
    fn push(&mut self, econ: &Economy, s: Step) {
        let gv = econ.chain.g_values[s.g];
        let b = &econ.grid.b_values;
        let beta = econ.beta();
        let kappa = econ.model.kappa_for(s.access);
        let n = econ
            .model
            .labor_from_revenue(kappa, s.revenue)
            .unwrap_or(f64::NAN);
        let obligation = if s.access { b[s.repay_from] } else { 0.0 };
        let transfer = if s.access {
            s.price * b[s.next] + s.revenue - gv - obligation
        } else {
            0.0
        };
        self.g_index.push(s.g);
        self.g.push(gv);
        self.access.push(s.access);
        self.event.push(s.event);
        self.debt.push(b[s.i]);
        self.debt_index.push(s.i);
        self.debt_next.push(b[s.next]);
        self.debt_next_index.push(s.next);
        self.delta.push(s.delta);
        self.obligation.push(obligation);
        self.default.push(s.default);
        self.accept.push(s.accept);
        self.revenue.push(s.revenue);
        self.tax.push(econ.model.tax_rate(kappa, n));
        self.labor.push(n);
        self.output.push(kappa * n);
        self.price.push(s.price);
        self.spread.push(1.0 / s.price - 1.0 / beta);
        self.transfer.push(transfer.max(0.0));
        self.multiplier
            .push(econ.model.multiplier_at(kappa, n).unwrap_or(f64::NAN));
        self.snap_error.push(s.snap_error);
    }
}

/// Length of a simulation and where statistics start.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSettings {
    /// Total simulated periods, burn-in included.
    pub horizon: usize,
    pub burn_in: usize,
}

impl Default for SimSettings {
    fn default() -> Self {
        Self {
            horizon: 2500,
            burn_in: 500,
        }
    }
}

impl SimSettings {
    pub fn validate(&self) -> Result<()> {
        if self.horizon <= self.burn_in {
            return Err(Error::InvalidParameter {
                name: "horizon",
                reason: format!("{} must exceed the burn-in {}", self.horizon, self.burn_in),
            });
        }
        Ok(())
    }
}

fn check_compatible(econ: &Economy, g_values: &[f64], b_values: &[f64]) -> Result<()> {
    if g_values != econ.chain.g_values.as_slice() || b_values != econ.grid.b_values.as_slice() {
        return Err(Error::Incompatible(
            "solution grids differ from the economy's".into(),
        ));
    }
    Ok(())
}

/// Spending state every simulation starts from: the median of the grid.
pub fn initial_state(econ: &Economy) -> usize {
    econ.n_g() / 2
}

/// One period of the economy with default, given the state and the drawn event.
pub(crate) fn ed_step(
    econ: &Economy,
    sol: &EdSolution,
    g: usize,
    i: usize,
    event: OfferEvent,
) -> Step {
    let mut s = Step {
        g,
        i,
        event,
        access: false,
        default: false,
        accept: false,
        delta: 0.0,
        repay_from: i,
        snap_error: 0.0,
        next: i,
        revenue: econ.chain.g_values[g],
        price: sol.price_autarky[sol.idx(g, i)],
    };
    match event {
        OfferEvent::Due => {
            let c = sol.idx(g, i);
            match sol.policy_debt[c] {
                Some(j) if !sol.default[c] => {
                    s.access = true;
                    s.delta = 1.0;
                    s.next = j;
                    s.revenue = sol.policy_revenue[c];
                    s.price = sol.price_repay[sol.idx(g, j)];
                }
                _ => s.default = true,
            }
        }
        OfferEvent::Offer(k) if sol.accept_at(g, k, i) => {
            let target = sol.deltas[k] * econ.grid.b_values[i];
            let snapped = econ.grid.nearest(target);
            let c = sol.idx(g, snapped);
            if let Some(j) = sol.policy_debt[c] {
                s.access = true;
                s.accept = true;
                s.delta = sol.deltas[k];
                s.repay_from = snapped;
                s.snap_error = target - econ.grid.b_values[snapped];
                s.next = j;
                s.revenue = sol.policy_revenue[c];
                s.price = sol.price_repay[sol.idx(g, j)];
            }
        }
        OfferEvent::Offer(_) | OfferEvent::NoOffer => {}
    }
    s
}

/// Simulates the economy with default under the solution's policies, starting
/// with market access, no debt and median spending.
pub fn simulate(
    econ: &Economy,
    sol: &EdSolution,
    settings: SimSettings,
    seed: u64,
) -> Result<SimPath> {
    settings.validate()?;
    check_compatible(econ, &sol.g_values, &sol.b_values)?;
    let mut rng = SimRng::new(seed);
    Ok(simulate_with(econ, sol, settings, &mut rng))
}

pub(crate) fn simulate_with(
    econ: &Economy,
    sol: &EdSolution,
    settings: SimSettings,
    rng: &mut SimRng,
) -> SimPath {
    let mut path = SimPath::with_capacity(settings.horizon, settings.burn_in);
    let (mut g, mut i, mut access) = (initial_state(econ), 0, true);
    for t in 0..settings.horizon {
        let event = if t == 0 {
            OfferEvent::Due
        } else {
            let (next_g, event) = draw_period(&econ.chain, &econ.offers, g, access, rng);
            g = next_g;
            event
        };
        let step = ed_step(econ, sol, g, i, event);
        path.push(econ, step);
        access = step.access;
        i = step.next;
    }
    path
}

/// Simulates the risk-free economy. Draws the same uniforms per period as
/// [`simulate`], so equal seeds give equal spending paths.
pub fn simulate_amss(
    econ: &Economy,
    sol: &AmssSolution,
    settings: SimSettings,
    seed: u64,
) -> Result<SimPath> {
    settings.validate()?;
    check_compatible(econ, &sol.g_values, &sol.b_values)?;
    let mut rng = SimRng::new(seed);
    simulate_amss_with(econ, sol, settings, &mut rng)
}

pub(crate) fn amss_step(econ: &Economy, sol: &AmssSolution, g: usize, i: usize) -> Result<Step> {
    let c = sol.idx(g, i);
    let j = sol.policy_debt[c].ok_or_else(|| {
        Error::Incompatible(format!(
            "risk-free policy has no feasible choice at g = {}, B = {}",
            sol.g_values[g], sol.b_values[i]
        ))
    })?;
    Ok(Step {
        g,
        i,
        event: OfferEvent::Due,
        access: true,
        default: false,
        accept: false,
        delta: 1.0,
        repay_from: i,
        snap_error: 0.0,
        next: j,
        revenue: sol.policy_revenue[c],
        price: econ.beta(),
    })
}

pub(crate) fn simulate_amss_with(
    econ: &Economy,
    sol: &AmssSolution,
    settings: SimSettings,
    rng: &mut SimRng,
) -> Result<SimPath> {
    let mut path = SimPath::with_capacity(settings.horizon, settings.burn_in);
    let (mut g, mut i) = (initial_state(econ), 0);
    for t in 0..settings.horizon {
        if t > 0 {
            g = draw_period(&econ.chain, &econ.offers, g, true, rng).0;
        }
        let step = amss_step(econ, sol, g, i)?;
        path.push(econ, step);
        i = step.next;
    }
    Ok(path)
}
