//! Economy with default: value iteration over (g, B) nested inside a damped
//! fixed-point loop on bond prices.
//!
//! Tables are stored row-major by spending state: entry `g * n_b + i` refers
//! to spending level `g` and debt level `b[i]`. Acceptance flags are indexed
//! `(g * n_offers + k) * n_b + i`.

use serde::{Deserialize, Serialize};

use super::kernel::{Choice, RepayKernel};
use super::{is_infeasible, INFEASIBLE};
use crate::error::{Error, Result};
use crate::params::{Economy, EconomyParams};

/// Converged solution of the economy with default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdSolution {
    pub params: EconomyParams,
    pub g_values: Vec<f64>,
    pub b_values: Vec<f64>,
    pub deltas: Vec<f64>,
    /// Value of repaying, `V1(g, B)`.
    pub v_repay: Vec<f64>,
    /// Value of financial autarky, `V0(g, B)`.
    pub v_autarky: Vec<f64>,
    /// Price of debt `B'` issued with market access in state g.
    pub price_repay: Vec<f64>,
    /// Secondary-market price of defaulted debt `B` in state g.
    pub price_autarky: Vec<f64>,
    /// Debt choice on the repayment branch; `None` when no choice is feasible.
    pub policy_debt: Vec<Option<usize>>,
    /// Tax revenue on the repayment branch (NaN when infeasible).
    pub policy_revenue: Vec<f64>,
    pub default: Vec<bool>,
    pub accept: Vec<bool>,
    pub thresholds: Thresholds,
    pub convergence: Convergence,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Convergence {
    pub outer_iterations: usize,
    /// Sup-norm gap between implied and current prices, per outer iteration.
    pub price_residuals: Vec<f64>,
    pub inner_sweeps: usize,
    pub value_residual: f64,
}

/// Threshold representation of the default and acceptance policies.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Thresholds {
    /// Per debt level: smallest spending level at which the government
    /// defaults, `+inf` when it never does.
    pub default_g: Vec<f64>,
    /// Per (g, B): largest accepted repayment fraction, `-inf` when none is.
    pub accept_delta: Vec<f64>,
    pub violations: Vec<ThresholdViolation>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ThresholdViolation {
    /// Default at `g` but repayment at some higher spending level.
    Default { g: usize, b: usize },
    /// Offer `k` rejected although a larger offer is accepted.
    Accept { g: usize, b: usize, k: usize },
}

/// Result of the repayment-branch maximization in one cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RepayChoice {
    pub value: f64,
    pub debt: Option<usize>,
    pub revenue: f64,
    pub transfer: f64,
}

impl EdSolution {
    pub fn n_g(&self) -> usize {
        self.g_values.len()
    }

    pub fn n_b(&self) -> usize {
        self.b_values.len()
    }

    pub fn n_offers(&self) -> usize {
        self.deltas.len()
    }

    #[inline]
    pub fn idx(&self, g: usize, i: usize) -> usize {
        g * self.n_b() + i
    }

    #[inline]
    pub fn accept_at(&self, g: usize, k: usize, i: usize) -> bool {
        self.accept[(g * self.n_offers() + k) * self.n_b() + i]
    }

    pub fn defaults(&self, g: usize, i: usize) -> bool {
        self.default[self.idx(g, i)]
    }

    /// Repayment value at an off-grid debt level, by linear interpolation.
    pub fn v_repay_at(&self, g: usize, b: f64) -> f64 {
        let (lo, w) = bracket(&self.b_values, b);
        interp(&self.v_repay[g * self.n_b()..(g + 1) * self.n_b()], lo, w)
    }

    /// Bond revenue curve `B' -> P1(g, B') B'` in state g.
    pub fn debt_revenue(&self, g: usize) -> Vec<f64> {
        (0..self.n_b())
            .map(|j| self.price_repay[self.idx(g, j)] * self.b_values[j])
            .collect()
    }

    /// Expected recovery per unit of defaulted debt `b[i]`,
    /// `E_g[sum_k pi_k delta_k 1{accept}]` under the stationary distribution.
    pub fn mean_recovery(&self, econ: &Economy, i: usize) -> f64 {
        let mut total = 0.0;
        for (g, &w) in econ.chain.stationary.iter().enumerate() {
            for (k, (&d, &p)) in econ
                .offers
                .deltas
                .iter()
                .zip(&econ.offers.probs)
                .enumerate()
            {
                if self.accept_at(g, k, i) {
                    total += w * p * d;
                }
            }
        }
        total
    }
}

pub(crate) fn bracket(b: &[f64], x: f64) -> (usize, f64) {
    if b.len() == 1 || x <= b[0] {
        return (0, 0.0);
    }
    if x >= b[b.len() - 1] {
        return (b.len() - 2, 1.0);
    }
    let i = b.partition_point(|&v| v <= x) - 1;
    (i, (x - b[i]) / (b[i + 1] - b[i]))
}

#[inline]
fn interp(row: &[f64], lo: usize, w: f64) -> f64 {
    if w == 0.0 {
        row[lo]
    } else if w == 1.0 {
        row[lo + 1]
    } else {
        (1.0 - w) * row[lo] + w * row[lo + 1]
    }
}

/// Precomputed pieces that do not change across iterations.
struct Statics {
    n_g: usize,
    n_b: usize,
    n_d: usize,
    beta: f64,
    lambda: f64,
    /// Autarkic flow payoff per spending state.
    autarky_flow: Vec<f64>,
    /// Interpolation bracket of `delta_k b[i]`, indexed `k * n_b + i`.
    restructured: Vec<(usize, f64)>,
    transition: Vec<f64>,
    probs: Vec<f64>,
    deltas: Vec<f64>,
    allow_default: bool,
}

impl Statics {
    fn new(econ: &Economy) -> Self {
        let n_b = econ.n_b();
        let autarky_flow = econ
            .chain
            .g_values
            .iter()
            .map(|&g| econ.model.autarky_flow(g).unwrap_or(INFEASIBLE))
            .collect();
        let mut restructured = Vec::with_capacity(econ.offers.len() * n_b);
        for &d in &econ.offers.deltas {
            for &b in &econ.grid.b_values {
                restructured.push(econ.grid.bracket(d * b));
            }
        }
        Self {
            n_g: econ.n_g(),
            n_b,
            n_d: econ.offers.len(),
            beta: econ.beta(),
            lambda: econ.offers.lambda,
            autarky_flow,
            restructured,
            transition: econ.chain.transition.clone(),
            probs: econ.offers.probs.clone(),
            deltas: econ.offers.deltas.clone(),
            allow_default: econ.params.allow_default,
        }
    }

    /// `out[g][j] = sum_g' pi(g, g') x[g'][j]`.
    fn expect(&self, x: &[f64], out: &mut [f64]) {
        let (n_g, n_b) = (self.n_g, self.n_b);
        out.iter_mut().for_each(|v| *v = 0.0);
        for g in 0..n_g {
            let row = &self.transition[g * n_g..(g + 1) * n_g];
            let dst = &mut out[g * n_b..(g + 1) * n_b];
            for (gp, &p) in row.iter().enumerate() {
                if p == 0.0 {
                    continue;
                }
                let src = &x[gp * n_b..(gp + 1) * n_b];
                for (d, &s) in dst.iter_mut().zip(src) {
                    *d += p * s;
                }
            }
        }
    }

    fn repay_restructured(&self, v1: &[f64], g: usize, k: usize, i: usize) -> f64 {
        let (lo, w) = self.restructured[k * self.n_b + i];
        interp(&v1[g * self.n_b..(g + 1) * self.n_b], lo, w)
    }

    /// Start-of-period value in autarky before the offer draw, with the
    /// acceptance decision either optimized (`flags = None`) or fixed.
    fn autarky_option(
        &self,
        v1: &[f64],
        v0: &[f64],
        g: usize,
        i: usize,
        flags: Option<&[bool]>,
    ) -> f64 {
        let stay = v0[g * self.n_b + i];
        if self.lambda == 0.0 {
            return stay;
        }
        let mut offer = 0.0;
        for k in 0..self.n_d {
            let back = self.repay_restructured(v1, g, k, i);
            let take = match flags {
                None => back >= stay,
                Some(f) => f[(g * self.n_d + k) * self.n_b + i],
            };
            offer += self.probs[k] * if take { back } else { stay };
        }
        self.lambda * offer + (1.0 - self.lambda) * stay
    }
}

/// Fixed discrete choices used by the policy-evaluation sweeps.
struct Policy {
    slots: Vec<Option<Choice>>,
    default: Vec<bool>,
    accept: Vec<bool>,
}

struct Workspace {
    v1: Vec<f64>,
    v0: Vec<f64>,
    option_repay: Vec<f64>,
    option_autarky: Vec<f64>,
    cont: Vec<f64>,
    cont_autarky: Vec<f64>,
}

impl Workspace {
    fn new(n: usize) -> Self {
        Self {
            v1: vec![0.0; n],
            v0: vec![0.0; n],
            option_repay: vec![0.0; n],
            option_autarky: vec![0.0; n],
            cont: vec![0.0; n],
            cont_autarky: vec![0.0; n],
        }
    }
}

/// One maximization sweep. Returns the sup-norm change and the policy.
fn improve(st: &Statics, kernel: &RepayKernel, ws: &mut Workspace) -> (f64, Policy) {
    let (n_g, n_b, n_d) = (st.n_g, st.n_b, st.n_d);
    let n = n_g * n_b;
    let mut default = vec![false; n];
    let mut accept = vec![false; n_g * n_d * n_b];
    for g in 0..n_g {
        for i in 0..n_b {
            let c = g * n_b + i;
            let (v1, v0) = (ws.v1[c], ws.v0[c]);
            let d = st.allow_default && v1 < v0;
            default[c] = d;
            ws.option_repay[c] = if d { v0 } else { v1 };
            for k in 0..n_d {
                accept[(g * n_d + k) * n_b + i] = st.repay_restructured(&ws.v1, g, k, i) >= v0;
            }
            ws.option_autarky[c] = st.autarky_option(&ws.v1, &ws.v0, g, i, Some(&accept));
        }
    }
    st.expect(&ws.option_repay, &mut ws.cont);
    st.expect(&ws.option_autarky, &mut ws.cont_autarky);

    let mut diff: f64 = 0.0;
    let mut slots = Vec::with_capacity(n);
    for g in 0..n_g {
        let cont = &ws.cont[g * n_b..(g + 1) * n_b];
        for i in 0..n_b {
            let c = g * n_b + i;
            let choice = kernel.best(g, i, cont, st.beta);
            let v1 = choice.map_or(INFEASIBLE, |ch| ch.value);
            let v0 = if is_infeasible(st.autarky_flow[g]) {
                INFEASIBLE
            } else {
                st.autarky_flow[g] + st.beta * ws.cont_autarky[c]
            };
            diff = diff.max((v1 - ws.v1[c]).abs()).max((v0 - ws.v0[c]).abs());
            ws.v1[c] = v1;
            ws.v0[c] = v0;
            slots.push(choice);
        }
    }
    (
        diff,
        Policy {
            slots,
            default,
            accept,
        },
    )
}

/// One evaluation sweep with all discrete choices held fixed.
fn evaluate(st: &Statics, kernel: &RepayKernel, ws: &mut Workspace, policy: &Policy) {
    let (n_g, n_b) = (st.n_g, st.n_b);
    for g in 0..n_g {
        for i in 0..n_b {
            let c = g * n_b + i;
            ws.option_repay[c] = if policy.default[c] {
                ws.v0[c]
            } else {
                ws.v1[c]
            };
            ws.option_autarky[c] = st.autarky_option(&ws.v1, &ws.v0, g, i, Some(&policy.accept));
        }
    }
    st.expect(&ws.option_repay, &mut ws.cont);
    st.expect(&ws.option_autarky, &mut ws.cont_autarky);
    for g in 0..n_g {
        for i in 0..n_b {
            let c = g * n_b + i;
            ws.v1[c] = match policy.slots[c] {
                Some(ch) => kernel.flow_at(ch.slot) + st.beta * ws.cont[c - i + ch.debt],
                None => INFEASIBLE,
            };
            if !is_infeasible(st.autarky_flow[g]) {
                ws.v0[c] = st.autarky_flow[g] + st.beta * ws.cont_autarky[c];
            }
        }
    }
}

/// Value iteration (with policy-evaluation acceleration) for fixed prices.
fn solve_values(
    st: &Statics,
    kernel: &RepayKernel,
    ws: &mut Workspace,
    tol: f64,
    max_sweeps: usize,
    howard: usize,
) -> Result<(usize, f64, Policy)> {
    let mut sweeps = 0;
    loop {
        let (diff, policy) = improve(st, kernel, ws);
        sweeps += 1;
        if diff < tol {
            return Ok((sweeps, diff, policy));
        }
        if sweeps >= max_sweeps {
            return Err(Error::NoConvergence {
                what: "value iteration",
                iterations: sweeps,
                residual: diff,
            });
        }
        // Evaluation sweeps only pay off once the policy has settled a bit.
        let steps = if diff < 1e-2 { howard } else { 0 };
        for _ in 0..steps {
            evaluate(st, kernel, ws, &policy);
        }
        sweeps += steps;
    }
}

/// Implied prices and decisions for given value tables.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceUpdate {
    pub price_repay: Vec<f64>,
    pub price_autarky: Vec<f64>,
    pub default: Vec<bool>,
    pub accept: Vec<bool>,
}

/// Prices implied by the default and acceptance decisions of `(v1, v0)`.
///
/// The secondary-market price solves, for each debt level separately,
/// `P0(g) = beta E[ lambda sum_k pi_k delta_k a(g', k) + pi_A(g') P0(g') ]`,
/// iterated from `p0_start` to sup-norm `secondary_tol`; the access price is
/// `P1(g, B') = beta E[(1 - d(g', B')) + d(g', B') P0(g', B')]`.
pub fn update_prices(
    econ: &Economy,
    v1: &[f64],
    v0: &[f64],
    p0_start: Option<&[f64]>,
) -> PriceUpdate {
    let st = Statics::new(econ);
    implied_prices(&st, econ.params.solver.secondary_tol, v1, v0, p0_start)
}

fn implied_prices(
    st: &Statics,
    tol: f64,
    v1: &[f64],
    v0: &[f64],
    p0_start: Option<&[f64]>,
) -> PriceUpdate {
    let (n_g, n_b, n_d) = (st.n_g, st.n_b, st.n_d);
    let n = n_g * n_b;
    let mut default = vec![false; n];
    let mut accept = vec![false; n_g * n_d * n_b];
    for g in 0..n_g {
        for i in 0..n_b {
            let c = g * n_b + i;
            default[c] = st.allow_default && v1[c] < v0[c];
            for k in 0..n_d {
                accept[(g * n_d + k) * n_b + i] = st.repay_restructured(v1, g, k, i) >= v0[c];
            }
        }
    }

    // Expected recovery and staying probability per (g', i).
    let mut recovery = vec![0.0; n];
    let mut stay = vec![0.0; n];
    for g in 0..n_g {
        for i in 0..n_b {
            let (mut rec, mut acc) = (0.0, 0.0);
            for k in 0..n_d {
                if accept[(g * n_d + k) * n_b + i] {
                    rec += st.probs[k] * st.deltas[k];
                    acc += st.probs[k];
                }
            }
            recovery[g * n_b + i] = st.lambda * rec;
            stay[g * n_b + i] = 1.0 - st.lambda * acc;
        }
    }

    let mut p0 = p0_start.map_or_else(|| vec![0.0; n], <[f64]>::to_vec);
    let mut col = vec![0.0; n_g];
    let mut next = vec![0.0; n_g];
    for i in 0..n_b {
        for g in 0..n_g {
            col[g] = p0[g * n_b + i];
        }
        for _ in 0..100_000 {
            let mut diff: f64 = 0.0;
            for g in 0..n_g {
                let row = &st.transition[g * n_g..(g + 1) * n_g];
                let mut s = 0.0;
                for (gp, &p) in row.iter().enumerate() {
                    let c = gp * n_b + i;
                    s += p * (recovery[c] + stay[c] * col[gp]);
                }
                next[g] = st.beta * s;
                diff = diff.max((next[g] - col[g]).abs());
            }
            std::mem::swap(&mut col, &mut next);
            if diff < tol {
                break;
            }
        }
        for g in 0..n_g {
            p0[g * n_b + i] = col[g];
        }
    }

    let mut payoff = vec![0.0; n];
    for c in 0..n {
        payoff[c] = if default[c] { p0[c] } else { 1.0 };
    }
    let mut p1 = vec![0.0; n];
    st.expect(&payoff, &mut p1);
    p1.iter_mut().for_each(|p| *p *= st.beta);
    PriceUpdate {
        price_repay: p1,
        price_autarky: p0,
        default,
        accept,
    }
}

/// Repayment branch in cell (g, i) by direct search over all debt choices.
///
/// Revenue is pinned at need, `R = max(0, g + B - P1 B')`; any excess bond
/// proceeds are rebated as a lump-sum transfer.
pub fn bellman_repay(
    econ: &Economy,
    v1: &[f64],
    v0: &[f64],
    p1: &[f64],
    g: usize,
    i: usize,
) -> RepayChoice {
    let n_b = econ.n_b();
    let beta = econ.beta();
    let gv = econ.chain.g_values[g];
    let need = gv + econ.grid.b_values[i];
    let allow = econ.params.allow_default;
    let mut best = RepayChoice {
        value: INFEASIBLE,
        debt: None,
        revenue: f64::NAN,
        transfer: f64::NAN,
    };
    for j in 0..n_b {
        let q = p1[g * n_b + j] * econ.grid.b_values[j];
        let revenue = (need - q).max(0.0);
        let Ok(w) = econ.model.period_payoff(1.0, revenue) else {
            continue;
        };
        let mut cont = 0.0;
        for (gp, &p) in econ.chain.row(g).iter().enumerate() {
            let c = gp * n_b + j;
            cont += p * if allow { v1[c].max(v0[c]) } else { v1[c] };
        }
        let value = w - gv + beta * cont;
        if best.debt.is_none() || value > best.value {
            best = RepayChoice {
                value,
                debt: Some(j),
                revenue,
                transfer: q + revenue - need,
            };
        }
    }
    best
}

/// Autarky value in cell (g, i): balanced budget today, offers may arrive
/// tomorrow.
pub fn bellman_autarky(econ: &Economy, v1: &[f64], v0: &[f64], g: usize, i: usize) -> f64 {
    let st = Statics::new(econ);
    if is_infeasible(st.autarky_flow[g]) {
        return INFEASIBLE;
    }
    let cont: f64 = econ
        .chain
        .row(g)
        .iter()
        .enumerate()
        .map(|(gp, &p)| p * st.autarky_option(v1, v0, gp, i, None))
        .sum();
    st.autarky_flow[g] + st.beta * cont
}

/// Solves the economy with default.
pub fn solve(econ: &Economy) -> Result<EdSolution> {
    let st = Statics::new(econ);
    let settings = econ.params.solver;
    let n = st.n_g * st.n_b;
    let mut ws = Workspace::new(n);
    let mut p1 = vec![st.beta; n];
    let mut p0 = vec![0.0; n];
    let mut history = Vec::new();
    let mut inner_sweeps = 0;

    for outer in 1..=settings.max_outer {
        let kernel = RepayKernel::build(econ, |g, j| p1[g * st.n_b + j], 0..st.n_b);
        let (sweeps, residual, policy) = solve_values(
            &st,
            &kernel,
            &mut ws,
            settings.value_tol,
            settings.max_inner,
            settings.howard_steps,
        )?;
        inner_sweeps += sweeps;
        let implied = implied_prices(&st, settings.secondary_tol, &ws.v1, &ws.v0, Some(&p0));
        let gap = sup_gap(&implied.price_repay, &p1).max(sup_gap(&implied.price_autarky, &p0));
        history.push(gap);
        if gap < settings.price_tol {
            let convergence = Convergence {
                outer_iterations: outer,
                price_residuals: history,
                inner_sweeps,
                value_residual: residual,
            };
            return Ok(assemble(econ, &kernel, ws, p1, p0, policy, convergence));
        }
        let w = settings.damping;
        for (p, q) in p1.iter_mut().zip(&implied.price_repay) {
            *p = (1.0 - w) * *p + w * q;
        }
        for (p, q) in p0.iter_mut().zip(&implied.price_autarky) {
            *p = (1.0 - w) * *p + w * q;
        }
    }
    Err(Error::PriceLoop {
        iterations: settings.max_outer,
        last: history.last().copied().unwrap_or(f64::NAN),
        history,
    })
}

fn sup_gap(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

fn assemble(
    econ: &Economy,
    kernel: &RepayKernel,
    ws: Workspace,
    p1: Vec<f64>,
    p0: Vec<f64>,
    policy: Policy,
    convergence: Convergence,
) -> EdSolution {
    let n_b = econ.n_b();
    let mut policy_debt = Vec::with_capacity(p1.len());
    let mut policy_revenue = Vec::with_capacity(p1.len());
    for (c, slot) in policy.slots.iter().enumerate() {
        let (g, i) = (c / n_b, c % n_b);
        match slot {
            Some(ch) => {
                let need = econ.chain.g_values[g] + econ.grid.b_values[i];
                policy_debt.push(Some(ch.debt));
                policy_revenue.push((need - kernel.proceeds(g, ch.debt)).max(0.0));
            }
            None => {
                policy_debt.push(None);
                policy_revenue.push(f64::NAN);
            }
        }
    }
    // Decisions consistent with the final value tables.
    let st = Statics::new(econ);
    let decisions = implied_prices(
        &st,
        econ.params.solver.secondary_tol,
        &ws.v1,
        &ws.v0,
        Some(&p0),
    );
    let mut sol = EdSolution {
        params: econ.params.clone(),
        g_values: econ.chain.g_values.clone(),
        b_values: econ.grid.b_values.clone(),
        deltas: econ.offers.deltas.clone(),
        v_repay: ws.v1,
        v_autarky: ws.v0,
        price_repay: p1,
        price_autarky: p0,
        policy_debt,
        policy_revenue,
        default: decisions.default,
        accept: decisions.accept,
        thresholds: Thresholds::default(),
        convergence,
    };
    sol.thresholds = extract_thresholds(&sol);
    sol
}

/// Reads the default and acceptance policies as thresholds and lists the cells
/// where the raw policy is not of threshold form.
pub fn extract_thresholds(sol: &EdSolution) -> Thresholds {
    let (n_g, n_b, n_d) = (sol.n_g(), sol.n_b(), sol.n_offers());
    let mut violations = Vec::new();
    let mut default_g = Vec::with_capacity(n_b);
    for i in 0..n_b {
        let first = (0..n_g).find(|&g| sol.defaults(g, i));
        match first {
            Some(g0) => {
                default_g.push(sol.g_values[g0]);
                for g in g0 + 1..n_g {
                    if !sol.defaults(g, i) {
                        violations.push(ThresholdViolation::Default { g, b: i });
                    }
                }
            }
            None => default_g.push(f64::INFINITY),
        }
    }
    let mut accept_delta = Vec::with_capacity(n_g * n_b);
    for g in 0..n_g {
        for i in 0..n_b {
            let last = (0..n_d).rev().find(|&k| sol.accept_at(g, k, i));
            match last {
                Some(k0) => {
                    accept_delta.push(sol.deltas[k0]);
                    for k in 0..k0 {
                        if !sol.accept_at(g, k, i) {
                            violations.push(ThresholdViolation::Accept { g, b: i, k });
                        }
                    }
                }
                None => accept_delta.push(f64::NEG_INFINITY),
            }
        }
    }
    Thresholds {
        default_g,
        accept_delta,
        violations,
    }
}

/// Cells where default is optimal yet the government could raise more from new
/// debt than it owes.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FundRaisingReport {
    pub checked: usize,
    /// `(g, i, max_j P1(g, b_j) b_j)` for each offending cell.
    pub violations: Vec<(usize, usize, f64)>,
}

/// In default states with positive debt, checks `max_B' P1(g, B') B' <= B + tol`.
pub fn check_no_fund_raising(sol: &EdSolution, tol: f64) -> FundRaisingReport {
    let mut report = FundRaisingReport::default();
    for g in 0..sol.n_g() {
        let best = sol.debt_revenue(g).into_iter().fold(0.0, f64::max);
        for i in 1..sol.n_b() {
            if !sol.defaults(g, i) {
                continue;
            }
            report.checked += 1;
            if best > sol.b_values[i] + tol {
                report.violations.push((g, i, best));
            }
        }
    }
    report
}

/// Repayment-branch policies when default is ruled out for a few periods.
#[derive(Debug, Clone, PartialEq)]
pub struct ForcedRepayment {
    /// Per step s: value of repaying now and in steps s+1..periods-1, after
    /// which the equilibrium policies resume.
    pub values: Vec<Vec<f64>>,
    pub policy_debt: Vec<Vec<Option<usize>>>,
    pub policy_revenue: Vec<Vec<f64>>,
}

/// Backward recursion for a government forced to repay for `periods`
/// periods at equilibrium prices. The last forced step is the ordinary
/// repayment branch; earlier steps continue into the forced value.
pub fn forced_repayment(econ: &Economy, sol: &EdSolution, periods: usize) -> ForcedRepayment {
    let st = Statics::new(econ);
    let n_b = st.n_b;
    let kernel = RepayKernel::build(econ, |g, j| sol.price_repay[g * n_b + j], 0..n_b);
    let mut values = vec![sol.v_repay.clone()];
    let mut policy_debt = vec![sol.policy_debt.clone()];
    let mut policy_revenue = vec![sol.policy_revenue.clone()];
    let mut cont = vec![0.0; st.n_g * n_b];
    for _ in 1..periods {
        st.expect(values.last().unwrap(), &mut cont);
        let (mut v, mut pd, mut pr) = (Vec::new(), Vec::new(), Vec::new());
        for g in 0..st.n_g {
            let need0 = econ.chain.g_values[g];
            for i in 0..n_b {
                match kernel.best(g, i, &cont[g * n_b..(g + 1) * n_b], st.beta) {
                    Some(ch) => {
                        v.push(ch.value);
                        pd.push(Some(ch.debt));
                        let need = need0 + econ.grid.b_values[i];
                        pr.push((need - kernel.proceeds(g, ch.debt)).max(0.0));
                    }
                    None => {
                        v.push(INFEASIBLE);
                        pd.push(None);
                        pr.push(f64::NAN);
                    }
                }
            }
        }
        values.push(v);
        policy_debt.push(pd);
        policy_revenue.push(pr);
    }
    values.reverse();
    policy_debt.reverse();
    policy_revenue.reverse();
    ForcedRepayment {
        values,
        policy_debt,
        policy_revenue,
    }
}
