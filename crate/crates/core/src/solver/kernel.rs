//! Repayment-branch maximization shared by both solvers.
//!
//! For fixed prices the flow payoff of every (g, B, B') triple is fixed, so it
//! is tabulated once per price vector. Only "record" debt choices are kept: a
//! B' whose bond revenue `P(g, B') B'` does not exceed the revenue of some
//! smaller B' is dominated, because continuation values are non-increasing in
//! debt. Beyond the first record that covers `g + B` outright, revenue is zero
//! and the smallest such record dominates the rest.

use std::ops::Range;

use rayon::prelude::*;

use crate::model::invert_revenue_from;
use crate::params::Economy;

#[derive(Debug, Clone)]
pub(crate) struct RepayKernel {
    n_b: usize,
    /// Per g: record debt indices, ascending.
    records: Vec<Vec<usize>>,
    /// Per g: bond revenue `P(g, B') B'` for every grid point.
    proceeds: Vec<Vec<f64>>,
    /// Per (g, B): candidate positions `[start, end)` within `records[g]`.
    ranges: Vec<(usize, usize)>,
    /// Per (g, B): offset of the first candidate's flow payoff.
    offsets: Vec<usize>,
    /// Flow payoffs `W1(R) - g` for all candidates, flattened.
    flow: Vec<f64>,
}

/// Chosen candidate in a repayment cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Choice {
    pub value: f64,
    pub debt: usize,
    /// Position in the flattened flow table.
    pub slot: usize,
}

impl RepayKernel {
    /// `price(g, j)` is the access-market price of debt `b[j]` issued in state g;
    /// `allowed` restricts the debt choices.
    pub fn build<F>(econ: &Economy, price: F, allowed: Range<usize>) -> Self
    where
        F: Fn(usize, usize) -> f64 + Sync,
    {
        let n_g = econ.n_g();
        let n_b = econ.n_b();
        let b = &econ.grid.b_values;
        let prefs = *econ.model.preferences();
        let branch = *econ.model.access_branch();
        let r_max = branch.r_max;

        let proceeds: Vec<Vec<f64>> = (0..n_g)
            .map(|g| (0..n_b).map(|j| price(g, j) * b[j]).collect())
            .collect();
        let records: Vec<Vec<usize>> = proceeds
            .iter()
            .map(|q| {
                let mut out = Vec::new();
                let mut best = f64::NEG_INFINITY;
                for j in allowed.clone() {
                    if q[j] > best {
                        best = q[j];
                        out.push(j);
                    }
                }
                out
            })
            .collect();

        let per_g: Vec<(Vec<(usize, usize)>, Vec<f64>)> = (0..n_g)
            .into_par_iter()
            .map(|g| {
                let gv = econ.chain.g_values[g];
                let rec = &records[g];
                let q = &proceeds[g];
                let rec_q: Vec<f64> = rec.iter().map(|&j| q[j]).collect();
                let mut ranges = Vec::with_capacity(n_b);
                let mut flow = Vec::new();
                for &bi in b.iter() {
                    let need = gv + bi;
                    let start = rec_q.partition_point(|&x| x < need - r_max);
                    let end = (rec_q.partition_point(|&x| x < need) + 1).min(rec.len());
                    let end = end.max(start);
                    ranges.push((start, end));
                    // Walking the candidates from the largest proceeds down,
                    // revenue rises and labor falls, so each root starts
                    // Newton on the monotone side of the next one.
                    let base = flow.len();
                    flow.resize(base + end - start, f64::NEG_INFINITY);
                    let mut hint = branch.n_sat;
                    for (k, &qc) in rec_q[start..end].iter().enumerate().rev() {
                        let revenue = (need - qc).max(0.0);
                        if let Ok(n) = invert_revenue_from(&prefs, &branch, revenue, hint) {
                            hint = n;
                            flow[base + k] = n + prefs.h(1.0 - n) - gv;
                        }
                    }
                }
                (ranges, flow)
            })
            .collect();

        let mut ranges = Vec::with_capacity(n_g * n_b);
        let mut offsets = Vec::with_capacity(n_g * n_b);
        let mut flow = Vec::new();
        for (r, f) in per_g {
            let base = flow.len();
            let mut off = base;
            for &(s, e) in &r {
                offsets.push(off);
                off += e - s;
            }
            ranges.extend(r);
            flow.extend(f);
        }
        Self {
            n_b,
            records,
            proceeds,
            ranges,
            offsets,
            flow,
        }
    }

    /// Best debt choice in cell (g, i) given expected continuation values
    /// `cont[j]` for state g. Ties go to the smaller debt level.
    #[inline]
    pub fn best(&self, g: usize, i: usize, cont: &[f64], beta: f64) -> Option<Choice> {
        let cell = g * self.n_b + i;
        let (start, end) = self.ranges[cell];
        let rec = &self.records[g];
        let mut best: Option<Choice> = None;
        let mut slot = self.offsets[cell];
        for &j in &rec[start..end] {
            let v = self.flow[slot] + beta * cont[j];
            if v > f64::NEG_INFINITY && best.is_none_or(|b| v > b.value) {
                best = Some(Choice {
                    value: v,
                    debt: j,
                    slot,
                });
            }
            slot += 1;
        }
        best
    }

    #[inline]
    pub fn flow_at(&self, slot: usize) -> f64 {
        self.flow[slot]
    }

    #[inline]
    pub fn proceeds(&self, g: usize, j: usize) -> f64 {
        self.proceeds[g][j]
    }
}
