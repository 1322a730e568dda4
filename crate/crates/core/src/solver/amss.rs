//! Risk-free debt baseline: the government always repays, bonds trade at the
//! constant price `beta`, and debt is confined to exogenous limits.

use serde::{Deserialize, Serialize};

use super::kernel::{Choice, RepayKernel};
use super::INFEASIBLE;
use crate::error::{invalid, Error, Result};
use crate::params::{Economy, EconomyParams};

/// Exogenous debt limits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DebtLimits {
    pub min: f64,
    pub max: f64,
}

impl DebtLimits {
    /// The whole debt grid.
    pub fn full(econ: &Economy) -> Self {
        Self {
            min: 0.0,
            max: econ.grid.max(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmssSolution {
    pub params: EconomyParams,
    pub g_values: Vec<f64>,
    pub b_values: Vec<f64>,
    pub value: Vec<f64>,
    pub policy_debt: Vec<Option<usize>>,
    pub policy_revenue: Vec<f64>,
    pub limits: DebtLimits,
    pub sweeps: usize,
    /// Cells with an empty feasible set.
    pub infeasible: Vec<(usize, usize)>,
}

impl AmssSolution {
    pub fn n_b(&self) -> usize {
        self.b_values.len()
    }

    #[inline]
    pub fn idx(&self, g: usize, i: usize) -> usize {
        g * self.n_b() + i
    }
}

/// Value iteration on `V(g, B) = max_B' W1(R) - g + beta E V(g', B')` with
/// `R = max(0, g + B - beta B')` and `B'` restricted to the limits.
pub fn solve_amss(econ: &Economy, limits: DebtLimits) -> Result<AmssSolution> {
    if !(limits.max >= limits.min) {
        return Err(invalid("limits", "max must not be below min"));
    }
    let b = &econ.grid.b_values;
    let lo = b.partition_point(|&x| x < limits.min - 1e-12);
    let hi = b.partition_point(|&x| x <= limits.max + 1e-12);
    if lo >= hi {
        return Err(invalid("limits", "no grid point inside the debt limits"));
    }
    let (n_g, n_b) = (econ.n_g(), econ.n_b());
    let beta = econ.beta();
    let settings = econ.params.solver;
    let kernel = RepayKernel::build(econ, |_, _| beta, lo..hi);

    let n = n_g * n_b;
    let mut v = vec![0.0; n];
    let mut cont = vec![0.0; n];
    let mut sweeps = 0;
    let mut choices: Vec<Option<Choice>>;
    loop {
        expect(econ, &v, &mut cont);
        let mut diff: f64 = 0.0;
        choices = Vec::with_capacity(n);
        for g in 0..n_g {
            let row = &cont[g * n_b..(g + 1) * n_b];
            for i in 0..n_b {
                let ch = kernel.best(g, i, row, beta);
                let nv = ch.map_or(INFEASIBLE, |c| c.value);
                diff = diff.max((nv - v[g * n_b + i]).abs());
                v[g * n_b + i] = nv;
                choices.push(ch);
            }
        }
        sweeps += 1;
        if diff < settings.value_tol {
            break;
        }
        if sweeps >= settings.max_inner {
            return Err(Error::NoConvergence {
                what: "risk-free value iteration",
                iterations: sweeps,
                residual: diff,
            });
        }
        if diff < 1e-2 {
            for _ in 0..settings.howard_steps {
                expect(econ, &v, &mut cont);
                for (c, ch) in choices.iter().enumerate() {
                    if let Some(ch) = ch {
                        let g = c / n_b;
                        v[c] = kernel.flow_at(ch.slot) + beta * cont[g * n_b + ch.debt];
                    }
                }
            }
            sweeps += settings.howard_steps;
        }
    }

    let mut policy_debt = Vec::with_capacity(n);
    let mut policy_revenue = Vec::with_capacity(n);
    let mut infeasible = Vec::new();
    for (c, ch) in choices.iter().enumerate() {
        let (g, i) = (c / n_b, c % n_b);
        match ch {
            Some(ch) => {
                let need = econ.chain.g_values[g] + b[i];
                policy_debt.push(Some(ch.debt));
                policy_revenue.push((need - kernel.proceeds(g, ch.debt)).max(0.0));
            }
            None => {
                policy_debt.push(None);
                policy_revenue.push(f64::NAN);
                infeasible.push((g, i));
            }
        }
    }
    Ok(AmssSolution {
        params: econ.params.clone(),
        g_values: econ.chain.g_values.clone(),
        b_values: b.clone(),
        value: v,
        policy_debt,
        policy_revenue,
        limits,
        sweeps,
        infeasible,
    })
}

fn expect(econ: &Economy, x: &[f64], out: &mut [f64]) {
    let (n_g, n_b) = (econ.n_g(), econ.n_b());
    out.iter_mut().for_each(|v| *v = 0.0);
    for g in 0..n_g {
        for (gp, &p) in econ.chain.row(g).iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            let (dst, src) = (g * n_b, gp * n_b);
            for j in 0..n_b {
                out[dst + j] += p * x[src + j];
            }
        }
    }
}
