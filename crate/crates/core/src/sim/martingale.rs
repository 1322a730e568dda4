//! Law-of-motion diagnostics for the multiplier on the implementability
//! constraint.
//!
//! Risk-free economy: away from the debt limits `E_t[nu_{t+1}] = nu_t`.
//! Economy with default (no offers): `nu_t (1 + eps_t) = E_t[nu_{t+1} | repay]`,
//! where `eps_t` is the elasticity of `P1` at the debt issued. Both are tested
//! on the mean of the one-step residual against its Monte Carlo standard error.

use serde::{Deserialize, Serialize};

use super::moments::sd;
use super::SimPath;
use crate::solver::EdSolution;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MartingaleReport {
    pub observations: usize,
    pub mean: f64,
    pub se: f64,
    /// Mean residual in standard errors.
    pub z: f64,
    /// Mean multiplier over the sample, for scale.
    pub mean_multiplier: f64,
}

impl MartingaleReport {
    fn from(residuals: &[f64], levels: &[f64]) -> Self {
        let n = residuals.len();
        let mean = residuals.iter().sum::<f64>() / n.max(1) as f64;
        let se = sd(residuals) / (n as f64).sqrt();
        Self {
            observations: n,
            mean,
            se,
            z: mean / se,
            mean_multiplier: levels.iter().sum::<f64>() / levels.len().max(1) as f64,
        }
    }

    /// Mean residual within `k` standard errors of zero.
    pub fn within(&self, k: f64) -> bool {
        self.observations >= 2 && self.mean.abs() < k * self.se
    }
}

/// `nu_{t+1} - nu_t` over periods whose debt choice is strictly inside the
/// grid.
pub fn amss_martingale(paths: &[SimPath], n_b: usize) -> MartingaleReport {
    let (mut res, mut lev) = (Vec::new(), Vec::new());
    for p in paths {
        for t in p.kept() {
            if t + 1 >= p.len() {
                break;
            }
            let j = p.debt_next_index[t];
            let (a, b) = (p.multiplier[t], p.multiplier[t + 1]);
            if j > 0 && j + 1 < n_b && a.is_finite() && b.is_finite() {
                res.push(b - a);
                lev.push(a);
            }
        }
    }
    MartingaleReport::from(&res, &lev)
}

/// Elasticity of `P1(g, .)` at grid point `j` by a central difference over
/// `stencil` points on each side; `None` near the grid ends or where the
/// price vanishes.
pub fn price_elasticity(sol: &EdSolution, g: usize, j: usize, stencil: usize) -> Option<f64> {
    if j < stencil || j + stencil >= sol.n_b() || stencil == 0 {
        return None;
    }
    let p = |k: usize| sol.price_repay[sol.idx(g, k)];
    let (lo, hi) = (j - stencil, j + stencil);
    if p(j) <= 0.0 {
        return None;
    }
    let slope = (p(hi) - p(lo)) / (sol.b_values[hi] - sol.b_values[lo]);
    Some(slope * sol.b_values[j] / p(j))
}

/// `nu_{t+1} - nu_t (1 + eps_t)` over consecutive repayment periods with an
/// interior debt choice. Meant for solutions without offers, where the
/// government that defaults never returns.
pub fn ed_markup(paths: &[SimPath], sol: &EdSolution, stencil: usize) -> MartingaleReport {
    let (mut res, mut lev) = (Vec::new(), Vec::new());
    for p in paths {
        for t in p.kept() {
            if t + 1 >= p.len() {
                break;
            }
            if !(p.access[t] && p.access[t + 1]) || p.accept[t] {
                continue;
            }
            let j = p.debt_next_index[t];
            let Some(eps) = price_elasticity(sol, p.g_index[t], j, stencil) else {
                continue;
            };
            let (a, b) = (p.multiplier[t], p.multiplier[t + 1]);
            if j > 0 && a.is_finite() && b.is_finite() {
                res.push(b - a * (1.0 + eps));
                lev.push(a);
            }
        }
    }
    MartingaleReport::from(&res, &lev)
}
