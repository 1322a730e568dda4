//! Value-function solvers: the economy with default and the risk-free
//! (AMSS-style) baseline. Both share the repayment-branch kernel below.

pub mod amss;
pub mod ed;
mod kernel;

pub use amss::{solve_amss, AmssSolution, DebtLimits};
pub use ed::{
    bellman_autarky, bellman_repay, check_no_fund_raising, extract_thresholds, forced_repayment,
    solve, update_prices, Convergence, EdSolution, ForcedRepayment, FundRaisingReport, PriceUpdate,
    RepayChoice, ThresholdViolation, Thresholds,
};

/// Value assigned to states with an empty feasible set.
pub const INFEASIBLE: f64 = -1e12;

/// True for values at (or interpolated towards) the infeasibility sentinel.
#[inline]
pub fn is_infeasible(v: f64) -> bool {
    v <= INFEASIBLE * 1e-3
}
