//! Optimal fiscal policy with endogenous default, random repayment offers and
//! secondary-market pricing of defaulted debt, together with a risk-free debt
//! baseline.
//!
//! The economy is quasi-linear, so the government effectively chooses tax
//! revenue each period. [`solver::solve`] computes values, bond prices and
//! policies; [`sim`] simulates paths and aggregates Monte Carlo statistics.

pub mod error;
pub mod io;
pub mod model;
pub mod params;
pub mod sim;
pub mod solver;
pub mod stochastic;

pub use error::{Error, Result};
pub use model::{FiscalModel, LaborAllocation, Preferences};
pub use params::{DebtSpec, Economy, EconomyParams, OfferSpec, ShockSpec, SolverSettings};
pub use solver::{solve, solve_amss, AmssSolution, DebtLimits, EdSolution};
pub use stochastic::{DebtGrid, MeanConvention, OfferEvent, OfferSchedule, ShockChain, SimRng};
