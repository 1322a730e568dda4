//! Economy parametrization and the assembled, validated economy.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::model::{FiscalModel, Preferences};
use crate::stochastic::{tauchen, DebtGrid, MeanConvention, OfferSchedule, ShockChain};

/// How the spending chain is built.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ShockSpec {
    Tauchen {
        mu: f64,
        rho: f64,
        sigma_eps: f64,
        n_states: usize,
        span: f64,
        #[serde(default)]
        convention: MeanConvention,
    },
    Explicit {
        g_values: Vec<f64>,
        transition: Vec<Vec<f64>>,
    },
}

impl Default for ShockSpec {
    fn default() -> Self {
        ShockSpec::Tauchen {
            mu: 0.114,
            rho: 0.56,
            sigma_eps: 0.037,
            n_states: 11,
            span: 3.0,
            convention: MeanConvention::Level,
        }
    }
}

impl ShockSpec {
    pub fn build(&self) -> Result<ShockChain> {
        match self {
            ShockSpec::Tauchen {
                mu,
                rho,
                sigma_eps,
                n_states,
                span,
                convention,
            } => tauchen(*mu, *rho, *sigma_eps, *n_states, *span, *convention),
            ShockSpec::Explicit {
                g_values,
                transition,
            } => ShockChain::new(g_values.clone(), transition.concat()),
        }
    }
}

/// How the repayment-offer lattice is built.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum OfferSpec {
    Equispaced {
        lambda: f64,
        lo: f64,
        hi: f64,
        count: usize,
    },
    Explicit {
        lambda: f64,
        deltas: Vec<f64>,
        probs: Vec<f64>,
    },
}

impl Default for OfferSpec {
    fn default() -> Self {
        OfferSpec::Equispaced {
            lambda: 0.47,
            lo: 0.45,
            hi: 0.90,
            count: 10,
        }
    }
}

impl OfferSpec {
    pub fn build(&self) -> Result<OfferSchedule> {
        match self {
            OfferSpec::Equispaced {
                lambda,
                lo,
                hi,
                count,
            } => OfferSchedule::equispaced(*lambda, *lo, *hi, *count),
            OfferSpec::Explicit {
                lambda,
                deltas,
                probs,
            } => OfferSchedule::new(*lambda, deltas.clone(), probs.clone()),
        }
    }

    pub fn lambda(&self) -> f64 {
        match self {
            OfferSpec::Equispaced { lambda, .. } | OfferSpec::Explicit { lambda, .. } => *lambda,
        }
    }

    pub fn set_lambda(&mut self, value: f64) {
        match self {
            OfferSpec::Equispaced { lambda, .. } | OfferSpec::Explicit { lambda, .. } => {
                *lambda = value
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DebtSpec {
    pub max: f64,
    pub points: usize,
}

impl Default for DebtSpec {
    fn default() -> Self {
        Self {
            max: 0.4,
            points: 800,
        }
    }
}

/// Iteration controls for the value and price loops.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSettings {
    /// Weight on the implied prices in the damped outer update.
    pub damping: f64,
    pub price_tol: f64,
    pub value_tol: f64,
    /// Sup-norm tolerance of the secondary-market price fixed point.
    pub secondary_tol: f64,
    pub max_outer: usize,
    pub max_inner: usize,
    /// Policy-evaluation sweeps between two maximization sweeps.
    pub howard_steps: usize,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            damping: 0.5,
            price_tol: 1e-10,
            value_tol: 1e-9,
            secondary_tol: 1e-12,
            max_outer: 500,
            max_inner: 20_000,
            howard_steps: 40,
        }
    }
}

/// Complete description of one economy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EconomyParams {
    #[serde(default)]
    pub preferences: Preferences,
    #[serde(default)]
    pub shocks: ShockSpec,
    #[serde(default)]
    pub offers: OfferSpec,
    #[serde(default)]
    pub debt: DebtSpec,
    #[serde(default)]
    pub solver: SolverSettings,
    /// When false, the government always repays.
    #[serde(default = "yes")]
    pub allow_default: bool,
}

fn yes() -> bool {
    true
}

impl Default for EconomyParams {
    fn default() -> Self {
        Self {
            preferences: Preferences::default(),
            shocks: ShockSpec::default(),
            offers: OfferSpec::default(),
            debt: DebtSpec::default(),
            solver: SolverSettings::default(),
            allow_default: true,
        }
    }
}

impl EconomyParams {
    pub fn build(&self) -> Result<Economy> {
        Economy::new(self.clone())
    }
}

/// Validated economy: model primitives plus the discretized environment.
#[derive(Debug, Clone)]
pub struct Economy {
    pub params: EconomyParams,
    pub model: FiscalModel,
    pub chain: ShockChain,
    pub offers: OfferSchedule,
    pub grid: DebtGrid,
}

impl Economy {
    pub fn new(params: EconomyParams) -> Result<Self> {
        let model = FiscalModel::new(params.preferences)?;
        let chain = params.shocks.build()?;
        let offers = params.offers.build()?;
        let grid = DebtGrid::uniform(params.debt.max, params.debt.points)?;
        let s = &params.solver;
        if !(s.damping > 0.0 && s.damping <= 1.0) {
            return Err(invalid("damping", "must lie in (0, 1]"));
        }
        if !(s.price_tol > 0.0 && s.value_tol > 0.0 && s.secondary_tol > 0.0) {
            return Err(invalid("tolerances", "must be positive"));
        }
        if s.max_outer == 0 || s.max_inner == 0 {
            return Err(invalid("max_outer", "iteration caps must be positive"));
        }
        Ok(Self {
            params,
            model,
            chain,
            offers,
            grid,
        })
    }

    pub fn beta(&self) -> f64 {
        self.model.beta()
    }

    pub fn n_g(&self) -> usize {
        self.chain.len()
    }

    pub fn n_b(&self) -> usize {
        self.grid.len()
    }
}
