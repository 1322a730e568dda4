#![allow(dead_code)]

use fiscal_default::{
    DebtSpec, Economy, EconomyParams, MeanConvention, OfferSpec, ShockSpec, SolverSettings,
};

pub fn tight() -> SolverSettings {
    SolverSettings {
        price_tol: 1e-12,
        value_tol: 1e-12,
        secondary_tol: 1e-14,
        ..SolverSettings::default()
    }
}

/// Two spending states, three debt levels, no offers.
pub fn toy_params() -> EconomyParams {
    EconomyParams {
        shocks: ShockSpec::Explicit {
            g_values: vec![0.06, 0.2],
            transition: vec![vec![0.8, 0.2], vec![0.3, 0.7]],
        },
        offers: OfferSpec::Explicit {
            lambda: 0.0,
            deltas: vec![0.5],
            probs: vec![1.0],
        },
        debt: DebtSpec {
            max: 0.3,
            points: 3,
        },
        solver: tight(),
        ..EconomyParams::default()
    }
}

/// Calibrated chain with a coarse debt grid.
pub fn coarse_params(points: usize, lambda: f64) -> EconomyParams {
    let mut p = EconomyParams {
        debt: DebtSpec { max: 0.4, points },
        ..EconomyParams::default()
    };
    p.offers.set_lambda(lambda);
    p
}

/// Wide-dispersion chain under which defaults are frequent.
pub fn wide_shocks() -> ShockSpec {
    ShockSpec::Tauchen {
        mu: 0.114,
        rho: 0.56,
        sigma_eps: 0.19235,
        n_states: 11,
        span: 2.378,
        convention: MeanConvention::Level,
    }
}

pub fn build(p: EconomyParams) -> Economy {
    p.build().unwrap()
}
