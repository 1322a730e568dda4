mod common;

use std::sync::OnceLock;

use common::*;
use fiscal_default::sim::{
    collect_episodes, counterfactual_no_default, impulse_response, mc_moments, simulate,
    simulate_amss, validate_amss_path, validate_implementability, EpisodeSpec, MomentSettings,
    SimPath, SimSettings,
};
use fiscal_default::solver::forced_repayment;
use fiscal_default::{
    solve, solve_amss, AmssSolution, DebtLimits, DebtSpec, Economy, EconomyParams, EdSolution,
    OfferEvent, OfferSpec, ShockSpec,
};

struct Fixture {
    econ: Economy,
    ed: EdSolution,
    amss: AmssSolution,
}

fn fixture_for(p: EconomyParams) -> Fixture {
    let econ = build(p);
    let ed = solve(&econ).unwrap();
    let amss = solve_amss(&econ, DebtLimits::full(&econ)).unwrap();
    Fixture { econ, ed, amss }
}

/// Coarse grid, wide spending chain: defaults and renegotiations are common.
fn busy() -> &'static Fixture {
    static F: OnceLock<Fixture> = OnceLock::new();
    F.get_or_init(|| {
        fixture_for(EconomyParams {
            shocks: wide_shocks(),
            ..coarse_params(160, 0.47)
        })
    })
}

/// Without offers the government only defaults when forced to: spending in
/// the high state exceeds the peak revenue, so long high spells exhaust the
/// borrowing capacity.
fn no_offers() -> Fixture {
    fixture_for(EconomyParams {
        shocks: ShockSpec::Explicit {
            g_values: vec![0.02, 0.26],
            transition: vec![vec![0.9, 0.1], vec![0.2, 0.8]],
        },
        ..coarse_params(160, 0.0)
    })
}

const SHORT: SimSettings = SimSettings {
    horizon: 2000,
    burn_in: 0,
};

fn assert_invariants(p: &SimPath, n_b: usize) {
    for t in 1..p.len() {
        let expected = if p.access[t - 1] {
            !p.default[t]
        } else {
            p.accept[t]
        };
        assert_eq!(p.access[t], expected, "law of motion at {t}");
        if !p.access[t] {
            assert_eq!(p.debt_next[t], p.debt[t], "debt frozen at {t}");
        }
        if p.default[t] {
            assert!(p.access[t - 1] && p.debt[t] > 0.0);
        }
        if p.accept[t] {
            assert!(!p.access[t - 1] && matches!(p.event[t], OfferEvent::Offer(_)));
        }
        assert_eq!(p.debt[t], p.debt_next[t - 1]);
    }
    assert!(p.debt_next_index.iter().all(|&j| j < n_b));
}

#[test]
fn simulated_paths_pass_the_implementability_check() {
    let f = busy();
    let mut defaults = 0;
    for seed in 0..5 {
        let p = simulate(&f.econ, &f.ed, SHORT, seed).unwrap();
        let report = validate_implementability(&p, &f.econ, &f.ed, 1e-9);
        assert!(report.passed(), "{:?}", &report.violations[..1]);
        assert_eq!(report.slack.len(), 2000);
        for t in 0..p.len() {
            if !p.access[t] {
                assert!(report.slack[t].abs() < 1e-9);
            }
        }
        assert_invariants(&p, f.econ.n_b());
        defaults += p.default.iter().filter(|&&d| d).count();

        let rf = simulate_amss(&f.econ, &f.amss, SHORT, seed).unwrap();
        assert!(validate_amss_path(&rf, &f.econ, 1e-9).passed());
        assert_eq!(rf.g_index, p.g_index);
    }
    assert!(defaults > 0);
}

#[test]
fn lowering_one_tax_rate_is_caught_at_that_date() {
    let f = busy();
    let mut p = simulate(&f.econ, &f.ed, SHORT, 11).unwrap();
    let t = (100..p.len())
        .find(|&t| p.access[t] && p.tax[t] > 0.05)
        .unwrap();
    p.tax[t] *= 0.99;
    let report = validate_implementability(&p, &f.econ, &f.ed, 1e-9);
    assert!(!report.passed());
    assert!(
        report.violations.iter().all(|v| v.t == t),
        "{:?}",
        report.violations
    );
}

#[test]
fn corrupted_autarky_debt_is_caught() {
    let f = busy();
    let mut p = simulate(&f.econ, &f.ed, SHORT, 12).unwrap();
    let t = (1..p.len())
        .find(|&t| !p.access[t] && p.debt[t] > 0.0)
        .unwrap();
    p.debt_next[t] *= 0.5;
    let report = validate_implementability(&p, &f.econ, &f.ed, 1e-9);
    assert!(report.violations.iter().any(|v| v.t == t));
}

#[test]
fn autarky_is_absorbing_without_offers() {
    let f = no_offers();
    let mut seen = false;
    for seed in 0..20 {
        let p = simulate(&f.econ, &f.ed, SHORT, seed).unwrap();
        if let Some(t) = p.default.iter().position(|&d| d) {
            seen = true;
            assert!(p.access[t..].iter().all(|&a| !a));
            assert_eq!(p.default.iter().filter(|&&d| d).count(), 1);
        }
    }
    assert!(seen, "no default in 20 paths");
}

#[test]
fn identical_seeds_reproduce_paths_and_moments() {
    let f = busy();
    let a = simulate(&f.econ, &f.ed, SHORT, 5).unwrap();
    let b = simulate(&f.econ, &f.ed, SHORT, 5).unwrap();
    assert_eq!(a, b);
    let c = simulate(&f.econ, &f.ed, SHORT, 6).unwrap();
    assert_ne!(a.g_index, c.g_index);

    let settings = MomentSettings {
        replications: 8,
        sim: SimSettings {
            horizon: 600,
            burn_in: 100,
        },
        ..Default::default()
    };
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| mc_moments(&f.econ, &f.ed, &f.amss, &settings, 42).unwrap())
    };
    let one = run(1);
    let three = run(3);
    assert_eq!(format!("{one:?}"), format!("{three:?}"));
}

#[test]
fn moments_are_internally_consistent() {
    let f = busy();
    let settings = MomentSettings {
        replications: 20,
        sim: SimSettings {
            horizon: 1500,
            burn_in: 300,
        },
        ..Default::default()
    };
    let m = mc_moments(&f.econ, &f.ed, &f.amss, &settings, 7).unwrap();
    assert_eq!(m.per_replication.len(), 20);
    assert_eq!(m.periods, 1200);
    assert!(m.default_frequency > 0.0);
    for h in &m.histograms {
        assert_eq!(h.counts.len(), 60);
        assert_eq!(h.edges.len(), 61);
        if h.observations > 0 {
            assert!((h.mass.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert_eq!(h.counts.iter().sum::<u64>() as usize, h.observations);
        }
    }
    assert!(
        m.renegotiation.avg_accepted_offer >= 0.45 && m.renegotiation.avg_accepted_offer <= 0.9
    );
    // Prices never exceed beta, so spreads are non-negative.
    assert!(f.ed.price_repay.iter().all(|&p| p <= 0.97 + 1e-15));
    let p = simulate(&f.econ, &f.ed, SHORT, 3).unwrap();
    for t in 0..p.len() {
        if p.access[t] {
            assert!(p.spread[t] >= -1e-12);
        }
    }
}

#[test]
fn constant_spending_gives_zero_tax_volatility() {
    let p = EconomyParams {
        shocks: ShockSpec::Explicit {
            g_values: vec![0.114],
            transition: vec![vec![1.0]],
        },
        debt: DebtSpec {
            max: 0.4,
            points: 40,
        },
        ..EconomyParams::default()
    };
    let f = fixture_for(p);
    let settings = MomentSettings {
        replications: 4,
        sim: SimSettings {
            horizon: 300,
            burn_in: 50,
        },
        ..Default::default()
    };
    let m = mc_moments(&f.econ, &f.ed, &f.amss, &settings, 1).unwrap();
    assert!(m.tax_sd_ed < 1e-12);
    assert!(m.tax_sd_amss < 1e-12);
    assert_eq!(m.default_frequency, 0.0);
    let rf = simulate_amss(
        &f.econ,
        &f.amss,
        SimSettings {
            horizon: 50,
            burn_in: 0,
        },
        0,
    )
    .unwrap();
    assert!(rf.debt_next.iter().all(|&b| b == 0.0));
    assert!(rf.revenue.iter().all(|&r| (r - 0.114).abs() < 1e-15));
}

#[test]
fn impulse_response_flat_under_constant_spending() {
    let f = busy();
    let g = f.econ.chain.g_values[3];
    let irf = impulse_response(&f.econ, &f.ed, &f.amss, &[g; 12]).unwrap();
    for s in [&irf.ed, &irf.amss] {
        let t0 = s.tax[0];
        assert!(s.tax.iter().all(|&x| (x - t0).abs() < 1e-12));
        assert!(s.debt.iter().all(|&b| b == s.debt[0]));
    }
    let lo = f.econ.chain.g_values[0];
    assert!(impulse_response(&f.econ, &f.ed, &f.amss, &[lo * 0.9]).is_err());
}

#[test]
fn episodes_and_counterfactuals() {
    let f = busy();
    let settings = MomentSettings {
        replications: 40,
        ..Default::default()
    };
    let spec = EpisodeSpec {
        max_episodes: 200,
        ..Default::default()
    };
    let panel = collect_episodes(&f.econ, &f.ed, &f.amss, &settings, &spec, 9).unwrap();
    assert!(panel.count > 0);
    assert_eq!(panel.offsets, (-4..=4).collect::<Vec<i64>>());
    for w in &panel.windows {
        assert_eq!(w.g.len(), 9);
        assert!(w.debt[4] > 0.0);
        assert!(w.counterfactual.bound_holds);
    }
    // Direct use of the counterfactual at a known state.
    let forced = forced_repayment(&f.econ, &f.ed, 5);
    let w = &panel.windows[0];
    let g_index: Vec<usize> =
        w.g.iter()
            .skip(4)
            .map(|&g| f.econ.chain.nearest(g).unwrap())
            .take(5)
            .collect();
    let i = f.econ.grid.nearest(w.debt[4]);
    let cf = counterfactual_no_default(&f.econ, &f.ed, &forced, &g_index, i);
    assert_eq!(cf, w.counterfactual);
}

#[test]
fn no_defaults_means_an_empty_episode_panel() {
    let f = fixture_for(EconomyParams {
        allow_default: false,
        ..coarse_params(60, 0.47)
    });
    let settings = MomentSettings {
        replications: 5,
        sim: SimSettings {
            horizon: 500,
            burn_in: 100,
        },
        ..Default::default()
    };
    let panel = collect_episodes(
        &f.econ,
        &f.ed,
        &f.amss,
        &settings,
        &EpisodeSpec::default(),
        1,
    )
    .unwrap();
    assert_eq!(panel.count, 0);
    assert!(panel.windows.is_empty());
}

#[test]
fn offer_free_solutions_never_restructure() {
    let f = fixture_for(EconomyParams {
        offers: OfferSpec::Explicit {
            lambda: 0.0,
            deltas: vec![0.5],
            probs: vec![1.0],
        },
        ..coarse_params(60, 0.0)
    });
    let p = simulate(&f.econ, &f.ed, SHORT, 0).unwrap();
    assert!(p.accept.iter().all(|&a| !a));
}

#[test]
fn settings_are_validated() {
    let f = busy();
    assert!(simulate(
        &f.econ,
        &f.ed,
        SimSettings {
            horizon: 10,
            burn_in: 10
        },
        0
    )
    .is_err());
    let other = build(coarse_params(30, 0.47));
    assert!(simulate(&other, &f.ed, SHORT, 0).is_err());
}
