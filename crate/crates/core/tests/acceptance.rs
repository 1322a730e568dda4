//! Acceptance report: one PASS/FAIL line per headline criterion.
//!
//! Runs as a plain binary (no test harness) so the report is always printed.
//! A failing criterion is reported, not turned into a test failure; errors in
//! the machinery itself (a solver that does not converge, an invalid config)
//! still abort with a non-zero exit.

use std::time::Instant;

use fiscal_default::sim::{
    amss_martingale, collect_episodes, ed_markup, mc_moments, renegotiation_table, simulate,
    simulate_amss, validate_amss_path, validate_implementability, EpisodeSpec, MomentSettings,
    SimPath, SimSettings,
};
use fiscal_default::solver::EdSolution;
use fiscal_default::{
    solve, solve_amss, AmssSolution, DebtLimits, DebtSpec, Economy, EconomyParams, MeanConvention,
    OfferSpec, ShockSpec,
};

// Criterion 1
const FREQ_BAND: (f64, f64) = (0.010, 0.026);
const MC_REPLICATIONS: usize = 500;
const SOLVE_BUDGET_S: f64 = 600.0;
const MC_BUDGET_S: f64 = 300.0;
// Criterion 2
const LAMBDAS: [f64; 5] = [0.2, 0.4, 0.6, 0.8, 1.0];
const TABLE_OFFER: [f64; 5] = [0.60, 0.59, 0.59, 0.58, 0.57];
const TABLE_HIGH: [f64; 5] = [10.08, 6.69, 6.03, 5.19, 5.06];
const TABLE_LOW: [f64; 5] = [9.46, 5.82, 3.42, 3.16, 2.92];
const OFFER_TOL: f64 = 0.1;
const DURATION_REL_TOL: f64 = 0.30;
// Criterion 3
const TAX_SD_GAP: f64 = 1.25;
// Criterion 4
const SMALL_LAMBDA: f64 = 0.1;
const SINGLE_DELTA: f64 = 0.675;
const CLOSED_FORM_TOL: f64 = 1e-10;
const ROUND_OFF: f64 = 1e-12;
// Criterion 6
const ORACLE_TOL: f64 = 1e-8;
// Criterion 7
const PATH_TOL: f64 = 1e-9;
// Criterion 8
const MARTINGALE_SE: f64 = 3.0;
const MARTINGALE_PATHS: usize = 200;
const ELASTICITY_STENCIL: usize = 1;
// Criterion 9
const PEAK_OFFSET: i64 = -2;
const COUNTERFACTUAL_SHARE: f64 = 0.95;

const SEED: u64 = 20_240_601;

fn report(id: u32, name: &str, pass: bool, detail: String) -> bool {
    println!(
        "[{}] {id}. {name}: {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
    pass
}

fn note(text: String) {
    println!("       {text}");
}

/// Parametrization as written: sigma_eps 0.037, span 3.
fn literal() -> EconomyParams {
    EconomyParams::default()
}

/// Innovation s.d. sqrt(0.037) and the span that places the spending levels of
/// the impulse-response experiment on the grid.
fn paper_grid() -> EconomyParams {
    EconomyParams {
        shocks: ShockSpec::Tauchen {
            mu: 0.114,
            rho: 0.56,
            sigma_eps: 0.19235,
            n_states: 11,
            span: 2.378,
            convention: MeanConvention::Level,
        },
        ..EconomyParams::default()
    }
}

struct Solved {
    econ: Economy,
    ed: EdSolution,
    amss: AmssSolution,
    solve_s: f64,
}

fn solved(p: EconomyParams) -> Solved {
    let econ = p.build().expect("valid parameters");
    let t = Instant::now();
    let ed = solve(&econ).expect("solver converges");
    let solve_s = t.elapsed().as_secs_f64();
    let amss = solve_amss(&econ, DebtLimits::full(&econ)).expect("risk-free solver converges");
    Solved {
        econ,
        ed,
        amss,
        solve_s,
    }
}

fn moment_settings() -> MomentSettings {
    MomentSettings {
        replications: MC_REPLICATIONS,
        ..MomentSettings::default()
    }
}

fn non_increasing(x: &[f64]) -> bool {
    x.windows(2).all(|w| w[1] <= w[0])
}

fn main() {
    let start = Instant::now();
    let mut passed = 0;
    let mut total = 0;
    let mut tally = |ok: bool| {
        total += 1;
        passed += ok as u32;
    };

    let lit = solved(literal());
    let grid = solved(paper_grid());

    // 1. Default frequency.
    let t = Instant::now();
    let m_lit = mc_moments(&lit.econ, &lit.ed, &lit.amss, &moment_settings(), SEED).unwrap();
    let mc_s = t.elapsed().as_secs_f64();
    let f = m_lit.default_frequency;
    tally(report(
        1,
        "default frequency",
        f >= FREQ_BAND.0 && f <= FREQ_BAND.1 && lit.solve_s < SOLVE_BUDGET_S && mc_s < MC_BUDGET_S,
        format!(
            "{:.4}% (s.e. {:.4}%) over {}x{} periods, band [{:.1}%, {:.1}%]; solve {:.0}s, MC {:.1}s",
            100.0 * f,
            100.0 * m_lit.default_frequency_se,
            m_lit.replications,
            m_lit.periods,
            100.0 * FREQ_BAND.0,
            100.0 * FREQ_BAND.1,
            lit.solve_s,
            mc_s
        ),
    ));
    let m_grid = mc_moments(&grid.econ, &grid.ed, &grid.amss, &moment_settings(), SEED).unwrap();
    note(format!(
        "wide-chain variant (sigma_eps 0.19235, span 2.378): {:.3}% (s.e. {:.3}%)",
        100.0 * m_grid.default_frequency,
        100.0 * m_grid.default_frequency_se
    ));

    // 2. Renegotiation table, wide-chain variant.
    let rows = renegotiation_table(
        &paper_grid(),
        &LAMBDAS,
        MC_REPLICATIONS,
        SimSettings::default(),
        SEED,
    )
    .unwrap();
    // Rows without any restructuring (no defaults at that lambda) fail the
    // criterion; the remaining checks run on the defined rows so the report
    // says what else is off.
    let defined: Vec<usize> = (0..rows.len())
        .filter(|&k| {
            [
                rows[k].avg_accepted_offer,
                rows[k].duration_high,
                rows[k].duration_low,
            ]
            .iter()
            .all(|v| v.is_finite())
        })
        .collect();
    let finite = defined.len() == rows.len();
    let pick = |f: fn(&fiscal_default::sim::RenegotiationRow) -> f64| -> Vec<f64> {
        defined.iter().map(|&k| f(&rows[k])).collect()
    };
    let (offer, high, low) = (
        pick(|r| r.avg_accepted_offer),
        pick(|r| r.duration_high),
        pick(|r| r.duration_low),
    );
    let table = |t: [f64; 5]| -> Vec<f64> { defined.iter().map(|&k| t[k]).collect() };
    let offers_ok = non_increasing(&offer)
        && offer
            .iter()
            .zip(table(TABLE_OFFER))
            .all(|(a, b)| (a - b).abs() <= OFFER_TOL);
    let durations_ok =
        non_increasing(&high) && non_increasing(&low) && high.iter().zip(&low).all(|(h, l)| h >= l);
    let within = |x: &[f64], t: Vec<f64>| {
        x.iter()
            .zip(t)
            .all(|(a, b)| (a - b).abs() <= DURATION_REL_TOL * b)
    };
    let magnitudes_ok = within(&high, table(TABLE_HIGH)) && within(&low, table(TABLE_LOW));
    tally(report(
        2,
        "renegotiation table",
        finite && offers_ok && durations_ok && magnitudes_ok,
        format!(
            "all rows defined {}, offers {}, duration trends and ordering {}, magnitudes {}",
            if finite { "yes" } else { "no" },
            if offers_ok { "ok" } else { "off" },
            if durations_ok { "ok" } else { "off" },
            if magnitudes_ok { "ok" } else { "off" }
        ),
    ));
    for r in &rows {
        note(format!(
            "lambda {:.1}: offer {:.3}  high {:.2}  low {:.2}  spells {}  default freq {:.3}%",
            r.lambda,
            r.avg_accepted_offer,
            r.duration_high,
            r.duration_low,
            r.spells,
            100.0 * r.default_frequency
        ));
    }

    // 3. Tax-volatility gap, wide-chain variant.
    tally(report(
        3,
        "tax volatility gap",
        m_grid.tax_sd_ratio >= TAX_SD_GAP,
        format!(
            "ED/AMSS tax s.d. {:.3} (need >= {TAX_SD_GAP}); ED {:.5}, AMSS {:.5}",
            m_grid.tax_sd_ratio, m_grid.tax_sd_ed, m_grid.tax_sd_amss
        ),
    ));
    note(format!(
        "literal parametrization: ratio {:.3}",
        m_lit.tax_sd_ratio
    ));

    // 4. Price properties.
    let (ok, detail) = price_properties();
    tally(report(4, "price properties", ok, detail));

    // 5. Threshold properties at lambda = 0.
    let mut p0 = literal();
    p0.offers.set_lambda(0.0);
    let no_offer = solved(p0);
    tally(threshold_properties(&no_offer));

    // 6. Oracle equivalence.
    tally(oracle_equivalence());

    // 7. Implementability of simulated paths.
    tally(implementability(&[&lit, &grid]));

    // 8. Martingale diagnostics.
    tally(martingales(&lit, &no_offer));

    // 9. Episode dynamics, wide-chain variant.
    let spec = EpisodeSpec::default();
    let panel = collect_episodes(
        &grid.econ,
        &grid.ed,
        &grid.amss,
        &moment_settings(),
        &spec,
        SEED,
    )
    .unwrap();
    let peak = panel
        .g
        .median
        .iter()
        .enumerate()
        .fold((0, f64::MIN), |a, (k, &v)| if v > a.1 { (k, v) } else { a })
        .0;
    let peak_offset = panel.offsets.get(peak).copied().unwrap_or(i64::MAX);
    let feasible = panel.count - panel.counterfactual_infeasible;
    tally(report(
        9,
        "episode dynamics",
        panel.count > 0 && peak_offset == PEAK_OFFSET && panel.counterfactual_exceeds >= COUNTERFACTUAL_SHARE,
        format!(
            "{} episodes; median g peaks at t={peak_offset} (need {PEAK_OFFSET}); counterfactual tax above actual in {:.1}% of {} feasible episodes ({} infeasible)",
            panel.count,
            100.0 * panel.counterfactual_exceeds,
            feasible,
            panel.counterfactual_infeasible
        ),
    ));
    if panel.count > 0 {
        let fmt = |v: &[f64]| {
            v.iter()
                .map(|x| format!("{x:.4}"))
                .collect::<Vec<_>>()
                .join(" ")
        };
        note(format!("median g,   t=-4..4: {}", fmt(&panel.g.median)));
        note(format!("median tax, t=-4..4: {}", fmt(&panel.tax.median)));
        note(format!(
            "counterfactual tax, t=0..4: {}",
            fmt(&panel.tax_counterfactual.median)
        ));
    }

    println!(
        "acceptance: {passed}/{total} criteria pass ({:.0}s)",
        start.elapsed().as_secs_f64()
    );
}

fn price_properties() -> (bool, String) {
    let single = OfferSpec::Explicit {
        lambda: SMALL_LAMBDA,
        deltas: vec![SINGLE_DELTA],
        probs: vec![1.0],
    };
    let econ = EconomyParams {
        offers: single.clone(),
        ..literal()
    }
    .build()
    .unwrap();
    let sol = solve(&econ).unwrap();
    let (n_g, n_b) = (econ.n_g(), econ.n_b());
    let beta = econ.beta();
    let mut monotone = true;
    for g in 0..n_g {
        for i in 2..n_b {
            let (a, b) = (sol.idx(g, i - 1), sol.idx(g, i));
            // Flat stretches carry round-off from the fixed point.
            monotone &= sol.price_repay[b] <= sol.price_repay[a] + ROUND_OFF
                && sol.price_autarky[b] <= sol.price_autarky[a] + ROUND_OFF;
        }
    }
    let upper = beta * SMALL_LAMBDA * SINGLE_DELTA / (1.0 - beta);
    let bounds = sol
        .price_autarky
        .iter()
        .all(|&q| (0.0..=upper).contains(&q));

    // iid chain: P0(B) = beta lambda delta A / (1 - beta + beta lambda A),
    // A the stationary probability of accepting at B.
    let mut iid = EconomyParams {
        offers: single,
        ..literal()
    };
    if let ShockSpec::Tauchen { rho, .. } = &mut iid.shocks {
        *rho = 0.0;
    }
    iid.solver.secondary_tol = 1e-14;
    let econ_iid = iid.build().unwrap();
    let s = solve(&econ_iid).unwrap();
    let mut gap: f64 = 0.0;
    let mut iid_bound = true;
    for i in 0..n_b {
        let a: f64 = (0..n_g)
            .map(|g| econ_iid.chain.stationary[g] * s.accept_at(g, 0, i) as u8 as f64)
            .sum();
        let closed =
            beta * SMALL_LAMBDA * SINGLE_DELTA * a / (1.0 - beta + beta * SMALL_LAMBDA * a);
        for g in 0..n_g {
            let q = s.price_autarky[s.idx(g, i)];
            gap = gap.max((q - closed).abs());
            iid_bound &= q <= beta * SMALL_LAMBDA / (1.0 - beta + beta * SMALL_LAMBDA);
        }
    }
    let ok = monotone && bounds && iid_bound && gap <= CLOSED_FORM_TOL;
    let detail = format!(
        "single offer {SINGLE_DELTA}, lambda {SMALL_LAMBDA}: monotone {monotone}, bounds {bounds}, iid bound {iid_bound}, closed-form gap {gap:.2e} (tol {CLOSED_FORM_TOL:.0e})"
    );
    (ok, detail)
}

fn threshold_properties(s: &Solved) -> bool {
    let (econ, sol) = (&s.econ, &s.ed);
    let th = &sol.thresholds;
    let gbar_ok = non_increasing(&th.default_g[1..]);
    let mut delta_ok = true;
    for g in 0..econ.n_g() {
        let row: Vec<f64> = (1..econ.n_b())
            .map(|i| th.accept_delta[sol.idx(g, i)])
            .collect();
        delta_ok &= non_increasing(&row);
    }
    let rec: Vec<f64> = (0..econ.n_b())
        .map(|i| sol.mean_recovery(econ, i))
        .collect();
    let rec_ok = non_increasing(&rec);
    let defaults = sol.default.iter().filter(|&&d| d).count();
    report(
        5,
        "threshold properties",
        th.violations.is_empty() && gbar_ok && delta_ok && rec_ok,
        format!(
            "lambda 0: {} violations, g-threshold non-increasing {gbar_ok}, offer threshold non-increasing {delta_ok}, recovery non-increasing {rec_ok} ({defaults} default cells)",
            th.violations.len()
        ),
    )
}

fn oracle_equivalence() -> bool {
    let toy = toy::check();
    let mut p = EconomyParams {
        allow_default: false,
        ..literal()
    };
    p.solver.value_tol = 1e-12;
    let econ = p.build().unwrap();
    let ed = solve(&econ).unwrap();
    let amss = solve_amss(&econ, DebtLimits::full(&econ)).unwrap();
    let gap = ed
        .v_repay
        .iter()
        .zip(&amss.value)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    report(
        6,
        "oracle equivalence",
        toy <= ORACLE_TOL && gap <= ORACLE_TOL,
        format!("enumeration oracle gap {toy:.2e}, no-default vs risk-free gap {gap:.2e} (tol {ORACLE_TOL:.0e})"),
    )
}

fn paired_paths(s: &Solved, n: usize) -> Vec<(SimPath, SimPath)> {
    (0..n as u64)
        .map(|r| {
            let seed = SEED ^ r;
            (
                simulate(&s.econ, &s.ed, SimSettings::default(), seed).unwrap(),
                simulate_amss(&s.econ, &s.amss, SimSettings::default(), seed).unwrap(),
            )
        })
        .collect()
}

fn implementability(models: &[&Solved]) -> bool {
    let (mut paths, mut bad, mut motion) = (0, 0, 0);
    let mut min_slack = f64::INFINITY;
    for s in models {
        for (p, rf) in paired_paths(s, MC_REPLICATIONS) {
            paths += 2;
            let r = validate_implementability(&p, &s.econ, &s.ed, PATH_TOL);
            min_slack = min_slack.min(r.min_slack());
            bad += !r.passed() as usize
                + !validate_amss_path(&rf, &s.econ, PATH_TOL).passed() as usize;
            for t in 1..p.len() {
                let expected = if p.access[t - 1] {
                    !p.default[t]
                } else {
                    p.accept[t]
                };
                motion += (p.access[t] != expected || (!p.access[t] && p.debt_next[t] != p.debt[t]))
                    as usize;
            }
        }
    }
    report(
        7,
        "implementability",
        bad == 0 && motion == 0,
        format!("{paths} paths, {bad} failing at tol {PATH_TOL:.0e}, {motion} law-of-motion breaks, min slack {min_slack:.2e}"),
    )
}

fn martingales(lit: &Solved, no_offer: &Solved) -> bool {
    let rf: Vec<SimPath> = (0..MARTINGALE_PATHS as u64)
        .map(|r| simulate_amss(&lit.econ, &lit.amss, SimSettings::default(), SEED ^ r).unwrap())
        .collect();
    let a = amss_martingale(&rf, lit.econ.n_b());
    let ed: Vec<SimPath> = (0..MARTINGALE_PATHS as u64)
        .map(|r| {
            simulate(
                &no_offer.econ,
                &no_offer.ed,
                SimSettings::default(),
                SEED ^ r,
            )
            .unwrap()
        })
        .collect();
    let e = ed_markup(&ed, &no_offer.ed, ELASTICITY_STENCIL);
    report(
        8,
        "martingale diagnostics",
        a.within(MARTINGALE_SE) && e.within(MARTINGALE_SE),
        format!(
            "risk-free mean step {:.2e} (z {:.2}, n {}); default-economy markup residual {:.2e} = {:.1}% of mean multiplier (z {:.2}, n {}); need |z| < {MARTINGALE_SE}",
            a.mean, a.z, a.observations, e.mean, 100.0 * e.mean / e.mean_multiplier, e.z, e.observations
        ),
    )
}

/// Brute-force check on two spending states and three debt levels without
/// offers: every stationary policy is evaluated by a linear solve.
mod toy {
    use super::*;

    fn labor(kappa: f64, revenue: f64) -> Option<f64> {
        let c1 = 0.15;
        let rev = |n: f64| (kappa - c1 / (1.0 - n).powi(2)) * n;
        let slope = |n: f64| kappa - c1 / (1.0 - n).powi(2) - 2.0 * c1 * n / (1.0 - n).powi(3);
        let n_sat = 1.0 - (c1 / kappa).sqrt();
        let (mut lo, mut hi) = (1e-12, n_sat);
        for _ in 0..200 {
            let m = 0.5 * (lo + hi);
            if slope(m) > 0.0 {
                lo = m
            } else {
                hi = m
            }
        }
        if revenue > rev(lo) {
            return None;
        }
        let (mut lo, mut hi) = (lo, n_sat);
        for _ in 0..200 {
            let m = 0.5 * (lo + hi);
            if rev(m) > revenue {
                lo = m
            } else {
                hi = m
            }
        }
        Some(0.5 * (lo + hi))
    }

    fn payoff(kappa: f64, revenue: f64) -> Option<f64> {
        labor(kappa, revenue).map(|n| kappa * n - 0.15 / (1.0 - n))
    }

    /// Solves 2x2 and 6x6 systems by Gaussian elimination with partial pivoting.
    fn gauss(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
        let n = b.len();
        for c in 0..n {
            let p = (c..n)
                .max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs()))
                .unwrap();
            a.swap(c, p);
            b.swap(c, p);
            for r in c + 1..n {
                let f = a[r][c] / a[c][c];
                for k in c..n {
                    a[r][k] -= f * a[c][k];
                }
                b[r] -= f * b[c];
            }
        }
        let mut x = vec![0.0; n];
        for r in (0..n).rev() {
            let s: f64 = (r + 1..n).map(|k| a[r][k] * x[k]).sum();
            x[r] = (b[r] - s) / a[r][r];
        }
        x
    }

    pub fn check() -> f64 {
        let p = EconomyParams {
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
            solver: fiscal_default::SolverSettings {
                price_tol: 1e-12,
                value_tol: 1e-12,
                secondary_tol: 1e-14,
                ..Default::default()
            },
            ..EconomyParams::default()
        };
        let econ = p.build().unwrap();
        let sol = solve(&econ).unwrap();
        let beta = econ.beta();
        let g = &econ.chain.g_values;
        let b = &econ.grid.b_values;
        let pi = |i: usize, j: usize| econ.chain.prob(i, j);
        let v0 = gauss(
            vec![
                vec![1.0 - beta * pi(0, 0), -beta * pi(0, 1)],
                vec![-beta * pi(1, 0), 1.0 - beta * pi(1, 1)],
            ],
            (0..2)
                .map(|i| payoff(0.998, g[i]).unwrap() - g[i])
                .collect(),
        );
        let flow = |c: usize, j: usize| {
            let (gi, i) = (c / 3, c % 3);
            payoff(
                1.0,
                (g[gi] + b[i] - sol.price_repay[gi * 3 + j] * b[j]).max(0.0),
            )
            .map(|w| w - g[gi])
        };
        let mut best = [f64::NEG_INFINITY; 6];
        'policies: for code in 0..4usize.pow(6) {
            let act: Vec<usize> = (0..6).map(|c| code / 4usize.pow(c as u32) % 4).collect();
            let mut a = vec![vec![0.0; 6]; 6];
            let mut r = vec![0.0; 6];
            for c in 0..6 {
                a[c][c] = 1.0;
                if act[c] == 3 {
                    r[c] = v0[c / 3];
                    continue;
                }
                let Some(f) = flow(c, act[c]) else {
                    continue 'policies;
                };
                r[c] = f;
                for gp in 0..2 {
                    a[c][gp * 3 + act[c]] -= beta * pi(c / 3, gp);
                }
            }
            for (bst, w) in best.iter_mut().zip(gauss(a, r)) {
                *bst = bst.max(w);
            }
        }
        let mut gap: f64 = 0.0;
        for c in 0..6 {
            let v1 = (0..3)
                .filter_map(|j| {
                    flow(c, j).map(|f| {
                        f + beta
                            * (0..2)
                                .map(|gp| pi(c / 3, gp) * best[gp * 3 + j])
                                .sum::<f64>()
                    })
                })
                .fold(f64::NEG_INFINITY, f64::max);
            if v1.is_finite() {
                gap = gap.max((v1 - sol.v_repay[c]).abs());
            } else if sol.v_repay[c] > fiscal_default::solver::INFEASIBLE {
                gap = f64::INFINITY;
            }
            gap = gap.max((v0[c / 3] - sol.v_autarky[c]).abs());
        }
        gap
    }
}
