//! Monte Carlo moments: default frequency, tax volatility against spreads,
//! conditional histograms and renegotiation statistics.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{check_compatible, simulate_amss_with, simulate_with, SimPath, SimSettings};
use crate::error::Result;
use crate::params::{Economy, EconomyParams};
use crate::solver::{solve, AmssSolution, EdSolution};
use crate::stochastic::SimRng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MomentSettings {
    pub replications: usize,
    pub sim: SimSettings,
    /// Access periods with a spread above this are left out of the histograms.
    pub spread_cutoff: f64,
    pub bins: usize,
}

impl Default for MomentSettings {
    fn default() -> Self {
        Self {
            replications: 500,
            sim: SimSettings::default(),
            spread_cutoff: 0.5,
            bins: 60,
        }
    }
}

/// Per-replication statistics over the periods after burn-in.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReplicationStats {
    pub replication: usize,
    pub defaults: usize,
    pub periods: usize,
    pub access_periods: usize,
    /// Tax s.d. over access periods, economy with default.
    pub tax_sd: f64,
    pub mean_spread: f64,
    pub tax_sd_amss: f64,
    /// Same statistics over access periods with debt/output below (low) and
    /// at or above (high) the pooled median.
    pub tax_sd_low: f64,
    pub mean_spread_low: f64,
    pub tax_sd_high: f64,
    pub mean_spread_high: f64,
}

/// Binned counts of one variable conditional on one spending state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    /// `"ed"` or `"amss"`.
    pub model: String,
    /// `"debt_output"` or `"tax"`.
    pub variable: String,
    pub g_index: usize,
    pub g: f64,
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
    /// Counts divided by the number of observations.
    pub mass: Vec<f64>,
    pub observations: usize,
    /// Gaussian-kernel bandwidth by Silverman's rule, for smoothing.
    pub bandwidth: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RenegotiationRow {
    pub lambda: f64,
    pub avg_accepted_offer: f64,
    pub duration_high: f64,
    pub duration_low: f64,
    pub accepted: usize,
    /// Completed autarky spells.
    pub spells: usize,
    /// Median debt/output at default separating high from low.
    pub median_defaulted_debt: f64,
    pub default_frequency: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentReport {
    pub replications: usize,
    /// Kept periods per replication.
    pub periods: usize,
    /// Default events per simulated period.
    pub default_frequency: f64,
    /// Standard error of the default frequency across replications.
    pub default_frequency_se: f64,
    /// Default events per period with market access at its start.
    pub default_frequency_access: f64,
    pub access_share: f64,
    pub tax_sd_ed: f64,
    pub tax_sd_amss: f64,
    pub tax_sd_ratio: f64,
    pub mean_spread: f64,
    pub median_debt_output: f64,
    pub mean_debt_output_ed: f64,
    pub mean_debt_output_amss: f64,
    pub per_replication: Vec<ReplicationStats>,
    pub histograms: Vec<Histogram>,
    pub renegotiation: RenegotiationRow,
}

/// Access-period observations of one replication.
struct Sample {
    stats: ReplicationStats,
    /// (g index, debt/output, tax, spread) per access period.
    ed: Vec<(usize, f64, f64, f64)>,
    /// (g index, debt/output, tax) per period.
    amss: Vec<(usize, f64, f64)>,
    renegotiation: Renegotiation,
}

#[derive(Default)]
struct Renegotiation {
    accepted: Vec<f64>,
    /// (debt/output at default, duration) for completed spells.
    spells: Vec<(f64, usize)>,
    defaults: usize,
    periods: usize,
}

/// Debt/output ratio: end-of-period debt over contemporaneous output.
fn debt_output(path: &SimPath, t: usize) -> f64 {
    path.debt_next[t] / path.output[t]
}

fn renegotiation_of(path: &SimPath) -> Renegotiation {
    let mut r = Renegotiation::default();
    let kept = path.kept();
    r.periods = kept.len();
    for t in kept.clone() {
        if path.accept[t] {
            r.accepted.push(path.delta[t]);
        }
        if path.default[t] {
            r.defaults += 1;
            if let Some(end) = (t + 1..path.len()).find(|&s| path.access[s]) {
                r.spells.push((path.debt[t] / path.output[t], end - t));
            }
        }
    }
    r
}

fn mean(x: &[f64]) -> f64 {
    if x.is_empty() {
        return f64::NAN;
    }
    x.iter().sum::<f64>() / x.len() as f64
}

/// Sample standard deviation (n - 1 denominator); NaN below two observations.
pub(crate) fn sd(x: &[f64]) -> f64 {
    if x.len() < 2 {
        return f64::NAN;
    }
    let m = mean(x);
    (x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (x.len() - 1) as f64).sqrt()
}

/// Quantile of sorted data with linear interpolation between order statistics.
pub(crate) fn quantile(sorted: &[f64], p: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

fn sorted(mut x: Vec<f64>) -> Vec<f64> {
    x.sort_by(f64::total_cmp);
    x
}

fn nanmean(x: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = x.filter(|v| v.is_finite()).collect();
    mean(&v)
}

fn silverman(x: &[f64]) -> f64 {
    let s = sd(x);
    let v = sorted(x.to_vec());
    let iqr = quantile(&v, 0.75) - quantile(&v, 0.25);
    let spread = if iqr > 0.0 { s.min(iqr / 1.34) } else { s };
    0.9 * spread * (x.len() as f64).powf(-0.2)
}

fn histogram(
    model: &str,
    variable: &str,
    g_index: usize,
    g: f64,
    data: &[f64],
    edges: &[f64],
) -> Histogram {
    let bins = edges.len() - 1;
    let (lo, hi) = (edges[0], edges[bins]);
    let mut counts = vec![0u64; bins];
    for &x in data {
        let k = if hi > lo {
            (((x - lo) / (hi - lo)) * bins as f64).floor() as usize
        } else {
            0
        };
        counts[k.min(bins - 1)] += 1;
    }
    let n = data.len();
    Histogram {
        model: model.into(),
        variable: variable.into(),
        g_index,
        g,
        edges: edges.to_vec(),
        mass: counts
            .iter()
            .map(|&c| if n > 0 { c as f64 / n as f64 } else { 0.0 })
            .collect(),
        counts,
        observations: n,
        bandwidth: if n >= 2 { silverman(data) } else { f64::NAN },
    }
}

fn edges(max: f64, bins: usize) -> Vec<f64> {
    let top = if max > 0.0 { max * (1.0 + 1e-9) } else { 1.0 };
    (0..=bins).map(|k| top * k as f64 / bins as f64).collect()
}

fn sample(
    econ: &Economy,
    ed: &EdSolution,
    amss: &AmssSolution,
    settings: &MomentSettings,
    seed: u64,
    r: usize,
) -> Result<Sample> {
    let path = simulate_with(
        econ,
        ed,
        settings.sim,
        &mut SimRng::for_replication(seed, r as u64),
    );
    let rf = simulate_amss_with(
        econ,
        amss,
        settings.sim,
        &mut SimRng::for_replication(seed, r as u64),
    )?;
    let kept = path.kept();
    let mut obs = Vec::new();
    let mut defaults = 0;
    let mut access_start = 0;
    let mut access_prev = kept.start == 0 || path.access[kept.start - 1];
    for t in kept.clone() {
        if access_prev {
            access_start += 1;
        }
        defaults += path.default[t] as usize;
        if path.access[t] {
            obs.push((
                path.g_index[t],
                debt_output(&path, t),
                path.tax[t],
                path.spread[t],
            ));
        }
        access_prev = path.access[t];
    }
    let taxes: Vec<f64> = obs.iter().map(|o| o.2).collect();
    let spreads: Vec<f64> = obs.iter().map(|o| o.3).collect();
    let amss_obs: Vec<(usize, f64, f64)> = rf
        .kept()
        .map(|t| (rf.g_index[t], debt_output(&rf, t), rf.tax[t]))
        .collect();
    let amss_tax: Vec<f64> = amss_obs.iter().map(|o| o.2).collect();
    Ok(Sample {
        stats: ReplicationStats {
            replication: r,
            defaults,
            periods: kept.len(),
            access_periods: access_start,
            tax_sd: sd(&taxes),
            mean_spread: mean(&spreads),
            tax_sd_amss: sd(&amss_tax),
            tax_sd_low: f64::NAN,
            mean_spread_low: f64::NAN,
            tax_sd_high: f64::NAN,
            mean_spread_high: f64::NAN,
        },
        ed: obs,
        amss: amss_obs,
        renegotiation: renegotiation_of(&path),
    })
}

/// Runs `settings.replications` paired simulations of both economies. Each
/// replication's spending path is shared by the two models; results do not
/// depend on the number of threads.
pub fn mc_moments(
    econ: &Economy,
    ed: &EdSolution,
    amss: &AmssSolution,
    settings: &MomentSettings,
    seed: u64,
) -> Result<MomentReport> {
    settings.sim.validate()?;
    check_compatible(econ, &ed.g_values, &ed.b_values)?;
    check_compatible(econ, &amss.g_values, &amss.b_values)?;
    if settings.bins == 0 || settings.replications == 0 {
        return Err(crate::error::invalid(
            "bins",
            "need at least one bin and one replication",
        ));
    }
    let mut samples: Vec<Sample> = (0..settings.replications)
        .into_par_iter()
        .map(|r| sample(econ, ed, amss, settings, seed, r))
        .collect::<Result<_>>()?;

    let pooled = sorted(
        samples
            .iter()
            .flat_map(|s| s.ed.iter().map(|o| o.1))
            .collect(),
    );
    let median = quantile(&pooled, 0.5);
    for s in &mut samples {
        let (mut lo_t, mut lo_s, mut hi_t, mut hi_s) = (vec![], vec![], vec![], vec![]);
        for &(_, ratio, tax, spread) in &s.ed {
            if ratio < median {
                lo_t.push(tax);
                lo_s.push(spread);
            } else {
                hi_t.push(tax);
                hi_s.push(spread);
            }
        }
        s.stats.tax_sd_low = sd(&lo_t);
        s.stats.mean_spread_low = mean(&lo_s);
        s.stats.tax_sd_high = sd(&hi_t);
        s.stats.mean_spread_high = mean(&hi_s);
    }

    let per_replication: Vec<ReplicationStats> = samples.iter().map(|s| s.stats).collect();
    let total_defaults: usize = per_replication.iter().map(|s| s.defaults).sum();
    let total_periods: usize = per_replication.iter().map(|s| s.periods).sum();
    let total_access: usize = per_replication.iter().map(|s| s.access_periods).sum();
    let freq: Vec<f64> = per_replication
        .iter()
        .map(|s| s.defaults as f64 / s.periods as f64)
        .collect();
    let tax_sd_ed = nanmean(per_replication.iter().map(|s| s.tax_sd));
    let tax_sd_amss = nanmean(per_replication.iter().map(|s| s.tax_sd_amss));

    let histograms = histograms(econ, &samples, settings);
    let renegotiation =
        merge_renegotiation(econ.offers.lambda, samples.iter().map(|s| &s.renegotiation));
    let access_obs: usize = samples.iter().map(|s| s.ed.len()).sum();

    Ok(MomentReport {
        replications: settings.replications,
        periods: settings.sim.horizon - settings.sim.burn_in,
        default_frequency: total_defaults as f64 / total_periods as f64,
        default_frequency_se: sd(&freq) / (freq.len() as f64).sqrt(),
        default_frequency_access: total_defaults as f64 / total_access.max(1) as f64,
        access_share: access_obs as f64 / total_periods as f64,
        tax_sd_ed,
        tax_sd_amss,
        tax_sd_ratio: tax_sd_ed / tax_sd_amss,
        mean_spread: nanmean(per_replication.iter().map(|s| s.mean_spread)),
        median_debt_output: median,
        mean_debt_output_ed: mean(&pooled),
        mean_debt_output_amss: mean(
            &samples
                .iter()
                .flat_map(|s| s.amss.iter().map(|o| o.1))
                .collect::<Vec<_>>(),
        ),
        per_replication,
        histograms,
        renegotiation,
    })
}

fn histograms(econ: &Economy, samples: &[Sample], settings: &MomentSettings) -> Vec<Histogram> {
    let cutoff = settings.spread_cutoff;
    let ed_kept = |o: &&(usize, f64, f64, f64)| o.3 <= cutoff;
    let max_ratio = samples
        .iter()
        .flat_map(|s| {
            s.ed.iter()
                .filter(ed_kept)
                .map(|o| o.1)
                .chain(s.amss.iter().map(|o| o.1))
        })
        .fold(0.0, f64::max);
    let max_tax = samples
        .iter()
        .flat_map(|s| {
            s.ed.iter()
                .filter(ed_kept)
                .map(|o| o.2)
                .chain(s.amss.iter().map(|o| o.2))
        })
        .fold(0.0, f64::max);
    let ratio_edges = edges(max_ratio, settings.bins);
    let tax_edges = edges(max_tax, settings.bins);
    let mut out = Vec::new();
    for (g, &gv) in econ.chain.g_values.iter().enumerate() {
        let ed: Vec<&(usize, f64, f64, f64)> = samples
            .iter()
            .flat_map(|s| s.ed.iter())
            .filter(|o| o.0 == g)
            .filter(ed_kept)
            .collect();
        let rf: Vec<&(usize, f64, f64)> = samples
            .iter()
            .flat_map(|s| s.amss.iter())
            .filter(|o| o.0 == g)
            .collect();
        let ed_ratio: Vec<f64> = ed.iter().map(|o| o.1).collect();
        let ed_tax: Vec<f64> = ed.iter().map(|o| o.2).collect();
        let rf_ratio: Vec<f64> = rf.iter().map(|o| o.1).collect();
        let rf_tax: Vec<f64> = rf.iter().map(|o| o.2).collect();
        out.push(histogram(
            "ed",
            "debt_output",
            g,
            gv,
            &ed_ratio,
            &ratio_edges,
        ));
        out.push(histogram(
            "amss",
            "debt_output",
            g,
            gv,
            &rf_ratio,
            &ratio_edges,
        ));
        out.push(histogram("ed", "tax", g, gv, &ed_tax, &tax_edges));
        out.push(histogram("amss", "tax", g, gv, &rf_tax, &tax_edges));
    }
    out
}

fn merge_renegotiation<'a>(
    lambda: f64,
    parts: impl Iterator<Item = &'a Renegotiation>,
) -> RenegotiationRow {
    let mut accepted = Vec::new();
    let mut spells = Vec::new();
    let (mut defaults, mut periods) = (0, 0);
    for p in parts {
        accepted.extend_from_slice(&p.accepted);
        spells.extend_from_slice(&p.spells);
        defaults += p.defaults;
        periods += p.periods;
    }
    let median = quantile(&sorted(spells.iter().map(|s| s.0).collect()), 0.5);
    let high: Vec<f64> = spells
        .iter()
        .filter(|s| s.0 > median)
        .map(|s| s.1 as f64)
        .collect();
    let low: Vec<f64> = spells
        .iter()
        .filter(|s| s.0 <= median)
        .map(|s| s.1 as f64)
        .collect();
    RenegotiationRow {
        lambda,
        avg_accepted_offer: mean(&accepted),
        duration_high: mean(&high),
        duration_low: mean(&low),
        accepted: accepted.len(),
        spells: spells.len(),
        median_defaulted_debt: median,
        default_frequency: defaults as f64 / periods.max(1) as f64,
    }
}

/// Renegotiation statistics of the economy with default alone.
pub fn renegotiation_stats(
    econ: &Economy,
    sol: &EdSolution,
    replications: usize,
    settings: SimSettings,
    seed: u64,
) -> Result<RenegotiationRow> {
    settings.validate()?;
    check_compatible(econ, &sol.g_values, &sol.b_values)?;
    let parts: Vec<Renegotiation> = (0..replications)
        .into_par_iter()
        .map(|r| {
            renegotiation_of(&simulate_with(
                econ,
                sol,
                settings,
                &mut SimRng::for_replication(seed, r as u64),
            ))
        })
        .collect();
    Ok(merge_renegotiation(econ.offers.lambda, parts.iter()))
}

/// Re-solves the economy for each offer probability and tabulates the
/// renegotiation statistics.
pub fn renegotiation_table(
    params: &EconomyParams,
    lambdas: &[f64],
    replications: usize,
    settings: SimSettings,
    seed: u64,
) -> Result<Vec<RenegotiationRow>> {
    lambdas
        .iter()
        .map(|&lambda| {
            let mut p = params.clone();
            p.offers.set_lambda(lambda);
            let econ = p.build()?;
            let sol = solve(&econ)?;
            renegotiation_stats(&econ, &sol, replications, settings, seed)
        })
        .collect()
}
