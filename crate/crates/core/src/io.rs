//! CSV emission and the binary solution bundle.
//!
//! Every CSV starts with one comment line, `# config_sha256=<hex> seed=<n>`,
//! followed by a header row. Floats are written with 17 significant digits so
//! that they read back bit-for-bit.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sim::{EpisodePanel, IrfPanel, MomentReport, RenegotiationRow, SimPath};
use crate::solver::{AmssSolution, EdSolution};
use crate::stochastic::OfferEvent;

/// Provenance written at the top of every CSV.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Provenance {
    pub config_sha256: String,
    pub seed: Option<u64>,
}

impl Provenance {
    fn line(&self) -> String {
        match self.seed {
            Some(s) => format!("# config_sha256={} seed={}\n", self.config_sha256, s),
            None => format!("# config_sha256={} seed=none\n", self.config_sha256),
        }
    }
}

/// Float with 17 significant digits; `inf`, `-inf` and `nan` otherwise.
pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        }
    } else {
        format!("{x:.16e}")
    }
}

struct Table<W: Write> {
    inner: csv::Writer<W>,
}

impl<W: Write> Table<W> {
    fn new(mut w: W, prov: &Provenance, header: &[&str]) -> Result<Self> {
        w.write_all(prov.line().as_bytes())?;
        let mut inner = csv::Writer::from_writer(w);
        inner.write_record(header)?;
        Ok(Self { inner })
    }

    fn row(&mut self, fields: Vec<String>) -> Result<()> {
        self.inner.write_record(&fields)?;
        Ok(())
    }

    fn finish(mut self) -> Result<()> {
        self.inner.flush()?;
        Ok(())
    }
}

fn b(x: bool) -> String {
    (x as u8).to_string()
}

fn opt(x: Option<usize>) -> String {
    x.map_or_else(String::new, |v| v.to_string())
}

/// Value, price and policy tables of the economy with default, one row per (g, B).
pub fn write_ed_tables<W: Write>(sol: &EdSolution, prov: &Provenance, w: W) -> Result<()> {
    let mut t = Table::new(
        w,
        prov,
        &[
            "g_index",
            "g",
            "b_index",
            "b",
            "v_repay",
            "v_autarky",
            "price_repay",
            "price_autarky",
            "policy_debt_index",
            "policy_debt",
            "policy_revenue",
            "default",
            "default_threshold_g",
        ],
    )?;
    for g in 0..sol.n_g() {
        for i in 0..sol.n_b() {
            let c = sol.idx(g, i);
            let pd = sol.policy_debt[c];
            t.row(vec![
                g.to_string(),
                fmt_f64(sol.g_values[g]),
                i.to_string(),
                fmt_f64(sol.b_values[i]),
                fmt_f64(sol.v_repay[c]),
                fmt_f64(sol.v_autarky[c]),
                fmt_f64(sol.price_repay[c]),
                fmt_f64(sol.price_autarky[c]),
                opt(pd),
                pd.map_or_else(String::new, |j| fmt_f64(sol.b_values[j])),
                fmt_f64(sol.policy_revenue[c]),
                b(sol.default[c]),
                fmt_f64(sol.thresholds.default_g[i]),
            ])?;
        }
    }
    t.finish()
}

/// Acceptance decisions, one row per (g, offer, B), with the acceptance threshold.
pub fn write_ed_acceptance<W: Write>(sol: &EdSolution, prov: &Provenance, w: W) -> Result<()> {
    let mut t = Table::new(
        w,
        prov,
        &[
            "g_index",
            "g",
            "offer_index",
            "delta",
            "b_index",
            "b",
            "accept",
            "accept_threshold_delta",
        ],
    )?;
    for g in 0..sol.n_g() {
        for k in 0..sol.n_offers() {
            for i in 0..sol.n_b() {
                t.row(vec![
                    g.to_string(),
                    fmt_f64(sol.g_values[g]),
                    k.to_string(),
                    fmt_f64(sol.deltas[k]),
                    i.to_string(),
                    fmt_f64(sol.b_values[i]),
                    b(sol.accept_at(g, k, i)),
                    fmt_f64(sol.thresholds.accept_delta[sol.idx(g, i)]),
                ])?;
            }
        }
    }
    t.finish()
}

/// Outer-loop price residuals.
pub fn write_convergence<W: Write>(sol: &EdSolution, prov: &Provenance, w: W) -> Result<()> {
    let mut t = Table::new(w, prov, &["outer_iteration", "price_residual"])?;
    for (k, r) in sol.convergence.price_residuals.iter().enumerate() {
        t.row(vec![(k + 1).to_string(), fmt_f64(*r)])?;
    }
    t.finish()
}

pub fn write_amss_tables<W: Write>(sol: &AmssSolution, prov: &Provenance, w: W) -> Result<()> {
    let mut t = Table::new(
        w,
        prov,
        &[
            "g_index",
            "g",
            "b_index",
            "b",
            "value",
            "policy_debt_index",
            "policy_debt",
            "policy_revenue",
        ],
    )?;
    for g in 0..sol.g_values.len() {
        for i in 0..sol.n_b() {
            let c = sol.idx(g, i);
            let pd = sol.policy_debt[c];
            t.row(vec![
                g.to_string(),
                fmt_f64(sol.g_values[g]),
                i.to_string(),
                fmt_f64(sol.b_values[i]),
                fmt_f64(sol.value[c]),
                opt(pd),
                pd.map_or_else(String::new, |j| fmt_f64(sol.b_values[j])),
                fmt_f64(sol.policy_revenue[c]),
            ])?;
        }
    }
    t.finish()
}

fn event(e: OfferEvent) -> String {
    match e {
        OfferEvent::Due => "due".into(),
        OfferEvent::NoOffer => "no_offer".into(),
        OfferEvent::Offer(k) => format!("offer_{k}"),
    }
}

/// One row per period; `kept` is 0 during burn-in.
pub fn write_path<W: Write>(path: &SimPath, prov: &Provenance, w: W) -> Result<()> {
    let mut t = Table::new(
        w,
        prov,
        &[
            "t",
            "kept",
            "g_index",
            "g",
            "access",
            "event",
            "debt",
            "debt_next",
            "delta",
            "obligation",
            "default",
            "accept",
            "revenue",
            "tax",
            "labor",
            "output",
            "price",
            "spread",
            "transfer",
            "multiplier",
            "snap_error",
        ],
    )?;
    for s in 0..path.len() {
        t.row(vec![
            s.to_string(),
            b(s >= path.burn_in),
            path.g_index[s].to_string(),
            fmt_f64(path.g[s]),
            b(path.access[s]),
            event(path.event[s]),
            fmt_f64(path.debt[s]),
            fmt_f64(path.debt_next[s]),
            fmt_f64(path.delta[s]),
            fmt_f64(path.obligation[s]),
            b(path.default[s]),
            b(path.accept[s]),
            fmt_f64(path.revenue[s]),
            fmt_f64(path.tax[s]),
            fmt_f64(path.labor[s]),
            fmt_f64(path.output[s]),
            fmt_f64(path.price[s]),
            fmt_f64(path.spread[s]),
            fmt_f64(path.transfer[s]),
            fmt_f64(path.multiplier[s]),
            fmt_f64(path.snap_error[s]),
        ])?;
    }
    t.finish()
}

/// Scalar moments as `statistic,value` rows.
pub fn write_moment_summary<W: Write>(m: &MomentReport, prov: &Provenance, w: W) -> Result<()> {
    let mut t = Table::new(w, prov, &["statistic", "value"])?;
    let r = &m.renegotiation;
    let rows: [(&str, f64); 19] = [
        ("replications", m.replications as f64),
        ("periods", m.periods as f64),
        ("default_frequency", m.default_frequency),
        ("default_frequency_se", m.default_frequency_se),
        ("default_frequency_access", m.default_frequency_access),
        ("access_share", m.access_share),
        ("tax_sd_ed", m.tax_sd_ed),
        ("tax_sd_amss", m.tax_sd_amss),
        ("tax_sd_ratio", m.tax_sd_ratio),
        ("mean_spread", m.mean_spread),
        ("median_debt_output", m.median_debt_output),
        ("mean_debt_output_ed", m.mean_debt_output_ed),
        ("mean_debt_output_amss", m.mean_debt_output_amss),
        ("avg_accepted_offer", r.avg_accepted_offer),
        ("duration_high", r.duration_high),
        ("duration_low", r.duration_low),
        ("accepted_offers", r.accepted as f64),
        ("autarky_spells", r.spells as f64),
        ("median_defaulted_debt", r.median_defaulted_debt),
    ];
    for (k, v) in rows {
        t.row(vec![k.into(), fmt_f64(v)])?;
    }
    t.finish()
}

/// Per-replication tax volatility and spreads (the scatter data).
pub fn write_replications<W: Write>(m: &MomentReport, prov: &Provenance, w: W) -> Result<()> {
    let mut t = Table::new(
        w,
        prov,
        &[
            "replication",
            "defaults",
            "periods",
            "access_periods",
            "tax_sd",
            "mean_spread",
            "tax_sd_amss",
            "tax_sd_low",
            "mean_spread_low",
            "tax_sd_high",
            "mean_spread_high",
        ],
    )?;
    for r in &m.per_replication {
        t.row(vec![
            r.replication.to_string(),
            r.defaults.to_string(),
            r.periods.to_string(),
            r.access_periods.to_string(),
            fmt_f64(r.tax_sd),
            fmt_f64(r.mean_spread),
            fmt_f64(r.tax_sd_amss),
            fmt_f64(r.tax_sd_low),
            fmt_f64(r.mean_spread_low),
            fmt_f64(r.tax_sd_high),
            fmt_f64(r.mean_spread_high),
        ])?;
    }
    t.finish()
}

/// Conditional histograms in long format, one row per bin.
pub fn write_histograms<W: Write>(m: &MomentReport, prov: &Provenance, w: W) -> Result<()> {
    let mut t = Table::new(
        w,
        prov,
        &[
            "model",
            "variable",
            "g_index",
            "g",
            "bin",
            "lo",
            "hi",
            "count",
            "mass",
            "observations",
            "bandwidth",
        ],
    )?;
    for h in &m.histograms {
        for k in 0..h.counts.len() {
            t.row(vec![
                h.model.clone(),
                h.variable.clone(),
                h.g_index.to_string(),
                fmt_f64(h.g),
                k.to_string(),
                fmt_f64(h.edges[k]),
                fmt_f64(h.edges[k + 1]),
                h.counts[k].to_string(),
                fmt_f64(h.mass[k]),
                h.observations.to_string(),
                fmt_f64(h.bandwidth),
            ])?;
        }
    }
    t.finish()
}

pub fn write_renegotiation<W: Write>(
    rows: &[RenegotiationRow],
    prov: &Provenance,
    w: W,
) -> Result<()> {
    let mut t = Table::new(
        w,
        prov,
        &[
            "lambda",
            "avg_accepted_offer",
            "duration_high",
            "duration_low",
            "accepted_offers",
            "autarky_spells",
            "median_defaulted_debt",
            "default_frequency",
        ],
    )?;
    for r in rows {
        t.row(vec![
            fmt_f64(r.lambda),
            fmt_f64(r.avg_accepted_offer),
            fmt_f64(r.duration_high),
            fmt_f64(r.duration_low),
            r.accepted.to_string(),
            r.spells.to_string(),
            fmt_f64(r.median_defaulted_debt),
            fmt_f64(r.default_frequency),
        ])?;
    }
    t.finish()
}

/// Impulse responses in long format: one row per (model, t).
pub fn write_irf<W: Write>(irf: &IrfPanel, prov: &Provenance, w: W) -> Result<()> {
    let mut t = Table::new(
        w,
        prov,
        &[
            "model",
            "t",
            "g",
            "access",
            "debt",
            "debt_next",
            "surplus",
            "tax",
            "multiplier",
        ],
    )?;
    for (name, s) in [("ed", &irf.ed), ("amss", &irf.amss)] {
        for k in 0..irf.g.len() {
            t.row(vec![
                name.into(),
                k.to_string(),
                fmt_f64(irf.g[k]),
                b(s.access[k]),
                fmt_f64(s.debt[k]),
                fmt_f64(s.debt_next[k]),
                fmt_f64(s.surplus[k]),
                fmt_f64(s.tax[k]),
                fmt_f64(s.multiplier[k]),
            ])?;
        }
    }
    t.finish()
}

/// Quantile bands by date relative to default: one row per (series, offset).
pub fn write_episode_bands<W: Write>(p: &EpisodePanel, prov: &Provenance, w: W) -> Result<()> {
    let mut t = Table::new(
        w,
        prov,
        &["series", "offset", "q25", "median", "q75", "episodes"],
    )?;
    let feasible = p.count - p.counterfactual_infeasible;
    let series = [
        ("g", &p.g, p.count),
        ("tax_ed", &p.tax, p.count),
        ("tax_amss", &p.tax_amss, p.count),
        ("tax_counterfactual", &p.tax_counterfactual, feasible),
    ];
    for (name, band, n) in series {
        for (k, &off) in p.offsets.iter().enumerate().take(band.median.len()) {
            // Counterfactual dates start at the default date.
            let off = if name == "tax_counterfactual" {
                k as i64
            } else {
                off
            };
            t.row(vec![
                name.into(),
                off.to_string(),
                fmt_f64(band.q25[k]),
                fmt_f64(band.median[k]),
                fmt_f64(band.q75[k]),
                n.to_string(),
            ])?;
        }
    }
    t.finish()
}

/// Individual episodes: one row per (episode, offset).
pub fn write_episode_windows<W: Write>(p: &EpisodePanel, prov: &Provenance, w: W) -> Result<()> {
    let mut t = Table::new(
        w,
        prov,
        &[
            "episode",
            "replication",
            "date",
            "offset",
            "g",
            "debt",
            "tax_ed",
            "tax_amss",
            "tax_counterfactual",
            "counterfactual_feasible",
        ],
    )?;
    for (e, win) in p.windows.iter().enumerate() {
        for (k, &off) in p.offsets.iter().enumerate() {
            let cf = if off >= 0 {
                win.counterfactual
                    .tax
                    .get(off as usize)
                    .copied()
                    .unwrap_or(f64::NAN)
            } else {
                f64::NAN
            };
            t.row(vec![
                e.to_string(),
                win.replication.to_string(),
                win.date.to_string(),
                off.to_string(),
                fmt_f64(win.g[k]),
                fmt_f64(win.debt[k]),
                fmt_f64(win.tax[k]),
                fmt_f64(win.tax_amss[k]),
                fmt_f64(cf),
                b(win.counterfactual.feasible),
            ])?;
        }
    }
    t.finish()
}

const MAGIC: &[u8; 8] = b"FDSOLBIN";
/// Bumped whenever the serialized layout changes.
pub const BUNDLE_VERSION: u32 = 1;

/// A stored solution of either economy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Bundle {
    Ed(EdSolution),
    Amss(AmssSolution),
}

/// Writes `MAGIC`, the little-endian format version and a MessagePack payload.
pub fn write_bundle<W: Write>(bundle: &Bundle, mut w: W) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&BUNDLE_VERSION.to_le_bytes())?;
    rmp_serde::encode::write_named(&mut w, bundle).map_err(|e| Error::Bundle(e.to_string()))?;
    w.flush()?;
    Ok(())
}

pub fn read_bundle<R: Read>(mut r: R) -> Result<Bundle> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Bundle("not a solution bundle".into()));
    }
    let mut version = [0u8; 4];
    r.read_exact(&mut version)?;
    let version = u32::from_le_bytes(version);
    if version != BUNDLE_VERSION {
        return Err(Error::Bundle(format!(
            "format version {version}, this build reads {BUNDLE_VERSION}"
        )));
    }
    rmp_serde::decode::from_read(r).map_err(|e| Error::Bundle(e.to_string()))
}
