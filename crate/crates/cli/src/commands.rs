//! One function per subcommand. Each writes its files into the output
//! directory and returns a JSON summary for stdout.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use fiscal_default::io::{self, Bundle, Provenance};
use fiscal_default::sim::{self, SimPath};
use fiscal_default::solver::{self, is_infeasible};
use fiscal_default::{AmssSolution, Economy, EdSolution};
use serde_json::{json, Value};

use crate::config::RunConfig;
use crate::error::CliError;

/// Version of the JSON summaries and the CSV layouts.
pub const FORMAT_VERSION: u32 = 1;

pub struct Context {
    pub cfg: RunConfig,
    pub econ: Economy,
    pub out: PathBuf,
    hash: String,
    started: Instant,
}

impl Context {
    pub fn new(cfg: RunConfig, econ: Economy, out: PathBuf) -> Result<Self, CliError> {
        std::fs::create_dir_all(&out)?;
        let hash = cfg.sha256();
        Ok(Self {
            cfg,
            econ,
            out,
            hash,
            started: Instant::now(),
        })
    }

    fn provenance(&self, seeded: bool) -> Provenance {
        Provenance {
            config_sha256: self.hash.clone(),
            seed: seeded.then_some(self.cfg.seed),
        }
    }

    fn create(&self, name: &str) -> Result<BufWriter<File>, CliError> {
        Ok(BufWriter::new(File::create(self.out.join(name))?))
    }

    /// Writes the resolved configuration and the JSON summary, and builds the
    /// stdout report.
    fn finish(
        &self,
        command: &str,
        seeded: bool,
        files: &[&str],
        mut summary: Value,
    ) -> Result<Value, CliError> {
        let cfg_name = "run_config.toml";
        std::fs::write(self.out.join(cfg_name), self.cfg.to_toml())?;
        let summary_name = format!("{}.json", command.replace('-', "_"));
        let header = json!({
            "format_version": FORMAT_VERSION,
            "command": command,
            "config_sha256": self.hash,
            "seed": if seeded { json!(self.cfg.seed) } else { Value::Null },
        });
        if let (Value::Object(s), Value::Object(h)) = (&mut summary, header) {
            for (k, v) in h.into_iter().rev() {
                s.insert(k, v);
            }
        }
        let mut w = self.create(&summary_name)?;
        serde_json::to_writer_pretty(&mut w, &summary).map_err(|e| CliError::Io(e.to_string()))?;
        w.write_all(b"\n")?;
        w.flush()?;
        let mut all: Vec<String> = files.iter().map(|s| s.to_string()).collect();
        all.push(summary_name);
        all.push(cfg_name.into());
        Ok(json!({
            "command": command,
            "status": "ok",
            "out_dir": self.out,
            "files": all,
            "config_sha256": self.hash,
            "elapsed_seconds": self.started.elapsed().as_secs_f64(),
        }))
    }
}

fn read(path: &Path) -> Result<Bundle, CliError> {
    let f = File::open(path)
        .map_err(|e| CliError::Io(format!("cannot open {}: {e}", path.display())))?;
    Ok(io::read_bundle(BufReader::new(f))?)
}

fn mismatch(path: &Path) -> CliError {
    CliError::Model(fiscal_default::Error::Incompatible(format!(
        "{} was computed for a different economy than the configuration describes",
        path.display()
    )))
}

fn ed_solution(ctx: &Context, stored: Option<&Path>) -> Result<EdSolution, CliError> {
    match stored {
        None => Ok(fiscal_default::solve(&ctx.econ)?),
        Some(p) => match read(p)? {
            Bundle::Ed(s) if s.params == ctx.cfg.economy => Ok(s),
            Bundle::Ed(_) => Err(mismatch(p)),
            Bundle::Amss(_) => Err(CliError::Io(format!(
                "{} holds a risk-free solution",
                p.display()
            ))),
        },
    }
}

fn amss_solution(ctx: &Context, stored: Option<&Path>) -> Result<AmssSolution, CliError> {
    let limits = ctx.cfg.amss_limits(&ctx.econ);
    match stored {
        None => Ok(fiscal_default::solve_amss(&ctx.econ, limits)?),
        Some(p) => match read(p)? {
            Bundle::Amss(s) if s.params == ctx.cfg.economy && s.limits == limits => Ok(s),
            Bundle::Amss(_) => Err(mismatch(p)),
            Bundle::Ed(_) => Err(CliError::Io(format!(
                "{} holds a solution with default",
                p.display()
            ))),
        },
    }
}

fn write_bundle(ctx: &Context, name: &str, b: &Bundle) -> Result<(), CliError> {
    let mut w = ctx.create(name)?;
    io::write_bundle(b, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn solve(ctx: &Context) -> Result<Value, CliError> {
    let sol = fiscal_default::solve(&ctx.econ)?;
    let prov = ctx.provenance(false);
    io::write_ed_tables(&sol, &prov, ctx.create("ed_tables.csv")?)?;
    io::write_ed_acceptance(&sol, &prov, ctx.create("ed_acceptance.csv")?)?;
    io::write_convergence(&sol, &prov, ctx.create("convergence.csv")?)?;
    let c = &sol.convergence;
    let summary = json!({
        "outer_iterations": c.outer_iterations,
        "final_price_residual": c.price_residuals.last(),
        "inner_sweeps": c.inner_sweeps,
        "value_residual": c.value_residual,
        "default_cells": sol.default.iter().filter(|&&d| d).count(),
        "threshold_violations": sol.thresholds.violations.len(),
        "infeasible_repay_cells": sol.policy_debt.iter().filter(|p| p.is_none()).count(),
    });
    write_bundle(ctx, "ed_solution.fdsol", &Bundle::Ed(sol))?;
    ctx.finish(
        "solve",
        false,
        &[
            "ed_solution.fdsol",
            "ed_tables.csv",
            "ed_acceptance.csv",
            "convergence.csv",
        ],
        summary,
    )
}

pub fn solve_amss(ctx: &Context) -> Result<Value, CliError> {
    let sol = fiscal_default::solve_amss(&ctx.econ, ctx.cfg.amss_limits(&ctx.econ))?;
    io::write_amss_tables(&sol, &ctx.provenance(false), ctx.create("amss_tables.csv")?)?;
    let summary = json!({
        "sweeps": sol.sweeps,
        "limits": { "min": sol.limits.min, "max": sol.limits.max },
        "infeasible_cells": sol.infeasible.len(),
    });
    write_bundle(ctx, "amss_solution.fdsol", &Bundle::Amss(sol))?;
    ctx.finish(
        "solve-amss",
        false,
        &["amss_solution.fdsol", "amss_tables.csv"],
        summary,
    )
}

pub fn simulate(ctx: &Context, ed: Option<&Path>, amss: Option<&Path>) -> Result<Value, CliError> {
    let (ed, amss) = (ed_solution(ctx, ed)?, amss_solution(ctx, amss)?);
    // Replication r uses the stream that replication r of the Monte Carlo uses.
    let seed = ctx.cfg.seed ^ ctx.cfg.simulation.replication;
    let settings = ctx.cfg.sim_settings();
    let p = sim::simulate(&ctx.econ, &ed, settings, seed)?;
    let r = sim::simulate_amss(&ctx.econ, &amss, settings, seed)?;
    let prov = ctx.provenance(true);
    io::write_path(&p, &prov, ctx.create("path_ed.csv")?)?;
    io::write_path(&r, &prov, ctx.create("path_amss.csv")?)?;
    let kept = p.kept();
    let summary = json!({
        "replication": ctx.cfg.simulation.replication,
        "periods": kept.len(),
        "defaults": kept.clone().filter(|&t| p.default[t]).count(),
        "autarky_periods": kept.clone().filter(|&t| !p.access[t]).count(),
        "tax_sd_ed": sd(kept.clone().filter(|&t| p.access[t]).map(|t| p.tax[t])),
        "tax_sd_amss": sd(kept.map(|t| r.tax[t])),
    });
    ctx.finish("simulate", true, &["path_ed.csv", "path_amss.csv"], summary)
}

fn sd(x: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = x.collect();
    let n = v.len() as f64;
    if v.len() < 2 {
        return f64::NAN;
    }
    let m = v.iter().sum::<f64>() / n;
    (v.iter().map(|a| (a - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

/// JSON has no non-finite numbers; they become null.
fn num(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else {
        Value::Null
    }
}

pub fn moments(ctx: &Context, ed: Option<&Path>, amss: Option<&Path>) -> Result<Value, CliError> {
    let (ed, amss) = (ed_solution(ctx, ed)?, amss_solution(ctx, amss)?);
    let m = sim::mc_moments(
        &ctx.econ,
        &ed,
        &amss,
        &ctx.cfg.moment_settings(),
        ctx.cfg.seed,
    )?;
    let prov = ctx.provenance(true);
    io::write_moment_summary(&m, &prov, ctx.create("moments.csv")?)?;
    io::write_replications(&m, &prov, ctx.create("replications.csv")?)?;
    io::write_histograms(&m, &prov, ctx.create("histograms.csv")?)?;
    io::write_renegotiation(
        std::slice::from_ref(&m.renegotiation),
        &prov,
        ctx.create("renegotiation.csv")?,
    )?;
    let summary = json!({
        "replications": m.replications,
        "periods": m.periods,
        "default_frequency": num(m.default_frequency),
        "default_frequency_se": num(m.default_frequency_se),
        "tax_sd_ed": num(m.tax_sd_ed),
        "tax_sd_amss": num(m.tax_sd_amss),
        "tax_sd_ratio": num(m.tax_sd_ratio),
    });
    ctx.finish(
        "moments",
        true,
        &[
            "moments.csv",
            "replications.csv",
            "histograms.csv",
            "renegotiation.csv",
        ],
        summary,
    )
}

pub fn irf(ctx: &Context, ed: Option<&Path>, amss: Option<&Path>) -> Result<Value, CliError> {
    let g = &ctx.econ.chain.g_values;
    let (lo, hi) = (g[0], g[g.len() - 1]);
    let mut path = ctx.cfg.irf.g_path.clone();
    let outside = path.iter().filter(|&&x| x < lo || x > hi).count();
    if outside > 0 && ctx.cfg.irf.clamp_to_grid {
        path.iter_mut().for_each(|x| *x = x.clamp(lo, hi));
    }
    let (ed, amss) = (ed_solution(ctx, ed)?, amss_solution(ctx, amss)?);
    let panel = sim::impulse_response(&ctx.econ, &ed, &amss, &path)?;
    io::write_irf(&panel, &ctx.provenance(false), ctx.create("irf.csv")?)?;
    let summary = json!({
        "periods": panel.g.len(),
        "g_levels_used": panel.g,
        "clamped_levels": if ctx.cfg.irf.clamp_to_grid { outside } else { 0 },
        "ed_peak_debt": panel.ed.debt_next.iter().copied().fold(0.0, f64::max),
        "amss_peak_debt": panel.amss.debt_next.iter().copied().fold(0.0, f64::max),
        "ed_defaults": panel.ed.access.iter().any(|a| !a),
    });
    ctx.finish("irf", false, &["irf.csv"], summary)
}

pub fn episodes(ctx: &Context, ed: Option<&Path>, amss: Option<&Path>) -> Result<Value, CliError> {
    let (ed, amss) = (ed_solution(ctx, ed)?, amss_solution(ctx, amss)?);
    let spec = ctx.cfg.episode_spec();
    let panel = sim::collect_episodes(
        &ctx.econ,
        &ed,
        &amss,
        &ctx.cfg.moment_settings(),
        &spec,
        ctx.cfg.seed,
    )?;
    let prov = ctx.provenance(true);
    io::write_episode_bands(&panel, &prov, ctx.create("episode_bands.csv")?)?;
    io::write_episode_windows(&panel, &prov, ctx.create("episode_windows.csv")?)?;
    let summary = json!({
        "requested": panel.requested,
        "episodes": panel.count,
        "counterfactual_infeasible": panel.counterfactual_infeasible,
        "counterfactual_exceeds_share": num(panel.counterfactual_exceeds),
    });
    ctx.finish(
        "episodes",
        true,
        &["episode_bands.csv", "episode_windows.csv"],
        summary,
    )
}

pub fn reneg_table(ctx: &Context) -> Result<Value, CliError> {
    let rows = sim::renegotiation_table(
        &ctx.cfg.economy,
        &ctx.cfg.reneg.lambdas,
        ctx.cfg.simulation.replications,
        ctx.cfg.sim_settings(),
        ctx.cfg.seed,
    )?;
    io::write_renegotiation(
        &rows,
        &ctx.provenance(true),
        ctx.create("renegotiation.csv")?,
    )?;
    let summary = json!({ "rows": rows.len(), "lambdas": ctx.cfg.reneg.lambdas });
    ctx.finish("reneg-table", true, &["renegotiation.csv"], summary)
}

/// One invariant: a measured quantity against its limit.
fn check(name: &str, value: f64, limit: f64, required: bool) -> Value {
    json!({
        "name": name,
        "value": num(value),
        "limit": limit,
        "required": required,
        "passed": value.is_finite() && value <= limit,
    })
}

pub fn validate(ctx: &Context, path: &Path) -> Result<Value, CliError> {
    let v = &ctx.cfg.validate;
    let (kind, checks) = match read(path)? {
        Bundle::Ed(sol) => ("ed", validate_ed(ctx, &sol)?),
        Bundle::Amss(sol) => ("amss", validate_amss(ctx, &sol)?),
    };
    let passed = checks
        .iter()
        .all(|c| c["passed"].as_bool() == Some(true) || c["required"].as_bool() == Some(false));
    let summary = json!({
        "solution": path,
        "kind": kind,
        "paths": v.paths,
        "passed": passed,
        "checks": checks,
    });
    let report = ctx.finish("validate", true, &[], summary.clone())?;
    if passed {
        Ok(report)
    } else {
        Err(CliError::Invalid(summary))
    }
}

fn stored_economy(
    params: &fiscal_default::EconomyParams,
    g: &[f64],
    b: &[f64],
) -> Result<Economy, CliError> {
    let econ = params.build()?;
    if econ.chain.g_values != g || econ.grid.b_values != b {
        return Err(CliError::Model(fiscal_default::Error::Incompatible(
            "stored grids do not match the stored parameters".into(),
        )));
    }
    Ok(econ)
}

fn gap(a: f64, b: f64) -> f64 {
    match (is_infeasible(a), is_infeasible(b)) {
        (true, true) => 0.0,
        (false, false) => (a - b).abs(),
        _ => f64::INFINITY,
    }
}

fn validate_ed(ctx: &Context, sol: &EdSolution) -> Result<Vec<Value>, CliError> {
    let v = &ctx.cfg.validate;
    let econ = stored_economy(&sol.params, &sol.g_values, &sol.b_values)?;
    let (n_g, n_b) = (econ.n_g(), econ.n_b());
    let (mut repay, mut autarky) = (0.0_f64, 0.0_f64);
    for g in 0..n_g {
        for i in 0..n_b {
            let c = sol.idx(g, i);
            let r =
                solver::bellman_repay(&econ, &sol.v_repay, &sol.v_autarky, &sol.price_repay, g, i);
            repay = repay.max(gap(r.value, sol.v_repay[c]));
            let a = solver::bellman_autarky(&econ, &sol.v_repay, &sol.v_autarky, g, i);
            autarky = autarky.max(gap(a, sol.v_autarky[c]));
        }
    }
    let upd = solver::update_prices(
        &econ,
        &sol.v_repay,
        &sol.v_autarky,
        Some(&sol.price_autarky),
    );
    let sup = |a: &[f64], b: &[f64]| {
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    };
    let flips = upd
        .default
        .iter()
        .zip(&sol.default)
        .filter(|(a, b)| a != b)
        .count()
        + upd
            .accept
            .iter()
            .zip(&sol.accept)
            .filter(|(a, b)| a != b)
            .count();
    let thresholds = solver::extract_thresholds(sol);
    let fund = solver::check_no_fund_raising(sol, v.fixed_point_tol);

    let seeded: Vec<SimPath> = (0..v.paths as u64)
        .map(|r| sim::simulate(&econ, sol, ctx.cfg.sim_settings(), ctx.cfg.seed ^ r))
        .collect::<Result<_, _>>()?;
    let failing = seeded
        .iter()
        .filter(|p| !sim::validate_implementability(p, &econ, sol, v.path_tol).passed())
        .count();
    let motion = seeded.iter().map(law_of_motion_breaks).sum::<usize>();

    let no_offers = econ.offers.lambda == 0.0;
    Ok(vec![
        check("bellman_repay_residual", repay, v.fixed_point_tol, true),
        check("bellman_autarky_residual", autarky, v.fixed_point_tol, true),
        check(
            "price_repay_residual",
            sup(&upd.price_repay, &sol.price_repay),
            v.fixed_point_tol,
            true,
        ),
        check(
            "price_autarky_residual",
            sup(&upd.price_autarky, &sol.price_autarky),
            v.fixed_point_tol,
            true,
        ),
        check("policy_flips", flips as f64, 0.0, true),
        // Threshold structure and no fund raising in default are theorems
        // only without offers; with offers they are reported, not enforced.
        check(
            "threshold_violations",
            thresholds.violations.len() as f64,
            0.0,
            no_offers,
        ),
        check(
            "fund_raising_in_default",
            fund.violations.len() as f64,
            0.0,
            no_offers,
        ),
        check("paths_failing_implementability", failing as f64, 0.0, true),
        check("law_of_motion_breaks", motion as f64, 0.0, true),
    ])
}

/// Access must follow the default and acceptance decisions, and debt is
/// frozen in autarky.
fn law_of_motion_breaks(p: &SimPath) -> usize {
    (1..p.len())
        .filter(|&t| {
            let expected = if p.access[t - 1] {
                !p.default[t]
            } else {
                p.accept[t]
            };
            p.access[t] != expected || (!p.access[t] && p.debt_next[t] != p.debt[t])
        })
        .count()
}

fn validate_amss(ctx: &Context, sol: &AmssSolution) -> Result<Vec<Value>, CliError> {
    let v = &ctx.cfg.validate;
    let econ = stored_economy(&sol.params, &sol.g_values, &sol.b_values)?;
    let (n_g, n_b) = (econ.n_g(), econ.n_b());
    let beta = econ.beta();
    let b = &econ.grid.b_values;
    let allowed: Vec<usize> = (0..n_b)
        .filter(|&j| b[j] >= sol.limits.min - 1e-12 && b[j] <= sol.limits.max + 1e-12)
        .collect();
    let mut residual = 0.0_f64;
    for g in 0..n_g {
        let gv = econ.chain.g_values[g];
        let row = econ.chain.row(g);
        let cont: Vec<f64> = (0..n_b)
            .map(|j| {
                row.iter()
                    .enumerate()
                    .map(|(h, p)| p * sol.value[sol.idx(h, j)])
                    .sum()
            })
            .collect();
        for i in 0..n_b {
            let best = allowed
                .iter()
                .filter_map(|&j| {
                    let revenue = (gv + b[i] - beta * b[j]).max(0.0);
                    let w = econ.model.period_payoff(1.0, revenue).ok()?;
                    Some(w - gv + beta * cont[j])
                })
                .fold(f64::NEG_INFINITY, f64::max);
            let best = if best.is_finite() {
                best
            } else {
                solver::INFEASIBLE
            };
            residual = residual.max(gap(best, sol.value[sol.idx(g, i)]));
        }
    }
    let failing = (0..v.paths as u64)
        .map(|r| sim::simulate_amss(&econ, sol, ctx.cfg.sim_settings(), ctx.cfg.seed ^ r))
        .collect::<Result<Vec<_>, _>>()?
        .iter()
        .filter(|p| !sim::validate_amss_path(p, &econ, v.path_tol).passed())
        .count();
    Ok(vec![
        check("bellman_residual", residual, v.fixed_point_tol, true),
        check("paths_failing_implementability", failing as f64, 0.0, true),
    ])
}
