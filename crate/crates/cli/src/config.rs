//! Run configuration: one TOML file plus `KEY=VALUE` overrides fully
//! determines a run.

use std::path::{Path, PathBuf};

use fiscal_default::sim::{EpisodeSpec, MomentSettings, SimSettings};
use fiscal_default::{DebtLimits, Economy, EconomyParams};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

pub const DEFAULT_SEED: u64 = 20_240_601;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub economy: EconomyParams,
    pub simulation: SimulationConfig,
    pub amss: AmssConfig,
    pub irf: IrfConfig,
    pub episodes: EpisodesConfig,
    pub reneg: RenegConfig,
    pub validate: ValidateConfig,
    pub output: OutputConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: DEFAULT_SEED,
            economy: EconomyParams::default(),
            simulation: SimulationConfig::default(),
            amss: AmssConfig::default(),
            irf: IrfConfig::default(),
            episodes: EpisodesConfig::default(),
            reneg: RenegConfig::default(),
            validate: ValidateConfig::default(),
            output: OutputConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationConfig {
    pub replications: usize,
    /// Periods per replication, burn-in included.
    pub horizon: usize,
    pub burn_in: usize,
    /// Debt/output observations with spreads above this are dropped from
    /// the histograms.
    pub spread_cutoff: f64,
    pub bins: usize,
    /// Replication stream used by `simulate`.
    pub replication: u64,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            replications: 500,
            horizon: 2500,
            burn_in: 500,
            spread_cutoff: 0.5,
            bins: 60,
            replication: 0,
        }
    }
}

/// Debt limits of the risk-free economy; `max` defaults to the top of the grid.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AmssConfig {
    pub min: f64,
    pub max: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IrfConfig {
    pub g_path: Vec<f64>,
    /// Move levels outside the spending grid to the nearest endpoint instead
    /// of rejecting them.
    pub clamp_to_grid: bool,
}

impl Default for IrfConfig {
    fn default() -> Self {
        let mut g_path = vec![0.0915; 30];
        g_path[2..5].fill(0.159);
        Self {
            g_path,
            clamp_to_grid: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EpisodesConfig {
    pub before: usize,
    pub after: usize,
    pub access_before: usize,
    pub autarky_after: usize,
    pub forced_periods: usize,
    pub max_episodes: usize,
}

impl Default for EpisodesConfig {
    fn default() -> Self {
        let s = EpisodeSpec::default();
        Self {
            before: s.before,
            after: s.after,
            access_before: s.access_before,
            autarky_after: s.autarky_after,
            forced_periods: s.forced_periods,
            max_episodes: s.max_episodes,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RenegConfig {
    pub lambdas: Vec<f64>,
}

impl Default for RenegConfig {
    fn default() -> Self {
        Self {
            lambdas: vec![0.2, 0.4, 0.6, 0.8, 1.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ValidateConfig {
    /// Simulated paths replayed through the implementability check.
    pub paths: usize,
    pub path_tol: f64,
    /// Tolerance on Bellman and price fixed-point residuals.
    pub fixed_point_tol: f64,
}

impl Default for ValidateConfig {
    fn default() -> Self {
        Self {
            paths: 50,
            path_tol: 1e-9,
            fixed_point_tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: Option<PathBuf>,
}

impl RunConfig {
    /// Reads `path` (or the built-in defaults) and applies overrides.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self, CliError> {
        let text = match path {
            Some(p) => std::fs::read_to_string(p).map_err(|e| CliError::Config {
                message: format!("cannot read {}: {e}", p.display()),
                line: None,
                column: None,
                field: None,
            })?,
            None => String::new(),
        };
        let config: RunConfig = toml::from_str(&text).map_err(|e| toml_error(&text, e))?;
        if overrides.is_empty() {
            return Ok(config);
        }
        // Overrides act on the resolved configuration, so a single nested
        // key can be changed without restating its table.
        let toml::Value::Table(mut table) =
            toml::Value::try_from(&config).expect("configuration serializes")
        else {
            unreachable!("configuration is a table")
        };
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        RunConfig::deserialize(toml::Value::Table(table)).map_err(|e| CliError::Config {
            message: format!("{} (after overrides)", e.message()),
            line: None,
            column: None,
            field: None,
        })
    }

    /// Checks every parameter and builds the economy; nothing expensive runs
    /// before this succeeds.
    pub fn check(&self) -> Result<Economy, CliError> {
        let econ = self.economy.build().map_err(CliError::from_model)?;
        self.sim_settings()
            .validate()
            .map_err(CliError::from_model)?;
        let s = &self.simulation;
        if s.replications == 0 || s.bins == 0 {
            return Err(field_error(
                "simulation",
                "replications and bins must be positive",
            ));
        }
        if !(s.spread_cutoff >= 0.0) {
            return Err(field_error(
                "simulation.spread_cutoff",
                "must be non-negative",
            ));
        }
        if let Some(max) = self.amss.max {
            if !(max >= self.amss.min) {
                return Err(field_error("amss.max", "must not be below amss.min"));
            }
        }
        if self.irf.g_path.is_empty() || self.irf.g_path.iter().any(|g| !g.is_finite()) {
            return Err(field_error("irf.g_path", "needs at least one finite level"));
        }
        if self.reneg.lambdas.iter().any(|l| !(0.0..=1.0).contains(l)) {
            return Err(field_error(
                "reneg.lambdas",
                "probabilities must lie in [0, 1]",
            ));
        }
        let e = &self.episodes;
        if e.forced_periods == 0 || e.max_episodes == 0 {
            return Err(field_error(
                "episodes",
                "forced_periods and max_episodes must be positive",
            ));
        }
        if self.validate.paths == 0
            || !(self.validate.path_tol > 0.0)
            || !(self.validate.fixed_point_tol > 0.0)
        {
            return Err(field_error(
                "validate",
                "paths and tolerances must be positive",
            ));
        }
        Ok(econ)
    }

    pub fn sim_settings(&self) -> SimSettings {
        SimSettings {
            horizon: self.simulation.horizon,
            burn_in: self.simulation.burn_in,
        }
    }

    pub fn moment_settings(&self) -> MomentSettings {
        MomentSettings {
            replications: self.simulation.replications,
            sim: self.sim_settings(),
            spread_cutoff: self.simulation.spread_cutoff,
            bins: self.simulation.bins,
        }
    }

    pub fn episode_spec(&self) -> EpisodeSpec {
        let e = &self.episodes;
        EpisodeSpec {
            before: e.before,
            after: e.after,
            access_before: e.access_before,
            autarky_after: e.autarky_after,
            forced_periods: e.forced_periods,
            max_episodes: e.max_episodes,
        }
    }

    pub fn amss_limits(&self, econ: &Economy) -> DebtLimits {
        DebtLimits {
            min: self.amss.min,
            max: self.amss.max.unwrap_or_else(|| econ.grid.max()),
        }
    }

    /// SHA-256 of the resolved configuration in canonical TOML form. The
    /// output directory and the seed are excluded; the seed is recorded
    /// separately.
    pub fn sha256(&self) -> String {
        let mut c = self.clone();
        c.output = OutputConfig::default();
        c.seed = 0;
        let text = toml::to_string(&c).expect("configuration serializes");
        Sha256::digest(text.as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }
}

fn field_error(field: &str, message: &str) -> CliError {
    CliError::Config {
        message: message.into(),
        line: None,
        column: None,
        field: Some(field.into()),
    }
}

fn toml_error(text: &str, e: toml::de::Error) -> CliError {
    let (line, column) = match e.span() {
        Some(span) => {
            let before = &text[..span.start.min(text.len())];
            let line = before.matches('\n').count() + 1;
            let column = before.len() - before.rfind('\n').map_or(0, |i| i + 1) + 1;
            (Some(line), Some(column))
        }
        None => (None, None),
    };
    CliError::Config {
        message: e.message().to_string(),
        line,
        column,
        field: None,
    }
}

/// Sets a dotted key, e.g. `economy.offers.lambda=0.2`. The value is read as
/// a TOML value and falls back to a bare string.
fn apply_override(table: &mut toml::Table, item: &str) -> Result<(), CliError> {
    let bad = |m: &str| field_error(item, m);
    let (key, raw) = item
        .split_once('=')
        .ok_or_else(|| bad("override must have the form KEY=VALUE"))?;
    let value = match toml::from_str::<toml::Table>(&format!("v = {raw}")) {
        Ok(mut t) => t.remove("v").expect("parsed key"),
        Err(_) => toml::Value::String(raw.to_string()),
    };
    let parts: Vec<&str> = key.trim().split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(bad("empty key segment"));
    }
    let mut node = table;
    for p in &parts[..parts.len() - 1] {
        let entry = node
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        node = entry
            .as_table_mut()
            .ok_or_else(|| bad("key descends into a non-table value"))?;
    }
    node.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}
