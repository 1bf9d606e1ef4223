//! Experiment configuration: a TOML file merged with command-line
//! overrides. Every knob is optional; each experiment fills in its own
//! defaults and validates the resolved values before any computation.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

/// Raw configuration as read from TOML. All fields optional; unknown keys
/// are rejected so typos surface as config errors instead of silently
/// falling back to defaults.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    /// Experiment name; must match the subcommand when both are given.
    pub experiment: Option<String>,
    /// Output directory for artifacts (CSV, .dat, manifest).
    pub out: Option<PathBuf>,
    /// Seed for the randomized spot checks.
    pub seed: Option<u64>,
    /// Velocity field selector, e.g. `"rough_power(0.5)"`, `"constant(0,1)"`.
    pub field: Option<String>,
    pub data: DataConfig,
    pub scales: ScalesConfig,
    pub grid: GridConfig,
    pub domain: DomainConfig,
    pub relabel: RelabelConfig,
}

/// Boundary/initial data selector.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataConfig {
    /// One of `front` (h ≡ amplitude, u₀ ≡ 0), `pulse` (Gaussian u₀,
    /// h ≡ 0), `inflow-pulse` (Gaussian u₀ plus a smooth boundary pulse),
    /// `zero`.
    pub kind: Option<String>,
    /// Integrability exponent attached to the data.
    pub p: Option<f64>,
    /// Width of the Gaussian pulse.
    pub sigma: Option<f64>,
    /// Center of the Gaussian pulse; defaults to mid-domain.
    pub center: Option<Vec<f64>>,
    /// Overall data amplitude.
    pub amplitude: Option<f64>,
    /// Declared support bound for admissibility bookkeeping.
    pub support_radius: Option<f64>,
}

/// Mollification scales and norm exponents.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScalesConfig {
    /// Strictly decreasing list of mollification scales η.
    pub eta: Option<Vec<f64>>,
    /// Lᵖ exponent for the scalar input.
    pub p: Option<f64>,
    /// Lᵝ exponent for the velocity gradient.
    pub beta: Option<f64>,
}

/// Half-space strip grid parameters.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    pub dimension: Option<usize>,
    /// Tangential half-width (d ≥ 2).
    pub a: Option<f64>,
    /// Normal depth of the strip.
    pub l: Option<f64>,
    /// Lattice spacing.
    pub h: Option<f64>,
    /// Time horizon.
    pub t_end: Option<f64>,
    /// Time step.
    pub dt: Option<f64>,
}

/// Curved-domain parameters for the `curved-trace` experiment.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DomainConfig {
    /// `disk` or `annulus`.
    pub kind: Option<String>,
    /// Disk radius.
    pub radius: Option<f64>,
    /// Annulus inner radius.
    pub r1: Option<f64>,
    /// Annulus outer radius.
    pub r2: Option<f64>,
    /// Which boundary circle carries the band: `outer` or `inner`.
    pub side: Option<String>,
    /// Band depth.
    pub s_max: Option<f64>,
    pub arc_nodes: Option<usize>,
    pub depth_nodes: Option<usize>,
}

/// Relabeling function for the `renormalize` experiment.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RelabelConfig {
    /// `tanh` or `truncation`.
    pub theta: Option<String>,
    /// Truncation level M.
    pub m: Option<f64>,
    /// Truncation smoothing scale.
    pub eta_r: Option<f64>,
    /// Truncation growth exponent.
    pub p: Option<f64>,
    /// Half-width of the inverse-construction interval [−C, C].
    pub c: Option<f64>,
}

/// A configuration problem: the violated constraint, named. Exits with
/// status 2.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "config error: {}", self.0)
    }
}

impl std::error::Error for ConfigError {}

pub fn config_error<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError(msg.into()))
}

impl ExperimentConfig {
    /// Read and parse a TOML config file.
    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            ConfigError(format!("cannot read config file {}: {e}", path.display()))
        })?;
        toml::from_str(&text)
            .map_err(|e| ConfigError(format!("cannot parse {}: {e}", path.display())))
    }

    /// Apply command-line overrides on top of the file values.
    pub fn apply_overrides(
        &mut self,
        eta: &[f64],
        grid_h: Option<f64>,
        field: Option<&str>,
        out: Option<&Path>,
        seed: Option<u64>,
    ) {
        if !eta.is_empty() {
            self.scales.eta = Some(eta.to_vec());
        }
        if let Some(h) = grid_h {
            self.grid.h = Some(h);
        }
        if let Some(f) = field {
            self.field = Some(f.to_string());
        }
        if let Some(o) = out {
            self.out = Some(o.to_path_buf());
        }
        if let Some(s) = seed {
            self.seed = Some(s);
        }
    }

    /// The config-file experiment name must agree with the subcommand.
    pub fn check_experiment_name(&self, subcommand: &str) -> Result<(), ConfigError> {
        if let Some(name) = &self.experiment {
            if name != subcommand {
                return config_error(format!(
                    "experiment name {name:?} in the config file does not match \
                     the {subcommand:?} subcommand"
                ));
            }
        }
        Ok(())
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("artifacts"))
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(7)
    }
}

/// Shared validation helpers used by the experiment runners.
pub mod check {
    use super::{config_error, ConfigError};

    pub fn positive(name: &str, v: f64) -> Result<f64, ConfigError> {
        if v.is_finite() && v > 0.0 {
            Ok(v)
        } else {
            config_error(format!("{name} must be positive and finite, got {v}"))
        }
    }

    /// η list: nonempty, positive, strictly decreasing.
    pub fn eta_list(eta: &[f64]) -> Result<(), ConfigError> {
        if eta.is_empty() {
            return config_error("scales.eta must list at least one scale");
        }
        for &e in eta {
            positive("scales.eta entries", e)?;
        }
        for w in eta.windows(2) {
            if w[1] >= w[0] {
                return config_error(format!(
                    "scales.eta must be strictly decreasing, got {} before {}",
                    w[0], w[1]
                ));
            }
        }
        Ok(())
    }

    /// Kernel resolution constraint η ≥ 2h for every scale.
    pub fn eta_resolved(eta: &[f64], h: f64) -> Result<(), ConfigError> {
        for &e in eta {
            if e < 2.0 * h {
                return config_error(format!(
                    "scale eta = {e} under-resolves the grid: need eta >= 2h = {}",
                    2.0 * h
                ));
            }
        }
        Ok(())
    }

    /// Forward-time mollification margin η ≤ T.
    pub fn eta_within_horizon(eta: &[f64], t_end: f64) -> Result<(), ConfigError> {
        for &e in eta {
            if e > t_end {
                return config_error(format!(
                    "scale eta = {e} exceeds the time horizon t_end = {t_end}; \
                     the forward-time kernel needs t + eta <= t_end"
                ));
            }
        }
        Ok(())
    }
}
