//! JSON run configuration and its conversion to normalized units.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use nanonmr_core::evaporating::Truncation;
use nanonmr_core::numerics::QuadratureSpec;
use nanonmr_core::{CylinderGeometry, FluidParams, ModelTag};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Correlate,
    Eigen,
    PlateauMap,
    DominanceMap,
    Fisher,
    Fit,
    Mc,
    Compare,
}

impl Command {
    pub const ALL: [Command; 8] =
        [Command::Correlate, Command::Eigen, Command::PlateauMap, Command::DominanceMap, Command::Fisher, Command::Fit, Command::Mc, Command::Compare];

    pub fn as_str(self) -> &'static str {
        match self {
            Command::Correlate => "correlate",
            Command::Eigen => "eigen",
            Command::PlateauMap => "plateau-map",
            Command::DominanceMap => "dominance-map",
            Command::Fisher => "fisher",
            Command::Fit => "fit",
            Command::Mc => "mc",
            Command::Compare => "compare",
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Command {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Command::ALL.into_iter().find(|c| c.as_str() == s).ok_or_else(|| {
            let names: Vec<_> = Command::ALL.iter().map(|c| c.as_str()).collect();
            format!("unknown command `{s}` (expected one of {})", names.join(", "))
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(format!("unknown format `{other}` (expected csv or json)")),
        }
    }
}

/// Length unit of R, L, d and of map ranges.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum LengthUnit {
    /// Multiples of the depth d, i.e. already normalized.
    #[default]
    #[serde(rename = "d")]
    Depth,
    #[serde(rename = "m")]
    Metre,
    #[serde(rename = "um")]
    Micrometre,
    #[serde(rename = "nm")]
    Nanometre,
}

impl LengthUnit {
    fn metres(self) -> Option<f64> {
        match self {
            LengthUnit::Depth => None,
            LengthUnit::Metre => Some(1.0),
            LengthUnit::Micrometre => Some(1e-6),
            LengthUnit::Nanometre => Some(1e-9),
        }
    }
}

/// Unit of tau_ev and of the time grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum TimeUnit {
    #[default]
    #[serde(rename = "T_D")]
    Diffusion,
    #[serde(rename = "s")]
    Second,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridBlock {
    pub min: f64,
    pub max: f64,
    pub per_decade: usize,
}

impl Default for GridBlock {
    fn default() -> Self {
        GridBlock { min: 1e-2, max: 1e3, per_decade: 10 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct McBlock {
    /// Particles per realization.
    pub particles: usize,
    pub realizations: usize,
    /// Time step in T_D.
    pub dt: f64,
}

impl Default for McBlock {
    fn default() -> Self {
        McBlock { particles: 3200, realizations: 32, dt: 1e-3 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FisherBlock {
    /// Detuning in units of 1/T_D.
    pub delta: f64,
    /// Total experiment time in T_D.
    pub total_time: f64,
    /// Duration of one shot in T_D.
    pub shot_time: f64,
    pub phi_rms: f64,
}

impl Default for FisherBlock {
    fn default() -> Self {
        FisherBlock { delta: 5e-4, total_time: 1e5, shot_time: 1.0, phi_rms: 1.0 }
    }
}

/// Rectangular (R, L) grid in the configured length unit, log-spaced on both axes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapBlock {
    #[serde(rename = "R_min")]
    pub r_min: f64,
    #[serde(rename = "R_max")]
    pub r_max: f64,
    #[serde(rename = "L_min")]
    pub l_min: f64,
    #[serde(rename = "L_max")]
    pub l_max: f64,
    #[serde(default = "default_map_points")]
    pub points: usize,
}

fn default_map_points() -> usize {
    25
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputBlock {
    pub path: Option<PathBuf>,
    pub format: Format,
    /// Also write a gnuplot script next to map and comparison outputs.
    pub gnuplot: bool,
}

/// The configuration document as written.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub command: Option<Command>,
    pub model: Option<String>,
    #[serde(rename = "R")]
    pub r: Option<f64>,
    #[serde(rename = "L")]
    pub l: Option<f64>,
    pub d: Option<f64>,
    #[serde(default)]
    pub length_unit: LengthUnit,
    /// Diffusion coefficient in m²/s; only meaningful with a physical length unit.
    #[serde(rename = "D")]
    pub diffusion: Option<f64>,
    pub tau_ev: Option<f64>,
    #[serde(default)]
    pub time_unit: TimeUnit,
    pub grid: Option<GridBlock>,
    pub quadrature: Option<QuadratureSpec>,
    pub truncation: Option<Truncation>,
    /// Gauss–Legendre nodes per panel for mode weights.
    pub mode_nodes: Option<usize>,
    pub mc: Option<McBlock>,
    pub fisher: Option<FisherBlock>,
    pub map: Option<MapBlock>,
    /// Series file read by `fit`.
    pub input: Option<PathBuf>,
    #[serde(default)]
    pub output: OutputBlock,
    pub seed: Option<u64>,
}

/// How lengths and times map to the normalized system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    /// Depth in metres, when physical units were given.
    pub d_m: Option<f64>,
    /// T_D = d²/D in seconds, when physical units were given; 1 otherwise.
    pub t_d_s: Option<f64>,
}

impl fmt::Display for Normalization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.d_m, self.t_d_s) {
            (Some(d), Some(t)) => write!(f, "d = {d:.6e} m, T_D = {t:.6e} s"),
            (Some(d), None) => write!(f, "d = {d:.6e} m, T_D undefined (no D given)"),
            (None, _) => write!(f, "d = 1, T_D = 1 (normalized units)"),
        }
    }
}

/// Validated configuration, everything in normalized units.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub model: ModelTag,
    pub geometry: CylinderGeometry,
    pub fluid: FluidParams,
    pub normalization: Normalization,
    /// Times in T_D.
    pub grid: GridBlock,
    pub quadrature: QuadratureSpec,
    pub truncation: Option<Truncation>,
    pub mode_nodes: usize,
    pub mc: McBlock,
    pub fisher: FisherBlock,
    /// Map bounds in units of d.
    pub map: Option<MapBlock>,
    pub input: Option<PathBuf>,
    pub output: OutputBlock,
    pub seed: u64,
    /// SHA-256 of the configuration text.
    pub config_hash: String,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ConfigError {
    Syntax { line: usize, column: usize, message: String },
    Semantic { key: String, message: String },
    Units(String),
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::Syntax { line, column, message } => write!(f, "config syntax error at line {line}, column {column}: {message}"),
            ConfigError::Semantic { key, message } => write!(f, "invalid config key `{key}`: {message}"),
            ConfigError::Units(m) => write!(f, "inconsistent units: {m}"),
        }
    }
}

impl std::error::Error for ConfigError {}

fn semantic(key: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Semantic { key: key.to_string(), message: message.into() }
}

fn positive(key: &str, v: f64) -> Result<f64, ConfigError> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(semantic(key, format!("must be positive and finite, got {v}")))
    }
}

pub fn config_hash(text: &str) -> String {
    Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let raw: RawConfig = serde_json::from_str(text).map_err(|e| ConfigError::Syntax { line: e.line(), column: e.column(), message: e.to_string() })?;
    let command = raw.command.ok_or_else(|| semantic("command", "missing"))?;
    resolve(raw, command, config_hash(text))
}

/// Like [`parse_config`], with the command given separately (e.g. on the command line).
/// A command inside the document must agree with it.
pub fn parse_config_for(text: &str, command: Command) -> Result<RunConfig, ConfigError> {
    let raw: RawConfig = serde_json::from_str(text).map_err(|e| ConfigError::Syntax { line: e.line(), column: e.column(), message: e.to_string() })?;
    if let Some(c) = raw.command {
        if c != command {
            return Err(semantic("command", format!("config says `{c}` but `{command}` was requested")));
        }
    }
    resolve(raw, command, config_hash(text))
}

fn resolve(raw: RawConfig, command: Command, config_hash: String) -> Result<RunConfig, ConfigError> {
    let model = match (&raw.model, command) {
        (Some(m), _) => m.parse::<ModelTag>().map_err(|e| semantic("model", e.to_string()))?,
        (None, Command::Correlate | Command::Mc | Command::Compare) => return Err(semantic("model", "missing")),
        (None, Command::Eigen | Command::DominanceMap | Command::Fisher) => ModelTag::Evaporating,
        (None, _) => ModelTag::Sticky,
    };
    if matches!(model, ModelTag::MonteCarlo | ModelTag::Fitted) && command != Command::Fit {
        return Err(semantic("model", format!("`{model}` is an output tag, not a wall model")));
    }

    // lengths
    let (scale, normalization) = match raw.length_unit.metres() {
        None => {
            if let Some(d) = raw.d {
                if d != 1.0 {
                    return Err(ConfigError::Units(format!("length_unit \"d\" requires d = 1, got {d}")));
                }
            }
            if raw.diffusion.is_some() {
                return Err(ConfigError::Units("D is given in m^2/s and needs a physical length_unit (m, um or nm)".into()));
            }
            if raw.time_unit == TimeUnit::Second {
                return Err(ConfigError::Units("time_unit \"s\" needs a physical length_unit and D".into()));
            }
            (1.0, Normalization { d_m: None, t_d_s: None })
        }
        Some(unit) => {
            let d = positive("d", raw.d.ok_or_else(|| semantic("d", "required with a physical length_unit"))?)?;
            let d_m = d * unit;
            let t_d_s = match raw.diffusion {
                Some(dc) => Some(d_m * d_m / positive("D", dc)?),
                None if raw.time_unit == TimeUnit::Second => {
                    return Err(ConfigError::Units("time_unit \"s\" needs D to define T_D".into()));
                }
                None => None,
            };
            (d, Normalization { d_m: Some(d_m), t_d_s })
        }
    };
    let needs_geometry = !matches!(command, Command::PlateauMap | Command::DominanceMap | Command::Fit);
    let geometry = match (raw.r, raw.l) {
        (Some(r), Some(l)) => {
            let r = positive("R", r)? / scale;
            let l = positive("L", l)? / scale;
            CylinderGeometry::new(r, l, 1.0).map_err(|e| semantic("R", e.to_string()))?
        }
        (None, _) if needs_geometry => return Err(semantic("R", "missing")),
        (_, None) if needs_geometry => return Err(semantic("L", "missing")),
        _ => CylinderGeometry::new(1.0, 1.0, 1.0).expect("unit cylinder"),
    };

    // times
    let time_scale = match raw.time_unit {
        TimeUnit::Diffusion => 1.0,
        TimeUnit::Second => normalization.t_d_s.expect("checked above"),
    };
    let tau_ev = match raw.tau_ev {
        Some(t) => Some(positive("tau_ev", t)? / time_scale),
        None => None,
    };
    let needs_tau = model == ModelTag::Evaporating && !matches!(command, Command::Fit | Command::PlateauMap);
    if needs_tau && tau_ev.is_none() {
        return Err(semantic("tau_ev", "required for the evaporating model"));
    }
    if tau_ev.is_some() && matches!(model, ModelTag::Reflective | ModelTag::Sticky | ModelTag::Free) {
        return Err(semantic("tau_ev", format!("has no meaning for the {model} model")));
    }
    let fluid = FluidParams::new(1.0, tau_ev).map_err(|e| semantic("tau_ev", e.to_string()))?;

    let mut grid = raw.grid.unwrap_or_default();
    grid.min = positive("grid.min", grid.min)? / time_scale;
    grid.max = positive("grid.max", grid.max)? / time_scale;
    if grid.max <= grid.min {
        return Err(semantic("grid.max", "must exceed grid.min"));
    }
    if grid.per_decade == 0 {
        return Err(semantic("grid.per_decade", "must be at least 1"));
    }

    let quadrature = raw.quadrature.unwrap_or_default();
    quadrature.validate().map_err(|e| semantic("quadrature", e.to_string()))?;
    if let Some(t) = raw.truncation {
        if t.m == 0 || t.p == 0 || t.m > 100 || t.p > 100 {
            return Err(semantic("truncation", "orders must lie in 1..=100"));
        }
    }
    let mode_nodes = raw.mode_nodes.unwrap_or(8);
    if !(2..=64).contains(&mode_nodes) {
        return Err(semantic("mode_nodes", "must lie in 2..=64"));
    }

    let mc = raw.mc.unwrap_or_default();
    if mc.particles == 0 {
        return Err(semantic("mc.particles", "must be at least 1"));
    }
    if mc.realizations < 2 {
        return Err(semantic("mc.realizations", "must be at least 2"));
    }
    positive("mc.dt", mc.dt)?;

    let fisher = raw.fisher.unwrap_or_default();
    if !(fisher.delta >= 0.0 && fisher.delta.is_finite()) {
        return Err(semantic("fisher.delta", "must be finite and >= 0"));
    }
    positive("fisher.total_time", fisher.total_time)?;
    positive("fisher.shot_time", fisher.shot_time)?;
    positive("fisher.phi_rms", fisher.phi_rms)?;

    let map = match raw.map {
        Some(m) => {
            for (k, v) in [("map.R_min", m.r_min), ("map.R_max", m.r_max), ("map.L_min", m.l_min), ("map.L_max", m.l_max)] {
                positive(k, v)?;
            }
            if m.r_max < m.r_min || m.l_max < m.l_min {
                return Err(semantic("map", "maxima must not be below minima"));
            }
            if m.points < 2 {
                return Err(semantic("map.points", "must be at least 2"));
            }
            Some(MapBlock { r_min: m.r_min / scale, r_max: m.r_max / scale, l_min: m.l_min / scale, l_max: m.l_max / scale, points: m.points })
        }
        None if matches!(command, Command::PlateauMap | Command::DominanceMap) => return Err(semantic("map", "required by this command")),
        None => None,
    };
    if command == Command::Fit && raw.input.is_none() {
        return Err(semantic("input", "fit needs a series file to read"));
    }

    Ok(RunConfig {
        command,
        model,
        geometry,
        fluid,
        normalization,
        grid,
        quadrature,
        truncation: raw.truncation,
        mode_nodes,
        mc,
        fisher,
        map,
        input: raw.input,
        output: raw.output,
        seed: raw.seed.unwrap_or(0),
        config_hash,
    })
}
