//! Run configuration: a flat TOML file merged with command-line flags,
//! flags winning. The merged result builds the core types (packet, region,
//! settings) and owns the unit conversion between physical and dimensionless
//! coordinates.

use std::path::Path;

use num_complex::Complex64;
use serde::Deserialize;

use arrival_core::detection::{DetectionSettings, Region};
use arrival_core::flow::IntegratorSettings;
use arrival_core::{ChartScale, GalileanBoost, Packet, PacketTerm};

/// Errors at the configuration boundary (exit code 2 territory).
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "configuration error: {}", self.0)
    }
}

impl std::error::Error for ConfigError {}

fn err(msg: impl Into<String>) -> ConfigError {
    ConfigError(msg.into())
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub packet: Option<PacketSection>,
    pub region: Option<RegionSection>,
    pub grid: Option<GridSection>,
    pub settings: Option<SettingsSection>,
    pub output: Option<OutputSection>,
    pub units: Option<UnitsSection>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PacketSection {
    /// "gaussian" (default) or "superposition" with a term list.
    pub kind: Option<String>,
    pub terms: Option<Vec<TermSection>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermSection {
    pub coefficient_re: f64,
    #[serde(default)]
    pub coefficient_im: f64,
    #[serde(default)]
    pub boost_v: f64,
    #[serde(default)]
    pub reflect: bool,
    #[serde(default)]
    pub shift_t: f64,
    #[serde(default)]
    pub shift_x: f64,
    #[serde(default)]
    pub phase_c: f64,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionSection {
    /// "point" (default) or "slab".
    pub kind: Option<String>,
    pub level: Option<f64>,
    pub x_lo: Option<f64>,
    pub x_hi: Option<f64>,
    pub drift: Option<f64>,
    pub t_on: Option<f64>,
    pub t_off: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub t_min: Option<f64>,
    pub t_max: Option<f64>,
    pub points: Option<usize>,
    /// "linear" (default) or "log".
    pub spacing: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SettingsSection {
    pub reference_time: Option<f64>,
    pub window_sigmas: Option<f64>,
    pub grid_points: Option<usize>,
    pub boundary_tol: Option<f64>,
    pub error_budget: Option<f64>,
    pub quad_tol: Option<f64>,
    pub predicate_samples: Option<usize>,
    pub force_numeric: Option<bool>,
    pub rel_tol: Option<f64>,
    pub abs_tol: Option<f64>,
    pub max_step: Option<f64>,
    pub event_refine_tol: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub format: Option<String>,
    pub path: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UnitsSection {
    pub physical: Option<bool>,
    pub delta: Option<f64>,
    pub hbar: Option<f64>,
    pub mass: Option<f64>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<FileConfig, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| err(format!("cannot read {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| err(format!("{}: {e}", path.display())))
    }
}

/// Unit conversion at the input/output boundary. In dimensionless mode every
/// method is the identity.
#[derive(Debug, Clone, Copy)]
pub struct Units {
    scale: Option<(ChartScale, f64)>,
}

impl Units {
    pub fn new(
        physical: bool,
        delta: Option<f64>,
        hbar: Option<f64>,
        mass: Option<f64>,
    ) -> Result<Units, ConfigError> {
        if !physical {
            return Ok(Units { scale: None });
        }
        let delta = delta.unwrap_or(1.0);
        if !(delta > 0.0) {
            return Err(err("delta must be positive"));
        }
        let chart = ChartScale::new(hbar.unwrap_or(1.0), mass.unwrap_or(1.0))
            .map_err(|e| err(e.to_string()))?;
        Ok(Units { scale: Some((chart, delta)) })
    }

    pub fn time_in(&self, t: f64) -> f64 {
        match self.scale {
            Some((chart, delta)) => chart.dimensionless_time(t, delta),
            None => t,
        }
    }

    pub fn length_in(&self, x: f64) -> f64 {
        match self.scale {
            Some((chart, delta)) => chart.dimensionless_length(x, delta),
            None => x,
        }
    }

    /// Velocities scale as length over time.
    pub fn velocity_in(&self, v: f64) -> f64 {
        match self.scale {
            Some((chart, delta)) => {
                chart.dimensionless_length(v, delta) / chart.dimensionless_time(1.0, delta)
            }
            None => v,
        }
    }

    pub fn time_out(&self, t: f64) -> f64 {
        match self.scale {
            Some((chart, delta)) => chart.physical_time(t, delta),
            None => t,
        }
    }

    pub fn length_out(&self, x: f64) -> f64 {
        match self.scale {
            Some((chart, delta)) => chart.physical_length(x, delta),
            None => x,
        }
    }

    /// Jacobian factor turning a density over dimensionless time into a
    /// density over physical time.
    pub fn time_density_out(&self, w: f64) -> f64 {
        match self.scale {
            Some((chart, delta)) => w * chart.dimensionless_time(1.0, delta),
            None => w,
        }
    }
}

/// Build the packet: the `--packet` flag value wins, then the file section.
pub fn build_packet(flag: Option<&str>, section: Option<&PacketSection>) -> Result<Packet, ConfigError> {
    let kind = flag
        .map(str::to_owned)
        .or_else(|| section.and_then(|s| s.kind.clone()))
        .unwrap_or_else(|| "gaussian".to_owned());
    match kind.as_str() {
        "gaussian" => Ok(Packet::gaussian()),
        "superposition" => {
            let terms = section
                .and_then(|s| s.terms.as_ref())
                .ok_or_else(|| err("packet kind 'superposition' needs a [[packet.terms]] list"))?;
            let terms: Vec<PacketTerm> = terms
                .iter()
                .map(|t| {
                    PacketTerm::new(
                        Complex64::new(t.coefficient_re, t.coefficient_im),
                        GalileanBoost::new(t.boost_v, t.reflect, t.shift_t, t.shift_x, t.phase_c),
                    )
                })
                .collect();
            Packet::superposed(terms).map_err(|e| err(e.to_string()))
        }
        other => Err(err(format!(
            "unknown packet kind '{other}' (expected 'gaussian' or 'superposition')"
        ))),
    }
}

/// Region parameters after merging flags over the file section, still in
/// input units.
#[derive(Debug, Default, Clone, Copy)]
pub struct RegionFlags {
    pub level: Option<f64>,
    pub x_lo: Option<f64>,
    pub x_hi: Option<f64>,
    pub drift: Option<f64>,
    pub t_on: Option<f64>,
    pub t_off: Option<f64>,
}

/// Build the detector region. `default_t_off` (already dimensionless) closes
/// the window when neither flag nor file provides an off time.
pub fn build_region(
    flags: RegionFlags,
    section: Option<&RegionSection>,
    units: &Units,
    default_t_off: f64,
) -> Result<Region, ConfigError> {
    let sec = |f: fn(&RegionSection) -> Option<f64>| section.and_then(f);
    let level = flags.level.or(sec(|s| s.level));
    let x_lo = flags.x_lo.or(sec(|s| s.x_lo));
    let x_hi = flags.x_hi.or(sec(|s| s.x_hi));
    let drift = flags.drift.or(sec(|s| s.drift)).map(|v| units.velocity_in(v)).unwrap_or(0.0);
    let t_on = flags.t_on.or(sec(|s| s.t_on)).map(|t| units.time_in(t)).unwrap_or(0.0);
    let t_off = flags
        .t_off
        .or(sec(|s| s.t_off))
        .map(|t| units.time_in(t))
        .unwrap_or(default_t_off);

    let kind = section
        .and_then(|s| s.kind.clone())
        .unwrap_or_else(|| if x_lo.is_some() || x_hi.is_some() { "slab" } else { "point" }.into());
    match kind.as_str() {
        "point" => {
            let level = level.ok_or_else(|| err("point detector needs --level"))?;
            Region::moving_point_detector(units.length_in(level), drift, t_on, t_off)
                .map_err(|e| err(e.to_string()))
        }
        "slab" => {
            let (lo, hi) = match (x_lo, x_hi) {
                (Some(lo), Some(hi)) => (lo, hi),
                _ => return Err(err("slab region needs --x-lo and --x-hi")),
            };
            Region::moving_slab(units.length_in(lo), units.length_in(hi), drift, t_on, t_off)
                .map_err(|e| err(e.to_string()))
        }
        other => Err(err(format!("unknown region kind '{other}' (expected 'point' or 'slab')"))),
    }
}

/// Detection settings from the file section plus the `--numeric` flag.
pub fn build_settings(
    section: Option<&SettingsSection>,
    force_numeric_flag: bool,
) -> Result<DetectionSettings, ConfigError> {
    let mut settings = DetectionSettings::default();
    let mut integrator = IntegratorSettings::default();
    if let Some(s) = section {
        if let Some(v) = s.reference_time {
            settings.reference_time = v;
        }
        if let Some(v) = s.window_sigmas {
            settings.window_sigmas = v;
        }
        if let Some(v) = s.grid_points {
            settings.grid_points = v;
        }
        if let Some(v) = s.boundary_tol {
            settings.boundary_tol = v;
        }
        if let Some(v) = s.error_budget {
            settings.error_budget = v;
        }
        if let Some(v) = s.quad_tol {
            settings.quad_tol = v;
        }
        if let Some(v) = s.predicate_samples {
            settings.predicate_samples = v;
        }
        if let Some(v) = s.force_numeric {
            settings.force_numeric = v;
        }
        if let Some(v) = s.rel_tol {
            integrator.rel_tol = v;
        }
        if let Some(v) = s.abs_tol {
            integrator.abs_tol = v;
        }
        if let Some(v) = s.max_step {
            integrator.max_step = v;
        }
        if let Some(v) = s.event_refine_tol {
            integrator.event_refine_tol = v;
        }
    }
    settings.integrator = integrator;
    if force_numeric_flag {
        settings.force_numeric = true;
    }
    Ok(settings)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Spacing {
    Linear,
    Log,
}

/// A fully merged time grid, already dimensionless.
pub struct TimeGrid {
    pub values: Vec<f64>,
}

pub fn build_grid(
    t_min: Option<f64>,
    t_max: Option<f64>,
    points: Option<usize>,
    spacing: Option<&str>,
    section: Option<&GridSection>,
    units: &Units,
    defaults: (f64, f64, usize, Spacing),
) -> Result<TimeGrid, ConfigError> {
    let sec_spacing = section.and_then(|s| s.spacing.as_deref().map(str::to_owned));
    let t_min = t_min
        .or(section.and_then(|s| s.t_min))
        .map(|t| units.time_in(t))
        .unwrap_or(defaults.0);
    let t_max = t_max
        .or(section.and_then(|s| s.t_max))
        .map(|t| units.time_in(t))
        .unwrap_or(defaults.1);
    let points = points.or(section.and_then(|s| s.points)).unwrap_or(defaults.2);
    let spacing = match spacing.map(str::to_owned).or(sec_spacing) {
        None => defaults.3,
        Some(s) if s == "linear" => Spacing::Linear,
        Some(s) if s == "log" => Spacing::Log,
        Some(other) => {
            return Err(err(format!("unknown spacing '{other}' (expected 'linear' or 'log')")))
        }
    };

    if points < 2 {
        return Err(err("grid needs at least 2 points"));
    }
    if !(t_min < t_max) {
        return Err(err("grid needs t_min < t_max"));
    }
    let values = match spacing {
        Spacing::Linear => (0..points)
            .map(|i| t_min + (t_max - t_min) * i as f64 / (points - 1) as f64)
            .collect(),
        Spacing::Log => {
            if !(t_min > 0.0) {
                return Err(err("log spacing needs t_min > 0"));
            }
            let (a, b) = (t_min.ln(), t_max.ln());
            (0..points)
                .map(|i| (a + (b - a) * i as f64 / (points - 1) as f64).exp())
                .collect()
        }
    };
    Ok(TimeGrid { values })
}
