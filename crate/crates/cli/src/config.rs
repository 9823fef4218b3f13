//! Experiment configuration. Every field has a default, so an empty JSON
//! object runs the reference scenario.

use beamhop::array::{ArrayGeometry, ELEMENT_GAIN_DBI, POWER_PER_ELEMENT_W};
use beamhop::geometry::{GroundPoint, OrbitGeometry, EARTH_RADIUS_KM, SPEED_OF_LIGHT};
use beamhop::layout::{Design, LayoutSpec};
use beamhop::link::{LinkBudget, PowerScheme, SearchPolicy};
use beamhop::scheduler::{FrameConfig, Scheme};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("cannot parse {path}: {source}")]
    Parse {
        path: PathBuf,
        source: serde_json::Error,
    },
    #[error("{field}: {message}")]
    Invalid { field: String, message: String },
}

fn invalid(field: impl Into<String>, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        field: field.into(),
        message: message.into(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OrbitConfig {
    pub earth_radius_km: f64,
    pub orbit_height_km: f64,
    pub min_elevation_deg: f64,
    /// Subsatellite point the layouts are built around.
    pub sat_lat_deg: f64,
    pub sat_lon_deg: f64,
}

impl Default for OrbitConfig {
    fn default() -> Self {
        OrbitConfig {
            earth_radius_km: EARTH_RADIUS_KM,
            orbit_height_km: 1300.0,
            min_elevation_deg: 30.0,
            sat_lat_deg: 0.0,
            sat_lon_deg: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArrayConfig {
    pub elements: usize,
    pub spacing_wavelengths: f64,
    pub element_gain_dbi: f64,
    pub power_per_element_w: f64,
    /// Nadir -3 dB beamwidth used to size the layouts.
    pub nadir_beamwidth_deg: f64,
}

impl Default for ArrayConfig {
    fn default() -> Self {
        ArrayConfig {
            elements: 512,
            spacing_wavelengths: 0.65,
            element_gain_dbi: ELEMENT_GAIN_DBI,
            power_per_element_w: POWER_PER_ELEMENT_W,
            nadir_beamwidth_deg: 3.64,
        }
    }
}

/// A design given by reference name, or a custom one such as
/// `{"name": "C3", "kind": "C", "alpha": 0.6}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DesignEntry {
    Named(String),
    Custom {
        name: String,
        #[serde(flatten)]
        design: Design,
    },
}

impl DesignEntry {
    pub fn name(&self) -> &str {
        match self {
            DesignEntry::Named(n) => n,
            DesignEntry::Custom { name, .. } => name,
        }
    }

    pub fn design(&self) -> Option<Design> {
        match self {
            DesignEntry::Named(n) => Design::named(n),
            DesignEntry::Custom { design, .. } => Some(*design),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SchedulerConfig {
    pub frame: FrameConfig,
    pub schemes: Vec<Scheme>,
    pub n_hops: Vec<usize>,
    pub max_beams_per_cell: usize,
}

impl Default for SchedulerConfig {
    fn default() -> Self {
        SchedulerConfig {
            frame: FrameConfig::default(),
            schemes: vec![Scheme::HalfSlot, Scheme::FullSlot, Scheme::ExtraSweep],
            n_hops: vec![62, 107],
            max_beams_per_cell: 32,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub orbit: OrbitConfig,
    pub array: ArrayConfig,
    pub link: LinkBudget,
    pub designs: Vec<DesignEntry>,
    /// Per-design power scheme; designs not listed use their reference scheme.
    pub power_schemes: BTreeMap<String, PowerScheme>,
    pub search: SearchPolicy,
    pub sensing_spacing_km: f64,
    /// Grid origin shift from the subsatellite point, km east and north.
    pub grid_offset_km: [f64; 2],
    pub scheduler: SchedulerConfig,
    pub output_dir: PathBuf,
    /// Worker threads for the SINR evaluation; all cores when absent.
    pub threads: Option<usize>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            orbit: OrbitConfig::default(),
            array: ArrayConfig::default(),
            link: LinkBudget::default(),
            designs: Design::REFERENCE_NAMES
                .iter()
                .map(|n| DesignEntry::Named(n.to_string()))
                .collect(),
            power_schemes: BTreeMap::new(),
            search: SearchPolicy::default(),
            sensing_spacing_km: 15.0,
            grid_offset_km: [0.0, 0.0],
            scheduler: SchedulerConfig::default(),
            output_dir: PathBuf::from("out"),
            threads: None,
        }
    }
}

fn positive(field: &str, x: f64) -> Result<(), ConfigError> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(invalid(field, format!("must be positive, got {x}")))
    }
}

fn ascending_table(field: &str, t: &[(f64, f64)]) -> Result<(), ConfigError> {
    if t.is_empty() {
        return Err(invalid(field, "table is empty"));
    }
    if t.windows(2).any(|w| !(w[1].0 > w[0].0)) {
        return Err(invalid(field, "elevations must be strictly ascending"));
    }
    if t.iter().any(|&(x, y)| !x.is_finite() || !y.is_finite()) {
        return Err(invalid(field, "entries must be finite"));
    }
    Ok(())
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        let cfg: ExperimentConfig =
            serde_json::from_str(&text).map_err(|source| ConfigError::Parse {
                path: path.to_path_buf(),
                source,
            })?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let o = &self.orbit;
        positive("orbit.earth_radius_km", o.earth_radius_km)?;
        positive("orbit.orbit_height_km", o.orbit_height_km)?;
        if !(o.min_elevation_deg > 0.0 && o.min_elevation_deg < 90.0) {
            return Err(invalid("orbit.min_elevation_deg", "must lie in (0, 90)"));
        }
        if !(o.sat_lat_deg.abs() <= 90.0) {
            return Err(invalid("orbit.sat_lat_deg", "must lie in [-90, 90]"));
        }
        if !o.sat_lon_deg.is_finite() {
            return Err(invalid("orbit.sat_lon_deg", "must be finite"));
        }

        let a = &self.array;
        if a.elements == 0 {
            return Err(invalid("array.elements", "must be at least 1"));
        }
        positive("array.spacing_wavelengths", a.spacing_wavelengths)?;
        positive("array.power_per_element_w", a.power_per_element_w)?;
        positive("array.nadir_beamwidth_deg", a.nadir_beamwidth_deg)?;
        if !a.element_gain_dbi.is_finite() {
            return Err(invalid("array.element_gain_dbi", "must be finite"));
        }

        let l = &self.link;
        positive("link.frequency_hz", l.frequency_hz)?;
        positive("link.bandwidth_hz", l.bandwidth_hz)?;
        ascending_table("link.atmospheric_loss_db", &l.atmospheric_loss_db)?;
        ascending_table("link.g_over_t_db", &l.g_over_t_db)?;
        if !l.sinr_threshold_db.is_finite() {
            return Err(invalid("link.sinr_threshold_db", "must be finite"));
        }

        let s = &self.search;
        if s.start == 0 {
            return Err(invalid("search.start", "must be at least 1"));
        }
        if let Some(max) = s.max {
            if max < s.start {
                return Err(invalid(
                    "search.max",
                    format!("must be at least search.start ({})", s.start),
                ));
            }
        }
        if !(s.percentile > 0.0 && s.percentile < 1.0) {
            return Err(invalid("search.percentile", "must lie in (0, 1)"));
        }
        positive("sensing_spacing_km", self.sensing_spacing_km)?;
        if self.grid_offset_km.iter().any(|x| !x.is_finite()) {
            return Err(invalid("grid_offset_km", "must be finite"));
        }

        if self.designs.is_empty() {
            return Err(invalid("designs", "list is empty"));
        }
        let geo = self.geometry();
        let mut names = Vec::new();
        for (k, entry) in self.designs.iter().enumerate() {
            let field = format!("designs[{k}]");
            let design = entry
                .design()
                .ok_or_else(|| invalid(&field, format!("unknown design '{}'", entry.name())))?;
            if names.contains(&entry.name()) {
                return Err(invalid(
                    &field,
                    format!("duplicate design name '{}'", entry.name()),
                ));
            }
            names.push(entry.name());
            LayoutSpec::new(design, geo, a.nadir_beamwidth_deg)
                .validate()
                .map_err(|e| invalid(&field, format!("{} ({})", e, entry.name())))?;
        }
        for name in self.power_schemes.keys() {
            if !names.contains(&name.as_str()) {
                return Err(invalid(
                    format!("power_schemes.{name}"),
                    "not in the design list",
                ));
            }
        }

        let sc = &self.scheduler;
        sc.frame
            .validate()
            .map_err(|e| invalid("scheduler.frame", e.to_string()))?;
        if sc.schemes.is_empty() {
            return Err(invalid("scheduler.schemes", "list is empty"));
        }
        for (k, scheme) in sc.schemes.iter().enumerate() {
            check_scheme_period(*scheme, sc.frame.ssb_period_ms)
                .map_err(|m| invalid(format!("scheduler.schemes[{k}]"), m))?;
        }
        if let Some(k) = sc.n_hops.iter().position(|&n| n == 0) {
            return Err(invalid(
                format!("scheduler.n_hops[{k}]"),
                "must be at least 1",
            ));
        }
        if sc.max_beams_per_cell == 0 {
            return Err(invalid(
                "scheduler.max_beams_per_cell",
                "must be at least 1",
            ));
        }
        if self.threads == Some(0) {
            return Err(invalid("threads", "must be at least 1"));
        }
        Ok(())
    }

    pub fn wavelength_m(&self) -> f64 {
        SPEED_OF_LIGHT / self.link.frequency_hz
    }

    pub fn geometry(&self) -> OrbitGeometry {
        OrbitGeometry {
            earth_radius_km: self.orbit.earth_radius_km,
            orbit_height_km: self.orbit.orbit_height_km,
            min_elevation_deg: self.orbit.min_elevation_deg,
            wavelength_m: self.wavelength_m(),
        }
    }

    pub fn array(&self) -> ArrayGeometry {
        let wl = self.wavelength_m();
        let mut arr =
            ArrayGeometry::build(self.array.elements, self.array.spacing_wavelengths * wl, wl);
        arr.element_gain_dbi = self.array.element_gain_dbi;
        arr.power_per_element_w = self.array.power_per_element_w;
        arr
    }

    pub fn sat_nadir(&self) -> GroundPoint {
        GroundPoint::new(self.orbit.sat_lat_deg, self.orbit.sat_lon_deg)
    }

    pub fn layout_spec(&self, entry: &DesignEntry) -> LayoutSpec {
        let mut spec = LayoutSpec::new(
            entry.design().expect("validated design"),
            self.geometry(),
            self.array.nadir_beamwidth_deg,
        );
        spec.grid_offset_km = self.grid_offset_km;
        spec
    }

    pub fn power_scheme(&self, name: &str) -> PowerScheme {
        self.power_schemes
            .get(name)
            .copied()
            .unwrap_or_else(|| PowerScheme::default_for(name))
    }

    pub fn design_entry(&self, name: &str) -> Option<DesignEntry> {
        if let Some(e) = self.designs.iter().find(|e| e.name() == name) {
            return Some(e.clone());
        }
        Design::named(name).map(|_| DesignEntry::Named(name.to_string()))
    }
}

pub fn check_scheme_period(scheme: Scheme, period_ms: u32) -> Result<(), String> {
    if scheme == Scheme::ExtraSweep160 && period_ms != 160 {
        return Err(format!(
            "extra_sweep160 needs a 160 ms SSB period, got {period_ms} ms"
        ));
    }
    Ok(())
}
