//! Simulation configuration read from TOML.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::adaptivity::DropMode;
use crate::assembly::Physics;
use crate::ionic::{AlievPanfilov, MembraneCurrent};
use crate::mesh::{DofMode, EmiLayout, Rect};
use crate::sparse::CgSettings;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config: {0}")]
    Io(#[from] std::io::Error),
    #[error("invalid config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CurrentKind {
    AlievPanfilov,
    Linear,
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub kind: DofMode,
    #[serde(default = "default_current")]
    pub current: CurrentKind,
    /// Gating dynamics; defaults to on for monodomain and off for EMI.
    #[serde(default)]
    pub gating: Option<bool>,
    #[serde(default)]
    pub aliev_panfilov: AlievPanfilov,
    /// Conductance of the linear membrane current.
    #[serde(default = "default_linear")]
    pub linear_conductance: f64,
}

fn default_current() -> CurrentKind {
    CurrentKind::AlievPanfilov
}

fn default_linear() -> f64 {
    1.0
}

impl ModelConfig {
    pub fn gating_enabled(&self) -> bool {
        self.current == CurrentKind::AlievPanfilov
            && self.gating.unwrap_or(self.kind == DofMode::Monodomain)
    }

    pub fn membrane_current(&self) -> MembraneCurrent {
        match self.current {
            CurrentKind::AlievPanfilov => {
                MembraneCurrent::AlievPanfilov { model: self.aliev_panfilov, gating: self.gating_enabled() }
            }
            CurrentKind::Linear => MembraneCurrent::Linear { conductance: self.linear_conductance },
            CurrentKind::None => MembraneCurrent::None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum MeshConfig {
    /// Structured grid on `[0, extent]`.
    Cartesian { cells: Vec<usize>, extent: Vec<f64> },
    /// `cols x rows` myocytes of size `cell` with lower-left corner at the origin.
    EmiGrid {
        cols: usize,
        rows: usize,
        cell: [f64; 2],
        #[serde(default)]
        gap: f64,
        spacing: f64,
        margin: f64,
    },
    /// Explicit myocyte rectangles.
    EmiLayout {
        spacing: f64,
        myocytes: Vec<Rect>,
        #[serde(default)]
        bath_margin: f64,
        #[serde(default)]
        bath: Option<Rect>,
    },
}

impl MeshConfig {
    pub fn emi_layout(&self) -> Option<EmiLayout> {
        match self {
            Self::Cartesian { .. } => None,
            Self::EmiGrid { cols, rows, cell, gap, spacing, margin } => {
                Some(EmiLayout::grid(*cols, *rows, *cell, *gap, *spacing, *margin))
            }
            Self::EmiLayout { spacing, myocytes, bath_margin, bath } => Some(EmiLayout {
                spacing: *spacing,
                myocytes: myocytes.clone(),
                bath_margin: *bath_margin,
                bath: *bath,
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SdcConfig {
    #[serde(default = "default_nodes")]
    pub nodes: usize,
    pub dt: f64,
    pub end_time: f64,
    pub tol: f64,
    #[serde(default = "default_max_sweeps")]
    pub max_sweeps: usize,
    #[serde(default = "default_cg_reduction")]
    pub cg_reduction: f64,
    #[serde(default = "default_cg_max_iter")]
    pub cg_max_iter: usize,
}

fn default_nodes() -> usize {
    3
}

fn default_max_sweeps() -> usize {
    25
}

fn default_cg_reduction() -> f64 {
    1e-3
}

fn default_cg_max_iter() -> usize {
    2000
}

impl SdcConfig {
    pub fn cg(&self) -> CgSettings {
        CgSettings { reduction: self.cg_reduction, max_iter: self.cg_max_iter, ..CgSettings::default() }
    }

    /// Number of fixed steps covering `end_time`.
    pub fn num_steps(&self) -> usize {
        let n = self.end_time / self.dt;
        // Tolerate representation error in end_time / dt.
        (n - 1e-9 * n.max(1.0)).ceil().max(1.0) as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdaptivityConfig {
    #[serde(default = "default_mode")]
    pub mode: DropMode,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    /// Absolute drop tolerance replacing `alpha * tol` in empirical mode.
    #[serde(default)]
    pub tol_drop: Option<f64>,
}

fn default_mode() -> DropMode {
    DropMode::Empirical
}

fn default_alpha() -> f64 {
    0.1
}

impl Default for AdaptivityConfig {
    fn default() -> Self {
        Self { mode: default_mode(), alpha: default_alpha(), tol_drop: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum StimulusConfig {
    /// Potential set to `value` on `{x : |x - center| <= radius}`.
    Ball { center: Vec<f64>, radius: f64, value: f64 },
    /// Potential set to `value` on the axis-aligned box `[min, max]`.
    Box { min: Vec<f64>, max: Vec<f64>, value: f64 },
    /// Intracellular potential of one myocyte (1-based id) set to `value`.
    Myocyte { id: u32, value: f64 },
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_dir")]
    pub dir: String,
    /// Snapshot every this many steps; 0 disables snapshots.
    #[serde(default = "default_every")]
    pub snapshot_every: usize,
    #[serde(default = "default_true")]
    pub vtk: bool,
}

fn default_dir() -> String {
    "out".into()
}

fn default_every() -> usize {
    10
}

fn default_true() -> bool {
    true
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: default_dir(), snapshot_every: default_every(), vtk: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    pub model: ModelConfig,
    pub mesh: MeshConfig,
    #[serde(default)]
    pub physics: Physics,
    pub sdc: SdcConfig,
    #[serde(default)]
    pub adaptivity: AdaptivityConfig,
    pub stimulus: StimulusConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

impl SimulationConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &std::path::Path) -> Result<Self, ConfigError> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// SHA-256 of the canonical TOML form.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_toml().as_bytes()))
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        self.physics.validate().map_err(ConfigError::Invalid)?;
        let s = &self.sdc;
        if !(s.dt > 0.0 && s.dt.is_finite()) {
            return bad(format!("sdc.dt must be positive, got {}", s.dt));
        }
        if !(s.end_time >= s.dt) {
            return bad(format!("sdc.end_time {} is shorter than one step {}", s.end_time, s.dt));
        }
        if !(s.tol > 0.0) {
            return bad(format!("sdc.tol must be positive, got {}", s.tol));
        }
        if s.max_sweeps == 0 || s.cg_max_iter == 0 {
            return bad("sdc.max_sweeps and sdc.cg_max_iter must be at least 1".into());
        }
        if !(s.cg_reduction > 0.0 && s.cg_reduction < 1.0) {
            return bad(format!("sdc.cg_reduction must lie in (0, 1), got {}", s.cg_reduction));
        }
        let a = &self.adaptivity;
        if !(a.alpha > 0.0 && a.alpha <= 1.0) {
            return bad(format!("adaptivity.alpha must lie in (0, 1], got {}", a.alpha));
        }
        if let Some(t) = a.tol_drop {
            if !(t >= 0.0 && t.is_finite()) {
                return bad(format!("adaptivity.tol_drop must be nonnegative, got {t}"));
            }
        }
        let emi = self.model.kind == DofMode::Emi;
        match (&self.mesh, emi) {
            (MeshConfig::Cartesian { .. }, false) => {}
            (MeshConfig::Cartesian { .. }, true) => return bad("EMI models need an emi-grid or emi-layout mesh".into()),
            (_, false) => return bad("monodomain models need a cartesian mesh".into()),
            _ => {}
        }
        match &self.stimulus {
            StimulusConfig::Ball { radius, center, .. } => {
                if !(*radius > 0.0) {
                    return bad(format!("stimulus.radius must be positive, got {radius}"));
                }
                if center.is_empty() || center.len() > 2 {
                    return bad("stimulus.center needs one or two coordinates".into());
                }
            }
            StimulusConfig::Box { min, max, .. } => {
                if min.is_empty() || min.len() > 2 || min.len() != max.len() {
                    return bad("stimulus.min and stimulus.max need matching one or two coordinates".into());
                }
                if min.iter().zip(max).any(|(a, b)| !(a <= b)) {
                    return bad("stimulus box has min > max".into());
                }
            }
            StimulusConfig::Myocyte { id, .. } => {
                if !emi || *id == 0 {
                    return bad("stimulus kind myocyte needs an EMI model and an id >= 1".into());
                }
            }
            StimulusConfig::None => {}
        }
        Ok(())
    }
}
