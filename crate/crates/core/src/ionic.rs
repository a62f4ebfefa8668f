//! Pointwise membrane currents.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum IonicError {
    #[error("gating rate evaluated at v = {v}, within 1e-9 of the pole at -mu2")]
    NearPole { v: f64 },
}

/// Aliev-Panfilov parameters (dimensionless voltage in [0, 1]).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AlievPanfilov {
    pub a: f64,
    pub eps1: f64,
    pub g_a: f64,
    pub g_s: f64,
    pub mu1: f64,
    pub mu2: f64,
}

impl Default for AlievPanfilov {
    fn default() -> Self {
        Self { a: 0.1, eps1: 0.01, g_a: 8.0, g_s: 8.0, mu1: 0.07, mu2: 0.3 }
    }
}

impl AlievPanfilov {
    pub fn i_ion(&self, v: f64, w: f64) -> f64 {
        self.g_a * v * (v - self.a) * (v - 1.0) + v * w
    }

    pub fn di_ion_dv(&self, v: f64, w: f64) -> f64 {
        self.g_a * (3.0 * v * v - 2.0 * (1.0 + self.a) * v + self.a) + w
    }

    /// Minimum of `di_ion_dv` over all `v` at `w`; attained at `v = (1+a)/3`.
    pub fn min_di_ion_dv(&self, w: f64) -> f64 {
        self.di_ion_dv((1.0 + self.a) / 3.0, w)
    }

    fn check_pole(&self, v: f64) -> Result<f64, IonicError> {
        let d = v + self.mu2;
        if d.abs() < 1e-9 {
            return Err(IonicError::NearPole { v });
        }
        Ok(d)
    }

    /// Gating rate `R(v, w)`.
    pub fn r_gate(&self, v: f64, w: f64) -> Result<f64, IonicError> {
        let d = self.check_pole(v)?;
        let rate = self.eps1 + self.mu1 * w / d;
        Ok(0.25 * rate * (-w - self.g_s * v * (v - self.a - 1.0)))
    }

    pub fn dr_dw(&self, v: f64, w: f64) -> Result<f64, IonicError> {
        let d = self.check_pole(v)?;
        let rate = self.eps1 + self.mu1 * w / d;
        let drive = -w - self.g_s * v * (v - self.a - 1.0);
        Ok(0.25 * (self.mu1 / d * drive - rate))
    }
}

/// Ohmic gap junction, `I = v / R_g`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapJunction {
    pub r_g: f64,
}

impl Default for GapJunction {
    fn default() -> Self {
        Self { r_g: 4.5e-4 }
    }
}

impl GapJunction {
    pub fn current(&self, v: f64) -> f64 {
        v / self.r_g
    }

    pub fn conductance(&self) -> f64 {
        1.0 / self.r_g
    }
}

/// Current through an active membrane (monodomain tissue or the outer
/// membrane of a myocyte).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MembraneCurrent {
    AlievPanfilov { model: AlievPanfilov, gating: bool },
    /// `I = g v`, no gating.
    Linear { conductance: f64 },
    None,
}

impl MembraneCurrent {
    pub fn current(&self, v: f64, w: f64) -> f64 {
        match self {
            Self::AlievPanfilov { model, .. } => model.i_ion(v, w),
            Self::Linear { conductance } => conductance * v,
            Self::None => 0.0,
        }
    }

    pub fn dcurrent_dv(&self, v: f64, w: f64) -> f64 {
        match self {
            Self::AlievPanfilov { model, .. } => model.di_ion_dv(v, w),
            Self::Linear { conductance } => *conductance,
            Self::None => 0.0,
        }
    }

    pub fn gated(&self) -> Option<&AlievPanfilov> {
        match self {
            Self::AlievPanfilov { model, gating: true } => Some(model),
            _ => None,
        }
    }
}
