//! Deterministic radio propagation onto VAS receiver probes.

mod antenna;
mod diffraction;
mod fresnel;
mod link;
mod map;
mod tracer;

pub use antenna::{antenna_gain, ArrayPattern};
pub use diffraction::{fresnel_kirchhoff_nu, knife_edge_loss};
pub use fresnel::{complex_permittivity, fresnel_reflection, slab_transmission, Polarization};
pub use link::{friis_gain, noise_power_dbm, BOLTZMANN, SPEED_OF_LIGHT, VACUUM_PERMITTIVITY};
pub use map::{compute_radio_map, face_gains, radio_map_with, RadioMap};
pub use tracer::{compute_paths, InteractionKind, PropagationPath, Tracer, TxContext, MAX_SPECULAR_ORDER};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Vec3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AntennaKind {
    #[serde(rename = "SISO")]
    Siso,
    #[serde(rename = "MIMO4x4")]
    Mimo4x4,
    #[serde(rename = "MIMO8x4")]
    Mimo8x4,
}

impl AntennaKind {
    /// `(columns, rows)` of the planar array.
    pub fn array_shape(self) -> (usize, usize) {
        match self {
            AntennaKind::Siso => (1, 1),
            AntennaKind::Mimo4x4 => (4, 4),
            AntennaKind::Mimo8x4 => (8, 4),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            AntennaKind::Siso => "SISO",
            AntennaKind::Mimo4x4 => "MIMO4x4",
            AntennaKind::Mimo8x4 => "MIMO8x4",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AntennaConfig {
    pub kind: AntennaKind,
    /// Unit boresight direction (array broadside).
    pub boresight: [f64; 3],
    /// Element spacing in wavelengths.
    #[serde(default = "half_wave")]
    pub element_spacing: f64,
}

fn half_wave() -> f64 {
    0.5
}

impl AntennaConfig {
    pub fn siso() -> Self {
        AntennaConfig {
            kind: AntennaKind::Siso,
            boresight: [1.0, 0.0, 0.0],
            element_spacing: 0.5,
        }
    }

    pub fn new(kind: AntennaKind, boresight: Vec3) -> Self {
        let b = boresight.normalize();
        AntennaConfig {
            kind,
            boresight: [b.x, b.y, b.z],
            element_spacing: 0.5,
        }
    }

    pub fn boresight(&self) -> Vec3 {
        Vec3::new(self.boresight[0], self.boresight[1], self.boresight[2])
    }
}

/// Propagation mechanisms.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Toggles {
    pub los: bool,
    pub specular_reflection: bool,
    pub refraction: bool,
    pub diffraction: bool,
}

impl Toggles {
    pub fn all() -> Self {
        Toggles {
            los: true,
            specular_reflection: true,
            refraction: true,
            diffraction: true,
        }
    }

    pub fn los_only() -> Self {
        Toggles {
            los: true,
            specular_reflection: false,
            refraction: false,
            diffraction: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadioConfig {
    /// Hz.
    pub frequency: f64,
    /// Hz.
    pub bandwidth: f64,
    pub tx_power_dbm: f64,
    /// Kelvin.
    pub temperature: f64,
    /// Maximum interactions (reflections, diffractions, transmissions) per path.
    pub max_depth: u32,
    /// Cap on image-method reflection order.
    #[serde(default = "default_specular_cap")]
    pub specular_depth_cap: u32,
    pub toggles: Toggles,
    pub antenna: AntennaConfig,
    /// Co-channel transmitters whose received power joins the SINR
    /// denominator.
    #[serde(default)]
    pub interferers: Vec<[f64; 3]>,
}

fn default_specular_cap() -> u32 {
    3
}

impl Default for RadioConfig {
    fn default() -> Self {
        RadioConfig {
            frequency: 3.5e9,
            bandwidth: 1e6,
            tx_power_dbm: 30.0,
            temperature: 293.0,
            max_depth: 20,
            specular_depth_cap: default_specular_cap(),
            toggles: Toggles::all(),
            antenna: AntennaConfig::siso(),
            interferers: Vec::new(),
        }
    }
}

impl RadioConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidRadioParam(m.into()));
        if !(self.frequency > 0.0 && self.frequency.is_finite()) {
            return bad("frequency must be > 0");
        }
        if !(self.bandwidth > 0.0 && self.bandwidth.is_finite()) {
            return bad("bandwidth must be > 0");
        }
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return bad("temperature must be > 0");
        }
        if !self.tx_power_dbm.is_finite() {
            return bad("tx power must be finite");
        }
        if (self.antenna.boresight().norm() - 1.0).abs() > 1e-9 {
            return bad("antenna boresight must be a unit vector");
        }
        if self.antenna.element_spacing != 0.5 {
            return bad("only half-wavelength element spacing is supported");
        }
        Ok(())
    }

    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.frequency
    }

    /// Effective image-method order.
    pub fn specular_depth(&self) -> u32 {
        if self.toggles.specular_reflection {
            self.max_depth.min(self.specular_depth_cap)
        } else {
            0
        }
    }
}

/// Linear power ratio to dB.
pub fn to_db(x: f64) -> f64 {
    10.0 * x.log10()
}
