//! Air-to-material Fresnel coefficients with complex permittivity
//! `eps = eps_r' - j sigma / (2 pi f eps_0)`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::link::{SPEED_OF_LIGHT, VACUUM_PERMITTIVITY};
use crate::scenegen::Material;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Polarization {
    /// E perpendicular to the plane of incidence (s).
    TE,
    /// E in the plane of incidence (p).
    TM,
}

pub fn complex_permittivity(material: &Material, frequency: f64) -> Complex64 {
    let eps_r = material.relative_permittivity(frequency);
    let sigma = material.conductivity(frequency);
    Complex64::new(eps_r, -sigma / (2.0 * std::f64::consts::PI * frequency * VACUUM_PERMITTIVITY))
}

/// Complex reflection coefficient for incidence cosine `cos_theta_i`
/// (clamped to `[0, 1]`).
pub fn fresnel_reflection(material: &Material, cos_theta_i: f64, frequency: f64, pol: Polarization) -> Complex64 {
    reflection_from_eps(complex_permittivity(material, frequency), cos_theta_i, pol)
}

pub(crate) fn reflection_from_eps(eps: Complex64, cos_theta_i: f64, pol: Polarization) -> Complex64 {
    let c = cos_theta_i.clamp(0.0, 1.0);
    let root = (eps - (1.0 - c * c)).sqrt();
    match pol {
        Polarization::TE => (c - root) / (c + root),
        Polarization::TM => (eps * c - root) / (eps * c + root),
    }
}

/// Amplitude transmission through one slab of `material` crossed at
/// incidence cosine `cos_theta`: two interfaces with power transmittance
/// `1 - |Gamma(0)|^2` each, plus bulk attenuation over the chord
/// `thickness / cos_theta`.
pub fn slab_transmission(material: &Material, cos_theta: f64, frequency: f64) -> f64 {
    let eps = complex_permittivity(material, frequency);
    let g0 = reflection_from_eps(eps, 1.0, Polarization::TE).norm_sqr();
    let k0 = 2.0 * std::f64::consts::PI * frequency / SPEED_OF_LIGHT;
    let alpha = k0 * eps.sqrt().im.abs();
    let chord = material.thickness / cos_theta.abs().max(1e-3);
    // Power factor (1 - g0)^2 * exp(-2 alpha chord); amplitude is its root.
    (1.0 - g0) * (-alpha * chord).exp()
}
