//! Transmit antenna patterns.
//!
//! MIMO configurations are uniform planar arrays of isotropic elements at
//! half-wavelength spacing, all excited in phase, broadside along the
//! boresight. Array columns run horizontally (perpendicular to the
//! boresight), rows along the remaining axis. The power pattern is
//! normalized so its mean over the unit sphere is exactly one, i.e. the
//! array radiates the same total power as an isotropic source:
//!
//! `G(d) = |AF(d)|^2 / S`, `S = sum_{a,b} sinc(pi * |r_a - r_b| / (lambda/2))`
//!
//! where the sum runs over all element pairs. `S` is the closed-form sphere
//! average of `|AF|^2`.

use super::{AntennaConfig, AntennaKind};
use crate::geometry::Vec3;

#[derive(Clone, Debug, PartialEq)]
pub struct ArrayPattern {
    cols: usize,
    rows: usize,
    boresight: Vec3,
    horizontal: Vec3,
    vertical: Vec3,
    norm: f64,
}

impl ArrayPattern {
    pub fn new(cfg: &AntennaConfig) -> Self {
        let (cols, rows) = cfg.kind.array_shape();
        let b = cfg.boresight().normalize();
        let mut h = Vec3::z().cross(&b);
        if h.norm() < 1e-9 {
            h = Vec3::x();
        }
        let h = h.normalize();
        let v = b.cross(&h);
        ArrayPattern {
            cols,
            rows,
            boresight: b,
            horizontal: h,
            vertical: v,
            norm: pair_sinc_sum(cols, rows),
        }
    }

    pub fn is_isotropic(&self) -> bool {
        self.cols * self.rows == 1
    }

    /// Linear power gain toward unit direction `dir`.
    pub fn gain(&self, dir: &Vec3) -> f64 {
        if self.is_isotropic() {
            return 1.0;
        }
        let u = dir.dot(&self.horizontal);
        let v = dir.dot(&self.vertical);
        let af = linear_factor(self.cols, u) * linear_factor(self.rows, v);
        af * af / self.norm
    }

    /// Gain along the boresight.
    pub fn peak_gain(&self) -> f64 {
        self.gain(&self.boresight)
    }
}

/// `sin(n pi x / 2) / sin(pi x / 2)`, the half-wave array factor of `n`
/// in-phase elements along an axis with direction cosine `x`.
fn linear_factor(n: usize, x: f64) -> f64 {
    let half = 0.5 * std::f64::consts::PI * x;
    let s = half.sin();
    if s.abs() < 1e-12 {
        // x = 0 or x = +-2 (only 0 is reachable for |x| <= 1).
        return n as f64;
    }
    (n as f64 * half).sin() / s
}

fn pair_sinc_sum(cols: usize, rows: usize) -> f64 {
    let mut s = 0.0;
    for a in 0..cols as i64 {
        for b in 0..rows as i64 {
            for c in 0..cols as i64 {
                for d in 0..rows as i64 {
                    let r = (((a - c).pow(2) + (b - d).pow(2)) as f64).sqrt();
                    s += if r == 0.0 {
                        1.0
                    } else {
                        let x = std::f64::consts::PI * r;
                        x.sin() / x
                    };
                }
            }
        }
    }
    s
}

/// Linear power gain of `antenna` toward `direction`.
pub fn antenna_gain(antenna: &AntennaConfig, direction: &Vec3, _frequency: f64) -> f64 {
    if antenna.kind == AntennaKind::Siso {
        return 1.0;
    }
    ArrayPattern::new(antenna).gain(direction)
}
