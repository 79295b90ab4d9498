use crate::error::{Error, Result};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
pub const BOLTZMANN: f64 = 1.380_649e-23;
pub const VACUUM_PERMITTIVITY: f64 = 8.854_187_812_8e-12;

/// Thermal noise power `k_B T B` in dBm.
pub fn noise_power_dbm(bandwidth_hz: f64, temperature_k: f64) -> Result<f64> {
    if !(bandwidth_hz > 0.0) || !bandwidth_hz.is_finite() {
        return Err(Error::InvalidRadioParam(format!("bandwidth {bandwidth_hz} must be > 0")));
    }
    if !(temperature_k > 0.0) || !temperature_k.is_finite() {
        return Err(Error::InvalidRadioParam(format!("temperature {temperature_k} must be > 0")));
    }
    Ok(10.0 * (BOLTZMANN * temperature_k * bandwidth_hz / 1e-3).log10())
}

/// Free-space power gain `(lambda / (4 pi d))^2`.
pub fn friis_gain(wavelength: f64, distance: f64) -> f64 {
    let a = wavelength / (4.0 * std::f64::consts::PI * distance);
    a * a
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_noise_floor() {
        let n = noise_power_dbm(1e6, 293.0).unwrap();
        assert!((n - (-113.93)).abs() < 0.01, "{n}");
    }

    #[test]
    fn doubling_bandwidth_adds_three_db() {
        let a = noise_power_dbm(1e6, 293.0).unwrap();
        let b = noise_power_dbm(2e6, 293.0).unwrap();
        assert!((b - a - 10.0 * 2f64.log10()).abs() < 1e-12);
        assert!((b - a - 3.0103).abs() < 1e-4);
    }

    #[test]
    fn non_positive_inputs_fail() {
        assert!(noise_power_dbm(1e6, 0.0).is_err());
        assert!(noise_power_dbm(0.0, 293.0).is_err());
        assert!(noise_power_dbm(-1.0, 293.0).is_err());
    }
}
