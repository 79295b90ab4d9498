//! Single knife-edge diffraction loss.

/// Knife-edge loss `J(nu)` in dB; zero for `nu <= -0.78`.
pub fn knife_edge_loss(nu: f64) -> f64 {
    if nu <= -0.78 {
        return 0.0;
    }
    let x = nu - 0.1;
    6.9 + 20.0 * ((x * x + 1.0).sqrt() + x).log10()
}

/// Fresnel–Kirchhoff parameter for an edge `h` meters into the direct path,
/// `d1` / `d2` meters from each terminal.
pub fn fresnel_kirchhoff_nu(h: f64, d1: f64, d2: f64, wavelength: f64) -> f64 {
    h * (2.0 * (d1 + d2) / (wavelength * d1 * d2)).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn clear_path_has_no_loss() {
        assert_eq!(knife_edge_loss(-2.0), 0.0);
        assert_eq!(knife_edge_loss(-0.78), 0.0);
    }

    #[test]
    fn grazing_edge() {
        // 6.9 + 20 log10(sqrt(1.01) - 0.1)
        let expected = 6.9 + 20.0 * (1.01f64.sqrt() - 0.1).log10();
        assert!((knife_edge_loss(0.0) - expected).abs() < 1e-12);
        assert!((knife_edge_loss(0.0) - 6.03).abs() < 0.01);
    }

    proptest! {
        #[test]
        fn monotone_beyond_threshold(a in -0.78f64..20.0, d in 0.0f64..10.0) {
            prop_assert!(knife_edge_loss(a + d) >= knife_edge_loss(a) - 1e-12);
        }
    }
}
