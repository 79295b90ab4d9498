//! Pixel-aligned path-gain and SINR rasters over VAS receiver probes.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::link::noise_power_dbm;
use super::tracer::Tracer;
use super::{to_db, RadioConfig};
use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::render::CameraModel;
use crate::scenegen::Scene;
use crate::vas::VasMesh;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadioMap {
    pub width: usize,
    pub height: usize,
    /// Row-major, NaN where no face or no path.
    pub path_gain_db: Vec<f32>,
    pub sinr_db: Vec<f32>,
    /// Linear gain per VAS face, in face order.
    pub per_face_gain: Vec<f64>,
}

impl RadioMap {
    /// Aggregates per-face gains into pixels (mean of the pixel's faces).
    ///
    /// `interference_mw` holds, per face, the received interference power in
    /// milliwatts; pass an empty slice for a single transmitter.
    pub fn from_face_gains(mesh: &VasMesh, per_face_gain: Vec<f64>, interference_mw: &[f64], config: &RadioConfig) -> Result<Self> {
        if per_face_gain.len() != mesh.faces.len() {
            return Err(Error::DimensionMismatch {
                expected: (mesh.faces.len(), 1),
                got: (per_face_gain.len(), 1),
            });
        }
        let noise_mw = 10f64.powf(noise_power_dbm(config.bandwidth, config.temperature)? / 10.0);
        let n = mesh.width * mesh.height;
        let mut sum = vec![0.0f64; n];
        let mut isum = vec![0.0f64; n];
        let mut count = vec![0u32; n];
        for (i, (g, p)) in per_face_gain.iter().zip(&mesh.pixel_of_face).enumerate() {
            let k = p.v as usize * mesh.width + p.u as usize;
            sum[k] += g;
            isum[k] += interference_mw.get(i).copied().unwrap_or(0.0);
            count[k] += 1;
        }
        let mut path_gain_db = vec![f32::NAN; n];
        let mut sinr_db = vec![f32::NAN; n];
        for k in 0..n {
            if count[k] == 0 {
                continue;
            }
            let g = sum[k] / count[k] as f64;
            if g > 0.0 {
                let pg = to_db(g);
                let denom = noise_mw + isum[k] / count[k] as f64;
                path_gain_db[k] = pg as f32;
                sinr_db[k] = (config.tx_power_dbm + pg - to_db(denom)) as f32;
            }
        }
        Ok(RadioMap {
            width: mesh.width,
            height: mesh.height,
            path_gain_db,
            sinr_db,
            per_face_gain,
        })
    }

    pub fn at(&self, u: usize, v: usize) -> f32 {
        self.path_gain_db[v * self.width + u]
    }

    pub fn finite_count(&self) -> usize {
        self.path_gain_db.iter().filter(|x| x.is_finite()).count()
    }
}

/// Linear path gain at each probe for one transmitter.
pub fn face_gains(tracer: &Tracer, tx: Vec3, probes: &[Vec3]) -> Vec<f64> {
    let ctx = tracer.prepare_tx(tx);
    probes.par_iter().map(|p| tracer.field(&ctx, p).norm_sqr()).collect()
}

/// Simulates `tx` onto the VAS of `camera`'s depth view.
pub fn compute_radio_map(scene: &Scene, tx: &Vec3, camera: &CameraModel, vas: &VasMesh, config: &RadioConfig) -> Result<RadioMap> {
    let tracer = Tracer::new(scene, config)?;
    radio_map_with(&tracer, tx, camera, vas)
}

/// As [`compute_radio_map`] with a prebuilt tracer.
pub fn radio_map_with(tracer: &Tracer, tx: &Vec3, camera: &CameraModel, vas: &VasMesh) -> Result<RadioMap> {
    if vas.width != camera.width || vas.height != camera.height {
        return Err(Error::DimensionMismatch {
            expected: (camera.width, camera.height),
            got: (vas.width, vas.height),
        });
    }
    let config = tracer.config();
    let gains = face_gains(tracer, *tx, &vas.centroids);
    let mut interference = Vec::new();
    if !config.interferers.is_empty() {
        interference = vec![0.0; gains.len()];
        let p_mw = 10f64.powf(config.tx_power_dbm / 10.0);
        for it in &config.interferers {
            let g = face_gains(tracer, Vec3::new(it[0], it[1], it[2]), &vas.centroids);
            for (acc, gi) in interference.iter_mut().zip(g) {
                *acc += p_mw * gi;
            }
        }
    }
    RadioMap::from_face_gains(vas, gains, &interference, config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::radio::Toggles;
    use crate::render::Intrinsics;
    use crate::vas::FacePixel;

    fn single_face_mesh(p: Vec3) -> VasMesh {
        VasMesh {
            width: 2,
            height: 2,
            vertices: vec![Vec3::zeros(); 4],
            faces: vec![[0, 1, 3]],
            centroids: vec![p],
            face_normals: vec![Vec3::z()],
            pixel_of_face: vec![FacePixel { u: 0, v: 0, half: 0 }],
        }
    }

    fn camera() -> CameraModel {
        CameraModel::look_at(Intrinsics::from_hfov(2, 2, 60.0), Vec3::new(0.0, -1.0, 1.6), Vec3::new(0.0, 0.0, 1.6)).unwrap()
    }

    fn free_space() -> RadioConfig {
        RadioConfig {
            toggles: Toggles::los_only(),
            ..RadioConfig::default()
        }
    }

    #[test]
    fn friis_at_100m() {
        let scene = Scene::from_triangles(Vec::new());
        let mesh = single_face_mesh(Vec3::new(100.0, 0.0, 1.6));
        let map = compute_radio_map(&scene, &Vec3::new(0.0, 0.0, 1.6), &camera(), &mesh, &free_space()).unwrap();
        assert!((map.at(0, 0) as f64 + 83.33).abs() < 0.01, "{}", map.at(0, 0));
        assert!((map.sinr_db[0] as f64 - 60.60).abs() < 0.02, "{}", map.sinr_db[0]);
        assert!(map.at(1, 0).is_nan() && map.sinr_db[3].is_nan());
    }

    #[test]
    fn no_path_gives_nan() {
        let mesh = single_face_mesh(Vec3::new(10.0, 0.0, 1.6));
        let map = RadioMap::from_face_gains(&mesh, vec![0.0], &[], &free_space()).unwrap();
        assert!(map.path_gain_db[0].is_nan() && map.sinr_db[0].is_nan());
        assert_eq!(map.finite_count(), 0);
    }

    #[test]
    fn pixel_is_mean_of_faces() {
        let mut mesh = single_face_mesh(Vec3::zeros());
        mesh.faces.push([0, 3, 2]);
        mesh.centroids.push(Vec3::zeros());
        mesh.face_normals.push(Vec3::z());
        mesh.pixel_of_face.push(FacePixel { u: 0, v: 0, half: 1 });
        let map = RadioMap::from_face_gains(&mesh, vec![1e-6, 3e-6], &[], &free_space()).unwrap();
        assert!((map.at(0, 0) as f64 - to_db(2e-6)).abs() < 1e-5);
    }

    #[test]
    fn interference_lowers_sinr() {
        let scene = Scene::from_triangles(Vec::new());
        let mesh = single_face_mesh(Vec3::new(100.0, 0.0, 1.6));
        let mut cfg = free_space();
        let clean = compute_radio_map(&scene, &Vec3::new(0.0, 0.0, 1.6), &camera(), &mesh, &cfg).unwrap();
        cfg.interferers.push([200.0, 0.0, 1.6]);
        let noisy = compute_radio_map(&scene, &Vec3::new(0.0, 0.0, 1.6), &camera(), &mesh, &cfg).unwrap();
        let bits = |v: &[f32]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&clean.path_gain_db), bits(&noisy.path_gain_db));
        // Equal-power interferer at equal distance: SINR ≈ 0 dB.
        assert!(noisy.sinr_db[0].abs() < 0.01, "{}", noisy.sinr_db[0]);
    }

    #[test]
    fn dimension_mismatch() {
        let scene = Scene::from_triangles(Vec::new());
        let mut mesh = single_face_mesh(Vec3::zeros());
        mesh.width = 3;
        assert!(matches!(
            compute_radio_map(&scene, &Vec3::zeros(), &camera(), &mesh, &free_space()),
            Err(Error::DimensionMismatch { .. })
        ));
    }
}
