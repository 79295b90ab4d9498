//! Manifest-driven dataset validator.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::campaign::{CameraFile, Manifest, SampleRecord, TxFile};
use super::ply::read_ply;
use super::raster::{read_pfm, read_pnm};
use super::scene::obj_group_counts;
use crate::error::Result;
use crate::geometry::Mat3;
use crate::scenegen::SemanticClass;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub scenes_checked: usize,
    pub samples_checked: usize,
    pub problems: Vec<String>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.problems.is_empty()
    }
}

fn relative_ok(p: &str) -> bool {
    let path = Path::new(p);
    !path.is_absolute() && path.components().all(|c| matches!(c, std::path::Component::Normal(_)))
}

/// Loads `root/manifest.json` and re-checks every file it references.
pub fn validate_dataset(root: &Path) -> Result<ValidationReport> {
    let manifest = Manifest::load(root)?;
    let mut rep = ValidationReport::default();
    for s in &manifest.scenes {
        rep.scenes_checked += 1;
        if !relative_ok(&s.dir) {
            rep.problems.push(format!("{}: non-relative dir {:?}", s.scene_id, s.dir));
            continue;
        }
        let dir = root.join(&s.dir);
        match std::fs::read_to_string(dir.join("scene.obj")) {
            Ok(text) => match obj_group_counts(&text) {
                Ok(g) => {
                    let n: usize = g.iter().map(|x| x.1).sum();
                    if n != s.triangle_count {
                        rep.problems.push(format!("{}: OBJ has {n} triangles, manifest {}", s.scene_id, s.triangle_count));
                    }
                }
                Err(e) => rep.problems.push(format!("{}: {e}", s.scene_id)),
            },
            Err(e) => rep.problems.push(format!("{}: scene.obj: {e}", s.scene_id)),
        }
        for f in ["materials.json", "footprints.json"] {
            if !dir.join(f).is_file() {
                rep.problems.push(format!("{}: missing {f}", s.scene_id));
            }
        }
        if s.communities.is_some() && !dir.join("sensing_graph.json").is_file() {
            rep.problems.push(format!("{}: missing sensing_graph.json", s.scene_id));
        }
    }
    for s in &manifest.samples {
        rep.samples_checked += 1;
        if let Err(msg) = check_sample(root, s) {
            rep.problems.push(format!("{}: {msg}", s.sample_id));
        }
    }
    Ok(rep)
}

fn check_sample(root: &Path, s: &SampleRecord) -> std::result::Result<(), String> {
    if !relative_ok(&s.dir) {
        return Err(format!("non-relative dir {:?}", s.dir));
    }
    let dir = root.join(&s.dir);
    let (w, h) = (s.width, s.height);
    let e = |x: crate::Error| x.to_string();
    let gray = |name: &str| -> std::result::Result<Vec<f32>, String> {
        let r = read_pfm(&dir.join(name)).map_err(e)?;
        if (r.width, r.height, r.channels) != (w, h, 1) {
            return Err(format!("{name}: {}x{}x{} instead of {w}x{h}x1", r.width, r.height, r.channels));
        }
        Ok(r.data)
    };
    let depth = gray(&s.files.depth)?;
    let pg = gray(&s.files.path_gain)?;
    let sinr = gray(&s.files.sinr)?;
    gray(&s.files.albedo)?;
    gray(&s.files.roughness)?;
    let normal = read_pfm(&dir.join(&s.files.normal)).map_err(e)?;
    if (normal.width, normal.height, normal.channels) != (w, h, 3) {
        return Err("normal raster dimensions".into());
    }
    let rgb = read_pnm(&dir.join(&s.files.rgb)).map_err(e)?;
    if (rgb.width, rgb.height, rgb.channels) != (w, h, 3) {
        return Err("rgb dimensions".into());
    }
    let sem = read_pnm(&dir.join(&s.files.semantic)).map_err(e)?;
    if (sem.width, sem.height, sem.channels) != (w, h, 1) {
        return Err("semantic dimensions".into());
    }
    for k in 0..w * h {
        let class = SemanticClass::from_id(sem.data[k]).ok_or(format!("pixel {k}: bad class {}", sem.data[k]))?;
        if depth[k].is_finite() == (class == SemanticClass::Sky) {
            return Err(format!("pixel {k}: depth/semantic disagree"));
        }
        if pg[k].is_finite() && !depth[k].is_finite() {
            return Err(format!("pixel {k}: finite path gain over invalid depth"));
        }
        if pg[k].is_finite() != sinr[k].is_finite() {
            return Err(format!("pixel {k}: path gain and SINR sentinels differ"));
        }
        if pg[k] > 0.0 {
            return Err(format!("pixel {k}: path gain {} dB above 0", pg[k]));
        }
    }
    let finite = pg.iter().filter(|v| v.is_finite()).count();
    if finite != s.finite_pixels {
        return Err(format!("{finite} finite pixels, manifest says {}", s.finite_pixels));
    }
    let ply = read_ply(&dir.join(&s.files.vas)).map_err(e)?;
    if ply.faces.len() != s.face_count {
        return Err(format!("PLY has {} faces, manifest {}", ply.faces.len(), s.face_count));
    }
    let cam_text = std::fs::read_to_string(dir.join(&s.files.camera)).map_err(|x| x.to_string())?;
    let cam: CameraFile = serde_json::from_str(&cam_text).map_err(|x| x.to_string())?;
    let r = Mat3::from_fn(|i, j| cam.r[i][j]);
    if (r.transpose() * r - Mat3::identity()).amax() >= 1e-9 || (r.determinant() - 1.0).abs() >= 1e-9 {
        return Err("camera R not orthonormal".into());
    }
    if (cam.width, cam.height) != (w, h) {
        return Err("camera resolution differs from rasters".into());
    }
    let tx_text = std::fs::read_to_string(dir.join(&s.files.tx)).map_err(|x| x.to_string())?;
    let tx: TxFile = serde_json::from_str(&tx_text).map_err(|x| x.to_string())?;
    if tx.position != s.tx {
        return Err("tx.json position differs from manifest".into());
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasetio::campaign::{run_campaign, tests::smoke_config};

    #[test]
    fn smoke_dataset_validates_and_detects_damage() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = smoke_config(dir.path());
        cfg.scenes.truncate(1);
        let rep = run_campaign(&cfg).unwrap();
        let v = validate_dataset(dir.path()).unwrap();
        assert!(v.is_ok(), "{:?}", v.problems);
        assert_eq!(v.samples_checked, 4);
        let s = &rep.manifest.samples[0];
        std::fs::write(dir.path().join(&s.dir).join("sinr.pfm"), b"Pf\n1 1\n-1.0\n\0\0\0\0").unwrap();
        let v = validate_dataset(dir.path()).unwrap();
        assert_eq!(v.problems.len(), 1, "{:?}", v.problems);
    }

    #[test]
    fn relative_paths() {
        assert!(relative_ok("scenes/scene_000"));
        assert!(!relative_ok("/tmp/x"));
        assert!(!relative_ok("../x"));
    }
}
