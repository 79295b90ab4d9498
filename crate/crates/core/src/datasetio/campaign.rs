//! Campaign driver, per-sample export and the dataset manifest.
//!
//! Layout under the output directory (all manifest paths are relative):
//!
//! ```text
//! manifest.json
//! scenes/scene_000/scene.obj
//! scenes/scene_000/materials.json
//! scenes/scene_000/footprints.json
//! scenes/scene_000/sensing_graph.json
//! scenes/scene_000/views/view_000/...          render and orchestrate stages
//! scenes/scene_000/community_00/s000_v000_t00/  full campaign
//! scenes/scene_000/samples/s000_v000_t00/       simulate stage
//! ```
//!
//! Seeds: scene `i` uses `child(child(child(seed, SCENE), i), spec.seed)`;
//! view `j` of that scene samples its transmitters from
//! `child(child(scene_seed, TX), j)`.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::raster::{quantize_rgb, write_pfm, write_pnm, Image8, Raster};
use super::ply::{write_ply, PlyMesh};
use super::scene::{scene_to_obj, FootprintsFile, MaterialsFile};
use crate::analysis::{sample_stats, SampleStats};
use crate::error::{Error, Result};
use crate::geometry::{Mat3, Vec3};
use crate::orchestrate::{detect_communities, graph_from_visibility, modularity, SensingEdge};
use crate::radio::{radio_map_with, to_db, AntennaConfig, AntennaKind, RadioConfig, RadioMap, Tracer};
use crate::render::{render_view, sample_trajectory, CameraModel, Intrinsics, TrajectorySpec, ViewBuffers};
use crate::scenegen::{generate_city, sample_tx_positions, Archetype, BlockSpec};
use crate::seed::{child, stream};
use crate::vas::{reconstruct_vas, VasMesh, VasOptions};

pub const MANIFEST: &str = "manifest.json";
pub const FORMAT_VERSION: u32 = 1;

fn default_resolution() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CampaignConfig {
    pub scenes: Vec<BlockSpec>,
    pub trajectory: TrajectorySpec,
    pub tx_per_view: usize,
    #[serde(default)]
    pub radio: RadioConfig,
    pub output_dir: PathBuf,
    pub seed: u64,
    #[serde(default)]
    pub vas: VasOptions,
    #[serde(default = "default_resolution")]
    pub community_resolution: f64,
}

impl CampaignConfig {
    pub fn validate(&self) -> Result<()> {
        if self.scenes.is_empty() {
            return Err(Error::Config("campaign needs at least one scene".into()));
        }
        for s in &self.scenes {
            s.validate()?;
        }
        let t = &self.trajectory;
        if t.count == 0 || t.width < 2 || t.height < 2 || !(t.hfov_deg > 0.0 && t.hfov_deg < 180.0) {
            return Err(Error::Config("trajectory needs count >= 1, size >= 2x2 and 0 < hfov < 180".into()));
        }
        if self.tx_per_view == 0 {
            return Err(Error::Config("tx_per_view must be >= 1".into()));
        }
        if !(self.community_resolution > 0.0) {
            return Err(Error::Config("community_resolution must be > 0".into()));
        }
        self.radio.validate()
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let c: CampaignConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn scene_seed(&self, index: usize) -> u64 {
        child(child(child(self.seed, stream::SCENE), index as u64), self.scenes[index].seed)
    }

    /// Samples a full campaign exports.
    pub fn expected_samples(&self) -> usize {
        self.scenes.len() * self.trajectory.count * self.tx_per_view
    }
}

/// Pipeline prefix to run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    /// Scene geometry and sidecars.
    Generate,
    /// Plus per-view optical buffers.
    Render,
    /// Plus per-view buffers and the sensing graph.
    Orchestrate,
    /// Plus radio samples, without community grouping.
    Simulate,
    /// Everything; samples grouped by community.
    Campaign,
}

impl Stage {
    fn writes_views(self) -> bool {
        matches!(self, Stage::Render | Stage::Orchestrate)
    }
    fn builds_graph(self) -> bool {
        matches!(self, Stage::Orchestrate | Stage::Campaign)
    }
    fn simulates(self) -> bool {
        matches!(self, Stage::Simulate | Stage::Campaign)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CameraFile {
    pub width: usize,
    pub height: usize,
    #[serde(rename = "K")]
    pub k: [[f64; 3]; 3],
    /// World to camera, row-major.
    #[serde(rename = "R")]
    pub r: [[f64; 3]; 3],
    pub t: [f64; 3],
}

impl CameraFile {
    pub fn from_camera(c: &CameraModel) -> Self {
        let row = |m: &Mat3, i: usize| [m[(i, 0)], m[(i, 1)], m[(i, 2)]];
        let k = c.k_matrix();
        CameraFile {
            width: c.width,
            height: c.height,
            k: [row(&k, 0), row(&k, 1), row(&k, 2)],
            r: [row(&c.r, 0), row(&c.r, 1), row(&c.r, 2)],
            t: [c.t.x, c.t.y, c.t.z],
        }
    }

    pub fn to_camera(&self) -> Result<CameraModel> {
        let k = Intrinsics {
            fx: self.k[0][0],
            fy: self.k[1][1],
            cx: self.k[0][2],
            cy: self.k[1][2],
            width: self.width,
            height: self.height,
        };
        let r = Mat3::from_fn(|i, j| self.r[i][j]);
        let cam = CameraModel::new(k, r, Vec3::from(self.t));
        cam.validate()?;
        Ok(cam)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TxFile {
    pub position: [f64; 3],
    pub antenna: AntennaConfig,
    pub frequency: f64,
    pub tx_power_dbm: f64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleFiles {
    pub rgb: String,
    pub depth: String,
    pub normal: String,
    pub albedo: String,
    pub roughness: String,
    pub semantic: String,
    pub path_gain: String,
    pub sinr: String,
    pub vas: String,
    pub camera: String,
    pub tx: String,
}

impl Default for SampleFiles {
    fn default() -> Self {
        let s = |x: &str| x.to_string();
        SampleFiles {
            rgb: s("rgb.ppm"),
            depth: s("depth.pfm"),
            normal: s("normal.pfm"),
            albedo: s("albedo.pfm"),
            roughness: s("roughness.pfm"),
            semantic: s("semantic.pgm"),
            path_gain: s("path_gain.pfm"),
            sinr: s("sinr.pfm"),
            vas: s("vas.ply"),
            camera: s("camera.json"),
            tx: s("tx.json"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub sample_id: String,
    pub scene_id: String,
    pub view: usize,
    pub tx_index: usize,
    pub archetype: Archetype,
    /// Seed the transmitter positions of this view were drawn from.
    pub seed: u64,
    pub community: Option<usize>,
    /// Relative to the dataset root.
    pub dir: String,
    pub width: usize,
    pub height: usize,
    pub face_count: usize,
    pub finite_pixels: usize,
    pub tx: [f64; 3],
    pub antenna: AntennaKind,
    pub files: SampleFiles,
    pub stats: Option<SampleStats>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneRecord {
    pub scene_id: String,
    pub dir: String,
    pub archetype: Archetype,
    pub seed: u64,
    pub building_count: usize,
    pub triangle_count: usize,
    pub views: usize,
    pub communities: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorRecord {
    /// Sample id, or scene id when the whole scene was skipped.
    pub id: String,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    pub seed: u64,
    pub stage: Stage,
    pub scenes: Vec<SceneRecord>,
    pub samples: Vec<SampleRecord>,
    pub errors: Vec<ErrorRecord>,
}

impl Manifest {
    pub fn load(root: &Path) -> Result<Self> {
        let path = root.join(MANIFEST);
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphNodeRecord {
    pub pose_id: usize,
    pub community: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphFile {
    pub resolution: f64,
    pub modularity: Option<f64>,
    pub nodes: Vec<GraphNodeRecord>,
    pub edges: Vec<SensingEdge>,
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    std::fs::write(path, s).map_err(|e| Error::io(path, e))
}

fn create_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

/// Writes the optical buffers of one view into `dir`.
fn write_view_buffers(dir: &Path, files: &SampleFiles, camera: &CameraModel, view: &ViewBuffers) -> Result<()> {
    let (w, h) = (view.width, view.height);
    write_pnm(
        &dir.join(&files.rgb),
        &Image8 {
            width: w,
            height: h,
            channels: 3,
            data: quantize_rgb(&view.color),
        },
    )?;
    write_pfm(&dir.join(&files.depth), &Raster::gray(w, h, view.depth.clone()))?;
    write_pfm(
        &dir.join(&files.normal),
        &Raster {
            width: w,
            height: h,
            channels: 3,
            data: view.normal.iter().flatten().copied().collect(),
        },
    )?;
    write_pfm(&dir.join(&files.albedo), &Raster::gray(w, h, view.albedo.clone()))?;
    write_pfm(&dir.join(&files.roughness), &Raster::gray(w, h, view.roughness.clone()))?;
    write_pnm(
        &dir.join(&files.semantic),
        &Image8 {
            width: w,
            height: h,
            channels: 1,
            data: view.semantic.iter().map(|c| c.id()).collect(),
        },
    )?;
    write_json(&dir.join(&files.camera), &CameraFile::from_camera(camera))
}

/// Everything one exported sample is made of.
pub struct SampleInputs<'a> {
    pub sample_id: String,
    pub scene_id: String,
    pub view_index: usize,
    pub tx_index: usize,
    pub archetype: Archetype,
    pub seed: u64,
    pub community: Option<usize>,
    pub camera: &'a CameraModel,
    pub view: &'a ViewBuffers,
    pub vas: &'a VasMesh,
    pub map: &'a RadioMap,
    pub tx: Vec3,
    pub radio: &'a RadioConfig,
}

/// Writes one sample under `root/rel_dir` and returns its manifest record.
pub fn export_sample(root: &Path, rel_dir: &str, s: &SampleInputs) -> Result<SampleRecord> {
    let (w, h) = (s.view.width, s.view.height);
    if s.map.width != w || s.map.height != h || s.vas.width != w || s.vas.height != h {
        return Err(Error::DimensionMismatch {
            expected: (w, h),
            got: (s.map.width, s.map.height),
        });
    }
    let dir = root.join(rel_dir);
    create_dir(&dir)?;
    let files = SampleFiles::default();
    write_view_buffers(&dir, &files, s.camera, s.view)?;
    write_pfm(&dir.join(&files.path_gain), &Raster::gray(w, h, s.map.path_gain_db.clone()))?;
    write_pfm(&dir.join(&files.sinr), &Raster::gray(w, h, s.map.sinr_db.clone()))?;
    let face_db: Vec<f32> = s
        .map
        .per_face_gain
        .iter()
        .map(|&g| if g > 0.0 { to_db(g) as f32 } else { f32::NAN })
        .collect();
    write_ply(&dir.join(&files.vas), &PlyMesh::from_vas(s.vas, &face_db)?)?;
    write_json(
        &dir.join(&files.tx),
        &TxFile {
            position: [s.tx.x, s.tx.y, s.tx.z],
            antenna: s.radio.antenna.clone(),
            frequency: s.radio.frequency,
            tx_power_dbm: s.radio.tx_power_dbm,
        },
    )?;
    Ok(SampleRecord {
        sample_id: s.sample_id.clone(),
        scene_id: s.scene_id.clone(),
        view: s.view_index,
        tx_index: s.tx_index,
        archetype: s.archetype,
        seed: s.seed,
        community: s.community,
        dir: rel_dir.to_string(),
        width: w,
        height: h,
        face_count: s.vas.faces.len(),
        finite_pixels: s.map.finite_count(),
        tx: [s.tx.x, s.tx.y, s.tx.z],
        antenna: s.radio.antenna.kind,
        files,
        stats: sample_stats(&s.map.path_gain_db),
    })
}

#[derive(Clone, Debug)]
pub struct CampaignReport {
    pub root: PathBuf,
    pub manifest: Manifest,
}

impl CampaignReport {
    pub fn failures(&self) -> usize {
        self.manifest.errors.len()
    }
}

struct SceneOutput {
    record: SceneRecord,
    samples: Vec<SampleRecord>,
    errors: Vec<ErrorRecord>,
}

/// Runs `config` up to `stage`; per-sample failures are recorded in the
/// manifest, configuration errors abort.
pub fn run_pipeline(config: &CampaignConfig, stage: Stage) -> Result<CampaignReport> {
    config.validate()?;
    let root = config.output_dir.clone();
    create_dir(&root)?;
    let mut manifest = Manifest {
        format_version: FORMAT_VERSION,
        seed: config.seed,
        stage,
        scenes: Vec::new(),
        samples: Vec::new(),
        errors: Vec::new(),
    };
    for index in 0..config.scenes.len() {
        match run_scene(config, stage, &root, index) {
            Ok(out) => {
                manifest.scenes.push(out.record);
                manifest.samples.extend(out.samples);
                manifest.errors.extend(out.errors);
            }
            Err(e @ Error::Io { .. }) => return Err(e),
            Err(e) => manifest.errors.push(ErrorRecord {
                id: scene_id(index),
                message: e.to_string(),
            }),
        }
    }
    write_json(&root.join(MANIFEST), &manifest)?;
    Ok(CampaignReport { root, manifest })
}

/// Full campaign: every stage, samples grouped by community.
pub fn run_campaign(config: &CampaignConfig) -> Result<CampaignReport> {
    run_pipeline(config, Stage::Campaign)
}

fn scene_id(index: usize) -> String {
    format!("scene_{index:03}")
}

fn run_scene(config: &CampaignConfig, stage: Stage, root: &Path, index: usize) -> Result<SceneOutput> {
    let id = scene_id(index);
    let rel = format!("scenes/{id}");
    let dir = root.join(&rel);
    create_dir(&dir)?;
    let seed = config.scene_seed(index);
    let spec = BlockSpec {
        seed,
        ..config.scenes[index].clone()
    };
    let scene = generate_city(&spec)?;
    std::fs::write(dir.join("scene.obj"), scene_to_obj(&scene)).map_err(|e| Error::io(dir.join("scene.obj"), e))?;
    write_json(&dir.join("materials.json"), &MaterialsFile::from_scene(&scene))?;
    write_json(&dir.join("footprints.json"), &FootprintsFile::from_scene(&scene))?;
    let mut record = SceneRecord {
        scene_id: id.clone(),
        dir: rel.clone(),
        archetype: spec.archetype,
        seed,
        building_count: scene.footprints.len(),
        triangle_count: scene.triangles.len(),
        views: 0,
        communities: None,
    };
    let mut out = SceneOutput {
        record: record.clone(),
        samples: Vec::new(),
        errors: Vec::new(),
    };
    if stage == Stage::Generate {
        return Ok(out);
    }

    let cameras = sample_trajectory(&scene, &config.trajectory, seed)?;
    record.views = cameras.len();
    let views: Vec<Result<ViewBuffers>> = cameras.par_iter().map(|c| render_view(&scene, c)).collect();

    if stage.writes_views() {
        let files = SampleFiles::default();
        for (j, (cam, view)) in cameras.iter().zip(&views).enumerate() {
            let vdir = dir.join(format!("views/view_{j:03}"));
            match view {
                Ok(v) => {
                    create_dir(&vdir)?;
                    write_view_buffers(&vdir, &files, cam, v)?;
                }
                Err(e) => out.errors.push(ErrorRecord {
                    id: format!("{id}/view_{j:03}"),
                    message: e.to_string(),
                }),
            }
        }
    }

    let mut labels: Option<Vec<usize>> = None;
    if stage.builds_graph() {
        let visible: Vec<Vec<u32>> = views
            .iter()
            .map(|v| v.as_ref().map(|v| v.visible_triangles()).unwrap_or_default())
            .collect();
        let graph = graph_from_visibility(&cameras, &visible)?;
        let l = detect_communities(&graph, config.community_resolution)?;
        let file = GraphFile {
            resolution: config.community_resolution,
            modularity: Some(modularity(&graph, &l, config.community_resolution)),
            nodes: l
                .iter()
                .enumerate()
                .map(|(pose_id, &c)| GraphNodeRecord {
                    pose_id,
                    community: Some(c),
                })
                .collect(),
            edges: graph.edges.clone(),
        };
        write_json(&dir.join("sensing_graph.json"), &file)?;
        record.communities = Some(l.iter().max().map_or(0, |m| m + 1));
        labels = Some(l);
    }

    if stage.simulates() {
        let tracer = Tracer::new(&scene, &config.radio)?;
        let jobs: Vec<(usize, usize)> = (0..cameras.len())
            .flat_map(|j| (0..config.tx_per_view).map(move |k| (j, k)))
            .collect();
        let tx_seeds: Vec<u64> = (0..cameras.len()).map(|j| child(child(seed, stream::TX), j as u64)).collect();
        let tx_sets: Vec<Result<Vec<Vec3>>> = tx_seeds
            .iter()
            .map(|&s| sample_tx_positions(&scene, config.tx_per_view, s))
            .collect();
        let results: Vec<(String, Result<SampleRecord>)> = jobs
            .par_iter()
            .map(|&(j, k)| {
                let sample_id = format!("s{index:03}_v{j:03}_t{k:02}");
                let community = labels.as_ref().map(|l| l[j]);
                let group = match community {
                    Some(c) => format!("community_{c:02}"),
                    None => "samples".to_string(),
                };
                let rel_dir = format!("{rel}/{group}/{sample_id}");
                let res = (|| {
                    let view = views[j].as_ref().map_err(|e| Error::Config(e.to_string()))?;
                    let tx = match &tx_sets[j] {
                        Ok(t) => t[k],
                        Err(e) => return Err(Error::Config(e.to_string())),
                    };
                    let vas = reconstruct_vas(&view.depth, &cameras[j], &config.vas)?;
                    let map = radio_map_with(&tracer, &tx, &cameras[j], &vas)?;
                    export_sample(
                        root,
                        &rel_dir,
                        &SampleInputs {
                            sample_id: sample_id.clone(),
                            scene_id: id.clone(),
                            view_index: j,
                            tx_index: k,
                            archetype: spec.archetype,
                            seed: tx_seeds[j],
                            community,
                            camera: &cameras[j],
                            view,
                            vas: &vas,
                            map: &map,
                            tx,
                            radio: &config.radio,
                        },
                    )
                })();
                (sample_id, res)
            })
            .collect();
        for (sample_id, r) in results {
            match r {
                Ok(rec) => out.samples.push(rec),
                Err(e) => out.errors.push(ErrorRecord {
                    id: sample_id,
                    message: e.to_string(),
                }),
            }
        }
    }
    out.record = record;
    Ok(out)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub(crate) fn smoke_config(dir: &Path) -> CampaignConfig {
        CampaignConfig {
            scenes: vec![
                BlockSpec::archetype(Archetype::Margin, 1),
                BlockSpec::archetype(Archetype::Downtown, 2),
            ],
            trajectory: TrajectorySpec::orbit(4, 32, 32),
            tx_per_view: 1,
            radio: RadioConfig {
                specular_depth_cap: 1,
                ..RadioConfig::default()
            },
            output_dir: dir.to_path_buf(),
            seed: 42,
            vas: VasOptions::default(),
            community_resolution: 1.0,
        }
    }

    #[test]
    fn camera_file_round_trip() {
        let cam = CameraModel::look_at(Intrinsics::from_hfov(64, 48, 70.0), Vec3::new(3.0, -40.0, 25.0), Vec3::new(1.0, 2.0, 0.0)).unwrap();
        let f = CameraFile::from_camera(&cam);
        let text = serde_json::to_string(&f).unwrap();
        assert!(text.contains("\"K\"") && text.contains("\"R\""));
        let back: CameraFile = serde_json::from_str(&text).unwrap();
        let c2 = back.to_camera().unwrap();
        let rtr = c2.r.transpose() * c2.r - Mat3::identity();
        assert!(rtr.amax() < 1e-9);
        assert_eq!(c2, cam);
    }

    #[test]
    fn config_validation() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = smoke_config(dir.path());
        assert!(c.validate().is_ok());
        c.tx_per_view = 0;
        assert!(matches!(c.validate(), Err(Error::Config(_))));
        let text = serde_json::to_string(&smoke_config(dir.path())).unwrap();
        assert_eq!(CampaignConfig::from_json(&text).unwrap(), smoke_config(dir.path()));
        assert!(matches!(CampaignConfig::from_json("{}"), Err(Error::Config(_))));
    }

    #[test]
    fn smoke_campaign_layout() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = smoke_config(dir.path());
        let rep = run_campaign(&cfg).unwrap();
        assert_eq!(rep.failures(), 0, "{:?}", rep.manifest.errors);
        assert_eq!(rep.manifest.samples.len(), cfg.expected_samples());
        for s in &rep.manifest.samples {
            let d = dir.path().join(&s.dir);
            assert!(d.join("vas.ply").exists() && d.join("path_gain.pfm").exists());
            assert!(s.dir.contains("community_"));
        }
        assert!(dir.path().join("scenes/scene_001/sensing_graph.json").exists());
        let m = Manifest::load(dir.path()).unwrap();
        assert_eq!(m, rep.manifest);
    }

    #[test]
    fn generate_and_render_stages() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = smoke_config(dir.path());
        cfg.scenes.truncate(1);
        let rep = run_pipeline(&cfg, Stage::Generate).unwrap();
        assert!(rep.manifest.samples.is_empty());
        assert!(dir.path().join("scenes/scene_000/scene.obj").exists());
        assert!(!dir.path().join("scenes/scene_000/views").exists());
        run_pipeline(&cfg, Stage::Orchestrate).unwrap();
        assert!(dir.path().join("scenes/scene_000/views/view_003/depth.pfm").exists());
        assert!(dir.path().join("scenes/scene_000/sensing_graph.json").exists());
    }
}
