//! Pinhole camera model and z-buffer rasterizer.
//!
//! Conventions: `p_c = R * p_w + t`, the camera looks down `+z`, image `u`
//! grows along camera `+x` and `v` along camera `+y` (down). Pixel centers
//! sit on integer coordinates. Depth is the camera-frame `z` of the surface
//! hit by the pixel-center ray, not the Euclidean ray length.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Mat3, Vec3};
use crate::scenegen::{Scene, SemanticClass, AGENT_HEIGHT};
use crate::seed;

/// Near clipping distance, meters.
pub const NEAR_PLANE: f64 = 0.05;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CameraModel {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
    /// World-to-camera rotation.
    pub r: Mat3,
    pub t: Vec3,
}

/// Pixel-grid intrinsics shared by every pose of a trajectory.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Intrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
}

impl Intrinsics {
    /// Square pixels, principal point at the image center.
    pub fn from_hfov(width: usize, height: usize, hfov_deg: f64) -> Self {
        let f = 0.5 * width as f64 / (0.5 * hfov_deg.to_radians()).tan();
        Intrinsics {
            fx: f,
            fy: f,
            cx: 0.5 * (width as f64 - 1.0),
            cy: 0.5 * (height as f64 - 1.0),
            width,
            height,
        }
    }
}

impl CameraModel {
    pub fn new(k: Intrinsics, r: Mat3, t: Vec3) -> Self {
        CameraModel {
            fx: k.fx,
            fy: k.fy,
            cx: k.cx,
            cy: k.cy,
            width: k.width,
            height: k.height,
            r,
            t,
        }
    }

    /// Camera at `eye` looking at `target` with world `+z` up.
    pub fn look_at(k: Intrinsics, eye: Vec3, target: Vec3) -> Result<Self> {
        let f = target - eye;
        let fnorm = f.norm();
        if fnorm == 0.0 {
            return Err(Error::InvalidCamera("eye coincides with target".into()));
        }
        let z = f / fnorm;
        let x = z.cross(&Vec3::z());
        let xn = x.norm();
        if xn < 1e-9 {
            return Err(Error::InvalidCamera("view direction parallel to world up".into()));
        }
        let x = x / xn;
        let y = z.cross(&x);
        let r = Mat3::from_rows(&[x.transpose(), y.transpose(), z.transpose()]);
        let t = -(r * eye);
        let cam = CameraModel::new(k, r, t);
        cam.validate()?;
        Ok(cam)
    }

    pub fn intrinsics(&self) -> Intrinsics {
        Intrinsics {
            fx: self.fx,
            fy: self.fy,
            cx: self.cx,
            cy: self.cy,
            width: self.width,
            height: self.height,
        }
    }

    pub fn k_matrix(&self) -> Mat3 {
        Mat3::new(self.fx, 0.0, self.cx, 0.0, self.fy, self.cy, 0.0, 0.0, 1.0)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidCamera(m));
        if !(self.fx > 0.0 && self.fy > 0.0) {
            return bad("focal lengths must be positive".into());
        }
        if self.width == 0 || self.height == 0 {
            return bad("empty image".into());
        }
        if !(self.cx >= 0.0 && self.cx < self.width as f64 && self.cy >= 0.0 && self.cy < self.height as f64) {
            return bad(format!("principal point ({}, {}) outside image", self.cx, self.cy));
        }
        let err = (self.r.transpose() * self.r - Mat3::identity()).abs().max();
        if !(err < 1e-9) {
            return bad(format!("R not orthonormal (|RtR - I| = {err:e})"));
        }
        if (self.r.determinant() - 1.0).abs() > 1e-9 {
            return bad("det R != +1".into());
        }
        if !self.t.iter().all(|v| v.is_finite()) {
            return bad("non-finite translation".into());
        }
        Ok(())
    }

    /// Camera center in world coordinates.
    pub fn center(&self) -> Vec3 {
        -(self.r.transpose() * self.t)
    }

    pub fn to_camera(&self, p: &Vec3) -> Vec3 {
        self.r * p + self.t
    }

    /// `K^-1 (u, v, 1)`, the pixel ray with unit camera `z`.
    pub fn pixel_ray(&self, u: f64, v: f64) -> Vec3 {
        Vec3::new((u - self.cx) / self.fx, (v - self.cy) / self.fy, 1.0)
    }

    /// Projects a world point to `(u, v, depth)`; `None` behind the camera.
    pub fn project(&self, p: &Vec3) -> Option<(f64, f64, f64)> {
        let pc = self.to_camera(p);
        if pc.z <= 0.0 {
            return None;
        }
        Some((self.fx * pc.x / pc.z + self.cx, self.fy * pc.y / pc.z + self.cy, pc.z))
    }
}

/// Pixel-aligned optical buffers, row-major `v * width + u`.
#[derive(Clone, Debug, PartialEq)]
pub struct ViewBuffers {
    pub width: usize,
    pub height: usize,
    /// Camera-frame z-depth in meters; NaN where nothing is hit.
    pub depth: Vec<f32>,
    /// World-space unit normals; zero on sky pixels.
    pub normal: Vec<[f32; 3]>,
    pub semantic: Vec<SemanticClass>,
    pub color: Vec<[f32; 3]>,
    pub albedo: Vec<f32>,
    pub roughness: Vec<f32>,
    /// Index of the visible scene triangle; `u32::MAX` on sky pixels.
    pub triangle: Vec<u32>,
}

pub const NO_TRIANGLE: u32 = u32::MAX;
pub const SKY_COLOR: [f32; 3] = [0.53, 0.81, 0.92];

impl ViewBuffers {
    fn sky(width: usize, height: usize) -> Self {
        let n = width * height;
        ViewBuffers {
            width,
            height,
            depth: vec![f32::NAN; n],
            normal: vec![[0.0; 3]; n],
            semantic: vec![SemanticClass::Sky; n],
            color: vec![SKY_COLOR; n],
            albedo: vec![0.0; n],
            roughness: vec![0.0; n],
            triangle: vec![NO_TRIANGLE; n],
        }
    }

    /// Depth with optional log encoding `ln(1 + z)`.
    pub fn depth_encoded(&self, log: bool) -> Vec<f32> {
        if log {
            self.depth.iter().map(|&d| if d.is_finite() { d.ln_1p() } else { d }).collect()
        } else {
            self.depth.clone()
        }
    }

    /// Distinct visible scene triangles, sorted.
    pub fn visible_triangles(&self) -> Vec<u32> {
        let mut ids: Vec<u32> = self.triangle.iter().copied().filter(|&t| t != NO_TRIANGLE).collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }
}

fn class_color(class: SemanticClass) -> [f64; 3] {
    match class {
        SemanticClass::Terrain => [0.45, 0.55, 0.35],
        SemanticClass::Road => [0.3, 0.3, 0.32],
        SemanticClass::BuildingWall => [0.82, 0.76, 0.66],
        SemanticClass::BuildingRoof => [0.62, 0.36, 0.3],
        SemanticClass::Sky => [0.53, 0.81, 0.92],
    }
}

/// Triangle prepared for rasterization in one view.
struct ScreenPoly {
    tri: u32,
    /// Projected convex polygon (after near clipping), counter-clockwise in
    /// image coordinates.
    pts: Vec<[f64; 2]>,
    /// Camera-frame plane `n . p = c`.
    n_cam: Vec3,
    c: f64,
    umin: usize,
    umax: usize,
    vmin: usize,
    vmax: usize,
}

fn prepare(scene: &Scene, cam: &CameraModel) -> Vec<ScreenPoly> {
    let (w, h) = (cam.width as f64, cam.height as f64);
    let mut out = Vec::new();
    for (i, tri) in scene.triangles.iter().enumerate() {
        let vc: [Vec3; 3] = [
            cam.to_camera(&tri.vertices[0]),
            cam.to_camera(&tri.vertices[1]),
            cam.to_camera(&tri.vertices[2]),
        ];
        if vc.iter().all(|p| p.z <= NEAR_PLANE) {
            continue;
        }
        let n_cam = cam.r * tri.normal;
        let c = n_cam.dot(&vc[0]);
        let scale = vc.iter().map(|p| p.norm()).fold(0.0, f64::max);
        // Plane through the camera center: the triangle is seen edge-on.
        if c.abs() <= 1e-9 * scale.max(1.0) {
            continue;
        }
        let clipped = clip_near(&vc);
        if clipped.len() < 3 {
            continue;
        }
        let mut pts: Vec<[f64; 2]> = clipped
            .iter()
            .map(|p| [cam.fx * p.x / p.z + cam.cx, cam.fy * p.y / p.z + cam.cy])
            .collect();
        let area = crate::geometry::polygon_signed_area(&pts);
        if area.abs() < 1e-12 {
            continue;
        }
        if area < 0.0 {
            pts.reverse();
        }
        let (mut u0, mut u1, mut v0, mut v1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for p in &pts {
            u0 = u0.min(p[0]);
            u1 = u1.max(p[0]);
            v0 = v0.min(p[1]);
            v1 = v1.max(p[1]);
        }
        if u1 < 0.0 || v1 < 0.0 || u0 > w - 1.0 || v0 > h - 1.0 {
            continue;
        }
        let umin = u0.ceil().max(0.0) as usize;
        let vmin = v0.ceil().max(0.0) as usize;
        let umax = u1.floor().min(w - 1.0);
        let vmax = v1.floor().min(h - 1.0);
        if umax < umin as f64 || vmax < vmin as f64 {
            continue;
        }
        out.push(ScreenPoly {
            tri: i as u32,
            pts,
            n_cam,
            c,
            umin,
            umax: umax as usize,
            vmin,
            vmax: vmax as usize,
        });
    }
    out
}

/// Sutherland–Hodgman against `z = NEAR_PLANE`.
fn clip_near(v: &[Vec3; 3]) -> Vec<Vec3> {
    let mut out = Vec::with_capacity(4);
    for k in 0..3 {
        let a = v[k];
        let b = v[(k + 1) % 3];
        let ina = a.z > NEAR_PLANE;
        let inb = b.z > NEAR_PLANE;
        if ina {
            out.push(a);
        }
        if ina != inb {
            let s = (NEAR_PLANE - a.z) / (b.z - a.z);
            let mut p = a + (b - a) * s;
            p.z = NEAR_PLANE * (1.0 + 1e-12);
            out.push(p);
        }
    }
    out
}

#[inline]
fn inside_convex(pts: &[[f64; 2]], u: f64, v: f64) -> bool {
    let n = pts.len();
    for k in 0..n {
        let a = pts[k];
        let b = pts[(k + 1) % n];
        let e = (b[0] - a[0]) * (v - a[1]) - (b[1] - a[1]) * (u - a[0]);
        let len = ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt();
        if e < -1e-9 * len {
            return false;
        }
    }
    true
}

/// Rasterizes every scene triangle into a fresh set of view buffers.
pub fn render_view(scene: &Scene, camera: &CameraModel) -> Result<ViewBuffers> {
    camera.validate()?;
    let (w, h) = (camera.width, camera.height);
    let polys = prepare(scene, camera);
    let mut rows: Vec<Vec<u32>> = vec![Vec::new(); h];
    for (pi, p) in polys.iter().enumerate() {
        for row in rows.iter_mut().take(p.vmax + 1).skip(p.vmin) {
            row.push(pi as u32);
        }
    }
    let light = Vec3::new(0.35, 0.45, 0.82).normalize();
    let mut buf = ViewBuffers::sky(w, h);

    let zbuf: Vec<(f64, u32)> = (0..h)
        .into_par_iter()
        .flat_map_iter(|v| {
            let mut line = vec![(f64::INFINITY, NO_TRIANGLE); w];
            for &pi in &rows[v] {
                let p = &polys[pi as usize];
                for (u, px) in line.iter_mut().enumerate().take(p.umax + 1).skip(p.umin) {
                    let (uf, vf) = (u as f64, v as f64);
                    if !inside_convex(&p.pts, uf, vf) {
                        continue;
                    }
                    let ray = camera.pixel_ray(uf, vf);
                    let denom = p.n_cam.dot(&ray);
                    if denom == 0.0 {
                        continue;
                    }
                    let z = p.c / denom;
                    if z > NEAR_PLANE && z < px.0 {
                        *px = (z, p.tri);
                    }
                }
            }
            line
        })
        .collect();

    for (i, &(z, tri)) in zbuf.iter().enumerate() {
        if tri == NO_TRIANGLE {
            continue;
        }
        let t = &scene.triangles[tri as usize];
        let m = &scene.materials[t.material as usize];
        buf.depth[i] = z as f32;
        buf.normal[i] = [t.normal.x as f32, t.normal.y as f32, t.normal.z as f32];
        buf.semantic[i] = t.class;
        buf.albedo[i] = m.albedo as f32;
        buf.roughness[i] = m.roughness as f32;
        let shade = 0.3 + 0.7 * t.normal.dot(&light).max(0.0);
        let base = class_color(t.class);
        buf.color[i] = [
            (base[0] * shade).min(1.0) as f32,
            (base[1] * shade).min(1.0) as f32,
            (base[2] * shade).min(1.0) as f32,
        ];
        buf.triangle[i] = tri;
    }
    Ok(buf)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum TrajectoryKind {
    OrbitUAV,
    StreetVehicle,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySpec {
    pub kind: TrajectoryKind,
    pub count: usize,
    pub width: usize,
    pub height: usize,
    #[serde(default = "default_hfov")]
    pub hfov_deg: f64,
    /// Orbit radius as a fraction of the scene extent.
    #[serde(default = "default_orbit_radius")]
    pub orbit_radius_frac: f64,
    /// Orbit altitude as a fraction of the scene extent, floored at 1.2x the
    /// tallest building.
    #[serde(default = "default_orbit_altitude")]
    pub orbit_altitude_frac: f64,
}

fn default_hfov() -> f64 {
    60.0
}
fn default_orbit_radius() -> f64 {
    0.45
}
fn default_orbit_altitude() -> f64 {
    0.35
}

impl TrajectorySpec {
    pub fn orbit(count: usize, width: usize, height: usize) -> Self {
        TrajectorySpec {
            kind: TrajectoryKind::OrbitUAV,
            count,
            width,
            height,
            hfov_deg: default_hfov(),
            orbit_radius_frac: default_orbit_radius(),
            orbit_altitude_frac: default_orbit_altitude(),
        }
    }

    pub fn street(count: usize, width: usize, height: usize) -> Self {
        TrajectorySpec {
            kind: TrajectoryKind::StreetVehicle,
            ..TrajectorySpec::orbit(count, width, height)
        }
    }
}

/// Samples camera poses over a scene.
///
/// `OrbitUAV` places poses evenly on a horizontal circle (seeded phase and
/// radius jitter) looking at the ground center of the scene. `StreetVehicle`
/// drives along randomly chosen road strips at agent height, looking along
/// the strip with a slight downward pitch.
pub fn sample_trajectory(scene: &Scene, spec: &TrajectorySpec, seed: u64) -> Result<Vec<CameraModel>> {
    if spec.count == 0 {
        return Err(Error::Config("trajectory count must be >= 1".into()));
    }
    let k = Intrinsics::from_hfov(spec.width, spec.height, spec.hfov_deg);
    let mut rng = seed::rng(seed::child(seed, seed::stream::TRAJECTORY));
    let c = scene.bounds.center();
    let center = Vec3::new(c.x, c.y, scene.datum_z);
    let ext = scene.bounds.extent();
    let span = ext.x.max(ext.y);
    match spec.kind {
        TrajectoryKind::OrbitUAV => {
            let phase: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
            let alt = (spec.orbit_altitude_frac * span).max(1.2 * scene.max_height() + 5.0);
            (0..spec.count)
                .map(|i| {
                    let jitter: f64 = rng.gen_range(0.9..1.1);
                    let radius = spec.orbit_radius_frac * span * jitter;
                    let a = phase + std::f64::consts::TAU * i as f64 / spec.count as f64;
                    let eye = center + Vec3::new(radius * a.cos(), radius * a.sin(), alt);
                    CameraModel::look_at(k, eye, center)
                })
                .collect()
        }
        TrajectoryKind::StreetVehicle => {
            if scene.roads.is_empty() {
                return Err(Error::NoRoads);
            }
            let pitch = 8f64.to_radians();
            (0..spec.count)
                .map(|_| {
                    let road = &scene.roads[rng.gen_range(0..scene.roads.len())];
                    let (a, b) = road.centerline();
                    let s: f64 = rng.gen_range(0.1..0.9);
                    let width = if road.axis == 0 { road.max[1] - road.min[1] } else { road.max[0] - road.min[0] };
                    let lateral: f64 = rng.gen_range(-0.25..0.25) * width;
                    let forward_sign = if rng.gen::<bool>() { 1.0 } else { -1.0 };
                    let mut eye = Vec3::new(a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1]), scene.datum_z + AGENT_HEIGHT);
                    let dir = if road.axis == 0 { Vec3::x() } else { Vec3::y() } * forward_sign;
                    let side = Vec3::new(-dir.y, dir.x, 0.0);
                    eye += side * lateral;
                    let target = eye + dir * pitch.cos() - Vec3::z() * pitch.sin();
                    CameraModel::look_at(k, eye, target)
                })
                .collect()
        }
    }
}
