//! Visible-surface reconstruction.
//!
//! Each valid depth pixel is lifted into world space through
//! `Psi(u, v) = R^T (D(u, v) K^-1 [u v 1]^T - t)`, and each pixel quad whose
//! four corners survive the validity and discontinuity tests is split along
//! its `(u, v)-(u+1, v+1)` diagonal into two triangles wound toward the
//! camera. The mesh is only a receiver manifold: face centroids become
//! receiver probes and the mesh never takes part in propagation.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::render::CameraModel;

/// Quad culling thresholds.
///
/// A quad is dropped when its max/min corner depth ratio exceeds
/// `max_depth_ratio`, when its depth spread exceeds `max_depth_spread`
/// meters, or when its four lifted corners are not coplanar within
/// `planarity_abs + planarity_rel * max_depth` meters (a fold across a
/// crease between two surfaces), or when inverse depth bends at one of its
/// corners by more than `max_curvature` relative to its value. Inverse depth
/// is affine in `(u, v)` over any plane, so the last test catches quads that
/// straddle a crease or silhouette even when their corners are coplanar.
/// Infinite thresholds disable the fold and curvature tests.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VasOptions {
    pub max_depth_ratio: f64,
    pub max_depth_spread: f64,
    pub planarity_abs: f64,
    pub planarity_rel: f64,
    #[serde(default = "default_max_curvature")]
    pub max_curvature: f64,
}

fn default_max_curvature() -> f64 {
    1e-4
}

impl Default for VasOptions {
    fn default() -> Self {
        VasOptions {
            max_depth_ratio: 1.15,
            max_depth_spread: 2.0,
            planarity_abs: 5e-4,
            planarity_rel: 2e-6,
            max_curvature: default_max_curvature(),
        }
    }
}

impl VasOptions {
    /// Depth-ratio and spread tests only.
    pub fn discontinuity_only() -> Self {
        VasOptions {
            planarity_abs: f64::INFINITY,
            max_curvature: f64::INFINITY,
            ..VasOptions::default()
        }
    }
}

/// Source quad of a face: top-left pixel plus which diagonal half.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FacePixel {
    pub u: u32,
    pub v: u32,
    /// 0: `(u,v),(u+1,v),(u+1,v+1)`; 1: `(u,v),(u+1,v+1),(u,v+1)`.
    pub half: u8,
}

#[derive(Clone, Debug, PartialEq)]
pub struct VasMesh {
    pub width: usize,
    pub height: usize,
    /// Row-major grid; NaN components where the depth was invalid.
    pub vertices: Vec<Vec3>,
    pub faces: Vec<[u32; 3]>,
    pub centroids: Vec<Vec3>,
    pub face_normals: Vec<Vec3>,
    pub pixel_of_face: Vec<FacePixel>,
}

impl VasMesh {
    pub fn vertex_valid(&self, idx: usize) -> bool {
        self.vertices[idx].x.is_finite()
    }

    pub fn is_empty(&self) -> bool {
        self.faces.is_empty()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReceiverProbe {
    pub position: Vec3,
    pub face_index: usize,
    pub pixel: (u32, u32),
}

/// Lifts pixel `(u, v)` at z-depth `depth` into world space.
pub fn lift_pixel(u: f64, v: f64, depth: f64, camera: &CameraModel) -> Result<Vec3> {
    if !depth.is_finite() || depth <= 0.0 {
        return Err(Error::InvalidDepth(depth));
    }
    Ok(lift_unchecked(u, v, depth, camera))
}

#[inline]
fn lift_unchecked(u: f64, v: f64, depth: f64, camera: &CameraModel) -> Vec3 {
    let pc = camera.pixel_ray(u, v) * depth;
    camera.r.transpose() * (pc - camera.t)
}

/// Lifts a full depth buffer into the vertex grid (NaN where invalid).
pub fn lift_depth_map(depth: &[f32], camera: &CameraModel) -> Result<Vec<Vec3>> {
    let (w, h) = (camera.width, camera.height);
    if depth.len() != w * h {
        return Err(Error::DimensionMismatch {
            expected: (h, w),
            got: (depth.len() / w.max(1), w),
        });
    }
    let nan = Vec3::repeat(f64::NAN);
    Ok(depth
        .par_iter()
        .enumerate()
        .map(|(i, &d)| {
            let d = d as f64;
            if d.is_finite() && d > 0.0 {
                lift_unchecked((i % w) as f64, (i / w) as f64, d, camera)
            } else {
                nan
            }
        })
        .collect())
}

/// Outcome of the per-quad culling rules; shared by reconstruction and
/// diagnostics.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QuadStatus {
    Kept,
    InvalidCorner,
    Discontinuity,
    Fold,
    Curvature,
}

fn inv_depth(depth: &[f32], i: usize) -> Option<f64> {
    let d = depth[i] as f64;
    (d.is_finite() && d > 0.0).then(|| 1.0 / d)
}

/// Largest relative second difference of inverse depth at pixel `(u, v)`
/// along either image axis; neighbors outside the image or invalid are
/// skipped.
fn curvature_at(depth: &[f32], width: usize, height: usize, u: usize, v: usize) -> f64 {
    let i = v * width + u;
    let Some(c) = inv_depth(depth, i) else { return 0.0 };
    let mut worst: f64 = 0.0;
    if u > 0 && u + 1 < width {
        if let (Some(a), Some(b)) = (inv_depth(depth, i - 1), inv_depth(depth, i + 1)) {
            worst = worst.max((a - 2.0 * c + b).abs() / c);
        }
    }
    if v > 0 && v + 1 < height {
        if let (Some(a), Some(b)) = (inv_depth(depth, i - width), inv_depth(depth, i + width)) {
            worst = worst.max((a - 2.0 * c + b).abs() / c);
        }
    }
    worst
}

/// Classifies the quad whose top-left pixel is `(u, v)`.
pub fn classify_quad(depth: &[f32], vertices: &[Vec3], width: usize, u: usize, v: usize, opts: &VasOptions) -> QuadStatus {
    let idx = [v * width + u, v * width + u + 1, (v + 1) * width + u, (v + 1) * width + u + 1];
    let mut dmin = f64::INFINITY;
    let mut dmax = f64::NEG_INFINITY;
    for &i in &idx {
        let d = depth[i] as f64;
        if !(d.is_finite() && d > 0.0) {
            return QuadStatus::InvalidCorner;
        }
        dmin = dmin.min(d);
        dmax = dmax.max(d);
    }
    if dmax / dmin > opts.max_depth_ratio || dmax - dmin > opts.max_depth_spread {
        return QuadStatus::Discontinuity;
    }
    if opts.planarity_abs.is_finite() {
        let [p00, p10, p01, p11] = idx.map(|i| vertices[i]);
        let n = (p10 - p00).cross(&(p11 - p00));
        let nn = n.norm();
        if nn == 0.0 {
            return QuadStatus::Fold;
        }
        let dev = ((p01 - p00).dot(&n) / nn).abs();
        if dev > opts.planarity_abs + opts.planarity_rel * dmax {
            return QuadStatus::Fold;
        }
    }
    if opts.max_curvature.is_finite() {
        let height = depth.len() / width;
        for (a, b) in [(u, v), (u + 1, v), (u, v + 1), (u + 1, v + 1)] {
            if curvature_at(depth, width, height, a, b) > opts.max_curvature {
                return QuadStatus::Curvature;
            }
        }
    }
    QuadStatus::Kept
}

/// Triangulates the visible surface of one depth buffer.
pub fn reconstruct_vas(depth: &[f32], camera: &CameraModel, opts: &VasOptions) -> Result<VasMesh> {
    let (w, h) = (camera.width, camera.height);
    let vertices = lift_depth_map(depth, camera)?;
    let eye = camera.center();
    let rows: Vec<Vec<([u32; 3], Vec3, Vec3, FacePixel)>> = (0..h.saturating_sub(1))
        .into_par_iter()
        .map(|v| {
            let mut out = Vec::new();
            for u in 0..w - 1 {
                if classify_quad(depth, &vertices, w, u, v, opts) != QuadStatus::Kept {
                    continue;
                }
                let i00 = (v * w + u) as u32;
                let i10 = i00 + 1;
                let i01 = ((v + 1) * w + u) as u32;
                let i11 = i01 + 1;
                for (half, tri) in [[i00, i10, i11], [i00, i11, i01]].into_iter().enumerate() {
                    let [a, b, c] = tri.map(|i| vertices[i as usize]);
                    let centroid = (a + b + c) / 3.0;
                    let n = (b - a).cross(&(c - a));
                    let nn = n.norm();
                    if nn == 0.0 {
                        continue;
                    }
                    let mut n = n / nn;
                    let mut tri = tri;
                    if n.dot(&(centroid - eye)) > 0.0 {
                        tri.swap(1, 2);
                        n = -n;
                    }
                    let px = FacePixel {
                        u: u as u32,
                        v: v as u32,
                        half: half as u8,
                    };
                    out.push((tri, centroid, n, px));
                }
            }
            out
        })
        .collect();
    let total: usize = rows.iter().map(Vec::len).sum();
    let mut mesh = VasMesh {
        width: w,
        height: h,
        vertices,
        faces: Vec::with_capacity(total),
        centroids: Vec::with_capacity(total),
        face_normals: Vec::with_capacity(total),
        pixel_of_face: Vec::with_capacity(total),
    };
    for (f, c, n, p) in rows.into_iter().flatten() {
        mesh.faces.push(f);
        mesh.centroids.push(c);
        mesh.face_normals.push(n);
        mesh.pixel_of_face.push(p);
    }
    Ok(mesh)
}

/// One probe per face, at its centroid, in face order.
pub fn receiver_probes(mesh: &VasMesh) -> Vec<ReceiverProbe> {
    mesh.centroids
        .iter()
        .zip(&mesh.pixel_of_face)
        .enumerate()
        .map(|(i, (c, p))| ReceiverProbe {
            position: *c,
            face_index: i,
            pixel: (p.u, p.v),
        })
        .collect()
}
