//! Deterministic path enumeration between one transmitter and one receiver.
//!
//! * Line of sight: one occlusion query.
//! * Specular reflection: image method over planar surfaces. Image chains
//!   depend only on the transmitter and are enumerated once per
//!   [`TxContext`], pruned by facing tests and by the reflection beam of the
//!   previous surface. Per receiver, reflection points are recovered by
//!   unfolding back from the receiver and validated against facet extents
//!   and occluders.
//! * Diffraction: single knife-edge over convex vertical building corners,
//!   only toward receivers whose direct path is geometrically blocked.
//! * Transmission: with refraction enabled, blocked line-of-sight and
//!   reflection paths survive through each blocking surface as a lossy slab.
//!
//! The occlusion hierarchy is built from scene triangles only.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::antenna::ArrayPattern;
use super::diffraction::{fresnel_kirchhoff_nu, knife_edge_loss};
use super::fresnel::{complex_permittivity, reflection_from_eps, slab_transmission, Polarization};
use super::RadioConfig;
use crate::error::{Error, Result};
use crate::geometry::{convex_hull_2d, polygon_signed_area, Bvh, Vec3};
use crate::scenegen::Scene;

/// Receiver-end occlusion tolerance: probes sit on surfaces.
const EPS_RX: f64 = 0.01;
/// Tolerance around interaction points on the transmitter side.
const EPS_POINT: f64 = 1e-6;
/// Strict front-side test for sources and images.
const EPS_FRONT: f64 = 1e-6;
/// Tolerance around diffraction points.
const EPS_EDGE: f64 = 1e-3;
/// Hard limit on the image-method order.
pub const MAX_SPECULAR_ORDER: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum InteractionKind {
    Reflection,
    Diffraction,
    Transmission,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PropagationPath {
    /// Tx, interaction points in order, Rx.
    pub vertices: Vec<Vec3>,
    pub kinds: Vec<InteractionKind>,
    /// Surface id per reflection or transmission, edge id per diffraction.
    pub ids: Vec<u32>,
    pub length: f64,
    /// Complex amplitude including spreading, interaction coefficients and
    /// propagation phase; antenna gains excluded.
    pub gain: Complex64,
    pub departure_dir: Vec3,
    pub arrival_dir: Vec3,
}

impl PropagationPath {
    pub fn interactions(&self) -> usize {
        self.kinds.len()
    }

    fn canonical_cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.kinds
            .len()
            .cmp(&other.kinds.len())
            .then_with(|| self.kinds.cmp(&other.kinds))
            .then_with(|| self.ids.cmp(&other.ids))
            .then_with(|| self.length.total_cmp(&other.length))
    }
}

/// Planar surface the image method reflects off.
#[derive(Clone, Debug)]
struct Facet {
    id: u32,
    normal: Vec3,
    offset: f64,
    material: u16,
    origin: Vec3,
    e1: Vec3,
    e2: Vec3,
    hull2d: Vec<[f64; 2]>,
    hull3d: Vec<Vec3>,
    /// The triangles tile the convex hull exactly.
    full: bool,
    tris2d: Vec<[[f64; 2]; 3]>,
}

impl Facet {
    #[inline]
    fn signed(&self, p: &Vec3) -> f64 {
        self.normal.dot(p) - self.offset
    }

    #[inline]
    fn mirror(&self, p: &Vec3) -> Vec3 {
        p - self.normal * (2.0 * self.signed(p))
    }

    fn contains(&self, p: &Vec3) -> bool {
        let d = p - self.origin;
        let q = [d.dot(&self.e1), d.dot(&self.e2)];
        if !in_convex(&self.hull2d, q, 1e-7) {
            return false;
        }
        self.full || self.tris2d.iter().any(|t| in_convex(t, q, 1e-7))
    }
}

#[inline]
fn in_convex(poly: &[[f64; 2]], q: [f64; 2], eps: f64) -> bool {
    let n = poly.len();
    for k in 0..n {
        let a = poly[k];
        let b = poly[(k + 1) % n];
        let (ex, ey) = (b[0] - a[0], b[1] - a[1]);
        let cross = ex * (q[1] - a[1]) - ey * (q[0] - a[0]);
        if cross < -eps * (ex * ex + ey * ey).sqrt() {
            return false;
        }
    }
    true
}

/// Convex vertical building corner.
#[derive(Clone, Debug)]
struct Edge {
    id: u32,
    x: f64,
    y: f64,
    z0: f64,
    z1: f64,
    /// Outward normals and offsets of the two adjacent walls.
    walls: [(Vec3, f64); 2],
}

impl Edge {
    fn side(&self, p: &Vec3, tol: f64) -> Option<usize> {
        let a = self.walls[0].0.dot(p) - self.walls[0].1 > tol;
        let b = self.walls[1].0.dot(p) - self.walls[1].1 > tol;
        match (a, b) {
            (true, false) => Some(0),
            (false, true) => Some(1),
            _ => None,
        }
    }
}

/// Transmitter-dependent precomputation shared by all receivers.
#[derive(Clone, Debug)]
pub struct TxContext {
    pub tx: Vec3,
    chains: Vec<ImageChain>,
    /// Per edge: which adjacent wall the transmitter sees alone.
    edge_side: Vec<Option<usize>>,
}

impl TxContext {
    /// Number of candidate reflection chains after pruning.
    pub fn chain_count(&self) -> usize {
        self.chains.len()
    }
}

#[derive(Clone, Debug)]
struct ImageChain {
    facets: Vec<u32>,
    /// `images[k]` is the source mirrored through `facets[..=k]`.
    images: Vec<Vec3>,
}

pub struct Tracer<'s> {
    scene: &'s Scene,
    bvh: Bvh,
    tri_surface: Vec<u32>,
    facets: Vec<Facet>,
    /// Surface id to index into `facets`.
    facet_index: Vec<u32>,
    edges: Vec<Edge>,
    eps_by_material: Vec<Complex64>,
    slab_by_material: Vec<f64>,
    config: RadioConfig,
    wavelength: f64,
    k0: f64,
    pattern: ArrayPattern,
}

impl<'s> Tracer<'s> {
    /// Builds the occlusion hierarchy and facet tables from scene geometry.
    pub fn new(scene: &'s Scene, config: &RadioConfig) -> Result<Self> {
        config.validate()?;
        if config.specular_depth() as usize > MAX_SPECULAR_ORDER {
            return Err(Error::InvalidRadioParam(format!(
                "specular depth {} exceeds the supported {MAX_SPECULAR_ORDER}",
                config.specular_depth()
            )));
        }
        let tris: Vec<[Vec3; 3]> = scene.triangles.iter().map(|t| t.vertices).collect();
        let bvh = Bvh::new(&tris);
        let tri_surface: Vec<u32> = scene.triangles.iter().map(|t| t.surface).collect();
        let (facets, facet_index) = build_facets(scene);
        let edges = build_edges(scene);
        let f = config.frequency;
        Ok(Tracer {
            scene,
            bvh,
            tri_surface,
            facets,
            facet_index,
            edges,
            eps_by_material: scene.materials.iter().map(|m| complex_permittivity(m, f)).collect(),
            slab_by_material: scene.materials.iter().map(|m| slab_transmission(m, 1.0, f)).collect(),
            wavelength: config.wavelength(),
            k0: std::f64::consts::TAU / config.wavelength(),
            pattern: ArrayPattern::new(&config.antenna),
            config: config.clone(),
        })
    }

    pub fn config(&self) -> &RadioConfig {
        &self.config
    }

    pub fn facet_count(&self) -> usize {
        self.facets.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Transmit power gain toward `dir`.
    pub fn tx_gain(&self, dir: &Vec3) -> f64 {
        self.pattern.gain(dir)
    }

    /// Enumerates image chains for `tx` up to the configured specular order.
    pub fn prepare_tx(&self, tx: Vec3) -> TxContext {
        let depth = self.config.specular_depth() as usize;
        let mut chains = Vec::new();
        if depth > 0 {
            let mut stack: Vec<ImageChain> = Vec::new();
            for f in &self.facets {
                if f.signed(&tx) > EPS_FRONT {
                    stack.push(ImageChain {
                        facets: vec![f.id],
                        images: vec![f.mirror(&tx)],
                    });
                }
            }
            // Depth-first with an explicit stack; sorted afterwards so the
            // order is canonical regardless of traversal.
            while let Some(chain) = stack.pop() {
                if chain.facets.len() < depth {
                    let last = self.facet(*chain.facets.last().unwrap());
                    let img = *chain.images.last().unwrap();
                    let beam = beam_planes(last, &img);
                    for g in &self.facets {
                        if g.id == last.id || g.signed(&img) <= EPS_FRONT {
                            continue;
                        }
                        if !g.hull3d.iter().any(|p| last.signed(p) > EPS_FRONT) {
                            continue;
                        }
                        if beam
                            .iter()
                            .any(|(m, o)| g.hull3d.iter().all(|p| m.dot(&(p - o)) < -1e-9))
                        {
                            continue;
                        }
                        let mut facets = chain.facets.clone();
                        facets.push(g.id);
                        let mut images = chain.images.clone();
                        images.push(g.mirror(&img));
                        stack.push(ImageChain { facets, images });
                    }
                }
                chains.push(chain);
            }
            chains.sort_by(|a, b| a.facets.len().cmp(&b.facets.len()).then_with(|| a.facets.cmp(&b.facets)));
        }
        let edge_side = self.edges.iter().map(|e| e.side(&tx, EPS_FRONT)).collect();
        TxContext { tx, chains, edge_side }
    }

    fn facet(&self, surface: u32) -> &Facet {
        &self.facets[self.facet_index[surface as usize] as usize]
    }

    /// All valid paths from the context's transmitter to `rx`, in canonical
    /// order (interaction count, then kinds, then surface/edge ids).
    pub fn paths(&self, ctx: &TxContext, rx: &Vec3) -> Vec<PropagationPath> {
        let tx = ctx.tx;
        let cfg = &self.config;
        let max_depth = cfg.max_depth as usize;
        let mut out = Vec::new();

        let los_hits = self.bvh.segment_hits(&tx, rx, 0.0, EPS_RX, |_| false);
        let los_blocked = !los_hits.is_empty();
        if cfg.toggles.los {
            if !los_blocked {
                out.push(self.make_path(vec![tx, *rx], Vec::new(), Vec::new(), Complex64::new(1.0, 0.0)));
            } else if cfg.toggles.refraction {
                if let Some(p) = self.transmitted_los(&tx, rx, &los_hits, max_depth) {
                    out.push(p);
                }
            }
        }

        for chain in &ctx.chains {
            if let Some(p) = self.reflection_path(chain, &tx, rx, max_depth) {
                out.push(p);
            }
        }

        if cfg.toggles.diffraction && max_depth >= 1 && los_blocked {
            for (edge, side) in self.edges.iter().zip(&ctx.edge_side) {
                let Some(tx_side) = side else { continue };
                if let Some(p) = self.diffraction_path(edge, *tx_side, &tx, rx) {
                    out.push(p);
                }
            }
        }

        out.sort_by(|a, b| a.canonical_cmp(b));
        out
    }

    /// Coherent sum of path amplitudes weighted by the transmit pattern.
    pub fn field(&self, ctx: &TxContext, rx: &Vec3) -> Complex64 {
        self.paths(ctx, rx)
            .iter()
            .map(|p| p.gain * self.tx_gain(&p.departure_dir).sqrt())
            .sum()
    }

    fn make_path(&self, vertices: Vec<Vec3>, kinds: Vec<InteractionKind>, ids: Vec<u32>, coeff: Complex64) -> PropagationPath {
        let length: f64 = vertices.windows(2).map(|w| (w[1] - w[0]).norm()).sum();
        let n = vertices.len();
        let departure_dir = (vertices[1] - vertices[0]).normalize();
        let arrival_dir = (vertices[n - 1] - vertices[n - 2]).normalize();
        let spread = self.wavelength / (4.0 * std::f64::consts::PI * length);
        let phase = Complex64::from_polar(1.0, -self.k0 * length);
        PropagationPath {
            vertices,
            kinds,
            ids,
            length,
            gain: coeff * spread * phase,
            departure_dir,
            arrival_dir,
        }
    }

    /// Collapses hits on one surface at the same point (shared triangle
    /// edges) and returns `(surface, point, amplitude factor)` per slab.
    fn slabs(&self, a: &Vec3, b: &Vec3, hits: &[crate::geometry::Hit]) -> Vec<(u32, Vec3, f64)> {
        let dir = (b - a).normalize();
        let mut out: Vec<(u32, Vec3, f64, f64)> = Vec::new();
        for h in hits {
            let s = self.tri_surface[h.tri as usize];
            if out.iter().any(|(os, _, _, ot)| *os == s && (ot - h.t).abs() < 1e-6) {
                continue;
            }
            let tri = &self.scene.triangles[h.tri as usize];
            let cos = dir.dot(&tri.normal).abs();
            let m = &self.scene.materials[tri.material as usize];
            let amp = if (cos - 1.0).abs() < 1e-12 {
                self.slab_by_material[tri.material as usize]
            } else {
                slab_transmission(m, cos, self.config.frequency)
            };
            out.push((s, a + dir * h.t, amp, h.t));
        }
        out.into_iter().map(|(s, p, amp, _)| (s, p, amp)).collect()
    }

    fn transmitted_los(&self, tx: &Vec3, rx: &Vec3, hits: &[crate::geometry::Hit], max_depth: usize) -> Option<PropagationPath> {
        let slabs = self.slabs(tx, rx, hits);
        if slabs.len() > max_depth {
            return None;
        }
        let mut verts = vec![*tx];
        let mut coeff = 1.0;
        for (_, p, amp) in &slabs {
            verts.push(*p);
            coeff *= amp;
        }
        verts.push(*rx);
        let kinds = vec![InteractionKind::Transmission; slabs.len()];
        let ids = slabs.iter().map(|s| s.0).collect();
        Some(self.make_path(verts, kinds, ids, Complex64::new(coeff, 0.0)))
    }

    fn reflection_path(&self, chain: &ImageChain, tx: &Vec3, rx: &Vec3, max_depth: usize) -> Option<PropagationPath> {
        let k = chain.facets.len();
        if k > max_depth {
            return None;
        }
        let last = self.facet(chain.facets[k - 1]);
        if last.signed(rx) <= EPS_RX {
            return None;
        }
        // Unfold from the receiver back toward the source.
        let mut points = [Vec3::zeros(); MAX_SPECULAR_ORDER];
        let mut target = *rx;
        for j in (0..k).rev() {
            let f = self.facet(chain.facets[j]);
            let img = chain.images[j];
            let d = target - img;
            let denom = f.normal.dot(&d);
            if denom.abs() < 1e-15 {
                return None;
            }
            let t = (f.offset - f.normal.dot(&img)) / denom;
            if !(t > 0.0 && t < 1.0) {
                return None;
            }
            let p = img + d * t;
            if !f.contains(&p) {
                return None;
            }
            points[j] = p;
            target = p;
        }

        let mut verts = Vec::with_capacity(k + 2);
        let mut kinds = Vec::with_capacity(k);
        let mut ids = Vec::with_capacity(k);
        let mut coeff = Complex64::new(1.0, 0.0);
        let mut prev = *tx;
        let mut prev_surface: Option<u32> = None;
        verts.push(*tx);
        for j in 0..=k {
            let (next, next_surface) = if j < k { (points[j], Some(chain.facets[j])) } else { (*rx, None) };
            let eps_b = if j < k { EPS_POINT } else { EPS_RX };
            let eps_a = if j == 0 { 0.0 } else { EPS_POINT };
            let hits = self.bvh.segment_hits(&prev, &next, eps_a, eps_b, |t| {
                let s = self.tri_surface[t as usize];
                Some(s) == prev_surface || Some(s) == next_surface
            });
            if !hits.is_empty() {
                if !self.config.toggles.refraction {
                    return None;
                }
                for (s, p, amp) in self.slabs(&prev, &next, &hits) {
                    verts.push(p);
                    kinds.push(InteractionKind::Transmission);
                    ids.push(s);
                    coeff *= amp;
                }
            }
            if j < k {
                let f = self.facet(chain.facets[j]);
                let inc = (next - prev).normalize();
                coeff *= self.reflection_coefficient(f, &inc);
                verts.push(next);
                kinds.push(InteractionKind::Reflection);
                ids.push(f.id);
            }
            prev = next;
            prev_surface = next_surface;
        }
        if kinds.len() > max_depth {
            return None;
        }
        verts.push(*rx);
        Some(self.make_path(verts, kinds, ids, coeff))
    }

    /// Vertically polarized incidence: TE when the vertical field is mostly
    /// perpendicular to the plane of incidence, TM otherwise.
    fn reflection_coefficient(&self, f: &Facet, inc: &Vec3) -> Complex64 {
        let cos_i = -inc.dot(&f.normal);
        let e = Vec3::z() - inc * inc.z;
        let s = inc.cross(&f.normal);
        let pol = match (e.norm(), s.norm()) {
            (en, sn) if en > 1e-12 && sn > 1e-12 => {
                let w = (e.dot(&s) / (en * sn)).powi(2);
                if w >= 0.5 {
                    Polarization::TE
                } else {
                    Polarization::TM
                }
            }
            _ => Polarization::TE,
        };
        reflection_from_eps(self.eps_by_material[f.material as usize], cos_i, pol)
    }

    fn diffraction_path(&self, edge: &Edge, tx_side: usize, tx: &Vec3, rx: &Vec3) -> Option<PropagationPath> {
        let other = 1 - tx_side;
        let (n_other, o_other) = edge.walls[other];
        let (n_tx, o_tx) = edge.walls[tx_side];
        if n_other.dot(rx) - o_other <= -EPS_RX || n_tx.dot(rx) - o_tx >= EPS_RX {
            return None;
        }
        let a = ((tx.x - edge.x).powi(2) + (tx.y - edge.y).powi(2)).sqrt();
        let b = ((rx.x - edge.x).powi(2) + (rx.y - edge.y).powi(2)).sqrt();
        if a + b <= 0.0 {
            return None;
        }
        let z = tx.z + (rx.z - tx.z) * a / (a + b);
        if z < edge.z0 || z > edge.z1 {
            return None;
        }
        let d = Vec3::new(edge.x, edge.y, z);
        if self.bvh.segment_occluded(tx, &d, 0.0, EPS_EDGE, |_| false)
            || self.bvh.segment_occluded(&d, rx, EPS_EDGE, EPS_RX, |_| false)
        {
            return None;
        }
        let d1 = (d - tx).norm();
        let d2 = (rx - d).norm();
        let line = (rx - tx).normalize();
        let h = (d - tx - line * (d - tx).dot(&line)).norm();
        let nu = fresnel_kirchhoff_nu(h, d1, d2, self.wavelength);
        let amp = 10f64.powf(-knife_edge_loss(nu) / 20.0);
        Some(self.make_path(
            vec![*tx, d, *rx],
            vec![InteractionKind::Diffraction],
            vec![edge.id],
            Complex64::new(amp, 0.0),
        ))
    }
}

/// Side planes of the pyramid from `apex` through the facet hull, as
/// `(inward normal, point on plane)`.
fn beam_planes(f: &Facet, apex: &Vec3) -> Vec<(Vec3, Vec3)> {
    let n = f.hull3d.len();
    let centroid = f.hull3d.iter().fold(Vec3::zeros(), |acc, p| acc + p) / n as f64;
    let mut out = Vec::with_capacity(n);
    for k in 0..n {
        let a = f.hull3d[k];
        let b = f.hull3d[(k + 1) % n];
        let mut m = (a - apex).cross(&(b - apex));
        let len = m.norm();
        if len < 1e-12 {
            continue;
        }
        m /= len;
        if m.dot(&(centroid - apex)) < 0.0 {
            m = -m;
        }
        out.push((m, *apex));
    }
    out
}

fn build_facets(scene: &Scene) -> (Vec<Facet>, Vec<u32>) {
    let n_surf = scene.surface_count() as usize;
    let mut groups: Vec<Vec<usize>> = vec![Vec::new(); n_surf];
    for (i, t) in scene.triangles.iter().enumerate() {
        groups[t.surface as usize].push(i);
    }
    let mut facets = Vec::new();
    let mut index = vec![u32::MAX; n_surf];
    for (sid, tris) in groups.iter().enumerate() {
        if tris.is_empty() {
            continue;
        }
        let t0 = &scene.triangles[tris[0]];
        let normal = t0.normal;
        let origin = t0.vertices[0];
        let offset = normal.dot(&origin);
        let mut e1 = t0.vertices[1] - t0.vertices[0];
        e1 -= normal * normal.dot(&e1);
        let e1 = e1.normalize();
        let e2 = normal.cross(&e1);
        let to2d = |p: &Vec3| {
            let d = p - origin;
            [d.dot(&e1), d.dot(&e2)]
        };
        let mut pts = Vec::new();
        let mut tris2d = Vec::new();
        let mut area = 0.0;
        for &ti in tris {
            let v = &scene.triangles[ti].vertices;
            let mut t2 = [to2d(&v[0]), to2d(&v[1]), to2d(&v[2])];
            let a = polygon_signed_area(&t2);
            if a < 0.0 {
                t2.swap(1, 2);
            }
            area += a.abs();
            pts.extend_from_slice(&t2);
            tris2d.push(t2);
        }
        let hull2d = convex_hull_2d(&pts);
        let hull_area = polygon_signed_area(&hull2d);
        let full = (hull_area - area).abs() <= 1e-9 * hull_area.max(1.0);
        let hull3d = hull2d.iter().map(|q| origin + e1 * q[0] + e2 * q[1]).collect();
        index[sid] = facets.len() as u32;
        facets.push(Facet {
            id: sid as u32,
            normal,
            offset,
            material: t0.material,
            origin,
            e1,
            e2,
            hull2d,
            hull3d,
            full,
            tris2d,
        });
    }
    (facets, index)
}

fn build_edges(scene: &Scene) -> Vec<Edge> {
    let mut out = Vec::new();
    for fp in &scene.footprints {
        let poly = &fp.polygon;
        let n = poly.len();
        for i in 0..n {
            let p = poly[(i + n - 1) % n];
            let c = poly[i];
            let q = poly[(i + 1) % n];
            let turn = (c[0] - p[0]) * (q[1] - c[1]) - (c[1] - p[1]) * (q[0] - c[0]);
            if turn <= 0.0 {
                continue;
            }
            let wall = |a: [f64; 2], b: [f64; 2]| {
                let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
                let len = (dx * dx + dy * dy).sqrt();
                let nrm = Vec3::new(dy / len, -dx / len, 0.0);
                (nrm, nrm.x * a[0] + nrm.y * a[1])
            };
            out.push(Edge {
                id: out.len() as u32,
                x: c[0],
                y: c[1],
                z0: scene.datum_z,
                z1: scene.datum_z + fp.height,
                walls: [wall(p, c), wall(c, q)],
            });
        }
    }
    out
}

/// Convenience wrapper: builds a tracer for a single transmitter–receiver
/// pair.
pub fn compute_paths(scene: &Scene, tx: &Vec3, rx: &Vec3, config: &RadioConfig) -> Result<Vec<PropagationPath>> {
    let tracer = Tracer::new(scene, config)?;
    let ctx = tracer.prepare_tx(*tx);
    Ok(tracer.paths(&ctx, rx))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::radio::{friis_gain, Toggles};
    use crate::scenegen::{SemanticClass, Triangle, MATERIAL_CONCRETE};
    use proptest::prelude::*;

    fn quad(a: Vec3, b: Vec3, c: Vec3, d: Vec3, class: SemanticClass, material: u16, surface: u32) -> Vec<Triangle> {
        let n = (b - a).cross(&(c - a)).normalize();
        vec![
            Triangle { vertices: [a, b, c], normal: n, material, class, surface },
            Triangle { vertices: [a, c, d], normal: n, material, class, surface },
        ]
    }

    /// Vertical wall in the plane x = `x`, normal toward -x.
    fn wall_x(x: f64, y0: f64, y1: f64, h: f64, surface: u32) -> Vec<Triangle> {
        quad(
            Vec3::new(x, y0, 0.0),
            Vec3::new(x, y0, h),
            Vec3::new(x, y1, h),
            Vec3::new(x, y1, 0.0),
            SemanticClass::BuildingWall,
            MATERIAL_CONCRETE,
            surface,
        )
    }

    fn cfg(toggles: Toggles, depth: u32) -> RadioConfig {
        RadioConfig {
            toggles,
            max_depth: depth,
            ..RadioConfig::default()
        }
    }

    #[test]
    fn free_space_single_path() {
        let scene = Scene::ground_plane(500.0);
        let c = cfg(Toggles::los_only(), 20);
        let tx = Vec3::new(0.0, 0.0, 1.6);
        let rx = Vec3::new(30.0, 40.0, 5.0);
        let paths = compute_paths(&scene, &tx, &rx, &c).unwrap();
        assert_eq!(paths.len(), 1);
        let p = &paths[0];
        assert!((p.length - (rx - tx).norm()).abs() < 1e-12);
        assert!(p.kinds.is_empty() && p.vertices.len() == 2);
        assert!((p.gain.norm_sqr() - friis_gain(c.wavelength(), p.length)).abs() < 1e-18);
    }

    #[test]
    fn full_wall_blocks() {
        let scene = Scene::from_triangles(wall_x(10.0, -100.0, 100.0, 100.0, 1));
        let c = cfg(Toggles::los_only(), 20);
        let paths = compute_paths(&scene, &Vec3::new(0.0, 0.0, 1.6), &Vec3::new(20.0, 0.0, 1.6), &c).unwrap();
        assert!(paths.is_empty());
    }

    #[test]
    fn wall_transmission_when_refraction_on() {
        let scene = Scene::from_triangles(wall_x(10.0, -100.0, 100.0, 100.0, 1));
        let mut t = Toggles::los_only();
        t.refraction = true;
        let c = cfg(t, 20);
        let paths = compute_paths(&scene, &Vec3::new(0.0, 0.0, 1.6), &Vec3::new(20.0, 0.0, 1.6), &c).unwrap();
        assert_eq!(paths.len(), 1);
        assert_eq!(paths[0].kinds, vec![InteractionKind::Transmission]);
        let slab = slab_transmission(&scene.materials[0], 1.0, c.frequency);
        let expect = friis_gain(c.wavelength(), 20.0) * slab * slab;
        assert!((paths[0].gain.norm_sqr() / expect - 1.0).abs() < 1e-9);
        // Depth budget counts transmissions.
        let paths = compute_paths(&scene, &Vec3::new(0.0, 0.0, 1.6), &Vec3::new(20.0, 0.0, 1.6), &cfg(t, 0)).unwrap();
        assert!(paths.is_empty());
    }

    #[test]
    fn ground_two_ray() {
        let scene = Scene::ground_plane(500.0);
        let mut t = Toggles::los_only();
        t.specular_reflection = true;
        let c = cfg(t, 1);
        let tx = Vec3::new(0.0, 0.0, 10.0);
        let rx = Vec3::new(50.0, 20.0, 2.0);
        let paths = compute_paths(&scene, &tx, &rx, &c).unwrap();
        assert_eq!(paths.len(), 2);
        assert!(paths[0].kinds.is_empty());
        assert_eq!(paths[1].kinds, vec![InteractionKind::Reflection]);
        let mirror = Vec3::new(tx.x, tx.y, -tx.z);
        assert!((paths[1].length - (mirror - rx).norm()).abs() < 1e-9);
        let bounce = paths[1].vertices[1];
        assert!(bounce.z.abs() < 1e-12);
    }

    #[test]
    fn corridor_multi_bounce() {
        // Two parallel walls facing each other; ground absent.
        let mut tris = wall_x(10.0, -200.0, 200.0, 50.0, 1);
        let mut w2 = quad(
            Vec3::new(-10.0, 200.0, 0.0),
            Vec3::new(-10.0, 200.0, 50.0),
            Vec3::new(-10.0, -200.0, 50.0),
            Vec3::new(-10.0, -200.0, 0.0),
            SemanticClass::BuildingWall,
            MATERIAL_CONCRETE,
            2,
        );
        tris.append(&mut w2);
        let scene = Scene::from_triangles(tris);
        let mut t = Toggles::los_only();
        t.specular_reflection = true;
        let c = cfg(t, 3);
        let tx = Vec3::new(0.0, 0.0, 5.0);
        let rx = Vec3::new(3.0, 60.0, 5.0);
        let paths = compute_paths(&scene, &tx, &rx, &c).unwrap();
        // LoS, two single bounces, two double, two triple.
        assert_eq!(paths.len(), 7);
        for p in &paths {
            assert!(p.length >= (rx - tx).norm() - 1e-9);
            assert_eq!(p.kinds.len(), p.vertices.len() - 2);
        }
        // Unfolded length equals the distance to the image.
        let one = paths.iter().find(|p| p.ids == vec![1]).unwrap();
        assert!((one.length - (Vec3::new(20.0, 0.0, 5.0) - rx).norm()).abs() < 1e-9);
        let two = paths.iter().find(|p| p.ids == vec![1, 2]).unwrap();
        assert!((two.length - (Vec3::new(-40.0, 0.0, 5.0) - rx).norm()).abs() < 1e-9);
    }

    #[test]
    fn corner_diffraction_into_shadow() {
        // Box building occupying x, y in [0, 20]; tx west of it, rx north-east behind.
        let mut scene = Scene::ground_plane(300.0);
        let sq = [[0.0, 0.0], [20.0, 0.0], [20.0, 20.0], [0.0, 20.0]];
        let mut b = Vec::new();
        for i in 0..4 {
            let a = sq[i];
            let c = sq[(i + 1) % 4];
            b.extend(quad(
                Vec3::new(a[0], a[1], 0.0),
                Vec3::new(c[0], c[1], 0.0),
                Vec3::new(c[0], c[1], 30.0),
                Vec3::new(a[0], a[1], 30.0),
                SemanticClass::BuildingWall,
                MATERIAL_CONCRETE,
                1 + i as u32,
            ));
        }
        b.extend(quad(
            Vec3::new(0.0, 0.0, 30.0),
            Vec3::new(20.0, 0.0, 30.0),
            Vec3::new(20.0, 20.0, 30.0),
            Vec3::new(0.0, 20.0, 30.0),
            SemanticClass::BuildingRoof,
            MATERIAL_CONCRETE,
            5,
        ));
        scene.triangles.extend(b);
        scene.footprints.push(crate::scenegen::Footprint { polygon: sq.to_vec(), height: 30.0 });
        let mut t = Toggles::los_only();
        t.diffraction = true;
        let c = cfg(t, 1);
        let tracer = Tracer::new(&scene, &c).unwrap();
        assert_eq!(tracer.edge_count(), 4);
        let tx = Vec3::new(-30.0, 10.0, 1.6);
        let rx = Vec3::new(40.0, 25.0, 1.6);
        let ctx = tracer.prepare_tx(tx);
        let paths = tracer.paths(&ctx, &rx);
        // Top-left corner (0, 20) is the only silhouette edge for both ends.
        assert_eq!(paths.len(), 1, "{paths:?}");
        let p = &paths[0];
        assert_eq!(p.kinds, vec![InteractionKind::Diffraction]);
        assert!((p.vertices[1].x).abs() < 1e-12 && (p.vertices[1].y - 20.0).abs() < 1e-12);
        assert!(p.gain.norm_sqr() < friis_gain(c.wavelength(), p.length));
        // Visible receiver: no diffraction.
        assert_eq!(tracer.paths(&ctx, &Vec3::new(-30.0, 40.0, 1.6)).len(), 1);
        assert!(tracer.paths(&ctx, &Vec3::new(-30.0, 40.0, 1.6))[0].kinds.is_empty());
    }

    #[test]
    fn generated_city_invariants() {
        let spec = crate::scenegen::BlockSpec::archetype(crate::scenegen::Archetype::Mix, 7);
        let scene = crate::scenegen::generate_city(&spec).unwrap();
        let c = cfg(Toggles::all(), 20);
        let tracer = Tracer::new(&scene, &c).unwrap();
        let tx = crate::scenegen::sample_tx_positions(&scene, 1, 3).unwrap()[0];
        let ctx = tracer.prepare_tx(tx);
        let mut rng = crate::seed::rng(11);
        use rand::Rng;
        for _ in 0..200 {
            let rx = Vec3::new(rng.gen_range(-95.0..95.0), rng.gen_range(-95.0..95.0), rng.gen_range(0.5..20.0));
            let paths = tracer.paths(&ctx, &rx);
            let d = (rx - tx).norm();
            let mut g = Complex64::new(0.0, 0.0);
            for p in &paths {
                assert!(p.length >= d - 1e-9);
                assert!(p.kinds.len() <= c.max_depth as usize);
                assert_eq!(p.kinds.len() + 2, p.vertices.len());
                assert!(p.gain.norm() <= friis_gain(c.wavelength(), p.length).sqrt() * (1.0 + 1e-12));
                g += p.gain;
            }
            assert!(g.norm_sqr() <= 1.0);
            let again = tracer.paths(&ctx, &rx);
            assert_eq!(paths, again);
        }
    }

    fn toggles_from(bits: u8) -> Toggles {
        Toggles {
            los: bits & 1 != 0,
            specular_reflection: bits & 2 != 0,
            refraction: bits & 4 != 0,
            diffraction: bits & 8 != 0,
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn enabling_a_mechanism_never_removes_paths(
            bits in 0u8..16, extra in 0usize..4,
            rx in (-90.0f64..90.0, -90.0f64..90.0, 0.5f64..30.0),
        ) {
            let spec = crate::scenegen::BlockSpec::archetype(crate::scenegen::Archetype::Downtown, 5);
            let scene = crate::scenegen::generate_city(&spec).unwrap();
            let tx = crate::scenegen::sample_tx_positions(&scene, 1, 9).unwrap()[0];
            let rx = Vec3::new(rx.0, rx.1, rx.2);
            let base = toggles_from(bits);
            let more = toggles_from(bits | (1 << extra));
            let mut c = cfg(base, 2);
            let a = compute_paths(&scene, &tx, &rx, &c).unwrap().len();
            c.toggles = more;
            let b = compute_paths(&scene, &tx, &rx, &c).unwrap().len();
            prop_assert!(b >= a, "{a} -> {b} with {base:?} -> {more:?}");
        }
    }
}
