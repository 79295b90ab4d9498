//! Procedural Manhattan-grid cities and transmitter placement.
//!
//! A scene is a flat terrain plane at `datum_z = 0` tiled into lot and road
//! rectangles, plus extruded buildings with rectangular (optionally
//! L-shaped) footprints. Every triangle carries a material id, a semantic
//! class and a planar surface id; triangles sharing a surface id are
//! coplanar, which is what the image-method tracer reflects off.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{point_in_polygon, polygon_signed_area, Aabb, Vec3};
use crate::seed;

/// Transmitter and ground-agent height above the datum, meters.
pub const AGENT_HEIGHT: f64 = 1.6;

/// Ground reference elevation of every generated scene.
pub const DATUM_Z: f64 = 0.0;

pub const MATERIAL_CONCRETE: u16 = 0;
pub const MATERIAL_VERY_DRY_GROUND: u16 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Archetype {
    Downtown,
    Mix,
    Margin,
}

impl Archetype {
    pub fn name(self) -> &'static str {
        match self {
            Archetype::Downtown => "Downtown",
            Archetype::Mix => "Mix",
            Archetype::Margin => "Margin",
        }
    }
}

/// High-level city-block parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockSpec {
    pub archetype: Archetype,
    /// Side of the square scene, meters.
    pub grid_extent: f64,
    pub street_width: f64,
    pub lot_size: f64,
    /// `(min, max)` building height, meters.
    pub building_height_range: (f64, f64),
    pub density: f64,
    pub seed: u64,
}

impl BlockSpec {
    /// Archetype defaults on a 200 m square.
    pub fn archetype(archetype: Archetype, seed: u64) -> Self {
        let (density, heights) = match archetype {
            Archetype::Downtown => (0.85, (40.0, 150.0)),
            Archetype::Mix => (0.6, (10.0, 60.0)),
            Archetype::Margin => (0.35, (4.0, 15.0)),
        };
        BlockSpec {
            archetype,
            grid_extent: 200.0,
            street_width: 15.0,
            lot_size: 30.0,
            building_height_range: heights,
            density,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidBlockSpec(m.to_string()));
        if !(self.street_width > 0.0) {
            return bad("street_width must be > 0");
        }
        if !(self.lot_size > 0.0) {
            return bad("lot_size must be > 0");
        }
        if !(0.0..=1.0).contains(&self.density) {
            return bad("density must lie in [0, 1]");
        }
        let (lo, hi) = self.building_height_range;
        if !(lo > 0.0) || !(lo <= hi) || !hi.is_finite() {
            return bad("height range needs 0 < min <= max");
        }
        if !self.grid_extent.is_finite() || self.grid_extent <= 0.0 {
            return bad("grid_extent must be positive and finite");
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[repr(u8)]
pub enum SemanticClass {
    Terrain = 0,
    Road = 1,
    BuildingWall = 2,
    BuildingRoof = 3,
    /// Rasterizer sentinel for uncovered pixels; never stored in a scene.
    Sky = 255,
}

impl SemanticClass {
    pub fn id(self) -> u8 {
        self as u8
    }

    pub fn from_id(id: u8) -> Option<Self> {
        Some(match id {
            0 => SemanticClass::Terrain,
            1 => SemanticClass::Road,
            2 => SemanticClass::BuildingWall,
            3 => SemanticClass::BuildingRoof,
            255 => SemanticClass::Sky,
            _ => return None,
        })
    }

    pub fn is_building(self) -> bool {
        matches!(self, SemanticClass::BuildingWall | SemanticClass::BuildingRoof)
    }

    pub fn name(self) -> &'static str {
        match self {
            SemanticClass::Terrain => "terrain",
            SemanticClass::Road => "road",
            SemanticClass::BuildingWall => "building_wall",
            SemanticClass::BuildingRoof => "building_roof",
            SemanticClass::Sky => "sky",
        }
    }
}

/// Radio material with power-law frequency dependence (ITU-R P.2040 form):
/// `eps_r'(f) = a * f_GHz^b`, `sigma(f) = c * f_GHz^d` S/m.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Material {
    pub name: String,
    pub permittivity_coeffs: (f64, f64),
    pub conductivity_coeffs: (f64, f64),
    /// Rendering only.
    pub albedo: f64,
    /// Rendering only.
    pub roughness: f64,
    /// Slab thickness used for through-surface transmission, meters.
    pub thickness: f64,
}

impl Material {
    pub fn concrete() -> Self {
        Material {
            name: "concrete".into(),
            permittivity_coeffs: (5.24, 0.0),
            conductivity_coeffs: (0.0462, 0.7822),
            albedo: 0.62,
            roughness: 0.8,
            thickness: 0.2,
        }
    }

    pub fn very_dry_ground() -> Self {
        Material {
            name: "very_dry_ground".into(),
            permittivity_coeffs: (3.0, 0.0),
            conductivity_coeffs: (0.00015, 2.52),
            albedo: 0.35,
            roughness: 0.95,
            thickness: 1.0,
        }
    }

    pub fn relative_permittivity(&self, frequency_hz: f64) -> f64 {
        let (a, b) = self.permittivity_coeffs;
        a * (frequency_hz * 1e-9).powf(b)
    }

    pub fn conductivity(&self, frequency_hz: f64) -> f64 {
        let (c, d) = self.conductivity_coeffs;
        c * (frequency_hz * 1e-9).powf(d)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Triangle {
    pub vertices: [Vec3; 3],
    /// Outward unit normal.
    pub normal: Vec3,
    pub material: u16,
    pub class: SemanticClass,
    /// Planar surface (facet) id; triangles sharing it are coplanar.
    pub surface: u32,
}

/// Building ground outline, counter-clockwise, with its extrusion height.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Footprint {
    pub polygon: Vec<[f64; 2]>,
    pub height: f64,
}

/// Axis-aligned street strip on the terrain plane.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoadStrip {
    pub min: [f64; 2],
    pub max: [f64; 2],
    /// 0 when the strip runs along x, 1 when along y.
    pub axis: u8,
}

impl RoadStrip {
    pub fn centerline(&self) -> ([f64; 2], [f64; 2]) {
        let cx = 0.5 * (self.min[0] + self.max[0]);
        let cy = 0.5 * (self.min[1] + self.max[1]);
        if self.axis == 0 {
            ([self.min[0], cy], [self.max[0], cy])
        } else {
            ([cx, self.min[1]], [cx, self.max[1]])
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub triangles: Vec<Triangle>,
    pub footprints: Vec<Footprint>,
    pub roads: Vec<RoadStrip>,
    /// Indexed by `Triangle::material`.
    pub materials: Vec<Material>,
    pub bounds: Aabb,
    pub datum_z: f64,
}

impl Scene {
    /// An empty scene: a bare ground plane of the given half-size.
    pub fn ground_plane(half_extent: f64) -> Self {
        let mut b = SceneBuilder::new();
        let e = half_extent;
        b.quad_xy([-e, -e], [e, e], 0.0, SemanticClass::Terrain, 0);
        let mut scene = b.finish(Vec::new(), Vec::new());
        scene.bounds.min[2] = 0.0;
        scene.bounds.max[2] = 0.0;
        scene
    }

    /// Scene from raw triangles; normals, materials and surfaces as given.
    pub fn from_triangles(triangles: Vec<Triangle>) -> Self {
        let mut bounds = Aabb::empty();
        for t in &triangles {
            for v in &t.vertices {
                bounds.grow(v);
            }
        }
        Scene {
            triangles,
            footprints: Vec::new(),
            roads: Vec::new(),
            materials: default_materials(),
            bounds,
            datum_z: 0.0,
        }
    }

    pub fn surface_count(&self) -> u32 {
        self.triangles.iter().map(|t| t.surface + 1).max().unwrap_or(0)
    }

    pub fn max_height(&self) -> f64 {
        self.footprints.iter().map(|f| f.height).fold(0.0, f64::max)
    }

    pub fn inside_footprint(&self, x: f64, y: f64) -> bool {
        self.footprints.iter().any(|f| point_in_polygon([x, y], &f.polygon))
    }

    /// Checks the structural invariants every generated scene must satisfy.
    pub fn check_invariants(&self) -> std::result::Result<(), String> {
        for (i, t) in self.triangles.iter().enumerate() {
            if (t.normal.norm() - 1.0).abs() >= 1e-6 {
                return Err(format!("triangle {i}: normal not unit"));
            }
            if t.class == SemanticClass::Sky {
                return Err(format!("triangle {i}: sky class in scene"));
            }
            if t.material as usize >= self.materials.len() {
                return Err(format!("triangle {i}: unknown material"));
            }
            for v in &t.vertices {
                if !self.bounds.contains(v, 1e-9) {
                    return Err(format!("triangle {i}: vertex outside bounds"));
                }
            }
            match t.class {
                SemanticClass::BuildingWall if t.normal.z.abs() >= 1e-6 => {
                    return Err(format!("triangle {i}: wall normal not horizontal"));
                }
                SemanticClass::BuildingRoof if t.normal.z <= 1.0 - 1e-9 => {
                    return Err(format!("triangle {i}: roof normal not +z"));
                }
                _ => {}
            }
        }
        for (i, f) in self.footprints.iter().enumerate() {
            if !crate::geometry::polygon_is_simple(&f.polygon) {
                return Err(format!("footprint {i}: not simple"));
            }
        }
        Ok(())
    }
}

pub fn default_materials() -> Vec<Material> {
    vec![Material::concrete(), Material::very_dry_ground()]
}

/// Generates a city block from its spec. Pure in `spec` (including the seed).
pub fn generate_city(spec: &BlockSpec) -> Result<Scene> {
    spec.validate()?;
    let pitch = spec.lot_size + spec.street_width;
    if spec.grid_extent < 2.0 * pitch {
        return Err(Error::SceneTooSmall {
            extent: spec.grid_extent,
            block: 2.0 * pitch,
        });
    }
    let half = 0.5 * spec.grid_extent;
    let n = ((spec.grid_extent - spec.street_width) / pitch).floor() as usize;
    let used = n as f64 * pitch + spec.street_width;
    let origin = -0.5 * used;

    // Breakpoints along one axis; interval k is a street when `is_street[k]`.
    let mut cuts = vec![-half];
    let mut is_street = Vec::new();
    if origin > -half {
        cuts.push(origin);
        is_street.push(false);
    }
    for k in 0..=n {
        let s0 = origin + k as f64 * pitch;
        cuts.push(s0 + spec.street_width);
        is_street.push(true);
        if k < n {
            cuts.push(s0 + pitch);
            is_street.push(false);
        }
    }
    if origin + used < half {
        cuts.push(half);
        is_street.push(false);
    }
    let inside_grid = |lo: f64, hi: f64| lo >= origin - 1e-9 && hi <= origin + used + 1e-9;

    let mut b = SceneBuilder::new();
    for j in 0..is_street.len() {
        for i in 0..is_street.len() {
            let (x0, x1) = (cuts[i], cuts[i + 1]);
            let (y0, y1) = (cuts[j], cuts[j + 1]);
            let road = (is_street[i] && inside_grid(y0, y1)) || (is_street[j] && inside_grid(x0, x1));
            let class = if road { SemanticClass::Road } else { SemanticClass::Terrain };
            b.quad_xy([x0, y0], [x1, y1], DATUM_Z, class, 0);
        }
    }

    let mut roads = Vec::new();
    for k in 0..=n {
        let s0 = origin + k as f64 * pitch;
        let s1 = s0 + spec.street_width;
        roads.push(RoadStrip {
            min: [s0, origin],
            max: [s1, origin + used],
            axis: 1,
        });
        roads.push(RoadStrip {
            min: [origin, s0],
            max: [origin + used, s1],
            axis: 0,
        });
    }

    let mut rng = seed::rng(seed::child(spec.seed, seed::stream::SCENE));
    let setback = (0.1 * spec.lot_size).max(0.5).min(0.25 * spec.lot_size);
    let (hmin, hmax) = spec.building_height_range;
    let mut footprints = Vec::new();
    for j in 0..n {
        for i in 0..n {
            // Fixed draw count per lot keeps later lots independent of
            // earlier occupancy outcomes.
            let occupied_draw: f64 = rng.gen();
            let height_draw: f64 = rng.gen();
            let l_draw: f64 = rng.gen();
            let corner: u8 = rng.gen_range(0..4);
            let cut_fx: f64 = rng.gen_range(0.35..0.6);
            let cut_fy: f64 = rng.gen_range(0.35..0.6);
            if occupied_draw >= spec.density {
                continue;
            }
            let height = hmin + (hmax - hmin) * height_draw;
            let x0 = origin + i as f64 * pitch + spec.street_width + setback;
            let y0 = origin + j as f64 * pitch + spec.street_width + setback;
            let side = spec.lot_size - 2.0 * setback;
            let polygon = if l_draw < 0.3 {
                l_footprint([x0, y0], side, corner, cut_fx * side, cut_fy * side)
            } else {
                vec![[x0, y0], [x0 + side, y0], [x0 + side, y0 + side], [x0, y0 + side]]
            };
            debug_assert!(polygon_signed_area(&polygon) > 0.0);
            b.extrude(&polygon, DATUM_Z, height);
            footprints.push(Footprint { polygon, height });
        }
    }
    let mut scene = b.finish(footprints, roads);
    scene.bounds = Aabb {
        min: [-half, -half, DATUM_Z],
        max: [half, half, DATUM_Z + scene.max_height()],
    };
    Ok(scene)
}

/// Square of side `side` at `origin` with the `corner` quadrant notched out.
fn l_footprint(o: [f64; 2], side: f64, corner: u8, cx: f64, cy: f64) -> Vec<[f64; 2]> {
    let (x0, y0, x1, y1) = (o[0], o[1], o[0] + side, o[1] + side);
    match corner {
        0 => vec![[x0 + cx, y0], [x1, y0], [x1, y1], [x0, y1], [x0, y0 + cy], [x0 + cx, y0 + cy]],
        1 => vec![[x0, y0], [x1 - cx, y0], [x1 - cx, y0 + cy], [x1, y0 + cy], [x1, y1], [x0, y1]],
        2 => vec![[x0, y0], [x1, y0], [x1, y1 - cy], [x1 - cx, y1 - cy], [x1 - cx, y1], [x0, y1]],
        _ => vec![[x0, y0], [x1, y0], [x1, y1], [x0 + cx, y1], [x0 + cx, y1 - cy], [x0, y1 - cy]],
    }
}

/// Ear-clipping triangulation of a simple counter-clockwise polygon.
pub fn triangulate_polygon(poly: &[[f64; 2]]) -> Vec<[usize; 3]> {
    let mut idx: Vec<usize> = (0..poly.len()).collect();
    let mut out = Vec::new();
    let cross = |a: [f64; 2], b: [f64; 2], c: [f64; 2]| (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]);
    let mut guard = 0;
    while idx.len() > 3 && guard < 10_000 {
        guard += 1;
        let m = idx.len();
        let mut clipped = false;
        for k in 0..m {
            let (ia, ib, ic) = (idx[(k + m - 1) % m], idx[k], idx[(k + 1) % m]);
            let (a, b, c) = (poly[ia], poly[ib], poly[ic]);
            if cross(a, b, c) <= 0.0 {
                continue;
            }
            let contains_other = idx.iter().any(|&q| {
                if q == ia || q == ib || q == ic {
                    return false;
                }
                let p = poly[q];
                cross(a, b, p) >= 0.0 && cross(b, c, p) >= 0.0 && cross(c, a, p) >= 0.0
            });
            if contains_other {
                continue;
            }
            out.push([ia, ib, ic]);
            idx.remove(k);
            clipped = true;
            break;
        }
        if !clipped {
            break;
        }
    }
    if idx.len() == 3 {
        out.push([idx[0], idx[1], idx[2]]);
    }
    out
}

struct SceneBuilder {
    triangles: Vec<Triangle>,
    next_surface: u32,
}

impl SceneBuilder {
    fn new() -> Self {
        SceneBuilder {
            triangles: Vec::new(),
            next_surface: 1,
        }
    }

    fn push(&mut self, v: [Vec3; 3], normal: Vec3, material: u16, class: SemanticClass, surface: u32) {
        self.triangles.push(Triangle {
            vertices: v,
            normal,
            material,
            class,
            surface,
        });
    }

    /// Upward-facing ground rectangle on surface `surface`.
    fn quad_xy(&mut self, lo: [f64; 2], hi: [f64; 2], z: f64, class: SemanticClass, surface: u32) {
        let p = |x: f64, y: f64| Vec3::new(x, y, z);
        let n = Vec3::z();
        let m = MATERIAL_VERY_DRY_GROUND;
        self.push([p(lo[0], lo[1]), p(hi[0], lo[1]), p(hi[0], hi[1])], n, m, class, surface);
        self.push([p(lo[0], lo[1]), p(hi[0], hi[1]), p(lo[0], hi[1])], n, m, class, surface);
    }

    fn extrude(&mut self, poly: &[[f64; 2]], z0: f64, height: f64) {
        let z1 = z0 + height;
        let m = poly.len();
        for k in 0..m {
            let a = poly[k];
            let b = poly[(k + 1) % m];
            let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
            let len = (dx * dx + dy * dy).sqrt();
            let n = Vec3::new(dy / len, -dx / len, 0.0);
            let s = self.next_surface;
            self.next_surface += 1;
            let a0 = Vec3::new(a[0], a[1], z0);
            let b0 = Vec3::new(b[0], b[1], z0);
            let a1 = Vec3::new(a[0], a[1], z1);
            let b1 = Vec3::new(b[0], b[1], z1);
            self.push([a0, b0, b1], n, MATERIAL_CONCRETE, SemanticClass::BuildingWall, s);
            self.push([a0, b1, a1], n, MATERIAL_CONCRETE, SemanticClass::BuildingWall, s);
        }
        let s = self.next_surface;
        self.next_surface += 1;
        for [i, j, k] in triangulate_polygon(poly) {
            let v = |q: usize| Vec3::new(poly[q][0], poly[q][1], z1);
            self.push([v(i), v(j), v(k)], Vec3::z(), MATERIAL_CONCRETE, SemanticClass::BuildingRoof, s);
        }
    }

    fn finish(self, footprints: Vec<Footprint>, roads: Vec<RoadStrip>) -> Scene {
        let mut bounds = Aabb::empty();
        for t in &self.triangles {
            for v in &t.vertices {
                bounds.grow(v);
            }
        }
        Scene {
            triangles: self.triangles,
            footprints,
            roads,
            materials: default_materials(),
            bounds,
            datum_z: 0.0,
        }
    }
}

/// Samples `n` transmitter positions at agent height, uniform over the scene
/// area outside every building footprint.
pub fn sample_tx_positions(scene: &Scene, n: usize, seed: u64) -> Result<Vec<Vec3>> {
    if n == 0 {
        return Err(Error::Config("transmitter count must be >= 1".into()));
    }
    let budget = 10_000u64 * n as u64;
    let mut rng = seed::rng(seed::child(seed, seed::stream::TX));
    let (x0, x1) = (scene.bounds.min[0], scene.bounds.max[0]);
    let (y0, y1) = (scene.bounds.min[1], scene.bounds.max[1]);
    let mut out = Vec::with_capacity(n);
    let mut attempts = 0u64;
    while out.len() < n {
        if attempts >= budget {
            return Err(Error::TxBudgetExhausted {
                attempts,
                accepted: out.len(),
                requested: n,
            });
        }
        attempts += 1;
        let x = rng.gen_range(x0..=x1);
        let y = rng.gen_range(y0..=y1);
        if scene.inside_footprint(x, y) {
            continue;
        }
        out.push(Vec3::new(x, y, scene.datum_z + AGENT_HEIGHT));
    }
    Ok(out)
}
