//! Binary little-endian PLY for VAS meshes with per-face path gain.

use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::vas::VasMesh;

/// Mesh as stored on disk: only referenced vertices, reindexed in first-use
/// order.
#[derive(Clone, Debug, PartialEq)]
pub struct PlyMesh {
    pub vertices: Vec<Vec3>,
    pub faces: Vec<[u32; 3]>,
    pub path_gain_db: Vec<f32>,
    /// Source pixel quad `(u, v)` per face.
    pub pixels: Vec<(u32, u32)>,
}

impl PlyMesh {
    /// `gain_db` per face, NaN where no path reached it.
    pub fn from_vas(mesh: &VasMesh, gain_db: &[f32]) -> Result<Self> {
        if gain_db.len() != mesh.faces.len() {
            return Err(Error::DimensionMismatch {
                expected: (mesh.faces.len(), 1),
                got: (gain_db.len(), 1),
            });
        }
        let mut remap = vec![u32::MAX; mesh.vertices.len()];
        let mut vertices = Vec::new();
        let faces = mesh
            .faces
            .iter()
            .map(|f| {
                f.map(|i| {
                    let slot = &mut remap[i as usize];
                    if *slot == u32::MAX {
                        *slot = vertices.len() as u32;
                        vertices.push(mesh.vertices[i as usize]);
                    }
                    *slot
                })
            })
            .collect();
        Ok(PlyMesh {
            vertices,
            faces,
            path_gain_db: gain_db.to_vec(),
            pixels: mesh.pixel_of_face.iter().map(|p| (p.u, p.v)).collect(),
        })
    }
}

const HEADER_PREFIX: &str = "ply\nformat binary_little_endian 1.0\n";

pub fn encode_ply(m: &PlyMesh) -> Vec<u8> {
    let header = format!(
        "{HEADER_PREFIX}element vertex {}\nproperty double x\nproperty double y\nproperty double z\n\
         element face {}\nproperty list uchar int vertex_indices\nproperty float path_gain_db\n\
         property int pixel_u\nproperty int pixel_v\nend_header\n",
        m.vertices.len(),
        m.faces.len()
    );
    let mut out = header.into_bytes();
    for v in &m.vertices {
        for c in [v.x, v.y, v.z] {
            out.extend_from_slice(&c.to_le_bytes());
        }
    }
    for ((f, g), (u, v)) in m.faces.iter().zip(&m.path_gain_db).zip(&m.pixels) {
        out.push(3);
        for i in f {
            out.extend_from_slice(&(*i as i32).to_le_bytes());
        }
        out.extend_from_slice(&g.to_le_bytes());
        out.extend_from_slice(&(*u as i32).to_le_bytes());
        out.extend_from_slice(&(*v as i32).to_le_bytes());
    }
    out
}

struct Cursor<'a> {
    b: &'a [u8],
    i: usize,
}

impl Cursor<'_> {
    fn take<const N: usize>(&mut self) -> Result<[u8; N]> {
        let s = self
            .b
            .get(self.i..self.i + N)
            .ok_or_else(|| Error::format("PLY", "truncated payload"))?;
        self.i += N;
        Ok(s.try_into().unwrap())
    }
}

/// Reads files produced by [`encode_ply`].
pub fn decode_ply(bytes: &[u8]) -> Result<PlyMesh> {
    let end = b"end_header\n";
    let pos = bytes
        .windows(end.len())
        .position(|w| w == end)
        .ok_or_else(|| Error::format("PLY", "missing end_header"))?;
    let header = std::str::from_utf8(&bytes[..pos]).map_err(|_| Error::format("PLY", "non-ASCII header"))?;
    if !header.starts_with(HEADER_PREFIX) {
        return Err(Error::format("PLY", "expected binary_little_endian 1.0"));
    }
    let count = |name: &str| -> Result<usize> {
        header
            .lines()
            .find_map(|l| l.strip_prefix(&format!("element {name} ")))
            .and_then(|n| n.trim().parse().ok())
            .ok_or_else(|| Error::format("PLY", format!("missing element {name}")))
    };
    let nv = count("vertex")?;
    let nf = count("face")?;
    let mut c = Cursor {
        b: &bytes[pos + end.len()..],
        i: 0,
    };
    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let x = f64::from_le_bytes(c.take()?);
        let y = f64::from_le_bytes(c.take()?);
        let z = f64::from_le_bytes(c.take()?);
        vertices.push(Vec3::new(x, y, z));
    }
    let mut faces = Vec::with_capacity(nf);
    let mut gains = Vec::with_capacity(nf);
    let mut pixels = Vec::with_capacity(nf);
    for _ in 0..nf {
        if c.take::<1>()?[0] != 3 {
            return Err(Error::format("PLY", "non-triangular face"));
        }
        let mut f = [0u32; 3];
        for slot in &mut f {
            let i = i32::from_le_bytes(c.take()?);
            if i < 0 || i as usize >= nv {
                return Err(Error::format("PLY", format!("vertex index {i} out of range")));
            }
            *slot = i as u32;
        }
        faces.push(f);
        gains.push(f32::from_le_bytes(c.take()?));
        let u = i32::from_le_bytes(c.take()?);
        let v = i32::from_le_bytes(c.take()?);
        pixels.push((u as u32, v as u32));
    }
    if c.i != c.b.len() {
        return Err(Error::format("PLY", "trailing bytes"));
    }
    Ok(PlyMesh {
        vertices,
        faces,
        path_gain_db: gains,
        pixels,
    })
}

pub fn write_ply(path: &Path, m: &PlyMesh) -> Result<()> {
    std::fs::write(path, encode_ply(m)).map_err(|e| Error::io(path, e))
}

pub fn read_ply(path: &Path) -> Result<PlyMesh> {
    decode_ply(&std::fs::read(path).map_err(|e| Error::io(path, e))?)
}
