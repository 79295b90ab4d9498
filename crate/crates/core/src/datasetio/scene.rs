//! Scene geometry and sidecar metadata files.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scenegen::{Footprint, Material, Scene, SemanticClass};

/// ASCII OBJ: one group per semantic class, three vertices and one normal
/// per triangle, `usemtl` naming the material.
pub fn scene_to_obj(scene: &Scene) -> String {
    let mut s = String::from("# synthrm scene\n");
    let classes = [
        SemanticClass::Terrain,
        SemanticClass::Road,
        SemanticClass::BuildingWall,
        SemanticClass::BuildingRoof,
    ];
    let mut v = 1usize;
    for class in classes {
        let tris: Vec<_> = scene.triangles.iter().filter(|t| t.class == class).collect();
        if tris.is_empty() {
            continue;
        }
        let _ = writeln!(s, "g {}", class.name());
        let mut material = None;
        for t in tris {
            if material != Some(t.material) {
                let name = scene
                    .materials
                    .get(t.material as usize)
                    .map_or("unknown", |m| m.name.as_str());
                let _ = writeln!(s, "usemtl {name}");
                material = Some(t.material);
            }
            for p in &t.vertices {
                let _ = writeln!(s, "v {} {} {}", p.x, p.y, p.z);
            }
            let _ = writeln!(s, "vn {} {} {}", t.normal.x, t.normal.y, t.normal.z);
            let n = v / 3 + 1;
            let _ = writeln!(s, "f {}//{n} {}//{n} {}//{n}", v, v + 1, v + 2);
            v += 3;
        }
    }
    s
}

/// Triangle count per group name, in file order.
pub fn obj_group_counts(text: &str) -> Result<Vec<(String, usize)>> {
    let mut out: Vec<(String, usize)> = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let mut it = line.split_whitespace();
        match it.next() {
            Some("g") => out.push((it.collect::<Vec<_>>().join(" "), 0)),
            Some("f") => {
                if it.count() != 3 {
                    return Err(Error::format("OBJ", format!("line {}: non-triangular face", ln + 1)));
                }
                match out.last_mut() {
                    Some(g) => g.1 += 1,
                    None => return Err(Error::format("OBJ", "face outside a group")),
                }
            }
            _ => {}
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaterialEntry {
    pub id: u16,
    #[serde(flatten)]
    pub material: Material,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaterialsFile {
    pub materials: Vec<MaterialEntry>,
}

impl MaterialsFile {
    pub fn from_scene(scene: &Scene) -> Self {
        MaterialsFile {
            materials: scene
                .materials
                .iter()
                .enumerate()
                .map(|(i, m)| MaterialEntry {
                    id: i as u16,
                    material: m.clone(),
                })
                .collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FootprintsFile {
    pub datum_z: f64,
    pub footprints: Vec<Footprint>,
}

impl FootprintsFile {
    pub fn from_scene(scene: &Scene) -> Self {
        FootprintsFile {
            datum_z: scene.datum_z,
            footprints: scene.footprints.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenegen::{generate_city, Archetype, BlockSpec};

    #[test]
    fn obj_groups_match_classes() {
        let scene = generate_city(&BlockSpec::archetype(Archetype::Margin, 3)).unwrap();
        let text = scene_to_obj(&scene);
        let groups = obj_group_counts(&text).unwrap();
        let total: usize = groups.iter().map(|g| g.1).sum();
        assert_eq!(total, scene.triangles.len());
        for (name, n) in &groups {
            let expect = scene.triangles.iter().filter(|t| t.class.name() == name).count();
            assert_eq!(*n, expect, "{name}");
        }
        assert_eq!(text.lines().filter(|l| l.starts_with("v ")).count(), 3 * scene.triangles.len());
        assert!(text.contains("usemtl concrete") && text.contains("usemtl very_dry_ground"));
    }

    #[test]
    fn sidecars_round_trip() {
        let scene = generate_city(&BlockSpec::archetype(Archetype::Mix, 4)).unwrap();
        let m = MaterialsFile::from_scene(&scene);
        let json = serde_json::to_string_pretty(&m).unwrap();
        assert!(json.contains("\"permittivity_coeffs\""));
        assert_eq!(serde_json::from_str::<MaterialsFile>(&json).unwrap(), m);
        let f = FootprintsFile::from_scene(&scene);
        let back: FootprintsFile = serde_json::from_str(&serde_json::to_string(&f).unwrap()).unwrap();
        assert_eq!(back, f);
    }
}
