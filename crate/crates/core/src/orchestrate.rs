//! Sensing graph over camera poses and perception-community detection.
//!
//! Edge weights are the IoU of the scene-triangle sets two views see.
//! Communities come from a deterministic Louvain optimizer of generalized
//! modularity
//!
//! `Q = sum_c [ L_c / 2m - gamma (K_c / 2m)^2 ]`
//!
//! where `L_c` is the ordered-pair weight inside community `c` and `K_c` its
//! total degree.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::render::{CameraModel, ViewBuffers};

/// Edges lighter than this are omitted.
pub const MIN_EDGE_WEIGHT: f64 = 0.01;

const GAIN_EPS: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SensingNode {
    pub pose_id: usize,
    pub camera: CameraModel,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SensingEdge {
    pub i: usize,
    pub j: usize,
    pub weight: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SensingGraph {
    pub nodes: Vec<SensingNode>,
    /// `i < j`, sorted by `(i, j)`.
    pub edges: Vec<SensingEdge>,
    #[serde(default)]
    pub communities: Option<Vec<usize>>,
}

impl SensingGraph {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Graph over bare node count and weighted edges; pose ids are indices.
    pub fn from_edges(n: usize, camera: CameraModel, edges: &[(usize, usize, f64)]) -> Result<Self> {
        let nodes = (0..n)
            .map(|pose_id| SensingNode {
                pose_id,
                camera: camera.clone(),
            })
            .collect();
        let mut out = Vec::with_capacity(edges.len());
        for &(a, b, w) in edges {
            if a == b || a >= n || b >= n {
                return Err(Error::Config(format!("invalid edge ({a}, {b}) for {n} nodes")));
            }
            if !(0.0..=1.0).contains(&w) {
                return Err(Error::Config(format!("edge weight {w} outside [0, 1]")));
            }
            out.push(SensingEdge {
                i: a.min(b),
                j: a.max(b),
                weight: w,
            });
        }
        out.sort_by_key(|e| (e.i, e.j));
        out.dedup_by_key(|e| (e.i, e.j));
        Ok(SensingGraph {
            nodes,
            edges: out,
            communities: None,
        })
    }

    /// Symmetric adjacency lists.
    pub fn adjacency(&self) -> Vec<Vec<(usize, f64)>> {
        let mut adj = vec![Vec::new(); self.nodes.len()];
        for e in &self.edges {
            adj[e.i].push((e.j, e.weight));
            adj[e.j].push((e.i, e.weight));
        }
        adj
    }
}

/// IoU of two sorted, deduplicated id sets; 0 when both are empty.
pub fn set_iou(a: &[u32], b: &[u32]) -> f64 {
    let (mut i, mut j, mut inter) = (0, 0, 0usize);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                inter += 1;
                i += 1;
                j += 1;
            }
        }
    }
    let union = a.len() + b.len() - inter;
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

/// Graph from explicit per-view visibility sets (sorted, deduplicated).
pub fn graph_from_visibility(cameras: &[CameraModel], visible: &[Vec<u32>]) -> Result<SensingGraph> {
    if cameras.is_empty() {
        return Err(Error::EmptyInput("sensing graph needs at least one view".into()));
    }
    if cameras.len() != visible.len() {
        return Err(Error::DimensionMismatch {
            expected: (cameras.len(), 1),
            got: (visible.len(), 1),
        });
    }
    let n = cameras.len();
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
    let edges = pairs
        .par_iter()
        .filter_map(|&(i, j)| {
            let w = set_iou(&visible[i], &visible[j]);
            (w >= MIN_EDGE_WEIGHT).then_some(SensingEdge { i, j, weight: w })
        })
        .collect();
    Ok(SensingGraph {
        nodes: cameras
            .iter()
            .enumerate()
            .map(|(pose_id, c)| SensingNode {
                pose_id,
                camera: c.clone(),
            })
            .collect(),
        edges,
        communities: None,
    })
}

/// Sensing graph from rendered views.
pub fn build_sensing_graph(cameras: &[CameraModel], views: &[ViewBuffers]) -> Result<SensingGraph> {
    let visible: Vec<Vec<u32>> = views.par_iter().map(|v| v.visible_triangles()).collect();
    graph_from_visibility(cameras, &visible)
}

/// Generalized modularity of a labeling.
pub fn modularity(graph: &SensingGraph, labels: &[usize], resolution: f64) -> f64 {
    let n = graph.len();
    let k = labels.iter().copied().max().map_or(0, |m| m + 1);
    let mut degree = vec![0.0; n];
    let mut inside = vec![0.0; k];
    let mut total = vec![0.0; k];
    let mut two_m = 0.0;
    for e in &graph.edges {
        degree[e.i] += e.weight;
        degree[e.j] += e.weight;
        two_m += 2.0 * e.weight;
        if labels[e.i] == labels[e.j] {
            inside[labels[e.i]] += 2.0 * e.weight;
        }
    }
    if two_m == 0.0 {
        return 0.0;
    }
    for (v, d) in degree.iter().enumerate() {
        total[labels[v]] += d;
    }
    inside
        .iter()
        .zip(&total)
        .map(|(l, t)| l / two_m - resolution * (t / two_m).powi(2))
        .sum()
}

/// Weighted graph with self-loops; `adj[i]` sorted by neighbor, self-loop
/// stored in `self_loop[i]` as the ordered-pair weight.
struct Level {
    adj: Vec<Vec<(usize, f64)>>,
    self_loop: Vec<f64>,
}

impl Level {
    fn degree(&self, i: usize) -> f64 {
        self.self_loop[i] + self.adj[i].iter().map(|(_, w)| w).sum::<f64>()
    }
}

/// One local-moving pass; returns community per node, contiguous by first
/// appearance, and whether any node moved.
fn local_moving(level: &Level, resolution: f64, two_m: f64) -> (Vec<usize>, bool) {
    let n = level.adj.len();
    let degree: Vec<f64> = (0..n).map(|i| level.degree(i)).collect();
    let mut comm: Vec<usize> = (0..n).collect();
    let mut tot = degree.clone();
    let mut moved_any = false;
    let mut weight_to = vec![0.0; n];
    let mut touched: Vec<usize> = Vec::new();
    loop {
        let mut moved = false;
        for i in 0..n {
            let own = comm[i];
            touched.clear();
            for &(j, w) in &level.adj[i] {
                let c = comm[j];
                if !touched.contains(&c) {
                    touched.push(c);
                }
                weight_to[c] += w;
            }
            tot[own] -= degree[i];
            let gain = |c: usize, wt: f64| wt - resolution * degree[i] * tot[c] / two_m;
            let mut best = own;
            let mut best_gain = gain(own, weight_to[own]);
            touched.sort_unstable();
            for &c in &touched {
                if c == own {
                    continue;
                }
                let g = gain(c, weight_to[c]);
                if g > best_gain + GAIN_EPS {
                    best = c;
                    best_gain = g;
                }
            }
            tot[best] += degree[i];
            if best != own {
                comm[i] = best;
                moved = true;
                moved_any = true;
            }
            for &c in &touched {
                weight_to[c] = 0.0;
            }
            weight_to[own] = 0.0;
        }
        if !moved {
            break;
        }
    }
    (relabel(&comm), moved_any)
}

fn relabel(comm: &[usize]) -> Vec<usize> {
    let mut map = std::collections::HashMap::new();
    comm.iter()
        .map(|&c| {
            let next = map.len();
            *map.entry(c).or_insert(next)
        })
        .collect()
}

fn aggregate(level: &Level, comm: &[usize]) -> Level {
    let k = comm.iter().copied().max().map_or(0, |m| m + 1);
    let mut self_loop = vec![0.0; k];
    let mut maps: Vec<std::collections::BTreeMap<usize, f64>> = vec![Default::default(); k];
    for i in 0..level.adj.len() {
        let ci = comm[i];
        self_loop[ci] += level.self_loop[i];
        for &(j, w) in &level.adj[i] {
            let cj = comm[j];
            if ci == cj {
                self_loop[ci] += w;
            } else {
                *maps[ci].entry(cj).or_insert(0.0) += w;
            }
        }
    }
    Level {
        adj: maps.into_iter().map(|m| m.into_iter().collect()).collect(),
        self_loop,
    }
}

/// Splits communities that are not edge-connected; never lowers modularity.
fn split_disconnected(graph: &SensingGraph, labels: &[usize]) -> Vec<usize> {
    let n = graph.len();
    let adj = graph.adjacency();
    let mut comp = vec![usize::MAX; n];
    let mut next = 0;
    for s in 0..n {
        if comp[s] != usize::MAX {
            continue;
        }
        comp[s] = next;
        let mut stack = vec![s];
        while let Some(v) = stack.pop() {
            for &(u, _) in &adj[v] {
                if comp[u] == usize::MAX && labels[u] == labels[s] {
                    comp[u] = next;
                    stack.push(u);
                }
            }
        }
        next += 1;
    }
    relabel(&comp)
}

/// Louvain community detection: ascending node order, ties toward the lower
/// community id, labels contiguous from 0 by first appearance.
pub fn detect_communities(graph: &SensingGraph, resolution: f64) -> Result<Vec<usize>> {
    if !(resolution > 0.0 && resolution.is_finite()) {
        return Err(Error::Config(format!("resolution must be > 0, got {resolution}")));
    }
    let n = graph.len();
    if n == 0 {
        return Ok(Vec::new());
    }
    let two_m: f64 = 2.0 * graph.edges.iter().map(|e| e.weight).sum::<f64>();
    if two_m == 0.0 {
        return Ok((0..n).collect());
    }
    let mut adj = graph.adjacency();
    for a in &mut adj {
        a.sort_by_key(|&(j, _)| j);
    }
    let mut level = Level {
        adj,
        self_loop: vec![0.0; n],
    };
    let mut labels: Vec<usize> = (0..n).collect();
    loop {
        let (comm, moved) = local_moving(&level, resolution, two_m);
        if !moved {
            break;
        }
        for l in labels.iter_mut() {
            *l = comm[*l];
        }
        level = aggregate(&level, &comm);
    }
    Ok(split_disconnected(graph, &relabel(&labels)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Vec3;
    use crate::render::Intrinsics;
    use rand::Rng;

    fn cam() -> CameraModel {
        CameraModel::look_at(Intrinsics::from_hfov(4, 4, 60.0), Vec3::new(0.0, 0.0, 10.0), Vec3::new(1.0, 0.0, 10.0)).unwrap()
    }

    fn cliques(k: usize, size: usize) -> Vec<(usize, usize, f64)> {
        let mut e = Vec::new();
        for c in 0..k {
            for a in 0..size {
                for b in a + 1..size {
                    e.push((c * size + a, c * size + b, 1.0));
                }
            }
        }
        e
    }

    #[test]
    fn iou_example() {
        let a: Vec<u32> = (1..=100).collect();
        let b: Vec<u32> = (51..=150).collect();
        assert!((set_iou(&a, &b) - 50.0 / 150.0).abs() < 1e-12);
        assert_eq!(set_iou(&a, &a), 1.0);
        assert_eq!(set_iou(&a, &[]), 0.0);
        let g = graph_from_visibility(&[cam(), cam(), cam()], &[a.clone(), b, vec![500, 501]]).unwrap();
        assert_eq!(g.edges.len(), 1);
        assert!((g.edges[0].weight - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn two_cliques() {
        let g = SensingGraph::from_edges(10, cam(), &cliques(2, 5)).unwrap();
        let l = detect_communities(&g, 1.0).unwrap();
        assert_eq!(l, vec![0, 0, 0, 0, 0, 1, 1, 1, 1, 1]);
    }

    #[test]
    fn singleton_and_edgeless() {
        let g = SensingGraph::from_edges(1, cam(), &[]).unwrap();
        assert_eq!(detect_communities(&g, 1.0).unwrap(), vec![0]);
        let g = SensingGraph::from_edges(3, cam(), &[]).unwrap();
        assert_eq!(detect_communities(&g, 1.0).unwrap(), vec![0, 1, 2]);
        assert!(detect_communities(&g, 0.0).is_err());
    }

    pub(crate) fn planted(seed: u64) -> Vec<(usize, usize, f64)> {
        let mut rng = crate::seed::rng(seed);
        let mut e = Vec::new();
        for a in 0..20 {
            for b in a + 1..20 {
                let same = (a < 10) == (b < 10);
                let base = if same { 0.9 } else { 0.05 };
                e.push((a, b, (base + rng.gen_range(-0.04..0.04f64)).clamp(0.0, 1.0)));
            }
        }
        e
    }

    #[test]
    fn planted_partition() {
        let g = SensingGraph::from_edges(20, cam(), &planted(17)).unwrap();
        let l = detect_communities(&g, 1.0).unwrap();
        let truth: Vec<usize> = (0..20).map(|i| usize::from(i >= 10)).collect();
        assert_eq!(l, truth);
        // Brute force over all two-way splits with node 0 fixed in group 0.
        let q = modularity(&g, &l, 1.0);
        let mut best = f64::NEG_INFINITY;
        for mask in 0u32..(1 << 19) {
            let lab: Vec<usize> = (0..20).map(|i| if i == 0 { 0 } else { ((mask >> (i - 1)) & 1) as usize }).collect();
            best = best.max(modularity(&g, &lab, 1.0));
        }
        assert!((q - best).abs() < 1e-12, "{q} vs {best}");
    }

    #[test]
    fn modularity_reference_values() {
        // Two triangles joined by one edge: Q = 5/14 for the natural split.
        let e = vec![(0, 1, 1.0), (1, 2, 1.0), (0, 2, 1.0), (3, 4, 1.0), (4, 5, 1.0), (3, 5, 1.0), (2, 3, 1.0)];
        let g = SensingGraph::from_edges(6, cam(), &e).unwrap();
        assert!((modularity(&g, &[0, 0, 0, 1, 1, 1], 1.0) - 5.0 / 14.0).abs() < 1e-12);
        assert!(modularity(&g, &[0; 6], 1.0).abs() < 1e-12);
        assert_eq!(detect_communities(&g, 1.0).unwrap(), vec![0, 0, 0, 1, 1, 1]);
    }

    #[test]
    fn graph_invariants_from_random_weights() {
        let mut rng = crate::seed::rng(5);
        for trial in 0..20 {
            let n = 3 + trial;
            let mut e = Vec::new();
            for a in 0..n {
                for b in a + 1..n {
                    if rng.gen_bool(0.3) {
                        e.push((a, b, rng.gen_range(0.01..1.0)));
                    }
                }
            }
            let g = SensingGraph::from_edges(n, cam(), &e).unwrap();
            let l = detect_communities(&g, 1.0).unwrap();
            let singles: Vec<usize> = (0..n).collect();
            assert!(modularity(&g, &l, 1.0) >= modularity(&g, &singles, 1.0) - 1e-12);
            // Contiguous labels.
            let k = l.iter().max().unwrap() + 1;
            assert!((0..k).all(|c| l.contains(&c)));
            // Each community is connected.
            assert_eq!(split_disconnected(&g, &l), l);
        }
    }

    #[test]
    fn relabeling_permutes_communities() {
        let e = planted(23);
        let mut rng = crate::seed::rng(2);
        let mut perm: Vec<usize> = (0..20).collect();
        for i in (1..20).rev() {
            perm.swap(i, rng.gen_range(0..=i));
        }
        let g = SensingGraph::from_edges(20, cam(), &e).unwrap();
        let pe: Vec<_> = e.iter().map(|&(a, b, w)| (perm[a], perm[b], w)).collect();
        let pg = SensingGraph::from_edges(20, cam(), &pe).unwrap();
        let l = detect_communities(&g, 1.0).unwrap();
        let pl = detect_communities(&pg, 1.0).unwrap();
        for a in 0..20 {
            for b in 0..20 {
                assert_eq!(l[a] == l[b], pl[perm[a]] == pl[perm[b]]);
            }
        }
    }
}
