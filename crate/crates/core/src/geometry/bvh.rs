//! Bounding volume hierarchy over a static triangle soup.
//!
//! Built once per scene and shared read-only by every probe evaluation.
//! Nodes are stored flat; each leaf owns a contiguous range of the
//! reordered triangle array.

use super::{ray_triangle, Aabb, Vec3};

const LEAF_SIZE: usize = 4;
const BINS: usize = 12;

#[derive(Clone, Copy, Debug)]
pub struct Hit {
    /// Distance along the query (meters for segments and unit-direction rays).
    pub t: f64,
    /// Index of the triangle in the slice the hierarchy was built from.
    pub tri: u32,
}

#[derive(Clone, Debug)]
struct Node {
    bounds: Aabb,
    /// Leaf: first triangle; inner: index of the right child (left is next).
    offset: u32,
    /// Zero for inner nodes.
    count: u32,
}

#[derive(Clone, Debug)]
struct PackedTri {
    v0: Vec3,
    e1: Vec3,
    e2: Vec3,
    id: u32,
}

#[derive(Clone, Debug)]
pub struct Bvh {
    nodes: Vec<Node>,
    tris: Vec<PackedTri>,
}

impl Bvh {
    pub fn new(triangles: &[[Vec3; 3]]) -> Self {
        let mut items: Vec<(Aabb, Vec3, u32)> = triangles
            .iter()
            .enumerate()
            .map(|(i, t)| {
                let mut b = Aabb::empty();
                for v in t {
                    b.grow(v);
                }
                (b, (t[0] + t[1] + t[2]) / 3.0, i as u32)
            })
            .collect();
        let mut nodes = Vec::with_capacity(2 * items.len().max(1));
        if !items.is_empty() {
            let n = items.len();
            build(&mut nodes, &mut items, 0, n);
        }
        let tris = items
            .iter()
            .map(|&(_, _, id)| {
                let t = &triangles[id as usize];
                PackedTri {
                    v0: t[0],
                    e1: t[1] - t[0],
                    e2: t[2] - t[0],
                    id,
                }
            })
            .collect();
        Bvh { nodes, tris }
    }

    pub fn len(&self) -> usize {
        self.tris.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tris.is_empty()
    }

    /// Visits every triangle hit by the ray `origin + t * dir` with
    /// `t_min < t < t_max`. The visitor returns `true` to stop traversal.
    /// Returns whether traversal was stopped early.
    pub fn visit_ray<F>(&self, origin: &Vec3, dir: &Vec3, t_min: f64, t_max: f64, mut visit: F) -> bool
    where
        F: FnMut(Hit) -> bool,
    {
        if self.nodes.is_empty() {
            return false;
        }
        let inv = Vec3::new(1.0 / dir.x, 1.0 / dir.y, 1.0 / dir.z);
        let mut stack: Vec<u32> = Vec::with_capacity(64);
        stack.push(0);
        while let Some(ni) = stack.pop() {
            let node = &self.nodes[ni as usize];
            if node.bounds.ray_entry(origin, &inv, t_max).is_none() {
                continue;
            }
            if node.count > 0 {
                let start = node.offset as usize;
                for tri in &self.tris[start..start + node.count as usize] {
                    if let Some(t) = ray_triangle(origin, dir, &tri.v0, &tri.e1, &tri.e2) {
                        if t > t_min && t < t_max && visit(Hit { t, tri: tri.id }) {
                            return true;
                        }
                    }
                }
            } else {
                stack.push(node.offset);
                stack.push(ni + 1);
            }
        }
        false
    }

    /// True when some triangle not rejected by `skip` crosses the open
    /// segment `a → b` shortened by `eps_a` / `eps_b` meters at each end.
    pub fn segment_occluded<S>(&self, a: &Vec3, b: &Vec3, eps_a: f64, eps_b: f64, skip: S) -> bool
    where
        S: Fn(u32) -> bool,
    {
        let d = b - a;
        let len = d.norm();
        if len <= eps_a + eps_b {
            return false;
        }
        let dir = d / len;
        self.visit_ray(a, &dir, eps_a, len - eps_b, |h| !skip(h.tri))
    }

    /// All hits along the shortened segment, sorted by distance then id.
    pub fn segment_hits<S>(&self, a: &Vec3, b: &Vec3, eps_a: f64, eps_b: f64, skip: S) -> Vec<Hit>
    where
        S: Fn(u32) -> bool,
    {
        let d = b - a;
        let len = d.norm();
        let mut out = Vec::new();
        if len <= eps_a + eps_b {
            return out;
        }
        let dir = d / len;
        self.visit_ray(a, &dir, eps_a, len - eps_b, |h| {
            if !skip(h.tri) {
                out.push(h);
            }
            false
        });
        out.sort_by(|x, y| x.t.total_cmp(&y.t).then(x.tri.cmp(&y.tri)));
        out
    }

    /// Nearest hit along a ray.
    pub fn first_hit(&self, origin: &Vec3, dir: &Vec3, t_max: f64) -> Option<Hit> {
        let mut best: Option<Hit> = None;
        let mut limit = t_max;
        if self.nodes.is_empty() {
            return None;
        }
        let inv = Vec3::new(1.0 / dir.x, 1.0 / dir.y, 1.0 / dir.z);
        let mut stack: Vec<u32> = vec![0];
        while let Some(ni) = stack.pop() {
            let node = &self.nodes[ni as usize];
            if node.bounds.ray_entry(origin, &inv, limit).is_none() {
                continue;
            }
            if node.count > 0 {
                let start = node.offset as usize;
                for tri in &self.tris[start..start + node.count as usize] {
                    if let Some(t) = ray_triangle(origin, dir, &tri.v0, &tri.e1, &tri.e2) {
                        let better = match best {
                            None => true,
                            Some(b) => t < b.t || (t == b.t && tri.id < b.tri),
                        };
                        if t > 0.0 && t <= limit && better {
                            best = Some(Hit { t, tri: tri.id });
                            limit = t;
                        }
                    }
                }
            } else {
                stack.push(node.offset);
                stack.push(ni + 1);
            }
        }
        best
    }
}

fn build(nodes: &mut Vec<Node>, items: &mut [(Aabb, Vec3, u32)], start: usize, end: usize) -> u32 {
    let idx = nodes.len() as u32;
    let mut bounds = Aabb::empty();
    let mut cb = Aabb::empty();
    for it in &items[start..end] {
        bounds = bounds.union(&it.0);
        cb.grow(&it.1);
    }
    nodes.push(Node {
        bounds,
        offset: start as u32,
        count: (end - start) as u32,
    });
    let n = end - start;
    if n <= LEAF_SIZE {
        return idx;
    }
    let ext = cb.extent();
    let axis = if ext.x >= ext.y && ext.x >= ext.z {
        0
    } else if ext.y >= ext.z {
        1
    } else {
        2
    };
    if ext[axis] <= 0.0 {
        return idx;
    }
    let mid = sah_split(&mut items[start..end], axis, cb.min[axis], ext[axis]).map(|m| start + m);
    let mid = match mid {
        Some(m) if m > start && m < end => m,
        _ => {
            items[start..end].sort_by(|a, b| a.1[axis].total_cmp(&b.1[axis]).then(a.2.cmp(&b.2)));
            start + n / 2
        }
    };
    nodes[idx as usize].count = 0;
    build(nodes, items, start, mid);
    let right = build(nodes, items, mid, end);
    nodes[idx as usize].offset = right;
    idx
}

/// Binned SAH; partitions `items` in place and returns the split index.
fn sah_split(items: &mut [(Aabb, Vec3, u32)], axis: usize, lo: f64, extent: f64) -> Option<usize> {
    let bin_of = |c: f64| (((c - lo) / extent * BINS as f64) as usize).min(BINS - 1);
    let mut counts = [0usize; BINS];
    let mut boxes = [Aabb::empty(); BINS];
    for it in items.iter() {
        let b = bin_of(it.1[axis]);
        counts[b] += 1;
        boxes[b] = boxes[b].union(&it.0);
    }
    let area = |b: &Aabb| {
        let e = b.extent();
        if e.x < 0.0 {
            0.0
        } else {
            e.x * e.y + e.y * e.z + e.z * e.x
        }
    };
    let mut best = (f64::INFINITY, 0usize);
    for split in 1..BINS {
        let (mut lb, mut rb) = (Aabb::empty(), Aabb::empty());
        let (mut lc, mut rc) = (0usize, 0usize);
        for b in 0..split {
            lb = lb.union(&boxes[b]);
            lc += counts[b];
        }
        for b in split..BINS {
            rb = rb.union(&boxes[b]);
            rc += counts[b];
        }
        if lc == 0 || rc == 0 {
            continue;
        }
        let cost = area(&lb) * lc as f64 + area(&rb) * rc as f64;
        if cost < best.0 {
            best = (cost, split);
        }
    }
    if !best.0.is_finite() {
        return None;
    }
    let split = best.1;
    // Stable partition keeps the build deterministic.
    let (left, right): (Vec<_>, Vec<_>) = items.iter().copied().partition(|it| bin_of(it.1[axis]) < split);
    let m = left.len();
    for (dst, src) in items.iter_mut().zip(left.into_iter().chain(right)) {
        *dst = src;
    }
    Some(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn random_soup(n: usize, seed: u64) -> Vec<[Vec3; 3]> {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                let c = Vec3::new(rng.gen_range(-50.0..50.0), rng.gen_range(-50.0..50.0), rng.gen_range(0.0..30.0));
                let mut r = || Vec3::new(rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0));
                [c + r(), c + r(), c + r()]
            })
            .collect()
    }

    #[test]
    fn matches_brute_force() {
        let soup = random_soup(500, 3);
        let bvh = Bvh::new(&soup);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        for _ in 0..300 {
            let a = Vec3::new(rng.gen_range(-60.0..60.0), rng.gen_range(-60.0..60.0), rng.gen_range(0.0..30.0));
            let b = Vec3::new(rng.gen_range(-60.0..60.0), rng.gen_range(-60.0..60.0), rng.gen_range(0.0..30.0));
            let len = (b - a).norm();
            let dir = (b - a) / len;
            let mut brute: Vec<u32> = soup
                .iter()
                .enumerate()
                .filter_map(|(i, t)| {
                    ray_triangle(&a, &dir, &t[0], &(t[1] - t[0]), &(t[2] - t[0]))
                        .filter(|&t| t > 0.0 && t < len)
                        .map(|_| i as u32)
                })
                .collect();
            brute.sort();
            let mut got: Vec<u32> = bvh.segment_hits(&a, &b, 0.0, 0.0, |_| false).iter().map(|h| h.tri).collect();
            got.sort();
            assert_eq!(got, brute);
            assert_eq!(bvh.segment_occluded(&a, &b, 0.0, 0.0, |_| false), !brute.is_empty());
        }
    }

    #[test]
    fn empty_hierarchy_never_hits() {
        let bvh = Bvh::new(&[]);
        assert!(!bvh.segment_occluded(&Vec3::zeros(), &Vec3::x(), 0.0, 0.0, |_| false));
        assert!(bvh.first_hit(&Vec3::zeros(), &Vec3::x(), 10.0).is_none());
    }
}
