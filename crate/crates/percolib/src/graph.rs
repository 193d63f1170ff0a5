//! Finite graphs (optionally truncations of infinite families with marked
//! boundary) plus the regular-tree and grid builders, ball extraction and
//! volume-growth measurement.

use alloc::collections::VecDeque;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::fit;
use crate::hash::Fnv64;

pub const NO_DISTANCE: u32 = u32::MAX;

/// Immutable finite graph. Adjacency is CSR with a parallel edge-id table so
/// samplers can key per-edge randomness while walking neighbors.
#[derive(Clone, Debug)]
pub struct Graph {
    family_tag: String,
    vertex_count: u32,
    edges: Vec<(u32, u32)>,
    offsets: Vec<u32>,
    adj_vertex: Vec<u32>,
    adj_edge: Vec<u32>,
    boundary: Vec<bool>,
}

impl Graph {
    /// Build from an edge list. Rejects self-loops, multi-edges, vertices out
    /// of range and disconnected graphs (every vertex must be reachable from
    /// vertex 0).
    pub fn from_edges(
        family_tag: &str,
        vertex_count: u32,
        edges: Vec<(u32, u32)>,
        boundary_ids: &[u32],
    ) -> Result<Graph> {
        if vertex_count == 0 {
            return Err(Error::InvalidParameter("graph needs at least one vertex".into()));
        }
        let n = vertex_count as usize;
        let mut degree = vec![0u32; n];
        for &(u, v) in &edges {
            if u == v {
                return Err(Error::InvalidParameter(format!("self-loop at {u}")));
            }
            if u >= vertex_count || v >= vertex_count {
                return Err(Error::InvalidParameter(format!("edge ({u},{v}) out of range")));
            }
            degree[u as usize] += 1;
            degree[v as usize] += 1;
        }
        let mut offsets = vec![0u32; n + 1];
        for v in 0..n {
            offsets[v + 1] = offsets[v] + degree[v];
        }
        let mut adj_vertex = vec![0u32; 2 * edges.len()];
        let mut adj_edge = vec![0u32; 2 * edges.len()];
        let mut cursor: Vec<u32> = offsets[..n].to_vec();
        for (e, &(u, v)) in edges.iter().enumerate() {
            let cu = cursor[u as usize] as usize;
            adj_vertex[cu] = v;
            adj_edge[cu] = e as u32;
            cursor[u as usize] += 1;
            let cv = cursor[v as usize] as usize;
            adj_vertex[cv] = u;
            adj_edge[cv] = e as u32;
            cursor[v as usize] += 1;
        }
        // Multi-edge check: neighbor lists must not repeat.
        let mut seen = vec![u32::MAX; n];
        for v in 0..n {
            for i in offsets[v] as usize..offsets[v + 1] as usize {
                let u = adj_vertex[i];
                if seen[u as usize] == v as u32 {
                    return Err(Error::InvalidParameter(format!("multi-edge between {v} and {u}")));
                }
                seen[u as usize] = v as u32;
            }
        }
        let mut boundary = vec![false; n];
        for &b in boundary_ids {
            if b >= vertex_count {
                return Err(Error::InvalidParameter(format!("boundary id {b} out of range")));
            }
            boundary[b as usize] = true;
        }
        let g = Graph {
            family_tag: family_tag.into(),
            vertex_count,
            edges,
            offsets,
            adj_vertex,
            adj_edge,
            boundary,
        };
        let dist = g.distances_from(0);
        if dist.iter().any(|&d| d == NO_DISTANCE) {
            return Err(Error::InvalidParameter("graph is not connected".into()));
        }
        Ok(g)
    }

    pub fn vertex_count(&self) -> u32 {
        self.vertex_count
    }

    pub fn edge_count(&self) -> u32 {
        self.edges.len() as u32
    }

    pub fn edges(&self) -> &[(u32, u32)] {
        &self.edges
    }

    pub fn family_tag(&self) -> &str {
        &self.family_tag
    }

    pub fn degree(&self, v: u32) -> u32 {
        self.offsets[v as usize + 1] - self.offsets[v as usize]
    }

    pub fn max_degree(&self) -> u32 {
        (0..self.vertex_count).map(|v| self.degree(v)).max().unwrap_or(0)
    }

    /// Neighbors of `v` as (vertex, edge id) pairs, in construction order.
    pub fn neighbors(&self, v: u32) -> impl Iterator<Item = (u32, u32)> + '_ {
        let lo = self.offsets[v as usize] as usize;
        let hi = self.offsets[v as usize + 1] as usize;
        (lo..hi).map(move |i| (self.adj_vertex[i], self.adj_edge[i]))
    }

    pub fn is_boundary(&self, v: u32) -> bool {
        self.boundary[v as usize]
    }

    pub fn boundary_ids(&self) -> Vec<u32> {
        (0..self.vertex_count).filter(|&v| self.boundary[v as usize]).collect()
    }

    /// Stable fingerprint over tag, sizes, edge list and boundary set.
    pub fn fingerprint(&self) -> u64 {
        let mut h = Fnv64::new();
        h.write(self.family_tag.as_bytes());
        h.write_u32(self.vertex_count);
        h.write_u32(self.edges.len() as u32);
        for &(u, v) in &self.edges {
            h.write_u32(u);
            h.write_u32(v);
        }
        for v in 0..self.vertex_count {
            if self.boundary[v as usize] {
                h.write_u32(v);
            }
        }
        h.finish()
    }

    /// BFS distances from `v` over the full graph.
    pub fn distances_from(&self, v: u32) -> Vec<u32> {
        let mut dist = vec![NO_DISTANCE; self.vertex_count as usize];
        let mut queue = VecDeque::new();
        dist[v as usize] = 0;
        queue.push_back(v);
        while let Some(u) = queue.pop_front() {
            let d = dist[u as usize];
            for (w, _) in self.neighbors(u) {
                if dist[w as usize] == NO_DISTANCE {
                    dist[w as usize] = d + 1;
                    queue.push_back(w);
                }
            }
        }
        dist
    }

    /// Multi-source BFS distance to the truncation boundary. Graphs without
    /// boundary marks report `NO_DISTANCE` everywhere.
    pub fn boundary_distance(&self) -> Vec<u32> {
        let mut dist = vec![NO_DISTANCE; self.vertex_count as usize];
        let mut queue = VecDeque::new();
        for v in 0..self.vertex_count {
            if self.boundary[v as usize] {
                dist[v as usize] = 0;
                queue.push_back(v);
            }
        }
        while let Some(u) = queue.pop_front() {
            let d = dist[u as usize];
            for (w, _) in self.neighbors(u) {
                if dist[w as usize] == NO_DISTANCE {
                    dist[w as usize] = d + 1;
                    queue.push_back(w);
                }
            }
        }
        dist
    }

    pub fn eccentricity(&self, v: u32) -> u32 {
        *self.distances_from(v).iter().max().unwrap()
    }

    /// Induced subgraph on the ball of radius `r` around `v`. Vertices are
    /// renumbered in BFS order from `v`; the new boundary is the distance-`r`
    /// frontier plus any inherited truncation boundary.
    pub fn ball(&self, v: u32, r: u32) -> Result<Graph> {
        if v >= self.vertex_count {
            return Err(Error::InvalidParameter(format!("vertex {v} out of range")));
        }
        let dist = self.distances_from(v);
        let mut order = Vec::new();
        let mut new_id = vec![u32::MAX; self.vertex_count as usize];
        // BFS gives ids level by level already; reuse it for determinism.
        let mut queue = VecDeque::new();
        let mut seen = vec![false; self.vertex_count as usize];
        seen[v as usize] = true;
        queue.push_back(v);
        while let Some(u) = queue.pop_front() {
            new_id[u as usize] = order.len() as u32;
            order.push(u);
            for (w, _) in self.neighbors(u) {
                if !seen[w as usize] && dist[w as usize] <= r {
                    seen[w as usize] = true;
                    queue.push_back(w);
                }
            }
        }
        let mut edges = Vec::new();
        for &(a, b) in &self.edges {
            if dist[a as usize] <= r && dist[b as usize] <= r {
                let (x, y) = (new_id[a as usize], new_id[b as usize]);
                edges.push((x.min(y), x.max(y)));
            }
        }
        let mut boundary = Vec::new();
        for &u in &order {
            if dist[u as usize] == r || self.boundary[u as usize] {
                boundary.push(new_id[u as usize]);
            }
        }
        Graph::from_edges(
            &format!("{}|ball(v={v},r={r})", self.family_tag),
            order.len() as u32,
            edges,
            &boundary,
        )
    }

    /// Ball sizes |B(v,n)| for n = 0..=n_max together with the fitted
    /// exponential growth rate on the stable window [n_max/2, n_max].
    /// Refused when the window has fewer than 4 points or the ball reaches
    /// the truncation boundary before n_max.
    pub fn growth_rate(&self, v: u32, n_max: u32) -> Result<GrowthRate> {
        if v >= self.vertex_count {
            return Err(Error::InvalidParameter(format!("vertex {v} out of range")));
        }
        let dist = self.distances_from(v);
        let bdist = self.boundary_distance();
        if bdist[v as usize] <= n_max {
            return Err(Error::InvalidParameter(format!(
                "ball of radius {n_max} reaches the truncation boundary (distance {})",
                bdist[v as usize]
            )));
        }
        let mut sizes = vec![0u64; n_max as usize + 1];
        for &d in &dist {
            if d != NO_DISTANCE && d <= n_max {
                for entry in sizes.iter_mut().skip(d as usize) {
                    *entry += 1;
                }
            }
        }
        let lo = n_max / 2;
        if n_max - lo + 1 < 4 {
            return Err(Error::Underpowered(format!(
                "growth fit window [{lo},{n_max}] has fewer than 4 points"
            )));
        }
        let pts: Vec<(f64, f64)> = (lo..=n_max)
            .map(|n| (n as f64, libm::log(sizes[n as usize] as f64)))
            .collect();
        let ols = fit::least_squares(&pts)?;
        Ok(GrowthRate {
            sizes,
            gamma: ols.slope,
            stderr: ols.slope_stderr,
            window: (lo, n_max),
        })
    }
}

#[derive(Clone, Debug)]
pub struct GrowthRate {
    /// |B(v,n)| for n = 0..=n_max.
    pub sizes: Vec<u64>,
    /// Fitted slope of log|B(v,n)| against n on the stable window.
    pub gamma: f64,
    pub stderr: f64,
    pub window: (u32, u32),
}

/// Closed-form |B(root,n)| on the k-regular tree: 1 + k((k-1)^n - 1)/(k-2).
pub fn tree_ball_size(k: u32, n: u32) -> u64 {
    if n == 0 {
        return 1;
    }
    let mut shell = k as u64;
    let mut total = 1 + shell;
    for _ in 1..n {
        shell *= (k - 1) as u64;
        total += shell;
    }
    total
}

/// Rooted k-regular tree truncated at graph distance `depth`. Vertex ids are
/// breadth-first with root 0; the depth-`depth` leaves form the boundary.
pub fn build_tree(k: u32, depth: u32) -> Result<Graph> {
    if k < 3 {
        return Err(Error::InvalidParameter(format!("tree degree k = {k} < 3")));
    }
    if depth < 1 {
        return Err(Error::InvalidParameter("tree depth must be >= 1".into()));
    }
    let total = tree_ball_size(k, depth);
    if total > u32::MAX as u64 / 2 {
        return Err(Error::InvalidParameter(format!(
            "tree(k={k}, depth={depth}) has {total} vertices; too large to materialize"
        )));
    }
    let mut edges = Vec::with_capacity(total as usize - 1);
    let mut next = 1u32;
    // (first, last) ids of the current level.
    let mut level = vec![0u32];
    for d in 0..depth {
        let mut next_level = Vec::new();
        for &v in &level {
            let children = if d == 0 { k } else { k - 1 };
            for _ in 0..children {
                edges.push((v, next));
                next_level.push(next);
                next += 1;
            }
        }
        level = next_level;
    }
    Graph::from_edges(&format!("tree(k={k},depth={depth})"), next, edges, &level)
}

/// w x h grid patch (w, h >= 2 vertices per side). The outer rim is the
/// truncation boundary.
pub fn build_grid(w: u32, h: u32) -> Result<Graph> {
    if w < 2 || h < 2 {
        return Err(Error::InvalidParameter("grid needs w, h >= 2".into()));
    }
    let id = |x: u32, y: u32| y * w + x;
    let mut edges = Vec::new();
    for y in 0..h {
        for x in 0..w {
            if x + 1 < w {
                edges.push((id(x, y), id(x + 1, y)));
            }
            if y + 1 < h {
                edges.push((id(x, y), id(x, y + 1)));
            }
        }
    }
    let mut boundary = Vec::new();
    for y in 0..h {
        for x in 0..w {
            if x == 0 || y == 0 || x == w - 1 || y == h - 1 {
                boundary.push(id(x, y));
            }
        }
    }
    Graph::from_edges(&format!("grid({w}x{h})"), w * h, edges, &boundary)
}

/// The infinite k-regular tree, explored lazily. Edge randomness is chained
/// key-by-key down the tree so that a fixed (seed, stream) induces one
/// well-defined configuration on the whole tree and the uniform coupling
/// across p is preserved.
#[derive(Clone, Copy, Debug)]
pub struct InfiniteTree {
    pub k: u32,
}

impl InfiniteTree {
    pub fn new(k: u32) -> Result<Self> {
        if k < 3 {
            return Err(Error::InvalidParameter(format!("tree degree k = {k} < 3")));
        }
        Ok(InfiniteTree { k })
    }

    pub fn critical_p(&self) -> f64 {
        1.0 / (self.k - 1) as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tree_shapes() {
        let t = build_tree(3, 1).unwrap();
        assert_eq!(t.vertex_count(), 4);
        assert_eq!(t.edge_count(), 3);
        assert_eq!(t.degree(0), 3);

        // 1 + 3 + 3*2 vertices.
        let t = build_tree(3, 2).unwrap();
        assert_eq!(t.vertex_count(), 10);
        assert_eq!(t.edge_count(), 9);

        let t = build_tree(4, 1).unwrap();
        assert_eq!(t.vertex_count(), 5);
        assert_eq!(t.degree(0), 4);

        assert!(build_tree(2, 3).is_err());
        assert!(build_tree(3, 0).is_err());
    }

    #[test]
    fn tree_degrees_and_boundary() {
        let t = build_tree(3, 4).unwrap();
        let dist = t.distances_from(0);
        for v in 0..t.vertex_count() {
            if t.is_boundary(v) {
                assert_eq!(t.degree(v), 1);
                assert_eq!(dist[v as usize], 4);
            } else {
                assert_eq!(t.degree(v), 3);
            }
        }
        assert_eq!(t.vertex_count() as u64, tree_ball_size(3, 4));
    }

    #[test]
    fn ball_examples() {
        let t = build_tree(3, 12).unwrap();
        let b0 = t.ball(0, 0).unwrap();
        assert_eq!(b0.vertex_count(), 1);
        assert_eq!(b0.edge_count(), 0);

        // Levels 1 + 3 + 6.
        let b2 = t.ball(0, 2).unwrap();
        assert_eq!(b2.vertex_count(), 10);

        let g = build_grid(3, 3).unwrap();
        let all = g.ball(0, g.eccentricity(0)).unwrap();
        assert_eq!(all.vertex_count(), g.vertex_count());
        assert_eq!(all.edge_count(), g.edge_count());
    }

    #[test]
    fn ball_boundary_is_frontier() {
        let t = build_tree(3, 6).unwrap();
        let b = t.ball(0, 3).unwrap();
        let dist = b.distances_from(0);
        for v in 0..b.vertex_count() {
            assert_eq!(b.is_boundary(v), dist[v as usize] == 3);
        }
    }

    #[test]
    fn growth_rate_tree_matches_log2() {
        let t = build_tree(3, 14).unwrap();
        let g = t.growth_rate(0, 10).unwrap();
        for n in 0..=10u32 {
            assert_eq!(g.sizes[n as usize], tree_ball_size(3, n));
        }
        // |B(n)| = 3*2^n - 2, so the window slope sits just above log 2.
        let log2 = libm::log(2.0);
        assert!((g.gamma - log2).abs() < 0.02, "gamma = {}", g.gamma);
    }

    #[test]
    fn growth_rate_grid_subexponential() {
        let g = build_grid(31, 31).unwrap();
        let center = (31 * 31 - 1) / 2;
        let gr = g.growth_rate(center, 12).unwrap();
        assert!(gr.gamma > 0.0 && gr.gamma < 0.25, "gamma = {}", gr.gamma);
    }

    #[test]
    fn growth_rate_refusals() {
        let t = build_tree(3, 6).unwrap();
        // Window would touch the boundary.
        assert!(t.growth_rate(0, 6).is_err());
        // Fewer than 4 points in the stable window.
        assert!(t.growth_rate(0, 4).is_err());
    }

    #[test]
    fn rejects_bad_graphs() {
        assert!(Graph::from_edges("t", 2, vec![(0, 0)], &[]).is_err());
        assert!(Graph::from_edges("t", 2, vec![(0, 1), (1, 0)], &[]).is_err());
        assert!(Graph::from_edges("t", 3, vec![(0, 1)], &[]).is_err());
        assert!(Graph::from_edges("t", 2, vec![(0, 1)], &[]).is_ok());
    }

    #[test]
    fn fingerprint_is_stable() {
        let a = build_tree(3, 5).unwrap();
        let b = build_tree(3, 5).unwrap();
        assert_eq!(a.fingerprint(), b.fingerprint());
        let c = build_tree(3, 6).unwrap();
        assert_ne!(a.fingerprint(), c.fingerprint());
    }
}
