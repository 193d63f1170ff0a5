//! Per-configuration machinery: Bernoulli bond samples, union-find cluster
//! decomposition, intrinsic distances and radii, ConRad, ghost fields,
//! furcation counting, and lazy cluster exploration that flips edge coins on
//! demand (the same coins a materialized configuration would hold).

use alloc::collections::VecDeque;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::bits::Bits;
use crate::error::{Error, Result};
use crate::fit::Estimate;
use crate::graph::{Graph, InfiniteTree, NO_DISTANCE};
use crate::rng::{mix64, BernoulliThreshold, Domain, EdgeCoins, StreamKey};

/// One Bernoulli bond sample with full provenance.
#[derive(Clone, Debug)]
pub struct Configuration {
    pub graph_fingerprint: u64,
    pub p: f64,
    pub master_seed: u64,
    pub stream: u64,
    open: Bits,
}

impl Configuration {
    #[inline]
    pub fn is_open(&self, edge: u32) -> bool {
        self.open.get(edge as usize)
    }

    pub fn open_count(&self) -> usize {
        self.open.count_ones()
    }

    pub fn edge_count(&self) -> usize {
        self.open.len()
    }

    pub fn open_bits(&self) -> &Bits {
        &self.open
    }

    /// Build directly from bits (used by the exact oracle and by duals).
    pub fn from_bits(graph_fingerprint: u64, p: f64, master_seed: u64, stream: u64, open: Bits) -> Self {
        Configuration {
            graph_fingerprint,
            p,
            master_seed,
            stream,
            open,
        }
    }
}

/// Sample a configuration: each edge open independently with probability p,
/// under the counter-based generator keyed by (seed, stream, edge id).
pub fn sample_config(graph: &Graph, p: f64, master_seed: u64, stream: u64) -> Result<Configuration> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidParameter(format!("p = {p} outside [0,1]")));
    }
    let coins = EdgeCoins::new(master_seed, stream, p);
    let mut open = Bits::zeros(graph.edge_count() as usize);
    for e in 0..graph.edge_count() {
        if coins.open(e as u64) {
            open.set(e as usize, true);
        }
    }
    Ok(Configuration {
        graph_fingerprint: graph.fingerprint(),
        p,
        master_seed,
        stream,
        open,
    })
}

/// Union-find decomposition of a configuration with per-root volume and
/// boundary-touch flags. Path compression plus union by size.
#[derive(Clone, Debug)]
pub struct ClusterIndex {
    parent: Vec<u32>,
    size: Vec<u32>,
    touches_boundary: Vec<bool>,
}

impl ClusterIndex {
    pub fn find(&mut self, v: u32) -> u32 {
        let mut root = v;
        while self.parent[root as usize] != root {
            root = self.parent[root as usize];
        }
        let mut cur = v;
        while self.parent[cur as usize] != root {
            let next = self.parent[cur as usize];
            self.parent[cur as usize] = root;
            cur = next;
        }
        root
    }

    fn union(&mut self, a: u32, b: u32) {
        let ra = self.find(a);
        let rb = self.find(b);
        if ra == rb {
            return;
        }
        let (big, small) = if self.size[ra as usize] >= self.size[rb as usize] {
            (ra, rb)
        } else {
            (rb, ra)
        };
        self.parent[small as usize] = big;
        self.size[big as usize] += self.size[small as usize];
        if self.touches_boundary[small as usize] {
            self.touches_boundary[big as usize] = true;
        }
    }

    pub fn same_cluster(&mut self, u: u32, v: u32) -> bool {
        self.find(u) == self.find(v)
    }

    pub fn volume(&mut self, v: u32) -> u32 {
        let r = self.find(v);
        self.size[r as usize]
    }

    pub fn touches_boundary(&mut self, v: u32) -> bool {
        let r = self.find(v);
        self.touches_boundary[r as usize]
    }

    pub fn vertex_count(&self) -> u32 {
        self.parent.len() as u32
    }

    /// Members of each cluster, grouped by root (roots in ascending order).
    pub fn groups(&mut self) -> Vec<Vec<u32>> {
        let n = self.parent.len() as u32;
        let mut by_root: Vec<Vec<u32>> = vec![Vec::new(); n as usize];
        for v in 0..n {
            let r = self.find(v);
            by_root[r as usize].push(v);
        }
        by_root.into_iter().filter(|g| !g.is_empty()).collect()
    }
}

pub fn clusters(graph: &Graph, config: &Configuration) -> ClusterIndex {
    let n = graph.vertex_count() as usize;
    let mut idx = ClusterIndex {
        parent: (0..n as u32).collect(),
        size: vec![1; n],
        touches_boundary: (0..n as u32).map(|v| graph.is_boundary(v)).collect(),
    };
    for (e, &(u, v)) in graph.edges().iter().enumerate() {
        if config.is_open(e as u32) {
            idx.union(u, v);
        }
    }
    idx
}

/// BFS over open edges from `u`, stopping as soon as `v` is reached.
/// `None` encodes infinity (different clusters).
pub fn intrinsic_distance(graph: &Graph, config: &Configuration, u: u32, v: u32) -> Option<u32> {
    if u == v {
        return Some(0);
    }
    let mut dist = vec![NO_DISTANCE; graph.vertex_count() as usize];
    let mut queue = VecDeque::new();
    dist[u as usize] = 0;
    queue.push_back(u);
    while let Some(w) = queue.pop_front() {
        let d = dist[w as usize];
        for (x, e) in graph.neighbors(w) {
            if config.is_open(e) && dist[x as usize] == NO_DISTANCE {
                if x == v {
                    return Some(d + 1);
                }
                dist[x as usize] = d + 1;
                queue.push_back(x);
            }
        }
    }
    None
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ClusterStats {
    pub volume: u64,
    pub rad_ext: u32,
    pub rad_int: u32,
}

/// Volume, extrinsic radius (max ambient distance within the cluster) and
/// intrinsic radius (BFS eccentricity of v inside its cluster).
pub fn cluster_stats(graph: &Graph, config: &Configuration, v: u32) -> ClusterStats {
    let ambient = graph.distances_from(v);
    cluster_stats_with_ambient(graph, config, v, &ambient)
}

pub fn cluster_stats_with_ambient(
    graph: &Graph,
    config: &Configuration,
    v: u32,
    ambient: &[u32],
) -> ClusterStats {
    let mut dist = vec![NO_DISTANCE; graph.vertex_count() as usize];
    let mut queue = VecDeque::new();
    dist[v as usize] = 0;
    queue.push_back(v);
    let mut volume = 0u64;
    let mut rad_int = 0u32;
    let mut rad_ext = 0u32;
    while let Some(w) = queue.pop_front() {
        volume += 1;
        rad_int = rad_int.max(dist[w as usize]);
        rad_ext = rad_ext.max(ambient[w as usize]);
        for (x, e) in graph.neighbors(w) {
            if config.is_open(e) && dist[x as usize] == NO_DISTANCE {
                dist[x as usize] = dist[w as usize] + 1;
                queue.push_back(x);
            }
        }
    }
    ClusterStats {
        volume,
        rad_ext,
        rad_int,
    }
}

/// Minimal r such that x and y are connected by an open path inside the
/// union of the induced subgraphs on B(x,r) and B(y,r). `None` if x and y
/// are in different clusters.
pub fn con_rad(graph: &Graph, config: &Configuration, x: u32, y: u32) -> Option<u32> {
    let dx = graph.distances_from(x);
    let dy = graph.distances_from(y);
    con_rad_with_dists(graph, config, x, y, &dx, &dy)
}

pub fn con_rad_with_dists(
    graph: &Graph,
    config: &Configuration,
    x: u32,
    y: u32,
    dx: &[u32],
    dy: &[u32],
) -> Option<u32> {
    if x == y {
        return Some(0);
    }
    let upper = intrinsic_distance(graph, config, x, y)?;
    // Any open x-y path of length L lies inside B(x, L), so `upper` works.
    let connected_at = |r: u32| -> bool {
        let allowed_edge = |a: u32, b: u32| -> bool {
            (dx[a as usize] <= r && dx[b as usize] <= r) || (dy[a as usize] <= r && dy[b as usize] <= r)
        };
        let mut seen = vec![false; graph.vertex_count() as usize];
        let mut queue = VecDeque::new();
        seen[x as usize] = true;
        queue.push_back(x);
        while let Some(w) = queue.pop_front() {
            for (u, e) in graph.neighbors(w) {
                if config.is_open(e) && !seen[u as usize] && allowed_edge(w, u) {
                    if u == y {
                        return true;
                    }
                    seen[u as usize] = true;
                    queue.push_back(u);
                }
            }
        }
        false
    };
    let mut lo = 0u32; // not connected at lo (r = 0 leaves x, y isolated)
    let mut hi = upper; // connected at hi
    if connected_at(0) {
        return Some(0);
    }
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if connected_at(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Some(hi)
}

/// Independent vertex marks with inclusion probability 1 - e^{-h}.
#[derive(Clone, Debug)]
pub struct GhostField {
    pub graph_fingerprint: u64,
    pub h: f64,
    pub master_seed: u64,
    pub stream: u64,
    included: Bits,
}

impl GhostField {
    #[inline]
    pub fn includes(&self, v: u32) -> bool {
        self.included.get(v as usize)
    }

    pub fn count(&self) -> usize {
        self.included.count_ones()
    }
}

pub fn ghost_sample(graph: &Graph, h: f64, master_seed: u64, stream: u64) -> Result<GhostField> {
    if h <= 0.0 {
        return Err(Error::InvalidParameter(format!("ghost intensity h = {h} must be > 0")));
    }
    let key = StreamKey::new(master_seed, stream, Domain::GhostVertex);
    let threshold = BernoulliThreshold::new(1.0 - libm::exp(-h));
    let mut included = Bits::zeros(graph.vertex_count() as usize);
    for v in 0..graph.vertex_count() {
        if threshold.accept(key.uniform_u64(v as u64)) {
            included.set(v as usize, true);
        }
    }
    Ok(GhostField {
        graph_fingerprint: graph.fingerprint(),
        h,
        master_seed,
        stream,
        included,
    })
}

/// Count the open branches at `v` that still reach ambient distance
/// `horizon` from `v` once `v` itself is deleted. Distinct components only.
pub fn furcation_degree(
    graph: &Graph,
    config: &Configuration,
    v: u32,
    horizon: u32,
    dist_from_v: &[u32],
) -> u32 {
    let mut seen = vec![false; graph.vertex_count() as usize];
    seen[v as usize] = true; // deleted
    let mut reaching = 0u32;
    for (start, e0) in graph.neighbors(v) {
        if !config.is_open(e0) || seen[start as usize] {
            continue;
        }
        // BFS this branch component (v excluded) and test horizon reach.
        let mut reached = false;
        let mut queue = VecDeque::new();
        seen[start as usize] = true;
        queue.push_back(start);
        while let Some(w) = queue.pop_front() {
            if dist_from_v[w as usize] >= horizon {
                reached = true;
            }
            for (x, e) in graph.neighbors(w) {
                if config.is_open(e) && !seen[x as usize] {
                    seen[x as usize] = true;
                    queue.push_back(x);
                }
            }
        }
        if reached {
            reaching += 1;
        }
    }
    reaching
}

// ---------------------------------------------------------------------------
// Lazy cluster exploration
// ---------------------------------------------------------------------------

/// Reusable workspace for repeated cluster scans: epoch-marked visit table
/// so per-sample setup is O(1).
pub struct Scratch {
    pub mark: Vec<u64>,
    pub epoch: u64,
    pub queue: VecDeque<(u32, u32)>,
}

impl Scratch {
    pub fn new(vertex_count: u32) -> Self {
        Scratch {
            mark: vec![0; vertex_count as usize],
            epoch: 0,
            queue: VecDeque::new(),
        }
    }

    /// Invalidate all marks in O(1).
    pub fn begin_epoch(&mut self) {
        self.epoch += 1;
    }
}

#[derive(Clone, Copy, Debug)]
pub struct ScanParams {
    /// Stop expanding past this intrinsic depth.
    pub depth_cap: u32,
    /// Stop exploring once this many vertices have been visited.
    pub volume_cap: u64,
    /// Record per-depth counts up to depth_cap.
    pub record_levels: bool,
}

impl Default for ScanParams {
    fn default() -> Self {
        ScanParams {
            depth_cap: u32::MAX,
            volume_cap: u64::MAX,
            record_levels: false,
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct ClusterScan {
    /// Vertices visited (exact cluster volume unless a cap was hit).
    pub volume: u64,
    /// Max intrinsic depth seen.
    pub rad_int: u32,
    /// Max ambient distance seen, when ambient distances were supplied.
    pub rad_ext: Option<u32>,
    pub hit_depth_cap: bool,
    pub hit_volume_cap: bool,
    pub hit_graph_boundary: bool,
    pub levels: Vec<u64>,
}

/// BFS the open cluster of `origin`, deciding each edge via `is_open`
/// (a closure so materialized configurations and counter-keyed lazy coins
/// share one implementation).
pub fn explore_cluster(
    graph: &Graph,
    is_open: impl Fn(u32) -> bool,
    origin: u32,
    params: &ScanParams,
    ambient: Option<&[u32]>,
    scratch: &mut Scratch,
) -> ClusterScan {
    scratch.epoch += 1;
    let epoch = scratch.epoch;
    scratch.queue.clear();
    let mut scan = ClusterScan::default();
    if params.record_levels {
        scan.levels = vec![0u64; (params.depth_cap.min(1 << 20) + 1) as usize];
    }
    scratch.mark[origin as usize] = epoch;
    scratch.queue.push_back((origin, 0));
    while let Some((w, d)) = scratch.queue.pop_front() {
        scan.volume += 1;
        scan.rad_int = scan.rad_int.max(d);
        if let Some(dist) = ambient {
            let r = scan.rad_ext.get_or_insert(0);
            *r = (*r).max(dist[w as usize]);
        }
        if graph.is_boundary(w) {
            scan.hit_graph_boundary = true;
        }
        if params.record_levels {
            scan.levels[d as usize] += 1;
        }
        if scan.volume >= params.volume_cap {
            scan.hit_volume_cap = true;
            break;
        }
        if d == params.depth_cap {
            scan.hit_depth_cap = true;
            continue;
        }
        for (x, e) in graph.neighbors(w) {
            if scratch.mark[x as usize] != epoch && is_open(e) {
                scratch.mark[x as usize] = epoch;
                scratch.queue.push_back((x, d + 1));
            }
        }
    }
    scan
}

/// Like `explore_cluster` but collects every visited (vertex, intrinsic
/// depth) pair, for distance-resolved matrix tallies.
pub fn explore_cluster_depths(
    graph: &Graph,
    is_open: impl Fn(u32) -> bool,
    origin: u32,
    params: &ScanParams,
    scratch: &mut Scratch,
    out: &mut Vec<(u32, u32)>,
) {
    scratch.epoch += 1;
    let epoch = scratch.epoch;
    scratch.queue.clear();
    scratch.mark[origin as usize] = epoch;
    scratch.queue.push_back((origin, 0));
    while let Some((w, d)) = scratch.queue.pop_front() {
        out.push((w, d));
        if d == params.depth_cap {
            continue;
        }
        for (x, e) in graph.neighbors(w) {
            if scratch.mark[x as usize] != epoch && is_open(e) {
                scratch.mark[x as usize] = epoch;
                scratch.queue.push_back((x, d + 1));
            }
        }
    }
}

/// Rao-Blackwellized magnetization estimate: sample |K_v| and average
/// 1 - e^{-h |K_v|}. The ghost field is never instantiated. Volumes are
/// explored only until the weight saturates at double precision.
pub fn magnetization_estimate(
    graph: &Graph,
    p: f64,
    h: f64,
    v: u32,
    n: u64,
    master_seed: u64,
) -> Result<Estimate> {
    if h <= 0.0 {
        return Err(Error::InvalidParameter(format!("h = {h} must be > 0")));
    }
    if n == 0 {
        return Err(Error::InvalidParameter("need at least one sample".into()));
    }
    let cap = volume_cap_for_h(h);
    let params = ScanParams {
        volume_cap: cap,
        ..ScanParams::default()
    };
    let mut scratch = Scratch::new(graph.vertex_count());
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for stream in 0..n {
        let coins = EdgeCoins::new(master_seed, stream, p);
        let scan = explore_cluster(graph, |e| coins.open(e as u64), v, &params, None, &mut scratch);
        let w = 1.0 - libm::exp(-h * scan.volume as f64);
        sum += w;
        sum_sq += w * w;
    }
    Ok(Estimate::from_moments(sum, sum_sq, n, "rao-blackwell 1-e^{-h|K|}"))
}

/// Volume beyond which 1 - e^{-h vol} is 1 at double precision.
pub fn volume_cap_for_h(h: f64) -> u64 {
    ((40.0 / h) as u64).max(64)
}

// ---------------------------------------------------------------------------
// Implicit infinite tree
// ---------------------------------------------------------------------------

const COIN_TAG: u64 = 0x636f_696e;
const CHILD_TAG: u64 = 0x6368_696c;
const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

/// Per-edge uniform word and child chain key for the implicit tree. Keys are
/// functions of the path from the root, so one (seed, stream) defines one
/// configuration on the whole infinite tree and the uniform coupling in p
/// holds exactly.
#[inline]
fn tree_edge_words(node_key: u64, child_index: u32) -> (u64, u64) {
    let w = mix64(node_key.wrapping_add((child_index as u64 + 1).wrapping_mul(GOLDEN)));
    (mix64(w ^ COIN_TAG), mix64(w ^ CHILD_TAG))
}

fn tree_root_key(master_seed: u64, stream: u64) -> u64 {
    StreamKey::new(master_seed, stream, Domain::Edge).uniform_u64(0)
}

#[derive(Clone, Copy, Debug)]
pub struct TreeScanParams {
    pub depth_cap: u32,
    pub volume_cap: u64,
    /// Explore the forward (k-1)-ary ensemble instead of giving the start
    /// vertex k children: the Galton-Watson view of one branch.
    pub forward: bool,
    pub record_levels: bool,
}

/// BFS the open cluster of the root in the implicit infinite k-regular tree.
/// On the tree, ambient and intrinsic distances from the root agree, so
/// rad_ext = rad_int.
pub fn tree_explore(
    tree: InfiniteTree,
    p: f64,
    master_seed: u64,
    stream: u64,
    params: &TreeScanParams,
) -> ClusterScan {
    let threshold = BernoulliThreshold::new(p);
    let mut scan = ClusterScan::default();
    if params.record_levels {
        scan.levels = vec![0u64; (params.depth_cap.min(1 << 20) + 1) as usize];
    }
    let mut queue: VecDeque<(u64, u32, u32)> = VecDeque::new(); // (chain key, depth, child count)
    let root_children = if params.forward { tree.k - 1 } else { tree.k };
    queue.push_back((tree_root_key(master_seed, stream), 0, root_children));
    while let Some((key, d, children)) = queue.pop_front() {
        scan.volume += 1;
        scan.rad_int = scan.rad_int.max(d);
        if params.record_levels {
            scan.levels[d as usize] += 1;
        }
        if scan.volume >= params.volume_cap {
            scan.hit_volume_cap = true;
            break;
        }
        if d == params.depth_cap {
            scan.hit_depth_cap = true;
            continue;
        }
        for i in 0..children {
            let (coin, child_key) = tree_edge_words(key, i);
            if threshold.accept(coin) {
                queue.push_back((child_key, d + 1, tree.k - 1));
            }
        }
    }
    scan.rad_ext = Some(scan.rad_int);
    scan
}

/// Number of root branches whose open subtree reaches depth >= horizon.
/// Early-exits each branch at the first success; the path-chained keys keep
/// the outcome independent of traversal order.
pub fn tree_furcation_degree(
    tree: InfiniteTree,
    p: f64,
    master_seed: u64,
    stream: u64,
    horizon: u32,
) -> u32 {
    let threshold = BernoulliThreshold::new(p);
    let root_key = tree_root_key(master_seed, stream);
    let mut reaching = 0u32;
    let mut stack: Vec<(u64, u32)> = Vec::new();
    for i in 0..tree.k {
        let (coin, child_key) = tree_edge_words(root_key, i);
        if !threshold.accept(coin) {
            continue;
        }
        // Depth-first with early exit once the branch proves itself.
        stack.clear();
        stack.push((child_key, 1));
        let mut reached = false;
        while let Some((key, d)) = stack.pop() {
            if d >= horizon {
                reached = true;
                break;
            }
            for j in 0..tree.k - 1 {
                let (coin, ck) = tree_edge_words(key, j);
                if threshold.accept(coin) {
                    stack.push((ck, d + 1));
                }
            }
        }
        if reached {
            reaching += 1;
        }
    }
    reaching
}

// ---------------------------------------------------------------------------
// Epoch-tagged disjoint-set union for per-sample incremental connectivity.
// ---------------------------------------------------------------------------

pub struct EpochDsu {
    parent: Vec<u32>,
    size: Vec<u32>,
    stamp: Vec<u64>,
    epoch: u64,
}

impl EpochDsu {
    pub fn new(n: u32) -> Self {
        EpochDsu {
            parent: vec![0; n as usize],
            size: vec![0; n as usize],
            stamp: vec![0; n as usize],
            epoch: 0,
        }
    }

    /// Start a fresh sample; previous unions evaporate in O(1).
    pub fn reset(&mut self) {
        self.epoch += 1;
    }

    #[inline]
    fn touch(&mut self, v: u32) {
        if self.stamp[v as usize] != self.epoch {
            self.stamp[v as usize] = self.epoch;
            self.parent[v as usize] = v;
            self.size[v as usize] = 1;
        }
    }

    pub fn find(&mut self, v: u32) -> u32 {
        self.touch(v);
        let mut root = v;
        while self.parent[root as usize] != root {
            root = self.parent[root as usize];
        }
        let mut cur = v;
        while self.parent[cur as usize] != root {
            let next = self.parent[cur as usize];
            self.parent[cur as usize] = root;
            cur = next;
        }
        root
    }

    pub fn union(&mut self, a: u32, b: u32) {
        let ra = self.find(a);
        let rb = self.find(b);
        if ra == rb {
            return;
        }
        let (big, small) = if self.size[ra as usize] >= self.size[rb as usize] {
            (ra, rb)
        } else {
            (rb, ra)
        };
        self.parent[small as usize] = big;
        self.size[big as usize] += self.size[small as usize];
    }

    pub fn same(&mut self, a: u32, b: u32) -> bool {
        self.find(a) == self.find(b)
    }

    /// Size stored at a root (call `find` first).
    pub fn size_of_root(&self, root: u32) -> u32 {
        self.size[root as usize]
    }
}
