//! Two-point operator matrices over vertex windows: T_p, the distance-masked
//! complements C_{p,n} and spheres S_{p,n}, and the intrinsic ball, sphere
//! and annulus matrices. Sources: Monte Carlo with shared configurations
//! (one sweep updates every pair), the exact enumeration oracle, and the
//! closed form tau = p^d on trees.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::graph::{Graph, NO_DISTANCE};
use crate::oracle;
use crate::perc;
use crate::rng::EdgeCoins;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MatrixKind {
    /// T_p(u,v) = P(u <-> v).
    TwoPoint,
    /// C_{p,n}(u,v) = tau(u,v) 1(d(u,v) >= n).
    Complement(u32),
    /// S_{p,n}(u,v) = tau(u,v) 1(d(u,v) = n).
    Sphere(u32),
    /// B^int_{p,n}(u,v) = P(d_int(u,v) <= n).
    IntBall(u32),
    /// S^int_{p,n}(u,v) = P(d_int(u,v) = n).
    IntSphere(u32),
    /// A^int_{p,n,m}(u,v) = P(n <= d_int(u,v) <= m).
    IntAnnulus(u32, u32),
}

impl MatrixKind {
    pub fn label(&self) -> String {
        match self {
            MatrixKind::TwoPoint => "T".into(),
            MatrixKind::Complement(n) => format!("C({n})"),
            MatrixKind::Sphere(n) => format!("S({n})"),
            MatrixKind::IntBall(n) => format!("Bint({n})"),
            MatrixKind::IntSphere(n) => format!("Sint({n})"),
            MatrixKind::IntAnnulus(n, m) => format!("Aint({n},{m})"),
        }
    }

    pub fn is_intrinsic(&self) -> bool {
        matches!(
            self,
            MatrixKind::IntBall(_) | MatrixKind::IntSphere(_) | MatrixKind::IntAnnulus(_, _)
        )
    }
}

/// Dense symmetric nonnegative matrix over a vertex window.
#[derive(Clone, Debug)]
pub struct OperatorMatrix {
    pub kind: MatrixKind,
    pub p: f64,
    /// Window vertex ids in the source graph.
    pub window: Vec<u32>,
    /// Row-major |window| x |window| values.
    pub values: Vec<f64>,
    /// 0 for exact sources.
    pub sample_count: u64,
    pub graph_hash: u64,
}

impl OperatorMatrix {
    pub fn n(&self) -> usize {
        self.window.len()
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.window.len() + j]
    }

    pub fn row_sums(&self) -> Vec<f64> {
        let n = self.n();
        (0..n).map(|i| (0..n).map(|j| self.get(i, j)).sum()).collect()
    }

    pub fn max_row_sum(&self) -> f64 {
        self.row_sums().into_iter().fold(0.0, f64::max)
    }

    /// sup over rows of the support size, the count in the norm
    /// interpolation bound.
    pub fn max_row_support(&self) -> usize {
        let n = self.n();
        (0..n)
            .map(|i| (0..n).filter(|&j| self.get(i, j) != 0.0).count())
            .max()
            .unwrap_or(0)
    }

    pub fn max_symmetry_defect(&self) -> f64 {
        let n = self.n();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..i {
                worst = worst.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        worst
    }

    pub fn entries_within_unit_interval(&self) -> bool {
        self.values.iter().all(|&x| (0.0..=1.0).contains(&x))
    }

    /// Entrywise domination self ≼ other.
    pub fn dominated_by(&self, other: &OperatorMatrix, tol: f64) -> bool {
        self.n() == other.n()
            && self
                .values
                .iter()
                .zip(other.values.iter())
                .all(|(&a, &b)| a <= b + tol)
    }
}

/// Window helpers -----------------------------------------------------------

/// Vertices with d(center, v) <= radius, in BFS order.
pub fn ball_window(graph: &Graph, center: u32, radius: u32) -> Vec<u32> {
    let dist = graph.distances_from(center);
    let mut ids: Vec<u32> = (0..graph.vertex_count())
        .filter(|&v| dist[v as usize] <= radius)
        .collect();
    ids.sort_unstable_by_key(|&v| (dist[v as usize], v));
    ids
}

/// Vertices at distance >= margin from the truncation boundary.
pub fn interior_window(graph: &Graph, margin: u32) -> Vec<u32> {
    let bdist = graph.boundary_distance();
    (0..graph.vertex_count())
        .filter(|&v| bdist[v as usize] >= margin)
        .collect()
}

/// Row-major ambient distance matrix restricted to a window.
pub fn window_distances(graph: &Graph, window: &[u32]) -> Vec<u32> {
    let n = window.len();
    let mut out = vec![0u32; n * n];
    for (i, &v) in window.iter().enumerate() {
        let dist = graph.distances_from(v);
        for (j, &w) in window.iter().enumerate() {
            out[i * n + j] = dist[w as usize];
        }
    }
    out
}

/// Monte Carlo tallies -------------------------------------------------------

/// Same-cluster counts for every window pair, shared configurations.
#[derive(Clone, Debug)]
pub struct TwoPointTally {
    pub window: Vec<u32>,
    pub counts: Vec<u64>,
    pub samples: u64,
}

impl TwoPointTally {
    pub fn merge(&mut self, other: &TwoPointTally) {
        assert_eq!(self.window, other.window);
        for (a, b) in self.counts.iter_mut().zip(other.counts.iter()) {
            *a += b;
        }
        self.samples += other.samples;
    }
}

pub fn mc_two_point(
    graph: &Graph,
    p: f64,
    window: &[u32],
    seed: u64,
    streams: core::ops::Range<u64>,
) -> Result<TwoPointTally> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidParameter(format!("p = {p} outside [0,1]")));
    }
    let n = window.len();
    let mut slot = vec![u32::MAX; graph.vertex_count() as usize];
    for (i, &v) in window.iter().enumerate() {
        slot[v as usize] = i as u32;
    }
    let mut counts = vec![0u64; n * n];
    let mut parent: Vec<u32> = (0..graph.vertex_count()).collect();
    let mut size = vec![1u32; graph.vertex_count() as usize];
    let mut members: Vec<Vec<u32>> = vec![Vec::new(); graph.vertex_count() as usize];
    let samples = streams.end - streams.start;
    for stream in streams {
        let coins = EdgeCoins::new(seed, stream, p);
        for (v, s) in parent.iter_mut().zip(size.iter_mut()) {
            *v = u32::MAX;
            *s = 1;
        }
        // Lazy-init union-find over the full graph.
        fn find(parent: &mut [u32], v: u32) -> u32 {
            if parent[v as usize] == u32::MAX {
                parent[v as usize] = v;
                return v;
            }
            let mut root = v;
            while parent[root as usize] != root {
                root = parent[root as usize];
            }
            let mut cur = v;
            while parent[cur as usize] != root {
                let next = parent[cur as usize];
                parent[cur as usize] = root;
                cur = next;
            }
            root
        }
        for (e, &(u, v)) in graph.edges().iter().enumerate() {
            if coins.open(e as u64) {
                let ru = find(&mut parent, u);
                let rv = find(&mut parent, v);
                if ru != rv {
                    let (big, small) = if size[ru as usize] >= size[rv as usize] {
                        (ru, rv)
                    } else {
                        (rv, ru)
                    };
                    parent[small as usize] = big;
                    size[big as usize] += size[small as usize];
                }
            }
        }
        // Group window vertices by root, then count within groups.
        for &w in window {
            let r = find(&mut parent, w);
            members[r as usize].push(slot[w as usize]);
        }
        for &w in window {
            let r = find(&mut parent, w);
            let group = &mut members[r as usize];
            if group.is_empty() {
                continue;
            }
            for &a in group.iter() {
                for &b in group.iter() {
                    counts[a as usize * n + b as usize] += 1;
                }
            }
            group.clear();
        }
    }
    Ok(TwoPointTally {
        window: window.to_vec(),
        counts,
        samples,
    })
}

/// Distance-resolved intrinsic counts: counts[d][i][j] over window pairs
/// for intrinsic distances d <= depth_cap.
#[derive(Clone, Debug)]
pub struct IntrinsicTally {
    pub window: Vec<u32>,
    pub depth_cap: u32,
    pub counts: Vec<u64>,
    pub samples: u64,
}

impl IntrinsicTally {
    #[inline]
    fn idx(&self, d: u32, i: usize, j: usize) -> usize {
        let n = self.window.len();
        d as usize * n * n + i * n + j
    }

    pub fn merge(&mut self, other: &IntrinsicTally) {
        assert_eq!(self.window, other.window);
        assert_eq!(self.depth_cap, other.depth_cap);
        for (a, b) in self.counts.iter_mut().zip(other.counts.iter()) {
            *a += b;
        }
        self.samples += other.samples;
    }
}

pub fn mc_intrinsic(
    graph: &Graph,
    p: f64,
    window: &[u32],
    depth_cap: u32,
    seed: u64,
    streams: core::ops::Range<u64>,
) -> Result<IntrinsicTally> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidParameter(format!("p = {p} outside [0,1]")));
    }
    let n = window.len();
    let mut slot = vec![u32::MAX; graph.vertex_count() as usize];
    for (i, &v) in window.iter().enumerate() {
        slot[v as usize] = i as u32;
    }
    let mut tally = IntrinsicTally {
        window: window.to_vec(),
        depth_cap,
        counts: vec![0u64; (depth_cap as usize + 1) * n * n],
        samples: streams.end - streams.start,
    };
    let mut scratch = perc::Scratch::new(graph.vertex_count());
    let params = perc::ScanParams {
        depth_cap,
        volume_cap: u64::MAX,
        record_levels: false,
    };
    let mut depths: Vec<(u32, u32)> = Vec::new();
    for stream in streams {
        let coins = EdgeCoins::new(seed, stream, p);
        for (i, &u) in window.iter().enumerate() {
            depths.clear();
            perc::explore_cluster_depths(graph, |e| coins.open(e as u64), u, &params, &mut scratch, &mut depths);
            for &(v, d) in &depths {
                let j = slot[v as usize];
                if j != u32::MAX {
                    let idx = tally.idx(d, i, j as usize);
                    tally.counts[idx] += 1;
                }
            }
        }
    }
    Ok(tally)
}

/// Finalizers ----------------------------------------------------------------

pub fn matrix_from_two_point(
    tally: &TwoPointTally,
    kind: MatrixKind,
    dist: &[u32],
    p: f64,
    graph_hash: u64,
) -> Result<OperatorMatrix> {
    if kind.is_intrinsic() {
        return Err(Error::InvalidParameter(format!(
            "{} needs the intrinsic tally",
            kind.label()
        )));
    }
    let n = tally.window.len();
    let nf = tally.samples as f64;
    let mut values = vec![0.0f64; n * n];
    for i in 0..n {
        for j in 0..n {
            let keep = match kind {
                MatrixKind::TwoPoint => true,
                MatrixKind::Complement(r) => dist[i * n + j] >= r,
                MatrixKind::Sphere(r) => dist[i * n + j] == r,
                _ => unreachable!(),
            };
            if keep {
                values[i * n + j] = tally.counts[i * n + j] as f64 / nf;
            }
        }
    }
    Ok(OperatorMatrix {
        kind,
        p,
        window: tally.window.clone(),
        values,
        sample_count: tally.samples,
        graph_hash,
    })
}

pub fn matrix_from_intrinsic(
    tally: &IntrinsicTally,
    kind: MatrixKind,
    p: f64,
    graph_hash: u64,
) -> Result<OperatorMatrix> {
    let n = tally.window.len();
    let nf = tally.samples as f64;
    let range = |lo: u32, hi: u32| -> Result<(u32, u32)> {
        if hi > tally.depth_cap {
            return Err(Error::InvalidParameter(format!(
                "{} exceeds tallied depth cap {}",
                kind.label(),
                tally.depth_cap
            )));
        }
        Ok((lo, hi))
    };
    let (lo, hi) = match kind {
        MatrixKind::IntBall(r) => range(0, r)?,
        MatrixKind::IntSphere(r) => range(r, r)?,
        MatrixKind::IntAnnulus(r, s) => range(r, s)?,
        _ => {
            return Err(Error::InvalidParameter(format!(
                "{} is not an intrinsic kind",
                kind.label()
            )))
        }
    };
    let mut values = vec![0.0f64; n * n];
    for d in lo..=hi {
        for i in 0..n {
            for j in 0..n {
                values[i * n + j] += tally.counts[tally.idx(d, i, j)] as f64;
            }
        }
    }
    for v in values.iter_mut() {
        *v /= nf;
    }
    Ok(OperatorMatrix {
        kind,
        p,
        window: tally.window.clone(),
        values,
        sample_count: tally.samples,
        graph_hash,
    })
}

/// Exact sources --------------------------------------------------------------

/// Exact matrix by full enumeration (oracle caps apply).
pub fn exact_matrix(
    graph: &Graph,
    p: &oracle::Rational,
    kind: MatrixKind,
    window: &[u32],
) -> Result<OperatorMatrix> {
    let n = window.len();
    let mut values = vec![0.0f64; n * n];
    if kind.is_intrinsic() {
        let tables = oracle::exact_intrinsic_tables(graph, p)?;
        let den = tables.den_pow as f64;
        for (i, &u) in window.iter().enumerate() {
            for (j, &v) in window.iter().enumerate() {
                let num = match kind {
                    MatrixKind::IntBall(r) => tables.ball_num(r as i64, u as usize, v as usize),
                    MatrixKind::IntSphere(r) => tables.sphere_num(r as usize, u as usize, v as usize),
                    MatrixKind::IntAnnulus(r, s) => {
                        tables.annulus_num(r as usize, s as usize, u as usize, v as usize)
                    }
                    _ => unreachable!(),
                };
                values[i * n + j] = num as f64 / den;
            }
        }
    } else {
        let t = oracle::exact_two_point(graph, p)?;
        let dist = window_distances(graph, window);
        for i in 0..n {
            for j in 0..n {
                let keep = match kind {
                    MatrixKind::TwoPoint => true,
                    MatrixKind::Complement(r) => dist[i * n + j] >= r,
                    MatrixKind::Sphere(r) => dist[i * n + j] == r,
                    _ => unreachable!(),
                };
                if keep {
                    values[i * n + j] = t.value(window[i] as usize, window[j] as usize);
                }
            }
        }
    }
    Ok(OperatorMatrix {
        kind,
        p: p.as_f64(),
        window: window.to_vec(),
        values,
        sample_count: 0,
        graph_hash: graph.fingerprint(),
    })
}

/// Exact matrix on a tree: unique paths give tau(u,v) = p^{d(u,v)} and make
/// intrinsic distances coincide with ambient ones on the connection event.
pub fn tree_exact_matrix(
    graph: &Graph,
    p: f64,
    kind: MatrixKind,
    window: &[u32],
) -> Result<OperatorMatrix> {
    if graph.edge_count() + 1 != graph.vertex_count() {
        return Err(Error::InvalidParameter(
            "tree_exact_matrix requires a tree (|E| = |V| - 1)".into(),
        ));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidParameter(format!("p = {p} outside [0,1]")));
    }
    let n = window.len();
    let dist = window_distances(graph, window);
    let mut values = vec![0.0f64; n * n];
    for i in 0..n {
        for j in 0..n {
            let d = dist[i * n + j];
            if d == NO_DISTANCE {
                continue;
            }
            let tau = libm::pow(p, d as f64);
            values[i * n + j] = match kind {
                MatrixKind::TwoPoint => tau,
                MatrixKind::Complement(r) => {
                    if d >= r {
                        tau
                    } else {
                        0.0
                    }
                }
                MatrixKind::Sphere(r) => {
                    if d == r {
                        tau
                    } else {
                        0.0
                    }
                }
                MatrixKind::IntBall(r) => {
                    if d <= r {
                        tau
                    } else {
                        0.0
                    }
                }
                MatrixKind::IntSphere(r) => {
                    if d == r {
                        tau
                    } else {
                        0.0
                    }
                }
                MatrixKind::IntAnnulus(r, s) => {
                    if d >= r && d <= s {
                        tau
                    } else {
                        0.0
                    }
                }
            };
        }
    }
    Ok(OperatorMatrix {
        kind,
        p,
        window: window.to_vec(),
        values,
        sample_count: 0,
        graph_hash: graph.fingerprint(),
    })
}
