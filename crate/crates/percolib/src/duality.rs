//! Uniqueness-threshold experiments on planar maps: the duality transport
//! p_u(M) = 1 - p_c(M†), an independent primal diagnostic from the two
//! largest clusters, and the geometry of intrinsic geodesics at p_u
//! (conditional d_int and ConRad tails, dual-cluster sandwich checks).

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::experiments::PcEstimate;
use crate::fit::{self, ExponentFit};
use crate::graph::Graph;
use crate::map::DualMap;
use crate::perc::EpochDsu;
use crate::rng::EdgeCoins;

// ---------------------------------------------------------------------------
// p_u via duality plus the largest-two-clusters diagnostic
// ---------------------------------------------------------------------------

#[derive(Clone, Debug)]
pub struct PuDualityReport {
    /// p_c estimated on the dual graph.
    pub pc_dual: PcEstimate,
    /// 1 - pc_dual.value: the definitional transport of p_u.
    pub pu_transported: f64,
    pub pu_transported_err: f64,
    /// (p, mean L2/L1) on the primal patch.
    pub merge_scan: Vec<(f64, f64)>,
    /// First p where the mean second-to-first cluster ratio drops below the
    /// threshold; our own diagnostic, only a cross-check of the transport.
    pub pu_primal_diagnostic: Option<f64>,
    pub diagnostic_threshold: f64,
}

/// Mean ratio of the two largest cluster volumes per p on the primal patch,
/// and the transported p_u from a dual p_c estimate.
pub fn pu_duality(
    primal: &Graph,
    pc_dual: PcEstimate,
    merge_grid: &[f64],
    merge_samples: u64,
    seed: u64,
    diagnostic_threshold: f64,
) -> Result<PuDualityReport> {
    if merge_grid.len() < 2 {
        return Err(Error::InvalidParameter("merge scan needs at least 2 points".into()));
    }
    let mut merge_scan = Vec::new();
    let mut dsu = EpochDsu::new(primal.vertex_count());
    for (pi, &p) in merge_grid.iter().enumerate() {
        let mut ratio_sum = 0.0f64;
        for s in 0..merge_samples {
            let stream = ((pi as u64) << 40) | s;
            let coins = EdgeCoins::new(seed, stream, p);
            dsu.reset();
            for (e, &(u, v)) in primal.edges().iter().enumerate() {
                if coins.open(e as u64) {
                    dsu.union(u, v);
                }
            }
            let mut best = 0u64;
            let mut second = 0u64;
            for v in 0..primal.vertex_count() {
                if dsu.find(v) == v {
                    let size = dsu.size_of_root(v) as u64;
                    if size > best {
                        second = best;
                        best = size;
                    } else if size > second {
                        second = size;
                    }
                }
            }
            if best > 0 {
                ratio_sum += second as f64 / best as f64;
            }
        }
        merge_scan.push((p, ratio_sum / merge_samples as f64));
    }
    let mut diag = None;
    for w in merge_scan.windows(2) {
        let (p0, r0) = w[0];
        let (p1, r1) = w[1];
        if r0 >= diagnostic_threshold && r1 < diagnostic_threshold {
            let t = (r0 - diagnostic_threshold) / (r0 - r1);
            diag = Some(p0 + t * (p1 - p0));
            break;
        }
    }
    let pu = 1.0 - pc_dual.value;
    let err = pc_dual.err;
    Ok(PuDualityReport {
        pc_dual,
        pu_transported: pu,
        pu_transported_err: err,
        merge_scan,
        pu_primal_diagnostic: diag,
        diagnostic_threshold,
    })
}

// ---------------------------------------------------------------------------
// Bidirectional lazy intrinsic distance
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DistVerdict {
    Exact(u32),
    AtLeast(u32),
    Disconnected,
    Aborted,
}

/// Meet-in-the-middle BFS over open edges, expanding the smaller frontier a
/// full level at a time. Exact for distances <= cap; exploration beyond
/// `budget` visited vertices aborts (reported, never silently dropped).
pub struct BidirScratch {
    mark_a: Vec<u32>,
    mark_b: Vec<u32>,
    dist_a: Vec<u32>,
    dist_b: Vec<u32>,
    epoch: u32,
}

impl BidirScratch {
    pub fn new(n: u32) -> Self {
        BidirScratch {
            mark_a: vec![0; n as usize],
            mark_b: vec![0; n as usize],
            dist_a: vec![0; n as usize],
            dist_b: vec![0; n as usize],
            epoch: 0,
        }
    }
}

pub fn bidirectional_distance(
    graph: &Graph,
    coins: &EdgeCoins,
    x: u32,
    y: u32,
    cap: u32,
    budget: u64,
    scratch: &mut BidirScratch,
) -> DistVerdict {
    if x == y {
        return DistVerdict::Exact(0);
    }
    scratch.epoch += 1;
    let epoch = scratch.epoch;
    let mut front_a = vec![x];
    let mut front_b = vec![y];
    scratch.mark_a[x as usize] = epoch;
    scratch.dist_a[x as usize] = 0;
    scratch.mark_b[y as usize] = epoch;
    scratch.dist_b[y as usize] = 0;
    let mut depth_a = 0u32;
    let mut depth_b = 0u32;
    let mut visited = 2u64;
    let mut best = u32::MAX;
    loop {
        if best != u32::MAX && depth_a + depth_b + 1 >= best {
            return DistVerdict::Exact(best);
        }
        if best == u32::MAX && depth_a + depth_b >= cap {
            return DistVerdict::AtLeast(cap);
        }
        let expand_a = front_a.len() <= front_b.len();
        let (front, other_mark, my_mark, my_dist, other_dist, depth) = if expand_a {
            (
                &mut front_a,
                &scratch.mark_b,
                &mut scratch.mark_a,
                &mut scratch.dist_a,
                &scratch.dist_b,
                &mut depth_a,
            )
        } else {
            (
                &mut front_b,
                &scratch.mark_a,
                &mut scratch.mark_b,
                &mut scratch.dist_b,
                &scratch.dist_a,
                &mut depth_b,
            )
        };
        if front.is_empty() {
            return if best != u32::MAX {
                DistVerdict::Exact(best)
            } else {
                DistVerdict::Disconnected
            };
        }
        let mut next = Vec::new();
        for &w in front.iter() {
            for (u, e) in graph.neighbors(w) {
                if my_mark[u as usize] == epoch || !coins.open(e as u64) {
                    continue;
                }
                my_mark[u as usize] = epoch;
                my_dist[u as usize] = *depth + 1;
                visited += 1;
                if other_mark[u as usize] == epoch {
                    let cand = *depth + 1 + other_dist[u as usize];
                    if cand < best {
                        best = cand;
                    }
                }
                next.push(u);
            }
        }
        *depth += 1;
        *front = next;
        if visited > budget {
            return DistVerdict::Aborted;
        }
    }
}

// ---------------------------------------------------------------------------
// Incremental ConRad
// ---------------------------------------------------------------------------

/// Edges bucketed by the smallest r at which the union of the induced balls
/// B(x,r) ∪ B(y,r) contains them; precomputed once per vertex pair.
pub struct ConRadBuckets {
    pub x: u32,
    pub y: u32,
    buckets: Vec<Vec<u32>>,
}

pub fn conrad_buckets(graph: &Graph, x: u32, y: u32, r_max: u32) -> ConRadBuckets {
    let dx = graph.distances_from(x);
    let dy = graph.distances_from(y);
    let mut buckets = vec![Vec::new(); r_max as usize + 1];
    for (e, &(a, b)) in graph.edges().iter().enumerate() {
        let in_x = dx[a as usize].max(dx[b as usize]);
        let in_y = dy[a as usize].max(dy[b as usize]);
        let r = in_x.min(in_y);
        if r <= r_max {
            buckets[r as usize].push(e as u32);
        }
    }
    ConRadBuckets { x, y, buckets }
}

/// Minimal r <= r_max with x and y connected inside B(x,r) ∪ B(y,r) (as a
/// union of induced subgraphs); None when the cap is exceeded.
pub fn conrad_incremental(
    graph: &Graph,
    coins: &EdgeCoins,
    buckets: &ConRadBuckets,
    dsu: &mut EpochDsu,
) -> Option<u32> {
    if buckets.x == buckets.y {
        return Some(0);
    }
    dsu.reset();
    for (r, bucket) in buckets.buckets.iter().enumerate() {
        for &e in bucket {
            if coins.open(e as u64) {
                let (a, b) = graph.edges()[e as usize];
                dsu.union(a, b);
            }
        }
        if r >= 1 && dsu.same(buckets.x, buckets.y) {
            return Some(r as u32);
        }
    }
    None
}

// ---------------------------------------------------------------------------
// p_u geometry
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Default)]
pub struct SandwichStats {
    /// Samples with x <-> y and d_int >= 2 whose flanking dual clusters
    /// stayed off the dual boundary.
    pub checked: u64,
    /// Qualifying samples whose dual clusters were NOT distinct (planarity
    /// says this cannot happen away from the boundary).
    pub distinct_violations: u64,
    /// Samples skipped because a dual cluster touched the dual boundary.
    pub boundary_skipped: u64,
    /// Range of d_int / min(|K1|, |K2|).
    pub volume_ratio_min: f64,
    pub volume_ratio_max: f64,
    /// Range of ConRad / min(ecc(K1), ecc(K2)) over samples where ConRad
    /// was resolved; eccentricities are measured from the flanking faces.
    pub conrad_ratio_min: f64,
    pub conrad_ratio_max: f64,
    /// The same volume-ratio range on the first half of the sample budget,
    /// for the stability-under-doubling comparison.
    pub first_half_volume_ratio: (f64, f64),
}

#[derive(Clone, Debug)]
pub struct PuGeometryReport {
    pub p: f64,
    pub samples: u64,
    pub connected: u64,
    /// (n, hits) with hits = #samples { d_int >= n | connected }.
    pub d_int_tail: Vec<(u64, u64)>,
    pub d_int_fit: ExponentFit,
    /// (r, hits) conditional ConRad tail.
    pub conrad_tail: Vec<(u64, u64)>,
    pub conrad_fit: ExponentFit,
    pub sandwich: SandwichStats,
    pub aborted: u64,
    pub d_int_at_cap: u64,
}

#[allow(clippy::too_many_arguments)]
pub fn pu_geometry(
    primal: &Graph,
    dual: &DualMap,
    p: f64,
    x: u32,
    y: u32,
    d_int_cap: u32,
    conrad_cap: u32,
    d_int_window: (u64, u64),
    conrad_window: (u64, u64),
    samples: u64,
    seed: u64,
    budget: u64,
) -> Result<PuGeometryReport> {
    // x and y must be adjacent; find their edge.
    let edge_xy = primal
        .neighbors(x)
        .find(|&(w, _)| w == y)
        .map(|(_, e)| e)
        .ok_or_else(|| Error::InvalidParameter(format!("vertices {x} and {y} are not adjacent")))?;
    let dual_graph = dual.map.graph();
    let dual_exy = dual.dual_edge_of_primal[edge_xy as usize].ok_or_else(|| {
        Error::InvalidParameter("the x-y edge borders the outer face; pick an interior edge".into())
    })?;
    let (f, g) = dual_graph.edges()[dual_exy as usize];
    // Primal edge behind each dual edge, for the bit-flipped dual coins.
    let mut primal_of_dual = vec![u32::MAX; dual_graph.edge_count() as usize];
    for (e, de) in dual.dual_edge_of_primal.iter().enumerate() {
        if let Some(de) = de {
            primal_of_dual[*de as usize] = e as u32;
        }
    }
    let ecc_f = dual_graph.distances_from(f);
    let ecc_g = dual_graph.distances_from(g);

    let mut bidir = BidirScratch::new(primal.vertex_count());
    let buckets = conrad_buckets(primal, x, y, conrad_cap);
    let mut dsu = EpochDsu::new(primal.vertex_count());
    let mut dual_dsu_scratch = crate::perc::Scratch::new(dual_graph.vertex_count());

    let mut d_hist = vec![0u64; d_int_cap as usize + 2];
    let mut conrad_hist = vec![0u64; conrad_cap as usize + 2];
    let mut connected = 0u64;
    let mut aborted = 0u64;
    let mut d_at_cap = 0u64;
    let mut sandwich = SandwichStats {
        volume_ratio_min: f64::INFINITY,
        conrad_ratio_min: f64::INFINITY,
        first_half_volume_ratio: (f64::INFINITY, 0.0),
        ..Default::default()
    };

    for stream in 0..samples {
        let coins = EdgeCoins::new(seed, stream, p);
        let verdict = bidirectional_distance(primal, &coins, x, y, d_int_cap, budget, &mut bidir);
        let d = match verdict {
            DistVerdict::Disconnected => continue,
            DistVerdict::Aborted => {
                aborted += 1;
                continue;
            }
            DistVerdict::AtLeast(c) => {
                connected += 1;
                d_at_cap += 1;
                d_hist[c as usize + 1] += 1;
                continue;
            }
            DistVerdict::Exact(d) => {
                connected += 1;
                d
            }
        };
        d_hist[d as usize] += 1;
        if d < 2 {
            continue;
        }
        // ConRad on the same sample.
        let conrad = conrad_incremental(primal, &coins, &buckets, &mut dsu);
        match conrad {
            Some(r) => conrad_hist[r as usize] += 1,
            None => conrad_hist[conrad_cap as usize + 1] += 1,
        }
        // Dual sandwich: clusters of the flanking faces in the flipped
        // configuration with e† removed.
        let dual_open = |de: u32| -> bool {
            de != dual_exy && !coins.open(primal_of_dual[de as usize] as u64)
        };
        let params = crate::perc::ScanParams::default();
        let mut list_f: Vec<(u32, u32)> = Vec::new();
        crate::perc::explore_cluster_depths(dual_graph, dual_open, f, &params, &mut dual_dsu_scratch, &mut list_f);
        let f_has_g = list_f.iter().any(|&(v, _)| v == g);
        let f_boundary = list_f.iter().any(|&(v, _)| dual_graph.is_boundary(v));
        let mut list_g: Vec<(u32, u32)> = Vec::new();
        crate::perc::explore_cluster_depths(dual_graph, dual_open, g, &params, &mut dual_dsu_scratch, &mut list_g);
        let g_boundary = list_g.iter().any(|&(v, _)| dual_graph.is_boundary(v));
        if f_boundary || g_boundary {
            sandwich.boundary_skipped += 1;
            continue;
        }
        sandwich.checked += 1;
        if f_has_g {
            sandwich.distinct_violations += 1;
            continue;
        }
        let min_volume = list_f.len().min(list_g.len()) as f64;
        let ratio = d as f64 / min_volume;
        sandwich.volume_ratio_min = sandwich.volume_ratio_min.min(ratio);
        sandwich.volume_ratio_max = sandwich.volume_ratio_max.max(ratio);
        if stream < samples / 2 {
            sandwich.first_half_volume_ratio.0 = sandwich.first_half_volume_ratio.0.min(ratio);
            sandwich.first_half_volume_ratio.1 = sandwich.first_half_volume_ratio.1.max(ratio);
        }
        if let Some(r) = conrad {
            let ecc1 = list_f.iter().map(|&(v, _)| ecc_f[v as usize]).max().unwrap_or(0);
            let ecc2 = list_g.iter().map(|&(v, _)| ecc_g[v as usize]).max().unwrap_or(0);
            let min_ecc = ecc1.min(ecc2).max(1) as f64;
            let cr = r as f64 / min_ecc;
            sandwich.conrad_ratio_min = sandwich.conrad_ratio_min.min(cr);
            sandwich.conrad_ratio_max = sandwich.conrad_ratio_max.max(cr);
        }
    }
    if connected == 0 {
        return Err(Error::Underpowered("conditioning event x<->y never occurred".into()));
    }
    // Survival tails from histograms.
    let survival = |hist: &[u64]| -> Vec<(u64, u64)> {
        let mut out = Vec::new();
        let mut acc = 0u64;
        for n in (1..hist.len()).rev() {
            acc += hist[n];
            out.push((n as u64, acc));
        }
        out.reverse();
        out
    };
    let d_int_tail = survival(&d_hist);
    let conrad_tail = survival(&conrad_hist);
    let to_probs = |tail: &[(u64, u64)]| -> Vec<(u64, f64)> {
        tail.iter()
            .map(|&(n, h)| (n, h as f64 / connected as f64))
            .collect()
    };
    let d_int_fit = fit::fit_exponent(&to_probs(&d_int_tail), d_int_window)?;
    let conrad_fit = fit::fit_exponent(&to_probs(&conrad_tail), conrad_window)?;
    Ok(PuGeometryReport {
        p,
        samples,
        connected,
        d_int_tail,
        d_int_fit,
        conrad_tail,
        conrad_fit,
        sandwich,
        aborted,
        d_int_at_cap: d_at_cap,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_grid, build_tree};
    use crate::map::build_tiling;
    use crate::perc::{con_rad, intrinsic_distance, sample_config};

    #[test]
    fn bidirectional_matches_direct_bfs() {
        let g = build_grid(9, 9).unwrap();
        let mut scratch = BidirScratch::new(g.vertex_count());
        for stream in 0..200 {
            let p = 0.55;
            let coins = EdgeCoins::new(77, stream, p);
            let cfg = sample_config(&g, p, 77, stream).unwrap();
            let want = intrinsic_distance(&g, &cfg, 3, 77);
            let got = bidirectional_distance(&g, &coins, 3, 77, 64, 1 << 20, &mut scratch);
            match want {
                Some(d) => assert_eq!(got, DistVerdict::Exact(d), "stream {stream}"),
                None => assert_eq!(got, DistVerdict::Disconnected, "stream {stream}"),
            }
        }
    }

    #[test]
    fn bidirectional_cap_reports_at_least() {
        let g = build_tree(3, 8).unwrap();
        let coins = EdgeCoins::new(5, 0, 1.0);
        let mut scratch = BidirScratch::new(g.vertex_count());
        let leaf = g.vertex_count() - 1;
        let got = bidirectional_distance(&g, &coins, 0, leaf, 3, 1 << 20, &mut scratch);
        assert_eq!(got, DistVerdict::AtLeast(3));
    }

    #[test]
    fn conrad_incremental_matches_reference() {
        let g = build_grid(7, 7).unwrap();
        let (x, y) = (24, 25); // adjacent central pair
        let buckets = conrad_buckets(&g, x, y, 12);
        let mut dsu = EpochDsu::new(g.vertex_count());
        for stream in 0..300 {
            let p = 0.5;
            let coins = EdgeCoins::new(31, stream, p);
            let cfg = sample_config(&g, p, 31, stream).unwrap();
            let want = con_rad(&g, &cfg, x, y);
            let got = conrad_incremental(&g, &coins, &buckets, &mut dsu);
            assert_eq!(got, want, "stream {stream}");
        }
    }

    #[test]
    fn sandwich_on_square_patch() {
        // At p = 1/2 on the self-dual square patch the sandwich machinery
        // must find distinct dual clusters whenever d_int >= 2 holds away
        // from the boundary.
        let m = build_tiling(4, 4, 6).unwrap();
        let d = m.dual().unwrap();
        let g = m.graph();
        // A central adjacent pair: vertex 0 and a neighbor on an interior
        // edge whose dual edge exists.
        let (x, mut y) = (0u32, u32::MAX);
        for (w, e) in g.neighbors(0) {
            if d.dual_edge_of_primal[e as usize].is_some() {
                y = w;
                break;
            }
        }
        let rep = pu_geometry(g, &d, 0.5, x, y, 16, 8, (2, 12), (1, 6), 4000, 3, 1 << 22).unwrap();
        assert!(rep.connected > 1000);
        assert_eq!(rep.sandwich.distinct_violations, 0);
        assert!(rep.sandwich.checked > 0);
        assert!(rep.sandwich.volume_ratio_min > 0.0);
        assert!(rep.aborted == 0);
    }

    #[test]
    fn pu_duality_square_is_self_consistent() {
        // Dual of the square patch is a square patch: pc(dual) ~ 1/2 and the
        // transported pu ~ 1/2, consistent with p_c = p_u on amenable maps.
        let m = build_tiling(4, 4, 10).unwrap();
        let d = m.dual().unwrap();
        let p_grid: Vec<f64> = (0..=8).map(|i| 0.40 + 0.025 * i as f64).collect();
        let pc_dual =
            crate::experiments::estimate_pc_shell_ratio(d.map.graph(), 0, &[(2, 6), (3, 8)], &p_grid, 3000, 9)
                .unwrap();
        let merge_grid: Vec<f64> = (0..=6).map(|i| 0.35 + 0.05 * i as f64).collect();
        let rep = pu_duality(m.graph(), pc_dual, &merge_grid, 40, 11, 0.2).unwrap();
        assert!(
            (rep.pu_transported - 0.5).abs() < 0.06,
            "pu {} +- {}",
            rep.pu_transported,
            rep.pu_transported_err
        );
        // Merge ratio decreases with p.
        assert!(rep.merge_scan.first().unwrap().1 > rep.merge_scan.last().unwrap().1);
    }
}
