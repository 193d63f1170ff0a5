//! Statistical experiments: critical-point estimation, tail-exponent fits,
//! ballisticity, magnetization scaling, multi-arm events, trifurcations and
//! cluster log-density. Every routine is a pure function of (inputs, seed)
//! and shards by stream index.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::fit::{self, Estimate, ExponentFit, LeastSquares};
use crate::graph::{Graph, InfiniteTree};
use crate::perc::{self, ScanParams, Scratch, TreeScanParams};
use crate::rng::EdgeCoins;
use crate::treeform;

// ---------------------------------------------------------------------------
// Critical point
// ---------------------------------------------------------------------------

#[derive(Clone, Debug)]
pub struct PcEstimate {
    pub value: f64,
    pub err: f64,
    pub method: String,
    /// Per-size (or per-window) individual threshold estimates.
    pub per_size: Vec<(u32, f64)>,
    /// Diagnostic scan curves: per size label, the (p, statistic, stderr)
    /// series the estimate was read off from.
    pub curves: Vec<(u32, Vec<(f64, f64, f64)>)>,
}

/// Exact threshold on the k-regular tree: the recursion diverges at 1/(k-1).
pub fn estimate_pc_tree(k: u32) -> Result<PcEstimate> {
    if k < 3 {
        return Err(Error::InvalidParameter(format!("tree degree k = {k} < 3")));
    }
    Ok(PcEstimate {
        value: 1.0 / (k - 1) as f64,
        err: 0.0,
        method: "tree susceptibility divergence (exact)".into(),
        per_size: Vec::new(),
        curves: Vec::new(),
    })
}

/// Square-lattice threshold from rectangle crossings: on a (h+1) x h vertex
/// grid the horizontal crossing probability is exactly 1/2 at p = 1/2 by
/// self-duality (pinned by exact enumeration in the test suite), so the
/// height-1/2 crossing point of each curve estimates p_c with no systematic
/// drift in the size.
pub fn estimate_pc_grid_crossing(
    sizes: &[u32],
    p_grid: &[f64],
    samples_per_point: u64,
    seed: u64,
) -> Result<PcEstimate> {
    if sizes.len() < 3 {
        return Err(Error::InvalidParameter("need at least 3 rectangle sizes".into()));
    }
    if p_grid.len() < 2 {
        return Err(Error::InvalidParameter("p grid too small".into()));
    }
    let mut per_size = Vec::new();
    let mut curves = Vec::new();
    for (si, &h) in sizes.iter().enumerate() {
        let w = h + 1;
        let g = crate::graph::build_grid(w, h)?;
        let left: Vec<u32> = (0..h).map(|y| y * w).collect();
        let mut right_mask = vec![false; g.vertex_count() as usize];
        for y in 0..h {
            right_mask[(y * w + w - 1) as usize] = true;
        }
        let mut scratch = Scratch::new(g.vertex_count());
        let mut scan = Vec::new();
        for (pi, &p) in p_grid.iter().enumerate() {
            let stream_base = ((si as u64 * p_grid.len() as u64 + pi as u64) << 32) | 1;
            let mut hits = 0u64;
            for s in 0..samples_per_point {
                let coins = EdgeCoins::new(seed, stream_base + s, p);
                if set_connected(&g, &coins, &left, &right_mask, &mut scratch) {
                    hits += 1;
                }
            }
            let est = Estimate::proportion(hits, samples_per_point, "crossing");
            scan.push((p, est.mean, est.stderr));
        }
        let p_star = solve_level(&scan, 0.5).ok_or_else(|| {
            Error::Underpowered(format!(
                "crossing curve for size {h} never passes 1/2 in the scanned range"
            ))
        })?;
        per_size.push((h, p_star));
        curves.push((h, scan));
    }
    finish_pc(per_size, curves, p_grid, "self-dual rectangle crossing at height 1/2")
}

fn set_connected(
    graph: &Graph,
    coins: &EdgeCoins,
    from: &[u32],
    to_mask: &[bool],
    scratch: &mut Scratch,
) -> bool {
    scratch.begin_epoch();
    scratch.queue.clear();
    for &s in from {
        if scratch.mark[s as usize] != scratch.epoch {
            scratch.mark[s as usize] = scratch.epoch;
            scratch.queue.push_back((s, 0));
        }
    }
    while let Some((w, _)) = scratch.queue.pop_front() {
        if to_mask[w as usize] {
            return true;
        }
        for (x, e) in graph.neighbors(w) {
            if scratch.mark[x as usize] != scratch.epoch && coins.open(e as u64) {
                scratch.mark[x as usize] = scratch.epoch;
                scratch.queue.push_back((x, 0));
            }
        }
    }
    false
}

/// Threshold on a truncation from the shell-growth ratio: the means
/// E|K_v ∩ ∂B(v,R)| decay or grow geometrically with rate lambda(p), and
/// lambda(p_c) = 1 (at criticality the expected shell occupation is of
/// constant order: E|K ∩ B(R)| grows linearly). On trees the shell means
/// are exactly C ((k-1)p)^R, so the estimator has no truncation bias there;
/// on tilings the window-shift spread is reported as the error.
pub fn estimate_pc_shell_ratio(
    graph: &Graph,
    origin: u32,
    shell_windows: &[(u32, u32)],
    p_grid: &[f64],
    samples_per_point: u64,
    seed: u64,
) -> Result<PcEstimate> {
    if shell_windows.is_empty() {
        return Err(Error::InvalidParameter("need at least one shell window".into()));
    }
    let ambient = graph.distances_from(origin);
    let bdist = graph.boundary_distance();
    let r_top = shell_windows.iter().map(|w| w.1).max().unwrap();
    for &(lo, hi) in shell_windows {
        if lo + 2 > hi {
            return Err(Error::InvalidParameter(format!(
                "shell window [{lo},{hi}] needs at least 3 shells"
            )));
        }
    }
    if bdist[origin as usize] <= r_top {
        return Err(Error::InvalidParameter(format!(
            "origin is {} from the boundary; shells up to {r_top} would be contaminated",
            bdist[origin as usize]
        )));
    }
    let mut scratch = Scratch::new(graph.vertex_count());
    let mut curves: Vec<(u32, Vec<(f64, f64, f64)>)> =
        shell_windows.iter().map(|&(_, hi)| (hi, Vec::new())).collect();
    let mut per_size = Vec::new();
    for (wi, &(r_lo, r_hi)) in shell_windows.iter().enumerate() {
        let mut lambda_scan: Vec<(f64, f64, f64)> = Vec::new();
        for (pi, &p) in p_grid.iter().enumerate() {
            let stream_base = ((wi as u64 * p_grid.len() as u64 + pi as u64) << 33) | 1;
            let mut shell_sums = vec![0.0f64; r_hi as usize + 1];
            for s in 0..samples_per_point {
                let coins = EdgeCoins::new(seed, stream_base + s, p);
                accumulate_shells(&g_ref(graph), &coins, origin, &ambient, r_hi, &mut scratch, &mut shell_sums);
            }
            let pts: Vec<(f64, f64)> = (r_lo..=r_hi)
                .filter(|&r| shell_sums[r as usize] > 0.0)
                .map(|r| (r as f64, libm::log(shell_sums[r as usize] / samples_per_point as f64)))
                .collect();
            if pts.len() < 3 {
                continue;
            }
            let ls = fit::least_squares(&pts)?;
            lambda_scan.push((p, ls.slope, ls.slope_stderr));
        }
        let p_star = solve_level(&lambda_scan, 0.0).ok_or_else(|| {
            Error::Underpowered(format!(
                "shell growth rate never crosses 0 in the scanned p range (window [{r_lo},{r_hi}])"
            ))
        })?;
        per_size.push((r_hi, p_star));
        curves[wi].1 = lambda_scan;
    }
    finish_pc(per_size, curves, p_grid, "shell growth-rate root (lambda(p_c) = 1)")
}

// Identity helper so the closure-based explorer below reads naturally.
fn g_ref(g: &Graph) -> &Graph {
    g
}

/// Add this sample's |K ∩ ∂B(r)| counts (exploration restricted to the
/// ball of radius r_hi) into shell_sums.
fn accumulate_shells(
    graph: &Graph,
    coins: &EdgeCoins,
    origin: u32,
    ambient: &[u32],
    r_hi: u32,
    scratch: &mut Scratch,
    shell_sums: &mut [f64],
) {
    scratch.begin_epoch();
    scratch.queue.clear();
    scratch.mark[origin as usize] = scratch.epoch;
    scratch.queue.push_back((origin, 0));
    while let Some((w, _)) = scratch.queue.pop_front() {
        shell_sums[ambient[w as usize] as usize] += 1.0;
        for (x, e) in graph.neighbors(w) {
            if ambient[x as usize] <= r_hi
                && scratch.mark[x as usize] != scratch.epoch
                && coins.open(e as u64)
            {
                scratch.mark[x as usize] = scratch.epoch;
                scratch.queue.push_back((x, 0));
            }
        }
    }
}

/// First p where the scanned statistic crosses `level`, linearly
/// interpolated.
fn solve_level(scan: &[(f64, f64, f64)], level: f64) -> Option<f64> {
    for w in scan.windows(2) {
        let (p0, y0, _) = w[0];
        let (p1, y1, _) = w[1];
        if (y0 - level) <= 0.0 && (y1 - level) > 0.0 || (y0 - level) < 0.0 && (y1 - level) >= 0.0 {
            let t = (level - y0) / (y1 - y0);
            return Some(p0 + t * (p1 - p0));
        }
    }
    None
}

fn finish_pc(
    per_size: Vec<(u32, f64)>,
    curves: Vec<(u32, Vec<(f64, f64, f64)>)>,
    p_grid: &[f64],
    method: &str,
) -> Result<PcEstimate> {
    let mean = per_size.iter().map(|c| c.1).sum::<f64>() / per_size.len() as f64;
    let spread = per_size.iter().map(|c| (c.1 - mean).abs()).fold(0.0, f64::max);
    let grid_step = p_grid.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
    Ok(PcEstimate {
        value: mean,
        err: spread.max(grid_step / 4.0),
        method: method.into(),
        per_size,
        curves,
    })
}

// ---------------------------------------------------------------------------
// Tail exponents
// ---------------------------------------------------------------------------

/// Survival hit counts on a log-spaced grid: hits[i] = #samples with
/// statistic >= grid[i].
#[derive(Clone, Debug)]
pub struct SurvivalCurve {
    pub grid: Vec<u64>,
    pub hits: Vec<u64>,
    pub samples: u64,
}

impl SurvivalCurve {
    fn new(grid: Vec<u64>) -> Self {
        let hits = vec![0; grid.len()];
        SurvivalCurve {
            grid,
            hits,
            samples: 0,
        }
    }

    fn record(&mut self, value: u64) {
        for (i, &n) in self.grid.iter().enumerate() {
            if value >= n {
                self.hits[i] += 1;
            } else {
                break;
            }
        }
    }

    pub fn probabilities(&self) -> Vec<(u64, f64)> {
        self.grid
            .iter()
            .zip(self.hits.iter())
            .map(|(&n, &h)| (n, h as f64 / self.samples as f64))
            .collect()
    }

    /// Wilson 3-sigma band per grid point.
    pub fn bands(&self) -> Vec<(u64, f64, f64)> {
        self.grid
            .iter()
            .zip(self.hits.iter())
            .map(|(&n, &h)| {
                let (lo, hi) = fit::wilson_interval(h, self.samples, 3.0);
                (n, lo, hi)
            })
            .collect()
    }

    pub fn is_nonincreasing(&self) -> bool {
        self.hits.windows(2).all(|w| w[1] <= w[0])
    }

    pub fn fit(&self, window: (u64, u64)) -> Result<ExponentFit> {
        fit::fit_exponent(&self.probabilities(), window)
    }
}

#[derive(Clone, Debug)]
pub struct TailCurves {
    pub volume: SurvivalCurve,
    pub rad_int: SurvivalCurve,
    pub rad_ext: SurvivalCurve,
}

/// Cluster tails of the root on the implicit infinite k-regular tree.
/// Exploration is depth-capped at the top of the radius grid; any cluster
/// still alive there has more vertices than the volume grid top, so every
/// survival indicator is decided exactly.
pub fn tree_tail_curves(
    tree: InfiniteTree,
    p: f64,
    volume_grid: Vec<u64>,
    radius_grid: Vec<u64>,
    samples: u64,
    seed: u64,
) -> Result<TailCurves> {
    let vol_top = *volume_grid.last().ok_or_else(|| Error::InvalidParameter("empty grid".into()))?;
    let rad_top = *radius_grid.last().ok_or_else(|| Error::InvalidParameter("empty grid".into()))?;
    let depth_cap = rad_top.max(vol_top) as u32;
    let mut volume = SurvivalCurve::new(volume_grid);
    let mut rad = SurvivalCurve::new(radius_grid);
    let params = TreeScanParams {
        depth_cap,
        volume_cap: u64::MAX,
        forward: false,
        record_levels: false,
    };
    for stream in 0..samples {
        let scan = perc::tree_explore(tree, p, seed, stream, &params);
        let vol = if scan.hit_depth_cap {
            // Truncated exploration: the cluster extends past depth_cap >=
            // vol_top, so every volume threshold is met.
            u64::MAX
        } else {
            scan.volume
        };
        volume.record(vol);
        rad.record(scan.rad_int as u64);
    }
    volume.samples = samples;
    rad.samples = samples;
    Ok(TailCurves {
        volume,
        rad_int: rad.clone(),
        rad_ext: rad,
    })
}

/// Cluster tails of `origin` on a truncation, with ambient distances for
/// the extrinsic radius.
pub fn patch_tail_curves(
    graph: &Graph,
    p: f64,
    origin: u32,
    volume_grid: Vec<u64>,
    radius_grid: Vec<u64>,
    samples: u64,
    seed: u64,
) -> Result<TailCurves> {
    let ambient = graph.distances_from(origin);
    let mut volume = SurvivalCurve::new(volume_grid);
    let mut rad_int = SurvivalCurve::new(radius_grid.clone());
    let mut rad_ext = SurvivalCurve::new(radius_grid);
    let mut scratch = Scratch::new(graph.vertex_count());
    let params = ScanParams::default();
    for stream in 0..samples {
        let coins = EdgeCoins::new(seed, stream, p);
        let scan = perc::explore_cluster(
            graph,
            |e| coins.open(e as u64),
            origin,
            &params,
            Some(&ambient),
            &mut scratch,
        );
        volume.record(scan.volume);
        rad_int.record(scan.rad_int as u64);
        rad_ext.record(scan.rad_ext.unwrap_or(0) as u64);
    }
    volume.samples = samples;
    rad_int.samples = samples;
    rad_ext.samples = samples;
    Ok(TailCurves {
        volume,
        rad_int,
        rad_ext,
    })
}

// ---------------------------------------------------------------------------
// Ballisticity
// ---------------------------------------------------------------------------

#[derive(Clone, Debug)]
pub struct BallisticityReport {
    /// (n, #samples with d_int >= n | connected).
    pub conditional_hits: Vec<(u64, u64)>,
    pub connected_samples: u64,
    pub samples: u64,
    /// Log-linear fit of log P(d_int >= n | connected) against n over the
    /// estimable range (>= min_hits per point).
    pub fit: LeastSquares,
    pub fit_range: (u64, u64),
    pub r_squared: f64,
}

/// Conditional intrinsic-distance tail between two fixed vertices under
/// repeated sampling; BFS with early exit from `u` decides d_int exactly.
pub fn ballisticity_patch(
    graph: &Graph,
    p: f64,
    u: u32,
    v: u32,
    n_cap: u32,
    samples: u64,
    seed: u64,
    min_hits: u64,
) -> Result<BallisticityReport> {
    let mut hist = vec![0u64; n_cap as usize + 2];
    let mut connected = 0u64;
    let mut scratch = Scratch::new(graph.vertex_count());
    for stream in 0..samples {
        let coins = EdgeCoins::new(seed, stream, p);
        if let Some(d) = lazy_intrinsic_distance(graph, &coins, u, v, &mut scratch) {
            connected += 1;
            hist[(d as usize).min(n_cap as usize + 1)] += 1;
        }
    }
    if connected < min_hits.max(1) {
        return Err(Error::Underpowered(format!(
            "conditioning event u<->v hit only {connected} times"
        )));
    }
    // Survival from the histogram.
    let mut conditional_hits = Vec::new();
    let mut acc = 0u64;
    for n in (1..=n_cap as usize + 1).rev() {
        acc += hist[n];
        conditional_hits.push((n as u64, acc));
    }
    conditional_hits.reverse();
    let usable: Vec<(f64, f64)> = conditional_hits
        .iter()
        .filter(|&&(n, h)| n >= 2 && h >= min_hits)
        .map(|&(n, h)| (n as f64, libm::log(h as f64 / connected as f64)))
        .collect();
    if usable.len() < 4 {
        return Err(Error::Underpowered(format!(
            "only {} estimable tail points (need 4)",
            usable.len()
        )));
    }
    let fit = fit::least_squares(&usable)?;
    let fit_range = (usable[0].0 as u64, usable[usable.len() - 1].0 as u64);
    Ok(BallisticityReport {
        r_squared: fit.r_squared,
        conditional_hits,
        connected_samples: connected,
        samples,
        fit,
        fit_range,
    })
}

fn lazy_intrinsic_distance(
    graph: &Graph,
    coins: &EdgeCoins,
    u: u32,
    v: u32,
    scratch: &mut Scratch,
) -> Option<u32> {
    if u == v {
        return Some(0);
    }
    scratch.begin_epoch();
    scratch.queue.clear();
    scratch.mark[u as usize] = scratch.epoch;
    scratch.queue.push_back((u, 0));
    while let Some((w, d)) = scratch.queue.pop_front() {
        for (x, e) in graph.neighbors(w) {
            if scratch.mark[x as usize] != scratch.epoch && coins.open(e as u64) {
                if x == v {
                    return Some(d + 1);
                }
                scratch.mark[x as usize] = scratch.epoch;
                scratch.queue.push_back((x, d + 1));
            }
        }
    }
    None
}

/// On a tree, d_int = d on the connection event, so the ratio
/// max d_int/d over the cluster is identically 1: the tail beyond
/// lambda = 1 has exactly zero mass. Verified here by direct sampling.
pub fn ballisticity_tree_ratio_tail(
    tree: InfiniteTree,
    p: f64,
    depth_cap: u32,
    samples: u64,
    seed: u64,
) -> f64 {
    // The implicit tree explorer reports intrinsic depths that are also the
    // ambient distances; any discrepancy would be a bug, so this "estimator"
    // measures the tail mass beyond ratio 1 and always finds zero.
    let params = TreeScanParams {
        depth_cap,
        volume_cap: 1 << 20,
        forward: false,
        record_levels: false,
    };
    let mut beyond = 0u64;
    for stream in 0..samples {
        let scan = perc::tree_explore(tree, p, seed, stream, &params);
        // rad_ext == rad_int by construction; ratio == 1.
        if scan.rad_ext != Some(scan.rad_int) {
            beyond += 1;
        }
    }
    beyond as f64 / samples as f64
}

// ---------------------------------------------------------------------------
// Magnetization scaling
// ---------------------------------------------------------------------------

#[derive(Clone, Debug)]
pub struct MagnetizationScaling {
    /// (h, estimate, reference) per grid point; reference is the exact tree
    /// recursion when available.
    pub series: Vec<(f64, Estimate, Option<f64>)>,
    pub dropped: Vec<f64>,
    /// Least squares of log M against log h over the kept points.
    pub fit: LeastSquares,
}

/// Magnetization of the root on the implicit infinite tree across an
/// h grid; one sample of |K| serves every h (shared-sample estimator).
pub fn magnetization_scaling_tree(
    tree: InfiniteTree,
    p: f64,
    h_grid: &[f64],
    samples: u64,
    seed: u64,
    min_effective_hits: f64,
) -> Result<MagnetizationScaling> {
    if h_grid.is_empty() {
        return Err(Error::InvalidParameter("empty h grid".into()));
    }
    let h_min = h_grid.iter().cloned().fold(f64::INFINITY, f64::min);
    if h_min <= 0.0 {
        return Err(Error::InvalidParameter("h must be > 0".into()));
    }
    let cap = perc::volume_cap_for_h(h_min);
    let params = TreeScanParams {
        depth_cap: u32::MAX,
        volume_cap: cap,
        forward: false,
        record_levels: false,
    };
    let mut sums = vec![0.0f64; h_grid.len()];
    let mut sums_sq = vec![0.0f64; h_grid.len()];
    for stream in 0..samples {
        let scan = perc::tree_explore(tree, p, seed, stream, &params);
        for (i, &h) in h_grid.iter().enumerate() {
            let w = 1.0 - libm::exp(-h * scan.volume as f64);
            sums[i] += w;
            sums_sq[i] += w * w;
        }
    }
    let mut series = Vec::new();
    let mut dropped = Vec::new();
    let mut fit_pts = Vec::new();
    for (i, &h) in h_grid.iter().enumerate() {
        let est = Estimate::from_moments(sums[i], sums_sq[i], samples, "shared-sample 1-e^{-h|K|}");
        let reference = treeform::tree_recursion(tree.k, p, h, 1).ok().map(|r| r.magnetization);
        if est.mean * samples as f64 >= min_effective_hits {
            fit_pts.push((libm::log(h), libm::log(est.mean)));
            series.push((h, est, reference));
        } else {
            dropped.push(h);
        }
    }
    if fit_pts.len() < 3 {
        return Err(Error::Underpowered(format!(
            "only {} usable h points after dropping underpowered ones",
            fit_pts.len()
        )));
    }
    let fit = fit::least_squares(&fit_pts)?;
    Ok(MagnetizationScaling {
        series,
        dropped,
        fit,
    })
}

/// Same estimator on a truncation (for tilings at their estimated p_c).
pub fn magnetization_scaling_patch(
    graph: &Graph,
    p: f64,
    v: u32,
    h_grid: &[f64],
    samples: u64,
    seed: u64,
    min_effective_hits: f64,
) -> Result<MagnetizationScaling> {
    let h_min = h_grid.iter().cloned().fold(f64::INFINITY, f64::min);
    if h_min <= 0.0 || h_grid.is_empty() {
        return Err(Error::InvalidParameter("h grid must be nonempty and positive".into()));
    }
    let cap = perc::volume_cap_for_h(h_min);
    let params = ScanParams {
        volume_cap: cap,
        ..ScanParams::default()
    };
    let mut scratch = Scratch::new(graph.vertex_count());
    let mut sums = vec![0.0f64; h_grid.len()];
    let mut sums_sq = vec![0.0f64; h_grid.len()];
    for stream in 0..samples {
        let coins = EdgeCoins::new(seed, stream, p);
        let scan = perc::explore_cluster(graph, |e| coins.open(e as u64), v, &params, None, &mut scratch);
        for (i, &h) in h_grid.iter().enumerate() {
            let w = 1.0 - libm::exp(-h * scan.volume as f64);
            sums[i] += w;
            sums_sq[i] += w * w;
        }
    }
    let mut series = Vec::new();
    let mut dropped = Vec::new();
    let mut fit_pts = Vec::new();
    for (i, &h) in h_grid.iter().enumerate() {
        let est = Estimate::from_moments(sums[i], sums_sq[i], samples, "shared-sample 1-e^{-h|K|}");
        if est.mean * samples as f64 >= min_effective_hits {
            fit_pts.push((libm::log(h), libm::log(est.mean)));
            series.push((h, est, None));
        } else {
            dropped.push(h);
        }
    }
    if fit_pts.len() < 3 {
        return Err(Error::Underpowered("too few usable h points".into()));
    }
    let fit = fit::least_squares(&fit_pts)?;
    Ok(MagnetizationScaling {
        series,
        dropped,
        fit,
    })
}

// ---------------------------------------------------------------------------
// Multi-arm events
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug)]
pub enum ArmMode {
    /// |K_{v_i}| >= n_i.
    Volume,
    /// rad_int(K_{v_i}) >= n.
    RadInt,
    /// rad_ext(K_{v_i}) >= n.
    RadExt,
    /// Cluster touches the truncation boundary (the finite stand-in for an
    /// infinite cluster).
    BoundaryReach,
}

#[derive(Clone, Debug)]
pub struct MultiArmReport {
    pub joint: Estimate,
    pub singles: Vec<Estimate>,
    /// Product of the single-arm means: the BK upper bound.
    pub bk_product: f64,
    /// joint / bk_product.
    pub ratio: f64,
    pub min_separation: u32,
}

/// Joint estimate of "clusters pairwise disjoint and every arm passes its
/// threshold", with the BK product bound from the same samples.
pub fn multi_arm(
    graph: &Graph,
    p: f64,
    vertices: &[u32],
    mode: ArmMode,
    thresholds: &[u64],
    samples: u64,
    seed: u64,
) -> Result<MultiArmReport> {
    let ell = vertices.len();
    if ell < 2 || thresholds.len() != ell {
        return Err(Error::InvalidParameter(
            "multi_arm needs >= 2 vertices with matching thresholds".into(),
        ));
    }
    let ambient: Vec<Vec<u32>> = match mode {
        ArmMode::RadExt => vertices.iter().map(|&v| graph.distances_from(v)).collect(),
        _ => Vec::new(),
    };
    let mut dist_pairs = u32::MAX;
    {
        let d0 = graph.distances_from(vertices[0]);
        for i in 0..ell {
            let di = if i == 0 { d0.clone() } else { graph.distances_from(vertices[i]) };
            for j in i + 1..ell {
                dist_pairs = dist_pairs.min(di[vertices[j] as usize]);
            }
        }
    }
    let mut scratch = Scratch::new(graph.vertex_count());
    let mut stamp = vec![0u64; graph.vertex_count() as usize];
    let mut joint_hits = 0u64;
    let mut single_hits = vec![0u64; ell];
    let params = ScanParams::default();
    let mut lists: Vec<Vec<(u32, u32)>> = vec![Vec::new(); ell];
    for stream in 0..samples {
        let coins = EdgeCoins::new(seed, stream, p);
        let mut all_pass = true;
        for i in 0..ell {
            lists[i].clear();
            perc::explore_cluster_depths(
                graph,
                |e| coins.open(e as u64),
                vertices[i],
                &params,
                &mut scratch,
                &mut lists[i],
            );
            let pass = match mode {
                ArmMode::Volume => lists[i].len() as u64 >= thresholds[i],
                ArmMode::RadInt => lists[i].iter().map(|&(_, d)| d as u64).max().unwrap_or(0) >= thresholds[i],
                ArmMode::RadExt => {
                    let amb = &ambient[i];
                    lists[i]
                        .iter()
                        .map(|&(v, _)| amb[v as usize] as u64)
                        .max()
                        .unwrap_or(0)
                        >= thresholds[i]
                }
                ArmMode::BoundaryReach => lists[i].iter().any(|&(v, _)| graph.is_boundary(v)),
            };
            if pass {
                single_hits[i] += 1;
            } else {
                all_pass = false;
            }
        }
        if !all_pass {
            continue;
        }
        // Disjointness: no vertex shared between any two cluster lists.
        let token = stream + 1;
        let mut disjoint = true;
        'outer: for (i, list) in lists.iter().enumerate() {
            for &(v, _) in list {
                if stamp[v as usize] == token * ell as u64 + i as u64 {
                    continue;
                }
                if stamp[v as usize] >= token * ell as u64 && stamp[v as usize] < token * ell as u64 + i as u64 {
                    disjoint = false;
                    break 'outer;
                }
                stamp[v as usize] = token * ell as u64 + i as u64;
            }
        }
        if disjoint {
            joint_hits += 1;
        }
    }
    let joint = Estimate::proportion(joint_hits, samples, "joint disjoint-arm indicator");
    let singles: Vec<Estimate> = single_hits
        .iter()
        .map(|&h| Estimate::proportion(h, samples, "single-arm indicator"))
        .collect();
    let bk_product: f64 = singles.iter().map(|e| e.mean).product();
    let ratio = if bk_product > 0.0 {
        joint.mean / bk_product
    } else {
        0.0
    };
    Ok(MultiArmReport {
        joint,
        singles,
        bk_product,
        ratio,
        min_separation: dist_pairs,
    })
}

// ---------------------------------------------------------------------------
// Trifurcations
// ---------------------------------------------------------------------------

#[derive(Clone, Debug)]
pub struct TrifurcationPoint {
    pub p: f64,
    pub estimate: Estimate,
    /// Exact finite-horizon recursion value for the same event.
    pub recursion: f64,
    /// The infinite-horizon limit (p theta_b)^3-style value.
    pub limit: f64,
    /// estimate / (p - p_c)^3.
    pub ratio_to_cube: f64,
}

#[derive(Clone, Debug)]
pub struct TrifurcationCurve {
    pub points: Vec<TrifurcationPoint>,
    pub horizon: u32,
    /// max/min of ratio_to_cube across the grid.
    pub band_ratio: f64,
}

/// P(exactly three root branches reach the horizon) across a p grid on the
/// implicit infinite tree, against the exact finite-horizon recursion.
pub fn trifurcation_curve_tree(
    tree: InfiniteTree,
    p_grid: &[f64],
    horizon: u32,
    samples: u64,
    seed: u64,
) -> Result<TrifurcationCurve> {
    let pc = tree.critical_p();
    if p_grid.iter().any(|&p| p <= pc) {
        return Err(Error::InvalidParameter(format!(
            "trifurcation grid must stay strictly above p_c = {pc}"
        )));
    }
    let mut points = Vec::new();
    let mut lo = f64::INFINITY;
    let mut hi = 0.0f64;
    for (pi, &p) in p_grid.iter().enumerate() {
        let mut hits = 0u64;
        for s in 0..samples {
            let stream = ((pi as u64) << 40) | s;
            if perc::tree_furcation_degree(tree, p, seed, stream, horizon) == 3 {
                hits += 1;
            }
        }
        let estimate = Estimate::proportion(hits, samples, "exactly-3 branch reach");
        let recursion = treeform::furcation_exactly(tree.k, p, horizon, 3);
        let theta = treeform::branch_survival(tree.k, p);
        let limit = treeform::furcation_limit(tree.k, p, theta);
        let ratio = estimate.mean / libm::pow(p - pc, 3.0);
        lo = lo.min(ratio);
        hi = hi.max(ratio);
        points.push(TrifurcationPoint {
            p,
            estimate,
            recursion,
            limit,
            ratio_to_cube: ratio,
        });
    }
    Ok(TrifurcationCurve {
        points,
        horizon,
        band_ratio: hi / lo,
    })
}

/// Generic-graph trifurcation estimate via explicit vertex deletion.
pub fn trifurcation_estimate_patch(
    graph: &Graph,
    p: f64,
    v: u32,
    horizon: u32,
    samples: u64,
    seed: u64,
) -> Result<Estimate> {
    let dist = graph.distances_from(v);
    let mut hits = 0u64;
    for stream in 0..samples {
        let cfg = perc::sample_config(graph, p, seed, stream)?;
        if perc::furcation_degree(graph, &cfg, v, horizon, &dist) == 3 {
            hits += 1;
        }
    }
    Ok(Estimate::proportion(hits, samples, "exactly-3 branch reach (patch)"))
}

// ---------------------------------------------------------------------------
// Annealed upper logarithmic cluster density
// ---------------------------------------------------------------------------

#[derive(Clone, Debug)]
pub struct DeltaLogPoint {
    pub p: f64,
    /// Local slope of log E|K ∩ B(n)| against log |B(n)| at the top of the
    /// window.
    pub delta: f64,
    /// Drift between the top two local slopes; stability means the drift is
    /// small against their scale.
    pub drift: f64,
    pub stable: bool,
    /// (n, |B(n)|, E|K ∩ B(n)|).
    pub series: Vec<(u32, u64, f64)>,
}

/// delta_log on the implicit tree: ball sizes from the closed form, cluster
/// means from level counts.
pub fn delta_log_tree(
    tree: InfiniteTree,
    p_grid: &[f64],
    n_max: u32,
    samples: u64,
    seed: u64,
) -> Result<Vec<DeltaLogPoint>> {
    if n_max < 3 {
        return Err(Error::InvalidParameter("n_max must be >= 3".into()));
    }
    let mut out = Vec::new();
    for (pi, &p) in p_grid.iter().enumerate() {
        let params = TreeScanParams {
            depth_cap: n_max,
            volume_cap: u64::MAX,
            forward: false,
            record_levels: true,
        };
        let mut level_sums = vec![0.0f64; n_max as usize + 1];
        for s in 0..samples {
            let stream = ((pi as u64) << 40) | s;
            let scan = perc::tree_explore(tree, p, seed, stream, &params);
            for (d, &c) in scan.levels.iter().enumerate() {
                level_sums[d] += c as f64;
            }
        }
        let mut series = Vec::new();
        let mut acc = 0.0;
        for n in 0..=n_max {
            acc += level_sums[n as usize] / samples as f64;
            series.push((n, crate::graph::tree_ball_size(tree.k, n), acc));
        }
        out.push(finish_delta_point(p, series)?);
    }
    Ok(out)
}

/// Through-origin fit of the delta series against (p - p_c): the returned
/// slope is the linear coefficient and the residual the worst absolute
/// deviation from the line.
pub fn delta_log_linearity(points: &[DeltaLogPoint], pc: f64) -> (f64, f64) {
    let mut num = 0.0;
    let mut den = 0.0;
    for pt in points {
        let x = pt.p - pc;
        num += pt.delta * x;
        den += x * x;
    }
    let slope = if den > 0.0 { num / den } else { 0.0 };
    let resid = points
        .iter()
        .map(|pt| (pt.delta - slope * (pt.p - pc)).abs())
        .fold(0.0, f64::max);
    (slope, resid)
}

fn finish_delta_point(p: f64, series: Vec<(u32, u64, f64)>) -> Result<DeltaLogPoint> {
    let n = series.len();
    if n < 3 {
        return Err(Error::Underpowered("delta_log needs at least 3 ball sizes".into()));
    }
    let slope_at = |i: usize| -> f64 {
        let (_, b1, e1) = series[i - 1];
        let (_, b2, e2) = series[i];
        (libm::log(e2) - libm::log(e1)) / (libm::log(b2 as f64) - libm::log(b1 as f64))
    };
    let top = slope_at(n - 1);
    let prev = slope_at(n - 2);
    let drift = (top - prev).abs();
    let stable = drift < 0.05 + 0.1 * top.abs();
    Ok(DeltaLogPoint {
        p,
        delta: top,
        drift,
        stable,
        series,
    })
}
