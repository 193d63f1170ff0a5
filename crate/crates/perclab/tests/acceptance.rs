//! Acceptance suite: one test per criterion, each printing a PASS/FAIL line
//! with the measured values. Exact checks are integer-exact; statistical
//! checks pin their windows, sample counts, seeds and tolerances here.
//!
//! A13 is the extended run; it is ignored by default and runs with
//! `cargo test -p perclab --test acceptance -- --ignored --nocapture`.

use std::time::Instant;

use perclab::corpus;
use percolib::duality::{pu_duality, pu_geometry};
use percolib::experiments::{
    ballisticity_patch, ballisticity_tree_ratio_tail, estimate_pc_grid_crossing,
    estimate_pc_shell_ratio, magnetization_scaling_tree, patch_tail_curves, tree_tail_curves,
    trifurcation_curve_tree,
};
use percolib::fit::log_spaced;
use percolib::graph::{build_tree, InfiniteTree};
use percolib::map::build_tiling;
use percolib::matrix::{ball_window, tree_exact_matrix, window_distances, MatrixKind, OperatorMatrix};
use percolib::norms::{decay_rates, norm_vs_q_curve, operator_norm, DEFAULT_NORM_TOL};
use percolib::oracle::{self, EventSpec, Rational};
use percolib::perc::{self, ScanParams, Scratch, TreeScanParams};
use percolib::rng::EdgeCoins;
use percolib::treeform;

struct Criterion {
    label: &'static str,
    failures: Vec<String>,
    started: Instant,
    budget_secs: u64,
}

impl Criterion {
    fn new(label: &'static str, budget_secs: u64) -> Self {
        Criterion {
            label,
            failures: Vec::new(),
            started: Instant::now(),
            budget_secs,
        }
    }

    fn require(&mut self, ok: bool, detail: impl ToString) {
        if !ok {
            self.failures.push(detail.to_string());
        }
    }

    fn finish(mut self, summary: impl ToString) {
        let elapsed = self.started.elapsed();
        if elapsed.as_secs() > self.budget_secs {
            self.failures
                .push(format!("runtime {elapsed:?} exceeded budget {}s", self.budget_secs));
        }
        if self.failures.is_empty() {
            println!("[{}] PASS ({elapsed:?}) — {}", self.label, summary.to_string());
        } else {
            println!(
                "[{}] FAIL ({elapsed:?}) — {}; problems: {}",
                self.label,
                summary.to_string(),
                self.failures.join(" | ")
            );
            panic!("{} failed: {}", self.label, self.failures.join(" | "));
        }
    }
}

const PROBES: [&str; 3] = ["0.2", "0.5", "0.8"];

#[test]
fn a01_monte_carlo_agrees_with_exact_enumeration() {
    let mut c = Criterion::new("A01 oracle agreement", 120);
    let samples = 100_000u64;
    let mut pairs_checked = 0u64;
    let mut worst_z = 0.0f64;
    for (gi, entry) in corpus::corpus().iter().enumerate() {
        let g = &entry.graph;
        let window: Vec<u32> = (0..g.vertex_count()).collect();
        for ps in PROBES {
            let p = Rational::from_decimal_str(ps).unwrap();
            let exact = oracle::exact_two_point(g, &p).unwrap();
            let tally =
                percolib::matrix::mc_two_point(g, p.as_f64(), &window, 0xA01 + gi as u64, 0..samples)
                    .unwrap();
            let n = window.len();
            for i in 0..n {
                for j in 0..n {
                    if i == j {
                        continue;
                    }
                    let tau = exact.value(i, j);
                    let sigma = (tau * (1.0 - tau) / samples as f64).sqrt();
                    let z = (tally.counts[i * n + j] as f64 / samples as f64 - tau).abs() / sigma;
                    worst_z = worst_z.max(z);
                    pairs_checked += 1;
                    c.require(
                        z <= 4.0,
                        format!("{} p={ps} pair ({i},{j}): |z| = {z:.2}", entry.name),
                    );
                }
            }
        }
    }
    c.finish(format!(
        "{pairs_checked} pairs across {} graphs x 3 p-values at N={samples}, worst |z| = {worst_z:.2}",
        corpus::corpus().len()
    ));
}

#[test]
fn a02_bk_and_entrywise_matrix_inequalities_exact() {
    let mut c = Criterion::new("A02 BK and entrywise lemmas", 300);
    let pairs: Vec<(u32, u32)> = (0..=2).flat_map(|n| (0..=2).map(move |m| (n, m))).collect();
    let mut checks = 0u64;
    for entry in corpus::corpus() {
        let g = &entry.graph;
        let (u, w, v) = entry.triple;
        for ps in PROBES {
            let p = Rational::from_decimal_str(ps).unwrap();
            let reports = oracle::verify_entrywise_batch(g, &p, &pairs).unwrap();
            for rep in &reports {
                checks += 2;
                c.require(
                    rep.sc_exact_nonneg,
                    format!(
                        "{} p={ps} n={} m={}: sphere/complement slack {:.3e}",
                        entry.name, rep.n, rep.m, rep.sc_min_slack
                    ),
                );
                c.require(
                    rep.intrinsic_exact_nonneg,
                    format!(
                        "{} p={ps} n={} m={}: intrinsic slack {:.3e}",
                        entry.name, rep.n, rep.m, rep.intrinsic_min_slack
                    ),
                );
            }
            for (a, b) in [
                (EventSpec::Connection { u, v: w }, EventSpec::Connection { u: w, v }),
                (EventSpec::Connection { u, v }, EventSpec::Connection { u, v }),
            ] {
                let bk = oracle::verify_bk(g, &a, &b, &p).unwrap();
                checks += 1;
                c.require(
                    bk.exact_nonneg && bk.exact_min_bound,
                    format!("{} p={ps}: BK slack {:.3e}", entry.name, bk.slack),
                );
            }
        }
    }
    c.finish(format!("{checks} exact inequality checks, zero tolerance"));
}

#[test]
fn a03_ghost_field_inequalities_exact() {
    let mut c = Criterion::new("A03 inverse-BK lemmas", 300);
    // Float guard for the transcendental ghost weights; the enumeration
    // itself is exact.
    let guard = -1e-9;
    let mut checks = 0u64;
    for entry in corpus::inverse_bk_corpus() {
        let g = &entry.graph;
        let (u, w, v) = entry.triple;
        for ps in PROBES {
            let p = Rational::from_decimal_str(ps).unwrap();
            let rep2 = oracle::verify_inverse_bk(g, &p, &[0.5, 0.5], &[u, v]).unwrap();
            checks += 2;
            c.require(
                rep2.inverse_bk_slack >= guard,
                format!("{} p={ps} l=2: inverse-BK slack {:.3e}", entry.name, rep2.inverse_bk_slack),
            );
            c.require(
                rep2.diagrammatic_slack >= guard,
                format!("{} p={ps} l=2: diagrammatic slack {:.3e}", entry.name, rep2.diagrammatic_slack),
            );
            let rep3 = oracle::verify_inverse_bk(g, &p, &[0.5, 0.7, 0.9], &[u, w, v]).unwrap();
            checks += 2;
            c.require(
                rep3.inverse_bk_slack >= guard,
                format!("{} p={ps} l=3: inverse-BK slack {:.3e}", entry.name, rep3.inverse_bk_slack),
            );
            c.require(
                rep3.diagrammatic_slack >= guard,
                format!("{} p={ps} l=3: diagrammatic slack {:.3e}", entry.name, rep3.diagrammatic_slack),
            );
        }
    }
    c.finish(format!(
        "{checks} slack checks for 2 and 3 ghost fields across the <=14-edge corpus"
    ));
}

#[test]
fn a04_tree_closed_forms() {
    let mut c = Criterion::new("A04 tree closed forms", 180);
    let samples = 100_000u64;
    let g = build_tree(3, 14).unwrap();
    let tree = InfiniteTree::new(3).unwrap();
    let mut scratch = Scratch::new(g.vertex_count());

    // Susceptibility at p = 0.3: E|K_root| = 3.25.
    {
        let rec = treeform::tree_recursion(3, 0.3, 0.25, 1).unwrap();
        let (mut sum, mut sum_sq) = (0.0f64, 0.0f64);
        for stream in 0..samples {
            let coins = EdgeCoins::new(0xA04, stream, 0.3);
            let scan =
                perc::explore_cluster(&g, |e| coins.open(e as u64), 0, &ScanParams::default(), None, &mut scratch);
            sum += scan.volume as f64;
            sum_sq += (scan.volume * scan.volume) as f64;
        }
        let est = percolib::fit::Estimate::from_moments(sum, sum_sq, samples, "chi");
        let z = (est.mean - rec.chi).abs() / est.stderr;
        c.require(z <= 3.0, format!("chi: {:.4} vs {:.4} (z = {z:.2})", est.mean, rec.chi));
    }

    // Magnetization at p = 0.3, h = 0.25.
    {
        let rec = treeform::tree_recursion(3, 0.3, 0.25, 1).unwrap();
        let est = perc::magnetization_estimate(&g, 0.3, 0.25, 0, samples, 0xA042).unwrap();
        let z = (est.mean - rec.magnetization).abs() / est.stderr;
        c.require(
            z <= 3.0,
            format!("M: {:.5} vs {:.5} (z = {z:.2})", est.mean, rec.magnetization),
        );
    }

    // Intrinsic sphere and ball means at p = 1/2 for n <= 10.
    {
        let rec = treeform::tree_recursion(3, 0.5, 0.25, 10).unwrap();
        let n_max = 10usize;
        let mut sums = vec![0.0f64; n_max + 1];
        let mut sums_sq = vec![0.0f64; n_max + 1];
        let params = ScanParams {
            depth_cap: n_max as u32,
            volume_cap: u64::MAX,
            record_levels: true,
        };
        for stream in 0..samples {
            let coins = EdgeCoins::new(0xA043, stream, 0.5);
            let scan = perc::explore_cluster(&g, |e| coins.open(e as u64), 0, &params, None, &mut scratch);
            for d in 0..=n_max {
                let x = *scan.levels.get(d).unwrap_or(&0) as f64;
                sums[d] += x;
                sums_sq[d] += x * x;
            }
        }
        let mut ball_mean = 0.0;
        for n in 1..=n_max {
            let est = percolib::fit::Estimate::from_moments(sums[n], sums_sq[n], samples, "level");
            let z = (est.mean - rec.root_sphere[n]).abs() / est.stderr;
            c.require(
                z <= 3.0,
                format!("sphere n={n}: {:.4} vs {:.4} (z = {z:.2})", est.mean, rec.root_sphere[n]),
            );
            ball_mean += est.mean;
        }
        let _ = ball_mean;
        // Ball means as cumulative sums with their own moments.
        let mut cum = vec![0.0f64; samples as usize]; // per-sample cumulative not stored; reuse sums
        let _ = &mut cum;
        let total_mean: f64 = (0..=n_max).map(|d| sums[d] / samples as f64).sum();
        c.require(
            (total_mean - rec.root_ball[n_max]).abs() < 0.15,
            format!("ball n={n_max}: {:.3} vs {:.3}", total_mean, rec.root_ball[n_max]),
        );
    }

    // Forward (branch) ensemble: E|B_int(n)| = n + 1 at criticality.
    {
        let n_max = 10usize;
        let params = TreeScanParams {
            depth_cap: n_max as u32,
            volume_cap: u64::MAX,
            forward: true,
            record_levels: true,
        };
        let mut sums = vec![0.0f64; n_max + 1];
        let mut sums_sq = vec![0.0f64; n_max + 1];
        for stream in 0..samples {
            let scan = perc::tree_explore(tree, 0.5, 0xA044, stream, &params);
            let mut acc = 0.0;
            for d in 0..=n_max {
                acc += *scan.levels.get(d).unwrap_or(&0) as f64;
            }
            sums[n_max] += acc;
            sums_sq[n_max] += acc * acc;
        }
        let est = percolib::fit::Estimate::from_moments(sums[n_max], sums_sq[n_max], samples, "fwd ball");
        let want = (n_max + 1) as f64;
        let z = (est.mean - want).abs() / est.stderr;
        c.require(
            z <= 3.0,
            format!("forward ball n={n_max}: {:.4} vs {want} (z = {z:.2})", est.mean),
        );
    }
    c.finish("chi, magnetization, sphere/ball means and the n+1 forward-ensemble equality");
}

#[test]
fn a05_exponential_decay_diagnostics() {
    let mut c = Criterion::new("A05 exponential decay", 180);
    let g = build_tree(3, 10).unwrap();
    let p = 0.3;
    let w = ball_window(&g, 0, 8);
    let t = tree_exact_matrix(&g, p, MatrixKind::TwoPoint, &w).unwrap();
    let dist = window_distances(&g, &w);
    let rep = decay_rates(&t, &dist, 2.0, 8, 1e-9).unwrap();
    let want_xi = -(0.3f64).ln();
    c.require(
        (rep.xi - want_xi).abs() <= 0.05,
        format!("xi = {:.4} vs {:.4}", rep.xi, want_xi),
    );
    c.require(
        rep.explicit_curve_ok,
        "complement norms exceed 2|T| e^{-n/(e|T|)} somewhere",
    );
    c.require(rep.eta_lower_bound_ok, "eta below e^{-1}|T|^{-1} - 3 stderr");
    c.finish(format!(
        "xi = {:.4} (target {:.4}), |T|_2 = {:.3}, curve domination holds for n <= 8",
        rep.xi, want_xi, rep.t_norm.value
    ));
}

#[test]
fn a06_mean_field_tails_on_the_tree() {
    let mut c = Criterion::new("A06 mean-field tails", 600);
    let tree = InfiniteTree::new(3).unwrap();
    let samples = 1_000_000u64;
    let vol_grid = log_spaced(8, 256, 8);
    let rad_grid = log_spaced(8, 1024, 8);
    let curves = tree_tail_curves(tree, 0.5, vol_grid, rad_grid, samples, 0xA06).unwrap();

    for (n, phat) in curves.volume.probabilities() {
        let want = treeform::root_volume_tail(3, 0.5, n as u32)[n as usize];
        let sigma = (want * (1.0 - want) / samples as f64).sqrt();
        let z = (phat - want).abs() / sigma;
        c.require(z <= 4.0, format!("volume tail n={n}: z = {z:.2}"));
    }
    for (n, phat) in curves.rad_int.probabilities() {
        let want = treeform::root_reach(3, 0.5, n as u32);
        let sigma = (want * (1.0 - want) / samples as f64).sqrt();
        let z = (phat - want).abs() / sigma;
        c.require(z <= 4.0, format!("radius tail n={n}: z = {z:.2}"));
    }

    let vol_fit = curves.volume.fit((8, 256)).unwrap();
    c.require(
        (vol_fit.slope + 0.5).abs() <= 0.1,
        format!("volume slope {:.4} outside -0.5 +- 0.1 over [8,256]", vol_fit.slope),
    );
    // Radius window per the exact recursion: [8,256] carries a -0.854
    // transient; [32,1024] sits at -0.950.
    let rad_fit = curves.rad_int.fit((32, 1024)).unwrap();
    c.require(
        (rad_fit.slope + 1.0).abs() <= 0.1,
        format!("radius slope {:.4} outside -1.0 +- 0.1 over [32,1024]", rad_fit.slope),
    );
    c.finish(format!(
        "N=1e6: volume slope {:.4} on [8,256], radius slope {:.4} on [32,1024], all points within 4 sigma of the recursions",
        vol_fit.slope, rad_fit.slope
    ));
}

fn pc_37(layers: u32) -> (percolib::graph::Graph, f64, f64) {
    let m = build_tiling(3, 7, layers).unwrap();
    let g = m.graph().clone();
    let p_grid: Vec<f64> = (0..=10).map(|i| 0.14 + 0.012 * i as f64).collect();
    let est = estimate_pc_shell_ratio(&g, 0, &[(2, 6), (3, 8)], &p_grid, 20_000, 0xEC).unwrap();
    (g, est.value, est.err)
}

#[test]
fn a07_extrinsic_radius_tail_on_the_hyperbolic_tiling() {
    let mut c = Criterion::new("A07 {3,7} extrinsic radius", 1800);
    let (g, pc, err) = pc_37(10);
    let samples = 1_000_000u64;
    let grid = log_spaced(1, 8, 10);
    let mut detail = Vec::new();
    for (tag, p) in [("pc-err", pc - err), ("pc", pc), ("pc+err", pc + err)] {
        let curves = patch_tail_curves(&g, p, 0, grid.clone(), grid.clone(), samples, 0xA07).unwrap();
        c.require(curves.rad_ext.is_nonincreasing(), "survival curve not monotone");
        let fit = curves.rad_ext.fit((2, 8)).unwrap();
        detail.push(format!("{tag}: slope {:.3}+-{:.3}", fit.slope, fit.slope_stderr));
        c.require(
            (fit.slope + 1.0).abs() <= 0.2,
            format!("{tag}: rad_ext slope {:.3} outside -1.0 +- 0.2 over [2,8]", fit.slope),
        );
    }
    c.finish(format!(
        "p_c = {pc:.4} +- {err:.4} (10-layer patch, N=1e6 per point): {}",
        detail.join("; ")
    ));
}

#[test]
fn a08_ballisticity() {
    let mut c = Criterion::new("A08 ballisticity", 900);
    // Conditional intrinsic-distance tail for an adjacent central pair on
    // the {3,7} patch at the estimated critical point.
    let (g, pc, _) = pc_37(9);
    let bd = g.boundary_distance();
    let x = (0..g.vertex_count()).max_by_key(|&v| bd[v as usize]).unwrap();
    let y = g.neighbors(x).next().unwrap().0;
    let rep = ballisticity_patch(&g, pc, x, y, 30, 1_000_000, 0xA08, 100).unwrap();
    c.require(
        rep.r_squared >= 0.97,
        format!("conditional tail R^2 = {:.4} < 0.97", rep.r_squared),
    );
    // Tree negative space: on a tree d_int = d on the connection event, so
    // the ratio tail beyond 1 is exactly zero.
    let tree_tail = ballisticity_tree_ratio_tail(InfiniteTree::new(3).unwrap(), 0.45, 64, 100_000, 0xA082);
    c.require(tree_tail == 0.0, format!("tree ratio tail beyond 1 = {tree_tail}"));
    c.finish(format!(
        "{{3,7}} at p = {pc:.4}: R^2 = {:.4} over n in {:?} ({} connected samples); tree ratio-tail mass 0",
        rep.r_squared, rep.fit_range, rep.connected_samples
    ));
}

#[test]
fn a09_norm_exponent_band() {
    let mut c = Criterion::new("A09 norm-exponent band", 300);
    let g = build_tree(3, 12).unwrap();
    let w = ball_window(&g, 0, 10);
    let t = tree_exact_matrix(&g, 0.5, MatrixKind::TwoPoint, &w).unwrap();
    let q_grid = [1.1, 1.25, 1.5, 1.75, 2.0];
    let tree_curve = norm_vs_q_curve(&t, &q_grid, DEFAULT_NORM_TOL).unwrap();

    let n = 64usize;
    let ones = OperatorMatrix {
        kind: MatrixKind::TwoPoint,
        p: 0.5,
        window: (0..n as u32).collect(),
        values: vec![1.0; n * n],
        sample_count: 0,
        graph_hash: 0,
    };
    let control_curve = norm_vs_q_curve(&ones, &q_grid, DEFAULT_NORM_TOL).unwrap();

    c.require(
        control_curve.scaled_band_ratio > 1.5,
        format!("negative control band {:.2} unexpectedly flat", control_curve.scaled_band_ratio),
    );
    c.require(
        tree_curve.scaled_band_ratio <= 1.5,
        format!(
            "tree band ratio {:.3} exceeds 1.5 (values {:?})",
            tree_curve.scaled_band_ratio,
            tree_curve
                .series
                .iter()
                .map(|(q, r)| format!("{q}:{:.3}", r.value * (q - 1.0)))
                .collect::<Vec<_>>()
        ),
    );
    c.finish(format!(
        "tree band {:.3} vs all-ones control {:.3} (window radius 10, q in [1.1, 2])",
        tree_curve.scaled_band_ratio, control_curve.scaled_band_ratio
    ));
}

#[test]
fn a10_magnetization_scaling() {
    let mut c = Criterion::new("A10 magnetization scaling", 300);
    let tree = InfiniteTree::new(3).unwrap();
    // Window per the exact recursion: over [1e-3,1e-1] the true slope is
    // 0.41; the asymptotic regime within the same +-0.05 band needs
    // [1e-5,1e-3].
    let h_grid: Vec<f64> = (0..5).map(|i| 1e-5 * 10f64.powf(i as f64 / 2.0)).collect();
    let rep = magnetization_scaling_tree(tree, 0.5, &h_grid, 100_000, 0xA10, 100.0).unwrap();
    for (h, est, reference) in &rep.series {
        let want = reference.unwrap();
        let z = (est.mean - want).abs() / est.stderr;
        c.require(z <= 3.0, format!("h={h:.1e}: {:.5} vs {want:.5} (z = {z:.2})", est.mean));
    }
    c.require(rep.dropped.is_empty(), format!("{} underpowered h points", rep.dropped.len()));
    c.require(
        (rep.fit.slope - 0.5).abs() <= 0.05,
        format!("slope {:.4} outside 0.5 +- 0.05", rep.fit.slope),
    );
    c.finish(format!(
        "slope {:.4} +- {:.4} over h in [1e-5, 1e-3], every point within 3 sigma of the recursion",
        rep.fit.slope, rep.fit.slope_stderr
    ));
}

#[test]
fn a11_trifurcation_law() {
    let mut c = Criterion::new("A11 trifurcation law", 600);
    let tree = InfiniteTree::new(3).unwrap();
    let grid = [0.55, 0.5875, 0.625, 0.6625, 0.7];
    let curve = trifurcation_curve_tree(tree, &grid, 24, 100_000, 0xA11).unwrap();
    for pt in &curve.points {
        let z = (pt.estimate.mean - pt.recursion).abs() / pt.estimate.stderr;
        c.require(
            z <= 3.0,
            format!("p={}: {:.5} vs recursion {:.5} (z = {z:.2})", pt.p, pt.estimate.mean, pt.recursion),
        );
    }
    c.require(
        curve.band_ratio <= 3.0,
        format!("ratio-to-(p-pc)^3 band {:.3} exceeds 3", curve.band_ratio),
    );
    c.finish(format!(
        "5-point grid, horizon 24, N=1e5: every point within 3 sigma; band ratio {:.3}",
        curve.band_ratio
    ));
}

#[test]
fn a12_duality_calibration_and_role_swap() {
    let mut c = Criterion::new("A12 duality", 1200);
    // Square lattice: self-dual rectangle crossings put p_c at 1/2.
    let p_grid: Vec<f64> = (0..=10).map(|i| 0.40 + 0.02 * i as f64).collect();
    let square = estimate_pc_grid_crossing(&[6, 10, 14], &p_grid, 20_000, 0xA12).unwrap();
    c.require(
        (square.value - 0.5).abs() <= 0.02,
        format!("square p_c = {:.4} +- {:.4}", square.value, square.err),
    );

    // Role swap: p_c estimated on a built {7,3} patch and on the dual of a
    // built {3,7} patch must agree within joint error.
    let direct = build_tiling(7, 3, 9).unwrap();
    let via_dual = build_tiling(3, 7, 6).unwrap().dual().unwrap();
    let p73_grid: Vec<f64> = (0..=10).map(|i| 0.48 + 0.012 * i as f64).collect();
    let windows = [(2u32, 8u32), (3, 10)];
    let a = estimate_pc_shell_ratio(direct.graph(), 0, &windows, &p73_grid, 20_000, 0xA121).unwrap();
    let b = estimate_pc_shell_ratio(via_dual.map.graph(), 0, &[(2, 6), (3, 8)], &p73_grid, 20_000, 0xA122).unwrap();
    let gap = (a.value - b.value).abs();
    c.require(
        gap <= a.err + b.err,
        format!(
            "role swap: {:.4}+-{:.4} vs {:.4}+-{:.4} (gap {gap:.4})",
            a.value, a.err, b.value, b.err
        ),
    );
    c.finish(format!(
        "square p_c = {:.4} +- {:.4}; {{7,3}} direct {:.4}+-{:.4} vs dual-of-{{3,7}} {:.4}+-{:.4}; transported p_u({{3,7}}) = {:.4}",
        square.value, square.err, a.value, a.err, b.value, b.err, 1.0 - a.value
    ));
}

/// Extended run; every other criterion passes without it.
#[test]
#[ignore = "extended: ~2 min on top of the default suite"]
fn a13_uniqueness_threshold_geometry() {
    let mut c = Criterion::new("A13 p_u geometry", 2700);
    // p_u transported from the dual threshold.
    let direct = build_tiling(7, 3, 9).unwrap();
    let p73_grid: Vec<f64> = (0..=10).map(|i| 0.48 + 0.012 * i as f64).collect();
    let pc_dual = estimate_pc_shell_ratio(direct.graph(), 0, &[(2, 8), (3, 10)], &p73_grid, 20_000, 0xA131).unwrap();
    let pu = 1.0 - pc_dual.value;
    let err = pc_dual.err;

    let m = build_tiling(3, 7, 12).unwrap();
    let d = m.dual().unwrap();
    let g = m.graph();
    let bd = g.boundary_distance();
    let x = (0..g.vertex_count()).max_by_key(|&v| bd[v as usize]).unwrap();
    let y = g
        .neighbors(x)
        .find(|&(_, e)| d.dual_edge_of_primal[e as usize].is_some())
        .map(|(w, _)| w)
        .unwrap();

    let samples = 1_000_000u64;
    let mut details = Vec::new();
    for (tag, p) in [("pu-err", pu - err), ("pu", pu), ("pu+err", pu + err)] {
        let rep = pu_geometry(g, &d, p, x, y, 28, 11, (3, 24), (2, 8), samples, 0xA132, 1 << 21).unwrap();
        c.require(rep.aborted == 0, format!("{tag}: {} aborted explorations", rep.aborted));
        c.require(
            (rep.d_int_fit.slope + 1.0).abs() <= 0.25,
            format!("{tag}: d_int slope {:.3} outside -1.0 +- 0.25", rep.d_int_fit.slope),
        );
        c.require(
            (rep.conrad_fit.slope + 2.0).abs() <= 0.4,
            format!("{tag}: ConRad slope {:.3} outside -2.0 +- 0.4", rep.conrad_fit.slope),
        );
        c.require(
            rep.sandwich.distinct_violations == 0,
            format!("{tag}: {} dual-sandwich violations", rep.sandwich.distinct_violations),
        );
        c.require(
            rep.sandwich.volume_ratio_min > 0.0 && rep.sandwich.volume_ratio_min.is_finite(),
            format!("{tag}: degenerate sandwich constant {}", rep.sandwich.volume_ratio_min),
        );
        // Stability of the recorded constants under sample doubling: the
        // full-run extrema may only extend the half-run ones, and by at
        // most a factor of two.
        let (h_lo, h_hi) = rep.sandwich.first_half_volume_ratio;
        c.require(
            rep.sandwich.volume_ratio_min <= h_lo + 1e-12
                && rep.sandwich.volume_ratio_min >= h_lo / 2.0
                && rep.sandwich.volume_ratio_max >= h_hi - 1e-12
                && rep.sandwich.volume_ratio_max <= h_hi * 2.0,
            format!(
                "sandwich constants unstable under doubling: half [{h_lo:.3},{h_hi:.3}] vs full [{:.3},{:.3}]",
                rep.sandwich.volume_ratio_min, rep.sandwich.volume_ratio_max
            ),
        );
        details.push(format!(
            "{tag}: d_int {:.3}, ConRad {:.3}, c = {:.3}, C = {:.3}, checked {}",
            rep.d_int_fit.slope,
            rep.conrad_fit.slope,
            rep.sandwich.volume_ratio_min,
            rep.sandwich.volume_ratio_max,
            rep.sandwich.checked
        ));
    }
    c.finish(format!(
        "p_u = {pu:.4} +- {err:.4} (12-layer patch, N=1e6 per point): {}",
        details.join("; ")
    ));
}

#[test]
fn a14_reproducibility_across_worker_counts() {
    let mut c = Criterion::new("A14 reproducibility", 300);
    let bin = env!("CARGO_BIN_EXE_perclab");
    let base = std::env::temp_dir().join(format!("perclab-accept-{}", std::process::id()));
    let run = |workers: u32, sub: &str| -> (Vec<u8>, Vec<u8>) {
        let dir = base.join(format!("{sub}-w{workers}"));
        let status = std::process::Command::new(bin)
            .args([
                "oracle",
                "--samples",
                "2000",
                "--seed",
                "9",
                "--workers",
                &workers.to_string(),
                "--out",
                dir.to_str().unwrap(),
            ])
            .output()
            .expect("oracle run");
        assert!(status.status.success(), "oracle run failed: {:?}", status);
        (
            std::fs::read(dir.join("oracle.json")).unwrap(),
            std::fs::read(dir.join("oracle-golden.json")).unwrap(),
        )
    };
    let (doc1, gold1) = run(1, "o");
    let (doc2, gold2) = run(2, "o");
    let (doc4, gold4) = run(4, "o");
    c.require(doc1 == doc2 && doc2 == doc4, "oracle result documents differ across worker counts");
    c.require(gold1 == gold2 && gold2 == gold4, "golden files differ across worker counts");

    // Monte Carlo matrix with sharded tallies.
    let mrun = |workers: u32| -> Vec<u8> {
        let dir = base.join(format!("m-w{workers}"));
        let status = std::process::Command::new(bin)
            .args([
                "matrix",
                "--graph",
                "grid(5,5)",
                "--p",
                "0.5",
                "--source",
                "mc",
                "--samples",
                "20000",
                "--seed",
                "4",
                "--workers",
                &workers.to_string(),
                "--window-radius",
                "3",
                "--out",
                dir.to_str().unwrap(),
            ])
            .output()
            .expect("matrix run");
        assert!(status.status.success(), "matrix run failed: {:?}", status);
        let name = std::fs::read_dir(&dir)
            .unwrap()
            .filter_map(|e| e.ok())
            .find(|e| e.file_name().to_string_lossy().ends_with(".pmat"))
            .unwrap();
        std::fs::read(name.path()).unwrap()
    };
    let m1 = mrun(1);
    let m3 = mrun(3);
    c.require(m1 == m3, "Monte Carlo matrices differ across worker counts");
    let rerun = mrun(3);
    c.require(rerun == m3, "identical spec did not reproduce identical bytes");
    c.finish("oracle documents, golden files and MC matrices bit-identical for 1/2/3/4 workers");
}
