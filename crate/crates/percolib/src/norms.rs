//! q -> q operator norms of nonnegative symmetric matrices and the norm
//! diagnostics built on them: triangle diagrams, exponential decay rates of
//! the complement matrices, the support-interpolation inequality, and the
//! norm-versus-p / norm-versus-q curves.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::fit::{self, ExponentFit, LeastSquares};
use crate::graph::Graph;
use crate::matrix::{tree_exact_matrix, MatrixKind, OperatorMatrix};
use crate::perc::{self, ScanParams, Scratch};
use crate::rng::EdgeCoins;

pub const DEFAULT_NORM_TOL: f64 = 1e-8;
pub const NORM_ITER_CAP: u32 = 10_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NormMethod {
    ClosedForm1,
    ClosedFormInf,
    Power2,
    NonlinearPowerQ,
}

#[derive(Clone, Debug)]
pub struct NormResult {
    pub q: f64,
    pub value: f64,
    pub iterations: u32,
    pub residual: f64,
    pub method: NormMethod,
    /// Non-convergence is flagged, never silently accepted.
    pub converged: bool,
}

/// The q -> q operator norm over nonnegative vectors. q = 1 and q = inf are
/// column/row sums; q = 2 is symmetric power iteration; general q uses the
/// nonlinear power iteration f <- normalize(Phi_{q'}(M^T Phi_q(M f))) with
/// the power duality maps, started from the uniform vector.
pub fn operator_norm(m: &OperatorMatrix, q: f64, tol: f64) -> Result<NormResult> {
    if !(1.0..=f64::INFINITY).contains(&q) {
        return Err(Error::InvalidParameter(format!("q = {q} outside [1, inf]")));
    }
    if tol <= 0.0 {
        return Err(Error::InvalidParameter("tol must be > 0".into()));
    }
    let n = m.n();
    if n == 0 {
        return Err(Error::InvalidParameter("empty window".into()));
    }
    if q == 1.0 {
        // Max column sum; rows by symmetry.
        let value = (0..n)
            .map(|j| (0..n).map(|i| m.get(i, j)).sum::<f64>())
            .fold(0.0, f64::max);
        return Ok(NormResult {
            q,
            value,
            iterations: 0,
            residual: 0.0,
            method: NormMethod::ClosedForm1,
            converged: true,
        });
    }
    if q.is_infinite() {
        return Ok(NormResult {
            q,
            value: m.max_row_sum(),
            iterations: 0,
            residual: 0.0,
            method: NormMethod::ClosedFormInf,
            converged: true,
        });
    }

    let method = if q == 2.0 {
        NormMethod::Power2
    } else {
        NormMethod::NonlinearPowerQ
    };
    let qp = q / (q - 1.0);
    let norm_q = |v: &[f64], q: f64| -> f64 {
        libm::pow(v.iter().map(|&x| libm::pow(x, q)).sum::<f64>(), 1.0 / q)
    };
    let matvec = |x: &[f64], y: &mut [f64]| {
        for i in 0..n {
            let mut acc = 0.0;
            let row = &m.values[i * n..(i + 1) * n];
            for (j, &mij) in row.iter().enumerate() {
                acc += mij * x[j];
            }
            y[i] = acc;
        }
    };

    let mut f = vec![1.0 / libm::pow(n as f64, 1.0 / q); n];
    let mut g = vec![0.0; n];
    let mut w = vec![0.0; n];
    let mut prev = 0.0f64;
    let mut value = 0.0f64;
    let mut residual = f64::INFINITY;
    let mut iterations = 0;
    for it in 1..=NORM_ITER_CAP {
        iterations = it;
        matvec(&f, &mut g);
        value = norm_q(&g, q);
        if value == 0.0 {
            return Ok(NormResult {
                q,
                value: 0.0,
                iterations,
                residual: 0.0,
                method,
                converged: true,
            });
        }
        residual = (value - prev).abs() / value;
        if it > 1 && residual < tol {
            return Ok(NormResult {
                q,
                value,
                iterations,
                residual,
                method,
                converged: true,
            });
        }
        prev = value;
        // z = Phi_q(g): z_i = (g_i / |g|_q)^{q-1}; w = M^T z = M z.
        for (zi, gi) in g.iter_mut().map(|x| (x, ())) {
            // normalize in place to avoid a second buffer
            let _ = gi;
            *zi /= value;
        }
        for zi in g.iter_mut() {
            *zi = libm::pow(*zi, q - 1.0);
        }
        matvec(&g, &mut w);
        // f = Phi_{q'}(w) normalized: f_i = w_i^{q'-1}, then |f|_q = 1.
        for (fi, &wi) in f.iter_mut().zip(w.iter()) {
            *fi = libm::pow(wi, qp - 1.0);
        }
        let nf = norm_q(&f, q);
        if nf == 0.0 {
            return Ok(NormResult {
                q,
                value: 0.0,
                iterations,
                residual: 0.0,
                method,
                converged: true,
            });
        }
        for fi in f.iter_mut() {
            *fi /= nf;
        }
    }
    Ok(NormResult {
        q,
        value,
        iterations,
        residual,
        method,
        converged: false,
    })
}

/// Triangle diagram over the window: max_v (M^3)(v,v), plus the gap to the
/// operator bound |M|_2^3 which must be nonnegative up to tolerance.
#[derive(Clone, Debug)]
pub struct TriangleReport {
    pub nabla: f64,
    pub argmax: usize,
    pub norm2: NormResult,
    /// |M|_2^3 - nabla.
    pub bound_gap: f64,
}

pub fn triangle_diagram(m: &OperatorMatrix, tol: f64) -> Result<TriangleReport> {
    let n = m.n();
    // diag(M^3) = sum_u (M^2)(v,u) M(u,v).
    let mut m2 = vec![0.0f64; n * n];
    for i in 0..n {
        for k in 0..n {
            let mik = m.get(i, k);
            if mik == 0.0 {
                continue;
            }
            let row = &m.values[k * n..(k + 1) * n];
            for (j, &mkj) in row.iter().enumerate() {
                m2[i * n + j] += mik * mkj;
            }
        }
    }
    let mut nabla = f64::NEG_INFINITY;
    let mut argmax = 0;
    for v in 0..n {
        let d: f64 = (0..n).map(|u| m2[v * n + u] * m.get(u, v)).sum();
        if d > nabla {
            nabla = d;
            argmax = v;
        }
    }
    let norm2 = operator_norm(m, 2.0, tol)?;
    let bound_gap = norm2.value * norm2.value * norm2.value - nabla;
    Ok(TriangleReport {
        nabla,
        argmax,
        norm2,
        bound_gap,
    })
}

/// Decay-rate fits on a window: xi from the farthest-pair two-point values
/// and eta from |C(n)|_q, with the explicit curve domination check
/// |C(n)|_q <= 2 |T|_q e^{-n/(e |T|_q)} and the lower-bound diagnostic
/// eta >= 1/(e |T|_q).
#[derive(Clone, Debug)]
pub struct DecayReport {
    pub q: f64,
    /// -slope of log sup{tau(u,v) : d(u,v) = n} against n.
    pub xi: f64,
    pub xi_stderr: f64,
    /// -slope of log |C(n)|_q against n.
    pub eta: f64,
    pub eta_stderr: f64,
    pub t_norm: NormResult,
    pub complement_norms: Vec<(u32, f64)>,
    pub sup_tau_by_shell: Vec<(u32, f64)>,
    /// eta >= e^{-1} |T|^{-1} - 3 stderr.
    pub eta_lower_bound_ok: bool,
    /// |C(n)| <= 2|T| e^{-n/(e|T|)} for every shell in range.
    pub explicit_curve_ok: bool,
}

pub fn decay_rates(
    t: &OperatorMatrix,
    dist: &[u32],
    q: f64,
    n_max: u32,
    tol: f64,
) -> Result<DecayReport> {
    let n = t.n();
    if t.kind != MatrixKind::TwoPoint {
        return Err(Error::InvalidParameter("decay_rates expects the T matrix".into()));
    }
    let t_norm = operator_norm(t, q, tol)?;
    let mut sup_tau_by_shell = Vec::new();
    let mut complement_norms = Vec::new();
    let mut usable_shells = 0;
    for r in 1..=n_max {
        let mut sup_tau = 0.0f64;
        let mut c = OperatorMatrix {
            kind: MatrixKind::Complement(r),
            p: t.p,
            window: t.window.clone(),
            values: vec![0.0; n * n],
            sample_count: t.sample_count,
            graph_hash: t.graph_hash,
        };
        let mut shell_nonempty = false;
        for i in 0..n {
            for j in 0..n {
                let d = dist[i * n + j];
                if d == r {
                    shell_nonempty = true;
                    sup_tau = sup_tau.max(t.get(i, j));
                }
                if d >= r {
                    c.values[i * n + j] = t.get(i, j);
                }
            }
        }
        if !shell_nonempty {
            break;
        }
        usable_shells += 1;
        sup_tau_by_shell.push((r, sup_tau));
        complement_norms.push((r, operator_norm(&c, q, tol)?.value));
    }
    if usable_shells < 4 {
        return Err(Error::Underpowered(format!(
            "only {usable_shells} usable shells (< 4); enlarge the window"
        )));
    }
    let fit_log = |series: &[(u32, f64)]| -> Result<LeastSquares> {
        let pts: Vec<(f64, f64)> = series
            .iter()
            .filter(|&&(_, v)| v > 0.0)
            .map(|&(r, v)| (r as f64, libm::log(v)))
            .collect();
        if pts.len() < 4 {
            return Err(Error::Underpowered("fewer than 4 positive shells in decay fit".into()));
        }
        fit::least_squares(&pts)
    };
    let xi_fit = fit_log(&sup_tau_by_shell)?;
    let eta_fit = fit_log(&complement_norms)?;
    let xi = -xi_fit.slope;
    let eta = -eta_fit.slope;
    let lower = 1.0 / (core::f64::consts::E * t_norm.value);
    let eta_lower_bound_ok = eta >= lower - 3.0 * eta_fit.slope_stderr;
    let explicit_curve_ok = complement_norms.iter().all(|&(r, v)| {
        v <= 2.0 * t_norm.value * libm::exp(-(r as f64) / (core::f64::consts::E * t_norm.value)) + tol
    });
    Ok(DecayReport {
        q,
        xi,
        xi_stderr: xi_fit.slope_stderr,
        eta,
        eta_stderr: eta_fit.slope_stderr,
        t_norm,
        complement_norms,
        sup_tau_by_shell,
        eta_lower_bound_ok,
        explicit_curve_ok,
    })
}

/// Support-interpolation inequality between two exponents:
/// |M|_{q2->q2} <= |M|_{q1->q1} (sup row support)^{(q2-q1)/(q1 q2)}.
#[derive(Clone, Debug)]
pub struct InterpolationReport {
    pub q1: f64,
    pub q2: f64,
    pub lhs: NormResult,
    pub rhs: f64,
    pub slack: f64,
}

pub fn norm_interpolation_check(
    m: &OperatorMatrix,
    q1: f64,
    q2: f64,
    tol: f64,
) -> Result<InterpolationReport> {
    if !(1.0 <= q1 && q1 < q2) {
        return Err(Error::InvalidParameter(format!("need 1 <= q1 < q2, got {q1}, {q2}")));
    }
    let n1 = operator_norm(m, q1, tol)?;
    let n2 = operator_norm(m, q2, tol)?;
    if !n1.converged || !n2.converged {
        return Err(Error::NonConvergence("norm iteration did not converge".into()));
    }
    let support = m.max_row_support() as f64;
    let exponent = if q2.is_infinite() {
        1.0 / q1
    } else {
        (q2 - q1) / (q1 * q2)
    };
    let rhs = n1.value * libm::pow(support, exponent);
    let slack = rhs - n2.value;
    Ok(InterpolationReport {
        q1,
        q2,
        lhs: n2,
        rhs,
        slack,
    })
}

/// Norm of T_p on a fixed tree window across a p grid, with the implied
/// lower estimate on the norm blow-up threshold:
/// p_{q->q} >= p + (1-p) / (|A|_q |T_p|_q), using |A|_q = degree on a
/// regular graph.
#[derive(Clone, Debug)]
pub struct NormVsP {
    pub p: f64,
    pub norm: NormResult,
    pub implied_pqq_lower: f64,
}

pub fn norm_vs_p_curve_tree(
    graph: &Graph,
    q: f64,
    p_grid: &[f64],
    window: &[u32],
    degree_norm: f64,
    tol: f64,
) -> Result<Vec<NormVsP>> {
    let mut out = Vec::new();
    for &p in p_grid {
        let t = tree_exact_matrix(graph, p, MatrixKind::TwoPoint, window)?;
        let norm = operator_norm(&t, q, tol)?;
        let implied = p + (1.0 - p) / (degree_norm * norm.value);
        out.push(NormVsP {
            p,
            norm,
            implied_pqq_lower: implied,
        });
    }
    Ok(out)
}

/// |T|_{q->q} across a q grid together with the (q-1)-scaled band.
#[derive(Clone, Debug)]
pub struct NormVsQ {
    pub series: Vec<(f64, NormResult)>,
    /// max/min of value*(q-1) across the grid.
    pub scaled_band_ratio: f64,
}

pub fn norm_vs_q_curve(t: &OperatorMatrix, q_grid: &[f64], tol: f64) -> Result<NormVsQ> {
    let mut series = Vec::new();
    let mut lo = f64::INFINITY;
    let mut hi = 0.0f64;
    for &q in q_grid {
        if q <= 1.0 {
            return Err(Error::InvalidParameter("q grid must stay strictly above 1".into()));
        }
        let norm = operator_norm(t, q, tol)?;
        if !norm.converged {
            return Err(Error::NonConvergence(format!("norm at q = {q} did not converge")));
        }
        let scaled = norm.value * (q - 1.0);
        lo = lo.min(scaled);
        hi = hi.max(scaled);
        series.push((q, norm));
    }
    Ok(NormVsQ {
        series,
        scaled_band_ratio: hi / lo,
    })
}

/// Monte Carlo E|K_v ∩ B(v,n)| for nested balls, the log|W| bound check and
/// the linear ball-specialization fit.
#[derive(Clone, Debug)]
pub struct LogBoundReport {
    /// (n, |B(v,n)|, E|K_v ∩ B(v,n)|).
    pub series: Vec<(u32, u64, f64)>,
    /// sup_n E|K ∩ B(n)| / log|B(n)|.
    pub log_constant: f64,
    /// sup_n E|K ∩ B(n)| / n.
    pub linear_constant: f64,
}

pub fn log_bound_check(
    graph: &Graph,
    p: f64,
    v: u32,
    n_max: u32,
    samples: u64,
    seed: u64,
) -> Result<LogBoundReport> {
    if n_max < 1 {
        return Err(Error::InvalidParameter("n_max must be >= 1".into()));
    }
    let ambient = graph.distances_from(v);
    let mut ball_sizes = vec![0u64; n_max as usize + 1];
    for &d in &ambient {
        if d != u32::MAX && d <= n_max {
            for b in ball_sizes.iter_mut().skip(d as usize) {
                *b += 1;
            }
        }
    }
    let mut sums = vec![0.0f64; n_max as usize + 1];
    let mut scratch = Scratch::new(graph.vertex_count());
    let params = ScanParams::default();
    let mut shell_counts = vec![0u64; n_max as usize + 1];
    for stream in 0..samples {
        let coins = EdgeCoins::new(seed, stream, p);
        for c in shell_counts.iter_mut() {
            *c = 0;
        }
        let mut depths: Vec<(u32, u32)> = Vec::new();
        perc::explore_cluster_depths(graph, |e| coins.open(e as u64), v, &params, &mut scratch, &mut depths);
        for &(u, _) in &depths {
            let d = ambient[u as usize];
            if d <= n_max {
                shell_counts[d as usize] += 1;
            }
        }
        let mut acc = 0u64;
        for (n, &c) in shell_counts.iter().enumerate() {
            acc += c;
            sums[n] += acc as f64;
        }
    }
    let mut series = Vec::new();
    let mut log_constant = 0.0f64;
    let mut linear_constant = 0.0f64;
    for n in 1..=n_max as usize {
        let mean = sums[n] / samples as f64;
        series.push((n as u32, ball_sizes[n], mean));
        if ball_sizes[n] >= 2 {
            log_constant = log_constant.max(mean / libm::log(ball_sizes[n] as f64));
        }
        linear_constant = linear_constant.max(mean / n as f64);
    }
    Ok(LogBoundReport {
        series,
        log_constant,
        linear_constant,
    })
}

/// Exponent fit helper re-exported for the experiment drivers.
pub fn fit_power_law(series: &[(u64, f64)], window: (u64, u64)) -> Result<ExponentFit> {
    fit::fit_exponent(series, window)
}

/// Closed form for the 2 -> 2 norm of T_p on the infinite k-regular tree:
/// (1/p - p) / (1/p + (k-1)p - 2 sqrt(k-1)), finite for p < 1/sqrt(k-1).
/// Finite windows converge to this limit from below.
pub fn tree_infinite_norm2(k: u32, p: f64) -> f64 {
    let lambda = 1.0 / p + (k - 1) as f64 * p;
    let edge = 2.0 * libm::sqrt((k - 1) as f64);
    if lambda <= edge {
        f64::INFINITY
    } else {
        (1.0 / p - p) / (lambda - edge)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::build_tree;
    use crate::matrix::{self, window_distances};

    fn ones(n: usize) -> OperatorMatrix {
        OperatorMatrix {
            kind: MatrixKind::TwoPoint,
            p: 0.5,
            window: (0..n as u32).collect(),
            values: vec![1.0; n * n],
            sample_count: 0,
            graph_hash: 0,
        }
    }

    fn identity(n: usize) -> OperatorMatrix {
        let mut m = ones(n);
        m.values = vec![0.0; n * n];
        for i in 0..n {
            m.values[i * n + i] = 1.0;
        }
        m
    }

    #[test]
    fn identity_norm_is_one_for_all_q() {
        let m = identity(7);
        for q in [1.0, 1.5, 2.0, 3.0, f64::INFINITY] {
            let r = operator_norm(&m, q, 1e-10).unwrap();
            assert!(r.converged);
            assert!((r.value - 1.0).abs() < 1e-8, "q = {q}: {}", r.value);
        }
    }

    #[test]
    fn all_ones_norm_is_n_for_all_q() {
        // Rank one: column sums, row sums and the 2-norm all equal n, and
        // interpolation is tight for every q (checked at 1.5 and 3).
        let n = 6;
        let m = ones(n);
        for q in [1.0, 1.5, 2.0, 3.0, f64::INFINITY] {
            let r = operator_norm(&m, q, 1e-10).unwrap();
            assert!((r.value - n as f64).abs() < 1e-6, "q = {q}: {}", r.value);
        }
    }

    #[test]
    fn norm_floor_and_ceiling_sanity() {
        let g = build_tree(3, 6).unwrap();
        let w = matrix::ball_window(&g, 0, 5);
        let t = tree_exact_matrix(&g, 0.4, MatrixKind::TwoPoint, &w).unwrap();
        let max_row = t.max_row_sum();
        let n = t.n() as f64;
        for q in [1.3, 2.0, 4.0] {
            let r = operator_norm(&t, q, 1e-9).unwrap();
            assert!(r.converged);
            let qp = q / (q - 1.0);
            let floor = max_row * libm::pow(n, -1.0 / qp);
            // Riesz-Thorin between 1 and inf collapses to the row sum.
            assert!(r.value >= floor - 1e-9, "q={q}: {} < {floor}", r.value);
            assert!(r.value <= max_row + 1e-9, "q={q}: {} > {max_row}", r.value);
        }
    }

    #[test]
    fn two_norm_matches_dense_eigensolver() {
        let g = build_tree(3, 7).unwrap();
        let w = matrix::ball_window(&g, 0, 6);
        let t = tree_exact_matrix(&g, 0.45, MatrixKind::TwoPoint, &w).unwrap();
        let r = operator_norm(&t, 2.0, 1e-10).unwrap();
        let n = t.n();
        let dm = nalgebra::DMatrix::from_fn(n, n, |i, j| t.get(i, j));
        let eig = dm.symmetric_eigenvalues();
        let lambda_max = eig.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        assert!(
            (r.value - lambda_max).abs() < 1e-6 * lambda_max,
            "power {} vs eig {lambda_max}",
            r.value
        );
    }

    #[test]
    fn window_norms_increase_to_tree_closed_form() {
        let g = build_tree(3, 9).unwrap();
        let p = 0.3;
        let limit = tree_infinite_norm2(3, p);
        let mut prev = 0.0;
        for radius in [2u32, 4, 6, 8] {
            let w = matrix::ball_window(&g, 0, radius);
            let t = tree_exact_matrix(&g, p, MatrixKind::TwoPoint, &w).unwrap();
            let r = operator_norm(&t, 2.0, 1e-10).unwrap();
            assert!(r.value >= prev - 1e-9, "monotone in window");
            assert!(r.value <= limit + 1e-9, "{} vs limit {limit}", r.value);
            prev = r.value;
        }
        assert!(prev > 0.8 * limit, "radius-8 window too far from {limit}: {prev}");
    }

    #[test]
    fn entrywise_domination_transfers_to_norms() {
        let g = build_tree(3, 6).unwrap();
        let w = matrix::ball_window(&g, 0, 5);
        let t = tree_exact_matrix(&g, 0.45, MatrixKind::TwoPoint, &w).unwrap();
        let c2 = tree_exact_matrix(&g, 0.45, MatrixKind::Complement(2), &w).unwrap();
        assert!(c2.dominated_by(&t, 0.0));
        for q in [1.0, 1.7, 2.0] {
            let nt = operator_norm(&t, q, 1e-9).unwrap().value;
            let nc = operator_norm(&c2, q, 1e-9).unwrap().value;
            assert!(nc <= nt + 1e-9, "q = {q}");
        }
    }

    #[test]
    fn triangle_examples() {
        let id = identity(5);
        let r = triangle_diagram(&id, 1e-10).unwrap();
        assert!((r.nabla - 1.0).abs() < 1e-12);
        assert!(r.bound_gap >= -1e-9);

        let g = build_tree(3, 6).unwrap();
        let w = matrix::ball_window(&g, 0, 4);
        let t = tree_exact_matrix(&g, 0.3, MatrixKind::TwoPoint, &w).unwrap();
        let r = triangle_diagram(&t, 1e-10).unwrap();
        assert!(r.nabla >= 1.0);
        assert!(r.bound_gap >= -1e-9, "gap {}", r.bound_gap);
    }

    #[test]
    fn decay_rates_on_tree() {
        // tau = p^d exactly, so xi = -log p on the nose.
        let g = build_tree(3, 10).unwrap();
        let p = 0.3;
        let w = matrix::ball_window(&g, 0, 8);
        let t = tree_exact_matrix(&g, p, MatrixKind::TwoPoint, &w).unwrap();
        let dist = window_distances(&g, &w);
        let rep = decay_rates(&t, &dist, 2.0, 8, 1e-9).unwrap();
        assert!((rep.xi + libm::log(p)).abs() < 1e-9, "xi = {}", rep.xi);
        assert!(rep.eta_lower_bound_ok);
        assert!(rep.explicit_curve_ok);
    }

    #[test]
    fn decay_rates_refuses_thin_windows() {
        let g = build_tree(3, 5).unwrap();
        let w = matrix::ball_window(&g, 0, 1);
        let t = tree_exact_matrix(&g, 0.3, MatrixKind::TwoPoint, &w).unwrap();
        let dist = window_distances(&g, &w);
        assert!(decay_rates(&t, &dist, 2.0, 8, 1e-9).is_err());
    }

    #[test]
    fn interpolation_check_examples() {
        let id = identity(4);
        let rep = norm_interpolation_check(&id, 1.0, 2.0, 1e-10).unwrap();
        assert!(rep.slack.abs() < 1e-8); // both sides 1, support 1

        let m = ones(5);
        let rep = norm_interpolation_check(&m, 1.0, 2.0, 1e-10).unwrap();
        // LHS n, RHS n * n^{1/2}.
        assert!((rep.rhs - 5.0 * libm::sqrt(5.0)).abs() < 1e-6);
        assert!(rep.slack >= 0.0);

        let g = build_tree(3, 6).unwrap();
        let w = matrix::ball_window(&g, 0, 5);
        let t = tree_exact_matrix(&g, 0.45, MatrixKind::TwoPoint, &w).unwrap();
        let rep = norm_interpolation_check(&t, 2.0, 4.0, 1e-9).unwrap();
        assert!(rep.slack >= -1e-9, "slack {}", rep.slack);
    }

    #[test]
    fn norm_vs_p_is_monotone_on_tree() {
        let g = build_tree(3, 8).unwrap();
        let w = matrix::ball_window(&g, 0, 6);
        let grid = [0.0, 0.1, 0.2, 0.3, 0.4, 0.45];
        let curve = norm_vs_p_curve_tree(&g, 2.0, &grid, &w, 3.0, 1e-9).unwrap();
        for pair in curve.windows(2) {
            assert!(pair[1].norm.value >= pair[0].norm.value - 1e-9);
        }
        // p = 0: identity, norm 1, implied threshold >= 1/deg.
        assert!((curve[0].norm.value - 1.0).abs() < 1e-9);
        assert!((curve[0].implied_pqq_lower - 1.0 / 3.0).abs() < 1e-9);
    }

    #[test]
    fn all_ones_scaled_band_is_wide() {
        // Negative control: value*(q-1) = n(q-1) spans the grid ratio.
        let m = ones(8);
        let grid = [1.1, 1.3, 1.6, 2.0];
        let curve = norm_vs_q_curve(&m, &grid, 1e-9).unwrap();
        assert!((curve.scaled_band_ratio - 10.0).abs() < 0.05, "{}", curve.scaled_band_ratio);
    }

    #[test]
    fn critical_tree_ball_and_sphere_norm_lower_bounds() {
        // At the tree's critical point the 1->1 norms obey
        // |S_int(n)| >= 1 and |B_int(n)| >= n+1; the realized row sums are
        // 1.5 and 1 + 1.5n, so the bounds hold with visible margin.
        let g = build_tree(3, 12).unwrap();
        let w = matrix::ball_window(&g, 0, 10);
        for n in 1..=6u32 {
            let s = tree_exact_matrix(&g, 0.5, MatrixKind::IntSphere(n), &w).unwrap();
            let b = tree_exact_matrix(&g, 0.5, MatrixKind::IntBall(n), &w).unwrap();
            let ns = operator_norm(&s, 1.0, 1e-10).unwrap().value;
            let nb = operator_norm(&b, 1.0, 1e-10).unwrap().value;
            assert!(ns >= 1.0 - 1e-12, "sphere n={n}: {ns}");
            assert!((ns - 1.5).abs() < 1e-9, "sphere n={n}: {ns}");
            assert!(nb >= (n + 1) as f64 - 1e-12, "ball n={n}: {nb}");
            assert!((nb - (1.0 + 1.5 * n as f64)).abs() < 1e-9, "ball n={n}: {nb}");
        }
    }

    #[test]
    fn log_bound_series_on_pair() {
        // W = {v, neighbor}: E|K ∩ W| = 1 + p exactly.
        let g = build_tree(3, 4).unwrap();
        let rep = log_bound_check(&g, 0.5, 0, 1, 40_000, 5).unwrap();
        let (_, size, mean) = rep.series[0];
        assert_eq!(size, 4); // B(root,1) on the 3-regular tree
        let want = 1.0 + 3.0 * 0.5; // root + 3 children each with prob p
        assert!((mean - want).abs() < 0.05, "mean {mean}");
    }

    #[test]
    fn log_bound_at_p_zero() {
        let g = build_tree(3, 4).unwrap();
        let rep = log_bound_check(&g, 0.0, 0, 3, 200, 5).unwrap();
        for &(_, _, mean) in &rep.series {
            assert_eq!(mean, 1.0);
        }
    }
}
