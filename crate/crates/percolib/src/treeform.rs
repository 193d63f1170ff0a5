//! Closed forms and level recursions on the infinite k-regular tree:
//! susceptibility, survival, magnetization, intrinsic sphere/ball means and
//! finite-horizon reach probabilities. These are the exact references the
//! Monte Carlo estimators are tested against.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

const FIXED_POINT_TOL: f64 = 1e-12;
const FIXED_POINT_CAP: usize = 1_000_000;

#[derive(Clone, Debug)]
pub struct TreeRecursion {
    pub k: u32,
    pub p: f64,
    pub h: f64,
    /// E|K_root| = 1 + kp/(1-(k-1)p) below criticality, infinite above.
    pub chi: f64,
    /// Survival probability of a single forward branch subtree.
    pub theta_branch: f64,
    /// P(|K_root| = infinity).
    pub theta_root: f64,
    /// M_{p,h}(root) from the branch fixed point.
    pub magnetization: f64,
    /// E|∂B_int(root,n)| = k(k-1)^{n-1} p^n for n >= 1 (index 0 is 1).
    pub root_sphere: Vec<f64>,
    /// E|B_int(root,n)|: prefix sums of root_sphere.
    pub root_ball: Vec<f64>,
    /// Forward ensemble, (k-1)-ary from the start vertex:
    /// E|∂B_int(n)| = ((k-1)p)^n. Equals 1 for every n at p = 1/(k-1).
    pub branch_sphere: Vec<f64>,
    /// Prefix sums; equals n+1 at criticality.
    pub branch_ball: Vec<f64>,
    /// reach[m] = P(the forward subtree of a branch apex reaches depth m
    /// below the apex); reach[0] = 1, limit theta_branch.
    pub reach: Vec<f64>,
}

pub fn tree_recursion(k: u32, p: f64, h: f64, n_max: u32) -> Result<TreeRecursion> {
    if k < 3 {
        return Err(Error::InvalidParameter(format!("tree degree k = {k} < 3")));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidParameter(format!("p = {p} outside [0,1]")));
    }
    if h < 0.0 {
        return Err(Error::InvalidParameter(format!("h = {h} must be >= 0")));
    }
    let kf = k as f64;
    let branching = (k - 1) as f64 * p;
    let chi = if branching < 1.0 {
        1.0 + kf * p / (1.0 - branching)
    } else {
        f64::INFINITY
    };

    let theta_branch = branch_survival(k, p);
    let theta_root = 1.0 - libm::pow(1.0 - p * theta_branch, kf);

    // Branch magnetization fixed point mu = 1 - e^{-h}(1 - p mu)^{k-1},
    // iterated from the depth-0 truncation 1 - e^{-h}; the iterates increase
    // to the physical solution.
    let eh = libm::exp(-h);
    let mut mu = 1.0 - eh;
    for _ in 0..FIXED_POINT_CAP {
        let next = 1.0 - eh * libm::pow(1.0 - p * mu, kf - 1.0);
        let done = (next - mu).abs() < FIXED_POINT_TOL;
        mu = next;
        if done {
            break;
        }
    }
    let magnetization = 1.0 - eh * libm::pow(1.0 - p * mu, kf);

    let n = n_max as usize;
    let mut root_sphere = vec![1.0; n + 1];
    let mut branch_sphere = vec![1.0; n + 1];
    for m in 1..=n {
        root_sphere[m] = kf * libm::pow(kf - 1.0, m as f64 - 1.0) * libm::pow(p, m as f64);
        branch_sphere[m] = libm::pow(branching, m as f64);
    }
    let prefix = |s: &[f64]| -> Vec<f64> {
        let mut acc = 0.0;
        s.iter()
            .map(|x| {
                acc += x;
                acc
            })
            .collect()
    };
    let root_ball = prefix(&root_sphere);
    let branch_ball = prefix(&branch_sphere);

    let mut reach = vec![1.0; n + 1];
    for m in 1..=n {
        reach[m] = 1.0 - libm::pow(1.0 - p * reach[m - 1], kf - 1.0);
    }

    Ok(TreeRecursion {
        k,
        p,
        h,
        chi,
        theta_branch,
        theta_root,
        magnetization,
        root_sphere,
        root_ball,
        branch_sphere,
        branch_ball,
        reach,
    })
}

/// Largest fixed point of theta = 1 - (1 - p theta)^{k-1}. Survival is
/// exactly zero when the mean offspring (k-1)p is at most one; the iteration
/// only runs on the supercritical side, where convergence is geometric.
pub fn branch_survival(k: u32, p: f64) -> f64 {
    if (k - 1) as f64 * p <= 1.0 {
        return 0.0;
    }
    let mut theta = 1.0f64;
    for _ in 0..FIXED_POINT_CAP {
        let next = 1.0 - libm::pow(1.0 - p * theta, (k - 1) as f64);
        if (theta - next).abs() < FIXED_POINT_TOL {
            return next;
        }
        theta = next;
    }
    theta
}

/// Finite-horizon reach of one branch: P(an open path runs from v through a
/// fixed incident edge to depth `horizon` below v).
pub fn branch_reach(k: u32, p: f64, horizon: u32) -> f64 {
    if horizon == 0 {
        return 1.0;
    }
    let mut r = 1.0f64;
    for _ in 1..horizon {
        r = 1.0 - libm::pow(1.0 - p * r, (k - 1) as f64);
    }
    p * r
}

/// P(exactly j of the k root branches reach depth >= horizon).
pub fn furcation_exactly(k: u32, p: f64, horizon: u32, j: u32) -> f64 {
    let b = branch_reach(k, p, horizon);
    binomial(k, j) * libm::pow(b, j as f64) * libm::pow(1.0 - b, (k - j) as f64)
}

/// Infinite-horizon limit of the exactly-three event given the branch
/// survival probability theta: C(k,3) (p theta)^3 (1 - p theta)^{k-3}.
pub fn furcation_limit(k: u32, p: f64, theta_branch: f64) -> f64 {
    let b = p * theta_branch;
    binomial(k, 3) * libm::pow(b, 3.0) * libm::pow(1.0 - b, (k - 3) as f64)
}

/// P(the root cluster reaches intrinsic depth >= n); exact on the infinite
/// tree.
pub fn root_reach(k: u32, p: f64, n: u32) -> f64 {
    if n == 0 {
        return 1.0;
    }
    let mut r = 1.0f64;
    for _ in 1..n {
        r = 1.0 - libm::pow(1.0 - p * r, (k - 1) as f64);
    }
    1.0 - libm::pow(1.0 - p * r, k as f64)
}

/// Exact tail P(|K_root| >= n) for n = 0..=n_max via the branch volume
/// generating function B(z) = z(1-p+pB(z))^{k-1} and the root composition
/// R(z) = z(1-p+pB(z))^k. Coefficient j of B is exact after j fixed-point
/// rounds of the truncated iteration.
pub fn root_volume_tail(k: u32, p: f64, n_max: u32) -> Vec<f64> {
    let n = n_max as usize;
    let q = 1.0 - p;
    let mut b = vec![0.0f64; n + 1];
    for _ in 0..=n {
        let mut base = vec![0.0f64; n + 1];
        base[0] = q;
        for j in 1..=n {
            base[j] = p * b[j];
        }
        let f = poly_pow(&base, k - 1, n);
        for j in (1..=n).rev() {
            b[j] = f[j - 1];
        }
        b[0] = 0.0;
    }
    let mut base = vec![0.0f64; n + 1];
    base[0] = q;
    for j in 1..=n {
        base[j] = p * b[j];
    }
    // P(|K_root| = j) = froot[j - 1].
    let froot = poly_pow(&base, k, n);
    let mut tail = vec![0.0f64; n + 1];
    let mut below = 0.0f64;
    for j in 0..=n {
        tail[j] = (1.0 - below).max(0.0);
        below += if j == 0 { 0.0 } else { froot[j - 1] };
    }
    tail
}

fn poly_mul(a: &[f64], b: &[f64], n: usize) -> Vec<f64> {
    let mut out = vec![0.0f64; n + 1];
    for i in 0..=n {
        if a[i] == 0.0 {
            continue;
        }
        for j in 0..=n - i {
            out[i + j] += a[i] * b[j];
        }
    }
    out
}

fn poly_pow(base: &[f64], e: u32, n: usize) -> Vec<f64> {
    let mut out = vec![0.0f64; n + 1];
    out[0] = 1.0;
    for _ in 0..e {
        out = poly_mul(&out, base, n);
    }
    out
}

fn binomial(n: u32, j: u32) -> f64 {
    if j > n {
        return 0.0;
    }
    let mut out = 1.0f64;
    for i in 0..j {
        out *= (n - i) as f64 / (i + 1) as f64;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chi_closed_form() {
        // k = 3, p = 0.3: chi = 1 + 0.9/0.4 = 3.25.
        let r = tree_recursion(3, 0.3, 0.1, 4).unwrap();
        assert!((r.chi - 3.25).abs() < 1e-12);
        let r = tree_recursion(3, 0.5, 0.1, 4).unwrap();
        assert!(r.chi.is_infinite());
    }

    #[test]
    fn chi_divergence_rate() {
        // chi(p) * (1/(k-1) - p) tends to k p_c / (k-1) = 0.75 for k = 3.
        for eps in [1e-3, 1e-4, 1e-5] {
            let p = 0.5 - eps;
            let r = tree_recursion(3, p, 0.1, 1).unwrap();
            let scaled = r.chi * (0.5 - p);
            assert!((scaled - 0.75).abs() < 0.01, "eps {eps}: {scaled}");
        }
    }

    #[test]
    fn survival_closed_form() {
        // k = 3: theta_b = (2p-1)/p^2 above 1/2.
        for p in [0.55, 0.6, 0.7, 0.9] {
            let got = branch_survival(3, p);
            let want = (2.0 * p - 1.0) / (p * p);
            assert!((got - want).abs() < 1e-9, "p = {p}: {got} vs {want}");
        }
        assert_eq!(branch_survival(3, 0.5), 0.0);
        assert_eq!(branch_survival(3, 0.3), 0.0);
    }

    #[test]
    fn magnetization_limits() {
        let r = tree_recursion(3, 0.4, 0.0, 1).unwrap();
        assert!(r.magnetization.abs() < 1e-9);
        let h = 0.37;
        let r = tree_recursion(3, 0.0, h, 1).unwrap();
        assert!((r.magnetization - (1.0 - libm::exp(-h))).abs() < 1e-12);
        let r = tree_recursion(3, 0.5, 60.0, 1).unwrap();
        assert!(r.magnetization > 0.999999);
    }

    #[test]
    fn critical_sequences() {
        let r = tree_recursion(3, 0.5, 0.1, 10).unwrap();
        for n in 1..=10usize {
            assert!((r.root_sphere[n] - 1.5).abs() < 1e-12);
            assert!((r.branch_sphere[n] - 1.0).abs() < 1e-12);
            assert!((r.branch_ball[n] - (n as f64 + 1.0)).abs() < 1e-12);
        }
        assert!((r.root_ball[10] - 16.0).abs() < 1e-12);
    }

    #[test]
    fn reach_decreases_to_theta() {
        let r = tree_recursion(3, 0.6, 0.1, 200).unwrap();
        for w in r.reach.windows(2) {
            assert!(w[1] <= w[0] + 1e-15);
        }
        assert!((r.reach[200] - r.theta_branch).abs() < 1e-6);
    }

    #[test]
    fn volume_tail_small_cases() {
        // P(|K| >= 1) = 1; P(|K| >= 2) = 1 - (1-p)^3 for k = 3.
        let p = 0.4;
        let tail = root_volume_tail(3, p, 8);
        assert!((tail[0] - 1.0).abs() < 1e-12);
        assert!((tail[1] - 1.0).abs() < 1e-12);
        let isolated = libm::pow(1.0 - p, 3.0);
        assert!((tail[2] - (1.0 - isolated)).abs() < 1e-12);
    }

    #[test]
    fn volume_tail_matches_mean() {
        // Sum of the tail over n >= 1 equals E|K| = chi when subcritical.
        let p = 0.3;
        let tail = root_volume_tail(3, p, 400);
        let mean: f64 = tail[1..].iter().sum();
        let r = tree_recursion(3, p, 0.1, 1).unwrap();
        assert!((mean - r.chi).abs() < 1e-6, "mean {mean} chi {}", r.chi);
    }

    #[test]
    fn critical_volume_tail_scales_like_inverse_sqrt() {
        let tail = root_volume_tail(3, 0.5, 512);
        let a = (128.0f64).sqrt() * tail[128];
        let b = (512.0f64).sqrt() * tail[512];
        assert!((a / b - 1.0).abs() < 0.05, "a {a} b {b}");
    }

    #[test]
    fn furcation_probability_at_horizon() {
        let b = branch_reach(3, 0.6, 8);
        let got = furcation_exactly(3, 0.6, 8, 3);
        assert!((got - b * b * b).abs() < 1e-12);
        let total: f64 = (0..=3).map(|j| furcation_exactly(3, 0.6, 8, j)).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn root_reach_limits() {
        // n = 1: some incident edge open.
        let p = 0.45;
        let want = 1.0 - libm::pow(1.0 - p, 3.0);
        assert!((root_reach(3, p, 1) - want).abs() < 1e-12);
        // Critical decay ~ c/n.
        let ratio = root_reach(3, 0.5, 64) / root_reach(3, 0.5, 256);
        assert!((ratio - 4.0).abs() < 0.4, "ratio {ratio}");
    }
}
