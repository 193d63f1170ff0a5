//! Estimates, confidence intervals and least-squares fits shared by the
//! experiment drivers.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Monte Carlo estimate with its standard error.
#[derive(Clone, Debug, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
    pub n: u64,
    pub method: String,
}

impl Estimate {
    /// Mean and stderr of an i.i.d. sample given sum and sum of squares.
    pub fn from_moments(sum: f64, sum_sq: f64, n: u64, method: &str) -> Estimate {
        let nf = n as f64;
        let mean = sum / nf;
        let var = if n > 1 {
            ((sum_sq - sum * sum / nf) / (nf - 1.0)).max(0.0)
        } else {
            0.0
        };
        Estimate {
            mean,
            stderr: libm::sqrt(var / nf),
            n,
            method: method.into(),
        }
    }

    /// Proportion estimate; the stderr is the Wilson-score half width at one
    /// sigma, which stays sane near 0 and 1.
    pub fn proportion(hits: u64, n: u64, method: &str) -> Estimate {
        let (lo, hi) = wilson_interval(hits, n, 1.0);
        Estimate {
            mean: hits as f64 / n as f64,
            stderr: (hi - lo) / 2.0,
            n,
            method: method.into(),
        }
    }
}

/// Wilson score interval for a binomial proportion at `z` standard normal
/// quantiles.
pub fn wilson_interval(hits: u64, n: u64, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let nf = n as f64;
    let phat = hits as f64 / nf;
    let z2 = z * z;
    let denom = 1.0 + z2 / nf;
    let center = (phat + z2 / (2.0 * nf)) / denom;
    let half = z * libm::sqrt(phat * (1.0 - phat) / nf + z2 / (4.0 * nf * nf)) / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// Ordinary least squares y = a + b x.
#[derive(Clone, Debug)]
pub struct LeastSquares {
    pub slope: f64,
    pub intercept: f64,
    pub slope_stderr: f64,
    pub r_squared: f64,
}

pub fn least_squares(points: &[(f64, f64)]) -> Result<LeastSquares> {
    let n = points.len();
    if n < 2 {
        return Err(Error::Underpowered(format!("least squares needs >= 2 points, got {n}")));
    }
    let nf = n as f64;
    let mean_x = points.iter().map(|p| p.0).sum::<f64>() / nf;
    let mean_y = points.iter().map(|p| p.1).sum::<f64>() / nf;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut syy = 0.0;
    for &(x, y) in points {
        sxx += (x - mean_x) * (x - mean_x);
        sxy += (x - mean_x) * (y - mean_y);
        syy += (y - mean_y) * (y - mean_y);
    }
    if sxx == 0.0 {
        return Err(Error::Underpowered("least squares: degenerate x values".into()));
    }
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    let ss_res = (syy - slope * sxy).max(0.0);
    let slope_stderr = if n > 2 {
        libm::sqrt(ss_res / (nf - 2.0) / sxx)
    } else {
        0.0
    };
    let r_squared = if syy > 0.0 { 1.0 - ss_res / syy } else { 1.0 };
    Ok(LeastSquares {
        slope,
        intercept,
        slope_stderr,
        r_squared,
    })
}

/// Power-law exponent fit: least squares of log P against log n over a
/// window, with every point required to be positive.
#[derive(Clone, Debug)]
pub struct ExponentFit {
    pub slope: f64,
    pub slope_stderr: f64,
    pub window: (u64, u64),
    pub r_squared: f64,
    /// The (n, value) series that entered the fit.
    pub series: Vec<(u64, f64)>,
}

pub fn fit_exponent(series: &[(u64, f64)], window: (u64, u64)) -> Result<ExponentFit> {
    let pts: Vec<(u64, f64)> = series
        .iter()
        .copied()
        .filter(|&(n, v)| n >= window.0 && n <= window.1 && v > 0.0)
        .collect();
    if pts.len() < 4 {
        return Err(Error::Underpowered(format!(
            "exponent fit window [{}, {}] has {} usable points (< 4)",
            window.0,
            window.1,
            pts.len()
        )));
    }
    let logged: Vec<(f64, f64)> = pts
        .iter()
        .map(|&(n, v)| (libm::log(n as f64), libm::log(v)))
        .collect();
    let ls = least_squares(&logged)?;
    Ok(ExponentFit {
        slope: ls.slope,
        slope_stderr: ls.slope_stderr,
        window,
        r_squared: ls.r_squared,
        series: pts,
    })
}

/// Geometric grid of integers in [lo, hi]: roughly `points_per_decade`
/// points per factor of ten, deduplicated, always containing lo and hi.
pub fn log_spaced(lo: u64, hi: u64, points_per_decade: u32) -> Vec<u64> {
    let mut out = Vec::new();
    let ratio = libm::pow(10.0, 1.0 / points_per_decade as f64);
    let mut x = lo as f64;
    while (x as u64) < hi {
        let n = x as u64;
        if out.last() != Some(&n) {
            out.push(n);
        }
        x *= ratio;
        if (x as u64) == *out.last().unwrap() {
            x = (*out.last().unwrap() + 1) as f64;
        }
    }
    if out.last() != Some(&hi) {
        out.push(hi);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn exact_line_recovered() {
        let pts: Vec<(f64, f64)> = (0..10).map(|i| (i as f64, 3.0 - 2.0 * i as f64)).collect();
        let ls = least_squares(&pts).unwrap();
        assert!((ls.slope + 2.0).abs() < 1e-12);
        assert!((ls.intercept - 3.0).abs() < 1e-12);
        assert!(ls.slope_stderr < 1e-12);
        assert!((ls.r_squared - 1.0).abs() < 1e-12);
    }

    #[test]
    fn power_law_recovered() {
        // P(n) = 4 n^{-1/2}
        let series: Vec<(u64, f64)> = (1..=64)
            .map(|n| (n as u64, 4.0 * libm::pow(n as f64, -0.5)))
            .collect();
        let f = fit_exponent(&series, (4, 64)).unwrap();
        assert!((f.slope + 0.5).abs() < 1e-9, "slope = {}", f.slope);
    }

    #[test]
    fn fit_refuses_thin_windows() {
        let series = vec![(1u64, 1.0), (2, 0.5), (3, 0.33)];
        assert!(fit_exponent(&series, (1, 3)).is_err());
        assert!(fit_exponent(&series, (1, 2)).is_err());
    }

    #[test]
    fn wilson_sane() {
        let (lo, hi) = wilson_interval(0, 100, 3.0);
        assert_eq!(lo, 0.0);
        assert!(hi > 0.0 && hi < 0.15);
        let (lo, hi) = wilson_interval(50, 100, 1.0);
        assert!(lo < 0.5 && hi > 0.5);
        assert!((hi - lo) < 0.12);
    }

    #[test]
    fn log_grid_contains_endpoints() {
        let g = log_spaced(8, 256, 5);
        assert_eq!(*g.first().unwrap(), 8);
        assert_eq!(*g.last().unwrap(), 256);
        assert!(g.windows(2).all(|w| w[0] < w[1]));
    }
}
