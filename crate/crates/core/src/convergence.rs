//! Empirical convergence-rate measurement.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Least-squares slope of `log(error)` against `log(t)`.
///
/// Needs at least 10 points spanning at least two decades of `t`, all with
/// positive finite errors. An `O(1/t)` trace has slope `-1`.
pub fn convergence_slope(trace: &[(u64, f64)]) -> Result<f64> {
    if trace.len() < 10 {
        return Err(Error::input(format!(
            "convergence slope needs at least 10 points, got {}",
            trace.len()
        )));
    }
    if let Some(&(t, e)) = trace.iter().find(|(t, e)| *t == 0 || !(*e > 0.0) || !e.is_finite()) {
        return Err(Error::input(format!(
            "trace point (t={t}, error={e}) needs t >= 1 and a positive finite error"
        )));
    }
    let lo = trace.iter().map(|p| p.0).min().unwrap_or(1) as f64;
    let hi = trace.iter().map(|p| p.0).max().unwrap_or(1) as f64;
    if hi / lo < 100.0 {
        return Err(Error::input(format!(
            "trace spans t in [{lo}, {hi}], less than two decades"
        )));
    }
    let pts: Vec<(f64, f64)> = trace
        .iter()
        .map(|&(t, e)| (libm::log(t as f64), libm::log(e)))
        .collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    Ok(sxy / sxx)
}

/// `count` distinct, roughly log-spaced integers in `[lo, hi]`, both ends
/// included.
pub fn log_spaced(lo: u64, hi: u64, count: usize) -> Vec<u64> {
    let lo = lo.max(1);
    if count < 2 || hi <= lo {
        return alloc::vec![lo.max(hi)];
    }
    let (a, b) = (libm::log(lo as f64), libm::log(hi as f64));
    let mut out: Vec<u64> = (0..count)
        .map(|k| libm::round(libm::exp(a + (b - a) * k as f64 / (count - 1) as f64)) as u64)
        .collect();
    out[0] = lo;
    out[count - 1] = hi;
    out.dedup();
    out
}

/// Powers of two up to and including `max` (and `max` itself).
pub fn power_of_two_checkpoints(max: u64) -> Vec<u64> {
    let mut out = Vec::new();
    let mut t = 1u64;
    while t < max {
        out.push(t);
        t *= 2;
    }
    out.push(max);
    out
}
