//! Frequency grids.

use crate::error::{Error, Result};

/// `points` logarithmically spaced values from `lo` to `hi`, both inclusive.
///
/// The endpoints are returned exactly, not as `exp(ln(lo))`.
pub fn log_space(lo: f64, hi: f64, points: usize) -> Result<Vec<f64>> {
    if !(lo.is_finite() && hi.is_finite() && lo > 0.0) {
        return Err(Error::InvalidGrid(format!(
            "bounds must be finite and > 0, got [{lo}, {hi}]"
        )));
    }
    if points == 1 {
        return if lo == hi {
            Ok(vec![lo])
        } else {
            Err(Error::InvalidGrid("a single point needs lo == hi".into()))
        };
    }
    if points < 2 || lo >= hi {
        return Err(Error::InvalidGrid(format!(
            "need lo < hi and at least 2 points, got [{lo}, {hi}] with {points} points"
        )));
    }
    let (a, b) = (lo.ln(), hi.ln());
    let step = (b - a) / (points - 1) as f64;
    let mut out: Vec<f64> = (0..points).map(|i| (a + step * i as f64).exp()).collect();
    out[0] = lo;
    out[points - 1] = hi;
    Ok(out)
}

/// Non-empty, finite, positive and strictly increasing.
pub fn validate_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::InvalidGrid("empty frequency grid".into()));
    }
    if let Some(bad) = grid.iter().find(|f| !(f.is_finite() && **f > 0.0)) {
        return Err(Error::InvalidGrid(format!(
            "frequency {bad} is not finite and positive"
        )));
    }
    if let Some(i) = grid.windows(2).position(|w| w[1] <= w[0]) {
        return Err(Error::InvalidGrid(format!(
            "frequencies must be strictly increasing ({} then {})",
            grid[i],
            grid[i + 1]
        )));
    }
    Ok(())
}

/// Trapezoidal integral of `y(x)` over the given abscissae.
pub fn trapezoid(x: &[f64], y: &[f64]) -> f64 {
    debug_assert_eq!(x.len(), y.len());
    x.windows(2)
        .zip(y.windows(2))
        .map(|(xs, ys)| 0.5 * (xs[1] - xs[0]) * (ys[0] + ys[1]))
        .sum()
}
