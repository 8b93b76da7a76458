//! Small numerical helpers shared by the physics modules: sample-grid checks,
//! linear interpolation and composite trapezoid rules.

use crate::{Error, Result, C64};

/// `n` evenly spaced points from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let step = (hi - lo) / (n - 1) as f64;
            (0..n).map(|i| lo + step * i as f64).collect()
        }
    }
}

pub fn check_increasing(name: &str, grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::Domain(format!("{name} is empty")));
    }
    if let Some(bad) = grid.iter().find(|w| !w.is_finite()) {
        return Err(Error::Domain(format!("{name} contains non-finite sample {bad}")));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Domain(format!("{name} must be strictly increasing")));
    }
    Ok(())
}

/// Index `i` such that `grid[i] <= x <= grid[i + 1]`, or `None` outside.
pub fn bracket(grid: &[f64], x: f64) -> Option<usize> {
    let n = grid.len();
    if n < 2 || !(x >= grid[0] && x <= grid[n - 1]) {
        return None;
    }
    let i = grid.partition_point(|&g| g <= x);
    Some(i.saturating_sub(1).min(n - 2))
}

/// Linear interpolation of complex samples, real and imaginary parts separately.
pub fn interp_complex(grid: &[f64], values: &[C64], x: f64) -> Result<C64> {
    if grid.len() == 1 && x == grid[0] {
        return Ok(values[0]);
    }
    let i = bracket(grid, x).ok_or_else(|| {
        Error::Range(format!(
            "frequency {x} outside sampled range [{}, {}]",
            grid.first().copied().unwrap_or(f64::NAN),
            grid.last().copied().unwrap_or(f64::NAN)
        ))
    })?;
    let s = (x - grid[i]) / (grid[i + 1] - grid[i]);
    Ok(values[i] * (1.0 - s) + values[i + 1] * s)
}

pub fn interp_real(grid: &[f64], values: &[f64], x: f64) -> Option<f64> {
    let i = bracket(grid, x)?;
    let s = (x - grid[i]) / (grid[i + 1] - grid[i]);
    Some(values[i] * (1.0 - s) + values[i + 1] * s)
}

/// Composite trapezoid rule over arbitrary (increasing) abscissae.
pub fn trapezoid(x: &[f64], y: &[f64]) -> f64 {
    x.windows(2)
        .zip(y.windows(2))
        .map(|(xw, yw)| 0.5 * (xw[1] - xw[0]) * (yw[0] + yw[1]))
        .sum()
}

pub fn trapezoid_complex(x: &[f64], y: &[C64]) -> C64 {
    x.windows(2)
        .zip(y.windows(2))
        .map(|(xw, yw)| (yw[0] + yw[1]) * (0.5 * (xw[1] - xw[0])))
        .sum()
}

/// Trapezoid weights for the given abscissae (`Σ wᵢ f(xᵢ)` equals the rule).
pub fn trapezoid_weights(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut w = vec![0.0; n];
    for i in 0..n.saturating_sub(1) {
        let h = 0.5 * (x[i + 1] - x[i]);
        w[i] += h;
        w[i + 1] += h;
    }
    w
}

/// Abscissae of `grid` restricted to `[lo, hi]`, with the interval ends
/// inserted so that a trapezoid rule covers exactly that interval.
pub fn clipped_abscissae(grid: &[f64], lo: f64, hi: f64) -> Result<Vec<f64>> {
    let (first, last) = match (grid.first(), grid.last()) {
        (Some(&f), Some(&l)) => (f, l),
        _ => return Err(Error::Range("empty grid".into())),
    };
    if lo < first || hi > last || lo >= hi {
        return Err(Error::Range(format!(
            "interval [{lo}, {hi}] not inside grid range [{first}, {last}]"
        )));
    }
    let mut xs = Vec::with_capacity(grid.len());
    xs.push(lo);
    xs.extend(grid.iter().copied().filter(|&w| w > lo && w < hi));
    xs.push(hi);
    Ok(xs)
}
