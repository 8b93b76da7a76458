//! Resonance extraction from a sampled response function.
//!
//! A resonance `m` is described by the Lorentzian
//!
//! ```text
//! T_m(ω) = sqrt(c/2L_N) · sqrt(κ_m) / ((ω - ω_m) + iκ_m/2)
//! ```
//!
//! whose height fixes `L_N` through `|T(ω_m)|² = 2c/(κ_m L_N)`. The resonance
//! comb `ω_m = mπc/ℓ_eff` defines the effective length and
//! `|r_m| = exp(-κ_m ℓ_eff/c)` the effective reflectivity.

use log::warn;
use serde::{Deserialize, Serialize};

use crate::quadrature::{clipped_abscissae, interp_complex, linspace, trapezoid};
use crate::stack::{response, slab_optics, ResponseTable, SlabOptics, StackSpec};
use crate::{Error, Result, C, C64};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResonanceFit {
    pub omega_m: f64,
    pub kappa_m: f64,
    #[serde(rename = "L_N")]
    pub l_n: f64,
    pub ell_eff: f64,
    pub mode_index: u32,
    pub r_eff: f64,
    pub overlap_error: f64,
}

impl ResonanceFit {
    /// Assemble a fit from the three Lorentzian parameters and a mode index.
    /// The overlap error is left at zero until measured against a table.
    pub fn from_parameters(omega_m: f64, kappa_m: f64, l_n: f64, mode_index: u32) -> Result<Self> {
        if !(kappa_m > 0.0 && kappa_m.is_finite()) {
            return Err(Error::Fit(format!("non-positive linewidth {kappa_m}")));
        }
        if !(l_n > 0.0 && l_n.is_finite()) {
            return Err(Error::Fit(format!("non-positive amplification length {l_n}")));
        }
        if !(omega_m > 0.0) || mode_index == 0 {
            return Err(Error::Fit(format!(
                "resonance at omega = {omega_m} has no positive mode index"
            )));
        }
        let ell_eff = mode_index as f64 * std::f64::consts::PI * C / omega_m;
        Ok(ResonanceFit {
            omega_m,
            kappa_m,
            l_n,
            ell_eff,
            mode_index,
            r_eff: (-kappa_m * ell_eff / C).exp(),
            overlap_error: 0.0,
        })
    }

    /// Lorentzian term `T_m(ω)`.
    pub fn lorentzian(&self, omega: f64) -> C64 {
        let amp = (C * self.kappa_m / (2.0 * self.l_n)).sqrt();
        amp / C64::new(omega - self.omega_m, 0.5 * self.kappa_m)
    }

    /// `|T_m(ω_m)|² = 2c/(κ_m L_N)`.
    pub fn peak_height(&self) -> f64 {
        2.0 * C / (self.kappa_m * self.l_n)
    }

    pub fn validity(&self, x_a: f64, ell_c: f64) -> Validity {
        Validity {
            kappa_ell_eff: self.kappa_m * self.ell_eff / C,
            kappa_emitter_distance: self.kappa_m * (x_a.abs() + ell_c) / C,
        }
    }
}

/// Dimensionless products that must be small for the inside-outside
/// description with a single retained mode to hold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Validity {
    /// `κ_m ℓ_eff/c`.
    pub kappa_ell_eff: f64,
    /// `κ_m (|x_A| + ℓ_c)/c`.
    pub kappa_emitter_distance: f64,
}

impl Validity {
    /// Loose reading of "≪ 1": both products below 0.1.
    pub fn holds(&self) -> bool {
        self.kappa_ell_eff < 0.1 && self.kappa_emitter_distance < 0.1
    }
}

fn vertex(x: [f64; 3], y: [f64; 3]) -> Option<(f64, f64)> {
    // Parabola through three points, returned as (abscissa, value) of its vertex.
    let d01 = (y[1] - y[0]) / (x[1] - x[0]);
    let d12 = (y[2] - y[1]) / (x[2] - x[1]);
    let curv = (d12 - d01) / (x[2] - x[0]);
    if curv == 0.0 || !curv.is_finite() {
        return None;
    }
    let slope0 = d01 - curv * (x[1] - x[0]);
    let xv = x[0] - slope0 / (2.0 * curv);
    let yv = y[0] + slope0 * (xv - x[0]) + curv * (xv - x[0]) * (xv - x[0]);
    Some((xv, yv))
}

/// Local maxima of `|T|²` inside `window`, ascending, each refined by a
/// parabola through `log|T|²` at the discrete maximum and its neighbours.
pub fn find_peaks(table: &ResponseTable, window: (f64, f64)) -> Result<Vec<f64>> {
    let (lo, hi) = window;
    let (g0, g1) = table.range();
    if !(lo >= g0 && hi <= g1 && lo < hi) {
        return Err(Error::Range(format!(
            "window [{lo}, {hi}] not inside table range [{g0}, {g1}]"
        )));
    }
    let p = table.abs2();
    let top = p.iter().cloned().fold(0.0, f64::max);
    let bottom = p.iter().cloned().fold(f64::INFINITY, f64::min);
    // A response flat to round-off (empty stack) has no resonances.
    if top - bottom <= 1e-9 * top {
        return Ok(Vec::new());
    }
    let g = &table.grid;
    let mut peaks = Vec::new();
    for i in 1..p.len().saturating_sub(1) {
        if !(p[i] > p[i - 1] && p[i] >= p[i + 1]) || g[i] < lo || g[i] > hi {
            continue;
        }
        let x = [g[i - 1], g[i], g[i + 1]];
        let y = [p[i - 1].ln(), p[i].ln(), p[i + 1].ln()];
        let w = match vertex(x, y) {
            Some((xv, _)) if xv > x[0] && xv < x[2] => xv,
            _ => g[i],
        };
        peaks.push(w);
    }
    Ok(peaks)
}

/// Mode index of a resonance: the number of field antinodes between the
/// perfect mirror and the stack, `round(ω_m ℓ_c/πc)`.
pub fn antinode_count(omega_m: f64, ell_c: f64) -> u32 {
    (omega_m * ell_c / (std::f64::consts::PI * C)).round().max(0.0) as u32
}

/// Half-maximum crossing between samples `j` and `j + 1`, from a quadratic
/// through three samples of `1/|T|²` (exact for a Lorentzian).
fn half_max_crossing(g: &[f64], inv: &[f64], j: usize, level: f64) -> f64 {
    let n = g.len();
    let k = if j + 2 < n { j } else { j.saturating_sub(1) };
    if k + 2 < n {
        let (x0, x1, x2) = (g[k], g[k + 1], g[k + 2]);
        let (y0, y1, y2) = (inv[k], inv[k + 1], inv[k + 2]);
        let d01 = (y1 - y0) / (x1 - x0);
        let d12 = (y2 - y1) / (x2 - x1);
        let a = (d12 - d01) / (x2 - x0);
        let b = d01 - a * (x0 + x1);
        let c = y0 - a * x0 * x0 - b * x0;
        let (lo, hi) = (g[j], g[j + 1]);
        let candidates: Vec<f64> = if a.abs() > 0.0 {
            let disc = b * b - 4.0 * a * (c - level);
            if disc >= 0.0 {
                let s = disc.sqrt();
                vec![(-b + s) / (2.0 * a), (-b - s) / (2.0 * a)]
            } else {
                Vec::new()
            }
        } else {
            vec![(level - c) / b]
        };
        let slack = 1e-9 * (hi - lo);
        if let Some(x) = candidates.into_iter().find(|x| *x >= lo - slack && *x <= hi + slack) {
            return x.clamp(lo, hi);
        }
    }
    let s = (level - inv[j]) / (inv[j + 1] - inv[j]);
    g[j] + s * (g[j + 1] - g[j])
}

/// Fit the resonance whose maximum lies near `peak`.
pub fn fit_resonance(table: &ResponseTable, peak: f64) -> Result<ResonanceFit> {
    let g = &table.grid;
    let p = table.abs2();
    let n = g.len();
    if n < 3 {
        return Err(Error::Range("table too short to fit a resonance".into()));
    }
    let mut i = g.partition_point(|&w| w < peak).min(n - 1);
    if i > 0 && (peak - g[i - 1]).abs() < (g[i] - peak).abs() {
        i -= 1;
    }
    while i + 1 < n && p[i + 1] > p[i] {
        i += 1;
    }
    while i > 0 && p[i - 1] > p[i] {
        i -= 1;
    }
    if i == 0 || i == n - 1 {
        return Err(Error::Range(format!("maximum near {peak} sits on the table edge")));
    }
    let inv: Vec<f64> = p.iter().map(|v| 1.0 / v).collect();
    let (omega_m, height) = match vertex([g[i - 1], g[i], g[i + 1]], [inv[i - 1], inv[i], inv[i + 1]]) {
        Some((xv, yv)) if xv > g[i - 1] && xv < g[i + 1] && yv > 0.0 => (xv, 1.0 / yv),
        _ => (g[i], p[i]),
    };
    let half = 0.5 * height;
    let left = (0..i).rev().find(|&j| p[j] < half).ok_or_else(|| {
        Error::Range(format!("left half-maximum of the peak at {omega_m} not inside the table"))
    })?;
    let right = (i + 1..n).find(|&j| p[j] < half).ok_or_else(|| {
        Error::Range(format!("right half-maximum of the peak at {omega_m} not inside the table"))
    })?;
    let w_left = half_max_crossing(g, &inv, left, 1.0 / half);
    let w_right = half_max_crossing(g, &inv, right - 1, 1.0 / half);
    let kappa = w_right - w_left;
    let l_n = 2.0 * C / (kappa * height);
    let mode_index = match &table.spec {
        Some(spec) => antinode_count(omega_m, spec.ell_c),
        // Without a geometry, count the resonances the table itself shows.
        None => find_peaks(table, (g[0], omega_m))?.len().max(1) as u32,
    };
    let mut fit = ResonanceFit::from_parameters(omega_m, kappa, l_n, mode_index)?;
    fit.overlap_error = overlap_error(table, &fit)?;
    Ok(fit)
}

/// Deviation of `|∫T T_m* dω / ∫|T|² dω|` from one over `ω_m ± κ_m/2`,
/// trapezoid rule on the table grid with the interval ends interpolated.
///
/// The ratio can exceed one when the Lorentzian overshoots the exact
/// response inside the window (short cavities), so the magnitude of the
/// deviation is returned.
pub fn overlap_error(table: &ResponseTable, fit: &ResonanceFit) -> Result<f64> {
    let lo = fit.omega_m - 0.5 * fit.kappa_m;
    let hi = fit.omega_m + 0.5 * fit.kappa_m;
    let xs = clipped_abscissae(&table.grid, lo, hi)?;
    let mut cross_re = Vec::with_capacity(xs.len());
    let mut cross_im = Vec::with_capacity(xs.len());
    let mut power = Vec::with_capacity(xs.len());
    for &w in &xs {
        let t = interp_complex(&table.grid, &table.values, w)?;
        let c = t * fit.lorentzian(w).conj();
        cross_re.push(c.re);
        cross_im.push(c.im);
        power.push(t.norm_sqr());
    }
    let cross = C64::new(trapezoid(&xs, &cross_re), trapezoid(&xs, &cross_im));
    Ok((1.0 - cross.norm() / trapezoid(&xs, &power)).abs())
}

/// Least-squares linewidth over `ω_m ± κ_m/2` with the peak height held at
/// its measured value; a cross-check on the half-maximum width.
pub fn kappa_least_squares(table: &ResponseTable, fit: &ResonanceFit) -> Result<f64> {
    let lo = fit.omega_m - 0.5 * fit.kappa_m;
    let hi = fit.omega_m + 0.5 * fit.kappa_m;
    let xs = clipped_abscissae(&table.grid, lo, hi)?;
    let data: Vec<f64> = xs
        .iter()
        .map(|&w| interp_complex(&table.grid, &table.values, w).map(|t| t.norm_sqr()))
        .collect::<Result<_>>()?;
    let height = fit.peak_height();
    let cost = |k: f64| {
        let r: Vec<f64> = xs
            .iter()
            .zip(&data)
            .map(|(&w, &d)| {
                let model = height * 0.25 * k * k / ((w - fit.omega_m).powi(2) + 0.25 * k * k);
                (model - d).powi(2)
            })
            .collect();
        trapezoid(&xs, &r)
    };
    // Golden-section search on [κ/2, 2κ].
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    let (mut a, mut b) = (0.5 * fit.kappa_m, 2.0 * fit.kappa_m);
    let mut c = b - phi * (b - a);
    let mut d = a + phi * (b - a);
    let (mut fc, mut fd) = (cost(c), cost(d));
    for _ in 0..100 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - phi * (b - a);
            fc = cost(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + phi * (b - a);
            fd = cost(d);
        }
        if b - a < 1e-12 * fit.kappa_m {
            break;
        }
    }
    Ok(0.5 * (a + b))
}

/// Analytic single-slab linewidth and shifted resonance at a frequency.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SingleLayerReference {
    /// `κ₁(ω) = -(c/ℓ_c) ln|r₁(ω)|`.
    pub kappa_1: f64,
    /// Resonance of the comb `2ωℓ_c/c + φ_r = (2k + 1)π` nearest to `ω`.
    pub omega_tilde: f64,
}

pub fn single_layer_reference(spec: &StackSpec, peak: f64) -> Result<SingleLayerReference> {
    if spec.n_pairs != 1 {
        return Err(Error::Domain(format!(
            "single-layer reference needs exactly one layer pair, got {}",
            spec.n_pairs
        )));
    }
    spec.validate()?;
    let slab = slab_optics(spec.n_high, spec.delta, peak)?;
    let kappa_1 = -(C / spec.ell_c) * slab.r1.norm().ln();
    let offset = (std::f64::consts::PI - slab.phase_r()) * C / (2.0 * spec.ell_c);
    let fsr = std::f64::consts::PI * C / spec.ell_c;
    let k = ((peak - offset) / fsr).round();
    Ok(SingleLayerReference { kappa_1, omega_tilde: k * fsr + offset })
}

/// Single-slab stand-in for the multilayer mirror at one resonance.
#[derive(Debug, Clone, PartialEq)]
pub struct EffectiveMirror {
    /// `a = κ_m/κ₁(ω_m)`.
    pub a_scale: f64,
    pub grid: Vec<f64>,
    /// `|r_m(ω)| = |r₁(ω)|^{aℓ_eff/ℓ_c}`.
    pub r_mod: Vec<f64>,
    /// `κ_m(ω) = -(c/ℓ_eff) ln|r_m(ω)|`.
    pub kappa_of_omega: Vec<f64>,
    pub fit: ResonanceFit,
}

impl EffectiveMirror {
    /// `T_{m,ω} = sqrt(ℓ_eff/L_N) t_m/(1 + r_m e^{2iωℓ_eff/c})` at grid sample `j`,
    /// with `φ_r = π` and `t_m` taken real and positive.
    pub fn response(&self, j: usize) -> C64 {
        let w = self.grid[j];
        let r = self.r_mod[j];
        let t = (1.0 - r * r).max(0.0).sqrt();
        let round_trip = C64::from_polar(1.0, 2.0 * w * self.fit.ell_eff / C);
        (self.fit.ell_eff / self.fit.l_n).sqrt() * t / (C64::new(1.0, 0.0) - round_trip * r)
    }
}

pub fn effective_mirror(
    fit: &ResonanceFit,
    grid: &[f64],
    slab: &[SlabOptics],
    ell_c: f64,
) -> Result<EffectiveMirror> {
    crate::quadrature::check_increasing("slab grid", grid)?;
    if grid.len() != slab.len() {
        return Err(Error::Domain("slab optics and grid differ in length".into()));
    }
    let mods: Vec<C64> = slab.iter().map(|s| C64::new(s.r1.norm(), 0.0)).collect();
    let r1_m = interp_complex(grid, &mods, fit.omega_m)?.re;
    let kappa_1 = -(C / ell_c) * r1_m.ln();
    if !(kappa_1 > 0.0 && kappa_1.is_finite()) {
        return Err(Error::DegenerateScale(format!(
            "single-slab linewidth at omega_m is {kappa_1}"
        )));
    }
    let a_scale = fit.kappa_m / kappa_1;
    let exponent = a_scale * fit.ell_eff / ell_c;
    let r_mod: Vec<f64> = mods.iter().map(|r| r.re.powf(exponent)).collect();
    let kappa_of_omega = r_mod.iter().map(|r| -(C / fit.ell_eff) * r.ln()).collect();
    Ok(EffectiveMirror { a_scale, grid: grid.to_vec(), r_mod, kappa_of_omega, fit: *fit })
}

/// Slab optics of the dense layer of `spec` on every grid point.
pub fn slab_on_grid(spec: &StackSpec, grid: &[f64]) -> Result<Vec<SlabOptics>> {
    grid.iter().map(|&w| slab_optics(spec.n_high, spec.delta, w)).collect()
}

/// Settings for locating and resolving a resonance of a stack.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitSettings {
    /// Coarse search window as fractions of the design frequency.
    pub window: (f64, f64),
    pub coarse_points: usize,
    /// Half-width of the refined table in linewidths.
    pub span_kappas: f64,
    /// Samples per linewidth in the refined table.
    pub per_kappa: f64,
}

impl Default for FitSettings {
    fn default() -> Self {
        FitSettings { window: (0.8, 1.2), coarse_points: 4001, span_kappas: 8.0, per_kappa: 64.0 }
    }
}

/// Nearest peak to `target` among `peaks`; ties go to the taller one.
pub fn choose_peak(table: &ResponseTable, peaks: &[f64], target: f64) -> Option<f64> {
    let mut best: Option<(f64, f64, f64)> = None;
    for &w in peaks {
        let d = (w - target).abs();
        let h = table.interpolate(w).map(|t| t.norm_sqr()).unwrap_or(0.0);
        best = match best {
            None => Some((w, d, h)),
            Some((bw, bd, bh)) => {
                if (d - bd).abs() <= 1e-9 * target.abs().max(1.0) {
                    warn!("peaks at {bw} and {w} are equally close to {target}; keeping the taller");
                    if h > bh {
                        Some((w, d, h))
                    } else {
                        Some((bw, bd, bh))
                    }
                } else if d < bd {
                    Some((w, d, h))
                } else {
                    Some((bw, bd, bh))
                }
            }
        };
    }
    best.map(|b| b.0)
}

/// Table resolving the resonance: `±span_kappas·κ` around `omega_m`.
pub fn resolved_table(spec: &StackSpec, omega_m: f64, kappa: f64, settings: &FitSettings) -> Result<ResponseTable> {
    let half = settings.span_kappas * kappa;
    let lo = (omega_m - half).max(0.5 * omega_m);
    let hi = omega_m + half;
    let count = ((hi - lo) / kappa * settings.per_kappa).ceil() as usize + 1;
    response(spec, &linspace(lo, hi, count.max(33)))
}

/// Fit the resonance near `omega` of `spec`, refining the table until the
/// linewidth settles. `kappa` is a first guess of the linewidth.
pub fn fit_peak(spec: &StackSpec, omega: f64, kappa: f64, settings: &FitSettings) -> Result<(ResonanceFit, ResponseTable)> {
    let (mut omega, mut kappa) = (omega, kappa);
    let mut last: Option<(ResonanceFit, ResponseTable)> = None;
    for _ in 0..12 {
        let table = resolved_table(spec, omega, kappa, settings)?;
        match fit_resonance(&table, omega) {
            Ok(fit) => {
                let converged = (fit.kappa_m - kappa).abs() < 1e-3 * kappa;
                omega = fit.omega_m;
                kappa = fit.kappa_m;
                last = Some((fit, table));
                if converged {
                    break;
                }
            }
            Err(Error::Range(_)) => kappa *= 2.0,
            Err(e) => return Err(e),
        }
    }
    let (fit, table) = last.ok_or_else(|| Error::Fit(format!("could not resolve the peak near {omega}")))?;
    // One final table at the converged linewidth so sampling density is as configured.
    let table = if (table.grid[1] - table.grid[0]) * settings.per_kappa > 1.01 * fit.kappa_m {
        resolved_table(spec, fit.omega_m, fit.kappa_m, settings)?
    } else {
        table
    };
    let fit = fit_resonance(&table, fit.omega_m)?;
    Ok((fit, table))
}

fn coarse_scan(spec: &StackSpec, settings: &FitSettings) -> Result<(ResponseTable, Vec<f64>, f64)> {
    let target = spec.omega_design;
    let lo = settings.window.0 * target;
    let hi = settings.window.1 * target;
    let coarse = response(spec, &linspace(lo, hi, settings.coarse_points))?;
    let peaks = find_peaks(&coarse, (lo, hi))?;
    let guess = 4.0 * (hi - lo) / (settings.coarse_points - 1) as f64;
    Ok((coarse, peaks, guess))
}

/// Locate the resonance nearest `ω_c` and fit it on an adaptively refined table.
pub fn fit_near_design(spec: &StackSpec, settings: &FitSettings) -> Result<(ResonanceFit, ResponseTable)> {
    let (coarse, peaks, guess) = coarse_scan(spec, settings)?;
    let (lo, hi) = coarse.range();
    let omega = choose_peak(&coarse, &peaks, spec.omega_design)
        .ok_or_else(|| Error::Fit(format!("no resonance in [{lo}, {hi}]")))?;
    fit_peak(spec, omega, guess, settings)
}

/// Fit every resonance found in the coarse window, one result per peak.
pub fn fit_window(spec: &StackSpec, settings: &FitSettings) -> Result<Vec<Result<ResonanceFit>>> {
    let (_, peaks, guess) = coarse_scan(spec, settings)?;
    Ok(peaks.iter().map(|&w| fit_peak(spec, w, guess, settings).map(|f| f.0)).collect())
}

/// Root-find the dense-layer index so the resonance near `ω_c` has effective
/// reflectivity `target`. The bracket is in refractive index.
pub fn calibrate_index(base: &StackSpec, target: f64, bracket: (f64, f64), settings: &FitSettings) -> Result<f64> {
    if !(target > 0.0 && target < 1.0) {
        return Err(Error::Domain(format!("target reflectivity must be in (0, 1), got {target}")));
    }
    if base.n_pairs == 0 {
        return Err(Error::Domain("an empty stack cannot be calibrated".into()));
    }
    let residual = |n: f64| -> Result<f64> {
        let (fit, _) = fit_near_design(&base.with_index(n), settings)?;
        Ok(fit.r_eff - target)
    };
    let (mut a, mut b) = bracket;
    let (mut fa, fb) = (residual(a)?, residual(b)?);
    if fa * fb > 0.0 {
        return Err(Error::Fit(format!(
            "target r_eff = {target} not bracketed by n_high in [{a}, {b}] (residuals {fa}, {fb})"
        )));
    }
    for _ in 0..80 {
        let mid = 0.5 * (a + b);
        let fm = residual(mid)?;
        if fm == 0.0 || b - a < 1e-12 {
            return Ok(mid);
        }
        if fa * fm < 0.0 {
            b = mid;
        } else {
            a = mid;
            fa = fm;
        }
    }
    Ok(0.5 * (a + b))
}

/// Calibrated dense-layer index: hits `r_eff ≈ 0.953` for eight pairs at `ℓ_c = 10`.
pub const DEFAULT_N_HIGH: f64 = 1.248782290565;

/// Default stack used by the examples and the CLI.
pub fn default_stack(n_pairs: usize, ell_c: f64) -> StackSpec {
    StackSpec::quarter_wave(n_pairs, DEFAULT_N_HIGH, ell_c)
}
