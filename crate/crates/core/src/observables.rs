//! Photon observables derived from trajectories: populations, spectra,
//! spatial density outside the mirror and comparison metrics.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::dynamics::{coupling_v, FrequencyGrid, Representation, SimState, Trajectory};
use crate::quadrature::{interp_real, linspace, trapezoid};
use crate::resonances::ResonanceFit;
use crate::{Error, Result, C, C64};

/// Intracavity population below which the photon counts as having left.
pub const LEAK_THRESHOLD: f64 = 1e-3;

/// Populations at one time. In the true-mode picture `p_f10` is zero and
/// `p_f01` holds the whole photon population `P̃_f1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Populations {
    pub p_g: f64,
    pub p_e: f64,
    pub p_f10: f64,
    pub p_f01: f64,
}

impl Populations {
    pub fn sum(&self) -> f64 {
        self.p_g + self.p_e + self.p_f10 + self.p_f01
    }

    /// All photon population, inside and outside.
    pub fn photon(&self) -> f64 {
        self.p_f10 + self.p_f01
    }
}

pub fn populations(traj: &Trajectory) -> Vec<Populations> {
    traj.discrete
        .iter()
        .zip(&traj.continuum_population)
        .map(|(d, &pop)| Populations { p_g: d[0].norm_sqr(), p_e: d[1].norm_sqr(), p_f10: d[2].norm_sqr(), p_f01: pop })
        .collect()
}

fn intracavity(state: &SimState) -> f64 {
    match state.representation {
        Representation::InsideOutside => state.c_f10.norm_sqr() + state.c_e.norm_sqr(),
        // True modes span the whole system; the emitter is the only thing left inside.
        Representation::TrueMode => state.c_e.norm_sqr(),
    }
}

/// First time after which the intracavity population stays below `threshold`.
pub fn leak_out_time(traj: &Trajectory, threshold: f64) -> Option<f64> {
    let inside: Vec<f64> = traj
        .discrete
        .iter()
        .map(|d| match traj.representation {
            Representation::InsideOutside => d[2].norm_sqr() + d[1].norm_sqr(),
            Representation::TrueMode => d[1].norm_sqr(),
        })
        .collect();
    let last_above = inside.iter().rposition(|&p| p >= threshold);
    match last_above {
        None => traj.times.first().copied(),
        Some(k) if k + 1 < inside.len() => Some(traj.times[k + 1]),
        Some(_) => None,
    }
}

/// Spectral density `|c(ω_j, t)|²` of the photon outside (per unit frequency).
pub fn spectrum_outside(state: &SimState, grid: &FrequencyGrid, allow_stale: bool) -> Result<Vec<f64>> {
    if state.continuum.len() != grid.count {
        return Err(Error::Usage("state and grid differ in size".into()));
    }
    let inside = intracavity(state);
    if !allow_stale && inside >= LEAK_THRESHOLD {
        return Err(Error::StaleState(format!(
            "intracavity population {inside:.3e} at t = {} is not below {LEAK_THRESHOLD}",
            state.t
        )));
    }
    Ok(state.continuum.iter().zip(&grid.weights).map(|(c, w)| c.norm_sqr() / w).collect())
}

/// Spectrum estimated from the intracavity amplitude.
#[derive(Debug, Clone, PartialEq)]
pub struct FourierSpectrum {
    /// `σ |∫ c*_f10(t) e^{-iωt} dt|²` with `σ = κ_m/2π`.
    pub raw: Vec<f64>,
    /// `raw` rescaled to unit integral over the grid.
    pub normalized: Vec<f64>,
    /// Integral of `raw` over the grid.
    pub raw_integral: f64,
}

/// Fourier estimate of the outgoing spectrum from `c_f10(t)`.
///
/// Amplitudes live in the frame rotating at the laser frequency, so the
/// phase factor is `e^{-i(ω + ω_fg - ω_L)t}`. The time series is decimated to
/// a step of at most `0.2/max|ω + ω_fg - ω_L|` and treated as piecewise linear.
pub fn spectrum_fourier(traj: &Trajectory, kappa: f64, allow_stale: bool) -> Result<FourierSpectrum> {
    if traj.representation != Representation::InsideOutside {
        return Err(Error::Usage("the Fourier estimate needs an inside-outside trajectory".into()));
    }
    let last = traj.discrete.last().ok_or_else(|| Error::Usage("empty trajectory".into()))?;
    if !allow_stale && last[2].norm_sqr() >= LEAK_THRESHOLD {
        return Err(Error::StaleState(format!(
            "P_f10 = {:.3e} at t_max; the horizon is too short for the Fourier estimate",
            last[2].norm_sqr()
        )));
    }
    let grid = &traj.grid;
    let nu: Vec<f64> = grid.omegas.iter().map(|w| w + traj.frame_offset).collect();
    let nu_max = nu.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let dt = traj.times[1] - traj.times[0];
    let stride = ((0.2 / nu_max / dt).floor() as usize).max(1);
    let idx: Vec<usize> = (0..traj.times.len()).step_by(stride).collect();
    let last_k = traj.times.len() - 1;
    let mut samples: Vec<(f64, C64)> = idx.iter().map(|&k| (traj.times[k], traj.discrete[k][2].conj())).collect();
    if *idx.last().unwrap() != last_k {
        samples.push((traj.times[last_k], traj.discrete[last_k][2].conj()));
    }
    let sigma = kappa / (2.0 * PI);
    let h = samples.get(1).map(|s| s.0 - samples[0].0).unwrap_or(0.0);
    let raw: Vec<f64> = nu
        .iter()
        .map(|&v| {
            // c(t) is taken piecewise linear and each piece is integrated
            // against e^{-iνt} exactly; the uniform pieces share weights.
            let (wa, wb) = linear_phase_weights(v * h);
            let step = C64::from_polar(1.0, -v * h);
            let mut ph = C64::from_polar(1.0, -v * samples[0].0);
            let mut acc = C64::new(0.0, 0.0);
            for pair in samples.windows(2) {
                let (t0, c0) = pair[0];
                let (t1, c1) = pair[1];
                let width = t1 - t0;
                if (width - h).abs() <= 1e-9 * h {
                    acc += ph * (c0 * wa + c1 * wb) * h;
                    ph *= step;
                } else {
                    let (a, b) = linear_phase_weights(v * width);
                    acc += C64::from_polar(1.0, -v * t0) * (c0 * a + c1 * b) * width;
                }
            }
            sigma * acc.norm_sqr()
        })
        .collect();
    let raw_integral: f64 = raw.iter().zip(&grid.weights).map(|(p, w)| p * w).sum();
    let normalized = if raw_integral > 0.0 { raw.iter().map(|p| p / raw_integral).collect() } else { raw.clone() };
    Ok(FourierSpectrum { raw, normalized, raw_integral })
}

/// `∫₀¹ (1 - u) e^{-iθu} du` and `∫₀¹ u e^{-iθu} du`.
fn linear_phase_weights(theta: f64) -> (C64, C64) {
    let a = C64::new(0.0, -theta);
    if theta.abs() < 1e-3 {
        let a2 = a * a;
        return (0.5 + a / 6.0 + a2 / 24.0 + a2 * a / 120.0, 0.5 + a / 3.0 + a2 / 8.0 + a2 * a / 30.0);
    }
    let e = a.exp();
    let a2 = a * a;
    ((e - 1.0 - a) / a2, (e * (a - 1.0) + 1.0) / a2)
}

/// Unit-integral copy of a density sampled on `grid`.
pub fn normalize_density(density: &[f64], grid: &FrequencyGrid) -> Vec<f64> {
    let total: f64 = density.iter().zip(&grid.weights).map(|(p, w)| p * w).sum();
    if total > 0.0 {
        density.iter().map(|p| p / total).collect()
    } else {
        density.to_vec()
    }
}

/// Relative L² distance `‖p - q‖/‖p‖` between two densities after each is
/// normalized to unit integral.
pub fn l2_distance(p: &[f64], q: &[f64], grid: &FrequencyGrid) -> f64 {
    let p = normalize_density(p, grid);
    let q = normalize_density(q, grid);
    let num: f64 = p.iter().zip(&q).zip(&grid.weights).map(|((a, b), w)| (a - b) * (a - b) * w).sum();
    let den: f64 = p.iter().zip(&grid.weights).map(|(a, w)| a * a * w).sum();
    (num / den).sqrt()
}

/// Default spatial sampling `Δx = 0.25·cπ/W` over `[0, c·t + margin]`.
pub fn default_positions(grid: &FrequencyGrid, t: f64, margin: f64) -> Vec<f64> {
    let dx = 0.25 * C * PI / grid.half_width;
    let n = ((C * t + margin) / dx).ceil() as usize + 1;
    linspace(0.0, dx * (n - 1) as f64, n)
}

/// Photon density `Φ(x, t) = |c_{0,1}(x, t)|²` outside the mirror, with
/// `c_{0,1}(x) = (cκ_m)^{-1/2} ∫ V_m*(ω) e^{iωx/c} c_f01(ω) dω`.
///
/// The sampled continuum repeats in space with period `2πc/Δω`; positions
/// spanning more than that are refused.
pub fn spatial_profile(state: &SimState, fit: &ResonanceFit, grid: &FrequencyGrid, xs: &[f64]) -> Result<Vec<f64>> {
    if state.representation != Representation::InsideOutside {
        return Err(Error::Usage("the spatial profile needs an inside-outside state".into()));
    }
    if state.continuum.len() != grid.count {
        return Err(Error::Usage("state and grid differ in size".into()));
    }
    if xs.is_empty() {
        return Ok(Vec::new());
    }
    let (lo, hi) = xs.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    let period = 2.0 * PI * C / grid.spacing();
    if hi - lo >= period {
        return Err(Error::Resolution(format!(
            "positions span {:.4e} but the frequency grid repeats every {period:.4e}",
            hi - lo
        )));
    }
    // a_j = V*(ω_j) sqrt(w_j) c_j / sqrt(cκ); stored amplitudes already carry sqrt(w_j).
    let scale = 1.0 / (C * fit.kappa_m).sqrt();
    let a: Vec<C64> = grid
        .omegas
        .iter()
        .zip(&state.continuum)
        .zip(&grid.weights)
        .map(|((&w, &c), &wt)| coupling_v(w, fit).conj() * c * (wt.sqrt() * scale))
        .collect();
    let w0 = grid.omegas[0];
    let dw = grid.spacing();
    Ok(xs
        .iter()
        .map(|&x| {
            let step = C64::from_polar(1.0, dw * x / C);
            let mut ph = C64::from_polar(1.0, w0 * x / C);
            let mut acc = C64::new(0.0, 0.0);
            for &aj in &a {
                acc += aj * ph;
                ph *= step;
            }
            acc.norm_sqr()
        })
        .collect())
}

/// Photon number outside: trapezoid integral of `Φ` over `x ≥ 0`.
pub fn photon_number(xs: &[f64], phi: &[f64]) -> f64 {
    let (x, y): (Vec<f64>, Vec<f64>) = xs.iter().zip(phi).filter(|(x, _)| **x >= 0.0).map(|(a, b)| (*a, *b)).unzip();
    trapezoid(&x, &y)
}

/// Full width at half maximum of a sampled profile (outermost crossings).
pub fn full_width(xs: &[f64], phi: &[f64]) -> Option<f64> {
    let (k, &peak) = phi.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1))?;
    if peak <= 0.0 {
        return None;
    }
    let half = 0.5 * peak;
    let first = phi.iter().position(|&v| v >= half)?;
    let last = phi.iter().rposition(|&v| v >= half)?;
    let cross = |i: usize, j: usize| xs[i] + (half - phi[i]) * (xs[j] - xs[i]) / (phi[j] - phi[i]);
    let left = if first == 0 { xs[0] } else { cross(first - 1, first) };
    let right = if last + 1 == xs.len() { xs[last] } else { cross(last, last + 1) };
    debug_assert!(first <= k && k <= last);
    Some(right - left)
}

/// Length of the interval holding the central `fraction` of `∫Φ dx`.
/// Unlike the half-maximum width it spans every lobe of a ringing profile.
pub fn central_extent(xs: &[f64], phi: &[f64], fraction: f64) -> Option<f64> {
    if !(fraction > 0.0 && fraction < 1.0) || xs.len() < 2 {
        return None;
    }
    let mut cum = vec![0.0; xs.len()];
    for k in 1..xs.len() {
        cum[k] = cum[k - 1] + 0.5 * (xs[k] - xs[k - 1]) * (phi[k] + phi[k - 1]);
    }
    let total = *cum.last()?;
    if total <= 0.0 {
        return None;
    }
    let at = |level: f64| -> f64 {
        let k = cum.partition_point(|&c| c < level).clamp(1, xs.len() - 1);
        let (c0, c1) = (cum[k - 1], cum[k]);
        if c1 > c0 {
            xs[k - 1] + (level - c0) / (c1 - c0) * (xs[k] - xs[k - 1])
        } else {
            xs[k]
        }
    };
    let tail = 0.5 * (1.0 - fraction) * total;
    Some(at(total - tail) - at(tail))
}

/// L¹ discrepancy between `Φ(x, t + τ)` and `Φ(x - cτ, t)`, relative to the
/// L¹ norm of the later profile. Both profiles share the positions `xs`.
pub fn translation_discrepancy(xs: &[f64], earlier: &[f64], later: &[f64], tau: f64) -> f64 {
    let shifted: Vec<f64> = xs.iter().map(|&x| interp_real(xs, earlier, x - C * tau).unwrap_or(0.0)).collect();
    let diff: Vec<f64> = shifted.iter().zip(later).map(|(a, b)| (a - b).abs()).collect();
    trapezoid(xs, &diff) / trapezoid(xs, later)
}

/// Largest density beyond `x_edge`, relative to the profile maximum.
pub fn leakage_beyond(xs: &[f64], phi: &[f64], x_edge: f64) -> f64 {
    let peak = phi.iter().cloned().fold(0.0, f64::max);
    let tail = xs.iter().zip(phi).filter(|(x, _)| **x > x_edge).map(|(_, p)| *p).fold(0.0, f64::max);
    if peak > 0.0 {
        tail / peak
    } else {
        0.0
    }
}

/// Kernel `I(ζ) = ∫ |V_m(ω)|² e^{iωζ/c} dω` by trapezoid quadrature over
/// detunings `|ω - ω_m| ≤ 4000πc/ℓ_eff`, the range extended symmetrically
/// about the resonance.
pub fn kernel_check(fit: &ResonanceFit, separation: f64) -> C64 {
    let half = 4000.0 * PI * C / fit.ell_eff;
    // The integrand oscillates at rate ζ/c in ω and at 2ℓ_eff/c through sinc².
    let fastest = (separation.abs() + 2.0 * fit.ell_eff) / C;
    let dw = (PI / (16.0 * fastest)).min(PI * C / (16.0 * fit.ell_eff));
    let n = (2.0 * half / dw).ceil() as usize + 1;
    let dw = 2.0 * half / (n - 1) as f64;
    let step = C64::from_polar(1.0, dw * separation / C);
    let mut ph = C64::from_polar(1.0, (fit.omega_m - half) * separation / C);
    let mut acc = C64::new(0.0, 0.0);
    for j in 0..n {
        let w = fit.omega_m - half + dw * j as f64;
        let weight = if j == 0 || j + 1 == n { 0.5 * dw } else { dw };
        acc += ph * (coupling_v(w, fit).norm_sqr() * weight);
        ph *= step;
    }
    acc
}

/// Triangular envelope `(κ_m/2ℓ_eff)(1 - |ζ|/2ℓ_eff)` for `|ζ| < 2ℓ_eff`, zero outside.
pub fn triangular_kernel(fit: &ResonanceFit, separation: f64) -> f64 {
    let support = 2.0 * fit.ell_eff / C;
    let s = separation.abs() / C;
    if s >= support {
        0.0
    } else {
        fit.kappa_m / (2.0 * fit.ell_eff) * (1.0 - s / support)
    }
}

/// Exponential rate of `values(t)` from a least-squares line through
/// `ln values` on samples where `lower < values < upper`.
pub fn exponential_rate(times: &[f64], values: &[f64], lower: f64, upper: f64) -> Option<f64> {
    let pts: Vec<(f64, f64)> = times
        .iter()
        .zip(values)
        .filter(|(_, v)| **v > lower && **v < upper)
        .map(|(t, v)| (*t, v.ln()))
        .collect();
    if pts.len() < 3 {
        return None;
    }
    let n = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let mv = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let cov: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - mv)).sum();
    let var: f64 = pts.iter().map(|p| (p.0 - mt) * (p.0 - mt)).sum();
    Some(-cov / var)
}

/// Scalar comparison metrics of a run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub leak_out_time: Option<f64>,
    pub norm_drift: f64,
    /// Unit-normalized L² distance between the inside-outside and true-mode spectra.
    pub l2_inout_vs_true: Option<f64>,
    /// Unit-normalized L² distance between the Fourier estimate and the inside-outside spectrum.
    pub l2_fourier_vs_inout: Option<f64>,
    /// `∫Φ dx` at the final time.
    pub photon_number: Option<f64>,
    /// `max_t |P̃_f1 - (P_f10 + P_f01)|`.
    pub max_population_mismatch: Option<f64>,
}

/// Everything a run produces for output.
#[derive(Debug, Clone, PartialEq)]
pub struct PhotonRecord {
    pub representation: Representation,
    pub times: Vec<f64>,
    pub populations: Vec<Populations>,
    pub omegas: Vec<f64>,
    pub spectrum: Vec<f64>,
    pub positions: Vec<f64>,
    /// `(t, Φ(x, t))` per requested snapshot.
    pub spatial: Vec<(f64, Vec<f64>)>,
    pub metrics: Metrics,
}

impl PhotonRecord {
    pub fn from_trajectory(traj: &Trajectory, allow_stale: bool) -> Result<Self> {
        let spectrum = spectrum_outside(traj.final_state(), &traj.grid, allow_stale)?;
        Ok(PhotonRecord {
            representation: traj.representation,
            times: traj.times.clone(),
            populations: populations(traj),
            omegas: traj.grid.omegas.clone(),
            spectrum,
            positions: Vec::new(),
            spatial: Vec::new(),
            metrics: Metrics {
                leak_out_time: leak_out_time(traj, LEAK_THRESHOLD),
                norm_drift: traj.norm_drift(),
                ..Metrics::default()
            },
        })
    }
}

/// `max_t |P̃_f1(t) - (P_f10(t) + P_f01(t))|` over the common time samples.
pub fn population_mismatch(true_mode: &Trajectory, inout: &Trajectory) -> Result<f64> {
    if true_mode.times.len() != inout.times.len() {
        return Err(Error::Usage("trajectories were not sampled at the same times".into()));
    }
    let a = populations(true_mode);
    let b = populations(inout);
    Ok(a.iter().zip(&b).map(|(p, q)| (p.photon() - q.photon()).abs()).fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{integrate, AtomParams, IntegrationSettings, Model};
    use proptest::prelude::*;

    fn fit() -> ResonanceFit {
        ResonanceFit::from_parameters(PI, 0.0048, 11.88, 10).unwrap()
    }

    fn bare_trajectory(grid: &FrequencyGrid, times: Vec<f64>, cavity: Vec<C64>, frame_offset: f64) -> Trajectory {
        let n = times.len();
        let last = SimState {
            representation: Representation::InsideOutside,
            c_g: C64::new(0.0, 0.0),
            c_e: C64::new(0.0, 0.0),
            c_f10: cavity[n - 1],
            continuum: vec![C64::new(0.0, 0.0); grid.count],
            t: times[n - 1],
        };
        Trajectory {
            representation: Representation::InsideOutside,
            discrete: cavity.iter().map(|&c| [C64::new(0.0, 0.0), C64::new(0.0, 0.0), c]).collect(),
            continuum_population: vec![0.0; n],
            times,
            snapshots: vec![last],
            grid: grid.clone(),
            frame_offset,
        }
    }

    #[test]
    fn fourier_of_a_pure_exponential_is_lorentzian() {
        let kappa = 0.05;
        let w_m = PI;
        let grid = FrequencyGrid::new(w_m, 40.0 * kappa, 2561).unwrap();
        // rotating frame at ω_m: the amplitude only decays
        let offset = -w_m;
        let dt = 0.02;
        let t_max = 40.0 / kappa;
        let times = crate::quadrature::linspace(0.0, t_max, (t_max / dt) as usize + 1);
        let cavity = times.iter().map(|&t| C64::from_polar((-0.5 * kappa * t).exp(), -(w_m + offset) * t)).collect();
        let traj = bare_trajectory(&grid, times, cavity, offset);
        let spec = spectrum_fourier(&traj, kappa, false).unwrap();
        for (j, &w) in grid.omegas.iter().enumerate() {
            let exact = kappa / (2.0 * PI) / ((w - w_m).powi(2) + 0.25 * kappa * kappa);
            assert!((spec.raw[j] / exact - 1.0).abs() < 1e-5, "omega {w}: {} vs {exact}", spec.raw[j]);
        }
        let unit: f64 = spec.normalized.iter().zip(&grid.weights).map(|(p, w)| p * w).sum();
        assert!((unit - 1.0).abs() < 1e-12);
    }

    #[test]
    fn stale_states_are_refused() {
        let grid = FrequencyGrid::new(PI, 0.1, 11).unwrap();
        let traj = bare_trajectory(&grid, vec![0.0, 1.0], vec![C64::new(1.0, 0.0), C64::new(0.5, 0.0)], -PI);
        assert!(matches!(spectrum_fourier(&traj, 0.01, false), Err(Error::StaleState(_))));
        assert!(spectrum_fourier(&traj, 0.01, true).is_ok());
        assert!(matches!(spectrum_outside(traj.final_state(), &grid, false), Err(Error::StaleState(_))));
        assert!(spectrum_outside(traj.final_state(), &grid, true).is_ok());
        assert_eq!(leak_out_time(&traj, LEAK_THRESHOLD), None);
    }

    #[test]
    fn dark_emitter_emits_nothing() {
        let f = fit();
        let atom = AtomParams::resonant(0.0, -4.5, f.omega_m);
        let grid = FrequencyGrid::new(f.omega_m, 0.2, 801).unwrap();
        let model = Model::inside_outside(&f, 10.0, &atom, &grid).unwrap();
        let mut y0 = SimState::ground(Representation::InsideOutside, grid.count);
        y0.c_g = C64::new(0.0, 0.0);
        y0.c_e = C64::new(1.0, 0.0);
        let traj = integrate(&model, &y0, &IntegrationSettings { t_max: 50.0, dt: model.default_step(), snapshot_stride: 100 }).unwrap();
        // emitter never leaves e, so the state counts as stale; read it anyway
        let s = spectrum_outside(traj.final_state(), &grid, true).unwrap();
        assert!(s.iter().all(|&v| v == 0.0));
        let xs = default_positions(&grid, 50.0, 0.0);
        let phi = spatial_profile(traj.final_state(), &f, &grid, &xs).unwrap();
        assert_eq!(photon_number(&xs, &phi), 0.0);
    }

    #[test]
    fn spectrum_integral_is_the_outside_population() {
        let f = ResonanceFit::from_parameters(PI, 0.05, 11.0, 10).unwrap();
        let atom = AtomParams::resonant(0.01, -4.5, f.omega_m);
        let grid = FrequencyGrid::new(f.omega_m, 2.0, 4001).unwrap();
        let model = Model::inside_outside(&f, 10.0, &atom, &grid).unwrap();
        let y0 = SimState::atom_excited(Representation::InsideOutside, grid.count);
        let traj = integrate(&model, &y0, &IntegrationSettings { t_max: 150.0, dt: model.default_step(), snapshot_stride: 1000 }).unwrap();
        let last = traj.final_state();
        let s = spectrum_outside(last, &grid, true).unwrap();
        let total: f64 = s.iter().zip(&grid.weights).map(|(p, w)| p * w).sum();
        let rest = 1.0 - last.c_e.norm_sqr() - last.c_g.norm_sqr() - last.c_f10.norm_sqr();
        assert!((total - rest).abs() < 1e-8, "{total} vs {rest}");
        assert!(s.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn spatial_profile_guards() {
        let f = fit();
        let grid = FrequencyGrid::new(f.omega_m, 0.1, 101).unwrap();
        let state = SimState::atom_excited(Representation::InsideOutside, grid.count);
        let period = 2.0 * PI / grid.spacing();
        assert!(matches!(spatial_profile(&state, &f, &grid, &[0.0, period]), Err(Error::Resolution(_))));
        assert!(spatial_profile(&state, &f, &grid, &[0.0, 0.9 * period]).is_ok());
        let other = SimState::atom_excited(Representation::TrueMode, grid.count);
        assert!(matches!(spatial_profile(&other, &f, &grid, &[0.0]), Err(Error::Usage(_))));
        let xs = default_positions(&grid, 10.0, 5.0);
        assert!(xs[xs.len() - 1] >= 15.0);
        assert!((xs[1] - xs[0] - 0.25 * PI / grid.half_width).abs() < 1e-12);
    }

    #[test]
    fn kernel_is_triangular() {
        let f = fit();
        let zero = kernel_check(&f, 0.0).norm();
        let target = f.kappa_m / (2.0 * f.ell_eff);
        assert!((zero / target - 1.0).abs() < 0.02, "{zero} vs {target}");
        let one = kernel_check(&f, f.ell_eff).norm();
        assert!((one / zero - 0.5).abs() < 0.02 * 0.5, "ratio {}", one / zero);
        let three = kernel_check(&f, 3.0 * f.ell_eff).norm();
        assert!(three < 1e-3 * zero, "{three}");
        assert_eq!(triangular_kernel(&f, 2.5 * f.ell_eff), 0.0);
        assert!((triangular_kernel(&f, f.ell_eff) - 0.5 * target).abs() < 1e-15);
    }

    #[test]
    fn profile_measures() {
        let xs = crate::quadrature::linspace(0.0, 100.0, 10001);
        let bump = |c: f64| -> Vec<f64> { xs.iter().map(|&x| (-(x - c) * (x - c) / 18.0).exp()).collect() };
        let a = bump(30.0);
        let b = bump(45.0);
        // Gaussian e^{-x²/2s²}, s = 3: FWHM 2s·sqrt(2 ln 2)
        let w = full_width(&xs, &a).unwrap();
        assert!((w - 6.0 * (2.0 * 2f64.ln()).sqrt()).abs() < 1e-3);
        assert!(translation_discrepancy(&xs, &a, &b, 15.0) < 1e-4);
        assert!(translation_discrepancy(&xs, &a, &b, 5.0) > 0.5);
        assert!(leakage_beyond(&xs, &a, 60.0) < 1e-10);
        assert!((photon_number(&xs, &a) - 3.0 * (2.0 * PI).sqrt()).abs() < 1e-6);
        assert_eq!(full_width(&xs, &vec![0.0; xs.len()]), None);
        // central 90% of a Gaussian: ±1.6448536 s
        let e = central_extent(&xs, &a, 0.9).unwrap();
        assert!((e - 2.0 * 1.6448536269514722 * 3.0).abs() < 1e-3, "{e}");
        assert_eq!(central_extent(&xs, &a, 1.0), None);
        let times: Vec<f64> = (0..100).map(|k| k as f64 * 0.5).collect();
        let decay: Vec<f64> = times.iter().map(|t| (-0.3 * t).exp()).collect();
        assert!((exponential_rate(&times, &decay, 1e-6, 0.9).unwrap() - 0.3).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn l2_distance_properties(a in proptest::collection::vec(0.0f64..1.0, 16), b in proptest::collection::vec(0.0f64..1.0, 16), s in 0.1f64..10.0) {
            prop_assume!(a.iter().sum::<f64>() > 0.1 && b.iter().sum::<f64>() > 0.1);
            let grid = FrequencyGrid::new(3.0, 0.5, 16).unwrap();
            prop_assert!(l2_distance(&a, &a, &grid) < 1e-12);
            let d = l2_distance(&a, &b, &grid);
            prop_assert!(d >= 0.0);
            let scaled: Vec<f64> = b.iter().map(|v| v * s).collect();
            prop_assert!((l2_distance(&a, &scaled, &grid) - d).abs() < 1e-12);
        }

        #[test]
        fn densities_are_nonnegative(seed in 0u64..500) {
            let f = fit();
            let grid = FrequencyGrid::new(f.omega_m, 0.05, 64).unwrap();
            let mut state = SimState::atom_excited(Representation::InsideOutside, grid.count);
            for (j, c) in state.continuum.iter_mut().enumerate() {
                let x = (seed as f64 + 1.0) * (j as f64 + 0.5);
                *c = C64::new(x.sin(), (1.3 * x).cos()) * 0.01;
            }
            let xs = default_positions(&grid, 100.0, 0.0);
            let phi = spatial_profile(&state, &f, &grid, &xs).unwrap();
            prop_assert!(phi.iter().all(|&v| v >= 0.0));
            let s = spectrum_outside(&state, &grid, true).unwrap();
            prop_assert!(s.iter().all(|&v| v >= 0.0));
        }
    }
}
