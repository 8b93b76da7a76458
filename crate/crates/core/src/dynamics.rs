//! Emitter, cavity and continuum amplitudes in both pictures.
//!
//! Both pictures share one shape: a few discrete amplitudes (`c_g`, `c_e`
//! and, inside-outside only, `c_f10`) of which one "port" amplitude couples
//! to every continuum sample,
//!
//! ```text
//! i d/dt d   = H_d(t) d + e_port Σ_j G_j* c_j
//! i d/dt c_j = δ_j c_j + G_j d_port
//! ```
//!
//! with `δ_j = ω_j + ω_fg - ω_L` in the frame rotating at the laser
//! frequency. Continuum samples are stored as `c(ω_j)·sqrt(w_j)`, so the
//! couplings `G_j` carry the `sqrt(w_j)` and the norm is a plain sum.
//!
//! * true-mode: port `c_e`, `G_j = -i sqrt(w_j) η*(ω_j)`
//! * inside-outside: port `c_f10`, `G_j = sqrt(w_j) V_m(ω_j)`

use std::f64::consts::PI;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::quadrature::interp_complex;
use crate::resonances::ResonanceFit;
use crate::stack::{response, ResponseTable, StackSpec};
use crate::{Error, Result, C, C64};

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

/// Rabi envelope `Ω(t)` of the classical drive on the g-e transition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum Drive {
    Off,
    Constant { rabi: f64 },
    Gaussian { t0: f64, tau: f64, rabi: f64 },
}

impl Default for Drive {
    fn default() -> Self {
        Drive::Off
    }
}

impl Drive {
    pub fn at(&self, t: f64) -> f64 {
        match *self {
            Drive::Off => 0.0,
            Drive::Constant { rabi } => rabi,
            Drive::Gaussian { t0, tau, rabi } => {
                let s = (t - t0) / tau;
                rabi * (-0.5 * s * s).exp()
            }
        }
    }

    /// Time after which the drive is negligible (`Ω < 10⁻⁶ Ω₀` for the Gaussian).
    pub fn end_time(&self) -> f64 {
        match *self {
            Drive::Off => 0.0,
            Drive::Constant { rabi } if rabi == 0.0 => 0.0,
            Drive::Constant { .. } => f64::INFINITY,
            Drive::Gaussian { t0, tau, .. } => t0 + 5.3 * tau,
        }
    }

    pub fn peak(&self) -> f64 {
        match *self {
            Drive::Off => 0.0,
            Drive::Constant { rabi } | Drive::Gaussian { rabi, .. } => rabi.abs(),
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            Drive::Off => Ok(()),
            Drive::Constant { rabi } if rabi.is_finite() => Ok(()),
            Drive::Gaussian { t0, tau, rabi } if t0.is_finite() && rabi.is_finite() && tau > 0.0 && tau.is_finite() => Ok(()),
            other => Err(Error::Domain(format!("drive {other:?} is not evaluable"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AtomParams {
    /// `D = d_fe/sqrt(ħε₀c𝒜)`.
    pub dipole_scale: f64,
    /// Emitter position, inside the cavity (`-ℓ_c < x_A < 0`).
    pub x_a: f64,
    /// `Δ = ω_eg - ω_L`.
    pub delta: f64,
    pub omega_fg: f64,
    pub omega_l: f64,
    #[serde(default)]
    pub drive: Drive,
}

impl AtomParams {
    /// Undriven emitter whose e→f transition is resonant with `omega_m`.
    pub fn resonant(dipole_scale: f64, x_a: f64, omega_m: f64) -> Self {
        AtomParams { dipole_scale, x_a, delta: 0.0, omega_fg: 0.0, omega_l: omega_m, drive: Drive::Off }
    }

    /// `ω_fg - ω_L`, the offset between continuum frequency and rotating-frame detuning.
    pub fn frame_offset(&self) -> f64 {
        self.omega_fg - self.omega_l
    }

    pub fn validate(&self, ell_c: f64) -> Result<()> {
        for (name, v) in [
            ("dipole_scale", self.dipole_scale),
            ("x_a", self.x_a),
            ("delta", self.delta),
            ("omega_fg", self.omega_fg),
            ("omega_l", self.omega_l),
        ] {
            crate::error::ensure_finite(name, v)?;
        }
        if self.dipole_scale < 0.0 {
            return Err(Error::Domain(format!("dipole_scale must be >= 0, got {}", self.dipole_scale)));
        }
        if !(self.x_a > -ell_c && self.x_a < 0.0) {
            return Err(Error::Domain(format!(
                "x_a = {} must lie inside the cavity (-{ell_c}, 0)",
                self.x_a
            )));
        }
        self.drive.validate()
    }
}

/// Emitter-true-mode coupling `η_ω` from a response table.
pub fn eta(omega: f64, atom: &AtomParams, table: &ResponseTable) -> Result<C64> {
    let spec = table.require_spec()?;
    let t = interp_complex(&table.grid, &table.values, omega)?;
    Ok(eta_from_response(omega, atom, spec.ell_c, t))
}

pub fn eta_from_response(omega: f64, atom: &AtomParams, ell_c: f64, t: C64) -> C64 {
    let amp = atom.dipole_scale * (omega / PI).sqrt() * (omega * (atom.x_a + ell_c) / C).sin();
    C64::i() * C64::from_polar(amp, omega * ell_c / C) * t
}

/// Atom-cavity coupling `g_m` of the retained perfect-cavity mode.
pub fn g_m(fit: &ResonanceFit, atom: &AtomParams, ell_c: f64) -> f64 {
    -atom.dipole_scale * (fit.omega_m * C / fit.l_n).sqrt() * (fit.omega_m * (atom.x_a + ell_c) / C).sin()
}

/// `sin(x)/x` with the removable singularity filled in.
pub fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-8 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

/// Cavity-reservoir coupling `V_m(ω)`.
pub fn coupling_v(omega: f64, fit: &ResonanceFit) -> C64 {
    let amp = (fit.kappa_m / (2.0 * PI)).sqrt() * sinc((omega - fit.omega_m) * fit.ell_eff / C);
    -C64::i() * C64::from_polar(amp, -omega * fit.ell_eff / C)
}

/// Uniform discretization of the continuum around a resonance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyGrid {
    pub center: f64,
    pub half_width: f64,
    pub count: usize,
    #[serde(skip)]
    pub omegas: Vec<f64>,
    #[serde(skip)]
    pub weights: Vec<f64>,
}

/// Largest continuum the integrator will allocate.
pub const MAX_GRID_POINTS: usize = 10_000_000;
/// Largest number of stored time steps.
pub const MAX_STEPS: usize = 20_000_000;

impl FrequencyGrid {
    pub fn new(center: f64, half_width: f64, count: usize) -> Result<Self> {
        if count > MAX_GRID_POINTS {
            return Err(Error::Config(format!("frequency grid of {count} points exceeds the limit of {MAX_GRID_POINTS}")));
        }
        if !(center.is_finite() && half_width.is_finite() && half_width > 0.0) || count < 2 {
            return Err(Error::Config(format!(
                "frequency grid needs a finite positive half-width and >= 2 points (got W = {half_width}, J = {count})"
            )));
        }
        if center - half_width <= 0.0 {
            return Err(Error::Config(format!(
                "frequency grid reaches non-positive frequency {}",
                center - half_width
            )));
        }
        let step = 2.0 * half_width / (count - 1) as f64;
        let omegas: Vec<f64> = (0..count).map(|j| center - half_width + step * j as f64).collect();
        Ok(FrequencyGrid { center, half_width, count, omegas, weights: vec![step; count] })
    }

    /// Default grid for a resonance: `W = max(40κ, 6πc/ℓ_eff)`, clipped to stay
    /// at positive frequency, and `Δω = min(κ/32, 0.9·2π/(4 t_max))`.
    pub fn for_resonance(fit: &ResonanceFit, t_max: f64) -> Result<Self> {
        let wanted = (40.0 * fit.kappa_m).max(6.0 * PI * C / fit.ell_eff);
        let half_width = wanted.min(0.95 * fit.omega_m);
        let step = (fit.kappa_m / 32.0).min(0.9 * 2.0 * PI / (4.0 * t_max));
        let count = (2.0 * half_width / step).ceil() + 1.0;
        if !(count <= MAX_GRID_POINTS as f64) {
            return Err(Error::Config(format!(
                "t_max = {t_max} needs a frequency grid of {count:.3e} points (limit {MAX_GRID_POINTS})"
            )));
        }
        FrequencyGrid::new(fit.omega_m, half_width, count as usize)
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / (self.count - 1) as f64
    }

    /// Artificial revival time `2π/Δω` of the discretized continuum.
    pub fn recurrence_time(&self) -> f64 {
        2.0 * PI / self.spacing()
    }

    /// Same range with `factor` times the number of intervals.
    pub fn refined(&self, factor: usize) -> Result<Self> {
        FrequencyGrid::new(self.center, self.half_width, (self.count - 1) * factor + 1)
    }

    pub fn validate(&self, kappa: f64, t_max: f64) -> Result<()> {
        let dw = self.spacing();
        if dw > kappa / 32.0 * (1.0 + 1e-12) {
            return Err(Error::Config(format!(
                "grid spacing {dw:.3e} exceeds kappa/32 = {:.3e}",
                kappa / 32.0
            )));
        }
        if t_max >= 0.25 * self.recurrence_time() {
            return Err(Error::Config(format!(
                "t_max = {t_max} reaches a quarter of the recurrence time 2π/Δω = {:.6e}",
                self.recurrence_time()
            )));
        }
        if self.omegas[0] <= 0.0 {
            return Err(Error::Config("grid contains non-positive frequencies".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Representation {
    #[serde(rename = "true")]
    TrueMode,
    #[serde(rename = "inout")]
    InsideOutside,
}

impl Representation {
    pub fn tag(&self) -> &'static str {
        match self {
            Representation::TrueMode => "true",
            Representation::InsideOutside => "inout",
        }
    }

    fn port(&self) -> usize {
        match self {
            Representation::TrueMode => 1,
            Representation::InsideOutside => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    pub representation: Representation,
    pub c_g: C64,
    pub c_e: C64,
    /// Retained cavity mode; always zero in the true-mode picture.
    pub c_f10: C64,
    /// `c(ω_j)·sqrt(w_j)`.
    pub continuum: Vec<C64>,
    pub t: f64,
}

impl SimState {
    pub fn atom_excited(representation: Representation, count: usize) -> Self {
        SimState { representation, c_g: ZERO, c_e: C64::new(1.0, 0.0), c_f10: ZERO, continuum: vec![ZERO; count], t: 0.0 }
    }

    pub fn ground(representation: Representation, count: usize) -> Self {
        SimState { representation, c_g: C64::new(1.0, 0.0), c_e: ZERO, c_f10: ZERO, continuum: vec![ZERO; count], t: 0.0 }
    }

    /// One photon in the retained cavity mode, emitter in `f`.
    pub fn cavity_excited(count: usize) -> Self {
        SimState {
            representation: Representation::InsideOutside,
            c_g: ZERO,
            c_e: ZERO,
            c_f10: C64::new(1.0, 0.0),
            continuum: vec![ZERO; count],
            t: 0.0,
        }
    }

    pub fn continuum_population(&self) -> f64 {
        self.continuum.iter().map(|c| c.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.c_g.norm_sqr() + self.c_e.norm_sqr() + self.c_f10.norm_sqr() + self.continuum_population()
    }

    fn discrete(&self) -> [C64; 3] {
        [self.c_g, self.c_e, self.c_f10]
    }
}

/// Initial conditions offered to runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    AtomExcited,
    GroundWithDrive,
}

impl Preset {
    pub fn state(&self, representation: Representation, count: usize) -> SimState {
        match self {
            Preset::AtomExcited => SimState::atom_excited(representation, count),
            Preset::GroundWithDrive => SimState::ground(representation, count),
        }
    }
}

/// Which response enters `η_ω` in the true-mode picture.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResponseModel {
    #[default]
    Exact,
    /// The single Lorentzian `T_m(ω)` of the fitted resonance.
    Lorentzian,
}

/// Discretized Hamiltonian of either picture.
#[derive(Debug, Clone)]
pub struct Model {
    pub representation: Representation,
    pub grid: FrequencyGrid,
    /// `δ_j = ω_j + ω_fg - ω_L`.
    pub detuning: Vec<f64>,
    /// `G_j`, including `sqrt(w_j)`.
    pub coupling: Vec<C64>,
    pub delta: f64,
    /// `g_m` (inside-outside only).
    pub g: f64,
    /// Rotating-frame energy of `c_f10`.
    pub cavity_detuning: f64,
    pub drive: Drive,
}

impl Model {
    /// True-mode picture with `T_ω` evaluated exactly at every grid frequency.
    pub fn true_mode(spec: &StackSpec, atom: &AtomParams, grid: &FrequencyGrid) -> Result<Self> {
        let table = response(spec, &grid.omegas)?;
        Self::true_mode_from_values(atom, spec.ell_c, grid, &table.values)
    }

    /// True-mode picture with the fitted Lorentzian standing in for `T_ω`.
    pub fn true_mode_lorentzian(fit: &ResonanceFit, ell_c: f64, atom: &AtomParams, grid: &FrequencyGrid) -> Result<Self> {
        let values: Vec<C64> = grid.omegas.iter().map(|&w| fit.lorentzian(w)).collect();
        Self::true_mode_from_values(atom, ell_c, grid, &values)
    }

    fn true_mode_from_values(atom: &AtomParams, ell_c: f64, grid: &FrequencyGrid, values: &[C64]) -> Result<Self> {
        atom.validate(ell_c)?;
        let coupling = grid
            .omegas
            .iter()
            .zip(values)
            .zip(&grid.weights)
            .map(|((&w, &t), &wt)| -C64::i() * eta_from_response(w, atom, ell_c, t).conj() * wt.sqrt())
            .collect();
        Ok(Model {
            representation: Representation::TrueMode,
            detuning: grid.omegas.iter().map(|w| w + atom.frame_offset()).collect(),
            coupling,
            delta: atom.delta,
            g: 0.0,
            cavity_detuning: 0.0,
            drive: atom.drive,
            grid: grid.clone(),
        })
    }

    pub fn inside_outside(fit: &ResonanceFit, ell_c: f64, atom: &AtomParams, grid: &FrequencyGrid) -> Result<Self> {
        atom.validate(ell_c)?;
        Ok(Self::inside_outside_with_coupling(fit, g_m(fit, atom, ell_c), atom, grid))
    }

    /// Inside-outside picture with an explicit emitter coupling (e.g. `g = 0`
    /// for a bare cavity decay).
    pub fn inside_outside_with_coupling(fit: &ResonanceFit, g: f64, atom: &AtomParams, grid: &FrequencyGrid) -> Self {
        let coupling = grid
            .omegas
            .iter()
            .zip(&grid.weights)
            .map(|(&w, &wt)| coupling_v(w, fit) * wt.sqrt())
            .collect();
        Model {
            representation: Representation::InsideOutside,
            detuning: grid.omegas.iter().map(|w| w + atom.frame_offset()).collect(),
            coupling,
            delta: atom.delta,
            g,
            cavity_detuning: fit.omega_m + atom.frame_offset(),
            drive: atom.drive,
            grid: grid.clone(),
        }
    }

    pub fn max_detuning(&self) -> f64 {
        self.detuning.iter().fold(0.0, |m, d| m.max(d.abs()))
    }

    /// Largest step allowed by the continuum phase rotation, `0.1/max|δ_j|`.
    pub fn max_step(&self) -> f64 {
        0.1 / self.max_detuning()
    }

    /// Default step: the continuum bound, tightened if a discrete rate is faster.
    pub fn default_step(&self) -> f64 {
        let fastest = self
            .max_detuning()
            .max(self.delta.abs())
            .max(self.cavity_detuning.abs())
            .max(self.g.abs())
            .max(self.drive.peak());
        0.1 / fastest
    }

    fn discrete_rhs(&self, t: f64, d: &[C64; 3], port_sum: C64) -> [C64; 3] {
        let omega = self.drive.at(t);
        let mut h = [omega * d[1], omega * d[0] + self.delta * d[1] + self.g * d[2], self.g * d[1] + self.cavity_detuning * d[2]];
        h[self.representation.port()] += port_sum;
        [-C64::i() * h[0], -C64::i() * h[1], -C64::i() * h[2]]
    }

    /// Time derivative of `state`.
    pub fn rhs(&self, state: &SimState) -> Result<SimState> {
        if state.representation != self.representation {
            return Err(Error::Usage(format!(
                "state is {} but the model is {}",
                state.representation.tag(),
                self.representation.tag()
            )));
        }
        if state.continuum.len() != self.detuning.len() {
            return Err(Error::Usage("state and model grids differ".into()));
        }
        let port = state.discrete()[self.representation.port()];
        let sum: C64 = self.coupling.iter().zip(&state.continuum).map(|(g, c)| g.conj() * c).sum();
        let d = self.discrete_rhs(state.t, &state.discrete(), sum);
        let continuum = self
            .detuning
            .iter()
            .zip(&self.coupling)
            .zip(&state.continuum)
            .map(|((&dj, &gj), &cj)| -C64::i() * (cj * dj + gj * port))
            .collect();
        Ok(SimState { representation: self.representation, c_g: d[0], c_e: d[1], c_f10: d[2], continuum, t: 1.0 }) // dt/dt
    }
}

/// Derivative in the true-mode picture.
pub fn rhs_true(state: &SimState, model: &Model) -> Result<SimState> {
    if model.representation != Representation::TrueMode || state.representation != Representation::TrueMode {
        return Err(Error::Usage("rhs_true needs a true-mode state and model".into()));
    }
    model.rhs(state)
}

/// Derivative in the inside-outside picture.
pub fn rhs_inout(state: &SimState, model: &Model) -> Result<SimState> {
    if model.representation != Representation::InsideOutside || state.representation != Representation::InsideOutside {
        return Err(Error::Usage("rhs_inout needs an inside-outside state and model".into()));
    }
    model.rhs(state)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegrationSettings {
    pub t_max: f64,
    pub dt: f64,
    /// Continuum snapshots are kept every `snapshot_stride` steps (and at the end).
    pub snapshot_stride: usize,
}

/// Discrete amplitudes at every step, continuum snapshots at a stride.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub representation: Representation,
    pub times: Vec<f64>,
    pub discrete: Vec<[C64; 3]>,
    /// `Σ_j |c_j|²` at every step.
    pub continuum_population: Vec<f64>,
    pub snapshots: Vec<SimState>,
    pub grid: FrequencyGrid,
    /// Offset `ω_fg - ω_L` between grid frequency and rotating-frame detuning.
    pub frame_offset: f64,
}

impl Trajectory {
    pub fn final_state(&self) -> &SimState {
        self.snapshots.last().expect("trajectory always holds the final state")
    }

    pub fn norm(&self, k: usize) -> f64 {
        let d = &self.discrete[k];
        d[0].norm_sqr() + d[1].norm_sqr() + d[2].norm_sqr() + self.continuum_population[k]
    }

    pub fn norm_drift(&self) -> f64 {
        let n0 = self.norm(0);
        (0..self.times.len()).map(|k| (self.norm(k) - n0).abs()).fold(0.0, f64::max)
    }
}

/// Fixed-step classic RK4.
///
/// The continuum part of every stage is linear with time-independent
/// coefficients, so the four stages collapse into a closed per-sample update
/// `c ← P(z)c + u·D(θ)` with `z = -iδ_j h`, `u = -iG_j h`, and the stage sums
/// `Σ G_j* c_j` follow from four moments of the current amplitudes. The
/// arithmetic is that of the textbook scheme, evaluated in one pass per step.
pub fn integrate(model: &Model, initial: &SimState, settings: &IntegrationSettings) -> Result<Trajectory> {
    let IntegrationSettings { t_max, dt, snapshot_stride } = *settings;
    if initial.representation != model.representation {
        return Err(Error::Usage(format!(
            "initial state is {} but the model is {}",
            initial.representation.tag(),
            model.representation.tag()
        )));
    }
    let n = model.detuning.len();
    if initial.continuum.len() != n {
        return Err(Error::Usage("initial state and model grids differ".into()));
    }
    if !(dt > 0.0 && t_max > 0.0 && dt.is_finite() && t_max.is_finite()) {
        return Err(Error::Config(format!("need positive finite t_max and dt (got {t_max}, {dt})")));
    }
    if dt > model.max_step() * (1.0 + 1e-12) {
        return Err(Error::Config(format!(
            "dt = {dt:.4e} exceeds 0.1/max|δ_j| = {:.4e}",
            model.max_step()
        )));
    }
    if t_max >= 0.25 * model.grid.recurrence_time() {
        return Err(Error::Config(format!(
            "t_max = {t_max} reaches a quarter of the recurrence time 2π/Δω = {:.6e}",
            model.grid.recurrence_time()
        )));
    }
    let steps = (t_max / dt * (1.0 - 1e-12)).ceil().max(1.0);
    if steps > MAX_STEPS as f64 {
        return Err(Error::Config(format!("{steps:.3e} steps exceed the limit of {MAX_STEPS}")));
    }
    let steps = steps as usize;
    let h = t_max / steps as f64;
    let stride = snapshot_stride.max(1);
    let port = model.representation.port();

    let mut blocks = Block::pack(&model.detuning, &model.coupling, &initial.continuum, h);
    let m0: f64 = model.coupling.iter().map(|g| g.norm_sqr()).sum();
    let m1: f64 = model.coupling.iter().zip(&model.detuning).map(|(g, d)| d * g.norm_sqr()).sum();
    let m2: f64 = model.coupling.iter().zip(&model.detuning).map(|(g, d)| d * d * g.norm_sqr()).sum();
    // A zero port polynomial leaves the amplitudes untouched and only measures them.
    let (mut moments, mut pop) = continuum_pass(&mut blocks, h, [ZERO; 4], true);

    let mut d = initial.discrete();
    let mut t = initial.t;
    let mut traj = Trajectory {
        representation: model.representation,
        times: Vec::with_capacity(steps + 1),
        discrete: Vec::with_capacity(steps + 1),
        continuum_population: Vec::with_capacity(steps + 1),
        snapshots: vec![initial.clone()],
        grid: model.grid.clone(),
        frame_offset: model.detuning.first().zip(model.grid.omegas.first()).map(|(d, w)| d - w).unwrap_or(0.0),
    };
    traj.times.push(t);
    traj.discrete.push(d);
    traj.continuum_population.push(pop);

    let i = C64::i();
    for step in 1..=steps {
        // X_k = Σ G* z^k c with z = -iθ.
        let x0 = moments[0];
        let x1 = -i * moments[1];
        let x2 = -moments[2];
        let x3 = i * moments[3];

        let d1p = d[port];
        let s1 = x0;
        let k1 = model.discrete_rhs(t, &d, s1);
        let y2 = add_scaled(&d, &k1, 0.5 * h);
        let d2p = y2[port];
        let s2 = x0 + x1 * 0.5 + d1p * (-i * h * m0) * 0.5;
        let k2 = model.discrete_rhs(t + 0.5 * h, &y2, s2);
        let y3 = add_scaled(&d, &k2, 0.5 * h);
        let d3p = y3[port];
        let s3 = x0 + x1 * 0.5 + x2 * 0.25 + d1p * (-h * h * m1) * 0.25 + d2p * (-i * h * m0) * 0.5;
        let k3 = model.discrete_rhs(t + 0.5 * h, &y3, s3);
        let y4 = add_scaled(&d, &k3, h);
        let d4p = y4[port];
        let s4 = x0 + x1 + x2 * 0.5 + x3 * 0.25 + d1p * (i * h * h * h * m2) * 0.25 + d2p * (-h * h * m1) * 0.5 + d3p * (-i * h * m0);
        let k4 = model.discrete_rhs(t + h, &y4, s4);
        for q in 0..3 {
            d[q] += (k1[q] + k2[q] * 2.0 + k3[q] * 2.0 + k4[q]) * (h / 6.0);
        }

        // D(θ) = e0 + e1 θ + e2 θ² + e3 θ³ collects the port values of the four stages.
        let e0 = (d1p + d2p * 2.0 + d3p * 2.0 + d4p) / 6.0;
        let e1 = -i * (d1p + d2p + d3p) / 6.0;
        let e2 = -(d1p + d2p) / 12.0;
        let e3 = i * d1p / 24.0;
        let next = continuum_pass(&mut blocks, h, [e0, e1, e2, e3], false);
        moments = next.0;
        pop = next.1;
        t = initial.t + h * step as f64;

        if !(pop.is_finite() && d.iter().all(|v| v.re.is_finite() && v.im.is_finite())) {
            return Err(Error::Numerical {
                last_good_time: t - h,
                message: "non-finite amplitude".into(),
            });
        }
        traj.times.push(t);
        traj.discrete.push(d);
        traj.continuum_population.push(pop);
        if step % stride == 0 || step == steps {
            traj.snapshots.push(SimState {
                representation: model.representation,
                c_g: d[0],
                c_e: d[1],
                c_f10: d[2],
                continuum: Block::unpack(&blocks, n),
                t,
            });
        }
    }
    Ok(traj)
}

fn add_scaled(d: &[C64; 3], k: &[C64; 3], s: f64) -> [C64; 3] {
    [d[0] + k[0] * s, d[1] + k[1] * s, d[2] + k[2] * s]
}

const LANES: usize = 8;

/// Eight continuum samples laid out so the update loop runs on fixed-size
/// arrays. Only θ = δh, G and c are stored; the step constants are rebuilt
/// in registers because the pass is limited by memory traffic. Padding
/// samples have zero coupling and stay zero.
#[derive(Debug, Clone, Copy, Default)]
struct Block {
    theta: [f64; LANES],
    g_re: [f64; LANES],
    g_im: [f64; LANES],
    c_re: [f64; LANES],
    c_im: [f64; LANES],
}

impl Block {
    fn pack(detuning: &[f64], coupling: &[C64], amplitudes: &[C64], h: f64) -> Vec<Block> {
        let mut blocks = vec![Block::default(); detuning.len().div_ceil(LANES)];
        for (j, ((&dj, &gj), &cj)) in detuning.iter().zip(coupling).zip(amplitudes).enumerate() {
            let (b, l) = (&mut blocks[j / LANES], j % LANES);
            b.theta[l] = dj * h;
            b.g_re[l] = gj.re;
            b.g_im[l] = gj.im;
            b.c_re[l] = cj.re;
            b.c_im[l] = cj.im;
        }
        blocks
    }

    fn unpack(blocks: &[Block], n: usize) -> Vec<C64> {
        blocks
            .iter()
            .flat_map(|b| (0..LANES).map(move |l| C64::new(b.c_re[l], b.c_im[l])))
            .take(n)
            .collect()
    }
}

/// Update every continuum sample by `c ← P c + u D(θ)` and return the
/// moments `Σ θ^k G* c` (k = 0..3) of the new amplitudes with `Σ|c|²`.
/// The summation order is fixed, so results are deterministic.
fn continuum_pass(blocks: &mut [Block], h: f64, e: [C64; 4], measure_only: bool) -> ([C64; 4], f64) {
    #[cfg(target_arch = "x86_64")]
    {
        if std::is_x86_feature_detected!("avx512f") {
            // SAFETY: the CPU supports AVX-512F, checked just above.
            return unsafe { continuum_pass_avx512(blocks, h, e, measure_only) };
        }
        if std::is_x86_feature_detected!("avx2") {
            // SAFETY: the CPU supports AVX2, checked just above.
            return unsafe { continuum_pass_avx2(blocks, h, e, measure_only) };
        }
    }
    continuum_pass_portable(blocks, h, e, measure_only)
}

// Same code compiled with wider vectors; no FMA, so rounding is unchanged.
#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2")]
unsafe fn continuum_pass_avx2(blocks: &mut [Block], h: f64, e: [C64; 4], measure_only: bool) -> ([C64; 4], f64) {
    continuum_pass_portable(blocks, h, e, measure_only)
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx512f")]
unsafe fn continuum_pass_avx512(blocks: &mut [Block], h: f64, e: [C64; 4], measure_only: bool) -> ([C64; 4], f64) {
    continuum_pass_portable(blocks, h, e, measure_only)
}

#[inline(always)]
fn continuum_pass_portable(blocks: &mut [Block], h: f64, e: [C64; 4], measure_only: bool) -> ([C64; 4], f64) {
    let mut acc = [[0.0f64; LANES]; 9];
    for b in blocks.iter_mut() {
        for l in 0..LANES {
            let x = b.theta[l];
            let (mut nr, mut ni) = (b.c_re[l], b.c_im[l]);
            if !measure_only {
                let x2 = x * x;
                // P(z) = 1 + z + z²/2 + z³/6 + z⁴/24 at z = -iθ
                let p_re = 1.0 - 0.5 * x2 + x2 * x2 / 24.0;
                let p_im = -x + x * x2 / 6.0;
                // u = -i h G
                let (u_re, u_im) = (h * b.g_im[l], -h * b.g_re[l]);
                let dr = e[0].re + x * (e[1].re + x * (e[2].re + x * e[3].re));
                let di = e[0].im + x * (e[1].im + x * (e[2].im + x * e[3].im));
                let (cr, ci) = (nr, ni);
                nr = p_re * cr - p_im * ci + u_re * dr - u_im * di;
                ni = p_re * ci + p_im * cr + u_re * di + u_im * dr;
                b.c_re[l] = nr;
                b.c_im[l] = ni;
            }
            // conj(G)·c
            let wr = b.g_re[l] * nr + b.g_im[l] * ni;
            let wi = b.g_re[l] * ni - b.g_im[l] * nr;
            let x2 = x * x;
            let x3 = x2 * x;
            acc[0][l] += wr;
            acc[1][l] += wi;
            acc[2][l] += x * wr;
            acc[3][l] += x * wi;
            acc[4][l] += x2 * wr;
            acc[5][l] += x2 * wi;
            acc[6][l] += x3 * wr;
            acc[7][l] += x3 * wi;
            acc[8][l] += nr * nr + ni * ni;
        }
    }
    let s = |k: usize| acc[k].iter().sum::<f64>();
    (
        [C64::new(s(0), s(1)), C64::new(s(2), s(3)), C64::new(s(4), s(5)), C64::new(s(6), s(7))],
        s(8),
    )
}

/// Keep one resonance from a list of fits. Overlapped resonances cannot be
/// retained as independent modes, so any fit with overlap error above 0.05
/// is refused.
pub fn retained_mode(fits: &[ResonanceFit], target: f64) -> Result<ResonanceFit> {
    if let Some(bad) = fits.iter().find(|f| f.overlap_error > 0.05) {
        return Err(Error::Fit(format!(
            "resonance at {} has overlap error {:.3} > 0.05; modes are not separable",
            bad.omega_m, bad.overlap_error
        )));
    }
    if fits.len() > 1 {
        warn!("{} resonances supplied; only the one nearest {target} is retained", fits.len());
    }
    fits.iter()
        .min_by(|a, b| (a.omega_m - target).abs().total_cmp(&(b.omega_m - target).abs()))
        .copied()
        .ok_or_else(|| Error::Fit("no resonance supplied".into()))
}

/// Slowest population decay rate of the emitter + retained mode pair,
/// from the eigenvalues of `[[Δ, g], [g, δ_c - iκ/2]]`.
pub fn slowest_decay_rate(fit: &ResonanceFit, g: f64, delta: f64, cavity_detuning: f64) -> f64 {
    let a = C64::new(delta, 0.0);
    let b = C64::new(cavity_detuning, -0.5 * fit.kappa_m);
    let mean = (a + b) * 0.5;
    let disc = ((a - b) * 0.5 * ((a - b) * 0.5) + g * g).sqrt();
    let l1 = mean + disc;
    let l2 = mean - disc;
    // Population decays at twice the amplitude rate.
    -2.0 * l1.im.max(l2.im)
}

/// Horizon long enough for the photon to leave the cavity: 14 population
/// e-foldings of the slowest eigenmode after the drive has ended.
pub fn default_t_max(fit: &ResonanceFit, atom: &AtomParams, ell_c: f64) -> f64 {
    let g = g_m(fit, atom, ell_c);
    let cavity_detuning = fit.omega_m + atom.frame_offset();
    let gamma = slowest_decay_rate(fit, g, atom.delta, cavity_detuning);
    let decay = if gamma > 1e-3 * fit.kappa_m { 14.0 / gamma } else { 28.0 / fit.kappa_m };
    let drive_end = atom.drive.end_time();
    decay + if drive_end.is_finite() { drive_end } else { 0.0 }
}

/// Resolved grid and step settings for one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunPlan {
    pub grid: FrequencyGrid,
    pub settings: IntegrationSettings,
}

/// Plan a run from a fit, filling unset values with the defaults.
pub fn plan_run(
    fit: &ResonanceFit,
    atom: &AtomParams,
    ell_c: f64,
    t_max: Option<f64>,
    dt: Option<f64>,
    grid: Option<FrequencyGrid>,
    snapshot_stride: Option<usize>,
) -> Result<RunPlan> {
    let t_max = t_max.unwrap_or_else(|| default_t_max(fit, atom, ell_c));
    let grid = match grid {
        Some(g) => g,
        None => FrequencyGrid::for_resonance(fit, t_max)?,
    };
    grid.validate(fit.kappa_m, t_max)?;
    let probe = Model::inside_outside_with_coupling(fit, g_m(fit, atom, ell_c), atom, &FrequencyGrid::new(grid.center, grid.half_width, 2)?);
    let auto_dt = probe.default_step();
    let dt = dt.unwrap_or(auto_dt);
    let steps = (t_max / dt).ceil().max(1.0) as usize;
    Ok(RunPlan {
        grid,
        settings: IntegrationSettings { t_max, dt, snapshot_stride: snapshot_stride.unwrap_or((steps / 8).max(1)) },
    })
}
