//! One-dimensional optical cavity with a multilayer dielectric output mirror.
//!
//! The crate evaluates the exact cavity response function by transfer
//! matrices, extracts effective single-resonance parameters (linewidth,
//! effective length, amplification length, effective reflectivity), and
//! integrates the emitter + cavity + continuum amplitude equations in two
//! pictures:
//!
//! * the *true-mode* picture, where the atom couples to the continuum of
//!   normal modes of the whole cavity + environment system, and
//! * the *inside-outside* picture, where one perfect-cavity mode is coupled
//!   to a semi-infinite external continuum through a sinc-shaped coupling.
//!
//! Observables (populations, photon spectra, spatial photon density) are
//! derived from the trajectories so the two pictures can be compared.
//!
//! Units: `c = 1`, `ℓ₀ = λ₀/2 = 1`, `ħ = ε₀ = 𝒜 = 1`. Lengths are in `ℓ₀`,
//! frequencies in `c/ℓ₀`, times in `ℓ₀/c`; the mirror design frequency is
//! therefore `ω_c = π`.

pub mod dynamics;
pub mod error;
pub mod observables;
pub mod quadrature;
pub mod resonances;
pub mod stack;

pub use error::{Error, Result};

pub use num_complex::Complex64 as C64;

/// Speed of light.
pub const C: f64 = 1.0;
/// Length unit `ℓ₀ = λ₀/2`.
pub const ELL0: f64 = 1.0;
/// Mirror design wavelength `λ₀ = 2ℓ₀`.
pub const LAMBDA0: f64 = 2.0 * ELL0;
/// Mirror design frequency `ω_c = 2πc/λ₀`.
pub const OMEGA_C: f64 = 2.0 * std::f64::consts::PI * C / LAMBDA0;
