//! Cavity geometry and its exact response function.
//!
//! The cavity is a perfect mirror at `x = -ℓ_c` facing a stack of `N`
//! dielectric pairs that starts at `x = 0`. Each pair is a dense layer
//! (index `n_high`, thickness `δ`) followed by a vacuum spacer of thickness
//! `α`; the trailing spacer of the last pair is not part of the stack, so the
//! stack ends at `s = Nδ + (N - 1)α` and vacuum extends beyond.
//!
//! The response function `T_ω` is the ratio of the intracavity field
//! amplitude to the incoming amplitude. With the normal mode written as
//!
//! ```text
//! inside  (-ℓ_c < x < 0):  T (e^{iω(x+2ℓ_c)} - e^{-iωx})
//! outside (x > s):         G e^{iω(x-s)} - e^{-iω(x-s)},   G = e^{2iωℓ_c} T/T*
//! ```
//!
//! a single slab (`N = 1`) reproduces `t₁/(1 + r₁ e^{2iωℓ_c})` exactly and an
//! empty stack gives `T = 1`.

use serde::{Deserialize, Serialize};

use crate::error::ensure_finite;
use crate::quadrature::{check_increasing, interp_complex};
use crate::{Error, Result, C64, LAMBDA0, OMEGA_C};

/// Geometry and optics of the cavity and its multilayer output mirror.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StackSpec {
    /// Number of (dense, spacer) pairs `N`.
    pub n_pairs: usize,
    /// Refractive index of the dense layers.
    pub n_high: f64,
    /// Dense-layer thickness `δ`.
    pub delta: f64,
    /// Vacuum spacer thickness `α`.
    pub alpha: f64,
    /// Mirror spacing `ℓ_c`.
    pub ell_c: f64,
    /// Design frequency `ω_c` of the quarter-wave layers.
    pub omega_design: f64,
}

impl StackSpec {
    /// Quarter-wave stack at `ω_c`: `n_high·δ = α = λ₀/4`.
    pub fn quarter_wave(n_pairs: usize, n_high: f64, ell_c: f64) -> Self {
        StackSpec {
            n_pairs,
            n_high,
            delta: LAMBDA0 / (4.0 * n_high),
            alpha: LAMBDA0 / 4.0,
            ell_c,
            omega_design: OMEGA_C,
        }
    }

    /// Same layers with a different number of pairs.
    pub fn with_pairs(mut self, n_pairs: usize) -> Self {
        self.n_pairs = n_pairs;
        self
    }

    /// Same layers with a different mirror spacing.
    pub fn with_spacing(mut self, ell_c: f64) -> Self {
        self.ell_c = ell_c;
        self
    }

    /// Same pair count and spacing, re-derived quarter-wave layers for `n_high`.
    pub fn with_index(self, n_high: f64) -> Self {
        StackSpec::quarter_wave(self.n_pairs, n_high, self.ell_c)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("n_high", self.n_high),
            ("delta", self.delta),
            ("alpha", self.alpha),
            ("ell_c", self.ell_c),
            ("omega_design", self.omega_design),
        ] {
            ensure_finite(name, v)?;
        }
        if self.ell_c <= 0.0 {
            return Err(Error::Domain(format!("ell_c must be > 0, got {}", self.ell_c)));
        }
        if self.n_pairs >= 1 {
            if self.n_high < 1.0 {
                return Err(Error::Domain(format!("n_high must be >= 1, got {}", self.n_high)));
            }
            if self.delta <= 0.0 || self.alpha <= 0.0 {
                return Err(Error::Domain(format!(
                    "layer thicknesses must be > 0 (delta = {}, alpha = {})",
                    self.delta, self.alpha
                )));
            }
        }
        Ok(())
    }

    /// Position `s` where the stack ends.
    pub fn stack_end(&self) -> f64 {
        if self.n_pairs == 0 {
            0.0
        } else {
            self.n_pairs as f64 * self.delta + (self.n_pairs - 1) as f64 * self.alpha
        }
    }

    /// Layers from `x = 0` outward as `(index, thickness)`.
    pub fn layers(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        (0..self.n_pairs).flat_map(move |i| {
            let spacer = (i + 1 < self.n_pairs).then_some((1.0, self.alpha));
            std::iter::once((self.n_high, self.delta)).chain(spacer)
        })
    }
}

/// Reflection and transmission of one lossless dielectric slab in vacuum.
///
/// Phases are referenced to the slab faces: `r₁` at the face of incidence,
/// `t₁` from the entry face to the exit face.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlabOptics {
    pub r1: C64,
    pub t1: C64,
}

impl SlabOptics {
    pub fn phase_r(&self) -> f64 {
        self.r1.arg()
    }
}

/// Airy formulas for a slab of index `n_high` and thickness `delta`.
pub fn slab_optics(n_high: f64, delta: f64, omega: f64) -> Result<SlabOptics> {
    ensure_finite("n_high", n_high)?;
    ensure_finite("delta", delta)?;
    ensure_finite("omega", omega)?;
    if n_high < 1.0 || delta < 0.0 || omega <= 0.0 {
        return Err(Error::Domain(format!(
            "slab needs n_high >= 1, delta >= 0, omega > 0 (got {n_high}, {delta}, {omega})"
        )));
    }
    let r12 = (1.0 - n_high) / (1.0 + n_high);
    let phase = n_high * omega * delta / crate::C;
    let e1 = C64::from_polar(1.0, phase);
    let e2 = e1 * e1;
    let denom = C64::new(1.0, 0.0) - e2 * (r12 * r12);
    Ok(SlabOptics {
        r1: (C64::new(1.0, 0.0) - e2) * r12 / denom,
        t1: e1 * (1.0 - r12 * r12) / denom,
    })
}

/// Real 2×2 characteristic matrix acting on `(E, E'/k)`, `k = ω/c`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mat2 {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl Mat2 {
    pub const IDENTITY: Mat2 = Mat2 { a: 1.0, b: 0.0, c: 0.0, d: 1.0 };

    /// Propagation through a homogeneous layer from its left face to its right face.
    pub fn layer(index: f64, thickness: f64, omega: f64) -> Mat2 {
        let (s, c) = (index * omega * thickness / crate::C).sin_cos();
        Mat2 { a: c, b: s / index, c: -index * s, d: c }
    }

    /// Propagation backwards through the same layer (the exact inverse).
    pub fn layer_inverse(index: f64, thickness: f64, omega: f64) -> Mat2 {
        let (s, c) = (index * omega * thickness / crate::C).sin_cos();
        Mat2 { a: c, b: -s / index, c: index * s, d: c }
    }

    pub fn det(&self) -> f64 {
        self.a * self.d - self.b * self.c
    }

    pub fn mul(&self, rhs: &Mat2) -> Mat2 {
        Mat2 {
            a: self.a * rhs.a + self.b * rhs.c,
            b: self.a * rhs.b + self.b * rhs.d,
            c: self.c * rhs.a + self.d * rhs.c,
            d: self.c * rhs.b + self.d * rhs.d,
        }
    }

    pub fn apply(&self, v: (C64, C64)) -> (C64, C64) {
        (v.0 * self.a + v.1 * self.b, v.0 * self.c + v.1 * self.d)
    }
}

/// Matrix carrying `(E, E'/k)` from `x = 0` to the stack end `x = s`.
pub fn stack_matrix(spec: &StackSpec, omega: f64) -> Mat2 {
    spec.layers()
        .fold(Mat2::IDENTITY, |acc, (n, d)| Mat2::layer(n, d, omega).mul(&acc))
}

/// Exact `T_ω` at one frequency.
pub fn response_at(spec: &StackSpec, omega: f64) -> C64 {
    let k = omega / crate::C;
    let round_trip = C64::from_polar(1.0, 2.0 * k * spec.ell_c);
    // Intracavity field with T = 1, evaluated at x = 0.
    let inside = (round_trip - 1.0, C64::i() * (round_trip + 1.0));
    let (e_s, de_s) = stack_matrix(spec, omega).apply(inside);
    // Incoming amplitude at the stack end; the physical mode has it equal to -1.
    let incoming = (e_s + C64::i() * de_s) * 0.5;
    -1.0 / incoming
}

/// `T_ω` from the outside inward: the stack is traversed in reverse with
/// inverted layer matrices and the perfect-mirror condition is imposed last.
pub fn response_at_reversed(spec: &StackSpec, omega: f64) -> C64 {
    let k = omega / crate::C;
    let back = spec
        .layers()
        .fold(Mat2::IDENTITY, |acc, (n, d)| acc.mul(&Mat2::layer_inverse(n, d, omega)));
    // Outside field G e^{ik(x-s)} - e^{-ik(x-s)} split into its G-part and the rest.
    let outgoing = back.apply((C64::new(1.0, 0.0), C64::i()));
    let incoming = back.apply((C64::new(-1.0, 0.0), C64::i()));
    let (sin_l, cos_l) = (k * spec.ell_c).sin_cos();
    let node = |v: (C64, C64)| v.0 * cos_l - v.1 * sin_l;
    let g = -node(incoming) / node(outgoing);
    let e0 = outgoing.0 * g + incoming.0;
    let de0 = outgoing.1 * g + incoming.1;
    let round_trip = C64::from_polar(1.0, 2.0 * k * spec.ell_c);
    let via_e = round_trip - 1.0;
    let via_de = C64::i() * (round_trip + 1.0);
    if via_e.norm() >= via_de.norm() {
        e0 / via_e
    } else {
        de0 / via_de
    }
}

/// `T_ω` sampled on an ascending frequency grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ResponseTable {
    pub grid: Vec<f64>,
    pub values: Vec<C64>,
    /// Cavity the table was computed from; `None` for synthetic tables.
    pub spec: Option<StackSpec>,
}

impl ResponseTable {
    /// Table built from externally supplied samples (e.g. a synthetic Lorentzian sum).
    pub fn from_samples(grid: Vec<f64>, values: Vec<C64>) -> Result<Self> {
        check_increasing("frequency grid", &grid)?;
        if grid.len() != values.len() {
            return Err(Error::Domain(format!(
                "grid has {} samples but {} values were given",
                grid.len(),
                values.len()
            )));
        }
        if values.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::Domain("response values must be finite".into()));
        }
        Ok(ResponseTable { grid, values, spec: None })
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    pub fn range(&self) -> (f64, f64) {
        (self.grid[0], self.grid[self.grid.len() - 1])
    }

    pub fn abs2(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.norm_sqr()).collect()
    }

    /// Linear interpolation of `T_ω` between samples.
    pub fn interpolate(&self, omega: f64) -> Result<C64> {
        interp_complex(&self.grid, &self.values, omega)
    }

    pub fn require_spec(&self) -> Result<&StackSpec> {
        self.spec
            .as_ref()
            .ok_or_else(|| Error::Usage("operation needs a table computed from a stack".into()))
    }
}

/// Evaluate `T_ω` for `spec` at every grid point.
pub fn response(spec: &StackSpec, grid: &[f64]) -> Result<ResponseTable> {
    spec.validate()?;
    check_increasing("frequency grid", grid)?;
    if grid[0] <= 0.0 {
        return Err(Error::Domain("frequency grid must be positive".into()));
    }
    let values: Vec<C64> = grid.iter().map(|&w| response_at(spec, w)).collect();
    if let Some(i) = values.iter().position(|v| !(v.re.is_finite() && v.im.is_finite())) {
        return Err(Error::Numerical {
            last_good_time: f64::NAN,
            message: format!("non-finite response at omega = {}", grid[i]),
        });
    }
    Ok(ResponseTable { grid: grid.to_vec(), values, spec: Some(*spec) })
}

/// Phase factor `e^{2iωℓ_c} T_ω/T_ω*` of the outside part of a true mode.
pub fn outside_phase(table: &ResponseTable, omega: f64) -> Result<C64> {
    let spec = table.require_spec()?;
    let t = table.interpolate(omega)?;
    let unit = t / t.norm();
    Ok(C64::from_polar(1.0, 2.0 * omega * spec.ell_c / crate::C) * unit * unit)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::linspace;
    use proptest::prelude::*;

    /// Single-slab cavity written out directly: `t₁/(1 + r₁ e^{2iωℓ_c})`.
    fn single_slab_cavity(n: f64, d: f64, ell_c: f64, w: f64) -> C64 {
        let r = (1.0 - n) / (1.0 + n);
        let e = C64::from_polar(1.0, n * w * d);
        let den = 1.0 - e * e * r * r;
        let r1 = (1.0 - e * e) * r / den;
        let t1 = e * (1.0 - r * r) / den;
        t1 / (1.0 + r1 * C64::from_polar(1.0, 2.0 * w * ell_c))
    }

    /// Gaussian elimination with partial pivoting on a small dense system.
    fn solve(mut a: Vec<Vec<C64>>, mut b: Vec<C64>) -> Vec<C64> {
        let n = b.len();
        for col in 0..n {
            let piv = (col..n).max_by(|&i, &j| a[i][col].norm().total_cmp(&a[j][col].norm())).unwrap();
            a.swap(col, piv);
            b.swap(col, piv);
            for row in col + 1..n {
                let f = a[row][col] / a[col][col];
                for k in col..n {
                    let v = a[col][k];
                    a[row][k] -= f * v;
                }
                let v = b[col];
                b[row] -= f * v;
            }
        }
        let mut x = vec![C64::new(0.0, 0.0); n];
        for row in (0..n).rev() {
            let s: C64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
            x[row] = (b[row] - s) / a[row][row];
        }
        x
    }

    /// Reflection of a slab on `[0, d]` from matching `E` and `E'` at both faces:
    /// left `e^{ikx} + r e^{-ikx}`, inside `A e^{inkx} + B e^{-inkx}`, right `t e^{ik(x-d)}`.
    fn slab_by_boundary_solve(n: f64, d: f64, w: f64) -> (C64, C64) {
        let i = C64::i();
        let k = w;
        let ep = C64::from_polar(1.0, n * k * d);
        let em = C64::from_polar(1.0, -n * k * d);
        let one = C64::new(1.0, 0.0);
        let zero = C64::new(0.0, 0.0);
        // unknowns (r, A, B, t)
        let a = vec![
            vec![one, -one, -one, zero],
            vec![-i * k, -i * n * k * one, i * n * k * one, zero],
            vec![zero, ep, em, -one],
            vec![zero, i * n * k * ep, -i * n * k * em, -i * k * one],
        ];
        let b = vec![-one, -i * k, zero, zero];
        let x = solve(a, b);
        (x[0], x[3])
    }

    #[test]
    fn slab_optics_match_boundary_solve() {
        for &(n, d, w) in &[(1.5, 1.0 / 3.0, OMEGA_C), (2.3, 0.21, 2.7), (1.248782290565, 0.4, 3.3), (6.0, 1.0 / 12.0, OMEGA_C)] {
            let s = slab_optics(n, d, w).unwrap();
            let (r, t) = slab_by_boundary_solve(n, d, w);
            assert!((s.r1 - r).norm() < 1e-12, "r1 {} vs {r}", s.r1);
            assert!((s.t1 - t).norm() < 1e-12, "t1 {} vs {t}", s.t1);
        }
        // quarter-wave value through the oracle as well
        let n = 1.7;
        let (r, _) = slab_by_boundary_solve(n, LAMBDA0 / (4.0 * n), OMEGA_C);
        assert!((r.norm() - (n * n - 1.0) / (n * n + 1.0)).abs() < 1e-12);
    }

    #[test]
    fn one_pair_matches_single_slab_cavity() {
        let spec = StackSpec::quarter_wave(1, 1.9, 7.0);
        for w in linspace(0.3, 9.0, 997) {
            let t = response_at(&spec, w);
            let oracle = single_slab_cavity(spec.n_high, spec.delta, spec.ell_c, w);
            assert!((t - oracle).norm() < 1e-10 * oracle.norm(), "omega {w}: {t} vs {oracle}");
        }
    }

    #[test]
    fn more_pairs_give_taller_narrower_peak() {
        let grid = linspace(0.9 * OMEGA_C, 1.1 * OMEGA_C, 20001);
        let measure = |n_pairs: usize| {
            let table = response(&StackSpec::quarter_wave(n_pairs, 1.248782290565, 10.0), &grid).unwrap();
            let p = table.abs2();
            let (k, &top) = p.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap();
            let lo = (0..k).rev().find(|&j| p[j] < 0.5 * top).unwrap();
            let hi = (k..p.len()).find(|&j| p[j] < 0.5 * top).unwrap();
            (top, grid[hi] - grid[lo])
        };
        let (h2, w2) = measure(2);
        let (h4, w4) = measure(4);
        assert!(h4 > h2, "heights {h2} {h4}");
        assert!(w4 < w2, "widths {w2} {w4}");
    }

    #[test]
    fn refinement_leaves_interpolated_response_unchanged() {
        let spec = StackSpec::quarter_wave(8, 1.248782290565, 10.0);
        let kappa = 0.0048;
        let (lo, hi) = (OMEGA_C - 2.0 * kappa, OMEGA_C + 2.0 * kappa);
        let coarse = response(&spec, &linspace(lo, hi, 8001)).unwrap();
        let fine = response(&spec, &linspace(lo, hi, 16001)).unwrap();
        for q in 0..200 {
            let w = lo + (hi - lo) * (q as f64 + 0.3711) / 200.0;
            let a = coarse.interpolate(w).unwrap();
            let b = fine.interpolate(w).unwrap();
            assert!((a - b).norm() < 1e-6 * b.norm(), "omega {w}: {a} vs {b}");
        }
    }

    #[test]
    fn outside_phase_near_design_matches_lorentzian() {
        let spec = StackSpec::quarter_wave(8, 1.248782290565, 10.0);
        let (fit, table) = crate::resonances::fit_near_design(&spec, &Default::default()).unwrap();
        let g = outside_phase(&table, OMEGA_C).unwrap();
        assert!((g.norm() - 1.0).abs() < 1e-12);
        let tm = fit.lorentzian(OMEGA_C);
        let unit = tm / tm.norm();
        let from_fit = C64::from_polar(1.0, 2.0 * OMEGA_C * spec.ell_c) * unit * unit;
        let dphi = (g / from_fit).arg().abs();
        assert!(dphi < 1e-2, "phase difference {dphi}");
    }

    proptest! {
        #[test]
        fn slab_is_lossless(n in 1.0f64..6.0, d in 1e-3f64..2.0, w in 0.05f64..12.0) {
            let s = slab_optics(n, d, w).unwrap();
            prop_assert!((s.r1.norm_sqr() + s.t1.norm_sqr() - 1.0).abs() < 1e-12);
            prop_assert!((s.t1 * s.r1.conj() + s.t1.conj() * s.r1).norm() < 1e-12);
        }

        #[test]
        fn single_pair_oracle(n in 1.05f64..4.0, ell_c in 0.5f64..20.0, w in 0.2f64..8.0) {
            let spec = StackSpec::quarter_wave(1, n, ell_c);
            let t = response_at(&spec, w);
            let oracle = single_slab_cavity(n, spec.delta, ell_c, w);
            prop_assert!((t - oracle).norm() < 1e-10 * oracle.norm());
        }

        #[test]
        fn reverse_traversal_agrees(n_pairs in 0usize..13, n in 1.05f64..2.5, ell_c in 0.5f64..15.0, w in 0.3f64..8.0) {
            let spec = StackSpec::quarter_wave(n_pairs, n, ell_c);
            for (idx, thick) in spec.layers() {
                prop_assert!((Mat2::layer_inverse(idx, thick, w).det() - 1.0).abs() < 1e-12);
            }
            let a = response_at(&spec, w);
            let b = response_at_reversed(&spec, w);
            prop_assert!((a - b).norm() < 1e-12 * a.norm().max(1.0), "{} vs {}", a, b);
        }

        #[test]
        fn outside_phase_is_unimodular(n_pairs in 0usize..10, ell_c in 0.5f64..15.0, w in 0.5f64..6.0) {
            let spec = StackSpec::quarter_wave(n_pairs, 1.3, ell_c);
            let table = response(&spec, &[w - 0.01, w + 0.01]).unwrap();
            let g = outside_phase(&table, w).unwrap();
            prop_assert!((g.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn empty_stack_is_transparent() {
        let spec = StackSpec::quarter_wave(0, 1.3, 10.0);
        let grid = linspace(0.1, 8.0, 500);
        let table = response(&spec, &grid).unwrap();
        let worst = table.values.iter().map(|t| (t.norm() - 1.0).abs()).fold(0.0, f64::max);
        assert!(worst < 1e-10, "max ||T|-1| = {worst}");
        for &w in &[0.5, 2.0, OMEGA_C, 7.0] {
            let g = outside_phase(&table, w).unwrap();
            let expected = C64::from_polar(1.0, 2.0 * w * 10.0);
            assert!((g - expected).norm() < 1e-10);
        }
    }

    #[test]
    fn quarter_wave_slab_reflectivity() {
        for &n in &[1.2, 1.5, 2.3, 6.0] {
            let s = slab_optics(n, LAMBDA0 / (4.0 * n), OMEGA_C).unwrap();
            let expected = (n * n - 1.0) / (n * n + 1.0);
            assert!((s.r1.norm() - expected).abs() < 1e-13);
        }
    }

    #[test]
    fn slab_limits() {
        let thin = slab_optics(1.7, 0.0, 2.0).unwrap();
        assert!(thin.r1.norm() < 1e-15);
        assert!((thin.t1 - 1.0).norm() < 1e-15);
        let matched = slab_optics(1.0, 0.4, 2.0).unwrap();
        assert_eq!(matched.r1.norm(), 0.0);
        assert!((matched.t1.norm() - 1.0).abs() < 1e-15);
        assert!(matches!(slab_optics(f64::NAN, 0.1, 1.0), Err(Error::Domain(_))));
        assert!(matches!(slab_optics(1.5, 0.1, -1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn layer_matrices_are_unimodular() {
        for &(n, d, w) in &[(1.3, 0.38, 3.1), (1.0, 0.5, 0.2), (4.0, 0.1, 9.0)] {
            assert!((Mat2::layer(n, d, w).det() - 1.0).abs() < 1e-12);
            assert!((Mat2::layer_inverse(n, d, w).det() - 1.0).abs() < 1e-12);
            let p = Mat2::layer(n, d, w).mul(&Mat2::layer_inverse(n, d, w));
            assert!((p.a - 1.0).abs() < 1e-14 && p.b.abs() < 1e-14);
            assert!(p.c.abs() < 1e-14 && (p.d - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn stack_layout() {
        let spec = StackSpec::quarter_wave(3, 1.25, 10.0);
        let layers: Vec<_> = spec.layers().collect();
        assert_eq!(layers.len(), 5);
        assert_eq!(layers[0].0, 1.25);
        assert_eq!(layers[1].0, 1.0);
        let total: f64 = layers.iter().map(|l| l.1).sum();
        assert!((total - spec.stack_end()).abs() < 1e-14);
        // Quarter-wave defaults: n·δ − ℓ₀/2 = 0.
        assert!((spec.n_high * spec.delta - crate::ELL0 / 2.0).abs() < 1e-15);
        assert!((spec.alpha - crate::ELL0 / 2.0).abs() < 1e-15);
    }

    #[test]
    fn invalid_inputs_are_rejected() {
        let spec = StackSpec::quarter_wave(2, 1.3, 10.0);
        assert!(matches!(response(&spec, &[]), Err(Error::Domain(_))));
        assert!(matches!(response(&spec, &[1.0, 0.5]), Err(Error::Domain(_))));
        assert!(matches!(response(&spec, &[0.0, 0.5]), Err(Error::Domain(_))));
        let bad = spec.with_spacing(-1.0);
        assert!(matches!(response(&bad, &[1.0]), Err(Error::Domain(_))));
        let table = response(&spec, &[1.0, 2.0]).unwrap();
        assert!(matches!(outside_phase(&table, 3.0), Err(Error::Range(_))));
        let synthetic =
            ResponseTable::from_samples(vec![1.0, 2.0], vec![C64::new(1.0, 0.0); 2]).unwrap();
        assert!(matches!(outside_phase(&synthetic, 1.5), Err(Error::Usage(_))));
    }
}
