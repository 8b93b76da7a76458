//! Run configuration: JSON file, flag overrides, validation with field paths.

use std::path::{Path, PathBuf};

use cavity_modes::dynamics::{AtomParams, Drive, Preset};
use cavity_modes::resonances::{FitSettings, DEFAULT_N_HIGH};
use cavity_modes::stack::StackSpec;
use cavity_modes::{C, OMEGA_C};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// Raw file contents. Every field is optional; unset values take defaults.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FileConfig {
    pub stack: StackFile,
    pub atom: AtomFile,
    pub grid: GridFile,
    pub integrator: IntegratorFile,
    pub representation: Option<RepresentationChoice>,
    pub preset: Option<Preset>,
    pub outputs: Option<Vec<OutputKind>>,
    pub spatial: SpatialFile,
    pub response: ResponseFile,
    pub sweep: SweepFile,
    pub fit: FitFile,
    pub calibration: CalibrationFile,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StackFile {
    pub n_pairs: Option<usize>,
    pub n_high: Option<f64>,
    pub delta: Option<f64>,
    pub alpha: Option<f64>,
    pub ell_c: Option<f64>,
    pub omega_design: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AtomFile {
    pub dipole_scale: Option<f64>,
    pub x_a: Option<f64>,
    pub delta: Option<f64>,
    pub omega_fg: Option<f64>,
    /// Defaults to the fitted resonance frequency.
    pub omega_l: Option<f64>,
    pub drive: Option<Drive>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridFile {
    pub half_width: Option<f64>,
    pub count: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IntegratorFile {
    pub t_max: Option<f64>,
    pub dt: Option<f64>,
    pub snapshot_stride: Option<usize>,
    /// Write every k-th step to populations.csv.
    pub population_stride: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpatialFile {
    pub snapshots: Option<usize>,
    /// Extra distance past c·t, in units of ℓ_eff.
    pub margin_ell_eff: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ResponseFile {
    pub omega_min: Option<f64>,
    pub omega_max: Option<f64>,
    pub points: Option<usize>,
    pub lorentzians: Option<bool>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepFile {
    pub n_pairs: Option<Vec<usize>>,
    pub ell_c: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FitFile {
    pub window: Option<(f64, f64)>,
    pub coarse_points: Option<usize>,
    pub span_kappas: Option<f64>,
    pub per_kappa: Option<f64>,
    pub synthetic: Vec<SyntheticPeak>,
}

/// A Lorentzian written straight into a table, for checking parameter recovery.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticPeak {
    pub omega_m: f64,
    pub kappa_m: f64,
    #[serde(rename = "L_N")]
    pub l_n: f64,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CalibrationFile {
    pub target: Option<f64>,
    pub bracket: Option<(f64, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum RepresentationChoice {
    True,
    Inout,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputKind {
    Populations,
    Spectrum,
    Spatial,
    Diagnostics,
}

/// Fully resolved configuration; echoed into summary.json.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub stack: StackSpec,
    pub atom: ResolvedAtom,
    pub grid: GridResolved,
    pub integrator: IntegratorResolved,
    pub representation: RepresentationChoice,
    pub preset: Preset,
    pub outputs: Vec<OutputKind>,
    pub spatial: SpatialResolved,
    pub response: ResponseResolved,
    pub sweep: SweepResolved,
    pub fit: FitSettings,
    pub synthetic: Vec<SyntheticPeak>,
    pub calibration: CalibrationResolved,
    pub out: PathBuf,
}

/// Atom with the laser frequency left open until the resonance is known.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ResolvedAtom {
    pub dipole_scale: f64,
    pub x_a: f64,
    pub delta: f64,
    pub omega_fg: f64,
    pub omega_l: Option<f64>,
    pub drive: Drive,
}

impl ResolvedAtom {
    pub fn at(&self, omega_m: f64) -> AtomParams {
        AtomParams {
            dipole_scale: self.dipole_scale,
            x_a: self.x_a,
            delta: self.delta,
            omega_fg: self.omega_fg,
            omega_l: self.omega_l.unwrap_or(omega_m),
            drive: self.drive,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridResolved {
    pub half_width: Option<f64>,
    pub count: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IntegratorResolved {
    pub t_max: Option<f64>,
    pub dt: Option<f64>,
    pub snapshot_stride: Option<usize>,
    pub population_stride: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpatialResolved {
    pub snapshots: usize,
    pub margin_ell_eff: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ResponseResolved {
    pub omega_min: f64,
    pub omega_max: f64,
    pub points: usize,
    pub lorentzians: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResolved {
    pub n_pairs: Vec<usize>,
    pub ell_c: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CalibrationResolved {
    pub target: f64,
    pub bracket: (f64, f64),
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub representation: Option<RepresentationChoice>,
    pub sweep_n: Option<Vec<usize>>,
    pub sweep_ell_c: Option<Vec<f64>>,
}

pub fn read_file(path: &Path) -> Result<FileConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::io(format!("cannot read config {}: {e}", path.display())))?;
    parse(&text)
}

pub fn parse(text: &str) -> Result<FileConfig, CliError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        CliError::config(if path == "." { String::new() } else { path }, e.into_inner().to_string())
    })
}

/// Parse `N=a..b`, `N=a,b,c`, `ellc=x,y`.
pub fn parse_sweep(arg: &str, ov: &mut Overrides) -> Result<(), CliError> {
    let (key, value) = arg
        .split_once('=')
        .ok_or_else(|| CliError::config("--sweep", format!("expected KEY=VALUES, got {arg:?}")))?;
    match key.trim() {
        "N" | "n" | "n_pairs" => {
            let list = if let Some((a, b)) = value.split_once("..") {
                let a: usize = parse_num(a, "--sweep N")?;
                let b: usize = parse_num(b, "--sweep N")?;
                if a > b {
                    return Err(CliError::config("--sweep N", format!("empty range {a}..{b}")));
                }
                (a..=b).collect()
            } else {
                value.split(',').map(|v| parse_num(v, "--sweep N")).collect::<Result<Vec<usize>, _>>()?
            };
            ov.sweep_n = Some(list);
        }
        "ellc" | "ell_c" => {
            let list = value.split(',').map(|v| parse_num(v, "--sweep ellc")).collect::<Result<Vec<f64>, _>>()?;
            ov.sweep_ell_c = Some(list);
        }
        other => return Err(CliError::config("--sweep", format!("unknown sweep key {other:?} (use N or ellc)"))),
    }
    Ok(())
}

fn parse_num<T: std::str::FromStr>(s: &str, path: &str) -> Result<T, CliError> {
    s.trim().parse().map_err(|_| CliError::config(path, format!("cannot parse {s:?}")))
}

fn check(ok: bool, path: &str, msg: impl Into<String>) -> Result<(), CliError> {
    if ok {
        Ok(())
    } else {
        Err(CliError::config(path, msg.into()))
    }
}

fn positive(v: Option<f64>, path: &str) -> Result<(), CliError> {
    match v {
        Some(x) => check(x.is_finite() && x > 0.0, path, format!("must be finite and > 0, got {x}")),
        None => Ok(()),
    }
}

pub fn resolve(file: FileConfig, ov: Overrides) -> Result<RunConfig, CliError> {
    let s = &file.stack;
    let n_high = s.n_high.unwrap_or(DEFAULT_N_HIGH);
    check(n_high.is_finite() && n_high > 1.0, "stack.n_high", format!("must be > 1, got {n_high}"))?;
    positive(s.ell_c, "stack.ell_c")?;
    positive(s.delta, "stack.delta")?;
    positive(s.alpha, "stack.alpha")?;
    positive(s.omega_design, "stack.omega_design")?;
    let omega_design = s.omega_design.unwrap_or(OMEGA_C);
    // quarter-wave layers at the design frequency unless given
    let quarter = std::f64::consts::PI * C / (2.0 * omega_design);
    let stack = StackSpec {
        n_pairs: s.n_pairs.unwrap_or(8),
        n_high,
        delta: s.delta.unwrap_or(quarter / n_high),
        alpha: s.alpha.unwrap_or(quarter),
        ell_c: s.ell_c.unwrap_or(10.0),
        omega_design,
    };
    stack.validate().map_err(|e| CliError::config("stack", e.to_string()))?;

    let a = &file.atom;
    let atom = ResolvedAtom {
        dipole_scale: a.dipole_scale.unwrap_or(0.0025),
        x_a: a.x_a.unwrap_or(-0.45 * stack.ell_c),
        delta: a.delta.unwrap_or(0.0),
        omega_fg: a.omega_fg.unwrap_or(0.0),
        omega_l: a.omega_l,
        drive: a.drive.unwrap_or_default(),
    };
    check(atom.dipole_scale.is_finite() && atom.dipole_scale >= 0.0, "atom.dipole_scale", format!("must be >= 0, got {}", atom.dipole_scale))?;
    check(
        atom.x_a > -stack.ell_c && atom.x_a < 0.0,
        "atom.x_a",
        format!("must lie inside the cavity (-{}, 0), got {}", stack.ell_c, atom.x_a),
    )?;
    check(atom.delta.is_finite(), "atom.delta", "must be finite")?;
    check(atom.omega_fg.is_finite(), "atom.omega_fg", "must be finite")?;
    positive(atom.omega_l, "atom.omega_l")?;
    // the remaining drive checks live with the atom type
    atom.at(omega_design).validate(stack.ell_c).map_err(|e| CliError::config("atom.drive", e.to_string()))?;

    positive(file.grid.half_width, "grid.half_width")?;
    if let Some(c) = file.grid.count {
        check(c >= 2, "grid.count", format!("must be >= 2, got {c}"))?;
    }
    let it = &file.integrator;
    positive(it.t_max, "integrator.t_max")?;
    positive(it.dt, "integrator.dt")?;
    check(it.snapshot_stride != Some(0), "integrator.snapshot_stride", "must be >= 1")?;
    check(it.population_stride != Some(0), "integrator.population_stride", "must be >= 1")?;

    let spatial = SpatialResolved {
        snapshots: file.spatial.snapshots.unwrap_or(3),
        margin_ell_eff: file.spatial.margin_ell_eff.unwrap_or(20.0),
    };
    check(spatial.snapshots >= 1, "spatial.snapshots", "must be >= 1")?;
    check(spatial.margin_ell_eff.is_finite() && spatial.margin_ell_eff >= 0.0, "spatial.margin_ell_eff", "must be >= 0")?;

    let r = &file.response;
    let response = ResponseResolved {
        omega_min: r.omega_min.unwrap_or(0.8 * omega_design),
        omega_max: r.omega_max.unwrap_or(1.2 * omega_design),
        points: r.points.unwrap_or(4001),
        lorentzians: r.lorentzians.unwrap_or(true),
    };
    check(response.omega_min > 0.0, "response.omega_min", format!("must be > 0, got {}", response.omega_min))?;
    check(
        response.omega_max > response.omega_min && response.omega_max.is_finite(),
        "response.omega_max",
        format!("must exceed omega_min = {}", response.omega_min),
    )?;
    check(response.points >= 2, "response.points", "must be >= 2")?;

    let sweep = SweepResolved {
        n_pairs: ov.sweep_n.or(file.sweep.n_pairs.clone()).unwrap_or_else(|| vec![stack.n_pairs]),
        ell_c: ov.sweep_ell_c.or(file.sweep.ell_c.clone()).unwrap_or_else(|| vec![stack.ell_c]),
    };
    check(!sweep.n_pairs.is_empty(), "sweep.n_pairs", "must not be empty")?;
    check(!sweep.ell_c.is_empty(), "sweep.ell_c", "must not be empty")?;
    for (k, l) in sweep.ell_c.iter().enumerate() {
        check(l.is_finite() && *l > 0.0, &format!("sweep.ell_c[{k}]"), format!("must be > 0, got {l}"))?;
    }

    let d = FitSettings::default();
    let f = &file.fit;
    let fit = FitSettings {
        window: f.window.unwrap_or(d.window),
        coarse_points: f.coarse_points.unwrap_or(d.coarse_points),
        span_kappas: f.span_kappas.unwrap_or(d.span_kappas),
        per_kappa: f.per_kappa.unwrap_or(d.per_kappa),
    };
    check(fit.window.0 > 0.0 && fit.window.1 > fit.window.0, "fit.window", format!("need 0 < lo < hi, got {:?}", fit.window))?;
    check(fit.coarse_points >= 3, "fit.coarse_points", "must be >= 3")?;
    check(fit.span_kappas > 0.5, "fit.span_kappas", "must exceed 0.5 (the table has to reach half maximum)")?;
    check(fit.per_kappa >= 8.0, "fit.per_kappa", "must be >= 8")?;
    for (k, p) in f.synthetic.iter().enumerate() {
        let base = format!("fit.synthetic[{k}]");
        check(p.omega_m > 0.0 && p.omega_m.is_finite(), &format!("{base}.omega_m"), "must be > 0")?;
        check(p.kappa_m > 0.0 && p.kappa_m.is_finite(), &format!("{base}.kappa_m"), "must be > 0")?;
        check(p.l_n > 0.0 && p.l_n.is_finite(), &format!("{base}.L_N"), "must be > 0")?;
    }

    let calibration = CalibrationResolved {
        target: file.calibration.target.unwrap_or(0.953),
        bracket: file.calibration.bracket.unwrap_or((1.15, 1.4)),
    };
    check(calibration.target > 0.0 && calibration.target < 1.0, "calibration.target", "must be in (0, 1)")?;
    check(
        calibration.bracket.0 > 1.0 && calibration.bracket.1 > calibration.bracket.0,
        "calibration.bracket",
        format!("need 1 < lo < hi, got {:?}", calibration.bracket),
    )?;

    let mut outputs = file
        .outputs
        .unwrap_or_else(|| vec![OutputKind::Populations, OutputKind::Spectrum, OutputKind::Spatial, OutputKind::Diagnostics]);
    outputs.dedup();

    Ok(RunConfig {
        stack,
        atom,
        grid: GridResolved { half_width: file.grid.half_width, count: file.grid.count },
        integrator: IntegratorResolved {
            t_max: it.t_max,
            dt: it.dt,
            snapshot_stride: it.snapshot_stride,
            population_stride: it.population_stride,
        },
        representation: ov.representation.or(file.representation).unwrap_or(RepresentationChoice::Both),
        preset: file.preset.unwrap_or(Preset::AtomExcited),
        outputs,
        spatial,
        response,
        sweep,
        fit,
        synthetic: f.synthetic.clone(),
        calibration,
        out: ov.out.or(file.out).unwrap_or_else(|| PathBuf::from("out")),
    })
}
