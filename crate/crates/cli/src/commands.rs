//! The four subcommands. Each reads a resolved config and writes files into
//! the output directory.

use std::path::PathBuf;

use cavity_modes::dynamics::{
    default_t_max, g_m, integrate, plan_run, FrequencyGrid, IntegrationSettings, Model, Representation, RunPlan, Trajectory,
};
use cavity_modes::observables::{
    central_extent, default_positions, full_width, l2_distance, leak_out_time, photon_number, population_mismatch,
    populations, spatial_profile, spectrum_fourier, spectrum_outside, LEAK_THRESHOLD,
};
use cavity_modes::quadrature::linspace;
use cavity_modes::resonances::{calibrate_index, fit_near_design, fit_resonance, fit_window, ResonanceFit, Validity};
use cavity_modes::stack::{response, ResponseTable, StackSpec};
use cavity_modes::Error;
use log::warn;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{OutputKind, RepresentationChoice, RunConfig};
use crate::error::{CliError, EXIT_NUMERICAL};
use crate::output::{ensure_dir, num, opt, write_json, Csv};

fn core<T>(context: &str, r: cavity_modes::Result<T>) -> Result<T, CliError> {
    r.map_err(|e| CliError::from_core(context, e))
}

/// `response`: |T| over a frequency range plus the Lorentzian of every fitted peak in it.
pub fn cmd_response(cfg: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    ensure_dir(&cfg.out)?;
    let r = &cfg.response;
    let grid = linspace(r.omega_min, r.omega_max, r.points);
    let table = core("response", response(&cfg.stack, &grid))?;

    let mut fits = Vec::new();
    if r.lorentzians && cfg.stack.n_pairs > 0 {
        let mut settings = cfg.fit;
        settings.window = (r.omega_min / cfg.stack.omega_design, r.omega_max / cfg.stack.omega_design);
        for (k, fit) in core("response peaks", fit_window(&cfg.stack, &settings))?.into_iter().enumerate() {
            match fit {
                Ok(f) => fits.push(f),
                Err(e) => warn!("peak {k} in the response window was not fitted: {e}"),
            }
        }
    }

    let mut header: Vec<String> = ["omega", "re_T", "im_T", "abs_T"].iter().map(|s| s.to_string()).collect();
    for f in &fits {
        let m = f.mode_index;
        header.extend([format!("re_Tm{m}"), format!("im_Tm{m}"), format!("abs_Tm{m}")]);
    }
    let path = cfg.out.join("response.csv");
    let mut csv = Csv::create(&path, &header)?;
    for (&w, t) in table.grid.iter().zip(&table.values) {
        let mut cells = vec![num(w), num(t.re), num(t.im), num(t.norm())];
        for f in &fits {
            let l = f.lorentzian(w);
            cells.extend([num(l.re), num(l.im), num(l.norm())]);
        }
        csv.row(&cells)?;
    }
    csv.finish()?;
    Ok(vec![path])
}

struct FitRow {
    n_pairs: Option<usize>,
    ell_c: Option<f64>,
    x_a: f64,
    result: Result<ResonanceFit, String>,
}

/// `fit`: resonance parameters over a sweep of pair counts and spacings.
pub fn cmd_fit(cfg: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    ensure_dir(&cfg.out)?;
    let points: Vec<(usize, f64)> =
        cfg.sweep.n_pairs.iter().flat_map(|&n| cfg.sweep.ell_c.iter().map(move |&l| (n, l))).collect();
    // collected in sweep order whatever order the workers finish in
    let mut rows: Vec<FitRow> = points
        .par_iter()
        .map(|&(n, l)| {
            let spec = cfg.stack.with_pairs(n).with_spacing(l);
            FitRow {
                n_pairs: Some(n),
                ell_c: Some(l),
                x_a: if cfg.atom.x_a > -l { cfg.atom.x_a } else { -0.45 * l },
                result: spec.validate().and_then(|_| fit_near_design(&spec, &cfg.fit)).map(|f| f.0).map_err(|e| e.to_string()),
            }
        })
        .collect();
    for p in &cfg.synthetic {
        rows.push(FitRow { n_pairs: None, ell_c: None, x_a: cfg.atom.x_a, result: synthetic_fit(p, cfg).map_err(|e| e.to_string()) });
    }

    let header: Vec<String> = [
        "N",
        "ell_c",
        "omega_m",
        "kappa_m",
        "L_N",
        "ell_eff",
        "mode_index",
        "r_eff",
        "overlap_error",
        "kappa_ell_eff",
        "kappa_emitter_distance",
        "validity_holds",
        "error",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    let path = cfg.out.join("fits.csv");
    let mut csv = Csv::create(&path, &header)?;
    let mut failures = 0;
    for row in &rows {
        let n = row.n_pairs.map(|n| n.to_string()).unwrap_or_else(|| "synthetic".into());
        let l = opt(row.ell_c);
        let cells = match &row.result {
            Ok(f) => {
                let v: Validity = f.validity(row.x_a, row.ell_c.unwrap_or(f.ell_eff));
                vec![
                    n,
                    l,
                    num(f.omega_m),
                    num(f.kappa_m),
                    num(f.l_n),
                    num(f.ell_eff),
                    f.mode_index.to_string(),
                    num(f.r_eff),
                    num(f.overlap_error),
                    num(v.kappa_ell_eff),
                    num(v.kappa_emitter_distance),
                    v.holds().to_string(),
                    String::new(),
                ]
            }
            Err(e) => {
                failures += 1;
                let mut cells = vec![n, l];
                cells.extend(std::iter::repeat(String::new()).take(10));
                // keep the tag a single CSV field
                cells.push(format!("\"{}\"", e.replace('"', "'")));
                cells
            }
        };
        csv.row(&cells)?;
    }
    csv.finish()?;
    if failures == rows.len() {
        return Err(CliError { code: EXIT_NUMERICAL, message: format!("all {failures} fits failed; see {}", path.display()) });
    }
    Ok(vec![path])
}

fn synthetic_fit(p: &crate::config::SyntheticPeak, cfg: &RunConfig) -> cavity_modes::Result<ResonanceFit> {
    let model = ResonanceFit::from_parameters(p.omega_m, p.kappa_m, p.l_n, 1)?;
    let half = cfg.fit.span_kappas * p.kappa_m;
    let count = (2.0 * cfg.fit.span_kappas * cfg.fit.per_kappa).ceil() as usize + 1;
    let grid = linspace(p.omega_m - half, p.omega_m + half, count);
    let values = grid.iter().map(|&w| model.lorentzian(w)).collect();
    let table = ResponseTable::from_samples(grid, values)?;
    fit_resonance(&table, p.omega_m)
}

#[derive(Serialize)]
struct Calibration<'a> {
    n_high: f64,
    target: f64,
    r_eff: f64,
    stack: StackSpec,
    fit: ResonanceFit,
    config: &'a RunConfig,
}

/// `calibrate-index`: dense-layer index giving the target reflectivity.
pub fn cmd_calibrate(cfg: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    ensure_dir(&cfg.out)?;
    let c = &cfg.calibration;
    let n_high = core("calibrate-index", calibrate_index(&cfg.stack, c.target, c.bracket, &cfg.fit))?;
    let stack = cfg.stack.with_index(n_high);
    let (fit, _) = core("calibrated stack", fit_near_design(&stack, &cfg.fit))?;
    println!("n_high = {n_high:.12} (r_eff = {:.6})", fit.r_eff);
    let path = cfg.out.join("calibration.json");
    write_json(&path, &Calibration { n_high, target: c.target, r_eff: fit.r_eff, stack, fit, config: cfg })?;
    Ok(vec![path])
}

#[derive(Serialize, Default)]
struct RunMetrics {
    norm_drift: f64,
    leak_out_time: Option<f64>,
    final_populations: Option<[f64; 4]>,
}

#[derive(Serialize)]
struct GridSummary {
    center: f64,
    half_width: f64,
    count: usize,
    spacing: f64,
    recurrence_time: f64,
}

#[derive(Serialize)]
struct SimulationSummary<'a> {
    config: &'a RunConfig,
    fit: ResonanceFit,
    validity: Validity,
    validity_holds: bool,
    g_m: f64,
    grid: GridSummary,
    integrator: IntegrationSettings,
    steps: usize,
    inout: Option<RunMetrics>,
    true_mode: Option<RunMetrics>,
    spectrum_stale: bool,
    l2_inout_vs_true: Option<f64>,
    l2_fourier_vs_inout: Option<f64>,
    max_population_mismatch: Option<f64>,
    photon_number: Option<f64>,
    profile_full_width: Option<f64>,
    profile_central_extent_90: Option<f64>,
}

fn resolve_grid(cfg: &RunConfig, fit: &ResonanceFit, t_max: f64) -> Result<Option<FrequencyGrid>, CliError> {
    if cfg.grid.half_width.is_none() && cfg.grid.count.is_none() {
        return Ok(None);
    }
    let auto = core("grid", FrequencyGrid::for_resonance(fit, t_max))?;
    let half_width = cfg.grid.half_width.unwrap_or(auto.half_width);
    let count = cfg.grid.count.unwrap_or_else(|| (2.0 * half_width / auto.spacing()).ceil() as usize + 1);
    Ok(Some(FrequencyGrid::new(fit.omega_m, half_width, count).map_err(|e| CliError::config("grid", e.to_string()))?))
}

fn run(model: cavity_modes::Result<Model>, rep: Representation, cfg: &RunConfig, plan: &RunPlan) -> Result<Trajectory, CliError> {
    let context = format!("{} run", rep.tag());
    let model = core(&context, model)?;
    let initial = cfg.preset.state(rep, plan.grid.count);
    core(&context, integrate(&model, &initial, &plan.settings))
}

fn spectrum(traj: &Trajectory, stale: &mut bool) -> Result<Vec<f64>, CliError> {
    match spectrum_outside(traj.final_state(), &traj.grid, false) {
        Err(Error::StaleState(msg)) => {
            warn!("{} spectrum taken before leak-out: {msg}", traj.representation.tag());
            *stale = true;
            core("spectrum", spectrum_outside(traj.final_state(), &traj.grid, true))
        }
        other => core("spectrum", other),
    }
}

fn metrics(traj: &Trajectory) -> RunMetrics {
    let last = populations(traj).last().map(|p| [p.p_g, p.p_e, p.p_f10, p.p_f01]);
    RunMetrics { norm_drift: traj.norm_drift(), leak_out_time: leak_out_time(traj, LEAK_THRESHOLD), final_populations: last }
}

/// `simulate`: emitter dynamics in one or both pictures, with observables.
pub fn cmd_simulate(cfg: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    ensure_dir(&cfg.out)?;
    let spec = cfg.stack;
    let (fit, _) = core("resonance fit", fit_near_design(&spec, &cfg.fit))?;
    let atom = cfg.atom.at(fit.omega_m);
    atom.validate(spec.ell_c).map_err(|e| CliError::config("atom", e.to_string()))?;
    let validity = fit.validity(atom.x_a, spec.ell_c);
    if !validity.holds() {
        warn!("single-mode validity products are not small: {validity:?}");
    }
    let t_max = cfg.integrator.t_max.unwrap_or_else(|| default_t_max(&fit, &atom, spec.ell_c));
    let grid = resolve_grid(cfg, &fit, t_max)?;
    let plan = plan_run(&fit, &atom, spec.ell_c, Some(t_max), cfg.integrator.dt, grid, cfg.integrator.snapshot_stride)
        .map_err(|e| CliError::config("integrator", e.to_string()))?;

    let want_inout = cfg.representation != RepresentationChoice::True;
    let want_true = cfg.representation != RepresentationChoice::Inout;
    let (inout, tm) = rayon::join(
        || want_inout.then(|| run(Model::inside_outside(&fit, spec.ell_c, &atom, &plan.grid), Representation::InsideOutside, cfg, &plan)),
        || want_true.then(|| run(Model::true_mode(&spec, &atom, &plan.grid), Representation::TrueMode, cfg, &plan)),
    );
    let inout = inout.transpose()?;
    let tm = tm.transpose()?;
    let wants = |k: OutputKind| cfg.outputs.contains(&k);
    let mut written = Vec::new();

    let steps = inout.as_ref().or(tm.as_ref()).map(|t| t.times.len() - 1).unwrap_or(0);
    if wants(OutputKind::Populations) {
        let path = cfg.out.join("populations.csv");
        let mut header = vec!["t".to_string()];
        if inout.is_some() {
            header.extend(["P_g", "P_e", "P_f10", "P_f01", "P_sum"].map(String::from));
        }
        if tm.is_some() {
            header.extend(["Pt_g", "Pt_e", "Pt_f1", "Pt_sum"].map(String::from));
        }
        let a = inout.as_ref().map(populations);
        let b = tm.as_ref().map(populations);
        let times = &inout.as_ref().or(tm.as_ref()).expect("at least one run").times;
        let stride = cfg.integrator.population_stride.unwrap_or_else(|| steps.div_ceil(2000).max(1));
        let mut csv = Csv::create(&path, &header)?;
        for k in (0..times.len()).filter(|&k| k % stride == 0 || k + 1 == times.len()) {
            let mut cells = vec![num(times[k])];
            if let Some(a) = &a {
                let p = &a[k];
                cells.extend([p.p_g, p.p_e, p.p_f10, p.p_f01, p.sum()].map(num));
            }
            if let Some(b) = &b {
                let p = &b[k];
                cells.extend([p.p_g, p.p_e, p.p_f01, p.sum()].map(num));
            }
            csv.row(&cells)?;
        }
        csv.finish()?;
        written.push(path);
    }

    let mut stale = false;
    let s_inout = inout.as_ref().map(|t| spectrum(t, &mut stale)).transpose()?;
    let s_true = tm.as_ref().map(|t| spectrum(t, &mut stale)).transpose()?;
    let diagnostics = wants(OutputKind::Spectrum) || wants(OutputKind::Diagnostics);
    let s_fourier = match inout.as_ref().filter(|_| diagnostics) {
        Some(t) => Some(match spectrum_fourier(t, fit.kappa_m, stale) {
            Err(Error::StaleState(msg)) => {
                warn!("Fourier estimate taken before leak-out: {msg}");
                stale = true;
                core("Fourier spectrum", spectrum_fourier(t, fit.kappa_m, true))?
            }
            other => core("Fourier spectrum", other)?,
        }),
        None => None,
    };
    if wants(OutputKind::Spectrum) {
        let path = cfg.out.join("spectrum.csv");
        let header = ["omega", "P_outs", "P_outs_fourier", "P_outs_true"].map(String::from);
        let mut csv = Csv::create(&path, &header)?;
        for (j, &w) in plan.grid.omegas.iter().enumerate() {
            csv.row(&[
                num(w),
                opt(s_inout.as_ref().map(|s| s[j])),
                opt(s_fourier.as_ref().map(|s| s.normalized[j])),
                opt(s_true.as_ref().map(|s| s[j])),
            ])?;
        }
        csv.finish()?;
        written.push(path);
    }

    let (mut n_out, mut width, mut extent) = (None, None, None);
    if let (true, Some(traj)) = (wants(OutputKind::Spatial), &inout) {
        let last = traj.final_state();
        let xs = default_positions(&plan.grid, last.t, cfg.spatial.margin_ell_eff * fit.ell_eff);
        let snaps = &traj.snapshots;
        let n = cfg.spatial.snapshots.min(snaps.len());
        let picks: Vec<usize> = if n == 1 {
            vec![snaps.len() - 1]
        } else {
            let mut p: Vec<usize> = (0..n).map(|i| (i * (snaps.len() - 1) + (n - 1) / 2) / (n - 1)).collect();
            p.dedup();
            p
        };
        let profiles: Vec<Vec<f64>> = picks
            .par_iter()
            .map(|&k| spatial_profile(&snaps[k], &fit, &plan.grid, &xs))
            .collect::<cavity_modes::Result<_>>()
            .map_err(|e| CliError::from_core("spatial profile", e))?;
        let final_phi = profiles.last().expect("at least one snapshot");
        n_out = Some(photon_number(&xs, final_phi));
        width = full_width(&xs, final_phi);
        extent = central_extent(&xs, final_phi, 0.9);

        let path = cfg.out.join("spatial.csv");
        let mut header = vec!["x".to_string()];
        header.extend(picks.iter().map(|&k| format!("phi_t{}", num(snaps[k].t))));
        let mut csv = Csv::create(&path, &header)?;
        for (i, &x) in xs.iter().enumerate() {
            let mut cells = vec![num(x)];
            cells.extend(profiles.iter().map(|p| num(p[i])));
            csv.row(&cells)?;
        }
        csv.finish()?;
        written.push(path);
    }

    let summary = SimulationSummary {
        config: cfg,
        fit,
        validity,
        validity_holds: validity.holds(),
        g_m: g_m(&fit, &atom, spec.ell_c),
        grid: GridSummary {
            center: plan.grid.center,
            half_width: plan.grid.half_width,
            count: plan.grid.count,
            spacing: plan.grid.spacing(),
            recurrence_time: plan.grid.recurrence_time(),
        },
        integrator: plan.settings,
        steps,
        inout: inout.as_ref().map(metrics),
        true_mode: tm.as_ref().map(metrics),
        spectrum_stale: stale,
        l2_inout_vs_true: s_inout.as_ref().zip(s_true.as_ref()).map(|(a, b)| l2_distance(a, b, &plan.grid)),
        l2_fourier_vs_inout: s_inout.as_ref().zip(s_fourier.as_ref()).map(|(a, f)| l2_distance(a, &f.normalized, &plan.grid)),
        max_population_mismatch: match (&tm, &inout) {
            (Some(t), Some(i)) => Some(core("population mismatch", population_mismatch(t, i))?),
            _ => None,
        },
        photon_number: n_out,
        profile_full_width: width,
        profile_central_extent_90: extent,
    };
    let path = cfg.out.join("summary.json");
    write_json(&path, &summary)?;
    written.push(path);
    Ok(written)
}
