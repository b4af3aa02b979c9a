use std::f64::consts::TAU;
use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde_json::{json, Value};

use sodec_core::correlate::{g2_compact_grid, g2_grid, TwoAtomState};
use sodec_core::evolve::{
    decoherence_from_row, propagate, reduced_density, uniform_times, DecoherenceCurve,
    DEFAULT_SAMPLES,
};
use sodec_core::experiments::{
    continuum_check, continuum_point, figure1_scan, figure1_times, figure2_scan, figure2_times,
    CombPlacement, ContinuumOptions, Figure2Options, ScanResult, FIG1_COUPLING, FIG1_OMEGA_E,
    FIG1_OMEGA_J, FIG2_COUPLING, FIG2_HALF_BANDWIDTH,
};
use sodec_core::features::{extract_features, Thresholds};
use sodec_core::model::{
    build_comb, validated, CombSpec, MeasurementCoeffs, ModelConfig, ModelParams, ReservoirMode,
    SpectralDensity,
};
use sodec_core::oracle::{
    build_full_hamiltonian, oracle_factor_capped, single_mode_initial, vacuum_initial, FockSpace,
    DEFAULT_STATE_CAP,
};
use sodec_core::resolvent::{
    exponential_law, invert_fourier, multi_mode_resolvent, resonant_closed_form,
    single_mode_resolvent, wigner_weisskopf, InversionOptions,
};
use sodec_core::subspace::{build_multi_mode, build_single_mode, SubspaceSystem};

use crate::failure::Failure;
use crate::output::{sha256_hex, Run};
use crate::{
    ContinuumArgs, CorrelationArgs, DumpArgs, Figure, MultiModeArgs, Placement, ReproduceArgs,
    SingleModeArgs, SingleModeModel, TimeArgs, VerifyArgs,
};

/// Oracle comparisons above this deviation fail the run.
pub const ORACLE_TOL: f64 = 1e-10;

const SINGLE_MODE_T_MAX: f64 = 800.0;
const MULTI_MODE_T_MAX: f64 = 200.0;

fn load_config(path: Option<&Path>) -> Result<(ModelConfig, Option<String>), Failure> {
    let Some(path) = path else {
        return Ok((ModelConfig::default(), None));
    };
    let bytes = fs::read(path)
        .map_err(|e| Failure::config(format!("cannot read config {}: {e}", path.display())))?;
    let text = String::from_utf8(bytes.clone())
        .map_err(|_| Failure::config(format!("config {} is not UTF-8", path.display())))?;
    Ok((ModelConfig::from_json(&text)?, Some(sha256_hex(&bytes))))
}

fn time_grid(args: &TimeArgs, default_t_max: f64) -> Result<Vec<f64>, Failure> {
    let t_max = args.t_max.unwrap_or(default_t_max);
    let samples = args.samples.unwrap_or(DEFAULT_SAMPLES);
    if !(t_max.is_finite() && t_max > 0.0) {
        return Err(Failure::config(format!(
            "--t-max must be positive, got {t_max}"
        )));
    }
    if samples < 2 {
        return Err(Failure::config(format!(
            "--samples must be at least 2, got {samples}"
        )));
    }
    Ok(uniform_times(t_max, samples))
}

/// Single reservoir mode from config and flags; flags win.
fn single_mode_params(m: &SingleModeModel, cfg: &ModelConfig) -> Result<ModelParams, Failure> {
    let modes = cfg.reservoir(false)?;
    if modes.len() > 1 {
        return Err(Failure::config(format!(
            "single-mode needs one reservoir mode, config has {}",
            modes.len()
        )));
    }
    let base = modes.first().copied();
    let omega_e = m.omega_e.or(cfg.omega_e).unwrap_or(FIG1_OMEGA_E);
    let omega_j = m.omega_j.or(base.map(|b| b.omega)).unwrap_or(FIG1_OMEGA_J);
    let d = m.d.or(base.map(|b| b.coupling)).unwrap_or(FIG1_COUPLING);
    let measurement = cfg.measurement.map(Into::into).unwrap_or_default();
    Ok(validated(
        ModelParams::single_mode(omega_e, omega_j, d).with_measurement(measurement),
    )?)
}

fn parse_mode(text: &str) -> Result<ReservoirMode, Failure> {
    let (w, d) = text
        .split_once(':')
        .ok_or_else(|| Failure::config(format!("--mode expects OMEGA:D, got `{text}`")))?;
    let parse = |s: &str| {
        s.trim()
            .parse::<f64>()
            .map_err(|_| Failure::config(format!("--mode expects OMEGA:D, got `{text}`")))
    };
    Ok(ReservoirMode::new(parse(w)?, parse(d)?))
}

fn multi_mode_params(
    a: &MultiModeArgs,
    cfg: &ModelConfig,
) -> Result<(ModelParams, Option<CombSpec>), Failure> {
    let omega_e = a.omega_e.or(cfg.omega_e).unwrap_or(FIG1_OMEGA_E);
    let c = &a.comb;
    let comb_flags = c.comb_count.is_some()
        || c.comb_center.is_some()
        || c.comb_half_bandwidth.is_some()
        || c.comb_coupling.is_some();
    let (modes, comb) = if !c.modes.is_empty() {
        (
            c.modes
                .iter()
                .map(|m| parse_mode(m))
                .collect::<Result<Vec<_>, _>>()?,
            None,
        )
    } else if comb_flags || cfg.comb.is_some() {
        let base = cfg.comb;
        let count = c
            .comb_count
            .or(base.map(|b| b.count))
            .ok_or_else(|| Failure::config("comb needs --comb-count"))?;
        let spec = CombSpec {
            center: c.comb_center.or(base.map(|b| b.center)).unwrap_or(omega_e),
            half_bandwidth: c
                .comb_half_bandwidth
                .or(base.map(|b| b.half_bandwidth))
                .unwrap_or(FIG2_HALF_BANDWIDTH),
            count,
            coupling: c
                .comb_coupling
                .or(base.map(|b| b.coupling))
                .unwrap_or(FIG2_COUPLING),
        };
        (build_comb(&spec)?, Some(spec))
    } else {
        (cfg.reservoir(true)?, None)
    };
    let measurement = cfg.measurement.map(Into::into).unwrap_or_default();
    Ok((
        validated(ModelParams::new(omega_e, modes).with_measurement(measurement))?,
        comb,
    ))
}

/// Writes the requested verification curves next to `evolution`. Returns a
/// failure to raise after the manifest is written, if the oracle disagrees.
#[allow(clippy::too_many_arguments)]
fn verify_extras(
    run: &mut Run,
    report: &mut Value,
    stem: &str,
    evolution: &DecoherenceCurve,
    params: &ModelParams,
    photon_number: Option<u32>,
    verify: &VerifyArgs,
) -> Result<Option<Failure>, Failure> {
    let times = &evolution.times;
    if verify.closed_form {
        let n = photon_number
            .ok_or_else(|| Failure::config("--closed-form applies to single-mode runs only"))?;
        let curve = resonant_closed_form(params, n, times)?;
        run.curve_csv(&format!("{stem}_closed_form.csv"), &curve)?;
        report["closed_form_max_deviation"] = json!(curve.max_deviation(evolution));
    }
    if verify.resolvent_inversion {
        let res = match photon_number {
            Some(n) => single_mode_resolvent(params, n)?,
            None => multi_mode_resolvent(params)?,
        };
        let curve = invert_fourier(&res, times, &InversionOptions::default())?;
        run.curve_csv(&format!("{stem}_resolvent_inversion.csv"), &curve)?;
        report["resolvent_inversion_max_deviation"] = json!(curve.max_deviation(evolution));
    }
    let mut pending = None;
    if verify.oracle {
        let initial = match photon_number {
            Some(n) => single_mode_initial(n),
            None => vacuum_initial(params.modes.len()),
        };
        let curve = oracle_factor_capped(params, &initial, times, verify.oracle_cap)?;
        run.curve_csv(&format!("{stem}_oracle.csv"), &curve)?;
        let dev = curve.max_deviation(evolution);
        report["oracle_max_deviation"] = json!(dev);
        report["oracle_tolerance"] = json!(ORACLE_TOL);
        report["oracle_within_tolerance"] = json!(dev <= ORACLE_TOL);
        if dev > ORACLE_TOL {
            pending = Some(Failure::numeric(format!(
                "oracle deviation {dev:e} exceeds {ORACLE_TOL:e}"
            )));
        }
    }
    Ok(pending)
}

fn methods(verify: &VerifyArgs) -> Vec<&'static str> {
    let mut m = vec!["evolution"];
    if verify.closed_form {
        m.push("closed_form_resonant");
    }
    if verify.resolvent_inversion {
        m.push("resolvent_inversion");
    }
    if verify.oracle {
        m.push("full_space_oracle");
    }
    m
}

fn evolve_and_report(
    system: &SubspaceSystem,
    times: &[f64],
) -> Result<(DecoherenceCurve, Value), Failure> {
    let row = propagate(system, system.initial_label(), times)?;
    let curve = decoherence_from_row(system, &row);
    let features = extract_features(&curve.times, &curve.factor, &Thresholds::default())?;
    let report = json!({ "norm_deviation": row.norm_deviation(), "features": features });
    Ok((curve, report))
}

pub fn single_mode(out: &Path, a: SingleModeArgs) -> Result<PathBuf, Failure> {
    let (cfg, digest) = load_config(a.model.config.as_deref())?;
    let params = single_mode_params(&a.model, &cfg)?;
    let times = time_grid(&a.time, SINGLE_MODE_T_MAX)?;
    let n = a.model.n;
    let system = build_single_mode(&params, n)?;
    let (curve, mut report) = evolve_and_report(&system, &times)?;
    let mut run = Run::new("single-mode", out)?;
    let stem = format!("single_mode_N{n}");
    run.curve_csv(&format!("{stem}_evolution.csv"), &curve)?;
    let pending = verify_extras(
        &mut run,
        &mut report,
        &stem,
        &curve,
        &params,
        Some(n),
        &a.verify,
    )?;
    let parameters = json!({
        "params": params,
        "photon_number": n,
        "t_max": times[times.len() - 1],
        "samples": times.len(),
        "methods": methods(&a.verify),
    });
    let path = run.finish(parameters, digest, report)?;
    pending.map_or(Ok(path), Err)
}

pub fn multi_mode(out: &Path, a: MultiModeArgs) -> Result<PathBuf, Failure> {
    if a.verify.closed_form {
        return Err(Failure::config(
            "--closed-form applies to single-mode runs only",
        ));
    }
    let (cfg, digest) = load_config(a.config.as_deref())?;
    let (params, comb) = multi_mode_params(&a, &cfg)?;
    let times = time_grid(&a.time, MULTI_MODE_T_MAX)?;
    let system = build_multi_mode(&params)?;
    let (curve, mut report) = evolve_and_report(&system, &times)?;
    let mut run = Run::new("multi-mode", out)?;
    let stem = format!("multi_mode_M{}", params.modes.len());
    run.curve_csv(&format!("{stem}_evolution.csv"), &curve)?;
    let pending = verify_extras(
        &mut run,
        &mut report,
        &stem,
        &curve,
        &params,
        None,
        &a.verify,
    )?;
    let parameters = json!({
        "params": params,
        "comb": comb,
        "t_max": times[times.len() - 1],
        "samples": times.len(),
        "methods": methods(&a.verify),
    });
    let path = run.finish(parameters, digest, report)?;
    pending.map_or(Ok(path), Err)
}

pub fn continuum(out: &Path, a: ContinuumArgs) -> Result<PathBuf, Failure> {
    let support = (a.omega_e - a.below, a.omega_e + a.above);
    let sd = SpectralDensity::flat(a.rho, a.d, support)?;
    let ww = wigner_weisskopf(&sd, a.omega_e)?;
    let default_t_max = if ww.gamma_e > 0.0 {
        5.0 / ww.gamma_e
    } else {
        100.0
    };
    let times = time_grid(&a.time, default_t_max)?;
    let mut run = Run::new("continuum", out)?;
    run.curve_csv("continuum_exponential.csv", &exponential_law(&ww, &times)?)?;
    let mut report = json!({
        "gamma_e": ww.gamma_e,
        "delta_e": ww.delta_e,
        "delta_e_error": ww.delta_e_error,
    });
    let mut comb_spec = None;
    if let Some(count) = a.comb_count {
        if count < 2 {
            return Err(Failure::config("--comb-count must be at least 2"));
        }
        let spec = CombSpec {
            center: a.omega_e,
            half_bandwidth: (count - 1) as f64 / (2.0 * a.rho),
            count,
            coupling: a.d,
        };
        let params = validated(ModelParams::new(a.omega_e, build_comb(&spec)?))?;
        let system = build_multi_mode(&params)?;
        let row = propagate(&system, system.initial_label(), &times)?;
        run.curve_csv(
            "continuum_comb_evolution.csv",
            &decoherence_from_row(&system, &row),
        )?;
        let window = 0.5 * TAU * a.rho;
        let fit = continuum_point(
            format!("comb_M{count}"),
            spec,
            a.omega_e,
            window,
            DEFAULT_SAMPLES,
            &Thresholds::default(),
        )?;
        report["comb_fit"] = serde_json::to_value(&fit).map_err(|e| Failure::io(e.to_string()))?;
        comb_spec = Some(spec);
    }
    let parameters = json!({
        "omega_e": a.omega_e,
        "rho": a.rho,
        "d": a.d,
        "support": [support.0, support.1],
        "comb": comb_spec,
        "t_max": times[times.len() - 1],
        "samples": times.len(),
    });
    run.finish(parameters, None, report)
}

fn parse_weights(text: &str) -> Result<TwoAtomState, Failure> {
    let parts: Vec<f64> = text
        .split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| Failure::config(format!("--weights expects three numbers, got `{text}`")))?;
    match parts[..] {
        [u, m, l] => Ok(TwoAtomState::new(u, m, l)?),
        _ => Err(Failure::config(format!(
            "--weights expects three numbers, got `{text}`"
        ))),
    }
}

pub fn correlation(out: &Path, a: CorrelationArgs) -> Result<PathBuf, Failure> {
    let (cfg, digest) = load_config(a.model.config.as_deref())?;
    let omega_e = a.model.omega_e.or(cfg.omega_e).unwrap_or(FIG1_OMEGA_E);
    let flags_given = [a.c1_re, a.c1_im, a.c2_re, a.c2_im]
        .iter()
        .any(Option::is_some);
    let coeffs = if flags_given {
        MeasurementCoeffs::new(
            Complex64::new(a.c1_re.unwrap_or(0.0), a.c1_im.unwrap_or(0.0)),
            Complex64::new(a.c2_re.unwrap_or(0.0), a.c2_im.unwrap_or(0.0)),
        )
    } else {
        cfg.measurement.map(Into::into).unwrap_or_default()
    };
    validated(ModelParams::new(omega_e, Vec::new()).with_measurement(coeffs))?;

    let mut source = json!({});
    let state = match (a.p_mid, &a.weights, a.at) {
        (Some(p), None, None) => TwoAtomState::from_mid_weight(p)?,
        (None, Some(w), None) => parse_weights(w)?,
        (None, None, Some(t)) => {
            let multi = cfg.reservoir(false)?.len() > 1;
            let system = if multi {
                build_multi_mode(&cfg.into_params(true)?)?
            } else {
                build_single_mode(&single_mode_params(&a.model, &cfg)?, a.model.n)?
            };
            source = json!({
                "params": system.params,
                "photon_number": system.photon_number,
                "interaction_time": t,
            });
            TwoAtomState::try_from(reduced_density(&system, t)?)?
        }
        _ => {
            return Err(Failure::config(
                "give exactly one of --p-mid, --weights, --at",
            ))
        }
    };
    if a.grid == 0 {
        return Err(Failure::config("--grid must be at least 1"));
    }
    let t_max = a.t_max.unwrap_or(2.0 * TAU / omega_e);
    if !(t_max.is_finite() && t_max >= 0.0) {
        return Err(Failure::config(format!(
            "--t-max must be non-negative, got {t_max}"
        )));
    }
    let axis = uniform_times(t_max, a.grid);
    let grid = g2_grid(&state, coeffs, omega_e, &axis, &axis)?;
    let mut run = Run::new("correlation", out)?;
    run.grid_csv("correlation_grid.csv", &grid)?;
    let mut report = json!({
        "p_mid": state.p_mid(),
        "weights": state.weights,
        "visibility": grid.visibility(),
        "min": grid.min(),
        "max": grid.max(),
    });
    if coeffs.is_balanced() {
        let compact = g2_compact_grid(state.p_mid(), omega_e, &axis, &axis)?;
        report["compact_max_deviation"] = json!(grid.max_deviation(&compact));
    }
    let parameters = json!({
        "omega_e": omega_e,
        "measurement": coeffs,
        "t_max": t_max,
        "grid": a.grid,
        "state_source": source,
    });
    run.finish(parameters, digest, report)
}

fn thresholds(a: &ReproduceArgs) -> Thresholds {
    let d = Thresholds::default();
    Thresholds {
        collapse: a.collapse_threshold.unwrap_or(d.collapse),
        revival: a.revival_threshold.unwrap_or(d.revival),
        fit_floor: a.fit_floor.unwrap_or(d.fit_floor),
    }
}

fn strictly_increasing(values: &[Option<f64>]) -> bool {
    values
        .windows(2)
        .all(|w| matches!((w[0], w[1]), (Some(a), Some(b)) if b > a))
}

fn write_scan_curves(run: &mut Run, scan: &ScanResult) -> Result<(), Failure> {
    for c in &scan.curves {
        run.curve_csv(&format!("{}.csv", c.label), &c.curve)?;
    }
    let features: Vec<Value> = scan
        .curves
        .iter()
        .map(|c| {
            json!({
                "label": c.label,
                "photon_number": c.photon_number,
                "comb": c.comb,
                "params_digest": c.curve.params_digest,
                "norm_deviation": c.norm_deviation,
                "features": c.features,
                "cosine_fit": c.cosine_fit,
            })
        })
        .collect();
    run.json(&format!("{}_features.json", scan.label), &features)
}

pub fn reproduce(out: &Path, a: ReproduceArgs) -> Result<PathBuf, Failure> {
    let th = thresholds(&a);
    let custom_times = a.time.t_max.is_some() || a.time.samples.is_some();
    let mut run = Run::new("reproduce", out)?;
    let (parameters, report) = match a.figure {
        Figure::Fig1 => {
            let times = if custom_times {
                time_grid(&a.time, 800.0)?
            } else {
                figure1_times()
            };
            let scan = figure1_scan(&times, &th)?;
            write_scan_curves(&mut run, &scan)?;
            let freqs: Vec<Option<f64>> = scan
                .curves
                .iter()
                .map(|c| c.features.dominant_frequency)
                .collect();
            let report = json!({
                "dominant_frequencies": freqs,
                "frequencies_strictly_increasing": strictly_increasing(&freqs),
                "vacuum_cosine_max_residual": scan.curves[0].cosine_fit.map(|f| f.max_residual),
                "min_factors": scan.curves.iter().map(|c| c.features.min_factor).collect::<Vec<_>>(),
            });
            (
                json!({ "figure": "fig1", "thresholds": th, "t_max": times[times.len() - 1], "samples": times.len() }),
                report,
            )
        }
        Figure::Fig2 => {
            let times = if custom_times {
                time_grid(&a.time, 200.0)?
            } else {
                figure2_times()
            };
            let placement = match a.placement {
                Placement::OnGrid => CombPlacement::OnGrid,
                Placement::OffGrid => CombPlacement::OffGrid,
            };
            let opts = Figure2Options {
                placement,
                thresholds: th,
                ..Default::default()
            };
            let scan = figure2_scan(&times, &opts)?;
            write_scan_curves(&mut run, &scan)?;
            let revivals: Vec<Option<f64>> = scan
                .curves
                .iter()
                .map(|c| c.features.revival_time)
                .collect();
            let collapses: Vec<Option<f64>> = scan
                .curves
                .iter()
                .map(|c| c.features.collapse_time)
                .collect();
            let rephasing: Vec<Option<f64>> = scan
                .curves
                .iter()
                .map(|c| c.comb.and_then(|s| s.spacing()).map(|d| TAU / d))
                .collect();
            let report = json!({
                "revival_times": revivals,
                "revival_strictly_increasing": strictly_increasing(&revivals),
                "rephasing_times": rephasing,
                "collapse_times": collapses,
            });
            (
                json!({ "figure": "fig2", "options": opts, "t_max": times[times.len() - 1], "samples": times.len() }),
                report,
            )
        }
        Figure::Continuum => {
            let mut opts = ContinuumOptions {
                thresholds: th,
                ..Default::default()
            };
            if let Some(s) = a.time.samples {
                opts.samples = s;
            }
            let scan = continuum_check(&opts)?;
            let rows: Vec<Vec<Option<f64>>> = scan
                .continuum
                .iter()
                .map(|p| {
                    vec![
                        Some(p.spacing),
                        Some(p.density),
                        Some(p.comb.count as f64),
                        Some(p.comb.coupling),
                        Some(p.gamma_ww),
                        p.gamma_fit,
                        p.relative_error,
                        p.r_squared,
                        p.window_end,
                        p.stimulation_ratio,
                    ]
                })
                .collect();
            run.table_csv(
                "continuum_fits.csv",
                &[
                    "spacing",
                    "density",
                    "modes",
                    "coupling",
                    "gamma_ww",
                    "gamma_fit",
                    "relative_error",
                    "r_squared",
                    "window_end",
                    "stimulation_ratio",
                ],
                &rows,
            )?;
            run.json("continuum_features.json", &scan.continuum)?;
            let report = json!({
                "relative_errors": scan.continuum.iter().map(|p| p.relative_error).collect::<Vec<_>>(),
                "stimulation_ratios": scan.continuum.iter().map(|p| p.stimulation_ratio).collect::<Vec<_>>(),
                "fit_errors": scan.continuum.iter().map(|p| p.fit_error.clone()).collect::<Vec<_>>(),
            });
            (json!({ "figure": "continuum", "options": opts }), report)
        }
    };
    run.finish(parameters, None, report)
}

pub fn dump_hamiltonian(out: &Path, a: DumpArgs) -> Result<PathBuf, Failure> {
    let (cfg, digest) = load_config(a.model.config.as_deref())?;
    let system = if cfg.reservoir(false)?.len() > 1 {
        build_multi_mode(&cfg.into_params(true)?)?
    } else {
        build_single_mode(&single_mode_params(&a.model, &cfg)?, a.model.n)?
    };
    let mut run = Run::new("dump-hamiltonian", out)?;
    let report = if a.full {
        let initial = match system.photon_number {
            Some(n) => single_mode_initial(n),
            None => vacuum_initial(system.params.modes.len()),
        };
        let space = FockSpace::for_initial(&initial, DEFAULT_STATE_CAP)?;
        let h = build_full_hamiltonian(&system.params, &space)?;
        let matrix: Vec<Vec<f64>> = h.row_iter().map(|r| r.iter().copied().collect()).collect();
        run.json(
            "hamiltonian_full.json",
            &json!({ "occupation_order": "n_g, n_e, n_1..n_M", "basis": space.basis, "matrix": matrix }),
        )?;
        json!({ "dimension": space.dim(), "unfiltered_dimension": space.unfiltered_dimension })
    } else {
        let h = &system.hamiltonian;
        let labels: Vec<String> = system.basis.iter().map(|b| b.to_string()).collect();
        let real: Vec<Vec<f64>> = h
            .row_iter()
            .map(|r| r.iter().map(|z| z.re).collect())
            .collect();
        let imag: Vec<Vec<f64>> = h
            .row_iter()
            .map(|r| r.iter().map(|z| z.im).collect())
            .collect();
        run.json(
            "hamiltonian.json",
            &json!({ "basis": labels, "real": real, "imag": imag }),
        )?;
        json!({ "dimension": system.dim(), "hermiticity_deviation": system.hermiticity_deviation() })
    };
    let parameters = json!({
        "params": system.params,
        "photon_number": system.photon_number,
        "full": a.full,
    });
    run.finish(parameters, digest, report)
}
