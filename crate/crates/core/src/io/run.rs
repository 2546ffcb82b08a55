//! End-to-end execution of a [`RunConfig`] and its JSON report.

use std::path::{Path, PathBuf};

use serde_json::{json, Value};

use crate::analysis::{
    broadening, check_spacetime_snell, fit_worldline, fringe_period, settling_row, width_ratio, Direction,
    WorldlineFit,
};
use crate::dynamics::{evolve_spinor, evolve_step, row_observables, Evolution, Warning, ZeemanStep};
use crate::error::{Error, Result};
use crate::io::config::{Dispersion, Mode, Output, RunConfig, Scatterer};
use crate::io::csv::write_csv;
use crate::io::pgm::{render_heatmap, HeatmapSpec};
use crate::quadrature::KQuadrature;
use crate::ray::{
    predict_spinor_worldlines, predict_worldlines, snell_spacetime, snell_spatial, group_velocity, DispersiveMedium,
    RayPrediction,
};
use crate::units::{DensityField, GaussianSpectrum, Region, SpacetimeGrid, StepPotential};

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub report: Value,
    /// Files written, in order.
    pub files: Vec<PathBuf>,
}

impl RunOutcome {
    /// Pretty-printed report with a trailing newline.
    pub fn report_text(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.report).expect("report is valid JSON");
        s.push('\n');
        s
    }
}

/// Execute `config`, writing requested files into `out_dir`.
pub fn run(config: &RunConfig, out_dir: &Path) -> Result<RunOutcome> {
    let simulates = matches!(config.mode, Mode::Step | Mode::Spinor);
    if !simulates {
        for o in [Output::Csv, Output::Heatmap] {
            if config.wants(o) {
                return Err(Error::schema("outputs", format!("{o:?} output needs a step or spinor simulation")));
            }
        }
    }
    let mut files = Vec::new();
    if !config.outputs.is_empty() {
        std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    }
    let body = match config.mode {
        Mode::Snell => snell_report(config)?,
        Mode::Ray => json!({ "prediction": prediction_json(&predict(config)?) }),
        Mode::Step => step_run(config, out_dir, &mut files)?,
        Mode::Spinor => spinor_run(config, out_dir, &mut files)?,
    };
    let mut report = json!({
        "mode": config.mode,
        "inputs": Value::Object(config.to_document()),
    });
    if let (Value::Object(r), Value::Object(b)) = (&mut report, body) {
        r.extend(b);
    }
    let mut outcome = RunOutcome { report, files };
    if config.wants(Output::Report) {
        let path = out_dir.join("report.json");
        std::fs::write(&path, outcome.report_text()).map_err(|e| Error::io(&path, e))?;
        outcome.files.push(path);
    }
    Ok(outcome)
}

fn packet(config: &RunConfig) -> Result<GaussianSpectrum> {
    config.packet.ok_or_else(|| Error::schema("k0", "missing"))
}

fn quad(config: &RunConfig) -> Result<KQuadrature> {
    config.quad.ok_or_else(|| Error::schema("k0", "missing"))
}

fn step_of(config: &RunConfig) -> Result<StepPotential> {
    match config.scatterer {
        Some(Scatterer::Step(s)) => Ok(s),
        _ => Err(Error::schema("v2", "missing, required for the potential step")),
    }
}

fn predict(config: &RunConfig) -> Result<RayPrediction> {
    let p = packet(config)?;
    match config.scatterer {
        Some(Scatterer::Step(s)) => predict_worldlines(&p, &s),
        Some(Scatterer::Zeeman { zeeman, spinor }) => predict_spinor_worldlines(&p, &zeeman, spinor.population_up()),
        None => Err(Error::schema("v2", "missing, give v1/v2 or mu_b")),
    }
}

fn deg(rad: f64) -> f64 {
    rad.to_degrees()
}

fn prediction_json(p: &RayPrediction) -> Value {
    let rays: Vec<Value> = p
        .worldlines
        .iter()
        .map(|w| {
            let s = &w.segments[0];
            json!({
                "label": s.label,
                "slope": s.slope,
                "angle_deg": deg(s.angle()),
                "velocity": p.v0 / s.slope,
                "weight": s.weight,
                "start": s.start,
                "end": s.end(),
            })
        })
        .collect();
    json!({
        "v0": p.v0,
        "arrival_time": p.arrival_time(),
        "arrival": p.arrival,
        "total_reflection": p.total_reflection,
        "rays": rays,
    })
}

fn fit_json(fit: &WorldlineFit) -> Value {
    json!({
        "slope": fit.slope,
        "angle_deg": deg(fit.angle),
        "velocity": fit.velocity(),
        "intercept": fit.intercept,
        "residual": fit.residual,
        "window": [fit.window.0, fit.window.1],
        "rows": fit.rows,
    })
}

fn warnings_json(runs: &[(&str, &Evolution)]) -> Value {
    let mut out = Vec::new();
    for (channel, run) in runs {
        for w in &run.warnings {
            match w {
                Warning::NormLeakage { captured } => out.push(json!({
                    "kind": "norm_leakage",
                    "channel": channel,
                    "captured": captured,
                })),
            }
        }
    }
    Value::Array(out)
}

/// Largest `|norm - 1|` over all time rows.
pub fn max_norm_deviation(density: &DensityField) -> f64 {
    density
        .row_norms()
        .iter()
        .map(|n| (n - 1.0).abs())
        .fold(0.0, f64::max)
}

fn regional_norm(density: &DensityField, row: usize, region: Region) -> f64 {
    let xs = density.grid().xs();
    crate::dynamics::region_norm(&xs, density.row(row), region)
}

fn media_for_step(k0: f64, step: &StepPotential) -> Result<(f64, DispersiveMedium, DispersiveMedium)> {
    let omega = 0.5 * k0 * k0 + step.v1;
    Ok((
        omega,
        DispersiveMedium::quantum(step.v1, omega)?,
        DispersiveMedium::quantum(step.v2, omega)?,
    ))
}

fn snell_report(config: &RunConfig) -> Result<Value> {
    let s = config.snell;
    let theta1 = s.theta1_deg.to_radians();
    let (omega, v0, m1, m2) = match s.dispersion {
        Dispersion::Quantum => {
            let p = packet(config)?;
            let (omega, m1, m2) = media_for_step(p.k0, &step_of(config)?)?;
            (omega, (2.0 * omega).sqrt(), m1, m2)
        }
        Dispersion::Nondispersive => {
            let n1 = s.n1.ok_or_else(|| Error::schema("n1", "missing"))?;
            let n2 = s.n2.ok_or_else(|| Error::schema("n2", "missing"))?;
            let omega = config.packet.map_or(1.0, |p| 0.5 * p.k0 * p.k0);
            (omega, 1.0, DispersiveMedium::nondispersive(n1), DispersiveMedium::nondispersive(n2))
        }
    };
    let theta2 = snell_spacetime(&m1, &m2, omega, s.alpha_v, theta1)?;
    let spatial = match snell_spatial(m1.n, m2.n, theta1) {
        Ok(t) => json!(deg(t)),
        Err(Error::TotalInternalReflection { .. }) => Value::Null,
        Err(e) => return Err(e),
    };
    Ok(json!({
        "omega": omega,
        "v0": v0,
        "alpha_v": s.alpha_v,
        "medium1": m1,
        "medium2": m2,
        "group_velocity1": group_velocity(&m1, omega, s.alpha_v, v0)?,
        "group_velocity2": group_velocity(&m2, omega, s.alpha_v, v0)?,
        "theta1_deg": s.theta1_deg,
        "theta2_deg": deg(theta2),
        "spatial_theta2_deg": spatial,
        "bends_away_from_normal": theta2 > theta1,
    }))
}

fn heatmap_spec(config: &RunConfig, grid: &SpacetimeGrid) -> Result<HeatmapSpec> {
    let h = config.heatmap;
    HeatmapSpec::for_grid(grid, h.gamma, h.overlay_rays, h.normalization)
}

fn step_run(config: &RunConfig, out_dir: &Path, files: &mut Vec<PathBuf>) -> Result<Value> {
    let p = packet(config)?;
    let step = step_of(config)?;
    let grid = config.grid;
    let prediction = predict_worldlines(&p, &step)?;
    let run = evolve_step(&p, &step, &quad(config)?, &grid)?;
    let density = &run.density;
    let window = (grid.t_min, grid.t_max);
    let v0 = p.reference_speed();

    let incident = fit_worldline(density, Region::Left, Direction::Forward, window, v0)?;
    let reflected = fit_worldline(density, Region::Left, Direction::Backward, window, v0)?;
    let transmitted = if prediction.total_reflection {
        None
    } else {
        Some(fit_worldline(density, Region::Right, Direction::Forward, window, v0)?)
    };

    let snell = match (&transmitted, media_for_step(p.k0, &step)) {
        (Some(t), Ok((omega, m1, m2))) => {
            let predicted = snell_spacetime(&m1, &m2, omega, 2.0, incident.angle)?;
            json!({
                "n1": m1.n,
                "n2": m2.n,
                "discrepancy": check_spacetime_snell(&incident, t, &m1, &m2),
                "predicted_theta2_deg": deg(predicted),
                "measured_theta2_deg": deg(t.angle),
            })
        }
        _ => Value::Null,
    };

    let last = grid.nt - 1;
    let initial = row_observables(density, 0, Region::All)?;
    let final_transmitted = row_observables(density, last, Region::Right).ok();
    let arrival_row = grid.nearest_row(prediction.arrival_time());
    let expected_fringe = std::f64::consts::PI / p.k0;
    let fringe = fringe_period(&grid.xs(), density.row(arrival_row), Region::Left, 4.0 * expected_fringe)
        .map_or(Value::Null, |v| json!(v));

    write_fields(config, out_dir, files, &[("density", density)], &prediction, density.max())?;

    Ok(json!({
        "prediction": prediction_json(&prediction),
        "fits": {
            "incident": fit_json(&incident),
            "reflected": fit_json(&reflected),
            "transmitted": transmitted.as_ref().map(fit_json),
        },
        "snell_check": snell,
        "norms": {
            "captured": run.captured_norm,
            "max_deviation": max_norm_deviation(density),
            "final_reflected": regional_norm(density, last, Region::Left),
            "final_transmitted": regional_norm(density, last, Region::Right),
        },
        "widths": {
            "initial": initial.rms_width,
            "initial_centroid": initial.centroid,
            "final_transmitted": final_transmitted.map(|m| m.rms_width),
            "final_transmitted_centroid": final_transmitted.map(|m| m.centroid),
        },
        "fringe": {
            "time": grid.ts()[arrival_row],
            "period": fringe,
            "expected": expected_fringe,
        },
        "broadening": broadening(&p, config.distance.unwrap_or(p.x0.abs()))?,
        "warnings": warnings_json(&[("scalar", &run)]),
    }))
}

fn channel_json(run: &Evolution, predicted_velocity: f64, predicted_ratio: f64, v0: f64, initial_width: f64) -> Result<Value> {
    let d = &run.density;
    let grid = d.grid();
    let fit = fit_worldline(d, Region::Right, Direction::Forward, (grid.t_min, grid.t_max), v0)?;
    let last = grid.nt - 1;
    let settled = settling_row(d, Region::Right)
        .ok_or_else(|| Error::IllConditionedFit("transmitted lobe never settles".into()))?;
    let at_settle = row_observables(d, settled, Region::Right)?;
    let at_end = row_observables(d, last, Region::Right)?;
    Ok(json!({
        "fit": fit_json(&fit),
        "predicted_velocity": predicted_velocity,
        "predicted_width_ratio": predicted_ratio,
        "settle_time": grid.ts()[settled],
        "width_at_settle": at_settle.rms_width,
        "width_ratio_at_settle": at_settle.rms_width / initial_width,
        "final_centroid": at_end.centroid,
        "final_width": at_end.rms_width,
        "final_width_ratio": at_end.rms_width / initial_width,
        "transmitted_norm": at_end.norm,
    }))
}

fn spinor_run(config: &RunConfig, out_dir: &Path, files: &mut Vec<PathBuf>) -> Result<Value> {
    let p = packet(config)?;
    let (zeeman, spinor) = match config.scatterer {
        Some(Scatterer::Zeeman { zeeman, spinor }) => (zeeman, spinor),
        _ => return Err(Error::schema("mu_b", "missing, required in spinor mode")),
    };
    let grid = config.grid;
    let prediction = predict_spinor_worldlines(&p, &zeeman, spinor.population_up())?;
    let evo = evolve_spinor(&spinor, &zeeman, &quad(config)?, &grid)?;
    let v0 = p.reference_speed();
    let (ratio_up, ratio_down) = width_ratio(p.k0, &zeeman)?;
    let initial = row_observables(&evo.total, 0, Region::All)?;
    let speed = |z: &ZeemanStep, up: bool| {
        let s = if up { z.up_channel() } else { z.down_channel() };
        (p.k0 * p.k0 - 2.0 * s.height()).sqrt()
    };
    let up = channel_json(&evo.up_run, speed(&zeeman, true), ratio_up, v0, initial.rms_width)?;
    let down = channel_json(&evo.down_run, speed(&zeeman, false), ratio_down, v0, initial.rms_width)?;

    let separation = {
        let cu = up["final_centroid"].as_f64().unwrap_or(f64::NAN);
        let cd = down["final_centroid"].as_f64().unwrap_or(f64::NAN);
        let wu = up["final_width"].as_f64().unwrap_or(f64::NAN);
        let wd = down["final_width"].as_f64().unwrap_or(f64::NAN);
        let combined = wu.hypot(wd);
        json!({
            "time": grid.t_max,
            "distance": (cu - cd).abs(),
            "combined_width": combined,
            "in_combined_widths": (cu - cd).abs() / combined,
        })
    };

    let rho_ref = evo.total.max();
    write_fields(
        config,
        out_dir,
        files,
        &[("density", &evo.total), ("density_up", &evo.up), ("density_down", &evo.down)],
        &prediction,
        rho_ref,
    )?;

    let last = grid.nt - 1;
    Ok(json!({
        "prediction": prediction_json(&prediction),
        "channels": { "up": up, "down": down },
        "separation": separation,
        "norms": {
            "captured_up": evo.up_run.captured_norm,
            "captured_down": evo.down_run.captured_norm,
            "max_deviation": max_norm_deviation(&evo.total),
            "final_reflected": regional_norm(&evo.total, last, Region::Left),
            "final_transmitted": regional_norm(&evo.total, last, Region::Right),
            "final_transmitted_up": regional_norm(&evo.up, last, Region::Right),
            "final_transmitted_down": regional_norm(&evo.down, last, Region::Right),
        },
        "widths": { "initial": initial.rms_width },
        "broadening": broadening(&p, config.distance.unwrap_or(p.x0.abs()))?,
        "warnings": warnings_json(&[("up", &evo.up_run), ("down", &evo.down_run)]),
    }))
}

fn write_fields(
    config: &RunConfig,
    out_dir: &Path,
    files: &mut Vec<PathBuf>,
    fields: &[(&str, &DensityField)],
    prediction: &RayPrediction,
    global_ref: f64,
) -> Result<()> {
    if config.wants(Output::Csv) {
        for (name, d) in fields {
            let path = out_dir.join(format!("{name}.csv"));
            write_csv(d, &path)?;
            files.push(path);
        }
    }
    if config.wants(Output::Heatmap) {
        let spec = heatmap_spec(config, &config.grid)?;
        for (name, d) in fields {
            let path = out_dir.join(format!("{name}.pgm"));
            render_heatmap(d, &spec, Some(&prediction.worldlines), Some(global_ref), &path)?;
            files.push(path);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::config::parse_config;

    #[test]
    fn snell_fig2_quantum() {
        let c = parse_config(r#"{"mode": "snell", "preset": "fig2"}"#).unwrap();
        let r = run(&c, Path::new("unused")).unwrap().report;
        let t2 = r["theta2_deg"].as_f64().unwrap();
        assert!((t2 - 72.90).abs() < 5e-3, "{t2}");
        assert_eq!(r["bends_away_from_normal"], json!(true));
        // n2 < n1 sin(45 deg): no refracted ray in space
        assert!(r["spatial_theta2_deg"].is_null());
    }

    #[test]
    fn snell_nondispersive_bends_toward() {
        let c = parse_config(r#"{"mode": "snell", "dispersion": "nondispersive", "n1": 1.0, "n2": 0.8}"#).unwrap();
        let r = run(&c, Path::new("unused")).unwrap().report;
        assert_eq!(r["bends_away_from_normal"], json!(false));
        let t2 = r["theta2_deg"].as_f64().unwrap();
        assert!((t2 - 0.8f64.atan().to_degrees()).abs() < 1e-12);
    }

    #[test]
    fn snell_below_barrier_is_domain_error() {
        let c = parse_config(r#"{"mode": "snell", "k0": 1.5, "v2": 2.5}"#).unwrap();
        let e = run(&c, Path::new("unused")).unwrap_err();
        assert!(matches!(e, Error::EvanescentRegime(_)));
        assert_eq!(e.exit_code(), 3);
    }

    #[test]
    fn ray_mode_fig2() {
        let c = parse_config(r#"{"mode": "ray", "preset": "fig2"}"#).unwrap();
        let r = run(&c, Path::new("unused")).unwrap().report;
        let rays = r["prediction"]["rays"].as_array().unwrap();
        assert_eq!(rays.len(), 3);
        let t = r["prediction"]["arrival_time"].as_f64().unwrap();
        assert!((t - 30.0 / 2.35).abs() < 1e-12);
        assert_eq!(r["inputs"]["k0"], json!(2.35));
    }

    #[test]
    fn ray_mode_rejects_field_outputs() {
        let c = parse_config(r#"{"mode": "ray", "preset": "fig2", "outputs": ["csv"]}"#).unwrap();
        assert!(matches!(run(&c, Path::new("unused")), Err(Error::Schema { .. })));
    }
}
