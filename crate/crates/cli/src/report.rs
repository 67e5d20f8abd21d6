//! `fit`, `bounds` and `wigner`: from data to parameter estimates.

use std::fs::File;
use std::io::BufReader;
use std::path::PathBuf;

use fluctlab::estimate::{
    bounds_report, ellipticity_from_wigner, fit_exp_decay, fit_ramsey, BoundsInputs, DeviceProfile,
    Measured, Propagation, TimeSeriesDataset, HBAR_16UG,
};
use fluctlab::fock::{self, DensityMatrix, GridSpec};
use fluctlab::generators;
use fluctlab::linalg;
use serde_json::{json, Value};

use crate::config::Config;
use crate::error::{config_err, CliError, CliResult};
use crate::output::{json_text, with_suffix, write_json};
use crate::run::InitialState;

const US: f64 = 1e-6;

/// Writes `summary` to `<output>.json`, or prints it when no output is set.
fn emit(output: Option<PathBuf>, summary: &Value) -> CliResult<()> {
    match output {
        Some(prefix) => {
            let path = with_suffix(&prefix, ".json");
            write_json(&path, summary)?;
            println!("wrote {}", path.display());
        }
        None => print!("{}", json_text(summary)),
    }
    Ok(())
}

pub fn fit(mut cfg: Config) -> CliResult<()> {
    let model: String = cfg.required("model")?;
    let (fitter, time_name): (fn(&TimeSeriesDataset) -> fluctlab::Result<_>, &str) =
        match model.as_str() {
            "exp" => (fit_exp_decay, "T1"),
            "ramsey" => (fit_ramsey, "T2"),
            other => {
                return Err(config_err(format!(
                    "`model`: expected exp or ramsey, got `{other}`"
                )))
            }
        };
    let files = cfg.list_or("data", &[]);
    if files.is_empty() {
        return Err(config_err(
            "missing required key `data` (comma-separated CSV paths)",
        ));
    }
    let output = cfg.optional_output()?;
    let config = cfg.finish()?;

    let mut results = Vec::new();
    for file in &files {
        let path = PathBuf::from(file);
        let reader = File::open(&path).map_err(|source| CliError::Read {
            path: path.clone(),
            source,
        })?;
        let data = TimeSeriesDataset::read_csv(BufReader::new(reader))?;
        let fit = fitter(&data)?;
        let (v, s) = fit.get(time_name).expect("fit reports its time constant");
        results.push(json!({
            "file": file,
            "points": data.len(),
            "fit": fit,
            "time_constant_us": { "name": time_name, "value": v / US, "sigma": s / US },
        }));
    }
    emit(
        output,
        &json!({ "command": "fit", "config": config, "results": results }),
    )
}

pub fn bounds(mut cfg: Config) -> CliResult<()> {
    let t1: f64 = cfg.required("t1_us")?;
    let t1_sigma = cfg.get_or("t1_sigma_us", 0.0)?;
    let t2: f64 = cfg.required("t2_us")?;
    let t2_sigma = cfg.get_or("t2_sigma_us", 0.0)?;
    let epsilon: Option<f64> = cfg.parse_opt("epsilon")?;
    cfg.record("epsilon", epsilon);
    let epsilon_sigma = cfg.get_or("epsilon_sigma", 0.0)?;
    let device_name = cfg.string_or("device", HBAR_16UG.name);
    let base = DeviceProfile::by_name(&device_name).ok_or_else(|| {
        config_err(format!(
            "`device`: unknown profile `{device_name}`; known: {}",
            HBAR_16UG.name
        ))
    })?;
    let overridden = ["f_hz", "mass_kg", "x0_m", "ap_hw"]
        .iter()
        .any(|k| cfg.has(k));
    let device = DeviceProfile {
        name: if overridden { "custom" } else { base.name },
        frequency: cfg.get_or("f_hz", base.frequency)?,
        mass: cfg.get_or("mass_kg", base.mass)?,
        x0: cfg.get_or("x0_m", base.x0)?,
        ap_hw: cfg.get_or("ap_hw", base.ap_hw)?,
    };
    let propagation = match cfg.string_or("propagation", "linear").as_str() {
        "linear" => Propagation::Linear,
        "quadrature" => Propagation::Quadrature,
        other => {
            return Err(config_err(format!(
                "`propagation`: expected linear or quadrature, got `{other}`"
            )))
        }
    };
    let output = cfg.optional_output()?;
    let config = cfg.finish()?;

    for (name, v) in [("t1_us", t1), ("t2_us", t2)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(config_err(format!("`{name}` must be positive")));
        }
    }
    let report = bounds_report(BoundsInputs {
        t1: Measured::new(t1 * US, t1_sigma * US),
        t2: Measured::new(t2 * US, t2_sigma * US),
        epsilon: epsilon.map_or(Measured::new(f64::NAN, f64::NAN), |e| {
            Measured::new(e, epsilon_sigma)
        }),
        device,
        propagation,
    })?;
    let us = |r: &fluctlab::estimate::ReportValue| json!({ "value": r.value.map(|v| v / US), "sigma": r.sigma.map(|s| s / US) });
    let summary = json!({
        "command": "bounds",
        "config": config,
        "report": report,
        "microseconds": {
            "gamma_inv": us(&report.gamma_inv),
            "tau_g": us(&report.tau_g),
            "gamma_inv_breuer": us(&report.gamma_inv_breuer),
            "tau_d": us(&report.tau_d),
        },
    });
    emit(output, &summary)
}

pub fn wigner(mut cfg: Config) -> CliResult<()> {
    let state = cfg.string_or("state", "vacuum");
    let dim = cfg.get_or("dim", 40usize)?;
    let epsilon: Option<f64> = cfg.parse_opt("epsilon")?;
    cfg.record("epsilon", epsilon);
    let half_width = cfg.get_or("half_width", 4.0)?;
    let points = cfg.get_or("grid_points", 81usize)?;
    let output = cfg.output_prefix("wigner")?;
    let config = cfg.finish()?;

    let rho = if state == "deformed-ground" {
        let eps = epsilon.ok_or_else(|| config_err("`state = deformed-ground` needs `epsilon`"))?;
        // β̄ = 1 and a_PħΩ = ε/6 give the x⁴ + {x,p} deformation of strength ε
        let h = generators::h_full(dim, 1.0, eps / 6.0)?;
        let (_, vecs) = linalg::eigh(h.matrix())?;
        DensityMatrix::pure(&vecs.column(0).into_owned())?
    } else {
        if epsilon.is_some() {
            return Err(config_err(
                "`epsilon` only applies to `state = deformed-ground`",
            ));
        }
        let initial: InitialState = state.parse().map_err(|_| {
            config_err(format!(
                "`state`: expected vacuum, fock(n), superposition01 or deformed-ground, got `{state}`"
            ))
        })?;
        initial.density(dim)?
    };
    if !(half_width > 0.0) || points < 3 {
        return Err(config_err(
            "grid needs `half_width` > 0 and `grid_points` >= 3",
        ));
    }
    let grid = fock::wigner(&rho, &GridSpec::square(half_width, points))?;
    let csv = with_suffix(&output, ".csv");
    crate::output::write_with(&csv, |w| grid.write_csv(w))?;
    let (fit, fit_error) = match ellipticity_from_wigner(&grid) {
        Ok(f) => (json!(f), Value::Null),
        Err(e) => (Value::Null, json!(e.to_string())),
    };
    let json_path = with_suffix(&output, ".json");
    let summary = json!({
        "command": "wigner",
        "config": config,
        "truncation_warning": grid.warning.map(|w| format!("{w:?}")),
        "ellipticity": fit,
        "ellipticity_error": fit_error,
        "files": { "csv": csv.display().to_string(), "json": json_path.display().to_string() },
    });
    write_json(&json_path, &summary)?;
    println!("wrote {}", csv.display());
    println!("wrote {}", json_path.display());
    Ok(())
}
