//! `simulate`, `ensemble` and `analytic`: time evolution of the oscillator.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use fluctlab::analytic::{
    breuer_observables, damping_series_element, gup_coherence01, gup_populations, Checked,
};
use fluctlab::estimate::{DeviceProfile, HBAR_16UG};
use fluctlab::fock::DensityMatrix;
use fluctlab::generators::{
    self, Composite, Damping, HamiltonianKind, KernelSpec, ModelParams, Unitary,
};
use fluctlab::integrate::{
    evolve, evolve_nonmarkov, markov_model, write_observables_csv, EvolutionResult, EvolveOptions,
    Observable, DEFAULT_DT,
};
use fluctlab::linalg::{c, CVector, C64};
use fluctlab::trajectories::{ensemble_average, EnsembleOptions, Scheme};
use serde_json::{json, Map, Value};

use crate::config::Config;
use crate::error::{config_err, CliError, CliResult};
use crate::output::{with_suffix, write_json, write_with};

const US: f64 = 1e-6;
const DEFAULT_OBSERVABLES: [&str; 5] = ["rho_00", "rho_11", "re_rho_01", "im_rho_01", "abs_rho_01"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    GupMarkov,
    GupNonmarkov,
    Breuer,
    DampingOnly,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::GupMarkov => "gup-markov",
            ModelKind::GupNonmarkov => "gup-nonmarkov",
            ModelKind::Breuer => "breuer",
            ModelKind::DampingOnly => "damping-only",
        }
    }
}

impl FromStr for ModelKind {
    type Err = CliError;

    fn from_str(s: &str) -> CliResult<Self> {
        Ok(match s {
            "gup-markov" => ModelKind::GupMarkov,
            "gup-nonmarkov" => ModelKind::GupNonmarkov,
            "breuer" => ModelKind::Breuer,
            "damping-only" => ModelKind::DampingOnly,
            _ => {
                return Err(config_err(format!(
                    "`model`: unknown model `{s}`; expected gup-markov, gup-nonmarkov, breuer or damping-only"
                )))
            }
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitialState {
    Fock(usize),
    Superposition01,
}

impl FromStr for InitialState {
    type Err = CliError;

    fn from_str(s: &str) -> CliResult<Self> {
        let bad = || {
            config_err(format!(
                "`initial_state`: cannot parse `{s}`; expected vacuum, fock(n) or superposition01"
            ))
        };
        match s {
            "vacuum" => Ok(InitialState::Fock(0)),
            "superposition01" => Ok(InitialState::Superposition01),
            _ => {
                let n = s
                    .strip_prefix("fock(")
                    .and_then(|r| r.strip_suffix(')'))
                    .ok_or_else(bad)?;
                n.trim().parse().map(InitialState::Fock).map_err(|_| bad())
            }
        }
    }
}

impl InitialState {
    pub fn density(self, dim: usize) -> fluctlab::Result<DensityMatrix> {
        match self {
            InitialState::Fock(n) => DensityMatrix::fock(n, dim),
            InitialState::Superposition01 => DensityMatrix::superposition01(dim),
        }
    }

    pub fn vector(self, dim: usize) -> CVector {
        let mut psi = CVector::zeros(dim);
        match self {
            InitialState::Fock(n) => psi[n] = c(1.0),
            InitialState::Superposition01 => {
                psi[0] = c(std::f64::consts::FRAC_1_SQRT_2);
                psi[1] = c(std::f64::consts::FRAC_1_SQRT_2);
            }
        }
        psi
    }

    fn highest_level(self) -> usize {
        match self {
            InitialState::Fock(n) => n,
            InitialState::Superposition01 => 1,
        }
    }
}

/// Everything a time-evolution command needs, in units of ω.
#[derive(Debug, Clone)]
pub struct RunSetup {
    pub model: ModelKind,
    pub dim: usize,
    pub initial: InitialState,
    pub params: ModelParams,
    pub t_end: f64,
    pub dt: f64,
    pub sample_every: usize,
    pub observables: Vec<Observable>,
    pub output: PathBuf,
}

fn finite_or_null(v: f64) -> Value {
    if v.is_finite() {
        json!(v)
    } else {
        Value::Null
    }
}

impl RunSetup {
    fn derived(&self) -> Value {
        let p = &self.params;
        json!({
            "omega": p.omega,
            "omega_t_end": self.t_end,
            "omega_dt": self.dt,
            "gamma_over_omega": p.gamma_dimless(),
            "omega_tau_g": finite_or_null(1.0 / p.gup_rate()),
            "omega_tau_d": finite_or_null(1.0 / p.breuer_rate()),
            "omega_kernel_tau": p.kernel_tau_dimless(),
            "steps": (self.t_end / self.dt).ceil() as u64,
        })
    }
}

/// Reads one of two alternative keys and records the one that was used.
fn either_recorded(cfg: &mut Config, a: &str, b: &str) -> CliResult<Option<(bool, f64)>> {
    let v = cfg.either::<f64>(a, b)?;
    if let Some((first, x)) = v {
        cfg.record(if first { a } else { b }, x);
    }
    Ok(v)
}

pub fn parse_run(cfg: &mut Config, command: &str) -> CliResult<RunSetup> {
    let model: ModelKind = cfg.string_or("model", "gup-markov").parse()?;
    let dim = cfg.get_or("dim", 20usize)?;
    let initial: InitialState = cfg.string_or("initial_state", "superposition01").parse()?;
    let device_name = cfg.string_or("device", HBAR_16UG.name);
    let device = DeviceProfile::by_name(&device_name).ok_or_else(|| {
        config_err(format!(
            "`device`: unknown profile `{device_name}`; known: {}",
            HBAR_16UG.name
        ))
    })?;
    let f_hz = cfg.get_or("f_hz", device.frequency)?;
    let ap_hw = cfg.get_or("ap_hw", device.ap_hw)?;
    let hamiltonian = match cfg.string_or("hamiltonian", "rwa").as_str() {
        "rwa" => HamiltonianKind::Rwa,
        "full" => HamiltonianKind::Full,
        other => {
            return Err(config_err(format!(
                "`hamiltonian`: expected rwa or full, got `{other}`"
            )))
        }
    };
    let omega = 2.0 * PI * f_hz;

    let gamma = match either_recorded(cfg, "gamma", "gamma_inv_us")? {
        None => {
            cfg.record("gamma", 0.0);
            0.0
        }
        Some((true, g)) => g,
        Some((false, inv)) => 1.0 / (inv * US),
    };
    let beta_bar = cfg.get_or("beta_bar", 1.0)?;
    let mut params = ModelParams {
        omega,
        gamma,
        beta_bar,
        kappa: 0.0,
        tau_c: 0.0,
        ap_hw,
        kernel: KernelSpec::Delta,
        hamiltonian,
    };
    match either_recorded(cfg, "kappa", "omega_tau_g")? {
        Some((true, k)) => params.kappa = k,
        Some((false, wt)) => params = params.with_omega_tau_g(wt),
        None => cfg.record("kappa", 0.0),
    }
    match either_recorded(cfg, "tau_c", "omega_tau_d")? {
        Some((true, t)) => params.tau_c = t,
        Some((false, wt)) => params = params.with_omega_tau_d(wt),
        None => cfg.record("tau_c", 0.0),
    }

    let kernel_name = cfg.string_or("kernel", "delta");
    let kernel_tau = either_recorded(cfg, "kernel_tau_us", "omega_kernel_tau")?;
    params.kernel = match (kernel_name.as_str(), kernel_tau) {
        ("delta", None) => KernelSpec::Delta,
        ("delta", Some(_)) => {
            return Err(config_err(
                "a kernel correlation time requires `kernel = exponential`",
            ))
        }
        ("exponential", Some((true, us))) => KernelSpec::Exponential { tau: us * US },
        ("exponential", Some((false, w))) => KernelSpec::Exponential { tau: w / omega },
        ("exponential", None) => {
            return Err(config_err(
                "`kernel = exponential` needs `kernel_tau_us` or `omega_kernel_tau`",
            ))
        }
        (other, _) => {
            return Err(config_err(format!(
                "`kernel`: expected delta or exponential, got `{other}`"
            )))
        }
    };
    match (model, params.kernel) {
        (ModelKind::GupMarkov, KernelSpec::Exponential { .. }) => {
            return Err(config_err(
                "`model = gup-markov` uses the delta kernel; use gup-nonmarkov for memory",
            ))
        }
        (ModelKind::GupNonmarkov, KernelSpec::Delta) => {
            return Err(config_err(
                "`model = gup-nonmarkov` needs `kernel = exponential`; use gup-markov otherwise",
            ))
        }
        _ => {}
    }
    params.validate()?;

    let t_end = match either_recorded(cfg, "t_end_us", "omega_t_end")? {
        Some((true, us)) => us * US * omega,
        Some((false, w)) => w,
        None => return Err(config_err("missing `t_end_us` or `omega_t_end`")),
    };
    if !(t_end > 0.0 && t_end.is_finite()) {
        return Err(config_err("end time must be positive"));
    }
    let dt = match either_recorded(cfg, "dt_us", "omega_dt")? {
        Some((true, us)) => us * US * omega,
        Some((false, w)) => w,
        None => {
            cfg.record("omega_dt", DEFAULT_DT);
            DEFAULT_DT
        }
    };
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(config_err("time step must be positive"));
    }
    let sample_every = cfg.get_or("sample_every", 20usize)?;
    if sample_every == 0 {
        return Err(config_err("`sample_every` must be at least 1"));
    }
    let observables = cfg
        .list_or("observables", &DEFAULT_OBSERVABLES)
        .iter()
        .map(|s| s.parse::<Observable>())
        .collect::<fluctlab::Result<Vec<_>>>()?;
    if let Some(o) = observables.iter().find(|o| o.max_index() >= dim) {
        return Err(config_err(format!(
            "`observables`: {o} is outside dim = {dim}"
        )));
    }
    if initial.highest_level() >= dim {
        return Err(config_err(format!(
            "`initial_state` needs more than dim = {dim} levels"
        )));
    }
    let output = cfg.output_prefix(command)?;
    Ok(RunSetup {
        model,
        dim,
        initial,
        params,
        t_end,
        dt,
        sample_every,
        observables,
        output,
    })
}

pub fn run_master_equation(s: &RunSetup) -> fluctlab::Result<EvolutionResult> {
    let p = &s.params;
    let rho0 = s.initial.density(s.dim)?;
    let opts = EvolveOptions::default()
        .with_dt(s.dt)
        .with_sample_every(s.sample_every)
        .with_omega(p.omega);
    match s.model {
        ModelKind::GupMarkov => evolve(&rho0, &markov_model(s.dim, p)?, s.t_end, &opts),
        ModelKind::GupNonmarkov => evolve_nonmarkov(&rho0, p, s.t_end, &opts),
        ModelKind::Breuer => {
            let mut gen = generators::breuer(s.dim, p)?;
            if p.gamma > 0.0 {
                gen.push(Box::new(Damping::new(s.dim, p.gamma_dimless())?));
            }
            evolve(&rho0, &gen, s.t_end, &opts)
        }
        ModelKind::DampingOnly => {
            let gen = Composite::new()
                .with(Unitary::new(&generators::h_prime(s.dim, p)?)?)
                .with(Damping::new(s.dim, p.gamma_dimless())?);
            evolve(&rho0, &gen, s.t_end, &opts)
        }
    }
}

/// Closed-form curves for the observables that have one.
pub struct Curves {
    pub observables: Vec<Observable>,
    pub columns: Vec<Vec<f64>>,
    /// Largest t/τ at which a first-order formula was used past its range.
    pub max_validity_ratio: Option<f64>,
}

fn first_order<T: Copy>(checked: Checked<T>, ratio: &mut Option<f64>) -> T {
    if let Some(w) = checked.warning {
        *ratio = Some(ratio.map_or(w.ratio, |r: f64| r.max(w.ratio)));
    }
    checked.value
}

fn coherence_part(obs: Observable, z: C64) -> Option<f64> {
    match obs {
        Observable::Re(0, 1) => Some(z.re),
        Observable::Im(0, 1) => Some(z.im),
        Observable::Abs(0, 1) => Some(z.norm()),
        _ => None,
    }
}

/// Value of `obs` at `t` from the closed form for this model and initial state.
fn closed_form(
    s: &RunSetup,
    rho0: &DensityMatrix,
    obs: Observable,
    t: f64,
    ratio: &mut Option<f64>,
) -> CliResult<Option<f64>> {
    let p = &s.params;
    let g = p.gamma_dimless();
    let pick = |coh: C64, p00: f64, p11: f64| match (s.initial, obs) {
        (InitialState::Fock(0), Observable::Population(0)) => Some(p00),
        (InitialState::Fock(1), Observable::Population(1)) => Some(p11),
        (InitialState::Superposition01, o) => coherence_part(o, coh),
        _ => None,
    };
    Ok(match s.model {
        ModelKind::GupMarkov | ModelKind::GupNonmarkov => {
            let tau_g = 1.0 / p.gup_rate();
            let coh = first_order(gup_coherence01(t, g, tau_g, p.beta_bar, p.ap_hw), ratio);
            let (p00, p11) = first_order(gup_populations(t, g, tau_g), ratio);
            pick(coh, p00, p11)
        }
        ModelKind::Breuer => {
            let (coh, p00, p11) =
                first_order(breuer_observables(t, g, 1.0 / p.breuer_rate()), ratio);
            pick(coh, p00, p11)
        }
        ModelKind::DampingOnly => {
            if p.hamiltonian != HamiltonianKind::Rwa {
                return Ok(None);
            }
            let (m, n) = match obs {
                Observable::Population(n) => (n, n),
                Observable::Re(m, n) | Observable::Im(m, n) | Observable::Abs(m, n) => (m, n),
            };
            let z =
                damping_series_element(m, n, t, g, p.beta_bar, p.ap_hw, rho0.matrix(), s.dim - 1)?;
            Some(match obs {
                Observable::Population(_) | Observable::Re(..) => z.re,
                Observable::Im(..) => z.im,
                Observable::Abs(..) => z.norm(),
            })
        }
    })
}

pub fn analytic_curves(s: &RunSetup, times: &[f64]) -> CliResult<Option<Curves>> {
    let rho0 = s.initial.density(s.dim)?;
    let mut ratio = None;
    let mut observables = Vec::new();
    let mut columns = Vec::new();
    for &obs in &s.observables {
        if closed_form(s, &rho0, obs, 0.0, &mut ratio)?.is_none() {
            continue;
        }
        let mut col = Vec::with_capacity(times.len());
        for &t in times {
            col.push(closed_form(s, &rho0, obs, t, &mut ratio)?.unwrap_or(f64::NAN));
        }
        observables.push(obs);
        columns.push(col);
    }
    Ok((!observables.is_empty()).then_some(Curves {
        observables,
        columns,
        max_validity_ratio: ratio,
    }))
}

fn path_string(p: &Path) -> String {
    p.display().to_string()
}

pub fn simulate(mut cfg: Config) -> CliResult<()> {
    let s = parse_run(&mut cfg, "simulate")?;
    let config = cfg.finish()?;
    let res = run_master_equation(&s)?;

    let csv = with_suffix(&s.output, ".csv");
    write_with(&csv, |w| res.write_csv(w, &s.observables))?;
    let mut files = Map::new();
    files.insert("csv".into(), json!(path_string(&csv)));

    let analytic = match analytic_curves(&s, &res.times)? {
        Some(curves) => {
            let path = with_suffix(&s.output, "_analytic.csv");
            write_with(&path, |w| {
                write_observables_csv(
                    w,
                    &res.times,
                    res.omega,
                    &curves.observables,
                    &curves.columns,
                    None,
                )
            })?;
            files.insert("analytic_csv".into(), json!(path_string(&path)));
            let mut dev = Map::new();
            for (obs, col) in curves.observables.iter().zip(&curves.columns) {
                let worst = res
                    .series(*obs)
                    .iter()
                    .zip(col)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max);
                dev.insert(obs.to_string(), json!(worst));
            }
            json!({
                "max_abs_deviation": dev,
                "max_validity_ratio": curves.max_validity_ratio,
            })
        }
        None => Value::Null,
    };

    let last = res.last();
    let finals: Map<String, Value> = s
        .observables
        .iter()
        .map(|o| (o.to_string(), json!(o.eval(last.matrix()))))
        .collect();
    let json_path = with_suffix(&s.output, ".json");
    files.insert("json".into(), json!(path_string(&json_path)));
    let summary = json!({
        "command": "simulate",
        "config": config,
        "derived": s.derived(),
        "samples": res.times.len(),
        "final": finals,
        "analytic": analytic,
        "diagnostics": {
            "max_trace_drift": res.diagnostics.max_trace_drift(),
            "max_hermiticity_drift": res.diagnostics.max_hermiticity_drift(),
            "min_eigenvalue": res.diagnostics.lowest_eigenvalue(),
        },
        "files": files,
    });
    write_json(&json_path, &summary)?;
    report_files(&summary);
    Ok(())
}

pub fn ensemble(mut cfg: Config) -> CliResult<()> {
    let s = parse_run(&mut cfg, "ensemble")?;
    let n_traj = cfg.get_or("n_traj", 1000usize)?;
    let seed = cfg.get_or("seed", 0u64)?;
    let scheme = match cfg.string_or("scheme", "split").as_str() {
        "split" => Scheme::Split,
        "exact" => Scheme::Exact,
        other => {
            return Err(config_err(format!(
                "`scheme`: expected split or exact, got `{other}`"
            )))
        }
    };
    let compare = cfg.get_or("compare", false)?;
    let config = cfg.finish()?;
    if !matches!(s.model, ModelKind::GupMarkov | ModelKind::GupNonmarkov) {
        return Err(config_err(
            "`ensemble` supports model = gup-markov or gup-nonmarkov",
        ));
    }
    if s.params.gamma != 0.0 {
        return Err(config_err("`ensemble` requires gamma = 0"));
    }
    let opts = EnsembleOptions {
        n_traj,
        seed,
        dt: s.dt,
        t_end: s.t_end,
        sample_every: s.sample_every,
        scheme,
    };
    let ens = ensemble_average(&s.initial.vector(s.dim), &s.params, &opts)?;
    let csv = with_suffix(&s.output, ".csv");
    write_with(&csv, |w| ens.write_csv(w, &s.observables))?;

    let comparison = if compare {
        let me = run_master_equation(&s)?;
        let mut max_td: f64 = 0.0;
        let mut ratios: Vec<f64> = vec![0.0; s.observables.len()];
        let stderr: Vec<Vec<f64>> = s
            .observables
            .iter()
            .map(|&o| ens.stderr_series(o))
            .collect();
        for (k, (t, mean)) in ens.times.iter().zip(&ens.mean).enumerate() {
            let Some(j) = me
                .times
                .iter()
                .position(|u| (u - t).abs() <= 1e-9 * t.abs().max(1.0))
            else {
                continue;
            };
            max_td = max_td.max(mean.trace_distance(&me.states[j])?);
            for (i, &o) in s.observables.iter().enumerate() {
                let se = stderr[i][k];
                let d = (o.eval(mean.matrix()) - o.eval(me.states[j].matrix())).abs();
                if se > 0.0 {
                    ratios[i] = ratios[i].max(d / se);
                }
            }
        }
        let per_obs: Map<String, Value> = s
            .observables
            .iter()
            .zip(&ratios)
            .map(|(o, r)| (o.to_string(), json!(r)))
            .collect();
        json!({ "max_trace_distance": max_td, "max_standard_errors": per_obs })
    } else {
        Value::Null
    };

    let k = ens.times.len() - 1;
    let finals: Map<String, Value> = s
        .observables
        .iter()
        .map(|&o| {
            let v = o.eval(ens.mean[k].matrix());
            let se = ens.stderr_series(o)[k];
            (o.to_string(), json!({ "mean": v, "stderr": se }))
        })
        .collect();
    let json_path = with_suffix(&s.output, ".json");
    let summary = json!({
        "command": "ensemble",
        "config": config,
        "derived": s.derived(),
        "n_traj": ens.n_traj,
        "samples": ens.times.len(),
        "final": finals,
        "comparison": comparison,
        "files": { "csv": path_string(&csv), "json": path_string(&json_path) },
    });
    write_json(&json_path, &summary)?;
    report_files(&summary);
    Ok(())
}

pub fn analytic(mut cfg: Config) -> CliResult<()> {
    let s = parse_run(&mut cfg, "analytic")?;
    let config = cfg.finish()?;
    let step = s.dt * s.sample_every as f64;
    let n = (s.t_end / step + 1e-9).floor() as usize;
    let mut times: Vec<f64> = (0..=n).map(|k| k as f64 * step).collect();
    if s.t_end - times[n] > 1e-9 * s.t_end {
        times.push(s.t_end);
    }
    let curves = analytic_curves(&s, &times)?.ok_or_else(|| {
        config_err(format!(
            "no closed form for initial_state {:?} under model {} with the requested observables",
            s.initial,
            s.model.name()
        ))
    })?;
    let csv = with_suffix(&s.output, ".csv");
    write_with(&csv, |w| {
        write_observables_csv(
            w,
            &times,
            Some(s.params.omega),
            &curves.observables,
            &curves.columns,
            None,
        )
    })?;
    let json_path = with_suffix(&s.output, ".json");
    let names: Vec<String> = curves.observables.iter().map(|o| o.to_string()).collect();
    let summary = json!({
        "command": "analytic",
        "config": config,
        "derived": s.derived(),
        "samples": times.len(),
        "observables": names,
        "max_validity_ratio": curves.max_validity_ratio,
        "files": { "csv": path_string(&csv), "json": path_string(&json_path) },
    });
    write_json(&json_path, &summary)?;
    report_files(&summary);
    Ok(())
}

fn report_files(summary: &Value) {
    if let Some(files) = summary["files"].as_object() {
        for path in files.values().filter_map(Value::as_str) {
            println!("wrote {path}");
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup(text: &str) -> CliResult<RunSetup> {
        let mut cfg = Config::default();
        cfg.parse_text(text)?;
        let s = parse_run(&mut cfg, "test")?;
        cfg.finish()?;
        Ok(s)
    }

    #[test]
    fn initial_states_parse() {
        assert_eq!(
            "vacuum".parse::<InitialState>().unwrap(),
            InitialState::Fock(0)
        );
        assert_eq!(
            "fock(3)".parse::<InitialState>().unwrap(),
            InitialState::Fock(3)
        );
        assert_eq!(
            "superposition01".parse::<InitialState>().unwrap(),
            InitialState::Superposition01
        );
        assert!("fock(x)".parse::<InitialState>().is_err());
        assert!("coherent".parse::<InitialState>().is_err());
    }

    #[test]
    fn microseconds_and_hertz_convert() {
        let s = setup("f_hz = 1e6\nt_end_us = 2\ndt_us = 0.001\nomega_tau_g = 50").unwrap();
        assert!((s.params.omega - 2.0 * PI * 1e6).abs() < 1e-6);
        assert!((s.t_end - 2.0 * PI * 2.0).abs() < 1e-12);
        assert!((s.dt - 2.0 * PI * 1e-3).abs() < 1e-12);
        assert!((1.0 / s.params.gup_rate() - 50.0).abs() < 1e-9);
    }

    #[test]
    fn inconsistent_settings_are_config_errors() {
        for text in [
            "omega_t_end = 1\nmodel = gup-nonmarkov",
            "omega_t_end = 1\nkernel = exponential",
            "omega_t_end = 1\nkernel_tau_us = 1",
            "omega_t_end = 1\nobservables = rho_30_30",
            "omega_t_end = 1\ndim = 2\ninitial_state = fock(2)",
            "model = breuer",
            "omega_t_end = 1\ngamma = 1\ngamma_inv_us = 1",
        ] {
            let err = setup(text).unwrap_err();
            assert_eq!(err.exit_code(), 2, "{text}: {err}");
        }
    }

    #[test]
    fn damping_closed_form_covers_every_observable() {
        let s = setup("model = damping-only\ndim = 8\ngamma_inv_us = 1\nomega_t_end = 10\nobservables = rho_11,abs_rho_01")
            .unwrap();
        let curves = analytic_curves(&s, &[0.0, 1.0]).unwrap().unwrap();
        assert_eq!(curves.observables.len(), 2);
        assert!((curves.columns[1][0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn gup_closed_form_depends_on_initial_state() {
        let s = setup("initial_state = fock(1)\nomega_t_end = 10\nomega_tau_g = 1000").unwrap();
        let curves = analytic_curves(&s, &[0.0, 8.0]).unwrap().unwrap();
        assert_eq!(curves.observables, vec![Observable::Population(1)]);
        assert!((curves.columns[0][1] - (1.0 - 45.0 / 8.0 * 8.0 / 1000.0)).abs() < 1e-12);
        let s = setup("initial_state = fock(3)\nomega_t_end = 10").unwrap();
        assert!(analytic_curves(&s, &[0.0]).unwrap().is_none());
    }
}
