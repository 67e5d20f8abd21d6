//! Fixed-step RK4 evolution of density matrices.

use std::f64::consts::PI;
use std::io::{self, Write};
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fock::DensityMatrix;
use crate::generators::{self, Composite, Damping, Generator, ModelParams};
use crate::linalg::{self, c, CMatrix};

/// 200 steps per oscillator period.
pub const DEFAULT_DT: f64 = 2.0 * PI / 200.0;
pub const POSITIVITY_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EvolveOptions {
    /// Step in units of 1/ω.
    pub dt: f64,
    /// Store a state every this many steps (the final state is always stored).
    pub sample_every: usize,
    /// Check the smallest eigenvalue every this many steps; 0 means at samples only.
    pub positivity_every: usize,
    pub positivity_tolerance: f64,
    /// ω in rad/s, used only to report physical times.
    pub omega: Option<f64>,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        Self {
            dt: DEFAULT_DT,
            sample_every: 1,
            positivity_every: 0,
            positivity_tolerance: POSITIVITY_TOLERANCE,
            omega: None,
        }
    }
}

impl EvolveOptions {
    pub fn with_dt(mut self, dt: f64) -> Self {
        self.dt = dt;
        self
    }

    pub fn with_sample_every(mut self, every: usize) -> Self {
        self.sample_every = every;
        self
    }

    pub fn with_omega(mut self, omega: f64) -> Self {
        self.omega = Some(omega);
        self
    }

    fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "dt",
                reason: format!("must be positive, got {}", self.dt),
            });
        }
        if self.sample_every == 0 {
            return Err(Error::InvalidParameter {
                name: "sample_every",
                reason: "must be at least 1".into(),
            });
        }
        Ok(())
    }
}

/// Corrections applied after each step, measured before they were applied.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Diagnostics {
    pub trace_drift: Vec<f64>,
    pub hermiticity_drift: Vec<f64>,
    /// (step, smallest eigenvalue) at every positivity check.
    pub min_eigenvalue: Vec<(usize, f64)>,
}

impl Diagnostics {
    pub fn max_trace_drift(&self) -> f64 {
        self.trace_drift.iter().copied().fold(0.0, f64::max)
    }

    pub fn max_hermiticity_drift(&self) -> f64 {
        self.hermiticity_drift.iter().copied().fold(0.0, f64::max)
    }

    pub fn lowest_eigenvalue(&self) -> f64 {
        self.min_eigenvalue
            .iter()
            .map(|&(_, v)| v)
            .fold(f64::INFINITY, f64::min)
    }
}

#[derive(Debug, Clone)]
pub struct EvolutionResult {
    /// Sample instants ωt.
    pub times: Vec<f64>,
    pub states: Vec<DensityMatrix>,
    pub diagnostics: Diagnostics,
    pub omega: Option<f64>,
}

impl EvolutionResult {
    /// Sample instants in seconds, when ω is known.
    pub fn times_seconds(&self) -> Option<Vec<f64>> {
        self.omega
            .map(|w| self.times.iter().map(|t| t / w).collect())
    }

    pub fn last(&self) -> &DensityMatrix {
        self.states
            .last()
            .expect("an evolution stores at least the initial state")
    }

    pub fn series(&self, obs: Observable) -> Vec<f64> {
        self.states.iter().map(|s| obs.eval(s.matrix())).collect()
    }

    pub fn write_csv<W: Write>(&self, out: W, observables: &[Observable]) -> io::Result<()> {
        let columns: Vec<Vec<f64>> = observables.iter().map(|&o| self.series(o)).collect();
        write_observables_csv(out, &self.times, self.omega, observables, &columns, None)
    }
}

/// A real-valued readout of a density-matrix element.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Observable {
    /// ⟨n|ρ|n⟩, written `rho_nn`.
    Population(usize),
    /// `re_rho_mn`
    Re(usize, usize),
    /// `im_rho_mn`
    Im(usize, usize),
    /// `abs_rho_mn`
    Abs(usize, usize),
}

impl Observable {
    pub fn eval(&self, rho: &CMatrix) -> f64 {
        match *self {
            Observable::Population(n) => rho[(n, n)].re,
            Observable::Re(m, n) => rho[(m, n)].re,
            Observable::Im(m, n) => rho[(m, n)].im,
            Observable::Abs(m, n) => rho[(m, n)].norm(),
        }
    }

    pub fn max_index(&self) -> usize {
        match *self {
            Observable::Population(n) => n,
            Observable::Re(m, n) | Observable::Im(m, n) | Observable::Abs(m, n) => m.max(n),
        }
    }
}

fn index_suffix(m: usize, n: usize) -> String {
    if m < 10 && n < 10 {
        format!("{m}{n}")
    } else {
        format!("{m}_{n}")
    }
}

impl std::fmt::Display for Observable {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match *self {
            Observable::Population(n) => write!(f, "rho_{}", index_suffix(n, n)),
            Observable::Re(m, n) => write!(f, "re_rho_{}", index_suffix(m, n)),
            Observable::Im(m, n) => write!(f, "im_rho_{}", index_suffix(m, n)),
            Observable::Abs(m, n) => write!(f, "abs_rho_{}", index_suffix(m, n)),
        }
    }
}

impl FromStr for Observable {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidParameter {
            name: "observable",
            reason: format!(
                "cannot parse `{s}`; expected rho_mn, re_rho_mn, im_rho_mn or abs_rho_mn"
            ),
        };
        let (kind, idx) = if let Some(rest) = s.strip_prefix("re_rho_") {
            ("re", rest)
        } else if let Some(rest) = s.strip_prefix("im_rho_") {
            ("im", rest)
        } else if let Some(rest) = s.strip_prefix("abs_rho_") {
            ("abs", rest)
        } else if let Some(rest) = s.strip_prefix("rho_") {
            ("pop", rest)
        } else {
            return Err(bad());
        };
        let (m, n) = match idx.split_once('_') {
            Some((a, b)) => (a.parse().map_err(|_| bad())?, b.parse().map_err(|_| bad())?),
            None if idx.len() == 2 && idx.bytes().all(|b| b.is_ascii_digit()) => {
                let d = idx.as_bytes();
                ((d[0] - b'0') as usize, (d[1] - b'0') as usize)
            }
            None => return Err(bad()),
        };
        Ok(match kind {
            "re" => Observable::Re(m, n),
            "im" => Observable::Im(m, n),
            "abs" => Observable::Abs(m, n),
            _ if m == n => Observable::Population(n),
            _ => return Err(bad()),
        })
    }
}

/// Writes `t_omega,t_seconds,obs...[,stderr_obs...]`.
pub fn write_observables_csv<W: Write>(
    mut out: W,
    times: &[f64],
    omega: Option<f64>,
    observables: &[Observable],
    columns: &[Vec<f64>],
    stderr: Option<&[Vec<f64>]>,
) -> io::Result<()> {
    let mut header = vec!["t_omega".to_string(), "t_seconds".to_string()];
    header.extend(observables.iter().map(|o| o.to_string()));
    if stderr.is_some() {
        header.extend(observables.iter().map(|o| format!("stderr_{o}")));
    }
    writeln!(out, "{}", header.join(","))?;
    for (k, &t) in times.iter().enumerate() {
        let secs = omega.map_or(f64::NAN, |w| t / w);
        write!(out, "{t:.12e},{secs:.12e}")?;
        for col in columns {
            write!(out, ",{:.12e}", col[k])?;
        }
        if let Some(errs) = stderr {
            for col in errs {
                write!(out, ",{:.12e}", col[k])?;
            }
        }
        writeln!(out)?;
    }
    Ok(())
}

fn rk4_step<G: Generator + ?Sized>(gen: &G, t: f64, h: f64, rho: &CMatrix) -> CMatrix {
    let k1 = gen.apply(t, rho);
    let k2 = gen.apply(t + 0.5 * h, &(rho + &k1 * c(0.5 * h)));
    let k3 = gen.apply(t + 0.5 * h, &(rho + &k2 * c(0.5 * h)));
    let k4 = gen.apply(t + h, &(rho + &k3 * c(h)));
    rho + (k1 + (k2 + k3) * c(2.0) + k4) * c(h / 6.0)
}

/// Integrates dρ/d(ωt) = gen(t, ρ) from 0 to `t_end`.
///
/// The last step is shortened so the run ends exactly at `t_end`. After each
/// step ρ is replaced by (ρ+ρ†)/2 and rescaled to unit trace; the size of both
/// corrections is recorded in the diagnostics.
pub fn evolve<G: Generator + ?Sized>(
    rho0: &DensityMatrix,
    gen: &G,
    t_end: f64,
    opts: &EvolveOptions,
) -> Result<EvolutionResult> {
    opts.validate()?;
    if gen.dim() != 0 && gen.dim() != rho0.dim() {
        return Err(Error::DimensionMismatch {
            expected: rho0.dim(),
            got: gen.dim(),
        });
    }
    if !(t_end >= 0.0 && t_end.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "t_end",
            reason: format!("must be finite and non-negative, got {t_end}"),
        });
    }
    let n_steps = (t_end / opts.dt - 1e-9).ceil().max(0.0) as usize;
    let check_every = if opts.positivity_every == 0 {
        opts.sample_every
    } else {
        opts.positivity_every
    };

    let mut rho = rho0.matrix().clone();
    let mut times = vec![0.0];
    let mut states = vec![rho0.clone()];
    let mut diag = Diagnostics {
        trace_drift: Vec::with_capacity(n_steps),
        hermiticity_drift: Vec::with_capacity(n_steps),
        min_eigenvalue: Vec::new(),
    };

    for step in 1..=n_steps {
        let t = (step - 1) as f64 * opts.dt;
        let h = if step == n_steps { t_end - t } else { opts.dt };
        let next = rk4_step(gen, t, h, &rho);
        if next.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::NonFinite { step, t: t + h });
        }
        diag.hermiticity_drift
            .push(linalg::hermiticity_deviation(&next));
        let mut next = linalg::hermitize(&next);
        let tr = linalg::trace(&next).re;
        diag.trace_drift.push((tr - 1.0).abs());
        next /= c(tr);
        rho = next;

        let t_now = if step == n_steps {
            t_end
        } else {
            step as f64 * opts.dt
        };
        let sample = step % opts.sample_every == 0 || step == n_steps;
        let state = DensityMatrix::from_matrix_unchecked(rho.clone());
        if step % check_every == 0 || step == n_steps {
            let min = state.min_eigenvalue();
            diag.min_eigenvalue.push((step, min));
            if min < -opts.positivity_tolerance {
                return Err(Error::PositivityFailure {
                    step,
                    t: t_now,
                    min_eigenvalue: min,
                });
            }
        }
        if sample {
            times.push(t_now);
            states.push(state);
        }
    }

    Ok(EvolutionResult {
        times,
        states,
        diagnostics: diag,
        omega: opts.omega,
    })
}

/// Coherent part, memory dissipator and (for γ > 0) amplitude damping.
pub fn nonmarkov_model(dim: usize, params: &ModelParams) -> Result<Composite> {
    let mut model = generators::gup_nonmarkov(dim, params)?;
    if params.gamma > 0.0 {
        model.push(Box::new(Damping::new(dim, params.gamma_dimless())?));
    }
    Ok(model)
}

/// Coherent part, Markovian dissipator and (for γ > 0) amplitude damping.
pub fn markov_model(dim: usize, params: &ModelParams) -> Result<Composite> {
    let mut model = generators::gup_markov(dim, params)?;
    if params.gamma > 0.0 {
        model.push(Box::new(Damping::new(dim, params.gamma_dimless())?));
    }
    Ok(model)
}

/// Evolution under the memory-kernel master equation.
///
/// Requires an exponential kernel and dt ≤ τ/10.
pub fn evolve_nonmarkov(
    rho0: &DensityMatrix,
    params: &ModelParams,
    t_end: f64,
    opts: &EvolveOptions,
) -> Result<EvolutionResult> {
    let tau = params
        .kernel_tau_dimless()
        .ok_or(Error::DeltaKernelRedirect)?;
    if opts.dt > tau / 10.0 {
        return Err(Error::StepTooLarge {
            dt: opts.dt,
            limit: tau / 10.0,
        });
    }
    let model = nonmarkov_model(rho0.dim(), params)?;
    let opts = EvolveOptions {
        omega: opts.omega.or(Some(params.omega)),
        ..*opts
    };
    evolve(rho0, &model, t_end, &opts)
}

/// Largest change of the given observables when the Fock space grows by 10 levels.
///
/// `build` returns the initial state and generator for a given dimension.
pub fn truncation_shift<F>(
    dim: usize,
    build: F,
    t_end: f64,
    opts: &EvolveOptions,
    observables: &[Observable],
) -> Result<f64>
where
    F: Fn(usize) -> Result<(DensityMatrix, Box<dyn Generator>)>,
{
    let run = |d: usize| -> Result<Vec<Vec<f64>>> {
        let (rho0, gen) = build(d)?;
        let res = evolve(&rho0, &gen, t_end, opts)?;
        Ok(observables.iter().map(|&o| res.series(o)).collect())
    };
    let small = run(dim)?;
    let large = run(dim + 10)?;
    Ok(small
        .iter()
        .zip(&large)
        .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs()))
        .fold(0.0, f64::max))
}

/// Truncation is accepted when the shift stays below this.
pub const TRUNCATION_TOLERANCE: f64 = 1e-8;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::{FnGenerator, GupDissipator, KernelSpec, Null, Unitary};
    use crate::linalg::C64;
    use proptest::prelude::*;

    #[test]
    fn null_generator_keeps_state() {
        let rho0 = DensityMatrix::superposition01(6).unwrap();
        let res = evolve(&rho0, &Null(6), 3.0, &EvolveOptions::default()).unwrap();
        for s in &res.states {
            assert!((s.matrix() - rho0.matrix()).norm() < 1e-15);
        }
        assert_eq!(*res.times.last().unwrap(), 3.0);
    }

    #[test]
    fn damping_matches_exponential() {
        let g = 0.05;
        let rho0 = DensityMatrix::fock(1, 4).unwrap();
        let gen = Damping::new(4, g).unwrap();
        let opts = EvolveOptions::default().with_sample_every(10);
        let res = evolve(&rho0, &gen, 5.0 / g, &opts).unwrap();
        for (t, s) in res.times.iter().zip(&res.states) {
            assert!((s.population(1) - (-g * t).exp()).abs() < 1e-8);
        }
    }

    #[test]
    fn rk4_is_fourth_order() {
        let g = 0.5;
        let rho0 = DensityMatrix::superposition01(4).unwrap();
        let gen = Composite::new()
            .with(Damping::new(4, g).unwrap())
            .with(Unitary::new(&generators::h_rwa(4, 0.0, 0.0).unwrap()).unwrap());
        let t_end = 4.0;
        let at = |dt: f64| {
            evolve(
                &rho0,
                &gen,
                t_end,
                &EvolveOptions::default()
                    .with_dt(dt)
                    .with_sample_every(1_000_000),
            )
            .unwrap()
            .last()
            .matrix()
            .clone()
        };
        let dt = 0.2;
        let reference = at(dt / 8.0);
        let e1 = (at(dt) - &reference).norm();
        let e2 = (at(dt / 2.0) - &reference).norm();
        assert!(e1 / e2 >= 12.0, "ratio {}", e1 / e2);
    }

    #[test]
    fn composition_is_bit_identical() {
        let dim = 6;
        let rho0 = DensityMatrix::superposition01(dim).unwrap();
        let opts = EvolveOptions::default();
        let summed = Composite::new()
            .with(Damping::new(dim, 0.02).unwrap())
            .with(GupDissipator::new(dim, 0.01).unwrap());
        let a = Damping::new(dim, 0.02).unwrap();
        let b = GupDissipator::new(dim, 0.01).unwrap();
        let closure = FnGenerator::new(dim, move |t, r: &CMatrix| a.apply(t, r) + b.apply(t, r));
        let x = evolve(&rho0, &summed, 10.0, &opts).unwrap();
        let y = evolve(&rho0, &closure, 10.0, &opts).unwrap();
        for (s, u) in x.states.iter().zip(&y.states) {
            assert_eq!(s.matrix(), u.matrix());
        }
    }

    #[test]
    fn trace_drift_is_small_before_correction() {
        let dim = 10;
        let params = ModelParams {
            beta_bar: 1.0,
            ..ModelParams::default()
        }
        .with_omega_tau_g(1e3);
        let gen = markov_model(dim, &params).unwrap();
        let rho0 = DensityMatrix::superposition01(dim).unwrap();
        // dt·‖rhs‖ stays below 1e-3 for this step
        let res = evolve(&rho0, &gen, 1.0, &EvolveOptions::default().with_dt(1e-4)).unwrap();
        assert!(res.diagnostics.max_trace_drift() < 1e-12);
    }

    #[test]
    fn positivity_failure_reports_step() {
        // a non-physical generator that drains population from |0⟩ without bound
        let gen = FnGenerator::new(2, |_t, r: &CMatrix| {
            let mut d = CMatrix::zeros(2, 2);
            d[(0, 0)] = C64::new(-1.0, 0.0) * (r[(0, 0)].re.abs() + 1.0);
            d[(1, 1)] = -d[(0, 0)];
            d
        });
        let rho0 = DensityMatrix::fock(0, 2).unwrap();
        let err = evolve(&rho0, &gen, 5.0, &EvolveOptions::default()).unwrap_err();
        assert!(matches!(err, Error::PositivityFailure { .. }));
    }

    #[test]
    fn divergence_is_reported_not_diagonalised() {
        let gen = FnGenerator::new(2, |_t, r: &CMatrix| r * C64::new(1e200, 0.0));
        let rho0 = DensityMatrix::superposition01(2).unwrap();
        let err = evolve(&rho0, &gen, 1.0, &EvolveOptions::default()).unwrap_err();
        assert!(matches!(err, Error::NonFinite { step: 1, .. }), "{err:?}");
    }

    #[test]
    fn nonmarkov_rejects_large_step_and_delta() {
        let mut p = ModelParams {
            beta_bar: 1.0,
            ..ModelParams::default()
        }
        .with_omega_tau_g(1e4);
        let rho0 = DensityMatrix::fock(0, 8).unwrap();
        assert_eq!(
            evolve_nonmarkov(&rho0, &p, 1.0, &EvolveOptions::default()).unwrap_err(),
            Error::DeltaKernelRedirect
        );
        p.kernel = KernelSpec::Exponential { tau: 0.1 / p.omega };
        assert!(matches!(
            evolve_nonmarkov(&rho0, &p, 1.0, &EvolveOptions::default()),
            Err(Error::StepTooLarge { .. })
        ));
    }

    #[test]
    fn nonmarkov_without_noise_is_unitary() {
        let mut p = ModelParams {
            beta_bar: 1.0,
            ap_hw: 0.01,
            ..ModelParams::default()
        };
        p.kernel = KernelSpec::Exponential { tau: 2.0 / p.omega };
        let rho0 = DensityMatrix::superposition01(8).unwrap();
        let res =
            evolve_nonmarkov(&rho0, &p, 20.0, &EvolveOptions::default().with_dt(0.01)).unwrap();
        assert!((res.last().purity() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn observables_round_trip() {
        for name in [
            "rho_00",
            "rho_11",
            "re_rho_01",
            "im_rho_13",
            "abs_rho_01",
            "rho_12_12",
            "re_rho_3_14",
        ] {
            let o: Observable = name.parse().unwrap();
            assert_eq!(o.to_string(), name);
        }
        assert!("rho_01".parse::<Observable>().is_err());
        assert!("sigma_x".parse::<Observable>().is_err());
    }

    #[test]
    fn csv_layout() {
        let rho0 = DensityMatrix::fock(1, 3).unwrap();
        let res = evolve(
            &rho0,
            &Null(3),
            0.1,
            &EvolveOptions::default().with_dt(0.05).with_omega(2.0),
        )
        .unwrap();
        let mut buf = Vec::new();
        res.write_csv(&mut buf, &[Observable::Population(1), Observable::Re(0, 1)])
            .unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "t_omega,t_seconds,rho_11,re_rho_01");
        assert_eq!(lines.len(), 4);
        let last: Vec<f64> = lines[3].split(',').map(|v| v.parse().unwrap()).collect();
        assert!((last[0] - 0.1).abs() < 1e-12 && (last[1] - 0.05).abs() < 1e-12);
    }

    #[test]
    fn truncation_check_converges_for_low_states() {
        let params = ModelParams {
            beta_bar: 1.0,
            ..ModelParams::default()
        }
        .with_omega_tau_g(1e4);
        let shift = truncation_shift(
            12,
            |d| {
                Ok((
                    DensityMatrix::superposition01(d)?,
                    Box::new(markov_model(d, &params)?) as Box<dyn Generator>,
                ))
            },
            50.0,
            &EvolveOptions::default().with_sample_every(50),
            &[Observable::Population(0), Observable::Abs(0, 1)],
        )
        .unwrap();
        assert!(shift < TRUNCATION_TOLERANCE);
    }

    proptest! {
        #[test]
        fn gup_evolution_stays_physical(rate in 1e-4f64..1e-2, t_end in 1.0f64..30.0) {
            let dim = 8;
            let gen = Composite::new()
                .with(Unitary::new(&generators::h_rwa(dim, 1.0, 0.01).unwrap()).unwrap())
                .with(GupDissipator::new(dim, rate).unwrap());
            let rho0 = DensityMatrix::superposition01(dim).unwrap();
            let res = evolve(&rho0, &gen, t_end, &EvolveOptions::default().with_sample_every(20)).unwrap();
            for s in &res.states {
                prop_assert!((s.trace().re - 1.0).abs() < 1e-12);
                prop_assert!(s.min_eigenvalue() > -1e-9);
            }
            let purities: Vec<f64> = res.states.iter().map(|s| s.purity()).collect();
            prop_assert!(purities.windows(2).all(|w| w[1] <= w[0] + 1e-12));
        }
    }
}
