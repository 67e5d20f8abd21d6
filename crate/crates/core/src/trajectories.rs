//! Pure-state unravelling of the fluctuating-deformation dynamics.
//!
//! Each trajectory evolves under Ĥ′ plus a noise term 4·a_PħΩ·K̂²·ξ(t), where
//! ξ is Gaussian with ⟨ξ(t)ξ(t′)⟩ = κω f(t − t′) in dimensionless time.
//! Averaging |ψ⟩⟨ψ| over noise realisations reproduces the master equations.

use std::io::{self, Write};

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fock::{self, DensityMatrix};
use crate::generators::{self, HamiltonianKind, KernelSpec, ModelParams};
use crate::integrate::{write_observables_csv, Observable, DEFAULT_DT};
use crate::linalg::{self, c, CMatrix, CVector, C64, I};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum NoiseKind {
    White,
    /// Correlation time τ in units of 1/ω.
    OrnsteinUhlenbeck {
        tau: f64,
    },
}

impl NoiseKind {
    /// Noise matching the kernel of `params`.
    pub fn from_params(params: &ModelParams) -> Self {
        match params.kernel {
            KernelSpec::Delta => NoiseKind::White,
            KernelSpec::Exponential { tau } => NoiseKind::OrnsteinUhlenbeck {
                tau: tau * params.omega,
            },
        }
    }
}

/// Integrated noise ΔW_k = ∫ ξ over each step.
#[derive(Debug, Clone, PartialEq)]
pub struct NoisePath {
    pub dt: f64,
    pub increments: Vec<f64>,
    /// ξ at the step boundaries (Ornstein–Uhlenbeck only).
    pub process: Vec<f64>,
    pub kind: NoiseKind,
    pub seed: u64,
    pub stream: u64,
}

impl NoisePath {
    pub fn len(&self) -> usize {
        self.increments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.increments.is_empty()
    }
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Draws a reproducible noise path of strength `kappa_dimless` = κω.
///
/// White increments have variance κω·dt. The Ornstein–Uhlenbeck process is
/// started in its stationary state (variance κω/(2τ)), advanced with the exact
/// update and integrated with the trapezoid rule.
pub fn sample_noise(
    kind: NoiseKind,
    kappa_dimless: f64,
    dt: f64,
    n_steps: usize,
    seed: u64,
    stream: u64,
) -> Result<NoisePath> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "dt",
            reason: format!("must be positive, got {dt}"),
        });
    }
    if !(kappa_dimless >= 0.0 && kappa_dimless.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "kappa",
            reason: format!("must be non-negative, got {kappa_dimless}"),
        });
    }
    let mut rng = rng_for(seed, stream);
    let mut normal = move || -> f64 { StandardNormal.sample(&mut rng) };
    let (increments, process) = match kind {
        NoiseKind::White => {
            let s = (kappa_dimless * dt).sqrt();
            ((0..n_steps).map(|_| s * normal()).collect(), Vec::new())
        }
        NoiseKind::OrnsteinUhlenbeck { tau } => {
            if !(tau >= 5.0 * dt) {
                return Err(Error::NoiseResolution { tau, min: 5.0 * dt });
            }
            let sigma = (kappa_dimless / (2.0 * tau)).sqrt();
            let decay = (-dt / tau).exp();
            let kick = sigma * (-(-2.0 * dt / tau).exp_m1()).sqrt();
            let mut x = sigma * normal();
            let mut process = Vec::with_capacity(n_steps + 1);
            let mut increments = Vec::with_capacity(n_steps);
            process.push(x);
            for _ in 0..n_steps {
                let next = x * decay + kick * normal();
                increments.push(0.5 * (x + next) * dt);
                process.push(next);
                x = next;
            }
            (increments, process)
        }
    };
    Ok(NoisePath {
        dt,
        increments,
        process,
        kind,
        seed,
        stream,
    })
}

/// How each stochastic step is propagated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    /// e^{−iĤ′dt/2} e^{−iGΔW} e^{−iĤ′dt/2}, with G diagonalised once.
    #[default]
    Split,
    /// e^{−i(Ĥ′dt + GΔW)} by a fresh matrix exponential every step.
    Exact,
}

/// Precomputed propagator pieces for one model and step size.
#[derive(Debug, Clone)]
pub struct TrajectoryEngine {
    dim: usize,
    dt: f64,
    scheme: Scheme,
    h: CMatrix,
    /// e^{−iĤ′dt/2}, stored as a diagonal when Ĥ′ is diagonal.
    half_step: HalfStep,
    noise_values: Vec<f64>,
    noise_basis: CMatrix,
    noise_gen: CMatrix,
}

#[derive(Debug, Clone)]
enum HalfStep {
    Diagonal(Vec<C64>),
    Dense(CMatrix),
}

impl HalfStep {
    fn apply(&self, psi: &CVector) -> CVector {
        match self {
            HalfStep::Diagonal(d) => CVector::from_fn(psi.len(), |i, _| d[i] * psi[i]),
            HalfStep::Dense(u) => u * psi,
        }
    }
}

impl TrajectoryEngine {
    pub fn new(dim: usize, params: &ModelParams, dt: f64, scheme: Scheme) -> Result<Self> {
        params.validate()?;
        if params.gamma != 0.0 {
            return Err(Error::Unsupported(
                "amplitude damping cannot be combined with trajectory mode; set gamma = 0".into(),
            ));
        }
        let h = generators::h_prime(dim, params)?.into_matrix();
        let half_step = match params.hamiltonian {
            HamiltonianKind::Rwa => HalfStep::Diagonal(
                (0..dim)
                    .map(|n| (-I * (h[(n, n)].re * 0.5 * dt)).exp())
                    .collect(),
            ),
            HamiltonianKind::Full => HalfStep::Dense(linalg::expm(&(&h * (-I * (0.5 * dt))))),
        };
        let noise_gen = fock::kinetic_squared(dim)?.into_matrix() * c(4.0 * params.ap_hw);
        let (noise_values, noise_basis) = linalg::eigh(&noise_gen)?;
        Ok(Self {
            dim,
            dt,
            scheme,
            h,
            half_step,
            noise_values,
            noise_basis,
            noise_gen,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    fn step(&self, psi: &CVector, dw: f64) -> CVector {
        match self.scheme {
            Scheme::Split => {
                let a = self.half_step.apply(psi);
                let mut b = self.noise_basis.ad_mul(&a);
                for (bi, g) in b.iter_mut().zip(&self.noise_values) {
                    *bi *= (-I * (g * dw)).exp();
                }
                self.half_step.apply(&(&self.noise_basis * b))
            }
            Scheme::Exact => {
                let gen = (&self.h * c(self.dt) + &self.noise_gen * c(dw)) * (-I);
                linalg::expm(&gen) * psi
            }
        }
    }

    /// Runs one trajectory, storing ψ every `sample_every` steps and at the end.
    pub fn run(
        &self,
        psi0: &CVector,
        noise: &NoisePath,
        sample_every: usize,
    ) -> Result<Trajectory> {
        if psi0.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: psi0.len(),
            });
        }
        if (psi0.norm() - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidState(format!(
                "initial state has norm {}",
                psi0.norm()
            )));
        }
        if (noise.dt - self.dt).abs() > 1e-15 * self.dt.max(1.0) {
            return Err(Error::InvalidParameter {
                name: "dt",
                reason: format!(
                    "noise path step {} differs from propagator step {}",
                    noise.dt, self.dt
                ),
            });
        }
        let every = sample_every.max(1);
        let n = noise.len();
        let mut psi = psi0.clone();
        let mut times = vec![0.0];
        let mut states = vec![psi.clone()];
        for (k, &dw) in noise.increments.iter().enumerate() {
            psi = self.step(&psi, dw);
            let step = k + 1;
            if step % every == 0 || step == n {
                times.push(step as f64 * self.dt);
                states.push(psi.clone());
            }
        }
        Ok(Trajectory { times, states })
    }
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    /// ωt at each stored state.
    pub times: Vec<f64>,
    pub states: Vec<CVector>,
}

/// Single trajectory under the model and a given noise path.
pub fn evolve_trajectory(
    psi0: &CVector,
    params: &ModelParams,
    noise: &NoisePath,
    scheme: Scheme,
    sample_every: usize,
) -> Result<Trajectory> {
    TrajectoryEngine::new(psi0.len(), params, noise.dt, scheme)?.run(psi0, noise, sample_every)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnsembleOptions {
    pub n_traj: usize,
    pub seed: u64,
    /// Step in units of 1/ω.
    pub dt: f64,
    pub t_end: f64,
    pub sample_every: usize,
    pub scheme: Scheme,
}

impl Default for EnsembleOptions {
    fn default() -> Self {
        Self {
            n_traj: 1000,
            seed: 0,
            dt: DEFAULT_DT,
            t_end: 100.0,
            sample_every: 20,
            scheme: Scheme::Split,
        }
    }
}

/// Trajectories per deterministic reduction block.
const BLOCK: usize = 32;

#[derive(Debug, Clone)]
pub struct EnsembleResult {
    /// ωt at each sample.
    pub times: Vec<f64>,
    pub mean: Vec<DensityMatrix>,
    /// Standard error of the real and imaginary parts of each element.
    pub stderr_re: Vec<DMatrix<f64>>,
    pub stderr_im: Vec<DMatrix<f64>>,
    pub n_traj: usize,
    pub omega: f64,
}

impl EnsembleResult {
    pub fn series(&self, obs: Observable) -> Vec<f64> {
        self.mean.iter().map(|m| obs.eval(m.matrix())).collect()
    }

    pub fn stderr_series(&self, obs: Observable) -> Vec<f64> {
        (0..self.times.len())
            .map(|k| {
                let (sr, si) = (&self.stderr_re[k], &self.stderr_im[k]);
                match obs {
                    Observable::Population(n) => sr[(n, n)],
                    Observable::Re(m, n) => sr[(m, n)],
                    Observable::Im(m, n) => si[(m, n)],
                    Observable::Abs(m, n) => {
                        let z = self.mean[k].element(m, n);
                        let a = z.norm();
                        if a == 0.0 {
                            sr[(m, n)].hypot(si[(m, n)])
                        } else {
                            ((z.re * sr[(m, n)]).powi(2) + (z.im * si[(m, n)]).powi(2)).sqrt() / a
                        }
                    }
                }
            })
            .collect()
    }

    pub fn write_csv<W: Write>(&self, out: W, observables: &[Observable]) -> io::Result<()> {
        let cols: Vec<Vec<f64>> = observables.iter().map(|&o| self.series(o)).collect();
        let errs: Vec<Vec<f64>> = observables.iter().map(|&o| self.stderr_series(o)).collect();
        write_observables_csv(
            out,
            &self.times,
            Some(self.omega),
            observables,
            &cols,
            Some(&errs),
        )
    }
}

#[derive(Clone)]
struct Moments {
    sum: Vec<CMatrix>,
    sq_re: Vec<DMatrix<f64>>,
    sq_im: Vec<DMatrix<f64>>,
}

impl Moments {
    fn zeros(samples: usize, dim: usize) -> Self {
        Self {
            sum: vec![CMatrix::zeros(dim, dim); samples],
            sq_re: vec![DMatrix::zeros(dim, dim); samples],
            sq_im: vec![DMatrix::zeros(dim, dim); samples],
        }
    }

    fn add_trajectory(&mut self, traj: &Trajectory) {
        for (k, psi) in traj.states.iter().enumerate() {
            let rho = psi * psi.adjoint();
            self.sq_re[k] += rho.map(|z| z.re * z.re);
            self.sq_im[k] += rho.map(|z| z.im * z.im);
            self.sum[k] += rho;
        }
    }

    fn merge(&mut self, other: &Moments) {
        for k in 0..self.sum.len() {
            self.sum[k] += &other.sum[k];
            self.sq_re[k] += &other.sq_re[k];
            self.sq_im[k] += &other.sq_im[k];
        }
    }
}

/// Average of |ψ⟩⟨ψ| over `opts.n_traj` noise realisations.
///
/// Trajectory `i` draws its noise from stream `i` of the seeded generator and
/// partial sums are combined in index order, so the result does not depend on
/// the number of worker threads.
pub fn ensemble_average(
    psi0: &CVector,
    params: &ModelParams,
    opts: &EnsembleOptions,
) -> Result<EnsembleResult> {
    if opts.n_traj < 100 {
        return Err(Error::InvalidParameter {
            name: "n_traj",
            reason: format!("need at least 100 trajectories, got {}", opts.n_traj),
        });
    }
    if opts.sample_every == 0 {
        return Err(Error::InvalidParameter {
            name: "sample_every",
            reason: "must be at least 1".into(),
        });
    }
    let dim = psi0.len();
    let engine = TrajectoryEngine::new(dim, params, opts.dt, opts.scheme)?;
    let n_steps = (opts.t_end / opts.dt).round() as usize;
    let kind = NoiseKind::from_params(params);
    let kappa_dimless = params.kappa * params.omega;
    // validates resolution before any parallel work starts
    sample_noise(kind, kappa_dimless, opts.dt, 0, opts.seed, 0)?;

    let run_one = |i: usize| -> Result<Trajectory> {
        let noise = sample_noise(kind, kappa_dimless, opts.dt, n_steps, opts.seed, i as u64)?;
        engine.run(psi0, &noise, opts.sample_every)
    };
    let first = run_one(0)?;
    let n_samples = first.times.len();

    let n_blocks = opts.n_traj.div_ceil(BLOCK);
    let blocks: Vec<Result<Moments>> = (0..n_blocks)
        .into_par_iter()
        .map(|b| {
            let mut acc = Moments::zeros(n_samples, dim);
            for i in b * BLOCK..((b + 1) * BLOCK).min(opts.n_traj) {
                if i == 0 {
                    acc.add_trajectory(&first);
                } else {
                    acc.add_trajectory(&run_one(i)?);
                }
            }
            Ok(acc)
        })
        .collect();
    let mut total = Moments::zeros(n_samples, dim);
    for block in blocks {
        total.merge(&block?);
    }

    let n = opts.n_traj as f64;
    let mut mean = Vec::with_capacity(n_samples);
    let mut stderr_re = Vec::with_capacity(n_samples);
    let mut stderr_im = Vec::with_capacity(n_samples);
    for k in 0..n_samples {
        let m = &total.sum[k] / c(n);
        let se = |sq: &DMatrix<f64>, part: fn(&C64) -> f64| {
            DMatrix::from_fn(dim, dim, |i, j| {
                let mu = part(&m[(i, j)]);
                let var = ((sq[(i, j)] - n * mu * mu) / (n - 1.0)).max(0.0);
                (var / n).sqrt()
            })
        };
        stderr_re.push(se(&total.sq_re[k], |z| z.re));
        stderr_im.push(se(&total.sq_im[k], |z| z.im));
        mean.push(DensityMatrix::from_matrix_unchecked(m));
    }
    Ok(EnsembleResult {
        times: first.times,
        mean,
        stderr_re,
        stderr_im,
        n_traj: opts.n_traj,
        omega: params.omega,
    })
}
