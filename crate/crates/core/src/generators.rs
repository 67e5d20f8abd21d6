//! Right-hand sides of the master equations.
//!
//! Every generator works in dimensionless units: energies in ħω and time in
//! 1/ω, so `apply` returns dρ/d(ωt). The physical parameters live in
//! [`ModelParams`] and are converted to dimensionless rates here.

use std::f64::consts::PI;
use std::sync::OnceLock;

use serde::Serialize;

use crate::analytic::FreeParticleParams;
use crate::error::{Error, Result};
use crate::fock::{self, DensityMatrix, Operator};
use crate::linalg::{self, c, CMatrix, CVector, SparseRows, I};

/// CODATA 2018 values (SI units).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhysicalConstants {
    pub hbar: f64,
    pub gravitational: f64,
    pub speed_of_light: f64,
    pub planck_length: f64,
    pub planck_mass: f64,
    pub planck_energy: f64,
    pub planck_time: f64,
}

pub const CODATA: PhysicalConstants = PhysicalConstants {
    hbar: 1.054_571_817e-34,
    gravitational: 6.674_30e-11,
    speed_of_light: 299_792_458.0,
    planck_length: 1.616_255e-35,
    planck_mass: 2.176_434e-8,
    planck_energy: 1.956_081e9,
    planck_time: 5.391_247e-44,
};

impl PhysicalConstants {
    /// ℓ_P recomputed from ħ, G and c.
    pub fn derived_planck_length(&self) -> f64 {
        (self.hbar * self.gravitational / self.speed_of_light.powi(3)).sqrt()
    }

    /// Coupling a_P = m ℓ_P² / ħ² (units 1/J).
    pub fn a_p(&self, mass: f64) -> f64 {
        mass * self.planck_length.powi(2) / self.hbar.powi(2)
    }

    /// Dimensionless a_P ħω for an oscillator of mass `mass` and angular frequency `omega`.
    pub fn ap_hw(&self, mass: f64, omega: f64) -> f64 {
        self.a_p(mass) * self.hbar * omega
    }
}

/// Correlation function f(t − t′) of the deformation-parameter noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum KernelSpec {
    Delta,
    /// f(u) = e^{−|u|/τ}/(2τ); `tau` in seconds.
    Exponential {
        tau: f64,
    },
}

impl KernelSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            KernelSpec::Delta => Ok(()),
            KernelSpec::Exponential { tau } if tau > 0.0 && tau.is_finite() => Ok(()),
            KernelSpec::Exponential { tau } => Err(Error::InvalidParameter {
                name: "tau",
                reason: format!("exponential kernel needs tau > 0, got {tau}"),
            }),
        }
    }

    /// Value of the exponential kernel at lag `u` (same time unit as `tau`).
    pub fn exponential_value(tau: f64, u: f64) -> f64 {
        (-u.abs() / tau).exp() / (2.0 * tau)
    }
}

/// Which Ĥ′ drives the coherent part and the interaction picture.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum HamiltonianKind {
    /// Diagonal rotating-wave form.
    #[default]
    Rwa,
    /// Ĥ + 4 a_P β̄ K̂² without the rotating-wave approximation.
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModelParams {
    /// Angular frequency ω (rad/s).
    pub omega: f64,
    /// Energy relaxation rate γ (1/s).
    pub gamma: f64,
    pub beta_bar: f64,
    /// Fluctuation amplitude κ (s).
    pub kappa: f64,
    /// Metric-fluctuation correlation time τ_c (s).
    pub tau_c: f64,
    /// a_P ħω
    pub ap_hw: f64,
    pub kernel: KernelSpec,
    pub hamiltonian: HamiltonianKind,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self {
            omega: 2.0 * PI * 5.96e9,
            gamma: 0.0,
            beta_bar: 0.0,
            kappa: 0.0,
            tau_c: 0.0,
            ap_hw: 1.5e-33,
            kernel: KernelSpec::Delta,
            hamiltonian: HamiltonianKind::Rwa,
        }
    }
}

fn non_negative(name: &'static str, v: f64) -> Result<()> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name,
            reason: format!("must be finite and non-negative, got {v}"),
        })
    }
}

impl ModelParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.omega > 0.0 && self.omega.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "omega",
                reason: format!("must be positive, got {}", self.omega),
            });
        }
        non_negative("gamma", self.gamma)?;
        non_negative("kappa", self.kappa)?;
        non_negative("tau_c", self.tau_c)?;
        non_negative("ap_hw", self.ap_hw)?;
        if !self.beta_bar.is_finite() {
            return Err(Error::InvalidParameter {
                name: "beta_bar",
                reason: "must be finite".into(),
            });
        }
        self.kernel.validate()
    }

    /// Sets κ so that ωτ_G takes the requested value.
    pub fn with_omega_tau_g(mut self, omega_tau_g: f64) -> Self {
        self.kappa = 1.0 / (8.0 * self.ap_hw.powi(2) * self.omega * omega_tau_g);
        self
    }

    /// Sets τ_c so that ωτ_D takes the requested value.
    pub fn with_omega_tau_d(mut self, omega_tau_d: f64) -> Self {
        self.tau_c = 1.0 / (self.omega * omega_tau_d);
        self
    }

    /// γ/ω
    pub fn gamma_dimless(&self) -> f64 {
        self.gamma / self.omega
    }

    /// 1/(ωτ_G) = 8 (a_P ħω)² κ ω: coefficient of the Markovian double commutator.
    pub fn gup_rate(&self) -> f64 {
        8.0 * self.ap_hw.powi(2) * self.kappa * self.omega
    }

    /// 1/(ωτ_D) = τ_c ω; the Breuer double commutator carries half of it.
    pub fn breuer_rate(&self) -> f64 {
        self.tau_c * self.omega
    }

    /// τ_G in seconds (infinite when κ = 0).
    pub fn tau_g(&self) -> f64 {
        1.0 / (self.gup_rate() * self.omega)
    }

    /// τ_D in seconds (infinite when τ_c = 0).
    pub fn tau_d(&self) -> f64 {
        1.0 / (self.breuer_rate() * self.omega)
    }

    /// Kernel correlation time in units of 1/ω.
    pub fn kernel_tau_dimless(&self) -> Option<f64> {
        match self.kernel {
            KernelSpec::Delta => None,
            KernelSpec::Exponential { tau } => Some(tau * self.omega),
        }
    }
}

/// Eigenvalue of Ĥ_RWA/(ħω) at level n.
pub fn rwa_energy(n: usize, beta_bar: f64, ap_hw: f64) -> f64 {
    let n = n as f64;
    (n + 0.5) + 0.375 * ap_hw * beta_bar * (n * n + n + 0.5)
}

/// Ĥ_RWA/(ħω) = (N̂ + ½) + (3/8) a_PħΩ β̄ (N̂² + N̂ + ½).
pub fn h_rwa(dim: usize, beta_bar: f64, ap_hw: f64) -> Result<Operator> {
    if dim < 2 {
        return Err(Error::InvalidDimension { dim, min: 2 });
    }
    let diag = CVector::from_fn(dim, |n, _| c(rwa_energy(n, beta_bar, ap_hw)));
    Ok(Operator::from_parts(CMatrix::from_diagonal(&diag), true))
}

/// (N̂ + ½) + 4 a_PħΩ β̄ K̂²/(ħω)², the deformed Hamiltonian without RWA.
pub fn h_full(dim: usize, beta_bar: f64, ap_hw: f64) -> Result<Operator> {
    let k2 = fock::kinetic_squared(dim)?;
    let n = fock::number(dim)?;
    let m =
        n.matrix() + CMatrix::identity(dim, dim) * c(0.5) + k2.matrix() * c(4.0 * ap_hw * beta_bar);
    Ok(Operator::from_parts(linalg::hermitize(&m), true))
}

pub fn h_prime(dim: usize, params: &ModelParams) -> Result<Operator> {
    match params.hamiltonian {
        HamiltonianKind::Rwa => h_rwa(dim, params.beta_bar, params.ap_hw),
        HamiltonianKind::Full => h_full(dim, params.beta_bar, params.ap_hw),
    }
}

/// A term of a master equation: returns dρ/d(ωt) at dimensionless time `t`.
pub trait Generator: Send + Sync {
    fn dim(&self) -> usize;
    fn apply(&self, t: f64, rho: &CMatrix) -> CMatrix;
}

impl<G: Generator + ?Sized> Generator for Box<G> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn apply(&self, t: f64, rho: &CMatrix) -> CMatrix {
        (**self).apply(t, rho)
    }
}

/// Adapts a closure into a [`Generator`].
pub struct FnGenerator<F> {
    dim: usize,
    f: F,
}

impl<F> FnGenerator<F>
where
    F: Fn(f64, &CMatrix) -> CMatrix + Send + Sync,
{
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<F> Generator for FnGenerator<F>
where
    F: Fn(f64, &CMatrix) -> CMatrix + Send + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }
    fn apply(&self, t: f64, rho: &CMatrix) -> CMatrix {
        (self.f)(t, rho)
    }
}

/// Zero right-hand side.
pub struct Null(pub usize);

impl Generator for Null {
    fn dim(&self) -> usize {
        self.0
    }
    fn apply(&self, _t: f64, rho: &CMatrix) -> CMatrix {
        CMatrix::zeros(rho.nrows(), rho.ncols())
    }
}

/// Sum of generators, evaluated in insertion order.
#[derive(Default)]
pub struct Composite {
    terms: Vec<Box<dyn Generator>>,
}

impl Composite {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, term: impl Generator + 'static) -> Self {
        self.terms.push(Box::new(term));
        self
    }

    pub fn push(&mut self, term: Box<dyn Generator>) {
        self.terms.push(term);
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }
}

impl Generator for Composite {
    fn dim(&self) -> usize {
        self.terms.first().map_or(0, |t| t.dim())
    }

    fn apply(&self, t: f64, rho: &CMatrix) -> CMatrix {
        let mut terms = self.terms.iter();
        let Some(first) = terms.next() else {
            return CMatrix::zeros(rho.nrows(), rho.ncols());
        };
        let mut out = first.apply(t, rho);
        for term in terms {
            out += term.apply(t, rho);
        }
        out
    }
}

/// −i[Ĥ, ρ]
pub struct Unitary {
    h: CMatrix,
    diagonal: Option<Vec<f64>>,
}

impl Unitary {
    pub fn new(h: &Operator) -> Result<Self> {
        let m = h.matrix();
        let deviation = linalg::hermiticity_deviation(m);
        if deviation > 1e-12 {
            return Err(Error::NotHermitian { deviation });
        }
        let n = m.nrows();
        let is_diag = (0..n).all(|i| (0..n).all(|j| i == j || m[(i, j)].norm() == 0.0));
        let diagonal = is_diag.then(|| (0..n).map(|i| m[(i, i)].re).collect());
        Ok(Self {
            h: m.clone(),
            diagonal,
        })
    }
}

impl Generator for Unitary {
    fn dim(&self) -> usize {
        self.h.nrows()
    }

    fn apply(&self, _t: f64, rho: &CMatrix) -> CMatrix {
        match &self.diagonal {
            Some(e) => CMatrix::from_fn(rho.nrows(), rho.ncols(), |m, n| {
                -I * (e[m] - e[n]) * rho[(m, n)]
            }),
            None => {
                let z = &self.h * rho;
                (&z - z.adjoint()) * (-I)
            }
        }
    }
}

/// −rate·[K̂², [K̂², ρ]], the Markovian fluctuating-deformation dissipator.
pub struct GupDissipator {
    k2: SparseRows,
    rate: f64,
}

impl GupDissipator {
    pub fn new(dim: usize, rate: f64) -> Result<Self> {
        Ok(Self {
            k2: SparseRows::from_dense(fock::kinetic_squared(dim)?.matrix()),
            rate,
        })
    }
}

impl Generator for GupDissipator {
    fn dim(&self) -> usize {
        self.k2.dim()
    }
    fn apply(&self, _t: f64, rho: &CMatrix) -> CMatrix {
        linalg::double_commutator_sparse(&self.k2, rho) * c(-self.rate)
    }
}

/// −(rate/2)·[K̂, [K̂, ρ]], the metric-fluctuation dissipator with rate = τ_c ω.
pub struct BreuerDissipator {
    k: SparseRows,
    rate: f64,
}

impl BreuerDissipator {
    pub fn new(dim: usize, rate: f64) -> Result<Self> {
        Ok(Self {
            k: SparseRows::from_dense(fock::kinetic(dim)?.matrix()),
            rate,
        })
    }
}

impl Generator for BreuerDissipator {
    fn dim(&self) -> usize {
        self.k.dim()
    }
    fn apply(&self, _t: f64, rho: &CMatrix) -> CMatrix {
        linalg::double_commutator_sparse(&self.k, rho) * c(-0.5 * self.rate)
    }
}

/// γ(âρâ† − ½{N̂, ρ}) with γ in units of ω.
pub struct Damping {
    dim: usize,
    gamma: f64,
}

impl Damping {
    pub fn new(dim: usize, gamma: f64) -> Result<Self> {
        non_negative("gamma", gamma)?;
        Ok(Self { dim, gamma })
    }
}

impl Generator for Damping {
    fn dim(&self) -> usize {
        self.dim
    }
    fn apply(&self, _t: f64, rho: &CMatrix) -> CMatrix {
        let d = rho.nrows();
        let g = self.gamma;
        CMatrix::from_fn(d, d, |m, n| {
            let jump = if m + 1 < d && n + 1 < d {
                rho[(m + 1, n + 1)] * (((m + 1) * (n + 1)) as f64).sqrt()
            } else {
                c(0.0)
            };
            (jump - rho[(m, n)] * (0.5 * (m + n) as f64)) * g
        })
    }
}

/// Unitary part plus Markovian dissipator: −i[Ĥ′, ρ] − (1/ωτ_G)[K̂², [K̂², ρ]].
pub fn gup_markov(dim: usize, params: &ModelParams) -> Result<Composite> {
    params.validate()?;
    Ok(Composite::new()
        .with(Unitary::new(&h_prime(dim, params)?)?)
        .with(GupDissipator::new(dim, params.gup_rate())?))
}

/// −i[Ĥ, ρ] − (τ_cω/2)[K̂, [K̂, ρ]] with the undeformed Ĥ = N̂ + ½.
pub fn breuer(dim: usize, params: &ModelParams) -> Result<Composite> {
    params.validate()?;
    Ok(Composite::new()
        .with(Unitary::new(&h_rwa(dim, 0.0, 0.0)?)?)
        .with(BreuerDissipator::new(dim, params.breuer_rate())?))
}

pub fn gup_markov_rhs(rho: &DensityMatrix, params: &ModelParams) -> Result<CMatrix> {
    Ok(gup_markov(rho.dim(), params)?.apply(0.0, rho.matrix()))
}

/// Amplitude damping only; `gamma` in units of ω.
pub fn damping_rhs(rho: &DensityMatrix, gamma: f64) -> Result<CMatrix> {
    Ok(Damping::new(rho.dim(), gamma)?.apply(0.0, rho.matrix()))
}

pub fn breuer_rhs(rho: &DensityMatrix, params: &ModelParams) -> Result<CMatrix> {
    Ok(breuer(rho.dim(), params)?.apply(0.0, rho.matrix()))
}

/// Interaction-picture K̂² under a fixed Hermitian Ĥ′, via its eigenbasis.
#[derive(Debug, Clone)]
pub struct InteractionPicture {
    energies: Vec<f64>,
    basis: CMatrix,
    k2_eigen: CMatrix,
}

impl InteractionPicture {
    pub fn new(h_prime: &Operator) -> Result<Self> {
        let (energies, basis) = linalg::eigh(h_prime.matrix())?;
        let k2 = fock::kinetic_squared(h_prime.dim())?;
        let k2_eigen = basis.adjoint() * k2.matrix() * &basis;
        Ok(Self {
            energies,
            basis,
            k2_eigen,
        })
    }

    pub fn dim(&self) -> usize {
        self.energies.len()
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    /// K̂^{2I}(s) = e^{iĤ′s} K̂² e^{−iĤ′s}
    pub fn k2_at(&self, s: f64) -> CMatrix {
        let e = &self.energies;
        let rotated = CMatrix::from_fn(self.dim(), self.dim(), |m, n| {
            self.k2_eigen[(m, n)] * (I * ((e[m] - e[n]) * s)).exp()
        });
        let out = &self.basis * rotated * self.basis.adjoint();
        linalg::hermitize(&out)
    }

    /// Σ_q w_q K̂^{2I}(−u_q), assembled in the eigenbasis.
    fn weighted_sum(&self, nodes: &[(f64, f64)]) -> CMatrix {
        let e = &self.energies;
        let d = self.dim();
        let summed = CMatrix::from_fn(d, d, |m, n| {
            let delta = e[m] - e[n];
            let phase: num_complex::Complex64 = nodes
                .iter()
                .map(|&(u, w)| (I * (-delta * u)).exp() * w)
                .sum();
            self.k2_eigen[(m, n)] * phase
        });
        linalg::hermitize(&(&self.basis * summed * self.basis.adjoint()))
    }

    fn max_frequency(&self) -> f64 {
        self.energies.last().unwrap_or(&0.0) - self.energies.first().unwrap_or(&0.0)
    }
}

/// K̂^{2I}(s) for the given Ĥ′.
pub fn heisenberg_k2(h_prime: &Operator, s: f64) -> Result<Operator> {
    Ok(Operator::from_parts(
        InteractionPicture::new(h_prime)?.k2_at(s),
        true,
    ))
}

const GL_NODES: usize = 64;
/// Memory integrals stop after this many kernel correlation times.
pub const MEMORY_WINDOW: f64 = 8.0;
/// Phase advance allowed per Gauss–Legendre panel at the fastest Bohr frequency.
const PANEL_PHASE: f64 = 16.0;

fn gauss_legendre_64() -> &'static (Vec<f64>, Vec<f64>) {
    static NODES: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    NODES.get_or_init(|| linalg::gauss_legendre(GL_NODES))
}

/// Time-convolutionless memory term −2/(ωτ_G)·[K̂², [M(t), ρ(t)]] with
/// M(t) = ∫₀^{min(t, 8τ)} f(u) K̂^{2I}(−u) du.
pub struct GupMemoryDissipator {
    picture: InteractionPicture,
    k2: SparseRows,
    rate: f64,
    tau: f64,
    saturated: OnceLock<CMatrix>,
}

impl GupMemoryDissipator {
    pub fn new(dim: usize, params: &ModelParams) -> Result<Self> {
        params.validate()?;
        let tau = params
            .kernel_tau_dimless()
            .ok_or(Error::DeltaKernelRedirect)?;
        let h = h_prime(dim, params)?;
        Ok(Self {
            picture: InteractionPicture::new(&h)?,
            k2: SparseRows::from_dense(fock::kinetic_squared(dim)?.matrix()),
            rate: params.gup_rate(),
            tau,
            saturated: OnceLock::new(),
        })
    }

    /// Kernel correlation time in units of 1/ω.
    pub fn tau(&self) -> f64 {
        self.tau
    }

    fn quadrature_nodes(&self, window: f64) -> Vec<(f64, f64)> {
        let (x, w) = gauss_legendre_64();
        let panels = ((window * self.picture.max_frequency() / PANEL_PHASE).ceil() as usize).max(1);
        let h = window / panels as f64;
        let mut out = Vec::with_capacity(panels * GL_NODES);
        for p in 0..panels {
            let a = p as f64 * h;
            for (xi, wi) in x.iter().zip(w) {
                let u = a + 0.5 * h * (xi + 1.0);
                out.push((u, 0.5 * h * wi * KernelSpec::exponential_value(self.tau, u)));
            }
        }
        out
    }

    /// M(t) in the Fock basis.
    pub fn memory_operator(&self, t: f64) -> CMatrix {
        let full = MEMORY_WINDOW * self.tau;
        if t >= full {
            return self
                .saturated
                .get_or_init(|| self.picture.weighted_sum(&self.quadrature_nodes(full)))
                .clone();
        }
        if t <= 0.0 {
            let d = self.picture.dim();
            return CMatrix::zeros(d, d);
        }
        self.picture.weighted_sum(&self.quadrature_nodes(t))
    }
}

impl Generator for GupMemoryDissipator {
    fn dim(&self) -> usize {
        self.k2.dim()
    }

    fn apply(&self, t: f64, rho: &CMatrix) -> CMatrix {
        if t <= 0.0 {
            return CMatrix::zeros(rho.nrows(), rho.ncols());
        }
        let m = self.memory_operator(t);
        // [K², [M, ρ]] with M, K², ρ Hermitian
        let x = &m * rho;
        let y = &x - x.adjoint();
        let z = self.k2.mul(&y);
        (&z + z.adjoint()) * c(-2.0 * self.rate)
    }
}

pub fn gup_nonmarkov(dim: usize, params: &ModelParams) -> Result<Composite> {
    let memory = GupMemoryDissipator::new(dim, params)?;
    Ok(Composite::new()
        .with(Unitary::new(&h_prime(dim, params)?)?)
        .with(memory))
}

/// Right-hand side of the memory-kernel master equation at dimensionless time `t`.
///
/// The memory integral acts on ρ(t) itself, so no history of earlier states
/// is needed; only the kernel and Ĥ′ enter M(t).
pub fn gup_nonmarkov_rhs(rho: &DensityMatrix, t: f64, params: &ModelParams) -> Result<CMatrix> {
    if t < 0.0 {
        return Err(Error::InvalidParameter {
            name: "t",
            reason: format!("must be non-negative, got {t}"),
        });
    }
    Ok(gup_nonmarkov(rho.dim(), params)?.apply(t, rho.matrix()))
}

/// Master equation restricted to two momentum eigenstates of a free particle.
///
/// Works in the physical units of [`FreeParticleParams`]; `apply` returns dρ/dt.
pub struct FreeParticleDiagonal {
    energies: [f64; 2],
    kinetic_sq: [f64; 2],
    params: FreeParticleParams,
}

impl FreeParticleDiagonal {
    pub fn new(kinetic: [f64; 2], params: FreeParticleParams) -> Result<Self> {
        params.kernel.validate()?;
        let shift = 4.0 * params.a_p * params.beta_bar;
        let energies = [
            kinetic[0] + shift * kinetic[0].powi(2),
            kinetic[1] + shift * kinetic[1].powi(2),
        ];
        Ok(Self {
            energies,
            kinetic_sq: [kinetic[0].powi(2), kinetic[1].powi(2)],
            params,
        })
    }

    /// ∫₀ᵗ f(t − t′) dt′
    fn kernel_weight(&self, t: f64) -> f64 {
        match self.params.kernel {
            KernelSpec::Delta => 0.5,
            KernelSpec::Exponential { tau } => 0.5 * (1.0 - (-t / tau).exp()),
        }
    }
}

impl Generator for FreeParticleDiagonal {
    fn dim(&self) -> usize {
        2
    }

    fn apply(&self, t: f64, rho: &CMatrix) -> CMatrix {
        let p = &self.params;
        let hbar = p.hbar;
        let coupling = 16.0 * p.a_p.powi(2) * p.kappa / hbar.powi(2) * self.kernel_weight(t);
        let h = CMatrix::from_diagonal(&CVector::from_vec(vec![
            c(self.energies[0]),
            c(self.energies[1]),
        ]));
        let k2 = CMatrix::from_diagonal(&CVector::from_vec(vec![
            c(self.kinetic_sq[0]),
            c(self.kinetic_sq[1]),
        ]));
        let unitary = linalg::commutator(&h, rho) * (-I / hbar);
        unitary - linalg::double_commutator(&k2, &k2, rho) * c(coupling)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn params_with_rates(omega_tau_g: f64) -> ModelParams {
        ModelParams {
            beta_bar: 1.0,
            ..ModelParams::default()
        }
        .with_omega_tau_g(omega_tau_g)
    }

    #[test]
    fn rwa_levels() {
        let h = h_rwa(4, 0.0, 0.0).unwrap();
        assert!((h.element(0, 0).re - 0.5).abs() < 1e-15);
        let h = h_rwa(4, 1.0, 8.0 / 3.0).unwrap();
        assert!((h.element(1, 1).re - 4.0).abs() < 1e-14);
        let (s, b) = (0.01, 2.0);
        let e: Vec<f64> = (0..3).map(|n| rwa_energy(n, b, s)).collect();
        assert!(((e[2] - e[1]) - (e[1] - e[0]) - 0.75 * s * b).abs() < 1e-14);
    }

    #[test]
    fn stationary_state_has_zero_derivative() {
        let p = ModelParams::default();
        let rho = DensityMatrix::fock(3, 10).unwrap();
        let d = gup_markov_rhs(&rho, &p).unwrap();
        assert!(d.norm() < 1e-15);
    }

    #[test]
    fn gup_markov_population_slopes() {
        let p = params_with_rates(1e5);
        let rate = p.gup_rate();
        assert!((rate - 1e-5).abs() < 1e-18);
        let d0 = gup_markov_rhs(&DensityMatrix::fock(0, 12).unwrap(), &p).unwrap();
        assert!((d0[(0, 0)].re / rate + 6.0 / 8.0).abs() < 1e-12);
        let d1 = gup_markov_rhs(&DensityMatrix::fock(1, 12).unwrap(), &p).unwrap();
        assert!((d1[(1, 1)].re / rate + 45.0 / 8.0).abs() < 1e-12);
    }

    #[test]
    fn damping_examples() {
        let g = 0.3;
        let d = damping_rhs(&DensityMatrix::fock(0, 5).unwrap(), g).unwrap();
        assert!(d.norm() < 1e-16);
        let d = damping_rhs(&DensityMatrix::fock(1, 5).unwrap(), g).unwrap();
        assert!((d[(1, 1)].re + g).abs() < 1e-15);
        assert!((d[(0, 0)].re - g).abs() < 1e-15);
        let rho = DensityMatrix::superposition01(5).unwrap();
        let d = damping_rhs(&rho, g).unwrap();
        assert!((d[(0, 1)] - rho.element(0, 1) * (-g / 2.0)).norm() < 1e-15);
    }

    #[test]
    fn breuer_slopes_and_noiseless_limit() {
        let p = ModelParams::default().with_omega_tau_d(1e5);
        let rate = p.breuer_rate();
        let d0 = breuer_rhs(&DensityMatrix::fock(0, 10).unwrap(), &p).unwrap();
        assert!((d0[(0, 0)].re / rate + 1.0 / 8.0).abs() < 1e-10);
        let d1 = breuer_rhs(&DensityMatrix::fock(1, 10).unwrap(), &p).unwrap();
        assert!((d1[(1, 1)].re / rate + 3.0 / 8.0).abs() < 1e-10);

        let quiet = ModelParams::default();
        let rho = DensityMatrix::superposition01(6).unwrap();
        let d = breuer_rhs(&rho, &quiet).unwrap();
        let unitary = Unitary::new(&h_rwa(6, 0.0, 0.0).unwrap())
            .unwrap()
            .apply(0.0, rho.matrix());
        assert_eq!(d, unitary);
    }

    #[test]
    fn heisenberg_k2_identity_and_table() {
        let h = h_rwa(10, 1.0, 0.05).unwrap();
        let k2 = fock::kinetic_squared(10).unwrap();
        let at0 = heisenberg_k2(&h, 0.0).unwrap();
        assert!((at0.matrix() - k2.matrix()).norm() < 1e-13);
        let tau = 0.731;
        let e = |n| rwa_energy(n, 1.0, 0.05);
        let k = heisenberg_k2(&h, tau).unwrap();
        let expect02 = (I * ((e(0) - e(2)) * tau)).exp() * (-3.0 * 2f64.sqrt() / 8.0);
        assert!((k.element(0, 2) - expect02).norm() < 1e-12);
        let expect15 = (I * ((e(1) - e(5)) * tau)).exp() * (30f64.sqrt() / 8.0);
        assert!((k.element(1, 5) - expect15).norm() < 1e-12);
    }

    #[test]
    fn heisenberg_k2_rejects_non_hermitian() {
        let a = fock::ladder(4).unwrap();
        assert!(matches!(
            heisenberg_k2(&a, 1.0),
            Err(Error::NotHermitian { .. })
        ));
    }

    #[test]
    fn heisenberg_k2_preserves_spectrum_for_full_hamiltonian() {
        let p = ModelParams {
            beta_bar: 1.0,
            ap_hw: 0.02,
            hamiltonian: HamiltonianKind::Full,
            ..ModelParams::default()
        };
        let h = h_prime(8, &p).unwrap();
        let k2 = fock::kinetic_squared(8).unwrap();
        let mut a = k2.spectrum().unwrap();
        let mut b = heisenberg_k2(&h, 2.3).unwrap().spectrum().unwrap();
        a.sort_by(f64::total_cmp);
        b.sort_by(f64::total_cmp);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-10);
        }
    }

    #[test]
    fn nonmarkov_rejects_delta_kernel() {
        let p = params_with_rates(1e4);
        let rho = DensityMatrix::fock(0, 8).unwrap();
        assert_eq!(
            gup_nonmarkov_rhs(&rho, 1.0, &p).unwrap_err(),
            Error::DeltaKernelRedirect
        );
    }

    #[test]
    fn nonmarkov_memory_vanishes_at_origin() {
        let mut p = params_with_rates(1e4);
        p.kernel = KernelSpec::Exponential { tau: 0.5 / p.omega };
        let rho = DensityMatrix::fock(0, 8).unwrap();
        let d = gup_nonmarkov_rhs(&rho, 0.0, &p).unwrap();
        assert!(d.norm() < 1e-16);
    }

    /// Closed form of ∫₀^L e^{−u/τ}/(2τ) e^{−iΔu} du.
    fn memory_weight_exact(delta: f64, tau: f64, window: f64) -> num_complex::Complex64 {
        let z = c(1.0 / tau) + I * delta;
        (c(1.0) - (-z * window).exp()) / ((c(1.0) + I * (delta * tau)) * 2.0)
    }

    #[test]
    fn memory_operator_matches_closed_form() {
        let dim = 12;
        for (tau, t) in [(0.3, 0.7), (0.3, 10.0), (5.0, 13.0), (5.0, 60.0)] {
            let mut p = params_with_rates(1e4);
            p.ap_hw = 0.01;
            p = p.with_omega_tau_g(1e4);
            p.kernel = KernelSpec::Exponential { tau: tau / p.omega };
            let mem = GupMemoryDissipator::new(dim, &p).unwrap();
            let m = mem.memory_operator(t);
            let k2 = fock::kinetic_squared(dim).unwrap();
            let window = t.min(MEMORY_WINDOW * tau);
            let e = |n| rwa_energy(n, p.beta_bar, p.ap_hw);
            for a in 0..dim {
                for b in 0..dim {
                    let expect = k2.element(a, b) * memory_weight_exact(e(a) - e(b), tau, window);
                    assert!(
                        (m[(a, b)] - expect).norm() < 1e-12,
                        "tau={tau} t={t} ({a},{b})"
                    );
                }
            }
        }
    }

    #[test]
    fn nonmarkov_approaches_markov_for_short_memory() {
        let mut p = params_with_rates(1e4);
        let markov = gup_markov(12, &p).unwrap();
        p.kernel = KernelSpec::Exponential {
            tau: 1e-4 / p.omega,
        };
        let nm = gup_nonmarkov(12, &p).unwrap();
        let t = 20.0 * 1e-4;
        for n in 0..=5 {
            let rho = DensityMatrix::fock(n, 12).unwrap();
            let a = markov.apply(0.0, rho.matrix())[(n, n)].re;
            let b = nm.apply(t, rho.matrix())[(n, n)].re;
            assert!(((b - a) / a).abs() < 0.01, "n={n}: {a} vs {b}");
        }
    }

    #[test]
    fn composite_sums_in_order() {
        let dim = 6;
        let a = Damping::new(dim, 0.1).unwrap();
        let b = GupDissipator::new(dim, 0.01).unwrap();
        let rho = DensityMatrix::superposition01(dim).unwrap();
        let expect = a.apply(0.0, rho.matrix()) + b.apply(0.0, rho.matrix());
        let sum = Composite::new().with(a).with(b);
        assert_eq!(sum.apply(0.0, rho.matrix()), expect);
        assert_eq!(Composite::new().apply(0.0, rho.matrix()).norm(), 0.0);
    }

    #[test]
    fn constants_are_consistent() {
        let lp = CODATA.derived_planck_length();
        assert!((lp / CODATA.planck_length - 1.0).abs() < 1e-5);
        // m = 16.2 μg at 5.96 GHz reproduces a_PħΩ ≈ 1.5e-33
        let ap_hw = CODATA.ap_hw(16.2e-9, 2.0 * PI * 5.96e9);
        assert!((ap_hw / 1.5e-33 - 1.0).abs() < 0.01);
    }

    fn random_hermitian(seed: &[f64], dim: usize) -> CMatrix {
        let m = CMatrix::from_fn(dim, dim, |i, j| {
            let k = (i * dim + j) % seed.len();
            num_complex::Complex64::new(seed[k], seed[(k + 1) % seed.len()] * (i as f64 - j as f64))
        });
        linalg::hermitize(&m)
    }

    proptest! {
        #[test]
        fn dissipators_are_traceless_and_hermitian(
            seed in proptest::collection::vec(-1.0f64..1.0, 8..16),
            t in 0.0f64..30.0,
        ) {
            let dim = 7;
            let rho = random_hermitian(&seed, dim);
            let mut p = params_with_rates(50.0);
            p.ap_hw = 0.01;
            p = p.with_omega_tau_g(50.0).with_omega_tau_d(30.0);
            p.gamma = 0.2 * p.omega;
            let mut nm = p;
            nm.kernel = KernelSpec::Exponential { tau: 0.8 / p.omega };
            let terms: Vec<Box<dyn Generator>> = vec![
                Box::new(GupDissipator::new(dim, p.gup_rate()).unwrap()),
                Box::new(BreuerDissipator::new(dim, p.breuer_rate()).unwrap()),
                Box::new(Damping::new(dim, p.gamma_dimless()).unwrap()),
                Box::new(GupMemoryDissipator::new(dim, &nm).unwrap()),
                Box::new(Unitary::new(&h_full(dim, 1.0, 0.01).unwrap()).unwrap()),
            ];
            let scale = rho.norm();
            for term in &terms {
                let d = term.apply(t, &rho);
                prop_assert!(linalg::trace(&d).norm() < 1e-12 * scale.max(1.0));
                prop_assert!(linalg::hermiticity_deviation(&d) < 1e-12 * scale.max(1.0));
            }
        }

        #[test]
        fn gup_dissipator_linear_in_kappa(factor in 0.1f64..10.0) {
            let p = params_with_rates(1e3);
            let mut q = p;
            q.kappa *= factor;
            let rho = DensityMatrix::superposition01(8).unwrap();
            let a = GupDissipator::new(8, p.gup_rate()).unwrap().apply(0.0, rho.matrix());
            let b = GupDissipator::new(8, q.gup_rate()).unwrap().apply(0.0, rho.matrix());
            prop_assert!((a * c(factor) - b).norm() < 1e-14);
        }

        #[test]
        fn interaction_picture_preserves_frobenius_norm(s in -50.0f64..50.0) {
            let h = h_rwa(10, 1.0, 0.03).unwrap();
            let k = heisenberg_k2(&h, s).unwrap();
            let k0 = fock::kinetic_squared(10).unwrap();
            prop_assert!((k.matrix().norm() - k0.matrix().norm()).abs() < 1e-10);
        }
    }
}
