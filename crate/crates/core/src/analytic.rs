//! Closed-form results: free-particle coherences, kernel integrals,
//! interaction-picture matrix elements, first-order decay laws, the exact
//! damping series and the deformed ground-state variance.
//!
//! Unless noted otherwise times are dimensionless (ωt) and rates are in units
//! of ω; `tau_g`, `tau_d` are ωτ_G and ωτ_D.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::generators::{rwa_energy, KernelSpec, CODATA};
use crate::linalg::{self, c, CMatrix, C64, I};

/// First-order formulas are trusted only while t/τ stays below this.
pub const VALIDITY_LIMIT: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ValidityWarning {
    /// t/τ at the evaluation point.
    pub ratio: f64,
}

/// Value from a perturbative formula together with an extrapolation flag.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Checked<T> {
    pub value: T,
    pub warning: Option<ValidityWarning>,
}

impl<T> Checked<T> {
    fn new(value: T, t: f64, tau: f64) -> Self {
        let ratio = t / tau;
        let warning = (ratio > VALIDITY_LIMIT).then_some(ValidityWarning { ratio });
        Self { value, warning }
    }
}

/// g(t) = ∫₀ᵗ dt′ ∫₀^{t′} dt″ f(t′ − t″); `t` in the same unit as the kernel τ.
pub fn g_kernel(t: f64, kernel: &KernelSpec) -> f64 {
    match *kernel {
        KernelSpec::Delta => 0.5 * t,
        KernelSpec::Exponential { tau } => 0.5 * t - 0.5 * tau * (-(-t / tau).exp_m1()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FreeParticlePair {
    pub p_a: f64,
    pub p_b: f64,
    pub mass: f64,
}

impl FreeParticlePair {
    pub fn new(p_a: f64, p_b: f64, mass: f64) -> Result<Self> {
        if !(mass > 0.0 && mass.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "mass",
                reason: format!("must be positive, got {mass}"),
            });
        }
        Ok(Self { p_a, p_b, mass })
    }

    /// Kinetic energies p²/2m of the two momenta.
    pub fn kinetic(&self) -> [f64; 2] {
        [
            self.p_a * self.p_a / (2.0 * self.mass),
            self.p_b * self.p_b / (2.0 * self.mass),
        ]
    }

    /// (p_a²/2m)^k − (p_b²/2m)^k
    pub fn delta_e(&self, k: i32) -> f64 {
        let [a, b] = self.kinetic();
        a.powi(k) - b.powi(k)
    }
}

/// Couplings of the free-particle model in any consistent unit system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FreeParticleParams {
    pub hbar: f64,
    /// a_P, inverse energy.
    pub a_p: f64,
    pub beta_bar: f64,
    /// κ, time.
    pub kappa: f64,
    pub kernel: KernelSpec,
}

impl FreeParticleParams {
    /// SI couplings for a particle of mass `mass`.
    pub fn si(mass: f64, beta_bar: f64, kappa: f64, kernel: KernelSpec) -> Self {
        Self {
            hbar: CODATA.hbar,
            a_p: CODATA.a_p(mass),
            beta_bar,
            kappa,
            kernel,
        }
    }
}

/// ρ_ab(t)/ρ_ab(0) for two momentum eigenstates.
pub fn free_particle_coherence(
    pair: &FreeParticlePair,
    t: f64,
    params: &FreeParticleParams,
) -> C64 {
    let de1 = pair.delta_e(1);
    let de2 = pair.delta_e(2);
    let hbar = params.hbar;
    let phase = -(de1 + 4.0 * params.a_p * de2 * params.beta_bar) * t / hbar;
    let decay = 16.0 * params.a_p.powi(2) * params.kappa / hbar.powi(2)
        * de2
        * de2
        * g_kernel(t, &params.kernel);
    (I * phase).exp() * (-decay).exp()
}

/// Time-independent ⟨m|K̂²|n⟩ entries with a closed form.
fn k2_table(m: usize, n: usize) -> Option<f64> {
    let s2 = 2f64.sqrt();
    let s6 = 6f64.sqrt();
    let s30 = 30f64.sqrt();
    let (lo, hi) = if m <= n { (m, n) } else { (n, m) };
    match (lo, hi) {
        (0, 0) => Some(3.0 / 16.0),
        (1, 1) => Some(15.0 / 16.0),
        (0, 2) => Some(-3.0 * s2 / 8.0),
        (0, 4) => Some(s6 / 8.0),
        (1, 3) => Some(-5.0 * s6 / 8.0),
        (1, 5) => Some(s30 / 8.0),
        _ => None,
    }
}

/// ⟨m|K̂^{2I}(τ)|n⟩ under Ĥ_RWA, in units (ħω)².
pub fn k2_matrix_element(m: usize, n: usize, tau: f64, beta_bar: f64, ap_hw: f64) -> Result<C64> {
    let gap = m.abs_diff(n);
    if gap % 2 == 1 || gap > 4 {
        return Ok(c(0.0));
    }
    let value = k2_table(m, n).ok_or(Error::UnsupportedElement { m, n })?;
    let de = rwa_energy(m, beta_bar, ap_hw) - rwa_energy(n, beta_bar, ap_hw);
    Ok((I * (de * tau)).exp() * value)
}

/// C(τ, t′) = ⟨0|[K̂^{2I}(τ), [K̂^{2I}(t′), ρ(0)]]|1⟩ for ρ(0) = (|0⟩+|1⟩)(⟨0|+⟨1|)/2,
/// in units (ħω)⁴.
pub fn c_correlator(tau: f64, t_prime: f64, beta_bar: f64, ap_hw: f64) -> C64 {
    let e = |n| rwa_energy(n, beta_bar, ap_hw);
    let lag = tau - t_prime;
    c(9.0 / 32.0)
        + (I * ((e(0) - e(2)) * lag)).exp() * (9.0 / 64.0)
        + (I * ((e(0) - e(4)) * lag)).exp() * (3.0 / 64.0)
        + (I * ((e(1) - e(3)) * -lag)).exp() * (75.0 / 64.0)
        + (I * ((e(1) - e(5)) * -lag)).exp() * (15.0 / 64.0)
}

/// ⟨0|ρ(t)|1⟩ from the equal superposition under the Markovian GUP model.
pub fn gup_coherence01(t: f64, gamma: f64, tau_g: f64, beta_bar: f64, ap_hw: f64) -> Checked<C64> {
    let gap = rwa_energy(0, beta_bar, ap_hw) - rwa_energy(1, beta_bar, ap_hw);
    let value =
        (I * (-gap * t)).exp() * (0.5 * (-0.5 * gamma * t).exp() * (1.0 - 30.0 / 8.0 * t / tau_g));
    Checked::new(value, t, tau_g)
}

/// (⟨0|ρ|0⟩ starting from |0⟩, ⟨1|ρ|1⟩ starting from |1⟩) under the Markovian GUP model.
pub fn gup_populations(t: f64, gamma: f64, tau_g: f64) -> Checked<(f64, f64)> {
    let p00 = 1.0 - 6.0 / 8.0 * t / tau_g;
    let p11 = (-gamma * t).exp() * (1.0 - 45.0 / 8.0 * t / tau_g);
    Checked::new((p00, p11), t, tau_g)
}

/// (⟨0|ρ|1⟩, p00, p11) for the metric-fluctuation model.
pub fn breuer_observables(t: f64, gamma: f64, tau_d: f64) -> Checked<(C64, f64, f64)> {
    let coh = (I * t).exp() * (0.5 * (-0.5 * gamma * t).exp() * (1.0 - 3.0 / 8.0 * t / tau_d));
    let p00 = 1.0 - 1.0 / 8.0 * t / tau_d;
    let p11 = (-gamma * t).exp() * (1.0 - 3.0 / 8.0 * t / tau_d);
    Checked::new((coh, p00, p11), t, tau_d)
}

/// Coefficients (coherence, ground population, excited population) of the
/// first-order decay laws, in units of the model's 1/τ.
pub const GUP_COEFFICIENTS: (f64, f64, f64) = (30.0 / 8.0, 6.0 / 8.0, 45.0 / 8.0);
pub const BREUER_COEFFICIENTS: (f64, f64, f64) = (3.0 / 8.0, 1.0 / 8.0, 3.0 / 8.0);

/// ⟨n1|ρ(t)|n2⟩ under amplitude damping and the diagonal Ĥ_RWA, summed exactly.
///
/// Levels above `n_max` of `rho0` are discarded; if they carry more than
/// 1e-10 of weight the truncation is reported as an error.
#[allow(clippy::too_many_arguments)]
pub fn damping_series_element(
    n1: usize,
    n2: usize,
    t: f64,
    gamma: f64,
    beta_bar: f64,
    ap_hw: f64,
    rho0: &CMatrix,
    n_max: usize,
) -> Result<C64> {
    let dim = rho0.nrows();
    if rho0.ncols() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: rho0.ncols(),
        });
    }
    let tail: f64 = (0..dim)
        .flat_map(|m| (0..dim).map(move |n| (m, n)))
        .filter(|&(m, n)| m.max(n) > n_max)
        .map(|(m, n)| rho0[(m, n)].norm())
        .sum();
    if tail > 1e-10 {
        return Err(Error::SeriesTruncation { n_max, tail });
    }
    let top = n_max.min(dim.saturating_sub(1));
    if n1.max(n2) > top {
        return Ok(c(0.0));
    }
    let terms = top - n1.max(n2) + 1;
    let e = |n| rwa_energy(n, beta_bar, ap_hw);
    // dρ_j/dt = f_j ρ_j + γ√((n1+j+1)(n2+j+1)) ρ_{j+1} along the diagonal band
    let mut gen = CMatrix::zeros(terms, terms);
    for j in 0..terms {
        let (a, b) = (n1 + j, n2 + j);
        gen[(j, j)] = -I * (e(a) - e(b)) - c(0.5 * gamma * (a + b) as f64);
        if j + 1 < terms {
            gen[(j, j + 1)] = c(gamma * (((a + 1) * (b + 1)) as f64).sqrt());
        }
    }
    let prop = linalg::expm(&(gen * c(t)));
    Ok((0..terms)
        .map(|k| prop[(0, k)] * rho0[(n1 + k, n2 + k)])
        .sum())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DeformationInputs {
    pub epsilon: f64,
    /// Zero-point fluctuation x₀ (m).
    pub x0: f64,
    pub ap_hw: f64,
}

impl DeformationInputs {
    pub fn new(epsilon: f64, x0: f64, ap_hw: f64) -> Result<Self> {
        if !(0.0..2.0).contains(&epsilon) {
            return Err(Error::InvalidParameter {
                name: "epsilon",
                reason: format!("must lie in [0, 2), got {epsilon}"),
            });
        }
        Ok(Self { epsilon, x0, ap_hw })
    }
}

/// Quadrature variance of the deformed ground state, vacuum = 1/2.
///
/// `theta` is measured from the squeezed axis, which is the momentum
/// quadrature: `theta = 0` gives the minimum ½ − ε/4.
pub fn ground_state_variance(theta: f64, epsilon: f64) -> f64 {
    0.5 - 0.25 * epsilon * (2.0 * theta).cos()
}

/// Δx²_max/Δx²_min = (2+ε)/(2−ε)
pub fn variance_ratio(epsilon: f64) -> f64 {
    (2.0 + epsilon) / (2.0 - epsilon)
}

/// Inverse of [`variance_ratio`].
pub fn epsilon_from_ratio(ratio: f64) -> f64 {
    2.0 * (ratio - 1.0) / (ratio + 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{self, DensityMatrix};
    use crate::generators::{h_full, h_rwa, heisenberg_k2};
    use proptest::prelude::*;

    #[test]
    fn g_kernel_values() {
        assert_eq!(g_kernel(0.0, &KernelSpec::Delta), 0.0);
        assert_eq!(g_kernel(2.0, &KernelSpec::Delta), 1.0);
        let v = g_kernel(1.0, &KernelSpec::Exponential { tau: 1.0 });
        assert!((v - (0.5 - 0.5 * (1.0 - (-1f64).exp()))).abs() < 1e-15);
        assert!((v - 0.18394).abs() < 1e-5);
    }

    #[test]
    fn free_particle_limits() {
        let p = FreeParticleParams {
            hbar: 1.0,
            a_p: 0.1,
            beta_bar: 2.0,
            kappa: 0.5,
            kernel: KernelSpec::Delta,
        };
        let same = FreeParticlePair::new(1.3, 1.3, 1.0).unwrap();
        assert_eq!(free_particle_coherence(&same, 7.0, &p), c(1.0));
        let mirrored = FreeParticlePair::new(1.3, -1.3, 1.0).unwrap();
        assert!((free_particle_coherence(&mirrored, 7.0, &p).norm() - 1.0).abs() < 1e-15);
        let quiet = FreeParticleParams { kappa: 0.0, ..p };
        let pair = FreeParticlePair::new(1.0, 0.4, 1.0).unwrap();
        assert!((free_particle_coherence(&pair, 3.0, &quiet).norm() - 1.0).abs() < 1e-15);
        assert!(free_particle_coherence(&pair, 3.0, &p).norm() < 1.0);
        assert!(FreeParticlePair::new(1.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn k2_element_examples() {
        for tau in [0.0, 1.7, -40.0] {
            assert_eq!(
                k2_matrix_element(0, 0, tau, 1.0, 0.1).unwrap(),
                c(3.0 / 16.0)
            );
        }
        assert_eq!(k2_matrix_element(0, 1, 2.0, 1.0, 0.1).unwrap(), c(0.0));
        assert_eq!(k2_matrix_element(0, 8, 2.0, 1.0, 0.1).unwrap(), c(0.0));
        let tau = 0.9;
        let (b, s) = (1.0, 0.05);
        let expect = (I * ((rwa_energy(1, b, s) - rwa_energy(3, b, s)) * tau)).exp()
            * (-5.0 * 6f64.sqrt() / 8.0);
        assert!((k2_matrix_element(1, 3, tau, b, s).unwrap() - expect).norm() < 1e-15);
        assert_eq!(
            k2_matrix_element(2, 4, tau, b, s).unwrap_err(),
            Error::UnsupportedElement { m: 2, n: 4 }
        );
    }

    #[test]
    fn k2_table_matches_dense_conjugation() {
        let (b, s) = (1.0, 0.03);
        let h = h_rwa(12, b, s).unwrap();
        for i in 0..50 {
            let tau = -20.0 + 0.8 * i as f64;
            let k = heisenberg_k2(&h, tau).unwrap();
            for (m, n) in [
                (0, 0),
                (1, 1),
                (0, 2),
                (0, 4),
                (1, 3),
                (1, 5),
                (2, 0),
                (5, 1),
            ] {
                let a = k2_matrix_element(m, n, tau, b, s).unwrap();
                assert!((a - k.element(m, n)).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn correlator_zero_lag() {
        let total = 9.0 / 32.0 + 9.0 / 64.0 + 3.0 / 64.0 + 75.0 / 64.0 + 15.0 / 64.0;
        assert_eq!(total, 15.0 / 8.0);
        assert_eq!(c_correlator(3.3, 3.3, 1.0, 0.2), c(15.0 / 8.0));
    }

    #[test]
    fn correlator_matches_nested_commutator() {
        let (b, s) = (1.0, 0.02);
        let h = h_rwa(12, b, s).unwrap();
        let rho = DensityMatrix::superposition01(12).unwrap();
        for i in 0..20 {
            let tau = 0.37 * i as f64 - 2.0;
            let tp = 1.1 - 0.53 * i as f64;
            let ka = heisenberg_k2(&h, tau).unwrap().into_matrix();
            let kb = heisenberg_k2(&h, tp).unwrap().into_matrix();
            let nested = linalg::double_commutator(&ka, &kb, rho.matrix());
            assert!((nested[(0, 1)] - c_correlator(tau, tp, b, s)).norm() < 1e-10);
        }
    }

    #[test]
    fn decay_laws_at_origin_and_warnings() {
        let coh = gup_coherence01(0.0, 0.01, 100.0, 1.0, 0.1);
        assert_eq!(coh.value, c(0.5));
        assert!(coh.warning.is_none());
        assert_eq!(gup_populations(0.0, 0.3, 10.0).value, (1.0, 1.0));
        let (coh, p0, p1) = breuer_observables(0.0, 0.3, 10.0).value;
        assert_eq!((coh, p0, p1), (c(0.5), 1.0, 1.0));
        let late = gup_populations(30.0, 0.0, 100.0);
        assert!((late.warning.unwrap().ratio - 0.3).abs() < 1e-15);
        assert!(gup_populations(20.0, 0.0, 100.0).warning.is_none());
    }

    #[test]
    fn decay_slopes() {
        let h = 1e-6;
        let tau = 50.0;
        let (p0, p1) = gup_populations(h, 0.0, tau).value;
        assert!(((1.0 - p0) / h * tau - 6.0 / 8.0).abs() < 1e-9);
        assert!(((1.0 - p1) / h * tau - 45.0 / 8.0).abs() < 1e-9);
        let coh = gup_coherence01(h, 0.0, tau, 0.0, 0.0).value.norm();
        assert!(((0.5 - coh) / h * tau - 0.5 * 30.0 / 8.0).abs() < 1e-8);
        assert_eq!(BREUER_COEFFICIENTS.0, BREUER_COEFFICIENTS.2);
        assert_ne!(GUP_COEFFICIENTS.0, GUP_COEFFICIENTS.2);
    }

    #[test]
    fn damping_series_reference_elements() {
        let rho0 = DensityMatrix::superposition01(4).unwrap().into_matrix();
        let (g, b, s) = (0.3, 1.0, 0.02);
        for t in [0.0, 0.5, 2.0, 7.0] {
            let e01 = rwa_energy(0, b, s) - rwa_energy(1, b, s);
            let expect = (I * (-e01 * t)).exp() * (0.5 * (-0.5 * g * t).exp());
            let got = damping_series_element(0, 1, t, g, b, s, &rho0, 3).unwrap();
            assert!((got - expect).norm() < 1e-13);
            let p1 = damping_series_element(1, 1, t, g, b, s, &rho0, 3).unwrap();
            assert!((p1 - c(0.5 * (-g * t).exp())).norm() < 1e-13);
            let p0 = damping_series_element(0, 0, t, g, b, s, &rho0, 3).unwrap();
            assert!((p0 - c(1.0 - 0.5 * (-g * t).exp())).norm() < 1e-13);
        }
    }

    #[test]
    fn damping_series_truncation_error() {
        let rho0 = DensityMatrix::fock(3, 5).unwrap().into_matrix();
        assert!(matches!(
            damping_series_element(0, 0, 1.0, 0.1, 0.0, 0.0, &rho0, 2),
            Err(Error::SeriesTruncation { n_max: 2, .. })
        ));
    }

    #[test]
    fn variance_formula() {
        for th in [0.0, 0.4, 2.0] {
            assert_eq!(ground_state_variance(th, 0.0), 0.5);
        }
        let eps = 0.020;
        let r = ground_state_variance(std::f64::consts::FRAC_PI_2, eps)
            / ground_state_variance(0.0, eps);
        assert!((r - variance_ratio(eps)).abs() < 1e-15);
        assert!((r - 1.0202).abs() < 1e-4);
        assert!((epsilon_from_ratio(1.0202) - 0.020).abs() < 1e-4);
        assert!(DeformationInputs::new(2.0, 1.0, 1.0).is_err());
    }

    /// Quadrature variances of the numerically diagonalised deformed ground state.
    fn numeric_variance(theta_from_momentum: f64, epsilon: f64) -> f64 {
        let dim = 40;
        // 4 a_PħΩ β̄ K² with ε = 6 β̄ a_PħΩ
        let h = h_full(dim, 1.0, epsilon / 6.0).unwrap();
        let (_, vecs) = linalg::eigh(h.matrix()).unwrap();
        let ground = DensityMatrix::pure(&vecs.column(0).into_owned()).unwrap();
        let q = fock::quadrature(theta_from_momentum + std::f64::consts::FRAC_PI_2, dim).unwrap();
        let mean = q.expectation(&ground).re;
        q.compose(&q).expectation(&ground).re - mean * mean
    }

    #[test]
    fn variance_matches_diagonalisation() {
        for eps in [1e-4, 1e-3] {
            for th in [0.0, 0.3, 1.0, std::f64::consts::FRAC_PI_2] {
                let d = numeric_variance(th, eps) - ground_state_variance(th, eps);
                assert!(d.abs() < 1e-6, "eps={eps} theta={th}: {d:e}");
            }
        }
    }

    proptest! {
        #[test]
        fn coherence_modulus_non_increasing(t in 0.0f64..50.0, dt in 0.0f64..5.0, tau in 0.01f64..10.0) {
            let pair = FreeParticlePair::new(1.0, 0.3, 2.0).unwrap();
            for kernel in [KernelSpec::Delta, KernelSpec::Exponential { tau }] {
                let p = FreeParticleParams { hbar: 1.0, a_p: 0.2, beta_bar: 1.0, kappa: 0.7, kernel };
                let a = free_particle_coherence(&pair, t, &p).norm();
                let b = free_particle_coherence(&pair, t + dt, &p).norm();
                prop_assert!(b <= a + 1e-15);
            }
        }

        #[test]
        fn damping_series_preserves_trace(t in 0.0f64..20.0, g in 0.0f64..1.0) {
            let mut psi = crate::linalg::CVector::zeros(5);
            for (n, amp) in [0.2, 0.5, 0.1, 0.6, 0.3].iter().enumerate() {
                psi[n] = c(*amp);
            }
            let psi = &psi / c(psi.norm());
            let rho0 = DensityMatrix::pure(&psi).unwrap().into_matrix();
            let tr: C64 = (0..5)
                .map(|n| damping_series_element(n, n, t, g, 1.0, 0.01, &rho0, 4).unwrap())
                .sum();
            prop_assert!((tr - c(1.0)).norm() < 1e-12);
        }
    }
}
