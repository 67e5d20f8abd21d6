//! Decay rates from (T1, T2) and the bounds that follow from them.

use std::f64::consts::PI;

use serde::Serialize;

use super::Measured;
use crate::analytic::{BREUER_COEFFICIENTS, GUP_COEFFICIENTS};
use crate::error::{Error, Result};
use crate::generators::{PhysicalConstants, CODATA};

/// How input uncertainties combine into output uncertainties.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Propagation {
    /// Σ|∂f/∂x_i|σ_i, the worst-case first-order sum.
    #[default]
    Linear,
    /// √Σ(∂f/∂x_i σ_i)² for independent inputs.
    Quadrature,
}

impl Propagation {
    fn combine(&self, terms: &[f64]) -> f64 {
        match self {
            Propagation::Linear => terms.iter().map(|t| t.abs()).sum(),
            Propagation::Quadrature => terms.iter().map(|t| t * t).sum::<f64>().sqrt(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum DecayModel {
    Gup,
    Breuer,
}

impl DecayModel {
    /// (coherence, excited-population) coefficients of 1/τ in the decay laws.
    fn coefficients(&self) -> (f64, f64) {
        let (coh, _, pop) = match self {
            DecayModel::Gup => GUP_COEFFICIENTS,
            DecayModel::Breuer => BREUER_COEFFICIENTS,
        };
        (coh, pop)
    }

    pub fn name(&self) -> &'static str {
        match self {
            DecayModel::Gup => "gup",
            DecayModel::Breuer => "breuer",
        }
    }
}

/// Solution of 1/T1 = γ + a/τ, 1/T2 = γ/2 + b/τ. Times in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateSolution {
    pub model: DecayModel,
    /// γ (1/s)
    pub gamma: Measured,
    /// γ⁻¹ (s)
    pub gamma_inv: Measured,
    /// 1/τ (1/s); zero when the data show no extra dephasing.
    pub rate: Measured,
    /// τ (s); infinite when `rate` is zero.
    pub decay_time: Measured,
}

/// Solves the linearised rate equations for either model.
pub fn solve_rates(
    model: DecayModel,
    t1: Measured,
    t2: Measured,
    propagation: Propagation,
) -> Result<RateSolution> {
    if !(t1.value > 0.0 && t2.value > 0.0) {
        return Err(Error::InvalidParameter {
            name: "T1/T2",
            reason: "both times must be positive".into(),
        });
    }
    let (a_coh, a_pop) = model.coefficients();
    let k = 2.0 * a_coh - a_pop;
    let (u, v) = (1.0 / t1.value, 1.0 / t2.value);
    let excess = 2.0 * v - u;
    if excess < 0.0 {
        return Err(Error::ModelInconsistency(format!(
            "2/T2 = {:.6e} /s is below 1/T1 = {:.6e} /s, so the {} decay time would be negative",
            2.0 * v,
            u,
            model.name()
        )));
    }
    let rate = excess / k;
    let mut gamma = u - a_pop * rate;
    // rounding can leave a tiny negative γ when the data are pure dephasing
    if gamma < 0.0 && gamma > -1e-9 * u {
        gamma = 0.0;
    }
    if gamma < 0.0 {
        return Err(Error::ModelInconsistency(format!(
            "the {} solution needs a negative relaxation rate γ = {gamma:.6e} /s",
            model.name()
        )));
    }
    // derivatives with respect to T1 and T2 through u = 1/T1, v = 1/T2
    let (du, dv) = (-u * u * t1.sigma, -v * v * t2.sigma);
    let rate_sigma = propagation.combine(&[-du / k, 2.0 * dv / k]);
    let gamma_sigma = propagation.combine(&[(1.0 + a_pop / k) * du, -2.0 * a_pop / k * dv]);
    let decay_time = if rate > 0.0 {
        Measured::new(1.0 / rate, rate_sigma / (rate * rate))
    } else {
        Measured::new(f64::INFINITY, f64::INFINITY)
    };
    Ok(RateSolution {
        model,
        gamma: Measured::new(gamma, gamma_sigma),
        gamma_inv: Measured::new(1.0 / gamma, gamma_sigma / (gamma * gamma)),
        rate: Measured::new(rate, rate_sigma),
        decay_time,
    })
}

pub fn solve_rates_gup(t1: Measured, t2: Measured) -> Result<RateSolution> {
    solve_rates(DecayModel::Gup, t1, t2, Propagation::Linear)
}

pub fn solve_rates_breuer(t1: Measured, t2: Measured) -> Result<RateSolution> {
    solve_rates(DecayModel::Breuer, t1, t2, Propagation::Linear)
}

/// κ = 1/(8 (a_PħΩ)² ω² τ_G), seconds.
pub fn kappa_from_tau_g(tau_g: Measured, ap_hw: f64, omega: f64) -> Measured {
    let scale = 1.0 / (8.0 * ap_hw * ap_hw * omega * omega);
    Measured::new(
        scale / tau_g.value,
        scale * tau_g.sigma / (tau_g.value * tau_g.value),
    )
}

/// τ_c = 1/(τ_D ω²), seconds.
pub fn tau_c_from_tau_d(tau_d: Measured, omega: f64) -> Measured {
    let scale = 1.0 / (omega * omega);
    Measured::new(
        scale / tau_d.value,
        scale * tau_d.sigma / (tau_d.value * tau_d.value),
    )
}

/// β̄ = ε/(6 a_PħΩ)
pub fn beta_from_epsilon(epsilon: Measured, ap_hw: f64) -> Measured {
    let scale = 1.0 / (6.0 * ap_hw);
    Measured::new(scale * epsilon.value, scale * epsilon.sigma)
}

/// Value quoted in the literature for ε = 0.020(5); kept next to the naive estimate.
pub const LK_REPORTED: Measured = Measured {
    value: 5.9e-20,
    sigma: 0.8e-20,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LengthEstimate {
    /// l_k = x₀√ε (m)
    pub naive: Measured,
    /// Published value for the same ellipticity (m); its mapping from ε is not stated.
    pub reported: Measured,
}

/// Nonlocality length from ε = l_k²/x₀².
pub fn lk_from_epsilon(epsilon: Measured, x0: f64) -> LengthEstimate {
    let value = x0 * epsilon.value.max(0.0).sqrt();
    let sigma = if epsilon.value > 0.0 {
        x0 * epsilon.sigma / (2.0 * epsilon.value.sqrt())
    } else {
        x0 * epsilon.sigma.sqrt()
    };
    LengthEstimate {
        naive: Measured::new(value, sigma),
        reported: LK_REPORTED,
    }
}

/// Parameter combinations that would make the fluctuation scales Planckian.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PlanckFeasibility {
    /// m²ω⁴τ_G needed for κ = t_P (kg²/s³).
    pub m2_omega4_tau_g: f64,
    /// ω²/γ needed for τ_c = t_P when τ_D ≈ 1/γ (1/s).
    pub omega2_over_gamma: f64,
}

pub fn planck_feasibility(constants: &PhysicalConstants) -> PlanckFeasibility {
    let c = constants;
    PlanckFeasibility {
        m2_omega4_tau_g: c.hbar * c.hbar / (8.0 * c.planck_length.powi(4) * c.planck_time),
        omega2_over_gamma: 1.0 / c.planck_time,
    }
}

/// Oscillator parameters of a device.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DeviceProfile {
    pub name: &'static str,
    /// Mode frequency f (Hz).
    pub frequency: f64,
    /// Effective mass (kg).
    pub mass: f64,
    /// Zero-point fluctuation x₀ (m).
    pub x0: f64,
    pub ap_hw: f64,
}

/// 16.2 μg bulk acoustic resonator at 5.96 GHz.
pub const HBAR_16UG: DeviceProfile = DeviceProfile {
    name: "hbar-16ug",
    frequency: 5.96e9,
    mass: 16.2e-9,
    x0: 2.9e-19,
    ap_hw: 1.5e-33,
};

impl DeviceProfile {
    pub fn omega(&self) -> f64 {
        2.0 * PI * self.frequency
    }

    pub fn by_name(name: &str) -> Option<Self> {
        (name == HBAR_16UG.name).then_some(HBAR_16UG)
    }
}

/// A reported quantity; `value` is `None` when the bound is absent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReportValue {
    pub value: Option<f64>,
    pub sigma: Option<f64>,
    pub unit: &'static str,
    pub model: &'static str,
    /// "<=" for upper bounds, "=" for fitted or derived quantities.
    pub relation: &'static str,
}

impl ReportValue {
    fn finite(
        m: Measured,
        unit: &'static str,
        model: &'static str,
        relation: &'static str,
    ) -> Self {
        let ok = m.value.is_finite();
        Self {
            value: ok.then_some(m.value),
            sigma: (ok && m.sigma.is_finite()).then_some(m.sigma),
            unit,
            model,
            relation,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundsInputs {
    /// T1 (s)
    pub t1: Measured,
    /// T2 (s)
    pub t2: Measured,
    pub epsilon: Measured,
    pub device: DeviceProfile,
    pub propagation: Propagation,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundsReport {
    pub inputs: BoundsInputs,
    pub gamma_inv: ReportValue,
    pub tau_g: ReportValue,
    pub kappa: ReportValue,
    pub gamma_inv_breuer: ReportValue,
    pub tau_d: ReportValue,
    pub tau_c: ReportValue,
    pub beta_bar: ReportValue,
    pub l_k: ReportValue,
    pub l_k_reported: ReportValue,
    pub planck: PlanckFeasibility,
    pub notes: Vec<String>,
}

/// Full chain from (T1, T2, ε) to the bounds on the fluctuation parameters.
pub fn bounds_report(inputs: BoundsInputs) -> Result<BoundsReport> {
    let dev = inputs.device;
    let omega = dev.omega();
    let gup = solve_rates(DecayModel::Gup, inputs.t1, inputs.t2, inputs.propagation)?;
    let breuer = solve_rates(DecayModel::Breuer, inputs.t1, inputs.t2, inputs.propagation)?;
    let mut notes = Vec::new();
    let (kappa, tau_c) = if gup.rate.value > 0.0 {
        (
            kappa_from_tau_g(gup.decay_time, dev.ap_hw, omega),
            tau_c_from_tau_d(breuer.decay_time, omega),
        )
    } else {
        notes.push("T2 = 2 T1: no dephasing beyond relaxation, decay times are infinite and no bound follows".into());
        (
            Measured::new(f64::NAN, f64::NAN),
            Measured::new(f64::NAN, f64::NAN),
        )
    };
    let lk = lk_from_epsilon(inputs.epsilon, dev.x0);
    notes.push(
        "l_k uses l_k = x0 sqrt(epsilon); the published value for epsilon = 0.020 is listed as l_k_reported".into(),
    );
    Ok(BoundsReport {
        inputs,
        gamma_inv: ReportValue::finite(gup.gamma_inv, "s", "gup", "="),
        tau_g: ReportValue::finite(gup.decay_time, "s", "gup", "<="),
        kappa: ReportValue::finite(kappa, "s", "gup", "<="),
        gamma_inv_breuer: ReportValue::finite(breuer.gamma_inv, "s", "breuer", "="),
        tau_d: ReportValue::finite(breuer.decay_time, "s", "breuer", "<="),
        tau_c: ReportValue::finite(tau_c, "s", "breuer", "<="),
        beta_bar: ReportValue::finite(
            beta_from_epsilon(inputs.epsilon, dev.ap_hw),
            "1",
            "gup",
            "<=",
        ),
        l_k: ReportValue::finite(lk.naive, "m", "nonlocal", "<="),
        l_k_reported: ReportValue::finite(lk.reported, "m", "nonlocal", "<="),
        planck: planck_feasibility(&CODATA),
        notes,
    })
}
