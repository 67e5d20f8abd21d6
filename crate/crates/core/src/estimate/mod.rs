//! From measured decay curves and Wigner grids to bounds on the fluctuation
//! parameters.

mod ellipticity;
mod fit;
mod lm;
mod rates;

use serde::Serialize;

pub use ellipticity::{ellipticity_from_wigner, EllipticityFit};
pub use fit::{
    fit_exp_decay, fit_ramsey, spectral_peak, synthesize_dataset, FitResult, SyntheticModel,
    TimeSeriesDataset,
};
pub use lm::{MAX_ITERATIONS, STEP_TOLERANCE};
pub use rates::{
    beta_from_epsilon, bounds_report, kappa_from_tau_g, lk_from_epsilon, planck_feasibility,
    solve_rates, solve_rates_breuer, solve_rates_gup, tau_c_from_tau_d, BoundsInputs, BoundsReport,
    DecayModel, DeviceProfile, LengthEstimate, PlanckFeasibility, Propagation, RateSolution,
    ReportValue, HBAR_16UG, LK_REPORTED,
};

/// A value with its one-standard-deviation uncertainty.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Measured {
    pub value: f64,
    pub sigma: f64,
}

impl Measured {
    pub const fn new(value: f64, sigma: f64) -> Self {
        Self { value, sigma }
    }
}
