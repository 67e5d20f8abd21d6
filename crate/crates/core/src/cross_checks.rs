//! Comparisons between independently implemented modules.

use crate::fock::DensityMatrix;
use crate::generators::{KernelSpec, ModelParams};
use crate::integrate::{evolve, evolve_nonmarkov, markov_model, EvolveOptions};
use crate::linalg::{c, CVector};
use crate::trajectories::{ensemble_average, EnsembleOptions, Scheme};

const DIM: usize = 8;

fn gup(omega_tau_g: f64) -> ModelParams {
    ModelParams {
        beta_bar: 1.0,
        ..ModelParams::default()
    }
    .with_omega_tau_g(omega_tau_g)
}

fn with_memory(mut p: ModelParams, omega_tau: f64) -> ModelParams {
    p.kernel = KernelSpec::Exponential {
        tau: omega_tau / p.omega,
    };
    p
}

fn basis(n: usize) -> CVector {
    let mut v = CVector::zeros(DIM);
    v[n] = c(1.0);
    v
}

fn superposition() -> CVector {
    (basis(0) + basis(1)) * c(std::f64::consts::FRAC_1_SQRT_2)
}

#[test]
fn ou_ensemble_matches_memory_equation() {
    let p = with_memory(gup(500.0), 2.0);
    let opts = EnsembleOptions {
        n_traj: 800,
        seed: 11,
        dt: 0.02,
        t_end: 30.0,
        sample_every: 250,
        scheme: Scheme::Split,
    };
    let psi0 = superposition();
    let ens = ensemble_average(&psi0, &p, &opts).unwrap();
    let me = evolve_nonmarkov(
        &DensityMatrix::pure(&psi0).unwrap(),
        &p,
        30.0,
        &EvolveOptions::default()
            .with_dt(0.02)
            .with_sample_every(250),
    )
    .unwrap();
    let markov = evolve(
        &DensityMatrix::pure(&psi0).unwrap(),
        &markov_model(DIM, &p).unwrap(),
        30.0,
        &EvolveOptions::default()
            .with_dt(0.02)
            .with_sample_every(250),
    )
    .unwrap();
    let obs = crate::integrate::Observable::Population(0);
    let mean = ens.series(obs);
    let err = ens.stderr_series(obs);
    let exact = me.series(obs);
    for k in 1..mean.len() {
        let d = (mean[k] - exact[k]).abs();
        assert!(
            d <= 3.0 * err[k] + 1e-12,
            "t = {}: |Δ| = {d:e}, stderr {:e}",
            ens.times[k],
            err[k]
        );
    }
    // the memory visibly changes the answer, so the agreement above is not vacuous
    let k = mean.len() - 1;
    let gap = (markov.series(obs)[k] - exact[k]).abs();
    assert!(gap > 10.0 * err[k], "gap {gap:e} vs stderr {:e}", err[k]);
}

#[test]
fn longer_memory_suppresses_coherence_decay() {
    let psi0 = DensityMatrix::superposition01(DIM).unwrap();
    let opts = EvolveOptions::default()
        .with_dt(0.01)
        .with_sample_every(1000);
    let coherence = |tau: f64| {
        let res = evolve_nonmarkov(&psi0, &with_memory(gup(500.0), tau), 30.0, &opts).unwrap();
        res.last().element(0, 1).norm()
    };
    let markov = evolve(&psi0, &markov_model(DIM, &gup(500.0)).unwrap(), 30.0, &opts)
        .unwrap()
        .last()
        .element(0, 1)
        .norm();
    let sweep: Vec<f64> = [0.1, 0.5, 2.0, 10.0]
        .iter()
        .map(|&t| coherence(t))
        .collect();
    assert!(markov < sweep[0], "markov {markov} vs {sweep:?}");
    for w in sweep.windows(2) {
        assert!(w[0] < w[1], "{sweep:?}");
    }
}

#[test]
fn ensemble_initial_slopes_match_first_order_rates() {
    let omega_tau_g = 400.0;
    let p = gup(omega_tau_g);
    let opts = EnsembleOptions {
        n_traj: 1000,
        seed: 5,
        dt: 0.02,
        t_end: 20.0,
        sample_every: 100,
        scheme: Scheme::Split,
    };
    for (n, coefficient) in [(0, 6.0 / 8.0), (1, 45.0 / 8.0)] {
        let ens = ensemble_average(&basis(n), &p, &opts).unwrap();
        let obs = crate::integrate::Observable::Population(n);
        let y = ens.series(obs);
        let err = ens.stderr_series(obs);
        // weighted fit of 1 − y = a·t − b·t², so curvature does not bias the slope a
        let (mut s11, mut s12, mut s22, mut r1, mut r2) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for k in 1..y.len() {
            let (t, w) = (ens.times[k], err[k].powi(-2));
            let d = 1.0 - y[k];
            s11 += w * t * t;
            s12 -= w * t * t * t;
            s22 += w * t.powi(4);
            r1 += w * t * d;
            r2 -= w * t * t * d;
        }
        let det = s11 * s22 - s12 * s12;
        let slope = (s22 * r1 - s12 * r2) / det * omega_tau_g;
        let sigma = (s22 / det).sqrt() * omega_tau_g;
        assert!(
            (slope - coefficient).abs() <= 3.0 * sigma,
            "level {n}: slope {slope} vs {coefficient} (σ {sigma})"
        );
        let purity: Vec<f64> = ens.mean.iter().map(|m| m.purity()).collect();
        assert!(purity.windows(2).all(|w| w[1] < w[0]), "{purity:?}");
    }
}
