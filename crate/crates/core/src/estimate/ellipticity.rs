//! Ground-state ellipticity from a two-dimensional Gaussian fit to a Wigner grid.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::lm::levenberg_marquardt;
use super::Measured;
use crate::error::{Error, Result};
use crate::fock::WignerGrid;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EllipticityFit {
    pub epsilon: Measured,
    /// Largest and smallest principal variance.
    pub variances: (f64, f64),
    /// Covariance of the fitted Gaussian, [[xx, xp], [xp, pp]].
    pub covariance: [[f64; 2]; 2],
    pub center: (f64, f64),
    pub amplitude: f64,
    pub iterations: usize,
}

/// ε = 2h/m where the precision matrix has eigenvalues m ± h.
fn epsilon_of(a: f64, b: f64, d: f64) -> (f64, f64, f64) {
    let m = 0.5 * (a + d);
    let h = (0.25 * (a - d).powi(2) + b * b).sqrt();
    (2.0 * h / m, m, h)
}

/// Fits A·exp(−½ rᵀPr) (r relative to the centre) and converts the principal
/// variances into ε = 2(r−1)/(r+1), r = v_max/v_min.
pub fn ellipticity_from_wigner(grid: &WignerGrid) -> Result<EllipticityFit> {
    let (nx, np) = grid.values.shape();
    let mut pts = Vec::with_capacity(nx * np);
    for ix in 0..nx {
        for ip in 0..np {
            pts.push((grid.xs[ix], grid.ps[ip], grid.values[(ix, ip)]));
        }
    }

    // moment initialisation over the positive part
    let wsum: f64 = pts.iter().map(|p| p.2.max(0.0)).sum();
    if !(wsum > 0.0) {
        return Err(Error::FitInitialisation("grid has no positive peak".into()));
    }
    let mx = pts.iter().map(|p| p.0 * p.2.max(0.0)).sum::<f64>() / wsum;
    let mp = pts.iter().map(|p| p.1 * p.2.max(0.0)).sum::<f64>() / wsum;
    let sxx = pts
        .iter()
        .map(|p| (p.0 - mx).powi(2) * p.2.max(0.0))
        .sum::<f64>()
        / wsum;
    let spp = pts
        .iter()
        .map(|p| (p.1 - mp).powi(2) * p.2.max(0.0))
        .sum::<f64>()
        / wsum;
    let sxp = pts
        .iter()
        .map(|p| (p.0 - mx) * (p.1 - mp) * p.2.max(0.0))
        .sum::<f64>()
        / wsum;
    let det = sxx * spp - sxp * sxp;
    if !(det > 0.0) {
        return Err(Error::FitInitialisation(
            "degenerate moment covariance".into(),
        ));
    }
    let amp0 = pts.iter().map(|p| p.2).fold(f64::NEG_INFINITY, f64::max);
    let x0 = [amp0, mx, mp, spp / det, -sxp / det, sxx / det];

    let model = |q: &[f64]| {
        let n = pts.len();
        let mut r = DVector::zeros(n);
        let mut j = DMatrix::zeros(n, 6);
        for (i, &(x, p, w)) in pts.iter().enumerate() {
            let (dx, dp) = (x - q[1], p - q[2]);
            let quad = q[3] * dx * dx + 2.0 * q[4] * dx * dp + q[5] * dp * dp;
            let e = (-0.5 * quad).exp();
            let v = q[0] * e;
            r[i] = v - w;
            j[(i, 0)] = e;
            j[(i, 1)] = v * (q[3] * dx + q[4] * dp);
            j[(i, 2)] = v * (q[4] * dx + q[5] * dp);
            j[(i, 3)] = -0.5 * v * dx * dx;
            j[(i, 4)] = -v * dx * dp;
            j[(i, 5)] = -0.5 * v * dp * dp;
        }
        (r, j)
    };
    let out = levenberg_marquardt(&x0, model)?;
    let q = &out.params;
    let (a, b, d) = (q[3], q[4], q[5]);
    let (eps, m, h) = epsilon_of(a, b, d);
    if !(m - h > 0.0) {
        return Err(Error::InvalidDataset(
            "fitted Gaussian covariance is not positive definite".into(),
        ));
    }
    let cov = out.covariance()?;
    let sub = |i: usize, k: usize| cov[(i + 3, k + 3)];
    let sigma = if h > 1e-14 * m {
        let dh = [(a - d) / (4.0 * h), b / h, -(a - d) / (4.0 * h)];
        let dm = [0.5, 0.0, 0.5];
        let grad: Vec<f64> = (0..3)
            .map(|i| 2.0 * (dh[i] * m - h * dm[i]) / (m * m))
            .collect();
        let mut var = 0.0;
        for i in 0..3 {
            for k in 0..3 {
                var += grad[i] * sub(i, k) * grad[k];
            }
        }
        var.max(0.0).sqrt()
    } else {
        2.0 * (0.25 * (sub(0, 0) + sub(2, 2)) + sub(1, 1)).max(0.0).sqrt() / m
    };
    let det_p = a * d - b * b;
    let covariance = [[d / det_p, -b / det_p], [-b / det_p, a / det_p]];
    Ok(EllipticityFit {
        epsilon: Measured::new(eps, sigma),
        variances: (1.0 / (m - h), 1.0 / (m + h)),
        covariance,
        center: (q[1], q[2]),
        amplitude: q[0],
        iterations: out.iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::epsilon_from_ratio;
    use crate::fock::{self, DensityMatrix, GridSpec};

    fn gaussian_grid(vx: f64, vp: f64, angle: f64) -> WignerGrid {
        let spec = GridSpec::square(4.0, 61);
        let mut grid = fock::wigner(&DensityMatrix::fock(0, 4).unwrap(), &spec).unwrap();
        let (s, c) = angle.sin_cos();
        // Σ = R diag(vx, vp) Rᵀ
        let sxx = c * c * vx + s * s * vp;
        let spp = s * s * vx + c * c * vp;
        let sxp = c * s * (vx - vp);
        let det = sxx * spp - sxp * sxp;
        for ix in 0..grid.xs.len() {
            for ip in 0..grid.ps.len() {
                let (x, p) = (grid.xs[ix], grid.ps[ip]);
                let q = (spp * x * x - 2.0 * sxp * x * p + sxx * p * p) / det;
                grid.values[(ix, ip)] =
                    (-0.5 * q).exp() / (2.0 * std::f64::consts::PI * det.sqrt());
            }
        }
        grid
    }

    #[test]
    fn vacuum_is_round() {
        let grid = fock::wigner(
            &DensityMatrix::fock(0, 10).unwrap(),
            &GridSpec::square(4.0, 61),
        )
        .unwrap();
        let fit = ellipticity_from_wigner(&grid).unwrap();
        assert!(fit.epsilon.value.abs() < 1e-8);
        assert!((fit.variances.0 - 0.5).abs() < 1e-8);
    }

    #[test]
    fn deformed_gaussian_round_trip() {
        let eps0 = 0.020;
        for angle in [0.0, 0.7] {
            let grid = gaussian_grid(0.5 + eps0 / 4.0, 0.5 - eps0 / 4.0, angle);
            let fit = ellipticity_from_wigner(&grid).unwrap();
            assert!((fit.epsilon.value - eps0).abs() < 1e-4);
        }
    }

    #[test]
    fn ratio_to_epsilon() {
        assert!((epsilon_from_ratio(1.0202) - 0.020).abs() < 1e-4);
    }
}
