//! Operator algebra on a truncated Fock space of a single bosonic mode.
//!
//! Everything here is dimensionless: energies in units of ħω and the
//! quadratures scaled so that the vacuum variance is 1/2.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::io::{self, Write};

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::{self, c, CMatrix, CVector, C64, I};

/// Default number of Fock levels retained in simulations.
pub const DEFAULT_DIM: usize = 30;

const HERMITIAN_TOL: f64 = 1e-12;
const STATE_TRACE_TOL: f64 = 1e-9;
const STATE_HERMITIAN_TOL: f64 = 1e-9;
const STATE_POSITIVITY_TOL: f64 = 1e-7;

fn check_dim(dim: usize, min: usize) -> Result<()> {
    if dim < min {
        Err(Error::InvalidDimension { dim, min })
    } else {
        Ok(())
    }
}

/// A dense operator on the first `dim` Fock levels.
#[derive(Debug, Clone, PartialEq)]
pub struct Operator {
    matrix: CMatrix,
    hermitian: bool,
}

impl Operator {
    /// Wraps `matrix`. When `hermitian` is set the matrix must equal its
    /// conjugate transpose within 1e-12.
    pub fn new(matrix: CMatrix, hermitian: bool) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::DimensionMismatch {
                expected: matrix.nrows(),
                got: matrix.ncols(),
            });
        }
        check_dim(matrix.nrows(), 2)?;
        if hermitian {
            let deviation = linalg::hermiticity_deviation(&matrix);
            if deviation > HERMITIAN_TOL {
                return Err(Error::NotHermitian { deviation });
            }
        }
        Ok(Self { matrix, hermitian })
    }

    pub(crate) fn from_parts(matrix: CMatrix, hermitian: bool) -> Self {
        Self { matrix, hermitian }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermitian
    }

    /// `<m|O|n>`
    pub fn element(&self, m: usize, n: usize) -> C64 {
        self.matrix[(m, n)]
    }

    pub fn dagger(&self) -> Self {
        Self::from_parts(self.matrix.adjoint(), self.hermitian)
    }

    /// Operator product; the result is flagged Hermitian only for powers of
    /// a Hermitian operator.
    pub fn compose(&self, other: &Operator) -> Self {
        let hermitian = self.hermitian && self == other;
        Self::from_parts(&self.matrix * &other.matrix, hermitian)
    }

    pub fn expectation(&self, rho: &DensityMatrix) -> C64 {
        linalg::trace(&(&self.matrix * rho.matrix()))
    }

    pub fn spectrum(&self) -> Result<Vec<f64>> {
        Ok(linalg::eigh(&self.matrix)?.0)
    }
}

/// Annihilation operator â with `<n-1|â|n> = √n`.
pub fn ladder(dim: usize) -> Result<Operator> {
    check_dim(dim, 2)?;
    let mut m = CMatrix::zeros(dim, dim);
    for n in 1..dim {
        m[(n - 1, n)] = c((n as f64).sqrt());
    }
    Ok(Operator::from_parts(m, false))
}

pub fn creation(dim: usize) -> Result<Operator> {
    Ok(ladder(dim)?.dagger())
}

pub fn number(dim: usize) -> Result<Operator> {
    check_dim(dim, 2)?;
    let diag = CVector::from_fn(dim, |n, _| c(n as f64));
    Ok(Operator::from_parts(CMatrix::from_diagonal(&diag), true))
}

pub fn identity(dim: usize) -> Result<Operator> {
    check_dim(dim, 2)?;
    Ok(Operator::from_parts(CMatrix::identity(dim, dim), true))
}

/// Kinetic energy K̂ = p̂²/2m in units of ħω, i.e. `(2N̂ + 1 − â†² − â²)/4`.
pub fn kinetic(dim: usize) -> Result<Operator> {
    check_dim(dim, 3)?;
    let mut m = CMatrix::zeros(dim, dim);
    for n in 0..dim {
        m[(n, n)] = c((2 * n + 1) as f64 / 4.0);
        if n + 2 < dim {
            let v = c(-(((n + 1) * (n + 2)) as f64).sqrt() / 4.0);
            m[(n, n + 2)] = v;
            m[(n + 2, n)] = v;
        }
    }
    Ok(Operator::from_parts(m, true))
}

/// K̂² in units of (ħω)².
///
/// Squared on a space two levels larger and then truncated, so every
/// retained matrix element equals that of the untruncated operator.
pub fn kinetic_squared(dim: usize) -> Result<Operator> {
    check_dim(dim, 3)?;
    let k = kinetic(dim + 2)?;
    let k2 = k.matrix() * k.matrix();
    let m = k2.view((0, 0), (dim, dim)).into_owned();
    Ok(Operator::from_parts(linalg::hermitize(&m), true))
}

/// Quadrature x̂_θ = (â e^{−iθ} + â† e^{iθ})/√2; θ = 0 is position, θ = π/2 momentum.
pub fn quadrature(theta: f64, dim: usize) -> Result<Operator> {
    let a = ladder(dim)?;
    let phase = (I * theta).exp();
    let m = (a.matrix() * phase.conj() + a.matrix().adjoint() * phase) * c(FRAC_1_SQRT_2);
    Ok(Operator::from_parts(linalg::hermitize(&m), true))
}

/// A valid density matrix: unit trace, Hermitian, positive semidefinite.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    matrix: CMatrix,
}

impl DensityMatrix {
    pub fn new(matrix: CMatrix) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::DimensionMismatch {
                expected: matrix.nrows(),
                got: matrix.ncols(),
            });
        }
        check_dim(matrix.nrows(), 2)?;
        let tr = linalg::trace(&matrix);
        if (tr - c(1.0)).norm() > STATE_TRACE_TOL {
            return Err(Error::InvalidState(format!("trace {tr} differs from 1")));
        }
        let deviation = linalg::hermiticity_deviation(&matrix);
        if deviation > STATE_HERMITIAN_TOL {
            return Err(Error::InvalidState(format!(
                "not Hermitian (deviation {deviation:e})"
            )));
        }
        let state = Self { matrix };
        let min = state.min_eigenvalue();
        if min < -STATE_POSITIVITY_TOL {
            return Err(Error::InvalidState(format!("negative eigenvalue {min:e}")));
        }
        Ok(state)
    }

    pub(crate) fn from_matrix_unchecked(matrix: CMatrix) -> Self {
        Self { matrix }
    }

    /// |n⟩⟨n|
    pub fn fock(n: usize, dim: usize) -> Result<Self> {
        check_dim(dim, 2)?;
        if n >= dim {
            return Err(Error::InvalidParameter {
                name: "n",
                reason: format!("level {n} outside a {dim}-level space"),
            });
        }
        let mut m = CMatrix::zeros(dim, dim);
        m[(n, n)] = c(1.0);
        Ok(Self { matrix: m })
    }

    /// (|0⟩ + |1⟩)/√2
    pub fn superposition01(dim: usize) -> Result<Self> {
        let mut psi = CVector::zeros(dim.max(2));
        psi[0] = c(FRAC_1_SQRT_2);
        psi[1] = c(FRAC_1_SQRT_2);
        Self::pure(&psi)
    }

    /// |ψ⟩⟨ψ| for a normalised ψ.
    pub fn pure(psi: &CVector) -> Result<Self> {
        check_dim(psi.len(), 2)?;
        let norm = psi.norm();
        if (norm - 1.0).abs() > STATE_TRACE_TOL {
            return Err(Error::InvalidState(format!("state vector norm {norm}")));
        }
        Ok(Self {
            matrix: psi * psi.adjoint(),
        })
    }

    /// Coherent state |β⟩ truncated to `dim` levels and renormalised.
    pub fn coherent(beta: C64, dim: usize) -> Result<Self> {
        check_dim(dim, 2)?;
        let mut psi = CVector::zeros(dim);
        let mut amp = c((-0.5 * beta.norm_sqr()).exp());
        for n in 0..dim {
            psi[n] = amp;
            amp = amp * beta / (n as f64 + 1.0).sqrt();
        }
        let norm = psi.norm();
        psi /= c(norm);
        Self::pure(&psi)
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    /// `<m|ρ|n>`
    pub fn element(&self, m: usize, n: usize) -> C64 {
        self.matrix[(m, n)]
    }

    pub fn population(&self, n: usize) -> f64 {
        self.matrix[(n, n)].re
    }

    pub fn trace(&self) -> C64 {
        linalg::trace(&self.matrix)
    }

    pub fn purity(&self) -> f64 {
        // Tr ρ² = Σ |ρ_ij|² for Hermitian ρ
        self.matrix.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn hermiticity_deviation(&self) -> f64 {
        linalg::hermiticity_deviation(&self.matrix)
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        linalg::hermitize(&self.matrix)
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .copied()
            .collect()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues().into_iter().fold(f64::INFINITY, f64::min)
    }

    /// ½‖ρ − σ‖₁
    pub fn trace_distance(&self, other: &DensityMatrix) -> Result<f64> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: other.dim(),
            });
        }
        let diff = linalg::hermitize(&(&self.matrix - &other.matrix));
        Ok(0.5
            * diff
                .symmetric_eigen()
                .eigenvalues
                .iter()
                .map(|v| v.abs())
                .sum::<f64>())
    }
}

/// Phase-space grid on which a Wigner function is sampled.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub x_min: f64,
    pub x_max: f64,
    pub nx: usize,
    pub p_min: f64,
    pub p_max: f64,
    pub np: usize,
}

impl GridSpec {
    pub fn square(half_width: f64, n: usize) -> Self {
        Self {
            x_min: -half_width,
            x_max: half_width,
            nx: n,
            p_min: -half_width,
            p_max: half_width,
            np: n,
        }
    }

    fn axis(min: f64, max: f64, n: usize) -> Vec<f64> {
        if n == 1 {
            return vec![0.5 * (min + max)];
        }
        let step = (max - min) / (n - 1) as f64;
        (0..n).map(|i| min + step * i as f64).collect()
    }
}

/// Raised when the grid misses more than 2% of the quasi-probability mass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncationWarning {
    pub captured_mass: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WignerGrid {
    pub xs: Vec<f64>,
    pub ps: Vec<f64>,
    /// `values[(ix, ip)] = W(xs[ix], ps[ip])`
    pub values: DMatrix<f64>,
    pub warning: Option<TruncationWarning>,
}

impl WignerGrid {
    pub fn cell_area(&self) -> f64 {
        let dx = if self.xs.len() > 1 {
            self.xs[1] - self.xs[0]
        } else {
            1.0
        };
        let dp = if self.ps.len() > 1 {
            self.ps[1] - self.ps[0]
        } else {
            1.0
        };
        dx * dp
    }

    /// Riemann sum of W over the grid.
    pub fn captured_mass(&self) -> f64 {
        self.values.sum() * self.cell_area()
    }

    /// ∫W dp, approximating the position distribution.
    pub fn marginal_x(&self) -> Vec<f64> {
        let dp = if self.ps.len() > 1 {
            self.ps[1] - self.ps[0]
        } else {
            1.0
        };
        (0..self.xs.len())
            .map(|ix| self.values.row(ix).sum() * dp)
            .collect()
    }

    /// CSV with header `x,p,w`, x-major.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "x,p,w")?;
        for (ix, x) in self.xs.iter().enumerate() {
            for (ip, p) in self.ps.iter().enumerate() {
                writeln!(out, "{x},{p},{}", self.values[(ix, ip)])?;
            }
        }
        Ok(())
    }
}

/// Generalised Laguerre polynomials L_k^{(alpha)}(x) for k = 0..=n.
fn laguerre_table(n: usize, alpha: usize, x: f64) -> Vec<f64> {
    let a = alpha as f64;
    let mut out = Vec::with_capacity(n + 1);
    out.push(1.0);
    if n >= 1 {
        out.push(1.0 + a - x);
    }
    for k in 1..n {
        let kf = k as f64;
        let next = ((2.0 * kf + 1.0 + a - x) * out[k] - (kf + a) * out[k - 1]) / (kf + 1.0);
        out.push(next);
    }
    out
}

/// Wigner function W(x, p) = (1/π) Tr[ρ D(α) Π D†(α)], α = (x + ip)/√2.
///
/// Normalised so that ∫W dx dp = 1 and the vacuum gives W(0,0) = 1/π.
pub fn wigner(rho: &DensityMatrix, grid: &GridSpec) -> Result<WignerGrid> {
    if grid.nx == 0 || grid.np == 0 {
        return Err(Error::InvalidParameter {
            name: "grid",
            reason: "grid needs at least one sample per axis".into(),
        });
    }
    let dim = rho.dim();
    let xs = GridSpec::axis(grid.x_min, grid.x_max, grid.nx);
    let ps = GridSpec::axis(grid.p_min, grid.p_max, grid.np);
    // sqrt(m!/n!) for n >= m
    let mut ratio = DMatrix::<f64>::zeros(dim, dim);
    for m in 0..dim {
        let mut r = 1.0;
        ratio[(m, m)] = 1.0;
        for n in m + 1..dim {
            r /= (n as f64).sqrt();
            ratio[(m, n)] = r;
        }
    }
    let rho_m = rho.matrix();
    let mut values = DMatrix::<f64>::zeros(xs.len(), ps.len());
    for (ix, &x) in xs.iter().enumerate() {
        for (ip, &p) in ps.iter().enumerate() {
            let alpha = C64::new(x, p) * FRAC_1_SQRT_2;
            let b = 4.0 * alpha.norm_sqr();
            let two_alpha = alpha * 2.0;
            let mut acc = 0.0;
            // offset k = n - m; L_m^{(k)} for all m in one recurrence
            let mut power = c(1.0);
            for k in 0..dim {
                if k > 0 {
                    power *= two_alpha;
                }
                let lag = laguerre_table(dim - 1 - k, k, b);
                for m in 0..dim - k {
                    let entry = rho_m[(m, m + k)];
                    if entry.norm() == 0.0 {
                        continue;
                    }
                    let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
                    let term = if k == 0 {
                        entry.re
                    } else {
                        2.0 * (entry * power).re * ratio[(m, m + k)]
                    };
                    acc += sign * term * lag[m];
                }
            }
            values[(ix, ip)] = acc * (-0.5 * b).exp() / PI;
        }
    }
    let mut out = WignerGrid {
        xs,
        ps,
        values,
        warning: None,
    };
    let mass = out.captured_mass();
    if mass < 0.98 {
        out.warning = Some(TruncationWarning {
            captured_mass: mass,
        });
    }
    Ok(out)
}
