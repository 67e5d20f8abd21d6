//! Time-series datasets, decay fits and synthetic data.

use std::f64::consts::PI;
use std::io::{self, BufRead, Write};

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::Serialize;

use super::lm::{levenberg_marquardt, LmOutcome};
use crate::error::{Error, Result};

/// Measured samples y(t); `t` in seconds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimeSeriesDataset {
    pub t: Vec<f64>,
    pub y: Vec<f64>,
    pub sigma: Option<Vec<f64>>,
}

impl TimeSeriesDataset {
    pub fn new(t: Vec<f64>, y: Vec<f64>, sigma: Option<Vec<f64>>) -> Result<Self> {
        if t.len() != y.len() {
            return Err(Error::InvalidDataset(format!(
                "{} times but {} values",
                t.len(),
                y.len()
            )));
        }
        if let Some(s) = &sigma {
            if s.len() != t.len() {
                return Err(Error::InvalidDataset(
                    "sigma column length differs from t".into(),
                ));
            }
            if s.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
                return Err(Error::InvalidDataset(
                    "sigma values must be positive".into(),
                ));
            }
        }
        if t.first().is_some_and(|&t0| t0 < 0.0) {
            return Err(Error::InvalidDataset("times must be non-negative".into()));
        }
        if t.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidDataset(
                "times must be strictly increasing".into(),
            ));
        }
        if y.iter().chain(&t).any(|v| !v.is_finite()) {
            return Err(Error::InvalidDataset("non-finite entry".into()));
        }
        Ok(Self { t, y, sigma })
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    /// Reads `t_us,y[,sigma]` with times in microseconds.
    pub fn read_csv<R: BufRead>(reader: R) -> Result<Self> {
        let mut lines = reader.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::InvalidDataset("empty file".into()))?
            .map_err(|e| Error::InvalidDataset(e.to_string()))?;
        let cols: Vec<&str> = header.trim().split(',').map(str::trim).collect();
        let with_sigma = match cols.as_slice() {
            ["t_us", "y"] => false,
            ["t_us", "y", "sigma"] => true,
            _ => {
                return Err(Error::InvalidDataset(format!(
                    "header must be `t_us,y` or `t_us,y,sigma`, got `{}`",
                    header.trim()
                )))
            }
        };
        let (mut t, mut y, mut s) = (Vec::new(), Vec::new(), Vec::new());
        for (k, line) in lines.enumerate() {
            let line = line.map_err(|e| Error::InvalidDataset(e.to_string()))?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != cols.len() {
                return Err(Error::InvalidDataset(format!(
                    "line {}: expected {} fields",
                    k + 2,
                    cols.len()
                )));
            }
            let num = |f: &str| -> Result<f64> {
                f.parse().map_err(|_| {
                    Error::InvalidDataset(format!("line {}: cannot parse `{f}`", k + 2))
                })
            };
            t.push(num(fields[0])? * 1e-6);
            y.push(num(fields[1])?);
            if with_sigma {
                s.push(num(fields[2])?);
            }
        }
        Self::new(t, y, with_sigma.then_some(s))
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        match &self.sigma {
            Some(s) => {
                writeln!(out, "t_us,y,sigma")?;
                for ((t, y), s) in self.t.iter().zip(&self.y).zip(s) {
                    writeln!(out, "{},{},{}", t * 1e6, y, s)?;
                }
            }
            None => {
                writeln!(out, "t_us,y")?;
                for (t, y) in self.t.iter().zip(&self.y) {
                    writeln!(out, "{},{}", t * 1e6, y)?;
                }
            }
        }
        Ok(())
    }

    fn span(&self) -> f64 {
        self.t[self.t.len() - 1] - self.t[0].min(0.0)
    }

    fn weights(&self) -> Vec<f64> {
        match &self.sigma {
            Some(s) => s.iter().map(|v| 1.0 / v).collect(),
            None => vec![1.0; self.len()],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitResult {
    pub model: &'static str,
    pub names: Vec<&'static str>,
    pub values: Vec<f64>,
    /// One standard deviation from s²(JᵀJ)⁻¹.
    pub sigmas: Vec<f64>,
    pub residual_norm: f64,
    pub reduced_chi2: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl FitResult {
    /// (value, sigma) of a named parameter.
    pub fn get(&self, name: &str) -> Option<(f64, f64)> {
        self.names
            .iter()
            .position(|n| *n == name)
            .map(|i| (self.values[i], self.sigmas[i]))
    }
}

/// Builds residuals r_i = w_i (model_i − y_i) and the weighted Jacobian.
fn weighted<'a, F>(
    s: &'a [f64],
    y: &'a [f64],
    w: &'a [f64],
    n_par: usize,
    eval: F,
) -> impl Fn(&[f64]) -> (DVector<f64>, DMatrix<f64>) + 'a
where
    F: Fn(f64, &[f64], &mut [f64]) -> f64 + 'static,
{
    move |p: &[f64]| {
        let n = s.len();
        let mut r = DVector::zeros(n);
        let mut j = DMatrix::zeros(n, n_par);
        let mut grad = vec![0.0; n_par];
        for i in 0..n {
            let v = eval(s[i], p, &mut grad);
            r[i] = w[i] * (v - y[i]);
            for k in 0..n_par {
                j[(i, k)] = w[i] * grad[k];
            }
        }
        (r, j)
    }
}

fn sigmas_from(out: &LmOutcome) -> Result<Vec<f64>> {
    let cov = out.covariance()?;
    Ok((0..cov.nrows())
        .map(|i| cov[(i, i)].max(0.0).sqrt())
        .collect())
}

/// Log-linear regression of ln(y) on t; returns the slope.
fn log_slope(t: &[f64], y: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = t
        .iter()
        .zip(y)
        .filter(|(_, &v)| v > 0.0)
        .map(|(&a, &b)| (a, b.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let ml = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mt).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - ml)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Fits A·e^{−t/T1} + C. Parameters are named `A`, `T1` (s) and `C`.
pub fn fit_exp_decay(data: &TimeSeriesDataset) -> Result<FitResult> {
    let n = data.len();
    if n < 6 {
        return Err(Error::InvalidDataset(format!(
            "need at least 6 points, got {n}"
        )));
    }
    let span = data.span();
    let s: Vec<f64> = data.t.iter().map(|t| t / span).collect();
    let w = data.weights();

    let tail = (n / 10).max(1);
    let c0 = data.y[n - tail..].iter().sum::<f64>() / tail as f64;
    let (y_min, y_max) = data
        .y
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| {
            (a.min(v), b.max(v))
        });
    let a0 = if data.y[0] >= c0 {
        y_max - y_min
    } else {
        y_min - y_max
    };
    let scaled: Vec<f64> = data.y.iter().map(|v| (v - c0) / a0).collect();
    // keep points well above the tail level for the log-linear estimate
    let (ts, ys): (Vec<f64>, Vec<f64>) = s
        .iter()
        .zip(&scaled)
        .filter(|(_, &v)| v > 0.05)
        .map(|(a, b)| (*a, *b))
        .unzip();
    let tau0 = match log_slope(&ts, &ys) {
        Some(k) if k < 0.0 => -1.0 / k,
        _ => 1.0 / 3.0,
    };

    let model = weighted(&s, &data.y, &w, 3, |s, p, g| {
        let e = (-s / p[1]).exp();
        g[0] = e;
        g[1] = p[0] * e * s / (p[1] * p[1]);
        g[2] = 1.0;
        p[0] * e + p[2]
    });
    let out = levenberg_marquardt(&[a0, tau0, c0], model)?;
    let sig = sigmas_from(&out)?;
    Ok(FitResult {
        model: "exp",
        names: vec!["A", "T1", "C"],
        values: vec![out.params[0], out.params[1] * span, out.params[2]],
        sigmas: vec![sig[0], sig[1] * span, sig[2]],
        residual_norm: out.cost.sqrt(),
        reduced_chi2: out.reduced_chi2(),
        iterations: out.iterations,
        converged: true,
    })
}

/// Frequency (per unit of `t`) of the strongest component of `y − mean`.
///
/// Scans the bins k/span for k = 1..n/2; returns the peak bin index and its
/// frequency, or `None` when the peak does not clear the noise floor.
pub fn spectral_peak(t: &[f64], y: &[f64]) -> Option<(usize, f64)> {
    let n = t.len();
    let span = t[n - 1] - t[0];
    let mean = y.iter().sum::<f64>() / n as f64;
    let power = |f: f64| {
        let (mut re, mut im) = (0.0, 0.0);
        for (ti, yi) in t.iter().zip(y) {
            let ph = 2.0 * PI * f * (ti - t[0]);
            re += (yi - mean) * ph.cos();
            im -= (yi - mean) * ph.sin();
        }
        re * re + im * im
    };
    let bins: Vec<f64> = (1..=n / 2).map(|k| power(k as f64 / span)).collect();
    let (k, peak) = bins.iter().enumerate().fold(
        (0, 0.0),
        |acc, (k, &p)| if p > acc.1 { (k, p) } else { acc },
    );
    let mut sorted = bins.clone();
    sorted.sort_by(f64::total_cmp);
    let median = sorted[sorted.len() / 2];
    if !(peak > 4.0 * median) || peak == 0.0 {
        return None;
    }
    Some((k + 1, (k + 1) as f64 / span))
}

/// Linear least squares for y ≈ e^{−s/τ}(P cos 2πfs − Q sin 2πfs) + C.
fn ramsey_linear(s: &[f64], y: &[f64], w: &[f64], tau: f64, f: f64) -> Option<([f64; 3], f64)> {
    let n = s.len();
    let design = DMatrix::from_fn(n, 3, |i, k| {
        let e = (-s[i] / tau).exp();
        let ph = 2.0 * PI * f * s[i];
        w[i] * match k {
            0 => e * ph.cos(),
            1 => -e * ph.sin(),
            _ => 1.0,
        }
    });
    let rhs = DVector::from_fn(n, |i, _| w[i] * y[i]);
    let sol = design.clone().svd(true, true).solve(&rhs, 1e-14).ok()?;
    let resid = (&design * &sol - &rhs).norm_squared();
    Some(([sol[0], sol[1], sol[2]], resid))
}

/// Fits A·e^{−t/T2}·cos(2πft + φ) + C. Parameters `A`, `T2` (s), `f` (Hz), `phi`, `C`.
pub fn fit_ramsey(data: &TimeSeriesDataset) -> Result<FitResult> {
    let n = data.len();
    if n < 12 {
        return Err(Error::InvalidDataset(format!(
            "need at least 12 points (3 periods at 4 points each), got {n}"
        )));
    }
    let span = data.span();
    let s: Vec<f64> = data.t.iter().map(|t| t / span).collect();
    let w = data.weights();

    let (_, f_bin) = spectral_peak(&s, &data.y)
        .ok_or_else(|| Error::FitInitialisation("no spectral peak above the noise floor".into()))?;
    // refine within ±1 bin, then pick the decay time and linear parameters by least squares
    let mut best: Option<(f64, f64, [f64; 3], f64)> = None;
    for k in -8..=8 {
        let f = f_bin + k as f64 / 8.0;
        if f <= 0.0 {
            continue;
        }
        for tau in [0.125, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0] {
            if let Some((lin, resid)) = ramsey_linear(&s, &data.y, &w, tau, f) {
                if best.as_ref().is_none_or(|b| resid < b.3) {
                    best = Some((f, tau, lin, resid));
                }
            }
        }
    }
    let (f0, tau0, [p, q, c0], _) =
        best.ok_or_else(|| Error::FitInitialisation("linear initialisation failed".into()))?;
    let a0 = p.hypot(q);
    let phi0 = q.atan2(p);

    let model = weighted(&s, &data.y, &w, 5, |s, p, g| {
        let e = (-s / p[1]).exp();
        let ph = 2.0 * PI * p[2] * s + p[3];
        let (sn, cs) = ph.sin_cos();
        g[0] = e * cs;
        g[1] = p[0] * e * cs * s / (p[1] * p[1]);
        g[2] = -p[0] * e * sn * 2.0 * PI * s;
        g[3] = -p[0] * e * sn;
        g[4] = 1.0;
        p[0] * e * cs + p[4]
    });
    let out = levenberg_marquardt(&[a0, tau0, f0, phi0, c0], model)?;
    let sig = sigmas_from(&out)?;
    let mut a = out.params[0];
    let mut phi = out.params[3];
    if a < 0.0 {
        a = -a;
        phi += PI;
    }
    phi = (phi + PI).rem_euclid(2.0 * PI) - PI;
    Ok(FitResult {
        model: "ramsey",
        names: vec!["A", "T2", "f", "phi", "C"],
        values: vec![
            a,
            out.params[1] * span,
            out.params[2] / span,
            phi,
            out.params[4],
        ],
        sigmas: vec![sig[0], sig[1] * span, sig[2] / span, sig[3], sig[4]],
        residual_norm: out.cost.sqrt(),
        reduced_chi2: out.reduced_chi2(),
        iterations: out.iterations,
        converged: true,
    })
}

/// Ground truth for synthetic data; times in seconds, frequency in Hz.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "model", rename_all = "lowercase")]
pub enum SyntheticModel {
    Exp {
        a: f64,
        t1: f64,
        c: f64,
    },
    Ramsey {
        a: f64,
        t2: f64,
        f: f64,
        phi: f64,
        c: f64,
    },
}

impl SyntheticModel {
    pub fn eval(&self, t: f64) -> f64 {
        match *self {
            SyntheticModel::Exp { a, t1, c } => a * (-t / t1).exp() + c,
            SyntheticModel::Ramsey { a, t2, f, phi, c } => {
                a * (-t / t2).exp() * (2.0 * PI * f * t + phi).cos() + c
            }
        }
    }
}

/// `n_points` samples on [0, t_end] with additive Gaussian noise of width `noise_sigma`.
pub fn synthesize_dataset(
    model: SyntheticModel,
    t_end: f64,
    n_points: usize,
    noise_sigma: f64,
    seed: u64,
) -> Result<TimeSeriesDataset> {
    if n_points < 4 {
        return Err(Error::InvalidParameter {
            name: "n_points",
            reason: format!("need at least 4, got {n_points}"),
        });
    }
    let noise = Normal::new(0.0, noise_sigma).map_err(|e| Error::InvalidParameter {
        name: "noise_sigma",
        reason: e.to_string(),
    })?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let t: Vec<f64> = (0..n_points)
        .map(|i| t_end * i as f64 / (n_points - 1) as f64)
        .collect();
    let y = t
        .iter()
        .map(|&ti| model.eval(ti) + noise.sample(&mut rng))
        .collect();
    let sigma = (noise_sigma > 0.0).then(|| vec![noise_sigma; n_points]);
    TimeSeriesDataset::new(t, y, sigma)
}
