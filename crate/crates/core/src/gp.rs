//! Gaussian-process regression with an isotropic squared-exponential kernel.
//!
//! Inputs live in the unit cube, targets are standardized with their sample
//! mean and standard deviation before fitting. The kernel has unit signal
//! variance, so posterior standard deviations are reported in target units by
//! scaling with the standardization factor.

use nalgebra::{Cholesky, DMatrix};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Standard deviation floor used when the targets are (numerically) constant.
const TARGET_STD_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GpConfig {
    pub length_scale: f64,
    pub jitter_start: f64,
    pub jitter_max: f64,
    /// Refit the length-scale by maximum marginal likelihood on every fit.
    pub optimize_length_scale: bool,
}

impl Default for GpConfig {
    fn default() -> Self {
        Self {
            length_scale: 1.0,
            jitter_start: 1e-10,
            jitter_max: 1e-6,
            optimize_length_scale: false,
        }
    }
}

impl GpConfig {
    pub fn validate(&self) -> Result<(), GpError> {
        if !(self.length_scale > 0.0 && self.length_scale.is_finite()) {
            return Err(GpError::InvalidConfig(format!(
                "length_scale must be positive, got {}",
                self.length_scale
            )));
        }
        if !(self.jitter_start > 0.0 && self.jitter_start <= self.jitter_max && self.jitter_max.is_finite()) {
            return Err(GpError::InvalidConfig(format!(
                "need 0 < jitter_start <= jitter_max, got {} and {}",
                self.jitter_start, self.jitter_max
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GpError {
    #[error("cannot fit a GP to zero points")]
    Empty,
    #[error("{inputs} inputs but {targets} targets")]
    LengthMismatch { inputs: usize, targets: usize },
    #[error("expected {expected}-dimensional input, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("input {0} lies outside the unit cube")]
    OutsideUnitCube(usize),
    #[error("target {0} is not finite")]
    NonFiniteTarget(usize),
    #[error("kernel matrix not positive definite even with jitter {0:e}")]
    Singular(f64),
    #[error("invalid GP configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GpPrediction {
    pub mean: f64,
    pub std: f64,
}

/// Posterior moments together with their gradients with respect to the
/// unit-cube query point.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionGradient {
    pub prediction: GpPrediction,
    pub d_mean: Vec<f64>,
    pub d_std: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct GpModel {
    dim: usize,
    n: usize,
    /// Row-major n × dim training inputs.
    inputs: Vec<f64>,
    targets: Vec<f64>,
    y_mean: f64,
    y_scale: f64,
    length_scale: f64,
    jitter: f64,
    /// Lower Cholesky factor of K + jitter·I, column-major.
    chol: DMatrix<f64>,
    alpha: Vec<f64>,
}

pub fn squared_exponential(a: &[f64], b: &[f64], length_scale: f64) -> f64 {
    let sq: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    (-sq / (2.0 * length_scale * length_scale)).exp()
}

fn kernel_matrix(inputs: &[f64], n: usize, dim: usize, length_scale: f64) -> DMatrix<f64> {
    let mut k = DMatrix::<f64>::identity(n, n);
    for i in 0..n {
        let a = &inputs[i * dim..(i + 1) * dim];
        for j in 0..i {
            let v = squared_exponential(a, &inputs[j * dim..(j + 1) * dim], length_scale);
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    k
}

/// Factorizes `k + jitter·I`, multiplying the jitter by ten until the
/// factorization succeeds or `jitter_max` is passed.
fn factorize(k: &DMatrix<f64>, cfg: &GpConfig) -> Result<(DMatrix<f64>, f64), GpError> {
    let mut jitter = cfg.jitter_start;
    let mut steps = 0;
    loop {
        let mut m = k.clone();
        for i in 0..m.nrows() {
            m[(i, i)] += jitter;
        }
        if let Some(c) = Cholesky::new(m) {
            return Ok((c.unpack(), jitter));
        }
        steps += 1;
        let next = cfg.jitter_start * 10f64.powi(steps);
        // tolerate rounding in the repeated multiplication
        if next > cfg.jitter_max * (1.0 + 1e-9) {
            return Err(GpError::Singular(jitter));
        }
        jitter = next.min(cfg.jitter_max);
    }
}

/// Solves `L x = b` in place for lower-triangular, column-major `L`.
fn forward_substitute(l: &DMatrix<f64>, b: &mut [f64]) {
    let n = b.len();
    let data = l.as_slice();
    for j in 0..n {
        let col = &data[j * n..(j + 1) * n];
        b[j] /= col[j];
        let bj = b[j];
        for (bi, lij) in b[j + 1..].iter_mut().zip(&col[j + 1..]) {
            *bi -= lij * bj;
        }
    }
}

/// Solves `Lᵀ x = b` in place for lower-triangular, column-major `L`.
fn backward_substitute(l: &DMatrix<f64>, b: &mut [f64]) {
    let n = b.len();
    let data = l.as_slice();
    for i in (0..n).rev() {
        let col = &data[i * n..(i + 1) * n];
        let s: f64 = col[i + 1..].iter().zip(&b[i + 1..]).map(|(a, x)| a * x).sum();
        b[i] = (b[i] - s) / col[i];
    }
}

fn standardize(y: &[f64]) -> (f64, f64) {
    let n = y.len() as f64;
    let mean = y.iter().sum::<f64>() / n;
    let var = if y.len() > 1 {
        y.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, var.sqrt().max(TARGET_STD_FLOOR))
}

/// Fits a GP to unit-cube `inputs` and finite targets `y`.
pub fn fit(inputs: &[Vec<f64>], y: &[f64], cfg: &GpConfig) -> Result<GpModel, GpError> {
    cfg.validate()?;
    if inputs.is_empty() {
        return Err(GpError::Empty);
    }
    if inputs.len() != y.len() {
        return Err(GpError::LengthMismatch {
            inputs: inputs.len(),
            targets: y.len(),
        });
    }
    let dim = inputs[0].len();
    let mut flat = Vec::with_capacity(inputs.len() * dim);
    for (i, u) in inputs.iter().enumerate() {
        if u.len() != dim {
            return Err(GpError::DimensionMismatch {
                expected: dim,
                actual: u.len(),
            });
        }
        if u.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(GpError::OutsideUnitCube(i));
        }
        flat.extend_from_slice(u);
    }
    if let Some(i) = y.iter().position(|v| !v.is_finite()) {
        return Err(GpError::NonFiniteTarget(i));
    }

    let (y_mean, y_scale) = standardize(y);
    let z: Vec<f64> = y.iter().map(|v| (v - y_mean) / y_scale).collect();
    let n = y.len();
    let length_scale = if cfg.optimize_length_scale {
        optimize_length_scale(&flat, n, dim, &z, cfg)
    } else {
        cfg.length_scale
    };
    let k = kernel_matrix(&flat, n, dim, length_scale);
    let (chol, jitter) = factorize(&k, cfg)?;
    let mut alpha = z;
    forward_substitute(&chol, &mut alpha);
    backward_substitute(&chol, &mut alpha);

    Ok(GpModel {
        dim,
        n,
        inputs: flat,
        targets: y.to_vec(),
        y_mean,
        y_scale,
        length_scale,
        jitter,
        chol,
        alpha,
    })
}

/// Log marginal likelihood of standardized targets, or `None` if the kernel
/// cannot be factorized.
fn log_marginal_likelihood(
    inputs: &[f64],
    n: usize,
    dim: usize,
    z: &[f64],
    length_scale: f64,
    cfg: &GpConfig,
) -> Option<f64> {
    let k = kernel_matrix(inputs, n, dim, length_scale);
    let (chol, _) = factorize(&k, cfg).ok()?;
    let mut v = z.to_vec();
    forward_substitute(&chol, &mut v);
    let fit_term: f64 = v.iter().map(|x| x * x).sum();
    let log_det: f64 = (0..n).map(|i| chol[(i, i)].ln()).sum();
    Some(-0.5 * fit_term - log_det - 0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln())
}

/// Golden-section search for the marginal-likelihood length-scale over
/// `[0.01, 10]` on a log axis, seeded by a coarse grid.
fn optimize_length_scale(inputs: &[f64], n: usize, dim: usize, z: &[f64], cfg: &GpConfig) -> f64 {
    let score = |log_l: f64| log_marginal_likelihood(inputs, n, dim, z, log_l.exp(), cfg).unwrap_or(f64::NEG_INFINITY);
    let (lo, hi) = (0.01f64.ln(), 10f64.ln());
    let grid = 21;
    let step = (hi - lo) / (grid - 1) as f64;
    let mut best = (cfg.length_scale.ln(), score(cfg.length_scale.ln()));
    for i in 0..grid {
        let t = lo + step * i as f64;
        let s = score(t);
        if s > best.1 {
            best = (t, s);
        }
    }
    let (mut a, mut b) = ((best.0 - step).max(lo), (best.0 + step).min(hi));
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - phi * (b - a);
    let mut d = a + phi * (b - a);
    let (mut fc, mut fd) = (score(c), score(d));
    for _ in 0..40 {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - phi * (b - a);
            fc = score(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + phi * (b - a);
            fd = score(d);
        }
    }
    let mid = 0.5 * (a + b);
    if score(mid) >= best.1 {
        mid.exp()
    } else {
        best.0.exp()
    }
}

impl GpModel {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn length_scale(&self) -> f64 {
        self.length_scale
    }

    /// Jitter that was added to the kernel diagonal for a successful factorization.
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn input(&self, i: usize) -> &[f64] {
        &self.inputs[i * self.dim..(i + 1) * self.dim]
    }

    /// Mean and standard deviation used to standardize the targets.
    pub fn standardization(&self) -> (f64, f64) {
        (self.y_mean, self.y_scale)
    }

    /// Lower Cholesky factor of the jittered kernel matrix.
    pub fn cholesky_factor(&self) -> &DMatrix<f64> {
        &self.chol
    }

    /// Largest training target, the incumbent for expected improvement.
    pub fn best_target(&self) -> f64 {
        self.targets.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    fn check_query(&self, u: &[f64]) -> Result<(), GpError> {
        if u.len() != self.dim {
            return Err(GpError::DimensionMismatch {
                expected: self.dim,
                actual: u.len(),
            });
        }
        Ok(())
    }

    fn kernel_vector(&self, u: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| squared_exponential(u, self.input(i), self.length_scale))
            .collect()
    }

    pub fn predict(&self, u: &[f64]) -> Result<GpPrediction, GpError> {
        self.check_query(u)?;
        Ok(self.predict_unchecked(u))
    }

    pub(crate) fn predict_unchecked(&self, u: &[f64]) -> GpPrediction {
        let mut k = self.kernel_vector(u);
        let mean_z: f64 = k.iter().zip(&self.alpha).map(|(a, b)| a * b).sum();
        forward_substitute(&self.chol, &mut k);
        let var_z = (1.0 - k.iter().map(|v| v * v).sum::<f64>()).max(0.0);
        GpPrediction {
            mean: self.y_mean + self.y_scale * mean_z,
            std: self.y_scale * var_z.sqrt(),
        }
    }

    pub fn predict_with_gradient(&self, u: &[f64]) -> Result<PredictionGradient, GpError> {
        self.check_query(u)?;
        Ok(self.predict_with_gradient_unchecked(u))
    }

    pub(crate) fn predict_with_gradient_unchecked(&self, u: &[f64]) -> PredictionGradient {
        let k = self.kernel_vector(u);
        let mean_z: f64 = k.iter().zip(&self.alpha).map(|(a, b)| a * b).sum();
        let mut v = k.clone();
        forward_substitute(&self.chol, &mut v);
        let var_z = (1.0 - v.iter().map(|x| x * x).sum::<f64>()).max(0.0);
        // w = (K + jI)⁻¹ k
        let mut w = v;
        backward_substitute(&self.chol, &mut w);

        // ∂k_i/∂u = −k_i (u − x_i) / ℓ²
        let inv_l2 = 1.0 / (self.length_scale * self.length_scale);
        let mut d_mean_z = vec![0.0; self.dim];
        let mut d_var_z = vec![0.0; self.dim];
        for i in 0..self.n {
            let xi = self.input(i);
            let a = self.alpha[i] * k[i];
            let b = w[i] * k[i];
            for d in 0..self.dim {
                let dk = -(u[d] - xi[d]) * inv_l2;
                d_mean_z[d] += a * dk;
                d_var_z[d] -= 2.0 * b * dk;
            }
        }
        let std_z = var_z.sqrt();
        let d_std = d_var_z
            .iter()
            .map(|g| {
                if std_z > 0.0 {
                    self.y_scale * g / (2.0 * std_z)
                } else {
                    0.0
                }
            })
            .collect();
        PredictionGradient {
            prediction: GpPrediction {
                mean: self.y_mean + self.y_scale * mean_z,
                std: self.y_scale * std_z,
            },
            d_mean: d_mean_z.iter().map(|g| self.y_scale * g).collect(),
            d_std,
        }
    }
}
