//! Expected improvement and its maximization over the unit cube.

use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;
use thiserror::Error;

use crate::gp::{GpModel, GpPrediction};
use crate::quasi_newton::{central_difference, minimize_unit_box};

/// Step of the central differences used for EI gradients.
pub const FD_STEP: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GradientMode {
    /// Closed-form gradient through the GP posterior.
    #[default]
    Analytic,
    /// Central differences with step [`FD_STEP`].
    FiniteDifference,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AcquisitionConfig {
    pub n_restarts: usize,
    pub lbfgs_max_iterations: usize,
    pub candidate_pool: usize,
    pub xi: f64,
    pub gradient: GradientMode,
}

impl Default for AcquisitionConfig {
    fn default() -> Self {
        Self {
            n_restarts: 20,
            lbfgs_max_iterations: 20,
            candidate_pool: 1000,
            xi: 0.0,
            gradient: GradientMode::Analytic,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
#[error("invalid acquisition configuration: {0}")]
pub struct AcquisitionConfigError(pub String);

impl AcquisitionConfig {
    pub fn validate(&self) -> Result<(), AcquisitionConfigError> {
        if self.n_restarts == 0 || self.lbfgs_max_iterations == 0 || self.candidate_pool == 0 {
            return Err(AcquisitionConfigError("all counts must be at least 1".into()));
        }
        if !(self.xi >= 0.0 && self.xi.is_finite()) {
            return Err(AcquisitionConfigError(format!(
                "xi must be finite and >= 0, got {}",
                self.xi
            )));
        }
        Ok(())
    }
}

pub fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

pub fn normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Expected improvement of a maximization problem over the incumbent
/// `best_y`, offset by `xi`.
pub fn expected_improvement(pred: &GpPrediction, best_y: f64, xi: f64) -> f64 {
    let delta = pred.mean - best_y - xi;
    if pred.std <= 0.0 {
        return delta.max(0.0);
    }
    let z = delta / pred.std;
    (delta * normal_cdf(z) + pred.std * normal_pdf(z)).max(0.0)
}

/// EI and its gradient with respect to the unit-cube query point.
fn expected_improvement_with_gradient(model: &GpModel, u: &[f64], best_y: f64, xi: f64) -> (f64, Vec<f64>) {
    let pg = model.predict_with_gradient_unchecked(u);
    let pred = pg.prediction;
    let delta = pred.mean - best_y - xi;
    if pred.std <= 0.0 {
        let slope = if delta > 0.0 { 1.0 } else { 0.0 };
        return (delta.max(0.0), pg.d_mean.iter().map(|g| slope * g).collect());
    }
    let z = delta / pred.std;
    let (cdf, pdf) = (normal_cdf(z), normal_pdf(z));
    let ei = (delta * cdf + pred.std * pdf).max(0.0);
    // ∂EI/∂μ = Φ(z), ∂EI/∂σ = φ(z)
    let grad = pg
        .d_mean
        .iter()
        .zip(&pg.d_std)
        .map(|(dm, ds)| cdf * dm + pdf * ds)
        .collect();
    (ei, grad)
}

/// Where the acquisition optimizer settled.
#[derive(Debug, Clone, PartialEq)]
pub struct Proposal {
    pub u: Vec<f64>,
    pub ei: f64,
}

/// Maximizes EI under `model`, with the incumbent taken as the largest
/// training target.
///
/// EI is scored on `candidate_pool` uniform points; the `n_restarts` best are
/// refined by bounded quasi-Newton ascent and the best refined point wins.
/// Ties are broken towards the lower pool index throughout.
pub fn maximize<R: Rng + ?Sized>(model: &GpModel, cfg: &AcquisitionConfig, rng: &mut R) -> Proposal {
    let best_y = model.best_target();
    let xi = cfg.xi;
    let value = |u: &[f64]| expected_improvement(&model.predict_unchecked(u), best_y, xi);
    match cfg.gradient {
        GradientMode::Analytic => maximize_with(model.dim(), cfg, rng, value, |u: &[f64]| {
            expected_improvement_with_gradient(model, u, best_y, xi)
        }),
        GradientMode::FiniteDifference => maximize_with(model.dim(), cfg, rng, value, |u: &[f64]| {
            let mut f = value;
            (f(u), central_difference(&mut f, u, FD_STEP))
        }),
    }
}

/// Pool-then-refine maximization of an arbitrary objective on `[0, 1]^dim`.
pub fn maximize_with<R, V, G>(dim: usize, cfg: &AcquisitionConfig, rng: &mut R, value: V, value_and_grad: G) -> Proposal
where
    R: Rng + ?Sized,
    V: Fn(&[f64]) -> f64,
    G: Fn(&[f64]) -> (f64, Vec<f64>),
{
    let pool: Vec<Vec<f64>> = (0..cfg.candidate_pool)
        .map(|_| (0..dim).map(|_| rng.random::<f64>()).collect())
        .collect();
    let scores: Vec<f64> = pool.iter().map(|u| value(u)).collect();

    let mut order: Vec<usize> = (0..pool.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));

    let mut best = Proposal {
        u: pool[order[0]].clone(),
        ei: scores[order[0]],
    };
    for &start in order.iter().take(cfg.n_restarts) {
        let refined = minimize_unit_box(
            |u| {
                let (v, g) = value_and_grad(u);
                (-v, g.into_iter().map(|x| -x).collect())
            },
            &pool[start],
            cfg.lbfgs_max_iterations,
        );
        let ei = -refined.value;
        // strict: on ties the earlier-ranked start keeps its place
        if ei > best.ei {
            best = Proposal { u: refined.x, ei };
        }
    }
    best
}
