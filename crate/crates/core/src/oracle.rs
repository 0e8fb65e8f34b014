//! Brute-force reference optima for the builtin evaluators.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::design_space::{DesignPoint, DesignSpace};
use crate::evaluators::{ldmos9_surrogate_unit, BuiltinEvaluator, Evaluation};

#[derive(Debug, Clone, PartialEq)]
pub struct OracleHit {
    pub x: DesignPoint,
    pub eval: Evaluation,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleReport {
    pub evaluator: BuiltinEvaluator,
    /// Highest FOM found anywhere.
    pub best: OracleHit,
    pub target: Option<f64>,
    /// Highest FOM with `bv ≥ target`; `None` when nothing found qualifies.
    pub constrained: Option<OracleHit>,
}

/// Keeps the strictly better of two candidates; the incumbent wins ties.
fn consider(slot: &mut Option<(Vec<f64>, Evaluation)>, u: &[f64], e: Evaluation) {
    if !e.valid {
        return;
    }
    if slot.as_ref().is_none_or(|(_, b)| e.fom > b.fom) {
        *slot = Some((u.to_vec(), e));
    }
}

fn hit(space: &DesignSpace, found: (Vec<f64>, Evaluation)) -> OracleHit {
    OracleHit {
        x: space.denormalize(&found.0),
        eval: found.1,
    }
}

/// Exhaustive search over a `resolution × resolution` grid of toy2d, corners
/// included.
///
/// # Panics
///
/// Panics if `resolution < 2`.
pub fn toy2d_grid(resolution: usize, target: Option<f64>) -> OracleReport {
    assert!(resolution >= 2, "grid needs at least two points per axis");
    let space = DesignSpace::toy2d();
    let step = |i: usize| i as f64 / (resolution - 1) as f64;
    let (mut best, mut constrained) = (None, None);
    for i in 0..resolution {
        for j in 0..resolution {
            let u = [step(i), step(j)];
            let e = BuiltinEvaluator::Toy2d
                .evaluate(&space.denormalize(&u))
                .expect("grid points lie in the toy2d domain");
            consider(&mut best, &u, e);
            if target.is_some_and(|t| e.bv >= t) {
                consider(&mut constrained, &u, e);
            }
        }
    }
    OracleReport {
        evaluator: BuiltinEvaluator::Toy2d,
        best: hit(&space, best.expect("toy2d is valid everywhere")),
        target,
        constrained: constrained.map(|c| hit(&space, c)),
    }
}

pub const LDMOS9_SAMPLES: usize = 1_000_000;
pub const DESCENT_SWEEPS: usize = 100;
pub const DESCENT_STEP_START: f64 = 0.05;
pub const DESCENT_STEP_END: f64 = 1e-5;

/// Coordinate search in the unit cube: try ±step along each axis, keep
/// improvements, halve the step after a sweep that found none.
fn coordinate_descent<F: Fn(&[f64; 9]) -> f64>(start: [f64; 9], score: F) -> [f64; 9] {
    let mut x = start;
    let mut best = score(&x);
    let mut step = DESCENT_STEP_START;
    for _ in 0..DESCENT_SWEEPS {
        let mut improved = false;
        for i in 0..9 {
            for dir in [1.0, -1.0] {
                let mut trial = x;
                trial[i] = (x[i] + dir * step).clamp(0.0, 1.0);
                let s = score(&trial);
                if s > best {
                    best = s;
                    x = trial;
                    improved = true;
                }
            }
        }
        if !improved {
            step *= 0.5;
            if step < DESCENT_STEP_END {
                break;
            }
        }
    }
    x
}

/// Seeded random search over the ldmos9 surrogate followed by coordinate
/// descent from the best sample.
pub fn ldmos9_search(samples: usize, seed: u64, target: Option<f64>) -> OracleReport {
    let space = DesignSpace::ldmos9();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut best, mut constrained) = (None, None);
    for _ in 0..samples {
        let u: [f64; 9] = std::array::from_fn(|_| rng.random::<f64>());
        let e = ldmos9_surrogate_unit(&u);
        consider(&mut best, &u, e);
        if target.is_some_and(|t| e.bv >= t) {
            consider(&mut constrained, &u, e);
        }
    }

    let refine = |found: Option<(Vec<f64>, Evaluation)>, target: Option<f64>| {
        found.map(|(u, e)| {
            let start: [f64; 9] = u.try_into().expect("nine coordinates");
            let polished = coordinate_descent(start, |p| {
                let e = ldmos9_surrogate_unit(p);
                match target {
                    Some(t) if e.bv.is_nan() || e.bv < t => f64::NEG_INFINITY,
                    _ if !e.valid => f64::NEG_INFINITY,
                    _ => e.fom,
                }
            });
            let pe = ldmos9_surrogate_unit(&polished);
            if pe.fom >= e.fom {
                (polished.to_vec(), pe)
            } else {
                (start.to_vec(), e)
            }
        })
    };
    let best = refine(best, None).expect("random search finds a valid sample");
    let constrained = refine(constrained, target);
    OracleReport {
        evaluator: BuiltinEvaluator::Ldmos9Surrogate,
        best: hit(&space, best),
        target,
        constrained: constrained.map(|c| hit(&space, c)),
    }
}

/// Default oracle for a builtin: the 1001² grid for toy2d, seeded random
/// search plus descent for ldmos9.
pub fn reference(evaluator: BuiltinEvaluator, resolution: usize, seed: u64, target: Option<f64>) -> OracleReport {
    match evaluator {
        BuiltinEvaluator::Toy2d => toy2d_grid(resolution, target),
        BuiltinEvaluator::Ldmos9Surrogate => ldmos9_search(LDMOS9_SAMPLES, seed, target),
    }
}
