//! Projected limited-memory BFGS on the unit box.
//!
//! Small and single-purpose: the acquisition optimizer calls it with at most a
//! few dozen iterations from many starts. Bound handling is by projection:
//! coordinates pinned at a bound whose gradient points outward are frozen for
//! the step, and every trial point is clamped back into `[0, 1]^d`. Accepted
//! steps strictly decrease the objective, so the result is never worse than
//! the start.

use std::collections::VecDeque;

const MEMORY: usize = 8;
const ARMIJO: f64 = 1e-4;
const MAX_BACKTRACKS: usize = 40;

#[derive(Debug, Clone, PartialEq)]
pub struct BoxMinimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn pinned(x: f64, g: f64) -> bool {
    (x <= 0.0 && g > 0.0) || (x >= 1.0 && g < 0.0)
}

/// Minimizes `f` over `[0, 1]^d` starting from `x0`. `f` returns the value and
/// gradient at a point.
pub fn minimize_unit_box<F>(mut f: F, x0: &[f64], max_iterations: usize) -> BoxMinimum
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    let dim = x0.len();
    let mut x: Vec<f64> = x0.iter().map(|v| v.clamp(0.0, 1.0)).collect();
    let (mut fx, mut g) = f(&x);
    let mut history: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(MEMORY);
    let mut iterations = 0;

    while iterations < max_iterations {
        let free: Vec<bool> = x.iter().zip(&g).map(|(&xi, &gi)| !pinned(xi, gi)).collect();
        let pg: Vec<f64> = g.iter().zip(&free).map(|(&gi, &f)| if f { gi } else { 0.0 }).collect();
        if pg.iter().all(|v| *v == 0.0) || !fx.is_finite() {
            break;
        }

        // two-loop recursion on the projected gradient
        let mut q = pg.clone();
        let mut alphas = Vec::with_capacity(history.len());
        for (s, y, rho) in history.iter().rev() {
            let a = rho * dot(s, &q);
            for (qi, yi) in q.iter_mut().zip(y) {
                *qi -= a * yi;
            }
            alphas.push(a);
        }
        let gamma = history.back().map(|(s, y, _)| dot(s, y) / dot(y, y)).unwrap_or(1.0);
        for qi in q.iter_mut() {
            *qi *= gamma;
        }
        for ((s, y, rho), a) in history.iter().zip(alphas.into_iter().rev()) {
            let b = rho * dot(y, &q);
            for (qi, si) in q.iter_mut().zip(s) {
                *qi += (a - b) * si;
            }
        }
        let mut dir: Vec<f64> = q.iter().zip(&free).map(|(&qi, &f)| if f { -qi } else { 0.0 }).collect();
        if dot(&dir, &pg) >= 0.0 {
            history.clear();
            dir = pg.iter().map(|v| -v).collect();
        }

        let mut step = if history.is_empty() {
            let max_move = dir.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            (0.1 / max_move).min(1.0)
        } else {
            1.0
        };

        let mut accepted = None;
        for _ in 0..MAX_BACKTRACKS {
            let trial: Vec<f64> = x
                .iter()
                .zip(&dir)
                .map(|(xi, di)| (xi + step * di).clamp(0.0, 1.0))
                .collect();
            let dx: Vec<f64> = trial.iter().zip(&x).map(|(a, b)| a - b).collect();
            if dx.iter().all(|v| *v == 0.0) {
                break;
            }
            let (ft, gt) = f(&trial);
            if ft < fx && ft <= fx + ARMIJO * dot(&g, &dx) {
                accepted = Some((trial, ft, gt, dx));
                break;
            }
            step *= 0.5;
        }
        iterations += 1;
        let Some((xn, fnew, gn, s)) = accepted else {
            break;
        };

        let y: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() && sy > 0.0 {
            if history.len() == MEMORY {
                history.pop_front();
            }
            history.push_back((s, y, 1.0 / sy));
        }
        let improvement = fx - fnew;
        x = xn;
        fx = fnew;
        g = gn;
        if improvement <= 1e-15 * fx.abs().max(f64::MIN_POSITIVE) {
            break;
        }
    }
    debug_assert_eq!(x.len(), dim);
    BoxMinimum {
        x,
        value: fx,
        iterations,
    }
}

/// Central-difference gradient with step `h`, shortened to one-sided at the
/// box faces so no evaluation leaves `[0, 1]^d`.
pub fn central_difference<F>(f: &mut F, x: &[f64], h: f64) -> Vec<f64>
where
    F: FnMut(&[f64]) -> f64,
{
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            let hi = (x[i] + h).min(1.0);
            let lo = (x[i] - h).max(0.0);
            probe[i] = hi;
            let fh = f(&probe);
            probe[i] = lo;
            let fl = f(&probe);
            probe[i] = x[i];
            (fh - fl) / (hi - lo)
        })
        .collect()
}
