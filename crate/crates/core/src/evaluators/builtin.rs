use std::f64::consts::PI;
use std::sync::OnceLock;

use super::{Evaluation, EvaluatorError};
use crate::design_space::{DesignPoint, DesignSpace};

/// Two-parameter proxy with a breakdown/on-resistance trade-off.
///
/// `bv = 30 + 25·x1`, `rsp_on = 1 + 4·x1² + 3·(x2 − 0.3 − 0.4·x1)²`. For fixed
/// `x1` the FOM peaks on the ridge `x2 = 0.3 + 0.4·x1`.
pub fn toy2d(x: &DesignPoint) -> Result<Evaluation, EvaluatorError> {
    DesignSpace::toy2d().validate(x).map_err(EvaluatorError::OutOfDomain)?;
    let (x1, x2) = (x.values()[0], x.values()[1]);
    let bv = 30.0 + 25.0 * x1;
    let ridge = x2 - 0.3 - 0.4 * x1;
    let rsp_on = 1.0 + 4.0 * x1 * x1 + 3.0 * ridge * ridge;
    Ok(Evaluation::from_measurements(bv, rsp_on))
}

fn ldmos9_space() -> &'static DesignSpace {
    static SPACE: OnceLock<DesignSpace> = OnceLock::new();
    SPACE.get_or_init(DesignSpace::ldmos9)
}

/// Nine-parameter analytic stand-in for the LDMOS simulator, evaluated in
/// normalized coordinates (log10 for the two concentrations).
pub fn ldmos9_surrogate(x: &DesignPoint) -> Result<Evaluation, EvaluatorError> {
    let space = ldmos9_space();
    let u = space.normalize(x).map_err(|e| match e {
        crate::design_space::SpaceError::InvalidPoint(v) => EvaluatorError::OutOfDomain(v),
        other => unreachable!("normalize only fails on invalid points: {other}"),
    })?;
    let u: [f64; 9] = u.try_into().expect("ldmos9 has nine dimensions");
    Ok(ldmos9_surrogate_unit(&u))
}

/// [`ldmos9_surrogate`] on unit-cube coordinates, in ldmos9 dimension order.
pub fn ldmos9_surrogate_unit(u: &[f64; 9]) -> Evaluation {
    let [n_drift1, l_drift1, l_drift2, gp, l_jfet, l_fox, n_surface, t_fox, r] = *u;
    let bv = 25.0 + 20.0 * l_drift1 + 5.0 * l_fox + 6.0 * t_fox - 12.0 * n_drift1 - 4.0 * n_surface
        + 3.0 * (PI * r).sin() * (1.0 - n_drift1)
        + 2.0 * l_drift2;
    let rsp_on = 1.5
        + 4.0 * l_drift1
        + 1.5 * l_fox
        + 1.0 * l_jfet
        + 3.0 * (1.0 - n_drift1)
        + 0.8 * (1.0 - n_surface)
        + 0.5 * t_fox
        + 0.3 * (gp - 0.6).powi(2)
        + 0.5 * l_drift2;
    Evaluation::from_measurements(bv, rsp_on)
}
