//! Bounded input domains, unit-cube normalization and derived device geometry.
//!
//! Every dimension maps affinely onto `[0, 1]`, either in its native units
//! (`Linear`) or in decades (`Log10`). The GP and the acquisition optimizer
//! only ever see unit-cube coordinates; evaluators see native units.

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Name of the builtin nine-parameter LDMOS space.
pub const LDMOS9: &str = "ldmos9";
/// Name of the builtin unit square used by the `toy2d` evaluator.
pub const TOY2D: &str = "toy2d";

/// Depth of the first drift doping peak, in micrometers.
const DRIFT_PEAK_DEPTH_UM: f64 = 0.3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    #[default]
    Linear,
    Log10,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Dimension {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
    #[serde(default)]
    pub scale: Scale,
}

impl Dimension {
    pub fn linear(name: &str, lower: f64, upper: f64) -> Self {
        Self {
            name: name.to_owned(),
            lower,
            upper,
            scale: Scale::Linear,
        }
    }

    pub fn log10(name: &str, lower: f64, upper: f64) -> Self {
        Self {
            name: name.to_owned(),
            lower,
            upper,
            scale: Scale::Log10,
        }
    }

    fn to_unit(&self, value: f64) -> f64 {
        match self.scale {
            Scale::Linear => (value - self.lower) / (self.upper - self.lower),
            Scale::Log10 => {
                let lo = self.lower.log10();
                (value.log10() - lo) / (self.upper.log10() - lo)
            }
        }
    }

    fn value_at(&self, u: f64) -> f64 {
        if u <= 0.0 {
            return self.lower;
        }
        if u >= 1.0 {
            return self.upper;
        }
        let value = match self.scale {
            Scale::Linear => self.lower + u * (self.upper - self.lower),
            Scale::Log10 => {
                let lo = self.lower.log10();
                10f64.powf(lo + u * (self.upper.log10() - lo))
            }
        };
        // powf can overshoot a bound by an ulp
        value.clamp(self.lower, self.upper)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpaceError {
    #[error("design space has no dimensions")]
    Empty,
    #[error("dimension `{0}` has lower bound not below upper bound")]
    EmptyInterval(String),
    #[error("dimension `{0}` has a non-finite bound")]
    NonFiniteBound(String),
    #[error("dimension `{0}` uses log10 scale but its lower bound is not positive")]
    NonPositiveLogBound(String),
    #[error("dimension name `{0}` appears more than once")]
    DuplicateName(String),
    #[error("unknown builtin design space `{0}`")]
    UnknownBuiltin(String),
    #[error("invalid design point: {}", join_violations(.0))]
    InvalidPoint(Vec<Violation>),
    #[error("dimension `{0}` is required but missing from the design space")]
    MissingDimension(String),
    #[error("drift depth needs N_drift1 > N_surface (got {n_drift1:e} and {n_surface:e})")]
    DriftDepthDomain { n_drift1: f64, n_surface: f64 },
}

fn join_violations(v: &[Violation]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

/// One reason a point does not belong to a space.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    LengthMismatch {
        expected: usize,
        actual: usize,
    },
    OutOfBounds {
        name: String,
        value: f64,
        lower: f64,
        upper: f64,
    },
    NotFinite {
        name: String,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::LengthMismatch { expected, actual } => {
                write!(f, "expected {expected} values, got {actual}")
            }
            Violation::OutOfBounds {
                name,
                value,
                lower,
                upper,
            } => write!(f, "{name} = {value} outside [{lower}, {upper}]"),
            Violation::NotFinite { name } => write!(f, "{name} is not finite"),
        }
    }
}

/// A vector of native-unit values, one per dimension of some [`DesignSpace`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DesignPoint(Vec<f64>);

impl DesignPoint {
    pub fn new(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl From<Vec<f64>> for DesignPoint {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSpace", into = "RawSpace")]
pub struct DesignSpace {
    dims: Vec<Dimension>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSpace {
    dims: Vec<Dimension>,
}

impl TryFrom<RawSpace> for DesignSpace {
    type Error = SpaceError;

    fn try_from(raw: RawSpace) -> Result<Self, Self::Error> {
        DesignSpace::new(raw.dims)
    }
}

impl From<DesignSpace> for RawSpace {
    fn from(space: DesignSpace) -> Self {
        RawSpace { dims: space.dims }
    }
}

impl DesignSpace {
    pub fn new(dims: Vec<Dimension>) -> Result<Self, SpaceError> {
        if dims.is_empty() {
            return Err(SpaceError::Empty);
        }
        for (i, d) in dims.iter().enumerate() {
            if !d.lower.is_finite() || !d.upper.is_finite() {
                return Err(SpaceError::NonFiniteBound(d.name.clone()));
            }
            if d.lower >= d.upper {
                return Err(SpaceError::EmptyInterval(d.name.clone()));
            }
            if d.scale == Scale::Log10 && d.lower <= 0.0 {
                return Err(SpaceError::NonPositiveLogBound(d.name.clone()));
            }
            if dims[..i].iter().any(|other| other.name == d.name) {
                return Err(SpaceError::DuplicateName(d.name.clone()));
            }
        }
        Ok(Self { dims })
    }

    /// The nine LDMOS input parameters with their bounds. Doping
    /// concentrations (cm^-3) are searched in decades; lengths are in nm,
    /// `GP` in percent and `R` is dimensionless.
    pub fn ldmos9() -> Self {
        Self {
            dims: vec![
                Dimension::log10("N_drift1", 7e16, 2.5e17),
                Dimension::linear("L_drift1", 250.0, 2700.0),
                Dimension::linear("L_drift2", 0.0, 500.0),
                Dimension::linear("GP", 10.0, 99.0),
                Dimension::linear("L_JFET", 0.0, 700.0),
                Dimension::linear("L_FOX", 750.0, 2000.0),
                Dimension::log10("N_surface", 1e16, 6e16),
                Dimension::linear("T_FOX", 50.0, 150.0),
                Dimension::linear("R", 0.5, 5.0),
            ],
        }
    }

    pub fn toy2d() -> Self {
        Self {
            dims: vec![Dimension::linear("x1", 0.0, 1.0), Dimension::linear("x2", 0.0, 1.0)],
        }
    }

    pub fn builtin(name: &str) -> Result<Self, SpaceError> {
        match name {
            LDMOS9 => Ok(Self::ldmos9()),
            TOY2D => Ok(Self::toy2d()),
            other => Err(SpaceError::UnknownBuiltin(other.to_owned())),
        }
    }

    pub fn dims(&self) -> &[Dimension] {
        &self.dims
    }

    pub fn len(&self) -> usize {
        self.dims.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dims.is_empty()
    }

    pub fn names(&self) -> Vec<String> {
        self.dims.iter().map(|d| d.name.clone()).collect()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.dims.iter().position(|d| d.name == name)
    }

    /// Collects every reason `x` is not a member of this space. Bounds are
    /// inclusive.
    pub fn validate(&self, x: &DesignPoint) -> Result<(), Vec<Violation>> {
        if x.len() != self.len() {
            return Err(vec![Violation::LengthMismatch {
                expected: self.len(),
                actual: x.len(),
            }]);
        }
        let violations: Vec<_> = self
            .dims
            .iter()
            .zip(x.values())
            .filter_map(|(d, &v)| {
                if !v.is_finite() {
                    Some(Violation::NotFinite { name: d.name.clone() })
                } else if v < d.lower || v > d.upper {
                    Some(Violation::OutOfBounds {
                        name: d.name.clone(),
                        value: v,
                        lower: d.lower,
                        upper: d.upper,
                    })
                } else {
                    None
                }
            })
            .collect();
        if violations.is_empty() {
            Ok(())
        } else {
            Err(violations)
        }
    }

    pub fn normalize(&self, x: &DesignPoint) -> Result<Vec<f64>, SpaceError> {
        self.validate(x).map_err(SpaceError::InvalidPoint)?;
        Ok(self.dims.iter().zip(x.values()).map(|(d, &v)| d.to_unit(v)).collect())
    }

    /// Maps unit-cube coordinates back to native units. Coordinates outside
    /// `[0, 1]` are clamped onto the cube first.
    ///
    /// # Panics
    ///
    /// Panics if `u` does not have one coordinate per dimension.
    pub fn denormalize(&self, u: &[f64]) -> DesignPoint {
        assert_eq!(u.len(), self.len(), "unit vector has wrong dimension");
        DesignPoint(
            self.dims
                .iter()
                .zip(u)
                .map(|(d, &ui)| d.value_at(ui.clamp(0.0, 1.0)))
                .collect(),
        )
    }

    /// Draws `n` points i.i.d. uniform in normalized coordinates.
    pub fn sample_uniform<R: Rng + ?Sized>(&self, rng: &mut R, n: usize) -> Vec<DesignPoint> {
        (0..n)
            .map(|_| {
                let u: Vec<f64> = (0..self.len()).map(|_| rng.random::<f64>()).collect();
                self.denormalize(&u)
            })
            .collect()
    }
}

/// Geometry that follows from the LDMOS inputs rather than being searched.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivedGeometry {
    /// Drift region depth in micrometers.
    pub d_drift: f64,
    /// LOCOS taper length in nanometers.
    pub l_step: f64,
}

/// Depth (µm) at which a Gaussian drift profile peaking at 0.3 µm with
/// concentration `n_drift1` falls to three standard deviations, given that it
/// reaches `n_surface` at the silicon surface.
pub fn drift_depth_um(n_drift1: f64, n_surface: f64) -> Result<f64, SpaceError> {
    let ratio = n_drift1 / n_surface;
    if !(n_surface > 0.0 && ratio > 1.0) {
        return Err(SpaceError::DriftDepthDomain { n_drift1, n_surface });
    }
    // standard deviation (µm) of the profile, squared: 0.3² / (2 ln ratio)
    let sigma_sq = 0.045 / ratio.ln();
    Ok(DRIFT_PEAK_DEPTH_UM + 3.0 * sigma_sq.sqrt())
}

pub fn step_length_nm(t_fox_nm: f64, shape_ratio: f64) -> f64 {
    t_fox_nm * shape_ratio
}

pub fn derived_geometry(space: &DesignSpace, x: &DesignPoint) -> Result<DerivedGeometry, SpaceError> {
    space.validate(x).map_err(SpaceError::InvalidPoint)?;
    let get = |name: &str| {
        space
            .index_of(name)
            .map(|i| x.values()[i])
            .ok_or_else(|| SpaceError::MissingDimension(name.to_owned()))
    };
    Ok(DerivedGeometry {
        d_drift: drift_depth_um(get("N_drift1")?, get("N_surface")?)?,
        l_step: step_length_nm(get("T_FOX")?, get("R")?),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn mid(space: &DesignSpace) -> DesignPoint {
        space.denormalize(&vec![0.5; space.len()])
    }

    #[test]
    fn table_point_inside_bounds_is_ok() {
        let space = DesignSpace::ldmos9();
        let mut x = mid(&space).into_inner();
        x[0] = 1e17;
        assert_eq!(space.validate(&DesignPoint::new(x)), Ok(()));
    }

    #[test]
    fn thick_oxide_is_named_in_violation() {
        let space = DesignSpace::ldmos9();
        let mut x = mid(&space).into_inner();
        x[space.index_of("T_FOX").unwrap()] = 200.0;
        let errs = space.validate(&DesignPoint::new(x)).unwrap_err();
        assert_eq!(errs.len(), 1);
        match &errs[0] {
            Violation::OutOfBounds { name, .. } => assert_eq!(name, "T_FOX"),
            other => panic!("unexpected violation {other:?}"),
        }
    }

    #[test]
    fn short_point_reports_length_mismatch() {
        let space = DesignSpace::ldmos9();
        let errs = space.validate(&DesignPoint::new(vec![1.0; 8])).unwrap_err();
        assert_eq!(errs, vec![Violation::LengthMismatch { expected: 9, actual: 8 }]);
    }

    #[test]
    fn bounds_map_to_cube_corners() {
        let space = DesignSpace::ldmos9();
        let lo = DesignPoint::new(space.dims().iter().map(|d| d.lower).collect());
        let hi = DesignPoint::new(space.dims().iter().map(|d| d.upper).collect());
        for u in space.normalize(&lo).unwrap() {
            assert!(u.abs() < 1e-15);
        }
        for u in space.normalize(&hi).unwrap() {
            assert!((u - 1.0).abs() < 1e-15);
        }
        assert_eq!(space.denormalize(&[1.0; 9]), hi);
        assert_eq!(space.denormalize(&[0.0; 9]), lo);
    }

    #[test]
    fn linear_midpoint() {
        let space = DesignSpace::new(vec![Dimension::linear("L_FOX", 750.0, 2000.0)]).unwrap();
        let u = space.normalize(&DesignPoint::new(vec![1375.0])).unwrap();
        assert!((u[0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn construction_rejects_bad_dims() {
        assert_eq!(DesignSpace::new(vec![]), Err(SpaceError::Empty));
        assert!(matches!(
            DesignSpace::new(vec![Dimension::linear("a", 1.0, 1.0)]),
            Err(SpaceError::EmptyInterval(_))
        ));
        assert!(matches!(
            DesignSpace::new(vec![Dimension::log10("a", 0.0, 1.0)]),
            Err(SpaceError::NonPositiveLogBound(_))
        ));
        assert!(matches!(
            DesignSpace::new(vec![Dimension::linear("a", 0.0, 1.0), Dimension::linear("a", 0.0, 2.0)]),
            Err(SpaceError::DuplicateName(_))
        ));
    }

    #[test]
    fn sampling_is_seeded_and_valid() {
        let space = DesignSpace::ldmos9();
        let a = space.sample_uniform(&mut ChaCha8Rng::seed_from_u64(3), 10);
        let b = space.sample_uniform(&mut ChaCha8Rng::seed_from_u64(3), 10);
        assert_eq!(a.len(), 10);
        assert_eq!(a, b);
        assert!(a.iter().all(|x| space.validate(x).is_ok()));
        assert!(space.sample_uniform(&mut ChaCha8Rng::seed_from_u64(3), 0).is_empty());
    }

    #[test]
    fn sampling_is_uniform_in_unit_coordinates() {
        let space = DesignSpace::ldmos9();
        let pts = space.sample_uniform(&mut ChaCha8Rng::seed_from_u64(11), 10_000);
        let mut sums = vec![0.0; space.len()];
        for p in &pts {
            assert!(space.validate(p).is_ok());
            for (s, u) in sums.iter_mut().zip(space.normalize(p).unwrap()) {
                *s += u;
            }
        }
        for s in sums {
            let mean = s / pts.len() as f64;
            assert!((mean - 0.5).abs() <= 0.02, "mean {mean}");
        }
    }

    #[test]
    fn drift_depth_with_unit_log_ratio() {
        let d = drift_depth_um(std::f64::consts::E * 1e16, 1e16).unwrap();
        assert!((d - (0.3 + 3.0 * 0.045f64.sqrt())).abs() < 1e-12);
        assert!((d - 0.93640).abs() < 1e-5);
    }

    #[test]
    fn drift_depth_rejects_equal_concentrations() {
        assert!(matches!(
            drift_depth_um(3e16, 3e16),
            Err(SpaceError::DriftDepthDomain { .. })
        ));
    }

    #[test]
    fn step_length_is_product() {
        assert_eq!(step_length_nm(100.0, 2.0), 200.0);
        let space = DesignSpace::ldmos9();
        let mut x = mid(&space).into_inner();
        x[space.index_of("T_FOX").unwrap()] = 100.0;
        x[space.index_of("R").unwrap()] = 2.0;
        let g = derived_geometry(&space, &DesignPoint::new(x)).unwrap();
        assert_eq!(g.l_step, 200.0);
        assert!(g.d_drift > 0.3);
    }

    proptest! {
        #[test]
        fn normalize_round_trips(us in proptest::collection::vec(0.0f64..=1.0, 9)) {
            let space = DesignSpace::ldmos9();
            let x = space.denormalize(&us);
            let back = space.denormalize(&space.normalize(&x).unwrap());
            for (a, b) in x.values().iter().zip(back.values()) {
                prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1e-300));
            }
            let u2 = space.normalize(&x).unwrap();
            for (a, b) in us.iter().zip(&u2) {
                prop_assert!((a - b).abs() <= 1e-12);
            }
        }

        // Deeper profiles come from flatter Gaussians: a higher peak with the
        // surface value fixed narrows the profile, a higher surface value widens it.
        #[test]
        fn drift_depth_monotonicity(
            n1 in 7e16f64..2.5e17, dn in 1e14f64..1e16,
            ns in 1e16f64..6e16, dns in 1e13f64..5e15,
        ) {
            let base = drift_depth_um(n1, ns).unwrap();
            prop_assert!(drift_depth_um(n1 + dn, ns).unwrap() < base);
            prop_assert!(drift_depth_um(n1, ns + dns).unwrap() > base);
            prop_assert!(base > 0.3);
        }
    }
}
