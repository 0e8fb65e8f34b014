//! Constrained Bayesian optimization with a Lagrange multiplier read off the
//! upper convex hull of observed (breakdown voltage, figure of merit) pairs.
//!
//! The pieces compose bottom-up: a [`design_space::DesignSpace`] maps device
//! parameters to the unit cube, [`evaluators`] produce measurements, [`gp`]
//! and [`acquisition`] propose the next point, [`lagrange`] turns the
//! constraint into a multiplier, and [`driver`] runs whole campaigns.

pub mod acquisition;
pub mod design_space;
pub mod driver;
pub mod evaluators;
pub mod gp;
pub mod lagrange;
pub mod oracle;
pub mod quasi_newton;
pub mod run_dir;
