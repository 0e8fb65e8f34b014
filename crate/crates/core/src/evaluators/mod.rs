//! Black-box device evaluators.
//!
//! An evaluator turns a [`DesignPoint`] into an [`Evaluation`]: breakdown
//! voltage in V, specific on-resistance in mΩ·mm², and the figure of merit
//! `bv² / rsp_on` in kW/mm². Two analytic builtins are provided for desk-scale
//! campaigns; anything else runs as a child process speaking line-delimited
//! JSON (see [`subprocess`]).

mod builtin;
pub mod subprocess;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::design_space::{DesignPoint, DesignSpace, Violation};

pub use builtin::{ldmos9_surrogate, ldmos9_surrogate_unit, toy2d};
pub use subprocess::SubprocessEvaluator;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvaluatorError {
    #[error("on-resistance must be positive, got {0}")]
    NonPositiveResistance(f64),
    #[error("point outside evaluator domain: {0:?}")]
    OutOfDomain(Vec<Violation>),
    #[error("evaluator unavailable: {0}")]
    Unavailable(String),
    #[error("evaluator expects {expected} dimensions but the design space has {actual}")]
    SpaceMismatch { expected: usize, actual: usize },
    #[error("unknown builtin evaluator `{0}`")]
    UnknownBuiltin(String),
    #[error("subprocess evaluator needs a command")]
    EmptyCommand,
}

/// `bv² / rsp_on`; with V and mΩ·mm² the result is in kW/mm².
pub fn fom(bv: f64, rsp_on: f64) -> Result<f64, EvaluatorError> {
    if rsp_on > 0.0 {
        Ok(bv * bv / rsp_on)
    } else {
        Err(EvaluatorError::NonPositiveResistance(rsp_on))
    }
}

/// Result of one black-box evaluation.
///
/// When `valid` is false the numeric fields carry no meaning; such records are
/// logged but never fitted or hulled.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub bv: f64,
    pub rsp_on: f64,
    pub fom: f64,
    pub valid: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_time: Option<f64>,
}

impl Evaluation {
    /// Builds an evaluation from raw measurements, marking it invalid unless
    /// both are finite and positive.
    pub fn from_measurements(bv: f64, rsp_on: f64) -> Self {
        let ok = bv.is_finite() && rsp_on.is_finite() && bv > 0.0 && rsp_on > 0.0;
        let fom = if ok { bv * bv / rsp_on } else { f64::NAN };
        Self {
            bv,
            rsp_on,
            fom,
            valid: ok,
            wall_time: None,
        }
    }

    pub fn invalid() -> Self {
        Self {
            bv: f64::NAN,
            rsp_on: f64::NAN,
            fom: f64::NAN,
            valid: false,
            wall_time: None,
        }
    }

    pub fn with_wall_time(mut self, seconds: f64) -> Self {
        self.wall_time = Some(seconds);
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BuiltinEvaluator {
    #[serde(rename = "toy2d")]
    Toy2d,
    #[serde(rename = "ldmos9-surrogate")]
    Ldmos9Surrogate,
}

impl BuiltinEvaluator {
    pub const ALL: [BuiltinEvaluator; 2] = [BuiltinEvaluator::Toy2d, BuiltinEvaluator::Ldmos9Surrogate];

    pub fn name(self) -> &'static str {
        match self {
            BuiltinEvaluator::Toy2d => "toy2d",
            BuiltinEvaluator::Ldmos9Surrogate => "ldmos9-surrogate",
        }
    }

    pub fn from_name(name: &str) -> Result<Self, EvaluatorError> {
        Self::ALL
            .into_iter()
            .find(|b| b.name() == name)
            .ok_or_else(|| EvaluatorError::UnknownBuiltin(name.to_owned()))
    }

    /// The design space this evaluator is defined on.
    pub fn space(self) -> DesignSpace {
        match self {
            BuiltinEvaluator::Toy2d => DesignSpace::toy2d(),
            BuiltinEvaluator::Ldmos9Surrogate => DesignSpace::ldmos9(),
        }
    }

    pub fn evaluate(self, x: &DesignPoint) -> Result<Evaluation, EvaluatorError> {
        match self {
            BuiltinEvaluator::Toy2d => toy2d(x),
            BuiltinEvaluator::Ldmos9Surrogate => ldmos9_surrogate(x),
        }
    }
}

impl fmt::Display for BuiltinEvaluator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

fn default_timeout() -> f64 {
    600.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum EvaluatorSpec {
    Builtin {
        name: BuiltinEvaluator,
    },
    Subprocess {
        command: Vec<String>,
        #[serde(default = "default_timeout")]
        timeout_s: f64,
    },
}

impl EvaluatorSpec {
    pub fn builtin(b: BuiltinEvaluator) -> Self {
        EvaluatorSpec::Builtin { name: b }
    }

    pub fn subprocess<S: Into<String>>(command: impl IntoIterator<Item = S>, timeout_s: f64) -> Self {
        EvaluatorSpec::Subprocess {
            command: command.into_iter().map(Into::into).collect(),
            timeout_s,
        }
    }

    /// Checks that this evaluator can serve points of `space`.
    pub fn check_space(&self, space: &DesignSpace) -> Result<(), EvaluatorError> {
        match self {
            EvaluatorSpec::Builtin { name } => {
                let expected = name.space().len();
                if expected != space.len() {
                    return Err(EvaluatorError::SpaceMismatch {
                        expected,
                        actual: space.len(),
                    });
                }
                Ok(())
            }
            EvaluatorSpec::Subprocess { command, .. } => {
                if command.is_empty() {
                    Err(EvaluatorError::EmptyCommand)
                } else {
                    Ok(())
                }
            }
        }
    }

    /// Opens a handle for one campaign. Subprocess evaluators spawn their
    /// child here.
    pub fn open(&self, space: &DesignSpace) -> Result<Box<dyn Evaluator>, EvaluatorError> {
        self.check_space(space)?;
        match self {
            EvaluatorSpec::Builtin { name } => Ok(Box::new(*name)),
            EvaluatorSpec::Subprocess { command, timeout_s } => Ok(Box::new(SubprocessEvaluator::spawn(
                command.clone(),
                space.names(),
                *timeout_s,
            )?)),
        }
    }
}

/// A handle that evaluates design points for one campaign.
pub trait Evaluator {
    /// Evaluates `x`. Failures of the device under test (bad response,
    /// timeout, crashed child) come back as an invalid [`Evaluation`]; only a
    /// failure to reach the evaluator at all is an error.
    fn evaluate(&mut self, x: &DesignPoint) -> Result<Evaluation, EvaluatorError>;
}

impl Evaluator for BuiltinEvaluator {
    fn evaluate(&mut self, x: &DesignPoint) -> Result<Evaluation, EvaluatorError> {
        BuiltinEvaluator::evaluate(*self, x)
    }
}

/// One-shot evaluation: opens a handle, evaluates a single point and drops the
/// handle again.
pub fn evaluate(spec: &EvaluatorSpec, space: &DesignSpace, x: &DesignPoint) -> Result<Evaluation, EvaluatorError> {
    space.validate(x).map_err(EvaluatorError::OutOfDomain)?;
    spec.open(space)?.evaluate(x)
}
