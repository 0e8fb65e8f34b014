//! Campaign configuration: a JSON file, command-line overrides, and the merge
//! into a [`RunConfig`].
//!
//! Every field resolves as flag, then file, then default.

use std::path::{Path, PathBuf};

use lagbo::acquisition::AcquisitionConfig;
use lagbo::design_space::DesignSpace;
use lagbo::driver::{Feasibility, RunConfig, RunMode};
use lagbo::evaluators::{BuiltinEvaluator, EvaluatorSpec};
use lagbo::gp::GpConfig;
use serde::Deserialize;
use thiserror::Error;

pub const DEFAULT_N_INIT: usize = 10;
pub const DEFAULT_N_TOTAL: usize = 100;
pub const DEFAULT_SEED: u64 = 0;
pub const DEFAULT_OUT: &str = "lagbo-run";
pub const DEFAULT_TIMEOUT_S: f64 = 600.0;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Parse { path: PathBuf, source: serde_json::Error },
    #[error("{0}")]
    Invalid(String),
}

/// A design space given by builtin name or by explicit dimensions.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum SpaceChoice {
    Builtin(String),
    Explicit(DesignSpace),
}

/// An evaluator given by builtin name or by full spec.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum EvaluatorChoice {
    Named(String),
    Spec(EvaluatorSpec),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ModeName {
    Unconstrained,
    Constrained,
    Frontier,
}

/// Contents of a `--config` file. Every key is optional.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub space: Option<SpaceChoice>,
    pub evaluator: Option<EvaluatorChoice>,
    pub mode: Option<ModeName>,
    pub target: Option<f64>,
    pub target_range: Option<(f64, f64)>,
    pub n_init: Option<usize>,
    pub n_total: Option<usize>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub warmup_unconstrained: Option<usize>,
    pub feasibility: Option<Feasibility>,
    pub gp: Option<GpConfig>,
    pub acq: Option<AcquisitionConfig>,
}

impl ConfigFile {
    pub fn parse(text: &str, path: &Path) -> Result<Self, ConfigError> {
        serde_json::from_str(text).map_err(|source| ConfigError::Parse {
            path: path.to_owned(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_owned(),
            source,
        })?;
        Self::parse(&text, path)
    }
}

/// Values given on the command line.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub mode: Option<ModeName>,
    pub target: Option<f64>,
    pub target_range: Option<(f64, f64)>,
    pub n_init: Option<usize>,
    pub n_total: Option<usize>,
    pub evaluator: Option<EvaluatorChoice>,
}

/// Parses `LO:HI`.
pub fn parse_range(s: &str) -> Result<(f64, f64), String> {
    let (lo, hi) = s.split_once(':').ok_or_else(|| format!("expected LO:HI, got {s:?}"))?;
    let num = |t: &str| t.trim().parse::<f64>().map_err(|_| format!("not a number: {t:?}"));
    Ok((num(lo)?, num(hi)?))
}

/// Parses `NAME` or `cmd:PROGRAM ARG...` (arguments split on whitespace).
pub fn parse_evaluator(s: &str) -> Result<EvaluatorChoice, String> {
    match s.strip_prefix("cmd:") {
        Some(rest) => {
            let argv: Vec<String> = rest.split_whitespace().map(str::to_owned).collect();
            if argv.is_empty() {
                return Err("cmd: needs a program".into());
            }
            Ok(EvaluatorChoice::Spec(EvaluatorSpec::Subprocess {
                command: argv,
                timeout_s: DEFAULT_TIMEOUT_S,
            }))
        }
        None => Ok(EvaluatorChoice::Named(s.to_owned())),
    }
}

/// Fully resolved settings for one `run` invocation.
#[derive(Debug, Clone, PartialEq)]
pub struct Resolved {
    pub run: RunConfig,
    pub out: PathBuf,
}

fn builtin_evaluator(name: &str) -> Result<BuiltinEvaluator, ConfigError> {
    BuiltinEvaluator::from_name(name).map_err(|e| ConfigError::Invalid(e.to_string()))
}

fn builtin_space(name: &str) -> Result<DesignSpace, ConfigError> {
    DesignSpace::builtin(name).map_err(|e| ConfigError::Invalid(e.to_string()))
}

/// The builtin evaluator that serves a builtin space by default.
fn evaluator_for_space(space: &str) -> Option<BuiltinEvaluator> {
    match space {
        lagbo::design_space::TOY2D => Some(BuiltinEvaluator::Toy2d),
        lagbo::design_space::LDMOS9 => Some(BuiltinEvaluator::Ldmos9Surrogate),
        _ => None,
    }
}

/// Merges flags over file over defaults and checks the result.
pub fn resolve(file: ConfigFile, flags: Overrides) -> Result<Resolved, ConfigError> {
    let evaluator_choice = flags.evaluator.or(file.evaluator);
    let evaluator = match &evaluator_choice {
        Some(EvaluatorChoice::Named(n)) => Some(EvaluatorSpec::builtin(builtin_evaluator(n)?)),
        Some(EvaluatorChoice::Spec(s)) => Some(s.clone()),
        None => None,
    };

    let space = match (&file.space, &evaluator) {
        (Some(SpaceChoice::Builtin(n)), _) => builtin_space(n)?,
        (Some(SpaceChoice::Explicit(s)), _) => s.clone(),
        (None, Some(EvaluatorSpec::Builtin { name })) => name.space(),
        (None, Some(EvaluatorSpec::Subprocess { .. })) => {
            return Err(ConfigError::Invalid(
                "a subprocess evaluator needs an explicit `space`".into(),
            ))
        }
        (None, None) => DesignSpace::toy2d(),
    };
    let evaluator = match evaluator {
        Some(e) => e,
        None => match &file.space {
            Some(SpaceChoice::Builtin(n)) => EvaluatorSpec::builtin(
                evaluator_for_space(n)
                    .ok_or_else(|| ConfigError::Invalid(format!("no default evaluator for space {n:?}")))?,
            ),
            Some(SpaceChoice::Explicit(_)) => {
                return Err(ConfigError::Invalid("an explicit space needs an `evaluator`".into()))
            }
            None => EvaluatorSpec::builtin(BuiltinEvaluator::Toy2d),
        },
    };

    let mode_name = flags.mode.or(file.mode).unwrap_or(ModeName::Unconstrained);
    let target = flags.target.or(file.target);
    let range = flags.target_range.or(file.target_range);
    let mode = match mode_name {
        ModeName::Unconstrained => RunMode::Unconstrained,
        ModeName::Constrained => RunMode::Constrained {
            bv_target: target.ok_or_else(|| ConfigError::Invalid("constrained mode needs a target".into()))?,
        },
        ModeName::Frontier => {
            let (bv_low, bv_high) =
                range.ok_or_else(|| ConfigError::Invalid("frontier mode needs a target range".into()))?;
            RunMode::Frontier { bv_low, bv_high }
        }
    };

    let run = RunConfig {
        space,
        evaluator,
        mode,
        n_init: flags.n_init.or(file.n_init).unwrap_or(DEFAULT_N_INIT),
        n_total: flags.n_total.or(file.n_total).unwrap_or(DEFAULT_N_TOTAL),
        seed: flags.seed.or(file.seed).unwrap_or(DEFAULT_SEED),
        warmup_unconstrained: file.warmup_unconstrained.unwrap_or(2),
        feasibility: file.feasibility.unwrap_or_default(),
        gp: file.gp.unwrap_or_default(),
        acq: file.acq.unwrap_or_default(),
    };
    run.validate().map_err(|e| ConfigError::Invalid(e.0))?;
    Ok(Resolved {
        run,
        out: flags.out.or(file.out).unwrap_or_else(|| PathBuf::from(DEFAULT_OUT)),
    })
}
