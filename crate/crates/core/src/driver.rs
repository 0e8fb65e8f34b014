//! Campaign loop: random initialization, then one acquisition per iteration
//! with the multiplier and labels refreshed from the full history.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::acquisition::{self, AcquisitionConfig};
use crate::design_space::{DesignPoint, DesignSpace};
use crate::evaluators::{Evaluation, Evaluator, EvaluatorError, EvaluatorSpec};
use crate::gp::{self, GpConfig, GpError};
use crate::lagrange::{self, FrontierPoint, HullError, LagrangeState, UpperHull};

/// Consecutive invalid evaluations tolerated for one slot after the first.
pub const MAX_RETRIES: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum RunMode {
    Unconstrained,
    Constrained { bv_target: f64 },
    Frontier { bv_low: f64, bv_high: f64 },
}

impl RunMode {
    pub fn name(&self) -> &'static str {
        match self {
            RunMode::Unconstrained => "unconstrained",
            RunMode::Constrained { .. } => "constrained",
            RunMode::Frontier { .. } => "frontier",
        }
    }
}

/// When a record counts as meeting a BV target.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Feasibility {
    /// `bv ≥ target`
    #[default]
    AtLeastTarget,
    /// `|bv − target| ≤ tol`
    WithinTolerance { tol: f64 },
}

impl Feasibility {
    pub fn is_feasible(&self, bv: f64, target: f64) -> bool {
        match *self {
            Feasibility::AtLeastTarget => bv >= target,
            Feasibility::WithinTolerance { tol } => (bv - target).abs() <= tol,
        }
    }
}

fn default_n_init() -> usize {
    10
}

fn default_warmup() -> usize {
    2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub space: DesignSpace,
    pub evaluator: EvaluatorSpec,
    pub mode: RunMode,
    #[serde(default = "default_n_init")]
    pub n_init: usize,
    pub n_total: usize,
    pub seed: u64,
    /// BO iterations that run with λ = 0 before the hull is consulted.
    #[serde(default = "default_warmup")]
    pub warmup_unconstrained: usize,
    #[serde(default)]
    pub feasibility: Feasibility,
    #[serde(default)]
    pub gp: GpConfig,
    #[serde(default)]
    pub acq: AcquisitionConfig,
}

#[derive(Debug, Error, Clone, PartialEq)]
#[error("invalid run configuration: {0}")]
pub struct ConfigError(pub String);

impl RunConfig {
    pub fn new(space: DesignSpace, evaluator: EvaluatorSpec, mode: RunMode, n_total: usize, seed: u64) -> Self {
        Self {
            space,
            evaluator,
            mode,
            n_init: default_n_init(),
            n_total,
            seed,
            warmup_unconstrained: default_warmup(),
            feasibility: Feasibility::default(),
            gp: GpConfig::default(),
            acq: AcquisitionConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.n_init < 1 {
            return Err(ConfigError("n_init must be at least 1".into()));
        }
        if self.n_total <= self.n_init {
            return Err(ConfigError(format!(
                "n_total ({}) must exceed n_init ({})",
                self.n_total, self.n_init
            )));
        }
        match self.mode {
            RunMode::Unconstrained => {}
            RunMode::Constrained { bv_target } if !bv_target.is_finite() => {
                return Err(ConfigError("bv_target must be finite".into()));
            }
            RunMode::Constrained { .. } => {}
            RunMode::Frontier { bv_low, bv_high } => {
                if !(bv_low.is_finite() && bv_high.is_finite() && bv_low < bv_high) {
                    return Err(ConfigError(format!(
                        "frontier range needs bv_low < bv_high, got {bv_low}..{bv_high}"
                    )));
                }
            }
        }
        if let Feasibility::WithinTolerance { tol } = self.feasibility {
            if !(tol >= 0.0 && tol.is_finite()) {
                return Err(ConfigError(format!(
                    "feasibility tolerance must be finite and >= 0, got {tol}"
                )));
            }
        }
        self.gp.validate().map_err(|e| ConfigError(e.to_string()))?;
        self.acq.validate().map_err(|e| ConfigError(e.to_string()))?;
        self.evaluator
            .check_space(&self.space)
            .map_err(|e| ConfigError(e.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Init,
    Bo,
}

impl Phase {
    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Init => "init",
            Phase::Bo => "bo",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    /// Position in the dataset, invalid records included.
    pub iteration: usize,
    pub phase: Phase,
    pub x: DesignPoint,
    pub eval: Evaluation,
    pub lambda_used: f64,
    pub target_used: Option<f64>,
}

impl RunRecord {
    /// The value this record would carry under the multiplier and target that
    /// were in force when it was acquired.
    pub fn objective_label(&self) -> f64 {
        match self.target_used {
            Some(t) => lagrange::lagrangian(
                self.eval.fom,
                self.eval.bv,
                &LagrangeState {
                    lambda: self.lambda_used,
                    ..LagrangeState::zero(t)
                },
            ),
            None => self.eval.fom,
        }
    }
}

/// Append-only campaign history.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    config: RunConfig,
    records: Vec<RunRecord>,
}

impl Dataset {
    pub fn new(config: RunConfig) -> Self {
        Self {
            config,
            records: Vec::new(),
        }
    }

    /// Rebuilds a dataset from stored records, checking that iterations run
    /// 0, 1, 2, ... in order.
    pub fn from_records(config: RunConfig, records: Vec<RunRecord>) -> Result<Self, ConfigError> {
        for (i, r) in records.iter().enumerate() {
            if r.iteration != i {
                return Err(ConfigError(format!("record {i} carries iteration {}", r.iteration)));
            }
        }
        Ok(Self { config, records })
    }

    pub fn config(&self) -> &RunConfig {
        &self.config
    }

    pub fn seed(&self) -> u64 {
        self.config.seed
    }

    pub fn records(&self) -> &[RunRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn valid_count(&self) -> usize {
        self.records.iter().filter(|r| r.eval.valid).count()
    }

    fn push(&mut self, phase: Phase, x: DesignPoint, eval: Evaluation, state: Option<&LagrangeState>) -> &RunRecord {
        let iteration = self.records.len();
        self.records.push(RunRecord {
            iteration,
            phase,
            x,
            eval,
            lambda_used: state.map_or(0.0, |s| s.lambda),
            target_used: state.map(|s| s.bv_target),
        });
        &self.records[iteration]
    }

    /// Valid records as hull input, each tagged with its dataset index.
    pub fn frontier_points(&self) -> Vec<FrontierPoint> {
        self.frontier_points_before(self.records.len())
    }

    /// As [`Dataset::frontier_points`], restricted to records `0..end`.
    pub fn frontier_points_before(&self, end: usize) -> Vec<FrontierPoint> {
        self.records[..end]
            .iter()
            .filter(|r| r.eval.valid)
            .map(|r| FrontierPoint::new(r.eval.bv, r.eval.fom, r.iteration))
            .collect()
    }
}

/// Highest-FOM valid record meeting the rule for `target`; the earliest wins a
/// tie.
pub fn best_feasible(ds: &Dataset, target: f64, rule: Feasibility) -> Option<&RunRecord> {
    ds.records()
        .iter()
        .filter(|r| r.eval.valid && rule.is_feasible(r.eval.bv, target))
        .fold(None, |best: Option<&RunRecord>, r| match best {
            Some(b) if b.eval.fom >= r.eval.fom => Some(b),
            _ => Some(r),
        })
}

/// Highest-FOM valid record, ignoring any constraint.
pub fn best_overall(ds: &Dataset) -> Option<&RunRecord> {
    best_feasible(ds, f64::NEG_INFINITY, Feasibility::AtLeastTarget)
}

/// Upper hull over every valid (bv, fom) pair in the dataset.
pub fn frontier_report(ds: &Dataset) -> Result<UpperHull, HullError> {
    lagrange::upper_hull(&ds.frontier_points())
}

/// What a progress sink sees after each acquisition.
#[derive(Debug, Clone)]
pub struct IterationReport<'a> {
    pub record: &'a RunRecord,
    /// Multiplier state used to pick this record; `None` in the init phase.
    pub state: Option<&'a LagrangeState>,
    /// Dataset indices of the records the GP was fitted on.
    pub fit_indices: &'a [usize],
    /// Objective labels the GP was fitted on, parallel to `fit_indices`.
    pub fit_labels: &'a [f64],
    /// Best FOM among valid records so far.
    pub incumbent_fom: Option<f64>,
}

/// Receives one report per stored record.
pub trait ProgressSink {
    fn on_record(&mut self, report: &IterationReport<'_>);
}

impl<F: FnMut(&IterationReport<'_>)> ProgressSink for F {
    fn on_record(&mut self, report: &IterationReport<'_>) {
        self(report)
    }
}

/// Discards every report.
pub struct Silent;

impl ProgressSink for Silent {
    fn on_record(&mut self, _: &IterationReport<'_>) {}
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CampaignError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Evaluator(#[from] EvaluatorError),
    #[error("{attempts} consecutive invalid evaluations at iteration {iteration}")]
    TooManyInvalid { iteration: usize, attempts: usize },
    #[error("surrogate fit failed: {0}")]
    Surrogate(#[from] GpError),
    #[error("hull construction failed: {0}")]
    Hull(#[from] HullError),
}

/// A campaign that stopped early, with everything recorded up to that point.
#[derive(Debug, Clone, Error)]
#[error("campaign aborted after {} records: {error}", dataset.len())]
pub struct CampaignAbort {
    pub dataset: Dataset,
    pub error: CampaignError,
}

struct Campaign<'a> {
    ds: Dataset,
    rng: ChaCha8Rng,
    evaluator: Box<dyn Evaluator>,
    /// Normalized inputs of the valid records, parallel to `valid`.
    unit_inputs: Vec<Vec<f64>>,
    valid: Vec<usize>,
    best_fom: Option<f64>,
    sink: &'a mut dyn ProgressSink,
}

impl Campaign<'_> {
    /// Evaluates `first`, falling back to fresh uniform points on invalid
    /// results. Returns once a valid record is stored.
    fn fill_slot(
        &mut self,
        phase: Phase,
        first: DesignPoint,
        state: Option<&LagrangeState>,
        fit: (&[usize], &[f64]),
    ) -> Result<(), CampaignError> {
        let mut x = first;
        for attempt in 0..=MAX_RETRIES {
            let eval = self.evaluator.evaluate(&x)?;
            let space = &self.ds.config.space;
            let u = space.normalize(&x).expect("proposals stay inside the space");
            let record = self.ds.push(phase, x, eval, state);
            if record.eval.valid {
                self.unit_inputs.push(u);
                self.valid.push(record.iteration);
                let fom = record.eval.fom;
                self.best_fom = Some(self.best_fom.map_or(fom, |b: f64| b.max(fom)));
            }
            let ok = record.eval.valid;
            let report = IterationReport {
                record,
                state,
                fit_indices: fit.0,
                fit_labels: fit.1,
                incumbent_fom: self.best_fom,
            };
            self.sink.on_record(&report);
            if ok {
                return Ok(());
            }
            if attempt == MAX_RETRIES {
                break;
            }
            x = self.ds.config.space.sample_uniform(&mut self.rng, 1).remove(0);
        }
        Err(CampaignError::TooManyInvalid {
            iteration: self.ds.len() - 1,
            attempts: MAX_RETRIES + 1,
        })
    }

    fn state_for(&mut self, bo_iteration: usize) -> Result<Option<LagrangeState>, CampaignError> {
        let cfg = &self.ds.config;
        let target = match cfg.mode {
            RunMode::Unconstrained => return Ok(None),
            RunMode::Constrained { bv_target } => bv_target,
            RunMode::Frontier { bv_low, bv_high } => bv_low + (bv_high - bv_low) * self.rng.random::<f64>(),
        };
        if bo_iteration < cfg.warmup_unconstrained {
            return Ok(Some(LagrangeState::zero(target)));
        }
        let hull = lagrange::upper_hull(&self.ds.frontier_points())?;
        Ok(Some(lagrange::multiplier(&hull, target)))
    }

    fn bo_step(&mut self, bo_iteration: usize) -> Result<(), CampaignError> {
        let state = self.state_for(bo_iteration)?;
        let labels: Vec<f64> = self
            .valid
            .iter()
            .map(|&i| {
                let e = &self.ds.records[i].eval;
                match &state {
                    Some(s) => lagrange::lagrangian(e.fom, e.bv, s),
                    None => e.fom,
                }
            })
            .collect();
        let cfg = &self.ds.config;
        let model = gp::fit(&self.unit_inputs, &labels, &cfg.gp)?;
        let proposal = acquisition::maximize(&model, &cfg.acq, &mut self.rng);
        let x = cfg.space.denormalize(&proposal.u);
        let fit_indices = self.valid.clone();
        self.fill_slot(Phase::Bo, x, state.as_ref(), (&fit_indices, &labels))
    }

    fn run(&mut self) -> Result<(), CampaignError> {
        let (n_init, n_total) = (self.ds.config.n_init, self.ds.config.n_total);
        for _ in 0..n_init {
            let x = self.ds.config.space.sample_uniform(&mut self.rng, 1).remove(0);
            self.fill_slot(Phase::Init, x, None, (&[], &[]))?;
        }
        for k in 0..n_total - n_init {
            self.bo_step(k)?;
        }
        Ok(())
    }
}

/// Runs a full campaign. The whole trajectory is a function of `cfg`: one
/// ChaCha8 stream seeded from `cfg.seed` drives initial points, frontier
/// targets, acquisition pools and retries, in that order of use.
#[allow(clippy::result_large_err)]
pub fn run(cfg: RunConfig, sink: &mut dyn ProgressSink) -> Result<Dataset, CampaignAbort> {
    let evaluator = match cfg
        .validate()
        .map_err(CampaignError::from)
        .and_then(|_| cfg.evaluator.open(&cfg.space).map_err(CampaignError::from))
    {
        Ok(ev) => ev,
        Err(error) => {
            return Err(CampaignAbort {
                dataset: Dataset::new(cfg),
                error,
            })
        }
    };
    run_with(cfg, evaluator, sink)
}

/// As [`run`], with an evaluator handle supplied by the caller instead of
/// opened from `cfg.evaluator`.
#[allow(clippy::result_large_err)]
pub fn run_with(
    cfg: RunConfig,
    evaluator: Box<dyn Evaluator>,
    sink: &mut dyn ProgressSink,
) -> Result<Dataset, CampaignAbort> {
    if let Err(e) = cfg.validate() {
        return Err(CampaignAbort {
            dataset: Dataset::new(cfg),
            error: e.into(),
        });
    }
    let mut campaign = Campaign {
        rng: ChaCha8Rng::seed_from_u64(cfg.seed),
        ds: Dataset::new(cfg),
        evaluator,
        unit_inputs: Vec::new(),
        valid: Vec::new(),
        best_fom: None,
        sink,
    };
    match campaign.run() {
        Ok(()) => Ok(campaign.ds),
        Err(error) => Err(CampaignAbort {
            dataset: campaign.ds,
            error,
        }),
    }
}

/// One BO record whose stored λ disagrees with the hull of its predecessors.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplayMismatch {
    pub iteration: usize,
    pub stored: f64,
    pub recomputed: f64,
}

/// Recomputes every stored λ from the valid records preceding it and reports
/// the records that disagree bitwise. Warmup iterations must carry λ = 0.
pub fn replay_multipliers(ds: &Dataset) -> Vec<ReplayMismatch> {
    let cfg = ds.config();
    let mut bo_slot = 0usize;
    let mut mismatches = Vec::new();
    for r in ds.records() {
        let recomputed = match (r.phase, cfg.mode, r.target_used) {
            (Phase::Init, _, _) | (_, RunMode::Unconstrained, _) | (_, _, None) => 0.0,
            _ if bo_slot < cfg.warmup_unconstrained => 0.0,
            (_, _, Some(t)) => match lagrange::upper_hull(&ds.frontier_points_before(r.iteration)) {
                Ok(h) => lagrange::multiplier(&h, t).lambda,
                Err(_) => f64::NAN,
            },
        };
        if recomputed.to_bits() != r.lambda_used.to_bits() {
            mismatches.push(ReplayMismatch {
                iteration: r.iteration,
                stored: r.lambda_used,
                recomputed,
            });
        }
        // retries share the slot of the first attempt
        if r.phase == Phase::Bo && r.eval.valid {
            bo_slot += 1;
        }
    }
    mismatches
}
