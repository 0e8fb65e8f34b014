use lagbo::design_space::{DesignPoint, DesignSpace};
use lagbo::driver::{
    best_feasible, frontier_report, replay_multipliers, run, run_with, CampaignError, Dataset, Feasibility,
    IterationReport, Phase, RunConfig, RunMode, Silent,
};
use lagbo::evaluators::{BuiltinEvaluator, Evaluation, Evaluator, EvaluatorError, EvaluatorSpec};
use lagbo::lagrange::{lagrangian, multiplier, upper_hull, FrontierPoint, LagrangeState};

fn toy_config(mode: RunMode, n_total: usize, seed: u64) -> RunConfig {
    RunConfig::new(
        DesignSpace::toy2d(),
        EvaluatorSpec::builtin(BuiltinEvaluator::Toy2d),
        mode,
        n_total,
        seed,
    )
}

/// iteration, fit indices, fit labels, multiplier state
type Fit = (usize, Vec<usize>, Vec<f64>, Option<LagrangeState>);

struct Seen {
    fits: Vec<Fit>,
}

fn observe(cfg: RunConfig) -> (Dataset, Seen) {
    let mut seen = Seen { fits: Vec::new() };
    let mut sink = |rep: &IterationReport<'_>| {
        if rep.record.phase == Phase::Bo {
            seen.fits.push((
                rep.record.iteration,
                rep.fit_indices.to_vec(),
                rep.fit_labels.to_vec(),
                rep.state.cloned(),
            ));
        }
    };
    let ds = run(cfg, &mut sink).unwrap();
    (ds, seen)
}

#[test]
fn unconstrained_labels_are_fom() {
    let (ds, seen) = observe(toy_config(RunMode::Unconstrained, 40, 1));
    assert_eq!(ds.len(), 40);
    assert!(ds
        .records()
        .iter()
        .all(|r| r.lambda_used == 0.0 && r.target_used.is_none()));
    assert!(ds.records()[..10].iter().all(|r| r.phase == Phase::Init));
    for (_, idx, labels, state) in &seen.fits {
        assert!(state.is_none());
        for (i, l) in idx.iter().zip(labels) {
            assert_eq!(*l, ds.records()[*i].eval.fom);
        }
    }
}

#[test]
fn relabeling_uses_current_state_for_whole_history() {
    let (ds, seen) = observe(toy_config(
        RunMode::Frontier {
            bv_low: 30.0,
            bv_high: 50.0,
        },
        40,
        3,
    ));
    let mut targets = Vec::new();
    for (iteration, idx, labels, state) in &seen.fits {
        let state = state.as_ref().unwrap();
        targets.push(state.bv_target);
        let expected_idx: Vec<usize> = (0..*iteration).filter(|&i| ds.records()[i].eval.valid).collect();
        assert_eq!(idx, &expected_idx);
        for (i, l) in idx.iter().zip(labels) {
            let e = &ds.records()[*i].eval;
            assert_eq!(l.to_bits(), lagrangian(e.fom, e.bv, state).to_bits());
        }
    }
    assert!(targets.iter().all(|t| (30.0..=50.0).contains(t)));
    // the targets really are redrawn
    assert!(targets.windows(2).any(|w| w[0] != w[1]));
    assert!(replay_multipliers(&ds).is_empty());
}

#[test]
fn warmup_iterations_have_zero_lambda() {
    let ds = run(toy_config(RunMode::Constrained { bv_target: 50.0 }, 30, 4), &mut Silent).unwrap();
    let bo: Vec<_> = ds.records().iter().filter(|r| r.phase == Phase::Bo).collect();
    assert_eq!(bo[0].lambda_used, 0.0);
    assert_eq!(bo[1].lambda_used, 0.0);
    assert!(bo[2..].iter().any(|r| r.lambda_used != 0.0));
    assert!(bo.iter().all(|r| r.target_used == Some(50.0)));
    assert!(replay_multipliers(&ds).is_empty());
}

#[test]
fn zero_lambda_constrained_run_matches_unconstrained() {
    let unc = run(toy_config(RunMode::Unconstrained, 30, 11), &mut Silent).unwrap();
    let mut cfg = toy_config(RunMode::Constrained { bv_target: 50.0 }, 30, 11);
    cfg.warmup_unconstrained = usize::MAX;
    let con = run(cfg, &mut Silent).unwrap();
    for (a, b) in unc.records().iter().zip(con.records()) {
        let (xa, xb): (Vec<u64>, Vec<u64>) = (
            a.x.values().iter().map(|v| v.to_bits()).collect(),
            b.x.values().iter().map(|v| v.to_bits()).collect(),
        );
        assert_eq!(xa, xb);
        assert_eq!(a.eval, b.eval);
        assert_eq!(b.lambda_used, 0.0);
    }
}

#[test]
fn identical_configs_give_identical_datasets() {
    let cfg = toy_config(RunMode::Constrained { bv_target: 45.0 }, 30, 9);
    let a = run(cfg.clone(), &mut Silent).unwrap();
    let b = run(cfg, &mut Silent).unwrap();
    assert_eq!(a, b);
    let c = run(
        toy_config(RunMode::Constrained { bv_target: 45.0 }, 30, 10),
        &mut Silent,
    )
    .unwrap();
    assert_ne!(a.records()[0].x, c.records()[0].x);
}

#[test]
fn stored_points_lie_in_space() {
    let cfg = RunConfig::new(
        DesignSpace::ldmos9(),
        EvaluatorSpec::builtin(BuiltinEvaluator::Ldmos9Surrogate),
        RunMode::Constrained { bv_target: 45.0 },
        25,
        2,
    );
    let ds = run(cfg, &mut Silent).unwrap();
    for r in ds.records() {
        DesignSpace::ldmos9().validate(&r.x).unwrap();
    }
}

#[test]
fn incumbent_label_never_drops_under_fixed_lambda() {
    let (_, seen) = observe(toy_config(RunMode::Constrained { bv_target: 50.0 }, 40, 6));
    for w in seen.fits.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        if a.3.as_ref().map(|s| s.lambda) == b.3.as_ref().map(|s| s.lambda) {
            let max = |v: &[f64]| v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            assert!(max(&b.2) >= max(&a.2));
        }
    }
}

#[test]
fn config_is_validated() {
    let err = run(toy_config(RunMode::Unconstrained, 10, 0), &mut Silent).unwrap_err();
    assert!(matches!(err.error, CampaignError::Config(_)));
    let err = run(
        toy_config(
            RunMode::Frontier {
                bv_low: 50.0,
                bv_high: 30.0,
            },
            20,
            0,
        ),
        &mut Silent,
    )
    .unwrap_err();
    assert!(matches!(err.error, CampaignError::Config(_)));
    let mut cfg = toy_config(RunMode::Unconstrained, 20, 0);
    cfg.space = DesignSpace::ldmos9();
    assert!(run(cfg, &mut Silent).is_err());
}

/// Fails on chosen call numbers, otherwise delegates to toy2d.
struct Flaky {
    calls: usize,
    fail: Vec<usize>,
}

impl Evaluator for Flaky {
    fn evaluate(&mut self, x: &DesignPoint) -> Result<Evaluation, EvaluatorError> {
        let n = self.calls;
        self.calls += 1;
        if self.fail.contains(&n) {
            Ok(Evaluation::invalid())
        } else {
            BuiltinEvaluator::Toy2d.evaluate(x)
        }
    }
}

#[test]
fn invalid_evaluations_are_logged_and_retried() {
    let cfg = toy_config(RunMode::Constrained { bv_target: 45.0 }, 25, 5);
    let flaky = Flaky {
        calls: 0,
        fail: vec![3, 14, 15, 20],
    };
    let mut fits = Vec::new();
    let mut sink = |rep: &IterationReport<'_>| fits.push(rep.fit_indices.to_vec());
    let ds = run_with(cfg, Box::new(flaky), &mut sink).unwrap();
    assert_eq!(ds.valid_count(), 25);
    assert_eq!(ds.len(), 29);
    let invalid: Vec<usize> = ds
        .records()
        .iter()
        .filter(|r| !r.eval.valid)
        .map(|r| r.iteration)
        .collect();
    assert_eq!(invalid, vec![3, 14, 15, 20]);
    for f in &fits {
        assert!(f.iter().all(|i| !invalid.contains(i)));
    }
    let hull = frontier_report(&ds).unwrap();
    assert!(hull.points().iter().all(|p| !invalid.contains(&p.source_index)));
    // a retried slot keeps the multiplier of its first attempt
    assert_eq!(ds.records()[15].lambda_used, ds.records()[14].lambda_used);
    assert_eq!(ds.records()[16].lambda_used, ds.records()[14].lambda_used);
    assert!(replay_multipliers(&ds).is_empty());
}

#[test]
fn four_invalid_in_a_row_abort_with_partial_dataset() {
    let cfg = toy_config(RunMode::Unconstrained, 20, 5);
    let flaky = Flaky {
        calls: 0,
        fail: vec![12, 13, 14, 15],
    };
    let abort = run_with(cfg, Box::new(flaky), &mut Silent).unwrap_err();
    assert!(matches!(abort.error, CampaignError::TooManyInvalid { attempts: 4, .. }));
    assert_eq!(abort.dataset.len(), 16);
    assert_eq!(abort.dataset.valid_count(), 12);
}

struct Unreachable;

impl Evaluator for Unreachable {
    fn evaluate(&mut self, _: &DesignPoint) -> Result<Evaluation, EvaluatorError> {
        Err(EvaluatorError::Unavailable("gone".into()))
    }
}

#[test]
fn unavailable_evaluator_aborts() {
    let abort = run_with(
        toy_config(RunMode::Unconstrained, 20, 0),
        Box::new(Unreachable),
        &mut Silent,
    )
    .unwrap_err();
    assert!(matches!(abort.error, CampaignError::Evaluator(_)));
    assert!(abort.dataset.is_empty());
}

fn dataset_with(points: &[(f64, f64)]) -> Dataset {
    use lagbo::driver::RunRecord;
    let records = points
        .iter()
        .enumerate()
        .map(|(i, &(bv, fom))| RunRecord {
            iteration: i,
            phase: Phase::Init,
            x: DesignPoint::new(vec![0.5, 0.5]),
            eval: Evaluation {
                bv,
                rsp_on: bv * bv / fom,
                fom,
                valid: true,
                wall_time: None,
            },
            lambda_used: 0.0,
            target_used: None,
        })
        .collect();
    Dataset::from_records(toy_config(RunMode::Unconstrained, 20, 0), records).unwrap()
}

#[test]
fn best_feasible_prefers_meeting_the_target() {
    let ds = dataset_with(&[(49.0, 250.0), (51.0, 207.0)]);
    let r = best_feasible(&ds, 50.0, Feasibility::AtLeastTarget).unwrap();
    assert_eq!((r.eval.bv, r.eval.fom), (51.0, 207.0));
    let r = best_feasible(&ds, 50.0, Feasibility::WithinTolerance { tol: 1.0 }).unwrap();
    assert_eq!(r.eval.fom, 250.0);
    assert!(best_feasible(&dataset_with(&[]), 50.0, Feasibility::AtLeastTarget).is_none());
    let r = best_feasible(&ds, 0.0, Feasibility::AtLeastTarget).unwrap();
    assert_eq!(r.eval.fom, 250.0);
    // ties go to the earliest record
    let tie = dataset_with(&[(52.0, 300.0), (55.0, 300.0)]);
    assert_eq!(
        best_feasible(&tie, 50.0, Feasibility::AtLeastTarget).unwrap().iteration,
        0
    );
}

#[test]
fn frontier_report_cases() {
    let one = frontier_report(&dataset_with(&[(40.0, 300.0)])).unwrap();
    assert_eq!(one.len(), 1);
    let dup = frontier_report(&dataset_with(&[(40.0, 300.0), (40.0, 320.0)])).unwrap();
    assert_eq!(dup.points(), &[FrontierPoint::new(40.0, 320.0, 1)]);
    assert!(frontier_report(&dataset_with(&[])).is_err());
}

#[test]
fn replay_detects_a_tampered_multiplier() {
    let ds = run(toy_config(RunMode::Constrained { bv_target: 50.0 }, 20, 8), &mut Silent).unwrap();
    let mut records = ds.records().to_vec();
    records[15].lambda_used += 1e-9;
    let tampered = Dataset::from_records(ds.config().clone(), records).unwrap();
    let bad = replay_multipliers(&tampered);
    assert_eq!(bad.len(), 1);
    assert_eq!(bad[0].iteration, 15);
    // and the untampered value is what the hull of its predecessors gives
    let hull = upper_hull(&ds.frontier_points_before(15)).unwrap();
    assert_eq!(multiplier(&hull, 50.0).lambda, ds.records()[15].lambda_used);
}
