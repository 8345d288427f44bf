use mosrs::evaluator::{mock_docking, zdt1, Builtin, BuiltinEvaluator, EvalError, FailureKind};
use mosrs::optimizer::{resume, run, Phase, RunConfig, RunResult};
use mosrs::pareto::{hypervolume, pareto_front, ObjectivePair};
use mosrs::space::{Algorithm, SearchSpace};

fn zdt(x: &[f64]) -> Result<ObjectivePair, EvalError> {
    Ok(zdt1(x).unwrap())
}

fn zdt_config(seed: u64) -> RunConfig {
    RunConfig {
        budget: 100,
        n0: Some(20),
        seed,
        ..Default::default()
    }
}

fn successes(result: &RunResult) -> Vec<ObjectivePair> {
    result.successes().map(|(_, y)| y).collect()
}

#[test]
fn exactly_budget_calls_with_initial_and_loop_split() {
    let space = SearchSpace::unit_box(10, 0.0, 1.0).unwrap();
    let mut calls = 0usize;
    let mut counted = |x: &[f64]| {
        calls += 1;
        zdt(x)
    };
    let result = run(&space, &mut counted, &zdt_config(1)).unwrap();
    assert_eq!(calls, 100);
    assert_eq!(result.history.len(), 100);
    let initial = result
        .history
        .iter()
        .filter(|e| e.phase == Phase::Initial)
        .count();
    assert_eq!(initial, 20);
    assert_eq!(result.history.len() - initial, 80);
}

#[test]
fn archive_tracks_front_of_history_at_every_step() {
    let space = SearchSpace::builtin(Algorithm::Ga);
    let mut eval = BuiltinEvaluator::new(Builtin::MockDocking, space.clone());
    let result = run(
        &space,
        &mut eval,
        &RunConfig {
            budget: 60,
            seed: 9,
            ..Default::default()
        },
    )
    .unwrap();

    let mut seen = Vec::new();
    for e in &result.history {
        if let Some(y) = e.outcome.objectives() {
            seen.push(y);
        }
        let front = pareto_front(&seen).map_or(0, |f| f.len());
        assert_eq!(e.archive_size, front, "evaluation {}", e.index);
    }
    let mut archived: Vec<usize> = result.archive.entries().iter().map(|e| e.eval_index).collect();
    archived.sort_unstable();
    let all = successes(&result);
    let expected: Vec<usize> = pareto_front(&all)
        .unwrap()
        .into_iter()
        .map(|i| result.successes().nth(i).unwrap().0.index)
        .collect();
    assert_eq!(archived, expected);
    assert!(result.archive.is_mutually_nondominated());
    // archive points are real history points, objectives included
    for a in result.archive.entries() {
        let h = &result.history[a.eval_index];
        assert_eq!(h.unit, a.point);
        assert_eq!(h.outcome.objectives(), Some(a.objectives));
    }
}

#[test]
fn hypervolume_never_decreases() {
    let space = SearchSpace::unit_box(6, 0.0, 1.0).unwrap();
    let result = run(
        &space,
        &mut zdt,
        &RunConfig {
            budget: 80,
            seed: 4,
            ..Default::default()
        },
    )
    .unwrap();
    let all = successes(&result);
    let reference = ObjectivePair::new(
        all.iter().map(|y| y.f1).fold(f64::NEG_INFINITY, f64::max) + 1.0,
        all.iter().map(|y| y.f2).fold(f64::NEG_INFINITY, f64::max) + 1.0,
    );
    let mut last = 0.0;
    for t in 1..=all.len() {
        let hv = hypervolume(&all[..t], reference);
        assert!(hv >= last, "hypervolume dropped at {t}: {hv} < {last}");
        last = hv;
    }
}

#[test]
fn constant_objectives_complete() {
    let space = SearchSpace::builtin(Algorithm::Ls);
    let mut flat = |_: &[f64]| Ok(ObjectivePair::new(3.0, 3.0));
    let result = run(&space, &mut flat, &RunConfig::default()).unwrap();
    assert_eq!(result.history.len(), 100);
    assert!(result
        .archive
        .entries()
        .iter()
        .all(|e| e.objectives == ObjectivePair::new(3.0, 3.0)));
}

#[test]
fn same_seed_same_run() {
    let space = SearchSpace::builtin(Algorithm::Hb);
    let config = RunConfig {
        budget: 40,
        seed: 11,
        ..Default::default()
    };
    let mut e1 = BuiltinEvaluator::new(Builtin::MockDocking, space.clone());
    let mut e2 = BuiltinEvaluator::new(Builtin::MockDocking, space.clone());
    let a = run(&space, &mut e1, &config).unwrap();
    let b = run(&space, &mut e2, &config).unwrap();
    assert_eq!(a, b);
    let c = run(&space, &mut e1, &RunConfig { seed: 12, ..config }).unwrap();
    assert_ne!(a.history, c.history);
}

#[test]
fn resume_replays_the_uninterrupted_run() {
    let space = SearchSpace::unit_box(5, 0.0, 1.0).unwrap();
    let full_cfg = RunConfig {
        budget: 100,
        n0: Some(12),
        seed: 21,
        ..Default::default()
    };
    let half_cfg = RunConfig {
        budget: 50,
        ..full_cfg.clone()
    };
    let full = run(&space, &mut zdt, &full_cfg).unwrap();
    let half = run(&space, &mut zdt, &half_cfg).unwrap();
    assert_eq!(half.history.len(), 50);
    let resumed = resume(half.clone(), &space, &mut zdt, &full_cfg).unwrap();
    assert_eq!(resumed.history.len(), 100);
    assert_eq!(resumed.history[..50], half.history[..]);
    assert_eq!(resumed.history, full.history);
    assert_eq!(resumed.archive, full.archive);
}

#[test]
fn resume_inside_initial_design() {
    let space = SearchSpace::unit_box(3, 0.0, 1.0).unwrap();
    let cfg = RunConfig {
        budget: 30,
        n0: Some(10),
        seed: 5,
        ..Default::default()
    };
    let full = run(&space, &mut zdt, &cfg).unwrap();
    let mut calls = 0;
    let mut dies = |x: &[f64]| {
        calls += 1;
        if calls == 5 {
            Err(EvalError::Fatal("node lost".into()))
        } else {
            zdt(x)
        }
    };
    let err = run(&space, &mut dies, &cfg).unwrap_err();
    let partial = err.partial().unwrap().clone();
    assert_eq!(partial.history.len(), 4);
    let resumed = resume(partial, &space, &mut zdt, &cfg).unwrap();
    assert_eq!(resumed, full);
}

#[test]
fn failures_consume_budget_and_stay_out_of_the_archive() {
    let space = SearchSpace::builtin(Algorithm::Ga);
    let mut inner = BuiltinEvaluator::new(Builtin::MockDocking, space.clone());
    let mut calls = 0;
    let mut flaky = |x: &[f64]| {
        calls += 1;
        if calls % 7 == 0 {
            Err(EvalError::Failed {
                kind: FailureKind::NonFinite,
                message: "NaN energy".into(),
            })
        } else {
            mosrs::Evaluator::evaluate(&mut inner, x)
        }
    };
    let result = run(&space, &mut flaky, &RunConfig::default()).unwrap();
    assert_eq!(calls, 100);
    assert_eq!(result.history.len(), 100);
    assert_eq!(result.failures(), 14);
    for a in result.archive.entries() {
        assert!(result.history[a.eval_index].outcome.objectives().is_some());
    }
}

#[test]
fn mock_docking_run_approaches_its_front() {
    let space = SearchSpace::builtin(Algorithm::Ga);
    let mut eval = BuiltinEvaluator::new(Builtin::MockDocking, space.clone());
    let result = run(
        &space,
        &mut eval,
        &RunConfig {
            seed: 2,
            ..Default::default()
        },
    )
    .unwrap();
    // lower envelope of the closed form: every point is bounded below by it
    for a in result.archive.entries() {
        let u = space.normalize(&result.history[a.eval_index].native).unwrap();
        let ideal = mock_docking(&[u[0], 0.3, 0.3, 0.3, 0.3]);
        assert!(a.objectives.f1 >= ideal.f1 - 1e-12);
    }
    assert!(result.archive.len() >= 3);
}
