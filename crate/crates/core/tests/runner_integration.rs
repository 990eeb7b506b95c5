//! End-to-end runner behavior against scripted and replayed backends.

mod common;

use common::{fixtures_dir, load_aqua_fixture, FixtureGateway};
use divse_core::blocksworld::{oracle_bfs_plan, plan_to_string};
use divse_core::compose::{compose_prompts, PromptMode};
use divse_core::gateway::{
    compute_cost, PriceTable, ReplayGateway, ScriptedGateway, TokenUsage, TranscriptStore, Usd,
};
use divse_core::runner::{ensemble_size_sweep, render_run_log, run, RunConfig, RunError};
use divse_core::strategy::{Approach, Persona, StrategyBundle, StrategyPair};
use divse_core::task::{load_dataset, Gold, ItemBody, TaskId, TaskItem};

fn choice_items(golds: &[char]) -> Vec<TaskItem> {
    golds
        .iter()
        .enumerate()
        .map(|(i, gold)| TaskItem {
            id: format!("q{i}"),
            body: ItemBody::Choice {
                question: format!("scripted question number {i}"),
                options: vec![
                    divse_core::strategy::LabeledOption {
                        label: 'A',
                        text: "first".into(),
                    },
                    divse_core::strategy::LabeledOption {
                        label: 'B',
                        text: "second".into(),
                    },
                ],
            },
            gold: Gold::Choice(*gold),
        })
        .collect()
}

fn three_pair_bundle() -> StrategyBundle {
    let mut bundle = StrategyBundle::new("aqua");
    for name in ["alpha counting", "beta counting", "gamma counting"] {
        let approach = Approach::new(name);
        bundle.approaches.approaches.push(approach.clone());
        bundle
            .pairs
            .push(StrategyPair::new(Persona::empty(), Some(approach)));
    }
    bundle
}

#[test]
fn sc_with_one_sample_issues_the_cot_prompt() {
    let items = choice_items(&['A']);
    let gateway = ScriptedGateway::respond_with("The answer is: (A) first");

    let mut sc = RunConfig::new(TaskId::Aqua, PromptMode::Sc, "m");
    sc.sc_samples = 1;
    let sc_out = run(&sc, &items, None, &gateway).unwrap();

    let cot = RunConfig::new(TaskId::Aqua, PromptMode::CotZs, "m");
    let cot_out = run(&cot, &items, None, &gateway).unwrap();

    assert_eq!(sc_out.trials[0].prompts, cot_out.trials[0].prompts);
    assert_eq!(sc_out.trials[0].completions.len(), 1);

    let mut sc10 = sc;
    sc10.sc_samples = 10;
    let out = run(&sc10, &items, None, &gateway).unwrap();
    assert_eq!(out.trials[0].completions.len(), 10);
    assert_eq!(out.trials[0].votes.len(), 10);
}

#[test]
fn sc_sample_count_is_bounded() {
    let mut config = RunConfig::new(TaskId::Aqua, PromptMode::Sc, "m");
    config.sc_samples = 11;
    let gateway = ScriptedGateway::respond_with("x");
    match run(&config, &choice_items(&['A']), None, &gateway) {
        Err(RunError::Config(msg)) => assert!(msg.contains("[1, 10]")),
        other => panic!("expected config error, got {other:?}"),
    }
}

#[test]
fn ensemble_run_without_bundle_names_the_missing_artifact() {
    let config = RunConfig::new(TaskId::Aqua, PromptMode::DivSe, "m");
    let gateway = ScriptedGateway::respond_with("x");
    match run(&config, &choice_items(&['A']), None, &gateway) {
        Err(e @ RunError::MissingBundle { .. }) => {
            assert!(e.to_string().contains("strategy bundle"));
        }
        other => panic!("expected missing-bundle error, got {other:?}"),
    }
}

/// Hand-tabulated sweep over a three-pair bundle and four items, gold A:
///   votes per item (pair 1, 2, 3):
///     q0: A B A    q1: B A B    q2: A B B    q3: A A A
/// Majority outcomes by prefix size:
///   size 1: correct on q0, q2, q3            -> 3/4
///   size 2: ties go to pair 1's vote         -> 3/4
///   size 3: correct on q0, q3 (B wins q1, q2) -> 2/4
#[test]
fn ensemble_size_sweep_matches_hand_tabulated_majorities() {
    let items = choice_items(&['A', 'A', 'A', 'A']);
    let votes = [
        ["A", "B", "A"],
        ["B", "A", "B"],
        ["A", "B", "B"],
        ["A", "A", "A"],
    ];
    let markers = ["<alpha counting>", "<beta counting>", "<gamma counting>"];
    let mut gateway = FixtureGateway::default();
    for (i, row) in votes.iter().enumerate() {
        for (marker, vote) in markers.iter().zip(row) {
            gateway.push(
                vec![format!("scripted question number {i}"), (*marker).into()],
                vec![format!("The answer is: ({vote})")],
                TokenUsage::new(40, 10),
            );
        }
    }

    let mut config = RunConfig::new(TaskId::Aqua, PromptMode::DivSe, "m");
    config.prices = PriceTable::gpt4();
    let bundle = three_pair_bundle();
    let summaries =
        ensemble_size_sweep(&config, &items, Some(&bundle), &gateway, &[1, 2, 3]).unwrap();
    let accuracies: Vec<f64> = summaries.iter().map(|s| s.accuracy).collect();
    assert_eq!(accuracies, vec![0.75, 0.75, 0.5]);

    // size 1 is exactly the best single pair's run
    assert_eq!(summaries[0].per_pair_accuracy, vec![0.75]);

    // sweep at the full size equals the full run summary
    let mut full_config = config.clone();
    full_config.ensemble_size = Some(3);
    let full = run(&full_config, &items, Some(&bundle), &gateway).unwrap();
    assert_eq!(summaries[2], full.summary);

    // 2 sizes on a 3-pair bundle -> 2 summaries
    let two = ensemble_size_sweep(&config, &items, Some(&bundle), &gateway, &[1, 3]).unwrap();
    assert_eq!(two.len(), 2);

    // size beyond the bundle is a configuration error
    assert!(matches!(
        ensemble_size_sweep(&config, &items, Some(&bundle), &gateway, &[4]),
        Err(RunError::Config(_))
    ));
    // sweeps are defined for the multi-call mode only
    let mut idiv = config.clone();
    idiv.mode = PromptMode::IdivSe;
    assert!(matches!(
        ensemble_size_sweep(&idiv, &items, Some(&bundle), &gateway, &[2]),
        Err(RunError::Config(_))
    ));
}

#[test]
fn one_call_blocksworld_trial_majority_votes_canonical_plans() {
    let items = load_dataset(
        TaskId::Blocksworld3,
        fixtures_dir().join("blocksworld/bw3.json"),
    )
    .unwrap();
    let bundle = StrategyBundle::load(fixtures_dir().join("blocksworld/bundle.json")).unwrap();
    let item = &items[0];
    let ItemBody::Plan(inst) = &item.body else {
        panic!("plan item")
    };
    let oracle = oracle_bfs_plan(&inst.initial_state().unwrap(), &inst.goal().unwrap()).unwrap();
    let oracle_lines = oracle
        .iter()
        .map(|a| a.to_tuple())
        .collect::<Vec<_>>()
        .join("\n");

    // Two of three segments carry the oracle plan; the second segment's plan
    // is legal but misses the goal.
    let reply = format!(
        "Approach 1 <progressive block placement> :\n{oracle_lines}\n\
         Approach 2 <action rationale> :\n(unstack orange blue)\n(put-down orange)\n\
         Approach 3 <finite state machine> :\n{oracle_lines}"
    );
    let mut gateway = FixtureGateway::default();
    gateway.push(
        vec!["[PLAN]".into()],
        vec![reply],
        TokenUsage::new(500, 120),
    );

    let config = RunConfig::new(TaskId::Blocksworld3, PromptMode::IdivSe, "m");
    let output = run(&config, &items[..1], Some(&bundle), &gateway).unwrap();
    let trial = &output.trials[0];
    assert_eq!(
        trial.answer.as_deref(),
        Some(plan_to_string(&oracle).as_str())
    );
    assert!(trial.correct, "majority plan is validated against the goal");
    assert_eq!(trial.tally.len(), 2);
}

#[test]
fn replay_run_is_cost_consistent_and_concurrency_invariant() {
    let (items, bundle, _) = load_aqua_fixture();
    let store = TranscriptStore::open(fixtures_dir().join("aqua_mini/transcripts")).unwrap();
    let gateway = ReplayGateway::new(store);

    let mut config = RunConfig::new(TaskId::Aqua, PromptMode::DivSe, "gpt-4");
    config.prices = PriceTable::gpt4();
    config.ensemble_size = Some(5);
    config.few_shot = true;
    let sequential = run(&config, &items, Some(&bundle), &gateway).unwrap();

    // total cost = sum of trial costs = sum over completion usages
    let trial_sum: Usd = sequential.trials.iter().map(|t| t.cost).sum();
    assert_eq!(sequential.summary.total_cost, trial_sum);
    for trial in &sequential.trials {
        let from_usages: Usd = trial
            .per_completion_usage
            .iter()
            .map(|u| compute_cost(*u, &config.prices))
            .sum();
        assert_eq!(trial.cost, from_usages);
    }

    // a concurrent run produces byte-identical logs
    let mut parallel_config = config.clone();
    parallel_config.concurrency = 4;
    let parallel = run(&parallel_config, &items, Some(&bundle), &gateway).unwrap();
    assert_eq!(
        render_run_log(&sequential.trials),
        render_run_log(&parallel.trials)
    );

    // item limits truncate and say so
    let mut limited = config.clone();
    limited.item_limit = Some(2);
    let out = run(&limited, &items, Some(&bundle), &gateway).unwrap();
    assert_eq!(out.summary.n_items, 2);
    assert!(out.summary.truncated);
    assert!(!sequential.summary.truncated);
}

#[test]
fn replay_miss_surfaces_the_request_key() {
    let (items, bundle, _) = load_aqua_fixture();
    let dir = tempfile::tempdir().unwrap();
    let gateway = ReplayGateway::new(TranscriptStore::open(dir.path()).unwrap());
    let mut config = RunConfig::new(TaskId::Aqua, PromptMode::DivSe, "gpt-4");
    config.ensemble_size = Some(5);
    config.few_shot = true;
    match run(&config, &items, Some(&bundle), &gateway) {
        Err(RunError::Backend { source, .. }) => {
            assert!(source.to_string().contains("no transcript entry"));
        }
        other => panic!("expected replay miss, got {other:?}"),
    }
}

#[test]
fn verified_selection_gates_coloring_trials() {
    let items = load_dataset(
        TaskId::GraphColoring,
        fixtures_dir().join("graph_coloring/graphs.json"),
    )
    .unwrap();
    let bundle = StrategyBundle::load(fixtures_dir().join("graph_coloring/bundle.json")).unwrap();
    // triangle with 3 colors: first segment invalid (monochrome edge),
    // second valid, third missing
    let item = items[1].clone();
    let reply = "Approach 1 <greedy vertex ordering> :\n0: Color 1\n1: Color 1\n2: Color 2\n\
                 Approach 2 <backtracking search> :\n0: Color 1\n1: Color 2\n2: Color 3";
    let mut gateway = FixtureGateway::default();
    gateway.push(
        vec!["at most 3 colors".into()],
        vec![reply.into()],
        TokenUsage::new(90, 40),
    );

    let config = RunConfig::new(TaskId::GraphColoring, PromptMode::IdivSe, "m");
    let output = run(&config, &[item], Some(&bundle), &gateway).unwrap();
    let trial = &output.trials[0];
    assert!(trial.correct);
    assert_eq!(trial.answer.as_deref(), Some("0:1 1:2 2:3"));
}

#[test]
fn compose_prompts_are_identical_across_runs() {
    // Replay determinism at the prompt level: two compositions of the same
    // inputs are byte-identical.
    let (items, bundle, _) = load_aqua_fixture();
    let spec = TaskId::Aqua.spec();
    let a = compose_prompts(
        &bundle.pairs,
        &bundle.augmented,
        &bundle.shots,
        &items[0],
        PromptMode::IdivSe,
        &spec,
    )
    .unwrap();
    let b = compose_prompts(
        &bundle.pairs,
        &bundle.augmented,
        &bundle.shots,
        &items[0],
        PromptMode::IdivSe,
        &spec,
    )
    .unwrap();
    assert_eq!(a, b);
}
