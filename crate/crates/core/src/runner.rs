//! End-to-end experiment execution: compose prompts, call the gateway,
//! extract and aggregate answers, grade against golds, and account cost.
//!
//! Items are processed in dataset order with results merged by index, so a
//! concurrent run produces the same log bytes as a sequential one.

use crate::aggregate::{
    majority_vote, plan_majority, select_verified, AggregationResult, Ballot, Vote,
};
use crate::compose::{compose_prompts, ComposeError, ComposedPrompt, PromptMode};
use crate::discovery::extract_for_kind;
use crate::extract::{split_segments, AnswerKind, ExtractedAnswer};
use crate::gateway::{
    compute_cost, Gateway, GatewayError, GenerationRequest, Message, PriceTable, TokenUsage, Usd,
};
use crate::strategy::{AugmentedExample, FewShotExample, StrategyBundle, StrategyPair};
use crate::task::{TaskId, TaskItem};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use thiserror::Error;

/// Everything one experiment run needs beyond the dataset and bundle.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub task: TaskId,
    pub mode: PromptMode,
    pub model_id: String,
    pub prices: PriceTable,
    /// Sample count for self-consistency runs, in [1, 10].
    pub sc_samples: u32,
    /// Pairs taken from the top of the bundle; defaults to the task's size.
    pub ensemble_size: Option<usize>,
    pub item_limit: Option<usize>,
    pub concurrency: usize,
    pub seed: u64,
    /// Include (augmented) few-shot material in ensemble and SC prompts.
    pub few_shot: bool,
}

impl RunConfig {
    pub fn new(task: TaskId, mode: PromptMode, model_id: impl Into<String>) -> RunConfig {
        RunConfig {
            task,
            mode,
            model_id: model_id.into(),
            prices: PriceTable::gpt35_turbo(),
            sc_samples: 3,
            ensemble_size: None,
            item_limit: None,
            concurrency: 1,
            seed: 0,
            few_shot: false,
        }
    }

    fn validate(&self) -> Result<(), RunError> {
        if self.mode == PromptMode::Sc && !(1..=10).contains(&self.sc_samples) {
            return Err(RunError::Config(format!(
                "self-consistency sample count must be in [1, 10], got {}",
                self.sc_samples
            )));
        }
        if self.concurrency == 0 {
            return Err(RunError::Config("concurrency must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(
        "mode {mode:?} needs a strategy bundle with pairs; \
         run the discover/select steps first or point the config at one"
    )]
    MissingBundle { mode: PromptMode },
    #[error("item {item}: {source}")]
    Compose {
        item: String,
        #[source]
        source: ComposeError,
    },
    #[error("item {item}: backend failure: {source}")]
    Backend {
        item: String,
        #[source]
        source: GatewayError,
    },
}

/// One question's full run record; serialized as one JSON line per trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub item_id: String,
    pub mode: PromptMode,
    pub prompts: Vec<String>,
    pub completions: Vec<String>,
    pub votes: Vec<VoteRecord>,
    pub answer: Option<String>,
    pub tally: BTreeMap<String, usize>,
    pub tie: bool,
    pub gold: String,
    pub correct: bool,
    pub usage: TokenUsage,
    /// Usage of each completion in order, so re-aggregation stays exact.
    pub per_completion_usage: Vec<TokenUsage>,
    pub cost: Usd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoteRecord {
    pub pair_index: usize,
    pub answer: Option<String>,
    pub correct: bool,
}

/// Aggregate numbers for one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub task: TaskId,
    pub mode: PromptMode,
    pub model_id: String,
    pub ensemble_size: usize,
    pub n_items: usize,
    pub n_correct: usize,
    pub accuracy: f64,
    pub total_cost: Usd,
    /// Solo accuracy of each vote position (abstentions count as wrong).
    pub per_pair_accuracy: Vec<f64>,
    /// The item limit cut the dataset short.
    pub truncated: bool,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub trials: Vec<TrialRecord>,
    pub summary: Summary,
}

/// Render trials as deterministic JSON lines.
pub fn render_run_log(trials: &[TrialRecord]) -> String {
    let mut out = String::new();
    for trial in trials {
        out.push_str(&serde_json::to_string(trial).expect("trial records serialize"));
        out.push('\n');
    }
    out
}

/// Execute a full experiment over `items`.
pub fn run(
    config: &RunConfig,
    items: &[TaskItem],
    bundle: Option<&StrategyBundle>,
    gateway: &dyn Gateway,
) -> Result<RunOutput, RunError> {
    config.validate()?;
    let materials = Materials::prepare(config, bundle)?;
    let limit = config.item_limit.unwrap_or(items.len()).min(items.len());
    let slice = &items[..limit];

    let trials = parallel_map(config.concurrency, slice, |item| {
        run_item(config, &materials, item, gateway)
    })?;
    let summary = summarize(config, &materials, &trials, limit < items.len());
    Ok(RunOutput { trials, summary })
}

/// Pairs, augmented material, and shots resolved for a run.
struct Materials {
    pairs: Vec<StrategyPair>,
    augmented: Vec<AugmentedExample>,
    shots: Vec<FewShotExample>,
}

impl Materials {
    fn prepare(config: &RunConfig, bundle: Option<&StrategyBundle>) -> Result<Materials, RunError> {
        let spec = config.task.spec();
        let needs_bundle = config.mode.needs_pairs()
            || config.mode == PromptMode::CotFs
            || (config.few_shot && config.mode == PromptMode::Sc);
        let bundle = match bundle {
            Some(b) => b,
            None if needs_bundle => return Err(RunError::MissingBundle { mode: config.mode }),
            None => {
                return Ok(Materials {
                    pairs: vec![],
                    augmented: vec![],
                    shots: vec![],
                })
            }
        };
        let mut pairs = Vec::new();
        if config.mode.needs_pairs() {
            let size = config.ensemble_size.unwrap_or(spec.default_ensemble_size);
            if size == 0 || size > bundle.pairs.len() {
                return Err(RunError::Config(format!(
                    "ensemble size {size} outside [1, {}] supported by the bundle",
                    bundle.pairs.len()
                )));
            }
            pairs = bundle.pairs[..size].to_vec();
        }
        let augmented = if config.few_shot {
            bundle
                .augmented
                .iter()
                .filter(|a| a.pair_index < pairs.len())
                .cloned()
                .collect()
        } else {
            Vec::new()
        };
        let shots = if config.few_shot || config.mode == PromptMode::CotFs {
            bundle.shots.clone()
        } else {
            Vec::new()
        };
        Ok(Materials {
            pairs,
            augmented,
            shots,
        })
    }
}

/// Bounded-concurrency map that preserves input order.
fn parallel_map<T: Sync, R: Send>(
    workers: usize,
    inputs: &[T],
    f: impl Fn(&T) -> Result<R, RunError> + Sync,
) -> Result<Vec<R>, RunError> {
    if workers <= 1 || inputs.len() <= 1 {
        return inputs.iter().map(&f).collect();
    }
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<Result<R, RunError>>>> =
        Mutex::new((0..inputs.len()).map(|_| None).collect());
    std::thread::scope(|scope| {
        for _ in 0..workers.min(inputs.len()) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= inputs.len() {
                    break;
                }
                let result = f(&inputs[i]);
                slots.lock().expect("result slots")[i] = Some(result);
            });
        }
    });
    slots
        .into_inner()
        .expect("result slots")
        .into_iter()
        .map(|slot| slot.expect("every slot filled"))
        .collect()
}

fn run_item(
    config: &RunConfig,
    materials: &Materials,
    item: &TaskItem,
    gateway: &dyn Gateway,
) -> Result<TrialRecord, RunError> {
    let spec = config.task.spec();
    let prompts = compose_prompts(
        &materials.pairs,
        &materials.augmented,
        &materials.shots,
        item,
        config.mode,
        &spec,
    )
    .map_err(|source| RunError::Compose {
        item: item.id.clone(),
        source,
    })?;

    let mut completions = Vec::new();
    for prompt in &prompts {
        let req = match config.mode {
            PromptMode::Sc => GenerationRequest::sampled(
                &config.model_id,
                vec![Message::user(prompt.body.clone())],
                config.sc_samples,
            ),
            _ => GenerationRequest::greedy(
                &config.model_id,
                vec![Message::user(prompt.body.clone())],
            ),
        };
        let mut out = gateway.complete(&req).map_err(|source| RunError::Backend {
            item: item.id.clone(),
            source,
        })?;
        completions.append(&mut out);
    }

    let votes = collect_votes(config.mode, &prompts, &completions, spec.answer_kind, item);
    let aggregation = aggregate_for_task(spec.answer_kind, &votes, item);
    Ok(build_trial(
        config,
        item,
        &prompts,
        &completions,
        votes,
        aggregation,
    ))
}

/// Extract one vote per approach/sample from the completions.
fn collect_votes(
    mode: PromptMode,
    prompts: &[ComposedPrompt],
    completions: &[crate::gateway::Completion],
    kind: AnswerKind,
    item: &TaskItem,
) -> Vec<Vote> {
    match mode {
        PromptMode::IdivSe => {
            let expected = prompts[0].expected_segments;
            let mut votes: Vec<Vote> = (0..expected).map(|i| Vote::new(i, None)).collect();
            if let Some(completion) = completions.first() {
                if let Ok(segments) = split_segments(&completion.text, &prompts[0]) {
                    for segment in segments {
                        votes[segment.pair_index].answer =
                            extract_for_kind(&segment.body, kind, item);
                    }
                }
            }
            votes
        }
        _ => completions
            .iter()
            .enumerate()
            .map(|(i, c)| Vote::new(i, extract_for_kind(&c.text, kind, item)))
            .collect(),
    }
}

/// Aggregate a ballot under the task's rule.
fn aggregate_for_task(kind: AnswerKind, votes: &[Vote], item: &TaskItem) -> AggregationResult {
    let ballot = Ballot::new(votes.to_vec());
    match kind {
        AnswerKind::Choice | AnswerKind::Numeric => {
            majority_vote(&ballot).expect("runner ballots are nonempty")
        }
        AnswerKind::Plan => plan_majority(&ballot).expect("runner plan ballots are nonempty"),
        AnswerKind::Coloring => {
            let crate::task::ItemBody::Coloring(graph) = &item.body else {
                unreachable!("coloring answer kind implies a coloring item")
            };
            let candidates: Vec<(usize, crate::coloring::Coloring)> = votes
                .iter()
                .filter_map(|v| match &v.answer {
                    Some(ExtractedAnswer::Coloring(c)) => Some((v.pair_index, c.clone())),
                    _ => None,
                })
                .collect();
            select_verified(&candidates, graph)
        }
    }
}

fn build_trial(
    config: &RunConfig,
    item: &TaskItem,
    prompts: &[ComposedPrompt],
    completions: &[crate::gateway::Completion],
    votes: Vec<Vote>,
    aggregation: AggregationResult,
) -> TrialRecord {
    let mut usage = TokenUsage::default();
    let mut cost = Usd::ZERO;
    for completion in completions {
        usage.add(completion.usage);
        cost = cost.checked_add(compute_cost(completion.usage, &config.prices));
    }
    let correct = aggregation
        .winner
        .as_ref()
        .map(|w| item.grade(w))
        .unwrap_or(false);
    TrialRecord {
        item_id: item.id.clone(),
        mode: config.mode,
        prompts: prompts.iter().map(|p| p.body.clone()).collect(),
        completions: completions.iter().map(|c| c.text.clone()).collect(),
        votes: votes
            .iter()
            .map(|v| VoteRecord {
                pair_index: v.pair_index,
                answer: v.answer.as_ref().map(|a| a.canonical_key()),
                correct: v.answer.as_ref().map(|a| item.grade(a)).unwrap_or(false),
            })
            .collect(),
        answer: aggregation.winner.as_ref().map(|w| w.canonical_key()),
        tally: aggregation.tally,
        tie: aggregation.tie,
        gold: item.gold.display(),
        correct,
        usage,
        per_completion_usage: completions.iter().map(|c| c.usage).collect(),
        cost,
    }
}

fn summarize(
    config: &RunConfig,
    materials: &Materials,
    trials: &[TrialRecord],
    truncated: bool,
) -> Summary {
    let n_items = trials.len();
    let n_correct = trials.iter().filter(|t| t.correct).count();
    let total_cost: Usd = trials.iter().map(|t| t.cost).sum();
    let positions = trials.iter().map(|t| t.votes.len()).max().unwrap_or(0);
    let per_pair_accuracy = (0..positions)
        .map(|k| {
            let correct = trials
                .iter()
                .filter(|t| t.votes.iter().any(|v| v.pair_index == k && v.correct))
                .count();
            if n_items == 0 {
                0.0
            } else {
                correct as f64 / n_items as f64
            }
        })
        .collect();
    Summary {
        task: config.task,
        mode: config.mode,
        model_id: config.model_id.clone(),
        ensemble_size: if config.mode.needs_pairs() {
            materials.pairs.len()
        } else {
            0
        },
        n_items,
        n_correct,
        accuracy: if n_items == 0 {
            0.0
        } else {
            n_correct as f64 / n_items as f64
        },
        total_cost,
        per_pair_accuracy,
        truncated,
    }
}

/// Run the multi-call ensemble once at the largest requested size, then
/// re-aggregate stored per-pair votes for each prefix size. No completion is
/// requested twice.
pub fn ensemble_size_sweep(
    config: &RunConfig,
    items: &[TaskItem],
    bundle: Option<&StrategyBundle>,
    gateway: &dyn Gateway,
    sizes: &[usize],
) -> Result<Vec<Summary>, RunError> {
    if config.mode != PromptMode::DivSe {
        return Err(RunError::Config(
            "ensemble size sweeps reuse per-pair completions and are defined for the \
             multi-call ensemble mode only"
                .into(),
        ));
    }
    if sizes.is_empty() {
        return Err(RunError::Config("no sweep sizes given".into()));
    }
    let max_size = *sizes.iter().max().expect("nonempty sizes");
    let available = bundle.map(|b| b.pairs.len()).unwrap_or(0);
    if sizes.contains(&0) || max_size > available {
        return Err(RunError::Config(format!(
            "sweep sizes must lie in [1, {available}], got {sizes:?}"
        )));
    }

    let mut full_config = config.clone();
    full_config.ensemble_size = Some(max_size);
    let full = run(&full_config, items, bundle, gateway)?;

    let mut summaries = Vec::with_capacity(sizes.len());
    for &size in sizes {
        let trials: Vec<TrialRecord> = full
            .trials
            .iter()
            .enumerate()
            .map(|(idx, trial)| reaggregate_prefix(&full_config, &items[idx], trial, size))
            .collect();
        let mut cfg = config.clone();
        cfg.ensemble_size = Some(size);
        let materials = Materials::prepare(&cfg, bundle)?;
        summaries.push(summarize(&cfg, &materials, &trials, full.summary.truncated));
    }
    Ok(summaries)
}

/// Rebuild a trial considering only the first `size` pairs' completions.
fn reaggregate_prefix(
    config: &RunConfig,
    item: &TaskItem,
    trial: &TrialRecord,
    size: usize,
) -> TrialRecord {
    let spec = config.task.spec();
    let kind = spec.answer_kind;
    // Reparse votes from the stored completions so plans and colorings
    // aggregate exactly as in the original run.
    let votes: Vec<Vote> = trial
        .completions
        .iter()
        .take(size)
        .enumerate()
        .map(|(i, text)| Vote::new(i, extract_for_kind(text, kind, item)))
        .collect();
    let aggregation = aggregate_for_task(kind, &votes, item);
    let mut usage = TokenUsage::default();
    let mut cost = Usd::ZERO;
    for u in trial.per_completion_usage.iter().take(size) {
        usage.add(*u);
        cost = cost.checked_add(compute_cost(*u, &config.prices));
    }
    let correct = aggregation
        .winner
        .as_ref()
        .map(|w| item.grade(w))
        .unwrap_or(false);
    TrialRecord {
        item_id: trial.item_id.clone(),
        mode: trial.mode,
        prompts: trial.prompts.iter().take(size).cloned().collect(),
        completions: trial.completions.iter().take(size).cloned().collect(),
        votes: votes
            .iter()
            .map(|v| VoteRecord {
                pair_index: v.pair_index,
                answer: v.answer.as_ref().map(|a| a.canonical_key()),
                correct: v.answer.as_ref().map(|a| item.grade(a)).unwrap_or(false),
            })
            .collect(),
        answer: aggregation.winner.as_ref().map(|w| w.canonical_key()),
        tally: aggregation.tally,
        tie: aggregation.tie,
        gold: trial.gold.clone(),
        correct,
        usage,
        per_completion_usage: trial
            .per_completion_usage
            .iter()
            .take(size)
            .copied()
            .collect(),
        cost,
    }
}

/// Per-item outcome of the error-propagation protocol.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropagationItem {
    pub item_id: String,
    pub original_answer: String,
    /// (pair index, reproduced within budget, attempts issued)
    pub reruns: Vec<(usize, bool, u32)>,
    pub propagated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropagationReport {
    pub qualifying: Vec<PropagationItem>,
    pub n_qualifying: usize,
    pub n_propagated: usize,
    /// Undefined (None) when no item qualifies.
    pub rate: Option<f64>,
}

const PROPAGATION_ATTEMPTS: u32 = 3;

/// Error-propagation study over one-call ensemble records: select items where
/// the aggregate was wrong and every approach gave the same wrong answer,
/// rerun the last two approaches standalone in fresh sessions, and label the
/// item propagated unless both reproduce the original answer within three
/// attempts.
pub fn error_propagation_study(
    config: &RunConfig,
    records: &[TrialRecord],
    items: &[TaskItem],
    bundle: &StrategyBundle,
    gateway: &dyn Gateway,
) -> Result<PropagationReport, RunError> {
    let spec = config.task.spec();
    let n_pairs = records.iter().map(|r| r.votes.len()).max().unwrap_or(0);
    if n_pairs < 5 {
        return Err(RunError::Config(format!(
            "the propagation protocol needs records from a one-call ensemble of at least 5 \
             approaches, found {n_pairs}"
        )));
    }
    let materials = Materials::prepare(
        &RunConfig {
            mode: PromptMode::DivSe,
            ensemble_size: Some(n_pairs),
            ..config.clone()
        },
        Some(bundle),
    )?;

    let mut qualifying = Vec::new();
    for record in records {
        if record.correct {
            continue;
        }
        let keys: Vec<&String> = record
            .votes
            .iter()
            .filter_map(|v| v.answer.as_ref())
            .collect();
        if keys.len() != record.votes.len() || record.votes.len() < 5 {
            continue; // an abstention breaks unanimity
        }
        let first = keys[0];
        if !keys.iter().all(|k| *k == first) {
            continue;
        }
        let Some(item) = items.iter().find(|i| i.id == record.item_id) else {
            continue;
        };

        let original = first.clone();
        let mut reruns = Vec::new();
        for offset in [n_pairs - 2, n_pairs - 1] {
            let pair = &materials.pairs[offset];
            let prompts = compose_prompts(
                std::slice::from_ref(pair),
                &materials.augmented_for_offset(offset),
                &materials.shots,
                item,
                PromptMode::DivSe,
                &spec,
            )
            .map_err(|source| RunError::Compose {
                item: item.id.clone(),
                source,
            })?;
            let mut reproduced = false;
            let mut attempts = 0;
            for attempt in 1..=PROPAGATION_ATTEMPTS {
                attempts = attempt;
                let req = GenerationRequest::greedy(
                    &config.model_id,
                    vec![Message::user(prompts[0].body.clone())],
                )
                .with_session(format!(
                    "propagation-{}-pair{}-attempt-{}",
                    item.id, offset, attempt
                ));
                let completions = gateway.complete(&req).map_err(|source| RunError::Backend {
                    item: item.id.clone(),
                    source,
                })?;
                let answer = extract_for_kind(&completions[0].text, spec.answer_kind, item);
                if answer.map(|a| a.canonical_key()).as_deref() == Some(original.as_str()) {
                    reproduced = true;
                    break;
                }
            }
            reruns.push((offset, reproduced, attempts));
        }
        let propagated = !reruns.iter().all(|(_, reproduced, _)| *reproduced);
        qualifying.push(PropagationItem {
            item_id: record.item_id.clone(),
            original_answer: original,
            reruns,
            propagated,
        });
    }

    let n_qualifying = qualifying.len();
    let n_propagated = qualifying.iter().filter(|q| q.propagated).count();
    let rate = if n_qualifying == 0 {
        None
    } else {
        Some(n_propagated as f64 / n_qualifying as f64)
    };
    Ok(PropagationReport {
        qualifying,
        n_qualifying,
        n_propagated,
        rate,
    })
}

impl Materials {
    /// Augmented material for a single-pair rerun, reindexed to pair 0.
    fn augmented_for_offset(&self, offset: usize) -> Vec<AugmentedExample> {
        self.augmented
            .iter()
            .filter(|a| a.pair_index == offset)
            .map(|a| AugmentedExample {
                pair_index: 0,
                ..a.clone()
            })
            .collect()
    }
}
