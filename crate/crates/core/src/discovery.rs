//! Strategy discovery pipeline: solicit candidate approaches from the model,
//! ask it for task personas, score every (persona, approach) pairing on a
//! small validation slice, and restyle few-shot exemplars per pair.

use crate::compose::{compose_prompts, PromptMode};
use crate::extract::{
    extract_choice, extract_numeric, parse_rational, AnswerKind, ExtractedAnswer,
};
use crate::gateway::{Gateway, GatewayError, GenerationRequest, Message};
use crate::strategy::{
    normalize_name, Approach, ApproachSet, AugmentedExample, DiscoveryConfig, FewShotExample,
    Persona, PersonaSet, StrategyPair,
};
use crate::task::{TaskId, TaskItem, TaskSpec};
use once_cell::sync::Lazy;
use rand::Rng;
use regex::Regex;
use std::collections::HashMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DiscoveryError {
    #[error("approaches per call must be within [1, 5], got {0}")]
    BadApproachCount(u32),
    #[error("cannot keep {keep} approaches from {calls} calls of {per_call}")]
    KeepExceedsCandidates {
        keep: usize,
        calls: u32,
        per_call: u32,
    },
    #[error("discovery question must be nonempty")]
    EmptyQuestion,
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("only {found} distinct approaches discovered, needed {needed}")]
    Exhausted {
        found: usize,
        needed: usize,
        partial: ApproachSet,
    },
    #[error(transparent)]
    Gateway(#[from] GatewayError),
}

/// Render the approach-solicitation prompt: the question plus `b` numbered
/// "Approach k" output-format lines.
pub fn build_discovery_prompt(question: &str, b: u32) -> Result<String, DiscoveryError> {
    if !(1..=5).contains(&b) {
        return Err(DiscoveryError::BadApproachCount(b));
    }
    if question.trim().is_empty() {
        return Err(DiscoveryError::EmptyQuestion);
    }
    let count = match b {
        1 => "one",
        2 => "two",
        3 => "three",
        4 => "four",
        _ => "five",
    };
    let mut out = format!(
        "Use {count} distinct approaches to solve the given problem accurately. \
         If there is no exact match choose the closest option.\n\nQ: {question}\n\n\
         Use the following output format:\n"
    );
    for k in 1..=b {
        out.push_str(&format!(
            "\nApproach {k} {{< name of the approach >}} : {{< Details of Approach {k} >}}\n"
        ));
    }
    out.pop();
    Ok(out)
}

static APPROACH_LINE_RE: Lazy<Regex> =
    Lazy::new(|| Regex::new(r"(?m)^\s*Approach\s+\d+\s*(.*)$").unwrap());
static PERSONA_LINE_RE: Lazy<Regex> =
    Lazy::new(|| Regex::new(r"(?m)^\s*Persona\s+\d+\s*(.*)$").unwrap());

/// Pull the template-compliant name out of the remainder of an "Approach k"
/// line: a bracketed name, or the text before the colon.
fn parse_template_name(rest: &str) -> Option<String> {
    let rest = rest.trim().trim_start_matches(':').trim_start();
    let bracketed = rest
        .strip_prefix(['{', '<', '['])
        .map(|r| r.trim_start_matches(['<', '{', '[', ' ']))
        .map(|r| {
            r.split(['}', '>', ']', ':'])
                .next()
                .unwrap_or("")
                .to_string()
        });
    let raw = match bracketed {
        Some(name) => name,
        None => rest.split(':').next().unwrap_or("").to_string(),
    };
    let normalized = normalize_name(&raw);
    if normalized.is_empty() {
        None
    } else {
        Some(normalized)
    }
}

fn compliant_names(text: &str, line_re: &Regex) -> Vec<String> {
    line_re
        .captures_iter(text)
        .filter_map(|cap| parse_template_name(&cap[1]))
        .collect()
}

/// Ask the model for approaches across `config.calls` calls against random
/// dataset questions, then keep the most frequent names. Ties in frequency
/// break by first-seen order.
pub fn extract_approaches(
    items: &[TaskItem],
    config: &DiscoveryConfig,
    gateway: &dyn Gateway,
    model_id: &str,
    rng: &mut impl Rng,
) -> Result<ApproachSet, DiscoveryError> {
    if items.is_empty() {
        return Err(DiscoveryError::EmptyDataset);
    }
    if config.keep_approaches as u64 > config.calls as u64 * config.approaches_per_call as u64 {
        return Err(DiscoveryError::KeepExceedsCandidates {
            keep: config.keep_approaches,
            calls: config.calls,
            per_call: config.approaches_per_call,
        });
    }
    let mut counts: HashMap<String, u32> = HashMap::new();
    let mut first_seen: Vec<String> = Vec::new();
    for _ in 0..config.calls {
        let item = &items[rng.gen_range(0..items.len())];
        let question = item_question(item);
        let prompt = build_discovery_prompt(&question, config.approaches_per_call)?;
        let req = GenerationRequest::greedy(model_id, vec![Message::user(prompt)]);
        let completions = gateway.complete(&req)?;
        for completion in &completions {
            for name in compliant_names(&completion.text, &APPROACH_LINE_RE) {
                let count = counts.entry(name.clone()).or_insert(0);
                if *count == 0 {
                    first_seen.push(name);
                }
                *count += 1;
            }
        }
    }
    // Most frequent first; equal counts keep first-seen order.
    let mut ranked: Vec<(usize, String, u32)> = first_seen
        .iter()
        .enumerate()
        .map(|(i, name)| (i, name.clone(), counts[name]))
        .collect();
    ranked.sort_by(|a, b| b.2.cmp(&a.2).then(a.0.cmp(&b.0)));
    let kept: Vec<Approach> = ranked
        .iter()
        .take(config.keep_approaches)
        .map(|(_, name, freq)| {
            let mut a = Approach::new(name.clone());
            a.frequency = *freq;
            a
        })
        .collect();
    let set = ApproachSet { approaches: kept };
    if set.approaches.len() < config.keep_approaches {
        return Err(DiscoveryError::Exhausted {
            found: set.approaches.len(),
            needed: config.keep_approaches,
            partial: set,
        });
    }
    Ok(set)
}

fn item_question(item: &TaskItem) -> String {
    match &item.body {
        crate::task::ItemBody::Choice { question, options } => {
            let opts = options
                .iter()
                .map(|o| format!("({}) {}", o.label, o.text))
                .collect::<Vec<_>>()
                .join(" ");
            format!("{question}\nAnswer Choices: {opts}")
        }
        crate::task::ItemBody::Numeric { question } => question.clone(),
        crate::task::ItemBody::Plan(inst) => format!(
            "As initial conditions you have that, {}. Your goal is to have that {}.",
            inst.render_initial_conditions(),
            inst.render_goal()
        ),
        crate::task::ItemBody::Coloring(graph) => format!(
            "Color a graph with {} vertices and edges {:?} using at most {} colors.",
            graph.n_vertices,
            graph.edges.iter().take(8).collect::<Vec<_>>(),
            graph.max_colors
        ),
    }
}

fn task_domain(task: TaskId) -> &'static str {
    match task {
        TaskId::Aqua => "algebraic word problems",
        TaskId::Gsm8k => "grade-school math problems",
        TaskId::MathCp => "counting and probability problems",
        TaskId::Csqa => "commonsense multiple-choice questions",
        TaskId::Blocksworld3 | TaskId::Blocksworld45 => "block-stacking planning problems",
        TaskId::GraphColoring => "graph-coloring constraint problems",
    }
}

/// Ask the model directly for task personas. The empty persona is always
/// included, and an uncooperative model still yields a usable singleton set.
pub fn extract_personas(
    task: TaskId,
    config: &DiscoveryConfig,
    gateway: &dyn Gateway,
    model_id: &str,
) -> Result<PersonaSet, DiscoveryError> {
    let mut prompt = format!(
        "Name {m} distinct personas that would excel at solving {domain}. \
         A persona is an identity framing such as \"Thinking like Alan Turing\".\n\n\
         Use the following output format:\n",
        m = config.keep_personas,
        domain = task_domain(task),
    );
    for k in 1..=config.keep_personas {
        prompt.push_str(&format!("\nPersona {k} {{< name of the persona >}}\n"));
    }
    prompt.pop();
    let req = GenerationRequest::greedy(model_id, vec![Message::user(prompt)]);
    let mut personas = vec![Persona::empty()];
    match gateway.complete(&req) {
        Ok(completions) => {
            for completion in &completions {
                for name in compliant_names(&completion.text, &PERSONA_LINE_RE) {
                    if personas.len() > config.keep_personas {
                        break;
                    }
                    let candidate = Persona::new(name);
                    if personas.iter().all(|p| p.id != candidate.id) {
                        personas.push(candidate);
                    }
                }
            }
        }
        // Persona discovery is best-effort: no usable output still leaves
        // the empty persona.
        Err(GatewayError::ScriptMiss) => {}
        Err(other) => return Err(other.into()),
    }
    Ok(PersonaSet { personas })
}

#[derive(Debug, Error)]
pub enum SelectionError {
    #[error("requested {requested} pairs but only {available} candidates exist")]
    TooManyRequested { requested: usize, available: usize },
    #[error("validation slice is empty")]
    EmptyValidation,
}

/// Score every persona x approach candidate on the validation slice with a
/// single-pair prompt per item, then keep the best `size` pairs.
///
/// Backend failures skip the item and mark the pair partial; its accuracy is
/// computed over completed items only. Ties in accuracy break by
/// (persona id, approach id).
pub fn select_pairs(
    personas: &PersonaSet,
    approaches: &ApproachSet,
    validation: &[TaskItem],
    size: usize,
    gateway: &dyn Gateway,
    spec: &TaskSpec,
    model_id: &str,
) -> Result<Vec<StrategyPair>, SelectionError> {
    let available = personas.personas.len() * approaches.approaches.len();
    if size > available {
        return Err(SelectionError::TooManyRequested {
            requested: size,
            available,
        });
    }
    if validation.is_empty() {
        return Err(SelectionError::EmptyValidation);
    }

    let mut scored: Vec<StrategyPair> = Vec::with_capacity(available);
    for persona in &personas.personas {
        for approach in &approaches.approaches {
            let mut pair = StrategyPair::new(persona.clone(), Some(approach.clone()));
            let mut completed = 0usize;
            let mut correct = 0usize;
            for item in validation {
                let prompts = match compose_prompts(
                    std::slice::from_ref(&pair),
                    &[],
                    &[],
                    item,
                    PromptMode::DivSe,
                    spec,
                ) {
                    Ok(p) => p,
                    Err(_) => continue,
                };
                let req = GenerationRequest::greedy(
                    model_id,
                    vec![Message::user(prompts[0].body.clone())],
                );
                match gateway.complete(&req) {
                    Ok(completions) => {
                        completed += 1;
                        if let Some(answer) =
                            extract_for_kind(&completions[0].text, spec.answer_kind, item)
                        {
                            if item.grade(&answer) {
                                correct += 1;
                            }
                        }
                    }
                    Err(_) => pair.partial = true,
                }
            }
            if completed > 0 {
                pair.val_accuracy = Some(correct as f64 / completed as f64);
            } else {
                pair.partial = true;
            }
            scored.push(pair);
        }
    }

    scored.sort_by(|a, b| {
        let acc_a = a.val_accuracy.unwrap_or(-1.0);
        let acc_b = b.val_accuracy.unwrap_or(-1.0);
        acc_b
            .partial_cmp(&acc_a)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| a.persona.id.cmp(&b.persona.id))
            .then_with(|| {
                let empty = String::new();
                let aid = a.approach.as_ref().map(|x| &x.id).unwrap_or(&empty);
                let bid = b.approach.as_ref().map(|x| &x.id).unwrap_or(&empty);
                aid.cmp(bid)
            })
    });
    scored.truncate(size);
    Ok(scored)
}

/// Extract a task answer of the given kind from a completion.
pub fn extract_for_kind(text: &str, kind: AnswerKind, item: &TaskItem) -> Option<ExtractedAnswer> {
    match kind {
        AnswerKind::Choice => extract_choice(text, &item.body.option_labels())
            .ok()
            .map(|e| e.answer),
        AnswerKind::Numeric => extract_numeric(text).ok().map(|e| e.answer),
        AnswerKind::Plan => {
            let region = match text.rfind("[PLAN]") {
                Some(at) => &text[at + "[PLAN]".len()..],
                None => text,
            };
            crate::extract::parse_plan(region)
                .ok()
                .map(ExtractedAnswer::Plan)
        }
        AnswerKind::Coloring => {
            let crate::task::ItemBody::Coloring(graph) = &item.body else {
                return None;
            };
            crate::extract::parse_coloring(text, graph.n_vertices)
                .ok()
                .map(|p| ExtractedAnswer::Coloring(p.assignments))
        }
    }
}

#[derive(Debug, Error)]
pub enum AugmentError {
    #[error("no strategy pairs to augment")]
    NoPairs,
    #[error("no few-shot exemplars to augment")]
    NoShots,
    #[error("augmentation failed for (pair, shot) indices {failing:?} after {retries} retries")]
    Exhausted {
        failing: Vec<(usize, usize)>,
        retries: u32,
    },
    #[error(transparent)]
    Gateway(#[from] GatewayError),
}

/// Re-solve each exemplar in each pair's style. A generation is accepted only
/// when its final line parses under the task grammar and preserves the gold
/// answer; others are retried in fresh sessions up to `retry_budget` times.
pub fn augment_examples(
    pairs: &[StrategyPair],
    shots: &[FewShotExample],
    gateway: &dyn Gateway,
    spec: &TaskSpec,
    model_id: &str,
    retry_budget: u32,
) -> Result<Vec<AugmentedExample>, AugmentError> {
    if pairs.is_empty() {
        return Err(AugmentError::NoPairs);
    }
    if shots.is_empty() {
        return Err(AugmentError::NoShots);
    }
    let mut out = Vec::with_capacity(pairs.len() * shots.len());
    let mut failing = Vec::new();
    for (i, pair) in pairs.iter().enumerate() {
        for (j, shot) in shots.iter().enumerate() {
            let prompt = augmentation_prompt(pair, shot);
            let mut accepted = None;
            for attempt in 0..=retry_budget {
                let mut req =
                    GenerationRequest::greedy(model_id, vec![Message::user(prompt.clone())]);
                if attempt > 0 {
                    req = req.with_session(format!("augment-{i}-{j}-attempt-{attempt}"));
                }
                let completions = gateway.complete(&req)?;
                if let Some(example) = accept_augmentation(&completions[0].text, i, j, shot, spec) {
                    accepted = Some(example);
                    break;
                }
            }
            match accepted {
                Some(example) => out.push(example),
                None => failing.push((i, j)),
            }
        }
    }
    if !failing.is_empty() {
        return Err(AugmentError::Exhausted {
            failing,
            retries: retry_budget,
        });
    }
    Ok(out)
}

fn augmentation_prompt(pair: &StrategyPair, shot: &FewShotExample) -> String {
    let mut out = String::new();
    if !pair.persona.is_empty {
        out.push_str(&pair.persona.description);
        out.push_str(". ");
    }
    match &pair.approach {
        Some(a) => out.push_str(&format!("Solve the problem accurately <{}>.", a.name)),
        None => out.push_str("Solve the problem accurately."),
    }
    out.push_str("\n\n");
    out.push_str(&format!("Question: {}\n", shot.question));
    if !shot.options.is_empty() {
        out.push_str(&format!("Answer Choices: {}\n", shot.render_options()));
    }
    out.push_str(&format!("A: {}\n\n", shot.base_rationale.trim()));
    let descriptor = pair
        .approach
        .as_ref()
        .map(|a| a.name.clone())
        .unwrap_or_else(|| pair.persona.description.clone());
    out.push_str(&format!("Approach <{descriptor}>:"));
    out
}

/// Accept a generation when its final line parses and the answer matches the
/// exemplar's gold answer.
fn accept_augmentation(
    text: &str,
    pair_index: usize,
    shot_index: usize,
    shot: &FewShotExample,
    spec: &TaskSpec,
) -> Option<AugmentedExample> {
    let final_line = text
        .lines()
        .rev()
        .find(|l| !l.trim().is_empty())?
        .trim()
        .to_string();
    let preserved = match spec.answer_kind {
        AnswerKind::Choice => {
            let labels = shot.option_labels();
            let got = extract_choice(&final_line, &labels).ok()?;
            let gold = shot
                .gold_answer
                .chars()
                .find(|c| c.is_ascii_alphanumeric())?
                .to_ascii_uppercase();
            got.answer == ExtractedAnswer::Choice(gold)
        }
        AnswerKind::Numeric => {
            let got = extract_numeric(&final_line).ok()?;
            let gold = parse_rational(shot.gold_answer.trim())?;
            got.answer == ExtractedAnswer::Numeric(gold)
        }
        // augmentation applies to the few-shot tasks only
        AnswerKind::Plan | AnswerKind::Coloring => return None,
    };
    if !preserved {
        return None;
    }
    let rationale: String = {
        let end = text.rfind(&final_line).unwrap_or(text.len());
        text[..end].trim_end().to_string()
    };
    if rationale.is_empty() {
        return None;
    }
    Some(AugmentedExample {
        pair_index,
        shot_index,
        rationale,
        final_line,
    })
}
