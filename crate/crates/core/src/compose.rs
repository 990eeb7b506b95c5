//! Prompt composition: renders the final prompt bodies for every prompting
//! mode from a set of strategy pairs and augmented few-shot material.
//!
//! The one-call ensemble mode produces a single prompt with one "Approach"
//! section per pair, in rank order; the multi-call mode produces one prompt
//! per pair. Composition is pure: the same inputs always render the same
//! bytes.

use crate::strategy::{AugmentedExample, FewShotExample, StrategyPair};
use crate::task::{ItemBody, TaskItem, TaskSpec};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Prompting mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptMode {
    CotZs,
    CotFs,
    Sc,
    DivSe,
    IdivSe,
}

impl PromptMode {
    pub fn as_str(self) -> &'static str {
        match self {
            PromptMode::CotZs => "cot_zs",
            PromptMode::CotFs => "cot_fs",
            PromptMode::Sc => "sc",
            PromptMode::DivSe => "div_se",
            PromptMode::IdivSe => "idiv_se",
        }
    }

    /// Modes that consume strategy pairs.
    pub fn needs_pairs(self) -> bool {
        matches!(self, PromptMode::DivSe | PromptMode::IdivSe)
    }
}

impl std::str::FromStr for PromptMode {
    type Err = String;

    fn from_str(s: &str) -> Result<PromptMode, String> {
        match s {
            "cot_zs" => Ok(PromptMode::CotZs),
            "cot_fs" => Ok(PromptMode::CotFs),
            "sc" => Ok(PromptMode::Sc),
            "div_se" => Ok(PromptMode::DivSe),
            "idiv_se" => Ok(PromptMode::IdivSe),
            other => Err(format!("unknown prompt mode {other:?}")),
        }
    }
}

/// A fully rendered prompt ready for one backend call.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComposedPrompt {
    pub mode: PromptMode,
    pub pairs: Vec<StrategyPair>,
    pub body: String,
    /// Number of answers the completion should contain: 1 everywhere except
    /// the one-call ensemble, where it equals the pair count.
    pub expected_segments: usize,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ComposeError {
    #[error("ensemble modes need at least one strategy pair")]
    EmptyPairs,
    #[error("the one-call ensemble needs at least two pairs, got {0}")]
    TooFewPairsForInCall(usize),
    #[error("few-shot composition without shot material")]
    MissingShots,
}

/// Render the prompts for `item` under `mode`.
///
/// `augmented` entries index into `pairs` and `shots`. Few-shot behavior is
/// driven by the material passed: the self-consistency mode renders the
/// zero-shot chain-of-thought body when `shots` is empty and the few-shot
/// body otherwise, so an SC-1 run issues exactly the CoT prompt.
pub fn compose_prompts(
    pairs: &[StrategyPair],
    augmented: &[AugmentedExample],
    shots: &[FewShotExample],
    item: &TaskItem,
    mode: PromptMode,
    spec: &TaskSpec,
) -> Result<Vec<ComposedPrompt>, ComposeError> {
    match mode {
        PromptMode::CotZs => Ok(vec![single(mode, cot_zs_body(item))]),
        PromptMode::CotFs => {
            if shots.is_empty() {
                return Err(ComposeError::MissingShots);
            }
            Ok(vec![single(mode, cot_fs_body(item, shots))])
        }
        PromptMode::Sc => {
            let body = if shots.is_empty() {
                cot_zs_body(item)
            } else {
                cot_fs_body(item, shots)
            };
            Ok(vec![single(mode, body)])
        }
        PromptMode::DivSe => {
            if pairs.is_empty() {
                return Err(ComposeError::EmptyPairs);
            }
            Ok(pairs
                .iter()
                .enumerate()
                .map(|(i, pair)| {
                    let augmented: Vec<&AugmentedExample> =
                        augmented.iter().filter(|a| a.pair_index == i).collect();
                    ComposedPrompt {
                        mode,
                        pairs: vec![pair.clone()],
                        body: div_se_body(pair, &augmented, shots, item),
                        expected_segments: 1,
                    }
                })
                .collect())
        }
        PromptMode::IdivSe => {
            if pairs.is_empty() {
                return Err(ComposeError::EmptyPairs);
            }
            if pairs.len() < 2 {
                return Err(ComposeError::TooFewPairsForInCall(pairs.len()));
            }
            Ok(vec![ComposedPrompt {
                mode,
                pairs: pairs.to_vec(),
                body: idiv_se_body(pairs, augmented, shots, item, spec),
                expected_segments: pairs.len(),
            }])
        }
    }
}

fn single(mode: PromptMode, body: String) -> ComposedPrompt {
    ComposedPrompt {
        mode,
        pairs: Vec::new(),
        body,
        expected_segments: 1,
    }
}

/// Display name for a pair inside "Approach <...>" markers: the approach
/// name when present, otherwise the persona framing.
fn pair_descriptor(pair: &StrategyPair) -> String {
    match &pair.approach {
        Some(a) => a.name.clone(),
        None => pair.persona.description.clone(),
    }
}

/// Opening instruction for one pair, e.g.
/// "Thinking like Alan Turing. Solve the given problem accurately using
/// algebra. If there is no exact match choose the closest option."
fn pair_opening(pair: &StrategyPair, choice_task: bool) -> String {
    let mut out = String::new();
    if !pair.persona.is_empty {
        out.push_str(&pair.persona.description);
        out.push_str(". ");
    }
    match &pair.approach {
        Some(a) => {
            out.push_str(&format!("Solve the given problem accurately <{}>.", a.name));
        }
        None => out.push_str("Solve the given problem accurately."),
    }
    if choice_task {
        out.push_str(" If there is no exact match choose the closest option.");
    }
    out
}

const CLOSEST_OPTION: &str = "If there is no exact match choose the closest option.";

/// "Question: ...\nAnswer Choices: ..." block; options embedded verbatim.
fn question_block(item: &TaskItem) -> String {
    match &item.body {
        ItemBody::Choice { question, options } => {
            let opts = options
                .iter()
                .map(|o| format!("({}) {}", o.label, o.text))
                .collect::<Vec<_>>()
                .join(" ");
            format!("Question: {question}\nAnswer Choices: {opts}")
        }
        ItemBody::Numeric { question } => format!("Question: {question}"),
        ItemBody::Plan(_) | ItemBody::Coloring(_) => String::new(),
    }
}

fn cot_zs_body(item: &TaskItem) -> String {
    match &item.body {
        ItemBody::Choice { .. } | ItemBody::Numeric { .. } => {
            format!("{}\nThink step by step", question_block(item))
        }
        ItemBody::Plan(inst) => blocks_prompt(
            inst,
            "What is the plan to achieve the goal? Just give the actions in the plan.",
        ),
        ItemBody::Coloring(graph) => {
            format!("{}\n\nThink step by step", coloring_statement(graph, None))
        }
    }
}

fn cot_fs_body(item: &TaskItem, shots: &[FewShotExample]) -> String {
    match &item.body {
        ItemBody::Choice { .. } | ItemBody::Numeric { .. } => {
            let mut out = String::new();
            for shot in shots {
                out.push_str(&shot_header(shot));
                out.push('\n');
                out.push_str(shot.base_rationale.trim_end());
                out.push_str("\n\n");
            }
            out.push_str(&question_block(item));
            out
        }
        // Planning and coloring run zero-shot; shots have no rendering there.
        ItemBody::Plan(_) | ItemBody::Coloring(_) => cot_zs_body(item),
    }
}

fn shot_header(shot: &FewShotExample) -> String {
    if shot.options.is_empty() {
        format!("Question: {}", shot.question)
    } else {
        format!(
            "Question: {}\nAnswer Choices: {}",
            shot.question,
            shot.render_options()
        )
    }
}

fn div_se_body(
    pair: &StrategyPair,
    augmented: &[&AugmentedExample],
    shots: &[FewShotExample],
    item: &TaskItem,
) -> String {
    match &item.body {
        ItemBody::Choice { .. } | ItemBody::Numeric { .. } => {
            let choice = matches!(item.body, ItemBody::Choice { .. });
            let mut out = pair_opening(pair, choice);
            out.push_str("\n\n");
            for aug in augmented {
                if let Some(shot) = shots.get(aug.shot_index) {
                    out.push_str(&shot_header(shot));
                    out.push('\n');
                    if let Some(a) = &pair.approach {
                        out.push_str(&format!("Approach: <{}>\n", a.name));
                    }
                    out.push_str(aug.rationale.trim_end());
                    out.push('\n');
                    out.push_str(aug.final_line.trim_end());
                    out.push_str("\n\n");
                }
            }
            out.push_str(&question_block(item));
            if let Some(a) = &pair.approach {
                out.push_str(&format!("\nApproach: <{}>", a.name));
            }
            out
        }
        ItemBody::Plan(inst) => blocks_prompt(inst, &plan_directive(pair, inst)),
        ItemBody::Coloring(graph) => {
            let mut opening = String::new();
            if !pair.persona.is_empty {
                opening.push_str(&pair.persona.description);
                opening.push_str(", ");
            }
            match &pair.approach {
                Some(a) => {
                    opening.push_str(&a.name);
                    if let Some(d) = &a.description {
                        opening.push_str(&format!(" ({d})"));
                    }
                    opening.push(',');
                }
                None => opening.push_str("accurately"),
            }
            coloring_statement(graph, Some(&opening)).to_string()
        }
    }
}

/// Approach directive paragraph for a planning prompt, in the task's style:
/// persona framing, the approach's own instructions, then the goal restated.
fn plan_directive(pair: &StrategyPair, inst: &crate::blocksworld::BlocksInstance) -> String {
    let mut out = String::new();
    if !pair.persona.is_empty {
        out.push_str(&pair.persona.description);
        out.push_str(
            ", starting from the <Initial State> build a plan to get to the <Goal State>.",
        );
    } else {
        out.push_str("Starting from the <Initial State> build a plan to get to the <Goal State>.");
    }
    out.push_str(" For each action step carefully check that the step follows the rules.");
    if let Some(desc) = pair.approach.as_ref().and_then(|a| a.description.as_ref()) {
        out.push(' ');
        out.push_str(desc.trim());
    }
    out.push_str(&format!(
        " <Goal State> : Your goal is to have that {}.",
        inst.render_goal()
    ));
    out
}

fn idiv_se_body(
    pairs: &[StrategyPair],
    augmented: &[AugmentedExample],
    shots: &[FewShotExample],
    item: &TaskItem,
    _spec: &TaskSpec,
) -> String {
    let n = pairs.len();
    let count = spell_count(n);
    match &item.body {
        ItemBody::Choice { .. } | ItemBody::Numeric { .. } => {
            let choice = matches!(item.body, ItemBody::Choice { .. });
            let mut out = format!(
                "Use the following {count} distinct approaches to solve the given problem accurately."
            );
            if choice {
                out.push(' ');
                out.push_str(CLOSEST_OPTION);
            }
            out.push_str("\n\n");
            for (i, pair) in pairs.iter().enumerate() {
                out.push_str(&format!(
                    "Approach {} <{}>:\n",
                    i + 1,
                    pair_descriptor(pair)
                ));
                if !pair.persona.is_empty {
                    out.push_str(&pair.persona.description);
                    out.push_str(".\n");
                }
                let pair_shots: Vec<&AugmentedExample> =
                    augmented.iter().filter(|a| a.pair_index == i).collect();
                for aug in pair_shots {
                    if let Some(shot) = shots.get(aug.shot_index) {
                        out.push_str(&shot_header(shot));
                        out.push('\n');
                        out.push_str(aug.rationale.trim_end());
                        out.push('\n');
                        out.push_str(aug.final_line.trim_end());
                        out.push('\n');
                    }
                }
                out.push('\n');
            }
            out.push_str(&question_block(item));
            out.push_str("\n\n");
            out.push_str(&output_format_block(pairs, "solution and final answer"));
            out
        }
        ItemBody::Plan(inst) => {
            let mut directive = format!(
                "Use the following {count} distinct approaches to produce the plan, one plan per approach. For each action step carefully check that the step follows the rules.\n"
            );
            for (i, pair) in pairs.iter().enumerate() {
                directive.push_str(&format!(
                    "Approach {} <{}>: {}\n",
                    i + 1,
                    pair_descriptor(pair),
                    pair_approach_note(pair)
                ));
            }
            directive.push_str(&format!(
                "\n{}",
                output_format_block(pairs, "plan as a sequence of actions")
            ));
            blocks_prompt(inst, directive.trim_end())
        }
        ItemBody::Coloring(graph) => {
            let mut opening = String::new();
            let lead = pairs.iter().find(|p| !p.persona.is_empty);
            if let Some(p) = lead {
                opening.push_str(&p.persona.description);
                opening.push_str(", ");
            }
            opening.push_str(&format!("use {count} distinct approaches,"));
            let mut out = coloring_statement(graph, Some(&opening));
            out.push_str("\n\n");
            out.push_str(&output_format_block(pairs, "vertex color assignments"));
            out
        }
    }
}

fn pair_approach_note(pair: &StrategyPair) -> String {
    match &pair.approach {
        Some(a) => match &a.description {
            Some(d) => d.trim().to_string(),
            None => format!("solve it {}.", a.name),
        },
        None => "solve it in your own style.".into(),
    }
}

/// The trailing "Output format:" block of one-call ensemble prompts. Each
/// line anchors the "Approach k <name> :" grammar the splitter relies on.
fn output_format_block(pairs: &[StrategyPair], hint: &str) -> String {
    let mut out = String::from("Use the following output format:\n");
    for (i, pair) in pairs.iter().enumerate() {
        out.push_str(&format!(
            "Approach {} <{}> : <{hint}>\n",
            i + 1,
            pair_descriptor(pair)
        ));
    }
    out.pop();
    out
}

fn spell_count(n: usize) -> String {
    match n {
        1 => "one".into(),
        2 => "two".into(),
        3 => "three".into(),
        4 => "four".into(),
        5 => "five".into(),
        other => other.to_string(),
    }
}

/// The block-stacking task statement: intro, initial conditions, goal,
/// actions, the eleven rules, a directive, then the plan marker.
fn blocks_prompt(inst: &crate::blocksworld::BlocksInstance, directive: &str) -> String {
    let rules = (1..=11)
        .map(|i| {
            let rule = match i {
                1 => crate::blocksworld::Rule::R1,
                2 => crate::blocksworld::Rule::R2,
                3 => crate::blocksworld::Rule::R3,
                4 => crate::blocksworld::Rule::R4,
                5 => crate::blocksworld::Rule::R5,
                6 => crate::blocksworld::Rule::R6,
                7 => crate::blocksworld::Rule::R7,
                8 => crate::blocksworld::Rule::R8,
                9 => crate::blocksworld::Rule::R9,
                10 => crate::blocksworld::Rule::R10,
                _ => crate::blocksworld::Rule::R11,
            };
            format!("{i}. {}", rule.text())
        })
        .collect::<Vec<_>>()
        .join("\n");
    format!(
        "You are playing with a set of blocks where you need to arrange the blocks into stacks.\n\n\
         <Initial State> : As initial conditions you have that, {init}.\n\
         <Goal State> : Your goal is to have that {goal}.\n\n\
         Here are the actions you can do:\n\
         -Pick up a block from the table\n\
         -Unstack a block from on top of another block\n\
         -Put down a block on the table\n\
         -Stack a block on top of another block\n\n\
         Rules:\n{rules}\n\n\
         {directive}\n\n\
         [PLAN]",
        init = inst.render_initial_conditions(),
        goal = inst.render_goal(),
    )
}

/// The graph-coloring task statement with the edge list and the per-vertex
/// output format the parser expects.
fn coloring_statement(graph: &crate::coloring::Graph, opening: Option<&str>) -> String {
    let lead = match opening {
        Some(o) => format!(
            "{o} color the following graph, described as a set of edges, such that no two \
             vertices on the same edge share a color."
        ),
        None => "Color the following graph, described as a set of edges, such that no two \
                 vertices on the same edge share a color."
            .to_string(),
    };
    format!(
        "{lead}\n\nYou may use at most {k} colors.\n{edges}\n\
         There are a total of {n} vertices. Please label every vertex, even if it is \
         disconnected from the rest of the graph. Please provide each vertex's color. \
         Do not skip any vertices. Each color must be provided on a new line in the response \
         and should be formatted as \"{{VERTEX NUMBER}}: {{VERTEX COLOR ASSIGNMENT (Color n)}}\".",
        k = graph.max_colors,
        edges = graph.render_edges(),
        n = graph.n_vertices,
    )
}
