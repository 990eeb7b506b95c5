//! Shared helpers for the integration suites: fixture paths, the scripted
//! fixture gateway with pinned token usage, and prompt golden rendering.
//
// Each test target compiles this module separately and uses a different
// subset of it.
#![allow(dead_code)]

use divse_core::compose::{compose_prompts, ComposedPrompt, PromptMode};
use divse_core::gateway::{Completion, Gateway, GatewayError, GenerationRequest, TokenUsage};
use divse_core::strategy::StrategyBundle;
use divse_core::task::{load_dataset, TaskId, TaskItem};
use serde::Deserialize;
use std::path::PathBuf;
use std::sync::Mutex;

pub fn fixtures_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

/// Scripted gateway for fixture construction: ordered rules where every
/// required substring must appear in the prompt; replies advance per hit and
/// token usage is pinned rather than estimated.
#[derive(Default)]
pub struct FixtureGateway {
    rules: Vec<FixtureRule>,
}

struct FixtureRule {
    required: Vec<String>,
    replies: Vec<String>,
    usage: TokenUsage,
    cursor: Mutex<usize>,
}

impl FixtureGateway {
    pub fn push(&mut self, required: Vec<String>, replies: Vec<String>, usage: TokenUsage) {
        assert!(!replies.is_empty());
        self.rules.push(FixtureRule {
            required,
            replies,
            usage,
            cursor: Mutex::new(0),
        });
    }
}

impl Gateway for FixtureGateway {
    fn complete(&self, req: &GenerationRequest) -> Result<Vec<Completion>, GatewayError> {
        let prompt: String = req
            .messages
            .iter()
            .map(|m| m.content.as_str())
            .collect::<Vec<_>>()
            .join("\n");
        let rule = self
            .rules
            .iter()
            .find(|r| r.required.iter().all(|needle| prompt.contains(needle)))
            .ok_or(GatewayError::ScriptMiss)?;
        let mut out = Vec::with_capacity(req.n_samples as usize);
        for _ in 0..req.n_samples {
            let text = {
                let mut cursor = rule.cursor.lock().unwrap();
                let text = rule.replies[(*cursor).min(rule.replies.len() - 1)].clone();
                *cursor += 1;
                text
            };
            out.push(Completion {
                text,
                usage: rule.usage,
                finish_reason: "stop".into(),
            });
        }
        Ok(out)
    }
}

/// Parsed `responses.json` of the aqua-mini fixture.
#[derive(Debug, Deserialize)]
pub struct AquaResponses {
    pub div_usage: TokenUsage,
    pub idiv_usage: TokenUsage,
    pub div_se: Vec<DivItemReplies>,
    pub idiv_se: Vec<IdivItemReply>,
}

#[derive(Debug, Deserialize)]
pub struct DivItemReplies {
    pub item: String,
    pub replies: Vec<String>,
}

#[derive(Debug, Deserialize)]
pub struct IdivItemReply {
    pub item: String,
    pub reply: String,
}

/// Substrings unique to each aqua-mini pair's multi-call prompt, in rank
/// order.
pub const AQUA_PAIR_MARKERS: [&str; 5] = [
    "Dr. Patel: A renowned mathematician",
    "Thinking like Alan Turing",
    "<using algebra>",
    "<using visualizations>",
    "<method of elimination>",
];

pub const AQUA_IDIV_MARKER: &str = "Use the following five distinct approaches";

pub fn load_aqua_fixture() -> (Vec<TaskItem>, StrategyBundle, AquaResponses) {
    let dir = fixtures_dir().join("aqua_mini");
    let items = load_dataset(TaskId::Aqua, dir.join("dataset.jsonl")).expect("aqua dataset");
    let bundle = StrategyBundle::load(dir.join("bundle.json")).expect("aqua bundle");
    let responses: AquaResponses =
        serde_json::from_str(&std::fs::read_to_string(dir.join("responses.json")).unwrap())
            .expect("aqua responses");
    (items, bundle, responses)
}

fn item_question(items: &[TaskItem], id: &str) -> String {
    let item = items
        .iter()
        .find(|i| i.id == id)
        .expect("response item exists in the dataset");
    match &item.body {
        divse_core::task::ItemBody::Choice { question, .. } => question.clone(),
        divse_core::task::ItemBody::Numeric { question } => question.clone(),
        _ => panic!("aqua items are choice questions"),
    }
}

/// Gateway scripted with every aqua-mini reply for both ensemble modes.
pub fn aqua_fixture_gateway() -> FixtureGateway {
    let (items, _, responses) = load_aqua_fixture();
    let mut gateway = FixtureGateway::default();
    // One-call rules first: those prompts also contain the pair markers.
    for entry in &responses.idiv_se {
        gateway.push(
            vec![AQUA_IDIV_MARKER.into(), item_question(&items, &entry.item)],
            vec![entry.reply.clone()],
            responses.idiv_usage,
        );
    }
    for entry in &responses.div_se {
        assert_eq!(entry.replies.len(), AQUA_PAIR_MARKERS.len());
        for (marker, reply) in AQUA_PAIR_MARKERS.iter().zip(&entry.replies) {
            gateway.push(
                vec![item_question(&items, &entry.item), (*marker).into()],
                vec![reply.clone()],
                responses.div_usage,
            );
        }
    }
    gateway
}

/// Task fixtures that carry a dataset and bundle for prompt goldens.
pub fn golden_sources() -> Vec<(TaskId, PathBuf, PathBuf)> {
    let f = fixtures_dir;
    vec![
        (
            TaskId::Aqua,
            f().join("aqua_mini/dataset.jsonl"),
            f().join("aqua_mini/bundle.json"),
        ),
        (
            TaskId::Gsm8k,
            f().join("gsm8k_mini/dataset.jsonl"),
            f().join("gsm8k_mini/bundle.json"),
        ),
        (
            TaskId::MathCp,
            f().join("math_cp_mini/dataset.jsonl"),
            f().join("math_cp_mini/bundle.json"),
        ),
        (
            TaskId::Csqa,
            f().join("csqa_mini/dataset.jsonl"),
            f().join("csqa_mini/bundle.json"),
        ),
        (
            TaskId::Blocksworld3,
            f().join("blocksworld/bw3.json"),
            f().join("blocksworld/bundle.json"),
        ),
        (
            TaskId::Blocksworld45,
            f().join("blocksworld/bw45.json"),
            f().join("blocksworld/bundle.json"),
        ),
        (
            TaskId::GraphColoring,
            f().join("graph_coloring/graphs.json"),
            f().join("graph_coloring/bundle.json"),
        ),
    ]
}

/// Compose the golden prompts for one task fixture: the first dataset item
/// under the bundle's full pair list. The aqua fixture composes few-shot,
/// everything else zero-shot.
pub fn compose_golden(
    task: TaskId,
    dataset: &std::path::Path,
    bundle_path: &std::path::Path,
    mode: PromptMode,
) -> Vec<ComposedPrompt> {
    let items = load_dataset(task, dataset).expect("golden dataset");
    let bundle = StrategyBundle::load(bundle_path).expect("golden bundle");
    let spec = task.spec();
    compose_prompts(
        &bundle.pairs,
        &bundle.augmented,
        &bundle.shots,
        &items[0],
        mode,
        &spec,
    )
    .expect("golden composition")
}

/// Render composed prompts to the golden-file format.
pub fn render_golden(prompts: &[ComposedPrompt]) -> String {
    let mut out = String::new();
    for (i, prompt) in prompts.iter().enumerate() {
        out.push_str(&format!("=== prompt {} of {} ===\n", i + 1, prompts.len()));
        out.push_str(&prompt.body);
        out.push_str("\n\n");
    }
    out
}
