//! Task definitions and dataset loading: the seven built-in benchmarks, the
//! per-task answer kind and default ensemble size, and loaders that
//! normalize golds into exact comparable form.

use crate::blocksworld::{validate_plan, BlocksInstance};
use crate::coloring::{verify_coloring, Graph};
use crate::extract::{parse_rational, AnswerKind, ExtractedAnswer};
use crate::strategy::LabeledOption;
use num::BigRational;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskId {
    Aqua,
    Gsm8k,
    MathCp,
    Csqa,
    Blocksworld3,
    Blocksworld45,
    GraphColoring,
}

impl TaskId {
    pub const ALL: [TaskId; 7] = [
        TaskId::Aqua,
        TaskId::Gsm8k,
        TaskId::MathCp,
        TaskId::Csqa,
        TaskId::Blocksworld3,
        TaskId::Blocksworld45,
        TaskId::GraphColoring,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TaskId::Aqua => "aqua",
            TaskId::Gsm8k => "gsm8k",
            TaskId::MathCp => "math_cp",
            TaskId::Csqa => "csqa",
            TaskId::Blocksworld3 => "blocksworld3",
            TaskId::Blocksworld45 => "blocksworld45",
            TaskId::GraphColoring => "graph_coloring",
        }
    }

    pub fn spec(self) -> TaskSpec {
        let (answer_kind, default_ensemble_size) = match self {
            // math word problems run ensembles of five; the counting-and-
            // probability split reuses the same strategies and size
            TaskId::Aqua | TaskId::Gsm8k | TaskId::MathCp => (answer_kind_of(self), 5),
            TaskId::Csqa | TaskId::Blocksworld3 | TaskId::Blocksworld45 | TaskId::GraphColoring => {
                (answer_kind_of(self), 3)
            }
        };
        TaskSpec {
            id: self,
            answer_kind,
            default_ensemble_size,
        }
    }
}

fn answer_kind_of(id: TaskId) -> AnswerKind {
    match id {
        TaskId::Aqua | TaskId::Csqa => AnswerKind::Choice,
        TaskId::Gsm8k | TaskId::MathCp => AnswerKind::Numeric,
        TaskId::Blocksworld3 | TaskId::Blocksworld45 => AnswerKind::Plan,
        TaskId::GraphColoring => AnswerKind::Coloring,
    }
}

impl fmt::Display for TaskId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for TaskId {
    type Err = String;

    fn from_str(s: &str) -> Result<TaskId, String> {
        TaskId::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| format!("unknown task {s:?}"))
    }
}

/// Static description of a benchmark task.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TaskSpec {
    pub id: TaskId,
    pub answer_kind: AnswerKind,
    pub default_ensemble_size: usize,
}

/// The content of one benchmark item.
#[derive(Debug, Clone, PartialEq)]
pub enum ItemBody {
    Choice {
        question: String,
        options: Vec<LabeledOption>,
    },
    Numeric {
        question: String,
    },
    Plan(BlocksInstance),
    Coloring(Graph),
}

impl ItemBody {
    pub fn options(&self) -> Option<&[LabeledOption]> {
        match self {
            ItemBody::Choice { options, .. } => Some(options),
            _ => None,
        }
    }

    pub fn option_labels(&self) -> Vec<char> {
        self.options()
            .map(|o| o.iter().map(|l| l.label).collect())
            .unwrap_or_default()
    }
}

/// Normalized gold answer. Plan and coloring items are graded by their
/// verifiers against the instance instead of a literal gold.
#[derive(Debug, Clone, PartialEq)]
pub enum Gold {
    Choice(char),
    Numeric(BigRational),
    PlanGoal,
    ValidColoring,
}

impl Gold {
    pub fn display(&self) -> String {
        match self {
            Gold::Choice(c) => c.to_string(),
            Gold::Numeric(r) => r.to_string(),
            Gold::PlanGoal => "<goal reached>".into(),
            Gold::ValidColoring => "<valid coloring>".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaskItem {
    pub id: String,
    pub body: ItemBody,
    pub gold: Gold,
}

impl TaskItem {
    /// Grade an extracted answer against this item.
    pub fn grade(&self, answer: &ExtractedAnswer) -> bool {
        match (&self.gold, answer) {
            (Gold::Choice(gold), ExtractedAnswer::Choice(got)) => gold == got,
            (Gold::Numeric(gold), ExtractedAnswer::Numeric(got)) => gold == got,
            (Gold::PlanGoal, ExtractedAnswer::Plan(plan)) => {
                let ItemBody::Plan(inst) = &self.body else {
                    return false;
                };
                let (Ok(init), Ok(goal)) = (inst.initial_state(), inst.goal()) else {
                    return false;
                };
                let report = validate_plan(&init, &goal, plan);
                report.valid && report.goal_satisfied
            }
            (Gold::ValidColoring, ExtractedAnswer::Coloring(coloring)) => {
                let ItemBody::Coloring(graph) = &self.body else {
                    return false;
                };
                verify_coloring(graph, coloring).is_valid()
            }
            _ => false,
        }
    }
}

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("dataset i/o failure at {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("record {index}: {reason}")]
    Record { index: usize, reason: String },
}

/// Load and normalize a dataset file for `task`.
///
/// Choice/numeric tasks read JSON lines; plan and coloring tasks read either
/// a JSON array or JSON lines of instance records.
pub fn load_dataset(task: TaskId, path: impl AsRef<Path>) -> Result<Vec<TaskItem>, LoadError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| LoadError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let values = parse_records(&text)?;
    let spec = task.spec();
    values
        .into_iter()
        .enumerate()
        .map(|(index, value)| {
            parse_item(spec, index, value).map_err(|reason| LoadError::Record { index, reason })
        })
        .collect()
}

fn parse_records(text: &str) -> Result<Vec<serde_json::Value>, LoadError> {
    let trimmed = text.trim_start();
    if trimmed.starts_with('[') {
        let values: Vec<serde_json::Value> =
            serde_json::from_str(trimmed).map_err(|e| LoadError::Record {
                index: 0,
                reason: e.to_string(),
            })?;
        return Ok(values);
    }
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let value = serde_json::from_str(line).map_err(|e| LoadError::Record {
            index: i,
            reason: e.to_string(),
        })?;
        out.push(value);
    }
    Ok(out)
}

fn parse_item(spec: TaskSpec, index: usize, value: serde_json::Value) -> Result<TaskItem, String> {
    let id = value
        .get("id")
        .and_then(|v| v.as_str())
        .map(|s| s.to_string())
        .unwrap_or_else(|| format!("{}-{index}", spec.id));
    match spec.answer_kind {
        AnswerKind::Choice => {
            let rec: ChoiceRecord = serde_json::from_value(value).map_err(|e| e.to_string())?;
            let options = rec.parsed_options()?;
            let gold = rec.correct.trim().to_uppercase();
            let gold_char = gold.chars().next().ok_or("empty gold label")?;
            if !options.iter().any(|o| o.label == gold_char) {
                return Err(format!("gold label {gold_char:?} not among the options"));
            }
            Ok(TaskItem {
                id,
                body: ItemBody::Choice {
                    question: rec.question,
                    options,
                },
                gold: Gold::Choice(gold_char),
            })
        }
        AnswerKind::Numeric => {
            let rec: NumericRecord = serde_json::from_value(value).map_err(|e| e.to_string())?;
            let gold_text = match rec.answer.rsplit_once("####") {
                Some((_, tail)) => tail.trim().to_string(),
                None => rec.answer.trim().to_string(),
            };
            let gold = parse_rational(&gold_text)
                .ok_or_else(|| format!("gold {gold_text:?} is not a number"))?;
            Ok(TaskItem {
                id,
                body: ItemBody::Numeric {
                    question: rec.question,
                },
                gold: Gold::Numeric(gold),
            })
        }
        AnswerKind::Plan => {
            let inst: BlocksInstance = serde_json::from_value(value).map_err(|e| e.to_string())?;
            inst.initial_state().map_err(|e| e.to_string())?;
            inst.goal().map_err(|e| e.to_string())?;
            Ok(TaskItem {
                id,
                body: ItemBody::Plan(inst),
                gold: Gold::PlanGoal,
            })
        }
        AnswerKind::Coloring => {
            let rec: GraphRecord = serde_json::from_value(value).map_err(|e| e.to_string())?;
            let graph =
                Graph::new(rec.n_vertices, rec.edges, rec.max_colors).map_err(|e| e.to_string())?;
            Ok(TaskItem {
                id,
                body: ItemBody::Coloring(graph),
                gold: Gold::ValidColoring,
            })
        }
    }
}

#[derive(Deserialize)]
struct ChoiceRecord {
    question: String,
    options: Vec<serde_json::Value>,
    correct: String,
}

impl ChoiceRecord {
    fn parsed_options(&self) -> Result<Vec<LabeledOption>, String> {
        if self.options.is_empty() {
            return Err("options list is empty".into());
        }
        self.options
            .iter()
            .enumerate()
            .map(|(i, v)| parse_option(i, v))
            .collect()
    }
}

/// Accept "A)50", "(A) 50", "A) 50" strings or {label, text} objects.
fn parse_option(index: usize, value: &serde_json::Value) -> Result<LabeledOption, String> {
    if let Some(s) = value.as_str() {
        let s = s.trim();
        let stripped = s.strip_prefix('(').unwrap_or(s);
        let mut chars = stripped.chars();
        let label = chars
            .next()
            .filter(|c| c.is_ascii_alphabetic())
            .ok_or_else(|| format!("option {index} has no label: {s:?}"))?
            .to_ascii_uppercase();
        let rest = chars.as_str();
        let text = rest.trim_start_matches([')', '.', ':']).trim().to_string();
        return Ok(LabeledOption { label, text });
    }
    #[derive(Deserialize)]
    struct Obj {
        label: String,
        text: String,
    }
    let obj: Obj = serde_json::from_value(value.clone()).map_err(|e| e.to_string())?;
    let label = obj
        .label
        .trim()
        .chars()
        .next()
        .ok_or_else(|| format!("option {index} has an empty label"))?
        .to_ascii_uppercase();
    Ok(LabeledOption {
        label,
        text: obj.text,
    })
}

#[derive(Deserialize)]
struct NumericRecord {
    question: String,
    answer: String,
}

#[derive(Deserialize)]
struct GraphRecord {
    n_vertices: u32,
    edges: Vec<(u32, u32)>,
    max_colors: u32,
}

#[cfg(test)]
mod tests {
    use super::*;
    use num::BigInt;

    fn write_temp(content: &str) -> tempfile::NamedTempFile {
        use std::io::Write;
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn choice_dataset_loads_and_grades() {
        let f = write_temp(
            r#"{"question":"What is 2+2?","options":["A)3","B)4","C)5","D)6","E)7"],"correct":"B"}"#,
        );
        let items = load_dataset(TaskId::Aqua, f.path()).unwrap();
        assert_eq!(items.len(), 1);
        assert_eq!(items[0].gold, Gold::Choice('B'));
        assert_eq!(items[0].body.option_labels(), vec!['A', 'B', 'C', 'D', 'E']);
        assert!(items[0].grade(&ExtractedAnswer::Choice('B')));
        assert!(!items[0].grade(&ExtractedAnswer::Choice('A')));
    }

    #[test]
    fn gsm8k_gold_comes_after_the_marker() {
        let f = write_temp(r#"{"question":"q","answer":"Natalia sold 48/2 = 24 clips.\n#### 72"}"#);
        let items = load_dataset(TaskId::Gsm8k, f.path()).unwrap();
        let gold = BigRational::from_integer(BigInt::from(72));
        assert_eq!(items[0].gold, Gold::Numeric(gold.clone()));
        assert!(items[0].grade(&ExtractedAnswer::Numeric(gold)));
    }

    #[test]
    fn blocksworld_dataset_loads_the_reference_instance() {
        let inst = crate::blocksworld::reference_instance();
        let f = write_temp(&serde_json::to_string(&vec![inst.clone()]).unwrap());
        let items = load_dataset(TaskId::Blocksworld3, f.path()).unwrap();
        assert_eq!(items.len(), 1);
        let plan = crate::blocksworld::oracle_bfs_plan(
            &inst.initial_state().unwrap(),
            &inst.goal().unwrap(),
        )
        .unwrap();
        assert!(items[0].grade(&ExtractedAnswer::Plan(plan)));
        assert!(!items[0].grade(&ExtractedAnswer::Plan(vec![])));
    }

    #[test]
    fn coloring_dataset_loads_and_grades_via_verifier() {
        let f = write_temp(r#"{"n_vertices":3,"edges":[[0,1],[1,2],[0,2]],"max_colors":3}"#);
        let items = load_dataset(TaskId::GraphColoring, f.path()).unwrap();
        let good = [(0, 1), (1, 2), (2, 3)].into_iter().collect();
        let bad = [(0, 1), (1, 1), (2, 3)].into_iter().collect();
        assert!(items[0].grade(&ExtractedAnswer::Coloring(good)));
        assert!(!items[0].grade(&ExtractedAnswer::Coloring(bad)));
    }

    #[test]
    fn malformed_records_carry_their_index() {
        let f = write_temp(
            "{\"question\":\"q\",\"options\":[\"A)1\"],\"correct\":\"A\"}\n{\"question\":\"q2\",\"options\":[\"A)1\"],\"correct\":\"Z\"}",
        );
        match load_dataset(TaskId::Aqua, f.path()) {
            Err(LoadError::Record { index: 1, .. }) => {}
            other => panic!("expected record error at index 1, got {other:?}"),
        }
    }

    #[test]
    fn default_ensemble_sizes_follow_the_task_family() {
        assert_eq!(TaskId::Aqua.spec().default_ensemble_size, 5);
        assert_eq!(TaskId::Gsm8k.spec().default_ensemble_size, 5);
        assert_eq!(TaskId::MathCp.spec().default_ensemble_size, 5);
        assert_eq!(TaskId::Csqa.spec().default_ensemble_size, 3);
        assert_eq!(TaskId::Blocksworld3.spec().default_ensemble_size, 3);
        assert_eq!(TaskId::GraphColoring.spec().default_ensemble_size, 3);
    }
}
