//! Strategy domain types: approaches, personas, their scored pairings, and
//! few-shot material, plus the versioned JSON bundle the pipeline persists
//! them in.

use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::path::Path;
use thiserror::Error;

pub const BUNDLE_SCHEMA_VERSION: u32 = 1;

/// A named reasoning strategy, e.g. "using algebra".
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Approach {
    /// Stable slug, unique within a set.
    pub id: String,
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    /// How often discovery observed this name; at least 1.
    pub frequency: u32,
}

impl Approach {
    pub fn new(name: impl Into<String>) -> Approach {
        let name = name.into();
        Approach {
            id: slugify(&name),
            name,
            description: None,
            frequency: 1,
        }
    }

    pub fn with_description(mut self, description: impl Into<String>) -> Approach {
        self.description = Some(description.into());
        self
    }
}

/// An identity framing, e.g. "Thinking like Alan Turing". The empty persona
/// represents prompting without one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Persona {
    pub id: String,
    pub description: String,
    pub is_empty: bool,
}

impl Persona {
    pub fn new(description: impl Into<String>) -> Persona {
        let description = description.into();
        Persona {
            id: slugify(&description),
            description,
            is_empty: false,
        }
    }

    /// The mandatory "no persona" member of every persona set.
    pub fn empty() -> Persona {
        Persona {
            id: "none".into(),
            description: String::new(),
            is_empty: true,
        }
    }
}

/// Lowercase, trim punctuation, collapse whitespace and join with hyphens.
pub fn slugify(name: &str) -> String {
    let mut out = String::new();
    let mut pending_sep = false;
    for c in name.to_lowercase().chars() {
        if c.is_ascii_alphanumeric() {
            if pending_sep && !out.is_empty() {
                out.push('-');
            }
            pending_sep = false;
            out.push(c);
        } else {
            pending_sep = true;
        }
    }
    out
}

/// Normalize an approach/persona name for frequency counting: lowercase,
/// punctuation trimmed, inner whitespace collapsed.
pub fn normalize_name(name: &str) -> String {
    name.to_lowercase()
        .split_whitespace()
        .map(|w| w.trim_matches(|c: char| !c.is_ascii_alphanumeric()))
        .filter(|w| !w.is_empty())
        .collect::<Vec<_>>()
        .join(" ")
}

/// Discovered approaches in first-seen order.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ApproachSet {
    pub approaches: Vec<Approach>,
}

impl ApproachSet {
    pub fn get(&self, id: &str) -> Option<&Approach> {
        self.approaches.iter().find(|a| a.id == id)
    }
}

/// Discovered personas; always contains exactly one empty persona.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PersonaSet {
    pub personas: Vec<Persona>,
}

impl Default for PersonaSet {
    fn default() -> Self {
        PersonaSet {
            personas: vec![Persona::empty()],
        }
    }
}

impl PersonaSet {
    pub fn get(&self, id: &str) -> Option<&Persona> {
        self.personas.iter().find(|p| p.id == id)
    }

    pub fn empty_persona(&self) -> Option<&Persona> {
        self.personas.iter().find(|p| p.is_empty)
    }
}

/// One (persona, approach) combination, the unit of ensemble diversity.
/// Either side may be absent (empty persona / no approach) but not both.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyPair {
    pub persona: Persona,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub approach: Option<Approach>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub val_accuracy: Option<f64>,
    /// Set when validation scoring could not complete every item.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub partial: bool,
}

impl StrategyPair {
    pub fn new(persona: Persona, approach: Option<Approach>) -> StrategyPair {
        StrategyPair {
            persona,
            approach,
            val_accuracy: None,
            partial: false,
        }
    }

    /// Short deterministic label, e.g. "alan-turing+action-rationale".
    pub fn label(&self) -> String {
        let p = if self.persona.is_empty {
            "none"
        } else {
            self.persona.id.as_str()
        };
        let a = self
            .approach
            .as_ref()
            .map(|a| a.id.as_str())
            .unwrap_or("none");
        format!("{p}+{a}")
    }

    fn check(&self) -> Result<(), BundleError> {
        if self.persona.is_empty && self.approach.is_none() {
            return Err(BundleError::EmptyPair);
        }
        if let Some(acc) = self.val_accuracy {
            if !(0.0..=1.0).contains(&acc) {
                return Err(BundleError::BadAccuracy(acc));
            }
        }
        Ok(())
    }
}

/// A worked exemplar with its gold answer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FewShotExample {
    pub question: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub options: Vec<LabeledOption>,
    pub gold_answer: String,
    pub base_rationale: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledOption {
    pub label: char,
    pub text: String,
}

impl FewShotExample {
    pub fn option_labels(&self) -> Vec<char> {
        self.options.iter().map(|o| o.label).collect()
    }

    /// "(A) 50 (B) 45 ..." line for prompt bodies.
    pub fn render_options(&self) -> String {
        self.options
            .iter()
            .map(|o| format!("({}) {}", o.label, o.text))
            .collect::<Vec<_>>()
            .join(" ")
    }
}

/// A few-shot exemplar re-solved in the style of one strategy pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentedExample {
    /// Index of the pair in the bundle's pair list.
    pub pair_index: usize,
    /// Index of the source exemplar in the bundle's shot list.
    pub shot_index: usize,
    pub rationale: String,
    /// Literal final answer sentence; must parse under the task's grammar.
    pub final_line: String,
}

/// Parameters for approach/persona discovery.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiscoveryConfig {
    /// Approaches requested per call, in [1, 5].
    pub approaches_per_call: u32,
    /// Number of discovery calls.
    pub calls: u32,
    /// Approaches kept.
    pub keep_approaches: usize,
    /// Personas kept (the empty persona comes on top of these).
    pub keep_personas: usize,
    /// Validation slice size for pair selection.
    pub validation_size: usize,
}

impl Default for DiscoveryConfig {
    fn default() -> Self {
        // c = 100 calls of b = 5 approaches; keep n = 5; |V| < 20.
        DiscoveryConfig {
            approaches_per_call: 5,
            calls: 100,
            keep_approaches: 5,
            keep_personas: 5,
            validation_size: 16,
        }
    }
}

#[derive(Debug, Error)]
pub enum BundleError {
    #[error("bundle i/o failure at {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("bundle is not valid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("bundle schema version {found} unsupported (expected {BUNDLE_SCHEMA_VERSION})")]
    SchemaVersion { found: u32 },
    #[error("duplicate approach id {0:?}")]
    DuplicateApproach(String),
    #[error("persona set must contain exactly one empty persona, found {0}")]
    EmptyPersonaCount(usize),
    #[error("the empty persona must have an empty description")]
    EmptyPersonaDescribed,
    #[error("a strategy pair needs a persona or an approach")]
    EmptyPair,
    #[error("validation accuracy {0} outside [0, 1]")]
    BadAccuracy(f64),
    #[error("augmented example references pair {pair_index} / shot {shot_index} out of range")]
    DanglingAugmented {
        pair_index: usize,
        shot_index: usize,
    },
    #[error("approach frequency must be at least 1 ({0:?})")]
    ZeroFrequency(String),
}

/// Everything the pipeline learns about a task, persisted as one JSON file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyBundle {
    pub schema_version: u32,
    pub task: String,
    pub approaches: ApproachSet,
    pub personas: PersonaSet,
    /// Selected pairs in rank order (best validation accuracy first).
    pub pairs: Vec<StrategyPair>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub shots: Vec<FewShotExample>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub augmented: Vec<AugmentedExample>,
}

impl StrategyBundle {
    pub fn new(task: impl Into<String>) -> StrategyBundle {
        StrategyBundle {
            schema_version: BUNDLE_SCHEMA_VERSION,
            task: task.into(),
            approaches: ApproachSet::default(),
            personas: PersonaSet::default(),
            pairs: Vec::new(),
            shots: Vec::new(),
            augmented: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<(), BundleError> {
        if self.schema_version != BUNDLE_SCHEMA_VERSION {
            return Err(BundleError::SchemaVersion {
                found: self.schema_version,
            });
        }
        let mut ids = BTreeSet::new();
        for a in &self.approaches.approaches {
            if !ids.insert(&a.id) {
                return Err(BundleError::DuplicateApproach(a.id.clone()));
            }
            if a.frequency == 0 {
                return Err(BundleError::ZeroFrequency(a.id.clone()));
            }
        }
        let empties = self.personas.personas.iter().filter(|p| p.is_empty).count();
        if empties != 1 {
            return Err(BundleError::EmptyPersonaCount(empties));
        }
        if self
            .personas
            .personas
            .iter()
            .any(|p| p.is_empty && !p.description.is_empty())
        {
            return Err(BundleError::EmptyPersonaDescribed);
        }
        for pair in &self.pairs {
            pair.check()?;
        }
        for aug in &self.augmented {
            if aug.pair_index >= self.pairs.len() || aug.shot_index >= self.shots.len() {
                return Err(BundleError::DanglingAugmented {
                    pair_index: aug.pair_index,
                    shot_index: aug.shot_index,
                });
            }
        }
        Ok(())
    }

    /// Augmented shots for one pair, in shot order.
    pub fn augmented_for_pair(&self, pair_index: usize) -> Vec<&AugmentedExample> {
        self.augmented
            .iter()
            .filter(|a| a.pair_index == pair_index)
            .collect()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<StrategyBundle, BundleError> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|source| BundleError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let bundle: StrategyBundle = serde_json::from_slice(&bytes)?;
        bundle.validate()?;
        Ok(bundle)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), BundleError> {
        self.validate()?;
        let path = path.as_ref();
        let json = serde_json::to_string_pretty(self)?;
        std::fs::write(path, json.as_bytes()).map_err(|source| BundleError::Io {
            path: path.display().to_string(),
            source,
        })
    }
}
