//! Answer extraction: parses completions into normalized answers (choice
//! letters, exact rationals, block-stacking plans, graph colorings) and
//! splits in-call ensemble completions into per-approach segments.
//!
//! Extraction failures are surfaced as errors; downstream aggregation treats
//! them as abstained votes rather than wrong answers.

use crate::blocksworld::{plan_to_string, Block, BlockAction};
use crate::coloring::Coloring;
use crate::compose::{ComposedPrompt, PromptMode};
use num::BigRational;
use once_cell::sync::Lazy;
use regex::Regex;
use std::collections::BTreeMap;
use std::str::FromStr;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ExtractError {
    #[error("no answer label found")]
    NoChoice,
    #[error("no numeric answer found")]
    NoNumber,
    #[error("line {line}: unrecognized action {text:?}")]
    PlanLine { line: usize, text: String },
    #[error("no vertex-color assignment lines found")]
    NoColoring,
    #[error("no approach headers found in the completion")]
    NoSegments,
    #[error("segment splitting applies only to in-call ensemble prompts, not {0:?}")]
    WrongMode(PromptMode),
}

/// Kind of answer a task expects.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnswerKind {
    Choice,
    Numeric,
    Plan,
    Coloring,
}

/// A normalized task answer.
#[derive(Debug, Clone, PartialEq)]
pub enum ExtractedAnswer {
    Choice(char),
    Numeric(BigRational),
    Plan(Vec<BlockAction>),
    Coloring(Coloring),
}

impl ExtractedAnswer {
    pub fn kind(&self) -> AnswerKind {
        match self {
            ExtractedAnswer::Choice(_) => AnswerKind::Choice,
            ExtractedAnswer::Numeric(_) => AnswerKind::Numeric,
            ExtractedAnswer::Plan(_) => AnswerKind::Plan,
            ExtractedAnswer::Coloring(_) => AnswerKind::Coloring,
        }
    }

    /// Deterministic string form used for tallying and logging. Rationals
    /// are reduced, plans render as tuples, colorings as `v:c` pairs.
    pub fn canonical_key(&self) -> String {
        match self {
            ExtractedAnswer::Choice(c) => c.to_string(),
            ExtractedAnswer::Numeric(r) => r.to_string(),
            ExtractedAnswer::Plan(p) => plan_to_string(p),
            ExtractedAnswer::Coloring(c) => c
                .iter()
                .map(|(v, col)| format!("{v}:{col}"))
                .collect::<Vec<_>>()
                .join(" "),
        }
    }
}

/// An answer along with the byte span it was read from.
#[derive(Debug, Clone, PartialEq)]
pub struct Extraction {
    pub answer: ExtractedAnswer,
    pub span: (usize, usize),
}

/// One approach's slice of an in-call ensemble completion.
#[derive(Debug, Clone, PartialEq)]
pub struct ApproachSegment {
    pub pair_index: usize,
    /// Text of the segment after its header line.
    pub body: String,
    /// Byte span covering the header line and body, for reconstruction.
    pub span: (usize, usize),
    pub answer: Option<ExtractedAnswer>,
}

static HEADER_RE: Lazy<Regex> =
    Lazy::new(|| Regex::new(r"(?m)^[ \t]*(?:#+\s*|\*\*)?Approach\s*(\d+)?").unwrap());

/// Split an in-call ensemble completion on its "Approach" headers, in order.
/// At most `expected_segments` segments are returned; headers carrying an
/// in-range number claim that slot, others take the next free one. Missing
/// segments are simply absent from the result.
pub fn split_segments(
    completion: &str,
    prompt: &ComposedPrompt,
) -> Result<Vec<ApproachSegment>, ExtractError> {
    if prompt.mode != PromptMode::IdivSe {
        return Err(ExtractError::WrongMode(prompt.mode));
    }
    let expected = prompt.expected_segments;
    let headers: Vec<(usize, Option<usize>)> = HEADER_RE
        .captures_iter(completion)
        .map(|cap| {
            let start = cap.get(0).unwrap().start();
            let number = cap.get(1).and_then(|m| m.as_str().parse::<usize>().ok());
            (start, number)
        })
        .collect();
    if headers.is_empty() {
        return Err(ExtractError::NoSegments);
    }

    let mut taken = vec![false; expected];
    let mut accepted: Vec<(usize, usize)> = Vec::new(); // (byte offset, pair_index)
    for (start, number) in &headers {
        let slot = match number {
            Some(k) if *k >= 1 && *k <= expected && !taken[*k - 1] => Some(*k - 1),
            _ => taken.iter().position(|t| !t),
        };
        let Some(slot) = slot else { break };
        taken[slot] = true;
        accepted.push((*start, slot));
    }

    let mut segments = Vec::with_capacity(accepted.len());
    for (i, (start, pair_index)) in accepted.iter().enumerate() {
        let end = accepted
            .get(i + 1)
            .map(|(s, _)| *s)
            .unwrap_or(completion.len());
        let chunk = &completion[*start..end];
        let body = match chunk.find('\n') {
            Some(nl) => chunk[nl + 1..].to_string(),
            None => String::new(),
        };
        segments.push(ApproachSegment {
            pair_index: *pair_index,
            body,
            span: (*start, end),
            answer: None,
        });
    }
    Ok(segments)
}

static CHOICE_PAREN_RE: Lazy<Regex> = Lazy::new(|| Regex::new(r"\(([A-Za-z])\)").unwrap());
static ANSWER_IS_RE: Lazy<Regex> = Lazy::new(|| Regex::new(r"(?i)answer\s+is\b").unwrap());

/// Pull the chosen option letter out of a completion. The last "answer is"
/// clause wins; a standalone parenthesized label elsewhere is the fallback.
pub fn extract_choice(text: &str, options: &[char]) -> Result<Extraction, ExtractError> {
    if options.is_empty() {
        return Err(ExtractError::NoChoice);
    }
    let in_options = |c: char| options.iter().any(|o| o.eq_ignore_ascii_case(&c));

    if let Some(m) = ANSWER_IS_RE.find_iter(text).last() {
        let clause_end = text[m.end()..]
            .find('\n')
            .map(|i| m.end() + i)
            .unwrap_or(text.len());
        let clause = &text[m.end()..clause_end];
        if let Some(cap) = CHOICE_PAREN_RE
            .captures_iter(clause)
            .find(|cap| in_options(cap[1].chars().next().unwrap()))
        {
            let ch = cap[1].chars().next().unwrap().to_ascii_uppercase();
            let g = cap.get(1).unwrap();
            return Ok(Extraction {
                answer: ExtractedAnswer::Choice(ch),
                span: (m.end() + g.start(), m.end() + g.end()),
            });
        }
        // "answer is B" without parentheses
        for token in clause.split(|c: char| !c.is_ascii_alphanumeric()) {
            let mut chars = token.chars();
            if let (Some(ch), None) = (chars.next(), chars.next()) {
                if in_options(ch) {
                    let off = clause.find(token).unwrap_or(0);
                    return Ok(Extraction {
                        answer: ExtractedAnswer::Choice(ch.to_ascii_uppercase()),
                        span: (m.end() + off, m.end() + off + token.len()),
                    });
                }
            }
        }
    }

    // Fallback: the last standalone parenthesized option label anywhere.
    if let Some(cap) = CHOICE_PAREN_RE
        .captures_iter(text)
        .filter(|cap| in_options(cap[1].chars().next().unwrap()))
        .last()
    {
        let ch = cap[1].chars().next().unwrap().to_ascii_uppercase();
        let g = cap.get(1).unwrap();
        return Ok(Extraction {
            answer: ExtractedAnswer::Choice(ch),
            span: (g.start(), g.end()),
        });
    }
    Err(ExtractError::NoChoice)
}

static NUMBER_RE: Lazy<Regex> =
    Lazy::new(|| Regex::new(r"[-+]?\$?\d[\d,]*(?:\.\d+)?(?:\s*/\s*\d[\d,]*)?").unwrap());
static ANSWER_RE: Lazy<Regex> = Lazy::new(|| Regex::new(r"(?i)answer").unwrap());

/// Parse a number token ("1,392", "$3/2", "0.25", "-7") into an exact
/// rational. Commas and currency signs are stripped.
pub fn parse_rational(token: &str) -> Option<BigRational> {
    let cleaned: String = token
        .chars()
        .filter(|c| !matches!(c, ',' | '$' | ' '))
        .collect();
    let (sign, rest) = match cleaned.strip_prefix('-') {
        Some(r) => (-1, r),
        None => (1, cleaned.strip_prefix('+').unwrap_or(&cleaned)),
    };
    let rational = if let Some((numer, denom)) = rest.split_once('/') {
        let n = num::BigInt::from_str(numer).ok()?;
        let d = num::BigInt::from_str(denom).ok()?;
        if d == num::BigInt::from(0) {
            return None;
        }
        BigRational::new(n, d)
    } else if let Some((int_part, frac_part)) = rest.split_once('.') {
        if frac_part.is_empty() || !frac_part.chars().all(|c| c.is_ascii_digit()) {
            return None;
        }
        let digits = format!("{int_part}{frac_part}");
        let n = num::BigInt::from_str(&digits).ok()?;
        let d = num::BigInt::from(10u32).pow(frac_part.len() as u32);
        BigRational::new(n, d)
    } else {
        BigRational::from_integer(num::BigInt::from_str(rest).ok()?)
    };
    Some(if sign < 0 { -rational } else { rational })
}

/// Pull the last number out of the final "answer" clause of a completion.
pub fn extract_numeric(text: &str) -> Result<Extraction, ExtractError> {
    let m = ANSWER_RE
        .find_iter(text)
        .last()
        .ok_or(ExtractError::NoNumber)?;
    let clause_end = text[m.end()..]
        .find('\n')
        .map(|i| m.end() + i)
        .unwrap_or(text.len());
    let clause = &text[m.end()..clause_end];
    let num_match = NUMBER_RE
        .find_iter(clause)
        .last()
        .ok_or(ExtractError::NoNumber)?;
    let value = parse_rational(num_match.as_str()).ok_or(ExtractError::NoNumber)?;
    Ok(Extraction {
        answer: ExtractedAnswer::Numeric(value),
        span: (m.end() + num_match.start(), m.end() + num_match.end()),
    })
}

const PLAN_MARKERS: &[&str] = &["[PLAN]", "[PLAN END]", "[STATEMENT]"];
static LINE_PREFIX_RE: Lazy<Regex> =
    Lazy::new(|| Regex::new(r"^\s*(?:(?:step\s+)?\d+[.):]\s*|[-*]\s*)?").unwrap());
static TUPLE_RE: Lazy<Regex> = Lazy::new(|| Regex::new(r"\(([^()]*)\)").unwrap());

/// Words that carry no block name in prose action sentences.
const PLAN_FILLER: &[&str] = &[
    "the", "a", "an", "block", "blocks", "from", "on", "top", "of", "onto", "table", "up", "down",
    "it",
];

/// Parse a plan from text. Both tuple lines `(unstack b c)` and prose lines
/// "unstack the blue block from on top of the red block" are accepted;
/// blank lines and plan markers are skipped. Any other line is an error.
pub fn parse_plan(text: &str) -> Result<Vec<BlockAction>, ExtractError> {
    let mut plan = Vec::new();
    for (idx, raw_line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let stripped = LINE_PREFIX_RE.replace(raw_line, "");
        let line = stripped.trim();
        if line.is_empty() || PLAN_MARKERS.iter().any(|m| line.eq_ignore_ascii_case(m)) {
            continue;
        }
        let err = || ExtractError::PlanLine {
            line: line_no,
            text: raw_line.trim().to_string(),
        };
        if line.starts_with('(') {
            let mut any = false;
            for cap in TUPLE_RE.captures_iter(line) {
                any = true;
                plan.push(parse_tuple_action(&cap[1]).ok_or_else(err)?);
            }
            if !any {
                return Err(err());
            }
        } else {
            plan.push(parse_prose_action(line).ok_or_else(err)?);
        }
    }
    Ok(plan)
}

fn parse_tuple_action(inner: &str) -> Option<BlockAction> {
    let tokens: Vec<String> = inner
        .split_whitespace()
        .map(|t| {
            t.trim_matches(|c: char| !c.is_ascii_alphanumeric() && c != '-')
                .to_lowercase()
        })
        .filter(|t| !t.is_empty())
        .collect();
    let (verb, args) = match tokens.split_first()? {
        (v, rest) if v == "pick" || v == "put" => {
            // two-word verbs: "pick up" / "put down"
            let joined = format!("{}-{}", v, rest.first()?);
            (joined, &rest[1..])
        }
        (v, rest) => (v.clone(), rest),
    };
    build_action(&verb, args)
}

fn parse_prose_action(line: &str) -> Option<BlockAction> {
    let lower = line.to_lowercase();
    let verb = if lower.starts_with("pick up") || lower.starts_with("pick-up") {
        "pick-up"
    } else if lower.starts_with("put down") || lower.starts_with("put-down") {
        "put-down"
    } else if lower.starts_with("unstack") {
        "unstack"
    } else if lower.starts_with("stack") {
        "stack"
    } else {
        return None;
    };
    let rest = &lower[verb.len().min(lower.len())..];
    let args: Vec<String> = rest
        .split(|c: char| !c.is_ascii_alphanumeric())
        .filter(|w| !w.is_empty() && !PLAN_FILLER.contains(w))
        .map(|w| w.to_string())
        .collect();
    build_action(verb, &args)
}

fn build_action(verb: &str, args: &[String]) -> Option<BlockAction> {
    let block = |i: usize| args.get(i).map(Block::new);
    match (verb, args.len()) {
        ("pick-up" | "pickup", 1) => Some(BlockAction::PickUp(block(0)?)),
        ("put-down" | "putdown", 1) => Some(BlockAction::PutDown(block(0)?)),
        ("unstack", 2) => Some(BlockAction::Unstack(block(0)?, block(1)?)),
        ("stack", 2) => Some(BlockAction::Stack(block(0)?, block(1)?)),
        _ => None,
    }
}

/// Result of reading a coloring out of a completion: the assignments plus
/// any vertices the text never labeled.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedColoring {
    pub assignments: Coloring,
    pub missing: Vec<u32>,
}

static COLOR_LINE_RE: Lazy<Regex> =
    Lazy::new(|| Regex::new(r"(?m)^\s*(?:Vertex\s+)?(\d+)\s*:\s*(.+?)\s*$").unwrap());
static COLOR_LABEL_RE: Lazy<Regex> = Lazy::new(|| Regex::new(r"(?i)^colou?r\s+(\d+)$").unwrap());

/// Parse "{vertex}: {color}" lines. "Color n" labels map to n; other label
/// strings get first-seen indices above every explicit number so distinct
/// labels never collide. Later duplicate lines override earlier ones.
pub fn parse_coloring(text: &str, n_vertices: u32) -> Result<ParsedColoring, ExtractError> {
    let mut lines: Vec<(u32, String)> = Vec::new();
    for cap in COLOR_LINE_RE.captures_iter(text) {
        let Ok(v) = cap[1].parse::<u32>() else {
            continue;
        };
        if v >= n_vertices {
            continue;
        }
        lines.push((v, cap[2].trim().to_string()));
    }
    if lines.is_empty() {
        return Err(ExtractError::NoColoring);
    }

    let mut max_explicit = 0u32;
    for (_, label) in &lines {
        if let Some(cap) = COLOR_LABEL_RE.captures(label) {
            if let Ok(n) = cap[1].parse::<u32>() {
                max_explicit = max_explicit.max(n);
            }
        }
    }
    let mut arbitrary: BTreeMap<String, u32> = BTreeMap::new();
    let mut next_arbitrary = max_explicit + 1;
    let mut assignments: Coloring = BTreeMap::new();
    for (v, label) in &lines {
        let color = match COLOR_LABEL_RE
            .captures(label)
            .and_then(|c| c[1].parse::<u32>().ok())
        {
            Some(n) => n,
            None => {
                let key = label.to_lowercase();
                *arbitrary.entry(key).or_insert_with(|| {
                    let c = next_arbitrary;
                    next_arbitrary += 1;
                    c
                })
            }
        };
        assignments.insert(*v, color);
    }
    let missing = (0..n_vertices)
        .filter(|v| !assignments.contains_key(v))
        .collect();
    Ok(ParsedColoring {
        assignments,
        missing,
    })
}
