//! Answer aggregation: majority vote, canonical-plan vote, verifier-gated
//! selection for colorings, and meta-reasoning over stored responses.
//!
//! Abstained votes (extraction failures) never enter a tally. Ties break by
//! the lowest pair index among the tied answers, which favors the
//! higher-ranked strategy and keeps replays deterministic.

use crate::blocksworld::canonicalize_plan;
use crate::coloring::{verify_coloring, Coloring, Graph};
use crate::extract::{extract_choice, extract_numeric, ExtractedAnswer};
use crate::gateway::{Gateway, GatewayError, GenerationRequest, Message};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

/// One approach's vote: its position in the prompt's pair order and the
/// extracted answer, or `None` for an abstention.
#[derive(Debug, Clone, PartialEq)]
pub struct Vote {
    pub pair_index: usize,
    pub answer: Option<ExtractedAnswer>,
}

impl Vote {
    pub fn new(pair_index: usize, answer: Option<ExtractedAnswer>) -> Vote {
        Vote { pair_index, answer }
    }
}

/// An ordered collection of votes for one question.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Ballot {
    pub votes: Vec<Vote>,
}

impl Ballot {
    pub fn new(votes: Vec<Vote>) -> Ballot {
        Ballot { votes }
    }

    pub fn is_empty(&self) -> bool {
        self.votes.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AggregationMethod {
    Majority,
    PlanMajority,
    Verified,
    Meta,
}

/// Result of aggregating one ballot.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregationResult {
    pub winner: Option<ExtractedAnswer>,
    /// Canonical answer key -> vote count.
    pub tally: BTreeMap<String, usize>,
    /// Two or more answers shared the top count.
    pub tie: bool,
    pub method: AggregationMethod,
    /// The meta path failed and the majority rule decided instead.
    pub fallback: bool,
    /// For verifier-gated selection: rendered violations per rejected
    /// candidate, in pair order.
    pub rejections: Vec<(usize, Vec<String>)>,
}

impl AggregationResult {
    fn new(method: AggregationMethod) -> AggregationResult {
        AggregationResult {
            winner: None,
            tally: BTreeMap::new(),
            tie: false,
            method,
            fallback: false,
            rejections: Vec::new(),
        }
    }
}

#[derive(Debug, Error)]
pub enum AggregateError {
    #[error("cannot aggregate an empty ballot")]
    EmptyBallot,
    #[error("plan aggregation requires every vote to be a plan")]
    NotAPlan,
    #[error("meta-reasoning needs at least two stored responses, got {0}")]
    TooFewResponses(usize),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
}

/// Modal non-abstaining answer; all-abstain ballots produce no winner.
pub fn majority_vote(ballot: &Ballot) -> Result<AggregationResult, AggregateError> {
    if ballot.is_empty() {
        return Err(AggregateError::EmptyBallot);
    }
    Ok(tally_votes(ballot, AggregationMethod::Majority, |a| {
        a.clone()
    }))
}

/// Majority over canonicalized plans: no-op churn does not split votes, and
/// the winner is returned in canonical form.
pub fn plan_majority(ballot: &Ballot) -> Result<AggregationResult, AggregateError> {
    if ballot.is_empty() {
        return Err(AggregateError::EmptyBallot);
    }
    if ballot
        .votes
        .iter()
        .any(|v| !matches!(v.answer, None | Some(ExtractedAnswer::Plan(_))))
    {
        return Err(AggregateError::NotAPlan);
    }
    Ok(tally_votes(
        ballot,
        AggregationMethod::PlanMajority,
        |a| match a {
            ExtractedAnswer::Plan(p) => ExtractedAnswer::Plan(canonicalize_plan(p)),
            other => other.clone(),
        },
    ))
}

fn tally_votes(
    ballot: &Ballot,
    method: AggregationMethod,
    normalize: impl Fn(&ExtractedAnswer) -> ExtractedAnswer,
) -> AggregationResult {
    let mut result = AggregationResult::new(method);
    // key -> (count, lowest pair index, representative answer)
    let mut groups: BTreeMap<String, (usize, usize, ExtractedAnswer)> = BTreeMap::new();
    for vote in &ballot.votes {
        let Some(answer) = &vote.answer else { continue };
        let normalized = normalize(answer);
        let key = normalized.canonical_key();
        let entry = groups
            .entry(key)
            .or_insert_with(|| (0, vote.pair_index, normalized.clone()));
        entry.0 += 1;
        entry.1 = entry.1.min(vote.pair_index);
    }
    result.tally = groups
        .iter()
        .map(|(k, (count, _, _))| (k.clone(), *count))
        .collect();
    let Some(max_count) = groups.values().map(|(c, _, _)| *c).max() else {
        return result; // every vote abstained
    };
    let mut leaders: Vec<&(usize, usize, ExtractedAnswer)> = groups
        .values()
        .filter(|(c, _, _)| *c == max_count)
        .collect();
    leaders.sort_by_key(|(_, first_index, _)| *first_index);
    result.tie = leaders.len() > 1;
    result.winner = Some(leaders[0].2.clone());
    result
}

/// Pick the first candidate coloring (in pair order) that the verifier
/// accepts; when none passes, report every candidate's violations.
pub fn select_verified(candidates: &[(usize, Coloring)], graph: &Graph) -> AggregationResult {
    let mut result = AggregationResult::new(AggregationMethod::Verified);
    let mut ordered: Vec<&(usize, Coloring)> = candidates.iter().collect();
    ordered.sort_by_key(|(i, _)| *i);
    for (pair_index, coloring) in ordered {
        let verdict = verify_coloring(graph, coloring);
        if verdict.is_valid() {
            let answer = ExtractedAnswer::Coloring(coloring.clone());
            result.tally.insert(answer.canonical_key(), 1);
            result.winner = Some(answer);
            return result;
        }
        result.rejections.push((
            *pair_index,
            verdict.violations().iter().map(|v| v.to_string()).collect(),
        ));
    }
    result
}

/// Template for the fresh-session meta-reasoning prompt.
fn meta_prompt(question: &str, responses: &[String]) -> String {
    let mut out = format!(
        "You are given a problem and {} candidate solutions produced with different \
         reasoning approaches. Some may be wrong.\n\nProblem: {question}\n",
        responses.len()
    );
    for (i, response) in responses.iter().enumerate() {
        out.push_str(&format!("\nSolution {}:\n{}\n", i + 1, response.trim()));
    }
    out.push_str(
        "\nReason over the candidate solutions, resolve any disagreements, and give the \
         single most likely final answer. End your response with \"The answer is: ...\".",
    );
    out
}

/// Ask the model to reason over the stored per-approach responses in a fresh
/// session. When no answer can be extracted from the reply, falls back to the
/// majority vote over `ballot` and flags the fallback.
#[allow(clippy::too_many_arguments)]
pub fn meta_reason(
    responses: &[String],
    question: &str,
    option_labels: &[char],
    ballot: &Ballot,
    gateway: &dyn Gateway,
    model_id: &str,
    session: &str,
) -> Result<AggregationResult, AggregateError> {
    if responses.len() < 2 {
        return Err(AggregateError::TooFewResponses(responses.len()));
    }
    let prompt = meta_prompt(question, responses);
    let req =
        GenerationRequest::greedy(model_id, vec![Message::user(prompt)]).with_session(session);
    let completions = gateway.complete(&req)?;
    let text = &completions[0].text;
    let extracted = if option_labels.is_empty() {
        extract_numeric(text).ok().map(|e| e.answer)
    } else {
        extract_choice(text, option_labels).ok().map(|e| e.answer)
    };
    match extracted {
        Some(answer) => {
            let mut result = AggregationResult::new(AggregationMethod::Meta);
            result.tally.insert(answer.canonical_key(), 1);
            result.winner = Some(answer);
            Ok(result)
        }
        None => {
            let mut result = majority_vote(ballot)?;
            result.fallback = true;
            Ok(result)
        }
    }
}
