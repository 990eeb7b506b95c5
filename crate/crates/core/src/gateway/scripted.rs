//! Deterministic scripted backend for tests and fixture construction.
//!
//! Rules are matched in order against the concatenated message contents.
//! Each rule carries a response sequence: repeated hits pop the next entry
//! and the final entry repeats once the sequence is exhausted.

use super::{estimate_tokens, Completion, Gateway, GatewayError, GenerationRequest, TokenUsage};
use std::sync::Mutex;

#[derive(Debug)]
pub struct ScriptEntry {
    matcher: Option<String>,
    responses: Vec<String>,
    cursor: Mutex<usize>,
}

impl ScriptEntry {
    fn matches(&self, prompt: &str) -> bool {
        match &self.matcher {
            Some(needle) => prompt.contains(needle),
            None => true,
        }
    }
}

#[derive(Debug, Default)]
pub struct ScriptedGateway {
    entries: Vec<ScriptEntry>,
}

impl ScriptedGateway {
    pub fn new() -> Self {
        ScriptedGateway::default()
    }

    /// A catch-all backend that always returns `text`.
    pub fn respond_with(text: impl Into<String>) -> Self {
        let mut g = ScriptedGateway::new();
        g.push_default(text);
        g
    }

    /// Requests whose rendered prompt contains `needle` get `response`.
    pub fn push_rule(&mut self, needle: impl Into<String>, response: impl Into<String>) {
        self.push_sequence(needle, vec![response.into()]);
    }

    /// Like [`push_rule`](Self::push_rule) but successive hits walk the
    /// sequence; the last element repeats.
    pub fn push_sequence(&mut self, needle: impl Into<String>, responses: Vec<String>) {
        assert!(!responses.is_empty(), "script sequences must be nonempty");
        self.entries.push(ScriptEntry {
            matcher: Some(needle.into()),
            responses,
            cursor: Mutex::new(0),
        });
    }

    /// Fallback response used when no earlier rule matched.
    pub fn push_default(&mut self, response: impl Into<String>) {
        self.entries.push(ScriptEntry {
            matcher: None,
            responses: vec![response.into()],
            cursor: Mutex::new(0),
        });
    }
}

impl Gateway for ScriptedGateway {
    fn complete(&self, req: &GenerationRequest) -> Result<Vec<Completion>, GatewayError> {
        let prompt: String = req
            .messages
            .iter()
            .map(|m| m.content.as_str())
            .collect::<Vec<_>>()
            .join("\n");
        let entry = self
            .entries
            .iter()
            .find(|e| e.matches(&prompt))
            .ok_or(GatewayError::ScriptMiss)?;
        let input_tokens = estimate_tokens(&prompt);
        let mut out = Vec::with_capacity(req.n_samples as usize);
        for _ in 0..req.n_samples {
            let text = {
                let mut cursor = entry.cursor.lock().expect("script cursor");
                let text = entry.responses[(*cursor).min(entry.responses.len() - 1)].clone();
                *cursor += 1;
                text
            };
            let usage = TokenUsage::new(input_tokens, estimate_tokens(&text));
            out.push(Completion {
                text,
                usage,
                finish_reason: "stop".into(),
            });
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::Message;

    #[test]
    fn scripted_matches_and_estimates_usage() {
        let mut g = ScriptedGateway::new();
        g.push_rule("6 x 7", "The answer is: (A) 50");
        g.push_default("no idea");

        let req = GenerationRequest::greedy("m", vec![Message::user("What is 6 x 7?")]);
        let out = g.complete(&req).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].text, "The answer is: (A) 50");
        assert_eq!(out[0].usage.input_tokens, estimate_tokens("What is 6 x 7?"));
        assert_eq!(
            out[0].usage.output_tokens,
            estimate_tokens("The answer is: (A) 50")
        );

        let req = GenerationRequest::greedy("m", vec![Message::user("something else")]);
        assert_eq!(g.complete(&req).unwrap()[0].text, "no idea");
    }

    #[test]
    fn sampled_requests_get_n_completions() {
        let g = ScriptedGateway::respond_with("sampled text");
        let req = GenerationRequest::sampled("m", vec![Message::user("q")], 10);
        assert_eq!(g.complete(&req).unwrap().len(), 10);
    }

    #[test]
    fn sequences_advance_and_saturate() {
        let mut g = ScriptedGateway::new();
        g.push_sequence("q", vec!["first".into(), "second".into()]);
        let req = GenerationRequest::greedy("m", vec![Message::user("q")]);
        assert_eq!(g.complete(&req).unwrap()[0].text, "first");
        assert_eq!(g.complete(&req).unwrap()[0].text, "second");
        assert_eq!(g.complete(&req).unwrap()[0].text, "second");
    }

    #[test]
    fn unmatched_request_is_a_script_miss() {
        let mut g = ScriptedGateway::new();
        g.push_rule("specific", "r");
        let req = GenerationRequest::greedy("m", vec![Message::user("other")]);
        assert!(matches!(g.complete(&req), Err(GatewayError::ScriptMiss)));
    }
}
