//! Uniform chat-completion access: live HTTP, record, replay, and scripted
//! backends behind one [`Gateway`] trait, plus token and dollar-cost
//! accounting.
//!
//! Cost arithmetic is exact: amounts are integer nanodollars and price rates
//! are integer microdollars per 1k tokens, so per-token charges never round.

mod live;
mod scripted;
mod transcript;

pub use live::{LiveConfig, LiveGateway, RetryPolicy};
pub use scripted::{ScriptEntry, ScriptedGateway};
pub use transcript::{RecordingGateway, ReplayGateway, TranscriptEntry, TranscriptStore};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::fmt;
use thiserror::Error;

/// Sampling temperature for self-consistency runs.
pub const SC_TEMPERATURE: f32 = 0.7;
/// Temperature for every non-SC run (greedy decoding).
pub const GREEDY_TEMPERATURE: f32 = 0.0;

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("backend transport exhausted after {attempts} attempts: {last}")]
    TransportExhausted { attempts: u32, last: String },
    #[error("no transcript entry for request key {key}")]
    ReplayMiss { key: String },
    #[error("scripted backend has no response matching the request")]
    ScriptMiss,
    #[error("transcript store i/o failure at {path}: {source}")]
    Store {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed transcript entry {key}: {reason}")]
    CorruptEntry { key: String, reason: String },
    #[error("missing API key: set the {var} environment variable")]
    MissingApiKey { var: String },
    #[error("invalid request: {0}")]
    InvalidRequest(String),
}

/// One chat message in a request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Message {
    pub role: String,
    pub content: String,
}

impl Message {
    pub fn user(content: impl Into<String>) -> Self {
        Message {
            role: "user".into(),
            content: content.into(),
        }
    }

    pub fn system(content: impl Into<String>) -> Self {
        Message {
            role: "system".into(),
            content: content.into(),
        }
    }
}

/// A chat-completion request. `session` is a caller-chosen tag that feeds the
/// request key so that deliberate re-attempts (fresh sessions) stay distinct
/// in record/replay stores without changing the wire payload.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRequest {
    pub messages: Vec<Message>,
    pub temperature: f32,
    pub n_samples: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_tokens: Option<u32>,
    pub model_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub session: Option<String>,
}

impl GenerationRequest {
    /// Greedy (temperature 0) single-sample request.
    pub fn greedy(model_id: impl Into<String>, messages: Vec<Message>) -> Self {
        GenerationRequest {
            messages,
            temperature: GREEDY_TEMPERATURE,
            n_samples: 1,
            max_tokens: None,
            model_id: model_id.into(),
            session: None,
        }
    }

    /// Self-consistency request: temperature 0.7, `s` samples.
    pub fn sampled(model_id: impl Into<String>, messages: Vec<Message>, s: u32) -> Self {
        GenerationRequest {
            messages,
            temperature: SC_TEMPERATURE,
            n_samples: s,
            max_tokens: None,
            model_id: model_id.into(),
            session: None,
        }
    }

    pub fn with_session(mut self, tag: impl Into<String>) -> Self {
        self.session = Some(tag.into());
        self
    }

    /// Content-addressed key: identical (messages, temperature, n_samples,
    /// max_tokens, model_id, session) yield the identical key.
    pub fn key(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(b"divse-request-v1\n");
        for m in &self.messages {
            hasher.update(m.role.as_bytes());
            hasher.update([0u8]);
            hasher.update(m.content.as_bytes());
            hasher.update([0u8]);
        }
        // Shortest-roundtrip float formatting keeps the key stable across runs.
        hasher.update(format!("{}", self.temperature).as_bytes());
        hasher.update([0u8]);
        hasher.update(self.n_samples.to_le_bytes());
        match self.max_tokens {
            Some(m) => hasher.update(m.to_le_bytes()),
            None => hasher.update([0xffu8; 4]),
        }
        hasher.update([0u8]);
        hasher.update(self.model_id.as_bytes());
        hasher.update([0u8]);
        if let Some(s) = &self.session {
            hasher.update(s.as_bytes());
        }
        let digest = hasher.finalize();
        let mut out = String::with_capacity(64);
        for b in digest {
            out.push_str(&format!("{b:02x}"));
        }
        out
    }
}

/// Token counts for one completion.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenUsage {
    pub input_tokens: u64,
    pub output_tokens: u64,
}

impl TokenUsage {
    pub fn new(input_tokens: u64, output_tokens: u64) -> Self {
        TokenUsage {
            input_tokens,
            output_tokens,
        }
    }

    pub fn add(&mut self, other: TokenUsage) {
        self.input_tokens += other.input_tokens;
        self.output_tokens += other.output_tokens;
    }
}

/// One model completion with its usage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Completion {
    pub text: String,
    pub usage: TokenUsage,
    pub finish_reason: String,
}

/// Estimate a token count from text using the 1000 tokens ≈ 750 words ratio,
/// i.e. ceil(words / 0.75). Words are whitespace-separated runs.
pub fn estimate_tokens(text: &str) -> u64 {
    let words = text.split_whitespace().count() as u64;
    (words * 4).div_ceil(3)
}

/// An exact dollar amount, stored as integer nanodollars (10^-9 USD).
///
/// Rates are microdollars per 1k tokens, so one token costs exactly
/// `rate` nanodollars and cost sums stay exact to well past six decimals.
#[derive(
    Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize, Hash,
)]
#[serde(transparent)]
pub struct Usd(pub u128);

impl Usd {
    pub const ZERO: Usd = Usd(0);

    pub fn from_nano(nano: u128) -> Self {
        Usd(nano)
    }

    pub fn nano(self) -> u128 {
        self.0
    }

    /// Parse a decimal dollar string such as "0.09" with at most 9 fractional
    /// digits.
    pub fn parse(s: &str) -> Result<Usd, PriceParseError> {
        let s = s.trim().trim_start_matches('$');
        let (int_part, frac_part) = match s.split_once('.') {
            Some((i, f)) => (i, f),
            None => (s, ""),
        };
        if int_part.is_empty() && frac_part.is_empty() {
            return Err(PriceParseError::Malformed(s.to_string()));
        }
        if frac_part.len() > 9 {
            return Err(PriceParseError::TooPrecise(s.to_string()));
        }
        let int: u128 = if int_part.is_empty() {
            0
        } else {
            int_part
                .parse()
                .map_err(|_| PriceParseError::Malformed(s.to_string()))?
        };
        let mut frac: u128 = 0;
        if !frac_part.is_empty() {
            frac = frac_part
                .parse()
                .map_err(|_| PriceParseError::Malformed(s.to_string()))?;
            frac *= 10u128.pow(9 - frac_part.len() as u32);
        }
        Ok(Usd(int * 1_000_000_000 + frac))
    }

    pub fn checked_add(self, other: Usd) -> Usd {
        Usd(self.0 + other.0)
    }

    /// Decimal string with no dollar sign, trailing zeros trimmed but at
    /// least one fractional digit ("0.09", "0.008", "12.0").
    pub fn to_decimal_string(self) -> String {
        let dollars = self.0 / 1_000_000_000;
        let frac = self.0 % 1_000_000_000;
        let mut frac_str = format!("{frac:09}");
        while frac_str.len() > 1 && frac_str.ends_with('0') {
            frac_str.pop();
        }
        format!("{dollars}.{frac_str}")
    }
}

impl fmt::Display for Usd {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "${}", self.to_decimal_string())
    }
}

impl std::iter::Sum for Usd {
    fn sum<I: Iterator<Item = Usd>>(iter: I) -> Usd {
        iter.fold(Usd::ZERO, Usd::checked_add)
    }
}

#[derive(Debug, Error)]
pub enum PriceParseError {
    #[error("malformed decimal amount: {0:?}")]
    Malformed(String),
    #[error("amount {0:?} has more than 9 fractional digits")]
    TooPrecise(String),
}

/// Per-model input/output prices, in microdollars per 1k tokens.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PriceTable {
    pub model_id: String,
    /// Microdollars per 1k input tokens (equivalently nanodollars per token).
    pub input_micro_per_1k: u64,
    /// Microdollars per 1k output tokens.
    pub output_micro_per_1k: u64,
}

impl PriceTable {
    /// Build from per-1k-token dollar strings, e.g. `("gpt-4", "0.03", "0.06")`.
    /// Rates must have at most six decimal places so per-token charges stay
    /// exact integers.
    pub fn from_rates(
        model_id: impl Into<String>,
        input_usd_per_1k: &str,
        output_usd_per_1k: &str,
    ) -> Result<PriceTable, PriceParseError> {
        let to_micro = |s: &str| -> Result<u64, PriceParseError> {
            let nano = Usd::parse(s)?.nano();
            if nano % 1000 != 0 {
                return Err(PriceParseError::TooPrecise(s.to_string()));
            }
            Ok((nano / 1000) as u64)
        };
        Ok(PriceTable {
            model_id: model_id.into(),
            input_micro_per_1k: to_micro(input_usd_per_1k)?,
            output_micro_per_1k: to_micro(output_usd_per_1k)?,
        })
    }

    /// GPT-4 (8K) rates: $0.03/1k input, $0.06/1k output.
    pub fn gpt4() -> PriceTable {
        PriceTable::from_rates("gpt-4", "0.03", "0.06").expect("static rates")
    }

    /// GPT-3.5 Turbo (16K) rates: $0.003/1k input, $0.004/1k output.
    pub fn gpt35_turbo() -> PriceTable {
        PriceTable::from_rates("gpt-3.5-turbo", "0.003", "0.004").expect("static rates")
    }
}

/// Exact cost of one usage record under a price table.
pub fn compute_cost(usage: TokenUsage, prices: &PriceTable) -> Usd {
    // micro-USD per 1k tokens == nano-USD per token, so this is exact.
    Usd(
        usage.input_tokens as u128 * prices.input_micro_per_1k as u128
            + usage.output_tokens as u128 * prices.output_micro_per_1k as u128,
    )
}

/// Backend selection for a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendMode {
    Live,
    Record,
    Replay,
    Scripted,
}

/// Uniform chat-completion access. Implementations are shareable across
/// threads; callers match results to requests by key, not arrival order.
pub trait Gateway: Send + Sync {
    /// Returns exactly `req.n_samples` completions.
    fn complete(&self, req: &GenerationRequest) -> Result<Vec<Completion>, GatewayError>;
}
