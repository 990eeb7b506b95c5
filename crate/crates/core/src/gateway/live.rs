//! Live OpenAI-compatible chat-completion backend.
//!
//! Transient transport failures (connect errors, 429, 5xx) are retried with
//! jittered exponential backoff. Usage comes from the provider response when
//! present, otherwise from the word-ratio estimate.

use super::{estimate_tokens, Completion, Gateway, GatewayError, GenerationRequest, TokenUsage};
use rand::Rng;
use serde::Deserialize;
use std::time::Duration;

/// Retry schedule for transient failures: `retries` extra attempts after the
/// first, starting at `base` and doubling, with up to 50% added jitter.
#[derive(Debug, Clone)]
pub struct RetryPolicy {
    pub retries: u32,
    pub base: Duration,
    pub factor: f64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            retries: 3,
            base: Duration::from_secs(1),
            factor: 2.0,
        }
    }
}

impl RetryPolicy {
    fn delay(&self, attempt: u32) -> Duration {
        let raw = self.base.as_secs_f64() * self.factor.powi(attempt as i32);
        let jitter = rand::thread_rng().gen_range(0.0..0.5);
        Duration::from_secs_f64(raw * (1.0 + jitter))
    }
}

#[derive(Debug, Clone)]
pub struct LiveConfig {
    pub endpoint: String,
    /// Name of the environment variable holding the API key.
    pub api_key_env: String,
    pub retry: RetryPolicy,
    pub timeout: Duration,
}

impl Default for LiveConfig {
    fn default() -> Self {
        LiveConfig {
            endpoint: "https://api.openai.com/v1/chat/completions".into(),
            api_key_env: "OPENAI_API_KEY".into(),
            retry: RetryPolicy::default(),
            timeout: Duration::from_secs(120),
        }
    }
}

pub struct LiveGateway {
    config: LiveConfig,
    api_key: String,
    client: reqwest::blocking::Client,
}

impl LiveGateway {
    pub fn new(config: LiveConfig) -> Result<LiveGateway, GatewayError> {
        let api_key =
            std::env::var(&config.api_key_env).map_err(|_| GatewayError::MissingApiKey {
                var: config.api_key_env.clone(),
            })?;
        let client = reqwest::blocking::Client::builder()
            .timeout(config.timeout)
            .build()
            .map_err(|e| GatewayError::InvalidRequest(e.to_string()))?;
        Ok(LiveGateway {
            config,
            api_key,
            client,
        })
    }

    fn attempt(&self, req: &GenerationRequest) -> Result<Vec<Completion>, AttemptError> {
        let body = serde_json::json!({
            "model": req.model_id,
            "messages": req.messages,
            "temperature": req.temperature,
            "n": req.n_samples,
            "max_tokens": req.max_tokens,
        });
        let resp = self
            .client
            .post(&self.config.endpoint)
            .bearer_auth(&self.api_key)
            .json(&body)
            .send()
            .map_err(|e| AttemptError::Transient(e.to_string()))?;

        let status = resp.status();
        if status.as_u16() == 429 || status.is_server_error() {
            return Err(AttemptError::Transient(format!("http {status}")));
        }
        if !status.is_success() {
            let text = resp.text().unwrap_or_default();
            return Err(AttemptError::Fatal(format!("http {status}: {text}")));
        }

        let parsed: ChatResponse = resp
            .json()
            .map_err(|e| AttemptError::Fatal(format!("bad response body: {e}")))?;
        let prompt_text: String = req
            .messages
            .iter()
            .map(|m| m.content.as_str())
            .collect::<Vec<_>>()
            .join("\n");
        let n = parsed.choices.len().max(1) as u64;
        let completions = parsed
            .choices
            .into_iter()
            .map(|c| {
                let usage = match &parsed.usage {
                    Some(u) => TokenUsage::new(
                        u.prompt_tokens / n.max(1),
                        estimate_or(&c.message.content, u.completion_tokens / n),
                    ),
                    None => TokenUsage::new(
                        estimate_tokens(&prompt_text),
                        estimate_tokens(&c.message.content),
                    ),
                };
                Completion {
                    text: c.message.content,
                    usage,
                    finish_reason: c.finish_reason.unwrap_or_else(|| "stop".into()),
                }
            })
            .collect();
        Ok(completions)
    }
}

fn estimate_or(text: &str, provider: u64) -> u64 {
    if provider > 0 {
        provider
    } else {
        estimate_tokens(text)
    }
}

enum AttemptError {
    Transient(String),
    Fatal(String),
}

impl Gateway for LiveGateway {
    fn complete(&self, req: &GenerationRequest) -> Result<Vec<Completion>, GatewayError> {
        let mut last = String::new();
        for attempt in 0..=self.config.retry.retries {
            match self.attempt(req) {
                Ok(out) => return Ok(out),
                Err(AttemptError::Fatal(msg)) => {
                    return Err(GatewayError::TransportExhausted {
                        attempts: attempt + 1,
                        last: msg,
                    })
                }
                Err(AttemptError::Transient(msg)) => {
                    last = msg;
                    if attempt < self.config.retry.retries {
                        std::thread::sleep(self.config.retry.delay(attempt));
                    }
                }
            }
        }
        Err(GatewayError::TransportExhausted {
            attempts: self.config.retry.retries + 1,
            last,
        })
    }
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<ChatChoice>,
    usage: Option<ChatUsage>,
}

#[derive(Deserialize)]
struct ChatChoice {
    message: ChatMessage,
    finish_reason: Option<String>,
}

#[derive(Deserialize)]
struct ChatMessage {
    content: String,
}

#[derive(Deserialize)]
struct ChatUsage {
    prompt_tokens: u64,
    completion_tokens: u64,
}
