//! HTTP adapters: completions with echoed token log-probabilities, and chat
//! messages.

use serde_json::{json, Value};

use super::chat::{ChatBackend, ChatMessage};
use super::{Score, ScoreError, Scorer};
use crate::http::{HttpClient, HttpError};

/// `POST {base}/completions` with `echo` and `logprobs`, in the shape of the
/// OpenAI legacy completions endpoint.
pub struct CompletionApi {
    client: HttpClient,
    base: String,
    model: String,
}

impl CompletionApi {
    pub fn new(client: HttpClient, base: &str, model: &str) -> Self {
        Self {
            client,
            base: base.trim_end_matches('/').to_owned(),
            model: model.to_owned(),
        }
    }

    pub fn request(&self, prompt: &str, continuation: &str) -> Value {
        json!({
            "model": self.model,
            "prompt": format!("{prompt}{continuation}"),
            "max_tokens": 0,
            "echo": true,
            "logprobs": 0,
            "temperature": 0.0,
        })
    }
}

fn protocol(msg: impl Into<String>) -> ScoreError {
    ScoreError::Protocol(msg.into())
}

/// Sums the log-probabilities of the tokens at or after character offset
/// `boundary`. A token straddling the boundary is an error.
pub fn sum_after_boundary(response: &Value, boundary: usize, text_chars: usize) -> Result<Score, ScoreError> {
    let lp = &response["choices"][0]["logprobs"];
    let tokens = lp["tokens"].as_array().ok_or_else(|| protocol("missing logprobs.tokens"))?;
    let offsets = lp["text_offset"]
        .as_array()
        .ok_or_else(|| protocol("missing logprobs.text_offset"))?;
    let logps = lp["token_logprobs"]
        .as_array()
        .ok_or_else(|| protocol("missing logprobs.token_logprobs"))?;
    if tokens.len() != offsets.len() || tokens.len() != logps.len() {
        return Err(protocol("logprobs arrays differ in length"));
    }
    let offsets: Vec<usize> = offsets
        .iter()
        .map(|o| o.as_u64().map(|o| o as usize).ok_or_else(|| protocol("non-integer text_offset")))
        .collect::<Result<_, _>>()?;
    let mut score = Score::default();
    for (i, &start) in offsets.iter().enumerate() {
        let end = offsets.get(i + 1).copied().unwrap_or(text_chars);
        if start < boundary && end > boundary {
            return Err(ScoreError::Boundary {
                offset: boundary,
                token: tokens[i].as_str().unwrap_or_default().to_owned(),
            });
        }
        if start >= boundary {
            let logp = logps[i]
                .as_f64()
                .ok_or_else(|| protocol(format!("token {i} has no log-probability")))?;
            score.logp += logp;
            score.tokens += 1;
        }
    }
    Ok(score)
}

impl Scorer for CompletionApi {
    fn score(&self, prompt: &str, continuation: &str) -> Result<Score, ScoreError> {
        if continuation.is_empty() {
            return Ok(Score::default());
        }
        let url = format!("{}/completions", self.base);
        let response = self
            .client
            .post_json_cached(&self.model, &url, &[], &self.request(prompt, continuation))?;
        let boundary = prompt.chars().count();
        sum_after_boundary(&response, boundary, boundary + continuation.chars().count())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ChatFormat {
    /// `POST {base}/chat/completions`, reply in `choices[0].message.content`.
    Openai,
    /// `POST {base}/messages`, reply in `content[0].text`.
    Anthropic,
}

impl std::str::FromStr for ChatFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "openai" => Ok(Self::Openai),
            "anthropic" => Ok(Self::Anthropic),
            other => Err(format!("unknown chat format {other:?}; expected openai or anthropic")),
        }
    }
}

pub struct ChatApi {
    client: HttpClient,
    base: String,
    model: String,
    format: ChatFormat,
}

impl ChatApi {
    pub fn new(client: HttpClient, base: &str, model: &str, format: ChatFormat) -> Self {
        Self {
            client,
            base: base.trim_end_matches('/').to_owned(),
            model: model.to_owned(),
            format,
        }
    }

    pub fn request(&self, messages: &[ChatMessage], temperature: f64) -> Value {
        match self.format {
            ChatFormat::Openai => json!({
                "model": self.model,
                "messages": messages,
                "temperature": temperature,
            }),
            ChatFormat::Anthropic => {
                let system: Vec<&str> = messages
                    .iter()
                    .filter(|m| m.role == "system")
                    .map(|m| m.content.as_str())
                    .collect();
                let rest: Vec<&ChatMessage> = messages.iter().filter(|m| m.role != "system").collect();
                json!({
                    "model": self.model,
                    "system": system.join("\n"),
                    "messages": rest,
                    "max_tokens": 16,
                    "temperature": temperature,
                })
            }
        }
    }
}

impl ChatBackend for ChatApi {
    fn reply(&self, messages: &[ChatMessage], temperature: f64) -> Result<String, HttpError> {
        let body = self.request(messages, temperature);
        let (url, text_at): (String, &[&str]) = match self.format {
            ChatFormat::Openai => (
                format!("{}/chat/completions", self.base),
                &["choices", "0", "message", "content"],
            ),
            ChatFormat::Anthropic => (format!("{}/messages", self.base), &["content", "0", "text"]),
        };
        let token = self.client.token().unwrap_or_default().to_owned();
        let headers: Vec<(&str, &str)> = match self.format {
            ChatFormat::Openai => Vec::new(),
            ChatFormat::Anthropic => vec![("x-api-key", &token), ("anthropic-version", "2023-06-01")],
        };
        let response = self.client.post_json_cached(&self.model, &url, &headers, &body)?;
        let mut v = &response;
        for key in text_at {
            v = match key.parse::<usize>() {
                Ok(i) => &v[i],
                Err(_) => &v[*key],
            };
        }
        v.as_str().map(str::to_owned).ok_or_else(|| HttpError::Decode {
            url,
            message: format!("reply text not found at {}", text_at.join(".")),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::http::testing::serve;
    use crate::http::{ClientConfig, RateLimiter, RetryPolicy};
    use std::sync::Arc;

    fn client() -> HttpClient {
        HttpClient::new(
            ClientConfig {
                token: Some("secret".into()),
                retry: RetryPolicy::none(),
                ..ClientConfig::default()
            },
            Arc::new(RateLimiter::unlimited()),
        )
        .unwrap()
    }

    fn logprobs(tokens: &[&str], logps: &[Option<f64>]) -> Value {
        let mut offsets = Vec::new();
        let mut at = 0;
        for t in tokens {
            offsets.push(at);
            at += t.chars().count();
        }
        json!({"choices": [{"logprobs": {"tokens": tokens, "text_offset": offsets, "token_logprobs": logps}}]})
    }

    #[test]
    fn sums_only_continuation_tokens() {
        let r = logprobs(&["def", " f", "():", "\n", "  pass"], &[None, Some(-1.0), Some(-0.5), Some(-0.25), Some(-2.0)]);
        let s = sum_after_boundary(&r, 8, 15).unwrap();
        assert_eq!(s.tokens, 2);
        assert_eq!(s.logp, -2.25);
    }

    #[test]
    fn straddling_token_is_a_boundary_error() {
        let r = logprobs(&["def", " f():\n", "x"], &[None, Some(-1.0), Some(-1.0)]);
        match sum_after_boundary(&r, 6, 10) {
            Err(ScoreError::Boundary { offset: 6, token }) => assert_eq!(token, " f():\n"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn completion_round_trip_through_fake_server() {
        let body = logprobs(&["ab", "cd", "e"], &[None, Some(-0.5), Some(-0.25)]).to_string();
        let server = serve(move |_, path, _| {
            assert_eq!(path, "/v1/completions");
            (200, body.clone())
        });
        let api = CompletionApi::new(client(), &format!("{}/v1", server.base), "m");
        let s = api.score("ab", "cde").unwrap();
        assert_eq!((s.logp, s.tokens), (-0.75, 2));
        assert_eq!(api.score("ab", "").unwrap().logp, 0.0);
        let sent: Value = serde_json::from_str(&server.requests.lock().unwrap()[0].body).unwrap();
        assert_eq!(sent["prompt"], "abcde");
        assert_eq!(sent["echo"], true);
        assert_eq!(server.requests.lock().unwrap().len(), 1);
    }

    #[test]
    fn chat_formats() {
        let server = serve(|_, path, _| match path {
            "/chat/completions" => (200, r#"{"choices":[{"message":{"content":"2"}}]}"#.into()),
            "/messages" => (200, r#"{"content":[{"type":"text","text":"1"}]}"#.into()),
            _ => (404, "{}".into()),
        });
        let msgs = [ChatMessage::system("s"), ChatMessage::user("u")];
        let openai = ChatApi::new(client(), &server.base, "gpt", ChatFormat::Openai);
        assert_eq!(openai.reply(&msgs, 0.0).unwrap(), "2");
        let anthropic = ChatApi::new(client(), &server.base, "chat-model", ChatFormat::Anthropic);
        assert_eq!(anthropic.reply(&msgs, 0.0).unwrap(), "1");
        let req = anthropic.request(&msgs, 0.0);
        assert_eq!(req["system"], "s");
        assert_eq!(req["messages"].as_array().unwrap().len(), 1);
        let recorded = server.requests.lock().unwrap();
        assert!(recorded.iter().all(|r| r.method == "POST"));
    }
}
