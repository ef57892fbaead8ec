//! Binary-choice protocol for chat models: both programs in one user
//! message, asked twice with the order flipped.

use std::sync::LazyLock;

use rayon::prelude::*;
use regex::Regex;
use serde::{Deserialize, Serialize};

use super::registry::ModelSpec;
use crate::dataset::ClassificationExample;
use crate::http::HttpError;

pub const SYSTEM_PROMPT: &str = "You are a helpful assistant.";
pub const QUESTION: &str =
    "Which program is more likely to be correct? Write only the number of the program and nothing else.";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: &str) -> Self {
        Self {
            role: "system".into(),
            content: content.into(),
        }
    }

    pub fn user(content: &str) -> Self {
        Self {
            role: "user".into(),
            content: content.into(),
        }
    }
}

pub trait ChatBackend: Sync {
    fn reply(&self, messages: &[ChatMessage], temperature: f64) -> Result<String, HttpError>;
}

/// The user message for two complete programs.
pub fn user_message(program_1: &str, program_2: &str) -> String {
    format!(
        "Consider the following Python programs:\n\nProgram 1:\n\n{}\n\nProgram 2:\n\n{}\n\n{QUESTION}",
        program_1.trim_end_matches('\n'),
        program_2.trim_end_matches('\n'),
    )
}

pub fn chat_messages(ex: &ClassificationExample, good_first: bool) -> Vec<ChatMessage> {
    let good = format!("{}{}", ex.prompt, ex.good);
    let bad = format!("{}{}", ex.prompt, ex.bad);
    let (p1, p2) = if good_first { (good, bad) } else { (bad, good) };
    vec![ChatMessage::system(SYSTEM_PROMPT), ChatMessage::user(&user_message(&p1, &p2))]
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ChatAnswer {
    One,
    Two,
    Invalid,
}

static INTEGER: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\d+").expect("valid regex"));

/// The first integer in the reply, if it is 1 or 2.
pub fn parse_chat_answer(text: &str) -> ChatAnswer {
    let Some(m) = INTEGER.find(text) else {
        return ChatAnswer::Invalid;
    };
    match m.as_str().trim_start_matches('0') {
        "1" => ChatAnswer::One,
        "2" => ChatAnswer::Two,
        _ => ChatAnswer::Invalid,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TrialCategory {
    Correct,
    Incorrect,
    Invalid,
    InvalidTransport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChatTrial {
    pub good_position: u8,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reply: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub answer: ChatAnswer,
    pub category: TrialCategory,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChatResult {
    pub id: String,
    /// Good program shown first.
    pub order_ab_answer: ChatAnswer,
    /// Good program shown second.
    pub order_ba_answer: ChatAnswer,
    pub trials: [ChatTrial; 2],
}

fn trial(backend: &dyn ChatBackend, ex: &ClassificationExample, good_first: bool, temperature: f64) -> ChatTrial {
    let good_position = if good_first { 1 } else { 2 };
    match backend.reply(&chat_messages(ex, good_first), temperature) {
        Ok(reply) => {
            let answer = parse_chat_answer(&reply);
            let category = match (answer, good_first) {
                (ChatAnswer::Invalid, _) => TrialCategory::Invalid,
                (ChatAnswer::One, true) | (ChatAnswer::Two, false) => TrialCategory::Correct,
                _ => TrialCategory::Incorrect,
            };
            ChatTrial {
                good_position,
                reply: Some(reply),
                error: None,
                answer,
                category,
            }
        }
        Err(e) => ChatTrial {
            good_position,
            reply: None,
            error: Some(e.to_string()),
            answer: ChatAnswer::Invalid,
            category: TrialCategory::InvalidTransport,
        },
    }
}

pub fn chat_classify(backend: &dyn ChatBackend, ex: &ClassificationExample, temperature: f64) -> ChatResult {
    let ab = trial(backend, ex, true, temperature);
    let ba = trial(backend, ex, false, temperature);
    ChatResult {
        id: ex.id.clone(),
        order_ab_answer: ab.answer,
        order_ba_answer: ba.answer,
        trials: [ab, ba],
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChatReport {
    pub model: ModelSpec,
    pub temperature: f64,
    pub trials: usize,
    pub correct: usize,
    pub incorrect: usize,
    pub invalid: usize,
    pub invalid_transport: usize,
    /// Fractions of all trials.
    pub correct_rate: f64,
    pub incorrect_rate: f64,
    pub invalid_rate: f64,
    pub invalid_transport_rate: f64,
    pub results: Vec<ChatResult>,
}

pub fn run_chat_eval(
    backend: &dyn ChatBackend,
    model: &ModelSpec,
    examples: &[ClassificationExample],
    temperature: f64,
    pool: &rayon::ThreadPool,
) -> ChatReport {
    let results: Vec<ChatResult> = pool.install(|| {
        examples
            .par_iter()
            .map(|ex| chat_classify(backend, ex, temperature))
            .collect()
    });
    let count = |c: TrialCategory| {
        results
            .iter()
            .flat_map(|r| &r.trials)
            .filter(|t| t.category == c)
            .count()
    };
    let trials = results.len() * 2;
    let rate = |n: usize| if trials == 0 { 0.0 } else { n as f64 / trials as f64 };
    let (correct, incorrect, invalid, invalid_transport) = (
        count(TrialCategory::Correct),
        count(TrialCategory::Incorrect),
        count(TrialCategory::Invalid),
        count(TrialCategory::InvalidTransport),
    );
    ChatReport {
        model: model.clone(),
        temperature,
        trials,
        correct,
        incorrect,
        invalid,
        invalid_transport,
        correct_rate: rate(correct),
        incorrect_rate: rate(incorrect),
        invalid_rate: rate(invalid),
        invalid_transport_rate: rate(invalid_transport),
        results,
    }
}

/// A backend replying through a closure over the user message; for tests
/// and dry runs.
pub struct ScriptedChat<F>(pub F);

impl<F> ChatBackend for ScriptedChat<F>
where
    F: Fn(&str) -> Result<String, HttpError> + Sync,
{
    fn reply(&self, messages: &[ChatMessage], _temperature: f64) -> Result<String, HttpError> {
        let user = messages.iter().rev().find(|m| m.role == "user").map_or("", |m| m.content.as_str());
        (self.0)(user)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn answers() {
        assert_eq!(parse_chat_answer("Program 2"), ChatAnswer::Two);
        assert_eq!(parse_chat_answer("1"), ChatAnswer::One);
        assert_eq!(parse_chat_answer("Both look fine"), ChatAnswer::Invalid);
        assert_eq!(parse_chat_answer("I choose option 3 because..."), ChatAnswer::Invalid);
        assert_eq!(parse_chat_answer("12"), ChatAnswer::Invalid);
        assert_eq!(parse_chat_answer("Program 1, not 2"), ChatAnswer::One);
    }

    #[test]
    fn template_layout() {
        let msg = user_message("a = 1\n", "b = 2\n");
        assert_eq!(
            msg,
            "Consider the following Python programs:\n\nProgram 1:\n\na = 1\n\nProgram 2:\n\nb = 2\n\n\
             Which program is more likely to be correct? Write only the number of the program and nothing else."
        );
    }
}
