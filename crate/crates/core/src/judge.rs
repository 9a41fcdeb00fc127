//! Chat-model interfaces, the judge prompt and verdict parsing.
//!
//! Transport, caching and retries live in the gateway crate; this module
//! defines the request/response shapes and the traits strategies depend on.

use std::sync::{Arc, OnceLock};

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{content_digest, Candidate, Label, Problem};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Message {
    pub role: Role,
    pub content: String,
}

impl Message {
    pub fn system(content: impl Into<String>) -> Self {
        Message {
            role: Role::System,
            content: content.into(),
        }
    }

    pub fn user(content: impl Into<String>) -> Self {
        Message {
            role: Role::User,
            content: content.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model: String,
    pub messages: Vec<Message>,
    pub temperature: f64,
    /// Distinguishes otherwise identical requests, e.g. voting passes.
    pub seed_nonce: String,
    pub max_tokens: u32,
}

impl ChatRequest {
    pub fn validate(&self) -> Result<(), ChatError> {
        if self.messages.is_empty() {
            return Err(ChatError::InvalidRequest("no messages".into()));
        }
        if !(self.temperature >= 0.0 && self.temperature.is_finite()) {
            return Err(ChatError::InvalidRequest(format!("temperature {}", self.temperature)));
        }
        if self.max_tokens == 0 {
            return Err(ChatError::InvalidRequest("max_tokens must be positive".into()));
        }
        Ok(())
    }

    pub fn with_nonce(mut self, nonce: impl Into<String>) -> Self {
        self.seed_nonce = nonce.into();
        self
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ChatError {
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("authentication failed: {0}")]
    Auth(String),
    #[error("transient failure: {0}")]
    Transient(String),
    #[error("gave up after {attempts} attempts: {last}")]
    Exhausted { attempts: u32, last: String },
    #[error("malformed response: {0}")]
    Malformed(String),
    #[error("offline mode and no cached response for {0}")]
    CacheMiss(String),
    #[error("endpoint not configured: {0}")]
    NotConfigured(String),
}

impl ChatError {
    /// Worth retrying with backoff.
    pub fn is_transient(&self) -> bool {
        matches!(self, ChatError::Transient(_))
    }
}

pub trait ChatModel: Send + Sync {
    fn complete(&self, request: &ChatRequest) -> Result<String, ChatError>;
}

pub trait Embedder: Send + Sync {
    fn embed(&self, text: &str) -> Result<Vec<f64>, ChatError>;
}

impl<T: ChatModel + ?Sized> ChatModel for Arc<T> {
    fn complete(&self, request: &ChatRequest) -> Result<String, ChatError> {
        (**self).complete(request)
    }
}

impl<T: Embedder + ?Sized> Embedder for Arc<T> {
    fn embed(&self, text: &str) -> Result<Vec<f64>, ChatError> {
        (**self).embed(text)
    }
}

// ---- judge prompt ---------------------------------------------------------

pub const TRUNCATION_MARKER: &str = "[... truncated ...]";

pub const SECTION_SEMANTICS: &str = "Code semantic analysis";
pub const SECTION_TESTS: &str = "Test case generation";
pub const SECTION_CORRECTNESS: &str = "Functional correctness assessment";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct JudgePromptConfig {
    pub model: String,
    pub temperature: f64,
    pub max_tokens: u32,
    /// Per-field character budget for the specification and the code.
    pub char_budget: usize,
    pub semantic_analysis: bool,
    pub test_generation: bool,
    pub correctness_assessment: bool,
}

impl Default for JudgePromptConfig {
    fn default() -> Self {
        JudgePromptConfig {
            model: "judge".into(),
            temperature: 0.6,
            max_tokens: 1024,
            char_budget: 12_000,
            semantic_analysis: true,
            test_generation: true,
            correctness_assessment: true,
        }
    }
}

impl JudgePromptConfig {
    pub fn system_prompt(&self) -> String {
        let sections = [
            (
                self.semantic_analysis,
                SECTION_SEMANTICS,
                "Explain what the implementation computes: its ports, data flow, and behavior on every path.",
            ),
            (
                self.test_generation,
                SECTION_TESTS,
                "Propose concrete input cases, including edge cases, and work out the outputs the implementation produces for each.",
            ),
            (
                self.correctness_assessment,
                SECTION_CORRECTNESS,
                "Compare that behavior with the specification and list every mismatch.",
            ),
        ];
        let mut s = String::from(
            "You review Verilog implementations against natural-language specifications.\n\
             Work through the following sections in order, each under its own heading.\n",
        );
        for (i, (_, title, body)) in sections.iter().filter(|s| s.0).enumerate() {
            s.push_str(&format!("\n## {}. {title}\n{body}\n", i + 1));
        }
        s.push_str(
            "\nEnd with exactly one final line: `VERDICT: PASS` if the implementation is \
             functionally correct, otherwise `VERDICT: FAIL`.",
        );
        s
    }

    /// Digest over everything that shapes the request besides its inputs.
    pub fn template_digest(&self) -> String {
        let canonical = serde_json::json!({
            "system": self.system_prompt(),
            "user": user_prompt("{spec}", "{code}"),
            "config": self,
        });
        content_digest(canonical.to_string().as_bytes())
    }
}

fn truncate(text: &str, budget: usize) -> String {
    match text.char_indices().nth(budget) {
        None => text.to_string(),
        Some((cut, _)) => format!("{}\n{TRUNCATION_MARKER}", &text[..cut]),
    }
}

fn user_prompt(spec: &str, code: &str) -> String {
    format!("Specification:\n```text\n{spec}\n```\n\nImplementation:\n```verilog\n{code}\n```\n")
}

pub fn build_judge_prompt(problem: &Problem, candidate: &Candidate, config: &JudgePromptConfig) -> ChatRequest {
    let user = user_prompt(
        &truncate(&problem.spec, config.char_budget),
        &truncate(&candidate.source, config.char_budget),
    );
    ChatRequest {
        model: config.model.clone(),
        messages: vec![Message::system(config.system_prompt()), Message::user(user)],
        temperature: config.temperature,
        seed_nonce: String::new(),
        max_tokens: config.max_tokens,
    }
}

// ---- verdicts -------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParseQuality {
    Clean,
    Salvaged,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub prediction: Label,
    pub reasoning: String,
    pub raw: String,
    pub parse_quality: ParseQuality,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("no verdict found in response ({} chars)", raw.len())]
pub struct UnparseableVerdict {
    pub raw: String,
}

fn verdict_line() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?im)^[\s*#>`]*verdict\s*[:\-]\s*[*`]*\s*(pass|fail)\b").expect("regex"))
}

fn keyword() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?i)\b(pass|fail)\b").expect("regex"))
}

/// Extracts the judge's decision: the last `VERDICT: PASS|FAIL` line, or
/// failing that the last standalone `pass`/`fail` word.
pub fn parse_verdict(response: &str) -> Result<Verdict, UnparseableVerdict> {
    let word = |m: &str| Label::from_pass(m.eq_ignore_ascii_case("pass"));
    if let Some(c) = verdict_line().captures_iter(response).last() {
        let line_start = c.get(0).expect("match").start();
        return Ok(Verdict {
            prediction: word(&c[1]),
            reasoning: response[..line_start].trim().to_string(),
            raw: response.to_string(),
            parse_quality: ParseQuality::Clean,
        });
    }
    match keyword().find_iter(response).last() {
        Some(m) => Ok(Verdict {
            prediction: word(m.as_str()),
            reasoning: response.trim().to_string(),
            raw: response.to_string(),
            parse_quality: ParseQuality::Salvaged,
        }),
        None => Err(UnparseableVerdict {
            raw: response.to_string(),
        }),
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum JudgeError {
    #[error(transparent)]
    Chat(#[from] ChatError),
    #[error(transparent)]
    Unparseable(#[from] UnparseableVerdict),
}

/// Source of pass/fail judgments. `pass_index` numbers independent voting
/// passes; implementations must make passes distinguishable.
pub trait Judge: Send + Sync {
    fn verdict(&self, problem: &Problem, candidate: &Candidate, pass_index: usize) -> Result<Verdict, JudgeError>;
}

impl<T: Judge + ?Sized> Judge for Arc<T> {
    fn verdict(&self, problem: &Problem, candidate: &Candidate, pass_index: usize) -> Result<Verdict, JudgeError> {
        (**self).verdict(problem, candidate, pass_index)
    }
}

/// Judge backed by a chat model; pass `j` uses nonce `vote-{j}`.
pub struct LlmJudge<C> {
    pub chat: C,
    pub config: JudgePromptConfig,
}

impl<C: ChatModel> LlmJudge<C> {
    pub fn new(chat: C, config: JudgePromptConfig) -> Self {
        LlmJudge { chat, config }
    }
}

impl<C: ChatModel> Judge for LlmJudge<C> {
    fn verdict(&self, problem: &Problem, candidate: &Candidate, pass_index: usize) -> Result<Verdict, JudgeError> {
        let req = build_judge_prompt(problem, candidate, &self.config).with_nonce(format!("vote-{pass_index}"));
        let text = self.chat.complete(&req)?;
        Ok(parse_verdict(&text)?)
    }
}

// ---- generation -----------------------------------------------------------

/// Produces candidate implementations for a specification.
pub trait Generator: Send + Sync {
    fn generate(&self, spec: &str, n: usize) -> Result<Vec<String>, ChatError>;
}

/// Produces test programs for the execution backend in use.
pub trait TestGenerator: Send + Sync {
    fn generate_tests(&self, problem: &Problem, candidate: &Candidate, n: usize) -> Result<Vec<String>, ChatError>;
}

impl<T: Generator + ?Sized> Generator for Arc<T> {
    fn generate(&self, spec: &str, n: usize) -> Result<Vec<String>, ChatError> {
        (**self).generate(spec, n)
    }
}

impl<T: TestGenerator + ?Sized> TestGenerator for Arc<T> {
    fn generate_tests(&self, problem: &Problem, candidate: &Candidate, n: usize) -> Result<Vec<String>, ChatError> {
        (**self).generate_tests(problem, candidate, n)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplingConfig {
    pub model: String,
    pub temperature: f64,
    pub max_tokens: u32,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        SamplingConfig {
            model: "generator".into(),
            temperature: 0.8,
            max_tokens: 2048,
        }
    }
}

/// Body of the last fenced block tagged with one of `tags` (or untagged), or
/// the whole text when there is no fence.
pub fn extract_fenced(text: &str, tags: &[&str]) -> String {
    static RE: OnceLock<Regex> = OnceLock::new();
    let re = RE.get_or_init(|| Regex::new(r"(?s)```([A-Za-z0-9_+-]*)[^\n]*\n(.*?)```").expect("regex"));
    re.captures_iter(text)
        .filter(|c| c[1].is_empty() || tags.iter().any(|t| c[1].eq_ignore_ascii_case(t)))
        .last()
        .map(|c| c[2].trim_end().to_string())
        .unwrap_or_else(|| text.trim().to_string())
}

/// Generator that samples a chat model `n` times with nonces `sample-{i}`.
pub struct LlmGenerator<C> {
    pub chat: C,
    pub config: SamplingConfig,
}

impl<C: ChatModel> Generator for LlmGenerator<C> {
    fn generate(&self, spec: &str, n: usize) -> Result<Vec<String>, ChatError> {
        (0..n)
            .map(|i| {
                let req = ChatRequest {
                    model: self.config.model.clone(),
                    messages: vec![
                        Message::system(
                            "Write a synthesizable Verilog module that implements the specification. \
                             Reply with the module in a single ```verilog code block.",
                        ),
                        Message::user(spec),
                    ],
                    temperature: self.config.temperature,
                    seed_nonce: format!("sample-{i}"),
                    max_tokens: self.config.max_tokens,
                };
                Ok(extract_fenced(
                    &self.chat.complete(&req)?,
                    &["verilog", "v", "systemverilog"],
                ))
            })
            .collect()
    }
}

/// Test generator that asks a chat model for stimulus tables in JSON.
pub struct LlmTestGenerator<C> {
    pub chat: C,
    pub config: SamplingConfig,
}

impl<C: ChatModel> TestGenerator for LlmTestGenerator<C> {
    fn generate_tests(&self, problem: &Problem, candidate: &Candidate, n: usize) -> Result<Vec<String>, ChatError> {
        (0..n)
            .map(|i| {
                let req = ChatRequest {
                    model: self.config.model.clone(),
                    messages: vec![
                        Message::system(
                            "Write one test for the Verilog module below as JSON with keys `inputs` and \
                             `expected`: parallel lists of objects mapping port names to bit strings \
                             (MSB first). Derive expected outputs from the specification, not the code. \
                             Reply with a single ```json code block.",
                        ),
                        Message::user(user_prompt(&problem.spec, &candidate.source)),
                    ],
                    temperature: self.config.temperature,
                    seed_nonce: format!("{}-test-{i}", candidate.candidate_id),
                    max_tokens: self.config.max_tokens,
                };
                Ok(extract_fenced(&self.chat.complete(&req)?, &["json"]))
            })
            .collect()
    }
}
