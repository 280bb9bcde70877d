//! LLM-backed contract synthesis with a three-stage chain-of-thought
//! prompt: task and DSL, behavior reasoning over the code, examples and
//! the last counterexample, then templated generation.
//!
//! Replies are parsed with the IL contract parser. Malformed replies are
//! sent back with the error message, up to a retry cap.

use std::collections::VecDeque;
use std::path::Path;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{OracleError, ProcedureRef, SynthBudget, SynthQuery, Synthesizer};
use crate::example::ExamplePair;
use crate::il::{parse_contract, Contract};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> ChatMessage {
        ChatMessage {
            role: "system".into(),
            content: content.into(),
        }
    }

    pub fn user(content: impl Into<String>) -> ChatMessage {
        ChatMessage {
            role: "user".into(),
            content: content.into(),
        }
    }

    pub fn assistant(content: impl Into<String>) -> ChatMessage {
        ChatMessage {
            role: "assistant".into(),
            content: content.into(),
        }
    }
}

pub trait Transport: Send + Sync {
    /// The assistant reply to a conversation.
    fn complete(&self, messages: &[ChatMessage]) -> Result<String, OracleError>;

    /// Whether independent conversations may run at the same time.
    fn concurrent(&self) -> bool {
        false
    }
}

/// OpenAI-style chat-completion endpoint.
#[derive(Debug, Clone)]
pub struct HttpTransport {
    pub endpoint: String,
    pub model: String,
    pub api_key: Option<String>,
    pub timeout: Duration,
    pub temperature: f64,
}

impl HttpTransport {
    /// Reads `CONTRAGLOT_LLM_ENDPOINT`, `CONTRAGLOT_LLM_MODEL` and
    /// `CONTRAGLOT_LLM_API_KEY`.
    pub fn from_env() -> Result<HttpTransport, OracleError> {
        let endpoint = std::env::var("CONTRAGLOT_LLM_ENDPOINT")
            .map_err(|_| OracleError::Transport("CONTRAGLOT_LLM_ENDPOINT is not set".into()))?;
        Ok(HttpTransport {
            endpoint,
            model: std::env::var("CONTRAGLOT_LLM_MODEL").unwrap_or_else(|_| "gpt-4o".into()),
            api_key: std::env::var("CONTRAGLOT_LLM_API_KEY").ok(),
            timeout: Duration::from_secs(120),
            temperature: 0.2,
        })
    }
}

impl Transport for HttpTransport {
    fn complete(&self, messages: &[ChatMessage]) -> Result<String, OracleError> {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(self.timeout))
            .build()
            .into();
        let body = serde_json::json!({
            "model": self.model,
            "messages": messages,
            "temperature": self.temperature,
        });
        let mut req = agent
            .post(&self.endpoint)
            .header("Content-Type", "application/json");
        if let Some(k) = &self.api_key {
            req = req.header("Authorization", &format!("Bearer {k}"));
        }
        let mut resp = req
            .send_json(&body)
            .map_err(|e| OracleError::Transport(e.to_string()))?;
        let doc: serde_json::Value = resp
            .body_mut()
            .read_json()
            .map_err(|e| OracleError::Transport(e.to_string()))?;
        doc.pointer("/choices/0/message/content")
            .and_then(|c| c.as_str())
            .map(str::to_string)
            .ok_or_else(|| OracleError::Transport(format!("malformed completion response: {doc}")))
    }

    fn concurrent(&self) -> bool {
        true
    }
}

/// One recorded exchange.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptRecord {
    /// Substring the last request message must contain, when set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expect: Option<String>,
    pub reply: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transcript {
    pub records: Vec<TranscriptRecord>,
}

impl Transcript {
    pub fn load(path: &Path) -> Result<Transcript, OracleError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| OracleError::Transport(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| OracleError::Transport(format!("bad transcript {}: {e}", path.display())))
    }
}

/// Replays a transcript in order and keeps every request for inspection.
#[derive(Debug, Default)]
pub struct TranscriptTransport {
    queue: Mutex<VecDeque<TranscriptRecord>>,
    requests: Mutex<Vec<Vec<ChatMessage>>>,
}

impl TranscriptTransport {
    pub fn new(t: Transcript) -> TranscriptTransport {
        TranscriptTransport {
            queue: Mutex::new(t.records.into()),
            requests: Mutex::default(),
        }
    }

    pub fn requests(&self) -> Vec<Vec<ChatMessage>> {
        self.requests.lock().unwrap().clone()
    }

    pub fn remaining(&self) -> usize {
        self.queue.lock().unwrap().len()
    }
}

impl Transport for TranscriptTransport {
    fn complete(&self, messages: &[ChatMessage]) -> Result<String, OracleError> {
        self.requests.lock().unwrap().push(messages.to_vec());
        let rec = self
            .queue
            .lock()
            .unwrap()
            .pop_front()
            .ok_or(OracleError::ScriptExhausted)?;
        if let Some(want) = &rec.expect {
            let last = messages.last().map(|m| m.content.as_str()).unwrap_or("");
            if !last.contains(want.as_str()) {
                return Err(OracleError::Transport(format!(
                    "transcript expected a request containing {want:?}"
                )));
            }
        }
        Ok(rec.reply)
    }
}

const DSL: &str = "\
Expressions use this language (all integers are fixed-width bitvectors; arithmetic wraps):
  literals     true, false, 3 (typed from context), 3u8, -1i8
  variables    x (post-state in postconditions), old(x) (pre-state, postconditions only)
  fields       x.f
  boolean      !a, a && b, a || b, a ==> b
  comparison   a == b, a != b, a <u b, a <=u b, a >u b, a >=u b (unsigned), a <s b ... (signed)
  arithmetic   a + b, a - b, a * b
  conditional  if c then a else b";

#[derive(Clone)]
pub struct LlmSynthesizer {
    transport: Arc<dyn Transport>,
    /// Re-prompts after a reply that does not parse.
    pub retries: usize,
}

impl LlmSynthesizer {
    pub fn new(transport: Arc<dyn Transport>) -> LlmSynthesizer {
        LlmSynthesizer {
            transport,
            retries: 3,
        }
    }

    fn task(f: &ProcedureRef) -> String {
        format!(
            "Your task is to create two Boolean expressions, a precondition and a postcondition, \
             for a function named '{}'. Instructions below:\n\
             1. Precondition should only depend on inputs.\n\
             2. Postcondition can depend on inputs and outputs.\n\
             3. Express pre/post-conditions using the following language.\n\n{DSL}",
            f.name()
        )
    }

    fn reasoning(f: &ProcedureRef, q: &SynthQuery<'_>) -> String {
        let p = &f.procedure;
        let typed = |names: &std::collections::BTreeSet<String>| -> String {
            names
                .iter()
                .filter_map(|n| f.ctx.get(n).map(|t| format!("{n}: {t}")))
                .collect::<Vec<_>>()
                .join(", ")
        };
        let mut s = format!(
            "Describe what the function\n\
             1. may assume before it is executed, and\n\
             2. guarantees after it is executed. Also,\n\
             3. think about additional constraints that would satisfy (eliminate) positive (negative) examples.\n\
             Output a list of the above points and nothing else.\n\n\
             The function has the following inputs and outputs:\n\
             Inputs: {}; Outputs: {}\n\
             Code below:\n```{}\n{}\n```\n",
            typed(&p.reads),
            typed(&p.writes),
            p.language,
            p.source.trim_end()
        );
        if let Some((c, x)) = q.previous {
            s.push_str(&format!(
                "\nHere is a cex of the following pre/postconditions:\n\
                 Precondition: {}\nPostcondition: {}\nCounterexample: {}\n\
                 Write an explanation of why the pre/postconditions are violated in the form\n\
                 ```json\n{{\n  \"explanation\": <EXPLANATION>,\n  \"suggestion\": <SUGGESTION>\n}}\n```\n",
                c.pre, c.post, x
            ));
        }
        if !q.positive.is_empty() || !q.negative.is_empty() {
            s.push_str(
                "\nLastly, below are some input/output examples. Make sure the conditions satisfy the positive \
                 examples and dissatisfy the negative examples. Compare the positive and negative examples and \
                 deduce what makes the negative examples invalid behaviors of the code. List constraints that \
                 need to be added to avoid the negative examples.\n\n",
            );
            let list = |s: &mut String, label: &str, xs: &[ExamplePair]| {
                for (i, x) in xs.iter().enumerate() {
                    s.push_str(&format!("{label} example {}: {x}\n", i + 1));
                }
            };
            list(&mut s, "Positive", q.positive);
            list(&mut s, "Negative", q.negative);
        }
        s
    }

    fn generation(suggestion: Option<&str>) -> String {
        let mut s = String::from(
            "Based on your analysis, write the precondition and postcondition for the code.\n\
             Requirements:\n\
             1. Each condition is a single expression. Do not use intermediate variables.\n\
             2. Link all fields of the output to the inputs if possible, even if they are not used.\n\
             3. You may abstract the postcondition by ignoring details and focusing on the relationship \
             between the inputs and outputs.\n",
        );
        if let Some(sug) = suggestion {
            s.push_str(&format!(
                "\n**NOTE**: {sug} Focus on this when generating pre/postconditions.\n"
            ));
        }
        s.push_str(
            "\nComplete the template below and put it in a code block.\n\
             ```\nrequires <PRECONDITION>\nensures <POSTCONDITION>\n```\n\n\
             Below is an example.\n\
             ```\nrequires true\nensures out.count == old(in.count) && out.is_present == true\n```\n",
        );
        s
    }

    /// Runs one conversation to a parsed contract.
    fn chain(&self, f: &ProcedureRef, q: &SynthQuery<'_>) -> Result<Contract, OracleError> {
        let mut msgs = vec![
            ChatMessage::system(Self::task(f)),
            ChatMessage::user(Self::reasoning(f, q)),
        ];
        let analysis = self.transport.complete(&msgs)?;
        let suggestion = extract_suggestion(&analysis);
        msgs.push(ChatMessage::assistant(analysis));
        msgs.push(ChatMessage::user(Self::generation(suggestion.as_deref())));
        let mut last_err = String::new();
        for attempt in 0..=self.retries {
            let reply = self.transport.complete(&msgs)?;
            match parse_reply(&reply, f) {
                Ok(c) => return Ok(c),
                Err(e) => {
                    log::debug!(
                        "{}: unusable reply on attempt {}: {e}",
                        f.name(),
                        attempt + 1
                    );
                    last_err = e;
                    if attempt == self.retries {
                        break;
                    }
                    msgs.push(ChatMessage::assistant(reply));
                    msgs.push(ChatMessage::user(format!(
                        "The conditions could not be used: {last_err}\nPlease fix them and reply with the code block only."
                    )));
                }
            }
        }
        Err(OracleError::NoCandidate(format!(
            "retries exhausted; last error: {last_err}"
        )))
    }
}

/// The `suggestion` field of the first JSON object in `text`.
fn extract_suggestion(text: &str) -> Option<String> {
    let start = text.find('{')?;
    let end = text.rfind('}')?;
    let v: serde_json::Value = serde_json::from_str(text.get(start..=end)?).ok()?;
    v.get("suggestion")
        .and_then(|s| s.as_str())
        .map(str::to_string)
}

fn parse_reply(reply: &str, f: &ProcedureRef) -> Result<Contract, String> {
    let body = match reply.find("```") {
        Some(i) => {
            let after = &reply[i + 3..];
            let after = after
                .split_once('\n')
                .map(|(_, rest)| rest)
                .unwrap_or(after);
            after.find("```").map(|j| &after[..j]).unwrap_or(after)
        }
        None => reply,
    };
    if !body.lines().any(|l| {
        let l = l.trim_start();
        l.starts_with("requires") || l.starts_with("ensures")
    }) {
        return Err("no `requires`/`ensures` block found".into());
    }
    parse_contract(body, &f.ctx).map_err(|e| e.to_string())
}

impl Synthesizer for LlmSynthesizer {
    fn name(&self) -> &str {
        "llm"
    }

    fn synthesize(
        &self,
        f: &ProcedureRef,
        q: &SynthQuery<'_>,
        b: &SynthBudget,
    ) -> Result<Contract, OracleError> {
        let n = b.parallel_queries.max(1);
        if n == 1 || !self.transport.concurrent() {
            return self.chain(f, q);
        }
        let results: Vec<Result<Contract, OracleError>> = std::thread::scope(|s| {
            let handles: Vec<_> = (0..n).map(|_| s.spawn(|| self.chain(f, q))).collect();
            handles
                .into_iter()
                .map(|h| {
                    h.join().unwrap_or_else(|_| {
                        Err(OracleError::Transport("query thread panicked".into()))
                    })
                })
                .collect()
        });
        let mut first_err = None;
        for r in results {
            match r {
                Ok(c) if !q.excluded.contains(&c) => return Ok(c),
                Ok(_) => {}
                Err(e) => {
                    first_err.get_or_insert(e);
                }
            }
        }
        Err(first_err.unwrap_or_else(|| {
            OracleError::NoCandidate("every reply was an excluded contract".into())
        }))
    }
}
