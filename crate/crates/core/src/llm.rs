//! Language-model adapter: completing prompted queries for demonstration
//! collection, answering critique requests, and metering every call for the
//! inference-cost study. Ships a deterministic mock.

use std::collections::{HashMap, HashSet};
use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use crate::corpus::{
    self, grade_answer, Corpus, DemonstrationRecord, DemonstrationSet, Prompt, PromptSplit, Query,
    SplitTag,
};
use crate::embedding::RetryPolicy;
use crate::error::{Error, Result};
use crate::policy::{apply_prompt, PromptedQuery};

/// Environment variable holding the remote chat API key.
pub const LLM_KEY_ENV: &str = "OIRL_LLM_KEY";

/// What a metered call paid for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Purpose {
    Answer,
    Critique,
    Embed,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub purpose: Purpose,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

/// Append-only log of token spend.
#[derive(Debug, Clone, Default)]
pub struct CostLedger {
    entries: Vec<LedgerEntry>,
}

impl CostLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn append(&mut self, entry: LedgerEntry) {
        self.entries.push(entry);
    }

    pub fn entries(&self) -> &[LedgerEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn count_by_purpose(&self, purpose: Purpose) -> usize {
        self.entries.iter().filter(|e| e.purpose == purpose).count()
    }
}

/// Per-1k-token prices for chat input, chat output, and embeddings.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriceSheet {
    pub input_usd_per_1k: f64,
    pub output_usd_per_1k: f64,
    pub embed_usd_per_1k: f64,
}

impl PriceSheet {
    pub fn zero() -> Self {
        Self {
            input_usd_per_1k: 0.0,
            output_usd_per_1k: 0.0,
            embed_usd_per_1k: 0.0,
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let raw = fs::read_to_string(path)?;
        serde_json::from_str(&raw).map_err(|e| Error::MalformedRecord {
            path: path.display().to_string(),
            line: 1,
            detail: e.to_string(),
        })
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("input_usd_per_1k", self.input_usd_per_1k),
            ("output_usd_per_1k", self.output_usd_per_1k),
            ("embed_usd_per_1k", self.embed_usd_per_1k),
        ] {
            if !(v >= 0.0) {
                return Err(Error::InvalidInput(format!("{name} must be non-negative")));
            }
        }
        Ok(())
    }
}

/// Total dollars for a ledger: answer and critique entries at chat rates,
/// embed entries at the embedding rate.
pub fn cost_of(ledger: &CostLedger, sheet: &PriceSheet) -> f64 {
    ledger
        .entries()
        .iter()
        .map(|e| match e.purpose {
            Purpose::Embed => {
                (e.prompt_tokens + e.completion_tokens) as f64 * sheet.embed_usd_per_1k / 1000.0
            }
            Purpose::Answer | Purpose::Critique => {
                e.prompt_tokens as f64 * sheet.input_usd_per_1k / 1000.0
                    + e.completion_tokens as f64 * sheet.output_usd_per_1k / 1000.0
            }
        })
        .sum()
}

/// Deterministic stand-in for a provider tokenizer: ceil(chars / 4).
pub fn mock_token_count(text: &str) -> u64 {
    (text.chars().count() as u64).div_ceil(4)
}

/// A model answer with provider-reported token counts.
#[derive(Debug, Clone)]
pub struct CompletionResult {
    pub text: String,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClientKind {
    Remote,
    Mock,
}

/// Fixture-table mock: a pure function of (table, request text). Unknown
/// requests echo a fixed fallback.
pub struct MockLlm {
    fixtures: HashMap<String, String>,
    calls: AtomicU64,
}

pub const MOCK_FALLBACK: &str = "UNKNOWN";

impl MockLlm {
    pub fn new(fixtures: HashMap<String, String>) -> Self {
        Self {
            fixtures,
            calls: AtomicU64::new(0),
        }
    }

    /// Loads `{"request","response"}` lines.
    pub fn from_file(path: &Path) -> Result<Self> {
        #[derive(Deserialize)]
        struct FixtureLine {
            request: String,
            response: String,
        }
        let raw = fs::read_to_string(path)?;
        let mut fixtures = HashMap::new();
        for (lineno, line) in raw.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let fixture: FixtureLine =
                serde_json::from_str(line).map_err(|e| Error::MalformedRecord {
                    path: path.display().to_string(),
                    line: lineno + 1,
                    detail: e.to_string(),
                })?;
            fixtures.insert(fixture.request, fixture.response);
        }
        Ok(Self::new(fixtures))
    }

    fn respond(&self, request: &str) -> CompletionResult {
        self.calls.fetch_add(1, Ordering::Relaxed);
        let text = self
            .fixtures
            .get(request)
            .cloned()
            .unwrap_or_else(|| MOCK_FALLBACK.to_string());
        CompletionResult {
            prompt_tokens: mock_token_count(request),
            completion_tokens: mock_token_count(&text),
            text,
        }
    }

    pub fn calls(&self) -> u64 {
        self.calls.load(Ordering::Relaxed)
    }
}

#[derive(Serialize)]
struct ChatMessage<'a> {
    role: &'a str,
    content: &'a str,
}

#[derive(Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    messages: Vec<ChatMessage<'a>>,
    temperature: f64,
}

#[derive(Deserialize)]
struct ChatChoiceMessage {
    content: String,
}

#[derive(Deserialize)]
struct ChatChoice {
    message: ChatChoiceMessage,
}

#[derive(Deserialize)]
struct ChatUsage {
    prompt_tokens: u64,
    completion_tokens: u64,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<ChatChoice>,
    usage: ChatUsage,
}

/// Settings for the remote chat contract: POST
/// `{"model","messages":[...],"temperature":0}`; the response carries the
/// answer text plus usage counts.
#[derive(Debug, Clone)]
pub struct RemoteLlmConfig {
    pub url: String,
    pub model: String,
    pub api_key: Option<String>,
    pub retry: RetryPolicy,
}

impl RemoteLlmConfig {
    pub fn new(url: impl Into<String>, model: impl Into<String>) -> Self {
        Self {
            url: url.into(),
            model: model.into(),
            api_key: std::env::var(LLM_KEY_ENV).ok(),
            retry: RetryPolicy::default(),
        }
    }
}

struct RemoteLlm {
    config: RemoteLlmConfig,
    agent: ureq::Agent,
}

impl RemoteLlm {
    fn respond(&self, request: &str) -> Result<CompletionResult> {
        let mut last_err = String::new();
        let mut rate_limited = false;
        for attempt in 0..=self.config.retry.max_retries {
            if attempt > 0 {
                std::thread::sleep(self.config.retry.delay(attempt));
            }
            let mut req = self.agent.post(&self.config.url);
            if let Some(key) = &self.config.api_key {
                req = req.header("authorization", &format!("Bearer {key}"));
            }
            let body = ChatRequest {
                model: &self.config.model,
                messages: vec![ChatMessage {
                    role: "user",
                    content: request,
                }],
                // Temperature 0: grading presumes reproducible answers.
                temperature: 0.0,
            };
            match req.send_json(&body) {
                Ok(mut resp) => {
                    let status = resp.status().as_u16();
                    if (200..300).contains(&status) {
                        let parsed: ChatResponse = resp.body_mut().read_json().map_err(|e| {
                            Error::LlmUnavailable(format!("bad response body: {e}"))
                        })?;
                        let choice = parsed.choices.into_iter().next().ok_or_else(|| {
                            Error::LlmUnavailable("response carried no choices".into())
                        })?;
                        return Ok(CompletionResult {
                            text: choice.message.content,
                            prompt_tokens: parsed.usage.prompt_tokens,
                            completion_tokens: parsed.usage.completion_tokens,
                        });
                    }
                    rate_limited = status == 429;
                    last_err = format!("status {status}");
                    if !(status == 429 || (500..600).contains(&status)) {
                        break;
                    }
                }
                Err(e) => {
                    rate_limited = false;
                    last_err = e.to_string();
                }
            }
        }
        if rate_limited {
            Err(Error::RateLimited(last_err))
        } else {
            Err(Error::LlmUnavailable(last_err))
        }
    }
}

enum Backend {
    Mock(MockLlm),
    Remote(RemoteLlm),
}

/// A chat client that meters every call into a shared [`CostLedger`].
pub struct LlmClient {
    backend: Backend,
    model_name: String,
    max_in_flight: usize,
    pricing: PriceSheet,
    ledger: Arc<Mutex<CostLedger>>,
}

impl LlmClient {
    pub fn mock(fixtures: HashMap<String, String>) -> Self {
        Self {
            backend: Backend::Mock(MockLlm::new(fixtures)),
            model_name: "mock".into(),
            max_in_flight: 1,
            pricing: PriceSheet::zero(),
            ledger: Arc::new(Mutex::new(CostLedger::new())),
        }
    }

    pub fn mock_from_file(path: &Path) -> Result<Self> {
        Ok(Self {
            backend: Backend::Mock(MockLlm::from_file(path)?),
            model_name: "mock".into(),
            max_in_flight: 1,
            pricing: PriceSheet::zero(),
            ledger: Arc::new(Mutex::new(CostLedger::new())),
        })
    }

    pub fn remote(config: RemoteLlmConfig) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .build()
            .into();
        let model_name = config.model.clone();
        Self {
            backend: Backend::Remote(RemoteLlm { config, agent }),
            model_name,
            max_in_flight: 4,
            pricing: PriceSheet::zero(),
            ledger: Arc::new(Mutex::new(CostLedger::new())),
        }
    }

    pub fn with_pricing(mut self, pricing: PriceSheet) -> Self {
        self.pricing = pricing;
        self
    }

    pub fn with_max_in_flight(mut self, n: usize) -> Self {
        self.max_in_flight = n.max(1);
        self
    }

    pub fn kind(&self) -> ClientKind {
        match self.backend {
            Backend::Mock(_) => ClientKind::Mock,
            Backend::Remote(_) => ClientKind::Remote,
        }
    }

    pub fn model_name(&self) -> &str {
        &self.model_name
    }

    pub fn max_in_flight(&self) -> usize {
        self.max_in_flight
    }

    pub fn pricing(&self) -> &PriceSheet {
        &self.pricing
    }

    pub fn ledger(&self) -> Arc<Mutex<CostLedger>> {
        self.ledger.clone()
    }

    pub fn ledger_snapshot(&self) -> CostLedger {
        self.ledger.lock().unwrap().clone()
    }

    /// Total mock calls made; remote clients report 0.
    pub fn mock_calls(&self) -> u64 {
        match &self.backend {
            Backend::Mock(mock) => mock.calls(),
            Backend::Remote(_) => 0,
        }
    }

    fn request(&self, text: &str, purpose: Purpose) -> Result<CompletionResult> {
        let result = match &self.backend {
            Backend::Mock(mock) => mock.respond(text),
            Backend::Remote(remote) => remote.respond(text)?,
        };
        self.ledger.lock().unwrap().append(LedgerEntry {
            purpose,
            prompt_tokens: result.prompt_tokens,
            completion_tokens: result.completion_tokens,
        });
        Ok(result)
    }

    /// Completes a prompted query; the call is metered with purpose
    /// `answer`.
    pub fn complete(&self, prompted: &PromptedQuery) -> Result<CompletionResult> {
        self.request(&prompted.text, Purpose::Answer)
    }

    /// Asks the model to judge an answer; metered with purpose `critique`.
    pub fn critique(&self, request: &str) -> Result<CompletionResult> {
        self.request(request, Purpose::Critique)
    }
}

/// Applies a prompt to a query and completes it: the single inference call
/// made after an offline selection has already chosen the prompt.
pub fn answer_with_prompt(
    client: &LlmClient,
    query: &Query,
    prompt: &Prompt,
    template: &str,
) -> Result<CompletionResult> {
    let prompted = apply_prompt(prompt, query, template)?;
    client.complete(&prompted)
}

/// Collects one demonstration partition: for every (query, prompt) pair of
/// the chosen split, apply the prompt, complete, and grade.
///
/// Resumable: pairs already present in the checkpoint file are skipped, and
/// new records are flushed to it every [`CHECKPOINT_FLUSH_EVERY`] records
/// and before any error surfaces.
pub fn collect_demonstrations(
    client: &LlmClient,
    corpus: &Corpus,
    prompts: &[Prompt],
    template: &str,
    split: SplitTag,
    checkpoint: Option<&Path>,
) -> Result<DemonstrationSet> {
    if prompts.is_empty() {
        return Err(Error::InvalidInput("no prompts to collect with".into()));
    }
    let wanted_prompt_split = match split {
        SplitTag::Train | SplitTag::TestQ => PromptSplit::Train,
        SplitTag::TestP => PromptSplit::Heldout,
    };
    for p in prompts {
        if corpus.prompt(&p.id).is_none() {
            return Err(Error::DanglingReference(p.id.clone()));
        }
        if p.split != wanted_prompt_split {
            return Err(Error::MixedSplit(format!(
                "prompt `{}` has the wrong split for the {} partition",
                p.id,
                split.as_str()
            )));
        }
    }
    let queries: &[Query] = match split {
        SplitTag::Train => corpus.train_queries(),
        SplitTag::TestQ | SplitTag::TestP => corpus.test_queries(),
    };

    let mut records: Vec<DemonstrationRecord> = Vec::new();
    let mut done: HashSet<(String, String)> = HashSet::new();
    if let Some(path) = checkpoint {
        if path.exists() {
            for rec in corpus::load_demonstration_records(path)? {
                done.insert((rec.query_id.clone(), rec.prompt_id.clone()));
                records.push(rec);
            }
        }
    }

    let pending: Vec<(&Query, &Prompt)> = queries
        .iter()
        .flat_map(|q| prompts.iter().map(move |p| (q, p)))
        .filter(|(q, p)| !done.contains(&(q.id.clone(), p.id.clone())))
        .collect();

    let mut flusher = CheckpointFlusher::new(checkpoint);
    let batch = client.max_in_flight.max(1);
    for chunk in pending.chunks(batch) {
        let outcome = complete_chunk(client, chunk, template);
        match outcome {
            Ok(chunk_results) => {
                for ((query, prompt), response) in chunk.iter().zip(chunk_results) {
                    let reward = grade_answer(&query.golden_answer, &response);
                    let rec = DemonstrationRecord {
                        query_id: query.id.clone(),
                        prompt_id: prompt.id.clone(),
                        response: Some(response),
                        reward,
                    };
                    flusher.push(&rec)?;
                    records.push(rec);
                }
            }
            Err(e) => {
                flusher.flush()?;
                return Err(e);
            }
        }
    }
    flusher.flush()?;
    demonstration_set_for_split(records, corpus, split)
}

fn complete_chunk(
    client: &LlmClient,
    chunk: &[(&Query, &Prompt)],
    template: &str,
) -> Result<Vec<String>> {
    if chunk.len() == 1 {
        let (query, prompt) = chunk[0];
        let prompted = apply_prompt(prompt, query, template)?;
        let result = client
            .complete(&prompted)
            .map_err(|e| attach_pair(e, &query.id, &prompt.id))?;
        return Ok(vec![result.text]);
    }
    std::thread::scope(|scope| {
        let handles: Vec<_> = chunk
            .iter()
            .map(|(query, prompt)| {
                scope.spawn(move || -> Result<String> {
                    let prompted = apply_prompt(prompt, query, template)?;
                    let result = client
                        .complete(&prompted)
                        .map_err(|e| attach_pair(e, &query.id, &prompt.id))?;
                    Ok(result.text)
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("collection worker panicked"))
            .collect()
    })
}

fn attach_pair(err: Error, query_id: &str, prompt_id: &str) -> Error {
    match err {
        Error::LlmUnavailable(msg) => {
            Error::LlmUnavailable(format!("({query_id}, {prompt_id}): {msg}"))
        }
        Error::RateLimited(msg) => Error::RateLimited(format!("({query_id}, {prompt_id}): {msg}")),
        other => other,
    }
}

fn demonstration_set_for_split(
    records: Vec<DemonstrationRecord>,
    corpus: &Corpus,
    split: SplitTag,
) -> Result<DemonstrationSet> {
    let set = corpus::demonstration_set_from_records(records, corpus)?;
    if !set.is_empty() && set.split_tag() != split {
        return Err(Error::MixedSplit(format!(
            "checkpoint records belong to {} but {} was requested",
            set.split_tag().as_str(),
            split.as_str()
        )));
    }
    // An empty checkpoint carries no split evidence; trust the request.
    if set.is_empty() {
        return DemonstrationSet::new(Vec::new(), split);
    }
    Ok(set)
}

pub const CHECKPOINT_FLUSH_EVERY: usize = 50;

/// Appends records to the checkpoint file in batches.
struct CheckpointFlusher<'a> {
    path: Option<&'a Path>,
    buffer: Vec<u8>,
    buffered: usize,
}

impl<'a> CheckpointFlusher<'a> {
    fn new(path: Option<&'a Path>) -> Self {
        Self {
            path,
            buffer: Vec::new(),
            buffered: 0,
        }
    }

    fn push(&mut self, rec: &DemonstrationRecord) -> Result<()> {
        if self.path.is_none() {
            return Ok(());
        }
        serde_json::to_writer(&mut self.buffer, rec)
            .map_err(|e| Error::InvalidInput(e.to_string()))?;
        self.buffer.push(b'\n');
        self.buffered += 1;
        if self.buffered >= CHECKPOINT_FLUSH_EVERY {
            self.flush()?;
        }
        Ok(())
    }

    fn flush(&mut self) -> Result<()> {
        let Some(path) = self.path else {
            return Ok(());
        };
        if self.buffer.is_empty() {
            return Ok(());
        }
        let mut file = OpenOptions::new().create(true).append(true).open(path)?;
        file.write_all(&self.buffer)?;
        file.sync_data()?;
        self.buffer.clear();
        self.buffered = 0;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Prompt, PromptSplit, Query};
    use proptest::prelude::*;

    fn q(id: &str, text: &str, answer: &str) -> Query {
        Query {
            id: id.into(),
            text: text.into(),
            golden_answer: answer.into(),
        }
    }

    fn p(id: &str, text: &str) -> Prompt {
        Prompt {
            id: id.into(),
            text: text.into(),
            split: PromptSplit::Train,
        }
    }

    fn arithmetic_corpus() -> Corpus {
        Corpus::new(
            "arith",
            vec![q("q1", "2+2?", "4"), q("q2", "5*3?", "15")],
            vec![],
            vec![
                p("p1", "The answer is:"),
                p("p2", "Think first."),
                p("p3", "Explain."),
            ],
        )
        .unwrap()
    }

    #[test]
    fn mock_fixture_lookup_and_fallback() {
        let mut fixtures = HashMap::new();
        fixtures.insert("2+2?\nThe answer is:".to_string(), "4".to_string());
        let client = LlmClient::mock(fixtures);
        let hit = client
            .complete(&PromptedQuery {
                text: "2+2?\nThe answer is:".into(),
                query_id: "q1".into(),
                prompt_id: "p1".into(),
            })
            .unwrap();
        assert_eq!(hit.text, "4");
        let miss = client
            .complete(&PromptedQuery {
                text: "unknown input".into(),
                query_id: "q".into(),
                prompt_id: "p".into(),
            })
            .unwrap();
        assert_eq!(miss.text, MOCK_FALLBACK);
        assert_eq!(miss.prompt_tokens, mock_token_count("unknown input"));
        assert_eq!(miss.completion_tokens, mock_token_count(MOCK_FALLBACK));
    }

    #[test]
    fn mock_token_count_is_ceiling() {
        assert_eq!(mock_token_count(""), 0);
        assert_eq!(mock_token_count("abc"), 1);
        assert_eq!(mock_token_count("abcd"), 1);
        assert_eq!(mock_token_count("abcde"), 2);
    }

    #[test]
    fn ledger_totals_match_hand_sum() {
        let client = LlmClient::mock(HashMap::new());
        let mut expected_prompt = 0u64;
        let mut expected_completion = 0u64;
        for i in 0..10 {
            let text = "x".repeat(i + 1);
            let result = client
                .complete(&PromptedQuery {
                    text: text.clone(),
                    query_id: "q".into(),
                    prompt_id: "p".into(),
                })
                .unwrap();
            expected_prompt += mock_token_count(&text);
            expected_completion += result.completion_tokens;
        }
        let ledger = client.ledger_snapshot();
        assert_eq!(ledger.len(), 10);
        let prompt_total: u64 = ledger.entries().iter().map(|e| e.prompt_tokens).sum();
        let completion_total: u64 = ledger.entries().iter().map(|e| e.completion_tokens).sum();
        assert_eq!(prompt_total, expected_prompt);
        assert_eq!(completion_total, expected_completion);
    }

    #[test]
    fn collect_covers_every_pair() {
        let corpus = arithmetic_corpus();
        let client = LlmClient::mock(HashMap::new());
        let demos = collect_demonstrations(
            &client,
            &corpus,
            &corpus.prompts().to_vec(),
            "{query}\n{prompt}",
            SplitTag::Train,
            None,
        )
        .unwrap();
        assert_eq!(demos.len(), 6);
        assert_eq!(client.ledger_snapshot().count_by_purpose(Purpose::Answer), 6);
    }

    #[test]
    fn collect_resumes_from_checkpoint() {
        let corpus = arithmetic_corpus();
        let dir = tempfile::tempdir().unwrap();
        let ckpt = dir.path().join("checkpoint.jsonl");
        // Seed the checkpoint with 4 of the 6 pairs.
        let mut lines = String::new();
        for (qid, pid) in [("q1", "p1"), ("q1", "p2"), ("q1", "p3"), ("q2", "p1")] {
            lines.push_str(&format!(
                "{{\"query_id\":\"{qid}\",\"prompt_id\":\"{pid}\",\"response\":\"4\",\"reward\":0}}\n"
            ));
        }
        fs::write(&ckpt, lines).unwrap();

        let client = LlmClient::mock(HashMap::new());
        let demos = collect_demonstrations(
            &client,
            &corpus,
            &corpus.prompts().to_vec(),
            "{query}\n{prompt}",
            SplitTag::Train,
            Some(&ckpt),
        )
        .unwrap();
        assert_eq!(demos.len(), 6);
        assert_eq!(client.mock_calls(), 2, "only the 2 missing pairs are fetched");
    }

    #[test]
    fn collect_grades_mock_answers() {
        let corpus = arithmetic_corpus();
        let mut fixtures = HashMap::new();
        // Hand-graded: q1 correct under p1, wrong under p2; q2 correct
        // under p2 only.
        fixtures.insert("2+2?\nThe answer is:".into(), "4".into());
        fixtures.insert("2+2?\nThink first.".into(), "5".into());
        fixtures.insert("5*3?\nThink first.".into(), "the answer is 15".into());
        let client = LlmClient::mock(fixtures);
        let prompts: Vec<Prompt> = corpus.prompts()[..2].to_vec();
        let demos = collect_demonstrations(
            &client,
            &corpus,
            &prompts,
            "{query}\n{prompt}",
            SplitTag::Train,
            None,
        )
        .unwrap();
        assert_eq!(demos.reward_for("q1", "p1"), Some(true));
        assert_eq!(demos.reward_for("q1", "p2"), Some(false));
        assert_eq!(demos.reward_for("q2", "p2"), Some(true));
        assert_eq!(demos.reward_for("q2", "p1"), Some(false)); // UNKNOWN fallback
    }

    #[test]
    fn collect_rejects_wrong_prompt_split() {
        let corpus = Corpus::new(
            "t",
            vec![q("q1", "2+2?", "4")],
            vec![q("q2", "3+3?", "6")],
            vec![
                p("p1", "a"),
                Prompt {
                    id: "h1".into(),
                    text: "b".into(),
                    split: PromptSplit::Heldout,
                },
            ],
        )
        .unwrap();
        let client = LlmClient::mock(HashMap::new());
        let heldout = vec![corpus.prompt("h1").unwrap().clone()];
        let err = collect_demonstrations(
            &client,
            &corpus,
            &heldout,
            "{query}\n{prompt}",
            SplitTag::Train,
            None,
        )
        .unwrap_err();
        assert!(matches!(err, Error::MixedSplit(_)));
    }

    #[test]
    fn cost_of_empty_ledger_is_zero() {
        assert_eq!(cost_of(&CostLedger::new(), &PriceSheet::zero()), 0.0);
    }

    #[test]
    fn cost_of_single_answer_entry() {
        let mut ledger = CostLedger::new();
        ledger.append(LedgerEntry {
            purpose: Purpose::Answer,
            prompt_tokens: 1000,
            completion_tokens: 500,
        });
        let sheet = PriceSheet {
            input_usd_per_1k: 0.001,
            output_usd_per_1k: 0.002,
            embed_usd_per_1k: 0.0001,
        };
        let usd = cost_of(&ledger, &sheet);
        assert!((usd - 0.002).abs() < 1e-12, "got {usd}");
    }

    #[test]
    fn cost_of_prompt_embeddings() {
        // 100 prompts of 20 tokens each at 0.0001 USD per 1k tokens.
        let mut ledger = CostLedger::new();
        for _ in 0..100 {
            ledger.append(LedgerEntry {
                purpose: Purpose::Embed,
                prompt_tokens: 20,
                completion_tokens: 0,
            });
        }
        let sheet = PriceSheet {
            input_usd_per_1k: 0.001,
            output_usd_per_1k: 0.002,
            embed_usd_per_1k: 0.0001,
        };
        let usd = cost_of(&ledger, &sheet);
        assert!((usd - 0.0002).abs() < 1e-12, "got {usd}");
    }

    #[test]
    fn answer_with_prompt_appends_one_entry() {
        let corpus = arithmetic_corpus();
        let client = LlmClient::mock(HashMap::new());
        let query = corpus.query("q1").unwrap();
        let prompt = corpus.prompt("p1").unwrap();
        answer_with_prompt(&client, query, prompt, "{query}\n{prompt}").unwrap();
        let ledger = client.ledger_snapshot();
        assert_eq!(ledger.len(), 1);
        assert_eq!(ledger.count_by_purpose(Purpose::Answer), 1);
    }

    proptest! {
        /// cost_of is linear in token counts and in prices.
        #[test]
        fn cost_is_linear(tokens in 1u64..10_000, scale in 1u64..8) {
            let sheet = PriceSheet {
                input_usd_per_1k: 0.001,
                output_usd_per_1k: 0.002,
                embed_usd_per_1k: 0.0001,
            };
            let mut one = CostLedger::new();
            one.append(LedgerEntry {
                purpose: Purpose::Answer,
                prompt_tokens: tokens,
                completion_tokens: tokens / 2,
            });
            let mut many = CostLedger::new();
            for _ in 0..scale {
                many.append(one.entries()[0].clone());
            }
            let single = cost_of(&one, &sheet);
            let repeated = cost_of(&many, &sheet);
            prop_assert!((repeated - scale as f64 * single).abs() < 1e-9);

            let doubled_sheet = PriceSheet {
                input_usd_per_1k: 0.002,
                output_usd_per_1k: 0.004,
                embed_usd_per_1k: 0.0002,
            };
            prop_assert!((cost_of(&one, &doubled_sheet) - 2.0 * single).abs() < 1e-12);
        }
    }
}
