//! Fixed-dimension text embeddings with a cache, a file-backed store, a
//! remote-service client, and a deterministic mock, plus feature-vector
//! construction for the reward model.

use std::collections::HashMap;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::llm::{CostLedger, LedgerEntry, Purpose};

/// Environment variable holding the remote embedding API key.
pub const EMBED_KEY_ENV: &str = "OIRL_EMBED_KEY";

/// Default embedding dimension of the paper's remote provider.
pub const DEFAULT_REMOTE_DIMENSION: usize = 1536;

/// Default dimension for mock providers in tests and synthetic benchmarks.
pub const DEFAULT_MOCK_DIMENSION: usize = 16;

/// Content key for an embedded text: hex SHA-256 of the UTF-8 bytes.
pub fn text_key(text: &str) -> String {
    let mut hasher = Sha256::new();
    hasher.update(text.as_bytes());
    hex::encode(hasher.finalize())
}

/// A real vector of fixed dimension, keyed by the hash of its source text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingVector {
    #[serde(rename = "vector")]
    pub values: Vec<f64>,
    #[serde(rename = "key")]
    pub source_key: String,
}

impl EmbeddingVector {
    pub fn dimension(&self) -> usize {
        self.values.len()
    }
}

/// Query embedding followed by prompt embedding: the reward model's input.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub values: Vec<f64>,
}

impl FeatureVector {
    pub fn dimension(&self) -> usize {
        self.values.len()
    }
}

/// Concatenates `[e_x || e_pi]`, query first. Both vectors must share the
/// store dimension.
pub fn feature_vector(e_x: &EmbeddingVector, e_pi: &EmbeddingVector) -> Result<FeatureVector> {
    if e_x.dimension() != e_pi.dimension() {
        return Err(Error::DimensionMismatch {
            expected: e_x.dimension(),
            actual: e_pi.dimension(),
        });
    }
    let mut values = Vec::with_capacity(2 * e_x.dimension());
    values.extend_from_slice(&e_x.values);
    values.extend_from_slice(&e_pi.values);
    Ok(FeatureVector { values })
}

/// Immutable map from content keys to vectors; lookups return the exact
/// vector stored. Insertion order is preserved so saves are byte-stable.
#[derive(Debug, Clone)]
pub struct EmbeddingStore {
    dimension: usize,
    entries: Vec<Arc<EmbeddingVector>>,
    by_key: HashMap<String, usize>,
}

impl EmbeddingStore {
    pub fn new(dimension: usize) -> Self {
        Self {
            dimension,
            entries: Vec::new(),
            by_key: HashMap::new(),
        }
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Inserts a vector; re-inserting the same key is a no-op.
    pub fn insert(&mut self, vector: EmbeddingVector) -> Result<()> {
        if vector.dimension() != self.dimension {
            return Err(Error::DimensionMismatch {
                expected: self.dimension,
                actual: vector.dimension(),
            });
        }
        if let Some(bad) = vector.values.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "non-finite embedding component {bad} for key {}",
                vector.source_key
            )));
        }
        if self.by_key.contains_key(&vector.source_key) {
            return Ok(());
        }
        self.by_key
            .insert(vector.source_key.clone(), self.entries.len());
        self.entries.push(Arc::new(vector));
        Ok(())
    }

    pub fn get_by_key(&self, key: &str) -> Option<&Arc<EmbeddingVector>> {
        self.by_key.get(key).map(|&i| &self.entries[i])
    }

    pub fn get_for_text(&self, text: &str) -> Option<&Arc<EmbeddingVector>> {
        self.get_by_key(&text_key(text))
    }

    pub fn contains_text(&self, text: &str) -> bool {
        self.by_key.contains_key(&text_key(text))
    }

    pub fn iter(&self) -> impl Iterator<Item = &Arc<EmbeddingVector>> {
        self.entries.iter()
    }

    /// Writes the store as line-delimited `{"key","vector"}` records.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut buf = Vec::new();
        for entry in &self.entries {
            serde_json::to_writer(&mut buf, entry.as_ref())
                .map_err(|e| Error::InvalidInput(e.to_string()))?;
            buf.push(b'\n');
        }
        let mut file = fs::File::create(path)?;
        file.write_all(&buf)?;
        Ok(())
    }

    /// Loads a store; the dimension is taken from the first record and
    /// enforced on the rest.
    pub fn load(path: &Path) -> Result<Self> {
        let file = fs::File::open(path)?;
        let reader = BufReader::new(file);
        let mut store: Option<EmbeddingStore> = None;
        for (lineno, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let vector: EmbeddingVector =
                serde_json::from_str(&line).map_err(|e| Error::MalformedRecord {
                    path: path.display().to_string(),
                    line: lineno + 1,
                    detail: e.to_string(),
                })?;
            let store = store.get_or_insert_with(|| EmbeddingStore::new(vector.dimension()));
            store.insert(vector)?;
        }
        store.ok_or_else(|| Error::MalformedRecord {
            path: path.display().to_string(),
            line: 0,
            detail: "empty embedding store".into(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProviderKind {
    Remote,
    File,
    Mock,
}

/// Retry schedule for flaky remote services.
#[derive(Debug, Clone)]
pub struct RetryPolicy {
    pub max_retries: u32,
    pub base: Duration,
    pub factor: u32,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_retries: 3,
            base: Duration::from_millis(500),
            factor: 2,
        }
    }
}

impl RetryPolicy {
    /// Delay before retry number `attempt` (1-based).
    pub fn delay(&self, attempt: u32) -> Duration {
        self.base * self.factor.saturating_pow(attempt.saturating_sub(1))
    }
}

trait EmbeddingBackend: Send + Sync {
    fn kind(&self) -> ProviderKind;
    fn dimension(&self) -> usize;
    fn embed_batch(&self, texts: &[String]) -> Result<Vec<Vec<f64>>>;
}

/// Deterministic stand-in for a remote embedding service: each text maps to
/// a unit-norm vector drawn from a generator seeded by a hash of
/// (seed, text).
struct MockBackend {
    seed: u64,
    dimension: usize,
}

pub(crate) fn mock_vector(seed: u64, dimension: usize, text: &str) -> Vec<f64> {
    let mut hasher = Sha256::new();
    hasher.update(b"oirl-mock-embedding");
    hasher.update(seed.to_le_bytes());
    hasher.update(text.as_bytes());
    let digest = hasher.finalize();
    let h = u64::from_le_bytes(digest[..8].try_into().expect("digest is 32 bytes"));
    let mut rng = ChaCha8Rng::seed_from_u64(h);
    let mut values: Vec<f64> = (0..dimension).map(|_| rng.sample(StandardNormal)).collect();
    let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > 0.0 {
        for v in &mut values {
            *v /= norm;
        }
    } else {
        values[0] = 1.0;
    }
    values
}

impl EmbeddingBackend for MockBackend {
    fn kind(&self) -> ProviderKind {
        ProviderKind::Mock
    }

    fn dimension(&self) -> usize {
        self.dimension
    }

    fn embed_batch(&self, texts: &[String]) -> Result<Vec<Vec<f64>>> {
        Ok(texts
            .iter()
            .map(|t| mock_vector(self.seed, self.dimension, t))
            .collect())
    }
}

/// Serves precomputed vectors from an [`EmbeddingStore`]; texts without a
/// stored entry fail with `MissingEmbedding`.
struct FileBackend {
    store: EmbeddingStore,
}

impl EmbeddingBackend for FileBackend {
    fn kind(&self) -> ProviderKind {
        ProviderKind::File
    }

    fn dimension(&self) -> usize {
        self.store.dimension()
    }

    fn embed_batch(&self, texts: &[String]) -> Result<Vec<Vec<f64>>> {
        texts
            .iter()
            .map(|t| {
                self.store
                    .get_for_text(t)
                    .map(|v| v.values.clone())
                    .ok_or_else(|| Error::MissingEmbedding(text_key(t)))
            })
            .collect()
    }
}

#[derive(Serialize)]
struct EmbedRequest<'a> {
    texts: &'a [String],
}

#[derive(Deserialize)]
struct EmbedResponse {
    vectors: Vec<Vec<f64>>,
}

/// Settings for the remote embedding contract: POST `{"texts": [...]}`,
/// response `{"vectors": [[...], ...]}`.
#[derive(Debug, Clone)]
pub struct RemoteEmbeddingConfig {
    pub url: String,
    pub dimension: usize,
    pub batch_size: usize,
    pub api_key: Option<String>,
    pub retry: RetryPolicy,
}

impl RemoteEmbeddingConfig {
    pub fn new(url: impl Into<String>) -> Self {
        Self {
            url: url.into(),
            dimension: DEFAULT_REMOTE_DIMENSION,
            batch_size: 64,
            api_key: std::env::var(EMBED_KEY_ENV).ok(),
            retry: RetryPolicy::default(),
        }
    }
}

struct RemoteBackend {
    config: RemoteEmbeddingConfig,
    agent: ureq::Agent,
}

impl RemoteBackend {
    fn post_chunk(&self, chunk: &[String]) -> Result<Vec<Vec<f64>>> {
        let mut last_err = String::new();
        for attempt in 0..=self.config.retry.max_retries {
            if attempt > 0 {
                std::thread::sleep(self.config.retry.delay(attempt));
            }
            let mut req = self.agent.post(&self.config.url);
            if let Some(key) = &self.config.api_key {
                req = req.header("authorization", &format!("Bearer {key}"));
            }
            match req.send_json(EmbedRequest { texts: chunk }) {
                Ok(mut resp) => {
                    let status = resp.status().as_u16();
                    if (200..300).contains(&status) {
                        let body: EmbedResponse =
                            resp.body_mut().read_json().map_err(|e| {
                                Error::RemoteUnavailable(format!("bad response body: {e}"))
                            })?;
                        if body.vectors.len() != chunk.len() {
                            return Err(Error::RemoteUnavailable(format!(
                                "{} vectors returned for {} texts",
                                body.vectors.len(),
                                chunk.len()
                            )));
                        }
                        for v in &body.vectors {
                            if v.len() != self.config.dimension {
                                return Err(Error::DimensionMismatch {
                                    expected: self.config.dimension,
                                    actual: v.len(),
                                });
                            }
                        }
                        return Ok(body.vectors);
                    }
                    last_err = format!("status {status}");
                    if !(status == 429 || (500..600).contains(&status)) {
                        break;
                    }
                }
                Err(e) => last_err = e.to_string(),
            }
        }
        Err(Error::RemoteUnavailable(last_err))
    }
}

impl EmbeddingBackend for RemoteBackend {
    fn kind(&self) -> ProviderKind {
        ProviderKind::Remote
    }

    fn dimension(&self) -> usize {
        self.config.dimension
    }

    fn embed_batch(&self, texts: &[String]) -> Result<Vec<Vec<f64>>> {
        if let Some(empty) = texts.iter().find(|t| t.is_empty()) {
            let _ = empty;
            return Err(Error::InvalidInput(
                "remote providers require non-empty text".into(),
            ));
        }
        let mut out = Vec::with_capacity(texts.len());
        for chunk in texts.chunks(self.config.batch_size.max(1)) {
            out.extend(self.post_chunk(chunk)?);
        }
        Ok(out)
    }
}

/// An embedding provider with a transparent cache. Same text, same vector;
/// repeated calls never re-contact a remote service.
pub struct Embedder {
    backend: Box<dyn EmbeddingBackend>,
    cache: Mutex<HashMap<String, Arc<EmbeddingVector>>>,
    ledger: Option<Arc<Mutex<CostLedger>>>,
}

impl Embedder {
    pub fn mock(seed: u64, dimension: usize) -> Self {
        Self::from_backend(Box::new(MockBackend { seed, dimension }))
    }

    pub fn from_store(store: EmbeddingStore) -> Self {
        Self::from_backend(Box::new(FileBackend { store }))
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Ok(Self::from_store(EmbeddingStore::load(path)?))
    }

    pub fn remote(config: RemoteEmbeddingConfig) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .build()
            .into();
        Self::from_backend(Box::new(RemoteBackend { config, agent }))
    }

    fn from_backend(backend: Box<dyn EmbeddingBackend>) -> Self {
        Self {
            backend,
            cache: Mutex::new(HashMap::new()),
            ledger: None,
        }
    }

    /// Bills embedding calls to a shared cost ledger.
    pub fn with_ledger(mut self, ledger: Arc<Mutex<CostLedger>>) -> Self {
        self.ledger = Some(ledger);
        self
    }

    pub fn kind(&self) -> ProviderKind {
        self.backend.kind()
    }

    pub fn dimension(&self) -> usize {
        self.backend.dimension()
    }

    /// Embeds one text, consulting the cache first.
    pub fn embed_text(&self, text: &str) -> Result<Arc<EmbeddingVector>> {
        if let Some(hit) = self.cache.lock().unwrap().get(text) {
            return Ok(hit.clone());
        }
        let request = [text.to_string()];
        let mut values = self.backend.embed_batch(&request)?;
        self.finish_vector(text, values.remove(0))
    }

    fn finish_vector(&self, text: &str, values: Vec<f64>) -> Result<Arc<EmbeddingVector>> {
        if values.len() != self.dimension() {
            return Err(Error::DimensionMismatch {
                expected: self.dimension(),
                actual: values.len(),
            });
        }
        self.bill(text);
        let vector = Arc::new(EmbeddingVector {
            values,
            source_key: text_key(text),
        });
        let mut cache = self.cache.lock().unwrap();
        // Concurrent misses may race; the first stored vector wins so every
        // caller observes the same bits.
        let entry = cache.entry(text.to_string()).or_insert(vector);
        Ok(entry.clone())
    }

    fn bill(&self, text: &str) {
        if let Some(ledger) = &self.ledger {
            ledger.lock().unwrap().append(LedgerEntry {
                purpose: Purpose::Embed,
                prompt_tokens: crate::llm::mock_token_count(text),
                completion_tokens: 0,
            });
        }
    }

    /// Embeds every distinct query and prompt text of a corpus. Idempotent:
    /// already-cached texts are not re-embedded.
    pub fn embed_corpus(&self, corpus: &Corpus) -> Result<EmbeddingStore> {
        let mut owners: Vec<(&str, &str)> = Vec::new();
        for q in corpus.train_queries().iter().chain(corpus.test_queries()) {
            owners.push((q.id.as_str(), q.text.as_str()));
        }
        for p in corpus.prompts() {
            owners.push((p.id.as_str(), p.text.as_str()));
        }

        let mut store = EmbeddingStore::new(self.dimension());
        let mut pending: Vec<String> = Vec::new();
        let mut pending_owner: Vec<&str> = Vec::new();
        {
            let cache = self.cache.lock().unwrap();
            let mut queued = HashMap::new();
            for (id, text) in &owners {
                if let Some(hit) = cache.get(*text) {
                    store.insert(hit.as_ref().clone())?;
                } else if queued.insert(text_key(text), ()).is_none() {
                    pending.push(text.to_string());
                    pending_owner.push(id);
                }
            }
        }

        if !pending.is_empty() {
            let results = self.backend.embed_batch(&pending).map_err(|e| {
                let owner = match &e {
                    Error::MissingEmbedding(key) => pending
                        .iter()
                        .position(|t| &text_key(t) == key)
                        .map(|i| pending_owner[i]),
                    _ => None,
                };
                attach_owner(e, owner.unwrap_or(pending_owner[0]))
            })?;
            for ((text, values), id) in pending.iter().zip(results).zip(&pending_owner) {
                let vector = self
                    .finish_vector(text, values)
                    .map_err(|e| attach_owner(e, id))?;
                store.insert(vector.as_ref().clone())?;
            }
        }
        Ok(store)
    }
}

fn attach_owner(err: Error, owner_id: &str) -> Error {
    match err {
        Error::MissingEmbedding(what) => {
            Error::MissingEmbedding(format!("{owner_id} ({what})"))
        }
        Error::RemoteUnavailable(what) => {
            Error::RemoteUnavailable(format!("while embedding `{owner_id}`: {what}"))
        }
        other => other,
    }
}
