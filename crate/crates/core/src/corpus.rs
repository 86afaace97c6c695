//! Queries, prompts, demonstration records and the train / test-query /
//! test-prompt split geometry, plus binary grading of answers.
//!
//! All on-disk formats are line-delimited JSON, UTF-8, header-free; blank
//! lines are ignored.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One question with its expected answer.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Query {
    pub id: String,
    #[serde(rename = "query")]
    pub text: String,
    #[serde(rename = "answer")]
    pub golden_answer: String,
}

/// Which pool a prompt belongs to: available at training time or held out
/// for generalization tests.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PromptSplit {
    Train,
    Heldout,
}

/// A zero-shot instruction. The empty text is legal and denotes
/// "no prompting": the query is sent to the model unchanged.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Prompt {
    pub id: String,
    pub text: String,
    pub split: PromptSplit,
}

mod reward_codec {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &bool, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u8(*v as u8)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<bool, D::Error> {
        match u8::deserialize(d)? {
            0 => Ok(false),
            1 => Ok(true),
            other => Err(serde::de::Error::custom(format!(
                "reward must be 0 or 1, got {other}"
            ))),
        }
    }
}

/// One (query, prompt, reward) triple; the atom of the offline dataset.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DemonstrationRecord {
    pub query_id: String,
    pub prompt_id: String,
    pub response: Option<String>,
    #[serde(with = "reward_codec")]
    pub reward: bool,
}

/// The three dataset partitions: training pairs, test queries with training
/// prompts, and test queries with held-out prompts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitTag {
    Train,
    TestQ,
    TestP,
}

impl SplitTag {
    pub fn as_str(&self) -> &'static str {
        match self {
            SplitTag::Train => "train",
            SplitTag::TestQ => "test_q",
            SplitTag::TestP => "test_p",
        }
    }
}

/// Whether a query belongs to the training or the held-out test pool.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QuerySplit {
    Train,
    Test,
}

/// An immutable set of demonstration records sharing one partition.
#[derive(Debug, Clone)]
pub struct DemonstrationSet {
    records: Vec<DemonstrationRecord>,
    split_tag: SplitTag,
    index: HashMap<(String, String), usize>,
}

impl DemonstrationSet {
    /// Builds a set, rejecting duplicate (query, prompt) keys.
    pub fn new(records: Vec<DemonstrationRecord>, split_tag: SplitTag) -> Result<Self> {
        let mut index = HashMap::with_capacity(records.len());
        for (i, rec) in records.iter().enumerate() {
            let key = (rec.query_id.clone(), rec.prompt_id.clone());
            if index.insert(key, i).is_some() {
                return Err(Error::DuplicateId(format!(
                    "({}, {})",
                    rec.query_id, rec.prompt_id
                )));
            }
        }
        Ok(Self {
            records,
            split_tag,
            index,
        })
    }

    pub fn records(&self) -> &[DemonstrationRecord] {
        &self.records
    }

    pub fn split_tag(&self) -> SplitTag {
        self.split_tag
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Recorded reward for a (query, prompt) pair, if present.
    pub fn reward_for(&self, query_id: &str, prompt_id: &str) -> Option<bool> {
        self.index
            .get(&(query_id.to_string(), prompt_id.to_string()))
            .map(|&i| self.records[i].reward)
    }

    pub fn contains(&self, query_id: &str, prompt_id: &str) -> bool {
        self.index
            .contains_key(&(query_id.to_string(), prompt_id.to_string()))
    }

    /// Distinct prompt ids in order of first appearance.
    pub fn prompt_ids(&self) -> Vec<String> {
        let mut seen = HashSet::new();
        let mut ids = Vec::new();
        for rec in &self.records {
            if seen.insert(rec.prompt_id.clone()) {
                ids.push(rec.prompt_id.clone());
            }
        }
        ids
    }

    /// Distinct query ids in order of first appearance.
    pub fn query_ids(&self) -> Vec<String> {
        let mut seen = HashSet::new();
        let mut ids = Vec::new();
        for rec in &self.records {
            if seen.insert(rec.query_id.clone()) {
                ids.push(rec.query_id.clone());
            }
        }
        ids
    }
}

/// A task's queries and prompts with their split geometry.
///
/// Immutable after construction and safe to share across threads.
#[derive(Debug, Clone)]
pub struct Corpus {
    task_name: String,
    train_queries: Vec<Query>,
    test_queries: Vec<Query>,
    prompts: Vec<Prompt>,
    query_index: HashMap<String, (QuerySplit, usize)>,
    prompt_index: HashMap<String, usize>,
}

impl Corpus {
    pub fn new(
        task_name: impl Into<String>,
        train_queries: Vec<Query>,
        test_queries: Vec<Query>,
        prompts: Vec<Prompt>,
    ) -> Result<Self> {
        let mut query_index = HashMap::new();
        for (split, queries) in [
            (QuerySplit::Train, &train_queries),
            (QuerySplit::Test, &test_queries),
        ] {
            for (i, q) in queries.iter().enumerate() {
                if q.id.is_empty() || q.text.is_empty() {
                    return Err(Error::InvalidInput(format!(
                        "query `{}` has an empty id or text",
                        q.id
                    )));
                }
                if query_index.insert(q.id.clone(), (split, i)).is_some() {
                    return Err(Error::DuplicateId(q.id.clone()));
                }
            }
        }
        let mut prompt_index = HashMap::new();
        for (i, p) in prompts.iter().enumerate() {
            if p.id.is_empty() {
                return Err(Error::InvalidInput("prompt with empty id".into()));
            }
            if prompt_index.insert(p.id.clone(), i).is_some() {
                return Err(Error::DuplicateId(p.id.clone()));
            }
        }
        Ok(Self {
            task_name: task_name.into(),
            train_queries,
            test_queries,
            prompts,
            query_index,
            prompt_index,
        })
    }

    pub fn task_name(&self) -> &str {
        &self.task_name
    }

    pub fn train_queries(&self) -> &[Query] {
        &self.train_queries
    }

    pub fn test_queries(&self) -> &[Query] {
        &self.test_queries
    }

    pub fn prompts(&self) -> &[Prompt] {
        &self.prompts
    }

    pub fn train_prompts(&self) -> Vec<&Prompt> {
        self.prompts
            .iter()
            .filter(|p| p.split == PromptSplit::Train)
            .collect()
    }

    pub fn heldout_prompts(&self) -> Vec<&Prompt> {
        self.prompts
            .iter()
            .filter(|p| p.split == PromptSplit::Heldout)
            .collect()
    }

    pub fn query(&self, id: &str) -> Option<&Query> {
        self.query_index.get(id).map(|&(split, i)| match split {
            QuerySplit::Train => &self.train_queries[i],
            QuerySplit::Test => &self.test_queries[i],
        })
    }

    pub fn query_split(&self, id: &str) -> Option<QuerySplit> {
        self.query_index.get(id).map(|&(split, _)| split)
    }

    pub fn prompt(&self, id: &str) -> Option<&Prompt> {
        self.prompt_index.get(id).map(|&i| &self.prompts[i])
    }

    /// N: training queries.
    pub fn n_train_queries(&self) -> usize {
        self.train_queries.len()
    }

    /// M: held-out test queries.
    pub fn n_test_queries(&self) -> usize {
        self.test_queries.len()
    }

    /// K: training prompts.
    pub fn k_train_prompts(&self) -> usize {
        self.train_prompts().len()
    }

    /// P: held-out prompts.
    pub fn p_heldout_prompts(&self) -> usize {
        self.heldout_prompts().len()
    }
}

/// Manifest naming the files a corpus is assembled from. Relative paths are
/// resolved against the manifest's own directory.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusManifest {
    pub task: String,
    pub train_queries: PathBuf,
    pub test_queries: PathBuf,
    pub prompts: PathBuf,
}

fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let file = fs::File::open(path)?;
    let reader = BufReader::new(file);
    let mut out = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let value: T = serde_json::from_str(&line).map_err(|e| Error::MalformedRecord {
            path: path.display().to_string(),
            line: lineno + 1,
            detail: e.to_string(),
        })?;
        out.push(value);
    }
    Ok(out)
}

fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<()> {
    let mut buf = Vec::new();
    for item in items {
        serde_json::to_writer(&mut buf, item).map_err(|e| Error::InvalidInput(e.to_string()))?;
        buf.push(b'\n');
    }
    let mut file = fs::File::create(path)?;
    file.write_all(&buf)?;
    Ok(())
}

/// Loads `{"id","query","answer"}` lines.
pub fn load_queries(path: &Path) -> Result<Vec<Query>> {
    read_jsonl(path)
}

/// Loads `{"id","text","split"}` lines.
pub fn load_prompts(path: &Path) -> Result<Vec<Prompt>> {
    read_jsonl(path)
}

/// Loads `{"query_id","prompt_id","response","reward"}` lines.
pub fn load_demonstration_records(path: &Path) -> Result<Vec<DemonstrationRecord>> {
    read_jsonl(path)
}

pub fn save_queries(path: &Path, queries: &[Query]) -> Result<()> {
    write_jsonl(path, queries)
}

pub fn save_prompts(path: &Path, prompts: &[Prompt]) -> Result<()> {
    write_jsonl(path, prompts)
}

pub fn save_demonstration_records(path: &Path, records: &[DemonstrationRecord]) -> Result<()> {
    write_jsonl(path, records)
}

/// Loads a fully cross-referenced corpus from a manifest file.
pub fn load_corpus(manifest_path: &Path) -> Result<Corpus> {
    let raw = fs::read_to_string(manifest_path)?;
    let manifest: CorpusManifest =
        serde_json::from_str(&raw).map_err(|e| Error::MalformedRecord {
            path: manifest_path.display().to_string(),
            line: 1,
            detail: e.to_string(),
        })?;
    let base = manifest_path.parent().unwrap_or(Path::new("."));
    let resolve = |p: &Path| -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            base.join(p)
        }
    };
    let train_queries = load_queries(&resolve(&manifest.train_queries))?;
    let test_queries = load_queries(&resolve(&manifest.test_queries))?;
    let prompts = load_prompts(&resolve(&manifest.prompts))?;
    Corpus::new(manifest.task, train_queries, test_queries, prompts)
}

/// Writes a manifest plus its three component files into `dir`.
pub fn save_corpus(dir: &Path, corpus: &Corpus) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    save_queries(&dir.join("queries_train.jsonl"), corpus.train_queries())?;
    save_queries(&dir.join("queries_test.jsonl"), corpus.test_queries())?;
    save_prompts(&dir.join("prompts.jsonl"), corpus.prompts())?;
    let manifest = CorpusManifest {
        task: corpus.task_name().to_string(),
        train_queries: PathBuf::from("queries_train.jsonl"),
        test_queries: PathBuf::from("queries_test.jsonl"),
        prompts: PathBuf::from("prompts.jsonl"),
    };
    let manifest_path = dir.join("corpus.json");
    let text =
        serde_json::to_string_pretty(&manifest).map_err(|e| Error::InvalidInput(e.to_string()))?;
    fs::write(&manifest_path, text + "\n")?;
    Ok(manifest_path)
}

/// Loads a demonstration file, resolves every reference against `corpus`,
/// and infers the partition tag from the referenced splits.
pub fn load_demonstrations(path: &Path, corpus: &Corpus) -> Result<DemonstrationSet> {
    let records = load_demonstration_records(path)?;
    demonstration_set_from_records(records, corpus)
}

/// Validates references and split consistency for a batch of records.
pub fn demonstration_set_from_records(
    records: Vec<DemonstrationRecord>,
    corpus: &Corpus,
) -> Result<DemonstrationSet> {
    let mut tag: Option<SplitTag> = None;
    for rec in &records {
        let this = partition_of(corpus, &rec.query_id, &rec.prompt_id)?;
        match tag {
            None => tag = Some(this),
            Some(t) if t == this => {}
            Some(t) => {
                return Err(Error::MixedSplit(format!(
                    "record ({}, {}) belongs to {} but the set is {}",
                    rec.query_id,
                    rec.prompt_id,
                    this.as_str(),
                    t.as_str()
                )))
            }
        }
    }
    DemonstrationSet::new(records, tag.unwrap_or(SplitTag::Train))
}

fn partition_of(corpus: &Corpus, query_id: &str, prompt_id: &str) -> Result<SplitTag> {
    let q_split = corpus
        .query_split(query_id)
        .ok_or_else(|| Error::DanglingReference(query_id.to_string()))?;
    let prompt = corpus
        .prompt(prompt_id)
        .ok_or_else(|| Error::DanglingReference(prompt_id.to_string()))?;
    match (q_split, prompt.split) {
        (QuerySplit::Train, PromptSplit::Train) => Ok(SplitTag::Train),
        (QuerySplit::Test, PromptSplit::Train) => Ok(SplitTag::TestQ),
        (QuerySplit::Test, PromptSplit::Heldout) => Ok(SplitTag::TestP),
        (QuerySplit::Train, PromptSplit::Heldout) => Err(Error::MixedSplit(format!(
            "training query `{query_id}` paired with held-out prompt `{prompt_id}` \
             belongs to no partition"
        ))),
    }
}

/// Extracts the final numeric token from free text.
///
/// A token is an optionally signed run of digits with optional thousands
/// commas and an optional fractional part; a bare fractional form like
/// `.5` is also accepted. Currency symbols and a trailing period are not
/// part of the token.
pub fn extract_final_number(text: &str) -> Option<f64> {
    let bytes = text.as_bytes();
    let mut best: Option<f64> = None;
    let mut i = 0;
    while i < bytes.len() {
        let b = bytes[i];
        let signed = b == b'+' || b == b'-';
        let start_digit = b.is_ascii_digit()
            || (b == b'.' && i + 1 < bytes.len() && bytes[i + 1].is_ascii_digit());
        if !(start_digit || signed) {
            i += 1;
            continue;
        }
        let mut j = i;
        let mut sign = 1.0;
        if signed {
            // A sign glued to a preceding digit is an infix operator, not
            // a sign ("3-5" yields 3 and 5, not -5).
            if j + 1 >= bytes.len()
                || !(bytes[j + 1].is_ascii_digit()
                    || (bytes[j + 1] == b'.' && j + 2 < bytes.len() && bytes[j + 2].is_ascii_digit()))
                || (i > 0 && bytes[i - 1].is_ascii_digit())
            {
                i += 1;
                continue;
            }
            if b == b'-' {
                sign = -1.0;
            }
            j += 1;
        }
        let mut digits = String::new();
        while j < bytes.len() && (bytes[j].is_ascii_digit() || bytes[j] == b',') {
            if bytes[j] != b',' {
                digits.push(bytes[j] as char);
            }
            j += 1;
        }
        if j + 1 < bytes.len() && bytes[j] == b'.' && bytes[j + 1].is_ascii_digit() {
            digits.push('.');
            j += 1;
            while j < bytes.len() && bytes[j].is_ascii_digit() {
                digits.push(bytes[j] as char);
                j += 1;
            }
        }
        if let Ok(v) = digits.parse::<f64>() {
            best = Some(sign * v);
        }
        i = j.max(i + 1);
    }
    best
}

/// Grades a response against the golden answer.
///
/// Returns true iff the final numeric value extracted from the response
/// equals the golden value: exact equality when both are integral,
/// relative tolerance 1e-6 otherwise. Ungradable responses yield false,
/// never an error.
pub fn grade_answer(golden: &str, response: &str) -> bool {
    let Some(expected) = extract_final_number(golden) else {
        return false;
    };
    let Some(actual) = extract_final_number(response) else {
        return false;
    };
    numbers_match(expected, actual)
}

fn numbers_match(expected: f64, actual: f64) -> bool {
    if expected.fract() == 0.0 && actual.fract() == 0.0 {
        return expected == actual;
    }
    let scale = expected.abs().max(actual.abs());
    (expected - actual).abs() <= 1e-6 * scale
}

/// Turns a response map into a demonstration set, grading each response
/// against its query's golden answer. All keys must land in one partition.
pub fn assemble_demonstrations(
    corpus: &Corpus,
    responses: &BTreeMap<(String, String), Option<String>>,
) -> Result<DemonstrationSet> {
    let mut tag: Option<SplitTag> = None;
    let mut records = Vec::with_capacity(responses.len());
    for ((query_id, prompt_id), response) in responses {
        let this = partition_of(corpus, query_id, prompt_id)?;
        match tag {
            None => tag = Some(this),
            Some(t) if t == this => {}
            Some(t) => {
                return Err(Error::MixedSplit(format!(
                    "key ({query_id}, {prompt_id}) belongs to {} but earlier keys to {}",
                    this.as_str(),
                    t.as_str()
                )))
            }
        }
        let query = corpus.query(query_id).expect("resolved above");
        let reward = response
            .as_deref()
            .map(|r| grade_answer(&query.golden_answer, r))
            .unwrap_or(false);
        records.push(DemonstrationRecord {
            query_id: query_id.clone(),
            prompt_id: prompt_id.clone(),
            response: response.clone(),
            reward,
        });
    }
    DemonstrationSet::new(records, tag.unwrap_or(SplitTag::Train))
}

/// Restricts a demonstration set to the given prompts, preserving record
/// order.
pub fn subset_by_prompts(demos: &DemonstrationSet, prompt_ids: &[String]) -> Result<DemonstrationSet> {
    let referenced: HashSet<&str> = demos.records().iter().map(|r| r.prompt_id.as_str()).collect();
    for id in prompt_ids {
        if !referenced.contains(id.as_str()) {
            return Err(Error::UnknownPromptId(id.clone()));
        }
    }
    let wanted: HashSet<&str> = prompt_ids.iter().map(String::as_str).collect();
    let records = demos
        .records()
        .iter()
        .filter(|r| wanted.contains(r.prompt_id.as_str()))
        .cloned()
        .collect();
    DemonstrationSet::new(records, demos.split_tag())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn q(id: &str, text: &str, answer: &str) -> Query {
        Query {
            id: id.into(),
            text: text.into(),
            golden_answer: answer.into(),
        }
    }

    fn p(id: &str, text: &str, split: PromptSplit) -> Prompt {
        Prompt {
            id: id.into(),
            text: text.into(),
            split,
        }
    }

    fn tiny_corpus() -> Corpus {
        Corpus::new(
            "tiny",
            vec![q("q1", "2+2?", "4"), q("q2", "3*3?", "9")],
            vec![q("q3", "10-1?", "9")],
            vec![
                p("p1", "Let's think step by step:", PromptSplit::Train),
                p("p2", "", PromptSplit::Heldout),
            ],
        )
        .unwrap()
    }

    #[test]
    fn corpus_counts_from_loaded_files() {
        let dir = tempfile::tempdir().unwrap();
        let corpus = tiny_corpus();
        let manifest = save_corpus(dir.path(), &corpus).unwrap();
        let loaded = load_corpus(&manifest).unwrap();
        assert_eq!(loaded.n_train_queries(), 2);
        assert_eq!(loaded.n_test_queries(), 1);
        assert_eq!(loaded.k_train_prompts(), 1);
        assert_eq!(loaded.p_heldout_prompts(), 1);
        assert_eq!(loaded.task_name(), "tiny");
    }

    #[test]
    fn corpus_rejects_duplicate_query_id() {
        let err = Corpus::new(
            "dup",
            vec![q("q1", "a?", "1"), q("q1", "b?", "2")],
            vec![],
            vec![p("p1", "x", PromptSplit::Train)],
        )
        .unwrap_err();
        assert!(matches!(err, Error::DuplicateId(ref id) if id == "q1"));
    }

    #[test]
    fn corpus_rejects_duplicate_across_splits() {
        let err = Corpus::new(
            "dup",
            vec![q("q1", "a?", "1")],
            vec![q("q1", "b?", "2")],
            vec![],
        )
        .unwrap_err();
        assert!(matches!(err, Error::DuplicateId(_)));
    }

    #[test]
    fn malformed_line_reports_position() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("queries.jsonl");
        fs::write(&path, "{\"id\":\"q1\",\"query\":\"a?\",\"answer\":\"1\"}\n\nnot json\n").unwrap();
        let err = load_queries(&path).unwrap_err();
        match err {
            Error::MalformedRecord { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn grade_takes_last_number() {
        let response = "Each cell phone costs $150 + $3 = $153. The total is $153 x 5 = $765. \
                        Thus, Shiela will pay $765/3 = $255 each month. Answer: 255.";
        assert!(grade_answer("255", response));
        assert!(grade_answer("#### 255", response));
    }

    #[test]
    fn grade_exact_match() {
        assert!(grade_answer("42", "42"));
    }

    #[test]
    fn grade_rejects_wrong_final_value() {
        assert!(!grade_answer(
            "48",
            "Therefore you can eat 240 grams of chips if your daily calorie target is 2000 \
             and you have already consumed 1800 calories. The answer is 240 grams"
        ));
    }

    #[test]
    fn grade_normalizes_commas_and_currency() {
        assert!(grade_answer("1,800", "1800"));
        assert!(grade_answer("1800", "$1,800"));
    }

    #[test]
    fn grade_handles_decimals_with_tolerance() {
        assert!(grade_answer("3.5", "the answer is 3.5"));
        assert!(grade_answer("0.333333", "0.3333333")); // within 1e-6 relative
        assert!(!grade_answer("3.5", "3.6"));
        assert!(!grade_answer("10", "10.5"));
    }

    #[test]
    fn grade_integers_are_strict() {
        assert!(!grade_answer("1000000", "1000001"));
    }

    #[test]
    fn grade_ungradable_returns_zero() {
        assert!(!grade_answer("42", "I do not know"));
        assert!(!grade_answer("no numbers here", "42"));
    }

    #[test]
    fn extract_handles_edge_forms() {
        assert_eq!(extract_final_number("answer: -5"), Some(-5.0));
        assert_eq!(extract_final_number("range 3-5"), Some(5.0));
        assert_eq!(extract_final_number("about .5 cups"), Some(0.5));
        assert_eq!(extract_final_number("Answer: 255."), Some(255.0));
        assert_eq!(extract_final_number(""), None);
    }

    #[test]
    fn assemble_all_correct() {
        let corpus = Corpus::new(
            "t",
            vec![q("q1", "2+2?", "4"), q("q2", "1+1?", "2")],
            vec![],
            vec![
                p("p1", "a", PromptSplit::Train),
                p("p2", "b", PromptSplit::Train),
                p("p3", "c", PromptSplit::Train),
            ],
        )
        .unwrap();
        let mut responses = BTreeMap::new();
        for qid in ["q1", "q2"] {
            for pid in ["p1", "p2", "p3"] {
                let answer = if qid == "q1" { "4" } else { "2" };
                responses.insert((qid.to_string(), pid.to_string()), Some(answer.to_string()));
            }
        }
        let demos = assemble_demonstrations(&corpus, &responses).unwrap();
        assert_eq!(demos.len(), 6);
        assert!(demos.records().iter().all(|r| r.reward));
        assert_eq!(demos.split_tag(), SplitTag::Train);
    }

    #[test]
    fn assemble_empty_map() {
        let corpus = tiny_corpus();
        let demos = assemble_demonstrations(&corpus, &BTreeMap::new()).unwrap();
        assert!(demos.is_empty());
    }

    #[test]
    fn assemble_rejects_mixed_partitions() {
        let corpus = tiny_corpus();
        let mut responses = BTreeMap::new();
        // (train query, train prompt) and (test query, train prompt) span
        // two partitions.
        responses.insert(("q1".to_string(), "p1".to_string()), Some("4".to_string()));
        responses.insert(("q3".to_string(), "p1".to_string()), Some("9".to_string()));
        let err = assemble_demonstrations(&corpus, &responses).unwrap_err();
        assert!(matches!(err, Error::MixedSplit(_)));
    }

    #[test]
    fn assemble_rejects_train_query_heldout_prompt() {
        let corpus = tiny_corpus();
        let mut responses = BTreeMap::new();
        responses.insert(("q1".to_string(), "p2".to_string()), Some("4".to_string()));
        let err = assemble_demonstrations(&corpus, &responses).unwrap_err();
        assert!(matches!(err, Error::MixedSplit(_)));
    }

    #[test]
    fn assemble_rejects_dangling_reference() {
        let corpus = tiny_corpus();
        let mut responses = BTreeMap::new();
        responses.insert(("nope".to_string(), "p1".to_string()), None);
        let err = assemble_demonstrations(&corpus, &responses).unwrap_err();
        assert!(matches!(err, Error::DanglingReference(_)));
    }

    /// Ten hand-graded responses; the expected rewards were worked out by
    /// hand before the implementation existed.
    #[test]
    fn assemble_matches_hand_graded_fixture() {
        let golden = [
            ("q0", "12"),
            ("q1", "7"),
            ("q2", "100"),
            ("q3", "0.5"),
            ("q4", "1,000"),
            ("q5", "42"),
            ("q6", "8"),
            ("q7", "3"),
            ("q8", "250"),
            ("q9", "9"),
        ];
        let responses = [
            ("q0", "6+6 = 12. Answer: 12", true),
            ("q1", "The total is 7.", true),
            ("q2", "50 + 50 = 100, but wait, it is 105", false),
            ("q3", "half of one is 0.5", true),
            ("q4", "$1,000 total", true),
            ("q5", "besides having no numerals, this is wrong", false),
            ("q6", "2^3 = 8 so the answer is 8", true),
            ("q7", "3 - 1 = 2", false),
            ("q8", "each pays $250", true),
            ("q9", "nine", false),
        ];
        let queries: Vec<Query> = golden
            .iter()
            .map(|(id, ans)| q(id, &format!("question {id}"), ans))
            .collect();
        let corpus = Corpus::new(
            "fixture",
            queries,
            vec![],
            vec![p("p1", "solve it", PromptSplit::Train)],
        )
        .unwrap();
        let mut map = BTreeMap::new();
        for (qid, resp, _) in &responses {
            map.insert(
                (qid.to_string(), "p1".to_string()),
                Some(resp.to_string()),
            );
        }
        let demos = assemble_demonstrations(&corpus, &map).unwrap();
        for (qid, _, expected) in &responses {
            assert_eq!(
                demos.reward_for(qid, "p1"),
                Some(*expected),
                "wrong grade for {qid}"
            );
        }
    }

    #[test]
    fn subset_identity_and_cardinality() {
        let corpus = Corpus::new(
            "t",
            vec![q("q1", "a?", "1"), q("q2", "b?", "2")],
            vec![],
            (1..=6)
                .map(|i| p(&format!("p{i}"), "x", PromptSplit::Train))
                .collect(),
        )
        .unwrap();
        let mut responses = BTreeMap::new();
        for qq in ["q1", "q2"] {
            for i in 1..=6 {
                responses.insert((qq.to_string(), format!("p{i}")), None);
            }
        }
        let demos = assemble_demonstrations(&corpus, &responses).unwrap();
        let all_ids: Vec<String> = (1..=6).map(|i| format!("p{i}")).collect();
        let full = subset_by_prompts(&demos, &all_ids).unwrap();
        assert_eq!(full.len(), demos.len());
        let one = subset_by_prompts(&demos, &["p3".to_string()]).unwrap();
        assert_eq!(one.len(), 2); // one record per query
    }

    #[test]
    fn subset_matches_brute_force_filter() {
        let corpus = tiny_corpus();
        let mut responses = BTreeMap::new();
        for qq in ["q1", "q2"] {
            responses.insert((qq.to_string(), "p1".to_string()), Some("4".to_string()));
        }
        let demos = assemble_demonstrations(&corpus, &responses).unwrap();
        let picked = subset_by_prompts(&demos, &["p1".to_string()]).unwrap();
        let brute: Vec<_> = demos
            .records()
            .iter()
            .filter(|r| r.prompt_id == "p1")
            .cloned()
            .collect();
        assert_eq!(picked.len(), brute.len());
        for (a, b) in picked.records().iter().zip(brute.iter()) {
            assert_eq!(a.query_id, b.query_id);
            assert_eq!(a.prompt_id, b.prompt_id);
        }
    }

    #[test]
    fn subset_unknown_prompt_errors() {
        let corpus = tiny_corpus();
        let mut responses = BTreeMap::new();
        responses.insert(("q1".to_string(), "p1".to_string()), None);
        let demos = assemble_demonstrations(&corpus, &responses).unwrap();
        let err = subset_by_prompts(&demos, &["p9".to_string()]).unwrap_err();
        assert!(matches!(err, Error::UnknownPromptId(_)));
    }

    #[test]
    fn demonstration_set_rejects_duplicate_pairs() {
        let rec = DemonstrationRecord {
            query_id: "q1".into(),
            prompt_id: "p1".into(),
            response: None,
            reward: false,
        };
        let err = DemonstrationSet::new(vec![rec.clone(), rec], SplitTag::Train).unwrap_err();
        assert!(matches!(err, Error::DuplicateId(_)));
    }

    #[test]
    fn load_demonstrations_infers_split() {
        let dir = tempfile::tempdir().unwrap();
        let corpus = tiny_corpus();
        let path = dir.path().join("demos.jsonl");
        fs::write(
            &path,
            "{\"query_id\":\"q3\",\"prompt_id\":\"p1\",\"response\":null,\"reward\":1}\n",
        )
        .unwrap();
        let demos = load_demonstrations(&path, &corpus).unwrap();
        assert_eq!(demos.split_tag(), SplitTag::TestQ);
        assert_eq!(demos.reward_for("q3", "p1"), Some(true));
    }

    #[test]
    fn reward_codec_rejects_other_values() {
        let err = serde_json::from_str::<DemonstrationRecord>(
            "{\"query_id\":\"q\",\"prompt_id\":\"p\",\"response\":null,\"reward\":2}",
        )
        .unwrap_err();
        assert!(err.to_string().contains("reward"));
    }

    proptest! {
        /// Thousands separators and currency markers on the golden value
        /// do not change the grade.
        #[test]
        fn grade_is_normalization_symmetric(n in 0u64..10_000_000) {
            let plain = n.to_string();
            let mut grouped = String::new();
            let digits = plain.as_bytes();
            for (i, b) in digits.iter().enumerate() {
                if i > 0 && (digits.len() - i) % 3 == 0 {
                    grouped.push(',');
                }
                grouped.push(*b as char);
            }
            let currency = format!("${grouped}");
            prop_assert!(grade_answer(&grouped, &plain));
            prop_assert!(grade_answer(&plain, &currency));
        }

        /// Subsetting demonstrations commutes with filtering the response
        /// map to the same prompts.
        #[test]
        fn assemble_subset_commutes(keep_mask in proptest::collection::vec(any::<bool>(), 4),
                                    rewards in proptest::collection::vec(any::<bool>(), 12)) {
            let queries: Vec<Query> = (0..3)
                .map(|i| q(&format!("q{i}"), &format!("t{i}"), "1"))
                .collect();
            let prompts: Vec<Prompt> = (0..4)
                .map(|i| p(&format!("p{i}"), "x", PromptSplit::Train))
                .collect();
            let corpus = Corpus::new("t", queries, vec![], prompts).unwrap();
            let mut responses = BTreeMap::new();
            let mut it = rewards.iter();
            for qi in 0..3 {
                for pi in 0..4 {
                    let ok = *it.next().unwrap();
                    let resp = if ok { Some("1".to_string()) } else { Some("0".to_string()) };
                    responses.insert((format!("q{qi}"), format!("p{pi}")), resp);
                }
            }
            let kept: Vec<String> = (0..4)
                .filter(|i| keep_mask[*i])
                .map(|i| format!("p{i}"))
                .collect();
            let full = assemble_demonstrations(&corpus, &responses).unwrap();
            let via_subset = subset_by_prompts(&full, &kept).unwrap();
            let filtered: BTreeMap<_, _> = responses
                .iter()
                .filter(|((_, pid), _)| kept.contains(pid))
                .map(|(k, v)| (k.clone(), v.clone()))
                .collect();
            let direct = assemble_demonstrations(&corpus, &filtered).unwrap();
            prop_assert_eq!(via_subset.len(), direct.len());
            for rec in direct.records() {
                prop_assert_eq!(
                    via_subset.reward_for(&rec.query_id, &rec.prompt_id),
                    Some(rec.reward)
                );
            }
        }

        /// Record count never exceeds |queries| x |prompts|, with equality
        /// for a total response map.
        #[test]
        fn record_count_bound(nq in 1usize..4, np in 1usize..4) {
            let queries: Vec<Query> = (0..nq)
                .map(|i| q(&format!("q{i}"), &format!("t{i}"), "1"))
                .collect();
            let prompts: Vec<Prompt> = (0..np)
                .map(|i| p(&format!("p{i}"), "x", PromptSplit::Train))
                .collect();
            let corpus = Corpus::new("t", queries, vec![], prompts).unwrap();
            let mut responses = BTreeMap::new();
            for qi in 0..nq {
                for pi in 0..np {
                    responses.insert((format!("q{qi}"), format!("p{pi}")), None);
                }
            }
            let demos = assemble_demonstrations(&corpus, &responses).unwrap();
            prop_assert_eq!(demos.len(), nq * np);
        }
    }
}
