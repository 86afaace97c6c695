//! Prompt-selection strategies: distribution-level best-of-training,
//! reward-model-guided query-dependent selection over training or
//! training-plus-held-out prompts, nearest neighbor, oracle, and the
//! LLM-confidence baseline.

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::corpus::{extract_final_number, Corpus, DemonstrationSet, Prompt, Query};
use crate::embedding::{feature_vector, EmbeddingStore};
use crate::error::{Error, Result};
use crate::llm::LlmClient;
use crate::reward::RewardModel;

/// Default prompted-query layout: the instruction follows the question.
pub const DEFAULT_TEMPLATE: &str = "{query}\n{prompt}";

/// Critique request used by the LLM-confidence baseline.
pub const CONFIDENCE_TEMPLATE: &str = "Question: {query}\nProposed answer: {answer}\n\
     Is the proposed answer correct? Reply with only a confidence number between 0 and 1.";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Distributional,
    BestOfTrainQd,
    PromptOirl,
    NearestNeighbor,
    Oracle,
    LlmConfidence,
}

impl Strategy {
    pub fn as_str(&self) -> &'static str {
        match self {
            Strategy::Distributional => "distributional",
            Strategy::BestOfTrainQd => "best_of_train_qd",
            Strategy::PromptOirl => "prompt_oirl",
            Strategy::NearestNeighbor => "nearest_neighbor",
            Strategy::Oracle => "oracle",
            Strategy::LlmConfidence => "llm_confidence",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "distributional" => Ok(Strategy::Distributional),
            "best_of_train_qd" => Ok(Strategy::BestOfTrainQd),
            "prompt_oirl" => Ok(Strategy::PromptOirl),
            "nearest_neighbor" => Ok(Strategy::NearestNeighbor),
            "oracle" => Ok(Strategy::Oracle),
            "llm_confidence" => Ok(Strategy::LlmConfidence),
            other => Err(Error::InvalidInput(format!("unknown strategy `{other}`"))),
        }
    }
}

/// The final model input: query text combined with a prompt instruction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptedQuery {
    pub text: String,
    pub query_id: String,
    pub prompt_id: String,
}

/// A policy's choice of prompt for a query, with its full score trace.
/// Scores keep candidate order; the chosen prompt is the lowest-indexed
/// maximizer, and `tie_broken` records whether the maximum was shared.
#[derive(Debug, Clone, PartialEq)]
pub struct PromptSelection {
    pub query_id: Option<String>,
    pub chosen_prompt_id: String,
    pub scores: Vec<(String, f64)>,
    pub tie_broken: bool,
    pub strategy: Strategy,
}

impl PromptSelection {
    fn from_scores(
        query_id: Option<String>,
        scores: Vec<(String, f64)>,
        strategy: Strategy,
    ) -> Result<Self> {
        let (winner, tie_broken) = argmax(&scores)?;
        Ok(Self {
            query_id,
            chosen_prompt_id: scores[winner].0.clone(),
            scores,
            tie_broken,
            strategy,
        })
    }

    pub fn chosen_score(&self) -> f64 {
        self.scores
            .iter()
            .find(|(id, _)| id == &self.chosen_prompt_id)
            .map(|(_, s)| *s)
            .unwrap_or(f64::NAN)
    }

    /// One line of the selection trace file.
    pub fn to_trace_json(&self) -> serde_json::Value {
        let scores: serde_json::Map<String, serde_json::Value> = self
            .scores
            .iter()
            .map(|(id, s)| (id.clone(), json!(s)))
            .collect();
        json!({
            "query_id": self.query_id,
            "strategy": self.strategy.as_str(),
            "chosen_prompt_id": self.chosen_prompt_id,
            "scores": scores,
            "tie_broken": self.tie_broken,
        })
    }
}

/// First index attaining the maximum, plus whether that maximum is shared.
fn argmax(scores: &[(String, f64)]) -> Result<(usize, bool)> {
    if scores.is_empty() {
        return Err(Error::InvalidInput("no candidates to select from".into()));
    }
    let mut best = 0usize;
    for (i, (_, s)) in scores.iter().enumerate().skip(1) {
        if *s > scores[best].1 {
            best = i;
        }
    }
    let ties = scores.iter().filter(|(_, s)| *s == scores[best].1).count();
    Ok((best, ties > 1))
}

/// Expands a template over `{query}` and `{prompt}`. The empty prompt with
/// the default template yields the bare query (separators trimmed).
pub fn apply_prompt(prompt: &Prompt, query: &Query, template: &str) -> Result<PromptedQuery> {
    for placeholder in ["{query}", "{prompt}"] {
        if !template.contains(placeholder) {
            return Err(Error::BadTemplate(format!(
                "template is missing the {placeholder} placeholder"
            )));
        }
    }
    let expanded = template
        .replace("{query}", &query.text)
        .replace("{prompt}", &prompt.text);
    let text = if prompt.text.is_empty() {
        expanded.trim().to_string()
    } else {
        expanded
    };
    Ok(PromptedQuery {
        text,
        query_id: query.id.clone(),
        prompt_id: prompt.id.clone(),
    })
}

/// Per-prompt empirical success rates over the training demonstrations, in
/// order of first appearance.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainPromptStats {
    entries: Vec<(String, f64)>,
}

impl TrainPromptStats {
    pub fn rates(&self) -> &[(String, f64)] {
        &self.entries
    }

    pub fn rate(&self, prompt_id: &str) -> Option<f64> {
        self.entries
            .iter()
            .find(|(id, _)| id == prompt_id)
            .map(|(_, r)| *r)
    }
}

pub fn train_prompt_stats(train_demos: &DemonstrationSet) -> Result<TrainPromptStats> {
    if train_demos.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut order: Vec<String> = Vec::new();
    let mut tally: std::collections::HashMap<String, (u64, u64)> = std::collections::HashMap::new();
    for rec in train_demos.records() {
        let entry = tally.entry(rec.prompt_id.clone()).or_insert_with(|| {
            order.push(rec.prompt_id.clone());
            (0, 0)
        });
        entry.0 += rec.reward as u64;
        entry.1 += 1;
    }
    let entries = order
        .into_iter()
        .map(|id| {
            let (successes, total) = tally[&id];
            (id, successes as f64 / total as f64)
        })
        .collect();
    Ok(TrainPromptStats { entries })
}

/// The distribution-level baseline: one prompt for every query, the one
/// with the best overall training success.
pub fn select_distributional(stats: &TrainPromptStats) -> Result<PromptSelection> {
    PromptSelection::from_scores(None, stats.entries.clone(), Strategy::Distributional)
}

/// Scores every candidate with the learned reward model and takes the
/// argmax. With training prompts as candidates this is the query-dependent
/// best-of-training policy; adding held-out prompts makes it the full
/// offline-selection policy, so the caller names the strategy.
pub fn select_query_dependent(
    model: &RewardModel,
    query: &Query,
    candidates: &[Prompt],
    store: &EmbeddingStore,
    strategy: Strategy,
) -> Result<PromptSelection> {
    let e_q = store
        .get_for_text(&query.text)
        .ok_or_else(|| Error::MissingEmbedding(query.id.clone()))?;
    let mut scores = Vec::with_capacity(candidates.len());
    for prompt in candidates {
        let e_p = store
            .get_for_text(&prompt.text)
            .ok_or_else(|| Error::MissingEmbedding(prompt.id.clone()))?;
        let features = feature_vector(e_q, e_p)?;
        scores.push((prompt.id.clone(), model.predict(&features)?));
    }
    PromptSelection::from_scores(Some(query.id.clone()), scores, strategy)
}

/// Hypothetical perfect evaluator: picks a prompt recorded as successful
/// for this query when one exists, the lowest-indexed candidate otherwise.
/// Scores are the true rewards.
pub fn select_oracle(
    eval_demos: &DemonstrationSet,
    query: &Query,
    candidates: &[Prompt],
) -> Result<PromptSelection> {
    let mut scores = Vec::with_capacity(candidates.len());
    for prompt in candidates {
        let reward =
            eval_demos
                .reward_for(&query.id, &prompt.id)
                .ok_or_else(|| Error::MissingRecord {
                    query_id: query.id.clone(),
                    prompt_id: prompt.id.clone(),
                })?;
        scores.push((prompt.id.clone(), reward as u8 as f64));
    }
    PromptSelection::from_scores(Some(query.id.clone()), scores, Strategy::Oracle)
}

/// Finds the training query closest to the test query in embedding space
/// and reuses a prompt that succeeded there. Candidates must be training
/// prompts; when the neighbor had no successful candidate the choice falls
/// back to the distributional baseline.
pub fn select_nearest_neighbor(
    train_demos: &DemonstrationSet,
    corpus: &Corpus,
    store: &EmbeddingStore,
    query: &Query,
    candidates: &[Prompt],
) -> Result<PromptSelection> {
    if train_demos.is_empty() {
        return Err(Error::EmptyDataset);
    }
    for prompt in candidates {
        if prompt.split != crate::corpus::PromptSplit::Train {
            return Err(Error::UnknownPromptId(format!(
                "{} is not a training prompt",
                prompt.id
            )));
        }
    }
    let e_q = store
        .get_for_text(&query.text)
        .ok_or_else(|| Error::MissingEmbedding(query.id.clone()))?;

    let mut neighbor: Option<(String, f64)> = None;
    for qid in train_demos.query_ids() {
        let train_query = corpus
            .query(&qid)
            .ok_or_else(|| Error::DanglingReference(qid.clone()))?;
        let e_t = store
            .get_for_text(&train_query.text)
            .ok_or_else(|| Error::MissingEmbedding(qid.clone()))?;
        let dist: f64 = e_q
            .values
            .iter()
            .zip(&e_t.values)
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        match &neighbor {
            Some((_, best)) if dist >= *best => {}
            _ => neighbor = Some((qid, dist)),
        }
    }
    let (neighbor_id, _) = neighbor.expect("non-empty demos have a nearest neighbor");

    let scores: Vec<(String, f64)> = candidates
        .iter()
        .map(|p| {
            let reward = train_demos
                .reward_for(&neighbor_id, &p.id)
                .unwrap_or(false);
            (p.id.clone(), reward as u8 as f64)
        })
        .collect();
    let any_success = scores.iter().any(|(_, s)| *s > 0.0);
    if any_success {
        PromptSelection::from_scores(Some(query.id.clone()), scores, Strategy::NearestNeighbor)
    } else {
        let stats = train_prompt_stats(train_demos)?;
        let fallback = select_distributional(&stats)?;
        Ok(PromptSelection {
            query_id: Some(query.id.clone()),
            chosen_prompt_id: fallback.chosen_prompt_id,
            scores: fallback.scores,
            tie_broken: fallback.tie_broken,
            strategy: Strategy::NearestNeighbor,
        })
    }
}

/// The self-critique baseline: answer under every candidate (K calls), ask
/// the model for a confidence on each answer (K more calls), take the most
/// confident. Unparseable confidences count as 0.0; the number of such
/// fallbacks is returned alongside the selection.
pub fn select_llm_confidence(
    client: &LlmClient,
    query: &Query,
    candidates: &[Prompt],
    template: &str,
) -> Result<(PromptSelection, usize)> {
    let mut scores = Vec::with_capacity(candidates.len());
    let mut unparseable = 0usize;
    for prompt in candidates {
        let prompted = apply_prompt(prompt, query, template)?;
        let answer = client.complete(&prompted)?;
        let critique_request = CONFIDENCE_TEMPLATE
            .replace("{query}", &query.text)
            .replace("{answer}", &answer.text);
        let critique = client.critique(&critique_request)?;
        let confidence = match extract_final_number(&critique.text) {
            Some(c) if (0.0..=1.0).contains(&c) => c,
            _ => {
                unparseable += 1;
                0.0
            }
        };
        scores.push((prompt.id.clone(), confidence));
    }
    let selection =
        PromptSelection::from_scores(Some(query.id.clone()), scores, Strategy::LlmConfidence)?;
    Ok((selection, unparseable))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{DemonstrationRecord, PromptSplit, SplitTag};
    use crate::embedding::{text_key, EmbeddingStore, EmbeddingVector};
    use crate::llm::Purpose;
    use std::collections::HashMap;

    fn q(id: &str, text: &str) -> Query {
        Query {
            id: id.into(),
            text: text.into(),
            golden_answer: "1".into(),
        }
    }

    fn p(id: &str, text: &str) -> Prompt {
        Prompt {
            id: id.into(),
            text: text.into(),
            split: PromptSplit::Train,
        }
    }

    fn demos(records: Vec<(&str, &str, bool)>, tag: SplitTag) -> DemonstrationSet {
        let records = records
            .into_iter()
            .map(|(qid, pid, reward)| DemonstrationRecord {
                query_id: qid.into(),
                prompt_id: pid.into(),
                response: None,
                reward,
            })
            .collect();
        DemonstrationSet::new(records, tag).unwrap()
    }

    #[test]
    fn apply_prompt_appends_instruction() {
        let query = q("q1", "2+2?");
        let prompt = p("p1", "Let's think step by step:");
        let prompted = apply_prompt(&prompt, &query, DEFAULT_TEMPLATE).unwrap();
        assert_eq!(prompted.text, "2+2?\nLet's think step by step:");
    }

    #[test]
    fn apply_empty_prompt_trims_separator() {
        let query = q("q1", "2+2?");
        let prompt = p("p1", "");
        let prompted = apply_prompt(&prompt, &query, DEFAULT_TEMPLATE).unwrap();
        assert_eq!(prompted.text, "2+2?");
    }

    #[test]
    fn apply_rejects_template_without_query() {
        let query = q("q1", "2+2?");
        let prompt = p("p1", "x");
        let err = apply_prompt(&prompt, &query, "{prompt} only").unwrap_err();
        assert!(matches!(err, Error::BadTemplate(_)));
    }

    #[test]
    fn stats_compute_ratios() {
        let set = demos(
            vec![
                ("q1", "p1", true),
                ("q2", "p1", true),
                ("q3", "p1", true),
                ("q4", "p1", false),
            ],
            SplitTag::Train,
        );
        let stats = train_prompt_stats(&set).unwrap();
        assert_eq!(stats.rate("p1"), Some(0.75));
    }

    #[test]
    fn stats_all_correct() {
        let set = demos(
            vec![("q1", "p1", true), ("q1", "p2", true), ("q2", "p1", true), ("q2", "p2", true)],
            SplitTag::Train,
        );
        let stats = train_prompt_stats(&set).unwrap();
        assert!(stats.rates().iter().all(|(_, r)| *r == 1.0));
    }

    #[test]
    fn stats_match_manual_tally_over_six_prompts() {
        // 4 queries x 6 prompts with a fixed reward pattern; expected rates
        // were tallied by hand: prompt j succeeds on queries i with
        // (i + j) % (j + 2) == 0.
        let mut records = Vec::new();
        let mut expected = Vec::new();
        for j in 0..6u64 {
            let mut wins = 0u64;
            for i in 0..4u64 {
                let reward = (i + j) % (j + 2) == 0;
                wins += reward as u64;
                records.push((
                    format!("q{i}"),
                    format!("p{j}"),
                    reward,
                ));
            }
            expected.push(wins as f64 / 4.0);
        }
        let set = DemonstrationSet::new(
            records
                .into_iter()
                .map(|(qid, pid, reward)| DemonstrationRecord {
                    query_id: qid,
                    prompt_id: pid,
                    response: None,
                    reward,
                })
                .collect(),
            SplitTag::Train,
        )
        .unwrap();
        let stats = train_prompt_stats(&set).unwrap();
        for j in 0..6 {
            assert_eq!(stats.rate(&format!("p{j}")), Some(expected[j]));
        }
    }

    #[test]
    fn distributional_takes_argmax() {
        let stats = TrainPromptStats {
            entries: vec![("p1".into(), 0.6), ("p2".into(), 0.7)],
        };
        let sel = select_distributional(&stats).unwrap();
        assert_eq!(sel.chosen_prompt_id, "p2");
        assert!(!sel.tie_broken);
        assert!(sel.query_id.is_none());
    }

    #[test]
    fn distributional_breaks_ties_by_lowest_index() {
        let stats = TrainPromptStats {
            entries: vec![("p1".into(), 0.5), ("p2".into(), 0.5), ("p3".into(), 0.5)],
        };
        let sel = select_distributional(&stats).unwrap();
        assert_eq!(sel.chosen_prompt_id, "p1");
        assert!(sel.tie_broken);
    }

    #[test]
    fn oracle_prefers_recorded_success() {
        let set = demos(
            vec![("q1", "p1", false), ("q1", "p2", true)],
            SplitTag::TestQ,
        );
        let sel = select_oracle(&set, &q("q1", "x"), &[p("p1", "a"), p("p2", "b")]).unwrap();
        assert_eq!(sel.chosen_prompt_id, "p2");
    }

    #[test]
    fn oracle_all_failures_still_selects() {
        let set = demos(
            vec![("q1", "p1", false), ("q1", "p2", false)],
            SplitTag::TestQ,
        );
        let sel = select_oracle(&set, &q("q1", "x"), &[p("p1", "a"), p("p2", "b")]).unwrap();
        assert_eq!(sel.chosen_prompt_id, "p1");
        assert!(sel.tie_broken);
    }

    #[test]
    fn oracle_missing_record_errors() {
        let set = demos(vec![("q1", "p1", true)], SplitTag::TestQ);
        let err = select_oracle(&set, &q("q1", "x"), &[p("p1", "a"), p("p2", "b")]).unwrap_err();
        assert!(matches!(err, Error::MissingRecord { .. }));
    }

    fn store_with(entries: &[(&str, Vec<f64>)]) -> EmbeddingStore {
        let dim = entries[0].1.len();
        let mut store = EmbeddingStore::new(dim);
        for (text, values) in entries {
            store
                .insert(EmbeddingVector {
                    values: values.clone(),
                    source_key: text_key(text),
                })
                .unwrap();
        }
        store
    }

    #[test]
    fn nearest_neighbor_reuses_successful_prompt_at_zero_distance() {
        let corpus = Corpus::new(
            "t",
            vec![q("t1", "alpha"), q("t2", "beta")],
            vec![q("x1", "alpha")],
            vec![p("p1", "a"), p("p2", "b")],
        )
        .unwrap();
        let train = demos(
            vec![
                ("t1", "p1", false),
                ("t1", "p2", true),
                ("t2", "p1", true),
                ("t2", "p2", false),
            ],
            SplitTag::Train,
        );
        let store = store_with(&[
            ("alpha", vec![1.0, 0.0]),
            ("beta", vec![0.0, 1.0]),
            ("a", vec![0.5, 0.5]),
            ("b", vec![0.5, -0.5]),
        ]);
        let sel = select_nearest_neighbor(
            &train,
            &corpus,
            &store,
            corpus.query("x1").unwrap(),
            &[p("p1", "a"), p("p2", "b")],
        )
        .unwrap();
        // x1 sits exactly on t1, whose only success is p2.
        assert_eq!(sel.chosen_prompt_id, "p2");
    }

    #[test]
    fn nearest_neighbor_matches_brute_force_scan() {
        let train_texts = ["t a", "t b", "t c", "t d", "t e"];
        let coords: [Vec<f64>; 5] = [
            vec![0.0, 0.0],
            vec![1.0, 0.0],
            vec![0.0, 1.0],
            vec![0.7, 0.7],
            vec![-1.0, 0.3],
        ];
        let queries: Vec<Query> = train_texts
            .iter()
            .enumerate()
            .map(|(i, t)| q(&format!("t{i}"), t))
            .collect();
        let corpus = Corpus::new(
            "t",
            queries,
            vec![q("x", "probe")],
            vec![p("p1", "a"), p("p2", "b")],
        )
        .unwrap();
        let probe = vec![0.6, 0.5];
        let mut entries: Vec<(&str, Vec<f64>)> = train_texts
            .iter()
            .zip(coords.iter())
            .map(|(t, c)| (*t, c.clone()))
            .collect();
        entries.push(("probe", probe.clone()));
        entries.push(("a", vec![0.0, 0.0]));
        entries.push(("b", vec![0.0, 0.0]));
        let store = store_with(&entries);

        // Brute-force nearest index.
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (i, c) in coords.iter().enumerate() {
            let d: f64 = c.iter().zip(&probe).map(|(a, b)| (a - b) * (a - b)).sum();
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        assert_eq!(best, 3);

        // Only the true nearest neighbor t3 succeeds under p2; every other
        // query succeeds under p1, which is also the distributional
        // favorite. The selection lands on p2 only when t3 is the neighbor.
        let records: Vec<DemonstrationRecord> = (0..5)
            .flat_map(|i| {
                [("p1", i != 3), ("p2", i == 3)]
                    .into_iter()
                    .map(move |(pid, reward)| DemonstrationRecord {
                        query_id: format!("t{i}"),
                        prompt_id: pid.into(),
                        response: None,
                        reward,
                    })
            })
            .collect();
        let train = DemonstrationSet::new(records, SplitTag::Train).unwrap();
        let sel = select_nearest_neighbor(
            &train,
            &corpus,
            &store,
            corpus.query("x").unwrap(),
            &[p("p1", "a"), p("p2", "b")],
        )
        .unwrap();
        assert_eq!(sel.chosen_prompt_id, "p2");
        assert!(!sel.tie_broken);
    }

    #[test]
    fn nearest_neighbor_falls_back_to_distributional() {
        let corpus = Corpus::new(
            "t",
            vec![q("t1", "alpha")],
            vec![q("x1", "alpha")],
            vec![p("p1", "a"), p("p2", "b")],
        )
        .unwrap();
        let train = demos(
            vec![("t1", "p1", false), ("t1", "p2", false)],
            SplitTag::Train,
        );
        let store = store_with(&[
            ("alpha", vec![1.0]),
            ("a", vec![0.0]),
            ("b", vec![0.0]),
        ]);
        let sel = select_nearest_neighbor(
            &train,
            &corpus,
            &store,
            corpus.query("x1").unwrap(),
            &[p("p1", "a"), p("p2", "b")],
        )
        .unwrap();
        assert_eq!(sel.strategy, Strategy::NearestNeighbor);
        assert_eq!(sel.chosen_prompt_id, "p1"); // all rates 0, lowest index
        assert!(sel.tie_broken);
    }

    #[test]
    fn nearest_neighbor_rejects_heldout_candidates() {
        let corpus = Corpus::new(
            "t",
            vec![q("t1", "alpha")],
            vec![q("x1", "beta")],
            vec![p("p1", "a")],
        )
        .unwrap();
        let train = demos(vec![("t1", "p1", true)], SplitTag::Train);
        let store = store_with(&[("alpha", vec![1.0]), ("beta", vec![0.0]), ("a", vec![0.0])]);
        let heldout = Prompt {
            id: "h1".into(),
            text: "h".into(),
            split: PromptSplit::Heldout,
        };
        let err = select_nearest_neighbor(
            &train,
            &corpus,
            &store,
            corpus.query("x1").unwrap(),
            &[heldout],
        )
        .unwrap_err();
        assert!(matches!(err, Error::UnknownPromptId(_)));
    }

    #[test]
    fn llm_confidence_takes_most_confident() {
        let query = q("q1", "2+2?");
        let candidates = [p("p1", "a"), p("p2", "b"), p("p3", "c")];
        let mut fixtures = HashMap::new();
        for (prompt, answer, conf) in [("a", "3", "0.2"), ("b", "4", "0.9"), ("c", "5", "0.4")] {
            fixtures.insert(format!("2+2?\n{prompt}"), answer.to_string());
            let critique = CONFIDENCE_TEMPLATE
                .replace("{query}", "2+2?")
                .replace("{answer}", answer);
            fixtures.insert(critique, conf.to_string());
        }
        let client = LlmClient::mock(fixtures);
        let (sel, unparseable) =
            select_llm_confidence(&client, &query, &candidates, DEFAULT_TEMPLATE).unwrap();
        assert_eq!(sel.chosen_prompt_id, "p2");
        assert_eq!(unparseable, 0);
    }

    #[test]
    fn llm_confidence_appends_two_entries_per_candidate() {
        let query = q("q1", "2+2?");
        let candidates: Vec<Prompt> = (0..4).map(|i| p(&format!("p{i}"), "x")).collect();
        let client = LlmClient::mock(HashMap::new());
        // The mock fallback answer yields unparseable confidences, which is
        // irrelevant to call accounting.
        let _ = select_llm_confidence(&client, &query, &candidates, DEFAULT_TEMPLATE).unwrap();
        let ledger = client.ledger_snapshot();
        assert_eq!(ledger.len(), 8);
        assert_eq!(ledger.count_by_purpose(Purpose::Answer), 4);
        assert_eq!(ledger.count_by_purpose(Purpose::Critique), 4);
    }

    #[test]
    fn llm_confidence_all_unparseable_falls_back() {
        let query = q("q1", "2+2?");
        let candidates = [p("p1", "a"), p("p2", "b")];
        // Fallback answers ("UNKNOWN") produce critiques with no number.
        let client = LlmClient::mock(HashMap::new());
        let (sel, unparseable) =
            select_llm_confidence(&client, &query, &candidates, DEFAULT_TEMPLATE).unwrap();
        assert_eq!(unparseable, 2);
        assert_eq!(sel.chosen_prompt_id, "p1");
        assert!(sel.tie_broken);
    }

    #[test]
    fn confidence_outside_unit_interval_is_unparseable() {
        let query = q("q1", "2+2?");
        let candidates = [p("p1", "a")];
        let mut fixtures = HashMap::new();
        fixtures.insert("2+2?\na".to_string(), "4".to_string());
        let critique = CONFIDENCE_TEMPLATE
            .replace("{query}", "2+2?")
            .replace("{answer}", "4");
        fixtures.insert(critique, "I rate it 7".to_string());
        let client = LlmClient::mock(fixtures);
        let (_, unparseable) =
            select_llm_confidence(&client, &query, &candidates, DEFAULT_TEMPLATE).unwrap();
        assert_eq!(unparseable, 1);
    }

    #[test]
    fn trace_json_has_the_contracted_fields() {
        let stats = TrainPromptStats {
            entries: vec![("p1".into(), 0.25)],
        };
        let sel = select_distributional(&stats).unwrap();
        let value = sel.to_trace_json();
        assert_eq!(value["strategy"], "distributional");
        assert_eq!(value["chosen_prompt_id"], "p1");
        assert_eq!(value["scores"]["p1"], 0.25);
        assert_eq!(value["tie_broken"], false);
    }
}
