//! The proxy reward model: a gradient-boosted regression-tree ensemble
//! trained with the logistic cross-entropy objective, evaluated as a
//! binary classifier, and persisted as a checksummed text file.

mod io;
mod tree;

pub use io::{load_model, model_from_bytes, model_to_bytes, save_model};
pub use tree::{find_best_split, SplitDecision, Tree};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::{Corpus, DemonstrationSet};
use crate::embedding::{feature_vector, EmbeddingStore, FeatureVector};
use crate::error::{Error, Result};

/// Boosting hyperparameters. The published setting is
/// `max_depth 10, eta 0.001` with the logistic objective; the round count
/// is configurable because the paper leaves it unstated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BoostConfig {
    pub max_depth: usize,
    pub eta: f64,
    pub num_rounds: usize,
    pub lambda: f64,
    pub gamma: f64,
    pub min_child_weight: f64,
    pub base_margin: f64,
    pub seed: u64,
}

impl Default for BoostConfig {
    fn default() -> Self {
        Self {
            max_depth: 10,
            eta: 0.001,
            num_rounds: 500,
            lambda: 1.0,
            gamma: 0.0,
            min_child_weight: 1.0,
            base_margin: 0.0,
            seed: 0,
        }
    }
}

impl BoostConfig {
    pub fn validate(&self) -> Result<()> {
        if self.eta <= 0.0 {
            return Err(Error::InvalidInput("eta must be positive".into()));
        }
        if self.max_depth < 1 {
            return Err(Error::InvalidInput("max_depth must be at least 1".into()));
        }
        if self.num_rounds < 1 {
            return Err(Error::InvalidInput("num_rounds must be at least 1".into()));
        }
        if self.lambda < 0.0 || self.gamma < 0.0 || self.min_child_weight < 0.0 {
            return Err(Error::InvalidInput(
                "lambda, gamma and min_child_weight must be non-negative".into(),
            ));
        }
        Ok(())
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// First and second derivatives of the per-sample cross-entropy loss with
/// respect to the margin: `g = sigma(m) - y`, `h = sigma(m)(1 - sigma(m))`.
pub fn logistic_grad_hess(margin: f64, label: bool) -> (f64, f64) {
    let p = sigmoid(margin);
    (p - label as u8 as f64, p * (1.0 - p))
}

/// Per-sample cross-entropy loss; the quantity the gradients descend.
pub fn logistic_loss(margin: f64, label: bool) -> f64 {
    let p = sigmoid(margin);
    if label {
        -p.ln()
    } else {
        -(1.0 - p).ln()
    }
}

/// An additive ensemble of regression trees with a sigmoid output head.
/// Immutable after training and safe for concurrent prediction.
#[derive(Debug, Clone, PartialEq)]
pub struct RewardModel {
    trees: Vec<Tree>,
    config: BoostConfig,
    feature_dim: usize,
    training_fingerprint: String,
}

impl RewardModel {
    pub fn trees(&self) -> &[Tree] {
        &self.trees
    }

    pub fn config(&self) -> &BoostConfig {
        &self.config
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn training_fingerprint(&self) -> &str {
        &self.training_fingerprint
    }

    pub(crate) fn from_parts(
        trees: Vec<Tree>,
        config: BoostConfig,
        feature_dim: usize,
        training_fingerprint: String,
    ) -> Self {
        Self {
            trees,
            config,
            feature_dim,
            training_fingerprint,
        }
    }

    fn margin(&self, features: &[f64]) -> Result<f64> {
        let mut margin = self.config.base_margin;
        for tree in &self.trees {
            margin += self.config.eta * tree.leaf_value(features)?;
        }
        Ok(margin)
    }

    /// Scores a feature vector as a probability strictly inside (0, 1).
    pub fn predict(&self, features: &FeatureVector) -> Result<f64> {
        self.predict_slice(&features.values)
    }

    pub fn predict_slice(&self, features: &[f64]) -> Result<f64> {
        if features.len() != self.feature_dim {
            return Err(Error::DimensionMismatch {
                expected: self.feature_dim,
                actual: features.len(),
            });
        }
        let p = sigmoid(self.margin(features)?);
        // Saturated margins would round to exactly 0 or 1 in f64.
        Ok(p.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0))
    }
}

/// Scores a query-prompt feature vector with a trained model.
pub fn predict_score(model: &RewardModel, features: &FeatureVector) -> Result<f64> {
    model.predict(features)
}

/// Resolves the feature vector for one demonstration record.
fn record_features(
    corpus: &Corpus,
    store: &EmbeddingStore,
    query_id: &str,
    prompt_id: &str,
) -> Result<FeatureVector> {
    let query = corpus
        .query(query_id)
        .ok_or_else(|| Error::DanglingReference(query_id.to_string()))?;
    let prompt = corpus
        .prompt(prompt_id)
        .ok_or_else(|| Error::DanglingReference(prompt_id.to_string()))?;
    let e_q = store
        .get_for_text(&query.text)
        .ok_or_else(|| Error::MissingEmbedding(query_id.to_string()))?;
    let e_p = store
        .get_for_text(&prompt.text)
        .ok_or_else(|| Error::MissingEmbedding(prompt_id.to_string()))?;
    feature_vector(e_q, e_p)
}

fn fingerprint(columns: &[Vec<f64>], labels: &[f64], config: &BoostConfig) -> String {
    let mut hasher = Sha256::new();
    hasher.update(b"oirl-reward-training-v1");
    hasher.update((labels.len() as u64).to_le_bytes());
    hasher.update((columns.len() as u64).to_le_bytes());
    for column in columns {
        for v in column {
            hasher.update(v.to_le_bytes());
        }
    }
    for v in labels {
        hasher.update(v.to_le_bytes());
    }
    hasher.update((config.max_depth as u64).to_le_bytes());
    hasher.update(config.eta.to_le_bytes());
    hasher.update((config.num_rounds as u64).to_le_bytes());
    hasher.update(config.lambda.to_le_bytes());
    hasher.update(config.gamma.to_le_bytes());
    hasher.update(config.min_child_weight.to_le_bytes());
    hasher.update(config.base_margin.to_le_bytes());
    hasher.update(config.seed.to_le_bytes());
    hex::encode(hasher.finalize())
}

/// Trains the proxy reward model on (query, prompt, reward) demonstrations.
///
/// Trees are grown depth-first with exact greedy splits over the
/// concatenated query and prompt embeddings; margins move by
/// `eta * leaf value` per round. Deterministic for a fixed record order and
/// config.
pub fn train_reward_model(
    demos: &DemonstrationSet,
    corpus: &Corpus,
    store: &EmbeddingStore,
    config: &BoostConfig,
) -> Result<RewardModel> {
    config.validate()?;
    if demos.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let feature_dim = 2 * store.dimension();
    let n = demos.len();
    let mut columns = vec![vec![0.0f64; n]; feature_dim];
    let mut labels = vec![0.0f64; n];
    for (row, rec) in demos.records().iter().enumerate() {
        let features = record_features(corpus, store, &rec.query_id, &rec.prompt_id)?;
        for (f, v) in features.values.iter().enumerate() {
            columns[f][row] = *v;
        }
        labels[row] = rec.reward as u8 as f64;
    }
    let training_fingerprint = fingerprint(&columns, &labels, config);

    // One global argsort per feature; per-node orders are partitions of it.
    let presorted: Vec<Vec<usize>> = columns
        .iter()
        .map(|column| {
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|&a, &b| {
                column[a]
                    .partial_cmp(&column[b])
                    .expect("embedding components are finite")
                    .then(a.cmp(&b))
            });
            order
        })
        .collect();

    let mut margins = vec![config.base_margin; n];
    let mut gradients = vec![0.0f64; n];
    let mut hessians = vec![0.0f64; n];
    let mut trees = Vec::with_capacity(config.num_rounds);
    for _round in 0..config.num_rounds {
        for i in 0..n {
            let (g, h) = logistic_grad_hess(margins[i], labels[i] == 1.0);
            gradients[i] = g;
            hessians[i] = h;
        }
        let ctx = tree::GrowContext {
            columns: &columns,
            gradients: &gradients,
            hessians: &hessians,
            config,
        };
        let tree = tree::grow_tree(&ctx, presorted.clone());
        tree::accumulate_margins(&tree, &columns, config.eta, &mut margins);
        trees.push(tree);
    }

    Ok(RewardModel {
        trees,
        config: config.clone(),
        feature_dim,
        training_fingerprint,
    })
}

/// Total cross-entropy loss of a model's margins over a demonstration set;
/// exposed for loss-curve checks.
pub fn training_loss(
    model: &RewardModel,
    demos: &DemonstrationSet,
    corpus: &Corpus,
    store: &EmbeddingStore,
) -> Result<f64> {
    let mut total = 0.0;
    for rec in demos.records() {
        let features = record_features(corpus, store, &rec.query_id, &rec.prompt_id)?;
        let p = model.predict(&features)?;
        total += if rec.reward { -p.ln() } else { -(1.0 - p).ln() };
    }
    Ok(total)
}

/// Classifier counts at a fixed threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    #[serde(rename = "tp")]
    pub true_pos: u64,
    #[serde(rename = "fp")]
    pub false_pos: u64,
    #[serde(rename = "tn")]
    pub true_neg: u64,
    #[serde(rename = "fn")]
    pub false_neg: u64,
}

/// Accuracy and precision of reward predictions, with a flag instead of a
/// NaN when no positives were predicted.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassificationReport {
    pub accuracy: f64,
    pub precision: f64,
    pub counts: Counts,
    pub degenerate_precision: bool,
}

pub const DEFAULT_THRESHOLD: f64 = 0.5;

/// Evaluates the model as a classifier of demonstration rewards. A score
/// strictly above the threshold predicts 1; an exact tie predicts 0.
pub fn evaluate_reward_model(
    model: &RewardModel,
    demos: &DemonstrationSet,
    corpus: &Corpus,
    store: &EmbeddingStore,
    threshold: f64,
) -> Result<ClassificationReport> {
    if demos.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut counts = Counts {
        true_pos: 0,
        false_pos: 0,
        true_neg: 0,
        false_neg: 0,
    };
    for rec in demos.records() {
        let features = record_features(corpus, store, &rec.query_id, &rec.prompt_id)?;
        let predicted = model.predict(&features)? > threshold;
        match (predicted, rec.reward) {
            (true, true) => counts.true_pos += 1,
            (true, false) => counts.false_pos += 1,
            (false, false) => counts.true_neg += 1,
            (false, true) => counts.false_neg += 1,
        }
    }
    Ok(report_from_counts(counts))
}

/// Builds the report from raw counts; shared by the evaluator and tests.
pub fn report_from_counts(counts: Counts) -> ClassificationReport {
    let total = counts.true_pos + counts.false_pos + counts.true_neg + counts.false_neg;
    let accuracy = (counts.true_pos + counts.true_neg) as f64 / total as f64;
    let predicted_pos = counts.true_pos + counts.false_pos;
    let (precision, degenerate_precision) = if predicted_pos > 0 {
        (counts.true_pos as f64 / predicted_pos as f64, false)
    } else {
        (0.0, true)
    };
    ClassificationReport {
        accuracy,
        precision,
        counts,
        degenerate_precision,
    }
}
