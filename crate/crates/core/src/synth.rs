//! A synthetic world with a planted linear reward rule over embedding
//! space: end-to-end pipeline verification without any external service.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use sha2::{Digest, Sha256};

use crate::corpus::{Corpus, DemonstrationRecord, DemonstrationSet, Prompt, PromptSplit, Query, SplitTag};
use crate::embedding::{Embedder, EmbeddingStore, EmbeddingVector};
use crate::error::{Error, Result};

/// A planted ground-truth reward function: a random oblique hyperplane over
/// concatenated (query, prompt) embeddings, with optional deterministic
/// label noise.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticWorld {
    pub seed: u64,
    pub dimension: usize,
    pub weight: Vec<f64>,
    pub bias: f64,
    pub label_noise: f64,
}

/// Draws a world: unit-norm weight of length `2 * dimension`, bias uniform
/// in [-0.25, 0.25].
pub fn generate_world(seed: u64, dimension: usize, label_noise: f64) -> Result<SyntheticWorld> {
    if dimension < 2 {
        return Err(Error::BadDimension(dimension));
    }
    if !(0.0..0.5).contains(&label_noise) {
        return Err(Error::InvalidInput(format!(
            "label_noise {label_noise} outside [0, 0.5)"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut weight: Vec<f64> = (0..2 * dimension)
        .map(|_| rng.sample(StandardNormal))
        .collect();
    let norm = weight.iter().map(|w| w * w).sum::<f64>().sqrt();
    for w in &mut weight {
        *w /= norm;
    }
    let bias = rng.random_range(-0.25..0.25);
    Ok(SyntheticWorld {
        seed,
        dimension,
        weight,
        bias,
        label_noise,
    })
}

/// Deterministic coin for label noise, keyed by (world seed, query key,
/// prompt key): the same triple always flips the same way.
fn noise_flip(world: &SyntheticWorld, query_key: &str, prompt_key: &str) -> bool {
    if world.label_noise == 0.0 {
        return false;
    }
    let mut hasher = Sha256::new();
    hasher.update(b"oirl-synth-noise");
    hasher.update(world.seed.to_le_bytes());
    hasher.update((query_key.len() as u64).to_le_bytes());
    hasher.update(query_key.as_bytes());
    hasher.update(prompt_key.as_bytes());
    let digest = hasher.finalize();
    let draw = u64::from_le_bytes(digest[..8].try_into().expect("digest is 32 bytes"));
    (draw as f64 / u64::MAX as f64) < world.label_noise
}

/// The planted reward: 1 iff `weight . [e_query || e_prompt] + bias > 0`,
/// flipped with probability `label_noise` by the per-triple coin.
pub fn synth_reward(
    world: &SyntheticWorld,
    e_query: &EmbeddingVector,
    e_prompt: &EmbeddingVector,
) -> Result<bool> {
    if e_query.dimension() != world.dimension || e_prompt.dimension() != world.dimension {
        return Err(Error::DimensionMismatch {
            expected: world.dimension,
            actual: e_query.dimension().max(e_prompt.dimension()),
        });
    }
    let mut margin = world.bias;
    for (w, v) in world.weight[..world.dimension].iter().zip(&e_query.values) {
        margin += w * v;
    }
    for (w, v) in world.weight[world.dimension..].iter().zip(&e_prompt.values) {
        margin += w * v;
    }
    let clean = margin > 0.0;
    Ok(clean ^ noise_flip(world, &e_query.source_key, &e_prompt.source_key))
}

/// A full three-partition benchmark generated from one world.
#[derive(Debug, Clone)]
pub struct SyntheticBenchmark {
    pub corpus: Corpus,
    pub train: DemonstrationSet,
    pub test_q: DemonstrationSet,
    pub test_p: DemonstrationSet,
    pub store: EmbeddingStore,
}

/// Generates opaque query/prompt texts, embeds them with the given
/// provider, and labels every pair of each partition with the planted
/// reward.
pub fn generate_benchmark(
    world: &SyntheticWorld,
    n_train_q: usize,
    n_test_q: usize,
    k_train_p: usize,
    p_heldout_p: usize,
    embedder: &Embedder,
) -> Result<SyntheticBenchmark> {
    for (name, count) in [
        ("n_train_q", n_train_q),
        ("n_test_q", n_test_q),
        ("k_train_p", k_train_p),
        ("p_heldout_p", p_heldout_p),
    ] {
        if count < 1 {
            return Err(Error::InvalidInput(format!("{name} must be at least 1")));
        }
    }
    if embedder.dimension() != world.dimension {
        return Err(Error::DimensionMismatch {
            expected: world.dimension,
            actual: embedder.dimension(),
        });
    }

    let make_query = |i: usize| Query {
        id: format!("q-{i}"),
        text: format!("q-{i}"),
        golden_answer: i.to_string(),
    };
    let train_queries: Vec<Query> = (0..n_train_q).map(make_query).collect();
    let test_queries: Vec<Query> = (n_train_q..n_train_q + n_test_q).map(make_query).collect();
    let prompts: Vec<Prompt> = (0..k_train_p + p_heldout_p)
        .map(|j| Prompt {
            id: format!("p-{j}"),
            text: format!("p-{j}"),
            split: if j < k_train_p {
                PromptSplit::Train
            } else {
                PromptSplit::Heldout
            },
        })
        .collect();
    let corpus = Corpus::new(
        format!("synthetic-{}", world.seed),
        train_queries,
        test_queries,
        prompts,
    )?;
    let store = embedder.embed_corpus(&corpus)?;

    let label_pairs = |queries: &[Query], prompts: &[&Prompt]| -> Result<Vec<DemonstrationRecord>> {
        let mut records = Vec::with_capacity(queries.len() * prompts.len());
        for query in queries {
            let e_q = store
                .get_for_text(&query.text)
                .ok_or_else(|| Error::MissingEmbedding(query.id.clone()))?;
            for prompt in prompts {
                let e_p = store
                    .get_for_text(&prompt.text)
                    .ok_or_else(|| Error::MissingEmbedding(prompt.id.clone()))?;
                records.push(DemonstrationRecord {
                    query_id: query.id.clone(),
                    prompt_id: prompt.id.clone(),
                    response: None,
                    reward: synth_reward(world, e_q, e_p)?,
                });
            }
        }
        Ok(records)
    };

    let train_prompts = corpus.train_prompts();
    let heldout_prompts = corpus.heldout_prompts();
    let train = DemonstrationSet::new(
        label_pairs(corpus.train_queries(), &train_prompts)?,
        SplitTag::Train,
    )?;
    let test_q = DemonstrationSet::new(
        label_pairs(corpus.test_queries(), &train_prompts)?,
        SplitTag::TestQ,
    )?;
    let test_p = DemonstrationSet::new(
        label_pairs(corpus.test_queries(), &heldout_prompts)?,
        SplitTag::TestP,
    )?;

    Ok(SyntheticBenchmark {
        corpus,
        train,
        test_q,
        test_p,
        store,
    })
}
