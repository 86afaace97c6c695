//! Experiment harness: strategy evaluation over test queries, K-sweeps
//! with combination averaging, oracle normalization, data-scarcity sweeps,
//! and the inference-cost table.

use std::collections::{HashMap, HashSet};

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{
    subset_by_prompts, Corpus, DemonstrationSet, Prompt, PromptSplit,
};
use crate::embedding::EmbeddingStore;
use crate::error::{Error, Result};
use crate::llm::{LlmClient, PriceSheet};
use crate::policy::{
    select_distributional, select_llm_confidence, select_nearest_neighbor, select_oracle,
    select_query_dependent, train_prompt_stats, PromptSelection, Strategy,
};
use crate::reward::{train_reward_model, BoostConfig, RewardModel};

/// All C(n, k) index subsets in lexicographic order.
pub fn enumerate_combinations(n: usize, k: usize) -> Result<Vec<Vec<usize>>> {
    if k == 0 || k > n {
        return Err(Error::BadArity { n, k });
    }
    let mut out = Vec::new();
    let mut current: Vec<usize> = (0..k).collect();
    loop {
        out.push(current.clone());
        // Advance the rightmost index that can still move.
        let mut i = k;
        loop {
            if i == 0 {
                return Ok(out);
            }
            i -= 1;
            if current[i] != i + n - k {
                break;
            }
        }
        current[i] += 1;
        for j in i + 1..k {
            current[j] = current[j - 1] + 1;
        }
    }
}

pub fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut result = 1usize;
    for i in 0..k {
        result = result * (n - i) / (i + 1);
    }
    result
}

/// Success of one strategy over one evaluation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuccessReport {
    pub strategy: Strategy,
    pub k_train_prompts: usize,
    pub success_rate: f64,
    pub n_queries: usize,
    pub combination_count: usize,
}

/// A merged reward lookup over one or more demonstration partitions, used
/// when a strategy's candidates span training and held-out prompts.
pub struct EvalPool {
    rewards: HashMap<(String, String), bool>,
    query_order: Vec<String>,
}

impl EvalPool {
    pub fn new(sets: &[&DemonstrationSet]) -> Result<Self> {
        let mut rewards = HashMap::new();
        let mut query_order = Vec::new();
        let mut seen_queries = HashSet::new();
        for set in sets {
            for rec in set.records() {
                let key = (rec.query_id.clone(), rec.prompt_id.clone());
                if let Some(previous) = rewards.insert(key, rec.reward) {
                    if previous != rec.reward {
                        return Err(Error::DuplicateId(format!(
                            "({}, {}) appears with conflicting rewards",
                            rec.query_id, rec.prompt_id
                        )));
                    }
                }
                if seen_queries.insert(rec.query_id.clone()) {
                    query_order.push(rec.query_id.clone());
                }
            }
        }
        Ok(Self {
            rewards,
            query_order,
        })
    }

    pub fn reward(&self, query_id: &str, prompt_id: &str) -> Option<bool> {
        self.rewards
            .get(&(query_id.to_string(), prompt_id.to_string()))
            .copied()
    }

    /// Distinct query ids in order of first appearance.
    pub fn query_ids(&self) -> &[String] {
        &self.query_order
    }
}

/// Everything a strategy needs at evaluation time beyond the candidates.
pub enum StrategyContext<'a> {
    Distributional {
        train_demos: &'a DemonstrationSet,
    },
    BestOfTrainQd {
        model: &'a RewardModel,
        store: &'a EmbeddingStore,
    },
    PromptOirl {
        model: &'a RewardModel,
        store: &'a EmbeddingStore,
    },
    NearestNeighbor {
        train_demos: &'a DemonstrationSet,
        store: &'a EmbeddingStore,
    },
    Oracle,
    LlmConfidence {
        client: &'a LlmClient,
        template: &'a str,
    },
}

impl StrategyContext<'_> {
    pub fn strategy(&self) -> Strategy {
        match self {
            StrategyContext::Distributional { .. } => Strategy::Distributional,
            StrategyContext::BestOfTrainQd { .. } => Strategy::BestOfTrainQd,
            StrategyContext::PromptOirl { .. } => Strategy::PromptOirl,
            StrategyContext::NearestNeighbor { .. } => Strategy::NearestNeighbor,
            StrategyContext::Oracle => Strategy::Oracle,
            StrategyContext::LlmConfidence { .. } => Strategy::LlmConfidence,
        }
    }
}

fn select_for_query(
    ctx: &StrategyContext,
    corpus: &Corpus,
    candidates: &[Prompt],
    eval: &EvalPool,
    query_id: &str,
    distributional_choice: &Option<PromptSelection>,
) -> Result<PromptSelection> {
    let query = corpus
        .query(query_id)
        .ok_or_else(|| Error::DanglingReference(query_id.to_string()))?;
    match ctx {
        StrategyContext::Distributional { .. } => {
            let mut sel = distributional_choice
                .clone()
                .expect("distributional choice precomputed");
            sel.query_id = Some(query_id.to_string());
            Ok(sel)
        }
        StrategyContext::BestOfTrainQd { model, store } => {
            select_query_dependent(model, query, candidates, store, Strategy::BestOfTrainQd)
        }
        StrategyContext::PromptOirl { model, store } => {
            select_query_dependent(model, query, candidates, store, Strategy::PromptOirl)
        }
        StrategyContext::NearestNeighbor { train_demos, store } => {
            // Oracle-style reward lookups live in eval; selection only sees
            // training data.
            let _ = eval;
            select_nearest_neighbor(train_demos, corpus, store, query, candidates)
        }
        StrategyContext::Oracle => {
            let pool_demos = eval_pool_view(eval, query_id, candidates)?;
            select_oracle(&pool_demos, query, candidates)
        }
        StrategyContext::LlmConfidence { client, template } => {
            Ok(select_llm_confidence(client, query, candidates, template)?.0)
        }
    }
}

/// Materializes the pool rows for one query as a demonstration set so the
/// oracle can run against merged partitions.
fn eval_pool_view(
    eval: &EvalPool,
    query_id: &str,
    candidates: &[Prompt],
) -> Result<DemonstrationSet> {
    let records = candidates
        .iter()
        .filter_map(|p| {
            eval.reward(query_id, &p.id)
                .map(|reward| crate::corpus::DemonstrationRecord {
                    query_id: query_id.to_string(),
                    prompt_id: p.id.clone(),
                    response: None,
                    reward,
                })
        })
        .collect();
    DemonstrationSet::new(records, crate::corpus::SplitTag::TestQ)
}

/// Runs one strategy over every query in the pool, looking up the chosen
/// prompt's recorded reward, and averages.
pub fn run_policy_eval(
    ctx: &StrategyContext,
    corpus: &Corpus,
    candidates: &[Prompt],
    eval: &EvalPool,
) -> Result<SuccessReport> {
    Ok(run_policy_eval_traced(ctx, corpus, candidates, eval)?.0)
}

/// Like [`run_policy_eval`] but also returns the per-query selections.
pub fn run_policy_eval_traced(
    ctx: &StrategyContext,
    corpus: &Corpus,
    candidates: &[Prompt],
    eval: &EvalPool,
) -> Result<(SuccessReport, Vec<PromptSelection>)> {
    if candidates.is_empty() {
        return Err(Error::InvalidInput("no candidate prompts".into()));
    }
    let distributional_choice = match ctx {
        StrategyContext::Distributional { train_demos } => {
            Some(select_distributional(&train_prompt_stats(train_demos)?)?)
        }
        _ => None,
    };
    let mut successes = 0usize;
    let mut selections = Vec::with_capacity(eval.query_ids().len());
    for query_id in eval.query_ids() {
        let selection = select_for_query(
            ctx,
            corpus,
            candidates,
            eval,
            query_id,
            &distributional_choice,
        )?;
        let reward = eval
            .reward(query_id, &selection.chosen_prompt_id)
            .ok_or_else(|| Error::MissingRecord {
                query_id: query_id.clone(),
                prompt_id: selection.chosen_prompt_id.clone(),
            })?;
        successes += reward as usize;
        selections.push(selection);
    }
    let n_queries = eval.query_ids().len();
    let report = SuccessReport {
        strategy: ctx.strategy(),
        k_train_prompts: candidates
            .iter()
            .filter(|p| p.split == PromptSplit::Train)
            .count(),
        success_rate: if n_queries == 0 {
            0.0
        } else {
            successes as f64 / n_queries as f64
        },
        n_queries,
        combination_count: 1,
    };
    Ok((report, selections))
}

/// One evaluated (strategy, K, subset) cell of a sweep.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SubsetRow {
    pub strategy: Strategy,
    pub k: usize,
    pub subset: Vec<String>,
    pub success_rate: f64,
    pub n_queries: usize,
}

/// Mean success per strategy at one K, uniformly averaged over C(n, K)
/// subsets.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CurvePoint {
    pub k: usize,
    pub combinations: usize,
    pub means: Vec<(Strategy, f64)>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CurveReport {
    pub points: Vec<CurvePoint>,
    /// Oracle mean per K, when the oracle ran: the normalization baseline.
    pub normalization: Option<Vec<(usize, f64)>>,
}

/// A raw/oracle/normalized triple; `zero_oracle` flags a guarded division.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizedScore {
    pub raw: f64,
    pub oracle: f64,
    pub normalized: f64,
    pub zero_oracle: bool,
}

/// Normalizes a report against an oracle baseline over the same queries.
pub fn normalize_vs_oracle(report: &SuccessReport, oracle_report: &SuccessReport) -> NormalizedScore {
    let raw = report.success_rate;
    let oracle = oracle_report.success_rate;
    if oracle > 0.0 {
        NormalizedScore {
            raw,
            oracle,
            normalized: raw / oracle,
            zero_oracle: false,
        }
    } else {
        NormalizedScore {
            raw,
            oracle,
            normalized: 0.0,
            zero_oracle: true,
        }
    }
}

/// Inputs shared by every subset of a K-sweep.
#[derive(Clone, Copy)]
pub struct SweepInputs<'a> {
    pub corpus: &'a Corpus,
    pub train_demos: &'a DemonstrationSet,
    pub test_q_demos: &'a DemonstrationSet,
    pub test_p_demos: Option<&'a DemonstrationSet>,
    pub store: &'a EmbeddingStore,
    pub llm: Option<(&'a LlmClient, &'a str)>,
}

pub struct SweepOutcome {
    pub curve: CurveReport,
    pub rows: Vec<SubsetRow>,
}

fn needs_model(strategies: &[Strategy]) -> bool {
    strategies
        .iter()
        .any(|s| matches!(s, Strategy::BestOfTrainQd | Strategy::PromptOirl))
}

/// Retrains and evaluates every strategy for each K and each C(K_total, K)
/// training-prompt subset, averaging uniformly over subsets.
///
/// Candidates per strategy: the subset for training-prompt strategies; the
/// subset plus every held-out prompt for the offline-selection policy (and
/// for the oracle when that policy runs, so normalization shares its
/// choice set).
pub fn sweep_k(
    inputs: &SweepInputs,
    strategies: &[Strategy],
    ks: &[usize],
    config: &BoostConfig,
) -> Result<SweepOutcome> {
    let train_prompts: Vec<Prompt> = inputs
        .corpus
        .train_prompts()
        .into_iter()
        .cloned()
        .collect();
    let heldout_prompts: Vec<Prompt> = inputs
        .corpus
        .heldout_prompts()
        .into_iter()
        .cloned()
        .collect();
    let k_total = train_prompts.len();
    let mut ks: Vec<usize> = ks.to_vec();
    ks.sort_unstable();
    ks.dedup();
    for &k in &ks {
        if k == 0 || k > k_total {
            return Err(Error::BadArity { n: k_total, k });
        }
    }
    let includes_oirl = strategies.contains(&Strategy::PromptOirl);
    if includes_oirl && inputs.test_p_demos.is_none() {
        return Err(Error::InvalidInput(
            "offline selection over held-out prompts needs the test_p partition".into(),
        ));
    }

    let test_q_pool = EvalPool::new(&[inputs.test_q_demos])?;
    let mut merged_sets: Vec<&DemonstrationSet> = vec![inputs.test_q_demos];
    if let Some(tp) = inputs.test_p_demos {
        merged_sets.push(tp);
    }
    let merged_pool = EvalPool::new(&merged_sets)?;

    let mut rows = Vec::new();
    let mut points = Vec::new();
    let mut normalization = Vec::new();
    for &k in &ks {
        let combos = enumerate_combinations(k_total, k)?;
        let combination_count = combos.len();
        let mut sums: Vec<f64> = vec![0.0; strategies.len()];
        let mut oracle_sum = 0.0;
        for combo in &combos {
            let subset_ids: Vec<String> = combo
                .iter()
                .map(|&i| train_prompts[i].id.clone())
                .collect();
            let subset_prompts: Vec<Prompt> =
                combo.iter().map(|&i| train_prompts[i].clone()).collect();
            let subset_demos = subset_by_prompts(inputs.train_demos, &subset_ids)?;
            let model = if needs_model(strategies) {
                Some(train_reward_model(
                    &subset_demos,
                    inputs.corpus,
                    inputs.store,
                    config,
                )?)
            } else {
                None
            };

            let mut extended: Vec<Prompt> = subset_prompts.clone();
            extended.extend(heldout_prompts.iter().cloned());

            for (si, strategy) in strategies.iter().enumerate() {
                let report = match strategy {
                    Strategy::Distributional => run_policy_eval(
                        &StrategyContext::Distributional {
                            train_demos: &subset_demos,
                        },
                        inputs.corpus,
                        &subset_prompts,
                        &test_q_pool,
                    )?,
                    Strategy::BestOfTrainQd => run_policy_eval(
                        &StrategyContext::BestOfTrainQd {
                            model: model.as_ref().expect("model trained above"),
                            store: inputs.store,
                        },
                        inputs.corpus,
                        &subset_prompts,
                        &test_q_pool,
                    )?,
                    Strategy::PromptOirl => run_policy_eval(
                        &StrategyContext::PromptOirl {
                            model: model.as_ref().expect("model trained above"),
                            store: inputs.store,
                        },
                        inputs.corpus,
                        &extended,
                        &merged_pool,
                    )?,
                    Strategy::NearestNeighbor => run_policy_eval(
                        &StrategyContext::NearestNeighbor {
                            train_demos: &subset_demos,
                            store: inputs.store,
                        },
                        inputs.corpus,
                        &subset_prompts,
                        &test_q_pool,
                    )?,
                    Strategy::Oracle => {
                        let (candidates, pool) = if includes_oirl {
                            (&extended, &merged_pool)
                        } else {
                            (&subset_prompts, &test_q_pool)
                        };
                        let report = run_policy_eval(
                            &StrategyContext::Oracle,
                            inputs.corpus,
                            candidates,
                            pool,
                        )?;
                        oracle_sum += report.success_rate;
                        report
                    }
                    Strategy::LlmConfidence => {
                        let (client, template) = inputs.llm.ok_or_else(|| {
                            Error::InvalidInput(
                                "llm_confidence in a sweep needs a client".into(),
                            )
                        })?;
                        run_policy_eval(
                            &StrategyContext::LlmConfidence { client, template },
                            inputs.corpus,
                            &subset_prompts,
                            &test_q_pool,
                        )?
                    }
                };
                sums[si] += report.success_rate;
                rows.push(SubsetRow {
                    strategy: *strategy,
                    k,
                    subset: subset_ids.clone(),
                    success_rate: report.success_rate,
                    n_queries: report.n_queries,
                });
            }
        }
        let means: Vec<(Strategy, f64)> = strategies
            .iter()
            .zip(&sums)
            .map(|(s, sum)| (*s, sum / combination_count as f64))
            .collect();
        if strategies.contains(&Strategy::Oracle) {
            normalization.push((k, oracle_sum / combination_count as f64));
        }
        points.push(CurvePoint {
            k,
            combinations: combination_count,
            means,
        });
    }
    Ok(SweepOutcome {
        curve: CurveReport {
            points,
            normalization: if normalization.is_empty() {
                None
            } else {
                Some(normalization)
            },
        },
        rows,
    })
}

/// Deterministically removes a fraction of the training queries (and all
/// their records), mirroring a data-scarcity study.
pub fn subsample_queries(
    demos: &DemonstrationSet,
    remove_fraction: f64,
    seed: u64,
) -> Result<DemonstrationSet> {
    if !(0.0..=1.0).contains(&remove_fraction) {
        return Err(Error::InvalidInput(format!(
            "remove_fraction {remove_fraction} outside [0, 1]"
        )));
    }
    let mut query_ids = demos.query_ids();
    let n_remove = (remove_fraction * query_ids.len() as f64).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    query_ids.shuffle(&mut rng);
    let removed: HashSet<String> = query_ids.into_iter().take(n_remove).collect();
    let records = demos
        .records()
        .iter()
        .filter(|r| !removed.contains(&r.query_id))
        .cloned()
        .collect();
    DemonstrationSet::new(records, demos.split_tag())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScarcityRow {
    pub remove_fraction: f64,
    pub kept_queries: usize,
    pub strategy: Strategy,
    pub success_rate: f64,
    pub n_queries: usize,
}

/// Default removal fractions for the scarcity sweep.
pub const SCARCITY_FRACTIONS: [f64; 6] = [0.0, 0.3, 0.5, 0.7, 0.8, 0.9];

/// Retrains on progressively thinner training sets (all K prompts kept)
/// and evaluates each strategy.
pub fn sweep_scarcity(
    inputs: &SweepInputs,
    strategies: &[Strategy],
    fractions: &[f64],
    config: &BoostConfig,
    seed: u64,
) -> Result<Vec<ScarcityRow>> {
    let k_total = inputs.corpus.k_train_prompts();
    let mut rows = Vec::new();
    for &fraction in fractions {
        let thinned = subsample_queries(inputs.train_demos, fraction, seed)?;
        if thinned.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let thin_inputs = SweepInputs {
            train_demos: &thinned,
            ..*inputs
        };
        let outcome = sweep_k(&thin_inputs, strategies, &[k_total], config)?;
        let kept = thinned.query_ids().len();
        for point in outcome.curve.points {
            for (strategy, mean) in point.means {
                rows.push(ScarcityRow {
                    remove_fraction: fraction,
                    kept_queries: kept,
                    strategy,
                    success_rate: mean,
                    n_queries: inputs.test_q_demos.query_ids().len(),
                });
            }
        }
    }
    Ok(rows)
}

/// Average token counts for one call of each kind; the basis of the cost
/// table.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TokenProfile {
    pub answer_prompt_tokens: u64,
    pub answer_completion_tokens: u64,
    pub critique_prompt_tokens: u64,
    pub critique_completion_tokens: u64,
    pub query_embed_tokens: u64,
    pub prompt_embed_tokens: u64,
}

impl TokenProfile {
    pub fn load(path: &std::path::Path) -> Result<Self> {
        let raw = std::fs::read_to_string(path)?;
        serde_json::from_str(&raw).map_err(|e| Error::MalformedRecord {
            path: path.display().to_string(),
            line: 1,
            detail: e.to_string(),
        })
    }
}

/// One row of the inference-cost table. Costs are accounted in integer
/// nano-USD so per-K scaling laws hold exactly; `usd` is the f64
/// projection.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CostRow {
    pub strategy: Strategy,
    pub k: usize,
    pub nano_usd: u128,
}

impl CostRow {
    pub fn usd(&self) -> f64 {
        self.nano_usd as f64 / 1e9
    }
}

/// Nano-USD per token from a per-1k-token dollar rate.
fn nano_per_token(usd_per_1k: f64) -> u128 {
    (usd_per_1k * 1e6).round().max(0.0) as u128
}

/// Cost components per single call, in nano-USD.
#[derive(Debug, Clone, Copy)]
pub struct CallCosts {
    pub answer: u128,
    pub critique: u128,
    pub query_embed: u128,
    pub prompt_embed: u128,
}

pub fn call_costs(profile: &TokenProfile, sheet: &PriceSheet) -> CallCosts {
    let input = nano_per_token(sheet.input_usd_per_1k);
    let output = nano_per_token(sheet.output_usd_per_1k);
    let embed = nano_per_token(sheet.embed_usd_per_1k);
    CallCosts {
        answer: profile.answer_prompt_tokens as u128 * input
            + profile.answer_completion_tokens as u128 * output,
        critique: profile.critique_prompt_tokens as u128 * input
            + profile.critique_completion_tokens as u128 * output,
        query_embed: profile.query_embed_tokens as u128 * embed,
        prompt_embed: profile.prompt_embed_tokens as u128 * embed,
    }
}

/// Per-query inference cost of one strategy with K candidate prompts.
///
/// Self-critique pays K answer calls plus K critique calls; the offline
/// reward-model policies pay one answer call plus the embedding of the
/// query and of each candidate prompt; the remaining baselines pay a
/// single answer call (plus a query embedding for nearest neighbor).
pub fn strategy_cost(strategy: Strategy, k: usize, costs: &CallCosts) -> u128 {
    let k = k as u128;
    match strategy {
        Strategy::LlmConfidence => k * (costs.answer + costs.critique),
        Strategy::PromptOirl | Strategy::BestOfTrainQd => {
            costs.answer + costs.query_embed + k * costs.prompt_embed
        }
        Strategy::NearestNeighbor => costs.answer + costs.query_embed,
        Strategy::Distributional | Strategy::Oracle => costs.answer,
    }
}

/// Builds the (strategy, K, usd) table.
pub fn cost_report(
    strategies: &[Strategy],
    k_values: &[usize],
    profile: &TokenProfile,
    sheet: &PriceSheet,
) -> Vec<CostRow> {
    let costs = call_costs(profile, sheet);
    let mut rows = Vec::with_capacity(strategies.len() * k_values.len());
    for &strategy in strategies {
        for &k in k_values {
            rows.push(CostRow {
                strategy,
                k,
                nano_usd: strategy_cost(strategy, k, &costs),
            });
        }
    }
    rows
}
