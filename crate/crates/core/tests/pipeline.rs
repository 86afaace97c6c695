//! End-to-end integration over the synthetic world: data generation,
//! reward-model training, selection, and the separation between
//! query-dependent and distribution-level policies.

use oirl_core::bench::{run_policy_eval, EvalPool, StrategyContext};
use oirl_core::corpus::{load_corpus, save_corpus, Corpus, Prompt, PromptSplit, Query};
use oirl_core::embedding::Embedder;
use oirl_core::policy::Strategy;
use oirl_core::reward::{evaluate_reward_model, train_reward_model, BoostConfig};
use oirl_core::synth::{generate_benchmark, generate_world, SyntheticBenchmark};

fn learnability_benchmark() -> (SyntheticBenchmark, BoostConfig) {
    let world = generate_world(7, 16, 0.0).unwrap();
    let embedder = Embedder::mock(7, 16);
    let bench = generate_benchmark(&world, 2000, 500, 4, 8, &embedder).unwrap();
    let config = BoostConfig {
        max_depth: 6,
        eta: 0.1,
        num_rounds: 300,
        ..BoostConfig::default()
    };
    (bench, config)
}

#[test]
fn synthetic_world_is_learnable_and_query_dependence_pays() {
    let (bench, config) = learnability_benchmark();
    let model =
        train_reward_model(&bench.train, &bench.corpus, &bench.store, &config).unwrap();

    let report =
        evaluate_reward_model(&model, &bench.test_q, &bench.corpus, &bench.store, 0.5).unwrap();
    println!(
        "held-out accuracy {:.4} precision {:.4}",
        report.accuracy, report.precision
    );
    assert!(
        report.accuracy >= 0.85,
        "held-out accuracy {} below 0.85",
        report.accuracy
    );

    let candidates_train: Vec<Prompt> =
        bench.corpus.train_prompts().into_iter().cloned().collect();
    let mut candidates_all = candidates_train.clone();
    candidates_all.extend(bench.corpus.heldout_prompts().into_iter().cloned());

    let test_q_pool = EvalPool::new(&[&bench.test_q]).unwrap();
    let merged_pool = EvalPool::new(&[&bench.test_q, &bench.test_p]).unwrap();

    let distributional = run_policy_eval(
        &StrategyContext::Distributional {
            train_demos: &bench.train,
        },
        &bench.corpus,
        &candidates_train,
        &test_q_pool,
    )
    .unwrap();
    let oirl = run_policy_eval(
        &StrategyContext::PromptOirl {
            model: &model,
            store: &bench.store,
        },
        &bench.corpus,
        &candidates_all,
        &merged_pool,
    )
    .unwrap();
    println!(
        "distributional {:.4}, offline selection {:.4}",
        distributional.success_rate, oirl.success_rate
    );
    assert!(
        oirl.success_rate >= distributional.success_rate + 0.05,
        "offline selection {} does not clear distributional {} by 0.05",
        oirl.success_rate,
        distributional.success_rate
    );
}

#[test]
fn reference_scale_corpus_loads_with_expected_counts() {
    // A corpus shaped like the largest reference task: 7473 training and
    // 1319 test queries.
    let dir = tempfile::tempdir().unwrap();
    let make = |i: usize| Query {
        id: format!("q{i}"),
        text: format!("question number {i}"),
        golden_answer: format!("{}", i * 3 + 1),
    };
    let train: Vec<Query> = (0..7473).map(make).collect();
    let test: Vec<Query> = (7473..7473 + 1319).map(make).collect();
    let prompts: Vec<Prompt> = (0..6)
        .map(|j| Prompt {
            id: format!("p{j}"),
            text: format!("instruction {j}"),
            split: PromptSplit::Train,
        })
        .chain((6..16).map(|j| Prompt {
            id: format!("p{j}"),
            text: format!("held-out instruction {j}"),
            split: PromptSplit::Heldout,
        }))
        .collect();
    let corpus = Corpus::new("reference-shape", train, test, prompts).unwrap();
    let manifest = save_corpus(dir.path(), &corpus).unwrap();
    let loaded = load_corpus(&manifest).unwrap();
    assert_eq!(loaded.n_train_queries(), 7473);
    assert_eq!(loaded.n_test_queries(), 1319);
    assert_eq!(loaded.k_train_prompts(), 6);
    assert_eq!(loaded.p_heldout_prompts(), 16 - 6);

    // Embedding the whole corpus under the mock provider yields one entry
    // per distinct text.
    let store = Embedder::mock(1, 16).embed_corpus(&loaded).unwrap();
    assert_eq!(store.len(), 7473 + 1319 + 16);
}

#[test]
fn oracle_beats_distributional_on_synthetic_worlds() {
    for seed in 0..10 {
        let world = generate_world(seed, 4, 0.1).unwrap();
        let bench = generate_benchmark(&world, 30, 12, 4, 4, &Embedder::mock(seed, 4)).unwrap();
        let candidates: Vec<Prompt> =
            bench.corpus.train_prompts().into_iter().cloned().collect();
        let pool = EvalPool::new(&[&bench.test_q]).unwrap();
        let oracle = run_policy_eval(
            &StrategyContext::Oracle,
            &bench.corpus,
            &candidates,
            &pool,
        )
        .unwrap();
        let distributional = run_policy_eval(
            &StrategyContext::Distributional {
                train_demos: &bench.train,
            },
            &bench.corpus,
            &candidates,
            &pool,
        )
        .unwrap();
        assert!(oracle.success_rate >= distributional.success_rate, "seed {seed}");
    }
}

#[test]
fn oracle_ceiling_grows_with_candidate_diversity() {
    // With eight or more i.i.d. random candidate prompts the oracle beats
    // every single prompt's own success rate.
    for seed in [3u64, 14, 25] {
        let world = generate_world(seed, 8, 0.0).unwrap();
        let bench = generate_benchmark(&world, 10, 40, 8, 2, &Embedder::mock(seed, 8)).unwrap();
        let candidates: Vec<Prompt> =
            bench.corpus.train_prompts().into_iter().cloned().collect();
        let pool = EvalPool::new(&[&bench.test_q]).unwrap();
        let oracle = run_policy_eval(
            &StrategyContext::Oracle,
            &bench.corpus,
            &candidates,
            &pool,
        )
        .unwrap();
        for prompt in &candidates {
            let hits = bench
                .test_q
                .records()
                .iter()
                .filter(|r| r.prompt_id == prompt.id && r.reward)
                .count();
            let single = hits as f64 / bench.corpus.n_test_queries() as f64;
            assert!(
                oracle.success_rate > single,
                "seed {seed}: oracle {} not above prompt {} at {}",
                oracle.success_rate,
                prompt.id,
                single
            );
        }
    }
}
