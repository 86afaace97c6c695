use std::collections::HashMap;

use oirl_core::corpus::Prompt;
use oirl_core::embedding::{feature_vector, Embedder};
use oirl_core::policy::{select_query_dependent, Strategy};
use oirl_core::reward::{train_reward_model, BoostConfig};
use oirl_core::synth::{generate_benchmark, generate_world};

#[test]
#[ignore]
fn diag_learnability() {
    let world = generate_world(7, 16, 0.0).unwrap();
    let embedder = Embedder::mock(7, 16);
    let bench = generate_benchmark(&world, 2000, 500, 4, 8, &embedder).unwrap();
    // Per-prompt success on train and on test partitions
    for set in [&bench.train, &bench.test_q, &bench.test_p] {
        let mut per: HashMap<String, (usize, usize)> = HashMap::new();
        for r in set.records() {
            let e = per.entry(r.prompt_id.clone()).or_default();
            e.0 += r.reward as usize;
            e.1 += 1;
        }
        let mut keys: Vec<_> = per.keys().cloned().collect();
        keys.sort();
        for k in keys {
            let (s, n) = per[&k];
            print!("{k}:{:.3} ", s as f64 / n as f64);
        }
        println!();
    }
    let config = BoostConfig {
        max_depth: 6,
        eta: 0.1,
        num_rounds: 300,
        ..BoostConfig::default()
    };
    let model = train_reward_model(&bench.train, &bench.corpus, &bench.store, &config).unwrap();

    let mut candidates: Vec<Prompt> = bench.corpus.train_prompts().into_iter().cloned().collect();
    candidates.extend(bench.corpus.heldout_prompts().into_iter().cloned());
    let mut chosen_count: HashMap<String, usize> = HashMap::new();
    let mut spread = 0.0;
    for query in bench.corpus.test_queries().iter() {
        let sel = select_query_dependent(
            &model,
            query,
            &candidates,
            &bench.store,
            Strategy::PromptOirl,
        )
        .unwrap();
        let max = sel.scores.iter().map(|(_, s)| *s).fold(f64::MIN, f64::max);
        let min = sel.scores.iter().map(|(_, s)| *s).fold(f64::MAX, f64::min);
        spread += max - min;
        *chosen_count.entry(sel.chosen_prompt_id.clone()).or_default() += 1;
    }
    println!("mean score spread {:.4}", spread / 500.0);
    println!("chosen counts: {chosen_count:?}");

    // Example scores for one query across candidates
    let q = &bench.corpus.test_queries()[0];
    let e_q = bench.store.get_for_text(&q.text).unwrap();
    for p in &candidates {
        let e_p = bench.store.get_for_text(&p.text).unwrap();
        let fv = feature_vector(e_q, e_p).unwrap();
        println!("  {} -> {:.4}", p.id, model.predict(&fv).unwrap());
    }
}
