//! Transform and dataset invariants over the synthetic corpus.

#[path = "support/laws.rs"]
mod laws;

use std::sync::LazyLock;

use proptest::prelude::*;
use swapbench::dataset::{corpus_hash, deserialize, functions_from_files, generate, sample_dataset, serialize};
use swapbench::eval::{run_eval, EvalOptions, ExampleResult, UniformModel};
use swapbench::rng::DetRng;
use swapbench::synth::{synth_files, SynthConfig};
use swapbench::{BuiltinCatalog, GenerationConfig, ModelSpec, SourceFunction, SwapMode};

static CATALOG: LazyLock<BuiltinCatalog> = LazyLock::new(BuiltinCatalog::embedded);
static FUNCTIONS: LazyLock<Vec<SourceFunction>> =
    LazyLock::new(|| functions_from_files(&synth_files(&SynthConfig::default()), &CATALOG).functions);

#[test]
fn laws_hold_on_a_thousand_functions() {
    assert!(FUNCTIONS.len() >= 1000, "{}", FUNCTIONS.len());
    let tally = laws::check_all(&FUNCTIONS, 1000, &CATALOG).unwrap();
    assert_eq!(tally.functions, 1000);
    assert_eq!(tally.permutations, 1000);
    assert!(tally.examples >= 900, "{tally:?}");
}

#[test]
fn dataset_round_trips_through_jsonl() {
    let config = GenerationConfig::new(300, 5, SwapMode::Builtin, &CATALOG);
    let ds = sample_dataset(&FUNCTIONS, &config);
    let bytes = serialize(&ds);
    let back = deserialize(std::str::from_utf8(&bytes).unwrap()).unwrap();
    assert_eq!(back, ds);
    assert_eq!(serialize(&back), bytes);
}

#[test]
fn answer_positions_are_balanced() {
    let ds = sample_dataset(&FUNCTIONS, &GenerationConfig::new(1000, 0, SwapMode::Builtin, &CATALOG));
    assert_eq!(ds.examples.len(), 1000);
    let mean = ds.examples.iter().map(|e| e.answer_index as f64).sum::<f64>() / 1000.0;
    assert!((0.45..=0.55).contains(&mean), "{mean}");
}

#[test]
fn generation_ignores_file_order() {
    let mut files = synth_files(&SynthConfig {
        repos: 6,
        ..SynthConfig::default()
    });
    let config = GenerationConfig::new(120, 3, SwapMode::Builtin, &CATALOG);
    let reference = serialize(&generate(&files, &CATALOG, &config));
    files.reverse();
    assert_eq!(serialize(&generate(&files, &CATALOG, &config)), reference);
    DetRng::new(&["file-order".into()]).shuffle(&mut files);
    assert_eq!(serialize(&generate(&files, &CATALOG, &config)), reference);
}

#[test]
fn growing_n_keeps_existing_examples() {
    let small = sample_dataset(&FUNCTIONS, &GenerationConfig::new(200, 9, SwapMode::Builtin, &CATALOG));
    let large = sample_dataset(&FUNCTIONS, &GenerationConfig::new(400, 9, SwapMode::Builtin, &CATALOG));
    let mut shared = 0;
    for ex in &small.examples {
        if let Some(same) = large.examples.iter().find(|e| e.id == ex.id) {
            assert_eq!(same, ex);
            shared += 1;
        }
    }
    assert!(shared > 50, "{shared}");
}

#[test]
fn uniform_model_is_indifferent_on_equal_lengths() {
    let ds = sample_dataset(&FUNCTIONS, &GenerationConfig::new(1000, 1, SwapMode::Builtin, &CATALOG));
    let even: Vec<_> = ds.examples.into_iter().filter(|e| e.good.len() == e.bad.len()).collect();
    assert!(even.len() >= 100, "{}", even.len());
    let spec = ModelSpec::new("mock-uniform", "mock", None, swapbench::Backend::MockUniform);
    let report = run_eval(&UniformModel::default(), &spec, &even, EvalOptions { workers: 4, ..Default::default() }).unwrap();
    assert!((report.mean_loss - std::f64::consts::LN_2).abs() < 1e-9);
    assert_eq!(report.accuracy, 0.0);
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 128, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn swap_laws_hold_for_any_function(i in 0usize..1653) {
        let f = &FUNCTIONS[i % FUNCTIONS.len()];
        let hash = corpus_hash(&FUNCTIONS);
        laws::check_round_trip(f, &CATALOG).map_err(TestCaseError::fail)?;
        laws::check_swap(f, i % FUNCTIONS.len(), &hash, &CATALOG).map_err(TestCaseError::fail)?;
    }

    #[test]
    fn group_action_holds_for_any_key(i in 0usize..1653, key in any::<u64>()) {
        let f = &FUNCTIONS[i % FUNCTIONS.len()];
        let mut rng = DetRng::new(&["prop".into(), key.into()]);
        laws::check_group_action(f, &mut rng).map_err(TestCaseError::fail)?;
    }

    #[test]
    fn posterior_is_normalized(good in -500.0f64..0.0, bad in -500.0f64..0.0) {
        let r = ExampleResult::from_logps("p", good, bad);
        prop_assert!((r.posterior_good + r.posterior_bad - 1.0).abs() < 1e-12);
        prop_assert!((r.loss + r.posterior_good.ln()).abs() < 1e-9);
        prop_assert_eq!(r.correct, good > bad);
        let flipped = ExampleResult::from_logps("p", bad, good);
        prop_assert!((flipped.posterior_good - r.posterior_bad).abs() < 1e-12);
    }
}
