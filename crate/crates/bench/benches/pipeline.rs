use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use swapbench::dataset::{functions_from_files, sample_dataset};
use swapbench::eval::{held_out_texts, run_eval, EvalOptions, NgramModel};
use swapbench::pyast::{extract_top_level_functions, parse_module};
use swapbench::stats::{kendall, pearson, spearman};
use swapbench::synth::{synth_files, SynthConfig};
use swapbench::{Backend, BuiltinCatalog, GenerationConfig, ModelSpec, SwapMode};

fn small_corpus() -> SynthConfig {
    SynthConfig {
        repos: 10,
        ..SynthConfig::default()
    }
}

fn parsing(c: &mut Criterion) {
    let files = synth_files(&small_corpus());
    let text = &files[0].text;
    let catalog = BuiltinCatalog::embedded();
    c.bench_function("parse_module", |b| b.iter(|| parse_module(black_box(text)).unwrap()));
    let tree = parse_module(text).unwrap();
    c.bench_function("unparse_module", |b| b.iter(|| black_box(&tree).unparse().unwrap()));
    c.bench_function("extract_functions", |b| {
        b.iter(|| extract_top_level_functions(black_box(&tree), &catalog, 2))
    });
}

fn generation(c: &mut Criterion) {
    let catalog = BuiltinCatalog::embedded();
    let files = synth_files(&small_corpus());
    let functions = functions_from_files(&files, &catalog).functions;
    c.bench_function("functions_from_files", |b| b.iter(|| functions_from_files(black_box(&files), &catalog)));
    let config = GenerationConfig::new(200, 0, SwapMode::Builtin, &catalog);
    c.bench_function("sample_dataset_200", |b| b.iter(|| sample_dataset(black_box(&functions), &config)));
}

fn scoring(c: &mut Criterion) {
    let catalog = BuiltinCatalog::embedded();
    let functions = functions_from_files(&synth_files(&SynthConfig::default()), &catalog).functions;
    let ds = sample_dataset(&functions, &GenerationConfig::new(200, 0, SwapMode::Builtin, &catalog));
    let train = held_out_texts(&functions, &ds.examples);
    c.bench_function("ngram_train_order6", |b| b.iter(|| NgramModel::train(black_box(&train), 6, 0.01).unwrap()));
    let model = NgramModel::train(&train, 6, 0.01).unwrap();
    let spec = ModelSpec::new("ngram", "mock", None, Backend::MockNgram);
    let options = EvalOptions {
        workers: 1,
        ..Default::default()
    };
    c.bench_function("ngram_eval_200", |b| {
        b.iter(|| run_eval(&model, &spec, black_box(&ds.examples), options).unwrap())
    });
}

fn correlations(c: &mut Criterion) {
    let mut group = c.benchmark_group("correlation");
    for n in [6usize, 8, 10, 40] {
        let x: Vec<f64> = (0..n).map(|i| ((i * 7919) % 97) as f64).collect();
        let y: Vec<f64> = (0..n).map(|i| ((i * 104729) % 89) as f64 + 0.5).collect();
        group.bench_with_input(BenchmarkId::new("pearson", n), &n, |b, _| b.iter(|| pearson(&x, &y)));
        group.bench_with_input(BenchmarkId::new("spearman", n), &n, |b, _| b.iter(|| spearman(&x, &y)));
        group.bench_with_input(BenchmarkId::new("kendall", n), &n, |b, _| b.iter(|| kendall(&x, &y)));
    }
    group.finish();
}

criterion_group!(benches, parsing, generation, scoring, correlations);
criterion_main!(benches);
