//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.

#[path = "../../core/tests/support/laws.rs"]
mod laws;
#[path = "../../core/tests/support/oracles.rs"]
mod oracles;

use std::path::Path;
use std::process::{Command, ExitCode};
use std::sync::LazyLock;
use std::time::{Duration, Instant};

use swapbench::corpus::SourceFile;
use swapbench::dataset::{build_example, corpus_hash, functions_from_files, generate, sample_dataset, ExampleKey};
use swapbench::eval::chat::{user_message, QUESTION};
use swapbench::eval::{
    held_out_texts, run_chat_eval, run_eval, EvalOptions, NgramModel, ScriptedChat, UniformModel,
};
use swapbench::pyast::parse_module;
use swapbench::rng::DetRng;
use swapbench::stats::{kendall, pearson, scaling_report, spearman, PMethod};
use swapbench::synth::{synth_files, write_corpus, SynthConfig};
use swapbench::transform::{blocking_site, eligible_names};
use swapbench::{
    Backend, BuiltinCatalog, ClassificationExample, GenerationConfig, ModelSpec, ScalingPoint, SourceFunction,
    SwapMode, SwapSpec,
};

type Outcome = Result<String, String>;
type Criterion = (&'static str, u64, fn() -> Outcome);

static CATALOG: LazyLock<BuiltinCatalog> = LazyLock::new(BuiltinCatalog::embedded);
static FUNCTIONS: LazyLock<Vec<SourceFunction>> =
    LazyLock::new(|| functions_from_files(&synth_files(&SynthConfig::default()), &CATALOG).functions);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn golden(name: &str) -> String {
    let path = format!("{}/../core/tests/golden/{name}", env!("CARGO_MANIFEST_DIR"));
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{path}: {e}"))
}

fn print_len_golden() -> Outcome {
    let files = [SourceFile::new("fixture", "print_len.py", golden("print_len_source.py"))];
    let ds = generate(&files, &CATALOG, &GenerationConfig::new(1, 0, SwapMode::Builtin, &CATALOG));
    let [ex] = &ds.examples[..] else {
        return Err(format!("expected one example, got {}", ds.examples.len()));
    };
    ensure((ex.swap.a.as_str(), ex.swap.b.as_str()) == ("len", "print"), || format!("swap {:?}", ex.swap))?;
    ensure(format!("{}{}", ex.prompt, ex.bad) == golden("print_len_bad.py"), || "bad program differs".into())?;
    ensure(format!("{}{}", ex.prompt, ex.good) == golden("print_len_good.py"), || "good program differs".into())?;
    Ok("prompt, bad and good byte-identical to golden files".into())
}

fn importfile_golden() -> Outcome {
    let files = [SourceFile::new("fixture", "importfile.py", golden("importfile_source.py"))];
    let pool = functions_from_files(&files, &CATALOG);
    let f = pool
        .functions
        .iter()
        .find(|f| f.name == "importfile")
        .ok_or("importfile not extracted")?;
    let hash = corpus_hash(&pool.functions);
    let key = ExampleKey {
        corpus_hash: &hash,
        function_index: 0,
        seed: 0,
    };
    let swap = SwapSpec::new("len", "open", 0).map_err(|e| e.to_string())?;
    let ex = build_example(f, &swap, SwapMode::Builtin, &key).map_err(|e| e.to_string())?;
    let head = golden("importfile_head.py");
    ensure(ex.prompt == head, || format!("head differs:\n{}", ex.prompt))?;
    for (ours, theirs) in [(&ex.bad, "importfile_incorrect.py"), (&ex.good, "importfile_correct.py")] {
        let expected = parse_module(&format!("{head}{}", golden(theirs))).map_err(|e| e.to_string())?;
        let actual = parse_module(&format!("{}{ours}", ex.prompt)).map_err(|e| e.to_string())?;
        ensure(actual.structurally_equal(&expected), || format!("{theirs} differs structurally"))?;
    }
    Ok("head exact, incorrect and correct tree-equal".into())
}

fn transform_laws() -> Outcome {
    let tally = laws::check_all(&FUNCTIONS, 1000, &CATALOG)?;
    ensure(tally.functions == 1000, || format!("only {} functions", tally.functions))?;
    Ok(format!(
        "{} functions, {} swaps, {} random permutations, 0 violations",
        tally.functions, tally.examples, tally.permutations
    ))
}

/// One example per function, swapping two eligible builtins of equal length.
fn equal_length_examples(limit: usize) -> Vec<ClassificationExample> {
    let hash = corpus_hash(&FUNCTIONS);
    let mut out = Vec::new();
    for (i, f) in FUNCTIONS.iter().enumerate() {
        let names: Vec<&str> = eligible_names(f, SwapMode::Builtin)
            .into_iter()
            .filter(|n| blocking_site(f, n, SwapMode::Builtin).is_none())
            .collect();
        let pair = names
            .iter()
            .enumerate()
            .find_map(|(j, a)| names[j + 1..].iter().find(|b| b.len() == a.len()).map(|b| (*a, *b)));
        let Some((a, b)) = pair else { continue };
        let key = ExampleKey {
            corpus_hash: &hash,
            function_index: i,
            seed: 0,
        };
        let swap = SwapSpec::new(a, b, 0).expect("distinct identifiers");
        if let Ok(ex) = build_example(f, &swap, SwapMode::Builtin, &key) {
            out.push(ex);
        }
        if out.len() == limit {
            break;
        }
    }
    out
}

fn uniform_mock() -> Outcome {
    let examples = equal_length_examples(1000);
    ensure(examples.len() == 1000, || format!("only {} equal-length examples", examples.len()))?;
    ensure(examples.iter().all(|e| e.good.len() == e.bad.len()), || "unequal class lengths".into())?;
    let spec = ModelSpec::new("uniform", "mock", None, Backend::MockUniform);
    let options = EvalOptions {
        workers: 4,
        ..Default::default()
    };
    let report = run_eval(&UniformModel::default(), &spec, &examples, options).map_err(|e| e.to_string())?;
    let gap = (report.mean_loss - std::f64::consts::LN_2).abs();
    ensure(gap <= 1e-9, || format!("mean loss {} (|Δ| {gap:e})", report.mean_loss))?;
    let worst = report
        .results
        .iter()
        .map(|r| (r.posterior_good + r.posterior_bad - 1.0).abs())
        .fold(0.0, f64::max);
    ensure(worst <= 1e-12, || format!("posterior sum off by {worst:e}"))?;
    Ok(format!("1000 examples, |mean loss − ln 2| = {gap:e}, worst posterior error {worst:e}"))
}

fn ngram_prefers_incorrect() -> Outcome {
    let ds = sample_dataset(&FUNCTIONS, &GenerationConfig::new(200, 0, SwapMode::Builtin, &CATALOG));
    ensure(ds.examples.len() == 200, || format!("{} examples", ds.examples.len()))?;
    let train = held_out_texts(&FUNCTIONS, &ds.examples);
    ensure(train.len() >= 200, || format!("{} training functions", train.len()))?;
    let model = NgramModel::train(&train, 6, 0.01).map_err(|e| e.to_string())?;
    let spec = ModelSpec::new("ngram", "mock", None, Backend::MockNgram);
    let options = EvalOptions {
        workers: 4,
        ..Default::default()
    };
    let report = run_eval(&model, &spec, &ds.examples, options).map_err(|e| e.to_string())?;
    ensure(report.accuracy < 0.5, || format!("accuracy {}", report.accuracy))?;
    Ok(format!(
        "order 6 on {} held-out functions: accuracy {:.3}, mean loss {:.2}",
        train.len(),
        report.accuracy,
        report.mean_loss
    ))
}

fn uniform_vec(rng: &mut DetRng, n: usize) -> Vec<f64> {
    (0..n).map(|_| (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64 * 10.0 - 5.0).collect()
}

fn close(a: f64, b: f64, tol: f64, what: &str, trial: usize) -> Result<(), String> {
    ensure((a - b).abs() <= tol, || format!("trial {trial}: {what} {a} vs {b}"))
}

fn statistics() -> Outcome {
    let mut rng = DetRng::new(&["acceptance-stats".into()]);
    let mut exact = 0;
    for trial in 0..500 {
        let n = 4 + trial % 7;
        let (x, y) = (uniform_vec(&mut rng, n), uniform_vec(&mut rng, n));
        let err = |e: swapbench::stats::CorrelationError| format!("trial {trial}: {e}");
        let (p, s, k) = (
            pearson(&x, &y).map_err(err)?,
            spearman(&x, &y).map_err(err)?,
            kendall(&x, &y).map_err(err)?,
        );
        let r = oracles::pearson_r(&x, &y);
        close(p.coefficient, r, 1e-12, "pearson r", trial)?;
        close(p.p, oracles::pearson_p(r, n), 1e-9, "pearson p", trial)?;
        close(s.coefficient, oracles::spearman_rho(&x, &y), 1e-12, "spearman rho", trial)?;
        close(k.coefficient, oracles::kendall_tau_b(&x, &y), 1e-12, "kendall tau", trial)?;
        if s.method == PMethod::Exact {
            close(s.p, oracles::spearman_exact_p(&x, &y), 1e-9, "spearman exact p", trial)?;
            exact += 1;
        }
        if k.method == PMethod::Exact {
            close(k.p, oracles::kendall_exact_p(&x, &y), 1e-9, "kendall exact p", trial)?;
            exact += 1;
        }
        let fx: Vec<f64> = x.iter().map(|v| v.exp()).collect();
        let fy: Vec<f64> = y.iter().map(|v| v.powi(3) + 2.0 * v).collect();
        let (s2, k2) = (spearman(&fx, &fy).map_err(err)?, kendall(&fx, &fy).map_err(err)?);
        ensure(s2 == s && k2 == k, || format!("trial {trial}: not invariant under monotone maps"))?;
    }

    let points: Vec<ScalingPoint> = [0.35, 1.3, 6.7, 175.0]
        .iter()
        .zip([0.62, 0.71, 0.93, 1.40])
        .map(|(size, loss)| ScalingPoint {
            model: ModelSpec::new(&format!("m{size}"), "synthetic", Some(*size), Backend::MockUniform),
            mean_loss: loss,
            stderr: 0.01,
            n_examples: 100,
        })
        .collect();
    let report = scaling_report(&points).map_err(|e| e.to_string())?;
    ensure(report.spearman.value == Some(1.0), || format!("spearman {:?}", report.spearman.value))?;
    ensure(report.kendall.value == Some(1.0), || format!("kendall {:?}", report.kendall.value))?;
    Ok(format!("500 vectors ({exact} exact p checks), monotone family spearman = kendall = 1"))
}

fn chat_protocol() -> Outcome {
    let examples = &sample_dataset(&FUNCTIONS, &GenerationConfig::new(50, 0, SwapMode::Builtin, &CATALOG)).examples;
    let spec = ModelSpec::new("scripted", "fake", None, Backend::ApiChat);
    let pool = rayon::ThreadPoolBuilder::new().num_threads(4).build().map_err(|e| e.to_string())?;

    let ones = run_chat_eval(&ScriptedChat(|_: &str| Ok("1".to_owned())), &spec, examples, 0.0, &pool);
    ensure(
        (ones.correct_rate, ones.incorrect_rate, ones.invalid_rate) == (0.5, 0.5, 0.0),
        || format!("always-1: {} / {} / {}", ones.correct_rate, ones.incorrect_rate, ones.invalid_rate),
    )?;
    let mute = run_chat_eval(&ScriptedChat(|_: &str| Ok("I cannot say.".to_owned())), &spec, examples, 0.0, &pool);
    ensure(mute.invalid_rate == 1.0, || format!("no-integer invalid rate {}", mute.invalid_rate))?;

    let expected = "Consider the following Python programs:\n\nProgram 1:\n\nA\n\nProgram 2:\n\nB\n\n\
                    Which program is more likely to be correct? Write only the number of the program and nothing else.";
    ensure(user_message("A", "B") == expected, || "user message differs from template".into())?;
    ensure(QUESTION.starts_with("Which program is more likely to be correct?"), || "question differs".into())?;
    Ok(format!("{} trials: always-1 50/50/0, no-integer 100% invalid, template exact", ones.trials))
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let root = dir.path().join("corpus");
    write_corpus(&root, &SynthConfig::default()).map_err(|e| e.to_string())?;
    let files = dir.path().join("files.jsonl");
    let run = |args: &[&str]| -> Result<(), String> {
        let out = Command::new(env!("CARGO_BIN_EXE_swapbench"))
            .args(args)
            .env("RUST_LOG", "warn")
            .output()
            .map_err(|e| e.to_string())?;
        ensure(out.status.success(), || format!("{args:?}: {}", String::from_utf8_lossy(&out.stderr)))
    };
    let s = |p: &Path| p.to_str().expect("utf-8 temp path").to_owned();
    run(&["enumerate", "--root", &s(&root), "--out", &s(&files), "--repo-depth", "2"])?;
    let mut outputs = Vec::new();
    for name in ["a.jsonl", "b.jsonl"] {
        let out = dir.path().join(name);
        run(&["generate", "--files", &s(&files), "--n", "1000", "--seed", "0", "--out", &s(&out)])?;
        outputs.push(std::fs::read(&out).map_err(|e| e.to_string())?);
    }
    let lines = outputs[0].iter().filter(|&&c| c == b'\n').count();
    ensure(lines == 1001, || format!("{} examples", lines.saturating_sub(1)))?;
    ensure(outputs[0] == outputs[1], || "runs differ".into())?;
    Ok(format!("2 × 1000 examples, {} identical bytes", outputs[0].len()))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        ("print-len-golden", 1, print_len_golden),
        ("importfile-golden", 1, importfile_golden),
        ("transform-laws", 60, transform_laws),
        ("uniform-mock", 10, uniform_mock),
        ("ngram-prefers-incorrect", 300, ngram_prefers_incorrect),
        ("statistics-kernel", 30, statistics),
        ("chat-protocol", 5, chat_protocol),
        ("determinism", 120, determinism),
    ];
    let mut failed = 0;
    for (name, budget, check) in criteria {
        let start = Instant::now();
        let outcome = check();
        let took = start.elapsed();
        let outcome = outcome.and_then(|detail| {
            ensure(took <= Duration::from_secs(budget), || format!("took {took:.2?}, budget {budget}s"))?;
            Ok(detail)
        });
        match outcome {
            Ok(detail) => println!("PASS {name} ({took:.2?} of {budget}s): {detail}"),
            Err(reason) => {
                failed += 1;
                println!("FAIL {name} ({took:.2?} of {budget}s): {reason}");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
