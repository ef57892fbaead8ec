//! Transform laws checked function by function. Shared by the property
//! tests and the acceptance harness.

#![allow(dead_code)]

use std::collections::BTreeMap;

use swapbench::dataset::{build_example, corpus_hash, ExampleKey};
use swapbench::eval::function_text;
use swapbench::pyast::{
    collect_usage, extract_top_level_functions, parse_module, structurally_equal, unparse_stmts, BuiltinCatalog,
};
use swapbench::rng::DetRng;
use swapbench::transform::{apply_permutation, choose_swap, compose, identity, invert, Permutation};
use swapbench::{SourceFunction, SwapMode};

#[derive(Debug, Default, Clone, Copy, PartialEq, Eq)]
pub struct LawTally {
    pub functions: usize,
    pub examples: usize,
    pub permutations: usize,
}

fn reparse_body(program: &str, name: &str, catalog: &BuiltinCatalog) -> Result<SourceFunction, String> {
    let tree = parse_module(program).map_err(|e| format!("{name}: program does not parse: {e}"))?;
    extract_top_level_functions(&tree, catalog, 0)
        .into_iter()
        .find(|f| f.name == name)
        .ok_or_else(|| format!("{name}: function lost on re-parse"))
}

fn read_counts(f: &[swapbench::pyast::ast::Stmt]) -> BTreeMap<String, usize> {
    let mut counts = BTreeMap::new();
    for r in collect_usage(f).reads {
        *counts.entry(r.name).or_default() += 1;
    }
    counts
}

/// Unparse round-trip: the rendered function parses back to the same body
/// and renders to the same text.
pub fn check_round_trip(f: &SourceFunction, catalog: &BuiltinCatalog) -> Result<(), String> {
    let text = function_text(f).ok_or_else(|| format!("{}: body does not unparse", f.name))?;
    let again = reparse_body(&text, &f.name, catalog)?;
    if !structurally_equal(&again.body, &f.body) {
        return Err(format!("{}: round-trip changed the body", f.name));
    }
    if function_text(&again).as_deref() != Some(text.as_str()) {
        return Err(format!("{}: unparse is not idempotent", f.name));
    }
    Ok(())
}

/// Involution, re-parse validity and reference-count exchange for the swap
/// the generator would pick. Returns false when the function yields no example.
pub fn check_swap(f: &SourceFunction, index: usize, hash: &str, catalog: &BuiltinCatalog) -> Result<bool, String> {
    let key = ExampleKey {
        corpus_hash: hash,
        function_index: index,
        seed: 0,
    };
    let Ok(swap) = choose_swap(f, key.swap_seed(), SwapMode::Builtin) else {
        return Ok(false);
    };
    let Ok(ex) = build_example(f, &swap, SwapMode::Builtin, &key) else {
        return Ok(false);
    };
    let g = ex.swap.as_permutation();
    let name = &f.name;

    let bad = unparse_stmts(&f.body, 1).map_err(|e| e.0)?;
    if bad != ex.bad {
        return Err(format!("{name}: bad class is not the original body"));
    }
    let good_fn = reparse_body(&format!("{}{}", ex.prompt, ex.good), name, catalog)?;
    reparse_body(&format!("{}{}", ex.prompt, ex.bad), name, catalog)?;
    let back = apply_permutation(&good_fn.body, &g).map_err(|e| format!("{name}: {e}"))?;
    if unparse_stmts(&back, 1).map_err(|e| e.0)? != ex.bad {
        return Err(format!("{name}: swapping good does not give bad"));
    }

    let swapped = apply_permutation(&f.body, &g).map_err(|e| format!("{name}: {e}"))?;
    let before = read_counts(&f.body);
    let after = read_counts(&swapped);
    let moved: BTreeMap<String, usize> = before.iter().map(|(n, c)| (g.apply(n).to_owned(), *c)).collect();
    if moved != after {
        return Err(format!("{name}: reference counts were not exchanged by {g}"));
    }
    Ok(true)
}

fn random_permutation(rng: &mut DetRng, names: &[&str]) -> Permutation {
    let k = 1 + rng.below(names.len().min(5) as u64) as usize;
    let picked: Vec<&str> = rng.sample_indices(names.len(), k).into_iter().map(|i| names[i]).collect();
    let mut image = picked.clone();
    rng.shuffle(&mut image);
    let map = picked.iter().zip(&image).map(|(a, b)| ((*a).to_owned(), (*b).to_owned())).collect();
    Permutation::new(map).expect("a shuffle is a bijection")
}

fn act(body: &[swapbench::pyast::ast::Stmt], g: &Permutation) -> Result<String, String> {
    let out = apply_permutation(body, g).map_err(|e| e.to_string())?;
    unparse_stmts(&out, 1).map_err(|e| e.0)
}

/// Group action laws for random permutations of at most five names free in
/// the body: identity, compatibility with composition, inverses.
pub fn check_group_action(f: &SourceFunction, rng: &mut DetRng) -> Result<bool, String> {
    let usage = collect_usage(&f.body);
    let mut free: Vec<&str> = f
        .builtin_refs
        .keys()
        .map(String::as_str)
        .filter(|n| !usage.is_bound(n))
        .collect();
    for extra in ["abs", "divmod", "hash", "iter", "vars"] {
        if !usage.is_bound(extra) && !free.contains(&extra) {
            free.push(extra);
        }
    }
    let g = random_permutation(rng, &free);
    let h = random_permutation(rng, &free);
    let name = &f.name;
    let original = unparse_stmts(&f.body, 1).map_err(|e| e.0)?;
    if act(&f.body, &identity())? != original {
        return Err(format!("{name}: identity moved something"));
    }
    let h_first = apply_permutation(&f.body, &h).map_err(|e| e.to_string())?;
    if act(&h_first, &g)? != act(&f.body, &compose(&g, &h))? {
        return Err(format!("{name}: g·h does not act as g after h ({g}, {h})"));
    }
    let g_first = apply_permutation(&f.body, &g).map_err(|e| e.to_string())?;
    if act(&g_first, &invert(&g))? != original {
        return Err(format!("{name}: g⁻¹ does not undo {g}"));
    }
    Ok(true)
}

/// Every law above over the first `limit` functions.
pub fn check_all(functions: &[SourceFunction], limit: usize, catalog: &BuiltinCatalog) -> Result<LawTally, String> {
    let hash = corpus_hash(functions);
    let mut rng = DetRng::new(&["law-permutations".into()]);
    let mut tally = LawTally::default();
    for (i, f) in functions.iter().enumerate().take(limit) {
        check_round_trip(f, catalog)?;
        tally.examples += usize::from(check_swap(f, i, &hash, catalog)?);
        tally.permutations += usize::from(check_group_action(f, &mut rng)?);
        tally.functions += 1;
    }
    Ok(tally)
}
