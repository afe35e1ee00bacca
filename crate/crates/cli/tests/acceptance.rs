//! Runs every headline criterion at its tolerance and prints one line each.

#[path = "../../core/tests/support/mod.rs"]
mod support;

use std::path::PathBuf;
use std::process::Command;
use std::time::{Duration, Instant};

use costar_core::spatial::RStarTree;
use support::*;

type Verdict = Result<String, String>;

fn costar(args: &[&str]) -> (Option<i32>, Vec<u8>, Duration) {
    let start = Instant::now();
    let out = Command::new(env!("CARGO_BIN_EXE_costar"))
        .args(args)
        .env("RUST_LOG", "off")
        .output()
        .expect("costar runs");
    (out.status.code(), out.stdout, start.elapsed())
}

fn first_failure(cases: impl IntoIterator<Item = (u64, Result<(), String>)>) -> Result<usize, String> {
    let mut n = 0;
    for (seed, r) in cases {
        r.map_err(|e| format!("seed {seed}: {e}"))?;
        n += 1;
    }
    Ok(n)
}

fn assembly_repeatability() -> Verdict {
    let (code, stdout, took) = costar(&["batch", "assembly", "--trials", "10", "--noise-pos", "0.005"]);
    let report: serde_json::Value = serde_json::from_slice(&stdout).map_err(|e| e.to_string())?;
    let successes = report["successes"].as_u64().unwrap_or(0);
    if code != Some(0) || successes != 10 {
        return Err(format!("{successes}/10 succeeded, exit {code:?}"));
    }
    if took >= Duration::from_secs(30) {
        return Err(format!("10/10 but took {took:.1?}"));
    }
    let (code, stdout, _) = costar(&["batch", "assembly", "--trials", "10", "--noise-pos", "0.05"]);
    let report: serde_json::Value = serde_json::from_slice(&stdout).map_err(|e| e.to_string())?;
    let failed: Vec<&str> = report["perTrial"]
        .as_array()
        .into_iter()
        .flatten()
        .filter(|t| t["status"] == "FAILURE")
        .filter_map(|t| t["failureNode"].as_str())
        .filter(|n| !n.is_empty())
        .collect();
    if code != Some(1) || failed.is_empty() {
        return Err(format!("at 0.05 m noise: exit {code:?}, failing nodes {failed:?}"));
    }
    Ok(format!("10/10 at 0.005 m in {took:.1?}; {} failures at 0.05 m, e.g. {}", failed.len(), failed[0]))
}

fn persistence_oracle() -> Verdict {
    let n = first_failure((0..200).map(|s| (s, check_persistence(s))))?;
    Ok(format!("{n} two-frame scenes identical"))
}

fn rtree_correctness() -> Verdict {
    let mut rng = rng(2024);
    let entries = random_entries(&mut rng, 1000);
    let queries: Vec<_> = (0..100).map(|_| random_query(&mut rng)).collect();
    let start = Instant::now();
    let tree = RStarTree::bulk_load(entries.clone()).map_err(|e| e.to_string())?;
    let answers: Vec<Option<String>> = queries
        .iter()
        .map(|(p, max, class)| {
            let mut q = costar_core::spatial::NearestQuery::new();
            if let Some(m) = max {
                q = q.within(*m);
            }
            if let Some(c) = class {
                q = q.class(*c);
            }
            tree.query_nearest(p, &q).map(|e| e.id.clone())
        })
        .collect();
    let took = start.elapsed();
    for ((p, max, class), got) in queries.iter().zip(&answers) {
        let want = linear_nearest(&entries, p, *max, *class);
        if *got != want {
            return Err(format!("query {p:?} max {max:?} class {class:?}: index {got:?}, scan {want:?}"));
        }
    }
    tree.check_invariants()?;
    if took >= Duration::from_millis(100) {
        return Err(format!("results identical but took {took:.1?}"));
    }
    Ok(format!("1000 entries x 100 queries identical; load and query in {took:.2?}"))
}

fn smart_move_oracle() -> Verdict {
    let n = first_failure((0..100).map(|s| (s, check_smart_move(s))))?;
    Ok(format!("{n} scenes pick the brute-force argmin"))
}

fn behavior_tree_semantics() -> Verdict {
    let n = first_failure((0..1000).map(|s| (s, check_bt(s, 30))))?;
    for (name, r) in node_examples() {
        r.map_err(|e| format!("{name} example: {e}"))?;
    }
    Ok(format!("{n} random trees match the reference; sequence, selector, repeat and reset examples hold"))
}

fn canonical_orientation() -> Verdict {
    let n = first_failure((0..1000).map(|s| (s, check_canonical(s))))?;
    Ok(format!("{n} cube poses match brute force; idempotent at 1e-9"))
}

fn hand_eye() -> Verdict {
    let mut worst: f64 = 0.0;
    for seed in 0..100 {
        let (p, r) = hand_eye_error(seed, 12, 0.0, false)?;
        worst = worst.max(p).max(r);
    }
    if worst >= 1e-6 {
        return Err(format!("noiseless error {worst:e}"));
    }
    let mut means = Vec::new();
    for sigma_deg in [0.0f64, 0.1, 0.5] {
        let mut total = (0.0, 0.0);
        for seed in 0..50 {
            let (p, r) = hand_eye_error(seed, 12, sigma_deg.to_radians(), false)?;
            total = (total.0 + p, total.1 + r);
        }
        means.push((total.0 / 50.0, total.1 / 50.0));
    }
    let rising = means.windows(2).all(|w| w[0].0 <= w[1].0 && w[0].1 <= w[1].1);
    let summary = means
        .iter()
        .map(|(p, r)| format!("{p:.2e} m/{:.3} deg", r.to_degrees()))
        .collect::<Vec<_>>()
        .join(", ");
    if !rising {
        return Err(format!("mean error not non-decreasing: {summary}"));
    }
    Ok(format!("noiseless max {worst:.1e}; mean error at 0, 0.1, 0.5 deg: {summary}"))
}

fn dsl_round_trip() -> Verdict {
    let n = first_failure((0..500).map(|s| (s, check_dsl_round_trip(s))))?;
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures/grammar_errors");
    let fixtures = grammar_fixtures(&dir);
    for (name, text, at) in &fixtures {
        check_grammar_fixture(name, text, *at)?;
    }
    Ok(format!("{n} plans round-trip; {} error fixtures located", fixtures.len()))
}

fn determinism() -> Verdict {
    for noise in ["0.005", "0.05"] {
        let args = ["batch", "assembly", "--trials", "5", "--noise-pos", noise, "--seed-base", "17"];
        let (a, b) = (costar(&args), costar(&args));
        if a.1.is_empty() || a.1 != b.1 {
            return Err(format!("reports differ at noise {noise}"));
        }
    }
    Ok("repeated batches byte-identical at two noise levels".into())
}

fn main() {
    let criteria: [(&str, fn() -> Verdict); 9] = [
        ("assembly repeatability", assembly_repeatability),
        ("persistence matches greedy oracle", persistence_oracle),
        ("r-tree nearest neighbor", rtree_correctness),
        ("smart move matches argmin oracle", smart_move_oracle),
        ("behavior tree semantics", behavior_tree_semantics),
        ("canonical orientation", canonical_orientation),
        ("hand-eye calibration", hand_eye),
        ("plan text round trip", dsl_round_trip),
        ("batch determinism", determinism),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        match check() {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {name}: {detail}");
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
