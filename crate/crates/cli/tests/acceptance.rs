//! Acceptance suite. Prints one line per criterion and exits nonzero if any
//! criterion fails.

mod common;

use std::collections::HashMap;
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use common::{NoisyTestGenerator, OracleJudge, Suite};
use num_rational::BigRational;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Deserialize;
use verirank::pipeline::{run_with, Services};
use verirank::report::{load_manifest, load_run};
use verirank::{RunConfig, TransportKind};
use verirank_core::distill::{distill_labels, Teacher};
use verirank_core::exec::{ExecStatus, MiniBackend, ScriptedExecutor};
use verirank_core::judge::{ChatError, Judge, JudgeError, ParseQuality, Verdict};
use verirank_core::metrics::{
    aggregate_report, pass_at_k, round_half_up, upper_bound_ratio, wilcoxon_signed_rank, Alternative, PairedSample,
    ReportRow,
};
use verirank_core::model::{Candidate, Label, LabeledCandidate, Problem};
use verirank_core::rerank::{
    score_codet, score_discriminator, select, vote_fraction, CodeTScorer, DiscriminatorScorer, EmbeddingScorer,
    ProbabilityScorer, RandomScorer, Scorer,
};
use verirank_core::syntax::check_syntax;
use verirank_gateway::{EndpointConfig, Gateway, MockTransport};

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn manifest_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

// ---- 1 -------------------------------------------------------------------

/// Share of k-subsets of n items (the first c correct) containing a correct one.
fn enumerate_pass_at_k(n: usize, c: usize, k: usize) -> f64 {
    let (mut hit, mut total) = (0u32, 0u32);
    for mask in 0u32..(1 << n) {
        if mask.count_ones() as usize == k {
            total += 1;
            hit += (mask & ((1 << c) - 1) != 0) as u32;
        }
    }
    hit as f64 / total as f64
}

fn criterion_1() -> Check {
    const TOL: f64 = 1e-12;
    let start = Instant::now();
    let mut worst = 0.0f64;
    let mut cases = 0;
    for n in 1..=8 {
        for c in 0..=n {
            for k in 1..=n {
                let got: f64 = pass_at_k(n, c, k).map_err(|e| e.to_string())?;
                worst = worst.max((got - enumerate_pass_at_k(n, c, k)).abs());
                cases += 1;
            }
        }
    }
    let elapsed = start.elapsed();
    ensure(worst <= TOL, || format!("max error {worst:e} > {TOL:e}"))?;
    ensure(elapsed < Duration::from_secs(1), || format!("took {elapsed:?}"))?;
    Ok(format!(
        "{cases} cases, max |error| {worst:e} <= 1e-12, {elapsed:?} < 1 s"
    ))
}

// ---- 2 -------------------------------------------------------------------

fn table_block(name: &str) -> Result<(String, String, String), String> {
    let path = manifest_dir().join("../core/tests/fixtures").join(name);
    let text = fs::read_to_string(&path).map_err(|e| format!("{}: {e}", path.display()))?;
    let rows: Vec<ReportRow> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    let t = aggregate_report(rows).map_err(|e| e.to_string())?;
    let ours = t.average.reranked["Ours"].clone().ok_or("no Ours average")?;
    let ratio = upper_bound_ratio(&ours, &t.average.passk).map_err(|e| e.to_string())?;
    let pct = round_half_up(&(ratio * BigRational::from_integer(100.into())), 1);
    let avg_line = t.to_text(5).lines().last().unwrap_or_default().to_string();
    ensure(
        avg_line.contains(&ours.rounded()) && avg_line.ends_with(&t.average.passk.rounded()),
        || format!("average line does not carry the averages: {avg_line}"),
    )?;
    Ok((ours.rounded(), t.average.passk.rounded(), pct))
}

fn criterion_2() -> Check {
    let rtllm = table_block("rtllm_rows.jsonl")?;
    let resbench = table_block("resbench_rows.jsonl")?;
    let want_rtllm = ("50.40".to_string(), "58.33".to_string(), "86.4".to_string());
    let want_resbench = ("62.90".to_string(), "67.26".to_string(), "93.5".to_string());
    ensure(rtllm == want_rtllm, || format!("RTLLM {rtllm:?}"))?;
    ensure(resbench == want_resbench, || format!("ResBench {resbench:?}"))?;
    Ok(format!(
        "RTLLM Ours {} Pass@5 {} ratio {}%; ResBench Ours {} Pass@5 {} ratio {}%",
        rtllm.0, rtllm.1, rtllm.2, resbench.0, resbench.1, resbench.2
    ))
}

// ---- 3 -------------------------------------------------------------------

fn suite_config(dir: &Path, suite: &Suite, with_labels: bool) -> RunConfig {
    let paths = suite.write(dir);
    RunConfig {
        problems: paths.problems,
        candidates: Some(paths.candidates),
        labels: with_labels.then_some(paths.labels),
        out_dir: dir.join("out"),
        ..RunConfig::default()
    }
}

fn services(scorer: Box<dyn Scorer>) -> Services {
    Services {
        scorer,
        backend: Arc::new(MiniBackend),
        generator: None,
        gateways: Vec::new(),
    }
}

fn synthetic_gateway() -> Arc<Gateway> {
    Arc::new(Gateway::new(
        EndpointConfig::default(),
        Arc::new(MockTransport::synthetic()),
    ))
}

fn criterion_3() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let suite = Suite::generate(3, 50, 10, 0.15);
    let cfg = suite_config(dir.path(), &suite, false);

    let perfect = run_with(
        cfg.clone(),
        &services(Box::new(DiscriminatorScorer {
            judge: OracleJudge(suite.label_set()),
            m: 5,
        })),
    )
    .map_err(|e| e.to_string())?;
    let s = &perfect.summary;
    ensure(s.evaluated == 50 && s.errored == 0, || format!("{s:?}"))?;
    for r in perfect.labels.records() {
        let truth = suite.label_set().get(&r.problem_id, &r.candidate_id);
        ensure(truth == Some(r.label), || {
            format!("execution label disagrees for {}", r.candidate_id)
        })?;
    }
    let reranked = s.reranked_pass1.clone().ok_or("no reranked pass@1")?;
    let passk = s.passk.clone().ok_or("no pass@5")?;
    ensure(reranked == passk, || {
        format!("reranked {} != pass@5 {}", reranked, passk)
    })?;
    let solvable = suite.correct_in_slice(5).values().filter(|c| **c > 0).count();
    ensure(
        passk == verirank_core::metrics::Percent::from_counts(solvable, 50),
        || "pass@5 != solvable share".into(),
    )?;

    let strategies: Vec<(&str, Box<dyn Scorer>)> = vec![
        ("probability", Box::new(ProbabilityScorer)),
        (
            "coderank",
            Box::new(EmbeddingScorer {
                embedder: synthetic_gateway(),
            }),
        ),
        (
            "codet",
            Box::new(CodeTScorer {
                generator: NoisyTestGenerator {
                    reference: suite.reference.clone(),
                },
                oracle: MiniBackend,
                tests_per_candidate: 5,
            }),
        ),
        (
            "discriminator",
            Box::new(DiscriminatorScorer {
                judge: verirank_core::judge::LlmJudge::new(synthetic_gateway(), Default::default()),
                m: 5,
            }),
        ),
        ("random", Box::new(RandomScorer { seed: 3 })),
    ];
    let mut seen = Vec::new();
    for (name, scorer) in strategies {
        let r = run_with(
            RunConfig {
                labels: Some(dir.path().join("labels.jsonl")),
                ..cfg.clone()
            },
            &services(scorer),
        )
        .map_err(|e| format!("{name}: {e}"))?;
        let got = r
            .summary
            .reranked_pass1
            .clone()
            .ok_or_else(|| format!("{name}: no metrics"))?;
        ensure(got <= passk, || format!("{name} reranked {got} exceeds pass@5 {passk}"))?;
        seen.push(format!("{name} {}", got.rounded()));
    }
    Ok(format!(
        "perfect selector {} == pass@5 {}; {}",
        reranked.rounded(),
        passk.rounded(),
        seen.join(", ")
    ))
}

// ---- 4 -------------------------------------------------------------------

fn criterion_4() -> Check {
    const REPS: u64 = 200;
    const Z99: f64 = 2.5758;
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let suite = Suite::generate(4, 50, 10, 0.0);
    let cfg = suite_config(dir.path(), &suite, true);
    let mut total = 0.0;
    let mut pass1 = None;
    for seed in 0..REPS {
        let r = run_with(cfg.clone(), &services(Box::new(RandomScorer { seed }))).map_err(|e| e.to_string())?;
        total += r.summary.reranked_pass1.clone().ok_or("no metrics")?.to_f64();
        pass1 = r.summary.pass1.clone();
    }
    let mean = total / REPS as f64;
    let p = pass1.ok_or("no pass@1")?.to_f64() / 100.0;
    // Each problem's selection is Bernoulli(c_i / k); the suite mean of R
    // repetitions has variance sum p_i (1 - p_i) / (N^2 R).
    let var: f64 = suite
        .correct_in_slice(5)
        .values()
        .map(|&c| {
            let pi = c as f64 / 5.0;
            pi * (1.0 - pi)
        })
        .sum::<f64>()
        / (50.0f64.powi(2) * REPS as f64);
    let half = Z99 * var.sqrt() * 100.0;
    let p = p * 100.0;
    ensure((mean - p).abs() <= half, || {
        format!("mean {mean:.3} outside {p:.3} +/- {half:.3}")
    })?;
    Ok(format!(
        "mean reranked pass@1 {mean:.3} within {p:.3} +/- {half:.3} (z = {Z99}, {REPS} seeds)"
    ))
}

// ---- 5 -------------------------------------------------------------------

/// Pass `j` (1-based) returns bit `j - 1` of `pattern`.
struct PatternJudge(u32);

impl Judge for PatternJudge {
    fn verdict(&self, _: &Problem, _: &Candidate, pass: usize) -> Result<Verdict, JudgeError> {
        let label = Label::from_pass(self.0 >> (pass - 1) & 1 == 1);
        Ok(Verdict {
            prediction: label,
            reasoning: "r".into(),
            raw: String::new(),
            parse_quality: ParseQuality::Clean,
        })
    }
}

fn criterion_5() -> Check {
    let problem = Problem {
        id: "p".into(),
        spec: "s".into(),
        testbench: None,
        tags: Vec::new(),
        benchmark: "b".into(),
    };
    let cand = [Candidate::new("p", "c", "module m; endmodule")];
    let mut patterns = 0;
    for m in 1..=7usize {
        for pattern in 0u32..(1 << m) {
            let count = pattern.count_ones() as usize;
            let sv = score_discriminator(&problem, &cand, &PatternJudge(pattern), m).map_err(|e| e.to_string())?;
            let score = sv.scores[0].1;
            ensure(score == count as f64 / m as f64, || {
                format!("m={m} pattern={pattern:b}: {score}")
            })?;
            let exact: BigRational = vote_fraction(count, m);
            ensure(exact == BigRational::new(count.into(), m.into()), || {
                format!("m={m}: exact fraction {exact}")
            })?;
            if m % 2 == 1 {
                ensure(exact != BigRational::new(1.into(), 2.into()), || {
                    format!("m={m}: tie at 0.5")
                })?;
            }
            patterns += 1;
        }
    }
    Ok(format!(
        "{patterns} verdict patterns over m = 1..7 score count/m exactly; no 0.5 for odd m"
    ))
}

// ---- 6 -------------------------------------------------------------------

#[derive(Deserialize)]
struct DistillRow {
    id: String,
    code: String,
    label: Label,
    t1: String,
    t2: String,
}

/// Answers from a fixture column and counts calls.
struct ColumnTeacher {
    answers: HashMap<String, String>,
    calls: AtomicUsize,
}

impl Judge for ColumnTeacher {
    fn verdict(&self, _: &Problem, c: &Candidate, _: usize) -> Result<Verdict, JudgeError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        let label = match self.answers[&c.candidate_id].as_str() {
            "pass" => Label::Pass,
            "fail" => Label::Fail,
            _ => return Err(JudgeError::Chat(ChatError::Transient("scripted failure".into()))),
        };
        Ok(Verdict {
            prediction: label,
            reasoning: format!("reasoning for {}", c.candidate_id),
            raw: String::new(),
            parse_quality: ParseQuality::Clean,
        })
    }
}

fn criterion_6() -> Check {
    let text =
        fs::read_to_string(manifest_dir().join("tests/fixtures/distill_rows.jsonl")).map_err(|e| e.to_string())?;
    let rows: Vec<DistillRow> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    ensure(rows.len() == 30, || format!("{} rows", rows.len()))?;
    let teacher = |col: fn(&DistillRow) -> &String| ColumnTeacher {
        answers: rows.iter().map(|r| (r.id.clone(), col(r).clone())).collect(),
        calls: AtomicUsize::new(0),
    };
    let (t1, t2) = (teacher(|r| &r.t1), teacher(|r| &r.t2));
    let pool: Vec<LabeledCandidate> = rows
        .iter()
        .map(|r| LabeledCandidate {
            candidate: Candidate::new("seed", &r.id, &r.code),
            label: r.label,
        })
        .collect();
    let records = distill_labels(&pool, "spec", &t1, &t2);

    let t1_miss: Vec<&DistillRow> = rows.iter().filter(|r| r.t1 != r.label.to_string()).collect();
    let both_miss: Vec<&DistillRow> = t1_miss
        .iter()
        .copied()
        .filter(|r| r.t2 != r.label.to_string())
        .collect();
    let t2_calls = t2.calls.load(Ordering::SeqCst);
    ensure(t2_calls == t1_miss.len(), || {
        format!("T2 queried {t2_calls} times, T1 missed {}", t1_miss.len())
    })?;
    let by_code: HashMap<&str, &DistillRow> = rows.iter().map(|r| (r.code.as_str(), r)).collect();
    for rec in &records {
        let row = by_code[rec.code.as_str()];
        ensure(rec.label == row.label, || {
            format!("{}: label {} != {}", row.id, rec.label, row.label)
        })?;
        let expect = if row.t1 == row.label.to_string() {
            Teacher::T1
        } else {
            Teacher::T2
        };
        ensure(rec.teacher == expect, || format!("{}: wrong teacher", row.id))?;
    }
    for r in &both_miss {
        ensure(!records.iter().any(|rec| rec.code == r.code), || {
            format!("{} should be absent", r.id)
        })?;
    }
    ensure(records.len() == rows.len() - both_miss.len(), || {
        format!("{} records", records.len())
    })?;
    Ok(format!(
        "30 rows: {} T1 misses = {t2_calls} T2 queries, {} records, {} double misses absent",
        t1_miss.len(),
        records.len(),
        both_miss.len()
    ))
}

// ---- 7 -------------------------------------------------------------------

struct CodeTFixture {
    /// Candidate id and the tests it passes.
    passes: &'static [(&'static str, &'static [&'static str])],
    tests: &'static [&'static str],
    /// Hand-enumerated groups: members and |members| x |passed tests|.
    groups: &'static [(&'static [&'static str], u64)],
    selected: &'static str,
}

const CODET_FIXTURES: &[CodeTFixture] = &[
    CodeTFixture {
        passes: &[("a", &["t1", "t2"]), ("b", &["t1", "t2"]), ("c", &["t3"])],
        tests: &["t1", "t2", "t3"],
        groups: &[(&["a", "b"], 4), (&["c"], 1)],
        selected: "a",
    },
    CodeTFixture {
        passes: &[("a", &[]), ("b", &["t1"]), ("c", &["t1"]), ("d", &["t1", "t2"])],
        tests: &["t1", "t2"],
        groups: &[(&["a"], 0), (&["b", "c"], 2), (&["d"], 2)],
        selected: "b",
    },
    CodeTFixture {
        passes: &[
            ("a", &["t1", "t2", "t3", "t4", "t5"]),
            ("b", &["t1", "t2"]),
            ("c", &["t1", "t2"]),
            ("d", &["t1", "t2"]),
            ("e", &["t3"]),
            ("f", &["t1", "t2", "t3", "t4", "t5"]),
        ],
        tests: &["t1", "t2", "t3", "t4", "t5"],
        groups: &[(&["a", "f"], 10), (&["b", "c", "d"], 6), (&["e"], 1)],
        selected: "a",
    },
    CodeTFixture {
        // The second test is the first with different whitespace.
        passes: &[("a", &["t1"]), ("b", &["t1", "t2"]), ("c", &["t2"])],
        tests: &["t1", "  t1\n", "t2"],
        groups: &[(&["a"], 1), (&["b"], 2), (&["c"], 1)],
        selected: "b",
    },
    CodeTFixture {
        passes: &[
            ("a", &["t1"]),
            ("b", &["t1"]),
            ("c", &["t1"]),
            ("d", &["t1"]),
            ("e", &["t1", "t2", "t3", "t4", "t5"]),
        ],
        tests: &["t1", "t2", "t3", "t4", "t5"],
        groups: &[(&["a", "b", "c", "d"], 4), (&["e"], 5)],
        selected: "e",
    },
];

fn criterion_7() -> Check {
    for (i, fx) in CODET_FIXTURES.iter().enumerate() {
        let table: &'static [(&'static str, &'static [&'static str])] = fx.passes;
        let oracle = ScriptedExecutor::from_fn(move |src, test| {
            let passes = table.iter().find(|(id, _)| *id == src).map(|(_, p)| *p).unwrap_or(&[]);
            if passes.contains(&test.trim()) {
                ExecStatus::Pass
            } else {
                ExecStatus::Fail
            }
        });
        let cands: Vec<Candidate> = fx.passes.iter().map(|(id, _)| Candidate::new("p", *id, *id)).collect();
        let tests: Vec<String> = fx.tests.iter().map(|t| t.to_string()).collect();
        let (sv, groups) = score_codet("p", &cands, &tests, &oracle).map_err(|e| e.to_string())?;
        let mut got: Vec<(Vec<String>, u64)> = groups.iter().map(|g| (g.members.clone(), g.group_score)).collect();
        got.sort();
        let mut want: Vec<(Vec<String>, u64)> = fx
            .groups
            .iter()
            .map(|(m, s)| (m.iter().map(|x| x.to_string()).collect(), *s))
            .collect();
        want.sort();
        ensure(got == want, || {
            format!("fixture {}: groups {got:?}, expected {want:?}", i + 1)
        })?;
        for (id, score) in &sv.scores {
            let g = want.iter().find(|(m, _)| m.contains(id)).unwrap();
            ensure(*score == g.1 as f64, || {
                format!("fixture {}: {id} scored {score}", i + 1)
            })?;
        }
        let d = select(sv).map_err(|e| e.to_string())?;
        ensure(d.selected_candidate_id == fx.selected, || {
            format!(
                "fixture {}: selected {}, expected {}",
                i + 1,
                d.selected_candidate_id,
                fx.selected
            )
        })?;
    }
    Ok(format!(
        "{} fixtures: group scores and selections match hand enumeration",
        CODET_FIXTURES.len()
    ))
}

// ---- 8 -------------------------------------------------------------------

/// Doubled average ranks of |d|, computed by counting.
fn doubled_ranks(d: &[f64]) -> Vec<u64> {
    d.iter()
        .map(|x| {
            let below = d.iter().filter(|y| y.abs() < x.abs()).count() as u64;
            let tied = d.iter().filter(|y| y.abs() == x.abs()).count() as u64;
            2 * below + tied + 1
        })
        .collect()
}

/// Exact p-values by trying every sign pattern.
fn brute_force(pairs: &[PairedSample]) -> (f64, f64, f64) {
    let d: Vec<f64> = pairs.iter().map(|p| p.a - p.b).filter(|x| *x != 0.0).collect();
    let r = doubled_ranks(&d);
    let observed: u64 = d.iter().zip(&r).filter(|(x, _)| **x > 0.0).map(|(_, r)| r).sum();
    let (mut ge, mut le) = (0u64, 0u64);
    for signs in 0u32..(1 << d.len()) {
        let w: u64 = r
            .iter()
            .enumerate()
            .filter(|(i, _)| signs >> i & 1 == 1)
            .map(|(_, r)| r)
            .sum();
        ge += (w >= observed) as u64;
        le += (w <= observed) as u64;
    }
    let scale = 0.5f64.powi(d.len() as i32);
    let (upper, lower) = (ge as f64 * scale, le as f64 * scale);
    (upper, lower, (2.0 * upper.min(lower)).min(1.0))
}

fn criterion_8() -> Check {
    for n in 5..=10 {
        let pairs: Vec<PairedSample> = (0..n)
            .map(|i| PairedSample::new(format!("{i}"), (i + 1) as f64, 0.0))
            .collect();
        let w = wilcoxon_signed_rank(&pairs, Alternative::Greater).map_err(|e| e.to_string())?;
        ensure(w.p_value == 0.5f64.powi(n), || format!("n={n}: p = {}", w.p_value))?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut fixtures = 0;
    while fixtures < 20 {
        let n = rng.random_range(5..=12);
        let pairs: Vec<PairedSample> = (0..n)
            .map(|i| {
                PairedSample::new(
                    format!("{i}"),
                    rng.random_range(0..7) as f64,
                    rng.random_range(0..7) as f64,
                )
            })
            .collect();
        if pairs.iter().filter(|p| p.a != p.b).count() < 5 {
            continue;
        }
        let (upper, lower, two) = brute_force(&pairs);
        for (alt, want) in [
            (Alternative::Greater, upper),
            (Alternative::Less, lower),
            (Alternative::TwoSided, two),
        ] {
            let got = wilcoxon_signed_rank(&pairs, alt).map_err(|e| e.to_string())?.p_value;
            ensure(got == want, || format!("fixture {fixtures} {alt:?}: {got} != {want}"))?;
        }
        fixtures += 1;
    }
    Ok("p = 2^-n for n = 5..10; 20 random fixtures match sign enumeration exactly".into())
}

// ---- 9 -------------------------------------------------------------------

const FUZZ_INPUTS: usize = 100_000;
const FUZZ_MAX_LEN: usize = 4096;
const VOCAB: &[&str] = &[
    "module",
    "endmodule",
    "input",
    "output",
    "wire",
    "reg",
    "assign",
    "always",
    "begin",
    "end",
    "if",
    "else",
    "case",
    "endcase",
    "parameter",
    "(",
    ")",
    "[",
    "]",
    "{",
    "}",
    ";",
    ",",
    ":",
    "?",
    "=",
    "<=",
    "+",
    "-",
    "&",
    "|",
    "^",
    "~",
    "@",
    "#",
    ".",
    "a",
    "b",
    "clk",
    "8'hFF",
    "4'b10x1",
    "0",
    "1",
    "`define W 8",
    "`W",
    "\"s\"",
    "// c\n",
    "/* c */",
    "\n",
];

fn fuzz_input(i: usize, seeds: &[String]) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(i as u64);
    match i % 3 {
        0 => {
            let len = rng.random_range(0..=FUZZ_MAX_LEN);
            let bytes: Vec<u8> = (0..len).map(|_| rng.random()).collect();
            String::from_utf8_lossy(&bytes).into_owned()
        }
        1 => {
            let mut s = String::new();
            while s.len() < FUZZ_MAX_LEN - 16 && rng.random_range(0..150) != 0 {
                s.push_str(VOCAB[rng.random_range(0..VOCAB.len())]);
                s.push(' ');
            }
            s
        }
        _ => {
            let mut bytes = seeds[rng.random_range(0..seeds.len())].clone().into_bytes();
            for _ in 0..rng.random_range(1..8) {
                if bytes.is_empty() {
                    break;
                }
                let at = rng.random_range(0..bytes.len());
                match rng.random_range(0..3) {
                    0 => {
                        bytes.remove(at);
                    }
                    1 => bytes.insert(at, rng.random_range(0x20..0x7f)),
                    _ => bytes.truncate(at),
                }
            }
            bytes.truncate(FUZZ_MAX_LEN);
            String::from_utf8_lossy(&bytes).into_owned()
        }
    }
}

fn criterion_9() -> Check {
    let corpus = manifest_dir().join("../core/tests/corpus");
    let mut files = 0;
    let mut wrong = Vec::new();
    let mut seeds = Vec::new();
    for (kind, valid) in [("valid", true), ("invalid", false)] {
        for entry in fs::read_dir(corpus.join(kind)).map_err(|e| e.to_string())? {
            let path = entry.map_err(|e| e.to_string())?.path();
            if path.extension().is_none_or(|x| x != "v") {
                continue;
            }
            let src = fs::read_to_string(&path).map_err(|e| e.to_string())?;
            files += 1;
            if check_syntax(&src).is_valid() != valid {
                wrong.push(path.display().to_string());
            }
            if valid {
                seeds.push(src);
            }
        }
    }
    ensure(files >= 40, || format!("corpus has {files} files"))?;
    ensure(wrong.is_empty(), || format!("misclassified: {wrong:?}"))?;

    let start = Instant::now();
    let failures: Vec<String> = (0..FUZZ_INPUTS)
        .into_par_iter()
        .filter_map(|i| {
            let input = fuzz_input(i, &seeds);
            let t = Instant::now();
            let verdict = catch_unwind(AssertUnwindSafe(|| check_syntax(&input).is_valid()));
            let slow = t.elapsed() > Duration::from_millis(250);
            match verdict {
                Err(_) => Some(format!("input {i}: panic")),
                Ok(_) if slow => Some(format!("input {i}: took {:?}", t.elapsed())),
                Ok(true) if !input.contains("module") => Some(format!("input {i}: valid without `module`")),
                _ => None,
            }
        })
        .collect();
    ensure(failures.is_empty(), || failures[..failures.len().min(5)].join("; "))?;
    Ok(format!(
        "{files} corpus files, 0 misclassified; {FUZZ_INPUTS} fuzz inputs <= 4 KiB in {:.1?}, none panicked, exceeded 250 ms or passed without `module`",
        start.elapsed()
    ))
}

// ---- 10 ------------------------------------------------------------------

fn run_cli(args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_verirank"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    ensure(out.status.success(), || {
        format!(
            "{args:?} exited {:?}: {}",
            out.status.code(),
            String::from_utf8_lossy(&out.stderr)
        )
    })
}

fn criterion_10() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let suite = Suite::generate(10, 50, 10, 0.15);
    let paths = suite.write(&dir.path().join("suite"));
    let config = format!(
        r#"
problems = "{}"
candidates = "{}"
strategy = "discriminator"
k = 5
m = 5
backend = "mini"
transport = "{}"
cache_dir = "cache"
out_dir = "cold"

[endpoints.judge]
base_url = "http://192.0.2.1:9/v1"
"#,
        paths.problems.display(),
        paths.candidates.display(),
        serde_json::to_value(TransportKind::Synthetic)
            .unwrap()
            .as_str()
            .unwrap(),
    );
    let cfg_path = dir.path().join("run.toml");
    fs::write(&cfg_path, config).map_err(|e| e.to_string())?;
    let cfg = cfg_path.to_str().unwrap();
    let warm = dir.path().join("warm");

    let start = Instant::now();
    run_cli(&["rerank", "--config", cfg])?;
    let cold_time = start.elapsed();
    run_cli(&["rerank", "--config", cfg, "--offline", "--out", warm.to_str().unwrap()])?;
    let total = start.elapsed();

    let cold = dir.path().join("cold");
    for file in ["decisions.jsonl", "report.json", "report.csv", "report.txt"] {
        let a = fs::read(cold.join(file)).map_err(|e| format!("{file}: {e}"))?;
        let b = fs::read(warm.join(file)).map_err(|e| format!("{file}: {e}"))?;
        ensure(a == b, || format!("{file} differs between runs"))?;
    }
    let (m1, m2) = (
        load_manifest(&cold).map_err(|e| e.to_string())?,
        load_manifest(&warm).map_err(|e| e.to_string())?,
    );
    ensure(m1.gateway.network_calls == 0 && m2.gateway.network_calls == 0, || {
        "network calls recorded".into()
    })?;
    // Syntax-invalid candidates are filtered before scoring.
    let judged = suite
        .problems
        .iter()
        .flat_map(|p| suite.candidates.iter().filter(|c| c.problem_id == p.id).take(5))
        .filter(|c| check_syntax(&c.source).is_valid())
        .count();
    ensure(m1.gateway.calls == judged * 5, || {
        format!("{} judge calls for {judged} candidates", m1.gateway.calls)
    })?;
    ensure(m2.gateway.cache_hits == m2.gateway.calls, || {
        format!("warm run: {:?}", m2.gateway)
    })?;
    let report = load_run(&cold).map_err(|e| e.to_string())?;
    ensure(report.summary.decided == 50, || format!("{:?}", report.summary))?;
    ensure(total < Duration::from_secs(60), || format!("took {total:?}"))?;
    Ok(format!(
        "50 problems x 5 votes: cold {:.1?}, total {:.1?} < 60 s; decisions byte-identical; 0 network calls in {} logged calls",
        cold_time,
        total,
        m1.gateway.calls + m2.gateway.calls
    ))
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("pass@k matches subset enumeration", criterion_1),
        ("table averages and upper-bound ratios", criterion_2),
        ("perfect selector reaches pass@k", criterion_3),
        ("random selector tracks pass@1", criterion_4),
        ("majority vote is count/m", criterion_5),
        ("distillation keeps execution-aligned teachers", criterion_6),
        ("consensus groups match hand enumeration", criterion_7),
        ("signed-rank p-values match enumeration", criterion_8),
        ("syntax corpus and fuzzing", criterion_9),
        ("hermetic rerun is byte-identical", criterion_10),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let outcome = catch_unwind(check).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        match outcome {
            Ok(detail) => println!("criterion {:>2} PASS  {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name}: {detail}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
