//! Synthetic benchmark with known labels, plus test doubles.
//!
//! Every problem asks for a 4-bit → 5-bit combinational function. Candidates
//! implement either the reference operation (in one of several surface
//! forms) or a different operation that disagrees on at least one stimulus
//! row, so each label is known by construction.

#![allow(dead_code)]

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;
use verirank_core::judge::{ChatError, Judge, JudgeError, ParseQuality, TestGenerator, Verdict};
use verirank_core::model::{to_jsonl, Candidate, Label, LabelRecord, LabelSet, Problem};

pub struct Op {
    pub name: &'static str,
    pub expr: &'static str,
    pub eval: fn(u64, u64) -> u64,
}

pub const OPS: &[Op] = &[
    Op {
        name: "the sum of a and b",
        expr: "a + b",
        eval: |a, b| (a + b) & 31,
    },
    Op {
        name: "a minus b, modulo 32",
        expr: "a - b",
        eval: |a, b| a.wrapping_sub(b) & 31,
    },
    Op {
        name: "the bitwise AND of a and b",
        expr: "a & b",
        eval: |a, b| a & b,
    },
    Op {
        name: "the bitwise OR of a and b",
        expr: "a | b",
        eval: |a, b| a | b,
    },
    Op {
        name: "the bitwise XOR of a and b",
        expr: "a ^ b",
        eval: |a, b| a ^ b,
    },
    Op {
        name: "b with the bits of a cleared",
        expr: "~a & b",
        eval: |a, b| !a & b & 31,
    },
    Op {
        name: "the larger of a and b",
        expr: "(a > b) ? a : b",
        eval: |a, b| a.max(b),
    },
    Op {
        name: "twice a plus b, modulo 32",
        expr: "(a << 1) + b",
        eval: |a, b| ((a << 1) + b) & 31,
    },
];

pub const GENERATOR: &str = "synthetic-lm";
const CORRECT_RATES: &[f64] = &[0.0, 0.1, 0.3, 0.5, 0.7, 0.9];

fn render(expr: &str, form: usize) -> String {
    match form % 3 {
        0 => format!("module top(input [3:0] a, input [3:0] b, output [4:0] y);\n  assign y = {expr};\nendmodule\n"),
        1 => format!(
            "module top(\n  input  [3:0] a,\n  input  [3:0] b,\n  output [4:0] y\n);\n  wire [4:0] t;\n  assign t = {expr};\n  assign y = t;\nendmodule\n"
        ),
        _ => format!("// generated\nmodule top (input [3:0] a, input [3:0] b, output [4:0] y);\n  assign y = ({expr});\nendmodule\n"),
    }
}

pub struct Suite {
    pub problems: Vec<Problem>,
    pub candidates: Vec<Candidate>,
    pub labels: Vec<LabelRecord>,
    /// Reference operation and stimulus rows per problem.
    pub reference: BTreeMap<String, (usize, Vec<(u64, u64)>)>,
}

pub struct SuitePaths {
    pub problems: PathBuf,
    pub candidates: PathBuf,
    pub labels: PathBuf,
}

pub fn stimulus_json(op: &Op, rows: &[(u64, u64)]) -> String {
    json!({
        "inputs": rows.iter().map(|(a, b)| json!({"a": a, "b": b})).collect::<Vec<_>>(),
        "expected": rows.iter().map(|(a, b)| json!({"y": (op.eval)(*a, *b)})).collect::<Vec<_>>(),
    })
    .to_string()
}

fn agrees(x: &Op, y: &Op, rows: &[(u64, u64)]) -> bool {
    rows.iter().all(|(a, b)| (x.eval)(*a, *b) == (y.eval)(*a, *b))
}

impl Suite {
    /// `syntax_error_rate` of the wrong candidates lose a semicolon.
    pub fn generate(seed: u64, n_problems: usize, n_candidates: usize, syntax_error_rate: f64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut suite = Suite {
            problems: Vec::new(),
            candidates: Vec::new(),
            labels: Vec::new(),
            reference: BTreeMap::new(),
        };
        for i in 0..n_problems {
            let pid = format!("p{i:03}");
            let r = rng.random_range(0..OPS.len());
            let mut rows = vec![(0, 0), (15, 15), (15, 1), (1, 15)];
            rows.extend((0..12).map(|_| (rng.random_range(0..16), rng.random_range(0..16))));
            let wrong: Vec<usize> = (0..OPS.len()).filter(|&j| !agrees(&OPS[j], &OPS[r], &rows)).collect();
            let rate = CORRECT_RATES[i % CORRECT_RATES.len()];
            for j in 0..n_candidates {
                let correct = rng.random_bool(rate);
                let op = if correct {
                    r
                } else {
                    wrong[rng.random_range(0..wrong.len())]
                };
                let mut source = render(OPS[op].expr, rng.random_range(0..3));
                if !correct && rng.random_bool(syntax_error_rate) {
                    source = source.replacen(';', "", 1);
                }
                let cid = format!("{pid}-c{j:02}");
                let logprobs: Vec<f64> = (0..12).map(|_| -rng.random_range(0.01..1.5)).collect();
                suite.candidates.push(Candidate {
                    token_logprobs: Some(logprobs),
                    generator: GENERATOR.into(),
                    ..Candidate::new(&pid, &cid, source)
                });
                suite.labels.push(LabelRecord {
                    problem_id: pid.clone(),
                    candidate_id: cid,
                    label: Label::from_pass(correct),
                });
            }
            suite.problems.push(Problem {
                id: pid.clone(),
                spec: format!(
                    "Module `top` has 4-bit inputs a and b and a 5-bit output y. Drive y with {}.",
                    OPS[r].name
                ),
                testbench: Some(stimulus_json(&OPS[r], &rows)),
                tags: vec!["combinational".into()],
                benchmark: "synthetic".into(),
            });
            suite.reference.insert(pid, (r, rows));
        }
        suite
    }

    pub fn write(&self, dir: &Path) -> SuitePaths {
        fs::create_dir_all(dir).unwrap();
        let paths = SuitePaths {
            problems: dir.join("problems.jsonl"),
            candidates: dir.join("candidates.jsonl"),
            labels: dir.join("labels.jsonl"),
        };
        fs::write(&paths.problems, to_jsonl(&self.problems)).unwrap();
        fs::write(&paths.candidates, to_jsonl(&self.candidates)).unwrap();
        fs::write(&paths.labels, to_jsonl(&self.labels)).unwrap();
        paths
    }

    pub fn label_set(&self) -> LabelSet {
        self.labels.iter().cloned().collect()
    }

    /// Passing candidates among the first `k` of each problem.
    pub fn correct_in_slice(&self, k: usize) -> BTreeMap<String, usize> {
        let mut out = BTreeMap::new();
        for p in &self.problems {
            let c = self
                .labels
                .iter()
                .filter(|l| l.problem_id == p.id)
                .take(k)
                .filter(|l| l.label.is_pass())
                .count();
            out.insert(p.id.clone(), c);
        }
        out
    }
}

/// Judge that always returns the true label.
pub struct OracleJudge(pub LabelSet);

impl Judge for OracleJudge {
    fn verdict(&self, problem: &Problem, candidate: &Candidate, _pass: usize) -> Result<Verdict, JudgeError> {
        let label = self
            .0
            .get(&problem.id, &candidate.candidate_id)
            .expect("labeled candidate");
        let raw = format!("VERDICT: {}", label.to_string().to_uppercase());
        Ok(Verdict {
            prediction: label,
            reasoning: "oracle".into(),
            raw,
            parse_quality: ParseQuality::Clean,
        })
    }
}

/// Stimulus tests drawn from the reference behaviour; roughly one in four
/// carries expectations from a wrong operation, like a mistaken generated
/// test.
pub struct NoisyTestGenerator {
    pub reference: BTreeMap<String, (usize, Vec<(u64, u64)>)>,
}

impl TestGenerator for NoisyTestGenerator {
    fn generate_tests(&self, problem: &Problem, candidate: &Candidate, n: usize) -> Result<Vec<String>, ChatError> {
        let (r, rows) = &self.reference[&problem.id];
        let seed = candidate
            .candidate_id
            .bytes()
            .fold(0u64, |h, b| h.wrapping_mul(31).wrapping_add(b as u64));
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Ok((0..n)
            .map(|_| {
                let op = if rng.random_bool(0.25) {
                    rng.random_range(0..OPS.len())
                } else {
                    *r
                };
                let pick: Vec<(u64, u64)> = (0..4).map(|_| rows[rng.random_range(0..rows.len())]).collect();
                stimulus_json(&OPS[op], &pick)
            })
            .collect())
    }
}
