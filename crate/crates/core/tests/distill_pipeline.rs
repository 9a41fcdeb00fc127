use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use verirank_core::distill::{build_candidate_pool, distill_labels, SeedExample, Teacher};
use verirank_core::exec::{ExecStatus, Executor, MiniBackend, ScriptedExecutor};
use verirank_core::judge::{ChatError, Generator, Judge, JudgeError, ParseQuality, Verdict};
use verirank_core::model::{Candidate, Label, LabeledCandidate, Problem};

const REFERENCE: &str = "module add(input [1:0] a, input [1:0] b, output [2:0] s);\n  assign s = a + b;\nendmodule\n";

fn seed() -> SeedExample {
    let mut inputs = Vec::new();
    let mut expected = Vec::new();
    for a in 0..4 {
        for b in 0..4 {
            inputs.push(format!(r#"{{"a":{a},"b":{b}}}"#));
            expected.push(format!(r#"{{"s":{}}}"#, a + b));
        }
    }
    SeedExample {
        id: Some("add2".into()),
        spec: "Two-bit adder with a three-bit sum.".into(),
        reference: REFERENCE.into(),
        testbench: format!(
            r#"{{"inputs":[{}],"expected":[{}]}}"#,
            inputs.join(","),
            expected.join(",")
        ),
    }
}

/// Emits `good` copies of the reference followed by broken variants.
struct FixedGenerator {
    good: usize,
}

impl Generator for FixedGenerator {
    fn generate(&self, _: &str, n: usize) -> Result<Vec<String>, ChatError> {
        let broken = [
            REFERENCE.replace("a + b", "a - b"),
            REFERENCE.replace("a + b", "a | b"),
            REFERENCE.replace("[2:0] s", "[1:0] s"),
            REFERENCE.replace("assign", "asign"),
        ];
        Ok((0..n)
            .map(|i| {
                if i < self.good {
                    REFERENCE.to_string()
                } else {
                    broken[(i - self.good) % broken.len()].clone()
                }
            })
            .collect())
    }
}

#[test]
fn pool_labels_come_from_execution() {
    let pool = build_candidate_pool(&seed(), &FixedGenerator { good: 6 }, &MiniBackend, 10).unwrap();
    assert_eq!(pool.len(), 10);
    let passes = pool.iter().filter(|r| r.label == Label::Pass).count();
    assert_eq!((passes, pool.len() - passes), (6, 4));
    assert!(pool[..6].iter().all(|r| r.label == Label::Pass));
}

#[test]
fn reference_passes_its_own_testbench() {
    let pool = build_candidate_pool(&seed(), &FixedGenerator { good: 1 }, &MiniBackend, 1).unwrap();
    assert_eq!(pool[0].label, Label::Pass);
}

#[test]
fn infrastructure_errors_are_excluded() {
    let calls = AtomicUsize::new(0);
    let flaky = ScriptedExecutor::from_fn(move |src, tb| {
        if calls.fetch_add(1, Ordering::SeqCst) == 3 {
            ExecStatus::InfraError
        } else {
            MiniBackend.execute(src, tb).status
        }
    });
    let pool = build_candidate_pool(&seed(), &FixedGenerator { good: 6 }, &flaky, 10).unwrap();
    assert_eq!(pool.len(), 9);
    assert!(pool.iter().all(|r| r.candidate.candidate_id != "add2-s3"));
}

/// Teacher answering from a per-row script: `Some(pass?)` or a call failure.
struct ScriptTeacher {
    answers: Vec<Option<bool>>,
    calls: Mutex<Vec<String>>,
}

impl Judge for ScriptTeacher {
    fn verdict(&self, _: &Problem, c: &Candidate, _: usize) -> Result<Verdict, JudgeError> {
        self.calls.lock().unwrap().push(c.candidate_id.clone());
        let row: usize = c.candidate_id.parse().unwrap();
        match self.answers[row] {
            Some(p) => Ok(Verdict {
                prediction: Label::from_pass(p),
                reasoning: format!("reasoning for {row}"),
                raw: String::new(),
                parse_quality: ParseQuality::Clean,
            }),
            None => Err(ChatError::Transient("down".into()).into()),
        }
    }
}

fn rows(labels: &[bool]) -> Vec<LabeledCandidate> {
    labels
        .iter()
        .enumerate()
        .map(|(i, &p)| LabeledCandidate {
            candidate: Candidate::new("s", i.to_string(), format!("// {i}")),
            label: Label::from_pass(p),
        })
        .collect()
}

#[test]
fn teacher_priority_examples() {
    let pool = rows(&[true, true, false]);
    let t1 = ScriptTeacher {
        answers: vec![Some(true), Some(false), None],
        calls: Mutex::new(vec![]),
    };
    let t2 = ScriptTeacher {
        answers: vec![Some(false), Some(true), Some(true)],
        calls: Mutex::new(vec![]),
    };
    let out = distill_labels(&pool, "spec", &t1, &t2);
    assert_eq!(out.len(), 2);
    assert_eq!(
        (out[0].teacher, out[0].reasoning.as_str()),
        (Teacher::T1, "reasoning for 0")
    );
    assert_eq!((out[1].teacher, out[1].label), (Teacher::T2, Label::Pass));
    // Row 0 never reached T2; the failed T1 call on row 2 fell through.
    assert_eq!(*t2.calls.lock().unwrap(), ["1", "2"]);
}
