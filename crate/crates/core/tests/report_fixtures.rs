use std::fs;
use std::path::Path;

use verirank_core::metrics::{aggregate_report, round_half_up, upper_bound_ratio, ReportRow, ReportTable};

fn table(name: &str) -> ReportTable {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name);
    let rows: Vec<ReportRow> = fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    aggregate_report(rows).unwrap()
}

fn averages(t: &ReportTable) -> Vec<String> {
    let mut out = vec![t.average.pass1.rounded()];
    out.extend(t.average.reranked.values().map(|v| v.as_ref().unwrap().rounded()));
    out.push(t.average.passk.rounded());
    out
}

#[test]
fn rtllm_block() {
    let t = table("rtllm_rows.jsonl");
    assert_eq!(t.rows.len(), 9);
    assert_eq!(
        t.columns,
        ["Prob.", "CodeReviewer", "CodeRank", "CodeT", "Ours", "T1", "T2"]
    );
    assert_eq!(
        averages(&t),
        ["45.63", "39.29", "39.88", "42.06", "47.62", "50.40", "49.21", "46.43", "58.33"]
    );
    let ratio = upper_bound_ratio(t.average.reranked["Ours"].as_ref().unwrap(), &t.average.passk).unwrap();
    assert_eq!(round_half_up(&ratio, 3), "0.864");
}

#[test]
fn resbench_block() {
    let t = table("resbench_rows.jsonl");
    assert_eq!(
        averages(&t),
        ["50.00", "44.05", "41.07", "46.63", "54.17", "62.90", "60.12", "55.75", "67.26"]
    );
    let ratio = upper_bound_ratio(t.average.reranked["Ours"].as_ref().unwrap(), &t.average.passk).unwrap();
    assert_eq!(round_half_up(&ratio, 3), "0.935");
}

#[test]
fn text_table_has_average_line() {
    let text = table("rtllm_rows.jsonl").to_text(5);
    let avg = text.lines().last().unwrap();
    assert!(avg.starts_with("Avg."));
    assert!(avg.contains("50.40") && avg.ends_with("58.33"));
    assert!(text.lines().nth(1).unwrap().contains("-"));
    assert!(text.contains("|     - |"));
}
