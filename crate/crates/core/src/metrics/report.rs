use indexmap::IndexMap;
use num_traits::Zero;
use serde::{Deserialize, Serialize};

use super::{MetricError, Percent};
use crate::Exact;

/// One model's line: plain pass@1, pass@1 after each reranking strategy, and
/// pass@k of the same pools.
///
/// A strategy cell is `None` when the strategy could not run for that model
/// (for example probability scoring without token log-probabilities).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub model: String,
    pub pass1: Percent,
    pub reranked: IndexMap<String, Option<Percent>>,
    pub passk: Percent,
}

/// Column means. Missing cells are skipped; a column with no values is `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AverageRow {
    pub pass1: Percent,
    pub reranked: IndexMap<String, Option<Percent>>,
    pub passk: Percent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportTable {
    pub columns: Vec<String>,
    pub rows: Vec<ReportRow>,
    pub average: AverageRow,
}

/// Checks that every row has the same strategy columns and appends averages.
pub fn aggregate_report(rows: Vec<ReportRow>) -> Result<ReportTable, MetricError> {
    let first = rows.first().ok_or(MetricError::Empty("aggregate_report"))?;
    let columns: Vec<String> = first.reranked.keys().cloned().collect();
    for row in &rows {
        let found: Vec<String> = row.reranked.keys().cloned().collect();
        if found != columns {
            return Err(MetricError::ColumnMismatch {
                row: row.model.clone(),
                expected: columns,
                found,
            });
        }
    }
    let mean = |f: &dyn Fn(&ReportRow) -> Option<&Percent>| Percent::mean(rows.iter().filter_map(f));
    let average = AverageRow {
        pass1: mean(&|r| Some(&r.pass1)).expect("nonempty"),
        reranked: columns
            .iter()
            .map(|c| (c.clone(), mean(&|r| r.reranked[c].as_ref())))
            .collect(),
        passk: mean(&|r| Some(&r.passk)).expect("nonempty"),
    };
    Ok(ReportTable { columns, rows, average })
}

/// Share of the pass@k ceiling that reranking recovers.
pub fn upper_bound_ratio(reranked_avg: &Percent, passk_avg: &Percent) -> Result<Exact, MetricError> {
    if passk_avg.fraction().is_zero() {
        return Err(MetricError::DivisionByZero);
    }
    Ok(reranked_avg.fraction() / passk_avg.fraction())
}

const AVERAGE_LABEL: &str = "Avg.";

fn cell(p: Option<&Percent>) -> String {
    p.map_or_else(|| "-".to_string(), Percent::rounded)
}

impl ReportTable {
    fn header(&self, k: usize) -> Vec<String> {
        let mut h = vec!["Model".to_string(), "Pass@1".to_string()];
        h.extend(self.columns.iter().cloned());
        h.push(format!("Pass@{k}"));
        h
    }

    fn body(&self) -> Vec<Vec<String>> {
        let mut out: Vec<Vec<String>> = self
            .rows
            .iter()
            .map(|r| {
                let mut line = vec![r.model.clone(), r.pass1.rounded()];
                line.extend(r.reranked.values().map(|v| cell(v.as_ref())));
                line.push(r.passk.rounded());
                line
            })
            .collect();
        let a = &self.average;
        let mut line = vec![AVERAGE_LABEL.to_string(), a.pass1.rounded()];
        line.extend(a.reranked.values().map(|v| cell(v.as_ref())));
        line.push(a.passk.rounded());
        out.push(line);
        out
    }

    pub fn to_csv(&self, k: usize) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(self.header(k)).expect("in-memory write");
        for line in self.body() {
            w.write_record(line).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 cells")
    }

    /// Aligned plain-text table with a rule above the average line.
    pub fn to_text(&self, k: usize) -> String {
        let header = self.header(k);
        let body = self.body();
        let widths: Vec<usize> = (0..header.len())
            .map(|i| {
                body.iter()
                    .map(|l| l[i].chars().count())
                    .chain([header[i].chars().count()])
                    .max()
                    .unwrap_or(0)
            })
            .collect();
        let render = |line: &[String]| {
            let cells: Vec<String> = line
                .iter()
                .zip(&widths)
                .enumerate()
                .map(|(i, (c, w))| if i == 0 { format!("{c:<w$}") } else { format!("{c:>w$}") })
                .collect();
            cells.join(" | ").trim_end().to_string() + "\n"
        };
        let rule = widths.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>().join("-+-") + "\n";
        let mut out = render(&header);
        out.push_str(&rule);
        let (avg, rows) = body.split_last().expect("average line");
        for line in rows {
            out.push_str(&render(line));
        }
        out.push_str(&rule);
        out.push_str(&render(avg));
        out
    }
}
