//! CSV, JSON and plain-text renderings of [`EvalReport`]s.

use std::fmt::Write as _;
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{EvalReport, Metric};

/// `x` rounded to `decimals` places, halves rounding up. A tiny nudge keeps
/// binary representations of exact halves (0.845 is stored as 0.84499...)
/// from rounding down.
pub fn round_half_up(x: f64, decimals: u32) -> f64 {
    let m = 10f64.powi(decimals as i32);
    (x * m + 0.5 + 1e-9).floor() / m
}

fn two(x: f64) -> String {
    format!("{:.2}", round_half_up(x, 2))
}

/// One flat output record. `p`, `r` and `f05` are exact in JSON and rounded
/// to two decimals in CSV; `p_value` is the F0.5 bootstrap p-value when one
/// was run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub system: String,
    pub dataset: String,
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub p: f64,
    pub r: f64,
    pub f05: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub p_value: Option<f64>,
}

impl From<&EvalReport> for ReportRow {
    fn from(r: &EvalReport) -> Self {
        ReportRow {
            system: r.system.clone(),
            dataset: r.dataset.clone(),
            tp: r.counts.tp,
            fp: r.counts.fp,
            fn_: r.counts.fn_,
            p: r.precision,
            r: r.recall,
            f05: r.f05,
            p_value: r.bootstrap.as_ref().map(|b| b.test(Metric::F05).p_value),
        }
    }
}

pub fn write_csv(w: impl Write, reports: &[EvalReport]) -> csv::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["system", "dataset", "tp", "fp", "fn", "p", "r", "f05", "p_value"])?;
    for r in reports {
        let row = ReportRow::from(r);
        out.write_record([
            row.system,
            row.dataset,
            row.tp.to_string(),
            row.fp.to_string(),
            row.fn_.to_string(),
            two(row.p),
            two(row.r),
            two(row.f05),
            row.p_value.map_or(String::new(), |p| format!("{p:.4}")),
        ])?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_json(mut w: impl Write, reports: &[EvalReport]) -> std::io::Result<()> {
    let rows: Vec<ReportRow> = reports.iter().map(ReportRow::from).collect();
    serde_json::to_writer_pretty(&mut w, &rows)?;
    writeln!(w)
}

fn ordered<'a>(items: impl Iterator<Item = &'a str>) -> Vec<&'a str> {
    let mut out: Vec<&str> = Vec::new();
    for it in items {
        if !out.contains(&it) {
            out.push(it);
        }
    }
    out
}

/// Systems as rows and datasets as column groups of `P R F0.5`, in order of
/// first appearance, two decimals each. Missing cells print `-`.
pub fn report_table(reports: &[EvalReport]) -> String {
    let systems = ordered(reports.iter().map(|r| r.system.as_str()));
    let datasets = ordered(reports.iter().map(|r| r.dataset.as_str()));
    let name_w = systems.iter().map(|s| s.len()).max().unwrap_or(0).max(6);
    let group_w = 14;
    let mut out = String::new();
    let _ = write!(out, "{:name_w$}", "");
    for d in &datasets {
        let _ = write!(out, " | {d:^group_w$}");
    }
    out.push('\n');
    let _ = write!(out, "{:name_w$}", "system");
    for _ in &datasets {
        let _ = write!(out, " | {:>4} {:>4} {:>4}", "P", "R", "F0.5");
    }
    out.push('\n');
    for s in &systems {
        let _ = write!(out, "{s:name_w$}");
        for d in &datasets {
            match reports.iter().find(|r| r.system == *s && r.dataset == *d) {
                Some(r) => {
                    let _ = write!(out, " | {} {} {:>4}", two(r.precision), two(r.recall), two(r.f05));
                }
                None => {
                    let _ = write!(out, " | {:>4} {:>4} {:>4}", "-", "-", "-");
                }
            }
        }
        out.push('\n');
    }
    out
}
