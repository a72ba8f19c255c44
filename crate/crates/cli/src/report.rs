//! CSV rows and plain-text reports.
//!
//! Every CSV row starts with the schema tag and the full resolved parameter
//! set, so any row can be reproduced on its own.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{self, Write};
use std::path::Path;

use anyhow::Context;

use vnfchain::simulator::{Estimate, Replication};
use vnfchain::{QueueId, SystemMetrics, SystemParams};

/// Bumped whenever a column is added, removed or renamed.
pub const SCHEMA: &str = "vnfchain-csv/1";

pub struct Row {
    cells: Vec<(String, String)>,
}

impl Row {
    pub fn with_params(params: &SystemParams) -> Row {
        let mut row = Row { cells: vec![("schema".into(), SCHEMA.into())] };
        for (k, v) in params.key_values() {
            row.push(k, v);
        }
        row
    }

    pub fn push(&mut self, name: &str, value: String) {
        self.cells.push((name.to_string(), value));
    }
}

pub struct CsvOut {
    writer: csv::Writer<Box<dyn Write>>,
    header: Option<Vec<String>>,
}

impl CsvOut {
    /// Write to `path`, or to stdout when `None`.
    pub fn new(path: Option<&Path>) -> anyhow::Result<CsvOut> {
        match path {
            Some(p) => CsvOut::file(p),
            None => Ok(CsvOut::from_writer(Box::new(io::stdout().lock()))),
        }
    }

    pub fn file(path: &Path) -> anyhow::Result<CsvOut> {
        let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
        Ok(CsvOut::from_writer(Box::new(io::BufWriter::new(f))))
    }

    fn from_writer(w: Box<dyn Write>) -> CsvOut {
        CsvOut { writer: csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w), header: None }
    }

    pub fn write(&mut self, row: &Row) -> anyhow::Result<()> {
        let names: Vec<String> = row.cells.iter().map(|(k, _)| k.clone()).collect();
        match &self.header {
            None => {
                self.writer.write_record(&names)?;
                self.header = Some(names);
            }
            Some(h) => assert_eq!(h, &names, "CSV rows must share one header"),
        }
        self.writer.write_record(row.cells.iter().map(|(_, v)| v))?;
        Ok(())
    }

    pub fn finish(mut self) -> anyhow::Result<()> {
        self.writer.flush()?;
        Ok(())
    }
}

/// Metric columns in schema order.
pub fn metric_columns(m: &SystemMetrics) -> Vec<(String, Option<f64>)> {
    let mut cols = Vec::new();
    for q in &QueueId::ALL[..5] {
        cols.push((format!("drop_q{}", q.number()), Some(m.drop_rate(*q))));
    }
    cols.push(("drop_total".into(), Some(m.drop_total)));
    for q in QueueId::ALL {
        cols.push((format!("mean_q{}", q.number()), m.mean_len(q)));
    }
    cols.push(("mean_total".into(), m.mean_total));
    cols.push(("throughput".into(), Some(m.throughput)));
    cols.push(("delay".into(), m.delay));
    cols
}

pub fn push_metrics(row: &mut Row, m: &SystemMetrics, suffix: &str) {
    for (name, value) in metric_columns(m) {
        row.push(&format!("{name}{suffix}"), value.map(|v| v.to_string()).unwrap_or_default());
    }
}

/// Same columns as [`metric_columns`], as replication estimates.
pub fn replication_columns(rep: &Replication) -> Vec<(String, Option<Estimate>)> {
    let mut cols = Vec::new();
    for (k, e) in rep.drop_per_queue.iter().enumerate() {
        cols.push((format!("drop_q{}", k + 1), Some(*e)));
    }
    cols.push(("drop_total".into(), Some(rep.drop_total)));
    for (k, e) in rep.mean_len.iter().enumerate() {
        cols.push((format!("mean_q{}", k + 1), Some(*e)));
    }
    cols.push(("mean_total".into(), Some(rep.mean_total)));
    cols.push(("throughput".into(), Some(rep.throughput)));
    cols.push(("delay".into(), rep.delay));
    cols
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6}")).unwrap_or_else(|| "n/a (unstable)".into())
}

/// Human-readable metrics with a per-queue breakdown.
pub fn metrics_block(params: &SystemParams, m: &SystemMetrics) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "params: {params}");
    let _ = writeln!(s, "{:<6} {:>12} {:>14}", "queue", "drop rate", "mean length");
    for q in QueueId::ALL {
        let drop = if q.is_finite() { format!("{:.6}", m.drop_rate(q)) } else { "-".into() };
        let _ = writeln!(s, "{:<6} {:>12} {:>14}", q.to_string(), drop, fmt_opt(m.mean_len(q)));
    }
    let _ = writeln!(s, "system drop rate  {:.6}", m.drop_total);
    let _ = writeln!(s, "mean tasks        {}", fmt_opt(m.mean_total));
    let _ = writeln!(s, "throughput        {:.6}", m.throughput);
    let _ = writeln!(s, "delay (slots)     {}", fmt_opt(m.delay));
    s
}
