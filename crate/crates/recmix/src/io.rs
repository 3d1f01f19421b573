//! Observation ingestion and the on-disk trace formats.
//!
//! Observations arrive as JSONL (one `{t, y, truth?}` object per line) or,
//! by file extension, as bare CSV `t,y[,truth]` rows. Outputs are CSV or
//! JSON; every file starts with a `#` comment header echoing the producing
//! configuration and seed, and lines beginning with `#` are skipped on read.
//! Formats are documented in FORMATS.md at the repository root.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use crate::chain::LagComposition;
use crate::error::{Error, Result};
use crate::filter::StepSummary;
use crate::models::ObservationRecord;
use crate::oracle::DistanceRow;

/// Comment header written at the top of every output file.
#[derive(Debug, Clone)]
pub struct OutputHeader {
    command: String,
    fields: Vec<(String, String)>,
}

impl OutputHeader {
    pub fn new(command: &str) -> Self {
        OutputHeader {
            command: command.to_string(),
            fields: Vec::new(),
        }
    }

    pub fn field(mut self, key: &str, value: impl ToString) -> Self {
        self.fields.push((key.to_string(), value.to_string()));
        self
    }

    pub fn render(&self) -> String {
        let mut line = format!("# recmix {} format=v1", self.command);
        for (k, v) in &self.fields {
            let _ = write!(line, " {k}={v}");
        }
        line.push('\n');
        line
    }
}

/// Read an observation stream from disk.
///
/// `.csv` selects the CSV reader; anything else is treated as JSONL. Blank
/// lines and `#` comments are skipped. Timestamps must be strictly
/// increasing; violations and parse failures report the 1-based line number.
pub fn ingest(path: &Path) -> Result<Vec<ObservationRecord>> {
    let file = File::open(path)?;
    let reader = BufReader::new(file);
    let is_csv = path
        .extension()
        .map(|e| e.eq_ignore_ascii_case("csv"))
        .unwrap_or(false);
    let mut records = Vec::new();
    let mut last_t: Option<u64> = None;
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        if is_csv && line_no == 1 && looks_like_csv_header(trimmed) {
            continue;
        }
        let record = if is_csv {
            parse_csv_record(trimmed, line_no)?
        } else {
            serde_json::from_str::<ObservationRecord>(trimmed)
                .map_err(|e| Error::input(line_no, format!("bad JSONL record: {e}")))?
        };
        if let Some(prev) = last_t {
            if record.t <= prev {
                return Err(Error::input(
                    line_no,
                    format!("timestamps must be strictly increasing: {} after {prev}", record.t),
                ));
            }
        }
        last_t = Some(record.t);
        records.push(record);
    }
    Ok(records)
}

fn looks_like_csv_header(line: &str) -> bool {
    let lower = line.to_ascii_lowercase();
    lower == "t,y" || lower == "t,y,truth"
}

fn parse_csv_record(line: &str, line_no: usize) -> Result<ObservationRecord> {
    let fields: Vec<&str> = line.split(',').map(str::trim).collect();
    if fields.len() != 2 && fields.len() != 3 {
        return Err(Error::input(
            line_no,
            format!("expected t,y[,truth], found {} fields", fields.len()),
        ));
    }
    let t: u64 = fields[0]
        .parse()
        .map_err(|e| Error::input(line_no, format!("bad t value {:?}: {e}", fields[0])))?;
    let y: f64 = fields[1]
        .parse()
        .map_err(|e| Error::input(line_no, format!("bad y value {:?}: {e}", fields[1])))?;
    let truth = match fields.get(2) {
        Some(raw) if !raw.is_empty() => {
            let v: f64 = raw
                .parse()
                .map_err(|e| Error::input(line_no, format!("bad truth value {raw:?}: {e}")))?;
            Some(vec![v])
        }
        _ => None,
    };
    Ok(ObservationRecord {
        t,
        y: vec![y],
        truth,
    })
}

/// Write records as JSONL, header comment first.
pub fn write_records_jsonl<W: Write>(
    mut w: W,
    header: &OutputHeader,
    records: &[ObservationRecord],
) -> Result<()> {
    w.write_all(header.render().as_bytes())?;
    for record in records {
        let line = serde_json::to_string(record)
            .map_err(|e| Error::invalid_parameter(format!("unserializable record: {e}")))?;
        writeln!(w, "{line}")?;
    }
    Ok(())
}

/// Mixing-weight rows `(beta, lag, theta)`.
pub fn write_weights_csv<W: Write>(
    mut w: W,
    header: &OutputHeader,
    rows: &[(f64, usize, f64)],
) -> Result<()> {
    w.write_all(header.render().as_bytes())?;
    writeln!(w, "beta,lag,theta")?;
    for (beta, lag, theta) in rows {
        writeln!(w, "{beta},{lag},{theta}")?;
    }
    Ok(())
}

/// One chain-composition output row.
#[derive(Debug, Clone, Copy)]
pub struct ChainRow {
    pub t: usize,
    pub lag: usize,
    /// Mean count across replicas (exact count for a single run).
    pub count: f64,
    pub expected: f64,
}

/// Expected lag count under the geometric law at finite time: the freshest
/// `t` components follow `L*beta*(1-beta)^(m-1)` and the untouched initial
/// draws sit at lag `t + 1` with mass `L*(1-beta)^t`.
pub fn expected_lag_count(l: usize, beta: f64, t: usize, lag: usize) -> f64 {
    if lag == 0 {
        return 0.0;
    }
    if lag <= t {
        l as f64 * beta * (1.0 - beta).powi(lag as i32 - 1)
    } else if lag == t + 1 {
        l as f64 * (1.0 - beta).powi(t as i32)
    } else {
        0.0
    }
}

/// Build chain rows from averaged compositions. `compositions[r][s]` is the
/// composition of replica `r` after step `s + 1`.
pub fn chain_rows(compositions: &[Vec<LagComposition>], l: usize, beta: f64) -> Vec<ChainRow> {
    let runs = compositions.len();
    if runs == 0 {
        return Vec::new();
    }
    let steps = compositions[0].len();
    let mut rows = Vec::new();
    for s in 0..steps {
        let t = s + 1;
        let mut lags: Vec<usize> = compositions
            .iter()
            .flat_map(|c| c[s].counts().keys().copied())
            .collect();
        lags.sort_unstable();
        lags.dedup();
        for lag in lags {
            let total: usize = compositions.iter().map(|c| c[s].count(lag)).sum();
            rows.push(ChainRow {
                t,
                lag,
                count: total as f64 / runs as f64,
                expected: expected_lag_count(l, beta, t, lag),
            });
        }
    }
    rows
}

pub fn write_chain_csv<W: Write>(mut w: W, header: &OutputHeader, rows: &[ChainRow]) -> Result<()> {
    w.write_all(header.render().as_bytes())?;
    writeln!(w, "t,lag,count,expected_count")?;
    for r in rows {
        writeln!(w, "{},{},{},{}", r.t, r.lag, r.count, r.expected)?;
    }
    Ok(())
}

/// Filter trace rows; scalar runs only. The `abs_error` column is present
/// whenever any step carried ground truth, empty on steps that did not.
pub fn write_trace_csv<W: Write>(
    mut w: W,
    header: &OutputHeader,
    trace: &[StepSummary],
) -> Result<()> {
    w.write_all(header.render().as_bytes())?;
    let any_truth = trace.iter().any(|s| s.abs_error.is_some());
    if any_truth {
        writeln!(w, "t,mean,std,ess,log_marginal_increment,abs_error")?;
    } else {
        writeln!(w, "t,mean,std,ess,log_marginal_increment")?;
    }
    for s in trace {
        if s.summary.mean.len() != 1 {
            return Err(Error::Unsupported(
                "trace CSV is defined for scalar filters".into(),
            ));
        }
        write!(
            w,
            "{},{},{},{},{}",
            s.t,
            s.summary.mean[0],
            s.summary.std[0],
            s.summary.ess,
            s.summary.log_marginal_increment
        )?;
        if any_truth {
            match &s.abs_error {
                Some(e) => writeln!(w, ",{}", e[0])?,
                None => writeln!(w, ",")?,
            }
        } else {
            writeln!(w)?;
        }
    }
    Ok(())
}

/// Oracle-comparison rows `(t, distance, baseline)`.
pub fn write_distance_csv<W: Write>(
    mut w: W,
    header: &OutputHeader,
    rows: &[DistanceRow],
) -> Result<()> {
    w.write_all(header.render().as_bytes())?;
    writeln!(w, "t,distance,baseline")?;
    for r in rows {
        writeln!(w, "{},{},{}", r.t, r.distance, r.baseline)?;
    }
    Ok(())
}
