use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};

use super::Batch;

/// Sample statistics of one metric across episodes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub mean: f64,
    /// Sample standard deviation; zero for a single episode.
    pub sd: f64,
    pub q25: f64,
    pub q50: f64,
    pub q75: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Self {
        assert!(!values.is_empty(), "summary of an empty sample");
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let sd = if values.len() < 2 {
            0.0
        } else {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        };
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        Self {
            mean,
            sd,
            q25: quantile(&sorted, 0.25),
            q50: quantile(&sorted, 0.5),
            q75: quantile(&sorted, 0.75),
        }
    }
}

/// Linear interpolation between order statistics at `(n - 1) q`.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicySummary {
    pub policy: String,
    pub regret: Summary,
    pub suboptimal: Summary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub policy: String,
    pub metric: String,
    pub summary: Summary,
    pub n_sims: usize,
    pub seed: u64,
}

/// Summary table plus the configuration lines written above it.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ResultsTable {
    pub header: Vec<String>,
    pub rows: Vec<ResultRow>,
}

const COLUMNS: [&str; 9] = [
    "policy", "metric", "mean", "sd", "q25", "q50", "q75", "n_sims", "seed",
];

pub const METRIC_REGRET: &str = "R";
pub const METRIC_SUBOPTIMAL: &str = "N_subopt";

impl ResultsTable {
    pub fn from_summaries(summaries: &[PolicySummary], n_sims: usize, seed: u64) -> Self {
        let rows = summaries
            .iter()
            .flat_map(|s| {
                [(METRIC_REGRET, s.regret), (METRIC_SUBOPTIMAL, s.suboptimal)].map(
                    |(metric, summary)| ResultRow {
                        policy: s.policy.clone(),
                        metric: metric.to_string(),
                        summary,
                        n_sims,
                        seed,
                    },
                )
            })
            .collect();
        Self {
            header: Vec::new(),
            rows,
        }
    }

    pub fn row(&self, policy: &str, metric: &str) -> Option<&ResultRow> {
        self.rows
            .iter()
            .find(|r| r.policy == policy && r.metric == metric)
    }
}

impl Batch {
    /// Configuration lines for the results header.
    pub fn header(&self) -> Vec<String> {
        let c = &self.config;
        vec![format!(
            "seed={} n_sims={} M={} L={} warmup={} gamma_shape={} gamma_second={} \
             gamma_param={} prior_mean={} prior_count={} warmup_charged=false",
            c.seed,
            self.n_sims(),
            c.arms,
            c.horizon,
            c.warmup,
            c.gamma_shape,
            c.gamma_second,
            c.gamma_param.as_str(),
            c.prior_mean,
            c.prior_count
        )]
    }
}

fn real(x: f64) -> String {
    format!("{x:.16e}")
}

fn csv_error(path: &Path, err: csv::Error) -> Error {
    match err.into_kind() {
        csv::ErrorKind::Io(source) => Error::io(path, source),
        other => Error::Parse(format!("{}: {other:?}", path.display())),
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

/// Writes `# ` header lines, the column row, then one row per policy and metric.
pub fn write_results(table: &ResultsTable, path: &Path) -> Result<()> {
    let mut out = create(path)?;
    for line in &table.header {
        writeln!(out, "# {line}").map_err(|e| Error::io(path, e))?;
    }
    let mut writer = csv::Writer::from_writer(out);
    writer
        .write_record(COLUMNS)
        .map_err(|e| csv_error(path, e))?;
    for row in &table.rows {
        let s = &row.summary;
        writer
            .write_record([
                row.policy.clone(),
                row.metric.clone(),
                real(s.mean),
                real(s.sd),
                real(s.q25),
                real(s.q50),
                real(s.q75),
                row.n_sims.to_string(),
                row.seed.to_string(),
            ])
            .map_err(|e| csv_error(path, e))?;
    }
    writer.flush().map_err(|e| Error::io(path, e))
}

pub fn read_results(path: &Path) -> Result<ResultsTable> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let header = text
        .lines()
        .take_while(|l| l.starts_with('#'))
        .map(|l| l.trim_start_matches('#').trim_start().to_string())
        .collect();
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        if record.len() != COLUMNS.len() {
            return Err(Error::Parse(format!(
                "{}: expected {} columns, found {}",
                path.display(),
                COLUMNS.len(),
                record.len()
            )));
        }
        let num = |i: usize| -> Result<f64> {
            record[i]
                .parse()
                .map_err(|_| Error::Parse(format!("bad {} `{}`", COLUMNS[i], &record[i])))
        };
        rows.push(ResultRow {
            policy: record[0].to_string(),
            metric: record[1].to_string(),
            summary: Summary {
                mean: num(2)?,
                sd: num(3)?,
                q25: num(4)?,
                q50: num(5)?,
                q75: num(6)?,
            },
            n_sims: record[7]
                .parse()
                .map_err(|_| Error::Parse(format!("bad n_sims `{}`", &record[7])))?,
            seed: record[8]
                .parse()
                .map_err(|_| Error::Parse(format!("bad seed `{}`", &record[8])))?,
        });
    }
    Ok(ResultsTable { header, rows })
}

/// Per-step running totals `episode,step,policy,arm,R,N_subopt` for every
/// episode that kept its steps. Steps and arms are 1-based and 0-based
/// respectively.
pub fn write_trace(batch: &Batch, path: &Path) -> Result<()> {
    let mut out = create(path)?;
    for line in batch.header() {
        writeln!(out, "# {line}").map_err(|e| Error::io(path, e))?;
    }
    let mut writer = csv::Writer::from_writer(out);
    writer
        .write_record(["episode", "step", "policy", "arm", "R", "N_subopt"])
        .map_err(|e| csv_error(path, e))?;
    for (episode, row) in batch.episodes.iter().enumerate() {
        for (label, trace) in batch.labels.iter().zip(row) {
            for (step, s) in trace.steps.iter().flatten().enumerate() {
                writer
                    .write_record([
                        episode.to_string(),
                        (step + 1).to_string(),
                        label.clone(),
                        s.arm.to_string(),
                        real(s.regret),
                        s.suboptimal.to_string(),
                    ])
                    .map_err(|e| csv_error(path, e))?;
            }
        }
    }
    writer.flush().map_err(|e| Error::io(path, e))
}
