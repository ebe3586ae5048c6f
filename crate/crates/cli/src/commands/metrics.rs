use std::path::{Path, PathBuf};

use clap::Args;
use fasctl_core::sim::metrics::{self, MetricReport};

use super::{read_file, to_json, write_file};
use crate::error::{CliError, CliResult};

#[derive(Debug, Args)]
pub struct MetricsArgs {
    /// Trajectory CSV written by `sim`.
    pub csv: PathBuf,
    /// Write the JSON report here instead of stdout.
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

/// Indices of the columns named `{prefix}1`, `{prefix}2`, ... in order.
fn numbered(header: &[&str], prefix: &str) -> Vec<usize> {
    (1..)
        .map_while(|i| header.iter().position(|h| *h == format!("{prefix}{i}")))
        .collect()
}

/// Recomputes the run metrics from a trajectory CSV.
pub fn from_csv(path: &Path, text: &str) -> CliResult<MetricReport> {
    let mut lines = text.lines().enumerate();
    let header: Vec<&str> = match lines.next() {
        Some((_, h)) => h.split(',').map(str::trim).collect(),
        None => return Err(CliError::parse(path, "empty file")),
    };
    if header.first() != Some(&"t") {
        return Err(CliError::parse(path, "line 1: first column must be 't'"));
    }
    let (x, xhat, d, dhat) = (
        numbered(&header, "x"),
        numbered(&header, "xhat"),
        numbered(&header, "d"),
        numbered(&header, "dhat"),
    );
    if x.is_empty() || x.len() != xhat.len() || d.len() != dhat.len() {
        return Err(CliError::parse(path, "line 1: expected matching x/xhat and d/dhat columns"));
    }

    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .map(|v| v.trim().parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| CliError::parse(path, format!("line {}: {e}", i + 1)))?;
        if row.len() != header.len() {
            return Err(CliError::parse(
                path,
                format!("line {}: {} fields, header has {}", i + 1, row.len(), header.len()),
            ));
        }
        rows.push(row);
    }
    let column = |j: usize| rows.iter().map(|r| r[j]).collect::<Vec<f64>>();
    let diff = |a: usize, b: usize| rows.iter().map(|r| r[a] - r[b]).collect::<Vec<f64>>();

    let times = column(0);
    let errors: Vec<(String, Vec<f64>)> = x
        .iter()
        .zip(&xhat)
        .chain(d.iter().zip(&dhat))
        .enumerate()
        .map(|(k, (&a, &b))| (format!("e{}", k + 1), diff(a, b)))
        .collect();
    let states: Vec<(String, Vec<f64>)> = x.iter().enumerate().map(|(k, &j)| (format!("x{}", k + 1), column(j))).collect();
    metrics::report(&times, &errors, &states).map_err(|e| CliError::parse(path, e))
}

pub fn run(args: &MetricsArgs) -> CliResult<()> {
    let report = from_csv(&args.csv, &read_file(&args.csv)?)?;
    let json = to_json(&report)?;
    match &args.out {
        Some(path) => write_file(path, &json),
        None => {
            print!("{json}");
            Ok(())
        }
    }
}
