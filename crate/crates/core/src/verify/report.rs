//! Report files: JSON report, bounds heatmap and progress traces as CSV.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::VerificationReport;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReportFiles {
    pub report: PathBuf,
    pub heatmap: PathBuf,
    pub progress: PathBuf,
}

/// `classes × classes` grid of `lower..upper` cells, row = source class,
/// column = target class. Diagonal cells hold `-`; pairs not covered by any
/// report are empty.
pub fn heatmap_csv(reports: &[VerificationReport], classes: usize) -> String {
    let mut cells = vec![vec![String::new(); classes]; classes];
    for (c, row) in cells.iter_mut().enumerate() {
        row[c] = "-".into();
    }
    for rep in reports {
        for &t in &rep.targets {
            if let (Some(b), Some(row)) = (rep.target_bound(t), cells.get_mut(rep.c_prime)) {
                if t < classes {
                    row[t] = format!("{}..{}", b.lower, b.upper);
                }
            }
        }
    }
    let mut out = String::from("source");
    for t in 0..classes {
        let _ = write!(out, ",{t}");
    }
    out.push('\n');
    for (c, row) in cells.iter().enumerate() {
        let _ = writeln!(out, "{c},{}", row.join(","));
    }
    out
}

pub fn progress_csv(report: &VerificationReport) -> String {
    let mut out = String::from("target,perturbation,ms,lower,upper\n");
    for run in &report.runs {
        for r in &run.progress {
            let _ = writeln!(out, "{},\"{}\",{},{},{}", run.target, run.perturbation, r.ms, r.lower, r.upper);
        }
    }
    out
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Writes `report.json`, `heatmap.csv` and `progress.csv` into `dir`.
pub fn emit_report(report: &VerificationReport, dir: &Path) -> Result<ReportFiles> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let files = ReportFiles {
        report: dir.join("report.json"),
        heatmap: dir.join("heatmap.csv"),
        progress: dir.join("progress.csv"),
    };
    let json = serde_json::to_string_pretty(report).map_err(|e| Error::Internal(e.to_string()))?;
    write(&files.report, &json)?;
    write(
        &files.heatmap,
        &heatmap_csv(std::slice::from_ref(report), report.num_classes),
    )?;
    write(&files.progress, &progress_csv(report))?;
    Ok(files)
}

pub fn read_report(path: &Path) -> Result<VerificationReport> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}
