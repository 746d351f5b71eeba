//! CSV and JSON output of a run.
//!
//! Files written to the output directory:
//! `slot_sum.csv` (`slot,sum_mbps`), `per_user.csv`
//! (`user_id,beam_id,xi_mb,served_mb,ratio`), `slot_users.csv`
//! (`slot,user_id,power_w,rate_mbps`) and `summary.json`.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{RunReport, Summary};
use crate::config::ScenarioConfig;
use crate::error::{Error, Result};
use crate::scheduler::{Method, PowerMode};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExportFormat {
    Csv,
    Json,
}

/// Contents of `summary.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryDocument {
    pub method: Method,
    pub power: PowerMode,
    pub seed: u64,
    pub slots: usize,
    pub wall_clock_s: f64,
    pub summary: Summary,
    pub config: ScenarioConfig,
}

impl SummaryDocument {
    pub fn from_report(r: &RunReport) -> Self {
        Self {
            method: r.method,
            power: r.power,
            seed: r.seed,
            slots: r.slot_sums.len(),
            wall_clock_s: r.wall_clock_s,
            summary: r.summary.clone(),
            config: r.config.clone(),
        }
    }
}

fn writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::Writer::from_writer(file))
}

fn flush(mut w: csv::Writer<fs::File>, path: &Path) -> Result<()> {
    w.flush().map_err(|e| Error::io(path, e))
}

fn write_csv(report: &RunReport, dir: &Path) -> Result<()> {
    let path = dir.join("slot_sum.csv");
    let mut w = writer(&path)?;
    w.write_record(["slot", "sum_mbps"])?;
    for (i, s) in report.slot_sums.iter().enumerate() {
        w.write_record([(i + 1).to_string(), s.to_string()])?;
    }
    flush(w, &path)?;

    let path = dir.join("per_user.csv");
    let mut w = writer(&path)?;
    w.write_record(["user_id", "beam_id", "xi_mb", "served_mb", "ratio"])?;
    for u in &report.users {
        w.write_record([
            u.user_id.to_string(),
            u.beam_id.to_string(),
            u.xi_mb.to_string(),
            u.served_mb.to_string(),
            u.ratio.map(|r| r.to_string()).unwrap_or_default(),
        ])?;
    }
    flush(w, &path)?;

    let path = dir.join("slot_users.csv");
    let mut w = writer(&path)?;
    w.write_record(["slot", "user_id", "power_w", "rate_mbps"])?;
    for slot in &report.slots {
        for ((u, p), r) in slot.allocation.users.iter().zip(&slot.allocation.powers).zip(&slot.rates) {
            w.write_record([slot.t.to_string(), u.to_string(), p.to_string(), r.to_string()])?;
        }
    }
    flush(w, &path)
}

fn write_json(report: &RunReport, dir: &Path) -> Result<()> {
    let path = dir.join("summary.json");
    let text = serde_json::to_string_pretty(&SummaryDocument::from_report(report))?;
    fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))
}

/// Writes the report into `dir`, creating it if needed.
pub fn export_report(report: &RunReport, dir: &Path, formats: &[ExportFormat]) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for f in formats {
        match f {
            ExportFormat::Csv => write_csv(report, dir)?,
            ExportFormat::Json => write_json(report, dir)?,
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::run_benchmark;

    fn report(slots: usize) -> RunReport {
        let mut c = ScenarioConfig::desk();
        c.window_slots = slots.max(1);
        c.qos_slots_range = [0, c.window_slots.min(13)];
        let mut r = run_benchmark(&c, Method::Alg1Relax, PowerMode::Fixed).unwrap();
        if slots == 0 {
            r.slot_sums.clear();
            r.slots.clear();
            r.users.clear();
        }
        r
    }

    #[test]
    fn empty_report_gives_headers_only() {
        let dir = tempfile::tempdir().unwrap();
        export_report(&report(0), dir.path(), &[ExportFormat::Csv]).unwrap();
        assert_eq!(fs::read_to_string(dir.path().join("slot_sum.csv")).unwrap(), "slot,sum_mbps\n");
        assert_eq!(
            fs::read_to_string(dir.path().join("per_user.csv")).unwrap(),
            "user_id,beam_id,xi_mb,served_mb,ratio\n"
        );
    }

    #[test]
    fn slot_series_has_one_row_per_slot() {
        let dir = tempfile::tempdir().unwrap();
        let r = report(12);
        export_report(&r, dir.path(), &[ExportFormat::Csv]).unwrap();
        let text = fs::read_to_string(dir.path().join("slot_sum.csv")).unwrap();
        assert_eq!(text.lines().count(), 12 + 1);
    }

    #[test]
    fn json_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let r = report(6);
        export_report(&r, dir.path(), &[ExportFormat::Json]).unwrap();
        let text = fs::read_to_string(dir.path().join("summary.json")).unwrap();
        let back: SummaryDocument = serde_json::from_str(&text).unwrap();
        assert_eq!(back, SummaryDocument::from_report(&r));
    }

    #[test]
    fn unwritable_path_names_the_file() {
        let dir = tempfile::tempdir().unwrap();
        let blocker = dir.path().join("file");
        fs::write(&blocker, "x").unwrap();
        let err = export_report(&report(1), &blocker.join("sub"), &[ExportFormat::Csv]).unwrap_err();
        assert!(err.to_string().contains("file"), "{err}");
    }
}
