//! Experiment runner behind the `holder-hj` binary.

pub mod config;
pub mod experiments;
pub mod summary;

use std::fs;
use std::path::{Path, PathBuf};

use config::{Experiment, ExperimentConfig};
use experiments::{criterion_rows, differing_csvs, run_one, RunResult, Tagged};
use summary::{emit_report, summary_csv, SummaryRow};

/// Result of one `run`: the rows written to `summary.csv` and the directory
/// holding them.
#[derive(Debug)]
pub struct RunOutcome {
    pub dir: PathBuf,
    pub rows: Vec<SummaryRow>,
}

impl RunOutcome {
    pub fn all_passed(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }
}

const RERUN_DIR: &str = "rerun-check";

/// Runs the configured experiment into `cfg.out`, then writes `summary.csv`
/// and `report.txt`.
///
/// The full suite also reruns itself into a scratch directory on a thread
/// pool of a different size and compares every CSV byte for byte; that
/// comparison is criterion `A10`.
pub fn run(cfg: &ExperimentConfig) -> RunResult<RunOutcome> {
    let dir = cfg.out.clone();
    fs::create_dir_all(&dir)?;
    let tagged = run_one(cfg.experiment, cfg, &dir)?;
    let mut rows = Vec::new();
    if cfg.experiment == Experiment::FullSuite {
        rows.extend(criterion_rows(&tagged));
        if cfg.determinism_rerun {
            rows.push(determinism_row(cfg, &dir)?);
        }
    }
    rows.extend(tagged.into_iter().map(|t| t.row));
    fs::write(dir.join("summary.csv"), summary_csv(&rows))?;
    emit_report(&dir).map_err(|e| std::io::Error::other(e.0))?;
    Ok(RunOutcome { dir, rows })
}

fn determinism_row(cfg: &ExperimentConfig, dir: &Path) -> RunResult<SummaryRow> {
    let scratch = dir.join(RERUN_DIR);
    if scratch.exists() {
        fs::remove_dir_all(&scratch)?;
    }
    fs::create_dir_all(&scratch)?;
    let threads = if rayon::current_num_threads() == 1 { 2 } else { 1 };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| std::io::Error::other(e.to_string()))?;
    let rerun: RunResult<Vec<Tagged>> = pool.install(|| run_one(Experiment::FullSuite, cfg, &scratch));
    rerun?;
    // the scratch tree sits inside `dir`; compare the first run without it
    let mut diff = differing_csvs(&scratch, dir)?;
    diff.retain(|p| !p.starts_with(RERUN_DIR));
    let compared = experiments::csv_files(&scratch)?.len();
    fs::remove_dir_all(&scratch)?;
    let measured = if diff.is_empty() {
        format!("{compared} files identical")
    } else {
        format!(
            "differs: {}",
            diff.iter().map(|p| p.display().to_string()).collect::<Vec<_>>().join(" ")
        )
    };
    Ok(SummaryRow::text("A10", "identical", &measured, "0", diff.is_empty()))
}
