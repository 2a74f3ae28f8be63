//! Named grids of experiment cells.
//!
//! Each finished cell is written to its own file under `cells/`, tagged
//! with the cell's config digest. A rerun skips cells whose file carries a
//! matching digest, then `results.csv` and `plot.csv` are rebuilt in cell
//! order.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    append_line, append_timing, read_rows, rows_to_csv, run_experiment, ErrorRecord,
    ExperimentConfig, ResultRow,
};
use crate::error::{Error, Result};
use crate::kernelml::{ModelKind, SourceMode};
use crate::sim::NoiseLevel;

pub const SUITES: [&str; 3] = ["table1", "figure3", "figure4"];

const HEART_CAP: usize = 600;
const SMOKE_CAP: usize = 120;
const SMOKE_SHOTS: usize = 256;

#[derive(Debug, Clone)]
pub struct SuiteOptions {
    pub out: PathBuf,
    pub data_dir: PathBuf,
    pub workers: usize,
    pub seed: u64,
    /// Reduced sample caps and shots for a quick end-to-end pass.
    pub smoke: bool,
    pub transcripts: bool,
}

impl SuiteOptions {
    pub fn new(out: impl Into<PathBuf>) -> Self {
        SuiteOptions {
            out: out.into(),
            data_dir: PathBuf::from("data"),
            workers: 1,
            seed: 42,
            smoke: false,
            transcripts: false,
        }
    }
}

/// One grid cell: a config plus its position in the plot data.
#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub id: String,
    pub series: String,
    pub x: String,
    pub config: ExperimentConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteSummary {
    pub suite: String,
    pub cells: usize,
    pub ran: usize,
    pub skipped: usize,
    pub failed: usize,
    pub rows: usize,
    pub results: PathBuf,
    pub plot: PathBuf,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct PlotPoint {
    series: String,
    x: String,
    y: f64,
    err: f64,
}

fn base(name: &str, dataset: &str, mode: SourceMode, opts: &SuiteOptions) -> ExperimentConfig {
    let mut c = ExperimentConfig::new(name, dataset, mode);
    c.data_dir = opts.data_dir.clone();
    c.seed = opts.seed;
    c.transcripts = opts.transcripts;
    if opts.smoke {
        c.shots = SMOKE_SHOTS;
    }
    c
}

fn cap(dataset: &str, opts: &SuiteOptions) -> Option<usize> {
    match (dataset, opts.smoke) {
        (_, true) => Some(SMOKE_CAP),
        ("heart", false) => Some(HEART_CAP),
        _ => None,
    }
}

fn mode_label(mode: SourceMode) -> &'static str {
    match mode {
        SourceMode::ExactClassical => "centralised_classical",
        SourceMode::ExactQuantum => "centralised_quantum",
        SourceMode::Protocol => "distributed_quantum",
    }
}

fn table1(opts: &SuiteOptions) -> Vec<Cell> {
    let rows = [
        ("wine", ModelKind::Svm),
        ("parkinsons", ModelKind::Svm),
        ("parkinsons", ModelKind::KpcaSvm { components: 6 }),
        ("heart", ModelKind::Svm),
        ("heart", ModelKind::KpcaSvm { components: 6 }),
    ];
    let modes = [
        SourceMode::ExactClassical,
        SourceMode::ExactQuantum,
        SourceMode::Protocol,
    ];
    let mut cells = Vec::new();
    for (dataset, model) in rows {
        for mode in modes {
            let series = format!("{dataset}/{}", model.label());
            let id = format!("{dataset}-{}-{}", model.label(), mode.as_str());
            let mut c = base(&id, dataset, mode, opts);
            c.model = model;
            c.sample_cap = cap(dataset, opts);
            cells.push(Cell {
                id,
                series,
                x: mode_label(mode).to_string(),
                config: c,
            });
        }
    }
    cells
}

fn figure3(opts: &SuiteOptions) -> Vec<Cell> {
    let rows = [
        ("heart", ModelKind::Svm),
        ("parkinsons", ModelKind::Svm),
        ("parkinsons", ModelKind::KpcaSvm { components: 5 }),
        ("parkinsons", ModelKind::KpcaSvm { components: 6 }),
        ("parkinsons", ModelKind::KpcaSvm { components: 7 }),
    ];
    let settings: [(&str, SourceMode, NoiseLevel); 4] = [
        ("classical", SourceMode::ExactClassical, NoiseLevel::None),
        ("no_noise", SourceMode::Protocol, NoiseLevel::None),
        ("l1", SourceMode::Protocol, NoiseLevel::L1),
        ("l2", SourceMode::Protocol, NoiseLevel::L2),
    ];
    let mut cells = Vec::new();
    for (dataset, model) in rows {
        for (label, mode, noise) in settings {
            let series = format!("{dataset}/{}", model.label());
            let id = format!("{dataset}-{}-{label}", model.label());
            let mut c = base(&id, dataset, mode, opts);
            c.model = model;
            c.noise = noise;
            c.sample_cap = cap(dataset, opts);
            cells.push(Cell {
                id,
                series,
                x: label.to_string(),
                config: c,
            });
        }
    }
    cells
}

fn figure4(opts: &SuiteOptions) -> Vec<Cell> {
    let mut cells = Vec::new();
    let mut classical = base(
        "digits-100-classical",
        "digits-100",
        SourceMode::ExactClassical,
        opts,
    );
    classical.shots = 0;
    cells.push(Cell {
        id: classical.name.clone(),
        series: "classical".into(),
        x: "0".into(),
        config: classical,
    });
    for shots in [128, 256, 512, 1024] {
        let id = format!("digits-100-shots-{shots}");
        let mut c = base(&id, "digits-100", SourceMode::Protocol, opts);
        c.shots = shots;
        cells.push(Cell {
            id,
            series: "protocol".into(),
            x: shots.to_string(),
            config: c,
        });
    }
    cells
}

/// The cells of a named suite, in output order.
pub fn suite_cells(name: &str, opts: &SuiteOptions) -> Result<Vec<Cell>> {
    match name {
        "table1" => Ok(table1(opts)),
        "figure3" => Ok(figure3(opts)),
        "figure4" => Ok(figure4(opts)),
        other => Err(Error::Invalid(format!(
            "unknown suite `{other}`; expected one of {SUITES:?}"
        ))),
    }
}

fn cell_path(dir: &Path, cell: &Cell) -> PathBuf {
    dir.join("cells").join(format!("{}.csv", cell.id))
}

fn completed(path: &Path, digest: &str) -> Option<Vec<ResultRow>> {
    let rows = read_rows(path).ok()?;
    (!rows.is_empty() && rows.iter().all(|r| r.config_digest == digest)).then_some(rows)
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

enum Outcome {
    Skipped,
    Ran,
    Failed,
}

fn run_cell(name: &str, dir: &Path, cell: &Cell) -> Outcome {
    let path = cell_path(dir, cell);
    let digest = cell.config.digest();
    if completed(&path, &digest).is_some() {
        info!("{}: up to date", cell.id);
        return Outcome::Skipped;
    }
    let start = Instant::now();
    let transcript = dir.join("transcripts").join(format!("{}.jsonl", cell.id));
    if transcript.exists() {
        let _ = fs::remove_file(&transcript);
    }
    let result = run_experiment(&cell.config, name, &cell.id, Some(&transcript))
        .and_then(|rows| write_atomic(&path, &rows_to_csv(&rows, true)?));
    match result {
        Ok(()) => {
            let secs = start.elapsed().as_secs_f64();
            info!("{}: done in {secs:.1}s", cell.id);
            let _ = append_timing(&dir.join("timings.csv"), &cell.id, &digest, secs);
            Outcome::Ran
        }
        Err(e) => {
            warn!("{}: {e}", cell.id);
            let record = ErrorRecord::new(&cell.id, &digest, &e);
            let line = serde_json::to_string(&record).expect("record serializes");
            let _ = append_line(&dir.join("errors.jsonl"), &line);
            Outcome::Failed
        }
    }
}

/// Run every cell of `name` under `opts.out/name`, skipping cells that are
/// already complete, then assemble `results.csv` and `plot.csv`.
pub fn run_suite(name: &str, opts: &SuiteOptions) -> Result<SuiteSummary> {
    let cells = suite_cells(name, opts)?;
    let dir = opts.out.join(name);
    fs::create_dir_all(dir.join("cells"))?;
    let errors = dir.join("errors.jsonl");
    if errors.exists() {
        fs::remove_file(&errors)?;
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.workers.max(1))
        .build()
        .map_err(|e| Error::Invalid(format!("worker pool: {e}")))?;
    let outcomes: Vec<Outcome> =
        pool.install(|| cells.par_iter().map(|c| run_cell(name, &dir, c)).collect());

    let mut rows = Vec::new();
    let mut points = Vec::new();
    for cell in &cells {
        let Some(cell_rows) = completed(&cell_path(&dir, cell), &cell.config.digest()) else {
            continue;
        };
        for r in &cell_rows {
            let series = if cell.config.mode == SourceMode::ExactClassical || cell_rows.len() == 1 {
                cell.series.clone()
            } else {
                format!("{}/{}", cell.series, r.convention)
            };
            points.push(PlotPoint {
                series,
                x: cell.x.clone(),
                y: r.mean,
                err: r.std,
            });
        }
        rows.extend(cell_rows);
    }
    let results = dir.join("results.csv");
    write_atomic(&results, &rows_to_csv(&rows, true)?)?;
    let plot = dir.join("plot.csv");
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(Vec::new());
    w.write_record(["series", "x", "y", "err"])?;
    for p in &points {
        w.serialize(p)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
    write_atomic(&plot, &bytes)?;

    let count = |f: fn(&Outcome) -> bool| outcomes.iter().filter(|o| f(o)).count();
    Ok(SuiteSummary {
        suite: name.to_string(),
        cells: cells.len(),
        ran: count(|o| matches!(o, Outcome::Ran)),
        skipped: count(|o| matches!(o, Outcome::Skipped)),
        failed: count(|o| matches!(o, Outcome::Failed)),
        rows: rows.len(),
        results,
        plot,
    })
}
