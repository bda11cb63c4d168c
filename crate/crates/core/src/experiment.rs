//! Ablation matrices: every variant crossed with every seed, each variant
//! differing from the base config only by its own overrides.
//!
//! Matrix files are line based:
//!
//! ```text
//! # NChain-20, noise on versus off
//! seeds = 0 1 2 3 4
//! base: env.name=nchain env.n=20 max_frames=300000
//! boot-dqn+np: noise.sigma=0.02
//! boot-dqn*: noise.sigma=0
//! ```
//!
//! `base:` overrides apply to every variant; other `label:` lines define one
//! variant each. Without a `seeds` line, seeds 0 to 4 are used.

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use crate::config::TrainConfig;
use crate::error::{Error, Result};
use crate::report::{self, ReportOptions, RunRecord, ScoreRow};
use crate::rng::Stream;
use crate::trainer::train;

#[derive(Clone, Debug, PartialEq)]
pub struct Variant {
    pub label: String,
    pub overrides: Vec<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    pub seeds: Vec<u64>,
    pub base: Vec<String>,
    pub variants: Vec<Variant>,
}

impl Matrix {
    pub fn new(variants: Vec<Variant>) -> Self {
        Self {
            seeds: (0..5).collect(),
            base: Vec::new(),
            variants,
        }
    }

    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        let err = |line: usize, msg: String| Error::Parse {
            file: origin.to_path_buf(),
            line,
            msg,
        };
        let mut m = Self::new(Vec::new());
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix("seeds") {
                let rest = rest.trim_start().strip_prefix('=').ok_or_else(|| {
                    err(i + 1, "expected `seeds = <u64> ...`".into())
                })?;
                m.seeds = rest
                    .split_whitespace()
                    .map(|s| s.parse::<u64>().map_err(|_| err(i + 1, format!("bad seed {s:?}"))))
                    .collect::<Result<_>>()?;
                if m.seeds.is_empty() {
                    return Err(err(i + 1, "empty seed list".into()));
                }
                continue;
            }
            let (label, rest) = line
                .split_once(':')
                .ok_or_else(|| err(i + 1, format!("expected `label: key=value ...`, got {line:?}")))?;
            let label = label.trim();
            if label.is_empty() || label.contains(',') || label.contains('/') {
                return Err(err(i + 1, format!("bad variant label {label:?}")));
            }
            let overrides: Vec<String> = rest.split_whitespace().map(str::to_string).collect();
            if let Some(bad) = overrides.iter().find(|o| !o.contains('=')) {
                return Err(err(i + 1, format!("override {bad:?} is not key=value")));
            }
            if label == "base" {
                m.base.extend(overrides);
            } else if m.variants.iter().any(|v| v.label == label) {
                return Err(err(i + 1, format!("duplicate variant {label:?}")));
            } else {
                m.variants.push(Variant {
                    label: label.to_string(),
                    overrides,
                });
            }
        }
        if m.variants.is_empty() {
            return Err(err(text.lines().count().max(1), "no variants defined".into()));
        }
        Ok(m)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?, path)
    }

    /// Config for one cell: `base`, then the matrix-wide overrides, then
    /// the variant's, then label and seed.
    pub fn cell_config(&self, base: &TrainConfig, variant: &Variant, seed: u64) -> Result<TrainConfig> {
        let mut cfg = base.clone();
        for kv in self.base.iter().chain(&variant.overrides) {
            cfg.apply_override(kv)?;
        }
        cfg.label = variant.label.clone();
        cfg.seed = seed;
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Clone, Debug)]
pub struct CellResult {
    pub variant: String,
    pub seed: u64,
    pub run_dir: Option<PathBuf>,
    /// Score row, or the error that aborted this cell.
    pub outcome: std::result::Result<ScoreRow, String>,
    pub record: Option<RunRecord>,
    pub draw_counts: Vec<(Stream, u64)>,
}

pub struct AblationOutcome {
    pub cells: Vec<CellResult>,
    /// Written report, when an output directory was given and at least one
    /// cell succeeded.
    pub report: Option<report::Report>,
}

impl AblationOutcome {
    pub fn failures(&self) -> impl Iterator<Item = &CellResult> {
        self.cells.iter().filter(|c| c.outcome.is_err())
    }

    pub fn scores(&self) -> impl Iterator<Item = &ScoreRow> {
        self.cells.iter().filter_map(|c| c.outcome.as_ref().ok())
    }
}

fn run_cell(
    matrix: &Matrix,
    base: &TrainConfig,
    variant: &Variant,
    seed: u64,
    out: Option<&Path>,
    opts: &ReportOptions,
) -> CellResult {
    let run_dir = out.map(|o| o.join(&variant.label).join(format!("seed-{seed}")));
    let mut cell = CellResult {
        variant: variant.label.clone(),
        seed,
        run_dir: run_dir.clone(),
        outcome: Err(String::new()),
        record: None,
        draw_counts: Vec::new(),
    };
    let attempt = || -> Result<(ScoreRow, RunRecord, Vec<(Stream, u64)>)> {
        let cfg = matrix.cell_config(base, variant, seed)?;
        let run = train(&cfg, run_dir.as_deref())?;
        let record = RunRecord::new(&cfg, run.metrics)?;
        Ok((report::score_row(&record, opts)?, record, run.draw_counts))
    };
    match attempt() {
        Ok((row, record, draws)) => {
            cell.outcome = Ok(row);
            cell.record = Some(record);
            cell.draw_counts = draws;
        }
        Err(e) => cell.outcome = Err(e.to_string()),
    }
    cell
}

/// Runs every (variant, seed) cell on up to `jobs` threads. A failing cell
/// is recorded and does not stop the others. With `out`, each run is
/// written to `out/<variant>/seed-<seed>` and the comparative report plus
/// `failures.csv` to `out`.
pub fn run_ablation(
    base: &TrainConfig,
    matrix: &Matrix,
    out: Option<&Path>,
    jobs: usize,
    opts: &ReportOptions,
) -> Result<AblationOutcome> {
    let cells: Vec<(&Variant, u64)> = matrix
        .variants
        .iter()
        .flat_map(|v| matrix.seeds.iter().map(move |s| (v, *s)))
        .collect();
    let results: Mutex<Vec<Option<CellResult>>> = Mutex::new(vec![None; cells.len()]);
    let next = AtomicUsize::new(0);
    std::thread::scope(|scope| {
        for _ in 0..jobs.clamp(1, cells.len().max(1)) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some((variant, seed)) = cells.get(i) else {
                    break;
                };
                let r = run_cell(matrix, base, variant, *seed, out, opts);
                results.lock().expect("a cell thread panicked")[i] = Some(r);
            });
        }
    });
    let cells: Vec<CellResult> = results
        .into_inner()
        .expect("a cell thread panicked")
        .into_iter()
        .map(|c| c.expect("every cell runs"))
        .collect();

    let mut written = None;
    if let Some(dir) = out {
        std::fs::create_dir_all(dir)?;
        let mut failures = String::from("variant,seed,error\n");
        for c in &cells {
            if let Err(e) = &c.outcome {
                failures.push_str(&format!("{},{},\"{}\"\n", c.variant, c.seed, e.replace('"', "'")));
            }
        }
        std::fs::write(dir.join("failures.csv"), failures)?;
        let records: Vec<RunRecord> = cells.iter().filter_map(|c| c.record.clone()).collect();
        if !records.is_empty() {
            written = Some(report::write_report(&records, dir, opts)?);
        }
    }
    Ok(AblationOutcome {
        cells,
        report: written,
    })
}
