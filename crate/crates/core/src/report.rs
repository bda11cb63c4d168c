//! Score tables, normalized scores, performance profiles and learning-curve
//! plots over finished runs.
//!
//! A run's maximal score is the largest per-evaluation mean in its metrics.
//! Scores are normalized against the environment's uniform-random and
//! optimal returns, so 0 is random play and 1 is optimal.
//!
//! `report` writes three kinds of file:
//!
//! - `scores.csv`: `env,variant,seed,evaluations,max_score,final_mean,final_std,normalized,random_ref,optimal_ref`
//! - `profile.csv`: `variant,tau,fraction`, one block per variant
//! - `curves-<env>.svg`: mean ± std of the evaluation return per variant

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::config::TrainConfig;
use crate::envs::EnvSpec;
use crate::error::{Error, Result};
use crate::metrics::{mean_std, RunMetrics};

/// `(raw - random_ref) / (optimal_ref - random_ref)`.
pub fn normalized_score(raw: f64, random_ref: f64, optimal_ref: f64) -> Result<f64> {
    let span = optimal_ref - random_ref;
    if !(span.is_finite() && span != 0.0 && raw.is_finite()) {
        return Err(Error::Argument(format!(
            "cannot normalize {raw} against random {random_ref} and optimal {optimal_ref}"
        )));
    }
    Ok((raw - random_ref) / span)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProfilePoint {
    pub tau: f64,
    /// Fraction of scores strictly greater than `tau`.
    pub fraction: f64,
}

pub fn performance_profile(scores: &[f64], taus: &[f64]) -> Result<Vec<ProfilePoint>> {
    if scores.is_empty() || taus.is_empty() {
        return Err(Error::Argument("performance profile of an empty set".into()));
    }
    if taus.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Argument("tau grid must be strictly increasing".into()));
    }
    let mut sorted = scores.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    Ok(taus
        .iter()
        .map(|&tau| {
            let at_or_below = sorted.partition_point(|s| *s <= tau);
            ProfilePoint {
                tau,
                fraction: (sorted.len() - at_or_below) as f64 / n,
            }
        })
        .collect())
}

/// `-0.5, -0.45, .., 1.5`.
pub fn default_taus() -> Vec<f64> {
    (0..=40).map(|i| (i as f64 - 10.0) / 20.0).collect()
}

/// A finished run, as read back from its directory.
#[derive(Clone, Debug)]
pub struct RunRecord {
    pub env: String,
    pub variant: String,
    pub seed: u64,
    pub spec: EnvSpec,
    pub metrics: RunMetrics,
}

impl RunRecord {
    /// Reads `config.txt` and `metrics.csv` from a run directory.
    pub fn load(dir: &Path) -> Result<Self> {
        let cfg = TrainConfig::load(&dir.join("config.txt"))?;
        let metrics = RunMetrics::load(&dir.join("metrics.csv"))?;
        Self::new(&cfg, metrics)
    }

    pub fn new(cfg: &TrainConfig, metrics: RunMetrics) -> Result<Self> {
        let dynamics = cfg.env.build()?;
        Ok(Self {
            env: cfg.env.label(),
            variant: cfg.label.clone(),
            seed: cfg.seed,
            spec: EnvSpec::of(dynamics.as_ref())?,
            metrics,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScoreRow {
    pub env: String,
    pub variant: String,
    pub seed: u64,
    pub evaluations: usize,
    pub max_score: f64,
    /// Mean and std of all episode returns in the final window.
    pub final_mean: f64,
    pub final_std: f64,
    pub normalized: f64,
    pub random_ref: f64,
    pub optimal_ref: f64,
}

#[derive(Clone, Debug)]
pub struct ReportOptions {
    /// Number of trailing evaluations pooled into the final mean and std.
    pub final_window: usize,
    pub taus: Vec<f64>,
}

impl Default for ReportOptions {
    fn default() -> Self {
        Self {
            final_window: 1,
            taus: default_taus(),
        }
    }
}

pub fn score_row(run: &RunRecord, opts: &ReportOptions) -> Result<ScoreRow> {
    let rows = &run.metrics.rows;
    if rows.is_empty() {
        return Err(Error::Argument(format!(
            "run {}/{}/seed {} has no evaluations",
            run.env, run.variant, run.seed
        )));
    }
    let max_score = rows.iter().map(|r| r.mean).fold(f64::NEG_INFINITY, f64::max);
    let window = opts.final_window.clamp(1, rows.len());
    let tail: Vec<f64> = rows[rows.len() - window..]
        .iter()
        .flat_map(|r| r.returns.iter().copied())
        .collect();
    let (final_mean, final_std) = mean_std(&tail);
    Ok(ScoreRow {
        env: run.env.clone(),
        variant: run.variant.clone(),
        seed: run.seed,
        evaluations: rows.len(),
        max_score,
        final_mean,
        final_std,
        normalized: normalized_score(max_score, run.spec.random_return, run.spec.optimal_return)?,
        random_ref: run.spec.random_return,
        optimal_ref: run.spec.optimal_return,
    })
}

pub const SCORES_HEADER: &str =
    "env,variant,seed,evaluations,max_score,final_mean,final_std,normalized,random_ref,optimal_ref";

pub fn scores_csv(rows: &[ScoreRow]) -> String {
    let mut s = format!("{SCORES_HEADER}\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{}",
            r.env,
            r.variant,
            r.seed,
            r.evaluations,
            r.max_score,
            r.final_mean,
            r.final_std,
            r.normalized,
            r.random_ref,
            r.optimal_ref
        );
    }
    s
}

/// Profile over each variant's normalized scores, keyed by variant.
pub fn variant_profiles(
    rows: &[ScoreRow],
    taus: &[f64],
) -> Result<BTreeMap<String, Vec<ProfilePoint>>> {
    let mut by_variant: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for r in rows {
        by_variant.entry(r.variant.clone()).or_default().push(r.normalized);
    }
    by_variant
        .into_iter()
        .map(|(v, scores)| Ok((v, performance_profile(&scores, taus)?)))
        .collect()
}

pub fn profile_csv(profiles: &BTreeMap<String, Vec<ProfilePoint>>) -> String {
    let mut s = String::from("variant,tau,fraction\n");
    for (variant, points) in profiles {
        for p in points {
            let _ = writeln!(s, "{variant},{},{}", p.tau, p.fraction);
        }
    }
    s
}

/// One curve point: frames, mean over pooled episode returns, their std.
type CurvePoint = (u64, f64, f64);

fn curves(runs: &[&RunRecord]) -> BTreeMap<String, Vec<CurvePoint>> {
    let mut pooled: BTreeMap<String, BTreeMap<u64, Vec<f64>>> = BTreeMap::new();
    for run in runs {
        let per_frame = pooled.entry(run.variant.clone()).or_default();
        for row in &run.metrics.rows {
            per_frame.entry(row.frames).or_default().extend(&row.returns);
        }
    }
    pooled
        .into_iter()
        .map(|(v, per_frame)| {
            let pts = per_frame
                .into_iter()
                .map(|(f, xs)| {
                    let (m, s) = mean_std(&xs);
                    (f, m, s)
                })
                .collect();
            (v, pts)
        })
        .collect()
}

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

/// Self-contained SVG of mean ± std evaluation return against frames.
pub fn curves_svg(env: &str, runs: &[&RunRecord]) -> String {
    let (w, h, left, right, top, bottom) = (640.0, 400.0, 60.0, 160.0, 30.0, 40.0);
    let data = curves(runs);
    let pts = data.values().flatten();
    let fmax = pts.clone().map(|p| p.0).max().unwrap_or(1).max(1) as f64;
    let mut ylo = pts.clone().map(|p| p.1 - p.2).fold(f64::INFINITY, f64::min);
    let mut yhi = pts.map(|p| p.1 + p.2).fold(f64::NEG_INFINITY, f64::max);
    if !ylo.is_finite() || !yhi.is_finite() {
        (ylo, yhi) = (0.0, 1.0);
    }
    if yhi - ylo < 1e-9 {
        ylo -= 0.5;
        yhi += 0.5;
    }
    let px = |f: f64| left + f / fmax * (w - left - right);
    let py = |y: f64| top + (yhi - y) / (yhi - ylo) * (h - top - bottom);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{left}" y="18" font-size="13">{env}</text>"#);
    let (x0, x1, y0, y1) = (left, w - right, top, h - bottom);
    let _ = writeln!(
        s,
        r#"<path d="M{x0} {y0} L{x0} {y1} L{x1} {y1}" stroke="black" fill="none"/>"#
    );
    let _ = writeln!(s, r#"<text x="{x0}" y="{}" >0</text>"#, y1 + 14.0);
    let _ = writeln!(
        s,
        r#"<text x="{x1}" y="{}" text-anchor="end">{fmax} frames</text>"#,
        y1 + 14.0
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="end">{yhi:.3}</text>"#,
        x0 - 4.0,
        y0 + 4.0
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{y1}" text-anchor="end">{ylo:.3}</text>"#,
        x0 - 4.0
    );
    for (i, (variant, pts)) in data.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let upper: Vec<String> = pts
            .iter()
            .map(|p| format!("{:.2},{:.2}", px(p.0 as f64), py(p.1 + p.2)))
            .collect();
        let lower: Vec<String> = pts
            .iter()
            .rev()
            .map(|p| format!("{:.2},{:.2}", px(p.0 as f64), py(p.1 - p.2)))
            .collect();
        let _ = writeln!(
            s,
            r#"<polygon points="{} {}" fill="{color}" fill-opacity="0.2" stroke="none"/>"#,
            upper.join(" "),
            lower.join(" ")
        );
        let line: Vec<String> = pts
            .iter()
            .map(|p| format!("{:.2},{:.2}", px(p.0 as f64), py(p.1)))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
            line.join(" ")
        );
        let ly = top + 16.0 * i as f64 + 10.0;
        let _ = writeln!(
            s,
            r#"<rect x="{}" y="{}" width="12" height="3" fill="{color}"/><text x="{}" y="{}">{}</text>"#,
            x1 + 12.0,
            ly - 3.0,
            x1 + 28.0,
            ly + 1.0,
            xml_escape(variant)
        );
    }
    s.push_str("</svg>\n");
    s
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[derive(Clone, Debug)]
pub struct Report {
    pub scores: Vec<ScoreRow>,
    pub profiles: BTreeMap<String, Vec<ProfilePoint>>,
    pub files: Vec<PathBuf>,
}

/// Writes `scores.csv`, `profile.csv` and one curve SVG per environment.
pub fn write_report(runs: &[RunRecord], out: &Path, opts: &ReportOptions) -> Result<Report> {
    if runs.is_empty() {
        return Err(Error::Argument("report needs at least one run".into()));
    }
    let mut order: Vec<&RunRecord> = runs.iter().collect();
    order.sort_by(|a, b| (&a.env, &a.variant, a.seed).cmp(&(&b.env, &b.variant, b.seed)));
    let scores = order
        .iter()
        .map(|r| score_row(r, opts))
        .collect::<Result<Vec<_>>>()?;
    let profiles = variant_profiles(&scores, &opts.taus)?;

    std::fs::create_dir_all(out)?;
    let mut files = vec![out.join("scores.csv"), out.join("profile.csv")];
    std::fs::write(&files[0], scores_csv(&scores))?;
    std::fs::write(&files[1], profile_csv(&profiles))?;
    let mut by_env: BTreeMap<&str, Vec<&RunRecord>> = BTreeMap::new();
    for r in &order {
        by_env.entry(r.env.as_str()).or_default().push(r);
    }
    for (env, group) in by_env {
        let path = out.join(format!("curves-{env}.svg"));
        std::fs::write(&path, curves_svg(env, &group))?;
        files.push(path);
    }
    Ok(Report {
        scores,
        profiles,
        files,
    })
}

/// Loads every run directory and writes the report into `out`.
pub fn report(run_dirs: &[PathBuf], out: &Path, opts: &ReportOptions) -> Result<Report> {
    let runs = run_dirs
        .iter()
        .map(|d| RunRecord::load(d))
        .collect::<Result<Vec<_>>>()?;
    write_report(&runs, out, opts)
}
