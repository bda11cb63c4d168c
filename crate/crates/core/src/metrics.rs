//! Per-evaluation run metrics and their CSV form.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct MetricsRow {
    pub frames: u64,
    /// Raw return of each evaluation episode.
    pub returns: Vec<f64>,
    pub mean: f64,
    pub std: f64,
    pub qmax: f64,
    pub scale: f64,
    pub disagreement: f64,
    pub wallclock_s: f64,
}

/// Population mean and standard deviation.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Evaluation rows of one run, ordered by frames.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunMetrics {
    pub episodes: usize,
    pub rows: Vec<MetricsRow>,
}

impl RunMetrics {
    pub fn new(episodes: usize) -> Self {
        Self {
            episodes,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: MetricsRow) -> Result<()> {
        if row.returns.len() != self.episodes {
            return Err(Error::Shape(format!(
                "{} returns in a row of a {}-episode run",
                row.returns.len(),
                self.episodes
            )));
        }
        if let Some(last) = self.rows.last() {
            if row.frames <= last.frames {
                return Err(Error::State(format!(
                    "metrics row at {} frames after one at {}",
                    row.frames, last.frames
                )));
            }
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn header(episodes: usize) -> String {
        let mut h = String::from("frames");
        for i in 0..episodes {
            let _ = write!(h, ",ep{i}");
        }
        h.push_str(",mean,std,qmax,scale,disagreement,wallclock_s");
        h
    }

    pub fn to_csv(&self) -> String {
        let mut s = Self::header(self.episodes);
        s.push('\n');
        for r in &self.rows {
            let _ = write!(s, "{}", r.frames);
            for x in &r.returns {
                let _ = write!(s, ",{x}");
            }
            let _ = writeln!(
                s,
                ",{},{},{},{},{},{}",
                r.mean, r.std, r.qmax, r.scale, r.disagreement, r.wallclock_s
            );
        }
        s
    }

    /// Parses a metrics CSV; errors name `origin` and the offending line.
    pub fn from_csv(text: &str, origin: &Path) -> Result<Self> {
        let err = |line: usize, msg: String| Error::Parse {
            file: origin.to_path_buf(),
            line,
            msg,
        };
        let mut lines = text.lines().enumerate();
        let (_, header) = lines.next().ok_or_else(|| err(1, "empty metrics file".into()))?;
        let cols: Vec<&str> = header.trim().split(',').collect();
        let episodes = cols.len().saturating_sub(7);
        if cols.len() < 8 || header.trim() != Self::header(episodes) {
            return Err(err(1, format!("unexpected header {header:?}")));
        }
        let mut m = Self::new(episodes);
        for (i, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.trim().split(',').collect();
            if fields.len() != cols.len() {
                return Err(err(
                    i + 1,
                    format!("{} fields, expected {}", fields.len(), cols.len()),
                ));
            }
            let num = |j: usize| -> Result<f64> {
                fields[j]
                    .parse::<f64>()
                    .map_err(|_| err(i + 1, format!("column {}: bad number {:?}", cols[j], fields[j])))
            };
            let frames = fields[0]
                .parse::<u64>()
                .map_err(|_| err(i + 1, format!("bad frame count {:?}", fields[0])))?;
            let returns = (1..=episodes).map(num).collect::<Result<Vec<_>>>()?;
            let e = episodes;
            let row = MetricsRow {
                frames,
                returns,
                mean: num(e + 1)?,
                std: num(e + 2)?,
                qmax: num(e + 3)?,
                scale: num(e + 4)?,
                disagreement: num(e + 5)?,
                wallclock_s: num(e + 6)?,
            };
            m.push(row).map_err(|e| err(i + 1, e.to_string()))?;
        }
        Ok(m)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_csv(&std::fs::read_to_string(path)?, path)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }
}
