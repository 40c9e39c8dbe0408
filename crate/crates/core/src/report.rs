//! Metrics files and the plot-ready aggregation derived from them.

use std::fs::File;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::td3::{EpisodeMetrics, EvalEpisode, StageChange, ValidationResult};
use crate::{Error, Result};

/// One row of `metrics.csv`. Contains nothing that depends on wall-clock time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub episode: u64,
    pub stage: usize,
    pub stage_name: String,
    pub env_steps: u64,
    #[serde(rename = "return")]
    pub episode_return: f64,
    pub eliminations: usize,
    pub steps: u64,
    pub outcome: String,
}

impl From<&EpisodeMetrics> for MetricsRow {
    fn from(m: &EpisodeMetrics) -> Self {
        Self {
            episode: m.episode,
            stage: m.stage,
            stage_name: m.stage_name.clone(),
            env_steps: m.env_steps,
            episode_return: m.episode_return,
            eliminations: m.eliminations,
            steps: m.steps,
            outcome: m.outcome.clone(),
        }
    }
}

/// Streams rows of any serialisable record type to a CSV file, flushing each row.
pub struct CsvLog {
    path: PathBuf,
    inner: csv::Writer<File>,
}

impl CsvLog {
    /// Creates the file and writes `header` immediately, so it exists even if
    /// no rows follow.
    pub fn create(path: &Path, header: &[&str]) -> Result<Self> {
        let mut inner = csv::WriterBuilder::new()
            .has_headers(false)
            .from_path(path)
            .map_err(|e| csv_error(path, e))?;
        inner.write_record(header).map_err(|e| csv_error(path, e))?;
        inner.flush().map_err(|e| Error::io(path, e))?;
        Ok(Self {
            path: path.to_path_buf(),
            inner,
        })
    }

    pub fn write<T: Serialize>(&mut self, row: &T) -> Result<()> {
        self.inner.serialize(row).map_err(|e| csv_error(&self.path, e))?;
        self.inner.flush().map_err(|e| Error::io(&self.path, e))
    }
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Parse {
            path: path.to_path_buf(),
            line,
            message: format!("{other:?}"),
        },
    }
}

pub const METRICS_HEADER: [&str; 8] = [
    "episode",
    "stage",
    "stage_name",
    "env_steps",
    "return",
    "eliminations",
    "steps",
    "outcome",
];

pub const STAGES_HEADER: [&str; 5] = ["episode", "env_steps", "from", "to", "name"];

pub const TIMING_HEADER: [&str; 3] = ["episode", "env_steps", "wall_clock"];

pub const VALIDATION_HEADER: [&str; 6] = ["env_steps", "stage", "successes", "episodes", "mean_return", "improved"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRow {
    pub episode: u64,
    pub env_steps: u64,
    pub from: usize,
    pub to: usize,
    pub name: String,
}

impl From<&StageChange> for StageRow {
    fn from(c: &StageChange) -> Self {
        Self {
            episode: c.episode,
            env_steps: c.env_steps,
            from: c.from,
            to: c.to,
            name: c.name.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationRow {
    pub env_steps: u64,
    pub stage: usize,
    pub successes: usize,
    pub episodes: usize,
    pub mean_return: f64,
    pub improved: bool,
}

impl From<&ValidationResult> for ValidationRow {
    fn from(v: &ValidationResult) -> Self {
        Self {
            env_steps: v.env_steps,
            stage: v.stage,
            successes: v.successes,
            episodes: v.episodes,
            mean_return: v.mean_return,
            improved: v.improved,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingRow {
    pub episode: u64,
    pub env_steps: u64,
    pub wall_clock: f64,
}

/// Reads `metrics.csv`. Malformed rows are reported with their line number.
pub fn read_metrics(path: &Path) -> Result<Vec<MetricsRow>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let mut rows = Vec::new();
    for (i, rec) in reader.deserialize::<MetricsRow>().enumerate() {
        let row = rec.map_err(|e| {
            let line = e.position().map(|p| p.line() as usize).unwrap_or(i + 2);
            match csv_error(path, e) {
                Error::Parse { message, .. } => Error::Parse {
                    path: path.to_path_buf(),
                    line,
                    message,
                },
                other => other,
            }
        })?;
        rows.push(row);
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotPoint {
    pub episode: u64,
    pub env_steps: u64,
    pub stage: usize,
    #[serde(rename = "return")]
    pub episode_return: f64,
    pub smoothed: f64,
}

/// First episode played at a new stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageMarker {
    pub episode: u64,
    pub env_steps: u64,
    pub stage: usize,
    pub stage_name: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotData {
    /// Exponential smoothing factor applied to returns.
    pub smoothing: f64,
    pub points: Vec<PlotPoint>,
    pub stage_markers: Vec<StageMarker>,
}

pub const DEFAULT_SMOOTHING: f64 = 0.05;

/// Exponentially smoothed return against environment steps, plus the points
/// where the curriculum stage changes.
pub fn aggregate(rows: &[MetricsRow], smoothing: f64) -> Result<PlotData> {
    if !(smoothing > 0.0 && smoothing <= 1.0) {
        return Err(Error::config(format!("smoothing {smoothing} outside (0, 1]")));
    }
    let mut points = Vec::with_capacity(rows.len());
    let mut stage_markers = Vec::new();
    let mut ema: Option<f64> = None;
    let mut prev_stage: Option<usize> = None;
    for r in rows {
        let s = match ema {
            None => r.episode_return,
            Some(s) => s + smoothing * (r.episode_return - s),
        };
        ema = Some(s);
        points.push(PlotPoint {
            episode: r.episode,
            env_steps: r.env_steps,
            stage: r.stage,
            episode_return: r.episode_return,
            smoothed: s,
        });
        if prev_stage.is_some_and(|p| p != r.stage) {
            stage_markers.push(StageMarker {
                episode: r.episode,
                env_steps: r.env_steps,
                stage: r.stage,
                stage_name: r.stage_name.clone(),
            });
        }
        prev_stage = Some(r.stage);
    }
    Ok(PlotData {
        smoothing,
        points,
        stage_markers,
    })
}

/// Aggregate statistics of deterministic evaluation episodes. Every field is
/// `None` when no episodes were run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub scenario: String,
    pub episodes: usize,
    pub success_rate: Option<f64>,
    pub mean_return: Option<f64>,
    pub mean_eliminations: Option<f64>,
    pub mean_length: Option<f64>,
}

impl EvalSummary {
    pub fn from_episodes(scenario: &str, eps: &[EvalEpisode]) -> Self {
        let n = eps.len();
        let mean = |f: &dyn Fn(&EvalEpisode) -> f64| {
            (n > 0).then(|| eps.iter().map(f).sum::<f64>() / n as f64)
        };
        Self {
            scenario: scenario.to_string(),
            episodes: n,
            success_rate: mean(&|e| if e.success { 1.0 } else { 0.0 }),
            mean_return: mean(&|e| e.episode_return),
            mean_eliminations: mean(&|e| e.eliminations as f64),
            mean_length: mean(&|e| e.steps as f64),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(ep: u64, stage: usize, ret: f64) -> MetricsRow {
        MetricsRow {
            episode: ep,
            stage,
            stage_name: format!("s{stage}"),
            env_steps: 10 * (ep + 1),
            episode_return: ret,
            eliminations: 1,
            steps: 10,
            outcome: "timeout".into(),
        }
    }

    #[test]
    fn empty_aggregation() {
        let p = aggregate(&[], 0.1).unwrap();
        assert!(p.points.is_empty() && p.stage_markers.is_empty());
    }

    #[test]
    fn constant_returns_stay_constant() {
        let rows: Vec<_> = (0..50).map(|i| row(i, 0, 0.7)).collect();
        let p = aggregate(&rows, 0.05).unwrap();
        assert!(p.points.iter().all(|pt| pt.smoothed == 0.7));
    }

    #[test]
    fn stage_markers() {
        let rows = vec![row(0, 0, 1.0), row(1, 0, 1.0), row(2, 1, 2.0), row(3, 1, 2.0), row(4, 2, 3.0)];
        let p = aggregate(&rows, 0.5).unwrap();
        let eps: Vec<u64> = p.stage_markers.iter().map(|m| m.episode).collect();
        assert_eq!(eps, vec![2, 4]);
        assert_eq!(p.stage_markers[0].stage_name, "s1");
    }

    #[test]
    fn csv_round_trip_and_bad_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.csv");
        let mut log = CsvLog::create(&path, &METRICS_HEADER).unwrap();
        let rows = vec![row(0, 0, 0.1 + 0.2), row(1, 1, -3.5)];
        for r in &rows {
            log.write(r).unwrap();
        }
        drop(log);
        assert_eq!(read_metrics(&path).unwrap(), rows);

        let mut text = std::fs::read_to_string(&path).unwrap();
        text.push_str("2,0,s0,30,notanumber,1,10,timeout\n");
        std::fs::write(&path, text).unwrap();
        match read_metrics(&path) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 4),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn header_only_file_reads_empty() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.csv");
        CsvLog::create(&path, &METRICS_HEADER).unwrap();
        assert!(read_metrics(&path).unwrap().is_empty());
    }

    #[test]
    fn summary_of_nothing() {
        let s = EvalSummary::from_episodes("easy", &[]);
        assert_eq!(s.episodes, 0);
        assert!(s.success_rate.is_none());
    }
}
