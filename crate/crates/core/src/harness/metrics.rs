use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// Summary of one finished episode.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeRecord {
    pub episode: usize,
    pub total_reward: f64,
    pub steps: usize,
    pub setpoint: Vec<f64>,
    /// Not exported, so that files stay reproducible.
    pub wall_seconds: f64,
}

/// One controller step inside a traced episode.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub t: usize,
    pub setpoint: Vec<f64>,
    pub y: Vec<f64>,
    pub a: Vec<f64>,
    pub reward: f64,
}

/// Append-only training log.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MetricsLog {
    episodes: Vec<EpisodeRecord>,
    traces: BTreeMap<usize, Vec<StepRecord>>,
}

impl MetricsLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn episodes(&self) -> &[EpisodeRecord] {
        &self.episodes
    }

    pub fn traces(&self) -> &BTreeMap<usize, Vec<StepRecord>> {
        &self.traces
    }

    pub fn trace(&self, episode: usize) -> Option<&[StepRecord]> {
        self.traces.get(&episode).map(Vec::as_slice)
    }

    /// Appends the next episode; indices must be contiguous from 0.
    pub fn push_episode(&mut self, record: EpisodeRecord) -> Result<()> {
        if record.episode != self.episodes.len() {
            return Err(Error::InvalidParameter(format!(
                "episode {} logged after {} episodes",
                record.episode,
                self.episodes.len()
            )));
        }
        self.episodes.push(record);
        Ok(())
    }

    pub fn push_step(&mut self, episode: usize, step: StepRecord) {
        self.traces.entry(episode).or_default().push(step);
    }

    pub fn total_rewards(&self) -> Vec<f64> {
        self.episodes.iter().map(|e| e.total_reward).collect()
    }
}

/// Trailing mean over `min(window, i + 1)` points.
pub fn moving_average(series: &[f64], window: usize) -> Result<Vec<f64>> {
    if window == 0 {
        return Err(Error::InvalidParameter("window must be >= 1".into()));
    }
    let mut out = Vec::with_capacity(series.len());
    let mut sum = 0.0;
    for i in 0..series.len() {
        sum += series[i];
        if i >= window {
            sum -= series[i - window];
        }
        out.push(sum / (i + 1).min(window) as f64);
    }
    Ok(out)
}

fn channel_names(prefix: &str, n: usize) -> Vec<String> {
    if n == 1 {
        vec![prefix.to_string()]
    } else {
        (1..=n).map(|i| format!("{prefix}{i}")).collect()
    }
}

fn trace_header(trace: &[StepRecord]) -> Vec<String> {
    let (n_sp, n_y, n_a) = trace
        .first()
        .map_or((1, 1, 1), |s| (s.setpoint.len(), s.y.len(), s.a.len()));
    let mut h = vec!["t".to_string()];
    h.extend(channel_names("setpoint", n_sp));
    h.extend(channel_names("y", n_y));
    h.extend(channel_names("a", n_a));
    h.push("reward".into());
    h
}

fn trace_row(s: &StepRecord) -> Vec<String> {
    let mut row = vec![s.t.to_string()];
    row.extend(s.setpoint.iter().map(f64::to_string));
    row.extend(s.y.iter().map(f64::to_string));
    row.extend(s.a.iter().map(f64::to_string));
    row.push(s.reward.to_string());
    row
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::io(path, std::io::Error::other(format!("{other:?}"))),
    }
}

fn write_csv(
    path: &Path,
    header: &[String],
    rows: impl Iterator<Item = Vec<String>>,
) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    w.write_record(header).map_err(|e| csv_error(path, e))?;
    for row in rows {
        w.write_record(&row).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Writes `episodes.csv` and one `trace_<episode>.csv` per traced episode.
pub fn export_csv(log: &MetricsLog, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let header: Vec<String> = ["episode", "total_reward", "steps"]
        .map(String::from)
        .to_vec();
    write_csv(
        &dir.join("episodes.csv"),
        &header,
        log.episodes.iter().map(|e| {
            vec![
                e.episode.to_string(),
                e.total_reward.to_string(),
                e.steps.to_string(),
            ]
        }),
    )?;
    for (ep, trace) in &log.traces {
        write_csv(
            &dir.join(format!("trace_{ep}.csv")),
            &trace_header(trace),
            trace.iter().map(trace_row),
        )?;
    }
    Ok(())
}

fn write_columns(
    path: &Path,
    header: &[String],
    rows: impl Iterator<Item = Vec<String>>,
) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let write = || -> std::io::Result<()> {
        writeln!(w, "# {}", header.join(" "))?;
        for row in rows {
            writeln!(w, "{}", row.join(" "))?;
        }
        w.flush()
    };
    write().map_err(|e| Error::io(path, e))
}

/// Whitespace-separated columns with a `#` header line: `episodes.dat` adds a
/// 21-episode moving average of the reward; `trace_<episode>.dat` mirrors the
/// trace CSV.
pub fn emit_plot_data(log: &MetricsLog, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let ma = moving_average(&log.total_rewards(), 21)?;
    let header: Vec<String> = ["episode", "total_reward", "steps", "reward_ma21"]
        .map(String::from)
        .to_vec();
    write_columns(
        &dir.join("episodes.dat"),
        &header,
        log.episodes.iter().zip(&ma).map(|(e, m)| {
            vec![
                e.episode.to_string(),
                e.total_reward.to_string(),
                e.steps.to_string(),
                m.to_string(),
            ]
        }),
    )?;
    for (ep, trace) in &log.traces {
        write_columns(
            &dir.join(format!("trace_{ep}.dat")),
            &trace_header(trace),
            trace.iter().map(trace_row),
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(episode: usize, total_reward: f64, steps: usize) -> EpisodeRecord {
        EpisodeRecord {
            episode,
            total_reward,
            steps,
            setpoint: vec![1.0],
            wall_seconds: 0.0,
        }
    }

    #[test]
    fn moving_average_cases() {
        assert_eq!(moving_average(&[4.0; 6], 3).unwrap(), vec![4.0; 6]);
        assert_eq!(moving_average(&[1.0, 2.0, 3.0], 3).unwrap()[2], 2.0);
        let s = [3.0, -1.0, 7.5];
        assert_eq!(moving_average(&s, 1).unwrap(), s.to_vec());
        assert_eq!(moving_average(&[1.0, 3.0], 5).unwrap(), vec![1.0, 2.0]);
        assert!(moving_average(&[], 4).unwrap().is_empty());
        assert!(moving_average(&[1.0], 0).is_err());
    }

    #[test]
    fn indices_must_be_contiguous() {
        let mut log = MetricsLog::new();
        log.push_episode(record(0, -1.0, 3)).unwrap();
        assert!(log.push_episode(record(2, -1.0, 3)).is_err());
    }

    #[test]
    fn empty_log_writes_header_only() {
        let dir = tempfile::tempdir().unwrap();
        export_csv(&MetricsLog::new(), dir.path()).unwrap();
        let text = std::fs::read_to_string(dir.path().join("episodes.csv")).unwrap();
        assert_eq!(text, "episode,total_reward,steps\n");
    }

    #[test]
    fn one_episode_two_steps() {
        let dir = tempfile::tempdir().unwrap();
        let mut log = MetricsLog::new();
        for t in 0..2 {
            log.push_step(
                0,
                StepRecord {
                    t,
                    setpoint: vec![1.0, 2.0],
                    y: vec![0.5, 0.25],
                    a: vec![10.0, 20.0],
                    reward: -2.25,
                },
            );
        }
        log.push_episode(record(0, -4.5, 2)).unwrap();
        export_csv(&log, dir.path()).unwrap();
        emit_plot_data(&log, dir.path()).unwrap();

        let episodes = std::fs::read_to_string(dir.path().join("episodes.csv")).unwrap();
        assert_eq!(episodes.lines().count(), 2);
        let trace = std::fs::read_to_string(dir.path().join("trace_0.csv")).unwrap();
        let lines: Vec<&str> = trace.lines().collect();
        assert_eq!(lines[0], "t,setpoint1,setpoint2,y1,y2,a1,a2,reward");
        assert_eq!(lines.len(), 3);
        let dat = std::fs::read_to_string(dir.path().join("trace_0.dat")).unwrap();
        assert_eq!(dat.lines().nth(1).unwrap(), "0 1 2 0.5 0.25 10 20 -2.25");
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let mut log = MetricsLog::new();
        let rewards = [-0.1 - 0.2, 1.0 / 3.0, -1e-300, 123456.789e10];
        for (i, r) in rewards.iter().enumerate() {
            log.push_episode(record(i, *r, i + 1)).unwrap();
        }
        export_csv(&log, dir.path()).unwrap();
        let mut rdr = csv::Reader::from_path(dir.path().join("episodes.csv")).unwrap();
        let back: Vec<(usize, f64, usize)> = rdr.deserialize().map(|r| r.unwrap()).collect();
        for (i, (ep, r, steps)) in back.into_iter().enumerate() {
            assert_eq!((ep, steps), (i, i + 1));
            assert_eq!(r.to_bits(), rewards[i].to_bits());
        }
    }

    #[test]
    fn unwritable_directory_reports_path() {
        let dir = tempfile::tempdir().unwrap();
        let blocker = dir.path().join("file");
        std::fs::write(&blocker, "x").unwrap();
        let err = export_csv(&MetricsLog::new(), &blocker.join("sub")).unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
    }
}
