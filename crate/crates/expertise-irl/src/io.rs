//! On-disk trajectory formats.
//!
//! Demonstrations travel as JSONL: one record per episode, steps as
//! `(state, action)` pairs, with optional ground-truth metadata when the
//! episodes came from the simulator. Raw recordings (pre-discretization)
//! use a separate JSONL schema of timestamped cells handled by `ingest`.

use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::envs::Heading;
use crate::error::{Error, Result};
use crate::mdp::{ActionId, EpisodeSet, ExpertiseLevel, RewardWeights, StateId, Trajectory};

/// One line of a trajectory JSONL file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub steps: Vec<(StateId, ActionId)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta_star: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta_star: Option<f64>,
}

/// A loaded trajectory file.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryFile {
    pub records: Vec<TrajectoryRecord>,
}

impl TrajectoryFile {
    pub fn episodes(&self) -> EpisodeSet {
        EpisodeSet::new(
            self.records
                .iter()
                .map(|r| Trajectory::new(r.steps.clone()))
                .collect(),
        )
    }

    /// The `(theta*, beta*)` the file was generated from, when every record
    /// carries the same metadata; `None` for ingested or mixed files.
    pub fn ground_truth(&self) -> Option<(RewardWeights, ExpertiseLevel)> {
        let first = self.records.first()?;
        let theta = first.theta_star.as_ref()?;
        let beta = first.beta_star?;
        for r in &self.records {
            if r.theta_star.as_deref() != Some(theta.as_slice()) || r.beta_star != Some(beta) {
                return None;
            }
        }
        Some((
            RewardWeights::new(theta.clone()).ok()?,
            ExpertiseLevel::new(beta).ok()?,
        ))
    }
}

/// Write one JSONL line per episode, attaching ground truth when given.
pub fn save_trajectories(
    path: impl AsRef<Path>,
    episodes: &EpisodeSet,
    truth: Option<(&RewardWeights, ExpertiseLevel)>,
) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    for t in &episodes.trajectories {
        let record = TrajectoryRecord {
            steps: t.steps.clone(),
            theta_star: truth.map(|(theta, _)| theta.as_slice().to_vec()),
            beta_star: truth.map(|(_, beta)| beta.beta()),
        };
        let line = serde_json::to_string(&record)
            .map_err(|e| Error::Numeric(format!("trajectory serialization failed: {e}")))?;
        writeln!(out, "{line}")?;
    }
    Ok(())
}

/// Read a trajectory JSONL file; at least one episode is required.
pub fn load_trajectories(path: impl AsRef<Path>) -> Result<TrajectoryFile> {
    let path = path.as_ref();
    let reader = BufReader::new(std::fs::File::open(path)?);
    let mut records = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: TrajectoryRecord = serde_json::from_str(&line).map_err(|e| Error::Parse {
            path: path.display().to_string(),
            detail: format!("line {}: {e}", i + 1),
        })?;
        records.push(record);
    }
    if records.is_empty() {
        return Err(Error::Parse {
            path: path.display().to_string(),
            detail: "no trajectories in file".into(),
        });
    }
    Ok(TrajectoryFile { records })
}

/// One timestamped observation of a raw (pre-discretization) recording.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawObservation {
    /// Seconds since the start of the recording.
    pub t: f64,
    pub cell: (usize, usize),
    /// Travel axis, present only for environments whose states carry one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub heading: Option<Heading>,
}

pub fn save_raw_observations(path: impl AsRef<Path>, obs: &[RawObservation]) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    for o in obs {
        let line = serde_json::to_string(o)
            .map_err(|e| Error::Numeric(format!("observation serialization failed: {e}")))?;
        writeln!(out, "{line}")?;
    }
    Ok(())
}

pub fn load_raw_observations(path: impl AsRef<Path>) -> Result<Vec<RawObservation>> {
    let path = path.as_ref();
    let reader = BufReader::new(std::fs::File::open(path)?);
    let mut obs = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let o: RawObservation = serde_json::from_str(&line).map_err(|e| Error::Parse {
            path: path.display().to_string(),
            detail: format!("line {}: {e}", i + 1),
        })?;
        obs.push(o);
    }
    Ok(obs)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_episodes() -> EpisodeSet {
        EpisodeSet::new(vec![
            Trajectory::new(vec![(0, 2), (1, 2)]),
            Trajectory::new(vec![(3, 0)]),
        ])
    }

    #[test]
    fn trajectories_round_trip_with_ground_truth() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("demos.jsonl");
        let episodes = sample_episodes();
        let theta = RewardWeights::new(vec![0.5, 0.5]).unwrap();
        let beta = ExpertiseLevel::new(0.09).unwrap();
        save_trajectories(&path, &episodes, Some((&theta, beta))).unwrap();

        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 2);

        let file = load_trajectories(&path).unwrap();
        assert_eq!(file.episodes(), episodes);
        let (t, b) = file.ground_truth().unwrap();
        assert_eq!(t.as_slice(), theta.as_slice());
        assert_eq!(b.beta(), beta.beta());
    }

    #[test]
    fn metadata_is_omitted_without_ground_truth() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("demos.jsonl");
        save_trajectories(&path, &sample_episodes(), None).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(!text.contains("theta_star"));
        assert!(load_trajectories(&path).unwrap().ground_truth().is_none());
    }

    #[test]
    fn empty_and_malformed_files_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("empty.jsonl");
        std::fs::write(&path, "\n").unwrap();
        assert!(load_trajectories(&path).is_err());

        let path = dir.path().join("bad.jsonl");
        std::fs::write(&path, "{\"steps\": [[0, 2]]}\nnot json\n").unwrap();
        let err = load_trajectories(&path).unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
    }

    #[test]
    fn raw_observations_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("raw.jsonl");
        let obs = vec![
            RawObservation { t: 0.0, cell: (1, 2), heading: None },
            RawObservation { t: 1.0, cell: (2, 2), heading: Some(Heading::Horizontal) },
        ];
        save_raw_observations(&path, &obs).unwrap();
        assert_eq!(load_raw_observations(&path).unwrap(), obs);

        let text = std::fs::read_to_string(&path).unwrap();
        let first = text.lines().next().unwrap();
        assert!(!first.contains("heading"), "absent heading must be omitted: {first}");
        assert!(text.lines().nth(1).unwrap().contains("\"h\""));
    }
}
