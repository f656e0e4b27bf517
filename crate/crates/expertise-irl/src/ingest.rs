//! Turning raw timestamped recordings into validated trajectories.
//!
//! A recording is a sequence of observed grid cells (plus a travel axis for
//! warehouse robots), usually sampled faster than the agent moves.
//! Ingestion keeps every n-th observation, then recovers the action behind
//! each consecutive pair by searching the environment's own dynamics. A
//! pair no single action can explain — a diagonal jump, a multi-cell gap, a
//! heading the chassis could not have reached — is reported with its raw
//! record index so bad recordings can be located and excluded.

use crate::error::{Error, Result};
use crate::envs::Model;
use crate::io::RawObservation;
use crate::mdp::{validate_trajectory, StateId, Trajectory};

/// Keep observations 0, n, 2n, ... of the recording.
pub fn downsample_observations(
    raw: &[RawObservation],
    factor: usize,
) -> Result<Vec<RawObservation>> {
    if factor == 0 {
        return Err(Error::Config("downsample factor must be at least 1".into()));
    }
    Ok(raw.iter().step_by(factor).cloned().collect())
}

/// Recover the action sequence behind a sequence of observed states.
///
/// Each consecutive pair must be connected by a single action of the
/// environment; when several actions lead to the same successor (a move
/// into a wall looks like any other blocked move) the smallest action id
/// wins, so reconstruction is deterministic. Warehouse headings are derived
/// from the dynamics when an observation omits them; when present they must
/// match what the dynamics allow.
pub fn reconstruct_trajectory(model: &Model, obs: &[RawObservation]) -> Result<Trajectory> {
    if obs.len() < 2 {
        return Err(Error::Domain(format!(
            "need at least two observations to reconstruct a step, got {}",
            obs.len()
        )));
    }
    for (k, pair) in obs.windows(2).enumerate() {
        if pair[1].t < pair[0].t {
            return Err(Error::Ingest {
                index: k + 1,
                detail: format!(
                    "timestamps run backwards: {} after {}",
                    pair[1].t, pair[0].t
                ),
            });
        }
    }
    let mut current = model
        .state_of(obs[0].cell, obs[0].heading)
        .map_err(|e| Error::Ingest { index: 0, detail: e.to_string() })?;
    let mdp = model.mdp();
    let mut steps = Vec::with_capacity(obs.len() - 1);
    for (k, next) in obs.iter().enumerate().skip(1) {
        let mut chosen: Option<(usize, StateId)> = None;
        for (idx, &action) in mdp.actions(current).iter().enumerate() {
            let succ = mdp.successor_at(current, idx);
            if model.cell_of(succ) != next.cell {
                continue;
            }
            if let (Model::Warehouse(m), Some(h)) = (model, next.heading) {
                if m.parts_of(succ).1 != h {
                    continue;
                }
            }
            if chosen.map_or(true, |(best, _)| action < best) {
                chosen = Some((action, succ));
            }
        }
        let Some((action, succ)) = chosen else {
            return Err(Error::Ingest {
                index: k,
                detail: format!(
                    "no single action connects {} to cell ({}, {}){}",
                    model.describe_state(current),
                    next.cell.0,
                    next.cell.1,
                    match next.heading {
                        Some(h) => format!(" with heading {h:?}"),
                        None => String::new(),
                    }
                ),
            });
        };
        steps.push((current, action));
        current = succ;
    }
    Ok(Trajectory::new(steps))
}

/// Full ingestion: downsample, reconstruct, validate. Error indices refer
/// to the raw (pre-downsampling) record positions.
pub fn ingest_observations(
    model: &Model,
    raw: &[RawObservation],
    factor: usize,
) -> Result<Trajectory> {
    let kept = downsample_observations(raw, factor)?;
    let trajectory = reconstruct_trajectory(model, &kept).map_err(|e| match e {
        Error::Ingest { index, detail } => Error::Ingest { index: index * factor, detail },
        other => other,
    })?;
    validate_trajectory(model.mdp(), &trajectory)?;
    Ok(trajectory)
}
