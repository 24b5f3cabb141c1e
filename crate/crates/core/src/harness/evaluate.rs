use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::run::EpisodeRecord;
use crate::envs::deep_sea::{TIME, TREASURE};
use crate::envs::pareto::nearest;
use crate::envs::ParetoPoint;
use crate::error::{Error, Result};

/// Trailing episodes averaged into a run's outcome point.
pub const PARETO_WINDOW: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParetoEvaluation {
    pub point: ParetoPoint,
    pub episodes_used: usize,
    /// Fewer than the full window was available.
    pub short_run: bool,
    pub nearest: ParetoPoint,
    pub distance: f64,
    pub dominated: bool,
}

/// Average (time, treasure) over the last [`PARETO_WINDOW`] episodes.
pub fn final_point(records: &[EpisodeRecord]) -> Result<(ParetoPoint, usize)> {
    if records.is_empty() {
        return Err(Error::config("no episodes to evaluate"));
    }
    let tail = &records[records.len().saturating_sub(PARETO_WINDOW)..];
    let n = tail.len() as f64;
    let channel = |c: usize| -> Result<f64> {
        tail.iter()
            .map(|r| {
                r.rewards
                    .get(c)
                    .copied()
                    .ok_or_else(|| Error::config("episode lacks deep sea reward channels"))
            })
            .sum::<Result<f64>>()
            .map(|s| s / n)
    };
    Ok((ParetoPoint::new(channel(TIME)?, channel(TREASURE)?), tail.len()))
}

/// Scores one run's final point against an oracle front.
pub fn evaluate_pareto(records: &[EpisodeRecord], front: &[ParetoPoint]) -> Result<ParetoEvaluation> {
    let (point, used) = final_point(records)?;
    let (i, distance) =
        nearest(&point, front).ok_or_else(|| Error::config("oracle front is empty"))?;
    Ok(ParetoEvaluation {
        point,
        episodes_used: used,
        short_run: used < PARETO_WINDOW,
        nearest: front[i],
        distance,
        dominated: front.iter().any(|f| f.dominates(&point)),
    })
}

/// Reads `episodes.csv`, grouped by seed in episode order.
pub fn load_episodes(path: &Path) -> Result<BTreeMap<u64, Vec<EpisodeRecord>>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Internal(format!("{other:?}")),
    })?;
    let header = reader.headers()?.clone();
    let col = |name: &str| header.iter().position(|h| h == name);
    let need = |name: &str| col(name).ok_or_else(|| Error::config(format!("{}: missing column `{name}`", path.display())));
    let (seed_c, ep_c, steps_c, term_c) = (need("seed")?, need("episode")?, need("steps")?, need("terminal")?);
    let reward_cols: Vec<usize> = (0..).map_while(|c| col(&format!("reward_{c}"))).collect();
    let select_cols: Vec<usize> = (0..).map_while(|c| col(&format!("selected_{c}"))).collect();
    let dur_c = col("duration_ms");

    let parse = |row: &csv::StringRecord, c: usize| -> Result<f64> {
        row[c]
            .parse()
            .map_err(|_| Error::config(format!("{}: bad number `{}`", path.display(), &row[c])))
    };
    let mut out: BTreeMap<u64, Vec<EpisodeRecord>> = BTreeMap::new();
    for row in reader.records() {
        let row = row?;
        let seed = parse(&row, seed_c)? as u64;
        out.entry(seed).or_default().push(EpisodeRecord {
            episode: parse(&row, ep_c)? as usize,
            steps: parse(&row, steps_c)? as usize,
            terminal: &row[term_c] == "true",
            rewards: reward_cols.iter().map(|&c| parse(&row, c)).collect::<Result<_>>()?,
            selections: select_cols
                .iter()
                .map(|&c| parse(&row, c).map(|v| v as usize))
                .collect::<Result<_>>()?,
            duration_ms: dur_c.map(|c| parse(&row, c)).transpose()?.unwrap_or(0.0),
        });
    }
    Ok(out)
}
