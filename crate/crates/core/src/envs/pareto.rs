//! Pareto utilities for the two-objective (time, treasure) plane.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::deep_sea::{Cell, DstAction, DstLayout};

/// An episode outcome: accumulated time reward (<= 0) and treasure collected.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParetoPoint {
    pub time: f64,
    pub treasure: f64,
}

impl ParetoPoint {
    pub fn new(time: f64, treasure: f64) -> Self {
        Self { time, treasure }
    }

    /// Both objectives are maximized.
    pub fn dominates(&self, other: &ParetoPoint) -> bool {
        self.time >= other.time
            && self.treasure >= other.treasure
            && (self.time > other.time || self.treasure > other.treasure)
    }

    pub fn weakly_dominates(&self, other: &ParetoPoint) -> bool {
        self.time >= other.time && self.treasure >= other.treasure
    }

    pub fn distance(&self, other: &ParetoPoint) -> f64 {
        (self.time - other.time).hypot(self.treasure - other.treasure)
    }
}

/// Keeps the non-dominated points (and one copy of exact duplicates),
/// sorted by decreasing time reward.
pub fn pareto_filter(points: &[ParetoPoint]) -> Vec<ParetoPoint> {
    let mut front: Vec<ParetoPoint> = Vec::new();
    for (i, p) in points.iter().enumerate() {
        let dominated = points.iter().any(|q| q.dominates(p));
        let duplicate = points[..i].contains(p);
        if !dominated && !duplicate {
            front.push(*p);
        }
    }
    front.sort_by(|a, b| b.time.total_cmp(&a.time));
    front
}

/// Shortest-path lengths from the start to every reachable treasure.
///
/// Treasure cells end the episode, so paths never pass through them.
/// Returns `((row, col), value, steps)` per reachable treasure.
pub fn treasure_distances(layout: &DstLayout) -> Vec<((usize, usize), f32, usize)> {
    let (rows, cols) = (layout.rows(), layout.cols());
    let mut dist = vec![usize::MAX; rows * cols];
    let start = layout.start();
    dist[start.0 * cols + start.1] = 0;
    let mut queue = VecDeque::from([start]);
    while let Some(cell) = queue.pop_front() {
        if matches!(layout.cell(cell.0, cell.1), Cell::Treasure(_)) {
            continue;
        }
        let d = dist[cell.0 * cols + cell.1];
        for a in DstAction::ALL {
            let next = layout.neighbour(cell, a);
            let slot = &mut dist[next.0 * cols + next.1];
            if *slot == usize::MAX {
                *slot = d + 1;
                queue.push_back(next);
            }
        }
    }
    layout
        .treasures()
        .into_iter()
        .filter_map(|(pos, v)| {
            let d = dist[pos.0 * cols + pos.1];
            if d == usize::MAX {
                log::warn!("treasure {v} at {pos:?} is unreachable; excluded from front");
                None
            } else {
                Some((pos, v, d))
            }
        })
        .collect()
}

/// Exact Pareto front of the layout by breadth-first search.
pub fn dst_pareto_oracle(layout: &DstLayout) -> Vec<ParetoPoint> {
    let candidates: Vec<ParetoPoint> = treasure_distances(layout)
        .into_iter()
        .map(|(_, v, d)| ParetoPoint::new(-(d as f64), v as f64))
        .collect();
    pareto_filter(&candidates)
}

/// Nearest front point and its Euclidean distance.
pub fn nearest(point: &ParetoPoint, front: &[ParetoPoint]) -> Option<(usize, f64)> {
    front
        .iter()
        .map(|f| f.distance(point))
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(&b.1))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_treasure_below_start() {
        let l = DstLayout::parse("format dst-layout 1\nvalues 7\ngrid\nS\nT\n").unwrap();
        assert_eq!(dst_pareto_oracle(&l), vec![ParetoPoint::new(-1.0, 7.0)]);
    }

    #[test]
    fn equal_distance_keeps_higher_value() {
        let l = DstLayout::parse("format dst-layout 1\nvalues 5 3\ngrid\n.S.\nT.T\n").unwrap();
        assert_eq!(dst_pareto_oracle(&l), vec![ParetoPoint::new(-2.0, 5.0)]);
    }

    #[test]
    fn unreachable_treasure_is_excluded() {
        let l = DstLayout::parse("format dst-layout 1\nvalues 9 1\ngrid\nS#T\nT#.\n").unwrap();
        assert_eq!(dst_pareto_oracle(&l), vec![ParetoPoint::new(-1.0, 1.0)]);
    }

    #[test]
    fn dominance() {
        let a = ParetoPoint::new(-1.0, 1.0);
        let b = ParetoPoint::new(-5.0, 1.0);
        assert!(a.dominates(&b));
        assert!(!b.dominates(&a));
        assert!(!a.dominates(&a));
        assert!(a.weakly_dominates(&a));
    }

    #[test]
    fn nearest_point() {
        let front = [ParetoPoint::new(-1.0, 1.0), ParetoPoint::new(-3.0, 2.0)];
        let (i, d) = nearest(&ParetoPoint::new(-5.0, 1.0), &front).unwrap();
        assert_eq!(i, 1);
        assert!((d - 5f64.sqrt()).abs() < 1e-12);
        assert!(nearest(&ParetoPoint::new(0.0, 0.0), &[]).is_none());
    }
}
