//! Conservative candidate-pair pruning on a uniform spatial grid.
//!
//! Tracks are binned per frame into 10 m cells; a pair survives pruning when,
//! at some shared frame, their boxes could come within the query radius. The
//! cell probe is padded by the largest box half-diagonal so no qualifying pair
//! is ever dropped.

use std::collections::{BTreeSet, HashMap};

use crate::model::TrackTable;

pub const CELL_SIZE_M: f64 = 10.0;

/// All unordered pairs `(a, b)` with `a < b` whose boxes may come within
/// `radius_m` of each other at some shared frame. Sorted ascending.
pub fn candidate_pairs(table: &TrackTable, radius_m: f64) -> Vec<(u64, u64)> {
    let mut max_half_diag = 0.0f64;
    for traj in table.iter() {
        for s in traj.states() {
            max_half_diag = max_half_diag.max(0.5 * s.length.hypot(s.width));
        }
    }
    // boxes within `radius` center-to-surface need centers within
    // radius + both half-diagonals
    let reach = radius_m + 2.0 * max_half_diag;
    let cell_reach = (reach / CELL_SIZE_M).ceil() as i64;

    let mut bins: HashMap<(i64, i64, i64), Vec<u64>> = HashMap::new();
    for traj in table.iter() {
        for s in traj.states() {
            let cx = (s.center.x / CELL_SIZE_M).floor() as i64;
            let cy = (s.center.y / CELL_SIZE_M).floor() as i64;
            bins.entry((s.frame, cx, cy)).or_default().push(traj.track_id);
        }
    }

    let mut pairs = BTreeSet::new();
    for traj in table.iter() {
        for s in traj.states() {
            let cx = (s.center.x / CELL_SIZE_M).floor() as i64;
            let cy = (s.center.y / CELL_SIZE_M).floor() as i64;
            for dx in -cell_reach..=cell_reach {
                for dy in -cell_reach..=cell_reach {
                    if let Some(ids) = bins.get(&(s.frame, cx + dx, cy + dy)) {
                        for &other in ids {
                            if other > traj.track_id {
                                pairs.insert((traj.track_id, other));
                            }
                        }
                    }
                }
            }
        }
    }
    pairs.into_iter().collect()
}
