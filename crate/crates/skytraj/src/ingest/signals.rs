//! Per-second signal annotation parser and the queryable timeline.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use crate::error::{Error, Result};

/// Displayed signal aspect for one movement during one second.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SignalState {
    Green,
    Yellow,
    Red,
}

impl SignalState {
    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "green" => Ok(SignalState::Green),
            "yellow" => Ok(SignalState::Yellow),
            "red" => Ok(SignalState::Red),
            other => Err(Error::InvalidParameter(format!("unknown signal state `{other}`"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SignalState::Green => "green",
            SignalState::Yellow => "yellow",
            SignalState::Red => "red",
        }
    }
}

impl fmt::Display for SignalState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Validated per-second signal record over a contiguous coverage window.
///
/// Every declared movement has a state for every second of coverage. Cycle
/// boundaries are inferred from the reference movement (the lexicographically
/// first movement id): a cycle starts at each second where it turns green
/// after not being green, and at the start of coverage if it begins green.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalTimeline {
    start_s: i64,
    /// Per movement, one state per second starting at `start_s`.
    states: BTreeMap<String, Vec<SignalState>>,
    cycle_boundaries: Vec<i64>,
}

impl SignalTimeline {
    /// Assemble and validate a timeline from `(time_s, movement_id, state)`
    /// records (any order).
    pub fn from_entries(entries: &[(i64, String, SignalState)]) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::NoObservations);
        }
        let start_s = entries.iter().map(|e| e.0).min().unwrap();
        let end_s = entries.iter().map(|e| e.0).max().unwrap();
        let len = (end_s - start_s + 1) as usize;

        let mut by_movement: BTreeMap<String, Vec<Option<SignalState>>> = BTreeMap::new();
        for (t, movement, state) in entries {
            let slots = by_movement.entry(movement.clone()).or_insert_with(|| vec![None; len]);
            let i = (t - start_s) as usize;
            if slots[i].is_some() {
                return Err(Error::InvalidParameter(format!(
                    "duplicate signal entry at {t} s for movement `{movement}`"
                )));
            }
            slots[i] = Some(*state);
        }

        let mut states = BTreeMap::new();
        for (movement, slots) in by_movement {
            let mut filled = Vec::with_capacity(len);
            for (i, slot) in slots.into_iter().enumerate() {
                match slot {
                    Some(s) => filled.push(s),
                    None => {
                        return Err(Error::InvalidParameter(format!(
                            "gap at {} s for movement `{movement}`",
                            start_s + i as i64
                        )))
                    }
                }
            }
            states.insert(movement, filled);
        }

        let reference = states.keys().next().expect("non-empty").clone();
        let ref_states = &states[&reference];
        let mut cycle_boundaries = Vec::new();
        for (i, s) in ref_states.iter().enumerate() {
            let starts_green = *s == SignalState::Green
                && (i == 0 || ref_states[i - 1] != SignalState::Green);
            if starts_green {
                cycle_boundaries.push(start_s + i as i64);
            }
        }
        Ok(SignalTimeline { start_s, states, cycle_boundaries })
    }

    pub fn movements(&self) -> impl Iterator<Item = &str> {
        self.states.keys().map(|s| s.as_str())
    }

    /// Inclusive coverage window `[start_s, end_s]`.
    pub fn coverage(&self) -> (i64, i64) {
        let len = self.states.values().next().map(|v| v.len()).unwrap_or(0);
        (self.start_s, self.start_s + len as i64 - 1)
    }

    pub fn entry_count(&self) -> usize {
        self.states.values().map(|v| v.len()).sum()
    }

    /// State shown to `movement` at continuous time `t_s` (each annotated
    /// second covers `[t, t+1)`).
    pub fn state_at(&self, movement: &str, t_s: f64) -> Result<SignalState> {
        let slots = self
            .states
            .get(movement)
            .ok_or_else(|| Error::UnknownMovement(movement.to_string()))?;
        let idx = t_s.floor() as i64 - self.start_s;
        if idx < 0 || idx as usize >= slots.len() {
            return Err(Error::SignalGap { t: t_s, movement: movement.to_string() });
        }
        Ok(slots[idx as usize])
    }

    /// Seconds at which a new cycle starts.
    pub fn cycle_boundaries(&self) -> &[i64] {
        &self.cycle_boundaries
    }

    /// Cycle windows `[start, end)` in seconds; the last cycle runs to the
    /// end of coverage.
    pub fn cycles(&self) -> Vec<(i64, i64)> {
        let (_, end) = self.coverage();
        let mut out = Vec::new();
        for (i, &b) in self.cycle_boundaries.iter().enumerate() {
            let stop = self.cycle_boundaries.get(i + 1).copied().unwrap_or(end + 1);
            out.push((b, stop));
        }
        out
    }
}

/// Parse the per-second signal CSV (`time_s,movement_id,state`).
pub fn parse_signals(path: &Path) -> Result<SignalTimeline> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
    let headers = reader.headers()?.clone();
    let col = |name: &str| -> Result<usize> {
        headers.iter().position(|h| h == name).ok_or_else(|| Error::MissingColumn {
            path: path.to_path_buf(),
            column: name.to_string(),
        })
    };
    let (c_time, c_movement, c_state) = (col("time_s")?, col("movement_id")?, col("state")?);

    let mut entries = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map(|p| p.line()).unwrap_or(0) as usize;
        let fail = |message: String| Error::Parse { path: path.to_path_buf(), row: line, message };
        let t: i64 = record
            .get(c_time)
            .unwrap_or("")
            .parse()
            .map_err(|_| fail(format!("bad time_s `{}`", record.get(c_time).unwrap_or(""))))?;
        let movement = record.get(c_movement).unwrap_or("").to_string();
        if movement.is_empty() {
            return Err(fail("empty movement_id".into()));
        }
        let state = SignalState::parse(record.get(c_state).unwrap_or(""))
            .map_err(|e| fail(e.to_string()))?;
        entries.push((t, movement, state));
    }
    SignalTimeline::from_entries(&entries)
        .map_err(|e| Error::InvalidFile { path: path.to_path_buf(), message: e.to_string() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_csv(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn sixty_seconds_single_movement() {
        let mut content = String::from("time_s,movement_id,state\n");
        for t in 0..60 {
            content.push_str(&format!("{t},N_S,green\n"));
        }
        let f = write_csv(&content);
        let tl = parse_signals(f.path()).unwrap();
        assert_eq!(tl.entry_count(), 60);
        assert_eq!(tl.coverage(), (0, 59));
        assert_eq!(tl.state_at("N_S", 31.5).unwrap(), SignalState::Green);
    }

    #[test]
    fn sequence_preserved_in_order() {
        let content = "time_s,movement_id,state\n\
                       10,M1,green\n11,M1,green\n12,M1,yellow\n13,M1,red\n14,M1,red\n";
        let f = write_csv(content);
        let tl = parse_signals(f.path()).unwrap();
        assert_eq!(tl.state_at("M1", 10.0).unwrap(), SignalState::Green);
        assert_eq!(tl.state_at("M1", 12.9).unwrap(), SignalState::Yellow);
        assert_eq!(tl.state_at("M1", 13.0).unwrap(), SignalState::Red);
    }

    #[test]
    fn missing_second_is_a_gap_error() {
        let mut content = String::from("time_s,movement_id,state\n");
        for t in 0..60 {
            if t == 31 {
                continue;
            }
            content.push_str(&format!("{t},M1,green\n"));
        }
        let f = write_csv(&content);
        let err = parse_signals(f.path()).unwrap_err();
        assert!(err.to_string().contains("gap at 31 s"), "{err}");
    }

    #[test]
    fn unknown_state_token_rejected() {
        let content = "time_s,movement_id,state\n0,M1,blue\n";
        let f = write_csv(content);
        let err = parse_signals(f.path()).unwrap_err();
        assert!(err.to_string().contains("unknown signal state `blue`"), "{err}");
    }

    #[test]
    fn every_movement_must_cover_every_second() {
        // M2 missing second 2 within the global window 0..=2
        let content = "time_s,movement_id,state\n\
                       0,M1,green\n1,M1,green\n2,M1,green\n0,M2,red\n1,M2,red\n";
        let f = write_csv(content);
        assert!(parse_signals(f.path()).is_err());
    }

    #[test]
    fn duplicate_entry_rejected() {
        let content = "time_s,movement_id,state\n0,M1,green\n0,M1,red\n";
        let f = write_csv(content);
        let err = parse_signals(f.path()).unwrap_err();
        assert!(err.to_string().contains("duplicate signal entry"), "{err}");
    }

    #[test]
    fn cycle_boundaries_at_reference_green_onsets() {
        // reference movement is `A` (lexicographically first); green onsets
        // at 3 and 9; starts red so coverage start is not a boundary
        let mut content = String::from("time_s,movement_id,state\n");
        let a = ["red", "red", "red", "green", "green", "yellow", "red", "red", "red", "green", "green", "red"];
        for (t, s) in a.iter().enumerate() {
            content.push_str(&format!("{t},A,{s}\n"));
            content.push_str(&format!("{t},B,red\n"));
        }
        let f = write_csv(&content);
        let tl = parse_signals(f.path()).unwrap();
        assert_eq!(tl.cycle_boundaries(), &[3, 9]);
        assert_eq!(tl.cycles(), vec![(3, 9), (9, 12)]);
    }

    #[test]
    fn coverage_starting_green_counts_as_boundary() {
        let entries: Vec<(i64, String, SignalState)> = (0..5)
            .map(|t| {
                let s = if t < 2 { SignalState::Green } else { SignalState::Red };
                (t, "A".to_string(), s)
            })
            .collect();
        let tl = SignalTimeline::from_entries(&entries).unwrap();
        assert_eq!(tl.cycle_boundaries(), &[0]);
    }

    #[test]
    fn out_of_coverage_query_is_signal_gap() {
        let entries =
            vec![(0, "A".to_string(), SignalState::Green), (1, "A".to_string(), SignalState::Red)];
        let tl = SignalTimeline::from_entries(&entries).unwrap();
        assert!(matches!(tl.state_at("A", 2.0), Err(Error::SignalGap { .. })));
        assert!(matches!(tl.state_at("A", -0.1), Err(Error::SignalGap { .. })));
        assert!(matches!(tl.state_at("Z", 0.5), Err(Error::UnknownMovement(_))));
    }
}
