//! Parsers for every input file format, producing validated domain objects.
//!
//! All parsers are strict about structure (missing columns, duplicate keys,
//! malformed geometry are hard errors). The tracks parser — which consumes
//! noisy upstream tracker output — additionally supports a lenient mode that
//! itemizes value-level rejects (bad confidence, non-finite fields, unknown
//! classes) instead of aborting; every parser accounts for each input row as
//! accepted or rejected, never silently dropped.

pub mod flight_log;
pub mod gcps;
pub mod map;
pub mod signals;
pub mod tracks;

pub use flight_log::{parse_flight_log, FlightLog, FlightSample};
pub use gcps::{parse_gcps, parse_rulers, GcpSet};
pub use map::{
    parse_map, IntersectionMap, LaneDirection, LaneGroup, MapDocument, MovementDef, TurnKind,
};
pub use signals::{parse_signals, SignalState, SignalTimeline};
pub use tracks::{parse_tracks, TracksSchema};

/// Row accounting shared by the parsers: every input row is either accepted
/// or itemized as a rejection.
#[derive(Debug, Clone, Default)]
pub struct ParseReport {
    pub rows_in: usize,
    pub rows_accepted: usize,
    /// `(1-based file line, reason)` for each rejected row.
    pub rejected: Vec<(u64, String)>,
}

impl ParseReport {
    pub fn rows_rejected(&self) -> usize {
        self.rejected.len()
    }

    /// The accounting invariant: in = accepted + rejected.
    pub fn balanced(&self) -> bool {
        self.rows_in == self.rows_accepted + self.rejected.len()
    }
}
