//! Tracking-output CSV parser with a configurable column mapping.

use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::Point2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::ParseReport;
use crate::model::{OrientedBoxState, TrackTable, Trajectory, Unit, VehicleClass};

/// Column mapping for the tracks CSV so outputs of different trackers can be
/// ingested. Defaults match the documented interchange header:
/// `frame,track_id,class,cx_px,cy_px,length_px,width_px,yaw_rad,confidence`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TracksSchema {
    pub frame: String,
    pub track_id: String,
    pub class: String,
    pub cx_px: String,
    pub cy_px: String,
    pub length_px: String,
    pub width_px: String,
    pub yaw_rad: String,
    pub confidence: String,
}

impl Default for TracksSchema {
    fn default() -> Self {
        TracksSchema {
            frame: "frame".into(),
            track_id: "track_id".into(),
            class: "class".into(),
            cx_px: "cx_px".into(),
            cy_px: "cy_px".into(),
            length_px: "length_px".into(),
            width_px: "width_px".into(),
            yaw_rad: "yaw_rad".into(),
            confidence: "confidence".into(),
        }
    }
}

struct ColumnIndex {
    frame: usize,
    track_id: usize,
    class: usize,
    cx: usize,
    cy: usize,
    length: usize,
    width: usize,
    yaw: usize,
    confidence: usize,
}

fn find_column(path: &Path, headers: &csv::StringRecord, name: &str) -> Result<usize> {
    headers.iter().position(|h| h.trim() == name).ok_or_else(|| Error::MissingColumn {
        path: path.to_path_buf(),
        column: name.to_string(),
    })
}

struct ParsedRow {
    line: u64,
    track_id: u64,
    frame: i64,
    class: VehicleClass,
    state: (Point2<f64>, f64, f64, f64, f64), // center, length, width, yaw, confidence
}

fn parse_row(
    record: &csv::StringRecord,
    idx: &ColumnIndex,
    line: u64,
) -> std::result::Result<ParsedRow, String> {
    let field = |i: usize| record.get(i).unwrap_or("").trim();
    let num = |i: usize, name: &str| -> std::result::Result<f64, String> {
        field(i).parse::<f64>().map_err(|_| format!("bad {name} `{}`", field(i)))
    };
    let frame = field(idx.frame)
        .parse::<i64>()
        .map_err(|_| format!("bad frame `{}`", field(idx.frame)))?;
    let track_id = field(idx.track_id)
        .parse::<u64>()
        .map_err(|_| format!("bad track_id `{}`", field(idx.track_id)))?;
    let class = VehicleClass::parse(field(idx.class))
        .map_err(|_| format!("unknown class `{}`", field(idx.class)))?;
    let cx = num(idx.cx, "cx_px")?;
    let cy = num(idx.cy, "cy_px")?;
    let length = num(idx.length, "length_px")?;
    let width = num(idx.width, "width_px")?;
    let yaw = num(idx.yaw, "yaw_rad")?;
    let confidence = num(idx.confidence, "confidence")?;
    if !(cx.is_finite() && cy.is_finite() && yaw.is_finite()) {
        return Err("non-finite pose".into());
    }
    if !(length > 0.0 && width > 0.0 && length.is_finite() && width.is_finite()) {
        return Err(format!("non-positive box {length} x {width}"));
    }
    if !(0.0..=1.0).contains(&confidence) {
        return Err(format!("confidence {confidence} outside [0, 1]"));
    }
    Ok(ParsedRow { line, track_id, frame, class, state: (Point2::new(cx, cy), length, width, yaw, confidence) })
}

/// Parse upstream tracking output into a pixel-space [`TrackTable`].
///
/// Rows may arrive in any order; they are sorted by `(track_id, frame)`.
/// Duplicate `(track_id, frame)` keys are always a hard error. With
/// `strict = false`, rows failing value validation are itemized in the
/// [`ParseReport`] instead of aborting the parse. When a track's rows
/// disagree on the vehicle class, the most frequent class wins (ties to the
/// earliest row).
pub fn parse_tracks(
    path: &Path,
    schema: &TracksSchema,
    scene_id: &str,
    frame_rate_hz: f64,
    strict: bool,
) -> Result<(TrackTable, ParseReport)> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
    let headers = reader.headers()?.clone();
    let idx = ColumnIndex {
        frame: find_column(path, &headers, &schema.frame)?,
        track_id: find_column(path, &headers, &schema.track_id)?,
        class: find_column(path, &headers, &schema.class)?,
        cx: find_column(path, &headers, &schema.cx_px)?,
        cy: find_column(path, &headers, &schema.cy_px)?,
        length: find_column(path, &headers, &schema.length_px)?,
        width: find_column(path, &headers, &schema.width_px)?,
        yaw: find_column(path, &headers, &schema.yaw_rad)?,
        confidence: find_column(path, &headers, &schema.confidence)?,
    };

    let mut report = ParseReport::default();
    let mut rows: Vec<ParsedRow> = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        report.rows_in += 1;
        match parse_row(&record, &idx, line) {
            Ok(row) => {
                report.rows_accepted += 1;
                rows.push(row);
            }
            Err(message) => {
                if strict {
                    return Err(Error::Parse {
                        path: path.to_path_buf(),
                        row: line as usize,
                        message,
                    });
                }
                report.rejected.push((line, message));
            }
        }
    }

    rows.sort_by_key(|r| (r.track_id, r.frame));
    for pair in rows.windows(2) {
        if pair[0].track_id == pair[1].track_id && pair[0].frame == pair[1].frame {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                row: pair[1].line as usize,
                message: format!(
                    "duplicate (track_id, frame) = ({}, {})",
                    pair[1].track_id, pair[1].frame
                ),
            });
        }
    }

    let mut by_track: BTreeMap<u64, Vec<ParsedRow>> = BTreeMap::new();
    for row in rows {
        by_track.entry(row.track_id).or_default().push(row);
    }

    let mut table = TrackTable::new(scene_id, Unit::Pixel, frame_rate_hz)?;
    for (track_id, rows) in by_track {
        // majority class, ties to earliest appearance
        let mut counts: Vec<(VehicleClass, usize, usize)> = Vec::new();
        for (order, row) in rows.iter().enumerate() {
            match counts.iter_mut().find(|(c, _, _)| *c == row.class) {
                Some((_, n, _)) => *n += 1,
                None => counts.push((row.class, 1, order)),
            }
        }
        counts.sort_by(|a, b| b.1.cmp(&a.1).then(a.2.cmp(&b.2)));
        let class = counts[0].0;

        let states: Vec<OrientedBoxState> = rows
            .iter()
            .map(|r| {
                let (center, length, width, yaw, conf) = r.state;
                OrientedBoxState::observed(
                    r.frame,
                    r.frame as f64 / frame_rate_hz,
                    center,
                    length,
                    width,
                    yaw,
                    conf,
                )
            })
            .collect();
        table.insert(Trajectory::new(track_id, class, Unit::Pixel, frame_rate_hz, states)?)?;
    }
    Ok((table, report))
}
