//! Deterministic file exports: trajectory/route/conflict/violation CSVs,
//! heatmap matrices, the metrics report, and the run manifest.
//!
//! Output layout inside the chosen directory:
//! `traj.csv`, `route.csv`, `conflict.csv`, `violation.csv`,
//! `heatmap_<kind>.csv` (one per conflict kind), `metrics.txt`,
//! `manifest.txt`. The manifest is written last so a failed run never leaves
//! a manifest describing files that are missing or truncated.
//!
//! Numbers are printed with six significant digits through one shared
//! formatter; identical inputs therefore produce byte-identical files.
//! Conflict-derived outputs echo the thresholds that produced them in a `#`
//! comment header.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::Write as IoWrite;
use std::path::{Path, PathBuf};

use nalgebra::Point2;

use crate::conflict::{ConflictConfig, ConflictEvent, ConflictKind};
use crate::error::{Error, Result};
use crate::ingest::{SignalState, SignalTimeline};
use crate::metrics::{HeatmapGrid, MetricsSummary, KINDS};
use crate::model::{
    OrientedBoxState, PixelObservation, TrackTable, Trajectory, Unit, VehicleClass,
};
use crate::semantic::{
    signal_state_at, MovementKind, RouteAnnotation, SignalConfig, ViolationEvent, ViolationKind,
    ViolationReport,
};

/// Canonical trajectory CSV header: the ingest columns (raw pixel-space
/// observation, empty on interpolated rows) followed by the derived
/// world-frame columns. `yaw_rad` is the raw pixel-frame yaw; `yaw_m_rad`
/// is the world-frame yaw, which downstream stages need for conflict-angle
/// classification.
pub const TRAJ_HEADER: [&str; 19] = [
    "frame",
    "track_id",
    "class",
    "cx_px",
    "cy_px",
    "length_px",
    "width_px",
    "yaw_rad",
    "confidence",
    "x_m",
    "y_m",
    "speed_mps",
    "accel_mps2",
    "heading_rad",
    "yaw_m_rad",
    "length_m",
    "width_m",
    "interpolated",
    "movement",
];

pub const ROUTE_HEADER: [&str; 6] =
    ["track_id", "entry_edge", "exit_edge", "movement", "t_entry", "t_exit"];

pub const CONFLICT_HEADER: [&str; 11] = [
    "id",
    "track_a",
    "track_b",
    "t_min_ttc",
    "min_ttc",
    "dgt",
    "x",
    "y",
    "delta_psi_deg",
    "kind",
    "n_associated",
];

pub const VIOLATION_HEADER: [&str; 4] = ["track_id", "movement_id", "t_violation", "kind"];

/// Format with `sig` significant digits, trailing zeros trimmed; plain
/// decimal inside a readable range, `<mantissa>e<exp>` outside it.
pub fn fmt_sig(v: f64, sig: u32) -> String {
    assert!(sig >= 1, "need at least one significant digit");
    if v == 0.0 {
        return "0".to_string();
    }
    if !v.is_finite() {
        return format!("{v}");
    }
    let exp = v.abs().log10().floor() as i32;
    // round to `sig` digits first: 999999.5 must print as 1e6, not 1000000
    let pow = 10f64.powi(sig as i32 - 1 - exp);
    let rounded = (v * pow).round() / pow;
    let exp = rounded.abs().log10().floor() as i32;
    if exp < -4 || exp >= sig as i32 {
        let mantissa = rounded / 10f64.powi(exp);
        let m = format!("{:.*}", sig as usize - 1, mantissa);
        let m = m.trim_end_matches('0').trim_end_matches('.');
        format!("{m}e{exp}")
    } else {
        let decimals = (sig as i32 - 1 - exp).max(0) as usize;
        let s = format!("{rounded:.decimals$}");
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        }
    }
}

fn g6(v: f64) -> String {
    fmt_sig(v, 6)
}

fn opt_g6(v: Option<f64>) -> String {
    v.map(g6).unwrap_or_default()
}

/// One line echoing the conflict thresholds, embedded in every
/// conflict-derived output.
pub fn conflict_config_line(cfg: &ConflictConfig) -> String {
    format!(
        "max_ttc_s={} max_dgt_s={} episode_gap_s={} association_radius_m={} scan_radius_m={} \
         bands_deg=rear_end[0,{}) sideswipe[{},{}) angle[{},{}) head_on[{},180]",
        g6(cfg.max_ttc_s),
        g6(cfg.max_dgt_s),
        g6(cfg.episode_gap_s),
        g6(cfg.association_radius_m),
        g6(cfg.scan_radius_m),
        g6(cfg.rear_end_max_deg),
        g6(cfg.rear_end_max_deg),
        g6(cfg.sideswipe_max_deg),
        g6(cfg.sideswipe_max_deg),
        g6(cfg.angle_max_deg),
        g6(cfg.angle_max_deg),
    )
}

fn signal_config_line(cfg: &SignalConfig) -> String {
    format!(
        "offset_s={} violation_on_yellow={}",
        g6(cfg.offset_s),
        cfg.violation_on_yellow
    )
}

/// Everything one export run writes.
pub struct ExportOutputs<'a> {
    pub table: &'a TrackTable,
    pub routes: &'a BTreeMap<u64, RouteAnnotation>,
    pub conflicts: &'a [ConflictEvent],
    pub violations: &'a ViolationReport,
    pub heatmap: &'a HeatmapGrid,
    pub metrics: &'a MetricsSummary,
    pub conflict_cfg: &'a ConflictConfig,
    pub signal_cfg: &'a SignalConfig,
    /// Hex digest of the run configuration, recorded in the manifest.
    pub config_sha256: &'a str,
}

/// What was written: per-file data-row counts plus the config digest.
#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub config_sha256: String,
    /// File name -> data rows (CSV rows excluding headers and comments, or
    /// text lines for reports).
    pub rows: BTreeMap<String, usize>,
}

impl Manifest {
    pub fn to_text(&self) -> String {
        let mut out = String::from("export manifest\n===============\n");
        out.push_str(&format!("config_sha256: {}\n", self.config_sha256));
        for (file, rows) in &self.rows {
            out.push_str(&format!("{file}: {rows} rows\n"));
        }
        out
    }
}

fn require_gap_free(traj: &Trajectory) -> Result<()> {
    for w in traj.states().windows(2) {
        if w[1].frame != w[0].frame + 1 {
            return Err(Error::GapNotInterpolated {
                track_id: traj.track_id,
                frame: w[1].frame,
            });
        }
    }
    Ok(())
}

fn new_csv(path: &Path, comment: Option<&str>) -> Result<csv::Writer<File>> {
    let mut file = File::create(path)?;
    if let Some(line) = comment {
        writeln!(file, "# {line}")?;
    }
    Ok(csv::Writer::from_writer(file))
}

/// Write a trajectory CSV. `require_gap_free` enforces the contiguous-frame
/// invariant and should be set anywhere downstream of interpolation; the
/// georeferencing artifact is written before gaps are filled and is exempt.
pub fn write_traj_csv(
    path: &Path,
    table: &TrackTable,
    routes: &BTreeMap<u64, RouteAnnotation>,
    gap_free: bool,
) -> Result<usize> {
    let mut w = new_csv(path, None)?;
    w.write_record(TRAJ_HEADER)?;
    let mut rows = 0usize;
    for traj in table.iter() {
        if gap_free {
            require_gap_free(traj)?;
        }
        let movement = routes
            .get(&traj.track_id)
            .map(|r| r.kind.name().to_string())
            .unwrap_or_default();
        for s in traj.states() {
            let (cx, cy, lpx, wpx, yaw) = match &s.source_px {
                Some(px) => (
                    g6(px.center.x),
                    g6(px.center.y),
                    g6(px.length),
                    g6(px.width),
                    g6(px.yaw_rad),
                ),
                None => Default::default(),
            };
            w.write_record([
                s.frame.to_string(),
                traj.track_id.to_string(),
                traj.class.name().to_string(),
                cx,
                cy,
                lpx,
                wpx,
                yaw,
                opt_g6(s.confidence),
                g6(s.center.x),
                g6(s.center.y),
                opt_g6(s.speed_mps),
                opt_g6(s.accel_mps2),
                opt_g6(s.heading_rad),
                g6(s.yaw_rad),
                g6(s.length),
                g6(s.width),
                s.interpolated.to_string(),
                movement.clone(),
            ])?;
            rows += 1;
        }
    }
    w.flush()?;
    Ok(rows)
}

pub fn write_route_csv(path: &Path, routes: &BTreeMap<u64, RouteAnnotation>) -> Result<usize> {
    let mut w = new_csv(path, None)?;
    w.write_record(ROUTE_HEADER)?;
    for r in routes.values() {
        w.write_record([
            r.track_id.to_string(),
            r.entry_edge.clone().unwrap_or_default(),
            r.exit_edge.clone().unwrap_or_default(),
            r.kind.name().to_string(),
            opt_g6(r.t_entry),
            opt_g6(r.t_exit),
        ])?;
    }
    w.flush()?;
    Ok(routes.len())
}

pub fn write_conflict_csv(
    path: &Path,
    events: &[ConflictEvent],
    cfg: &ConflictConfig,
) -> Result<usize> {
    let mut w = new_csv(path, Some(&conflict_config_line(cfg)))?;
    w.write_record(CONFLICT_HEADER)?;
    for (id, ev) in events.iter().enumerate() {
        w.write_record([
            id.to_string(),
            ev.pair.0.to_string(),
            ev.pair.1.to_string(),
            g6(ev.t_min_ttc),
            g6(ev.min_ttc_s),
            g6(ev.dgt_s),
            g6(ev.location.x),
            g6(ev.location.y),
            g6(ev.delta_psi_deg),
            ev.kind.name().to_string(),
            ev.associated_ids.len().to_string(),
        ])?;
    }
    w.flush()?;
    Ok(events.len())
}

pub fn write_violation_csv(
    path: &Path,
    report: &ViolationReport,
    cfg: &SignalConfig,
) -> Result<usize> {
    let mut w = new_csv(path, Some(&signal_config_line(cfg)))?;
    w.write_record(VIOLATION_HEADER)?;
    for ev in &report.events {
        w.write_record([
            ev.track_id.to_string(),
            ev.movement_id.clone(),
            g6(ev.t_violation),
            ev.kind.name().to_string(),
        ])?;
    }
    w.flush()?;
    Ok(report.events.len())
}

fn write_heatmap_csv(
    path: &Path,
    grid: &HeatmapGrid,
    kind: crate::conflict::ConflictKind,
    cfg: &ConflictConfig,
) -> Result<usize> {
    let mut file = File::create(path)?;
    writeln!(
        file,
        "# kind={} origin_x_m={} origin_y_m={} cell_m={} width={} height={} rows_top_to_bottom",
        kind.name(),
        g6(grid.origin.x),
        g6(grid.origin.y),
        g6(grid.cell_size_m),
        grid.width,
        grid.height,
    )?;
    writeln!(file, "# {}", conflict_config_line(cfg))?;
    let mut rows = 0usize;
    for iy in (0..grid.height).rev() {
        let row: Vec<String> =
            (0..grid.width).map(|ix| grid.count(kind, ix, iy).to_string()).collect();
        writeln!(file, "{}", row.join(","))?;
        rows += 1;
    }
    file.flush()?;
    Ok(rows)
}

/// Render the metrics report.
pub fn render_metrics(
    s: &MetricsSummary,
    conflict_cfg: &ConflictConfig,
    signal_cfg: &SignalConfig,
) -> String {
    let opt = |v: Option<f64>| v.map(g6).unwrap_or_else(|| "-".to_string());
    let mut out = String::from("scene metrics\n=============\n");
    out.push_str(&format!("scene_id: {}\n", s.scene_id));
    out.push_str(&format!("duration_s: {}\n", g6(s.duration_s)));
    out.push_str(&format!("mv_tracks: {}\n", s.mv_tracks));
    out.push_str(&format!("vru_tracks: {}\n", s.vru_tracks));
    out.push_str(&format!("mv_arrival_per_min: {}\n", g6(s.mv_arrival_per_min)));
    out.push_str(&format!("vru_arrival_per_min: {}\n", g6(s.vru_arrival_per_min)));
    out.push_str(&format!("conflicts_total: {}\n", s.conflicts_total));
    for kind in KINDS {
        out.push_str(&format!(
            "conflicts_{}: {}\n",
            kind.name(),
            s.conflicts_by_kind.get(kind.name()).copied().unwrap_or(0)
        ));
    }
    out.push_str(&format!("conflict_mv_ratio: {}\n", opt(s.conflict_mv_ratio)));
    out.push_str(&format!("n_cmvcp: {}\n", opt(s.n_cmvcp)));
    out.push_str(&format!("vru_context_share: {}\n", opt(s.vru_context_share)));
    out.push_str(&format!("violations_total: {}\n", s.violations_total));
    out.push_str(&format!("conflict thresholds: {}\n", conflict_config_line(conflict_cfg)));
    out.push_str(&format!("signal policy: {}\n", signal_config_line(signal_cfg)));
    if !s.per_cycle.is_empty() {
        out.push_str("\nper-cycle violation rates\n-------------------------\n");
        for (i, c) in s.per_cycle.iter().enumerate() {
            out.push_str(&format!(
                "cycle {} [{}, {}) s: entrants={} straight_rate={} left_rate={}\n",
                i + 1,
                c.start_s,
                c.end_s,
                c.entrants,
                opt(c.straight_rate),
                opt(c.left_rate),
            ));
        }
    }
    out
}

/// Write every output into `out_dir` (created if missing) and finish with
/// the manifest. Returns the manifest that was written.
pub fn export_all(outputs: &ExportOutputs<'_>, out_dir: &Path) -> Result<Manifest> {
    std::fs::create_dir_all(out_dir)?;
    let path = |name: &str| -> PathBuf { out_dir.join(name) };
    let mut rows = BTreeMap::new();

    rows.insert(
        "traj.csv".to_string(),
        write_traj_csv(&path("traj.csv"), outputs.table, outputs.routes, true)?,
    );
    rows.insert("route.csv".to_string(), write_route_csv(&path("route.csv"), outputs.routes)?);
    rows.insert(
        "conflict.csv".to_string(),
        write_conflict_csv(&path("conflict.csv"), outputs.conflicts, outputs.conflict_cfg)?,
    );
    rows.insert(
        "violation.csv".to_string(),
        write_violation_csv(&path("violation.csv"), outputs.violations, outputs.signal_cfg)?,
    );
    for kind in KINDS {
        let name = format!("heatmap_{}.csv", kind.name());
        rows.insert(
            name.clone(),
            write_heatmap_csv(&path(&name), outputs.heatmap, kind, outputs.conflict_cfg)?,
        );
    }
    let metrics_text =
        render_metrics(outputs.metrics, outputs.conflict_cfg, outputs.signal_cfg);
    std::fs::write(path("metrics.txt"), &metrics_text)?;
    rows.insert("metrics.txt".to_string(), metrics_text.lines().count());

    let manifest =
        Manifest { config_sha256: outputs.config_sha256.to_string(), rows };
    std::fs::write(path("manifest.txt"), manifest.to_text())?;
    Ok(manifest)
}

// --- artifact readers -----------------------------------------------------
//
// Stage artifacts use the same schemas as the final exports, so every stage
// can be run (and tested) against files alone. Readers locate columns by
// header name and therefore accept files with extra columns.

fn find_column(path: &Path, headers: &csv::StringRecord, name: &str) -> Result<usize> {
    headers.iter().position(|h| h.trim() == name).ok_or_else(|| Error::MissingColumn {
        path: path.to_path_buf(),
        column: name.to_string(),
    })
}

fn row_error(path: &Path, record: &csv::StringRecord, message: String) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        row: record.position().map(|p| p.line()).unwrap_or(0) as usize,
        message,
    }
}

fn get_num(path: &Path, record: &csv::StringRecord, idx: usize, name: &str) -> Result<f64> {
    let raw = record.get(idx).unwrap_or("");
    raw.parse::<f64>()
        .map_err(|_| row_error(path, record, format!("bad {name} `{raw}`")))
}

fn get_opt_num(
    path: &Path,
    record: &csv::StringRecord,
    idx: usize,
    name: &str,
) -> Result<Option<f64>> {
    match record.get(idx).unwrap_or("") {
        "" => Ok(None),
        _ => get_num(path, record, idx, name).map(Some),
    }
}

fn get_int<T: std::str::FromStr>(
    path: &Path,
    record: &csv::StringRecord,
    idx: usize,
    name: &str,
) -> Result<T> {
    let raw = record.get(idx).unwrap_or("");
    raw.parse::<T>()
        .map_err(|_| row_error(path, record, format!("bad {name} `{raw}`")))
}

/// Read a trajectory artifact back into a meter-frame track table.
pub fn read_traj_csv(path: &Path, scene_id: &str, frame_rate_hz: f64) -> Result<TrackTable> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
    let headers = reader.headers()?.clone();
    let col = |name: &str| find_column(path, &headers, name);
    let (c_frame, c_id, c_class) = (col("frame")?, col("track_id")?, col("class")?);
    let (c_cx, c_cy, c_lpx, c_wpx, c_yawpx) = (
        col("cx_px")?,
        col("cy_px")?,
        col("length_px")?,
        col("width_px")?,
        col("yaw_rad")?,
    );
    let c_conf = col("confidence")?;
    let (c_x, c_y) = (col("x_m")?, col("y_m")?);
    let (c_speed, c_accel, c_heading, c_yaw) =
        (col("speed_mps")?, col("accel_mps2")?, col("heading_rad")?, col("yaw_m_rad")?);
    let (c_len, c_wid, c_interp) = (col("length_m")?, col("width_m")?, col("interpolated")?);

    let mut tracks: BTreeMap<u64, (VehicleClass, Vec<OrientedBoxState>)> = BTreeMap::new();
    for record in reader.records() {
        let record = record?;
        let frame: i64 = get_int(path, &record, c_frame, "frame")?;
        let id: u64 = get_int(path, &record, c_id, "track_id")?;
        let class_raw = record.get(c_class).unwrap_or("");
        let class = VehicleClass::parse(class_raw)
            .map_err(|e| row_error(path, &record, e.to_string()))?;
        let source_px = match record.get(c_cx).unwrap_or("") {
            "" => None,
            _ => Some(PixelObservation {
                center: Point2::new(
                    get_num(path, &record, c_cx, "cx_px")?,
                    get_num(path, &record, c_cy, "cy_px")?,
                ),
                length: get_num(path, &record, c_lpx, "length_px")?,
                width: get_num(path, &record, c_wpx, "width_px")?,
                yaw_rad: get_num(path, &record, c_yawpx, "yaw_rad")?,
            }),
        };
        let interp_raw = record.get(c_interp).unwrap_or("");
        let interpolated: bool = interp_raw
            .parse()
            .map_err(|_| row_error(path, &record, format!("bad interpolated `{interp_raw}`")))?;
        let state = OrientedBoxState {
            frame,
            time_s: frame as f64 / frame_rate_hz,
            center: Point2::new(
                get_num(path, &record, c_x, "x_m")?,
                get_num(path, &record, c_y, "y_m")?,
            ),
            length: get_num(path, &record, c_len, "length_m")?,
            width: get_num(path, &record, c_wid, "width_m")?,
            yaw_rad: get_num(path, &record, c_yaw, "yaw_m_rad")?,
            heading_rad: get_opt_num(path, &record, c_heading, "heading_rad")?,
            speed_mps: get_opt_num(path, &record, c_speed, "speed_mps")?,
            accel_mps2: get_opt_num(path, &record, c_accel, "accel_mps2")?,
            confidence: get_opt_num(path, &record, c_conf, "confidence")?,
            interpolated,
            source_px,
        };
        match tracks.entry(id) {
            std::collections::btree_map::Entry::Vacant(e) => {
                e.insert((class, vec![state]));
            }
            std::collections::btree_map::Entry::Occupied(mut e) => {
                if e.get().0 != class {
                    return Err(row_error(
                        path,
                        &record,
                        format!("track {id} changes class from {} to {class_raw}", e.get().0.name()),
                    ));
                }
                e.get_mut().1.push(state);
            }
        }
    }

    let mut table = TrackTable::new(scene_id, Unit::Meter, frame_rate_hz)?;
    for (id, (class, mut states)) in tracks {
        states.sort_by_key(|s| s.frame);
        table.insert(Trajectory::new(id, class, Unit::Meter, frame_rate_hz, states)?)?;
    }
    Ok(table)
}

/// Read a route artifact. The movement identifier is not part of the CSV
/// schema, so `movement_id` comes back as `None`; downstream consumers key
/// on the movement kind.
pub fn read_route_csv(path: &Path) -> Result<BTreeMap<u64, RouteAnnotation>> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
    let headers = reader.headers()?.clone();
    let col = |name: &str| find_column(path, &headers, name);
    let (c_id, c_entry, c_exit, c_kind, c_tin, c_tout) = (
        col("track_id")?,
        col("entry_edge")?,
        col("exit_edge")?,
        col("movement")?,
        col("t_entry")?,
        col("t_exit")?,
    );
    let mut routes = BTreeMap::new();
    for record in reader.records() {
        let record = record?;
        let track_id: u64 = get_int(path, &record, c_id, "track_id")?;
        let opt_str = |idx: usize| match record.get(idx).unwrap_or("") {
            "" => None,
            s => Some(s.to_string()),
        };
        let kind = MovementKind::parse(record.get(c_kind).unwrap_or(""))
            .map_err(|e| row_error(path, &record, e.to_string()))?;
        routes.insert(
            track_id,
            RouteAnnotation {
                track_id,
                entry_edge: opt_str(c_entry),
                exit_edge: opt_str(c_exit),
                movement_id: None,
                kind,
                t_entry: get_opt_num(path, &record, c_tin, "t_entry")?,
                t_exit: get_opt_num(path, &record, c_tout, "t_exit")?,
            },
        );
    }
    Ok(routes)
}

/// Read a conflict artifact. Associated-object id sets are not stored in the
/// CSV; events come back with empty sets plus the stored per-event counts so
/// the caller can recompute and cross-check them.
pub fn read_conflict_csv(
    path: &Path,
    frame_rate_hz: f64,
) -> Result<(Vec<ConflictEvent>, Vec<usize>)> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_path(path)?;
    let headers = reader.headers()?.clone();
    let col = |name: &str| find_column(path, &headers, name);
    let (c_a, c_b, c_t, c_ttc, c_dgt) =
        (col("track_a")?, col("track_b")?, col("t_min_ttc")?, col("min_ttc")?, col("dgt")?);
    let (c_x, c_y, c_psi, c_kind, c_n) =
        (col("x")?, col("y")?, col("delta_psi_deg")?, col("kind")?, col("n_associated")?);
    let mut events = Vec::new();
    let mut counts = Vec::new();
    for record in reader.records() {
        let record = record?;
        let t_min_ttc = get_num(path, &record, c_t, "t_min_ttc")?;
        let kind = ConflictKind::parse(record.get(c_kind).unwrap_or(""))
            .map_err(|e| row_error(path, &record, e.to_string()))?;
        events.push(ConflictEvent {
            pair: (
                get_int(path, &record, c_a, "track_a")?,
                get_int(path, &record, c_b, "track_b")?,
            ),
            frame_min_ttc: (t_min_ttc * frame_rate_hz).round() as i64,
            t_min_ttc,
            min_ttc_s: get_num(path, &record, c_ttc, "min_ttc")?,
            dgt_s: get_num(path, &record, c_dgt, "dgt")?,
            location: Point2::new(
                get_num(path, &record, c_x, "x")?,
                get_num(path, &record, c_y, "y")?,
            ),
            delta_psi_deg: get_num(path, &record, c_psi, "delta_psi_deg")?,
            kind,
            associated_ids: std::collections::BTreeSet::new(),
        });
        counts.push(get_int(path, &record, c_n, "n_associated")?);
    }
    Ok((events, counts))
}

/// Read a violation artifact. The signal state at entry is reconstructed
/// from the timeline that produced the events; a file with events but no
/// timeline to interpret them is rejected.
pub fn read_violation_csv(
    path: &Path,
    timeline: Option<&SignalTimeline>,
    cfg: &SignalConfig,
) -> Result<ViolationReport> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_path(path)?;
    let headers = reader.headers()?.clone();
    let col = |name: &str| find_column(path, &headers, name);
    let (c_id, c_mov, c_t, c_kind) =
        (col("track_id")?, col("movement_id")?, col("t_violation")?, col("kind")?);
    let mut events = Vec::new();
    for record in reader.records() {
        let record = record?;
        let movement_id = record.get(c_mov).unwrap_or("").to_string();
        let t_violation = get_num(path, &record, c_t, "t_violation")?;
        let kind = ViolationKind::parse(record.get(c_kind).unwrap_or(""))
            .map_err(|e| row_error(path, &record, e.to_string()))?;
        let timeline = timeline.ok_or_else(|| Error::InvalidFile {
            path: path.to_path_buf(),
            message: "violation rows present but no signal timeline is configured".into(),
        })?;
        let signal_state_at_entry: SignalState =
            signal_state_at(timeline, t_violation, &movement_id, cfg)?;
        events.push(ViolationEvent {
            track_id: get_int(path, &record, c_id, "track_id")?,
            movement_id,
            t_violation,
            kind,
            signal_state_at_entry,
        });
    }
    Ok(ViolationReport { events, notes: vec![] })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::grid_density;
    use crate::model::{OrientedBoxState, PixelObservation, Trajectory, Unit, VehicleClass};
    use crate::semantic::{MovementKind, ViolationEvent, ViolationKind};
    use nalgebra::Point2;
    use std::collections::BTreeSet;

    const RATE: f64 = 10.0;

    // --- fmt_sig ---

    #[test]
    fn six_significant_digits_cover_the_usual_ranges() {
        let cases = [
            (0.0, "0"),
            (-0.0, "0"),
            (1.5, "1.5"),
            (0.9000000000000000222, "0.9"),
            (-2.5, "-2.5"),
            (10.0, "10"),
            (123.4564999, "123.456"),
            (1234567.0, "1.23457e6"),
            (0.0000123456789, "1.23457e-5"),
            (0.0001, "0.0001"),
            (999999.5, "1e6"),
            (2.7, "2.7"),
            (90.0, "90"),
            (-1.025, "-1.025"),
        ];
        for (v, want) in cases {
            assert_eq!(fmt_sig(v, 6), want, "formatting {v}");
        }
    }

    #[test]
    fn formatted_values_parse_back_within_six_digits() {
        let values = [3.14159265, -0.002718, 42.0, 6.02e23, 1.6e-19, 0.5];
        for v in values {
            let parsed: f64 = fmt_sig(v, 6).parse().unwrap();
            assert!(
                ((parsed - v) / v).abs() < 1e-5,
                "{v} -> {} -> {parsed}",
                fmt_sig(v, 6)
            );
        }
    }

    // --- fixtures ---

    fn state(frame: i64, x: f64, y: f64, with_px: bool) -> OrientedBoxState {
        OrientedBoxState {
            frame,
            time_s: frame as f64 / RATE,
            center: Point2::new(x, y),
            length: 4.0,
            width: 2.0,
            yaw_rad: 0.25,
            heading_rad: Some(0.25),
            speed_mps: Some(8.0),
            accel_mps2: Some(0.1),
            confidence: with_px.then_some(0.9),
            interpolated: !with_px,
            source_px: with_px.then_some(PixelObservation {
                center: Point2::new(100.0 + x, 200.0 + y),
                length: 80.0,
                width: 40.0,
                yaw_rad: 1.25,
            }),
        }
    }

    fn small_scene() -> (TrackTable, BTreeMap<u64, RouteAnnotation>, Vec<ConflictEvent>, ViolationReport)
    {
        let mut table = TrackTable::new("export-test", Unit::Meter, RATE).unwrap();
        let states = (0..5).map(|f| state(f, f as f64, 0.0, f != 2)).collect();
        table
            .insert(Trajectory::new(1, VehicleClass::Car, Unit::Meter, RATE, states).unwrap())
            .unwrap();
        let states2 = (0..5).map(|f| state(f, f as f64, 5.0, true)).collect();
        table
            .insert(Trajectory::new(2, VehicleClass::Car, Unit::Meter, RATE, states2).unwrap())
            .unwrap();

        let mut routes = BTreeMap::new();
        routes.insert(
            1,
            RouteAnnotation {
                track_id: 1,
                entry_edge: Some("north".into()),
                exit_edge: Some("south".into()),
                movement_id: Some("NS".into()),
                kind: MovementKind::Straight,
                t_entry: Some(1.8),
                t_exit: Some(5.2),
            },
        );
        routes.insert(
            2,
            RouteAnnotation {
                track_id: 2,
                entry_edge: None,
                exit_edge: None,
                movement_id: None,
                kind: MovementKind::Anomalous,
                t_entry: None,
                t_exit: None,
            },
        );

        let conflicts = vec![ConflictEvent {
            pair: (1, 2),
            frame_min_ttc: 10,
            t_min_ttc: 1.0,
            min_ttc_s: 0.15,
            dgt_s: 2.7,
            location: Point2::new(-1.025, -2.1),
            delta_psi_deg: 90.0,
            kind: ConflictKind::Angle,
            associated_ids: BTreeSet::new(),
        }];

        let violations = ViolationReport {
            events: vec![ViolationEvent {
                track_id: 1,
                movement_id: "NS".into(),
                t_violation: 1.8,
                kind: ViolationKind::RedLightRunning,
                signal_state_at_entry: SignalState::Red,
            }],
            notes: vec![],
        };
        (table, routes, conflicts, violations)
    }

    fn export_scene(dir: &Path) -> Manifest {
        let (table, routes, conflicts, violations) = small_scene();
        let heatmap = grid_density(
            &conflicts,
            Point2::new(-5.0, -5.0),
            Point2::new(5.0, 5.0),
            None,
        )
        .unwrap();
        let metrics = crate::metrics::summarize(
            &table,
            &conflicts,
            &violations.events,
            &routes,
            None,
            60.0,
            10.0,
        )
        .unwrap();
        let outputs = ExportOutputs {
            table: &table,
            routes: &routes,
            conflicts: &conflicts,
            violations: &violations,
            heatmap: &heatmap,
            metrics: &metrics,
            conflict_cfg: &ConflictConfig::default(),
            signal_cfg: &SignalConfig::default(),
            config_sha256: "deadbeefdeadbeef",
        };
        export_all(&outputs, dir).unwrap()
    }

    #[test]
    fn golden_conflict_and_violation_files() {
        let dir = tempfile::tempdir().unwrap();
        export_scene(dir.path());

        let conflict = std::fs::read_to_string(dir.path().join("conflict.csv")).unwrap();
        let want_conflict = "\
# max_ttc_s=2 max_dgt_s=4 episode_gap_s=3 association_radius_m=10 scan_radius_m=50 \
bands_deg=rear_end[0,30) sideswipe[30,85) angle[85,150) head_on[150,180]
id,track_a,track_b,t_min_ttc,min_ttc,dgt,x,y,delta_psi_deg,kind,n_associated
0,1,2,1,0.15,2.7,-1.025,-2.1,90,angle,0
";
        assert_eq!(conflict, want_conflict);

        let violation = std::fs::read_to_string(dir.path().join("violation.csv")).unwrap();
        let want_violation = "\
# offset_s=0 violation_on_yellow=false
track_id,movement_id,t_violation,kind
1,NS,1.8,red_light_running
";
        assert_eq!(violation, want_violation);

        let route = std::fs::read_to_string(dir.path().join("route.csv")).unwrap();
        let want_route = "\
track_id,entry_edge,exit_edge,movement,t_entry,t_exit
1,north,south,straight,1.8,5.2
2,,,anomalous,,
";
        assert_eq!(route, want_route);
    }

    #[test]
    fn traj_rows_mirror_ingest_and_flag_interpolation() {
        let dir = tempfile::tempdir().unwrap();
        export_scene(dir.path());
        let text = std::fs::read_to_string(dir.path().join("traj.csv")).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), TRAJ_HEADER.join(","));
        let rows: Vec<&str> = lines.collect();
        assert_eq!(rows.len(), 10);
        // frame 0 of track 1 carries its raw pixel observation
        assert_eq!(
            rows[0],
            "0,1,car,100,200,80,40,1.25,0.9,0,0,8,0.1,0.25,0.25,4,2,false,straight"
        );
        // frame 2 of track 1 was interpolated: raw block and confidence empty
        assert_eq!(rows[2], "2,1,car,,,,,,,2,0,8,0.1,0.25,0.25,4,2,true,straight");
        // track 2 has no matched movement
        assert!(rows[5].ends_with(",false,anomalous"));
    }

    #[test]
    fn rerunning_the_export_is_byte_identical() {
        let d1 = tempfile::tempdir().unwrap();
        let d2 = tempfile::tempdir().unwrap();
        let m1 = export_scene(d1.path());
        let m2 = export_scene(d2.path());
        assert_eq!(m1, m2);
        for name in m1.rows.keys().chain([&"manifest.txt".to_string()]) {
            let a = std::fs::read(d1.path().join(name)).unwrap();
            let b = std::fs::read(d2.path().join(name)).unwrap();
            assert_eq!(a, b, "{name} differs between runs");
        }
    }

    #[test]
    fn manifest_counts_match_actual_file_lines() {
        let dir = tempfile::tempdir().unwrap();
        let manifest = export_scene(dir.path());
        for (name, &rows) in &manifest.rows {
            let text = std::fs::read_to_string(dir.path().join(name)).unwrap();
            let data_lines = text
                .lines()
                .filter(|l| !l.starts_with('#'))
                .count()
                // CSVs have one header line; text reports count every line
                - usize::from(name.ends_with(".csv") && !name.starts_with("heatmap_"));
            assert_eq!(rows, data_lines, "{name}");
        }
        // manifest itself lists every produced file
        let files: Vec<String> = std::fs::read_dir(dir.path())
            .unwrap()
            .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
            .filter(|n| n != "manifest.txt")
            .collect();
        for f in files {
            assert!(manifest.rows.contains_key(&f), "{f} missing from manifest");
        }
    }

    #[test]
    fn empty_scene_writes_headers_and_zero_counts() {
        let dir = tempfile::tempdir().unwrap();
        let table = TrackTable::new("empty", Unit::Meter, RATE).unwrap();
        let routes = BTreeMap::new();
        let heatmap =
            grid_density(&[], Point2::new(0.0, 0.0), Point2::new(4.0, 4.0), None).unwrap();
        let metrics =
            crate::metrics::summarize(&table, &[], &[], &routes, None, 60.0, 10.0).unwrap();
        let outputs = ExportOutputs {
            table: &table,
            routes: &routes,
            conflicts: &[],
            violations: &ViolationReport::default(),
            heatmap: &heatmap,
            metrics: &metrics,
            conflict_cfg: &ConflictConfig::default(),
            signal_cfg: &SignalConfig::default(),
            config_sha256: "0000",
        };
        let manifest = export_all(&outputs, dir.path()).unwrap();
        assert_eq!(manifest.rows["traj.csv"], 0);
        assert_eq!(manifest.rows["conflict.csv"], 0);
        assert_eq!(manifest.rows["violation.csv"], 0);
        let conflict = std::fs::read_to_string(dir.path().join("conflict.csv")).unwrap();
        assert!(conflict.lines().count() == 2, "comment + header only: {conflict}");
        // heatmaps still carry their full (all-zero) matrices
        assert_eq!(manifest.rows["heatmap_angle.csv"], 4);
    }

    #[test]
    fn unwritable_destination_fails_before_the_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let blocker = dir.path().join("blocker");
        std::fs::write(&blocker, "a file, not a directory").unwrap();
        let table = TrackTable::new("x", Unit::Meter, RATE).unwrap();
        let routes = BTreeMap::new();
        let heatmap =
            grid_density(&[], Point2::new(0.0, 0.0), Point2::new(4.0, 4.0), None).unwrap();
        let metrics =
            crate::metrics::summarize(&table, &[], &[], &routes, None, 60.0, 10.0).unwrap();
        let outputs = ExportOutputs {
            table: &table,
            routes: &routes,
            conflicts: &[],
            violations: &ViolationReport::default(),
            heatmap: &heatmap,
            metrics: &metrics,
            conflict_cfg: &ConflictConfig::default(),
            signal_cfg: &SignalConfig::default(),
            config_sha256: "0000",
        };
        let err = export_all(&outputs, &blocker.join("out")).unwrap_err();
        assert!(matches!(err, Error::Io(_)));
        assert!(!blocker.join("out").join("manifest.txt").exists());
    }

    #[test]
    fn gapped_trajectories_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let mut table = TrackTable::new("gap", Unit::Meter, RATE).unwrap();
        let states = vec![state(0, 0.0, 0.0, true), state(2, 2.0, 0.0, true)];
        table
            .insert(Trajectory::new(1, VehicleClass::Car, Unit::Meter, RATE, states).unwrap())
            .unwrap();
        let routes = BTreeMap::new();
        let heatmap =
            grid_density(&[], Point2::new(0.0, 0.0), Point2::new(4.0, 4.0), None).unwrap();
        let metrics =
            crate::metrics::summarize(&table, &[], &[], &routes, None, 60.0, 10.0).unwrap();
        let outputs = ExportOutputs {
            table: &table,
            routes: &routes,
            conflicts: &[],
            violations: &ViolationReport::default(),
            heatmap: &heatmap,
            metrics: &metrics,
            conflict_cfg: &ConflictConfig::default(),
            signal_cfg: &SignalConfig::default(),
            config_sha256: "0000",
        };
        let err = export_all(&outputs, dir.path()).unwrap_err();
        assert!(matches!(err, Error::GapNotInterpolated { track_id: 1, frame: 2 }));
    }

    #[test]
    fn artifacts_round_trip_through_their_readers() {
        let dir = tempfile::tempdir().unwrap();
        export_scene(dir.path());
        let (table, routes, conflicts, violations) = small_scene();

        let table2 = read_traj_csv(&dir.path().join("traj.csv"), "export-test", RATE).unwrap();
        assert_eq!(table, table2);

        let routes2 = read_route_csv(&dir.path().join("route.csv")).unwrap();
        assert_eq!(routes2.len(), routes.len());
        for (id, r) in &routes {
            let got = &routes2[id];
            assert_eq!(got.kind, r.kind);
            assert_eq!(got.entry_edge, r.entry_edge);
            assert_eq!(got.exit_edge, r.exit_edge);
            assert_eq!(got.t_entry, r.t_entry);
            assert_eq!(got.t_exit, r.t_exit);
            assert_eq!(got.movement_id, None, "identifier is not stored in the CSV");
        }

        let (conflicts2, counts) =
            read_conflict_csv(&dir.path().join("conflict.csv"), RATE).unwrap();
        assert_eq!(conflicts2.len(), 1);
        let (got, want) = (&conflicts2[0], &conflicts[0]);
        assert_eq!(got.pair, want.pair);
        assert_eq!(got.frame_min_ttc, want.frame_min_ttc);
        assert_eq!(got.t_min_ttc, want.t_min_ttc);
        assert_eq!(got.min_ttc_s, want.min_ttc_s);
        assert_eq!(got.dgt_s, want.dgt_s);
        assert_eq!(got.location, want.location);
        assert_eq!(got.kind, want.kind);
        assert_eq!(counts, vec![0]);

        let timeline = crate::ingest::SignalTimeline::from_entries(&[
            (0, "NS".into(), SignalState::Red),
            (1, "NS".into(), SignalState::Red),
            (2, "NS".into(), SignalState::Red),
        ])
        .unwrap();
        let violations2 = read_violation_csv(
            &dir.path().join("violation.csv"),
            Some(&timeline),
            &SignalConfig::default(),
        )
        .unwrap();
        assert_eq!(violations2.events, violations.events);
    }

    #[test]
    fn violation_rows_without_a_timeline_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        export_scene(dir.path());
        let err = read_violation_csv(
            &dir.path().join("violation.csv"),
            None,
            &SignalConfig::default(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::InvalidFile { .. }), "{err}");
    }

    #[test]
    fn heatmap_matrix_is_written_top_row_first() {
        let dir = tempfile::tempdir().unwrap();
        let events = vec![ConflictEvent {
            pair: (1, 2),
            frame_min_ttc: 0,
            t_min_ttc: 0.0,
            min_ttc_s: 1.0,
            dgt_s: 1.0,
            location: Point2::new(0.5, 2.5), // cell (0, 2) of a 3x3 grid
            delta_psi_deg: 0.0,
            kind: ConflictKind::RearEnd,
            associated_ids: BTreeSet::new(),
        }];
        let heatmap =
            grid_density(&events, Point2::new(0.0, 0.0), Point2::new(3.0, 3.0), None).unwrap();
        let table = TrackTable::new("h", Unit::Meter, RATE).unwrap();
        let routes = BTreeMap::new();
        let metrics =
            crate::metrics::summarize(&table, &[], &[], &routes, None, 60.0, 10.0).unwrap();
        let outputs = ExportOutputs {
            table: &table,
            routes: &routes,
            conflicts: &events,
            violations: &ViolationReport::default(),
            heatmap: &heatmap,
            metrics: &metrics,
            conflict_cfg: &ConflictConfig::default(),
            signal_cfg: &SignalConfig::default(),
            config_sha256: "0000",
        };
        export_all(&outputs, dir.path()).unwrap();
        let text = std::fs::read_to_string(dir.path().join("heatmap_rear_end.csv")).unwrap();
        let data: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
        // top row is iy = 2, which holds the event in column 0
        assert_eq!(data, vec!["1,0,0", "0,0,0", "0,0,0"]);
    }
}
