//! Stage orchestration. Each subcommand body lives here as a library
//! function; the CLI is a thin wrapper.
//!
//! Stages communicate exclusively through files in the output directory
//! (the same CSV schemas as the final exports), so running `all` is
//! byte-identical to running the stage subcommands one at a time, and any
//! stage can be re-run or tested against existing artifacts. A missing
//! prior-stage artifact fails fast, naming the file and the stage that
//! needs it.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use nalgebra::Point2;

use crate::config::PipelineConfig;
use crate::conflict::attach_associated;
use crate::dedup::run_filters;
use crate::error::{Error, Result};
use crate::export::{
    export_all, read_conflict_csv, read_route_csv, read_traj_csv, read_violation_csv,
    write_conflict_csv, write_route_csv, write_traj_csv, write_violation_csv, ExportOutputs,
    Manifest,
};
use crate::georef::{
    build_local_frame, calibration_report, fit_homography, georeference_table, CameraModel,
    GeoChain, LocalFrame,
};
use crate::ingest::{
    parse_flight_log, parse_gcps, parse_map, parse_signals, parse_tracks, IntersectionMap,
    SignalTimeline,
};
use crate::kinematics::smooth_table;
use crate::metrics::{grid_density, summarize};
use crate::model::TrackTable;
use crate::semantic::{assign_routes, scan_violations, ViolationReport};

/// Pipeline stages, in execution order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Georef,
    Smooth,
    Filter,
    Conflicts,
    Match,
    Metrics,
    All,
}

/// What one stage did, for the caller to log.
#[derive(Debug, Clone)]
pub struct StageSummary {
    pub stage: &'static str,
    pub lines: Vec<String>,
}

impl StageSummary {
    fn new(stage: &'static str) -> Self {
        StageSummary { stage, lines: Vec::new() }
    }

    fn push(&mut self, line: impl Into<String>) {
        self.lines.push(line.into());
    }
}

/// File locations of the stage artifacts inside the output directory.
pub struct Artifacts {
    out_dir: PathBuf,
}

impl Artifacts {
    pub fn new(out_dir: &Path) -> Self {
        Artifacts { out_dir: out_dir.to_path_buf() }
    }

    pub fn georef_traj(&self) -> PathBuf {
        self.out_dir.join("georef_traj.csv")
    }

    pub fn smooth_traj(&self) -> PathBuf {
        self.out_dir.join("smooth_traj.csv")
    }

    pub fn filter_traj(&self) -> PathBuf {
        self.out_dir.join("filter_traj.csv")
    }

    pub fn conflicts(&self) -> PathBuf {
        self.out_dir.join("conflict.csv")
    }

    pub fn routes(&self) -> PathBuf {
        self.out_dir.join("route.csv")
    }

    pub fn violations(&self) -> PathBuf {
        self.out_dir.join("violation.csv")
    }

    pub fn calibration(&self) -> PathBuf {
        self.out_dir.join("calibration.txt")
    }
}

fn require(stage: &'static str, path: &Path) -> Result<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(Error::MissingArtifact { stage, path: path.to_path_buf() })
    }
}

fn enforce_strict(stage: &'static str, warnings: &[String], strict: bool) -> Result<()> {
    if strict && !warnings.is_empty() {
        return Err(Error::Strict { stage, n: warnings.len(), first: warnings[0].clone() });
    }
    Ok(())
}

/// Build the camera from config, pulling the altitude from the flight log
/// when the config leaves it out.
pub fn build_camera(cfg: &PipelineConfig) -> Result<CameraModel> {
    let cam = &cfg.camera;
    let altitude_m = match cam.altitude_m {
        Some(a) => a,
        None => match &cfg.paths.flight_log {
            Some(p) => parse_flight_log(p)?.mean_altitude_m(),
            None => {
                return Err(Error::Config(
                    "camera.altitude_m is absent and paths.flight_log is not set".into(),
                ))
            }
        },
    };
    let gsd = cam
        .gsd_m_per_px
        .unwrap_or_else(|| CameraModel::implied_gsd(altitude_m, cam.fx, cam.fy));
    CameraModel::new(
        cam.fx,
        cam.fy,
        cam.cx,
        cam.cy,
        cam.dist,
        gsd,
        altitude_m,
        cam.image_width_px,
        cam.image_height_px,
    )
}

/// Parse the map and project it into the local frame anchored at the inner
/// polygon's centroid.
pub fn load_local_map(cfg: &PipelineConfig) -> Result<(IntersectionMap, LocalFrame)> {
    let doc = parse_map(&cfg.paths.map)?;
    let ring: Vec<(f64, f64)> =
        doc.inner_polygon.exterior().coords().map(|c| (c.x, c.y)).collect();
    let frame = build_local_frame(&ring)?;
    Ok((doc.to_local(&frame)?, frame))
}

fn load_timeline(cfg: &PipelineConfig) -> Result<Option<SignalTimeline>> {
    match &cfg.paths.signals {
        Some(p) => Ok(Some(parse_signals(p)?)),
        None => Ok(None),
    }
}

fn ensure_out_dir(cfg: &PipelineConfig) -> Result<Artifacts> {
    std::fs::create_dir_all(&cfg.paths.out_dir)?;
    Ok(Artifacts::new(&cfg.paths.out_dir))
}

const NO_ROUTES: &BTreeMap<u64, crate::semantic::RouteAnnotation> = &BTreeMap::new();

/// Stage 1: parse pixel tracks, calibrate, and project into local meters.
pub fn run_georef(cfg: &PipelineConfig, strict: bool) -> Result<StageSummary> {
    let art = ensure_out_dir(cfg)?;
    let mut sum = StageSummary::new("georef");

    let (pixels, parse_report) = parse_tracks(
        &cfg.paths.tracks,
        &cfg.tracks.schema,
        &cfg.tracks.scene_id,
        cfg.tracks.frame_rate_hz,
        strict,
    )?;
    sum.push(format!(
        "tracks: {} rows in, {} accepted, {} rejected",
        parse_report.rows_in,
        parse_report.rows_accepted,
        parse_report.rows_rejected()
    ));

    let cam = build_camera(cfg)?;
    let gcps = parse_gcps(&cfg.paths.gcps)?;
    let undistorted: Vec<crate::georef::Gcp> = gcps
        .points()
        .iter()
        .map(|g| Ok(crate::georef::Gcp { px: cam.undistort(g.px)?, ..*g }))
        .collect::<Result<_>>()?;
    let hom = fit_homography(&undistorted)?;
    sum.push(format!(
        "calibration: {} control points, homography rms {:.3} m",
        undistorted.len(),
        hom.rms_residual_m
    ));

    let (_, frame) = load_local_map(cfg)?;
    let chain = GeoChain::new(cam, hom, frame);
    std::fs::write(art.calibration(), calibration_report(&chain))?;

    let (world, report) = georeference_table(&pixels, &chain)?;
    sum.push(format!(
        "projected {} tracks ({} dropped, {} flagged, mean scale {:.4} m/px)",
        world.len(),
        report.dropped_tracks.len(),
        report.flagged_tracks.len(),
        report.mean_scale_m_per_px
    ));
    let mut warnings: Vec<String> = report
        .dropped_points
        .iter()
        .map(|(id, f, why)| format!("track {id} frame {f}: {why}"))
        .collect();
    warnings.extend(report.dropped_tracks.iter().map(|(id, why)| format!("track {id}: {why}")));
    enforce_strict("georef", &warnings, strict)?;

    let rows = write_traj_csv(&art.georef_traj(), &world, NO_ROUTES, false)?;
    sum.push(format!("wrote {} ({rows} rows)", art.georef_traj().display()));
    Ok(sum)
}

/// Stage 2: interpolate gaps, smooth kinematics, refine dimensions and yaw.
pub fn run_smooth(cfg: &PipelineConfig, strict: bool) -> Result<StageSummary> {
    let art = ensure_out_dir(cfg)?;
    let mut sum = StageSummary::new("smooth");
    require("smooth", &art.georef_traj())?;

    let table =
        read_traj_csv(&art.georef_traj(), &cfg.tracks.scene_id, cfg.tracks.frame_rate_hz)?;
    let (smoothed, report) = smooth_table(&table, &cfg.smoother)?;
    sum.push(format!(
        "smoothed {} tracks -> {} pieces, {} gap states filled, {} split at long gaps",
        table.len(),
        smoothed.len(),
        report.filled,
        report.splits.len()
    ));
    enforce_strict("smooth", &report.warnings, strict)?;

    let rows = write_traj_csv(&art.smooth_traj(), &smoothed, NO_ROUTES, true)?;
    sum.push(format!("wrote {} ({rows} rows)", art.smooth_traj().display()));
    Ok(sum)
}

/// Stage 3: remove implausible and duplicated tracks.
pub fn run_filter(cfg: &PipelineConfig, _strict: bool) -> Result<StageSummary> {
    let art = ensure_out_dir(cfg)?;
    let mut sum = StageSummary::new("filter");
    require("filter", &art.smooth_traj())?;

    let table =
        read_traj_csv(&art.smooth_traj(), &cfg.tracks.scene_id, cfg.tracks.frame_rate_hz)?;
    let (map, _) = load_local_map(cfg)?;
    let (kept, report) = run_filters(&table, &cfg.filter, Some(&map))?;
    let mut by_reason: BTreeMap<&'static str, usize> = BTreeMap::new();
    for r in &report.removed {
        *by_reason.entry(r.reason.name()).or_insert(0) += 1;
    }
    let detail: Vec<String> =
        by_reason.iter().map(|(reason, n)| format!("{reason} {n}")).collect();
    sum.push(format!(
        "kept {} of {} tracks; removed {} ({})",
        kept.len(),
        table.len(),
        report.removed.len(),
        if detail.is_empty() { "none".to_string() } else { detail.join(", ") }
    ));

    let rows = write_traj_csv(&art.filter_traj(), &kept, NO_ROUTES, true)?;
    sum.push(format!("wrote {} ({rows} rows)", art.filter_traj().display()));
    Ok(sum)
}

/// Stage 4: scan for conflicts and validate them into events.
pub fn run_conflicts(cfg: &PipelineConfig, _strict: bool) -> Result<StageSummary> {
    let art = ensure_out_dir(cfg)?;
    let mut sum = StageSummary::new("conflicts");
    require("conflicts", &art.filter_traj())?;

    let table =
        read_traj_csv(&art.filter_traj(), &cfg.tracks.scene_id, cfg.tracks.frame_rate_hz)?;
    let events = crate::conflict::extract_conflicts(&table, &cfg.conflict)?;
    let mut by_kind: BTreeMap<&'static str, usize> = BTreeMap::new();
    for ev in &events {
        *by_kind.entry(ev.kind.name()).or_insert(0) += 1;
    }
    let detail: Vec<String> = by_kind.iter().map(|(k, n)| format!("{k} {n}")).collect();
    sum.push(format!(
        "{} conflict event(s){}",
        events.len(),
        if detail.is_empty() { String::new() } else { format!(" ({})", detail.join(", ")) }
    ));

    let rows = write_conflict_csv(&art.conflicts(), &events, &cfg.conflict)?;
    sum.push(format!("wrote {} ({rows} rows)", art.conflicts().display()));
    Ok(sum)
}

/// Stage 5: assign turning movements and scan signal violations.
pub fn run_match(cfg: &PipelineConfig, _strict: bool) -> Result<StageSummary> {
    let art = ensure_out_dir(cfg)?;
    let mut sum = StageSummary::new("match");
    require("match", &art.filter_traj())?;

    let table =
        read_traj_csv(&art.filter_traj(), &cfg.tracks.scene_id, cfg.tracks.frame_rate_hz)?;
    let (map, _) = load_local_map(cfg)?;
    let routes = assign_routes(&table, &map)?;
    let mut by_kind: BTreeMap<&'static str, usize> = BTreeMap::new();
    for r in routes.values() {
        *by_kind.entry(r.kind.name()).or_insert(0) += 1;
    }
    let detail: Vec<String> = by_kind.iter().map(|(k, n)| format!("{k} {n}")).collect();
    sum.push(format!(
        "assigned {} route(s){}",
        routes.len(),
        if detail.is_empty() { String::new() } else { format!(" ({})", detail.join(", ")) }
    ));
    let rows = write_route_csv(&art.routes(), &routes)?;
    sum.push(format!("wrote {} ({rows} rows)", art.routes().display()));

    let violations = match load_timeline(cfg)? {
        Some(timeline) => {
            let report = scan_violations(&routes, &table, &map, &timeline, &cfg.signal)?;
            sum.push(format!(
                "{} violation(s), {} note(s)",
                report.events.len(),
                report.notes.len()
            ));
            report
        }
        None => {
            sum.push("no signal timeline configured; violation scan skipped");
            ViolationReport::default()
        }
    };
    let rows = write_violation_csv(&art.violations(), &violations, &cfg.signal)?;
    sum.push(format!("wrote {} ({rows} rows)", art.violations().display()));
    Ok(sum)
}

/// Covered time span of the scene: configured duration if set, otherwise
/// the covered frame range over all tracks times the frame period.
fn scene_duration_s(cfg: &PipelineConfig, table: &TrackTable) -> f64 {
    if let Some(d) = cfg.metrics.duration_s {
        return d;
    }
    let mut lo = i64::MAX;
    let mut hi = i64::MIN;
    for traj in table.iter() {
        for s in traj.states() {
            lo = lo.min(s.frame);
            hi = hi.max(s.frame);
        }
    }
    if lo > hi {
        1.0
    } else {
        (hi - lo + 1) as f64 / cfg.tracks.frame_rate_hz
    }
}

/// Heatmap extent: configured if set, otherwise the integer-aligned bounding
/// box of all track centers (degenerate axes widened to one cell).
fn heatmap_extent(cfg: &PipelineConfig, table: &TrackTable) -> (Point2<f64>, Point2<f64>) {
    if let (Some(lo), Some(hi)) = (cfg.metrics.heatmap_min_m, cfg.metrics.heatmap_max_m) {
        return (Point2::new(lo[0], lo[1]), Point2::new(hi[0], hi[1]));
    }
    let mut min = Point2::new(f64::INFINITY, f64::INFINITY);
    let mut max = Point2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
    for traj in table.iter() {
        for s in traj.states() {
            min.x = min.x.min(s.center.x);
            min.y = min.y.min(s.center.y);
            max.x = max.x.max(s.center.x);
            max.y = max.y.max(s.center.y);
        }
    }
    if !min.x.is_finite() {
        return (Point2::new(0.0, 0.0), Point2::new(1.0, 1.0));
    }
    let min = Point2::new(min.x.floor(), min.y.floor());
    let mut max = Point2::new(max.x.ceil(), max.y.ceil());
    if min.x >= max.x {
        max.x = min.x + 1.0;
    }
    if min.y >= max.y {
        max.y = min.y + 1.0;
    }
    (min, max)
}

/// Stage 6: compute scene metrics and write every final output plus the
/// manifest.
pub fn run_metrics(cfg: &PipelineConfig, _strict: bool) -> Result<(StageSummary, Manifest)> {
    let art = ensure_out_dir(cfg)?;
    let mut sum = StageSummary::new("metrics");
    for input in [art.filter_traj(), art.conflicts(), art.routes(), art.violations()] {
        require("metrics", &input)?;
    }

    let table =
        read_traj_csv(&art.filter_traj(), &cfg.tracks.scene_id, cfg.tracks.frame_rate_hz)?;
    let routes = read_route_csv(&art.routes())?;
    let (mut events, stored_counts) =
        read_conflict_csv(&art.conflicts(), cfg.tracks.frame_rate_hz)?;
    attach_associated(&mut events, &table, cfg.conflict.association_radius_m)?;
    for (ev, stored) in events.iter().zip(&stored_counts) {
        if ev.associated_ids.len() != *stored {
            return Err(Error::InvalidFile {
                path: art.conflicts(),
                message: format!(
                    "event {:?} lists {} associated object(s) but {} were recomputed; \
                     the artifact is stale — re-run the conflicts stage",
                    ev.pair,
                    stored,
                    ev.associated_ids.len()
                ),
            });
        }
    }
    let timeline = load_timeline(cfg)?;
    let violations = read_violation_csv(&art.violations(), timeline.as_ref(), &cfg.signal)?;

    let duration_s = scene_duration_s(cfg, &table);
    let (ext_min, ext_max) = heatmap_extent(cfg, &table);
    let heatmap = grid_density(&events, ext_min, ext_max, None)?;
    let summary = summarize(
        &table,
        &events,
        &violations.events,
        &routes,
        timeline.as_ref(),
        duration_s,
        cfg.conflict.association_radius_m,
    )?;
    sum.push(format!(
        "scene `{}`: {:.1} s, {} MV / {} VRU tracks, {} conflict(s), {} violation(s)",
        summary.scene_id,
        summary.duration_s,
        summary.mv_tracks,
        summary.vru_tracks,
        summary.conflicts_total,
        summary.violations_total
    ));

    let outputs = ExportOutputs {
        table: &table,
        routes: &routes,
        conflicts: &events,
        violations: &violations,
        heatmap: &heatmap,
        metrics: &summary,
        conflict_cfg: &cfg.conflict,
        signal_cfg: &cfg.signal,
        config_sha256: &cfg.sha256_hex()?,
    };
    let manifest = export_all(&outputs, &cfg.paths.out_dir)?;
    sum.push(format!(
        "wrote {} final file(s) + manifest to {}",
        manifest.rows.len(),
        cfg.paths.out_dir.display()
    ));
    Ok((sum, manifest))
}

/// Run one subcommand (or `all`) and collect per-stage summaries.
pub fn run(stage: Stage, cfg: &PipelineConfig, strict: bool) -> Result<Vec<StageSummary>> {
    cfg.validate()?;
    let mut out = Vec::new();
    match stage {
        Stage::Georef => out.push(run_georef(cfg, strict)?),
        Stage::Smooth => out.push(run_smooth(cfg, strict)?),
        Stage::Filter => out.push(run_filter(cfg, strict)?),
        Stage::Conflicts => out.push(run_conflicts(cfg, strict)?),
        Stage::Match => out.push(run_match(cfg, strict)?),
        Stage::Metrics => out.push(run_metrics(cfg, strict)?.0),
        Stage::All => {
            out.push(run_georef(cfg, strict)?);
            out.push(run_smooth(cfg, strict)?);
            out.push(run_filter(cfg, strict)?);
            out.push(run_conflicts(cfg, strict)?);
            out.push(run_match(cfg, strict)?);
            out.push(run_metrics(cfg, strict)?.0);
        }
    }
    Ok(out)
}
