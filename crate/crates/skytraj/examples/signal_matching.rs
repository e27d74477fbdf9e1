//! Semantic matching walkthrough: assign every vehicle in the demo scene
//! to its signalized movement (entry edge, exit edge, turn kind), sync the
//! tracks against the signal plan, flag red-light running, and fold the
//! violations into per-cycle rates.
//!
//! Run with: cargo run --example signal_matching

use skytraj::ingest::SignalTimeline;
use skytraj::metrics::per_cycle_violation_rate;
use skytraj::semantic::{assign_routes, scan_violations, SignalConfig};
use skytraj::synth::{demo_scene, standard_local_map};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let (table, signals) = demo_scene()?;
    let map = standard_local_map();
    let timeline = SignalTimeline::from_entries(&signals)?;

    // --- route assignment
    let routes = assign_routes(&table, &map)?;
    println!("{:<7} {:<10} {:<8} {:<8} {:<10} {:<9} {}", "track", "movement", "entry", "exit", "kind", "t_in [s]", "t_out [s]");
    for r in routes.values() {
        println!(
            "{:<7} {:<10} {:<8} {:<8} {:<10} {:<9} {}",
            r.track_id,
            r.movement_id.as_deref().unwrap_or("-"),
            r.entry_edge.as_deref().unwrap_or("-"),
            r.exit_edge.as_deref().unwrap_or("-"),
            r.kind.name(),
            r.t_entry.map(|t| format!("{t:.1}")).unwrap_or_else(|| "-".into()),
            r.t_exit.map(|t| format!("{t:.1}")).unwrap_or_else(|| "-".into()),
        );
    }

    // --- violations against the signal plan
    let report = scan_violations(&routes, &table, &map, &timeline, &SignalConfig::default())?;
    println!("\n{} violation(s):", report.events.len());
    for v in &report.events {
        println!(
            "  track {} ran movement {} on {} at t = {:.1} s ({})",
            v.track_id,
            v.movement_id,
            v.signal_state_at_entry.name(),
            v.t_violation,
            v.kind.name()
        );
    }

    // --- per-cycle violation rates
    let cycles = per_cycle_violation_rate(&report.events, &routes, &timeline)?;
    println!("\n{:<16} {:<10} {:<22} {}", "cycle [s]", "entrants", "straight viol (rate)", "left viol (rate)");
    for c in &cycles {
        let fmt_rate = |n: usize, r: Option<f64>| match r {
            Some(r) => format!("{n} ({r:.3})"),
            None => format!("{n} (-)"),
        };
        println!(
            "{:<16} {:<10} {:<22} {}",
            format!("[{}, {})", c.start_s, c.end_s),
            c.entrants,
            fmt_rate(c.straight_violations, c.straight_rate),
            fmt_rate(c.left_violations, c.left_rate),
        );
    }
    Ok(())
}
