//! Conflict extraction walkthrough: a three-car platoon compressing behind
//! a slow leader (every closing pair flags a rear-end) and a crossing
//! cut-off elsewhere in the scene, run through the full detector: TTC scan,
//! gap-time validation, episode grouping, approach-angle classification,
//! and associated-vehicle counts.
//!
//! Run with: cargo run --example conflicts

use nalgebra::Point2;
use skytraj::conflict::{conflict_mv_ratio, extract_conflicts, n_cmvcp, ConflictConfig};
use skytraj::model::{TrackTable, Unit, VehicleClass};
use skytraj::synth::{Segment, TrackScript};

fn car(id: u64, t0_s: f64, speed: f64, segments: Vec<Segment>) -> TrackScript {
    TrackScript {
        id,
        class: VehicleClass::Car,
        t0_s,
        speed_mps: speed,
        length_m: 4.4,
        width_m: 1.9,
        segments,
    }
}

fn line(from: (f64, f64), to: (f64, f64)) -> Segment {
    Segment::Line { from: Point2::new(from.0, from.1), to: Point2::new(to.0, to.1) }
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    const RATE: f64 = 10.0;
    let mut table = TrackTable::new("demo", Unit::Meter, RATE)?;

    // --- the platoon: a slow leader, and two fast followers that each
    // brake to a stop 6 m short of the car ahead
    let leader = car(1, 0.0, 6.0, vec![line((-3.5, 40.0), (-3.5, -60.0))]);
    let second = car(
        2,
        0.0,
        12.0,
        vec![line((-3.5, 70.0), (-3.5, 22.0)), Segment::Dwell { seconds: 5.0 }],
    );
    let third = car(
        3,
        0.0,
        12.0,
        vec![line((-3.5, 79.0), (-3.5, 28.0)), Segment::Dwell { seconds: 5.0 }],
    );

    // --- the crossing cut-off, 35 m away: a southbound car forces a
    // westbound car on a collision course to brake short of the crossing
    let runner = car(4, 20.0, 10.0, vec![line((30.0, 80.0), (30.0, -40.0))]);
    let yielder = car(
        5,
        15.45,
        10.0,
        vec![
            line((95.0, 63.5), (41.5, 63.5)),
            Segment::Dwell { seconds: 2.5 },
            line((41.5, 63.5), (-30.0, 63.5)),
        ],
    );

    for script in [leader, second, third, runner, yielder] {
        table.insert(script.sample(RATE)?)?;
    }

    let events = extract_conflicts(&table, &ConflictConfig::default())?;

    println!("{} conflicts detected\n", events.len());
    println!(
        "{:<7} {:<7} {:<9} {:<9} {:<12} {:<10} {:<18} {}",
        "pair", "t [s]", "ttc [s]", "dgt [s]", "angle [deg]", "kind", "location [m]", "associated"
    );
    for e in &events {
        println!(
            "{:<7} {:<7.1} {:<9.2} {:<9.2} {:<12.1} {:<10} {:<18} {:?}",
            format!("{}-{}", e.pair.0, e.pair.1),
            e.t_min_ttc,
            e.min_ttc_s,
            e.dgt_s,
            e.delta_psi_deg,
            e.kind.name(),
            format!("({:.1}, {:.1})", e.location.x, e.location.y),
            e.associated_ids
        );
    }

    println!(
        "\nconflict-involved share of motor vehicles: {:.2}",
        conflict_mv_ratio(&table, &events)?
    );
    if let Some(n) = n_cmvcp(&events) {
        println!("mean associated vehicles per conflict pair: {n:.2}");
    }
    Ok(())
}
