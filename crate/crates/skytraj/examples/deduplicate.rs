//! Track deduplication walkthrough: a scene of genuine vehicles plus the
//! classic tracking artifacts — a detector flicker, a parked-car shadow, a
//! low-confidence fragment, and two ghost duplicates riding on real tracks.
//! The filter chain removes each artifact for a stated reason and leaves
//! the genuine tracks alone.
//!
//! Run with: cargo run --example deduplicate

use nalgebra::Point2;
use skytraj::dedup::{run_filters, FilterConfig};
use skytraj::ingest::TurnKind;
use skytraj::model::{TrackTable, Trajectory, Unit, VehicleClass};
use skytraj::synth::{approach_path, standard_local_map, Segment, TrackScript};

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

fn main() -> Result<(), Box<dyn std::error::Error>> {
    const RATE: f64 = 10.0;
    let mut table = TrackTable::new("demo", Unit::Meter, RATE)?;

    // two genuine vehicles
    let a = car(1, 0.0, 10.0, approach_path(0, TurnKind::Straight, 60.0)).sample(RATE)?;
    let b = car(2, 2.0, 9.0, approach_path(3, TurnKind::Straight, 60.0)).sample(RATE)?;

    // ghost 3: a second box glued onto vehicle 1 for its whole life
    let ghost_a = derive(&a, 3, 0.55, |p| Point2::new(p.x + 0.3, p.y - 0.2), 10, 90);
    // ghost 4: rides alongside vehicle 2, offset less than a car width
    let ghost_b = derive(&b, 4, 0.8, |p| Point2::new(p.x, p.y + 1.2), 5, 100);

    // artifact 5: four-frame detector flicker (0.4 s of life)
    let flicker = car(5, 30.0, 8.0, vec![line((20.0, 30.0), (23.2, 30.0))]).sample(RATE)?;
    // artifact 6: a parked car off the roadway, drifting well under a meter
    let parked = car(6, 0.0, 0.02, vec![line((40.0, 40.0), (40.0, 40.6))]).sample(RATE)?;
    // artifact 7: plausible motion but hopeless confidence
    let mut shaky = car(7, 10.0, 9.0, approach_path(2, TurnKind::Straight, 60.0)).sample(RATE)?;
    shaky = with_confidence(shaky, 0.2);

    for t in [a, b, ghost_a, ghost_b, flicker, parked, shaky] {
        table.insert(t)?;
    }

    let map = standard_local_map();
    let (kept, report) = run_filters(&table, &FilterConfig::default(), Some(&map))?;

    println!("{} tracks in, {} kept\n", table.len(), kept.len());
    println!("{:<8} {:<18} {}", "track", "removed because", "duplicate of");
    for r in &report.removed {
        let partner = r.partner_id.map(|p| p.to_string()).unwrap_or_else(|| "-".into());
        println!("{:<8} {:<18} {}", r.track_id, r.reason.name(), partner);
    }
    for note in &report.notes {
        println!("note: {note}");
    }
    println!("\nkept: {:?}", kept.iter().map(|t| t.track_id).collect::<Vec<_>>());
    Ok(())
}

fn line(from: (f64, f64), to: (f64, f64)) -> Segment {
    Segment::Line { from: Point2::new(from.0, from.1), to: Point2::new(to.0, to.1) }
}

/// Clone a trajectory into a ghost: new id, lower confidence, jittered
/// center, and a life clipped to `[first + skip, first + last]` frames.
fn derive(
    src: &Trajectory,
    id: u64,
    confidence: f64,
    shift: impl Fn(Point2<f64>) -> Point2<f64>,
    skip: usize,
    last: usize,
) -> Trajectory {
    let states: Vec<_> = src
        .states()
        .iter()
        .skip(skip)
        .take(last - skip)
        .map(|s| {
            let mut g = s.clone();
            g.center = shift(s.center);
            g.confidence = Some(confidence);
            g
        })
        .collect();
    Trajectory::new(id, src.class, Unit::Meter, src.frame_rate_hz, states).expect("ghost states")
}

fn with_confidence(src: Trajectory, confidence: f64) -> Trajectory {
    let states: Vec<_> = src
        .states()
        .iter()
        .map(|s| {
            let mut n = s.clone();
            n.confidence = Some(confidence);
            n
        })
        .collect();
    Trajectory::new(src.track_id, src.class, Unit::Meter, src.frame_rate_hz, states)
        .expect("states unchanged")
}
