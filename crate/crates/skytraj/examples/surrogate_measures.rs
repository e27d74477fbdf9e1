//! Surrogate safety measures at the primitive level: oriented boxes,
//! corner-ray time-to-collision, and the dynamic gap time between two
//! trajectories through a shared conflict zone.
//!
//! Run with: cargo run --example surrogate_measures

use nalgebra::{Point2, Vector2};
use skytraj::model::{OrientedBoxState, Trajectory, Unit, VehicleClass};
use skytraj::ssm::{dgt, shared_window, ttc, Obb, TtcValue};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // --- TTC between two boxes on crossing courses
    // A drives east along y = 0; B drives north along x = 30.
    let vb = Vector2::new(0.0, 8.0);
    let va = Vector2::new(10.0, 0.0);
    println!("{:<26} {:<14} {}", "configuration", "ttc [s]", "distance-to-collision [m]");
    // the first three arrive at the crossing simultaneously: a collision
    // course, seen from ever shorter range
    for (label, ax, by) in [
        ("collision in ~5 s", -20.0, -40.0),
        ("collision in ~3 s", 0.0, -24.0),
        ("collision in ~1 s", 20.0, -8.0),
        ("already overlapping", 28.0, -1.0),
    ] {
        let a = Obb::new(Point2::new(ax, 0.0), 4.4, 1.9, 0.0)?;
        let b = Obb::new(Point2::new(30.0, by), 4.4, 1.9, std::f64::consts::FRAC_PI_2)?;
        let r = ttc(&a, va, &b, vb)?;
        let ttc_text = match r.value {
            TtcValue::Overlap => "overlap".to_string(),
            TtcValue::Finite(t) => format!("{t:.3}"),
            TtcValue::Infinite => "never".to_string(),
        };
        let dtc_text = r.dtc_m.map(|d| format!("{d:.2}")).unwrap_or_else(|| "-".into());
        println!("{label:<26} {ttc_text:<14} {dtc_text}");
    }

    // diverging boxes never collide
    let a = Obb::new(Point2::new(0.0, 0.0), 4.4, 1.9, 0.0)?;
    let b = Obb::new(Point2::new(30.0, 10.0), 4.4, 1.9, std::f64::consts::FRAC_PI_2)?;
    let r = ttc(&a, va, &b, Vector2::new(0.0, 15.0))?;
    println!("{:<26} {:?}", "diverging", r.value);

    // --- DGT between two full trajectories crossing the same point
    let ta = straight(1, Point2::new(-40.0, 0.0), Vector2::new(10.0, 0.0), 80);
    let tb = straight(2, Point2::new(0.0, -52.0), Vector2::new(0.0, 10.0), 80);
    let window = shared_window(&ta, &tb, None)?;
    let result = dgt(&ta, &tb, Some(window))?;
    println!("\ndynamic gap time between two crossing tracks:");
    println!("  first track enters the shared zone at  {:.2} s", result.t_enter_a.unwrap());
    println!("  second track enters the shared zone at {:.2} s", result.t_enter_b.unwrap());
    println!("  gap: {:.2} s", result.value_s.unwrap());
    let zone = result.zone.unwrap();
    println!("  zone area: {:.1} m^2", zone.area_m2());
    Ok(())
}

/// Constant-velocity track at 10 Hz with kinematic annotations filled in.
fn straight(id: u64, start: Point2<f64>, vel: Vector2<f64>, frames: i64) -> Trajectory {
    let heading = vel.y.atan2(vel.x);
    let states: Vec<OrientedBoxState> = (0..frames)
        .map(|f| {
            let t = f as f64 / 10.0;
            OrientedBoxState {
                frame: f,
                time_s: t,
                center: start + vel * t,
                length: 4.4,
                width: 1.9,
                yaw_rad: heading,
                heading_rad: Some(heading),
                speed_mps: Some(vel.norm()),
                accel_mps2: Some(0.0),
                confidence: Some(0.9),
                interpolated: false,
                source_px: None,
            }
        })
        .collect();
    Trajectory::new(id, VehicleClass::Car, Unit::Meter, 10.0, states).expect("valid states")
}
