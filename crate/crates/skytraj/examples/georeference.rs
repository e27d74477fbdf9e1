//! Georeferencing walkthrough: fit an image-to-ground homography from
//! ground control points, undo lens distortion, and recover metric
//! trajectories whose accuracy we can measure because the scene is
//! synthetic and its true geometry is known.
//!
//! Run with: cargo run --example georeference

use nalgebra::Point2;
use skytraj::georef::{
    calibration_report, fit_homography, georeference_table, refine_distortion, CameraModel, Gcp,
    GeoChain, RulerPair,
};
use skytraj::ingest::TurnKind;
use skytraj::model::{TrackTable, Unit, VehicleClass};
use skytraj::synth::{approach_path, GroundTruth, TrackScript};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let truth = GroundTruth::standard()?;

    // --- 1. control points: observed (distorted) pixels + geodetic fixes
    let mut gcps = Vec::new();
    for iy in 0..3 {
        for ix in 0..4 {
            let ideal = Point2::new(400.0 + 1013.0 * ix as f64, 400.0 + 680.0 * iy as f64);
            let observed = truth.cam.distort(ideal);
            let local = truth.local_of_ideal_px(ideal);
            let (lon, lat) = truth.frame.unproject_to_lonlat(local)?;
            // the fit wants undistorted pixels, so lens correction comes first
            gcps.push(Gcp { px: truth.cam.undistort(observed)?, lon_deg: lon, lat_deg: lat });
        }
    }
    let hom = fit_homography(&gcps)?;
    println!("fitted homography from {} control points", gcps.len());
    println!("  rms residual: {:.6} m", hom.rms_residual_m);

    // --- 2. the full chain: undistort -> homography -> UTM -> local frame
    let chain = GeoChain::new(truth.cam.clone(), hom, truth.frame);
    println!("\n{}", calibration_report(&chain));

    // --- 3. georeference a rendered left turn and measure the error
    let script = TrackScript {
        id: 1,
        class: VehicleClass::Car,
        t0_s: 0.0,
        speed_mps: 9.0,
        length_m: 4.4,
        width_m: 1.9,
        segments: approach_path(0, TurnKind::Left, 55.0),
    };
    let mut world = TrackTable::new("demo", Unit::Meter, 10.0)?;
    world.insert(script.sample(10.0)?)?;
    let pixels = truth.render_table(&world)?;
    let (recovered, report) = georeference_table(&pixels, &chain)?;
    println!("georeferenced {} states ({} dropped)", world.state_count(), report.dropped_points.len());

    let original = world.iter().next().unwrap();
    let restored = recovered.iter().next().unwrap();
    let mut max_pos = 0.0f64;
    let mut max_len = 0.0f64;
    for (a, b) in original.states().iter().zip(restored.states()) {
        max_pos = max_pos.max((a.center - b.center).norm());
        max_len = max_len.max((a.length - b.length).abs());
    }
    println!("  worst position error: {:.4} m", max_pos);
    println!("  worst length error:   {:.4} m", max_len);

    // --- 4. recover the radial distortion from scene rulers alone:
    // start from a camera that wrongly assumes a distortion-free lens
    let naive = CameraModel::new(
        truth.cam.fx,
        truth.cam.fy,
        truth.cam.cx,
        truth.cam.cy,
        [0.0; 5],
        truth.cam.gsd_m_per_px,
        truth.cam.altitude_m,
        truth.cam.image_width_px,
        truth.cam.image_height_px,
    )?;
    let anchors = [
        (Point2::new(-80.0, -40.0), Point2::new(-20.0, -35.0)),
        (Point2::new(60.0, -45.0), Point2::new(85.0, 5.0)),
        (Point2::new(-70.0, 30.0), Point2::new(-15.0, 45.0)),
        (Point2::new(10.0, 38.0), Point2::new(70.0, 42.0)),
        (Point2::new(-5.0, -48.0), Point2::new(5.0, 48.0)),
        (Point2::new(-85.0, -2.0), Point2::new(88.0, 3.0)),
    ];
    let rulers: Vec<RulerPair> = anchors
        .iter()
        .map(|(a, b)| RulerPair {
            a: truth.observed_px_of_local(*a),
            b: truth.observed_px_of_local(*b),
            true_length_m: (a - b).norm(),
        })
        .collect();
    let outcome = refine_distortion(&naive, &rulers)?;
    println!("\ndistortion refinement over {} rulers:", rulers.len());
    println!("  length rms before: {:.4} m", outcome.initial_rms_m);
    println!("  length rms after:  {:.4} m", outcome.final_rms_m);
    println!(
        "  recovered k1 = {:.5} (true {:.5})",
        outcome.cam.dist[0], truth.cam.dist[0]
    );
    for w in &outcome.warnings {
        println!("  note: {w}");
    }
    Ok(())
}
