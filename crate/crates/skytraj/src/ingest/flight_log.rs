//! Drone flight-log parser (altitude and attitude samples).

use std::path::Path;

use crate::error::{Error, Result};

/// Sanity band for plausible survey altitudes at this kind of site, meters.
pub const ALTITUDE_BAND_M: (f64, f64) = (80.0, 150.0);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlightSample {
    pub time_s: f64,
    pub altitude_m: f64,
    pub pitch_deg: f64,
    pub roll_deg: f64,
    pub yaw_deg: f64,
}

/// Time-ordered flight log samples.
#[derive(Debug, Clone, PartialEq)]
pub struct FlightLog {
    samples: Vec<FlightSample>,
}

impl FlightLog {
    pub fn new(samples: Vec<FlightSample>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::NoObservations);
        }
        for pair in samples.windows(2) {
            if pair[1].time_s <= pair[0].time_s {
                return Err(Error::InvalidParameter(format!(
                    "flight log time must strictly increase ({} then {})",
                    pair[0].time_s, pair[1].time_s
                )));
            }
        }
        for s in &samples {
            if !(ALTITUDE_BAND_M.0..=ALTITUDE_BAND_M.1).contains(&s.altitude_m) {
                return Err(Error::InvalidParameter(format!(
                    "altitude {} m outside the plausible band [{}, {}]",
                    s.altitude_m, ALTITUDE_BAND_M.0, ALTITUDE_BAND_M.1
                )));
            }
        }
        Ok(FlightLog { samples })
    }

    pub fn samples(&self) -> &[FlightSample] {
        &self.samples
    }

    pub fn mean_altitude_m(&self) -> f64 {
        self.samples.iter().map(|s| s.altitude_m).sum::<f64>() / self.samples.len() as f64
    }
}

/// Parse the flight log CSV
/// (`time_s,altitude_m,pitch_deg,roll_deg,yaw_deg`).
pub fn parse_flight_log(path: &Path) -> Result<FlightLog> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
    let headers = reader.headers()?.clone();
    let col = |name: &str| -> Result<usize> {
        headers.iter().position(|h| h == name).ok_or_else(|| Error::MissingColumn {
            path: path.to_path_buf(),
            column: name.to_string(),
        })
    };
    let (c_t, c_alt, c_pitch, c_roll, c_yaw) = (
        col("time_s")?,
        col("altitude_m")?,
        col("pitch_deg")?,
        col("roll_deg")?,
        col("yaw_deg")?,
    );
    let mut samples = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map(|p| p.line()).unwrap_or(0) as usize;
        let num = |i: usize, name: &str| -> Result<f64> {
            let raw = record.get(i).unwrap_or("");
            let v: f64 = raw.parse().map_err(|_| Error::Parse {
                path: path.to_path_buf(),
                row: line,
                message: format!("bad {name} `{raw}`"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    row: line,
                    message: format!("{name} must be finite"),
                });
            }
            Ok(v)
        };
        samples.push(FlightSample {
            time_s: num(c_t, "time_s")?,
            altitude_m: num(c_alt, "altitude_m")?,
            pitch_deg: num(c_pitch, "pitch_deg")?,
            roll_deg: num(c_roll, "roll_deg")?,
            yaw_deg: num(c_yaw, "yaw_deg")?,
        });
    }
    FlightLog::new(samples)
        .map_err(|e| Error::InvalidFile { path: path.to_path_buf(), message: e.to_string() })
}
