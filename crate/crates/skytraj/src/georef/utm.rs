//! WGS84 ⇄ UTM conversion via sixth-order Krüger series (sub-micrometer
//! accuracy inside a zone).

use crate::error::{Error, Result};

const WGS84_A: f64 = 6_378_137.0;
const WGS84_F: f64 = 1.0 / 298.257_223_563;
const K0: f64 = 0.9996;
const FALSE_EASTING: f64 = 500_000.0;
const FALSE_NORTHING_SOUTH: f64 = 10_000_000.0;
/// Latitude band covered by the projection, degrees.
pub const MAX_LAT_DEG: f64 = 84.0;

/// UTM zone: its number (1..=60) and hemisphere.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct UtmZone {
    pub number: u8,
    pub north: bool,
}

impl UtmZone {
    pub fn new(number: u8, north: bool) -> Result<Self> {
        if !(1..=60).contains(&number) {
            return Err(Error::InvalidParameter(format!("UTM zone number {number} out of 1..=60")));
        }
        Ok(UtmZone { number, north })
    }

    /// Zone containing a geodetic point (standard 6° slices, no exceptions).
    pub fn containing(lat_deg: f64, lon_deg: f64) -> Result<Self> {
        let lon = normalize_lon(lon_deg);
        let number = (((lon + 180.0) / 6.0).floor() as i32 + 1).clamp(1, 60) as u8;
        UtmZone::new(number, lat_deg >= 0.0)
    }

    /// Central meridian, degrees east.
    pub fn central_meridian_deg(self) -> f64 {
        f64::from(self.number) * 6.0 - 183.0
    }
}

impl std::fmt::Display for UtmZone {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}{}", self.number, if self.north { 'N' } else { 'S' })
    }
}

/// A projected point with the zone it is expressed in.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UtmCoord {
    pub easting_m: f64,
    pub northing_m: f64,
    pub zone: UtmZone,
}

fn normalize_lon(lon: f64) -> f64 {
    let mut l = (lon + 180.0).rem_euclid(360.0) - 180.0;
    if l >= 180.0 {
        l -= 360.0;
    }
    l
}

struct Series {
    /// Rectifying radius.
    a_rect: f64,
    alpha: [f64; 6],
    beta: [f64; 6],
    /// First eccentricity.
    e: f64,
}

fn series() -> Series {
    let n = WGS84_F / (2.0 - WGS84_F);
    let n2 = n * n;
    let n3 = n2 * n;
    let n4 = n3 * n;
    let n5 = n4 * n;
    let n6 = n5 * n;
    Series {
        a_rect: WGS84_A / (1.0 + n) * (1.0 + n2 / 4.0 + n4 / 64.0 + n6 / 256.0),
        alpha: [
            n / 2.0 - 2.0 / 3.0 * n2 + 5.0 / 16.0 * n3 + 41.0 / 180.0 * n4 - 127.0 / 288.0 * n5
                + 7891.0 / 37800.0 * n6,
            13.0 / 48.0 * n2 - 3.0 / 5.0 * n3 + 557.0 / 1440.0 * n4 + 281.0 / 630.0 * n5
                - 1_983_433.0 / 1_935_360.0 * n6,
            61.0 / 240.0 * n3 - 103.0 / 140.0 * n4 + 15061.0 / 26880.0 * n5
                + 167_603.0 / 181_440.0 * n6,
            49561.0 / 161_280.0 * n4 - 179.0 / 168.0 * n5 + 6_601_661.0 / 7_257_600.0 * n6,
            34729.0 / 80640.0 * n5 - 3_418_889.0 / 1_995_840.0 * n6,
            212_378_941.0 / 319_334_400.0 * n6,
        ],
        beta: [
            n / 2.0 - 2.0 / 3.0 * n2 + 37.0 / 96.0 * n3 - 1.0 / 360.0 * n4 - 81.0 / 512.0 * n5
                + 96199.0 / 604_800.0 * n6,
            n2 / 48.0 + n3 / 15.0 - 437.0 / 1440.0 * n4 + 46.0 / 105.0 * n5
                - 1_118_711.0 / 3_870_720.0 * n6,
            17.0 / 480.0 * n3 - 37.0 / 840.0 * n4 - 209.0 / 4480.0 * n5 + 5569.0 / 90720.0 * n6,
            4397.0 / 161_280.0 * n4 - 11.0 / 504.0 * n5 - 830_251.0 / 7_257_600.0 * n6,
            4583.0 / 161_280.0 * n5 - 108_847.0 / 3_991_680.0 * n6,
            20_648_693.0 / 638_668_800.0 * n6,
        ],
        e: (WGS84_F * (2.0 - WGS84_F)).sqrt(),
    }
}

/// Project into the zone that contains the point.
pub fn to_utm(lat_deg: f64, lon_deg: f64) -> Result<UtmCoord> {
    to_utm_zoned(lat_deg, lon_deg, UtmZone::containing(lat_deg, lon_deg)?)
}

/// Project into a fixed zone (points near a boundary stay comparable).
pub fn to_utm_zoned(lat_deg: f64, lon_deg: f64, zone: UtmZone) -> Result<UtmCoord> {
    if !lat_deg.is_finite() || !lon_deg.is_finite() {
        return Err(Error::NonFinite { context: "geodetic coordinates".into() });
    }
    if lat_deg.abs() >= MAX_LAT_DEG {
        return Err(Error::PolarRegion { lat: lat_deg });
    }
    let s = series();
    let phi = lat_deg.to_radians();
    let dlam = (normalize_lon(lon_deg) - zone.central_meridian_deg()).to_radians();

    // conformal latitude via tau' (stable for all latitudes)
    let tau = phi.tan();
    let sigma = (s.e * (s.e * tau / tau.hypot(1.0)).atanh()).sinh();
    let taup = tau * sigma.hypot(1.0) - sigma * tau.hypot(1.0);

    let xi_p = taup.atan2(dlam.cos());
    let eta_p = (dlam.sin() / taup.hypot(dlam.cos())).asinh();

    let mut xi = xi_p;
    let mut eta = eta_p;
    for (j, &a) in s.alpha.iter().enumerate() {
        let k = 2.0 * (j as f64 + 1.0);
        xi += a * (k * xi_p).sin() * (k * eta_p).cosh();
        eta += a * (k * xi_p).cos() * (k * eta_p).sinh();
    }

    let northing_raw = K0 * s.a_rect * xi;
    Ok(UtmCoord {
        easting_m: FALSE_EASTING + K0 * s.a_rect * eta,
        northing_m: if zone.north { northing_raw } else { FALSE_NORTHING_SOUTH + northing_raw },
        zone,
    })
}

/// Inverse projection back to geodetic degrees.
pub fn from_utm(c: &UtmCoord) -> Result<(f64, f64)> {
    if !c.easting_m.is_finite() || !c.northing_m.is_finite() {
        return Err(Error::NonFinite { context: "projected coordinates".into() });
    }
    let s = series();
    let northing_raw =
        if c.zone.north { c.northing_m } else { c.northing_m - FALSE_NORTHING_SOUTH };
    let xi = northing_raw / (K0 * s.a_rect);
    let eta = (c.easting_m - FALSE_EASTING) / (K0 * s.a_rect);

    let mut xi_p = xi;
    let mut eta_p = eta;
    for (j, &b) in s.beta.iter().enumerate() {
        let k = 2.0 * (j as f64 + 1.0);
        xi_p -= b * (k * xi).sin() * (k * eta).cosh();
        eta_p -= b * (k * xi).cos() * (k * eta).sinh();
    }

    let taup = xi_p.sin() / eta_p.sinh().hypot(xi_p.cos());
    let dlam = eta_p.sinh().atan2(xi_p.cos());

    // invert tau'(tau) by Newton iteration
    let e2 = s.e * s.e;
    let mut tau = taup / (1.0 - e2);
    for _ in 0..8 {
        let sigma = (s.e * (s.e * tau / tau.hypot(1.0)).atanh()).sinh();
        let f = tau * sigma.hypot(1.0) - sigma * tau.hypot(1.0) - taup;
        let df = (sigma.hypot(1.0) * tau.hypot(1.0) - sigma * tau) * (1.0 - e2) * tau.hypot(1.0)
            / (1.0 + (1.0 - e2) * tau * tau);
        let step = f / df;
        tau -= step;
        if step.abs() < 1e-16 * tau.abs().max(1.0) {
            break;
        }
    }

    let lat = tau.atan().to_degrees();
    let lon = normalize_lon(c.zone.central_meridian_deg() + dlam.to_degrees());
    Ok((lat, lon))
}
