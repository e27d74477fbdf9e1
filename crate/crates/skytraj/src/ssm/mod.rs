//! Surrogate-safety geometry: oriented boxes, collision-course measures, swept
//! regions and the dynamic gap time.

pub mod dgt;
pub mod grid;
pub mod obb;
pub mod region;
pub mod ttc;

pub use dgt::{dgt, shared_window, DgtResult};
pub use grid::candidate_pairs;
pub use obb::Obb;
pub use region::{swept_region, Region, MIN_REGION_AREA_M2};
pub use ttc::{corner_ray_cast, ttc, CornerCast, TtcResult, TtcValue};
