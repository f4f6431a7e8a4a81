//! Shared domain types and the time/distance primitives used by every
//! other module: call records, user profiles, day windows, coordinates,
//! and cohort labels.

use serde::{Deserialize, Serialize};

use crate::error::CoreError;

/// Seconds per day; all windowing is done on whole UTC days.
pub const SECONDS_PER_DAY: i64 = 86_400;

/// Mean Earth radius in kilometers for great-circle distances.
pub const EARTH_RADIUS_KM: f64 = 6371.0;

/// Canonical user identifier (post alias merging).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct UserId(pub u64);

impl std::fmt::Display for UserId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        self.0.fmt(f)
    }
}

/// A geographic point in decimal degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Location {
    pub lat: f64,
    pub lon: f64,
}

impl Location {
    pub fn new(lat: f64, lon: f64) -> Self {
        Location { lat, lon }
    }

    pub fn is_valid(&self) -> bool {
        self.lat.is_finite()
            && self.lon.is_finite()
            && (-90.0..=90.0).contains(&self.lat)
            && (-180.0..=180.0).contains(&self.lon)
    }
}

/// One directed call event, the atomic input of the pipeline.
///
/// `start`/`end` are UTC epoch seconds; the tower location is the serving
/// cell tower recorded for the call.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CallRecord {
    pub caller: UserId,
    pub callee: UserId,
    pub start: i64,
    pub end: i64,
    pub tower: Location,
}

impl CallRecord {
    /// Checks the record invariants: non-negative duration, valid
    /// coordinates, and no self-calls.
    pub fn is_valid(&self) -> bool {
        self.end >= self.start && self.caller != self.callee && self.tower.is_valid()
    }

    /// Call duration in seconds (end minus start).
    pub fn duration(&self) -> i64 {
        self.end - self.start
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sex {
    M,
    F,
}

/// Birth-province code; the configured home region decides locality.
pub type ProvinceCode = u16;

/// Demographic attributes for one user.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UserProfile {
    pub user: UserId,
    pub birth_year: i32,
    pub sex: Sex,
    pub birth_province: ProvinceCode,
    /// True iff `birth_province` equals the configured home region.
    pub is_local: bool,
}

/// Half-open day-index window `[start_day, end_day)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TimeWindow {
    pub start_day: u32,
    pub end_day: u32,
}

impl TimeWindow {
    pub fn new(start_day: u32, end_day: u32) -> Self {
        assert!(end_day > start_day, "window must be non-empty");
        TimeWindow { start_day, end_day }
    }

    pub fn contains(&self, day: u32) -> bool {
        day >= self.start_day && day < self.end_day
    }

    pub fn len_days(&self) -> u32 {
        self.end_day - self.start_day
    }
}

/// Cohort assignment from birthplace and activity pattern.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CohortLabel {
    Local,
    StayingMigrant,
    LeavingMigrant,
    Excluded,
}

impl CohortLabel {
    pub fn as_str(&self) -> &'static str {
        match self {
            CohortLabel::Local => "local",
            CohortLabel::StayingMigrant => "staying",
            CohortLabel::LeavingMigrant => "leaving",
            CohortLabel::Excluded => "excluded",
        }
    }

    pub fn parse(s: &str) -> Option<CohortLabel> {
        match s {
            "local" => Some(CohortLabel::Local),
            "staying" => Some(CohortLabel::StayingMigrant),
            "leaving" => Some(CohortLabel::LeavingMigrant),
            "excluded" => Some(CohortLabel::Excluded),
            _ => None,
        }
    }
}

/// Maps an epoch-seconds timestamp to a 0-based day index relative to the
/// dataset epoch. Errors on records before the epoch.
pub fn day_index(timestamp: i64, epoch: i64) -> Result<u32, CoreError> {
    if timestamp < epoch {
        return Err(CoreError::PreEpochRecord { timestamp, epoch });
    }
    Ok(((timestamp - epoch) / SECONDS_PER_DAY) as u32)
}

/// Great-circle (haversine) distance between two points in kilometers.
pub fn geo_distance(a: Location, b: Location) -> f64 {
    let lat1 = a.lat.to_radians();
    let lat2 = b.lat.to_radians();
    let dlat = (b.lat - a.lat).to_radians() / 2.0;
    let dlon = (b.lon - a.lon).to_radians() / 2.0;
    let h = dlat.sin().powi(2) + lat1.cos() * lat2.cos() * dlon.sin().powi(2);
    2.0 * EARTH_RADIUS_KM * h.sqrt().min(1.0).asin()
}
