//! Location traces, mobility features, home/work centers, and
//! housing-price features backed by a uniform-grid estate index.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::CoreError;
use crate::graph::EgoNetwork;
use crate::model::{day_index, geo_distance, CallRecord, Location, TimeWindow, UserId};

/// Kilometers per degree of latitude (2*pi*R/360).
const KM_PER_DEG_LAT: f64 = 111.194_926_644_558_74;

/// One real estate with a unit price.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Estate {
    pub estate_id: u64,
    pub loc: Location,
    pub price: f64,
}

/// Settings for trace construction and price joins.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeoConfig {
    /// Local-time offset applied before the hour-of-day filter.
    pub utc_offset_hours: i32,
    /// Include calls where the user is the callee in her trace.
    pub include_callee_side: bool,
    /// Workplace hours, inclusive start / exclusive end local hours.
    pub work_hours: (u8, u8),
    /// Home hours; the range wraps midnight.
    pub home_hours: (u8, u8),
    /// In-radius threshold for the price join, km.
    pub price_radius_km: f64,
    /// Grid cell size in degrees.
    pub cell_size_deg: f64,
}

impl Default for GeoConfig {
    fn default() -> Self {
        GeoConfig {
            utc_offset_hours: 8,
            include_callee_side: true,
            work_hours: (9, 16),
            home_hours: (20, 7),
            price_radius_km: 1.0,
            cell_size_deg: 0.01,
        }
    }
}

/// Time-ordered call locations of one user in one window.
#[derive(Debug, Clone)]
pub struct LocationTrace {
    pub user: UserId,
    pub window: TimeWindow,
    pub points: Vec<(i64, Location)>,
}

impl LocationTrace {
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Keeps points whose local hour lies in `[start, end)`; the range
    /// wraps midnight when start > end.
    pub fn filter_hours(&self, hours: (u8, u8), utc_offset_hours: i32) -> LocationTrace {
        let points = self
            .points
            .iter()
            .filter(|(ts, _)| hour_in_range(*ts, hours, utc_offset_hours))
            .copied()
            .collect();
        LocationTrace {
            user: self.user,
            window: self.window,
            points,
        }
    }
}

fn hour_in_range(ts: i64, (start, end): (u8, u8), utc_offset_hours: i32) -> bool {
    let local = (ts + utc_offset_hours as i64 * 3600).rem_euclid(86_400);
    let hour = (local / 3600) as u8;
    if start == end {
        true
    } else if start < end {
        hour >= start && hour < end
    } else {
        hour >= start || hour < end
    }
}

/// Builds v's trace over a window: one point per call v participates in,
/// ordered by start time with (caller, callee) as the deterministic
/// tie-break. `hours` optionally restricts to an hour-of-day range.
pub fn trace(
    records: &[CallRecord],
    v: UserId,
    window: TimeWindow,
    epoch: i64,
    hours: Option<(u8, u8)>,
    cfg: &GeoConfig,
) -> LocationTrace {
    let mut selected: Vec<&CallRecord> = records
        .iter()
        .filter(|r| r.caller == v || (cfg.include_callee_side && r.callee == v))
        .filter(|r| {
            day_index(r.start, epoch)
                .map(|d| window.contains(d))
                .unwrap_or(false)
        })
        .filter(|r| {
            hours
                .map(|h| hour_in_range(r.start, h, cfg.utc_offset_hours))
                .unwrap_or(true)
        })
        .collect();
    selected.sort_unstable_by_key(|r| (r.start, r.caller, r.callee));
    LocationTrace {
        user: v,
        window,
        points: selected.iter().map(|r| (r.start, r.tower)).collect(),
    }
}

/// Coordinate-wise mean of the trace points (l_CM).
pub fn center_of_mass(tr: &LocationTrace) -> Option<Location> {
    if tr.points.is_empty() {
        return None;
    }
    let n = tr.points.len() as f64;
    let lat = tr.points.iter().map(|(_, l)| l.lat).sum::<f64>() / n;
    let lon = tr.points.iter().map(|(_, l)| l.lon).sum::<f64>() / n;
    Some(Location::new(lat, lon))
}

/// Movement summary of one trace, all distances in km.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mobility {
    pub moving_distance: f64,
    pub avg_move_distance: f64,
    pub avg_radius: f64,
    pub max_radius: f64,
}

/// Total/average consecutive-hop distance plus average and max distance
/// from the center of mass. Single-point traces yield all zeros; empty
/// traces yield `None`. The average divides by |points|.
pub fn mobility(tr: &LocationTrace) -> Option<Mobility> {
    if tr.points.is_empty() {
        return None;
    }
    let n = tr.points.len() as f64;
    let center = center_of_mass(tr).expect("non-empty trace");
    let mut moving = 0.0;
    for pair in tr.points.windows(2) {
        moving += geo_distance(pair[0].1, pair[1].1);
    }
    let mut radius_sum = 0.0;
    let mut radius_max = 0.0f64;
    for (_, l) in &tr.points {
        let d = geo_distance(*l, center);
        radius_sum += d;
        radius_max = radius_max.max(d);
    }
    Some(Mobility {
        moving_distance: moving,
        avg_move_distance: moving / n,
        avg_radius: radius_sum / n,
        max_radius: radius_max,
    })
}

/// Uniform lat/lon grid over the estate set for in-radius and
/// nearest-estate price lookups.
#[derive(Debug, Clone)]
pub struct PriceIndex {
    cell_size: f64,
    cells: HashMap<(i64, i64), Vec<u32>>,
    estates: Vec<Estate>,
    min_price: f64,
    max_price: f64,
}

impl PriceIndex {
    pub fn build(estates: Vec<Estate>, cell_size_deg: f64) -> Result<PriceIndex, CoreError> {
        if estates.is_empty() {
            return Err(CoreError::NoEstates);
        }
        let mut cells: HashMap<(i64, i64), Vec<u32>> = HashMap::new();
        let mut min_price = f64::INFINITY;
        let mut max_price = f64::NEG_INFINITY;
        for (i, e) in estates.iter().enumerate() {
            let key = cell_of(e.loc, cell_size_deg);
            cells.entry(key).or_default().push(i as u32);
            min_price = min_price.min(e.price);
            max_price = max_price.max(e.price);
        }
        Ok(PriceIndex {
            cell_size: cell_size_deg,
            cells,
            estates,
            min_price,
            max_price,
        })
    }

    pub fn estate_count(&self) -> usize {
        self.estates.len()
    }

    pub fn occupied_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn price_bounds(&self) -> (f64, f64) {
        (self.min_price, self.max_price)
    }

    /// Estates in the cell holding `loc`.
    pub fn cell_estates(&self, loc: Location) -> &[u32] {
        self.cells
            .get(&cell_of(loc, self.cell_size))
            .map(|v| v.as_slice())
            .unwrap_or(&[])
    }

    /// Mean price of the estates within `radius_km` of `loc`; when the
    /// disk is empty, the price of the single nearest estate found by an
    /// expanding-ring grid search.
    pub fn price_at(&self, loc: Location, radius_km: f64) -> f64 {
        let mut sum = 0.0;
        let mut count = 0usize;
        for i in self.candidates_within(loc, radius_km) {
            let e = &self.estates[i as usize];
            if geo_distance(loc, e.loc) <= radius_km {
                sum += e.price;
                count += 1;
            }
        }
        if count > 0 {
            return sum / count as f64;
        }
        self.nearest_price(loc)
    }

    /// Candidate estate indices from all grid cells intersecting the
    /// bounding box of the radius disk.
    fn candidates_within(&self, loc: Location, radius_km: f64) -> Vec<u32> {
        let dlat = radius_km / KM_PER_DEG_LAT;
        let cos_lat = loc.lat.to_radians().cos().abs().max(1e-6);
        let dlon = radius_km / (KM_PER_DEG_LAT * cos_lat);
        let (lo_lat, lo_lon) = cell_of(
            Location::new(loc.lat - dlat, loc.lon - dlon),
            self.cell_size,
        );
        let (hi_lat, hi_lon) = cell_of(
            Location::new(loc.lat + dlat, loc.lon + dlon),
            self.cell_size,
        );
        let mut out = Vec::new();
        for clat in lo_lat..=hi_lat {
            for clon in lo_lon..=hi_lon {
                if let Some(idx) = self.cells.get(&(clat, clon)) {
                    out.extend_from_slice(idx);
                }
            }
        }
        out
    }

    /// Nearest estate by expanding square rings of grid cells; ties go
    /// to the lowest estate index.
    fn nearest_price(&self, loc: Location) -> f64 {
        let (c_lat, c_lon) = cell_of(loc, self.cell_size);
        let cos_lat = loc.lat.to_radians().cos().abs().max(1e-6);
        // Smallest possible extent of one cell in km; a ring at Chebyshev
        // cell distance k can hold nothing closer than (k-1) cell widths.
        let min_cell_km = self.cell_size * KM_PER_DEG_LAT * cos_lat.min(1.0);
        let mut best: Option<(f64, u32)> = None;
        let mut ring = 0i64;
        loop {
            let mut found_any = false;
            for (clat, clon) in ring_cells(c_lat, c_lon, ring) {
                if let Some(idx) = self.cells.get(&(clat, clon)) {
                    found_any = true;
                    for &i in idx {
                        let d = geo_distance(loc, self.estates[i as usize].loc);
                        let better = match best {
                            None => true,
                            Some((bd, bi)) => d < bd || (d == bd && i < bi),
                        };
                        if better {
                            best = Some((d, i));
                        }
                    }
                }
            }
            let _ = found_any;
            if let Some((bd, bi)) = best {
                // Safe to stop once farther rings cannot beat the best.
                if (ring as f64) * min_cell_km > bd {
                    return self.estates[bi as usize].price;
                }
            }
            ring += 1;
            // The index is non-empty, so the search always terminates,
            // but cap the ring count against degenerate geometry.
            if ring > 4_000_000 {
                let (_, bi) = best.expect("non-empty index");
                return self.estates[bi as usize].price;
            }
        }
    }
}

fn cell_of(loc: Location, cell_size: f64) -> (i64, i64) {
    (
        (loc.lat / cell_size).floor() as i64,
        (loc.lon / cell_size).floor() as i64,
    )
}

/// Cells at exactly Chebyshev distance `ring` from the center cell.
fn ring_cells(c_lat: i64, c_lon: i64, ring: i64) -> Vec<(i64, i64)> {
    if ring == 0 {
        return vec![(c_lat, c_lon)];
    }
    let mut out = Vec::with_capacity((8 * ring) as usize);
    for d in -ring..=ring {
        out.push((c_lat - ring, c_lon + d));
        out.push((c_lat + ring, c_lon + d));
    }
    for d in (-ring + 1)..ring {
        out.push((c_lat + d, c_lon - ring));
        out.push((c_lat + d, c_lon + ring));
    }
    out
}

/// Per-user geographic and price features before the neighbor pass.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct UserGeo {
    pub center: Option<Location>,
    pub work_center: Option<Location>,
    pub home_center: Option<Location>,
    pub avg_radius: Option<f64>,
    pub max_radius: Option<f64>,
    pub moving_distance: Option<f64>,
    pub avg_move_distance: Option<f64>,
    pub home_work_distance: Option<f64>,
    pub avg_price: Option<f64>,
    pub center_price: Option<f64>,
    pub work_avg_price: Option<f64>,
    pub work_center_price: Option<f64>,
    pub home_avg_price: Option<f64>,
    pub home_center_price: Option<f64>,
}

/// Full geo feature block including the neighbor-price aggregates.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GeoFeatures {
    pub base: UserGeo,
    pub neighbor_avg_price: Option<f64>,
    pub neighbor_center_price: Option<f64>,
}

/// Phase-1 geo extraction for one user from her full-window trace.
/// `avg_price` is the mean joined price over all trace points; the
/// work/home blocks restrict to the configured hour ranges.
pub fn user_geo(full: &LocationTrace, idx: &PriceIndex, cfg: &GeoConfig) -> UserGeo {
    let mut out = UserGeo::default();
    if full.is_empty() {
        return out;
    }
    out.center = center_of_mass(full);
    if let Some(m) = mobility(full) {
        out.avg_radius = Some(m.avg_radius);
        out.max_radius = Some(m.max_radius);
        out.moving_distance = Some(m.moving_distance);
        out.avg_move_distance = Some(m.avg_move_distance);
    }
    out.avg_price = trace_avg_price(full, idx, cfg);
    out.center_price = out.center.map(|c| idx.price_at(c, cfg.price_radius_km));

    let work = full.filter_hours(cfg.work_hours, cfg.utc_offset_hours);
    if !work.is_empty() {
        out.work_center = center_of_mass(&work);
        out.work_avg_price = trace_avg_price(&work, idx, cfg);
        out.work_center_price = out
            .work_center
            .map(|c| idx.price_at(c, cfg.price_radius_km));
    }
    let home = full.filter_hours(cfg.home_hours, cfg.utc_offset_hours);
    if !home.is_empty() {
        out.home_center = center_of_mass(&home);
        out.home_avg_price = trace_avg_price(&home, idx, cfg);
        out.home_center_price = out
            .home_center
            .map(|c| idx.price_at(c, cfg.price_radius_km));
    }
    if let (Some(h), Some(w)) = (out.home_center, out.work_center) {
        out.home_work_distance = Some(geo_distance(h, w));
    }
    out
}

fn trace_avg_price(tr: &LocationTrace, idx: &PriceIndex, cfg: &GeoConfig) -> Option<f64> {
    if tr.points.is_empty() {
        return None;
    }
    let sum: f64 = tr
        .points
        .iter()
        .map(|(_, l)| idx.price_at(*l, cfg.price_radius_km))
        .sum();
    Some(sum / tr.points.len() as f64)
}

/// Phase-2 neighbor-price aggregation: averages the per-contact average
/// and center prices over the ego's neighbors that have them.
pub fn neighbor_prices(
    ego: &EgoNetwork,
    per_user: &HashMap<UserId, (Option<f64>, Option<f64>)>,
) -> (Option<f64>, Option<f64>) {
    let mut avg_sum = 0.0;
    let mut avg_n = 0usize;
    let mut center_sum = 0.0;
    let mut center_n = 0usize;
    for u in &ego.neighbors {
        if let Some((avg, center)) = per_user.get(u) {
            if let Some(a) = avg {
                avg_sum += a;
                avg_n += 1;
            }
            if let Some(c) = center {
                center_sum += c;
                center_n += 1;
            }
        }
    }
    let avg = (avg_n > 0).then(|| avg_sum / avg_n as f64);
    let center = (center_n > 0).then(|| center_sum / center_n as f64);
    (avg, center)
}
