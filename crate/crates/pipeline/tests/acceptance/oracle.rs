//! Brute-force feature reference: recomputes every column of the
//! feature matrix from flat scans over the raw records, with its own
//! distance, entropy, and price-join code, so agreement with the
//! pipeline is meaningful.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use cdrflow_core::geofeat::{Estate, GeoConfig};
use cdrflow_core::model::{CallRecord, Location, TimeWindow, UserId, UserProfile};

pub struct OracleInput<'a> {
    pub records: &'a [CallRecord],
    pub profiles: &'a HashMap<UserId, UserProfile>,
    pub estates: &'a [Estate],
    pub epoch: i64,
    pub window: TimeWindow,
    pub geo: &'a GeoConfig,
}

/// Independent haversine (atan2 form).
fn dist_km(a: Location, b: Location) -> f64 {
    let r = 6371.0_f64;
    let (la1, la2) = (a.lat.to_radians(), b.lat.to_radians());
    let dla = (b.lat - a.lat).to_radians();
    let dlo = (b.lon - a.lon).to_radians();
    let h = (dla / 2.0).sin().powi(2) + la1.cos() * la2.cos() * (dlo / 2.0).sin().powi(2);
    2.0 * r * h.sqrt().atan2((1.0 - h).sqrt())
}

fn in_window(r: &CallRecord, inp: &OracleInput) -> bool {
    let secs = r.start - inp.epoch;
    if secs < 0 {
        return false;
    }
    let day = (secs / 86_400) as u32;
    day >= inp.window.start_day && day < inp.window.end_day
}

fn local_hour(ts: i64, offset: i32) -> u8 {
    ((ts + offset as i64 * 3600).rem_euclid(86_400) / 3600) as u8
}

fn hour_ok(h: u8, (start, end): (u8, u8)) -> bool {
    if start == end {
        true
    } else if start < end {
        h >= start && h < end
    } else {
        h >= start || h < end
    }
}

/// Mean in-radius price, else price of the nearest estate (ties to the
/// lowest index), by linear scan.
fn price_at(estates: &[Estate], loc: Location, radius_km: f64) -> f64 {
    let mut sum = 0.0;
    let mut n = 0usize;
    for e in estates {
        if dist_km(loc, e.loc) <= radius_km {
            sum += e.price;
            n += 1;
        }
    }
    if n > 0 {
        return sum / n as f64;
    }
    let mut best = (f64::INFINITY, 0usize);
    for (i, e) in estates.iter().enumerate() {
        let d = dist_km(loc, e.loc);
        if d < best.0 {
            best = (d, i);
        }
    }
    estates[best.1].price
}

struct Stats {
    mean: f64,
    var: f64,
}

fn mean_var(xs: &[f64]) -> Option<Stats> {
    if xs.is_empty() {
        return None;
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    Some(Stats { mean, var })
}

const NAN: f64 = f64::NAN;

fn opt(v: Option<f64>) -> f64 {
    v.unwrap_or(NAN)
}

/// Per-trace geo summary: [center_lat, center_lon, avg_radius,
/// max_radius, moving, avg_move] plus the two price aggregates.
struct TraceGeo {
    center: Option<Location>,
    avg_radius: f64,
    max_radius: f64,
    moving: f64,
    avg_move: f64,
    avg_price: f64,
    center_price: f64,
}

fn trace_geo(points: &[(i64, Location)], inp: &OracleInput) -> Option<TraceGeo> {
    if points.is_empty() {
        return None;
    }
    let n = points.len() as f64;
    let lat = points.iter().map(|(_, l)| l.lat).sum::<f64>() / n;
    let lon = points.iter().map(|(_, l)| l.lon).sum::<f64>() / n;
    let center = Location::new(lat, lon);
    let mut moving = 0.0;
    for w in points.windows(2) {
        moving += dist_km(w[0].1, w[1].1);
    }
    let mut rs = 0.0;
    let mut rmax = 0.0f64;
    for (_, l) in points {
        let d = dist_km(*l, center);
        rs += d;
        rmax = rmax.max(d);
    }
    let avg_price = points
        .iter()
        .map(|(_, l)| price_at(inp.estates, *l, inp.geo.price_radius_km))
        .sum::<f64>()
        / n;
    Some(TraceGeo {
        center: Some(center),
        avg_radius: rs / n,
        max_radius: rmax,
        moving,
        avg_move: moving / n,
        avg_price,
        center_price: price_at(inp.estates, center, inp.geo.price_radius_km),
    })
}

/// The 38 feature columns for one user, NaN marking missing, in the
/// pipeline's column order.
pub fn oracle_row(inp: &OracleInput, v: UserId) -> Vec<f64> {
    let win: Vec<&CallRecord> = inp
        .records
        .iter()
        .filter(|r| in_window(r, inp))
        .collect();

    // Naive adjacency over the window.
    let mut contacts: HashMap<UserId, BTreeSet<UserId>> = HashMap::new();
    let mut pair_calls: HashMap<(UserId, UserId), u64> = HashMap::new();
    for r in &win {
        contacts.entry(r.caller).or_default().insert(r.callee);
        contacts.entry(r.callee).or_default().insert(r.caller);
        *pair_calls.entry((r.caller, r.callee)).or_default() += 1;
    }

    let mut row = Vec::with_capacity(38);
    let neighbors: Vec<UserId> = contacts.get(&v).map(|s| s.iter().copied().collect()).unwrap_or_default();
    let in_graph = !neighbors.is_empty();
    let profiled = inp.profiles.contains_key(&v);

    if in_graph && profiled {
        let vp = &inp.profiles[&v];
        let mut attributed = 0usize;
        let (mut sim, mut sex, mut loc, mut town) = (0usize, 0usize, 0usize, 0usize);
        let mut prov_counts: BTreeMap<u16, usize> = BTreeMap::new();
        for u in &neighbors {
            let Some(p) = inp.profiles.get(u) else { continue };
            attributed += 1;
            *prov_counts.entry(p.birth_province).or_default() += 1;
            if (p.birth_year - vp.birth_year).abs() <= 5 {
                sim += 1;
            }
            if p.sex == vp.sex {
                sex += 1;
            }
            if p.is_local {
                loc += 1;
            }
            if !p.is_local && p.birth_province == vp.birth_province {
                town += 1;
            }
        }
        let frac = |n: usize| {
            if attributed == 0 {
                NAN
            } else {
                n as f64 / attributed as f64
            }
        };
        row.push(frac(sim));
        row.push(frac(sex));
        row.push(frac(loc));
        row.push(if vp.is_local { 0.0 } else { frac(town) });

        let out_set: BTreeSet<UserId> = win
            .iter()
            .filter(|r| r.caller == v)
            .map(|r| r.callee)
            .collect();
        let in_set: BTreeSet<UserId> = win
            .iter()
            .filter(|r| r.callee == v)
            .map(|r| r.caller)
            .collect();
        let d = neighbors.len();
        row.push(d as f64);
        row.push(in_set.len() as f64);
        row.push(out_set.len() as f64);
        // Mean undirected degree over neighbors.
        let deg_sum: usize = neighbors
            .iter()
            .map(|u| contacts.get(u).map(|s| s.len()).unwrap_or(0))
            .sum();
        row.push(if d == 0 { NAN } else { deg_sum as f64 / d as f64 });
        // Clustering coefficient over connected-either neighbor pairs.
        let cc = if d < 2 {
            0.0
        } else {
            let mut linked = 0usize;
            for i in 0..d {
                for j in (i + 1)..d {
                    let (a, b) = (neighbors[i], neighbors[j]);
                    if pair_calls.contains_key(&(a, b)) || pair_calls.contains_key(&(b, a)) {
                        linked += 1;
                    }
                }
            }
            2.0 * linked as f64 / (d as f64 * (d as f64 - 1.0))
        };
        row.push(cc);

        let out_calls = win.iter().filter(|r| r.caller == v).count() as u64;
        let in_calls = win.iter().filter(|r| r.callee == v).count() as u64;
        row.push(in_calls as f64);
        row.push(out_calls as f64);
        row.push(out_calls as f64 - in_calls as f64);

        // Caller-side durations grouped by callee in ascending order to
        // match the pipeline's accumulation order (tolerance covers the
        // residual).
        let mut durations: Vec<f64> = Vec::new();
        let mut local_durations: Vec<f64> = Vec::new();
        for u in &out_set {
            for r in &win {
                if r.caller == v && r.callee == *u {
                    durations.push((r.end - r.start) as f64);
                    if inp.profiles.get(u).map(|p| p.is_local).unwrap_or(false) {
                        local_durations.push((r.end - r.start) as f64);
                    }
                }
            }
        }
        match mean_var(&durations) {
            Some(s) => {
                row.push(s.mean);
                row.push(s.var);
            }
            None => {
                row.push(NAN);
                row.push(NAN);
            }
        }
        match mean_var(&local_durations) {
            Some(s) => {
                row.push(s.mean);
                row.push(s.var);
            }
            None => {
                row.push(NAN);
                row.push(NAN);
            }
        }

        // Base-2 entropy of neighbor provinces.
        if attributed == 0 {
            row.push(NAN);
        } else {
            let n = attributed as f64;
            let mut h = 0.0;
            for (_, c) in prov_counts {
                let p = c as f64 / n;
                h -= p * p.log2();
            }
            row.push(h.max(0.0));
        }

        // Reciprocity: out-contacts that call back.
        if out_set.is_empty() {
            row.push(NAN);
        } else {
            let back = out_set
                .iter()
                .filter(|u| pair_calls.contains_key(&(**u, v)))
                .count();
            row.push(back as f64 / out_set.len() as f64);
        }

        // Normalized entropy of the outgoing-call distribution.
        let k = out_set.len();
        if k == 0 {
            row.push(NAN);
        } else if k == 1 {
            row.push(0.0);
        } else {
            let counts: Vec<u64> = out_set.iter().map(|u| pair_calls[&(v, *u)]).collect();
            let total: f64 = counts.iter().sum::<u64>() as f64;
            let mut h = 0.0;
            for c in counts {
                let p = c as f64 / total;
                h -= p * p.ln();
            }
            row.push((h / (k as f64).ln()).clamp(0.0, 1.0));
        }
    } else {
        row.extend(std::iter::repeat(NAN).take(19));
    }

    // Geo block from the user's trace.
    let mut mine: Vec<&CallRecord> = win
        .iter()
        .filter(|r| r.caller == v || (inp.geo.include_callee_side && r.callee == v))
        .copied()
        .collect();
    mine.sort_by_key(|r| (r.start, r.caller, r.callee));
    let points: Vec<(i64, Location)> = mine.iter().map(|r| (r.start, r.tower)).collect();
    let work: Vec<(i64, Location)> = points
        .iter()
        .filter(|(ts, _)| hour_ok(local_hour(*ts, inp.geo.utc_offset_hours), inp.geo.work_hours))
        .copied()
        .collect();
    let home: Vec<(i64, Location)> = points
        .iter()
        .filter(|(ts, _)| hour_ok(local_hour(*ts, inp.geo.utc_offset_hours), inp.geo.home_hours))
        .copied()
        .collect();
    let full = trace_geo(&points, inp);
    let work_geo = trace_geo(&work, inp);
    let home_geo = trace_geo(&home, inp);
    let center = |g: &Option<TraceGeo>| g.as_ref().and_then(|t| t.center);
    row.push(opt(center(&full).map(|c| c.lat)));
    row.push(opt(center(&full).map(|c| c.lon)));
    row.push(opt(center(&work_geo).map(|c| c.lat)));
    row.push(opt(center(&work_geo).map(|c| c.lon)));
    row.push(opt(center(&home_geo).map(|c| c.lat)));
    row.push(opt(center(&home_geo).map(|c| c.lon)));
    row.push(opt(full.as_ref().map(|t| t.avg_radius)));
    row.push(opt(full.as_ref().map(|t| t.max_radius)));
    row.push(opt(full.as_ref().map(|t| t.moving)));
    row.push(opt(full.as_ref().map(|t| t.avg_move)));
    row.push(match (center(&home_geo), center(&work_geo)) {
        (Some(h), Some(w)) => dist_km(h, w),
        _ => NAN,
    });
    row.push(opt(full.as_ref().map(|t| t.avg_price)));
    row.push(opt(full.as_ref().map(|t| t.center_price)));
    row.push(opt(work_geo.as_ref().map(|t| t.avg_price)));
    row.push(opt(work_geo.as_ref().map(|t| t.center_price)));
    row.push(opt(home_geo.as_ref().map(|t| t.avg_price)));
    row.push(opt(home_geo.as_ref().map(|t| t.center_price)));

    // Neighbor price aggregates: average over contacts that have them.
    let mut avg_sum = 0.0;
    let mut avg_n = 0usize;
    let mut c_sum = 0.0;
    let mut c_n = 0usize;
    for u in &neighbors {
        let mut upts: Vec<&CallRecord> = win
            .iter()
            .filter(|r| r.caller == *u || (inp.geo.include_callee_side && r.callee == *u))
            .copied()
            .collect();
        upts.sort_by_key(|r| (r.start, r.caller, r.callee));
        let pts: Vec<(i64, Location)> = upts.iter().map(|r| (r.start, r.tower)).collect();
        if let Some(g) = trace_geo(&pts, inp) {
            avg_sum += g.avg_price;
            avg_n += 1;
            c_sum += g.center_price;
            c_n += 1;
        }
    }
    row.push(if avg_n > 0 { avg_sum / avg_n as f64 } else { NAN });
    row.push(if c_n > 0 { c_sum / c_n as f64 } else { NAN });

    assert_eq!(row.len(), 38);
    row
}

/// Exact columns (counts and integer-ratio fractions); the rest compare
/// under a relative 1e-9 tolerance.
pub const EXACT_COLUMNS: &[&str] = &[
    "similar_age",
    "same_sex",
    "local_frac",
    "townsman_frac",
    "degree",
    "in_degree",
    "out_degree",
    "neighbor_degree",
    "cc",
    "in_calls",
    "out_calls",
    "call_diff",
    "reciprocal_frac",
];

pub fn close(a: f64, b: f64, exact: bool) -> bool {
    if a.is_nan() && b.is_nan() {
        return true;
    }
    if exact {
        return a == b;
    }
    (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0)
}

/// Reference truth table for the cohort labeler.
pub fn oracle_label(
    is_local: bool,
    days: &BTreeSet<u32>,
    warmup: u32,
    weeks: [(u32, u32); 3],
) -> cdrflow_core::CohortLabel {
    use cdrflow_core::CohortLabel::*;
    if is_local {
        return Local;
    }
    if days.iter().any(|&d| d < warmup) {
        return Excluded;
    }
    let active = |(a, b): (u32, u32)| days.iter().any(|&d| d >= a && d < b);
    match (active(weeks[0]), active(weeks[1]), active(weeks[2])) {
        (true, true, true) => StayingMigrant,
        (true, true, false) => LeavingMigrant,
        _ => Excluded,
    }
}
