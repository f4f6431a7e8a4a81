//! Assembles the full per-user feature matrix for one time window:
//! network features from the windowed graph, geo/mobility features from
//! location traces, and housing-price features from the estate index.

use std::collections::{HashMap, HashSet};
use std::path::Path;

use rayon::prelude::*;

use cdrflow_core::geofeat::{
    self, GeoConfig, GeoFeatures, LocationTrace, PriceIndex, UserGeo,
};
use cdrflow_core::graph::WindowedGraph;
use cdrflow_core::learner::{Dataset, FeatureGroup};
use cdrflow_core::model::{day_index, CallRecord, TimeWindow, UserId, UserProfile};
use cdrflow_core::netfeat::{self, NetworkFeatures};

/// Fixed feature-column layout shared by the CSV dump and the learners.
pub const FEATURE_COLUMNS: &[(&str, FeatureGroup)] = &[
    ("similar_age", FeatureGroup::Ego),
    ("same_sex", FeatureGroup::Ego),
    ("local_frac", FeatureGroup::Ego),
    ("townsman_frac", FeatureGroup::Ego),
    ("degree", FeatureGroup::Ego),
    ("in_degree", FeatureGroup::Ego),
    ("out_degree", FeatureGroup::Ego),
    ("neighbor_degree", FeatureGroup::Ego),
    ("cc", FeatureGroup::Ego),
    ("in_calls", FeatureGroup::Call),
    ("out_calls", FeatureGroup::Call),
    ("call_diff", FeatureGroup::Call),
    ("call_duration_mean", FeatureGroup::Call),
    ("call_duration_var", FeatureGroup::Call),
    ("local_duration_mean", FeatureGroup::Call),
    ("local_duration_var", FeatureGroup::Call),
    ("province_diversity", FeatureGroup::Call),
    ("reciprocal_frac", FeatureGroup::Call),
    ("comm_diversity", FeatureGroup::Call),
    ("center_lat", FeatureGroup::Geo),
    ("center_lon", FeatureGroup::Geo),
    ("work_lat", FeatureGroup::Geo),
    ("work_lon", FeatureGroup::Geo),
    ("home_lat", FeatureGroup::Geo),
    ("home_lon", FeatureGroup::Geo),
    ("avg_radius", FeatureGroup::Geo),
    ("max_radius", FeatureGroup::Geo),
    ("moving_distance", FeatureGroup::Geo),
    ("avg_move_distance", FeatureGroup::Geo),
    ("home_work_distance", FeatureGroup::Geo),
    ("avg_price", FeatureGroup::Price),
    ("center_price", FeatureGroup::Price),
    ("work_avg_price", FeatureGroup::Price),
    ("work_center_price", FeatureGroup::Price),
    ("home_avg_price", FeatureGroup::Price),
    ("home_center_price", FeatureGroup::Price),
    ("neighbor_avg_price", FeatureGroup::Price),
    ("neighbor_center_price", FeatureGroup::Price),
];

/// Immutable inputs shared by every feature pass.
pub struct DataBundle {
    pub records: Vec<CallRecord>,
    pub profiles: HashMap<UserId, UserProfile>,
    pub price_index: PriceIndex,
    pub epoch: i64,
    pub geo: GeoConfig,
}

fn opt(v: Option<f64>) -> f64 {
    v.unwrap_or(f64::NAN)
}

fn feature_row(net: Option<&NetworkFeatures>, geo: Option<&GeoFeatures>) -> Vec<f64> {
    let mut row = Vec::with_capacity(FEATURE_COLUMNS.len());
    match net {
        Some(f) => {
            row.extend_from_slice(&[
                opt(f.similar_age),
                opt(f.same_sex),
                opt(f.local_frac),
                opt(f.townsman_frac),
                f.degree as f64,
                f.in_degree as f64,
                f.out_degree as f64,
                opt(f.neighbor_degree),
                f.cc,
                f.in_calls as f64,
                f.out_calls as f64,
                f.call_diff as f64,
                opt(f.call_duration_mean),
                opt(f.call_duration_var),
                opt(f.local_duration_mean),
                opt(f.local_duration_var),
                opt(f.province_diversity),
                opt(f.reciprocal_frac),
                opt(f.comm_diversity),
            ]);
        }
        None => row.extend(std::iter::repeat(f64::NAN).take(19)),
    }
    match geo {
        Some(g) => {
            let b = &g.base;
            row.extend_from_slice(&[
                opt(b.center.map(|c| c.lat)),
                opt(b.center.map(|c| c.lon)),
                opt(b.work_center.map(|c| c.lat)),
                opt(b.work_center.map(|c| c.lon)),
                opt(b.home_center.map(|c| c.lat)),
                opt(b.home_center.map(|c| c.lon)),
                opt(b.avg_radius),
                opt(b.max_radius),
                opt(b.moving_distance),
                opt(b.avg_move_distance),
                opt(b.home_work_distance),
                opt(b.avg_price),
                opt(b.center_price),
                opt(b.work_avg_price),
                opt(b.work_center_price),
                opt(b.home_avg_price),
                opt(b.home_center_price),
                opt(g.neighbor_avg_price),
                opt(g.neighbor_center_price),
            ]);
        }
        None => row.extend(std::iter::repeat(f64::NAN).take(19)),
    }
    row
}

/// Per-user call points bucketed in one pass, the raw material for
/// location traces.
fn bucket_points(
    records: &[CallRecord],
    window: TimeWindow,
    epoch: i64,
    include_callee: bool,
    wanted: &HashSet<UserId>,
) -> HashMap<UserId, Vec<CallRecord>> {
    let mut buckets: HashMap<UserId, Vec<CallRecord>> = HashMap::new();
    for r in records {
        let Ok(day) = day_index(r.start, epoch) else { continue };
        if !window.contains(day) {
            continue;
        }
        if wanted.contains(&r.caller) {
            buckets.entry(r.caller).or_default().push(*r);
        }
        if include_callee && wanted.contains(&r.callee) {
            buckets.entry(r.callee).or_default().push(*r);
        }
    }
    for points in buckets.values_mut() {
        points.sort_unstable_by_key(|r| (r.start, r.caller, r.callee));
    }
    buckets
}

fn trace_of(user: UserId, window: TimeWindow, points: Option<&Vec<CallRecord>>) -> LocationTrace {
    LocationTrace {
        user,
        window,
        points: points
            .map(|v| v.iter().map(|r| (r.start, r.tower)).collect())
            .unwrap_or_default(),
    }
}

/// Computes the full feature matrix for `users` (with their binary
/// labels) over one window. Users with no activity in the window get an
/// all-missing row. Row order follows the `users` slice.
pub fn feature_matrix(
    bundle: &DataBundle,
    users: &[(UserId, u8)],
    window: TimeWindow,
) -> Dataset {
    let g = WindowedGraph::build(&bundle.records, window, bundle.epoch);
    let degrees = g.undirected_degrees();

    // Geo phase 1 runs for targets plus their contacts, so the neighbor
    // price pass has per-contact values to average.
    let mut geo_users: HashSet<UserId> = users.iter().map(|(u, _)| *u).collect();
    let egos: HashMap<UserId, _> = users
        .iter()
        .filter(|(u, _)| g.contains(*u))
        .map(|(u, _)| (*u, g.ego_network(*u).expect("node present")))
        .collect();
    for ego in egos.values() {
        geo_users.extend(ego.neighbors.iter().copied());
    }
    let buckets = bucket_points(
        &bundle.records,
        window,
        bundle.epoch,
        bundle.geo.include_callee_side,
        &geo_users,
    );
    let mut geo_list: Vec<UserId> = geo_users.into_iter().collect();
    geo_list.sort_unstable();
    let geo_base: HashMap<UserId, UserGeo> = geo_list
        .par_iter()
        .map(|&u| {
            let tr = trace_of(u, window, buckets.get(&u));
            (u, geofeat::user_geo(&tr, &bundle.price_index, &bundle.geo))
        })
        .collect();
    let price_cache: HashMap<UserId, (Option<f64>, Option<f64>)> = geo_base
        .iter()
        .map(|(u, g)| (*u, (g.avg_price, g.center_price)))
        .collect();

    let rows: Vec<Vec<f64>> = users
        .par_iter()
        .map(|(u, _)| {
            let ego = egos.get(u);
            let net = ego.and_then(|ego| {
                bundle.profiles.get(u).map(|p| {
                    netfeat::network_features(&g, &degrees, ego, &bundle.profiles, p)
                })
            });
            let geo = geo_base.get(u).map(|base| {
                let (navg, ncenter) = ego
                    .map(|e| geofeat::neighbor_prices(e, &price_cache))
                    .unwrap_or((None, None));
                GeoFeatures {
                    base: base.clone(),
                    neighbor_avg_price: navg,
                    neighbor_center_price: ncenter,
                }
            });
            feature_row(net.as_ref(), geo.as_ref())
        })
        .collect();

    let names: Vec<String> = FEATURE_COLUMNS.iter().map(|(n, _)| n.to_string()).collect();
    let groups: Vec<FeatureGroup> = FEATURE_COLUMNS.iter().map(|(_, g)| *g).collect();
    let mut ds = Dataset::new(FEATURE_COLUMNS.len(), names, groups);
    for ((u, label), row) in users.iter().zip(rows) {
        ds.push_row(*u, &row, *label);
    }
    ds
}

/// Writes `features.csv`: `user,label,window,<feature columns...>`,
/// missing values as empty cells.
pub fn write_features_csv(
    path: &Path,
    ds: &Dataset,
    labels: &HashMap<UserId, String>,
    window: TimeWindow,
) -> std::io::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["user".to_string(), "label".to_string(), "window".to_string()];
    header.extend(ds.feature_names.iter().cloned());
    w.write_record(&header)?;
    for r in 0..ds.n_rows {
        let user = ds.row_ids[r];
        let mut record = vec![
            user.to_string(),
            labels.get(&user).cloned().unwrap_or_default(),
            format!("{}-{}", window.start_day, window.end_day),
        ];
        for c in 0..ds.n_cols {
            let v = ds.get(r, c);
            record.push(if v.is_nan() {
                String::new()
            } else {
                format!("{v}")
            });
        }
        w.write_record(&record)?;
    }
    w.flush()
}

/// Optional debug dump of the windowed graph edge list.
pub fn write_edges_csv(path: &Path, g: &WindowedGraph) -> std::io::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["src", "dst", "calls", "total_duration"])?;
    for (src, dst, stats) in g.edges_sorted() {
        w.write_record([
            src.to_string(),
            dst.to_string(),
            stats.call_count.to_string(),
            stats.total_duration.to_string(),
        ])?;
    }
    w.flush()
}

/// Optional dump of per-user home/work centers.
pub fn write_centers_csv(
    path: &Path,
    centers: &[(UserId, Option<(f64, f64)>, Option<(f64, f64)>)],
) -> std::io::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["user", "home_lat", "home_lon", "work_lat", "work_lon"])?;
    for (u, home, work) in centers {
        let fmt = |v: Option<f64>| v.map(|x| format!("{x:.6}")).unwrap_or_default();
        w.write_record([
            u.to_string(),
            fmt(home.map(|h| h.0)),
            fmt(home.map(|h| h.1)),
            fmt(work.map(|w| w.0)),
            fmt(work.map(|w| w.1)),
        ])?;
    }
    w.flush()
}
