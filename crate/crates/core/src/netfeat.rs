//! Ego-network and call-behavior features for one user in one window:
//! homophily fractions, degrees, clustering coefficient, diversity
//! entropies, call counts/durations, and reciprocity.

use std::collections::{BTreeMap, HashMap};

use crate::graph::{EgoNetwork, WindowedGraph};
use crate::model::{UserId, UserProfile};

/// All network features of one user. `None` marks an empty denominator
/// (no attributed neighbors, no calls in the relevant direction, ...);
/// the learner imputes those from training-fold means.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkFeatures {
    pub similar_age: Option<f64>,
    pub same_sex: Option<f64>,
    pub local_frac: Option<f64>,
    pub townsman_frac: Option<f64>,
    pub degree: usize,
    pub in_degree: usize,
    pub out_degree: usize,
    pub neighbor_degree: Option<f64>,
    pub cc: f64,
    pub in_calls: u64,
    pub out_calls: u64,
    pub call_diff: i64,
    pub call_duration_mean: Option<f64>,
    pub call_duration_var: Option<f64>,
    pub local_duration_mean: Option<f64>,
    pub local_duration_var: Option<f64>,
    pub province_diversity: Option<f64>,
    pub reciprocal_frac: Option<f64>,
    pub comm_diversity: Option<f64>,
}

/// Fraction helpers: numerator over attributed neighbors only.
fn fraction(num: usize, den: usize) -> Option<f64> {
    if den == 0 {
        None
    } else {
        Some(num as f64 / den as f64)
    }
}

/// Homophily fractions of the ego's neighborhood: similar age (within 5
/// years), same sex, born in the home region, and townsman (same
/// province as v, not home region). Only neighbors with a profile count
/// toward the denominators; townsman is 0 by definition for locals.
pub fn homophily_fractions(
    ego: &EgoNetwork,
    profiles: &HashMap<UserId, UserProfile>,
    v: &UserProfile,
) -> (Option<f64>, Option<f64>, Option<f64>, Option<f64>) {
    let mut attributed = 0usize;
    let mut similar_age = 0usize;
    let mut same_sex = 0usize;
    let mut local = 0usize;
    let mut townsman = 0usize;
    for u in &ego.neighbors {
        let Some(p) = profiles.get(u) else { continue };
        attributed += 1;
        if (p.birth_year - v.birth_year).abs() <= 5 {
            similar_age += 1;
        }
        if p.sex == v.sex {
            same_sex += 1;
        }
        if p.is_local {
            local += 1;
        }
        if !p.is_local && p.birth_province == v.birth_province {
            townsman += 1;
        }
    }
    let townsman_frac = if v.is_local {
        Some(0.0)
    } else {
        fraction(townsman, attributed)
    };
    (
        fraction(similar_age, attributed),
        fraction(same_sex, attributed),
        fraction(local, attributed),
        townsman_frac,
    )
}

/// Clustering coefficient of the ego network with ordered-pair
/// normalization: 2|E_ego| / (d(d-1)); 0 when d < 2.
pub fn clustering_coefficient(ego: &EgoNetwork) -> f64 {
    let d = ego.degree();
    if d < 2 {
        return 0.0;
    }
    2.0 * ego.neighbor_edges.len() as f64 / (d as f64 * (d as f64 - 1.0))
}

/// Base-2 Shannon entropy of the birth-province distribution over the
/// ego's attributed neighbors.
pub fn province_diversity(
    ego: &EgoNetwork,
    profiles: &HashMap<UserId, UserProfile>,
) -> Option<f64> {
    // Ordered map so the entropy accumulates in a fixed order and stays
    // bit-identical across processes.
    let mut counts: BTreeMap<u16, usize> = BTreeMap::new();
    let mut total = 0usize;
    for u in &ego.neighbors {
        if let Some(p) = profiles.get(u) {
            *counts.entry(p.birth_province).or_default() += 1;
            total += 1;
        }
    }
    if total == 0 {
        return None;
    }
    let n = total as f64;
    let mut h = 0.0;
    for &c in counts.values() {
        let p = c as f64 / n;
        h -= p * p.log2();
    }
    Some(h.max(0.0))
}

/// Entropy of v's outgoing-call distribution over contacts, normalized
/// by log(out-degree). Degenerate out-degree 1 yields 0; no outgoing
/// calls yields `None`. The log-base cancels in the ratio.
pub fn communication_diversity(g: &WindowedGraph, v: UserId) -> Option<f64> {
    let out = g.out_edges(v)?;
    let k = out.len();
    if k == 0 {
        return None;
    }
    if k == 1 {
        return Some(0.0);
    }
    // Accumulate in callee order for cross-process bit-stability.
    let mut counts: Vec<(UserId, u32)> = out.iter().map(|(u, e)| (*u, e.call_count)).collect();
    counts.sort_unstable_by_key(|(u, _)| *u);
    let total: f64 = counts.iter().map(|(_, c)| *c as u64).sum::<u64>() as f64;
    let mut h = 0.0;
    for (_, c) in counts {
        let p = c as f64 / total;
        h -= p * p.ln();
    }
    Some((h / (k as f64).ln()).clamp(0.0, 1.0))
}

/// Mean undirected degree over the ego's neighbors, from a precomputed
/// degree map of the same graph.
pub fn neighbor_avg_degree(
    degrees: &HashMap<UserId, usize>,
    ego: &EgoNetwork,
) -> Option<f64> {
    if ego.neighbors.is_empty() {
        return None;
    }
    let sum: usize = ego
        .neighbors
        .iter()
        .map(|u| degrees.get(u).copied().unwrap_or(0))
        .sum();
    Some(sum as f64 / ego.neighbors.len() as f64)
}

fn mean_var(values: &[f64]) -> Option<(f64, f64)> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    Some((mean, var))
}

/// Call-count, duration, and reciprocity statistics for v.
pub struct CallBehavior {
    pub in_calls: u64,
    pub out_calls: u64,
    pub call_diff: i64,
    pub duration_mean: Option<f64>,
    pub duration_var: Option<f64>,
    pub local_duration_mean: Option<f64>,
    pub local_duration_var: Option<f64>,
    pub reciprocal_frac: Option<f64>,
}

/// Computes v's call behavior in g. Duration statistics cover the calls
/// v makes as caller (population variance); the local variants restrict
/// to callees profiled as locals. Reciprocal fraction is the share of
/// out-neighbors that also call v back within the window.
pub fn call_behavior(
    g: &WindowedGraph,
    v: UserId,
    profiles: &HashMap<UserId, UserProfile>,
) -> CallBehavior {
    let mut out_calls = 0u64;
    let mut durations: Vec<f64> = Vec::new();
    let mut local_durations: Vec<f64> = Vec::new();
    let mut reciprocated = 0usize;
    let mut out_neighbor_count = 0usize;
    if let Some(out) = g.out_edges(v) {
        out_neighbor_count = out.len();
        // Fixed callee order: duration sums must not depend on hash
        // iteration order.
        let mut callees: Vec<&UserId> = out.keys().collect();
        callees.sort_unstable();
        for callee in callees {
            let e = &out[callee];
            out_calls += e.call_count as u64;
            for &d in &e.durations {
                durations.push(d as f64);
            }
            if profiles.get(callee).map(|p| p.is_local).unwrap_or(false) {
                for &d in &e.durations {
                    local_durations.push(d as f64);
                }
            }
            if g.edge(*callee, v).is_some() {
                reciprocated += 1;
            }
        }
    }
    let mut in_calls = 0u64;
    if let Some(callers) = g.in_neighbors(v) {
        for u in callers {
            if let Some(e) = g.edge(*u, v) {
                in_calls += e.call_count as u64;
            }
        }
    }
    let (duration_mean, duration_var) = match mean_var(&durations) {
        Some((m, s)) => (Some(m), Some(s)),
        None => (None, None),
    };
    let (local_duration_mean, local_duration_var) = match mean_var(&local_durations) {
        Some((m, s)) => (Some(m), Some(s)),
        None => (None, None),
    };
    CallBehavior {
        in_calls,
        out_calls,
        call_diff: out_calls as i64 - in_calls as i64,
        duration_mean,
        duration_var,
        local_duration_mean,
        local_duration_var,
        reciprocal_frac: fraction(reciprocated, out_neighbor_count),
    }
}

/// Assembles every network feature of v from its ego network and the
/// surrounding graph.
pub fn network_features(
    g: &WindowedGraph,
    degrees: &HashMap<UserId, usize>,
    ego: &EgoNetwork,
    profiles: &HashMap<UserId, UserProfile>,
    v_profile: &UserProfile,
) -> NetworkFeatures {
    let v = ego.ego;
    let (similar_age, same_sex, local_frac, townsman_frac) =
        homophily_fractions(ego, profiles, v_profile);
    let behavior = call_behavior(g, v, profiles);
    NetworkFeatures {
        similar_age,
        same_sex,
        local_frac,
        townsman_frac,
        degree: ego.degree(),
        in_degree: ego.in_neighbors.len(),
        out_degree: ego.out_neighbors.len(),
        neighbor_degree: neighbor_avg_degree(degrees, ego),
        cc: clustering_coefficient(ego),
        in_calls: behavior.in_calls,
        out_calls: behavior.out_calls,
        call_diff: behavior.call_diff,
        call_duration_mean: behavior.duration_mean,
        call_duration_var: behavior.duration_var,
        local_duration_mean: behavior.local_duration_mean,
        local_duration_var: behavior.local_duration_var,
        province_diversity: province_diversity(ego, profiles),
        reciprocal_frac: behavior.reciprocal_frac,
        comm_diversity: communication_diversity(g, v),
    }
}
