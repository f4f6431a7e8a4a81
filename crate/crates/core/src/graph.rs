//! Windowed directed communication graphs and per-user ego networks.
//!
//! A graph aggregates all calls whose start day falls inside a half-open
//! day window. Edges keep per-pair call counts and durations; ego
//! networks are undirected views of one user's neighborhood.

use std::collections::{HashMap, HashSet};

use crate::error::CoreError;
use crate::model::{day_index, CallRecord, TimeWindow, UserId};

/// Aggregated statistics for one directed edge (caller -> callee).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EdgeStats {
    pub call_count: u32,
    pub total_duration: i64,
    pub durations: Vec<i64>,
}

impl EdgeStats {
    fn add_call(&mut self, duration: i64) {
        self.call_count += 1;
        self.total_duration += duration;
        self.durations.push(duration);
    }
}

/// Directed communication graph for one time window.
#[derive(Debug, Clone)]
pub struct WindowedGraph {
    pub window: TimeWindow,
    out_adj: HashMap<UserId, HashMap<UserId, EdgeStats>>,
    in_adj: HashMap<UserId, HashSet<UserId>>,
    nodes: HashSet<UserId>,
}

impl WindowedGraph {
    /// Builds the graph from all records whose start day lies in
    /// `[window.start_day, window.end_day)`. Records before `epoch` are
    /// skipped (they cannot fall in any window).
    pub fn build<'a, I>(records: I, window: TimeWindow, epoch: i64) -> WindowedGraph
    where
        I: IntoIterator<Item = &'a CallRecord>,
    {
        let mut g = WindowedGraph {
            window,
            out_adj: HashMap::new(),
            in_adj: HashMap::new(),
            nodes: HashSet::new(),
        };
        for r in records {
            let day = match day_index(r.start, epoch) {
                Ok(d) => d,
                Err(_) => continue,
            };
            if !window.contains(day) {
                continue;
            }
            g.nodes.insert(r.caller);
            g.nodes.insert(r.callee);
            g.out_adj
                .entry(r.caller)
                .or_default()
                .entry(r.callee)
                .or_default()
                .add_call(r.duration());
            g.in_adj.entry(r.callee).or_default().insert(r.caller);
        }
        g
    }

    pub fn contains(&self, v: UserId) -> bool {
        self.nodes.contains(&v)
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.out_adj.values().map(|m| m.len()).sum()
    }

    /// Nodes in ascending id order.
    pub fn nodes_sorted(&self) -> Vec<UserId> {
        let mut v: Vec<UserId> = self.nodes.iter().copied().collect();
        v.sort_unstable();
        v
    }

    pub fn out_edges(&self, v: UserId) -> Option<&HashMap<UserId, EdgeStats>> {
        self.out_adj.get(&v)
    }

    pub fn edge(&self, src: UserId, dst: UserId) -> Option<&EdgeStats> {
        self.out_adj.get(&src).and_then(|m| m.get(&dst))
    }

    pub fn in_neighbors(&self, v: UserId) -> Option<&HashSet<UserId>> {
        self.in_adj.get(&v)
    }

    /// True if a call exists in either direction between s and t.
    pub fn connected_either(&self, s: UserId, t: UserId) -> bool {
        self.edge(s, t).is_some() || self.edge(t, s).is_some()
    }

    /// Undirected degree: number of distinct counterparties of v.
    pub fn degree(&self, v: UserId) -> usize {
        let mut seen: HashSet<UserId> = HashSet::new();
        if let Some(out) = self.out_adj.get(&v) {
            seen.extend(out.keys().copied());
        }
        if let Some(inc) = self.in_adj.get(&v) {
            seen.extend(inc.iter().copied());
        }
        seen.len()
    }

    /// Undirected degree of every node, computed in one pass. Feature
    /// extraction uses this instead of per-call `degree` lookups.
    pub fn undirected_degrees(&self) -> HashMap<UserId, usize> {
        let mut adj: HashMap<UserId, HashSet<UserId>> = HashMap::with_capacity(self.nodes.len());
        for (src, m) in &self.out_adj {
            for dst in m.keys() {
                adj.entry(*src).or_default().insert(*dst);
                adj.entry(*dst).or_default().insert(*src);
            }
        }
        self.nodes
            .iter()
            .map(|v| (*v, adj.get(v).map_or(0, |s| s.len())))
            .collect()
    }

    /// All edges in deterministic (src, dst) order, for dumps.
    pub fn edges_sorted(&self) -> Vec<(UserId, UserId, &EdgeStats)> {
        let mut out: Vec<(UserId, UserId, &EdgeStats)> = self
            .out_adj
            .iter()
            .flat_map(|(src, m)| m.iter().map(move |(dst, st)| (*src, *dst, st)))
            .collect();
        out.sort_unstable_by_key(|(s, d, _)| (*s, *d));
        out
    }

    /// Extracts the undirected ego network of v: the union of its in/out
    /// neighborhoods plus every edge (in either direction) among those
    /// neighbors within the same window.
    pub fn ego_network(&self, v: UserId) -> Result<EgoNetwork, CoreError> {
        if !self.nodes.contains(&v) {
            return Err(CoreError::UnknownUser(v.0));
        }
        let out_neighbors: HashSet<UserId> = self
            .out_adj
            .get(&v)
            .map(|m| m.keys().copied().collect())
            .unwrap_or_default();
        let in_neighbors: HashSet<UserId> = self.in_adj.get(&v).cloned().unwrap_or_default();
        let mut neighbors: Vec<UserId> = out_neighbors.union(&in_neighbors).copied().collect();
        neighbors.sort_unstable();

        // Pair scan over neighbors; lookup cost is O(1) per direction.
        let mut neighbor_edges = Vec::new();
        for (i, &s) in neighbors.iter().enumerate() {
            for &t in &neighbors[i + 1..] {
                if self.connected_either(s, t) {
                    neighbor_edges.push((s, t));
                }
            }
        }
        Ok(EgoNetwork {
            ego: v,
            neighbors,
            neighbor_edges,
            out_neighbors,
            in_neighbors,
        })
    }
}

/// Undirected neighborhood of one user, with the edges among neighbors.
#[derive(Debug, Clone)]
pub struct EgoNetwork {
    pub ego: UserId,
    /// Distinct counterparties, ascending.
    pub neighbors: Vec<UserId>,
    /// Unordered neighbor pairs (stored with smaller id first) connected
    /// in either direction within the window.
    pub neighbor_edges: Vec<(UserId, UserId)>,
    pub out_neighbors: HashSet<UserId>,
    pub in_neighbors: HashSet<UserId>,
}

impl EgoNetwork {
    /// d_v, the undirected degree of the ego.
    pub fn degree(&self) -> usize {
        self.neighbors.len()
    }
}
