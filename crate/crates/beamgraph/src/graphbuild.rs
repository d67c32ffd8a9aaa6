//! Construction of the conflict-aware weighted bipartite graph for one
//! snapshot: candidate enumeration, coverage edges carrying noise-limited
//! weights, and conflict edges between same-gNB candidates.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::channel::{self, LinkState};
use crate::error::{Error, Result};
use crate::geometry::{self, BeamCandidate};
use crate::scenario::{Config, GnbSite, VehicleSnapshot, ZoneGrid};

/// A right-hand graph vertex: an occupied zone.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZoneVertex {
    pub zone_id: usize,
    pub vehicles: usize,
}

/// A coverage edge. Serialized as the `[candidate, zone, weight]` triple.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "(usize, usize, f64)", into = "(usize, usize, f64)")]
pub struct Edge {
    pub cand: usize,
    pub zone: usize,
    pub weight: f64,
}

impl From<(usize, usize, f64)> for Edge {
    fn from(t: (usize, usize, f64)) -> Self {
        Edge {
            cand: t.0,
            zone: t.1,
            weight: t.2,
        }
    }
}

impl From<Edge> for (usize, usize, f64) {
    fn from(e: Edge) -> Self {
        (e.cand, e.zone, e.weight)
    }
}

/// Bipartite weighted graph of beam candidates versus occupied zones, plus
/// conflict pairs between mutually exclusive candidates of the same gNB.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConflictGraph {
    pub candidates: Vec<BeamCandidate>,
    pub zones: Vec<ZoneVertex>,
    pub edges: Vec<Edge>,
    pub conflicts: Vec<(usize, usize)>,
}

impl ConflictGraph {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("graph serialization cannot fail")
    }

    /// Parse a graph dump and check its structural invariants.
    pub fn from_json(text: &str) -> Result<Self> {
        let graph: ConflictGraph = serde_json::from_str(text).map_err(|e| Error::Parse {
            line: e.line(),
            msg: e.to_string(),
        })?;
        graph.validate()?;
        Ok(graph)
    }

    pub fn validate(&self) -> Result<()> {
        for c in &self.candidates {
            let width_ok = c.width_deg.is_finite() && c.width_deg > 0.0 && c.width_deg < 360.0;
            if !width_ok || !c.direction_deg.is_finite() {
                return Err(Error::Consistency(format!("malformed candidate {c:?}")));
            }
        }
        let mut seen = std::collections::HashSet::new();
        for e in &self.edges {
            if e.cand >= self.candidates.len() || e.zone >= self.zones.len() {
                return Err(Error::Consistency(format!(
                    "edge ({}, {}) out of range",
                    e.cand, e.zone
                )));
            }
            if e.weight.is_nan() || e.weight <= 0.0 || !e.weight.is_finite() {
                return Err(Error::Consistency(format!(
                    "edge ({}, {}) has non-positive weight {}",
                    e.cand, e.zone, e.weight
                )));
            }
            if !seen.insert((e.cand, e.zone)) {
                return Err(Error::Consistency(format!(
                    "duplicate edge ({}, {})",
                    e.cand, e.zone
                )));
            }
        }
        for &(a, b) in &self.conflicts {
            if a >= self.candidates.len() || b >= self.candidates.len() || a == b {
                return Err(Error::Consistency(format!("bad conflict pair ({a}, {b})")));
            }
            if !geometry::conflicts(&self.candidates[a], &self.candidates[b]) {
                return Err(Error::Consistency(format!(
                    "listed conflict ({a}, {b}) does not overlap"
                )));
            }
        }
        Ok(())
    }

    /// Conflict neighbors per candidate, for solvers.
    pub fn conflict_adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.candidates.len()];
        for &(a, b) in &self.conflicts {
            adj[a].push(b);
            adj[b].push(a);
        }
        adj
    }
}

/// Every (direction, width) combination at every gNB, in deterministic
/// (gnb, direction, width) order.
pub fn enumerate_candidates(gnbs: &[GnbSite], config: &Config) -> Vec<BeamCandidate> {
    let step = config.radio.direction_step_deg;
    let n_dirs = (360.0 / step).round() as usize;
    let mut out = Vec::with_capacity(gnbs.len() * n_dirs * config.radio.beamwidth_set_deg.len());
    for gnb in gnbs {
        for k in 0..n_dirs {
            let direction = k as f64 * step;
            for &width in &config.radio.beamwidth_set_deg {
                out.push(BeamCandidate {
                    gnb_id: gnb.id,
                    direction_deg: direction,
                    width_deg: width,
                });
            }
        }
    }
    out
}

/// Build the conflict graph for one snapshot over the full candidate
/// enumeration.
pub fn build_graph(
    snap: &VehicleSnapshot,
    grid: &ZoneGrid,
    gnbs: &[GnbSite],
    config: &Config,
    seed: u64,
) -> ConflictGraph {
    let candidates = enumerate_candidates(gnbs, config);
    graph_from_candidates(candidates, snap, grid, gnbs, config, seed)
}

/// Build coverage edges and conflict pairs for an arbitrary candidate list
/// (the full enumeration for the matcher, or a designed beam set for the
/// clustering baseline).
pub fn graph_from_candidates(
    candidates: Vec<BeamCandidate>,
    snap: &VehicleSnapshot,
    grid: &ZoneGrid,
    gnbs: &[GnbSite],
    config: &Config,
    seed: u64,
) -> ConflictGraph {
    let mut zone_counts: BTreeMap<usize, usize> = BTreeMap::new();
    for e in &snap.entries {
        *zone_counts.entry(e.zone_id).or_insert(0) += 1;
    }
    let zones: Vec<ZoneVertex> = zone_counts
        .iter()
        .map(|(&zone_id, &vehicles)| ZoneVertex { zone_id, vehicles })
        .collect();

    let gnb_by_id: BTreeMap<u32, &GnbSite> = gnbs.iter().map(|g| (g.id, g)).collect();

    // Per (gnb, zone): departure angle and frozen link state. Zones whose
    // center coincides with the gNB position have no defined bearing and
    // get no edges.
    let mut links: BTreeMap<(u32, usize), (f64, LinkState)> = BTreeMap::new();
    for (&gnb_id, gnb) in &gnb_by_id {
        for zv in &zones {
            let center = grid.zone_center(zv.zone_id);
            let Ok(theta) = geometry::angle_of_departure(&gnb.position, &center) else {
                continue;
            };
            let distance = gnb.position.distance(&center);
            let los = channel::los_state(gnb_id, zv.zone_id, distance, config.model.d_los_m, seed);
            links.insert(
                (gnb_id, zv.zone_id),
                (
                    theta,
                    LinkState {
                        gnb_id,
                        zone_id: zv.zone_id,
                        los,
                        distance_m: distance,
                    },
                ),
            );
        }
    }

    let noise = channel::noise_power(config.radio.bandwidth_hz, config.radio.noise_figure_db);
    // Provisional per-beam power: the worst-case even split of the budget,
    // so weights never overestimate the post-allocation rate.
    let provisional_power =
        channel::dbm_to_watts(config.radio.tx_power_dbm) / config.radio.max_beams as f64;
    let rx_gain = channel::tx_gain(config.radio.rx_beamwidth_deg, true, config.radio.sidelobe_gain);

    let mut edges = Vec::new();
    for (ci, cand) in candidates.iter().enumerate() {
        for (zi, zv) in zones.iter().enumerate() {
            let Some((theta, link)) = links.get(&(cand.gnb_id, zv.zone_id)) else {
                continue;
            };
            if !geometry::covers(cand, *theta) {
                continue;
            }
            let weight = channel::noise_limited_rate(
                link,
                cand,
                provisional_power,
                rx_gain,
                zv.vehicles,
                noise,
                config.radio.bandwidth_hz,
                config.radio.sidelobe_gain,
                config.radio.carrier_freq_ghz,
                config.model.pl_exp_los,
                config.model.pl_exp_nlos,
            );
            if weight >= config.radio.min_edge_rate_bps {
                edges.push(Edge {
                    cand: ci,
                    zone: zi,
                    weight,
                });
            }
        }
    }

    // Conflict pairs among candidates that can actually carry an edge.
    let mut has_edge = vec![false; candidates.len()];
    for e in &edges {
        has_edge[e.cand] = true;
    }
    let mut by_gnb: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
    for (ci, cand) in candidates.iter().enumerate() {
        if has_edge[ci] {
            by_gnb.entry(cand.gnb_id).or_default().push(ci);
        }
    }
    let mut conflicts = Vec::new();
    for group in by_gnb.values() {
        for (i, &a) in group.iter().enumerate() {
            for &b in &group[i + 1..] {
                if geometry::conflicts(&candidates[a], &candidates[b]) {
                    conflicts.push((a, b));
                }
            }
        }
    }

    ConflictGraph {
        candidates,
        zones,
        edges,
        conflicts,
    }
}

/// Drop candidates that can never improve the greedy solution: candidates
/// without edges, and candidates strictly shadowed by a same-gNB candidate
/// that covers at least the same zones at no lower weight while conflicting
/// with no more. The greedy result on the pruned graph equals the result on
/// the unpruned graph.
pub fn prune_dominated(graph: &ConflictGraph) -> ConflictGraph {
    let n = graph.candidates.len();
    let mut edge_map: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); n];
    for e in &graph.edges {
        edge_map[e.cand].insert(e.zone, e.weight);
    }
    let mut conflict_set: Vec<std::collections::BTreeSet<usize>> =
        vec![std::collections::BTreeSet::new(); n];
    let mut conflict_pair = std::collections::HashSet::new();
    for &(a, b) in &graph.conflicts {
        conflict_set[a].insert(b);
        conflict_set[b].insert(a);
        conflict_pair.insert((a.min(b), a.max(b)));
    }

    // dominated(c, d): with d kept, greedy will reject every edge of c.
    // Requires mutual conflict (so d active blocks c), a pointwise-covered
    // edge set, and a conflict set that contains d's (minus each other).
    // Ties in weight additionally need d to sort before c.
    let dominated = |c: usize, d: usize| -> bool {
        if c == d || edge_map[c].is_empty() || edge_map[d].is_empty() {
            return false;
        }
        if !conflict_pair.contains(&(c.min(d), c.max(d))) {
            return false;
        }
        let mut has_tie = false;
        for (&zone, &wc) in &edge_map[c] {
            match edge_map[d].get(&zone) {
                Some(&wd) if wc <= wd => {
                    if wc == wd {
                        has_tie = true;
                    }
                }
                _ => return false,
            }
        }
        if has_tie && d > c {
            return false;
        }
        for &other in &conflict_set[d] {
            if other != c && !conflict_set[c].contains(&other) {
                return false;
            }
        }
        true
    };

    let has_dominator = |c: usize| (0..n).any(|d| dominated(c, d));
    let mut removed = vec![false; n];
    for c in 0..n {
        if edge_map[c].is_empty() {
            removed[c] = true;
            continue;
        }
        // only dominators that themselves survive may justify a removal
        removed[c] = (0..n).any(|d| dominated(c, d) && !has_dominator(d));
    }

    let mut remap = vec![usize::MAX; n];
    let mut candidates = Vec::new();
    for (i, cand) in graph.candidates.iter().enumerate() {
        if !removed[i] {
            remap[i] = candidates.len();
            candidates.push(*cand);
        }
    }
    let edges = graph
        .edges
        .iter()
        .filter(|e| !removed[e.cand])
        .map(|e| Edge {
            cand: remap[e.cand],
            zone: e.zone,
            weight: e.weight,
        })
        .collect();
    let conflicts = graph
        .conflicts
        .iter()
        .filter(|&&(a, b)| !removed[a] && !removed[b])
        .map(|&(a, b)| (remap[a], remap[b]))
        .collect();

    ConflictGraph {
        candidates,
        zones: graph.zones.clone(),
        edges,
        conflicts,
    }
}
