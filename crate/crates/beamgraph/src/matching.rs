//! Conflict-aware weighted bipartite matching: a sorted-greedy heuristic,
//! an exhaustive exact oracle for small instances, and a feasibility
//! certifier for the beam-count, overlap, coverage, activation and CoMP
//! constraints.

use std::collections::{BTreeMap, HashMap, HashSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{self, BeamCandidate};
use crate::graphbuild::{ConflictGraph, Edge, ZoneVertex};

/// Default cap on candidates-with-edges for the exhaustive oracle.
pub const DEFAULT_EXACT_LIMIT: usize = 20;

/// Selected beams and zone associations. `total_weight` is the sum of the
/// selected edge weights, accumulated in (candidate, zone) order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    /// Active candidate indices, ascending.
    #[serde(rename = "active")]
    pub active_beams: Vec<usize>,
    /// Selected (candidate, zone) edges, sorted by (candidate, zone).
    #[serde(rename = "assoc")]
    pub associations: Vec<(usize, usize)>,
    #[serde(rename = "weight")]
    pub total_weight: f64,
}

impl Solution {
    pub fn empty() -> Self {
        Solution {
            active_beams: Vec::new(),
            associations: Vec::new(),
            total_weight: 0.0,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("solution serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse {
            line: e.line(),
            msg: e.to_string(),
        })
    }

    /// Check that the solution's indices refer to real graph elements and
    /// that associations are unique.
    pub fn validate_against(&self, graph: &ConflictGraph) -> Result<()> {
        for &c in &self.active_beams {
            if c >= graph.candidates.len() {
                return Err(Error::Consistency(format!("active candidate {c} out of range")));
            }
        }
        let mut seen = HashSet::new();
        for &(c, z) in &self.associations {
            if c >= graph.candidates.len() || z >= graph.zones.len() {
                return Err(Error::Consistency(format!(
                    "association ({c}, {z}) out of range"
                )));
            }
            if !seen.insert((c, z)) {
                return Err(Error::Consistency(format!(
                    "duplicate association ({c}, {z})"
                )));
            }
        }
        if !self.total_weight.is_finite() {
            return Err(Error::Consistency("non-finite total weight".into()));
        }
        Ok(())
    }
}

/// Which constraint a violation belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstraintKind {
    BeamCount,
    Conflict,
    Coverage,
    ActiveBeam,
    CompLimit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub constraint: ConstraintKind,
    pub details: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityReport {
    pub ok: bool,
    pub violations: Vec<Violation>,
}

/// Certify a solution against the matching-stage constraints: per-gNB beam
/// count, beam overlap (checked geometrically over the active set),
/// association-implies-edge, association-implies-active, and the per-zone
/// CoMP limit. Power constraints are certified in the simulator, where
/// power exists. Indices must be in range for `graph`.
pub fn check_feasible(
    sol: &Solution,
    graph: &ConflictGraph,
    max_beams: usize,
    comp_limit: usize,
) -> FeasibilityReport {
    let mut violations = Vec::new();

    let mut per_gnb: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
    for &c in &sol.active_beams {
        per_gnb
            .entry(graph.candidates[c].gnb_id)
            .or_default()
            .push(c);
    }
    for (gnb, cands) in &per_gnb {
        if cands.len() > max_beams {
            violations.push(Violation {
                constraint: ConstraintKind::BeamCount,
                details: format!(
                    "gNB {gnb} has {} active beams (max {max_beams})",
                    cands.len()
                ),
            });
        }
        for (i, &a) in cands.iter().enumerate() {
            for &b in &cands[i + 1..] {
                if geometry::conflicts(&graph.candidates[a], &graph.candidates[b]) {
                    violations.push(Violation {
                        constraint: ConstraintKind::Conflict,
                        details: format!("active candidates {a} and {b} overlap at gNB {gnb}"),
                    });
                }
            }
        }
    }

    let edge_set: HashSet<(usize, usize)> = graph.edges.iter().map(|e| (e.cand, e.zone)).collect();
    let active_set: HashSet<usize> = sol.active_beams.iter().copied().collect();
    let mut per_zone: BTreeMap<usize, usize> = BTreeMap::new();
    for &(c, z) in &sol.associations {
        if !edge_set.contains(&(c, z)) {
            violations.push(Violation {
                constraint: ConstraintKind::Coverage,
                details: format!("association ({c}, {z}) is not a coverage edge"),
            });
        }
        if !active_set.contains(&c) {
            violations.push(Violation {
                constraint: ConstraintKind::ActiveBeam,
                details: format!("zone index {z} is scheduled on inactive candidate {c}"),
            });
        }
        *per_zone.entry(z).or_insert(0) += 1;
    }
    for (z, count) in per_zone {
        if count > comp_limit {
            violations.push(Violation {
                constraint: ConstraintKind::CompLimit,
                details: format!("zone index {z} has {count} serving tuples (max {comp_limit})"),
            });
        }
    }

    FeasibilityReport {
        ok: violations.is_empty(),
        violations,
    }
}

/// Edge indices in descending weight, ties broken by lower candidate index
/// then lower zone index.
fn edge_order(graph: &ConflictGraph) -> Vec<usize> {
    let mut order: Vec<usize> = (0..graph.edges.len()).collect();
    order.sort_by(|&i, &j| {
        let (a, b) = (&graph.edges[i], &graph.edges[j]);
        b.weight
            .total_cmp(&a.weight)
            .then(a.cand.cmp(&b.cand))
            .then(a.zone.cmp(&b.zone))
    });
    order
}

fn finish_solution(graph: &ConflictGraph, mut associations: Vec<(usize, usize)>) -> Solution {
    associations.sort_unstable();
    let weight_of: HashMap<(usize, usize), f64> = graph
        .edges
        .iter()
        .map(|e| ((e.cand, e.zone), e.weight))
        .collect();
    let total_weight = associations
        .iter()
        .map(|key| weight_of[key])
        .sum();
    let mut active_beams: Vec<usize> = associations.iter().map(|&(c, _)| c).collect();
    active_beams.sort_unstable();
    active_beams.dedup();
    Solution {
        active_beams,
        associations,
        total_weight,
    }
}

/// Greedy matching: scan edges in descending weight and accept an edge when
/// the zone still has CoMP budget and the candidate is active or can be
/// activated without exceeding the per-gNB beam count or overlapping an
/// already-active beam. The result is feasible and maximal.
pub fn greedy_match(graph: &ConflictGraph, max_beams: usize, comp_limit: usize) -> Solution {
    let adj = graph.conflict_adjacency();
    let mut active = vec![false; graph.candidates.len()];
    let mut per_gnb: HashMap<u32, usize> = HashMap::new();
    let mut zone_fill = vec![0usize; graph.zones.len()];
    let mut picked = Vec::new();

    for idx in edge_order(graph) {
        let Edge { cand, zone, .. } = graph.edges[idx];
        if zone_fill[zone] >= comp_limit {
            continue;
        }
        if !active[cand] {
            let gnb = graph.candidates[cand].gnb_id;
            if per_gnb.get(&gnb).copied().unwrap_or(0) >= max_beams {
                continue;
            }
            if adj[cand].iter().any(|&o| active[o]) {
                continue;
            }
            active[cand] = true;
            *per_gnb.entry(gnb).or_insert(0) += 1;
        }
        zone_fill[zone] += 1;
        picked.push((cand, zone));
    }

    finish_solution(graph, picked)
}

/// True iff no unselected edge can be added to `sol` without violating a
/// constraint.
pub fn is_maximal(
    sol: &Solution,
    graph: &ConflictGraph,
    max_beams: usize,
    comp_limit: usize,
) -> bool {
    let adj = graph.conflict_adjacency();
    let mut active = vec![false; graph.candidates.len()];
    for &c in &sol.active_beams {
        active[c] = true;
    }
    let mut per_gnb: HashMap<u32, usize> = HashMap::new();
    for &c in &sol.active_beams {
        *per_gnb.entry(graph.candidates[c].gnb_id).or_insert(0) += 1;
    }
    let mut zone_fill = vec![0usize; graph.zones.len()];
    let selected: HashSet<(usize, usize)> = sol.associations.iter().copied().collect();
    for &(_, z) in &sol.associations {
        zone_fill[z] += 1;
    }
    for e in &graph.edges {
        if selected.contains(&(e.cand, e.zone)) {
            continue;
        }
        if zone_fill[e.zone] >= comp_limit {
            continue;
        }
        let addable = active[e.cand]
            || (per_gnb
                .get(&graph.candidates[e.cand].gnb_id)
                .copied()
                .unwrap_or(0)
                < max_beams
                && adj[e.cand].iter().all(|&o| !active[o]));
        if addable {
            return false;
        }
    }
    true
}

/// Exhaustive oracle: enumerate every feasible active-beam subset (over
/// candidates that have edges) and complete each with the per-zone optimal
/// association, which is independent across zones once the active set is
/// fixed: each zone simply takes its `comp_limit` highest-weight edges to
/// active candidates. Returns a maximum-weight solution; ties prefer the
/// lexicographically smallest active set. Errors when more than `limit`
/// candidates carry edges.
pub fn exact_match(
    graph: &ConflictGraph,
    max_beams: usize,
    comp_limit: usize,
    limit: usize,
) -> Result<Solution> {
    let mut with_edges: Vec<usize> = graph.edges.iter().map(|e| e.cand).collect();
    with_edges.sort_unstable();
    with_edges.dedup();
    if with_edges.len() > limit {
        return Err(Error::Size(format!(
            "{} candidates with edges exceeds the exhaustive-search cap {limit}",
            with_edges.len()
        )));
    }

    // per zone: candidate edges in descending weight, ties by candidate
    let mut zone_edges: Vec<Vec<(usize, f64)>> = vec![Vec::new(); graph.zones.len()];
    for e in &graph.edges {
        zone_edges[e.zone].push((e.cand, e.weight));
    }
    for list in &mut zone_edges {
        list.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    }

    let conflict_pairs: HashSet<(usize, usize)> = graph
        .conflicts
        .iter()
        .map(|&(a, b)| (a.min(b), a.max(b)))
        .collect();

    struct Search<'a> {
        graph: &'a ConflictGraph,
        with_edges: &'a [usize],
        zone_edges: &'a [Vec<(usize, f64)>],
        conflict_pairs: &'a HashSet<(usize, usize)>,
        max_beams: usize,
        comp_limit: usize,
        chosen: Vec<usize>,
        per_gnb: HashMap<u32, usize>,
        best: Option<Solution>,
    }

    impl Search<'_> {
        fn complete(&mut self) {
            let chosen: HashSet<usize> = self.chosen.iter().copied().collect();
            let mut associations = Vec::new();
            for (z, list) in self.zone_edges.iter().enumerate() {
                let mut taken = 0;
                for &(c, _) in list {
                    if taken == self.comp_limit {
                        break;
                    }
                    if chosen.contains(&c) {
                        associations.push((c, z));
                        taken += 1;
                    }
                }
            }
            let sol = finish_solution(self.graph, associations);
            let better = match &self.best {
                None => true,
                Some(best) => {
                    sol.total_weight > best.total_weight
                        || (sol.total_weight == best.total_weight
                            && sol.active_beams < best.active_beams)
                }
            };
            if better {
                self.best = Some(sol);
            }
        }

        fn recurse(&mut self, i: usize) {
            if i == self.with_edges.len() {
                self.complete();
                return;
            }
            let cand = self.with_edges[i];
            let gnb = self.graph.candidates[cand].gnb_id;
            let count = self.per_gnb.get(&gnb).copied().unwrap_or(0);
            let clash = self
                .chosen
                .iter()
                .any(|&o| self.conflict_pairs.contains(&(o.min(cand), o.max(cand))));
            if count < self.max_beams && !clash {
                self.chosen.push(cand);
                *self.per_gnb.entry(gnb).or_insert(0) += 1;
                self.recurse(i + 1);
                self.chosen.pop();
                *self.per_gnb.get_mut(&gnb).unwrap() -= 1;
            }
            self.recurse(i + 1);
        }
    }

    let mut search = Search {
        graph,
        with_edges: &with_edges,
        zone_edges: &zone_edges,
        conflict_pairs: &conflict_pairs,
        max_beams,
        comp_limit,
        chosen: Vec::new(),
        per_gnb: HashMap::new(),
        best: None,
    };
    search.recurse(0);
    Ok(search.best.unwrap_or_else(Solution::empty))
}

/// Recompute the objective value of a solution from the graph. Errors if an
/// association refers to a missing edge; otherwise equals
/// `sol.total_weight` bit-exactly (same summation order).
pub fn solution_weight(sol: &Solution, graph: &ConflictGraph) -> Result<f64> {
    let weight_of: HashMap<(usize, usize), f64> = graph
        .edges
        .iter()
        .map(|e| ((e.cand, e.zone), e.weight))
        .collect();
    let mut total = 0.0;
    for &(c, z) in &sol.associations {
        total += weight_of.get(&(c, z)).copied().ok_or_else(|| {
            Error::Consistency(format!("association ({c}, {z}) is not a graph edge"))
        })?;
    }
    Ok(total)
}

/// A randomly generated small instance for oracle validation.
#[derive(Debug, Clone)]
pub struct RandomInstance {
    pub graph: ConflictGraph,
    pub max_beams: usize,
    pub comp_limit: usize,
    /// Even seeds generate instances with one candidate per gNB (no
    /// conflicts possible) and `comp_limit` 1, where the classic 1/2
    /// greedy bound applies.
    pub conflict_free: bool,
}

/// Seeded random instance: at most 12 candidates and 8 zones, geometric
/// conflicts, random edge set and weights.
pub fn random_instance(seed: u64) -> RandomInstance {
    random_instance_capped(seed, 12)
}

/// [`random_instance`] with an explicit candidate cap.
pub fn random_instance_capped(seed: u64, max_candidates: usize) -> RandomInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let conflict_free = seed.is_multiple_of(2);
    let n_cands = rng.gen_range(1..=max_candidates.clamp(1, 12));
    let n_zones = rng.gen_range(1..=8);
    let widths = [5.0, 10.0, 15.0];

    let candidates: Vec<BeamCandidate> = (0..n_cands)
        .map(|i| {
            let gnb_id = if conflict_free {
                i as u32
            } else {
                rng.gen_range(0..3u32)
            };
            BeamCandidate {
                gnb_id,
                direction_deg: rng.gen_range(0.0..360.0),
                width_deg: widths[rng.gen_range(0..widths.len())],
            }
        })
        .collect();

    let zones: Vec<ZoneVertex> = (0..n_zones)
        .map(|zone_id| ZoneVertex {
            zone_id,
            vehicles: 1,
        })
        .collect();

    let mut edges = Vec::new();
    for c in 0..n_cands {
        for z in 0..n_zones {
            if rng.gen_bool(0.45) {
                edges.push(Edge {
                    cand: c,
                    zone: z,
                    weight: rng.gen_range(0.5..10.0),
                });
            }
        }
    }

    let mut has_edge = vec![false; n_cands];
    for e in &edges {
        has_edge[e.cand] = true;
    }
    let mut conflicts = Vec::new();
    for a in 0..n_cands {
        for b in (a + 1)..n_cands {
            if has_edge[a]
                && has_edge[b]
                && geometry::conflicts(&candidates[a], &candidates[b])
            {
                conflicts.push((a, b));
            }
        }
    }

    let max_beams = rng.gen_range(1..=4);
    let comp_limit = if conflict_free {
        1
    } else {
        rng.gen_range(1..=2)
    };

    RandomInstance {
        graph: ConflictGraph {
            candidates,
            zones,
            edges,
            conflicts,
        },
        max_beams,
        comp_limit,
        conflict_free,
    }
}
