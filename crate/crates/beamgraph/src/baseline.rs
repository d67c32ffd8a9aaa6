//! Clustering-based benchmark beam designer: 1-D DBSCAN over vehicle
//! departure angles per gNB (with the circular metric), cluster-to-beam
//! conversion with a per-beam width sweep, and zone association.

use std::collections::{BTreeMap, HashMap, VecDeque};

use crate::channel;
use crate::geometry::{self, BeamCandidate};
use crate::graphbuild::{graph_from_candidates, ConflictGraph};
use crate::matching::Solution;
use crate::scenario::{Config, GnbSite, VehicleSnapshot, ZoneGrid};

/// DBSCAN output: clusters and noise partition the input angle multiset.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterSet {
    pub clusters: Vec<Vec<f64>>,
    pub noise: Vec<f64>,
}

#[derive(Clone, Copy, PartialEq)]
enum Label {
    Unvisited,
    Noise,
    Cluster(usize),
}

/// Standard DBSCAN over angles with the circular distance metric. A point
/// is core iff at least `min_pts` points (including itself) lie within
/// `eps`. Points are visited and expanded in ascending-angle order (ties by
/// input position), which makes the outcome deterministic.
pub fn dbscan_circular(angles: &[f64], eps: f64, min_pts: usize) -> ClusterSet {
    let n = angles.len();
    let neighbors = |i: usize| -> Vec<usize> {
        let mut out: Vec<usize> = (0..n)
            .filter(|&j| geometry::circular_distance(angles[i], angles[j]) <= eps)
            .collect();
        out.sort_by(|&a, &b| angles[a].total_cmp(&angles[b]).then(a.cmp(&b)));
        out
    };

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| angles[a].total_cmp(&angles[b]).then(a.cmp(&b)));

    let mut labels = vec![Label::Unvisited; n];
    let mut n_clusters = 0;
    for &i in &order {
        if labels[i] != Label::Unvisited {
            continue;
        }
        let nbrs = neighbors(i);
        if nbrs.len() < min_pts {
            labels[i] = Label::Noise;
            continue;
        }
        let cluster = n_clusters;
        n_clusters += 1;
        labels[i] = Label::Cluster(cluster);
        let mut queue: VecDeque<usize> = nbrs.into_iter().collect();
        while let Some(j) = queue.pop_front() {
            match labels[j] {
                Label::Cluster(_) => continue,
                Label::Noise => {
                    // border point claimed by the first cluster to reach it
                    labels[j] = Label::Cluster(cluster);
                }
                Label::Unvisited => {
                    labels[j] = Label::Cluster(cluster);
                    let jn = neighbors(j);
                    if jn.len() >= min_pts {
                        queue.extend(jn);
                    }
                }
            }
        }
    }

    let mut clusters = vec![Vec::new(); n_clusters];
    let mut noise = Vec::new();
    for i in 0..n {
        match labels[i] {
            Label::Cluster(k) => clusters[k].push(angles[i]),
            Label::Noise => noise.push(angles[i]),
            Label::Unvisited => unreachable!("all points are labeled"),
        }
    }
    ClusterSet { clusters, noise }
}

/// Circular mean of a non-empty angle list via the vector sum; falls back
/// to the first member when the sum degenerates to the zero vector.
fn circular_mean(angles: &[f64]) -> f64 {
    let (mut sx, mut sy) = (0.0f64, 0.0f64);
    for &a in angles {
        sx += a.to_radians().cos();
        sy += a.to_radians().sin();
    }
    if sx.hypot(sy) < 1e-12 {
        return angles[0];
    }
    geometry::normalize_deg(sy.atan2(sx).to_degrees())
}

/// Design up to `max_beams` beams for one gNB by clustering the departure
/// angles of the snapshot's vehicles: the largest clusters become beams
/// pointed at their circular mean (rounded to the direction grid), each
/// beam takes the width that maximizes the summed noise-limited rate over
/// the occupied zones it covers, and beams made overlapping by widening are
/// dropped in favor of the larger cluster.
pub fn dbscan_beam_design(
    snap: &VehicleSnapshot,
    grid: &ZoneGrid,
    gnb: &GnbSite,
    config: &Config,
    seed: u64,
) -> Vec<BeamCandidate> {
    let angles: Vec<f64> = snap
        .entries
        .iter()
        .filter_map(|e| geometry::angle_of_departure(&gnb.position, &e.position).ok())
        .collect();
    let clusters = dbscan_circular(
        &angles,
        config.model.dbscan_eps_deg,
        config.model.dbscan_min_pts,
    );

    let mut ranked: Vec<(usize, f64)> = clusters
        .clusters
        .iter()
        .enumerate()
        .map(|(i, members)| (i, circular_mean(members)))
        .collect();
    ranked.sort_by(|a, b| {
        clusters.clusters[b.0]
            .len()
            .cmp(&clusters.clusters[a.0].len())
            .then(a.1.total_cmp(&b.1))
    });
    ranked.truncate(config.radio.max_beams);

    // occupied zones with their departure angles and frozen link states
    let mut zone_counts: BTreeMap<usize, usize> = BTreeMap::new();
    for e in &snap.entries {
        *zone_counts.entry(e.zone_id).or_insert(0) += 1;
    }
    let noise = channel::noise_power(config.radio.bandwidth_hz, config.radio.noise_figure_db);
    let power = channel::dbm_to_watts(config.radio.tx_power_dbm) / config.radio.max_beams as f64;
    let rx_gain = channel::tx_gain(config.radio.rx_beamwidth_deg, true, config.radio.sidelobe_gain);
    let zone_info: Vec<(f64, channel::LinkState, usize)> = zone_counts
        .iter()
        .filter_map(|(&zone_id, &vehicles)| {
            let center = grid.zone_center(zone_id);
            let theta = geometry::angle_of_departure(&gnb.position, &center).ok()?;
            let distance = gnb.position.distance(&center);
            let los = channel::los_state(gnb.id, zone_id, distance, config.model.d_los_m, seed);
            Some((
                theta,
                channel::LinkState {
                    gnb_id: gnb.id,
                    zone_id,
                    los,
                    distance_m: distance,
                },
                vehicles,
            ))
        })
        .collect();

    let sweep_score = |beam: &BeamCandidate| -> f64 {
        zone_info
            .iter()
            .filter(|(theta, _, _)| geometry::covers(beam, *theta))
            .map(|(_, link, vehicles)| {
                channel::noise_limited_rate(
                    link,
                    beam,
                    power,
                    rx_gain,
                    *vehicles,
                    noise,
                    config.radio.bandwidth_hz,
                    config.radio.sidelobe_gain,
                    config.radio.carrier_freq_ghz,
                    config.model.pl_exp_los,
                    config.model.pl_exp_nlos,
                )
            })
            .sum()
    };

    let step = config.radio.direction_step_deg;
    let mut kept: Vec<BeamCandidate> = Vec::new();
    for (_, mean) in ranked {
        let direction = geometry::normalize_deg((mean / step + 0.5).floor() * step);
        let mut best: Option<(f64, BeamCandidate)> = None;
        for &width in &config.radio.beamwidth_set_deg {
            let beam = BeamCandidate {
                gnb_id: gnb.id,
                direction_deg: direction,
                width_deg: width,
            };
            let score = sweep_score(&beam);
            if best.as_ref().is_none_or(|(s, _)| score > *s) {
                best = Some((score, beam));
            }
        }
        let (_, beam) = best.expect("beamwidth set is never empty");
        if kept.iter().all(|k| !geometry::conflicts(k, &beam)) {
            kept.push(beam);
        }
    }
    kept
}

/// Associate occupied zones to the designed beams: every designed beam is
/// active, and each zone takes its up-to-`comp_limit` covering beams with
/// the highest noise-limited rate. Returns the coverage graph over the
/// designed beams together with the solution, which satisfies the matching
/// constraints by construction.
pub fn dbscan_associate(
    beams: Vec<BeamCandidate>,
    snap: &VehicleSnapshot,
    grid: &ZoneGrid,
    gnbs: &[GnbSite],
    config: &Config,
    seed: u64,
) -> (ConflictGraph, Solution) {
    let graph = graph_from_candidates(beams, snap, grid, gnbs, config, seed);

    let mut per_zone: BTreeMap<usize, Vec<(usize, f64)>> = BTreeMap::new();
    for e in &graph.edges {
        per_zone.entry(e.zone).or_default().push((e.cand, e.weight));
    }
    let mut associations: Vec<(usize, usize)> = Vec::new();
    for (&zone, list) in per_zone.iter_mut() {
        list.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        for &(cand, _) in list.iter().take(config.radio.comp_limit) {
            associations.push((cand, zone));
        }
    }
    associations.sort_unstable();

    let weight_of: HashMap<(usize, usize), f64> = graph
        .edges
        .iter()
        .map(|e| ((e.cand, e.zone), e.weight))
        .collect();
    let total_weight = associations.iter().map(|key| weight_of[key]).sum();

    let solution = Solution {
        active_beams: (0..graph.candidates.len()).collect(),
        associations,
        total_weight,
    };
    (graph, solution)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Point;
    use crate::matching::check_feasible;
    use crate::scenario::{generate_synthetic, snapshot, Trace};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn dbscan_hand_traced_example() {
        let angles = [10.0, 11.0, 12.0, 50.0, 51.0, 200.0];
        let result = dbscan_circular(&angles, 3.0, 2);
        assert_eq!(
            result.clusters,
            vec![vec![10.0, 11.0, 12.0], vec![50.0, 51.0]]
        );
        assert_eq!(result.noise, vec![200.0]);
    }

    #[test]
    fn dbscan_empty_and_wraparound() {
        let empty = dbscan_circular(&[], 3.0, 2);
        assert!(empty.clusters.is_empty() && empty.noise.is_empty());

        let wrap = dbscan_circular(&[359.0, 1.0], 3.0, 2);
        assert_eq!(wrap.clusters.len(), 1);
        assert_eq!(wrap.clusters[0], vec![359.0, 1.0]);
        assert!(wrap.noise.is_empty());
    }

    #[test]
    fn dbscan_partitions_the_input() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let n = rng.gen_range(0..40);
            let angles: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..360.0)).collect();
            let result = dbscan_circular(&angles, 4.0, 3);
            let total: usize = result.clusters.iter().map(|c| c.len()).sum::<usize>()
                + result.noise.len();
            assert_eq!(total, n);
            for c in &result.clusters {
                assert!(c.len() >= 3);
            }
        }
    }

    #[test]
    fn dbscan_cluster_structure_survives_rotation() {
        // well-separated packs so border assignment is unambiguous
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..30 {
            let mut angles = Vec::new();
            for center in [20.0, 130.0, 260.0] {
                for _ in 0..rng.gen_range(2..6) {
                    angles.push(geometry::normalize_deg(
                        center + rng.gen_range(-2.0..2.0),
                    ));
                }
            }
            let shift: f64 = rng.gen_range(0.0..360.0);
            let rotated: Vec<f64> = angles
                .iter()
                .map(|&a| geometry::normalize_deg(a + shift))
                .collect();

            let structure = |input: &[f64]| {
                let r = dbscan_circular(input, 3.0, 2);
                let mut sets: Vec<Vec<usize>> = r
                    .clusters
                    .iter()
                    .map(|members| {
                        let mut idx: Vec<usize> = members
                            .iter()
                            .map(|m| {
                                input
                                    .iter()
                                    .position(|a| a == m)
                                    .expect("member comes from input")
                            })
                            .collect();
                        idx.sort_unstable();
                        idx
                    })
                    .collect();
                sets.sort();
                sets
            };
            assert_eq!(structure(&angles), structure(&rotated));
        }
    }

    fn design_scenario() -> (VehicleSnapshot, ZoneGrid, GnbSite, Config) {
        let grid = ZoneGrid::new(Point::new(-200.0, -200.0), 25.0, 16, 16).unwrap();
        let gnb = GnbSite {
            id: 0,
            position: Point::new(0.0, 0.0),
        };
        (
            VehicleSnapshot {
                time_s: 0.0,
                entries: vec![],
                out_of_grid: 0,
            },
            grid,
            gnb,
            Config::default(),
        )
    }

    #[test]
    fn design_with_no_vehicles_is_empty() {
        let (snap, grid, gnb, cfg) = design_scenario();
        assert!(dbscan_beam_design(&snap, &grid, &gnb, &cfg, 1).is_empty());
    }

    #[test]
    fn tight_cluster_becomes_one_beam_with_swept_width() {
        let (_, grid, gnb, cfg) = design_scenario();
        // three vehicles due north at ~100 m
        let csv = "time_s,vehicle_id,x_m,y_m\n0,1,-2,100\n0,2,0,100\n0,3,2,100\n";
        let trace = Trace::parse_csv(csv.as_bytes(), 1.0).unwrap();
        let snap = snapshot(&trace, &grid, 0.0).unwrap();
        let seed = 4;
        let beams = dbscan_beam_design(&snap, &grid, &gnb, &cfg, seed);
        assert_eq!(beams.len(), 1);
        assert_eq!(beams[0].direction_deg, 90.0);

        // oracle: recompute the sweep for every width at this direction
        let (graph, _) = dbscan_associate(
            cfg.radio
                .beamwidth_set_deg
                .iter()
                .map(|&w| BeamCandidate {
                    gnb_id: 0,
                    direction_deg: 90.0,
                    width_deg: w,
                })
                .collect(),
            &snap,
            &grid,
            &[gnb],
            &cfg,
            seed,
        );
        let mut score = vec![0.0; cfg.radio.beamwidth_set_deg.len()];
        for e in &graph.edges {
            score[e.cand] += e.weight;
        }
        let best = score
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1).then(b.0.cmp(&a.0)))
            .map(|(i, _)| cfg.radio.beamwidth_set_deg[i])
            .unwrap();
        assert_eq!(beams[0].width_deg, best);
    }

    #[test]
    fn beam_direction_wraps_onto_the_grid() {
        let (_, grid, gnb, cfg) = design_scenario();
        // cluster mean just below 360 degrees must round to direction 0
        let csv = "time_s,vehicle_id,x_m,y_m\n0,1,100,-2.6\n0,2,100,-2.2\n0,3,120,-3.1\n";
        let trace = Trace::parse_csv(csv.as_bytes(), 1.0).unwrap();
        let snap = snapshot(&trace, &grid, 0.0).unwrap();
        let beams = dbscan_beam_design(&snap, &grid, &gnb, &cfg, 3);
        assert_eq!(beams.len(), 1);
        assert_eq!(beams[0].direction_deg, 0.0);
        // every designed direction sits on the direction grid in [0, 360)
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20 {
            let csv = {
                let mut s = String::from("time_s,vehicle_id,x_m,y_m\n");
                for v in 0..rng.gen_range(1..15) {
                    s.push_str(&format!(
                        "0,{v},{},{}\n",
                        rng.gen_range(-190.0..190.0),
                        rng.gen_range(-190.0..190.0)
                    ));
                }
                s
            };
            let trace = Trace::parse_csv(csv.as_bytes(), 1.0).unwrap();
            let snap = snapshot(&trace, &grid, 0.0).unwrap();
            for beam in dbscan_beam_design(&snap, &grid, &gnb, &cfg, 9) {
                assert!((0.0..360.0).contains(&beam.direction_deg));
                let steps = beam.direction_deg / cfg.radio.direction_step_deg;
                assert_eq!(steps, steps.round());
                assert!(cfg.radio.beamwidth_set_deg.contains(&beam.width_deg));
            }
        }
    }

    #[test]
    fn cluster_count_capped_at_max_beams() {
        let (_, grid, gnb, mut cfg) = design_scenario();
        cfg.radio.max_beams = 2;
        // three clear clusters of two vehicles each
        let csv = "time_s,vehicle_id,x_m,y_m\n\
                   0,1,100,0\n0,2,100,3\n\
                   0,3,0,100\n0,4,3,100\n\
                   0,5,-100,0\n0,6,-100,-3\n";
        let trace = Trace::parse_csv(csv.as_bytes(), 1.0).unwrap();
        let snap = snapshot(&trace, &grid, 0.0).unwrap();
        let beams = dbscan_beam_design(&snap, &grid, &gnb, &cfg, 1);
        assert_eq!(beams.len(), 2);
        // emitted beams never conflict with each other
        for (i, a) in beams.iter().enumerate() {
            for b in &beams[i + 1..] {
                assert!(!geometry::conflicts(a, b));
            }
        }
    }

    #[test]
    fn associate_is_always_feasible_on_random_scenarios() {
        for seed in 0..20u64 {
            let (trace, gnbs) =
                generate_synthetic(600.0, 600.0, 25, 4, 2.0, 1.0, seed).unwrap();
            let cfg = Config::default();
            let points: Vec<Point> = trace
                .records
                .iter()
                .map(|r| r.position)
                .chain(gnbs.iter().map(|g| g.position))
                .collect();
            let grid = ZoneGrid::covering(&points, cfg.model.zone_size_m).unwrap();
            let snap = snapshot(&trace, &grid, 0.0).unwrap();
            let mut all_beams = Vec::new();
            for gnb in &gnbs {
                all_beams.extend(dbscan_beam_design(&snap, &grid, gnb, &cfg, seed));
            }
            let (graph, sol) = dbscan_associate(all_beams, &snap, &grid, &gnbs, &cfg, seed);
            let report = check_feasible(&sol, &graph, cfg.radio.max_beams, cfg.radio.comp_limit);
            assert!(report.ok, "seed {seed}: {:?}", report.violations);
            // per-zone association counts respect the CoMP limit
            let mut per_zone: BTreeMap<usize, usize> = BTreeMap::new();
            for &(_, z) in &sol.associations {
                *per_zone.entry(z).or_insert(0) += 1;
            }
            assert!(per_zone.values().all(|&c| c <= cfg.radio.comp_limit));
        }
    }

    #[test]
    fn uncovered_zone_stays_unassociated() {
        let (_, grid, gnb, cfg) = design_scenario();
        // a pack north (clustered) and a lone vehicle south (noise)
        let csv = "time_s,vehicle_id,x_m,y_m\n0,1,-2,100\n0,2,2,100\n0,3,0,-150\n";
        let trace = Trace::parse_csv(csv.as_bytes(), 1.0).unwrap();
        let snap = snapshot(&trace, &grid, 0.0).unwrap();
        let beams = dbscan_beam_design(&snap, &grid, &gnb, &cfg, 2);
        let (graph, sol) = dbscan_associate(beams, &snap, &grid, &[gnb], &cfg, 2);
        let south_zone = grid.zone_of(&Point::new(0.0, -150.0)).unwrap();
        let south_idx = graph.zones.iter().position(|z| z.zone_id == south_zone);
        if let Some(zi) = south_idx {
            assert!(sol.associations.iter().all(|&(_, z)| z != zi));
        }
    }
}
