//! Discrete-time engine: per-epoch beam (re)design via matching or the
//! clustering baseline, equal-split power allocation, per-slot
//! proportional-fair scheduling with interference-inclusive CQI rates, and
//! metric accumulation over the horizon.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::baseline;
use crate::channel::{self, LinkState};
use crate::error::{Error, Result};
use crate::geometry;
use crate::graphbuild::{build_graph, ConflictGraph};
use crate::matching::{check_feasible, greedy_match, Solution};
use crate::scenario::{snapshot, Config, GnbSite, Trace, VehicleSnapshot, ZoneGrid};

/// Relative tolerance for the power-budget certificate.
pub const POWER_CERT_REL_TOL: f64 = 1e-9;

/// Beam design method for a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Cawbm,
    Dbscan,
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cawbm" => Ok(Method::Cawbm),
            "dbscan" => Ok(Method::Dbscan),
            other => Err(Error::Config(format!(
                "unknown method `{other}` (expected `cawbm` or `dbscan`)"
            ))),
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::Cawbm => "cawbm",
            Method::Dbscan => "dbscan",
        })
    }
}

/// Transmit power per active candidate, watts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerAllocation {
    pub per_candidate: BTreeMap<usize, f64>,
}

/// Split each gNB's budget equally among its active beams.
pub fn allocate_power(sol: &Solution, graph: &ConflictGraph, tx_power_dbm: f64) -> PowerAllocation {
    let budget = channel::dbm_to_watts(tx_power_dbm);
    let mut per_gnb: BTreeMap<u32, usize> = BTreeMap::new();
    for &c in &sol.active_beams {
        *per_gnb.entry(graph.candidates[c].gnb_id).or_insert(0) += 1;
    }
    let per_candidate = sol
        .active_beams
        .iter()
        .map(|&c| {
            let n = per_gnb[&graph.candidates[c].gnb_id];
            (c, budget / n as f64)
        })
        .collect();
    PowerAllocation { per_candidate }
}

/// Certify the power constraints: non-negative powers, entries exactly for
/// the active beams, and per-gNB sums within the budget (to
/// [`POWER_CERT_REL_TOL`] relative).
pub fn certify_power(
    alloc: &PowerAllocation,
    sol: &Solution,
    graph: &ConflictGraph,
    tx_power_dbm: f64,
) -> bool {
    let budget = channel::dbm_to_watts(tx_power_dbm);
    let active: BTreeSet<usize> = sol.active_beams.iter().copied().collect();
    let allocated: BTreeSet<usize> = alloc.per_candidate.keys().copied().collect();
    if active != allocated {
        return false;
    }
    if alloc.per_candidate.values().any(|&p| p.is_nan() || p < 0.0) {
        return false;
    }
    let mut per_gnb: BTreeMap<u32, f64> = BTreeMap::new();
    for (&c, &p) in &alloc.per_candidate {
        if p > budget * (1.0 + POWER_CERT_REL_TOL) {
            return false;
        }
        *per_gnb.entry(graph.candidates[c].gnb_id).or_insert(0.0) += p;
    }
    per_gnb
        .values()
        .all(|&sum| sum <= budget * (1.0 + POWER_CERT_REL_TOL))
}

/// Link budget of one vehicle for one epoch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleEpochRate {
    pub vehicle_id: u64,
    /// None when the vehicle's zone has no serving tuple this epoch.
    pub sinr_db: Option<f64>,
    pub rate_bps: f64,
    pub signal_w: f64,
    pub interference_w: f64,
}

/// Per-vehicle CQI rate and SINR for one epoch. The serving set of a
/// vehicle is the association set of its zone; interference comes from
/// active covering tuples that do not serve the zone. The vehicle's receive
/// beam points at its strongest serving gNB (ties by lowest id); tuples at
/// that gNB see the main receive lobe, all others the sidelobe.
#[allow(clippy::too_many_arguments)]
pub fn epoch_rates(
    sol: &Solution,
    alloc: &PowerAllocation,
    graph: &ConflictGraph,
    snap: &VehicleSnapshot,
    grid: &ZoneGrid,
    gnbs: &[GnbSite],
    config: &Config,
    seed: u64,
) -> Vec<VehicleEpochRate> {
    let gnb_by_id: BTreeMap<u32, &GnbSite> = gnbs.iter().map(|g| (g.id, g)).collect();
    let mut serving: Vec<Vec<usize>> = vec![Vec::new(); graph.zones.len()];
    for &(c, z) in &sol.associations {
        serving[z].push(c);
    }

    let noise = channel::noise_power(config.radio.bandwidth_hz, config.radio.noise_figure_db);
    let rx_main = channel::tx_gain(config.radio.rx_beamwidth_deg, true, config.radio.sidelobe_gain);
    let rx_side = config.radio.sidelobe_gain;

    let mut link_memo: BTreeMap<(u32, usize), (f64, LinkState)> = BTreeMap::new();
    let mut link_of = |gnb_id: u32, zone_id: usize| -> Option<(f64, LinkState)> {
        if let Some(v) = link_memo.get(&(gnb_id, zone_id)) {
            return Some(*v);
        }
        let gnb = gnb_by_id.get(&gnb_id)?;
        let center = grid.zone_center(zone_id);
        let theta = geometry::angle_of_departure(&gnb.position, &center).ok()?;
        let distance = gnb.position.distance(&center);
        let los = channel::los_state(gnb_id, zone_id, distance, config.model.d_los_m, seed);
        let entry = (
            theta,
            LinkState {
                gnb_id,
                zone_id,
                los,
                distance_m: distance,
            },
        );
        link_memo.insert((gnb_id, zone_id), entry);
        Some(entry)
    };

    // per-zone budgets, shared by every vehicle in the zone
    let mut zone_budget: HashMap<usize, (Option<f64>, f64, f64, f64)> = HashMap::new();
    for (zi, zv) in graph.zones.iter().enumerate() {
        if serving[zi].is_empty() {
            zone_budget.insert(zv.zone_id, (None, 0.0, 0.0, 0.0));
            continue;
        }
        // receive pointing: strongest serving gNB by rx-independent power
        let mut strength: BTreeMap<u32, f64> = BTreeMap::new();
        for &c in &serving[zi] {
            let cand = &graph.candidates[c];
            let Some((_, link)) = link_of(cand.gnb_id, zv.zone_id) else {
                continue;
            };
            let pl = channel::path_loss_db(
                link.distance_m,
                link.los,
                config.radio.carrier_freq_ghz,
                config.model.pl_exp_los,
                config.model.pl_exp_nlos,
            );
            let p = alloc.per_candidate.get(&c).copied().unwrap_or(0.0);
            *strength.entry(cand.gnb_id).or_insert(0.0) +=
                p * channel::tx_gain(cand.width_deg, true, config.radio.sidelobe_gain)
                    * 10f64.powf(-pl / 10.0);
        }
        let pointed = strength
            .iter()
            .max_by(|a, b| a.1.total_cmp(b.1).then(b.0.cmp(a.0)))
            .map(|(&g, _)| g);

        let serving_set: BTreeSet<usize> = serving[zi].iter().copied().collect();
        let mut signal_terms: Vec<(f64, f64)> = Vec::new();
        let mut interference_w = 0.0;
        for &c in &sol.active_beams {
            let cand = &graph.candidates[c];
            let Some((theta, link)) = link_of(cand.gnb_id, zv.zone_id) else {
                continue;
            };
            let is_serving = serving_set.contains(&c);
            if !is_serving && !geometry::covers(cand, theta) {
                continue; // non-covering tuples do not interfere
            }
            let rx = if Some(cand.gnb_id) == pointed {
                rx_main
            } else {
                rx_side
            };
            let h2 = channel::channel_gain(
                &link,
                cand,
                true,
                rx,
                config.radio.sidelobe_gain,
                config.radio.carrier_freq_ghz,
                config.model.pl_exp_los,
                config.model.pl_exp_nlos,
            );
            let p = alloc.per_candidate.get(&c).copied().unwrap_or(0.0);
            if is_serving {
                signal_terms.push((p, h2));
            } else {
                interference_w += p * h2;
            }
        }
        let sinr = channel::sinr(&signal_terms, noise, interference_w);
        let sinr_db = channel::linear_to_db(sinr);
        let rate = channel::cqi_rate(sinr_db, &config.cqi, config.radio.bandwidth_hz);
        let signal_w: f64 = signal_terms.iter().map(|(p, h2)| p * h2).sum();
        zone_budget.insert(zv.zone_id, (Some(sinr_db), rate, signal_w, interference_w));
    }

    snap.entries
        .iter()
        .map(|e| {
            let (sinr_db, rate_bps, signal_w, interference_w) = zone_budget
                .get(&e.zone_id)
                .copied()
                .unwrap_or((None, 0.0, 0.0, 0.0));
            VehicleEpochRate {
                vehicle_id: e.vehicle_id,
                sinr_db,
                rate_bps,
                signal_w,
                interference_w,
            }
        })
        .collect()
}

/// Proportional-fair scheduler state, persisted across epochs.
#[derive(Debug, Clone)]
pub struct SchedulerState {
    /// Exponentially averaged throughput per vehicle, floored at `floor_bps`.
    avg_rate: BTreeMap<u64, f64>,
    pub served_time_s: BTreeMap<u64, f64>,
    pub data_bits: BTreeMap<u64, f64>,
    time_constant_slots: f64,
    floor_bps: f64,
}

impl SchedulerState {
    pub fn new(time_constant_slots: f64, floor_bps: f64) -> Self {
        SchedulerState {
            avg_rate: BTreeMap::new(),
            served_time_s: BTreeMap::new(),
            data_bits: BTreeMap::new(),
            time_constant_slots,
            floor_bps,
        }
    }

    pub fn avg_rate(&self, vehicle: u64) -> f64 {
        self.avg_rate
            .get(&vehicle)
            .copied()
            .unwrap_or(self.floor_bps)
            .max(self.floor_bps)
    }

    /// End-of-slot update: for every known or present vehicle,
    /// `T <- (1 - 1/tc) * T + (1/tc) * (rate if scheduled else 0)`.
    pub fn end_slot(&mut self, present: &[u64], credited: &BTreeMap<u64, f64>) {
        let mut vehicles: BTreeSet<u64> = self.avg_rate.keys().copied().collect();
        vehicles.extend(present.iter().copied());
        let tc = self.time_constant_slots;
        for v in vehicles {
            let old = self.avg_rate.get(&v).copied().unwrap_or(self.floor_bps);
            let contribution = credited.get(&v).copied().unwrap_or(0.0);
            let updated = (1.0 - 1.0 / tc) * old + contribution / tc;
            self.avg_rate.insert(v, updated.max(self.floor_bps));
        }
    }
}

/// Pick the vehicle maximizing instantaneous rate over average throughput;
/// ties go to the lower vehicle id. `pool` must be non-empty and sorted.
pub fn pf_schedule(pool: &[u64], rates: &BTreeMap<u64, f64>, state: &SchedulerState) -> u64 {
    debug_assert!(!pool.is_empty());
    let mut best = pool[0];
    let mut best_prio = f64::NEG_INFINITY;
    for &v in pool {
        let prio = rates.get(&v).copied().unwrap_or(0.0) / state.avg_rate(v);
        if prio > best_prio {
            best_prio = prio;
            best = v;
        }
    }
    best
}

/// One logged scheduling decision. Duplicate CoMP copies of the same
/// vehicle within a slot carry rate 0 so the log sums to the data total.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotEvent {
    pub epoch: usize,
    pub slot: usize,
    pub gnb: u32,
    pub beam_dir: f64,
    pub beam_width: f64,
    pub vehicle: u64,
    pub rate_bps: f64,
}

/// Per-epoch constraint certification and solution shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochAudit {
    pub time_s: f64,
    pub n_vehicles: usize,
    pub n_edges: usize,
    pub n_active_beams: usize,
    pub n_associations: usize,
    pub feasible: bool,
    pub n_violations: usize,
    pub power_ok: bool,
    pub solution_weight: f64,
}

/// Aggregated measurements over a whole run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub n_epochs: usize,
    pub sim_duration_s: f64,
    pub n_trace_vehicles: usize,
    pub total_data_bits: f64,
    pub served_vehicles: usize,
    pub served_fraction: f64,
    /// Per vehicle with at least one SINR sample: mean SINR over its epochs, dB.
    pub mean_sinr_db: Vec<(u64, f64)>,
    /// Per served vehicle: received bits divided by the run duration.
    pub effective_rate_bps: Vec<(u64, f64)>,
    /// Per trace vehicle: cumulative time scheduled, seconds.
    pub served_time_s: Vec<(u64, f64)>,
    /// Per (epoch, active beam): distinct vehicles scheduled on it.
    pub beam_user_counts: Vec<usize>,
    pub out_of_grid_total: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOutput {
    pub metrics: RunMetrics,
    pub audits: Vec<EpochAudit>,
    pub slot_events: Vec<SlotEvent>,
}

/// Run the full discrete-time simulation: every epoch re-solves the beam
/// design with the chosen method, splits power, computes
/// interference-inclusive CQI rates and schedules 1 vehicle per beam per
/// slot with proportional fairness. Deterministic for fixed inputs.
pub fn run(
    trace: &Trace,
    gnbs: &[GnbSite],
    grid: &ZoneGrid,
    config: &Config,
    method: Method,
    seed: u64,
    log_slots: bool,
) -> Result<RunOutput> {
    config.validate()?;
    let step = trace.step_s;
    let n_epochs = (trace.horizon_s / step).round() as usize;
    let slots_per_epoch = ((step / config.model.slot_s).round() as usize).max(1);
    let slot_s = config.model.slot_s;

    let mut state = SchedulerState::new(
        config.model.pf_time_constant_slots,
        config.model.pf_floor_bps,
    );
    let mut served: BTreeSet<u64> = BTreeSet::new();
    let mut sinr_acc: BTreeMap<u64, (f64, usize)> = BTreeMap::new();
    let mut total_data_bits = 0.0f64;
    let mut beam_user_counts = Vec::new();
    let mut audits = Vec::new();
    let mut slot_events = Vec::new();
    let mut out_of_grid_total = 0usize;

    for epoch in 0..n_epochs {
        let t = epoch as f64 * step;
        let snap = snapshot(trace, grid, t)?;
        out_of_grid_total += snap.out_of_grid;

        let (graph, sol) = solve_epoch(&snap, grid, gnbs, config, method, seed);
        let report = check_feasible(&sol, &graph, config.radio.max_beams, config.radio.comp_limit);
        let alloc = allocate_power(&sol, &graph, config.radio.tx_power_dbm);
        let power_ok = certify_power(&alloc, &sol, &graph, config.radio.tx_power_dbm);
        audits.push(EpochAudit {
            time_s: t,
            n_vehicles: snap.entries.len(),
            n_edges: graph.edges.len(),
            n_active_beams: sol.active_beams.len(),
            n_associations: sol.associations.len(),
            feasible: report.ok,
            n_violations: report.violations.len(),
            power_ok,
            solution_weight: sol.total_weight,
        });

        let rates_list = epoch_rates(&sol, &alloc, &graph, &snap, grid, gnbs, config, seed);
        let mut rates: BTreeMap<u64, f64> = BTreeMap::new();
        for r in &rates_list {
            rates.insert(r.vehicle_id, r.rate_bps);
            if let Some(db) = r.sinr_db {
                let acc = sinr_acc.entry(r.vehicle_id).or_insert((0.0, 0));
                acc.0 += db;
                acc.1 += 1;
            }
        }
        let present: Vec<u64> = snap.entries.iter().map(|e| e.vehicle_id).collect();

        // per-beam pools: vehicles of the zones each active beam serves
        let zone_index: HashMap<usize, usize> = graph
            .zones
            .iter()
            .enumerate()
            .map(|(zi, zv)| (zv.zone_id, zi))
            .collect();
        let mut beam_zones: BTreeMap<usize, BTreeSet<usize>> = BTreeMap::new();
        for &(c, z) in &sol.associations {
            beam_zones.entry(c).or_default().insert(z);
        }
        // Vehicles in CQI outage (rate 0) are not schedulable: no transport
        // format can carry data to them, so beams skip them rather than
        // burn slots. A beam whose whole pool is in outage idles.
        let mut pools: BTreeMap<usize, Vec<u64>> = BTreeMap::new();
        for &c in &sol.active_beams {
            let zones = beam_zones.get(&c);
            let mut pool: Vec<u64> = snap
                .entries
                .iter()
                .filter(|e| {
                    zones.is_some_and(|zs| {
                        zone_index
                            .get(&e.zone_id)
                            .is_some_and(|zi| zs.contains(zi))
                    })
                })
                .map(|e| e.vehicle_id)
                .filter(|v| rates.get(v).copied().unwrap_or(0.0) > 0.0)
                .collect();
            pool.sort_unstable();
            pools.insert(c, pool);
        }

        let mut beam_served: BTreeMap<usize, BTreeSet<u64>> = BTreeMap::new();
        for slot in 0..slots_per_epoch {
            let mut credited: BTreeMap<u64, f64> = BTreeMap::new();
            for (&c, pool) in &pools {
                if pool.is_empty() {
                    continue;
                }
                let v = pf_schedule(pool, &rates, &state);
                beam_served.entry(c).or_default().insert(v);
                let rate = rates.get(&v).copied().unwrap_or(0.0);
                let first_copy = !credited.contains_key(&v);
                if first_copy {
                    credited.insert(v, rate);
                    total_data_bits += rate * slot_s;
                    *state.data_bits.entry(v).or_insert(0.0) += rate * slot_s;
                    *state.served_time_s.entry(v).or_insert(0.0) += slot_s;
                    served.insert(v);
                }
                if log_slots {
                    let cand = &graph.candidates[c];
                    slot_events.push(SlotEvent {
                        epoch,
                        slot,
                        gnb: cand.gnb_id,
                        beam_dir: cand.direction_deg,
                        beam_width: cand.width_deg,
                        vehicle: v,
                        rate_bps: if first_copy { rate } else { 0.0 },
                    });
                }
            }
            state.end_slot(&present, &credited);
        }
        for &c in &sol.active_beams {
            beam_user_counts.push(beam_served.get(&c).map(|s| s.len()).unwrap_or(0));
        }
    }

    let trace_vehicles = trace.vehicle_ids();
    let sim_duration_s = n_epochs as f64 * step;
    let mean_sinr_db: Vec<(u64, f64)> = sinr_acc
        .iter()
        .map(|(&v, &(sum, count))| (v, sum / count as f64))
        .collect();
    let effective_rate_bps: Vec<(u64, f64)> = served
        .iter()
        .map(|&v| {
            let bits = state.data_bits.get(&v).copied().unwrap_or(0.0);
            (v, if sim_duration_s > 0.0 { bits / sim_duration_s } else { 0.0 })
        })
        .collect();
    let served_time_s: Vec<(u64, f64)> = trace_vehicles
        .iter()
        .map(|&v| (v, state.served_time_s.get(&v).copied().unwrap_or(0.0)))
        .collect();
    let served_fraction = if trace_vehicles.is_empty() {
        0.0
    } else {
        served.len() as f64 / trace_vehicles.len() as f64
    };

    Ok(RunOutput {
        metrics: RunMetrics {
            n_epochs,
            sim_duration_s,
            n_trace_vehicles: trace_vehicles.len(),
            total_data_bits,
            served_vehicles: served.len(),
            served_fraction,
            mean_sinr_db,
            effective_rate_bps,
            served_time_s,
            beam_user_counts,
            out_of_grid_total,
        },
        audits,
        slot_events,
    })
}

fn solve_epoch(
    snap: &VehicleSnapshot,
    grid: &ZoneGrid,
    gnbs: &[GnbSite],
    config: &Config,
    method: Method,
    seed: u64,
) -> (ConflictGraph, Solution) {
    match method {
        Method::Cawbm => {
            let graph = build_graph(snap, grid, gnbs, config, seed);
            let sol = greedy_match(&graph, config.radio.max_beams, config.radio.comp_limit);
            (graph, sol)
        }
        Method::Dbscan => {
            let mut beams = Vec::new();
            for gnb in gnbs {
                beams.extend(baseline::dbscan_beam_design(snap, grid, gnb, config, seed));
            }
            baseline::dbscan_associate(beams, snap, grid, gnbs, config, seed)
        }
    }
}
