//! Radio abstractions: LoS state, path loss, sectored antenna gains,
//! channel gain, SINR with interference, noise-limited rates and the
//! SINR-to-CQI-to-rate mapping.
//!
//! All operations are pure; identical inputs give bit-identical outputs.
//! The channel keeps no fading state: per-run variation comes from mobility
//! and from the per-(seed, gNB, zone) LoS draw, which is frozen for a whole
//! run.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::BeamCandidate;

/// Propagation state of one gNB-zone link.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkState {
    pub gnb_id: u32,
    pub zone_id: usize,
    pub los: bool,
    pub distance_m: f64,
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn watts_to_dbm(w: f64) -> f64 {
    10.0 * w.log10() + 30.0
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Uniform draw in [0, 1) from a stable hash of (seed, gnb, zone).
fn unit_hash(seed: u64, gnb_id: u32, zone_id: usize) -> f64 {
    let h = splitmix64(splitmix64(splitmix64(seed) ^ gnb_id as u64) ^ zone_id as u64);
    (h >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Line-of-sight state of a gNB-zone link: a Bernoulli draw with
/// p = exp(-d / d_los), decided by a deterministic hash of
/// (seed, gnb, zone) so it stays fixed for the whole run.
pub fn los_state(gnb_id: u32, zone_id: usize, distance_m: f64, d_los_m: f64, seed: u64) -> bool {
    let p = (-distance_m / d_los_m).exp();
    unit_hash(seed, gnb_id, zone_id) < p
}

/// Close-in path loss at mmwave frequencies, dB. Distances below 1 m are
/// clamped to 1 m.
pub fn path_loss_db(distance_m: f64, los: bool, carrier_ghz: f64, exp_los: f64, exp_nlos: f64) -> f64 {
    let d = distance_m.max(1.0);
    let n = if los { exp_los } else { exp_nlos };
    32.4 + 20.0 * carrier_ghz.log10() + 10.0 * n * d.log10()
}

/// Sectored transmit antenna gain, linear. The main lobe conserves the
/// power not radiated by the sidelobes, so narrower beams have higher gain:
/// `alpha_rad * G_main + (2*pi - alpha_rad) * g_s = 2*pi` exactly.
pub fn tx_gain(width_deg: f64, aligned: bool, sidelobe: f64) -> f64 {
    if !aligned {
        return sidelobe;
    }
    let alpha = width_deg.to_radians();
    let two_pi = std::f64::consts::TAU;
    (two_pi - (two_pi - alpha) * sidelobe) / alpha
}

/// Composite channel power gain |h|^2 of a gNB-zone link on one beam:
/// sectored tx gain (main lobe iff the beam covers the zone), receive gain,
/// and path loss.
#[allow(clippy::too_many_arguments)]
pub fn channel_gain(
    link: &LinkState,
    beam: &BeamCandidate,
    covered: bool,
    rx_gain_linear: f64,
    sidelobe: f64,
    carrier_ghz: f64,
    exp_los: f64,
    exp_nlos: f64,
) -> f64 {
    let pl = path_loss_db(link.distance_m, link.los, carrier_ghz, exp_los, exp_nlos);
    tx_gain(beam.width_deg, covered, sidelobe) * rx_gain_linear * 10f64.powf(-pl / 10.0)
}

/// Thermal noise power over `bandwidth_hz` with the given noise figure,
/// watts.
pub fn noise_power(bandwidth_hz: f64, noise_figure_db: f64) -> f64 {
    let dbm = -174.0 + 10.0 * bandwidth_hz.log10() + noise_figure_db;
    dbm_to_watts(dbm)
}

/// Interference at a vehicle: the sum of received powers from active
/// covering tuples that do not serve its zone. Each tuple is
/// (power_w, |h|^2, serving).
pub fn interference(covering: &[(f64, f64, bool)]) -> f64 {
    covering
        .iter()
        .filter(|(_, _, serving)| !serving)
        .map(|(p, h2, _)| p * h2)
        .sum()
}

/// SINR with additive combining of the serving tuples (CoMP transmits the
/// same data, so serving powers add). Empty serving set gives 0.
pub fn sinr(signal_terms: &[(f64, f64)], noise_w: f64, interference_w: f64) -> f64 {
    if signal_terms.is_empty() {
        return 0.0;
    }
    let signal: f64 = signal_terms.iter().map(|(p, h2)| p * h2).sum();
    signal / (noise_w + interference_w)
}

/// Shannon rate for one vehicle, bits/s.
pub fn shannon_rate(sinr_linear: f64, bandwidth_hz: f64) -> f64 {
    bandwidth_hz * (1.0 + sinr_linear).log2()
}

/// Graph edge weight: the noise-limited zone rate, i.e. the per-vehicle
/// Shannon rate ignoring interference, times the number of vehicles in the
/// zone.
#[allow(clippy::too_many_arguments)]
pub fn noise_limited_rate(
    link: &LinkState,
    beam: &BeamCandidate,
    power_w: f64,
    rx_gain_linear: f64,
    n_vehicles_in_zone: usize,
    noise_w: f64,
    bandwidth_hz: f64,
    sidelobe: f64,
    carrier_ghz: f64,
    exp_los: f64,
    exp_nlos: f64,
) -> f64 {
    if n_vehicles_in_zone == 0 {
        return 0.0;
    }
    let h2 = channel_gain(
        link, beam, true, rx_gain_linear, sidelobe, carrier_ghz, exp_los, exp_nlos,
    );
    n_vehicles_in_zone as f64 * shannon_rate(power_w * h2 / noise_w, bandwidth_hz)
}

/// One CQI row: a SINR threshold and the spectral efficiency granted at or
/// above it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CqiRow {
    pub threshold_db: f64,
    pub efficiency: f64,
}

/// 4-bit CQI table: 15 rows with strictly increasing thresholds and
/// efficiencies. SINR below the lowest threshold maps to outage (rate 0).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CqiTable {
    pub rows: Vec<CqiRow>,
}

/// LTE 4-bit CQI efficiencies with commonly used switching thresholds.
const DEFAULT_CQI: [(f64, f64); 15] = [
    (-6.7, 0.1523),
    (-4.7, 0.2344),
    (-2.3, 0.3770),
    (0.2, 0.6016),
    (2.4, 0.8770),
    (4.3, 1.1758),
    (5.9, 1.4766),
    (8.1, 1.9141),
    (10.3, 2.4063),
    (11.7, 2.7305),
    (14.1, 3.3223),
    (16.3, 3.9023),
    (18.7, 4.5234),
    (21.0, 5.1152),
    (22.7, 5.5547),
];

impl Default for CqiTable {
    fn default() -> Self {
        CqiTable {
            rows: DEFAULT_CQI
                .iter()
                .map(|&(threshold_db, efficiency)| CqiRow {
                    threshold_db,
                    efficiency,
                })
                .collect(),
        }
    }
}

impl CqiTable {
    pub fn validate(&self) -> Result<()> {
        if self.rows.len() != 15 {
            return Err(Error::Config(format!(
                "CQI table must have 15 rows, got {}",
                self.rows.len()
            )));
        }
        for pair in self.rows.windows(2) {
            if pair[1].threshold_db <= pair[0].threshold_db {
                return Err(Error::Config(
                    "CQI thresholds must be strictly increasing".into(),
                ));
            }
            if pair[1].efficiency <= pair[0].efficiency {
                return Err(Error::Config(
                    "CQI efficiencies must be strictly increasing".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn min_efficiency(&self) -> f64 {
        self.rows.first().map(|r| r.efficiency).unwrap_or(0.0)
    }

    /// Parse `cqi_index,threshold_db,efficiency` CSV with 15 rows.
    pub fn parse_csv<R: std::io::Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let headers = rdr
            .headers()
            .map_err(|e| Error::Parse {
                line: 1,
                msg: e.to_string(),
            })?
            .clone();
        let expected = ["cqi_index", "threshold_db", "efficiency"];
        if headers.iter().collect::<Vec<_>>() != expected {
            return Err(Error::Parse {
                line: 1,
                msg: format!(
                    "expected header `cqi_index,threshold_db,efficiency`, got `{}`",
                    headers.iter().collect::<Vec<_>>().join(",")
                ),
            });
        }
        let mut rows = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| Error::Parse {
                line: e.position().map(|p| p.line() as usize).unwrap_or(0),
                msg: e.to_string(),
            })?;
            let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
            if rec.len() != 3 {
                return Err(Error::Parse {
                    line,
                    msg: format!("expected 3 fields, got {}", rec.len()),
                });
            }
            let parse = |s: &str, field: &str| -> Result<f64> {
                s.parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| Error::Parse {
                        line,
                        msg: format!("{field} must be a finite number, got `{s}`"),
                    })
            };
            rows.push(CqiRow {
                threshold_db: parse(&rec[1], "threshold_db")?,
                efficiency: parse(&rec[2], "efficiency")?,
            });
        }
        let table = CqiTable { rows };
        table.validate()?;
        Ok(table)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        CqiTable::parse_csv(std::io::BufReader::new(file))
    }
}

/// CQI-mapped rate: the efficiency of the highest row whose threshold is at
/// or below `sinr_db`, times the bandwidth; outage (0) below the lowest
/// threshold.
pub fn cqi_rate(sinr_db: f64, table: &CqiTable, bandwidth_hz: f64) -> f64 {
    let mut eff = 0.0;
    for row in &table.rows {
        if sinr_db >= row.threshold_db {
            eff = row.efficiency;
        } else {
            break;
        }
    }
    eff * bandwidth_hz
}
