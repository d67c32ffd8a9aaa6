//! The simulated world: gNB layout, vehicle mobility trace, zone grid and
//! global configuration, plus per-time-step snapshots.
//!
//! File formats:
//! - trace CSV, header `time_s,vehicle_id,x_m,y_m`
//! - gNB CSV, header `gnb_id,x_m,y_m`
//! - flat `key = value` config file (see [`Config::apply_str`])

use std::collections::HashSet;
use std::io::{Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::channel::CqiTable;
use crate::error::{Error, Result};
use crate::geometry::Point;

/// Street pitch of the synthetic Manhattan grid, meters.
const STREET_SPACING_M: f64 = 100.0;
/// Constant vehicle speed in the synthetic trace, m/s.
const VEHICLE_SPEED_MPS: f64 = 10.0;

/// Finite and strictly positive.
fn positive(v: f64) -> bool {
    v.is_finite() && v > 0.0
}

/// A mmwave base station site.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GnbSite {
    pub id: u32,
    pub position: Point,
}

/// One position sample of one vehicle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub time_s: f64,
    pub vehicle_id: u64,
    pub position: Point,
}

/// A time-indexed mobility trace. Records are sorted by time (then vehicle
/// id) and snapped to the step grid; there is at most one record per
/// (time, vehicle) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub records: Vec<TraceRecord>,
    pub horizon_s: f64,
    pub step_s: f64,
}

/// Square-zone partition of the service area. Cells are half-open
/// `[low, high)` in both axes, so every point belongs to at most one zone
/// and boundary points go to the higher-index cell. Zone ids are row-major
/// with x varying fastest.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZoneGrid {
    pub origin: Point,
    pub zone_size_m: f64,
    pub n_x: usize,
    pub n_y: usize,
}

impl ZoneGrid {
    pub fn new(origin: Point, zone_size_m: f64, n_x: usize, n_y: usize) -> Result<Self> {
        if !positive(zone_size_m) {
            return Err(Error::Config(format!(
                "zone_size must be positive, got {zone_size_m}"
            )));
        }
        if n_x == 0 || n_y == 0 {
            return Err(Error::Config("zone grid must have at least one cell".into()));
        }
        Ok(ZoneGrid {
            origin,
            zone_size_m,
            n_x,
            n_y,
        })
    }

    /// Smallest grid of `zone_size_m` cells, anchored on multiples of the
    /// zone size, that contains every given point.
    pub fn covering(points: &[Point], zone_size_m: f64) -> Result<Self> {
        let (mut min_x, mut min_y) = (0.0f64, 0.0f64);
        let (mut max_x, mut max_y) = (0.0f64, 0.0f64);
        if let Some(first) = points.first() {
            min_x = first.x;
            min_y = first.y;
            max_x = first.x;
            max_y = first.y;
        }
        for p in points {
            min_x = min_x.min(p.x);
            min_y = min_y.min(p.y);
            max_x = max_x.max(p.x);
            max_y = max_y.max(p.y);
        }
        let ox = (min_x / zone_size_m).floor() * zone_size_m;
        let oy = (min_y / zone_size_m).floor() * zone_size_m;
        let n_x = (((max_x - ox) / zone_size_m).floor() as usize) + 1;
        let n_y = (((max_y - oy) / zone_size_m).floor() as usize) + 1;
        ZoneGrid::new(Point::new(ox, oy), zone_size_m, n_x, n_y)
    }

    pub fn n_zones(&self) -> usize {
        self.n_x * self.n_y
    }

    /// Zone containing `p`, or `None` when `p` lies outside the grid.
    pub fn zone_of(&self, p: &Point) -> Option<usize> {
        let ix = ((p.x - self.origin.x) / self.zone_size_m).floor();
        let iy = ((p.y - self.origin.y) / self.zone_size_m).floor();
        if ix < 0.0 || iy < 0.0 {
            return None;
        }
        let (ix, iy) = (ix as usize, iy as usize);
        if ix >= self.n_x || iy >= self.n_y {
            return None;
        }
        Some(iy * self.n_x + ix)
    }

    pub fn zone_center(&self, zone_id: usize) -> Point {
        let ix = zone_id % self.n_x;
        let iy = zone_id / self.n_x;
        Point::new(
            self.origin.x + (ix as f64 + 0.5) * self.zone_size_m,
            self.origin.y + (iy as f64 + 0.5) * self.zone_size_m,
        )
    }
}

/// One vehicle visible at a snapshot time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SnapshotEntry {
    pub vehicle_id: u64,
    pub position: Point,
    pub zone_id: usize,
}

/// All vehicles with a record at one time step, tagged with their zone.
/// Vehicles outside the grid are excluded and counted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VehicleSnapshot {
    pub time_s: f64,
    pub entries: Vec<SnapshotEntry>,
    pub out_of_grid: usize,
}

/// Radio and solver parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadioConfig {
    /// Carrier frequency, GHz. Config key `carrier_freq`.
    pub carrier_freq_ghz: f64,
    /// System bandwidth, Hz. Config key `bandwidth`.
    pub bandwidth_hz: f64,
    /// Per-gNB transmit power budget, dBm. Config key `tx_power_budget`.
    pub tx_power_dbm: f64,
    /// Maximum simultaneous beams per gNB. Config key `max_beams`.
    pub max_beams: usize,
    /// Maximum serving tuples per zone (CoMP degree). Config key `comp_limit`.
    pub comp_limit: usize,
    /// Supported half-power beamwidths, degrees. Config key `beamwidth_set`.
    pub beamwidth_set_deg: Vec<f64>,
    /// Granularity of candidate directions, degrees. Config key `direction_step`.
    pub direction_step_deg: f64,
    /// Receiver noise figure, dB. Config key `noise_figure`.
    pub noise_figure_db: f64,
    /// Sidelobe gain of the sectored antenna model, linear. Config key `sidelobe_gain`.
    pub sidelobe_gain: f64,
    /// Receive beamwidth of the vehicle antenna, degrees. Config key `rx_beamwidth`.
    pub rx_beamwidth_deg: f64,
    /// Weight floor below which coverage edges are pruned, bits/s.
    /// Config key `min_edge_rate`; defaults to 1% of the lowest-CQI rate.
    pub min_edge_rate_bps: f64,
}

impl Default for RadioConfig {
    fn default() -> Self {
        RadioConfig {
            carrier_freq_ghz: 76.0,
            bandwidth_hz: 400e6,
            tx_power_dbm: 30.0,
            max_beams: 4,
            comp_limit: 1,
            beamwidth_set_deg: vec![5.0, 10.0, 15.0],
            direction_step_deg: 5.0,
            noise_figure_db: 7.0,
            sidelobe_gain: 0.01,
            rx_beamwidth_deg: 15.0,
            min_edge_rate_bps: 0.1523 * 400e6 * 0.01,
        }
    }
}

/// Channel-model, scheduler and baseline knobs that are not radio
/// parameters but are still configurable per run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Zone edge length, meters. Config key `zone_size`.
    pub zone_size_m: f64,
    /// Decay distance of the LoS probability exp(-d/d_los), meters.
    /// Config key `d_los`.
    pub d_los_m: f64,
    /// Path-loss exponent under LoS. Config key `pl_exp_los`.
    pub pl_exp_los: f64,
    /// Path-loss exponent under nLoS. Config key `pl_exp_nlos`.
    pub pl_exp_nlos: f64,
    /// Scheduler slot length, seconds. Config key `slot`.
    pub slot_s: f64,
    /// Proportional-fair averaging constant, slots. Config key `pf_time_constant`.
    pub pf_time_constant_slots: f64,
    /// Floor of the per-vehicle average throughput, bits/s. Config key `pf_floor`.
    pub pf_floor_bps: f64,
    /// DBSCAN neighborhood radius over departure angles, degrees.
    /// Config key `dbscan_eps`.
    pub dbscan_eps_deg: f64,
    /// DBSCAN core-point threshold (neighbors including self).
    /// Config key `dbscan_min_pts`.
    pub dbscan_min_pts: usize,
}

impl Default for ModelParams {
    fn default() -> Self {
        ModelParams {
            zone_size_m: 25.0,
            d_los_m: 100.0,
            pl_exp_los: 2.1,
            pl_exp_nlos: 3.19,
            slot_s: 0.01,
            pf_time_constant_slots: 100.0,
            pf_floor_bps: 1.0,
            dbscan_eps_deg: 5.0,
            dbscan_min_pts: 2,
        }
    }
}

/// Full run configuration: radio parameters, model knobs and the CQI table.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Config {
    pub radio: RadioConfig,
    pub model: ModelParams,
    pub cqi: CqiTable,
}

impl Config {
    /// Apply `key = value` overrides from a config file onto `self`.
    ///
    /// Lines starting with `#` and blank lines are ignored. Unknown keys are
    /// rejected. `beamwidth_set` takes a comma-separated list. When
    /// `min_edge_rate` is not given explicitly it is re-derived from the
    /// (possibly overridden) bandwidth and CQI table.
    pub fn apply_str(&mut self, text: &str) -> Result<()> {
        let mut min_edge_rate_explicit = false;
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
                line: line_no,
                msg: format!("expected `key = value`, got `{line}`"),
            })?;
            let key = key.trim();
            let value = value.trim();
            let parse_f64 = |v: &str| -> Result<f64> {
                v.parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| Error::Parse {
                        line: line_no,
                        msg: format!("`{key}` expects a finite number, got `{v}`"),
                    })
            };
            let parse_usize = |v: &str| -> Result<usize> {
                v.parse::<usize>().map_err(|_| Error::Parse {
                    line: line_no,
                    msg: format!("`{key}` expects a non-negative integer, got `{v}`"),
                })
            };
            match key {
                "carrier_freq" => self.radio.carrier_freq_ghz = parse_f64(value)?,
                "bandwidth" => self.radio.bandwidth_hz = parse_f64(value)?,
                "tx_power_budget" => self.radio.tx_power_dbm = parse_f64(value)?,
                "max_beams" => self.radio.max_beams = parse_usize(value)?,
                "comp_limit" => self.radio.comp_limit = parse_usize(value)?,
                "beamwidth_set" => {
                    let mut widths = Vec::new();
                    for part in value.split(',') {
                        widths.push(parse_f64(part.trim())?);
                    }
                    self.radio.beamwidth_set_deg = widths;
                }
                "direction_step" => self.radio.direction_step_deg = parse_f64(value)?,
                "noise_figure" => self.radio.noise_figure_db = parse_f64(value)?,
                "sidelobe_gain" => self.radio.sidelobe_gain = parse_f64(value)?,
                "rx_beamwidth" => self.radio.rx_beamwidth_deg = parse_f64(value)?,
                "min_edge_rate" => {
                    self.radio.min_edge_rate_bps = parse_f64(value)?;
                    min_edge_rate_explicit = true;
                }
                "zone_size" => self.model.zone_size_m = parse_f64(value)?,
                "d_los" => self.model.d_los_m = parse_f64(value)?,
                "pl_exp_los" => self.model.pl_exp_los = parse_f64(value)?,
                "pl_exp_nlos" => self.model.pl_exp_nlos = parse_f64(value)?,
                "slot" => self.model.slot_s = parse_f64(value)?,
                "pf_time_constant" => self.model.pf_time_constant_slots = parse_f64(value)?,
                "pf_floor" => self.model.pf_floor_bps = parse_f64(value)?,
                "dbscan_eps" => self.model.dbscan_eps_deg = parse_f64(value)?,
                "dbscan_min_pts" => self.model.dbscan_min_pts = parse_usize(value)?,
                other => {
                    return Err(Error::Parse {
                        line: line_no,
                        msg: format!("unknown config key `{other}`"),
                    })
                }
            }
        }
        if !min_edge_rate_explicit {
            self.radio.min_edge_rate_bps =
                self.cqi.min_efficiency() * self.radio.bandwidth_hz * 0.01;
        }
        self.validate()
    }

    pub fn load_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        self.apply_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let r = &self.radio;
        if r.max_beams < 1 {
            return Err(Error::Config("max_beams must be >= 1".into()));
        }
        if r.comp_limit < 1 {
            return Err(Error::Config("comp_limit must be >= 1".into()));
        }
        if r.beamwidth_set_deg.is_empty() {
            return Err(Error::Config("beamwidth_set must not be empty".into()));
        }
        for &w in &r.beamwidth_set_deg {
            if !positive(w) || w >= 360.0 {
                return Err(Error::Config(format!(
                    "beamwidths must lie in (0, 360) degrees, got {w}"
                )));
            }
        }
        if !positive(r.direction_step_deg) {
            return Err(Error::Config("direction_step must be positive".into()));
        }
        let steps = 360.0 / r.direction_step_deg;
        if (steps - steps.round()).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "direction_step must divide 360, got {}",
                r.direction_step_deg
            )));
        }
        if !positive(r.bandwidth_hz) {
            return Err(Error::Config("bandwidth must be positive".into()));
        }
        if !positive(r.sidelobe_gain) || r.sidelobe_gain >= 1.0 {
            return Err(Error::Config("sidelobe_gain must lie in (0, 1)".into()));
        }
        if !positive(r.rx_beamwidth_deg) || r.rx_beamwidth_deg >= 360.0 {
            return Err(Error::Config("rx_beamwidth must lie in (0, 360)".into()));
        }
        if !positive(self.model.zone_size_m) {
            return Err(Error::Config("zone_size must be positive".into()));
        }
        if !positive(self.model.slot_s) {
            return Err(Error::Config("slot must be positive".into()));
        }
        if self.model.pf_time_constant_slots.is_nan() || self.model.pf_time_constant_slots < 1.0 {
            return Err(Error::Config("pf_time_constant must be >= 1".into()));
        }
        if !positive(self.model.pf_floor_bps) {
            return Err(Error::Config("pf_floor must be positive".into()));
        }
        if !positive(self.model.dbscan_eps_deg) {
            return Err(Error::Config("dbscan_eps must be positive".into()));
        }
        if self.model.dbscan_min_pts < 1 {
            return Err(Error::Config("dbscan_min_pts must be >= 1".into()));
        }
        self.cqi.validate()?;
        Ok(())
    }
}

/// Snap a raw time to the nearest multiple of `step`; halfway rounds up.
fn snap_to_step(time_s: f64, step_s: f64) -> f64 {
    let k = (time_s / step_s + 0.5).floor();
    k * step_s
}

impl Trace {
    /// Parse trace CSV (`time_s,vehicle_id,x_m,y_m`) and snap record times
    /// to the `step_s` grid.
    pub fn parse_csv<R: Read>(reader: R, step_s: f64) -> Result<Self> {
        if !positive(step_s) {
            return Err(Error::Argument(format!(
                "step must be positive, got {step_s}"
            )));
        }
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let headers = rdr.headers().map_err(csv_parse_error)?.clone();
        let expected = ["time_s", "vehicle_id", "x_m", "y_m"];
        if headers.iter().collect::<Vec<_>>() != expected {
            return Err(Error::Parse {
                line: 1,
                msg: format!("expected header `time_s,vehicle_id,x_m,y_m`, got `{}`",
                    headers.iter().collect::<Vec<_>>().join(",")),
            });
        }
        let mut records = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(csv_parse_error)?;
            let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
            if rec.len() != 4 {
                return Err(Error::Parse {
                    line,
                    msg: format!("expected 4 fields, got {}", rec.len()),
                });
            }
            let time_s = parse_finite_f64(&rec[0], line, "time_s")?;
            if time_s < 0.0 {
                return Err(Error::Parse {
                    line,
                    msg: format!("time_s must be >= 0, got {time_s}"),
                });
            }
            let vehicle_id = rec[1].parse::<u64>().map_err(|_| Error::Parse {
                line,
                msg: format!("vehicle_id must be a non-negative integer, got `{}`", &rec[1]),
            })?;
            let x = parse_finite_f64(&rec[2], line, "x_m")?;
            let y = parse_finite_f64(&rec[3], line, "y_m")?;
            records.push(TraceRecord {
                time_s: snap_to_step(time_s, step_s),
                vehicle_id,
                position: Point::new(x, y),
            });
        }
        Trace::from_records(records, step_s)
    }

    /// Build a trace from already-snapped records, sorting and checking the
    /// one-record-per-(time, vehicle) invariant.
    pub fn from_records(mut records: Vec<TraceRecord>, step_s: f64) -> Result<Self> {
        if !positive(step_s) {
            return Err(Error::Argument(format!(
                "step must be positive, got {step_s}"
            )));
        }
        records.sort_by(|a, b| {
            a.time_s
                .total_cmp(&b.time_s)
                .then(a.vehicle_id.cmp(&b.vehicle_id))
        });
        for pair in records.windows(2) {
            if pair[0].time_s == pair[1].time_s && pair[0].vehicle_id == pair[1].vehicle_id {
                return Err(Error::Duplicate(format!(
                    "vehicle {} has two records at t={}s",
                    pair[0].vehicle_id, pair[0].time_s
                )));
            }
        }
        let horizon_s = records.last().map(|r| r.time_s).unwrap_or(0.0);
        Ok(Trace {
            records,
            horizon_s,
            step_s,
        })
    }

    pub fn load(path: &Path, step_s: f64) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Trace::parse_csv(std::io::BufReader::new(file), step_s)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "time_s,vehicle_id,x_m,y_m")?;
        for r in &self.records {
            writeln!(
                w,
                "{},{},{},{}",
                r.time_s, r.vehicle_id, r.position.x, r.position.y
            )?;
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("write to Vec cannot fail");
        std::fs::write(path, buf).map_err(|e| Error::io(path, e))
    }

    /// Distinct vehicle ids appearing anywhere in the trace.
    pub fn vehicle_ids(&self) -> Vec<u64> {
        let mut ids: Vec<u64> = self.records.iter().map(|r| r.vehicle_id).collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }
}

fn parse_finite_f64(s: &str, line: usize, field: &str) -> Result<f64> {
    s.parse::<f64>()
        .ok()
        .filter(|x| x.is_finite())
        .ok_or_else(|| Error::Parse {
            line,
            msg: format!("{field} must be a finite number, got `{s}`"),
        })
}

fn csv_parse_error(e: csv::Error) -> Error {
    let line = e
        .position()
        .map(|p| p.line() as usize)
        .unwrap_or(0);
    Error::Parse {
        line,
        msg: e.to_string(),
    }
}

/// Load gNB sites from CSV with header `gnb_id,x_m,y_m`.
pub fn load_gnbs(path: &Path) -> Result<Vec<GnbSite>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_gnbs_csv(std::io::BufReader::new(file))
}

pub fn parse_gnbs_csv<R: Read>(reader: R) -> Result<Vec<GnbSite>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers().map_err(csv_parse_error)?.clone();
    let expected = ["gnb_id", "x_m", "y_m"];
    if headers.iter().collect::<Vec<_>>() != expected {
        return Err(Error::Parse {
            line: 1,
            msg: format!(
                "expected header `gnb_id,x_m,y_m`, got `{}`",
                headers.iter().collect::<Vec<_>>().join(",")
            ),
        });
    }
    let mut sites = Vec::new();
    let mut seen = HashSet::new();
    for rec in rdr.records() {
        let rec = rec.map_err(csv_parse_error)?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        if rec.len() != 3 {
            return Err(Error::Parse {
                line,
                msg: format!("expected 3 fields, got {}", rec.len()),
            });
        }
        let id = rec[0].parse::<u32>().map_err(|_| Error::Parse {
            line,
            msg: format!("gnb_id must be a non-negative integer, got `{}`", &rec[0]),
        })?;
        if !seen.insert(id) {
            return Err(Error::Duplicate(format!("gNB id {id} appears twice")));
        }
        let x = parse_finite_f64(&rec[1], line, "x_m")?;
        let y = parse_finite_f64(&rec[2], line, "y_m")?;
        sites.push(GnbSite {
            id,
            position: Point::new(x, y),
        });
    }
    Ok(sites)
}

pub fn write_gnbs_csv<W: Write>(sites: &[GnbSite], mut w: W) -> std::io::Result<()> {
    writeln!(w, "gnb_id,x_m,y_m")?;
    for s in sites {
        writeln!(w, "{},{},{}", s.id, s.position.x, s.position.y)?;
    }
    Ok(())
}

pub fn save_gnbs(sites: &[GnbSite], path: &Path) -> Result<()> {
    let mut buf = Vec::new();
    write_gnbs_csv(sites, &mut buf).expect("write to Vec cannot fail");
    std::fs::write(path, buf).map_err(|e| Error::io(path, e))
}

/// All vehicles with a record at time `t`, tagged with their zone id.
///
/// `t` must be a multiple of the trace step and not beyond the horizon.
pub fn snapshot(trace: &Trace, grid: &ZoneGrid, t: f64) -> Result<VehicleSnapshot> {
    let steps = t / trace.step_s;
    if (steps - steps.round()).abs() > 1e-9 * steps.abs().max(1.0) {
        return Err(Error::Argument(format!(
            "t={t} is not a multiple of the trace step {}",
            trace.step_s
        )));
    }
    if t > trace.horizon_s {
        return Err(Error::Argument(format!(
            "t={t} is beyond the trace horizon {}",
            trace.horizon_s
        )));
    }
    let k = steps.round();
    let mut entries = Vec::new();
    let mut out_of_grid = 0;
    for r in &trace.records {
        if (r.time_s / trace.step_s).round() != k {
            continue;
        }
        match grid.zone_of(&r.position) {
            Some(zone_id) => entries.push(SnapshotEntry {
                vehicle_id: r.vehicle_id,
                position: r.position,
                zone_id,
            }),
            None => out_of_grid += 1,
        }
    }
    entries.sort_by_key(|e| e.vehicle_id);
    Ok(VehicleSnapshot {
        time_s: k * trace.step_s,
        entries,
        out_of_grid,
    })
}

/// Direction of travel on the street grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Heading {
    East,
    West,
    North,
    South,
}

impl Heading {
    const ALL: [Heading; 4] = [Heading::East, Heading::West, Heading::North, Heading::South];

    fn delta(self) -> (i64, i64) {
        match self {
            Heading::East => (1, 0),
            Heading::West => (-1, 0),
            Heading::North => (0, 1),
            Heading::South => (0, -1),
        }
    }

    fn reverse(self) -> Heading {
        match self {
            Heading::East => Heading::West,
            Heading::West => Heading::East,
            Heading::North => Heading::South,
            Heading::South => Heading::North,
        }
    }
}

struct VehicleState {
    node: (i64, i64),
    heading: Option<Heading>,
    /// Distance already traveled from `node` towards the next node.
    offset_m: f64,
}

impl VehicleState {
    fn position(&self, spacing: f64) -> Point {
        let (nx, ny) = self.node;
        let base = Point::new(nx as f64 * spacing, ny as f64 * spacing);
        match self.heading {
            None => base,
            Some(h) => {
                let (dx, dy) = h.delta();
                Point::new(
                    base.x + dx as f64 * self.offset_m,
                    base.y + dy as f64 * self.offset_m,
                )
            }
        }
    }
}

/// Generate a synthetic Manhattan-grid scenario: vehicles moving at constant
/// speed along a rectangular street grid, turning uniformly at random at
/// intersections, plus gNBs placed at distinct intersections. Deterministic
/// for a given seed.
pub fn generate_synthetic(
    width_m: f64,
    height_m: f64,
    n_vehicles: usize,
    n_gnbs: usize,
    horizon_s: f64,
    step_s: f64,
    seed: u64,
) -> Result<(Trace, Vec<GnbSite>)> {
    if !positive(width_m) || !positive(height_m) {
        return Err(Error::Argument("area dimensions must be positive".into()));
    }
    if !positive(step_s) {
        return Err(Error::Argument("step must be positive".into()));
    }
    if horizon_s < 0.0 {
        return Err(Error::Argument("horizon must be >= 0".into()));
    }
    let spacing = STREET_SPACING_M;
    let n_nodes_x = (width_m / spacing).floor() as i64 + 1;
    let n_nodes_y = (height_m / spacing).floor() as i64 + 1;
    let n_intersections = (n_nodes_x * n_nodes_y) as usize;
    if n_gnbs > n_intersections {
        return Err(Error::Config(format!(
            "cannot place {n_gnbs} gNBs on {n_intersections} intersections"
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // gNBs first so their placement does not depend on the vehicle count.
    let mut nodes: Vec<(i64, i64)> = (0..n_nodes_y)
        .flat_map(|iy| (0..n_nodes_x).map(move |ix| (ix, iy)))
        .collect();
    nodes.shuffle(&mut rng);
    let gnbs: Vec<GnbSite> = nodes
        .iter()
        .take(n_gnbs)
        .enumerate()
        .map(|(i, &(ix, iy))| GnbSite {
            id: i as u32,
            position: Point::new(ix as f64 * spacing, iy as f64 * spacing),
        })
        .collect();

    let in_grid = |node: (i64, i64)| {
        node.0 >= 0 && node.0 < n_nodes_x && node.1 >= 0 && node.1 < n_nodes_y
    };
    let valid_headings = |node: (i64, i64)| -> Vec<Heading> {
        Heading::ALL
            .iter()
            .copied()
            .filter(|h| {
                let (dx, dy) = h.delta();
                in_grid((node.0 + dx, node.1 + dy))
            })
            .collect()
    };

    let mut vehicles: Vec<VehicleState> = (0..n_vehicles)
        .map(|_| {
            let node = (
                rng.gen_range(0..n_nodes_x),
                rng.gen_range(0..n_nodes_y),
            );
            let options = valid_headings(node);
            let heading = if options.is_empty() {
                None
            } else {
                Some(options[rng.gen_range(0..options.len())])
            };
            VehicleState {
                node,
                heading,
                offset_m: 0.0,
            }
        })
        .collect();

    let n_steps = (horizon_s / step_s).round() as usize;
    let mut records = Vec::with_capacity((n_steps + 1) * n_vehicles);
    for k in 0..=n_steps {
        let t = k as f64 * step_s;
        for (vid, v) in vehicles.iter().enumerate() {
            records.push(TraceRecord {
                time_s: t,
                vehicle_id: vid as u64,
                position: v.position(spacing),
            });
        }
        if k == n_steps {
            break;
        }
        for v in vehicles.iter_mut() {
            let mut remaining = VEHICLE_SPEED_MPS * step_s;
            while remaining > 0.0 {
                let Some(h) = v.heading else { break };
                let to_next = spacing - v.offset_m;
                if remaining < to_next {
                    v.offset_m += remaining;
                    break;
                }
                remaining -= to_next;
                let (dx, dy) = h.delta();
                v.node = (v.node.0 + dx, v.node.1 + dy);
                v.offset_m = 0.0;
                let options = valid_headings(v.node);
                let forward: Vec<Heading> = options
                    .iter()
                    .copied()
                    .filter(|&o| o != h.reverse())
                    .collect();
                v.heading = if !forward.is_empty() {
                    Some(forward[rng.gen_range(0..forward.len())])
                } else if !options.is_empty() {
                    Some(options[rng.gen_range(0..options.len())])
                } else {
                    None
                };
            }
        }
    }

    let trace = Trace::from_records(records, step_s)?;
    Ok((trace, gnbs))
}
