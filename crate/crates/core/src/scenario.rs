//! Scenario description and lane geometry.
//!
//! A scenario is loaded from a TOML document with three sections:
//!
//! ```toml
//! [system]
//! carrier_frequency_hz = 1.9e9
//! total_bandwidth_hz = 30e6
//! subcarrier_count = 15
//! slot_count = 250
//! slot_length_s = 20.0
//! noise_density_dbm_per_hz = -174.0
//!
//! [[bs]]
//! id = 0
//! x_m = 0.0
//! y_m = 0.0
//! antenna_height_m = 100.0
//! antenna_count = 16
//! max_power_w = 40.0
//!
//! [[user]]
//! id = 0
//! antenna_height_m = 10.0
//! demand_bits = 2e9
//! lane = [{ t_s = 0.0, x_m = 1000.0, y_m = 5000.0 }, { t_s = 5000.0, x_m = 40000.0, y_m = 9000.0 }]
//! ```
//!
//! All quantities are SI (W, Hz, s, m, bits); the noise density is the only
//! field given in dBm/Hz. Each slot is represented by its midpoint time.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Planar shore coordinates in meters.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    fn lerp(self, other: Point, frac: f64) -> Point {
        Point::new(
            self.x + (other.x - self.x) * frac,
            self.y + (other.y - self.y) * frac,
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaseStation {
    pub id: usize,
    pub position: Point,
    /// Antenna height above sea level in meters.
    pub antenna_height: f64,
    /// Number of transmit antennas.
    pub antenna_count: usize,
    /// Per-slot transmit power budget in watts.
    pub max_power: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Waypoint {
    pub t: f64,
    pub position: Point,
}

/// Timestamped piecewise-linear track.
#[derive(Debug, Clone, PartialEq)]
pub struct Lane {
    waypoints: Vec<Waypoint>,
}

impl Lane {
    /// Builds a lane; timestamps must be finite and strictly increasing and at
    /// least two waypoints are required.
    pub fn new(waypoints: Vec<Waypoint>) -> Result<Self> {
        if waypoints.len() < 2 {
            return Err(Error::invalid("lane", "needs at least 2 waypoints"));
        }
        for w in &waypoints {
            if !(w.t.is_finite() && w.position.x.is_finite() && w.position.y.is_finite()) {
                return Err(Error::invalid("lane", "non-finite waypoint"));
            }
        }
        if let Some(i) = waypoints.windows(2).position(|w| w[1].t <= w[0].t) {
            return Err(Error::invalid(
                "lane",
                format!(
                    "waypoint timestamps not strictly increasing at index {} ({} s after {} s)",
                    i + 1,
                    waypoints[i + 1].t,
                    waypoints[i].t
                ),
            ));
        }
        Ok(Self { waypoints })
    }

    pub fn waypoints(&self) -> &[Waypoint] {
        &self.waypoints
    }

    pub fn start_time(&self) -> f64 {
        self.waypoints[0].t
    }

    pub fn end_time(&self) -> f64 {
        self.waypoints[self.waypoints.len() - 1].t
    }

    /// Largest segment speed in m/s.
    pub fn max_speed(&self) -> f64 {
        self.waypoints
            .windows(2)
            .map(|w| w[0].position.distance(w[1].position) / (w[1].t - w[0].t))
            .fold(0.0, f64::max)
    }

    /// Position at time `t` by linear interpolation between the bracketing
    /// waypoints.
    pub fn position_at(&self, t: f64) -> Result<Point> {
        let (first, last) = (self.start_time(), self.end_time());
        if !(first..=last).contains(&t) {
            return Err(Error::OutOfRange {
                what: "lane time",
                detail: format!("{t} s outside [{first}, {last}]"),
            });
        }
        // index of the first waypoint strictly after t
        let hi = self.waypoints.partition_point(|w| w.t <= t);
        if hi == self.waypoints.len() {
            return Ok(self.waypoints[hi - 1].position);
        }
        let (a, b) = (self.waypoints[hi - 1], self.waypoints[hi]);
        if t == a.t {
            return Ok(a.position);
        }
        Ok(a.position.lerp(b.position, (t - a.t) / (b.t - a.t)))
    }
}

/// Free function form of [`Lane::position_at`].
pub fn position_at(lane: &Lane, t: f64) -> Result<Point> {
    lane.position_at(t)
}

#[derive(Debug, Clone, PartialEq)]
pub struct User {
    pub id: usize,
    pub lane: Lane,
    /// Receive antenna height in meters.
    pub antenna_height: f64,
    /// Data volume to deliver over the whole service duration, in bits.
    pub demand: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CarrierPlan {
    pub carrier_frequency: f64,
    pub total_bandwidth: f64,
    pub subcarrier_count: usize,
    pub subcarrier_bandwidth: f64,
}

impl CarrierPlan {
    pub fn new(carrier_frequency: f64, total_bandwidth: f64, subcarrier_count: usize) -> Result<Self> {
        if subcarrier_count == 0 {
            return Err(Error::invalid("system", "subcarrier_count must be positive"));
        }
        if !(total_bandwidth > 0.0 && total_bandwidth.is_finite()) {
            return Err(Error::invalid("system", "total_bandwidth_hz must be positive"));
        }
        if !(carrier_frequency > total_bandwidth && carrier_frequency.is_finite()) {
            return Err(Error::invalid(
                "system",
                "carrier_frequency_hz must exceed total_bandwidth_hz",
            ));
        }
        Ok(Self {
            carrier_frequency,
            total_bandwidth,
            subcarrier_count,
            subcarrier_bandwidth: total_bandwidth / subcarrier_count as f64,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    pub slot_count: usize,
    pub slot_length: f64,
}

impl TimeGrid {
    pub fn new(slot_count: usize, slot_length: f64) -> Result<Self> {
        if slot_count == 0 {
            return Err(Error::invalid("system", "slot_count must be at least 1"));
        }
        if !(slot_length > 0.0 && slot_length.is_finite()) {
            return Err(Error::invalid("system", "slot_length_s must be positive"));
        }
        Ok(Self {
            slot_count,
            slot_length,
        })
    }

    /// Representative (midpoint) time of 0-based slot `m`.
    pub fn slot_time(&self, m: usize) -> f64 {
        (m as f64 + 0.5) * self.slot_length
    }

    pub fn duration(&self) -> f64 {
        self.slot_count as f64 * self.slot_length
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    /// Density as given in the document, dBm/Hz.
    pub density_dbm_per_hz: f64,
    /// Density in W/Hz.
    pub noise_density: f64,
    /// Noise power over one subcarrier in W.
    pub per_subcarrier_power: f64,
}

impl NoiseModel {
    pub fn new(density_dbm_per_hz: f64, subcarrier_bandwidth: f64) -> Result<Self> {
        if !density_dbm_per_hz.is_finite() {
            return Err(Error::invalid("system", "noise density must be finite"));
        }
        let noise_density = 10f64.powf(density_dbm_per_hz / 10.0) * 1e-3;
        let per_subcarrier_power = noise_density * subcarrier_bandwidth;
        if !(noise_density > 0.0 && per_subcarrier_power > 0.0) {
            return Err(Error::invalid("system", "noise power underflows to zero"));
        }
        Ok(Self {
            density_dbm_per_hz,
            noise_density,
            per_subcarrier_power,
        })
    }
}

/// The validated physical world. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub carrier: CarrierPlan,
    pub grid: TimeGrid,
    pub noise: NoiseModel,
    pub base_stations: Vec<BaseStation>,
    pub users: Vec<User>,
}

impl Scenario {
    /// Validates every entity and cross-entity invariant.
    pub fn new(
        carrier: CarrierPlan,
        grid: TimeGrid,
        noise: NoiseModel,
        base_stations: Vec<BaseStation>,
        users: Vec<User>,
    ) -> Result<Self> {
        if base_stations.is_empty() {
            return Err(Error::invalid("scenario", "at least one base station is required"));
        }
        for (i, bs) in base_stations.iter().enumerate() {
            let name = format!("bs {}", bs.id);
            if !(bs.antenna_height > 0.0 && bs.antenna_height.is_finite()) {
                return Err(Error::invalid(name, "antenna_height_m must be positive"));
            }
            if bs.antenna_count == 0 {
                return Err(Error::invalid(name, "antenna_count must be at least 1"));
            }
            if !(bs.max_power > 0.0 && bs.max_power.is_finite()) {
                return Err(Error::invalid(name, "max_power_w must be positive"));
            }
            if !(bs.position.x.is_finite() && bs.position.y.is_finite()) {
                return Err(Error::invalid(name, "position must be finite"));
            }
            if base_stations[..i].iter().any(|o| o.id == bs.id) {
                return Err(Error::invalid(name, "duplicate id"));
            }
        }
        let duration = grid.duration();
        for (i, u) in users.iter().enumerate() {
            let name = format!("user {}", u.id);
            if !(u.antenna_height > 0.0 && u.antenna_height.is_finite()) {
                return Err(Error::invalid(name, "antenna_height_m must be positive"));
            }
            if !(u.demand >= 0.0 && u.demand.is_finite()) {
                return Err(Error::invalid(name, "demand_bits must be non-negative"));
            }
            if u.lane.start_time() > 0.0 || u.lane.end_time() < duration {
                return Err(Error::invalid(
                    format!("user {} lane", u.id),
                    format!(
                        "lane covers [{}, {}] s but the service runs over [0, {duration}] s",
                        u.lane.start_time(),
                        u.lane.end_time()
                    ),
                ));
            }
            if users[..i].iter().any(|o| o.id == u.id) {
                return Err(Error::invalid(name, "duplicate id"));
            }
        }
        Ok(Self {
            carrier,
            grid,
            noise,
            base_stations,
            users,
        })
    }

    pub fn user_count(&self) -> usize {
        self.users.len()
    }

    pub fn slot_count(&self) -> usize {
        self.grid.slot_count
    }

    pub fn bs_count(&self) -> usize {
        self.base_stations.len()
    }

    pub fn subcarrier_count(&self) -> usize {
        self.carrier.subcarrier_count
    }

    /// `(K, M, J, N)`.
    pub fn dims(&self) -> (usize, usize, usize, usize) {
        (
            self.user_count(),
            self.slot_count(),
            self.bs_count(),
            self.subcarrier_count(),
        )
    }

    /// Horizontal distance between BS `j` and user `k` at the midpoint of slot `m`.
    pub fn slot_distance(&self, k: usize, m: usize, j: usize) -> Result<f64> {
        let (nk, nm, nj, _) = self.dims();
        if k >= nk || m >= nm || j >= nj {
            return Err(Error::OutOfRange {
                what: "index",
                detail: format!("(k={k}, m={m}, j={j}) for dims (K={nk}, M={nm}, J={nj})"),
            });
        }
        let pos = self.users[k].lane.position_at(self.grid.slot_time(m))?;
        let d = pos.distance(self.base_stations[j].position);
        if d > 0.0 {
            Ok(d)
        } else {
            Err(Error::ZeroDistance {
                user: k,
                slot: m,
                bs: j,
            })
        }
    }

    /// Same world restricted or extended to `slot_count` slots.
    pub fn with_slot_count(&self, slot_count: usize) -> Result<Self> {
        let grid = TimeGrid::new(slot_count, self.grid.slot_length)?;
        Scenario::new(
            self.carrier,
            grid,
            self.noise,
            self.base_stations.clone(),
            self.users.clone(),
        )
    }

    /// Same world with `subcarrier_count` subcarriers of unchanged width.
    pub fn with_subcarrier_count(&self, subcarrier_count: usize) -> Result<Self> {
        let carrier = CarrierPlan::new(
            self.carrier.carrier_frequency,
            self.carrier.subcarrier_bandwidth * subcarrier_count as f64,
            subcarrier_count,
        )?;
        let noise = NoiseModel::new(self.noise.density_dbm_per_hz, carrier.subcarrier_bandwidth)?;
        Scenario::new(
            carrier,
            self.grid,
            noise,
            self.base_stations.clone(),
            self.users.clone(),
        )
    }

    /// Same world with every demand multiplied by `factor`.
    pub fn with_demand_scale(&self, factor: f64) -> Result<Self> {
        let mut users = self.users.clone();
        for u in &mut users {
            u.demand *= factor;
        }
        Scenario::new(
            self.carrier,
            self.grid,
            self.noise,
            self.base_stations.clone(),
            users,
        )
    }
}

// ---------------------------------------------------------------------------
// Document schema
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SystemDoc {
    carrier_frequency_hz: f64,
    total_bandwidth_hz: f64,
    subcarrier_count: usize,
    slot_count: usize,
    slot_length_s: f64,
    noise_density_dbm_per_hz: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BsDoc {
    id: usize,
    x_m: f64,
    y_m: f64,
    antenna_height_m: f64,
    antenna_count: usize,
    max_power_w: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WaypointDoc {
    t_s: f64,
    x_m: f64,
    y_m: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct UserDoc {
    id: usize,
    antenna_height_m: f64,
    demand_bits: f64,
    lane: Vec<WaypointDoc>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioDoc {
    system: SystemDoc,
    #[serde(default)]
    bs: Vec<BsDoc>,
    #[serde(default)]
    user: Vec<UserDoc>,
}

/// Parses and validates a scenario document.
pub fn load_scenario(document: &str) -> Result<Scenario> {
    let doc: ScenarioDoc = toml::from_str(document).map_err(|e| Error::Parse(e.to_string()))?;
    let s = doc.system;
    let carrier = CarrierPlan::new(s.carrier_frequency_hz, s.total_bandwidth_hz, s.subcarrier_count)?;
    let grid = TimeGrid::new(s.slot_count, s.slot_length_s)?;
    let noise = NoiseModel::new(s.noise_density_dbm_per_hz, carrier.subcarrier_bandwidth)?;
    let base_stations = doc
        .bs
        .into_iter()
        .map(|b| BaseStation {
            id: b.id,
            position: Point::new(b.x_m, b.y_m),
            antenna_height: b.antenna_height_m,
            antenna_count: b.antenna_count,
            max_power: b.max_power_w,
        })
        .collect();
    let users = doc
        .user
        .into_iter()
        .map(|u| {
            let waypoints = u
                .lane
                .into_iter()
                .map(|w| Waypoint {
                    t: w.t_s,
                    position: Point::new(w.x_m, w.y_m),
                })
                .collect();
            let lane = Lane::new(waypoints).map_err(|e| match e {
                Error::Invalid { reason, .. } => Error::invalid(format!("user {} lane", u.id), reason),
                other => other,
            })?;
            Ok(User {
                id: u.id,
                lane,
                antenna_height: u.antenna_height_m,
                demand: u.demand_bits,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Scenario::new(carrier, grid, noise, base_stations, users)
}

pub fn load_scenario_file(path: impl AsRef<std::path::Path>) -> Result<Scenario> {
    let text = std::fs::read_to_string(path)?;
    load_scenario(&text)
}

/// Serializes a scenario back into the document schema.
pub fn emit_scenario(scenario: &Scenario) -> String {
    let doc = ScenarioDoc {
        system: SystemDoc {
            carrier_frequency_hz: scenario.carrier.carrier_frequency,
            total_bandwidth_hz: scenario.carrier.total_bandwidth,
            subcarrier_count: scenario.carrier.subcarrier_count,
            slot_count: scenario.grid.slot_count,
            slot_length_s: scenario.grid.slot_length,
            noise_density_dbm_per_hz: scenario.noise.density_dbm_per_hz,
        },
        bs: scenario
            .base_stations
            .iter()
            .map(|b| BsDoc {
                id: b.id,
                x_m: b.position.x,
                y_m: b.position.y,
                antenna_height_m: b.antenna_height,
                antenna_count: b.antenna_count,
                max_power_w: b.max_power,
            })
            .collect(),
        user: scenario
            .users
            .iter()
            .map(|u| UserDoc {
                id: u.id,
                antenna_height_m: u.antenna_height,
                demand_bits: u.demand,
                lane: u
                    .lane
                    .waypoints()
                    .iter()
                    .map(|w| WaypointDoc {
                        t_s: w.t,
                        x_m: w.position.x,
                        y_m: w.position.y,
                    })
                    .collect(),
            })
            .collect(),
    };
    toml::to_string(&doc).expect("scenario document always serializes")
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const MINIMAL: &str = r#"
[system]
carrier_frequency_hz = 1.9e9
total_bandwidth_hz = 2e6
subcarrier_count = 1
slot_count = 1
slot_length_s = 10
noise_density_dbm_per_hz = -174

[[bs]]
id = 0
x_m = 0
y_m = 0
antenna_height_m = 100
antenna_count = 16
max_power_w = 40

[[user]]
id = 0
antenna_height_m = 10
demand_bits = 1e6
lane = [{ t_s = 0, x_m = 3000, y_m = 4000 }, { t_s = 10, x_m = 3000, y_m = 4000 }]
"#;

    fn lane(points: &[(f64, f64, f64)]) -> Lane {
        Lane::new(
            points
                .iter()
                .map(|&(t, x, y)| Waypoint {
                    t,
                    position: Point::new(x, y),
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn minimal_document_loads() {
        let s = load_scenario(MINIMAL).unwrap();
        assert_eq!(s.dims(), (1, 1, 1, 1));
        assert_eq!(s.carrier.subcarrier_bandwidth, 2e6);
        assert_eq!(s.slot_distance(0, 0, 0).unwrap(), 5000.0);
    }

    #[test]
    fn non_increasing_timestamps_name_the_lane() {
        let doc = MINIMAL.replace("{ t_s = 10,", "{ t_s = 0,");
        let err = load_scenario(&doc).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("user 0 lane"), "{msg}");
        assert!(msg.contains("strictly increasing"), "{msg}");
    }

    #[test]
    fn parse_error_points_at_field() {
        let doc = MINIMAL.replace("x_m = 3000,", "");
        let err = load_scenario(&doc).unwrap_err();
        assert!(matches!(err, Error::Parse(_)));
        let msg = err.to_string();
        assert!(msg.contains("x_m"), "{msg}");
        assert!(msg.contains("line"), "{msg}");
    }

    #[test]
    fn invariant_errors() {
        for (from, to, needle) in [
            ("antenna_count = 16", "antenna_count = 0", "bs 0"),
            ("max_power_w = 40", "max_power_w = 0", "bs 0"),
            ("antenna_height_m = 10\n", "antenna_height_m = -1\n", "user 0"),
            ("demand_bits = 1e6", "demand_bits = -1", "user 0"),
            ("slot_count = 1", "slot_count = 2", "user 0 lane"),
            ("slot_length_s = 10", "slot_length_s = 0", "system"),
            ("carrier_frequency_hz = 1.9e9", "carrier_frequency_hz = 1e6", "system"),
        ] {
            let doc = MINIMAL.replace(from, to);
            let msg = load_scenario(&doc).unwrap_err().to_string();
            assert!(msg.contains(needle), "{from} -> {msg}");
        }
    }

    #[test]
    fn interpolation_examples() {
        let l = lane(&[(0.0, 0.0, 0.0), (10.0, 1000.0, 0.0), (20.0, 1000.0, 2000.0)]);
        assert_eq!(l.position_at(10.0).unwrap(), Point::new(1000.0, 0.0));
        assert_eq!(l.position_at(5.0).unwrap(), Point::new(500.0, 0.0));
        assert_eq!(l.position_at(12.5).unwrap(), Point::new(1000.0, 500.0));
        assert_eq!(l.position_at(20.0).unwrap(), Point::new(1000.0, 2000.0));
        assert!(l.position_at(20.5).is_err());
        assert!(l.position_at(-1.0).is_err());
        assert_eq!(l.max_speed(), 200.0);
    }

    #[test]
    fn lane_needs_two_waypoints() {
        assert!(Lane::new(vec![Waypoint {
            t: 0.0,
            position: Point::default()
        }])
        .is_err());
    }

    fn single_user(lane: Lane, bs: Point, slots: usize, slot_length: f64) -> Scenario {
        let carrier = CarrierPlan::new(1.9e9, 2e6, 1).unwrap();
        Scenario::new(
            carrier,
            TimeGrid::new(slots, slot_length).unwrap(),
            NoiseModel::new(-174.0, carrier.subcarrier_bandwidth).unwrap(),
            vec![BaseStation {
                id: 0,
                position: bs,
                antenna_height: 100.0,
                antenna_count: 16,
                max_power: 40.0,
            }],
            vec![User {
                id: 0,
                lane,
                antenna_height: 10.0,
                demand: 1.0,
            }],
        )
        .unwrap()
    }

    #[test]
    fn slot_distance_uses_slot_midpoint() {
        // 10 m/s along x from the origin; slot 10 of 100 s is sampled at 1050 s
        let l = lane(&[(0.0, 0.0, 0.0), (2000.0, 20000.0, 0.0)]);
        let s = single_user(l, Point::new(0.0, 0.0), 20, 100.0);
        assert_eq!(s.slot_distance(0, 10, 0).unwrap(), 10500.0);
        assert!(s.slot_distance(0, 20, 0).is_err());
        assert!(s.slot_distance(1, 0, 0).is_err());
    }

    #[test]
    fn co_located_user_is_rejected() {
        let l = lane(&[(0.0, 50.0, 50.0), (10.0, 50.0, 50.0)]);
        let s = single_user(l, Point::new(50.0, 50.0), 1, 10.0);
        assert!(matches!(
            s.slot_distance(0, 0, 0),
            Err(Error::ZeroDistance { .. })
        ));
    }

    #[test]
    fn emit_round_trips() {
        let s = load_scenario(MINIMAL).unwrap();
        let again = load_scenario(&emit_scenario(&s)).unwrap();
        assert_eq!(s, again);
    }

    #[test]
    fn resizing_keeps_subcarrier_width() {
        let s = load_scenario(MINIMAL).unwrap();
        let wide = s.with_subcarrier_count(5).unwrap();
        assert_eq!(wide.carrier.subcarrier_bandwidth, 2e6);
        assert_eq!(wide.carrier.total_bandwidth, 10e6);
        assert_eq!(wide.noise.per_subcarrier_power, s.noise.per_subcarrier_power);
        assert!(s.with_slot_count(2).is_err());
    }
}
