//! Synthetic worlds: the coastal reference layout and small random instances.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::scenario::{BaseStation, CarrierPlan, Lane, NoiseModel, Point, Scenario, TimeGrid, User, Waypoint};
use crate::Result;

/// Coastal reference world: BSs evenly spaced along the shoreline `y = 0`,
/// ships on straight tracks within `max_offshore` meters of the coast.
#[derive(Debug, Clone, PartialEq)]
pub struct CoastalWorld {
    pub bs_count: usize,
    pub user_count: usize,
    pub slot_count: usize,
    pub slot_length: f64,
    pub subcarrier_count: usize,
    pub subcarrier_bandwidth: f64,
    pub carrier_frequency: f64,
    pub noise_density_dbm_per_hz: f64,
    pub antenna_count: usize,
    pub bs_height: f64,
    pub user_height: f64,
    pub max_power: f64,
    /// Distance between neighbouring BSs along the coast, m.
    pub bs_spacing: f64,
    /// Ships stay between `min_offshore` and `max_offshore`, m.
    pub min_offshore: f64,
    pub max_offshore: f64,
    /// Ships stay within this many meters of the middle BS along the coast.
    pub half_coast: f64,
    pub speed_range: (f64, f64),
    pub demand_range: (f64, f64),
}

impl Default for CoastalWorld {
    fn default() -> Self {
        Self {
            bs_count: 3,
            user_count: 90,
            slot_count: 250,
            slot_length: 20.0,
            subcarrier_count: 15,
            subcarrier_bandwidth: 2e6,
            carrier_frequency: 1.9e9,
            noise_density_dbm_per_hz: -174.0,
            antenna_count: 16,
            bs_height: 100.0,
            user_height: 10.0,
            max_power: 40.0,
            bs_spacing: 40_000.0,
            min_offshore: 500.0,
            max_offshore: 50_000.0,
            half_coast: 60_000.0,
            speed_range: (5.0, 15.0),
            demand_range: (1e9, 4e9),
        }
    }
}

impl CoastalWorld {
    pub fn generate(&self, seed: u64) -> Result<Scenario> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let carrier = CarrierPlan::new(
            self.carrier_frequency,
            self.subcarrier_bandwidth * self.subcarrier_count as f64,
            self.subcarrier_count,
        )?;
        let grid = TimeGrid::new(self.slot_count, self.slot_length)?;
        let noise = NoiseModel::new(self.noise_density_dbm_per_hz, carrier.subcarrier_bandwidth)?;
        let mid = (self.bs_count as f64 - 1.0) / 2.0;
        let base_stations = (0..self.bs_count)
            .map(|j| BaseStation {
                id: j,
                position: Point::new((j as f64 - mid) * self.bs_spacing, 0.0),
                antenna_height: self.bs_height,
                antenna_count: self.antenna_count,
                max_power: self.max_power,
            })
            .collect();
        let duration = grid.duration();
        let inside = |p: Point| {
            p.x.abs() <= self.half_coast && (self.min_offshore..=self.max_offshore).contains(&p.y)
        };
        let mut users = Vec::with_capacity(self.user_count);
        for k in 0..self.user_count {
            // rejection-sample a straight track that stays in the service area
            let (start, end) = loop {
                let start = Point::new(
                    rng.gen_range(-self.half_coast..=self.half_coast),
                    rng.gen_range(self.min_offshore..=self.max_offshore),
                );
                let speed = rng.gen_range(self.speed_range.0..=self.speed_range.1);
                let heading = rng.gen_range(0.0..std::f64::consts::TAU);
                let end = Point::new(
                    start.x + speed * duration * heading.cos(),
                    start.y + speed * duration * heading.sin(),
                );
                if inside(end) {
                    break (start, end);
                }
            };
            let lane = Lane::new(vec![
                Waypoint { t: 0.0, position: start },
                Waypoint {
                    t: duration,
                    position: end,
                },
            ])?;
            let demand = rng.gen_range(self.demand_range.0..=self.demand_range.1);
            users.push(User {
                id: k,
                lane,
                antenna_height: self.user_height,
                demand,
            });
        }
        Scenario::new(carrier, grid, noise, base_stations, users)
    }
}

/// A small random world for oracle comparisons: `J` BSs on the coast and `K`
/// ships within 40 km, with demands of 0.5–6 bit/s/Hz worth of one slot on one
/// subcarrier. Power caps are loose.
pub fn small_instance(seed: u64, users: usize, slots: usize, bss: usize, subcarriers: usize) -> Result<Scenario> {
    let world = CoastalWorld {
        bs_count: bss,
        user_count: users,
        slot_count: slots,
        slot_length: 10.0,
        subcarrier_count: subcarriers,
        bs_spacing: 20_000.0,
        min_offshore: 2_000.0,
        max_offshore: 40_000.0,
        half_coast: 30_000.0,
        speed_range: (5.0, 15.0),
        demand_range: (0.5 * 2e6 * 10.0, 6.0 * 2e6 * 10.0),
        ..CoastalWorld::default()
    };
    world.generate(seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_world_shape() {
        let s = CoastalWorld::default().generate(1).unwrap();
        assert_eq!(s.dims(), (90, 250, 3, 15));
        assert_eq!(s.carrier.subcarrier_bandwidth, 2e6);
        for u in &s.users {
            for w in u.lane.waypoints() {
                assert!(w.position.y > 0.0 && w.position.y <= 50_000.0);
            }
            let v = u.lane.max_speed();
            assert!((5.0 - 1e-9..=15.0 + 1e-9).contains(&v), "{v}");
        }
    }

    #[test]
    fn generation_is_seeded() {
        let w = CoastalWorld {
            user_count: 5,
            ..Default::default()
        };
        assert_eq!(w.generate(3).unwrap(), w.generate(3).unwrap());
        assert_ne!(w.generate(3).unwrap(), w.generate(4).unwrap());
    }
}
