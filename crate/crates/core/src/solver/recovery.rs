//! Exact powers for a fixed subcarrier assignment.
//!
//! With owners fixed the problem is convex and separates per user except for
//! the per-(slot, BS) caps. Each user water-fills its links with the
//! deterministic-equivalent rate, where the fixed point `u*` moves with the
//! power. For a link water level `w` (W) and `a = β/σ²`, the stationarity
//! condition `P + u*(P)/a = w` together with the fixed-point quadratic gives
//! `u² + c(L−1)u − Lc = 0` with `c = a·w`, so power and `u*` are closed form.
//! Caps are enforced by shrinking the water levels of the offending block.

use std::f64::consts::LOG2_E;

use super::problem::{Problem, NONE};
use crate::rate::f_nats;

/// Relative slack below which a per-block cap counts as met.
const CAP_SLACK: f64 = 1e-9;
const CAP_ROUNDS: usize = 60;
const BISECTION_STEPS: usize = 200;

/// Power and efficiency (bits/s/Hz) of one link at water level `level`.
#[inline]
pub(crate) fn water_fill(level: f64, snr_per_watt: f64, antennas: f64) -> (f64, f64) {
    let c = level * snr_per_watt;
    if !(c > 1.0) {
        return (0.0, 0.0);
    }
    let lm1 = antennas - 1.0;
    let u = 2.0 * antennas * c / (c * lm1 + (c * c * lm1 * lm1 + 4.0 * antennas * c).sqrt());
    let u = u.max(1.0);
    let x = c - u;
    if x <= 0.0 {
        return (0.0, 0.0);
    }
    (x / snr_per_watt, f_nats(x, u, antennas) * LOG2_E)
}

#[derive(Debug, Clone)]
pub(crate) struct Recovered {
    /// Power of the owner of each subcarrier `(b, n)`.
    pub power: Vec<f64>,
    pub delivered: Vec<f64>,
    pub total_power: f64,
    /// Sum over users of the relative shortfall `max(0, 1 − delivered/demand)`.
    pub shortfall: f64,
    pub feasible: bool,
}

struct UserLinks {
    /// `(block, subcarrier slot index, a, L)`.
    links: Vec<(usize, usize, f64, f64)>,
}

fn user_links(p: &Problem, owner: &[u32]) -> Vec<UserLinks> {
    let mut out: Vec<UserLinks> = (0..p.users).map(|_| UserLinks { links: Vec::new() }).collect();
    for b in 0..p.blocks() {
        let l = p.antennas[p.block_bs(b)] as f64;
        for n in 0..p.subcarriers {
            let o = owner[p.slot(b, n)];
            if o == NONE {
                continue;
            }
            let k = o as usize;
            let a = p.snr_per_watt[p.link(b, k, n)];
            if a > 0.0 {
                out[k].links.push((b, p.slot(b, n), a, l));
            }
        }
    }
    out
}

fn delivered_at(links: &UserLinks, level: f64, scale: &[f64], bits: f64) -> f64 {
    links
        .links
        .iter()
        .map(|&(b, _, a, l)| water_fill(level * scale[b], a, l).1)
        .sum::<f64>()
        * bits
}

/// Smallest water level (up to bisection precision) that delivers `demand`,
/// or `None` when the links cannot carry it at any finite level.
fn solve_level(links: &UserLinks, demand: f64, scale: &[f64], bits: f64, hint: Option<f64>) -> Option<f64> {
    let floor = links
        .links
        .iter()
        .map(|&(b, _, a, _)| 1.0 / (a * scale[b]))
        .fold(f64::INFINITY, f64::min);
    if !floor.is_finite() {
        return None;
    }
    // work in log-level; at the floor nothing is delivered
    let ln_floor = floor.ln();
    let meets = |x: f64| delivered_at(links, x.exp(), scale, bits) >= demand;
    let (center, mut step) = match hint {
        Some(h) if h > floor => (h.ln(), 1e-3),
        _ => (ln_floor + 1.0, 0.5),
    };
    let (mut lo, mut hi);
    if meets(center) {
        hi = center;
        lo = center - step;
        loop {
            if lo <= ln_floor {
                lo = ln_floor;
                break;
            }
            if !meets(lo) {
                break;
            }
            hi = lo;
            step *= 2.0;
            lo = hi - step;
        }
    } else {
        lo = center;
        hi = center + step;
        while !meets(hi) {
            lo = hi;
            step *= 2.0;
            hi = lo + step;
            if hi > 700.0 {
                return None;
            }
        }
    }
    for _ in 0..BISECTION_STEPS {
        if hi - lo <= 1e-14 * hi.abs().max(1.0) {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if meets(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Some(hi.exp())
}

/// Best effort for a demand no level can meet: the level that puts the full
/// budget on the user's weakest link; the cap pass then scales it down.
fn full_power_level(p: &Problem, links: &UserLinks) -> Option<f64> {
    links
        .links
        .iter()
        .map(|&(b, _, a, _)| p.max_power[p.block_bs(b)] + 1.0 / a)
        .reduce(f64::max)
}

/// Cheapest powers for the assignment `owner`, per `(b, n)` subcarrier.
/// `levels` carries warm-start water levels across calls.
pub(crate) fn recover(p: &Problem, owner: &[u32], levels: &mut [Option<f64>]) -> Recovered {
    let links = user_links(p, owner);
    let mut block_links: Vec<Vec<(usize, f64, f64)>> = vec![Vec::new(); p.blocks()];
    for (k, ul) in links.iter().enumerate() {
        for &(b, _, a, l) in &ul.links {
            block_links[b].push((k, a, l));
        }
    }
    let bits = p.bits_per_efficiency;
    let mut scale = vec![1.0; p.blocks()];
    let mut level: Vec<Option<f64>> = vec![None; p.users];

    let solve_users = |scale: &[f64], level: &mut [Option<f64>], hints: &[Option<f64>]| {
        for k in 0..p.users {
            level[k] = if p.demand[k] > 0.0 {
                solve_level(&links[k], p.demand[k], scale, bits, hints[k]).or_else(|| full_power_level(p, &links[k]))
            } else {
                None
            };
        }
    };

    let hints: Vec<Option<f64>> = levels.to_vec();
    solve_users(&scale, &mut level, &hints);

    let block_use = |scale: &[f64], level: &[Option<f64>]| {
        let mut used = vec![0.0; p.blocks()];
        for (k, ul) in links.iter().enumerate() {
            if let Some(w) = level[k] {
                for &(b, _, a, l) in &ul.links {
                    used[b] += water_fill(w * scale[b], a, l).0;
                }
            }
        }
        used
    };

    for _ in 0..CAP_ROUNDS {
        let used = block_use(&scale, &level);
        let over = (0..p.blocks())
            .any(|b| used[b] > p.max_power[p.block_bs(b)] * (1.0 + CAP_SLACK));
        let loose = (0..p.blocks())
            .any(|b| scale[b] < 1.0 && used[b] < p.max_power[p.block_bs(b)] * (1.0 - 1e-6));
        if !over && !loose {
            break;
        }
        for b in 0..p.blocks() {
            let cap = p.max_power[p.block_bs(b)];
            let block_power = |s: f64| -> f64 {
                block_links[b]
                    .iter()
                    .filter_map(|&(k, a, l)| level[k].map(|w| water_fill(w * s, a, l).0))
                    .sum()
            };
            if block_power(1.0) <= cap {
                scale[b] = 1.0;
                continue;
            }
            let (mut lo, mut hi) = (0.0, 1.0);
            for _ in 0..100 {
                let mid = 0.5 * (lo + hi);
                if block_power(mid) > cap {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            scale[b] = lo;
        }
        let hints = level.clone();
        solve_users(&scale, &mut level, &hints);
    }

    let mut power = vec![0.0; p.resources()];
    let mut delivered = vec![0.0; p.users];
    for (k, ul) in links.iter().enumerate() {
        if let Some(w) = level[k] {
            for &(b, slot, a, l) in &ul.links {
                let (pw, eff) = water_fill(w * scale[b], a, l);
                power[slot] = pw;
                delivered[k] += eff * bits;
            }
        }
    }
    // hard cap: shrink any block still above its budget
    for b in 0..p.blocks() {
        let cap = p.max_power[p.block_bs(b)];
        let range = p.slot(b, 0)..p.slot(b, 0) + p.subcarriers;
        let used: f64 = power[range.clone()].iter().sum();
        if used > cap * (1.0 + CAP_SLACK) {
            let f = cap / used;
            for s in range {
                if power[s] > 0.0 {
                    let k = owner[s] as usize;
                    let n = s - p.slot(b, 0);
                    let a = p.snr_per_watt[p.link(b, k, n)];
                    let l = p.antennas[p.block_bs(b)];
                    let before = crate::rate::deterministic_efficiency(power[s] * a, l);
                    power[s] *= f;
                    let after = crate::rate::deterministic_efficiency(power[s] * a, l);
                    delivered[k] += (after - before) * bits;
                }
            }
        }
    }
    let shortfall = (0..p.users)
        .filter(|&k| p.demand[k] > 0.0)
        .map(|k| (1.0 - delivered[k] / p.demand[k]).max(0.0))
        .sum::<f64>();
    let feasible = (0..p.users).all(|k| delivered[k] >= p.demand[k] * (1.0 - 1e-3));
    for (k, l) in level.iter().enumerate() {
        if l.is_some() {
            levels[k] = *l;
        }
    }
    Recovered {
        total_power: power.iter().sum(),
        power,
        delivered,
        shortfall,
        feasible,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rate::{deterministic_efficiency, fixed_point_root};

    #[test]
    fn water_fill_is_stationary() {
        for &(level, a, l) in &[(2.0, 3.0, 1.0), (10.0, 0.5, 16.0), (1e3, 40.0, 4.0)] {
            let (p, eff) = water_fill(level, a, l);
            let u = fixed_point_root(p * a, l as usize);
            assert!((p + u / a - level).abs() < 1e-9 * level, "{level} {a} {l}");
            assert!((eff - deterministic_efficiency(p * a, l as usize)).abs() < 1e-12);
        }
        assert_eq!(water_fill(0.5, 1.0, 16.0), (0.0, 0.0));
        assert_eq!(water_fill(1.0, 0.0, 16.0), (0.0, 0.0));
    }
}
