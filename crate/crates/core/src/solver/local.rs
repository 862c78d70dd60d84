//! Price-driven refinement of a feasible assignment.
//!
//! The recovered water level `w_k` of each user prices its rate: on a link,
//! user `k` earns `w_k · R(P) − P` watts at its water-filled power, where `R`
//! is the deterministic-equivalent rate in nats. A subcarrier is worth more to
//! whichever user earns most on it. Each round hands over the most profitable
//! fraction of contested subcarriers, recovers exact powers, and keeps the move
//! only if total power drops.

use std::f64::consts::LN_2;

use super::problem::{Problem, NONE};
use super::recovery::{recover, water_fill, Recovered};

#[derive(Debug, Clone)]
pub(crate) struct Candidate {
    pub owner: Vec<u32>,
    pub rec: Recovered,
    /// Water level per user that produced `rec`.
    pub levels: Vec<Option<f64>>,
}

impl Candidate {
    pub fn evaluate(p: &Problem, owner: Vec<u32>, hints: &[Option<f64>]) -> Self {
        let mut levels = hints.to_vec();
        let rec = recover(p, &owner, &mut levels);
        Self { owner, rec, levels }
    }

    pub fn better_than(&self, other: &Candidate) -> bool {
        match (self.rec.feasible, other.rec.feasible) {
            (true, false) => true,
            (false, true) => false,
            (true, true) => self.rec.total_power < other.rec.total_power,
            (false, false) => self.rec.shortfall < other.rec.shortfall,
        }
    }
}

#[inline]
fn profit(level: Option<f64>, a: f64, antennas: f64) -> f64 {
    match level {
        Some(w) if a > 0.0 => {
            let (power, eff) = water_fill(w, a, antennas);
            w * eff * LN_2 - power
        }
        _ => 0.0,
    }
}

/// Subcarriers whose most profitable user is not the owner, with the gain.
fn contested(p: &Problem, c: &Candidate) -> Vec<(f64, usize, u32)> {
    let mut out = Vec::new();
    for b in 0..p.blocks() {
        let l = p.antennas[p.block_bs(b)] as f64;
        for n in 0..p.subcarriers {
            let s = p.slot(b, n);
            let o = c.owner[s];
            let held = if o == NONE {
                0.0
            } else {
                profit(c.levels[o as usize], p.snr_per_watt[p.link(b, o as usize, n)], l)
            };
            let (mut best_k, mut best) = (NONE, held);
            for k in 0..p.users {
                if p.demand[k] <= 0.0 {
                    continue;
                }
                let v = profit(c.levels[k], p.snr_per_watt[p.link(b, k, n)], l);
                if v > best {
                    best = v;
                    best_k = k as u32;
                }
            }
            if best_k != NONE && best_k != o {
                out.push((best - held, s, best_k));
            }
        }
    }
    out
}

/// Improves `start` for at most `rounds` recoveries; never returns worse.
pub(crate) fn refine(p: &Problem, start: Candidate, rounds: usize) -> (Candidate, usize) {
    let mut best = start;
    // at most `quota` subcarriers change hands per user and round
    let mut quota = 4usize;
    let mut used = 0;
    while used < rounds && best.rec.feasible {
        let mut moves = contested(p, &best);
        if moves.is_empty() {
            break;
        }
        moves.sort_by(|x, y| y.0.total_cmp(&x.0).then(x.1.cmp(&y.1)));
        let mut gained = vec![0usize; p.users];
        let mut lost = vec![0usize; p.users];
        let mut owner = best.owner.clone();
        for &(_, s, k) in &moves {
            let o = best.owner[s];
            if gained[k as usize] >= quota || (o != NONE && lost[o as usize] >= quota) {
                continue;
            }
            gained[k as usize] += 1;
            if o != NONE {
                lost[o as usize] += 1;
            }
            owner[s] = k;
        }
        used += 1;
        let cand = Candidate::evaluate(p, owner, &best.levels);
        if cand.better_than(&best) {
            best = cand;
            quota *= 2;
        } else if quota == 1 {
            break;
        } else {
            quota /= 2;
        }
    }
    (best, used)
}

/// Lagrangian lower bound on the total power (caps relaxed) at the given
/// water levels; every user must carry a level.
#[cfg(test)]
pub(crate) fn lower_bound(p: &Problem, levels: &[Option<f64>]) -> f64 {
    let mut lb = 0.0;
    for k in 0..p.users {
        if let Some(w) = levels[k] {
            lb += w * p.demand[k] * LN_2 / p.bits_per_efficiency;
        }
    }
    for b in 0..p.blocks() {
        let l = p.antennas[p.block_bs(b)] as f64;
        for n in 0..p.subcarriers {
            let mut best = 0.0f64;
            for k in 0..p.users {
                best = best.max(profit(levels[k], p.snr_per_watt[p.link(b, k, n)], l));
            }
            lb -= best;
        }
    }
    lb
}
