//! Demand-weighted greedy subcarrier assignment.
//!
//! Users take turns, the one with the smallest fraction of its demand covered
//! going first, and each turn claims the free subcarrier with the largest
//! large-scale gain for that user. Rates are estimated at a nominal power. A
//! user stops claiming once its nominal rate covers its demand, unless `fill`
//! is set, in which case turns continue until every usable subcarrier is taken.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::problem::{Problem, NONE};
use crate::rate::deterministic_efficiency;

#[derive(PartialEq)]
struct Turn {
    covered: f64,
    user: usize,
}

impl Eq for Turn {}

impl Ord for Turn {
    fn cmp(&self, other: &Self) -> Ordering {
        // min-heap on coverage, then lowest user index
        other
            .covered
            .total_cmp(&self.covered)
            .then_with(|| other.user.cmp(&self.user))
    }
}

impl PartialOrd for Turn {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Owner per `(b, n)` subcarrier; `nominal_power[j]` is the per-subcarrier
/// power assumed at BS `j` when estimating rates.
pub(crate) fn greedy_assignment(p: &Problem, nominal_power: &[f64], fill: bool) -> Vec<u32> {
    let mut owner = vec![NONE; p.resources()];
    let mut heap = BinaryHeap::new();
    let mut order: Vec<Vec<u32>> = vec![Vec::new(); p.users];
    for k in 0..p.users {
        if p.demand[k] <= 0.0 {
            continue;
        }
        let mut mine: Vec<u32> = (0..p.resources() as u32)
            .filter(|&s| snr_per_watt(p, s as usize, k) > 0.0)
            .collect();
        mine.sort_by(|&x, &y| {
            snr_per_watt(p, y as usize, k)
                .total_cmp(&snr_per_watt(p, x as usize, k))
                .then(x.cmp(&y))
        });
        // reversed so the best candidate pops off the end
        mine.reverse();
        order[k] = mine;
        heap.push(Turn { covered: 0.0, user: k });
    }
    let mut delivered = vec![0.0; p.users];
    while let Some(Turn { user: k, .. }) = heap.pop() {
        let claim = loop {
            match order[k].pop() {
                Some(s) if owner[s as usize] == NONE => break Some(s as usize),
                Some(_) => continue,
                None => break None,
            }
        };
        let Some(s) = claim else { continue };
        owner[s] = k as u32;
        let b = s / p.subcarriers;
        let j = p.block_bs(b);
        let snr = nominal_power[j] * snr_per_watt(p, s, k);
        delivered[k] += p.bits_per_efficiency * deterministic_efficiency(snr, p.antennas[j]);
        if fill || delivered[k] < p.demand[k] {
            heap.push(Turn {
                covered: delivered[k] / p.demand[k],
                user: k,
            });
        }
    }
    owner
}

#[inline]
fn snr_per_watt(p: &Problem, slot: usize, k: usize) -> f64 {
    let b = slot / p.subcarriers;
    let n = slot % p.subcarriers;
    p.snr_per_watt[p.link(b, k, n)]
}
