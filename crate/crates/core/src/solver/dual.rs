use std::f64::consts::LOG2_E;

use ndarray::{Array2, Array4};

use super::greedy::greedy_assignment;
use super::problem::{Problem, NONE};
use super::local::{refine, Candidate};
use super::{update_gamma, update_nu, AllocationResult, AllocationTensor, DualState, SolverConfig};
use crate::rate::{f_nats, fixed_point_root};

/// Raw output of one solve, in the block-major layout of [`Problem`].
#[derive(Debug, Clone)]
pub(crate) struct Solution {
    /// Owner per `(b, n)`; idle subcarriers carry [`NONE`] or zero power.
    pub owner: Vec<u32>,
    pub power: Vec<f64>,
    pub delivered: Vec<f64>,
    pub total_power: f64,
    pub feasible: bool,
    pub gamma: Vec<f64>,
    pub nu: Vec<f64>,
    /// `u = e^ω` per link.
    pub u: Vec<f64>,
    pub iterations: usize,
    pub trace: Vec<f64>,
}

/// Uniform initial power: half the budget spread over the subcarriers.
pub(crate) fn nominal_power(p: &Problem) -> Vec<f64> {
    p.max_power
        .iter()
        .map(|pm| pm / (2.0 * p.subcarriers as f64))
        .collect()
}

pub(crate) fn solve(p: &Problem, config: &SolverConfig) -> Solution {
    let blocks = p.blocks();
    let bits = p.bits_per_efficiency;
    let nominal = nominal_power(p);

    let init_owner = greedy_assignment(p, &nominal, true);
    let (mut best, _) = refine(p, Candidate::evaluate(p, init_owner, &vec![None; p.users]), config.refine_rounds);
    let mut levels = best.levels.clone();
    let init_owner = best.owner.clone();

    // ν from the water levels that make the initial assignment meet demand
    let to_nu = |w: f64| w / (bits * LOG2_E * p.norm);
    let mut known: Vec<f64> = levels.iter().flatten().copied().collect();
    known.sort_by(f64::total_cmp);
    let fallback = known.get(known.len() / 2).copied().unwrap_or_else(|| {
        // no user could be served: start from the nominal power on the best link
        let best_a = p.snr_per_watt.iter().copied().fold(0.0, f64::max);
        if best_a > 0.0 {
            nominal[0] + 1.0 / best_a
        } else {
            0.0
        }
    });
    let mut nu: Vec<f64> = (0..p.users)
        .map(|k| {
            if p.demand[k] > 0.0 {
                to_nu(levels[k].unwrap_or(fallback))
            } else {
                0.0
            }
        })
        .collect();
    let nu_floor: Vec<f64> = nu.iter().map(|v| v * 1e-6).collect();

    let mut gamma = vec![1e-6 / p.norm; blocks];
    let mut u = vec![1.0; p.snr_per_watt.len()];
    for b in 0..blocks {
        let j = p.block_bs(b);
        for k in 0..p.users {
            for n in 0..p.subcarriers {
                let idx = p.link(b, k, n);
                u[idx] = fixed_point_root(nominal[j] * p.snr_per_watt[idx], p.antennas[j]);
            }
        }
    }

    let mut owner = init_owner;
    let mut power: Vec<f64> = owner
        .iter()
        .enumerate()
        .map(|(s, &o)| if o == NONE { 0.0 } else { nominal[p.block_bs(s / p.subcarriers)] })
        .collect();
    let mut last_recovered = owner.clone();
    let mut water = vec![0.0; p.users];
    let mut delivered = vec![0.0; p.users];
    let mut trace = Vec::new();
    let mut calm = 0;
    let mut last_improvement = 0;
    let mut iterations = 0;

    for i in 1..=config.max_iterations {
        iterations = i;
        let decay = (i as f64).powf(-config.step_decay);
        let mut change = 0.0;
        let mut magnitude = 0.0;
        delivered.iter_mut().for_each(|d| *d = 0.0);

        for b in 0..blocks {
            let j = p.block_bs(b);
            let l = p.antennas[j];
            let lf = l as f64;
            let cost_per_watt = gamma[b] + 1.0 / p.norm;
            for k in 0..p.users {
                water[k] = nu[k] * bits * LOG2_E / cost_per_watt;
            }
            let mut used = 0.0;
            for n in 0..p.subcarriers {
                let mut best_k = NONE;
                let mut best_metric = 0.0;
                let mut best_power = 0.0;
                let mut best_eff = 0.0;
                for k in 0..p.users {
                    let idx = p.link(b, k, n);
                    let a = p.snr_per_watt[idx];
                    if a <= 0.0 {
                        continue;
                    }
                    // step 1: power for the current ω, then pin ω at the new power
                    let p_hat = (water[k] - u[idx] / a).max(0.0);
                    let x = p_hat * a;
                    let un = fixed_point_root(x, l);
                    u[idx] = un;
                    if p_hat == 0.0 {
                        continue;
                    }
                    // step 2: modified derivative with g tight at ω = ln u*
                    let eff = f_nats(x, un, lf) * LOG2_E;
                    let metric = cost_per_watt * p_hat - nu[k] * bits * eff;
                    // step 3: strictly smaller wins, so ties keep the lowest index
                    if metric < best_metric {
                        best_metric = metric;
                        best_k = k as u32;
                        best_power = p_hat;
                        best_eff = eff;
                    }
                }
                let s = p.slot(b, n);
                let (old_k, old_p) = (owner[s], power[s]);
                if old_k == best_k {
                    change += (best_power - old_p).powi(2);
                } else {
                    change += best_power * best_power + old_p * old_p;
                }
                magnitude += best_power * best_power;
                owner[s] = best_k;
                power[s] = best_power;
                if best_k != NONE {
                    used += best_power;
                    delivered[best_k as usize] += bits * best_eff;
                }
            }
            let step = config.step_gamma_0 * decay / (p.norm * p.max_power[j]);
            gamma[b] = update_gamma(gamma[b], step, p.max_power[j], used);
        }

        for k in 0..p.users {
            if p.demand[k] <= 0.0 {
                nu[k] = 0.0;
                continue;
            }
            // step sized so ν scales by (C/D)^δ: a subgradient step in log ν
            let (c, d) = (p.demand[k], delivered[k]);
            let nk = nu[k].max(nu_floor[k]);
            let target = nk * (c / d).clamp(0.25, 4.0).powf(config.step_nu_0 * decay);
            let step = if c == d { 0.0 } else { (target - nk) / (c - d) };
            nu[k] = update_nu(nk, step, c, d);
        }

        trace.push(power.iter().sum::<f64>() / p.norm);

        if owner != last_recovered {
            let cand = Candidate::evaluate(p, owner.clone(), &levels);
            levels.clone_from(&cand.levels);
            if cand.better_than(&best) {
                best = cand;
                last_improvement = i;
            }
            last_recovered.copy_from_slice(&owner);
        }

        let rel = if magnitude > 0.0 {
            (change / magnitude).sqrt()
        } else if change > 0.0 {
            1.0
        } else {
            0.0
        };
        calm = if rel < config.convergence_tol { calm + 1 } else { 0 };
        if calm >= config.convergence_window || i - last_improvement >= config.stall_window {
            break;
        }
    }
    let (best, _) = refine(p, best, config.refine_rounds);
    let Candidate { owner, rec, .. } = best;
    Solution {
        owner,
        power: rec.power,
        delivered: rec.delivered,
        total_power: rec.total_power,
        feasible: rec.feasible,
        gamma,
        nu,
        u,
        iterations,
        trace,
    }
}

impl Solution {
    pub(crate) fn into_result(self, p: &Problem) -> AllocationResult {
        let dims = (p.users, p.slots, p.bss, p.subcarriers);
        let mut allocation = AllocationTensor::zeros(dims);
        let mut omega = Array4::zeros(dims);
        for b in 0..p.blocks() {
            let (m, j) = (b / p.bss, b % p.bss);
            for n in 0..p.subcarriers {
                let s = p.slot(b, n);
                let o = self.owner[s];
                if o != NONE && self.power[s] > 0.0 {
                    allocation.power[[o as usize, m, j, n]] = self.power[s];
                    allocation.assignment[[o as usize, m, j, n]] = true;
                }
                for k in 0..p.users {
                    omega[[k, m, j, n]] = self.u[p.link(b, k, n)].ln();
                }
            }
        }
        let gamma = Array2::from_shape_vec((p.slots, p.bss), self.gamma).expect("gamma has M·J entries");
        AllocationResult {
            allocation,
            avg_power: self.total_power / p.norm,
            delivered_bits: self.delivered,
            demand_bits: p.demand.clone(),
            feasible: self.feasible,
            dual_state: DualState {
                gamma,
                nu: self.nu,
                omega,
                iteration: self.iterations,
            },
            iterations_used: self.iterations,
            convergence_trace: self.trace,
        }
    }
}
