//! Comparison schemes: a myopic per-slot allocator on instantaneous channels
//! and a common-power allocator on a greedy assignment.

use ndarray::{Array2, Array4};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::channel::{sample_small_scale, ChannelTensor};
use crate::rate::{deterministic_efficiency, fixed_point_root};
use crate::scenario::Scenario;
use crate::solver::{
    fill_owner, solve_problem, AllocationResult, AllocationTensor, DualState, Problem, SolverConfig, DEMAND_SLACK, IDLE,
};
use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BaselineKind {
    MyopicFullCsit,
    EqualPower,
}

impl BaselineKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::MyopicFullCsit => "myopic",
            Self::EqualPower => "equal_power",
        }
    }

    pub fn run(
        self,
        channel: &ChannelTensor,
        scenario: &Scenario,
        config: &SolverConfig,
        rng_stream: u64,
    ) -> Result<AllocationResult> {
        match self {
            Self::MyopicFullCsit => run_myopic(channel, scenario, config, rng_stream),
            Self::EqualPower => run_equal_power(channel, scenario, config),
        }
    }
}

/// Number of round-robin user groups for the myopic scheme: enough that each
/// served user can get about two subcarriers per slot, and at most `M`.
pub fn myopic_groups(users: usize, slots: usize, bss: usize, subcarriers: usize) -> usize {
    let per_slot = (bss * subcarriers).max(1);
    (2 * users).div_ceil(per_slot).clamp(1, slots.max(1))
}

/// Slot-by-slot allocation with no look-ahead. Users are split into
/// [`myopic_groups`] round-robin groups (user `k` may be served in slot `m` iff
/// `k ≡ m` modulo the group count), each eligible slot carries an equal share
/// of the user's demand, and each slot is solved on its own with the gains
/// `β·X/L` of a fresh small-scale draw. `rng_stream` seeds the draws; slot `m`
/// uses stream `m` of that seed.
pub fn run_myopic(
    channel: &ChannelTensor,
    scenario: &Scenario,
    config: &SolverConfig,
    rng_stream: u64,
) -> Result<AllocationResult> {
    config.validate()?;
    let full = Problem::from_scenario(channel, scenario)?;
    let (nk, nm, nj, nn) = scenario.dims();
    let groups = myopic_groups(nk, nm, nj, nn);
    let eligible_slots = |k: usize| (0..nm).filter(|m| m % groups == k % groups).count();

    let mut allocation = AllocationTensor::zeros((nk, nm, nj, nn));
    let mut omega = Array4::zeros((nk, nm, nj, nn));
    let mut gamma = Array2::zeros((nm, nj));
    let mut nu = vec![0.0; nk];
    let mut delivered = vec![0.0; nk];
    let mut total_power = 0.0;
    let mut iterations = 0;
    let mut trace = Vec::with_capacity(nm);

    for m in 0..nm {
        let users: Vec<usize> = (0..nk).filter(|k| k % groups == m % groups).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(rng_stream);
        rng.set_stream(m as u64);
        let mut snr_per_watt = vec![0.0; nj * users.len() * nn];
        for j in 0..nj {
            let l = full.antennas[j];
            for (i, &k) in users.iter().enumerate() {
                for n in 0..nn {
                    let x = sample_small_scale(l, &mut rng).vector_gain;
                    snr_per_watt[(j * users.len() + i) * nn + n] =
                        full.snr_per_watt[full.link(m * nj + j, k, n)] * x / l as f64;
                }
            }
        }
        let sub = Problem {
            users: users.len(),
            slots: 1,
            bss: nj,
            subcarriers: nn,
            bits_per_efficiency: full.bits_per_efficiency,
            demand: users.iter().map(|&k| full.demand[k] / eligible_slots(k) as f64).collect(),
            antennas: full.antennas.clone(),
            max_power: full.max_power.clone(),
            snr_per_watt,
            norm: users.len().max(1) as f64,
        };
        let sol = solve_problem(&sub, config);
        for j in 0..nj {
            gamma[[m, j]] = sol.gamma[j];
            for n in 0..nn {
                let s = sub.slot(j, n);
                let o = sol.owner[s];
                if o != IDLE && sol.power[s] > 0.0 {
                    let k = users[o as usize];
                    allocation.power[[k, m, j, n]] = sol.power[s];
                    allocation.assignment[[k, m, j, n]] = true;
                }
                for (i, &k) in users.iter().enumerate() {
                    omega[[k, m, j, n]] = sol.u[sub.link(j, i, n)].ln();
                }
            }
        }
        for (i, &k) in users.iter().enumerate() {
            delivered[k] += sol.delivered[i];
            nu[k] = sol.nu[i];
        }
        total_power += sol.total_power;
        iterations = iterations.max(sol.iterations);
        trace.push(total_power / (nk * nm) as f64);
    }

    let feasible = (0..nk).all(|k| delivered[k] >= full.demand[k] * (1.0 - DEMAND_SLACK));
    Ok(AllocationResult {
        allocation,
        avg_power: total_power / (nk * nm) as f64,
        delivered_bits: delivered,
        demand_bits: full.demand,
        feasible,
        dual_state: DualState {
            gamma,
            nu,
            omega,
            iteration: iterations,
        },
        iterations_used: iterations,
        convergence_trace: trace,
    })
}

const EQUAL_POWER_STEPS: usize = 200;

/// One power level shared by every assigned subcarrier, on the same greedy
/// assignment the proposed solver starts from. The level is the smallest that
/// meets every demand, found by bisection, and is capped so no (slot, BS)
/// block exceeds its budget; if the cap binds first the result is infeasible.
pub fn run_equal_power(channel: &ChannelTensor, scenario: &Scenario, config: &SolverConfig) -> Result<AllocationResult> {
    config.validate()?;
    let p = Problem::from_scenario(channel, scenario)?;
    let (nk, nm, nj, nn) = scenario.dims();
    let owner = fill_owner(&p);

    // (user, block, subcarrier) of every assigned link
    let mut links = Vec::new();
    let mut per_block = vec![0usize; p.blocks()];
    for b in 0..p.blocks() {
        for n in 0..nn {
            let o = owner[p.slot(b, n)];
            if o != IDLE {
                links.push((o as usize, b, n));
                per_block[b] += 1;
            }
        }
    }
    let cap = (0..p.blocks())
        .filter(|&b| per_block[b] > 0)
        .map(|b| p.max_power[p.block_bs(b)] / per_block[b] as f64)
        .fold(f64::INFINITY, f64::min);

    let delivered_at = |level: f64| {
        let mut d = vec![0.0; nk];
        for &(k, b, n) in &links {
            let l = p.antennas[p.block_bs(b)];
            d[k] += p.bits_per_efficiency * deterministic_efficiency(level * p.snr_per_watt[p.link(b, k, n)], l);
        }
        d
    };
    let meets = |d: &[f64]| (0..nk).all(|k| d[k] >= p.demand[k]);

    let mut steps = 0;
    let level = if links.is_empty() {
        0.0
    } else if !meets(&delivered_at(cap)) {
        cap
    } else {
        // geometric bisection between a level that fails and the cap
        let mut hi = cap;
        let mut lo = cap;
        while meets(&delivered_at(lo)) && lo > 1e-300 {
            hi = lo;
            lo *= 1e-3;
            steps += 1;
        }
        while steps < EQUAL_POWER_STEPS && hi - lo > 1e-12 * hi {
            let mid = (lo * hi).sqrt().max(lo + 0.5 * (hi - lo) * f64::EPSILON);
            if meets(&delivered_at(mid)) {
                hi = mid;
            } else {
                lo = mid;
            }
            steps += 1;
        }
        hi
    };

    let mut allocation = AllocationTensor::zeros((nk, nm, nj, nn));
    let mut omega = Array4::zeros((nk, nm, nj, nn));
    if level > 0.0 {
        for &(k, b, n) in &links {
            let (m, j) = (b / nj, b % nj);
            allocation.power[[k, m, j, n]] = level;
            allocation.assignment[[k, m, j, n]] = true;
            omega[[k, m, j, n]] = fixed_point_root(level * p.snr_per_watt[p.link(b, k, n)], p.antennas[j]).ln();
        }
    }
    let delivered = if level > 0.0 { delivered_at(level) } else { vec![0.0; nk] };
    let feasible = (0..nk).all(|k| delivered[k] >= p.demand[k] * (1.0 - DEMAND_SLACK));
    Ok(AllocationResult {
        allocation,
        avg_power: level * links.len() as f64 / (nk * nm) as f64,
        delivered_bits: delivered,
        demand_bits: p.demand,
        feasible,
        dual_state: DualState {
            gamma: Array2::zeros((nm, nj)),
            nu: vec![0.0; nk],
            omega,
            iteration: steps,
        },
        iterations_used: steps,
        convergence_trace: Vec::new(),
    })
}
