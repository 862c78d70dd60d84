//! Iterative long-term resource allocation by Lagrangian dual decomposition.
//!
//! The relaxed problem minimizes `(1/KM) Σ a·P` subject to per-(slot, BS) power
//! caps (multipliers `γ_{m,j}`), per-user data volumes (multipliers `ν_k`) and
//! one owner per subcarrier. Each sweep visits slots, BSs, subcarriers and users
//! in that order and, per link:
//!
//! 1. sets the water-filling power [`power_update`] for the current `ω`,
//! 2. pins `ω = ln u*(P̂)` ([`update_omega`]), where the surrogate `g` is tight,
//! 3. scores the link with [`assignment_metric`] and gives the subcarrier to the
//!    most negative score ([`assign_subcarriers`]).
//!
//! `γ_{m,j}` is stepped after each (slot, BS) block and `ν` after the sweep, both
//! by projected subgradient steps. Every distinct hard assignment met along the
//! way is turned into exact powers (see `recovery`), and the cheapest feasible
//! one is returned.
//!
//! The loop starts from a demand-weighted greedy assignment, and a
//! price-driven refinement (`local`) runs before and after it: contested
//! subcarriers move to the user that values them most at the current water
//! levels, as long as the exact recovered power drops.

mod dual;
mod greedy;
mod local;
mod problem;
mod recovery;

use std::f64::consts::LOG2_E;

use ndarray::{Array2, Array4};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::channel::ChannelTensor;
use crate::rate::{self, deterministic_efficiency, LinkParams};
use crate::scenario::Scenario;
use crate::{Error, Result};

pub(crate) use problem::Problem;

/// Subcarrier owners and transmit powers, indexed `(k, m, j, n)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AllocationTensor {
    pub power: Array4<f64>,
    pub assignment: Array4<bool>,
}

impl AllocationTensor {
    pub fn zeros(dims: (usize, usize, usize, usize)) -> Self {
        Self {
            power: Array4::zeros(dims),
            assignment: Array4::from_elem(dims, false),
        }
    }

    pub fn dims(&self) -> (usize, usize, usize, usize) {
        self.power.dim()
    }

    /// Power summed over users and subcarriers, per `(m, j)`.
    pub fn block_power(&self) -> Array2<f64> {
        let (nk, nm, nj, nn) = self.dims();
        let mut out = Array2::zeros((nm, nj));
        for k in 0..nk {
            for m in 0..nm {
                for j in 0..nj {
                    for n in 0..nn {
                        out[[m, j]] += self.power[[k, m, j, n]];
                    }
                }
            }
        }
        out
    }

    /// Checks non-negative power, power only on owned subcarriers and at most
    /// one owner per subcarrier. Returns the first violation found.
    pub fn check_structure(&self) -> std::result::Result<(), String> {
        let (nk, nm, nj, nn) = self.dims();
        for m in 0..nm {
            for j in 0..nj {
                for n in 0..nn {
                    let mut owners = 0;
                    for k in 0..nk {
                        let p = self.power[[k, m, j, n]];
                        if !(p >= 0.0 && p.is_finite()) {
                            return Err(format!("power {p} at ({k},{m},{j},{n})"));
                        }
                        if p > 0.0 && !self.assignment[[k, m, j, n]] {
                            return Err(format!("power without assignment at ({k},{m},{j},{n})"));
                        }
                        owners += self.assignment[[k, m, j, n]] as usize;
                    }
                    if owners > 1 {
                        return Err(format!("{owners} owners on ({m},{j},{n})"));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Lagrange multipliers and auxiliary variables of the dual iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct DualState {
    /// Power-cap multipliers, `(M, J)`.
    pub gamma: Array2<f64>,
    /// Data-volume multipliers, `(K)`.
    pub nu: Vec<f64>,
    /// Substitution variables `ω = ln u`, `(K, M, J, N)`.
    pub omega: Array4<f64>,
    pub iteration: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    /// Iteration cap `I_max`.
    pub max_iterations: usize,
    /// Base step for `γ`, relative to `1/(KM)` per unit of cap overshoot `(used − P_max)/P_max`.
    pub step_gamma_0: f64,
    /// Exponent of the `ν` step: each user's `ν_k` scales by
    /// `(C_k/delivered_k)^(step_nu_0 · i^(−step_decay))`, ratio clamped to [1/4, 4].
    pub step_nu_0: f64,
    /// Steps shrink as `i^(−step_decay)`.
    pub step_decay: f64,
    /// Relative power-tensor change counted as converged.
    pub convergence_tol: f64,
    /// Consecutive converged iterations required to stop.
    pub convergence_window: usize,
    /// Stop after this many iterations without a better recovered allocation.
    pub stall_window: usize,
    /// Recoveries spent on price-driven refinement before and after the dual loop.
    pub refine_rounds: usize,
    pub fixed_point_tol: f64,
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            max_iterations: 2000,
            step_gamma_0: 1.0,
            step_nu_0: 0.5,
            step_decay: 0.51,
            convergence_tol: 1e-4,
            convergence_window: 5,
            stall_window: 20,
            refine_rounds: 40,
            fixed_point_tol: rate::DEFAULT_FIXED_POINT_TOL,
            seed: 0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("step_gamma_0", self.step_gamma_0),
            ("step_nu_0", self.step_nu_0),
            ("step_decay", self.step_decay),
            ("convergence_tol", self.convergence_tol),
            ("fixed_point_tol", self.fixed_point_tol),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid("solver config", format!("{name} must be positive")));
            }
        }
        if self.step_decay > 1.0 {
            return Err(Error::invalid("solver config", "step_decay must lie in (0, 1]"));
        }
        if self.max_iterations == 0 || self.convergence_window == 0 || self.stall_window == 0 {
            return Err(Error::invalid("solver config", "iteration counts must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AllocationResult {
    pub allocation: AllocationTensor,
    /// `(1/KM) Σ P` in W.
    pub avg_power: f64,
    pub delivered_bits: Vec<f64>,
    pub demand_bits: Vec<f64>,
    pub feasible: bool,
    pub dual_state: DualState,
    pub iterations_used: usize,
    /// Objective of the dual iterate after each sweep.
    pub convergence_trace: Vec<f64>,
}

impl AllocationResult {
    /// `(user, missing bits)` for every user short of its demand.
    pub fn deficits(&self) -> Vec<(usize, f64)> {
        self.delivered_bits
            .iter()
            .zip(&self.demand_bits)
            .enumerate()
            .filter(|(_, (d, c))| **d < **c * (1.0 - DEMAND_SLACK))
            .map(|(k, (d, c))| (k, c - d))
            .collect()
    }
}

/// Relative data shortfall tolerated when declaring feasibility.
pub const DEMAND_SLACK: f64 = 1e-3;
/// Relative power-cap overshoot tolerated when declaring feasibility.
pub const CAP_SLACK: f64 = 1e-6;

// ---------------------------------------------------------------------------
// Per-link update rules
// ---------------------------------------------------------------------------

/// Water-filling power
/// `[ν B_s ΔT log2(e) / (γ + 1/(KM)) − e^ω σ²/β]⁺`; zero when `β = 0`.
#[allow(clippy::too_many_arguments)]
pub fn power_update(
    nu: f64,
    gamma: f64,
    omega: f64,
    beta: f64,
    noise: f64,
    subcarrier_bandwidth: f64,
    slot_length: f64,
    users: usize,
    slots: usize,
) -> f64 {
    if beta <= 0.0 || nu <= 0.0 {
        return 0.0;
    }
    let level = nu * subcarrier_bandwidth * slot_length * LOG2_E / (gamma + 1.0 / (users * slots) as f64);
    (level - omega.exp() * noise / beta).max(0.0)
}

/// Modified partial derivative `U = P̂/(KM) + γ P̂ − ν B_s ΔT g(P̂, ω)`.
#[allow(clippy::too_many_arguments)]
pub fn assignment_metric(
    power: f64,
    omega: f64,
    nu: f64,
    gamma: f64,
    beta: f64,
    noise: f64,
    subcarrier_bandwidth: f64,
    slot_length: f64,
    users: usize,
    slots: usize,
    antennas: usize,
) -> Result<f64> {
    let g = rate::g_metric(power, omega, beta, noise, antennas)?;
    Ok(power / (users * slots) as f64 + gamma * power - nu * subcarrier_bandwidth * slot_length * g)
}

/// Owner of one subcarrier: the smallest metric if it is strictly negative,
/// lowest index on ties, otherwise nobody.
pub fn assign_subcarriers(metrics: &[f64]) -> Option<usize> {
    let mut best = None;
    let mut best_value = 0.0;
    for (k, &u) in metrics.iter().enumerate() {
        if u < best_value {
            best = Some(k);
            best_value = u;
        }
    }
    best
}

/// `[γ − step (P_max − used)]⁺`.
pub fn update_gamma(gamma: f64, step: f64, max_power: f64, used_power: f64) -> f64 {
    (gamma - step * (max_power - used_power)).max(0.0)
}

/// `[ν − step (delivered − demand)]⁺`.
pub fn update_nu(nu: f64, step: f64, demand: f64, delivered: f64) -> f64 {
    (nu - step * (delivered - demand)).max(0.0)
}

/// `ω = ln u*(P̂)`, zero at zero power.
pub fn update_omega(power: f64, beta: f64, noise: f64, antennas: usize) -> Result<f64> {
    let fp = rate::solve_fixed_point(
        &LinkParams {
            power,
            gain: beta,
            noise,
            antennas,
            subcarrier_bandwidth: 1.0,
        },
        rate::DEFAULT_FIXED_POINT_TOL,
        rate::DEFAULT_FIXED_POINT_MAX_ITER,
    )?;
    Ok(fp.u_star.ln())
}

// ---------------------------------------------------------------------------
// Driver
// ---------------------------------------------------------------------------

/// Runs the iterative allocation on the predicted channel.
pub fn run_allocation(channel: &ChannelTensor, scenario: &Scenario, config: &SolverConfig) -> Result<AllocationResult> {
    config.validate()?;
    let problem = Problem::from_scenario(channel, scenario)?;
    Ok(dual::solve(&problem, config).into_result(&problem))
}

/// Runs the allocation on a prepared problem.
pub(crate) fn solve_problem(problem: &Problem, config: &SolverConfig) -> dual::Solution {
    dual::solve(problem, config)
}


/// The greedy starting assignment, every usable subcarrier taken.
pub(crate) fn fill_owner(problem: &Problem) -> Vec<u32> {
    greedy::greedy_assignment(problem, &dual::nominal_power(problem), true)
}

pub(crate) const IDLE: u32 = problem::NONE;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EvalMode {
    /// Deterministic-equivalent rates.
    Deterministic,
    /// Monte-Carlo ergodic rates with `samples` draws per active link.
    MonteCarlo { samples: usize, seed: u64 },
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    /// Constraint on per-(slot, BS) power.
    PowerCap { m: usize, j: usize, used: f64, max: f64 },
    /// Data volume short by more than the slack.
    Demand { k: usize, delivered: f64, demand: f64 },
    /// Structural problem (shared subcarrier, power without owner, bad value).
    Structure(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub avg_power: f64,
    pub delivered_bits: Vec<f64>,
    /// `(M, J)` power sums.
    pub block_power: Array2<f64>,
    pub violations: Vec<Violation>,
}

/// Objective, delivered data and constraint check of an allocation.
pub fn evaluate_allocation(
    allocation: &AllocationTensor,
    channel: &ChannelTensor,
    scenario: &Scenario,
    mode: EvalMode,
) -> Result<Evaluation> {
    let dims = scenario.dims();
    if allocation.dims() != dims || channel.dims() != dims {
        return Err(Error::DimensionMismatch(format!(
            "allocation {:?}, channel {:?}, scenario {:?}",
            allocation.dims(),
            channel.dims(),
            dims
        )));
    }
    let (nk, nm, nj, nn) = dims;
    let bits = scenario.carrier.subcarrier_bandwidth * scenario.grid.slot_length;
    let noise = scenario.noise.per_subcarrier_power;
    let mut rng = match mode {
        EvalMode::MonteCarlo { seed, .. } => Some(ChaCha8Rng::seed_from_u64(seed)),
        EvalMode::Deterministic => None,
    };
    let mut delivered = vec![0.0; nk];
    let mut total = 0.0;
    for k in 0..nk {
        for m in 0..nm {
            for j in 0..nj {
                let antennas = scenario.base_stations[j].antenna_count;
                for n in 0..nn {
                    let p = allocation.power[[k, m, j, n]];
                    total += p;
                    if p <= 0.0 || !allocation.assignment[[k, m, j, n]] {
                        continue;
                    }
                    let beta = channel.get(k, m, j, n);
                    let eff = match (mode, rng.as_mut()) {
                        (EvalMode::MonteCarlo { samples, .. }, Some(rng)) => {
                            let link = LinkParams {
                                power: p,
                                gain: beta,
                                noise,
                                antennas,
                                subcarrier_bandwidth: 1.0,
                            };
                            rate::monte_carlo_rate(&link, samples, rng)?.rate
                        }
                        _ => deterministic_efficiency(p * beta / noise, antennas),
                    };
                    delivered[k] += eff * bits;
                }
            }
        }
    }
    let block_power = allocation.block_power();
    let mut violations = Vec::new();
    if let Err(e) = allocation.check_structure() {
        violations.push(Violation::Structure(e));
    }
    for m in 0..nm {
        for j in 0..nj {
            let max = scenario.base_stations[j].max_power;
            let used = block_power[[m, j]];
            if used > max * (1.0 + CAP_SLACK) {
                violations.push(Violation::PowerCap { m, j, used, max });
            }
        }
    }
    for (k, user) in scenario.users.iter().enumerate() {
        if delivered[k] < user.demand * (1.0 - DEMAND_SLACK) {
            violations.push(Violation::Demand {
                k,
                delivered: delivered[k],
                demand: user.demand,
            });
        }
    }
    Ok(Evaluation {
        avg_power: total / (nk * nm) as f64,
        delivered_bits: delivered,
        block_power,
        violations,
    })
}
