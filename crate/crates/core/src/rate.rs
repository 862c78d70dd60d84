//! Per-link rates.
//!
//! Three views of the same quantity:
//! - the ergodic rate `E[B_s log2(1 + P β X / (L σ²))]` with `X ~ Gamma(L, 1)`,
//!   estimated by Monte Carlo ([`monte_carlo_rate`]);
//! - its deterministic equivalent ([`deterministic_rate`]), parameterized by the
//!   unique root `u* ≥ 1` of `u = 1 + Pβ [Lσ² + LPβ/u]⁻¹`;
//! - the surrogates `f(P, u)` and `g(P, ω) = f(P, e^ω)`, whose minimum over
//!   `u ≥ 1` (resp. `ω ≥ 0`) is attained at `u*` and equals the deterministic
//!   equivalent divided by `B_s`.
//!
//! Everything is evaluated in natural-log space and converted to bits at the end.

use std::f64::consts::{LN_2, LOG2_E};

use rand::Rng;

use crate::channel::sample_small_scale;
use crate::{Error, Result};

/// Damping factor of the fixed-point iteration.
pub const DAMPING: f64 = 0.5;
pub const DEFAULT_FIXED_POINT_TOL: f64 = 1e-10;
pub const DEFAULT_FIXED_POINT_MAX_ITER: usize = 10_000;

/// Inputs of one (user, slot, BS, subcarrier) link.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkParams {
    /// Transmit power in W.
    pub power: f64,
    /// Large-scale gain β.
    pub gain: f64,
    /// Noise power σ² over the subcarrier, in W.
    pub noise: f64,
    /// BS antenna count L.
    pub antennas: usize,
    /// Subcarrier bandwidth in Hz.
    pub subcarrier_bandwidth: f64,
}

impl LinkParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.power >= 0.0 && self.power.is_finite()) {
            return Err(Error::invalid("link", format!("power {} must be non-negative", self.power)));
        }
        if !(self.gain >= 0.0 && self.gain.is_finite()) {
            return Err(Error::invalid("link", format!("gain {} must be non-negative", self.gain)));
        }
        if !(self.noise > 0.0 && self.noise.is_finite()) {
            return Err(Error::invalid("link", format!("noise {} must be positive", self.noise)));
        }
        if self.antennas == 0 {
            return Err(Error::invalid("link", "antenna count must be at least 1"));
        }
        Ok(())
    }

    /// `Pβ/σ²`.
    pub fn snr(&self) -> f64 {
        self.power * self.gain / self.noise
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedPoint {
    pub u_star: f64,
    /// `u − rhs(u)` at the returned point.
    pub residual: f64,
    pub iterations: usize,
}

/// Right-hand side of the fixed-point equation, written with `x = Pβ/σ²`:
/// `1 + x / (L + L x / u)`.
pub fn fixed_point_rhs(u: f64, snr: f64, antennas: usize) -> f64 {
    let l = antennas as f64;
    1.0 + snr / (l + l * snr / u)
}

/// Damped iteration `u ← (1−α)u + α·rhs(u)` started at `u = 1`.
pub fn solve_fixed_point(link: &LinkParams, tol: f64, max_iter: usize) -> Result<FixedPoint> {
    solve_fixed_point_from(link, 1.0, tol, max_iter)
}

/// [`solve_fixed_point`] from an arbitrary start `u0 ≥ 1`.
pub fn solve_fixed_point_from(link: &LinkParams, u0: f64, tol: f64, max_iter: usize) -> Result<FixedPoint> {
    link.validate()?;
    if !(tol > 0.0) {
        return Err(Error::invalid("fixed point", "tolerance must be positive"));
    }
    if !(u0 >= 1.0 && u0.is_finite()) {
        return Err(Error::invalid("fixed point", "start point must be at least 1"));
    }
    let snr = link.snr();
    if snr == 0.0 {
        return Ok(FixedPoint {
            u_star: 1.0,
            residual: 0.0,
            iterations: 0,
        });
    }
    let mut u = u0;
    let mut residual = u - fixed_point_rhs(u, snr, link.antennas);
    for it in 0..max_iter {
        if residual.abs() <= tol {
            return Ok(FixedPoint {
                u_star: u,
                residual,
                iterations: it,
            });
        }
        u -= DAMPING * residual;
        residual = u - fixed_point_rhs(u, snr, link.antennas);
    }
    if residual.abs() <= tol {
        return Ok(FixedPoint {
            u_star: u,
            residual,
            iterations: max_iter,
        });
    }
    Err(Error::NonConvergence {
        iterations: max_iter,
        residual,
    })
}

/// Closed-form `u*`: the fixed-point equation is equivalent to
/// `L u² + (Lx − L − x) u − L x = 0`, whose positive root is taken in a
/// cancellation-free form.
pub fn fixed_point_root(snr: f64, antennas: usize) -> f64 {
    if snr <= 0.0 {
        return 1.0;
    }
    let l = antennas as f64;
    let b = l * snr - l - snr;
    let disc = (b * b + 4.0 * l * l * snr).sqrt();
    let u = if b < 0.0 {
        (disc - b) / (2.0 * l)
    } else {
        2.0 * snr / (b + disc) * l
    };
    u.max(1.0)
}

/// `f` in nats per second per Hz.
#[inline]
pub(crate) fn f_nats(snr: f64, u: f64, antennas: f64) -> f64 {
    let w = u - 1.0;
    (snr / u).ln_1p() + antennas * (w.ln_1p() - w / u)
}

/// Deterministic-equivalent spectral efficiency in bits/s/Hz, via the
/// closed-form root.
pub fn deterministic_efficiency(snr: f64, antennas: usize) -> f64 {
    if snr <= 0.0 {
        return 0.0;
    }
    let u = fixed_point_root(snr, antennas);
    f_nats(snr, u, antennas as f64) * LOG2_E
}

/// Deterministic-equivalent rate in bits/s, with `u*` from the damped
/// iteration. The iteration starts at the closed-form root: from `u = 1` it
/// contracts like `1 − 1/√x` at `L = 1` and would need far more than the
/// iteration budget at high SNR.
pub fn deterministic_rate(link: &LinkParams) -> Result<f64> {
    let snr = link.snr();
    let u0 = fixed_point_root(snr, link.antennas);
    let fp = solve_fixed_point_from(link, u0, DEFAULT_FIXED_POINT_TOL, DEFAULT_FIXED_POINT_MAX_ITER)?;
    if snr == 0.0 {
        return Ok(0.0);
    }
    Ok(link.subcarrier_bandwidth * f_nats(snr, fp.u_star, link.antennas as f64) / LN_2)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonteCarloRate {
    /// Sample mean in bits/s.
    pub rate: f64,
    /// Standard error of the mean in bits/s.
    pub std_error: f64,
}

/// Ergodic rate by sampling the small-scale fading. The beamforming gain
/// `X ~ Gamma(L, 1)` enters normalized by `L`, which is the channel whose
/// deterministic equivalent is [`deterministic_rate`].
pub fn monte_carlo_rate<R: Rng + ?Sized>(link: &LinkParams, samples: usize, rng: &mut R) -> Result<MonteCarloRate> {
    link.validate()?;
    if samples == 0 {
        return Err(Error::invalid("monte carlo", "needs at least one sample"));
    }
    let snr = link.snr();
    if snr == 0.0 {
        return Ok(MonteCarloRate {
            rate: 0.0,
            std_error: 0.0,
        });
    }
    let l = link.antennas as f64;
    // Welford accumulation in nats
    let mut mean = 0.0;
    let mut m2 = 0.0;
    for i in 0..samples {
        let x = sample_small_scale(link.antennas, rng).vector_gain / l;
        let v = (snr * x).ln_1p();
        let delta = v - mean;
        mean += delta / (i + 1) as f64;
        m2 += delta * (v - mean);
    }
    let var = if samples > 1 { m2 / (samples - 1) as f64 } else { 0.0 };
    let scale = link.subcarrier_bandwidth / LN_2;
    Ok(MonteCarloRate {
        rate: mean * scale,
        std_error: (var / samples as f64).sqrt() * scale,
    })
}

/// Auxiliary surrogate `f(P, u) = log2(1 + Pβ/(uσ²)) + L[log2 u − log2 e (1 − 1/u)]`
/// in bits/s/Hz, defined for `u ≥ 1`.
pub fn f_metric(power: f64, u: f64, gain: f64, noise: f64, antennas: usize) -> Result<f64> {
    if !(u >= 1.0) {
        return Err(Error::OutOfRange {
            what: "u",
            detail: format!("{u} < 1"),
        });
    }
    LinkParams {
        power,
        gain,
        noise,
        antennas,
        subcarrier_bandwidth: 1.0,
    }
    .validate()?;
    Ok(f_nats(power * gain / noise, u, antennas as f64) * LOG2_E)
}

/// Substituted surrogate
/// `g(P, ω) = log2(1 + Pβe^{−ω}/σ²) + L log2(e) (ω − 1 + e^{−ω})` in bits/s/Hz.
pub fn g_metric(power: f64, omega: f64, gain: f64, noise: f64, antennas: usize) -> Result<f64> {
    if !(omega >= 0.0) {
        return Err(Error::OutOfRange {
            what: "omega",
            detail: format!("{omega} < 0"),
        });
    }
    LinkParams {
        power,
        gain,
        noise,
        antennas,
        subcarrier_bandwidth: 1.0,
    }
    .validate()?;
    let snr = power * gain / noise;
    let nats = (snr * (-omega).exp()).ln_1p() + antennas as f64 * (omega + (-omega).exp_m1());
    Ok(nats * LOG2_E)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn link(snr: f64, antennas: usize) -> LinkParams {
        LinkParams {
            power: snr,
            gain: 1.0,
            noise: 1.0,
            antennas,
            subcarrier_bandwidth: 1.0,
        }
    }

    #[test]
    fn zero_power_short_circuits() {
        let fp = solve_fixed_point(&link(0.0, 16), 1e-10, 10).unwrap();
        assert_eq!(fp.u_star, 1.0);
        assert_eq!(deterministic_rate(&link(0.0, 16)).unwrap(), 0.0);
        assert_eq!(fixed_point_root(0.0, 4), 1.0);
    }

    #[test]
    fn single_antenna_quadratic_root() {
        // u² − u − 2 = 0
        let fp = solve_fixed_point(&link(2.0, 1), 1e-13, 10_000).unwrap();
        assert!((fp.u_star - 2.0).abs() < 1e-12);
        assert!(fp.residual.abs() <= 1e-13);
        assert_eq!(fixed_point_root(2.0, 1), 2.0);
    }

    #[test]
    fn large_arrays_pull_root_to_one() {
        let roots: Vec<f64> = [1, 4, 16, 64, 256]
            .iter()
            .map(|&l| solve_fixed_point(&link(10.0, l), 1e-12, 10_000).unwrap().u_star)
            .collect();
        assert!(roots.windows(2).all(|w| w[1] < w[0]), "{roots:?}");
        assert!(roots[4] - 1.0 < 0.05);
    }

    #[test]
    fn non_convergence_is_reported() {
        let err = solve_fixed_point(&link(1e3, 1), 1e-12, 3).unwrap_err();
        assert!(matches!(err, Error::NonConvergence { iterations: 3, .. }));
        assert!(solve_fixed_point(&link(1.0, 1), 0.0, 3).is_err());
    }

    #[test]
    fn rate_examples() {
        let r = deterministic_rate(&link(2.0, 1)).unwrap();
        let expected = 1.0 + (1.0 - LOG2_E / 2.0);
        assert!((r - expected).abs() < 1e-9, "{r}");
        assert!((r - 1.2787).abs() < 1e-4);
        assert!((deterministic_efficiency(2.0, 1) - expected).abs() < 1e-12);
    }

    #[test]
    fn monte_carlo_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let zero = monte_carlo_rate(&link(0.0, 4), 10, &mut rng).unwrap();
        assert_eq!(zero.rate, 0.0);
        let a = monte_carlo_rate(&link(2.0, 1), 1000, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let b = monte_carlo_rate(&link(2.0, 1), 1000, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        assert_eq!(a, b);
        assert!(a.std_error > 0.0);
        assert!(monte_carlo_rate(&link(1.0, 1), 0, &mut rng).is_err());
    }

    #[test]
    fn surrogate_examples() {
        let g0 = g_metric(3.0, 0.0, 1.0, 1.0, 8).unwrap();
        assert!((g0 - 4f64.log2()).abs() < 1e-15);
        assert_eq!(g_metric(0.0, 0.0, 1.0, 1.0, 8).unwrap(), 0.0);
        assert!(g_metric(1.0, -0.1, 1.0, 1.0, 8).is_err());
        let f1 = f_metric(3.0, 1.0, 1.0, 1.0, 8).unwrap();
        assert!((f1 - 4f64.log2()).abs() < 1e-15);
        assert!(f_metric(1.0, 0.99, 1.0, 1.0, 8).is_err());
        // g at ω = ln u* is the deterministic equivalent
        let l = link(7.0, 16);
        let u = solve_fixed_point(&l, 1e-13, 10_000).unwrap().u_star;
        let g = g_metric(7.0, u.ln(), 1.0, 1.0, 16).unwrap();
        assert!((g - deterministic_rate(&l).unwrap()).abs() < 1e-9);
    }
}
