//! Large-scale two-ray gains and small-scale fading.

use std::f64::consts::PI;
use std::io::{Read, Write};

use ndarray::Array4;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::scenario::{CarrierPlan, Scenario};
use crate::{Error, Result};

/// Speed of light in m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Wavelength of 0-based subcarrier `n`, whose center sits
/// `(n - (N-1)/2) * B_s` away from the carrier.
pub fn subcarrier_wavelength(plan: &CarrierPlan, n: usize) -> Result<f64> {
    let count = plan.subcarrier_count;
    if n >= count {
        return Err(Error::OutOfRange {
            what: "subcarrier index",
            detail: format!("{n} for {count} subcarriers"),
        });
    }
    let offset = n as f64 - (count as f64 - 1.0) / 2.0;
    let freq = plan.carrier_frequency + offset * plan.subcarrier_bandwidth;
    Ok(SPEED_OF_LIGHT / freq)
}

/// Two-ray shore-to-ship power gain
/// `(λ/(4πd))² · [2 sin(2π H₁ H₂ / (λ d))]²`.
pub fn two_ray_gain(wavelength: f64, distance: f64, h_bs: f64, h_user: f64) -> Result<f64> {
    for (name, v) in [
        ("wavelength", wavelength),
        ("distance", distance),
        ("bs antenna height", h_bs),
        ("user antenna height", h_user),
    ] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::OutOfRange {
                what: "two-ray argument",
                detail: format!("{name} = {v}"),
            });
        }
    }
    let free = wavelength / (4.0 * PI * distance);
    // sin(π·q) with q = 2 H₁ H₂ / (λ d); integer q is an exact null
    let q = 2.0 * h_bs * h_user / (wavelength * distance);
    let interference = 2.0 * sin_pi(q);
    Ok((free * interference).powi(2))
}

/// `sin(πq)` that is exactly zero at integer `q`.
fn sin_pi(q: f64) -> f64 {
    let r = q - 2.0 * (q / 2.0).round();
    if r == 0.0 || r.abs() == 1.0 {
        return 0.0;
    }
    (PI * r).sin()
}

/// Large-scale gains indexed `(k, m, j, n)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelTensor {
    gains: Array4<f64>,
}

impl ChannelTensor {
    /// Wraps a gain array; every entry must be finite and non-negative.
    pub fn from_array(gains: Array4<f64>) -> Result<Self> {
        if let Some(bad) = gains.iter().find(|g| !(g.is_finite() && **g >= 0.0)) {
            return Err(Error::invalid("channel tensor", format!("entry {bad} is not a finite non-negative gain")));
        }
        Ok(Self { gains })
    }

    pub fn gains(&self) -> &Array4<f64> {
        &self.gains
    }

    /// `(K, M, J, N)`.
    pub fn dims(&self) -> (usize, usize, usize, usize) {
        self.gains.dim()
    }

    pub fn get(&self, k: usize, m: usize, j: usize, n: usize) -> f64 {
        self.gains[[k, m, j, n]]
    }

    /// Every gain multiplied by `factor` (> 0).
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::from_array(self.gains.mapv(|g| g * factor))
    }

    /// Keeps only the first `slots` slots.
    pub fn truncated(&self, slots: usize) -> Result<Self> {
        let (_, m, _, _) = self.dims();
        if slots == 0 || slots > m {
            return Err(Error::DimensionMismatch(format!("cannot keep {slots} of {m} slots")));
        }
        Ok(Self {
            gains: self.gains.slice(ndarray::s![.., ..slots, .., ..]).to_owned(),
        })
    }

    /// Binary dump: `K, M, J, N` as little-endian u64, then row-major
    /// little-endian f64 gains in `(k, m, j, n)` order.
    pub fn write_to(&self, mut w: impl Write) -> std::io::Result<()> {
        let (k, m, j, n) = self.dims();
        for d in [k, m, j, n] {
            w.write_all(&(d as u64).to_le_bytes())?;
        }
        for g in self.gains.iter() {
            w.write_all(&g.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_from(mut r: impl Read) -> Result<Self> {
        let mut word = [0u8; 8];
        let mut dims = [0usize; 4];
        for d in &mut dims {
            r.read_exact(&mut word)?;
            *d = u64::from_le_bytes(word) as usize;
        }
        let len = dims.iter().product::<usize>();
        let mut data = Vec::with_capacity(len);
        for _ in 0..len {
            r.read_exact(&mut word)?;
            data.push(f64::from_le_bytes(word));
        }
        let gains = Array4::from_shape_vec((dims[0], dims[1], dims[2], dims[3]), data)
            .map_err(|e| Error::DimensionMismatch(e.to_string()))?;
        Self::from_array(gains)
    }
}

/// Predicts the gain of every link from the lane geometry.
pub fn build_channel_tensor(scenario: &Scenario) -> Result<ChannelTensor> {
    let (nk, nm, nj, nn) = scenario.dims();
    let wavelengths = (0..nn)
        .map(|n| subcarrier_wavelength(&scenario.carrier, n))
        .collect::<Result<Vec<_>>>()?;
    let mut gains = Array4::zeros((nk, nm, nj, nn));
    for k in 0..nk {
        let h_user = scenario.users[k].antenna_height;
        for m in 0..nm {
            for j in 0..nj {
                let d = scenario.slot_distance(k, m, j)?;
                let h_bs = scenario.base_stations[j].antenna_height;
                for (n, &lambda) in wavelengths.iter().enumerate() {
                    gains[[k, m, j, n]] = two_ray_gain(lambda, d, h_bs, h_user)?;
                }
            }
        }
    }
    ChannelTensor::from_array(gains)
}

/// Squared norm of one `L`-antenna small-scale fading vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmallScaleSample {
    pub vector_gain: f64,
}

/// Draws `‖h‖²` for `h ~ CN(0, I_L)`: the sum of `L` unit-variance complex
/// Gaussian magnitudes, i.e. a Gamma(L, 1) variate.
pub fn sample_small_scale<R: Rng + ?Sized>(antennas: usize, rng: &mut R) -> SmallScaleSample {
    let mut acc = 0.0;
    for _ in 0..antennas {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        acc += 0.5 * (re * re + im * im);
    }
    SmallScaleSample { vector_gain: acc }
}
