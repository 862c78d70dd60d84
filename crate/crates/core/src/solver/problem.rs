use crate::channel::ChannelTensor;
use crate::scenario::Scenario;
use crate::{Error, Result};

/// Owner value for an idle subcarrier.
pub(crate) const NONE: u32 = u32::MAX;

/// Solver-side view of one allocation instance. Link data is stored
/// block-major: block `b = m·J + j`, then user `k`, then subcarrier `n`, so one
/// (slot, BS) block is contiguous.
#[derive(Debug, Clone)]
pub(crate) struct Problem {
    pub users: usize,
    pub slots: usize,
    pub bss: usize,
    pub subcarriers: usize,
    /// `B_s · ΔT`: bits per (bit/s/Hz) over one slot.
    pub bits_per_efficiency: f64,
    pub demand: Vec<f64>,
    /// Antenna count per BS.
    pub antennas: Vec<usize>,
    pub max_power: Vec<f64>,
    /// `β/σ²` per link, block-major.
    pub snr_per_watt: Vec<f64>,
    /// Objective normalization `K·M`.
    pub norm: f64,
}

impl Problem {
    pub fn from_scenario(channel: &ChannelTensor, scenario: &Scenario) -> Result<Self> {
        let dims = scenario.dims();
        if channel.dims() != dims {
            return Err(Error::DimensionMismatch(format!(
                "channel tensor {:?} vs scenario {:?}",
                channel.dims(),
                dims
            )));
        }
        let (nk, nm, nj, nn) = dims;
        let noise = scenario.noise.per_subcarrier_power;
        let mut snr_per_watt = vec![0.0; nk * nm * nj * nn];
        for m in 0..nm {
            for j in 0..nj {
                for k in 0..nk {
                    for n in 0..nn {
                        snr_per_watt[((m * nj + j) * nk + k) * nn + n] = channel.get(k, m, j, n) / noise;
                    }
                }
            }
        }
        Ok(Self {
            users: nk,
            slots: nm,
            bss: nj,
            subcarriers: nn,
            bits_per_efficiency: scenario.carrier.subcarrier_bandwidth * scenario.grid.slot_length,
            demand: scenario.users.iter().map(|u| u.demand).collect(),
            antennas: scenario.base_stations.iter().map(|b| b.antenna_count).collect(),
            max_power: scenario.base_stations.iter().map(|b| b.max_power).collect(),
            snr_per_watt,
            norm: (nk * nm) as f64,
        })
    }

    pub fn blocks(&self) -> usize {
        self.slots * self.bss
    }

    pub fn block_bs(&self, b: usize) -> usize {
        b % self.bss
    }

    /// Index of link `(k, b, n)` in the block-major arrays.
    #[inline]
    pub fn link(&self, b: usize, k: usize, n: usize) -> usize {
        (b * self.users + k) * self.subcarriers + n
    }

    /// Index of subcarrier `(b, n)`.
    #[inline]
    pub fn slot(&self, b: usize, n: usize) -> usize {
        b * self.subcarriers + n
    }

    pub fn resources(&self) -> usize {
        self.blocks() * self.subcarriers
    }
}
