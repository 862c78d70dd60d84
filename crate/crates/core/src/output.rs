//! CSV and TOML writers for allocation results.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::solver::{AllocationResult, AllocationTensor};
use crate::{Error, Result};

/// Nine significant digits, fixed exponent form.
pub fn fmt_value(v: f64) -> String {
    format!("{v:.8e}")
}

/// `k,m,j,n,power_w,assigned` for every entry with an owner or nonzero power,
/// in row-major `(k, m, j, n)` order.
pub fn write_allocation_csv(allocation: &AllocationTensor, mut w: impl Write) -> Result<()> {
    writeln!(w, "k,m,j,n,power_w,assigned")?;
    for ((k, m, j, n), &p) in allocation.power.indexed_iter() {
        let assigned = allocation.assignment[[k, m, j, n]];
        if p != 0.0 || assigned {
            writeln!(w, "{k},{m},{j},{n},{},{}", fmt_value(p), u8::from(assigned))?;
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub scheme: String,
    pub avg_power_w: f64,
    pub feasible: bool,
    pub iterations_used: usize,
    pub per_user_delivered_bits: Vec<f64>,
    pub per_user_demand_bits: Vec<f64>,
    /// Users short of demand, with the missing bits.
    pub deficits: Vec<Deficit>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Deficit {
    pub user: usize,
    pub missing_bits: f64,
}

impl Summary {
    pub fn new(scheme: &str, result: &AllocationResult) -> Self {
        Self {
            scheme: scheme.to_owned(),
            avg_power_w: result.avg_power,
            feasible: result.feasible,
            iterations_used: result.iterations_used,
            per_user_delivered_bits: result.delivered_bits.clone(),
            per_user_demand_bits: result.demand_bits.clone(),
            deficits: result
                .deficits()
                .into_iter()
                .map(|(user, missing_bits)| Deficit { user, missing_bits })
                .collect(),
        }
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::invalid("summary", e.to_string()))
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nine_significant_digits() {
        assert_eq!(fmt_value(1.0), "1.00000000e0");
        assert_eq!(fmt_value(0.0123456789123), "1.23456789e-2");
    }

    #[test]
    fn csv_lists_active_entries() {
        let mut a = AllocationTensor::zeros((2, 1, 1, 2));
        a.power[[1, 0, 0, 1]] = 0.5;
        a.assignment[[1, 0, 0, 1]] = true;
        let mut out = Vec::new();
        write_allocation_csv(&a, &mut out).unwrap();
        assert_eq!(
            String::from_utf8(out).unwrap(),
            "k,m,j,n,power_w,assigned\n1,0,0,1,5.00000000e-1,1\n"
        );
    }
}
