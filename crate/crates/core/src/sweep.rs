//! Parameter sweeps over the slot count `M` or the subcarrier count `N`.
//!
//! A sweep is a grid of independent cells `(value, scheme, replication)`.
//! [`SweepSpec::cells`] lists them, [`run_cell`] evaluates one, and
//! [`rows_to_csv`] renders rows in sorted order, so callers may run cells in
//! any order or in parallel.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use crate::baselines::BaselineKind;
use crate::channel::build_channel_tensor;
use crate::generate::CoastalWorld;
use crate::output::fmt_value;
use crate::scenario::{load_scenario_file, Scenario};
use crate::solver::{run_allocation, SolverConfig};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Axis {
    Slots,
    Subcarriers,
}

impl Axis {
    pub fn name(self) -> &'static str {
        match self {
            Axis::Slots => "M",
            Axis::Subcarriers => "N",
        }
    }
}

impl FromStr for Axis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "M" | "m" | "slots" => Ok(Axis::Slots),
            "N" | "n" | "subcarriers" => Ok(Axis::Subcarriers),
            _ => Err(Error::Parse(format!("unknown sweep axis `{s}` (expected M or N)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Scheme {
    Proposed,
    Baseline(BaselineKind),
}

impl Scheme {
    pub fn name(self) -> &'static str {
        match self {
            Scheme::Proposed => "proposed",
            Scheme::Baseline(b) => b.name(),
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "proposed" => Ok(Scheme::Proposed),
            "myopic" => Ok(Scheme::Baseline(BaselineKind::MyopicFullCsit)),
            "equal_power" => Ok(Scheme::Baseline(BaselineKind::EqualPower)),
            _ => Err(Error::Parse(format!(
                "unknown scheme `{s}` (expected proposed, myopic or equal_power)"
            ))),
        }
    }
}

/// Where each replication's base scenario comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum Base {
    /// One scenario file shared by all replications.
    File(PathBuf),
    /// A generated world; replication `r` uses seed `seed + r`.
    Generated { world: CoastalWorld, seed: u64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub axis: Axis,
    pub values: Vec<usize>,
    pub schemes: Vec<Scheme>,
    pub replications: usize,
    pub base: Base,
    pub config: SolverConfig,
    /// Seed of the myopic scheme's fading draws; replication `r` uses `seed + r`.
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Cell {
    pub replication: usize,
    pub value: usize,
    pub scheme: Scheme,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub axis: Axis,
    pub cell: Cell,
    pub avg_power: f64,
    pub feasible: bool,
    pub iterations: usize,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.values.is_empty() {
            return Err(Error::invalid("sweep", "needs at least one value"));
        }
        if self.values.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("sweep", "values must be strictly increasing"));
        }
        if self.values[0] == 0 {
            return Err(Error::invalid("sweep", "values must be positive"));
        }
        if self.schemes.is_empty() {
            return Err(Error::invalid("sweep", "needs at least one scheme"));
        }
        if self.replications == 0 {
            return Err(Error::invalid("sweep", "replications must be at least 1"));
        }
        self.config.validate()
    }

    /// All cells in output order.
    pub fn cells(&self) -> Vec<Cell> {
        let mut cells = Vec::new();
        for replication in 0..self.replications {
            for &value in &self.values {
                for &scheme in &self.schemes {
                    cells.push(Cell {
                        value,
                        scheme,
                        replication,
                    });
                }
            }
        }
        cells.sort();
        cells
    }

    /// Base scenario of one replication.
    pub fn base_scenario(&self, replication: usize) -> Result<Scenario> {
        match &self.base {
            Base::File(path) => load_scenario_file(path),
            Base::Generated { world, seed } => world.generate(seed.wrapping_add(replication as u64)),
        }
    }

    /// The scenario of one cell: the replication's base, resized along the axis.
    pub fn scenario_for(&self, base: &Scenario, value: usize) -> Result<Scenario> {
        match self.axis {
            Axis::Slots => base.with_slot_count(value),
            Axis::Subcarriers => base.with_subcarrier_count(value),
        }
    }
}

/// Evaluates one cell on a prepared base scenario. Failures become
/// infeasible rows with NaN power.
pub fn run_cell(spec: &SweepSpec, base: &Scenario, cell: Cell) -> SweepRow {
    let outcome = (|| {
        let scenario = spec.scenario_for(base, cell.value)?;
        let channel = build_channel_tensor(&scenario)?;
        match cell.scheme {
            Scheme::Proposed => run_allocation(&channel, &scenario, &spec.config),
            Scheme::Baseline(kind) => kind.run(
                &channel,
                &scenario,
                &spec.config,
                spec.seed.wrapping_add(cell.replication as u64),
            ),
        }
    })();
    match outcome {
        Ok(r) => SweepRow {
            axis: spec.axis,
            cell,
            avg_power: r.avg_power,
            feasible: r.feasible,
            iterations: r.iterations_used,
        },
        Err(_) => SweepRow {
            axis: spec.axis,
            cell,
            avg_power: f64::NAN,
            feasible: false,
            iterations: 0,
        },
    }
}

/// Runs every cell in order on the current thread.
pub fn run_sweep(spec: &SweepSpec) -> Result<Vec<SweepRow>> {
    spec.validate()?;
    let mut rows = Vec::new();
    for replication in 0..spec.replications {
        let base = spec.base_scenario(replication)?;
        for cell in spec.cells().into_iter().filter(|c| c.replication == replication) {
            rows.push(run_cell(spec, &base, cell));
        }
    }
    Ok(rows)
}

pub const CSV_HEADER: &str = "axis,value,scheme,replication,avg_power_w,feasible,iterations";

/// Renders rows sorted by `(replication, value, scheme)`.
pub fn rows_to_csv(rows: &[SweepRow]) -> String {
    let mut sorted: Vec<&SweepRow> = rows.iter().collect();
    sorted.sort_by_key(|r| r.cell);
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in sorted {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.axis.name(),
            r.cell.value,
            r.cell.scheme,
            r.cell.replication,
            fmt_value(r.avg_power),
            r.feasible,
            r.iterations
        ));
    }
    out
}
