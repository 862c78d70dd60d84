use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use lanealloc::channel::build_channel_tensor;
use lanealloc::generate::CoastalWorld;
use lanealloc::output::{write_allocation_csv, Summary};
use lanealloc::scenario::{emit_scenario, load_scenario_file, Scenario};
use lanealloc::solver::{run_allocation, SolverConfig};
use lanealloc::sweep::{rows_to_csv, run_cell, Axis, Base, Scheme, SweepSpec};
use lanealloc::verify::Suite;

const EXIT_ERROR: u8 = 1;
const EXIT_INFEASIBLE: u8 = 2;

/// Long-term OFDMA resource allocation for ships on known lanes.
#[derive(Parser)]
#[command(name = "lanealloc", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// Seed for generated worlds and fading draws.
    #[arg(long, global = true, default_value_t = 1)]
    seed: u64,

    /// Output file (stdout when omitted).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Worker threads for sweeps.
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,

    /// Iteration cap of the dual loop.
    #[arg(long, global = true)]
    max_iter: Option<usize>,

    /// Relative power-change convergence threshold.
    #[arg(long, global = true)]
    tol: Option<f64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    /// Three BSs on a coastline, 90 ships within 50 km, M=250, N=15.
    Paper,
}

#[derive(Args)]
struct Source {
    /// Scenario file (TOML).
    #[arg(long, conflicts_with = "generate")]
    scenario: Option<PathBuf>,

    /// Synthesize a world instead of reading one.
    #[arg(long, value_enum)]
    generate: Option<Preset>,
}

#[derive(Subcommand)]
enum Command {
    /// Run one allocation and write its summary.
    Simulate {
        #[command(flatten)]
        source: Source,

        #[arg(long, default_value = "proposed")]
        scheme: String,

        /// Also write the allocation as CSV.
        #[arg(long)]
        allocation_csv: Option<PathBuf>,

        /// Also write the large-scale gain tensor (binary, little-endian).
        #[arg(long)]
        channel_dump: Option<PathBuf>,
    },
    /// Sweep M or N over several schemes and replications.
    Sweep {
        #[command(flatten)]
        source: Source,

        /// M (slots) or N (subcarriers).
        #[arg(long)]
        axis: String,

        /// Comma-separated, strictly increasing.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<usize>,

        /// Comma-separated: proposed, myopic, equal_power.
        #[arg(long, value_delimiter = ',', default_value = "proposed")]
        schemes: Vec<String>,

        #[arg(long, default_value_t = 1)]
        replications: usize,
    },
    /// Run a verification suite against its oracles.
    Verify {
        /// rate, fixedpoint, theorem1 or smallcase.
        suite: String,
    },
    /// Write a synthesized scenario file.
    Generate {
        #[arg(long, value_enum, default_value = "paper")]
        preset: Preset,

        #[arg(long)]
        users: Option<usize>,

        #[arg(long)]
        slots: Option<usize>,

        #[arg(long)]
        subcarriers: Option<usize>,
    },
}

fn main() -> ExitCode {
    // usage errors share exit code 1 with every other error; 2 means infeasible
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_ERROR } else { 0 });
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_ERROR)
        }
    }
}

fn run(cli: Cli) -> Result<u8> {
    let common = cli.common;
    let config = solver_config(&common)?;
    match cli.command {
        Command::Simulate {
            source,
            scheme,
            allocation_csv,
            channel_dump,
        } => simulate(&common, config, &source, &scheme, allocation_csv, channel_dump),
        Command::Sweep {
            source,
            axis,
            values,
            schemes,
            replications,
        } => {
            let base = match (&source.scenario, source.generate) {
                (Some(path), _) => Base::File(path.clone()),
                (None, Some(Preset::Paper)) => Base::Generated {
                    world: CoastalWorld::default(),
                    seed: common.seed,
                },
                (None, None) => bail!("either --scenario or --generate is required"),
            };
            let spec = SweepSpec {
                axis: axis.parse::<Axis>()?,
                values,
                schemes: schemes.iter().map(|s| s.parse::<Scheme>()).collect::<Result<_, _>>()?,
                replications,
                base,
                config,
                seed: common.seed,
            };
            sweep(&common, &spec)
        }
        Command::Verify { suite } => {
            let suite: Suite = suite.parse()?;
            let report = suite.run(common.seed)?;
            emit(&common.out, report.to_csv().as_bytes())?;
            Ok(if report.passed() { 0 } else { EXIT_ERROR })
        }
        Command::Generate {
            preset: Preset::Paper,
            users,
            slots,
            subcarriers,
        } => {
            let defaults = CoastalWorld::default();
            let world = CoastalWorld {
                user_count: users.unwrap_or(defaults.user_count),
                slot_count: slots.unwrap_or(defaults.slot_count),
                subcarrier_count: subcarriers.unwrap_or(defaults.subcarrier_count),
                ..defaults
            };
            let scenario = world.generate(common.seed)?;
            emit(&common.out, emit_scenario(&scenario).as_bytes())?;
            Ok(0)
        }
    }
}

fn solver_config(common: &Common) -> Result<SolverConfig> {
    let mut config = SolverConfig {
        seed: common.seed,
        ..SolverConfig::default()
    };
    if let Some(m) = common.max_iter {
        config.max_iterations = m;
    }
    if let Some(t) = common.tol {
        config.convergence_tol = t;
    }
    config.validate()?;
    Ok(config)
}

fn load(source: &Source, seed: u64) -> Result<Scenario> {
    match (&source.scenario, source.generate) {
        (Some(path), _) => load_scenario_file(path).with_context(|| format!("reading {}", path.display())),
        (None, Some(Preset::Paper)) => Ok(CoastalWorld::default().generate(seed)?),
        (None, None) => bail!("either --scenario or --generate is required"),
    }
}

fn emit(out: &Option<PathBuf>, bytes: &[u8]) -> Result<()> {
    match out {
        Some(path) => fs::write(path, bytes).with_context(|| format!("writing {}", path.display())),
        None => {
            io::stdout().write_all(bytes)?;
            Ok(())
        }
    }
}

fn create(path: &Path) -> Result<io::BufWriter<fs::File>> {
    let f = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(io::BufWriter::new(f))
}

fn simulate(
    common: &Common,
    config: SolverConfig,
    source: &Source,
    scheme: &str,
    allocation_csv: Option<PathBuf>,
    channel_dump: Option<PathBuf>,
) -> Result<u8> {
    let scheme: Scheme = scheme.parse()?;
    let scenario = load(source, common.seed)?;
    let channel = build_channel_tensor(&scenario)?;
    if let Some(path) = channel_dump {
        let mut w = create(&path)?;
        channel.write_to(&mut w)?;
        w.flush()?;
    }
    let result = match scheme {
        Scheme::Proposed => run_allocation(&channel, &scenario, &config)?,
        Scheme::Baseline(kind) => kind.run(&channel, &scenario, &config, common.seed)?,
    };
    if let Some(path) = allocation_csv {
        let mut w = create(&path)?;
        write_allocation_csv(&result.allocation, &mut w)?;
        w.flush()?;
    }
    let summary = Summary::new(scheme.name(), &result);
    emit(&common.out, summary.to_toml()?.as_bytes())?;
    if result.feasible {
        return Ok(0);
    }
    let mut err = io::stderr().lock();
    writeln!(err, "infeasible: {} user(s) short of demand", summary.deficits.len())?;
    writeln!(err, "{:>6} {:>16} {:>16}", "user", "demand_bits", "missing_bits")?;
    for d in &summary.deficits {
        writeln!(
            err,
            "{:>6} {:>16.6e} {:>16.6e}",
            d.user, summary.per_user_demand_bits[d.user], d.missing_bits
        )?;
    }
    Ok(EXIT_INFEASIBLE)
}

fn sweep(common: &Common, spec: &SweepSpec) -> Result<u8> {
    spec.validate()?;
    let bases = (0..spec.replications)
        .map(|r| spec.base_scenario(r))
        .collect::<Result<Vec<_>, _>>()?;
    let cells = spec.cells();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(common.jobs.max(1))
        .build()
        .context("starting worker pool")?;
    let rows: Vec<_> = pool.install(|| {
        cells
            .par_iter()
            .map(|&cell| run_cell(spec, &bases[cell.replication], cell))
            .collect()
    });
    emit(&common.out, rows_to_csv(&rows).as_bytes())?;
    Ok(0)
}
