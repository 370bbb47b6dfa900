use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use sechphase::device::DeviceParams;
use sechphase::protocol::{Branch, ProtocolFamily, Target};
use sechphase::{Error, ErrorKind, Result};
use sechphase_cli::commands::{cmd_derive, cmd_selfcheck, cmd_sq_xrot, cmd_sweep_angle, cmd_sweep_coupling};
use sechphase_cli::output::{write_sweep_csv, write_sweep_gnuplot, write_xrot_csv, write_xrot_gnuplot};
use sechphase_cli::{Grid, RunConfig, DEFAULT_MAX_GATE_TIME_NS, DEFAULT_REFINE_BUDGET};

#[derive(Parser)]
#[command(name = "sechphase", version, about = "Sech-pulse CPHASE design and verification for cavity-coupled transmons")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Resolve pulse parameters for a protocol family over an angle grid
    Derive(Common),
    /// Derive, simulate and refine over an angle grid
    SweepAngle(Common),
    /// Angle sweep repeated over a coupling grid
    SweepCoupling(Common),
    /// Square-pulse single-qubit X rotations
    SqXrot(Common),
    /// Analytic versus numeric oracle checks
    Selfcheck(Common),
}

#[derive(Args, Clone)]
struct Common {
    /// Device config file (key = value); built-in reference device if absent
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = "IQSS_2PI_RES")]
    family: String,
    /// start:stop:count, angles in units of π
    #[arg(long, default_value = "0.125:0.5:4")]
    theta_grid: String,
    /// Subspace holding the target transition (1 or 2); both if absent
    #[arg(long)]
    lambda: Option<u8>,
    #[arg(long, default_value = "plus")]
    branch: String,
    /// Bandwidth override for the off-resonant family
    #[arg(long)]
    sigma_mhz: Option<f64>,
    /// Off-resonant bandwidths as fractions of σ_max, start:stop:count
    #[arg(long)]
    sigma_fraction_grid: Option<String>,
    /// start:stop:count in MHz
    #[arg(long)]
    coupling_grid: Option<String>,
    /// Output file; stdout if absent
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write a gnuplot data block here
    #[arg(long)]
    gnuplot: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_MAX_GATE_TIME_NS)]
    max_gate_time_ns: f64,
    /// Refinement evaluations per point; 0 disables
    #[arg(long, default_value_t = DEFAULT_REFINE_BUDGET)]
    refine_budget: usize,
    /// Square pulses per X rotation
    #[arg(long, default_value_t = 4)]
    pulses: usize,
}

impl Common {
    fn resolve(&self) -> Result<RunConfig> {
        let device = match &self.config {
            Some(p) => DeviceParams::from_config_file(p)?,
            None => DeviceParams::default(),
        };
        let grid = |s: &Option<String>| s.as_deref().map(str::parse::<Grid>).transpose();
        Ok(RunConfig {
            device,
            family: self.family.parse::<ProtocolFamily>()?,
            theta_grid: self.theta_grid.parse()?,
            targets: self.lambda.map(Target::from_subspace).transpose()?.into_iter().collect(),
            branch: self.branch.parse::<Branch>()?,
            sigma_mhz: self.sigma_mhz,
            sigma_fraction_grid: grid(&self.sigma_fraction_grid)?,
            coupling_grid: grid(&self.coupling_grid)?,
            out: self.out.clone(),
            gnuplot: self.gnuplot.clone(),
            seed: self.seed,
            max_gate_time_ns: self.max_gate_time_ns,
            refine_budget: self.refine_budget,
            pulses: self.pulses,
        })
    }
}

fn sink(path: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Derive(c) => {
            let cfg = c.resolve()?;
            let rows = cmd_derive(&cfg)?;
            let mut w = sink(&cfg.out)?;
            for r in &rows {
                writeln!(w, "{}", r.line())?;
            }
            w.flush()?;
        }
        Command::SweepAngle(c) => {
            let cfg = c.resolve()?;
            let rows = cmd_sweep_angle(&cfg)?;
            write_sweep_csv(sink(&cfg.out)?, &rows, cfg.branch.name(), false)?;
            if let Some(p) = &cfg.gnuplot {
                write_sweep_gnuplot(BufWriter::new(File::create(p)?), &rows)?;
            }
        }
        Command::SweepCoupling(c) => {
            let cfg = c.resolve()?;
            let rows = cmd_sweep_coupling(&cfg)?;
            write_sweep_csv(sink(&cfg.out)?, &rows, cfg.branch.name(), true)?;
            if let Some(p) = &cfg.gnuplot {
                write_sweep_gnuplot(BufWriter::new(File::create(p)?), &rows)?;
            }
        }
        Command::SqXrot(c) => {
            let cfg = c.resolve()?;
            let rows = cmd_sq_xrot(&cfg)?;
            write_xrot_csv(sink(&cfg.out)?, &rows)?;
            if let Some(p) = &cfg.gnuplot {
                write_xrot_gnuplot(BufWriter::new(File::create(p)?), &rows)?;
            }
        }
        Command::Selfcheck(c) => {
            let cfg = c.resolve()?;
            let checks = cmd_selfcheck(&cfg.device)?;
            let mut w = sink(&cfg.out)?;
            let mut failed = 0;
            for ch in &checks {
                writeln!(w, "{} {}: {}", if ch.passed { "PASS" } else { "FAIL" }, ch.name, ch.detail)?;
                failed += usize::from(!ch.passed);
            }
            w.flush()?;
            if failed > 0 {
                return Err(Error::ToleranceNotMet(format!("{failed} self-check(s) failed")));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e.kind() {
                ErrorKind::Config => 2,
                ErrorKind::PhysicsDomain => 3,
                ErrorKind::Numerical => 4,
            })
        }
    }
}
