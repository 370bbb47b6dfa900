//! Command implementations behind the `sechphase` binary.

use std::f64::consts::PI;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use sechphase::device::DeviceParams;
use sechphase::protocol::{Branch, ProtocolFamily, Target};
use sechphase::{Error, Result};

pub mod commands;
pub mod output;

/// Inclusive linear grid written `start:stop:count`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub start: f64,
    pub stop: f64,
    pub count: usize,
}

impl Grid {
    pub fn single(x: f64) -> Self {
        Grid { start: x, stop: x, count: 1 }
    }

    pub fn values(&self) -> Vec<f64> {
        match self.count {
            0 => Vec::new(),
            1 => vec![self.start],
            n => (0..n).map(|k| self.start + (self.stop - self.start) * k as f64 / (n - 1) as f64).collect(),
        }
    }
}

impl FromStr for Grid {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("grid must look like start:stop:count, got '{s}'"));
        let parts: Vec<&str> = s.split(':').collect();
        match parts.as_slice() {
            [x] => Ok(Grid::single(x.trim().parse().map_err(|_| bad())?)),
            [a, b, n] => {
                let g = Grid {
                    start: a.trim().parse().map_err(|_| bad())?,
                    stop: b.trim().parse().map_err(|_| bad())?,
                    count: n.trim().parse().map_err(|_| bad())?,
                };
                if !g.start.is_finite() || !g.stop.is_finite() {
                    return Err(bad());
                }
                Ok(g)
            }
            _ => Err(bad()),
        }
    }
}

impl fmt::Display for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.start, self.stop, self.count)
    }
}

pub const DEFAULT_MAX_GATE_TIME_NS: f64 = 200.0;
pub const DEFAULT_REFINE_BUDGET: usize = 80;
pub const COUPLING_RANGE_MHZ: (f64, f64) = (30.0, 180.0);

/// Everything a command needs, already parsed.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub device: DeviceParams,
    pub family: ProtocolFamily,
    /// angles in units of π
    pub theta_grid: Grid,
    /// empty means both blocks
    pub targets: Vec<Target>,
    pub branch: Branch,
    pub sigma_mhz: Option<f64>,
    /// bandwidths as fractions of σ_max, off-resonant family only
    pub sigma_fraction_grid: Option<Grid>,
    pub coupling_grid: Option<Grid>,
    pub out: Option<PathBuf>,
    pub gnuplot: Option<PathBuf>,
    pub seed: u64,
    pub max_gate_time_ns: f64,
    /// 0 disables refinement
    pub refine_budget: usize,
    pub pulses: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            device: DeviceParams::default(),
            family: ProtocolFamily::Iqss2PiRes,
            theta_grid: Grid { start: 0.125, stop: 0.5, count: 4 },
            targets: Vec::new(),
            branch: Branch::Plus,
            sigma_mhz: None,
            sigma_fraction_grid: None,
            coupling_grid: None,
            out: None,
            gnuplot: None,
            seed: 0,
            max_gate_time_ns: DEFAULT_MAX_GATE_TIME_NS,
            refine_budget: DEFAULT_REFINE_BUDGET,
            pulses: 4,
        }
    }
}

impl RunConfig {
    pub fn thetas(&self) -> Vec<f64> {
        self.theta_grid.values().into_iter().map(|x| x * PI).collect()
    }

    pub fn targets(&self) -> Vec<Target> {
        if self.targets.is_empty() {
            vec![Target::Block1, Target::Block2]
        } else {
            self.targets.clone()
        }
    }

    /// Angle grid must sit inside the family's domain.
    pub fn check_angles(&self) -> Result<()> {
        for th in self.thetas() {
            if !self.family.contains_angle(th) {
                return Err(Error::AngleOutOfDomain { theta: th, family: self.family.name().into() });
            }
        }
        Ok(())
    }

    pub fn couplings(&self) -> Result<Vec<f64>> {
        let g = self.coupling_grid.ok_or_else(|| Error::Config("--coupling-grid is required".into()))?;
        let v = g.values();
        if let Some(bad) = v.iter().find(|&&x| !(COUPLING_RANGE_MHZ.0..=COUPLING_RANGE_MHZ.1).contains(&x)) {
            return Err(Error::Config(format!(
                "coupling {bad} MHz outside [{}, {}] MHz",
                COUPLING_RANGE_MHZ.0, COUPLING_RANGE_MHZ.1
            )));
        }
        Ok(v)
    }
}
