//! Resolution of a requested CPHASE angle into sech-pulse parameters.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;

use crate::device::{TransitionPair, TransitionTable};
use crate::error::{Error, Result};
use crate::invariants::{cphase_target_invariants, invariants_distance, local_invariants, Gate};
use crate::sech::{self, gauss_2f1_unit, WINDOW_WIDTH};
use crate::units;

/// Splittings and bandwidths below 2π·10 kHz are rejected.
pub const MIN_SPLITTING: f64 = std::f64::consts::TAU * 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ProtocolFamily {
    Iqss2PiRes,
    Iqss4PiRes,
    Oqss2PiRes,
    Oqss4PiRes,
    Oqss2PiOffRes,
}

impl ProtocolFamily {
    pub const ALL: [ProtocolFamily; 5] = [
        ProtocolFamily::Iqss2PiRes,
        ProtocolFamily::Iqss4PiRes,
        ProtocolFamily::Oqss2PiRes,
        ProtocolFamily::Oqss4PiRes,
        ProtocolFamily::Oqss2PiOffRes,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ProtocolFamily::Iqss2PiRes => "IQSS_2PI_RES",
            ProtocolFamily::Iqss4PiRes => "IQSS_4PI_RES",
            ProtocolFamily::Oqss2PiRes => "OQSS_2PI_RES",
            ProtocolFamily::Oqss4PiRes => "OQSS_4PI_RES",
            ProtocolFamily::Oqss2PiOffRes => "OQSS_2PI_OFFRES",
        }
    }

    pub fn area_index(self) -> u32 {
        match self {
            ProtocolFamily::Iqss4PiRes | ProtocolFamily::Oqss4PiRes => 2,
            _ => 1,
        }
    }

    pub fn pair(self) -> TransitionPair {
        match self {
            ProtocolFamily::Iqss2PiRes | ProtocolFamily::Iqss4PiRes => TransitionPair::Inside,
            _ => TransitionPair::Outside,
        }
    }

    /// θ ∈ (0, π], or (0, π) for the 4π families.
    pub fn contains_angle(self, theta: f64) -> bool {
        if self.area_index() == 2 {
            theta > 0.0 && theta < PI
        } else {
            theta > 0.0 && theta <= PI
        }
    }
}

impl fmt::Display for ProtocolFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ProtocolFamily {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        ProtocolFamily::ALL
            .into_iter()
            .find(|f| f.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown protocol family '{s}'")))
    }
}

/// Which block carries the target transition (λ = +1 for block 1).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Target {
    Block1,
    Block2,
}

impl Target {
    pub fn index(self) -> usize {
        match self {
            Target::Block1 => 0,
            Target::Block2 => 1,
        }
    }

    pub fn harmful_index(self) -> usize {
        1 - self.index()
    }

    pub fn lambda(self) -> i32 {
        match self {
            Target::Block1 => 1,
            Target::Block2 => -1,
        }
    }

    /// 1 or 2, the spectator-subspace label used on the command line.
    pub fn subspace(self) -> u8 {
        self.index() as u8 + 1
    }

    pub fn from_subspace(k: u8) -> Result<Self> {
        match k {
            1 => Ok(Target::Block1),
            2 => Ok(Target::Block2),
            _ => Err(Error::Config(format!("target subspace must be 1 or 2, got {k}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Branch {
    Plus,
    Minus,
}

impl Branch {
    pub fn name(self) -> &'static str {
        match self {
            Branch::Plus => "plus",
            Branch::Minus => "minus",
        }
    }
}

impl FromStr for Branch {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "plus" | "+" => Ok(Branch::Plus),
            "minus" | "-" => Ok(Branch::Minus),
            _ => Err(Error::Config(format!("branch must be plus or minus, got '{s}'"))),
        }
    }
}

/// Open intervals of admissible σ/|δω|.
#[derive(Debug, Clone, PartialEq)]
pub struct BandwidthRange {
    pub intervals: Vec<(f64, f64)>,
}

impl BandwidthRange {
    fn open(lo: f64, hi: f64) -> Self {
        BandwidthRange { intervals: vec![(lo, hi)] }
    }

    pub fn contains(&self, ratio: f64) -> bool {
        self.intervals.iter().any(|&(lo, hi)| ratio > lo && ratio < hi)
    }

    /// Admissible range for a family. `theta` only matters for the
    /// off-resonant family, whose upper bound is σ_max(θ)/|δω_O|.
    pub fn for_family(family: ProtocolFamily, theta: f64) -> Self {
        let s7 = 7f64.sqrt();
        let s3 = 3f64.sqrt();
        match family {
            ProtocolFamily::Iqss2PiRes | ProtocolFamily::Oqss2PiRes => Self::open(0.0, f64::INFINITY),
            ProtocolFamily::Iqss4PiRes => BandwidthRange {
                intervals: vec![(0.0, 1.0 / (2.0 + s7)), (1.0 / (s7 - 2.0), f64::INFINITY)],
            },
            ProtocolFamily::Oqss4PiRes => BandwidthRange {
                intervals: vec![(0.0, 1.0 / s3), (1.0 / s3, f64::INFINITY)],
            },
            ProtocolFamily::Oqss2PiOffRes => Self::open(0.0, 0.5 / (theta / 4.0).tan()),
        }
    }
}

impl fmt::Display for BandwidthRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, (lo, hi)) in self.intervals.iter().enumerate() {
            if k > 0 {
                f.write_str(" U ")?;
            }
            if hi.is_infinite() {
                write!(f, "({lo:.6}, inf)")?;
            } else {
                write!(f, "({lo:.6}, {hi:.6})")?;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OffResonantAngles {
    pub theta1: f64,
    pub theta2: f64,
    pub delta_theta: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolSpec {
    pub family: ProtocolFamily,
    pub theta: f64,
    pub target: Target,
    pub branch: Branch,
    /// rad/ns
    pub bandwidth: f64,
    /// rad/ns
    pub drive_freq: f64,
    pub area_index: u32,
    /// |δω| of the driven pair, rad/ns
    pub splitting: f64,
    /// Δ_j = ω_p − ω_j for blocks 1 and 2
    pub detunings: [f64; 2],
    pub range: BandwidthRange,
    pub off_resonant: Option<OffResonantAngles>,
}

impl ProtocolSpec {
    pub fn gate_time(&self) -> f64 {
        WINDOW_WIDTH / self.bandwidth
    }

    pub fn sigma_mhz(&self) -> f64 {
        units::to_mhz(self.bandwidth)
    }

    pub fn pulse_freq_ghz(&self) -> f64 {
        units::to_ghz(self.drive_freq)
    }

    pub fn harmful_detuning(&self) -> f64 {
        self.detunings[self.target.harmful_index()]
    }

    pub fn record(&self) -> ProtocolRecord {
        ProtocolRecord {
            family: self.family,
            theta_rad: self.theta,
            target: self.target,
            branch: self.branch,
            sigma_mhz: self.sigma_mhz(),
            pulse_freq_ghz: self.pulse_freq_ghz(),
            area_index: self.area_index,
        }
    }
}

/// Plain-text form of a resolved protocol.
#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolRecord {
    pub family: ProtocolFamily,
    pub theta_rad: f64,
    pub target: Target,
    pub branch: Branch,
    pub sigma_mhz: f64,
    pub pulse_freq_ghz: f64,
    pub area_index: u32,
}

impl fmt::Display for ProtocolRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "family={} theta_rad={:?} lambda={} branch={} sigma_mhz={:?} pulse_freq_ghz={:?} area_index={}",
            self.family,
            self.theta_rad,
            self.target.subspace(),
            self.branch.name(),
            self.sigma_mhz,
            self.pulse_freq_ghz,
            self.area_index
        )
    }
}

impl FromStr for ProtocolRecord {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let mut family = None;
        let mut theta = None;
        let mut target = None;
        let mut branch = None;
        let mut sigma = None;
        let mut freq = None;
        let mut area = None;
        let num = |k: &str, v: &str| v.parse::<f64>().map_err(|_| Error::Config(format!("bad value for {k}: '{v}'")));
        for tok in s.split_whitespace() {
            let (k, v) = tok
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("malformed record field '{tok}'")))?;
            match k {
                "family" => family = Some(v.parse()?),
                "theta_rad" => theta = Some(num(k, v)?),
                "lambda" => {
                    let n = v.parse::<u8>().map_err(|_| Error::Config(format!("bad lambda '{v}'")))?;
                    target = Some(Target::from_subspace(n)?)
                }
                "branch" => branch = Some(v.parse()?),
                "sigma_mhz" => sigma = Some(num(k, v)?),
                "pulse_freq_ghz" => freq = Some(num(k, v)?),
                "area_index" => {
                    area = Some(v.parse::<u32>().map_err(|_| Error::Config(format!("bad area_index '{v}'")))?)
                }
                _ => return Err(Error::Config(format!("unknown record field '{k}'"))),
            }
        }
        let missing = |k: &str| Error::Config(format!("record is missing '{k}'"));
        Ok(ProtocolRecord {
            family: family.ok_or_else(|| missing("family"))?,
            theta_rad: theta.ok_or_else(|| missing("theta_rad"))?,
            target: target.ok_or_else(|| missing("lambda"))?,
            branch: branch.ok_or_else(|| missing("branch"))?,
            sigma_mhz: sigma.ok_or_else(|| missing("sigma_mhz"))?,
            pulse_freq_ghz: freq.ok_or_else(|| missing("pulse_freq_ghz"))?,
            area_index: area.ok_or_else(|| missing("area_index"))?,
        })
    }
}

fn check_angle(family: ProtocolFamily, theta: f64) -> Result<()> {
    if family.contains_angle(theta) {
        Ok(())
    } else {
        Err(Error::AngleOutOfDomain { theta, family: family.name().to_string() })
    }
}

fn check_splitting(tt: &TransitionTable, pair: TransitionPair) -> Result<f64> {
    let d = tt.splitting(pair).abs();
    if d < MIN_SPLITTING {
        let which = match pair {
            TransitionPair::Inside => "inside-subspace",
            TransitionPair::Outside => "outside-subspace",
        };
        return Err(Error::DegenerateSplitting { which, value_mhz: units::to_mhz(d) });
    }
    Ok(d)
}

fn check_bandwidth(sigma: f64, split: f64, range: &BandwidthRange) -> Result<()> {
    if sigma < MIN_SPLITTING {
        return Err(Error::DegenerateSplitting { which: "bandwidth", value_mhz: units::to_mhz(sigma) });
    }
    if !range.contains(sigma / split) {
        return Err(Error::BandwidthOutOfRange { sigma_mhz: units::to_mhz(sigma), allowed: range.to_string() });
    }
    Ok(())
}

fn resonant(
    family: ProtocolFamily,
    theta: f64,
    tt: &TransitionTable,
    target: Target,
    branch: Branch,
    sigma: f64,
    split: f64,
) -> Result<ProtocolSpec> {
    let range = BandwidthRange::for_family(family, theta);
    check_bandwidth(sigma, split, &range)?;
    let w = tt.frequencies(family.pair());
    let drive_freq = w[target.index()];
    Ok(ProtocolSpec {
        family,
        theta,
        target,
        branch,
        bandwidth: sigma,
        drive_freq,
        area_index: family.area_index(),
        splitting: split,
        detunings: [drive_freq - w[0], drive_freq - w[1]],
        range,
        off_resonant: None,
    })
}

/// σ = |δω|·t / (√(4 + 3t²) ± 2)
fn four_pi_ratio(t: f64, branch: Branch) -> f64 {
    let r = (4.0 + 3.0 * t * t).sqrt();
    match branch {
        Branch::Plus => t / (r + 2.0),
        Branch::Minus => t / (r - 2.0),
    }
}

/// Resonant 2π on the inside pair. `Plus` picks σ = |δω_I|cot(θ/4),
/// `Minus` the alternative σ = |δω_I|tan(θ/4).
pub fn design_iqss_2pi(theta: f64, tt: &TransitionTable, target: Target, branch: Branch) -> Result<ProtocolSpec> {
    let family = ProtocolFamily::Iqss2PiRes;
    check_angle(family, theta)?;
    let split = check_splitting(tt, family.pair())?;
    let q = (theta / 4.0).tan();
    let sigma = match branch {
        Branch::Plus => split / q,
        Branch::Minus => split * q,
    };
    resonant(family, theta, tt, target, branch, sigma, split)
}

pub fn design_iqss_4pi(theta: f64, tt: &TransitionTable, target: Target, branch: Branch) -> Result<ProtocolSpec> {
    let family = ProtocolFamily::Iqss4PiRes;
    check_angle(family, theta)?;
    let split = check_splitting(tt, family.pair())?;
    let sigma = split * four_pi_ratio((theta / 4.0).tan(), branch);
    resonant(family, theta, tt, target, branch, sigma, split)
}

pub fn design_oqss_2pi_res(theta: f64, tt: &TransitionTable, target: Target) -> Result<ProtocolSpec> {
    let family = ProtocolFamily::Oqss2PiRes;
    check_angle(family, theta)?;
    let split = check_splitting(tt, family.pair())?;
    let sigma = split / (theta / 2.0).tan();
    resonant(family, theta, tt, target, Branch::Plus, sigma, split)
}

pub fn design_oqss_4pi_res(theta: f64, tt: &TransitionTable, target: Target, branch: Branch) -> Result<ProtocolSpec> {
    let family = ProtocolFamily::Oqss4PiRes;
    check_angle(family, theta)?;
    let split = check_splitting(tt, family.pair())?;
    let sigma = split * four_pi_ratio((theta / 2.0).tan(), branch);
    resonant(family, theta, tt, target, branch, sigma, split)
}

/// σ_max = (|δω_O|/2) cot(θ/4)
pub fn offres_max_bandwidth(theta: f64, tt: &TransitionTable) -> f64 {
    0.5 * tt.delta_omega_o.abs() / (theta / 4.0).tan()
}

/// Off-resonant 2π on the outside pair for a requested bandwidth.
pub fn design_oqss_2pi_offres(theta: f64, tt: &TransitionTable, target: Target, sigma: f64) -> Result<ProtocolSpec> {
    let family = ProtocolFamily::Oqss2PiOffRes;
    check_angle(family, theta)?;
    let split = check_splitting(tt, family.pair())?;
    let range = BandwidthRange::for_family(family, theta);
    check_bandwidth(sigma, split, &range)?;

    let (s, c) = (theta / 2.0).sin_cos();
    let kappa = c - 2.0 * s * sigma / split;
    let root = (1.0 - kappa * kappa).max(0.0).sqrt();
    let w = tt.omega_o;
    let (wt, wh) = (w[target.index()], w[target.harmful_index()]);
    let toward_target = (wt - wh).signum();
    let drive_freq = 0.5 * (wt + wh) + toward_target * split / (2.0 * s) * root;
    let delta_theta = 2.0 * kappa.clamp(-1.0, 1.0).acos();
    Ok(ProtocolSpec {
        family,
        theta,
        target,
        branch: Branch::Plus,
        bandwidth: sigma,
        drive_freq,
        area_index: 1,
        splitting: split,
        detunings: [drive_freq - w[0], drive_freq - w[1]],
        range,
        off_resonant: Some(OffResonantAngles {
            theta1: 0.5 * (theta + delta_theta),
            theta2: 0.5 * (theta - delta_theta),
            delta_theta,
        }),
    })
}

/// Bandwidth used for the off-resonant family when none is requested.
pub const DEFAULT_OFFRES_FRACTION: f64 = 0.5;

/// Dispatches to the family's designer. `sigma` is required only by the
/// off-resonant family and defaults to half of σ_max there.
pub fn design(
    family: ProtocolFamily,
    theta: f64,
    tt: &TransitionTable,
    target: Target,
    branch: Branch,
    sigma: Option<f64>,
) -> Result<ProtocolSpec> {
    match family {
        ProtocolFamily::Iqss2PiRes => design_iqss_2pi(theta, tt, target, branch),
        ProtocolFamily::Iqss4PiRes => design_iqss_4pi(theta, tt, target, branch),
        ProtocolFamily::Oqss2PiRes => design_oqss_2pi_res(theta, tt, target),
        ProtocolFamily::Oqss4PiRes => design_oqss_4pi_res(theta, tt, target, branch),
        ProtocolFamily::Oqss2PiOffRes => {
            check_angle(family, theta)?;
            let s = sigma.unwrap_or_else(|| DEFAULT_OFFRES_FRACTION * offres_max_bandwidth(theta, tt));
            design_oqss_2pi_offres(theta, tt, target, s)
        }
    }
}

/// Outcome of [`verify_root_equation`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RootCheck {
    /// |lhs − rhs| of the family's defining equation
    pub residual: f64,
    /// distance between the implied diagonal propagator's invariants and
    /// those of CPHASE(θ)
    pub invariant_distance: f64,
}

fn block_factor(delta: f64, sigma: f64, a: u32) -> Result<Complex64> {
    gauss_2f1_unit(a, Complex64::new(0.5, -0.5 * delta / sigma))
}

/// |cos θ − cos(k(φ₁(Δ₁) − φ₁(Δ₂)))|, k = 2 for the inside pair and 1 for
/// the outside pair.
pub fn offresonant_angle_residual(pair: TransitionPair, theta: f64, detunings: [f64; 2], sigma: f64) -> Result<f64> {
    let p1 = sech::phase_phi(detunings[0], sigma, 1)?;
    let p2 = sech::phase_phi(detunings[1], sigma, 1)?;
    let k = match pair {
        TransitionPair::Inside => 2.0,
        TransitionPair::Outside => 1.0,
    };
    Ok((theta.cos() - (k * (p1 - p2)).cos()).abs())
}

/// Diagonal two-qubit propagator implied by the analytic two-level solution.
pub fn implied_propagator(spec: &ProtocolSpec) -> Result<Gate> {
    let a = spec.area_index;
    let f1 = block_factor(spec.detunings[0], spec.bandwidth, a)?;
    let f2 = block_factor(spec.detunings[1], spec.bandwidth, a)?;
    let one = Complex64::new(1.0, 0.0);
    let d = match spec.family.pair() {
        TransitionPair::Inside => [f1, f1.conj(), f2, f2.conj()],
        TransitionPair::Outside => [one, f1, one, f2],
    };
    let mut u = Gate::zeros();
    for k in 0..4 {
        u[(k, k)] = d[k];
    }
    Ok(u)
}

pub fn verify_root_equation(spec: &ProtocolSpec) -> Result<RootCheck> {
    let a = spec.area_index;
    let theta = spec.theta;
    let residual = match spec.family {
        ProtocolFamily::Iqss2PiRes | ProtocolFamily::Iqss4PiRes => {
            let al = block_factor(spec.harmful_detuning(), spec.bandwidth, a)?;
            let rhs = (al * al + al.conj() * al.conj()) / (2.0 * al.norm_sqr());
            (Complex64::new(theta.cos(), 0.0) - rhs).norm()
        }
        ProtocolFamily::Oqss2PiRes | ProtocolFamily::Oqss4PiRes => {
            let al = block_factor(spec.harmful_detuning(), spec.bandwidth, a)?;
            let sign = if a % 2 == 0 { 1.0 } else { -1.0 };
            let rhs = sign * (1.0 + al * al) / (2.0 * al);
            (Complex64::new(theta.cos(), 0.0) - rhs).norm()
        }
        ProtocolFamily::Oqss2PiOffRes => {
            offresonant_angle_residual(TransitionPair::Outside, theta, spec.detunings, spec.bandwidth)?
        }
    };
    let inv = local_invariants(&implied_propagator(spec)?)?;
    let invariant_distance = invariants_distance(&inv, &cphase_target_invariants(theta));
    Ok(RootCheck { residual, invariant_distance })
}
