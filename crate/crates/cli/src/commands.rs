use num_complex::Complex64;
use rayon::prelude::*;

use sechphase::device::{DeviceParams, TransitionTable};
use sechphase::invariants::{cphase, invariants_distance, local_invariants, Gate, LocalInvariants};
use sechphase::ode::Tolerances;
use sechphase::optimize::{design_x_rotation, refine_protocol, refined_schedule, RefineParams, XRotationOptions, MIN_REFINE_BUDGET};
use sechphase::propagator::Simulator;
use sechphase::protocol::{design, Branch, offres_max_bandwidth, verify_root_equation, ProtocolFamily, ProtocolSpec, Target};
use sechphase::sech::{integrate_two_level, phase_phi, phase_phi_printed, sech_final_propagator};
use sechphase::special::{hyp2f1_unit, hyp2f1_unit_gauss};
use sechphase::units::{mhz, to_ghz, to_mhz};
use sechphase::{Error, ErrorKind, Result};

use crate::RunConfig;

/// A resolved design with its verification numbers.
#[derive(Debug, Clone)]
pub struct DerivedProtocol {
    pub spec: ProtocolSpec,
    pub root_residual: f64,
    pub invariant_distance: f64,
}

impl DerivedProtocol {
    /// Record line followed by `#`-separated annotations.
    pub fn line(&self) -> String {
        format!(
            "{} # gate_time_ns={:.6} sigma_ratio={:.6} bandwidth_range={} root_residual={:.3e} invariant_distance={:.3e}",
            self.spec.record(),
            self.spec.gate_time(),
            self.spec.bandwidth / self.spec.splitting,
            self.spec.range.to_string().replace(' ', ""),
            self.root_residual,
            self.invariant_distance
        )
    }
}

fn bandwidths(cfg: &RunConfig, theta: f64, tt: &TransitionTable) -> Vec<Option<f64>> {
    if cfg.family == ProtocolFamily::Oqss2PiOffRes {
        if let Some(g) = cfg.sigma_fraction_grid {
            let smax = offres_max_bandwidth(theta, tt);
            return g.values().into_iter().map(|f| Some(f * smax)).collect();
        }
    }
    vec![cfg.sigma_mhz.map(mhz)]
}

pub fn cmd_derive(cfg: &RunConfig) -> Result<Vec<DerivedProtocol>> {
    cfg.check_angles()?;
    let sim = Simulator::from_params(&cfg.device)?;
    let tt = &sim.device.transitions;
    let mut out = Vec::new();
    for theta in cfg.thetas() {
        for target in cfg.targets() {
            for sigma in bandwidths(cfg, theta, tt) {
                let spec = design(cfg.family, theta, tt, target, cfg.branch, sigma)?;
                let check = verify_root_equation(&spec)?;
                out.push(DerivedProtocol { spec, root_residual: check.residual, invariant_distance: check.invariant_distance });
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scores {
    pub theta_realized: f64,
    pub fidelity: f64,
    pub fidelity_z_corrected: f64,
    pub purity: f64,
    pub leakage: f64,
    pub fidelity_z_initial: f64,
    pub refine_evaluations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub coupling_mhz: Option<f64>,
    pub theta_req: f64,
    pub family: ProtocolFamily,
    pub target: Target,
    pub sigma_mhz: Option<f64>,
    pub pulse_freq_ghz: Option<f64>,
    pub gate_time_ns: Option<f64>,
    pub outcome: std::result::Result<Scores, String>,
}

struct Point {
    coupling: Option<f64>,
    sim_index: usize,
    theta: f64,
    target: Target,
    sigma: Option<f64>,
}

fn run_point(cfg: &RunConfig, sim: &Simulator, p: &Point) -> SweepRow {
    let mut row = SweepRow {
        coupling_mhz: p.coupling,
        theta_req: p.theta,
        family: cfg.family,
        target: p.target,
        sigma_mhz: None,
        pulse_freq_ghz: None,
        gate_time_ns: None,
        outcome: Err(String::new()),
    };
    let spec = match design(cfg.family, p.theta, &sim.device.transitions, p.target, cfg.branch, p.sigma) {
        Ok(s) => s,
        Err(e) => {
            row.outcome = Err(e.to_string());
            return row;
        }
    };
    row.sigma_mhz = Some(spec.sigma_mhz());
    row.pulse_freq_ghz = Some(spec.pulse_freq_ghz());
    row.gate_time_ns = Some(spec.gate_time());
    if spec.gate_time() > cfg.max_gate_time_ns {
        row.outcome = Err(format!("skipped: gate time {:.1} ns exceeds cap {} ns", spec.gate_time(), cfg.max_gate_time_ns));
        return row;
    }
    match simulate_point(cfg, sim, &spec) {
        Ok((scores, refined)) => {
            row.sigma_mhz = Some(to_mhz(refined.bandwidth));
            row.pulse_freq_ghz = Some(to_ghz(refined.drive_freq));
            row.outcome = Ok(scores);
        }
        Err(e) => row.outcome = Err(e),
    }
    row
}

fn simulate_point(cfg: &RunConfig, sim: &Simulator, spec: &ProtocolSpec) -> std::result::Result<(Scores, RefineParams), String> {
    let initial = RefineParams { bandwidth: spec.bandwidth, drive_freq: spec.drive_freq, amplitude_scale: 1.0 };
    let (params, evaluations) = if cfg.refine_budget > 0 {
        let r = refine_protocol(spec, sim, cfg.refine_budget).map_err(|e| e.to_string())?;
        (r.refined, r.evaluations)
    } else {
        (initial, 0)
    };
    let first = sim.simulate_subspace(&refined_schedule(spec, sim, initial), spec.theta).map_err(|e| e.to_string())?;
    let last = if params == initial {
        first.clone()
    } else {
        sim.simulate_subspace(&refined_schedule(spec, sim, params), spec.theta).map_err(|e| e.to_string())?
    };
    Ok((
        Scores {
            theta_realized: last.theta_realized,
            fidelity: last.fidelity,
            fidelity_z_corrected: last.fidelity_z_corrected,
            purity: last.purity,
            leakage: last.leakage,
            fidelity_z_initial: first.fidelity_z_corrected,
            refine_evaluations: evaluations,
        },
        params,
    ))
}

fn check_refine_budget(cfg: &RunConfig) -> Result<()> {
    if cfg.refine_budget != 0 && cfg.refine_budget < MIN_REFINE_BUDGET {
        return Err(Error::Config(format!("refine budget must be 0 or at least {MIN_REFINE_BUDGET}")));
    }
    Ok(())
}

fn sweep(cfg: &RunConfig, sims: &[(Option<f64>, std::result::Result<Simulator, String>)]) -> Vec<SweepRow> {
    let mut points = Vec::new();
    for (k, (g, sim)) in sims.iter().enumerate() {
        for theta in cfg.thetas() {
            for target in cfg.targets() {
                let sigmas = match sim {
                    Ok(s) => bandwidths(cfg, theta, &s.device.transitions),
                    Err(_) => vec![None],
                };
                for sigma in sigmas {
                    points.push(Point { coupling: *g, sim_index: k, theta, target, sigma });
                }
            }
        }
    }
    points
        .par_iter()
        .map(|p| match &sims[p.sim_index].1 {
            Ok(sim) => run_point(cfg, sim, p),
            Err(e) => SweepRow {
                coupling_mhz: p.coupling,
                theta_req: p.theta,
                family: cfg.family,
                target: p.target,
                sigma_mhz: None,
                pulse_freq_ghz: None,
                gate_time_ns: None,
                outcome: Err(e.clone()),
            },
        })
        .collect()
}

/// derive → simulate → refine for every angle (and bandwidth, for the
/// off-resonant family). Failures land in the row, not the return value.
pub fn cmd_sweep_angle(cfg: &RunConfig) -> Result<Vec<SweepRow>> {
    cfg.check_angles()?;
    check_refine_budget(cfg)?;
    let sim = Simulator::from_params(&cfg.device)?;
    Ok(sweep(cfg, &[(None, Ok(sim))]))
}

/// The angle sweep repeated with both couplings set to each grid value.
pub fn cmd_sweep_coupling(cfg: &RunConfig) -> Result<Vec<SweepRow>> {
    cfg.check_angles()?;
    check_refine_budget(cfg)?;
    let sims: Vec<_> = cfg
        .couplings()?
        .into_iter()
        .map(|g| (Some(g), Simulator::from_params(&cfg.device.clone().with_coupling_mhz(g)).map_err(|e| e.to_string())))
        .collect();
    Ok(sweep(cfg, &sims))
}

#[derive(Debug, Clone, PartialEq)]
pub struct XRotRow {
    pub theta: f64,
    pub pulses: usize,
    pub outcome: std::result::Result<XRotScores, String>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct XRotScores {
    pub duration_ns: f64,
    pub protocol_fidelity: f64,
    pub simulation_fidelity: f64,
    pub purity: f64,
}

pub fn cmd_sq_xrot(cfg: &RunConfig) -> Result<Vec<XRotRow>> {
    let sim = Simulator::from_params(&cfg.device)?;
    let opts = XRotationOptions { pulses: cfg.pulses, seed: cfg.seed, ..Default::default() };
    let thetas = cfg.thetas();
    if let Some(&bad) = thetas.iter().find(|&&t| !(t > 0.0 && t <= std::f64::consts::PI)) {
        return Err(Error::AngleOutOfDomain { theta: bad, family: "square-pulse X rotation".into() });
    }
    Ok(thetas
        .into_iter()
        .map(|theta| XRotRow {
            theta,
            pulses: cfg.pulses,
            outcome: design_x_rotation(theta, &sim, &opts)
                .map(|d| XRotScores {
                    duration_ns: d.duration(),
                    protocol_fidelity: d.protocol_fidelity,
                    simulation_fidelity: d.simulation_fidelity,
                    purity: d.purity,
                })
                .map_err(|e| e.to_string()),
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

fn check(name: impl Into<String>, worst: f64, tol: f64) -> Check {
    Check { name: name.into(), passed: worst < tol, detail: format!("worst {worst:.3e} (tolerance {tol:.0e})") }
}

/// Analytic-versus-numeric oracle suite on the configured device.
pub fn cmd_selfcheck(device: &DeviceParams) -> Result<Vec<Check>> {
    let mut out = Vec::new();

    let mut worst: f64 = 0.0;
    for a in 1..=3u32 {
        for k in -20..=20 {
            let c = Complex64::new(0.5, 0.37 * k as f64);
            worst = worst.max((hyp2f1_unit(a, c)? - hyp2f1_unit_gauss(a, c)?).norm());
        }
    }
    out.push(check("hypergeometric series vs gamma form", worst, 1e-10));

    let sigma = 0.2;
    let tol = Tolerances { rtol: 1e-12, atol: 1e-14, max_step: f64::INFINITY };
    let mut worst: f64 = 0.0;
    for a in [1u32, 2] {
        for x in [0.0, 0.5, 1.0, 3.0, 10.0] {
            let want = sech_final_propagator(x * sigma, sigma, a)?;
            let got = integrate_two_level(x * sigma, sigma, a, 25.0 / sigma, tol)?;
            worst = worst.max((got - want).iter().fold(0.0f64, |m, z| m.max(z.norm())));
        }
    }
    out.push(check("two-level sech evolution vs closed form", worst, 1e-6));

    let mut worst: f64 = 0.0;
    for a in [1u32, 2] {
        for k in 1..=40 {
            let delta = 0.05 * k as f64 * sigma;
            if let Some(p) = phase_phi_printed(delta, sigma, a) {
                worst = worst.max((p - phase_phi(delta, sigma, a)?).abs());
            }
        }
    }
    out.push(check("phase formulas vs propagator argument", worst, 1e-10));

    let id = local_invariants(&Gate::identity())?;
    let cz = local_invariants(&cphase(std::f64::consts::PI))?;
    let worst = invariants_distance(&id, &LocalInvariants { g1: 1.0, g2: 0.0, g3: 3.0 })
        .max(invariants_distance(&cz, &LocalInvariants { g1: 0.0, g2: 0.0, g3: 1.0 }));
    out.push(check("identity and CZ invariants", worst, 1e-12));

    let sim = Simulator::from_params(device)?;
    let tt = &sim.device.transitions;
    for family in ProtocolFamily::ALL {
        let (mut res, mut inv): (f64, f64) = (0.0, 0.0);
        for k in 1..=16 {
            let theta = std::f64::consts::PI * k as f64 / 16.0;
            if !family.contains_angle(theta) {
                continue;
            }
            for target in [Target::Block1, Target::Block2] {
                for branch in [Branch::Plus, Branch::Minus] {
                    let spec = match design(family, theta, tt, target, branch, None) {
                        Ok(s) => s,
                        Err(e) if e.kind() == ErrorKind::PhysicsDomain => continue,
                        Err(e) => return Err(e),
                    };
                    let c = verify_root_equation(&spec)?;
                    res = res.max(c.residual);
                    inv = inv.max(c.invariant_distance);
                }
            }
        }
        out.push(check(format!("{family} root equation"), res, 1e-10));
        out.push(check(format!("{family} implied invariants"), inv, 1e-10));
    }
    Ok(out)
}
