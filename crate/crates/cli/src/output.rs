//! CSV and gnuplot writers. Column names and order are part of the
//! command-line contract.

use std::io::Write;

use sechphase::Result;

use crate::commands::{SweepRow, XRotRow};

pub const SWEEP_COLUMNS: [&str; 15] = [
    "theta_req",
    "theta_realized",
    "fidelity",
    "fidelity_z_corrected",
    "purity",
    "leakage",
    "gate_time_ns",
    "family",
    "lambda",
    "sigma_mhz",
    "pulse_freq_ghz",
    "branch",
    "fidelity_z_initial",
    "refine_evaluations",
    "error",
];

pub const XROT_COLUMNS: [&str; 7] =
    ["theta", "N", "duration_ns", "protocol_fidelity", "simulation_fidelity", "purity", "error"];

fn opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

fn io(e: csv::Error) -> sechphase::Error {
    sechphase::Error::Io(e.into())
}

/// Sweep rows; a leading `coupling_mhz` column when `with_coupling`.
pub fn write_sweep_csv<W: Write>(w: W, rows: &[SweepRow], branch: &str, with_coupling: bool) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let mut header: Vec<&str> = Vec::new();
    if with_coupling {
        header.push("coupling_mhz");
    }
    header.extend(SWEEP_COLUMNS);
    out.write_record(&header).map_err(io)?;
    for r in rows {
        let mut rec: Vec<String> = Vec::with_capacity(header.len());
        if with_coupling {
            rec.push(opt(r.coupling_mhz));
        }
        let s = r.outcome.as_ref().ok();
        rec.push(r.theta_req.to_string());
        rec.push(opt(s.map(|s| s.theta_realized)));
        rec.push(opt(s.map(|s| s.fidelity)));
        rec.push(opt(s.map(|s| s.fidelity_z_corrected)));
        rec.push(opt(s.map(|s| s.purity)));
        rec.push(opt(s.map(|s| s.leakage)));
        rec.push(opt(r.gate_time_ns));
        rec.push(r.family.name().to_string());
        rec.push(r.target.subspace().to_string());
        rec.push(opt(r.sigma_mhz));
        rec.push(opt(r.pulse_freq_ghz));
        rec.push(branch.to_string());
        rec.push(opt(s.map(|s| s.fidelity_z_initial)));
        rec.push(s.map(|s| s.refine_evaluations.to_string()).unwrap_or_default());
        rec.push(r.outcome.as_ref().err().cloned().unwrap_or_default());
        out.write_record(&rec).map_err(io)?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_xrot_csv<W: Write>(w: W, rows: &[XRotRow]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(XROT_COLUMNS).map_err(io)?;
    for r in rows {
        let s = r.outcome.as_ref().ok();
        out.write_record([
            r.theta.to_string(),
            r.pulses.to_string(),
            opt(s.map(|s| s.duration_ns)),
            opt(s.map(|s| s.protocol_fidelity)),
            opt(s.map(|s| s.simulation_fidelity)),
            opt(s.map(|s| s.purity)),
            r.outcome.as_ref().err().cloned().unwrap_or_default(),
        ])
        .map_err(io)?;
    }
    out.flush()?;
    Ok(())
}

/// Whitespace-separated blocks, one per (coupling, λ), separated by two
/// blank lines so gnuplot's `index` can pick them apart. Failed rows are
/// left out.
pub fn write_sweep_gnuplot<W: Write>(mut w: W, rows: &[SweepRow]) -> Result<()> {
    writeln!(w, "# theta_req fidelity_z_corrected fidelity purity gate_time_ns sigma_mhz")?;
    let mut key: Option<(Option<u64>, u8)> = None;
    for r in rows {
        let Ok(s) = &r.outcome else { continue };
        let k = (r.coupling_mhz.map(f64::to_bits), r.target.subspace());
        if key != Some(k) {
            if key.is_some() {
                writeln!(w, "\n")?;
            }
            match r.coupling_mhz {
                Some(g) => writeln!(w, "# coupling_mhz={g} lambda={}", k.1)?,
                None => writeln!(w, "# lambda={}", k.1)?,
            }
            key = Some(k);
        }
        writeln!(
            w,
            "{} {} {} {} {} {}",
            r.theta_req,
            s.fidelity_z_corrected,
            s.fidelity,
            s.purity,
            opt(r.gate_time_ns),
            opt(r.sigma_mhz)
        )?;
    }
    Ok(())
}

pub fn write_xrot_gnuplot<W: Write>(mut w: W, rows: &[XRotRow]) -> Result<()> {
    writeln!(w, "# theta protocol_fidelity simulation_fidelity purity duration_ns")?;
    for r in rows {
        if let Ok(s) = &r.outcome {
            writeln!(w, "{} {} {} {} {}", r.theta, s.protocol_fidelity, s.simulation_fidelity, s.purity, s.duration_ns)?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::commands::Scores;
    use sechphase::protocol::{ProtocolFamily, Target};

    fn row(ok: bool) -> SweepRow {
        SweepRow {
            coupling_mhz: Some(130.0),
            theta_req: 0.5,
            family: ProtocolFamily::Iqss2PiRes,
            target: Target::Block2,
            sigma_mhz: Some(7.8),
            pulse_freq_ghz: Some(6.75),
            gate_time_ns: Some(204.0),
            outcome: if ok {
                Ok(Scores {
                    theta_realized: -0.49,
                    fidelity: 0.5,
                    fidelity_z_corrected: 0.9999,
                    purity: 1.0,
                    leakage: 0.0,
                    fidelity_z_initial: 0.999,
                    refine_evaluations: 81,
                })
            } else {
                Err("skipped, too long".into())
            },
        }
    }

    #[test]
    fn sweep_csv_layout() {
        let mut buf = Vec::new();
        write_sweep_csv(&mut buf, &[row(true), row(false)], "plus", true).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], format!("coupling_mhz,{}", SWEEP_COLUMNS.join(",")));
        assert_eq!(lines[1], "130,0.5,-0.49,0.5,0.9999,1,0,204,IQSS_2PI_RES,2,7.8,6.75,plus,0.999,81,");
        assert_eq!(lines[2], "130,0.5,,,,,,204,IQSS_2PI_RES,2,7.8,6.75,plus,,,\"skipped, too long\"");
    }

    #[test]
    fn gnuplot_skips_failures() {
        let mut buf = Vec::new();
        write_sweep_gnuplot(&mut buf, &[row(true), row(false)]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().filter(|l| !l.starts_with('#') && !l.is_empty()).count(), 1);
    }
}
