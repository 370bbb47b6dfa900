//! Complex gamma function and the terminating Gauss series at unit argument.

use num_complex::Complex64;
use std::f64::consts::PI;

use crate::error::{Error, Result};

const LANCZOS_G: f64 = 7.0;
const LANCZOS_P: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

fn near_pole(z: Complex64) -> bool {
    z.re <= 0.5 && z.im.abs() < 1e-12 && (z.re - z.re.round()).abs() < 1e-12
}

/// Natural log of Γ(z). The branch is not the principal one, only
/// `exp(ln_gamma(z))` is meaningful.
pub fn ln_gamma(z: Complex64) -> Result<Complex64> {
    if near_pole(z) {
        return Err(Error::Pole(z));
    }
    if z.re < 0.5 {
        // reflection: Γ(z)Γ(1-z) = π / sin(πz)
        let s = (z * PI).sin();
        return Ok(Complex64::new(PI.ln(), 0.0) - s.ln() - ln_gamma(Complex64::new(1.0, 0.0) - z)?);
    }
    let z = z - 1.0;
    let mut x = Complex64::new(LANCZOS_P[0], 0.0);
    for (i, p) in LANCZOS_P.iter().enumerate().skip(1) {
        x += *p / (z + i as f64);
    }
    let t = z + LANCZOS_G + 0.5;
    Ok(0.5 * (2.0 * PI).ln() + (z + 0.5) * t.ln() - t + x.ln())
}

pub fn gamma(z: Complex64) -> Result<Complex64> {
    Ok(ln_gamma(z)?.exp())
}

/// ₂F₁(−a, a; c; 1) from the finite series, which terminates after a+1 terms.
pub fn hyp2f1_unit(a: u32, c: Complex64) -> Result<Complex64> {
    let a = a as f64;
    let mut term = Complex64::new(1.0, 0.0);
    let mut sum = term;
    let mut k = 0.0;
    while k < a {
        let denom = (c + k) * (k + 1.0);
        if denom.norm() < 1e-300 || near_pole(c + k) {
            return Err(Error::Pole(c));
        }
        term *= (k - a) * (k + a) / denom;
        sum += term;
        k += 1.0;
    }
    Ok(sum)
}

/// Same quantity from Gauss summation, Γ(c)² / (Γ(c+a) Γ(c−a)).
pub fn hyp2f1_unit_gauss(a: u32, c: Complex64) -> Result<Complex64> {
    let a = a as f64;
    let l = 2.0 * ln_gamma(c)? - ln_gamma(c + a)? - ln_gamma(c - a)?;
    Ok(l.exp())
}
