//! Gate-fidelity scores on the 4-dim qubit subspace.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::invariants::Gate;

/// Largest off-diagonal magnitude accepted by [`extract_generalized_cphase`].
pub const DIAGONAL_TOL: f64 = 0.1;

/// Average gate fidelity [tr(MM†) + |tr M|²] / 20 with M = U₀†U. `actual`
/// may be non-unitary (leakage).
pub fn gate_fidelity(target: &Gate, actual: &Gate) -> f64 {
    let m = target.adjoint() * actual;
    let tmm = (m * m.adjoint()).trace().re;
    (tmm + m.trace().norm_sqr()) / 20.0
}

/// tr(U†U)/4
pub fn purity(u: &Gate) -> f64 {
    (u.adjoint() * u).trace().re / 4.0
}

pub fn wrap_angle(x: f64) -> f64 {
    let y = (x + PI).rem_euclid(2.0 * PI) - PI;
    if y <= -PI {
        y + 2.0 * PI
    } else {
        y
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CphaseExtraction {
    /// arg of the diagonal entries in |00>, |01>, |10>, |11> order
    pub phases: [f64; 4],
    /// φ00 − φ01 − φ10 + φ11 in (−π, π]
    pub theta: f64,
    /// Fidelity against CPHASE(theta) after the best local Z and global phase.
    pub corrected_fidelity: f64,
}

pub fn extract_generalized_cphase(u: &Gate) -> Result<CphaseExtraction> {
    let mut off = 0.0f64;
    for i in 0..4 {
        for j in 0..4 {
            if i != j {
                off = off.max(u[(i, j)].norm());
            }
        }
    }
    if !(off < DIAGONAL_TOL) {
        return Err(Error::NotDiagonal(off));
    }
    let phases = [0, 1, 2, 3].map(|k| u[(k, k)].arg());
    let theta = wrap_angle(phases[0] - phases[1] - phases[2] + phases[3]);
    // with the phases matched exactly |tr M| = Σ|U_kk|
    let s: f64 = (0..4).map(|k| u[(k, k)].norm()).sum();
    let corrected_fidelity = (purity(u) * 4.0 + s * s) / 20.0;
    Ok(CphaseExtraction { phases, theta, corrected_fidelity })
}

/// Fidelity against CPHASE(θ) maximized over Z rotations on each qubit and
/// a global phase. Only the diagonal of `u` enters |tr M|, so this reduces to
/// maximizing |a + b e^{−iβ}| + |c + d e^{−iβ}| over one angle β.
pub fn z_corrected_fidelity(u: &Gate, theta: f64) -> f64 {
    let a = u[(0, 0)];
    let b = u[(1, 1)];
    let c = u[(2, 2)];
    let d = u[(3, 3)] * Complex64::from_polar(1.0, -theta);
    let f = |beta: f64| {
        let e = Complex64::from_polar(1.0, -beta);
        (a + b * e).norm() + (c + d * e).norm()
    };
    const GRID: usize = 256;
    let step = 2.0 * PI / GRID as f64;
    let mut best = (f64::NEG_INFINITY, 0.0);
    for k in 0..GRID {
        let x = k as f64 * step;
        let v = f(x);
        if v > best.0 {
            best = (v, x);
        }
    }
    let (mut lo, mut hi) = (best.1 - step, best.1 + step);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while hi - lo > 1e-10 {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = f(x1);
        }
    }
    let tr = best.0.max(f1).max(f2);
    let tmm = (u * u.adjoint()).trace().re;
    (tmm + tr * tr) / 20.0
}

/// Z-corrected fidelity for a design whose invariants fix θ only up to sign.
pub fn z_corrected_fidelity_either_sign(u: &Gate, theta: f64) -> f64 {
    z_corrected_fidelity(u, theta).max(z_corrected_fidelity(u, -theta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::invariants::{cphase, diagonal_gate};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn fidelity_examples() {
        let u = cphase(0.7);
        assert!((gate_fidelity(&u, &u) - 1.0).abs() < 1e-15);
        let z = diagonal_gate([0.0, 0.0, PI, PI]);
        assert!((gate_fidelity(&Gate::identity(), &z) - 0.2).abs() < 1e-15);
    }

    #[test]
    fn extraction_examples() {
        let e = extract_generalized_cphase(&cphase(PI / 4.0)).unwrap();
        assert!((e.theta - PI / 4.0).abs() < 1e-15);
        assert!((e.corrected_fidelity - 1.0).abs() < 1e-15);

        let (a, b, cc, th) = (0.3, -1.1, 2.2, 0.9);
        let u = diagonal_gate([a, b, cc, b + cc - a + th]);
        let e = extract_generalized_cphase(&u).unwrap();
        assert!((e.theta - th).abs() < 1e-12);
        assert!((e.corrected_fidelity - 1.0).abs() < 1e-12);
        assert!((z_corrected_fidelity(&u, th) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn extraction_rejects_non_diagonal() {
        let mut u = Gate::identity();
        u[(0, 1)] = c(0.2, 0.0);
        assert!(matches!(extract_generalized_cphase(&u), Err(Error::NotDiagonal(_))));
    }

    #[test]
    fn z_correction_matches_closed_form_for_diagonal_unitaries() {
        for &(p, th) in &[([0.1, 0.5, -0.7, 1.9], 0.4), ([2.0, -2.5, 0.3, 0.0], -1.2), ([0.0; 4], PI)] {
            let u = diagonal_gate(p);
            let realized = extract_generalized_cphase(&u).unwrap().theta;
            // brute-force scan over the free Z angle
            let mut best: f64 = 0.0;
            for k in 0..200_000 {
                let beta = k as f64 * 2.0 * PI / 200_000.0;
                let e = Complex64::from_polar(1.0, -beta);
                let v = (u[(0, 0)] + u[(1, 1)] * e).norm()
                    + (u[(2, 2)] + u[(3, 3)] * Complex64::from_polar(1.0, -th) * e).norm();
                best = best.max(v);
            }
            let want = (4.0 + best * best) / 20.0;
            assert!((z_corrected_fidelity(&u, th) - want).abs() < 1e-9);
            assert!((z_corrected_fidelity(&u, realized) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn z_correction_bounds_raw_fidelity() {
        let u = diagonal_gate([0.2, 0.4, -0.3, 1.0]);
        assert!(z_corrected_fidelity(&u, 0.5) >= gate_fidelity(&cphase(0.5), &u) - 1e-15);
    }

    #[test]
    fn purity_of_scaled_unitary() {
        let u = cphase(1.0) * c(0.9, 0.0);
        assert!((purity(&u) - 0.81).abs() < 1e-15);
    }
}
