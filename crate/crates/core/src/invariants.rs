//! Makhlin local invariants of two-qubit gates.

use nalgebra::Matrix4;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type Gate = Matrix4<Complex64>;

/// Unitarity tolerance for [`local_invariants`].
pub const UNITARITY_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalInvariants {
    pub g1: f64,
    pub g2: f64,
    pub g3: f64,
}

impl LocalInvariants {
    pub fn as_array(&self) -> [f64; 3] {
        [self.g1, self.g2, self.g3]
    }
}

/// Magic (Bell) basis matrix Q.
pub fn magic_basis() -> Gate {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let o = Complex64::new(0.0, 0.0);
    let r = Complex64::new(s, 0.0);
    let i = Complex64::new(0.0, s);
    Matrix4::new(
        r, o, o, i, //
        o, i, r, o, //
        o, i, -r, o, //
        r, o, o, -i,
    )
}

pub fn unitarity_deviation(u: &Gate) -> f64 {
    let d = u.adjoint() * u - Gate::identity();
    d.iter().fold(0.0, |m, z| m.max(z.norm()))
}

/// Closest unitary in Frobenius norm (polar factor).
pub fn polar_unitary(u: &Gate) -> Gate {
    let svd = u.svd(true, true);
    let (w, vt) = (svd.u.expect("requested"), svd.v_t.expect("requested"));
    w * vt
}

pub fn local_invariants(u: &Gate) -> Result<LocalInvariants> {
    let dev = unitarity_deviation(u);
    if !(dev <= UNITARITY_TOL) {
        return Err(Error::NonUnitaryInput(dev));
    }
    Ok(invariants_unchecked(u))
}

/// Invariants of the polar-unitarized operator, with the deviation of the
/// input from unitarity.
pub fn local_invariants_polar(u: &Gate) -> (LocalInvariants, f64) {
    let dev = unitarity_deviation(u);
    (invariants_unchecked(&polar_unitary(u)), dev)
}

fn invariants_unchecked(u: &Gate) -> LocalInvariants {
    let q = magic_basis();
    let ub = q.adjoint() * u * q;
    let m = ub.transpose() * ub;
    let det = u.determinant();
    let tr = m.trace();
    let tr2 = (m * m).trace();
    let a = tr * tr / (16.0 * det);
    let g3 = (tr * tr - tr2) / (4.0 * det);
    debug_assert!(g3.im.abs() < 1e-8, "G3 imaginary part {}", g3.im);
    LocalInvariants { g1: a.re, g2: a.im, g3: g3.re }
}

pub fn cphase_target_invariants(theta: f64) -> LocalInvariants {
    let c = (theta / 2.0).cos();
    LocalInvariants { g1: c * c, g2: 0.0, g3: 2.0 + theta.cos() }
}

pub fn invariants_distance(a: &LocalInvariants, b: &LocalInvariants) -> f64 {
    ((a.g1 - b.g1).powi(2) + (a.g2 - b.g2).powi(2) + (a.g3 - b.g3).powi(2)).sqrt()
}

pub fn cphase(theta: f64) -> Gate {
    let mut u = Gate::identity();
    u[(3, 3)] = Complex64::from_polar(1.0, theta);
    u
}

pub fn diagonal_gate(phases: [f64; 4]) -> Gate {
    let mut u = Gate::zeros();
    for (k, p) in phases.iter().enumerate() {
        u[(k, k)] = Complex64::from_polar(1.0, *p);
    }
    u
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn close(a: &LocalInvariants, b: &LocalInvariants, tol: f64) -> bool {
        invariants_distance(a, b) < tol
    }

    #[test]
    fn magic_basis_is_unitary() {
        assert!(unitarity_deviation(&magic_basis()) < 1e-15);
    }

    #[test]
    fn identity_and_cz() {
        let id = local_invariants(&Gate::identity()).unwrap();
        assert!(close(&id, &LocalInvariants { g1: 1.0, g2: 0.0, g3: 3.0 }, 1e-14));
        let cz = local_invariants(&cphase(std::f64::consts::PI)).unwrap();
        assert!(close(&cz, &LocalInvariants { g1: 0.0, g2: 0.0, g3: 1.0 }, 1e-14));
        assert!((invariants_distance(&id, &cz) - 5f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn cnot_equivalent_to_cz() {
        let o = c(0.0);
        let l = c(1.0);
        let cnot = Matrix4::new(l, o, o, o, o, l, o, o, o, o, o, l, o, o, l, o);
        let a = local_invariants(&cnot).unwrap();
        assert!(close(&a, &cphase_target_invariants(std::f64::consts::PI), 1e-14));
    }

    #[test]
    fn target_examples() {
        use std::f64::consts::PI;
        let t = cphase_target_invariants(PI / 2.0);
        assert!((t.g1 - 0.5).abs() < 1e-15 && t.g2 == 0.0 && (t.g3 - 2.0).abs() < 1e-15);
        assert!(close(&cphase_target_invariants(0.0), &LocalInvariants { g1: 1.0, g2: 0.0, g3: 3.0 }, 1e-15));
    }

    #[test]
    fn swap_invariants() {
        // SWAP has G = (−1, 0, −3)
        let o = c(0.0);
        let l = c(1.0);
        let swap = Matrix4::new(l, o, o, o, o, o, l, o, o, l, o, o, o, o, o, l);
        let s = local_invariants(&swap).unwrap();
        assert!(close(&s, &LocalInvariants { g1: -1.0, g2: 0.0, g3: -3.0 }, 1e-14));
    }

    #[test]
    fn non_unitary_is_rejected_and_polar_recovers() {
        let u = cphase(1.0) * c(0.9);
        assert!(matches!(local_invariants(&u), Err(Error::NonUnitaryInput(_))));
        let (inv, dev) = local_invariants_polar(&u);
        assert!((dev - 0.19).abs() < 1e-12);
        assert!(close(&inv, &cphase_target_invariants(1.0), 1e-12));
    }
}
