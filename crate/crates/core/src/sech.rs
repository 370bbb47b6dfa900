//! Closed-form two-level evolution under a hyperbolic-secant pulse.

use std::f64::consts::PI;

use nalgebra::Matrix2;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::ode::{self, Tolerances};
use crate::special;

/// Default full on-time in units of 1/σ.
pub const WINDOW_WIDTH: f64 = 10.0;

/// Ω(t) = Ω₀ sech(σ (t − t_peak)) with Ω₀ = aσ, driven at ω_p.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SechPulse {
    /// rad/ns
    pub bandwidth: f64,
    pub area_index: u32,
    /// rad/ns
    pub drive_freq: f64,
    /// Half of the on-time, ns.
    pub half_window: f64,
}

impl SechPulse {
    pub fn new(bandwidth: f64, area_index: u32, drive_freq: f64) -> Self {
        SechPulse { bandwidth, area_index, drive_freq, half_window: 0.5 * WINDOW_WIDTH / bandwidth }
    }

    /// Rabi amplitude on the calibrated transition, rad/ns.
    pub fn amplitude(&self) -> f64 {
        self.area_index as f64 * self.bandwidth
    }

    pub fn duration(&self) -> f64 {
        2.0 * self.half_window
    }

    /// Rabi frequency at time `t` measured from the peak.
    pub fn envelope(&self, t: f64) -> f64 {
        self.amplitude() / (self.bandwidth * t).cosh()
    }
}

/// ₂F₁(−a, a; c; 1) from the terminating series. The Gamma-function form
/// is [`special::hyp2f1_unit_gauss`].
pub fn gauss_2f1_unit(a: u32, c: Complex64) -> Result<Complex64> {
    special::hyp2f1_unit(a, c)
}

fn c_param(delta: f64, sigma: f64) -> Complex64 {
    Complex64::new(0.5, 0.5 * delta / sigma)
}

/// Ingredients of the two-level propagator at t → +∞.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SechAnalyticTerms {
    pub c: Complex64,
    pub zeta: f64,
    pub alpha: Complex64,
    pub beta: Complex64,
    pub offdiag_coupling: Complex64,
}

impl SechAnalyticTerms {
    pub fn at_infinity(delta: f64, sigma: f64, a: u32) -> Result<Self> {
        if !(sigma > 0.0) {
            return Err(Error::InvalidParams(format!("bandwidth must be positive, got {sigma}")));
        }
        let c = c_param(delta, sigma);
        let alpha = gauss_2f1_unit(a, c.conj())?;
        // Gauss summation of β at ζ = 1 carries 1/Γ(1 − a), zero for integer a ≥ 1
        let beta = if a == 0 {
            let a = a as f64;
            let l = special::ln_gamma(2.0 - c)? + special::ln_gamma(c)?
                - special::ln_gamma(Complex64::new(1.0 - a, 0.0))?
                - special::ln_gamma(Complex64::new(1.0 + a, 0.0))?;
            l.exp()
        } else {
            Complex64::new(0.0, 0.0)
        };
        // a is integral, so the −i sech(πΔ/2σ) sin(aπ) coupling is exactly zero
        let offdiag_coupling = Complex64::new(0.0, 0.0);
        Ok(SechAnalyticTerms { c, zeta: 1.0, alpha, beta, offdiag_coupling })
    }

    pub fn propagator(&self) -> Matrix2<Complex64> {
        Matrix2::new(self.alpha, self.offdiag_coupling, self.offdiag_coupling, self.alpha.conj())
    }
}

/// U(+∞, −∞) for a sech pulse of area index `a` detuned by Δ = ω_p − ω_transition.
pub fn sech_final_propagator(delta: f64, sigma: f64, a: u32) -> Result<Matrix2<Complex64>> {
    Ok(SechAnalyticTerms::at_infinity(delta, sigma, a)?.propagator())
}

fn wrap_pi(x: f64) -> f64 {
    let y = (x + PI).rem_euclid(2.0 * PI) - PI;
    if y <= -PI {
        y + 2.0 * PI
    } else {
        y
    }
}

/// Phase φ_a(Δ) with U = diag(e^{−iφ}, e^{iφ}), in (−π, π].
pub fn phase_phi(delta: f64, sigma: f64, a: u32) -> Result<f64> {
    let u = sech_final_propagator(delta, sigma, a)?;
    let z = u[(0, 0)];
    Ok(wrap_pi(-z.im.atan2(z.re)))
}

/// The single-argument arctangent expressions for a ∈ {1, 2}. Singular at
/// Δ = 0 (a = 1) and (Δ/σ)² = 3 (a = 2); kept as a cross-check.
pub fn phase_phi_printed(delta: f64, sigma: f64, a: u32) -> Option<f64> {
    let x = delta / sigma;
    match a {
        1 => Some(2.0 * (1.0 / x).atan()),
        2 => Some(2.0 * (4.0 * x / (x * x - 3.0)).atan()),
        _ => None,
    }
}

/// Direct integration of H₂(t) = [[0, Ω(t)e^{iΔt}], [Ω(t)e^{−iΔt}, 0]]
/// over [−half_window, +half_window].
pub fn integrate_two_level(delta: f64, sigma: f64, a: u32, half_window: f64, tol: Tolerances) -> Result<Matrix2<Complex64>> {
    let pulse = SechPulse { bandwidth: sigma, area_index: a, drive_freq: 0.0, half_window };
    let mut y = vec![
        Complex64::new(1.0, 0.0),
        Complex64::new(0.0, 0.0),
        Complex64::new(0.0, 0.0),
        Complex64::new(1.0, 0.0),
    ];
    let minus_i = Complex64::new(0.0, -1.0);
    ode::integrate(
        |t, y, dy| {
            let om = pulse.envelope(t);
            let h01 = Complex64::from_polar(om, delta * t);
            let h10 = h01.conj();
            // row-major 2x2, columns are the two initial states
            for col in 0..2 {
                let (u0, u1) = (y[col], y[2 + col]);
                dy[col] = minus_i * h01 * u1;
                dy[2 + col] = minus_i * h10 * u0;
            }
        },
        -half_window,
        half_window,
        &mut y,
        tol,
    )?;
    Ok(Matrix2::new(y[0], y[1], y[2], y[3]))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn max_diff(a: &Matrix2<Complex64>, b: &Matrix2<Complex64>) -> f64 {
        (a - b).iter().fold(0.0, |m, z| m.max(z.norm()))
    }

    #[test]
    fn gauss_examples() {
        assert_eq!(gauss_2f1_unit(0, c(0.3, 2.0)).unwrap(), c(1.0, 0.0));
        let z = gauss_2f1_unit(2, c(0.5, 0.0)).unwrap();
        assert!((z - c(1.0, 0.0)).norm() < 1e-15);
        let g = special::hyp2f1_unit_gauss(2, c(0.5, 0.0)).unwrap();
        assert!((g - c(1.0, 0.0)).norm() < 1e-13);
    }

    #[test]
    fn propagator_examples() {
        let u = sech_final_propagator(1.0, 1.0, 1).unwrap();
        assert!((u[(0, 0)] - c(0.0, -1.0)).norm() < 1e-15);
        assert!((u[(1, 1)] - c(0.0, 1.0)).norm() < 1e-15);
        let u = sech_final_propagator(1e6, 1.0, 1).unwrap();
        assert!((u[(0, 0)] - c(1.0, 0.0)).norm() < 1e-5);
        let u = sech_final_propagator(0.0, 2.0, 2).unwrap();
        assert!(max_diff(&u, &Matrix2::identity()) < 1e-15);
        assert!(sech_final_propagator(1.0, 0.0, 1).is_err());
    }

    #[test]
    fn phase_examples() {
        assert!((phase_phi(0.0, 1.0, 1).unwrap() - PI).abs() < 1e-15);
        assert!((phase_phi(1.0, 1.0, 1).unwrap() - PI / 2.0).abs() < 1e-15);
        assert!(phase_phi(0.0, 1.0, 2).unwrap().abs() < 1e-15);
    }

    #[test]
    fn printed_phase_formulas_agree_away_from_singularities() {
        for i in -50..=50 {
            let x = i as f64 * 0.173 + 0.011;
            for a in [1, 2] {
                let p = phase_phi(x, 1.0, a).unwrap();
                let q = phase_phi_printed(x, 1.0, a).unwrap();
                assert!(wrap_pi(p - q).abs() < 1e-10, "a={a} x={x}: {p} {q}");
            }
        }
    }

    #[test]
    fn analytic_terms_assemble_propagator() {
        for &(d, s, a) in &[(0.3, 1.0, 1), (-2.0, 0.5, 2), (5.0, 1.3, 3)] {
            let t = SechAnalyticTerms::at_infinity(d, s, a).unwrap();
            assert_eq!(t.zeta, 1.0);
            assert_eq!(t.offdiag_coupling, c(0.0, 0.0));
            assert_eq!(t.beta, c(0.0, 0.0));
            assert!(max_diff(&t.propagator(), &sech_final_propagator(d, s, a).unwrap()) < 1e-15);
            assert!((t.propagator().determinant().norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn numerical_integration_matches_closed_form() {
        let tol = Tolerances { rtol: 1e-12, atol: 1e-14, max_step: f64::INFINITY };
        for a in [1, 2] {
            for x in [0.0, 0.5, 1.0, 3.0, 10.0] {
                let num = integrate_two_level(x, 1.0, a, 25.0, tol).unwrap();
                let ana = sech_final_propagator(x, 1.0, a).unwrap();
                assert!(max_diff(&num, &ana) < 1e-6, "a={a} x={x}: {}", max_diff(&num, &ana));
            }
        }
    }

    #[test]
    fn short_window_truncation_is_visible() {
        // the default ±5/σ window loses a finite slice of pulse area
        let tol = Tolerances { rtol: 1e-12, atol: 1e-14, max_step: f64::INFINITY };
        let num = integrate_two_level(0.0, 1.0, 1, 5.0, tol).unwrap();
        let ana = sech_final_propagator(0.0, 1.0, 1).unwrap();
        let d = max_diff(&num, &ana);
        assert!(d > 1e-3 && d < 0.05, "{d}");
    }

    /// ₂F₁(A, B; C; z) by direct summation, |z| < 1.
    fn hyp2f1_series(a: Complex64, b: Complex64, cc: Complex64, z: f64) -> Complex64 {
        let mut term = c(1.0, 0.0);
        let mut sum = term;
        for k in 0..4000 {
            let k = k as f64;
            term *= (a + k) * (b + k) / ((cc + k) * (k + 1.0)) * z;
            sum += term;
            if term.norm() < 1e-17 * sum.norm() {
                break;
            }
        }
        sum
    }

    #[test]
    fn intermediate_time_diagonal_matches_integration() {
        // U(t, −∞) has α(a, c, ζ) on the diagonal; off-diagonal magnitude
        // |a/c| ζ^{1/2} |β|
        let tol = Tolerances { rtol: 1e-12, atol: 1e-14, max_step: f64::INFINITY };
        for &(d, a) in &[(0.7, 1u32), (-1.4, 2u32), (2.5, 1u32)] {
            for &t in &[-1.0, 0.0, 0.8] {
                let mut y = vec![c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)];
                let pulse = SechPulse { bandwidth: 1.0, area_index: a, drive_freq: 0.0, half_window: 30.0 };
                ode::integrate(
                    |t, y, dy| {
                        let h01 = Complex64::from_polar(pulse.envelope(t), d * t);
                        for col in 0..2 {
                            dy[col] = c(0.0, -1.0) * h01 * y[2 + col];
                            dy[2 + col] = c(0.0, -1.0) * h01.conj() * y[col];
                        }
                    },
                    -30.0,
                    t,
                    &mut y,
                    tol,
                )
                .unwrap();
                let cc = c_param(d, 1.0);
                let zeta = 0.5 * (1.0 + t.tanh());
                let af = a as f64;
                let alpha = hyp2f1_series(c(af, 0.0), c(-af, 0.0), cc.conj(), zeta);
                let beta = hyp2f1_series(1.0 + af - cc, 1.0 - af - cc, 2.0 - cc, zeta);
                let off = (af / cc.norm()) * zeta.sqrt() * beta.norm();
                assert!((y[0] - alpha).norm() < 1e-7, "d={d} t={t}");
                assert!((y[3] - alpha.conj()).norm() < 1e-7);
                assert!((y[1].norm() - off).abs() < 1e-7);
            }
        }
    }
}
