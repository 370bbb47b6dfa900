use std::f64::consts::PI;

use nalgebra::{Matrix2, Matrix4};
use num_complex::Complex64;
use proptest::prelude::*;

use sechphase::device::{Device, DeviceParams};
use sechphase::invariants::{
    cphase, cphase_target_invariants, diagonal_gate, invariants_distance, local_invariants, unitarity_deviation, Gate,
};
use sechphase::metrics::{extract_generalized_cphase, gate_fidelity, wrap_angle, z_corrected_fidelity};
use sechphase::optimize::{project_onto_constraint, SquareLimits, SquareSequence};
use sechphase::protocol::{design, verify_root_equation, Branch, ProtocolFamily, ProtocolRecord, Target};
use sechphase::sech::{phase_phi, sech_final_propagator};

type C = Complex64;

/// SU(2) element from Euler angles.
fn su2(a: f64, b: f64, c: f64) -> Matrix2<C> {
    let rz = |t: f64| Matrix2::new(C::from_polar(1.0, -t / 2.0), C::default(), C::default(), C::from_polar(1.0, t / 2.0));
    let ry = Matrix2::new(
        C::new((b / 2.0).cos(), 0.0),
        C::new(-(b / 2.0).sin(), 0.0),
        C::new((b / 2.0).sin(), 0.0),
        C::new((b / 2.0).cos(), 0.0),
    );
    rz(a) * ry * rz(c)
}

fn kron(a: &Matrix2<C>, b: &Matrix2<C>) -> Gate {
    let mut g = Matrix4::zeros();
    for i in 0..2 {
        for j in 0..2 {
            for k in 0..2 {
                for l in 0..2 {
                    g[(2 * i + k, 2 * j + l)] = a[(i, j)] * b[(k, l)];
                }
            }
        }
    }
    g
}

fn angles() -> impl Strategy<Value = (f64, f64, f64)> {
    (-PI..PI, 0.0..PI, -PI..PI)
}

fn device() -> &'static Device {
    use std::sync::OnceLock;
    static D: OnceLock<Device> = OnceLock::new();
    D.get_or_init(|| Device::new(&DeviceParams::default()).unwrap())
}

proptest! {
    #[test]
    fn invariants_ignore_local_dressing(
        theta in -PI..PI,
        a in angles(), b in angles(), c in angles(), d in angles(),
    ) {
        let u = cphase(theta);
        let l1 = kron(&su2(a.0, a.1, a.2), &su2(b.0, b.1, b.2));
        let l2 = kron(&su2(c.0, c.1, c.2), &su2(d.0, d.1, d.2));
        let dressed = l1 * u * l2;
        let g0 = local_invariants(&u).unwrap();
        let g1 = local_invariants(&dressed).unwrap();
        prop_assert!(invariants_distance(&g0, &g1) < 1e-9);
        prop_assert!(invariants_distance(&g0, &cphase_target_invariants(theta)) < 1e-12);
    }

    #[test]
    fn realized_angle_ignores_local_z(
        theta in -3.0..3.0f64,
        z in proptest::array::uniform4(-PI..PI),
    ) {
        // Z on each qubit before and after, plus a global phase
        let zz = |p: f64, q: f64| diagonal_gate([0.0, q, p, p + q]);
        let u = zz(z[0], z[1]) * cphase(theta) * zz(z[2], z[3]);
        let e = extract_generalized_cphase(&u).unwrap();
        prop_assert!((wrap_angle(e.theta - theta)).abs() < 1e-12);
        prop_assert!((e.corrected_fidelity - 1.0).abs() < 1e-12);
        prop_assert!((z_corrected_fidelity(&u, theta) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn z_correction_never_lowers_fidelity(p in proptest::array::uniform4(-PI..PI), theta in -PI..PI) {
        let u = diagonal_gate(p);
        let f = z_corrected_fidelity(&u, theta);
        prop_assert!(f >= gate_fidelity(&cphase(theta), &u) - 1e-12);
        prop_assert!(f <= 1.0 + 1e-12);
    }

    #[test]
    fn sech_propagator_is_diagonal_and_unitary(x in -20.0..20.0f64, sigma in 0.01..1.0f64, a in 1u32..=3) {
        let u = sech_final_propagator(x * sigma, sigma, a).unwrap();
        prop_assert!((u[(0, 0)].norm() - 1.0).abs() < 1e-10);
        prop_assert!((u.determinant().norm() - 1.0).abs() < 1e-10);
        prop_assert!(u[(0, 1)].norm() == 0.0 && u[(1, 0)].norm() == 0.0);
        prop_assert!((u[(1, 1)] - u[(0, 0)].conj()).norm() < 1e-12);
        let phi = phase_phi(x * sigma, sigma, a).unwrap();
        prop_assert!(phi > -PI && phi <= PI);
    }

    #[test]
    fn phase_is_odd_in_detuning(x in 0.01..20.0f64, a in 1u32..=3) {
        let p = phase_phi(x, 1.0, a).unwrap();
        let m = phase_phi(-x, 1.0, a).unwrap();
        prop_assert!(wrap_angle(p + m).abs() < 1e-10);
    }

    #[test]
    fn designs_satisfy_their_root_equations(
        k in 0usize..4,
        t in 0.02..0.98f64,
        lambda in 1u8..=2,
        plus in any::<bool>(),
    ) {
        // the off-resonant family has its own property below
        let family = ProtocolFamily::ALL[k];
        let theta = t * PI;
        let branch = if plus { Branch::Plus } else { Branch::Minus };
        let target = Target::from_subspace(lambda).unwrap();
        if let Ok(spec) = design(family, theta, &device().transitions, target, branch, None) {
            let check = verify_root_equation(&spec).unwrap();
            prop_assert!(check.residual < 1e-10, "{family} θ={theta}: {}", check.residual);
            prop_assert!(check.invariant_distance < 1e-10);
            prop_assert!(spec.range.contains(spec.bandwidth / spec.splitting));
            let back: ProtocolRecord = spec.record().to_string().parse().unwrap();
            prop_assert_eq!(back, spec.record());
        }
    }

    #[test]
    fn offresonant_bandwidths_below_cap_all_verify(t in 0.05..1.0f64, frac in 0.02..0.98f64, lambda in 1u8..=2) {
        let theta = t * PI;
        let tt = &device().transitions;
        let smax = sechphase::protocol::offres_max_bandwidth(theta, tt);
        let target = Target::from_subspace(lambda).unwrap();
        let spec = design(ProtocolFamily::Oqss2PiOffRes, theta, tt, target, Branch::Plus, Some(frac * smax)).unwrap();
        let check = verify_root_equation(&spec).unwrap();
        prop_assert!(check.residual < 1e-10 && check.invariant_distance < 1e-10);
    }

    #[test]
    fn projection_keeps_square_constraint(
        raw in proptest::collection::vec((0.0..30.0f64, -0.3..0.3f64), 1..=6),
        t in 0.01..1.0f64,
        dip in 0.5..1.5f64,
    ) {
        let lim = SquareLimits::default();
        let theta = t * PI;
        let (mut d, mut a): (Vec<f64>, Vec<f64>) = raw.into_iter().unzip();
        project_onto_constraint(&mut d, &mut a, theta / 2.0, dip, &lim);
        let n = d.len();
        let s = SquareSequence { durations: d.clone(), amplitudes: a.clone(), frequencies: vec![0.0; n] };
        prop_assert!((s.pulse_area(dip) - theta / 2.0).abs() < 1e-10);
        prop_assert!(a.iter().all(|e| e.abs() <= lim.max_amplitude * (1.0 + 1e-12)));
        prop_assert!(d.iter().all(|&x| x >= lim.min_duration - 1e-12 && x <= lim.max_duration(n) * (1.0 + 1e-12)));
    }

    #[test]
    fn config_text_round_trips(
        wc in 5.0..9.0f64, w1 in 4.0..8.0f64, w2 in 4.0..8.0f64,
        an in 100.0..400.0f64, g in 30.0..180.0f64,
    ) {
        let p = DeviceParams {
            cavity_freq_ghz: wc,
            qubit_freqs_ghz: [w1, w2],
            anharmonicities_mhz: [an, an],
            couplings_mhz: [g, g],
            ..Default::default()
        };
        let back = DeviceParams::from_config_str(&p.to_config_string()).unwrap();
        prop_assert_eq!(back, p);
    }
}

#[test]
fn haar_like_unitaries_pass_unitarity_gate() {
    let u = kron(&su2(0.3, 1.1, -0.4), &su2(2.0, 0.2, 1.0)) * cphase(0.7);
    assert!(unitarity_deviation(&u) < 1e-14);
}
