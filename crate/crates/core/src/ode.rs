//! Explicit Runge–Kutta 8(5,3) integrator (Dormand–Prince DOP853) with the
//! standard step-size controller, for complex linear systems.

use num_complex::Complex64;

use crate::error::{Error, Result};

const C: [f64; 12] = [
    0.0,
    0.05260015195876773,
    0.0789002279381516,
    0.1183503419072274,
    0.2816496580927726,
    0.3333333333333333,
    0.25,
    0.3076923076923077,
    0.6512820512820513,
    0.6,
    0.8571428571428571,
    1.0,
];

// lower-triangular stage matrix, row i uses entries 0..i
const A: [[f64; 12]; 13] = [
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [0.05260015195876773, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [0.0197250569845379, 0.0591751709536137, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [0.02958758547680685, 0.0, 0.08876275643042054, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [0.2413651341592667, 0.0, -0.8845494793282861, 0.924834003261792, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [0.037037037037037035, 0.0, 0.0, 0.17082860872947386, 0.12546768756682242, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [0.037109375, 0.0, 0.0, 0.17025221101954405, 0.06021653898045596, -0.017578125, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [0.03709200011850479, 0.0, 0.0, 0.17038392571223998, 0.10726203044637328, -0.015319437748624402, 0.008273789163814023, 0.0, 0.0, 0.0, 0.0, 0.0],
    [0.6241109587160757, 0.0, 0.0, -3.3608926294469414, -0.868219346841726, 27.59209969944671, 20.154067550477894, -43.48988418106996, 0.0, 0.0, 0.0, 0.0],
    [0.47766253643826434, 0.0, 0.0, -2.4881146199716677, -0.590290826836843, 21.230051448181193, 15.279233632882423, -33.28821096898486, -0.020331201708508627, 0.0, 0.0, 0.0],
    [-0.9371424300859873, 0.0, 0.0, 5.186372428844064, 1.0914373489967295, -8.149787010746927, -18.52006565999696, 22.739487099350505, 2.4936055526796523, -3.0467644718982196, 0.0, 0.0],
    [2.273310147516538, 0.0, 0.0, -10.53449546673725, -2.0008720582248625, -17.9589318631188, 27.94888452941996, -2.8589982771350235, -8.87285693353063, 12.360567175794303, 0.6433927460157636, 0.0],
    [0.054293734116568765, 0.0, 0.0, 0.0, 0.0, 4.450312892752409, 1.8915178993145003, -5.801203960010585, 0.3111643669578199, -0.1521609496625161, 0.20136540080403034, 0.04471061572777259],
];

const E3: [f64; 13] = [-0.18980075407240762, 0.0, 0.0, 0.0, 0.0, 4.450312892752409, 1.8915178993145003, -5.801203960010585, -0.4226823213237919, -0.1521609496625161, 0.20136540080403034, 0.02265179219836082, 0.0];
const E5: [f64; 13] = [0.01312004499419488, 0.0, 0.0, 0.0, 0.0, -1.2251564463762044, -0.4957589496572502, 1.6643771824549864, -0.35032884874997366, 0.3341791187130175, 0.08192320648511571, -0.022355307863886294, 0.0];

const SAFETY: f64 = 0.9;
const MIN_FACTOR: f64 = 0.2;
const MAX_FACTOR: f64 = 10.0;
const ERROR_EXPONENT: f64 = -1.0 / 8.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub rtol: f64,
    pub atol: f64,
    /// Upper bound on the step, ns. `f64::INFINITY` for none.
    pub max_step: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { rtol: 1e-10, atol: 1e-12, max_step: f64::INFINITY }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Stats {
    pub steps: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

impl std::ops::AddAssign for Stats {
    fn add_assign(&mut self, o: Stats) {
        self.steps += o.steps;
        self.rejected += o.rejected;
        self.evaluations += o.evaluations;
    }
}

fn rms_scaled(v: &[Complex64], scale: &[f64]) -> f64 {
    let s: f64 = v.iter().zip(scale).map(|(z, w)| z.norm_sqr() / (w * w)).sum();
    (s / v.len() as f64).sqrt()
}

/// Integrates dy/dt = f(t, y) from `t0` to `t1` in place. `f` writes the
/// derivative into its third argument.
pub fn integrate<F>(mut f: F, t0: f64, t1: f64, y: &mut [Complex64], tol: Tolerances) -> Result<Stats>
where
    F: FnMut(f64, &[Complex64], &mut [Complex64]),
{
    let n = y.len();
    let mut stats = Stats::default();
    if t1 == t0 || n == 0 {
        return Ok(stats);
    }
    if !(t1 > t0) {
        return Err(Error::ToleranceNotMet(format!("integration interval [{t0}, {t1}] is reversed")));
    }
    let mut k = vec![vec![Complex64::default(); n]; 13];
    let mut tmp = vec![Complex64::default(); n];
    let mut y_new = vec![Complex64::default(); n];
    let mut scale = vec![0.0; n];
    let mut err3 = vec![Complex64::default(); n];
    let mut err5 = vec![Complex64::default(); n];

    let mut t = t0;
    f(t, y, &mut k[0]);
    stats.evaluations += 1;
    let mut h = initial_step(&mut f, t, y, &k[0], t1 - t0, tol, &mut stats);
    let mut last_rejected = false;

    while t < t1 {
        let min_step = 10.0 * (f64::EPSILON * t.abs()).max(f64::MIN_POSITIVE);
        if h < min_step {
            return Err(Error::ToleranceNotMet(format!("step size fell below {min_step:.3e} ns at t = {t}")));
        }
        h = h.min(tol.max_step);
        if t + h > t1 {
            h = t1 - t;
        }
        for s in 1..12 {
            for i in 0..n {
                let mut acc = Complex64::default();
                for (j, kj) in k.iter().enumerate().take(s) {
                    if A[s][j] != 0.0 {
                        acc += kj[i] * A[s][j];
                    }
                }
                tmp[i] = y[i] + acc * h;
            }
            f(t + C[s] * h, &tmp, &mut k[s]);
        }
        for i in 0..n {
            let mut acc = Complex64::default();
            for (j, kj) in k.iter().enumerate().take(12) {
                if A[12][j] != 0.0 {
                    acc += kj[i] * A[12][j];
                }
            }
            y_new[i] = y[i] + acc * h;
        }
        let t_new = if t + h >= t1 { t1 } else { t + h };
        f(t_new, &y_new, &mut k[12]);
        stats.evaluations += 12;

        for i in 0..n {
            scale[i] = tol.atol + tol.rtol * y[i].norm().max(y_new[i].norm());
            let mut e3 = Complex64::default();
            let mut e5 = Complex64::default();
            for (j, kj) in k.iter().enumerate() {
                e3 += kj[i] * E3[j];
                e5 += kj[i] * E5[j];
            }
            err3[i] = e3;
            err5[i] = e5;
        }
        let n5 = rms_scaled(&err5, &scale).powi(2);
        let n3 = rms_scaled(&err3, &scale).powi(2);
        let err = if n5 == 0.0 && n3 == 0.0 { 0.0 } else { h.abs() * n5 / (n5 + 0.01 * n3).sqrt() };

        if err < 1.0 {
            let mut factor = if err == 0.0 { MAX_FACTOR } else { MAX_FACTOR.min(SAFETY * err.powf(ERROR_EXPONENT)) };
            if last_rejected {
                factor = factor.min(1.0);
            }
            t = t_new;
            y.copy_from_slice(&y_new);
            k.swap(0, 12);
            h *= factor;
            last_rejected = false;
            stats.steps += 1;
        } else {
            h *= MIN_FACTOR.max(SAFETY * err.powf(ERROR_EXPONENT));
            last_rejected = true;
            stats.rejected += 1;
        }
    }
    Ok(stats)
}

fn initial_step<F>(
    f: &mut F,
    t: f64,
    y: &[Complex64],
    f0: &[Complex64],
    span: f64,
    tol: Tolerances,
    stats: &mut Stats,
) -> f64
where
    F: FnMut(f64, &[Complex64], &mut [Complex64]),
{
    let scale: Vec<f64> = y.iter().map(|z| tol.atol + z.norm() * tol.rtol).collect();
    let d0 = rms_scaled(y, &scale);
    let d1 = rms_scaled(f0, &scale);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    let h0 = h0.min(span).min(tol.max_step);
    let y1: Vec<Complex64> = y.iter().zip(f0).map(|(a, b)| a + b * h0).collect();
    let mut f1 = vec![Complex64::default(); y.len()];
    f(t + h0, &y1, &mut f1);
    stats.evaluations += 1;
    let diff: Vec<Complex64> = f1.iter().zip(f0).map(|(a, b)| a - b).collect();
    let d2 = rms_scaled(&diff, &scale) / h0;
    let h1 = if d1 <= 1e-15 && d2 <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(1.0 / 8.0)
    };
    (100.0 * h0).min(h1).min(span).min(tol.max_step)
}
