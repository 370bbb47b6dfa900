//! Cavity + two-transmon Hamiltonian, dressed basis and transition table.

use std::fmt;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::units;

pub type CMatrix = DMatrix<Complex64>;

/// Default cap on the truncated Hilbert-space dimension.
pub const DEFAULT_DIMENSION_CAP: usize = 1024;

/// Minimum squared overlap for a dressed state to keep its bare label.
pub const LABEL_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, PartialEq)]
pub struct DeviceParams {
    pub cavity_freq_ghz: f64,
    pub qubit_freqs_ghz: [f64; 2],
    pub anharmonicities_mhz: [f64; 2],
    pub couplings_mhz: [f64; 2],
    pub cavity_levels: usize,
    pub transmon_levels: usize,
}

impl Default for DeviceParams {
    fn default() -> Self {
        DeviceParams {
            cavity_freq_ghz: 7.15,
            qubit_freqs_ghz: [6.2, 6.8],
            anharmonicities_mhz: [350.0, 350.0],
            couplings_mhz: [130.0, 130.0],
            cavity_levels: 3,
            transmon_levels: 4,
        }
    }
}

const CONFIG_KEYS: [&str; 7] = [
    "cavity_freq_ghz",
    "q1_freq_ghz",
    "q2_freq_ghz",
    "anharmonicity_mhz",
    "coupling_mhz",
    "cavity_levels",
    "transmon_levels",
];

impl DeviceParams {
    pub fn with_coupling_mhz(mut self, g: f64) -> Self {
        self.couplings_mhz = [g, g];
        self
    }

    pub fn with_levels(mut self, cavity: usize, transmon: usize) -> Self {
        self.cavity_levels = cavity;
        self.transmon_levels = transmon;
        self
    }

    pub fn dimension(&self) -> usize {
        self.cavity_levels * self.transmon_levels * self.transmon_levels
    }

    /// Checks the physical invariants. Couplings may be zero (decoupled
    /// reference device) but not negative.
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("cavity_freq_ghz", self.cavity_freq_ghz),
            ("q1_freq_ghz", self.qubit_freqs_ghz[0]),
            ("q2_freq_ghz", self.qubit_freqs_ghz[1]),
            ("anharmonicity_mhz", self.anharmonicities_mhz[0]),
            ("anharmonicity_mhz", self.anharmonicities_mhz[1]),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParams(format!("{name} must be positive, got {v}")));
            }
        }
        for g in self.couplings_mhz {
            if !(g.is_finite() && g >= 0.0) {
                return Err(Error::InvalidParams(format!("coupling_mhz must be non-negative, got {g}")));
            }
        }
        if self.cavity_levels < 3 {
            return Err(Error::InvalidParams(format!(
                "cavity_levels must be at least 3, got {}",
                self.cavity_levels
            )));
        }
        if self.transmon_levels < 4 {
            return Err(Error::InvalidParams(format!(
                "transmon_levels must be at least 4, got {}",
                self.transmon_levels
            )));
        }
        Ok(())
    }

    /// Parses a `key = value` file. Blank lines and `#` comments are ignored.
    /// Every key is required except the two level counts (default 3 and 4).
    pub fn from_config_str(text: &str) -> Result<Self> {
        let mut vals: [Option<f64>; 7] = [None; 7];
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", lineno + 1)))?;
            let k = k.trim();
            let idx = CONFIG_KEYS
                .iter()
                .position(|name| *name == k)
                .ok_or_else(|| Error::Config(format!("line {}: unknown key '{k}'", lineno + 1)))?;
            if vals[idx].is_some() {
                return Err(Error::Config(format!("line {}: duplicate key '{k}'", lineno + 1)));
            }
            let x: f64 = v
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("line {}: bad number for '{k}'", lineno + 1)))?;
            vals[idx] = Some(x);
        }
        let req = |i: usize| vals[i].ok_or_else(|| Error::Config(format!("missing key '{}'", CONFIG_KEYS[i])));
        let level = |i: usize, default: usize| -> Result<usize> {
            match vals[i] {
                None => Ok(default),
                Some(x) if x >= 0.0 && x.fract() == 0.0 => Ok(x as usize),
                Some(x) => Err(Error::Config(format!("{} must be an integer, got {x}", CONFIG_KEYS[i]))),
            }
        };
        let p = DeviceParams {
            cavity_freq_ghz: req(0)?,
            qubit_freqs_ghz: [req(1)?, req(2)?],
            anharmonicities_mhz: [req(3)?; 2],
            couplings_mhz: [req(4)?; 2],
            cavity_levels: level(5, 3)?,
            transmon_levels: level(6, 4)?,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn from_config_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_config_str(&text)
    }

    /// Config text for a device with symmetric anharmonicity and coupling.
    pub fn to_config_string(&self) -> String {
        format!(
            "cavity_freq_ghz = {}\nq1_freq_ghz = {}\nq2_freq_ghz = {}\nanharmonicity_mhz = {}\ncoupling_mhz = {}\ncavity_levels = {}\ntransmon_levels = {}\n",
            self.cavity_freq_ghz,
            self.qubit_freqs_ghz[0],
            self.qubit_freqs_ghz[1],
            self.anharmonicities_mhz[0],
            self.couplings_mhz[0],
            self.cavity_levels,
            self.transmon_levels
        )
    }
}

/// Bare product state |cavity; q1, q2⟩.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BareState {
    pub cavity: usize,
    pub q1: usize,
    pub q2: usize,
}

impl BareState {
    pub const fn new(cavity: usize, q1: usize, q2: usize) -> Self {
        BareState { cavity, q1, q2 }
    }
}

impl fmt::Display for BareState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "|{};{}{}>", self.cavity, self.q1, self.q2)
    }
}

/// Index bookkeeping for the truncated product space.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BasisLayout {
    pub cavity_levels: usize,
    pub transmon_levels: usize,
}

impl BasisLayout {
    pub fn of(p: &DeviceParams) -> Self {
        BasisLayout { cavity_levels: p.cavity_levels, transmon_levels: p.transmon_levels }
    }

    pub fn dimension(&self) -> usize {
        self.cavity_levels * self.transmon_levels * self.transmon_levels
    }

    pub fn index(&self, s: BareState) -> usize {
        let nt = self.transmon_levels;
        s.cavity * nt * nt + s.q1 * nt + s.q2
    }

    pub fn state(&self, idx: usize) -> BareState {
        let nt = self.transmon_levels;
        BareState::new(idx / (nt * nt), (idx / nt) % nt, idx % nt)
    }

    pub fn excitations(&self, idx: usize) -> usize {
        let s = self.state(idx);
        s.cavity + s.q1 + s.q2
    }

    /// States the gate protocols touch: no cavity photons, transmons in 0..=2.
    fn is_protected(&self, idx: usize) -> bool {
        let s = self.state(idx);
        s.cavity == 0 && s.q1 <= 2 && s.q2 <= 2
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Cavity,
    Transmon1,
    Transmon2,
}

/// Lowering operator of one mode in the bare product basis.
pub fn lowering_operator(layout: BasisLayout, mode: Mode) -> CMatrix {
    let n = layout.dimension();
    let mut a = CMatrix::zeros(n, n);
    for col in 0..n {
        let s = layout.state(col);
        let (occ, lowered) = match mode {
            Mode::Cavity if s.cavity > 0 => (s.cavity, BareState { cavity: s.cavity - 1, ..s }),
            Mode::Transmon1 if s.q1 > 0 => (s.q1, BareState { q1: s.q1 - 1, ..s }),
            Mode::Transmon2 if s.q2 > 0 => (s.q2, BareState { q2: s.q2 - 1, ..s }),
            _ => continue,
        };
        a[(layout.index(lowered), col)] = Complex64::new((occ as f64).sqrt(), 0.0);
    }
    a
}

pub fn build_static_hamiltonian(p: &DeviceParams) -> Result<CMatrix> {
    build_static_hamiltonian_capped(p, DEFAULT_DIMENSION_CAP)
}

pub fn build_static_hamiltonian_capped(p: &DeviceParams, cap: usize) -> Result<CMatrix> {
    p.validate()?;
    let layout = BasisLayout::of(p);
    let n = layout.dimension();
    if n > cap {
        return Err(Error::DimensionOverflow { dim: n, cap });
    }
    let wc = units::ghz(p.cavity_freq_ghz);
    let eps = p.qubit_freqs_ghz.map(units::ghz);
    let eta = p.anharmonicities_mhz.map(units::mhz);
    let g = p.couplings_mhz.map(units::mhz);

    let mut h = CMatrix::zeros(n, n);
    for idx in 0..n {
        let s = layout.state(idx);
        let transmon = |j: usize, nj: usize| {
            let nj = nj as f64;
            eps[j] * nj - 0.5 * eta[j] * nj * (nj - 1.0)
        };
        let e = wc * s.cavity as f64 + transmon(0, s.q1) + transmon(1, s.q2);
        h[(idx, idx)] = Complex64::new(e, 0.0);
    }
    let a = lowering_operator(layout, Mode::Cavity);
    for (j, mode) in [Mode::Transmon1, Mode::Transmon2].into_iter().enumerate() {
        if g[j] == 0.0 {
            continue;
        }
        let aj = lowering_operator(layout, mode);
        let x = aj.adjoint() * &a;
        h += (&x + x.adjoint()) * Complex64::new(g[j], 0.0);
    }
    let dev = max_abs(&(&h - h.adjoint()));
    if dev > 1e-14 * h.camax().max(1.0) {
        return Err(Error::NonHermitian(dev));
    }
    Ok(h)
}

pub(crate) fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

#[derive(Debug, Clone)]
pub struct DressedBasis {
    pub layout: BasisLayout,
    /// Ascending energies, rad/ns.
    pub energies: DVector<f64>,
    /// Columns are dressed states in the bare basis.
    pub vectors: CMatrix,
    /// bare index -> dressed index
    pub label_map: Vec<usize>,
    /// |<bare|dressed>|² for each bare index and its assigned dressed state.
    pub overlap_quality: Vec<f64>,
}

impl DressedBasis {
    pub fn dressed_index(&self, s: BareState) -> usize {
        self.label_map[self.layout.index(s)]
    }

    pub fn energy(&self, s: BareState) -> f64 {
        self.energies[self.dressed_index(s)]
    }

    /// V† X V
    pub fn to_dressed(&self, op: &CMatrix) -> CMatrix {
        self.vectors.adjoint() * op * &self.vectors
    }

    pub fn min_protected_overlap(&self) -> f64 {
        (0..self.layout.dimension())
            .filter(|&i| self.layout.is_protected(i))
            .map(|i| self.overlap_quality[i])
            .fold(1.0, f64::min)
    }
}

/// Eigen-decomposes H₀ and labels each dressed state by its dominant bare
/// component. Each eigenvector's phase is fixed so the labeled component is
/// real and positive.
pub fn diagonalize_dressed(h0: &CMatrix, layout: BasisLayout) -> Result<DressedBasis> {
    let n = h0.nrows();
    if n != layout.dimension() || h0.ncols() != n {
        return Err(Error::InvalidParams(format!(
            "Hamiltonian is {}x{}, layout expects {}",
            h0.nrows(),
            h0.ncols(),
            layout.dimension()
        )));
    }
    let eig = h0.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let energies = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut vectors = CMatrix::zeros(n, n);
    for (k, &i) in order.iter().enumerate() {
        vectors.set_column(k, &eig.eigenvectors.column(i));
    }

    let mut pairs = Vec::with_capacity(n * n);
    for d in 0..n {
        for b in 0..n {
            pairs.push((vectors[(b, d)].norm_sqr(), b, d));
        }
    }
    // descending overlap; ties broken by bare index, then dressed index
    pairs.sort_by(|x, y| y.0.total_cmp(&x.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)));
    let mut label_map = vec![usize::MAX; n];
    let mut taken = vec![false; n];
    let mut overlap_quality = vec![0.0; n];
    let mut assigned = 0;
    for (ov, b, d) in pairs {
        if label_map[b] != usize::MAX || taken[d] {
            continue;
        }
        label_map[b] = d;
        taken[d] = true;
        overlap_quality[b] = ov;
        assigned += 1;
        if assigned == n {
            break;
        }
    }

    for b in 0..n {
        let d = label_map[b];
        let c = vectors[(b, d)];
        if c.norm() > 0.0 {
            let phase = c.conj() / c.norm();
            for r in 0..n {
                vectors[(r, d)] *= phase;
            }
        }
    }

    for b in 0..n {
        if layout.is_protected(b) && overlap_quality[b] <= LABEL_THRESHOLD {
            return Err(Error::AmbiguousLabeling { state: layout.state(b), overlap: overlap_quality[b] });
        }
    }
    Ok(DressedBasis { layout, energies, vectors, label_map, overlap_quality })
}

/// Which pair of transitions a protocol drives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TransitionPair {
    /// 0↔1 of the driven transmon, conditioned on the spectator.
    Inside,
    /// 1↔2 of the driven transmon, conditioned on the spectator.
    Outside,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DrivenQubit {
    One,
    Two,
}

impl DrivenQubit {
    pub fn mode(self) -> Mode {
        match self {
            DrivenQubit::One => Mode::Transmon1,
            DrivenQubit::Two => Mode::Transmon2,
        }
    }

    /// Bare state with the spectator (control) in `c` and the driven
    /// transmon in `t`, no cavity photons.
    pub fn state(self, c: usize, t: usize) -> BareState {
        match self {
            DrivenQubit::One => BareState::new(0, t, c),
            DrivenQubit::Two => BareState::new(0, c, t),
        }
    }

    /// The qubit subspace ordered (control, target): |00>, |01>, |10>, |11>.
    pub fn qubit_states(self) -> [BareState; 4] {
        [self.state(0, 0), self.state(0, 1), self.state(1, 0), self.state(1, 1)]
    }
}

#[derive(Debug, Clone)]
pub struct TransitionTable {
    pub driven: DrivenQubit,
    /// Block j is the spectator in state j-1.
    pub omega_i: [f64; 2],
    pub omega_o: [f64; 2],
    pub dipoles_i: [f64; 2],
    pub dipoles_o: [f64; 2],
    /// ω_I1 − ω_I2
    pub delta_omega_i: f64,
    /// ω_O1 − ω_O2
    pub delta_omega_o: f64,
    /// Dressed indices of |00>, |01>, |10>, |11> in (control, target) order.
    pub qubit_indices: [usize; 4],
    /// Projector onto the dressed qubit subspace, bare basis.
    pub projector: CMatrix,
}

impl TransitionTable {
    pub fn frequencies(&self, pair: TransitionPair) -> [f64; 2] {
        match pair {
            TransitionPair::Inside => self.omega_i,
            TransitionPair::Outside => self.omega_o,
        }
    }

    pub fn dipoles(&self, pair: TransitionPair) -> [f64; 2] {
        match pair {
            TransitionPair::Inside => self.dipoles_i,
            TransitionPair::Outside => self.dipoles_o,
        }
    }

    pub fn splitting(&self, pair: TransitionPair) -> f64 {
        match pair {
            TransitionPair::Inside => self.delta_omega_i,
            TransitionPair::Outside => self.delta_omega_o,
        }
    }
}

pub fn extract_transitions(db: &DressedBasis, driven: DrivenQubit) -> Result<TransitionTable> {
    let a = db.to_dressed(&lowering_operator(db.layout, driven.mode()));
    let level = |c: usize, t: usize| db.dressed_index(driven.state(c, t));
    let gap = |c: usize, lo: usize| db.energies[level(c, lo + 1)] - db.energies[level(c, lo)];
    let dip = |c: usize, lo: usize| a[(level(c, lo), level(c, lo + 1))].norm();

    let omega_i = [gap(0, 0), gap(1, 0)];
    let omega_o = [gap(0, 1), gap(1, 1)];
    let qubit_indices = driven.qubit_states().map(|s| db.dressed_index(s));

    let n = db.layout.dimension();
    let mut projector = CMatrix::zeros(n, n);
    for &d in &qubit_indices {
        let v = db.vectors.column(d);
        projector += &v * v.adjoint();
    }
    Ok(TransitionTable {
        driven,
        omega_i,
        omega_o,
        dipoles_i: [dip(0, 0), dip(1, 0)],
        dipoles_o: [dip(0, 1), dip(1, 1)],
        delta_omega_i: omega_i[0] - omega_i[1],
        delta_omega_o: omega_o[0] - omega_o[1],
        qubit_indices,
        projector,
    })
}

/// Everything derived from one device: Hamiltonian, dressed basis,
/// transitions and the driven operator in the dressed basis.
#[derive(Debug, Clone)]
pub struct Device {
    pub params: DeviceParams,
    pub dressed: DressedBasis,
    pub transitions: TransitionTable,
    /// Lowering operator of the driven transmon in the dressed basis.
    pub drive_operator: CMatrix,
}

impl Device {
    pub fn new(params: &DeviceParams) -> Result<Self> {
        Self::with_driven(params, DrivenQubit::Two)
    }

    pub fn with_driven(params: &DeviceParams, driven: DrivenQubit) -> Result<Self> {
        let h0 = build_static_hamiltonian(params)?;
        let dressed = diagonalize_dressed(&h0, BasisLayout::of(params))?;
        let transitions = extract_transitions(&dressed, driven)?;
        let drive_operator = dressed.to_dressed(&lowering_operator(dressed.layout, driven.mode()));
        Ok(Device { params: params.clone(), dressed, transitions, drive_operator })
    }
}
