//! Truncated parity-sector bases and matrix representations of the
//! anisotropic Dicke Hamiltonian
//!
//! ```text
//! H = ω a†a + ω₀ Jz + g₁/√(2j) (a†J₋ + aJ₊) + g₂/√(2j) (a†J₊ + aJ₋)
//! ```
//!
//! in the product basis |n⟩ ⊗ |j, m⟩. The parity Π = exp(iπ(a†a + Jz + j))
//! commutes with H, so every matrix here is built on one Π eigenspace (or on
//! the full space when the sector is `None`). States are ordered by ascending
//! n, then ascending m; with this ordering the Hamiltonian is banded with a
//! half-bandwidth of roughly 2j + 1.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use faer::Mat;

use crate::error::{Error, Result};

/// Pseudospin length j, stored as the integer 2j = N (number of atoms).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Spin {
    twice: u32,
}

impl Spin {
    pub fn from_twice(twice: u32) -> Result<Self> {
        if twice == 0 {
            return Err(Error::InvalidSpin("0".into()));
        }
        Ok(Spin { twice })
    }

    pub fn new(j: f64) -> Result<Self> {
        let twice = 2.0 * j;
        if !twice.is_finite() || twice < 1.0 || twice.fract() != 0.0 || twice > u32::MAX as f64 {
            return Err(Error::InvalidSpin(j.to_string()));
        }
        Ok(Spin { twice: twice as u32 })
    }

    pub fn twice(self) -> u32 {
        self.twice
    }

    pub fn value(self) -> f64 {
        self.twice as f64 / 2.0
    }

    /// Number of Jz eigenstates, 2j + 1.
    pub fn multiplicity(self) -> usize {
        self.twice as usize + 1
    }
}

impl fmt::Display for Spin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.twice % 2 == 0 {
            write!(f, "{}", self.twice / 2)
        } else {
            write!(f, "{}/2", self.twice)
        }
    }
}

impl FromStr for Spin {
    type Err = Error;

    /// Accepts `10`, `1.5` or `3/2`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if let Some((num, den)) = s.split_once('/') {
            let num: u32 = num.trim().parse().map_err(|_| Error::InvalidSpin(s.into()))?;
            return match den.trim() {
                "1" => Spin::from_twice(2 * num),
                "2" => Spin::from_twice(num),
                _ => Err(Error::InvalidSpin(s.into())),
            };
        }
        let j: f64 = s.parse().map_err(|_| Error::InvalidSpin(s.into()))?;
        Spin::new(j)
    }
}

/// Bosonic Fock-space truncation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Cutoff {
    /// Chosen by the convergence protocol in [`crate::spectra`].
    #[default]
    Auto,
    Fixed(usize),
}

impl fmt::Display for Cutoff {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cutoff::Auto => f.write_str("auto"),
            Cutoff::Fixed(n) => write!(f, "{n}"),
        }
    }
}

impl FromStr for Cutoff {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "auto" => Ok(Cutoff::Auto),
            other => other
                .parse()
                .map(Cutoff::Fixed)
                .map_err(|_| Error::Config(format!("invalid n_max `{other}` (expected auto or an integer)"))),
        }
    }
}

/// Eigenvalue of Π.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Parity {
    Positive,
    Negative,
}

impl Parity {
    pub fn sign(self) -> i32 {
        match self {
            Parity::Positive => 1,
            Parity::Negative => -1,
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            Parity::Positive => Parity::Negative,
            Parity::Negative => Parity::Positive,
        }
    }
}

impl fmt::Display for Parity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Parity::Positive => "+",
            Parity::Negative => "-",
        })
    }
}

impl FromStr for Parity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "+" | "+1" | "1" | "positive" | "even" => Ok(Parity::Positive),
            "-" | "-1" | "negative" | "odd" => Ok(Parity::Negative),
            other => Err(Error::Config(format!("invalid parity `{other}` (expected + or -)"))),
        }
    }
}

/// Physical couplings plus the Fock truncation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    pub omega: f64,
    pub omega0: f64,
    pub g1: f64,
    pub g2: f64,
    pub spin: Spin,
    pub cutoff: Cutoff,
}

impl ModelParams {
    pub fn new(omega: f64, omega0: f64, g1: f64, g2: f64, spin: Spin) -> Result<Self> {
        let params = ModelParams {
            omega,
            omega0,
            g1,
            g2,
            spin,
            cutoff: Cutoff::Auto,
        };
        params.validate()?;
        Ok(params)
    }

    /// Resonant model ω = ω₀ = 1 with the given couplings and j.
    pub fn resonant(g1: f64, g2: f64, j: f64) -> Result<Self> {
        Self::new(1.0, 1.0, g1, g2, Spin::new(j)?)
    }

    pub fn with_cutoff(mut self, cutoff: Cutoff) -> Self {
        self.cutoff = cutoff;
        self
    }

    pub fn with_n_max(self, n_max: usize) -> Self {
        self.with_cutoff(Cutoff::Fixed(n_max))
    }

    pub fn with_couplings(mut self, g1: f64, g2: f64) -> Self {
        self.g1 = g1;
        self.g2 = g2;
        self
    }

    pub fn j(&self) -> f64 {
        self.spin.value()
    }

    pub fn n_max(&self) -> Option<usize> {
        match self.cutoff {
            Cutoff::Auto => None,
            Cutoff::Fixed(n) => Some(n),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.omega.is_finite() && self.omega > 0.0) {
            return Err(Error::InvalidParams(format!("omega must be positive, got {}", self.omega)));
        }
        if !self.omega0.is_finite() {
            return Err(Error::InvalidParams(format!("omega0 must be finite, got {}", self.omega0)));
        }
        for (name, g) in [("g1", self.g1), ("g2", self.g2)] {
            if !(g.is_finite() && g >= 0.0) {
                return Err(Error::InvalidParams(format!("{name} must be non-negative, got {g}")));
            }
        }
        Ok(())
    }

    /// Location of the superradiant transition, g₁ + g₂ = √(ωω₀), when ω₀ > 0.
    pub fn qpt_coupling_sum(&self) -> Option<f64> {
        (self.omega0 > 0.0).then(|| (self.omega * self.omega0).sqrt())
    }
}

/// Image of the parameters under the spin rotation Jy → −Jy, Jz → −Jz,
/// which swaps the co- and counter-rotating couplings and flips ω₀.
pub fn symmetry_partner(params: &ModelParams) -> ModelParams {
    ModelParams {
        omega0: -params.omega0,
        g1: params.g2,
        g2: params.g1,
        ..*params
    }
}

/// |n⟩ ⊗ |j, m⟩ with m stored as 2m.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BasisState {
    pub n: u32,
    pub twice_m: i32,
}

impl BasisState {
    pub fn m(&self) -> f64 {
        self.twice_m as f64 / 2.0
    }

    /// n + m + j, the excitation number; always a non-negative integer.
    pub fn excitations(&self, spin: Spin) -> u32 {
        self.n + ((self.twice_m + spin.twice() as i32) / 2) as u32
    }

    pub fn parity(&self, spin: Spin) -> Parity {
        if self.excitations(spin) % 2 == 0 {
            Parity::Positive
        } else {
            Parity::Negative
        }
    }
}

/// Ordered basis of one parity sector (or of the full truncated space).
#[derive(Debug, Clone)]
pub struct SectorBasis {
    params: ModelParams,
    n_max: usize,
    parity: Option<Parity>,
    states: Vec<BasisState>,
    // position of (n, m + j) in `states`, row-major over n
    lookup: Vec<Option<u32>>,
}

impl SectorBasis {
    /// Canonically ordered basis of the requested sector; `None` selects
    /// both sectors.
    pub fn enumerate(params: &ModelParams, parity: Option<Parity>) -> Result<Self> {
        params.validate()?;
        let n_max = params.n_max().ok_or(Error::UnresolvedCutoff)?;
        let spin = params.spin;
        let mult = spin.multiplicity();
        let mut states = Vec::new();
        let mut lookup = vec![None; (n_max + 1) * mult];
        for n in 0..=n_max as u32 {
            for k in 0..mult as i32 {
                let state = BasisState {
                    n,
                    twice_m: 2 * k - spin.twice() as i32,
                };
                if parity.is_some_and(|p| state.parity(spin) != p) {
                    continue;
                }
                lookup[n as usize * mult + k as usize] = Some(states.len() as u32);
                states.push(state);
            }
        }
        Ok(SectorBasis {
            params: *params,
            n_max,
            parity,
            states,
            lookup,
        })
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn parity(&self) -> Option<Parity> {
        self.parity
    }

    pub fn states(&self) -> &[BasisState] {
        &self.states
    }

    pub fn dim(&self) -> usize {
        self.states.len()
    }

    pub fn index_of(&self, n: u32, twice_m: i32) -> Option<usize> {
        let spin = self.params.spin;
        if n as usize > self.n_max || twice_m.unsigned_abs() > spin.twice() {
            return None;
        }
        let k = ((twice_m + spin.twice() as i32) / 2) as usize;
        self.lookup[n as usize * spin.multiplicity() + k].map(|i| i as usize)
    }

    /// Same truncated space (spin, cutoff and sector); couplings may differ.
    pub fn same_space(&self, other: &SectorBasis) -> bool {
        self.params.spin == other.params.spin && self.n_max == other.n_max && self.parity == other.parity
    }
}

/// Dense real symmetric matrix on a sector basis.
#[derive(Debug, Clone)]
pub struct OperatorMatrix {
    basis: Arc<SectorBasis>,
    entries: Mat<f64>,
}

impl OperatorMatrix {
    pub fn from_entries(basis: Arc<SectorBasis>, entries: Mat<f64>) -> Result<Self> {
        let d = basis.dim();
        if entries.nrows() != d || entries.ncols() != d {
            return Err(Error::BasisMismatch(format!(
                "{}x{} matrix on a {d}-dimensional basis",
                entries.nrows(),
                entries.ncols()
            )));
        }
        Ok(OperatorMatrix { basis, entries })
    }

    pub fn basis(&self) -> &Arc<SectorBasis> {
        &self.basis
    }

    pub fn entries(&self) -> &Mat<f64> {
        &self.entries
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.entries[(row, col)]
    }

    /// Largest |i − j| with a nonzero entry.
    pub fn bandwidth(&self) -> usize {
        let d = self.dim();
        let mut band = 0;
        for col in 0..d {
            for row in (col + band + 1..d).rev() {
                if self.entries[(row, col)] != 0.0 {
                    band = row - col;
                    break;
                }
            }
        }
        band
    }

    pub fn max_abs(&self) -> f64 {
        let mut max = 0.0f64;
        for col in 0..self.dim() {
            for row in 0..self.dim() {
                max = max.max(self.entries[(row, col)].abs());
            }
        }
        max
    }

    pub fn is_symmetric(&self) -> bool {
        let d = self.dim();
        (0..d).all(|c| (c + 1..d).all(|r| self.entries[(r, c)] == self.entries[(c, r)]))
    }
}

fn ladder(spin: Spin, twice_m: i32, raise: bool) -> f64 {
    // √(j(j+1) − m(m±1)), in units where everything is kept in halves
    let j2 = spin.twice() as f64;
    let m2 = twice_m as f64;
    let shifted = if raise { m2 + 2.0 } else { m2 - 2.0 };
    ((j2 * (j2 + 2.0) - m2 * shifted) / 4.0).max(0.0).sqrt()
}

/// Matrix of H on `basis`. Ladder terms leaving [0, n_max] are dropped.
pub fn build_hamiltonian(basis: &Arc<SectorBasis>) -> OperatorMatrix {
    let p = basis.params();
    let spin = p.spin;
    let d = basis.dim();
    let scale = 1.0 / (spin.twice() as f64).sqrt();
    let mut h = Mat::<f64>::zeros(d, d);
    for (i, s) in basis.states().iter().enumerate() {
        h[(i, i)] = p.omega * s.n as f64 + p.omega0 * s.m();
        let boson = (s.n as f64 + 1.0).sqrt();
        // a†J₋ (g₁) and a†J₊ (g₂); the Hermitian partners fill the other triangle
        for (coupling, raise) in [(p.g1, false), (p.g2, true)] {
            if coupling == 0.0 {
                continue;
            }
            let target_m = if raise { s.twice_m + 2 } else { s.twice_m - 2 };
            if let Some(k) = basis.index_of(s.n + 1, target_m) {
                let value = coupling * scale * boson * ladder(spin, s.twice_m, raise);
                h[(k, i)] += value;
                h[(i, k)] += value;
            }
        }
    }
    OperatorMatrix {
        basis: Arc::clone(basis),
        entries: h,
    }
}

/// Diagonal observables in the Fock ⊗ Jz basis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Observable {
    Number,
    Jz,
    /// a†a + c.
    NumberPlusShift(f64),
}

impl Observable {
    pub fn value(&self, state: &BasisState) -> f64 {
        match *self {
            Observable::Number => state.n as f64,
            Observable::Jz => state.m(),
            Observable::NumberPlusShift(c) => state.n as f64 + c,
        }
    }
}

impl fmt::Display for Observable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Observable::Number => f.write_str("number"),
            Observable::Jz => f.write_str("jz"),
            Observable::NumberPlusShift(c) => write!(f, "number+{c}"),
        }
    }
}

impl FromStr for Observable {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        match t {
            "number" => Ok(Observable::Number),
            "jz" => Ok(Observable::Jz),
            "number_plus_shift" => Ok(Observable::NumberPlusShift(100.0)),
            _ => t
                .strip_prefix("number+")
                .and_then(|c| c.parse().ok())
                .map(Observable::NumberPlusShift)
                .ok_or_else(|| Error::UnsupportedObservable(s.to_string())),
        }
    }
}

pub fn observable_matrix(basis: &Arc<SectorBasis>, which: Observable) -> OperatorMatrix {
    let d = basis.dim();
    let mut m = Mat::<f64>::zeros(d, d);
    for (i, s) in basis.states().iter().enumerate() {
        m[(i, i)] = which.value(s);
    }
    OperatorMatrix {
        basis: Arc::clone(basis),
        entries: m,
    }
}

/// Excitation number n + m + j, conserved when g₂ = 0.
pub fn excitation_matrix(basis: &Arc<SectorBasis>) -> OperatorMatrix {
    let spin = basis.params().spin;
    let d = basis.dim();
    let mut m = Mat::<f64>::zeros(d, d);
    for (i, s) in basis.states().iter().enumerate() {
        m[(i, i)] = s.excitations(spin) as f64;
    }
    OperatorMatrix {
        basis: Arc::clone(basis),
        entries: m,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn basis(j: f64, n_max: usize, parity: Option<Parity>, g1: f64, g2: f64) -> Arc<SectorBasis> {
        let p = ModelParams::resonant(g1, g2, j).unwrap().with_n_max(n_max);
        Arc::new(SectorBasis::enumerate(&p, parity).unwrap())
    }

    #[test]
    fn spin_parsing() {
        assert_eq!("1/2".parse::<Spin>().unwrap().twice(), 1);
        assert_eq!("3/2".parse::<Spin>().unwrap().twice(), 3);
        assert_eq!("10".parse::<Spin>().unwrap().twice(), 20);
        assert_eq!("2.5".parse::<Spin>().unwrap().twice(), 5);
        assert!("0".parse::<Spin>().is_err());
        assert!("0.3".parse::<Spin>().is_err());
        assert!("-1".parse::<Spin>().is_err());
        assert!(Spin::new(0.75).is_err());
        assert_eq!(Spin::new(1.5).unwrap().to_string(), "3/2");
    }

    #[test]
    fn smallest_sectors() {
        let plus = basis(0.5, 1, Some(Parity::Positive), 0.0, 0.0);
        assert_eq!(
            plus.states(),
            &[BasisState { n: 0, twice_m: -1 }, BasisState { n: 1, twice_m: 1 }]
        );
        let minus = basis(0.5, 1, Some(Parity::Negative), 0.0, 0.0);
        assert_eq!(
            minus.states(),
            &[BasisState { n: 0, twice_m: 1 }, BasisState { n: 1, twice_m: -1 }]
        );
    }

    #[test]
    fn sector_dimension_matches_enumeration() {
        let plus = basis(10.0, 400, Some(Parity::Positive), 0.0, 0.0);
        // independent count over the full 401 x 21 grid
        let mut count = 0;
        for n in 0..=400i64 {
            for k in 0..=20i64 {
                if (n + k) % 2 == 0 {
                    count += 1;
                }
            }
        }
        assert_eq!(plus.dim(), count);
        assert_eq!(plus.dim(), 4211);
        let minus = basis(10.0, 400, Some(Parity::Negative), 0.0, 0.0);
        assert_eq!(plus.dim() + minus.dim(), 401 * 21);
    }

    #[test]
    fn missing_cutoff_is_rejected() {
        let p = ModelParams::resonant(0.1, 0.1, 1.0).unwrap();
        assert!(matches!(
            SectorBasis::enumerate(&p, Some(Parity::Positive)),
            Err(Error::UnresolvedCutoff)
        ));
    }

    #[test]
    fn single_counter_rotating_element() {
        let b = basis(0.5, 1, Some(Parity::Positive), 0.37, 0.81);
        let h = build_hamiltonian(&b);
        // ⟨1,+1/2|H|0,−1/2⟩ = g₂
        assert_eq!(h.get(1, 0), 0.81);
        assert_eq!(h.get(0, 0), -0.5);
        assert_eq!(h.get(1, 1), 1.5);
    }

    #[test]
    fn uncoupled_model_is_diagonal() {
        let b = basis(2.0, 6, None, 0.0, 0.0);
        let h = build_hamiltonian(&b);
        for (i, s) in b.states().iter().enumerate() {
            for k in 0..b.dim() {
                let expected = if i == k { s.n as f64 + s.m() } else { 0.0 };
                assert_eq!(h.get(i, k), expected);
            }
        }
    }

    #[test]
    fn diagonal_observables() {
        let b = basis(0.5, 1, Some(Parity::Positive), 0.0, 0.0);
        let diag = |o: Observable| {
            let m = observable_matrix(&b, o);
            (m.get(0, 0), m.get(1, 1), m.get(0, 1))
        };
        assert_eq!(diag(Observable::Number), (0.0, 1.0, 0.0));
        assert_eq!(diag(Observable::NumberPlusShift(100.0)), (100.0, 101.0, 0.0));
        assert_eq!(diag(Observable::Jz), (-0.5, 0.5, 0.0));
        assert!("spin_x".parse::<Observable>().is_err());
        assert_eq!("number+200".parse::<Observable>().unwrap(), Observable::NumberPlusShift(200.0));
    }

    #[test]
    fn partner_swaps_couplings() {
        let p = ModelParams::resonant(0.3, 0.7, 1.0).unwrap();
        let q = symmetry_partner(&p);
        assert_eq!((q.omega, q.omega0, q.g1, q.g2), (1.0, -1.0, 0.7, 0.3));
        let d = symmetry_partner(&ModelParams::resonant(0.4, 0.4, 1.0).unwrap());
        assert_eq!((d.omega0, d.g1, d.g2), (-1.0, 0.4, 0.4));
    }

    #[test]
    fn parity_blocks_decouple() {
        let b = basis(1.5, 8, None, 0.43, 0.61);
        let h = build_hamiltonian(&b);
        let spin = b.params().spin;
        for (i, si) in b.states().iter().enumerate() {
            for (k, sk) in b.states().iter().enumerate() {
                if si.parity(spin) != sk.parity(spin) {
                    assert_eq!(h.get(i, k), 0.0);
                }
            }
        }
        assert!(h.is_symmetric());
    }

    #[test]
    fn dicke_line_merges_both_terms() {
        let g = 0.37;
        let b = basis(2.0, 10, Some(Parity::Positive), g, g);
        let h = build_hamiltonian(&b);
        // Dicke coupling g/√(2j)(a + a†)(J₊ + J₋) written out directly
        let j = 2.0f64;
        for (i, si) in b.states().iter().enumerate() {
            for (k, sk) in b.states().iter().enumerate() {
                let (ni, mi, nk, mk) = (si.n as f64, si.m(), sk.n as f64, sk.m());
                let boson = if nk == ni + 1.0 {
                    nk.sqrt()
                } else if ni == nk + 1.0 {
                    ni.sqrt()
                } else {
                    0.0
                };
                let spin = if (mk - mi - 1.0).abs() < 1e-12 {
                    (j * (j + 1.0) - mi * (mi + 1.0)).sqrt()
                } else if (mi - mk - 1.0).abs() < 1e-12 {
                    (j * (j + 1.0) - mi * (mi - 1.0)).sqrt()
                } else {
                    0.0
                };
                let mut expected = g / (2.0 * j).sqrt() * boson * spin;
                if i == k {
                    expected += ni + mi;
                }
                assert!((h.get(i, k) - expected).abs() < 1e-14, "({i},{k})");
            }
        }
    }

    #[test]
    fn rotating_wave_conserves_excitations() {
        let n_max = 12;
        let b = basis(2.5, n_max, Some(Parity::Negative), 0.8, 0.0);
        let h = build_hamiltonian(&b);
        let x = excitation_matrix(&b);
        let comm = h.entries() * x.entries() - x.entries() * h.entries();
        // rows/cols touching the truncation edge are exempt
        for (i, si) in b.states().iter().enumerate() {
            for (k, sk) in b.states().iter().enumerate() {
                if (si.n as usize) < n_max && (sk.n as usize) < n_max {
                    assert_eq!(comm[(i, k)], 0.0);
                }
            }
        }
    }

    #[test]
    fn bandwidth_tracks_spin_multiplicity() {
        let b = basis(10.0, 30, Some(Parity::Positive), 0.5, 0.5);
        let h = build_hamiltonian(&b);
        assert!(h.bandwidth() <= 22 && h.bandwidth() >= 10, "{}", h.bandwidth());
    }
}
