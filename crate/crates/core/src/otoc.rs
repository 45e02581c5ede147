//! Thermal out-of-time-order correlator
//!
//! ```text
//! F(t) = ½ (⟨V†(0) W†(t) V(0) W(t)⟩_β + h.c.)
//! ```
//!
//! evaluated exactly in the eigenbasis of one parity sector. With Ṽ = QᵀVQ
//! and W̃(t)_ab = e^{i(E_a − E_b)t} W̃_ab the trace becomes
//! F(t) = Re Σ_a w_a (Ṽ W̃(t) Ṽ W̃(t))_aa / Z. Only the phase factors are
//! complex; they are split into cosine and sine parts so every matrix
//! product stays real.

use std::sync::Arc;

use faer::Mat;

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::model::{observable_matrix, ModelParams, Observable, OperatorMatrix, Parity, SectorBasis};
use crate::spectra::{converge_cutoff, sector_spectrum, ConvergenceOptions, SpectralData};

/// Largest admissible Boltzmann weight above the certified levels, relative to Z.
pub const TAIL_WEIGHT_LIMIT: f64 = 1e-8;

/// Boltzmann weights of a sector spectrum. Weights are stored relative to
/// the lowest level, w_n = e^{−β(E_n − E_0)}, so large β cannot underflow;
/// [`ThermalEnsemble::partition`] restores the absolute Z = Σ e^{−βE_n}.
#[derive(Debug, Clone, PartialEq)]
pub struct ThermalEnsemble {
    pub beta: f64,
    pub weights: Vec<f64>,
    pub ground_energy: f64,
    /// Weight above the certified levels as a fraction of Z.
    pub tail_fraction: f64,
}

impl ThermalEnsemble {
    pub fn weight_sum(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn log_partition(&self) -> f64 {
        self.weight_sum().ln() - self.beta * self.ground_energy
    }

    pub fn partition(&self) -> f64 {
        self.log_partition().exp()
    }

    /// Normalized occupation probabilities.
    pub fn probabilities(&self) -> Vec<f64> {
        let z = self.weight_sum();
        self.weights.iter().map(|w| w / z).collect()
    }
}

fn relative_weights(levels: &[f64], beta: f64) -> Vec<f64> {
    let e0 = levels[0];
    levels.iter().map(|e| (-beta * (e - e0)).exp()).collect()
}

fn tail_fraction(weights: &[f64], certified: usize) -> f64 {
    let total: f64 = weights.iter().sum();
    let tail: f64 = weights[certified.min(weights.len())..].iter().sum();
    tail / total
}

/// Boltzmann ensemble over the whole sector spectrum; refuses spectra whose
/// uncertified levels carry more than [`TAIL_WEIGHT_LIMIT`] of Z.
pub fn thermal_ensemble(spec: &SpectralData, beta: f64) -> Result<ThermalEnsemble> {
    if !(beta >= 0.0 && beta.is_finite()) {
        return Err(Error::InvalidParams(format!("beta must be finite and non-negative, got {beta}")));
    }
    if spec.eigenvalues.is_empty() {
        return Err(Error::InsufficientData("empty spectrum".into()));
    }
    let weights = relative_weights(&spec.eigenvalues, beta);
    let tail = tail_fraction(&weights, spec.converged_count);
    if tail >= TAIL_WEIGHT_LIMIT {
        return Err(Error::ThermalTail { tail });
    }
    Ok(ThermalEnsemble {
        beta,
        ground_energy: spec.eigenvalues[0],
        weights,
        tail_fraction: tail,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct OtocSeries {
    pub times: Vec<f64>,
    pub f: Vec<f64>,
    /// 1 − F(t)/F(0).
    pub deficit: Vec<f64>,
    /// Largest |Im Tr(ρ V W(t) V W(t))| / |F(t)| over the series.
    pub imaginary_residue: f64,
    pub beta: f64,
}

struct EigenbasisOperators {
    energies: Vec<f64>,
    probabilities: Vec<f64>,
    v: Mat<f64>,
    w: Mat<f64>,
}

impl EigenbasisOperators {
    /// (Re, Im) of Σ_a p_a (Ṽ W̃(t) Ṽ W̃(t))_aa.
    fn trace(&self, t: f64) -> (f64, f64) {
        let d = self.energies.len();
        let e = &self.energies;
        let mut w_cos = Mat::<f64>::zeros(d, d);
        let mut w_sin = Mat::<f64>::zeros(d, d);
        for c in 0..d {
            for r in 0..d {
                let phase = (e[r] - e[c]) * t;
                let (s, co) = phase.sin_cos();
                let x = self.w[(r, c)];
                w_cos[(r, c)] = x * co;
                w_sin[(r, c)] = x * s;
            }
        }
        let m_re = &self.v * &w_cos;
        let m_im = &self.v * &w_sin;
        let (mut re, mut im) = (0.0, 0.0);
        for (a, &p) in self.probabilities.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            let (mut row_re, mut row_im) = (0.0, 0.0);
            for c in 0..d {
                let (xr, xi) = (m_re[(a, c)], m_im[(a, c)]);
                let (yr, yi) = (m_re[(c, a)], m_im[(c, a)]);
                row_re += xr * yr - xi * yi;
                row_im += xr * yi + xi * yr;
            }
            re += p * row_re;
            im += p * row_im;
        }
        (re, im)
    }
}

fn check_operator(spec: &SpectralData, op: &OperatorMatrix, name: &str) -> Result<()> {
    if !spec.basis.same_space(op.basis()) || op.dim() != spec.dim() {
        return Err(Error::BasisMismatch(format!(
            "{name} is a {}-dimensional operator, spectrum has dimension {}",
            op.dim(),
            spec.dim()
        )));
    }
    Ok(())
}

/// F(t) and 1 − F(t)/F(0) on the given time grid.
pub fn otoc_f(
    spec: &SpectralData,
    ensemble: &ThermalEnsemble,
    v: &OperatorMatrix,
    w: &OperatorMatrix,
    times: &[f64],
    exec: Execution,
) -> Result<OtocSeries> {
    let q = spec.vectors()?;
    check_operator(spec, v, "V")?;
    check_operator(spec, w, "W")?;
    if ensemble.weights.len() != spec.dim() {
        return Err(Error::BasisMismatch("ensemble and spectrum differ in size".into()));
    }
    let qt = q.transpose();
    let v_eig = qt * (v.entries() * q);
    let w_eig = if std::ptr::eq(v, w) {
        v_eig.clone()
    } else {
        qt * (w.entries() * q)
    };
    let ops = EigenbasisOperators {
        energies: spec.eigenvalues.clone(),
        probabilities: ensemble.probabilities(),
        v: v_eig,
        w: w_eig,
    };
    let (f0, _) = ops.trace(0.0);
    if f0 == 0.0 {
        return Err(Error::DegenerateOtoc);
    }
    let values = exec.map(times, |&t| if t == 0.0 { (f0, 0.0) } else { ops.trace(t) });
    let f: Vec<f64> = values.iter().map(|v| v.0).collect();
    let imaginary_residue = values
        .iter()
        .map(|(re, im)| if *re == 0.0 { im.abs() } else { (im / re).abs() })
        .fold(0.0, f64::max);
    let deficit = f.iter().map(|x| 1.0 - x / f0).collect();
    Ok(OtocSeries {
        times: times.to_vec(),
        f,
        deficit,
        imaginary_residue,
        beta: ensemble.beta,
    })
}

/// Settings for the end-to-end deficit pipeline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OtocOptions {
    pub beta: f64,
    pub time: f64,
    /// c in V = W = a†a + c.
    pub shift: f64,
    /// Half-width Δ of the averaging window [t − Δ, t + Δ]; 0 disables it.
    pub average_half_width: f64,
    pub average_points: usize,
    pub parity: Parity,
    pub convergence: ConvergenceOptions,
}

impl Default for OtocOptions {
    fn default() -> Self {
        OtocOptions {
            beta: 0.1,
            time: 100.0,
            shift: 100.0,
            average_half_width: 0.0,
            average_points: 11,
            parity: Parity::Positive,
            convergence: ConvergenceOptions::default(),
        }
    }
}

impl OtocOptions {
    pub fn sample_times(&self) -> Vec<f64> {
        if self.average_half_width <= 0.0 || self.average_points < 2 {
            return vec![self.time];
        }
        let n = self.average_points;
        let lo = self.time - self.average_half_width;
        let step = 2.0 * self.average_half_width / (n - 1) as f64;
        (0..n).map(|i| lo + i as f64 * step).collect()
    }
}

/// Smallest k such that levels k.. carry less than half the tail limit.
fn thermally_relevant_levels(levels: &[f64], beta: f64) -> usize {
    let weights = relative_weights(levels, beta);
    let total: f64 = weights.iter().sum();
    let mut tail = 0.0;
    for k in (0..weights.len()).rev() {
        tail += weights[k];
        if tail >= 0.5 * TAIL_WEIGHT_LIMIT * total {
            return k + 1;
        }
    }
    1
}

/// Sector spectrum with eigenvectors whose certified levels carry all but
/// [`TAIL_WEIGHT_LIMIT`] of the Boltzmann weight at `beta`. A fixed cutoff
/// is used as given, with every level counted.
pub fn thermal_spectrum(
    params: &ModelParams,
    parity: Parity,
    beta: f64,
    convergence: &ConvergenceOptions,
) -> Result<SpectralData> {
    if params.n_max().is_some() {
        return sector_spectrum(params, Some(parity), true);
    }
    let mut levels = 32;
    loop {
        let spec = converge_cutoff(params, Some(parity), levels, convergence, false)?;
        let needed = thermally_relevant_levels(&spec.eigenvalues, beta);
        if needed <= spec.converged_count {
            let mut full = sector_spectrum(&spec.params, Some(parity), true)?;
            full.converged_count = spec.converged_count;
            full.tolerance = spec.tolerance;
            return Ok(full);
        }
        levels = (needed + needed / 8).max(levels + 1);
    }
}

/// Result of [`otoc_deficit_at`].
#[derive(Debug, Clone, PartialEq)]
pub struct OtocPoint {
    pub deficit: f64,
    pub n_max: usize,
    pub dim: usize,
    pub certified_levels: usize,
    pub series: OtocSeries,
}

pub fn shifted_number(basis: &Arc<SectorBasis>, shift: f64) -> OperatorMatrix {
    observable_matrix(basis, Observable::NumberPlusShift(shift))
}

/// Series for V = W = a†a + shift on a certified thermal spectrum.
pub fn otoc_series(params: &ModelParams, options: &OtocOptions, times: &[f64], exec: Execution) -> Result<OtocPoint> {
    let spec = thermal_spectrum(params, options.parity, options.beta, &options.convergence)?;
    let ensemble = thermal_ensemble(&spec, options.beta)?;
    let v = shifted_number(&spec.basis, options.shift);
    let series = otoc_f(&spec, &ensemble, &v, &v, times, exec)?;
    let deficit = series.deficit.iter().sum::<f64>() / series.deficit.len().max(1) as f64;
    Ok(OtocPoint {
        deficit,
        n_max: spec.n_max(),
        dim: spec.dim(),
        certified_levels: spec.converged_count,
        series,
    })
}

/// 1 − F(t)/F(0) at a single time (or averaged over [t − Δ, t + Δ]).
pub fn otoc_deficit_at(params: &ModelParams, options: &OtocOptions, exec: Execution) -> Result<OtocPoint> {
    otoc_series(params, options, &options.sample_times(), exec)
}
