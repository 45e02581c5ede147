//! Exact diagonalization with Fock-cutoff convergence control.

mod band;

use std::sync::Arc;

use faer::{Mat, Side};

use crate::error::{Error, Result};
use crate::model::{build_hamiltonian, Cutoff, ModelParams, OperatorMatrix, Parity, SectorBasis};

/// Eigenvalues (ascending) and optionally eigenvectors of one sector.
#[derive(Debug, Clone)]
pub struct SpectralData {
    pub params: ModelParams,
    pub basis: Arc<SectorBasis>,
    pub eigenvalues: Vec<f64>,
    /// Columns aligned with `eigenvalues`.
    pub eigenvectors: Option<Mat<f64>>,
    /// Number of low-lying levels certified against the Fock truncation.
    pub converged_count: usize,
    /// Certification tolerance; `None` when the cutoff was fixed by hand.
    pub tolerance: Option<f64>,
}

impl SpectralData {
    pub fn parity(&self) -> Option<Parity> {
        self.basis.parity()
    }

    pub fn n_max(&self) -> usize {
        self.basis.n_max()
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn vectors(&self) -> Result<&Mat<f64>> {
        self.eigenvectors.as_ref().ok_or(Error::MissingEigenvectors)
    }
}

/// Options for [`converge_cutoff`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceOptions {
    pub tolerance: f64,
    pub growth: f64,
    pub ceiling: usize,
}

impl Default for ConvergenceOptions {
    fn default() -> Self {
        ConvergenceOptions {
            tolerance: 1e-8,
            growth: 1.5,
            ceiling: 5000,
        }
    }
}

// Below this size the banded path is not worth the extra pass.
const BANDED_MIN_DIM: usize = 64;

fn eigenvalues_only(matrix: &OperatorMatrix) -> Result<Vec<f64>> {
    let d = matrix.dim();
    let a = matrix.entries();
    let bandwidth = matrix.bandwidth();
    let failure = || Error::EigensolverFailure {
        dim: d,
        context: format!(
            "n_max = {}, bandwidth = {bandwidth}, params = {:?}",
            matrix.basis().n_max(),
            matrix.basis().params()
        ),
    };
    if (d >= BANDED_MIN_DIM && 4 * bandwidth < d) || bandwidth <= 1 {
        band::banded_eigenvalues(a, bandwidth).ok_or_else(failure)
    } else {
        a.self_adjoint_eigenvalues(Side::Lower).map_err(|_| failure())
    }
}

/// Full spectrum of a symmetric matrix. The result counts every level as
/// certified; truncation control is the job of [`converge_cutoff`].
pub fn diagonalize(matrix: &OperatorMatrix, want_vectors: bool) -> Result<SpectralData> {
    let d = matrix.dim();
    let (eigenvalues, eigenvectors) = if want_vectors {
        let evd = matrix
            .entries()
            .self_adjoint_eigen(Side::Lower)
            .map_err(|_| Error::EigensolverFailure {
                dim: d,
                context: format!("n_max = {}, with eigenvectors", matrix.basis().n_max()),
            })?;
        let values: Vec<f64> = (0..d).map(|i| evd.S()[i]).collect();
        (values, Some(evd.U().to_owned()))
    } else {
        (eigenvalues_only(matrix)?, None)
    };
    Ok(SpectralData {
        params: *matrix.basis().params(),
        basis: Arc::clone(matrix.basis()),
        eigenvalues,
        eigenvectors,
        converged_count: d,
        tolerance: None,
    })
}

/// Builds and diagonalizes H for one sector at an explicit cutoff.
pub fn sector_spectrum(params: &ModelParams, parity: Option<Parity>, want_vectors: bool) -> Result<SpectralData> {
    let basis = Arc::new(SectorBasis::enumerate(params, parity)?);
    diagonalize(&build_hamiltonian(&basis), want_vectors)
}

fn initial_cutoff(params: &ModelParams, levels: usize) -> usize {
    (4 * levels).div_ceil(params.spin.multiplicity()).max(1)
}

fn grow(n_max: usize, growth: f64) -> usize {
    ((n_max as f64 * growth).ceil() as usize).max(n_max + 1)
}

fn max_abs_diff(a: &[f64], b: &[f64], k: usize) -> f64 {
    a[..k].iter().zip(&b[..k]).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Raises n_max from ⌈4k/(2j+1)⌉ by the growth factor until the lowest `k`
/// eigenvalues of two successive cutoffs agree to the tolerance, and returns
/// the spectrum at the smaller cutoff of the agreeing pair.
///
/// A fixed cutoff in `params` is honoured as given: no growth, and the
/// result carries no certification tolerance.
pub fn converge_cutoff(
    params: &ModelParams,
    parity: Option<Parity>,
    levels: usize,
    options: &ConvergenceOptions,
    want_vectors: bool,
) -> Result<SpectralData> {
    let levels = levels.max(1);
    if let Cutoff::Fixed(_) = params.cutoff {
        let mut spec = sector_spectrum(params, parity, want_vectors)?;
        spec.converged_count = levels.min(spec.dim());
        return Ok(spec);
    }
    let mut n_max = initial_cutoff(params, levels);
    let mut previous: Option<(usize, Vec<f64>)> = None;
    let mut last_change = f64::INFINITY;
    loop {
        if n_max > options.ceiling {
            return Err(Error::CutoffCeiling {
                ceiling: options.ceiling,
                levels,
                last_change,
                tolerance: options.tolerance,
            });
        }
        let trial = params.with_n_max(n_max);
        let basis = Arc::new(SectorBasis::enumerate(&trial, parity)?);
        let values = eigenvalues_only(&build_hamiltonian(&basis))?;
        if values.len() >= levels {
            if let Some((prev_n_max, prev_values)) = &previous {
                last_change = max_abs_diff(prev_values, &values, levels);
                if last_change <= options.tolerance {
                    let certified = params.with_n_max(*prev_n_max);
                    let mut spec = if want_vectors {
                        sector_spectrum(&certified, parity, true)?
                    } else {
                        let basis = Arc::new(SectorBasis::enumerate(&certified, parity)?);
                        SpectralData {
                            params: certified,
                            basis,
                            eigenvalues: prev_values.clone(),
                            eigenvectors: None,
                            converged_count: levels,
                            tolerance: None,
                        }
                    };
                    spec.converged_count = levels;
                    spec.tolerance = Some(options.tolerance);
                    return Ok(spec);
                }
            }
            previous = Some((n_max, values));
        }
        n_max = grow(n_max, options.growth);
    }
}

/// Which sector holds the ground state, with the two sector minima.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParityVerdict {
    /// `None` when the sector minima agree within the convergence tolerance.
    pub ground: Option<Parity>,
    pub positive_minimum: f64,
    pub negative_minimum: f64,
}

pub fn ground_state_parity_check(params: &ModelParams, options: &ConvergenceOptions) -> Result<ParityVerdict> {
    let plus = converge_cutoff(params, Some(Parity::Positive), 1, options, false)?.eigenvalues[0];
    let minus = converge_cutoff(params, Some(Parity::Negative), 1, options, false)?.eigenvalues[0];
    let tie = (plus - minus).abs() <= options.tolerance;
    let ground = if tie {
        None
    } else if plus < minus {
        Some(Parity::Positive)
    } else {
        Some(Parity::Negative)
    };
    Ok(ParityVerdict {
        ground,
        positive_minimum: plus,
        negative_minimum: minus,
    })
}

/// ⟨gs| a†a |gs⟩ / j, with the ground state from the sector holding the
/// global minimum (the positive sector on a tie).
pub fn order_parameter(params: &ModelParams, options: &ConvergenceOptions) -> Result<f64> {
    let verdict = ground_state_parity_check(params, options)?;
    let sector = verdict.ground.unwrap_or(Parity::Positive);
    let spec = converge_cutoff(params, Some(sector), 1, options, true)?;
    let vectors = spec.vectors()?;
    let photons: f64 = spec
        .basis
        .states()
        .iter()
        .enumerate()
        .map(|(i, s)| vectors[(i, 0)] * vectors[(i, 0)] * s.n as f64)
        .sum();
    Ok(photons / params.j())
}
