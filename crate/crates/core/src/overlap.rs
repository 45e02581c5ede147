//! Maximum squared overlap of each eigenstate of a target Hamiltonian with
//! the eigenspaces of an integrable reference (the Hose-Taylor measure).
//!
//! Reference levels closer than the degeneracy tolerance are grouped into
//! one eigenspace and overlaps are squared projection norms onto whole
//! eigenspaces, so the result does not depend on how a degenerate reference
//! eigenbasis happens to be chosen.

use faer::Mat;

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::model::{ModelParams, Parity};
use crate::spectra::{converge_cutoff, sector_spectrum, ConvergenceOptions, SpectralData};

#[derive(Debug, Clone, PartialEq)]
pub struct OverlapResult {
    pub reference: ModelParams,
    pub target: ModelParams,
    pub target_energies: Vec<f64>,
    /// maxᵢ ‖P_i |n₂⟩‖² per target state, ascending target energy.
    pub max_overlap: Vec<f64>,
    /// Reference eigenspace attaining the maximum.
    pub eigenspace_index: Vec<usize>,
    /// Σᵢ ‖P_i |n₂⟩‖², which is 1 for a complete reference basis.
    pub completeness: Vec<f64>,
    pub degeneracy_tolerance: f64,
    pub eigenspace_count: usize,
}

/// Consecutive ascending levels within `tol` share a group. Returns the
/// group index of every level.
pub fn group_eigenspaces(levels: &[f64], tol: f64) -> Vec<usize> {
    let mut groups = Vec::with_capacity(levels.len());
    let mut current = 0;
    for (i, e) in levels.iter().enumerate() {
        if i > 0 && e - levels[i - 1] > tol {
            current += 1;
        }
        groups.push(current);
    }
    groups
}

/// Default grouping tolerance: 1e-9 of the reference spectral width.
pub fn default_degeneracy_tolerance(levels: &[f64]) -> f64 {
    match (levels.first(), levels.last()) {
        (Some(lo), Some(hi)) => 1e-9 * (hi - lo).abs().max(f64::MIN_POSITIVE),
        _ => 0.0,
    }
}

/// Overlaps for the lowest `target.converged_count` target states.
pub fn max_overlap(
    reference: &SpectralData,
    target: &SpectralData,
    degeneracy_tol: Option<f64>,
    exec: Execution,
) -> Result<OverlapResult> {
    let q_ref = reference.vectors()?;
    let q_tgt = target.vectors()?;
    if !reference.basis.same_space(&target.basis) {
        return Err(Error::BasisMismatch(format!(
            "reference (j = {}, n_max = {}, parity {:?}) vs target (j = {}, n_max = {}, parity {:?})",
            reference.params.spin,
            reference.n_max(),
            reference.parity(),
            target.params.spin,
            target.n_max(),
            target.parity()
        )));
    }
    let tol = degeneracy_tol.unwrap_or_else(|| default_degeneracy_tolerance(&reference.eigenvalues));
    let groups = group_eigenspaces(&reference.eigenvalues, tol);
    let group_count = groups.last().map_or(0, |g| g + 1);
    let states = target.converged_count.min(target.dim());
    let amplitudes: Mat<f64> = q_ref.transpose() * q_tgt.subcols(0, states);

    let per_state = exec.map_range(states, |col| {
        let mut weight = vec![0.0f64; group_count];
        for (row, &g) in groups.iter().enumerate() {
            let a = amplitudes[(row, col)];
            weight[g] += a * a;
        }
        let (best, value) = weight
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (g, &w)| if w > acc.1 { (g, w) } else { acc });
        (value, best, weight.iter().sum::<f64>())
    });

    Ok(OverlapResult {
        reference: reference.params,
        target: target.params,
        target_energies: target.eigenvalues[..states].to_vec(),
        max_overlap: per_state.iter().map(|s| s.0).collect(),
        eigenspace_index: per_state.iter().map(|s| s.1).collect(),
        completeness: per_state.iter().map(|s| s.2).collect(),
        degeneracy_tolerance: tol,
        eigenspace_count: group_count,
    })
}

/// Fraction of target states whose largest overlap exceeds `threshold`
/// (1/2 for the Hose-Taylor criterion).
pub fn hose_taylor_fraction(result: &OverlapResult, threshold: f64) -> f64 {
    if result.max_overlap.is_empty() {
        return 0.0;
    }
    let above = result.max_overlap.iter().filter(|&&m| m > threshold).count();
    above as f64 / result.max_overlap.len() as f64
}

/// Reference and target spectra with eigenvectors on a common cutoff: each
/// auto cutoff is converged for the lowest `levels` states and the larger
/// one is imposed on both.
pub fn paired_spectra(
    reference: &ModelParams,
    target: &ModelParams,
    parity: Parity,
    levels: usize,
    convergence: &ConvergenceOptions,
) -> Result<(SpectralData, SpectralData)> {
    let resolve = |p: &ModelParams| -> Result<usize> {
        match p.n_max() {
            Some(n) => Ok(n),
            None => Ok(converge_cutoff(p, Some(parity), levels, convergence, false)?.n_max()),
        }
    };
    let n_max = resolve(reference)?.max(resolve(target)?);
    let mut reference = sector_spectrum(&reference.with_n_max(n_max), Some(parity), true)?;
    let mut target = sector_spectrum(&target.with_n_max(n_max), Some(parity), true)?;
    reference.converged_count = levels.min(reference.dim());
    target.converged_count = levels.min(target.dim());
    Ok((reference, target))
}

#[cfg(test)]
mod tests {
    use super::*;
    use faer::linalg::solvers::Qr;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn with_all_states(mut s: SpectralData) -> SpectralData {
        s.converged_count = s.dim();
        s
    }

    #[test]
    fn grouping() {
        assert_eq!(group_eigenspaces(&[0.0, 0.0, 1.0, 1.0 + 1e-12, 2.0], 1e-9), vec![0, 0, 1, 1, 2]);
        assert_eq!(group_eigenspaces(&[], 1e-9), Vec::<usize>::new());
    }

    #[test]
    fn self_overlap_is_one_even_when_degenerate() {
        for (g1, g2) in [(0.0, 0.0), (0.4, 0.7)] {
            let p = ModelParams::resonant(g1, g2, 2.0).unwrap().with_n_max(20);
            let s = with_all_states(sector_spectrum(&p, Some(Parity::Positive), true).unwrap());
            let r = max_overlap(&s, &s, None, Execution::Sequential).unwrap();
            assert!(r.max_overlap.iter().all(|&m| (m - 1.0).abs() < 1e-10));
            assert!(r.completeness.iter().all(|&c| (c - 1.0).abs() < 1e-10));
            assert_eq!(hose_taylor_fraction(&r, 0.5), 1.0);
        }
    }

    #[test]
    fn weak_coupling_stays_close_to_reference() {
        let base = ModelParams::resonant(0.0, 0.0, 2.0).unwrap().with_n_max(20);
        let a = with_all_states(sector_spectrum(&base, Some(Parity::Positive), true).unwrap());
        let mut b = sector_spectrum(&base.with_couplings(1e-6, 1e-6), Some(Parity::Positive), true).unwrap();
        b.converged_count = 60;
        let r = max_overlap(&a, &b, None, Execution::Sequential).unwrap();
        assert!(r.max_overlap.iter().all(|&m| m > 0.999));
    }

    #[test]
    fn degenerate_rotation_does_not_change_overlaps() {
        let base = ModelParams::resonant(0.0, 0.0, 1.5).unwrap().with_n_max(16);
        let reference = with_all_states(sector_spectrum(&base, Some(Parity::Positive), true).unwrap());
        let target = with_all_states(sector_spectrum(&base.with_couplings(0.3, 0.2), Some(Parity::Positive), true).unwrap());
        let before = max_overlap(&reference, &target, None, Execution::Sequential).unwrap();

        // rotate every degenerate block of the reference by a random orthogonal matrix
        let groups = group_eigenspaces(&reference.eigenvalues, 1e-9);
        let q = reference.vectors().unwrap().clone();
        let mut rotated = q.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut start = 0;
        while start < groups.len() {
            let end = groups.iter().rposition(|&g| g == groups[start]).unwrap() + 1;
            let k = end - start;
            let gauss = Mat::<f64>::from_fn(k, k, |_, _| StandardNormal.sample(&mut rng));
            let o = Qr::new(gauss.as_ref()).compute_Q();
            let block = q.subcols(start, k) * &o;
            rotated.subcols_mut(start, k).copy_from(&block);
            start = end;
        }
        let mut alt = reference.clone();
        alt.eigenvectors = Some(rotated);
        let after = max_overlap(&alt, &target, None, Execution::Sequential).unwrap();
        for (x, y) in before.max_overlap.iter().zip(&after.max_overlap) {
            assert!((x - y).abs() < 1e-10);
        }
    }

    #[test]
    fn random_rotation_destroys_overlaps() {
        let d = 1000;
        let p = ModelParams::resonant(0.0, 0.0, 0.5).unwrap().with_n_max(d - 1);
        // a nondegenerate reference on a d-dimensional sector
        let mut reference = with_all_states(sector_spectrum(&p, Some(Parity::Positive), true).unwrap());
        assert_eq!(reference.dim(), d);
        reference.eigenvalues = (0..d).map(|i| i as f64).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let gauss = Mat::<f64>::from_fn(d, d, |_, _| StandardNormal.sample(&mut rng));
        let mut target = reference.clone();
        target.eigenvectors = Some(Qr::new(gauss.as_ref()).compute_Q());
        let r = max_overlap(&reference, &target, None, Execution::default()).unwrap();
        assert_eq!(hose_taylor_fraction(&r, 0.5), 0.0);
        assert!(r.completeness.iter().all(|&c| (c - 1.0).abs() < 1e-10));
    }

    #[test]
    fn mismatched_bases_are_rejected() {
        let p = ModelParams::resonant(0.1, 0.1, 1.0).unwrap();
        let a = sector_spectrum(&p.with_n_max(10), Some(Parity::Positive), true).unwrap();
        let b = sector_spectrum(&p.with_n_max(11), Some(Parity::Positive), true).unwrap();
        assert!(matches!(max_overlap(&a, &b, None, Execution::Sequential), Err(Error::BasisMismatch(_))));
        let c = sector_spectrum(&p.with_n_max(10), Some(Parity::Positive), false).unwrap();
        assert!(matches!(max_overlap(&a, &c, None, Execution::Sequential), Err(Error::MissingEigenvectors)));
    }

    #[test]
    fn pairing_imposes_the_larger_cutoff() {
        let r = ModelParams::resonant(0.0, 0.0, 2.0).unwrap();
        let t = r.with_couplings(0.6, 0.6);
        let (a, b) = paired_spectra(&r, &t, Parity::Positive, 40, &ConvergenceOptions::default()).unwrap();
        assert_eq!(a.n_max(), b.n_max());
        let own = converge_cutoff(&t, Some(Parity::Positive), 40, &ConvergenceOptions::default(), false).unwrap();
        assert_eq!(b.n_max(), own.n_max());
        assert_eq!(b.converged_count, 40);
    }
}
