//! Level-spacing statistics: spacing series, histograms against the
//! Poisson and Wigner-Dyson laws, the consecutive-spacing ratio ⟨r⟩ and the
//! first-order cluster energies near zero coupling.

use std::f64::consts::{LN_2, PI};

use faer::{Mat, Side};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, StandardNormal};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::model::ModelParams;
use crate::spectra::SpectralData;

/// ⟨r⟩ for uncorrelated (Poisson) levels, 2 ln 2 − 1.
pub const POISSON_MEAN_R: f64 = 2.0 * LN_2 - 1.0;
/// ⟨r⟩ for the Gaussian orthogonal ensemble.
pub const GOE_MEAN_R: f64 = 0.5307;

/// Half-open range of level indices `lo..hi`, optionally cut at E <= Λ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevelWindow {
    pub lo: usize,
    pub hi: usize,
    pub ceiling: Option<f64>,
}

impl Default for LevelWindow {
    fn default() -> Self {
        LevelWindow {
            lo: 200,
            hi: 1000,
            ceiling: None,
        }
    }
}

impl LevelWindow {
    pub fn new(lo: usize, hi: usize) -> Self {
        LevelWindow { lo, hi, ceiling: None }
    }

    pub fn with_ceiling(mut self, ceiling: Option<f64>) -> Self {
        self.ceiling = ceiling;
        self
    }

    /// Levels of `spec` inside the window. Refuses uncertified levels.
    pub fn select<'a>(&self, spec: &'a SpectralData) -> Result<&'a [f64]> {
        if self.lo >= self.hi || self.hi > spec.converged_count || self.hi > spec.dim() {
            return Err(Error::WindowOutOfRange {
                lo: self.lo,
                hi: self.hi,
                available: spec.converged_count.min(spec.dim()),
            });
        }
        let levels = &spec.eigenvalues[self.lo..self.hi];
        Ok(match self.ceiling {
            Some(cap) => {
                let keep = levels.partition_point(|&e| e <= cap);
                &levels[..keep]
            }
            None => levels,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Unfolding {
    /// Divide by the window's mean spacing.
    #[default]
    Global,
    /// Divide each spacing by the mean of the 2w+1 spacings around it, then
    /// restore unit mean.
    Local { half_width: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpacingSeries {
    pub raw: Vec<f64>,
    pub normalized: Vec<f64>,
}

fn spacings(levels: &[f64]) -> Vec<f64> {
    levels.windows(2).map(|w| w[1] - w[0]).collect()
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn unit_mean(xs: &[f64]) -> Result<Vec<f64>> {
    let m = mean(xs);
    if !(m > 0.0) {
        return Err(Error::InsufficientData("all spacings vanish".into()));
    }
    Ok(xs.iter().map(|x| x / m).collect())
}

pub fn spacing_series(spec: &SpectralData, window: &LevelWindow, unfolding: Unfolding) -> Result<SpacingSeries> {
    let levels = window.select(spec)?;
    spacing_series_from_levels(levels, unfolding)
}

pub fn spacing_series_from_levels(levels: &[f64], unfolding: Unfolding) -> Result<SpacingSeries> {
    if levels.len() < 2 {
        return Err(Error::InsufficientData(format!("{} level(s) in window", levels.len())));
    }
    let raw = spacings(levels);
    let normalized = match unfolding {
        Unfolding::Global => unit_mean(&raw)?,
        Unfolding::Local { half_width } => {
            let n = raw.len();
            let local: Vec<f64> = (0..n)
                .map(|i| {
                    let lo = i.saturating_sub(half_width);
                    let hi = (i + half_width + 1).min(n);
                    let m = mean(&raw[lo..hi]);
                    if m > 0.0 {
                        raw[i] / m
                    } else {
                        0.0
                    }
                })
                .collect();
            unit_mean(&local)?
        }
    };
    Ok(SpacingSeries { raw, normalized })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReferenceDistribution {
    Poisson,
    WignerDyson,
}

impl ReferenceDistribution {
    pub fn pdf(self, s: f64) -> f64 {
        match self {
            ReferenceDistribution::Poisson => (-s).exp(),
            ReferenceDistribution::WignerDyson => PI / 2.0 * s * (-PI * s * s / 4.0).exp(),
        }
    }

    pub fn cdf(self, s: f64) -> f64 {
        if s <= 0.0 {
            return 0.0;
        }
        match self {
            ReferenceDistribution::Poisson => -(-s).exp_m1(),
            ReferenceDistribution::WignerDyson => -(-PI * s * s / 4.0).exp_m1(),
        }
    }
}

/// Reference spacing density at s >= 0.
pub fn reference_pdf(kind: ReferenceDistribution, s: f64) -> Result<f64> {
    if s < 0.0 || s.is_nan() {
        return Err(Error::NegativeSpacing(s));
    }
    Ok(kind.pdf(s))
}

/// Kolmogorov-Smirnov distance between the sample and a reference law.
pub fn ks_distance(samples: &[f64], kind: ReferenceDistribution) -> f64 {
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &s)| {
            let f = kind.cdf(s);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

/// Uniform binning of [lo, hi] into `bins` cells.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HistogramSpec {
    pub lo: f64,
    pub hi: f64,
    pub bins: usize,
}

impl Default for HistogramSpec {
    fn default() -> Self {
        HistogramSpec {
            lo: 0.0,
            hi: 4.0,
            bins: 30,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HistogramResult {
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
    /// Counts scaled to unit area over the binned range.
    pub density: Vec<f64>,
    /// Samples falling outside [lo, hi].
    pub outside: usize,
}

impl HistogramResult {
    pub fn bin_width(&self) -> f64 {
        self.edges[1] - self.edges[0]
    }

    pub fn centers(&self) -> impl Iterator<Item = f64> + '_ {
        self.edges.windows(2).map(|w| 0.5 * (w[0] + w[1]))
    }
}

/// Bins are left-closed, right-open, except the last which is closed.
pub fn histogram(samples: &[f64], spec: &HistogramSpec) -> Result<HistogramResult> {
    if samples.is_empty() {
        return Err(Error::InsufficientData("empty spacing series".into()));
    }
    if spec.bins == 0 || !(spec.hi > spec.lo) {
        return Err(Error::Config(format!("invalid histogram range {spec:?}")));
    }
    let width = (spec.hi - spec.lo) / spec.bins as f64;
    let edges: Vec<f64> = (0..=spec.bins).map(|i| spec.lo + i as f64 * width).collect();
    let mut counts = vec![0usize; spec.bins];
    let mut outside = 0;
    for &s in samples {
        if s < spec.lo || s > spec.hi || s.is_nan() {
            outside += 1;
            continue;
        }
        let bin = (((s - spec.lo) / width) as usize).min(spec.bins - 1);
        counts[bin] += 1;
    }
    let inside = samples.len() - outside;
    let density = counts
        .iter()
        .map(|&c| if inside == 0 { 0.0 } else { c as f64 / (inside as f64 * width) })
        .collect();
    Ok(HistogramResult {
        edges,
        counts,
        density,
        outside,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RStatResult {
    pub ratios: Vec<f64>,
    pub mean: f64,
    pub count: usize,
    /// Ratios that involved an exactly vanishing spacing (recorded as 0).
    pub zero_spacings: usize,
}

/// rₙ = min(sₙ/sₙ₋₁, sₙ₋₁/sₙ) over consecutive spacings.
pub fn r_statistic_from_spacings(spacings: &[f64]) -> Result<RStatResult> {
    if spacings.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "{} spacing(s); the ratio needs at least 2",
            spacings.len()
        )));
    }
    let mut zero_spacings = 0;
    let ratios: Vec<f64> = spacings
        .windows(2)
        .map(|w| {
            let (a, b) = (w[0], w[1]);
            if a == 0.0 || b == 0.0 {
                zero_spacings += 1;
                0.0
            } else {
                (a / b).min(b / a)
            }
        })
        .collect();
    Ok(RStatResult {
        mean: mean(&ratios),
        count: ratios.len(),
        ratios,
        zero_spacings,
    })
}

pub fn r_statistic_from_levels(levels: &[f64]) -> Result<RStatResult> {
    r_statistic_from_spacings(&spacings(levels))
}

pub fn r_statistic(spec: &SpectralData, window: &LevelWindow) -> Result<RStatResult> {
    r_statistic_from_levels(window.select(spec)?)
}

/// Cluster energies ω(n+m) and ω(n+m) ± g₁√(j+j²+m−m²+2(j+j²−m²)n)/√(2j)
/// of |n, m⟩ and its near-degenerate partners |n±1, m∓1⟩, to first order in
/// the couplings at resonance. Returned in ascending order.
pub fn perturbative_cluster_energies(params: &ModelParams, n: u32, m: f64) -> Result<[f64; 3]> {
    if params.omega != params.omega0 {
        return Err(Error::OffResonance {
            omega: params.omega,
            omega0: params.omega0,
        });
    }
    let j = params.j();
    if m.abs() > j || (m + j).fract() != 0.0 {
        return Err(Error::InvalidParams(format!("m = {m} is not a projection of j = {j}")));
    }
    let n = n as f64;
    let center = params.omega * (n + m);
    let radicand = j + j * j + m - m * m + 2.0 * (j + j * j - m * m) * n;
    let split = params.g1 * radicand.max(0.0).sqrt() / (2.0 * j).sqrt();
    Ok([center - split, center, center + split])
}

/// `count` independent unit-mean exponential spacings.
pub fn sample_poisson_spacings(count: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| rng.sample::<f64, _>(Exp1)).collect()
}

/// Real symmetric Gaussian matrix: diagonal variance 1, off-diagonal 1/2.
pub fn sample_goe(size: usize, rng: &mut impl Rng) -> Mat<f64> {
    let mut a = Mat::<f64>::zeros(size, size);
    let off = 0.5f64.sqrt();
    for c in 0..size {
        a[(c, c)] = rng.sample::<f64, _>(StandardNormal);
        for r in c + 1..size {
            let v = off * rng.sample::<f64, _>(StandardNormal);
            a[(r, c)] = v;
            a[(c, r)] = v;
        }
    }
    a
}

/// Pooled spacing ratios from the central half of the spectra of `samples`
/// GOE matrices. Sample `i` draws from its own ChaCha stream, so the result
/// does not depend on the execution mode.
pub fn goe_bulk_ratios(size: usize, samples: usize, seed: u64, exec: Execution) -> Result<RStatResult> {
    let per_sample = exec.map_range(samples, |i| -> Result<RStatResult> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(i as u64);
        let a = sample_goe(size, &mut rng);
        let levels = a
            .self_adjoint_eigenvalues(Side::Lower)
            .map_err(|_| Error::EigensolverFailure {
                dim: size,
                context: "GOE sample".into(),
            })?;
        r_statistic_from_levels(&levels[size / 4..size - size / 4])
    });
    let mut ratios = Vec::new();
    let mut zero_spacings = 0;
    for r in per_sample {
        let r = r?;
        zero_spacings += r.zero_spacings;
        ratios.extend(r.ratios);
    }
    if ratios.is_empty() {
        return Err(Error::InsufficientData("no GOE samples".into()));
    }
    Ok(RStatResult {
        mean: mean(&ratios),
        count: ratios.len(),
        ratios,
        zero_spacings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Parity, SectorBasis};
    use crate::spectra::{diagonalize, sector_spectrum};
    use proptest::prelude::*;
    use std::sync::Arc;

    fn fake_spectrum(levels: &[f64]) -> SpectralData {
        let p = ModelParams::resonant(0.0, 0.0, 0.5).unwrap().with_n_max(levels.len() - 1);
        let basis = Arc::new(SectorBasis::enumerate(&p, Some(Parity::Positive)).unwrap());
        let mut m = faer::Mat::<f64>::zeros(levels.len(), levels.len());
        for (i, &e) in levels.iter().enumerate() {
            m[(i, i)] = e;
        }
        diagonalize(&crate::model::OperatorMatrix::from_entries(basis, m).unwrap(), false).unwrap()
    }

    #[test]
    fn spacing_examples() {
        let all = |n| LevelWindow::new(0, n);
        let s = spacing_series(&fake_spectrum(&[0.0, 1.0, 2.0, 3.0]), &all(4), Unfolding::Global).unwrap();
        assert_eq!(s.raw, vec![1.0, 1.0, 1.0]);
        assert_eq!(s.normalized, vec![1.0, 1.0, 1.0]);
        let s = spacing_series(&fake_spectrum(&[0.0, 1.0, 3.0]), &all(3), Unfolding::Global).unwrap();
        assert_eq!(s.raw, vec![1.0, 2.0]);
        assert!((s.normalized[0] - 2.0 / 3.0).abs() < 1e-15 && (s.normalized[1] - 4.0 / 3.0).abs() < 1e-15);
        let s = spacing_series(&fake_spectrum(&[0.0, 1.0, 1.0, 2.5]), &all(4), Unfolding::Global).unwrap();
        assert!(s.raw.contains(&0.0));
    }

    #[test]
    fn window_refuses_uncertified_levels() {
        let mut spec = fake_spectrum(&[0.0, 1.0, 2.0, 3.0, 4.0, 5.0]);
        spec.converged_count = 4;
        assert!(matches!(
            spacing_series(&spec, &LevelWindow::new(0, 5), Unfolding::Global),
            Err(Error::WindowOutOfRange { available: 4, .. })
        ));
        assert!(r_statistic(&spec, &LevelWindow::new(0, 4)).is_ok());
    }

    #[test]
    fn energy_ceiling_truncates_window() {
        let spec = fake_spectrum(&[0.0, 1.0, 2.0, 4.0, 7.0, 11.0]);
        let w = LevelWindow::new(0, 6).with_ceiling(Some(4.5));
        let s = spacing_series(&spec, &w, Unfolding::Global).unwrap();
        assert_eq!(s.raw, vec![1.0, 1.0, 2.0]);
    }

    #[test]
    fn local_unfolding_keeps_unit_mean() {
        let levels: Vec<f64> = (100..400).map(|i| (i as f64).powf(1.3)).collect();
        let s = spacing_series_from_levels(&levels, Unfolding::Local { half_width: 25 }).unwrap();
        assert!((mean(&s.normalized) - 1.0).abs() < 1e-12);
        // a smoothly growing density is flattened
        let spread = s.normalized.iter().cloned().fold(0.0, f64::max) - s.normalized.iter().cloned().fold(9.0, f64::min);
        assert!(spread < 0.5, "{spread}");
    }

    #[test]
    fn reference_densities() {
        assert_eq!(reference_pdf(ReferenceDistribution::Poisson, 0.0).unwrap(), 1.0);
        assert_eq!(reference_pdf(ReferenceDistribution::WignerDyson, 0.0).unwrap(), 0.0);
        let wd1 = PI / 2.0 * (-PI / 4.0).exp();
        assert!((reference_pdf(ReferenceDistribution::WignerDyson, 1.0).unwrap() - wd1).abs() < 1e-15);
        assert!(reference_pdf(ReferenceDistribution::Poisson, -0.1).is_err());
        // both laws have unit mean and unit mass (trapezoid quadrature)
        for kind in [ReferenceDistribution::Poisson, ReferenceDistribution::WignerDyson] {
            let h = 1e-4;
            let (mut mass, mut first) = (0.0, 0.0);
            for i in 0..400_000 {
                let s = i as f64 * h;
                let w = if i == 0 { 0.5 } else { 1.0 };
                mass += w * h * kind.pdf(s);
                first += w * h * s * kind.pdf(s);
            }
            assert!((mass - 1.0).abs() < 1e-6 && (first - 1.0).abs() < 1e-6, "{kind:?}");
        }
    }

    #[test]
    fn histogram_examples() {
        let h = histogram(&[1.0, 1.0, 1.0], &HistogramSpec { lo: 0.0, hi: 2.0, bins: 2 }).unwrap();
        assert_eq!(h.counts, vec![0, 3]);
        assert_eq!(h.density, vec![0.0, 1.0]);
        assert_eq!(h.bin_width(), 1.0);
        let h = histogram(&[0.0, 2.0, 2.5], &HistogramSpec { lo: 0.0, hi: 2.0, bins: 2 }).unwrap();
        assert_eq!((h.counts.clone(), h.outside), (vec![1, 1], 1));
        assert!(histogram(&[], &HistogramSpec::default()).is_err());
    }

    #[test]
    fn exponential_samples_follow_poisson_density() {
        let samples = sample_poisson_spacings(100_000, 11);
        let h = histogram(&samples, &HistogramSpec::default()).unwrap();
        for (c, d) in h.centers().zip(&h.density) {
            assert!((d - (-c).exp()).abs() < 0.02, "s={c}: {d}");
        }
        assert!(ks_distance(&samples, ReferenceDistribution::Poisson) < 0.01);
        assert!(ks_distance(&samples, ReferenceDistribution::WignerDyson) > 0.1);
    }

    #[test]
    fn ratio_examples() {
        let r = r_statistic_from_spacings(&[1.0, 1.0, 1.0, 1.0]).unwrap();
        assert!(r.ratios.iter().all(|&x| x == 1.0) && r.mean == 1.0);
        assert_eq!(r_statistic_from_spacings(&[1.0, 2.0]).unwrap().mean, 0.5);
        let z = r_statistic_from_spacings(&[1.0, 0.0, 0.0, 2.0]).unwrap();
        assert_eq!((z.zero_spacings, z.ratios.clone()), (3, vec![0.0, 0.0, 0.0]));
        assert!(r_statistic_from_spacings(&[1.0]).is_err());
    }

    #[test]
    fn poisson_ratio_mean() {
        let r = r_statistic_from_spacings(&sample_poisson_spacings(1_000_000, 5)).unwrap();
        assert!((r.mean - POISSON_MEAN_R).abs() < 0.002, "{}", r.mean);
    }

    #[test]
    fn cluster_formula_examples() {
        let g = 0.013;
        let jc = ModelParams::resonant(g, g, 0.5).unwrap();
        let e = perturbative_cluster_energies(&jc, 0, 0.5).unwrap();
        assert!((e[0] - (0.5 - g)).abs() < 1e-15 && e[1] == 0.5 && (e[2] - (0.5 + g)).abs() < 1e-15);
        let big = ModelParams::resonant(g, g, 10.0).unwrap();
        assert_eq!(perturbative_cluster_energies(&big, 0, -10.0).unwrap(), [-10.0; 3]);
        let off = ModelParams::new(1.0, 1.2, g, g, crate::model::Spin::new(1.0).unwrap()).unwrap();
        assert!(matches!(perturbative_cluster_energies(&off, 0, 0.0), Err(Error::OffResonance { .. })));
        assert!(perturbative_cluster_energies(&big, 0, 10.5).is_err());
    }

    #[test]
    fn cluster_formula_is_first_order_for_three_state_manifolds() {
        // N_ex = n + m + j = 2 at j = 10 holds exactly (2,-10), (1,-9), (0,-8):
        // the formula's triple around (1,-9) is the whole degenerate manifold
        let levels = |g: f64| {
            let p = ModelParams::resonant(g, g, 10.0).unwrap().with_n_max(30);
            sector_spectrum(&p, Some(Parity::Positive), false).unwrap().eigenvalues
        };
        let err = |g: f64| {
            let exact = &levels(g)[1..4];
            let formula = perturbative_cluster_energies(&ModelParams::resonant(g, g, 10.0).unwrap(), 1, -9.0).unwrap();
            exact.iter().zip(formula).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
        };
        let (e1, e2) = (err(1e-3), err(2e-3));
        assert!(e1 < 1e-5);
        assert!((e2 / e1 - 4.0).abs() < 0.5, "{}", e2 / e1);
    }

    proptest! {
        #[test]
        fn ratio_mean_is_affine_invariant(
            levels in prop::collection::vec(-50.0f64..50.0, 3..60),
            scale in 0.01f64..100.0,
            shift in -1e3f64..1e3,
        ) {
            let mut levels = levels;
            levels.sort_by(f64::total_cmp);
            levels.dedup();
            prop_assume!(levels.len() >= 3);
            let a = r_statistic_from_levels(&levels).unwrap();
            let moved: Vec<f64> = levels.iter().map(|e| scale * e + shift).collect();
            let b = r_statistic_from_levels(&moved).unwrap();
            prop_assert!((a.mean - b.mean).abs() < 1e-9);
            prop_assert!(a.ratios.iter().all(|r| (0.0..=1.0).contains(r)));
        }

        #[test]
        fn histogram_has_unit_area(samples in prop::collection::vec(0.0f64..4.0, 1..300), bins in 1usize..50) {
            let h = histogram(&samples, &HistogramSpec { lo: 0.0, hi: 4.0, bins }).unwrap();
            let area: f64 = h.density.iter().map(|d| d * h.bin_width()).sum();
            prop_assert!((area - 1.0).abs() < 1e-12);
        }

        #[test]
        fn normalized_spacings_have_unit_mean(levels in prop::collection::vec(-10.0f64..10.0, 2..200)) {
            let mut levels = levels;
            levels.sort_by(f64::total_cmp);
            prop_assume!(levels[levels.len() - 1] > levels[0]);
            let s = spacing_series_from_levels(&levels, Unfolding::Global).unwrap();
            prop_assert!((mean(&s.normalized) - 1.0).abs() < 1e-12);
            prop_assert!(s.raw.iter().all(|&x| x >= 0.0));
        }
    }
}
