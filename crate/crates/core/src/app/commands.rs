//! Single-point drivers: one CSV and one sidecar per run.

use std::path::PathBuf;

use super::config::{RunConfig, TimeSpec};
use super::output::{number, Report};
use crate::diagnostics::{
    histogram, ks_distance, r_statistic, spacing_series, ReferenceDistribution, GOE_MEAN_R, POISSON_MEAN_R,
};
use crate::error::Result;
use crate::exec::Execution;
use crate::otoc::{otoc_series, OtocOptions};
use crate::overlap::{hose_taylor_fraction, max_overlap, paired_spectra};
use crate::spectra::{converge_cutoff, SpectralData};

const DEFAULT_SPECTRUM_LEVELS: usize = 20;
const DEFAULT_OVERLAP_STATES: usize = 200;

fn record_cutoff(report: &mut Report, spec: &SpectralData) {
    report.result("n_max_resolved", spec.n_max());
    report.result("dimension", spec.dim());
    report.result("certified_levels", spec.converged_count);
    report.result(
        "certification",
        match spec.tolerance {
            Some(t) => format!("successive cutoffs agree to {t:e}"),
            None => "none (fixed cutoff)".into(),
        },
    );
}

pub fn otoc_options(cfg: &RunConfig) -> Result<OtocOptions> {
    Ok(OtocOptions {
        beta: cfg.beta,
        time: cfg.time.single().unwrap_or(0.0),
        shift: cfg.shift,
        average_half_width: cfg.average,
        average_points: cfg.average_points,
        parity: cfg.sector()?,
        convergence: cfg.convergence(),
    })
}

pub fn cmd_spectrum(cfg: &RunConfig) -> Result<PathBuf> {
    let params = cfg.model()?;
    let levels = match (cfg.levels, params.n_max()) {
        (Some(k), _) => k,
        (None, Some(_)) => usize::MAX,
        (None, None) => DEFAULT_SPECTRUM_LEVELS,
    };
    let spec = converge_cutoff(&params, cfg.parity.0, levels, &cfg.convergence(), false)?;
    let mut report = Report::new("spectrum", cfg, &["index", "energy"]);
    record_cutoff(&mut report, &spec);
    for (i, e) in spec.eigenvalues.iter().take(spec.converged_count).enumerate() {
        report.row(vec![i.to_string(), number(*e)]);
    }
    report.write(&cfg.out)
}

fn window_spectrum(cfg: &RunConfig) -> Result<SpectralData> {
    let params = cfg.model()?;
    let levels = cfg.levels.unwrap_or(cfg.window.1).max(cfg.window.1);
    converge_cutoff(&params, Some(cfg.sector()?), levels, &cfg.convergence(), false)
}

pub fn cmd_spacing(cfg: &RunConfig) -> Result<PathBuf> {
    let spec = window_spectrum(cfg)?;
    let series = spacing_series(&spec, &cfg.level_window(), cfg.unfold)?;
    let hist = histogram(&series.normalized, &cfg.bins)?;
    let mut report = Report::new(
        "spacing",
        cfg,
        &["bin_lo", "bin_hi", "count", "density", "poisson", "wigner_dyson"],
    );
    record_cutoff(&mut report, &spec);
    report.result("spacings", series.raw.len());
    report.result("mean_raw_spacing", series.raw.iter().sum::<f64>() / series.raw.len() as f64);
    report.result("outside_bins", hist.outside);
    report.result("ks_poisson", ks_distance(&series.normalized, ReferenceDistribution::Poisson));
    report.result("ks_wigner_dyson", ks_distance(&series.normalized, ReferenceDistribution::WignerDyson));
    for (i, centre) in hist.centers().enumerate() {
        report.row(vec![
            number(hist.edges[i]),
            number(hist.edges[i + 1]),
            hist.counts[i].to_string(),
            number(hist.density[i]),
            number(ReferenceDistribution::Poisson.pdf(centre)),
            number(ReferenceDistribution::WignerDyson.pdf(centre)),
        ]);
    }
    report.write(&cfg.out)
}

pub fn cmd_rstat(cfg: &RunConfig) -> Result<PathBuf> {
    let spec = window_spectrum(cfg)?;
    let r = r_statistic(&spec, &cfg.level_window())?;
    let mut report = Report::new("rstat", cfg, &["index", "r"]);
    record_cutoff(&mut report, &spec);
    report.result("r_mean", number(r.mean));
    report.result("ratios", r.count);
    report.result("zero_spacings", r.zero_spacings);
    report.result("poisson_reference", POISSON_MEAN_R);
    report.result("goe_reference", GOE_MEAN_R);
    // r_n uses the spacings on both sides of level n
    for (k, value) in r.ratios.iter().enumerate() {
        report.row(vec![(cfg.window.0 + k + 1).to_string(), number(*value)]);
    }
    report.write(&cfg.out)
}

pub fn cmd_otoc(cfg: &RunConfig) -> Result<PathBuf> {
    let options = otoc_options(cfg)?;
    let times = match cfg.time {
        TimeSpec::Range(axis) => axis.values(),
        TimeSpec::Single(_) => options.sample_times(),
    };
    let point = otoc_series(&cfg.model()?, &options, &times, Execution::default())?;
    let mut report = Report::new("otoc", cfg, &["t", "F", "deficit"]);
    report.result("n_max_resolved", point.n_max);
    report.result("dimension", point.dim);
    report.result("certified_levels", point.certified_levels);
    report.result("thermal_trace", format!("parity {} sector only", options.parity));
    report.result("mean_deficit", number(point.deficit));
    report.result("imaginary_residue", number(point.series.imaginary_residue));
    let s = &point.series;
    for i in 0..s.times.len() {
        report.row(vec![number(s.times[i]), number(s.f[i]), number(s.deficit[i])]);
    }
    report.write(&cfg.out)
}

pub fn cmd_overlap(cfg: &RunConfig) -> Result<PathBuf> {
    let target = cfg.model()?;
    let reference = target.with_couplings(cfg.ref_g1, cfg.ref_g2);
    let states = cfg.levels.unwrap_or(DEFAULT_OVERLAP_STATES);
    let (reference, target) = paired_spectra(&reference, &target, cfg.sector()?, states, &cfg.convergence())?;
    let result = max_overlap(&reference, &target, cfg.degeneracy_tol, Execution::default())?;
    let mut report = Report::new(
        "overlap",
        cfg,
        &["state_index", "target_energy", "max_overlap", "eigenspace_index"],
    );
    report.result("n_max_resolved", target.n_max());
    report.result("dimension", target.dim());
    report.result("target_states", result.max_overlap.len());
    report.result("degeneracy_tolerance", number(result.degeneracy_tolerance));
    report.result("reference_eigenspaces", result.eigenspace_count);
    report.result("eigenspace_projection", "overlaps are squared norms of projections onto whole reference eigenspaces");
    report.result("hose_taylor_fraction", number(hose_taylor_fraction(&result, 0.5)));
    let worst = result.completeness.iter().map(|c| (c - 1.0).abs()).fold(0.0, f64::max);
    report.result("completeness_max_error", number(worst));
    for i in 0..result.max_overlap.len() {
        report.row(vec![
            i.to_string(),
            number(result.target_energies[i]),
            number(result.max_overlap[i]),
            result.eigenspace_index[i].to_string(),
        ]);
    }
    report.write(&cfg.out)
}
