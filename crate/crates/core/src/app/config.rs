//! Run configuration: one registry of `key = value` settings shared by the
//! config file, the command-line flags and every output header.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::diagnostics::{HistogramSpec, LevelWindow, Unfolding};
use crate::error::{Error, Result};
use crate::model::{Cutoff, ModelParams, Parity, Spin};
use crate::spectra::ConvergenceOptions;

/// Every accepted key, in the order it is echoed into output files.
pub const KEYS: &[&str] = &[
    "omega",
    "omega0",
    "g1",
    "g2",
    "j",
    "nmax",
    "parity",
    "levels",
    "tol",
    "ceiling",
    "window",
    "lambda",
    "unfold",
    "bins",
    "beta",
    "time",
    "shift",
    "average",
    "average-points",
    "ref-g1",
    "ref-g2",
    "degeneracy-tol",
    "grid",
    "diagnostics",
    "mask-radius",
    "threads",
    "out",
    "checkpoint",
    "resume",
];

/// Keys that do not change any computed number.
pub const PLUMBING_KEYS: &[&str] = &["threads", "out", "checkpoint", "resume"];

/// Uniformly spaced axis `min..=max` with `steps` points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridAxis {
    pub min: f64,
    pub max: f64,
    pub steps: usize,
}

impl GridAxis {
    pub fn values(&self) -> Vec<f64> {
        if self.steps == 1 {
            return vec![self.min];
        }
        let step = (self.max - self.min) / (self.steps - 1) as f64;
        (0..self.steps)
            .map(|i| if i + 1 == self.steps { self.max } else { self.min + i as f64 * step })
            .collect()
    }
}

impl fmt::Display for GridAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.min, self.max, self.steps)
    }
}

impl FromStr for GridAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let [min, max, steps] = parts[..] else {
            return Err(Error::Config(format!("grid axis `{s}` is not MIN:MAX:STEPS")));
        };
        let axis = GridAxis {
            min: parse_value("grid", min)?,
            max: parse_value("grid", max)?,
            steps: parse_value("grid", steps)?,
        };
        if axis.steps == 0 || !axis.min.is_finite() || !axis.max.is_finite() || axis.max < axis.min {
            return Err(Error::Config(format!("grid axis `{s}` needs MIN <= MAX and STEPS >= 1")));
        }
        Ok(axis)
    }
}

/// `--grid`: one axis for both couplings, or `g1 axis,g2 axis`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub g1: GridAxis,
    pub g2: GridAxis,
}

impl fmt::Display for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.g1 == self.g2 {
            write!(f, "{}", self.g1)
        } else {
            write!(f, "{},{}", self.g1, self.g2)
        }
    }
}

impl FromStr for Grid {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.split_once(',') {
            Some((a, b)) => Ok(Grid { g1: a.trim().parse()?, g2: b.trim().parse()? }),
            None => {
                let axis: GridAxis = s.parse()?;
                Ok(Grid { g1: axis, g2: axis })
            }
        }
    }
}

/// A single time or `START:STOP:COUNT` evenly spaced times.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TimeSpec {
    Single(f64),
    Range(GridAxis),
}

impl TimeSpec {
    pub fn single(&self) -> Option<f64> {
        match self {
            TimeSpec::Single(t) => Some(*t),
            TimeSpec::Range(_) => None,
        }
    }
}

impl fmt::Display for TimeSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TimeSpec::Single(t) => write!(f, "{t}"),
            TimeSpec::Range(axis) => write!(f, "{axis}"),
        }
    }
}

impl FromStr for TimeSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.contains(':') {
            Ok(TimeSpec::Range(s.parse()?))
        } else {
            Ok(TimeSpec::Single(parse_value("time", s)?))
        }
    }
}

/// Parity selection; `both` means the full space.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParityChoice(pub Option<Parity>);

impl fmt::Display for ParityChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            Some(p) => write!(f, "{p}"),
            None => f.write_str("both"),
        }
    }
}

impl FromStr for ParityChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("both") || s.eq_ignore_ascii_case("all") {
            return Ok(ParityChoice(None));
        }
        Ok(ParityChoice(Some(s.parse()?)))
    }
}

/// Diagnostics evaluated per sweep cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DiagnosticSet {
    pub r: bool,
    pub otoc: bool,
    pub order: bool,
}

impl fmt::Display for DiagnosticSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<&str> = [(self.r, "r"), (self.otoc, "otoc"), (self.order, "order")]
            .iter()
            .filter(|(on, _)| *on)
            .map(|(_, n)| *n)
            .collect();
        f.write_str(&names.join(","))
    }
}

impl FromStr for DiagnosticSet {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut set = DiagnosticSet { r: false, otoc: false, order: false };
        for name in s.split(',').map(str::trim) {
            match name {
                "r" | "rstat" => set.r = true,
                "otoc" => set.otoc = true,
                "order" => set.order = true,
                _ => return Err(Error::Config(format!("unknown diagnostic `{name}` (expected r, otoc, order)"))),
            }
        }
        Ok(set)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub omega: f64,
    pub omega0: f64,
    pub g1: f64,
    pub g2: f64,
    pub j: Spin,
    pub nmax: Cutoff,
    pub parity: ParityChoice,
    /// Number of lowest levels to certify; the command picks a default when unset.
    pub levels: Option<usize>,
    pub tol: f64,
    pub ceiling: usize,
    pub window: (usize, usize),
    pub lambda: Option<f64>,
    pub unfold: Unfolding,
    pub bins: HistogramSpec,
    pub beta: f64,
    pub time: TimeSpec,
    pub shift: f64,
    pub average: f64,
    pub average_points: usize,
    pub ref_g1: f64,
    pub ref_g2: f64,
    pub degeneracy_tol: Option<f64>,
    pub grid: Grid,
    pub diagnostics: DiagnosticSet,
    pub mask_radius: f64,
    pub threads: Option<usize>,
    pub out: PathBuf,
    pub checkpoint: Option<PathBuf>,
    pub resume: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        let axis = GridAxis { min: 0.02, max: 1.0, steps: 21 };
        RunConfig {
            omega: 1.0,
            omega0: 1.0,
            g1: 0.0,
            g2: 0.0,
            j: Spin::from_twice(20).expect("j = 10"),
            nmax: Cutoff::Auto,
            parity: ParityChoice(Some(Parity::Positive)),
            levels: None,
            tol: 1e-8,
            ceiling: 5000,
            window: (200, 1000),
            lambda: None,
            unfold: Unfolding::Global,
            bins: HistogramSpec::default(),
            beta: 0.1,
            time: TimeSpec::Single(100.0),
            shift: 100.0,
            average: 0.0,
            average_points: 11,
            ref_g1: 0.0,
            ref_g2: 0.0,
            degeneracy_tol: None,
            grid: Grid { g1: axis, g2: axis },
            diagnostics: DiagnosticSet { r: true, otoc: false, order: false },
            mask_radius: 0.0,
            threads: None,
            out: PathBuf::from("."),
            checkpoint: None,
            resume: false,
        }
    }
}

fn parse_value<T: FromStr>(key: &str, raw: &str) -> Result<T> {
    raw.trim()
        .parse()
        .map_err(|_| Error::Config(format!("invalid value `{raw}` for `{key}`")))
}

fn parse_optional<T: FromStr>(key: &str, raw: &str) -> Result<Option<T>> {
    if raw.trim().eq_ignore_ascii_case("none") || raw.trim().eq_ignore_ascii_case("auto") {
        Ok(None)
    } else {
        parse_value(key, raw).map(Some)
    }
}

fn optional_text<T: fmt::Display>(v: &Option<T>) -> String {
    match v {
        Some(x) => x.to_string(),
        None => "none".into(),
    }
}

fn parse_window(raw: &str) -> Result<(usize, usize)> {
    let (lo, hi) = raw
        .split_once(':')
        .ok_or_else(|| Error::Config(format!("window `{raw}` is not LO:HI")))?;
    let w = (parse_value("window", lo)?, parse_value("window", hi)?);
    if w.0 >= w.1 {
        return Err(Error::Config(format!("window `{raw}` needs LO < HI")));
    }
    Ok(w)
}

fn parse_unfold(raw: &str) -> Result<Unfolding> {
    match raw.trim() {
        "global" => Ok(Unfolding::Global),
        "local" => Ok(Unfolding::Local { half_width: 25 }),
        other => match other.strip_prefix("local:") {
            Some(w) => Ok(Unfolding::Local { half_width: parse_value("unfold", w)? }),
            None => Err(Error::Config(format!("unfold `{raw}` is not global, local or local:W"))),
        },
    }
}

fn unfold_text(u: Unfolding) -> String {
    match u {
        Unfolding::Global => "global".into(),
        Unfolding::Local { half_width } => format!("local:{half_width}"),
    }
}

fn parse_bins(raw: &str) -> Result<HistogramSpec> {
    let parts: Vec<&str> = raw.split(':').collect();
    let spec = match parts[..] {
        [count] => HistogramSpec { bins: parse_value("bins", count)?, ..HistogramSpec::default() },
        [lo, hi, count] => HistogramSpec {
            lo: parse_value("bins", lo)?,
            hi: parse_value("bins", hi)?,
            bins: parse_value("bins", count)?,
        },
        _ => return Err(Error::Config(format!("bins `{raw}` is not COUNT or LO:HI:COUNT"))),
    };
    if spec.bins == 0 || !(spec.hi > spec.lo) {
        return Err(Error::Config(format!("bins `{raw}` needs LO < HI and COUNT >= 1")));
    }
    Ok(spec)
}

fn parse_bool(key: &str, raw: &str) -> Result<bool> {
    match raw.trim() {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(Error::Config(format!("invalid boolean `{raw}` for `{key}`"))),
    }
}

impl RunConfig {
    pub fn set(&mut self, key: &str, raw: &str) -> Result<()> {
        match key {
            "omega" => self.omega = parse_value(key, raw)?,
            "omega0" => self.omega0 = parse_value(key, raw)?,
            "g1" => self.g1 = parse_value(key, raw)?,
            "g2" => self.g2 = parse_value(key, raw)?,
            "j" => self.j = raw.trim().parse()?,
            "nmax" => self.nmax = raw.trim().parse()?,
            "parity" => self.parity = raw.trim().parse()?,
            "levels" => self.levels = parse_optional(key, raw)?,
            "tol" => self.tol = parse_value(key, raw)?,
            "ceiling" => self.ceiling = parse_value(key, raw)?,
            "window" => self.window = parse_window(raw)?,
            "lambda" => self.lambda = parse_optional(key, raw)?,
            "unfold" => self.unfold = parse_unfold(raw)?,
            "bins" => self.bins = parse_bins(raw)?,
            "beta" => self.beta = parse_value(key, raw)?,
            "time" => self.time = raw.trim().parse()?,
            "shift" => self.shift = parse_value(key, raw)?,
            "average" => self.average = parse_value(key, raw)?,
            "average-points" => self.average_points = parse_value(key, raw)?,
            "ref-g1" => self.ref_g1 = parse_value(key, raw)?,
            "ref-g2" => self.ref_g2 = parse_value(key, raw)?,
            "degeneracy-tol" => self.degeneracy_tol = parse_optional(key, raw)?,
            "grid" => self.grid = raw.trim().parse()?,
            "diagnostics" => self.diagnostics = raw.trim().parse()?,
            "mask-radius" => self.mask_radius = parse_value(key, raw)?,
            "threads" => self.threads = parse_optional(key, raw)?,
            "out" => self.out = PathBuf::from(raw.trim()),
            "checkpoint" => {
                self.checkpoint = match raw.trim() {
                    "" | "none" => None,
                    p => Some(PathBuf::from(p)),
                }
            }
            "resume" => self.resume = parse_bool(key, raw)?,
            _ => return Err(Error::Config(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<String> {
        Some(match key {
            "omega" => self.omega.to_string(),
            "omega0" => self.omega0.to_string(),
            "g1" => self.g1.to_string(),
            "g2" => self.g2.to_string(),
            "j" => self.j.to_string(),
            "nmax" => self.nmax.to_string(),
            "parity" => self.parity.to_string(),
            "levels" => optional_text(&self.levels),
            "tol" => self.tol.to_string(),
            "ceiling" => self.ceiling.to_string(),
            "window" => format!("{}:{}", self.window.0, self.window.1),
            "lambda" => optional_text(&self.lambda),
            "unfold" => unfold_text(self.unfold),
            "bins" => format!("{}:{}:{}", self.bins.lo, self.bins.hi, self.bins.bins),
            "beta" => self.beta.to_string(),
            "time" => self.time.to_string(),
            "shift" => self.shift.to_string(),
            "average" => self.average.to_string(),
            "average-points" => self.average_points.to_string(),
            "ref-g1" => self.ref_g1.to_string(),
            "ref-g2" => self.ref_g2.to_string(),
            "degeneracy-tol" => optional_text(&self.degeneracy_tol),
            "grid" => self.grid.to_string(),
            "diagnostics" => self.diagnostics.to_string(),
            "mask-radius" => self.mask_radius.to_string(),
            "threads" => optional_text(&self.threads),
            "out" => self.out.display().to_string(),
            "checkpoint" => self
                .checkpoint
                .as_ref()
                .map_or_else(|| "none".into(), |p| p.display().to_string()),
            "resume" => self.resume.to_string(),
            _ => return None,
        })
    }

    /// All settings in canonical order.
    pub fn pairs(&self) -> Vec<(&'static str, String)> {
        KEYS.iter().map(|k| (*k, self.get(k).expect("registered key"))).collect()
    }

    /// Settings that affect results, as canonical `key = value` text.
    pub fn physics_text(&self) -> String {
        self.pairs()
            .into_iter()
            .filter(|(k, _)| !PLUMBING_KEYS.contains(k))
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }

    pub fn apply(&mut self, pairs: &[(String, String)]) -> Result<()> {
        for (k, v) in pairs {
            self.set(k, v)?;
        }
        Ok(())
    }

    /// Defaults, then `file`, then `overrides`.
    pub fn load(file: Option<&Path>, overrides: &[(String, String)]) -> Result<Self> {
        let mut cfg = RunConfig::default();
        if let Some(path) = file {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            cfg.apply(&parse_config_text(&text)?)?;
        }
        cfg.apply(overrides)?;
        Ok(cfg)
    }

    pub fn model(&self) -> Result<ModelParams> {
        Ok(ModelParams::new(self.omega, self.omega0, self.g1, self.g2, self.j)?.with_cutoff(self.nmax))
    }

    pub fn convergence(&self) -> ConvergenceOptions {
        ConvergenceOptions {
            tolerance: self.tol,
            ceiling: self.ceiling,
            ..ConvergenceOptions::default()
        }
    }

    pub fn level_window(&self) -> LevelWindow {
        LevelWindow::new(self.window.0, self.window.1).with_ceiling(self.lambda)
    }

    /// The single parity sector, refusing `both`.
    pub fn sector(&self) -> Result<Parity> {
        self.parity
            .0
            .ok_or_else(|| Error::Config("this command needs a single parity sector (+ or -)".into()))
    }

    pub fn checkpoint_path(&self) -> PathBuf {
        self.checkpoint.clone().unwrap_or_else(|| self.out.join("sweep.checkpoint"))
    }
}

/// `key = value` lines; blank lines and `#` comments are skipped, a key may
/// appear once.
pub fn parse_config_text(text: &str) -> Result<Vec<(String, String)>> {
    let mut seen = BTreeMap::new();
    let mut pairs = Vec::new();
    for (number, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", number + 1)))?;
        let key = key.trim();
        if !KEYS.contains(&key) {
            return Err(Error::Config(format!("line {}: unknown key `{key}`", number + 1)));
        }
        if seen.insert(key.to_string(), number + 1).is_some() {
            return Err(Error::Config(format!("line {}: duplicate key `{key}`", number + 1)));
        }
        pairs.push((key.to_string(), value.trim().to_string()));
    }
    Ok(pairs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn defaults_round_trip_through_text() {
        let cfg = RunConfig::default();
        let text: String = cfg.pairs().iter().map(|(k, v)| format!("{k} = {v}\n")).collect();
        let back = RunConfig::load(None, &parse_config_text(&text).unwrap()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn unknown_and_duplicate_keys_are_rejected() {
        assert!(parse_config_text("omgea = 1\n").is_err());
        assert!(parse_config_text("g1 = 1\ng1 = 2\n").is_err());
        assert!(parse_config_text("g1 1\n").is_err());
        assert_eq!(parse_config_text("# note\n\n g1 = 0.5 \n").unwrap(), vec![("g1".into(), "0.5".into())]);
    }

    #[test]
    fn overrides_win() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.conf");
        std::fs::write(&path, "g1 = 0.5\nj = 5\n").unwrap();
        let cfg = RunConfig::load(Some(&path), &[("g1".into(), "0.25".into())]).unwrap();
        assert_eq!(cfg.g1, 0.25);
        assert_eq!(cfg.j.twice(), 10);
    }

    #[test]
    fn grid_axis_values() {
        let g: Grid = "0.02:1:21".parse().unwrap();
        let v = g.g1.values();
        assert_eq!(v.len(), 21);
        assert_eq!(v[0], 0.02);
        assert_eq!(v[20], 1.0);
        assert!((v[1] - 0.069).abs() < 1e-15);
        let g: Grid = "0:1:2,0.5:0.5:1".parse().unwrap();
        assert_eq!(g.g2.values(), vec![0.5]);
        assert!("1:0:3".parse::<Grid>().is_err());
        assert!("0:1".parse::<Grid>().is_err());
    }

    #[test]
    fn value_forms() {
        let mut cfg = RunConfig::default();
        cfg.set("parity", "-").unwrap();
        assert_eq!(cfg.sector().unwrap(), Parity::Negative);
        cfg.set("parity", "both").unwrap();
        assert!(cfg.sector().is_err());
        cfg.set("time", "0:10:11").unwrap();
        assert_eq!(cfg.time.single(), None);
        cfg.set("unfold", "local:7").unwrap();
        assert_eq!(cfg.unfold, Unfolding::Local { half_width: 7 });
        cfg.set("diagnostics", "order,r").unwrap();
        assert_eq!(cfg.get("diagnostics").unwrap(), "r,order");
        assert!(cfg.set("diagnostics", "lyapunov").is_err());
        assert!(cfg.set("window", "10:5").is_err());
        cfg.set("nmax", "80").unwrap();
        assert_eq!(cfg.model().unwrap().n_max(), Some(80));
    }

    proptest! {
        #[test]
        fn physics_settings_round_trip(
            g1 in 0.0f64..2.0,
            g2 in 0.0f64..2.0,
            omega0 in -3.0f64..3.0,
            twice in 1u32..30,
            lo in 0usize..500,
            width in 1usize..500,
            beta in 0.0f64..5.0,
        ) {
            let mut cfg = RunConfig::default();
            cfg.g1 = g1;
            cfg.g2 = g2;
            cfg.omega0 = omega0;
            cfg.j = Spin::from_twice(twice).unwrap();
            cfg.window = (lo, lo + width);
            cfg.beta = beta;
            let back = RunConfig::load(None, &parse_config_text(&cfg.physics_text()).unwrap()).unwrap();
            prop_assert_eq!(back, cfg);
        }
    }
}
