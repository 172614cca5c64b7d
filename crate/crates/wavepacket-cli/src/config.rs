//! Flat `key = value` experiment configuration.
//!
//! Blank lines and text after `#` are ignored. Numbers may carry a `pi`
//! suffix (`16pi`, `0.5pi`, `pi`). Lists are comma separated. All quantities
//! are dimensionless with gravity and density set to one.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use thiserror::Error;
use wavepacket::evolve::SolverConfig;
use wavepacket::spectral::Grid;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`, got {text:?}")]
    Syntax { line: usize, text: String },
    #[error("unknown key {0:?}")]
    UnknownKey(String),
    #[error("key {key:?}: cannot parse {value:?}")]
    Value { key: String, value: String },
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub enum EnvelopeShape {
    /// The exact NLS soliton with amplitude `eta`.
    Sech,
    /// `eta exp(-(X - L/2)^2)`, evolved by the split-step solver.
    Gaussian,
    /// Samples on the slow grid, one per line as `re` or `re,im`.
    File(PathBuf),
}

/// How the fast grid size is chosen for each `eps`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PointsRule {
    Fixed(usize),
    /// Smallest power of two giving at least this many points per carrier
    /// wavelength.
    PerWavelength(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub k: f64,
    pub envelope: EnvelopeShape,
    pub eta: f64,
    pub epsilons: Vec<f64>,
    pub slow_length: f64,
    pub slow_points: usize,
    pub points: PointsRule,
    pub sobolev: u32,
    /// Slow horizon: runs cover `0 <= t <= horizon / eps^2`.
    pub horizon: f64,
    pub solver: SolverConfig,
    pub fd_step: f64,
    pub nls_points: usize,
    pub nls_step: f64,
    pub nls_time: f64,
    /// Largest accepted `max error / eps^{3/2}`.
    pub error_constant: f64,
    pub out: PathBuf,
    pub seed: u64,
}

impl ExperimentConfig {
    /// Residual sweep over `eps = 0.04, 0.08, 0.16` at 20 points per
    /// wavelength around a sech soliton.
    pub fn residual_default() -> Self {
        Self {
            k: 1.0,
            envelope: EnvelopeShape::Sech,
            eta: 1.0,
            epsilons: vec![0.04, 0.08, 0.16],
            slow_length: 16.0 * PI,
            slow_points: 256,
            points: PointsRule::PerWavelength(20.0),
            sobolev: 4,
            horizon: 0.5,
            solver: SolverConfig::default(),
            fd_step: wavepacket::residual::FD_STEP,
            nls_points: 1024,
            nls_step: 1e-3,
            nls_time: 5.0,
            error_constant: 6.0,
            out: PathBuf::from("out"),
            seed: 0,
        }
    }

    /// Long runs at `eps = 0.05, 0.1` with `N = 512` on a short slow domain
    /// holding a Gaussian envelope.
    pub fn evolution_default() -> Self {
        Self {
            envelope: EnvelopeShape::Gaussian,
            epsilons: vec![0.05, 0.1],
            slow_length: 4.0 * PI,
            slow_points: 64,
            points: PointsRule::Fixed(512),
            ..Self::residual_default()
        }
    }

    /// Reads `path` on top of `base`.
    pub fn load(path: &Path, base: Self) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text, base)
    }

    pub fn parse(text: &str, base: Self) -> Result<Self, ConfigError> {
        let mut cfg = base;
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| ConfigError::Syntax {
                line: i + 1,
                text: raw.to_string(),
            })?;
            cfg.set(key.trim(), value.trim())?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let bad = || ConfigError::Value {
            key: key.to_string(),
            value: value.to_string(),
        };
        let num = |v: &str| parse_number(v).ok_or_else(bad);
        let int = |v: &str| v.parse::<usize>().map_err(|_| bad());
        let flag = |v: &str| v.parse::<bool>().map_err(|_| bad());
        match key {
            "k" => self.k = num(value)?,
            "envelope" => {
                self.envelope = match value {
                    "sech" => EnvelopeShape::Sech,
                    "gaussian" => EnvelopeShape::Gaussian,
                    v if v.starts_with("file:") => EnvelopeShape::File(PathBuf::from(&v[5..])),
                    _ => return Err(bad()),
                }
            }
            "eta" => self.eta = num(value)?,
            "eps" => {
                self.epsilons = value
                    .split(',')
                    .map(|v| num(v.trim()))
                    .collect::<Result<_, _>>()?
            }
            "slow_length" => self.slow_length = num(value)?,
            "slow_points" => self.slow_points = int(value)?,
            "n_points" => self.points = PointsRule::Fixed(int(value)?),
            "points_per_wavelength" => self.points = PointsRule::PerWavelength(num(value)?),
            "sobolev" => self.sobolev = value.parse().map_err(|_| bad())?,
            "horizon" => self.horizon = num(value)?,
            "dt" => self.solver.dt = num(value)?,
            "filter_floor" => self.solver.filter_floor = num(value)?,
            "cfl" => self.solver.cfl = num(value)?,
            "report_every" => self.solver.report_every = int(value)?,
            "checkpoint_every" => self.solver.checkpoint_every = int(value)?,
            "coherence_tol" => self.solver.coherence_tol = num(value)?,
            "coherence_growth" => self.solver.coherence_growth = num(value)?,
            "max_chord_arc_ratio" => self.solver.max_chord_arc_ratio = num(value)?,
            "track_psi" => self.solver.track_psi = flag(value)?,
            "fd_step" => self.fd_step = num(value)?,
            "nls_points" => self.nls_points = int(value)?,
            "nls_step" => self.nls_step = num(value)?,
            "nls_time" => self.nls_time = num(value)?,
            "error_constant" => self.error_constant = num(value)?,
            "out" => self.out = PathBuf::from(value),
            "seed" => self.seed = value.parse().map_err(|_| bad())?,
            _ => return Err(ConfigError::UnknownKey(key.to_string())),
        }
        Ok(())
    }

    pub fn validate(&mut self) -> Result<(), ConfigError> {
        let fail = |m: String| Err(ConfigError::Invalid(m));
        if !(self.k > 0.0 && self.k.is_finite()) {
            return fail(format!("carrier wavenumber must be positive, got {}", self.k));
        }
        if !(self.eta >= 0.0 && self.eta.is_finite()) {
            return fail(format!("amplitude must be non-negative, got {}", self.eta));
        }
        if self.sobolev < 4 {
            return fail(format!("Sobolev index must be at least 4, got {}", self.sobolev));
        }
        if self.epsilons.is_empty() {
            return fail("empty eps list".into());
        }
        self.epsilons.sort_by(f64::total_cmp);
        self.epsilons.dedup();
        for &eps in &self.epsilons {
            if !(eps > 0.0 && eps <= 1.0) {
                return fail(format!("eps must lie in (0, 1], got {eps}"));
            }
            let waves = self.waves(eps);
            if (waves - waves.round()).abs() > 1e-9 * waves.max(1.0) || waves.round() < 1.0 {
                return fail(format!(
                    "k L / 2pi = {waves} is not a positive integer at eps = {eps}"
                ));
            }
            let n = self.n_points(eps);
            if n < self.slow_points {
                return fail(format!(
                    "fast grid of {n} points is coarser than the slow grid at eps = {eps}"
                ));
            }
        }
        if Grid::new(self.slow_points, self.slow_length).is_err() {
            return fail(format!(
                "bad slow grid ({} points, length {})",
                self.slow_points, self.slow_length
            ));
        }
        if let PointsRule::PerWavelength(p) = self.points {
            if !(p >= 2.0 && p.is_finite()) {
                return fail(format!("points per wavelength must be at least 2, got {p}"));
            }
        }
        if !(self.horizon >= 0.0 && self.horizon.is_finite()) {
            return fail(format!("horizon must be non-negative, got {}", self.horizon));
        }
        if !(self.fd_step > 0.0 && self.nls_step > 0.0 && self.nls_time >= 0.0) {
            return fail("step sizes must be positive".into());
        }
        if !(self.error_constant > 0.0) {
            return fail("error_constant must be positive".into());
        }
        Ok(())
    }

    /// Carrier wavelengths in the fast domain `L_slow / eps`.
    pub fn waves(&self, eps: f64) -> f64 {
        self.k * self.slow_length / eps / (2.0 * PI)
    }

    pub fn n_points(&self, eps: f64) -> usize {
        match self.points {
            PointsRule::Fixed(n) => n,
            PointsRule::PerWavelength(p) => ((p * self.waves(eps)).ceil() as usize).next_power_of_two(),
        }
    }

    /// Fast time horizon `horizon / eps^2`.
    pub fn t_final(&self, eps: f64) -> f64 {
        self.horizon / (eps * eps)
    }

    /// Every setting as `key = value` lines, in a fixed order; parses back to
    /// the same configuration.
    pub fn echo(&self) -> String {
        let mut s = String::new();
        let f = |x: f64| format!("{x:?}");
        let mut put = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        put("k", f(self.k));
        put(
            "envelope",
            match &self.envelope {
                EnvelopeShape::Sech => "sech".into(),
                EnvelopeShape::Gaussian => "gaussian".into(),
                EnvelopeShape::File(p) => format!("file:{}", p.display()),
            },
        );
        put("eta", f(self.eta));
        put(
            "eps",
            self.epsilons.iter().map(|&e| f(e)).collect::<Vec<_>>().join(", "),
        );
        put("slow_length", f(self.slow_length));
        put("slow_points", self.slow_points.to_string());
        match self.points {
            PointsRule::Fixed(n) => put("n_points", n.to_string()),
            PointsRule::PerWavelength(p) => put("points_per_wavelength", f(p)),
        }
        put("sobolev", self.sobolev.to_string());
        put("horizon", f(self.horizon));
        put("dt", f(self.solver.dt));
        put("filter_floor", f(self.solver.filter_floor));
        put("cfl", f(self.solver.cfl));
        put("report_every", self.solver.report_every.to_string());
        put("checkpoint_every", self.solver.checkpoint_every.to_string());
        put("coherence_tol", f(self.solver.coherence_tol));
        put("coherence_growth", f(self.solver.coherence_growth));
        put("max_chord_arc_ratio", f(self.solver.max_chord_arc_ratio));
        put("track_psi", self.solver.track_psi.to_string());
        put("fd_step", f(self.fd_step));
        put("nls_points", self.nls_points.to_string());
        put("nls_step", f(self.nls_step));
        put("nls_time", f(self.nls_time));
        put("error_constant", f(self.error_constant));
        put("out", self.out.display().to_string());
        put("seed", self.seed.to_string());
        s
    }
}

fn parse_number(v: &str) -> Option<f64> {
    let v = v.trim();
    let x = match v.strip_suffix("pi") {
        Some("") => PI,
        Some(m) => m.trim().parse::<f64>().ok()? * PI,
        None => v.parse().ok()?,
    };
    x.is_finite().then_some(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_with_pi() {
        assert_eq!(parse_number("pi"), Some(PI));
        assert_eq!(parse_number("16pi"), Some(16.0 * PI));
        assert_eq!(parse_number("0.25"), Some(0.25));
        assert_eq!(parse_number("nan"), None);
        assert_eq!(parse_number("x"), None);
    }

    #[test]
    fn echo_round_trips() {
        for base in [
            ExperimentConfig::residual_default(),
            ExperimentConfig::evolution_default(),
        ] {
            let back = ExperimentConfig::parse(&base.echo(), ExperimentConfig::residual_default())
                .unwrap();
            assert_eq!(back, base);
        }
    }

    #[test]
    fn incommensurate_domain_is_rejected() {
        let text = "slow_length = 3.0\n";
        let err = ExperimentConfig::parse(text, ExperimentConfig::residual_default()).unwrap_err();
        assert!(matches!(err, ConfigError::Invalid(_)), "{err}");
    }

    #[test]
    fn low_sobolev_index_is_rejected() {
        let err = ExperimentConfig::parse("sobolev = 3", ExperimentConfig::residual_default())
            .unwrap_err();
        assert!(matches!(err, ConfigError::Invalid(_)));
    }

    #[test]
    fn unknown_keys_and_syntax() {
        let base = ExperimentConfig::residual_default;
        assert!(matches!(
            ExperimentConfig::parse("colour = red", base()),
            Err(ConfigError::UnknownKey(_))
        ));
        assert!(matches!(
            ExperimentConfig::parse("k 1", base()),
            Err(ConfigError::Syntax { line: 1, .. })
        ));
    }

    #[test]
    fn points_rule_scales_with_eps() {
        let c = ExperimentConfig::residual_default();
        assert_eq!(c.n_points(0.16), 1024);
        assert_eq!(c.n_points(0.08), 2048);
        assert_eq!(c.n_points(0.04), 4096);
    }
}
