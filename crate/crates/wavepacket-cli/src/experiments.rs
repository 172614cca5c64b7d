//! The verification experiments behind each subcommand.

use std::fmt::Write as _;
use std::path::Path;

use anyhow::{bail, Context, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wavepacket::evolve::{self, EvolveError, PacketRun, RunReport, SolverConfig};
use wavepacket::nls::{self, Carrier, Envelope, NlsError, NlsTrajectory, Soliton};
use wavepacket::packet::{EnvelopeSource, PacketBuilder, PacketState, SlowFields};
use wavepacket::quantities::{self, CurveState};
use wavepacket::residual::{self, ConvergenceRow, FitVerdict, OrderFit, ResidualNorms};
use wavepacket::spectral::{self, Field, Grid, C64};

use crate::config::{EnvelopeShape, ExperimentConfig};

/// Target order of every residual family and the accepted band.
pub const RESIDUAL_ORDER: f64 = 3.5;
pub const RESIDUAL_BAND: f64 = 0.3;
pub const RESIDUAL_MIN_R2: f64 = 0.98;
/// Target order of the long-run error and the accepted band.
pub const ERROR_ORDER: f64 = 1.5;
pub const ERROR_BAND: f64 = 0.4;
pub const SOLITON_TOL: f64 = 1e-8;
pub const MASS_TOL: f64 = 1e-12;
pub const STRANG_ORDER: f64 = 2.0;
pub const STRANG_BAND: f64 = 0.1;

/// A named scalar with the bound it is judged against.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub target: String,
    pub pass: bool,
}

impl Check {
    fn at_most(name: &str, value: f64, bound: f64) -> Self {
        Self {
            name: name.into(),
            value,
            target: format!("<= {bound:e}"),
            pass: value <= bound,
        }
    }

    fn within(name: &str, value: f64, centre: f64, band: f64) -> Self {
        Self {
            name: name.into(),
            value,
            target: format!("{centre} +- {band}"),
            pass: (value - centre).abs() <= band,
        }
    }
}

pub fn all_pass(checks: &[Check]) -> bool {
    checks.iter().all(|c| c.pass)
}

pub fn write_checks(checks: &[Check], path: &Path) -> Result<()> {
    let mut s = String::from("check,value,target,pass\n");
    for c in checks {
        writeln!(s, "{},{:.17e},{},{}", c.name, c.value, c.target, c.pass)?;
    }
    write(path, &s)
}

pub(crate) fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

/// An envelope source that can be cloned for repeated runs.
#[derive(Debug, Clone)]
pub enum Source {
    Soliton(Soliton),
    Nls(NlsTrajectory),
}

impl EnvelopeSource for Source {
    fn envelope_at(&mut self, big_t: f64) -> Result<Envelope, NlsError> {
        match self {
            Source::Soliton(s) => Ok(s.at(big_t)),
            Source::Nls(t) => t.at(big_t),
        }
    }
}

pub fn carrier(cfg: &ExperimentConfig) -> Result<Carrier> {
    Ok(nls::dispersion(cfg.k)?)
}

pub fn slow_grid(cfg: &ExperimentConfig) -> Result<Grid> {
    Ok(Grid::new(cfg.slow_points, cfg.slow_length)?)
}

/// Envelope at `T = 0` on the slow grid.
pub fn initial_envelope(cfg: &ExperimentConfig) -> Result<Envelope> {
    let carrier = carrier(cfg)?;
    let grid = slow_grid(cfg)?;
    if cfg.eta == 0.0 {
        return Ok(Envelope::new(Field::zeros(grid), 0.0, carrier));
    }
    let field = match &cfg.envelope {
        EnvelopeShape::Sech => return Ok(nls::soliton(cfg.eta, carrier, grid)?.at(0.0)),
        EnvelopeShape::Gaussian => {
            let c = 0.5 * cfg.slow_length;
            Field::from_fn(grid, |x| C64::new(cfg.eta * (-(x - c) * (x - c)).exp(), 0.0))
        }
        EnvelopeShape::File(p) => read_envelope(p, grid)?.scale_re(cfg.eta),
    };
    Ok(Envelope::new(field, 0.0, carrier))
}

/// One `re[,im]` row per slow node; no header.
fn read_envelope(path: &Path, grid: Grid) -> Result<Field> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_path(path)
        .with_context(|| format!("reading envelope {}", path.display()))?;
    let mut samples = Vec::new();
    for record in reader.records() {
        let record = record?;
        let part = |i: usize| -> Result<f64> {
            Ok(record.get(i).filter(|v| !v.is_empty()).map_or(Ok(0.0), str::parse)?)
        };
        samples.push(C64::new(part(0)?, part(1)?));
    }
    if samples.len() != grid.n_points() {
        bail!(
            "envelope file has {} samples, the slow grid has {}",
            samples.len(),
            grid.n_points()
        );
    }
    Ok(Field::new(grid, samples)?)
}

pub fn source(cfg: &ExperimentConfig) -> Result<Source> {
    if cfg.envelope == EnvelopeShape::Sech && cfg.eta > 0.0 {
        return Ok(Source::Soliton(nls::soliton(cfg.eta, carrier(cfg)?, slow_grid(cfg)?)?));
    }
    let env = initial_envelope(cfg)?;
    let dt = nls::default_step(env.grid(), &env.carrier);
    Ok(Source::Nls(NlsTrajectory::new(env, dt)?))
}

pub fn builder(cfg: &ExperimentConfig, eps: f64) -> Result<PacketBuilder> {
    Ok(PacketBuilder::new(
        carrier(cfg)?,
        eps,
        slow_grid(cfg)?,
        cfg.n_points(eps),
    )?)
}

/// Packet bundle at `t = 0`.
pub fn initial_packet(cfg: &ExperimentConfig, eps: f64) -> Result<PacketState> {
    let slow = SlowFields::from_envelope(&initial_envelope(cfg)?);
    Ok(builder(cfg, eps)?.build_from_slow(&slow, 0.0)?)
}

// ---------------------------------------------------------------- NLS

/// Soliton accuracy, mass conservation, the splitting order, and covariance
/// under a seeded random phase and translation.
pub fn nls_check(cfg: &ExperimentConfig) -> Result<Vec<Check>> {
    let carrier = carrier(cfg)?;
    let grid = Grid::new(cfg.nls_points, cfg.slow_length)?;
    let sol = nls::soliton(cfg.eta, carrier, grid)?;
    let error_at = |dt: f64| -> Result<(f64, f64)> {
        let mut traj = nls::nls_solve(&sol.at(0.0), cfg.nls_time, dt)?;
        let end = traj.at(cfg.nls_time)?;
        let err = spectral::l2_norm(&(&end.field - &sol.at(cfg.nls_time).field));
        Ok((err, traj.max_mass_drift() / sol.at(0.0).mass()))
    };
    let (err, drift) = error_at(cfg.nls_step)?;
    // Halving sequence coarse enough to sit well above round-off.
    let steps = [4.0, 8.0, 16.0].map(|m| m * cfg.nls_step);
    let errs = steps
        .iter()
        .map(|&dt| error_at(dt).map(|e| e.0))
        .collect::<Result<Vec<_>>>()?;
    let fit = residual::order_fit(&steps, &errs, residual::FIT_FLOOR)?;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let theta = rng.gen_range(0.0..std::f64::consts::TAU);
    let shift = rng.gen_range(0..grid.n_points());
    let b0 = sol.at(0.0);
    let moved = Envelope::new(
        b0.field.roll(shift).scale(C64::from_polar(1.0, theta)),
        0.0,
        carrier,
    );
    let a = nls::nls_step(&b0, cfg.nls_step)?
        .field
        .roll(shift)
        .scale(C64::from_polar(1.0, theta));
    let b = nls::nls_step(&moved, cfg.nls_step)?.field;
    let covariance = spectral::l2_norm(&(&a - &b));
    Ok(vec![
        Check::at_most("soliton_l2_error", err, SOLITON_TOL),
        Check::at_most("relative_mass_drift", drift, MASS_TOL),
        Check::within(
            "strang_slope",
            fit.slope.unwrap_or(f64::NAN),
            STRANG_ORDER,
            STRANG_BAND,
        ),
        Check::at_most("phase_translation_covariance", covariance, 1e-12),
    ])
}

// ---------------------------------------------------------- residuals

#[derive(Debug, Clone)]
pub struct FamilyFit {
    pub name: String,
    /// `None` when fewer than three `eps` values were given.
    pub fit: Option<OrderFit>,
}

impl FamilyFit {
    pub fn in_band(&self, order: f64, band: f64, min_r2: f64) -> bool {
        match &self.fit {
            None => true,
            Some(f) => match f.verdict {
                FitVerdict::Floor => true,
                FitVerdict::Slope => {
                    let s = f.slope.unwrap_or(f64::NAN);
                    (s - order).abs() <= band && f.r_squared.unwrap_or(0.0) >= min_r2
                }
            },
        }
    }
}

#[derive(Debug, Clone)]
pub struct ResidualSweep {
    pub rows: Vec<ConvergenceRow>,
    pub fits: Vec<FamilyFit>,
}

impl ResidualSweep {
    pub fn pass(&self) -> bool {
        self.fits
            .iter()
            .all(|f| f.in_band(RESIDUAL_ORDER, RESIDUAL_BAND, RESIDUAL_MIN_R2))
    }
}

/// Residual norms at `t = 0` for one `eps`.
pub fn residuals_at(cfg: &ExperimentConfig, eps: f64, n_points: usize) -> Result<ResidualNorms> {
    let slow = SlowFields::from_envelope(&initial_envelope(cfg)?);
    let b = PacketBuilder::new(carrier(cfg)?, eps, slow_grid(cfg)?, n_points)?;
    Ok(residual::residual_norms(
        &b,
        &slow,
        0.0,
        cfg.fd_step,
        cfg.sobolev as f64,
    )?)
}

pub fn residual_sweep(cfg: &ExperimentConfig) -> Result<ResidualSweep> {
    let norms = wavepacket::map_jobs(&cfg.epsilons, |&e| residuals_at(cfg, e, cfg.n_points(e)));
    let norms: Vec<ResidualNorms> = norms.into_iter().collect::<Result<_>>()?;
    let mut rows = Vec::new();
    let mut fits = Vec::new();
    for (i, name) in ResidualNorms::NAMES.iter().enumerate() {
        let series: Vec<f64> = norms.iter().map(|n| n.as_array()[i]).collect();
        let fit = if cfg.epsilons.len() >= 3 {
            Some(residual::order_fit(&cfg.epsilons, &series, residual::FIT_FLOOR)?)
        } else {
            None
        };
        for (&eps, &norm) in cfg.epsilons.iter().zip(&series) {
            rows.push(ConvergenceRow {
                equation: name.to_string(),
                epsilon: eps,
                n_points: cfg.n_points(eps),
                norm,
                slope: fit.as_ref().and_then(|f| f.slope),
                r_squared: fit.as_ref().and_then(|f| f.r_squared),
                verdict: fit.as_ref().map(|f| f.verdict),
            });
        }
        fits.push(FamilyFit {
            name: name.to_string(),
            fit,
        });
    }
    Ok(ResidualSweep { rows, fits })
}

/// Leading-order predictions for `b`, `A` and `G` on the packet taken as a
/// state: `b + eps^2 k w |B|^2`, `A - 1`, `G - eps^3 G3` in `H^s`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Multiscale {
    pub eps: f64,
    pub b_leading: f64,
    pub a_minus_one: f64,
    pub g_cubic: f64,
}

impl Multiscale {
    pub const NAMES: [&'static str; 3] = ["b_leading", "a_minus_one", "g_cubic"];
    /// Expected orders of the three defects.
    pub const ORDERS: [f64; 3] = [2.5, 2.5, 3.5];

    pub fn as_array(&self) -> [f64; 3] {
        [self.b_leading, self.a_minus_one, self.g_cubic]
    }
}

pub fn multiscale_at(cfg: &ExperimentConfig, eps: f64) -> Result<Multiscale> {
    let p = initial_packet(cfg, eps)?;
    let st = CurveState::new(&p.xi_tilde, p.dt_zeta.clone(), 0.0)?;
    let s = cfg.sobolev as f64;
    let c = &p.carrier;
    let b_pred = p.zeta1.abs_sqr().scale_re(-eps * eps * c.k * c.omega);
    let g = quantities::compute_g(&st.curve, &st.u)?;
    Ok(Multiscale {
        eps,
        b_leading: spectral::sobolev_norm(&(&st.b - &b_pred), s),
        a_minus_one: spectral::sobolev_norm(&st.a.add_const(C64::new(-1.0, 0.0)), s),
        g_cubic: spectral::sobolev_norm(&(&g - &p.g3.scale_re(eps.powi(3))), s),
    })
}

// --------------------------------------------------------- admissible

/// Distances of the admissible data from the packet at `t = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdmissibleDistances {
    pub eps: f64,
    /// `||xi_0 - xi~(0)||`.
    pub xi: f64,
    /// `||v_0 - D~_t zeta~(0)||`.
    pub v: f64,
    /// `||w_0 - eps (i w)^2 zeta1(0)||`.
    pub w: f64,
    pub iterations: usize,
    pub contraction_ratio: f64,
    /// Remainder energy of the admissible data.
    pub energy: f64,
}

impl AdmissibleDistances {
    pub const NAMES: [&'static str; 3] = ["xi", "v", "w"];

    pub fn as_array(&self) -> [f64; 3] {
        [self.xi, self.v, self.w]
    }
}

pub fn admissible_at(cfg: &ExperimentConfig, eps: f64) -> Result<AdmissibleDistances> {
    let p = initial_packet(cfg, eps)?;
    let adm = evolve::admissible_data(&p, cfg.sobolev)?;
    let s = cfg.sobolev as f64;
    let st = &adm.state;
    let w_pred = p.zeta1.scale_re(-eps * p.carrier.omega * p.carrier.omega);
    let rec = quantities::remainder_diagnostics(st, &p, cfg.sobolev)?;
    Ok(AdmissibleDistances {
        eps,
        xi: spectral::sobolev_norm(&(st.xi() - &p.xi_tilde), s),
        v: spectral::sobolev_norm(&(&st.u - &p.dt_zeta), s),
        w: spectral::sobolev_norm(&(&st.w - &w_pred), s),
        iterations: adm.iterations,
        contraction_ratio: adm.max_ratio(),
        energy: rec.energy_total,
    })
}

pub fn write_admissible(rows: &[AdmissibleDistances], path: &Path) -> Result<()> {
    let mut s = String::from("epsilon,xi,v,w,iterations,contraction_ratio,energy\n");
    for r in rows {
        writeln!(
            s,
            "{:.17e},{:.17e},{:.17e},{:.17e},{},{:.17e},{:.17e}",
            r.eps, r.xi, r.v, r.w, r.iterations, r.contraction_ratio, r.energy
        )?;
    }
    write(path, &s)
}

// ---------------------------------------------------------- evolution

pub fn solver_config(cfg: &ExperimentConfig) -> SolverConfig {
    SolverConfig {
        sobolev_index: cfg.sobolev,
        ..cfg.solver.clone()
    }
}

/// Admissible data and a run to `horizon / eps^2`.
pub fn evolve_eps(cfg: &ExperimentConfig, eps: f64, checkpoint: Option<&Path>) -> Result<PacketRun> {
    let src = source(cfg)?;
    let run = evolve::packet_run(
        builder(cfg, eps)?,
        || Ok::<_, EvolveError>(src.clone()),
        &solver_config(cfg),
        cfg.t_final(eps),
        checkpoint,
    )?;
    Ok(run)
}

/// `max_t E_s / (sqrt(energy) + eps^{5/2})^2` along a run.
pub fn energy_coherence(report: &RunReport) -> f64 {
    let e = report.epsilon;
    report
        .rows
        .iter()
        .map(|r| r.e_s / (r.energy_total.max(0.0).sqrt() + e.powf(2.5)).powi(2))
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone)]
pub struct Scaling {
    pub runs: Vec<PacketRun>,
    /// Slope of the max error against `eps` (needs two completed runs).
    pub error_slope: Option<f64>,
    pub eulerian_slope: Option<f64>,
}

impl Scaling {
    pub fn ratios(&self) -> Vec<f64> {
        self.runs
            .iter()
            .map(|r| r.report.max_error() / r.report.epsilon.powf(1.5))
            .collect()
    }

    pub fn checks(&self, error_constant: f64) -> Vec<Check> {
        let mut out = Vec::new();
        for r in &self.runs {
            let e = r.report.epsilon;
            out.push(Check {
                name: format!("completed_eps_{e:?}"),
                value: r.report.rows.last().map_or(0.0, |x| x.t),
                target: r.report.termination.label().into(),
                pass: r.report.completed(),
            });
            out.push(Check::at_most(
                &format!("error_ratio_eps_{e:?}"),
                r.report.max_error() / e.powf(1.5),
                error_constant,
            ));
        }
        if let Some(s) = self.error_slope {
            out.push(Check::within("error_slope", s, ERROR_ORDER, ERROR_BAND));
        }
        if let Some(s) = self.eulerian_slope {
            out.push(Check::within("eulerian_slope", s, ERROR_ORDER, ERROR_BAND));
        }
        out
    }
}

pub fn error_scaling(cfg: &ExperimentConfig) -> Result<Scaling> {
    let runs = wavepacket::map_jobs(&cfg.epsilons, |&e| evolve_eps(cfg, e, None));
    let runs: Vec<PacketRun> = runs.into_iter().collect::<Result<_>>()?;
    let slope = |f: &dyn Fn(&RunReport) -> f64| -> Result<Option<f64>> {
        if runs.len() < 2 || !runs.iter().all(|r| r.report.completed()) {
            return Ok(None);
        }
        let eps: Vec<f64> = runs.iter().map(|r| r.report.epsilon).collect();
        let y: Vec<f64> = runs.iter().map(|r| f(&r.report)).collect();
        Ok(residual::pairwise_fit(&eps, &y, residual::FIT_FLOOR)?.slope)
    };
    let error_slope = slope(&|r| r.max_error())?;
    let eulerian_slope = slope(&|r| r.max_eulerian())?;
    Ok(Scaling {
        runs,
        error_slope,
        eulerian_slope,
    })
}

/// Slope table rows: one per fitted quantity.
pub fn write_slopes(rows: &[(String, Option<OrderFit>, bool)], path: &Path) -> Result<()> {
    let mut s = String::from("quantity,slope,r_squared,in_band\n");
    for (name, fit, ok) in rows {
        let v = fit.as_ref().map(|f| f.verdict);
        let slope = residual::slope_cell(v, fit.as_ref().and_then(|f| f.slope));
        let r2 = residual::slope_cell(v, fit.as_ref().and_then(|f| f.r_squared));
        writeln!(s, "{name},{slope},{r2},{ok}")?;
    }
    write(path, &s)
}
