//! Time evolution of `(zeta, u)` under `zeta_t = u - b zeta_a`,
//! `u_t = (i A zeta_a - i) - b u_a`, admissible initial data, error tracking
//! against the packet and the Eulerian graph of the surface.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use thiserror::Error;

use crate::curveops::{Curve, CurveError};
use crate::packet::{EnvelopeSource, PacketBuilder, PacketError, PacketProvider, PacketState};
use crate::quantities::{self, CurveState, QuantError};
use crate::spectral::{self, Field, Grid, SpectralError, C64};

#[derive(Debug, Error)]
pub enum EvolveError {
    #[error("invalid solver configuration: {0}")]
    Config(String),
    #[error("admissible-data iteration is not a contraction (ratio {ratio})")]
    NotContracting { ratio: f64 },
    #[error("admissible-data iteration stalled after {iterations} steps (update {update:e})")]
    NoConvergence { iterations: usize, update: f64 },
    #[error("x(alpha) is not monotone (min dx/dalpha = {min_slope})")]
    NonMonotone { min_slope: f64 },
    #[error("Newton inversion of x(alpha) failed at node {node}")]
    Newton { node: usize },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Curve(#[from] CurveError),
    #[error(transparent)]
    Quant(#[from] QuantError),
    #[error(transparent)]
    Packet(#[from] PacketError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub dt: f64,
    /// Relative Krasny floor applied after every stage.
    pub filter_floor: f64,
    /// Only classical RK4 is implemented.
    pub rk_order: u32,
    /// Coherence below this is never treated as lost.
    pub coherence_tol: f64,
    /// Allowed growth of the coherence over its initial value.
    pub coherence_growth: f64,
    /// Steps between checkpoints (0 disables them).
    pub checkpoint_every: usize,
    /// Largest admissible `N / nu` from the chord-arc monitor.
    pub max_chord_arc_ratio: f64,
    /// Steps between report rows.
    pub report_every: usize,
    /// Sobolev index of the error norms.
    pub sobolev_index: u32,
    /// `dt <= cfl sqrt(h)`.
    pub cfl: f64,
    pub track_psi: bool,
    /// Node stride of the chord-arc monitor.
    pub chord_stride: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            dt: 0.1,
            filter_floor: 1e-13,
            rk_order: 4,
            coherence_tol: 1e-6,
            coherence_growth: 10.0,
            checkpoint_every: 0,
            max_chord_arc_ratio: 10.0,
            report_every: 50,
            sobolev_index: 4,
            cfl: 0.5,
            track_psi: false,
            chord_stride: 4,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self, grid: Grid) -> Result<(), EvolveError> {
        let bad = |m: String| Err(EvolveError::Config(m));
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return bad(format!("dt must be positive, got {}", self.dt));
        }
        if !(0.0..=1e-8).contains(&self.filter_floor) {
            return bad(format!("filter_floor must lie in [0, 1e-8], got {}", self.filter_floor));
        }
        if self.rk_order != 4 {
            return bad(format!("rk_order must be 4, got {}", self.rk_order));
        }
        if self.report_every == 0 || self.chord_stride == 0 {
            return bad("report_every and chord_stride must be positive".into());
        }
        let limit = self.cfl * grid.spacing().sqrt();
        if self.dt > limit {
            return bad(format!("dt = {} exceeds the CFL limit {limit}", self.dt));
        }
        Ok(())
    }
}

/// Admissible initial data and the diagnostics of its construction.
#[derive(Debug, Clone)]
pub struct AdmissibleData {
    pub state: CurveState,
    pub iterations: usize,
    /// `||g_{n+1} - g_n|| / ||g_n - g_{n-1}||` in `H^s`.
    pub contraction_ratios: Vec<f64>,
}

impl AdmissibleData {
    pub fn max_ratio(&self) -> f64 {
        self.contraction_ratios.iter().cloned().fold(0.0, f64::max)
    }
}

const ADMISSIBLE_TOL: f64 = 1e-12;
/// Updates below this (relative) are round-off dominated.
const ADMISSIBLE_NOISE: f64 = 1e-9;
const ADMISSIBLE_MAX_ITER: usize = 60;

/// `xi_0 = g` with `g = (1/2)(I + Hb_{alpha + g}) xi~(0)` by iteration from
/// `g = 0`, `u_0 = (1/2)(I + Hb_{zeta_0}) D~_t zeta~(0)`, and `w_0` through `A_0`.
/// Means of `xi_0` and `u_0` are set to those of the packet; the projections
/// only fix the fields up to constants.
pub fn admissible_data(packet: &PacketState, s: u32) -> Result<AdmissibleData, EvolveError> {
    let xi = &packet.xi_tilde;
    let g = packet.grid();
    let sf = s as f64;
    let half = |c: &Curve, f: &Field| (f + &c.conj_hilbert(f)).scale_re(0.5);
    let mut cur = half(&Curve::flat(g), xi);
    let mut last_step = spectral::sobolev_norm(&cur, sf);
    let mut ratios = Vec::new();
    let mut iterations = 1;
    let scale = 1.0 + spectral::sobolev_norm(xi, sf);
    while last_step > ADMISSIBLE_TOL * scale {
        if iterations >= ADMISSIBLE_MAX_ITER {
            return Err(EvolveError::NoConvergence {
                iterations,
                update: last_step,
            });
        }
        let curve = Curve::from_perturbation(&cur)?;
        let next = half(&curve, xi);
        let step = spectral::sobolev_norm(&(&next - &cur), sf);
        let ratio = step / last_step;
        cur = next;
        iterations += 1;
        if step > ADMISSIBLE_NOISE * scale {
            if ratio >= 1.0 {
                return Err(EvolveError::NotContracting { ratio });
            }
            ratios.push(ratio);
        } else if ratio > 0.9 {
            // Stalled at round-off, amplified by the H^s weights.
            break;
        }
        last_step = step;
    }
    let xi0 = cur.remove_mean().add_const(xi.mean());
    let curve = Curve::from_perturbation(&xi0)?;
    let u0 = project(&curve, &packet.dt_zeta);
    let state = CurveState::from_curve(curve, u0, packet.time)?;
    let state = state.with_psi(packet.psi_tilde.clone());
    Ok(AdmissibleData {
        state,
        iterations,
        contraction_ratios: ratios,
    })
}

/// `(xi_t, u_t, Psi_t)` at a state.
pub fn rhs(state: &CurveState) -> (Field, Field, Option<Field>) {
    let za = state.zeta_alpha();
    let xi_t = &state.u - &(&state.b * za);
    let u_t = &state.w - &(&state.b * &spectral::derivative(&state.u, 1));
    let psi_t = state.psi.as_ref().map(|p| {
        let half = state.u.abs_sqr().scale_re(0.5);
        &(&half - &state.xi().im()) - &(&state.b * &spectral::derivative(p, 1))
    });
    (xi_t, u_t, psi_t)
}

/// `(1/2)(I + Hb_zeta) f` with the mean of `f` kept.
fn project(curve: &Curve, f: &Field) -> Field {
    let p = (f + &curve.conj_hilbert(f)).scale_re(0.5);
    p.remove_mean().add_const(f.mean())
}

/// Result of one RK4 step.
#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub state: CurveState,
    /// `||(I - Hb_zeta) u||_{L^2}` (constants excluded) of the update before
    /// projection.
    pub coherence: f64,
}

fn stage(
    base: &CurveState,
    k: &(Field, Field, Option<Field>),
    h: f64,
    time: f64,
    floor: f64,
) -> Result<StepOutcome, EvolveError> {
    let xi = spectral::krasny_filter(&(base.xi() + &k.0.scale_re(h)), floor);
    let u = spectral::krasny_filter(&(&base.u + &k.1.scale_re(h)), floor);
    // Without the antiholomorphy constraint the system amplifies the
    // holomorphic part of the data like exp(sqrt|m| t); project it away.
    let xi = project(&Curve::from_perturbation(&xi)?, &xi);
    let curve = Curve::from_perturbation(&xi)?;
    let hb_u = curve.conj_hilbert(&u);
    let coherence = spectral::l2_norm(&(&u - &hb_u).remove_mean());
    let u = (&u + &hb_u).scale_re(0.5).remove_mean().add_const(u.mean());
    let mut state = CurveState::from_curve(curve, u, time)?;
    if let (Some(p), Some(pt)) = (&base.psi, &k.2) {
        state = state.with_psi(spectral::krasny_filter(&(p + &pt.scale_re(h)), floor));
    }
    Ok(StepOutcome { state, coherence })
}

/// One classical RK4 step with `b`, `A` recomputed at every stage.
pub fn step(state: &CurveState, dt: f64, filter_floor: f64) -> Result<StepOutcome, EvolveError> {
    let t = state.time;
    let k1 = rhs(state);
    let s2 = stage(state, &k1, 0.5 * dt, t + 0.5 * dt, filter_floor)?.state;
    let k2 = rhs(&s2);
    let s3 = stage(state, &k2, 0.5 * dt, t + 0.5 * dt, filter_floor)?.state;
    let k3 = rhs(&s3);
    let s4 = stage(state, &k3, dt, t + dt, filter_floor)?.state;
    let k4 = rhs(&s4);
    let combine = |a: &Field, b: &Field, c: &Field, d: &Field| {
        let sum = &(&(a + &b.scale_re(2.0)) + &c.scale_re(2.0)) + d;
        sum.scale_re(dt / 6.0)
    };
    let dxi = combine(&k1.0, &k2.0, &k3.0, &k4.0);
    let du = combine(&k1.1, &k2.1, &k3.1, &k4.1);
    let incr = (dxi, du, match (&k1.2, &k2.2, &k3.2, &k4.2) {
        (Some(a), Some(b), Some(c), Some(d)) => Some(combine(a, b, c, d)),
        _ => None,
    });
    stage(state, &incr, 1.0, t + dt, filter_floor)
}

/// Why a run stopped.
#[derive(Debug, Clone, PartialEq)]
pub enum Termination {
    Completed,
    ChordArcViolation { time: f64 },
    CoherenceLoss { time: f64, coherence: f64 },
    NonFinite { time: f64 },
    /// `A < 1/2` or a failed fixed point.
    Regime { time: f64, reason: String },
}

impl Termination {
    pub fn label(&self) -> &'static str {
        match self {
            Termination::Completed => "completed",
            Termination::ChordArcViolation { .. } => "chord_arc_violation",
            Termination::CoherenceLoss { .. } => "coherence_loss",
            Termination::NonFinite { .. } => "nan",
            Termination::Regime { .. } => "regime",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub t: f64,
    pub err_zeta_alpha: f64,
    pub err_u: f64,
    pub e_s: f64,
    pub energy_total: f64,
    /// `||(I - Hb_zeta) u||_{L^2}` of the last step's update, taken before
    /// the antiholomorphic projection (of the state itself at `t = 0`).
    pub coherence: f64,
    pub chord_arc_min: f64,
    /// `||eta_x - eps k Re zeta1||_{H^s}` of the Eulerian graph.
    pub eulerian: f64,
    pub rho: f64,
    pub sigma: f64,
    /// Mean of `Im zeta`.
    pub mean_height: f64,
}

impl ReportRow {
    pub fn error(&self) -> f64 {
        self.err_zeta_alpha + self.err_u
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub epsilon: f64,
    pub n_points: usize,
    pub dt: f64,
    pub steps: usize,
    pub rows: Vec<ReportRow>,
    pub termination: Termination,
}

impl RunReport {
    pub fn max_error(&self) -> f64 {
        self.rows.iter().map(ReportRow::error).fold(0.0, f64::max)
    }

    pub fn max_eulerian(&self) -> f64 {
        self.rows.iter().map(|r| r.eulerian).fold(0.0, f64::max)
    }

    pub fn completed(&self) -> bool {
        self.termination == Termination::Completed
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(
            out,
            "t,err_zeta_alpha,err_u,E_s,energy_total,coherence,chord_arc_min,eulerian,rho,sigma,mean_height"
        )?;
        for r in &self.rows {
            writeln!(
                out,
                "{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}",
                r.t,
                r.err_zeta_alpha,
                r.err_u,
                r.e_s,
                r.energy_total,
                r.coherence,
                r.chord_arc_min,
                r.eulerian,
                r.rho,
                r.sigma,
                r.mean_height
            )?;
        }
        Ok(())
    }
}

/// Error norms, remainder diagnostics and monitors of `state` against the
/// packet at the same time.
pub fn report_row(
    state: &CurveState,
    packet: &PacketState,
    cfg: &SolverConfig,
) -> Result<ReportRow, EvolveError> {
    let s = cfg.sobolev_index as f64;
    let d_alpha = spectral::derivative(&(state.xi() - &packet.xi_tilde), 1);
    let err_zeta_alpha = spectral::sobolev_norm(&d_alpha, s);
    let err_u = spectral::sobolev_norm(&(&state.u - &packet.dt_zeta), s);
    let rec = quantities::remainder_diagnostics(state, packet, cfg.sobolev_index)?;
    let eulerian = match eulerian_profile(state) {
        Ok(p) => {
            let eta_x = spectral::derivative(&p.eta, 1);
            let lead = packet
                .zeta1
                .re()
                .scale_re(packet.epsilon * packet.carrier.k);
            spectral::sobolev_norm(&(&eta_x - &lead), s)
        }
        Err(_) => f64::NAN,
    };
    Ok(ReportRow {
        t: state.time,
        err_zeta_alpha,
        err_u,
        e_s: rec.e_s,
        energy_total: rec.energy_total,
        coherence: state.coherence(),
        chord_arc_min: state.curve.chord_arc(cfg.chord_stride).nu,
        eulerian,
        rho: rec.rho_norm,
        sigma: rec.sigma_norm,
        mean_height: state.xi().im().mean().re,
    })
}

/// Integrates from `initial` to `t_final`, comparing with the packet every
/// `report_every` steps and at the end. Monitors end the run early with a
/// report instead of an error.
pub fn run<S: EnvelopeSource>(
    initial: &CurveState,
    cfg: &SolverConfig,
    t_final: f64,
    provider: &mut PacketProvider<S>,
    checkpoint: Option<&Path>,
) -> Result<(RunReport, CurveState), EvolveError> {
    let grid = initial.grid();
    cfg.validate(grid)?;
    if !(t_final >= 0.0) {
        return Err(EvolveError::Config(format!("t_final must be >= 0, got {t_final}")));
    }
    let n_steps = (t_final / cfg.dt).ceil() as usize;
    let dt = if n_steps == 0 { cfg.dt } else { t_final / n_steps as f64 };
    let t0 = initial.time;
    let mut state = initial.clone();
    if !cfg.track_psi {
        state.psi = None;
    }
    let mut report = RunReport {
        epsilon: provider.builder().epsilon(),
        n_points: grid.n_points(),
        dt,
        steps: 0,
        rows: Vec::new(),
        termination: Termination::Completed,
    };
    let first = report_row(&state, &provider.at(t0)?, cfg)?;
    let coherence_limit = cfg.coherence_tol.max(cfg.coherence_growth * first.coherence);
    report.rows.push(first);
    for n in 1..=n_steps {
        let t = t0 + n as f64 * dt;
        let outcome = match step(&state, dt, cfg.filter_floor) {
            Ok(s) => s,
            Err(e) => {
                report.termination = classify(e, t)?;
                break;
            }
        };
        let next = outcome.state;
        if !next.xi().samples().iter().chain(next.u.samples()).all(|z| z.is_finite()) {
            report.termination = Termination::NonFinite { time: t };
            break;
        }
        state = next;
        // Keep the stage time exact.
        state.time = t;
        report.steps = n;
        if cfg.checkpoint_every > 0 && n % cfg.checkpoint_every == 0 {
            if let Some(path) = checkpoint {
                write_checkpoint(path, &state, report.epsilon)?;
            }
        }
        if n % cfg.report_every == 0 || n == n_steps {
            let mut row = report_row(&state, &provider.at(t)?, cfg)?;
            row.coherence = outcome.coherence;
            let ca = state.curve.chord_arc(cfg.chord_stride);
            let (coh, bad_ca) = (row.coherence, ca.ratio() > cfg.max_chord_arc_ratio);
            report.rows.push(row);
            if bad_ca {
                report.termination = Termination::ChordArcViolation { time: t };
                break;
            }
            if coh > coherence_limit {
                report.termination = Termination::CoherenceLoss { time: t, coherence: coh };
                break;
            }
        }
    }
    Ok((report, state))
}

fn classify(e: EvolveError, time: f64) -> Result<Termination, EvolveError> {
    match e {
        EvolveError::Curve(CurveError::ChordArc { .. })
        | EvolveError::Quant(QuantError::Curve(CurveError::ChordArc { .. })) => {
            Ok(Termination::ChordArcViolation { time })
        }
        EvolveError::Quant(q @ (QuantError::Regime { .. } | QuantError::ANonConvergence { .. })) => {
            Ok(Termination::Regime {
                time,
                reason: q.to_string(),
            })
        }
        EvolveError::Quant(QuantError::Curve(c @ CurveError::NonConvergence { .. })) => {
            Ok(Termination::Regime {
                time,
                reason: c.to_string(),
            })
        }
        other => Err(other),
    }
}

/// Admissible data plus run, on the builder's grid and, after a coherence
/// loss, once more on a grid with twice the points.
#[derive(Debug, Clone)]
pub struct PacketRun {
    pub report: RunReport,
    pub admissible_iterations: usize,
    pub contraction_ratio: f64,
    pub refined: bool,
}

pub fn packet_run<S, F>(
    builder: PacketBuilder,
    make_source: F,
    cfg: &SolverConfig,
    t_final: f64,
    checkpoint: Option<&Path>,
) -> Result<PacketRun, EvolveError>
where
    S: EnvelopeSource,
    F: Fn() -> Result<S, EvolveError>,
{
    let attempt = |b: PacketBuilder| -> Result<PacketRun, EvolveError> {
        let mut provider = PacketProvider::new(b, make_source()?);
        let packet0 = provider.at(0.0)?;
        let adm = admissible_data(&packet0, cfg.sobolev_index)?;
        let (report, _) = run(&adm.state, cfg, t_final, &mut provider, checkpoint)?;
        Ok(PacketRun {
            report,
            admissible_iterations: adm.iterations,
            contraction_ratio: adm.max_ratio(),
            refined: false,
        })
    };
    let first = attempt(builder)?;
    if !matches!(first.report.termination, Termination::CoherenceLoss { .. }) {
        return Ok(first);
    }
    let n = builder.fast_grid().n_points() * 2;
    let finer = PacketBuilder::new(builder.carrier(), builder.epsilon(), builder.slow_grid(), n)?
        .with_psi_cubic(builder.psi_cubic());
    let mut second = attempt(finer)?;
    second.refined = true;
    Ok(second)
}

/// Surface as a graph `y = eta(x)` on the nodes of the state's grid, with the
/// velocity trace at the same points.
#[derive(Debug, Clone, PartialEq)]
pub struct EulerianProfile {
    pub x: Vec<f64>,
    /// `alpha(x)`.
    pub alpha: Vec<f64>,
    pub eta: Field,
    pub velocity: Field,
}

const NEWTON_TOL: f64 = 1e-12;
const NEWTON_MAX_ITER: usize = 50;

pub fn eulerian_profile(state: &CurveState) -> Result<EulerianProfile, EvolveError> {
    let g = state.grid();
    let xi = state.xi();
    let slope = spectral::derivative(xi, 1);
    let min_slope = slope
        .samples()
        .iter()
        .fold(f64::INFINITY, |m, z| m.min(1.0 + z.re));
    if min_slope <= 0.0 {
        return Err(EvolveError::NonMonotone { min_slope });
    }
    let cx = xi.coefficients();
    let cu = state.u.coefficients();
    let x = g.nodes();
    let mut alpha = Vec::with_capacity(x.len());
    let mut eta = Vec::with_capacity(x.len());
    let mut vel = Vec::with_capacity(x.len());
    for (j, &xj) in x.iter().enumerate() {
        let mut a = xj - xi.samples()[j].re;
        let mut ok = false;
        for _ in 0..NEWTON_MAX_ITER {
            let f = a + spectral::interpolate_at(&cx, g, a).re - xj;
            let df = 1.0 + spectral::interpolate_derivative_at(&cx, g, a).re;
            let da = f / df;
            a -= da;
            if da.abs() < NEWTON_TOL {
                ok = true;
                break;
            }
        }
        if !ok {
            return Err(EvolveError::Newton { node: j });
        }
        alpha.push(a);
        eta.push(C64::new(spectral::interpolate_at(&cx, g, a).im, 0.0));
        vel.push(spectral::interpolate_at(&cu, g, a));
    }
    Ok(EulerianProfile {
        x,
        alpha,
        eta: Field::new(g, eta)?,
        velocity: Field::new(g, vel)?,
    })
}

/// Checkpoint layout (all little-endian):
///
/// ```text
/// magic    8 bytes  "WPCKPT01"
/// version  u32      1
/// flags    u32      bit 0: Psi present
/// n        u64      grid points
/// length   f64      domain length
/// time     f64
/// epsilon  f64
/// zeta     n x (re f64, im f64)
/// u        n x (re f64, im f64)
/// Psi      n x (re f64, im f64)   if flagged
/// ```
pub const CHECKPOINT_MAGIC: &[u8; 8] = b"WPCKPT01";
pub const CHECKPOINT_VERSION: u32 = 1;

pub fn write_checkpoint(path: &Path, state: &CurveState, epsilon: f64) -> Result<(), EvolveError> {
    let mut w = BufWriter::new(File::create(path)?);
    let g = state.grid();
    w.write_all(CHECKPOINT_MAGIC)?;
    w.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
    let flags: u32 = state.psi.is_some() as u32;
    w.write_all(&flags.to_le_bytes())?;
    w.write_all(&(g.n_points() as u64).to_le_bytes())?;
    for v in [g.length(), state.time, epsilon] {
        w.write_all(&v.to_le_bytes())?;
    }
    let mut put = |f: &Field| -> std::io::Result<()> {
        for z in f.samples() {
            w.write_all(&z.re.to_le_bytes())?;
            w.write_all(&z.im.to_le_bytes())?;
        }
        Ok(())
    };
    put(state.curve.gamma())?;
    put(&state.u)?;
    if let Some(p) = &state.psi {
        put(p)?;
    }
    w.flush()?;
    Ok(())
}

/// Contents of a checkpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub grid: Grid,
    pub time: f64,
    pub epsilon: f64,
    pub zeta: Field,
    pub u: Field,
    pub psi: Option<Field>,
}

impl Checkpoint {
    /// Rebuilds the full state (`b`, `A`, `w`).
    pub fn into_state(self) -> Result<CurveState, EvolveError> {
        let xi = &self.zeta - &Field::coordinate(self.grid);
        let mut st = CurveState::new(&xi, self.u, self.time)?;
        if let Some(p) = self.psi {
            st = st.with_psi(p);
        }
        Ok(st)
    }
}

pub fn read_checkpoint(path: &Path) -> Result<Checkpoint, EvolveError> {
    let mut bytes = Vec::new();
    File::open(path)?.read_to_end(&mut bytes)?;
    let bad = |m: &str| EvolveError::Checkpoint(m.to_string());
    if bytes.len() < 48 || &bytes[..8] != CHECKPOINT_MAGIC {
        return Err(bad("bad magic"));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
    let u64_at = |o: usize| u64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
    let f64_at = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
    if u32_at(8) != CHECKPOINT_VERSION {
        return Err(bad("unsupported version"));
    }
    let has_psi = u32_at(12) & 1 == 1;
    let n = u64_at(16) as usize;
    let (length, time, epsilon) = (f64_at(24), f64_at(32), f64_at(40));
    let arrays = if has_psi { 3 } else { 2 };
    if bytes.len() != 48 + arrays * n * 16 {
        return Err(bad("truncated or oversized payload"));
    }
    let grid = Grid::new(n, length)?;
    let field = |k: usize| -> Result<Field, EvolveError> {
        let base = 48 + k * n * 16;
        let v = (0..n)
            .map(|j| C64::new(f64_at(base + 16 * j), f64_at(base + 16 * j + 8)))
            .collect();
        Ok(Field::new(grid, v)?)
    };
    Ok(Checkpoint {
        grid,
        time,
        epsilon,
        zeta: field(0)?,
        u: field(1)?,
        psi: if has_psi { Some(field(2)?) } else { None },
    })
}
