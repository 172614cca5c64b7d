//! Expanded Hilbert operators, residuals of the approximate solution, and
//! log-log order fits.
//!
//! Residual norms are reported for the mean-free part of each defect. On a
//! periodic domain a holomorphic function bounded below the curve has a
//! constant limit at depth, and its boundary trace satisfies
//! `H f = f - const`; the constant is therefore not a defect.

use std::io::Write;

use thiserror::Error;

use crate::curveops::{Curve, CurveError};
use crate::jet::{flat_commutator, Operand};
use crate::packet::{PacketBuilder, PacketError, PacketState, SlowFields};
use crate::quantities::{self, QuantError};
use crate::spectral::{self, Field, C64, I};

/// Default round-off floor for order fits.
pub const FIT_FLOOR: f64 = 1e-11;
/// Default temporal differencing step. Smaller steps let the round-off of
/// the `O(N^2)` quadrature, divided by `delta^2`, show up in `H^4` norms.
pub const FD_STEP: f64 = 1e-2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ResidualError {
    #[error("expanded Hilbert order must be 0, 1 or 2, got {0}")]
    Order(u32),
    #[error("order fit needs at least {need} points, got {got}")]
    TooFewPoints { need: usize, got: usize },
    #[error("epsilons must be positive and strictly increasing")]
    BadEpsilons,
    #[error("epsilon and norm lists differ in length")]
    LengthMismatch,
    #[error(transparent)]
    Curve(#[from] CurveError),
    #[error(transparent)]
    Quant(#[from] QuantError),
    #[error(transparent)]
    Packet(#[from] PacketError),
}

/// `H_order f` built from flat commutators:
/// `H1 f = [z1, H0] f_a`,
/// `H2 f = [z2, H0] f_a - [z1, H0](z1_a f_a) + 1/2 [z1, [z1, H0]] f_aa`.
pub fn expanded_hilbert<T: Operand>(
    order: u32,
    zeta1: &T,
    zeta2: &T,
    f: &T,
) -> Result<T, ResidualError> {
    match order {
        0 => Ok(f.flat_hilbert()),
        1 => Ok(flat_commutator(zeta1, &f.alpha_derivative(1))),
        2 => {
            let fa = f.alpha_derivative(1);
            let faa = f.alpha_derivative(2);
            let z1a = zeta1.alpha_derivative(1);
            let a = flat_commutator(zeta2, &fa);
            let b = flat_commutator(zeta1, &z1a.product(&fa));
            // [z1, [z1, H0]] g = z1 [z1, H0] g - [z1, H0](z1 g)
            let inner = flat_commutator(zeta1, &faa);
            let c = zeta1
                .product(&inner)
                .difference(&flat_commutator(zeta1, &zeta1.product(&faa)));
            Ok(a.difference(&b).sum(&c.scaled(C64::new(0.5, 0.0))))
        }
        other => Err(ResidualError::Order(other)),
    }
}

/// `H~ f = H0 f + eps H1 f + eps^2 H2 f`.
pub fn expanded_hilbert_full<T: Operand>(eps: C64, zeta1: &T, zeta2: &T, f: &T) -> T {
    let h0 = f.flat_hilbert();
    let h1 = expanded_hilbert(1, zeta1, zeta2, f).expect("order 1");
    let h2 = expanded_hilbert(2, zeta1, zeta2, f).expect("order 2");
    h0.sum(&h1.scaled(eps)).sum(&h2.scaled(eps * eps))
}

/// `(I - Hb_{zeta~}) xi~`.
pub fn residual_antihol(curve: &Curve, packet: &PacketState) -> Field {
    &packet.xi_tilde - &curve.conj_hilbert(&packet.xi_tilde)
}

/// `D~_t^2 zeta~ - (i A zeta~_a - i)` with `A` computed from the packet taken
/// as a state.
pub fn residual_oldeuler(curve: &Curve, packet: &PacketState) -> Result<Field, ResidualError> {
    let (_, w, _) = quantities::compute_a(curve, &packet.dt_zeta)?;
    Ok(&packet.dt2_zeta - &w)
}

/// `(I - H) b~ + [D~_t zeta~, H]((conj(zeta~_a) - 1)/zeta~_a)`.
pub fn residual_b(curve: &Curve, packet: &PacketState) -> Field {
    let b = &packet.b_tilde;
    let lhs = b - &curve.hilbert(b);
    &lhs + &curve.commutator(&packet.dt_zeta, &packet.xi_tilde.conj())
}

/// `D~_t Psi~ + Im zeta~ - |D~_t zeta~|^2 / 2`.
pub fn residual_bernoulli(packet: &PacketState) -> Field {
    let im = packet.xi_tilde.im();
    let half = packet.dt_zeta.abs_sqr().scale_re(0.5);
    &(&packet.dt_psi + &im) - &half
}

/// `(I - H_{zeta~(t + s delta)}) xi~(t + s delta)` for `s = -2..=2`, with the
/// envelope advanced by its second-order Taylor model in `T`.
pub fn neweuler_stencil(
    builder: &PacketBuilder,
    slow: &SlowFields,
    t: f64,
    delta: f64,
) -> Result<[Field; 5], ResidualError> {
    let eps2 = builder.epsilon().powi(2);
    let carrier = builder.carrier();
    let mut out: Vec<Field> = Vec::with_capacity(5);
    for s in -2i32..=2 {
        let ts = t + s as f64 * delta;
        let sf = if s == 0 {
            slow.clone()
        } else {
            slow.shifted(eps2 * s as f64 * delta, &carrier)
        };
        let xi = builder.xi_value(&sf, ts);
        let curve = Curve::from_perturbation(&xi)?;
        out.push(&xi - &curve.hilbert(&xi));
    }
    Ok(out.try_into().expect("five entries"))
}

/// `P~ F - G(zeta~)` where `F = (I - H_{zeta~}) xi~`,
/// `P~ = D~_t^2 - i d_a`, with the time derivatives of `F` taken from the
/// fourth-order central stencil.
pub fn residual_neweuler(
    curve: &Curve,
    packet: &PacketState,
    stencil: &[Field; 5],
    delta: f64,
) -> Result<Field, ResidualError> {
    let [m2, m1, z0, p1, p2] = stencil;
    let f_t = (&(m2 - p2) + &(p1 - m1).scale_re(8.0)).scale_re(1.0 / (12.0 * delta));
    let f_tt = (&(&(m1 + p1).scale_re(16.0) - &(m2 + p2)) - &z0.scale_re(30.0))
        .scale_re(1.0 / (12.0 * delta * delta));
    let pf = apply_p_tilde(packet, z0, &f_t, &f_tt);
    let g = quantities::compute_g(curve, &packet.dt_zeta)?;
    Ok(&pf - &g)
}

/// Same residual with `F_t`, `F_tt` from the exact curve-derivative identities
/// `F_t = xi_t - H xi_t - C(zeta_t, xi)` and
/// `F_tt = xi_tt - H xi_tt - 2 C(zeta_t, xi_t) - C(zeta_tt, xi) + (1/(pi i)) S2([zeta_t, zeta_t], xi)`.
pub fn residual_neweuler_exact(curve: &Curve, packet: &PacketState) -> Result<Field, ResidualError> {
    use crate::curveops::Sheet;
    let xi = &packet.xi_tilde;
    let (xt, xtt) = (&packet.xi_t, &packet.xi_tt);
    let f = xi - &curve.hilbert(xi);
    let f_t = &(xt - &curve.hilbert(xt)) - &curve.commutator(xt, xi);
    let s2 = curve
        .s2_apply(&[xt, xt], xi, Sheet::Direct)?
        .scale(1.0 / (std::f64::consts::PI * I));
    let f_tt = &(&(&(xtt - &curve.hilbert(xtt)) - &curve.commutator(xt, xt).scale_re(2.0))
        - &curve.commutator(xtt, xi))
        + &s2;
    let pf = apply_p_tilde(packet, &f, &f_t, &f_tt);
    let g = quantities::compute_g(curve, &packet.dt_zeta)?;
    Ok(&pf - &g)
}

fn apply_p_tilde(packet: &PacketState, f: &Field, f_t: &Field, f_tt: &Field) -> Field {
    let b = &packet.b_tilde;
    let ba = spectral::derivative(b, 1);
    let fa = spectral::derivative(f, 1);
    let faa = spectral::derivative(f, 2);
    let fta = spectral::derivative(f_t, 1);
    let mut out = f_tt.clone();
    for j in 0..out.len() {
        let bj = b.samples()[j];
        out.samples_mut()[j] += 2.0 * bj * fta.samples()[j]
            + (packet.b_tilde_t.samples()[j] + bj * ba.samples()[j]) * fa.samples()[j]
            + bj * bj * faa.samples()[j]
            - I * packet.a_tilde * fa.samples()[j];
    }
    out
}

/// Sobolev norm of the mean-free part.
pub fn defect_norm(f: &Field, s: f64) -> f64 {
    spectral::sobolev_norm(&f.remove_mean(), s)
}

/// Outcome of an order fit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FitVerdict {
    Slope,
    /// Some norm is at or below the floor; no slope is reported.
    Floor,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrderFit {
    pub epsilons: Vec<f64>,
    pub norms: Vec<f64>,
    pub slope: Option<f64>,
    pub r_squared: Option<f64>,
    pub verdict: FitVerdict,
}

/// Least-squares slope of `log(norm)` against `log(eps)` (at least three
/// points).
pub fn order_fit(eps: &[f64], norms: &[f64], floor: f64) -> Result<OrderFit, ResidualError> {
    fit_with_min(eps, norms, floor, 3)
}

/// As [`order_fit`] but accepting two points (slope of the secant, `r^2 = 1`).
pub fn pairwise_fit(eps: &[f64], norms: &[f64], floor: f64) -> Result<OrderFit, ResidualError> {
    fit_with_min(eps, norms, floor, 2)
}

fn fit_with_min(
    eps: &[f64],
    norms: &[f64],
    floor: f64,
    need: usize,
) -> Result<OrderFit, ResidualError> {
    if eps.len() != norms.len() {
        return Err(ResidualError::LengthMismatch);
    }
    if eps.len() < need {
        return Err(ResidualError::TooFewPoints {
            need,
            got: eps.len(),
        });
    }
    if eps.iter().any(|&e| !(e > 0.0)) || eps.windows(2).any(|w| w[1] <= w[0]) {
        return Err(ResidualError::BadEpsilons);
    }
    let mut fit = OrderFit {
        epsilons: eps.to_vec(),
        norms: norms.to_vec(),
        slope: None,
        r_squared: None,
        verdict: FitVerdict::Floor,
    };
    if norms.iter().any(|&n| !(n > floor)) {
        return Ok(fit);
    }
    let x: Vec<f64> = eps.iter().map(|e| e.ln()).collect();
    let y: Vec<f64> = norms.iter().map(|n| n.ln()).collect();
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|v| (v - my).powi(2)).sum();
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { (sxy * sxy) / (sxx * syy) };
    fit.slope = Some(slope);
    fit.r_squared = Some(r2);
    fit.verdict = FitVerdict::Slope;
    Ok(fit)
}

/// One row of a convergence table.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    pub equation: String,
    pub epsilon: f64,
    pub n_points: usize,
    pub norm: f64,
    pub slope: Option<f64>,
    pub r_squared: Option<f64>,
    /// `None` when no fit was attempted.
    pub verdict: Option<FitVerdict>,
}

/// Slope cell: the value, `floor`, or empty when nothing was fitted.
pub fn slope_cell(verdict: Option<FitVerdict>, value: Option<f64>) -> String {
    match (verdict, value) {
        (Some(FitVerdict::Floor), _) => "floor".into(),
        (_, Some(x)) => format!("{x:.17e}"),
        _ => String::new(),
    }
}

pub fn write_convergence_csv<W: Write>(rows: &[ConvergenceRow], mut out: W) -> std::io::Result<()> {
    writeln!(out, "equation_name,epsilon,N,norm,slope,r_squared")?;
    for r in rows {
        writeln!(
            out,
            "{},{:.17e},{},{:.17e},{},{}",
            r.equation,
            r.epsilon,
            r.n_points,
            r.norm,
            slope_cell(r.verdict, r.slope),
            slope_cell(r.verdict, r.r_squared)
        )?;
    }
    Ok(())
}

/// All residual norms for one packet.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualNorms {
    pub neweuler: f64,
    pub antihol: f64,
    pub b: f64,
    pub bernoulli: f64,
    pub oldeuler: f64,
}

impl ResidualNorms {
    pub const NAMES: [&'static str; 5] =
        ["neweuler", "antihol", "b_formula", "bernoulli", "oldeuler"];

    pub fn as_array(&self) -> [f64; 5] {
        [self.neweuler, self.antihol, self.b, self.bernoulli, self.oldeuler]
    }
}

/// Evaluates the five residual families at fast time `t` in `H^s`.
pub fn residual_norms(
    builder: &PacketBuilder,
    slow: &SlowFields,
    t: f64,
    delta: f64,
    s: f64,
) -> Result<ResidualNorms, ResidualError> {
    let packet = builder.build_from_slow(slow, t)?;
    let curve = Curve::new(packet.zeta_tilde.clone())?;
    let stencil = neweuler_stencil(builder, slow, t, delta)?;
    let ne = residual_neweuler(&curve, &packet, &stencil, delta)?;
    Ok(ResidualNorms {
        neweuler: defect_norm(&ne, s),
        antihol: defect_norm(&residual_antihol(&curve, &packet), s),
        b: defect_norm(&residual_b(&curve, &packet), s),
        bernoulli: defect_norm(&residual_bernoulli(&packet), s),
        oldeuler: defect_norm(&residual_oldeuler(&curve, &packet)?, s),
    })
}
