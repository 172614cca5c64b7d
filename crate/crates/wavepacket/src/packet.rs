//! Third-order wave-packet approximation built from an NLS envelope.
//!
//! With `phi = k alpha + w t` and `B = B(eps(alpha + w' t), eps^2 t)`:
//!
//! ```text
//! zeta1 = B e^{i phi}
//! zeta2 = (ik/2) (I - Hb0)|B|^2
//! zeta3 = -(k^2/2) conj(B)|B|^2 e^{-i phi} + (1/2)(I - Hb0)(conj(B) B_X)
//! b     = eps^2 (-k w |B|^2)
//!       + eps^3 (Re(2i w k^2 B|B|^2 e^{i phi}) + (3/4) i w (B conj(B_X) - conj(B) B_X)
//!                - (1/4) i w Hb0 (B conj(B_X) + conj(B) B_X))
//! Psi1  = (1/2w) B e^{i phi} + c.c.
//! Psi2  = -(1/4ikw) B_X e^{i phi} + c.c. + (w/2) i H0 |B|^2
//! Psi3  = -(3/16 k^2 w) B_XX e^{i phi} + c.c.
//! ```
//!
//! `Psi3` carries no `B|B|^2` term by default: the `eps^2 b2` part of
//! `D_t zeta` contributes `Re(conj(zeta1_t) b2)` to `|D_t zeta|^2 / 2` at
//! third order, which cancels `b2 Psi1_alpha` when `w^2 = k`. Dropping that
//! product while keeping `b2 Psi1_alpha` yields the extra
//! `(k^2/2w) B|B|^2 e^{i phi} + c.c.`, available as [`PsiCubic::Unbalanced`]
//! for comparison; it leaves a third-order Bernoulli defect.
//!
//! Time derivatives are carried exactly by [`Jet`]s: `d/dt` acts on the phase
//! (`i w`), on `X` (`eps w'`) and on `T` (`eps^2`, with `B_T` and `B_TT` taken
//! from the NLS itself).

use std::io::Write;

use thiserror::Error;

use crate::jet::{Jet, Operand};
use crate::nls::{self, Carrier, Envelope, NlsError, NlsTrajectory, Soliton};
use crate::residual::expanded_hilbert_full;
use crate::spectral::{self, Field, Grid, SpectralError, C64, I};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PacketError {
    #[error("fast domain length {length} holds {waves} carrier wavelengths, which is not an integer")]
    Incommensurate { length: f64, waves: f64 },
    #[error("fast grid ({fast} points) is coarser than the slow grid ({slow} points)")]
    FastGridTooCoarse { fast: usize, slow: usize },
    #[error("epsilon must lie in (0, 1], got {0}")]
    BadEpsilon(f64),
    #[error("envelope time {envelope} does not match slow time {expected}")]
    TimeMismatch { envelope: f64, expected: f64 },
    #[error("assembled b has imaginary part {0:e}")]
    NotReal(f64),
    #[error("envelope grid does not match the builder's slow grid")]
    SlowGridMismatch,
    #[error(transparent)]
    Nls(#[from] NlsError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
}

/// Anything that can hand out the NLS envelope at a slow time `T`.
pub trait EnvelopeSource {
    fn envelope_at(&mut self, big_t: f64) -> Result<Envelope, NlsError>;
}

impl EnvelopeSource for Soliton {
    fn envelope_at(&mut self, big_t: f64) -> Result<Envelope, NlsError> {
        Ok(self.at(big_t))
    }
}

impl<S: EnvelopeSource + ?Sized> EnvelopeSource for Box<S> {
    fn envelope_at(&mut self, big_t: f64) -> Result<Envelope, NlsError> {
        (**self).envelope_at(big_t)
    }
}

impl EnvelopeSource for NlsTrajectory {
    fn envelope_at(&mut self, big_t: f64) -> Result<Envelope, NlsError> {
        self.at(big_t)
    }
}

/// `B`, `B_T` and `B_TT` on the slow grid at slow time `T`.
#[derive(Debug, Clone)]
pub struct SlowFields {
    pub b: Field,
    pub b_t: Field,
    pub b_tt: Field,
    pub time: f64,
}

impl SlowFields {
    pub fn from_envelope(env: &Envelope) -> Self {
        Self::from_field(&env.field, &env.carrier, env.time)
    }

    fn from_field(b: &Field, carrier: &Carrier, time: f64) -> Self {
        let b_t = nls::nls_rhs(b, carrier);
        let wpp = carrier.omega_double_prime;
        let c = carrier.nonlinear_coeff();
        let bt_xx = spectral::derivative(&b_t, 2);
        let mut b_tt = Field::zeros(b.grid());
        for (j, out) in b_tt.samples_mut().iter_mut().enumerate() {
            let z = b.samples()[j];
            let zt = b_t.samples()[j];
            let cubic_t = 2.0 * z * z.conj() * zt + z * z * zt.conj();
            *out = (wpp * bt_xx.samples()[j] - c * cubic_t) / (2.0 * I);
        }
        Self {
            b: b.clone(),
            b_t,
            b_tt,
            time,
        }
    }

    /// Second-order Taylor model at `T + tau`, with `B_T`, `B_TT` recomputed
    /// from the shifted value.
    pub fn shifted(&self, tau: f64, carrier: &Carrier) -> Self {
        let b = self
            .b
            .zip_map(&self.b_t, |b, bt| b + tau * bt)
            .zip_map(&self.b_tt, |b, btt| b + 0.5 * tau * tau * btt);
        Self::from_field(&b, carrier, self.time + tau)
    }
}

/// The approximate-solution bundle at one time.
#[derive(Debug, Clone)]
pub struct PacketState {
    pub zeta_tilde: Field,
    pub xi_tilde: Field,
    /// Partial time derivatives of `xi~`.
    pub xi_t: Field,
    pub xi_tt: Field,
    pub dt_zeta: Field,
    pub dt2_zeta: Field,
    pub b_tilde: Field,
    /// `d b/dt` (partial time derivative).
    pub b_tilde_t: Field,
    /// Always 1.
    pub a_tilde: f64,
    pub psi_tilde: Field,
    pub dt_psi: Field,
    pub lambda_tilde: Field,
    /// Unscaled first and second order profiles.
    pub zeta1: Field,
    pub zeta2: Field,
    /// `(I - H~) xi~` with its exact time derivatives.
    pub antihol_jet: Jet,
    /// `2 k^3 B|B|^2 e^{i phi}`.
    pub g3: Field,
    pub epsilon: f64,
    pub time: f64,
    pub carrier: Carrier,
}

impl PacketState {
    pub fn grid(&self) -> Grid {
        self.zeta_tilde.grid()
    }

    /// `zeta~_alpha`.
    pub fn zeta_alpha(&self) -> Field {
        spectral::derivative(&self.xi_tilde, 1).add_const(C64::new(1.0, 0.0))
    }

    /// `D~_t (I - H~) xi~`.
    pub fn dt_antihol(&self) -> Field {
        let fa = spectral::derivative(&self.antihol_jet.v, 1);
        &self.antihol_jet.t1 + &(&self.b_tilde * &fa)
    }

    /// `D~_t^2 (I - H~) xi~`.
    pub fn dt2_antihol(&self) -> Field {
        let f = &self.antihol_jet;
        let fa = spectral::derivative(&f.v, 1);
        let fta = spectral::derivative(&f.t1, 1);
        let faa = spectral::derivative(&f.v, 2);
        let ba = spectral::derivative(&self.b_tilde, 1);
        let b = &self.b_tilde;
        let mut out = f.t2.clone();
        for j in 0..out.len() {
            let bj = b.samples()[j];
            out.samples_mut()[j] += 2.0 * bj * fta.samples()[j]
                + (self.b_tilde_t.samples()[j] + bj * ba.samples()[j]) * fa.samples()[j]
                + bj * bj * faa.samples()[j];
        }
        out
    }

    /// Writes one row per node: alpha and real/imaginary parts of every field.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(
            out,
            "alpha,re_zeta,im_zeta,re_dt_zeta,im_dt_zeta,re_dt2_zeta,im_dt2_zeta,b,psi,re_lambda,im_lambda"
        )?;
        let g = self.grid();
        for j in 0..g.n_points() {
            let z = self.zeta_tilde.samples()[j];
            let u = self.dt_zeta.samples()[j];
            let w = self.dt2_zeta.samples()[j];
            let l = self.lambda_tilde.samples()[j];
            writeln!(
                out,
                "{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}",
                g.node(j),
                z.re,
                z.im,
                u.re,
                u.im,
                w.re,
                w.im,
                self.b_tilde.samples()[j].re,
                self.psi_tilde.samples()[j].re,
                l.re,
                l.im
            )?;
        }
        Ok(())
    }
}

/// Choice of the cubic term in `Psi3`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PsiCubic {
    /// No `B|B|^2 e^{i phi}` term.
    #[default]
    Balanced,
    /// With `(k^2/2w) B|B|^2 e^{i phi} + c.c.`.
    Unbalanced,
}

/// Maps slow envelopes onto the fast grid and assembles packet fields.
#[derive(Debug, Clone, Copy)]
pub struct PacketBuilder {
    carrier: Carrier,
    eps: f64,
    slow: Grid,
    fast: Grid,
    psi_cubic: PsiCubic,
}

impl PacketBuilder {
    /// Fast domain length is `L_slow / eps`; it must hold an integer number of
    /// carrier wavelengths.
    pub fn new(
        carrier: Carrier,
        eps: f64,
        slow: Grid,
        n_fast: usize,
    ) -> Result<Self, PacketError> {
        if !(eps > 0.0 && eps <= 1.0) {
            return Err(PacketError::BadEpsilon(eps));
        }
        let length = slow.length() / eps;
        let waves = carrier.k * length / (2.0 * std::f64::consts::PI);
        if (waves - waves.round()).abs() > 1e-9 * waves.max(1.0) {
            return Err(PacketError::Incommensurate { length, waves });
        }
        if n_fast < slow.n_points() {
            return Err(PacketError::FastGridTooCoarse {
                fast: n_fast,
                slow: slow.n_points(),
            });
        }
        let fast = Grid::new(n_fast, length)?;
        Ok(Self {
            carrier,
            eps,
            slow,
            fast,
            psi_cubic: PsiCubic::Balanced,
        })
    }

    pub fn with_psi_cubic(mut self, choice: PsiCubic) -> Self {
        self.psi_cubic = choice;
        self
    }

    pub fn psi_cubic(&self) -> PsiCubic {
        self.psi_cubic
    }

    pub fn carrier(&self) -> Carrier {
        self.carrier
    }

    pub fn epsilon(&self) -> f64 {
        self.eps
    }

    pub fn fast_grid(&self) -> Grid {
        self.fast
    }

    pub fn slow_grid(&self) -> Grid {
        self.slow
    }

    /// Slow time for fast time `t`.
    pub fn slow_time(&self, t: f64) -> f64 {
        self.eps * self.eps * t
    }

    fn check(&self, env: &Envelope, t: f64) -> Result<(), PacketError> {
        if env.grid() != self.slow {
            return Err(PacketError::SlowGridMismatch);
        }
        let expected = self.slow_time(t);
        if (env.time - expected).abs() > 1e-9 * expected.abs().max(1.0) {
            return Err(PacketError::TimeMismatch {
                envelope: env.time,
                expected,
            });
        }
        Ok(())
    }

    /// Evaluates a slow field at `X = eps (alpha + w' t)` on the fast grid.
    pub fn lift(&self, slow: &Field, t: f64) -> Field {
        let c = slow.coefficients();
        let nf = self.fast.n_points();
        let mut d = vec![C64::new(0.0, 0.0); nf];
        let shift = self.eps * self.carrier.omega_prime * t;
        for (m, cm) in c.iter().enumerate() {
            if m == self.slow.nyquist_index() {
                continue;
            }
            let mode = self.slow.mode(m);
            let idx = mode.rem_euclid(nf as i64) as usize;
            d[idx] = cm * C64::from_polar(1.0, self.slow.wavenumber(m) * shift);
        }
        Field::from_coefficients(self.fast, &d)
    }

    /// Jet of `d^p B / dX^p` evaluated along `X = eps(alpha + w' t)`, `T = eps^2 t`.
    pub fn slow_jet(&self, s: &SlowFields, p: u32, t: f64) -> Jet {
        let e = self.eps;
        let wp = self.carrier.omega_prime;
        let d = |f: &Field, q: u32| self.lift(&spectral::derivative(f, q), t);
        let v = d(&s.b, p);
        let bx1 = d(&s.b, p + 1);
        let bx2 = d(&s.b, p + 2);
        let bt0 = d(&s.b_t, p);
        let bt1 = d(&s.b_t, p + 1);
        let btt = d(&s.b_tt, p);
        let t1 = &bx1.scale_re(e * wp) + &bt0.scale_re(e * e);
        let t2 = &(&bx2.scale_re(e * e * wp * wp) + &bt1.scale_re(2.0 * e * e * e * wp))
            + &btt.scale_re(e.powi(4));
        Jet::new(v, t1, t2)
    }

    /// Jet of `e^{i phi}`.
    pub fn phase_jet(&self, t: f64) -> Jet {
        let k = self.carrier.k;
        let w = self.carrier.omega;
        let v = Field::from_fn(self.fast, |a| C64::from_polar(1.0, k * a + w * t));
        Jet::new(v.clone(), v.scale(I * w), v.scale_re(-w * w))
    }

    fn pieces(&self, s: &SlowFields, t: f64) -> Pieces {
        let b = self.slow_jet(s, 0, t);
        let bx = self.slow_jet(s, 1, t);
        let bxx = self.slow_jet(s, 2, t);
        let e = self.phase_jet(t);
        Pieces { b, bx, bxx, e }
    }

    fn zeta_terms(&self, p: &Pieces) -> (Jet, Jet, Jet) {
        let k = self.carrier.k;
        let absb2 = p.b.abs_sqr();
        let z1 = &p.b * &p.e;
        let z2 = (&absb2 - &absb2.conj_flat_hilbert()).scaled(0.5 * I * k);
        let cubic = &(&p.b.conj() * &absb2) * &p.e.conj();
        let bbx = &p.b.conj() * &p.bx;
        let z3 = &cubic.scaled(C64::new(-0.5 * k * k, 0.0))
            + &(&bbx - &bbx.conj_flat_hilbert()).scaled(C64::new(0.5, 0.0));
        (z1, z2, z3)
    }

    fn xi_jet(&self, z: &(Jet, Jet, Jet)) -> Jet {
        let e = self.eps;
        &(&z.0.scaled(C64::new(e, 0.0)) + &z.1.scaled(C64::new(e * e, 0.0)))
            + &z.2.scaled(C64::new(e * e * e, 0.0))
    }

    fn b_jet(&self, p: &Pieces) -> Jet {
        let (k, w, e) = (self.carrier.k, self.carrier.omega, self.eps);
        let absb2 = p.b.abs_sqr();
        let b2 = absb2.scaled(C64::new(-k * w, 0.0));
        let cubic = &(&p.b * &absb2) * &p.e;
        let t1 = cubic.scaled(2.0 * I * w * k * k).re();
        let x = &p.b * &p.bx.conj();
        let y = &p.b.conj() * &p.bx;
        let t2 = (&x - &y).scaled(0.75 * I * w);
        let t3 = (&x + &y).conj_flat_hilbert().scaled(-0.25 * I * w);
        let b3 = &(&t1 + &t2) + &t3;
        &b2.scaled(C64::new(e * e, 0.0)) + &b3.scaled(C64::new(e * e * e, 0.0))
    }

    fn psi_jet(&self, p: &Pieces) -> Jet {
        let (k, w, e) = (self.carrier.k, self.carrier.omega, self.eps);
        let two_re = |j: &Jet| j.re().scaled(C64::new(2.0, 0.0));
        let p1 = two_re(&(&p.b * &p.e).scaled(C64::new(0.5 / w, 0.0)));
        let absb2 = p.b.abs_sqr();
        let c2 = absb2.flat_hilbert().scaled(0.5 * w * I);
        let p2 = &two_re(&(&p.bx * &p.e).scaled(-1.0 / (4.0 * I * k * w))) + &c2;
        let mut inner = p.bxx.scaled(C64::new(-3.0 / (16.0 * k * k * w), 0.0));
        if self.psi_cubic == PsiCubic::Unbalanced {
            inner = &inner + &(&p.b * &absb2).scaled(C64::new(k * k / (2.0 * w), 0.0));
        }
        let p3 = two_re(&(&inner * &p.e));
        &(&p1.scaled(C64::new(e, 0.0)) + &p2.scaled(C64::new(e * e, 0.0)))
            + &p3.scaled(C64::new(e * e * e, 0.0))
    }

    /// `(zeta~, xi~)`.
    pub fn build_zeta(&self, env: &Envelope, t: f64) -> Result<(Field, Field), PacketError> {
        self.check(env, t)?;
        let s = SlowFields::from_envelope(env);
        let xi = self.xi_value(&s, t);
        Ok((&Field::coordinate(self.fast) + &xi, xi))
    }

    /// `xi~` alone (values only) from slow data at fast time `t`.
    pub fn xi_value(&self, s: &SlowFields, t: f64) -> Field {
        let k = self.carrier.k;
        let e = self.eps;
        let b = self.lift(&s.b, t);
        let bx = self.lift(&spectral::derivative(&s.b, 1), t);
        let ph = self.phase_jet(t).v;
        let absb2 = b.abs_sqr();
        let z1 = &b * &ph;
        let z2 = (&absb2 - &spectral::conj_flat_hilbert(&absb2)).scale(0.5 * I * k);
        let bbx = &b.conj() * &bx;
        let mut z3 = (&bbx - &spectral::conj_flat_hilbert(&bbx)).scale_re(0.5);
        for j in 0..z3.len() {
            let bj = b.samples()[j];
            z3.samples_mut()[j] += -0.5 * k * k * bj.conj() * bj.norm_sqr() * ph.samples()[j].conj();
        }
        &(&z1.scale_re(e) + &z2.scale_re(e * e)) + &z3.scale_re(e * e * e)
    }

    /// `(D~_t zeta~, D~_t^2 zeta~)`.
    pub fn build_time_derivatives(
        &self,
        env: &Envelope,
        t: f64,
    ) -> Result<(Field, Field), PacketError> {
        let st = self.build(env, t)?;
        Ok((st.dt_zeta, st.dt2_zeta))
    }

    /// `b~` (real).
    pub fn build_b_tilde(&self, env: &Envelope, t: f64) -> Result<Field, PacketError> {
        self.check(env, t)?;
        let s = SlowFields::from_envelope(env);
        let p = self.pieces(&s, t);
        let b = self.b_jet(&p);
        real_part_checked(&b.v)
    }

    /// `(Psi~, lambda~)`.
    pub fn build_psi_lambda(&self, env: &Envelope, t: f64) -> Result<(Field, Field), PacketError> {
        let st = self.build(env, t)?;
        Ok((st.psi_tilde, st.lambda_tilde))
    }

    /// Full bundle at fast time `t`; `env` must sit at slow time `eps^2 t`.
    pub fn build(&self, env: &Envelope, t: f64) -> Result<PacketState, PacketError> {
        self.check(env, t)?;
        let s = SlowFields::from_envelope(env);
        Ok(self.build_from_slow(&s, t)?)
    }

    pub fn build_from_slow(&self, s: &SlowFields, t: f64) -> Result<PacketState, PacketError> {
        let p = self.pieces(s, t);
        let z = self.zeta_terms(&p);
        let xi = self.xi_jet(&z);
        let bj = self.b_jet(&p);
        let b = real_part_checked(&bj.v)?;
        let b_t = real_part_checked(&bj.t1)?;
        let one = C64::new(1.0, 0.0);
        let zeta_alpha = spectral::derivative(&xi.v, 1).add_const(one);
        let dt_zeta = &xi.t1 + &(&b * &zeta_alpha);
        let xi_t_alpha = spectral::derivative(&xi.t1, 1);
        let u_alpha = spectral::derivative(&dt_zeta, 1);
        let dt2_zeta = &(&(&xi.t2 + &(&b_t * &zeta_alpha)) + &(&b * &xi_t_alpha))
            + &(&b * &u_alpha);
        let psi = self.psi_jet(&p);
        let psi_v = real_part_checked(&psi.v)?;
        let dt_psi = &psi.t1.re() + &(&b * &spectral::derivative(&psi_v, 1));
        let e = C64::new(self.eps, 0.0);
        let lambda = &psi_v - &expanded_hilbert_full(e, &z.0.v, &z.1.v, &psi_v);
        let antihol = xi.difference(&expanded_hilbert_full(e, &z.0, &z.1, &xi));
        let k = self.carrier.k;
        let g3 = (&(&p.b * &p.b.abs_sqr()) * &p.e).v.scale_re(2.0 * k * k * k);
        Ok(PacketState {
            zeta_tilde: &Field::coordinate(self.fast) + &xi.v,
            xi_tilde: xi.v,
            xi_t: xi.t1,
            xi_tt: xi.t2,
            dt_zeta,
            dt2_zeta,
            b_tilde: b,
            b_tilde_t: b_t,
            a_tilde: 1.0,
            psi_tilde: psi_v,
            dt_psi,
            lambda_tilde: lambda,
            zeta1: z.0.v,
            zeta2: z.1.v,
            antihol_jet: antihol,
            g3,
            epsilon: self.eps,
            time: t,
            carrier: self.carrier,
        })
    }
}

struct Pieces {
    b: Jet,
    bx: Jet,
    bxx: Jet,
    e: Jet,
}

fn real_part_checked(f: &Field) -> Result<Field, PacketError> {
    let imag = f.max_abs_imag();
    let scale = spectral::sup_norm(f).max(1.0);
    if imag > 1e-10 * scale {
        return Err(PacketError::NotReal(imag));
    }
    Ok(f.re())
}

/// A builder paired with an envelope source: packet at any fast time.
pub struct PacketProvider<S: EnvelopeSource> {
    builder: PacketBuilder,
    source: S,
}

impl<S: EnvelopeSource> PacketProvider<S> {
    pub fn new(builder: PacketBuilder, source: S) -> Self {
        Self { builder, source }
    }

    pub fn builder(&self) -> &PacketBuilder {
        &self.builder
    }

    pub fn slow_fields(&mut self, t: f64) -> Result<SlowFields, PacketError> {
        let env = self.source.envelope_at(self.builder.slow_time(t))?;
        if env.grid() != self.builder.slow_grid() {
            return Err(PacketError::SlowGridMismatch);
        }
        Ok(SlowFields::from_envelope(&env))
    }

    pub fn at(&mut self, t: f64) -> Result<PacketState, PacketError> {
        let s = self.slow_fields(t)?;
        self.builder.build_from_slow(&s, t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn setup(eps: f64, n_fast: usize) -> (PacketBuilder, Soliton) {
        let carrier = nls::dispersion(1.0).unwrap();
        let slow = Grid::new(256, 16.0 * PI).unwrap();
        let sol = nls::soliton(1.0, carrier, slow).unwrap();
        (PacketBuilder::new(carrier, eps, slow, n_fast).unwrap(), sol)
    }

    #[test]
    fn still_water_is_exact() {
        let (pb, sol) = setup(0.1, 1024);
        let zero = Envelope::new(Field::zeros(pb.slow_grid()), 0.3, sol.carrier);
        let st = pb.build(&zero, 0.3 / 0.01).unwrap();
        let a = Field::coordinate(pb.fast_grid());
        assert_eq!(st.zeta_tilde, a);
        for f in [&st.xi_tilde, &st.dt_zeta, &st.dt2_zeta, &st.b_tilde, &st.psi_tilde, &st.lambda_tilde] {
            assert_eq!(spectral::sup_norm(f), 0.0);
        }
    }

    #[test]
    fn incommensurate_domain_rejected() {
        let carrier = nls::dispersion(1.0).unwrap();
        let slow = Grid::new(256, 50.0).unwrap();
        assert!(matches!(
            PacketBuilder::new(carrier, 0.1, slow, 1024),
            Err(PacketError::Incommensurate { .. })
        ));
    }

    #[test]
    fn lift_matches_pointwise_interpolation() {
        let (pb, sol) = setup(0.1, 1024);
        let env = sol.at(0.0);
        let t = 3.7;
        let lifted = pb.lift(&env.field, t);
        let c = env.field.coefficients();
        for j in (0..1024).step_by(37) {
            let x = 0.1 * (pb.fast_grid().node(j) + sol.carrier.omega_prime * t);
            let want = spectral::interpolate_at(&c, pb.slow_grid(), x);
            assert!((lifted.samples()[j] - want).norm() < 1e-12);
        }
    }

    #[test]
    fn b_tilde_is_real_and_leading_order_matches() {
        let (pb, sol) = setup(0.1, 1024);
        let t = 5.0;
        let env = sol.at(pb.slow_time(t));
        let st = pb.build(&env, t).unwrap();
        let b = pb.lift(&env.field, t);
        let lead = b.abs_sqr().scale_re(-0.01);
        let diff = &st.b_tilde - &lead;
        assert!(spectral::sup_norm(&diff) < 5.0 * 1e-3);
    }

    #[test]
    fn time_derivatives_match_finite_differences() {
        let (pb, sol) = setup(0.1, 1024);
        let t = 2.0;
        let d = 1e-3;
        let xi_at = |s: f64| {
            let env = sol.at(pb.slow_time(t + s));
            pb.build(&env, t + s).unwrap().xi_tilde
        };
        let st = pb.build(&sol.at(pb.slow_time(t)), t).unwrap();
        let fd1 = (&(&xi_at(-2.0 * d) - &xi_at(2.0 * d)) + &(&xi_at(d) - &xi_at(-d)).scale_re(8.0))
            .scale_re(1.0 / (12.0 * d));
        let zeta_alpha = st.zeta_alpha();
        let want = &fd1 + &(&st.b_tilde * &zeta_alpha);
        assert!(spectral::sup_norm(&(&want - &st.dt_zeta)) < 1e-9);
    }

    #[test]
    fn leading_orders() {
        let (pb, sol) = setup(0.02, 4096);
        let t = 0.0;
        let env = sol.at(0.0);
        let st = pb.build(&env, t).unwrap();
        let z1 = &pb.lift(&env.field, t) * &pb.phase_jet(t).v;
        let rel = spectral::sup_norm(&(&st.xi_tilde.scale_re(1.0 / 0.02) - &z1));
        assert!(rel < 0.05);
        let u1 = z1.scale(I * sol.carrier.omega * 0.02);
        assert!(spectral::sup_norm(&(&st.dt_zeta - &u1)) < 0.02 * 0.05);
        let w1 = z1.scale_re(-0.02);
        assert!(spectral::sup_norm(&(&st.dt2_zeta - &w1)) < 0.02 * 0.05);
    }

    #[test]
    fn psi_is_real() {
        let (pb, sol) = setup(0.1, 1024);
        let env = sol.at(0.0);
        let st = pb.build(&env, 0.0).unwrap();
        assert_eq!(st.psi_tilde.max_abs_imag(), 0.0);
    }
}
