//! Auxiliary water-wave quantities of a curve state: `b`, `A`, `G`, `D_t G`,
//! `a_t/a`, `D_t b`, and the remainder diagnostics against a packet.
//!
//! All formulas are written with two building blocks on the curve `zeta`:
//! `C(g, f) = (1/(pi i)) int (g(a) - g(b)) / (zeta(a) - zeta(b)) f_b db`
//! (see [`Curve::commutator`]) and the product kernels of
//! [`Curve::s2_apply`].

use std::f64::consts::PI;
use std::io::Write;

use thiserror::Error;

use crate::curveops::{
    self, Curve, CurveError, Sheet, REAL_SOLVE_MAX_ITER, REAL_SOLVE_TOL,
};
use crate::packet::PacketState;
use crate::spectral::{self, Field, Grid, C64, I};

/// Tolerance and cap of the coupled `A`/`w` fixed point.
pub const A_TOL: f64 = 1e-12;
pub const A_MAX_ITER: usize = 50;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuantError {
    #[error(transparent)]
    Curve(#[from] CurveError),
    #[error("A dropped to {min_a} (< 1/2): outside the small-data regime")]
    Regime { min_a: f64 },
    #[error("A fixed point did not converge in {iterations} steps (last update {update:e})")]
    ANonConvergence { iterations: usize, update: f64 },
    #[error("state and packet grids or times differ")]
    Mismatch,
}

fn pii() -> C64 {
    PI * I
}

/// True-solution bundle at one time.
#[derive(Debug, Clone)]
pub struct CurveState {
    pub curve: Curve,
    /// `D_t zeta`.
    pub u: Field,
    /// Real transport coefficient.
    pub b: Field,
    /// Real `A`.
    pub a: Field,
    /// `D_t^2 zeta = i A zeta_alpha - i`.
    pub w: Field,
    pub time: f64,
    pub psi: Option<Field>,
    /// Iterations used by the `A` fixed point.
    pub a_iterations: usize,
}

impl CurveState {
    /// Builds the state from `xi = zeta - alpha` and `u`, computing `b`, `A`
    /// and `w`.
    pub fn new(xi: &Field, u: Field, time: f64) -> Result<Self, QuantError> {
        let curve = Curve::from_perturbation(xi)?;
        Self::from_curve(curve, u, time)
    }

    pub fn from_curve(curve: Curve, u: Field, time: f64) -> Result<Self, QuantError> {
        let b = compute_b(&curve, &u)?;
        let (a, w, a_iterations) = compute_a(&curve, &u)?;
        Ok(Self {
            curve,
            u,
            b,
            a,
            w,
            time,
            psi: None,
            a_iterations,
        })
    }

    pub fn with_psi(mut self, psi: Field) -> Self {
        self.psi = Some(psi);
        self
    }

    /// Still water on `grid`.
    pub fn still(grid: Grid) -> Self {
        let z = Field::zeros(grid);
        Self::new(&z, z.clone(), 0.0).expect("still water is regular")
    }

    pub fn grid(&self) -> Grid {
        self.curve.grid()
    }

    pub fn xi(&self) -> &Field {
        self.curve.perturbation()
    }

    pub fn zeta_alpha(&self) -> &Field {
        self.curve.gamma_prime()
    }

    /// `||(I - Hb_zeta) u||_{L^2}`, constants excluded.
    pub fn coherence(&self) -> f64 {
        let d = &self.u - &self.curve.conj_hilbert(&self.u);
        spectral::l2_norm(&d.remove_mean())
    }
}

/// `(I - H) b = -C(u, conj(xi))`.
pub fn compute_b(curve: &Curve, u: &Field) -> Result<Field, QuantError> {
    let rhs = -&curve.commutator(u, &curve.perturbation().conj());
    let sol = curveops::solve_real_part(curve, &rhs, REAL_SOLVE_TOL, REAL_SOLVE_MAX_ITER)?;
    Ok(sol.field)
}

/// `(I - H) A = 1 + i C(w, conj(xi)) + i C(u, conj(u))` with
/// `w = i A zeta_alpha - i`, solved jointly by the iteration
/// `A <- Re(rhs(A)) + Re(H A)` from `A = 1`. Returns `(A, w, iterations)`.
///
/// The iterate is carried as `A - 1` (`H` kills constants), so still water
/// gives `A = 1` exactly.
pub fn compute_a(curve: &Curve, u: &Field) -> Result<(Field, Field, usize), QuantError> {
    let g = curve.grid();
    let xib = curve.perturbation().conj();
    let fixed = curve.commutator(u, &u.conj()).scale(I);
    let za = curve.gamma_prime();
    let w_of = |a1: &Field| (&(a1 * za) + &za.add_const(-C64::new(1.0, 0.0))).scale(I);
    let mut a1 = Field::zeros(g);
    let mut update = f64::INFINITY;
    for it in 1..=A_MAX_ITER {
        let w = w_of(&a1);
        let rhs = &fixed + &curve.commutator(&w, &xib).scale(I);
        let next = &rhs.re() + &curve.real_hilbert(&a1);
        update = spectral::l2_norm(&(&next - &a1));
        a1 = next;
        if update < A_TOL {
            let a = a1.add_const(C64::new(1.0, 0.0));
            let min_a = a.samples().iter().fold(f64::INFINITY, |m, z| m.min(z.re));
            if min_a < 0.5 {
                return Err(QuantError::Regime { min_a });
            }
            let w = w_of(&a1);
            return Ok((a, w, it));
        }
    }
    Err(QuantError::ANonConvergence {
        iterations: A_MAX_ITER,
        update,
    })
}

/// `-2 [u, H 1/zeta_a + Hb 1/conj(zeta_a)] u_a + (1/(pi i)) int (du/dzeta)^2 (zeta_b - conj(zeta_b))`.
pub fn compute_g(curve: &Curve, u: &Field) -> Result<Field, QuantError> {
    let direct = curve.commutator(u, u);
    let conj = curve.s2_apply(&[u], u, Sheet::Conjugate)?.scale(-1.0 / pii());
    let im_xi = curve.perturbation().im().scale(2.0 * I);
    let quad = curve.s2_apply(&[u, u], &im_xi, Sheet::Direct)?.scale(1.0 / pii());
    Ok(&(&direct + &conj).scale_re(-2.0) + &quad)
}

/// Explicit `D_t G` given `u = D_t zeta` and `w = D_t^2 zeta`.
pub fn compute_dtg(curve: &Curve, u: &Field, w: &Field) -> Result<Field, QuantError> {
    let d = Sheet::Direct;
    let c = Sheet::Conjugate;
    let pii = pii();
    let bracket = |g: &Field, f: &Field| -> Result<Field, QuantError> {
        let conj = curve.s2_apply(&[g], f, c)?.scale(-1.0 / pii);
        Ok(&curve.commutator(g, f) + &conj)
    };
    let im_zeta = curve.perturbation().im();
    let im_u = u.im();
    let ub = u.conj();
    let mut out = (&bracket(w, u)? + &bracket(u, w)?).scale_re(-2.0);
    out = &out + &curve.s2_apply(&[u, u], u, d)?.scale(2.0 / pii);
    out = &out - &curve.s2_apply(&[u, &ub], u, c)?.scale(2.0 / pii);
    out = &out + &curve.s2_apply(&[u, w], &im_zeta, d)?.scale_re(4.0 / PI);
    out = &out + &curve.s2_apply(&[u, u], &im_u, d)?.scale_re(2.0 / PI);
    out = &out - &curve.s2_apply(&[u, u, u], &im_zeta, d)?.scale_re(4.0 / PI);
    Ok(out)
}

/// `a_t/a` (in the moving frame) from
/// `(I - H)(A conj(zeta_a) X) = 2i C(w, conj u) + 2i C(u, conj w) - (1/pi) S2([u,u], conj u)`.
pub fn compute_at_over_a(
    curve: &Curve,
    u: &Field,
    w: &Field,
    a: &Field,
) -> Result<Field, QuantError> {
    let ub = u.conj();
    let rhs = &(&curve.commutator(w, &ub) + &curve.commutator(u, &w.conj())).scale(2.0 * I)
        - &curve.s2_apply(&[u, u], &ub, Sheet::Direct)?.scale_re(1.0 / PI);
    let weight = a * &curve.gamma_prime().conj();
    let sol = curveops::solve_real_weighted(curve, &weight, &rhs, REAL_SOLVE_TOL, REAL_SOLVE_MAX_ITER)?;
    Ok(sol.field)
}

/// `(I - H) D_t b = C(u, 2b - conj u) - C(w, conj xi) + (1/(pi i)) S2([u,u], conj xi)`.
pub fn compute_dtb(
    curve: &Curve,
    u: &Field,
    w: &Field,
    b: &Field,
) -> Result<Field, QuantError> {
    let xib = curve.perturbation().conj();
    let f = &b.scale_re(2.0) - &u.conj();
    let rhs = &(&curve.commutator(u, &f) - &curve.commutator(w, &xib))
        + &curve.s2_apply(&[u, u], &xib, Sheet::Direct)?.scale(1.0 / pii());
    let sol = curveops::solve_real_part(curve, &rhs, REAL_SOLVE_TOL, REAL_SOLVE_MAX_ITER)?;
    Ok(sol.field)
}

/// Convenience wrappers on a [`CurveState`].
impl CurveState {
    pub fn g(&self) -> Result<Field, QuantError> {
        compute_g(&self.curve, &self.u)
    }
    pub fn dtg(&self) -> Result<Field, QuantError> {
        compute_dtg(&self.curve, &self.u, &self.w)
    }
    pub fn at_over_a(&self) -> Result<Field, QuantError> {
        compute_at_over_a(&self.curve, &self.u, &self.w, &self.a)
    }
    pub fn dtb(&self) -> Result<Field, QuantError> {
        compute_dtb(&self.curve, &self.u, &self.w, &self.b)
    }
}

/// Remainder sizes and energies.
#[derive(Debug, Clone, PartialEq)]
pub struct RemainderRecord {
    pub time: f64,
    /// `(||r_a||_{H^s} + ||D_t r||_{H^s})^2`.
    pub e_s: f64,
    pub rho_norm: f64,
    pub sigma_norm: f64,
    /// `sum_n E_n + F_n`.
    pub energy_total: f64,
    /// `E_n`, `n = 0..=s`.
    pub e_n: Vec<f64>,
    /// `F_n`, `n = 0..=s`.
    pub f_n: Vec<f64>,
    /// Signed `i int phi^(n) conj(phi^(n))_a`, `n = 0..=s`.
    pub phi_forms: Vec<f64>,
}

impl RemainderRecord {
    pub fn csv_header() -> &'static str {
        "t,E_s,rho,sigma,energy_total"
    }

    pub fn write_csv_row<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(
            out,
            "{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}",
            self.time, self.e_s, self.rho_norm, self.sigma_norm, self.energy_total
        )
    }
}

/// `D_t (d^n f)` given `f` and `D_t f`.
fn dt_of_derivative(f: &Field, dt_f: &Field, b: &Field, n: u32) -> Field {
    if n == 0 {
        return dt_f.clone();
    }
    let fa = spectral::derivative(f, 1);
    let a = spectral::derivative(dt_f, n);
    let c = spectral::derivative(&(b * &fa), n);
    let d = b * &spectral::derivative(f, n + 1);
    &(&a - &c) + &d
}

fn weighted_l2_sqr(f: &Field, inv_a: &Field) -> f64 {
    let h = f.grid().spacing();
    f.samples()
        .iter()
        .zip(inv_a.samples())
        .map(|(z, ia)| z.norm_sqr() * ia.re)
        .sum::<f64>()
        * h
}

/// `E_s`, `rho`, `sigma` and the energy `sum_n (E_n + F_n)` for the state
/// against the packet at the same time.
pub fn remainder_diagnostics(
    state: &CurveState,
    packet: &PacketState,
    s: u32,
) -> Result<RemainderRecord, QuantError> {
    if state.grid() != packet.grid() || (state.time - packet.time).abs() > 1e-9 {
        return Err(QuantError::Mismatch);
    }
    let c = &state.curve;
    let u = &state.u;
    let b = &state.b;
    let xi = state.xi();
    let r = xi - &packet.xi_tilde;
    let db = b - &packet.b_tilde;
    let zt_a = packet.zeta_alpha();
    let dt_r = &(u - &packet.dt_zeta) - &(&db * &zt_a);
    let sf = s as f64;
    let r_a = spectral::derivative(&r, 1);
    let e_s = (spectral::sobolev_norm(&r_a, sf) + spectral::sobolev_norm(&dt_r, sf)).powi(2);

    let i_minus_h = |f: &Field| f - &c.hilbert(f);
    let rho = i_minus_h(&r).scale_re(0.5);
    let dt_rho = (&i_minus_h(&dt_r) - &c.commutator(u, &r)).scale_re(0.5);

    let u_minus_b = u - b;
    let dt_antihol_true = &i_minus_h(&u_minus_b) - &c.commutator(u, xi);
    let y = packet.dt_antihol();
    let x = &dt_antihol_true - &y;
    let sigma = i_minus_h(&x).scale_re(0.25);
    let dtb = compute_dtb(c, u, &state.w, b)?;
    let w_minus = &state.w - &dtb;
    let dt2_antihol_true = &(&(&i_minus_h(&w_minus) - &c.commutator(u, &u_minus_b).scale_re(2.0))
        - &c.commutator(&state.w, xi))
        + &c.s2_apply(&[u, u], xi, Sheet::Direct)?.scale(1.0 / pii());
    let dt_y = &packet.dt2_antihol() + &(&db * &spectral::derivative(&y, 1));
    let dt_x = &dt2_antihol_true - &dt_y;
    let dt_sigma = (&i_minus_h(&dt_x) - &c.commutator(u, &x)).scale_re(0.25);

    let inv_a = state.a.recip();
    let mut e_n = Vec::new();
    let mut f_n = Vec::new();
    let mut phi_forms = Vec::new();
    for n in 0..=s {
        let rho_n = spectral::derivative(&rho, n);
        let dt_rho_n = dt_of_derivative(&rho, &dt_rho, b, n);
        let phi_n = i_minus_h(&rho_n).scale_re(0.5);
        let form = spectral::holomorphic_quadratic_form(&phi_n);
        e_n.push(weighted_l2_sqr(&dt_rho_n, &inv_a) + form);
        phi_forms.push(form);
        let sigma_n = spectral::derivative(&sigma, n);
        let dt_sigma_n = dt_of_derivative(&sigma, &dt_sigma, b, n);
        f_n.push(
            weighted_l2_sqr(&dt_sigma_n, &inv_a) + spectral::holomorphic_quadratic_form(&sigma_n),
        );
    }
    let energy_total = e_n.iter().sum::<f64>() + f_n.iter().sum::<f64>();
    Ok(RemainderRecord {
        time: state.time,
        e_s,
        rho_norm: spectral::sobolev_norm(&rho, sf),
        sigma_norm: spectral::sobolev_norm(&sigma, sf),
        energy_total,
        e_n,
        f_n,
        phi_forms,
    })
}
