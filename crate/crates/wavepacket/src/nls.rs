//! Carrier dispersion bookkeeping and the focusing cubic NLS envelope solver.
//!
//! The envelope obeys `2i B_T - w'' B_XX + k^2 w B |B|^2 = 0`, i.e.
//! `B_T = -(i/2) w'' B_XX + (i/2) k^2 w |B|^2 B`. One Strang step is a half
//! linear step with multiplier `exp(i w'' nu^2 dT / 4)`, a full nonlinear
//! rotation `B -> B exp(i k^2 w |B|^2 dT / 2)` and another half linear step.

use std::io::Write;

use thiserror::Error;

use crate::spectral::{self, Field, Grid, SpectralError, C64, I};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NlsError {
    #[error("carrier wavenumber must be positive, got {0}")]
    Domain(f64),
    #[error("time step must be positive and finite, got {0}")]
    BadStep(f64),
    #[error("non-finite envelope after step {step}")]
    NonFinite { step: usize },
    #[error("soliton tail {tail:e} exceeds 1e-13 at the domain edge")]
    TailTooLarge { tail: f64 },
    #[error("requested time {requested} precedes trajectory start {start}")]
    BeforeStart { requested: f64, start: f64 },
    #[error(transparent)]
    Spectral(#[from] SpectralError),
}

/// Deep-water carrier: `w = sqrt(k)` and its first two k-derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Carrier {
    pub k: f64,
    pub omega: f64,
    pub omega_prime: f64,
    pub omega_double_prime: f64,
}

pub fn dispersion(k: f64) -> Result<Carrier, NlsError> {
    if !(k.is_finite() && k > 0.0) {
        return Err(NlsError::Domain(k));
    }
    let omega = k.sqrt();
    Ok(Carrier {
        k,
        omega,
        omega_prime: 0.5 / omega,
        omega_double_prime: -0.25 / (k * omega),
    })
}

impl Carrier {
    /// Coefficient `a = -w''` of the dispersive term.
    pub fn dispersion_coeff(&self) -> f64 {
        -self.omega_double_prime
    }

    /// Coefficient `c = k^2 w` of the cubic term.
    pub fn nonlinear_coeff(&self) -> f64 {
        self.k * self.k * self.omega
    }
}

/// NLS state `B(X, T)` on a slow periodic grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Envelope {
    pub field: Field,
    pub time: f64,
    pub carrier: Carrier,
}

impl Envelope {
    pub fn new(field: Field, time: f64, carrier: Carrier) -> Self {
        Self {
            field,
            time,
            carrier,
        }
    }

    pub fn grid(&self) -> Grid {
        self.field.grid()
    }

    pub fn mass(&self) -> f64 {
        spectral::integrate(&self.field.abs_sqr()).re
    }

    /// `int (-w''|B_X|^2/2 - k^2 w |B|^4/4) dX`.
    pub fn hamiltonian(&self) -> f64 {
        let bx = spectral::derivative(&self.field, 1);
        let a = self.carrier.dispersion_coeff();
        let c = self.carrier.nonlinear_coeff();
        let dens = bx.zip_map(&self.field, |d, b| {
            C64::new(0.5 * a * d.norm_sqr() - 0.25 * c * b.norm_sqr().powi(2), 0.0)
        });
        spectral::integrate(&dens).re
    }

    /// `B_T` from the equation itself.
    pub fn time_derivative(&self) -> Field {
        nls_rhs(&self.field, &self.carrier)
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "X,ReB,ImB")?;
        let g = self.grid();
        for (j, z) in self.field.samples().iter().enumerate() {
            writeln!(out, "{:.17e},{:.17e},{:.17e}", g.node(j), z.re, z.im)?;
        }
        Ok(())
    }
}

/// `B_T = (1/2i)(w'' B_XX - k^2 w B|B|^2)`.
pub fn nls_rhs(b: &Field, carrier: &Carrier) -> Field {
    let bxx = spectral::derivative(b, 2);
    let wpp = carrier.omega_double_prime;
    let c = carrier.nonlinear_coeff();
    bxx.zip_map(b, |d, z| (wpp * d - c * z * z.norm_sqr()) / (2.0 * I))
}

/// Pointwise residual `2i B_T - w'' B_XX + k^2 w B|B|^2` for a given `B_T`.
pub fn nls_residual(b: &Field, b_t: &Field, carrier: &Carrier) -> Field {
    let bxx = spectral::derivative(b, 2);
    let wpp = carrier.omega_double_prime;
    let c = carrier.nonlinear_coeff();
    let lin = b_t.zip_map(&bxx, |bt, d| 2.0 * I * bt - wpp * d);
    lin.zip_map(b, |l, z| l + c * z * z.norm_sqr())
}

/// Exact linear flow over a time `tau`.
fn linear_flow(b: &Field, carrier: &Carrier, tau: f64) -> Field {
    let wpp = carrier.omega_double_prime;
    spectral::apply_symbol(b, |nu| C64::from_polar(1.0, 0.5 * wpp * nu * nu * tau))
}

fn linear_half_step(b: &Field, carrier: &Carrier, dt: f64) -> Field {
    linear_flow(b, carrier, 0.5 * dt)
}

fn nonlinear_step(b: &Field, carrier: &Carrier, dt: f64) -> Field {
    let c = carrier.nonlinear_coeff();
    b.map(|z| z * C64::from_polar(1.0, 0.5 * c * z.norm_sqr() * dt))
}

fn strang(b: &Field, carrier: &Carrier, dt: f64) -> Field {
    let h = linear_half_step(b, carrier, dt);
    let n = nonlinear_step(&h, carrier, dt);
    linear_half_step(&n, carrier, dt)
}

/// One Strang split step of length `dt`.
pub fn nls_step(b: &Envelope, dt: f64) -> Result<Envelope, NlsError> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(NlsError::BadStep(dt));
    }
    let next = strang(&b.field, &b.carrier, dt);
    next.check_finite().map_err(|_| NlsError::NonFinite { step: 0 })?;
    Ok(Envelope::new(next, b.time + dt, b.carrier))
}

/// Default step: `min(1e-3, dX^2 / |w''| / 10)`.
pub fn default_step(grid: Grid, carrier: &Carrier) -> f64 {
    let dx = grid.spacing();
    (dx * dx / carrier.omega_double_prime.abs() / 10.0).min(1e-3)
}

/// Stepped NLS trajectory with a snapshot cache and conservation series.
///
/// Consecutive linear half steps are merged: the stepped state is the last
/// snapshot advanced by half a linear step, so each step costs one transform
/// pair on the propagated state and the FFT round-off drift of the mass is
/// halved. Snapshots are read out from it with one more half step.
#[derive(Debug, Clone)]
pub struct NlsTrajectory {
    dt: f64,
    shifted: Field,
    snapshots: Vec<Envelope>,
    masses: Vec<f64>,
    hamiltonians: Vec<f64>,
}

impl NlsTrajectory {
    pub fn new(b0: Envelope, dt: f64) -> Result<Self, NlsError> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(NlsError::BadStep(dt));
        }
        let m = b0.mass();
        let h = b0.hamiltonian();
        Ok(Self {
            dt,
            shifted: linear_half_step(&b0.field, &b0.carrier, dt),
            snapshots: vec![b0],
            masses: vec![m],
            hamiltonians: vec![h],
        })
    }

    pub fn step_size(&self) -> f64 {
        self.dt
    }

    pub fn start_time(&self) -> f64 {
        self.snapshots[0].time
    }

    fn extend_to(&mut self, steps: usize) -> Result<(), NlsError> {
        while self.snapshots.len() <= steps {
            let idx = self.snapshots.len();
            let carrier = self.snapshots[0].carrier;
            let kicked = nonlinear_step(&self.shifted, &carrier, self.dt);
            let field = linear_half_step(&kicked, &carrier, self.dt);
            self.shifted = linear_flow(&kicked, &carrier, self.dt);
            field
                .check_finite()
                .map_err(|_| NlsError::NonFinite { step: idx })?;
            let env = Envelope::new(field, self.start_time() + idx as f64 * self.dt, carrier);
            self.masses.push(env.mass());
            self.hamiltonians.push(env.hamiltonian());
            self.snapshots.push(env);
        }
        Ok(())
    }

    /// Envelope at slow time `t`: whole steps from the cache, then one
    /// partial step of exact length.
    pub fn at(&mut self, t: f64) -> Result<Envelope, NlsError> {
        let t0 = self.start_time();
        if t < t0 - 1e-14 {
            return Err(NlsError::BeforeStart {
                requested: t,
                start: t0,
            });
        }
        let x = ((t - t0) / self.dt).max(0.0);
        let mut whole = x.floor() as usize;
        let mut rest = t - (t0 + whole as f64 * self.dt);
        if rest > self.dt * (1.0 - 1e-9) {
            whole += 1;
            rest = t - (t0 + whole as f64 * self.dt);
        }
        self.extend_to(whole)?;
        let base = &self.snapshots[whole];
        if rest.abs() <= 1e-12 * self.dt.max(1.0) {
            let mut e = base.clone();
            e.time = t;
            return Ok(e);
        }
        if rest < 0.0 {
            // t sits just below a cached node; step back is not supported, so
            // use the preceding node.
            let prev = &self.snapshots[whole - 1];
            let r = t - prev.time;
            return Ok(Envelope::new(strang(&prev.field, &prev.carrier, r), t, prev.carrier));
        }
        Ok(Envelope::new(strang(&base.field, &base.carrier, rest), t, base.carrier))
    }

    /// Mass and Hamiltonian at every cached step.
    pub fn conservation_series(&self) -> (&[f64], &[f64]) {
        (&self.masses, &self.hamiltonians)
    }

    pub fn max_mass_drift(&self) -> f64 {
        let m0 = self.masses[0];
        self.masses.iter().fold(0.0, |m, &x| m.max((x - m0).abs()))
    }

    pub fn max_hamiltonian_drift(&self) -> f64 {
        let h0 = self.hamiltonians[0];
        self.hamiltonians
            .iter()
            .fold(0.0, |m, &x| m.max((x - h0).abs()))
    }
}

/// Evolves `b0` to `t_final` with steps of `dt` (last step shortened).
pub fn nls_solve(b0: &Envelope, t_final: f64, dt: f64) -> Result<NlsTrajectory, NlsError> {
    let mut traj = NlsTrajectory::new(b0.clone(), dt)?;
    if t_final > b0.time {
        traj.at(t_final)?;
    }
    Ok(traj)
}

/// Exact sech soliton `eta sech(beta X) e^{i sigma T}`, centred at `L/2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Soliton {
    pub eta: f64,
    pub beta: f64,
    pub sigma: f64,
    pub center: f64,
    pub carrier: Carrier,
    pub grid: Grid,
}

impl Soliton {
    pub fn at(&self, t: f64) -> Envelope {
        let (eta, beta, x0) = (self.eta, self.beta, self.center);
        let ph = C64::from_polar(1.0, self.sigma * t);
        let f = Field::from_fn(self.grid, |x| ph * eta / (beta * (x - x0)).cosh());
        Envelope::new(f, t, self.carrier)
    }

    /// Analytic mass `2 eta^2 / beta`.
    pub fn mass(&self) -> f64 {
        2.0 * self.eta * self.eta / self.beta
    }
}

pub fn soliton(eta: f64, carrier: Carrier, grid: Grid) -> Result<Soliton, NlsError> {
    let a = carrier.dispersion_coeff();
    let c = carrier.nonlinear_coeff();
    let beta = eta * (c / (2.0 * a)).sqrt();
    let sigma = c * eta * eta / 4.0;
    let half = 0.5 * grid.length();
    let tail = 2.0 * eta * (-beta * half).exp();
    if tail > 1e-13 {
        return Err(NlsError::TailTooLarge { tail });
    }
    Ok(Soliton {
        eta,
        beta,
        sigma,
        center: half,
        carrier,
        grid,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn dispersion_closed_forms() {
        let c = dispersion(1.0).unwrap();
        assert_eq!((c.omega, c.omega_prime, c.omega_double_prime), (1.0, 0.5, -0.25));
        let c = dispersion(4.0).unwrap();
        assert!((c.omega - 2.0).abs() < 1e-15);
        assert!((c.omega_prime - 0.25).abs() < 1e-15);
        assert!((c.omega_double_prime + 1.0 / 32.0).abs() < 1e-15);
        let c = dispersion(2.0).unwrap();
        assert!((c.omega * c.omega - 2.0).abs() < 1e-15);
        assert_eq!(dispersion(0.0), Err(NlsError::Domain(0.0)));
    }

    #[test]
    fn zero_envelope_stays_zero() {
        let g = Grid::new(64, 40.0).unwrap();
        let e = Envelope::new(Field::zeros(g), 0.0, dispersion(1.0).unwrap());
        let n = nls_step(&e, 1e-2).unwrap();
        assert!(spectral::sup_norm(&n.field) == 0.0);
    }

    #[test]
    fn constant_envelope_rotates() {
        // Oracle: B = c e^{i theta(T)} in 2iB_T + k^2 w B|B|^2 = 0 gives
        // theta' = k^2 w |c|^2 / 2.
        let carrier = dispersion(2.0).unwrap();
        let g = Grid::new(32, 10.0).unwrap();
        let c0 = C64::new(0.3, -0.4);
        let mut e = Envelope::new(Field::constant(g, c0), 0.0, carrier);
        for _ in 0..1000 {
            e = nls_step(&e, 1e-3).unwrap();
        }
        let want = c0 * C64::from_polar(1.0, carrier.nonlinear_coeff() * c0.norm_sqr() * 1.0 / 2.0);
        for z in e.field.samples() {
            assert!((z - want).norm() < 1e-12);
        }
    }

    #[test]
    fn soliton_parameters_k1() {
        let carrier = dispersion(1.0).unwrap();
        let g = Grid::new(512, 60.0).unwrap();
        let s = soliton(1.0, carrier, g).unwrap();
        assert!((s.beta - 2f64.sqrt()).abs() < 1e-15);
        assert!((s.sigma - 0.25).abs() < 1e-15);
    }

    #[test]
    fn soliton_satisfies_equation_pointwise() {
        for &(k, eta) in &[(1.0, 1.0), (2.0, 0.7), (0.5, 1.3)] {
            let carrier = dispersion(k).unwrap();
            let beta = eta * (carrier.nonlinear_coeff() / (2.0 * carrier.dispersion_coeff())).sqrt();
            let g = Grid::new(1024, 80.0 / beta).unwrap();
            let s = soliton(eta, carrier, g).unwrap();
            let b = s.at(0.3);
            let bt = b.field.scale(I * s.sigma);
            let r = nls_residual(&b.field, &bt, &carrier);
            assert!(spectral::sup_norm(&r) < 1e-10, "k={k} eta={eta}");
        }
    }

    #[test]
    fn soliton_mass_matches_quadrature() {
        let carrier = dispersion(1.0).unwrap();
        let g = Grid::new(512, 2.0 * PI * 8.0).unwrap();
        let s = soliton(1.0, carrier, g).unwrap();
        assert!((s.at(0.0).mass() - s.mass()).abs() < 1e-12);
    }

    #[test]
    fn short_domain_rejected() {
        let carrier = dispersion(1.0).unwrap();
        let g = Grid::new(64, 10.0).unwrap();
        assert!(matches!(soliton(1.0, carrier, g), Err(NlsError::TailTooLarge { .. })));
    }

    #[test]
    fn zero_horizon_returns_initial() {
        let carrier = dispersion(1.0).unwrap();
        let g = Grid::new(256, 50.0).unwrap();
        let s = soliton(1.0, carrier, g).unwrap();
        let mut tr = nls_solve(&s.at(0.0), 0.0, 1e-3).unwrap();
        assert_eq!(tr.at(0.0).unwrap().field, s.at(0.0).field);
    }

    #[test]
    fn partial_steps_hit_requested_time() {
        let carrier = dispersion(1.0).unwrap();
        let g = Grid::new(256, 50.0).unwrap();
        let s = soliton(1.0, carrier, g).unwrap();
        let mut tr = NlsTrajectory::new(s.at(0.0), 1e-3).unwrap();
        let e = tr.at(0.01234).unwrap();
        assert!((e.time - 0.01234).abs() < 1e-15);
        let base = tr.at(0.012).unwrap();
        let direct = nls_step(&base, 0.01234 - 0.012).unwrap();
        assert!(spectral::sup_norm(&(&e.field - &direct.field)) < 1e-13);
        // Strang splitting error over 13 steps of 1e-3.
        let err = spectral::l2_norm(&(&e.field - &s.at(0.01234).field));
        assert!(err < 1e-7, "{err}");
    }

    #[test]
    fn merged_half_steps_match_single_steps() {
        let carrier = dispersion(1.0).unwrap();
        let g = Grid::new(256, 50.0).unwrap();
        let s = soliton(1.0, carrier, g).unwrap();
        let mut tr = NlsTrajectory::new(s.at(0.0), 1e-2).unwrap();
        let mut b = s.at(0.0);
        for n in 1..=20 {
            b = nls_step(&b, 1e-2).unwrap();
            let e = tr.at(n as f64 * 1e-2).unwrap();
            assert!(spectral::sup_norm(&(&e.field - &b.field)) < 1e-13, "step {n}");
        }
    }
}
