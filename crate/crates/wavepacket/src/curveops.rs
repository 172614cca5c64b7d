//! Curve-attached Hilbert transform, commutators and product-kernel singular
//! integrals on a periodic curve `gamma(alpha) = alpha + p(alpha)`.
//!
//! Periodization: the line kernel `1/(gamma(a) - gamma(b))` summed over the
//! periodic images is `(pi/L) cot(pi (gamma(a) - gamma(b)) / L)`, and powers
//! `sum_n (z + nL)^{-m}` follow by differentiation. With
//! `E_j = exp(2 pi i gamma_j / L)` the cotangent is `i Q_jl` where
//! `Q_jl = (E_j + E_l)/(E_j - E_l)`; `Q` is cached per curve.
//!
//! Singular (principal value) integrals use the alternating-point trapezoidal
//! rule: only nodes `l` with `l - j` odd contribute, with weight `2h`.
//! Smooth kernels use the full trapezoidal rule with their analytic diagonal.

use std::f64::consts::PI;

use thiserror::Error;

use crate::par;
use crate::spectral::{self, Field, Grid, SpectralError, C64, I};

/// Smallest accepted lower chord-arc constant.
pub const CHORD_ARC_FLOOR: f64 = 1e-2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CurveError {
    #[error("chord-arc violation between nodes {i} and {j} (ratio {ratio:e})")]
    ChordArc { i: usize, j: usize, ratio: f64 },
    #[error("fixed-point iteration did not converge in {iterations} steps (last update {update:e})")]
    NonConvergence { iterations: usize, update: f64 },
    #[error("unsupported kernel order {0}")]
    KernelOrder(usize),
    #[error("field grid does not match the curve grid")]
    GridMismatch,
    #[error(transparent)]
    Spectral(#[from] SpectralError),
}

/// Chord-arc constants `nu <= |gamma(a) - gamma(b)| / |a - b| <= big`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChordArc {
    pub nu: f64,
    pub big: f64,
    pub worst_pair: (usize, usize),
}

impl ChordArc {
    pub fn ratio(&self) -> f64 {
        self.big / self.nu
    }
}

/// A periodic curve with its cached cotangent kernel.
#[derive(Debug, Clone)]
pub struct Curve {
    grid: Grid,
    gamma: Field,
    gamma_prime: Field,
    periodic: Field,
    q: Vec<C64>,
}

/// Which sheet a product kernel's denominators live on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sheet {
    /// `gamma(a) - gamma(b)`.
    Direct,
    /// `conj(gamma(a)) - conj(gamma(b))`.
    Conjugate,
}

impl Curve {
    /// Builds a curve from samples of `gamma` (which must equal the node
    /// coordinate plus a periodic part).
    pub fn new(gamma: Field) -> Result<Self, CurveError> {
        Self::with_stride(gamma, 4)
    }

    /// As [`Curve::new`], scanning chord-arc pairs at the given stride.
    pub fn with_stride(gamma: Field, stride: usize) -> Result<Self, CurveError> {
        gamma.check_finite()?;
        let grid = gamma.grid();
        let periodic = &gamma - &Field::coordinate(grid);
        let gamma_prime = spectral::derivative(&periodic, 1).add_const(C64::new(1.0, 0.0));
        let n = grid.n_points();
        let l = grid.length();
        let e: Vec<C64> = gamma
            .samples()
            .iter()
            .map(|&g| (2.0 * PI * I * g / l).exp())
            .collect();
        let mut q = vec![C64::new(0.0, 0.0); n * n];
        par::fill_rows(&mut q, n, |j, row| {
            let ej = e[j];
            for (l, qjl) in row.iter_mut().enumerate() {
                if l != j {
                    *qjl = (ej + e[l]) / (ej - e[l]);
                }
            }
        });
        let curve = Self {
            grid,
            gamma,
            gamma_prime,
            periodic,
            q,
        };
        let ca = curve.chord_arc(stride.max(1));
        if ca.nu < CHORD_ARC_FLOOR {
            return Err(CurveError::ChordArc {
                i: ca.worst_pair.0,
                j: ca.worst_pair.1,
                ratio: ca.nu,
            });
        }
        Ok(curve)
    }

    /// The rest state `gamma(alpha) = alpha`.
    pub fn flat(grid: Grid) -> Self {
        Self::new(Field::coordinate(grid)).expect("flat curve is chord-arc")
    }

    /// Curve `alpha + xi(alpha)` for a periodic perturbation `xi`.
    pub fn from_perturbation(xi: &Field) -> Result<Self, CurveError> {
        Self::new(&Field::coordinate(xi.grid()) + xi)
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn gamma(&self) -> &Field {
        &self.gamma
    }

    pub fn gamma_prime(&self) -> &Field {
        &self.gamma_prime
    }

    /// `gamma - alpha`.
    pub fn perturbation(&self) -> &Field {
        &self.periodic
    }

    fn check(&self, f: &Field) -> Result<(), CurveError> {
        if f.grid() != self.grid {
            return Err(CurveError::GridMismatch);
        }
        Ok(())
    }

    #[inline]
    fn row(&self, j: usize) -> &[C64] {
        let n = self.grid.n_points();
        &self.q[j * n..(j + 1) * n]
    }

    /// Chord-arc constants over node pairs `(i, j)` with `i, j` multiples of
    /// `stride`, using the minimal periodic separation.
    pub fn chord_arc(&self, stride: usize) -> ChordArc {
        let n = self.grid.n_points();
        let l = self.grid.length();
        let h = self.grid.spacing();
        let p = self.periodic.samples();
        let mut nu = f64::INFINITY;
        let mut big: f64 = 0.0;
        let mut worst = (0, 0);
        for i in (0..n).step_by(stride) {
            for j in (0..n).step_by(stride) {
                if i == j {
                    continue;
                }
                let mut d = (i as f64 - j as f64) * h;
                if d > 0.5 * l {
                    d -= l;
                } else if d < -0.5 * l {
                    d += l;
                }
                let dz = C64::new(d, 0.0) + p[i] - p[j];
                let r = dz.norm() / d.abs();
                if r < nu {
                    nu = r;
                    worst = (i, j);
                }
                big = big.max(r);
            }
        }
        ChordArc {
            nu,
            big,
            worst_pair: worst,
        }
    }

    /// `H_gamma f = (1/(pi i)) pv int gamma_b / (gamma(a) - gamma(b)) f(b) db`.
    pub fn hilbert(&self, f: &Field) -> Field {
        self.check(f).expect("grid mismatch");
        let n = self.grid.n_points();
        let w: Vec<C64> = self
            .gamma_prime
            .samples()
            .iter()
            .zip(f.samples())
            .map(|(g, v)| g * v)
            .collect();
        let s = 2.0 / n as f64;
        let out = par::map_rows(n, |j| {
            let row = self.row(j);
            let mut acc = C64::new(0.0, 0.0);
            let mut l = (j + 1) % 2;
            while l < n {
                acc += row[l] * w[l];
                l += 2;
            }
            acc * s
        });
        Field::from_vec(self.grid, out)
    }

    /// `conj(H_gamma conj(f))`.
    pub fn conj_hilbert(&self, f: &Field) -> Field {
        self.hilbert(&f.conj()).conj()
    }

    /// `[g, H_gamma](f_alpha / gamma_alpha)
    ///   = (1/(pi i)) int (g(a) - g(b)) / (gamma(a) - gamma(b)) f_b(b) db`
    /// for periodic `g` and `f`.
    pub fn commutator(&self, g: &Field, f: &Field) -> Field {
        let fp = spectral::derivative(f, 1);
        self.commutator_density(g, &fp)
    }

    /// As [`Curve::commutator`], with the density `f_b` supplied directly.
    pub fn commutator_density(&self, g: &Field, fp: &Field) -> Field {
        self.check(g).expect("grid mismatch");
        self.check(fp).expect("grid mismatch");
        let n = self.grid.n_points();
        let h = self.grid.spacing();
        let gp = spectral::derivative(g, 1);
        let gs = g.samples();
        let fs = fp.samples();
        let inv_n = 1.0 / n as f64;
        let diag = h / (PI * I);
        let gpr = self.gamma_prime.samples();
        let gps = gp.samples();
        let out = par::map_rows(n, |j| {
            let row = self.row(j);
            let gj = gs[j];
            let mut acc = C64::new(0.0, 0.0);
            for l in 0..n {
                acc += (gj - gs[l]) * row[l] * fs[l];
            }
            acc * inv_n + diag * gps[j] * fs[j] / gpr[j]
        });
        Field::from_vec(self.grid, out)
    }

    /// Periodized `sum_n (z + nL)^{-m}` in terms of `c = cot(pi z / L)`.
    fn kernel_power(m: usize, c: C64, l: f64) -> C64 {
        let a = PI / l;
        let one = C64::new(1.0, 0.0);
        match m {
            1 => a * c,
            2 => a * a * (one + c * c),
            3 => a * a * a * c * (one + c * c),
            4 => a.powi(4) * (one + c * c) * (one + 3.0 * c * c) / 3.0,
            _ => unreachable!("kernel order checked by caller"),
        }
    }

    fn cot(&self, j: usize, l: usize, sheet: Sheet) -> C64 {
        let c = I * self.row(j)[l];
        match sheet {
            Sheet::Direct => c,
            Sheet::Conjugate => c.conj(),
        }
    }

    /// `S2(A, f) = int prod_j (A_j(a) - A_j(b)) / (g(a) - g(b)) f_b(b) db`
    /// with all denominators on the given sheet of this curve.
    pub fn s2_apply(&self, a: &[&Field], f: &Field, sheet: Sheet) -> Result<Field, CurveError> {
        let fp = spectral::derivative(f, 1);
        self.s2_apply_density(a, &fp, sheet)
    }

    /// As [`Curve::s2_apply`] with `f_b` supplied directly.
    pub fn s2_apply_density(
        &self,
        a: &[&Field],
        fp: &Field,
        sheet: Sheet,
    ) -> Result<Field, CurveError> {
        let m = a.len();
        if m > 4 {
            return Err(CurveError::KernelOrder(m));
        }
        self.check(fp)?;
        for x in a {
            self.check(x)?;
        }
        let n = self.grid.n_points();
        let h = self.grid.spacing();
        let l = self.grid.length();
        if m == 0 {
            let total = spectral::integrate(fp);
            return Ok(Field::constant(self.grid, total));
        }
        let gp = match sheet {
            Sheet::Direct => self.gamma_prime.clone(),
            Sheet::Conjugate => self.gamma_prime.conj(),
        };
        let a_s: Vec<&[C64]> = a.iter().map(|x| x.samples()).collect();
        let ap: Vec<Field> = a.iter().map(|x| spectral::derivative(x, 1)).collect();
        let fs = fp.samples();
        let out = par::map_rows(n, |j| {
            let mut acc = C64::new(0.0, 0.0);
            for ll in 0..n {
                if ll == j {
                    continue;
                }
                let mut prod = C64::new(1.0, 0.0);
                for aj in &a_s {
                    prod *= aj[j] - aj[ll];
                }
                acc += prod * Self::kernel_power(m, self.cot(j, ll, sheet), l) * fs[ll];
            }
            let mut d = fs[j];
            for apj in &ap {
                d *= apj.samples()[j] / gp.samples()[j];
            }
            (acc + d) * h
        });
        Ok(Field::from_vec(self.grid, out))
    }

    /// `S1(A, f) = int prod_j (A_j(a) - A_j(b)) / (g(a) - g(b)) f(b) / (g(a) - g(b)) db`
    /// (principal value, alternating-point rule).
    pub fn s1_apply(&self, a: &[&Field], f: &Field, sheet: Sheet) -> Result<Field, CurveError> {
        let m = a.len();
        if m > 3 {
            return Err(CurveError::KernelOrder(m));
        }
        self.check(f)?;
        for x in a {
            self.check(x)?;
        }
        let n = self.grid.n_points();
        let h = self.grid.spacing();
        let l = self.grid.length();
        let a_s: Vec<&[C64]> = a.iter().map(|x| x.samples()).collect();
        let fs = f.samples();
        let out = par::map_rows(n, |j| {
            let mut acc = C64::new(0.0, 0.0);
            let mut ll = (j + 1) % 2;
            while ll < n {
                let mut prod = C64::new(1.0, 0.0);
                for aj in &a_s {
                    prod *= aj[j] - aj[ll];
                }
                acc += prod * Self::kernel_power(m + 1, self.cot(j, ll, sheet), l) * fs[ll];
                ll += 2;
            }
            acc * 2.0 * h
        });
        Ok(Field::from_vec(self.grid, out))
    }

    /// `Re(H_gamma f)` for real `f` (the double layer part).
    pub fn real_hilbert(&self, f: &Field) -> Field {
        self.hilbert(f).re()
    }
}

/// Result of [`solve_real_part`].
#[derive(Debug, Clone)]
pub struct RealSolve {
    pub field: Field,
    pub iterations: usize,
    pub last_update: f64,
}

/// Solves `(I - H_gamma) f = rhs` for real `f` by the iteration
/// `f <- Re(rhs) + Re(H_gamma f)`, starting from `Re(rhs)`.
pub fn solve_real_part(
    c: &Curve,
    rhs: &Field,
    tol: f64,
    max_iter: usize,
) -> Result<RealSolve, CurveError> {
    c.check(rhs)?;
    let base = rhs.re();
    let mut f = base.clone();
    let mut update = f64::INFINITY;
    for it in 1..=max_iter {
        let next = &base + &c.real_hilbert(&f);
        update = spectral::l2_norm(&(&next - &f));
        f = next;
        if update < tol {
            return Ok(RealSolve {
                field: f,
                iterations: it,
                last_update: update,
            });
        }
    }
    Err(CurveError::NonConvergence {
        iterations: max_iter,
        update,
    })
}

/// Solves `(I - H_gamma)(weight f) = rhs` for real `f` by the iteration
/// `f <- Re((rhs + H_gamma(weight f)) / weight)`, starting from
/// `Re(rhs / weight)`.
pub fn solve_real_weighted(
    c: &Curve,
    weight: &Field,
    rhs: &Field,
    tol: f64,
    max_iter: usize,
) -> Result<RealSolve, CurveError> {
    c.check(rhs)?;
    c.check(weight)?;
    let inv = weight.recip();
    let mut f = (rhs * &inv).re();
    let mut update = f64::INFINITY;
    for it in 1..=max_iter {
        let hw = c.hilbert(&(weight * &f));
        let next = (&(rhs + &hw) * &inv).re();
        update = spectral::l2_norm(&(&next - &f));
        f = next;
        if update < tol {
            return Ok(RealSolve {
                field: f,
                iterations: it,
                last_update: update,
            });
        }
    }
    Err(CurveError::NonConvergence {
        iterations: max_iter,
        update,
    })
}

/// Default tolerance and iteration cap for [`solve_real_part`].
pub const REAL_SOLVE_TOL: f64 = 1e-12;
pub const REAL_SOLVE_MAX_ITER: usize = 100;
