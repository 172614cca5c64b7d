//! Second-order time jets `(f, f_t, f_tt)` of fields.
//!
//! Products follow the Leibniz rule and every flat Fourier multiplier acts
//! componentwise, so any expression built from these operations carries its
//! exact first and second time derivatives.

use std::ops::{Add, Mul, Neg, Sub};

use crate::spectral::{self, Field, Grid, C64};

/// Operations shared by [`Field`] and [`Jet`], enough to express the flat
/// commutators of the expanded Hilbert transform.
pub trait Operand: Clone {
    fn grid(&self) -> Grid;
    fn product(&self, other: &Self) -> Self;
    fn sum(&self, other: &Self) -> Self;
    fn difference(&self, other: &Self) -> Self;
    fn scaled(&self, s: C64) -> Self;
    fn flat_hilbert(&self) -> Self;
    fn alpha_derivative(&self, order: u32) -> Self;
}

impl Operand for Field {
    fn grid(&self) -> Grid {
        Field::grid(self)
    }
    fn product(&self, other: &Self) -> Self {
        self * other
    }
    fn sum(&self, other: &Self) -> Self {
        self + other
    }
    fn difference(&self, other: &Self) -> Self {
        self - other
    }
    fn scaled(&self, s: C64) -> Self {
        self.scale(s)
    }
    fn flat_hilbert(&self) -> Self {
        spectral::flat_hilbert(self)
    }
    fn alpha_derivative(&self, order: u32) -> Self {
        spectral::derivative(self, order)
    }
}

/// `(value, d/dt, d^2/dt^2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Jet {
    pub v: Field,
    pub t1: Field,
    pub t2: Field,
}

impl Jet {
    pub fn new(v: Field, t1: Field, t2: Field) -> Self {
        Self { v, t1, t2 }
    }

    /// A field frozen in time.
    pub fn constant(v: Field) -> Self {
        let z = Field::zeros(v.grid());
        Self {
            v,
            t1: z.clone(),
            t2: z,
        }
    }

    pub fn zeros(grid: Grid) -> Self {
        Self::constant(Field::zeros(grid))
    }

    /// Applies a time-independent linear map to every component.
    pub fn map_linear(&self, f: impl Fn(&Field) -> Field) -> Self {
        Self {
            v: f(&self.v),
            t1: f(&self.t1),
            t2: f(&self.t2),
        }
    }

    pub fn conj(&self) -> Self {
        self.map_linear(Field::conj)
    }

    pub fn re(&self) -> Self {
        self.map_linear(Field::re)
    }

    pub fn im(&self) -> Self {
        self.map_linear(Field::im)
    }

    pub fn abs_sqr(&self) -> Self {
        self.product(&self.conj())
    }

    pub fn conj_flat_hilbert(&self) -> Self {
        self.map_linear(spectral::conj_flat_hilbert)
    }
}

impl Operand for Jet {
    fn grid(&self) -> Grid {
        self.v.grid()
    }
    fn product(&self, o: &Self) -> Self {
        let v = &self.v * &o.v;
        let t1 = &(&self.t1 * &o.v) + &(&self.v * &o.t1);
        let cross = (&self.t1 * &o.t1).scale_re(2.0);
        let t2 = &(&(&self.t2 * &o.v) + &cross) + &(&self.v * &o.t2);
        Self { v, t1, t2 }
    }
    fn sum(&self, o: &Self) -> Self {
        Self {
            v: &self.v + &o.v,
            t1: &self.t1 + &o.t1,
            t2: &self.t2 + &o.t2,
        }
    }
    fn difference(&self, o: &Self) -> Self {
        Self {
            v: &self.v - &o.v,
            t1: &self.t1 - &o.t1,
            t2: &self.t2 - &o.t2,
        }
    }
    fn scaled(&self, s: C64) -> Self {
        self.map_linear(|f| f.scale(s))
    }
    fn flat_hilbert(&self) -> Self {
        self.map_linear(spectral::flat_hilbert)
    }
    fn alpha_derivative(&self, order: u32) -> Self {
        self.map_linear(|f| spectral::derivative(f, order))
    }
}

impl Add for &Jet {
    type Output = Jet;
    fn add(self, o: &Jet) -> Jet {
        self.sum(o)
    }
}

impl Sub for &Jet {
    type Output = Jet;
    fn sub(self, o: &Jet) -> Jet {
        self.difference(o)
    }
}

impl Mul for &Jet {
    type Output = Jet;
    fn mul(self, o: &Jet) -> Jet {
        self.product(o)
    }
}

impl Neg for &Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scaled(C64::new(-1.0, 0.0))
    }
}

/// `[g, H0] f = g H0 f - H0 (g f)`.
pub fn flat_commutator<T: Operand>(g: &T, f: &T) -> T {
    g.product(&f.flat_hilbert())
        .difference(&g.product(f).flat_hilbert())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn leibniz_matches_explicit_derivatives() {
        let g = Grid::new(64, 2.0 * PI).unwrap();
        let t = 0.3;
        // f = e^{i(a + 2t)}, h = cos(a) t^2.
        let f = Jet::new(
            Field::from_fn(g, |a| C64::from_polar(1.0, a + 2.0 * t)),
            Field::from_fn(g, |a| C64::new(0.0, 2.0) * C64::from_polar(1.0, a + 2.0 * t)),
            Field::from_fn(g, |a| C64::new(-4.0, 0.0) * C64::from_polar(1.0, a + 2.0 * t)),
        );
        let h = Jet::new(
            Field::from_fn(g, |a| C64::new(a.cos() * t * t, 0.0)),
            Field::from_fn(g, |a| C64::new(2.0 * a.cos() * t, 0.0)),
            Field::from_fn(g, |a| C64::new(2.0 * a.cos(), 0.0)),
        );
        let p = &f * &h;
        let want = |a: f64, d: u32| {
            let e = C64::from_polar(1.0, a + 2.0 * t);
            let c = a.cos();
            match d {
                0 => e * c * t * t,
                1 => C64::new(0.0, 2.0) * e * c * t * t + e * 2.0 * c * t,
                _ => -4.0 * e * c * t * t + 2.0 * C64::new(0.0, 2.0) * e * 2.0 * c * t + e * 2.0 * c,
            }
        };
        for j in 0..64 {
            let a = g.node(j);
            assert!((p.v.samples()[j] - want(a, 0)).norm() < 1e-13);
            assert!((p.t1.samples()[j] - want(a, 1)).norm() < 1e-13);
            assert!((p.t2.samples()[j] - want(a, 2)).norm() < 1e-13);
        }
    }

    #[test]
    fn flat_commutator_with_constant_vanishes() {
        let g = Grid::new(64, 2.0 * PI).unwrap();
        let c = Field::constant(g, C64::new(0.4, 1.0));
        let f = Field::from_fn(g, |a| C64::new(a.cos(), (3.0 * a).sin()));
        assert!(spectral::sup_norm(&flat_commutator(&c, &f)) < 1e-14);
    }
}
