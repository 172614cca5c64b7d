use std::f64::consts::PI;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wavepacket::curveops::{Curve, Sheet};
use wavepacket::spectral::{self, Field, Grid, C64};

fn grid(n: usize) -> Grid {
    Grid::new(n, 2.0 * PI).unwrap()
}

/// Random field with modes `0 < |m| <= band` (plus the mean if asked).
fn random_field(g: Grid, band: i64, with_mean: bool, rng: &mut ChaCha8Rng) -> Field {
    let coeffs: Vec<C64> = (0..g.n_points())
        .map(|j| {
            let m = g.mode(j);
            if m.abs() > band || (m == 0 && !with_mean) {
                C64::new(0.0, 0.0)
            } else {
                C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
            }
        })
        .collect();
    Field::from_coefficients(g, &coeffs)
}

fn max_diff(a: &Field, b: &Field) -> f64 {
    spectral::sup_norm(&(a - b))
}

/// A gentle curve `alpha + xi` with smooth random `xi` of size `amp`.
fn random_curve(g: Grid, amp: f64, rng: &mut ChaCha8Rng) -> Curve {
    let xi = random_field(g, 3, false, rng);
    let xi = xi.scale_re(amp / spectral::sup_norm(&xi));
    Curve::from_perturbation(&xi).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn flat_hilbert_is_an_involution_on_mean_free_fields(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = random_field(grid(64), 20, false, &mut rng);
        let hh = spectral::flat_hilbert(&spectral::flat_hilbert(&f));
        prop_assert!(max_diff(&hh, &f) < 1e-12);
    }

    #[test]
    fn conjugate_flat_hilbert_is_exact_conjugation(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = random_field(grid(64), 31, true, &mut rng);
        let direct = spectral::conj_flat_hilbert(&f);
        let via = spectral::flat_hilbert(&f.conj()).conj();
        prop_assert_eq!(direct.samples(), via.samples());
    }

    #[test]
    fn parseval_splits_the_h1_norm(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = random_field(grid(64), 20, false, &mut rng);
        let l2 = spectral::sobolev_norm(&f, 0.0);
        let d = spectral::sobolev_norm(&spectral::derivative(&f, 1), 0.0);
        let h1 = spectral::sobolev_norm(&f, 1.0);
        prop_assert!((l2 * l2 + d * d - h1 * h1).abs() < 1e-12 * h1 * h1);
    }

    #[test]
    fn sobolev_norm_is_translation_invariant(seed in any::<u64>(), shift in 0usize..64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = random_field(grid(64), 31, true, &mut rng);
        let a = spectral::sobolev_norm(&f, 4.0);
        let b = spectral::sobolev_norm(&f.roll(shift), 4.0);
        prop_assert!((a - b).abs() < 1e-12 * a);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn curve_hilbert_squares_to_identity_modulo_weighted_mean(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = grid(128);
        let c = random_curve(g, 0.1, &mut rng);
        let f = random_field(g, 8, true, &mut rng);
        let w = spectral::integrate(&(&f * c.gamma_prime())) / g.length();
        let hh = c.hilbert(&c.hilbert(&f));
        prop_assert!(max_diff(&hh, &f.add_const(-w)) < 1e-10);
        let one = Field::constant(g, C64::new(1.0, 0.0));
        prop_assert!(spectral::sup_norm(&c.hilbert(&one)) < 1e-12);
    }

    #[test]
    fn curve_hilbert_is_translation_equivariant(seed in any::<u64>(), shift in 1usize..128) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = grid(128);
        let c = random_curve(g, 0.1, &mut rng);
        let f = random_field(g, 8, true, &mut rng);
        let moved = Curve::from_perturbation(&c.perturbation().roll(shift)).unwrap();
        let lhs = moved.hilbert(&f.roll(shift));
        let rhs = c.hilbert(&f).roll(shift);
        prop_assert!(max_diff(&lhs, &rhs) < 1e-12);
    }

    #[test]
    fn commutator_of_boundary_values_vanishes(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = grid(256);
        let c = random_curve(g, 0.1, &mut rng);
        // (I + H)/2 projects once the weighted mean is gone.
        let project = |f: &Field| {
            let w = spectral::integrate(&(f * c.gamma_prime())) / g.length();
            let f = f.add_const(-w);
            (&f + &c.hilbert(&f)).scale_re(0.5)
        };
        let f = project(&random_field(g, 6, false, &mut rng));
        let h = project(&random_field(g, 6, false, &mut rng));
        prop_assert!(max_diff(&c.hilbert(&f), &f) < 1e-10);
        let comm = &(&f * &c.hilbert(&h)) - &c.hilbert(&(&f * &h));
        prop_assert!(spectral::sup_norm(&comm) < 1e-10);
    }
}

#[test]
fn quadrature_converges_spectrally_against_the_flat_answer() {
    let errors: Vec<f64> = [16usize, 32, 64]
        .iter()
        .map(|&n| {
            let g = grid(n);
            let f = Field::from_fn(g, |a| C64::new(1.0 / (1.2 - a.cos()), 0.0));
            let exact = spectral::flat_hilbert(&spectral::resample(&f, grid(1024)));
            let got = spectral::resample(&Curve::flat(g).hilbert(&f), grid(1024));
            max_diff(&got, &exact)
        })
        .collect();
    for w in errors.windows(2) {
        assert!(w[1] < 1e-2 * w[0] || w[1] < 1e-12, "{errors:?}");
    }
}

/// `||S2(A, f)|| <= C ||A'||_inf ||f||` with one constant over random trials
/// on a fixed curve.
#[test]
fn s2_is_bounded_by_a_lipschitz_constant() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let g = grid(128);
    let c = random_curve(g, 0.1, &mut rng);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let a = random_field(g, 6, true, &mut rng).re();
        let f = random_field(g, 12, true, &mut rng);
        let s2 = c.s2_apply(&[&a], &f, Sheet::Direct).unwrap();
        let lip = spectral::sup_norm(&spectral::derivative(&a, 1));
        worst = worst.max(spectral::l2_norm(&s2) / (lip * spectral::l2_norm(&f)));
    }
    assert!(worst <= 50.0, "{worst}");
}
