use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use salmanip_core::image::{gradients, GradientField};
use salmanip_core::poisson::{solve_screened_poisson, ScreenedPoissonProblem};
use salmanip_core::LabImage;

fn random_image(w: usize, h: usize, seed: u64) -> LabImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    LabImage::from_fn(w, h, |_, _| {
        [rng.random_range(0.0..100.0), rng.random_range(-80.0..80.0), rng.random_range(-80.0..80.0)]
    })
}

/// Arbitrary (generally non-integrable) gradient target.
fn random_field(w: usize, h: usize, seed: u64) -> GradientField {
    let mut g = gradients(&LabImage::filled(w, h, [0.0; 3]));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for c in 0..3 {
        g.dx[c].iter_mut().for_each(|v| *v = rng.random_range(-20.0..20.0));
        g.dy[c].iter_mut().for_each(|v| *v = rng.random_range(-20.0..20.0));
    }
    g
}

/// Dense forward-difference operator: rows for every horizontal then every
/// vertical neighbor pair.
fn dense_d(w: usize, h: usize) -> DMatrix<f64> {
    let rows = (w - 1) * h + w * (h - 1);
    let mut d = DMatrix::zeros(rows, w * h);
    let mut r = 0;
    for y in 0..h {
        for x in 0..w - 1 {
            d[(r, y * w + x)] = -1.0;
            d[(r, y * w + x + 1)] = 1.0;
            r += 1;
        }
    }
    for y in 0..h - 1 {
        for x in 0..w {
            d[(r, y * w + x)] = -1.0;
            d[(r, (y + 1) * w + x)] = 1.0;
            r += 1;
        }
    }
    d
}

fn dense_g(g: &GradientField, c: usize, w: usize, h: usize) -> DVector<f64> {
    let mut v = Vec::new();
    for y in 0..h {
        for x in 0..w - 1 {
            v.push(g.dx[c][y * w + x]);
        }
    }
    for y in 0..h - 1 {
        for x in 0..w {
            v.push(g.dy[c][y * w + x]);
        }
    }
    DVector::from_vec(v)
}

#[test]
fn residual_against_dense_system_on_50_problems() {
    let (w, h) = (8, 8);
    let d = dense_d(w, h);
    let dtd = d.transpose() * &d;
    for seed in 0..50 {
        let lambda = [0.5, 5.0, 50.0][seed as usize % 3];
        let v = random_image(w, h, seed);
        let g = random_field(w, h, 1000 + seed);
        let j = solve_screened_poisson(&ScreenedPoissonProblem::new(v.clone(), g.clone(), lambda).unwrap(), 1e-10)
            .unwrap();
        let a = DMatrix::identity(w * h, w * h) + lambda * &dtd;
        for c in 0..3 {
            let b = DVector::from_column_slice(v.channel(c)) + lambda * d.transpose() * dense_g(&g, c, w, h);
            let x = DVector::from_column_slice(j.channel(c));
            let rel = (&b - &a * &x).norm() / b.norm();
            assert!(rel <= 1e-8, "seed {seed} channel {c}: {rel:e}");
            let exact = a.clone().lu().solve(&b).unwrap();
            assert!((exact - x).amax() < 1e-6);
        }
    }
}

#[test]
fn zero_lambda_is_bit_exact() {
    let v = random_image(9, 7, 3);
    let j = solve_screened_poisson(&ScreenedPoissonProblem::new(v.clone(), random_field(9, 7, 4), 0.0).unwrap(), 1e-8)
        .unwrap();
    for c in 0..3 {
        assert_eq!(j.channel(c), v.channel(c));
    }
}

#[test]
fn own_gradients_are_a_fixed_point() {
    let i = random_image(16, 12, 5);
    let j = solve_screened_poisson(&ScreenedPoissonProblem::new(i.clone(), gradients(&i), 5.0).unwrap(), 1e-8).unwrap();
    assert!(j.max_abs_diff(&i) <= 1e-8);
}

#[test]
fn stiff_gradient_term_reproduces_target_gradients() {
    let (w, h) = (10, 10);
    let source = random_image(w, h, 6);
    let g = gradients(&source);
    let v = random_image(w, h, 7);
    let j = solve_screened_poisson(&ScreenedPoissonProblem::new(v, g.clone(), 1e6).unwrap(), 1e-12).unwrap();
    let gj = gradients(&j);
    let mut worst: f64 = 0.0;
    for c in 0..3 {
        for y in 0..h {
            for x in 0..w {
                let i = y * w + x;
                if x + 1 < w {
                    worst = worst.max((gj.dx[c][i] - g.dx[c][i]).abs());
                }
                if y + 1 < h {
                    worst = worst.max((gj.dy[c][i] - g.dy[c][i]).abs());
                }
            }
        }
    }
    assert!(worst < 1e-3, "{worst:e}");
}

#[test]
fn channels_are_independent() {
    let (w, h) = (7, 6);
    let v = random_image(w, h, 8);
    let g = random_field(w, h, 9);
    let base = solve_screened_poisson(&ScreenedPoissonProblem::new(v.clone(), g.clone(), 5.0).unwrap(), 1e-12).unwrap();
    let mut v2 = v.clone();
    v2.channel_mut(1).iter_mut().for_each(|x| *x += 13.0);
    let mut g2 = g.clone();
    g2.dx[2].iter_mut().for_each(|x| *x *= -1.0);
    let other = solve_screened_poisson(&ScreenedPoissonProblem::new(v2, g2, 5.0).unwrap(), 1e-12).unwrap();
    assert_eq!(base.channel(0), other.channel(0));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn solution_is_linear_in_the_data(seed in 0u64..1000, a in -2.0f64..2.0, b in -2.0f64..2.0) {
        let (w, h) = (6, 5);
        let (v1, v2) = (random_image(w, h, seed), random_image(w, h, seed + 1));
        let (g1, g2) = (random_field(w, h, seed + 2), random_field(w, h, seed + 3));
        let solve = |v: LabImage, g: GradientField| {
            solve_screened_poisson(&ScreenedPoissonProblem::new(v, g, 5.0).unwrap(), 1e-13).unwrap()
        };
        let mut g = g1.clone();
        for c in 0..3 {
            for (o, (p, q)) in g.dx[c].iter_mut().zip(g1.dx[c].iter().zip(&g2.dx[c])) { *o = a * p + b * q; }
            for (o, (p, q)) in g.dy[c].iter_mut().zip(g1.dy[c].iter().zip(&g2.dy[c])) { *o = a * p + b * q; }
        }
        let combined = solve(v1.linear_combination(a, &v2, b), g);
        let separate = solve(v1, g1).linear_combination(a, &solve(v2, g2), b);
        prop_assert!(combined.max_abs_diff(&separate) < 1e-6);
    }

    #[test]
    fn solution_minimizes_the_energy(seed in 0u64..1000, c in 0usize..3, k in 0usize..30, eps in -1.0f64..1.0) {
        let (w, h) = (6, 5);
        let p = ScreenedPoissonProblem::new(random_image(w, h, seed), random_field(w, h, seed + 9), 5.0).unwrap();
        let j = solve_screened_poisson(&p, 1e-12).unwrap();
        let mut probe = j.clone();
        probe.channel_mut(c)[k] += eps;
        prop_assert!(p.energy(&probe) >= p.energy(&j) - 1e-9);
    }
}
