//! Screened Poisson blending of voted colors with a target gradient field.
//!
//! Per channel, the solution minimizes `|J - v|^2 + lambda * |D J - g|^2`
//! where `D` is the forward-difference operator of [`crate::image::gradients`].
//! The normal equations `(I + lambda * D^T D) J = v + lambda * D^T g` are the
//! screened Poisson equation with a 5-point Laplacian and zero-flux borders.
//! They are solved with Jacobi-preconditioned conjugate gradients, warm
//! started from `v`.

use crate::error::{Error, Result};
use crate::image::gradient::{adjoint_plane, forward_dx, forward_dy};
use crate::image::{GradientField, LabImage};
use crate::par;

pub const DEFAULT_LAMBDA: f64 = 5.0;
pub const DEFAULT_TOLERANCE: f64 = 1e-8;
pub const MAX_ITERATIONS: usize = 10_000;

#[derive(Debug, Clone)]
pub struct ScreenedPoissonProblem {
    pub data_term: LabImage,
    pub gradient_target: GradientField,
    pub lambda: f64,
}

impl ScreenedPoissonProblem {
    pub fn new(data_term: LabImage, gradient_target: GradientField, lambda: f64) -> Result<Self> {
        if data_term.dimensions() != gradient_target.dimensions() {
            return Err(Error::DimensionMismatch {
                expected: data_term.dimensions(),
                actual: gradient_target.dimensions(),
            });
        }
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return Err(Error::InvalidParameter("lambda must be finite and >= 0".into()));
        }
        Ok(Self { data_term, gradient_target, lambda })
    }

    /// Objective value of `j` for every channel summed.
    pub fn energy(&self, j: &LabImage) -> f64 {
        let (w, h) = j.dimensions();
        (0..3)
            .map(|c| {
                let data: f64 = j.channel(c).iter().zip(self.data_term.channel(c)).map(|(a, b)| (a - b).powi(2)).sum();
                let dx = forward_dx(j.channel(c), w, h);
                let dy = forward_dy(j.channel(c), w, h);
                let mut grad = 0.0;
                for y in 0..h {
                    for x in 0..w {
                        let i = y * w + x;
                        if x + 1 < w {
                            grad += (dx[i] - self.gradient_target.dx[c][i]).powi(2);
                        }
                        if y + 1 < h {
                            grad += (dy[i] - self.gradient_target.dy[c][i]).powi(2);
                        }
                    }
                }
                data + self.lambda * grad
            })
            .sum()
    }
}

/// `x + lambda * D^T D x`.
pub(crate) fn apply_operator(x: &[f64], w: usize, h: usize, lambda: f64, out: &mut [f64]) {
    let dx = forward_dx(x, w, h);
    let dy = forward_dy(x, w, h);
    adjoint_plane(&dx, &dy, w, h, out);
    par::for_each_row(out, w, |y, row| {
        let base = y * w;
        for (k, v) in row.iter_mut().enumerate() {
            *v = x[base + k] + lambda * *v;
        }
    });
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Right-hand side `v + lambda * D^T g` for one channel.
pub(crate) fn rhs_plane(v: &[f64], gx: &[f64], gy: &[f64], w: usize, h: usize, lambda: f64) -> Vec<f64> {
    let mut out = vec![0.0; w * h];
    adjoint_plane(gx, gy, w, h, &mut out);
    for (o, vi) in out.iter_mut().zip(v) {
        *o = vi + lambda * *o;
    }
    out
}

/// Relative residual `|rhs - A x| / |rhs|` (absolute when `rhs = 0`).
pub fn relative_residual(x: &[f64], rhs: &[f64], w: usize, h: usize, lambda: f64) -> f64 {
    let mut ax = vec![0.0; w * h];
    apply_operator(x, w, h, lambda, &mut ax);
    let r: f64 = rhs.iter().zip(&ax).map(|(b, a)| (b - a).powi(2)).sum::<f64>().sqrt();
    let nb = dot(rhs, rhs).sqrt();
    if nb > 0.0 {
        r / nb
    } else {
        r
    }
}

fn solve_plane(v: &[f64], gx: &[f64], gy: &[f64], w: usize, h: usize, lambda: f64, tol: f64) -> Result<Vec<f64>> {
    let b = rhs_plane(v, gx, gy, w, h, lambda);
    let nb = dot(&b, &b).sqrt();
    let target = if nb > 0.0 { tol * nb } else { tol };

    // Jacobi preconditioner: 1 + lambda * (number of 4-neighbors).
    let inv_diag: Vec<f64> = (0..w * h)
        .map(|i| {
            let (x, y) = (i % w, i / w);
            let deg = (x > 0) as usize + (x + 1 < w) as usize + (y > 0) as usize + (y + 1 < h) as usize;
            1.0 / (1.0 + lambda * deg as f64)
        })
        .collect();

    let mut x = v.to_vec();
    let mut ax = vec![0.0; w * h];
    let mut iterations = 0;
    // Outer loop re-derives the true residual so the exit test is not fooled
    // by drift in the recursively updated one.
    loop {
        apply_operator(&x, w, h, lambda, &mut ax);
        let mut r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
        let mut rnorm = dot(&r, &r).sqrt();
        if rnorm <= target {
            return Ok(x);
        }
        if iterations >= MAX_ITERATIONS {
            return Err(Error::NoConvergence { iterations, residual: rnorm / nb.max(f64::MIN_POSITIVE) });
        }
        let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(a, d)| a * d).collect();
        let mut p = z.clone();
        let mut rz = dot(&r, &z);
        let mut ap = vec![0.0; w * h];
        while rnorm > 0.5 * target && iterations < MAX_ITERATIONS {
            iterations += 1;
            apply_operator(&p, w, h, lambda, &mut ap);
            let pap = dot(&p, &ap);
            if pap <= 0.0 {
                break;
            }
            let alpha = rz / pap;
            for i in 0..w * h {
                x[i] += alpha * p[i];
                r[i] -= alpha * ap[i];
            }
            rnorm = dot(&r, &r).sqrt();
            for i in 0..w * h {
                z[i] = r[i] * inv_diag[i];
            }
            let rz_next = dot(&r, &z);
            let beta = rz_next / rz;
            rz = rz_next;
            for i in 0..w * h {
                p[i] = z[i] + beta * p[i];
            }
        }
    }
}

/// Solves every channel to relative residual `tol`.
pub fn solve_screened_poisson(p: &ScreenedPoissonProblem, tol: f64) -> Result<LabImage> {
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter("tolerance must be positive".into()));
    }
    if p.lambda == 0.0 {
        return Ok(p.data_term.clone());
    }
    let (w, h) = p.data_term.dimensions();
    let mut results: [Vec<Result<Vec<f64>>>; 3] = [vec![], vec![], vec![]];
    par::for_each_channel(&mut results, |c, slot| {
        slot.push(solve_plane(
            p.data_term.channel(c),
            &p.gradient_target.dx[c],
            &p.gradient_target.dy[c],
            w,
            h,
            p.lambda,
            tol,
        ));
    });
    let [a, b, c] = results.map(|mut v| v.pop().expect("one result per channel"));
    LabImage::new(w, h, [a?, b?, c?])
}
