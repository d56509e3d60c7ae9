//! Independent reference computations used only by tests: quadrature and
//! straight-line evaluations of every closed form the library optimizes.

#![allow(dead_code)]

use std::f64::consts::{E, PI};

/// Gauss-Legendre nodes and weights on [-1, 1], by Newton iteration on P_n.
pub fn gauss_legendre(order: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; order];
    let mut weights = vec![0.0; order];
    let nf = order as f64;
    for i in 0..order {
        let mut x = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=order {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            dp = nf * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = x;
        weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}

/// Composite Gauss-Legendre integral of `f` over [a, b] with `panels` panels.
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    if b <= a {
        return 0.0;
    }
    let (x, w) = gauss_legendre(20);
    let h = (b - a) / panels as f64;
    let mut total = 0.0;
    for p in 0..panels {
        let lo = a + p as f64 * h;
        let mid = lo + 0.5 * h;
        for (xi, wi) in x.iter().zip(&w) {
            total += wi * f(mid + 0.5 * h * xi);
        }
    }
    total * 0.5 * h
}

/// Double integral over the unit square, splitting the inner integral at the
/// diagonal where integrands involving |u - v| have a kink.
pub fn integrate_unit_square(f: impl Fn(f64, f64) -> f64) -> f64 {
    integrate(
        |v| integrate(|u| f(u, v), 0.0, v, 8) + integrate(|u| f(u, v), v, 1.0, 8),
        0.0,
        1.0,
        16,
    )
}

/// The degenerate pair kernel, written out term by term.
pub fn s0_naive(a: f64, b: f64) -> f64 {
    (-(a - b).abs()).exp() + (-a).exp() + (a - 1.0).exp() + (-b).exp() + (b - 1.0).exp()
        + 2.0 / E
        - 4.0
}

pub fn c0_naive() -> f64 {
    1.0 / (13.0 * E.powi(-3) - 40.0 * E.powi(-2) + 13.0 * E.powi(-1))
}

/// The same constant evaluated in 30-digit arithmetic; the f64 expression
/// above loses about 12 digits to cancellation.
pub const C0_REFERENCE: f64 = 61.525_987_678_415_338_281_5;

pub fn rho_naive(u: &[f64], v: &[f64], w: &[f64]) -> f64 {
    let n = u.len();
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..n {
            total += s0_naive(u[i], u[j]) * s0_naive(v[i], v[j]) * (-(w[i] - w[j]).abs()).exp();
        }
    }
    C0_REFERENCE * total / (n * n) as f64
}

pub fn rho0_naive(u: &[f64], v: &[f64], w: &[f64]) -> f64 {
    let n = u.len();
    let nf = n as f64;
    let mut pair = 0.0;
    for i in 0..n {
        for j in 0..n {
            pair += (-(u[i] - u[j]).abs() - (v[i] - v[j]).abs() - (w[i] - w[j]).abs()).exp();
        }
    }
    let g = |t: f64| 2.0 - (-t).exp() - (t - 1.0).exp();
    let mut single = 0.0;
    for i in 0..n {
        single += g(u[i]) * g(v[i]) * g(w[i]);
    }
    C0_REFERENCE * (pair / (nf * nf) + 8.0 * E.powi(-3) - 2.0 * single / nf)
}

fn l1(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

fn centered_naive(a: &[f64], b: &[f64]) -> f64 {
    let dim = a.len() as i32;
    let prod = |r: &[f64]| -> f64 {
        let mut p = 1.0;
        for &t in r {
            p *= 2.0 - (-t).exp() - (t - 1.0).exp();
        }
        p
    };
    (-l1(a, b)).exp() + (2.0 / E).powi(dim) - prod(a) - prod(b)
}

/// Rows are observations; `w` may have zero-width rows (unconditional form).
pub fn rho_multi_naive(u: &[Vec<f64>], v: &[Vec<f64>], w: &[Vec<f64>]) -> f64 {
    let n = u.len();
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..n {
            total += centered_naive(&u[i], &u[j])
                * centered_naive(&v[i], &v[j])
                * (-l1(&w[i], &w[j])).exp();
        }
    }
    total / (n * n) as f64
}

pub fn ecdf_naive(z: &[f64]) -> Vec<f64> {
    let n = z.len() as f64;
    z.iter()
        .map(|zi| z.iter().filter(|zj| *zj <= zi).count() as f64 / n)
        .collect()
}

/// Two-sample Kolmogorov-Smirnov distance by brute force over pooled points.
pub fn ks_naive(a: &[f64], b: &[f64]) -> f64 {
    let cdf = |s: &[f64], t: f64| s.iter().filter(|x| **x <= t).count() as f64 / s.len() as f64;
    a.iter()
        .chain(b)
        .map(|&t| (cdf(a, t) - cdf(b, t)).abs())
        .fold(0.0, f64::max)
}
