//! Closed-form V-statistics on transformed samples.
//!
//! Every statistic here is a double sum over ordered pairs (diagonal
//! included) of products of centered exponential kernels. Pairwise
//! `exp(-|a - b|)` factors are formed from per-row caches of `e^a` and
//! `e^-a`, so the O(n²) loop performs no transcendental calls. Row partial
//! sums are reduced in index order, which keeps results independent of the
//! number of worker threads.

use std::f64::consts::E;

use ndarray::ArrayView2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::transforms::TransformedSample;

/// Normalizing constant `(13e^-3 - 40e^-2 + 13e^-1)^-1`.
pub const C0: f64 = 61.525_987_678_415_34;

const INV_E: f64 = 1.0 / E;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StatisticValue {
    pub value: f64,
    pub n: usize,
    pub dims: (usize, usize, usize),
    /// Whether the `C0` scaling was applied.
    pub normalized: bool,
}

/// Degenerate pair kernel on [0, 1]²:
/// `e^-|a-b| + e^-a + e^(a-1) + e^-b + e^(b-1) + 2/e - 4`.
pub fn s0(a: f64, b: f64) -> f64 {
    (-(a - b).abs()).exp() + (-a).exp() + (a - 1.0).exp() + (-b).exp() + (b - 1.0).exp()
        + 2.0 * INV_E
        - 4.0
}

/// `prod_k (2 - e^-u_k - e^(u_k - 1))`, the expectation of
/// `exp(-||u - U'||_1)` over an independent uniform `U'`.
pub fn s_marginal_product(u_row: &[f64]) -> f64 {
    u_row
        .iter()
        .map(|&t| 2.0 - (-t).exp() - (t - 1.0).exp())
        .product()
}

/// Row caches of `e^x` and `e^-x` for a row-major n × d block.
struct ExpCache {
    d: usize,
    pos: Vec<f64>,
    neg: Vec<f64>,
}

impl ExpCache {
    fn new(m: ArrayView2<f64>) -> Self {
        let d = m.ncols();
        let mut pos = Vec::with_capacity(m.len());
        let mut neg = Vec::with_capacity(m.len());
        for row in m.rows() {
            for &x in row {
                pos.push(x.exp());
                neg.push((-x).exp());
            }
        }
        Self { d, pos, neg }
    }

    /// `exp(-||x_i - x_j||_1)`.
    #[inline]
    fn decay(&self, i: usize, j: usize) -> f64 {
        let (a, b) = (i * self.d, j * self.d);
        let mut acc = 1.0;
        for k in 0..self.d {
            // one factor is <= 1 and the other >= 1; the smaller one is
            // exp(-|x_ik - x_jk|)
            acc *= (self.neg[a + k] * self.pos[b + k]).min(self.pos[a + k] * self.neg[b + k]);
        }
        acc
    }

    /// Centering offsets `(2/e)^d / 2 - prod_k(2 - e^-x_ik - e^(x_ik - 1))`,
    /// so the centered kernel is `decay(i, j) + offset_i + offset_j`.
    fn offsets(&self) -> Vec<f64> {
        let half_base = 0.5 * (2.0 * INV_E).powi(self.d as i32);
        (0..self.pos.len() / self.d.max(1))
            .map(|i| {
                let mut prod = 1.0;
                for k in 0..self.d {
                    let idx = i * self.d + k;
                    prod *= 2.0 - self.neg[idx] - self.pos[idx] * INV_E;
                }
                half_base - prod
            })
            .collect()
    }
}

/// `sum_{i,j} f(i, j)` for a symmetric `f`, using the upper triangle.
fn symmetric_pair_sum(n: usize, f: impl Fn(usize, usize) -> f64 + Sync) -> f64 {
    let rows: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut off = 0.0;
            for j in i + 1..n {
                off += f(i, j);
            }
            f(i, i) + 2.0 * off
        })
        .collect();
    rows.iter().sum()
}

fn check_rows(ts: &TransformedSample) -> Result<usize> {
    let n = ts.n();
    if n == 0 {
        return Err(Error::EmptyData);
    }
    Ok(n)
}

fn require_univariate(ts: &TransformedSample) -> Result<()> {
    if ts.dims() != (1, 1, 1) {
        return Err(Error::DimensionMismatch(format!(
            "univariate statistic needs p = q = r = 1, got {:?}",
            ts.dims()
        )));
    }
    Ok(())
}

/// Raw (unnormalized) pair mean `n^-2 sum A_ij B_ij D_ij` where `D` is the
/// decay over `w` (identically 1 when `w` has no columns).
pub(crate) fn centered_pair_mean(u: ArrayView2<f64>, v: ArrayView2<f64>, w: ArrayView2<f64>) -> f64 {
    let n = u.nrows();
    let cu = ExpCache::new(u);
    let cv = ExpCache::new(v);
    let cw = ExpCache::new(w);
    let ou = cu.offsets();
    let ov = cv.offsets();
    let total = symmetric_pair_sum(n, |i, j| {
        let a = cu.decay(i, j) + ou[i] + ou[j];
        let b = cv.decay(i, j) + ov[i] + ov[j];
        a * b * cw.decay(i, j)
    });
    total / (n as f64 * n as f64)
}

/// Normalized index estimator for univariate x, y and z.
pub fn rho_hat(ts: &TransformedSample) -> Result<StatisticValue> {
    require_univariate(ts)?;
    let n = check_rows(ts)?;
    Ok(StatisticValue {
        value: C0 * centered_pair_mean(ts.u.view(), ts.v.view(), ts.w.view()),
        n,
        dims: (1, 1, 1),
        normalized: true,
    })
}

/// Moment estimator that ignores the independence of (U, V) from W:
/// `C0 { n^-2 sum e^(-|du|-|dv|-|dw|) + 8e^-3 - 2 n^-1 sum g(U) g(V) g(W) }`
/// with `g(t) = 2 - e^-t - e^(t-1)`.
pub(crate) fn rho0_raw(u: ArrayView2<f64>, v: ArrayView2<f64>, w: ArrayView2<f64>) -> f64 {
    let n = u.nrows();
    let nf = n as f64;
    let cu = ExpCache::new(u);
    let cv = ExpCache::new(v);
    let cw = ExpCache::new(w);
    let pair = symmetric_pair_sum(n, |i, j| cu.decay(i, j) * cv.decay(i, j) * cw.decay(i, j));
    let g = |c: &ExpCache, i: usize| 2.0 - c.neg[i] - c.pos[i] * INV_E;
    let single: f64 = (0..n).map(|i| g(&cu, i) * g(&cv, i) * g(&cw, i)).sum();
    C0 * (pair / (nf * nf) + 8.0 * INV_E.powi(3) - 2.0 * single / nf)
}

pub fn rho0_hat(ts: &TransformedSample) -> Result<StatisticValue> {
    require_univariate(ts)?;
    let n = check_rows(ts)?;
    Ok(StatisticValue {
        value: rho0_raw(ts.u.view(), ts.v.view(), ts.w.view()),
        n,
        dims: (1, 1, 1),
        normalized: true,
    })
}

/// Multivariate statistic `n^-2 sum A_ij B_ij exp(-||w_i - w_j||_1)`,
/// unnormalized. With p = q = r = 1 it equals `rho_hat / C0`.
pub fn rho_hat_multi(ts: &TransformedSample) -> Result<StatisticValue> {
    let n = check_rows(ts)?;
    let dims = ts.dims();
    if dims.2 == 0 {
        return Err(Error::DimensionMismatch(
            "conditional statistic needs at least one conditioning coordinate".into(),
        ));
    }
    Ok(StatisticValue {
        value: centered_pair_mean(ts.u.view(), ts.v.view(), ts.w.view()),
        n,
        dims,
        normalized: false,
    })
}

/// Unconditional form `n^-2 sum A_ij B_ij`; requires an empty `w`.
pub fn rho_unconditional(ts: &TransformedSample) -> Result<StatisticValue> {
    let n = check_rows(ts)?;
    let dims = ts.dims();
    if dims.2 != 0 {
        return Err(Error::DimensionMismatch(format!(
            "unconditional statistic takes no conditioning coordinates, got r = {}",
            dims.2
        )));
    }
    Ok(StatisticValue {
        value: centered_pair_mean(ts.u.view(), ts.v.view(), ts.w.view()),
        n,
        dims,
        normalized: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracles::*;
    use crate::rng::stream_rng;
    use approx::assert_abs_diff_eq;
    use ndarray::Array2;
    use proptest::prelude::*;
    use rand::Rng;

    fn uniform_block(rng: &mut impl Rng, n: usize, d: usize) -> Array2<f64> {
        Array2::from_shape_fn((n, d), |_| rng.random::<f64>())
    }

    fn sample(seed: u64, n: usize, p: usize, q: usize, r: usize) -> TransformedSample {
        let mut rng = stream_rng(seed, 0);
        let u = uniform_block(&mut rng, n, p);
        let v = uniform_block(&mut rng, n, q);
        let w = uniform_block(&mut rng, n, r);
        TransformedSample::from_parts(u, v, w).unwrap()
    }

    fn rows(m: &Array2<f64>) -> Vec<Vec<f64>> {
        m.rows().into_iter().map(|r| r.to_vec()).collect()
    }

    #[test]
    fn constant_matches_closed_form() {
        assert_abs_diff_eq!(C0, C0_REFERENCE, epsilon = 1e-13);
        assert_abs_diff_eq!(C0, c0_naive(), epsilon = 1e-10);
    }

    #[test]
    fn s0_point_values() {
        assert_abs_diff_eq!(s0(0.0, 0.0), 4.0 / E - 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(s0(0.0, 0.0), 0.471518, epsilon = 1e-6);
        assert_abs_diff_eq!(s0(0.0, 1.0), 5.0 / E - 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(s0(0.0, 1.0), -0.160603, epsilon = 1e-6);
    }

    #[test]
    fn marginal_product_values() {
        assert_abs_diff_eq!(s_marginal_product(&[0.0]), 1.0 - 1.0 / E, epsilon = 1e-15);
        assert_abs_diff_eq!(s_marginal_product(&[0.0, 0.0]), (1.0 - 1.0 / E).powi(2), epsilon = 1e-15);
        assert_abs_diff_eq!(s_marginal_product(&[0.0, 0.0]), 0.399576, epsilon = 1e-6);
        for u in [0.0, 0.3, 0.7, 1.0] {
            let quad = integrate(|v| (-(u - v).abs()).exp(), 0.0, u, 8) + integrate(|v| (-(u - v).abs()).exp(), u, 1.0, 8);
            assert_abs_diff_eq!(s_marginal_product(&[u]), quad, epsilon = 1e-8);
        }
    }

    #[test]
    fn two_row_example_matches_oracle() {
        let col = |v: [f64; 2]| Array2::from_shape_vec((2, 1), v.to_vec()).unwrap();
        let ts = TransformedSample::from_parts(col([0.5, 1.0]), col([0.5, 1.0]), col([0.5, 1.0])).unwrap();
        let expect = C0
            * 0.25
            * (s0(0.5, 0.5).powi(2) + 2.0 * s0(0.5, 1.0).powi(2) * (-0.5f64).exp() + s0(1.0, 1.0).powi(2));
        assert_abs_diff_eq!(rho_hat(&ts).unwrap().value, expect, epsilon = 1e-14);
        assert_abs_diff_eq!(
            rho_hat(&ts).unwrap().value,
            rho_naive(&[0.5, 1.0], &[0.5, 1.0], &[0.5, 1.0]),
            epsilon = 1e-12
        );
    }

    #[test]
    fn rho0_single_row() {
        let one = Array2::from_elem((1, 1), 1.0);
        let ts = TransformedSample::from_parts(one.clone(), one.clone(), one).unwrap();
        let g = 2.0 - 1.0 - 1.0 / E;
        let expect = C0 * (1.0 + 8.0 / E.powi(3) - 2.0 * g.powi(3));
        assert_abs_diff_eq!(rho0_hat(&ts).unwrap().value, expect, epsilon = 1e-13);
    }

    #[test]
    fn optimized_sums_match_straight_line_oracles() {
        for seed in 0..40 {
            let n = 1 + (seed as usize % 8);
            let ts = sample(seed, n, 1, 1, 1);
            let (u, v, w) = (ts.u.column(0).to_vec(), ts.v.column(0).to_vec(), ts.w.column(0).to_vec());
            assert_abs_diff_eq!(rho_hat(&ts).unwrap().value, rho_naive(&u, &v, &w), epsilon = 1e-12);
            assert_abs_diff_eq!(rho0_hat(&ts).unwrap().value, rho0_naive(&u, &v, &w), epsilon = 1e-12);

            let (p, q, r) = (1 + seed as usize % 3, 1 + (seed as usize / 3) % 3, 1 + (seed as usize / 9) % 3);
            let tm = sample(seed + 100, n, p, q, r);
            let expect = rho_multi_naive(&rows(&tm.u), &rows(&tm.v), &rows(&tm.w));
            assert_abs_diff_eq!(rho_hat_multi(&tm).unwrap().value, expect, epsilon = 1e-12);
        }
    }

    #[test]
    fn multivariate_reduces_to_univariate() {
        let ts = sample(5, 60, 1, 1, 1);
        let a = rho_hat(&ts).unwrap().value;
        let b = rho_hat_multi(&ts).unwrap().value;
        assert_abs_diff_eq!(a / C0, b, epsilon = 1e-12);
    }

    #[test]
    fn unconditional_matches_oracle_with_empty_w() {
        let ts = sample(3, 7, 2, 1, 0);
        let empty = vec![Vec::new(); 7];
        let expect = rho_multi_naive(&rows(&ts.u), &rows(&ts.v), &empty);
        assert_abs_diff_eq!(rho_unconditional(&ts).unwrap().value, expect, epsilon = 1e-12);
        assert!(rho_hat_multi(&ts).is_err());
        assert!(rho_unconditional(&sample(3, 7, 1, 1, 1)).is_err());
    }

    #[test]
    fn dimension_checks() {
        let ts = sample(1, 10, 2, 1, 1);
        assert!(matches!(rho_hat(&ts), Err(Error::DimensionMismatch(_))));
        assert!(matches!(rho0_hat(&ts), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn kernel_degeneracy_and_normalization() {
        let mean = integrate_unit_square(s0);
        assert_abs_diff_eq!(mean, 0.0, epsilon = 1e-8);
        let second = integrate_unit_square(|a, b| s0(a, b).powi(2));
        assert_abs_diff_eq!(second, 6.5 / (E * E) - 20.0 / E + 6.5, epsilon = 1e-5);
        let decay = integrate_unit_square(|a, b| (-(a - b).abs()).exp());
        assert_abs_diff_eq!(decay, 2.0 / E, epsilon = 1e-8);
        assert_abs_diff_eq!(1.0 / C0, decay * second, epsilon = 1e-6);
    }

    #[test]
    fn reflection_and_exchange_symmetry() {
        let ts = sample(11, 120, 1, 1, 1);
        let base = rho_hat(&ts).unwrap().value;
        let swapped = TransformedSample::from_parts(ts.v.clone(), ts.u.clone(), ts.w.clone()).unwrap();
        assert_eq!(rho_hat(&swapped).unwrap().value, base);
        let reflected = TransformedSample::from_parts(ts.u.mapv(|x| 1.0 - x), ts.v.clone(), ts.w.clone()).unwrap();
        assert_abs_diff_eq!(rho_hat(&reflected).unwrap().value, base, epsilon = 1e-12);
    }

    #[test]
    fn independent_uniforms_give_small_positive_multiples() {
        for seed in 0..5 {
            let ts = sample(seed, 1000, 1, 1, 1);
            let scaled = 1000.0 * rho_hat(&ts).unwrap().value;
            assert!(scaled > 0.0 && scaled < 10.0, "n rho = {scaled}");
        }
    }

    #[test]
    fn thread_count_does_not_change_sums() {
        let ts = sample(21, 700, 2, 2, 2);
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| rho_hat_multi(&ts).unwrap().value)
        };
        assert_eq!(run(1).to_bits(), run(5).to_bits());
    }

    proptest! {
        #[test]
        fn s0_symmetries(a in 0.0f64..=1.0, b in 0.0f64..=1.0) {
            prop_assert!((s0(a, b) - s0(b, a)).abs() < 1e-15);
            prop_assert!((s0(a, b) - s0(1.0 - a, 1.0 - b)).abs() < 1e-14);
        }

        #[test]
        fn row_permutation_invariance(seed in 0u64..500, n in 2usize..30) {
            let ts = sample(seed, n, 1, 1, 1);
            let mut perm: Vec<usize> = (0..n).collect();
            perm.reverse();
            perm.rotate_left(seed as usize % n);
            let pick = |m: &Array2<f64>| Array2::from_shape_fn(m.dim(), |(i, k)| m[[perm[i], k]]);
            let tp = TransformedSample::from_parts(pick(&ts.u), pick(&ts.v), pick(&ts.w)).unwrap();
            prop_assert!((rho_hat(&ts).unwrap().value - rho_hat(&tp).unwrap().value).abs() < 1e-13);
            prop_assert!((rho0_hat(&ts).unwrap().value - rho0_hat(&tp).unwrap().value).abs() < 1e-13);
        }
    }
}
