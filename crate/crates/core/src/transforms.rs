//! Rosenblatt-type transforms onto the unit cube.
//!
//! Continuous blocks are mapped coordinate by coordinate through estimated
//! conditional CDFs (kernel-weighted indicator ratios, leave-in). Discrete
//! blocks use the randomized probability integral transform within each
//! conditioning level.

use std::collections::HashMap;

use ndarray::{Array2, ArrayView2, Axis};
use rand::Rng;
use rand_distr::Open01;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{kernel_shape, rule_of_thumb_bandwidth, sample_sd, BandwidthPolicy, KernelFamily, KernelSpec};
use crate::rng::stream_rng;

/// Fraction of tied pairs above which a continuous column draws a warning.
pub const TIE_WARN_FRACTION: f64 = 0.01;

/// Bandwidths used at one stage of a chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageBandwidths {
    /// 1-based coordinate within the block.
    pub stage: usize,
    pub cond_dim: usize,
    /// One per conditioning coordinate; empty when the stage is a plain ECDF
    /// or a discrete transform.
    pub bandwidths: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TransformMeta {
    pub u: Vec<StageBandwidths>,
    pub v: Vec<StageBandwidths>,
    pub w: Vec<StageBandwidths>,
    /// Seed of the randomized transform, when one was used.
    pub seed: Option<u64>,
}

/// Per-observation coordinates on [0, 1]: `u` is n × p, `v` is n × q and `w`
/// is n × r (r = 0 for the unconditional variant).
#[derive(Debug, Clone, PartialEq)]
pub struct TransformedSample {
    pub u: Array2<f64>,
    pub v: Array2<f64>,
    pub w: Array2<f64>,
    pub meta: TransformMeta,
}

impl TransformedSample {
    /// Wraps already-transformed coordinates, checking shapes and range.
    pub fn from_parts(u: Array2<f64>, v: Array2<f64>, w: Array2<f64>) -> Result<Self> {
        let n = u.nrows();
        if v.nrows() != n || w.nrows() != n {
            return Err(Error::DimensionMismatch(format!(
                "row counts u = {n}, v = {}, w = {}",
                v.nrows(),
                w.nrows()
            )));
        }
        if u.ncols() == 0 || v.ncols() == 0 {
            return Err(Error::DimensionMismatch("u and v need at least one column".into()));
        }
        for m in [&u, &v, &w] {
            if m.iter().any(|x| !(0.0..=1.0).contains(x)) {
                return Err(Error::InvalidArgument(
                    "transformed coordinates must lie in [0, 1]".into(),
                ));
            }
        }
        Ok(Self {
            u,
            v,
            w,
            meta: TransformMeta::default(),
        })
    }

    pub fn n(&self) -> usize {
        self.u.nrows()
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.u.ncols(), self.v.ncols(), self.w.ncols())
    }
}

/// `#{j : z_j <= z_i} / n` for every i. Ties share the upper rank.
pub fn ecdf_transform(z: &[f64]) -> Vec<f64> {
    let n = z.len();
    let mut sorted = z.to_vec();
    sorted.sort_by(f64::total_cmp);
    let nf = n as f64;
    z.iter()
        .map(|zi| sorted.partition_point(|s| s <= zi) as f64 / nf)
        .collect()
}

/// Fraction of the n(n-1)/2 pairs that are exactly tied.
pub fn tie_fraction(col: &[f64]) -> f64 {
    let n = col.len();
    if n < 2 {
        return 0.0;
    }
    let mut sorted = col.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut tied = 0usize;
    let mut run = 1usize;
    for k in 1..=n {
        if k < n && sorted[k] == sorted[k - 1] {
            run += 1;
        } else {
            tied += run * (run - 1) / 2;
            run = 1;
        }
    }
    tied as f64 / (n * (n - 1) / 2) as f64
}

/// Kernel estimate of `F(x_i | z_i)` at every sample point:
/// `sum_j w_ij 1(x_j <= x_i) / sum_j w_ij` with product-kernel weights
/// `w_ij = prod_k K((z_jk - z_ik) / h_k)`.
pub fn kernel_cond_cdf(x: &[f64], z: ArrayView2<f64>, h: &[f64], spec: KernelSpec) -> Result<Vec<f64>> {
    let n = x.len();
    if z.nrows() != n {
        return Err(Error::DimensionMismatch(format!(
            "x has {n} rows, conditioning block has {}",
            z.nrows()
        )));
    }
    if h.len() != z.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "{} bandwidths for {} conditioning columns",
            h.len(),
            z.ncols()
        )));
    }
    if let Some(bad) = h.iter().find(|h| !(**h > 0.0 && h.is_finite())) {
        return Err(Error::InvalidArgument(format!("bandwidth must be positive, got {bad}")));
    }
    let d = z.ncols();
    // Row-major copy scaled by 1/h so the inner loop works on unit bandwidths.
    let scaled: Vec<f64> = (0..n)
        .flat_map(|i| (0..d).map(move |k| (i, k)))
        .map(|(i, k)| z[[i, k]] / h[k])
        .collect();
    let family = spec.family;

    (0..n)
        .into_par_iter()
        .map(|i| {
            let zi = &scaled[i * d..(i + 1) * d];
            let xi = x[i];
            let mut num = 0.0;
            let mut den = 0.0;
            for j in 0..n {
                let zj = &scaled[j * d..(j + 1) * d];
                let w = match family {
                    KernelFamily::Gaussian => {
                        let sq: f64 = zi.iter().zip(zj).map(|(a, b)| (a - b) * (a - b)).sum();
                        (-0.5 * sq).exp()
                    }
                    KernelFamily::Epanechnikov => {
                        let mut w = 1.0;
                        for (a, b) in zi.iter().zip(zj) {
                            w *= kernel_shape(family, a - b);
                            if w == 0.0 {
                                break;
                            }
                        }
                        w
                    }
                };
                den += w;
                if x[j] <= xi {
                    num += w;
                }
            }
            if den > 0.0 {
                Ok((num / den).min(1.0))
            } else {
                Err(Error::IsolatedPoint { row: i })
            }
        })
        .collect()
}

/// Sequential (Rosenblatt) transform of `block` given `cond`.
///
/// Column k of the result estimates `F(block_k | cond, block_1..block_{k-1})`.
/// With an empty conditioning set the first column is the plain ECDF.
/// Bandwidths follow `policy` per conditioning coordinate with the stage's
/// conditioning dimension.
pub fn rosenblatt_chain(
    block: ArrayView2<f64>,
    cond: ArrayView2<f64>,
    policy: BandwidthPolicy,
    spec: KernelSpec,
) -> Result<(Array2<f64>, Vec<StageBandwidths>)> {
    let n = block.nrows();
    if cond.nrows() != n {
        return Err(Error::DimensionMismatch(format!(
            "block has {n} rows, conditioning block has {}",
            cond.nrows()
        )));
    }
    let p = block.ncols();
    if p == 0 {
        return Err(Error::DimensionMismatch("empty block".into()));
    }
    let r = cond.ncols();
    let mut out = Array2::zeros((n, p));
    let mut stages = Vec::with_capacity(p);
    let mut sds: Vec<f64> = cond.axis_iter(Axis(1)).map(|c| sample_sd(&c.to_vec())).collect();

    for k in 0..p {
        let target = block.column(k).to_vec();
        let cond_dim = r + k;
        let col = if cond_dim == 0 {
            stages.push(StageBandwidths {
                stage: k + 1,
                cond_dim,
                bandwidths: Vec::new(),
            });
            ecdf_transform(&target)
        } else {
            let h = sds
                .iter()
                .enumerate()
                .map(|(c, &sd)| {
                    rule_of_thumb_bandwidth(sd, n, cond_dim, policy).map_err(|e| match e {
                        Error::ConstantColumn(_) => {
                            Error::ConstantColumn(format!("conditioning column {}", c + 1))
                        }
                        other => other,
                    })
                })
                .collect::<Result<Vec<_>>>()
                .map_err(|e| e.at_stage(k + 1))?;
            let mut z = Array2::zeros((n, cond_dim));
            z.slice_mut(ndarray::s![.., ..r]).assign(&cond);
            z.slice_mut(ndarray::s![.., r..]).assign(&block.slice(ndarray::s![.., ..k]));
            let col = kernel_cond_cdf(&target, z.view(), &h, spec).map_err(|e| e.at_stage(k + 1))?;
            stages.push(StageBandwidths {
                stage: k + 1,
                cond_dim,
                bandwidths: h,
            });
            col
        };
        out.column_mut(k).assign(&ndarray::Array1::from(col));
        sds.push(sample_sd(&target));
    }
    Ok((out, stages))
}

/// Canonical bit pattern of a level value (`-0.0` folds onto `0.0`).
fn level_bits(v: f64) -> u64 {
    if v == 0.0 {
        0
    } else {
        v.to_bits()
    }
}

/// Randomized probability integral transform of discrete `x` within the
/// levels of `cond` (rows with identical conditioning tuples form one level;
/// an empty `cond` is a single level):
/// `U = (1 - e) F(x-) + e F(x)` with `e ~ U(0,1)` drawn per row from stream
/// `stream` of `seed`.
pub fn discrete_randomized_pit(x: &[f64], cond: ArrayView2<f64>, seed: u64, stream: u64) -> Result<Vec<f64>> {
    let n = x.len();
    if cond.nrows() != n {
        return Err(Error::DimensionMismatch(format!(
            "x has {n} rows, conditioning block has {}",
            cond.nrows()
        )));
    }
    let mut rng = stream_rng(seed, stream);
    let jitter: Vec<f64> = (0..n).map(|_| rng.sample(Open01)).collect();

    let mut levels: HashMap<Vec<u64>, Vec<usize>> = HashMap::new();
    for (i, row) in cond.axis_iter(Axis(0)).enumerate() {
        let key = row.iter().map(|v| level_bits(*v)).collect();
        levels.entry(key).or_default().push(i);
    }

    let mut out = vec![0.0; n];
    for rows in levels.values() {
        let m = rows.len() as f64;
        let mut vals: Vec<f64> = rows.iter().map(|&i| x[i]).collect();
        vals.sort_by(f64::total_cmp);
        for &i in rows {
            let below = vals.partition_point(|v| *v < x[i]) as f64 / m;
            let at_or_below = vals.partition_point(|v| *v <= x[i]) as f64 / m;
            out[i] = (1.0 - jitter[i]) * below + jitter[i] * at_or_below;
        }
    }
    Ok(out)
}

/// Randomized chain for a discrete block: column k is the randomized PIT of
/// `block_k` within the levels of `(cond, block_1..block_{k-1})`. Column k
/// draws from stream `stream_base + k`.
pub fn discrete_chain(block: ArrayView2<f64>, cond: ArrayView2<f64>, seed: u64, stream_base: u64) -> Result<Array2<f64>> {
    let n = block.nrows();
    let p = block.ncols();
    let r = cond.ncols();
    let mut out = Array2::zeros((n, p));
    for k in 0..p {
        let mut z = Array2::zeros((n, r + k));
        z.slice_mut(ndarray::s![.., ..r]).assign(&cond);
        z.slice_mut(ndarray::s![.., r..]).assign(&block.slice(ndarray::s![.., ..k]));
        let col = discrete_randomized_pit(&block.column(k).to_vec(), z.view(), seed, stream_base + k as u64)
            .map_err(|e| e.at_stage(k + 1))?;
        out.column_mut(k).assign(&ndarray::Array1::from(col));
    }
    Ok(out)
}
