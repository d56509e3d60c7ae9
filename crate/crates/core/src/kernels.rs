//! Smoothing kernels and rule-of-thumb bandwidths for conditional CDF estimation.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelFamily {
    Gaussian,
    Epanechnikov,
}

impl fmt::Display for KernelFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            KernelFamily::Gaussian => "gaussian",
            KernelFamily::Epanechnikov => "epanechnikov",
        })
    }
}

impl FromStr for KernelFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gaussian" => Ok(KernelFamily::Gaussian),
            "epanechnikov" => Ok(KernelFamily::Epanechnikov),
            other => Err(Error::InvalidArgument(format!("unknown kernel `{other}`"))),
        }
    }
}

/// A symmetric, unit-mass kernel. Only second-order kernels are provided.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub family: KernelFamily,
    pub order_m: u32,
}

impl KernelSpec {
    pub fn new(family: KernelFamily, order_m: u32) -> Result<Self> {
        if order_m != 2 {
            return Err(Error::InvalidArgument(format!(
                "kernel order {order_m} is not available; only order 2 kernels are implemented"
            )));
        }
        Ok(Self { family, order_m })
    }

    pub const fn gaussian() -> Self {
        Self {
            family: KernelFamily::Gaussian,
            order_m: 2,
        }
    }

    pub const fn epanechnikov() -> Self {
        Self {
            family: KernelFamily::Epanechnikov,
            order_m: 2,
        }
    }

    /// Half-width of the support, `None` when unbounded.
    pub fn support(&self) -> Option<f64> {
        match self.family {
            KernelFamily::Gaussian => None,
            KernelFamily::Epanechnikov => Some(1.0),
        }
    }
}

impl Default for KernelSpec {
    fn default() -> Self {
        Self::gaussian()
    }
}

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// K(u).
#[inline]
pub fn kernel_weight(spec: KernelSpec, u: f64) -> f64 {
    match spec.family {
        KernelFamily::Gaussian => INV_SQRT_2PI * (-0.5 * u * u).exp(),
        KernelFamily::Epanechnikov => {
            if u.abs() <= 1.0 {
                0.75 * (1.0 - u * u)
            } else {
                0.0
            }
        }
    }
}

/// Unnormalized kernel shape: `kernel_weight` up to a positive constant.
/// Conditional CDF ratios are invariant to that constant, so the hot loops
/// skip it.
#[inline]
pub(crate) fn kernel_shape(family: KernelFamily, u: f64) -> f64 {
    match family {
        KernelFamily::Gaussian => (-0.5 * u * u).exp(),
        KernelFamily::Epanechnikov => (1.0 - u * u).max(0.0),
    }
}

/// How conditioning bandwidths are chosen: `scale_c` times the rule of thumb,
/// unless `explicit_h` pins a value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandwidthPolicy {
    pub scale_c: f64,
    pub explicit_h: Option<f64>,
}

impl BandwidthPolicy {
    pub fn new(scale_c: f64, explicit_h: Option<f64>) -> Result<Self> {
        if !(scale_c > 0.0 && scale_c.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "bandwidth scale must be positive, got {scale_c}"
            )));
        }
        if let Some(h) = explicit_h {
            if !(h > 0.0 && h.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "bandwidth must be positive, got {h}"
                )));
            }
        }
        Ok(Self { scale_c, explicit_h })
    }

    pub fn scaled(scale_c: f64) -> Result<Self> {
        Self::new(scale_c, None)
    }
}

impl Default for BandwidthPolicy {
    fn default() -> Self {
        Self {
            scale_c: 1.0,
            explicit_h: None,
        }
    }
}

/// `scale_c · 1.06 · sd · n^(-1/(4 + cond_dim))`, or `explicit_h` when set.
pub fn rule_of_thumb_bandwidth(
    column_sd: f64,
    n: usize,
    cond_dim: usize,
    policy: BandwidthPolicy,
) -> Result<f64> {
    if let Some(h) = policy.explicit_h {
        return Ok(h);
    }
    if n < 2 {
        return Err(Error::InsufficientSample { n, min: 2 });
    }
    if cond_dim == 0 {
        return Err(Error::InvalidArgument(
            "bandwidth requested for an empty conditioning set".into(),
        ));
    }
    if !(column_sd > 0.0) {
        return Err(Error::ConstantColumn(String::from("<conditioning>")));
    }
    let rate = -1.0 / (4.0 + cond_dim as f64);
    Ok(policy.scale_c * 1.06 * column_sd * (n as f64).powf(rate))
}

/// Sample standard deviation with the n - 1 denominator.
pub fn sample_sd(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 2 {
        return 0.0;
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    let ss: f64 = xs.iter().map(|x| (x - mean) * (x - mean)).sum();
    (ss / (n - 1) as f64).sqrt()
}
