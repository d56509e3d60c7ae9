//! End-to-end conditional (and unconditional) independence tests.

use std::collections::HashSet;

use log::warn;
use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::data::{ColumnKind, Dataset};
use crate::error::{Error, Result};
use crate::kernels::{sample_sd, BandwidthPolicy, KernelSpec};
use crate::nulldist::{critical_value, p_value, NullCache, NullKey, StatisticKind};
use crate::statistic::{rho_hat, rho_hat_multi, rho_unconditional, StatisticValue};
use crate::transforms::{discrete_chain, rosenblatt_chain, tie_fraction, TransformMeta, TransformedSample, TIE_WARN_FRACTION};

/// Seed of the calibration tables unless a test overrides it.
pub const DEFAULT_NULL_SEED: u64 = 0x00c1_7e57;
pub const DEFAULT_REPS: usize = 1000;
pub const DEFAULT_MIN_N: usize = 20;
pub const DEFAULT_REPORT_ALPHAS: [f64; 2] = [0.05, 0.10];

/// Configuration of one test of `x ⫫ y | z`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestSpec {
    pub x_cols: Vec<String>,
    pub y_cols: Vec<String>,
    /// Empty for the unconditional test.
    pub z_cols: Vec<String>,
    pub alpha: f64,
    /// Levels at which critical values are reported besides `alpha`.
    pub report_alphas: Vec<f64>,
    pub kernel: KernelSpec,
    pub bandwidth: BandwidthPolicy,
    /// Monte-Carlo replicates in the null table.
    pub reps: usize,
    /// Seed of the randomized transform for discrete data.
    pub seed: u64,
    /// Seed of the null table.
    pub null_seed: u64,
    pub min_n: usize,
}

impl TestSpec {
    pub fn new<S: Into<String>>(
        x: impl IntoIterator<Item = S>,
        y: impl IntoIterator<Item = S>,
        z: impl IntoIterator<Item = S>,
    ) -> Self {
        Self {
            x_cols: x.into_iter().map(Into::into).collect(),
            y_cols: y.into_iter().map(Into::into).collect(),
            z_cols: z.into_iter().map(Into::into).collect(),
            alpha: 0.05,
            report_alphas: DEFAULT_REPORT_ALPHAS.to_vec(),
            kernel: KernelSpec::default(),
            bandwidth: BandwidthPolicy::default(),
            reps: DEFAULT_REPS,
            seed: 0,
            null_seed: DEFAULT_NULL_SEED,
            min_n: DEFAULT_MIN_N,
        }
    }

    pub fn alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self
    }

    pub fn kernel(mut self, kernel: KernelSpec) -> Self {
        self.kernel = kernel;
        self
    }

    pub fn bandwidth(mut self, policy: BandwidthPolicy) -> Self {
        self.bandwidth = policy;
        self
    }

    pub fn reps(mut self, reps: usize) -> Self {
        self.reps = reps;
        self
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn null_seed(mut self, seed: u64) -> Self {
        self.null_seed = seed;
        self
    }

    pub fn min_n(mut self, min_n: usize) -> Self {
        self.min_n = min_n;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.x_cols.is_empty() || self.y_cols.is_empty() {
            return Err(Error::InvalidArgument("x and y selections must be nonempty".into()));
        }
        let mut seen = HashSet::new();
        for c in self.x_cols.iter().chain(&self.y_cols).chain(&self.z_cols) {
            if !seen.insert(c.as_str()) {
                return Err(Error::InvalidArgument(format!(
                    "column `{c}` appears in more than one role"
                )));
            }
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidAlpha(self.alpha));
        }
        if let Some(a) = self.report_alphas.iter().find(|a| !(**a > 0.0 && **a < 1.0)) {
            return Err(Error::InvalidAlpha(*a));
        }
        if self.reps == 0 {
            return Err(Error::InvalidArgument("replicate count must be at least 1".into()));
        }
        Ok(())
    }

    /// Null table key a test on `n` rows with these dimensions uses.
    pub fn null_key(&self, n: usize, dims: (usize, usize, usize)) -> NullKey {
        NullKey::new(n, dims, self.reps, self.null_seed, StatisticKind::for_dims(dims))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticalValue {
    pub alpha: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub statistic: StatisticValue,
    pub statistic_kind: StatisticKind,
    pub p_value: f64,
    pub alpha: f64,
    pub critical_values: Vec<CriticalValue>,
    pub reject: bool,
    pub n: usize,
    pub data_kind: ColumnKind,
    pub x_cols: Vec<String>,
    pub y_cols: Vec<String>,
    pub z_cols: Vec<String>,
    pub kernel: KernelSpec,
    pub bandwidth_policy: BandwidthPolicy,
    pub bandwidths: TransformMeta,
    pub reps: usize,
    pub seed_used: u64,
    pub null_seed: u64,
}

fn indices(data: &Dataset, cols: &[String]) -> Result<Vec<usize>> {
    cols.iter().map(|c| data.index_of(c)).collect()
}

/// Checks that every selected column has the same kind and returns it.
fn common_kind(data: &Dataset, idx: &[usize]) -> Result<ColumnKind> {
    let kinds: HashSet<ColumnKind> = idx.iter().map(|&i| data.kind(i)).collect();
    if kinds.len() > 1 {
        let desc = idx
            .iter()
            .map(|&i| format!("{}: {:?}", data.names()[i], data.kind(i)).to_lowercase())
            .collect::<Vec<_>>()
            .join(", ");
        return Err(Error::MixedKinds(desc));
    }
    Ok(kinds.into_iter().next().unwrap_or(ColumnKind::Continuous))
}

/// Maps the selected columns of `data` to (U, V, W).
pub fn transform_dataset(data: &Dataset, spec: &TestSpec) -> Result<(TransformedSample, ColumnKind)> {
    spec.validate()?;
    let xi = indices(data, &spec.x_cols)?;
    let yi = indices(data, &spec.y_cols)?;
    let zi = indices(data, &spec.z_cols)?;
    let n = data.n();
    let floor = spec.min_n.max(2);
    if n < floor {
        return Err(Error::InsufficientSample { n, min: floor });
    }
    let all: Vec<usize> = xi.iter().chain(&yi).chain(&zi).copied().collect();
    let kind = common_kind(data, &all)?;

    let (x, y, z) = (data.matrix(&xi), data.matrix(&yi), data.matrix(&zi));
    let (p, q) = (xi.len(), yi.len());
    let mut meta = TransformMeta::default();
    let (u, v, w) = match kind {
        ColumnKind::Continuous => {
            // conditioning columns need spread for a bandwidth
            let conditioning = zi.iter().chain(&xi[..p - 1]).chain(&yi[..q - 1]);
            for &c in conditioning {
                if sample_sd(data.column(c)) == 0.0 {
                    return Err(Error::ConstantColumn(data.names()[c].clone()));
                }
            }
            for &c in &all {
                let ties = tie_fraction(data.column(c));
                if ties > TIE_WARN_FRACTION {
                    warn!(
                        "column `{}` has {:.1}% tied pairs; the test assumes continuous data",
                        data.names()[c],
                        100.0 * ties
                    );
                }
            }
            let (u, su) = rosenblatt_chain(x.view(), z.view(), spec.bandwidth, spec.kernel)?;
            let (v, sv) = rosenblatt_chain(y.view(), z.view(), spec.bandwidth, spec.kernel)?;
            let (w, sw) = if zi.is_empty() {
                (Array2::zeros((n, 0)), Vec::new())
            } else {
                let none = Array2::<f64>::zeros((n, 0));
                rosenblatt_chain(z.view(), none.view(), spec.bandwidth, spec.kernel)?
            };
            meta.u = su;
            meta.v = sv;
            meta.w = sw;
            (u, v, w)
        }
        ColumnKind::Discrete => {
            let none = Array2::<f64>::zeros((n, 0));
            let u = discrete_chain(x.view(), z.view(), spec.seed, 0)?;
            let v = discrete_chain(y.view(), z.view(), spec.seed, p as u64)?;
            let w = if zi.is_empty() {
                Array2::zeros((n, 0))
            } else {
                discrete_chain(z.view(), none.view(), spec.seed, (p + q) as u64)?
            };
            meta.seed = Some(spec.seed);
            (u, v, w)
        }
    };
    let mut ts = TransformedSample::from_parts(u, v, w)?;
    ts.meta = meta;
    Ok((ts, kind))
}

/// Runs the test of `x ⫫ y | z` described by `spec`. An empty `z_cols`
/// selects the unconditional test.
pub fn run_test(data: &Dataset, spec: &TestSpec, cache: &NullCache) -> Result<TestResult> {
    let (ts, data_kind) = transform_dataset(data, spec)?;
    let dims = ts.dims();
    let statistic = match dims {
        (1, 1, 1) => rho_hat(&ts)?,
        (_, _, 0) => rho_unconditional(&ts)?,
        _ => rho_hat_multi(&ts)?,
    };
    let key = spec.null_key(ts.n(), dims);
    let table = cache.get_or_build(key)?;
    let p = p_value(&table, statistic.value);

    let mut alphas = vec![spec.alpha];
    alphas.extend(spec.report_alphas.iter().copied().filter(|a| *a != spec.alpha));
    alphas.sort_by(f64::total_cmp);
    let critical_values = alphas
        .into_iter()
        .map(|alpha| Ok(CriticalValue { alpha, value: critical_value(&table, alpha)? }))
        .collect::<Result<Vec<_>>>()?;

    Ok(TestResult {
        statistic,
        statistic_kind: key.kind,
        p_value: p,
        alpha: spec.alpha,
        critical_values,
        reject: p <= spec.alpha,
        n: ts.n(),
        data_kind,
        x_cols: spec.x_cols.clone(),
        y_cols: spec.y_cols.clone(),
        z_cols: spec.z_cols.clone(),
        kernel: spec.kernel,
        bandwidth_policy: spec.bandwidth,
        bandwidths: ts.meta,
        reps: spec.reps,
        seed_used: spec.seed,
        null_seed: spec.null_seed,
    })
}

/// Test of `x ⫫ y` with no conditioning set; `spec.z_cols` is ignored.
pub fn run_unconditional_test(
    data: &Dataset,
    x_cols: &[String],
    y_cols: &[String],
    spec: &TestSpec,
    cache: &NullCache,
) -> Result<TestResult> {
    let spec = TestSpec {
        x_cols: x_cols.to_vec(),
        y_cols: y_cols.to_vec(),
        z_cols: Vec::new(),
        ..spec.clone()
    };
    run_test(data, &spec, cache)
}
