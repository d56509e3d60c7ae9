//! Simulation models and experiment drivers: size/power tables, bandwidth
//! sweeps, null-distribution studies and random-DAG recovery.

use std::f64::consts::PI;
use std::fmt::{self, Write as _};
use std::str::FromStr;
use std::time::Instant;

use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal, StudentT};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::causal::{pc, tpr_fpr, CiOracle, Dag, OracleKind, PartialCorrelationOracle, RhoOracle};
use crate::citest::{run_test, transform_dataset, TestSpec, DEFAULT_NULL_SEED, DEFAULT_REPS};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::kernels::{BandwidthPolicy, KernelSpec};
use crate::nulldist::{NullCache, NullKey, StatisticKind};
use crate::rng::{derive_seed, stream_rng};
use crate::statistic::{rho0_hat, rho_hat, rho_hat_multi, rho_unconditional};

/// One of the eighteen benchmark models.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct ModelId(u8);

impl ModelId {
    pub const ALL: std::ops::RangeInclusive<u8> = 1..=18;

    pub fn new(id: u8) -> Result<Self> {
        if Self::ALL.contains(&id) {
            Ok(Self(id))
        } else {
            Err(Error::InvalidArgument(format!("model M{id} does not exist (M1..M18)")))
        }
    }

    pub fn number(self) -> u8 {
        self.0
    }

    /// Models in which `x ⫫ y | z` holds.
    pub fn is_null(self) -> bool {
        matches!(self.0, 1 | 7 | 13)
    }

    /// Column names of the x, y and z blocks in generated datasets.
    pub fn blocks(self) -> (Vec<&'static str>, Vec<&'static str>, Vec<&'static str>) {
        match self.0 {
            1..=6 => (vec!["x"], vec!["y"], vec!["z"]),
            7..=12 => (vec!["x"], vec!["y"], vec!["z1", "z2"]),
            _ => (vec!["x1", "x2"], vec!["y1", "y2"], vec!["z1", "z2"]),
        }
    }
}

impl fmt::Display for ModelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "M{}", self.0)
    }
}

impl FromStr for ModelId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let digits = s.trim().trim_start_matches(['M', 'm']);
        let id: u8 = digits
            .parse()
            .map_err(|_| Error::InvalidArgument(format!("cannot parse model id `{s}`")))?;
        Self::new(id)
    }
}

impl TryFrom<String> for ModelId {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<ModelId> for String {
    fn from(m: ModelId) -> String {
        m.to_string()
    }
}

/// Parses `M1,M2,...`.
pub fn parse_models(list: &str) -> Result<Vec<ModelId>> {
    list.split(',').filter(|s| !s.trim().is_empty()).map(str::parse).collect()
}

/// One row of model `id`, as `[x.., y.., z..]` in block order. May be
/// non-finite for rare draws (e.g. a log of a negative argument).
fn model_row(id: u8, rng: &mut impl Rng) -> Vec<f64> {
    let mut normal = || -> f64 { rng.sample(StandardNormal) };
    match id {
        1..=3 => {
            let (a, b, z) = (normal(), normal(), normal());
            let (x, y) = match id {
                1 => (a + z, b + z),
                2 => (a + z, a * a + z),
                _ => (a + z, 0.5 * (PI * a).sin() + z),
            };
            vec![x, y, z]
        }
        4..=6 => {
            let z: f64 = rng.sample(StandardNormal);
            let cauchy = StudentT::new(1.0).expect("valid degrees of freedom");
            let (a, b) = (cauchy.sample(rng), cauchy.sample(rng));
            let (x, y) = match id {
                4 => (a + z, a + b + z),
                5 => ((a * z).abs().sqrt() + z, 0.25 * a * a * b * b + b + z),
                _ => (((a * z).abs() + 1.0).ln() + z, 0.5 * (a * a * z) + b + z),
            };
            vec![x, y, z]
        }
        7..=12 => {
            let (a, b, z1, z2) = (normal(), normal(), normal(), normal());
            let s = z1 + z2;
            let (x, y) = match id {
                7 => (a + s, b + s),
                8 => (a * a + s, (a + 10.0).ln() + s),
                9 => (a.tanh() + s, (a * a + 10.0).ln() + s),
                10 => (a * a + s, (a * z1 + 10.0).ln() + s),
                11 => (a + s, (a * z1).sin() + s),
                _ => ((a * z1 + 10.0).ln() + s, (a * z2).exp() + s),
            };
            vec![x, y, z1, z2]
        }
        _ => {
            let (a, x2, y2, z1, z2) = (normal(), normal(), normal(), normal(), normal());
            let s = z1 + z2;
            let (x1, y1) = match id {
                13 => (a + z1, s),
                14 => ((a * z1 + 100.0).ln() + s, (a * z1).exp() + s),
                15 => ((a * a + 100.0).ln() + s, 0.1 * a.powi(3) + s),
                16 => ((a * z1 + 100.0).ln() + s, 0.5 * a.powi(3) * z1.powi(3) + s),
                17 => (0.1 * a.exp() + s, a.sin() + a.abs() + s),
                _ => (a.tanh() + s, 0.5 * (a * a + 100.0).ln() + 0.5 * x2 + s),
            };
            vec![x1, x2, y1, y2, z1, z2]
        }
    }
}

/// `n` rows of model `id`. Rows with a non-finite value are redrawn.
pub fn gen_model(id: ModelId, n: usize, seed: u64) -> Result<Dataset> {
    if n < 2 {
        return Err(Error::InsufficientSample { n, min: 2 });
    }
    let (xb, yb, zb) = id.blocks();
    let names: Vec<&str> = xb.into_iter().chain(yb).chain(zb).collect();
    let mut cols = vec![Vec::with_capacity(n); names.len()];
    let mut rng = stream_rng(seed, 0);
    let mut filled = 0;
    while filled < n {
        let row = model_row(id.0, &mut rng);
        if row.iter().all(|v| v.is_finite()) {
            for (c, v) in cols.iter_mut().zip(row) {
                c.push(v);
            }
            filled += 1;
        }
    }
    Dataset::continuous(names.into_iter().zip(cols))
}

/// Settings shared by the experiment drivers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchOptions {
    /// Replicates in each null table.
    pub null_reps: usize,
    pub null_seed: u64,
    pub kernel: KernelSpec,
    /// Record wall-clock statistics. Off by default so that reports are
    /// byte-identical across runs.
    pub timing: bool,
}

impl Default for BenchOptions {
    fn default() -> Self {
        Self {
            null_reps: DEFAULT_REPS,
            null_seed: DEFAULT_NULL_SEED,
            kernel: KernelSpec::default(),
            timing: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub wall_seconds: f64,
    pub per_replicate_ms: f64,
}

impl Timing {
    fn since(start: Instant, replicates: usize) -> Self {
        let wall_seconds = start.elapsed().as_secs_f64();
        Self {
            wall_seconds,
            per_replicate_ms: 1e3 * wall_seconds / replicates.max(1) as f64,
        }
    }
}

/// Rejection count of one (model, bandwidth scale, alpha) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub model: ModelId,
    pub bandwidth_scale: f64,
    pub alpha: f64,
    pub rejections: usize,
    pub frequency: f64,
}

/// Output of [`size_power_run`] and [`bandwidth_sweep`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub study: String,
    pub models: Vec<ModelId>,
    pub n: usize,
    pub alphas: Vec<f64>,
    pub bandwidth_scales: Vec<f64>,
    pub reps: usize,
    pub seed: u64,
    pub options: BenchOptions,
    pub rows: Vec<BenchRow>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub timing: Option<Timing>,
}

impl BenchReport {
    pub fn frequency(&self, model: ModelId, bandwidth_scale: f64, alpha: f64) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.model == model && r.bandwidth_scale == bandwidth_scale && r.alpha == alpha)
            .map(|r| r.frequency)
    }

    /// Aligned plain-text table.
    pub fn to_text(&self) -> String {
        let mut out = format!(
            "# {}: n = {}, reps = {}, seed = {}, null reps = {}\n",
            self.study, self.n, self.reps, self.seed, self.options.null_reps
        );
        let _ = writeln!(out, "{:<6} {:>6} {:>6} {:>10} {:>9}", "model", "c", "alpha", "rejections", "frequency");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{:<6} {:>6.2} {:>6.3} {:>10} {:>9.3}",
                r.model.to_string(),
                r.bandwidth_scale,
                r.alpha,
                r.rejections,
                r.frequency
            );
        }
        if let Some(t) = self.timing {
            let _ = writeln!(out, "# wall {:.2} s, {:.2} ms per replicate", t.wall_seconds, t.per_replicate_ms);
        }
        out
    }
}

fn check_alphas(alphas: &[f64]) -> Result<()> {
    if alphas.is_empty() {
        return Err(Error::InvalidArgument("at least one alpha level is required".into()));
    }
    match alphas.iter().find(|a| !(**a > 0.0 && **a < 1.0)) {
        Some(a) => Err(Error::InvalidAlpha(*a)),
        None => Ok(()),
    }
}

fn check_reps(reps: usize) -> Result<()> {
    if reps == 0 {
        Err(Error::InvalidArgument("replicate count must be at least 1".into()))
    } else {
        Ok(())
    }
}

/// Seed of replicate `rep` of model `id`; independent of the bandwidth so
/// that every scale sees the same datasets.
pub fn replicate_seed(seed: u64, id: ModelId, rep: usize) -> u64 {
    derive_seed(seed, &id.to_string(), rep as u64)
}

fn model_spec(id: ModelId, policy: BandwidthPolicy, opts: &BenchOptions) -> TestSpec {
    let (x, y, z) = id.blocks();
    TestSpec::new(x, y, z)
        .kernel(opts.kernel)
        .bandwidth(policy)
        .reps(opts.null_reps)
        .null_seed(opts.null_seed)
}

#[allow(clippy::too_many_arguments)]
fn rejection_study(
    study: &str,
    ids: &[ModelId],
    n: usize,
    alphas: &[f64],
    scales: &[f64],
    reps: usize,
    seed: u64,
    opts: &BenchOptions,
    cache: &NullCache,
) -> Result<BenchReport> {
    check_alphas(alphas)?;
    check_reps(reps)?;
    if ids.is_empty() {
        return Err(Error::InvalidArgument("no models selected".into()));
    }
    let policies = scales
        .iter()
        .map(|&c| BandwidthPolicy::scaled(c))
        .collect::<Result<Vec<_>>>()?;
    let work = (ids.len() * scales.len() * reps) as f64 * (n as f64).powi(2);
    if work > cache.max_work() {
        return Err(Error::Budget {
            work,
            ceiling: cache.max_work(),
        });
    }
    let start = Instant::now();
    let mut rows = Vec::new();
    for &id in ids {
        // warm the table before the parallel loop
        let (x, y, z) = id.blocks();
        cache.get_or_build(model_spec(id, BandwidthPolicy::default(), opts).null_key(n, (x.len(), y.len(), z.len())))?;
        for (&c, &policy) in scales.iter().zip(&policies) {
            let spec = model_spec(id, policy, opts);
            let p_values = (0..reps)
                .into_par_iter()
                .map(|rep| {
                    let s = replicate_seed(seed, id, rep);
                    let data = gen_model(id, n, s)?;
                    Ok(run_test(&data, &spec.clone().seed(s), cache)?.p_value)
                })
                .collect::<Result<Vec<f64>>>()?;
            for &alpha in alphas {
                let rejections = p_values.iter().filter(|p| **p <= alpha).count();
                rows.push(BenchRow {
                    model: id,
                    bandwidth_scale: c,
                    alpha,
                    rejections,
                    frequency: rejections as f64 / reps as f64,
                });
            }
        }
    }
    let timing = opts.timing.then(|| Timing::since(start, ids.len() * scales.len() * reps));
    Ok(BenchReport {
        study: study.to_string(),
        models: ids.to_vec(),
        n,
        alphas: alphas.to_vec(),
        bandwidth_scales: scales.to_vec(),
        reps,
        seed,
        options: opts.clone(),
        rows,
        timing,
    })
}

/// Empirical rejection frequency of the test for each model and level over
/// `reps` independent datasets.
pub fn size_power_run(
    ids: &[ModelId],
    n: usize,
    alphas: &[f64],
    reps: usize,
    seed: u64,
    opts: &BenchOptions,
    cache: &NullCache,
) -> Result<BenchReport> {
    rejection_study("size_power", ids, n, alphas, &[1.0], reps, seed, opts, cache)
}

/// Rejection frequencies with the rule-of-thumb bandwidth multiplied by each
/// of `c_values`. Datasets are shared across scales.
#[allow(clippy::too_many_arguments)]
pub fn bandwidth_sweep(
    ids: &[ModelId],
    n: usize,
    c_values: &[f64],
    alphas: &[f64],
    reps: usize,
    seed: u64,
    opts: &BenchOptions,
    cache: &NullCache,
) -> Result<BenchReport> {
    if c_values.is_empty() {
        return Err(Error::InvalidArgument("no bandwidth scales given".into()));
    }
    rejection_study("bandwidth_sweep", ids, n, alphas, c_values, reps, seed, opts, cache)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Noise {
    Normal,
    /// Uniform on (-1, 1).
    Uniform,
}

impl FromStr for Noise {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "normal" => Ok(Noise::Normal),
            "uniform" => Ok(Noise::Uniform),
            _ => Err(Error::InvalidArgument(format!("unknown noise `{s}` (normal or uniform)"))),
        }
    }
}

/// Random linear DAG on `x1..xp` with edges only from lower to higher index,
/// each present with probability `edge_prob` and weighted U(0.1, 1), plus
/// `n` rows of data generated from it.
pub fn random_dag_instance(p: usize, edge_prob: f64, n: usize, noise: Noise, seed: u64) -> Result<(Dag, Dataset)> {
    if p < 2 {
        return Err(Error::InvalidArgument(format!("a DAG needs at least 2 nodes, got {p}")));
    }
    if !(0.0..=1.0).contains(&edge_prob) {
        return Err(Error::InvalidArgument(format!("edge probability {edge_prob} outside [0, 1]")));
    }
    let mut rng = stream_rng(seed, 0);
    let mut edges = Vec::new();
    let mut weights = Vec::new();
    for a in 0..p {
        for b in a + 1..p {
            if rng.random::<f64>() < edge_prob {
                edges.push((a, b));
                weights.push(rng.random_range(0.1..1.0));
            }
        }
    }
    let mut rng = stream_rng(seed, 1);
    let mut cols = vec![Vec::with_capacity(n); p];
    let mut row = vec![0.0; p];
    for _ in 0..n {
        for j in 0..p {
            let eps = match noise {
                Noise::Normal => rng.sample(StandardNormal),
                Noise::Uniform => rng.random_range(-1.0..1.0),
            };
            let parents: f64 = edges
                .iter()
                .zip(&weights)
                .filter(|((_, to), _)| *to == j)
                .map(|((from, _), w)| w * row[*from])
                .sum();
            row[j] = parents + eps;
        }
        for (c, v) in cols.iter_mut().zip(&row) {
            c.push(*v);
        }
    }
    let names: Vec<String> = (1..=p).map(|i| format!("x{i}")).collect();
    let data = Dataset::continuous(names.iter().cloned().zip(cols))?;
    Ok((
        Dag {
            node_names: names,
            edges,
            weights,
        },
        data,
    ))
}

/// Configuration of the random-DAG recovery study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DagStudyConfig {
    pub nodes: usize,
    pub edge_prob: f64,
    pub n: usize,
    pub noise: Noise,
    pub reps: usize,
    pub alpha: f64,
    pub max_depth: usize,
    pub oracle: OracleKind,
    pub seed: u64,
    /// Re-run every replicate with reversed column order and record whether
    /// the skeleton matched.
    pub check_order: bool,
}

impl Default for DagStudyConfig {
    fn default() -> Self {
        Self {
            nodes: 5,
            edge_prob: 0.4,
            n: 200,
            noise: Noise::Normal,
            reps: 100,
            alpha: 0.05,
            max_depth: 3,
            oracle: OracleKind::Rho,
            seed: 0,
            check_order: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DagReplicate {
    pub seed: u64,
    pub true_edges: usize,
    pub estimated_edges: usize,
    pub tpr: f64,
    pub fpr: f64,
    pub acyclic: bool,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub order_independent: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DagStudyReport {
    pub config: DagStudyConfig,
    pub options: BenchOptions,
    pub mean_tpr: f64,
    pub mean_fpr: f64,
    pub replicates: Vec<DagReplicate>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub timing: Option<Timing>,
}

impl DagStudyReport {
    pub fn to_text(&self) -> String {
        let c = &self.config;
        let mut out = format!(
            "# dag_study: {} nodes, edge prob {}, n = {}, reps = {}, alpha = {}, test = {:?}, seed = {}\n",
            c.nodes, c.edge_prob, c.n, c.reps, c.alpha, c.oracle, c.seed
        );
        let _ = writeln!(out, "mean TPR {:.3}", self.mean_tpr);
        let _ = writeln!(out, "mean FPR {:.3}", self.mean_fpr);
        let cyclic = self.replicates.iter().filter(|r| !r.acyclic).count();
        let _ = writeln!(out, "replicates with a directed cycle: {cyclic}");
        let order_fail = self.replicates.iter().filter(|r| r.order_independent == Some(false)).count();
        if c.check_order {
            let _ = writeln!(out, "replicates changed by column order: {order_fail}");
        }
        if let Some(t) = self.timing {
            let _ = writeln!(out, "# wall {:.2} s, {:.2} ms per replicate", t.wall_seconds, t.per_replicate_ms);
        }
        out
    }
}

/// Skeleton TPR/FPR of PC over random DAG instances.
pub fn dag_study(config: &DagStudyConfig, opts: &BenchOptions, cache: &NullCache) -> Result<DagStudyReport> {
    check_reps(config.reps)?;
    let base = TestSpec::new(["x"], ["y"], ["z"])
        .alpha(config.alpha)
        .kernel(opts.kernel)
        .reps(opts.null_reps)
        .null_seed(opts.null_seed);
    let rho = RhoOracle::new(base.clone(), cache);
    let oracle: &dyn CiOracle = match config.oracle {
        OracleKind::Rho => &rho,
        OracleKind::Pcor => &PartialCorrelationOracle,
    };
    if config.oracle == OracleKind::Rho {
        for depth in 0..=config.max_depth.min(config.nodes.saturating_sub(2)) {
            cache.get_or_build(base.null_key(config.n, (1, 1, depth)))?;
        }
    }
    let start = Instant::now();
    let replicates = (0..config.reps)
        .into_par_iter()
        .map(|rep| {
            let s = derive_seed(config.seed, "dag", rep as u64);
            let (truth, data) = random_dag_instance(config.nodes, config.edge_prob, config.n, config.noise, s)?;
            let g = pc(&data, config.alpha, config.max_depth, oracle)?;
            let (tpr, fpr) = tpr_fpr(&g, &truth)?;
            let order_independent = if config.check_order {
                let reversed: Vec<usize> = (0..config.nodes).rev().collect();
                let h = pc(&data.select_columns(&reversed), config.alpha, config.max_depth, oracle)?;
                Some(h.skeleton_named() == g.skeleton_named())
            } else {
                None
            };
            Ok(DagReplicate {
                seed: s,
                true_edges: truth.edges.len(),
                estimated_edges: g.n_edges(),
                tpr,
                fpr,
                acyclic: !g.has_cycle(),
                order_independent,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let k = replicates.len() as f64;
    Ok(DagStudyReport {
        config: config.clone(),
        options: opts.clone(),
        mean_tpr: replicates.iter().map(|r| r.tpr).sum::<f64>() / k,
        mean_fpr: replicates.iter().map(|r| r.fpr).sum::<f64>() / k,
        replicates,
        timing: opts.timing.then(|| Timing::since(start, config.reps)),
    })
}

/// Distribution of the ingredients in the null study.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ingredient {
    Normal,
    Uniform,
    Exponential,
}

impl Ingredient {
    pub const ALL: [Ingredient; 3] = [Ingredient::Normal, Ingredient::Uniform, Ingredient::Exponential];

    fn draw(self, rng: &mut impl Rng) -> f64 {
        match self {
            Ingredient::Normal => rng.sample(StandardNormal),
            Ingredient::Uniform => rng.random(),
            Ingredient::Exponential => rng.sample(Exp1),
        }
    }
}

impl FromStr for Ingredient {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "normal" => Ok(Ingredient::Normal),
            "uniform" => Ok(Ingredient::Uniform),
            "exponential" => Ok(Ingredient::Exponential),
            _ => Err(Error::InvalidArgument(format!(
                "unknown ingredient `{s}` (normal, uniform or exponential)"
            ))),
        }
    }
}

/// `n` times the statistic of `kind` over `reps` null datasets
/// `X = a + z, Y = b + z` with `a, b, z` drawn from `ingredient`. The
/// unconditional kind uses `X = a, Y = b` and no `z`.
pub fn null_distribution_study(
    n: usize,
    reps: usize,
    ingredient: Ingredient,
    kind: StatisticKind,
    policy: BandwidthPolicy,
    seed: u64,
) -> Result<Vec<f64>> {
    check_reps(reps)?;
    let conditional = kind != StatisticKind::RhoUnconditional;
    let spec = if conditional {
        TestSpec::new(["x"], ["y"], ["z"])
    } else {
        TestSpec::new(["x"], ["y"], [])
    }
    .bandwidth(policy)
    .min_n(2);
    (0..reps)
        .into_par_iter()
        .map(|rep| {
            let mut rng = stream_rng(derive_seed(seed, ingredient_tag(ingredient), rep as u64), 0);
            let mut cols = vec![Vec::with_capacity(n); 3];
            for _ in 0..n {
                let (a, b, z) = (ingredient.draw(&mut rng), ingredient.draw(&mut rng), ingredient.draw(&mut rng));
                let z = if conditional { z } else { 0.0 };
                cols[0].push(a + z);
                cols[1].push(b + z);
                cols[2].push(z);
            }
            let [x, y, z]: [Vec<f64>; 3] = cols.try_into().expect("three columns");
            let data = if conditional {
                Dataset::continuous([("x", x), ("y", y), ("z", z)])?
            } else {
                Dataset::continuous([("x", x), ("y", y)])?
            };
            let (ts, _) = transform_dataset(&data, &spec)?;
            let stat = match kind {
                StatisticKind::RhoNormalized => rho_hat(&ts)?,
                StatisticKind::Rho0Normalized => rho0_hat(&ts)?,
                StatisticKind::RhoMultiUnnormalized => rho_hat_multi(&ts)?,
                StatisticKind::RhoUnconditional => rho_unconditional(&ts)?,
            };
            Ok(n as f64 * stat.value)
        })
        .collect()
}

fn ingredient_tag(ingredient: Ingredient) -> &'static str {
    match ingredient {
        Ingredient::Normal => "null-normal",
        Ingredient::Uniform => "null-uniform",
        Ingredient::Exponential => "null-exponential",
    }
}

/// `n` times the simulated reference null statistic of `kind` (p = q = 1,
/// r = 1 except for the unconditional kind).
pub fn null_reference(n: usize, reps: usize, kind: StatisticKind, seed: u64, cache: &NullCache) -> Result<Vec<f64>> {
    let r = usize::from(kind != StatisticKind::RhoUnconditional);
    let table = cache.get_or_build(NullKey::new(n, (1, 1, r), reps, seed, kind))?;
    Ok(table.stats.iter().map(|s| n as f64 * s).collect())
}

/// Summary of [`null_distribution_study`] samples against the reference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NullStudyRow {
    pub ingredient: Ingredient,
    pub ks_distance: f64,
    pub mean: f64,
    pub q95: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NullStudyReport {
    pub n: usize,
    pub reps: usize,
    pub statistic_kind: StatisticKind,
    pub bandwidth_scale: f64,
    pub seed: u64,
    pub reference_reps: usize,
    pub reference_seed: u64,
    pub reference_mean: f64,
    pub reference_q95: f64,
    pub rows: Vec<NullStudyRow>,
}

impl NullStudyReport {
    pub fn to_text(&self) -> String {
        let mut out = format!(
            "# null_study: {}, n = {}, reps = {}, c = {}, seed = {}, reference reps = {}\n",
            self.statistic_kind, self.n, self.reps, self.bandwidth_scale, self.seed, self.reference_reps
        );
        let _ = writeln!(out, "{:<12} {:>8} {:>8} {:>8}", "ingredient", "ks", "mean", "q95");
        let _ = writeln!(
            out,
            "{:<12} {:>8} {:>8.3} {:>8.3}",
            "reference", "-", self.reference_mean, self.reference_q95
        );
        for r in &self.rows {
            let name = format!("{:?}", r.ingredient).to_lowercase();
            let _ = writeln!(out, "{name:<12} {:>8.4} {:>8.3} {:>8.3}", r.ks_distance, r.mean, r.q95);
        }
        out
    }
}

fn mean_q95(xs: &[f64]) -> (f64, f64) {
    let mut s = xs.to_vec();
    s.sort_by(f64::total_cmp);
    let k = ((0.95 * s.len() as f64).ceil() as usize).clamp(1, s.len());
    (s.iter().sum::<f64>() / s.len() as f64, s[k - 1])
}

/// Runs [`null_distribution_study`] for each ingredient and compares it with
/// a `reference_reps`-replicate reference sample by KS distance.
#[allow(clippy::too_many_arguments)]
pub fn null_study(
    n: usize,
    reps: usize,
    ingredients: &[Ingredient],
    kind: StatisticKind,
    bandwidth_scale: f64,
    seed: u64,
    reference_reps: usize,
    cache: &NullCache,
) -> Result<NullStudyReport> {
    check_reps(reference_reps)?;
    let policy = BandwidthPolicy::scaled(bandwidth_scale)?;
    let reference_seed = derive_seed(seed, "reference", 0);
    let reference = null_reference(n, reference_reps, kind, reference_seed, cache)?;
    let (reference_mean, reference_q95) = mean_q95(&reference);
    let rows = ingredients
        .iter()
        .map(|&ingredient| {
            let sample = null_distribution_study(n, reps, ingredient, kind, policy, seed)?;
            let (mean, q95) = mean_q95(&sample);
            Ok(NullStudyRow {
                ingredient,
                ks_distance: ks_distance(&sample, &reference),
                mean,
                q95,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(NullStudyReport {
        n,
        reps,
        statistic_kind: kind,
        bandwidth_scale,
        seed,
        reference_reps,
        reference_seed,
        reference_mean,
        reference_q95,
        rows,
    })
}

/// Two-sample Kolmogorov-Smirnov distance.
pub fn ks_distance(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < a.len() && j < b.len() {
        let t = a[i].min(b[j]);
        while i < a.len() && a[i] <= t {
            i += 1;
        }
        while j < b.len() && b[j] <= t {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}
