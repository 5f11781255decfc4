//! Parameter sweeps over `(alpha, lambda)` with replicates, router
//! comparison, and CSV / heatmap output.
//!
//! Cells are independent simulations and run on a bounded worker pool; the
//! returned cells are always in canonical order (alpha, lambda, replicate,
//! router) so output files do not depend on scheduling.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{run, SimConfig};
use crate::metrics::{
    self, find_lambda_hat, run_metrics, Capacity, LambdaHat, MetricsError, RunMetrics, DELAY_CAP,
};
use crate::netgraph::Network;
use crate::routing::{CoverageParams, RouterKind, RoutingError};

/// `alpha` column value for routers that have no alpha.
pub const NOT_APPLICABLE: &str = "NA";

/// CSV column order.
pub const CSV_HEADER: [&str; 12] = [
    "topology",
    "router",
    "alpha",
    "lambda",
    "replicate",
    "seed",
    "mean_travel_time",
    "mean_delay",
    "mean_delay_capped",
    "completion_rate",
    "congested",
    "status",
];

#[derive(Debug, Error)]
pub enum SweepError {
    #[error("invalid sweep: {0}")]
    Spec(String),
    #[error(transparent)]
    Routing(#[from] RoutingError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("every alpha is congested over the whole rate grid")]
    AllCongested,
    #[error("nothing to write")]
    Empty,
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("worker pool: {0}")]
    Pool(String),
}

/// Router family; coverage takes its `alpha` from the sweep grid.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RouterChoice {
    #[serde(rename = "sp")]
    ShortestPath,
    #[serde(rename = "msp")]
    ModifiedShortestPath,
    Coverage,
}

impl RouterChoice {
    pub fn label(self) -> &'static str {
        match self {
            RouterChoice::Coverage => "coverage",
            RouterChoice::ShortestPath => "sp",
            RouterChoice::ModifiedShortestPath => "msp",
        }
    }

    fn order(self) -> u8 {
        match self {
            RouterChoice::Coverage => 0,
            RouterChoice::ShortestPath => 1,
            RouterChoice::ModifiedShortestPath => 2,
        }
    }
}

impl fmt::Display for RouterChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for RouterChoice {
    type Err = SweepError;

    fn from_str(s: &str) -> Result<Self, SweepError> {
        match s {
            "coverage" => Ok(RouterChoice::Coverage),
            "sp" => Ok(RouterChoice::ShortestPath),
            "msp" => Ok(RouterChoice::ModifiedShortestPath),
            other => Err(SweepError::Spec(format!(
                "unknown router `{other}` (expected coverage, sp or msp)"
            ))),
        }
    }
}

/// `start, start + step, ..., stop` without accumulated rounding error.
pub fn grid(start: f64, stop: f64, step: f64) -> Vec<f64> {
    assert!(step > 0.0 && stop >= start);
    let n = ((stop - start) / step + 1e-9).floor() as usize;
    (0..=n)
        .map(|i| ((start + i as f64 * step) * 1e10).round() / 1e10)
        .collect()
}

/// Default alpha axis: 0, 0.05, ..., 1.
pub fn default_alphas() -> Vec<f64> {
    grid(0.0, 1.0, 0.05)
}

/// Default rate axis: 0.2, 0.4, ..., 5.0.
pub fn default_lambdas() -> Vec<f64> {
    grid(0.2, 5.0, 0.2)
}

pub const DEFAULT_REPLICATES: u32 = 3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    /// Name written to the `topology` column.
    pub topology: String,
    pub alphas: Vec<f64>,
    pub lambdas: Vec<f64>,
    pub replicates: u32,
    pub routers: Vec<RouterChoice>,
    /// Template for every run. Its router only supplies `eta_crit` and
    /// `sigma` for coverage cells; its seed is the base seed.
    pub base: SimConfig,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<(), SweepError> {
        let sorted = |v: &[f64]| v.windows(2).all(|w| w[0] < w[1]);
        if self.alphas.is_empty() || self.lambdas.is_empty() {
            return Err(SweepError::Spec(
                "alpha and lambda grids must be nonempty".into(),
            ));
        }
        if !sorted(&self.alphas) || !sorted(&self.lambdas) {
            return Err(SweepError::Spec("grids must be strictly ascending".into()));
        }
        if let Some(a) = self.alphas.iter().find(|a| !(0.0..=1.0).contains(*a)) {
            return Err(RoutingError::Alpha(*a).into());
        }
        if let Some(l) = self
            .lambdas
            .iter()
            .find(|l| !(**l >= 0.0) || !l.is_finite())
        {
            return Err(SweepError::Spec(format!(
                "rate {l} is not a non-negative number"
            )));
        }
        if self.replicates < 1 {
            return Err(SweepError::Spec("replicates must be at least 1".into()));
        }
        if self.routers.is_empty() {
            return Err(SweepError::Spec("no routers listed".into()));
        }
        let distinct: HashSet<_> = self.routers.iter().collect();
        if distinct.len() != self.routers.len() {
            return Err(SweepError::Spec("router listed twice".into()));
        }
        Ok(())
    }

    fn coverage_template(&self) -> CoverageParams {
        match self.base.router {
            RouterKind::Coverage(p) => p,
            _ => CoverageParams::with_alpha(1.0).expect("valid defaults"),
        }
    }
}

/// Seed for one cell: a SplitMix64 chain over the base seed and grid indices.
pub fn derive_seed(base: u64, alpha_idx: usize, lambda_idx: usize, replicate: u32) -> u64 {
    let mut h = splitmix(base);
    for part in [alpha_idx as u64, lambda_idx as u64, replicate as u64] {
        h = splitmix(h ^ part);
    }
    h
}

fn splitmix(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Clone, Debug, PartialEq)]
pub enum CellStatus {
    Ok(RunMetrics),
    Failed(String),
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepCell {
    pub topology: String,
    pub router: RouterChoice,
    /// `None` for the shortest-path baselines, which ignore it.
    pub alpha: Option<f64>,
    pub lambda: f64,
    pub replicate: u32,
    pub seed: u64,
    pub status: CellStatus,
}

impl SweepCell {
    pub fn metrics(&self) -> Option<&RunMetrics> {
        match &self.status {
            CellStatus::Ok(m) => Some(m),
            CellStatus::Failed(_) => None,
        }
    }

    fn canonical_cmp(&self, other: &Self) -> Ordering {
        let a = |c: &SweepCell| c.alpha.unwrap_or(-1.0);
        a(self)
            .total_cmp(&a(other))
            .then(self.lambda.total_cmp(&other.lambda))
            .then(self.replicate.cmp(&other.replicate))
            .then(self.router.order().cmp(&other.router.order()))
    }
}

struct Task {
    router: RouterChoice,
    alpha: Option<f64>,
    lambda: f64,
    replicate: u32,
    seed: u64,
}

/// Baselines take alpha slots past the end of the grid, one per router, so
/// their seeds never collide with coverage cells or each other.
fn baseline_slot(spec: &SweepSpec, router: RouterChoice) -> usize {
    spec.alphas.len() + router.order() as usize
}

/// Every cell a spec will run, in task order.
fn tasks(spec: &SweepSpec) -> Vec<Task> {
    let mut out = Vec::new();

    for (li, &lambda) in spec.lambdas.iter().enumerate() {
        for replicate in 0..spec.replicates {
            for &router in &spec.routers {
                if router == RouterChoice::Coverage {
                    for (ai, &alpha) in spec.alphas.iter().enumerate() {
                        let seed = derive_seed(spec.base.seed, ai, li, replicate);
                        out.push(Task {
                            router,
                            alpha: Some(alpha),
                            lambda,
                            replicate,
                            seed,
                        });
                    }
                } else {
                    let seed =
                        derive_seed(spec.base.seed, baseline_slot(spec, router), li, replicate);
                    out.push(Task {
                        router,
                        alpha: None,
                        lambda,
                        replicate,
                        seed,
                    });
                }
            }
        }
    }
    out
}

/// Configuration for a single cell.
pub fn cell_config(
    spec: &SweepSpec,
    router: RouterChoice,
    alpha: Option<f64>,
    lambda: f64,
    seed: u64,
) -> SimConfig {
    let mut cfg = spec.base;
    cfg.lambda = lambda;
    cfg.seed = seed;
    cfg.router = match router {
        RouterChoice::Coverage => RouterKind::Coverage(CoverageParams {
            alpha: alpha.expect("coverage cells carry alpha"),
            ..spec.coverage_template()
        }),
        RouterChoice::ShortestPath => RouterKind::ShortestPath,
        RouterChoice::ModifiedShortestPath => RouterKind::ModifiedShortestPath,
    };
    cfg
}

/// Runs every cell of `spec` on `net` using at most `jobs` worker threads
/// (all cores when `None`). Individual failures become failed cells.
pub fn run_sweep(
    spec: &SweepSpec,
    net: &Network,
    jobs: Option<usize>,
) -> Result<Vec<SweepCell>, SweepError> {
    spec.validate()?;
    spec.base
        .validate(net)
        .map_err(|e| SweepError::Spec(e.to_string()))?;
    let tasks = tasks(spec);
    let seeds: HashSet<u64> = tasks.iter().map(|t| t.seed).collect();
    assert_eq!(seeds.len(), tasks.len(), "derived seeds collide");

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.unwrap_or(0))
        .build()
        .map_err(|e| SweepError::Pool(e.to_string()))?;
    let mut cells: Vec<SweepCell> = pool.install(|| {
        tasks
            .par_iter()
            .map(|t| {
                let cfg = cell_config(spec, t.router, t.alpha, t.lambda, t.seed);
                let status = match run(&cfg, net) {
                    Ok(res) => match run_metrics(&res, DELAY_CAP) {
                        Ok(m) => CellStatus::Ok(m),
                        Err(e) => CellStatus::Failed(e.to_string()),
                    },
                    Err(e) => CellStatus::Failed(e.to_string()),
                };
                SweepCell {
                    topology: spec.topology.clone(),
                    router: t.router,
                    alpha: t.alpha,
                    lambda: t.lambda,
                    replicate: t.replicate,
                    seed: t.seed,
                    status,
                }
            })
            .collect()
    });
    cells.sort_by(SweepCell::canonical_cmp);
    Ok(cells)
}

fn same_alpha(a: Option<f64>, b: Option<f64>) -> bool {
    match (a, b) {
        (Some(x), Some(y)) => x.to_bits() == y.to_bits(),
        (None, None) => true,
        _ => false,
    }
}

/// Replicate-averaged metrics per rate for one router (and alpha, for
/// coverage), ascending in rate. Failed replicates are skipped; rates with
/// no successful replicate are omitted.
pub fn delay_curve(
    cells: &[SweepCell],
    router: RouterChoice,
    alpha: Option<f64>,
) -> Vec<(f64, RunMetrics)> {
    let mut by_rate: BTreeMap<u64, (f64, Vec<RunMetrics>)> = BTreeMap::new();
    for c in cells
        .iter()
        .filter(|c| c.router == router && same_alpha(c.alpha, alpha))
    {
        let entry = by_rate
            .entry(ordered_bits(c.lambda))
            .or_insert((c.lambda, Vec::new()));
        if let Some(m) = c.metrics() {
            entry.1.push(m.clone());
        }
    }
    by_rate
        .into_values()
        .filter_map(|(l, runs)| metrics::average(&runs).map(|m| (l, m)))
        .collect()
}

fn ordered_bits(x: f64) -> u64 {
    // order-preserving for non-negative floats
    x.to_bits()
}

/// Congestion-onset rate for one router (and alpha) from sweep cells.
pub fn lambda_hat(
    cells: &[SweepCell],
    router: RouterChoice,
    alpha: Option<f64>,
    template: &CoverageParams,
) -> Result<LambdaHat, MetricsError> {
    let kind = match router {
        RouterChoice::Coverage => RouterKind::Coverage(CoverageParams {
            alpha: alpha.unwrap_or(f64::NAN),
            ..*template
        }),
        RouterChoice::ShortestPath => RouterKind::ShortestPath,
        RouterChoice::ModifiedShortestPath => RouterKind::ModifiedShortestPath,
    };
    find_lambda_hat(kind, &delay_curve(cells, router, alpha))
}

/// The alphas sharing the largest congestion-onset rate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlphaRange {
    pub low: f64,
    pub high: f64,
    /// Every maximising alpha, ascending.
    pub alphas: Vec<f64>,
    /// Whether the maximisers are adjacent on the alpha grid.
    pub contiguous: bool,
    pub capacity: Capacity,
    /// Onset rate per alpha; `None` where congestion starts below the grid.
    pub per_alpha: Vec<(f64, Option<Capacity>)>,
}

/// Alpha(s) maximising the congestion-onset rate of coverage routing.
pub fn optimal_alpha(cells: &[SweepCell]) -> Result<AlphaRange, SweepError> {
    let mut alphas: Vec<f64> = cells
        .iter()
        .filter(|c| c.router == RouterChoice::Coverage)
        .filter_map(|c| c.alpha)
        .collect();
    alphas.sort_by(f64::total_cmp);
    alphas.dedup_by(|a, b| a.to_bits() == b.to_bits());
    if alphas.len() < 3 {
        return Err(SweepError::Spec(format!(
            "need at least 3 alpha values, found {}",
            alphas.len()
        )));
    }
    let template = CoverageParams::with_alpha(0.0).expect("valid defaults");
    let mut per_alpha = Vec::with_capacity(alphas.len());
    for &a in &alphas {
        let cap = match lambda_hat(cells, RouterChoice::Coverage, Some(a), &template) {
            Ok(lh) => Some(lh.capacity),
            Err(MetricsError::TransitionBelowGrid) => None,
            Err(e) => return Err(e.into()),
        };
        per_alpha.push((a, cap));
    }
    let best = per_alpha
        .iter()
        .filter_map(|(_, c)| c.map(|c| c.rank()))
        .fold(f64::NEG_INFINITY, f64::max);
    if best == f64::NEG_INFINITY {
        return Err(SweepError::AllCongested);
    }
    let winners: Vec<usize> = (0..alphas.len())
        .filter(|&i| per_alpha[i].1.is_some_and(|c| c.rank() == best))
        .collect();
    let contiguous = winners.windows(2).all(|w| w[1] == w[0] + 1);
    let capacity = per_alpha[winners[0]].1.expect("winner has a capacity");
    Ok(AlphaRange {
        low: alphas[winners[0]],
        high: alphas[*winners.last().expect("nonempty")],
        alphas: winners.iter().map(|&i| alphas[i]).collect(),
        contiguous,
        capacity,
        per_alpha,
    })
}

/// One router's row in a comparison.
#[derive(Clone, Debug, PartialEq)]
pub struct RouterReport {
    pub router: RouterChoice,
    pub alpha: Option<f64>,
    /// `None` when even the smallest rate was congested.
    pub capacity: Option<Capacity>,
    /// Replicate-averaged metrics per rate.
    pub curve: Vec<(f64, RunMetrics)>,
}

impl RouterReport {
    /// Relative capacity gain over `baseline`, when both are finite.
    pub fn gain_over(&self, baseline: &RouterReport) -> Option<f64> {
        match (self.capacity, baseline.capacity) {
            (Some(Capacity::Threshold(a)), Some(Capacity::Threshold(b))) if b > 0.0 => {
                Some(a / b - 1.0)
            }
            _ => None,
        }
    }
}

/// Shortest path, modified shortest path and coverage at `alpha_star` over
/// the same rate grid and replicate seeds.
pub fn compare_routers(
    net: &Network,
    topology: &str,
    lambdas: &[f64],
    alpha_star: f64,
    replicates: u32,
    base: SimConfig,
    jobs: Option<usize>,
) -> Result<Vec<RouterReport>, SweepError> {
    let spec = SweepSpec {
        topology: topology.to_string(),
        alphas: vec![alpha_star],
        lambdas: lambdas.to_vec(),
        replicates,
        routers: vec![
            RouterChoice::ShortestPath,
            RouterChoice::ModifiedShortestPath,
            RouterChoice::Coverage,
        ],
        base,
    };
    let cells = run_sweep(&spec, net, jobs)?;
    reports_from_cells(&cells, &spec)
}

/// Per-router reports from an existing sweep.
pub fn reports_from_cells(
    cells: &[SweepCell],
    spec: &SweepSpec,
) -> Result<Vec<RouterReport>, SweepError> {
    let template = spec.coverage_template();
    let mut out = Vec::new();
    for &router in &spec.routers {
        let alphas: Vec<Option<f64>> = if router == RouterChoice::Coverage {
            spec.alphas.iter().map(|&a| Some(a)).collect()
        } else {
            vec![None]
        };
        for alpha in alphas {
            let capacity = match lambda_hat(cells, router, alpha, &template) {
                Ok(lh) => Some(lh.capacity),
                Err(MetricsError::TransitionBelowGrid) => None,
                Err(e) => return Err(e.into()),
            };
            out.push(RouterReport {
                router,
                alpha,
                capacity,
                curve: delay_curve(cells, router, alpha),
            });
        }
    }
    Ok(out)
}

/// Onset rate for one router without running the whole grid: rates are
/// tried in ascending order and the scan stops at the first congested one,
/// which is all the first-crossing rule looks at. Seeds match [`run_sweep`]
/// so the answer is the same as a full sweep's.
pub fn scan_capacity(
    spec: &SweepSpec,
    net: &Network,
    router: RouterChoice,
    alpha: Option<f64>,
    jobs: Option<usize>,
) -> Result<RouterReport, SweepError> {
    spec.validate()?;
    spec.base
        .validate(net)
        .map_err(|e| SweepError::Spec(e.to_string()))?;
    let alpha_idx = match (router, alpha) {
        (RouterChoice::Coverage, Some(a)) => spec
            .alphas
            .iter()
            .position(|x| x.to_bits() == a.to_bits())
            .ok_or_else(|| SweepError::Spec(format!("alpha {a} is not on the grid")))?,
        (RouterChoice::Coverage, None) => {
            return Err(SweepError::Spec("coverage needs an alpha".into()))
        }
        _ => baseline_slot(spec, router),
    };
    let alpha = if router == RouterChoice::Coverage {
        alpha
    } else {
        None
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.unwrap_or(0))
        .build()
        .map_err(|e| SweepError::Pool(e.to_string()))?;
    let mut cells = Vec::new();
    for (li, &lambda) in spec.lambdas.iter().enumerate() {
        let batch: Vec<SweepCell> = pool.install(|| {
            (0..spec.replicates)
                .into_par_iter()
                .map(|replicate| {
                    let seed = derive_seed(spec.base.seed, alpha_idx, li, replicate);
                    let cfg = cell_config(spec, router, alpha, lambda, seed);
                    let status = match run(&cfg, net) {
                        Ok(res) => match run_metrics(&res, DELAY_CAP) {
                            Ok(m) => CellStatus::Ok(m),
                            Err(e) => CellStatus::Failed(e.to_string()),
                        },
                        Err(e) => CellStatus::Failed(e.to_string()),
                    };
                    SweepCell {
                        topology: spec.topology.clone(),
                        router,
                        alpha,
                        lambda,
                        replicate,
                        seed,
                        status,
                    }
                })
                .collect()
        });
        let runs: Vec<RunMetrics> = batch.iter().filter_map(|c| c.metrics().cloned()).collect();
        cells.extend(batch);
        if metrics::average(&runs).is_some_and(|m| m.congested) {
            break;
        }
    }
    let curve = delay_curve(&cells, router, alpha);
    let capacity = if curve.len() < 2 && curve.first().is_some_and(|(_, m)| !m.congested) {
        // a single free-flowing rate: no crossing seen
        Some(Capacity::LimitNotFound)
    } else {
        match lambda_hat(&cells, router, alpha, &spec.coverage_template()) {
            Ok(lh) => Some(lh.capacity),
            Err(MetricsError::TransitionBelowGrid) => None,
            Err(MetricsError::BadGrid) if curve.first().is_some_and(|(_, m)| m.congested) => None,
            Err(e) => return Err(e.into()),
        }
    };
    Ok(RouterReport {
        router,
        alpha,
        capacity,
        curve,
    })
}

fn num(x: f64) -> String {
    format!("{x}")
}

/// Writes cells as CSV with [`CSV_HEADER`] columns. Failed cells leave the
/// metric columns empty and carry `failed: <reason>` in `status`.
pub fn emit_csv(cells: &[SweepCell], path: &Path) -> Result<(), SweepError> {
    if cells.is_empty() {
        return Err(SweepError::Empty);
    }
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(CSV_HEADER)?;
    for c in cells {
        let mut row = vec![
            c.topology.clone(),
            c.router.label().to_string(),
            c.alpha.map_or_else(|| NOT_APPLICABLE.to_string(), num),
            num(c.lambda),
            c.replicate.to_string(),
            c.seed.to_string(),
        ];
        match &c.status {
            CellStatus::Ok(m) => row.extend([
                num(m.mean_travel_time),
                num(m.mean_delay),
                num(m.mean_delay_capped),
                num(m.completion_rate),
                m.congested.to_string(),
                "ok".to_string(),
            ]),
            CellStatus::Failed(reason) => {
                row.extend(std::iter::repeat_n(String::new(), 5));
                row.push(format!("failed: {reason}"));
            }
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a file written by [`emit_csv`]. The completed-only mean delay is
/// not stored and comes back as `None`.
pub fn read_csv(path: &Path) -> Result<Vec<SweepCell>, SweepError> {
    let mut r = csv::Reader::from_path(path)?;
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header != CSV_HEADER {
        return Err(SweepError::Spec(format!(
            "unexpected CSV header {header:?}"
        )));
    }
    let bad = |what: &str, v: &str| SweepError::Spec(format!("bad {what} `{v}`"));
    let float = |v: &str, what: &str| v.parse::<f64>().map_err(|_| bad(what, v));
    let mut cells = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let f = |i: usize| rec.get(i).unwrap_or("");
        let status = if f(11) == "ok" {
            CellStatus::Ok(RunMetrics {
                mean_travel_time: float(f(6), "mean_travel_time")?,
                mean_delay: float(f(7), "mean_delay")?,
                mean_delay_capped: float(f(8), "mean_delay_capped")?,
                mean_delay_completed: None,
                completion_rate: float(f(9), "completion_rate")?,
                congested: f(10).parse().map_err(|_| bad("congested", f(10)))?,
            })
        } else {
            CellStatus::Failed(f(11).strip_prefix("failed: ").unwrap_or(f(11)).to_string())
        };
        cells.push(SweepCell {
            topology: f(0).to_string(),
            router: f(1).parse()?,
            alpha: if f(2) == NOT_APPLICABLE {
                None
            } else {
                Some(float(f(2), "alpha")?)
            },
            lambda: float(f(3), "lambda")?,
            replicate: f(4).parse().map_err(|_| bad("replicate", f(4)))?,
            seed: f(5).parse().map_err(|_| bad("seed", f(5)))?,
            status,
        });
    }
    Ok(cells)
}

/// Dense matrix of replicate-averaged capped mean delay for coverage cells.
#[derive(Clone, Debug, PartialEq)]
pub struct Heatmap {
    pub alphas: Vec<f64>,
    pub lambdas: Vec<f64>,
    /// `values[i][j]` for `alphas[i]`, `lambdas[j]`; NaN where every
    /// replicate failed.
    pub values: Vec<Vec<f64>>,
}

impl Heatmap {
    pub fn from_cells(cells: &[SweepCell]) -> Result<Self, SweepError> {
        let cov: Vec<&SweepCell> = cells
            .iter()
            .filter(|c| c.router == RouterChoice::Coverage)
            .collect();
        if cov.is_empty() {
            return Err(SweepError::Empty);
        }
        let mut alphas: Vec<f64> = cov.iter().filter_map(|c| c.alpha).collect();
        let mut lambdas: Vec<f64> = cov.iter().map(|c| c.lambda).collect();
        for v in [&mut alphas, &mut lambdas] {
            v.sort_by(f64::total_cmp);
            v.dedup_by(|a, b| a.to_bits() == b.to_bits());
        }
        let mut sums = vec![vec![(0.0, 0u32); lambdas.len()]; alphas.len()];
        for c in &cov {
            let (Some(a), Some(m)) = (c.alpha, c.metrics()) else {
                continue;
            };
            let i = alphas
                .iter()
                .position(|x| x.to_bits() == a.to_bits())
                .expect("collected above");
            let j = lambdas
                .iter()
                .position(|x| x.to_bits() == c.lambda.to_bits())
                .expect("collected above");
            sums[i][j].0 += m.mean_delay_capped;
            sums[i][j].1 += 1;
        }
        let values = sums
            .into_iter()
            .map(|row| {
                row.into_iter()
                    .map(|(s, n)| if n == 0 { f64::NAN } else { s / n as f64 })
                    .collect()
            })
            .collect();
        Ok(Self {
            alphas,
            lambdas,
            values,
        })
    }

    /// Header row `alpha\lambda,<rates...>`, then one row per alpha.
    pub fn to_text(&self) -> String {
        let mut out = String::from("alpha\\lambda");
        for l in &self.lambdas {
            out.push(',');
            out.push_str(&num(*l));
        }
        out.push('\n');
        for (a, row) in self.alphas.iter().zip(&self.values) {
            out.push_str(&num(*a));
            for v in row {
                out.push(',');
                out.push_str(&num(*v));
            }
            out.push('\n');
        }
        out
    }
}

pub fn emit_heatmap_grid(cells: &[SweepCell], path: &Path) -> Result<(), SweepError> {
    let heatmap = Heatmap::from_cells(cells)?;
    fs::write(path, heatmap.to_text())?;
    Ok(())
}
