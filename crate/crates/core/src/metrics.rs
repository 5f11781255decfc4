//! Delay statistics, congestion classification and the congestion-onset
//! generation rate.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{SimResult, TripRecord};
use crate::netgraph::{shortest_distance_map, JunctionId, NetError, Network};
use crate::routing::RouterKind;
use crate::scalar::Scalar;

/// Per-trip delays are capped at this many seconds before averaging.
pub const DELAY_CAP: f64 = 500.0;
/// Capped mean delay at or above which a run counts as congested.
pub const CONGESTION_THRESHOLD: f64 = 500.0;
/// Runs completing fewer than this fraction of their trips are congested.
pub const MIN_COMPLETION_RATE: f64 = 0.5;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("no vehicles were generated; delay statistics are undefined")]
    NoTrips,
    #[error("destination {dest} is unreachable from {origin}")]
    Unreachable {
        origin: JunctionId,
        dest: JunctionId,
    },
    #[error("congestion sets in below the first grid rate")]
    TransitionBelowGrid,
    #[error("rate grid must be sorted and hold at least two points")]
    BadGrid,
    #[error(transparent)]
    Net(#[from] NetError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    /// Mean seconds from spawn to arrival; unfinished trips count up to the horizon.
    pub mean_travel_time: f64,
    /// Mean delay over all trips, unfinished ones contributing a lower bound.
    pub mean_delay: f64,
    /// As `mean_delay`, with each trip's delay capped at [`DELAY_CAP`] first.
    pub mean_delay_capped: f64,
    /// Mean delay over completed trips only.
    pub mean_delay_completed: Option<f64>,
    pub completion_rate: f64,
    pub congested: bool,
}

/// Fastest possible travel time between two junctions.
pub fn free_flow_time<T: Scalar>(
    net: &Network<T>,
    origin: JunctionId,
    dest: JunctionId,
    v_max: T,
) -> Result<T, MetricsError> {
    let map = shortest_distance_map(net, dest)?;
    if origin >= net.junction_count() {
        return Err(NetError::UnknownJunction(origin).into());
    }
    map.get(origin)
        .map(|d| d / v_max)
        .ok_or(MetricsError::Unreachable { origin, dest })
}

/// Delay of one trip. Censored trips get `horizon - spawn - free_flow`,
/// floored at zero. Rounding-level negatives on completed trips read as 0.
pub fn trip_delay<T: Scalar>(trip: &TripRecord<T>, horizon: T) -> f64 {
    let end = trip.arrival_time.unwrap_or(horizon);
    ((end - trip.spawn_time - trip.free_flow_time).as_f64()).max(0.0)
}

pub fn run_metrics<T: Scalar>(result: &SimResult<T>, cap: f64) -> Result<RunMetrics, MetricsError> {
    if result.trips.is_empty() {
        return Err(MetricsError::NoTrips);
    }
    let n = result.trips.len() as f64;
    let (mut travel, mut delay, mut capped, mut done_delay, mut done) =
        (0.0, 0.0, 0.0, 0.0, 0usize);
    for t in &result.trips {
        let d = trip_delay(t, result.horizon);
        travel += (t.arrival_time.unwrap_or(result.horizon) - t.spawn_time).as_f64();
        delay += d;
        capped += d.min(cap);
        if !t.is_censored() {
            done_delay += d;
            done += 1;
        }
    }
    let mut m = RunMetrics {
        mean_travel_time: travel / n,
        mean_delay: delay / n,
        mean_delay_capped: capped / n,
        mean_delay_completed: (done > 0).then(|| done_delay / done as f64),
        completion_rate: done as f64 / n,
        congested: false,
    };
    m.congested = classify_congested(&m, CONGESTION_THRESHOLD);
    Ok(m)
}

pub fn classify_congested(m: &RunMetrics, threshold: f64) -> bool {
    m.mean_delay_capped >= threshold || m.completion_rate < MIN_COMPLETION_RATE
}

/// Field-wise mean of replicate metrics, re-classified.
pub fn average(runs: &[RunMetrics]) -> Option<RunMetrics> {
    if runs.is_empty() {
        return None;
    }
    let n = runs.len() as f64;
    let mean = |f: fn(&RunMetrics) -> f64| runs.iter().map(f).sum::<f64>() / n;
    let completed: Vec<f64> = runs.iter().filter_map(|r| r.mean_delay_completed).collect();
    let mut m = RunMetrics {
        mean_travel_time: mean(|r| r.mean_travel_time),
        mean_delay: mean(|r| r.mean_delay),
        mean_delay_capped: mean(|r| r.mean_delay_capped),
        mean_delay_completed: (!completed.is_empty())
            .then(|| completed.iter().sum::<f64>() / completed.len() as f64),
        completion_rate: mean(|r| r.completion_rate),
        congested: false,
    };
    m.congested = classify_congested(&m, CONGESTION_THRESHOLD);
    Some(m)
}

/// Largest sustainable generation rate on a swept grid.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Capacity {
    /// Largest grid rate with it and every smaller rate free-flowing.
    Threshold(f64),
    /// No rate on the grid was congested.
    LimitNotFound,
}

impl Capacity {
    /// Threshold value, with no limit ranked above every finite one.
    pub fn rank(&self) -> f64 {
        match self {
            Capacity::Threshold(l) => *l,
            Capacity::LimitNotFound => f64::INFINITY,
        }
    }
}

impl std::fmt::Display for Capacity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Capacity::Threshold(l) => write!(f, "{l}"),
            Capacity::LimitNotFound => f.write_str("limit not found"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LambdaHat {
    pub router: RouterKind,
    pub capacity: Capacity,
    /// Smallest spacing of the rate grid.
    pub grid_step: f64,
}

/// First-crossing rule over `(lambda, seed-averaged metrics)` pairs sorted by
/// rate: the rate just before the first congested point.
pub fn find_lambda_hat(
    router: RouterKind,
    cells: &[(f64, RunMetrics)],
) -> Result<LambdaHat, MetricsError> {
    if cells.len() < 2 || cells.windows(2).any(|w| !(w[0].0 < w[1].0)) {
        return Err(MetricsError::BadGrid);
    }
    let grid_step = cells
        .windows(2)
        .map(|w| w[1].0 - w[0].0)
        .fold(f64::INFINITY, f64::min);
    let capacity = match cells
        .iter()
        .position(|(_, m)| classify_congested(m, CONGESTION_THRESHOLD))
    {
        Some(0) => return Err(MetricsError::TransitionBelowGrid),
        Some(i) => Capacity::Threshold(cells[i - 1].0),
        None => Capacity::LimitNotFound,
    };
    Ok(LambdaHat {
        router,
        capacity,
        grid_step,
    })
}
