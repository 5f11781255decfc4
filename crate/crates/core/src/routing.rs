//! Junction-level routing decisions.
//!
//! Coverage routing scores every candidate road `(j, k)` with
//!
//! ```text
//! J = alpha * phi + (1 - alpha) * rho
//! ```
//!
//! where `phi` is the normalised length of "take this road, then the
//! shortest path" and `rho` is a saturating function of the road's
//! occupancy, and takes the cheapest. Two shortest-path baselines share the
//! same decision interface.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::netgraph::{DistanceMap, JunctionId, Network, Road, RoadId};
use crate::scalar::Scalar;

pub const DEFAULT_ETA_CRIT: f64 = 0.2;
pub const DEFAULT_SIGMA: f64 = 10.0;
/// Costs closer than this are treated as equal.
pub const TIE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum RoutingError {
    #[error("alpha must lie in [0, 1], got {0}")]
    Alpha(f64),
    #[error("eta_crit must lie in (0, 1), got {0}")]
    EtaCrit(f64),
    #[error("sigma must be positive, got {0}")]
    Sigma(f64),
    #[error("occupancy must lie in [0, 1], got {0}")]
    Occupancy(f64),
    #[error("destination {dest} is unreachable from junction {junction}")]
    Unreachable {
        junction: JunctionId,
        dest: JunctionId,
    },
    #[error("junction {0} has no candidate roads")]
    NoCandidates(JunctionId),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct CoverageParams<T = f64> {
    pub alpha: T,
    pub eta_crit: T,
    pub sigma: T,
}

impl<T: Scalar> CoverageParams<T> {
    pub fn new(alpha: T, eta_crit: T, sigma: T) -> Result<Self, RoutingError> {
        let p = Self {
            alpha,
            eta_crit,
            sigma,
        };
        p.validate()?;
        Ok(p)
    }

    /// `alpha` with the default `eta_crit = 0.2` and `sigma = 10`.
    pub fn with_alpha(alpha: T) -> Result<Self, RoutingError> {
        Self::new(alpha, T::of(DEFAULT_ETA_CRIT), T::of(DEFAULT_SIGMA))
    }

    pub fn validate(&self) -> Result<(), RoutingError> {
        if !(self.alpha >= T::zero() && self.alpha <= T::one()) {
            return Err(RoutingError::Alpha(self.alpha.as_f64()));
        }
        if !(self.eta_crit > T::zero() && self.eta_crit < T::one()) {
            return Err(RoutingError::EtaCrit(self.eta_crit.as_f64()));
        }
        if !(self.sigma > T::zero()) || !self.sigma.is_finite() {
            return Err(RoutingError::Sigma(self.sigma.as_f64()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub enum RouterKind<T = f64> {
    Coverage(CoverageParams<T>),
    ShortestPath,
    ModifiedShortestPath,
}

impl<T: Scalar> RouterKind<T> {
    /// Short label: `coverage`, `sp` or `msp`.
    pub fn label(&self) -> &'static str {
        match self {
            RouterKind::Coverage(_) => "coverage",
            RouterKind::ShortestPath => "sp",
            RouterKind::ModifiedShortestPath => "msp",
        }
    }

    pub fn alpha(&self) -> Option<T> {
        match self {
            RouterKind::Coverage(p) => Some(p.alpha),
            _ => None,
        }
    }

    pub fn choose<R: Rng + ?Sized>(
        &self,
        decision: &Decision<'_, T>,
        rng: &mut R,
    ) -> Result<RoadId, RoutingError> {
        match self {
            RouterKind::Coverage(p) => choose_next_road(decision, p, rng),
            RouterKind::ShortestPath => shortest_path_next(decision, rng),
            RouterKind::ModifiedShortestPath => modified_shortest_next(decision, rng),
        }
    }
}

/// Normalisers for `phi`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NormConstants<T> {
    /// Largest network distance from any junction to the destination.
    pub max_dest_distance: T,
    /// Longest road in the network.
    pub max_edge_length: T,
}

impl<T: Scalar> NormConstants<T> {
    pub fn new(net: &Network<T>, dist: &DistanceMap<T>) -> Self {
        Self {
            max_dest_distance: dist.max_finite(),
            max_edge_length: net.max_road_length(),
        }
    }
}

/// Value of `phi` for one road; `reachable` is false when the road leads
/// somewhere the destination cannot be reached from.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Phi<T> {
    pub value: T,
    pub reachable: bool,
}

pub fn phi<T: Scalar>(dist: &DistanceMap<T>, road: &Road<T>, norms: &NormConstants<T>) -> Phi<T> {
    match dist.get(road.to) {
        Some(rest) => Phi {
            value: (rest + road.length) / (norms.max_dest_distance + norms.max_edge_length),
            reachable: true,
        },
        None => Phi {
            value: T::one(),
            reachable: false,
        },
    }
}

/// Congestion term: linear below `eta_crit`, `1 - exp(-sigma * eta)` from
/// `eta_crit` up. The jump at `eta_crit` is intentional.
pub fn rho<T: Scalar>(eta: T, params: &CoverageParams<T>) -> Result<T, RoutingError> {
    if !(eta >= T::zero() && eta <= T::one()) {
        return Err(RoutingError::Occupancy(eta.as_f64()));
    }
    Ok(if eta < params.eta_crit {
        eta
    } else {
        T::one() - (-params.sigma * eta).exp()
    })
}

#[inline]
pub fn cost<T: Scalar>(phi: T, rho: T, alpha: T) -> T {
    alpha * phi + (T::one() - alpha) * rho
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CostBreakdown<T> {
    pub road: RoadId,
    pub phi: T,
    pub rho: T,
    pub j_cost: T,
    pub reachable: bool,
}

/// Everything a router sees when a vehicle stands at a junction.
#[derive(Clone, Debug)]
pub struct Decision<'a, T> {
    pub net: &'a Network<T>,
    pub junction: JunctionId,
    pub dist: &'a DistanceMap<T>,
    pub norms: NormConstants<T>,
    /// Candidate roads in ascending id order.
    pub candidates: Vec<RoadId>,
}

impl<'a, T: Scalar> Decision<'a, T> {
    /// Decision for a vehicle arriving at `junction` along `arrival`.
    ///
    /// The immediate reverse of `arrival` is excluded unless it is the only
    /// way out.
    pub fn at_junction(
        net: &'a Network<T>,
        junction: JunctionId,
        arrival: Option<RoadId>,
        dist: &'a DistanceMap<T>,
        norms: NormConstants<T>,
    ) -> Self {
        let out = net.outgoing(junction);
        let back = arrival.and_then(|r| net.reverse_of(r));
        let mut candidates: Vec<RoadId> =
            out.iter().copied().filter(|&r| Some(r) != back).collect();
        if candidates.is_empty() {
            candidates = out.to_vec();
        }
        Self {
            net,
            junction,
            dist,
            norms,
            candidates,
        }
    }

    /// Decision for a vehicle entering the network at `origin`: only roads
    /// with free space are offered. `None` when all of them are full.
    pub fn at_origin(
        net: &'a Network<T>,
        origin: JunctionId,
        dist: &'a DistanceMap<T>,
        norms: NormConstants<T>,
    ) -> Option<Self> {
        let candidates: Vec<RoadId> = net
            .outgoing(origin)
            .iter()
            .copied()
            .filter(|&r| !net.road(r).is_full())
            .collect();
        (!candidates.is_empty()).then_some(Self {
            net,
            junction: origin,
            dist,
            norms,
            candidates,
        })
    }

    pub fn costs(&self, params: &CoverageParams<T>) -> Result<Vec<CostBreakdown<T>>, RoutingError> {
        self.candidates
            .iter()
            .map(|&r| {
                let road = self.net.road(r);
                let p = phi(self.dist, road, &self.norms);
                let rh = rho(road.occupancy(), params)?;
                Ok(CostBreakdown {
                    road: r,
                    phi: p.value,
                    rho: rh,
                    j_cost: cost(p.value, rh, params.alpha),
                    reachable: p.reachable,
                })
            })
            .collect()
    }

    fn ensure_reachable(&self) -> Result<(), RoutingError> {
        if self.candidates.is_empty() {
            return Err(RoutingError::NoCandidates(self.junction));
        }
        if !self.dist.is_reachable(self.junction) {
            return Err(RoutingError::Unreachable {
                junction: self.junction,
                dest: self.dist.dest(),
            });
        }
        Ok(())
    }

    /// Length of "this road, then the shortest path".
    fn via_length(&self, r: RoadId) -> Option<T> {
        let road = self.net.road(r);
        self.dist.get(road.to).map(|d| d + road.length)
    }
}

fn tol<T: Scalar>(scale: T) -> T {
    T::of(TIE_TOLERANCE).max(T::epsilon() * T::of(4.0)) * scale.abs().max(T::one())
}

/// Picks uniformly among `ties`, drawing from `rng` only when there is a
/// real choice.
fn pick<R: Rng + ?Sized>(ties: &[RoadId], rng: &mut R) -> RoadId {
    if ties.len() == 1 {
        ties[0]
    } else {
        ties[rng.random_range(0..ties.len())]
    }
}

/// Indices of the minimal keys, with `None` keys losing to any `Some`.
fn argmin_set<T: Scalar>(keys: &[(RoadId, Option<T>)]) -> Vec<RoadId> {
    let Some(best) = keys.iter().filter_map(|k| k.1).reduce(T::min) else {
        return Vec::new();
    };
    let t = tol(best);
    keys.iter()
        .filter(|k| k.1.is_some_and(|v| v <= best + t))
        .map(|k| k.0)
        .collect()
}

/// Coverage routing: the candidate with the lowest `J`. Roads from which
/// the destination is unreachable lose to every reachable one.
pub fn choose_next_road<T: Scalar, R: Rng + ?Sized>(
    decision: &Decision<'_, T>,
    params: &CoverageParams<T>,
    rng: &mut R,
) -> Result<RoadId, RoutingError> {
    decision.ensure_reachable()?;
    let costs = decision.costs(params)?;
    let keys: Vec<_> = costs
        .iter()
        .map(|c| (c.road, c.reachable.then_some(c.j_cost)))
        .collect();
    let ties = argmin_set(&keys);
    if ties.is_empty() {
        return Err(RoutingError::Unreachable {
            junction: decision.junction,
            dest: decision.dist.dest(),
        });
    }
    Ok(pick(&ties, rng))
}

fn shortest_candidates<T: Scalar>(decision: &Decision<'_, T>) -> Result<Vec<RoadId>, RoutingError> {
    decision.ensure_reachable()?;
    let keys: Vec<_> = decision
        .candidates
        .iter()
        .map(|&r| (r, decision.via_length(r)))
        .collect();
    let set = argmin_set(&keys);
    if set.is_empty() {
        return Err(RoutingError::Unreachable {
            junction: decision.junction,
            dest: decision.dist.dest(),
        });
    }
    Ok(set)
}

/// Next road on a shortest path, uniformly at random among equal ones.
pub fn shortest_path_next<T: Scalar, R: Rng + ?Sized>(
    decision: &Decision<'_, T>,
    rng: &mut R,
) -> Result<RoadId, RoutingError> {
    Ok(pick(&shortest_candidates(decision)?, rng))
}

/// Shortest-path next road, preferring the least occupied among equals.
pub fn modified_shortest_next<T: Scalar, R: Rng + ?Sized>(
    decision: &Decision<'_, T>,
    rng: &mut R,
) -> Result<RoadId, RoutingError> {
    let shortest = shortest_candidates(decision)?;
    let keys: Vec<_> = shortest
        .iter()
        .map(|&r| (r, Some(decision.net.road(r).occupancy())))
        .collect();
    Ok(pick(&argmin_set(&keys), rng))
}
