//! Road network model.
//!
//! A [`Network`] is a set of junctions with planar coordinates joined by
//! directed roads. Every generator in this crate produces undirected
//! networks, stored as pairs of opposite roads with identical length and
//! capacity so that load and occupancy are tracked per direction.

mod generators;
mod io;
mod paths;

pub use generators::{
    build_grid, build_random_rewire, build_scale_free, build_spiderweb, Preset,
    PRESET_RANDOM_REWIRES, PRESET_RANDOM_SEED, PRESET_SCALE_FREE_SEED,
};
pub use io::{NetworkFile, RoadRecord};
pub use paths::{network_stats, shortest_distance_map, shortest_path, DistanceMap, NetworkStats};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Scalar;

/// Index of a junction, contiguous from zero.
pub type JunctionId = usize;
/// Index of a directed road, contiguous from zero.
pub type RoadId = usize;

/// Grid road length reproducing the reference diameters (800 m on 5x5).
pub const DEFAULT_EDGE_LENGTH: f64 = 100.0;
/// Road space taken by one vehicle, including headway (about 133 veh/km).
pub const EFFECTIVE_VEHICLE_LENGTH: f64 = 7.5;
/// Urban speed limit of 50 km/h.
pub const DEFAULT_SPEED_LIMIT: f64 = 13.9;

#[derive(Debug, Error, PartialEq)]
pub enum NetError {
    #[error("degenerate dimensions: {0}")]
    Degenerate(String),
    #[error("invalid network: {0}")]
    Invalid(String),
    #[error("network is disconnected")]
    Disconnected,
    #[error("junction {0} does not exist")]
    UnknownJunction(JunctionId),
    #[error("no valid rewire found within {0} attempts")]
    RewireExhausted(usize),
    #[error("unknown preset `{0}` (expected one of grid5, grid10, random, spiderweb, scalefree)")]
    UnknownPreset(String),
    #[error("network file: {0}")]
    Format(String),
    #[error("i/o: {0}")]
    Io(String),
}

impl From<std::io::Error> for NetError {
    fn from(e: std::io::Error) -> Self {
        NetError::Io(e.to_string())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Junction<T> {
    pub id: JunctionId,
    pub x: T,
    pub y: T,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Road<T> {
    pub id: RoadId,
    pub from: JunctionId,
    pub to: JunctionId,
    /// Metres.
    pub length: T,
    /// Maximum number of vehicles on the road.
    pub capacity: u32,
    /// Vehicles currently on the road. Only the engine mutates this.
    pub load: u32,
    /// Metres per second.
    pub speed_limit: T,
}

impl<T: Scalar> Road<T> {
    /// Fraction of capacity in use, in `[0, 1]`.
    #[inline]
    pub fn occupancy(&self) -> T {
        T::of(self.load as f64 / self.capacity as f64)
    }

    #[inline]
    pub fn is_full(&self) -> bool {
        self.load >= self.capacity
    }
}

/// Number of vehicles a road of `length` metres can hold.
pub fn derive_capacity(length: f64, effective_vehicle_length: f64) -> u32 {
    assert!(length > 0.0 && effective_vehicle_length > 0.0);
    ((length / effective_vehicle_length).floor() as u32).max(1)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Network<T = f64> {
    junctions: Vec<Junction<T>>,
    roads: Vec<Road<T>>,
    outgoing: Vec<Vec<RoadId>>,
    incoming: Vec<Vec<RoadId>>,
    reverse: Vec<Option<RoadId>>,
    max_road_length: T,
}

impl<T: Scalar> Network<T> {
    /// Builds and validates a network from explicit junctions and roads.
    ///
    /// Roads must be listed with ids `0..n` in order. Every road needs an
    /// opposite twin of equal length and capacity, and the junction graph
    /// must be connected.
    pub fn from_parts(junctions: Vec<Junction<T>>, roads: Vec<Road<T>>) -> Result<Self, NetError> {
        if junctions.len() < 2 {
            return Err(NetError::Invalid("fewer than two junctions".into()));
        }
        for (i, j) in junctions.iter().enumerate() {
            if j.id != i {
                return Err(NetError::Invalid(format!(
                    "junction ids must be contiguous, found {} at {i}",
                    j.id
                )));
            }
            if !j.x.is_finite() || !j.y.is_finite() {
                return Err(NetError::Invalid(format!(
                    "junction {i} has non-finite coordinates"
                )));
            }
        }
        let n = junctions.len();
        let mut outgoing = vec![Vec::new(); n];
        let mut incoming = vec![Vec::new(); n];
        let mut by_pair = std::collections::HashMap::with_capacity(roads.len());
        for (i, r) in roads.iter().enumerate() {
            if r.id != i {
                return Err(NetError::Invalid(format!(
                    "road ids must be contiguous, found {} at {i}",
                    r.id
                )));
            }
            if r.from >= n {
                return Err(NetError::UnknownJunction(r.from));
            }
            if r.to >= n {
                return Err(NetError::UnknownJunction(r.to));
            }
            if r.from == r.to {
                return Err(NetError::Invalid(format!("road {i} is a self-loop")));
            }
            if !(r.length > T::zero()) || !r.length.is_finite() {
                return Err(NetError::Invalid(format!(
                    "road {i} has non-positive length"
                )));
            }
            if !(r.speed_limit > T::zero()) || !r.speed_limit.is_finite() {
                return Err(NetError::Invalid(format!(
                    "road {i} has non-positive speed limit"
                )));
            }
            if r.capacity < 1 {
                return Err(NetError::Invalid(format!("road {i} has zero capacity")));
            }
            if r.load > r.capacity {
                return Err(NetError::Invalid(format!("road {i} is over capacity")));
            }
            if by_pair.insert((r.from, r.to), i).is_some() {
                return Err(NetError::Invalid(format!(
                    "duplicate road {} -> {}",
                    r.from, r.to
                )));
            }
            outgoing[r.from].push(i);
            incoming[r.to].push(i);
        }
        let mut reverse = Vec::with_capacity(roads.len());
        for r in &roads {
            let twin = by_pair.get(&(r.to, r.from)).copied();
            match twin {
                Some(t) if roads[t].length == r.length && roads[t].capacity == r.capacity => {}
                Some(_) => {
                    return Err(NetError::Invalid(format!(
                        "road {} and its reverse differ in length or capacity",
                        r.id
                    )))
                }
                None => return Err(NetError::Invalid(format!("road {} has no reverse", r.id))),
            }
            reverse.push(twin);
        }
        let max_road_length = roads.iter().map(|r| r.length).fold(T::zero(), T::max);
        let net = Self {
            junctions,
            roads,
            outgoing,
            incoming,
            reverse,
            max_road_length,
        };
        if !net.is_connected() {
            return Err(NetError::Disconnected);
        }
        Ok(net)
    }

    /// Builds an undirected network: each edge `(a, b, length)` becomes the
    /// roads `a -> b` and `b -> a`, with capacity derived from length.
    pub fn undirected(
        junctions: Vec<Junction<T>>,
        edges: &[(JunctionId, JunctionId, T)],
        speed_limit: T,
    ) -> Result<Self, NetError> {
        let mut roads = Vec::with_capacity(edges.len() * 2);
        for &(a, b, length) in edges {
            let capacity = derive_capacity(length.as_f64(), EFFECTIVE_VEHICLE_LENGTH);
            for (from, to) in [(a, b), (b, a)] {
                roads.push(Road {
                    id: roads.len(),
                    from,
                    to,
                    length,
                    capacity,
                    load: 0,
                    speed_limit,
                });
            }
        }
        Self::from_parts(junctions, roads)
    }

    pub fn junctions(&self) -> &[Junction<T>] {
        &self.junctions
    }

    pub fn roads(&self) -> &[Road<T>] {
        &self.roads
    }

    #[inline]
    pub fn road(&self, id: RoadId) -> &Road<T> {
        &self.roads[id]
    }

    #[inline]
    pub(crate) fn road_mut(&mut self, id: RoadId) -> &mut Road<T> {
        &mut self.roads[id]
    }

    pub fn junction_count(&self) -> usize {
        self.junctions.len()
    }

    pub fn road_count(&self) -> usize {
        self.roads.len()
    }

    /// Roads leaving `j`, in ascending id order.
    #[inline]
    pub fn outgoing(&self, j: JunctionId) -> &[RoadId] {
        &self.outgoing[j]
    }

    /// Roads entering `j`, in ascending id order.
    #[inline]
    pub fn incoming(&self, j: JunctionId) -> &[RoadId] {
        &self.incoming[j]
    }

    /// The opposite-direction twin of a road.
    #[inline]
    pub fn reverse_of(&self, r: RoadId) -> Option<RoadId> {
        self.reverse[r]
    }

    /// Longest single road in the network.
    pub fn max_road_length(&self) -> T {
        self.max_road_length
    }

    /// Undirected edges as `(a, b)` with `a < b`, in road order.
    pub fn undirected_edges(&self) -> Vec<(JunctionId, JunctionId)> {
        self.roads
            .iter()
            .filter(|r| r.from < r.to)
            .map(|r| (r.from, r.to))
            .collect()
    }

    pub fn degree(&self, j: JunctionId) -> usize {
        self.outgoing[j].len()
    }

    pub fn total_load(&self) -> u64 {
        self.roads.iter().map(|r| r.load as u64).sum()
    }

    pub fn clear_loads(&mut self) {
        for r in &mut self.roads {
            r.load = 0;
        }
    }

    pub fn is_connected(&self) -> bool {
        let n = self.junctions.len();
        let mut seen = vec![false; n];
        let mut stack = vec![0];
        seen[0] = true;
        let mut count = 1;
        while let Some(j) = stack.pop() {
            for &r in &self.outgoing[j] {
                let k = self.roads[r].to;
                if !seen[k] {
                    seen[k] = true;
                    count += 1;
                    stack.push(k);
                }
            }
        }
        count == n
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn junctions(n: usize) -> Vec<Junction<f64>> {
        (0..n)
            .map(|id| Junction {
                id,
                x: id as f64 * 100.0,
                y: 0.0,
            })
            .collect()
    }

    #[test]
    fn capacity_from_length() {
        assert_eq!(derive_capacity(100.0, 7.5), 13);
        assert_eq!(derive_capacity(5.0, 7.5), 1);
        assert_eq!(derive_capacity(750.0, 7.5), 100);
    }

    #[test]
    fn undirected_pairs_roads() {
        let net = Network::undirected(junctions(3), &[(0, 1, 100.0), (1, 2, 50.0)], 13.9).unwrap();
        assert_eq!(net.road_count(), 4);
        for r in net.roads() {
            let t = net.road(net.reverse_of(r.id).unwrap());
            assert_eq!((t.from, t.to), (r.to, r.from));
            assert_eq!(t.length, r.length);
            assert_eq!(t.capacity, r.capacity);
        }
        assert_eq!(net.outgoing(1), &[1, 2]);
        assert_eq!(net.max_road_length(), 100.0);
    }

    #[test]
    fn rejects_disconnected() {
        let err =
            Network::undirected(junctions(4), &[(0, 1, 100.0), (2, 3, 100.0)], 13.9).unwrap_err();
        assert_eq!(err, NetError::Disconnected);
    }

    #[test]
    fn rejects_missing_reverse_and_self_loops() {
        let road = |id, from, to| Road {
            id,
            from,
            to,
            length: 10.0,
            capacity: 1,
            load: 0,
            speed_limit: 10.0,
        };
        let err = Network::from_parts(junctions(2), vec![road(0, 0, 1)]).unwrap_err();
        assert!(matches!(err, NetError::Invalid(_)));
        let err = Network::from_parts(junctions(2), vec![road(0, 0, 0)]).unwrap_err();
        assert!(matches!(err, NetError::Invalid(_)));
        let err =
            Network::from_parts(junctions(2), vec![road(0, 0, 5), road(1, 5, 0)]).unwrap_err();
        assert_eq!(err, NetError::UnknownJunction(5));
    }

    #[test]
    fn rejects_asymmetric_twin() {
        let mut roads = vec![
            Road {
                id: 0,
                from: 0,
                to: 1,
                length: 10.0,
                capacity: 1,
                load: 0,
                speed_limit: 10.0,
            },
            Road {
                id: 1,
                from: 1,
                to: 0,
                length: 12.0,
                capacity: 1,
                load: 0,
                speed_limit: 10.0,
            },
        ];
        assert!(Network::from_parts(junctions(2), roads.clone()).is_err());
        roads[1].length = 10.0;
        assert!(Network::from_parts(junctions(2), roads).is_ok());
    }

    #[test]
    fn occupancy_is_load_over_capacity() {
        let mut net = Network::undirected(junctions(2), &[(0, 1, 75.0)], 13.9).unwrap();
        net.road_mut(0).load = 5;
        assert_eq!(net.road(0).occupancy(), 0.5);
        assert!(!net.road(0).is_full());
        net.road_mut(0).load = 10;
        assert!(net.road(0).is_full());
        assert_eq!(net.total_load(), 10);
    }
}
