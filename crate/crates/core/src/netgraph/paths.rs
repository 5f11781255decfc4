use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use super::{JunctionId, NetError, Network, RoadId};
use crate::scalar::Scalar;

/// Shortest road-length distance from every junction to one destination.
///
/// Unreachable junctions hold `+inf`; [`DistanceMap::get`] maps them to
/// `None`.
#[derive(Clone, Debug, PartialEq)]
pub struct DistanceMap<T> {
    dest: JunctionId,
    dist: Vec<T>,
}

impl<T: Scalar> DistanceMap<T> {
    #[cfg(test)]
    pub(crate) fn from_raw(dest: JunctionId, dist: Vec<T>) -> Self {
        Self { dest, dist }
    }

    pub fn dest(&self) -> JunctionId {
        self.dest
    }

    #[inline]
    pub fn get(&self, j: JunctionId) -> Option<T> {
        let d = self.dist[j];
        d.is_finite().then_some(d)
    }

    #[inline]
    pub fn is_reachable(&self, j: JunctionId) -> bool {
        self.dist[j].is_finite()
    }

    /// Raw distances, `+inf` where unreachable.
    pub fn as_slice(&self) -> &[T] {
        &self.dist
    }

    /// Largest finite distance to the destination.
    pub fn max_finite(&self) -> T {
        self.dist
            .iter()
            .copied()
            .filter(|d| d.is_finite())
            .fold(T::zero(), T::max)
    }
}

#[derive(Copy, Clone, PartialEq)]
struct Entry<T> {
    dist: T,
    node: JunctionId,
}

impl<T: Scalar> Eq for Entry<T> {}

impl<T: Scalar> Ord for Entry<T> {
    fn cmp(&self, other: &Self) -> Ordering {
        // min-heap on distance; distances are finite here
        other
            .dist
            .partial_cmp(&self.dist)
            .unwrap_or(Ordering::Equal)
            .then_with(|| other.node.cmp(&self.node))
    }
}

impl<T: Scalar> PartialOrd for Entry<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Dijkstra over incoming roads, giving the distance from each junction to
/// `dest`.
pub fn shortest_distance_map<T: Scalar>(
    net: &Network<T>,
    dest: JunctionId,
) -> Result<DistanceMap<T>, NetError> {
    if dest >= net.junction_count() {
        return Err(NetError::UnknownJunction(dest));
    }
    let mut dist = vec![T::infinity(); net.junction_count()];
    dist[dest] = T::zero();
    let mut heap = BinaryHeap::new();
    heap.push(Entry {
        dist: T::zero(),
        node: dest,
    });
    while let Some(Entry { dist: d, node }) = heap.pop() {
        if d > dist[node] {
            continue;
        }
        for &r in net.incoming(node) {
            let road = net.road(r);
            let nd = d + road.length;
            if nd < dist[road.from] {
                dist[road.from] = nd;
                heap.push(Entry {
                    dist: nd,
                    node: road.from,
                });
            }
        }
    }
    Ok(DistanceMap { dest, dist })
}

/// Forward Dijkstra from `origin`, returning one shortest road sequence to
/// `dest` (lowest road id wins ties), or `None` if unreachable.
pub fn shortest_path<T: Scalar>(
    net: &Network<T>,
    origin: JunctionId,
    dest: JunctionId,
) -> Result<Option<Vec<RoadId>>, NetError> {
    for j in [origin, dest] {
        if j >= net.junction_count() {
            return Err(NetError::UnknownJunction(j));
        }
    }
    let n = net.junction_count();
    let mut dist = vec![T::infinity(); n];
    let mut via: Vec<Option<RoadId>> = vec![None; n];
    dist[origin] = T::zero();
    let mut heap = BinaryHeap::new();
    heap.push(Entry {
        dist: T::zero(),
        node: origin,
    });
    while let Some(Entry { dist: d, node }) = heap.pop() {
        if d > dist[node] {
            continue;
        }
        if node == dest {
            break;
        }
        for &r in net.outgoing(node) {
            let road = net.road(r);
            let nd = d + road.length;
            if nd < dist[road.to] {
                dist[road.to] = nd;
                via[road.to] = Some(r);
                heap.push(Entry {
                    dist: nd,
                    node: road.to,
                });
            }
        }
    }
    if !dist[dest].is_finite() {
        return Ok(None);
    }
    let mut path = Vec::new();
    let mut at = dest;
    while let Some(r) = via[at] {
        path.push(r);
        at = net.road(r).from;
    }
    path.reverse();
    Ok(Some(path))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkStats {
    pub node_count: usize,
    /// Undirected edges, i.e. half the directed road count.
    pub edge_count: usize,
    pub mean_degree: f64,
    /// Longest shortest-path distance between any two junctions, metres.
    pub diameter: f64,
}

pub fn network_stats<T: Scalar>(net: &Network<T>) -> Result<NetworkStats, NetError> {
    let node_count = net.junction_count();
    let edge_count = net.road_count() / 2;
    let mut diameter = T::zero();
    for j in 0..node_count {
        let map = shortest_distance_map(net, j)?;
        for &d in map.as_slice() {
            if !d.is_finite() {
                return Err(NetError::Disconnected);
            }
            diameter = diameter.max(d);
        }
    }
    Ok(NetworkStats {
        node_count,
        edge_count,
        mean_degree: 2.0 * edge_count as f64 / node_count as f64,
        diameter: diameter.as_f64(),
    })
}
