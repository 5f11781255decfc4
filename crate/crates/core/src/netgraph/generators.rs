use std::collections::HashSet;
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Junction, JunctionId, NetError, Network, DEFAULT_EDGE_LENGTH, DEFAULT_SPEED_LIMIT};
use crate::scalar::Scalar;

/// Rewires applied to the 10x10 grid for the `random` preset.
pub const PRESET_RANDOM_REWIRES: usize = 50;
pub const PRESET_RANDOM_SEED: u64 = 2015;
pub const PRESET_SCALE_FREE_SEED: u64 = 48;

const REWIRE_ATTEMPTS: usize = 1000;
const LAYOUT_ITERATIONS: usize = 500;

/// Regular `rows x cols` lattice with `edge_len` between neighbours.
///
/// Junction `r * cols + c` sits at `(c * edge_len, r * edge_len)`.
pub fn build_grid<T: Scalar>(
    rows: usize,
    cols: usize,
    edge_len: f64,
) -> Result<Network<T>, NetError> {
    if rows == 0 || cols == 0 || rows * cols < 2 {
        return Err(NetError::Degenerate(format!(
            "{rows}x{cols} grid has fewer than two junctions"
        )));
    }
    if !(edge_len > 0.0) || !edge_len.is_finite() {
        return Err(NetError::Degenerate(format!("edge length {edge_len}")));
    }
    let junctions = (0..rows * cols)
        .map(|id| Junction {
            id,
            x: T::of((id % cols) as f64 * edge_len),
            y: T::of((id / cols) as f64 * edge_len),
        })
        .collect();
    let len = T::of(edge_len);
    let mut edges = Vec::with_capacity(2 * rows * cols);
    for r in 0..rows {
        for c in 0..cols {
            let id = r * cols + c;
            if c + 1 < cols {
                edges.push((id, id + 1, len));
            }
            if r + 1 < rows {
                edges.push((id, id + cols, len));
            }
        }
    }
    Network::undirected(junctions, &edges, T::of(DEFAULT_SPEED_LIMIT))
}

/// Concentric ring roads joined by radial spokes.
///
/// Ring `i` (from 0) has radius `(i + 1) * ring_spacing`; junction
/// `i * spokes + s` sits at angle `2 pi s / spokes` on it.
pub fn build_spiderweb<T: Scalar>(
    rings: usize,
    spokes: usize,
    ring_spacing: f64,
) -> Result<Network<T>, NetError> {
    if rings < 1 {
        return Err(NetError::Degenerate(
            "spiderweb needs at least one ring".into(),
        ));
    }
    if spokes < 3 {
        return Err(NetError::Degenerate(format!(
            "{spokes} spokes cannot close a ring"
        )));
    }
    if !(ring_spacing > 0.0) || !ring_spacing.is_finite() {
        return Err(NetError::Degenerate(format!("ring spacing {ring_spacing}")));
    }
    let mut pos = Vec::with_capacity(rings * spokes);
    for ring in 0..rings {
        let radius = (ring + 1) as f64 * ring_spacing;
        for s in 0..spokes {
            let theta = 2.0 * PI * s as f64 / spokes as f64;
            pos.push((radius * theta.cos(), radius * theta.sin()));
        }
    }
    let mut pairs = Vec::new();
    for ring in 0..rings {
        for s in 0..spokes {
            let id = ring * spokes + s;
            pairs.push((id, ring * spokes + (s + 1) % spokes));
            if ring + 1 < rings {
                pairs.push((id, id + spokes));
            }
        }
    }
    geometric(&pos, &pairs)
}

/// Rewires `rewires` edges of `base` by moving one endpoint of a random edge
/// to a random junction not already adjacent to the kept endpoint.
///
/// Self-loops, duplicate edges and disconnecting moves are rejected and
/// retried. Untouched edges keep their length; rewired ones take the
/// straight-line distance between their new endpoints.
pub fn build_random_rewire<T: Scalar>(
    base: &Network<T>,
    rewires: usize,
    seed: u64,
) -> Result<Network<T>, NetError> {
    if rewires == 0 {
        return Ok(base.clone());
    }
    let n = base.junction_count();
    let mut edges: Vec<(JunctionId, JunctionId, T)> = base
        .roads()
        .iter()
        .filter(|r| r.from < r.to)
        .map(|r| (r.from, r.to, r.length))
        .collect();
    let mut present: HashSet<(JunctionId, JunctionId)> =
        edges.iter().map(|&(a, b, _)| (a, b)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let js = base.junctions();
    let dist = |a: JunctionId, b: JunctionId| {
        let (dx, dy) = (js[a].x - js[b].x, js[a].y - js[b].y);
        (dx * dx + dy * dy).sqrt()
    };

    for _ in 0..rewires {
        let mut done = false;
        for _ in 0..REWIRE_ATTEMPTS {
            let idx = rng.random_range(0..edges.len());
            let (a, b, len) = edges[idx];
            let (keep, _) = if rng.random_bool(0.5) { (a, b) } else { (b, a) };
            let target = rng.random_range(0..n);
            let key = (keep.min(target), keep.max(target));
            if target == keep || present.contains(&key) || !(dist(keep, target) > T::zero()) {
                continue;
            }
            present.remove(&(a, b));
            present.insert(key);
            edges[idx] = (key.0, key.1, dist(keep, target));
            if connected(n, &edges) {
                done = true;
                break;
            }
            present.remove(&key);
            present.insert((a, b));
            edges[idx] = (a, b, len);
        }
        if !done {
            return Err(NetError::RewireExhausted(REWIRE_ATTEMPTS));
        }
    }
    let speed = base.roads()[0].speed_limit;
    Network::undirected(js.to_vec(), &edges, speed)
}

/// Connected preferential-attachment graph with exactly `target_edges`
/// undirected edges.
///
/// A random tree grows by attaching each new junction to an existing one
/// chosen proportionally to degree; the remaining edges join degree-weighted
/// pairs. Junctions are then placed by a force-directed layout scaled to a
/// mean road length of 100 m.
pub fn build_scale_free<T: Scalar>(
    nodes: usize,
    target_edges: usize,
    seed: u64,
) -> Result<Network<T>, NetError> {
    if nodes < 2 {
        return Err(NetError::Degenerate(
            "scale-free graph needs at least two junctions".into(),
        ));
    }
    if target_edges < nodes - 1 {
        return Err(NetError::Degenerate(format!(
            "{target_edges} edges cannot connect {nodes} junctions"
        )));
    }
    if target_edges > nodes * (nodes - 1) / 2 {
        return Err(NetError::Degenerate(format!(
            "{target_edges} edges exceed a complete graph on {nodes}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // each edge contributes both endpoints, so a uniform pick is degree-weighted
    let mut stubs: Vec<JunctionId> = vec![0, 1];
    let mut pairs = vec![(0, 1)];
    let mut present: HashSet<(JunctionId, JunctionId)> = HashSet::from([(0, 1)]);
    for v in 2..nodes {
        let u = stubs[rng.random_range(0..stubs.len())];
        pairs.push((u, v));
        present.insert((u, v));
        stubs.extend([u, v]);
    }
    let mut misses = 0usize;
    while pairs.len() < target_edges {
        let (u, v) = if misses < 10_000 {
            (
                stubs[rng.random_range(0..stubs.len())],
                stubs[rng.random_range(0..stubs.len())],
            )
        } else {
            // dense corner case: fall back to uniform pairs
            (rng.random_range(0..nodes), rng.random_range(0..nodes))
        };
        let key = (u.min(v), u.max(v));
        if u == v || present.contains(&key) {
            misses += 1;
            continue;
        }
        present.insert(key);
        pairs.push(key);
        stubs.extend([u, v]);
    }
    let pos = force_layout(nodes, &pairs, &mut rng);
    geometric(&pos, &pairs)
}

/// Fruchterman-Reingold spring embedding, rescaled so that the mean edge
/// length is [`DEFAULT_EDGE_LENGTH`].
fn force_layout(
    n: usize,
    pairs: &[(JunctionId, JunctionId)],
    rng: &mut ChaCha8Rng,
) -> Vec<(f64, f64)> {
    let mut pos: Vec<(f64, f64)> = (0..n)
        .map(|_| (rng.random::<f64>(), rng.random::<f64>()))
        .collect();
    let k = (1.0 / n as f64).sqrt();
    let mut temp = 0.1;
    let cooling = temp / LAYOUT_ITERATIONS as f64;
    let mut disp = vec![(0.0, 0.0); n];
    for _ in 0..LAYOUT_ITERATIONS {
        disp.iter_mut().for_each(|d| *d = (0.0, 0.0));
        for i in 0..n {
            for j in (i + 1)..n {
                let (dx, dy) = (pos[i].0 - pos[j].0, pos[i].1 - pos[j].1);
                let d = (dx * dx + dy * dy).sqrt().max(1e-9);
                let f = k * k / d;
                disp[i].0 += dx / d * f;
                disp[i].1 += dy / d * f;
                disp[j].0 -= dx / d * f;
                disp[j].1 -= dy / d * f;
            }
        }
        for &(a, b) in pairs {
            let (dx, dy) = (pos[a].0 - pos[b].0, pos[a].1 - pos[b].1);
            let d = (dx * dx + dy * dy).sqrt().max(1e-9);
            let f = d * d / k;
            disp[a].0 -= dx / d * f;
            disp[a].1 -= dy / d * f;
            disp[b].0 += dx / d * f;
            disp[b].1 += dy / d * f;
        }
        for (p, d) in pos.iter_mut().zip(&disp) {
            let len = (d.0 * d.0 + d.1 * d.1).sqrt().max(1e-12);
            let step = len.min(temp);
            p.0 += d.0 / len * step;
            p.1 += d.1 / len * step;
        }
        temp = (temp - cooling).max(1e-4);
    }
    let mean = pairs
        .iter()
        .map(|&(a, b)| ((pos[a].0 - pos[b].0).powi(2) + (pos[a].1 - pos[b].1).powi(2)).sqrt())
        .sum::<f64>()
        / pairs.len() as f64;
    let scale = DEFAULT_EDGE_LENGTH / mean;
    let (x0, y0) = pos.iter().fold((f64::INFINITY, f64::INFINITY), |m, p| {
        (m.0.min(p.0), m.1.min(p.1))
    });
    pos.iter()
        .map(|p| ((p.0 - x0) * scale, (p.1 - y0) * scale))
        .collect()
}

fn geometric<T: Scalar>(
    pos: &[(f64, f64)],
    pairs: &[(JunctionId, JunctionId)],
) -> Result<Network<T>, NetError> {
    let junctions = pos
        .iter()
        .enumerate()
        .map(|(id, p)| Junction {
            id,
            x: T::of(p.0),
            y: T::of(p.1),
        })
        .collect();
    let edges: Vec<_> = pairs
        .iter()
        .map(|&(a, b)| {
            let len = ((pos[a].0 - pos[b].0).powi(2) + (pos[a].1 - pos[b].1).powi(2)).sqrt();
            (a, b, T::of(len))
        })
        .collect();
    Network::undirected(junctions, &edges, T::of(DEFAULT_SPEED_LIMIT))
}

fn connected<T>(n: usize, edges: &[(JunctionId, JunctionId, T)]) -> bool {
    let mut adj = vec![Vec::new(); n];
    for &(a, b, _) in edges {
        adj[a].push(b);
        adj[b].push(a);
    }
    let mut seen = vec![false; n];
    let mut stack = vec![0];
    seen[0] = true;
    let mut count = 1;
    while let Some(j) = stack.pop() {
        for &k in &adj[j] {
            if !seen[k] {
                seen[k] = true;
                count += 1;
                stack.push(k);
            }
        }
    }
    count == n
}

/// The five reference topologies.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    Grid5,
    Grid10,
    Random,
    Spiderweb,
    #[serde(rename = "scalefree")]
    ScaleFree,
}

impl Preset {
    pub const ALL: [Preset; 5] = [
        Preset::Grid5,
        Preset::Grid10,
        Preset::Random,
        Preset::Spiderweb,
        Preset::ScaleFree,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Grid5 => "grid5",
            Preset::Grid10 => "grid10",
            Preset::Random => "random",
            Preset::Spiderweb => "spiderweb",
            Preset::ScaleFree => "scalefree",
        }
    }

    pub fn build<T: Scalar>(self) -> Network<T> {
        let net = match self {
            Preset::Grid5 => build_grid(5, 5, DEFAULT_EDGE_LENGTH),
            Preset::Grid10 => build_grid(10, 10, DEFAULT_EDGE_LENGTH),
            Preset::Random => build_grid(10, 10, DEFAULT_EDGE_LENGTH)
                .and_then(|g| build_random_rewire(&g, PRESET_RANDOM_REWIRES, PRESET_RANDOM_SEED)),
            Preset::Spiderweb => build_spiderweb(5, 10, DEFAULT_EDGE_LENGTH),
            Preset::ScaleFree => build_scale_free(48, 58, PRESET_SCALE_FREE_SEED),
        };
        net.expect("preset parameters are valid")
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = NetError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| NetError::UnknownPreset(s.to_string()))
    }
}
