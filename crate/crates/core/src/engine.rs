//! Discrete-time mesoscopic traffic simulation.
//!
//! Each step runs four phases in a fixed order:
//!
//! 1. generate new trips and place queued and new vehicles on their first road,
//! 2. advance every moving vehicle at its road's occupancy-dependent speed,
//! 3. let vehicles waiting at a road head cross (or arrive), in ascending id order,
//! 4. record the network's mean occupancy.
//!
//! A vehicle that reaches the head of its road part-way through a step and
//! crosses in phase 3 spends the rest of the step on its next road, so no
//! time is lost to step boundaries. A vehicle blocked by a full road
//! retries, re-running its router, every following step.

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::netgraph::{
    shortest_distance_map, DistanceMap, JunctionId, NetError, Network, Road, RoadId,
};
use crate::routing::{Decision, NormConstants, RouterKind, RoutingError};
use crate::scalar::Scalar;

pub const DEFAULT_DURATION: f64 = 3600.0;
pub const DEFAULT_DT: f64 = 1.0;
pub const DEFAULT_V_MAX: f64 = 13.9;
pub const DEFAULT_V_MIN: f64 = 1.0;

/// Resolution of the constant-rate accumulator, in vehicles per step.
const RATE_SCALE: f64 = 1e9;

#[derive(Debug, Error, PartialEq)]
pub enum SimError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Routing(#[from] RoutingError),
    #[error(transparent)]
    Net(#[from] NetError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GenMode {
    /// Poisson-distributed count with mean `lambda * dt` each step.
    Poisson,
    /// Deterministic integer stream whose running mean is `lambda * dt`.
    Constant,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TripMode {
    /// Origin uniform over junctions, destination uniform over the rest.
    UniformRandomOd,
    FixedOd {
        origin: JunctionId,
        dest: JunctionId,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct SimConfig<T = f64> {
    /// Seconds.
    pub duration: T,
    /// Seconds per step.
    pub dt: T,
    /// Vehicles generated per second (per step when `dt = 1`).
    pub lambda: f64,
    pub gen_mode: GenMode,
    pub router: RouterKind<T>,
    pub trip_mode: TripMode,
    pub seed: u64,
    /// Free-flow speed, m/s.
    pub v_max: T,
    /// Speed on a jammed road, m/s.
    pub v_min: T,
}

impl<T: Scalar> SimConfig<T> {
    /// One hour of constant-rate random trips with the given router.
    pub fn new(router: RouterKind<T>, lambda: f64, seed: u64) -> Self {
        Self {
            duration: T::of(DEFAULT_DURATION),
            dt: T::of(DEFAULT_DT),
            lambda,
            gen_mode: GenMode::Constant,
            router,
            trip_mode: TripMode::UniformRandomOd,
            seed,
            v_max: T::of(DEFAULT_V_MAX),
            v_min: T::of(DEFAULT_V_MIN),
        }
    }

    pub fn validate(&self, net: &Network<T>) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::Config(m));
        if !(self.duration > T::zero()) || !self.duration.is_finite() {
            return bad(format!("duration must be positive, got {}", self.duration));
        }
        if !(self.dt > T::zero()) || !self.dt.is_finite() {
            return bad(format!("dt must be positive, got {}", self.dt));
        }
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return bad(format!("lambda must be non-negative, got {}", self.lambda));
        }
        if !(self.v_min > T::zero()) || !(self.v_max > self.v_min) || !self.v_max.is_finite() {
            return bad(format!(
                "need v_max > v_min > 0, got v_max {} v_min {}",
                self.v_max, self.v_min
            ));
        }
        if let RouterKind::Coverage(p) = &self.router {
            p.validate()?;
        }
        if let TripMode::FixedOd { origin, dest } = self.trip_mode {
            for j in [origin, dest] {
                if j >= net.junction_count() {
                    return Err(NetError::UnknownJunction(j).into());
                }
            }
            if origin == dest {
                return bad(format!(
                    "fixed trip has origin equal to destination ({origin})"
                ));
            }
        }
        Ok(())
    }

    pub fn steps(&self) -> u64 {
        (self.duration / self.dt).as_f64().round().max(1.0) as u64
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VehicleState {
    Moving,
    WaitingAtHead,
    Arrived,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Vehicle<T> {
    pub id: u64,
    pub origin: JunctionId,
    pub dest: JunctionId,
    pub current_road: RoadId,
    /// Metres from the tail of the current road.
    pub offset: T,
    pub spawn_time: T,
    pub state: VehicleState,
    /// Instant the vehicle reached the head of its current road.
    pub head_time: T,
    pub free_flow_time: T,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct TripRecord<T = f64> {
    pub vehicle_id: u64,
    pub origin: JunctionId,
    pub dest: JunctionId,
    pub spawn_time: T,
    /// `None` when the trip was unfinished at the horizon.
    pub arrival_time: Option<T>,
    pub free_flow_time: T,
}

impl<T: Scalar> TripRecord<T> {
    pub fn is_censored(&self) -> bool {
        self.arrival_time.is_none()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimResult<T = f64> {
    /// One record per generated trip, ordered by vehicle id.
    pub trips: Vec<TripRecord<T>>,
    /// Trips requested by the generator.
    pub generated: u64,
    /// Trips that got onto the road network.
    pub spawned: u64,
    pub completed: u64,
    /// Unfinished at the horizon: `in_flight + queued`.
    pub censored: u64,
    /// On a road at the horizon.
    pub in_flight: u64,
    /// Still waiting to enter at their origin at the horizon.
    pub queued: u64,
    /// Times a spawn was postponed because its origin was saturated.
    pub deferred_spawns: u64,
    /// Mean road occupancy after each step.
    pub occupancy_series: Vec<f64>,
    /// End of the simulated interval, seconds.
    pub horizon: T,
}

/// Per-step vehicle counts for either generation mode.
#[derive(Clone, Debug)]
pub struct SpawnStream {
    mode: GenMode,
    per_step: f64,
    scaled: u128,
    poisson: Option<Poisson<f64>>,
}

impl SpawnStream {
    pub fn new(mode: GenMode, lambda: f64, dt: f64) -> Self {
        let per_step = lambda * dt;
        let poisson =
            (per_step > 0.0).then(|| Poisson::new(per_step).expect("positive finite rate"));
        Self {
            mode,
            per_step,
            scaled: (per_step * RATE_SCALE).round() as u128,
            poisson,
        }
    }

    /// Number of vehicles to generate during step `t`.
    pub fn count<R: Rng + ?Sized>(&self, t: u64, rng: &mut R) -> u64 {
        if self.per_step <= 0.0 {
            return 0;
        }
        match self.mode {
            GenMode::Poisson => self.poisson.as_ref().map_or(0, |p| p.sample(rng) as u64),
            GenMode::Constant => {
                let scale = RATE_SCALE as u128;
                let upto = |k: u64| self.scaled * k as u128 / scale;
                (upto(t + 1) - upto(t)) as u64
            }
        }
    }
}

/// Occupancy-dependent speed: `max(v_min, v_free * (1 - eta))`, where the
/// free speed is the lower of `v_max` and the road's limit.
pub fn speed_on_road<T: Scalar>(road: &Road<T>, cfg: &SimConfig<T>) -> T {
    let free = cfg.v_max.min(road.speed_limit);
    cfg.v_min.max(free * (T::one() - road.occupancy()))
}

/// Speed of a vehicle already on `road`: the speed law applied to the
/// occupancy of the other vehicles there, so a lone car drives at free speed.
pub fn occupant_speed<T: Scalar>(road: &Road<T>, cfg: &SimConfig<T>) -> T {
    let free = cfg.v_max.min(road.speed_limit);
    let others =
        T::of_usize(road.load.saturating_sub(1) as usize) / T::of_usize(road.capacity as usize);
    cfg.v_min.max(free * (T::one() - others))
}

/// Moves a vehicle along its road for one step starting at `now`.
pub fn advance_vehicle<T: Scalar>(
    vehicle: &mut Vehicle<T>,
    net: &Network<T>,
    cfg: &SimConfig<T>,
    now: T,
) {
    if vehicle.state != VehicleState::Moving {
        return;
    }
    let road = net.road(vehicle.current_road);
    let remaining = road.length - vehicle.offset;
    if remaining <= T::zero() {
        vehicle.offset = road.length;
        vehicle.state = VehicleState::WaitingAtHead;
        vehicle.head_time = now;
        return;
    }
    let speed = occupant_speed(road, cfg);
    let needed = remaining / speed;
    if needed <= cfg.dt {
        vehicle.offset = road.length;
        vehicle.state = VehicleState::WaitingAtHead;
        vehicle.head_time = now + needed;
    } else {
        vehicle.offset = vehicle.offset + speed * cfg.dt;
    }
}

#[derive(Clone, Debug)]
struct QueuedTrip<T> {
    id: u64,
    origin: JunctionId,
    dest: JunctionId,
    spawn_time: T,
    free_flow_time: T,
}

/// Distance maps and normalisers per destination, built on first use.
#[derive(Clone, Debug, Default)]
pub struct RouteCache<T> {
    maps: Vec<Option<(DistanceMap<T>, NormConstants<T>)>>,
}

impl<T: Scalar> RouteCache<T> {
    pub fn new(junctions: usize) -> Self {
        Self {
            maps: vec![None; junctions],
        }
    }

    pub fn get(
        &mut self,
        net: &Network<T>,
        dest: JunctionId,
    ) -> Result<(&DistanceMap<T>, NormConstants<T>), NetError> {
        if self.maps[dest].is_none() {
            let map = shortest_distance_map(net, dest)?;
            let norms = NormConstants::new(net, &map);
            self.maps[dest] = Some((map, norms));
        }
        let (map, norms) = self.maps[dest].as_ref().expect("filled above");
        Ok((map, *norms))
    }
}

/// A broken engine invariant, reported by [`Simulation::check_invariants`].
#[derive(Debug, Error, PartialEq)]
#[error("step {step}: {message}")]
pub struct InvariantViolation {
    pub step: u64,
    pub message: String,
}

/// A running simulation.
#[derive(Clone, Debug)]
pub struct Simulation<T = f64> {
    cfg: SimConfig<T>,
    net: Network<T>,
    rng: ChaCha8Rng,
    stream: SpawnStream,
    cache: RouteCache<T>,
    step: u64,
    steps: u64,
    next_id: u64,
    /// Active vehicles in ascending id order.
    vehicles: Vec<Vehicle<T>>,
    queue: VecDeque<QueuedTrip<T>>,
    trips: Vec<TripRecord<T>>,
    generated: u64,
    spawned: u64,
    completed: u64,
    deferred_spawns: u64,
    occupancy_series: Vec<f64>,
}

impl<T: Scalar> Simulation<T> {
    pub fn new(cfg: SimConfig<T>, mut net: Network<T>) -> Result<Self, SimError> {
        cfg.validate(&net)?;
        net.clear_loads();
        let n = net.junction_count();
        Ok(Self {
            stream: SpawnStream::new(cfg.gen_mode, cfg.lambda, cfg.dt.as_f64()),
            rng: ChaCha8Rng::seed_from_u64(cfg.seed),
            steps: cfg.steps(),
            cfg,
            net,
            cache: RouteCache::new(n),
            step: 0,
            next_id: 0,
            vehicles: Vec::new(),
            queue: VecDeque::new(),
            trips: Vec::new(),
            generated: 0,
            spawned: 0,
            completed: 0,
            deferred_spawns: 0,
            occupancy_series: Vec::new(),
        })
    }

    pub fn config(&self) -> &SimConfig<T> {
        &self.cfg
    }

    pub fn network(&self) -> &Network<T> {
        &self.net
    }

    pub fn vehicles(&self) -> &[Vehicle<T>] {
        &self.vehicles
    }

    /// Trips finished so far.
    pub fn completed_trips(&self) -> &[TripRecord<T>] {
        &self.trips
    }

    pub fn step_index(&self) -> u64 {
        self.step
    }

    pub fn now(&self) -> T {
        T::of(self.step as f64) * self.cfg.dt
    }

    pub fn is_finished(&self) -> bool {
        self.step >= self.steps
    }

    pub fn queued(&self) -> usize {
        self.queue.len()
    }

    /// Advances the simulation by one step. Does nothing past the horizon.
    pub fn step(&mut self) -> Result<(), SimError> {
        if self.is_finished() {
            return Ok(());
        }
        let now = self.now();
        self.spawn_phase(now)?;
        for v in &mut self.vehicles {
            advance_vehicle(v, &self.net, &self.cfg, now);
        }
        self.junction_phase(now + self.cfg.dt)?;
        let mean_occ = self
            .net
            .roads()
            .iter()
            .map(|r| r.occupancy().as_f64())
            .sum::<f64>()
            / self.net.road_count() as f64;
        self.occupancy_series.push(mean_occ);
        self.step += 1;
        Ok(())
    }

    fn spawn_phase(&mut self, now: T) -> Result<(), SimError> {
        let n = self.stream.count(self.step, &mut self.rng);
        for _ in 0..n {
            let (origin, dest) = match self.cfg.trip_mode {
                TripMode::FixedOd { origin, dest } => (origin, dest),
                TripMode::UniformRandomOd => {
                    let junctions = self.net.junction_count();
                    let origin = self.rng.random_range(0..junctions);
                    let mut dest = self.rng.random_range(0..junctions - 1);
                    if dest >= origin {
                        dest += 1;
                    }
                    (origin, dest)
                }
            };
            let (map, _) = self.cache.get(&self.net, dest)?;
            let distance = map.get(origin).ok_or(RoutingError::Unreachable {
                junction: origin,
                dest,
            })?;
            self.queue.push_back(QueuedTrip {
                id: self.next_id,
                origin,
                dest,
                spawn_time: now,
                free_flow_time: distance / self.cfg.v_max,
            });
            self.next_id += 1;
            self.generated += 1;
        }

        let mut out_of_order = false;
        let mut still_queued = VecDeque::with_capacity(self.queue.len());
        while let Some(trip) = self.queue.pop_front() {
            let (map, norms) = self.cache.get(&self.net, trip.dest)?;
            let Some(decision) = Decision::at_origin(&self.net, trip.origin, map, norms) else {
                self.deferred_spawns += 1;
                still_queued.push_back(trip);
                continue;
            };
            let road = self.cfg.router.choose(&decision, &mut self.rng)?;
            self.net.road_mut(road).load += 1;
            self.spawned += 1;
            if self.vehicles.last().is_some_and(|v| v.id > trip.id) {
                out_of_order = true;
            }
            self.vehicles.push(Vehicle {
                id: trip.id,
                origin: trip.origin,
                dest: trip.dest,
                current_road: road,
                offset: T::zero(),
                spawn_time: trip.spawn_time,
                state: VehicleState::Moving,
                head_time: now,
                free_flow_time: trip.free_flow_time,
            });
        }
        self.queue = still_queued;
        if out_of_order {
            self.vehicles.sort_by_key(|v| v.id);
        }
        Ok(())
    }

    fn junction_phase(&mut self, end: T) -> Result<(), SimError> {
        for i in 0..self.vehicles.len() {
            if self.vehicles[i].state != VehicleState::WaitingAtHead {
                continue;
            }
            let (road_id, dest) = (self.vehicles[i].current_road, self.vehicles[i].dest);
            let junction = self.net.road(road_id).to;
            if junction == dest {
                self.net.road_mut(road_id).load -= 1;
                let v = &mut self.vehicles[i];
                v.state = VehicleState::Arrived;
                self.completed += 1;
                self.trips.push(TripRecord {
                    vehicle_id: v.id,
                    origin: v.origin,
                    dest: v.dest,
                    spawn_time: v.spawn_time,
                    arrival_time: Some(v.head_time),
                    free_flow_time: v.free_flow_time,
                });
                continue;
            }
            let (map, norms) = self.cache.get(&self.net, dest)?;
            let decision = Decision::at_junction(&self.net, junction, Some(road_id), map, norms);
            let next = self.cfg.router.choose(&decision, &mut self.rng)?;
            if self.net.road(next).is_full() {
                // blocked: retry next step from the end of this one
                self.vehicles[i].head_time = end;
                continue;
            }
            self.net.road_mut(road_id).load -= 1;
            self.net.road_mut(next).load += 1;
            let road = self.net.road(next);
            let speed = occupant_speed(road, &self.cfg);
            let v = &mut self.vehicles[i];
            let slack = (end - v.head_time).max(T::zero());
            v.current_road = next;
            let travelled = speed * slack;
            if travelled < road.length {
                v.offset = travelled;
                v.state = VehicleState::Moving;
            } else {
                v.offset = road.length;
                v.head_time = end;
            }
        }
        self.vehicles.retain(|v| v.state != VehicleState::Arrived);
        Ok(())
    }

    /// Checks load bookkeeping, capacity limits, offsets and trip counters.
    pub fn check_invariants(&self) -> Result<(), InvariantViolation> {
        let fail = |message: String| {
            Err(InvariantViolation {
                step: self.step,
                message,
            })
        };
        let mut counted = vec![0u32; self.net.road_count()];
        for v in &self.vehicles {
            counted[v.current_road] += 1;
            let len = self.net.road(v.current_road).length;
            if !(v.offset >= T::zero() && v.offset <= len) {
                return fail(format!(
                    "vehicle {} offset {} outside road of length {}",
                    v.id, v.offset, len
                ));
            }
        }
        for (r, &c) in self.net.roads().iter().zip(&counted) {
            if r.load != c {
                return fail(format!(
                    "road {} load {} but {} vehicles on it",
                    r.id, r.load, c
                ));
            }
            if r.load > r.capacity {
                return fail(format!(
                    "road {} over capacity: {} > {}",
                    r.id, r.load, r.capacity
                ));
            }
        }
        let in_flight = self.vehicles.len() as u64;
        if self.net.total_load() != in_flight {
            return fail("total load differs from vehicles in flight".into());
        }
        if self.spawned != self.completed + in_flight {
            return fail(format!(
                "spawned {} != completed {} + in flight {}",
                self.spawned, self.completed, in_flight
            ));
        }
        if self.generated != self.spawned + self.queue.len() as u64 {
            return fail("generated trips do not match spawned plus queued".into());
        }
        for t in &self.trips {
            let arrival = t.arrival_time.expect("completed trips only");
            let slack = T::of(1e-9) * t.free_flow_time.max(T::one());
            if arrival - t.spawn_time < t.free_flow_time - slack {
                return fail(format!("vehicle {} beat its free-flow time", t.vehicle_id));
            }
        }
        Ok(())
    }

    /// Censors everything still in the system and returns the run outcome.
    pub fn finish(mut self) -> SimResult<T> {
        let in_flight = self.vehicles.len() as u64;
        let queued = self.queue.len() as u64;
        let censor = |id, origin, dest, spawn_time, free_flow_time| TripRecord {
            vehicle_id: id,
            origin,
            dest,
            spawn_time,
            arrival_time: None,
            free_flow_time,
        };
        for v in &self.vehicles {
            self.trips.push(censor(
                v.id,
                v.origin,
                v.dest,
                v.spawn_time,
                v.free_flow_time,
            ));
        }
        for q in &self.queue {
            self.trips.push(censor(
                q.id,
                q.origin,
                q.dest,
                q.spawn_time,
                q.free_flow_time,
            ));
        }
        self.trips.sort_by_key(|t| t.vehicle_id);
        SimResult {
            trips: self.trips,
            generated: self.generated,
            spawned: self.spawned,
            completed: self.completed,
            censored: in_flight + queued,
            in_flight,
            queued,
            deferred_spawns: self.deferred_spawns,
            occupancy_series: self.occupancy_series,
            horizon: T::of(self.step as f64) * self.cfg.dt,
        }
    }
}

/// Runs a full simulation of `net` under `cfg`.
pub fn run<T: Scalar>(cfg: &SimConfig<T>, net: &Network<T>) -> Result<SimResult<T>, SimError> {
    let mut sim = Simulation::new(*cfg, net.clone())?;
    while !sim.is_finished() {
        sim.step()?;
    }
    Ok(sim.finish())
}

/// Writes the trip log: a header row, then one comma-separated row per trip
/// with `CENSORED` in place of a missing arrival time.
pub fn write_trip_log<T: Scalar, W: std::io::Write>(
    trips: &[TripRecord<T>],
    out: W,
) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRIP_LOG_HEADER)?;
    for t in trips {
        w.write_record([
            t.vehicle_id.to_string(),
            t.origin.to_string(),
            t.dest.to_string(),
            t.spawn_time.to_string(),
            t.arrival_time
                .map_or_else(|| "CENSORED".to_string(), |a| a.to_string()),
            t.free_flow_time.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub const TRIP_LOG_HEADER: [&str; 6] = [
    "vehicle_id",
    "origin",
    "dest",
    "spawn_time",
    "arrival_time",
    "free_flow_time",
];
