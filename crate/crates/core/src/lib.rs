//! Coverage-based decentralised vehicle routing on a discrete-time road
//! network simulator.
//!
//! At every junction a vehicle picks the outgoing road minimising a convex
//! combination of a normalised remaining-distance term and a saturating
//! congestion term, weighted by `alpha`. The crate provides the road network
//! model and topology generators ([`netgraph`]), the routers ([`routing`]),
//! a mesoscopic simulator ([`engine`]), delay statistics and congestion
//! thresholds ([`metrics`]) and an experiment harness ([`sweep`]).
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix it to `f64`.

pub mod engine;
pub mod metrics;
pub mod netgraph;
pub mod routing;
pub mod scalar;
pub mod sweep;

pub use scalar::Scalar;

pub type Network = netgraph::Network<f64>;
pub type CoverageParams = routing::CoverageParams<f64>;
pub type RouterKind = routing::RouterKind<f64>;
pub type SimConfig = engine::SimConfig<f64>;
pub type Simulation = engine::Simulation<f64>;
pub type SimResult = engine::SimResult<f64>;
pub type TripRecord = engine::TripRecord<f64>;

pub type Network32 = netgraph::Network<f32>;
pub type CoverageParams32 = routing::CoverageParams<f32>;
pub type RouterKind32 = routing::RouterKind<f32>;
pub type SimConfig32 = engine::SimConfig<f32>;
pub type SimResult32 = engine::SimResult<f32>;
