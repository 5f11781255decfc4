//! TOML run configuration, flag overrides and seed resolution.

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use covroute::engine::GenMode;
use covroute::netgraph::Preset;
use covroute::routing::{DEFAULT_ETA_CRIT, DEFAULT_SIGMA};
use covroute::sweep::{
    default_alphas, default_lambdas, RouterChoice, SweepSpec, DEFAULT_REPLICATES,
};
use covroute::{CoverageParams, Network, RouterKind, SimConfig};
use serde::{Deserialize, Serialize};

/// Environment variable consulted for the seed when neither a flag nor the
/// config file sets one.
pub const SEED_ENV: &str = "COVERAGE_ROUTER_SEED";
pub const FALLBACK_SEED: u64 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub network: NetworkSection,
    pub sim: SimSection,
    pub sweep: SweepSection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkSection {
    /// Built-in topology, used when `file` is unset.
    pub preset: Preset,
    /// JSON network file; takes precedence over `preset`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub file: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimSection {
    pub router: RouterChoice,
    pub alpha: f64,
    pub eta_crit: f64,
    pub sigma: f64,
    /// Vehicles per second.
    pub lambda: f64,
    pub gen_mode: GenMode,
    pub duration: f64,
    pub dt: f64,
    pub v_max: f64,
    pub v_min: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub alphas: Vec<f64>,
    pub lambdas: Vec<f64>,
    pub replicates: u32,
    pub routers: Vec<RouterChoice>,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            network: NetworkSection::default(),
            sim: SimSection::default(),
            sweep: SweepSection::default(),
        }
    }
}

impl Default for NetworkSection {
    fn default() -> Self {
        Self {
            preset: Preset::Grid5,
            file: None,
        }
    }
}

impl Default for SimSection {
    fn default() -> Self {
        let base = SimConfig::new(RouterKind::ShortestPath, 1.0, FALLBACK_SEED);
        Self {
            router: RouterChoice::Coverage,
            alpha: 0.8,
            eta_crit: DEFAULT_ETA_CRIT,
            sigma: DEFAULT_SIGMA,
            lambda: base.lambda,
            gen_mode: base.gen_mode,
            duration: base.duration,
            dt: base.dt,
            v_max: base.v_max,
            v_min: base.v_min,
            seed: None,
        }
    }
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            alphas: default_alphas(),
            lambdas: default_lambdas(),
            replicates: DEFAULT_REPLICATES,
            routers: vec![
                RouterChoice::Coverage,
                RouterChoice::ShortestPath,
                RouterChoice::ModifiedShortestPath,
            ],
        }
    }
}

/// Command-line values that supersede the config file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub preset: Option<Preset>,
    pub net: Option<PathBuf>,
    pub router: Option<RouterChoice>,
    pub alpha: Option<f64>,
    pub lambda: Option<f64>,
    pub gen_mode: Option<GenMode>,
    pub duration: Option<f64>,
    pub seed: Option<u64>,
    pub replicates: Option<u32>,
}

impl Config {
    pub fn load(path: Option<&PathBuf>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    pub fn defaults_toml() -> String {
        toml::to_string(&Self::default()).expect("defaults serialise")
    }

    /// Applies overrides, then fills the seed from the environment or the
    /// fallback so the result is fully pinned.
    pub fn resolve(mut self, o: &Overrides) -> Result<Self> {
        if let Some(p) = o.preset {
            self.network.preset = p;
            self.network.file = None;
        }
        if let Some(f) = &o.net {
            self.network.file = Some(f.clone());
        }
        let s = &mut self.sim;
        s.router = o.router.unwrap_or(s.router);
        s.alpha = o.alpha.unwrap_or(s.alpha);
        s.lambda = o.lambda.unwrap_or(s.lambda);
        s.gen_mode = o.gen_mode.unwrap_or(s.gen_mode);
        s.duration = o.duration.unwrap_or(s.duration);
        self.sweep.replicates = o.replicates.unwrap_or(self.sweep.replicates);
        s.seed = match (o.seed, s.seed) {
            (Some(seed), _) | (None, Some(seed)) => Some(seed),
            (None, None) => Some(match std::env::var(SEED_ENV) {
                Ok(v) => v
                    .trim()
                    .parse()
                    .with_context(|| format!("{SEED_ENV}={v:?} is not an unsigned integer"))?,
                Err(_) => FALLBACK_SEED,
            }),
        };
        Ok(self)
    }

    pub fn seed(&self) -> u64 {
        self.sim.seed.unwrap_or(FALLBACK_SEED)
    }

    /// Short name for the `topology` column.
    pub fn topology(&self) -> String {
        match &self.network.file {
            Some(f) => f
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "file".into()),
            None => self.network.preset.name().to_string(),
        }
    }

    /// The network plus the exact JSON text it was read from or would be
    /// written as, for hashing.
    pub fn network(&self) -> Result<(Network, String)> {
        match &self.network.file {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .with_context(|| format!("reading network {}", path.display()))?;
                let net = Network::from_json(&text)
                    .with_context(|| format!("loading network {}", path.display()))?;
                Ok((net, text))
            }
            None => {
                let net: Network = self.network.preset.build();
                let text = net.to_json();
                Ok((net, text))
            }
        }
    }

    pub fn coverage_params(&self) -> Result<CoverageParams> {
        let p = CoverageParams {
            alpha: self.sim.alpha,
            eta_crit: self.sim.eta_crit,
            sigma: self.sim.sigma,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn sim_config(&self) -> Result<SimConfig> {
        let router = match self.sim.router {
            RouterChoice::Coverage => RouterKind::Coverage(self.coverage_params()?),
            RouterChoice::ShortestPath => RouterKind::ShortestPath,
            RouterChoice::ModifiedShortestPath => RouterKind::ModifiedShortestPath,
        };
        let mut cfg = SimConfig::new(router, self.sim.lambda, self.seed());
        cfg.gen_mode = self.sim.gen_mode;
        cfg.duration = self.sim.duration;
        cfg.dt = self.sim.dt;
        cfg.v_max = self.sim.v_max;
        cfg.v_min = self.sim.v_min;
        Ok(cfg)
    }

    pub fn sweep_spec(&self) -> Result<SweepSpec> {
        let mut base = self.sim_config()?;
        // the sweep owns alpha; keep only the ρ shape parameters
        base.router = RouterKind::Coverage(CoverageParams {
            alpha: 1.0,
            ..self.coverage_params()?
        });
        let spec = SweepSpec {
            topology: self.topology(),
            alphas: self.sweep.alphas.clone(),
            lambdas: self.sweep.lambdas.clone(),
            replicates: self.sweep.replicates,
            routers: self.sweep.routers.clone(),
            base,
        };
        spec.validate()?;
        if spec.lambdas.len() < 2 {
            bail!("the rate grid needs at least two values");
        }
        Ok(spec)
    }
}
