//! `covroute`: generate networks, run simulations, sweep and compare routers.
//!
//! Exit codes: 0 success, 2 configuration or usage error, 3 runtime error.

mod config;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{anyhow, Context, Result};
use clap::{Args, Parser, Subcommand};
use covroute::engine::{run, write_trip_log, GenMode};
use covroute::metrics::{run_metrics, DELAY_CAP};
use covroute::netgraph::{network_stats, Preset};
use covroute::sweep::{
    compare_routers, emit_csv, emit_heatmap_grid, run_sweep, RouterChoice, RouterReport,
};
use covroute::Network;
use serde::Serialize;
use sha2::{Digest, Sha256};

use config::{Config, Overrides};

const EXIT_CONFIG: u8 = 2;
const EXIT_RUNTIME: u8 = 3;

#[derive(Parser, Debug)]
#[command(
    name = "covroute",
    version,
    about = "Coverage-based vehicle routing simulator"
)]
struct Cli {
    /// Print the built-in default configuration as TOML and exit.
    #[arg(long)]
    print_defaults: bool,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Network generation and statistics.
    #[command(subcommand)]
    Net(NetCommand),
    /// Single simulation runs.
    #[command(subcommand)]
    Sim(SimCommand),
    /// Alpha x lambda sweep writing CSV, heatmap and manifest.
    Sweep(SweepArgs),
    /// Onset rate of each router on one network, with gain over shortest path.
    Compare(SweepArgs),
}

#[derive(Subcommand, Debug)]
enum NetCommand {
    /// Write a preset network to a JSON file.
    Generate {
        #[arg(long)]
        preset: Preset,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print node count, edge count, mean degree and diameter.
    Stats {
        /// JSON network file.
        file: Option<PathBuf>,
        #[arg(long, conflicts_with = "file")]
        preset: Option<Preset>,
    },
}

#[derive(Subcommand, Debug)]
enum SimCommand {
    /// Run one simulation, write its trip log and print metrics.
    Run {
        #[command(flatten)]
        common: CommonArgs,
        /// Trip log destination (CSV); a manifest is written beside it.
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long)]
    replicates: Option<u32>,
    /// Worker threads; defaults to all cores.
    #[arg(long)]
    jobs: Option<usize>,
    /// Output directory; must not exist yet.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct CommonArgs {
    /// TOML configuration; omitted sections take the defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, conflicts_with = "net")]
    preset: Option<Preset>,
    /// JSON network file.
    #[arg(long)]
    net: Option<PathBuf>,
    #[arg(long)]
    router: Option<RouterChoice>,
    #[arg(long)]
    alpha: Option<f64>,
    /// Vehicles generated per second.
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long, value_parser = parse_gen_mode)]
    gen_mode: Option<GenMode>,
    /// Simulated seconds.
    #[arg(long)]
    duration: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
}

fn parse_gen_mode(s: &str) -> Result<GenMode, String> {
    match s {
        "poisson" => Ok(GenMode::Poisson),
        "constant" => Ok(GenMode::Constant),
        _ => Err(format!(
            "unknown generation mode `{s}` (expected poisson or constant)"
        )),
    }
}

/// An error tagged with the exit code it maps to.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

trait Classify<T> {
    fn config_err(self) -> Result<T, Failure>;
    fn runtime_err(self) -> Result<T, Failure>;
}

impl<T, E: Into<anyhow::Error>> Classify<T> for Result<T, E> {
    fn config_err(self) -> Result<T, Failure> {
        self.map_err(|e| Failure {
            code: EXIT_CONFIG,
            error: e.into(),
        })
    }

    fn runtime_err(self) -> Result<T, Failure> {
        self.map_err(|e| Failure {
            code: EXIT_RUNTIME,
            error: e.into(),
        })
    }
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    started_unix: u64,
    config_path: Option<&'a Path>,
    network_sha256: String,
    outputs: Vec<String>,
    /// Fully resolved configuration, seed included.
    config: &'a Config,
}

impl<'a> Manifest<'a> {
    fn new(
        command: &'static str,
        started_unix: u64,
        config_path: Option<&'a Path>,
        net_json: &str,
        config: &'a Config,
    ) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command,
            started_unix,
            config_path,
            network_sha256: sha256_hex(net_json.as_bytes()),
            outputs: Vec::new(),
            config,
        }
    }

    fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, serde_json::to_string_pretty(self)? + "\n")?;
        Ok(())
    }
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), Failure> {
    if cli.print_defaults {
        print!("{}", Config::defaults_toml());
        return Ok(());
    }
    match cli.command {
        None => Err(anyhow!("no command given; see --help")).config_err(),
        Some(Command::Net(cmd)) => cmd_net(cmd),
        Some(Command::Sim(SimCommand::Run { common, out })) => cmd_sim(&common, &out),
        Some(Command::Sweep(args)) => cmd_sweep(&args),
        Some(Command::Compare(args)) => cmd_compare(&args),
    }
}

fn cmd_net(cmd: NetCommand) -> Result<(), Failure> {
    match cmd {
        NetCommand::Generate { preset, out } => {
            let net: Network = preset.build();
            net.save(&out).runtime_err()?;
            println!("wrote {} to {}", preset, out.display());
        }
        NetCommand::Stats { file, preset } => {
            let net: Network = match (file, preset) {
                (Some(f), _) => Network::load(&f)
                    .with_context(|| format!("loading {}", f.display()))
                    .config_err()?,
                (None, Some(p)) => p.build(),
                (None, None) => {
                    return Err(anyhow!("give a network file or --preset")).config_err()
                }
            };
            let s = network_stats(&net).runtime_err()?;
            println!("nodes        {}", s.node_count);
            println!("edges        {}", s.edge_count);
            println!("mean_degree  {}", s.mean_degree);
            println!("diameter     {}", s.diameter);
        }
    }
    Ok(())
}

fn overrides(c: &CommonArgs, replicates: Option<u32>) -> Overrides {
    Overrides {
        preset: c.preset,
        net: c.net.clone(),
        router: c.router,
        alpha: c.alpha,
        lambda: c.lambda,
        gen_mode: c.gen_mode,
        duration: c.duration,
        seed: c.seed,
        replicates,
    }
}

fn resolve(c: &CommonArgs, replicates: Option<u32>) -> Result<(Config, Network, String), Failure> {
    let cfg = Config::load(c.config.as_ref())
        .config_err()?
        .resolve(&overrides(c, replicates))
        .config_err()?;
    let (net, json) = cfg.network().config_err()?;
    Ok((cfg, net, json))
}

fn cmd_sim(c: &CommonArgs, out: &Path) -> Result<(), Failure> {
    let started = unix_now();
    let (cfg, net, net_json) = resolve(c, None)?;
    let sim_cfg = cfg.sim_config().config_err()?;
    sim_cfg.validate(&net).config_err()?;
    let result = run(&sim_cfg, &net).runtime_err()?;

    let mut buf = Vec::new();
    write_trip_log(&result.trips, &mut buf).runtime_err()?;
    fs::write(out, &buf)
        .with_context(|| format!("writing {}", out.display()))
        .runtime_err()?;
    let manifest_path = sibling(out, "manifest.json");
    let mut manifest = Manifest::new("sim run", started, c.config.as_deref(), &net_json, &cfg);
    manifest.outputs.push(out.display().to_string());
    manifest.write(&manifest_path).runtime_err()?;

    println!("generated         {}", result.generated);
    println!("completed         {}", result.completed);
    println!("censored          {}", result.censored);
    let m = run_metrics(&result, DELAY_CAP)
        .context("metrics undefined")
        .runtime_err()?;
    println!("mean_travel_time  {:.3}", m.mean_travel_time);
    println!("mean_delay        {:.3}", m.mean_delay);
    println!("mean_delay_capped {:.3}", m.mean_delay_capped);
    println!("completion_rate   {:.4}", m.completion_rate);
    println!("congested         {}", m.congested);
    Ok(())
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let mut name = path
        .file_name()
        .map(|n| n.to_os_string())
        .unwrap_or_default();
    name.push(".");
    name.push(suffix);
    path.with_file_name(name)
}

/// Runs `fill` against a fresh temp directory next to `out`, then renames it
/// into place so `out` only ever appears complete.
fn atomic_dir(out: &Path, fill: impl FnOnce(&Path) -> Result<(), Failure>) -> Result<(), Failure> {
    if out.exists() {
        return Err(anyhow!("output {} already exists", out.display())).config_err();
    }
    let parent = match out.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let name = out
        .file_name()
        .ok_or_else(|| anyhow!("bad output path {}", out.display()))
        .config_err()?;
    let tmp = parent.join(format!(
        ".{}.tmp-{}",
        name.to_string_lossy(),
        std::process::id()
    ));
    fs::create_dir_all(&tmp)
        .with_context(|| format!("creating {}", tmp.display()))
        .runtime_err()?;
    let filled = fill(&tmp);
    if filled.is_err() {
        let _ = fs::remove_dir_all(&tmp);
        return filled;
    }
    fs::rename(&tmp, out)
        .with_context(|| format!("moving results to {}", out.display()))
        .runtime_err()
}

fn cmd_sweep(args: &SweepArgs) -> Result<(), Failure> {
    let started = unix_now();
    let (cfg, net, net_json) = resolve(&args.common, args.replicates)?;
    let spec = cfg.sweep_spec().config_err()?;
    spec.base.validate(&net).config_err()?;
    let out = args
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from(format!("sweep-{}", spec.topology)));
    atomic_dir(&out, |dir| {
        let cells = run_sweep(&spec, &net, args.jobs).runtime_err()?;
        emit_csv(&cells, &dir.join("sweep.csv")).runtime_err()?;
        let has_coverage = spec.routers.contains(&RouterChoice::Coverage);
        if has_coverage {
            emit_heatmap_grid(&cells, &dir.join("heatmap.txt")).runtime_err()?;
        }
        let mut manifest = Manifest::new(
            "sweep",
            started,
            args.common.config.as_deref(),
            &net_json,
            &cfg,
        );
        manifest.outputs.push("sweep.csv".into());
        if has_coverage {
            manifest.outputs.push("heatmap.txt".into());
        }
        manifest.write(&dir.join("manifest.json")).runtime_err()?;
        let failed = cells.iter().filter(|c| c.metrics().is_none()).count();
        println!(
            "{} cells ({} failed) -> {}",
            cells.len(),
            failed,
            out.display()
        );
        Ok(())
    })
}

fn capacity_text(r: &RouterReport) -> String {
    match r.capacity {
        Some(c) => c.to_string(),
        None => "below grid".into(),
    }
}

fn report_table(reports: &[RouterReport]) -> String {
    let sp = reports
        .iter()
        .find(|r| r.router == RouterChoice::ShortestPath);
    let mut out = format!(
        "{:<10} {:>6} {:>16} {:>12}\n",
        "router", "alpha", "lambda_hat", "gain_vs_sp"
    );
    for r in reports {
        let alpha = r.alpha.map_or("NA".to_string(), |a| a.to_string());
        let gain = match (r.router, sp) {
            (RouterChoice::ShortestPath, _) | (_, None) => "-".to_string(),
            (_, Some(sp)) => match r.gain_over(sp) {
                Some(g) => format!("{:+.1}%", g * 100.0),
                None if r.capacity.is_some_and(|c| c.rank().is_infinite())
                    && sp.capacity.is_some_and(|c| c.rank().is_finite()) =>
                {
                    "unbounded".into()
                }
                None => "n/a".into(),
            },
        };
        out.push_str(&format!(
            "{:<10} {:>6} {:>16} {:>12}\n",
            r.router.label(),
            alpha,
            capacity_text(r),
            gain
        ));
    }
    out
}

fn cmd_compare(args: &SweepArgs) -> Result<(), Failure> {
    let started = unix_now();
    let (cfg, net, net_json) = resolve(&args.common, args.replicates)?;
    let spec = cfg.sweep_spec().config_err()?;
    spec.base.validate(&net).config_err()?;
    let reports = compare_routers(
        &net,
        &spec.topology,
        &spec.lambdas,
        cfg.sim.alpha,
        spec.replicates,
        spec.base,
        args.jobs,
    )
    .runtime_err()?;
    let table = report_table(&reports);
    print!("{table}");
    if let Some(out) = &args.out {
        atomic_dir(out, |dir| {
            let mut f = fs::File::create(dir.join("compare.txt")).runtime_err()?;
            f.write_all(table.as_bytes()).runtime_err()?;
            let mut manifest = Manifest::new(
                "compare",
                started,
                args.common.config.as_deref(),
                &net_json,
                &cfg,
            );
            manifest.outputs.push("compare.txt".into());
            manifest.write(&dir.join("manifest.json")).runtime_err()
        })?;
    }
    Ok(())
}
