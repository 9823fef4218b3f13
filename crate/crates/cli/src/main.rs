mod commands;
mod config;
mod output;

use beamhop::layout::build_layout;
use beamhop::link::{min_hops, sensing_grid};
use beamhop::scheduler::Scheme;
use clap::{Args, Parser, Subcommand};
use commands::{RunError, ScheduleCase};
use config::{ConfigError, DesignEntry, ExperimentConfig};
use output::{sha256_hex, Manifest, OutputDir};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

#[derive(Parser, Debug)]
#[command(
    name = "beamhop",
    version,
    about = "Beam layouts, hop-count sweeps and common-signaling schedules"
)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Global {
    /// JSON configuration; missing fields take the reference defaults.
    #[arg(long, short, global = true)]
    config: Option<PathBuf>,
    /// Output directory, overriding the configuration.
    #[arg(long, short, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for the SINR evaluation.
    #[arg(long, global = true, env = "BEAMHOP_THREADS")]
    threads: Option<usize>,
    /// Fail with exit code 3 when a design misses the threshold or a scheme cannot cover every hop.
    #[arg(long, global = true)]
    strict: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build beam layouts and write their beam tables.
    Layout {
        /// Designs to build; all configured designs when omitted.
        #[arg(long = "design")]
        designs: Vec<String>,
        /// Also write the hop map for this hop count.
        #[arg(long)]
        n_hops: Option<usize>,
    },
    /// Find the minimum hop count of each design.
    Sweep {
        #[arg(long = "design")]
        designs: Vec<String>,
        /// Sensing-grid spacing in km, overriding the configuration.
        #[arg(long)]
        sensing_km: Option<f64>,
    },
    /// Build common-signaling schedules.
    Schedule {
        #[arg(long = "scheme", value_parser = parse_scheme)]
        schemes: Vec<Scheme>,
        #[arg(long = "n-hops")]
        n_hops: Vec<usize>,
        /// Take the hop count from this design's minimum instead.
        #[arg(long, conflicts_with = "n_hops")]
        design: Option<String>,
        /// SSB period in ms, overriding the configuration.
        #[arg(long)]
        period: Option<u32>,
    },
    /// Run the sweep and the reference schedule comparison.
    Report {
        #[arg(long)]
        sensing_km: Option<f64>,
    },
}

fn parse_scheme(s: &str) -> Result<Scheme, String> {
    Scheme::parse(s).ok_or_else(|| format!("unknown scheme '{s}'"))
}

fn select_designs(
    cfg: &ExperimentConfig,
    names: &[String],
) -> Result<Vec<DesignEntry>, ConfigError> {
    if names.is_empty() {
        return Ok(cfg.designs.clone());
    }
    names
        .iter()
        .map(|n| {
            cfg.design_entry(n).ok_or_else(|| ConfigError::Invalid {
                field: "--design".into(),
                message: format!("unknown design '{n}'"),
            })
        })
        .collect()
}

fn run(cli: Cli) -> Result<(), RunError> {
    let mut cfg = match &cli.global.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(o) = &cli.global.out {
        cfg.output_dir = o.clone();
    }
    if let Some(t) = cli.global.threads {
        cfg.threads = Some(t);
    }
    match &cli.command {
        Command::Sweep {
            sensing_km: Some(s),
            ..
        }
        | Command::Report {
            sensing_km: Some(s),
        } => {
            cfg.sensing_spacing_km = *s;
        }
        Command::Schedule {
            period: Some(p), ..
        } => cfg.scheduler.frame.ssb_period_ms = *p,
        _ => {}
    }
    cfg.validate()?;

    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(t) = cfg.threads {
        pool = pool.num_threads(t);
    }
    // Fails only if a pool already exists, which cannot happen here.
    let _ = pool.build_global();

    // The hash covers everything that shapes the results, so not the
    // output location or the worker count.
    let mut hashed = cfg.clone();
    hashed.output_dir = PathBuf::new();
    hashed.threads = None;
    let canonical = serde_json::to_vec(&hashed).expect("config serializes");
    let command = match &cli.command {
        Command::Layout { .. } => "layout",
        Command::Sweep { .. } => "sweep",
        Command::Schedule { .. } => "schedule",
        Command::Report { .. } => "report",
    };
    let manifest = Manifest {
        tool: "beamhop",
        version: env!("CARGO_PKG_VERSION"),
        command: command.to_string(),
        config_sha256: sha256_hex(&canonical),
    };
    let mut out = OutputDir::create(&cfg.output_dir, manifest)?;
    let mut config_text = serde_json::to_string_pretty(&hashed).expect("config serializes");
    config_text.push('\n');
    out.write("config.json", config_text.as_bytes())?;

    let start = Instant::now();
    let strict = cli.global.strict;
    match cli.command {
        Command::Layout { designs, n_hops } => {
            let designs = select_designs(&cfg, &designs)?;
            commands::run_layout(&cfg, &mut out, &designs, n_hops)?;
        }
        Command::Sweep { designs, .. } => {
            let designs = select_designs(&cfg, &designs)?;
            commands::run_sweep(&cfg, &mut out, &designs, strict)?;
        }
        Command::Schedule {
            schemes,
            n_hops,
            design,
            ..
        } => {
            let schemes = if schemes.is_empty() {
                cfg.scheduler.schemes.clone()
            } else {
                schemes
            };
            let hop_counts = match design {
                Some(name) => vec![design_min_hops(&cfg, &name)?],
                None if n_hops.is_empty() => cfg.scheduler.n_hops.clone(),
                None => n_hops,
            };
            let period = cfg.scheduler.frame.ssb_period_ms;
            let mut cases = Vec::new();
            for &n in &hop_counts {
                for &scheme in &schemes {
                    cases.push(ScheduleCase {
                        scheme,
                        n_hops: n,
                        ssb_period_ms: period,
                    });
                }
            }
            if cases.iter().any(|c| c.n_hops == 0) {
                return Err(ConfigError::Invalid {
                    field: "--n-hops".into(),
                    message: "must be at least 1".into(),
                }
                .into());
            }
            commands::run_schedule(&cfg, &mut out, &cases, strict)?;
        }
        Command::Report { .. } => {
            commands::run_report(&cfg, &mut out)?;
        }
    }
    out.record_time("total", start.elapsed());
    out.finish()?;
    Ok(())
}

fn design_min_hops(cfg: &ExperimentConfig, name: &str) -> Result<usize, RunError> {
    let entry = select_designs(cfg, &[name.to_string()])?.remove(0);
    let layout = build_layout(&cfg.layout_spec(&entry), &cfg.sat_nadir()).map_err(|source| {
        RunError::Layout {
            design: name.to_string(),
            source,
        }
    })?;
    let grid = sensing_grid(&layout, cfg.sensing_spacing_km);
    let search = min_hops(
        &layout,
        cfg.power_scheme(name),
        &grid,
        &cfg.array(),
        &cfg.link,
        &cfg.search,
    )
    .map_err(|source| RunError::Link {
        design: name.to_string(),
        source,
    })?;
    println!("{name}: minimum N_h = {}", search.n_hops);
    Ok(search.n_hops)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
