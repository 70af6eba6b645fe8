//! Command-line front end: configuration, orchestration and output.

mod config;
mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::Parser;
use thiserror::Error;

use crate::spectra::{
    cone_profile, convolve_instrument, response_spectrum, scan_bandwidth, scan_detuning, scan_oriented, ScanResult,
    SpectraError,
};
use crate::transport::Channel;

pub use config::{
    parse_config, parse_config_str, read_config_file, AtomPreset, AtomSection, BandwidthSection, CloudSection,
    ConeSection, ConfigError, ConfigFile, FrequencyUnit, GridSection, LaserSection, PolarizationKind,
    PopulationSection, ResponseSection, RunConfig, ScanType, ThermalSection,
};
pub use output::{format_value, parse_csv, svg_plot, Table};

pub const SCAN_COLUMNS: [&str; 7] =
    ["detuning_MHz", "detuning_gamma", "ladder", "crossed", "enhancement", "stderr", "n1_fraction"];
pub const CONE_COLUMNS: [&str; 3] = ["theta_urad", "enhancement", "enhancement_convolved"];
pub const RESPONSE_COLUMNS: [&str; 4] =
    ["omega_offset_gamma", "total_response", "interference_response", "input_lorentzian"];

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Engine(#[from] SpectraError),
    #[error("cannot write {path}: {source}")]
    Output { path: PathBuf, source: std::io::Error },
    #[error("cannot start worker pool: {0}")]
    Workers(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            _ => 3,
        }
    }
}

/// Flags override the configuration file; each has a `CBS_` environment variable.
#[derive(Debug, Clone, Parser)]
#[command(name = "cbs", version, about = "Coherent backscattering from cold multilevel atoms")]
pub struct Args {
    #[arg(long, env = "CBS_CONFIG")]
    pub config: PathBuf,
    /// detuning, oriented, bandwidth, response or cone.
    #[arg(long, env = "CBS_SCAN")]
    pub scan: Option<String>,
    /// Restrict to one analyzer channel: ll, lperp, hh or hperp.
    #[arg(long, env = "CBS_CHANNEL")]
    pub channel: Option<String>,
    #[arg(long, env = "CBS_SEED")]
    pub seed: Option<u64>,
    /// Trajectories per grid point.
    #[arg(long, env = "CBS_TRAJECTORIES")]
    pub trajectories: Option<u64>,
    #[arg(long, env = "CBS_MAX_ORDER")]
    pub max_order: Option<usize>,
    #[arg(long, env = "CBS_WORKERS")]
    pub workers: Option<usize>,
    #[arg(long, env = "CBS_OUTPUT")]
    pub output: Option<PathBuf>,
}

impl Args {
    /// Load the configuration file and apply the overrides.
    pub fn config_file(&self) -> Result<ConfigFile, ConfigError> {
        let mut file = read_config_file(&self.config)?;
        let mut problems = Vec::new();
        if let Some(s) = &self.scan {
            match ScanType::parse(s) {
                Some(t) => file.scan = t,
                None => problems.push(format!("--scan {s}: expected detuning, oriented, bandwidth, response or cone")),
            }
        }
        if let Some(c) = &self.channel {
            match Channel::parse(c) {
                Some(ch) => file.channels = Some(vec![ch]),
                None => problems.push(format!("--channel {c}: expected ll, lperp, hh or hperp")),
            }
        }
        if let Some(v) = self.seed {
            file.seed = Some(v);
        }
        if let Some(v) = self.trajectories {
            file.trajectories = v;
        }
        if let Some(v) = self.max_order {
            file.controls.max_order = v;
        }
        if let Some(v) = self.workers {
            file.workers = Some(v);
        }
        if let Some(v) = &self.output {
            file.output = Some(v.clone());
        }
        if problems.is_empty() {
            Ok(file)
        } else {
            Err(ConfigError::Invalid(problems))
        }
    }
}

/// What a run produced.
#[derive(Debug, Clone)]
pub struct RunReport {
    pub tables: Vec<Table>,
    pub total_trajectories: u64,
}

fn scan_rows(result: &ScanResult, channel: Channel) -> Vec<Vec<f64>> {
    result
        .series(channel)
        .into_iter()
        .map(|(d, e)| vec![d * result.gamma_mhz, d, e.ladder, e.crossed, e.x, e.stderr, e.n1_fraction])
        .collect()
}

fn scan_tables(prefix: &str, result: &ScanResult, channels: &[Channel]) -> Vec<Table> {
    channels
        .iter()
        .map(|&ch| Table {
            name: format!("{}_{ch}", prefix),
            columns: SCAN_COLUMNS.to_vec(),
            rows: scan_rows(result, ch),
            plot: (1, 4),
        })
        .collect()
}

/// Run every series of a configuration and collect the output tables.
pub fn execute(cfg: &RunConfig) -> Result<RunReport, CliError> {
    let mut tables = Vec::new();
    let mut runs = 0u64;
    for &kv0 in &cfg.kv0 {
        let sc = cfg.scan_config(kv0);
        let tag = format!("kv0-{kv0}");
        match cfg.scan {
            ScanType::Detuning | ScanType::Oriented => {
                let result = if cfg.scan == ScanType::Detuning { scan_detuning(&sc)? } else { scan_oriented(&sc)? };
                runs += sc.detunings.len() as u64;
                tables.extend(scan_tables(&format!("{}_{tag}", cfg.scan.name()), &result, &cfg.channels));
            }
            ScanType::Bandwidth => {
                let results = scan_bandwidth(&sc, &cfg.bandwidths)?;
                for (bw, result) in cfg.bandwidths.iter().zip(&results) {
                    runs += sc.detunings.len() as u64;
                    tables.extend(scan_tables(&format!("bandwidth_bw-{bw}_{tag}"), result, &cfg.channels));
                }
            }
            ScanType::Response => {
                for &ch in &cfg.channels {
                    let r = response_spectrum(&sc, ch, cfg.response_bins)?;
                    runs += 1;
                    let rows = (0..r.omega.len())
                        .map(|i| {
                            vec![
                                r.omega[i] - r.detuning,
                                r.total_response[i],
                                r.interference_response[i],
                                r.input_lorentzian[i],
                            ]
                        })
                        .collect();
                    tables.push(Table {
                        name: format!("response_{tag}_{ch}"),
                        columns: RESPONSE_COLUMNS.to_vec(),
                        rows,
                        plot: (0, 1),
                    });
                }
            }
            ScanType::Cone => {
                for &ch in &cfg.channels {
                    let mut p = cone_profile(&sc, ch, &cfg.theta_rad)?;
                    runs += 1;
                    if let Some(fwhm) = cfg.instrument_fwhm_rad {
                        p = convolve_instrument(&p, fwhm)?;
                    }
                    let convolved = p.convolved.clone().unwrap_or_else(|| p.enhancement.clone());
                    let rows = (0..p.theta_rad.len())
                        .map(|i| vec![p.theta_rad[i] * 1e6, p.enhancement[i], convolved[i]])
                        .collect();
                    tables.push(Table {
                        name: format!("cone_{tag}_{ch}"),
                        columns: CONE_COLUMNS.to_vec(),
                        rows,
                        plot: (0, 1),
                    });
                }
            }
        }
    }
    Ok(RunReport { tables, total_trajectories: runs * cfg.trajectories })
}

#[cfg(feature = "parallel")]
fn with_workers<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T, CliError> {
    let pool =
        rayon::ThreadPoolBuilder::new().num_threads(workers).build().map_err(|e| CliError::Workers(e.to_string()))?;
    Ok(pool.install(f))
}

#[cfg(not(feature = "parallel"))]
fn with_workers<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T, CliError> {
    if workers > 1 {
        eprintln!("warning: built without the parallel feature, running on one worker");
    }
    Ok(f())
}

fn write(path: &Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents).map_err(|source| CliError::Output { path: path.to_path_buf(), source })
}

/// Execute a configuration and write the CSV tables, the plot and `run.json`
/// into the output directory.
pub fn run(file: &ConfigFile) -> Result<RunReport, CliError> {
    let cfg = file.resolve()?;
    let start = Instant::now();
    let report = with_workers(cfg.workers, || execute(&cfg))??;
    let wall = start.elapsed().as_secs_f64();

    let dir = &cfg.output;
    std::fs::create_dir_all(dir).map_err(|source| CliError::Output { path: dir.clone(), source })?;
    let mut files = Vec::new();
    for t in &report.tables {
        let path = t.write_csv(dir).map_err(|source| CliError::Output { path: dir.join(&t.name), source })?;
        files.push(path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default());
    }
    let plot = format!("{}.svg", cfg.scan.name());
    write(&dir.join(&plot), &svg_plot(&format!("{} scan", cfg.scan.name()), &report.tables))?;
    files.push(plot);

    let config_toml = toml::to_string(file).expect("config file serializes");
    let meta = serde_json::json!({
        "program": env!("CARGO_PKG_NAME"),
        "version": env!("CARGO_PKG_VERSION"),
        "scan": cfg.scan.name(),
        "seed": cfg.seed,
        "workers": cfg.workers,
        "trajectories_per_point": cfg.trajectories,
        "total_trajectories": report.total_trajectories,
        "wall_time_s": wall,
        "files": files,
        "config": config_toml,
        "resolved": cfg,
    });
    write(&dir.join("run.json"), &serde_json::to_string_pretty(&meta).expect("metadata serializes"))?;
    Ok(report)
}

/// Entry point used by the `cbs` binary.
pub fn main_with(args: Args) -> ExitCode {
    let result = args.config_file().map_err(CliError::from).and_then(|file| run(&file));
    match result {
        Ok(report) => {
            eprintln!("{} tables, {} trajectories", report.tables.len(), report.total_trajectories);
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
