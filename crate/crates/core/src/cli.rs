//! Command-line front end over [`crate::pipeline::Workspace`].
//!
//! Settings come from an optional TOML file (`--config`) and are overridden
//! by flags. The data directory defaults to `$GRIDBENCH_DATA_DIR`, then
//! `./bench`.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use crate::controllers::GridConfig;
use crate::data::{synth_fleet, Schema, SynthSpec};
use crate::error::{Error, Result};
use crate::pipeline::{ArtifactKind, CalibrationSettings, ReportFormat, Workspace};
use crate::simulate::ControllerSpec;
use crate::tariff::Tariff;

pub const DATA_DIR_ENV: &str = "GRIDBENCH_DATA_DIR";

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_FAULT: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "gridbench", version, about = "Microgrid energy management benchmark")]
pub struct Cli {
    /// TOML run configuration; flags take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Data directory [default: $GRIDBENCH_DATA_DIR or ./bench].
    #[arg(long, global = true)]
    pub data_dir: Option<PathBuf>,
    /// Tariff TOML file [default: the shipped placeholder schedule].
    #[arg(long, global = true)]
    pub tariff: Option<PathBuf>,
    /// Print errors as a JSON object on stderr.
    #[arg(long, global = true)]
    pub error_json: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate seeded synthetic sites.
    Synth(SynthArgs),
    /// Validate site files and store them in canonical form.
    Ingest {
        #[arg(required = true)]
        paths: Vec<PathBuf>,
        #[arg(long, value_enum, default_value_t = Schema::Canonical)]
        schema: Schema,
    },
    /// Split every site's weeks into calibration and simulation sets.
    Split {
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Fit scenario, noise and AR models and their value functions.
    Calibrate {
        /// `olfc`, `sdp` or `sdpar-<k>`; repeatable.
        #[arg(long = "controller")]
        controllers: Vec<String>,
        /// Clusters per K-means quantization.
        #[arg(long)]
        clusters: Option<usize>,
        /// AR slot pooling half-width in steps.
        #[arg(long)]
        pooling: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        grid: GridArgs,
    },
    /// Simulate controllers on the simulation weeks.
    Simulate {
        /// `dummy`, `mpc`, `mpc-<H>`, `olfc-<n>`, `sdp`, `sdpar-<k>`,
        /// `anticipative`; repeatable.
        #[arg(long = "controller")]
        controllers: Vec<String>,
        #[arg(long)]
        parallelism: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        grid: GridArgs,
    },
    /// Score every simulated controller.
    Score {
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        grid: GridArgs,
    },
    /// Render score tables from the stored scores.
    Report {
        #[arg(long, value_enum)]
        format: Option<ReportFormat>,
    },
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub sites: Option<usize>,
    #[arg(long)]
    pub weeks: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Forecast leads per row (at least 96).
    #[arg(long)]
    pub leads: Option<usize>,
    #[arg(long)]
    pub noise_scale: Option<f64>,
    #[arg(long)]
    pub noise_persistence: Option<f64>,
    #[arg(long)]
    pub forecast_error_scale: Option<f64>,
    #[arg(long)]
    pub forecast_error_persistence: Option<f64>,
}

#[derive(Debug, Args, Default)]
pub struct GridArgs {
    #[arg(long)]
    pub soc_points: Option<usize>,
    #[arg(long)]
    pub control_points: Option<usize>,
    #[arg(long)]
    pub lag_points: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthConfig {
    pub sites: Option<usize>,
    pub weeks: Option<usize>,
    pub seed: Option<u64>,
    pub leads: Option<usize>,
    pub noise_scale: Option<f64>,
    pub noise_persistence: Option<f64>,
    pub forecast_error_scale: Option<f64>,
    pub forecast_error_persistence: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridFile {
    pub soc_points: Option<usize>,
    pub control_points: Option<usize>,
    pub lag_points: Option<usize>,
}

/// Contents of a `--config` file. Relative paths are resolved against the
/// file's directory.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub data_dir: Option<PathBuf>,
    pub tariff: Option<PathBuf>,
    pub seed: Option<u64>,
    pub split_seed: Option<u64>,
    pub parallelism: Option<usize>,
    pub controllers: Option<Vec<String>>,
    pub clusters: Option<usize>,
    pub ar_pooling: Option<usize>,
    pub format: Option<ReportFormat>,
    #[serde(default)]
    pub grid: GridFile,
    #[serde(default)]
    pub synth: SynthConfig,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Validation(format!("config {}: {e}", path.display())))?;
        let mut cfg: RunConfig = toml::from_str(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut cfg.data_dir, &mut cfg.tariff].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    fn grid(&self, flags: &GridArgs) -> Result<GridConfig> {
        let d = GridConfig::default();
        let g = GridConfig {
            soc_points: flags.soc_points.or(self.grid.soc_points).unwrap_or(d.soc_points),
            control_points: flags
                .control_points
                .or(self.grid.control_points)
                .unwrap_or(d.control_points),
            lag_points: flags.lag_points.or(self.grid.lag_points).unwrap_or(d.lag_points),
        };
        g.validate()?;
        Ok(g)
    }

    fn controllers(&self, flags: &[String]) -> Result<Vec<String>> {
        let list = if flags.is_empty() {
            self.controllers.clone().unwrap_or_default()
        } else {
            flags.to_vec()
        };
        if list.is_empty() {
            return Err(Error::Validation(
                "no controller selected; pass --controller or set `controllers`".into(),
            ));
        }
        Ok(list)
    }
}

fn positive(name: &str, v: usize) -> Result<usize> {
    if v == 0 {
        return Err(Error::InvalidParameter(format!("{name} must be positive")));
    }
    Ok(v)
}

/// Outcome of a command that did not succeed.
#[derive(Debug)]
pub enum Failure {
    /// Bad input, configuration or missing prerequisites.
    Invalid(Error),
    /// At least one simulated week faulted.
    Faults(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Invalid(e)
    }
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Invalid(_) => EXIT_INVALID,
            Failure::Faults(_) => EXIT_FAULT,
        }
    }

    fn to_json(&self) -> serde_json::Value {
        let (kind, message) = match self {
            Failure::Invalid(e) => (e.kind(), e.to_string()),
            Failure::Faults(m) => ("simulation_fault", m.clone()),
        };
        serde_json::json!({ "kind": kind, "message": message, "exit_code": self.exit_code() })
    }
}

/// Parses `args` (including the program name), runs the command and
/// returns the process exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
        }
    };
    match execute(&cli) {
        Ok(()) => EXIT_OK,
        Err(f) => {
            if cli.error_json {
                eprintln!("{}", f.to_json());
            } else {
                match &f {
                    Failure::Invalid(e) => eprintln!("error: {e}"),
                    Failure::Faults(m) => eprintln!("error: {m}"),
                }
            }
            f.exit_code()
        }
    }
}

fn data_dir(cli: &Cli, cfg: &RunConfig) -> PathBuf {
    cli.data_dir
        .clone()
        .or_else(|| cfg.data_dir.clone())
        .or_else(|| std::env::var_os(DATA_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("bench"))
}

fn tariff(cli: &Cli, cfg: &RunConfig) -> Result<Arc<Tariff>> {
    Ok(Arc::new(match cli.tariff.as_ref().or(cfg.tariff.as_ref()) {
        Some(path) => {
            if !path.exists() {
                return Err(Error::Validation(format!("tariff file {} not found", path.display())));
            }
            Tariff::load(path)?
        }
        None => Tariff::default_schedule(),
    }))
}

pub fn execute(cli: &Cli) -> std::result::Result<(), Failure> {
    let cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let ws = Workspace::new(data_dir(cli, &cfg));
    let seed = |flag: Option<u64>| flag.or(cfg.seed).unwrap_or(0);
    match &cli.command {
        Command::Synth(a) => {
            let s = &cfg.synth;
            let sites = positive("sites", a.sites.or(s.sites).unwrap_or(4))?;
            let weeks = positive("weeks", a.weeks.or(s.weeks).unwrap_or(6))?;
            let mut base = SynthSpec::new("site", weeks);
            if let Some(v) = a.leads.or(s.leads) {
                base.leads = v;
            }
            if let Some(v) = a.noise_scale.or(s.noise_scale) {
                base.noise_scale = v;
            }
            if let Some(v) = a.noise_persistence.or(s.noise_persistence) {
                base.noise_persistence = v;
            }
            if let Some(v) = a.forecast_error_scale.or(s.forecast_error_scale) {
                base.forecast_error_scale = v;
            }
            if let Some(v) = a.forecast_error_persistence.or(s.forecast_error_persistence) {
                base.forecast_error_persistence = v;
            }
            let fleet = synth_fleet(sites, &base, a.seed.or(s.seed).or(cfg.seed).unwrap_or(0))?;
            ws.write_sites(&fleet)?;
            println!("wrote {sites} sites of {weeks} weeks to {}", ws.sites_dir().display());
        }
        Command::Ingest { paths, schema } => {
            for id in ws.ingest(paths, *schema)? {
                println!("ingested {id}");
            }
        }
        Command::Split { seed: flag } => {
            let split = ws.split(flag.or(cfg.split_seed).unwrap_or(0))?;
            for (id, s) in &split.sites {
                println!(
                    "{id}: {} calibration, {} simulation weeks",
                    s.calibration.len(),
                    s.simulation.len()
                );
            }
        }
        Command::Calibrate {
            controllers,
            clusters,
            pooling,
            seed: flag,
            grid,
        } => {
            let names = if controllers.is_empty() {
                cfg.controllers(&[])?
                    .into_iter()
                    .filter(|c| ArtifactKind::parse(c).is_ok())
                    .collect()
            } else {
                controllers.clone()
            };
            let kinds = names
                .iter()
                .map(|c| ArtifactKind::parse(c))
                .collect::<Result<Vec<_>>>()?;
            if kinds.is_empty() {
                return Err(Error::Validation("no controller needs calibration".into()).into());
            }
            let mut settings = CalibrationSettings {
                grid: cfg.grid(grid)?,
                seed: seed(*flag),
                ar_pooling: pooling.or(cfg.ar_pooling),
                ..CalibrationSettings::default()
            };
            settings.kmeans.k = positive("clusters", clusters.or(cfg.clusters).unwrap_or(settings.kmeans.k))?;
            let tariff = tariff(cli, &cfg)?;
            ws.calibrate(&kinds, &settings, &tariff)?;
            println!("calibrated {} artifact kinds", kinds.len());
        }
        Command::Simulate {
            controllers,
            parallelism,
            seed: flag,
            grid,
        } => {
            let specs = cfg
                .controllers(controllers)?
                .iter()
                .map(|c| ControllerSpec::parse(c))
                .collect::<Result<Vec<_>>>()?;
            let par = positive("parallelism", parallelism.or(cfg.parallelism).unwrap_or(1))?;
            let out = ws.simulate(&specs, tariff(cli, &cfg)?, cfg.grid(grid)?, seed(*flag), par)?;
            println!("simulated {} controller-weeks", out.results.len());
            if !out.errors.is_empty() {
                let msgs: Vec<String> = out.errors.iter().map(|e| e.message.clone()).collect();
                return Err(Error::MissingArtifact(msgs.join("; ")).into());
            }
            let faults: Vec<String> = out
                .results
                .iter()
                .filter_map(|r| {
                    r.fault.as_ref().map(|f| {
                        format!("{} on {} week {} step {}: {}", r.controller, r.site_id, r.week_id, f.step, f.message)
                    })
                })
                .collect();
            if !faults.is_empty() {
                return Err(Failure::Faults(faults.join("; ")));
            }
        }
        Command::Score { seed: flag, grid } => {
            let report = ws.score(tariff(cli, &cfg)?, cfg.grid(grid)?, seed(*flag))?;
            for c in &report.controllers {
                let score = c.score.map(|s| format!("{s:.4}")).unwrap_or_else(|| "n/a".into());
                println!("{:<14} {score} ({} sites)", c.controller, c.sites_scored);
            }
        }
        Command::Report { format } => {
            for p in ws.report(format.or(cfg.format).unwrap_or_default())? {
                println!("wrote {}", p.display());
            }
        }
    }
    Ok(())
}
