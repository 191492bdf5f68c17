//! Command-line front end.
//!
//! Exit codes: 0 on success, 1 on usage or configuration errors, 2 on
//! runtime failures (including failed `validate` checks).

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use super::config::{Averaging, ExperimentConfig, FailureSpec, Figure, Mode, Scale};
use super::reference::compare;
use super::results::{Format, ResultsTable};
use super::run::{run_experiment, run_experiment_with_threads};
use super::validate::run_all;
use crate::Error;

#[derive(Debug, Parser)]
#[command(name = "risbeam", version, about = "RIS beamforming experiments for ISAC MU-MIMO")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Args)]
struct Common {
    /// TOML experiment file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    realizations: Option<usize>,
    /// Output file; aggregates go to stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// csv or json (default: from the extension of --out).
    #[arg(long)]
    format: Option<Format>,
    /// desk (M=8, K=2, N=8, 20 realizations) or paper.
    #[arg(long)]
    scale: Option<Scale>,
    /// db (mean of dB values) or linear.
    #[arg(long)]
    averaging: Option<AveragingArg>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Keep the UE positions fixed across realizations.
    #[arg(long)]
    fix_ue: bool,
}

#[derive(Debug, Clone, Args)]
struct Sweep {
    /// Comma-separated sweep values.
    #[arg(long, value_delimiter = ',')]
    values: Vec<f64>,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Clone, Copy)]
struct AveragingArg(Averaging);

impl std::str::FromStr for AveragingArg {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "db" => Ok(Self(Averaging::Db)),
            "linear" => Ok(Self(Averaging::Linear)),
            _ => Err(Error::Config(format!("unknown averaging `{s}` (expected db or linear)"))),
        }
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Algorithm 1 on every realization.
    Maximize(Common),
    /// Algorithm 1 followed by Algorithm 2.
    Attack(Common),
    /// Algorithm 1 for several RIS sizes.
    SweepN(Sweep),
    /// Failure bias sweep.
    SweepKappa(Sweep),
    /// Attack for several SINR floors.
    SweepGamma(Sweep),
    /// Figure presets.
    Reproduce {
        /// fig3, fig4, fig5 or fig6.
        figure: Figure,
        #[command(flatten)]
        common: Common,
    },
    /// Oracle and identity checks.
    Validate {
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

enum Failure {
    Config(String),
    Runtime(String),
}

impl Failure {
    fn code(&self) -> i32 {
        match self {
            Failure::Config(_) => 1,
            Failure::Runtime(_) => 2,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Config(m) | Failure::Runtime(m) => m,
        }
    }
}

fn config_err(e: Error) -> Failure {
    Failure::Config(e.to_string())
}

/// Runs the CLI with process stdout / stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    run_with(args, &mut std::io::stdout(), &mut std::io::stderr())
}

pub fn run_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let text = e.render().to_string();
            if code == 0 {
                let _ = write!(out, "{text}");
            } else {
                let _ = write!(err, "{text}");
            }
            return code;
        }
    };
    match dispatch(cli.command, out, err) {
        Ok(()) => 0,
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.message());
            f.code()
        }
    }
}

fn format_for(path: &Path, explicit: Option<Format>) -> Format {
    explicit.unwrap_or_else(|| match path.extension().and_then(|e| e.to_str()) {
        Some("json") => Format::Json,
        _ => Format::Csv,
    })
}

fn base_config(common: &Common, mode: Mode) -> Result<ExperimentConfig, Failure> {
    let mut cfg = match &common.config {
        Some(p) => ExperimentConfig::load(p).map_err(config_err)?,
        None => ExperimentConfig {
            name: match mode {
                Mode::Maximize => "maximize",
                Mode::Attack => "attack",
                Mode::SweepN => "sweep_n",
                Mode::SweepKappa => "sweep_kappa",
                Mode::SweepGamma => "sweep_gamma",
            }
            .into(),
            ..ExperimentConfig::default()
        },
    };
    cfg.mode = mode;
    if let Some(s) = common.scale {
        cfg = cfg.with_scale(s);
    }
    Ok(cfg)
}

fn apply_overrides(cfg: &mut ExperimentConfig, common: &Common) {
    if let Some(s) = common.seed {
        cfg.master_seed = s;
    }
    if let Some(r) = common.realizations {
        cfg.realizations = r;
    }
    if let Some(a) = common.averaging {
        cfg.averaging = a.0;
    }
    if common.fix_ue {
        cfg.fix_ue_positions = true;
    }
}

fn dispatch(command: Command, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), Failure> {
    let (cfg, common, figure) = match command {
        Command::Validate { seed } => return validate(seed, out),
        Command::Maximize(c) => (base_config(&c, Mode::Maximize)?, c, None),
        Command::Attack(c) => (base_config(&c, Mode::Attack)?, c, None),
        Command::SweepN(s) => (sweep_config(&s, Mode::SweepN)?, s.common, None),
        Command::SweepKappa(s) => (sweep_config(&s, Mode::SweepKappa)?, s.common, None),
        Command::SweepGamma(s) => (sweep_config(&s, Mode::SweepGamma)?, s.common, None),
        Command::Reproduce { figure, common } => {
            if common.config.is_some() {
                return Err(Failure::Config("reproduce uses built-in presets and takes no --config".into()));
            }
            let cfg = ExperimentConfig::preset(figure, common.scale.unwrap_or(Scale::Full));
            (cfg, common, Some(figure))
        }
    };
    let mut cfg = cfg;
    apply_overrides(&mut cfg, &common);
    cfg.validate().map_err(config_err)?;
    if common.threads == Some(0) {
        return Err(Failure::Config("--threads must be at least 1".into()));
    }

    let table = match common.threads {
        Some(t) => run_experiment_with_threads(&cfg, t),
        None => run_experiment(&cfg),
    }
    .map_err(|e| Failure::Runtime(e.to_string()))?;
    report(&cfg, &table, figure, &common, out, err)
}

fn sweep_config(s: &Sweep, mode: Mode) -> Result<ExperimentConfig, Failure> {
    let mut cfg = base_config(&s.common, mode)?;
    if !s.values.is_empty() {
        cfg.sweep = s.values.clone();
    }
    if mode == Mode::SweepKappa && cfg.failure.is_none() {
        cfg.failure = Some(FailureSpec::default());
    }
    Ok(cfg)
}

fn report(
    cfg: &ExperimentConfig,
    table: &ResultsTable,
    figure: Option<Figure>,
    common: &Common,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<(), Failure> {
    let io = |e: std::io::Error| Failure::Runtime(e.to_string());
    let agg = table.aggregate(cfg.averaging);
    let failed = table.realizations.iter().filter(|r| r.error.is_some()).count();
    writeln!(
        err,
        "{}: {} rows, {} realizations, {} failed",
        cfg.name,
        table.rows.len(),
        table.realizations.len(),
        failed
    )
    .map_err(io)?;
    for p in agg.finals() {
        let sweep = p.sweep.map(|s| format!(" sweep {s}")).unwrap_or_default();
        writeln!(err, "  {}{sweep}: final mean rho {:.2} dB over {}", p.experiment, p.mean_rho_db, p.count).map_err(io)?;
    }
    if let Some(f) = figure {
        for c in compare(f, cfg, &agg) {
            let measured = c.measured_db.map(|m| format!("{m:.2}")).unwrap_or_else(|| "n/a".into());
            writeln!(err, "  reference {}: {:.2} dB, measured {measured}", c.label, c.reference_db).map_err(io)?;
        }
    }
    match &common.out {
        Some(path) => {
            let format = format_for(path, common.format);
            table.export(cfg, path, format).map_err(|e| Failure::Runtime(e.to_string()))?;
            writeln!(err, "wrote {}", path.display()).map_err(io)?;
        }
        None => {
            writeln!(out, "experiment,sweep,iteration,mean_rho_db,count").map_err(io)?;
            for p in &agg.points {
                let sweep = p.sweep.map(|s| s.to_string()).unwrap_or_default();
                writeln!(out, "{},{sweep},{},{},{}", p.experiment, p.iteration, p.mean_rho_db, p.count).map_err(io)?;
            }
        }
    }
    if failed == table.realizations.len() {
        return Err(Failure::Runtime("every realization failed".into()));
    }
    Ok(())
}

fn validate(seed: u64, out: &mut dyn Write) -> Result<(), Failure> {
    let checks = run_all(seed);
    let io = |e: std::io::Error| Failure::Runtime(e.to_string());
    for c in &checks {
        writeln!(out, "{c}").map_err(io)?;
    }
    let failed = checks.iter().filter(|c| !c.passed).count();
    if failed > 0 {
        return Err(Failure::Runtime(format!("{failed} of {} checks failed", checks.len())));
    }
    Ok(())
}
