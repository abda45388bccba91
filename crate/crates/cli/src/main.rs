//! `absmst`: absolute-correlation MSTs, lag tables and Granger tests from
//! daily price CSVs.
//!
//! Exit status: 0 on success, 1 on internal failure (including failure to
//! write outputs), 2 on bad input, configuration or data.

mod config;

use std::fs::File;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use absmst::pipeline::{self, LagRequest, MatrixLayout, PipelineConfig, RunOutput};
use absmst::timeseries::{
    parse_meta, parse_prices, AssetMeta, PriceFormat, PriceSeries, SeriesKind,
};
use absmst::Error;
use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand};

use crate::config::Settings;

#[derive(Debug, Parser)]
#[command(
    name = "absmst",
    version,
    about = "Absolute-correlation MSTs and volatility time lags for daily price panels"
)]
struct Cli {
    /// Worker threads; outputs do not depend on this.
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// TOML settings file with snake_case keys for any flag; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Minimum spanning trees per window, with axiom, clustering and stability reports.
    Mst(Common),
    /// Volatility time lags of targets against a reference set.
    Lag {
        #[command(flatten)]
        common: Common,
        /// Target symbol; repeat for several targets.
        #[arg(long = "target")]
        target: Vec<String>,
        /// Comma-separated reference symbols (default: every stock indicator).
        #[arg(long, value_delimiter = ',')]
        references: Option<Vec<String>>,
        /// Keep a target in its own reference set.
        #[arg(long)]
        include_self: bool,
        /// Write lag, raw and smoothed curves per pair under curves/.
        #[arg(long)]
        dump_curves: bool,
    },
    /// Granger F-test of whether one volatility series helps forecast another.
    Granger {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        cause: Option<String>,
        #[arg(long)]
        effect: Option<String>,
        /// Number of lags in both regressions (default 5).
        #[arg(long)]
        order: Option<usize>,
    },
    /// Absolute-correlation and distance matrices per window.
    Corr {
        #[command(flatten)]
        common: Common,
        /// `wide` square matrices or `long` pair rows.
        #[arg(long, value_parser = parse_layout)]
        format: Option<MatrixLayout>,
    },
    /// Aligned log returns (or volatility) of every series.
    Returns {
        #[command(flatten)]
        common: Common,
        /// Dump absolute returns instead.
        #[arg(long)]
        volatility: bool,
    },
}

#[derive(Debug, Args)]
struct Common {
    /// Price CSV.
    #[arg(long)]
    prices: Option<PathBuf>,
    /// `wide` (date,SYM1,SYM2,...) or `long` (symbol,date,price).
    #[arg(long, value_parser = parse_price_format)]
    price_format: Option<PriceFormat>,
    /// Metadata CSV: symbol,class[,description].
    #[arg(long)]
    meta: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// First date to include (YYYY-MM-DD).
    #[arg(long)]
    from: Option<NaiveDate>,
    /// Last date to include (YYYY-MM-DD).
    #[arg(long)]
    to: Option<NaiveDate>,
    /// One window per calendar year instead of the full span.
    #[arg(long)]
    yearly: bool,
    /// Largest lag scanned in each direction, in trading days (default 150).
    #[arg(long)]
    max_lag: Option<usize>,
    /// LOWESS over the k nearest lags (default 10).
    #[arg(long, conflicts_with = "lowess_window")]
    lowess_k: Option<usize>,
    /// LOWESS over a fixed window of this many lags.
    #[arg(long)]
    lowess_window: Option<usize>,
    /// Robustness reweighting passes after the initial LOWESS fit.
    #[arg(long)]
    lowess_robustness: Option<usize>,
    /// Minimum overlapping observations per pair (default 100).
    #[arg(long)]
    min_obs: Option<usize>,
    /// Normalize every lag with moments of the whole overlap.
    #[arg(long)]
    global_moments: bool,
}

fn parse_price_format(s: &str) -> Result<PriceFormat, String> {
    match s {
        "wide" => Ok(PriceFormat::Wide),
        "long" => Ok(PriceFormat::Long),
        other => Err(format!(
            "unknown price format {other:?}, expected wide or long"
        )),
    }
}

fn parse_layout(s: &str) -> Result<MatrixLayout, String> {
    match s {
        "wide" => Ok(MatrixLayout::Wide),
        "long" => Ok(MatrixLayout::Long),
        other => Err(format!("unknown format {other:?}, expected wide or long")),
    }
}

fn flag(set: bool) -> Option<bool> {
    set.then_some(true)
}

impl Common {
    fn settings(self) -> Settings {
        Settings {
            prices: self.prices,
            price_format: self.price_format,
            meta: self.meta,
            out: self.out,
            from: self.from,
            to: self.to,
            yearly: flag(self.yearly),
            max_lag: self.max_lag,
            lowess_k: self.lowess_k,
            lowess_window: self.lowess_window,
            lowess_robustness: self.lowess_robustness,
            min_obs: self.min_obs,
            global_moments: flag(self.global_moments),
            ..Default::default()
        }
    }
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Mst(_) => "mst",
            Command::Lag { .. } => "lag",
            Command::Granger { .. } => "granger",
            Command::Corr { .. } => "corr",
            Command::Returns { .. } => "returns",
        }
    }

    fn settings(self) -> Settings {
        match self {
            Command::Mst(common) => common.settings(),
            Command::Lag {
                common,
                target,
                references,
                include_self,
                dump_curves,
            } => Settings {
                target: (!target.is_empty()).then_some(target),
                references,
                include_self: flag(include_self),
                dump_curves: flag(dump_curves),
                ..common.settings()
            },
            Command::Granger {
                common,
                cause,
                effect,
                order,
            } => Settings {
                cause,
                effect,
                order,
                ..common.settings()
            },
            Command::Corr { common, format } => Settings {
                format,
                ..common.settings()
            },
            Command::Returns { common, volatility } => Settings {
                volatility: flag(volatility),
                ..common.settings()
            },
        }
    }
}

enum Failure {
    /// Bad input, configuration or data.
    User(String),
    Internal(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::User(e.to_string())
    }
}

fn open(path: &Path, what: &str) -> Result<File, Failure> {
    File::open(path)
        .map_err(|e| Failure::User(format!("cannot open {what} file {}: {e}", path.display())))
}

fn read_prices(settings: &Settings) -> Result<Vec<PriceSeries>, Failure> {
    let path = Settings::require(&settings.prices, "prices")?;
    let format = settings.price_format.unwrap_or_default();
    parse_prices(open(path, "prices")?, format)
        .map_err(|e| Failure::User(format!("{}: {e}", path.display())))
}

fn read_meta(settings: &Settings) -> Result<Vec<AssetMeta>, Failure> {
    let path = Settings::require(&settings.meta, "meta")?;
    parse_meta(open(path, "metadata")?)
        .map_err(|e| Failure::User(format!("{}: {e}", path.display())))
}

fn execute(
    command: &str,
    settings: &Settings,
    config: &PipelineConfig,
) -> Result<RunOutput, Failure> {
    let prices = read_prices(settings)?;
    let output = match command {
        "mst" => pipeline::run_mst(&prices, &read_meta(settings)?, config)?,
        "corr" => pipeline::run_corr(
            &prices,
            &read_meta(settings)?,
            config,
            settings.format.unwrap_or_default(),
        )?,
        "lag" => {
            let request = LagRequest {
                targets: Settings::require(&settings.target, "target")?.clone(),
                references: settings.references.clone(),
                include_self: settings.include_self.unwrap_or(false),
                dump_curves: settings.dump_curves.unwrap_or(false),
            };
            pipeline::run_lag(&prices, &read_meta(settings)?, &request, config)?
        }
        "granger" => pipeline::run_granger(
            &prices,
            Settings::require(&settings.cause, "cause")?,
            Settings::require(&settings.effect, "effect")?,
            settings.order.unwrap_or(5),
            config,
        )?,
        "returns" => {
            let kind = if settings.volatility.unwrap_or(false) {
                SeriesKind::Volatility
            } else {
                SeriesKind::Return
            };
            pipeline::run_returns(&prices, kind, config)?
        }
        other => unreachable!("unhandled command {other}"),
    };
    Ok(output)
}

/// Resolved settings that reproduce the run when passed back via `--config`.
fn snapshot(
    command: &str,
    settings: &Settings,
    config: &PipelineConfig,
) -> Result<Vec<u8>, Failure> {
    use absmst::correlation::Moments;
    use absmst::lowess::LocalRegion;
    let (lowess_k, lowess_window) = match config.lowess.region {
        LocalRegion::Nearest(k) => (Some(k), None),
        LocalRegion::Window(w) => (None, Some(w)),
    };
    let resolved = Settings {
        out: None,
        price_format: Some(settings.price_format.unwrap_or_default()),
        yearly: Some(config.yearly),
        max_lag: Some(config.max_lag),
        lowess_k,
        lowess_window,
        lowess_robustness: Some(config.lowess.robustness_iterations),
        min_obs: Some(config.min_obs),
        global_moments: Some(config.moments == Moments::Global),
        ..settings.clone()
    };
    let body = toml::to_string(&resolved).map_err(|e| Failure::Internal(e.to_string()))?;
    Ok(format!("# absmst {command} --config <this file> --out <dir>\n{body}").into_bytes())
}

fn write_outputs(dir: &Path, output: &RunOutput) -> Result<(), Failure> {
    let internal = |path: &Path, e: std::io::Error| {
        Failure::Internal(format!("cannot write {}: {e}", path.display()))
    };
    for file in &output.files {
        let path = dir.join(&file.name);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(|e| internal(parent, e))?;
        }
        std::fs::write(&path, &file.bytes).map_err(|e| internal(&path, e))?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    let command = cli.command.name();
    let file = match &cli.config {
        Some(path) => config::load(path)?,
        None => Settings::default(),
    };
    let settings = cli.command.settings().or(file);
    let config = settings.pipeline()?;
    let out_dir = Settings::require(&settings.out, "out")?.clone();

    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Failure::User("--threads must be at least 1".into()));
        }
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| Failure::Internal(e.to_string()))?;
    let mut output = pool.install(|| execute(command, &settings, &config))?;

    output.files.push(pipeline::OutputFile {
        name: "config.toml".into(),
        bytes: snapshot(command, &settings, &config)?,
    });
    write_outputs(&out_dir, &output)?;
    for warning in &output.warnings {
        eprintln!("warning: {warning}");
    }
    println!(
        "wrote {} files to {}",
        output.files.len(),
        out_dir.display()
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match std::panic::catch_unwind(|| run(cli)) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(Failure::User(message))) => {
            eprintln!("error: {message}");
            ExitCode::from(2)
        }
        Ok(Err(Failure::Internal(message))) => {
            eprintln!("internal error: {message}");
            ExitCode::from(1)
        }
        Err(_) => ExitCode::from(1),
    }
}
