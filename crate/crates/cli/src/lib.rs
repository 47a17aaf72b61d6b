//! Command-line front end and JSON service for the rate toolkit.

mod config;
mod server;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use tqkd::darkcount::{write_darkcount_csv, DarkCountRow, DarkCountScenario};
use tqkd::downtime::{
    adjusted_rate, build_detector_chain, build_imc, build_omc, select_method, write_downtime_csv,
    ImcMethod,
};
use tqkd::jitter::{write_jitter_csv, JitterRow};
use tqkd::pipeline::{
    assemble_rates, optimize_bins, sweep, write_rates_csv, Axis, RateReport, SweepSpec,
};
use tqkd::sim::{compare, run_experiment, DetectOptions};
use tqkd::SystemParams;

pub use config::{load_config, ConfigFile, FileOptions};
pub use server::{router, serve};

pub const SEPARABLE_BANNER: &str =
    "note: jitter/dark-count and downtime losses are combined as independent factors";

#[derive(Debug, Parser)]
#[command(
    name = "tqkd",
    version,
    about = "Secret key rates for time-binned entanglement QKD"
)]
pub struct Cli {
    /// Flat JSON file with parameter and command options; flags override it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    #[command(flatten)]
    pub params: ParamArgs,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Default, Args)]
pub struct ParamArgs {
    /// Photon-pair rate, pairs per second.
    #[arg(long, global = true)]
    pub lambda_p: Option<f64>,
    /// Dark count rate per detector, counts per second.
    #[arg(long, global = true)]
    pub lambda_dc: Option<f64>,
    /// Frame width, seconds.
    #[arg(long, global = true)]
    pub frame_width: Option<f64>,
    /// Bins per frame.
    #[arg(short = 'n', long = "bins", global = true)]
    pub bins_per_frame: Option<usize>,
    /// Detector jitter standard deviation, seconds.
    #[arg(long, global = true, conflicts_with = "fwhm")]
    pub sigma_d: Option<f64>,
    /// Detector jitter full width at half maximum, seconds.
    #[arg(long, global = true)]
    pub fwhm: Option<f64>,
    /// Downtime in bins.
    #[arg(short = 'd', long = "downtime", global = true)]
    pub downtime_bins: Option<usize>,
    /// Downtime in seconds (must agree with the downtime in bins).
    #[arg(long, global = true)]
    pub downtime_seconds: Option<f64>,
    /// Reconciliation efficiency f >= 1.
    #[arg(long = "efficiency", global = true)]
    pub reconciliation_efficiency: Option<f64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Rate report for one operating point, as JSON.
    Rates,
    /// CSV table over a grid along one parameter axis.
    Sweep(SweepArgs),
    /// Event-level simulation compared against the closed forms.
    Simulate(SimulateArgs),
    /// Dump a frame-level Markov chain.
    Chain(ChainArgs),
    /// Best power-of-two bin count.
    Optimize(OptimizeArgs),
    /// Serve `POST /v1/rates` over HTTP.
    Serve(ServeArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Table {
    Rates,
    Downtime,
    Jitter,
    Darkcount,
}

#[derive(Debug, Clone, Default, Args)]
pub struct SweepArgs {
    /// Swept parameter: n, p, d, sigma_ratio or dc_ratio.
    #[arg(long)]
    pub axis: Option<Axis>,
    /// First grid value.
    #[arg(long)]
    pub from: Option<f64>,
    /// Last grid value.
    #[arg(long)]
    pub to: Option<f64>,
    /// Number of grid points [default: 10].
    #[arg(long)]
    pub points: Option<usize>,
    /// Log-spaced grid.
    #[arg(long)]
    pub log: bool,
    /// Table to write [default: rates].
    #[arg(long, value_enum)]
    pub table: Option<Table>,
    /// Output file; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct SimulateArgs {
    /// Number of frames [default: 100000].
    #[arg(long)]
    pub frames: Option<u64>,
    /// RNG seed [default: 1].
    #[arg(long)]
    pub seed: Option<u64>,
    /// Print JSON instead of a table.
    #[arg(long)]
    pub json: bool,
    /// Write Alice's retained symbols as `frame_index,symbol` CSV.
    #[arg(long)]
    pub symbols_out: Option<PathBuf>,
    /// Dead time acts on pair photons only.
    #[arg(long)]
    pub dark_counts_bypass_dead_time: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChainChoice {
    /// Whichever input chain has fewer states.
    Auto,
    Bmcm,
    Rmcm,
    Omc,
    Detector,
}

#[derive(Debug, Clone, Default, Args)]
pub struct ChainArgs {
    /// Chain to dump [default: auto].
    #[arg(long, value_enum)]
    pub kind: Option<ChainChoice>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct OptimizeArgs {
    /// Largest bin count tried [default: 1024].
    #[arg(long)]
    pub n_max: Option<usize>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct ServeArgs {
    /// Listen address [default: 127.0.0.1:8080].
    #[arg(long)]
    pub addr: Option<String>,
}

/// Parameters from defaults, then the config file, then flags.
pub fn resolve_params(file: Option<&ConfigFile>, args: &ParamArgs) -> Result<SystemParams> {
    let mut map = match serde_json::to_value(SystemParams::default())? {
        serde_json::Value::Object(m) => m,
        _ => unreachable!("params serialize to an object"),
    };
    if let Some(f) = file {
        for (k, v) in &f.params {
            map.insert(k.clone(), v.clone());
        }
    }
    let mut set = |k: &str, v: Option<serde_json::Value>| {
        if let Some(v) = v {
            map.insert(k.to_string(), v);
        }
    };
    set("lambda_p", args.lambda_p.map(Into::into));
    set("lambda_dc", args.lambda_dc.map(Into::into));
    set("frame_width", args.frame_width.map(Into::into));
    set("bins_per_frame", args.bins_per_frame.map(Into::into));
    set("sigma_d", args.sigma_d.map(Into::into));
    if let Some(fwhm) = args.fwhm {
        set("sigma_d", Some(tqkd::params::fwhm_to_sigma(fwhm)?.into()));
    }
    set("downtime_bins", args.downtime_bins.map(Into::into));
    set("downtime_seconds", args.downtime_seconds.map(Into::into));
    set(
        "reconciliation_efficiency",
        args.reconciliation_efficiency.map(Into::into),
    );
    let params: SystemParams =
        serde_json::from_value(serde_json::Value::Object(map)).context("parameters")?;
    Ok(params.validated()?)
}

fn open_out<'a>(path: Option<&PathBuf>, stdout: &'a mut dyn Write) -> Result<Box<dyn Write + 'a>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(stdout),
    })
}

fn banner(report: &RateReport, err: &mut dyn Write) -> Result<()> {
    if report.separable_approx {
        writeln!(err, "{SEPARABLE_BANNER}")?;
    }
    Ok(())
}

/// Runs a parsed command, writing results to `out` and notes to `err`.
pub fn run(cli: Cli, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    let file = cli.config.as_ref().map(load_config).transpose()?;
    let opts = file.as_ref().map(|f| f.options.clone()).unwrap_or_default();
    let params = resolve_params(file.as_ref(), &cli.params)?;

    match cli.command {
        Command::Rates => {
            let report = assemble_rates(&params)?;
            banner(&report, err)?;
            serde_json::to_writer_pretty(&mut *out, &report)?;
            writeln!(out)?;
        }
        Command::Sweep(a) => {
            let spec = SweepSpec {
                axis: a.axis.or(opts.axis).context("--axis is required")?,
                from: a.from.or(opts.from).context("--from is required")?,
                to: a.to.or(opts.to).context("--to is required")?,
                points: a.points.or(opts.points).unwrap_or(10),
                log: a.log || opts.log.unwrap_or(false),
            };
            let table = a.table.or(opts.table).unwrap_or(Table::Rates);
            let grid = spec.grid()?;
            let out_path = a.out.or(opts.out);
            let mut w = open_out(out_path.as_ref(), out)?;
            write_table(table, spec.axis, &grid, &params, &mut w, err)?;
            w.flush()?;
        }
        Command::Simulate(a) => {
            let frames = a.frames.or(opts.frames).unwrap_or(100_000);
            let seed = a.seed.or(opts.seed).unwrap_or(1);
            let dopts = DetectOptions {
                dead_time_on_dark_counts: !a.dark_counts_bypass_dead_time,
            };
            let exp = run_experiment(&params, frames, seed, dopts)?;
            let table = compare(&exp)?;
            if let Some(p) = a.symbols_out.as_ref() {
                let f = File::create(p).with_context(|| format!("creating {}", p.display()))?;
                let mut f = BufWriter::new(f);
                exp.alice.write_csv(&mut f)?;
                f.flush()?;
            }
            if a.json {
                serde_json::to_writer_pretty(&mut *out, &table)?;
                writeln!(out)?;
            } else {
                write!(out, "{table}")?;
            }
        }
        Command::Chain(a) => {
            let (n, d, p) = (
                params.bins_per_frame,
                params.downtime_bins,
                params.p_occupy(),
            );
            let chain = match a.kind.or(opts.kind).unwrap_or(ChainChoice::Auto) {
                ChainChoice::Auto => build_imc(n, d, p, select_method(n, d)?)?,
                ChainChoice::Bmcm => build_imc(n, d, p, ImcMethod::Bmcm)?,
                ChainChoice::Rmcm => build_imc(n, d, p, ImcMethod::Rmcm)?,
                ChainChoice::Omc => build_omc(n, d, p)?,
                ChainChoice::Detector => build_detector_chain(p, d)?,
            };
            out.write_all(chain.dump().as_bytes())?;
        }
        Command::Optimize(a) => {
            let n_max = a.n_max.or(opts.n_max).unwrap_or(1024);
            let (best, report) = optimize_bins(&params, n_max)?;
            banner(&report, err)?;
            serde_json::to_writer_pretty(
                &mut *out,
                &serde_json::json!({ "best_n": best, "report": report }),
            )?;
            writeln!(out)?;
        }
        Command::Serve(a) => {
            let addr = a
                .addr
                .or(opts.addr)
                .unwrap_or_else(|| "127.0.0.1:8080".to_string());
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(async {
                let listener = tokio::net::TcpListener::bind(&addr)
                    .await
                    .with_context(|| format!("binding {addr}"))?;
                writeln!(err, "listening on http://{}", listener.local_addr()?)?;
                serve(listener).await
            })?;
        }
    }
    Ok(())
}

fn write_table(
    table: Table,
    axis: Axis,
    grid: &[f64],
    params: &SystemParams,
    w: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<()> {
    let at = |v: f64| -> Result<SystemParams> { Ok(axis.apply(params, v)?.validated()?) };
    match table {
        Table::Rates => {
            let points = sweep(axis, grid, params);
            if points
                .iter()
                .filter_map(|p| p.report.as_ref())
                .any(|r| r.separable_approx)
            {
                writeln!(err, "{SEPARABLE_BANNER}")?;
            }
            write_rates_csv(w, &points)?;
        }
        Table::Downtime => {
            let rows = grid
                .iter()
                .map(|&v| {
                    let p = at(v)?;
                    Ok(adjusted_rate(
                        p.bins_per_frame,
                        p.downtime_bins,
                        p.p_occupy(),
                    )?)
                })
                .collect::<Result<Vec<_>>>()?;
            write_downtime_csv(w, &rows)?;
        }
        Table::Jitter => {
            let rows = grid
                .iter()
                .map(|&v| {
                    let p = at(v)?;
                    Ok(JitterRow::compute(p.bins_per_frame, p.jitter_ratio())?)
                })
                .collect::<Result<Vec<_>>>()?;
            write_jitter_csv(w, &rows)?;
        }
        Table::Darkcount => {
            let rows = grid
                .iter()
                .map(|&v| {
                    let p = at(v)?;
                    let s = DarkCountScenario::from_params(&p)?;
                    Ok(DarkCountRow::compute(&s, p.lambda_dc / p.lambda_p)?)
                })
                .collect::<Result<Vec<_>>>()?;
            write_darkcount_csv(w, &rows)?;
        }
    }
    Ok(())
}

/// Parses `args` (including the program name) and runs against stdout/stderr.
pub fn main_with_args<I, T>(args: I) -> Result<()>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = Cli::try_parse_from(args)?;
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run(cli, &mut stdout.lock(), &mut stderr.lock())
}
