//! Command-line front end: simulate, fit, test, Monte Carlo size/power runs
//! and the stationarity check.

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use apgarch::experiments::McResult;
use apgarch::experiments::{run_power_experiment, run_size_experiment};
use apgarch::io::{
    self, load_mc_config, load_params_file, load_returns_csv, parse_method, parse_report_json,
    write_report_csv, write_report_json, ReportDocument, ReportMeta, ReturnTransform,
    ReturnsConfig, TestEntry,
};
use apgarch::model::{
    lyapunov_exponent, simulate, validate_params, InitPolicy, ModelOrder, PowerMode,
};
use apgarch::nalgebra::DVector;
use apgarch::portmanteau::adequacy_tests;
use apgarch::qmle::{evaluate_at, fit, FitConfig, InitSpec};
use apgarch::rng::RngStream;

#[derive(Parser)]
#[command(
    name = "apgarch",
    version,
    about = "CCC-APGARCH modeling, estimation and adequacy tests"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum DeltaMode {
    Known,
    Estimated,
}

#[derive(Clone, Copy, ValueEnum)]
enum TransformArg {
    /// 100 * log(x_t / x_{t-1})
    Log100,
    /// log(x_t / x_{t-1})
    Log,
    /// use the column values as-is
    Raw,
}

impl From<TransformArg> for ReturnTransform {
    fn from(t: TransformArg) -> Self {
        match t {
            TransformArg::Log100 => ReturnTransform::LogReturnTimes100,
            TransformArg::Log => ReturnTransform::LogReturn,
            TransformArg::Raw => ReturnTransform::Raw,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a path from a parameter file and write it as CSV.
    Simulate {
        /// Model order as d,p,q
        #[arg(long)]
        order: String,
        /// Parameter file (TOML or JSON)
        #[arg(long)]
        params: PathBuf,
        #[arg(long)]
        n: usize,
        #[arg(long = "burn-in", default_value_t = 500)]
        burn_in: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Estimate a model on CSV return data and write the fit as JSON.
    Fit {
        #[arg(long)]
        data: PathBuf,
        /// Comma-separated column names to model
        #[arg(long)]
        columns: String,
        /// Model order as d,p,q
        #[arg(long)]
        order: String,
        #[arg(long = "delta-mode", value_enum)]
        delta_mode: DeltaMode,
        /// Power vector to hold fixed (known mode), e.g. 1,1
        #[arg(long)]
        delta: Option<String>,
        #[arg(long, value_enum, default_value = "log100")]
        transform: TransformArg,
        #[arg(long = "date-column", default_value = "Date")]
        date_column: String,
        /// Explicit starting values (TOML/JSON); default is moment-based
        #[arg(long = "init-params")]
        init_params: Option<PathBuf>,
        #[arg(long = "max-iters", default_value_t = 500)]
        max_iters: usize,
        #[arg(long = "grad-tol", default_value_t = 1e-5)]
        grad_tol: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the adequacy tests for a fitted model against data.
    Test {
        /// Fit document produced by `fit`
        #[arg(long)]
        fit: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long = "m-max", default_value_t = 12)]
        m_max: usize,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        /// Covariance estimator: general | lingli
        #[arg(long, default_value = "general")]
        method: String,
        /// Output path; .csv gets the lag grid, anything else JSON
        #[arg(long)]
        out: PathBuf,
    },
    /// Monte Carlo empirical size (fitted order = generating order).
    McSize {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Optional JSON dump of per-replication statistics
        #[arg(long = "raw-out")]
        raw_out: Option<PathBuf>,
    },
    /// Monte Carlo empirical power (misspecified fitted order).
    McPower {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long = "raw-out")]
        raw_out: Option<PathBuf>,
    },
    /// Estimate the top Lyapunov exponent of the companion products.
    Stationarity {
        /// Model order as d,p,q
        #[arg(long)]
        order: String,
        #[arg(long)]
        params: PathBuf,
        #[arg(long, default_value_t = 10_000)]
        products: usize,
        #[arg(long)]
        seed: u64,
    },
}

fn parse_order(text: &str, mode: PowerMode) -> Result<ModelOrder> {
    let parts: Vec<usize> = text
        .split(',')
        .map(|s| s.trim().parse::<usize>().context("order must be d,p,q"))
        .collect::<Result<Vec<_>>>()?;
    if parts.len() != 3 || parts[0] == 0 {
        bail!("order must be d,p,q with d >= 1, got {text:?}");
    }
    Ok(ModelOrder::new(parts[0], parts[1], parts[2], mode))
}

fn parse_delta(text: &str, d: usize) -> Result<DVector<f64>> {
    let vals: Vec<f64> = text
        .split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .context("delta must be comma-separated reals")
        })
        .collect::<Result<Vec<_>>>()?;
    if vals.len() != d {
        bail!("delta needs {d} components, got {}", vals.len());
    }
    Ok(DVector::from_vec(vals))
}

fn write_mc_outputs(
    result: &McResult,
    delta: &[f64],
    n: usize,
    out: &PathBuf,
    raw_out: &Option<PathBuf>,
) -> Result<()> {
    std::fs::write(out, io::mc_result_csv(result, delta, n))?;
    if let Some(raw) = raw_out {
        std::fs::write(raw, io::mc_result_raw_json(result))?;
    }
    for w in &result.warnings {
        eprintln!("warning: {w}");
    }
    eprintln!(
        "{} replications used, {} failed fits, {:.1}s",
        result.n_used, result.n_failed_fits, result.elapsed_secs
    );
    Ok(())
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Simulate {
            order,
            params,
            n,
            burn_in,
            seed,
            out,
        } => {
            let order = parse_order(&order, PowerMode::KnownDelta)?;
            let params = load_params_file(&params, &order)?;
            let params = validate_params(&order, params)?;
            let series = simulate(&order, &params, n, burn_in, RngStream::new(seed, 0))?;
            std::fs::write(&out, io::series_to_csv(&series))?;
            eprintln!("wrote {} observations to {}", series.n(), out.display());
        }
        Command::Fit {
            data,
            columns,
            order,
            delta_mode,
            delta,
            transform,
            date_column,
            init_params,
            max_iters,
            grad_tol,
            out,
        } => {
            let mode = match delta_mode {
                DeltaMode::Known => PowerMode::KnownDelta,
                DeltaMode::Estimated => PowerMode::EstimatedDelta,
            };
            let order = parse_order(&order, mode)?;
            let columns: Vec<String> = columns.split(',').map(|s| s.trim().to_string()).collect();
            if columns.len() != order.d {
                bail!("{} columns for a d={} model", columns.len(), order.d);
            }
            let transform: ReturnTransform = transform.into();
            let loaded = load_returns_csv(
                &data,
                &ReturnsConfig {
                    columns: columns.clone(),
                    transform,
                    date_column: date_column.clone(),
                },
            )?;
            eprintln!(
                "loaded {} rows ({} dropped), returns {}..{}, n = {}",
                loaded.rows_used,
                loaded.rows_dropped,
                loaded.first_date,
                loaded.last_date,
                loaded.series.n()
            );
            let fixed_delta = match (mode, &delta) {
                (PowerMode::KnownDelta, Some(text)) => Some(parse_delta(text, order.d)?),
                (PowerMode::KnownDelta, None) => {
                    bail!("--delta is required with --delta-mode known")
                }
                (PowerMode::EstimatedDelta, _) => None,
            };
            let init = match init_params {
                Some(path) => InitSpec::Explicit(load_params_file(&path, &order)?),
                None => InitSpec::Auto,
            };
            let config = FitConfig {
                init,
                fixed_delta,
                max_iters,
                grad_tol,
                ..FitConfig::default()
            };
            let result = fit(&order, &loaded.series, &config)?;
            eprintln!(
                "converged in {} iterations, mean log-likelihood {:.4}",
                result.iterations, result.loglik_mean
            );
            let meta = ReportMeta {
                seed: None,
                version: env!("CARGO_PKG_VERSION").into(),
                init_policy: result.init_policy.label(),
                columns,
                date_column,
                transform: Some(transform),
                alpha: None,
                method: None,
            };
            let doc = ReportDocument::from_fit(&order, &result, meta);
            std::fs::write(&out, write_report_json(&doc))?;
            eprintln!("wrote fit to {}", out.display());
        }
        Command::Test {
            fit: fit_path,
            data,
            m_max,
            alpha,
            method,
            out,
        } => {
            let doc = parse_report_json(&std::fs::read_to_string(&fit_path)?)?;
            let order = doc.model.to_order()?;
            let columns = doc.meta.columns.clone();
            if columns.is_empty() {
                bail!("fit document carries no column list; cannot reload the data");
            }
            let transform = doc
                .meta
                .transform
                .unwrap_or(ReturnTransform::LogReturnTimes100);
            let loaded = load_returns_csv(
                &data,
                &ReturnsConfig {
                    columns: columns.clone(),
                    transform,
                    date_column: doc.meta.date_column.clone(),
                },
            )?;
            let params = doc.params_hat.clone().into_params(&order)?;
            let params = validate_params(&order, params)?;
            let method_enum = parse_method(&method)?;
            let state = evaluate_at(&order, &params, &loaded.series, &InitPolicy::OmegaStart)?;
            let reports = adequacy_tests(
                &order,
                &state,
                &loaded.series,
                &InitPolicy::OmegaStart,
                m_max,
                alpha,
                method_enum,
            )?;
            let mut doc_out = doc;
            doc_out.tests = reports.iter().map(TestEntry::from_report).collect();
            doc_out.meta.alpha = Some(alpha);
            doc_out.meta.method = Some(method);
            for r in &reports {
                println!(
                    "m={:2}  stat={:9.3}  p={:.3}  band(+/-)={:.4}",
                    r.m,
                    r.stat_r,
                    r.pvalue_r,
                    r.bands.last().copied().unwrap_or(f64::NAN)
                );
            }
            let text = if out.extension().is_some_and(|e| e == "csv") {
                write_report_csv(&doc_out)
            } else {
                write_report_json(&doc_out)
            };
            std::fs::write(&out, text)?;
            eprintln!("wrote report to {}", out.display());
        }
        Command::McSize {
            config,
            out,
            raw_out,
        } => {
            let cfg = load_mc_config(&config)?;
            let delta: Vec<f64> = cfg.dgp_params.delta.iter().copied().collect();
            let n = cfg.n;
            let result = run_size_experiment(&cfg)?;
            write_mc_outputs(&result, &delta, n, &out, &raw_out)?;
        }
        Command::McPower {
            config,
            out,
            raw_out,
        } => {
            let cfg = load_mc_config(&config)?;
            let delta: Vec<f64> = cfg.dgp_params.delta.iter().copied().collect();
            let n = cfg.n;
            let result = run_power_experiment(&cfg)?;
            write_mc_outputs(&result, &delta, n, &out, &raw_out)?;
        }
        Command::Stationarity {
            order,
            params,
            products,
            seed,
        } => {
            let order = parse_order(&order, PowerMode::KnownDelta)?;
            let params = load_params_file(&params, &order)?;
            let params = validate_params(&order, params)?;
            let est = lyapunov_exponent(&order, &params, RngStream::new(seed, 0), products)?;
            println!(
                "gamma_hat = {:.4}  (std err {:.4}, {} products)",
                est.gamma_hat, est.std_err, est.n_products
            );
            println!(
                "strict stationarity condition gamma < 0: {}",
                if est.is_stationary() {
                    "satisfied"
                } else {
                    "VIOLATED"
                }
            );
        }
    }
    Ok(())
}
