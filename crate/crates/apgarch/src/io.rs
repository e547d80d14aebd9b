//! Data ingestion and report serialization.
//!
//! The CSV loader targets exchange-rate style files: a date column plus one
//! column per series, missing cells marked "N/A" or left empty. Rows are
//! sorted ascending by date before differencing; returns default to
//! 100 * log(x_t / x_{t-1}).

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experiments::{McConfig, McResult};
use crate::model::{ModelOrder, Params, PowerMode, Series};
use crate::portmanteau::{DMethod, TestReport};
use crate::qmle::FitResult;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReturnTransform {
    /// 100 * log(x_t / x_{t-1})
    LogReturnTimes100,
    /// log(x_t / x_{t-1})
    LogReturn,
    /// Use the column values as-is.
    Raw,
}

#[derive(Debug, Clone)]
pub struct ReturnsConfig {
    pub columns: Vec<String>,
    pub transform: ReturnTransform,
    pub date_column: String,
}

impl ReturnsConfig {
    pub fn new(columns: Vec<String>) -> Self {
        Self {
            columns,
            transform: ReturnTransform::LogReturnTimes100,
            date_column: "Date".into(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct LoadedReturns {
    pub series: Series,
    /// Price rows kept after dropping missing values.
    pub rows_used: usize,
    /// Rows dropped because a requested cell was missing.
    pub rows_dropped: usize,
    pub first_date: String,
    pub last_date: String,
}

fn is_missing(cell: &str) -> bool {
    let c = cell.trim();
    c.is_empty() || c == "N/A" || c == "NA" || c == "-" || c == "."
}

/// Loads price columns from a CSV and transforms them into returns.
pub fn load_returns_csv(path: &Path, config: &ReturnsConfig) -> Result<LoadedReturns> {
    if config.columns.is_empty() {
        return Err(Error::Config("need at least one column".into()));
    }
    let mut reader = csv::ReaderBuilder::new().flexible(true).from_path(path)?;
    let headers = reader.headers()?.clone();
    let find = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    let date_idx = find(&config.date_column)?;
    let col_idx: Vec<usize> = config
        .columns
        .iter()
        .map(|c| find(c))
        .collect::<Result<Vec<_>>>()?;

    let mut rows: Vec<(String, Vec<f64>)> = Vec::new();
    let mut dropped = 0usize;
    for (line, record) in reader.records().enumerate() {
        let record = record?;
        let date = record.get(date_idx).unwrap_or("").trim().to_string();
        if date.is_empty() {
            dropped += 1;
            continue;
        }
        let mut vals = Vec::with_capacity(col_idx.len());
        let mut missing = false;
        for (&idx, name) in col_idx.iter().zip(&config.columns) {
            let cell = record.get(idx).unwrap_or("");
            if is_missing(cell) {
                missing = true;
                break;
            }
            let v: f64 = cell.trim().parse().map_err(|_| Error::ParseError {
                row: line + 2, // header is line 1
                column: name.clone(),
                value: cell.to_string(),
            })?;
            vals.push(v);
        }
        if missing {
            dropped += 1;
            continue;
        }
        rows.push((date, vals));
    }
    // numeric keys (e.g. an integer index column) sort numerically,
    // ISO dates lexicographically
    let all_numeric = rows.iter().all(|(d, _)| d.parse::<f64>().is_ok());
    if all_numeric {
        rows.sort_by(|a, b| {
            let (x, y) = (a.0.parse::<f64>().unwrap(), b.0.parse::<f64>().unwrap());
            x.partial_cmp(&y).unwrap()
        });
    } else {
        rows.sort_by(|a, b| a.0.cmp(&b.0));
    }
    if rows.is_empty() {
        return Err(Error::EmptySeries);
    }
    let rows_used = rows.len();
    let d = config.columns.len();

    let data = match config.transform {
        ReturnTransform::Raw => DMatrix::from_fn(rows.len(), d, |t, i| rows[t].1[i]),
        ReturnTransform::LogReturn | ReturnTransform::LogReturnTimes100 => {
            if rows.len() < 2 {
                return Err(Error::EmptySeries);
            }
            let scale = if config.transform == ReturnTransform::LogReturnTimes100 {
                100.0
            } else {
                1.0
            };
            DMatrix::from_fn(rows.len() - 1, d, |t, i| {
                scale * (rows[t + 1].1[i] / rows[t].1[i]).ln()
            })
        }
    };
    Ok(LoadedReturns {
        series: Series::new(data)?,
        rows_used,
        rows_dropped: dropped,
        first_date: rows.first().unwrap().0.clone(),
        last_date: rows.last().unwrap().0.clone(),
    })
}

/// Plain serializable mirror of `Params`: matrices stored row-major.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ParamsSpec {
    pub omega: Vec<f64>,
    #[serde(default)]
    pub a_plus: Vec<Vec<f64>>,
    #[serde(default)]
    pub a_minus: Vec<Vec<f64>>,
    #[serde(default)]
    pub b: Vec<Vec<f64>>,
    #[serde(default)]
    pub rho: Vec<f64>,
    pub delta: Vec<f64>,
}

impl ParamsSpec {
    pub fn from_params(p: &Params) -> Self {
        let flat = |m: &DMatrix<f64>| -> Vec<f64> {
            let d = m.nrows();
            (0..d)
                .flat_map(|r| (0..d).map(move |c| (r, c)))
                .map(|(r, c)| m[(r, c)])
                .collect()
        };
        Self {
            omega: p.omega.iter().copied().collect(),
            a_plus: p.a_plus.iter().map(flat).collect(),
            a_minus: p.a_minus.iter().map(flat).collect(),
            b: p.b.iter().map(flat).collect(),
            rho: p.rho.iter().copied().collect(),
            delta: p.delta.iter().copied().collect(),
        }
    }

    pub fn into_params(self, order: &ModelOrder) -> Result<Params> {
        let d = order.d;
        let unflat = |flat: &[f64], what: &str| -> Result<DMatrix<f64>> {
            if flat.len() != d * d {
                return Err(Error::Config(format!(
                    "{what} must have {} row-major entries, got {}",
                    d * d,
                    flat.len()
                )));
            }
            Ok(DMatrix::from_row_slice(d, d, flat))
        };
        let blocks = |mats: &[Vec<f64>], count: usize, what: &str| -> Result<Vec<DMatrix<f64>>> {
            if mats.len() != count {
                return Err(Error::Config(format!(
                    "{what} needs {count} matrices, got {}",
                    mats.len()
                )));
            }
            mats.iter().map(|m| unflat(m, what)).collect()
        };
        Ok(Params {
            omega: DVector::from_vec(self.omega),
            a_plus: blocks(&self.a_plus, order.q, "a_plus")?,
            a_minus: blocks(&self.a_minus, order.q, "a_minus")?,
            b: blocks(&self.b, order.p, "b")?,
            rho: DVector::from_vec(self.rho),
            delta: DVector::from_vec(self.delta),
        })
    }
}

/// Reads a params file (TOML or JSON by extension).
pub fn load_params_file(path: &Path, order: &ModelOrder) -> Result<Params> {
    let text = std::fs::read_to_string(path)?;
    let spec: ParamsSpec = if path.extension().is_some_and(|e| e == "json") {
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("params JSON: {e}")))?
    } else {
        toml::from_str(&text).map_err(|e| Error::Config(format!("params TOML: {e}")))?
    };
    spec.into_params(order)
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ModelDescriptor {
    pub d: usize,
    pub p: usize,
    pub q: usize,
    pub delta_mode: String,
}

impl ModelDescriptor {
    pub fn from_order(order: &ModelOrder) -> Self {
        Self {
            d: order.d,
            p: order.p,
            q: order.q,
            delta_mode: match order.power_mode {
                PowerMode::KnownDelta => "known".into(),
                PowerMode::EstimatedDelta => "estimated".into(),
            },
        }
    }

    pub fn to_order(&self) -> Result<ModelOrder> {
        let mode = match self.delta_mode.as_str() {
            "known" => PowerMode::KnownDelta,
            "estimated" => PowerMode::EstimatedDelta,
            other => return Err(Error::Config(format!("unknown delta_mode {other:?}"))),
        };
        Ok(ModelOrder::new(self.d, self.p, self.q, mode))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct TestEntry {
    pub m: usize,
    pub stat_r: f64,
    pub pvalue_r: f64,
    pub stat_rho: f64,
    pub pvalue_rho: f64,
    pub bands: Vec<f64>,
}

impl TestEntry {
    pub fn from_report(r: &TestReport) -> Self {
        Self {
            m: r.m,
            stat_r: r.stat_r,
            pvalue_r: r.pvalue_r,
            stat_rho: r.stat_rho,
            pvalue_rho: r.pvalue_rho,
            bands: r.bands.clone(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ReportMeta {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub version: String,
    pub init_policy: String,
    #[serde(default)]
    pub columns: Vec<String>,
    #[serde(default = "default_date_column")]
    pub date_column: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transform: Option<ReturnTransform>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub method: Option<String>,
}

/// Fit-plus-diagnostics document: the JSON artifact of `fit`/`test`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ReportDocument {
    pub model: ModelDescriptor,
    pub params_hat: ParamsSpec,
    pub vcov_diag: Vec<f64>,
    pub loglik_mean: f64,
    pub tests: Vec<TestEntry>,
    pub meta: ReportMeta,
}

impl ReportDocument {
    pub fn from_fit(order: &ModelOrder, fit: &FitResult, meta: ReportMeta) -> Self {
        Self {
            model: ModelDescriptor::from_order(order),
            params_hat: ParamsSpec::from_params(&fit.params_hat),
            vcov_diag: fit.vcov.diagonal().iter().copied().collect(),
            loglik_mean: fit.loglik_mean,
            tests: Vec::new(),
            meta,
        }
    }
}

pub fn write_report_json(doc: &ReportDocument) -> String {
    serde_json::to_string_pretty(doc).expect("report serialization cannot fail")
}

pub fn parse_report_json(text: &str) -> Result<ReportDocument> {
    serde_json::from_str(text).map_err(|e| Error::Config(format!("report JSON: {e}")))
}

/// Lag-grid table: one row per document, p-values for m = 1..12 plus the
/// power estimate and mean log-likelihood.
pub fn write_report_csv(doc: &ReportDocument) -> String {
    let m_max = doc.tests.iter().map(|t| t.m).max().unwrap_or(0);
    let mut out = String::from("model");
    for m in 1..=m_max {
        out.push_str(&format!(",m{m}"));
    }
    out.push_str(",delta,loglik\n");
    if doc.tests.is_empty() {
        return out;
    }
    out.push_str(&format!(
        "APGARCH({},{}) {}",
        doc.model.p, doc.model.q, doc.model.delta_mode
    ));
    for m in 1..=m_max {
        match doc.tests.iter().find(|t| t.m == m) {
            Some(t) => out.push_str(&format!(",{:.3}", t.pvalue_r)),
            None => out.push(','),
        }
    }
    let delta = doc
        .params_hat
        .delta
        .iter()
        .map(|v| format!("{v:.3}"))
        .collect::<Vec<_>>()
        .join(";");
    out.push_str(&format!(",({delta}),{:.4}\n", doc.loglik_mean));
    out
}

/// TOML schema for the Monte Carlo commands.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct McConfigFile {
    pub n: usize,
    pub replications: usize,
    #[serde(default = "default_m_max")]
    pub m_max: usize,
    #[serde(default = "default_alphas")]
    pub alphas: Vec<f64>,
    pub base_seed: u64,
    #[serde(default = "default_burn_in")]
    pub burn_in: usize,
    /// "known" or "estimated" for the fitted model.
    #[serde(default = "default_delta_mode")]
    pub delta_mode: String,
    #[serde(default = "default_method")]
    pub method: String,
    pub dgp: McModelSection,
    /// Fitted order; defaults to the DGP order.
    #[serde(default)]
    pub fitted: Option<McOrderSection>,
    /// Power vector fixed in the fits (known mode); defaults to the DGP's.
    #[serde(default)]
    pub fitted_delta: Option<Vec<f64>>,
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
    #[serde(default = "default_grad_tol")]
    pub grad_tol: f64,
}

pub(crate) fn default_date_column() -> String {
    "Date".into()
}

impl Default for ReportMeta {
    fn default() -> Self {
        Self {
            seed: None,
            version: String::new(),
            init_policy: String::new(),
            columns: Vec::new(),
            date_column: default_date_column(),
            transform: None,
            alpha: None,
            method: None,
        }
    }
}

fn default_m_max() -> usize {
    12
}
fn default_alphas() -> Vec<f64> {
    vec![0.01, 0.05, 0.10]
}
fn default_burn_in() -> usize {
    500
}
fn default_delta_mode() -> String {
    "known".into()
}
fn default_method() -> String {
    "general".into()
}
fn default_max_iters() -> usize {
    500
}
fn default_grad_tol() -> f64 {
    1e-4
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct McModelSection {
    pub d: usize,
    pub p: usize,
    pub q: usize,
    pub params: ParamsSpec,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct McOrderSection {
    pub p: usize,
    pub q: usize,
}

pub fn parse_method(name: &str) -> Result<DMethod> {
    match name {
        "general" => Ok(DMethod::General),
        "lingli" => Ok(DMethod::LingLiSimplified),
        other => Err(Error::Config(format!(
            "unknown method {other:?}, use general|lingli"
        ))),
    }
}

pub fn load_mc_config(path: &Path) -> Result<McConfig> {
    let text = std::fs::read_to_string(path)?;
    let file: McConfigFile =
        toml::from_str(&text).map_err(|e| Error::Config(format!("mc config TOML: {e}")))?;
    let mode = match file.delta_mode.as_str() {
        "known" => PowerMode::KnownDelta,
        "estimated" => PowerMode::EstimatedDelta,
        other => return Err(Error::Config(format!("unknown delta_mode {other:?}"))),
    };
    let dgp_order = ModelOrder::new(file.dgp.d, file.dgp.p, file.dgp.q, PowerMode::KnownDelta);
    let dgp_params = file.dgp.params.clone().into_params(&dgp_order)?;
    let dgp_params = crate::model::validate_params(&dgp_order, dgp_params)?;
    let fitted_order = match &file.fitted {
        Some(f) => ModelOrder::new(file.dgp.d, f.p, f.q, mode),
        None => ModelOrder::new(file.dgp.d, file.dgp.p, file.dgp.q, mode),
    };
    let mut cfg = McConfig::new(
        dgp_order,
        dgp_params,
        fitted_order,
        file.n,
        file.replications,
        file.base_seed,
    );
    cfg.m_max = file.m_max;
    cfg.alphas = file.alphas;
    cfg.burn_in = file.burn_in;
    cfg.method = parse_method(&file.method)?;
    cfg.max_iters = file.max_iters;
    cfg.grad_tol = file.grad_tol;
    cfg.fitted_delta = file.fitted_delta.map(DVector::from_vec);
    Ok(cfg)
}

/// Rejection-frequency table: rows (delta, n, alpha), columns m = 1..m_max.
pub fn mc_result_csv(result: &McResult, delta: &[f64], n: usize) -> String {
    let mut out = String::from("delta,n,alpha");
    for m in 1..=result.m_max {
        out.push_str(&format!(",m{m}"));
    }
    out.push('\n');
    let delta_label = delta
        .iter()
        .map(|v| format!("{v}"))
        .collect::<Vec<_>>()
        .join(";");
    for (ai, alpha) in result.alphas.iter().enumerate() {
        out.push_str(&format!("({delta_label}),{n},{alpha}"));
        for m in 1..=result.m_max {
            out.push_str(&format!(",{:.1}", result.rejection_freq[ai][m - 1]));
        }
        out.push('\n');
    }
    out
}

/// Raw per-replication statistics as a JSON blob.
pub fn mc_result_raw_json(result: &McResult) -> String {
    #[derive(Serialize)]
    struct Raw<'a> {
        alphas: &'a [f64],
        m_max: usize,
        n_failed_fits: usize,
        n_used: usize,
        ci_bounds_percent: &'a [(f64, f64)],
        elapsed_secs: f64,
        warnings: &'a [String],
        replications: Vec<RawRep<'a>>,
    }
    #[derive(Serialize)]
    struct RawRep<'a> {
        replication: u64,
        converged: bool,
        stats: &'a [f64],
        pvalues: &'a [f64],
    }
    let doc = Raw {
        alphas: &result.alphas,
        m_max: result.m_max,
        n_failed_fits: result.n_failed_fits,
        n_used: result.n_used,
        ci_bounds_percent: &result.ci_bounds,
        elapsed_secs: result.elapsed_secs,
        warnings: &result.warnings,
        replications: result
            .raw
            .iter()
            .map(|r| RawRep {
                replication: r.replication,
                converged: r.converged,
                stats: &r.stats,
                pvalues: &r.pvalues,
            })
            .collect(),
    };
    serde_json::to_string_pretty(&doc).expect("raw serialization cannot fail")
}

/// Simulated series as CSV with a leading index column.
pub fn series_to_csv(series: &Series) -> String {
    let mut out = String::from("t");
    for i in 1..=series.dim() {
        out.push_str(&format!(",eps{i}"));
    }
    out.push('\n');
    for t in 0..series.n() {
        out.push_str(&t.to_string());
        for i in 0..series.dim() {
            out.push_str(&format!(",{}", series.value(t, i)));
        }
        out.push('\n');
    }
    out
}
