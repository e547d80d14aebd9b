//! Monte Carlo harness: empirical size and power of the adequacy test.
//!
//! Replications are independent tasks keyed by stream id; the reduction runs
//! in replication order so parallel and serial executions produce identical
//! tables. Failed fits are counted and excluded from the rejection
//! denominators.

use std::time::Instant;

use nalgebra::DVector;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{simulate, InitPolicy, ModelOrder, Params, PowerMode};
use crate::portmanteau::{adequacy_tests, DMethod};
use crate::qmle::{fit, FitConfig, InitSpec};
use crate::rng::RngStream;
use crate::special::normal_quantile;

#[derive(Debug, Clone)]
pub struct McConfig {
    pub dgp_order: ModelOrder,
    pub dgp_params: Params,
    /// Model estimated on each replication (its power_mode governs the fit).
    pub fitted_order: ModelOrder,
    /// Sample length per replication.
    pub n: usize,
    /// Number of replications.
    pub replications: usize,
    pub m_max: usize,
    pub alphas: Vec<f64>,
    pub base_seed: u64,
    pub burn_in: usize,
    pub method: DMethod,
    pub max_iters: usize,
    pub grad_tol: f64,
    pub delta_bounds: (f64, f64),
    /// Power vector held fixed when fitting in KnownDelta mode; defaults to
    /// the generator's delta (set it to study power misspecification).
    pub fitted_delta: Option<DVector<f64>>,
}

impl McConfig {
    pub fn new(
        dgp_order: ModelOrder,
        dgp_params: Params,
        fitted_order: ModelOrder,
        n: usize,
        replications: usize,
        base_seed: u64,
    ) -> Self {
        Self {
            dgp_order,
            dgp_params,
            fitted_order,
            n,
            replications,
            m_max: 12,
            alphas: vec![0.01, 0.05, 0.10],
            base_seed,
            burn_in: 500,
            method: DMethod::General,
            max_iters: 500,
            grad_tol: 1e-4,
            delta_bounds: (0.1, 8.0),
            fitted_delta: None,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(Error::Config("need at least one replication".into()));
        }
        if self.m_max == 0 || self.m_max >= self.n {
            return Err(Error::Config(format!(
                "m_max={} must be in [1, n)",
                self.m_max
            )));
        }
        if self.alphas.iter().any(|a| !(*a > 0.0 && *a < 1.0)) {
            return Err(Error::Config("alphas must lie in (0,1)".into()));
        }
        Ok(())
    }
}

/// One replication's statistics (empty when the fit failed).
#[derive(Debug, Clone)]
pub struct RepRecord {
    pub replication: u64,
    pub converged: bool,
    /// stat_r for m = 1..m_max.
    pub stats: Vec<f64>,
    /// p-values for m = 1..m_max.
    pub pvalues: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct McResult {
    pub alphas: Vec<f64>,
    pub m_max: usize,
    /// Percent rejections indexed [alpha][m-1].
    pub rejection_freq: Vec<Vec<f64>>,
    pub n_failed_fits: usize,
    pub n_used: usize,
    /// Nominal 95% binomial bands per alpha (percent), for reading the tables.
    pub ci_bounds: Vec<(f64, f64)>,
    pub elapsed_secs: f64,
    pub warnings: Vec<String>,
    pub raw: Vec<RepRecord>,
}

impl McResult {
    pub fn frequency(&self, alpha_idx: usize, m: usize) -> f64 {
        self.rejection_freq[alpha_idx][m - 1]
    }
}

/// Size experiment: the fitted model has the same order as the data generator.
pub fn run_size_experiment(config: &McConfig) -> Result<McResult> {
    let (d0, f0) = (config.dgp_order, config.fitted_order);
    if (d0.d, d0.p, d0.q) != (f0.d, f0.p, f0.q) {
        return Err(Error::Config(
            "size experiment requires fitted order == data-generating order".into(),
        ));
    }
    run_experiment(config, Vec::new())
}

/// Power experiment: the fitted (null) order differs from the data generator.
pub fn run_power_experiment(config: &McConfig) -> Result<McResult> {
    let mut warnings = Vec::new();
    let same_order = {
        let (d0, f0) = (config.dgp_order, config.fitted_order);
        (d0.d, d0.p, d0.q) == (f0.d, f0.p, f0.q)
    };
    let b_is_zero = config
        .dgp_params
        .b
        .iter()
        .all(|m| m.iter().all(|v| *v == 0.0));
    if same_order || (config.dgp_order.p > 0 && b_is_zero) {
        warnings.push(
            "power run where the data generator coincides with the fitted null; \
             rejection frequencies will match the size"
                .to_string(),
        );
    }
    run_experiment(config, warnings)
}

fn run_experiment(config: &McConfig, mut warnings: Vec<String>) -> Result<McResult> {
    config.validate()?;
    let start = Instant::now();
    let fit_config = FitConfig {
        init: InitSpec::Auto,
        fixed_delta: match config.fitted_order.power_mode {
            PowerMode::KnownDelta => Some(
                config
                    .fitted_delta
                    .clone()
                    .unwrap_or_else(|| config.dgp_params.delta.clone()),
            ),
            PowerMode::EstimatedDelta => None,
        },
        max_iters: config.max_iters,
        grad_tol: config.grad_tol,
        delta_bounds: config.delta_bounds,
        init_policy: InitPolicy::OmegaStart,
    };

    let records: Vec<RepRecord> = (0..config.replications as u64)
        .into_par_iter()
        .map(|rep| run_replication(config, &fit_config, rep))
        .collect();

    let n_failed = records.iter().filter(|r| !r.converged).count();
    let n_used = records.len() - n_failed;
    if n_used == 0 || (n_failed as f64) > 0.2 * records.len() as f64 {
        return Err(Error::Config(format!(
            "{n_failed} of {} fits failed; aborting the experiment",
            records.len()
        )));
    }
    if n_failed > 0 {
        warnings.push(format!(
            "{n_failed} replications excluded for non-convergence"
        ));
    }

    let mut rejection_freq = vec![vec![0.0f64; config.m_max]; config.alphas.len()];
    for rec in records.iter().filter(|r| r.converged) {
        for (ai, alpha) in config.alphas.iter().enumerate() {
            for m in 1..=config.m_max {
                if rec.pvalues[m - 1] < *alpha {
                    rejection_freq[ai][m - 1] += 1.0;
                }
            }
        }
    }
    for row in rejection_freq.iter_mut() {
        for v in row.iter_mut() {
            *v *= 100.0 / n_used as f64;
        }
    }

    let z = normal_quantile(0.975)?;
    let ci_bounds = config
        .alphas
        .iter()
        .map(|a| {
            let se = (a * (1.0 - a) / n_used as f64).sqrt();
            (100.0 * (a - z * se).max(0.0), 100.0 * (a + z * se).min(1.0))
        })
        .collect();

    Ok(McResult {
        alphas: config.alphas.clone(),
        m_max: config.m_max,
        rejection_freq,
        n_failed_fits: n_failed,
        n_used,
        ci_bounds,
        elapsed_secs: start.elapsed().as_secs_f64(),
        warnings,
        raw: records,
    })
}

fn run_replication(config: &McConfig, fit_config: &FitConfig, rep: u64) -> RepRecord {
    let failed = RepRecord {
        replication: rep,
        converged: false,
        stats: Vec::new(),
        pvalues: Vec::new(),
    };
    let stream = RngStream::new(config.base_seed, rep);
    let series = match simulate(
        &config.dgp_order,
        &config.dgp_params,
        config.n,
        config.burn_in,
        stream,
    ) {
        Ok(s) => s,
        Err(_) => return failed,
    };
    let fit_res = match fit(&config.fitted_order, &series, fit_config) {
        Ok(f) => f,
        Err(_) => return failed,
    };
    let reports = match adequacy_tests(
        &config.fitted_order,
        &fit_res,
        &series,
        &fit_config.init_policy,
        config.m_max,
        0.05,
        config.method,
    ) {
        Ok(r) => r,
        Err(_) => return failed,
    };
    RepRecord {
        replication: rep,
        converged: true,
        stats: reports.iter().map(|r| r.stat_r).collect(),
        pvalues: reports.iter().map(|r| r.pvalue_r).collect(),
    }
}

/// The bivariate benchmark generator used across the experiments.
pub fn benchmark_dgp(delta: &[f64], symmetric: bool, with_b: bool) -> (ModelOrder, Params) {
    use nalgebra::DMatrix;
    let a_minus = DMatrix::from_row_slice(2, 2, &[0.45, 0.25, 0.25, 0.35]);
    let a_plus = if symmetric {
        a_minus.clone()
    } else {
        DMatrix::from_row_slice(2, 2, &[0.25, 0.10, 0.10, 0.15])
    };
    let (p, b) = if with_b {
        (
            1,
            vec![DMatrix::from_row_slice(2, 2, &[0.43, 0.1, 0.1, 0.42])],
        )
    } else {
        (0, vec![])
    };
    let order = ModelOrder::new(2, p, 1, PowerMode::KnownDelta);
    let params = Params {
        omega: DVector::from_vec(vec![0.2, 0.3]),
        a_plus: vec![a_plus],
        a_minus: vec![a_minus],
        b,
        rho: DVector::from_vec(vec![0.7]),
        delta: DVector::from_vec(delta.to_vec()),
    };
    (order, params)
}
