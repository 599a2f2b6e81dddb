use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::generate::{generate_with, true_marginal_effect, GenerativeConfig};
use crate::inference::InferenceOptions;
use crate::pipeline::{run_analysis, AnalysisSpec, Estimator};
use crate::wcls::SmallSample;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimOptions {
    pub replicates: usize,
    pub alpha0: f64,
    pub small_sample: SmallSample,
    /// Worker threads; `None` uses the global pool.
    pub threads: Option<usize>,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self {
            replicates: 1000,
            alpha0: 0.05,
            small_sample: SmallSample::Auto,
            threads: None,
        }
    }
}

/// Estimate, SE and interval for the first contrast of one analysis on one replicate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReplicateEstimate {
    pub estimate: f64,
    pub se: f64,
    pub ci_lower: f64,
    pub ci_upper: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorSummary {
    pub analysis: String,
    pub estimator: Estimator,
    pub mean: f64,
    /// `None` when fewer than two replicates succeeded.
    pub sd: Option<f64>,
    pub avg_se: f64,
    pub rmse: f64,
    pub cp: f64,
    pub successes: usize,
    pub failures: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub first_failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationReport {
    pub label: String,
    pub config: GenerativeConfig,
    pub truth: f64,
    pub replicates: usize,
    pub rows: Vec<EstimatorSummary>,
}

/// Mean, SD (divisor `R - 1`), average SE, RMSE (divisor `R`) and coverage.
pub fn summarize(estimates: &[ReplicateEstimate], truth: f64) -> (f64, Option<f64>, f64, f64, f64) {
    let r = estimates.len();
    if r == 0 {
        return (f64::NAN, None, f64::NAN, f64::NAN, f64::NAN);
    }
    let rf = r as f64;
    let mean = estimates.iter().map(|e| e.estimate).sum::<f64>() / rf;
    let sd = (r > 1).then(|| (estimates.iter().map(|e| (e.estimate - mean).powi(2)).sum::<f64>() / (rf - 1.0)).sqrt());
    let avg_se = estimates.iter().map(|e| e.se).sum::<f64>() / rf;
    let rmse = (estimates.iter().map(|e| (e.estimate - truth).powi(2)).sum::<f64>() / rf).sqrt();
    let covered = estimates
        .iter()
        .filter(|e| e.ci_lower <= truth && truth <= e.ci_upper)
        .count();
    (mean, sd, avg_se, rmse, covered as f64 / rf)
}

/// Run every analysis on `R` independently generated trials.
///
/// Replicate `r` draws from a ChaCha stream `r` under the root seed, so the
/// report is identical for any number of threads.
pub fn run_replications(
    config: &GenerativeConfig,
    analyses: &[AnalysisSpec],
    options: &SimOptions,
) -> Result<ReplicationReport, String> {
    config.validate()?;
    if options.replicates < 1 {
        return Err("at least one replicate is required".into());
    }
    if analyses.is_empty() {
        return Err("no analyses to run".into());
    }
    let inference = InferenceOptions {
        alpha0: options.alpha0,
        one_sided: false,
    };
    let one = |r: usize| -> Vec<Result<ReplicateEstimate, String>> {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(r as u64);
        let data = generate_with(config, &mut rng);
        analyses
            .iter()
            .map(|spec| {
                let outcome = run_analysis(&data, spec, inference, options.small_sample).map_err(|e| e.to_string())?;
                let row = outcome
                    .contrasts
                    .first()
                    .and_then(|c| c.result.rows.first())
                    .ok_or_else(|| "analysis produced no contrast".to_string())?;
                Ok(ReplicateEstimate {
                    estimate: row.estimate,
                    se: row.se,
                    ci_lower: row.ci_lower,
                    ci_upper: row.ci_upper,
                })
            })
            .collect()
    };
    let results: Vec<Vec<Result<ReplicateEstimate, String>>> = match options.threads {
        Some(threads) => rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| e.to_string())?
            .install(|| (0..options.replicates).into_par_iter().map(one).collect()),
        None => (0..options.replicates).into_par_iter().map(one).collect(),
    };

    let truth = true_marginal_effect(config).average;
    let rows = analyses
        .iter()
        .enumerate()
        .map(|(j, spec)| {
            let mut ok = Vec::with_capacity(results.len());
            let mut failures = 0;
            let mut first_failure = None;
            for replicate in &results {
                match &replicate[j] {
                    Ok(e) => ok.push(*e),
                    Err(msg) => {
                        failures += 1;
                        first_failure.get_or_insert_with(|| msg.clone());
                    }
                }
            }
            let (mean, sd, avg_se, rmse, cp) = summarize(&ok, truth);
            EstimatorSummary {
                analysis: spec.name.clone(),
                estimator: spec.estimator,
                mean,
                sd,
                avg_se,
                rmse,
                cp,
                successes: ok.len(),
                failures,
                first_failure,
            }
        })
        .collect();
    Ok(ReplicationReport {
        label: String::new(),
        config: config.clone(),
        truth,
        replicates: options.replicates,
        rows,
    })
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| format!("{x:.6}"))
}

pub const CSV_HEADER: &str =
    "group,n,T,theta2,beta11,truth,analysis,estimator,replicates,successes,failures,mean,sd,avg_se,rmse,cp";

impl ReplicationReport {
    pub fn csv_rows(&self) -> Vec<String> {
        self.rows
            .iter()
            .map(|r| {
                format!(
                    "{},{},{},{},{},{:.6},{},{},{},{},{},{:.6},{},{:.6},{:.6},{:.4}",
                    self.label,
                    self.config.n,
                    self.config.occasions,
                    self.config.theta2,
                    self.config.beta11,
                    self.truth,
                    r.analysis,
                    estimator_name(r.estimator),
                    self.replicates,
                    r.successes,
                    r.failures,
                    r.mean,
                    fmt_opt(r.sd),
                    r.avg_se,
                    r.rmse,
                    r.cp
                )
            })
            .collect()
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{}  n={} T={} beta11={} theta2={}  truth={:.4}  R={}",
            if self.label.is_empty() { "scenario" } else { &self.label },
            self.config.n,
            self.config.occasions,
            self.config.beta11,
            self.config.theta2,
            self.truth,
            self.replicates
        );
        let width = self.rows.iter().map(|r| r.analysis.len()).max().unwrap_or(9).max(9);
        let _ = writeln!(
            out,
            "  {:<width$}  {:>8}  {:>8}  {:>8}  {:>8}  {:>6}  {:>8}",
            "estimator", "mean", "sd", "se", "rmse", "cp", "failures"
        );
        for r in &self.rows {
            let sd = r.sd.map_or_else(|| "NA".to_string(), |v| format!("{v:.4}"));
            let _ = writeln!(
                out,
                "  {:<width$}  {:>8.4}  {:>8}  {:>8.4}  {:>8.4}  {:>6.3}  {:>8}",
                r.analysis, r.mean, sd, r.avg_se, r.rmse, r.cp, r.failures
            );
        }
        out
    }

    pub fn row(&self, analysis: &str) -> Option<&EstimatorSummary> {
        self.rows.iter().find(|r| r.analysis == analysis)
    }
}

fn estimator_name(e: Estimator) -> &'static str {
    match e {
        Estimator::Wcls => "wcls",
        Estimator::GeeIndependence => "gee-independence",
        Estimator::GeeAr1Estimated => "gee-ar1-estimated",
        Estimator::GeeAr1Fixed => "gee-ar1-fixed",
    }
}
