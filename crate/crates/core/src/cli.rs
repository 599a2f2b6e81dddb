//! The `wcls` command line.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::Serialize;

use crate::config::{EstimateConfig, SimulateConfig};
use crate::data::ingest_csv;
use crate::error::Error;
use crate::inference::InferenceOptions;
use crate::pipeline::{run_analysis, AnalysisOutcome};
use crate::sim::{run_replications, ReplicationReport, SimOptions, CSV_HEADER};

pub const EXIT_OK: i32 = 0;
pub const EXIT_MODULE_ERROR: i32 = 1;
pub const EXIT_CONFIG_ERROR: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "wcls",
    version,
    about = "Weighted and centered least squares for micro-randomized trials"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Estimate effects on a CSV dataset.
    Estimate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Recorded in the diagnostics; estimation itself is deterministic.
        #[arg(long)]
        seed: Option<u64>,
        /// One-sided intervals and p-values.
        #[arg(long)]
        one_sided: bool,
    },
    /// Run a replicated simulation experiment.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        threads: Option<usize>,
        #[arg(long)]
        replicates: Option<usize>,
    },
}

#[derive(Debug, Serialize)]
struct ErrorRecord<'a> {
    code: &'a str,
    message: String,
}

enum Failure {
    Config(String),
    Module(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Module(e)
    }
}

/// Run the command line and return the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG_ERROR } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let (out, result) = match &cli.command {
        Command::Estimate {
            config,
            out,
            seed,
            one_sided,
        } => (out, estimate(config, out, *seed, *one_sided)),
        Command::Simulate {
            config,
            out,
            seed,
            threads,
            replicates,
        } => (out, simulate(config, out, *seed, *threads, *replicates)),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(Failure::Config(msg)) => {
            report_error(out, "config", &msg);
            EXIT_CONFIG_ERROR
        }
        Err(Failure::Module(e)) => {
            report_error(out, e.code(), &e.to_string());
            EXIT_MODULE_ERROR
        }
    }
}

fn report_error(out: &Path, code: &str, message: &str) {
    let record = ErrorRecord {
        code,
        message: message.to_string(),
    };
    let json = serde_json::to_string_pretty(&record).expect("error record serializes");
    eprintln!("{json}");
    if fs::create_dir_all(out).is_ok() {
        let _ = fs::write(out.join("error.json"), format!("{json}\n"));
    }
}

fn read_config(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Config(format!("cannot read {}: {e}", path.display())))
}

fn write(out: &Path, name: &str, contents: &str) -> Result<(), Failure> {
    fs::create_dir_all(out).map_err(Error::from)?;
    fs::write(out.join(name), contents).map_err(Error::from)?;
    Ok(())
}

#[derive(Serialize)]
struct EstimateDiagnostics<'a> {
    input: String,
    seed: Option<u64>,
    alpha0: f64,
    one_sided: bool,
    analyses: &'a [AnalysisOutcome],
}

fn estimate(config_path: &Path, out: &Path, seed: Option<u64>, one_sided: bool) -> Result<(), Failure> {
    let cfg = EstimateConfig::from_toml(&read_config(config_path)?).map_err(Failure::Config)?;
    let input = cfg.input_path(config_path);
    let data = ingest_csv(&input, &cfg.columns).map_err(Error::from)?;
    let options = InferenceOptions {
        alpha0: cfg.alpha0,
        one_sided,
    };
    let outcomes = cfg
        .analyses
        .iter()
        .map(|a| run_analysis(&data, a, options, cfg.small_sample))
        .collect::<Result<Vec<_>, Error>>()?;
    write(out, "report.csv", &estimate_csv(&outcomes))?;
    write(out, "report.txt", &estimate_text(&outcomes, options))?;
    let diagnostics = EstimateDiagnostics {
        input: input.display().to_string(),
        seed,
        alpha0: cfg.alpha0,
        one_sided,
        analyses: &outcomes,
    };
    let json = serde_json::to_string_pretty(&diagnostics).expect("diagnostics serialize");
    write(out, "diagnostics.json", &format!("{json}\n"))
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn estimate_csv(outcomes: &[AnalysisOutcome]) -> String {
    let mut out = String::from("analysis,contrast,row,estimate,se,df,ci_lower,ci_upper,p_value\n");
    for o in outcomes {
        for c in &o.contrasts {
            for (i, r) in c.result.rows.iter().enumerate() {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{},{},{},{}",
                    csv_field(&o.name),
                    csv_field(&c.name),
                    i + 1,
                    r.estimate,
                    r.se,
                    r.df,
                    r.ci_lower,
                    r.ci_upper,
                    r.p_value
                );
            }
        }
    }
    out
}

pub fn estimate_text(outcomes: &[AnalysisOutcome], options: InferenceOptions) -> String {
    let mut out = String::new();
    let level = 100.0 * (1.0 - options.alpha0);
    for o in outcomes {
        let _ = writeln!(
            out,
            "== {} (effect features: {}) ==",
            o.name,
            o.effect_features.join(", ")
        );
        let width = o.contrasts.iter().map(|c| c.name.len()).max().unwrap_or(8).max(8);
        let _ = writeln!(
            out,
            "{:<width$}  {:>10}  {:>10}  {:>4}  {:>23}  {:>8}",
            "contrast",
            "estimate",
            "se",
            "df",
            format!("{level:.0}% CI"),
            "p-value"
        );
        for c in &o.contrasts {
            for r in &c.result.rows {
                let _ = writeln!(
                    out,
                    "{:<width$}  {:>10.4}  {:>10.4}  {:>4}  {:>23}  {:>8.4}",
                    c.name,
                    r.estimate,
                    r.se,
                    r.df,
                    format!("({:.4}, {:.4})", r.ci_lower, r.ci_upper),
                    r.p_value
                );
            }
            if let Some(j) = &c.result.joint {
                let _ = writeln!(
                    out,
                    "{:<width$}  joint test: statistic {:.4}, critical value {:.4}, F({}, {}) = {:.4}, p = {:.4}",
                    "", j.statistic, j.critical_value, j.df1, j.df2, j.f_statistic, j.p_value
                );
            }
        }
        for (label, n) in [("numerator", &o.numerator), ("denominator", &o.denominator)] {
            if let Some(n) = n {
                let coef: Vec<String> = n.coefficients.iter().map(|c| format!("{c:.4}")).collect();
                let _ = writeln!(
                    out,
                    "{label}: {}{} [{}]",
                    n.kind,
                    if n.estimated { " (estimated)" } else { "" },
                    coef.join(", ")
                );
            }
        }
        let d = &o.diagnostics;
        let _ = writeln!(
            out,
            "n = {}, T = {}, rows = {}, condition number = {:.3e}, small-sample correction: {}",
            d.n,
            d.occasions,
            d.rows,
            d.condition_number,
            if d.small_sample_corrected { "yes" } else { "no" }
        );
        if let Some(w) = &d.weights {
            let _ = writeln!(out, "weights: min {:.4}, mean {:.4}, max {:.4}", w.min, w.mean, w.max);
        }
        out.push('\n');
    }
    out
}

#[derive(Serialize)]
struct SimulationOutput<'a> {
    seed: u64,
    replicates: usize,
    alpha0: f64,
    groups: &'a [ReplicationReport],
}

fn simulate(
    config_path: &Path,
    out: &Path,
    seed: Option<u64>,
    threads: Option<usize>,
    replicates: Option<usize>,
) -> Result<(), Failure> {
    let cfg = SimulateConfig::from_toml(&read_config(config_path)?).map_err(Failure::Config)?;
    let seed = seed.unwrap_or_else(|| cfg.root_seed());
    let replicates = replicates.unwrap_or(cfg.replicates);
    if replicates < 1 {
        return Err(Failure::Config("replicates must be at least 1".into()));
    }
    if threads == Some(0) {
        return Err(Failure::Config("threads must be at least 1".into()));
    }
    let options = SimOptions {
        replicates,
        alpha0: cfg.alpha0,
        small_sample: cfg.small_sample,
        threads,
    };
    let groups = cfg.groups(seed).map_err(Failure::Config)?;
    let mut reports = Vec::with_capacity(groups.len());
    for g in &groups {
        let mut report = run_replications(&g.config, &g.analyses, &options).map_err(Failure::Config)?;
        report.label = g.label.clone();
        reports.push(report);
    }

    let mut csv = format!("{CSV_HEADER}\n");
    let mut text = String::new();
    for r in &reports {
        for line in r.csv_rows() {
            csv.push_str(&line);
            csv.push('\n');
        }
        text.push_str(&r.to_text());
        for row in r.rows.iter().filter(|row| row.failures > 0) {
            let _ = writeln!(
                text,
                "  {}: {} failed replicate(s), first: {}",
                row.analysis,
                row.failures,
                row.first_failure.as_deref().unwrap_or("")
            );
        }
        text.push('\n');
    }
    write(out, "replication.csv", &csv)?;
    write(out, "replication.txt", &text)?;
    let json = serde_json::to_string_pretty(&SimulationOutput {
        seed,
        replicates,
        alpha0: cfg.alpha0,
        groups: &reports,
    })
    .expect("report serializes");
    write(out, "replication.json", &format!("{json}\n"))?;

    if reports.iter().flat_map(|r| &r.rows).all(|row| row.successes == 0) {
        let first = reports
            .iter()
            .flat_map(|r| &r.rows)
            .find_map(|row| row.first_failure.clone())
            .unwrap_or_default();
        return Err(Failure::Module(Error::Simulation(format!(
            "every replicate failed: {first}"
        ))));
    }
    Ok(())
}
