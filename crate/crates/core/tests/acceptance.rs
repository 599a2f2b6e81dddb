//! Acceptance criteria, one PASS/FAIL line each. Exits non-zero on any FAIL.

mod common;

use std::time::Instant;

use common::{gee_oracle_gap, lag1_autocorrelation, random_design, recoded_gap, wcls_oracle_gap};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wcls::data::write_csv;
use wcls::pipeline::AnalysisSpec;
use wcls::prob::{evaluate_probability, fit_constant_numerator, fit_logistic, ProbabilityModel, Side};
use wcls::sim::{
    generate_trial, moderation_analyses, run_replications, GenerativeConfig, Overrides, Preset, ReplicationReport,
    SimOptions,
};
use wcls::wcls::{apply_small_sample, compute_weights, fit_wcls, sandwich_variance, SmallSample};

const SEED: u64 = 1;
const REPLICATES: usize = 1000;

struct Verdict {
    passed: bool,
    detail: String,
}

fn within(x: f64, target: f64, tol: f64) -> bool {
    (x - target).abs() <= tol
}

fn run(groups: &[(String, GenerativeConfig, Vec<AnalysisSpec>)]) -> Vec<ReplicationReport> {
    let opts = SimOptions {
        replicates: REPLICATES,
        ..SimOptions::default()
    };
    groups
        .iter()
        .map(|(label, cfg, analyses)| ReplicationReport {
            label: label.clone(),
            ..run_replications(cfg, analyses, &opts).expect("replications run")
        })
        .collect()
}

fn preset(p: Preset, overrides: &Overrides) -> Vec<ReplicationReport> {
    let groups: Vec<_> = p
        .groups(overrides, SEED)
        .into_iter()
        .map(|g| (g.label, g.config, g.analyses))
        .collect();
    run(&groups)
}

fn row<'a>(r: &'a ReplicationReport, name: &str) -> &'a wcls::sim::EstimatorSummary {
    r.row(name).unwrap_or_else(|| panic!("no analysis {name}"))
}

fn ok_count(r: &ReplicationReport) -> bool {
    r.rows.iter().all(|x| x.successes == REPLICATES)
}

fn table1(reports: &[ReplicationReport]) -> Verdict {
    let gee_targets = [-0.17, -0.14, -0.10];
    let mut passed = true;
    let mut parts = Vec::new();
    for (r, gee_target) in reports.iter().zip(gee_targets) {
        let (w, g, a) = (row(r, "wcls"), row(r, "gee-ind"), row(r, "gee-ar1"));
        passed &= ok_count(r);
        passed &= within(w.mean, -0.20, 0.015) && within(w.cp, 0.95, 0.02);
        passed &= within(g.mean, gee_target, 0.02);
        if r.config.beta11 >= 0.5 {
            passed &= a.cp <= 0.90;
        }
        parts.push(format!(
            "b11={}: wcls {:.3}/{:.3}, gee-ind {:.3}, gee-ar1 cp {:.3}",
            r.config.beta11, w.mean, w.cp, g.mean, a.cp
        ));
    }
    Verdict {
        passed,
        detail: parts.join("; "),
    }
}

fn table2(r: &ReplicationReport) -> Verdict {
    let (c, s) = (row(r, "wcls-constant"), row(r, "wcls-s"));
    Verdict {
        passed: ok_count(r)
            && within(c.mean, -0.20, 0.015)
            && within(c.cp, 0.94, 0.02)
            && within(s.mean, -0.14, 0.02)
            && within(s.cp, 0.89, 0.03),
        detail: format!(
            "constant {:.3}/{:.3}, S-dependent {:.3}/{:.3}",
            c.mean, c.cp, s.mean, s.cp
        ),
    }
}

fn table3(r: &ReplicationReport) -> Verdict {
    let (w, a) = (row(r, "wcls-ind"), row(r, "gee-ar1-centered"));
    Verdict {
        passed: ok_count(r)
            && within(w.mean, -0.20, 0.015)
            && within(w.cp, 0.96, 0.02)
            && within(a.mean, -0.13, 0.02)
            && within(a.cp, 0.66, 0.04),
        detail: format!(
            "independence {:.3}/{:.3}, AR(1) {:.3}/{:.3}",
            w.mean, w.cp, a.mean, a.cp
        ),
    }
}

fn appendix(r: &ReplicationReport) -> Verdict {
    let (w, a) = (row(r, "wcls"), row(r, "gee-ar1"));
    let sd = w.sd.unwrap_or(f64::NAN);
    Verdict {
        passed: ok_count(r)
            && within(w.mean, -0.20, 0.01)
            && within(sd, 0.05, 0.01)
            && within(w.avg_se, 0.05, 0.01)
            && within(a.cp, 0.06, 0.05),
        detail: format!(
            "n=60 T=50 b11=0.8: wcls mean {:.4}, sd {:.4}, se {:.4}; gee-ar1 cp {:.3}",
            w.mean, sd, w.avg_se, a.cp
        ),
    }
}

fn robustness(reports: &[ReplicationReport]) -> Verdict {
    let means: Vec<f64> = reports.iter().map(|r| r.rows[0].mean).collect();
    Verdict {
        passed: reports.iter().all(ok_count) && means.iter().all(|m| within(*m, -0.20, 0.015)),
        detail: format!(
            "intercept-only working model, means {}",
            means.iter().map(|m| format!("{m:.4}")).collect::<Vec<_>>().join(", ")
        ),
    }
}

fn calibration(all: &[&ReplicationReport]) -> Verdict {
    let mut worst: (f64, String) = (0.0, String::new());
    for r in all {
        for e in &r.rows {
            let gap = (e.avg_se / e.sd.unwrap_or(f64::NAN) - 1.0).abs();
            if gap > worst.0 || gap.is_nan() {
                worst = (gap, format!("{} / {}", r.label, e.analysis));
            }
        }
    }
    Verdict {
        passed: worst.0 <= 0.10,
        detail: format!("largest |SE/SD - 1| = {:.3} ({})", worst.0, worst.1),
    }
}

fn oracles() -> Verdict {
    let (w, g) = (wcls_oracle_gap(2024, 200), gee_oracle_gap(77, 200));
    Verdict {
        passed: w < 1e-8 && g < 1e-10,
        detail: format!("200 instances: wcls gap {w:.2e}, gee-ind gap {g:.2e}"),
    }
}

fn remark2() -> Verdict {
    let gap = recoded_gap(5, 100);
    Verdict {
        passed: gap < 1e-10,
        detail: format!("100 instances: gap {gap:.2e}"),
    }
}

fn properties() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut failures = Vec::new();

    let design = random_design(&mut rng, 1, 1, 3, 1, 1.0);
    let mut sums = true;
    for _ in 0..1000 {
        let coef: Vec<f64> = (0..3).map(|_| rng.random_range(-1.5..1.5)).collect();
        let model = ProbabilityModel::known_logistic(Side::Numerator, coef);
        let row = &design.rows[0];
        sums &= evaluate_probability(&model, row, 0).unwrap() + evaluate_probability(&model, row, 1).unwrap() == 1.0;
    }
    if !sums {
        failures.push("probability sum");
    }

    let (mut score, mut symmetric) = (true, true);
    for _ in 0..50 {
        let design = random_design(&mut rng, 30, 6, 2, 2, 0.8);
        let (Ok((den, den_report)), Ok((num, num_report))) = (
            fit_logistic(&design, Side::Denominator, true),
            fit_constant_numerator(&design),
        ) else {
            continue;
        };
        score &= den_report.mean_score().amax() < 1e-8 && num_report.mean_score().amax() < 1e-12;
        let weighting = compute_weights(&design, &num, &den).unwrap();
        let fit = fit_wcls(&design, &weighting).unwrap();
        let fit = sandwich_variance(fit, Some(&den_report), Some(&num_report)).unwrap();
        let fit = apply_small_sample(fit, SmallSample::Always).unwrap();
        let eig = fit.vcov.clone().unwrap().symmetric_eigen();
        symmetric &= fit.vcov_asymmetry() < 1e-12 && eig.eigenvalues.min() >= -1e-12 * eig.eigenvalues.amax();
    }
    if !score {
        failures.push("score at optimum");
    }
    if !symmetric {
        failures.push("vcov symmetry/PSD");
    }

    let noise = GenerativeConfig {
        theta1: 0.0,
        theta2: 0.0,
        beta10: 0.0,
        beta11: 0.0,
        eta1: 0.0,
        eta2: 0.0,
        xi: 0.0,
        n: 1,
        occasions: 1_000_000,
        error_decay: 0.5,
        seed: SEED,
    };
    let eps: Vec<f64> = generate_trial(&noise).individuals()[0]
        .occasions
        .iter()
        .map(|o| o.response)
        .collect();
    let r = lag1_autocorrelation(&eps);
    if !within(r, 0.5f64.sqrt(), 0.01) {
        failures.push("AR autocorrelation");
    }

    let cfg = GenerativeConfig {
        n: 30,
        occasions: 30,
        ..noise
    };
    let bytes = |c: &GenerativeConfig| {
        let mut out = Vec::new();
        write_csv(&generate_trial(c), &mut out).unwrap();
        out
    };
    let report = |threads| {
        let opts = SimOptions {
            replicates: 16,
            threads: Some(threads),
            ..SimOptions::default()
        };
        serde_json::to_string(&run_replications(&cfg, &moderation_analyses(), &opts).unwrap()).unwrap()
    };
    if bytes(&cfg) != bytes(&cfg) || report(1) != report(3) {
        failures.push("seed reproducibility");
    }

    Verdict {
        passed: failures.is_empty(),
        detail: if failures.is_empty() {
            format!("all five suites hold (lag-1 autocorrelation {r:.4})")
        } else {
            format!("failed: {}", failures.join(", "))
        },
    }
}

fn main() {
    let start = Instant::now();
    let t1 = preset(Preset::Table1, &Overrides::default());
    let t2 = preset(Preset::Table2, &Overrides::default());
    let t3 = preset(Preset::Table3, &Overrides::default());
    let ad = preset(
        Preset::AppendixD,
        &Overrides {
            n: Some(60),
            occasions: Some(50),
            beta11: Some(0.8),
            ..Overrides::default()
        },
    );
    let reduced: Vec<_> = Preset::Table1
        .groups(&Overrides::default(), SEED)
        .into_iter()
        .map(|g| {
            let spec = AnalysisSpec {
                name: "wcls-intercept".into(),
                working: vec!["1".into()],
                ..moderation_analyses().remove(0)
            };
            (g.label, g.config, vec![spec])
        })
        .collect();
    let robust = run(&reduced);

    let mut every: Vec<&ReplicationReport> = t1.iter().chain(&t2).chain(&t3).chain(&ad).collect();
    every.extend(&robust);
    let verdicts = [
        ("1 table 1", table1(&t1)),
        ("2 table 2", table2(&t2[0])),
        ("3 table 3", table3(&t3[0])),
        ("4 appendix D", appendix(&ad[0])),
        ("5 oracle equivalence", oracles()),
        ("6 recoded regression identity", remark2()),
        ("7 misspecified working model", robustness(&robust)),
        ("8 variance calibration", calibration(&every)),
        ("9 property suites", properties()),
    ];
    let mut failed = 0;
    for (name, v) in &verdicts {
        println!(
            "{} criterion {name}: {}",
            if v.passed { "PASS" } else { "FAIL" },
            v.detail
        );
        failed += usize::from(!v.passed);
    }
    println!(
        "{} of {} criteria passed (seed {SEED}, R = {REPLICATES}, {:.1}s)",
        verdicts.len() - failed,
        verdicts.len(),
        start.elapsed().as_secs_f64()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
