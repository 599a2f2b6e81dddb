use serde::{Deserialize, Serialize};

use super::generate::{GenerativeConfig, PROBABILITY_COLUMN};
use crate::pipeline::{AnalysisSpec, DenominatorSpec, Estimator, NumeratorSpec};

/// Built-in simulation experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Preset {
    /// Moderation ignored by GEE; `β11 ∈ {0.2, 0.5, 0.8}`.
    #[serde(rename = "table1")]
    Table1,
    /// Constant versus moderator-dependent numerator.
    #[serde(rename = "table2")]
    Table2,
    /// Non-independence working correlation with a centered regressor.
    #[serde(rename = "table3")]
    Table3,
    /// The first experiment over `n ∈ {30, 60}` and `T ∈ {30, 50}`.
    #[serde(rename = "appendixD")]
    AppendixD,
}

/// Values replacing a preset's generative parameters.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Overrides {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta10: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta11: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub xi: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, rename = "T", skip_serializing_if = "Option::is_none")]
    pub occasions: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error_decay: Option<f64>,
}

impl Overrides {
    fn apply(&self, mut c: GenerativeConfig) -> GenerativeConfig {
        macro_rules! set {
            ($($f:ident),*) => { $( if let Some(v) = self.$f { c.$f = v; } )* };
        }
        set!(
            theta1,
            theta2,
            beta10,
            beta11,
            eta1,
            eta2,
            xi,
            n,
            occasions,
            error_decay
        );
        c
    }
}

/// A generative configuration together with the analyses run on it.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioGroup {
    pub label: String,
    pub config: GenerativeConfig,
    pub analyses: Vec<AnalysisSpec>,
}

fn base(theta2: f64, beta11: f64, eta: f64, xi: f64, seed: u64) -> GenerativeConfig {
    GenerativeConfig {
        theta1: 0.8,
        theta2,
        beta10: -0.2,
        beta11,
        eta1: -eta,
        eta2: eta,
        xi,
        n: 30,
        occasions: 30,
        error_decay: 0.5,
        seed,
    }
}

fn known_prob() -> DenominatorSpec {
    DenominatorSpec::KnownColumn {
        column: PROBABILITY_COLUMN.into(),
    }
}

/// WCLS with `ρ̂` numerator and GEE with independence and AR(1) working correlation.
pub fn moderation_analyses() -> Vec<AnalysisSpec> {
    let wcls = AnalysisSpec::new(
        "wcls",
        &["1"],
        &["1", "s"],
        NumeratorSpec::ConstantEstimated,
        known_prob(),
    );
    vec![
        wcls.clone(),
        AnalysisSpec {
            name: "gee-ind".into(),
            ..wcls.clone().with_estimator(Estimator::GeeIndependence)
        },
        AnalysisSpec {
            name: "gee-ar1".into(),
            ..wcls.with_estimator(Estimator::GeeAr1Estimated)
        },
    ]
}

pub fn numerator_analyses() -> Vec<AnalysisSpec> {
    let constant = AnalysisSpec::new(
        "wcls-constant",
        &["1"],
        &["1", "s"],
        NumeratorSpec::ConstantEstimated,
        known_prob(),
    );
    let moderated = AnalysisSpec {
        name: "wcls-s".into(),
        numerator: NumeratorSpec::Logistic {
            features: vec!["1".into(), "s".into()],
        },
        allow_unmoderated_numerator: true,
        ..constant.clone()
    };
    vec![constant, moderated]
}

pub fn correlation_analyses() -> Vec<AnalysisSpec> {
    let wcls = AnalysisSpec::new(
        "wcls-ind",
        &["1"],
        &["1", "s"],
        NumeratorSpec::ConstantFixed { value: 0.5 },
        known_prob(),
    );
    let ar1 = AnalysisSpec {
        name: "gee-ar1-centered".into(),
        estimator: Estimator::GeeAr1Fixed,
        centered: true,
        correlation_base: Some(0.5),
        ..wcls.clone()
    };
    vec![wcls, ar1]
}

impl Preset {
    pub fn groups(self, overrides: &Overrides, seed: u64) -> Vec<ScenarioGroup> {
        let slopes = |default: &[f64]| overrides.beta11.map_or_else(|| default.to_vec(), |b| vec![b]);
        match self {
            Preset::Table1 => slopes(&[0.2, 0.5, 0.8])
                .into_iter()
                .map(|b| ScenarioGroup {
                    label: format!("table1 beta11={b}"),
                    config: overrides.apply(GenerativeConfig {
                        beta11: b,
                        ..base(0.0, b, 0.8, 0.0, seed)
                    }),
                    analyses: moderation_analyses(),
                })
                .collect(),
            Preset::Table2 => vec![ScenarioGroup {
                label: "table2".into(),
                config: overrides.apply(base(-0.1, 0.5, 0.8, 0.0, seed)),
                analyses: numerator_analyses(),
            }],
            Preset::Table3 => vec![ScenarioGroup {
                label: "table3".into(),
                config: overrides.apply(base(-0.1, 0.0, 0.0, 0.1, seed)),
                analyses: correlation_analyses(),
            }],
            Preset::AppendixD => {
                let ns = overrides.n.map_or_else(|| vec![30, 60], |n| vec![n]);
                let ts = overrides.occasions.map_or_else(|| vec![30, 50], |t| vec![t]);
                let mut out = Vec::new();
                for &n in &ns {
                    for &t in &ts {
                        for b in slopes(&[0.2, 0.5, 0.8]) {
                            let cfg = overrides.apply(base(0.0, b, 0.8, 0.0, seed));
                            out.push(ScenarioGroup {
                                label: format!("appendixD n={n} T={t} beta11={b}"),
                                config: GenerativeConfig {
                                    n,
                                    occasions: t,
                                    beta11: b,
                                    ..cfg
                                },
                                analyses: moderation_analyses(),
                            });
                        }
                    }
                }
                out
            }
        }
    }
}
