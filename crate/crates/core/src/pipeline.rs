//! End-to-end analysis of a panel dataset: build designs, fit the weight
//! models, estimate, correct the variance and run contrasts. Shared by the
//! `estimate` command, the simulator and the C interface.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::data::PanelDataset;
use crate::error::Error;
use crate::features::{build_design, Design, FeatureDecl, FeatureSpec};
use crate::gee::{fit_gee, Correlation, MeanModel};
use crate::inference::{infer, Contrast, InferenceOptions, InferenceResult};
use crate::prob::{fit_constant_numerator, fit_logistic, NuisanceFitReport, ProbabilityModel, Side};
use crate::wcls::{apply_small_sample, compute_weights, fit_wcls, sandwich_variance, SmallSample};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum NumeratorSpec {
    /// `ρ̂`, the treated fraction among available occasions.
    ConstantEstimated,
    ConstantFixed {
        value: f64,
    },
    /// Logistic regression of treatment on the listed features.
    Logistic {
        features: Vec<String>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DenominatorSpec {
    /// Per-occasion probabilities recorded in a covariate column.
    KnownColumn {
        column: String,
    },
    KnownConstant {
        value: f64,
    },
    Logistic {
        features: Vec<String>,
        /// Fit only on available occasions.
        #[serde(default = "yes")]
        availability_restricted: bool,
    },
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Estimator {
    #[default]
    Wcls,
    GeeIndependence,
    /// AR(1) working correlation with `r` estimated from residuals.
    GeeAr1Estimated,
    /// Working correlation `base^(|t-u|/2)`.
    GeeAr1Fixed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContrastSpec {
    pub name: String,
    /// Row vector `c` of `cᵀβ`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
    /// Rows of `L` for a joint test of `Lβ = 0`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix: Option<Vec<Vec<f64>>>,
}

impl ContrastSpec {
    pub fn to_contrast(&self, p: usize) -> Result<Contrast, Error> {
        let bad = |msg: String| Error::Config(format!("contrast `{}`: {msg}", self.name));
        match (&self.weights, &self.matrix) {
            (Some(w), None) => {
                if w.len() != p {
                    return Err(bad(format!(
                        "has {} weights, the effect model has {p} coefficients",
                        w.len()
                    )));
                }
                Ok(Contrast::Vector(w.clone()))
            }
            (None, Some(rows)) => {
                if rows.is_empty() || rows.iter().any(|r| r.len() != p) {
                    return Err(bad(format!("matrix rows must each have {p} entries")));
                }
                let flat: Vec<f64> = rows.iter().flatten().copied().collect();
                Ok(Contrast::Matrix(DMatrix::from_row_slice(rows.len(), p, &flat)))
            }
            _ => Err(bad("exactly one of `weights` or `matrix` is required".into())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisSpec {
    pub name: String,
    #[serde(default)]
    pub estimator: Estimator,
    #[serde(default = "one")]
    pub lag: usize,
    pub effect: Vec<String>,
    pub working: Vec<String>,
    pub numerator: NumeratorSpec,
    pub denominator: DenominatorSpec,
    /// Values of `lag(col, j)` before the first occasion.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub initial: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub allow_unmoderated_numerator: bool,
    /// GEE only: regress on the centered treatment with WCLS weights.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub centered: bool,
    /// Base of the fixed working correlation `base^(|t-u|/2)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub correlation_base: Option<f64>,
    #[serde(default, rename = "contrast", skip_serializing_if = "Vec::is_empty")]
    pub contrasts: Vec<ContrastSpec>,
}

fn one() -> usize {
    1
}

impl AnalysisSpec {
    pub fn new(
        name: &str,
        effect: &[&str],
        working: &[&str],
        numerator: NumeratorSpec,
        denominator: DenominatorSpec,
    ) -> Self {
        Self {
            name: name.into(),
            estimator: Estimator::Wcls,
            lag: 1,
            effect: effect.iter().map(|s| s.to_string()).collect(),
            working: working.iter().map(|s| s.to_string()).collect(),
            numerator,
            denominator,
            initial: BTreeMap::new(),
            allow_unmoderated_numerator: false,
            centered: false,
            correlation_base: None,
            contrasts: Vec::new(),
        }
    }

    pub fn with_estimator(mut self, estimator: Estimator) -> Self {
        self.estimator = estimator;
        self
    }

    pub fn feature_decl(&self) -> FeatureDecl {
        let mut decl = FeatureDecl {
            lag: self.lag,
            effect: self.effect.clone(),
            working: self.working.clone(),
            numerator: Vec::new(),
            denominator: Vec::new(),
            initial: self.initial.clone(),
            allow_unmoderated_numerator: self.allow_unmoderated_numerator,
        };
        if let NumeratorSpec::Logistic { features } = &self.numerator {
            decl.numerator = features.clone();
        }
        if let DenominatorSpec::Logistic { features, .. } = &self.denominator {
            decl.denominator = features.clone();
        }
        decl
    }

    fn uses_weights(&self) -> bool {
        self.estimator == Estimator::Wcls || self.centered
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedInference {
    pub name: String,
    pub result: InferenceResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NuisanceSummary {
    pub kind: String,
    pub estimated: bool,
    pub coefficients: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub iterations: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub converged: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightSummary {
    pub min: f64,
    pub max: f64,
    pub mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub n: usize,
    pub occasions: usize,
    pub rows: usize,
    pub available_rows: usize,
    pub condition_number: f64,
    pub small_sample_corrected: bool,
    pub numerator_adjusted: bool,
    pub denominator_adjusted: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weights: Option<WeightSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub estimating_equation_residual: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub correlation_parameter: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub vcov_asymmetry: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisOutcome {
    pub name: String,
    pub estimator: Estimator,
    pub effect_features: Vec<String>,
    pub working_features: Vec<String>,
    pub beta: Vec<f64>,
    pub beta_se: Vec<f64>,
    pub alpha: Vec<f64>,
    pub contrasts: Vec<NamedInference>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub numerator: Option<NuisanceSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub denominator: Option<NuisanceSummary>,
    pub diagnostics: Diagnostics,
}

struct FittedModel {
    model: ProbabilityModel,
    report: Option<NuisanceFitReport>,
}

impl FittedModel {
    fn summary(&self) -> NuisanceSummary {
        use crate::prob::ModelKind;
        let kind = match self.model.kind() {
            ModelKind::Constant(_) => "constant",
            ModelKind::PerOccasion(_) => "known-column",
            ModelKind::Logistic(_) => "logistic",
        };
        NuisanceSummary {
            kind: kind.into(),
            estimated: self.model.is_estimated(),
            coefficients: self.model.coefficients(),
            iterations: self.report.as_ref().map(|r| r.iterations),
            converged: self.report.as_ref().map(|r| r.converged),
        }
    }
}

/// Probability models are fitted on every occasion (the lag-1 design) and
/// then evaluated on the rows of the lag-k design.
fn fit_numerator(spec: &NumeratorSpec, full: &Design) -> Result<FittedModel, Error> {
    Ok(match spec {
        NumeratorSpec::ConstantEstimated => {
            let (model, report) = fit_constant_numerator(full)?;
            FittedModel {
                model,
                report: Some(report),
            }
        }
        NumeratorSpec::ConstantFixed { value } => FittedModel {
            model: ProbabilityModel::known_constant(Side::Numerator, *value),
            report: None,
        },
        NumeratorSpec::Logistic { .. } => {
            let (model, report) = fit_logistic(full, Side::Numerator, true)?;
            FittedModel {
                model,
                report: Some(report),
            }
        }
    })
}

fn fit_denominator(spec: &DenominatorSpec, data: &PanelDataset, full: &Design) -> Result<FittedModel, Error> {
    Ok(match spec {
        DenominatorSpec::KnownColumn { column } => {
            let table = data
                .covariate_table(column)
                .ok_or_else(|| crate::data::DataError::MissingColumn(column.clone()))?;
            FittedModel {
                model: ProbabilityModel::known_per_occasion(Side::Denominator, table),
                report: None,
            }
        }
        DenominatorSpec::KnownConstant { value } => FittedModel {
            model: ProbabilityModel::known_constant(Side::Denominator, *value),
            report: None,
        },
        DenominatorSpec::Logistic {
            availability_restricted,
            ..
        } => {
            let (model, report) = fit_logistic(full, Side::Denominator, *availability_restricted)?;
            FittedModel {
                model,
                report: Some(report),
            }
        }
    })
}

/// Run one analysis on a dataset.
pub fn run_analysis(
    data: &PanelDataset,
    spec: &AnalysisSpec,
    options: InferenceOptions,
    small_sample: SmallSample,
) -> Result<AnalysisOutcome, Error> {
    let features = FeatureSpec::compile(&spec.feature_decl())?;
    let design = build_design(data, &features)?;
    let p = design.p();
    let contrasts: Vec<(String, Contrast)> = if spec.contrasts.is_empty() {
        spec.effect
            .iter()
            .enumerate()
            .map(|(j, name)| (name.clone(), Contrast::coefficient(j, p)))
            .collect()
    } else {
        spec.contrasts
            .iter()
            .map(|c| Ok((c.name.clone(), c.to_contrast(p)?)))
            .collect::<Result<_, Error>>()?
    };

    let (numerator, denominator, weighting) = if spec.uses_weights() {
        let full = if features.lag() == 1 {
            design.clone()
        } else {
            build_design(data, &features.with_lag(1))?
        };
        let numerator = fit_numerator(&spec.numerator, &full)?;
        let denominator = fit_denominator(&spec.denominator, data, &full)?;
        let weighting = compute_weights(&design, &numerator.model, &denominator.model)?;
        (Some(numerator), Some(denominator), Some(weighting))
    } else {
        (None, None, None)
    };

    let available_rows = design.rows.iter().filter(|r| r.available).count();
    let weight_summary = weighting.as_ref().map(|w| {
        let avail: Vec<f64> = design
            .rows
            .iter()
            .zip(&w.weights)
            .filter(|(r, _)| r.available)
            .map(|(_, &x)| x)
            .collect();
        let count = avail.len().max(1) as f64;
        WeightSummary {
            min: avail.iter().copied().fold(f64::INFINITY, f64::min),
            max: avail.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            mean: avail.iter().sum::<f64>() / count,
        }
    });

    let mut diagnostics = Diagnostics {
        n: design.n(),
        occasions: design.occasions(),
        rows: design.len(),
        available_rows,
        condition_number: 0.0,
        small_sample_corrected: false,
        numerator_adjusted: false,
        denominator_adjusted: false,
        weights: weight_summary,
        estimating_equation_residual: None,
        correlation_parameter: None,
        vcov_asymmetry: None,
    };

    let (beta, beta_se, alpha, inferences) = match spec.estimator {
        Estimator::Wcls => {
            let weighting = weighting.as_ref().expect("weights are computed for WCLS");
            let (num, den) = (numerator.as_ref().unwrap(), denominator.as_ref().unwrap());
            let fit = fit_wcls(&design, weighting)?;
            let fit = sandwich_variance(fit, den.report.as_ref(), num.report.as_ref())?;
            let fit = apply_small_sample(fit, small_sample)?;
            diagnostics.condition_number = fit.condition_number;
            diagnostics.small_sample_corrected = fit.corrections.small_sample;
            diagnostics.numerator_adjusted = fit.corrections.numerator_adjusted;
            diagnostics.denominator_adjusted = fit.corrections.denominator_adjusted;
            diagnostics.estimating_equation_residual = Some(fit.estimating_equation_residual());
            diagnostics.vcov_asymmetry = Some(fit.vcov_asymmetry());
            let inferences = contrasts
                .iter()
                .map(|(name, c)| {
                    Ok(NamedInference {
                        name: name.clone(),
                        result: infer(&fit, c, options)?,
                    })
                })
                .collect::<Result<Vec<_>, Error>>()?;
            (
                fit.beta.iter().copied().collect(),
                fit.beta_se().unwrap_or_default(),
                fit.alpha.iter().copied().collect(),
                inferences,
            )
        }
        gee => {
            let correlation = match gee {
                Estimator::GeeIndependence => Correlation::Independence,
                Estimator::GeeAr1Estimated => Correlation::Ar1Estimated,
                _ => Correlation::power_decay(design.occasions(), spec.correlation_base.unwrap_or(0.5)),
            };
            let mean = match &weighting {
                Some(w) if spec.centered => MeanModel::Centered(w),
                _ => MeanModel::Uncentered,
            };
            let fit = fit_gee(&design, mean, &correlation, small_sample)?;
            diagnostics.condition_number = fit.condition_number;
            diagnostics.small_sample_corrected = fit.small_sample;
            diagnostics.correlation_parameter = fit.correlation_parameter;
            let inferences = contrasts
                .iter()
                .map(|(name, c)| {
                    Ok(NamedInference {
                        name: name.clone(),
                        result: fit.infer(c, options)?,
                    })
                })
                .collect::<Result<Vec<_>, Error>>()?;
            let q = fit.q;
            (
                fit.beta().iter().copied().collect(),
                fit.beta_se(),
                fit.coefficients.rows(0, q).iter().copied().collect(),
                inferences,
            )
        }
    };

    Ok(AnalysisOutcome {
        name: spec.name.clone(),
        estimator: spec.estimator,
        effect_features: spec.effect.clone(),
        working_features: spec.working.clone(),
        beta,
        beta_se,
        alpha,
        contrasts: inferences,
        numerator: numerator.as_ref().map(FittedModel::summary),
        denominator: denominator.as_ref().map(FittedModel::summary),
        diagnostics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn contrast_requires_one_form() {
        let c = ContrastSpec {
            name: "x".into(),
            weights: None,
            matrix: None,
        };
        assert!(c.to_contrast(2).is_err());
        let c = ContrastSpec {
            name: "x".into(),
            weights: Some(vec![1.0, 1.0]),
            matrix: Some(vec![vec![1.0, 0.0]]),
        };
        assert!(c.to_contrast(2).is_err());
    }

    #[test]
    fn matrix_contrast_shape() {
        let c = ContrastSpec {
            name: "joint".into(),
            weights: None,
            matrix: Some(vec![vec![1.0, 0.0], vec![0.0, 1.0]]),
        };
        match c.to_contrast(2).unwrap() {
            Contrast::Matrix(m) => assert_eq!(m, DMatrix::identity(2, 2)),
            other => panic!("{other:?}"),
        }
        assert!(c.to_contrast(3).is_err());
    }

    #[test]
    fn logistic_specs_feed_feature_decl() {
        let spec = AnalysisSpec::new(
            "a",
            &["1", "s"],
            &["1", "s"],
            NumeratorSpec::Logistic {
                features: vec!["1".into(), "s".into()],
            },
            DenominatorSpec::Logistic {
                features: vec!["1".into(), "lag(trt, 1)".into()],
                availability_restricted: true,
            },
        );
        let decl = spec.feature_decl();
        assert_eq!(decl.numerator, vec!["1", "s"]);
        assert_eq!(decl.denominator, vec!["1", "lag(trt, 1)"]);
    }
}
