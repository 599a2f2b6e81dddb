//! Generalized estimating equations with independence or AR(1) working
//! correlation. These are comparators: they regress on the uncentered
//! treatment (or on a centered one with a non-diagonal inner weighting) and are
//! generally biased for the marginal effect.

use std::ops::Range;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::Design;
use crate::inference::{infer_coefficients, Contrast, InferenceOptions, InferenceResult};
use crate::linalg;
use crate::wcls::{leverage_adjusted_residuals, SmallSample, WclsError, Weighting, SMALL_SAMPLE_THRESHOLD};

const SINGULAR_CONDITION_LIMIT: f64 = 1e12;
/// Bound on the moment estimate of the AR(1) parameter.
pub const AR1_CLAMP: f64 = 0.99;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeeError {
    #[error("GEE normal equations are singular (condition number {condition:e})")]
    SingularSystem { condition: f64 },
    #[error("working correlation is not positive definite: {0}")]
    NonPositiveDefiniteCorrelation(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("identity minus leverage is singular for individual {individual}")]
    SingularLeverage { individual: usize },
}

impl From<WclsError> for GeeError {
    fn from(e: WclsError) -> Self {
        match e {
            WclsError::SingularSystem { condition } => GeeError::SingularSystem { condition },
            WclsError::SingularLeverage { individual } => GeeError::SingularLeverage { individual },
            other => GeeError::DimensionMismatch(other.to_string()),
        }
    }
}

/// Working correlation across a person's occasions.
#[derive(Debug, Clone, PartialEq)]
pub enum Correlation {
    Independence,
    /// A full `T`×`T` matrix indexed by occasion; each person uses the rows
    /// and columns of the occasions they contribute.
    Ar1Fixed(DMatrix<f64>),
    /// `r^|t-u|` with `r` estimated from lag-1 products of Pearson residuals
    /// of an independence fit, followed by one re-solve.
    Ar1Estimated,
}

impl Correlation {
    /// `base^(|t-u|/2)` for occasions `1..=t`.
    pub fn power_decay(occasions: usize, base: f64) -> Self {
        Correlation::Ar1Fixed(DMatrix::from_fn(occasions, occasions, |a, b| {
            base.powf((a as f64 - b as f64).abs() / 2.0)
        }))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorrelationKind {
    Independence,
    Ar1Fixed,
    Ar1Estimated,
}

/// How treatment enters the mean model.
#[derive(Debug, Clone, Copy)]
pub enum MeanModel<'a> {
    /// `(g, A f)` with availability as prior weight.
    Uncentered,
    /// `(g, (A - p̃) f)` with the WCLS weights as prior weights.
    Centered(&'a Weighting),
}

/// A GEE problem in matrix form: rows grouped into per-person blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct GeeProblem {
    pub x: DMatrix<f64>,
    pub y: DVector<f64>,
    pub prior_weights: Vec<f64>,
    /// 1-based occasion of each row.
    pub times: Vec<usize>,
    pub blocks: Vec<Range<usize>>,
    pub p: usize,
    pub q: usize,
}

impl GeeProblem {
    pub fn from_design(design: &Design, mean: MeanModel<'_>) -> Result<Self, GeeError> {
        let (m, p, q) = (design.len(), design.p(), design.q());
        let (treatment, weights): (Vec<f64>, Vec<f64>) = match mean {
            MeanModel::Uncentered => design
                .rows
                .iter()
                .map(|r| (f64::from(r.treatment), if r.available { 1.0 } else { 0.0 }))
                .unzip(),
            MeanModel::Centered(w) => {
                if w.weights.len() != m {
                    return Err(GeeError::DimensionMismatch(format!(
                        "weighting covers {} rows, design has {m}",
                        w.weights.len()
                    )));
                }
                (w.centered.clone(), w.weights.clone())
            }
        };
        let mut x = DMatrix::zeros(m, p + q);
        for (idx, row) in design.rows.iter().enumerate() {
            for (j, g) in row.working.iter().enumerate() {
                x[(idx, j)] = *g;
            }
            for (j, f) in row.effect.iter().enumerate() {
                x[(idx, q + j)] = treatment[idx] * f;
            }
        }
        Ok(Self {
            x,
            y: DVector::from_iterator(m, design.rows.iter().map(|r| r.response)),
            prior_weights: weights,
            times: design.rows.iter().map(|r| r.t).collect(),
            blocks: design.blocks(),
            p,
            q,
        })
    }

    fn n(&self) -> usize {
        self.blocks.len()
    }
}

#[derive(Debug, Clone)]
pub struct GeeFit {
    /// Working-model coefficients followed by the treatment coefficients.
    pub coefficients: DVector<f64>,
    pub vcov: DMatrix<f64>,
    pub correlation_kind: CorrelationKind,
    /// `r` for AR(1) working correlation when estimated.
    pub correlation_parameter: Option<f64>,
    pub residuals: Vec<f64>,
    pub small_sample: bool,
    pub condition_number: f64,
    pub n: usize,
    pub p: usize,
    pub q: usize,
}

impl GeeFit {
    pub fn beta(&self) -> DVector<f64> {
        self.coefficients.rows(self.q, self.p).into_owned()
    }

    pub fn beta_vcov(&self) -> DMatrix<f64> {
        self.vcov.view((self.q, self.q), (self.p, self.p)).into_owned()
    }

    pub fn beta_se(&self) -> Vec<f64> {
        let v = self.beta_vcov();
        (0..self.p).map(|j| v[(j, j)].max(0.0).sqrt()).collect()
    }

    pub fn infer(&self, contrast: &Contrast, options: InferenceOptions) -> Result<InferenceResult, WclsError> {
        infer_coefficients(&self.beta(), &self.beta_vcov(), self.n, self.q, contrast, options)
    }
}

pub fn fit_gee(
    design: &Design,
    mean: MeanModel<'_>,
    correlation: &Correlation,
    small_sample: SmallSample,
) -> Result<GeeFit, GeeError> {
    fit_gee_problem(&GeeProblem::from_design(design, mean)?, correlation, small_sample)
}

pub fn fit_gee_problem(
    problem: &GeeProblem,
    correlation: &Correlation,
    small_sample: SmallSample,
) -> Result<GeeFit, GeeError> {
    let m = problem.x.nrows();
    if problem.y.len() != m || problem.prior_weights.len() != m || problem.times.len() != m {
        return Err(GeeError::DimensionMismatch("problem vectors disagree in length".into()));
    }
    if problem.x.ncols() != problem.p + problem.q {
        return Err(GeeError::DimensionMismatch(format!(
            "design has {} columns, expected p + q = {}",
            problem.x.ncols(),
            problem.p + problem.q
        )));
    }
    let (kind, inner, parameter) = match correlation {
        Correlation::Independence => (CorrelationKind::Independence, independence_blocks(problem), None),
        Correlation::Ar1Fixed(v) => {
            check_correlation(v, problem)?;
            let inner = working_blocks(problem, |a, b| v[(a - 1, b - 1)])?;
            (CorrelationKind::Ar1Fixed, inner, None)
        }
        Correlation::Ar1Estimated => {
            let initial = independence_blocks(problem);
            let (theta, _, _) = solve(problem, &initial)?;
            let r = ar1_moment(problem, &theta);
            let inner = working_blocks(problem, |a, b| r.powi((a as i32 - b as i32).abs()))?;
            (CorrelationKind::Ar1Estimated, inner, Some(r))
        }
    };
    let (theta, bread, condition) = solve(problem, &inner)?;
    let residuals = &problem.y - &problem.x * &theta;
    let residuals: Vec<f64> = residuals.iter().copied().collect();
    let bread_inv = linalg::spd_inverse(&bread, SINGULAR_CONDITION_LIMIT)
        .map_err(|condition| GeeError::SingularSystem { condition })?;
    let corrected = match small_sample {
        SmallSample::Auto => problem.n() <= SMALL_SAMPLE_THRESHOLD,
        SmallSample::Always => true,
        SmallSample::Never => false,
    };
    let used = if corrected {
        leverage_adjusted_residuals(
            &problem.x,
            &problem.prior_weights,
            &residuals,
            &problem.blocks,
            &bread_inv,
            Some(&inner),
        )?
    } else {
        residuals.clone()
    };
    let d = problem.x.ncols();
    let mut meat = DMatrix::zeros(d, d);
    for (block, mi) in problem.blocks.iter().zip(&inner) {
        if block.is_empty() {
            continue;
        }
        let di = problem.x.rows(block.start, block.len());
        let e = DVector::from_column_slice(&used[block.clone()]);
        let u = di.transpose() * (mi * e);
        meat += &u * u.transpose();
    }
    let vcov = linalg::symmetrize(&(&bread_inv * meat * &bread_inv));
    Ok(GeeFit {
        coefficients: theta,
        vcov,
        correlation_kind: kind,
        correlation_parameter: parameter,
        residuals,
        small_sample: corrected,
        condition_number: condition,
        n: problem.n(),
        p: problem.p,
        q: problem.q,
    })
}

fn check_correlation(v: &DMatrix<f64>, problem: &GeeProblem) -> Result<(), GeeError> {
    let need = problem.times.iter().copied().max().unwrap_or(0);
    if !v.is_square() || v.nrows() < need {
        return Err(GeeError::DimensionMismatch(format!(
            "working correlation is {}x{}, occasions reach {need}",
            v.nrows(),
            v.ncols()
        )));
    }
    if linalg::max_asymmetry(v) > 1e-12 {
        return Err(GeeError::NonPositiveDefiniteCorrelation(
            "matrix is not symmetric".into(),
        ));
    }
    if v.clone().cholesky().is_none() {
        return Err(GeeError::NonPositiveDefiniteCorrelation(
            "Cholesky factorization failed".into(),
        ));
    }
    Ok(())
}

fn independence_blocks(problem: &GeeProblem) -> Vec<DMatrix<f64>> {
    problem
        .blocks
        .iter()
        .map(|b| DMatrix::from_diagonal(&DVector::from_column_slice(&problem.prior_weights[b.clone()])))
        .collect()
}

/// `Ω^{1/2} V⁻¹ Ω^{1/2}` per person, with `V` restricted to rows of positive weight.
fn working_blocks(problem: &GeeProblem, corr: impl Fn(usize, usize) -> f64) -> Result<Vec<DMatrix<f64>>, GeeError> {
    problem
        .blocks
        .iter()
        .map(|block| {
            let len = block.len();
            let kept: Vec<usize> = (0..len)
                .filter(|&a| problem.prior_weights[block.start + a] > 0.0)
                .collect();
            let mut out = DMatrix::zeros(len, len);
            if kept.is_empty() {
                return Ok(out);
            }
            let time = |a: usize| problem.times[block.start + a];
            let v = DMatrix::from_fn(kept.len(), kept.len(), |a, b| corr(time(kept[a]), time(kept[b])));
            let inv = v
                .cholesky()
                .ok_or_else(|| {
                    GeeError::NonPositiveDefiniteCorrelation("person block is not positive definite".into())
                })?
                .inverse();
            for (a, &ra) in kept.iter().enumerate() {
                for (b, &rb) in kept.iter().enumerate() {
                    let wa = problem.prior_weights[block.start + ra].sqrt();
                    let wb = problem.prior_weights[block.start + rb].sqrt();
                    out[(ra, rb)] = wa * inv[(a, b)] * wb;
                }
            }
            Ok(out)
        })
        .collect()
}

fn solve(problem: &GeeProblem, inner: &[DMatrix<f64>]) -> Result<(DVector<f64>, DMatrix<f64>, f64), GeeError> {
    let d = problem.x.ncols();
    let mut bread = DMatrix::zeros(d, d);
    let mut rhs = DVector::zeros(d);
    for (block, mi) in problem.blocks.iter().zip(inner) {
        if block.is_empty() {
            continue;
        }
        let di = problem.x.rows(block.start, block.len());
        let yi = problem.y.rows(block.start, block.len());
        let dm = di.transpose() * mi;
        bread += &dm * di;
        rhs += dm * yi;
    }
    let condition = linalg::condition_number(&bread);
    if !condition.is_finite() || condition > SINGULAR_CONDITION_LIMIT {
        return Err(GeeError::SingularSystem { condition });
    }
    let theta = bread
        .clone()
        .cholesky()
        .ok_or(GeeError::SingularSystem { condition })?
        .solve(&rhs);
    Ok((theta, bread, condition))
}

/// Ratio of the mean lag-1 product to the mean square of Pearson residuals.
fn ar1_moment(problem: &GeeProblem, theta: &DVector<f64>) -> f64 {
    let fitted = &problem.x * theta;
    let pearson: Vec<f64> = (0..problem.y.len())
        .map(|i| (problem.y[i] - fitted[i]) * problem.prior_weights[i].sqrt())
        .collect();
    let (mut sq, mut count) = (0.0, 0usize);
    let (mut cross, mut pairs) = (0.0, 0usize);
    for block in &problem.blocks {
        for idx in block.clone() {
            if problem.prior_weights[idx] <= 0.0 {
                continue;
            }
            sq += pearson[idx] * pearson[idx];
            count += 1;
            let next = idx + 1;
            if next < block.end && problem.prior_weights[next] > 0.0 && problem.times[next] == problem.times[idx] + 1 {
                cross += pearson[idx] * pearson[next];
                pairs += 1;
            }
        }
    }
    if pairs == 0 || sq == 0.0 {
        return 0.0;
    }
    ((cross / pairs as f64) / (sq / count as f64)).clamp(-AR1_CLAMP, AR1_CLAMP)
}
