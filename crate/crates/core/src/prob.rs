//! Treatment-probability models for the weight numerator `p̃_t(1 | S_kt)` and
//! denominator `p_t(1 | H_t)`.
//!
//! Estimated models carry a [`NuisanceFitReport`] with per-individual score
//! contributions and the averaged derivative of the estimating equation, which
//! the sandwich variance uses to account for estimation of the weights.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::{Design, DesignRow};
use crate::linalg;

/// Probabilities outside `[POSITIVITY_FLOOR, 1 - POSITIVITY_FLOOR]` are rejected.
pub const POSITIVITY_FLOOR: f64 = 1e-6;
pub const IRLS_TOLERANCE: f64 = 1e-8;
pub const IRLS_MAX_ITERATIONS: usize = 100;
/// Coefficient max-norm beyond which a logistic fit is declared separated.
pub const SEPARATION_BOUND: f64 = 30.0;
const RANK_CONDITION_LIMIT: f64 = 1e12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProbError {
    #[error("logistic fit separated after {iterations} iterations (treatment perfectly predicted)")]
    Separation { iterations: usize },
    #[error("logistic normal equations are rank deficient (condition number {condition:e})")]
    RankDeficient { condition: f64 },
    #[error("logistic fit did not converge in {iterations} iterations")]
    NonConvergence { iterations: usize },
    #[error("estimated constant numerator probability {0} violates positivity")]
    Degenerate(f64),
    #[error("probability {p} for individual {individual} at t={t} is outside the positivity band")]
    Positivity { p: f64, individual: usize, t: usize },
    #[error("no known probability for individual {individual} at t={t}")]
    MissingProbability { individual: usize, t: usize },
    #[error("{0}")]
    InvalidSpec(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Numerator,
    Denominator,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ModelKind {
    Constant(f64),
    /// Probabilities indexed by `[individual][t - 1]`.
    PerOccasion(Vec<Vec<f64>>),
    Logistic(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityModel {
    kind: ModelKind,
    side: Side,
    estimated: bool,
}

pub fn expit(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

impl ProbabilityModel {
    pub fn known_constant(side: Side, p: f64) -> Self {
        Self {
            kind: ModelKind::Constant(p),
            side,
            estimated: false,
        }
    }

    pub fn known_per_occasion(side: Side, table: Vec<Vec<f64>>) -> Self {
        Self {
            kind: ModelKind::PerOccasion(table),
            side,
            estimated: false,
        }
    }

    /// Logistic model with prespecified coefficients.
    pub fn known_logistic(side: Side, coefficients: Vec<f64>) -> Self {
        Self {
            kind: ModelKind::Logistic(coefficients),
            side,
            estimated: false,
        }
    }

    pub fn kind(&self) -> &ModelKind {
        &self.kind
    }

    pub fn side(&self) -> Side {
        self.side
    }

    /// Whether the parameters were estimated from the data being analyzed.
    pub fn is_estimated(&self) -> bool {
        self.estimated
    }

    pub fn coefficients(&self) -> Vec<f64> {
        match &self.kind {
            ModelKind::Constant(p) => vec![*p],
            ModelKind::PerOccasion(_) => Vec::new(),
            ModelKind::Logistic(c) => c.clone(),
        }
    }

    /// Number of estimated parameters (zero for known models).
    pub fn n_params(&self) -> usize {
        if self.estimated {
            self.coefficients().len()
        } else {
            0
        }
    }

    fn features<'a>(&self, row: &'a DesignRow) -> &'a [f64] {
        match self.side {
            Side::Numerator => &row.numerator,
            Side::Denominator => &row.denominator,
        }
    }

    fn raw_prob_treatment(&self, row: &DesignRow) -> Result<f64, ProbError> {
        match &self.kind {
            ModelKind::Constant(p) => Ok(*p),
            ModelKind::PerOccasion(table) => {
                table
                    .get(row.individual)
                    .and_then(|r| r.get(row.t - 1))
                    .copied()
                    .ok_or(ProbError::MissingProbability {
                        individual: row.individual,
                        t: row.t,
                    })
            }
            ModelKind::Logistic(coef) => {
                let x = self.features(row);
                if x.len() != coef.len() {
                    return Err(ProbError::InvalidSpec(format!(
                        "logistic model has {} coefficients but the row carries {} features",
                        coef.len(),
                        x.len()
                    )));
                }
                Ok(expit(x.iter().zip(coef).map(|(a, b)| a * b).sum()))
            }
        }
    }

    /// `p(1 | features)`, checked against the positivity band.
    pub fn prob_treatment(&self, row: &DesignRow) -> Result<f64, ProbError> {
        let p = self.raw_prob_treatment(row)?;
        if !(POSITIVITY_FLOOR..=1.0 - POSITIVITY_FLOOR).contains(&p) {
            return Err(ProbError::Positivity {
                p,
                individual: row.individual,
                t: row.t,
            });
        }
        Ok(p)
    }

    /// Derivative of `p(1 | features)` with respect to the estimated parameters.
    pub fn gradient(&self, row: &DesignRow, p1: f64) -> Vec<f64> {
        if !self.estimated {
            return Vec::new();
        }
        match &self.kind {
            ModelKind::Constant(_) => vec![1.0],
            ModelKind::PerOccasion(_) => Vec::new(),
            ModelKind::Logistic(_) => {
                let w = p1 * (1.0 - p1);
                self.features(row).iter().map(|x| w * x).collect()
            }
        }
    }
}

/// `p(a | features) = p^a (1 - p)^(1 - a)`.
pub fn evaluate_probability(model: &ProbabilityModel, row: &DesignRow, a: u8) -> Result<f64, ProbError> {
    let p = model.prob_treatment(row)?;
    Ok(if a == 1 { p } else { 1.0 - p })
}

#[derive(Debug, Clone, PartialEq)]
pub struct NuisanceFitReport {
    pub coefficients: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    /// Per-individual summed score `U_i`, one row per individual.
    pub scores: DMatrix<f64>,
    /// Averaged derivative `P_n dU/dθ` of the score (negative definite).
    pub derivative: DMatrix<f64>,
}

impl NuisanceFitReport {
    pub fn dim(&self) -> usize {
        self.coefficients.len()
    }

    /// Averaged score; zero at the optimum.
    pub fn mean_score(&self) -> DVector<f64> {
        let n = self.scores.nrows() as f64;
        self.scores.row_sum().transpose() / n
    }
}

/// Maximum-likelihood logistic regression of `A_t` on the side's features,
/// fitted by Newton-Raphson (iteratively reweighted least squares).
pub fn fit_logistic(
    design: &Design,
    side: Side,
    availability_restricted: bool,
) -> Result<(ProbabilityModel, NuisanceFitReport), ProbError> {
    fn pick(side: Side, row: &DesignRow) -> &[f64] {
        match side {
            Side::Numerator => &row.numerator,
            Side::Denominator => &row.denominator,
        }
    }
    let rows: Vec<&DesignRow> = design
        .rows
        .iter()
        .filter(|r| !availability_restricted || r.available)
        .collect();
    let d = rows.first().map(|r| pick(side, r).len()).unwrap_or(0);
    if d == 0 {
        return Err(ProbError::InvalidSpec(format!(
            "{side:?} logistic model has no features or no rows"
        )));
    }
    let treated = rows.iter().filter(|r| r.treatment == 1).count();
    if treated == 0 || treated == rows.len() {
        return Err(ProbError::Separation { iterations: 0 });
    }

    let accumulate = |beta: &DVector<f64>| -> (DMatrix<f64>, DVector<f64>) {
        let mut info = DMatrix::zeros(d, d);
        let mut grad = DVector::zeros(d);
        for r in &rows {
            let x = DVector::from_column_slice(pick(side, r));
            let p = expit(x.dot(beta));
            let w = p * (1.0 - p);
            info.ger(w, &x, &x, 1.0);
            grad.axpy(f64::from(r.treatment) - p, &x, 1.0);
        }
        (info, grad)
    };

    let mut beta = DVector::zeros(d);
    let mut converged = false;
    let mut iterations = 0;
    while iterations < IRLS_MAX_ITERATIONS {
        iterations += 1;
        let (info, grad) = accumulate(&beta);
        let cond = linalg::condition_number(&info);
        let step = if cond.is_finite() && cond <= RANK_CONDITION_LIMIT {
            info.cholesky().map(|c| c.solve(&grad))
        } else {
            None
        };
        let step = match step {
            Some(s) => s,
            None if iterations == 1 => return Err(ProbError::RankDeficient { condition: cond }),
            None => return Err(ProbError::Separation { iterations }),
        };
        beta += &step;
        if linalg::max_abs(&beta) > SEPARATION_BOUND {
            return Err(ProbError::Separation { iterations });
        }
        if linalg::max_abs(&step) < IRLS_TOLERANCE {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(ProbError::NonConvergence { iterations });
    }

    let n = design.n();
    let mut scores = DMatrix::zeros(n, d);
    let mut info = DMatrix::zeros(d, d);
    for r in &rows {
        let x = DVector::from_column_slice(pick(side, r));
        let p = expit(x.dot(&beta));
        info.ger(p * (1.0 - p), &x, &x, 1.0);
        let resid = f64::from(r.treatment) - p;
        for (j, xj) in x.iter().enumerate() {
            scores[(r.individual, j)] += resid * xj;
        }
    }
    let coefficients: Vec<f64> = beta.iter().copied().collect();
    let model = ProbabilityModel {
        kind: ModelKind::Logistic(coefficients.clone()),
        side,
        estimated: true,
    };
    let report = NuisanceFitReport {
        coefficients,
        converged,
        iterations,
        scores,
        derivative: -info / n as f64,
    };
    Ok((model, report))
}

/// `ρ̂ = Σ I_t A_t / Σ I_t`, the treated fraction among available occasions.
pub fn fit_constant_numerator(design: &Design) -> Result<(ProbabilityModel, NuisanceFitReport), ProbError> {
    let available = design.rows.iter().filter(|r| r.available).count();
    if available == 0 {
        return Err(ProbError::InvalidSpec("no available occasions".into()));
    }
    let treated = design.rows.iter().filter(|r| r.available && r.treatment == 1).count();
    let rho = treated as f64 / available as f64;
    if treated == 0 || treated == available {
        return Err(ProbError::Degenerate(rho));
    }
    let n = design.n();
    let mut scores = DMatrix::zeros(n, 1);
    for r in design.rows.iter().filter(|r| r.available) {
        scores[(r.individual, 0)] += f64::from(r.treatment) - rho;
    }
    let model = ProbabilityModel {
        kind: ModelKind::Constant(rho),
        side: Side::Numerator,
        estimated: true,
    };
    let report = NuisanceFitReport {
        coefficients: vec![rho],
        converged: true,
        iterations: 0,
        scores,
        derivative: DMatrix::from_element(1, 1, -(available as f64) / n as f64),
    };
    Ok((model, report))
}
