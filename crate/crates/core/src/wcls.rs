//! Centered and weighted least squares.
//!
//! For each available person-occasion the regressor is
//! `x_t = (g_kt(H_t), (A_t - p̃_t(1|S_kt)) f_kt(S_kt))` with weight
//! `I_t p̃_t(A_t|S_kt) / p_t(A_t|H_t)`, and `(α̂, β̂)` solves the weighted normal
//! equations. The sandwich variance adds influence terms for an estimated
//! numerator and/or denominator, and for `n <= 50` a block-leverage correction
//! is applied to each person's residual vector.

use std::ops::Range;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::Design;
use crate::linalg;
use crate::prob::{evaluate_probability, NuisanceFitReport, ProbError, ProbabilityModel};

/// Largest sample size for which the small-sample correction is applied.
pub const SMALL_SAMPLE_THRESHOLD: usize = 50;
const SINGULAR_CONDITION_LIMIT: f64 = 1e12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WclsError {
    #[error("weighted normal equations are singular (condition number {condition:e})")]
    SingularSystem { condition: f64 },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("identity minus leverage is singular for individual {individual}")]
    SingularLeverage { individual: usize },
    #[error("variance has not been computed for this fit")]
    VarianceNotComputed,
    #[error("no degrees of freedom left: n={n}, p={p}, q={q}")]
    DegreesOfFreedomExhausted { n: usize, p: usize, q: usize },
    #[error("invalid contrast: {0}")]
    InvalidContrast(String),
    #[error(transparent)]
    Prob(#[from] ProbError),
}

/// Per-row weights and centered treatments, plus the derivatives of the
/// log-probabilities needed when either model was estimated.
#[derive(Debug, Clone, PartialEq)]
pub struct Weighting {
    /// Effective weight `I_t W_t`.
    pub weights: Vec<f64>,
    /// `A_t - p̃_t(1 | S_kt)`.
    pub centered: Vec<f64>,
    /// `p̃_t(1 | S_kt)`.
    pub numerator_prob: Vec<f64>,
    numerator_terms: Option<NumeratorTerms>,
    /// `d log p_t(A_t | H_t) / dη`, one row per design row.
    denominator_dlog: Option<DMatrix<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
struct NumeratorTerms {
    /// `d log p̃_t(A_t | S_kt) / dρ`
    dlog_observed: DMatrix<f64>,
    /// `d log p̃_t(1 | S_kt) / dρ`
    dlog_treated: DMatrix<f64>,
}

pub fn compute_weights(
    design: &Design,
    numerator: &ProbabilityModel,
    denominator: &ProbabilityModel,
) -> Result<Weighting, WclsError> {
    let m = design.len();
    let (dn, dd) = (numerator.n_params(), denominator.n_params());
    let mut weights = Vec::with_capacity(m);
    let mut centered = Vec::with_capacity(m);
    let mut numerator_prob = Vec::with_capacity(m);
    let mut dlog_observed = DMatrix::zeros(m, dn);
    let mut dlog_treated = DMatrix::zeros(m, dn);
    let mut denominator_dlog = DMatrix::zeros(m, dd);
    for (idx, row) in design.rows.iter().enumerate() {
        let a = row.treatment;
        let pt1 = numerator.prob_treatment(row)?;
        numerator_prob.push(pt1);
        centered.push(f64::from(a) - pt1);
        if !row.available {
            weights.push(0.0);
            continue;
        }
        let pt_obs = evaluate_probability(numerator, row, a)?;
        let p1 = denominator.prob_treatment(row)?;
        let p_obs = evaluate_probability(denominator, row, a)?;
        weights.push(pt_obs / p_obs);

        let resid = f64::from(a) - pt1;
        for (j, g) in numerator.gradient(row, pt1).into_iter().enumerate() {
            dlog_observed[(idx, j)] = resid / (pt1 * (1.0 - pt1)) * g;
            dlog_treated[(idx, j)] = g / pt1;
        }
        let resid = f64::from(a) - p1;
        for (j, g) in denominator.gradient(row, p1).into_iter().enumerate() {
            denominator_dlog[(idx, j)] = resid / (p1 * (1.0 - p1)) * g;
        }
    }
    Ok(Weighting {
        weights,
        centered,
        numerator_prob,
        numerator_terms: (dn > 0).then_some(NumeratorTerms {
            dlog_observed,
            dlog_treated,
        }),
        denominator_dlog: (dd > 0).then_some(denominator_dlog),
    })
}

impl Weighting {
    /// Weights and centering supplied directly; no nuisance adjustment applies.
    pub fn fixed(weights: Vec<f64>, numerator_prob: Vec<f64>, treatments: &[u8]) -> Self {
        let centered = treatments
            .iter()
            .zip(&numerator_prob)
            .map(|(&a, p)| f64::from(a) - p)
            .collect();
        Self {
            weights,
            centered,
            numerator_prob,
            numerator_terms: None,
            denominator_dlog: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dims {
    pub n: usize,
    pub occasions: usize,
    pub lag: usize,
    pub p: usize,
    pub q: usize,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Corrections {
    pub denominator_adjusted: bool,
    pub numerator_adjusted: bool,
    pub small_sample: bool,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SmallSample {
    /// Correct when `n <= 50`.
    #[default]
    Auto,
    Always,
    Never,
}

#[derive(Debug, Clone)]
pub struct WclsFit {
    pub alpha: DVector<f64>,
    pub beta: DVector<f64>,
    /// Variance of `(α̂, β̂)` for the sample at hand (asymptotic variance / n).
    pub vcov: Option<DMatrix<f64>>,
    /// `P_n U̇_W`, the averaged weighted cross-product matrix.
    pub bread: DMatrix<f64>,
    pub meat: Option<DMatrix<f64>>,
    pub weights: Vec<f64>,
    pub residuals: Vec<f64>,
    pub corrections: Corrections,
    pub dims: Dims,
    pub condition_number: f64,
    regressors: DMatrix<f64>,
    effect: DMatrix<f64>,
    numerator_prob: Vec<f64>,
    blocks: Vec<Range<usize>>,
    numerator_terms: Option<NumeratorTerms>,
    denominator_dlog: Option<DMatrix<f64>>,
    /// Per-person `U_W`, one row each.
    estimating: Option<DMatrix<f64>>,
    /// Per-person nuisance influence terms added to `U_W`.
    adjustment: Option<DMatrix<f64>>,
    asymmetry: f64,
}

/// Solve the weighted normal equations for `(α̂, β̂)`.
pub fn fit_wcls(design: &Design, weighting: &Weighting) -> Result<WclsFit, WclsError> {
    let (m, p, q) = (design.len(), design.p(), design.q());
    if weighting.weights.len() != m || weighting.centered.len() != m {
        return Err(WclsError::DimensionMismatch(format!(
            "weighting covers {} rows, design has {m}",
            weighting.weights.len()
        )));
    }
    let d = p + q;
    let mut x = DMatrix::zeros(m, d);
    let mut effect = DMatrix::zeros(m, p);
    for (idx, row) in design.rows.iter().enumerate() {
        for (j, g) in row.working.iter().enumerate() {
            x[(idx, j)] = *g;
        }
        for (j, f) in row.effect.iter().enumerate() {
            x[(idx, q + j)] = weighting.centered[idx] * f;
            effect[(idx, j)] = *f;
        }
    }
    let y = DVector::from_iterator(m, design.rows.iter().map(|r| r.response));
    let w = DVector::from_column_slice(&weighting.weights);
    let (theta, bread_sum, condition) = weighted_solve(&x, &w, &y)?;
    let residuals = &y - &x * &theta;
    let n = design.n();
    Ok(WclsFit {
        alpha: theta.rows(0, q).into_owned(),
        beta: theta.rows(q, p).into_owned(),
        vcov: None,
        bread: bread_sum / n as f64,
        meat: None,
        weights: weighting.weights.clone(),
        residuals: residuals.iter().copied().collect(),
        corrections: Corrections::default(),
        dims: Dims {
            n,
            occasions: design.occasions(),
            lag: design.lag(),
            p,
            q,
        },
        condition_number: condition,
        regressors: x,
        effect,
        numerator_prob: weighting.numerator_prob.clone(),
        blocks: design.blocks(),
        numerator_terms: weighting.numerator_terms.clone(),
        denominator_dlog: weighting.denominator_dlog.clone(),
        estimating: None,
        adjustment: None,
        asymmetry: 0.0,
    })
}

/// Weighted least squares `(XᵀΩX)⁻¹ XᵀΩy`; returns the solution, `XᵀΩX` and its condition number.
pub(crate) fn weighted_solve(
    x: &DMatrix<f64>,
    w: &DVector<f64>,
    y: &DVector<f64>,
) -> Result<(DVector<f64>, DMatrix<f64>, f64), WclsError> {
    let mut xw = x.clone();
    for (mut row, wi) in xw.row_iter_mut().zip(w.iter()) {
        row *= *wi;
    }
    let cross = x.transpose() * &xw;
    let rhs = xw.transpose() * y;
    let condition = linalg::condition_number(&cross);
    if !condition.is_finite() || condition > SINGULAR_CONDITION_LIMIT {
        return Err(WclsError::SingularSystem { condition });
    }
    let theta = cross
        .clone()
        .cholesky()
        .ok_or(WclsError::SingularSystem { condition })?
        .solve(&rhs);
    Ok((theta, cross, condition))
}

impl WclsFit {
    pub fn theta(&self) -> DVector<f64> {
        let mut out = DVector::zeros(self.dims.q + self.dims.p);
        out.rows_mut(0, self.dims.q).copy_from(&self.alpha);
        out.rows_mut(self.dims.q, self.dims.p).copy_from(&self.beta);
        out
    }

    /// The `p`×`p` block of `vcov` belonging to `β̂`.
    pub fn beta_vcov(&self) -> Option<DMatrix<f64>> {
        let (p, q) = (self.dims.p, self.dims.q);
        self.vcov.as_ref().map(|v| v.view((q, q), (p, p)).into_owned())
    }

    pub fn beta_se(&self) -> Option<Vec<f64>> {
        self.beta_vcov()
            .map(|v| (0..self.dims.p).map(|j| v[(j, j)].max(0.0).sqrt()).collect())
    }

    /// Max-norm of `P_n U_W` at the fitted coefficients.
    pub fn estimating_equation_residual(&self) -> f64 {
        let mut total = DVector::zeros(self.regressors.ncols());
        for (idx, row) in self.regressors.row_iter().enumerate() {
            total += row.transpose() * (self.weights[idx] * self.residuals[idx]);
        }
        linalg::max_abs(&total) / self.dims.n as f64
    }

    /// Largest `|V_ij - V_ji|` of the variance before it was symmetrized.
    pub fn vcov_asymmetry(&self) -> f64 {
        self.asymmetry
    }

    fn person_estimating(&self, residuals: &[f64]) -> DMatrix<f64> {
        let d = self.regressors.ncols();
        let mut out = DMatrix::zeros(self.dims.n, d);
        for (i, block) in self.blocks.iter().enumerate() {
            for idx in block.clone() {
                let scale = self.weights[idx] * residuals[idx];
                for j in 0..d {
                    out[(i, j)] += scale * self.regressors[(idx, j)];
                }
            }
        }
        out
    }

    fn refresh_variance(&mut self) -> Result<(), WclsError> {
        let estimating = self.estimating.as_ref().ok_or(WclsError::VarianceNotComputed)?;
        let n = self.dims.n as f64;
        let influence = match &self.adjustment {
            Some(adj) => estimating + adj,
            None => estimating.clone(),
        };
        let meat = influence.transpose() * &influence / n;
        let bread_inv = linalg::spd_inverse(&self.bread, SINGULAR_CONDITION_LIMIT)
            .map_err(|condition| WclsError::SingularSystem { condition })?;
        let vcov = &bread_inv * &meat * bread_inv.transpose() / n;
        self.asymmetry = linalg::max_asymmetry(&vcov);
        self.vcov = Some(linalg::symmetrize(&vcov));
        self.meat = Some(meat);
        Ok(())
    }
}

fn check_report(
    report: Option<&NuisanceFitReport>,
    expected: Option<usize>,
    n: usize,
    label: &str,
) -> Result<(), WclsError> {
    match (report, expected) {
        (None, None) => Ok(()),
        (Some(_), None) => Err(WclsError::DimensionMismatch(format!(
            "a {label} report was supplied but the {label} model was not estimated"
        ))),
        (None, Some(_)) => Err(WclsError::DimensionMismatch(format!(
            "the {label} model was estimated but no report was supplied"
        ))),
        (Some(r), Some(d)) => {
            if r.dim() != d || r.scores.ncols() != d || r.derivative.shape() != (d, d) {
                Err(WclsError::DimensionMismatch(format!(
                    "{label} report has dimension {}, model has {d}",
                    r.dim()
                )))
            } else if r.scores.nrows() != n {
                Err(WclsError::DimensionMismatch(format!(
                    "{label} report covers {} individuals, fit has {n}",
                    r.scores.nrows()
                )))
            } else {
                Ok(())
            }
        }
    }
}

/// Sandwich variance of `(α̂, β̂)`, adjusted for estimated weight models.
///
/// Reports must be supplied exactly for the models that were estimated.
pub fn sandwich_variance(
    mut fit: WclsFit,
    denominator: Option<&NuisanceFitReport>,
    numerator: Option<&NuisanceFitReport>,
) -> Result<WclsFit, WclsError> {
    let n = fit.dims.n;
    let (p, q) = (fit.dims.p, fit.dims.q);
    let d = p + q;
    check_report(
        denominator,
        fit.denominator_dlog.as_ref().map(|m| m.ncols()),
        n,
        "denominator",
    )?;
    check_report(
        numerator,
        fit.numerator_terms.as_ref().map(|t| t.dlog_observed.ncols()),
        n,
        "numerator",
    )?;

    let mut adjustment: Option<DMatrix<f64>> = None;
    let mut add = |term: DMatrix<f64>| {
        adjustment = Some(match adjustment.take() {
            Some(acc) => acc + term,
            None => term,
        });
    };

    if let (Some(report), Some(terms)) = (numerator, fit.numerator_terms.as_ref()) {
        // P_n dU_W/dρ: weight, centering and residual all depend on ρ
        let dn = terms.dlog_observed.ncols();
        let mut jac = DMatrix::zeros(d, dn);
        let fitted_effect = &fit.effect * &fit.beta;
        for idx in 0..fit.regressors.nrows() {
            let w = fit.weights[idx];
            if w == 0.0 {
                continue;
            }
            let x = fit.regressors.row(idx).transpose();
            let e = fit.residuals[idx];
            let pt1 = fit.numerator_prob[idx];
            let obs = terms.dlog_observed.row(idx);
            let treated = terms.dlog_treated.row(idx);
            jac += &x * obs * (e * w);
            let mut shift = DVector::zeros(d);
            for j in 0..p {
                shift[q + j] = -pt1 * fit.effect[(idx, j)];
            }
            jac += shift * treated * (e * w);
            jac += &x * treated * (pt1 * fitted_effect[idx] * w);
        }
        jac /= n as f64;
        add(influence_term(&jac, report)?);
        fit.corrections.numerator_adjusted = true;
    }

    if let (Some(report), Some(dlog)) = (denominator, fit.denominator_dlog.as_ref()) {
        // P_n dU_W/dη; only the weight depends on η
        let mut jac = DMatrix::zeros(d, dlog.ncols());
        for idx in 0..fit.regressors.nrows() {
            let w = fit.weights[idx];
            if w == 0.0 {
                continue;
            }
            let x = fit.regressors.row(idx).transpose();
            jac -= &x * dlog.row(idx) * (fit.residuals[idx] * w);
        }
        jac /= n as f64;
        add(influence_term(&jac, report)?);
        fit.corrections.denominator_adjusted = true;
    }

    let residuals = fit.residuals.clone();
    fit.estimating = Some(fit.person_estimating(&residuals));
    fit.adjustment = adjustment;
    fit.corrections.small_sample = false;
    fit.refresh_variance()?;
    Ok(fit)
}

/// Per-person `J (-U̇)⁻¹ U_i` for a nuisance estimating equation.
fn influence_term(jac: &DMatrix<f64>, report: &NuisanceFitReport) -> Result<DMatrix<f64>, WclsError> {
    let info = -&report.derivative;
    let info_inv = linalg::inverse(&info)
        .ok_or_else(|| WclsError::DimensionMismatch("nuisance derivative matrix is singular".into()))?;
    // rows are individuals: U_i ᵀ (info⁻¹)ᵀ Jᵀ
    Ok(&report.scores * info_inv.transpose() * jac.transpose())
}

/// Block-leverage small-sample correction, applied when `n <= 50`.
pub fn small_sample_correct(fit: WclsFit) -> Result<WclsFit, WclsError> {
    apply_small_sample(fit, SmallSample::Auto)
}

pub fn apply_small_sample(mut fit: WclsFit, mode: SmallSample) -> Result<WclsFit, WclsError> {
    if fit.estimating.is_none() {
        return Err(WclsError::VarianceNotComputed);
    }
    let apply = match mode {
        SmallSample::Auto => fit.dims.n <= SMALL_SAMPLE_THRESHOLD,
        SmallSample::Always => true,
        SmallSample::Never => false,
    };
    if !apply {
        return Ok(fit);
    }
    let bread_sum = &fit.bread * fit.dims.n as f64;
    let bread_inv = linalg::spd_inverse(&bread_sum, SINGULAR_CONDITION_LIMIT)
        .map_err(|condition| WclsError::SingularSystem { condition })?;
    let adjusted = leverage_adjusted_residuals(
        &fit.regressors,
        &fit.weights,
        &fit.residuals,
        &fit.blocks,
        &bread_inv,
        None,
    )?;
    fit.estimating = Some(fit.person_estimating(&adjusted));
    fit.corrections.small_sample = true;
    fit.refresh_variance()?;
    Ok(fit)
}

/// `(I - H_ii)⁻¹ e_i` for each person, with `H_ii = D_i B⁻¹ D_iᵀ M_i` where
/// `M_i` is the person's inner weighting (diagonal prior weights unless a
/// full block is supplied).
pub(crate) fn leverage_adjusted_residuals(
    regressors: &DMatrix<f64>,
    weights: &[f64],
    residuals: &[f64],
    blocks: &[Range<usize>],
    bread_inv: &DMatrix<f64>,
    inner: Option<&[DMatrix<f64>]>,
) -> Result<Vec<f64>, WclsError> {
    let mut out = residuals.to_vec();
    for (i, block) in blocks.iter().enumerate() {
        let len = block.len();
        if len == 0 {
            continue;
        }
        let di = regressors.rows(block.start, len);
        let mi = match inner {
            Some(blocks) => blocks[i].clone(),
            None => DMatrix::from_diagonal(&DVector::from_column_slice(&weights[block.clone()])),
        };
        let h = di * bread_inv * di.transpose() * mi;
        let lhs = DMatrix::identity(len, len) - h;
        let e = DVector::from_column_slice(&residuals[block.clone()]);
        let solved = lhs
            .lu()
            .solve(&e)
            .ok_or(WclsError::SingularLeverage { individual: i })?;
        if solved.iter().any(|v| !v.is_finite()) {
            return Err(WclsError::SingularLeverage { individual: i });
        }
        out[block.clone()].copy_from_slice(solved.as_slice());
    }
    Ok(out)
}


#[cfg(test)]
mod influence_tests {
    use super::*;
    use crate::features::DesignRow;
    use crate::prob::{fit_constant_numerator, fit_logistic, Side};

    fn design(n: usize, t: usize) -> Design {
        let mut rows = Vec::new();
        let mut state = 17u64;
        let mut draw = || {
            state = state
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        for i in 0..n {
            for u in 1..=t {
                let s = if draw() < 0.5 { 1.0 } else { -1.0 };
                let p = crate::prob::expit(0.8 * s);
                let a = (draw() < p) as u8;
                rows.push(DesignRow {
                    individual: i,
                    t: u,
                    available: draw() < 0.9 || u == 1,
                    treatment: a,
                    effect: vec![1.0, s],
                    working: vec![1.0, s],
                    numerator: vec![1.0, s],
                    denominator: vec![1.0, s],
                    response: 0.5 * s + (f64::from(a) - p) * (-0.2 + 0.4 * s) + draw() - 0.5,
                });
            }
        }
        for r in &mut rows {
            if !r.available {
                r.treatment = 0;
            }
        }
        Design::from_rows(rows, n, t, 1).unwrap()
    }

    /// Influence of `θ̂` computed from a numerical derivative of `θ̂(ρ)` with
    /// respect to the nuisance parameters.
    fn numeric_vcov(
        design: &Design,
        num: &ProbabilityModel,
        num_report: Option<&NuisanceFitReport>,
        den: &ProbabilityModel,
        den_report: Option<&NuisanceFitReport>,
    ) -> DMatrix<f64> {
        let base = fit_wcls(design, &compute_weights(design, num, den).unwrap()).unwrap();
        let base = sandwich_variance(base, den_report, num_report).unwrap();
        let n = design.n() as f64;
        let bread_inv = base.bread.clone().try_inverse().unwrap();
        let mut influence = base.estimating.clone().unwrap() * bread_inv.transpose();
        let theta = |num: &ProbabilityModel, den: &ProbabilityModel| {
            fit_wcls(design, &compute_weights(design, num, den).unwrap())
                .unwrap()
                .theta()
        };
        let perturbed = |model: &ProbabilityModel, j: usize, h: f64| {
            let mut c = model.coefficients();
            c[j] += h;
            match (model.kind(), model.side()) {
                (crate::prob::ModelKind::Constant(_), side) => ProbabilityModel::known_constant(side, c[0]),
                (_, side) => ProbabilityModel::known_logistic(side, c),
            }
        };
        let h = 1e-6;
        let mut add = |report: &NuisanceFitReport, model: &ProbabilityModel, is_num: bool| {
            let d = report.dim();
            let mut dtheta = DMatrix::zeros(base.theta().len(), d);
            for j in 0..d {
                let (up, down) = if is_num {
                    (
                        theta(&perturbed(model, j, h), den),
                        theta(&perturbed(model, j, -h), den),
                    )
                } else {
                    (
                        theta(num, &perturbed(model, j, h)),
                        theta(num, &perturbed(model, j, -h)),
                    )
                };
                dtheta.set_column(j, &((up - down) / (2.0 * h)));
            }
            let nuisance = &report.scores * (-&report.derivative).try_inverse().unwrap().transpose();
            influence += nuisance * dtheta.transpose();
        };
        if let Some(r) = num_report {
            add(r, num, true);
        }
        if let Some(r) = den_report {
            add(r, den, false);
        }
        influence.transpose() * &influence / (n * n)
    }

    fn compare(
        num: (ProbabilityModel, Option<NuisanceFitReport>),
        den: (ProbabilityModel, Option<NuisanceFitReport>),
        design: &Design,
    ) {
        let w = compute_weights(design, &num.0, &den.0).unwrap();
        let fit = sandwich_variance(fit_wcls(design, &w).unwrap(), den.1.as_ref(), num.1.as_ref()).unwrap();
        let analytic = fit.vcov.unwrap();
        let numeric = numeric_vcov(design, &num.0, num.1.as_ref(), &den.0, den.1.as_ref());
        let scale = analytic.abs().max();
        assert!(
            (&analytic - &numeric).abs().max() < 1e-6 * scale.max(1.0),
            "analytic {analytic} numeric {numeric}"
        );
    }

    #[test]
    fn constant_numerator_adjustment_matches_numeric_derivative() {
        let d = design(25, 12);
        let num = fit_constant_numerator(&d).unwrap();
        let den = ProbabilityModel::known_constant(Side::Denominator, 0.55);
        compare((num.0, Some(num.1)), (den, None), &d);
    }

    #[test]
    fn logistic_models_adjustment_matches_numeric_derivative() {
        let d = design(25, 12);
        let num = fit_logistic(&d, Side::Numerator, true).unwrap();
        let den = fit_logistic(&d, Side::Denominator, true).unwrap();
        compare((num.0, Some(num.1)), (den.0, Some(den.1)), &d);
    }

    #[test]
    fn denominator_only_adjustment_matches_numeric_derivative() {
        let d = design(25, 12);
        let num = ProbabilityModel::known_constant(Side::Numerator, 0.5);
        let den = fit_logistic(&d, Side::Denominator, true).unwrap();
        compare((num, None), (den.0, Some(den.1)), &d);
    }
}
