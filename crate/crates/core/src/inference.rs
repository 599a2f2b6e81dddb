//! t-based intervals and tests for linear contrasts of `β̂`, plus a
//! Hotelling-type joint test for matrix contrasts.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, FisherSnedecor, StudentsT};

use crate::linalg;
use crate::wcls::{WclsError, WclsFit};

/// Linear contrast of the effect coefficients.
#[derive(Debug, Clone, PartialEq)]
pub enum Contrast {
    /// `cᵀβ`.
    Vector(Vec<f64>),
    /// `Lβ`, one row per component.
    Matrix(DMatrix<f64>),
}

impl Contrast {
    /// Unit vector selecting coefficient `j` of `p`.
    pub fn coefficient(j: usize, p: usize) -> Self {
        let mut c = vec![0.0; p];
        c[j] = 1.0;
        Contrast::Vector(c)
    }

    fn matrix(&self) -> DMatrix<f64> {
        match self {
            Contrast::Vector(c) => DMatrix::from_row_slice(1, c.len(), c),
            Contrast::Matrix(m) => m.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InferenceOptions {
    pub alpha0: f64,
    pub one_sided: bool,
}

impl Default for InferenceOptions {
    fn default() -> Self {
        Self {
            alpha0: 0.05,
            one_sided: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContrastRow {
    pub estimate: f64,
    pub se: f64,
    pub df: usize,
    pub ci_lower: f64,
    pub ci_upper: f64,
    pub t_statistic: f64,
    pub p_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointTest {
    /// `(Lβ̂)ᵀ (L V Lᵀ)⁻¹ (Lβ̂)`.
    pub statistic: f64,
    pub f_statistic: f64,
    pub df1: usize,
    pub df2: usize,
    /// Rejection threshold on the scale of `statistic`.
    pub critical_value: f64,
    pub p_value: f64,
    pub reject: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InferenceResult {
    pub rows: Vec<ContrastRow>,
    pub joint: Option<JointTest>,
    pub alpha0: f64,
    pub one_sided: bool,
}

/// Inference for a contrast of a fitted WCLS model.
pub fn infer(fit: &WclsFit, contrast: &Contrast, options: InferenceOptions) -> Result<InferenceResult, WclsError> {
    let vcov = fit.beta_vcov().ok_or(WclsError::VarianceNotComputed)?;
    infer_coefficients(&fit.beta, &vcov, fit.dims.n, fit.dims.q, contrast, options)
}

/// Inference for a contrast of `β̂` with variance `vcov`, `n` individuals and
/// `q` nuisance coefficients.
pub fn infer_coefficients(
    beta: &DVector<f64>,
    vcov: &DMatrix<f64>,
    n: usize,
    q: usize,
    contrast: &Contrast,
    options: InferenceOptions,
) -> Result<InferenceResult, WclsError> {
    let p = beta.len();
    if !(options.alpha0 > 0.0 && options.alpha0 < 1.0) {
        return Err(WclsError::InvalidContrast(format!(
            "alpha0 {} is outside (0, 1)",
            options.alpha0
        )));
    }
    if vcov.shape() != (p, p) {
        return Err(WclsError::DimensionMismatch(format!(
            "variance is {:?}, coefficients have length {p}",
            vcov.shape()
        )));
    }
    let l = contrast.matrix();
    if l.ncols() != p || l.nrows() == 0 {
        return Err(WclsError::InvalidContrast(format!(
            "contrast is {}x{}, expected k x {p}",
            l.nrows(),
            l.ncols()
        )));
    }
    if n <= p + q {
        return Err(WclsError::DegreesOfFreedomExhausted { n, p, q });
    }
    let df = n - p - q;
    let t_dist = StudentsT::new(0.0, 1.0, df as f64).expect("positive degrees of freedom");
    let level = if options.one_sided {
        1.0 - options.alpha0
    } else {
        1.0 - options.alpha0 / 2.0
    };
    let quantile = t_dist.inverse_cdf(level);

    let est = &l * beta;
    let cov = &l * vcov * l.transpose();
    let rows = (0..l.nrows())
        .map(|r| {
            let estimate = est[r];
            let se = cov[(r, r)].max(0.0).sqrt();
            let t_statistic = if estimate == 0.0 { 0.0 } else { estimate / se };
            let tail = 1.0 - t_dist.cdf(t_statistic.abs());
            let p_value = if estimate == 0.0 {
                1.0
            } else if options.one_sided {
                tail
            } else {
                2.0 * tail
            };
            ContrastRow {
                estimate,
                se,
                df,
                ci_lower: estimate - quantile * se,
                ci_upper: estimate + quantile * se,
                t_statistic,
                p_value: p_value.clamp(0.0, 1.0),
            }
        })
        .collect();

    let joint = match contrast {
        Contrast::Vector(_) => None,
        Contrast::Matrix(_) => Some(hotelling(&est, &cov, n, q, options.alpha0)?),
    };
    Ok(InferenceResult {
        rows,
        joint,
        alpha0: options.alpha0,
        one_sided: options.one_sided,
    })
}

fn hotelling(est: &DVector<f64>, cov: &DMatrix<f64>, n: usize, q: usize, alpha0: f64) -> Result<JointTest, WclsError> {
    let k = est.len();
    if n <= q + k {
        return Err(WclsError::DegreesOfFreedomExhausted { n, p: k, q });
    }
    let inv = linalg::spd_inverse(cov, 1e12)
        .map_err(|c| WclsError::InvalidContrast(format!("contrast variance is singular (condition {c:e})")))?;
    let statistic = (est.transpose() * inv * est)[(0, 0)];
    let (df1, df2) = (k, n - q - k);
    let scale = (n - q - 1) as f64 * k as f64 / df2 as f64;
    let f_dist = FisherSnedecor::new(df1 as f64, df2 as f64).expect("positive degrees of freedom");
    let f_statistic = statistic / scale;
    let critical_value = scale * f_dist.inverse_cdf(1.0 - alpha0);
    Ok(JointTest {
        statistic,
        f_statistic,
        df1,
        df2,
        critical_value,
        p_value: (1.0 - f_dist.cdf(f_statistic)).clamp(0.0, 1.0),
        reject: statistic > critical_value,
    })
}
