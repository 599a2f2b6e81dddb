#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wcls::features::{Design, DesignRow};
use wcls::gee::{fit_gee, Correlation, MeanModel};
use wcls::prob::{expit, ProbabilityModel, Side};
use wcls::wcls::{compute_weights, fit_wcls, SmallSample};

/// A random design with the requested shape. Working and effect features
/// start with an intercept; the rest are uniform on [-2, 2].
pub fn random_design<R: Rng>(rng: &mut R, n: usize, t: usize, p: usize, q: usize, availability: f64) -> Design {
    let mut rows = Vec::with_capacity(n * t);
    for i in 0..n {
        for occ in 1..=t {
            let available = rng.random::<f64>() < availability;
            let treatment = u8::from(available && rng.random::<bool>());
            let feature = |rng: &mut R, j: usize| if j == 0 { 1.0 } else { rng.random::<f64>() * 4.0 - 2.0 };
            let effect: Vec<f64> = (0..p).map(|j| feature(rng, j)).collect();
            let working: Vec<f64> = (0..q).map(|j| feature(rng, j)).collect();
            rows.push(DesignRow {
                individual: i,
                t: occ,
                available,
                treatment,
                numerator: effect.clone(),
                denominator: working.clone(),
                effect,
                working,
                response: rng.random::<f64>() * 6.0 - 3.0,
            });
        }
    }
    Design::from_rows(rows, n, t, 1).expect("rows are grouped by individual")
}

fn exact(x: f64) -> BigRational {
    BigRational::from_float(x).expect("finite input")
}

/// Solve `(Xᵀ Ω X) θ = Xᵀ Ω y` in exact rational arithmetic. `None` when the
/// system is singular.
pub fn rational_weighted_normal_equations(x: &[Vec<f64>], w: &[f64], y: &[f64]) -> Option<Vec<f64>> {
    let d = x.first()?.len();
    let xr: Vec<Vec<BigRational>> = x.iter().map(|r| r.iter().map(|&v| exact(v)).collect()).collect();
    let wr: Vec<BigRational> = w.iter().map(|&v| exact(v)).collect();
    let yr: Vec<BigRational> = y.iter().map(|&v| exact(v)).collect();
    let mut a = vec![vec![BigRational::zero(); d + 1]; d];
    for ((row, wi), yi) in xr.iter().zip(&wr).zip(&yr) {
        if wi.is_zero() {
            continue;
        }
        for j in 0..d {
            let wx = wi * &row[j];
            for k in 0..d {
                a[j][k] += &wx * &row[k];
            }
            a[j][d] += &wx * yi;
        }
    }
    gauss_jordan(a)
}

fn gauss_jordan(mut a: Vec<Vec<BigRational>>) -> Option<Vec<f64>> {
    let d = a.len();
    for col in 0..d {
        let pivot = (col..d).find(|&r| !a[r][col].is_zero())?;
        a.swap(col, pivot);
        let inv = BigRational::one() / &a[col][col];
        for v in a[col].iter_mut() {
            *v *= &inv;
        }
        for r in 0..d {
            if r != col && !a[r][col].is_zero() {
                let factor = a[r][col].clone();
                let pivot_row = a[col].clone();
                for (target, p) in a[r].iter_mut().zip(&pivot_row).skip(col) {
                    *target -= &factor * p;
                }
            }
        }
    }
    Some(a.iter().map(|row| rational_to_f64(&row[d])).collect())
}

fn rational_to_f64(r: &BigRational) -> f64 {
    r.to_f64().expect("representable")
}

/// Least squares by SVD on the rows with positive weight, each scaled by
/// the square root of its weight.
pub fn svd_least_squares(x: &[Vec<f64>], w: &[f64], y: &[f64]) -> DVector<f64> {
    let keep: Vec<usize> = (0..x.len()).filter(|&i| w[i] > 0.0).collect();
    let d = x[0].len();
    let xm = DMatrix::from_fn(keep.len(), d, |r, c| w[keep[r]].sqrt() * x[keep[r]][c]);
    let ym = DVector::from_iterator(keep.len(), keep.iter().map(|&i| w[i].sqrt() * y[i]));
    xm.svd(true, true).solve(&ym, 1e-14).expect("SVD solve")
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Pearson lag-1 autocorrelation of a series.
pub fn lag1_autocorrelation(x: &[f64]) -> f64 {
    let m = x.iter().sum::<f64>() / x.len() as f64;
    let num: f64 = x.windows(2).map(|w| (w[0] - m) * (w[1] - m)).sum();
    let den: f64 = x.iter().map(|v| (v - m).powi(2)).sum();
    num / den
}

pub struct Instance {
    pub design: Design,
    pub numerator: Vec<f64>,
    pub denominator: Vec<f64>,
}

/// Random shapes in the ranges n ∈ [2,6], T ∈ [2,8], p, q ∈ [1,3]. Shapes
/// with too few available rows to identify the model are redrawn.
pub fn instance(rng: &mut ChaCha8Rng) -> Instance {
    loop {
        let (n, t) = (rng.random_range(2..=6), rng.random_range(2..=8));
        let (p, q) = (rng.random_range(1..=3), rng.random_range(1..=3));
        let design = random_design(rng, n, t, p, q, 0.85);
        let available = design.rows.iter().filter(|r| r.available).count();
        if available < 2 * (p + q) {
            continue;
        }
        let numerator = (0..p).map(|_| rng.random::<f64>() - 0.5).collect();
        let denominator = (0..q).map(|_| rng.random::<f64>() - 0.5).collect();
        return Instance {
            design,
            numerator,
            denominator,
        };
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Weights and regressors computed from the model definitions directly.
pub fn oracle_system(inst: &Instance) -> (Vec<Vec<f64>>, Vec<f64>, Vec<f64>) {
    let mut x = Vec::new();
    let mut w = Vec::new();
    let mut y = Vec::new();
    for r in &inst.design.rows {
        let pt = expit(dot(&inst.numerator, &r.numerator));
        let pd = expit(dot(&inst.denominator, &r.denominator));
        let a = f64::from(r.treatment);
        let weight = if r.available {
            if r.treatment == 1 {
                pt / pd
            } else {
                (1.0 - pt) / (1.0 - pd)
            }
        } else {
            0.0
        };
        let mut row = r.working.clone();
        row.extend(r.effect.iter().map(|f| (a - pt) * f));
        x.push(row);
        w.push(weight);
        y.push(r.response);
    }
    (x, w, y)
}

pub fn well_conditioned(x: &[Vec<f64>], w: &[f64]) -> bool {
    let keep: Vec<usize> = (0..x.len()).filter(|&i| w[i] > 0.0).collect();
    let m = nalgebra::DMatrix::from_fn(keep.len(), x[0].len(), |r, c| w[keep[r]].sqrt() * x[keep[r]][c]);
    let s = m.singular_values();
    s.max() / s.min() < 1e4
}

/// Worst max-norm gap between `fit_wcls` and the exact oracle over `count`
/// well-conditioned instances.
pub fn wcls_oracle_gap(seed: u64, count: usize) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut checked, mut worst) = (0, 0.0f64);
    while checked < count {
        let inst = instance(&mut rng);
        let (x, w, y) = oracle_system(&inst);
        if !well_conditioned(&x, &w) {
            continue;
        }
        let expected = rational_weighted_normal_equations(&x, &w, &y).expect("nonsingular oracle system");
        let num = ProbabilityModel::known_logistic(Side::Numerator, inst.numerator.clone());
        let den = ProbabilityModel::known_logistic(Side::Denominator, inst.denominator.clone());
        let weighting = compute_weights(&inst.design, &num, &den).unwrap();
        assert!(max_abs_diff(&weighting.weights, &w) < 1e-12);
        let gap = match fit_wcls(&inst.design, &weighting) {
            Ok(fit) => max_abs_diff(fit.theta().as_slice(), &expected),
            Err(_) => f64::INFINITY,
        };
        worst = worst.max(gap);
        checked += 1;
    }
    worst
}

/// Rows of the uncentered design `(g, A f)` with availability weights.
fn uncentered(design: &Design, recode: Option<f64>) -> (Vec<Vec<f64>>, Vec<f64>, Vec<f64>) {
    let x = design
        .rows
        .iter()
        .map(|r| {
            let a = f64::from(r.treatment) - recode.unwrap_or(0.0);
            let mut row = r.working.clone();
            row.extend(r.effect.iter().map(|f| a * f));
            row
        })
        .collect();
    let w = design.rows.iter().map(|r| f64::from(u8::from(r.available))).collect();
    let y = design.rows.iter().map(|r| r.response).collect();
    (x, w, y)
}

/// Worst gap between independence GEE and SVD least squares.
pub fn gee_oracle_gap(seed: u64, count: usize) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut checked, mut worst) = (0, 0.0f64);
    while checked < count {
        let inst = instance(&mut rng);
        let (x, w, y) = uncentered(&inst.design, None);
        if !well_conditioned(&x, &w) {
            continue;
        }
        let expected = svd_least_squares(&x, &w, &y);
        let gap = match fit_gee(
            &inst.design,
            MeanModel::Uncentered,
            &Correlation::Independence,
            SmallSample::Never,
        ) {
            Ok(fit) => max_abs_diff(fit.coefficients.as_slice(), expected.as_slice()),
            Err(_) => f64::INFINITY,
        };
        worst = worst.max(gap);
        checked += 1;
    }
    worst
}

/// Worst gap between WCLS with `p = p̃ = ρ` and least squares on `A - ρ`.
pub fn recoded_gap(seed: u64, count: usize) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut checked, mut worst) = (0, 0.0f64);
    while checked < count {
        let inst = instance(&mut rng);
        let rho = rng.random_range(0.2..0.8);
        let (x, w, y) = uncentered(&inst.design, Some(rho));
        if !well_conditioned(&x, &w) {
            continue;
        }
        let expected = svd_least_squares(&x, &w, &y);
        let num = ProbabilityModel::known_constant(Side::Numerator, rho);
        let den = ProbabilityModel::known_constant(Side::Denominator, rho);
        let weighting = compute_weights(&inst.design, &num, &den).unwrap();
        let q = inst.design.q();
        let gap = match fit_wcls(&inst.design, &weighting) {
            Ok(fit) => max_abs_diff(fit.beta.as_slice(), &expected.as_slice()[q..]),
            Err(_) => f64::INFINITY,
        };
        worst = worst.max(gap);
        checked += 1;
    }
    worst
}
