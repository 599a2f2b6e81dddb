use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::{IndividualSeries, Occasion, PanelDataset};
use crate::prob::expit;

/// Covariate columns written by [`generate_trial`].
pub const MODERATOR_COLUMN: &str = "s";
pub const PROBABILITY_COLUMN: &str = "prob";

/// Parameters of the simulated trial.
///
/// `Y_{t+1} = θ1 (S_t - E[S_t | A_{t-1}]) + θ2 (A_{t-1} - p_{t-1}) + (A_t - p_t)(β10 + β11 S_t) + ε_{t+1}`
/// with `P(S_t = 1) = expit(ξ A_{t-1})`, `p_t = expit(η1 A_{t-1} + η2 S_t)` and
/// unit-variance Gaussian errors with `cor(ε_u, ε_t) = error_decay^(|u-t|/2)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerativeConfig {
    pub theta1: f64,
    pub theta2: f64,
    pub beta10: f64,
    pub beta11: f64,
    pub eta1: f64,
    pub eta2: f64,
    pub xi: f64,
    pub n: usize,
    #[serde(rename = "T")]
    pub occasions: usize,
    #[serde(default = "default_decay")]
    pub error_decay: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_decay() -> f64 {
    0.5
}

impl GenerativeConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.n < 1 || self.occasions < 1 {
            return Err(format!(
                "n and T must be at least 1, got n={} T={}",
                self.n, self.occasions
            ));
        }
        if !(0.0..1.0).contains(&self.error_decay) {
            return Err(format!("error_decay {} is outside [0, 1)", self.error_decay));
        }
        let finite = [
            self.theta1,
            self.theta2,
            self.beta10,
            self.beta11,
            self.eta1,
            self.eta2,
            self.xi,
        ];
        if finite.iter().any(|v| !v.is_finite()) {
            return Err("coefficients must be finite".into());
        }
        Ok(())
    }
}

/// One trial drawn with an RNG seeded from `config.seed`.
pub fn generate_trial(config: &GenerativeConfig) -> PanelDataset {
    generate_with(config, &mut ChaCha8Rng::seed_from_u64(config.seed))
}

/// One trial drawn from the supplied RNG. Individuals are generated in
/// order, each consuming its draws sequentially.
pub fn generate_with<R: Rng>(config: &GenerativeConfig, rng: &mut R) -> PanelDataset {
    let phi = config.error_decay.sqrt();
    let innovation = (1.0 - phi * phi).sqrt();
    let individuals = (0..config.n)
        .map(|i| {
            let mut occasions = Vec::with_capacity(config.occasions);
            let (mut a_prev, mut p_prev) = (0.0, 0.0);
            let mut eps: f64 = rng.sample(StandardNormal);
            for _ in 0..config.occasions {
                let ps = expit(config.xi * a_prev);
                let s = if rng.random::<f64>() < ps { 1.0 } else { -1.0 };
                let p = expit(config.eta1 * a_prev + config.eta2 * s);
                let a = if rng.random::<f64>() < p { 1.0 } else { 0.0 };
                let z: f64 = rng.sample(StandardNormal);
                eps = phi * eps + innovation * z;
                let y = config.theta1 * (s - (2.0 * ps - 1.0))
                    + config.theta2 * (a_prev - p_prev)
                    + (a - p) * (config.beta10 + config.beta11 * s)
                    + eps;
                occasions.push(Occasion {
                    available: true,
                    treatment: a as u8,
                    covariates: vec![s, p],
                    response: y,
                });
                a_prev = a;
                p_prev = p;
            }
            IndividualSeries {
                id: format!("{}", i + 1),
                occasions,
            }
        })
        .collect();
    PanelDataset::new(vec![MODERATOR_COLUMN.into(), PROBABILITY_COLUMN.into()], individuals)
        .expect("generated panels satisfy the dataset invariants")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginalEffect {
    /// `β10 + β11 E[S_t]` for `t = 1..=T`.
    pub per_occasion: Vec<f64>,
    pub average: f64,
}

/// Marginal proximal effect, propagating `P(A_t = 1)` forward in closed form.
pub fn true_marginal_effect(config: &GenerativeConfig) -> MarginalEffect {
    let mut treated_prev = 0.0;
    let mut per_occasion = Vec::with_capacity(config.occasions);
    for _ in 0..config.occasions {
        let mut mean_s = 0.0;
        let mut treated = 0.0;
        for (a, pa) in [(0.0, 1.0 - treated_prev), (1.0, treated_prev)] {
            let ps = expit(config.xi * a);
            mean_s += pa * (2.0 * ps - 1.0);
            for (s, prob_s) in [(1.0, ps), (-1.0, 1.0 - ps)] {
                treated += pa * prob_s * expit(config.eta1 * a + config.eta2 * s);
            }
        }
        per_occasion.push(config.beta10 + config.beta11 * mean_s);
        treated_prev = treated;
    }
    let average = per_occasion.iter().sum::<f64>() / per_occasion.len().max(1) as f64;
    MarginalEffect { per_occasion, average }
}
