//! TOML configuration for the `estimate` and `simulate` commands.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::CsvSchema;
use crate::pipeline::AnalysisSpec;
use crate::sim::{GenerativeConfig, Overrides, Preset, ScenarioGroup};
use crate::wcls::SmallSample;

fn default_alpha() -> f64 {
    0.05
}

fn default_replicates() -> usize {
    1000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimateConfig {
    /// CSV file; relative paths are resolved against the config file.
    pub input: PathBuf,
    #[serde(default = "default_alpha")]
    pub alpha0: f64,
    #[serde(default)]
    pub small_sample: SmallSample,
    #[serde(default)]
    pub columns: CsvSchema,
    #[serde(rename = "analysis")]
    pub analyses: Vec<AnalysisSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<Preset>,
    #[serde(default, skip_serializing_if = "is_default")]
    pub overrides: Overrides,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generative: Option<GenerativeConfig>,
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    /// Root seed; takes precedence over `generative.seed`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default = "default_alpha")]
    pub alpha0: f64,
    #[serde(default)]
    pub small_sample: SmallSample,
    /// Replaces the preset's analyses when given; required without a preset.
    #[serde(default, rename = "analysis", skip_serializing_if = "Vec::is_empty")]
    pub analyses: Vec<AnalysisSpec>,
}

fn is_default(o: &Overrides) -> bool {
    *o == Overrides::default()
}

fn check_alpha(alpha0: f64) -> Result<(), String> {
    if alpha0 > 0.0 && alpha0 < 1.0 {
        Ok(())
    } else {
        Err(format!("alpha0 must lie in (0, 1), got {alpha0}"))
    }
}

fn check_names(analyses: &[AnalysisSpec]) -> Result<(), String> {
    let mut seen = std::collections::BTreeSet::new();
    for a in analyses {
        if !seen.insert(a.name.as_str()) {
            return Err(format!("analysis name `{}` is used twice", a.name));
        }
    }
    Ok(())
}

impl EstimateConfig {
    pub fn from_toml(src: &str) -> Result<Self, String> {
        let cfg: Self = toml::from_str(src).map_err(|e| e.to_string())?;
        check_alpha(cfg.alpha0)?;
        if cfg.analyses.is_empty() {
            return Err("at least one [[analysis]] is required".into());
        }
        check_names(&cfg.analyses)?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    /// `input` resolved against the directory holding the config file.
    pub fn input_path(&self, config_path: &Path) -> PathBuf {
        if self.input.is_absolute() {
            self.input.clone()
        } else {
            config_path.parent().unwrap_or(Path::new(".")).join(&self.input)
        }
    }
}

impl SimulateConfig {
    pub fn from_toml(src: &str) -> Result<Self, String> {
        let cfg: Self = toml::from_str(src).map_err(|e| e.to_string())?;
        check_alpha(cfg.alpha0)?;
        match (&cfg.preset, &cfg.generative) {
            (Some(_), Some(_)) => return Err("give either `preset` or `[generative]`, not both".into()),
            (None, None) => return Err("one of `preset` or `[generative]` is required".into()),
            (None, Some(g)) => {
                g.validate()?;
                if cfg.analyses.is_empty() {
                    return Err("an explicit generative model needs at least one [[analysis]]".into());
                }
                if cfg.overrides != Overrides::default() {
                    return Err("`[overrides]` only applies to presets".into());
                }
            }
            (Some(_), None) => {}
        }
        check_names(&cfg.analyses)?;
        if cfg.replicates < 1 {
            return Err("replicates must be at least 1".into());
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    pub fn root_seed(&self) -> u64 {
        self.seed.or(self.generative.as_ref().map(|g| g.seed)).unwrap_or(0)
    }

    /// Scenario groups to run, all drawing from `seed`.
    pub fn groups(&self, seed: u64) -> Result<Vec<ScenarioGroup>, String> {
        let mut groups = match (&self.preset, &self.generative) {
            (Some(p), _) => p.groups(&self.overrides, seed),
            (None, Some(g)) => vec![ScenarioGroup {
                label: "custom".into(),
                config: GenerativeConfig { seed, ..g.clone() },
                analyses: self.analyses.clone(),
            }],
            (None, None) => return Err("one of `preset` or `[generative]` is required".into()),
        };
        if !self.analyses.is_empty() {
            for g in &mut groups {
                g.analyses = self.analyses.clone();
            }
        }
        for g in &groups {
            g.config.validate()?;
        }
        Ok(groups)
    }
}
