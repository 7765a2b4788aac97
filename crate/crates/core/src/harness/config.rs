use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{derive_seed, read_text};
use crate::error::{Error, Result};
use crate::generators::CorpusTemplate;
use crate::inference::DEFAULT_STATE_CAP;
use crate::metamodel::CostModel;

/// One run of the pipeline, usually read from TOML. Every field has a default.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Master seed; corpus seeds are derived from it.
    pub seed: u64,
    pub out: PathBuf,
    /// Problems processed at once.
    pub parallelism: usize,
    pub training: CorpusConfig,
    pub test: CorpusConfig,
    pub refine: RefineConfig,
    pub fit: FitConfig,
    pub control: ControlConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusConfig {
    pub name: String,
    pub count: usize,
    pub template: CorpusTemplate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RefineConfig {
    /// Refinements per training problem.
    pub budget: usize,
    /// Refinements per test problem.
    pub test_budget: usize,
    /// Information-state cap for the exact solver.
    pub solve_cap: u64,
    pub record_wall_time: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitConfig {
    pub degrees: Vec<usize>,
    /// Profile row used as the training point.
    pub step: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControlConfig {
    pub cost: CostModel,
    pub budget: usize,
    pub clamp: bool,
    pub svg: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Split {
    Training,
    Test,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 1,
            out: PathBuf::from("runs/default"),
            parallelism: 1,
            training: CorpusConfig {
                name: "train".into(),
                count: 100,
                template: CorpusTemplate::OneId { n: 8, b: 0.7794 },
            },
            test: CorpusConfig {
                name: "mazes".into(),
                count: 16,
                template: CorpusTemplate::MazeSuite { stages: 5 },
            },
            refine: RefineConfig::default(),
            fit: FitConfig::default(),
            control: ControlConfig::default(),
        }
    }
}

impl Default for RefineConfig {
    fn default() -> Self {
        RefineConfig { budget: 255, test_budget: 30, solve_cap: DEFAULT_STATE_CAP, record_wall_time: false }
    }
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig { degrees: vec![1, 2], step: 10 }
    }
}

impl Default for ControlConfig {
    fn default() -> Self {
        ControlConfig { cost: CostModel::Exponential { a: 0.001, r: 1.5 }, budget: 30, clamp: false, svg: true }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> std::result::Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let cfg = Self::from_toml(&read_text(path)?).map_err(|e| Error::parse(path, e.message()))?;
        cfg.validate().map_err(|e| Error::parse(path, e))?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.parallelism == 0 {
            return Err(Error::Invalid("parallelism must be at least 1".into()));
        }
        if self.fit.step >= self.refine.budget {
            return Err(Error::Invalid(format!(
                "extraction step {} must be below the refinement budget {}",
                self.fit.step, self.refine.budget
            )));
        }
        if self.fit.degrees.is_empty() || self.fit.degrees.iter().any(|d| !(1..=3).contains(d)) {
            return Err(Error::Invalid("fit degrees must be a nonempty list of 1, 2 or 3".into()));
        }
        if self.training.name == self.test.name {
            return Err(Error::Invalid("training and test corpora need distinct names".into()));
        }
        Ok(())
    }

    pub fn corpus(&self, split: Split) -> &CorpusConfig {
        match split {
            Split::Training => &self.training,
            Split::Test => &self.test,
        }
    }

    pub fn base_seed(&self, split: Split) -> u64 {
        derive_seed(self.seed, split.label())
    }

    pub fn budget(&self, split: Split) -> usize {
        match split {
            Split::Training => self.refine.budget,
            Split::Test => self.refine.test_budget,
        }
    }

    pub fn corpus_dir(&self, split: Split) -> PathBuf {
        self.out.join("corpus").join(&self.corpus(split).name)
    }

    pub fn profile_dir(&self, split: Split) -> PathBuf {
        self.out.join("profiles").join(&self.corpus(split).name)
    }

    pub fn prediction_dir(&self, split: Split) -> PathBuf {
        self.out.join("predictions").join(&self.corpus(split).name)
    }

    pub fn model_path(&self, degree: usize) -> PathBuf {
        self.out.join("models").join(format!("model-d{degree}.json"))
    }

    pub fn model_paths(&self) -> Vec<PathBuf> {
        self.fit.degrees.iter().map(|&d| self.model_path(d)).collect()
    }

    pub fn control_dir(&self) -> PathBuf {
        self.out.join("control")
    }

    pub fn solution_dir(&self) -> PathBuf {
        self.out.join("solutions")
    }
}

impl Split {
    pub fn label(&self) -> &'static str {
        match self {
            Split::Training => "training",
            Split::Test => "test",
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_round_trips_through_toml() {
        let cfg = ExperimentConfig::default();
        assert_eq!(ExperimentConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
        cfg.validate().unwrap();
    }

    #[test]
    fn partial_file_fills_defaults() {
        let cfg = ExperimentConfig::from_toml(
            "seed = 9\n[training]\nname = \"t\"\ncount = 3\ntemplate = { family = \"one_id\", n = 4, b = 0.5 }\n[control]\ncost = \"linear:0.01\"\n",
        )
        .unwrap();
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.training.count, 3);
        assert_eq!(cfg.test, ExperimentConfig::default().test);
        assert_eq!(cfg.control.cost, CostModel::Linear { rate: 0.01 });
    }

    #[test]
    fn invariants_are_checked() {
        let mut cfg = ExperimentConfig { parallelism: 0, ..Default::default() };
        assert!(cfg.validate().is_err());
        cfg.parallelism = 2;
        cfg.fit.step = cfg.refine.budget;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = ExperimentConfig::from_toml("sede = 1\n").unwrap_err();
        assert!(err.message().contains("sede"), "{}", err.message());
    }
}
