//! The shared pipeline configuration file (TOML).

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::construct::GenerationPlan;
use crate::dimcat::{check_priority, DEFAULT_PRIORITY, DEFAULT_TIE_TOLERANCE};
use crate::dimension::Dimension;
use crate::error::{Error, Result};
use crate::evalharness::AdapterConfig;
use crate::judgekit::{prompts, BackendConfig};
use crate::pairforge::{BackgenConfig, ContinuationConfig, RewriteConfig};
use crate::rankagree::DEFAULT_AGREEMENT_THRESHOLD;

pub const DEFAULT_SEED: u64 = 42;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Thresholds {
    pub agreement: f64,
    pub tie_tolerance: f64,
    pub min_words: usize,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            agreement: DEFAULT_AGREEMENT_THRESHOLD,
            tie_tolerance: DEFAULT_TIE_TOLERANCE,
            min_words: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenerationConfig {
    pub template: String,
    pub human_premise_template: String,
    pub target_words: usize,
    pub candidates_per_premise: usize,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        GenerationConfig {
            template: prompts::DEFAULT_STORY_TEMPLATE.into(),
            human_premise_template: "story.humanlike".into(),
            target_words: 300,
            candidates_per_premise: 4,
        }
    }
}

impl GenerationConfig {
    pub fn plan(&self) -> GenerationPlan {
        GenerationPlan {
            template: self.template.clone(),
            human_premise_template: self.human_premise_template.clone(),
            target_words: self.target_words,
            candidates_per_premise: self.candidates_per_premise,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PairforgeConfig {
    /// Backend that writes premises, rewrites and continuations; defaults
    /// to the first generator.
    pub backend: Option<String>,
    /// The two generators of LLM-vs-LLM pairs; default to the first two.
    pub generator_a: Option<String>,
    pub generator_b: Option<String>,
    /// Judge of LLM-vs-LLM pairs; defaults to the first judge.
    pub judge: Option<String>,
    pub backgen: BackgenConfig,
    pub rewrite: RewriteConfig,
    pub continuation: ContinuationConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnnotationConfig {
    pub qc_every: usize,
}

impl Default for AnnotationConfig {
    fn default() -> Self {
        AnnotationConfig { qc_every: 50 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    pub thresholds: Thresholds,
    pub generation: GenerationConfig,
    pub generators: Vec<BackendConfig>,
    pub judges: Vec<BackendConfig>,
    pub pairforge: PairforgeConfig,
    pub annotation: AnnotationConfig,
    pub adapters: Vec<AdapterConfig>,
    pub priority: [Dimension; 5],
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cache_dir: Option<PathBuf>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            seed: DEFAULT_SEED,
            thresholds: Thresholds::default(),
            generation: GenerationConfig::default(),
            generators: ["gen-a", "gen-b", "gen-c", "gen-d"].map(BackendConfig::mock).to_vec(),
            judges: ["judge-a", "judge-b", "judge-c"].map(BackendConfig::mock).to_vec(),
            pairforge: PairforgeConfig::default(),
            annotation: AnnotationConfig::default(),
            adapters: Vec::new(),
            priority: DEFAULT_PRIORITY,
            cache_dir: None,
        }
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: PipelineConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads `path`, or returns the defaults when no path is given.
    pub fn load(path: Option<&Path>) -> Result<Self> {
        match path {
            None => Ok(PipelineConfig::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
                Self::from_toml(&text).map_err(|e| match e {
                    Error::Config(m) => Error::Config(format!("{}: {m}", p.display())),
                    other => other,
                })
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        let t = &self.thresholds;
        if !(-1.0..=1.0).contains(&t.agreement) {
            return Err(Error::Config(format!("agreement threshold {} outside [-1, 1]", t.agreement)));
        }
        if t.tie_tolerance.is_nan() || t.tie_tolerance < 0.0 {
            return Err(Error::Config(format!("tie tolerance {} must be >= 0", t.tie_tolerance)));
        }
        check_priority(&self.priority).map_err(|e| Error::Config(e.to_string()))?;
        let mut names = HashSet::new();
        for b in self.generators.iter().chain(&self.judges) {
            if !names.insert(b.name.as_str()) {
                return Err(Error::Config(format!("backend name `{}` is used twice", b.name)));
            }
        }
        for id in [&self.generation.template, &self.generation.human_premise_template] {
            prompts::template(id).map_err(|e| Error::Config(e.to_string()))?;
        }
        if self.annotation.qc_every == 0 {
            return Err(Error::Config("annotation.qc_every must be positive".into()));
        }
        Ok(())
    }

    pub fn backend(&self, name: &str) -> Result<&BackendConfig> {
        self.generators
            .iter()
            .chain(&self.judges)
            .find(|b| b.name == name)
            .ok_or_else(|| Error::Config(format!("no backend named `{name}`")))
    }

    pub fn adapter(&self, name: &str) -> Result<&AdapterConfig> {
        self.adapters
            .iter()
            .find(|a| a.name() == name)
            .ok_or_else(|| Error::Config(format!("no adapter named `{name}`")))
    }
}
