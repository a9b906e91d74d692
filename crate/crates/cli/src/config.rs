//! Run configuration: a TOML file, overridden by command-line flags.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use surat_core::classical::{LogRegConfig, SvmConfig};
use surat_core::embedding::Word2VecConfig;
use surat_core::neural::LstmTrainConfig;
use surat_core::pipeline::PipelineConfig;
use surat_core::preprocess::{Preprocessor, StopwordList};

use crate::CliError;

pub const DEFAULT_OUT: &str = "surat-out";

/// Everything a run depends on. Per-section `seed` keys are overwritten by
/// the run-level seed so one number reproduces the whole run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub dataset: Option<PathBuf>,
    /// Stopword file; the bundled list when absent.
    pub stopwords: Option<PathBuf>,
    pub out: PathBuf,
    pub seed: u64,
    pub train_fraction: f64,
    pub classical_min_freq: u64,
    pub word2vec: Word2VecConfig,
    pub logreg: LogRegConfig,
    pub svm: SvmConfig,
    pub lstm: LstmTrainConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        let p = PipelineConfig::default();
        RunConfig {
            dataset: None,
            stopwords: None,
            out: PathBuf::from(DEFAULT_OUT),
            seed: p.seed,
            train_fraction: p.train_fraction,
            classical_min_freq: p.classical_min_freq,
            word2vec: p.word2vec,
            logreg: p.logreg,
            svm: p.svm,
            lstm: p.lstm,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))
    }

    pub fn parse(text: &str) -> Result<RunConfig, toml::de::Error> {
        toml::from_str(text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config always serializes")
    }

    /// Apply flag overrides and propagate the seed.
    pub fn resolve(mut self, seed: Option<u64>, out: Option<PathBuf>) -> Result<RunConfig, CliError> {
        if let Some(s) = seed {
            self.seed = s;
        }
        if let Some(o) = out {
            self.out = o;
        }
        self.word2vec.seed = self.seed;
        self.svm.seed = self.seed;
        self.lstm.seed = self.seed;
        self.pipeline().split_spec()?;
        self.word2vec.validate()?;
        Ok(self)
    }

    pub fn pipeline(&self) -> PipelineConfig {
        PipelineConfig {
            seed: self.seed,
            train_fraction: self.train_fraction,
            classical_min_freq: self.classical_min_freq,
            word2vec: self.word2vec,
            logreg: self.logreg,
            svm: self.svm,
            lstm: self.lstm,
        }
        .with_seed(self.seed)
    }

    pub fn preprocessor(&self) -> Result<Preprocessor, CliError> {
        let list = match &self.stopwords {
            Some(p) => StopwordList::from_file(p)?,
            None => StopwordList::bundled(),
        };
        Ok(Preprocessor::new(list))
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("config always serializes")
    }
}
