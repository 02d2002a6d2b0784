use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::clustering::KMeansConfig;
use crate::embedding::TrainConfig;
use crate::error::{Error, Result};
use crate::ingest::CorpusFormat;
use crate::temporal::{Orientation, RegressionMode};
use crate::wlor::{PriorConfig, PriorMode};

/// Every tunable of a run. The config file is flat TOML using these field
/// names; command-line flags override file values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub corpus: Option<PathBuf>,
    pub format: String,
    pub lexicon: Option<PathBuf>,
    pub exclusions: Option<PathBuf>,
    /// Annotated theming sheet (`word,z,category`).
    pub categories: Option<PathBuf>,
    pub labor_csv: Option<PathBuf>,
    pub out: PathBuf,

    pub k_each: usize,
    pub kmeans_k: usize,
    pub kmeans_max_iters: usize,
    pub normalize: bool,
    /// Cluster only the gendered words instead of the whole vocabulary.
    pub cluster_gendered_only: bool,
    pub min_cluster_members: usize,
    pub top_n_significance: usize,

    pub slice_years: u32,
    pub start_year: Option<i32>,
    pub end_year: Option<i32>,
    pub sparse_floor: u64,
    pub mode: RegressionMode,
    pub orientation: Orientation,
    /// `manual` re-scores fixed categories per slice, `kmeans` re-clusters.
    pub timeline_method: String,
    pub fixtures: Option<String>,

    pub prior_mode: PriorMode,
    pub alpha0: f64,
    pub epsilon: f64,

    pub dim: usize,
    pub window: usize,
    pub negatives: usize,
    pub epochs: usize,
    pub min_count: u64,
    pub subsample_threshold: f64,
    pub learning_rate: f64,
    pub threads: Option<usize>,

    pub seed: u64,
    pub deterministic: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        let train = TrainConfig::default();
        let prior = PriorConfig::default();
        RunConfig {
            corpus: None,
            format: "jsonl".into(),
            lexicon: None,
            exclusions: None,
            categories: None,
            labor_csv: None,
            out: PathBuf::from("out"),
            k_each: 250,
            kmeans_k: 300,
            kmeans_max_iters: 100,
            normalize: false,
            cluster_gendered_only: false,
            min_cluster_members: 5,
            top_n_significance: 20_000,
            slice_years: 5,
            start_year: None,
            end_year: None,
            sparse_floor: 1000,
            mode: RegressionMode::Levels,
            orientation: Orientation::BiasOnLabor,
            timeline_method: "manual".into(),
            fixtures: None,
            prior_mode: prior.mode,
            alpha0: prior.alpha0,
            epsilon: prior.epsilon,
            dim: train.dim,
            window: train.window,
            negatives: train.negatives,
            epochs: train.epochs,
            min_count: train.min_count,
            subsample_threshold: train.subsample_threshold,
            learning_rate: train.learning_rate,
            threads: None,
            seed: 1,
            deterministic: false,
        }
    }
}

fn rebase(base: &Path, p: &mut Option<PathBuf>) {
    if let Some(path) = p {
        if path.is_relative() {
            *path = base.join(&*path);
        }
    }
}

impl RunConfig {
    /// Parses a config file. Relative input paths inside it are taken
    /// relative to the file's directory; `out` stays relative to the working
    /// directory.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg: RunConfig = toml::from_str(&text)
            .map_err(|e| Error::InvalidArgument(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [
            &mut cfg.corpus,
            &mut cfg.lexicon,
            &mut cfg.exclusions,
            &mut cfg.categories,
            &mut cfg.labor_csv,
        ] {
            rebase(base, p);
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, p) in [
            ("corpus", &self.corpus),
            ("lexicon", &self.lexicon),
            ("exclusions", &self.exclusions),
            ("categories", &self.categories),
            ("labor_csv", &self.labor_csv),
        ] {
            if let Some(p) = p {
                if !p.exists() {
                    return Err(Error::InvalidArgument(format!("{name} path {} does not exist", p.display())));
                }
            }
        }
        let positive = [
            ("k_each", self.k_each),
            ("kmeans_k", self.kmeans_k),
            ("kmeans_max_iters", self.kmeans_max_iters),
            ("min_cluster_members", self.min_cluster_members),
            ("top_n_significance", self.top_n_significance),
            ("slice_years", self.slice_years as usize),
            ("dim", self.dim),
            ("window", self.window),
            ("negatives", self.negatives),
            ("epochs", self.epochs),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::InvalidArgument(format!("{name} must be positive")));
            }
        }
        for (name, v) in [
            ("alpha0", self.alpha0),
            ("epsilon", self.epsilon),
            ("learning_rate", self.learning_rate),
            ("subsample_threshold", self.subsample_threshold),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidArgument(format!("{name} must be a positive number")));
            }
        }
        if let (Some(s), Some(e)) = (self.start_year, self.end_year) {
            if s > e {
                return Err(Error::InvalidArgument(format!("start_year {s} is after end_year {e}")));
            }
        }
        self.corpus_format()?;
        if !matches!(self.timeline_method.as_str(), "manual" | "kmeans") {
            return Err(Error::InvalidArgument(format!(
                "timeline_method must be manual or kmeans, got {:?}",
                self.timeline_method
            )));
        }
        if let Some(f) = &self.fixtures {
            if f != "caliskan-garg" {
                return Err(Error::InvalidArgument(format!("unknown fixture set {f:?}")));
            }
        }
        Ok(())
    }

    pub fn corpus_format(&self) -> Result<CorpusFormat> {
        self.format.parse()
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            dim: self.dim,
            window: self.window,
            negatives: self.negatives,
            epochs: self.epochs,
            min_count: self.min_count,
            subsample_threshold: self.subsample_threshold,
            learning_rate: self.learning_rate,
            seed: self.seed,
            deterministic: self.deterministic,
            threads: self.threads,
        }
    }

    pub fn prior_config(&self) -> PriorConfig {
        PriorConfig {
            mode: self.prior_mode,
            alpha0: self.alpha0,
            epsilon: self.epsilon,
        }
    }

    pub fn kmeans_config(&self) -> KMeansConfig {
        KMeansConfig {
            k: self.kmeans_k,
            seed: self.seed,
            max_iters: self.kmeans_max_iters,
            normalize: self.normalize,
        }
    }

    /// SHA-256 of the effective configuration.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let c = RunConfig::default();
        assert_eq!(c.k_each, 250);
        assert_eq!(c.kmeans_k, 300);
        assert_eq!(c.min_cluster_members, 5);
        assert_eq!(c.top_n_significance, 20_000);
        assert_eq!(c.slice_years, 5);
        c.validate().unwrap();
    }

    #[test]
    fn flat_toml() {
        let c: RunConfig = toml::from_str("k_each = 10\nmode = \"diff\"\nseed = 7\n").unwrap();
        assert_eq!(c.k_each, 10);
        assert_eq!(c.mode, RegressionMode::Diff);
        assert_eq!(c.seed, 7);
        assert_eq!(c.kmeans_k, 300);
        assert!(toml::from_str::<RunConfig>("bogus = 1\n").is_err());
    }

    #[test]
    fn validation() {
        let mut c = RunConfig { k_each: 0, ..RunConfig::default() };
        assert!(c.validate().is_err());
        c.k_each = 5;
        c.corpus = Some(PathBuf::from("/definitely/not/here.jsonl"));
        assert!(c.validate().is_err());
        c.corpus = None;
        c.format = "xml".into();
        assert!(c.validate().is_err());
    }

    #[test]
    fn hash_tracks_content() {
        let a = RunConfig::default();
        let b = RunConfig { seed: 2, ..RunConfig::default() };
        assert_eq!(a.hash(), RunConfig::default().hash());
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
    }
}
