//! Word Embedding Association Test scoring, significance calibration against
//! the embedding-wide slant distribution, and base-pair stability audits.
//!
//! A word's slant is its mean cosine to the male terms minus its mean cosine
//! to the female terms; positive values lean male. A category's bias is the
//! mean slant of its in-vocabulary words.

use std::collections::HashSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::clustering::{BiasCategory, Provenance};
use crate::embedding::{cosine_vectors, Embedding};
use crate::error::{Error, Result};
use crate::wlor::GenderedWordSets;

/// Ordered `(male, female)` base pairs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenderPairSet {
    pairs: Vec<(String, String)>,
}

impl GenderPairSet {
    pub fn new(pairs: Vec<(String, String)>) -> Result<Self> {
        if pairs.is_empty() {
            return Err(Error::InvalidArgument("gender pair set is empty".into()));
        }
        let male: HashSet<&str> = pairs.iter().map(|p| p.0.as_str()).collect();
        if let Some(t) = pairs.iter().map(|p| p.1.as_str()).find(|f| male.contains(f)) {
            return Err(Error::InvalidArgument(format!(
                "term {t:?} appears on both sides of the pair set"
            )));
        }
        Ok(GenderPairSet { pairs })
    }

    pub fn from_strs(pairs: &[(&str, &str)]) -> Result<Self> {
        Self::new(pairs.iter().map(|(m, f)| (m.to_string(), f.to_string())).collect())
    }

    pub fn pairs(&self) -> &[(String, String)] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    fn distinct<'a>(terms: impl Iterator<Item = &'a String>) -> Vec<&'a str> {
        let mut out: Vec<&str> = Vec::new();
        for t in terms {
            if !out.contains(&t.as_str()) {
                out.push(t);
            }
        }
        out
    }

    /// Distinct male terms in pair order.
    pub fn male_terms(&self) -> Vec<&str> {
        Self::distinct(self.pairs.iter().map(|p| &p.0))
    }

    pub fn female_terms(&self) -> Vec<&str> {
        Self::distinct(self.pairs.iter().map(|p| &p.1))
    }

    /// Every pair with its sides exchanged.
    pub fn swapped(&self) -> Self {
        GenderPairSet {
            pairs: self.pairs.iter().map(|(m, f)| (f.clone(), m.clone())).collect(),
        }
    }

    /// Pairs whose two terms are both in the embedding.
    pub fn restrict_to(&self, emb: &Embedding) -> Result<Self> {
        let kept: Vec<_> = self
            .pairs
            .iter()
            .filter(|(m, f)| emb.contains(m) && emb.contains(f))
            .cloned()
            .collect();
        if kept.is_empty() {
            return Err(Error::Scoring(
                "no gender pair has both terms in the embedding vocabulary".into(),
            ));
        }
        Ok(GenderPairSet { pairs: kept })
    }
}

fn mean_cosine(v: &[f64], emb: &Embedding, terms: &[&str]) -> Result<f64> {
    let mut sum = 0.0;
    for t in terms {
        sum += cosine_vectors(v, emb.lookup(t)?)?;
    }
    Ok(sum / terms.len() as f64)
}

fn slant_of_vector(v: &[f64], emb: &Embedding, male: &[&str], female: &[&str]) -> Result<f64> {
    Ok(mean_cosine(v, emb, male)? - mean_cosine(v, emb, female)?)
}

pub fn word_slant(emb: &Embedding, word: &str, gp: &GenderPairSet) -> Result<f64> {
    let v = emb.lookup(word)?;
    slant_of_vector(v, emb, &gp.male_terms(), &gp.female_terms())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Male,
    Female,
    None,
}

impl Direction {
    pub fn of(value: f64) -> Self {
        if value > 0.0 {
            Direction::Male
        } else if value < 0.0 {
            Direction::Female
        } else {
            Direction::None
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WordSlant {
    pub word: String,
    pub slant: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeatResult {
    pub category: BiasCategory,
    pub bias: f64,
    pub direction: Direction,
    pub per_word: Vec<WordSlant>,
    /// Category words missing from the embedding.
    pub skipped: Vec<String>,
    pub gender_pairs_used: GenderPairSet,
}

pub fn bias_score(emb: &Embedding, cat: &BiasCategory, gp: &GenderPairSet) -> Result<WeatResult> {
    let male = gp.male_terms();
    let female = gp.female_terms();
    let mut per_word = Vec::new();
    let mut skipped = Vec::new();
    for w in &cat.words {
        match emb.vector(w) {
            Some(v) => per_word.push(WordSlant {
                word: w.clone(),
                slant: slant_of_vector(v, emb, &male, &female)?,
            }),
            None => skipped.push(w.clone()),
        }
    }
    if per_word.is_empty() {
        return Err(Error::Scoring(format!(
            "no word of category {:?} is in the embedding vocabulary",
            cat.name
        )));
    }
    let bias = per_word.iter().map(|p| p.slant).sum::<f64>() / per_word.len() as f64;
    Ok(WeatResult {
        category: cat.clone(),
        bias,
        direction: Direction::of(bias),
        per_word,
        skipped,
        gender_pairs_used: gp.clone(),
    })
}

/// Mean and sample standard deviation of signed slants over the most
/// frequent words.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignificanceModel {
    pub mean: f64,
    pub std: f64,
    #[serde(rename = "n")]
    pub n_words: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Significance {
    Significant,
    NotSignificant,
}

impl SignificanceModel {
    pub fn new(mean: f64, std: f64, n_words: usize) -> Result<Self> {
        if !(std > 0.0) || n_words < 2 {
            return Err(Error::InvalidArgument(
                "significance model needs std > 0 and at least two words".into(),
            ));
        }
        Ok(SignificanceModel { mean, std, n_words })
    }

    /// Significant iff `|bias - mean| >= std`.
    pub fn classify_bias(&self, bias: f64) -> Significance {
        if (bias - self.mean).abs() >= self.std {
            Significance::Significant
        } else {
            Significance::NotSignificant
        }
    }
}

pub fn classify(result: &WeatResult, model: &SignificanceModel) -> Significance {
    model.classify_bias(result.bias)
}

pub fn significance_model(emb: &Embedding, gp: &GenderPairSet, top_n: usize) -> Result<SignificanceModel> {
    let words = emb.most_frequent(top_n)?;
    let male = gp.male_terms();
    let female = gp.female_terms();
    for t in male.iter().chain(&female) {
        emb.lookup(t)?;
    }
    // per-word values in parallel, reduction in word order
    let slants = words
        .par_iter()
        .map(|w| slant_of_vector(emb.lookup(w)?, emb, &male, &female))
        .collect::<Result<Vec<f64>>>()?;
    let n = slants.len();
    if n < 2 {
        return Err(Error::Scoring(format!(
            "significance model needs at least two words, embedding has {n}"
        )));
    }
    let mean = slants.iter().sum::<f64>() / n as f64;
    let var = slants.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / (n - 1) as f64;
    let std = var.sqrt();
    if !(std > 0.0) {
        return Err(Error::Scoring("slant distribution has zero spread".into()));
    }
    Ok(SignificanceModel { mean, std, n_words: n })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StabilityIssue {
    /// Slant sign differs between pairs.
    Direction,
    /// Slant spread across pairs reaches one standard deviation.
    Magnitude,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Offender {
    pub word: String,
    pub issues: Vec<StabilityIssue>,
    pub slants: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityRow {
    pub word: String,
    /// One slant per pair, in pair order.
    pub slants: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub pairs: Vec<(String, String)>,
    pub table: Vec<StabilityRow>,
    #[serde(rename = "rate")]
    pub direction_consistency_rate: f64,
    #[serde(rename = "stable")]
    pub magnitude_stable: bool,
    #[serde(rename = "offenders")]
    pub offending_entries: Vec<Offender>,
}

fn sign_class(x: f64) -> i8 {
    if x > 0.0 {
        1
    } else if x < 0.0 {
        -1
    } else {
        0
    }
}

/// Scores every category word against each pair on its own.
pub fn base_pair_stability(
    emb: &Embedding,
    cat: &BiasCategory,
    gp: &GenderPairSet,
    model: &SignificanceModel,
) -> Result<StabilityReport> {
    let mut table = Vec::new();
    for w in &cat.words {
        let Some(v) = emb.vector(w) else { continue };
        let slants = gp
            .pairs()
            .iter()
            .map(|(m, f)| slant_of_vector(v, emb, &[m.as_str()], &[f.as_str()]))
            .collect::<Result<Vec<_>>>()?;
        table.push(StabilityRow { word: w.clone(), slants });
    }
    if table.is_empty() {
        return Err(Error::Scoring(format!(
            "no word of category {:?} is in the embedding vocabulary",
            cat.name
        )));
    }
    let mut consistent = 0usize;
    let mut offenders = Vec::new();
    for row in &table {
        let first = sign_class(row.slants[0]);
        let uniform = row.slants.iter().all(|&s| sign_class(s) == first);
        let lo = row.slants.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = row.slants.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut issues = Vec::new();
        if uniform {
            consistent += 1;
        } else {
            issues.push(StabilityIssue::Direction);
        }
        if hi - lo >= model.std {
            issues.push(StabilityIssue::Magnitude);
        }
        if !issues.is_empty() {
            offenders.push(Offender {
                word: row.word.clone(),
                issues,
                slants: row.slants.clone(),
            });
        }
    }
    let magnitude_stable = !offenders
        .iter()
        .any(|o| o.issues.contains(&StabilityIssue::Magnitude));
    Ok(StabilityReport {
        pairs: gp.pairs().to_vec(),
        direction_consistency_rate: consistent as f64 / table.len() as f64,
        table,
        magnitude_stable,
        offending_entries: offenders,
    })
}

/// Keeps a candidate pair iff its male term is among the top male words,
/// its female term among the top female words, and neither is a family term.
pub fn derive_base_pairs(
    sets: &GenderedWordSets,
    candidates: &[(String, String)],
    family_exclusions: &HashSet<String>,
) -> Result<GenderPairSet> {
    let kept: Vec<(String, String)> = candidates
        .iter()
        .filter(|(m, f)| {
            sets.male_words.contains(m)
                && sets.female_words.contains(f)
                && !family_exclusions.contains(m)
                && !family_exclusions.contains(f)
        })
        .cloned()
        .collect();
    if kept.is_empty() {
        return Err(Error::Derivation(
            "no candidate base pair survives the top-word and family filters".into(),
        ));
    }
    GenderPairSet::new(kept)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSummary {
    pub mean: f64,
    pub std: f64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilitySummary {
    pub rate: f64,
    pub stable: bool,
    pub offenders: Vec<Offender>,
}

/// JSON shape of one scored category.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeatReport {
    pub category: String,
    pub provenance: Provenance,
    pub bias: f64,
    pub direction: Direction,
    pub significant: bool,
    pub model: ModelSummary,
    pub per_word: Vec<WordSlant>,
    pub stability: StabilitySummary,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub skipped: Vec<String>,
}

impl WeatReport {
    pub fn new(result: &WeatResult, model: &SignificanceModel, stability: &StabilityReport) -> Self {
        WeatReport {
            category: result.category.name.clone(),
            provenance: result.category.provenance,
            bias: result.bias,
            direction: result.direction,
            significant: classify(result, model) == Significance::Significant,
            model: ModelSummary {
                mean: model.mean,
                std: model.std,
                n: model.n_words,
            },
            per_word: result.per_word.clone(),
            stability: StabilitySummary {
                rate: stability.direction_consistency_rate,
                stable: stability.magnitude_stable,
                offenders: stability.offending_entries.clone(),
            },
            skipped: result.skipped.clone(),
        }
    }
}
