//! Weighted log-odds ratio with an informative Dirichlet prior taken from a
//! background histogram, plus top-k extraction of the most gendered words.
//!
//! For every word `w` in the union vocabulary of the two sides:
//!
//! ```text
//! a_w     = Z(w) + eps                      (background_counts)
//!         = a0 * (Z(w) + eps) / total_Z     (scaled)
//! a_total = sum of a_w over vocab(X) u vocab(Y) u vocab(Z)
//! delta_w = ln[(X(w)+a_w) / (nX+a_total-X(w)-a_w)] - ln[(Y(w)+a_w) / (nY+a_total-Y(w)-a_w)]
//! var_w   = 1/(X(w)+a_w) + 1/(Y(w)+a_w)
//! z_w     = delta_w / sqrt(var_w)
//! ```
//!
//! Positive `z` means the word is favored by the first (male) side.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::clustering::{BiasCategory, Provenance};
use crate::error::{Error, Result};

/// Token counts for one sub-corpus. Zero counts are never stored.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LexicalHistogram {
    counts: HashMap<String, u64>,
    total: u64,
}

impl LexicalHistogram {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, token: &str, n: u64) {
        if n == 0 {
            return;
        }
        if let Some(c) = self.counts.get_mut(token) {
            *c += n;
        } else {
            self.counts.insert(token.to_string(), n);
        }
        self.total += n;
    }

    pub fn merge(&mut self, other: &LexicalHistogram) {
        for (w, &c) in &other.counts {
            self.add(w, c);
        }
    }

    pub fn get(&self, token: &str) -> u64 {
        self.counts.get(token).copied().unwrap_or(0)
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, u64)> {
        self.counts.iter().map(|(w, &c)| (w.as_str(), c))
    }

    /// Entries sorted by word.
    pub fn sorted(&self) -> Vec<(&str, u64)> {
        let mut v: Vec<_> = self.iter().collect();
        v.sort_unstable_by(|a, b| a.0.cmp(b.0));
        v
    }

    /// Every count multiplied by `factor`.
    pub fn scaled(&self, factor: u64) -> Self {
        self.iter().map(|(w, c)| (w, c * factor)).collect()
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["word", "count"])?;
        for (word, count) in self.sorted() {
            out.write_record([word, &count.to_string()])?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(r);
        let mut h = LexicalHistogram::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let bad = || Error::Parse {
                line: i + 2,
                message: "expected word,count".into(),
            };
            let word = rec.get(0).ok_or_else(bad)?;
            let count: u64 = rec.get(1).ok_or_else(bad)?.trim().parse().map_err(|_| bad())?;
            h.add(word, count);
        }
        Ok(h)
    }
}

impl<'a> FromIterator<(&'a str, u64)> for LexicalHistogram {
    fn from_iter<I: IntoIterator<Item = (&'a str, u64)>>(iter: I) -> Self {
        let mut h = LexicalHistogram::new();
        for (w, c) in iter {
            h.add(w, c);
        }
        h
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PriorMode {
    /// Raw background counts plus `epsilon`.
    BackgroundCounts,
    /// Background proportions rescaled to a total prior mass of `alpha0`.
    Scaled,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriorConfig {
    pub mode: PriorMode,
    pub alpha0: f64,
    pub epsilon: f64,
}

impl Default for PriorConfig {
    fn default() -> Self {
        PriorConfig {
            mode: PriorMode::BackgroundCounts,
            alpha0: 500.0,
            epsilon: 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WlorEntry {
    pub word: String,
    pub z: f64,
    pub delta: f64,
    pub count_x: u64,
    pub count_y: u64,
    pub count_z: u64,
}

fn log_odds(count: f64, total: f64, alpha: f64, alpha_total: f64) -> f64 {
    (count + alpha).ln() - ((total - count) + (alpha_total - alpha)).ln()
}

/// Scores every word of `vocab(x) u vocab(y)`; output is sorted by word.
pub fn wlor_scores(
    x: &LexicalHistogram,
    y: &LexicalHistogram,
    z: &LexicalHistogram,
    prior: &PriorConfig,
) -> Result<Vec<WlorEntry>> {
    if !(prior.epsilon > 0.0 && prior.epsilon.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "prior epsilon must be positive, got {}",
            prior.epsilon
        )));
    }
    if prior.mode == PriorMode::Scaled && !(prior.alpha0 > 0.0 && prior.alpha0.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "prior mass alpha0 must be positive, got {}",
            prior.alpha0
        )));
    }
    if x.is_empty() && y.is_empty() {
        return Ok(Vec::new());
    }
    if prior.mode == PriorMode::Scaled && z.total() == 0 {
        return Err(Error::InvalidArgument(
            "scaled prior needs a non-empty background histogram".into(),
        ));
    }

    let scored: BTreeSet<&str> = x.counts.keys().chain(y.counts.keys()).map(String::as_str).collect();
    let prior_vocab: BTreeSet<&str> = scored
        .iter()
        .copied()
        .chain(z.counts.keys().map(String::as_str))
        .collect();
    if prior_vocab.len() < 2 {
        return Err(Error::InvalidArgument(
            "log-odds need a vocabulary of at least two words".into(),
        ));
    }

    let eps = prior.epsilon;
    let z_total = z.total() as f64;
    let alpha = |w: &str| -> f64 {
        let base = z.get(w) as f64 + eps;
        match prior.mode {
            PriorMode::BackgroundCounts => base,
            PriorMode::Scaled => prior.alpha0 * base / z_total,
        }
    };
    let alpha_total: f64 = prior_vocab.iter().map(|w| alpha(w)).sum();
    if !(alpha_total > 0.0) {
        return Err(Error::InvalidArgument("total prior mass is not positive".into()));
    }

    let nx = x.total() as f64;
    let ny = y.total() as f64;
    let words: Vec<&str> = scored.into_iter().collect();
    let entries = words
        .par_iter()
        .map(|&w| {
            let a = alpha(w);
            let cx = x.get(w);
            let cy = y.get(w);
            let delta = log_odds(cx as f64, nx, a, alpha_total) - log_odds(cy as f64, ny, a, alpha_total);
            let var = 1.0 / (cx as f64 + a) + 1.0 / (cy as f64 + a);
            WlorEntry {
                word: w.to_string(),
                z: delta / var.sqrt(),
                delta,
                count_x: cx,
                count_y: cy,
                count_z: z.get(w),
            }
        })
        .collect();
    Ok(entries)
}

/// Sorts by `z` descending, ties by word.
pub fn sort_by_z_desc(entries: &mut [WlorEntry]) {
    entries.sort_by(|a, b| b.z.total_cmp(&a.z).then_with(|| a.word.cmp(&b.word)));
}

/// CSV report `word,z,delta,count_x,count_y,count_z`, sorted by `z` descending.
pub fn write_wlor_report<W: Write>(entries: &[WlorEntry], w: W) -> Result<()> {
    let mut sorted = entries.to_vec();
    sort_by_z_desc(&mut sorted);
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["word", "z", "delta", "count_x", "count_y", "count_z"])?;
    for e in &sorted {
        out.write_record([
            e.word.clone(),
            e.z.to_string(),
            e.delta.to_string(),
            e.count_x.to_string(),
            e.count_y.to_string(),
            e.count_z.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Male,
    Female,
}

/// The `k_each` most male-skewed and most female-skewed words.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GenderedWordSets {
    /// Descending `z`.
    pub male_words: Vec<String>,
    /// Ascending `z`.
    pub female_words: Vec<String>,
    pub k_each: usize,
    /// `z` of every word in either list.
    pub scores: BTreeMap<String, f64>,
}

impl GenderedWordSets {
    pub fn side(&self, word: &str) -> Option<Side> {
        if self.male_words.iter().any(|w| w == word) {
            Some(Side::Male)
        } else if self.female_words.iter().any(|w| w == word) {
            Some(Side::Female)
        } else {
            None
        }
    }

    pub fn contains(&self, word: &str) -> bool {
        self.scores.contains_key(word)
    }

    pub fn all_words(&self) -> impl Iterator<Item = &String> {
        self.male_words.iter().chain(&self.female_words)
    }

    pub fn len(&self) -> usize {
        self.male_words.len() + self.female_words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Takes the `k_each` largest-`z` and smallest-`z` words after dropping
/// `exclusions`. Only strictly positive (negative) scores qualify for the
/// male (female) side. Ties are broken by word.
pub fn top_gendered(
    entries: &[WlorEntry],
    k_each: usize,
    exclusions: &HashSet<String>,
) -> Result<GenderedWordSets> {
    if k_each == 0 {
        return Err(Error::InvalidArgument("k_each must be >= 1".into()));
    }
    let kept: Vec<&WlorEntry> = entries
        .iter()
        .filter(|e| !exclusions.contains(&e.word))
        .collect();

    let mut male: Vec<&WlorEntry> = kept.iter().copied().filter(|e| e.z > 0.0).collect();
    male.sort_by(|a, b| b.z.total_cmp(&a.z).then_with(|| a.word.cmp(&b.word)));
    male.truncate(k_each);

    let mut female: Vec<&WlorEntry> = kept.iter().copied().filter(|e| e.z < 0.0).collect();
    female.sort_by(|a, b| a.z.total_cmp(&b.z).then_with(|| a.word.cmp(&b.word)));
    female.truncate(k_each);

    let scores = male
        .iter()
        .chain(&female)
        .map(|e| (e.word.clone(), e.z))
        .collect();
    Ok(GenderedWordSets {
        male_words: male.iter().map(|e| e.word.clone()).collect(),
        female_words: female.iter().map(|e| e.word.clone()).collect(),
        k_each,
        scores,
    })
}

/// Parses an exclusion list: one token per line, `#` comments allowed.
pub fn parse_exclusions(text: &str) -> HashSet<String> {
    text.lines()
        .map(|l| l.split('#').next().unwrap_or("").trim().to_lowercase())
        .filter(|l| !l.is_empty())
        .collect()
}

const DEFAULT_EXCLUSIONS: &str = include_str!("../data/exclusions.txt");

/// Bundled exclusions: gendered pronouns and titles plus common legal
/// boilerplate.
pub fn bundled_exclusions() -> HashSet<String> {
    parse_exclusions(DEFAULT_EXCLUSIONS)
}

/// Writes the theming sheet `word,z,category` with an empty category column.
pub fn write_theming<W: Write>(sets: &GenderedWordSets, w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["word", "z", "category"])?;
    for word in sets.all_words() {
        out.write_record([word.as_str(), &sets.scores[word].to_string(), ""])?;
    }
    out.flush()?;
    Ok(())
}

pub fn export_for_theming(sets: &GenderedWordSets, path: &Path) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_theming(sets, file)
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ThemingImport {
    /// One category per distinct non-empty `category` value, sorted by name.
    pub categories: Vec<BiasCategory>,
    /// Annotated words that are not in the gendered sets.
    pub skipped: Vec<String>,
}

/// Reads an annotated theming sheet back into named manual categories.
pub fn read_theming<R: Read>(r: R, sets: &GenderedWordSets) -> Result<ThemingImport> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .flexible(true)
        .from_reader(r);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h.trim() == name);
    let word_col = col("word").ok_or_else(|| Error::Parse {
        line: 1,
        message: "theming sheet needs a `word` column".into(),
    })?;
    let cat_col = col("category");

    let mut grouped: BTreeMap<String, Vec<String>> = BTreeMap::new();
    let mut skipped = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let Some(word) = rec.get(word_col).map(str::trim) else { continue };
        let category = cat_col.and_then(|c| rec.get(c)).map(str::trim).unwrap_or("");
        if category.is_empty() || word.is_empty() {
            continue;
        }
        if !sets.contains(word) {
            warn!("theming sheet word {word:?} is not in the gendered word sets; skipped");
            skipped.push(word.to_string());
            continue;
        }
        let words = grouped.entry(category.to_string()).or_default();
        if !words.iter().any(|w| w == word) {
            words.push(word.to_string());
        }
    }
    let categories = grouped
        .into_iter()
        .map(|(name, words)| BiasCategory {
            name,
            words,
            provenance: Provenance::Manual,
            source_cluster: None,
            composition: None,
        })
        .collect();
    Ok(ThemingImport { categories, skipped })
}

pub fn import_theming(path: &Path, sets: &GenderedWordSets) -> Result<ThemingImport> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_theming(file, sets)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn hist(pairs: &[(&str, u64)]) -> LexicalHistogram {
        pairs.iter().copied().collect()
    }

    fn entry(word: &str, z: f64) -> WlorEntry {
        WlorEntry {
            word: word.into(),
            z,
            delta: z,
            count_x: 0,
            count_y: 0,
            count_z: 0,
        }
    }

    #[test]
    fn histogram_drops_zero_counts() {
        let mut h = LexicalHistogram::new();
        h.add("a", 0);
        assert!(h.is_empty());
        h.add("a", 2);
        h.add("a", 3);
        assert_eq!(h.get("a"), 5);
        assert_eq!(h.total(), 5);
    }

    #[test]
    fn identical_histograms_score_zero() {
        let x = hist(&[("a", 5), ("b", 3), ("c", 1)]);
        let z = hist(&[("a", 7), ("d", 2)]);
        let scores = wlor_scores(&x, &x, &z, &PriorConfig::default()).unwrap();
        assert_eq!(scores.len(), 3);
        assert!(scores.iter().all(|e| e.z == 0.0));
    }

    #[test]
    fn sign_is_forced() {
        let x = hist(&[("office", 10)]);
        let y = hist(&[("husband", 10)]);
        let z = hist(&[("office", 10), ("husband", 10)]);
        let s = wlor_scores(&x, &y, &z, &PriorConfig::default()).unwrap();
        let get = |w: &str| s.iter().find(|e| e.word == w).unwrap().z;
        assert!(get("office") > 0.0);
        assert!(get("husband") < 0.0);
    }

    #[test]
    fn frozen_two_word_example() {
        // Direct evaluation of the formula for X={a:8,b:2}, Y={a:2,b:8},
        // Z={a:10,b:10}, eps=0.01:
        //   alpha = 10.01 each, alpha_total = 20.02
        //   delta_a = ln(18.01/12.01) - ln(12.01/18.01) = 2 ln(18.01/12.01)
        //   var_a = 1/18.01 + 1/12.01
        let xa = 18.01f64;
        let ya = 12.01f64;
        let delta_a = 2.0 * (xa / ya).ln();
        let z_a = delta_a / (1.0 / xa + 1.0 / ya).sqrt();
        let x = hist(&[("a", 8), ("b", 2)]);
        let y = hist(&[("a", 2), ("b", 8)]);
        let zh = hist(&[("a", 10), ("b", 10)]);
        let s = wlor_scores(&x, &y, &zh, &PriorConfig::default()).unwrap();
        assert_eq!(s[0].word, "a");
        assert!((s[0].z - z_a).abs() < 1e-9);
        assert!((s[1].z + z_a).abs() < 1e-9);
        assert!((z_a - 2.175_249_490_093).abs() < 1e-9);
    }

    #[test]
    fn argument_errors() {
        let x = hist(&[("a", 1), ("b", 1)]);
        let bad = PriorConfig {
            epsilon: 0.0,
            ..PriorConfig::default()
        };
        assert!(wlor_scores(&x, &x, &x, &bad).is_err());
        let bad = PriorConfig {
            mode: PriorMode::Scaled,
            alpha0: -1.0,
            epsilon: 0.01,
        };
        assert!(wlor_scores(&x, &x, &x, &bad).is_err());
        let empty = LexicalHistogram::new();
        assert!(wlor_scores(&empty, &empty, &x, &PriorConfig::default())
            .unwrap()
            .is_empty());
        let one = hist(&[("a", 3)]);
        assert!(wlor_scores(&one, &one, &one, &PriorConfig::default()).is_err());
    }

    #[test]
    fn top_gendered_examples() {
        let e = vec![entry("w1", 3.0), entry("w2", 1.0), entry("w3", -1.0), entry("w4", -3.0)];
        let s = top_gendered(&e, 1, &HashSet::new()).unwrap();
        assert_eq!(s.male_words, vec!["w1"]);
        assert_eq!(s.female_words, vec!["w4"]);

        let e = vec![entry("a", 3.0), entry("b", 1.0), entry("c", 0.5)];
        let s = top_gendered(&e, 2, &HashSet::new()).unwrap();
        assert_eq!(s.male_words, vec!["a", "b"]);
        assert!(s.female_words.is_empty());

        assert!(top_gendered(&e, 0, &HashSet::new()).is_err());
    }

    #[test]
    fn top_gendered_exclusions_and_ties() {
        let e = vec![entry("he", 9.0), entry("zeta", 2.0), entry("alpha", 2.0), entry("she", -9.0)];
        let ex: HashSet<String> = ["he", "she"].iter().map(|s| s.to_string()).collect();
        let s = top_gendered(&e, 5, &ex).unwrap();
        assert_eq!(s.male_words, vec!["alpha", "zeta"]);
        assert!(s.female_words.is_empty());
    }

    #[test]
    fn theming_round_trip() {
        let e = vec![entry("office", 3.0), entry("pay", 2.0), entry("work", 1.5), entry("husband", -3.0)];
        let sets = top_gendered(&e, 5, &HashSet::new()).unwrap();
        let mut buf = Vec::new();
        write_theming(&sets, &mut buf).unwrap();
        let imp = read_theming(buf.as_slice(), &sets).unwrap();
        assert!(imp.categories.is_empty());

        let annotated = "word,z,category\noffice,3,employment\npay,2,employment\nwork,1.5,employment\nhusband,-3,\n";
        let imp = read_theming(annotated.as_bytes(), &sets).unwrap();
        assert_eq!(imp.categories.len(), 1);
        assert_eq!(imp.categories[0].name, "employment");
        assert_eq!(imp.categories[0].words.len(), 3);
        assert_eq!(imp.categories[0].provenance, Provenance::Manual);

        let annotated = "word,z,category\noffice,3,employment\nsalary,1,employment\n# footer\n";
        let imp = read_theming(annotated.as_bytes(), &sets).unwrap();
        assert_eq!(imp.skipped, vec!["salary"]);
        assert_eq!(imp.categories[0].words, vec!["office"]);
    }

    #[test]
    fn histogram_csv_round_trip() {
        let h = hist(&[("b", 2), ("a", 7)]);
        let mut buf = Vec::new();
        h.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf.clone()).unwrap(), "word,count\na,7\nb,2\n");
        assert_eq!(LexicalHistogram::read_csv(buf.as_slice()).unwrap(), h);
    }

    fn arb_hist() -> impl Strategy<Value = LexicalHistogram> {
        proptest::collection::btree_map(0u8..12, 1u64..40, 0..10).prop_map(|m| {
            m.into_iter()
                .map(|(k, v)| (format!("w{k}"), v))
                .collect::<Vec<_>>()
                .iter()
                .map(|(k, v)| (k.as_str(), *v))
                .collect()
        })
    }

    proptest! {
        #[test]
        fn antisymmetric(x in arb_hist(), y in arb_hist(), z in arb_hist()) {
            let p = PriorConfig::default();
            if let (Ok(a), Ok(b)) = (wlor_scores(&x, &y, &z, &p), wlor_scores(&y, &x, &z, &p)) {
                prop_assert_eq!(a.len(), b.len());
                for (ea, eb) in a.iter().zip(&b) {
                    prop_assert_eq!(&ea.word, &eb.word);
                    prop_assert_eq!(ea.z, -eb.z);
                    prop_assert!(ea.z.is_finite());
                    prop_assert_eq!(ea.z.signum() == ea.delta.signum() || ea.z == 0.0, true);
                }
            }
        }

        #[test]
        fn scale_preserves_sign(x in arb_hist(), y in arb_hist(), z in arb_hist(), k in 2u64..6) {
            let p = PriorConfig::default();
            if let Ok(a) = wlor_scores(&x, &y, &z, &p) {
                let b = wlor_scores(&x.scaled(k), &y.scaled(k), &z.scaled(k), &p).unwrap();
                for (ea, eb) in a.iter().zip(&b) {
                    if ea.z.abs() > 1e-9 {
                        prop_assert_eq!(ea.z.signum(), eb.z.signum(), "{}", ea.word);
                    }
                }
            }
        }
    }
}
