//! Per-slice bias tracking and regression of bias magnitude on the labor
//! slant (share of women in the workforce minus share of men).

use std::collections::{BTreeSet, HashSet};
use std::io::{Read, Write};

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::clustering::{filter_gendered_clusters, kmeans, BiasCategory, KMeansConfig};
use crate::embedding::{train_skipgram, TrainConfig};
use crate::error::{Error, Result};
use crate::ingest::{build_gendered_corpora, corpus_token_lists, slice_by_period, CorpusSlice, Document, GenderLexicon};
use crate::special::student_t_sf;
use crate::weat::{bias_score, derive_base_pairs, significance_model, GenderPairSet, Significance};
use crate::wlor::{top_gendered, wlor_scores, PriorConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LaborRecord {
    pub year: i32,
    pub pct_women: f64,
    pub pct_men: f64,
}

pub fn labor_slant(rec: &LaborRecord) -> f64 {
    rec.pct_women - rec.pct_men
}

/// Labor records sorted by year, with linear interpolation between census
/// years. Years outside the covered range take the nearest endpoint value.
#[derive(Debug, Clone, PartialEq)]
pub struct LaborSeries {
    records: Vec<LaborRecord>,
}

impl LaborSeries {
    pub fn new(mut records: Vec<LaborRecord>) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::InvalidArgument("labor series is empty".into()));
        }
        for r in &records {
            let ok = |v: f64| (0.0..=1.0).contains(&v);
            if !ok(r.pct_women) || !ok(r.pct_men) {
                return Err(Error::InvalidArgument(format!(
                    "labor fractions for {} must lie in [0, 1]",
                    r.year
                )));
            }
        }
        records.sort_by_key(|r| r.year);
        if records.windows(2).any(|w| w[0].year == w[1].year) {
            return Err(Error::InvalidArgument("labor series repeats a year".into()));
        }
        Ok(LaborSeries { records })
    }

    /// Reads `year,pct_women,pct_men`.
    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(r);
        let records = rdr
            .deserialize::<LaborRecord>()
            .collect::<std::result::Result<Vec<_>, _>>()?;
        Self::new(records)
    }

    pub fn records(&self) -> &[LaborRecord] {
        &self.records
    }

    pub fn slant_at(&self, year: f64) -> f64 {
        let r = &self.records;
        let first = &r[0];
        let last = &r[r.len() - 1];
        if year <= first.year as f64 {
            return labor_slant(first);
        }
        if year >= last.year as f64 {
            return labor_slant(last);
        }
        let hi = r.iter().position(|x| x.year as f64 >= year).expect("inside range");
        let (a, b) = (&r[hi - 1], &r[hi]);
        let t = (year - a.year as f64) / (b.year - a.year) as f64;
        labor_slant(a) + t * (labor_slant(b) - labor_slant(a))
    }

    /// Slant at the midpoint year of an inclusive slice.
    pub fn slant_for_slice(&self, start: i32, end: i32) -> f64 {
        self.slant_at((start as f64 + end as f64) / 2.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeriesPoint {
    pub slice_start: i32,
    pub slice_end: i32,
    pub category: String,
    pub bias: f64,
    pub abs_bias: f64,
    pub significant: bool,
    pub sparse: bool,
    pub n_sentences_male: usize,
    pub n_sentences_female: usize,
    pub tokens_male: u64,
    pub tokens_female: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum CategoryMethod {
    /// Re-score fixed word lists in every slice.
    Manual(Vec<BiasCategory>),
    /// Re-cluster every slice; for each anchor, track the retained cluster
    /// that overlaps it the most, reported under the anchor's name.
    Kmeans {
        k: usize,
        min_members: usize,
        anchors: Vec<BiasCategory>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum PairSource {
    Fixed(GenderPairSet),
    Derived {
        candidates: Vec<(String, String)>,
        family: BTreeSet<String>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimelineConfig {
    pub years_per_slice: u32,
    pub start_year: i32,
    pub end_year: i32,
    pub k_each: usize,
    pub exclusions: HashSet<String>,
    pub prior: PriorConfig,
    pub train: TrainConfig,
    pub method: CategoryMethod,
    pub pairs: PairSource,
    pub top_n_significance: usize,
    /// Minimum tokens per gender side before a slice counts as usable.
    pub sparse_floor: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedSlice {
    pub slice_start: i32,
    pub slice_end: i32,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Timeline {
    pub points: Vec<TimeSeriesPoint>,
    pub skipped: Vec<SkippedSlice>,
}

impl Timeline {
    pub fn categories(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for p in &self.points {
            if !out.contains(&p.category) {
                out.push(p.category.clone());
            }
        }
        out
    }

    pub fn series(&self, category: &str) -> Vec<&TimeSeriesPoint> {
        self.points.iter().filter(|p| p.category == category).collect()
    }
}

fn slice_seed(seed: u64, index: usize) -> u64 {
    seed.wrapping_add((index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

fn run_slice(
    slice: &CorpusSlice,
    index: usize,
    lex: &GenderLexicon,
    cfg: &TimelineConfig,
) -> Result<(Vec<TimeSeriesPoint>, Vec<String>)> {
    let corpora = build_gendered_corpora(&slice.documents, lex);
    let sparse = corpora.male.total() < cfg.sparse_floor || corpora.female.total() < cfg.sparse_floor;
    let entries = wlor_scores(&corpora.male, &corpora.female, &corpora.background, &cfg.prior)?;
    let sets = top_gendered(&entries, cfg.k_each, &cfg.exclusions)?;

    let sentences = corpus_token_lists(&slice.documents);
    let train = TrainConfig {
        seed: slice_seed(cfg.train.seed, index),
        ..cfg.train.clone()
    };
    let (emb, _) = train_skipgram(&sentences, &train)?;

    let gp = match &cfg.pairs {
        PairSource::Fixed(gp) => gp.restrict_to(&emb)?,
        PairSource::Derived { candidates, family } => {
            let unfiltered = top_gendered(&entries, cfg.k_each, &HashSet::new())?;
            let family: HashSet<String> = family.iter().cloned().collect();
            derive_base_pairs(&unfiltered, candidates, &family)?.restrict_to(&emb)?
        }
    };
    let model = significance_model(&emb, &gp, cfg.top_n_significance)?;

    let mut notes = Vec::new();
    let categories: Vec<BiasCategory> = match &cfg.method {
        CategoryMethod::Manual(cats) => cats.clone(),
        CategoryMethod::Kmeans { k, min_members, anchors } => {
            let kcfg = KMeansConfig {
                k: (*k).min(emb.len()),
                seed: train.seed,
                ..KMeansConfig::default()
            };
            let cs = kmeans(&emb, &kcfg)?;
            let retained = filter_gendered_clusters(&cs, &sets, *min_members);
            let mut tracked = Vec::new();
            for anchor in anchors {
                let overlap = |c: &BiasCategory| c.words.iter().filter(|w| anchor.words.contains(w)).count();
                let best = retained.iter().filter(|c| overlap(c) > 0).max_by(|a, b| {
                    overlap(a)
                        .cmp(&overlap(b))
                        .then(a.words.len().cmp(&b.words.len()))
                        .then(b.source_cluster.cmp(&a.source_cluster))
                });
                match best {
                    Some(c) => {
                        let mut c = c.clone();
                        c.name = anchor.name.clone();
                        tracked.push(c);
                    }
                    None => notes.push(format!("no retained cluster overlaps anchor {:?}", anchor.name)),
                }
            }
            tracked
        }
    };

    let mut points = Vec::new();
    for cat in &categories {
        match bias_score(&emb, cat, &gp) {
            Ok(r) => points.push(TimeSeriesPoint {
                slice_start: slice.start_year,
                slice_end: slice.end_year,
                category: cat.name.clone(),
                bias: r.bias,
                abs_bias: r.bias.abs(),
                significant: model.classify_bias(r.bias) == Significance::Significant,
                sparse,
                n_sentences_male: corpora.tags.male,
                n_sentences_female: corpora.tags.female,
                tokens_male: corpora.male.total(),
                tokens_female: corpora.female.total(),
            }),
            Err(e) => notes.push(format!("category {:?}: {e}", cat.name)),
        }
    }
    Ok((points, notes))
}

/// Runs the full pipeline on every slice. Slices run concurrently and the
/// series is assembled in slice order.
pub fn run_timeline(docs: &[Document], lex: &GenderLexicon, cfg: &TimelineConfig) -> Result<Timeline> {
    let slices = slice_by_period(docs, cfg.years_per_slice, cfg.start_year, cfg.end_year)?;
    let populated: Vec<(usize, &CorpusSlice)> = slices
        .iter()
        .enumerate()
        .filter(|(_, s)| !s.documents.is_empty())
        .collect();
    if populated.len() < 2 {
        return Err(Error::Timeline(format!(
            "documents fall into {} slice(s); a timeline needs at least 2",
            populated.len()
        )));
    }
    let outcomes: Vec<_> = populated
        .par_iter()
        .map(|&(i, s)| (s, run_slice(s, i, lex, cfg)))
        .collect();

    let mut timeline = Timeline::default();
    for (slice, outcome) in outcomes {
        match outcome {
            Ok((points, notes)) => {
                timeline.points.extend(points);
                for reason in notes {
                    warn!("slice {}-{}: {reason}", slice.start_year, slice.end_year);
                    timeline.skipped.push(SkippedSlice {
                        slice_start: slice.start_year,
                        slice_end: slice.end_year,
                        reason,
                    });
                }
            }
            Err(e) => {
                warn!("slice {}-{} skipped: {e}", slice.start_year, slice.end_year);
                timeline.skipped.push(SkippedSlice {
                    slice_start: slice.start_year,
                    slice_end: slice.end_year,
                    reason: e.to_string(),
                });
            }
        }
    }
    let usable: BTreeSet<i32> = timeline
        .points
        .iter()
        .filter(|p| !p.sparse)
        .map(|p| p.slice_start)
        .collect();
    if usable.len() < 2 {
        return Err(Error::Timeline(format!(
            "only {} usable (non-sparse, scored) slice(s); need at least 2",
            usable.len()
        )));
    }
    Ok(timeline)
}

pub fn write_timeline_csv<W: Write>(points: &[TimeSeriesPoint], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["slice_start", "slice_end", "category", "bias", "abs_bias", "significant", "sparse"])?;
    for p in points {
        out.write_record([
            p.slice_start.to_string(),
            p.slice_end.to_string(),
            p.category.clone(),
            p.bias.to_string(),
            p.abs_bias.to_string(),
            p.significant.to_string(),
            p.sparse.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionResult {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub p_value: f64,
    pub n: usize,
    pub df: usize,
}

/// Least squares with a two-sided t-test on the slope.
///
/// A perfect fit has a zero standard error; its p-value is reported as 0
/// (or 1 when the slope itself is 0).
pub fn ols_regress(points: &[(f64, f64)]) -> Result<RegressionResult> {
    let n = points.len();
    if n < 3 {
        return Err(Error::Regression(format!("need at least 3 points, got {n}")));
    }
    let nf = n as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / nf;
    let my = points.iter().map(|p| p.1).sum::<f64>() / nf;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = points.iter().map(|p| (p.1 - my) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return Err(Error::Regression("all x values are equal".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = points
        .iter()
        .map(|p| {
            let r = p.1 - (intercept + slope * p.0);
            r * r
        })
        .sum();
    let r_squared = if syy == 0.0 {
        warn!("y is constant; R^2 reported as 0");
        0.0
    } else {
        (1.0 - ss_res / syy).clamp(0.0, 1.0)
    };
    let df = n - 2;
    let se = (ss_res / df as f64 / sxx).sqrt();
    let p_value = if se == 0.0 {
        if slope == 0.0 {
            1.0
        } else {
            0.0
        }
    } else {
        (2.0 * student_t_sf((slope / se).abs(), df as u64)?).min(1.0)
    };
    Ok(RegressionResult {
        slope,
        intercept,
        r_squared,
        p_value,
        n,
        df,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum RegressionMode {
    #[default]
    Levels,
    /// Consecutive differences of both variables.
    Diff,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    /// x = labor slant, y = |bias|.
    #[default]
    BiasOnLabor,
    /// x = |bias|, y = labor slant.
    LaborOnBias,
}

/// Regression pairs for one category: non-sparse slices only, labor slant
/// taken at each slice's midpoint year.
pub fn regression_points(
    points: &[TimeSeriesPoint],
    category: &str,
    labor: &LaborSeries,
    mode: RegressionMode,
    orientation: Orientation,
) -> Vec<(f64, f64)> {
    let levels: Vec<(f64, f64)> = points
        .iter()
        .filter(|p| p.category == category && !p.sparse)
        .map(|p| (labor.slant_for_slice(p.slice_start, p.slice_end), p.abs_bias))
        .collect();
    let pairs = match mode {
        RegressionMode::Levels => levels,
        RegressionMode::Diff => levels
            .windows(2)
            .map(|w| (w[1].0 - w[0].0, w[1].1 - w[0].1))
            .collect(),
    };
    match orientation {
        Orientation::BiasOnLabor => pairs,
        Orientation::LaborOnBias => pairs.into_iter().map(|(x, y)| (y, x)).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn labor_slant_examples() {
        let r = |w, m| LaborRecord { year: 1950, pct_women: w, pct_men: m };
        assert_eq!(labor_slant(&r(0.5, 0.5)), 0.0);
        assert!((labor_slant(&r(0.46, 0.54)) + 0.08).abs() < 1e-15);
        assert_eq!(labor_slant(&r(1.0, 0.0)), 1.0);
    }

    #[test]
    fn interpolation() {
        let s = LaborSeries::new(vec![
            LaborRecord { year: 1940, pct_women: 0.3, pct_men: 0.7 },
            LaborRecord { year: 1920, pct_women: 0.2, pct_men: 0.8 },
        ])
        .unwrap();
        assert!((s.slant_at(1930.0) + 0.5).abs() < 1e-12);
        assert!((s.slant_for_slice(1920, 1924) + 0.58).abs() < 1e-12);
        assert!((s.slant_at(1900.0) + 0.6).abs() < 1e-12);
        assert!((s.slant_at(2000.0) + 0.4).abs() < 1e-12);
        assert!(LaborSeries::new(vec![LaborRecord { year: 1, pct_women: 1.2, pct_men: 0.0 }]).is_err());
    }

    #[test]
    fn labor_csv() {
        let s = LaborSeries::read_csv("year,pct_women,pct_men\n1920,0.2,0.8\n1930,0.25,0.75\n".as_bytes()).unwrap();
        assert_eq!(s.records().len(), 2);
        assert!(LaborSeries::read_csv("year,pct_women\n1920,0.2\n".as_bytes()).is_err());
    }

    #[test]
    fn exact_line() {
        let pts: Vec<(f64, f64)> = (1..=10).map(|x| (x as f64, 2.0 * x as f64 + 1.0)).collect();
        let r = ols_regress(&pts).unwrap();
        assert!((r.slope - 2.0).abs() < 1e-12);
        assert!((r.intercept - 1.0).abs() < 1e-12);
        assert!((r.r_squared - 1.0).abs() < 1e-12);
        assert_eq!(r.df, 8);
    }

    #[test]
    fn constant_y() {
        let pts: Vec<(f64, f64)> = (1..=5).map(|x| (x as f64, 3.0)).collect();
        let r = ols_regress(&pts).unwrap();
        assert_eq!(r.slope, 0.0);
        assert_eq!(r.r_squared, 0.0);
        assert_eq!(r.p_value, 1.0);
    }

    #[test]
    fn regression_errors() {
        assert!(ols_regress(&[(1.0, 1.0), (2.0, 2.0)]).is_err());
        assert!(ols_regress(&[(1.0, 1.0), (1.0, 2.0), (1.0, 3.0)]).is_err());
    }

    #[test]
    fn diff_mode_and_orientation() {
        let labor = LaborSeries::new(vec![
            LaborRecord { year: 1900, pct_women: 0.0, pct_men: 1.0 },
            LaborRecord { year: 2000, pct_women: 0.5, pct_men: 0.5 },
        ])
        .unwrap();
        let mk = |s: i32, b: f64, sparse: bool| TimeSeriesPoint {
            slice_start: s,
            slice_end: s + 9,
            category: "c".into(),
            bias: b,
            abs_bias: b.abs(),
            significant: false,
            sparse,
            n_sentences_male: 0,
            n_sentences_female: 0,
            tokens_male: 0,
            tokens_female: 0,
        };
        let pts = vec![mk(1900, 0.5, false), mk(1910, -0.4, false), mk(1920, 0.1, true), mk(1930, 0.2, false)];
        let lv = regression_points(&pts, "c", &labor, RegressionMode::Levels, Orientation::BiasOnLabor);
        assert_eq!(lv.len(), 3);
        assert!((lv[1].1 - 0.4).abs() < 1e-15);
        let df = regression_points(&pts, "c", &labor, RegressionMode::Diff, Orientation::BiasOnLabor);
        assert_eq!(df.len(), 2);
        assert!((df[1].1 + 0.2).abs() < 1e-12);
        let sw = regression_points(&pts, "c", &labor, RegressionMode::Levels, Orientation::LaborOnBias);
        assert_eq!(sw[0], (lv[0].1, lv[0].0));
    }
}
