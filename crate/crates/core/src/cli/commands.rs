use std::collections::{BTreeSet, HashSet};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use log::{info, warn};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use super::{CliError, CliResult};
use crate::clustering::{filter_gendered_clusters, kmeans, write_cluster_report, BiasCategory};
use crate::embedding::{export_embedding, import_embedding, train_skipgram, Embedding, TrainReport};
use crate::error::Error;
use crate::fixtures;
use crate::ingest::{build_gendered_corpora, corpus_token_lists, load_documents, Document, GenderLexicon, GenderedCorpora, TagCounts};
use crate::plot::{emit_plot, timeline_plot_series};
use crate::temporal::{
    ols_regress, regression_points, run_timeline, write_timeline_csv, CategoryMethod, LaborSeries, Orientation,
    PairSource, RegressionMode, Timeline, TimelineConfig,
};
use crate::weat::{
    base_pair_stability, bias_score, derive_base_pairs, significance_model, GenderPairSet, StabilityReport,
    WeatReport,
};
use crate::wlor::{
    bundled_exclusions, parse_exclusions, read_theming, sort_by_z_desc, top_gendered, wlor_scores, write_theming,
    write_wlor_report, GenderedWordSets, LexicalHistogram,
};

pub const HIST_MALE: &str = "hist_male.csv";
pub const HIST_FEMALE: &str = "hist_female.csv";
pub const HIST_BACKGROUND: &str = "hist_background.csv";
pub const INGEST_JSON: &str = "ingest.json";
pub const WLOR_CSV: &str = "wlor.csv";
pub const GENDERED_JSON: &str = "gendered_words.json";
pub const THEMING_CSV: &str = "theming.csv";
pub const BASE_PAIRS_JSON: &str = "base_pairs.json";
pub const EMBEDDING_TXT: &str = "embedding.txt";
pub const EMBEDDING_FREQ: &str = "embedding.freq.csv";
pub const EMBED_JSON: &str = "embed.json";
pub const CLUSTERS_CSV: &str = "clusters.csv";
pub const CATEGORIES_JSON: &str = "categories.json";
pub const WEAT_JSON: &str = "weat.json";
pub const STABILITY_JSON: &str = "stability.json";
pub const TIMELINE_CSV: &str = "timeline.csv";
pub const TIMELINE_JSON: &str = "timeline.json";
pub const REGRESSION_JSON: &str = "regression.json";
pub const TIMELINE_SVG: &str = "timeline.svg";
pub const REPORT_JSON: &str = "report.json";

/// Run context shared by every subcommand.
pub struct Ctx {
    pub cfg: RunConfig,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub config_sha256: String,
    pub seed: u64,
    pub version: String,
}

impl Provenance {
    fn footer(&self) -> String {
        format!(
            "# provenance: config_sha256={}, seed={}, version={}\n",
            self.config_sha256, self.seed, self.version
        )
    }
}

impl Ctx {
    pub fn new(cfg: RunConfig) -> Self {
        let provenance = Provenance {
            config_sha256: cfg.hash(),
            seed: cfg.seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
        };
        Ctx { cfg, provenance }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.cfg.out.join(name)
    }

    fn ensure_out(&self) -> CliResult<()> {
        fs::create_dir_all(&self.cfg.out).map_err(|e| Error::io(&self.cfg.out, e))?;
        Ok(())
    }

    /// Writes a CSV report produced by `body`, then the provenance footer.
    fn write_csv(&self, name: &str, body: impl FnOnce(&mut Vec<u8>) -> crate::Result<()>) -> CliResult<()> {
        let mut buf = Vec::new();
        body(&mut buf)?;
        buf.extend_from_slice(self.provenance.footer().as_bytes());
        let path = self.path(name);
        fs::write(&path, buf).map_err(|e| Error::io(&path, e))?;
        info!("wrote {}", path.display());
        Ok(())
    }

    fn write_json<T: Serialize>(&self, name: &str, body: &T) -> CliResult<()> {
        let mut value = serde_json::to_value(body).map_err(Error::from)?;
        let obj = value
            .as_object_mut()
            .expect("report bodies serialize to JSON objects");
        obj.insert(
            "provenance".into(),
            serde_json::to_value(&self.provenance).map_err(Error::from)?,
        );
        let mut text = serde_json::to_string_pretty(&value).map_err(Error::from)?;
        text.push('\n');
        let path = self.path(name);
        fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        info!("wrote {}", path.display());
        Ok(())
    }

    fn read_json<T: DeserializeOwned>(&self, name: &str, hint: &str) -> CliResult<T> {
        let path = self.path(name);
        let text = fs::read_to_string(&path).map_err(|_| {
            CliError::Data(format!("{} not found; {hint}", path.display()))
        })?;
        Ok(serde_json::from_str(&text).map_err(Error::from)?)
    }

    fn corpus(&self) -> CliResult<Vec<Document>> {
        let path = self.cfg.corpus.as_ref().ok_or_else(|| {
            CliError::Data("no corpus configured; pass --corpus or set `corpus` in the config file".into())
        })?;
        let loaded = load_documents(path, self.cfg.corpus_format()?)?;
        if loaded.skipped_dates > 0 {
            warn!("{} records skipped for unparseable dates", loaded.skipped_dates);
        }
        if loaded.malformed > 0 {
            warn!("{} malformed records skipped", loaded.malformed);
        }
        if loaded.documents.is_empty() {
            return Err(CliError::Data(format!("corpus {} contains no documents", path.display())));
        }
        Ok(loaded.documents)
    }

    fn lexicon(&self) -> CliResult<GenderLexicon> {
        Ok(match &self.cfg.lexicon {
            Some(p) => GenderLexicon::load(p)?,
            None => GenderLexicon::bundled(),
        })
    }

    fn exclusions(&self) -> CliResult<HashSet<String>> {
        Ok(match &self.cfg.exclusions {
            Some(p) => parse_exclusions(&fs::read_to_string(p).map_err(|e| Error::io(p, e))?),
            None => bundled_exclusions(),
        })
    }

    fn embedding(&self) -> CliResult<Embedding> {
        let path = self.path(EMBEDDING_TXT);
        if !path.exists() {
            return Err(CliError::Data(format!(
                "no embedding at {}; run `lexbias embed train` or `lexbias embed import <file>` first",
                path.display()
            )));
        }
        let freq = self.path(EMBEDDING_FREQ);
        let freq = freq.exists().then_some(freq);
        Ok(import_embedding(&path, freq.as_deref())?)
    }

    fn gendered_sets(&self) -> CliResult<GenderedWordSets> {
        self.read_json(GENDERED_JSON, "run `lexbias wlor` first")
    }
}

#[derive(Serialize)]
struct IngestSummary {
    documents: usize,
    dated: usize,
    first_year: Option<i32>,
    last_year: Option<i32>,
    sentences: TagCounts,
    tokens_male: u64,
    tokens_female: u64,
    tokens_background: u64,
    vocab_male: usize,
    vocab_female: usize,
    vocab_background: usize,
}

fn ingest_stage(ctx: &Ctx) -> CliResult<GenderedCorpora> {
    let docs = ctx.corpus()?;
    let lex = ctx.lexicon()?;
    let corpora = build_gendered_corpora(&docs, &lex);
    let years: Vec<i32> = docs.iter().filter_map(|d| d.year()).collect();
    let summary = IngestSummary {
        documents: docs.len(),
        dated: years.len(),
        first_year: years.iter().copied().min(),
        last_year: years.iter().copied().max(),
        sentences: corpora.tags,
        tokens_male: corpora.male.total(),
        tokens_female: corpora.female.total(),
        tokens_background: corpora.background.total(),
        vocab_male: corpora.male.len(),
        vocab_female: corpora.female.len(),
        vocab_background: corpora.background.len(),
    };
    ctx.ensure_out()?;
    for (name, h) in [
        (HIST_MALE, &corpora.male),
        (HIST_FEMALE, &corpora.female),
        (HIST_BACKGROUND, &corpora.background),
    ] {
        ctx.write_csv(name, |buf| h.write_csv(buf))?;
    }
    ctx.write_json(INGEST_JSON, &summary)?;
    println!(
        "{} documents; sentences male={} female={} mixed={} neutral={}",
        summary.documents, corpora.tags.male, corpora.tags.female, corpora.tags.mixed, corpora.tags.neutral
    );
    Ok(corpora)
}

pub fn ingest(ctx: &Ctx) -> CliResult<()> {
    ingest_stage(ctx).map(|_| ())
}

fn read_histogram(ctx: &Ctx, name: &str) -> CliResult<LexicalHistogram> {
    let path = ctx.path(name);
    let file = fs::File::open(&path).map_err(|_| {
        CliError::Data(format!(
            "{} not found; configure a corpus or run `lexbias ingest` first",
            path.display()
        ))
    })?;
    Ok(LexicalHistogram::read_csv(file)?)
}

#[derive(Serialize, Deserialize)]
struct BasePairs {
    pairs: GenderPairSet,
}

pub fn wlor(ctx: &Ctx) -> CliResult<()> {
    let (male, female, background) = if ctx.cfg.corpus.is_some() {
        let c = ingest_stage(ctx)?;
        (c.male, c.female, c.background)
    } else {
        (
            read_histogram(ctx, HIST_MALE)?,
            read_histogram(ctx, HIST_FEMALE)?,
            read_histogram(ctx, HIST_BACKGROUND)?,
        )
    };
    let mut entries = wlor_scores(&male, &female, &background, &ctx.cfg.prior_config())?;
    sort_by_z_desc(&mut entries);
    let sets = top_gendered(&entries, ctx.cfg.k_each, &ctx.exclusions()?)?;
    ctx.ensure_out()?;
    ctx.write_csv(WLOR_CSV, |buf| write_wlor_report(&entries, buf))?;
    ctx.write_json(GENDERED_JSON, &sets)?;
    ctx.write_csv(THEMING_CSV, |buf| write_theming(&sets, buf))?;

    let unfiltered = top_gendered(&entries, ctx.cfg.k_each, &HashSet::new())?;
    match derive_base_pairs(&unfiltered, &fixtures::candidate_pairs(), &fixtures::family_terms()) {
        Ok(pairs) => ctx.write_json(BASE_PAIRS_JSON, &BasePairs { pairs })?,
        Err(e) => {
            warn!("{e}; weat will fall back to the default candidate pairs");
            let _ = fs::remove_file(ctx.path(BASE_PAIRS_JSON));
        }
    }
    println!(
        "{} words scored; {} male-side and {} female-side words kept",
        entries.len(),
        sets.male_words.len(),
        sets.female_words.len()
    );
    Ok(())
}

#[derive(Serialize)]
struct EmbedSummary {
    source: String,
    vocab_size: usize,
    dim: usize,
    has_frequencies: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    training: Option<TrainReport>,
}

fn save_embedding(ctx: &Ctx, emb: &Embedding, source: String, training: Option<TrainReport>) -> CliResult<()> {
    ctx.ensure_out()?;
    let freq = ctx.path(EMBEDDING_FREQ);
    if !emb.has_frequencies() {
        let _ = fs::remove_file(&freq);
    }
    export_embedding(emb, &ctx.path(EMBEDDING_TXT), Some(&freq))?;
    ctx.write_json(
        EMBED_JSON,
        &EmbedSummary {
            source,
            vocab_size: emb.len(),
            dim: emb.dim(),
            has_frequencies: emb.has_frequencies(),
            training,
        },
    )?;
    println!("embedding: {} words x {} dims", emb.len(), emb.dim());
    Ok(())
}

pub fn embed_train(ctx: &Ctx) -> CliResult<()> {
    let docs = ctx.corpus()?;
    let sentences = corpus_token_lists(&docs);
    let (emb, report) = train_skipgram(&sentences, &ctx.cfg.train_config())?;
    save_embedding(ctx, &emb, "sgns".into(), Some(report))
}

pub fn embed_import(ctx: &Ctx, path: &Path, freq: Option<&Path>) -> CliResult<()> {
    let emb = import_embedding(path, freq)?;
    if !emb.has_frequencies() {
        warn!("imported embedding has no frequency counts; significance testing will not be available");
    }
    save_embedding(ctx, &emb, path.display().to_string(), None)
}

#[derive(Serialize, Deserialize)]
struct CategoryFile {
    categories: Vec<BiasCategory>,
}

pub fn cluster(ctx: &Ctx) -> CliResult<()> {
    let emb = ctx.embedding()?;
    let sets = ctx.gendered_sets()?;
    let emb = if ctx.cfg.cluster_gendered_only {
        emb.subset(sets.all_words().map(String::as_str))
    } else {
        emb
    };
    let cs = kmeans(&emb, &ctx.cfg.kmeans_config())?;
    let categories = filter_gendered_clusters(&cs, &sets, ctx.cfg.min_cluster_members);
    ctx.ensure_out()?;
    ctx.write_csv(CLUSTERS_CSV, |buf| write_cluster_report(&cs, &sets, buf))?;
    ctx.write_json(CATEGORIES_JSON, &CategoryFile { categories: categories.clone() })?;
    println!(
        "{} clusters; {} retained with at least {} gendered words",
        cs.k,
        categories.len(),
        ctx.cfg.min_cluster_members
    );
    Ok(())
}

/// Where the categories scored by `weat`, `stability` and `timeline` come from.
#[derive(Debug, Clone, Default)]
pub struct CategorySource {
    pub theming: Option<PathBuf>,
    pub from_clusters: bool,
}

fn resolve_categories(ctx: &Ctx, src: &CategorySource) -> CliResult<Vec<BiasCategory>> {
    if ctx.cfg.fixtures.is_some() {
        return Ok(vec![fixtures::caliskan_employment()]);
    }
    let theming = src.theming.clone().or_else(|| ctx.cfg.categories.clone());
    if let (Some(path), false) = (&theming, src.from_clusters) {
        let sets = ctx.gendered_sets()?;
        let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let imported = read_theming(file, &sets)?;
        if !imported.skipped.is_empty() {
            warn!("{} annotated words are not gendered and were skipped", imported.skipped.len());
        }
        if imported.categories.is_empty() {
            return Err(CliError::Data(format!("{} names no categories", path.display())));
        }
        return Ok(imported.categories);
    }
    let file: CategoryFile = ctx.read_json(
        CATEGORIES_JSON,
        "run `lexbias cluster`, pass --categories <theming.csv>, or use --fixtures caliskan-garg",
    )?;
    if file.categories.is_empty() {
        return Err(CliError::Data(
            "no cluster passed the gendered-member filter; lower min_cluster_members or use manual categories".into(),
        ));
    }
    Ok(file.categories)
}

fn resolve_pairs(ctx: &Ctx, emb: &Embedding) -> CliResult<GenderPairSet> {
    let gp = if ctx.cfg.fixtures.is_some() {
        fixtures::garg_pairs()
    } else if ctx.path(BASE_PAIRS_JSON).exists() {
        ctx.read_json::<BasePairs>(BASE_PAIRS_JSON, "")?.pairs
    } else {
        GenderPairSet::new(fixtures::candidate_pairs())?
    };
    Ok(gp.restrict_to(emb)?)
}

struct Scored {
    pairs: GenderPairSet,
    reports: Vec<WeatReport>,
    stability: Vec<(String, StabilityReport)>,
}

fn score_all(ctx: &Ctx, src: &CategorySource) -> CliResult<Scored> {
    let emb = ctx.embedding()?;
    let categories = resolve_categories(ctx, src)?;
    let pairs = resolve_pairs(ctx, &emb)?;
    let model = significance_model(&emb, &pairs, ctx.cfg.top_n_significance)?;
    let mut reports = Vec::new();
    let mut stability = Vec::new();
    for cat in &categories {
        let result = match bias_score(&emb, cat, &pairs) {
            Ok(r) => r,
            Err(e) => {
                warn!("{e}");
                continue;
            }
        };
        let stab = base_pair_stability(&emb, cat, &pairs, &model)?;
        reports.push(WeatReport::new(&result, &model, &stab));
        stability.push((cat.name.clone(), stab));
    }
    if reports.is_empty() {
        return Err(CliError::Data("no category has a word in the embedding vocabulary".into()));
    }
    Ok(Scored { pairs, reports, stability })
}

#[derive(Serialize)]
struct WeatFile<'a> {
    pairs: &'a GenderPairSet,
    reports: &'a [WeatReport],
}

pub fn weat(ctx: &Ctx, src: &CategorySource) -> CliResult<()> {
    let scored = score_all(ctx, src)?;
    ctx.write_json(
        WEAT_JSON,
        &WeatFile {
            pairs: &scored.pairs,
            reports: &scored.reports,
        },
    )?;
    for r in &scored.reports {
        println!(
            "{}: bias {:+.4} ({:?}, {})",
            r.category,
            r.bias,
            r.direction,
            if r.significant { "significant" } else { "not significant" }
        );
    }
    Ok(())
}

#[derive(Serialize)]
struct StabilityEntry<'a> {
    category: &'a str,
    report: &'a StabilityReport,
}

#[derive(Serialize)]
struct StabilityFile<'a> {
    categories: Vec<StabilityEntry<'a>>,
}

pub fn stability(ctx: &Ctx, src: &CategorySource) -> CliResult<()> {
    let scored = score_all(ctx, src)?;
    let body = StabilityFile {
        categories: scored
            .stability
            .iter()
            .map(|(c, r)| StabilityEntry { category: c, report: r })
            .collect(),
    };
    ctx.write_json(STABILITY_JSON, &body)?;
    for (c, r) in &scored.stability {
        println!(
            "{c}: direction consistency {:.3}, magnitude {}",
            r.direction_consistency_rate,
            if r.magnitude_stable { "stable" } else { "unstable" }
        );
    }
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct TimelineFile {
    #[serde(flatten)]
    timeline: Timeline,
}

#[derive(Serialize, Deserialize)]
struct RegressionEntry {
    category: String,
    mode: RegressionMode,
    orientation: Orientation,
    #[serde(skip_serializing_if = "Option::is_none")]
    slope: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    intercept: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    r_squared: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    p_value: Option<f64>,
    n: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

#[derive(Serialize, Deserialize)]
struct RegressionFile {
    regressions: Vec<RegressionEntry>,
}

fn labor(ctx: &Ctx) -> CliResult<Option<LaborSeries>> {
    match &ctx.cfg.labor_csv {
        None => Ok(None),
        Some(p) => {
            let file = fs::File::open(p).map_err(|e| Error::io(p, e))?;
            Ok(Some(LaborSeries::read_csv(file)?))
        }
    }
}

fn regressions(ctx: &Ctx, timeline: &Timeline, labor: &LaborSeries) -> Vec<RegressionEntry> {
    timeline
        .categories()
        .into_iter()
        .map(|category| {
            let pts = regression_points(&timeline.points, &category, labor, ctx.cfg.mode, ctx.cfg.orientation);
            let mut entry = RegressionEntry {
                category,
                mode: ctx.cfg.mode,
                orientation: ctx.cfg.orientation,
                slope: None,
                intercept: None,
                r_squared: None,
                p_value: None,
                n: pts.len(),
                error: None,
            };
            match ols_regress(&pts) {
                Ok(r) => {
                    entry.slope = Some(r.slope);
                    entry.intercept = Some(r.intercept);
                    entry.r_squared = Some(r.r_squared);
                    entry.p_value = Some(r.p_value);
                }
                Err(e) => entry.error = Some(e.to_string()),
            }
            entry
        })
        .collect()
}

fn plot_timeline(ctx: &Ctx, timeline: &Timeline, labor: Option<&LaborSeries>) -> CliResult<()> {
    let series = timeline_plot_series(&timeline.points, labor);
    let comment = ctx.provenance.footer().trim_start_matches("# ").trim_end().to_string();
    emit_plot(
        &series,
        "gender bias over time",
        Some(&comment),
        &ctx.path(TIMELINE_SVG),
    )?;
    Ok(())
}

pub fn timeline(ctx: &Ctx, src: &CategorySource) -> CliResult<()> {
    let docs = ctx.corpus()?;
    let lex = ctx.lexicon()?;
    let years: BTreeSet<i32> = docs.iter().filter_map(|d| d.year()).collect();
    let (Some(&first), Some(&last)) = (years.first(), years.last()) else {
        return Err(CliError::Data("no document in the corpus carries a date".into()));
    };
    let categories = resolve_categories(ctx, src)?;
    let method = if ctx.cfg.timeline_method == "kmeans" {
        CategoryMethod::Kmeans {
            k: ctx.cfg.kmeans_k,
            min_members: ctx.cfg.min_cluster_members,
            anchors: categories,
        }
    } else {
        CategoryMethod::Manual(categories)
    };
    let pairs = if ctx.cfg.fixtures.is_some() {
        PairSource::Fixed(fixtures::garg_pairs())
    } else {
        PairSource::Derived {
            candidates: fixtures::candidate_pairs(),
            family: fixtures::family_terms().into_iter().collect(),
        }
    };
    let tcfg = TimelineConfig {
        years_per_slice: ctx.cfg.slice_years,
        start_year: ctx.cfg.start_year.unwrap_or(first),
        end_year: ctx.cfg.end_year.unwrap_or(last),
        k_each: ctx.cfg.k_each,
        exclusions: ctx.exclusions()?,
        prior: ctx.cfg.prior_config(),
        train: ctx.cfg.train_config(),
        method,
        pairs,
        top_n_significance: ctx.cfg.top_n_significance,
        sparse_floor: ctx.cfg.sparse_floor,
    };
    let labor = labor(ctx)?;
    let tl = run_timeline(&docs, &lex, &tcfg)?;
    ctx.ensure_out()?;
    ctx.write_csv(TIMELINE_CSV, |buf| write_timeline_csv(&tl.points, buf))?;
    ctx.write_json(TIMELINE_JSON, &TimelineFile { timeline: tl.clone() })?;
    if let Some(labor) = &labor {
        let regs = regressions(ctx, &tl, labor);
        for r in &regs {
            match (r.r_squared, r.p_value, &r.error) {
                (Some(r2), Some(p), _) => println!("{}: R^2 {:.4}, p {:.3e}", r.category, r2, p),
                (_, _, Some(e)) => println!("{}: regression unavailable ({e})", r.category),
                _ => {}
            }
        }
        ctx.write_json(REGRESSION_JSON, &RegressionFile { regressions: regs })?;
    }
    plot_timeline(ctx, &tl, labor.as_ref())?;
    println!("{} slice scores; {} skipped", tl.points.len(), tl.skipped.len());
    Ok(())
}

pub fn report(ctx: &Ctx) -> CliResult<()> {
    let mut body = serde_json::Map::new();
    for (key, name) in [
        ("ingest", INGEST_JSON),
        ("weat", WEAT_JSON),
        ("stability", STABILITY_JSON),
        ("regression", REGRESSION_JSON),
        ("timeline", TIMELINE_JSON),
    ] {
        let path = ctx.path(name);
        if let Ok(text) = fs::read_to_string(&path) {
            let mut v: serde_json::Value = serde_json::from_str(&text).map_err(Error::from)?;
            if let Some(obj) = v.as_object_mut() {
                obj.remove("provenance");
            }
            body.insert(key.into(), v);
        }
    }
    if body.is_empty() {
        return Err(CliError::Data(format!(
            "no reports found in {}; run the pipeline stages first",
            ctx.cfg.out.display()
        )));
    }
    if let Some(serde_json::Value::Object(_)) = body.get("timeline") {
        let tl: TimelineFile = ctx.read_json(TIMELINE_JSON, "")?;
        plot_timeline(ctx, &tl.timeline, labor(ctx)?.as_ref())?;
    }
    let keys: Vec<String> = body.keys().cloned().collect();
    ctx.write_json(REPORT_JSON, &serde_json::Value::Object(body))?;
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "report covers: {}", keys.join(", "));
    Ok(())
}
