//! Corpus ingestion: loading dated documents, sentence splitting,
//! tokenization, gender tagging, and time slicing.
//!
//! Everything after loading is a pure per-document function, so the
//! histogram builder fans documents out over the rayon pool and merges
//! partial histograms. Count merging is associative and commutative, which
//! makes the result independent of the worker count.

use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader};
use std::path::Path;
use std::str::FromStr;

use chrono::NaiveDate;
use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::wlor::LexicalHistogram;

/// Calendar date of a document. Only the year is mandatory.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct DocDate {
    pub year: i32,
    pub month: Option<u32>,
    pub day: Option<u32>,
}

impl DocDate {
    pub fn year(year: i32) -> Self {
        DocDate {
            year,
            month: None,
            day: None,
        }
    }

    /// Parses `YYYY`, `YYYY-MM` or a full ISO-8601 `YYYY-MM-DD` date.
    pub fn parse(s: &str) -> Option<Self> {
        let s = s.trim();
        let parts: Vec<&str> = s.split('-').collect();
        let year_str = parts.first()?;
        if year_str.len() != 4 || !year_str.bytes().all(|b| b.is_ascii_digit()) {
            return None;
        }
        let year: i32 = year_str.parse().ok()?;
        match parts.len() {
            1 => Some(DocDate::year(year)),
            2 => {
                let month: u32 = parts[1].parse().ok()?;
                (1..=12).contains(&month).then_some(DocDate {
                    year,
                    month: Some(month),
                    day: None,
                })
            }
            3 => {
                let date = NaiveDate::parse_from_str(s, "%Y-%m-%d").ok()?;
                Some(DocDate {
                    year,
                    month: Some(chrono::Datelike::month(&date)),
                    day: Some(chrono::Datelike::day(&date)),
                })
            }
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    /// `None` for plain-text files without a year prefix. Such documents
    /// take part in whole-corpus runs but never in time slices.
    pub date: Option<DocDate>,
    pub text: String,
}

impl Document {
    pub fn new(id: impl Into<String>, date: Option<DocDate>, text: impl Into<String>) -> Self {
        Document {
            id: id.into(),
            date,
            text: text.into(),
        }
    }

    pub fn year(&self) -> Option<i32> {
        self.date.map(|d| d.year)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GenderTag {
    Male,
    Female,
    Mixed,
    Neutral,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sentence {
    pub doc_id: String,
    pub text: String,
    pub tokens: Vec<String>,
    pub tag: GenderTag,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorpusFormat {
    Jsonl,
    PlainDir,
}

impl FromStr for CorpusFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "jsonl" => Ok(CorpusFormat::Jsonl),
            "plain_dir" | "plain-dir" => Ok(CorpusFormat::PlainDir),
            other => Err(Error::InvalidArgument(format!(
                "unknown corpus format {other:?} (expected jsonl or plain_dir)"
            ))),
        }
    }
}

impl fmt::Display for CorpusFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CorpusFormat::Jsonl => f.write_str("jsonl"),
            CorpusFormat::PlainDir => f.write_str("plain_dir"),
        }
    }
}

/// Result of [`load_documents`], with the skip counters for the summary.
#[derive(Debug, Clone, Default)]
pub struct LoadedCorpus {
    pub documents: Vec<Document>,
    /// Records whose date could not be parsed.
    pub skipped_dates: usize,
    /// Lines that were not valid records at all.
    pub malformed: usize,
}

#[derive(Deserialize)]
struct CaseRecord {
    id: serde_json::Value,
    decision_date: String,
    casebody: CaseBody,
}

#[derive(Deserialize)]
struct CaseBody {
    data: String,
}

/// Loads a corpus from a CAP-shaped JSONL file or a directory of `.txt` files.
pub fn load_documents(path: &Path, format: CorpusFormat) -> Result<LoadedCorpus> {
    match format {
        CorpusFormat::Jsonl => load_jsonl(path),
        CorpusFormat::PlainDir => load_plain_dir(path),
    }
}

fn load_jsonl(path: &Path) -> Result<LoadedCorpus> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::new(file);
    let mut out = LoadedCorpus::default();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: CaseRecord = match serde_json::from_str(&line) {
            Ok(r) => r,
            Err(e) => {
                warn!("{}:{line_no}: malformed record skipped: {e}", path.display());
                out.malformed += 1;
                continue;
            }
        };
        let id = match record.id {
            serde_json::Value::String(s) => s,
            serde_json::Value::Number(n) => n.to_string(),
            _ => String::new(),
        };
        if id.is_empty() {
            warn!("{}:{line_no}: record without id skipped", path.display());
            out.malformed += 1;
            continue;
        }
        match DocDate::parse(&record.decision_date) {
            Some(date) => out
                .documents
                .push(Document::new(id, Some(date), record.casebody.data)),
            None => {
                warn!(
                    "{}:{line_no}: unparseable decision_date {:?}, record skipped",
                    path.display(),
                    record.decision_date
                );
                out.skipped_dates += 1;
            }
        }
    }
    Ok(out)
}

fn load_plain_dir(path: &Path) -> Result<LoadedCorpus> {
    let entries = fs::read_dir(path).map_err(|e| Error::io(path, e))?;
    let mut files = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(path, e))?;
        let p = entry.path();
        if p.is_file() && p.extension().is_some_and(|e| e == "txt") {
            files.push(p);
        }
    }
    files.sort();
    let mut out = LoadedCorpus::default();
    for file in files {
        let bytes = fs::read(&file).map_err(|e| Error::io(&file, e))?;
        let text = String::from_utf8_lossy(&bytes).into_owned();
        let stem = file
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        let date = year_prefix(&stem).map(DocDate::year);
        out.documents.push(Document::new(stem, date, text));
    }
    Ok(out)
}

fn year_prefix(stem: &str) -> Option<i32> {
    let bytes = stem.as_bytes();
    if bytes.len() < 4 || !bytes[..4].iter().all(u8::is_ascii_digit) {
        return None;
    }
    if bytes.get(4).is_some_and(u8::is_ascii_digit) {
        return None;
    }
    stem[..4].parse().ok()
}

/// Lowercases and splits on every non-alphabetic character, dropping
/// fragments shorter than two characters.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphabetic())
        .filter(|t| t.chars().count() >= 2)
        .map(str::to_lowercase)
        .collect()
}

/// Splits on `.`, `?` or `!` followed by whitespace or end of text.
///
/// Abbreviations such as "Mr. Smith" produce spurious breaks; downstream
/// statistics are bag-of-words, so this is tolerated.
pub fn split_sentences(doc: &Document) -> Vec<Sentence> {
    let mut sentences = Vec::new();
    let mut start = 0;
    let mut chars = doc.text.char_indices().peekable();
    while let Some((i, c)) = chars.next() {
        if matches!(c, '.' | '?' | '!') {
            let at_boundary = match chars.peek() {
                None => true,
                Some((_, next)) => next.is_whitespace(),
            };
            if at_boundary {
                let end = i + c.len_utf8();
                push_sentence(&mut sentences, &doc.id, &doc.text[start..end]);
                start = end;
            }
        }
    }
    push_sentence(&mut sentences, &doc.id, &doc.text[start..]);
    sentences
}

fn push_sentence(out: &mut Vec<Sentence>, doc_id: &str, raw: &str) {
    let text = raw.trim();
    if text.is_empty() {
        return;
    }
    out.push(Sentence {
        doc_id: doc_id.to_string(),
        text: text.to_string(),
        tokens: tokenize(text),
        tag: GenderTag::Neutral,
    });
}

/// Pronoun and first-name marker sets used to tag sentences.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GenderLexicon {
    male_pronouns: BTreeSet<String>,
    female_pronouns: BTreeSet<String>,
    male_names: BTreeSet<String>,
    female_names: BTreeSet<String>,
    male_markers: HashSet<String>,
    female_markers: HashSet<String>,
}

const DEFAULT_LEXICON: &str = include_str!("../data/gender_lexicon.txt");

impl GenderLexicon {
    pub fn new<I, S>(
        male_pronouns: I,
        female_pronouns: I,
        male_names: I,
        female_names: I,
    ) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let collect = |it: I| -> BTreeSet<String> { it.into_iter().map(Into::into).collect() };
        let sets = [
            ("male_pronouns", collect(male_pronouns)),
            ("female_pronouns", collect(female_pronouns)),
            ("male_names", collect(male_names)),
            ("female_names", collect(female_names)),
        ];
        for (name, set) in &sets {
            for token in set {
                if tokenize(token).as_slice() != std::slice::from_ref(token) {
                    return Err(Error::InvalidArgument(format!(
                        "lexicon entry {token:?} in [{name}] is not a valid token"
                    )));
                }
            }
        }
        for i in 0..sets.len() {
            for j in (i + 1)..sets.len() {
                if let Some(t) = sets[i].1.intersection(&sets[j].1).next() {
                    return Err(Error::InvalidArgument(format!(
                        "lexicon entry {t:?} appears in both [{}] and [{}]",
                        sets[i].0, sets[j].0
                    )));
                }
            }
        }
        let [(_, mp), (_, fp), (_, mn), (_, fnm)] = sets;
        Ok(Self::from_sets(mp, fp, mn, fnm))
    }

    fn from_sets(
        male_pronouns: BTreeSet<String>,
        female_pronouns: BTreeSet<String>,
        male_names: BTreeSet<String>,
        female_names: BTreeSet<String>,
    ) -> Self {
        let male_markers = male_pronouns.iter().chain(&male_names).cloned().collect();
        let female_markers = female_pronouns
            .iter()
            .chain(&female_names)
            .cloned()
            .collect();
        GenderLexicon {
            male_pronouns,
            female_pronouns,
            male_names,
            female_names,
            male_markers,
            female_markers,
        }
    }

    /// The bundled lexicon: English pronouns, gendered titles and common
    /// given names.
    pub fn bundled() -> Self {
        Self::parse(DEFAULT_LEXICON).expect("bundled lexicon is valid")
    }

    /// Parses the four-section lexicon format:
    ///
    /// ```text
    /// [male_pronouns]
    /// he
    /// [female_pronouns]
    /// she
    /// [male_names]
    /// [female_names]
    /// ```
    ///
    /// Blank lines and `#` comments are ignored.
    pub fn parse(text: &str) -> Result<Self> {
        let mut sections: [Vec<String>; 4] = Default::default();
        let mut current: Option<usize> = None;
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if line.starts_with('[') && line.ends_with(']') {
                current = Some(match &line[1..line.len() - 1] {
                    "male_pronouns" => 0,
                    "female_pronouns" => 1,
                    "male_names" => 2,
                    "female_names" => 3,
                    other => {
                        return Err(Error::Parse {
                            line: idx + 1,
                            message: format!("unknown lexicon section [{other}]"),
                        })
                    }
                });
                continue;
            }
            let Some(section) = current else {
                return Err(Error::Parse {
                    line: idx + 1,
                    message: "entry before any section header".into(),
                });
            };
            sections[section].push(line.to_lowercase());
        }
        let [mp, fp, mn, fnm] = sections;
        Self::new(mp, fp, mn, fnm)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// Lexicon with the male and female halves exchanged.
    pub fn swapped(&self) -> Self {
        Self::from_sets(
            self.female_pronouns.clone(),
            self.male_pronouns.clone(),
            self.female_names.clone(),
            self.male_names.clone(),
        )
    }

    pub fn male_pronouns(&self) -> &BTreeSet<String> {
        &self.male_pronouns
    }

    pub fn female_pronouns(&self) -> &BTreeSet<String> {
        &self.female_pronouns
    }

    pub fn male_names(&self) -> &BTreeSet<String> {
        &self.male_names
    }

    pub fn female_names(&self) -> &BTreeSet<String> {
        &self.female_names
    }

    pub fn is_male_marker(&self, token: &str) -> bool {
        self.male_markers.contains(token)
    }

    pub fn is_female_marker(&self, token: &str) -> bool {
        self.female_markers.contains(token)
    }
}

pub fn tag_gender(sentence: &Sentence, lex: &GenderLexicon) -> GenderTag {
    tag_tokens(&sentence.tokens, lex)
}

pub fn tag_tokens<S: AsRef<str>>(tokens: &[S], lex: &GenderLexicon) -> GenderTag {
    let male = tokens.iter().any(|t| lex.is_male_marker(t.as_ref()));
    let female = tokens.iter().any(|t| lex.is_female_marker(t.as_ref()));
    match (male, female) {
        (true, false) => GenderTag::Male,
        (false, true) => GenderTag::Female,
        (true, true) => GenderTag::Mixed,
        (false, false) => GenderTag::Neutral,
    }
}

/// Splits and tags every sentence of a document.
pub fn tagged_sentences(doc: &Document, lex: &GenderLexicon) -> Vec<Sentence> {
    let mut sentences = split_sentences(doc);
    for s in &mut sentences {
        s.tag = tag_gender(s, lex);
    }
    sentences
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TagCounts {
    pub male: usize,
    pub female: usize,
    pub mixed: usize,
    pub neutral: usize,
}

impl TagCounts {
    pub fn total(&self) -> usize {
        self.male + self.female + self.mixed + self.neutral
    }

    fn add(&mut self, tag: GenderTag) {
        match tag {
            GenderTag::Male => self.male += 1,
            GenderTag::Female => self.female += 1,
            GenderTag::Mixed => self.mixed += 1,
            GenderTag::Neutral => self.neutral += 1,
        }
    }

    fn merge(mut self, other: TagCounts) -> Self {
        self.male += other.male;
        self.female += other.female;
        self.mixed += other.mixed;
        self.neutral += other.neutral;
        self
    }
}

/// The three histogram sources: male-subject sentences, female-subject
/// sentences, and the whole corpus as background.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GenderedCorpora {
    pub male: LexicalHistogram,
    pub female: LexicalHistogram,
    pub background: LexicalHistogram,
    pub tags: TagCounts,
}

impl GenderedCorpora {
    fn merge(mut self, other: GenderedCorpora) -> Self {
        self.male.merge(&other.male);
        self.female.merge(&other.female);
        self.background.merge(&other.background);
        self.tags = self.tags.merge(other.tags);
        self
    }

    fn add_sentence(&mut self, s: &Sentence) {
        self.tags.add(s.tag);
        let target = match s.tag {
            GenderTag::Male => Some(&mut self.male),
            GenderTag::Female => Some(&mut self.female),
            GenderTag::Mixed | GenderTag::Neutral => None,
        };
        if let Some(h) = target {
            for t in &s.tokens {
                h.add(t, 1);
            }
        }
        for t in &s.tokens {
            self.background.add(t, 1);
        }
    }
}

/// Builds the male, female and background histograms. Mixed sentences
/// only count towards the background.
pub fn build_gendered_corpora(docs: &[Document], lex: &GenderLexicon) -> GenderedCorpora {
    docs.par_iter()
        .fold(GenderedCorpora::default, |mut acc, doc| {
            for s in tagged_sentences(doc, lex) {
                acc.add_sentence(&s);
            }
            acc
        })
        .reduce(GenderedCorpora::default, GenderedCorpora::merge)
}

/// Token lists of every sentence, in document order, for embedding training.
pub fn corpus_token_lists(docs: &[Document]) -> Vec<Vec<String>> {
    docs.par_iter()
        .map(|d| {
            split_sentences(d)
                .into_iter()
                .map(|s| s.tokens)
                .filter(|t| !t.is_empty())
                .collect::<Vec<_>>()
        })
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusSlice {
    pub start_year: i32,
    /// Inclusive.
    pub end_year: i32,
    pub documents: Vec<Document>,
}

/// Cuts `[start, end]` into consecutive `years_per_slice`-year windows, the
/// last one truncated at `end`. Undated and out-of-range documents are dropped.
pub fn slice_by_period(
    docs: &[Document],
    years_per_slice: u32,
    start: i32,
    end: i32,
) -> Result<Vec<CorpusSlice>> {
    if years_per_slice == 0 {
        return Err(Error::InvalidArgument("years_per_slice must be >= 1".into()));
    }
    if start > end {
        return Err(Error::InvalidArgument(format!(
            "slice range start {start} is after end {end}"
        )));
    }
    let width = years_per_slice as i32;
    let mut slices: Vec<CorpusSlice> = (start..=end)
        .step_by(years_per_slice as usize)
        .map(|s| CorpusSlice {
            start_year: s,
            end_year: (s + width - 1).min(end),
            documents: Vec::new(),
        })
        .collect();
    for doc in docs {
        let Some(year) = doc.year() else { continue };
        if year < start || year > end {
            continue;
        }
        let idx = ((year - start) / width) as usize;
        slices[idx].documents.push(doc.clone());
    }
    Ok(slices)
}
