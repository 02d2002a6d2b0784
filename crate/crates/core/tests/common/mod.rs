//! Synthetic corpora with known, planted gender associations.
#![allow(dead_code)]

use lexbias::ingest::{DocDate, Document, GenderLexicon};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const EMPLOYMENT: [&str; 20] = [
    "salary", "wages", "office", "business", "career", "executive", "management", "professional",
    "corporation", "employer", "payroll", "promotion", "manager", "firm", "commission", "director",
    "engineer", "merchant", "banker", "partnership",
];

pub const FAMILY: [&str; 20] = [
    "child", "children", "home", "household", "marriage", "nursery", "kitchen", "infant", "baby",
    "domestic", "family", "cooking", "sewing", "mother", "wedding", "motherhood", "nanny", "cradle",
    "laundry", "homemaker",
];

pub const PAIRS: [(&str, &str); 3] = [("he", "she"), ("him", "her"), ("his", "hers")];

const SYLLABLES: [&str; 15] = [
    "ba", "ko", "mi", "ru", "te", "lo", "va", "ne", "pi", "su", "da", "fo", "gu", "ze", "ha",
];

/// 225 two-syllable nonsense fillers, none of which is a gender marker.
pub fn fillers() -> Vec<String> {
    let mut out = Vec::new();
    for a in SYLLABLES {
        for b in SYLLABLES {
            out.push(format!("{a}{b}"));
        }
    }
    out
}

fn names(set: &std::collections::BTreeSet<String>, n: usize) -> Vec<String> {
    set.iter().filter(|w| w.len() > 3).take(n).cloned().collect()
}

pub struct Planted {
    pub docs: Vec<Document>,
    pub male_sentences: usize,
    pub female_sentences: usize,
}

/// `n_sentences` sentences, 35% male, 35% female, 30% neutral. A gendered
/// sentence carries one marker and two planted words; each planted word
/// comes from its own side's list with probability `strength` and from the
/// other side's list otherwise (0.5 means no planted association).
pub fn planted_corpus(seed: u64, n_sentences: usize, strength: f64, year: i32) -> Planted {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lex = GenderLexicon::bundled();
    let male_markers: Vec<String> = ["he", "him", "his"]
        .iter()
        .map(|s| s.to_string())
        .chain(names(lex.male_names(), 20))
        .collect();
    let female_markers: Vec<String> = ["she", "her", "hers"]
        .iter()
        .map(|s| s.to_string())
        .chain(names(lex.female_names(), 20))
        .collect();
    let fill = fillers();
    let mut sentences = Vec::with_capacity(n_sentences);
    let (mut nm, mut nf) = (0, 0);
    for _ in 0..n_sentences {
        let r: f64 = rng.gen();
        let mut words: Vec<String> = (0..6).map(|_| fill.choose(&mut rng).unwrap().clone()).collect();
        if r < 0.7 {
            let male = r < 0.35;
            let (markers, own, other) = if male {
                nm += 1;
                (&male_markers, &EMPLOYMENT, &FAMILY)
            } else {
                nf += 1;
                (&female_markers, &FAMILY, &EMPLOYMENT)
            };
            words.insert(0, markers.choose(&mut rng).unwrap().clone());
            for _ in 0..2 {
                let list = if rng.gen::<f64>() < strength { own } else { other };
                let at = rng.gen_range(1..=words.len());
                words.insert(at, list.choose(&mut rng).unwrap().to_string());
            }
        } else {
            words.extend((0..2).map(|_| fill.choose(&mut rng).unwrap().clone()));
        }
        sentences.push(words.join(" ") + ".");
    }
    let docs = sentences
        .chunks(10)
        .enumerate()
        .map(|(i, chunk)| {
            Document::new(
                format!("{year}-{i}"),
                Some(DocDate::year(year)),
                chunk.join(" "),
            )
        })
        .collect();
    Planted {
        docs,
        male_sentences: nm,
        female_sentences: nf,
    }
}

/// Planted strength for each of four consecutive five-year slices.
pub const SHRINKING: [f64; 4] = [1.0, 0.85, 0.7, 0.55];

/// Four slices (1900, 1905, 1910, 1915) whose planted association weakens
/// from slice to slice.
pub fn shrinking_corpus(seed: u64, sentences_per_slice: usize) -> Vec<Document> {
    SHRINKING
        .iter()
        .enumerate()
        .flat_map(|(i, &s)| {
            planted_corpus(seed.wrapping_mul(31).wrapping_add(i as u64), sentences_per_slice, s, 1900 + 5 * i as i32).docs
        })
        .collect()
}

pub fn pair_set() -> lexbias::weat::GenderPairSet {
    lexbias::weat::GenderPairSet::from_strs(&PAIRS).unwrap()
}
