//! Published word lists used for the baseline comparison run, plus default
//! candidate base pairs.

use crate::clustering::BiasCategory;
use crate::weat::GenderPairSet;

/// Caliskan et al. (2017) employment attribute words.
pub const CALISKAN_EMPLOYMENT: [&str; 8] = [
    "executive",
    "management",
    "professional",
    "corporation",
    "salary",
    "office",
    "business",
    "career",
];

/// Garg et al. (2018) gender terms, aligned into (male, female) pairs.
/// The male list has one more entry than the female list; "uncles" has no
/// counterpart and is left out.
pub const GARG_PAIRS: [(&str, &str); 19] = [
    ("he", "she"),
    ("son", "daughter"),
    ("his", "hers"),
    ("him", "her"),
    ("father", "mother"),
    ("man", "woman"),
    ("boy", "girl"),
    ("himself", "herself"),
    ("male", "female"),
    ("brother", "sister"),
    ("sons", "daughters"),
    ("fathers", "mothers"),
    ("men", "women"),
    ("boys", "girls"),
    ("males", "females"),
    ("brothers", "sisters"),
    ("uncle", "aunt"),
    ("nephew", "niece"),
    ("nephews", "nieces"),
];

/// Candidate base pairs offered to base-pair derivation.
pub const CANDIDATE_PAIRS: [(&str, &str); 16] = [
    ("he", "she"),
    ("him", "her"),
    ("his", "her"),
    ("his", "hers"),
    ("himself", "herself"),
    ("man", "woman"),
    ("men", "women"),
    ("male", "female"),
    ("males", "females"),
    ("boy", "girl"),
    ("boys", "girls"),
    ("mr", "mrs"),
    ("gentleman", "lady"),
    ("husband", "wife"),
    ("father", "mother"),
    ("son", "daughter"),
];

/// Kinship terms kept out of base pairs.
pub const FAMILY_TERMS: [&str; 28] = [
    "husband", "wife", "husbands", "wives", "father", "mother", "fathers", "mothers", "son",
    "daughter", "sons", "daughters", "brother", "sister", "brothers", "sisters", "uncle", "aunt",
    "nephew", "niece", "grandfather", "grandmother", "widow", "widower", "stepfather",
    "stepmother", "fiance", "fiancee",
];

pub fn caliskan_employment() -> BiasCategory {
    BiasCategory::manual("caliskan_employment", CALISKAN_EMPLOYMENT)
}

pub fn garg_pairs() -> GenderPairSet {
    GenderPairSet::new(GARG_PAIRS.iter().map(|(m, f)| (m.to_string(), f.to_string())).collect())
        .expect("fixture pairs are valid")
}

pub fn candidate_pairs() -> Vec<(String, String)> {
    CANDIDATE_PAIRS
        .iter()
        .map(|(m, f)| (m.to_string(), f.to_string()))
        .collect()
}

pub fn family_terms() -> std::collections::HashSet<String> {
    FAMILY_TERMS.iter().map(|s| s.to_string()).collect()
}
