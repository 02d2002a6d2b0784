//! Dense word embeddings: storage, cosine similarity, word2vec text I/O and
//! skip-gram negative-sampling training.

mod sgns;
mod text;

use std::collections::HashMap;

use crate::error::{Error, Result};

pub use sgns::{sgns_gradient, sgns_loss, train_skipgram, SgnsGradient, TrainConfig, TrainReport};
pub use text::{
    export_embedding, import_embedding, read_frequency_sidecar, read_word2vec_text,
    write_frequency_sidecar, write_word2vec_text,
};

/// Vocabulary plus a row-major `|V| x dim` matrix. Immutable once built, so
/// it can be shared freely between threads.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    words: Vec<String>,
    index: HashMap<String, usize>,
    vectors: Vec<f64>,
    dim: usize,
    frequency: Option<Vec<u64>>,
}

impl Embedding {
    pub fn new(words: Vec<String>, vectors: Vec<f64>, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("embedding dimension must be >= 1".into()));
        }
        if vectors.len() != words.len() * dim {
            return Err(Error::InvalidArgument(format!(
                "{} values do not fill {} rows of dimension {dim}",
                vectors.len(),
                words.len()
            )));
        }
        let mut index = HashMap::with_capacity(words.len());
        for (i, w) in words.iter().enumerate() {
            if index.insert(w.clone(), i).is_some() {
                return Err(Error::InvalidArgument(format!("duplicate vocabulary word {w:?}")));
            }
        }
        Ok(Embedding {
            words,
            index,
            vectors,
            dim,
            frequency: None,
        })
    }

    /// Builds an embedding from `(word, vector)` rows.
    pub fn from_rows<S: Into<String>>(rows: impl IntoIterator<Item = (S, Vec<f64>)>) -> Result<Self> {
        let mut words = Vec::new();
        let mut vectors = Vec::new();
        let mut dim = None;
        for (w, v) in rows {
            let w = w.into();
            match dim {
                None => dim = Some(v.len()),
                Some(d) if d != v.len() => {
                    return Err(Error::InvalidArgument(format!(
                        "row {w:?} has {} values, expected {d}",
                        v.len()
                    )))
                }
                _ => {}
            }
            words.push(w);
            vectors.extend(v);
        }
        Self::new(words, vectors, dim.unwrap_or(0))
    }

    /// Attaches corpus counts; every vocabulary word needs one.
    pub fn with_frequencies(mut self, counts: &HashMap<String, u64>) -> Result<Self> {
        let mut freq = Vec::with_capacity(self.words.len());
        for w in &self.words {
            match counts.get(w) {
                Some(&c) => freq.push(c),
                None => {
                    return Err(Error::MissingFrequencies(format!(
                        "no count for vocabulary word {w:?}"
                    )))
                }
            }
        }
        self.frequency = Some(freq);
        Ok(self)
    }

    pub(crate) fn set_frequency_vec(&mut self, freq: Vec<u64>) {
        debug_assert_eq!(freq.len(), self.words.len());
        self.frequency = Some(freq);
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn index_of(&self, word: &str) -> Option<usize> {
        self.index.get(word).copied()
    }

    pub fn contains(&self, word: &str) -> bool {
        self.index.contains_key(word)
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.vectors[i * self.dim..(i + 1) * self.dim]
    }

    pub fn vector(&self, word: &str) -> Option<&[f64]> {
        self.index_of(word).map(|i| self.row(i))
    }

    pub(crate) fn lookup(&self, word: &str) -> Result<&[f64]> {
        self.vector(word)
            .ok_or_else(|| Error::OutOfVocabulary(word.to_string()))
    }

    pub fn as_matrix(&self) -> &[f64] {
        &self.vectors
    }

    pub fn has_frequencies(&self) -> bool {
        self.frequency.is_some()
    }

    pub fn frequency(&self, word: &str) -> Option<u64> {
        let f = self.frequency.as_ref()?;
        self.index_of(word).map(|i| f[i])
    }

    pub fn frequencies(&self) -> Option<&[u64]> {
        self.frequency.as_deref()
    }

    /// Up to `n` vocabulary words by descending frequency, ties by word.
    pub fn most_frequent(&self, n: usize) -> Result<Vec<&str>> {
        let freq = self.frequency.as_ref().ok_or_else(|| {
            Error::MissingFrequencies(
                "embedding has no word counts; import it with a frequency sidecar".into(),
            )
        })?;
        let mut order: Vec<usize> = (0..self.words.len()).collect();
        order.sort_by(|&a, &b| freq[b].cmp(&freq[a]).then_with(|| self.words[a].cmp(&self.words[b])));
        order.truncate(n);
        Ok(order.into_iter().map(|i| self.words[i].as_str()).collect())
    }

    /// Applies `f` to every row, keeping vocabulary and frequencies.
    pub fn map_rows(&self, mut f: impl FnMut(&[f64]) -> Vec<f64>) -> Result<Self> {
        let mut vectors = Vec::with_capacity(self.vectors.len());
        let mut dim = None;
        for i in 0..self.len() {
            let row = f(self.row(i));
            if *dim.get_or_insert(row.len()) != row.len() {
                return Err(Error::InvalidArgument("mapped rows differ in length".into()));
            }
            vectors.extend(row);
        }
        let mut out = Embedding::new(self.words.clone(), vectors, dim.unwrap_or(self.dim))?;
        out.frequency = self.frequency.clone();
        Ok(out)
    }

    /// Every vector multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        self.map_rows(|r| r.iter().map(|x| x * factor).collect())
            .expect("scaling keeps the shape")
    }

    /// Sub-embedding over the given words, in the given order. Unknown words
    /// are skipped.
    pub fn subset<'a>(&self, words: impl IntoIterator<Item = &'a str>) -> Self {
        let mut out_words = Vec::new();
        let mut vectors = Vec::new();
        let mut freq = Vec::new();
        for w in words {
            if let Some(i) = self.index_of(w) {
                if out_words.iter().any(|o: &String| o == w) {
                    continue;
                }
                out_words.push(w.to_string());
                vectors.extend_from_slice(self.row(i));
                if let Some(f) = &self.frequency {
                    freq.push(f[i]);
                }
            }
        }
        let mut out = Embedding::new(out_words, vectors, self.dim).expect("rows are unique");
        if self.frequency.is_some() {
            out.frequency = Some(freq);
        }
        out
    }

    /// Vocabulary word with the highest cosine to `word`, excluding itself.
    pub fn nearest_neighbor(&self, word: &str) -> Result<Option<&str>> {
        let target = self.lookup(word)?;
        let mut best: Option<(usize, f64)> = None;
        for i in 0..self.len() {
            if self.words[i] == word {
                continue;
            }
            let Ok(c) = cosine_vectors(target, self.row(i)) else {
                continue;
            };
            if best.is_none_or(|(_, b)| c > b) {
                best = Some((i, c));
            }
        }
        Ok(best.map(|(i, _)| self.words[i].as_str()))
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `u.v / (|u| |v|)`, clamped to `[-1, 1]`.
pub fn cosine_vectors(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::InvalidArgument(format!(
            "vector lengths differ: {} vs {}",
            u.len(),
            v.len()
        )));
    }
    let nu = dot(u, u).sqrt();
    let nv = dot(v, v).sqrt();
    if nu == 0.0 || nv == 0.0 {
        return Err(Error::Numeric("cosine of a zero vector".into()));
    }
    Ok((dot(u, v) / (nu * nv)).clamp(-1.0, 1.0))
}

pub fn cosine(emb: &Embedding, w1: &str, w2: &str) -> Result<f64> {
    let u = emb.lookup(w1)?;
    let v = emb.lookup(w2)?;
    cosine_vectors(u, v).map_err(|e| match e {
        Error::Numeric(_) => Error::Numeric(format!("zero vector among {w1:?}, {w2:?}")),
        other => other,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn emb(rows: &[(&str, &[f64])]) -> Embedding {
        Embedding::from_rows(rows.iter().map(|(w, v)| (w.to_string(), v.to_vec()))).unwrap()
    }

    #[test]
    fn cosine_examples() {
        let e = emb(&[("a", &[1.0, 0.0]), ("b", &[1.0, 0.0]), ("c", &[0.0, 2.0]), ("d", &[1.0, 1.0]), ("z", &[0.0, 0.0])]);
        assert_eq!(cosine(&e, "a", "b").unwrap(), 1.0);
        assert_eq!(cosine(&e, "a", "c").unwrap(), 0.0);
        assert!((cosine(&e, "a", "d").unwrap() - 0.7071).abs() < 1e-4);
        match cosine(&e, "a", "nope") {
            Err(Error::OutOfVocabulary(w)) => assert_eq!(w, "nope"),
            other => panic!("{other:?}"),
        }
        assert!(matches!(cosine(&e, "a", "z"), Err(Error::Numeric(_))));
    }

    #[test]
    fn construction_errors() {
        assert!(Embedding::new(vec!["a".into(), "a".into()], vec![0.0; 2], 1).is_err());
        assert!(Embedding::new(vec!["a".into()], vec![0.0; 2], 1).is_err());
        assert!(Embedding::new(vec![], vec![], 0).is_err());
    }

    #[test]
    fn frequencies_required_for_ranking() {
        let e = emb(&[("a", &[1.0]), ("b", &[2.0]), ("c", &[3.0])]);
        assert!(matches!(e.most_frequent(2), Err(Error::MissingFrequencies(_))));
        let counts: HashMap<String, u64> = [("a", 5), ("b", 9), ("c", 5)]
            .iter()
            .map(|(w, c)| (w.to_string(), *c))
            .collect();
        let e = e.with_frequencies(&counts).unwrap();
        assert_eq!(e.most_frequent(2).unwrap(), vec!["b", "a"]);
        let partial: HashMap<String, u64> = [("a".to_string(), 1)].into_iter().collect();
        assert!(emb(&[("a", &[1.0]), ("b", &[2.0])]).with_frequencies(&partial).is_err());
    }

    #[test]
    fn subset_keeps_order_and_counts() {
        let counts: HashMap<String, u64> = [("a", 1), ("b", 2), ("c", 3)]
            .iter()
            .map(|(w, c)| (w.to_string(), *c))
            .collect();
        let e = emb(&[("a", &[1.0]), ("b", &[2.0]), ("c", &[3.0])]).with_frequencies(&counts).unwrap();
        let s = e.subset(["c", "x", "a"]);
        assert_eq!(s.words(), &["c".to_string(), "a".to_string()]);
        assert_eq!(s.frequency("c"), Some(3));
    }

    /// Random orthogonal matrix via Gram-Schmidt on Gaussian-ish columns.
    fn random_orthogonal(d: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
        let mut basis: Vec<Vec<f64>> = Vec::new();
        while basis.len() < d {
            let mut v: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
            for b in &basis {
                let p = dot(&v, b);
                v.iter_mut().zip(b).for_each(|(x, y)| *x -= p * y);
            }
            let n = dot(&v, &v).sqrt();
            if n > 1e-6 {
                basis.push(v.into_iter().map(|x| x / n).collect());
            }
        }
        basis
    }

    #[test]
    fn rotation_preserves_cosines() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let d = 6;
        let rows: Vec<(String, Vec<f64>)> = (0..15)
            .map(|i| (format!("w{i}"), (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect()))
            .collect();
        let e = Embedding::from_rows(rows).unwrap();
        let q = random_orthogonal(d, &mut rng);
        let rotated = e
            .map_rows(|r| q.iter().map(|qi| dot(qi, r)).collect())
            .unwrap();
        for a in e.words() {
            for b in e.words() {
                let before = cosine(&e, a, b).unwrap();
                let after = cosine(&rotated, a, b).unwrap();
                assert!((before - after).abs() < 1e-9);
            }
        }
    }

    proptest! {
        #[test]
        fn cosine_symmetry_and_scale(
            u in proptest::collection::vec(-5.0f64..5.0, 4),
            v in proptest::collection::vec(-5.0f64..5.0, 4),
            lambda in 0.01f64..100.0,
        ) {
            prop_assume!(dot(&u, &u) > 1e-6 && dot(&v, &v) > 1e-6);
            let su: Vec<f64> = u.iter().map(|x| x * lambda).collect();
            let e = Embedding::from_rows(vec![("u", u), ("v", v), ("su", su)]).unwrap();
            let c = cosine(&e, "u", "v").unwrap();
            prop_assert_eq!(c, cosine(&e, "v", "u").unwrap());
            prop_assert!((-1.0..=1.0).contains(&c));
            prop_assert!((cosine(&e, "u", "su").unwrap() - 1.0).abs() < 1e-12);
        }
    }
}
