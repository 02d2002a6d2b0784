//! K-Means over embedding vectors (k-means++ seeding, Lloyd iterations) and
//! reduction of the clusters to gendered bias categories.

use std::collections::HashMap;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::embedding::{dot, Embedding};
use crate::error::{Error, Result};
use crate::wlor::{GenderedWordSets, Side};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Manual,
    Kmeans,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Composition {
    pub male: usize,
    pub female: usize,
}

/// A named word list standing for one potential bias.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasCategory {
    pub name: String,
    pub words: Vec<String>,
    pub provenance: Provenance,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_cluster: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub composition: Option<Composition>,
}

impl BiasCategory {
    pub fn manual<S: Into<String>>(name: impl Into<String>, words: impl IntoIterator<Item = S>) -> Self {
        let mut out: Vec<String> = Vec::new();
        for w in words {
            let w = w.into();
            if !out.contains(&w) {
                out.push(w);
            }
        }
        BiasCategory {
            name: name.into(),
            words: out,
            provenance: Provenance::Manual,
            source_cluster: None,
            composition: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KMeansConfig {
    pub k: usize,
    pub seed: u64,
    pub max_iters: usize,
    /// Cluster unit-normalized vectors (spherical behavior).
    pub normalize: bool,
}

impl Default for KMeansConfig {
    fn default() -> Self {
        KMeansConfig {
            k: 300,
            seed: 1,
            max_iters: 100,
            normalize: false,
        }
    }
}

/// Raw Lloyd output over an `n x d` point matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct KMeansFit {
    pub assignments: Vec<usize>,
    /// Row-major `k x d`.
    pub centroids: Vec<f64>,
    pub inertia: f64,
    /// Inertia after every assignment step, followed by the final value.
    pub inertia_history: Vec<f64>,
    pub iterations: usize,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn plus_plus_init(points: &[f64], d: usize, k: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let n = points.len() / d;
    let row = |i: usize| &points[i * d..(i + 1) * d];
    let mut centroids = Vec::with_capacity(k * d);
    let first = rng.gen_range(0..n);
    centroids.extend_from_slice(row(first));
    let mut nearest: Vec<f64> = (0..n).map(|i| sq_dist(row(i), row(first))).collect();
    for _ in 1..k {
        let total: f64 = nearest.iter().sum();
        let pick = if total > 0.0 {
            let mut r = rng.gen::<f64>() * total;
            let mut chosen = n - 1;
            for (i, &w) in nearest.iter().enumerate() {
                if r < w {
                    chosen = i;
                    break;
                }
                r -= w;
            }
            chosen
        } else {
            rng.gen_range(0..n)
        };
        let c = row(pick).to_vec();
        for (i, slot) in nearest.iter_mut().enumerate() {
            *slot = slot.min(sq_dist(row(i), &c));
        }
        centroids.extend(c);
    }
    centroids
}

fn assign(points: &[f64], d: usize, centroids: &[f64]) -> Vec<(usize, f64)> {
    points
        .par_chunks(d)
        .map(|p| {
            let mut best = (0, f64::INFINITY);
            for (j, c) in centroids.chunks(d).enumerate() {
                let dist = sq_dist(p, c);
                if dist < best.1 {
                    best = (j, dist);
                }
            }
            best
        })
        .collect()
}

fn inertia_of(points: &[f64], d: usize, centroids: &[f64], assignments: &[usize]) -> f64 {
    points
        .chunks(d)
        .zip(assignments)
        .map(|(p, &a)| sq_dist(p, &centroids[a * d..(a + 1) * d]))
        .sum()
}

/// K-Means on a row-major point matrix of dimension `d`.
///
/// Deterministic for a fixed seed regardless of thread count: assignment is
/// parallel over points, centroid sums are parallel over clusters, and each
/// sum runs over members in index order.
pub fn kmeans_points(points: &[f64], d: usize, k: usize, seed: u64, max_iters: usize) -> Result<KMeansFit> {
    if d == 0 || points.len() % d != 0 {
        return Err(Error::InvalidArgument("point matrix does not match dimension".into()));
    }
    let n = points.len() / d;
    if k == 0 {
        return Err(Error::InvalidArgument("k must be >= 1".into()));
    }
    if k > n {
        return Err(Error::InvalidArgument(format!("k = {k} exceeds the {n} points to cluster")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = plus_plus_init(points, d, k, &mut rng);
    let mut assignments = vec![usize::MAX; n];
    let mut history = Vec::new();
    let mut iterations = 0;

    for _ in 0..max_iters.max(1) {
        iterations += 1;
        let step = assign(points, d, &centroids);
        history.push(step.iter().map(|s| s.1).sum());
        let changed = step.iter().zip(&assignments).any(|(s, &a)| s.0 != a);
        if !changed {
            break;
        }
        for (a, s) in assignments.iter_mut().zip(&step) {
            *a = s.0;
        }

        let mut members: Vec<Vec<usize>> = vec![Vec::new(); k];
        for (i, &a) in assignments.iter().enumerate() {
            members[a].push(i);
        }
        // An empty cluster takes over the point lying farthest from its own
        // centroid, drawn from clusters that can spare a member.
        for j in 0..k {
            if !members[j].is_empty() {
                continue;
            }
            let donor = (0..n)
                .filter(|&i| members[assignments[i]].len() > 1)
                .max_by(|&a, &b| step[a].1.total_cmp(&step[b].1).then(b.cmp(&a)));
            if let Some(p) = donor {
                members[assignments[p]].retain(|&m| m != p);
                assignments[p] = j;
                members[j].push(p);
            }
        }
        let updated: Vec<Vec<f64>> = members
            .par_iter()
            .enumerate()
            .map(|(j, m)| {
                if m.is_empty() {
                    return centroids[j * d..(j + 1) * d].to_vec();
                }
                let mut sum = vec![0.0; d];
                for &i in m {
                    for (s, x) in sum.iter_mut().zip(&points[i * d..(i + 1) * d]) {
                        *s += x;
                    }
                }
                let len = m.len() as f64;
                sum.into_iter().map(|s| s / len).collect()
            })
            .collect();
        centroids = updated.concat();
    }

    let inertia = inertia_of(points, d, &centroids, &assignments);
    history.push(inertia);
    Ok(KMeansFit {
        assignments,
        centroids,
        inertia,
        inertia_history: history,
        iterations,
    })
}

/// Embedding words partitioned into `k` clusters.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterSet {
    pub k: usize,
    /// Clustered words in lexicographic order.
    pub words: Vec<String>,
    /// `assignments[i]` is the cluster of `words[i]`.
    pub assignments: Vec<usize>,
    pub centroids: Vec<f64>,
    pub dim: usize,
    pub inertia: f64,
    pub inertia_history: Vec<f64>,
}

impl ClusterSet {
    pub fn cluster_of(&self, word: &str) -> Option<usize> {
        self.words
            .binary_search_by(|w| w.as_str().cmp(word))
            .ok()
            .map(|i| self.assignments[i])
    }

    /// Members of every cluster, each in lexicographic order.
    pub fn clusters(&self) -> Vec<Vec<&str>> {
        let mut out = vec![Vec::new(); self.k];
        for (w, &a) in self.words.iter().zip(&self.assignments) {
            out[a].push(w.as_str());
        }
        out
    }
}

/// Clusters the whole embedding vocabulary.
///
/// Words are put in lexicographic order before seeding, so the partition
/// does not depend on the embedding's row order.
pub fn kmeans(emb: &Embedding, cfg: &KMeansConfig) -> Result<ClusterSet> {
    if cfg.k > emb.len() {
        return Err(Error::InvalidArgument(format!(
            "k = {} exceeds vocabulary size {}",
            cfg.k,
            emb.len()
        )));
    }
    let mut order: Vec<usize> = (0..emb.len()).collect();
    order.sort_by(|&a, &b| emb.words()[a].cmp(&emb.words()[b]));
    let d = emb.dim();
    let mut points = Vec::with_capacity(emb.len() * d);
    for &i in &order {
        let row = emb.row(i);
        if cfg.normalize {
            let n = dot(row, row).sqrt();
            points.extend(row.iter().map(|x| if n > 0.0 { x / n } else { 0.0 }));
        } else {
            points.extend_from_slice(row);
        }
    }
    let fit = kmeans_points(&points, d, cfg.k, cfg.seed, cfg.max_iters)?;
    Ok(ClusterSet {
        k: cfg.k,
        words: order.iter().map(|&i| emb.words()[i].clone()).collect(),
        assignments: fit.assignments,
        centroids: fit.centroids,
        dim: d,
        inertia: fit.inertia,
        inertia_history: fit.inertia_history,
    })
}

/// Keeps, for every cluster, the members that are among the top gendered
/// words, and retains the cluster when at least `min_members` remain.
pub fn filter_gendered_clusters(
    cs: &ClusterSet,
    sets: &GenderedWordSets,
    min_members: usize,
) -> Vec<BiasCategory> {
    cs.clusters()
        .into_iter()
        .enumerate()
        .filter_map(|(id, members)| {
            let words: Vec<String> = members
                .into_iter()
                .filter(|w| sets.contains(w))
                .map(str::to_string)
                .collect();
            if words.is_empty() || words.len() < min_members {
                return None;
            }
            let male = words.iter().filter(|w| sets.side(w) == Some(Side::Male)).count();
            Some(BiasCategory {
                name: format!("cluster_{id}"),
                composition: Some(Composition {
                    male,
                    female: words.len() - male,
                }),
                words,
                provenance: Provenance::Kmeans,
                source_cluster: Some(id),
            })
        })
        .collect()
}

/// CSV `word,cluster_id,is_top500,gender_side`, sorted by cluster then word.
pub fn write_cluster_report<W: Write>(cs: &ClusterSet, sets: &GenderedWordSets, w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["word", "cluster_id", "is_top500", "gender_side"])?;
    for (id, members) in cs.clusters().into_iter().enumerate() {
        for word in members {
            let side = match sets.side(word) {
                Some(Side::Male) => "male",
                Some(Side::Female) => "female",
                None => "none",
            };
            out.write_record([
                word,
                &id.to_string(),
                if sets.contains(word) { "true" } else { "false" },
                side,
            ])?;
        }
    }
    out.flush()?;
    Ok(())
}

fn choose2(n: usize) -> f64 {
    (n as f64) * (n as f64 - 1.0) / 2.0
}

/// Adjusted Rand index between two labelings of the same points.
pub fn adjusted_rand_index(a: &[usize], b: &[usize]) -> f64 {
    assert_eq!(a.len(), b.len(), "labelings must cover the same points");
    let n = a.len();
    let mut table: HashMap<(usize, usize), usize> = HashMap::new();
    let mut rows: HashMap<usize, usize> = HashMap::new();
    let mut cols: HashMap<usize, usize> = HashMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *table.entry((x, y)).or_default() += 1;
        *rows.entry(x).or_default() += 1;
        *cols.entry(y).or_default() += 1;
    }
    let index: f64 = table.values().map(|&c| choose2(c)).sum();
    let sum_rows: f64 = rows.values().map(|&c| choose2(c)).sum();
    let sum_cols: f64 = cols.values().map(|&c| choose2(c)).sum();
    let expected = sum_rows * sum_cols / choose2(n);
    let max = 0.5 * (sum_rows + sum_cols);
    if max == expected {
        return if rows.len() == cols.len() && table.len() == rows.len() { 1.0 } else { 0.0 };
    }
    (index - expected) / (max - expected)
}
