//! Property tests over randomly generated inputs.

mod common;

use std::collections::HashMap;

use lexbias::clustering::BiasCategory;
use lexbias::embedding::Embedding;
use lexbias::ingest::{
    build_gendered_corpora, slice_by_period, split_sentences, tagged_sentences, tokenize, DocDate, Document,
    GenderLexicon,
};
use lexbias::temporal::ols_regress;
use lexbias::weat::{base_pair_stability, bias_score, classify, significance_model, word_slant, Direction, GenderPairSet};
use lexbias::wlor::{wlor_scores, LexicalHistogram, PriorConfig};
use proptest::prelude::*;

fn small_lexicon() -> GenderLexicon {
    GenderLexicon::new(
        vec!["he", "him", "his"],
        vec!["she", "her", "hers"],
        vec!["john", "paul"],
        vec!["mary", "ruth"],
    )
    .unwrap()
}

const WORDS: [&str; 16] = [
    "he", "she", "him", "her", "john", "mary", "paul", "ruth", "court", "office", "home", "salary", "child",
    "appeal", "ruled", "x",
];

fn arb_text() -> impl Strategy<Value = String> {
    let word = prop::sample::select(WORDS.to_vec());
    let punct = prop::sample::select(vec![" ", " ", " ", ". ", "! ", "? ", ", ", "-", "3"]);
    prop::collection::vec((word, punct), 0..40).prop_map(|v| v.into_iter().map(|(w, p)| format!("{w}{p}")).collect())
}

fn arb_docs() -> impl Strategy<Value = Vec<Document>> {
    prop::collection::vec((arb_text(), prop::option::of(1900i32..1960)), 0..12).prop_map(|v| {
        v.into_iter()
            .enumerate()
            .map(|(i, (t, y))| Document::new(format!("d{i}"), y.map(DocDate::year), t))
            .collect()
    })
}

proptest! {
    #[test]
    fn tokenize_is_idempotent(text in "\\PC{0,80}") {
        let once = tokenize(&text);
        prop_assert_eq!(tokenize(&once.join(" ")), once);
    }

    #[test]
    fn corpus_accounting(docs in arb_docs()) {
        let lex = small_lexicon();
        let c = build_gendered_corpora(&docs, &lex);
        let sentences: usize = docs.iter().map(|d| split_sentences(d).len()).sum();
        prop_assert_eq!(c.tags.total(), sentences);
        let tokens: u64 = docs.iter().flat_map(split_sentences).map(|s| s.tokens.len() as u64).sum();
        prop_assert_eq!(c.background.total(), tokens);
        prop_assert!(c.male.total() + c.female.total() <= c.background.total());
    }

    #[test]
    fn lexicon_swap_swaps_histograms(docs in arb_docs()) {
        let lex = small_lexicon();
        let a = build_gendered_corpora(&docs, &lex);
        let b = build_gendered_corpora(&docs, &lex.swapped());
        prop_assert_eq!(&a.male, &b.female);
        prop_assert_eq!(&a.female, &b.male);
        prop_assert_eq!(&a.background, &b.background);
    }

    #[test]
    fn slices_partition_in_range_documents(docs in arb_docs(), width in 1u32..15, start in 1895i32..1930, span in 0i32..40) {
        let end = start + span;
        let slices = slice_by_period(&docs, width, start, end).unwrap();
        let mut seen: Vec<&str> = slices.iter().flat_map(|s| s.documents.iter().map(|d| d.id.as_str())).collect();
        seen.sort_unstable();
        let mut expected: Vec<&str> = docs
            .iter()
            .filter(|d| d.year().is_some_and(|y| (start..=end).contains(&y)))
            .map(|d| d.id.as_str())
            .collect();
        expected.sort_unstable();
        prop_assert_eq!(seen, expected);
        for w in slices.windows(2) {
            prop_assert_eq!(w[0].end_year + 1, w[1].start_year);
        }
        prop_assert_eq!(slices.first().unwrap().start_year, start);
        prop_assert_eq!(slices.last().unwrap().end_year, end);
    }

    #[test]
    fn tags_follow_marker_rule(text in arb_text()) {
        let lex = small_lexicon();
        let doc = Document::new("d", None, text);
        for s in tagged_sentences(&doc, &lex) {
            let m = s.tokens.iter().any(|t| lex.is_male_marker(t));
            let f = s.tokens.iter().any(|t| lex.is_female_marker(t));
            let want = match (m, f) {
                (true, false) => lexbias::ingest::GenderTag::Male,
                (false, true) => lexbias::ingest::GenderTag::Female,
                (true, true) => lexbias::ingest::GenderTag::Mixed,
                (false, false) => lexbias::ingest::GenderTag::Neutral,
            };
            prop_assert_eq!(s.tag, want);
        }
    }
}

#[test]
fn histograms_do_not_depend_on_worker_count() {
    let docs = common::planted_corpus(5, 2000, 0.8, 1950).docs;
    let lex = GenderLexicon::bundled();
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| build_gendered_corpora(&docs, &lex))
    };
    let one = run(1);
    for threads in [2, 3, 8] {
        let many = run(threads);
        assert_eq!(one.male, many.male);
        assert_eq!(one.female, many.female);
        assert_eq!(one.background, many.background);
        assert_eq!(one.tags, many.tags);
    }
}

fn arb_hist() -> impl Strategy<Value = LexicalHistogram> {
    prop::collection::btree_map(prop::sample::select(vec!["a", "b", "c", "d", "e", "f"]), 1u64..100, 0..6)
        .prop_map(|m| m.into_iter().collect())
}

proptest! {
    #[test]
    fn wlor_scores_are_finite(x in arb_hist(), y in arb_hist(), z in arb_hist()) {
        if let Ok(entries) = wlor_scores(&x, &y, &z, &PriorConfig::default()) {
            for e in entries {
                prop_assert!(e.z.is_finite() && e.delta.is_finite());
            }
        }
    }

    #[test]
    fn equal_counts_equal_totals_give_zero_delta(c in 1u64..50, other in 1u64..50, zc in 0u64..50) {
        let x: LexicalHistogram = [("w", c), ("o", other)].into_iter().collect();
        let y: LexicalHistogram = [("w", c), ("p", other)].into_iter().collect();
        let z: LexicalHistogram = [("w", zc + 1), ("o", 3), ("p", 3)].into_iter().collect();
        let e = wlor_scores(&x, &y, &z, &PriorConfig::default()).unwrap();
        let w = e.iter().find(|e| e.word == "w").unwrap();
        prop_assert_eq!(w.delta, 0.0);
    }
}

fn arb_embedding() -> impl Strategy<Value = Embedding> {
    let n = 12;
    (prop::collection::vec(prop::collection::vec(-1.0f64..1.0, 5), n + 4), prop::collection::vec(1u64..100, n + 4))
        .prop_filter("non-zero rows", |(rows, _)| rows.iter().all(|r| r.iter().any(|x| x.abs() > 1e-3)))
        .prop_map(move |(rows, freqs)| {
            let mut words: Vec<String> = (0..n).map(|i| format!("t{i}")).collect();
            words.extend(["he", "she", "him", "her"].map(String::from));
            let freq: HashMap<String, u64> = words.iter().cloned().zip(freqs).collect();
            Embedding::from_rows(words.into_iter().zip(rows)).unwrap().with_frequencies(&freq).unwrap()
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn pair_swap_negates_and_preserves_verdicts(emb in arb_embedding()) {
        let gp = GenderPairSet::from_strs(&[("he", "she"), ("him", "her")]).unwrap();
        let sw = gp.swapped();
        let cat = BiasCategory::manual("c", ["t0", "t3", "t6", "t9"]);
        for w in ["t0", "t1", "t2"] {
            prop_assert_eq!(word_slant(&emb, w, &gp).unwrap(), -word_slant(&emb, w, &sw).unwrap());
        }
        let (Ok(m), Ok(ms)) = (significance_model(&emb, &gp, 100), significance_model(&emb, &sw, 100)) else {
            return Ok(());
        };
        prop_assert!((m.mean + ms.mean).abs() < 1e-15);
        prop_assert!((m.std - ms.std).abs() < 1e-15);
        let r = bias_score(&emb, &cat, &gp).unwrap();
        let rs = bias_score(&emb, &cat, &sw).unwrap();
        prop_assert_eq!(r.bias, -rs.bias);
        let flipped = match r.direction {
            Direction::Male => Direction::Female,
            Direction::Female => Direction::Male,
            Direction::None => Direction::None,
        };
        prop_assert_eq!(rs.direction, flipped);
        prop_assert_eq!(classify(&r, &m), classify(&rs, &ms));
    }

    #[test]
    fn uniform_scaling_changes_nothing(emb in arb_embedding(), k in 0.01f64..100.0) {
        let gp = GenderPairSet::from_strs(&[("he", "she"), ("him", "her")]).unwrap();
        let cat = BiasCategory::manual("c", ["t1", "t4", "t7"]);
        let scaled = emb.scaled(k);
        let Ok(m) = significance_model(&emb, &gp, 100) else { return Ok(()) };
        let mk = significance_model(&scaled, &gp, 100).unwrap();
        let r = bias_score(&emb, &cat, &gp).unwrap();
        let rk = bias_score(&scaled, &cat, &gp).unwrap();
        prop_assert!((r.bias - rk.bias).abs() < 1e-12);
        prop_assert_eq!(r.direction, rk.direction);
        if ((r.bias - m.mean).abs() - m.std).abs() > 1e-9 {
            prop_assert_eq!(classify(&r, &m), classify(&rk, &mk));
        }
        let s = base_pair_stability(&emb, &cat, &gp, &m).unwrap();
        let sk = base_pair_stability(&scaled, &cat, &gp, &mk).unwrap();
        prop_assert_eq!(s.direction_consistency_rate, sk.direction_consistency_rate);
    }

    #[test]
    fn single_pair_is_always_direction_stable(emb in arb_embedding()) {
        let gp = GenderPairSet::from_strs(&[("him", "she")]).unwrap();
        let cat = BiasCategory::manual("c", ["t0", "t5", "t11"]);
        let Ok(m) = significance_model(&emb, &gp, 100) else { return Ok(()) };
        prop_assert_eq!(base_pair_stability(&emb, &cat, &gp, &m).unwrap().direction_consistency_rate, 1.0);
    }
}

fn arb_points() -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((-50.0f64..50.0, -50.0f64..50.0), 3..30)
        .prop_filter("spread in x", |p| {
            let lo = p.iter().map(|q| q.0).fold(f64::INFINITY, f64::min);
            let hi = p.iter().map(|q| q.0).fold(f64::NEG_INFINITY, f64::max);
            hi - lo > 1.0
        })
}

proptest! {
    #[test]
    fn ols_scales_with_y(pts in arb_points(), c in prop_oneof![0.1f64..10.0, -10.0f64..-0.1]) {
        let r = ols_regress(&pts).unwrap();
        let scaled: Vec<(f64, f64)> = pts.iter().map(|&(x, y)| (x, c * y)).collect();
        let rs = ols_regress(&scaled).unwrap();
        let tol = |a: f64| 1e-10 * a.abs().max(1.0);
        prop_assert!((rs.slope - c * r.slope).abs() < tol(c * r.slope));
        prop_assert!((rs.intercept - c * r.intercept).abs() < tol(c * r.intercept));
        prop_assert!((rs.r_squared - r.r_squared).abs() < 1e-10);
        prop_assert!((rs.p_value - r.p_value).abs() < 1e-10);
    }

    #[test]
    fn ols_x_shift_moves_only_intercept(pts in arb_points(), dx in -100.0f64..100.0) {
        let r = ols_regress(&pts).unwrap();
        let shifted: Vec<(f64, f64)> = pts.iter().map(|&(x, y)| (x + dx, y)).collect();
        let rs = ols_regress(&shifted).unwrap();
        prop_assert!((rs.slope - r.slope).abs() < 1e-10 * r.slope.abs().max(1.0));
        prop_assert!((rs.r_squared - r.r_squared).abs() < 1e-10);
        prop_assert!((rs.p_value - r.p_value).abs() < 1e-10);
        prop_assert!((rs.intercept - (r.intercept - r.slope * dx)).abs() < 1e-8 * r.intercept.abs().max(1.0));
    }

    #[test]
    fn ols_r_squared_and_p_are_in_range(pts in arb_points()) {
        let r = ols_regress(&pts).unwrap();
        prop_assert!((0.0..=1.0).contains(&r.r_squared));
        prop_assert!((0.0..=1.0).contains(&r.p_value));
    }

    #[test]
    fn t_tail_symmetry(t in -30.0f64..30.0, df in 1u64..500) {
        let s = lexbias::special::student_t_sf(t, df).unwrap() + lexbias::special::student_t_sf(-t, df).unwrap();
        prop_assert!((s - 1.0).abs() < 1e-12);
    }
}
