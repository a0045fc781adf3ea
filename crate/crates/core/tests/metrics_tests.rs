mod common;

use std::collections::HashSet;

use common::{random_affiliation, record, rng};
use polar_core::corpus::{order_protocols, Gender, SentenceRecord};
use polar_core::metrics::{
    compute_metrics, emotion_word_ratio, extreme_sentences, protocol_metrics, read_metrics, threshold_summary,
    word_set, write_metrics, write_threshold_summary, Group, MetricsConfig, Thresholds,
};
use polar_core::vad::Vad;
use polar_core::Dimension;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;

fn random_sentences(seed: u64, n: usize) -> Vec<SentenceRecord> {
    let mut r = rng(seed);
    (0..n)
        .map(|i| {
            let mut s = record(&format!("s{i:04}"), "C", "p1", "2020-01-01", None);
            s.vad = Some(Vad::new(r.random(), r.random(), r.random()).unwrap());
            s.affiliation = random_affiliation(&mut r);
            s.is_mk = r.random_bool(0.85);
            s.gender = if r.random_bool(0.4) { Gender::Female } else { Gender::Male };
            s
        })
        .collect()
}

/// Textbook statistics of one column: mean, unbiased variance, share above
/// `hi`, share below `lo`.
fn brute(values: &[f64], hi: f64, lo: f64) -> [f64; 4] {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = if values.len() < 2 { 0.0 } else { values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0) };
    let high = values.iter().filter(|&&v| v > hi).count() as f64 / n;
    let low = values.iter().filter(|&&v| v < lo).count() as f64 / n;
    [mean, var, high, low]
}

#[test]
fn single_sentence_statistics() {
    let s = record("x", "C", "p", "2020-01-01", Some((0.8, 0.2, 0.5)));
    let out = protocol_metrics("C", "p", 1, &[&s], &MetricsConfig::default());
    assert_eq!(out.len(), 1);
    let v = out[0].dims[0];
    assert_eq!((v.mean, v.var, v.high, v.low), (0.8, 0.0, 1.0, 0.0));
    assert_eq!(out[0].dims[1].low, 1.0);
    assert_eq!(out[0].dims[2].high + out[0].dims[2].low, 0.0);
}

#[test]
fn threshold_values_are_neither_high_nor_low() {
    let s = record("x", "C", "p", "2020-01-01", Some((0.7, 0.3, 0.7)));
    let out = protocol_metrics("C", "p", 1, &[&s], &MetricsConfig::default());
    for d in out[0].dims {
        assert_eq!(d.high, 0.0);
        assert_eq!(d.low, 0.0);
    }
}

#[test]
fn two_hundred_sentences_match_brute_force() {
    let sentences = random_sentences(17, 200);
    let refs: Vec<&SentenceRecord> = sentences.iter().collect();
    let config = MetricsConfig::default();
    let out = protocol_metrics("C", "p1", 1, &refs, &config);
    let mk: Vec<&SentenceRecord> = sentences.iter().filter(|s| s.is_mk).collect();
    let ratio_g = mk.iter().filter(|s| s.affiliation == polar_core::corpus::Affiliation::Government).count() as f64 / mk.len() as f64;
    let ratio_f = mk.iter().filter(|s| s.gender == Gender::Female).count() as f64 / mk.len() as f64;
    for m in &out {
        let members: Vec<&SentenceRecord> = sentences
            .iter()
            .filter(|s| match m.group {
                Group::All => true,
                Group::Government => s.is_mk && s.affiliation == polar_core::corpus::Affiliation::Government,
                Group::Opposition => s.is_mk && s.affiliation == polar_core::corpus::Affiliation::Opposition,
            })
            .collect();
        assert_eq!(m.n, members.len());
        for dim in Dimension::ALL {
            let values: Vec<f64> = members.iter().map(|s| s.vad.unwrap().get(dim)).collect();
            let want = brute(&values, 0.7, 0.3);
            let d = m.dims[dim.index()];
            for (got, want) in [d.mean, d.var, d.high, d.low].into_iter().zip(want) {
                assert!((got - want).abs() < 1e-12, "{:?} {dim}: {got} vs {want}", m.group);
            }
        }
        assert!((m.ratio_g - ratio_g).abs() < 1e-15);
        assert!((m.ratio_f - ratio_f).abs() < 1e-15);
    }
    assert_eq!(out.len(), 3);
}

#[test]
fn small_groups_are_dropped() {
    let sentences = random_sentences(3, 15);
    let refs: Vec<&SentenceRecord> = sentences.iter().collect();
    let config = MetricsConfig { min_group_n: 100, ..MetricsConfig::default() };
    let out = protocol_metrics("C", "p1", 1, &refs, &config);
    assert_eq!(out.iter().map(|m| m.group).collect::<Vec<_>>(), vec![Group::All]);
    let unscored = record("u", "C", "p", "2020-01-01", None);
    assert!(protocol_metrics("C", "p", 1, &[&unscored], &config).is_empty());
}

#[test]
fn metrics_table_round_trips() {
    let mut sentences = random_sentences(4, 120);
    for (i, s) in sentences.iter_mut().enumerate() {
        s.protocol_id = format!("p{}", i % 4);
        s.date = format!("2020-0{}-01", 1 + i % 4).parse().unwrap();
    }
    let order = order_protocols(&sentences).unwrap();
    let rows = compute_metrics(&sentences, &order, &MetricsConfig::default());
    assert!(rows.windows(2).all(|w| (w[0].time_index, w[0].group) < (w[1].time_index, w[1].group)));
    let mut buf = Vec::new();
    write_metrics(&mut buf, &rows).unwrap();
    assert_eq!(read_metrics(buf.as_slice()).unwrap(), rows);
}

fn sort_oracle(sentences: &[SentenceRecord], dim: Dimension) -> Vec<String> {
    let mut v: Vec<(f64, &str)> = sentences.iter().map(|s| (s.vad.unwrap().get(dim), s.sentence_id.as_str())).collect();
    v.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(b.1)));
    v.into_iter().map(|(_, id)| id.to_string()).collect()
}

#[test]
fn extremes_equal_full_sort_head_and_tail() {
    let mut sentences = random_sentences(21, 1000);
    // Force some score ties.
    for s in sentences.iter_mut().step_by(7) {
        s.vad = Some(Vad::new(0.5, 0.5, 0.5).unwrap());
    }
    let refs: Vec<&SentenceRecord> = sentences.iter().collect();
    for dim in Dimension::ALL {
        let order = sort_oracle(&sentences, dim);
        let e = extreme_sentences("C", &refs, dim, 20);
        assert!(!e.short);
        let top: Vec<String> = e.top.iter().map(|s| s.sentence_id.clone()).collect();
        let bottom: Vec<String> = e.bottom.iter().map(|s| s.sentence_id.clone()).collect();
        assert_eq!(top, order[..20]);
        let tail: Vec<String> = order[980..].iter().rev().cloned().collect();
        assert_eq!(bottom, tail);
        assert!(e.top.windows(2).all(|w| w[0].score >= w[1].score));
        assert!(e.bottom.windows(2).all(|w| w[0].score <= w[1].score));
    }
}

#[test]
fn forty_sentences_split_into_disjoint_halves() {
    let mut sentences = random_sentences(5, 40);
    let refs: Vec<&SentenceRecord> = sentences.iter().collect();
    let e = extreme_sentences("C", &refs, Dimension::Arousal, 20);
    let all: HashSet<String> = e.top.iter().chain(&e.bottom).map(|s| s.sentence_id.clone()).collect();
    assert_eq!(all.len(), 40);

    for s in sentences.iter_mut() {
        s.vad = Some(Vad::new(0.4, 0.4, 0.4).unwrap());
    }
    sentences.shuffle(&mut rng(1));
    let refs: Vec<&SentenceRecord> = sentences.iter().collect();
    let e = extreme_sentences("C", &refs, Dimension::Valence, 20);
    let ids: Vec<String> = (0..20).map(|i| format!("s{i:04}")).collect();
    assert_eq!(e.top.iter().map(|s| s.sentence_id.clone()).collect::<Vec<_>>(), ids);
    let few = extreme_sentences("C", &refs[..5], Dimension::Valence, 20);
    assert!(few.short);
    assert_eq!(few.top.len(), 5);
}

#[test]
fn emotion_ratio_matches_token_scan() {
    let vocab = ["joy", "anger", "table", "chair", "fear", "report", "budget", "hope"];
    let emotional = word_set(["joy", "anger", "fear", "hope"]);
    let mut r = rng(8);
    let texts: Vec<String> = (0..50)
        .map(|_| {
            let n = r.random_range(1..15);
            (0..n).map(|_| vocab[r.random_range(0..vocab.len())]).collect::<Vec<_>>().join(", ")
        })
        .collect();
    let (mut hits, mut total) = (0, 0);
    for t in &texts {
        for w in t.split(", ") {
            total += 1;
            hits += usize::from(emotional.contains(w));
        }
    }
    let got = emotion_word_ratio(&texts, &emotional).unwrap();
    assert!((got - hits as f64 / total as f64).abs() < 1e-15);
    assert_eq!(emotion_word_ratio(&["table chair"], &emotional).unwrap(), 0.0);
    assert_eq!(emotion_word_ratio(&["joy hope"], &emotional).unwrap(), 1.0);
    assert!(emotion_word_ratio(&["..."], &emotional).is_err());
    assert!(emotion_word_ratio(&["joy"], &HashSet::new()).is_err());
}

#[test]
fn threshold_summary_has_one_header_row() {
    let sentences = random_sentences(6, 100);
    let rows = threshold_summary(&sentences, &Thresholds::EXTREME);
    assert_eq!(rows[0].scope, "all");
    let share = sentences.iter().filter(|s| s.vad.unwrap().v > 0.9).count() as f64 / 100.0;
    assert!((rows[0].shares[0].0 - share).abs() < 1e-15);
    let mut buf = Vec::new();
    write_threshold_summary(&mut buf, &rows).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert!(text.starts_with("scope\tn\t"));
    assert_eq!(text.lines().count(), 1 + rows.len());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn permutation_invariance_and_group_counts(seed in any::<u64>(), n in 1usize..80) {
        let sentences = random_sentences(seed, n);
        let mut shuffled: Vec<&SentenceRecord> = sentences.iter().collect();
        let config = MetricsConfig { min_group_n: 1, ..MetricsConfig::default() };
        let a = protocol_metrics("C", "p1", 1, &shuffled, &config);
        shuffled.shuffle(&mut rng(seed.wrapping_add(1)));
        let b = protocol_metrics("C", "p1", 1, &shuffled, &config);
        prop_assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            prop_assert_eq!(x.n, y.n);
            for k in 0..3 {
                prop_assert!((x.dims[k].mean - y.dims[k].mean).abs() < 1e-12);
                prop_assert!((x.dims[k].var - y.dims[k].var).abs() < 1e-12);
                prop_assert_eq!(x.dims[k].high, y.dims[k].high);
                prop_assert_eq!(x.dims[k].low, y.dims[k].low);
            }
        }
        let count = |g: Group| a.iter().find(|m| m.group == g).map_or(0, |m| m.n);
        prop_assert!(count(Group::Government) + count(Group::Opposition) <= count(Group::All));
        for m in &a {
            for d in m.dims {
                prop_assert!((0.0..=1.0).contains(&d.mean) && d.var >= 0.0 && d.high + d.low <= 1.0);
            }
            prop_assert!((0.0..=1.0).contains(&m.ratio_g) && (0.0..=1.0).contains(&m.ratio_f));
        }
    }

    #[test]
    fn ratios_are_monotone_in_thresholds(seed in any::<u64>(), lo1 in 0.0f64..0.4, dlo in 0.0f64..0.1, hi1 in 0.6f64..1.0, dhi in 0.0f64..0.1) {
        let sentences = random_sentences(seed, 60);
        let refs: Vec<&SentenceRecord> = sentences.iter().collect();
        let run = |hi: f64, lo: f64| {
            let config = MetricsConfig { thresholds: Thresholds::new(hi, lo).unwrap(), ..MetricsConfig::default() };
            protocol_metrics("C", "p1", 1, &refs, &config)[0].dims
        };
        let base = run(hi1, lo1);
        let wider = run((hi1 - dhi).max(0.5), lo1 + dlo);
        for k in 0..3 {
            prop_assert!(wider[k].high >= base[k].high);
            prop_assert!(wider[k].low >= base[k].low);
        }
    }
}
