//! Per-protocol VAD metrics, extreme sentences and emotion-word ratios.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use rayon::prelude::*;

use crate::corpus::{Affiliation, Gender, ProtocolOrder, SentenceRecord};
use crate::error::{Error, Result};
use crate::lexicon::{normalize_form, tokenize};
use crate::stats::sample_variance;
use crate::vad::Dimension;

/// High/low cut-offs; a score counts as high when `> hi` and low when `< lo`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Thresholds {
    pub hi: f64,
    pub lo: f64,
}

impl Thresholds {
    pub const DEFAULT: Thresholds = Thresholds { hi: 0.7, lo: 0.3 };
    pub const EXTREME: Thresholds = Thresholds { hi: 0.9, lo: 0.1 };

    pub fn new(hi: f64, lo: f64) -> Result<Self> {
        if !(0.0 <= lo && lo < hi && hi <= 1.0) {
            return Err(Error::InvalidInput(format!(
                "thresholds must satisfy 0 <= lo < hi <= 1 (lo = {lo}, hi = {hi})"
            )));
        }
        Ok(Thresholds { hi, lo })
    }
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds::DEFAULT
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Group {
    All,
    Government,
    Opposition,
}

impl Group {
    pub fn label(self) -> &'static str {
        match self {
            Group::All => "all",
            Group::Government => "government",
            Group::Opposition => "opposition",
        }
    }
}

impl fmt::Display for Group {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Group {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "all" => Ok(Group::All),
            "government" | "gov" => Ok(Group::Government),
            "opposition" | "opp" => Ok(Group::Opposition),
            other => Err(Error::InvalidInput(format!("unknown group {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Statistic {
    Mean,
    Var,
    High,
    Low,
}

impl Statistic {
    pub fn label(self) -> &'static str {
        match self {
            Statistic::Mean => "mean",
            Statistic::Var => "var",
            Statistic::High => "high",
            Statistic::Low => "low",
        }
    }
}

/// A named per-protocol measure such as `V_mean` or `A_high`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Metric {
    pub dim: Dimension,
    pub stat: Statistic,
}

impl Metric {
    pub const fn new(dim: Dimension, stat: Statistic) -> Self {
        Metric { dim, stat }
    }

    pub fn name(&self) -> String {
        format!("{}_{}", self.dim.letter(), self.stat.label())
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (d, st) = s
            .split_once('_')
            .ok_or_else(|| Error::InvalidInput(format!("bad metric name {s:?}")))?;
        let stat = match st {
            "mean" => Statistic::Mean,
            "var" => Statistic::Var,
            "high" => Statistic::High,
            "low" => Statistic::Low,
            _ => return Err(Error::InvalidInput(format!("bad metric name {s:?}"))),
        };
        Ok(Metric { dim: d.parse()?, stat })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DimStats {
    pub mean: f64,
    pub var: f64,
    pub high: f64,
    pub low: f64,
}

impl DimStats {
    fn from_values(values: &[f64], th: &Thresholds) -> Self {
        let n = values.len() as f64;
        DimStats {
            mean: values.iter().sum::<f64>() / n,
            var: sample_variance(values),
            high: values.iter().filter(|&&v| v > th.hi).count() as f64 / n,
            low: values.iter().filter(|&&v| v < th.lo).count() as f64 / n,
        }
    }

    pub fn get(&self, stat: Statistic) -> f64 {
        match stat {
            Statistic::Mean => self.mean,
            Statistic::Var => self.var,
            Statistic::High => self.high,
            Statistic::Low => self.low,
        }
    }
}

/// Metrics of one speaker group within one protocol.
#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolMetrics {
    pub committee: String,
    pub protocol_id: String,
    pub time_index: u32,
    pub group: Group,
    pub n: usize,
    /// Indexed by [`Dimension::index`].
    pub dims: [DimStats; 3],
    /// Share of the protocol's MK sentences uttered by government members.
    pub ratio_g: f64,
    /// Share of the protocol's MK sentences uttered by female members.
    pub ratio_f: f64,
}

impl ProtocolMetrics {
    pub fn value(&self, metric: Metric) -> f64 {
        self.dims[metric.dim.index()].get(metric.stat)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsConfig {
    pub thresholds: Thresholds,
    /// Government/opposition records need at least this many sentences.
    pub min_group_n: usize,
    /// Whether the `all` group includes sentences of speakers who are not MKs.
    pub all_includes_non_mk: bool,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        MetricsConfig {
            thresholds: Thresholds::DEFAULT,
            min_group_n: 10,
            all_includes_non_mk: true,
        }
    }
}

/// Metrics for the sentences of a single protocol: one `all` record plus a
/// government and an opposition record when those groups are large enough.
/// Sentences without a VAD triple are ignored for the score statistics.
pub fn protocol_metrics(
    committee: &str,
    protocol_id: &str,
    time_index: u32,
    sentences: &[&SentenceRecord],
    config: &MetricsConfig,
) -> Vec<ProtocolMetrics> {
    let mk: Vec<&&SentenceRecord> = sentences.iter().filter(|s| s.is_mk).collect();
    let share = |pred: &dyn Fn(&SentenceRecord) -> bool| {
        if mk.is_empty() {
            0.0
        } else {
            mk.iter().filter(|s| pred(s)).count() as f64 / mk.len() as f64
        }
    };
    let ratio_g = share(&|s| s.affiliation == Affiliation::Government);
    let ratio_f = share(&|s| s.gender == Gender::Female);

    let mut out = Vec::with_capacity(3);
    for group in [Group::All, Group::Government, Group::Opposition] {
        let members: Vec<[f64; 3]> = sentences
            .iter()
            .filter(|s| match group {
                Group::All => config.all_includes_non_mk || s.is_mk,
                Group::Government => s.is_mk && s.affiliation == Affiliation::Government,
                Group::Opposition => s.is_mk && s.affiliation == Affiliation::Opposition,
            })
            .filter_map(|s| s.vad.map(|v| v.as_array()))
            .collect();
        let needed = if group == Group::All { 1 } else { config.min_group_n.max(1) };
        if members.len() < needed {
            continue;
        }
        let mut dims = [DimStats::default(); 3];
        for (k, d) in dims.iter_mut().enumerate() {
            let values: Vec<f64> = members.iter().map(|t| t[k]).collect();
            *d = DimStats::from_values(&values, &config.thresholds);
        }
        out.push(ProtocolMetrics {
            committee: committee.to_string(),
            protocol_id: protocol_id.to_string(),
            time_index,
            group,
            n: members.len(),
            dims,
            ratio_g,
            ratio_f,
        });
    }
    out
}

/// Sentences grouped by (committee, time_index) in chronological order.
pub fn group_by_protocol<'a>(
    records: &'a [SentenceRecord],
    order: &ProtocolOrder,
) -> BTreeMap<(String, u32), (String, Vec<&'a SentenceRecord>)> {
    let mut grouped: BTreeMap<(String, u32), (String, Vec<&SentenceRecord>)> = BTreeMap::new();
    for rec in records {
        if let Some(ti) = order.time_index(&rec.committee, &rec.protocol_id) {
            grouped
                .entry((rec.committee.clone(), ti))
                .or_insert_with(|| (rec.protocol_id.clone(), Vec::new()))
                .1
                .push(rec);
        }
    }
    grouped
}

/// Metrics for every protocol, ordered by (committee, time_index, group).
pub fn compute_metrics(records: &[SentenceRecord], order: &ProtocolOrder, config: &MetricsConfig) -> Vec<ProtocolMetrics> {
    let grouped: Vec<_> = group_by_protocol(records, order).into_iter().collect();
    grouped
        .par_iter()
        .map(|((committee, ti), (protocol, sentences))| protocol_metrics(committee, protocol, *ti, sentences, config))
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect()
}

const METRICS_HEADER: &str = "committee\tprotocol_id\ttime_index\tgroup\tn\t\
v_mean\tv_var\tv_high\tv_low\ta_mean\ta_var\ta_high\ta_low\td_mean\td_var\td_high\td_low\tratio_g\tratio_f";

pub fn write_metrics<W: Write>(mut w: W, rows: &[ProtocolMetrics]) -> Result<()> {
    writeln!(w, "{METRICS_HEADER}")?;
    for m in rows {
        write!(w, "{}\t{}\t{}\t{}\t{}", m.committee, m.protocol_id, m.time_index, m.group, m.n)?;
        for d in &m.dims {
            write!(w, "\t{}\t{}\t{}\t{}", d.mean, d.var, d.high, d.low)?;
        }
        writeln!(w, "\t{}\t{}", m.ratio_g, m.ratio_f)?;
    }
    Ok(())
}

pub fn read_metrics<R: BufRead>(reader: R) -> Result<Vec<ProtocolMetrics>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if i == 0 {
            if line != METRICS_HEADER {
                return Err(Error::InvalidInput("metrics table has an unexpected header".to_string()));
            }
            continue;
        }
        if line.is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        let bad = |what: &str| Error::InvalidInput(format!("metrics line {}: {what}", i + 1));
        if cols.len() != 19 {
            return Err(bad("expected 19 columns"));
        }
        let num = |k: usize| -> Result<f64> { cols[k].parse().map_err(|_| bad("bad number")) };
        let mut dims = [DimStats::default(); 3];
        for (k, d) in dims.iter_mut().enumerate() {
            let base = 5 + 4 * k;
            *d = DimStats {
                mean: num(base)?,
                var: num(base + 1)?,
                high: num(base + 2)?,
                low: num(base + 3)?,
            };
        }
        out.push(ProtocolMetrics {
            committee: cols[0].to_string(),
            protocol_id: cols[1].to_string(),
            time_index: cols[2].parse().map_err(|_| bad("bad time_index"))?,
            group: cols[3].parse()?,
            n: cols[4].parse().map_err(|_| bad("bad n"))?,
            dims,
            ratio_g: num(17)?,
            ratio_f: num(18)?,
        });
    }
    Ok(out)
}

/// One sentence at the head or tail of a committee's ranking.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedSentence {
    pub score: f64,
    pub sentence_id: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Extremes {
    pub committee: String,
    pub dimension: Dimension,
    /// Highest first.
    pub top: Vec<RankedSentence>,
    /// Lowest first.
    pub bottom: Vec<RankedSentence>,
    /// Fewer than `2k` scored sentences were available; lists may overlap.
    pub short: bool,
}

/// The `k` highest- and lowest-scoring sentences on `dim`.
///
/// Both lists come from one total order (score descending, then sentence_id
/// ascending): `top` is its head, `bottom` its tail reversed. With at least
/// `2k` sentences the two lists are disjoint.
pub fn extreme_sentences(committee: &str, sentences: &[&SentenceRecord], dim: Dimension, k: usize) -> Extremes {
    let mut scored: Vec<(f64, &SentenceRecord)> = sentences
        .iter()
        .filter_map(|s| s.vad.map(|v| (v.get(dim), *s)))
        .collect();
    scored.sort_by(|a, b| {
        b.0.partial_cmp(&a.0)
            .expect("VAD scores are finite")
            .then_with(|| a.1.sentence_id.cmp(&b.1.sentence_id))
    });
    let take = k.min(scored.len());
    let ranked = |(score, s): &(f64, &SentenceRecord)| RankedSentence {
        score: *score,
        sentence_id: s.sentence_id.clone(),
        text: s.text.clone(),
    };
    Extremes {
        committee: committee.to_string(),
        dimension: dim,
        top: scored[..take].iter().map(ranked).collect(),
        bottom: scored[scored.len() - take..].iter().rev().map(ranked).collect(),
        short: scored.len() < 2 * k,
    }
}

fn sanitize(text: &str) -> String {
    text.chars().map(|c| if matches!(c, '\t' | '\n' | '\r') { ' ' } else { c }).collect()
}

/// Writes `committee, dimension, rank, score, sentence_id, text`; ranks are
/// `1..k` for the top list and `-1..-k` for the bottom list.
pub fn write_extremes<W: Write>(mut w: W, extremes: &[Extremes]) -> Result<()> {
    writeln!(w, "committee\tdimension\trank\tscore\tsentence_id\ttext")?;
    for e in extremes {
        for (i, s) in e.top.iter().enumerate() {
            writeln!(w, "{}\t{}\t{}\t{}\t{}\t{}", e.committee, e.dimension, i + 1, s.score, s.sentence_id, sanitize(&s.text))?;
        }
        for (i, s) in e.bottom.iter().enumerate() {
            writeln!(w, "{}\t{}\t-{}\t{}\t{}\t{}", e.committee, e.dimension, i + 1, s.score, s.sentence_id, sanitize(&s.text))?;
        }
    }
    Ok(())
}

/// Normalized word set for [`emotion_word_ratio`].
pub fn word_set<I, S>(words: I) -> HashSet<String>
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    words
        .into_iter()
        .map(|w| normalize_form(w.as_ref()))
        .filter(|w| !w.is_empty())
        .collect()
}

/// Share of token occurrences in `texts` that belong to `words`.
pub fn emotion_word_ratio<S: AsRef<str>>(texts: &[S], words: &HashSet<String>) -> Result<f64> {
    if words.is_empty() {
        return Err(Error::InvalidInput("emotion word set is empty".to_string()));
    }
    let (mut hits, mut total) = (0usize, 0usize);
    for t in texts {
        for tok in tokenize(t.as_ref()) {
            total += 1;
            if words.contains(&tok) {
                hits += 1;
            }
        }
    }
    if total == 0 {
        return Err(Error::InsufficientData("protocol has no tokens".to_string()));
    }
    Ok(hits as f64 / total as f64)
}

/// Corpus-level share of sentences above `hi` / below `lo`, per dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdSummary {
    pub scope: String,
    pub n: usize,
    /// `(high, low)` fractions indexed by [`Dimension::index`].
    pub shares: [(f64, f64); 3],
}

/// Summaries for the whole corpus (scope `all`) and for each committee.
pub fn threshold_summary(records: &[SentenceRecord], th: &Thresholds) -> Vec<ThresholdSummary> {
    fn summarize<'a>(scope: String, vads: impl Iterator<Item = &'a SentenceRecord>, th: &Thresholds) -> ThresholdSummary {
        let mut n = 0usize;
        let mut counts = [(0usize, 0usize); 3];
        for rec in vads {
            if let Some(v) = rec.vad {
                n += 1;
                for (k, x) in v.as_array().into_iter().enumerate() {
                    if x > th.hi {
                        counts[k].0 += 1;
                    }
                    if x < th.lo {
                        counts[k].1 += 1;
                    }
                }
            }
        }
        let share = |c: usize| if n == 0 { 0.0 } else { c as f64 / n as f64 };
        ThresholdSummary {
            scope,
            n,
            shares: counts.map(|(h, l)| (share(h), share(l))),
        }
    }

    let mut out = vec![summarize("all".to_string(), records.iter(), th)];
    let mut committees: Vec<&str> = records.iter().map(|r| r.committee.as_str()).collect();
    committees.sort_unstable();
    committees.dedup();
    for c in committees {
        out.push(summarize(c.to_string(), records.iter().filter(|r| r.committee == c), th));
    }
    out
}

/// Writes the summary as percentages: `scope, n, V_high_pct, V_low_pct, ...`.
pub fn write_threshold_summary<W: Write>(mut w: W, rows: &[ThresholdSummary]) -> Result<()> {
    writeln!(w, "scope\tn\tV_high_pct\tV_low_pct\tA_high_pct\tA_low_pct\tD_high_pct\tD_low_pct")?;
    for r in rows {
        write!(w, "{}\t{}", r.scope, r.n)?;
        for (h, l) in r.shares {
            write!(w, "\t{}\t{}", 100.0 * h, 100.0 * l)?;
        }
        writeln!(w)?;
    }
    Ok(())
}
