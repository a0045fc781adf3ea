//! The three studies over per-protocol metrics: government vs opposition
//! comparison, trends over time, and the confound regression. Also the
//! per-session averages and lexicon word-count emotion trends.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use rayon::prelude::*;

use crate::corpus::{ProtocolOrder, SentenceRecord};
use crate::error::{Error, Result};
use crate::glm::ols::{build_interaction_design, fit_interaction, InteractionRow, OlsFit, VarianceMode};
use crate::metrics::{compute_metrics, emotion_word_ratio, group_by_protocol, Group, Metric, MetricsConfig, ProtocolMetrics, Statistic};
use crate::stats::{mann_kendall, two_sample_t, HigherGroup, TTestVariant, TrendDirection, MANN_KENDALL_MIN_N};
use crate::vad::Dimension::{self, Arousal as A, Dominance as D, Valence as V};

/// Columns of the government/opposition grid.
pub const COMPARISON_METRICS: [Metric; 9] = [
    Metric::new(V, Statistic::Mean),
    Metric::new(V, Statistic::High),
    Metric::new(V, Statistic::Low),
    Metric::new(A, Statistic::Mean),
    Metric::new(A, Statistic::High),
    Metric::new(A, Statistic::Low),
    Metric::new(D, Statistic::Mean),
    Metric::new(D, Statistic::High),
    Metric::new(D, Statistic::Low),
];

/// Columns of the trend grid.
pub const TREND_METRICS: [Metric; 10] = [
    Metric::new(V, Statistic::Mean),
    Metric::new(V, Statistic::Var),
    Metric::new(V, Statistic::High),
    Metric::new(V, Statistic::Low),
    Metric::new(A, Statistic::Mean),
    Metric::new(A, Statistic::High),
    Metric::new(A, Statistic::Low),
    Metric::new(D, Statistic::Mean),
    Metric::new(D, Statistic::High),
    Metric::new(D, Statistic::Low),
];

/// A significance-gated outcome that renders as one grid cell.
pub trait CellLabel: Sized + Copy + PartialEq {
    /// Label of the non-significant outcome.
    const NONE: Self;
    fn label(self) -> &'static str;
    fn parse(s: &str) -> Option<Self>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Winner {
    Gov,
    Opp,
    Neither,
}

impl CellLabel for Winner {
    const NONE: Self = Winner::Neither;

    fn label(self) -> &'static str {
        match self {
            Winner::Gov => "gov",
            Winner::Opp => "opp",
            Winner::Neither => "---",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "gov" => Some(Winner::Gov),
            "opp" => Some(Winner::Opp),
            "---" => Some(Winner::Neither),
            _ => None,
        }
    }
}

impl Winner {
    pub fn swapped(self) -> Self {
        match self {
            Winner::Gov => Winner::Opp,
            Winner::Opp => Winner::Gov,
            Winner::Neither => Winner::Neither,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Trend {
    Up,
    Down,
    Flat,
}

impl CellLabel for Trend {
    const NONE: Self = Trend::Flat;

    fn label(self) -> &'static str {
        match self {
            Trend::Up => "up",
            Trend::Down => "down",
            Trend::Flat => "---",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "up" => Some(Trend::Up),
            "down" => Some(Trend::Down),
            "---" => Some(Trend::Flat),
            _ => None,
        }
    }
}

impl From<TrendDirection> for Trend {
    fn from(d: TrendDirection) -> Self {
        match d {
            TrendDirection::Increasing => Trend::Up,
            TrendDirection::Decreasing => Trend::Down,
            TrendDirection::NoTrend => Trend::Flat,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell<T> {
    Tested { outcome: T, p: f64 },
    Unavailable(String),
}

impl<T: CellLabel> Cell<T> {
    pub fn outcome(&self) -> Option<T> {
        match self {
            Cell::Tested { outcome, .. } => Some(*outcome),
            Cell::Unavailable(_) => None,
        }
    }

    pub fn p(&self) -> Option<f64> {
        match self {
            Cell::Tested { p, .. } => Some(*p),
            Cell::Unavailable(_) => None,
        }
    }
}

const UNAVAILABLE: &str = "n/a";

/// Committee x column grid of test outcomes.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid<T> {
    pub columns: Vec<String>,
    pub rows: BTreeMap<String, Vec<Cell<T>>>,
}

impl<T: CellLabel> Grid<T> {
    pub fn cell(&self, committee: &str, column: &str) -> Option<&Cell<T>> {
        let j = self.columns.iter().position(|c| c == column)?;
        self.rows.get(committee).map(|cells| &cells[j])
    }

    pub fn outcome(&self, committee: &str, column: &str) -> Option<T> {
        self.cell(committee, column).and_then(Cell::outcome)
    }

    /// Writes the label grid; unavailable cells are `n/a`.
    pub fn write_labels<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "committee\t{}", self.columns.join("\t"))?;
        for (committee, cells) in &self.rows {
            let labels: Vec<&str> = cells
                .iter()
                .map(|c| c.outcome().map(T::label).unwrap_or(UNAVAILABLE))
                .collect();
            writeln!(w, "{committee}\t{}", labels.join("\t"))?;
        }
        Ok(())
    }

    /// Writes the companion p-value grid; unavailable cells carry their reason.
    pub fn write_pvals<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "committee\t{}", self.columns.join("\t"))?;
        for (committee, cells) in &self.rows {
            let vals: Vec<String> = cells
                .iter()
                .map(|c| match c {
                    Cell::Tested { p, .. } => p.to_string(),
                    Cell::Unavailable(reason) => format!("{UNAVAILABLE}: {}", reason.replace(['\t', '\n'], " ")),
                })
                .collect();
            writeln!(w, "{committee}\t{}", vals.join("\t"))?;
        }
        Ok(())
    }

    /// Rebuilds a grid from its label and p-value tables.
    pub fn read<R1: BufRead, R2: BufRead>(labels: R1, pvals: R2) -> Result<Self> {
        let parse_table = |r: &mut dyn Iterator<Item = std::io::Result<String>>| -> Result<(Vec<String>, Vec<Vec<String>>)> {
            let header = r.next().ok_or_else(|| Error::InvalidInput("empty grid table".to_string()))??;
            let columns: Vec<String> = header.split('\t').skip(1).map(str::to_string).collect();
            let mut rows = Vec::new();
            for line in r {
                let line = line?;
                if line.is_empty() {
                    continue;
                }
                rows.push(line.split('\t').map(str::to_string).collect::<Vec<_>>());
            }
            Ok((columns, rows))
        };
        let (columns, label_rows) = parse_table(&mut labels.lines())?;
        let (pcolumns, p_rows) = parse_table(&mut pvals.lines())?;
        if columns != pcolumns || label_rows.len() != p_rows.len() {
            return Err(Error::InvalidInput("grid and p-value tables do not align".to_string()));
        }
        let mut rows = BTreeMap::new();
        for (lr, pr) in label_rows.iter().zip(&p_rows) {
            if lr.len() != columns.len() + 1 || pr.len() != lr.len() || lr[0] != pr[0] {
                return Err(Error::InvalidInput(format!("grid row {:?} is malformed", lr[0])));
            }
            let mut cells = Vec::with_capacity(columns.len());
            for (label, p) in lr[1..].iter().zip(&pr[1..]) {
                let cell = if label == UNAVAILABLE {
                    let reason = p.strip_prefix(UNAVAILABLE).unwrap_or(p).trim_start_matches(':').trim();
                    Cell::Unavailable(reason.to_string())
                } else {
                    let outcome = T::parse(label).ok_or_else(|| Error::InvalidInput(format!("bad grid label {label:?}")))?;
                    let p: f64 = p.parse().map_err(|_| Error::InvalidInput(format!("bad p-value {p:?}")))?;
                    Cell::Tested { outcome, p }
                };
                cells.push(cell);
            }
            rows.insert(lr[0].clone(), cells);
        }
        Ok(Grid { columns, rows })
    }
}

fn by_committee(metrics: &[ProtocolMetrics], group: Group) -> BTreeMap<&str, Vec<&ProtocolMetrics>> {
    let mut out: BTreeMap<&str, Vec<&ProtocolMetrics>> = BTreeMap::new();
    for m in metrics.iter().filter(|m| m.group == group) {
        out.entry(m.committee.as_str()).or_default().push(m);
    }
    for rows in out.values_mut() {
        rows.sort_by_key(|m| m.time_index);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComparisonConfig {
    pub alpha: f64,
    pub variant: TTestVariant,
}

impl Default for ComparisonConfig {
    fn default() -> Self {
        ComparisonConfig {
            alpha: 0.05,
            variant: TTestVariant::Pooled,
        }
    }
}

/// Government vs opposition t-tests per committee on the nine comparison
/// metrics, using protocols where both groups have a record.
pub fn compare_gov_opp(metrics: &[ProtocolMetrics], config: &ComparisonConfig) -> Result<Grid<Winner>> {
    check_alpha(config.alpha)?;
    let gov = by_committee(metrics, Group::Government);
    let opp = by_committee(metrics, Group::Opposition);
    let committees: BTreeSet<&str> = gov.keys().chain(opp.keys()).copied().collect();

    let mut rows = BTreeMap::new();
    for committee in committees {
        let opp_by_tp: BTreeMap<u32, &ProtocolMetrics> = opp
            .get(committee)
            .map(|v| v.iter().map(|m| (m.time_index, *m)).collect())
            .unwrap_or_default();
        let paired: Vec<(&ProtocolMetrics, &ProtocolMetrics)> = gov
            .get(committee)
            .map(|v| v.iter().filter_map(|g| opp_by_tp.get(&g.time_index).map(|o| (*g, *o))).collect())
            .unwrap_or_default();

        let cells = COMPARISON_METRICS
            .iter()
            .map(|&metric| {
                if paired.len() < 2 {
                    return Ok(Cell::Unavailable(format!(
                        "{} protocols with both government and opposition records",
                        paired.len()
                    )));
                }
                let g: Vec<f64> = paired.iter().map(|(g, _)| g.value(metric)).collect();
                let o: Vec<f64> = paired.iter().map(|(_, o)| o.value(metric)).collect();
                let res = two_sample_t(&g, &o, config.variant, config.alpha)?;
                let outcome = match res.higher_group {
                    HigherGroup::First => Winner::Gov,
                    HigherGroup::Second => Winner::Opp,
                    HigherGroup::Neither => Winner::Neither,
                };
                Ok(Cell::Tested { outcome, p: res.p })
            })
            .collect::<Result<Vec<_>>>()?;
        rows.insert(committee.to_string(), cells);
    }
    Ok(Grid {
        columns: COMPARISON_METRICS.iter().map(Metric::name).collect(),
        rows,
    })
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("alpha must lie in (0, 1), got {alpha}")))
    }
}

/// Mann-Kendall trend test on each committee's chronological series of
/// `group` records, for the ten trend metrics.
pub fn trend_table(metrics: &[ProtocolMetrics], group: Group, alpha: f64) -> Result<Grid<Trend>> {
    check_alpha(alpha)?;
    let committees = by_committee(metrics, group);
    let rows: Vec<(String, Vec<Cell<Trend>>)> = committees
        .par_iter()
        .map(|(committee, series)| {
            let cells = TREND_METRICS
                .iter()
                .map(|&metric| {
                    let values: Vec<f64> = series.iter().map(|m| m.value(metric)).collect();
                    trend_cell(&values, alpha)
                })
                .collect::<Result<Vec<_>>>()?;
            Ok((committee.to_string(), cells))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Grid {
        columns: TREND_METRICS.iter().map(Metric::name).collect(),
        rows: rows.into_iter().collect(),
    })
}

fn trend_cell(values: &[f64], alpha: f64) -> Result<Cell<Trend>> {
    if values.len() < MANN_KENDALL_MIN_N {
        return Ok(Cell::Unavailable(format!(
            "{} protocols, trend test needs at least {MANN_KENDALL_MIN_N}",
            values.len()
        )));
    }
    let r = mann_kendall(values, alpha)?;
    Ok(Cell::Tested {
        outcome: r.direction.into(),
        p: r.p,
    })
}

/// Per-committee block of a confound regression.
#[derive(Debug, Clone, PartialEq)]
pub struct CommitteeBlock {
    pub committee: String,
    pub n_protocols: usize,
    /// Indices into the fit's term vectors: const, TP, RatioF, RatioG.
    pub term_indices: [usize; 4],
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfoundReport {
    pub outcome: Metric,
    pub fit: OlsFit,
    pub blocks: Vec<CommitteeBlock>,
}

/// Outcomes modeled by the confound analysis.
pub const CONFOUND_OUTCOMES: [Metric; 2] = [Metric::new(V, Statistic::Var), Metric::new(A, Statistic::Mean)];

/// `outcome ~ Comm:TP + Comm:RatioF + Comm:RatioG` over the `all` records.
pub fn confound_ols(metrics: &[ProtocolMetrics], outcome: Metric, mode: VarianceMode) -> Result<ConfoundReport> {
    let rows: Vec<InteractionRow> = metrics
        .iter()
        .filter(|m| m.group == Group::All)
        .map(|m| InteractionRow {
            committee: m.committee.clone(),
            tp: m.time_index as f64,
            ratio_f: m.ratio_f,
            ratio_g: m.ratio_g,
            outcome: m.value(outcome),
        })
        .collect();
    let design = build_interaction_design(&rows)?;
    let fit = fit_interaction(&design, mode)?;
    let blocks = design
        .committees
        .iter()
        .enumerate()
        .map(|(c, committee)| CommitteeBlock {
            committee: committee.clone(),
            n_protocols: design.rows_of(c).len(),
            term_indices: design.block_columns(c),
        })
        .collect();
    Ok(ConfoundReport { outcome, fit, blocks })
}

impl ConfoundReport {
    /// Writes `term, beta_x100, std_err, t, p, ci_low, ci_high`, one
    /// committee block after another.
    pub fn write<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "term\tbeta_x100\tstd_err\tt\tp\tci_low\tci_high")?;
        let f = &self.fit;
        for block in &self.blocks {
            for &j in &block.term_indices {
                writeln!(
                    w,
                    "{}\t{}\t{}\t{}\t{}\t{}\t{}",
                    f.terms[j],
                    100.0 * f.beta[j],
                    f.std_err[j],
                    f.t_stat[j],
                    f.p_value[j],
                    f.ci_low[j],
                    f.ci_high[j]
                )?;
            }
        }
        Ok(())
    }
}

/// Inclusive range of Knesset sessions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SessionRange {
    pub first: u32,
    pub last: u32,
}

impl Default for SessionRange {
    fn default() -> Self {
        SessionRange { first: 15, last: 24 }
    }
}

impl FromStr for SessionRange {
    type Err = Error;

    /// Parses `15..24` (inclusive) or a single session number.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidInput(format!("bad session range {s:?}; expected e.g. 15..24"));
        let (first, last) = match s.split_once("..") {
            Some((a, b)) => (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?),
            None => {
                let x = s.trim().parse().map_err(|_| bad())?;
                (x, x)
            }
        };
        if first > last {
            return Err(bad());
        }
        Ok(SessionRange { first, last })
    }
}

impl fmt::Display for SessionRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}..{}", self.first, self.last)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SessionAverages {
    pub n_sentences: usize,
    pub n_protocols: usize,
    /// Sentence-weighted means.
    pub vad_mean: [f64; 3],
    /// Protocol-weighted means of per-protocol A_mean and V_var.
    pub mean_protocol_a_mean: f64,
    pub mean_protocol_v_var: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionRow {
    pub session: u32,
    /// `None` when the session has no scored sentences.
    pub values: Option<SessionAverages>,
}

/// One row per session in `range`. Protocols belong to the session of their
/// first sentence.
pub fn session_averages(
    records: &[SentenceRecord],
    order: &ProtocolOrder,
    config: &MetricsConfig,
    range: SessionRange,
) -> Vec<SessionRow> {
    let mut sums: BTreeMap<u32, ([f64; 3], usize, f64, f64, usize)> = BTreeMap::new();
    for ((committee, ti), (protocol, sentences)) in group_by_protocol(records, order) {
        let session = sentences[0].session;
        if session < range.first || session > range.last {
            continue;
        }
        let entry = sums.entry(session).or_insert(([0.0; 3], 0, 0.0, 0.0, 0));
        for s in &sentences {
            if let Some(v) = s.vad {
                for (acc, x) in entry.0.iter_mut().zip(v.as_array()) {
                    *acc += x;
                }
                entry.1 += 1;
            }
        }
        let pm = crate::metrics::protocol_metrics(&committee, &protocol, ti, &sentences, config);
        if let Some(all) = pm.iter().find(|m| m.group == Group::All) {
            entry.2 += all.dims[Dimension::Arousal.index()].mean;
            entry.3 += all.dims[Dimension::Valence.index()].var;
            entry.4 += 1;
        }
    }
    (range.first..=range.last)
        .map(|session| {
            let values = sums.get(&session).and_then(|(vad, n, a_sum, v_sum, protocols)| {
                if *n == 0 || *protocols == 0 {
                    return None;
                }
                Some(SessionAverages {
                    n_sentences: *n,
                    n_protocols: *protocols,
                    vad_mean: vad.map(|s| s / *n as f64),
                    mean_protocol_a_mean: a_sum / *protocols as f64,
                    mean_protocol_v_var: v_sum / *protocols as f64,
                })
            });
            SessionRow { session, values }
        })
        .collect()
}

pub fn write_sessions<W: Write>(mut w: W, rows: &[SessionRow]) -> Result<()> {
    writeln!(w, "session\tv_mean\ta_mean\td_mean\tmean_protocol_a_mean\tmean_protocol_v_var")?;
    for r in rows {
        match &r.values {
            Some(v) => writeln!(
                w,
                "{}\t{}\t{}\t{}\t{}\t{}",
                r.session, v.vad_mean[0], v.vad_mean[1], v.vad_mean[2], v.mean_protocol_a_mean, v.mean_protocol_v_var
            )?,
            None => writeln!(w, "{}\tNA\tNA\tNA\tNA\tNA", r.session)?,
        }
    }
    Ok(())
}

/// Word lists per emotion.
pub type EmotionLexicon = BTreeMap<String, HashSet<String>>;

/// Reads `word<TAB>emotion[<TAB>flag]` rows; with a flag column only rows
/// flagged `1` are kept.
pub fn read_emotion_lexicon<R: BufRead>(reader: R) -> Result<EmotionLexicon> {
    let mut raw: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').map(str::trim).collect();
        let keep = match cols.len() {
            2 => true,
            3 => cols[2] == "1",
            _ => {
                return Err(Error::InvalidInput(format!(
                    "emotion lexicon line {}: expected word<TAB>emotion[<TAB>flag]",
                    i + 1
                )))
            }
        };
        if keep {
            raw.entry(cols[1].to_string()).or_default().push(cols[0].to_string());
        }
    }
    Ok(raw.into_iter().map(|(e, words)| (e, crate::metrics::word_set(words))).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmotionRatioRow {
    pub committee: String,
    pub protocol_id: String,
    pub time_index: u32,
    pub emotion: String,
    /// `None` when the protocol has no tokens.
    pub ratio: Option<f64>,
}

/// Per-protocol emotion-word ratios and a Mann-Kendall grid (committee x emotion).
pub fn emotion_trends(
    records: &[SentenceRecord],
    order: &ProtocolOrder,
    lexicon: &EmotionLexicon,
    alpha: f64,
) -> Result<(Vec<EmotionRatioRow>, Grid<Trend>)> {
    check_alpha(alpha)?;
    let mut ratios = Vec::new();
    for ((committee, ti), (protocol, sentences)) in group_by_protocol(records, order) {
        let texts: Vec<&str> = sentences.iter().map(|s| s.text.as_str()).collect();
        for (emotion, words) in lexicon {
            let ratio = match emotion_word_ratio(&texts, words) {
                Ok(r) => Some(r),
                Err(Error::InsufficientData(_)) => None,
                Err(e) => return Err(e),
            };
            ratios.push(EmotionRatioRow {
                committee: committee.clone(),
                protocol_id: protocol.clone(),
                time_index: ti,
                emotion: emotion.clone(),
                ratio,
            });
        }
    }
    let mut series: BTreeMap<&str, BTreeMap<&str, Vec<f64>>> = BTreeMap::new();
    for r in &ratios {
        if let Some(x) = r.ratio {
            series
                .entry(r.committee.as_str())
                .or_default()
                .entry(r.emotion.as_str())
                .or_default()
                .push(x);
        }
    }
    let columns: Vec<String> = lexicon.keys().cloned().collect();
    let mut rows = BTreeMap::new();
    for (committee, by_emotion) in series {
        let cells = columns
            .iter()
            .map(|e| trend_cell(by_emotion.get(e.as_str()).map(Vec::as_slice).unwrap_or(&[]), alpha))
            .collect::<Result<Vec<_>>>()?;
        rows.insert(committee.to_string(), cells);
    }
    Ok((ratios, Grid { columns, rows }))
}

pub fn write_emotion_ratios<W: Write>(mut w: W, rows: &[EmotionRatioRow]) -> Result<()> {
    writeln!(w, "committee\tprotocol_id\ttime_index\temotion\tratio")?;
    for r in rows {
        let ratio = r.ratio.map(|x| x.to_string()).unwrap_or_else(|| "NA".to_string());
        writeln!(w, "{}\t{}\t{}\t{}\t{}", r.committee, r.protocol_id, r.time_index, r.emotion, ratio)?;
    }
    Ok(())
}

/// Scores sentences, orders protocols and computes metrics in one call.
pub fn metrics_for_corpus(records: &[SentenceRecord], config: &MetricsConfig) -> Result<Vec<ProtocolMetrics>> {
    let order = crate::corpus::order_protocols(records)?;
    Ok(compute_metrics(records, &order, config))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::DimStats;

    fn row(committee: &str, ti: u32, group: Group, v_mean: f64) -> ProtocolMetrics {
        let d = DimStats { mean: v_mean, var: 0.01, high: 0.1, low: 0.1 };
        ProtocolMetrics {
            committee: committee.to_string(),
            protocol_id: format!("p{ti}"),
            time_index: ti,
            group,
            n: 20,
            dims: [d, DimStats { mean: 0.4, ..d }, DimStats { mean: 0.6, ..d }],
            ratio_g: 0.5,
            ratio_f: 0.3,
        }
    }

    #[test]
    fn identical_groups_give_no_winner() {
        let mut m = Vec::new();
        for ti in 1..=10 {
            let v = 0.4 + 0.01 * (ti % 3) as f64;
            m.push(row("C", ti, Group::Government, v));
            m.push(row("C", ti, Group::Opposition, v));
        }
        let grid = compare_gov_opp(&m, &ComparisonConfig::default()).unwrap();
        assert!(grid.rows["C"].iter().all(|c| c.outcome() == Some(Winner::Neither)));
    }

    #[test]
    fn lone_group_is_unavailable() {
        let m = vec![row("C", 1, Group::Government, 0.5), row("C", 2, Group::Government, 0.6)];
        let grid = compare_gov_opp(&m, &ComparisonConfig::default()).unwrap();
        assert!(matches!(grid.rows["C"][0], Cell::Unavailable(_)));
    }

    #[test]
    fn short_series_cell_is_unavailable() {
        let m: Vec<ProtocolMetrics> = (1..=5).map(|ti| row("C", ti, Group::All, 0.5)).collect();
        let grid = trend_table(&m, Group::All, 0.05).unwrap();
        assert_eq!(grid.columns.len(), 10);
        assert!(grid.rows["C"].iter().all(|c| matches!(c, Cell::Unavailable(_))));
    }

    #[test]
    fn grid_round_trips_through_tables() {
        let m: Vec<ProtocolMetrics> = (1..=30)
            .map(|ti| row("C", ti, Group::All, 0.3 + 0.01 * ti as f64))
            .chain((1..=3).map(|ti| row("Short", ti, Group::All, 0.5)))
            .collect();
        let grid = trend_table(&m, Group::All, 0.05).unwrap();
        assert_eq!(grid.outcome("C", "V_mean"), Some(Trend::Up));
        let (mut labels, mut pvals) = (Vec::new(), Vec::new());
        grid.write_labels(&mut labels).unwrap();
        grid.write_pvals(&mut pvals).unwrap();
        let back = Grid::<Trend>::read(labels.as_slice(), pvals.as_slice()).unwrap();
        assert_eq!(back, grid);
    }

    #[test]
    fn session_range_parsing() {
        assert_eq!("15..24".parse::<SessionRange>().unwrap(), SessionRange { first: 15, last: 24 });
        assert_eq!("20".parse::<SessionRange>().unwrap(), SessionRange { first: 20, last: 20 });
        assert!("24..15".parse::<SessionRange>().is_err());
        assert!("x".parse::<SessionRange>().is_err());
    }

    #[test]
    fn emotion_lexicon_formats() {
        let lex = read_emotion_lexicon("joy\tjoy\t1\nangry\tanger\t1\nhappy\tanger\t0\nglad\tjoy\n".as_bytes()).unwrap();
        assert_eq!(lex["anger"].len(), 1);
        assert_eq!(lex["joy"].len(), 2);
        assert!(read_emotion_lexicon("one-column\n".as_bytes()).is_err());
    }
}
