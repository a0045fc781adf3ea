//! Sentence-level corpus ingestion.
//!
//! The corpus is UTF-8 JSON Lines, one sentence per line. Malformed lines do
//! not abort ingestion; they are collected as [`Reject`]s with their 1-based
//! line number so the caller can write a rejects report.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::io::{BufRead, Write};

use chrono::NaiveDate;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vad::{in_unit_interval, Vad};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Affiliation {
    Government,
    Opposition,
    Unknown,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Gender {
    Female,
    Male,
    Unknown,
}

/// One utterance with its speaker and protocol metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct SentenceRecord {
    pub sentence_id: String,
    pub text: String,
    pub protocol_id: String,
    pub committee: String,
    pub session: u32,
    pub date: NaiveDate,
    pub speaker_id: String,
    pub is_mk: bool,
    pub affiliation: Affiliation,
    pub gender: Gender,
    pub vad: Option<Vad>,
}

impl SentenceRecord {
    /// True when the sentence may enter a government/opposition split.
    pub fn in_affiliation_split(&self) -> bool {
        self.is_mk && self.affiliation != Affiliation::Unknown
    }

    /// Serializes to a single JSON line (no trailing newline).
    pub fn to_json_line(&self) -> String {
        let wire = WireRecord {
            sentence_id: self.sentence_id.clone(),
            text: self.text.clone(),
            protocol_id: self.protocol_id.clone(),
            committee: self.committee.clone(),
            session: self.session,
            date: self.date,
            speaker_id: self.speaker_id.clone(),
            is_mk: self.is_mk,
            affiliation: self.affiliation,
            gender: self.gender,
            v: self.vad.map(|t| t.v),
            a: self.vad.map(|t| t.a),
            d: self.vad.map(|t| t.d),
        };
        serde_json::to_string(&wire).expect("record serialization is infallible")
    }
}

#[derive(Serialize, Deserialize)]
struct WireRecord {
    sentence_id: String,
    text: String,
    protocol_id: String,
    committee: String,
    session: u32,
    date: NaiveDate,
    speaker_id: String,
    is_mk: bool,
    affiliation: Affiliation,
    gender: Gender,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    v: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    a: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    d: Option<f64>,
}

/// A line that could not be turned into a record.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Reject {
    pub line_no: usize,
    pub reason: String,
}

#[derive(Debug, Default)]
pub struct ParsedCorpus {
    pub records: Vec<SentenceRecord>,
    pub rejects: Vec<Reject>,
}

/// Maps raw committee names onto canonical ones (committees that were renamed
/// over time).
#[derive(Debug, Clone, Default)]
pub struct AliasMap {
    map: HashMap<String, String>,
}

impl AliasMap {
    /// Reads `raw_name<TAB>canonical_name` rows. Blank lines and `#` comments are skipped.
    pub fn from_reader<R: BufRead>(reader: R) -> Result<Self> {
        let mut map = HashMap::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let mut cols = line.split('\t');
            match (cols.next(), cols.next(), cols.next()) {
                (Some(raw), Some(canonical), None) if !raw.is_empty() && !canonical.is_empty() => {
                    map.insert(raw.to_string(), canonical.to_string());
                }
                _ => {
                    return Err(Error::InvalidInput(format!(
                        "alias map line {}: expected raw_name<TAB>canonical_name",
                        i + 1
                    )))
                }
            }
        }
        Ok(AliasMap { map })
    }

    pub fn insert(&mut self, raw: impl Into<String>, canonical: impl Into<String>) {
        self.map.insert(raw.into(), canonical.into());
    }

    pub fn canonical<'a>(&'a self, raw: &'a str) -> &'a str {
        self.map.get(raw).map(String::as_str).unwrap_or(raw)
    }
}

const PARSE_CHUNK: usize = 1 << 14;

/// Parses a JSON Lines corpus.
///
/// Records keep input order. Lines are parsed in parallel chunks; the merge is
/// by line number so the output does not depend on the thread count.
pub fn parse_corpus<R: BufRead>(reader: R, aliases: Option<&AliasMap>) -> Result<ParsedCorpus> {
    let mut out = ParsedCorpus::default();
    let mut seen: HashSet<String> = HashSet::new();
    let mut chunk: Vec<(usize, String)> = Vec::with_capacity(PARSE_CHUNK);

    let mut flush = |chunk: &mut Vec<(usize, String)>, out: &mut ParsedCorpus| {
        let parsed: Vec<(usize, std::result::Result<SentenceRecord, String>)> = chunk
            .par_iter()
            .map(|(line_no, line)| (*line_no, parse_line(line, aliases)))
            .collect();
        for (line_no, res) in parsed {
            match res {
                Ok(rec) => {
                    if seen.insert(rec.sentence_id.clone()) {
                        out.records.push(rec);
                    } else {
                        out.rejects.push(Reject {
                            line_no,
                            reason: format!("duplicate sentence_id {:?}", rec.sentence_id),
                        });
                    }
                }
                Err(reason) => out.rejects.push(Reject { line_no, reason }),
            }
        }
        chunk.clear();
    };

    for (i, line) in reader.lines().enumerate() {
        chunk.push((i + 1, line?));
        if chunk.len() == PARSE_CHUNK {
            flush(&mut chunk, &mut out);
        }
    }
    flush(&mut chunk, &mut out);
    Ok(out)
}

/// Parses one corpus line.
pub fn parse_line(line: &str, aliases: Option<&AliasMap>) -> std::result::Result<SentenceRecord, String> {
    if line.trim().is_empty() {
        return Err("empty line".to_string());
    }
    let wire: WireRecord = serde_json::from_str(line).map_err(|e| e.to_string())?;
    let vad = match (wire.v, wire.a, wire.d) {
        (None, None, None) => None,
        (Some(v), Some(a), Some(d)) => {
            for (name, x) in [("v", v), ("a", a), ("d", d)] {
                if !in_unit_interval(x) {
                    return Err(format!("{name} = {x} outside [0, 1]"));
                }
            }
            Some(Vad { v, a, d })
        }
        _ => return Err("partial VAD triple: v, a, d must be all present or all absent".to_string()),
    };
    if wire.sentence_id.is_empty() {
        return Err("empty sentence_id".to_string());
    }
    let committee = match aliases {
        Some(map) => map.canonical(&wire.committee).to_string(),
        None => wire.committee,
    };
    Ok(SentenceRecord {
        sentence_id: wire.sentence_id,
        text: wire.text,
        protocol_id: wire.protocol_id,
        committee,
        session: wire.session,
        date: wire.date,
        speaker_id: wire.speaker_id,
        is_mk: wire.is_mk,
        affiliation: wire.affiliation,
        gender: wire.gender,
        vad,
    })
}

/// Writes records as JSON Lines.
pub fn write_corpus<W: Write>(mut w: W, records: &[SentenceRecord]) -> Result<()> {
    for rec in records {
        writeln!(w, "{}", rec.to_json_line())?;
    }
    Ok(())
}

/// Writes the `line_no<TAB>reason` rejects report (with header).
pub fn write_rejects<W: Write>(mut w: W, rejects: &[Reject]) -> Result<()> {
    writeln!(w, "line_no\treason")?;
    for r in rejects {
        let reason: String = r
            .reason
            .chars()
            .map(|c| if c == '\t' || c == '\n' || c == '\r' { ' ' } else { c })
            .collect();
        writeln!(w, "{}\t{}", r.line_no, reason)?;
    }
    Ok(())
}

/// Sentence count per committee.
pub fn committee_counts(records: &[SentenceRecord]) -> BTreeMap<String, usize> {
    let mut counts = BTreeMap::new();
    for rec in records {
        *counts.entry(rec.committee.clone()).or_insert(0) += 1;
    }
    counts
}

/// Committees whose sentence count strictly exceeds `min_sentences`.
pub fn select_committees(records: &[SentenceRecord], min_sentences: usize) -> BTreeSet<String> {
    committee_counts(records)
        .into_iter()
        .filter(|(_, n)| *n > min_sentences)
        .map(|(c, _)| c)
        .collect()
}

/// A protocol's position on its committee's time axis.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProtocolKey {
    pub committee: String,
    pub protocol_id: String,
    pub date: NaiveDate,
    /// 1-based chronological index within the committee.
    pub time_index: u32,
}

/// Chronological protocol order per committee.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ProtocolOrder {
    by_committee: BTreeMap<String, Vec<ProtocolKey>>,
    index: HashMap<(String, String), u32>,
}

impl ProtocolOrder {
    pub fn committees(&self) -> impl Iterator<Item = (&String, &Vec<ProtocolKey>)> {
        self.by_committee.iter()
    }

    pub fn protocols(&self, committee: &str) -> Option<&[ProtocolKey]> {
        self.by_committee.get(committee).map(Vec::as_slice)
    }

    pub fn time_index(&self, committee: &str, protocol_id: &str) -> Option<u32> {
        self.index
            .get(&(committee.to_string(), protocol_id.to_string()))
            .copied()
    }

    pub fn into_map(self) -> BTreeMap<String, Vec<ProtocolKey>> {
        self.by_committee
    }
}

/// Sorts each committee's protocols by (date, protocol_id) and assigns
/// time indices 1..n.
pub fn order_protocols(records: &[SentenceRecord]) -> Result<ProtocolOrder> {
    let mut dates: BTreeMap<(&str, &str), NaiveDate> = BTreeMap::new();
    for rec in records {
        match dates.get(&(rec.committee.as_str(), rec.protocol_id.as_str())) {
            Some(prev) if *prev != rec.date => {
                return Err(Error::ConflictingProtocolDate {
                    committee: rec.committee.clone(),
                    protocol: rec.protocol_id.clone(),
                    first: prev.to_string(),
                    second: rec.date.to_string(),
                })
            }
            Some(_) => {}
            None => {
                dates.insert((rec.committee.as_str(), rec.protocol_id.as_str()), rec.date);
            }
        }
    }

    let mut grouped: BTreeMap<String, Vec<(NaiveDate, String)>> = BTreeMap::new();
    for ((committee, protocol), date) in dates {
        grouped
            .entry(committee.to_string())
            .or_default()
            .push((date, protocol.to_string()));
    }

    let mut order = ProtocolOrder::default();
    for (committee, mut protos) in grouped {
        protos.sort();
        let keys: Vec<ProtocolKey> = protos
            .into_iter()
            .enumerate()
            .map(|(i, (date, protocol_id))| ProtocolKey {
                committee: committee.clone(),
                protocol_id,
                date,
                time_index: (i + 1) as u32,
            })
            .collect();
        for k in &keys {
            order
                .index
                .insert((k.committee.clone(), k.protocol_id.clone()), k.time_index);
        }
        order.by_committee.insert(committee, keys);
    }
    Ok(order)
}

/// Sorts records into the canonical downstream order: (committee, time_index, sentence_id).
pub fn canonical_sort(records: &mut [SentenceRecord], order: &ProtocolOrder) {
    records.sort_by(|x, y| {
        let tx = order.time_index(&x.committee, &x.protocol_id).unwrap_or(u32::MAX);
        let ty = order.time_index(&y.committee, &y.protocol_id).unwrap_or(u32::MAX);
        (&x.committee, tx, &x.sentence_id).cmp(&(&y.committee, ty, &y.sentence_id))
    });
}

/// Writes `committee, protocol_id, date, time_index` rows.
pub fn write_protocol_order<W: Write>(mut w: W, order: &ProtocolOrder) -> Result<()> {
    writeln!(w, "committee\tprotocol_id\tdate\ttime_index")?;
    for (_, keys) in order.committees() {
        for k in keys {
            writeln!(w, "{}\t{}\t{}\t{}", k.committee, k.protocol_id, k.date, k.time_index)?;
        }
    }
    Ok(())
}
