//! Word-level VAD lexicon and VAD-labeled text datasets.
//!
//! Lexicon rows map an English headword to target-language surface forms
//! (translations, lemmas, synonyms), all carrying the headword's scores. A form
//! can belong to several headwords; lookups average over every match.

use std::collections::{BTreeSet, HashMap};
use std::io::BufRead;

use unicode_normalization::char::is_combining_mark;
use unicode_normalization::UnicodeNormalization;

use crate::corpus::Reject;
use crate::error::{Error, Result};
use crate::vad::{in_unit_interval, Dimension, Vad};

/// Splits text into tokens: maximal runs of letters and digits, NFC-normalized.
///
/// Combining marks continue the current run so pointed Hebrew stays one token.
/// Everything else is a separator.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut current = String::new();
    for c in text.nfc() {
        if c.is_alphanumeric() || (!current.is_empty() && is_combining_mark(c)) {
            current.push(c);
        } else if !current.is_empty() {
            tokens.push(std::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        tokens.push(current);
    }
    tokens
}

/// Canonical key for matching a surface form.
pub fn normalize_form(form: &str) -> String {
    form.trim().nfc().collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FormKind {
    Translation,
    Lemma,
    Synonym,
}

impl std::str::FromStr for FormKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "translation" => Ok(FormKind::Translation),
            "lemma" => Ok(FormKind::Lemma),
            "synonym" => Ok(FormKind::Synonym),
            other => Err(format!("unknown form kind {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LexiconEntry {
    pub source_term: String,
    pub forms: BTreeSet<String>,
    pub vad: Vad,
}

/// Lexicon indexed by normalized surface form.
#[derive(Debug, Clone, Default)]
pub struct VadLexicon {
    entries: Vec<LexiconEntry>,
    by_form: HashMap<String, Vec<usize>>,
    rows: usize,
}

#[derive(Debug, Clone, Default)]
pub struct LexiconLoad {
    pub lexicon: VadLexicon,
    pub rejects: Vec<Reject>,
}

impl VadLexicon {
    /// Loads `source_term<TAB>form<TAB>kind<TAB>v<TAB>a<TAB>d` rows.
    ///
    /// A header row starting with `source_term` is skipped. Malformed rows,
    /// out-of-range scores, duplicate (term, form) pairs and rows whose scores
    /// contradict earlier rows of the same term are rejected.
    pub fn load<R: BufRead>(reader: R) -> Result<LexiconLoad> {
        let mut lex = VadLexicon::default();
        let mut rejects = Vec::new();
        let mut by_term: HashMap<String, usize> = HashMap::new();

        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            let line_no = i + 1;
            if line_no == 1 && line.starts_with("source_term\t") {
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            let (term, form, vad) = match parse_lexicon_row(&line) {
                Ok(row) => row,
                Err(reason) => {
                    rejects.push(Reject { line_no, reason });
                    continue;
                }
            };
            match by_term.get(&term) {
                Some(&idx) => {
                    let entry = &mut lex.entries[idx];
                    if entry.vad != vad {
                        rejects.push(Reject {
                            line_no,
                            reason: format!("scores for {term:?} differ from an earlier row"),
                        });
                        continue;
                    }
                    if !entry.forms.insert(form.clone()) {
                        rejects.push(Reject {
                            line_no,
                            reason: format!("duplicate form {form:?} for {term:?}"),
                        });
                        continue;
                    }
                    lex.by_form.entry(form).or_default().push(idx);
                }
                None => {
                    let idx = lex.entries.len();
                    by_term.insert(term.clone(), idx);
                    lex.entries.push(LexiconEntry {
                        source_term: term,
                        forms: BTreeSet::from([form.clone()]),
                        vad,
                    });
                    lex.by_form.entry(form).or_default().push(idx);
                }
            }
            lex.rows += 1;
        }

        // Summation order must not depend on file row order.
        let entries = &lex.entries;
        for ids in lex.by_form.values_mut() {
            ids.sort_by(|&x, &y| entries[x].source_term.cmp(&entries[y].source_term));
        }
        Ok(LexiconLoad { lexicon: lex, rejects })
    }

    /// Builds a lexicon from in-memory entries.
    pub fn from_entries(entries: impl IntoIterator<Item = LexiconEntry>) -> Result<Self> {
        let mut lex = VadLexicon::default();
        let mut terms = BTreeSet::new();
        for mut entry in entries {
            if entry.forms.is_empty() {
                return Err(Error::InvalidInput(format!("{:?} has no forms", entry.source_term)));
            }
            if !terms.insert(entry.source_term.clone()) {
                return Err(Error::InvalidInput(format!("duplicate term {:?}", entry.source_term)));
            }
            Vad::new(entry.vad.v, entry.vad.a, entry.vad.d)?;
            entry.forms = entry.forms.iter().map(|f| normalize_form(f)).collect();
            let idx = lex.entries.len();
            for form in &entry.forms {
                lex.by_form.entry(form.clone()).or_default().push(idx);
            }
            lex.rows += entry.forms.len();
            lex.entries.push(entry);
        }
        let entries = &lex.entries;
        for ids in lex.by_form.values_mut() {
            ids.sort_by(|&x, &y| entries[x].source_term.cmp(&entries[y].source_term));
        }
        Ok(lex)
    }

    /// Number of source terms.
    pub fn entry_count(&self) -> usize {
        self.entries.len()
    }

    /// Number of distinct surface forms.
    pub fn form_count(&self) -> usize {
        self.by_form.len()
    }

    /// Number of accepted (term, form) rows.
    pub fn row_count(&self) -> usize {
        self.rows
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[LexiconEntry] {
        &self.entries
    }

    /// Entries whose forms include `surface_form`.
    pub fn matches(&self, surface_form: &str) -> Vec<&LexiconEntry> {
        let key = normalize_form(surface_form);
        self.by_form
            .get(&key)
            .map(|ids| ids.iter().map(|&i| &self.entries[i]).collect())
            .unwrap_or_default()
    }

    /// Mean VAD triple over all entries matching the form.
    pub fn lookup(&self, surface_form: &str) -> Option<Vad> {
        let key = normalize_form(surface_form);
        self.lookup_normalized(&key)
    }

    /// [`lookup`](Self::lookup) for a key that is already NFC and trimmed (e.g. a token).
    pub fn lookup_normalized(&self, key: &str) -> Option<Vad> {
        let ids = self.by_form.get(key)?;
        let n = ids.len() as f64;
        let mut sum = [0.0; 3];
        for &i in ids {
            let t = self.entries[i].vad.as_array();
            for k in 0..3 {
                sum[k] += t[k];
            }
        }
        Some(Vad {
            v: (sum[0] / n).clamp(0.0, 1.0),
            a: (sum[1] / n).clamp(0.0, 1.0),
            d: (sum[2] / n).clamp(0.0, 1.0),
        })
    }

    /// Distinct forms with their averaged scores, sorted by form.
    pub fn form_scores(&self) -> Vec<(String, Vad)> {
        let mut forms: Vec<&String> = self.by_form.keys().collect();
        forms.sort();
        forms
            .into_iter()
            .map(|f| (f.clone(), self.lookup_normalized(f).expect("indexed form")))
            .collect()
    }
}

fn parse_lexicon_row(line: &str) -> std::result::Result<(String, String, Vad), String> {
    let cols: Vec<&str> = line.split('\t').collect();
    if cols.len() != 6 {
        return Err(format!("expected 6 tab-separated columns, found {}", cols.len()));
    }
    let term = cols[0].trim();
    let form = normalize_form(cols[1]);
    if term.is_empty() || form.is_empty() {
        return Err("empty source_term or form".to_string());
    }
    cols[2].trim().parse::<FormKind>()?;
    let mut scores = [0.0; 3];
    for (k, name) in ["v", "a", "d"].iter().enumerate() {
        let x: f64 = cols[3 + k]
            .trim()
            .parse()
            .map_err(|_| format!("{name} is not a number: {:?}", cols[3 + k]))?;
        if !in_unit_interval(x) {
            return Err(format!("{name} = {x} outside [0, 1]"));
        }
        scores[k] = x;
    }
    Ok((
        term.to_string(),
        form,
        Vad {
            v: scores[0],
            a: scores[1],
            d: scores[2],
        },
    ))
}

/// A text with gold scores for some or all dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledText {
    pub text_id: String,
    pub text: String,
    pub token_count: usize,
    pub gold: [Option<f64>; 3],
}

impl LabeledText {
    pub fn new(text_id: impl Into<String>, text: impl Into<String>, gold: [Option<f64>; 3]) -> Result<Self> {
        let text = text.into();
        for g in gold.iter().flatten() {
            if !in_unit_interval(*g) {
                return Err(Error::InvalidInput(format!("gold score {g} outside [0, 1]")));
            }
        }
        Ok(LabeledText {
            text_id: text_id.into(),
            token_count: tokenize(&text).len(),
            text,
            gold,
        })
    }

    pub fn gold(&self, dim: Dimension) -> Option<f64> {
        self.gold[dim.index()]
    }
}

#[derive(Debug, Clone, Default)]
pub struct LabeledLoad {
    pub texts: Vec<LabeledText>,
    pub rejects: Vec<Reject>,
}

/// Reads `text_id<TAB>text<TAB>v<TAB>a<TAB>d`; empty cells mean "not labeled".
pub fn load_labeled<R: BufRead>(reader: R) -> Result<LabeledLoad> {
    let mut out = LabeledLoad::default();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let line_no = i + 1;
        if line_no == 1 && line.starts_with("text_id\t") {
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        match parse_labeled_row(&line) {
            Ok(t) => out.texts.push(t),
            Err(reason) => out.rejects.push(Reject { line_no, reason }),
        }
    }
    Ok(out)
}

fn parse_labeled_row(line: &str) -> std::result::Result<LabeledText, String> {
    let cols: Vec<&str> = line.split('\t').collect();
    if cols.len() != 5 {
        return Err(format!("expected 5 tab-separated columns, found {}", cols.len()));
    }
    let mut gold = [None; 3];
    for k in 0..3 {
        let cell = cols[2 + k].trim();
        if cell.is_empty() {
            continue;
        }
        let x: f64 = cell.parse().map_err(|_| format!("score is not a number: {cell:?}"))?;
        gold[k] = Some(x);
    }
    LabeledText::new(cols[0], cols[1], gold).map_err(|e| e.to_string())
}

/// Thresholds and length bounds for selecting clearly polar training texts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabeledFilter {
    pub hi: f64,
    pub lo: f64,
    pub min_tokens: usize,
    pub max_tokens: usize,
}

impl Default for LabeledFilter {
    fn default() -> Self {
        LabeledFilter {
            hi: 0.7,
            lo: 0.3,
            min_tokens: 10,
            max_tokens: 30,
        }
    }
}

/// Keeps texts with gold score `> hi` or `< lo` on `dim` and
/// `min_tokens < token_count < max_tokens`. Texts unlabeled on `dim` are dropped.
pub fn filter_labeled<'a>(
    dataset: &'a [LabeledText],
    dim: Dimension,
    filter: &LabeledFilter,
) -> Result<Vec<&'a LabeledText>> {
    if !(0.0 <= filter.lo && filter.lo < filter.hi && filter.hi <= 1.0) {
        return Err(Error::InvalidInput(format!(
            "thresholds must satisfy 0 <= lo < hi <= 1 (lo = {}, hi = {})",
            filter.lo, filter.hi
        )));
    }
    if filter.min_tokens >= filter.max_tokens {
        return Err(Error::InvalidInput(format!(
            "min_tokens ({}) must be below max_tokens ({})",
            filter.min_tokens, filter.max_tokens
        )));
    }
    Ok(dataset
        .iter()
        .filter(|t| {
            let polar = matches!(t.gold(dim), Some(g) if g > filter.hi || g < filter.lo);
            polar && t.token_count > filter.min_tokens && t.token_count < filter.max_tokens
        })
        .collect())
}
