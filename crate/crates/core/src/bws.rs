//! Best-worst scaling: tuple generation, counting scores, agreement.
//!
//! Annotators see small tuples of texts and mark the highest and lowest text
//! for each dimension. An item's raw score is
//! `(#best - #worst) / #annotated appearances`, in [-1, 1].

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::io::{BufRead, Write};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::stats::{pearson, Correlation};
use crate::vad::Dimension;

pub const DEFAULT_TUPLE_SIZE: usize = 4;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BwsTuple {
    pub tuple_id: u32,
    pub item_ids: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BwsAnnotation {
    pub tuple_id: u32,
    pub annotator_id: String,
    pub dimension: Dimension,
    pub best: String,
    pub worst: String,
}

/// Raw scores of one annotator (or one pooled set of annotations), keyed by item.
pub type RawScores = BTreeMap<String, f64>;

/// Generates `n_tuples` tuples of distinct items.
///
/// Items are drawn from the least-used tier first, so occurrence counts never
/// differ by more than one. Within a tier, items that have co-occurred least
/// with the tuple's current members are preferred; remaining ties are broken
/// by a ChaCha8 stream seeded with `seed`.
pub fn generate_tuples(item_ids: &[String], n_tuples: usize, tuple_size: usize, seed: u64) -> Result<Vec<BwsTuple>> {
    if tuple_size < 2 {
        return Err(Error::InfeasibleTuples(format!("tuple_size must be at least 2, got {tuple_size}")));
    }
    if n_tuples == 0 {
        return Err(Error::InfeasibleTuples("n_tuples must be at least 1".to_string()));
    }
    if item_ids.len() < tuple_size {
        return Err(Error::InfeasibleTuples(format!(
            "{} items cannot fill tuples of {tuple_size} distinct items",
            item_ids.len()
        )));
    }
    let distinct: HashSet<&String> = item_ids.iter().collect();
    if distinct.len() != item_ids.len() {
        return Err(Error::InfeasibleTuples("item ids are not distinct".to_string()));
    }

    let n = item_ids.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut uses = vec![0usize; n];
    let mut pairs = vec![0u32; n * n];
    let mut tuples = Vec::with_capacity(n_tuples);

    for t in 0..n_tuples {
        let mut chosen: Vec<usize> = Vec::with_capacity(tuple_size);
        let mut jitter: Vec<u64> = (0..n).map(|_| rng.random()).collect();
        while chosen.len() < tuple_size {
            let best = (0..n)
                .filter(|i| !chosen.contains(i))
                .min_by_key(|&i| {
                    let pair_load: u32 = chosen.iter().map(|&j| pairs[i * n + j]).sum();
                    (uses[i], pair_load, jitter[i])
                })
                .expect("enough items remain");
            chosen.push(best);
            jitter[best] = u64::MAX;
        }
        for (k, &i) in chosen.iter().enumerate() {
            uses[i] += 1;
            for &j in &chosen[k + 1..] {
                pairs[i * n + j] += 1;
                pairs[j * n + i] += 1;
            }
        }
        chosen.shuffle(&mut rng);
        tuples.push(BwsTuple {
            tuple_id: t as u32 + 1,
            item_ids: chosen.into_iter().map(|i| item_ids[i].clone()).collect(),
        });
    }
    Ok(tuples)
}

fn tuple_index(tuples: &[BwsTuple]) -> Result<HashMap<u32, &BwsTuple>> {
    let mut index = HashMap::with_capacity(tuples.len());
    for t in tuples {
        let distinct: HashSet<&String> = t.item_ids.iter().collect();
        if distinct.len() != t.item_ids.len() || t.item_ids.len() < 2 {
            return Err(Error::InvalidInput(format!("tuple {} does not hold distinct items", t.tuple_id)));
        }
        if index.insert(t.tuple_id, t).is_some() {
            return Err(Error::InvalidInput(format!("duplicate tuple id {}", t.tuple_id)));
        }
    }
    Ok(index)
}

fn check_annotation<'a>(index: &HashMap<u32, &'a BwsTuple>, ann: &BwsAnnotation) -> Result<&'a BwsTuple> {
    let tuple = index
        .get(&ann.tuple_id)
        .ok_or_else(|| Error::InvalidInput(format!("annotation references unknown tuple {}", ann.tuple_id)))?;
    if ann.best == ann.worst {
        return Err(Error::InvalidInput(format!(
            "annotator {} marked {:?} as both best and worst in tuple {}",
            ann.annotator_id, ann.best, ann.tuple_id
        )));
    }
    for item in [&ann.best, &ann.worst] {
        if !tuple.item_ids.contains(item) {
            return Err(Error::InvalidInput(format!("item {item:?} is not in tuple {}", ann.tuple_id)));
        }
    }
    Ok(tuple)
}

/// Counting score over every annotation of `dimension`.
///
/// Every annotation of a tuple adds one appearance to each of the tuple's
/// items. Items with no annotated appearance are absent from the output.
pub fn score_bws(tuples: &[BwsTuple], annotations: &[BwsAnnotation], dimension: Dimension) -> Result<RawScores> {
    let index = tuple_index(tuples)?;
    let mut seen: HashSet<(u32, &str)> = HashSet::new();
    let mut tally: BTreeMap<String, (i64, i64)> = BTreeMap::new();
    for ann in annotations.iter().filter(|a| a.dimension == dimension) {
        let tuple = check_annotation(&index, ann)?;
        if !seen.insert((ann.tuple_id, ann.annotator_id.as_str())) {
            return Err(Error::InvalidInput(format!(
                "annotator {} annotated tuple {} twice for {}",
                ann.annotator_id, ann.tuple_id, dimension
            )));
        }
        for item in &tuple.item_ids {
            tally.entry(item.clone()).or_insert((0, 0)).1 += 1;
        }
        tally.get_mut(&ann.best).expect("tallied").0 += 1;
        tally.get_mut(&ann.worst).expect("tallied").0 -= 1;
    }
    Ok(tally
        .into_iter()
        .map(|(item, (net, appearances))| (item, net as f64 / appearances as f64))
        .collect())
}

/// [`score_bws`] run separately for each annotator.
pub fn score_bws_by_annotator(
    tuples: &[BwsTuple],
    annotations: &[BwsAnnotation],
    dimension: Dimension,
) -> Result<BTreeMap<String, RawScores>> {
    let mut by_annotator: BTreeMap<String, Vec<BwsAnnotation>> = BTreeMap::new();
    for ann in annotations.iter().filter(|a| a.dimension == dimension) {
        by_annotator.entry(ann.annotator_id.clone()).or_default().push(ann.clone());
    }
    by_annotator
        .into_iter()
        .map(|(annotator, anns)| Ok((annotator, score_bws(tuples, &anns, dimension)?)))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GoldScore {
    /// Mean raw score over the annotators that scored the item.
    pub raw: f64,
    /// `(raw + 1) / 2`.
    pub gold: f64,
}

/// Averages annotators' raw scores per item and maps [-1, 1] onto [0, 1].
pub fn aggregate_and_normalize(per_annotator: &[RawScores]) -> Result<BTreeMap<String, GoldScore>> {
    if per_annotator.is_empty() {
        return Err(Error::InsufficientData("no annotator scores to aggregate".to_string()));
    }
    let mut sums: BTreeMap<&str, (f64, usize)> = BTreeMap::new();
    for scores in per_annotator {
        for (item, &raw) in scores {
            if !(-1.0..=1.0).contains(&raw) {
                return Err(Error::InvalidInput(format!("raw score {raw} for {item:?} outside [-1, 1]")));
            }
            let e = sums.entry(item.as_str()).or_insert((0.0, 0));
            e.0 += raw;
            e.1 += 1;
        }
    }
    Ok(sums
        .into_iter()
        .map(|(item, (sum, n))| {
            let raw = sum / n as f64;
            (item.to_string(), GoldScore { raw, gold: ((raw + 1.0) / 2.0).clamp(0.0, 1.0) })
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairAgreement {
    pub first: usize,
    pub second: usize,
    pub common_items: usize,
    /// `None` when either annotator has zero variance on the common items or
    /// there are fewer than 3 of them.
    pub r: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Agreement {
    pub pairs: Vec<PairAgreement>,
    /// Mean over the defined pairs; `None` when no pair is defined.
    pub mean_r: Option<f64>,
    pub warnings: Vec<String>,
}

/// Mean pairwise Pearson correlation between annotators' raw scores.
pub fn pairwise_agreement(per_annotator: &[RawScores]) -> Result<Agreement> {
    if per_annotator.len() < 2 {
        return Err(Error::InsufficientData("agreement needs at least 2 annotators".to_string()));
    }
    let mut pairs = Vec::new();
    let mut warnings = Vec::new();
    for i in 0..per_annotator.len() {
        for j in i + 1..per_annotator.len() {
            let (x, y): (Vec<f64>, Vec<f64>) = per_annotator[i]
                .iter()
                .filter_map(|(item, &a)| per_annotator[j].get(item).map(|&b| (a, b)))
                .unzip();
            let r = if x.len() < 3 {
                warnings.push(format!("annotators {i} and {j} share only {} items; pair excluded", x.len()));
                None
            } else {
                match pearson(&x, &y)? {
                    Correlation::Defined { r, .. } => Some(r),
                    Correlation::ZeroVariance => {
                        warnings.push(format!("annotators {i} and {j}: zero variance; pair excluded"));
                        None
                    }
                }
            };
            pairs.push(PairAgreement { first: i, second: j, common_items: x.len(), r });
        }
    }
    let defined: Vec<f64> = pairs.iter().filter_map(|p| p.r).collect();
    let mean_r = if defined.is_empty() {
        None
    } else {
        Some(defined.iter().sum::<f64>() / defined.len() as f64)
    };
    Ok(Agreement { pairs, mean_r, warnings })
}

/// Writes `tuple_id, item_1 .. item_k` rows under a single header.
pub fn write_tuples<W: Write>(mut w: W, tuples: &[BwsTuple]) -> Result<()> {
    let width = tuples.iter().map(|t| t.item_ids.len()).max().unwrap_or(0);
    write!(w, "tuple_id")?;
    for k in 1..=width {
        write!(w, "\titem{k}")?;
    }
    writeln!(w)?;
    for t in tuples {
        write!(w, "{}", t.tuple_id)?;
        for item in &t.item_ids {
            write!(w, "\t{item}")?;
        }
        writeln!(w)?;
    }
    Ok(())
}

/// Reads `tuple_id<TAB>item...` rows.
pub fn read_tuples<R: BufRead>(reader: R) -> Result<Vec<BwsTuple>> {
    let mut tuples = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() || (i == 0 && line.starts_with("tuple_id\t")) {
            continue;
        }
        let mut cols = line.split('\t');
        let tuple_id = cols
            .next()
            .and_then(|c| c.trim().parse().ok())
            .ok_or_else(|| Error::InvalidInput(format!("tuples line {}: bad tuple id", i + 1)))?;
        let item_ids: Vec<String> = cols.map(|c| c.trim().to_string()).collect();
        tuples.push(BwsTuple { tuple_id, item_ids });
    }
    tuple_index(&tuples)?;
    Ok(tuples)
}

/// Reads `tuple_id<TAB>annotator_id<TAB>dimension<TAB>best<TAB>worst` rows.
pub fn read_annotations<R: BufRead>(reader: R) -> Result<Vec<BwsAnnotation>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() || (i == 0 && line.starts_with("tuple_id\t")) {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').map(str::trim).collect();
        let bad = || Error::InvalidInput(format!("annotations line {}: expected 5 columns", i + 1));
        if cols.len() != 5 {
            return Err(bad());
        }
        out.push(BwsAnnotation {
            tuple_id: cols[0].parse().map_err(|_| bad())?,
            annotator_id: cols[1].to_string(),
            dimension: cols[2].parse()?,
            best: cols[3].to_string(),
            worst: cols[4].to_string(),
        });
    }
    Ok(out)
}

/// Writes `item_id, dimension, raw, gold` rows for several dimensions.
pub fn write_scores<W: Write>(mut w: W, scores: &[(Dimension, BTreeMap<String, GoldScore>)]) -> Result<()> {
    writeln!(w, "item_id\tdimension\traw\tgold")?;
    for (dim, items) in scores {
        for (item, s) in items {
            writeln!(w, "{item}\t{dim}\t{}\t{}", s.raw, s.gold)?;
        }
    }
    Ok(())
}

/// Items that appear in at least one tuple.
pub fn tuple_items(tuples: &[BwsTuple]) -> BTreeSet<String> {
    tuples.iter().flat_map(|t| t.item_ids.iter().cloned()).collect()
}
