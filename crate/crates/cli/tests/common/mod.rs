#![allow(dead_code)]

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use polar_core::corpus::{write_corpus, Affiliation, Gender, SentenceRecord};
use polar_core::vad::Vad;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn binary() -> PathBuf {
    PathBuf::from(env!("CARGO_BIN_EXE_polar"))
}

/// Runs `polar` in `dir` with no `POLAR_*` variables inherited.
pub fn polar(dir: &Path, args: &[&str]) -> Output {
    polar_env(dir, args, &[])
}

pub fn polar_env(dir: &Path, args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(binary());
    cmd.current_dir(dir).args(args);
    for (k, _) in std::env::vars() {
        if k.starts_with("POLAR_") {
            cmd.env_remove(k);
        }
    }
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().expect("polar binary runs")
}

/// Runs `polar` and panics with its stderr unless it succeeds.
pub fn polar_ok(dir: &Path, args: &[&str]) -> Output {
    let out = polar(dir, args);
    assert!(
        out.status.success(),
        "polar {} failed: {}",
        args.join(" "),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

pub fn sentence(
    id: String,
    committee: &str,
    protocol: &str,
    date: chrono::NaiveDate,
    session: u32,
    text: String,
    affiliation: Affiliation,
    vad: Option<Vad>,
) -> SentenceRecord {
    SentenceRecord {
        sentence_id: id,
        text,
        protocol_id: protocol.to_string(),
        committee: committee.to_string(),
        session,
        date,
        speaker_id: "speaker".to_string(),
        is_mk: true,
        affiliation,
        gender: Gender::Male,
        vad,
    }
}

pub fn day(offset: u64) -> chrono::NaiveDate {
    chrono::NaiveDate::from_ymd_opt(2000, 1, 1).unwrap() + chrono::Days::new(offset)
}

pub fn save_corpus(path: &Path, records: &[SentenceRecord]) {
    let mut buf = Vec::new();
    write_corpus(&mut buf, records).unwrap();
    fs::write(path, buf).unwrap();
}

/// A lexicon word with its scores.
#[derive(Debug, Clone)]
pub struct Word {
    pub form: String,
    pub vad: [f64; 3],
}

pub fn lexicon_tsv(words: &[Word]) -> String {
    let mut s = String::from("source_term\tform\tkind\tv\ta\td\n");
    for w in words {
        writeln!(s, "{0}\t{0}\tlemma\t{1}\t{2}\t{3}", w.form, w.vad[0], w.vad[1], w.vad[2]).unwrap();
    }
    s
}

/// Neutral words (`n*`, arousal around 0.45) and arousing words (`x*`,
/// arousal around 0.85); valence and dominance are unrelated to the split.
pub fn arousal_lexicon(r: &mut ChaCha8Rng) -> (Vec<Word>, Vec<Word>) {
    let mut make = |prefix: &str, n: usize, a_lo: f64, a_hi: f64| -> Vec<Word> {
        (0..n)
            .map(|i| Word {
                form: format!("{prefix}{i}"),
                vad: [r.random_range(0.2..0.8), r.random_range(a_lo..a_hi), r.random_range(0.2..0.8)],
            })
            .collect()
    };
    let neutral = make("n", 150, 0.35, 0.55);
    let arousing = make("x", 50, 0.75, 0.95);
    (neutral, arousing)
}

pub const PLANTED: &str = "Planted";
pub const CONTROLS: [&str; 2] = ["ControlA", "ControlB"];

/// Three committees of `protocols` protocols with `per_protocol` sentences of
/// ten words each. In the planted committee the chance of drawing an
/// arousing word grows by 0.0025 per protocol, which raises the mean lexicon
/// arousal of its sentences by 0.001 per protocol; the controls stay at 0.1.
pub fn planted_drift_corpus(
    r: &mut ChaCha8Rng,
    neutral: &[Word],
    arousing: &[Word],
    protocols: usize,
    per_protocol: usize,
) -> Vec<SentenceRecord> {
    let mut out = Vec::with_capacity(3 * protocols * per_protocol);
    for committee in [PLANTED, CONTROLS[0], CONTROLS[1]] {
        for t in 0..protocols {
            let p = if committee == PLANTED { 0.1 + 0.0025 * t as f64 } else { 0.1 };
            let protocol = format!("{committee}-{t:04}");
            for s in 0..per_protocol {
                let words: Vec<&str> = (0..10)
                    .map(|_| {
                        let pool = if r.random_bool(p.min(1.0)) { arousing } else { neutral };
                        pool[r.random_range(0..pool.len())].form.as_str()
                    })
                    .collect();
                let aff = if r.random_bool(0.5) { Affiliation::Government } else { Affiliation::Opposition };
                out.push(sentence(
                    format!("{protocol}-{s:03}"),
                    committee,
                    &protocol,
                    day(t as u64),
                    15 + (t / 40) as u32,
                    words.join(" "),
                    aff,
                    None,
                ));
            }
        }
    }
    out
}

/// Reads a committee-by-column grid into `committee -> column -> value`.
pub fn read_grid(path: &Path) -> BTreeMap<String, BTreeMap<String, String>> {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split('\t').collect();
    let mut out = BTreeMap::new();
    for line in lines {
        let cols: Vec<&str> = line.split('\t').collect();
        let row = header[1..].iter().zip(&cols[1..]).map(|(h, v)| (h.to_string(), v.to_string())).collect();
        out.insert(cols[0].to_string(), row);
    }
    out
}

/// Reads a headed TSV into rows keyed by column name.
pub fn read_table(path: &Path) -> Vec<BTreeMap<String, String>> {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split('\t').collect();
    lines
        .map(|l| header.iter().zip(l.split('\t')).map(|(h, v)| (h.to_string(), v.to_string())).collect())
        .collect()
}

/// Every file under `dir` with its bytes, keyed by relative path.
pub fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(dir).unwrap().display().to_string();
                out.insert(rel, fs::read(&path).unwrap());
            }
        }
    }
    out
}
