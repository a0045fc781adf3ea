#![allow(dead_code)]

use nalgebra::DMatrix;
use polar_core::corpus::{Affiliation, Gender, SentenceRecord};
use polar_core::vad::Vad;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal_matrix(rng: &mut ChaCha8Rng, n: usize, d: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, d, |_, _| StandardNormal.sample(rng))
}

pub fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// A scored sentence with every field filled in.
pub fn record(id: &str, committee: &str, protocol: &str, date: &str, vad: Option<(f64, f64, f64)>) -> SentenceRecord {
    SentenceRecord {
        sentence_id: id.to_string(),
        text: format!("sentence {id}"),
        protocol_id: protocol.to_string(),
        committee: committee.to_string(),
        session: 20,
        date: date.parse().unwrap(),
        speaker_id: "spk".to_string(),
        is_mk: true,
        affiliation: Affiliation::Government,
        gender: Gender::Male,
        vad: vad.map(|(v, a, d)| Vad::new(v, a, d).unwrap()),
    }
}

pub fn random_affiliation(rng: &mut ChaCha8Rng) -> Affiliation {
    match rng.random_range(0..3) {
        0 => Affiliation::Government,
        1 => Affiliation::Opposition,
        _ => Affiliation::Unknown,
    }
}
