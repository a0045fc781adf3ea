//! The three affective dimensions and the score triple shared by every module.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One of Valence, Arousal, Dominance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Dimension {
    #[serde(rename = "V")]
    Valence,
    #[serde(rename = "A")]
    Arousal,
    #[serde(rename = "D")]
    Dominance,
}

impl Dimension {
    pub const ALL: [Dimension; 3] = [Dimension::Valence, Dimension::Arousal, Dimension::Dominance];

    /// Single-letter label used in file formats and metric names.
    pub fn letter(self) -> char {
        match self {
            Dimension::Valence => 'V',
            Dimension::Arousal => 'A',
            Dimension::Dominance => 'D',
        }
    }

    pub fn index(self) -> usize {
        match self {
            Dimension::Valence => 0,
            Dimension::Arousal => 1,
            Dimension::Dominance => 2,
        }
    }
}

impl fmt::Display for Dimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.letter())
    }
}

impl FromStr for Dimension {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "V" | "v" | "valence" | "Valence" => Ok(Dimension::Valence),
            "A" | "a" | "arousal" | "Arousal" => Ok(Dimension::Arousal),
            "D" | "d" | "dominance" | "Dominance" => Ok(Dimension::Dominance),
            other => Err(Error::InvalidInput(format!("unknown dimension {other:?}"))),
        }
    }
}

/// A (valence, arousal, dominance) triple, each component in [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Vad {
    pub v: f64,
    pub a: f64,
    pub d: f64,
}

impl Vad {
    pub const MIDPOINT: Vad = Vad {
        v: 0.5,
        a: 0.5,
        d: 0.5,
    };

    /// Builds a triple, rejecting components outside [0, 1] (and NaN).
    pub fn new(v: f64, a: f64, d: f64) -> Result<Self> {
        for (name, x) in [("v", v), ("a", a), ("d", d)] {
            if !in_unit_interval(x) {
                return Err(Error::InvalidInput(format!("{name} = {x} outside [0, 1]")));
            }
        }
        Ok(Vad { v, a, d })
    }

    pub fn get(&self, dim: Dimension) -> f64 {
        match dim {
            Dimension::Valence => self.v,
            Dimension::Arousal => self.a,
            Dimension::Dominance => self.d,
        }
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.v, self.a, self.d]
    }
}

pub(crate) fn in_unit_interval(x: f64) -> bool {
    (0.0..=1.0).contains(&x)
}
