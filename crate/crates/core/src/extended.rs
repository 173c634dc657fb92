use std::cmp::Ordering;
use std::fmt;

use serde::{Serialize, Serializer};

/// A value in `[−∞, +∞)` extended by `+∞`; rate functions take `+∞` outside
/// their effective domain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Extended {
    Finite(f64),
    PosInfinity,
}

impl Extended {
    pub fn is_finite(self) -> bool {
        matches!(self, Extended::Finite(_))
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            Extended::Finite(v) => Some(v),
            Extended::PosInfinity => None,
        }
    }

    /// Lossy view as a float, `f64::INFINITY` for `+∞`.
    pub fn to_f64(self) -> f64 {
        self.finite().unwrap_or(f64::INFINITY)
    }

    pub fn plus(self, other: f64) -> Extended {
        match self {
            Extended::Finite(v) => Extended::Finite(v + other),
            Extended::PosInfinity => Extended::PosInfinity,
        }
    }

    pub fn min(self, other: Extended) -> Extended {
        if other < self {
            other
        } else {
            self
        }
    }
}

impl PartialOrd for Extended {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        match (self, other) {
            (Extended::Finite(a), Extended::Finite(b)) => a.partial_cmp(b),
            (Extended::Finite(_), Extended::PosInfinity) => Some(Ordering::Less),
            (Extended::PosInfinity, Extended::Finite(_)) => Some(Ordering::Greater),
            (Extended::PosInfinity, Extended::PosInfinity) => Some(Ordering::Equal),
        }
    }
}

impl From<f64> for Extended {
    fn from(v: f64) -> Self {
        if v == f64::INFINITY {
            Extended::PosInfinity
        } else {
            Extended::Finite(v)
        }
    }
}

impl fmt::Display for Extended {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Extended::Finite(v) => fmt::Display::fmt(v, f),
            Extended::PosInfinity => f.write_str("inf"),
        }
    }
}

/// Finite values as JSON numbers, `+∞` as the string `"inf"`.
impl Serialize for Extended {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            Extended::Finite(v) => serializer.serialize_f64(*v),
            Extended::PosInfinity => serializer.serialize_str("inf"),
        }
    }
}
