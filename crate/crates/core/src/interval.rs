//! Cardinality intervals `[lo, hi]` over the naturals, with `hi` possibly
//! infinite.

use std::cmp::Ordering;
use std::fmt;

use serde::de::{self, Deserializer};
use serde::ser::{SerializeTuple, Serializer};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Interval {
    lo: u64,
    /// `None` is infinity.
    hi: Option<u64>,
}

impl Interval {
    pub const ZERO: Interval = Interval { lo: 0, hi: Some(0) };
    pub const ONE: Interval = Interval { lo: 1, hi: Some(1) };

    pub fn new(lo: u64, hi: Option<u64>) -> Option<Self> {
        match hi {
            Some(h) if h < lo => None,
            _ => Some(Interval { lo, hi }),
        }
    }

    pub fn exact(n: u64) -> Self {
        Interval { lo: n, hi: Some(n) }
    }

    pub fn at_least(lo: u64) -> Self {
        Interval { lo, hi: None }
    }

    pub fn lo(&self) -> u64 {
        self.lo
    }

    pub fn hi(&self) -> Option<u64> {
        self.hi
    }

    pub fn is_exact(&self, n: u64) -> bool {
        self.lo == n && self.hi == Some(n)
    }

    pub fn contains(&self, n: u64) -> bool {
        self.lo <= n && self.hi.is_none_or(|h| n <= h)
    }

    /// `self ⊆ other`.
    pub fn is_within(&self, other: &Interval) -> bool {
        other.lo <= self.lo && cmp_hi(self.hi, other.hi) != Ordering::Greater
    }

    /// Interval sum; infinity absorbs.
    pub fn sum(&self, other: &Interval) -> Interval {
        Interval {
            lo: self.lo.saturating_add(other.lo),
            hi: match (self.hi, other.hi) {
                (Some(a), Some(b)) => a.checked_add(b),
                _ => None,
            },
        }
    }

    /// Least interval containing both.
    pub fn hull(&self, other: &Interval) -> Interval {
        Interval {
            lo: self.lo.min(other.lo),
            hi: match cmp_hi(self.hi, other.hi) {
                Ordering::Less => other.hi,
                _ => self.hi,
            },
        }
    }

    /// Hull of `prior` and `next`, with the upper bound pushed to infinity
    /// when it grew past `prior`'s. Lower bounds are never widened.
    pub fn widen(prior: &Interval, next: &Interval) -> Interval {
        let h = prior.hull(next);
        if cmp_hi(h.hi, prior.hi) == Ordering::Greater {
            Interval { lo: h.lo, hi: None }
        } else {
            h
        }
    }
}

fn cmp_hi(a: Option<u64>, b: Option<u64>) -> Ordering {
    match (a, b) {
        (Some(x), Some(y)) => x.cmp(&y),
        (Some(_), None) => Ordering::Less,
        (None, Some(_)) => Ordering::Greater,
        (None, None) => Ordering::Equal,
    }
}

impl PartialOrd for Interval {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Total order used for canonical sorting only (lo, then hi with ∞ last).
impl Ord for Interval {
    fn cmp(&self, other: &Self) -> Ordering {
        self.lo.cmp(&other.lo).then(cmp_hi(self.hi, other.hi))
    }
}

impl std::iter::Sum for Interval {
    fn sum<I: Iterator<Item = Interval>>(iter: I) -> Self {
        iter.fold(Interval::ZERO, |a, b| a.sum(&b))
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.hi {
            Some(h) => write!(f, "[{},{}]", self.lo, h),
            None => write!(f, "[{},inf)", self.lo),
        }
    }
}

// Encoded as `[lo, hi]` with hi either an integer or the string "inf".
impl Serialize for Interval {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut t = s.serialize_tuple(2)?;
        t.serialize_element(&self.lo)?;
        match self.hi {
            Some(h) => t.serialize_element(&h)?,
            None => t.serialize_element("inf")?,
        }
        t.end()
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum Upper {
    Finite(u64),
    Text(String),
}

impl<'de> Deserialize<'de> for Interval {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let (lo, hi): (u64, Upper) = Deserialize::deserialize(d)?;
        let hi = match hi {
            Upper::Finite(h) => Some(h),
            Upper::Text(t) if t == "inf" => None,
            Upper::Text(t) => return Err(de::Error::custom(format!("upper bound must be an integer or \"inf\", got {t:?}"))),
        };
        Interval::new(lo, hi).ok_or_else(|| de::Error::custom(format!("empty interval [{lo}, {hi:?}]")))
    }
}
