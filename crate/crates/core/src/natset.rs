//! Finite truncations of sets of naturals.
//!
//! A [`NatSet`] stores the elements of a set `A ⊆ ℕ` (naturals start at 1)
//! that are `≤ horizon`, in strictly increasing order. Membership and
//! counting queries are exact up to the horizon and refuse to answer beyond
//! it; nothing is inferred about the unseen tail.

use serde::ser::SerializeSeq;
use serde::{Serialize, Serializer};
use std::io::{BufRead, Write};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum NatSetError {
    #[error("element {element} at index {index} breaks strict increase")]
    NotIncreasing { index: usize, element: u64 },
    #[error("0 is not a natural; elements start at 1")]
    ZeroElement,
    #[error("element {element} exceeds horizon {horizon}")]
    BeyondHorizon { element: u64, horizon: u64 },
    #[error("horizon must be at least 1")]
    ZeroHorizon,
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("line {line}: {source}")]
    Parse {
        line: usize,
        source: std::num::ParseIntError,
    },
}

/// Elements of a subset of the naturals up to a horizon, sorted ascending.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NatSet {
    elements: Vec<u64>,
    horizon: u64,
}

impl NatSet {
    pub fn new(elements: Vec<u64>, horizon: u64) -> Result<NatSet, NatSetError> {
        if horizon == 0 {
            return Err(NatSetError::ZeroHorizon);
        }
        let mut prev = 0u64;
        for (index, &element) in elements.iter().enumerate() {
            if element == 0 {
                return Err(NatSetError::ZeroElement);
            }
            if element <= prev {
                return Err(NatSetError::NotIncreasing { index, element });
            }
            if element > horizon {
                return Err(NatSetError::BeyondHorizon { element, horizon });
            }
            prev = element;
        }
        Ok(NatSet { elements, horizon })
    }

    pub fn empty(horizon: u64) -> NatSet {
        NatSet { elements: Vec::new(), horizon }
    }

    /// All naturals `1..=horizon`.
    pub fn all(horizon: u64) -> NatSet {
        NatSet { elements: (1..=horizon).collect(), horizon }
    }

    /// Positive multiples of `k` up to the horizon.
    pub fn multiples(k: u64, horizon: u64) -> NatSet {
        assert!(k >= 1);
        NatSet { elements: (1..=horizon / k).map(|n| n * k).collect(), horizon }
    }

    /// Union of closed intervals `[a, b]`, clipped to the horizon.
    /// Intervals may touch or overlap; the result deduplicates.
    pub fn from_intervals(intervals: &[(u64, u64)], horizon: u64) -> NatSet {
        let mut elements: Vec<u64> = intervals
            .iter()
            .flat_map(|&(a, b)| a.max(1)..=b.min(horizon))
            .collect();
        elements.sort_unstable();
        elements.dedup();
        NatSet { elements, horizon }
    }

    pub fn horizon(&self) -> u64 {
        self.horizon
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn elements(&self) -> &[u64] {
        &self.elements
    }

    pub fn iter(&self) -> impl Iterator<Item = u64> + '_ {
        self.elements.iter().copied()
    }

    pub fn min(&self) -> Option<u64> {
        self.elements.first().copied()
    }

    pub fn max(&self) -> Option<u64> {
        self.elements.last().copied()
    }

    /// Membership for `n ≤ horizon`. Panics beyond the horizon, where the
    /// set is not determined.
    pub fn contains(&self, n: u64) -> bool {
        assert!(n <= self.horizon, "membership query {n} beyond horizon {}", self.horizon);
        self.elements.binary_search(&n).is_ok()
    }

    /// Number of elements `≤ n`, exact for `n ≤ horizon`.
    pub fn count_leq(&self, n: u64) -> u64 {
        assert!(n <= self.horizon, "count query {n} beyond horizon {}", self.horizon);
        self.elements.partition_point(|&e| e <= n) as u64
    }

    /// The same set viewed up to a smaller horizon.
    pub fn restrict(&self, horizon: u64) -> NatSet {
        assert!(horizon >= 1 && horizon <= self.horizon);
        let keep = self.elements.partition_point(|&e| e <= horizon);
        NatSet { elements: self.elements[..keep].to_vec(), horizon }
    }

    /// Elements `≥ min`, same horizon.
    pub fn tail_from(&self, min: u64) -> NatSet {
        let skip = self.elements.partition_point(|&e| e < min);
        NatSet { elements: self.elements[skip..].to_vec(), horizon: self.horizon }
    }

    /// First element `≥ min`, if any.
    pub fn first_geq(&self, min: u64) -> Option<u64> {
        let i = self.elements.partition_point(|&e| e < min);
        self.elements.get(i).copied()
    }

    /// Borrowed view of the elements in `[lo, hi]`.
    pub fn range(&self, lo: u64, hi: u64) -> &[u64] {
        let a = self.elements.partition_point(|&e| e < lo);
        let b = self.elements.partition_point(|&e| e <= hi);
        &self.elements[a..b.max(a)]
    }

    /// Newline-delimited decimal integers.
    pub fn write_lines<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for e in &self.elements {
            writeln!(w, "{e}")?;
        }
        Ok(())
    }

    pub fn save_lines<P: AsRef<Path>>(&self, path: P) -> std::io::Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_lines(&mut f)?;
        f.flush()
    }

    /// Parse newline-delimited decimals. Blank lines are skipped. The
    /// horizon defaults to the largest element when not given.
    pub fn read_lines<R: BufRead>(r: R, horizon: Option<u64>) -> Result<NatSet, NatSetError> {
        let mut elements = Vec::new();
        for (i, line) in r.lines().enumerate() {
            let line = line?;
            let t = line.trim();
            if t.is_empty() {
                continue;
            }
            let e: u64 = t.parse().map_err(|source| NatSetError::Parse { line: i + 1, source })?;
            elements.push(e);
        }
        let horizon = horizon.unwrap_or_else(|| elements.iter().copied().max().unwrap_or(1));
        NatSet::new(elements, horizon)
    }

    pub fn load_lines<P: AsRef<Path>>(path: P, horizon: Option<u64>) -> Result<NatSet, NatSetError> {
        let f = std::io::BufReader::new(std::fs::File::open(path)?);
        NatSet::read_lines(f, horizon)
    }
}

/// Boundary form: a bare JSON array of the elements. The horizon travels in
/// the surrounding document.
impl Serialize for NatSet {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut seq = serializer.serialize_seq(Some(self.elements.len()))?;
        for e in &self.elements {
            seq.serialize_element(e)?;
        }
        seq.end()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation() {
        assert!(NatSet::new(vec![1, 2, 2], 10).is_err());
        assert!(NatSet::new(vec![2, 1], 10).is_err());
        assert!(NatSet::new(vec![0, 1], 10).is_err());
        assert!(NatSet::new(vec![11], 10).is_err());
        assert!(NatSet::new(vec![], 0).is_err());
        assert!(NatSet::new(vec![1, 5, 10], 10).is_ok());
    }

    #[test]
    fn counting_and_membership() {
        let a = NatSet::multiples(2, 101);
        assert_eq!(a.len(), 50);
        assert_eq!(a.count_leq(101), 50);
        assert_eq!(a.count_leq(7), 3);
        assert!(a.contains(100));
        assert!(!a.contains(99));
    }

    #[test]
    #[should_panic(expected = "beyond horizon")]
    fn membership_beyond_horizon_panics() {
        NatSet::all(10).contains(11);
    }

    #[test]
    fn intervals_clip_and_dedup() {
        let a = NatSet::from_intervals(&[(10, 12), (11, 13), (98, 200)], 100);
        assert_eq!(a.elements(), &[10, 11, 12, 13, 98, 99, 100]);
    }

    #[test]
    fn line_roundtrip() {
        let a = NatSet::new(vec![3, 17, 40], 50).unwrap();
        let mut buf = Vec::new();
        a.write_lines(&mut buf).unwrap();
        let b = NatSet::read_lines(&buf[..], Some(50)).unwrap();
        assert_eq!(a, b);
        let c = NatSet::read_lines(&buf[..], None).unwrap();
        assert_eq!(c.horizon(), 40);
    }

    #[test]
    fn json_is_bare_array() {
        let a = NatSet::new(vec![2, 4], 9).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), "[2,4]");
    }
}
