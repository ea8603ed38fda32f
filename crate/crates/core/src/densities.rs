//! Prefix densities of a set of naturals over a finite horizon.
//!
//! For `A ⊆ ℕ` and a horizon `N` the quantities of interest are
//!
//! * prefix lower density  `min_{M in [tail_start, N]} card(A ∩ [1,M]) / M`,
//! * prefix upper density  `max_{M in [tail_start, N]} card(A ∩ [1,M]) / M`,
//! * prefix Banach density `max` over probed windows of `card(A ∩ (s, s+L]) / L`.
//!
//! The first two probe initial segments only; the Banach scan slides windows
//! of every length in a geometric ladder `{⌈N/2^k⌉}` (bounded below by a
//! configurable minimum, default `⌈N/64⌉`) across all start positions
//! `s ≥ 0`. The ladder additionally carries the argmax prefix window, so
//! `prefix_lower ≤ prefix_upper ≤ prefix_banach` holds by construction.
//!
//! Counts are exact integers and every ratio is an exact rational; nothing
//! is rounded until a report is serialized.

use crate::natset::NatSet;
use num_rational::Ratio;
use serde::{Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum DensityError {
    #[error("prefix length {requested} exceeds horizon {horizon}")]
    HorizonExceeded { requested: u64, horizon: u64 },
    #[error("tail_start {tail_start} leaves no M in [tail_start, {n}]")]
    EmptyTailRange { tail_start: u64, n: u64 },
    #[error("window length {min_window} is not in [1, {n}]")]
    BadMinWindow { min_window: u64, n: u64 },
}

/// Best sliding-window count observed for one window length.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct WindowStat {
    pub length: u64,
    pub max_count: u64,
}

pub(crate) fn ratio_as_f64<S: Serializer>(r: &Ratio<u64>, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_f64(*r.numer() as f64 / *r.denom() as f64)
}

/// Exact density statistics of one set at one horizon.
///
/// In memory the three densities are exact rationals; JSON serialization is
/// the report boundary and emits them as `f64`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DensityReport {
    #[serde(serialize_with = "ratio_as_f64")]
    pub prefix_lower: Ratio<u64>,
    #[serde(serialize_with = "ratio_as_f64")]
    pub prefix_upper: Ratio<u64>,
    #[serde(serialize_with = "ratio_as_f64")]
    pub prefix_banach: Ratio<u64>,
    pub horizon: u64,
    pub tail_start: u64,
    pub window_ladder: Vec<WindowStat>,
}

/// Exact counts `card(A ∩ [1, M])` for `M = 1..=n`.
pub fn prefix_counts(a: &NatSet, n: u64) -> Result<Vec<u64>, DensityError> {
    if n > a.horizon() {
        return Err(DensityError::HorizonExceeded { requested: n, horizon: a.horizon() });
    }
    let mut counts = Vec::with_capacity(n as usize);
    let mut idx = 0usize;
    let elements = a.elements();
    for m in 1..=n {
        while idx < elements.len() && elements[idx] <= m {
            idx += 1;
        }
        counts.push(idx as u64);
    }
    Ok(counts)
}

/// Largest `card(A ∩ (s, s+len])` over all starts `s ≥ 0` with `s+len ≤ n`,
/// by a two-pointer sweep over the element list.
fn best_window_count(a: &NatSet, n: u64, len: u64) -> u64 {
    debug_assert!(len >= 1 && len <= n);
    let elements = a.elements();
    let mut best = 0u64;
    let mut lo = 0usize; // first element > s
    let mut hi = 0usize; // first element > s + len
    for s in 0..=(n - len) {
        while lo < elements.len() && elements[lo] <= s {
            lo += 1;
        }
        while hi < elements.len() && elements[hi] <= s + len {
            hi += 1;
        }
        best = best.max((hi - lo) as u64);
        if hi == elements.len() && lo == hi {
            break; // no elements beyond s: later windows are empty
        }
    }
    best
}

/// Geometric ladder `⌈n/2^k⌉`, descending, bounded below by `min_window`.
fn ladder_lengths(n: u64, min_window: u64) -> Vec<u64> {
    let mut lengths = Vec::new();
    for k in 0..64 {
        let l = n.div_ceil(1u64 << k);
        if l < min_window {
            break;
        }
        if lengths.last() != Some(&l) {
            lengths.push(l);
        }
    }
    lengths
}

/// [`density_report_with`] at the default minimum window `⌈n/64⌉`.
pub fn density_report(a: &NatSet, n: u64, tail_start: u64) -> Result<DensityReport, DensityError> {
    density_report_with(a, n, tail_start, n.div_ceil(64))
}

/// Density statistics of `A` at horizon `n` with prefix statistics taken
/// over `M ∈ [tail_start, n]` and the Banach ladder bounded below by
/// `min_window`.
pub fn density_report_with(
    a: &NatSet,
    n: u64,
    tail_start: u64,
    min_window: u64,
) -> Result<DensityReport, DensityError> {
    if n > a.horizon() {
        return Err(DensityError::HorizonExceeded { requested: n, horizon: a.horizon() });
    }
    if tail_start == 0 || tail_start > n {
        return Err(DensityError::EmptyTailRange { tail_start, n });
    }
    if min_window == 0 || min_window > n {
        return Err(DensityError::BadMinWindow { min_window, n });
    }

    let elements = a.elements();
    let mut idx = elements.partition_point(|&e| e < tail_start);
    let mut lower = Ratio::new(1u64, 1u64);
    let mut upper = Ratio::new(0u64, 1u64);
    let mut upper_argmax = tail_start;
    for m in tail_start..=n {
        while idx < elements.len() && elements[idx] <= m {
            idx += 1;
        }
        let r = Ratio::new(idx as u64, m);
        if r < lower {
            lower = r;
        }
        if r > upper {
            upper = r;
            upper_argmax = m;
        }
    }

    let mut lengths = ladder_lengths(n, min_window);
    if !lengths.contains(&upper_argmax) {
        lengths.push(upper_argmax);
    }
    let window_ladder: Vec<WindowStat> = lengths
        .into_iter()
        .map(|length| WindowStat { length, max_count: best_window_count(a, n, length) })
        .collect();
    let prefix_banach = window_ladder
        .iter()
        .map(|w| Ratio::new(w.max_count, w.length))
        .max()
        .expect("ladder is nonempty");

    Ok(DensityReport {
        prefix_lower: lower,
        prefix_upper: upper,
        prefix_banach,
        horizon: n,
        tail_start,
        window_ladder,
    })
}

/// Brute-force Banach density oracle: exact maximum of
/// `card(A ∩ (s, s+L]) / L` over **every** length `L ≤ n` and every start.
/// Quadratic in `n`; intended as the reference the ladder scan is checked
/// against.
pub fn banach_density_oracle(a: &NatSet, n: u64) -> Ratio<u64> {
    let lengths: Vec<u64> = (1..=n).collect();
    banach_density_oracle_over(a, n, &lengths)
}

/// The oracle restricted to the given window lengths, via a dense prefix
/// count array rather than the element-list sweep used by the report.
pub fn banach_density_oracle_over(a: &NatSet, n: u64, lengths: &[u64]) -> Ratio<u64> {
    assert!(n <= a.horizon(), "oracle horizon {n} beyond set horizon {}", a.horizon());
    let mut cum = vec![0u64; n as usize + 1];
    for e in a.iter().take_while(|&e| e <= n) {
        cum[e as usize] = 1;
    }
    for i in 1..cum.len() {
        cum[i] += cum[i - 1];
    }
    let mut best = Ratio::new(0u64, 1u64);
    for &len in lengths {
        assert!(len >= 1 && len <= n, "window length {len} not in [1, {n}]");
        let mut max_count = 0u64;
        for s in 0..=(n - len) as usize {
            max_count = max_count.max(cum[s + len as usize] - cum[s]);
        }
        let r = Ratio::new(max_count, len);
        if r > best {
            best = r;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sparse_blocks(n: u64) -> NatSet {
        // ∪_l [10^l, 10^l + 2l] truncated at n
        let intervals: Vec<(u64, u64)> = (1..=6u32)
            .map(|l| (10u64.pow(l), 10u64.pow(l) + 2 * l as u64))
            .collect();
        NatSet::from_intervals(&intervals, n)
    }

    #[test]
    fn prefix_counts_full_and_empty() {
        let n100 = prefix_counts(&NatSet::all(100), 100).unwrap();
        assert_eq!(n100.last(), Some(&100));
        assert_eq!(n100[0], 1);
        let evens = prefix_counts(&NatSet::multiples(2, 101), 101).unwrap();
        assert_eq!(evens.last(), Some(&50));
        assert_eq!(evens[6], 3);
        let empty = prefix_counts(&NatSet::empty(10), 10).unwrap();
        assert_eq!(empty, vec![0; 10]);
    }

    #[test]
    fn prefix_counts_horizon_error_names_horizon() {
        let err = prefix_counts(&NatSet::all(10), 11).unwrap_err();
        assert_eq!(err, DensityError::HorizonExceeded { requested: 11, horizon: 10 });
    }

    #[test]
    fn naturals_have_density_one_exactly() {
        let r = density_report(&NatSet::all(10_000), 10_000, 100).unwrap();
        let one = Ratio::new(1u64, 1u64);
        assert_eq!(r.prefix_lower, one);
        assert_eq!(r.prefix_upper, one);
        assert_eq!(r.prefix_banach, one);
    }

    #[test]
    fn evens_stay_within_a_percent_of_half() {
        let r = density_report(&NatSet::multiples(2, 10_000), 10_000, 100).unwrap();
        let half = Ratio::new(1u64, 2u64);
        let tol = Ratio::new(1u64, 100u64);
        for d in [r.prefix_lower, r.prefix_upper, r.prefix_banach] {
            let dev = if d > half { d - half } else { half - d };
            assert!(dev <= tol, "deviation {dev} above 1/100");
        }
    }

    /// Expected values frozen from `banach_density_oracle` and a direct
    /// prefix scan; the growing gaps drive every density to zero in the
    /// limit but the finite-horizon values below are exact.
    #[test]
    fn sparse_blocks_exact_values() {
        let a = sparse_blocks(10_000);
        let r = density_report(&a, 10_000, 100).unwrap();
        assert_eq!(r.prefix_upper, Ratio::new(1u64, 13u64)); // 8/104 at M = 104
        assert_eq!(r.prefix_lower, Ratio::new(5u64, 3333u64)); // 15/9999
        assert_eq!(r.prefix_banach, Ratio::new(1u64, 13u64)); // argmax prefix window wins
        // The ladder alone (without the argmax entry) peaks at 8/157.
        let geometric = ladder_lengths(10_000, 157);
        assert_eq!(geometric, vec![10_000, 5000, 2500, 1250, 625, 313, 157]);
        assert_eq!(banach_density_oracle_over(&a, 10_000, &geometric), Ratio::new(8u64, 157u64));
        // Later tail: the prefix statistics decay below 1/100.
        let r2 = density_report(&a, 10_000, 2000).unwrap();
        assert!(r2.prefix_upper <= Ratio::new(1u64, 100u64));
    }

    #[test]
    fn ladder_matches_oracle_on_its_lengths() {
        let a = sparse_blocks(2000);
        let r = density_report(&a, 2000, 50).unwrap();
        let lengths: Vec<u64> = r.window_ladder.iter().map(|w| w.length).collect();
        assert_eq!(r.prefix_banach, banach_density_oracle_over(&a, 2000, &lengths));
    }

    #[test]
    fn full_oracle_dominates_ladder() {
        let a = NatSet::new(vec![3, 4, 5, 40, 41, 900], 1000).unwrap();
        let r = density_report(&a, 1000, 10).unwrap();
        assert!(banach_density_oracle(&a, 1000) >= r.prefix_banach);
    }

    #[test]
    fn ordering_invariant() {
        let a = NatSet::new(vec![1, 2, 3, 500, 501], 1000).unwrap();
        let r = density_report(&a, 1000, 4).unwrap();
        assert!(r.prefix_lower <= r.prefix_upper);
        assert!(r.prefix_upper <= r.prefix_banach);
        assert!(r.prefix_banach <= Ratio::new(1u64, 1u64));
    }

    #[test]
    fn empty_tail_range_is_an_error() {
        let a = NatSet::all(100);
        assert!(matches!(
            density_report(&a, 100, 101),
            Err(DensityError::EmptyTailRange { .. })
        ));
        assert!(matches!(density_report(&a, 100, 0), Err(DensityError::EmptyTailRange { .. })));
    }

    #[test]
    fn report_serializes_ratios_as_f64_at_boundary() {
        let r = density_report(&NatSet::multiples(2, 1000), 1000, 10).unwrap();
        let v: serde_json::Value = serde_json::from_str(&serde_json::to_string(&r).unwrap()).unwrap();
        assert!(v["prefix_lower"].is_f64());
        assert!(v["horizon"].is_u64());
        assert!(v["window_ladder"].is_array());
        let names: Vec<&str> = v.as_object().unwrap().keys().map(|s| s.as_str()).collect();
        for required in ["prefix_lower", "prefix_upper", "prefix_banach", "horizon", "window_ladder"] {
            assert!(names.contains(&required), "missing field {required}");
        }
    }
}
