//! Construction and verification of multiplicatively separated families.
//!
//! Given source sets `B_1, ..., B_J`, separation lengths `N_j`, and a
//! multiplier bound `Q`, the goal is a family `A_j ⊆ B_j` of pairwise
//! disjoint sets with `min A_j ≥ N_j` and
//!
//! ```text
//! |q·n − q'·m| ≥ N_j + N_j'   for all n ∈ A_j, m ∈ A_j', n ≠ m, 1 ≤ q, q' ≤ Q,
//! ```
//!
//! while keeping as much of the source size structure as the family tag
//! demands: every `A_j` infinite (here: nonempty up to the horizon), of
//! positive upper Banach density, or of positive lower/upper density.
//!
//! All separation arithmetic is exact: pair margins in `i128`, ratio powers
//! in `BigRational`. Floating point never enters the constructions.

use std::collections::BTreeSet;

use num_bigint::BigInt;
use num_rational::{BigRational, Ratio};
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::densities::{self, density_report};
use crate::natset::{NatSet, NatSetError};

/// Which density notion the constructed family must preserve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyTag {
    Infinite,
    UpperBanach,
    LowerDensity,
    UpperDensity,
}

impl FamilyTag {
    pub fn as_str(self) -> &'static str {
        match self {
            FamilyTag::Infinite => "infinite",
            FamilyTag::UpperBanach => "upper_banach",
            FamilyTag::LowerDensity => "lower_density",
            FamilyTag::UpperDensity => "upper_density",
        }
    }
}

/// Parameters of a separation problem.
///
/// `n_seq[j]` is the separation length `N_{j+1}` of the j-th set, `q` the
/// multiplier bound `Q ≥ 1`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeparationSpec {
    #[serde(rename = "N_seq")]
    pub n_seq: Vec<u64>,
    #[serde(rename = "Q")]
    pub q: u64,
    pub family: FamilyTag,
}

impl SeparationSpec {
    pub fn new(n_seq: Vec<u64>, q: u64, family: FamilyTag) -> Result<Self, SetConstructError> {
        if n_seq.is_empty() {
            return Err(SetConstructError::BadSpec("N_seq must be nonempty".into()));
        }
        if n_seq.iter().any(|&n| n == 0) {
            return Err(SetConstructError::BadSpec("every N_j must be ≥ 1".into()));
        }
        if q == 0 {
            return Err(SetConstructError::BadSpec("Q must be ≥ 1".into()));
        }
        Ok(SeparationSpec { n_seq, q, family })
    }

    pub fn len(&self) -> usize {
        self.n_seq.len()
    }

    pub fn is_empty(&self) -> bool {
        self.n_seq.is_empty()
    }
}

/// A constructed family together with the spec it satisfies.
///
/// `source` keeps the sets the family was carved out of when they are known;
/// it is not serialized.
#[derive(Debug, Clone, PartialEq)]
pub struct SeparatedFamily {
    pub spec: SeparationSpec,
    pub sets: Vec<NatSet>,
    pub horizon: u64,
    pub source: Option<Vec<NatSet>>,
}

#[derive(Serialize, Deserialize)]
struct FamilyWire {
    spec: SeparationSpec,
    sets: Vec<Vec<u64>>,
    horizon: u64,
}

impl Serialize for SeparatedFamily {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        FamilyWire {
            spec: self.spec.clone(),
            sets: self.sets.iter().map(|a| a.elements().to_vec()).collect(),
            horizon: self.horizon,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for SeparatedFamily {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let wire = FamilyWire::deserialize(d)?;
        let sets = wire
            .sets
            .into_iter()
            .map(|v| NatSet::new(v, wire.horizon))
            .collect::<Result<Vec<_>, _>>()
            .map_err(serde::de::Error::custom)?;
        if sets.len() != wire.spec.n_seq.len() {
            return Err(serde::de::Error::custom(
                "number of sets does not match N_seq length",
            ));
        }
        Ok(SeparatedFamily {
            spec: wire.spec,
            sets,
            horizon: wire.horizon,
            source: None,
        })
    }
}

/// One block placed by the upper-Banach construction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BlockRecord {
    /// 1-based set index.
    pub set: usize,
    pub round: u64,
    /// Window is the integer range `(start, start + len]`.
    pub start: u64,
    pub len: u64,
    /// Source elements available in the window.
    pub available: u64,
    /// Elements actually taken after 2N_j-spacing thinning.
    pub taken: u64,
    /// taken / len.
    #[serde(serialize_with = "densities::ratio_as_f64")]
    pub rate: Ratio<u64>,
    /// The guaranteed floor D_j / (2 N_j).
    #[serde(serialize_with = "densities::ratio_as_f64")]
    pub target_rate: Ratio<u64>,
}

/// Result of the upper-Banach construction: the family plus per-block
/// placement diagnostics.
#[derive(Debug, Clone)]
pub struct BanachConstruction {
    pub family: SeparatedFamily,
    pub blocks: Vec<BlockRecord>,
}

/// First failed check found by [`verify_separation`], in check order:
/// subsets, minimum elements, disjointness, pair margins.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    Subset { set: usize, element: u64 },
    MinElement { set: usize, element: u64, required: u64 },
    Disjoint { set_a: usize, set_b: usize, element: u64 },
    Pair(PairWitness),
}

/// A concrete pair `|q·n − q'·m| < N_j + N_j'` (1-based set indices).
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PairWitness {
    pub set_n: usize,
    pub set_m: usize,
    pub n: u64,
    pub m: u64,
    pub q: u64,
    pub qp: u64,
    pub margin: i64,
}

/// Outcome of the brute-force separation check.
#[derive(Debug, Clone, Serialize)]
pub struct SeparationReport {
    pub ok: bool,
    /// min over all checked pairs of |q n − q' m| − (N_j + N_j'); None when
    /// there were no pairs to check.
    pub min_margin: Option<i64>,
    pub pair_checks: u64,
    pub subset_checked: bool,
    /// The first violation in check order, if any.
    pub violation: Option<Violation>,
}

#[derive(Debug, thiserror::Error)]
pub enum SetConstructError {
    #[error("invalid separation spec: {0}")]
    BadSpec(String),
    /// The greedy construction ran out of horizon before populating every
    /// set. The partial family still satisfies all separation constraints.
    #[error("horizon {horizon} exhausted before sets {empty_sets:?} received any element")]
    PartialResult {
        family: Box<SeparatedFamily>,
        empty_sets: Vec<usize>,
        horizon: u64,
    },
    /// No window of any admissible length reaches the requested density.
    #[error(
        "set {set}: no window of length ≥ {min_len} reaches density {required} \
         (best seen {best_seen} over {windows_scanned} windows)"
    )]
    NoWindow {
        set: usize,
        min_len: u64,
        required: Ratio<u64>,
        best_seen: Ratio<u64>,
        windows_scanned: u64,
    },
    /// The lower-density refinement found no geometric block carrying its
    /// share of the set.
    #[error(
        "ratio {r}: no geometric block [r^m, r^(m+1)] within horizon {horizon} \
         holds a d/4 share of the set ({elements} elements, {blocks_scanned} blocks scanned)"
    )]
    NoQualifyingBlock {
        r: Ratio<u64>,
        horizon: u64,
        elements: u64,
        blocks_scanned: u64,
    },
    #[error("ratio refinement needs r > 1, got {r}")]
    RatioNotAboveOne { r: Ratio<u64> },
    #[error(transparent)]
    Nat(#[from] NatSetError),
}

fn validate_inputs(
    sources: &[NatSet],
    spec: &SeparationSpec,
    horizon: u64,
    expect: &[FamilyTag],
) -> Result<(), SetConstructError> {
    if !expect.contains(&spec.family) {
        return Err(SetConstructError::BadSpec(format!(
            "family {} not handled by this construction",
            spec.family.as_str()
        )));
    }
    if sources.len() != spec.n_seq.len() {
        return Err(SetConstructError::BadSpec(format!(
            "{} source sets but N_seq has length {}",
            sources.len(),
            spec.n_seq.len()
        )));
    }
    if spec.n_seq.iter().any(|&n| n == 0) || spec.q == 0 {
        return Err(SetConstructError::BadSpec(
            "N_j and Q must all be ≥ 1".into(),
        ));
    }
    if horizon == 0 {
        return Err(SetConstructError::BadSpec("horizon must be ≥ 1".into()));
    }
    for (i, b) in sources.iter().enumerate() {
        if b.horizon() < horizon {
            return Err(SetConstructError::BadSpec(format!(
                "source set {} has horizon {} < requested {}",
                i + 1,
                b.horizon(),
                horizon
            )));
        }
    }
    Ok(())
}

fn finish_family(
    spec: &SeparationSpec,
    sources: &[NatSet],
    chosen: Vec<Vec<u64>>,
    horizon: u64,
) -> Result<SeparatedFamily, SetConstructError> {
    let sets = chosen
        .into_iter()
        .map(|v| NatSet::new(v, horizon))
        .collect::<Result<Vec<_>, _>>()?;
    let family = SeparatedFamily {
        spec: spec.clone(),
        sets,
        horizon,
        source: Some(sources.to_vec()),
    };
    let empty: Vec<usize> = family
        .sets
        .iter()
        .enumerate()
        .filter(|(_, a)| a.is_empty())
        .map(|(i, _)| i + 1)
        .collect();
    if empty.is_empty() {
        Ok(family)
    } else {
        Err(SetConstructError::PartialResult {
            family: Box::new(family),
            empty_sets: empty,
            horizon,
        })
    }
}

/// Greedy threshold for the next element: `Q·last + N_i + N_maxused`, or
/// `N_i` for the very first element overall. Saturates past the horizon.
fn next_threshold(last: Option<u64>, q: u64, n_i: u64, n_maxused: u64, horizon: u64) -> u64 {
    match last {
        None => n_i,
        Some(l) => {
            let t = q as u128 * l as u128 + n_i as u128 + n_maxused as u128;
            t.min(horizon as u128 + 1) as u64
        }
    }
}

/// Infinite branch: walk the anti-diagonals of the (set, count) grid, giving
/// each set its k-th element in round order (1,k), (2,k−1), ..., so every set
/// keeps receiving elements. Each new element must clear
/// `Q·last + N_i + N_maxused`, which makes every pair margin immediate.
pub fn construct_infinite(
    sources: &[NatSet],
    spec: &SeparationSpec,
    horizon: u64,
) -> Result<SeparatedFamily, SetConstructError> {
    validate_inputs(sources, spec, horizon, &[FamilyTag::Infinite])?;
    let j_count = sources.len();
    let mut chosen: Vec<Vec<u64>> = vec![Vec::new(); j_count];
    let mut done = vec![false; j_count];
    let mut last: Option<u64> = None;
    let mut n_maxused: u64 = 0;

    let mut round: u64 = 1;
    loop {
        let mut progress = false;
        let upper = (round as usize).min(j_count);
        for i in 0..upper {
            if done[i] {
                continue;
            }
            let n_i = spec.n_seq[i];
            let threshold = next_threshold(last, spec.q, n_i, n_maxused, horizon);
            match sources[i].first_geq(threshold) {
                Some(b) if b <= horizon => {
                    chosen[i].push(b);
                    last = Some(b);
                    n_maxused = n_maxused.max(n_i);
                    progress = true;
                }
                _ => done[i] = true,
            }
        }
        if (!progress && round as usize >= j_count) || done.iter().all(|&d| d) {
            break;
        }
        round += 1;
    }

    finish_family(spec, sources, chosen, horizon)
}

/// Upper-Banach branch: in round k each set receives a whole block. A window
/// `(M, M+N]` qualifies when the source holds at least `D_i·N` points in it;
/// the window is then thinned to one point per `2N_i` gap, which keeps a
/// `D_i/(2N_i)` fraction of the window. Window starts respect
/// `M ≥ max(Q·last + N_i + N_maxused, Q·N + 2N_i)` so that all pair margins
/// hold both across blocks and inside one window.
pub fn construct_banach(
    sources: &[NatSet],
    spec: &SeparationSpec,
    targets: &[Ratio<u64>],
    horizon: u64,
) -> Result<BanachConstruction, SetConstructError> {
    validate_inputs(sources, spec, horizon, &[FamilyTag::UpperBanach])?;
    if targets.len() != sources.len() {
        return Err(SetConstructError::BadSpec(format!(
            "{} density targets for {} sets",
            targets.len(),
            sources.len()
        )));
    }
    if targets
        .iter()
        .any(|d| d.is_zero() || *d > Ratio::one())
    {
        return Err(SetConstructError::BadSpec(
            "density targets must lie in (0, 1]".into(),
        ));
    }

    let j_count = sources.len();
    // Per-set cumulative counts up to the horizon for O(1) window counting.
    let cums: Vec<Vec<u64>> = sources
        .iter()
        .map(|b| {
            let mut c = vec![0u64; horizon as usize + 1];
            for &x in b.elements().iter().take_while(|&&x| x <= horizon) {
                c[x as usize] = 1;
            }
            for i in 1..c.len() {
                c[i] += c[i - 1];
            }
            c
        })
        .collect();

    let mut chosen: Vec<Vec<u64>> = vec![Vec::new(); j_count];
    let mut blocks: Vec<BlockRecord> = Vec::new();
    let mut done = vec![false; j_count];
    let mut last: Option<u64> = None;
    let mut n_maxused: u64 = 0;
    let mut best_seen: Vec<Ratio<u64>> = vec![Ratio::zero(); j_count];
    let mut scanned: Vec<u64> = vec![0; j_count];

    let mut round: u64 = 1;
    loop {
        let mut progress = false;
        let upper = (round as usize).min(j_count);
        for i in 0..upper {
            if done[i] {
                continue;
            }
            let n_i = spec.n_seq[i];
            let d_i = targets[i];
            let total = cums[i][horizon as usize];
            // A window of length N can never reach D_i unless D_i·N ≤ total.
            let n_cap = (Ratio::from_integer(total) / d_i).floor().to_integer();
            let mut placed = false;
            let mut n_len = round.max(2);
            while n_len <= n_cap {
                let m_lo = next_threshold(last, spec.q, n_i, n_maxused, horizon)
                    .saturating_sub(1)
                    .max(spec.q.saturating_mul(n_len).saturating_add(2 * n_i));
                if m_lo.saturating_add(n_len) > horizon {
                    break;
                }
                let mut found: Option<u64> = None;
                for m in m_lo..=horizon - n_len {
                    let count = cums[i][(m + n_len) as usize] - cums[i][m as usize];
                    scanned[i] += 1;
                    let rate = Ratio::new(count, n_len);
                    if rate > best_seen[i] {
                        best_seen[i] = rate;
                    }
                    if rate >= d_i {
                        found = Some(m);
                        break;
                    }
                }
                if let Some(m) = found {
                    let avail = cums[i][(m + n_len) as usize] - cums[i][m as usize];
                    let mut taken = 0u64;
                    let mut cursor = m + 1;
                    loop {
                        match sources[i].first_geq(cursor) {
                            Some(x) if x <= m + n_len => {
                                chosen[i].push(x);
                                last = Some(x);
                                taken += 1;
                                cursor = match x.checked_add(2 * n_i) {
                                    Some(c) => c,
                                    None => break,
                                };
                            }
                            _ => break,
                        }
                    }
                    n_maxused = n_maxused.max(n_i);
                    blocks.push(BlockRecord {
                        set: i + 1,
                        round,
                        start: m,
                        len: n_len,
                        available: avail,
                        taken,
                        rate: Ratio::new(taken, n_len),
                        target_rate: d_i / Ratio::from_integer(2 * n_i),
                    });
                    placed = true;
                    progress = true;
                    break;
                }
                n_len += 1;
            }
            if !placed {
                done[i] = true;
            }
        }
        if (!progress && round as usize >= j_count) || done.iter().all(|&d| d) {
            break;
        }
        round += 1;
    }

    // A set that scanned windows but stayed empty genuinely lacks density;
    // a set that never got to scan was starved by the horizon.
    for i in 0..j_count {
        if chosen[i].is_empty() && scanned[i] > 0 {
            return Err(SetConstructError::NoWindow {
                set: i + 1,
                min_len: 2,
                required: targets[i],
                best_seen: best_seen[i],
                windows_scanned: scanned[i],
            });
        }
    }

    let family = finish_family(spec, sources, chosen, horizon)?;
    Ok(BanachConstruction { family, blocks })
}

/// All reduced values of q/q' with 1 ≤ q, q' ≤ Q, as a sorted set.
fn multiplier_ratios(q: u64) -> BTreeSet<Ratio<u64>> {
    let mut set = BTreeSet::new();
    for a in 1..=q {
        for b in 1..=q {
            set.insert(Ratio::new(a, b));
        }
    }
    set
}

/// Integers n with |n − r·b| < width, clipped to [1, horizon]; exact.
fn ratio_zone(r: Ratio<u64>, b: u64, width: u64, horizon: u64) -> Option<(u64, u64)> {
    let p = *r.numer() as i128;
    let q = *r.denom() as i128;
    let rb_num = p * b as i128;
    // smallest n with n·q > rb_num − width·q
    let lo_bound = rb_num - width as i128 * q;
    let lo = lo_bound.div_euclid(q) + 1;
    // largest n with n·q < rb_num + width·q
    let hi_bound = rb_num + width as i128 * q;
    let hi = if hi_bound.rem_euclid(q) == 0 {
        hi_bound / q - 1
    } else {
        hi_bound.div_euclid(q)
    };
    let lo = lo.max(1);
    let hi = hi.min(horizon as i128);
    if lo > hi {
        None
    } else {
        Some((lo as u64, hi as u64))
    }
}

fn merge_intervals(mut v: Vec<(u64, u64)>) -> Vec<(u64, u64)> {
    v.sort_unstable();
    let mut out: Vec<(u64, u64)> = Vec::with_capacity(v.len());
    for (lo, hi) in v {
        match out.last_mut() {
            Some((_, phi)) if lo <= phi.saturating_add(1) => *phi = (*phi).max(hi),
            _ => out.push((lo, hi)),
        }
    }
    out
}

/// Lower/upper-density branch. Each `B_j` is first subsampled at stride
/// `2^j · N_j²` (keeping every stride-th element), which divides the density
/// by the stride but spreads consecutive survivors far apart. Around every
/// survivor of a *later* set, the open zone `(r·b − 2N_k, r·b + 2N_k)` is
/// removed from the earlier sets for every multiplier ratio r, killing all
/// cross-set near-collisions. Same-set collisions under r > 1 are then
/// handled by [`refine_ratio_separation`], one ratio at a time.
pub fn construct_density(
    sources: &[NatSet],
    spec: &SeparationSpec,
    horizon: u64,
) -> Result<SeparatedFamily, SetConstructError> {
    validate_inputs(
        sources,
        spec,
        horizon,
        &[FamilyTag::LowerDensity, FamilyTag::UpperDensity],
    )?;
    // The cross-set exclusion zones have width 2N_k around the later set's
    // elements, which covers N_j + N_k only when the lengths do not decrease.
    if spec.n_seq.windows(2).any(|w| w[0] > w[1]) {
        return Err(SetConstructError::BadSpec(
            "density construction requires nondecreasing N_seq".into(),
        ));
    }
    let j_count = sources.len();

    let mut subsampled: Vec<Vec<u64>> = Vec::with_capacity(j_count);
    for (i, b) in sources.iter().enumerate() {
        let n_i = spec.n_seq[i] as u128;
        let stride = (1u128 << (i + 1)) * n_i * n_i;
        let stride = u64::try_from(stride).map_err(|_| {
            SetConstructError::BadSpec(format!("stride 2^{}·N² overflows for set {}", i + 1, i + 1))
        })?;
        let kept: Vec<u64> = b
            .elements()
            .iter()
            .copied()
            .take_while(|&x| x <= horizon)
            .enumerate()
            .filter(|(pos, _)| (pos + 1) % stride as usize == 0)
            .map(|(_, x)| x)
            .collect();
        subsampled.push(kept);
    }

    let ratios = multiplier_ratios(spec.q);
    let mut chosen: Vec<Vec<u64>> = Vec::with_capacity(j_count);
    for i in 0..j_count {
        // Exclusion zones from every later set's survivors.
        let mut zones: Vec<(u64, u64)> = Vec::new();
        for k in i + 1..j_count {
            let width = 2 * spec.n_seq[k];
            for &r in &ratios {
                for &b in &subsampled[k] {
                    if let Some(z) = ratio_zone(r, b, width, horizon) {
                        zones.push(z);
                    }
                }
            }
        }
        let zones = merge_intervals(zones);
        let mut kept = Vec::with_capacity(subsampled[i].len());
        let mut zi = 0;
        for &x in &subsampled[i] {
            while zi < zones.len() && zones[zi].1 < x {
                zi += 1;
            }
            if zi < zones.len() && zones[zi].0 <= x && x <= zones[zi].1 {
                continue;
            }
            kept.push(x);
        }
        chosen.push(kept);
    }

    // Same-index refinement for each ratio r > 1, largest N first is not
    // needed: ratios ascend and each pass preserves earlier guarantees
    // because it only removes elements.
    let mut refined: Vec<NatSet> = Vec::with_capacity(j_count);
    for (i, kept) in chosen.into_iter().enumerate() {
        let mut a = NatSet::new(kept, horizon)?;
        for &r in &ratios {
            if r > Ratio::one() {
                a = refine_ratio_separation(&a, r, 2 * spec.n_seq[i], spec.family)?;
            }
        }
        refined.push(a);
    }

    finish_family(
        spec,
        sources,
        refined.into_iter().map(|a| a.elements().to_vec()).collect(),
        horizon,
    )
}

fn big_ratio(r: Ratio<u64>) -> BigRational {
    BigRational::new(BigInt::from(*r.numer()), BigInt::from(*r.denom()))
}

fn floor_big(x: &BigRational) -> BigInt {
    x.floor().to_integer()
}

fn ceil_big(x: &BigRational) -> BigInt {
    x.ceil().to_integer()
}

fn big_to_clamped_u64(x: &BigInt, horizon: u64) -> u64 {
    if x.is_negative() {
        0
    } else {
        x.to_u64().unwrap_or(horizon)
    }
}

/// Thin a single set so that `|n − r·m| ≥ n_sep` for all n ≠ m in the result,
/// while keeping positive lower (resp. upper) density when the input has it.
///
/// Lower-density branch: scan geometric blocks `[r^m, r^{m+1}]`; a block
/// qualifies when it holds at least a d/4 share of its length (d = overall
/// prefix density of the input) and at least one element. Greedily select
/// qualifying blocks whose start clears `r^(prev+2) + n_sep`, then intersect
/// with the trimmed blocks `[r^m, r^{m+1} − n_sep]`. Inside one trimmed block
/// `r·m − n ≥ r·r^m − (r^{m+1} − n_sep) = n_sep`, and the selection gap covers
/// cross-block pairs.
///
/// Upper-density branch: with M minimal such that `r^M − r² ≥ n_sep`, split
/// into the M residue classes `A ∩ ∪_{k≥1} [r^(kM+m), r^(kM+m+1) − n_sep]`
/// and keep the class with the largest prefix upper density (ties to the
/// smallest m). Exponent gaps of at least M make all cross-block margins at
/// least `r^M − r² ≥ n_sep`.
pub fn refine_ratio_separation(
    a: &NatSet,
    r: Ratio<u64>,
    n_sep: u64,
    family: FamilyTag,
) -> Result<NatSet, SetConstructError> {
    if r <= Ratio::one() {
        return Err(SetConstructError::RatioNotAboveOne { r });
    }
    if a.len() <= 1 {
        return Ok(a.clone());
    }
    let horizon = a.horizon();
    let rb = big_ratio(r);
    let big_h = BigRational::from_integer(BigInt::from(horizon));
    let big_sep = BigRational::from_integer(BigInt::from(n_sep));

    let result = match family {
        FamilyTag::LowerDensity => refine_lower(a, r, &rb, &big_h, &big_sep, horizon)?,
        FamilyTag::UpperDensity => refine_upper(a, &rb, &big_h, &big_sep, horizon)?,
        other => {
            return Err(SetConstructError::BadSpec(format!(
                "ratio refinement applies to density families, not {}",
                other.as_str()
            )))
        }
    };

    debug_assert!(
        verify_ratio_pairs(&result, r, n_sep).is_none(),
        "refinement output violates its own pair property"
    );
    Ok(result)
}

fn refine_lower(
    a: &NatSet,
    r: Ratio<u64>,
    rb: &BigRational,
    big_h: &BigRational,
    big_sep: &BigRational,
    horizon: u64,
) -> Result<NatSet, SetConstructError> {
    // Crude overall density of the input; blocks must carry a d/4 share.
    let d4 = BigRational::new(BigInt::from(a.len() as u64), BigInt::from(4u64 * horizon));

    let mut selected: Vec<(u64, u64)> = Vec::new();
    let mut scanneds: u64 = 0;
    let mut pow = rb.clone(); // r^m, starting at m = 1
    let mut prev_guard: Option<BigRational> = None; // r^(prev+2) + n_sep
    while &pow <= big_h {
        let next = &pow * rb;
        scanneds += 1;
        // Trimmed block [r^m, r^{m+1} − n_sep] must be nonempty.
        let trimmed_hi = &next - big_sep;
        if trimmed_hi >= pow {
            let lo = big_to_clamped_u64(&ceil_big(&pow), horizon);
            let hi_full = big_to_clamped_u64(&floor_big(&next), horizon).min(horizon);
            let count = if lo == 0 || lo > hi_full {
                0
            } else {
                a.count_leq(hi_full) - a.count_leq(lo - 1)
            };
            let len = &next - &pow;
            let qualifies = count >= 1
                && BigRational::from_integer(BigInt::from(count)) >= &d4 * &len
                && prev_guard.as_ref().map_or(true, |g| &pow >= g);
            if qualifies {
                let hi_trim = big_to_clamped_u64(&floor_big(&trimmed_hi), horizon).min(horizon);
                if lo >= 1 && lo <= hi_trim {
                    selected.push((lo, hi_trim));
                }
                prev_guard = Some(&next * rb + big_sep);
            }
        }
        pow = next;
    }

    if selected.is_empty() {
        return Err(SetConstructError::NoQualifyingBlock {
            r,
            horizon,
            elements: a.len() as u64,
            blocks_scanned: scanneds,
        });
    }
    intersect_with_blocks(a, &selected, horizon)
}

fn refine_upper(
    a: &NatSet,
    rb: &BigRational,
    big_h: &BigRational,
    big_sep: &BigRational,
    horizon: u64,
) -> Result<NatSet, SetConstructError> {
    // M minimal with r^M − r² ≥ n_sep.
    let r2 = rb * rb;
    let mut m_exp: u64 = 1;
    let mut r_to_m = rb.clone();
    while &r_to_m - &r2 < *big_sep {
        m_exp += 1;
        r_to_m *= rb;
    }

    let mut best: Option<(NatSet, Ratio<u64>)> = None;
    let tail_start = (horizon / 100).max(1);
    for m in 0..m_exp {
        // Blocks [r^(kM+m), r^(kM+m+1) − n_sep] for k ≥ 1.
        let mut blocks: Vec<(u64, u64)> = Vec::new();
        let mut pw = pow_big(rb, m_exp + m); // k = 1
        while &pw <= big_h {
            let next = &pw * rb;
            let trimmed_hi = &next - big_sep;
            if trimmed_hi >= pw {
                let lo = big_to_clamped_u64(&ceil_big(&pw), horizon);
                let hi = big_to_clamped_u64(&floor_big(&trimmed_hi), horizon).min(horizon);
                if lo >= 1 && lo <= hi {
                    blocks.push((lo, hi));
                }
            }
            pw *= &r_to_m;
        }
        let class = intersect_with_blocks(a, &blocks, horizon)?;
        let du = if class.is_empty() {
            Ratio::zero()
        } else {
            density_report(&class, horizon, tail_start)
                .map(|rep| rep.prefix_upper)
                .unwrap_or_else(|_| Ratio::zero())
        };
        match &best {
            Some((_, best_du)) if du <= *best_du => {}
            _ => best = Some((class, du)),
        }
    }

    Ok(best.expect("m_exp ≥ 1 always yields a candidate").0)
}

fn pow_big(rb: &BigRational, e: u64) -> BigRational {
    let mut out = BigRational::one();
    let mut base = rb.clone();
    let mut e = e;
    while e > 0 {
        if e & 1 == 1 {
            out *= &base;
        }
        base = &base * &base;
        e >>= 1;
    }
    out
}

fn intersect_with_blocks(
    a: &NatSet,
    blocks: &[(u64, u64)],
    horizon: u64,
) -> Result<NatSet, SetConstructError> {
    let mut kept: Vec<u64> = Vec::new();
    for &(lo, hi) in blocks {
        kept.extend_from_slice(a.range(lo, hi));
    }
    kept.sort_unstable();
    kept.dedup();
    Ok(NatSet::new(kept, horizon)?)
}

/// Exhaustive check of `|n − r·m| ≥ n_sep` for all n ≠ m in `a`; returns the
/// first violating ordered pair (n, m) if any. For each m only the integers
/// inside the open zone `(r·m − n_sep, r·m + n_sep)` can violate, so the scan
/// is linear in |a|·n_sep rather than quadratic.
pub fn verify_ratio_pairs(a: &NatSet, r: Ratio<u64>, n_sep: u64) -> Option<(u64, u64)> {
    let p = *r.numer() as i128;
    let q = *r.denom() as i128;
    for &m in a.elements() {
        if let Some((lo, hi)) = ratio_zone(r, m, n_sep, a.horizon()) {
            for &n in a.range(lo, hi) {
                if n == m {
                    continue;
                }
                // |n·q − p·m| < n_sep·q, exactly.
                let diff = (n as i128 * q - p * m as i128).abs();
                if diff < n_sep as i128 * q {
                    return Some((n, m));
                }
            }
        }
    }
    None
}

/// Brute-force oracle for the full separation property. Checks subsets
/// (when sources are known), minimum elements, pairwise disjointness, and
/// every pair margin `|q·n − q'·m| ≥ N_j + N_j'` over all ordered pairs and
/// multipliers. Quadratic in the total number of elements; meant for tests
/// and diagnostics, not construction.
pub fn verify_separation(family: &SeparatedFamily) -> SeparationReport {
    let spec = &family.spec;
    let mut report = SeparationReport {
        ok: true,
        min_margin: None,
        pair_checks: 0,
        subset_checked: family.source.is_some(),
        violation: None,
    };
    let record = |report: &mut SeparationReport, v: Violation| {
        if report.violation.is_none() {
            report.violation = Some(v);
        }
        report.ok = false;
    };

    if let Some(sources) = &family.source {
        for (j, (a, b)) in family.sets.iter().zip(sources).enumerate() {
            for &x in a.elements() {
                if !b.contains(x) {
                    record(&mut report, Violation::Subset { set: j + 1, element: x });
                    break;
                }
            }
        }
    }

    for (j, a) in family.sets.iter().enumerate() {
        if let Some(min) = a.min() {
            if min < spec.n_seq[j] {
                record(
                    &mut report,
                    Violation::MinElement {
                        set: j + 1,
                        element: min,
                        required: spec.n_seq[j],
                    },
                );
            }
        }
    }

    for j in 0..family.sets.len() {
        for jp in j + 1..family.sets.len() {
            let (small, large) = if family.sets[j].len() <= family.sets[jp].len() {
                (&family.sets[j], &family.sets[jp])
            } else {
                (&family.sets[jp], &family.sets[j])
            };
            if let Some(&x) = small.elements().iter().find(|&&x| large.contains(x)) {
                record(
                    &mut report,
                    Violation::Disjoint {
                        set_a: j + 1,
                        set_b: jp + 1,
                        element: x,
                    },
                );
            }
        }
    }

    for j in 0..family.sets.len() {
        for jp in 0..family.sets.len() {
            let bound = (spec.n_seq[j] + spec.n_seq[jp]) as i128;
            for &n in family.sets[j].elements() {
                for &m in family.sets[jp].elements() {
                    if n == m {
                        continue;
                    }
                    for q in 1..=spec.q {
                        for qp in 1..=spec.q {
                            report.pair_checks += 1;
                            let margin =
                                (q as i128 * n as i128 - qp as i128 * m as i128).abs() - bound;
                            let clamped = margin.clamp(i64::MIN as i128, i64::MAX as i128) as i64;
                            report.min_margin = Some(match report.min_margin {
                                Some(cur) => cur.min(clamped),
                                None => clamped,
                            });
                            if margin < 0 {
                                record(
                                    &mut report,
                                    Violation::Pair(PairWitness {
                                        set_n: j + 1,
                                        set_m: jp + 1,
                                        n,
                                        m,
                                        q,
                                        qp,
                                        margin: clamped,
                                    }),
                                );
                            }
                        }
                    }
                }
            }
        }
    }

    report
}

#[cfg(test)]
mod tests {
    use super::*;

    fn nat_all(horizon: u64) -> NatSet {
        NatSet::all(horizon)
    }

    fn spec_of(n_seq: &[u64], q: u64, family: FamilyTag) -> SeparationSpec {
        SeparationSpec::new(n_seq.to_vec(), q, family).unwrap()
    }

    #[test]
    fn infinite_single_set_prefix() {
        let spec = spec_of(&[5], 2, FamilyTag::Infinite);
        let fam = construct_infinite(&[nat_all(100)], &spec, 100).unwrap();
        assert_eq!(fam.sets[0].elements(), &[5, 20, 50]);
        let rep = verify_separation(&fam);
        assert!(rep.ok, "{:?}", rep.violation);
        assert!(rep.min_margin.unwrap() >= 0);
    }

    #[test]
    fn infinite_two_sets_interleave_and_verify() {
        let spec = spec_of(&[2, 3], 2, FamilyTag::Infinite);
        let fam = construct_infinite(&[nat_all(100_000), nat_all(100_000)], &spec, 100_000).unwrap();
        assert!(fam.sets[0].len() >= 3);
        assert!(fam.sets[1].len() >= 3);
        // Anti-diagonal order: set 1 first, then alternating growth.
        assert_eq!(fam.sets[0].min(), Some(2));
        let rep = verify_separation(&fam);
        assert!(rep.ok, "{:?}", rep.violation);
    }

    #[test]
    fn infinite_partial_when_horizon_starves_a_set() {
        // Q = 3 pushes thresholds geometrically; with many sets the last one
        // cannot be reached inside a small horizon.
        let spec = spec_of(&[1, 2, 3, 4, 5], 3, FamilyTag::Infinite);
        let sources: Vec<NatSet> = (0..5).map(|_| nat_all(1000)).collect();
        match construct_infinite(&sources, &spec, 1000) {
            Err(SetConstructError::PartialResult {
                family, empty_sets, ..
            }) => {
                assert!(!empty_sets.is_empty());
                let rep = verify_separation(&family);
                assert!(rep.ok, "partial family must still verify: {:?}", rep.violation);
            }
            other => panic!("expected PartialResult, got {:?}", other.map(|f| f.sets.len())),
        }
    }

    #[test]
    fn banach_blocks_meet_target_rate() {
        let spec = spec_of(&[3], 1, FamilyTag::UpperBanach);
        let targets = [Ratio::new(1, 2)];
        let out = construct_banach(&[nat_all(10_000)], &spec, &targets, 10_000).unwrap();
        assert!(!out.blocks.is_empty());
        for b in &out.blocks {
            assert!(
                b.rate >= b.target_rate,
                "block rate {} below floor {}",
                b.rate,
                b.target_rate
            );
        }
        let rep = verify_separation(&out.family);
        assert!(rep.ok, "{:?}", rep.violation);
    }

    #[test]
    fn banach_infeasible_density_reports_best_window() {
        let evens = NatSet::multiples(2, 10_000);
        let spec = spec_of(&[1], 1, FamilyTag::UpperBanach);
        match construct_banach(&[evens], &spec, &[Ratio::one()], 10_000) {
            Err(SetConstructError::NoWindow { set, best_seen, .. }) => {
                assert_eq!(set, 1);
                // (3, 6] holds two evens, the best any window does.
                assert_eq!(best_seen, Ratio::new(2, 3));
            }
            other => panic!("expected NoWindow, got {:?}", other.is_ok()),
        }
    }

    #[test]
    fn density_two_sets_example() {
        let odds: Vec<u64> = (1..=10_000).step_by(2).collect();
        let b1 = NatSet::new(odds, 10_000).unwrap();
        let b2 = nat_all(10_000);
        let spec = spec_of(&[1, 2], 1, FamilyTag::LowerDensity);
        let fam = construct_density(&[b1, b2], &spec, 10_000).unwrap();
        // Stride for set 2 is 2²·2² = 16, so A_2 ⊆ {16, 32, ...}.
        assert_eq!(fam.sets[1].min(), Some(16));
        assert!(fam.sets[1].elements().iter().all(|x| x % 16 == 0));
        // Set 1 keeps odds ≡ 3 mod 4 outside (16k−4, 16k+4).
        assert_eq!(&fam.sets[0].elements()[..6], &[3, 7, 11, 23, 27, 39]);
        let rep = verify_separation(&fam);
        assert!(rep.ok, "{:?}", rep.violation);
    }

    #[test]
    fn density_survivors_keep_positive_lower_density() {
        let spec = spec_of(&[1, 2], 2, FamilyTag::LowerDensity);
        let fam = construct_density(&[nat_all(100_000), nat_all(100_000)], &spec, 100_000).unwrap();
        for (i, a) in fam.sets.iter().enumerate() {
            assert!(!a.is_empty(), "set {} empty", i + 1);
            let rep = density_report(a, 100_000, 10_000).unwrap();
            assert!(
                rep.prefix_lower > Ratio::zero(),
                "set {} lost its lower density",
                i + 1
            );
        }
        let rep = verify_separation(&fam);
        assert!(rep.ok, "{:?}", rep.violation);
    }

    #[test]
    fn refine_needs_ratio_above_one() {
        let a = nat_all(100);
        match refine_ratio_separation(&a, Ratio::one(), 4, FamilyTag::LowerDensity) {
            Err(SetConstructError::RatioNotAboveOne { r }) => assert_eq!(r, Ratio::one()),
            other => panic!("expected RatioNotAboveOne, got {:?}", other.is_ok()),
        }
    }

    #[test]
    fn refine_tiny_sets_unchanged() {
        let a = NatSet::new(vec![7], 100).unwrap();
        let out = refine_ratio_separation(&a, Ratio::new(2, 1), 10, FamilyTag::UpperDensity).unwrap();
        assert_eq!(out.elements(), &[7]);
    }

    #[test]
    fn refine_lower_on_naturals_selects_geometric_blocks() {
        let a = nat_all(100_000);
        let out =
            refine_ratio_separation(&a, Ratio::new(2, 1), 10, FamilyTag::LowerDensity).unwrap();
        // First trimmed block with 2^m ≥ n_sep is [16, 22]; the guard
        // 2^m ≥ 2^(prev+2) + 10 then picks m = 7, 10, 13, 16.
        assert_eq!(out.min(), Some(16));
        assert!(out.contains(22));
        assert!(!out.contains(23));
        assert!(out.contains(128));
        assert!(out.contains(246));
        assert!(!out.contains(127));
        assert!(verify_ratio_pairs(&out, Ratio::new(2, 1), 10).is_none());
        let rep = density_report(&out, 100_000, 10_000).unwrap();
        assert!(rep.prefix_lower > Ratio::zero());
    }

    #[test]
    fn refine_upper_on_naturals_keeps_a_residue_class() {
        let a = nat_all(100_000);
        let out =
            refine_ratio_separation(&a, Ratio::new(2, 1), 10, FamilyTag::UpperDensity).unwrap();
        assert!(!out.is_empty());
        assert!(verify_ratio_pairs(&out, Ratio::new(2, 1), 10).is_none());
        let rep = density_report(&out, 100_000, 1_000).unwrap();
        assert!(rep.prefix_upper > Ratio::zero());
    }

    #[test]
    fn refine_fractional_ratio_exact_pairs() {
        let a = nat_all(50_000);
        let r = Ratio::new(3, 2);
        let out = refine_ratio_separation(&a, r, 8, FamilyTag::LowerDensity).unwrap();
        assert!(!out.is_empty());
        assert!(verify_ratio_pairs(&out, r, 8).is_none());
    }

    #[test]
    fn verify_catches_planted_pair_violation() {
        // |1·5 − 1·7| = 2 < 3 + 3.
        let spec = spec_of(&[3, 3], 2, FamilyTag::Infinite);
        let fam = SeparatedFamily {
            spec,
            sets: vec![
                NatSet::new(vec![5], 100).unwrap(),
                NatSet::new(vec![7], 100).unwrap(),
            ],
            horizon: 100,
            source: None,
        };
        let rep = verify_separation(&fam);
        assert!(!rep.ok);
        match rep.violation {
            Some(Violation::Pair(w)) => {
                assert_eq!((w.set_n, w.set_m, w.n, w.m, w.q, w.qp), (1, 2, 5, 7, 1, 1));
                assert_eq!(w.margin, -4);
            }
            other => panic!("expected pair witness, got {:?}", other),
        }
    }

    #[test]
    fn verify_catches_min_element_and_disjointness() {
        let spec = spec_of(&[10, 10], 1, FamilyTag::Infinite);
        let fam = SeparatedFamily {
            spec: spec.clone(),
            sets: vec![
                NatSet::new(vec![4], 100).unwrap(),
                NatSet::new(vec![50], 100).unwrap(),
            ],
            horizon: 100,
            source: None,
        };
        let rep = verify_separation(&fam);
        assert!(matches!(
            rep.violation,
            Some(Violation::MinElement { set: 1, element: 4, required: 10 })
        ));

        let fam2 = SeparatedFamily {
            spec,
            sets: vec![
                NatSet::new(vec![50], 100).unwrap(),
                NatSet::new(vec![50], 100).unwrap(),
            ],
            horizon: 100,
            source: None,
        };
        let rep2 = verify_separation(&fam2);
        assert!(matches!(
            rep2.violation,
            Some(Violation::Disjoint { set_a: 1, set_b: 2, element: 50 })
        ));
    }

    #[test]
    fn family_json_round_trip() {
        let spec = spec_of(&[5], 2, FamilyTag::Infinite);
        let fam = construct_infinite(&[nat_all(100)], &spec, 100).unwrap();
        let json = serde_json::to_string(&fam).unwrap();
        assert!(json.contains("\"N_seq\":[5]"));
        assert!(json.contains("\"Q\":2"));
        assert!(json.contains("\"family\":\"infinite\""));
        assert!(json.contains("\"sets\":[[5,20,50]]"));
        assert!(json.contains("\"horizon\":100"));
        let back: SeparatedFamily = serde_json::from_str(&json).unwrap();
        assert_eq!(back.sets, fam.sets);
        assert_eq!(back.spec, fam.spec);
        assert!(back.source.is_none());
    }

    #[test]
    fn subset_constraint_respected() {
        let b = NatSet::multiples(3, 100_000);
        let spec = spec_of(&[4], 2, FamilyTag::Infinite);
        let fam = construct_infinite(&[b.clone()], &spec, 100_000).unwrap();
        assert!(fam.sets[0].elements().iter().all(|&x| x % 3 == 0));
        let rep = verify_separation(&fam);
        assert!(rep.ok && rep.subset_checked);
    }
}
