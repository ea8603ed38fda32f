//! Finite-horizon verification of the disjoint hypercyclicity criterion
//! and of the `ℓ^p` / `c₀` characterization conditions for tuples of
//! pseudo-shifts.
//!
//! All checks run over truncated data: a [`SeparatedFamily`] of return-time
//! blocks `(A_l)`, a [`TargetGrid`] of dense targets `y_l = (y_l^1, ...,
//! y_l^N)`, a positive schedule `(ε_l)` and a time horizon. The condition
//! sums and ratios are evaluated exactly as finite sums or pointwise maxima
//! in log domain, and every reported worst case carries a witness from
//! which the margin can be recomputed. The builders assemble the explicit
//! approximate hypercyclic vectors of the sufficiency proofs in log domain,
//! so block times far beyond f64 coefficient range stay exact.
//!
//! Scans run in a fixed lexicographic index order and keep the first
//! attainer of the worst margin, so reports are deterministic.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::log_domain::{log_sum_exp, LogProduct, Sign};
use crate::natset::NatSet;
use crate::pseudoshift::{
    FiniteVec, IndexMap, LogVec, ProductTable, PseudoShift, PseudoShiftConfig, ShiftError, Space,
};
use crate::setconstruct::SeparatedFamily;

/// Tuple `(T_1, ..., T_N)` of pseudo-shifts on one common space.
///
/// A single-operator tuple is allowed: the pairwise conditions are then
/// vacuous and condition (1) alone decides.
#[derive(Clone, Debug)]
pub struct TupleSystem {
    ops: Vec<PseudoShift>,
}

impl TupleSystem {
    pub fn new(ops: Vec<PseudoShift>) -> Result<TupleSystem, ShiftError> {
        if ops.is_empty() {
            return Err(ShiftError::Inconsistent("empty operator tuple".into()));
        }
        let space = ops[0].space;
        if ops.iter().any(|t| t.space != space) {
            return Err(ShiftError::Inconsistent("operators live on different spaces".into()));
        }
        Ok(TupleSystem { ops })
    }

    pub fn from_configs(cfgs: &[PseudoShiftConfig]) -> Result<TupleSystem, ShiftError> {
        TupleSystem::new(cfgs.iter().map(PseudoShift::from_config).collect::<Result<_, _>>()?)
    }

    pub fn to_configs(&self) -> Vec<PseudoShiftConfig> {
        self.ops.iter().map(PseudoShift::to_config).collect()
    }

    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    pub fn ops(&self) -> &[PseudoShift] {
        &self.ops
    }

    pub fn space(&self) -> Space {
        self.ops[0].space
    }
}

/// Dense-target grid `y_l = (y_l^1, ..., y_l^N)` for `l = 1..=levels`.
///
/// Level `l` tuples have support exactly `[1, l]` (every coordinate `j ≤ l`
/// nonzero) with magnitudes inside the band `[1/l, l]`.
#[derive(Clone, Debug, Serialize)]
pub struct TargetGrid {
    targets: Vec<Vec<FiniteVec>>,
}

impl TargetGrid {
    pub fn new(targets: Vec<Vec<FiniteVec>>) -> Result<TargetGrid, ShiftError> {
        if targets.is_empty() {
            return Err(ShiftError::Inconsistent("grid has no levels".into()));
        }
        let n_ops = targets[0].len();
        if n_ops == 0 {
            return Err(ShiftError::Inconsistent("grid level 1 has no targets".into()));
        }
        for (i, tuple) in targets.iter().enumerate() {
            let l = (i + 1) as u64;
            if tuple.len() != n_ops {
                return Err(ShiftError::Inconsistent(format!(
                    "grid level {l} has {} targets, expected {n_ops}",
                    tuple.len()
                )));
            }
            for (s, y) in tuple.iter().enumerate() {
                if y.max_support().is_some_and(|m| m > l) {
                    return Err(ShiftError::BadVec(format!(
                        "grid level {l}, target {}: support beyond {l}",
                        s + 1
                    )));
                }
                let (lo, hi) = (1.0 / l as f64, l as f64);
                for j in 1..=l {
                    let v = y.get(j).abs();
                    if v == 0.0 {
                        return Err(ShiftError::BadVec(format!(
                            "grid level {l}, target {}: coordinate {j} is zero",
                            s + 1
                        )));
                    }
                    if !(v >= lo && v <= hi) {
                        return Err(ShiftError::BadVec(format!(
                            "grid level {l}, target {}: |y_{j}| = {v} outside [{lo}, {hi}]",
                            s + 1
                        )));
                    }
                }
            }
        }
        Ok(TargetGrid { targets })
    }

    /// Deterministic default grid: magnitudes cycle through a fixed menu,
    /// clipped to the `[1/l, l]` band, with a fixed sign pattern.
    pub fn default_grid(n_ops: usize, levels: usize) -> TargetGrid {
        assert!(n_ops >= 1 && levels >= 1);
        const MAG: [f64; 5] = [1.0, 1.5, 0.75, 2.0, 0.5];
        let mut targets = Vec::with_capacity(levels);
        for l in 1..=levels as u64 {
            let mut tuple = Vec::with_capacity(n_ops);
            for s in 1..=n_ops as u64 {
                let mut y = FiniteVec::zero();
                for j in 1..=l {
                    let mag = MAG[((j + 2 * s + 3 * l) % 5) as usize];
                    let v = mag.clamp(1.0 / l as f64, l as f64);
                    let neg = (5 * j + 3 * s + l) % 7 < 2;
                    y.set(j, if neg { -v } else { v });
                }
                tuple.push(y);
            }
            targets.push(tuple);
        }
        TargetGrid { targets }
    }

    pub fn levels(&self) -> usize {
        self.targets.len()
    }

    pub fn n_ops(&self) -> usize {
        self.targets[0].len()
    }

    /// The tuple `(y_l^1, ..., y_l^N)`; `l` is 1-based.
    pub fn tuple(&self, l: usize) -> &[FiniteVec] {
        &self.targets[l - 1]
    }
}

#[derive(Deserialize)]
struct GridWire {
    targets: Vec<Vec<FiniteVec>>,
}

impl<'de> Deserialize<'de> for TargetGrid {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<TargetGrid, D::Error> {
        let wire = GridWire::deserialize(d)?;
        TargetGrid::new(wire.targets).map_err(serde::de::Error::custom)
    }
}

/// Tail diagnostic of condition (1) on `ℓ^p`: the partial sum
/// `Σ_{n=from}^{to} 1/|W^s_{j,n}|^p` over the back half of the horizon.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct Cond1Entry {
    pub s: usize,
    pub j: u64,
    pub tail_sum: f64,
    pub last_term_log: f64,
    pub from: u64,
    pub to: u64,
    pub pass: bool,
}

/// Growth diagnostic of condition (1) on `c₀`: the minimum of
/// `log |W^s_{j,n}|` over `n ∈ A_k` in the back half of the horizon,
/// against the same minimum over the front half. Either half being empty
/// makes the entry vacuous (counts are recorded).
#[derive(Clone, Copy, Debug, Serialize)]
pub struct GrowthEntry {
    pub s: usize,
    pub j: u64,
    pub k: usize,
    pub front_min: f64,
    pub back_min: f64,
    pub front_len: usize,
    pub back_len: usize,
    pub pass: bool,
}

/// Worst case of one summed or pointwise ratio condition at level `l`.
/// Entries with no qualifying term report `value = 0` and infinite margin.
#[derive(Clone, Debug, Serialize)]
pub struct CondEntry {
    pub l: usize,
    pub value: f64,
    pub bound: f64,
    pub margin: f64,
    pub witness: Option<CondWitness>,
    pub pass: bool,
}

/// Indices of a worst case. `value` is reproducible by re-running the
/// condition at `(j, k, l, n, s, t)`; `m` is the last summed time for
/// summed conditions and the maximizing time for pointwise ones.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct CondWitness {
    pub j: u64,
    pub k: usize,
    pub l: usize,
    pub n: u64,
    pub m: Option<u64>,
    pub s: usize,
    pub t: usize,
    pub terms: u64,
    pub last_term_log: f64,
}

/// Bounded search result for the approximation condition (4) at level `l`.
#[derive(Clone, Debug, Serialize)]
pub struct Cond4Entry {
    pub l: usize,
    pub eps_used: f64,
    /// Least level `L ≥ l` whose block `A_L` satisfies (4a) and (4b).
    pub found: Option<usize>,
    /// Level the reported worst cases refer to: the found `L`, or the best
    /// candidate scanned.
    pub at: usize,
    pub a_worst: f64,
    pub b_worst: f64,
    pub witness_a: Option<Cond4Witness>,
    pub witness_b: Option<Cond4Witness>,
    pub pass: bool,
}

/// Worst term of (4a) or (4b): ambient coordinate `j` at time `n` for the
/// ordered pair `s ≠ t`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct Cond4Witness {
    pub n: u64,
    pub s: usize,
    pub t: usize,
    pub j: u64,
    pub value: f64,
}

/// Margins of the characterization conditions against an ε-schedule.
#[derive(Clone, Debug, Serialize)]
pub struct ConditionReport {
    pub space: Space,
    pub n_ops: usize,
    pub levels: usize,
    pub horizon: u64,
    pub eps: Vec<f64>,
    /// No timed data was available (every block empty): the pairwise
    /// conditions hold vacuously.
    pub vacuous: bool,
    pub cond1_tail: Vec<Cond1Entry>,
    pub cond1_growth: Vec<GrowthEntry>,
    /// `c₀` only: same-operator cross-block ratio part of condition (1).
    pub cond1_ratio: Vec<CondEntry>,
    pub cond2_max: Vec<CondEntry>,
    pub cond3_max: Vec<CondEntry>,
    pub cond4_eps: Vec<Cond4Entry>,
    pub cond1_pass: bool,
    pub cond2_pass: bool,
    pub cond3_pass: bool,
    pub cond4_pass: bool,
    pub pass: bool,
}

#[derive(Clone, Copy, PartialEq)]
enum RatioMode {
    /// Sum of `p`-th powers of the weight ratios (`ℓ^p` conditions).
    SumP(f64),
    /// Pointwise maximum of the weight ratios (`c₀` conditions).
    Pointwise,
}

fn product_tables<'a>(
    system: &'a TupleSystem,
    l_max: u64,
    horizon: u64,
) -> Result<Vec<ProductTable<'a>>, ShiftError> {
    system
        .ops()
        .iter()
        .map(|op| {
            let max_index = match &op.f {
                IndexMap::Affine { shift } => l_max
                    .checked_add(shift.checked_mul(horizon).ok_or(ShiftError::IndexOverflow)?)
                    .ok_or(ShiftError::IndexOverflow)?,
                IndexMap::Table { .. } => op.f.domain_max(),
            };
            op.product_table(max_index)
        })
        .collect()
}

struct ScanResult {
    value: f64,
    terms: u64,
    witness_m: Option<u64>,
    last_term_log: f64,
}

/// Aggregate `|W^s_{q,n}| / |W^t_{j,m}|` over `m ∈ a_set \ {exclude}` whose
/// shifted preimage `q = f_s^{-n}(f_t^m(j))` exists with `q > cut`.
#[allow(clippy::too_many_arguments)]
fn ratio_scan(
    system: &TupleSystem,
    tables: &[ProductTable<'_>],
    a_set: &NatSet,
    exclude: Option<u64>,
    j: u64,
    t: usize,
    s: usize,
    n: u64,
    cut: u64,
    mode: RatioMode,
) -> Result<ScanResult, ShiftError> {
    let ft = &system.ops()[t - 1].f;
    let fs = &system.ops()[s - 1].f;
    let mut logs = Vec::new();
    let mut terms = 0u64;
    let mut last_m = None;
    let mut best_log = f64::NEG_INFINITY;
    let mut best_m = None;
    for &m in a_set.elements() {
        if exclude == Some(m) {
            continue;
        }
        let img = ft.iterate(j, m)?;
        let Some(q) = fs.inverse_iterate(img, n)? else { continue };
        if q <= cut {
            continue;
        }
        let ws = tables[s - 1].log_product(q, n)?;
        let wt = tables[t - 1].log_product(j, m)?;
        let ratio_log = ws.log_abs - wt.log_abs;
        terms += 1;
        last_m = Some(m);
        match mode {
            RatioMode::SumP(p) => logs.push(p * ratio_log),
            RatioMode::Pointwise => {
                if ratio_log > best_log {
                    best_log = ratio_log;
                    best_m = Some(m);
                }
            }
        }
    }
    Ok(match mode {
        RatioMode::SumP(_) => ScanResult {
            value: log_sum_exp(&logs).exp(),
            terms,
            witness_m: last_m,
            last_term_log: logs.last().copied().unwrap_or(f64::NEG_INFINITY),
        },
        RatioMode::Pointwise => {
            ScanResult { value: best_log.exp(), terms, witness_m: best_m, last_term_log: best_log }
        }
    })
}

struct WorstTracker {
    entry: Option<CondEntry>,
}

impl WorstTracker {
    fn new() -> WorstTracker {
        WorstTracker { entry: None }
    }

    fn offer(&mut self, entry: CondEntry) {
        let replace = match &self.entry {
            None => true,
            Some(prev) => entry.margin < prev.margin,
        };
        if replace {
            self.entry = Some(entry);
        }
    }

    fn finish(self, l: usize, bound: f64) -> CondEntry {
        self.entry.unwrap_or(CondEntry {
            l,
            value: 0.0,
            bound,
            margin: f64::INFINITY,
            witness: None,
            pass: true,
        })
    }
}

#[allow(clippy::too_many_arguments)]
fn cond4_level(
    system: &TupleSystem,
    tables: &[ProductTable<'_>],
    sets: &[NatSet],
    grid: &TargetGrid,
    l: usize,
    eps_used: f64,
    levels: usize,
    vacuous: bool,
) -> Result<Cond4Entry, ShiftError> {
    let n_ops = system.len();
    let a = grid.tuple(l);
    let mut found = None;
    let mut best: Option<(usize, f64, f64, Option<Cond4Witness>, Option<Cond4Witness>)> = None;
    for cap in l..=levels {
        let set = &sets[cap - 1];
        if set.is_empty() {
            continue;
        }
        let mut a_worst = 0.0f64;
        let mut b_worst = 0.0f64;
        let mut wa = None;
        let mut wb = None;
        for &n in set.elements() {
            for s in 1..=n_ops {
                for t in 1..=n_ops {
                    if s == t {
                        continue;
                    }
                    let ft = &system.ops()[t - 1].f;
                    let fs = &system.ops()[s - 1].f;
                    for i in 1..=(l as u64) {
                        let img = ft.iterate(i, n)?;
                        let Some(q) = fs.inverse_iterate(img, n)? else { continue };
                        let ws = tables[s - 1].log_product(q, n)?;
                        let wt = tables[t - 1].log_product(i, n)?;
                        let ratio = ws.div(wt);
                        if q <= l as u64 {
                            let want = a[s - 1].get(q) / a[t - 1].get(i);
                            let got = ratio.to_f64().unwrap_or(f64::INFINITY);
                            let v = (got - want).abs();
                            if v > a_worst {
                                a_worst = v;
                                wa = Some(Cond4Witness { n, s, t, j: img, value: v });
                            }
                        } else {
                            let v = ratio.log_abs.exp();
                            if v > b_worst {
                                b_worst = v;
                                wb = Some(Cond4Witness { n, s, t, j: img, value: v });
                            }
                        }
                    }
                }
            }
        }
        let ok = a_worst <= eps_used && b_worst <= eps_used;
        let better = match &best {
            None => true,
            Some((_, ba, bb, _, _)) => a_worst.max(b_worst) < ba.max(*bb),
        };
        if better || ok {
            best = Some((cap, a_worst, b_worst, wa, wb));
        }
        if ok {
            found = Some(cap);
            break;
        }
    }
    Ok(match best {
        Some((at, a_worst, b_worst, witness_a, witness_b)) => Cond4Entry {
            l,
            eps_used,
            found,
            at,
            a_worst,
            b_worst,
            witness_a,
            witness_b,
            pass: found.is_some(),
        },
        None => Cond4Entry {
            l,
            eps_used,
            found: None,
            at: l,
            a_worst: 0.0,
            b_worst: 0.0,
            witness_a: None,
            witness_b: None,
            pass: vacuous,
        },
    })
}

fn condition_report(
    system: &TupleSystem,
    family: &SeparatedFamily,
    grid: &TargetGrid,
    eps: &[f64],
    horizon: u64,
    mode: RatioMode,
) -> Result<ConditionReport, ShiftError> {
    let n_ops = system.len();
    if grid.n_ops() != n_ops {
        return Err(ShiftError::Inconsistent(format!(
            "grid tuples have {} entries but the system has {n_ops} operators",
            grid.n_ops()
        )));
    }
    if horizon == 0 {
        return Err(ShiftError::Inconsistent("horizon must be >= 1".into()));
    }
    let levels = grid.levels().min(family.sets.len());
    if levels == 0 {
        return Err(ShiftError::Inconsistent("the family has no blocks".into()));
    }
    if eps.len() < levels {
        return Err(ShiftError::Inconsistent(format!(
            "eps schedule has {} entries, need {levels}",
            eps.len()
        )));
    }
    if eps[..levels].iter().any(|e| !(e.is_finite() && *e > 0.0)) {
        return Err(ShiftError::Inconsistent("eps schedule must be positive and finite".into()));
    }
    let sets: Vec<NatSet> = family
        .sets
        .iter()
        .take(levels)
        .map(|s| s.restrict(horizon.min(s.horizon())))
        .collect();
    let vacuous = sets.iter().all(|s| s.is_empty());
    let tables = product_tables(system, levels as u64, horizon)?;
    let eps_min = eps[..levels].iter().copied().fold(f64::INFINITY, f64::min);

    let mut cond1_tail = Vec::new();
    let mut cond1_growth = Vec::new();
    let mut cond1_ratio = Vec::new();
    match mode {
        RatioMode::SumP(_) => {
            let from = (horizon / 2).max(1);
            for s in 1..=n_ops {
                for j in 1..=levels as u64 {
                    let t = system.ops()[s - 1].summability_tail(j, from, horizon)?;
                    cond1_tail.push(Cond1Entry {
                        s,
                        j,
                        tail_sum: t.sum,
                        last_term_log: t.last_term_log,
                        from: t.from,
                        to: t.to,
                        pass: t.sum <= eps_min,
                    });
                }
            }
        }
        RatioMode::Pointwise => {
            let mid = (horizon / 2).max(1);
            for s in 1..=n_ops {
                for k in 1..=levels {
                    for j in 1..=k as u64 {
                        let mut front_min = f64::INFINITY;
                        let mut back_min = f64::INFINITY;
                        let (mut front_len, mut back_len) = (0usize, 0usize);
                        for &n in sets[k - 1].elements() {
                            let w = tables[s - 1].log_product(j, n)?.log_abs;
                            if n < mid {
                                front_min = front_min.min(w);
                                front_len += 1;
                            } else {
                                back_min = back_min.min(w);
                                back_len += 1;
                            }
                        }
                        let pass = front_len == 0 || back_len == 0 || back_min > front_min;
                        cond1_growth.push(GrowthEntry {
                            s,
                            j,
                            k,
                            front_min,
                            back_min,
                            front_len,
                            back_len,
                            pass,
                        });
                    }
                }
            }
            // Same-operator cross-block ratios: for n ∈ A_l, m ∈ A_k and
            // j = f_s^m(i) with i ≤ k, the ratio |W^s_{f_s^{-n}(j),n}| /
            // |W^s_{i,m}| must stay below min(ε_l, ε_k) whenever
            // f_s^{-n}(j) > l.
            for l in 1..=levels {
                let mut worst = WorstTracker::new();
                for k in 1..=levels {
                    let bound = eps[l - 1].min(eps[k - 1]);
                    for &n in sets[l - 1].elements() {
                        for s in 1..=n_ops {
                            for i in 1..=k as u64 {
                                let scan = ratio_scan(
                                    system,
                                    &tables,
                                    &sets[k - 1],
                                    None,
                                    i,
                                    s,
                                    s,
                                    n,
                                    l as u64,
                                    RatioMode::Pointwise,
                                )?;
                                if scan.terms == 0 {
                                    continue;
                                }
                                worst.offer(CondEntry {
                                    l,
                                    value: scan.value,
                                    bound,
                                    margin: bound - scan.value,
                                    witness: Some(CondWitness {
                                        j: i,
                                        k,
                                        l,
                                        n,
                                        m: scan.witness_m,
                                        s,
                                        t: s,
                                        terms: scan.terms,
                                        last_term_log: scan.last_term_log,
                                    }),
                                    pass: scan.value <= bound,
                                });
                            }
                        }
                    }
                }
                cond1_ratio.push(worst.finish(l, eps[l - 1]));
            }
        }
    }

    // Condition (2): for j ≤ l, any block index k, n ∈ A_k and s ≠ t, the
    // aggregate over m ∈ A_l \ {n} with f_t^m(j) ∈ f_s^n((k, ∞)) stays
    // below ε_l.
    let mut cond2_max = Vec::with_capacity(levels);
    for l in 1..=levels {
        let bound = eps[l - 1];
        let mut worst = WorstTracker::new();
        for k in 1..=levels {
            for &n in sets[k - 1].elements() {
                for j in 1..=l as u64 {
                    for s in 1..=n_ops {
                        for t in 1..=n_ops {
                            if s == t {
                                continue;
                            }
                            let scan = ratio_scan(
                                system,
                                &tables,
                                &sets[l - 1],
                                Some(n),
                                j,
                                t,
                                s,
                                n,
                                k as u64,
                                mode,
                            )?;
                            if scan.terms == 0 {
                                continue;
                            }
                            worst.offer(CondEntry {
                                l,
                                value: scan.value,
                                bound,
                                margin: bound - scan.value,
                                witness: Some(CondWitness {
                                    j,
                                    k,
                                    l,
                                    n,
                                    m: scan.witness_m,
                                    s,
                                    t,
                                    terms: scan.terms,
                                    last_term_log: scan.last_term_log,
                                }),
                                pass: scan.value <= bound,
                            });
                        }
                    }
                }
            }
        }
        cond2_max.push(worst.finish(l, bound));
    }

    // Condition (3): for j ≤ k < l and n ∈ A_l, the aggregate over m ∈ A_k
    // with f_t^m(j) ∈ f_s^n((l, ∞)) stays below ε_l.
    let mut cond3_max = Vec::with_capacity(levels);
    for l in 1..=levels {
        let bound = eps[l - 1];
        let mut worst = WorstTracker::new();
        for k in 1..l {
            for &n in sets[l - 1].elements() {
                for j in 1..=k as u64 {
                    for s in 1..=n_ops {
                        for t in 1..=n_ops {
                            if s == t {
                                continue;
                            }
                            let scan = ratio_scan(
                                system,
                                &tables,
                                &sets[k - 1],
                                None,
                                j,
                                t,
                                s,
                                n,
                                l as u64,
                                mode,
                            )?;
                            if scan.terms == 0 {
                                continue;
                            }
                            worst.offer(CondEntry {
                                l,
                                value: scan.value,
                                bound,
                                margin: bound - scan.value,
                                witness: Some(CondWitness {
                                    j,
                                    k,
                                    l,
                                    n,
                                    m: scan.witness_m,
                                    s,
                                    t,
                                    terms: scan.terms,
                                    last_term_log: scan.last_term_log,
                                }),
                                pass: scan.value <= bound,
                            });
                        }
                    }
                }
            }
        }
        cond3_max.push(worst.finish(l, bound));
    }

    let mut cond4_eps = Vec::with_capacity(levels);
    for l in 1..=levels {
        cond4_eps.push(cond4_level(system, &tables, &sets, grid, l, eps[l - 1], levels, vacuous)?);
    }

    let cond1_pass = cond1_tail.iter().all(|e| e.pass)
        && cond1_growth.iter().all(|e| e.pass)
        && cond1_ratio.iter().all(|e| e.pass);
    let cond2_pass = cond2_max.iter().all(|e| e.pass);
    let cond3_pass = cond3_max.iter().all(|e| e.pass);
    let cond4_pass = cond4_eps.iter().all(|e| e.pass);
    Ok(ConditionReport {
        space: system.space(),
        n_ops,
        levels,
        horizon,
        eps: eps[..levels].to_vec(),
        vacuous,
        cond1_tail,
        cond1_growth,
        cond1_ratio,
        cond2_max,
        cond3_max,
        cond4_eps,
        cond1_pass,
        cond2_pass,
        cond3_pass,
        cond4_pass,
        pass: cond1_pass && cond2_pass && cond3_pass && cond4_pass,
    })
}

/// Check the `ℓ^p` characterization conditions (1)-(4) over `family` and
/// `grid`, truncated to the common level count and to times `≤ horizon`.
///
/// Condition (1) is reported as summability tails per `(s, j)`, (2) and (3)
/// as exact finite sums in log-sum-exp, and (4) as a bounded search for the
/// least qualifying level `L` with `ε = ε_l`.
pub fn check_lp(
    system: &TupleSystem,
    family: &SeparatedFamily,
    grid: &TargetGrid,
    eps: &[f64],
    horizon: u64,
) -> Result<ConditionReport, ShiftError> {
    let p = system
        .space()
        .p()
        .ok_or_else(|| ShiftError::BadSpace("check_lp needs an lp space".into()))?;
    condition_report(system, family, grid, eps, horizon, RatioMode::SumP(p))
}

/// Check the `c₀` characterization conditions: same index scans as
/// [`check_lp`] but with pointwise maxima instead of sums, plus the growth
/// and cross-block ratio parts of condition (1).
pub fn check_c0(
    system: &TupleSystem,
    family: &SeparatedFamily,
    grid: &TargetGrid,
    eps: &[f64],
    horizon: u64,
) -> Result<ConditionReport, ShiftError> {
    if system.space() != Space::C0 {
        return Err(ShiftError::BadSpace("check_c0 needs the c0 space".into()));
    }
    condition_report(system, family, grid, eps, horizon, RatioMode::Pointwise)
}

/// Check the single-set weighted-shift conditions (1), (2a), (2b) for a
/// tuple of plain shifts (`affine(1)` maps) on `ℓ^p`.
///
/// (2a) appears as the `cond2_max` entry, (2b) as the `cond4_eps` entry
/// with `found = Some(l)` on success. An empty `A` passes vacuously with
/// infinite margins and `vacuous` set.
pub fn check_shift_upper(
    system: &TupleSystem,
    l: u64,
    a: &[Vec<f64>],
    eps: f64,
    a_set: &NatSet,
    horizon: u64,
) -> Result<ConditionReport, ShiftError> {
    let p = system
        .space()
        .p()
        .ok_or_else(|| ShiftError::BadSpace("the weighted-shift check needs an lp space".into()))?;
    for op in system.ops() {
        if op.f != (IndexMap::Affine { shift: 1 }) {
            return Err(ShiftError::BadMap(
                "the weighted-shift check needs plain shifts (affine(1) maps)".into(),
            ));
        }
    }
    let n_ops = system.len();
    if l == 0 || horizon == 0 {
        return Err(ShiftError::Inconsistent("l and horizon must be >= 1".into()));
    }
    if !(eps.is_finite() && eps > 0.0) {
        return Err(ShiftError::Inconsistent("eps must be positive and finite".into()));
    }
    if a.len() != n_ops {
        return Err(ShiftError::Inconsistent(format!(
            "a has {} rows but the system has {n_ops} operators",
            a.len()
        )));
    }
    for (s, row) in a.iter().enumerate() {
        if row.len() != l as usize {
            return Err(ShiftError::Inconsistent(format!(
                "a row {} has {} entries, expected {l}",
                s + 1,
                row.len()
            )));
        }
        if row.iter().any(|v| !v.is_finite() || *v == 0.0) {
            return Err(ShiftError::BadVec(format!("a row {} must be nonzero and finite", s + 1)));
        }
    }
    let set = a_set.restrict(horizon.min(a_set.horizon()));
    let vacuous = set.is_empty();
    let tables = product_tables(system, l, horizon)?;

    let from = (horizon / 2).max(1);
    let mut cond1_tail = Vec::new();
    for s in 1..=n_ops {
        for j in 1..=l {
            let t = system.ops()[s - 1].summability_tail(j, from, horizon)?;
            cond1_tail.push(Cond1Entry {
                s,
                j,
                tail_sum: t.sum,
                last_term_log: t.last_term_log,
                from: t.from,
                to: t.to,
                pass: t.sum <= eps,
            });
        }
    }

    // (2a): Σ_{m ∈ A, m > n} |W^s_{j+m-n,n}|^p / |W^t_{j,m}|^p ≤ ε.
    let mut worst2 = WorstTracker::new();
    for &n in set.elements() {
        for j in 1..=l {
            for s in 1..=n_ops {
                for t in 1..=n_ops {
                    if s == t {
                        continue;
                    }
                    let mut logs = Vec::new();
                    let mut last_m = None;
                    for &m in set.elements() {
                        if m <= n {
                            continue;
                        }
                        let ws = tables[s - 1].log_product(j + m - n, n)?;
                        let wt = tables[t - 1].log_product(j, m)?;
                        logs.push(p * (ws.log_abs - wt.log_abs));
                        last_m = Some(m);
                    }
                    if logs.is_empty() {
                        continue;
                    }
                    let value = log_sum_exp(&logs).exp();
                    worst2.offer(CondEntry {
                        l: l as usize,
                        value,
                        bound: eps,
                        margin: eps - value,
                        witness: Some(CondWitness {
                            j,
                            k: 0,
                            l: l as usize,
                            n,
                            m: last_m,
                            s,
                            t,
                            terms: logs.len() as u64,
                            last_term_log: logs.last().copied().unwrap_or(f64::NEG_INFINITY),
                        }),
                        pass: value <= eps,
                    });
                }
            }
        }
    }
    let entry2 = worst2.finish(l as usize, eps);

    // (2b): |W^s_{j,n} / W^t_{j,n} - a_{s,j} / a_{t,j}| ≤ ε.
    let mut a_worst = 0.0f64;
    let mut witness_a = None;
    for &n in set.elements() {
        for j in 1..=l {
            for s in 1..=n_ops {
                for t in 1..=n_ops {
                    if s == t {
                        continue;
                    }
                    let ratio = tables[s - 1]
                        .log_product(j, n)?
                        .div(tables[t - 1].log_product(j, n)?);
                    let got = ratio.to_f64().unwrap_or(f64::INFINITY);
                    let want = a[s - 1][(j - 1) as usize] / a[t - 1][(j - 1) as usize];
                    let v = (got - want).abs();
                    if v > a_worst {
                        a_worst = v;
                        witness_a = Some(Cond4Witness { n, s, t, j, value: v });
                    }
                }
            }
        }
    }
    let pass_b = vacuous || a_worst <= eps;
    let entry4 = Cond4Entry {
        l: l as usize,
        eps_used: eps,
        found: if !vacuous && pass_b { Some(l as usize) } else { None },
        at: l as usize,
        a_worst,
        b_worst: 0.0,
        witness_a,
        witness_b: None,
        pass: pass_b,
    };

    let cond1_pass = cond1_tail.iter().all(|e| e.pass);
    let cond2_pass = entry2.pass;
    let cond4_pass = entry4.pass;
    Ok(ConditionReport {
        space: system.space(),
        n_ops,
        levels: l as usize,
        horizon,
        eps: vec![eps],
        vacuous,
        cond1_tail,
        cond1_growth: Vec::new(),
        cond1_ratio: Vec::new(),
        cond2_max: vec![entry2],
        cond3_max: Vec::new(),
        cond4_eps: vec![entry4],
        cond1_pass,
        cond2_pass,
        cond3_pass: true,
        cond4_pass,
        pass: cond1_pass && cond2_pass && cond4_pass,
    })
}

/// The index blocks `J_{n,1,l} = [l]` and
/// `J_{n,t+1,l} = [l] \ f_{t+1}^{-n}(∪_{s≤t} f_s^n([l]))`, one per
/// operator. Their images under `f_t^n` are pairwise disjoint and cover
/// `∪_s f_s^n([l])`.
pub fn build_index_blocks(
    system: &TupleSystem,
    n: u64,
    l: u64,
) -> Result<Vec<Vec<u64>>, ShiftError> {
    let mut union_imgs: BTreeSet<u64> = BTreeSet::new();
    let mut blocks = Vec::with_capacity(system.len());
    for op in system.ops() {
        let mut imgs = Vec::with_capacity(l as usize);
        for j in 1..=l {
            imgs.push(op.f.iterate(j, n)?);
        }
        let block: Vec<u64> =
            (1..=l).filter(|&j| !union_imgs.contains(&imgs[(j - 1) as usize])).collect();
        blocks.push(block);
        union_imgs.extend(imgs);
    }
    Ok(blocks)
}

fn validate_targets(system: &TupleSystem, y: &[FiniteVec], l: u64) -> Result<(), ShiftError> {
    if y.len() != system.len() {
        return Err(ShiftError::Inconsistent(format!(
            "target tuple has {} entries but the system has {} operators",
            y.len(),
            system.len()
        )));
    }
    for (t, yt) in y.iter().enumerate() {
        if yt.max_support().is_some_and(|m| m > l) {
            return Err(ShiftError::BadVec(format!("target {} has support beyond {l}", t + 1)));
        }
    }
    Ok(())
}

fn apply_s_with(
    system: &TupleSystem,
    tables: &[ProductTable<'_>],
    y: &[FiniteVec],
    n: u64,
    l: u64,
) -> Result<LogVec, ShiftError> {
    validate_targets(system, y, l)?;
    let blocks = build_index_blocks(system, n, l)?;
    let mut out = LogVec::zero();
    for (t, block) in blocks.iter().enumerate() {
        let f = &system.ops()[t].f;
        for &j in block {
            let c = y[t].get(j);
            if c == 0.0 {
                continue;
            }
            let coeff = tables[t]
                .log_product(j, n)?
                .recip()
                .mul(LogProduct::from_f64(c).expect("grid entries nonzero finite"));
            let img = f.iterate(j, n)?;
            debug_assert!(out.get(img).is_none(), "image blocks collide");
            out.add_term(img, coeff);
        }
    }
    Ok(out)
}

/// `S_n(y) = Σ_t Σ_{j∈J_{n,t,l}} (1/W^t_{j,n}) y^t_j e_{f_t^n(j)}` with
/// log-domain coefficients.
pub fn apply_s_log(
    system: &TupleSystem,
    y: &[FiniteVec],
    n: u64,
    l: u64,
) -> Result<LogVec, ShiftError> {
    let tables = product_tables(system, l, n)?;
    apply_s_with(system, &tables, y, n, l)
}

/// The `f64` form of [`apply_s_log`]. Coefficients outside f64 range are
/// errors carrying their log magnitude.
pub fn apply_s(
    system: &TupleSystem,
    y: &[FiniteVec],
    n: u64,
    l: u64,
) -> Result<FiniteVec, ShiftError> {
    apply_s_log(system, y, n, l)?.to_finite()
}

/// Convergence bookkeeping for one block of a built vector.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct LevelNorms {
    pub l: usize,
    /// Times of `A_l` that contributed within the horizon.
    pub terms: u64,
    /// `‖Σ_{n∈A_l∩[1,horizon]} S_n y_l‖`.
    pub block_norm: f64,
    /// `sup_F ‖Σ_{n∈F} S_n y_l‖` over the suffixes `F` of the block, the
    /// finite stand-in for unconditional convergence (suffixes satisfy the
    /// hypothesis `min F ≥ min A_l`).
    pub suffix_sup: f64,
}

/// The truncated double sum `x = Σ_l Σ_{n∈A_l} S_n y_l` with per-block
/// diagnostics.
#[derive(Clone, Debug)]
pub struct BuiltVector {
    pub x: LogVec,
    pub levels: Vec<LevelNorms>,
}

fn level_sum(
    system: &TupleSystem,
    tables: &[ProductTable<'_>],
    y: &[FiniteVec],
    set: &NatSet,
    l: u64,
) -> Result<(LogVec, LevelNorms), ShiftError> {
    let space = system.space();
    let mut acc = LogVec::zero();
    let mut suffix_sup = 0.0f64;
    for &n in set.elements().iter().rev() {
        let s_n = apply_s_with(system, tables, y, n, l)?;
        for (&j, &c) in s_n.iter() {
            acc.add_term(j, c);
        }
        suffix_sup = suffix_sup.max(acc.norm(space));
    }
    let block_norm = acc.norm(space);
    Ok((acc, LevelNorms { l: l as usize, terms: set.len() as u64, block_norm, suffix_sup }))
}

/// Assemble `x = Σ_{l} Σ_{n∈A_l∩[1,horizon]} S_n y_l` in log domain,
/// recording per-block norms and suffix sups.
pub fn build_vector(
    system: &TupleSystem,
    grid: &TargetGrid,
    family: &SeparatedFamily,
    horizon: u64,
) -> Result<BuiltVector, ShiftError> {
    if grid.n_ops() != system.len() {
        return Err(ShiftError::Inconsistent(format!(
            "grid tuples have {} entries but the system has {} operators",
            grid.n_ops(),
            system.len()
        )));
    }
    let levels = family.sets.len();
    if grid.levels() < levels {
        return Err(ShiftError::Inconsistent(format!(
            "family has {levels} blocks but the grid stops at level {}",
            grid.levels()
        )));
    }
    let tables = product_tables(system, levels as u64, horizon)?;
    let mut x = LogVec::zero();
    let mut level_norms = Vec::with_capacity(levels);
    for l in 1..=levels {
        let set = family.sets[l - 1].restrict(horizon.min(family.sets[l - 1].horizon()));
        let (acc, norms) = level_sum(system, &tables, grid.tuple(l), &set, l as u64)?;
        for (&j, &c) in acc.iter() {
            x.add_term(j, c);
        }
        level_norms.push(norms);
    }
    Ok(BuiltVector { x, levels: level_norms })
}

/// Single-level form of [`build_vector`]:
/// `x = Σ_{n∈A} Σ_t Σ_{j∈J_{n,t}} (1/W^t_{j,n}) a_{t,j} e_{f_t^n(j)}`.
pub fn build_single_block_vector(
    system: &TupleSystem,
    a: &[Vec<f64>],
    a_set: &NatSet,
    l: u64,
    horizon: u64,
) -> Result<BuiltVector, ShiftError> {
    if a.len() != system.len() {
        return Err(ShiftError::Inconsistent(format!(
            "a has {} rows but the system has {} operators",
            a.len(),
            system.len()
        )));
    }
    let mut y = Vec::with_capacity(a.len());
    for (t, row) in a.iter().enumerate() {
        if row.len() != l as usize {
            return Err(ShiftError::Inconsistent(format!(
                "a row {} has {} entries, expected {l}",
                t + 1,
                row.len()
            )));
        }
        if row.iter().any(|v| !v.is_finite() || *v == 0.0) {
            return Err(ShiftError::BadVec(format!("a row {} must be nonzero and finite", t + 1)));
        }
        y.push(FiniteVec::from_pairs(
            row.iter().enumerate().map(|(i, &v)| (i as u64 + 1, v)),
        )?);
    }
    let tables = product_tables(system, l, horizon)?;
    let set = a_set.restrict(horizon.min(a_set.horizon()));
    let (x, norms) = level_sum(system, &tables, &y, &set, l)?;
    Ok(BuiltVector { x, levels: vec![norms] })
}

/// `‖T^n x - target‖` for one operator, in log domain. With `bail` set,
/// returns early once the partial norm already exceeds the threshold.
fn orbit_error_one(
    op: &PseudoShift,
    table: &ProductTable<'_>,
    x: &LogVec,
    n: u64,
    target: &FiniteVec,
    bail: Option<f64>,
) -> Result<f64, ShiftError> {
    let space = op.space;
    let p = space.p();
    let bail_acc = bail.map(|b| match p {
        Some(p) => b.powf(p),
        None => b,
    });
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    let add = |d: LogProduct, sum: &mut f64, comp: &mut f64| -> f64 {
        match p {
            Some(p) => {
                if !sum.is_infinite() {
                    let term = d.abs_pow(p).exp();
                    if term.is_infinite() {
                        *sum = f64::INFINITY;
                    } else {
                        let t = *sum + term;
                        *comp +=
                            if sum.abs() >= term { (*sum - t) + term } else { (term - t) + *sum };
                        *sum = t;
                    }
                }
                if sum.is_infinite() {
                    *sum
                } else {
                    *sum + *comp
                }
            }
            None => {
                *sum = sum.max(d.log_abs.exp());
                *sum
            }
        }
    };
    let finish = |acc: f64| match p {
        Some(p) => acc.powf(1.0 / p),
        None => acc,
    };

    // Coordinates in the target's support: (T^n x)_j = W_{j,n} x_{f^n(j)}.
    for (&j, &yv) in target.iter() {
        let neg_y = LogProduct::from_f64(-yv).expect("target entries nonzero finite");
        let img = match op.f.iterate(j, n) {
            Ok(i) => Some(i),
            Err(ShiftError::MapHorizon { .. }) => None,
            Err(e) => return Err(e),
        };
        let d = match img.and_then(|i| x.get(i)) {
            Some(c) => table.log_product(j, n)?.mul(c).signed_add(neg_y),
            None => neg_y,
        };
        let acc = add(d, &mut sum, &mut comp);
        if let Some(b) = bail_acc {
            if acc > b {
                return Ok(finish(acc));
            }
        }
    }
    // Surviving coordinates of x off the target's support.
    let lo = match &op.f {
        IndexMap::Affine { shift } => shift.saturating_mul(n).saturating_add(1),
        IndexMap::Table { .. } => 1,
    };
    for (&idx, &c) in x.iter_from(lo) {
        let Some(q) = op.f.inverse_iterate(idx, n)? else { continue };
        if target.get(q) != 0.0 {
            continue;
        }
        let d = table.log_product(q, n)?.mul(c);
        let acc = add(d, &mut sum, &mut comp);
        if let Some(b) = bail_acc {
            if acc > b {
                return Ok(finish(acc));
            }
        }
    }
    Ok(finish(match p {
        Some(_) => sum + comp,
        None => sum,
    }))
}

/// `‖T_s^n x - target_s‖` for every operator, with all coefficient
/// arithmetic in log domain; astronomically large mismatches saturate to
/// infinity instead of overflowing.
pub fn orbit_error_log(
    system: &TupleSystem,
    x: &LogVec,
    n: u64,
    targets: &[FiniteVec],
) -> Result<Vec<f64>, ShiftError> {
    if targets.len() != system.len() {
        return Err(ShiftError::Inconsistent(format!(
            "target tuple has {} entries but the system has {} operators",
            targets.len(),
            system.len()
        )));
    }
    let max_idx = x.max_support().unwrap_or(1);
    let mut errs = Vec::with_capacity(system.len());
    for (s, op) in system.ops().iter().enumerate() {
        let table = op.product_table(max_idx)?;
        errs.push(orbit_error_one(op, &table, x, n, &targets[s], None)?);
    }
    Ok(errs)
}

/// [`orbit_error_log`] for a plain `f64` vector.
pub fn orbit_error(
    system: &TupleSystem,
    x: &FiniteVec,
    n: u64,
    targets: &[FiniteVec],
) -> Result<Vec<f64>, ShiftError> {
    orbit_error_log(system, &LogVec::from_finite(x), n, targets)
}

/// `{n ∈ [1, horizon] : ‖T_s^n x - target_s‖ < ε for every s}` (strict, so
/// `ε = 0` yields the empty set).
pub fn hitting_times(
    system: &TupleSystem,
    x: &LogVec,
    targets: &[FiniteVec],
    eps: f64,
    horizon: u64,
) -> Result<NatSet, ShiftError> {
    if targets.len() != system.len() {
        return Err(ShiftError::Inconsistent(format!(
            "target tuple has {} entries but the system has {} operators",
            targets.len(),
            system.len()
        )));
    }
    if !(eps >= 0.0) {
        return Err(ShiftError::Inconsistent("eps must be nonnegative".into()));
    }
    let max_idx = x.max_support().unwrap_or(1);
    let tables: Vec<ProductTable<'_>> = system
        .ops()
        .iter()
        .map(|op| op.product_table(max_idx))
        .collect::<Result<_, _>>()?;
    let mut hits = Vec::new();
    'times: for n in 1..=horizon {
        for (s, op) in system.ops().iter().enumerate() {
            let e = orbit_error_one(op, &tables[s], x, n, &targets[s], Some(eps))?;
            if !(e < eps) {
                continue 'times;
            }
        }
        hits.push(n);
    }
    Ok(NatSet::new(hits, horizon).expect("hits are ordered and within horizon"))
}

/// Worst-case norm of one criterion hypothesis at level `l`.
///
/// `hyp = 2` is `‖Σ_{i∈A_l\{n}} T_s^n S_i y_l‖` over all `n` in the union
/// of blocks, `hyp = 3` is `‖Σ_{i∈A_k} T_s^n S_i y_k‖` for `k < l` and
/// `n ∈ A_l`, and `hyp = 4` is `‖T_s^n S_n y_l - y_l^s‖` for `n ∈ A_l`;
/// each compared against `ε_l`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct HypNormEntry {
    pub hyp: u8,
    pub l: usize,
    pub k: Option<usize>,
    pub n: u64,
    pub s: usize,
    pub value: f64,
    pub bound: f64,
    pub pass: bool,
}

fn lv_sub(a: &LogVec, b: &LogVec) -> LogVec {
    let mut out = a.clone();
    for (&j, &c) in b.iter() {
        out.add_term(j, LogProduct { log_abs: c.log_abs, sign: c.sign * Sign::Minus });
    }
    out
}

fn apply_power_log(
    op: &PseudoShift,
    table: &ProductTable<'_>,
    x: &LogVec,
    n: u64,
) -> Result<LogVec, ShiftError> {
    let lo = match &op.f {
        IndexMap::Affine { shift } => shift.saturating_mul(n).saturating_add(1),
        IndexMap::Table { .. } => 1,
    };
    let mut out = LogVec::zero();
    for (&idx, &c) in x.iter_from(lo) {
        let Some(q) = op.f.inverse_iterate(idx, n)? else { continue };
        out.add_term(q, table.log_product(q, n)?.mul(c));
    }
    Ok(out)
}

/// Evaluate the criterion's hypothesis norms (2), (3), (4) directly over a
/// family and grid, one worst-case entry per `(hyp, l)` pair (and per
/// `(l, k)` for hypothesis 3). These are the quantities the ε-schedule must
/// dominate for the orbit bound
/// `‖T_s^n x - y_l^s‖ ≤ (l-1)ε_l + Σ_{k≥l} kε_k + ε_l` to hold.
pub fn criterion_norms(
    system: &TupleSystem,
    grid: &TargetGrid,
    family: &SeparatedFamily,
    eps: &[f64],
    horizon: u64,
) -> Result<Vec<HypNormEntry>, ShiftError> {
    if grid.n_ops() != system.len() {
        return Err(ShiftError::Inconsistent(format!(
            "grid tuples have {} entries but the system has {} operators",
            grid.n_ops(),
            system.len()
        )));
    }
    let levels = grid.levels().min(family.sets.len());
    if levels == 0 || eps.len() < levels {
        return Err(ShiftError::Inconsistent(format!(
            "need a nonempty family and {levels} eps entries, got {}",
            eps.len()
        )));
    }
    let space = system.space();
    let sets: Vec<NatSet> = family
        .sets
        .iter()
        .take(levels)
        .map(|s| s.restrict(horizon.min(s.horizon())))
        .collect();
    let tables = product_tables(system, levels as u64, horizon)?;

    let mut s_vecs: Vec<BTreeMap<u64, LogVec>> = Vec::with_capacity(levels);
    let mut block_sums: Vec<LogVec> = Vec::with_capacity(levels);
    for l in 1..=levels {
        let mut per_n = BTreeMap::new();
        let mut block = LogVec::zero();
        for &n in sets[l - 1].elements() {
            let v = apply_s_with(system, &tables, grid.tuple(l), n, l as u64)?;
            for (&j, &c) in v.iter() {
                block.add_term(j, c);
            }
            per_n.insert(n, v);
        }
        s_vecs.push(per_n);
        block_sums.push(block);
    }
    let union: BTreeSet<u64> = sets.iter().flat_map(|s| s.iter()).collect();

    let mut out = Vec::new();
    for l in 1..=levels {
        let bound = eps[l - 1];
        let mut worst: Option<HypNormEntry> = None;
        for &n in &union {
            let base = match s_vecs[l - 1].get(&n) {
                Some(sn) => lv_sub(&block_sums[l - 1], sn),
                None => block_sums[l - 1].clone(),
            };
            for (s, op) in system.ops().iter().enumerate() {
                let value = apply_power_log(op, &tables[s], &base, n)?.norm(space);
                if worst.as_ref().is_none_or(|w| value > w.value) {
                    worst = Some(HypNormEntry {
                        hyp: 2,
                        l,
                        k: None,
                        n,
                        s: s + 1,
                        value,
                        bound,
                        pass: value <= bound,
                    });
                }
            }
        }
        if let Some(w) = worst {
            out.push(w);
        }
    }
    for l in 2..=levels {
        let bound = eps[l - 1];
        for k in 1..l {
            let mut worst: Option<HypNormEntry> = None;
            for &n in sets[l - 1].elements() {
                for (s, op) in system.ops().iter().enumerate() {
                    let value = apply_power_log(op, &tables[s], &block_sums[k - 1], n)?.norm(space);
                    if worst.as_ref().is_none_or(|w| value > w.value) {
                        worst = Some(HypNormEntry {
                            hyp: 3,
                            l,
                            k: Some(k),
                            n,
                            s: s + 1,
                            value,
                            bound,
                            pass: value <= bound,
                        });
                    }
                }
            }
            if let Some(w) = worst {
                out.push(w);
            }
        }
    }
    for l in 1..=levels {
        let bound = eps[l - 1];
        let mut worst: Option<HypNormEntry> = None;
        for (&n, sn) in &s_vecs[l - 1] {
            for (s, op) in system.ops().iter().enumerate() {
                let value =
                    orbit_error_one(op, &tables[s], sn, n, &grid.tuple(l)[s], None)?;
                if worst.as_ref().is_none_or(|w| value > w.value) {
                    worst = Some(HypNormEntry {
                        hyp: 4,
                        l,
                        k: None,
                        n,
                        s: s + 1,
                        value,
                        bound,
                        pass: value <= bound,
                    });
                }
            }
        }
        if let Some(w) = worst {
            out.push(w);
        }
    }
    Ok(out)
}
