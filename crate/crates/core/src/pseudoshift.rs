//! Weighted pseudo-shifts `T_{f,w}` on `ℓ^p` and `c₀`.
//!
//! For a strictly increasing `f : ℕ → ℕ` with `f(1) > 1` and a bounded
//! weight sequence `w` with `0 < |w_n|`, the operator acts by
//!
//! ```text
//! T_{f,w} (Σ x_j e_j) = Σ w_{f(j)} x_{f(j)} e_j ,
//! ```
//!
//! so `(T^n x)_j = W_{j,n} · x_{f^n(j)}` with the orbit weight product
//! `W_{l,n} = Π_{m=1}^n w_{f^m(l)}`. The classical weighted backward shift
//! `B_w` is `f(n) = n + 1`, the power `B^r` is `f(n) = n + r`.
//!
//! Products along orbits grow like `2^n`, so `W_{l,n}` is carried as a
//! [`LogProduct`] and exponentiated only where a plain coefficient is
//! required, with overflow reported rather than saturated.

use crate::log_domain::{CompensatedSum, LogProduct, Sign};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ShiftError {
    #[error("index iteration overflowed u64")]
    IndexOverflow,
    #[error("index map table covers [1, {len}], needed f({index})")]
    MapHorizon { index: u64, len: u64 },
    #[error("weight table covers indices [2, {horizon}], needed w_{index}")]
    WeightHorizon { index: u64, horizon: u64 },
    #[error("weight index {index} below 2")]
    WeightIndexLow { index: u64 },
    #[error(transparent)]
    Overflow(#[from] crate::log_domain::Overflow),
    #[error("coefficient exp({log_abs}) underflows f64")]
    Underflow { log_abs: f64 },
    #[error("weight at index {index} is zero or not finite")]
    BadWeight { index: u64 },
    #[error("invalid index map: {0}")]
    BadMap(String),
    #[error("invalid space: {0}")]
    BadSpace(String),
    #[error("invalid vector: {0}")]
    BadVec(String),
    #[error("inconsistent inputs: {0}")]
    Inconsistent(String),
}

/// Sequence space the operator acts on.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Space {
    Lp(f64),
    C0,
}

impl Space {
    pub fn validate(self) -> Result<Space, ShiftError> {
        if let Space::Lp(p) = self {
            if !(p.is_finite() && p >= 1.0) {
                return Err(ShiftError::BadSpace(format!("lp exponent {p} must be >= 1")));
            }
        }
        Ok(self)
    }

    /// The exponent, if this is an `ℓ^p` space.
    pub fn p(self) -> Option<f64> {
        match self {
            Space::Lp(p) => Some(p),
            Space::C0 => None,
        }
    }
}

/// Wire form of an index map: `{"affine": r}` or `{"table": [f(1), f(2), ...]}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IndexMapConfig {
    Affine(u64),
    Table(Vec<u64>),
}

/// Strictly increasing index map with `f(1) > 1`.
///
/// `Affine { shift: r }` is `f(n) = n + r` (total on ℕ); `Table` lists
/// `f(1), f(2), ...` and is only known on `[1, len]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "IndexMapConfig", into = "IndexMapConfig")]
pub enum IndexMap {
    Affine { shift: u64 },
    Table { values: Vec<u64> },
}

impl TryFrom<IndexMapConfig> for IndexMap {
    type Error = ShiftError;
    fn try_from(c: IndexMapConfig) -> Result<IndexMap, ShiftError> {
        match c {
            IndexMapConfig::Affine(shift) => IndexMap::affine(shift),
            IndexMapConfig::Table(values) => IndexMap::table(values),
        }
    }
}

impl From<IndexMap> for IndexMapConfig {
    fn from(m: IndexMap) -> IndexMapConfig {
        match m {
            IndexMap::Affine { shift } => IndexMapConfig::Affine(shift),
            IndexMap::Table { values } => IndexMapConfig::Table(values),
        }
    }
}

impl IndexMap {
    pub fn affine(shift: u64) -> Result<IndexMap, ShiftError> {
        if shift == 0 {
            return Err(ShiftError::BadMap("affine shift must be >= 1".into()));
        }
        Ok(IndexMap::Affine { shift })
    }

    pub fn table(values: Vec<u64>) -> Result<IndexMap, ShiftError> {
        if values.is_empty() {
            return Err(ShiftError::BadMap("empty table".into()));
        }
        if values[0] < 2 {
            return Err(ShiftError::BadMap(format!("f(1) = {} but f(1) > 1 is required", values[0])));
        }
        for i in 1..values.len() {
            if values[i] <= values[i - 1] {
                return Err(ShiftError::BadMap(format!(
                    "f({}) = {} breaks strict increase",
                    i + 1,
                    values[i]
                )));
            }
        }
        Ok(IndexMap::Table { values })
    }

    /// Largest argument the map is defined on.
    pub fn domain_max(&self) -> u64 {
        match self {
            IndexMap::Affine { .. } => u64::MAX,
            IndexMap::Table { values } => values.len() as u64,
        }
    }

    pub fn apply(&self, j: u64) -> Result<u64, ShiftError> {
        debug_assert!(j >= 1);
        match self {
            IndexMap::Affine { shift } => j.checked_add(*shift).ok_or(ShiftError::IndexOverflow),
            IndexMap::Table { values } => {
                if j > values.len() as u64 {
                    Err(ShiftError::MapHorizon { index: j, len: values.len() as u64 })
                } else {
                    Ok(values[(j - 1) as usize])
                }
            }
        }
    }

    /// `f^n(j)`; `n = 0` is the identity.
    pub fn iterate(&self, j: u64, n: u64) -> Result<u64, ShiftError> {
        match self {
            IndexMap::Affine { shift } => shift
                .checked_mul(n)
                .and_then(|s| j.checked_add(s))
                .ok_or(ShiftError::IndexOverflow),
            IndexMap::Table { .. } => {
                let mut k = j;
                for _ in 0..n {
                    k = self.apply(k)?;
                }
                Ok(k)
            }
        }
    }

    /// `f^{-1}(k)` when `k` has a preimage.
    pub fn preimage(&self, k: u64) -> Result<Option<u64>, ShiftError> {
        match self {
            IndexMap::Affine { shift } => Ok(k.checked_sub(*shift).filter(|&j| j >= 1)),
            IndexMap::Table { values } => {
                // A table only determines membership of the image up to
                // values[len-1]; beyond that the preimage is unknown.
                if k > *values.last().expect("table validated nonempty") {
                    return Err(ShiftError::MapHorizon { index: k, len: values.len() as u64 });
                }
                Ok(values.binary_search(&k).ok().map(|i| i as u64 + 1))
            }
        }
    }

    /// `f^{-n}(k)` when the full chain of preimages exists.
    pub fn inverse_iterate(&self, k: u64, n: u64) -> Result<Option<u64>, ShiftError> {
        match self {
            IndexMap::Affine { shift } => {
                let s = shift.checked_mul(n).ok_or(ShiftError::IndexOverflow)?;
                Ok(k.checked_sub(s).filter(|&j| j >= 1))
            }
            IndexMap::Table { .. } => {
                let mut j = k;
                for _ in 0..n {
                    match self.preimage(j)? {
                        Some(p) => j = p,
                        None => return Ok(None),
                    }
                }
                Ok(Some(j))
            }
        }
    }
}

/// Describes how a generated weight sequence was produced; carried verbatim
/// so a serialized shift can be regenerated. The parameters are opaque at
/// this layer and interpreted by the generators.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub generator: String,
    pub params: serde_json::Value,
}

/// Wire form of a weight sequence.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum WeightConfig {
    Constant { constant: f64 },
    Table { table: Vec<f64> },
    Generator(GeneratorSpec),
}

#[derive(Clone, Debug, PartialEq)]
enum WeightValues {
    Constant(f64),
    /// `table[i]` is `w_{i+2}`.
    Table(Vec<f64>),
    /// Log-domain entries, same indexing. Used for extracted and generated
    /// sequences whose raw magnitudes would under- or overflow `f64`.
    LogTable(Vec<LogProduct>),
}

/// Bounded sequence of nonzero weights `w_n`, defined for `n ≥ 2`.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightSeq {
    values: WeightValues,
    /// Echo of the generator that produced a generated sequence.
    generator: Option<GeneratorSpec>,
    /// `log sup_n |w_n|` over the stored range.
    log_bound: f64,
}

impl WeightSeq {
    pub fn constant(c: f64) -> Result<WeightSeq, ShiftError> {
        if c == 0.0 || !c.is_finite() {
            return Err(ShiftError::BadWeight { index: 2 });
        }
        Ok(WeightSeq { values: WeightValues::Constant(c), generator: None, log_bound: c.abs().ln() })
    }

    pub fn table(t: Vec<f64>) -> Result<WeightSeq, ShiftError> {
        let mut log_bound = f64::NEG_INFINITY;
        for (i, &w) in t.iter().enumerate() {
            if w == 0.0 || !w.is_finite() {
                return Err(ShiftError::BadWeight { index: i as u64 + 2 });
            }
            log_bound = log_bound.max(w.abs().ln());
        }
        Ok(WeightSeq { values: WeightValues::Table(t), generator: None, log_bound })
    }

    pub fn log_table(t: Vec<LogProduct>) -> Result<WeightSeq, ShiftError> {
        let mut log_bound = f64::NEG_INFINITY;
        for (i, w) in t.iter().enumerate() {
            if !w.log_abs.is_finite() {
                return Err(ShiftError::BadWeight { index: i as u64 + 2 });
            }
            log_bound = log_bound.max(w.log_abs);
        }
        Ok(WeightSeq { values: WeightValues::LogTable(t), generator: None, log_bound })
    }

    /// Tag a sequence with the generator spec that produced it.
    pub fn with_generator(mut self, spec: GeneratorSpec) -> WeightSeq {
        self.generator = Some(spec);
        self
    }

    pub fn generator(&self) -> Option<&GeneratorSpec> {
        self.generator.as_ref()
    }

    /// Largest index `n` with `w_n` defined; `None` when unbounded.
    pub fn horizon(&self) -> Option<u64> {
        match &self.values {
            WeightValues::Constant(_) => None,
            WeightValues::Table(t) => Some(t.len() as u64 + 1),
            WeightValues::LogTable(t) => Some(t.len() as u64 + 1),
        }
    }

    /// `log sup |w_n|` over the stored range.
    pub fn log_bound(&self) -> f64 {
        self.log_bound
    }

    fn check_index(&self, n: u64) -> Result<usize, ShiftError> {
        if n < 2 {
            return Err(ShiftError::WeightIndexLow { index: n });
        }
        if let Some(h) = self.horizon() {
            if n > h {
                return Err(ShiftError::WeightHorizon { index: n, horizon: h });
            }
        }
        Ok((n - 2) as usize)
    }

    /// `w_n` in log domain.
    pub fn log_at(&self, n: u64) -> Result<LogProduct, ShiftError> {
        let i = self.check_index(n)?;
        Ok(match &self.values {
            WeightValues::Constant(c) => LogProduct::from_f64(*c).expect("validated nonzero"),
            WeightValues::Table(t) => LogProduct::from_f64(t[i]).expect("validated nonzero"),
            WeightValues::LogTable(t) => t[i],
        })
    }

    /// `w_n` as a plain scalar; errors if a log-domain entry overflows.
    pub fn value_at(&self, n: u64) -> Result<f64, ShiftError> {
        let i = self.check_index(n)?;
        match &self.values {
            WeightValues::Constant(c) => Ok(*c),
            WeightValues::Table(t) => Ok(t[i]),
            WeightValues::LogTable(t) => Ok(t[i].to_f64()?),
        }
    }

    pub fn to_config(&self) -> WeightConfig {
        if let Some(g) = &self.generator {
            return WeightConfig::Generator(g.clone());
        }
        match &self.values {
            WeightValues::Constant(c) => WeightConfig::Constant { constant: *c },
            WeightValues::Table(t) => WeightConfig::Table { table: t.clone() },
            // Boundary form of an untagged log table: plain values. Callers
            // serializing astronomically scaled sequences must tag them
            // with their generator instead.
            WeightValues::LogTable(t) => WeightConfig::Table {
                table: t.iter().map(|lp| lp.to_f64().unwrap_or(0.0)).collect(),
            },
        }
    }
}

/// Wire form of a pseudo-shift:
/// `{"f": {...}, "w": {...}, "space": {"lp": 2.0} | "c0"}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PseudoShiftConfig {
    pub f: IndexMapConfig,
    pub w: WeightConfig,
    pub space: Space,
}

/// A weighted pseudo-shift `T_{f,w}` together with its ambient space.
#[derive(Clone, Debug, PartialEq)]
pub struct PseudoShift {
    pub f: IndexMap,
    pub w: WeightSeq,
    pub space: Space,
}

impl PseudoShift {
    pub fn new(f: IndexMap, w: WeightSeq, space: Space) -> Result<PseudoShift, ShiftError> {
        Ok(PseudoShift { f, w, space: space.validate()? })
    }

    /// Classical weighted backward shift `B_w`.
    pub fn backward_shift(w: WeightSeq, space: Space) -> Result<PseudoShift, ShiftError> {
        PseudoShift::new(IndexMap::Affine { shift: 1 }, w, space)
    }

    /// Resolve a config with no generated weights. Generated weight configs
    /// are resolved by the generator layer.
    pub fn from_config(cfg: &PseudoShiftConfig) -> Result<PseudoShift, ShiftError> {
        let f: IndexMap = cfg.f.clone().try_into()?;
        let w = match &cfg.w {
            WeightConfig::Constant { constant } => WeightSeq::constant(*constant)?,
            WeightConfig::Table { table } => WeightSeq::table(table.clone())?,
            WeightConfig::Generator(spec) => {
                return Err(ShiftError::BadWeight { index: 2 }).map_err(|_| {
                    ShiftError::BadMap(format!(
                        "generator '{}' must be resolved by the generator layer",
                        spec.generator
                    ))
                })
            }
        };
        PseudoShift::new(f, w, cfg.space)
    }

    pub fn to_config(&self) -> PseudoShiftConfig {
        PseudoShiftConfig { f: self.f.clone().into(), w: self.w.to_config(), space: self.space }
    }

    /// Orbit weight product `W_{l,n} = Π_{m=1}^n w_{f^m(l)}` in log domain.
    /// Direct reference implementation; see [`ProductTable`] for the
    /// amortized form.
    pub fn weight_product(&self, l: u64, n: u64) -> Result<LogProduct, ShiftError> {
        debug_assert!(l >= 1);
        let mut acc = LogProduct::one();
        let mut idx = l;
        for _ in 0..n {
            idx = self.f.apply(idx)?;
            acc = acc.mul(self.w.log_at(idx)?);
        }
        Ok(acc)
    }

    /// `T^n x` by the coordinate formula `(T^n x)_j = W_{j,n} x_{f^n(j)}`.
    /// Coefficients are assembled in log domain and exponentiated once;
    /// overflow is an error carrying the offending log magnitude.
    pub fn apply_power(&self, x: &FiniteVec, n: u64) -> Result<FiniteVec, ShiftError> {
        apply_power_core(&self.f, x, n, |l, k| self.weight_product(l, k))
    }

    /// Weight sequence `v^{(j)}_n = w_{f^{n-1}(j)}` of the weighted shift
    /// quasi-conjugate to `T` along the orbit of `j`, for `n = 2..=max_n`,
    /// truncated where the map table or weight table ends.
    ///
    /// Raw tables are copied verbatim and log tables stay in log domain, so
    /// downstream arithmetic agrees bit for bit with arithmetic on `T`.
    pub fn extract_weighted_shift(&self, j: u64, max_n: u64) -> Result<WeightSeq, ShiftError> {
        debug_assert!(j >= 1);
        let log_domain = matches!(self.w.values, WeightValues::LogTable(_));
        let mut raw = Vec::new();
        let mut logs = Vec::new();
        let mut idx = j;
        for _ in 2..=max_n {
            idx = match self.f.apply(idx) {
                Ok(i) => i,
                Err(ShiftError::MapHorizon { .. }) => break,
                Err(e) => return Err(e),
            };
            if let Some(h) = self.w.horizon() {
                if idx > h {
                    break;
                }
            }
            if log_domain {
                logs.push(self.w.log_at(idx)?);
            } else {
                raw.push(self.w.value_at(idx)?);
            }
        }
        if log_domain {
            WeightSeq::log_table(logs)
        } else {
            WeightSeq::table(raw)
        }
    }

    /// Partial sum `Σ_{n=from}^{to} 1 / |W_{j,n}|^p` with per-term
    /// log-domain evaluation and compensated accumulation, plus the log of
    /// the last term. Only meaningful on `ℓ^p`.
    pub fn summability_tail(&self, j: u64, from: u64, to: u64) -> Result<SummabilityTail, ShiftError> {
        let p = self
            .space
            .p()
            .ok_or_else(|| ShiftError::BadSpace("summability tail needs an lp space".into()))?;
        assert!(from >= 1 && from <= to, "empty range [{from}, {to}]");
        let mut acc = LogProduct::one();
        let mut idx = j;
        let mut sum = CompensatedSum::new();
        let mut last_term_log = f64::NEG_INFINITY;
        for n in 1..=to {
            idx = self.f.apply(idx)?;
            acc = acc.mul(self.w.log_at(idx)?);
            if n >= from {
                last_term_log = -p * acc.log_abs;
                sum.add(last_term_log.exp());
            }
        }
        Ok(SummabilityTail { sum: sum.value(), last_term_log, from, to })
    }

    /// Precompute prefix data so `W_{l,n}` lookups cost `O(1)` for affine
    /// maps. `max_index` bounds the largest weight index that will be
    /// touched.
    pub fn product_table(&self, max_index: u64) -> Result<ProductTable<'_>, ShiftError> {
        ProductTable::new(self, max_index)
    }
}

/// Tail diagnostics of `Σ 1/|W_{j,n}|^p`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct SummabilityTail {
    pub sum: f64,
    pub last_term_log: f64,
    pub from: u64,
    pub to: u64,
}

fn apply_power_core(
    f: &IndexMap,
    x: &FiniteVec,
    n: u64,
    product: impl Fn(u64, u64) -> Result<LogProduct, ShiftError>,
) -> Result<FiniteVec, ShiftError> {
    let mut out = FiniteVec::zero();
    for (&k, &xv) in x.iter() {
        let Some(j) = f.inverse_iterate(k, n)? else { continue };
        let coeff = product(j, n)?.mul(LogProduct::from_f64(xv).expect("vector entries nonzero"));
        out.set(j, coeff.to_f64()?);
    }
    Ok(out)
}

/// Quasi-conjugacy map along the orbit of `j`:
/// `φ(x)_k = x_{f^{k-1}(j)}` for `k = 1..=max_k`, truncated where the map
/// table ends.
pub fn quasi_conjugacy(f: &IndexMap, j: u64, x: &FiniteVec, max_k: u64) -> Result<FiniteVec, ShiftError> {
    let mut out = FiniteVec::zero();
    let mut idx = j;
    for k in 1..=max_k {
        if k > 1 {
            idx = match f.apply(idx) {
                Ok(i) => i,
                Err(ShiftError::MapHorizon { .. }) => break,
                Err(e) => return Err(e),
            };
        }
        out.set(k, x.get(idx));
    }
    Ok(out)
}

enum TableKind {
    ConstantAffine { log_w: f64, negative: bool },
    ResidueAffine { shift: u64, cum: Vec<Vec<f64>>, neg: Vec<Vec<u32>> },
    Direct,
}

/// Amortized `W_{l,n}` lookups for one operator.
///
/// Affine maps with tabulated weights get per-residue prefix sums of
/// `log |w|` and running negative-sign counts; constant weights collapse to
/// a closed form; tabulated maps fall back to the direct product.
pub struct ProductTable<'a> {
    shift: &'a PseudoShift,
    max_index: u64,
    kind: TableKind,
}

impl<'a> ProductTable<'a> {
    fn new(shift: &'a PseudoShift, max_index: u64) -> Result<ProductTable<'a>, ShiftError> {
        let max_index = match shift.w.horizon() {
            Some(h) => max_index.min(h),
            None => max_index,
        };
        let kind = match (&shift.f, &shift.w.values) {
            (IndexMap::Affine { .. }, WeightValues::Constant(c)) => {
                TableKind::ConstantAffine { log_w: c.abs().ln(), negative: *c < 0.0 }
            }
            (IndexMap::Affine { shift: r }, _) => {
                let r = *r;
                let mut cum = Vec::with_capacity(r as usize);
                let mut neg = Vec::with_capacity(r as usize);
                for rho in 0..r {
                    let mut c = vec![0.0f64];
                    let mut s = vec![0u32];
                    let mut t = 0u64;
                    loop {
                        let idx = rho + t * r;
                        if idx > max_index {
                            break;
                        }
                        if idx >= 2 {
                            let w = shift.w.log_at(idx)?;
                            c.push(c.last().unwrap() + w.log_abs);
                            s.push(s.last().unwrap() + u32::from(w.is_negative()));
                        } else {
                            c.push(*c.last().unwrap());
                            s.push(*s.last().unwrap());
                        }
                        t += 1;
                    }
                    cum.push(c);
                    neg.push(s);
                }
                TableKind::ResidueAffine { shift: r, cum, neg }
            }
            _ => TableKind::Direct,
        };
        Ok(ProductTable { shift, max_index, kind })
    }

    /// `W_{l,n}`, identical in value to [`PseudoShift::weight_product`] up
    /// to the rounding of prefix-sum differences.
    pub fn log_product(&self, l: u64, n: u64) -> Result<LogProduct, ShiftError> {
        debug_assert!(l >= 1);
        if n == 0 {
            return Ok(LogProduct::one());
        }
        match &self.kind {
            TableKind::ConstantAffine { log_w, negative } => Ok(LogProduct {
                log_abs: *log_w * n as f64,
                sign: if *negative && n % 2 == 1 { Sign::Minus } else { Sign::Plus },
            }),
            TableKind::ResidueAffine { shift, cum, neg } => {
                let last = l.checked_add(shift.checked_mul(n).ok_or(ShiftError::IndexOverflow)?)
                    .ok_or(ShiftError::IndexOverflow)?;
                if last > self.max_index {
                    return Err(ShiftError::WeightHorizon {
                        index: last,
                        horizon: self.max_index,
                    });
                }
                let rho = (l % shift) as usize;
                let t0 = (l / shift) as usize;
                let tn = t0 + n as usize;
                let log_abs = cum[rho][tn + 1] - cum[rho][t0 + 1];
                let negatives = neg[rho][tn + 1] - neg[rho][t0 + 1];
                Ok(LogProduct {
                    log_abs,
                    sign: if negatives % 2 == 1 { Sign::Minus } else { Sign::Plus },
                })
            }
            TableKind::Direct => self.shift.weight_product(l, n),
        }
    }

    pub fn apply_power(&self, x: &FiniteVec, n: u64) -> Result<FiniteVec, ShiftError> {
        apply_power_core(&self.shift.f, x, n, |l, k| self.log_product(l, k))
    }

    pub fn space(&self) -> Space {
        self.shift.space
    }

    pub fn index_map(&self) -> &IndexMap {
        &self.shift.f
    }
}

/// Finitely supported vector with 1-based coordinates.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct FiniteVec {
    entries: BTreeMap<u64, f64>,
}

impl FiniteVec {
    pub fn zero() -> FiniteVec {
        FiniteVec::default()
    }

    pub fn basis(j: u64) -> FiniteVec {
        assert!(j >= 1);
        let mut v = FiniteVec::zero();
        v.set(j, 1.0);
        v
    }

    pub fn from_pairs(pairs: impl IntoIterator<Item = (u64, f64)>) -> Result<FiniteVec, ShiftError> {
        let mut v = FiniteVec::zero();
        for (j, x) in pairs {
            if j == 0 {
                return Err(ShiftError::BadVec("coordinate 0 (coordinates start at 1)".into()));
            }
            if !x.is_finite() {
                return Err(ShiftError::BadVec(format!("non-finite entry at {j}")));
            }
            if v.entries.insert(j, x).is_some() {
                return Err(ShiftError::BadVec(format!("duplicate coordinate {j}")));
            }
        }
        v.entries.retain(|_, x| *x != 0.0);
        Ok(v)
    }

    /// Set coordinate `j`; zero removes the entry.
    pub fn set(&mut self, j: u64, x: f64) {
        assert!(j >= 1);
        if x == 0.0 {
            self.entries.remove(&j);
        } else {
            self.entries.insert(j, x);
        }
    }

    pub fn get(&self, j: u64) -> f64 {
        self.entries.get(&j).copied().unwrap_or(0.0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&u64, &f64)> {
        self.entries.iter()
    }

    pub fn support(&self) -> impl Iterator<Item = u64> + '_ {
        self.entries.keys().copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn max_support(&self) -> Option<u64> {
        self.entries.keys().next_back().copied()
    }

    pub fn add(&self, other: &FiniteVec) -> FiniteVec {
        let mut out = self.clone();
        for (&j, &x) in other.iter() {
            let s = out.get(j) + x;
            out.set(j, s);
        }
        out
    }

    pub fn sub(&self, other: &FiniteVec) -> FiniteVec {
        let mut out = self.clone();
        for (&j, &x) in other.iter() {
            let s = out.get(j) - x;
            out.set(j, s);
        }
        out
    }

    pub fn scale(&self, c: f64) -> FiniteVec {
        let mut out = FiniteVec::zero();
        for (&j, &x) in self.iter() {
            out.set(j, c * x);
        }
        out
    }

    /// Norm in the given space: `(Σ |x_j|^p)^{1/p}` with compensated
    /// accumulation, or `sup |x_j]` on `c₀`.
    pub fn norm(&self, space: Space) -> f64 {
        match space {
            Space::Lp(p) => {
                let mut s = CompensatedSum::new();
                for &x in self.entries.values() {
                    let t = x.abs().powf(p);
                    if t.is_infinite() {
                        return f64::INFINITY;
                    }
                    s.add(t);
                }
                s.value().powf(1.0 / p)
            }
            Space::C0 => self.entries.values().fold(0.0, |m, x| m.max(x.abs())),
        }
    }
}

/// Finitely supported vector whose coefficients stay in log domain.
///
/// Vectors assembled from reciprocal weight products carry magnitudes like
/// `2^(-10^5)` long before any horizon of interest, so the coefficients are
/// held as [`LogProduct`]s and only exponentiated when a caller asks for
/// `f64` coordinates. Coordinates are 1-based as in [`FiniteVec`].
#[derive(Clone, Debug, Default)]
pub struct LogVec {
    entries: BTreeMap<u64, LogProduct>,
}

impl LogVec {
    pub fn zero() -> LogVec {
        LogVec::default()
    }

    pub fn from_finite(x: &FiniteVec) -> LogVec {
        let mut v = LogVec::zero();
        for (&j, &c) in x.iter() {
            v.entries.insert(j, LogProduct::from_f64(c).expect("entries nonzero finite"));
        }
        v
    }

    /// Add `c e_j` with sign-aware log addition; exact cancellation removes
    /// the entry.
    pub fn add_term(&mut self, j: u64, c: LogProduct) {
        assert!(j >= 1);
        if c.log_abs == f64::NEG_INFINITY {
            return;
        }
        let s = match self.entries.get(&j) {
            Some(&prev) => prev.signed_add(c),
            None => c,
        };
        if s.log_abs == f64::NEG_INFINITY {
            self.entries.remove(&j);
        } else {
            self.entries.insert(j, s);
        }
    }

    pub fn get(&self, j: u64) -> Option<LogProduct> {
        self.entries.get(&j).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&u64, &LogProduct)> {
        self.entries.iter()
    }

    /// Entries with coordinate `≥ lo`, in coordinate order.
    pub fn iter_from(&self, lo: u64) -> impl Iterator<Item = (&u64, &LogProduct)> {
        self.entries.range(lo..)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn max_support(&self) -> Option<u64> {
        self.entries.keys().next_back().copied()
    }

    /// Exponentiate every coordinate. Coefficients outside f64 range are
    /// errors carrying the offending log magnitude.
    pub fn to_finite(&self) -> Result<FiniteVec, ShiftError> {
        let mut out = FiniteVec::zero();
        for (&j, &c) in self.entries.iter() {
            let v = c.to_f64()?;
            if v == 0.0 {
                return Err(ShiftError::Underflow { log_abs: c.log_abs });
            }
            out.set(j, v);
        }
        Ok(out)
    }

    /// Norm in the given space; coordinates beyond f64 range saturate to
    /// infinity instead of erroring.
    pub fn norm(&self, space: Space) -> f64 {
        match space {
            Space::Lp(p) => {
                let mut s = CompensatedSum::new();
                for &c in self.entries.values() {
                    let t = c.abs_pow(p).exp();
                    if t.is_infinite() {
                        return f64::INFINITY;
                    }
                    s.add(t);
                }
                s.value().powf(1.0 / p)
            }
            Space::C0 => self.entries.values().fold(0.0, |m, c| m.max(c.log_abs.exp())),
        }
    }
}

impl Serialize for FiniteVec {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_seq(self.entries.iter().map(|(&j, &x)| (j, x)))
    }
}

impl<'de> Deserialize<'de> for FiniteVec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<FiniteVec, D::Error> {
        let pairs = Vec::<(u64, f64)>::deserialize(d)?;
        FiniteVec::from_pairs(pairs).map_err(serde::de::Error::custom)
    }
}
