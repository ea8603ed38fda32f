//! Explicit weight-sequence generators.
//!
//! Two block constructions produce pairs `(v, w)` of weight sequences whose
//! orbit-product ratio `W²_{1,n}/W¹_{1,n}` revisits a prescribed target row
//! on sparse blocks and diverges from it everywhere else, plus the interval
//! scaffolding for tuples of powers `λ_s B^{i_s}`. Verifiers for the stated
//! structural properties (ratio identity, band containment, growth) live
//! here as well; they reread the generated tables rather than trusting the
//! generators.
//!
//! Both block generators follow the same four-case piecewise rule. Writing
//! `row` for the target coordinates of the block at `n_l` (length `d`):
//!
//! * `n = n_l + 1`: `v_n = 1` and `w_n = row_1 · W¹_{1,n_l−1}/W²_{1,n_l−1}`,
//!   the coupling weight that snaps the ratio onto `row_1`;
//! * `n = n_l + i`, `2 ≤ i ≤ d`, `|row_i| ≥ |row_{i−1}|`:
//!   `v_n = row_{i−1}/row_i`, `w_n = 1`;
//! * same block range with `|row_i| < |row_{i−1}|`: `v_n = 1`,
//!   `w_n = row_i/row_{i−1}`;
//! * off the blocks: `v_n = 2`, `w_n = 3`.
//!
//! The coupling weight underflows `f64` already at moderate levels, so `w`
//! is materialized as a log-domain table while `v` stays plain.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::criteria::{TargetGrid, TupleSystem};
use crate::log_domain::LogProduct;
use crate::natset::NatSet;
use crate::pseudoshift::{
    GeneratorSpec, IndexMap, PseudoShift, PseudoShiftConfig, ShiftError, Space, WeightConfig,
    WeightSeq,
};
use crate::setconstruct::{
    construct_density, FamilyTag, SeparatedFamily, SeparationSpec, SetConstructError,
};

/// Error of the compound generators that both build weights and call into
/// the separated-set layer.
#[derive(Debug, Error)]
pub enum GenError {
    #[error(transparent)]
    Shift(#[from] ShiftError),
    #[error(transparent)]
    Sets(#[from] SetConstructError),
    #[error("level {level} is empty after the min-element trim")]
    EmptyLevel { level: usize },
}

// ---------------------------------------------------------------------------
// thm41 generator

/// Config of the `thm41` generator: blocks at `n_l = 10^l` carrying the
/// grid's target row `y_l` for `l ≤ L_max`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(try_from = "Thm41Wire")]
pub struct Thm41Config {
    #[serde(rename = "L_max")]
    l_max: usize,
    grid: TargetGrid,
}

#[derive(Deserialize)]
struct Thm41Wire {
    #[serde(rename = "L_max")]
    l_max: usize,
    grid: TargetGrid,
}

impl TryFrom<Thm41Wire> for Thm41Config {
    type Error = ShiftError;
    fn try_from(w: Thm41Wire) -> Result<Thm41Config, ShiftError> {
        Thm41Config::new(w.l_max, w.grid)
    }
}

impl Thm41Config {
    pub fn new(l_max: usize, grid: TargetGrid) -> Result<Thm41Config, ShiftError> {
        if l_max == 0 || l_max > 15 {
            return Err(ShiftError::Inconsistent(format!(
                "L_max {l_max} outside the supported range 1..=15"
            )));
        }
        if grid.n_ops() != 1 {
            return Err(ShiftError::Inconsistent(
                "generator grids carry a single target row per level".into(),
            ));
        }
        if grid.levels() < l_max {
            return Err(ShiftError::Inconsistent(format!(
                "grid has {} levels but the blocks need {l_max}",
                grid.levels()
            )));
        }
        Ok(Thm41Config { l_max, grid })
    }

    pub fn with_default_grid(l_max: usize) -> Result<Thm41Config, ShiftError> {
        Thm41Config::new(l_max, TargetGrid::default_grid(1, l_max.max(1)))
    }

    pub fn l_max(&self) -> usize {
        self.l_max
    }

    pub fn grid(&self) -> &TargetGrid {
        &self.grid
    }

    /// Block start `n_l = 10^l`.
    pub fn n_of(&self, l: usize) -> u64 {
        10u64.pow(l as u32)
    }

    /// All block starts up to `L_max`, the band intervals' anchors.
    pub fn n_seq(&self) -> Vec<u64> {
        (1..=self.l_max).map(|l| self.n_of(l)).collect()
    }
}

/// One target block: the weights at `[start+1, start+row.len()]` replay
/// `row` in the product ratio.
struct BlockPlan {
    start: u64,
    row: Vec<f64>,
}

/// Single forward pass over the weight indices `2..=horizon+1` producing
/// both tables and maintaining the running products `W^s_{1,n−1}` the
/// coupling weights need.
fn generate_pair(
    blocks: &[BlockPlan],
    horizon: u64,
) -> Result<(Vec<f64>, Vec<LogProduct>), ShiftError> {
    for pair in blocks.windows(2) {
        if pair[0].start + pair[0].row.len() as u64 > pair[1].start {
            return Err(ShiftError::Inconsistent("target blocks overlap".into()));
        }
    }
    if let Some(last) = blocks.last() {
        if last.start + last.row.len() as u64 > horizon {
            return Err(ShiftError::Inconsistent(
                "the last target block does not fit below the horizon".into(),
            ));
        }
    }
    let three = LogProduct::from_f64(3.0).expect("nonzero");
    let mut v_tab = Vec::with_capacity(horizon as usize);
    let mut w_tab = Vec::with_capacity(horizon as usize);
    let mut p1 = LogProduct::one();
    let mut p2 = LogProduct::one();
    let mut bi = 0usize;
    for n in 2..=horizon + 1 {
        while bi < blocks.len() && n > blocks[bi].start + blocks[bi].row.len() as u64 {
            bi += 1;
        }
        let in_block = bi < blocks.len() && n > blocks[bi].start;
        let (v, w) = if in_block {
            let b = &blocks[bi];
            let i = (n - b.start) as usize;
            if i == 1 {
                let head = LogProduct::from_f64(b.row[0])
                    .ok_or_else(|| ShiftError::Inconsistent("zero block coordinate".into()))?;
                (1.0, head.mul(p1).div(p2))
            } else {
                let cur = b.row[i - 1];
                let prev = b.row[i - 2];
                if cur.abs() >= prev.abs() {
                    (prev / cur, LogProduct::one())
                } else {
                    let w = LogProduct::from_f64(cur / prev)
                        .ok_or_else(|| ShiftError::Inconsistent("zero block coordinate".into()))?;
                    (1.0, w)
                }
            }
        } else {
            (2.0, three)
        };
        p1 = p1.mul(LogProduct::from_f64(v).expect("block ratios are nonzero"));
        p2 = p2.mul(w);
        v_tab.push(v);
        w_tab.push(w);
    }
    Ok((v_tab, w_tab))
}

/// Builds the pair `(v, w)` with blocks at `n_l = 10^l` carrying the grid
/// rows `y_l`, tabulated for the weight indices `2..=horizon+1`.
///
/// Needs `horizon ≥ n_of(L_max) + L_max` so the last block fits.
pub fn gen_thm41(config: &Thm41Config, horizon: u64) -> Result<(WeightSeq, WeightSeq), ShiftError> {
    let need = config.n_of(config.l_max) + config.l_max as u64;
    if horizon < need {
        return Err(ShiftError::Inconsistent(format!(
            "horizon {horizon} cannot hold the last block: need at least {need}"
        )));
    }
    let blocks: Vec<BlockPlan> = (1..=config.l_max)
        .map(|l| {
            let y = &config.grid.tuple(l)[0];
            BlockPlan {
                start: config.n_of(l),
                row: (1..=l as u64).map(|i| y.get(i)).collect(),
            }
        })
        .collect();
    let (v_tab, w_tab) = generate_pair(&blocks, horizon)?;
    let tag = |row: &str| GeneratorSpec {
        generator: "thm41".into(),
        params: serde_json::json!({ "config": config, "row": row }),
    };
    let v = WeightSeq::table(v_tab)?.with_generator(tag("v"));
    let w = WeightSeq::log_table(w_tab)?.with_generator(tag("w"));
    Ok((v, w))
}

// ---------------------------------------------------------------------------
// thm42 generator

/// Config of the `thm42` generator: user-tabulated block starts `n_l`,
/// tabulated maps `φ₁, φ₂` choosing which grid row `y_J` tiles each block
/// and with what gap `M`, and per-row scale exponents `α_J`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(try_from = "Thm42Wire")]
pub struct Thm42Config {
    n_seq: Vec<u64>,
    phi1: Vec<usize>,
    phi2: Vec<u64>,
    alpha: Vec<f64>,
    grid: TargetGrid,
}

#[derive(Deserialize)]
struct Thm42Wire {
    n_seq: Vec<u64>,
    phi1: Vec<usize>,
    phi2: Vec<u64>,
    alpha: Vec<f64>,
    grid: TargetGrid,
}

impl TryFrom<Thm42Wire> for Thm42Config {
    type Error = ShiftError;
    fn try_from(w: Thm42Wire) -> Result<Thm42Config, ShiftError> {
        Thm42Config::new(w.n_seq, w.phi1, w.phi2, w.alpha, w.grid)
    }
}

/// The three growth predicates of the block-start table, evaluated over the
/// finite table rather than asserted as limits. `ratios` lists
/// `n_l/n_{l+1}`; `coupling_log_terms` lists `log(l² (2/3)^{n_l − 2n_{l−1}})`
/// for `l ≥ 2`; `sum_log_terms` lists `log(n_l / Γ_l^p)` with
/// `Γ_l = (3/4)^{Σ_{j≤l} n_j} 2^{n_l − Σ_{j<l} n_j}`.
#[derive(Clone, Debug, Serialize)]
pub struct Thm42Predicates {
    pub ratios: Vec<f64>,
    pub ratio_decreasing: bool,
    pub coupling_log_terms: Vec<f64>,
    pub coupling_bounded: bool,
    pub sum_log_terms: Vec<f64>,
    pub sum_halving: bool,
}

impl Thm42Config {
    pub fn new(
        n_seq: Vec<u64>,
        phi1: Vec<usize>,
        phi2: Vec<u64>,
        alpha: Vec<f64>,
        grid: TargetGrid,
    ) -> Result<Thm42Config, ShiftError> {
        let len = n_seq.len();
        if len == 0 || phi1.len() != len || phi2.len() != len {
            return Err(ShiftError::Inconsistent(
                "n_seq, phi1 and phi2 must share a positive length".into(),
            ));
        }
        if n_seq[0] < 2 || n_seq.windows(2).any(|p| p[1] <= p[0]) {
            return Err(ShiftError::Inconsistent(
                "n_seq must increase strictly from at least 2".into(),
            ));
        }
        if n_seq.iter().any(|&n| n > 1 << 50) {
            return Err(ShiftError::Inconsistent("n_seq entries must stay below 2^50".into()));
        }
        for (idx, &j) in phi1.iter().enumerate() {
            if j == 0 || j > idx + 1 {
                return Err(ShiftError::Inconsistent(format!(
                    "phi1({}) = {j} violates 1 <= phi1(l) <= l",
                    idx + 1
                )));
            }
        }
        if phi2.iter().any(|&m| m == 0) {
            return Err(ShiftError::Inconsistent("phi2 values must be positive".into()));
        }
        let max_j = *phi1.iter().max().expect("nonempty");
        if alpha.len() < max_j {
            return Err(ShiftError::Inconsistent(format!(
                "alpha covers {} rows but phi1 reaches {max_j}",
                alpha.len()
            )));
        }
        for (idx, &a) in alpha.iter().enumerate() {
            if !(a.is_finite() && a > 0.0 && a <= 1.0) {
                return Err(ShiftError::Inconsistent(format!(
                    "alpha_{} = {a} must lie in (0, 1]",
                    idx + 1
                )));
            }
            let j = idx + 1;
            if j >= 2 && (j as f64).powf(2.0 * a) > 4.0 / 3.0 + 1e-12 {
                return Err(ShiftError::Inconsistent(format!(
                    "alpha_{j} = {a} violates J^(2 alpha_J) <= 4/3"
                )));
            }
        }
        if grid.n_ops() != 1 {
            return Err(ShiftError::Inconsistent(
                "generator grids carry a single target row per level".into(),
            ));
        }
        if grid.levels() < max_j {
            return Err(ShiftError::Inconsistent(format!(
                "grid has {} levels but phi1 reaches {max_j}",
                grid.levels()
            )));
        }
        let cfg = Thm42Config { n_seq, phi1, phi2, alpha, grid };
        for l in 1..=len {
            let j = cfg.phi1[l - 1] as u64;
            if cfg.deg(l) < j {
                return Err(ShiftError::Inconsistent(format!(
                    "level {l}: alpha * n_l = {} cannot hold one y-block of length {j}",
                    cfg.deg(l)
                )));
            }
            if l < len && 2 * cfg.n_seq[l - 1] + l as u64 >= cfg.n_seq[l] {
                return Err(ShiftError::Inconsistent(format!(
                    "level {l}: the band interval [n_l, 2 n_l + l] reaches past n_{}",
                    l + 1
                )));
            }
        }
        Ok(cfg)
    }

    /// Default table: `n_l = 4^(l²)`, `(φ₁, φ₂)` enumerating the pairs
    /// `(J, M)` along diagonals `J + M = const`, and
    /// `α_J = min(1, ln(4/3)/(2 ln J))` so that `J^(2 α_J) ≤ 4/3` holds
    /// with equality for `J ≥ 2`.
    pub fn default_table(levels: usize) -> Result<Thm42Config, ShiftError> {
        if levels == 0 || levels > 5 {
            return Err(ShiftError::Inconsistent(
                "the default table supports 1..=5 levels".into(),
            ));
        }
        let n_seq: Vec<u64> = (1..=levels).map(|l| 1u64 << (2 * l * l)).collect();
        let mut phi1 = Vec::with_capacity(levels);
        let mut phi2 = Vec::with_capacity(levels);
        'diag: for d in 2.. {
            for j in 1..d {
                phi1.push(j);
                phi2.push((d - j) as u64);
                if phi1.len() == levels {
                    break 'diag;
                }
            }
        }
        let max_j = *phi1.iter().max().expect("nonempty");
        let alpha: Vec<f64> = (1..=max_j)
            .map(|j| {
                if j == 1 {
                    1.0
                } else {
                    ((4.0f64 / 3.0).ln() / (2.0 * (j as f64).ln())).min(1.0)
                }
            })
            .collect();
        let grid = TargetGrid::default_grid(1, max_j);
        Thm42Config::new(n_seq, phi1, phi2, alpha, grid)
    }

    pub fn levels(&self) -> usize {
        self.n_seq.len()
    }

    pub fn grid(&self) -> &TargetGrid {
        &self.grid
    }

    pub fn n_seq(&self) -> &[u64] {
        &self.n_seq
    }

    pub fn n_of(&self, l: usize) -> u64 {
        self.n_seq[l - 1]
    }

    pub fn phi1(&self, l: usize) -> usize {
        self.phi1[l - 1]
    }

    pub fn phi2(&self, l: usize) -> u64 {
        self.phi2[l - 1]
    }

    pub fn alpha_of(&self, j: usize) -> f64 {
        self.alpha[j - 1]
    }

    /// Block degree `⌊α_{φ₁(l)} n_l⌋`.
    pub fn deg(&self, l: usize) -> u64 {
        let j = self.phi1[l - 1];
        (self.alpha[j - 1] * self.n_seq[l - 1] as f64).floor() as u64
    }

    /// The block row `z_l`: copies of the grid row `y_J` of length
    /// `J = φ₁(l)` tiled with gaps of `M = φ₂(l)` ones, truncated to
    /// complete copies, the remainder up to `deg(l)` filled with ones.
    pub fn z_vector(&self, l: usize) -> Vec<f64> {
        let j = self.phi1[l - 1];
        let m = self.phi2[l - 1] as usize;
        let deg = self.deg(l) as usize;
        let y = &self.grid.tuple(j)[0];
        let mut z = vec![1.0; deg];
        let step = j + m;
        let r_max = (deg - j) / step;
        for r in 0..=r_max {
            for i in 1..=j {
                z[r * step + i - 1] = y.get(i as u64);
            }
        }
        z
    }

    /// Evaluates the three growth predicates of the table at exponent `p`.
    /// Finite-table proxies stand in for the limit statements: the ratios
    /// must decrease strictly and end at or below 1/2, the coupling terms
    /// must decrease strictly and end at or below 1, and the sum terms must
    /// at least halve from level to level.
    pub fn predicates(&self, p: f64) -> Thm42Predicates {
        let n = &self.n_seq;
        let ratios: Vec<f64> = n.windows(2).map(|w| w[0] as f64 / w[1] as f64).collect();
        let ratio_decreasing = ratios.windows(2).all(|w| w[1] < w[0])
            && ratios.last().is_none_or(|&r| r <= 0.5);
        let ln23 = (2.0f64 / 3.0).ln();
        let coupling_log_terms: Vec<f64> = (2..=n.len())
            .map(|l| {
                let e = n[l - 1] as f64 - 2.0 * n[l - 2] as f64;
                2.0 * (l as f64).ln() + e * ln23
            })
            .collect();
        let coupling_bounded = coupling_log_terms.windows(2).all(|w| w[1] < w[0])
            && coupling_log_terms.last().is_none_or(|&t| t <= 0.0);
        let ln34 = (3.0f64 / 4.0).ln();
        let ln2 = 2.0f64.ln();
        let mut below = 0.0;
        let sum_log_terms: Vec<f64> = n
            .iter()
            .map(|&nl| {
                let upto = below + nl as f64;
                let log_gamma = upto * ln34 + (nl as f64 - below) * ln2;
                below = upto;
                (nl as f64).ln() - p * log_gamma
            })
            .collect();
        let sum_halving = sum_log_terms.windows(2).all(|w| w[1] <= w[0] - ln2);
        Thm42Predicates {
            ratios,
            ratio_decreasing,
            coupling_log_terms,
            coupling_bounded,
            sum_log_terms,
            sum_halving,
        }
    }
}

/// Builds the pair `(v, w)` whose blocks at `n_l` replay the tiled rows
/// `z_l`, tabulated for the weight indices `2..=horizon+1`.
///
/// Needs `horizon ≥ 2 n_{last}`; the three table predicates are evaluated
/// at `p = 1` and a failing one aborts with its name.
pub fn gen_thm42(config: &Thm42Config, horizon: u64) -> Result<(WeightSeq, WeightSeq), ShiftError> {
    let last = *config.n_seq.last().expect("nonempty");
    if horizon < 2 * last {
        return Err(ShiftError::Inconsistent(format!(
            "horizon {horizon} cannot hold the last block: need at least {}",
            2 * last
        )));
    }
    let preds = config.predicates(1.0);
    if !preds.ratio_decreasing {
        return Err(ShiftError::Inconsistent(
            "predicate failed: the ratios n_l/n_{l+1} must decrease strictly to at most 1/2"
                .into(),
        ));
    }
    if !preds.coupling_bounded {
        return Err(ShiftError::Inconsistent(
            "predicate failed: the coupling terms l^2 (2/3)^(n_l - 2 n_{l-1}) must decrease to at most 1"
                .into(),
        ));
    }
    if !preds.sum_halving {
        return Err(ShiftError::Inconsistent(
            "predicate failed: the sum terms n_l / Gamma_l^p must at least halve between levels"
                .into(),
        ));
    }
    let blocks: Vec<BlockPlan> = (1..=config.levels())
        .map(|l| BlockPlan { start: config.n_of(l), row: config.z_vector(l) })
        .collect();
    let (v_tab, w_tab) = generate_pair(&blocks, horizon)?;
    let tag = |row: &str| GeneratorSpec {
        generator: "thm42".into(),
        params: serde_json::json!({ "config": config, "row": row }),
    };
    let v = WeightSeq::table(v_tab)?.with_generator(tag("v"));
    let w = WeightSeq::log_table(w_tab)?.with_generator(tag("w"));
    Ok((v, w))
}

// ---------------------------------------------------------------------------
// ratio band verification

/// Which band intervals the generator promises around the block starts.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BandShape {
    /// `[n_l, n_l + 2l]`, matching blocks of length `l`.
    Thm41,
    /// `[n_l, 2 n_l + l]`, matching blocks of degree up to `n_l`.
    Thm42,
}

#[derive(Clone, Debug, Serialize)]
pub struct RatioBandReport {
    pub band_halfwidth: f64,
    pub horizon: u64,
    pub intervals: Vec<(u64, u64)>,
    pub inside_count: u64,
    pub contained: bool,
    pub violation_count: u64,
    /// First violating times, capped at 32 witnesses.
    pub violations: Vec<u64>,
}

/// Computes `{n ≤ horizon : |W²_{1,n}/W¹_{1,n} − 1| < band_halfwidth}` from
/// the running log-domain ratio and checks containment in the band
/// intervals around the block starts `n_of`.
pub fn verify_ratio_band(
    v: &WeightSeq,
    w: &WeightSeq,
    n_of: &[u64],
    band_halfwidth: f64,
    horizon: u64,
    shape: BandShape,
) -> Result<(NatSet, RatioBandReport), ShiftError> {
    if !(band_halfwidth > 0.0 && band_halfwidth.is_finite()) {
        return Err(ShiftError::Inconsistent(format!(
            "band halfwidth {band_halfwidth} must be positive and finite"
        )));
    }
    if n_of.windows(2).any(|p| p[1] <= p[0]) {
        return Err(ShiftError::Inconsistent("n_of must increase strictly".into()));
    }
    let intervals: Vec<(u64, u64)> = n_of
        .iter()
        .enumerate()
        .map(|(idx, &nl)| {
            let l = idx as u64 + 1;
            match shape {
                BandShape::Thm41 => (nl, nl + 2 * l),
                BandShape::Thm42 => (nl, 2 * nl + l),
            }
        })
        .collect();
    let log_h = band_halfwidth.ln();
    let minus_one = LogProduct::from_f64(-1.0).expect("nonzero");
    let mut ratio = LogProduct::one();
    let mut inside = Vec::new();
    for n in 1..=horizon {
        ratio = ratio.mul(w.log_at(n + 1)?).div(v.log_at(n + 1)?);
        if ratio.signed_add(minus_one).log_abs < log_h {
            inside.push(n);
        }
    }
    let inside_count = inside.len() as u64;
    let mut violations = Vec::new();
    let mut violation_count = 0u64;
    // Starts and ends both increase for either shape, so among the
    // intervals starting at or before n the last one reaches furthest.
    for &n in &inside {
        let pos = intervals.partition_point(|&(s, _)| s <= n);
        if pos == 0 || intervals[pos - 1].1 < n {
            violation_count += 1;
            if violations.len() < 32 {
                violations.push(n);
            }
        }
    }
    let report = RatioBandReport {
        band_halfwidth,
        horizon,
        intervals,
        inside_count,
        contained: violation_count == 0,
        violation_count,
        violations,
    };
    let set = NatSet::new(inside, horizon).expect("strictly increasing by construction");
    Ok((set, report))
}

// ---------------------------------------------------------------------------
// powers scaffolding

/// Config of the `powers` tuple `(λ_1 B^{i_1}, ..., λ_N B^{i_N})` together
/// with the interval parameters `r` and `M` of its return-time scaffolding.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(try_from = "PowersWire")]
pub struct PowersConfig {
    lambdas: Vec<f64>,
    exponents: Vec<u64>,
    space: Space,
    r: f64,
    m: u64,
}

#[derive(Deserialize)]
struct PowersWire {
    lambdas: Vec<f64>,
    exponents: Vec<u64>,
    space: Space,
    r: Option<f64>,
    m: Option<u64>,
}

impl TryFrom<PowersWire> for PowersConfig {
    type Error = ShiftError;
    fn try_from(w: PowersWire) -> Result<PowersConfig, ShiftError> {
        PowersConfig::with_overrides(w.lambdas, w.exponents, w.space, w.r, w.m)
    }
}

/// The derived constants of a powers config.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct PowersDerived {
    /// `δ = i_1/i_N`.
    pub delta: f64,
    /// `γ = max_{s<N} log|λ_s| / log|λ_{s+1}|`.
    pub gamma: f64,
    /// `Γ = log|λ_N| / log|λ_1|`.
    pub gamma_cap: f64,
    pub r: f64,
    pub m: u64,
}

impl PowersConfig {
    /// Defaults `r` and `M` from the derived constants:
    /// `r = min{1/γ, min_s i_{s+1}/i_s} · (1 − 10⁻⁶)` and
    /// `M = ⌈max{2/δ, Γ}⌉ + 1`.
    pub fn new(
        lambdas: Vec<f64>,
        exponents: Vec<u64>,
        space: Space,
    ) -> Result<PowersConfig, ShiftError> {
        PowersConfig::with_overrides(lambdas, exponents, space, None, None)
    }

    pub fn with_overrides(
        lambdas: Vec<f64>,
        exponents: Vec<u64>,
        space: Space,
        r: Option<f64>,
        m: Option<u64>,
    ) -> Result<PowersConfig, ShiftError> {
        let n = lambdas.len();
        if n < 2 || exponents.len() != n {
            return Err(ShiftError::Inconsistent(
                "need at least two operators with one exponent each".into(),
            ));
        }
        if lambdas.iter().any(|l| !l.is_finite() || *l == 0.0) {
            return Err(ShiftError::Inconsistent("lambdas must be nonzero and finite".into()));
        }
        if lambdas[0].abs() <= 1.0 {
            return Err(ShiftError::Inconsistent(format!(
                "|lambda_1| = {} must exceed 1",
                lambdas[0].abs()
            )));
        }
        if lambdas.windows(2).any(|p| p[1].abs() <= p[0].abs()) {
            return Err(ShiftError::Inconsistent(
                "|lambda_s| must increase strictly".into(),
            ));
        }
        if exponents[0] == 0 || exponents.windows(2).any(|p| p[1] <= p[0]) {
            return Err(ShiftError::Inconsistent(
                "exponents must increase strictly from at least 1".into(),
            ));
        }
        let space = space.validate()?;
        let (delta, gamma, gamma_cap) = constants(&lambdas, &exponents);
        let exp_ratio = exponents
            .windows(2)
            .map(|p| p[1] as f64 / p[0] as f64)
            .fold(f64::INFINITY, f64::min);
        let r_bound = (1.0 / gamma).min(exp_ratio);
        let r = r.unwrap_or(r_bound * (1.0 - 1e-6));
        if !(r > 1.0) {
            return Err(ShiftError::Inconsistent(format!("r = {r} must exceed 1")));
        }
        if r >= r_bound {
            return Err(ShiftError::Inconsistent(format!(
                "r = {r} must stay below min(1/gamma, exponent ratios) = {r_bound}"
            )));
        }
        let m_floor = (2.0 / delta).max(gamma_cap);
        let m = m.unwrap_or(m_floor.ceil() as u64 + 1);
        if !((m as f64) > m_floor) {
            return Err(ShiftError::Inconsistent(format!(
                "M = {m} must exceed max(2/delta, Gamma) = {m_floor}"
            )));
        }
        Ok(PowersConfig { lambdas, exponents, space, r, m })
    }

    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    pub fn exponents(&self) -> &[u64] {
        &self.exponents
    }

    pub fn space(&self) -> Space {
        self.space
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn m(&self) -> u64 {
        self.m
    }

    pub fn derived(&self) -> PowersDerived {
        let (delta, gamma, gamma_cap) = constants(&self.lambdas, &self.exponents);
        PowersDerived { delta, gamma, gamma_cap, r: self.r, m: self.m }
    }
}

fn constants(lambdas: &[f64], exponents: &[u64]) -> (f64, f64, f64) {
    let n = lambdas.len();
    let delta = exponents[0] as f64 / exponents[n - 1] as f64;
    let gamma = lambdas
        .windows(2)
        .map(|p| p[0].abs().ln() / p[1].abs().ln())
        .fold(f64::NEG_INFINITY, f64::max);
    let gamma_cap = lambdas[n - 1].abs().ln() / lambdas[0].abs().ln();
    (delta, gamma, gamma_cap)
}

/// Materializes `B = ℕ ∩ ∪_{j≥1} (M^j r^j, M^j r^{j+1} − j)` up to the
/// horizon. The intervals are open; an empty result is an error naming the
/// first interval.
pub fn gen_powers_scaffold(
    config: &PowersConfig,
    horizon: u64,
) -> Result<(NatSet, PowersDerived), ShiftError> {
    let d = config.derived();
    let (m, r) = (config.m as f64, config.r);
    let mut intervals = Vec::new();
    let mut mj = m;
    let mut rj = r;
    for j in 1u64..=64 {
        let lo = mj * rj;
        let hi = mj * rj * r - j as f64;
        if !(lo.is_finite() && hi.is_finite()) || lo >= horizon as f64 {
            break;
        }
        let start = lo.floor() as u64 + 1;
        if hi.ceil() >= 2.0 {
            let end = ((hi.ceil() - 1.0) as u64).min(horizon);
            if start <= end {
                intervals.push((start, end));
            }
        }
        mj *= m;
        rj *= r;
    }
    let b = NatSet::from_intervals(&intervals, horizon);
    if b.len() == 0 {
        return Err(ShiftError::Inconsistent(format!(
            "horizon {horizon} lies below the first interval ({:.3}, {:.3})",
            m * r,
            m * r * r - 1.0
        )));
    }
    Ok((b, d))
}

/// The tuple `(λ_1 B^{i_1}, ..., λ_N B^{i_N})` itself.
pub fn powers_system(config: &PowersConfig) -> Result<TupleSystem, ShiftError> {
    let ops = config
        .lambdas
        .iter()
        .zip(&config.exponents)
        .map(|(&lam, &i)| {
            PseudoShift::new(IndexMap::affine(i)?, WeightSeq::constant(lam)?, config.space)
        })
        .collect::<Result<Vec<_>, _>>()?;
    TupleSystem::new(ops)
}

/// Carves a positive-lower-density family `(A_1, ..., A_levels)` out of the
/// scaffold `B` with pairwise gaps `|n − m| ≥ k + l + 2` and the
/// min-element floors `min(A_k) ≥ M^k r^k + M k`.
pub fn gen_powers_ld_set(
    config: &PowersConfig,
    levels: usize,
    horizon: u64,
) -> Result<SeparatedFamily, GenError> {
    if levels == 0 {
        return Err(GenError::Shift(ShiftError::Inconsistent("levels must be positive".into())));
    }
    let (b, _) = gen_powers_scaffold(config, horizon)?;
    let sources = vec![b; levels];
    let n_seq: Vec<u64> = (2..=levels as u64 + 1).collect();
    let spec = SeparationSpec::new(n_seq, 1, FamilyTag::LowerDensity)?;
    let fam = construct_density(&sources, &spec, horizon)?;
    let (m, r) = (config.m as f64, config.r);
    let mut sets = Vec::with_capacity(levels);
    for (idx, set) in fam.sets.iter().enumerate() {
        let k = idx as i32 + 1;
        let floor = (m.powi(k) * r.powi(k) + m * k as f64).ceil() as u64;
        let trimmed = set.tail_from(floor);
        if trimmed.len() == 0 {
            return Err(GenError::EmptyLevel { level: idx + 1 });
        }
        sets.push(trimmed);
    }
    Ok(SeparatedFamily { spec: fam.spec, sets, horizon, source: fam.source })
}

// ---------------------------------------------------------------------------
// hitting sets

/// One arithmetic run `start, start+step, ...` of the hitting set.
#[derive(Clone, Debug, Serialize)]
pub struct HitBlock {
    /// Ordinal of the run.
    pub k: u64,
    /// The block level `L_k` the run sits on.
    pub level: u64,
    pub start: u64,
    pub step: u64,
    /// Number of elements emitted within the horizon.
    pub count: u64,
}

/// A hitting set assembled from arithmetic runs on selected block levels.
#[derive(Clone, Debug)]
pub struct HittingBlocks {
    pub set: NatSet,
    /// The tail cutoff `M` the residual conditions selected.
    pub m: u64,
    /// The grid row `J` matched against the target ratios, where the
    /// construction selects one.
    pub j: Option<u64>,
    pub blocks: Vec<HitBlock>,
}

struct HitScales {
    l: usize,
    t_ratio: Vec<f64>,
    bound: f64,
    /// `W¹_{1,i−1}/W²_{1,i−1}` for `i = 1..=l`, as plain scalars.
    w_ratio: Vec<f64>,
    m: u64,
}

/// Shared preamble of the hitting-set constructions: target ratios and
/// their tolerance, the head ratios `W¹/W²`, and the smallest tail cutoff
/// `M` with
/// `‖w‖_∞^{lp} (γ/2)^{-p} min_i |W²/W¹|^{-p} Σ_{m≥M} |W¹_{1,m}|^{-p} < ε`
/// and `2^{lp} 2^p Γ^p max_i |W²/W¹|^p Σ_{m≥M} |W²_{1,m}|^{-p} < ε`,
/// both sums truncated at the horizon.
fn hit_scales(
    v: &WeightSeq,
    w: &WeightSeq,
    a: &[Vec<f64>],
    eps: f64,
    p: f64,
    horizon: u64,
) -> Result<HitScales, ShiftError> {
    if a.len() != 2 {
        return Err(ShiftError::Inconsistent("hitting targets come as a pair of rows".into()));
    }
    let l = a[0].len();
    if l == 0 || a[1].len() != l {
        return Err(ShiftError::Inconsistent(
            "target rows must share a positive length".into(),
        ));
    }
    if a.iter().flatten().any(|x| !x.is_finite() || *x == 0.0) {
        return Err(ShiftError::Inconsistent("target entries must be nonzero and finite".into()));
    }
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(ShiftError::Inconsistent(format!("eps = {eps} must be positive and finite")));
    }
    if !(p >= 1.0 && p.is_finite()) {
        return Err(ShiftError::Inconsistent(format!("p = {p} must be finite and at least 1")));
    }
    let t_ratio: Vec<f64> = (0..l).map(|i| a[1][i] / a[0][i]).collect();
    let gamma = t_ratio.iter().fold(f64::INFINITY, |acc, t| acc.min(t.abs()));
    let gamma_cap = t_ratio.iter().fold(0.0f64, |acc, t| acc.max(t.abs())) + 1.0;
    let bound = (eps / 2.0).min(gamma / 2.0).min(eps * gamma * gamma / 4.0).min(gamma_cap);
    let mut w_ratio_log = Vec::with_capacity(l);
    let mut h1 = LogProduct::one();
    let mut h2 = LogProduct::one();
    w_ratio_log.push(LogProduct::one());
    for i in 2..=l as u64 {
        h1 = h1.mul(v.log_at(i)?);
        h2 = h2.mul(w.log_at(i)?);
        w_ratio_log.push(h1.div(h2));
    }
    let w_ratio: Vec<f64> =
        w_ratio_log.iter().map(|r| r.to_f64()).collect::<Result<_, _>>()?;
    // log of min/max over i of |W²_{1,i−1}/W¹_{1,i−1}|.
    let min2 = w_ratio_log.iter().map(|r| -r.log_abs).fold(f64::INFINITY, f64::min);
    let max2 = w_ratio_log.iter().map(|r| -r.log_abs).fold(f64::NEG_INFINITY, f64::max);
    let lp = l as f64 * p;
    let ln_c1 = lp * w.log_bound() - p * (gamma / 2.0).ln() - p * min2;
    let ln_c2 = lp * 2.0f64.ln() + p * 2.0f64.ln() + p * gamma_cap.ln() + p * max2;
    let s1 = suffix_tails(v, p, horizon)?;
    let s2 = suffix_tails(w, p, horizon)?;
    let ln_eps = eps.ln();
    let m = (1..=horizon)
        .find(|&m| {
            let i = m as usize;
            ln_c1 + s1[i].ln() < ln_eps && ln_c2 + s2[i].ln() < ln_eps
        })
        .ok_or_else(|| {
            ShiftError::Inconsistent(
                "no tail cutoff M within the horizon satisfies the residual conditions".into(),
            )
        })?;
    Ok(HitScales { l, t_ratio, bound, w_ratio, m })
}

/// `tails[m] = Σ_{u=m}^{horizon} |W_{1,u}|^{-p}`.
fn suffix_tails(seq: &WeightSeq, p: f64, horizon: u64) -> Result<Vec<f64>, ShiftError> {
    let mut logs = vec![0.0f64; horizon as usize + 1];
    let mut acc = LogProduct::one();
    for u in 1..=horizon {
        acc = acc.mul(seq.log_at(u + 1)?);
        logs[u as usize] = acc.log_abs;
    }
    let mut tails = vec![0.0f64; horizon as usize + 2];
    for u in (1..=horizon as usize).rev() {
        tails[u] = tails[u + 1] + (-p * logs[u]).exp();
    }
    Ok(tails)
}

/// Hitting set for a `thm41` pair against the target rows `a = (a_1, a_2)`
/// of length `l`: greedily picks the smallest levels `L_1 < L_2 < ...` with
/// `L_k ≥ l + M k` whose grid row matches the target ratios on the sampled
/// window, and returns `{n_{L_k} + r M : 0 ≤ r ≤ k}` clipped to the
/// horizon.
pub fn thm41_hitting_set(
    config: &Thm41Config,
    v: &WeightSeq,
    w: &WeightSeq,
    a: &[Vec<f64>],
    eps: f64,
    p: f64,
    horizon: u64,
) -> Result<HittingBlocks, ShiftError> {
    let sc = hit_scales(v, w, a, eps, p, horizon)?;
    let m = sc.m;
    let mut blocks = Vec::new();
    let mut elems = Vec::new();
    let mut prev = 0usize;
    for k in 1u64.. {
        let lmin = ((sc.l as u64 + m * k) as usize).max(prev + 1);
        let mut chosen = None;
        'search: for cand in lmin..=config.l_max() {
            if config.n_of(cand) > horizon {
                break;
            }
            let y = &config.grid().tuple(cand)[0];
            for r in 0..=k {
                for i in 1..=sc.l {
                    let idx = r * m + i as u64;
                    let val = y.get(idx) * sc.w_ratio[i - 1];
                    if !((sc.t_ratio[i - 1] - val).abs() < sc.bound) {
                        continue 'search;
                    }
                }
            }
            chosen = Some(cand);
            break;
        }
        let Some(lv) = chosen else { break };
        let start = config.n_of(lv);
        let mut count = 0u64;
        for r in 0..=k {
            let n = start + r * m;
            if n <= horizon {
                elems.push(n);
                count += 1;
            }
        }
        blocks.push(HitBlock { k, level: lv as u64, start, step: m, count });
        prev = lv;
    }
    elems.sort_unstable();
    elems.dedup();
    let set = NatSet::new(elems, horizon).expect("clipped to the horizon");
    Ok(HittingBlocks { set, m, j: None, blocks })
}

/// Hitting set for a `thm42` pair: picks the smallest grid row `J ≥ l`
/// matching the target ratios, takes every table level with
/// `φ₁ = J, φ₂ = M` in order, and on each returns the full tiling run
/// `{n_L + r (J+M) : 0 ≤ r ≤ (deg − J)/(J+M)}` clipped to the horizon.
pub fn thm42_hitting_set(
    config: &Thm42Config,
    v: &WeightSeq,
    w: &WeightSeq,
    a: &[Vec<f64>],
    eps: f64,
    p: f64,
    horizon: u64,
) -> Result<HittingBlocks, ShiftError> {
    let sc = hit_scales(v, w, a, eps, p, horizon)?;
    let mut j_sel = None;
    'rows: for cand in sc.l..=config.grid().levels() {
        let y = &config.grid().tuple(cand)[0];
        for i in 1..=sc.l {
            let val = y.get(i as u64) * sc.w_ratio[i - 1];
            if !((sc.t_ratio[i - 1] - val).abs() < sc.bound) {
                continue 'rows;
            }
        }
        j_sel = Some(cand);
        break;
    }
    let Some(j) = j_sel else {
        return Err(ShiftError::Inconsistent(
            "no grid row approximates the target ratios within the tolerance".into(),
        ));
    };
    let m = sc.m;
    let step = j as u64 + m;
    let mut blocks = Vec::new();
    let mut elems = Vec::new();
    let mut k = 0u64;
    for lv in 1..=config.levels() {
        if config.phi1(lv) != j || config.phi2(lv) != m {
            continue;
        }
        let start = config.n_of(lv);
        if start > horizon {
            break;
        }
        k += 1;
        let r_max = (config.deg(lv) - j as u64) / step;
        let mut count = 0u64;
        for r in 0..=r_max {
            let n = start + r * step;
            if n <= horizon {
                elems.push(n);
                count += 1;
            }
        }
        blocks.push(HitBlock { k, level: lv as u64, start, step, count });
    }
    if blocks.is_empty() {
        return Err(ShiftError::Inconsistent(format!(
            "the table has no level with phi1 = {j} and phi2 = {m} within the horizon"
        )));
    }
    let set = NatSet::new(elems, horizon).expect("block starts increase");
    Ok(HittingBlocks { set, m, j: Some(j as u64), blocks })
}

// ---------------------------------------------------------------------------
// generator resolution

/// Resolves a generated weight config into a concrete table. `thm41` and
/// `thm42` params carry `{"config": ..., "row": "v" | "w"}`; `powers`
/// params carry `{"lambda": ...}`.
pub fn resolve_weight(spec: &GeneratorSpec, horizon: u64) -> Result<WeightSeq, GenError> {
    let pick = |v: WeightSeq, w: WeightSeq| -> Result<WeightSeq, GenError> {
        match spec.params.get("row").and_then(serde_json::Value::as_str) {
            Some("v") => Ok(v),
            Some("w") => Ok(w),
            _ => Err(GenError::Shift(ShiftError::Inconsistent(
                "generator params need a row marker \"v\" or \"w\"".into(),
            ))),
        }
    };
    let config_value = || spec.params.get("config").cloned().unwrap_or(serde_json::Value::Null);
    match spec.generator.as_str() {
        "thm41" => {
            let cfg: Thm41Config = serde_json::from_value(config_value()).map_err(|e| {
                GenError::Shift(ShiftError::Inconsistent(format!("bad thm41 config: {e}")))
            })?;
            let (v, w) = gen_thm41(&cfg, horizon)?;
            pick(v, w)
        }
        "thm42" => {
            let cfg: Thm42Config = serde_json::from_value(config_value()).map_err(|e| {
                GenError::Shift(ShiftError::Inconsistent(format!("bad thm42 config: {e}")))
            })?;
            let (v, w) = gen_thm42(&cfg, horizon)?;
            pick(v, w)
        }
        "powers" => {
            let lam = spec
                .params
                .get("lambda")
                .and_then(serde_json::Value::as_f64)
                .ok_or_else(|| {
                    GenError::Shift(ShiftError::Inconsistent(
                        "powers generator params need a numeric \"lambda\"".into(),
                    ))
                })?;
            Ok(WeightSeq::constant(lam)?)
        }
        other => Err(GenError::Shift(ShiftError::Inconsistent(format!(
            "unknown generator '{other}'"
        )))),
    }
}

/// Resolves a pseudo-shift config, expanding a generated weight config at
/// the given horizon; plain configs pass through unchanged.
pub fn resolve_shift_config(
    cfg: &PseudoShiftConfig,
    horizon: u64,
) -> Result<PseudoShift, GenError> {
    match &cfg.w {
        WeightConfig::Generator(spec) => {
            let w = resolve_weight(spec, horizon)?;
            let f: IndexMap = cfg.f.clone().try_into().map_err(GenError::Shift)?;
            Ok(PseudoShift::new(f, w, cfg.space)?)
        }
        _ => Ok(PseudoShift::from_config(cfg)?),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pseudoshift::FiniteVec;
    use crate::setconstruct::verify_separation;

    fn row(values: &[f64]) -> FiniteVec {
        FiniteVec::from_pairs(
            values.iter().enumerate().map(|(i, &x)| (i as u64 + 1, x)),
        )
        .unwrap()
    }

    /// Recompute `W^s_{1,n}` tables directly from the weight sequences.
    fn products(seq: &WeightSeq, horizon: u64) -> Vec<LogProduct> {
        let mut out = vec![LogProduct::one()];
        let mut acc = LogProduct::one();
        for n in 1..=horizon {
            acc = acc.mul(seq.log_at(n + 1).unwrap());
            out.push(acc);
        }
        out
    }

    #[test]
    fn thm41_rejects_bad_configs() {
        assert!(Thm41Config::with_default_grid(0).is_err());
        assert!(Thm41Config::new(2, TargetGrid::default_grid(2, 3)).is_err());
        assert!(Thm41Config::new(4, TargetGrid::default_grid(1, 3)).is_err());
        let cfg = Thm41Config::with_default_grid(2).unwrap();
        // Needs 10^2 + 2 indices.
        assert!(gen_thm41(&cfg, 101).is_err());
        assert!(gen_thm41(&cfg, 102).is_ok());
    }

    #[test]
    fn thm41_pair_structure() {
        let cfg = Thm41Config::with_default_grid(3).unwrap();
        let horizon = 1010;
        let (v, w) = gen_thm41(&cfg, horizon).unwrap();
        assert_eq!(v.horizon(), Some(horizon + 1));
        assert_eq!(w.horizon(), Some(horizon + 1));
        // |v_n| <= 2 exactly, and off-block values are exactly 2 and 3.
        for n in 2..=horizon + 1 {
            assert!(v.value_at(n).unwrap().abs() <= 2.0);
        }
        assert_eq!(v.value_at(2).unwrap(), 2.0);
        assert_eq!(w.log_at(2).unwrap(), LogProduct::from_f64(3.0).unwrap());
        assert_eq!(v.value_at(11).unwrap(), 1.0);
        // Ratio identity W²_{1,n_l+i-1}/W¹_{1,n_l+i-1} = y_{l,i}.
        let p1 = products(&v, horizon);
        let p2 = products(&w, horizon);
        for l in 1..=3usize {
            let y = &cfg.grid().tuple(l)[0];
            for i in 1..=l as u64 {
                let at = (cfg.n_of(l) + i - 1) as usize;
                let ratio = p2[at].div(p1[at]);
                let target = LogProduct::from_f64(y.get(i)).unwrap();
                let rel = ratio.div(target);
                assert!(rel.log_abs.abs() < 1e-9, "l={l} i={i}: off by {}", rel.log_abs);
                assert!(!rel.is_negative());
            }
        }
        // Coupling weights are summably small from l = 2 on.
        for l in 2..=3usize {
            let coupling = w.log_at(cfg.n_of(l) + 1).unwrap();
            assert!(coupling.log_abs < (1e-10f64).ln(), "l={l}: {}", coupling.log_abs);
        }
        // w never exceeds 3 in magnitude on this table.
        assert!(w.log_bound() <= 3.0f64.ln() + 1e-12);
    }

    #[test]
    fn thm41_growth_bound() {
        let cfg = Thm41Config::with_default_grid(3).unwrap();
        let horizon = 1010;
        let (v, _w) = gen_thm41(&cfg, horizon).unwrap();
        let p1 = products(&v, horizon);
        let ln2 = 2.0f64.ln();
        for l in 1..=3usize {
            let lsq = (l * l) as f64;
            let floor_log = lsq * (1.0 / lsq).ln();
            let hi = if l < 3 { cfg.n_of(l + 1) - 1 } else { horizon };
            for n in cfg.n_of(l)..=hi {
                let lhs = p1[n as usize].log_abs;
                let rhs = floor_log + (n as f64 - lsq) * ln2;
                assert!(
                    lhs >= rhs - 1e-6 * (1.0 + rhs.abs()),
                    "l={l} n={n}: {lhs} < {rhs}"
                );
            }
        }
    }

    #[test]
    fn thm41_band_containment() {
        let cfg = Thm41Config::with_default_grid(3).unwrap();
        let horizon = 1010;
        let (v, w) = gen_thm41(&cfg, horizon).unwrap();
        let (inside, report) =
            verify_ratio_band(&v, &w, &cfg.n_seq(), 0.5, horizon, BandShape::Thm41).unwrap();
        assert!(report.contained, "violations at {:?}", report.violations);
        assert_eq!(report.violation_count, 0);
        // The blocks themselves land inside the band.
        for l in 1..=3usize {
            assert!(inside.contains(cfg.n_of(l)), "n_{l} outside the band");
        }
        assert!(inside.len() as u64 <= (2 + 4 + 6) + 3);
    }

    #[test]
    fn band_edge_cases() {
        let two = WeightSeq::table(vec![2.0; 100]).unwrap();
        let three = WeightSeq::table(vec![3.0; 100]).unwrap();
        // v = w: the ratio sits at 1 everywhere, containment fails.
        let (inside, report) =
            verify_ratio_band(&two, &two, &[10], 0.5, 100, BandShape::Thm41).unwrap();
        assert_eq!(inside.len(), 100);
        assert!(!report.contained);
        assert_eq!(report.violations.len(), 32);
        assert_eq!(report.violation_count, 100 - 3);
        // Off-block pair only: the ratio (3/2)^n stays at or above 3/2.
        let (inside, report) =
            verify_ratio_band(&two, &three, &[10], 0.5, 100, BandShape::Thm41).unwrap();
        assert_eq!(inside.len(), 0);
        assert!(report.contained);
        assert!(verify_ratio_band(&two, &three, &[10], 0.0, 100, BandShape::Thm41).is_err());
        assert!(verify_ratio_band(&two, &three, &[10, 10], 0.5, 100, BandShape::Thm41).is_err());
    }

    #[test]
    fn thm42_default_table_shape() {
        let cfg = Thm42Config::default_table(3).unwrap();
        assert_eq!(cfg.n_seq(), &[4, 256, 262144]);
        assert_eq!((cfg.phi1(1), cfg.phi2(1)), (1, 1));
        assert_eq!((cfg.phi1(2), cfg.phi2(2)), (1, 2));
        assert_eq!((cfg.phi1(3), cfg.phi2(3)), (2, 1));
        assert_eq!(cfg.alpha_of(1), 1.0);
        let a2 = (4.0f64 / 3.0).ln() / (2.0 * 2.0f64.ln());
        assert!((cfg.alpha_of(2) - a2).abs() < 1e-15);
        assert_eq!(cfg.deg(1), 4);
        assert_eq!(cfg.deg(2), 256);
        assert_eq!(cfg.deg(3), (a2 * 262144.0).floor() as u64);
        // Level 3 tiles y_2 with gap 1.
        let z = cfg.z_vector(3);
        let y = &cfg.grid().tuple(2)[0];
        assert_eq!(z.len(), cfg.deg(3) as usize);
        let step = 3usize;
        let r_max = (z.len() - 2) / step;
        for r in 0..=r_max {
            assert_eq!(z[r * step], y.get(1));
            assert_eq!(z[r * step + 1], y.get(2));
        }
        assert_eq!(z[2], 1.0);
        let j = cfg.phi1(3) as f64;
        for x in &z {
            assert!(x.abs() >= 1.0 / j - 1e-15 && x.abs() <= j + 1e-15);
        }
        let preds = cfg.predicates(1.0);
        assert!(preds.ratio_decreasing && preds.coupling_bounded && preds.sum_halving);
    }

    #[test]
    fn thm42_identity_and_band() {
        let cfg = Thm42Config::default_table(3).unwrap();
        let horizon = 2 * 262144;
        let (v, w) = gen_thm42(&cfg, horizon).unwrap();
        for n in 2..=horizon + 1 {
            assert!(v.value_at(n).unwrap().abs() <= 2.0);
        }
        let p1 = products(&v, horizon);
        let p2 = products(&w, horizon);
        for l in 1..=3usize {
            let z = cfg.z_vector(l);
            let probe: Vec<u64> = if l < 3 {
                (1..=cfg.deg(l)).collect()
            } else {
                vec![1, 2, 3, 4, 53, 54, 5000, cfg.deg(3)]
            };
            for i in probe {
                let at = (cfg.n_of(l) + i - 1) as usize;
                let ratio = p2[at].div(p1[at]);
                let target = LogProduct::from_f64(z[i as usize - 1]).unwrap();
                let rel = ratio.div(target);
                assert!(rel.log_abs.abs() < 1e-9, "l={l} i={i}: off by {}", rel.log_abs);
                assert!(!rel.is_negative());
            }
        }
        let (_inside, report) =
            verify_ratio_band(&v, &w, cfg.n_seq(), 0.5, horizon, BandShape::Thm42).unwrap();
        assert!(report.contained, "violations at {:?}", report.violations);
        assert_eq!(report.intervals[2], (262144, 2 * 262144 + 3));
    }

    #[test]
    fn thm42_rejects_bad_tables() {
        // phi1 above the diagonal.
        assert!(Thm42Config::new(
            vec![4],
            vec![2],
            vec![1],
            vec![1.0, 0.2],
            TargetGrid::default_grid(1, 2),
        )
        .is_err());
        // Band interval reaching past the next block start.
        assert!(Thm42Config::new(
            vec![4, 9],
            vec![1, 1],
            vec![1, 2],
            vec![1.0],
            TargetGrid::default_grid(1, 1),
        )
        .is_err());
        // Structurally fine but the coupling predicate fails.
        let coupling = Thm42Config::new(
            vec![4, 10],
            vec![1, 1],
            vec![1, 2],
            vec![1.0],
            TargetGrid::default_grid(1, 1),
        )
        .unwrap();
        let err = gen_thm42(&coupling, 20).unwrap_err().to_string();
        assert!(err.contains("coupling"), "{err}");
        // Structurally fine but the sum predicate fails.
        let sum = Thm42Config::new(
            vec![4, 12],
            vec![1, 1],
            vec![1, 2],
            vec![1.0],
            TargetGrid::default_grid(1, 1),
        )
        .unwrap();
        let err = gen_thm42(&sum, 24).unwrap_err().to_string();
        assert!(err.contains("n_l / Gamma_l"), "{err}");
        // Ratio predicate fails on a stalling table.
        let flat = Thm42Config::new(
            vec![4, 64, 1024],
            vec![1, 1, 2],
            vec![1, 2, 1],
            vec![1.0, 0.2075],
            TargetGrid::default_grid(1, 2),
        )
        .unwrap();
        let err = gen_thm42(&flat, 2048).unwrap_err().to_string();
        assert!(err.contains("n_l/n_{l+1}"), "{err}");
    }

    #[test]
    fn powers_default_constants() {
        let cfg = PowersConfig::new(vec![2.0, 3.0], vec![1, 2], Space::Lp(2.0)).unwrap();
        let d = cfg.derived();
        assert_eq!(d.delta, 0.5);
        assert!((d.gamma - 2.0f64.ln() / 3.0f64.ln()).abs() < 1e-15);
        assert!((d.gamma_cap - 3.0f64.ln() / 2.0f64.ln()).abs() < 1e-15);
        let r_bound = (3.0f64.ln() / 2.0f64.ln()).min(2.0);
        assert!((d.r - r_bound * (1.0 - 1e-6)).abs() < 1e-12);
        assert_eq!(d.m, 5);
    }

    #[test]
    fn powers_rejects_bad_configs() {
        let lp = Space::Lp(2.0);
        assert!(PowersConfig::new(vec![2.0], vec![1], lp).is_err());
        assert!(PowersConfig::new(vec![3.0, 2.0], vec![1, 2], lp).is_err());
        assert!(PowersConfig::new(vec![1.0, 2.0], vec![1, 2], lp).is_err());
        assert!(PowersConfig::new(vec![2.0, 3.0], vec![2, 2], lp).is_err());
        assert!(PowersConfig::with_overrides(vec![2.0, 3.0], vec![1, 2], lp, Some(1.0), None)
            .is_err());
        assert!(PowersConfig::with_overrides(vec![2.0, 3.0], vec![1, 2], lp, Some(0.9), None)
            .is_err());
        assert!(PowersConfig::with_overrides(vec![2.0, 3.0], vec![1, 2], lp, Some(1.6), None)
            .is_err());
        assert!(PowersConfig::with_overrides(vec![2.0, 3.0], vec![1, 2], lp, None, Some(4))
            .is_err());
    }

    #[test]
    fn powers_scaffold_intervals() {
        let cfg =
            PowersConfig::with_overrides(vec![2.0, 3.0], vec![1, 2], Space::Lp(2.0), Some(1.5), None)
                .unwrap();
        // j = 1: (7.5, 10.25); j = 2: (56.25, 82.375); j = 3: (421.875, 629.8125).
        let (b, d) = gen_powers_scaffold(&cfg, 700).unwrap();
        assert_eq!(d.m, 5);
        for n in [8, 9, 10, 57, 82, 422, 629] {
            assert!(b.contains(n), "missing {n}");
        }
        for n in [7, 11, 56, 83, 421, 630, 700] {
            assert!(!b.contains(n), "spurious {n}");
        }
        assert_eq!(b.len(), 3 + 26 + 208);
        // A horizon below the first interval yields nothing to work with.
        let err = gen_powers_scaffold(&cfg, 7).unwrap_err().to_string();
        assert!(err.contains("below the first interval"), "{err}");
    }

    #[test]
    fn powers_ld_family() {
        let cfg = PowersConfig::new(vec![2.0, 3.0], vec![1, 2], Space::Lp(2.0)).unwrap();
        let horizon = 30_000;
        let fam = gen_powers_ld_set(&cfg, 3, horizon).unwrap();
        assert_eq!(fam.sets.len(), 3);
        let (b, _) = gen_powers_scaffold(&cfg, horizon).unwrap();
        let d = cfg.derived();
        for (idx, set) in fam.sets.iter().enumerate() {
            let k = idx as i32 + 1;
            assert!(set.len() > 0);
            let floor = (d.m as f64).powi(k) * d.r.powi(k) + d.m as f64 * k as f64;
            for n in set.iter() {
                assert!(b.contains(n), "A_{k} escapes the scaffold at {n}");
                assert!(n as f64 >= floor);
            }
        }
        let report = verify_separation(&fam);
        assert!(report.ok);
        // The tuple itself assembles.
        let system = powers_system(&cfg).unwrap();
        assert_eq!(system.len(), 2);
    }

    #[test]
    fn thm42_hitting_runs() {
        let cfg = Thm42Config::default_table(3).unwrap();
        let horizon = 2 * 262144;
        let (v, w) = gen_thm42(&cfg, horizon).unwrap();
        let a = vec![vec![1.0], vec![1.0]];
        let hits = thm42_hitting_set(&cfg, &v, &w, &a, 30.0, 2.0, horizon).unwrap();
        assert_eq!(hits.m, 1);
        assert_eq!(hits.j, Some(1));
        assert_eq!(hits.blocks.len(), 1);
        let b = &hits.blocks[0];
        assert_eq!((b.level, b.start, b.step, b.count), (1, 4, 2, 2));
        assert_eq!(hits.set.elements(), &[4, 6]);
        // Count matches floor((deg - J)/(J+M)) + 1 on the fully covered block.
        assert_eq!(b.count, (cfg.deg(1) - 1) / 2 + 1);
    }

    #[test]
    fn thm41_hitting_runs() {
        // Rows that repeat 0.75 make the window predicate attainable at
        // every sampled offset.
        let mut targets = vec![vec![row(&[1.0])]];
        for l in 2..=6 {
            targets.push(vec![row(&vec![0.75; l])]);
        }
        let cfg = Thm41Config::new(6, TargetGrid::new(targets).unwrap()).unwrap();
        let horizon = cfg.n_of(6) + 6;
        let (v, w) = gen_thm41(&cfg, horizon).unwrap();
        let a = vec![vec![1.0], vec![0.75]];
        let hits = thm41_hitting_set(&cfg, &v, &w, &a, 15.0, 2.0, horizon).unwrap();
        assert_eq!(hits.m, 2);
        assert_eq!(hits.j, None);
        let shape: Vec<(u64, u64, u64, u64)> =
            hits.blocks.iter().map(|b| (b.k, b.level, b.start, b.count)).collect();
        assert_eq!(shape, vec![(1, 3, 1000, 2), (2, 5, 100_000, 3)]);
        assert_eq!(hits.set.elements(), &[1000, 1002, 100_000, 100_002, 100_004]);
    }

    #[test]
    fn generator_configs_resolve() {
        let cfg = Thm41Config::with_default_grid(2).unwrap();
        let (v, _w) = gen_thm41(&cfg, 110).unwrap();
        let shift = PseudoShift::new(
            IndexMap::affine(1).unwrap(),
            v,
            Space::Lp(2.0),
        )
        .unwrap();
        let wire = shift.to_config();
        assert!(matches!(wire.w, WeightConfig::Generator(_)));
        // Plain resolution refuses generated weights; the generator layer
        // rebuilds the same table.
        assert!(PseudoShift::from_config(&wire).is_err());
        let resolved = resolve_shift_config(&wire, 110).unwrap();
        assert_eq!(resolved.w.value_at(11).unwrap(), 1.0);
        assert_eq!(resolved.w.value_at(2).unwrap(), 2.0);
        assert_eq!(resolved.w.horizon(), Some(111));

        let unknown = GeneratorSpec {
            generator: "nope".into(),
            params: serde_json::Value::Null,
        };
        assert!(resolve_weight(&unknown, 100).is_err());
    }
}
