//! Computational toolkit for disjoint orbits of weighted pseudo-shifts.
//!
//! The crate works with four ingredients:
//!
//! * finite truncations of sets of naturals and their prefix densities
//!   ([`densities`]),
//! * constructions of separated set families `(A_j)` with prescribed
//!   density behaviour ([`setconstruct`]),
//! * pseudo-shift operators `T_{f,w}` on `ℓ^p` and `c₀` with all weight
//!   products kept in log domain ([`pseudoshift`]),
//! * finite verification of the disjoint hypercyclicity criterion and of
//!   the `ℓ^p`/`c₀` characterization conditions ([`criteria`]), plus the
//!   weight-pair generators used as counterexamples ([`counterexamples`]).
//!
//! Everything is deterministic: counts are exact integers, density ratios
//! are exact rationals until a report is emitted, and products of weights
//! are never materialized outside log domain.

pub mod counterexamples;
pub mod criteria;
pub mod densities;
pub mod log_domain;
pub mod natset;
pub mod pseudoshift;
pub mod setconstruct;

pub use counterexamples::{
    gen_powers_ld_set, gen_powers_scaffold, gen_thm41, gen_thm42, powers_system,
    resolve_shift_config, resolve_weight, thm41_hitting_set, thm42_hitting_set,
    verify_ratio_band, BandShape, GenError, HitBlock, HittingBlocks, PowersConfig,
    PowersDerived, RatioBandReport, Thm41Config, Thm42Config, Thm42Predicates,
};
pub use criteria::{
    apply_s, apply_s_log, build_index_blocks, build_single_block_vector, build_vector,
    check_c0, check_lp, check_shift_upper, criterion_norms, hitting_times, orbit_error,
    orbit_error_log, BuiltVector, Cond1Entry, Cond4Entry, Cond4Witness, CondEntry,
    CondWitness, ConditionReport, GrowthEntry, HypNormEntry, LevelNorms, TargetGrid,
    TupleSystem,
};
pub use densities::{
    banach_density_oracle, banach_density_oracle_over, density_report, density_report_with,
    prefix_counts, DensityError, DensityReport, WindowStat,
};
pub use log_domain::{log_sum_exp, LogProduct, Sign};
pub use natset::{NatSet, NatSetError};
pub use pseudoshift::{
    FiniteVec, GeneratorSpec, IndexMap, LogVec, PseudoShift, PseudoShiftConfig, ShiftError,
    Space, WeightConfig, WeightSeq,
};
pub use setconstruct::{
    construct_banach, construct_density, construct_infinite, refine_ratio_separation,
    verify_ratio_pairs, verify_separation, BanachConstruction, BlockRecord, FamilyTag,
    PairWitness, SeparatedFamily, SeparationReport, SeparationSpec, SetConstructError,
    Violation,
};
