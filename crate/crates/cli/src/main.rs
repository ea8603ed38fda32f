//! shiftlab: finite-horizon toolkit for disjoint hypercyclicity of weighted
//! pseudo-shifts.
//!
//! Exit codes: 0 = all checks passed, 1 = checks ran and failed, 2 =
//! usage or input error.

mod io;
mod pipeline;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use num_rational::Ratio;
use serde_json::json;

use shiftlab_core::{
    build_vector, check_c0, check_lp, construct_banach, construct_density, construct_infinite,
    density_report, gen_powers_scaffold, gen_thm41, gen_thm42, hitting_times, orbit_error_log,
    powers_system, verify_separation, FamilyTag, IndexMap, NatSet, PowersConfig, PseudoShift,
    SeparationSpec, Space, Thm41Config, Thm42Config,
};

#[derive(Parser)]
#[command(
    name = "shiftlab",
    version,
    about = "Density, separated-set, and pseudo-shift verification runs with JSON reports"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Density statistics of one set of naturals
    Density(DensityArgs),
    /// Build a separated family of positive-density sets
    Construct(ConstructArgs),
    /// Check the characterization conditions of a system against a family
    Check(CheckArgs),
    /// Assemble the candidate vector x = Σ_l Σ_{n∈A_l} S_n y_l
    BuildVector(BuildVectorArgs),
    /// Orbit errors and hitting times of a vector against a target grid
    Orbit(OrbitArgs),
    /// Generate the counterexample weight pairs and the powers scaffold
    Gen(GenArgs),
    /// Run an embedded end-to-end preset, writing a report bundle
    Pipeline(PipelineArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli.cmd) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cmd: &Cmd) -> Result<bool> {
    match cmd {
        Cmd::Density(a) => cmd_density(a),
        Cmd::Construct(a) => cmd_construct(a),
        Cmd::Check(a) => cmd_check(a),
        Cmd::BuildVector(a) => cmd_build_vector(a),
        Cmd::Orbit(a) => cmd_orbit(a),
        Cmd::Gen(a) => cmd_gen(a),
        Cmd::Pipeline(a) => cmd_pipeline(a),
    }
}

// ---------------------------------------------------------------------------
// density

#[derive(Args)]
struct DensityArgs {
    /// Set file: JSON array or newline-delimited naturals
    #[arg(long)]
    set: PathBuf,
    /// Horizon N
    #[arg(long = "N")]
    n: u64,
    /// Start of the prefix ladder [tail, N]
    #[arg(long, default_value_t = 1)]
    tail: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn cmd_density(a: &DensityArgs) -> Result<bool> {
    let mut run = io::Run::new(
        "density",
        json!({ "set": a.set, "N": a.n, "tail": a.tail }),
    );
    run.input("set", &a.set)?;
    if a.n == 0 {
        bail!("--N must be positive");
    }
    let set = io::load_natset(&a.set, a.n)?;
    let report = density_report(&set, a.n, a.tail)?;
    run.finish(json!({ "count": set.len(), "density": report }), a.out.as_deref())?;
    Ok(true)
}

// ---------------------------------------------------------------------------
// construct

#[derive(Args)]
struct ConstructArgs {
    /// Family: infinite | ubanach | ld | ud
    #[arg(long)]
    family: String,
    /// Separation lengths, e.g. 1,2,3
    #[arg(long = "N")]
    n_seq: String,
    /// Multiplier bound Q ≥ 1
    #[arg(long = "Q", default_value_t = 1)]
    q: u64,
    #[arg(long)]
    horizon: u64,
    /// Source sets: "all-naturals", one set file, or one file per set
    #[arg(long = "B", default_value = "all-naturals")]
    b: String,
    /// ubanach only: block density targets, e.g. 1/8,1/12 (default 1/(4j))
    #[arg(long)]
    targets: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_family(s: &str) -> Result<FamilyTag> {
    Ok(match s {
        "infinite" => FamilyTag::Infinite,
        "ubanach" | "upper_banach" => FamilyTag::UpperBanach,
        "ld" | "lower_density" => FamilyTag::LowerDensity,
        "ud" | "upper_density" => FamilyTag::UpperDensity,
        _ => bail!("unknown family {s:?}: expected infinite | ubanach | ld | ud"),
    })
}

fn parse_ratio(s: &str) -> Result<Ratio<u64>> {
    let (num, den) = match s.split_once('/') {
        Some((a, b)) => (a.trim().parse()?, b.trim().parse()?),
        None => (s.trim().parse()?, 1u64),
    };
    if den == 0 {
        bail!("ratio {s:?} has zero denominator");
    }
    Ok(Ratio::new(num, den))
}

fn cmd_construct(a: &ConstructArgs) -> Result<bool> {
    let mut run = io::Run::new(
        "construct",
        json!({
            "family": a.family, "N": a.n_seq, "Q": a.q,
            "horizon": a.horizon, "B": a.b, "targets": a.targets,
        }),
    );
    let tag = parse_family(&a.family)?;
    let n_seq = io::parse_u64_list(&a.n_seq)?;
    let spec = SeparationSpec::new(n_seq, a.q, tag)?;
    let j_count = spec.len();

    let sources: Vec<NatSet> = if a.b == "all-naturals" {
        vec![NatSet::from_intervals(&[(1, a.horizon)], a.horizon); j_count]
    } else {
        let paths: Vec<&str> = a.b.split(',').collect();
        if paths.len() != 1 && paths.len() != j_count {
            bail!("--B names {} files for {} sets", paths.len(), j_count);
        }
        let mut sets = Vec::with_capacity(j_count);
        for (i, p) in paths.iter().enumerate() {
            let path = PathBuf::from(p);
            run.input(&format!("B{}", i + 1), &path)?;
            sets.push(io::load_natset(&path, a.horizon)?);
        }
        while sets.len() < j_count {
            sets.push(sets[0].clone());
        }
        sets
    };

    let (family, blocks) = match tag {
        FamilyTag::Infinite => (construct_infinite(&sources, &spec, a.horizon)?, None),
        FamilyTag::UpperBanach => {
            let targets: Vec<Ratio<u64>> = match &a.targets {
                Some(t) => t.split(',').map(parse_ratio).collect::<Result<_>>()?,
                None => (1..=j_count as u64).map(|j| Ratio::new(1, 4 * j)).collect(),
            };
            let built = construct_banach(&sources, &spec, &targets, a.horizon)?;
            (built.family, Some(built.blocks))
        }
        FamilyTag::LowerDensity | FamilyTag::UpperDensity => {
            (construct_density(&sources, &spec, a.horizon)?, None)
        }
    };
    let verification = verify_separation(&family);
    let ok = verification.ok;
    run.finish(
        json!({ "family": family, "verification": verification, "blocks": blocks }),
        a.out.as_deref(),
    )?;
    Ok(ok)
}

// ---------------------------------------------------------------------------
// check

#[derive(Args)]
struct CheckArgs {
    /// System file: JSON array of shift configs, or a gen report
    #[arg(long)]
    system: PathBuf,
    /// Separated-family JSON (construct output)
    #[arg(long)]
    sets: PathBuf,
    /// Grid file or default:<n_ops>x<levels>
    #[arg(long)]
    grid: String,
    /// ε-schedule: geometric:<ratio>[:<scale>] | const:<x> | list:a,b,c
    #[arg(long)]
    eps: String,
    #[arg(long)]
    horizon: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn cmd_check(a: &CheckArgs) -> Result<bool> {
    let mut run = io::Run::new(
        "check",
        json!({
            "system": a.system, "sets": a.sets, "grid": a.grid,
            "eps": a.eps, "horizon": a.horizon,
        }),
    );
    run.input("system", &a.system)?;
    run.input("sets", &a.sets)?;
    let system = io::load_system(&a.system, a.horizon)?;
    let family = io::load_family(&a.sets)?;
    if !a.grid.starts_with("default:") {
        run.input("grid", std::path::Path::new(&a.grid))?;
    }
    let grid = io::load_grid(&a.grid)?;
    let levels = grid.levels().min(family.sets.len());
    let eps = io::parse_eps(&a.eps, levels)?;
    let report = match system.space() {
        Space::Lp(_) => check_lp(&system, &family, &grid, &eps, a.horizon)?,
        Space::C0 => check_c0(&system, &family, &grid, &eps, a.horizon)?,
    };
    let pass = report.pass;
    run.finish(json!({ "check": report }), a.out.as_deref())?;
    Ok(pass)
}

// ---------------------------------------------------------------------------
// build-vector

#[derive(Args)]
struct BuildVectorArgs {
    #[arg(long)]
    system: PathBuf,
    #[arg(long)]
    sets: PathBuf,
    /// Grid file or default:<n_ops>x<levels>
    #[arg(long)]
    grid: String,
    #[arg(long)]
    horizon: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn cmd_build_vector(a: &BuildVectorArgs) -> Result<bool> {
    let mut run = io::Run::new(
        "build-vector",
        json!({ "system": a.system, "sets": a.sets, "grid": a.grid, "horizon": a.horizon }),
    );
    run.input("system", &a.system)?;
    run.input("sets", &a.sets)?;
    let system = io::load_system(&a.system, a.horizon)?;
    let family = io::load_family(&a.sets)?;
    if !a.grid.starts_with("default:") {
        run.input("grid", std::path::Path::new(&a.grid))?;
    }
    let grid = io::load_grid(&a.grid)?;
    let built = build_vector(&system, &grid, &family, a.horizon)?;
    let support = built.x.iter().count();
    run.finish(
        json!({
            "levels": built.levels,
            "support": support,
            "x": io::vector_to_json(&built.x),
        }),
        a.out.as_deref(),
    )?;
    Ok(true)
}

// ---------------------------------------------------------------------------
// orbit

#[derive(Args)]
struct OrbitArgs {
    #[arg(long)]
    system: PathBuf,
    /// Vector file (build-vector output, or [[j, value], ...] pairs)
    #[arg(long)]
    x: PathBuf,
    /// Target grid file or default:<n_ops>x<levels>
    #[arg(long)]
    targets: String,
    /// ε-schedule for the per-level hitting sets
    #[arg(long)]
    eps: String,
    #[arg(long)]
    horizon: u64,
    /// Also report exact orbit errors at these times, e.g. 10,20,30
    #[arg(long)]
    times: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn cmd_orbit(a: &OrbitArgs) -> Result<bool> {
    let mut run = io::Run::new(
        "orbit",
        json!({
            "system": a.system, "x": a.x, "targets": a.targets,
            "eps": a.eps, "horizon": a.horizon, "times": a.times,
        }),
    );
    run.input("system", &a.system)?;
    run.input("x", &a.x)?;
    let system = io::load_system(&a.system, a.horizon)?;
    let x = io::load_vector(&a.x)?;
    if !a.targets.starts_with("default:") {
        run.input("targets", std::path::Path::new(&a.targets))?;
    }
    let grid = io::load_grid(&a.targets)?;
    let eps = io::parse_eps(&a.eps, grid.levels())?;
    let times = match &a.times {
        Some(t) => io::parse_u64_list(t)?,
        None => Vec::new(),
    };
    let mut levels = Vec::with_capacity(grid.levels());
    for l in 1..=grid.levels() {
        let hits = hitting_times(&system, &x, grid.tuple(l), eps[l - 1], a.horizon)?;
        let tail = hits.min().unwrap_or(1);
        let density = density_report(&hits, a.horizon, tail)?;
        let mut errors = Vec::with_capacity(times.len());
        for &n in &times {
            let errs = orbit_error_log(&system, &x, n, grid.tuple(l))?;
            errors.push(json!({ "n": n, "errors": errs }));
        }
        levels.push(json!({
            "l": l,
            "eps": eps[l - 1],
            "count": hits.len(),
            "hits": hits,
            "density": density,
            "errors": errors,
        }));
    }
    run.finish(json!({ "levels": levels }), a.out.as_deref())?;
    Ok(true)
}

// ---------------------------------------------------------------------------
// gen

#[derive(Args)]
struct GenArgs {
    /// thm41 | thm42 | powers
    #[arg(long)]
    kind: String,
    /// thm41: number of block levels
    #[arg(long = "Lmax")]
    l_max: Option<usize>,
    /// thm42: number of table levels
    #[arg(long)]
    levels: Option<usize>,
    /// Weight-sequence horizon (kind-specific default)
    #[arg(long)]
    horizon: Option<u64>,
    /// ℓ^p exponent of the generated shifts
    #[arg(long, default_value_t = 2.0)]
    p: f64,
    /// powers: multipliers λ_1,...,λ_N
    #[arg(long)]
    lambdas: Option<String>,
    /// powers: shift exponents i_1,...,i_N
    #[arg(long)]
    exponents: Option<String>,
    /// powers: override the interval ratio r
    #[arg(long)]
    r: Option<f64>,
    /// powers: override the interval base M
    #[arg(long = "M")]
    m: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

pub(crate) fn shift_pair_configs(
    v: shiftlab_core::WeightSeq,
    w: shiftlab_core::WeightSeq,
    p: f64,
) -> Result<Vec<shiftlab_core::PseudoShiftConfig>> {
    let f = IndexMap::affine(1)?;
    let bv = PseudoShift::new(f.clone(), v, Space::Lp(p))?;
    let bw = PseudoShift::new(f, w, Space::Lp(p))?;
    Ok(vec![bv.to_config(), bw.to_config()])
}

fn cmd_gen(a: &GenArgs) -> Result<bool> {
    let run = io::Run::new(
        "gen",
        json!({
            "kind": a.kind, "Lmax": a.l_max, "levels": a.levels, "horizon": a.horizon,
            "p": a.p, "lambdas": a.lambdas, "exponents": a.exponents, "r": a.r, "M": a.m,
        }),
    );
    let report = match a.kind.as_str() {
        "thm41" => {
            let l_max = a.l_max.unwrap_or(4);
            let config = Thm41Config::with_default_grid(l_max)?;
            let horizon = a.horizon.unwrap_or(2 * config.n_of(l_max));
            let (v, w) = gen_thm41(&config, horizon)?;
            json!({
                "kind": "thm41",
                "L_max": l_max,
                "horizon": horizon,
                "n_of": config.n_seq(),
                "system": shift_pair_configs(v, w, a.p)?,
            })
        }
        "thm42" => {
            let levels = a.levels.unwrap_or(3);
            let config = Thm42Config::default_table(levels)?;
            let horizon = a
                .horizon
                .unwrap_or_else(|| 2 * config.n_seq().last().copied().unwrap_or(1));
            let (v, w) = gen_thm42(&config, horizon)?;
            json!({
                "kind": "thm42",
                "levels": levels,
                "horizon": horizon,
                "n_of": config.n_seq(),
                "predicates": config.predicates(1.0),
                "system": shift_pair_configs(v, w, a.p)?,
            })
        }
        "powers" => {
            let lambdas = match &a.lambdas {
                Some(s) => io::parse_f64_list(s)?,
                None => vec![2.0, 3.0],
            };
            let exponents = match &a.exponents {
                Some(s) => io::parse_u64_list(s)?,
                None => vec![1, 2],
            };
            let config =
                PowersConfig::with_overrides(lambdas, exponents, Space::Lp(a.p), a.r, a.m)?;
            let horizon = a.horizon.unwrap_or(100_000);
            let (b, derived) = gen_powers_scaffold(&config, horizon)?;
            let system = powers_system(&config)?;
            json!({
                "kind": "powers",
                "horizon": horizon,
                "config": config,
                "derived": derived,
                "B_count": b.len(),
                "B": b,
                "system": system.to_configs(),
            })
        }
        other => bail!("unknown kind {other:?}: expected thm41 | thm42 | powers"),
    };
    run.finish(report, a.out.as_deref())?;
    Ok(true)
}

// ---------------------------------------------------------------------------
// pipeline

#[derive(Args)]
struct PipelineArgs {
    /// powers-2B-3B2 | thm41 | thm42
    #[arg(long)]
    preset: String,
    /// Bundle directory (default shiftlab-<preset>)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the preset's horizon
    #[arg(long)]
    horizon: Option<u64>,
}

fn cmd_pipeline(a: &PipelineArgs) -> Result<bool> {
    let dir = a
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from(format!("shiftlab-{}", a.preset)));
    std::fs::create_dir_all(&dir)
        .with_context(|| format!("creating bundle directory {}", dir.display()))?;
    pipeline::run(&a.preset, &dir, a.horizon)
}

// ---------------------------------------------------------------------------
