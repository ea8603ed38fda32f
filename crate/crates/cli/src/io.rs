//! File formats, digests, and the run manifest shared by all subcommands.
//!
//! Every report file has the shape `{"manifest": {...}, "report": {...}}`.
//! The manifest echoes the command, the sha256 digests of all input files,
//! and the parameters; the wall-clock duration lives in its own manifest
//! field so the report body stays byte-identical across reruns.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use shiftlab_core::{
    resolve_shift_config, LogProduct, LogVec, NatSet, PseudoShiftConfig, SeparatedFamily, Sign,
    TargetGrid, TupleSystem,
};

#[derive(Clone, Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub version: &'static str,
    pub inputs: BTreeMap<String, String>,
    pub params: Value,
    pub duration_ms: u128,
}

/// Collects manifest data over the lifetime of one command invocation.
pub struct Run {
    command: String,
    inputs: BTreeMap<String, String>,
    params: Value,
    started: Instant,
}

impl Run {
    pub fn new(command: &str, params: Value) -> Run {
        Run {
            command: command.to_string(),
            inputs: BTreeMap::new(),
            params,
            started: Instant::now(),
        }
    }

    /// Record an input file's digest under `name`.
    pub fn input(&mut self, name: &str, path: &Path) -> Result<()> {
        let bytes =
            fs::read(path).with_context(|| format!("reading input {}", path.display()))?;
        self.inputs
            .insert(name.to_string(), format!("sha256:{:x}", Sha256::digest(&bytes)));
        Ok(())
    }

    pub fn manifest(&self) -> RunManifest {
        RunManifest {
            command: self.command.clone(),
            version: env!("CARGO_PKG_VERSION"),
            inputs: self.inputs.clone(),
            params: self.params.clone(),
            duration_ms: self.started.elapsed().as_millis(),
        }
    }

    /// Write `{"manifest", "report"}` to `out`, or stdout when absent.
    pub fn finish(self, report: Value, out: Option<&Path>) -> Result<()> {
        let doc = json!({ "manifest": self.manifest(), "report": report });
        let mut text = serde_json::to_string_pretty(&doc)?;
        text.push('\n');
        match out {
            Some(path) => fs::write(path, text)
                .with_context(|| format!("writing report {}", path.display()))?,
            None => print!("{text}"),
        }
        Ok(())
    }
}

fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

/// A set file is either a JSON array of naturals or newline-delimited text
/// (blank lines and `#` comments ignored). Elements are sorted, deduped,
/// and clipped to the horizon.
pub fn load_natset(path: &Path, horizon: u64) -> Result<NatSet> {
    let text = read_to_string(path)?;
    let trimmed = text.trim_start();
    let mut elems: Vec<u64> = if trimmed.starts_with('[') {
        serde_json::from_str(&text)
            .with_context(|| format!("{}: expected a JSON array of naturals", path.display()))?
    } else {
        let mut out = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let n: u64 = line
                .parse()
                .with_context(|| format!("{}:{}: not a natural", path.display(), lineno + 1))?;
            out.push(n);
        }
        out
    };
    elems.sort_unstable();
    elems.dedup();
    elems.retain(|&n| n <= horizon);
    NatSet::new(elems, horizon).with_context(|| format!("{}: invalid set", path.display()))
}

/// Family files are `{"spec": {...}, "sets": [[...], ...], "horizon": H}`;
/// the document may sit under `"family"` and/or `"report"` so `construct`
/// output files load as-is.
pub fn load_family(path: &Path) -> Result<SeparatedFamily> {
    let text = read_to_string(path)?;
    let mut value: Value = serde_json::from_str(&text)
        .with_context(|| format!("{}: not valid JSON", path.display()))?;
    while let Value::Object(ref map) = value {
        if map.contains_key("spec") {
            break;
        }
        match map.get("report").or_else(|| map.get("family")) {
            Some(inner) => value = inner.clone(),
            None => break,
        }
    }
    serde_json::from_value(value)
        .with_context(|| format!("{}: expected a separated-family JSON document", path.display()))
}

/// `--grid` takes a path to `{"targets": [[...]]}` JSON, or the literal
/// `default:<n_ops>x<levels>` for the built-in deterministic grid.
pub fn load_grid(arg: &str) -> Result<TargetGrid> {
    if let Some(dims) = arg.strip_prefix("default:") {
        let (ops, levels) = dims
            .split_once('x')
            .with_context(|| format!("grid spec {arg}: expected default:<n_ops>x<levels>"))?;
        let n_ops: usize = ops.parse().with_context(|| format!("grid spec {arg}"))?;
        let levels: usize = levels.parse().with_context(|| format!("grid spec {arg}"))?;
        if n_ops == 0 || levels == 0 {
            bail!("grid spec {arg}: both dimensions must be positive");
        }
        return Ok(TargetGrid::default_grid(n_ops, levels));
    }
    let path = Path::new(arg);
    let text = read_to_string(path)?;
    serde_json::from_str(&text)
        .with_context(|| format!("{}: expected a target-grid JSON document", path.display()))
}

/// A system file is a JSON array of shift configs, or any object with a
/// `"system"` array (so `gen` output files work directly). Generator weight
/// configs are resolved at the given horizon.
pub fn load_system(path: &Path, horizon: u64) -> Result<TupleSystem> {
    let text = read_to_string(path)?;
    let value: Value = serde_json::from_str(&text)
        .with_context(|| format!("{}: not valid JSON", path.display()))?;
    let configs = match &value {
        Value::Array(_) => value.clone(),
        Value::Object(map) => match map.get("system").or_else(|| {
            map.get("report").and_then(|r| r.get("system"))
        }) {
            Some(sys) => sys.clone(),
            None => bail!("{}: no \"system\" array found", path.display()),
        },
        _ => bail!("{}: expected an array of shift configs", path.display()),
    };
    let configs: Vec<PseudoShiftConfig> = serde_json::from_value(configs)
        .with_context(|| format!("{}: invalid shift config", path.display()))?;
    let ops = configs
        .iter()
        .map(|cfg| resolve_shift_config(cfg, horizon))
        .collect::<Result<Vec<_>, _>>()
        .with_context(|| format!("{}: resolving weights", path.display()))?;
    TupleSystem::new(ops).map_err(Into::into)
}

/// Wire form of one log-domain coordinate.
#[derive(Serialize, serde::Deserialize)]
struct CoordWire {
    j: u64,
    log_abs: f64,
    sign: i8,
}

/// Serialize a built vector's coordinates.
pub fn vector_to_json(x: &LogVec) -> Value {
    let coords: Vec<CoordWire> = x
        .iter()
        .map(|(&j, &c)| CoordWire {
            j,
            log_abs: c.log_abs,
            sign: if c.is_negative() { -1 } else { 1 },
        })
        .collect();
    serde_json::to_value(coords).expect("coordinate serialization")
}

/// A vector file is either `[[j, value], ...]` plain pairs or the
/// `[{"j", "log_abs", "sign"}, ...]` form written by `build-vector`; the
/// array may sit under `"x"` and/or `"report"` so report files load as-is.
pub fn load_vector(path: &Path) -> Result<LogVec> {
    let text = read_to_string(path)?;
    let mut value: Value = serde_json::from_str(&text)
        .with_context(|| format!("{}: not valid JSON", path.display()))?;
    loop {
        match value {
            Value::Object(ref map) => {
                if let Some(inner) = map.get("report").or_else(|| map.get("x")) {
                    value = inner.clone();
                } else {
                    bail!("{}: no \"x\" coordinate array found", path.display());
                }
            }
            Value::Array(_) => break,
            _ => bail!("{}: expected a coordinate array", path.display()),
        }
    }
    let mut x = LogVec::zero();
    if let Ok(coords) = serde_json::from_value::<Vec<CoordWire>>(value.clone()) {
        for c in coords {
            if c.j == 0 || !(c.sign == 1 || c.sign == -1) {
                bail!("{}: bad coordinate (j = {}, sign = {})", path.display(), c.j, c.sign);
            }
            let sign = if c.sign == 1 { Sign::Plus } else { Sign::Minus };
            x.add_term(c.j, LogProduct { log_abs: c.log_abs, sign });
        }
        return Ok(x);
    }
    let pairs: Vec<(u64, f64)> = serde_json::from_value(value)
        .with_context(|| format!("{}: expected [[j, value], ...] pairs", path.display()))?;
    for (j, v) in pairs {
        if j == 0 {
            bail!("{}: coordinate index 0", path.display());
        }
        if let Some(c) = LogProduct::from_f64(v) {
            x.add_term(j, c);
        }
    }
    Ok(x)
}

/// ε-schedule spec: `geometric:<ratio>[:<scale>]`, `const:<x>`,
/// `list:a,b,c`, or a bare number (constant). Produces `levels` entries;
/// geometric means `scale · ratio^l` for `l = 1..=levels`.
pub fn parse_eps(spec: &str, levels: usize) -> Result<Vec<f64>> {
    let parse_one = |s: &str| -> Result<f64> {
        let x: f64 = s.trim().parse().with_context(|| format!("bad ε value {s:?}"))?;
        if !(x > 0.0 && x.is_finite()) {
            bail!("ε value {x} must be positive and finite");
        }
        Ok(x)
    };
    if let Some(rest) = spec.strip_prefix("geometric:") {
        let mut parts = rest.split(':');
        let ratio = parse_one(parts.next().unwrap_or_default())?;
        let scale = match parts.next() {
            Some(s) => parse_one(s)?,
            None => 1.0,
        };
        if parts.next().is_some() {
            bail!("ε spec {spec:?}: expected geometric:<ratio>[:<scale>]");
        }
        return Ok((1..=levels as i32).map(|l| scale * ratio.powi(l)).collect());
    }
    if let Some(rest) = spec.strip_prefix("const:") {
        return Ok(vec![parse_one(rest)?; levels]);
    }
    if let Some(rest) = spec.strip_prefix("list:") {
        let vals: Vec<f64> = rest.split(',').map(parse_one).collect::<Result<_>>()?;
        if vals.len() < levels {
            bail!("ε list has {} entries, need {levels}", vals.len());
        }
        return Ok(vals[..levels].to_vec());
    }
    Ok(vec![parse_one(spec)?; levels])
}

/// Comma-separated naturals, e.g. `--N 1,2,3`.
pub fn parse_u64_list(arg: &str) -> Result<Vec<u64>> {
    arg.split(',')
        .map(|s| s.trim().parse::<u64>().with_context(|| format!("bad natural {s:?}")))
        .collect()
}

/// Comma-separated floats, e.g. `--lambdas 2,3`.
pub fn parse_f64_list(arg: &str) -> Result<Vec<f64>> {
    arg.split(',')
        .map(|s| s.trim().parse::<f64>().with_context(|| format!("bad number {s:?}")))
        .collect()
}
