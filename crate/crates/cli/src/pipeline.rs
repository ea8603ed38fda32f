//! Embedded end-to-end presets.
//!
//! Each preset writes one JSON report per stage into the bundle directory
//! plus a `summary.json` with a pass/fail line per stage and per named
//! piece of evidence. A stage that errors halts the run; files already
//! written stay in place.

use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use num_rational::Ratio;
use serde_json::{json, Map, Value};

use shiftlab_core::{
    build_vector, check_lp, density_report, gen_powers_ld_set, gen_powers_scaffold, gen_thm41,
    gen_thm42, hitting_times, orbit_error_log, powers_system, thm41_hitting_set,
    thm42_hitting_set, verify_ratio_band, verify_separation, BandShape, ConditionReport,
    FiniteVec, LogProduct, PowersConfig, Space, TargetGrid, Thm41Config, Thm42Config, WeightSeq,
};

use crate::io::Run;
use crate::shift_pair_configs;

pub fn run(preset: &str, dir: &Path, horizon: Option<u64>) -> Result<bool> {
    let (default_horizon, body): (u64, fn(&mut Bundle, u64) -> Result<()>) = match preset {
        "powers-2B-3B2" => (100_000, powers),
        "thm41" => (1_000_006, thm41),
        "thm42" => (524_288, thm42),
        other => bail!("unknown preset {other:?}: expected powers-2B-3B2 | thm41 | thm42"),
    };
    let horizon = horizon.unwrap_or(default_horizon);
    let mut bundle = Bundle { dir, preset, horizon, stages: Vec::new(), evidence: Map::new() };
    match body(&mut bundle, horizon) {
        Ok(()) => bundle.finish(None),
        Err(e) => {
            let _ = bundle.finish(Some(format!("{e:#}")));
            Err(e)
        }
    }
}

struct Bundle<'a> {
    dir: &'a Path,
    preset: &'a str,
    horizon: u64,
    stages: Vec<Value>,
    evidence: Map<String, Value>,
}

impl Bundle<'_> {
    fn stage(&mut self, name: &str, params: Value, report: Value, pass: bool) -> Result<()> {
        let file = format!("{:02}-{}.json", self.stages.len() + 1, name);
        let run = Run::new(&format!("pipeline:{}:{}", self.preset, name), params);
        run.finish(report, Some(&self.dir.join(&file)))?;
        self.stages.push(json!({ "stage": name, "file": file, "pass": pass }));
        Ok(())
    }

    fn note(&mut self, key: &str, pass: bool) {
        self.evidence.insert(key.to_string(), Value::Bool(pass));
    }

    fn finish(self, halted: Option<String>) -> Result<bool> {
        let pass = halted.is_none()
            && self.stages.iter().all(|s| s["pass"] == Value::Bool(true))
            && self.evidence.values().all(|v| *v == Value::Bool(true));
        let summary = json!({
            "preset": self.preset,
            "horizon": self.horizon,
            "stages": self.stages,
            "evidence": self.evidence,
            "halted": halted,
            "pass": pass,
        });
        let mut text = serde_json::to_string_pretty(&summary)?;
        text.push('\n');
        let path = self.dir.join("summary.json");
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        println!("{}: {}", self.preset, if pass { "PASS" } else { "FAIL" });
        Ok(pass)
    }
}

/// `prods[n] = W_{1,n} = w_2 ⋯ w_{n+1}`, with `prods[0] = 1`.
fn products(seq: &WeightSeq, horizon: u64) -> Result<Vec<LogProduct>> {
    let mut out = Vec::with_capacity(horizon as usize + 1);
    let mut acc = LogProduct::one();
    out.push(acc);
    for n in 1..=horizon {
        acc = acc.mul(seq.log_at(n + 1)?);
        out.push(acc);
    }
    Ok(out)
}

fn positive(r: Ratio<u64>) -> bool {
    *r.numer() > 0
}

// ---------------------------------------------------------------------------
// powers-2B-3B2: the (2B, 3B²) pair on ℓ², lower-density family from the
// interval scaffold, conditions checked with a calibrated geometric
// ε-schedule, vector build, orbit bounds, and per-level densities.

/// Calibrate `ε_l = 2^{-l}·C` from a probe report's attained worst values:
/// the smallest power-of-two-safe `C` with a factor-2 margin everywhere.
/// The probe must run at ε = 1 so margins stay resolvable; the summed
/// conditions report `norm^p`, so their ε scale is the p-th root.
fn calibrate(probe: &ConditionReport, levels: usize, p: f64) -> (f64, Vec<f64>) {
    let mut need = vec![0.0f64; levels];
    let mut bump = |l: usize, v: f64| {
        if (1..=levels).contains(&l) && v.is_finite() {
            need[l - 1] = need[l - 1].max(v);
        }
    };
    for e in probe.cond2_max.iter().chain(&probe.cond3_max) {
        bump(e.l, e.value.powf(1.0 / p));
    }
    for e in &probe.cond4_eps {
        bump(e.l, e.a_worst);
        bump(e.l, e.b_worst);
    }
    let mut c = 0.0f64;
    for (i, v) in need.iter().enumerate() {
        c = c.max(v * (1u64 << (i + 1)) as f64);
    }
    let tail = probe.cond1_tail.iter().map(|e| e.tail_sum).fold(0.0, f64::max);
    c = c.max(tail * (1u64 << levels) as f64);
    let c = 2.0 * c.max(f64::MIN_POSITIVE);
    let eps = (1..=levels as i32).map(|l| c * 0.5f64.powi(l)).collect();
    (c, eps)
}

fn powers(b: &mut Bundle, horizon: u64) -> Result<()> {
    let levels = 3usize;
    let config = PowersConfig::new(vec![2.0, 3.0], vec![1, 2], Space::Lp(2.0))?;
    let (scaffold, derived) = gen_powers_scaffold(&config, horizon)?;
    let system = powers_system(&config)?;
    b.stage(
        "gen",
        json!({ "lambdas": [2.0, 3.0], "exponents": [1, 2], "horizon": horizon }),
        json!({
            "config": &config, "derived": derived,
            "B_count": scaffold.len(), "B": &scaffold,
            "system": system.to_configs(),
        }),
        !scaffold.is_empty(),
    )?;

    let family = gen_powers_ld_set(&config, levels, horizon)?;
    let verification = verify_separation(&family);
    b.stage(
        "construct",
        json!({ "levels": levels }),
        json!({ "family": &family, "verification": &verification }),
        verification.ok,
    )?;

    let grid = TargetGrid::default_grid(system.len(), levels);
    let probe = check_lp(&system, &family, &grid, &vec![1.0; levels], horizon)?;
    let (c, eps) = calibrate(&probe, levels, 2.0);
    let report = check_lp(&system, &family, &grid, &eps, horizon)?;
    let conditions_pass = report.pass;
    b.stage(
        "check",
        json!({ "eps": &eps, "C": c, "grid": "default" }),
        json!({ "check": &report }),
        conditions_pass,
    )?;
    b.note("criterion_conditions", conditions_pass);

    let built = build_vector(&system, &grid, &family, horizon)?;
    let support = built.x.iter().count();
    let build_pass = built
        .levels
        .iter()
        .all(|n| n.terms > 0 && n.block_norm.is_finite() && n.suffix_sup.is_finite());
    b.stage(
        "build-vector",
        json!({ "horizon": horizon }),
        json!({
            "levels": &built.levels, "support": support,
            "x": crate::io::vector_to_json(&built.x),
        }),
        build_pass,
    )?;

    let mut level_reports = Vec::with_capacity(levels);
    let mut orbit_pass = true;
    for l in 1..=levels {
        let e_l = eps[l - 1];
        let bound = (l as f64 - 1.0) * e_l
            + (l..=levels).map(|k| k as f64 * eps[k - 1]).sum::<f64>()
            + e_l;
        let a_l = &family.sets[l - 1];
        let hits_bound =
            hitting_times(&system, &built.x, grid.tuple(l), bound * (1.0 + 1e-9), horizon)?;
        let subset_bound = a_l.iter().all(|n| hits_bound.contains(n));
        let hits_2eps = hitting_times(&system, &built.x, grid.tuple(l), 2.0 * e_l, horizon)?;
        let subset_2eps = a_l.iter().all(|n| hits_2eps.contains(n));
        let tail = hits_2eps.min().unwrap_or(1);
        let density = density_report(&hits_2eps, horizon, tail)?;
        let lower_positive = positive(density.prefix_lower);
        let mut spot_errors = Vec::new();
        if let (Some(lo), Some(hi)) = (a_l.min(), a_l.max()) {
            let mid = a_l.elements()[a_l.len() / 2];
            for n in [lo, mid, hi] {
                let errs = orbit_error_log(&system, &built.x, n, grid.tuple(l))?;
                spot_errors.push(json!({ "n": n, "errors": errs }));
            }
        }
        orbit_pass &= subset_bound && subset_2eps && lower_positive;
        level_reports.push(json!({
            "l": l,
            "eps": e_l,
            "orbit_bound": bound,
            "A_count": a_l.len(),
            "hits_at_bound": hits_bound.len(),
            "A_within_bound": subset_bound,
            "hits_at_2eps": hits_2eps.len(),
            "A_within_2eps": subset_2eps,
            "hitting_density": density,
            "spot_errors": spot_errors,
        }));
    }
    b.stage(
        "orbit",
        json!({ "eps": &eps }),
        json!({ "levels": level_reports }),
        orbit_pass,
    )?;
    b.note("orbit_bound_and_hitting", orbit_pass);

    let mut density_reports = Vec::with_capacity(levels);
    let mut density_pass = true;
    for (i, a_l) in family.sets.iter().enumerate() {
        let tail = a_l.min().unwrap_or(1);
        let d = density_report(a_l, horizon, tail)?;
        density_pass &= positive(d.prefix_lower);
        density_reports.push(json!({ "l": i + 1, "count": a_l.len(), "density": d }));
    }
    b.stage(
        "density",
        json!({ "horizon": horizon }),
        json!({ "levels": density_reports }),
        density_pass,
    )?;
    b.note("family_lower_density_positive", density_pass);
    Ok(())
}

// ---------------------------------------------------------------------------
// thm41: the reiteratively-but-not-upper-frequently hypercyclic pair. The
// preset grid repeats one magnitude per row so a single target pair admits
// hitting runs at several block levels.

fn repeat_grid(levels: usize) -> TargetGrid {
    let mut rows = Vec::with_capacity(levels);
    for l in 1..=levels as u64 {
        let mut y = FiniteVec::zero();
        for i in 1..=l {
            y.set(i, if l == 1 { 1.0 } else { 0.75 });
        }
        rows.push(vec![y]);
    }
    TargetGrid::new(rows).expect("rows sit inside the band")
}

fn thm41(b: &mut Bundle, horizon: u64) -> Result<()> {
    let l_max = 6usize;
    let config = Thm41Config::new(l_max, repeat_grid(l_max))?;
    let n_of = config.n_seq();
    let (v, w) = gen_thm41(&config, horizon)?;
    b.stage(
        "gen",
        json!({ "L_max": l_max, "horizon": horizon, "grid": "repeat-0.75" }),
        json!({
            "n_of": &n_of,
            "system": shift_pair_configs(v.clone(), w.clone(), 2.0)?,
        }),
        true,
    )?;

    // A = {n_{L_k} + rM} against the constant target pair (1, 0.75).
    let targets = [vec![1.0], vec![0.75]];
    let hit = thm41_hitting_set(&config, &v, &w, &targets, 15.0, 2.0, horizon)?;
    let mut runs_ok = !hit.blocks.is_empty();
    for block in &hit.blocks {
        let fits = block.start + block.k * hit.m <= horizon;
        runs_ok &= block.start == config.n_of(block.level as usize)
            && (!fits || block.count == block.k + 1);
    }
    b.stage(
        "construct",
        json!({ "targets": targets, "eps": 15.0, "p": 2.0 }),
        json!({ "M": hit.m, "blocks": &hit.blocks, "count": hit.set.len(), "A": &hit.set }),
        runs_ok,
    )?;

    let structure = thm41_structure(&config, &v, &w, horizon)?;
    let (inside, band) = verify_ratio_band(&v, &w, &n_of, 0.5, horizon, BandShape::Thm41)?;
    // Sparsity evidence reads the back half so the sup is not dominated by
    // the count-1-at-M=10 artefact of the very first block.
    let inside_density = density_report(&inside, horizon, horizon / 2)?;
    let containment = band.contained && inside_density.prefix_upper <= Ratio::new(1, 100);
    let check_pass = structure.pass && containment;
    b.stage(
        "check",
        json!({ "band_halfwidth": 0.5 }),
        json!({
            "structure": structure.report,
            "band": &band,
            "inside_count": inside.len(),
            "inside_density": &inside_density,
        }),
        check_pass,
    )?;
    b.note("upper_frequent_containment_evidence", containment);

    let tail = hit.set.min().unwrap_or(1);
    let hit_density = density_report(&hit.set, horizon, tail)?;
    let banach_positive = positive(hit_density.prefix_banach);
    b.stage(
        "density",
        json!({ "horizon": horizon }),
        json!({ "hitting_density": &hit_density }),
        banach_positive,
    )?;
    b.note("disjoint_reiterative_evidence", runs_ok && banach_positive);
    Ok(())
}

struct Structure {
    pass: bool,
    report: Value,
}

fn thm41_structure(
    config: &Thm41Config,
    v: &WeightSeq,
    w: &WeightSeq,
    horizon: u64,
) -> Result<Structure> {
    let mut v_max = 0.0f64;
    for n in 2..=horizon + 1 {
        v_max = v_max.max(v.value_at(n)?.abs());
    }
    let p1 = products(v, horizon)?;
    let p2 = products(w, horizon)?;

    // Ratio identity W²/W¹ = y_{l,i} on the blocks, in relative log error.
    let mut identity_err = 0.0f64;
    let mut identity_sign_ok = true;
    for l in 1..=config.l_max() {
        let y = &config.grid().tuple(l)[0];
        for i in 1..=l as u64 {
            let at = (config.n_of(l) + i - 1) as usize;
            let target = LogProduct::from_f64(y.get(i)).expect("grid entries nonzero");
            let rel = p2[at].div(p1[at]).div(target);
            identity_err = identity_err.max(rel.log_abs.abs());
            identity_sign_ok &= !rel.is_negative();
        }
    }

    // Coupling weights from level 2 on are summably small.
    let mut coupling_max = f64::NEG_INFINITY;
    for l in 2..=config.l_max() {
        coupling_max = coupling_max.max(w.log_at(config.n_of(l) + 1)?.log_abs);
    }

    // Growth floor for |W¹| on [n_l, n_{l+1}).
    let ln2 = 2.0f64.ln();
    let mut growth_ok = true;
    let mut growth_slack = f64::INFINITY;
    for l in 1..=config.l_max() {
        let lsq = (l * l) as f64;
        let floor_log = lsq * (1.0 / lsq).ln();
        let hi = if l < config.l_max() { config.n_of(l + 1) - 1 } else { horizon };
        for n in config.n_of(l)..=hi.min(horizon) {
            let lhs = p1[n as usize].log_abs;
            let rhs = floor_log + (n as f64 - lsq) * ln2;
            growth_ok &= lhs >= rhs - 1e-6 * (1.0 + rhs.abs());
            growth_slack = growth_slack.min(lhs - rhs);
        }
    }

    let pass = v_max <= 2.0
        && identity_err < 1e-9
        && identity_sign_ok
        && coupling_max < (1e-10f64).ln()
        && growth_ok;
    Ok(Structure {
        pass,
        report: json!({
            "v_max": v_max,
            "identity_max_log_err": identity_err,
            "identity_signs_ok": identity_sign_ok,
            "coupling_max_log": coupling_max,
            "growth_ok": growth_ok,
            "growth_min_slack": growth_slack,
        }),
    })
}

// ---------------------------------------------------------------------------
// thm42: the upper-frequently-but-not-frequently hypercyclic pair on the
// default 3-level table.

fn thm42(b: &mut Bundle, horizon: u64) -> Result<()> {
    let config = Thm42Config::default_table(3)?;
    let n_of = config.n_seq().to_vec();
    let (v, w) = gen_thm42(&config, horizon)?;
    b.stage(
        "gen",
        json!({ "levels": 3, "horizon": horizon }),
        json!({
            "n_of": &n_of,
            "predicates": config.predicates(1.0),
            "system": shift_pair_configs(v.clone(), w.clone(), 2.0)?,
        }),
        true,
    )?;

    // A = {n_{L_k} + r(J+M)} against the constant target pair (1, 1).
    let targets = [vec![1.0], vec![1.0]];
    let hit = thm42_hitting_set(&config, &v, &w, &targets, 30.0, 2.0, horizon)?;
    let j = hit.j.expect("table construction always selects a row");
    let step = j + hit.m;
    let mut runs_ok = !hit.blocks.is_empty();
    for block in &hit.blocks {
        let level = block.level as usize;
        let expected = (config.deg(level) - j) / step + 1;
        let fits = block.start + (expected - 1) * step <= horizon;
        runs_ok &= block.start == config.n_of(level)
            && block.step == step
            && (!fits || block.count == expected);
    }
    b.stage(
        "construct",
        json!({ "targets": targets, "eps": 30.0, "p": 2.0 }),
        json!({
            "J": j, "M": hit.m, "blocks": &hit.blocks,
            "count": hit.set.len(), "A": &hit.set,
        }),
        runs_ok,
    )?;

    let structure = thm42_structure(&config, &v, &w, horizon)?;
    let (inside, band) = verify_ratio_band(&v, &w, &n_of, 0.5, horizon, BandShape::Thm42)?;
    let tail = inside.min().unwrap_or(1);
    let inside_density = density_report(&inside, horizon, tail)?;
    let upper_evidence = band.contained && inside_density.prefix_upper >= Ratio::new(3, 10);
    let not_frequent = inside_density.prefix_lower <= Ratio::new(1, 100);
    let check_pass = structure.pass && band.contained;
    b.stage(
        "check",
        json!({ "band_halfwidth": 0.5 }),
        json!({
            "structure": structure.report,
            "band": &band,
            "inside_count": inside.len(),
            "inside_density": &inside_density,
        }),
        check_pass,
    )?;
    b.note("upper_frequent_evidence", upper_evidence);
    b.note("not_frequent_evidence", not_frequent);

    let tail = hit.set.min().unwrap_or(1);
    let hit_density = density_report(&hit.set, horizon, tail)?;
    let upper_positive = positive(hit_density.prefix_upper);
    b.stage(
        "density",
        json!({ "horizon": horizon }),
        json!({ "hitting_density": &hit_density }),
        upper_positive,
    )?;
    Ok(())
}

fn thm42_structure(
    config: &Thm42Config,
    v: &WeightSeq,
    w: &WeightSeq,
    horizon: u64,
) -> Result<Structure> {
    let mut v_max = 0.0f64;
    for n in 2..=horizon + 1 {
        v_max = v_max.max(v.value_at(n)?.abs());
    }
    let p1 = products(v, horizon)?;
    let p2 = products(w, horizon)?;

    // Ratio identity W²/W¹ = z_{l,i}: full scan on the short levels, probes
    // on the last.
    let mut identity_err = 0.0f64;
    let mut identity_sign_ok = true;
    let last = config.levels();
    for l in 1..=last {
        let z = config.z_vector(l);
        let deg = config.deg(l);
        let probe: Vec<u64> = if (config.n_of(l) + deg) as usize <= 1 << 12 || l < last {
            (1..=deg).collect()
        } else {
            vec![1, 2, 3, 4, deg / 2, deg / 2 + 1, deg - 1, deg]
        };
        for i in probe {
            let at = (config.n_of(l) + i - 1) as usize;
            if at as u64 > horizon {
                continue;
            }
            let target = LogProduct::from_f64(z[i as usize - 1]).expect("z entries nonzero");
            let rel = p2[at].div(p1[at]).div(target);
            identity_err = identity_err.max(rel.log_abs.abs());
            identity_sign_ok &= !rel.is_negative();
        }
    }

    // z values stay inside the [1/J, J] band of their row.
    let mut z_band_ok = true;
    for l in 1..=last {
        let jf = config.phi1(l) as f64;
        for x in config.z_vector(l) {
            z_band_ok &= x.abs() >= 1.0 / jf - 1e-15 && x.abs() <= jf + 1e-15;
        }
    }

    let pass = v_max <= 2.0 && identity_err < 1e-9 && identity_sign_ok && z_band_ok;
    Ok(Structure {
        pass,
        report: json!({
            "v_max": v_max,
            "identity_max_log_err": identity_err,
            "identity_signs_ok": identity_sign_ok,
            "z_band_ok": z_band_ok,
        }),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn repeat_grid_rows_sit_in_band() {
        let g = repeat_grid(6);
        assert_eq!(g.levels(), 6);
        assert_eq!(g.tuple(1)[0].get(1), 1.0);
        for l in 2..=6usize {
            for i in 1..=l as u64 {
                assert_eq!(g.tuple(l)[0].get(i), 0.75);
            }
        }
    }

    #[test]
    fn unknown_preset_is_an_error() {
        let dir = std::env::temp_dir();
        assert!(run("frequently", &dir, None).is_err());
    }
}
