use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use coagem_core::classes::{compute_classes, reaction_number};
use coagem_core::exact::{
    closed_m2, closed_m3, eval_family, gelation_time, iterate_family, kmer_moments,
    moment_hierarchy, polynomial_family,
};
use coagem_core::markov::{self, GelPolicy, ParticleState, RunOutcome};
use coagem_core::ode::{
    self, default_truncation, exhaustion_time, heatmap_grid, integrate, IntegratorConfig,
};
use coagem_core::trajectory::Tracking;
use coagem_core::{ClusterDistribution, EmissionParams, Record, SystemKind};
use num_traits::ToPrimitive;
use rayon::prelude::*;
use rayon::ThreadPool;
use serde_json::{json, Value};

use crate::args::{
    ClassesArgs, CompareArgs, EngineArg, ExactArgs, GelPolicyArg, HeatmapArgs, MomentsArgs,
    SimulateArgs, SolveArgs, SystemArg,
};
use crate::config::parse_init;
use crate::error::{CliError, Status};
use crate::output::{
    metadata, num, opt, trajectory_header, trajectory_row, Sink, TRAJECTORY_SCHEMA,
};

/// `0, dt, 2 dt, ...` below `t_end`, then `t_end`.
fn time_grid(t_end: f64, dt: f64) -> Result<Vec<f64>, CliError> {
    if !(t_end > 0.0 && dt > 0.0) {
        return Err(CliError::Config(
            "t_end and record_dt must be positive".into(),
        ));
    }
    let mut ts = Vec::new();
    let mut k = 0u64;
    loop {
        let t = k as f64 * dt;
        if t >= t_end - 1e-12 {
            break;
        }
        ts.push(t);
        k += 1;
    }
    ts.push(t_end);
    Ok(ts)
}

fn ensemble_mean(runs: &[RunOutcome], track: &[usize]) -> Vec<Record> {
    let rows = runs.iter().map(|r| r.trajectory.len()).min().unwrap_or(0);
    let r = runs.len() as f64;
    (0..rows)
        .map(|i| {
            let recs: Vec<&Record> = runs.iter().map(|o| &o.trajectory.records()[i]).collect();
            let mean = |f: &dyn Fn(&Record) -> f64| recs.iter().map(|x| f(x)).sum::<f64>() / r;
            let mut moments = [0.0; 4];
            for (j, m) in moments.iter_mut().enumerate() {
                *m = mean(&|x| x.moments[j]);
            }
            let gel = recs
                .iter()
                .map(|x| x.gel_fraction)
                .sum::<Option<f64>>()
                .map(|s| s / r);
            Record {
                t: recs[0].t,
                fractions: track
                    .iter()
                    .map(|&n| (n, mean(&|x| x.fraction(n))))
                    .collect(),
                moments,
                gel_fraction: gel,
                interaction_mass: mean(&|x| x.interaction_mass),
                step: None,
            }
        })
        .collect()
}

pub fn simulate(a: &SimulateArgs, sink: &mut Sink, pool: &ThreadPool) -> Result<Status, CliError> {
    let u0 = parse_init(&a.init, a.ell)?;
    if a.replicas == 0 {
        return Err(CliError::Config("replicas must be at least 1".into()));
    }
    let policy = match a.gel_policy {
        GelPolicyArg::ZiffStell => GelPolicy::ZiffStell,
        GelPolicyArg::Stockmayer => a
            .stockmayer_threshold
            .map(|threshold| GelPolicy::Stockmayer { threshold })
            .unwrap_or_else(|| GelPolicy::stockmayer_default(a.clusters)),
    };
    let tracking = Tracking::Sizes(a.track.clone());
    let runs: Vec<RunOutcome> = pool.install(|| {
        (0..a.replicas)
            .into_par_iter()
            .map(|k| -> Result<RunOutcome, CliError> {
                let mut s = ParticleState::new(a.clusters, &u0, a.seed.wrapping_add(k))?
                    .with_policy(policy)?;
                Ok(s.run(a.t_end, a.record_dt, &tracking)?)
            })
            .collect::<Result<_, _>>()
    })?;

    let header = trajectory_header(&a.track);
    let rows = |recs: &[Record]| {
        recs.iter()
            .map(|r| trajectory_row(r, &a.track))
            .collect::<Vec<_>>()
    };
    if runs.len() == 1 {
        sink.csv(
            ".csv",
            TRAJECTORY_SCHEMA,
            &header,
            rows(runs[0].trajectory.records()),
        )?;
    } else {
        for (k, run) in runs.iter().enumerate() {
            sink.csv(
                &format!(".r{k}.csv"),
                TRAJECTORY_SCHEMA,
                &header,
                rows(run.trajectory.records()),
            )?;
        }
        sink.csv(
            ".mean.csv",
            TRAJECTORY_SCHEMA,
            &header,
            rows(&ensemble_mean(&runs, &a.track)),
        )?;
    }

    let replicas: Vec<Value> = runs
        .iter()
        .map(|r| {
            let m = &r.metadata;
            let terminal = match r.terminal {
                markov::Terminal::ReachedTEnd => json!({ "kind": "reached_t_end" }),
                markov::Terminal::Exhausted { t } => json!({ "kind": "exhausted", "t": t }),
            };
            json!({
                "seed": m.seed,
                "initial_particles": m.initial_particles,
                "steps": m.steps,
                "fallback_draws": m.fallback_draws,
                "terminal": terminal,
            })
        })
        .collect();
    let policy_json = match policy {
        GelPolicy::ZiffStell => json!({ "kind": "ziff-stell" }),
        GelPolicy::Stockmayer { threshold } => {
            json!({ "kind": "stockmayer", "threshold": threshold })
        }
    };
    sink.json(
        ".meta.json",
        &metadata(
            "simulate",
            a,
            json!({
                "seed": a.seed,
                "rng_stream": markov::RNG_STREAM,
                "gel_policy": policy_json,
                "replicas": replicas,
            }),
        ),
    )?;
    let exhausted = runs
        .iter()
        .any(|r| matches!(r.terminal, markov::Terminal::Exhausted { .. }));
    Ok(if exhausted {
        Status::Exhausted
    } else {
        Status::Done
    })
}

pub fn solve(a: &SolveArgs, sink: &mut Sink) -> Result<Status, CliError> {
    let u0 = parse_init(&a.init, a.ell)?;
    let largest = u0.max_size().unwrap_or(1);
    let kind = match a.system {
        SystemArg::Small => SystemKind::Small,
        SystemArg::Large => SystemKind::Large,
        SystemArg::Full => SystemKind::Full,
        SystemArg::Truncated => SystemKind::Truncated(
            a.truncation
                .unwrap_or_else(|| default_truncation(largest, a.ell)),
        ),
    };
    let params = EmissionParams::new(a.ell, kind)?;
    let cfg = IntegratorConfig {
        rtol: a.rtol,
        atol: a.atol,
        record_dt: a.record_dt,
        tracking: Tracking::Sizes(a.track.clone()),
        truncation: if matches!(a.system, SystemArg::Full | SystemArg::Large) {
            a.truncation
        } else {
            None
        },
        ..Default::default()
    };
    let res = integrate(&u0, &params, a.t_end, &cfg)?;
    sink.csv(
        ".csv",
        TRAJECTORY_SCHEMA,
        &trajectory_header(&a.track),
        res.trajectory
            .records()
            .iter()
            .map(|r| trajectory_row(r, &a.track)),
    )?;
    let terminal = match res.terminal {
        ode::Terminal::ReachedTEnd => json!({ "kind": "reached_t_end" }),
        ode::Terminal::Exhausted { t_ex, t_threshold } => {
            json!({ "kind": "exhausted", "t_ex": t_ex, "t_threshold": t_threshold })
        }
        ode::Terminal::StepFailure { t, h } => json!({ "kind": "step_failure", "t": t, "h": h }),
    };
    let s = res.diagnostics.steps;
    sink.json(
        ".meta.json",
        &metadata(
            "solve",
            a,
            json!({
                "terminal": terminal,
                "diagnostics": {
                    "clamps": res.diagnostics.clamps,
                    "accepted": s.accepted,
                    "rejected": s.rejected,
                    "jacobians": s.jacobians,
                    "factorizations": s.factorizations,
                    "newton_failures": s.newton_failures,
                },
            }),
        ),
    )?;
    match res.terminal {
        ode::Terminal::ReachedTEnd => Ok(Status::Done),
        ode::Terminal::Exhausted { t_ex, .. } => {
            eprintln!("exhausted at t_ex = {t_ex}");
            Ok(Status::Exhausted)
        }
        ode::Terminal::StepFailure { t, h } => Err(CliError::Numerical(format!(
            "step size {h:e} below the minimum at t = {t}"
        ))),
    }
}

fn is_dimer(u0: &ClusterDistribution) -> bool {
    u0.len() == 1 && u0.get(2) == 1.0
}

pub fn exact(a: &ExactArgs, sink: &mut Sink) -> Result<Status, CliError> {
    let u0 = parse_init(&a.init, a.ell)?;
    let poly_ok = a.ell == 1 && is_dimer(&u0);
    let use_poly = match a.engine {
        EngineArg::Poly if !poly_ok => {
            return Err(CliError::Config(
                "the polynomial family needs --ell 1 --init dimer".into(),
            ));
        }
        EngineArg::Poly => true,
        EngineArg::Iterate => false,
        EngineArg::Auto => poly_ok,
    };
    let times = time_grid(a.t_end, a.record_dt)?;
    if use_poly {
        let fam = polynomial_family(a.n_max)?;
        let polys: Vec<Value> = fam
            .iter()
            .enumerate()
            .map(|(k, p)| {
                let terms: Vec<Value> = p
                    .terms()
                    .map(|(e, c)| {
                        let v = c.to_f64().unwrap_or(f64::NAN);
                        json!({
                            "exponent": e,
                            "coefficient": c.to_string(),
                            "value": v,
                            "rounded": (v * 1e6).round() / 1e6,
                        })
                    })
                    .collect();
                json!({ "n": k + 2, "terms": terms })
            })
            .collect();
        sink.json(
            ".coefficients.json",
            &json!({ "schema": "coagem.coefficients/1", "variable": "m1", "m1_initial": 2, "polynomials": polys }),
        )?;
        let sizes: Vec<usize> = (2..=a.n_max).collect();
        let mut rows = Vec::with_capacity(times.len());
        for &t in &times {
            let u = eval_family(&fam, t)?;
            let mut row = vec![num(t)];
            row.extend(sizes.iter().map(|&n| num(u.get(n))));
            rows.push(row);
        }
        sink.csv(".csv", "coagem.exact/1", &size_header(&sizes), rows)?;
    } else {
        let sols = iterate_family(&u0, a.n_max, a.t_end)?;
        let sizes: Vec<usize> = sols.iter().map(|s| s.size()).collect();
        let mut rows = Vec::with_capacity(times.len());
        for &t in &times {
            let mut row = vec![num(t)];
            for s in &sols {
                row.push(num(s.eval(t)?));
            }
            rows.push(row);
        }
        sink.csv(".csv", "coagem.exact/1", &size_header(&sizes), rows)?;
    }
    let engine = if use_poly { "poly" } else { "iterate" };
    sink.json(
        ".meta.json",
        &metadata("exact", a, json!({ "engine": engine })),
    )?;
    Ok(Status::Done)
}

fn size_header(sizes: &[usize]) -> Vec<String> {
    std::iter::once("t".to_string())
        .chain(sizes.iter().map(|n| format!("u_{n}")))
        .collect()
}

pub fn moments(a: &MomentsArgs, sink: &mut Sink) -> Result<Status, CliError> {
    let crit = gelation_time(a.k, a.ell)?;
    if a.t_end >= crit.t_gel {
        return Err(CliError::Config(format!(
            "t_end = {} is not before the gelation time {}",
            a.t_end, crit.t_gel
        )));
    }
    let cfg = IntegratorConfig {
        rtol: a.rtol,
        atol: a.atol,
        record_dt: a.record_dt,
        ..Default::default()
    };
    let series = moment_hierarchy(&kmer_moments(a.k, a.k_max), a.ell, a.k_max, a.t_end, &cfg)?;
    let mut header: Vec<String> = vec!["t".into(), "m0".into(), "m1".into()];
    header.extend((2..=a.k_max).map(|j| format!("m{j}")));
    header.extend(["m2_closed".to_string(), "m3_closed".to_string()]);
    let mut rows = Vec::with_capacity(series.times.len());
    for (t, m) in series.times.iter().zip(&series.moments) {
        let mut row: Vec<String> = (0..=a.k_max).map(|j| num(m.get(j))).collect();
        row.insert(0, num(*t));
        row.push(num(closed_m2(a.k, a.ell, *t)?));
        row.push(num(closed_m3(a.k, a.ell, *t)?));
        rows.push(row);
    }
    sink.csv(".csv", "coagem.moments/1", &header, rows)?;
    let t_ex = if crit.t_ex.is_finite() {
        json!(crit.t_ex)
    } else {
        Value::Null
    };
    sink.json(
        ".meta.json",
        &metadata("moments", a, json!({ "t_gel": crit.t_gel, "t_ex": t_ex })),
    )?;
    Ok(Status::Done)
}

pub fn classes(a: &ClassesArgs, sink: &mut Sink) -> Result<Status, CliError> {
    let support: BTreeSet<usize> = a.support.iter().copied().collect();
    let table = compute_classes(&support, a.ell, a.n_max)?;
    let numbers: BTreeMap<String, usize> = (1..=a.n_max)
        .filter_map(|n| reaction_number(&table, n).map(|s| (n.to_string(), s)))
        .collect();
    let unattainable: Vec<usize> = (1..=a.n_max)
        .filter(|&n| reaction_number(&table, n).is_none())
        .collect();
    sink.json(
        ".json",
        &json!({
            "schema": "coagem.classes/1",
            "ell": a.ell,
            "support": support,
            "n_max": a.n_max,
            "classes": table.classes(),
            "reaction_numbers": numbers,
            "unattainable": unattainable,
        }),
    )?;
    sink.json(".meta.json", &metadata("classes", a, json!({})))?;
    Ok(Status::Done)
}

pub fn heatmap(a: &HeatmapArgs, sink: &mut Sink, pool: &ThreadPool) -> Result<Status, CliError> {
    if a.ell != 3 {
        return Err(CliError::Config(
            "the heat map covers the ell = 3 system only".into(),
        ));
    }
    let grid = heatmap_grid(a.grid)?;
    let cfg = IntegratorConfig {
        rtol: a.rtol,
        atol: a.atol,
        ..Default::default()
    };
    cfg.validate()?;
    let cells: Vec<Option<f64>> = pool.install(|| {
        grid.par_iter()
            .map(|&(p, q)| exhaustion_time(p, q, &cfg))
            .collect::<Result<_, _>>()
    })?;
    let header: Vec<String> = ["p", "q", "r", "t_ex"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let rows = grid
        .iter()
        .zip(&cells)
        .map(|(&(p, q), &t)| vec![num(p), num(q), num((1.0 - p - q).max(0.0)), opt(t)]);
    sink.csv(".csv", "coagem.heatmap/1", &header, rows)?;
    sink.json(
        ".meta.json",
        &metadata("heatmap", a, json!({ "cells": grid.len() })),
    )?;
    Ok(Status::Done)
}

struct Table {
    header: Vec<String>,
    rows: Vec<Vec<Option<f64>>>,
    t_col: usize,
}

fn read_table(path: &Path) -> Result<Table, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let body: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    let joined = body.join("\n");
    let mut rdr = csv::Reader::from_reader(joined.as_bytes());
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let t_col = header
        .iter()
        .position(|h| h == "t")
        .ok_or_else(|| CliError::Config(format!("{} has no `t` column", path.display())))?;
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let row = rec
            .iter()
            .map(|f| {
                if f.is_empty() {
                    Ok(None)
                } else {
                    f.parse::<f64>().map(Some).map_err(|_| {
                        CliError::Config(format!("{}: `{f}` is not a number", path.display()))
                    })
                }
            })
            .collect::<Result<Vec<_>, _>>()?;
        if row[t_col].is_none() {
            return Err(CliError::Config(format!(
                "{}: row without a time",
                path.display()
            )));
        }
        rows.push(row);
    }
    Ok(Table {
        header,
        rows,
        t_col,
    })
}

pub fn compare(a: &CompareArgs, sink: &mut Sink) -> Result<Status, CliError> {
    let (Some(pa), Some(pb)) = (&a.a, &a.b) else {
        return Err(CliError::Config("compare needs --a and --b".into()));
    };
    let (ta, tb) = (read_table(pa)?, read_table(pb)?);
    let columns: Vec<String> = if a.columns.is_empty() {
        ta.header
            .iter()
            .filter(|h| *h != "t" && tb.header.contains(h))
            .cloned()
            .collect()
    } else {
        a.columns.clone()
    };
    let mut idx = Vec::with_capacity(columns.len());
    for c in &columns {
        let ia = ta.header.iter().position(|h| h == c);
        let ib = tb.header.iter().position(|h| h == c);
        match (ia, ib) {
            (Some(ia), Some(ib)) => idx.push((ia, ib)),
            _ => {
                return Err(CliError::Config(format!(
                    "column `{c}` is not in both files"
                )))
            }
        }
    }
    let mut b_times: Vec<(f64, usize)> = tb
        .rows
        .iter()
        .enumerate()
        .map(|(i, r)| (r[tb.t_col].unwrap(), i))
        .collect();
    b_times.sort_by(|x, y| x.0.total_cmp(&y.0));
    let mut sup: Vec<(f64, Option<f64>)> = vec![(0.0, None); columns.len()];
    let mut shared = 0usize;
    for ra in &ta.rows {
        let t = ra[ta.t_col].unwrap();
        if a.t_max.is_some_and(|tm| t > tm + a.time_tol) {
            continue;
        }
        let k = b_times.partition_point(|x| x.0 < t - a.time_tol);
        let Some(&(_, ib)) = b_times.get(k).filter(|x| (x.0 - t).abs() <= a.time_tol) else {
            continue;
        };
        shared += 1;
        let rb = &tb.rows[ib];
        for (s, &(ia, jb)) in sup.iter_mut().zip(&idx) {
            if let (Some(x), Some(y)) = (ra[ia], rb[jb]) {
                let d = (x - y).abs();
                if s.1.is_none() || d > s.0 {
                    *s = (d, Some(t));
                }
            }
        }
    }
    if shared == 0 {
        return Err(CliError::Config(
            "the two files share no record times".into(),
        ));
    }
    let quantities: serde_json::Map<String, Value> = columns
        .iter()
        .zip(&sup)
        .map(|(c, &(d, t))| (c.clone(), json!({ "sup": t.map(|_| d), "t": t })))
        .collect();
    for (c, &(d, t)) in columns.iter().zip(&sup) {
        if let Some(t) = t {
            eprintln!("{c}: sup {d:e} at t = {t}");
        }
    }
    sink.json(
        ".json",
        &json!({
            "schema": "coagem.compare/1",
            "a": pa,
            "b": pb,
            "shared_times": shared,
            "quantities": quantities,
        }),
    )?;
    sink.json(".meta.json", &metadata("compare", a, json!({})))?;
    Ok(Status::Done)
}
