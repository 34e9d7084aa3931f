//! One function per task; each returns its artifacts and a short summary for the manifest.

use std::collections::HashSet;
use std::f64::consts::PI;

use ftm_core::error::Error;
use ftm_core::evolution::{integrate_transfer, integrate_transfer_full, Stepper, TransferMatrix};
use ftm_core::grid::MomentumGrid;
use ftm_core::linalg::CMatrix;
use ftm_core::oracle::{born_amplitude, circular_well_2d, integrate_schrodinger_1d, match_potential_1d, Oracle1DResult};
use ftm_core::potential::PotentialModel;
use ftm_core::scattering::{m22_conditioning, on_grid_directions, spectral_singularity_scan, Direction, ScatteringData};
use ftm_core::symmetry::{
    build_symmetry, check_amplitude_reciprocity, full_grid_residual, m_identity_swapped_order, on_grid_pairs, reference_tolerance,
    verify_all, ResidualReport,
};
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::config::{OracleKind, RunConfig, Task};
use crate::output::{complex, float, floats, Artifact, Csv};
use crate::Failure;

pub struct Context<'a> {
    pub cfg: &'a RunConfig,
    pub v: &'a PotentialModel,
    pub stepper: Stepper,
}

pub struct Outcome {
    pub artifacts: Vec<Artifact>,
    pub summary: Value,
    /// Set by verify_identities when any residual record fails.
    pub identities_failed: bool,
}

impl Outcome {
    fn ok(artifacts: Vec<Artifact>, summary: Value) -> Self {
        Self { artifacts, summary, identities_failed: false }
    }
}

pub fn run(ctx: &Context) -> Result<Outcome, Failure> {
    match ctx.cfg.task {
        Task::Transfer => transfer(ctx),
        Task::Amplitudes => amplitudes(ctx),
        Task::AngleScan => angle_scan(ctx),
        Task::KScan => k_scan(ctx),
        Task::SingularityScan => singularity_scan(ctx),
        Task::VerifyIdentities => verify_identities(ctx),
        Task::OracleCompare => oracle_compare(ctx),
    }
}

fn grid_at(ctx: &Context, k: f64) -> Result<MomentumGrid, Error> {
    let sc = ctx.cfg.scattering(k);
    sc.validate()?;
    MomentumGrid::build(&sc)
}

fn transfer_at(ctx: &Context, k: f64) -> Result<TransferMatrix, Error> {
    integrate_transfer(ctx.v, &grid_at(ctx, k)?, &ctx.stepper)
}

fn matrix_json(m: &CMatrix) -> Value {
    let rows: Vec<Vec<[f64; 2]>> = (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect()).collect();
    json!(rows)
}

fn c_json(z: C64) -> Value {
    json!([z.re, z.im])
}

/// Integrator report without wall-clock time, so outputs stay byte-identical.
fn report_json(m: &TransferMatrix) -> Value {
    let mut r = serde_json::to_value(&m.report).expect("report serializes");
    if let Some(obj) = r.as_object_mut() {
        obj.remove("seconds");
    }
    r
}

fn transfer(ctx: &Context) -> Result<Outcome, Failure> {
    let m = transfer_at(ctx, ctx.cfg.k)?;
    let (sigma_min, cond) = m22_conditioning(&m);
    let points: Vec<&Vec<f64>> = m.grid.propagating().iter().map(|&i| &m.grid.points()[i]).collect();
    let doc = json!({
        "k": ctx.cfg.k,
        "d": ctx.cfg.d,
        "restriction": m.restriction,
        "propagating_points": points,
        "m11": matrix_json(&m.m11),
        "m12": matrix_json(&m.m12),
        "m21": matrix_json(&m.m21),
        "m22": matrix_json(&m.m22),
        "sigma_min_m22": sigma_min,
        "cond_m22": cond,
        "report": report_json(&m),
    });
    let summary = json!({ "propagating_modes": m.len(), "sigma_min_m22": sigma_min, "cond_m22": cond });
    Ok(Outcome::ok(vec![Artifact::json("transfer.json", &doc)], summary))
}

fn parse_directions(list: &[Vec<f64>], d: usize, what: &str) -> Result<Vec<Direction>, Failure> {
    list.iter()
        .map(|v| {
            if v.len() != d + 1 {
                return Err(Failure::invalid("InvalidConfig", format!("{what} direction {v:?} needs {} components", d + 1)));
            }
            Direction::normalized(v.clone()).map_err(Failure::from)
        })
        .collect()
}

fn incident_directions(ctx: &Context, grid: &MomentumGrid) -> Result<Vec<Direction>, Failure> {
    if let Some(list) = &ctx.cfg.incident {
        return parse_directions(list, ctx.cfg.d, "incident");
    }
    // The forward on-grid direction closest to +x.
    let best = on_grid_directions(grid, 1.0).into_iter().max_by(|a, b| a.nx().total_cmp(&b.nx()));
    best.map(|n| vec![n]).ok_or_else(|| Failure::invalid("InvalidConfig", "grid has no propagating directions".into()))
}

fn observed_directions(ctx: &Context, grid: &MomentumGrid) -> Result<Vec<Direction>, Failure> {
    if let Some(list) = &ctx.cfg.observed {
        return parse_directions(list, ctx.cfg.d, "observed");
    }
    if let Some(count) = ctx.cfg.angles {
        // Half-step offset keeps θ = ±π/2 (grazing) out of the sample for even counts.
        return Ok((0..count).map(|j| Direction::planar(2.0 * PI * (j as f64 + 0.5) / count as f64 - PI)).collect());
    }
    Ok(on_grid_directions(grid, 1.0).into_iter().chain(on_grid_directions(grid, -1.0)).collect())
}

fn key(a: &Direction, b: &Direction) -> Vec<u64> {
    a.components().iter().chain(b.components()).map(|x| x.to_bits()).collect()
}

/// Incident × observed, each followed by its reciprocal partner (−n, −n₀) when `paired`.
fn direction_pairs(ctx: &Context, grid: &MomentumGrid) -> Result<Vec<(Direction, Direction)>, Failure> {
    let incident = incident_directions(ctx, grid)?;
    let observed = observed_directions(ctx, grid)?;
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for n0 in &incident {
        for n in &observed {
            if seen.insert(key(n0, n)) {
                out.push((n0.clone(), n.clone()));
            }
            if ctx.cfg.paired {
                let (a, b) = (n.neg(), n0.neg());
                if seen.insert(key(&a, &b)) {
                    out.push((a, b));
                }
            }
        }
    }
    Ok(out)
}

fn direction_header(prefix: &str, d: usize) -> Vec<String> {
    ["x", "y", "z"][..=d].iter().map(|c| format!("{prefix}{c}")).collect()
}

fn pair_header(d: usize) -> Vec<String> {
    let mut h = vec!["k".to_string()];
    h.extend(direction_header("n0", d));
    h.extend(direction_header("n", d));
    h
}

fn pair_cells(k: f64, n0: &Direction, n: &Direction) -> Vec<String> {
    let mut cells = vec![float(k)];
    cells.extend(floats(n0.components()));
    cells.extend(floats(n.components()));
    cells
}

/// Directions that do not land on the grid are skipped rather than fatal.
fn skippable(e: &Error) -> bool {
    matches!(e, Error::OffGrid { .. } | Error::Evanescent { .. } | Error::Grazing { .. })
}

fn angle_scan(ctx: &Context) -> Result<Outcome, Failure> {
    let k = ctx.cfg.k;
    let data = ScatteringData::new(transfer_at(ctx, k)?)?;
    let pairs = direction_pairs(ctx, data.grid())?;
    let mut header = pair_header(ctx.cfg.d);
    header.extend(["Re_f", "Im_f", "abs2_f", "snap_distance"].map(String::from));
    let mut csv = Csv::new(&header);
    let (mut rows, mut skipped) = (0usize, 0usize);
    for (n0, n) in &pairs {
        match data.amplitude(n0, n) {
            Ok(a) => {
                let mut cells = pair_cells(k, n0, n);
                cells.extend(complex(a.f));
                cells.push(float(a.f.norm_sqr()));
                cells.push(float(a.snap_distance));
                csv.row(cells);
                rows += 1;
            }
            Err(e) if skippable(&e) => skipped += 1,
            Err(e) => return Err(e.into()),
        }
    }
    let summary = json!({ "rows": rows, "skipped_off_grid": skipped, "sigma_min_m22": data.s.sigma_min, "cond_m22": data.s.cond });
    Ok(Outcome::ok(vec![Artifact::csv("angle_scan.csv", csv)], summary))
}

fn amplitudes(ctx: &Context) -> Result<Outcome, Failure> {
    let k = ctx.cfg.k;
    let data = ScatteringData::new(transfer_at(ctx, k)?)?;
    let pairs = direction_pairs(ctx, data.grid())?;
    let mut header = pair_header(ctx.cfg.d);
    header.extend(
        [
            "channel",
            "Re_f",
            "Im_f",
            "Re_singular",
            "Im_singular",
            "Re_smooth",
            "Im_smooth",
            "Re_total",
            "Im_total",
            "Re_total_alt",
            "Im_total_alt",
            "snap_distance",
        ]
        .map(String::from),
    );
    let mut csv = Csv::new(&header);
    let mut records = Vec::new();
    let mut skipped = 0usize;
    for (n0, n) in &pairs {
        let (a, rt) = match data.amplitude(n0, n).and_then(|a| Ok((a, data.rt_amplitude(n0, n)?))) {
            Ok(x) => x,
            Err(e) if skippable(&e) => {
                skipped += 1;
                continue;
            }
            Err(e) => return Err(e.into()),
        };
        let channel = serde_json::to_value(rt.channel).expect("channel serializes");
        let mut cells = pair_cells(k, n0, n);
        cells.push(channel.as_str().unwrap_or_default().to_string());
        for z in [a.f, rt.singular, rt.smooth, rt.total] {
            cells.extend(complex(z));
        }
        match rt.total_alt {
            Some(z) => cells.extend(complex(z)),
            None => cells.extend([String::new(), String::new()]),
        }
        cells.push(float(a.snap_distance));
        csv.row(cells);
        records.push(json!({
            "n0": n0.components(),
            "n": n.components(),
            "channel": channel,
            "f": c_json(a.f),
            "singular": c_json(rt.singular),
            "smooth": c_json(rt.smooth),
            "total": c_json(rt.total),
            "total_alt": rt.total_alt.map(c_json),
            "snap_distance": a.snap_distance,
        }));
    }
    let doc = json!({
        "k": k,
        "d": ctx.cfg.d,
        "c_d": c_json(data.c_d),
        "sigma_min_m22": data.s.sigma_min,
        "cond_m22": data.s.cond,
        "amplitudes": records,
    });
    let summary = json!({ "rows": records.len(), "skipped_off_grid": skipped });
    Ok(Outcome::ok(vec![Artifact::json("amplitudes.json", &doc), Artifact::csv("amplitudes.csv", csv)], summary))
}

fn k_values(cfg: &RunConfig) -> Vec<f64> {
    let [a, b] = cfg.k_range.expect("validated");
    let n = cfg.k_samples;
    (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
}

fn k_scan(ctx: &Context) -> Result<Outcome, Failure> {
    let ks = k_values(ctx.cfg);
    let one_d = ctx.cfg.d == 0;
    let rows = ks
        .par_iter()
        .map(|&k| {
            let m = transfer_at(ctx, k)?;
            let (sigma_min, cond) = m22_conditioning(&m);
            let mut cells = floats(&[k, sigma_min, cond]);
            if one_d {
                let rt = Oracle1DResult::from_m(m.as_2x2().expect("one-point grid"), 0.0);
                for z in [rt.r_left, rt.t_left, rt.r_right, rt.t_right] {
                    cells.extend(complex(z));
                }
            }
            Ok((sigma_min, cells))
        })
        .collect::<Result<Vec<_>, Error>>()?;
    let mut header: Vec<&str> = vec!["k", "sigma_min", "cond"];
    if one_d {
        header.extend(["Re_r_left", "Im_r_left", "Re_t_left", "Im_t_left", "Re_r_right", "Im_r_right", "Re_t_right", "Im_t_right"]);
    }
    let mut csv = Csv::new(&header);
    let mut best = (f64::INFINITY, 0.0);
    for ((sigma, cells), &k) in rows.into_iter().zip(&ks) {
        if sigma < best.0 {
            best = (sigma, k);
        }
        csv.row(cells);
    }
    let summary = json!({ "samples": ks.len(), "min_sigma_min": best.0, "k_at_min": best.1 });
    Ok(Outcome::ok(vec![Artifact::csv("k_scan.csv", csv)], summary))
}

fn singularity_scan(ctx: &Context) -> Result<Outcome, Failure> {
    let [a, b] = ctx.cfg.k_range.expect("validated");
    let sc = ctx.cfg.scattering(ctx.cfg.k);
    sc.validate()?;
    let scan = spectral_singularity_scan(ctx.v, &sc, &ctx.stepper, (a, b), ctx.cfg.k_samples, ctx.cfg.k_tol)?;
    let mut csv = Csv::new(&["k", "sigma_min", "cond"]);
    for s in &scan.samples {
        csv.row(floats(&[s.k, s.sigma_min, s.cond]));
    }
    let summary = json!({
        "minima": scan.minima.len(),
        "candidates": scan.candidates.iter().map(|c| c.k).collect::<Vec<_>>(),
        "threshold": scan.threshold,
    });
    Ok(Outcome::ok(vec![Artifact::json("singularity_scan.json", &scan), Artifact::csv("singularity_scan.csv", csv)], summary))
}

fn verify_identities(ctx: &Context) -> Result<Outcome, Failure> {
    let grid = grid_at(ctx, ctx.cfg.k)?;
    let (full, m) = if ctx.cfg.full_grid {
        let (u, m) = integrate_transfer_full(ctx.v, &grid, &ctx.stepper)?;
        (Some(full_grid_residual(&u, &grid)), m)
    } else {
        (None, integrate_transfer(ctx.v, &grid, &ctx.stepper)?)
    };
    let tol = reference_tolerance(&m);
    let mut records = verify_all(&m)?;
    if let Some(r) = full {
        records.push(ResidualReport {
            identity_name: "full_grid_anti_pseudo_unitarity".into(),
            residual: r,
            reference_tol: tol,
            pass: r < tol,
        });
    }
    let swapped = m_identity_swapped_order(&m, &build_symmetry(&m.grid)?);
    let data = ScatteringData::new(m)?;
    let reciprocity = check_amplitude_reciprocity(&data, &on_grid_pairs(data.grid()))?;
    let relative = if reciprocity.max_f > 0.0 { reciprocity.max_abs / reciprocity.max_f } else { reciprocity.max_abs };
    records.push(ResidualReport {
        identity_name: "amplitude_reciprocity".into(),
        residual: relative,
        reference_tol: tol,
        pass: relative < tol,
    });

    let failed: Vec<&str> = records.iter().filter(|r| !r.pass).map(|r| r.identity_name.as_str()).collect();
    let doc = json!({
        "k": ctx.cfg.k,
        "d": ctx.cfg.d,
        "reference_tol": tol,
        "records": records,
        "amplitude_reciprocity": reciprocity,
        "diagnostics": { "swapped_order_residual": swapped },
        "pass": failed.is_empty(),
    });
    let summary = json!({ "records": records.len(), "failed": failed });
    let identities_failed = !failed.is_empty();
    Ok(Outcome { artifacts: vec![Artifact::json("identities.json", &doc)], summary, identities_failed })
}

fn oracle_compare(ctx: &Context) -> Result<Outcome, Failure> {
    let kind = match ctx.cfg.oracle {
        OracleKind::Auto => match (ctx.cfg.d, ctx.v) {
            (0, v) if v.constant_segments().is_some() => OracleKind::Matching,
            (0, _) => OracleKind::Ode,
            (1, PotentialModel::CircularWell { .. }) => OracleKind::PartialWave,
            _ => OracleKind::Born,
        },
        k => k,
    };
    match kind {
        OracleKind::Matching | OracleKind::Ode => compare_one_d(ctx, kind),
        OracleKind::PartialWave => compare_partial_wave(ctx),
        OracleKind::Born => compare_born(ctx),
        OracleKind::Auto => unreachable!(),
    }
}

fn compare_one_d(ctx: &Context, kind: OracleKind) -> Result<Outcome, Failure> {
    if ctx.cfg.d != 0 {
        return Err(Failure::invalid("InvalidConfig", "matching and ODE oracles need d = 0".into()));
    }
    let k = ctx.cfg.k;
    let m = transfer_at(ctx, k)?;
    let ours = Oracle1DResult::from_m(m.as_2x2().expect("one-point grid"), 0.0);
    let (name, reference) = match (kind, ctx.v.support_bounds()) {
        (OracleKind::Ode, Some((a, b))) => ("ode", integrate_schrodinger_1d(ctx.v, k, (a, b), ctx.cfg.steps_per_unit)?),
        _ => ("matching", match_potential_1d(ctx.v, k)?),
    };
    let quantities = [
        ("m11", ours.m[(0, 0)], reference.m[(0, 0)]),
        ("m12", ours.m[(0, 1)], reference.m[(0, 1)]),
        ("m21", ours.m[(1, 0)], reference.m[(1, 0)]),
        ("m22", ours.m[(1, 1)], reference.m[(1, 1)]),
        ("r_left", ours.r_left, reference.r_left),
        ("t_left", ours.t_left, reference.t_left),
        ("r_right", ours.r_right, reference.r_right),
        ("t_right", ours.t_right, reference.t_right),
    ];
    let mut csv = Csv::new(&["quantity", "Re_pipeline", "Im_pipeline", "Re_oracle", "Im_oracle", "abs_delta"]);
    let mut max_delta: f64 = 0.0;
    for (q, a, b) in quantities {
        let delta = (a - b).norm();
        max_delta = max_delta.max(delta);
        let mut cells = vec![q.to_string()];
        cells.extend(complex(a));
        cells.extend(complex(b));
        cells.push(float(delta));
        csv.row(cells);
    }
    let summary = json!({ "oracle": name, "max_abs_delta": max_delta, "wronskian_drift": reference.wronskian_drift });
    Ok(Outcome::ok(vec![Artifact::csv("oracle_compare.csv", csv), Artifact::json("oracle_summary.json", &summary)], summary))
}

/// Pipeline f against a reference amplitude on every sampled pair.
fn compare_pairs(
    ctx: &Context,
    name: &str,
    reference: impl Fn(&Direction, &Direction) -> Result<C64, Error>,
    extra: Value,
) -> Result<Outcome, Failure> {
    let k = ctx.cfg.k;
    let data = ScatteringData::new(transfer_at(ctx, k)?)?;
    let pairs = direction_pairs(ctx, data.grid())?;
    let mut header = pair_header(ctx.cfg.d);
    header.extend(["Re_f", "Im_f", "Re_oracle", "Im_oracle", "abs_delta"].map(String::from));
    let mut csv = Csv::new(&header);
    let (mut max_delta, mut sum_delta2, mut sum_ref2, mut skipped): (f64, f64, f64, usize) = (0.0, 0.0, 0.0, 0);
    for (n0, n) in &pairs {
        let f = match data.amplitude(n0, n) {
            Ok(a) => a.f,
            Err(e) if skippable(&e) => {
                skipped += 1;
                continue;
            }
            Err(e) => return Err(e.into()),
        };
        let g = reference(n0, n)?;
        let delta = (f - g).norm();
        max_delta = max_delta.max(delta);
        sum_delta2 += delta * delta;
        sum_ref2 += g.norm_sqr();
        let mut cells = pair_cells(k, n0, n);
        cells.extend(complex(f));
        cells.extend(complex(g));
        cells.push(float(delta));
        csv.row(cells);
    }
    let relative_l2 = if sum_ref2 > 0.0 { (sum_delta2 / sum_ref2).sqrt() } else { sum_delta2.sqrt() };
    let mut summary = json!({ "oracle": name, "max_abs_delta": max_delta, "relative_l2": relative_l2, "skipped_off_grid": skipped });
    if let (Some(s), Some(e)) = (summary.as_object_mut(), extra.as_object()) {
        s.extend(e.clone());
    }
    Ok(Outcome::ok(vec![Artifact::csv("oracle_compare.csv", csv), Artifact::json("oracle_summary.json", &summary)], summary))
}

fn compare_born(ctx: &Context) -> Result<Outcome, Failure> {
    let (v, k) = (ctx.v, ctx.cfg.k);
    compare_pairs(ctx, "born", |n0, n| born_amplitude(v, k, n0.components(), n.components()), json!({}))
}

fn compare_partial_wave(ctx: &Context) -> Result<Outcome, Failure> {
    let PotentialModel::CircularWell { depth, radius, center_x } = *ctx.v else {
        return Err(Failure::invalid("InvalidConfig", "the partial-wave oracle needs a circular_well potential".into()));
    };
    if ctx.cfg.d != 1 {
        return Err(Failure::invalid("InvalidConfig", "the partial-wave oracle needs d = 1".into()));
    }
    let k = ctx.cfg.k;
    let pw = circular_well_2d(depth, radius, k, ctx.cfg.m_max)?;
    let extra = json!({ "m_max": ctx.cfg.m_max, "tail_bound": pw.tail_bound, "tail_flagged": pw.flagged });
    compare_pairs(
        ctx,
        "partial_wave",
        |n0, n| {
            let (a, b) = (n0.components(), n.components());
            let theta = b[1].atan2(b[0]) - a[1].atan2(a[0]);
            // Moving the well to x = c multiplies f by e^{-ik(n - n₀)ₓ c}.
            let shift = C64::from_polar(1.0, -k * (b[0] - a[0]) * center_x);
            Ok(pw.amplitude(theta) * shift)
        },
        extra,
    )
}
