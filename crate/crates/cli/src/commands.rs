use crate::config::{parse_range, RunConfig};
use crate::output::{f, OutDir};
use crate::CliError;
use pwave_core::dynamics::{
    cavity_output, classify_dynamical_phase, extract_mu_inf, long_time_stats, osc_frequency, run_quench,
    CavityReadout, Classification, ClassifyThresholds, DynPhase, LongTimeStats, MuInf, QuenchSpec, Trace, Window,
};
use pwave_core::groundstate::{
    chern_discrete, chern_equilibrium, ground_branch, solve_d, solve_p, texture_from_solution, Branch, KTexture,
    MFSolution,
};
use pwave_core::lattice::{build_grid, momentum_grid, Ensemble, LatticeGrid, LevelSet, MomentumGrid};
use pwave_core::lax::{isolated_roots, phase_diagram_boundaries, LaxClassification};
use pwave_core::prep::{evolve_prep, fidelity, initial_state, optimize_ramp_best, OptimizeOptions};
use pwave_core::stability::{chi_d_stability, chi_p_stability, regime, stability_scan, ScanOptions};
use pwave_core::validity::validate_regime;
use pwave_core::{Complex64, Error};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};
use std::f64::consts::PI;
use std::sync::Mutex;

pub struct Lattice {
    pub grid: LatticeGrid,
    pub mg: MomentumGrid,
}

impl Lattice {
    pub fn new(cfg: &RunConfig) -> Result<Self, CliError> {
        let grid = build_grid(cfg.n_x, cfg.n_y)?;
        let mg = momentum_grid(&grid);
        Ok(Lattice { grid, mg })
    }

    pub fn levels(&self) -> &LevelSet {
        &self.mg.levels
    }
}

fn pure_p(q: &QuenchSpec) -> bool {
    q.chi_p_i > 0.0 && q.chi_d_i == 0.0 && q.chi_d_f == 0.0 && q.eps_d == 0.0 && q.eps_p == 0.0
}

/// `auto` uses the exact level reduction for pure p quenches and the
/// level × phase cells otherwise.
pub fn ensemble_for(cfg: &RunConfig, lat: &Lattice, q: &QuenchSpec) -> Ensemble {
    match cfg.ensemble.as_str() {
        "sites" => Ensemble::sites(&lat.grid),
        "cells" => Ensemble::cells(&lat.mg),
        "levels" if pure_p(q) => Ensemble::levels(lat.levels(), 1),
        "auto" if pure_p(q) => Ensemble::levels(lat.levels(), 1),
        _ => Ensemble::cells(&lat.mg),
    }
}

pub fn quench_spec(cfg: &RunConfig) -> QuenchSpec {
    QuenchSpec {
        chi_p_i: cfg.chi_p_i,
        chi_d_i: cfg.chi_d_i,
        chi_p_f: cfg.chi_p_f,
        chi_d_f: cfg.chi_d_f,
        eps_d: cfg.eps_d,
        eps_p: cfg.eps_p,
        t_final: 2.0 * PI * cfg.periods,
        dt: cfg.dt,
        stride: cfg.stride,
    }
}

pub fn thresholds(cfg: &RunConfig) -> ClassifyThresholds {
    ClassifyThresholds { a_tol: cfg.a_tol, s_tol: cfg.s_tol, iii_star_std: cfg.iii_star_std, ..Default::default() }
}

#[derive(Debug, Clone, Serialize)]
pub struct QuenchAnalysis {
    pub delta_p0: f64,
    pub delta_d0: f64,
    pub mu0: f64,
    pub window: Window,
    pub stats: LongTimeStats,
    pub mu_inf: MuInf,
    pub f_osc: Option<f64>,
    pub heuristic: Classification,
    pub lax_label: Option<DynPhase>,
    pub label: DynPhase,
}

/// Statistics and labels of a finished run. The Lax label, when available,
/// settles III versus III*.
pub fn analyse(trace: &Trace, sol: &MFSolution, lat: &Lattice, th: &ClassifyThresholds, lax: Option<&LaxClassification>) -> QuenchAnalysis {
    let window = Window::recurrence_aware(trace, &lat.levels().eta, 1.0);
    let stats = long_time_stats(trace, &window);
    let mu_inf = extract_mu_inf(trace, &window);
    let d0 = trace.delta_p.first().map(|z| z.norm()).unwrap_or(0.0);
    let scale = if d0 > 0.0 { d0 } else { sol.delta_p.norm().max(sol.delta_d.norm()) };
    let heuristic = classify_dynamical_phase(&stats, &mu_inf, scale, th, None);
    let lax_label = lax.map(|l| l.label);
    let lax_star = lax_label.map(|l| l == DynPhase::IIIStar);
    let label = classify_dynamical_phase(&stats, &mu_inf, scale, th, lax_star).label;
    QuenchAnalysis {
        delta_p0: trace.delta_p.first().map(|z| z.norm()).unwrap_or(0.0),
        delta_d0: trace.delta_d.first().map(|z| z.norm()).unwrap_or(0.0),
        mu0: sol.mu,
        window,
        stats,
        mu_inf,
        f_osc: osc_frequency(trace, &window).ok(),
        heuristic,
        lax_label,
        label,
    }
}

pub const TRACE_HEADER: [&str; 9] = [
    "t[1/J]",
    "re_delta_p[J]",
    "im_delta_p[J]",
    "re_delta_d[J]",
    "im_delta_d[J]",
    "n_c[pairs]",
    "energy[J]",
    "re_alpha_b",
    "im_alpha_b",
];

pub fn trace_rows(trace: &Trace, alpha: Option<&[Complex64]>) -> Vec<Vec<String>> {
    (0..trace.len())
        .map(|k| {
            let (ar, ai) = match alpha {
                Some(a) => (f(a[k].re), f(a[k].im)),
                None => (String::new(), String::new()),
            };
            vec![
                f(trace.times[k]),
                f(trace.delta_p[k].re),
                f(trace.delta_p[k].im),
                f(trace.delta_d[k].re),
                f(trace.delta_d[k].im),
                f(trace.n_c[k]),
                f(trace.energy[k]),
                ar,
                ai,
            ]
        })
        .collect()
}

#[derive(Serialize)]
struct TraceJson<'a> {
    units: &'a [&'a str; 9],
    t: &'a [f64],
    delta_p: Vec<[f64; 2]>,
    delta_d: Vec<[f64; 2]>,
    n_c: &'a [f64],
    energy: &'a [f64],
    alpha_b: Option<Vec<[f64; 2]>>,
}

pub fn write_trace(out: &mut OutDir, stem: &str, trace: &Trace, alpha: Option<&[Complex64]>) -> Result<(), CliError> {
    out.csv(&format!("{stem}.csv"), &TRACE_HEADER, &trace_rows(trace, alpha))?;
    let pair = |v: &[Complex64]| v.iter().map(|z| [z.re, z.im]).collect::<Vec<_>>();
    out.json(
        &format!("{stem}.json"),
        &TraceJson {
            units: &TRACE_HEADER,
            t: &trace.times,
            delta_p: pair(&trace.delta_p),
            delta_d: pair(&trace.delta_d),
            n_c: &trace.n_c,
            energy: &trace.energy,
            alpha_b: alpha.map(pair),
        },
    )?;
    Ok(())
}

pub fn ground(cfg: &RunConfig, out: &mut OutDir) -> Result<Value, CliError> {
    let lat = Lattice::new(cfg)?;
    let gb = ground_branch(cfg.chi_p, cfg.chi_d, cfg.n_c, lat.levels())?;
    let sol = gb.solution;
    let params = cfg.model(cfg.chi_p, cfg.chi_d);
    let ens = Ensemble::cells(&lat.mg);
    let state = texture_from_solution(&sol, &params, &ens, 0.0, 0.0)?;
    let chern = chern_discrete(&KTexture::from_cells(&ens, &state, &lat.mg)?)?;
    let report = if cfg.chi_p > 0.0 || cfg.chi_d > 0.0 { Some(regime(cfg.chi_p, cfg.chi_d, cfg.n_c, lat.levels())?) } else { None };
    let q = match sol.branch {
        Branch::DOnly => 2,
        _ => 1,
    };
    let gap = sol.delta_p.norm().max(sol.delta_d.norm());
    let rows: Vec<Vec<String>> = lat
        .levels()
        .iter()
        .map(|(eta, w)| {
            let xi = eta * eta - sol.mu;
            let g = gap * eta.powi(q);
            let e = (xi * xi + g * g).sqrt();
            let (sp, sz) = if e == 0.0 { (0.0, 0.5) } else { (g / (2.0 * e), -xi / (2.0 * e)) };
            vec![f(eta), f(w), f(xi), f(e), f(sp), f(sz)]
        })
        .collect();
    out.csv("texture.csv", &["eta", "weight", "xi[J]", "E[J]", "s_perp", "s_z"], &rows)?;
    let summary = json!({
        "solution": sol,
        "e_p": gb.e_p,
        "e_d": gb.e_d,
        "on_first_order_line": gb.on_first_order_line,
        "chern_equilibrium": chern_equilibrium(&sol),
        "chern_discrete": chern.value,
        "chern_raw": chern.raw,
        "stability": report,
    });
    out.json("ground.json", &summary)?;
    Ok(summary)
}

fn lax_for(cfg: &RunConfig, q: &QuenchSpec) -> Option<LaxClassification> {
    if !pure_p(q) || q.chi_p_f <= 0.0 {
        return None;
    }
    isolated_roots(q.chi_p_i, q.chi_p_f, cfg.n_c, &LevelSet::midpoint(cfg.lax_levels)).ok()
}

pub fn quench(cfg: &RunConfig, out: &mut OutDir) -> Result<Value, CliError> {
    let lat = Lattice::new(cfg)?;
    let q = quench_spec(cfg);
    let ens = ensemble_for(cfg, &lat, &q);
    let base = cfg.model(cfg.chi_p_i, cfg.chi_d_i);
    let (trace, sol) = run_quench(&base, &q, &ens, lat.levels())?;
    let readout = (cfg.readout_g_p != 0.0 || cfg.readout_g_d != 0.0).then(|| CavityReadout {
        g_p: Complex64::new(cfg.readout_g_p, 0.0),
        g_d: Complex64::new(cfg.readout_g_d, 0.0),
        delta_a: cfg.readout_delta_a,
        delta_b: cfg.readout_delta_b,
        kappa: cfg.readout_kappa,
    });
    let cav = readout.map(|r| cavity_output(&trace, &r));
    write_trace(out, "trace", &trace, cav.as_ref().map(|c| c.alpha_b.as_slice()))?;
    let lax = lax_for(cfg, &q);
    let a = analyse(&trace, &sol, &lat, &thresholds(cfg), lax.as_ref());
    let summary = json!({
        "ensemble": format!("{:?}", ens.kind),
        "members": ens.len(),
        "label": a.label.as_str(),
        "analysis": a,
        "photons_p": cav.as_ref().map(|c| c.photons_p),
        "photons_d": cav.as_ref().map(|c| c.photons_d),
        "max_norm_drift": trace.max_norm_drift,
    });
    out.json("classification.json", &summary)?;
    Ok(summary)
}

#[derive(Debug, Clone, Serialize)]
pub struct CellRecord {
    pub index: usize,
    pub chi_p_i: f64,
    pub chi_p_f: f64,
    pub status: String,
    pub label: Option<String>,
    pub lax_label: Option<String>,
    pub avg_p: Option<f64>,
    pub std_p: Option<f64>,
    pub mu_inf: Option<f64>,
    pub error: Option<String>,
    pub file: Option<String>,
}

#[derive(Serialize)]
struct SweepManifest<'a> {
    complete: bool,
    cells: &'a [CellRecord],
}

/// Quench grid over `sweep_chi_i × sweep_chi_f`. The manifest is rewritten
/// after every finished cell so an interrupted sweep leaves a consistent record.
pub fn sweep(cfg: &RunConfig, out: &mut OutDir) -> Result<Value, CliError> {
    let lat = Lattice::new(cfg)?;
    let ci = parse_range(&cfg.sweep_chi_i)?;
    let cf = parse_range(&cfg.sweep_chi_f)?;
    let pairs: Vec<(f64, f64)> = ci.iter().flat_map(|&a| cf.iter().map(move |&b| (a, b))).collect();
    let records: Vec<CellRecord> = pairs
        .iter()
        .enumerate()
        .map(|(index, &(a, b))| CellRecord {
            index,
            chi_p_i: a,
            chi_p_f: b,
            status: "pending".into(),
            label: None,
            lax_label: None,
            avg_p: None,
            std_p: None,
            mu_inf: None,
            error: None,
            file: None,
        })
        .collect();
    let cells_dir = Mutex::new(out.sub("cells")?);
    out.json("sweep_manifest.json", &SweepManifest { complete: false, cells: &records })?;
    let state = Mutex::new((records, &mut *out));
    let th = thresholds(cfg);
    (0..pairs.len()).into_par_iter().for_each(|k| {
        let (a, b) = pairs[k];
        let mut c = cfg.clone();
        c.chi_p_i = a;
        c.chi_p_f = b;
        c.chi_d_i = 0.0;
        c.chi_d_f = 0.0;
        c.eps_d = 0.0;
        c.eps_p = 0.0;
        let q = quench_spec(&c);
        let ens = ensemble_for(&c, &lat, &q);
        let res = run_quench(&c.model(a, 0.0), &q, &ens, lat.levels()).map(|(trace, sol)| {
            let lax = lax_for(&c, &q);
            analyse(&trace, &sol, &lat, &th, lax.as_ref())
        });
        let name = format!("cell_{k:05}.json");
        let (status, file, err) = match &res {
            Ok(an) => {
                let written = cells_dir.lock().unwrap().json(&name, &json!({ "chi_p_i": a, "chi_p_f": b, "analysis": an }));
                match written {
                    Ok(()) => ("ok", Some(format!("cells/{name}")), None),
                    Err(e) => ("failed", None, Some(e.to_string())),
                }
            }
            Err(e) => ("failed", None, Some(e.to_string())),
        };
        let mut guard = state.lock().unwrap();
        let (records, out) = &mut *guard;
        let r = &mut records[k];
        r.status = status.into();
        r.file = file;
        r.error = err;
        if let Ok(a) = &res {
            r.label = Some(a.label.as_str().into());
            r.lax_label = a.lax_label.map(|l| l.as_str().into());
            r.avg_p = Some(a.stats.avg_p);
            r.std_p = Some(a.stats.std_p);
            r.mu_inf = Some(a.mu_inf.mu_inf);
        }
        // best effort: a failed rewrite is caught by the final write below
        let _ = out.json("sweep_manifest.json", &SweepManifest { complete: false, cells: records });
    });
    let (records, out) = state.into_inner().unwrap();
    out.json("sweep_manifest.json", &SweepManifest { complete: true, cells: &records })?;
    let opt = |x: Option<f64>| x.map(f).unwrap_or_default();
    let rows: Vec<Vec<String>> = records
        .iter()
        .map(|r| {
            vec![
                r.index.to_string(),
                f(r.chi_p_i),
                f(r.chi_p_f),
                r.status.clone(),
                r.label.clone().unwrap_or_default(),
                r.lax_label.clone().unwrap_or_default(),
                opt(r.avg_p),
                opt(r.std_p),
                opt(r.mu_inf),
            ]
        })
        .collect();
    out.csv(
        "sweep.csv",
        &["index", "chi_p_i", "chi_p_f", "status", "label", "lax_label", "avg_abs_delta_p[J]", "std_abs_delta_p[J]", "mu_inf[J]"],
        &rows,
    )?;
    let failed = records.iter().filter(|r| r.status != "ok").count();
    let summary = json!({ "cells": records.len(), "failed": failed });
    if failed > 0 {
        return Err(CliError::Partial(summary));
    }
    Ok(summary)
}

pub fn stability(cfg: &RunConfig, out: &mut OutDir) -> Result<Value, CliError> {
    let lat = Lattice::new(cfg)?;
    let cp = parse_range(&cfg.stab_chi_p)?;
    let cd = parse_range(&cfg.stab_chi_d)?;
    let branch = if cfg.stab_branch == "d_only" { Branch::DOnly } else { Branch::POnly };
    let opts = ScanOptions {
        branch,
        eps: cfg.stab_eps,
        periods: cfg.stab_periods,
        loss: cfg.loss_p,
        stride: cfg.stride,
        steps_per_period: cfg.stab_steps_per_period,
    };
    let pts = stability_scan(&cp, &cd, cfg.n_c, &lat.mg, &opts)?;
    let rows: Vec<Vec<String>> = pts
        .iter()
        .map(|p| {
            vec![
                f(p.chi_p),
                f(p.chi_d),
                f(p.delta_0),
                f(p.avg_dp),
                f(p.avg_dd),
                f(p.seed_ratio),
                p.stable.to_string(),
                p.analytic_stable.to_string(),
                p.indeterminate.to_string(),
            ]
        })
        .collect();
    out.csv(
        "stability.csv",
        &["chi_p", "chi_d", "delta_0[J]", "avg_abs_delta_p[J]", "avg_abs_delta_d[J]", "seed_ratio", "stable", "analytic_stable", "indeterminate"],
        &rows,
    )?;
    let boundary = analytic_boundary(cfg, &lat, branch, if branch == Branch::POnly { &cp } else { &cd })?;
    out.csv("stability_boundary.csv", &["chi", "chi_stab"], &boundary)?;
    let disagree = pts.iter().filter(|p| !p.indeterminate && p.stable != p.analytic_stable).count();
    let summary = json!({
        "branch": branch.as_str(),
        "points": pts.len(),
        "disagreements_outside_boundary_band": disagree,
    });
    Ok(summary)
}

/// Analytic stability boundary along the prepared branch's own coupling.
pub fn analytic_boundary(cfg: &RunConfig, lat: &Lattice, branch: Branch, chi: &[f64]) -> Result<Vec<Vec<String>>, CliError> {
    chi.iter()
        .map(|&x| {
            let v = if branch == Branch::POnly {
                let sol = solve_p(&cfg.model(x, 0.0), lat.levels())?;
                chi_d_stability(&sol, lat.levels(), 1.0)?
            } else {
                let sol = solve_d(&cfg.model(0.0, x), lat.levels())?;
                chi_p_stability(&sol, lat.levels(), 1.0)?
            };
            Ok(vec![f(x), f(v)])
        })
        .collect()
}

pub fn lax_roots_rows(l: &LaxClassification) -> Vec<Vec<String>> {
    l.roots
        .iter()
        .map(|u| {
            let iso = l.isolated.iter().any(|v| (v - u).norm() == 0.0);
            vec![f(u.re), f(u.im), iso.to_string()]
        })
        .collect()
}

pub fn lax(cfg: &RunConfig, out: &mut OutDir) -> Result<Value, CliError> {
    let levels = LevelSet::midpoint(cfg.lax_levels);
    let l = isolated_roots(cfg.chi_p_i, cfg.chi_p_f, cfg.n_c, &levels)?;
    out.csv("roots.csv", &["re_u[J]", "im_u[J]", "isolated"], &lax_roots_rows(&l))?;
    let chi_i = parse_range(&cfg.lax_boundary_chi_i)?;
    let b = phase_diagram_boundaries(cfg.n_c, &chi_i)?;
    let rows: Vec<Vec<String>> =
        b.curves.iter().flat_map(|c| c.points.iter().map(|&(x, y)| vec![c.name.clone(), f(x), f(y)])).collect();
    out.csv("boundaries.csv", &["curve", "chi_p_i", "chi_p_f"], &rows)?;
    let summary = json!({
        "label": l.label.as_str(),
        "isolated_pairs": l.isolated_pairs,
        "kinds": l.kinds,
        "isolated": l.isolated.iter().map(|z| [z.re, z.im]).collect::<Vec<_>>(),
        "u_zero_isolated": l.u_zero_isolated,
    });
    out.json("lax.json", &summary)?;
    Ok(summary)
}

pub fn prep(cfg: &RunConfig, out: &mut OutDir) -> Result<Value, CliError> {
    let lat = Lattice::new(cfg)?;
    let gb = ground_branch(cfg.chi_p, cfg.chi_d, cfg.n_c, lat.levels())?;
    let sol = gb.solution;
    let params = cfg.model(cfg.chi_p, cfg.chi_d);
    let winding = match sol.branch {
        Branch::POnly => 1,
        Branch::DOnly => 2,
        _ => return Err(Error::InvalidInput("prep needs a pure p or d target".into()).into()),
    };
    let opts = OptimizeOptions {
        t_prep: cfg.prep_t_prep,
        n_segments: cfg.prep_segments,
        budget: cfg.prep_budget,
        steps: cfg.prep_steps,
        seed: cfg.seed,
        scale: cfg.prep_scale,
        target_infidelity: cfg.prep_target_infidelity,
    };
    let lv = Ensemble::levels(lat.levels(), winding);
    let best = optimize_ramp_best(&sol, &params, &lv, &opts)?;
    out.json("schedule.json", &best.schedule)?;
    let sites = Ensemble::sites(&lat.grid);
    let target = texture_from_solution(&sol, &params, &sites, 0.0, 0.0)?;
    let fin = evolve_prep(&initial_state(sol.mu, sites.len()), &best.schedule, &sites, opts.steps)?;
    let (avg, per) = fidelity(&fin, &target, None)?;
    let rows: Vec<Vec<String>> = (0..sites.len())
        .map(|i| vec![i.to_string(), f(sites.eta[i]), f(sites.phi[i]), f(per[i]), f(fin.s[i][2]), f(target.s[i][2])])
        .collect();
    out.csv("fidelity.csv", &["site", "eta", "phi", "fidelity", "s_z", "s_z_target"], &rows)?;
    let worst = per.iter().copied().fold(1.0, f64::min);
    let summary = json!({
        "target_branch": sol.branch.as_str(),
        "evaluations": best.evaluations,
        "f_avg_optimized_members": best.f_avg,
        "f_avg_sites": avg,
        "max_infidelity_sites": 1.0 - worst,
        "target_infidelity": opts.target_infidelity,
    });
    out.json("prep.json", &summary)?;
    if 1.0 - worst >= opts.target_infidelity {
        return Err(CliError::Solver(Error::BudgetExhausted { best: avg }, Some(summary)));
    }
    Ok(summary)
}

pub fn validate(cfg: &RunConfig, out: &mut OutDir) -> Result<Value, CliError> {
    let r = validate_regime(&cfg.phys, cfg.validity_factor);
    let rows: Vec<Vec<String>> = r
        .checks
        .iter()
        .map(|c| vec![c.group.clone(), c.name.clone(), f(c.big), f(c.small), f(c.big.abs() / c.small.abs()), c.pass.to_string()])
        .collect();
    out.csv("validity.csv", &["group", "inequality", "big", "small", "ratio", "pass"], &rows)?;
    out.json("validity.json", &r)?;
    Ok(json!({
        "all_pass": r.all_pass(),
        "failed": r.checks.iter().filter(|c| !c.pass).map(|c| c.name.clone()).collect::<Vec<_>>(),
        "couplings": r.couplings,
    }))
}
