//! Linear stability of the pure branches against the competing channel.

use crate::dynamics::{default_dt, integrate, long_time_stats, Model, Window};
use crate::groundstate::{solve_d, solve_p, texture_from_solution, Branch, MFSolution, ModelParams};
use crate::lattice::{Ensemble, LevelSet, MomentumGrid};
use crate::par::map_jobs;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Sums `(S1, S2)` of the linear response of the competing channel:
/// `S1 = Σ w η^{2a}/2E`, `S2 = Σ w Δ²η⁶/4E³`, with `E² = ξ² + Δ²η^{2q}`.
fn response_sums(sol: &MFSolution, levels: &LevelSet, j: f64) -> Result<(f64, f64, i32)> {
    let (delta, q, a) = match sol.branch {
        Branch::POnly => (sol.delta_p.norm(), 1, 2),
        Branch::DOnly => (sol.delta_d.norm(), 2, 1),
        _ => return Err(Error::InvalidInput("stability needs a pure branch".into())),
    };
    let d2 = delta * delta;
    let (mut s1, mut s2) = (0.0, 0.0);
    for (e, w) in levels.iter() {
        let xi = j * e * e - sol.mu;
        let en = (xi * xi + d2 * e.powi(2 * q)).sqrt();
        s1 += w * e.powi(2 * a) / (2.0 * en);
        s2 += w * d2 * e.powi(6) / (4.0 * en * en * en);
    }
    Ok((s1, s2, q))
}

/// p-branch boundary `χ_{d,stab}N = N/(S1 − S2)`.
pub fn chi_d_stability(p_sol: &MFSolution, levels: &LevelSet, j: f64) -> Result<f64> {
    if p_sol.branch != Branch::POnly {
        return Err(Error::InvalidInput("expected a p-wave solution".into()));
    }
    let (s1, s2, _) = response_sums(p_sol, levels, j)?;
    Ok(levels.total_weight() / (s1 - s2))
}

/// d-branch boundary `χ_{p,stab}N = N/(S1 − S2)`.
pub fn chi_p_stability(d_sol: &MFSolution, levels: &LevelSet, j: f64) -> Result<f64> {
    if d_sol.branch != Branch::DOnly {
        return Err(Error::InvalidInput("expected a d-wave solution".into()));
    }
    let (s1, s2, _) = response_sums(d_sol, levels, j)?;
    Ok(levels.total_weight() / (s1 - s2))
}

/// Positivity certificate `f` of the second-derivative test, with the seeded
/// amplitude ratio replaced by its linear-response value `S1 − S2`.
pub fn stability_certificate(sol: &MFSolution, levels: &LevelSet, j: f64) -> Result<f64> {
    let (s1, s2, q) = response_sums(sol, levels, j)?;
    let delta = if q == 1 { sol.delta_p.norm() } else { sol.delta_d.norm() };
    let a = if q == 1 { 4 } else { 2 };
    let d2 = delta * delta;
    let (mut t1, mut t2) = (0.0, 0.0);
    for (e, w) in levels.iter() {
        let x = sol.mu - j * e * e;
        let en = (x * x + d2 * e.powi(2 * q)).sqrt();
        t1 += w * (x * x * e.powi(a) + 0.5 * d2 * e.powi(6)) / en;
        t2 += w * x * e.powi(a) / en;
    }
    Ok(2.0 * (s1 - s2) * t1 - t2 * t2)
}

/// Leading-order `d²|Δ_c|²/dt²` at `t = 0` for a branch seeded with `eps` of
/// the competing channel `c` coupled with `chi_c_n`.
pub fn second_derivative_prediction(sol: &MFSolution, levels: &LevelSet, j: f64, chi_c_n: f64, eps: f64) -> Result<f64> {
    let (s1, s2, q) = response_sums(sol, levels, j)?;
    let n = levels.total_weight();
    let chi = chi_c_n / n;
    let delta = if q == 1 { sol.delta_p.norm() } else { sol.delta_d.norm() };
    let f = stability_certificate(sol, levels, j)?;
    Ok(-2.0 * (chi * delta * eps).powi(2) * (1.0 - chi * (s1 - s2)) * f)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    PWave,
    DWave,
    Coexistence,
    /// Neither pure branch is stable.
    Neither,
}

impl Regime {
    pub fn as_str(&self) -> &'static str {
        match self {
            Regime::PWave => "p+ip",
            Regime::DWave => "d+id",
            Regime::Coexistence => "coexistence",
            Regime::Neither => "neither",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    /// `χ_{d,stab}N` of the p branch (infinite without a p solution).
    pub chi_d_stab: f64,
    /// `χ_{p,stab}N` of the d branch.
    pub chi_p_stab: f64,
    pub regime: Regime,
    pub f_p_value: f64,
    pub f_d_value: f64,
}

/// Stability regime at `(χ_pN, χ_dN)`.
pub fn regime(chi_p_n: f64, chi_d_n: f64, n_c: f64, levels: &LevelSet) -> Result<StabilityReport> {
    let params = ModelParams::new(chi_p_n, chi_d_n, n_c);
    params.validate()?;
    let (chi_d_stab, f_p_value) = if chi_p_n > 0.0 {
        let sp = solve_p(&params, levels)?;
        (chi_d_stability(&sp, levels, params.j)?, stability_certificate(&sp, levels, params.j)?)
    } else {
        (0.0, f64::NAN)
    };
    let (chi_p_stab, f_d_value) = if chi_d_n > 0.0 {
        let sd = solve_d(&params, levels)?;
        (chi_p_stability(&sd, levels, params.j)?, stability_certificate(&sd, levels, params.j)?)
    } else {
        (0.0, f64::NAN)
    };
    let p_ok = chi_p_n > 0.0 && chi_d_n < chi_d_stab;
    let d_ok = chi_d_n > 0.0 && chi_p_n < chi_p_stab;
    let regime = match (p_ok, d_ok) {
        (true, true) => Regime::Coexistence,
        (true, false) => Regime::PWave,
        (false, true) => Regime::DWave,
        (false, false) => Regime::Neither,
    };
    Ok(StabilityReport { chi_d_stab, chi_p_stab, regime, f_p_value, f_d_value })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanOptions {
    /// Branch that is prepared and seeded with the competing channel.
    pub branch: Branch,
    pub eps: f64,
    /// Evolution time in units of `2π/J`.
    pub periods: f64,
    pub loss: f64,
    pub stride: usize,
    /// Steps per fastest precession period.
    pub steps_per_period: f64,
}

impl Default for ScanOptions {
    fn default() -> Self {
        ScanOptions { branch: Branch::POnly, eps: 1e-2, periods: 50.0, loss: 0.0, stride: 20, steps_per_period: 400.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanPoint {
    pub chi_p: f64,
    pub chi_d: f64,
    /// Order parameter of the prepared branch at `t = 0`.
    pub delta_0: f64,
    pub avg_dp: f64,
    pub avg_dd: f64,
    /// Long-time average of the competing channel over its seeded value at `t = 0`.
    pub seed_ratio: f64,
    /// Dynamics verdict: the prepared channel keeps at least half its start and the
    /// seeded perturbation dephases below half its start. Slow instabilities at weak
    /// coupling never collapse the prepared gap within the run, but their seed does
    /// not dephase either.
    pub stable: bool,
    /// Analytic verdict from the boundary formula.
    pub analytic_stable: bool,
    /// Within two grid cells of the analytic boundary.
    pub indeterminate: bool,
}

/// Evolve one seeded texture and return its trace (cells ensemble).
pub fn seeded_run(
    chi_p_n: f64,
    chi_d_n: f64,
    n_c: f64,
    mg: &MomentumGrid,
    opts: &ScanOptions,
) -> Result<(crate::dynamics::Trace, MFSolution)> {
    let params = ModelParams::new(chi_p_n, chi_d_n, n_c).with_loss(opts.loss, opts.loss);
    let ens = Ensemble::cells(mg);
    let (sol, eps_d, eps_p) = match opts.branch {
        Branch::POnly => (solve_p(&params, &mg.levels)?, opts.eps, 0.0),
        Branch::DOnly => (solve_d(&params, &mg.levels)?, 0.0, opts.eps),
        _ => return Err(Error::InvalidInput("scan branch must be p_only or d_only".into())),
    };
    let mut state = texture_from_solution(&sol, &params, &ens, eps_d, eps_p)?;
    let dt = default_dt(&params) * crate::dynamics::DEFAULT_STEPS_PER_PERIOD / opts.steps_per_period;
    let model = Model::new(&params, &ens);
    let trace = integrate(&model, &mut state, 2.0 * PI * opts.periods, dt, opts.stride)?;
    Ok((trace, sol))
}

fn spacing(v: &[f64]) -> f64 {
    let mut d: Vec<f64> = v.windows(2).map(|w| (w[1] - w[0]).abs()).filter(|x| *x > 0.0).collect();
    d.sort_by(|a, b| a.total_cmp(b));
    d.get(d.len() / 2).copied().unwrap_or(f64::INFINITY)
}

/// Numeric stability map over `chi_p × chi_d`, points evaluated in parallel.
pub fn stability_scan(
    chi_p: &[f64],
    chi_d: &[f64],
    n_c: f64,
    mg: &MomentumGrid,
    opts: &ScanOptions,
) -> Result<Vec<ScanPoint>> {
    let cells: Vec<(f64, f64)> = chi_p.iter().flat_map(|&p| chi_d.iter().map(move |&d| (p, d))).collect();
    let (hp, hd) = (spacing(chi_p), spacing(chi_d));
    let results = map_jobs(&cells, |&(cp, cd)| -> Result<ScanPoint> {
        let (trace, sol) = seeded_run(cp, cd, n_c, mg, opts)?;
        let st = long_time_stats(&trace, &Window::second_half(&trace));
        let p_branch = opts.branch == Branch::POnly;
        let (delta_0, avg) = if p_branch { (sol.delta_p.norm(), st.avg_p) } else { (sol.delta_d.norm(), st.avg_d) };
        let (seed, avg_seed) = if p_branch { (trace.delta_d[0].norm(), st.avg_d) } else { (trace.delta_p[0].norm(), st.avg_p) };
        let seed_ratio = if seed > 0.0 { avg_seed / seed } else { 0.0 };
        let (bound, x, h) = if p_branch {
            (chi_d_stability(&sol, &mg.levels, 1.0)?, cd, hd)
        } else {
            (chi_p_stability(&sol, &mg.levels, 1.0)?, cp, hp)
        };
        Ok(ScanPoint {
            chi_p: cp,
            chi_d: cd,
            delta_0,
            avg_dp: st.avg_p,
            avg_dd: st.avg_d,
            seed_ratio,
            stable: avg >= 0.5 * delta_0 && seed_ratio < 0.5,
            analytic_stable: x < bound,
            indeterminate: (x - bound).abs() < 2.0 * h,
        })
    });
    results.into_iter().collect()
}
