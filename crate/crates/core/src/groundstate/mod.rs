//! Self-consistent mean-field branches, energies, textures and Chern numbers.

mod chern;

pub use chern::{chern_discrete, ChernDiscrete, KTexture};

use crate::dynamics::SpinState;
use crate::lattice::{Ensemble, EnsembleKind, LevelSet};
use crate::numeric::zeroin;
use crate::{Complex64, Error, Result};
use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Relative residual accepted for self-consistent solutions.
pub const SOLVE_TOL: f64 = 1e-10;
/// Order parameters below this (in units of `J`) count as zero.
pub const COLLAPSE_TOL: f64 = 1e-8;
const MU_SCALE: f64 = 1e-30;
const MU_Y_MAX: f64 = 95.0;

/// Model couplings. `chi_p_n` and `chi_d_n` are `χN` in frequency units, so
/// with `j = 1` they are the scaled couplings `χN/J`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub j: f64,
    pub chi_p_n: f64,
    pub chi_d_n: f64,
    pub n_c: f64,
    /// Cavity loss ratio `κ/|δ_c|` of the p channel; `Γ_p = loss_p·χ_p`.
    pub loss_p: f64,
    pub loss_d: f64,
}

impl ModelParams {
    pub fn new(chi_p_n: f64, chi_d_n: f64, n_c: f64) -> Self {
        ModelParams { j: 1.0, chi_p_n, chi_d_n, n_c, loss_p: 0.0, loss_d: 0.0 }
    }

    pub fn with_loss(mut self, loss_p: f64, loss_d: f64) -> Self {
        self.loss_p = loss_p;
        self.loss_d = loss_d;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidInput(m.to_string()));
        if !(self.j > 0.0) {
            return bad("J must be positive");
        }
        if !(self.chi_p_n >= 0.0 && self.chi_d_n >= 0.0) {
            return bad("couplings must be non-negative");
        }
        if !(self.n_c > 0.0 && self.n_c < 1.0) {
            return bad("n_c must lie in (0, 1)");
        }
        if !(self.loss_p >= 0.0 && self.loss_d >= 0.0) {
            return bad("loss ratios must be non-negative");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    Normal,
    POnly,
    DOnly,
    Mixed,
}

impl Branch {
    pub fn as_str(&self) -> &'static str {
        match self {
            Branch::Normal => "normal",
            Branch::POnly => "p_only",
            Branch::DOnly => "d_only",
            Branch::Mixed => "mixed",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MFSolution {
    pub branch: Branch,
    pub delta_p: Complex64,
    pub delta_d: Complex64,
    pub mu: f64,
    pub e_mf: f64,
    /// Largest relative residual of the self-consistency equations.
    pub residual: f64,
    /// Total weight `N` of the level set the solution was computed on.
    pub n_total: f64,
}

pub fn solve_normal(params: &ModelParams, levels: &LevelSet) -> MFSolution {
    let mu = params.j * (PI * params.n_c / 2.0).sin().powi(2);
    let n = levels.total_weight();
    let e_mf = -levels.iter().map(|(e, w)| w * (mu - params.j * e * e).abs()).sum::<f64>()
        - mu * (n - 2.0 * params.n_c * n);
    MFSolution {
        branch: Branch::Normal,
        delta_p: Complex64::new(0.0, 0.0),
        delta_d: Complex64::new(0.0, 0.0),
        mu,
        e_mf,
        residual: 0.0,
        n_total: n,
    }
}

/// Pure-branch sums for pairing weight `η^{2q}`: (N_C, Σ w η^{2q}/2E, Σ w E).
fn pure_sums(levels: &LevelSet, q: i32, j: f64, mu: f64, delta: f64) -> (f64, f64, f64) {
    let d2 = delta * delta;
    let mut nc = 0.0;
    let mut gap = 0.0;
    let mut esum = 0.0;
    for (e, w) in levels.iter() {
        let xi = j * e * e - mu;
        let k = e.powi(2 * q);
        let en = (xi * xi + d2 * k).sqrt();
        if en > 0.0 {
            nc += w * (0.5 - xi / (2.0 * en));
            gap += w * k / (2.0 * en);
        } else {
            nc += w * 0.5;
        }
        esum += w * en;
    }
    (nc, gap, esum)
}

fn mu_of_y(y: f64) -> f64 {
    MU_SCALE * y.sinh()
}

/// Chemical potential fixing the pair number at gap `delta`.
///
/// Searched in `μ = 10⁻³⁰·sinh(y)` so tiny and large magnitudes resolve to
/// the same relative precision.
fn solve_mu(levels: &LevelSet, q: i32, j: f64, n_c: f64, delta: f64) -> Result<f64> {
    let n = levels.total_weight();
    let y = zeroin(
        |y| pure_sums(levels, q, j, mu_of_y(y) * j, delta).0 / n - n_c,
        -MU_Y_MAX,
        MU_Y_MAX,
        1e-14,
    )?;
    Ok(mu_of_y(y) * j)
}

fn solve_pure(params: &ModelParams, levels: &LevelSet, q: i32) -> Result<MFSolution> {
    params.validate()?;
    let chi_n = if q == 1 { params.chi_p_n } else { params.chi_d_n };
    if !(chi_n > 0.0) {
        return Err(Error::InvalidInput("pure-branch solve needs a positive coupling".into()));
    }
    let n = levels.total_weight();
    let chi = chi_n / n;
    let j = params.j;
    let gap_res = |x: f64| -> f64 {
        let d = x.exp();
        match solve_mu(levels, q, j, params.n_c, d) {
            Ok(mu) => chi * pure_sums(levels, q, j, mu, d).1 - 1.0,
            Err(_) => f64::NAN,
        }
    };
    let lo = -60.0 + j.ln();
    let hi = (chi_n.max(j)).ln() + 1.0;
    let x = zeroin(gap_res, lo, hi, 1e-14).map_err(|e| match e {
        Error::NoRoot(_) => Error::NoRoot(format!("no paired solution for χN = {chi_n}")),
        other => other,
    })?;
    let delta = x.exp();
    let mu = solve_mu(levels, q, j, params.n_c, delta)?;
    let (nc, gap, esum) = pure_sums(levels, q, j, mu, delta);
    let residual = (chi * gap - 1.0).abs().max((nc / n - params.n_c).abs());
    if !(residual < SOLVE_TOL) {
        return Err(Error::NonConvergence { what: "pure-branch gap equations", residual });
    }
    let e_mf = -esum + delta * delta / chi - mu * (n - 2.0 * nc);
    let dz = Complex64::new(0.0, 0.0);
    let dv = Complex64::new(delta, 0.0);
    Ok(MFSolution {
        branch: if q == 1 { Branch::POnly } else { Branch::DOnly },
        delta_p: if q == 1 { dv } else { dz },
        delta_d: if q == 1 { dz } else { dv },
        mu,
        e_mf,
        residual,
        n_total: n,
    })
}

/// p-wave branch `(Δ_p, μ)`; independent of `χ_d`.
pub fn solve_p(params: &ModelParams, levels: &LevelSet) -> Result<MFSolution> {
    solve_pure(params, levels, 1)
}

/// d-wave branch `(Δ_d, μ)`; independent of `χ_p`.
pub fn solve_d(params: &ModelParams, levels: &LevelSet) -> Result<MFSolution> {
    solve_pure(params, levels, 2)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MixedOutcome {
    /// Both order parameters stay above the collapse threshold.
    Mixed(MFSolution),
    /// Newton iterates drove one channel to zero; carries the surviving pure branch.
    Collapsed(MFSolution),
}

/// `|Δ_n|²` and `Δ_n` for real `Δ_p`, `Δ_d` at one member.
#[inline]
fn local_gap(ens: &Ensemble, i: usize, dp: f64, dd: f64) -> Complex64 {
    ens.l_p[i].conj() * dp + ens.l_d[i].conj() * dd
}

/// Energy `E_MF` for arbitrary real order parameters on a full-ring ensemble.
pub fn mf_energy_general(params: &ModelParams, ens: &Ensemble, dp: f64, dd: f64, mu: f64) -> f64 {
    let n = ens.total_weight();
    let mut esum = 0.0;
    let mut nc = 0.0;
    for i in 0..ens.len() {
        let xi = params.j * ens.eta[i] * ens.eta[i] - mu;
        let en = (xi * xi + local_gap(ens, i, dp, dd).norm_sqr()).sqrt();
        esum += ens.weight[i] * en;
        nc += ens.weight[i] * if en > 0.0 { 0.5 - xi / (2.0 * en) } else { 0.5 };
    }
    let mut e = -esum - mu * (n - 2.0 * nc);
    if params.chi_p_n > 0.0 {
        e += dp * dp * n / params.chi_p_n;
    }
    if params.chi_d_n > 0.0 {
        e += dd * dd * n / params.chi_d_n;
    }
    e
}

fn mixed_residual(params: &ModelParams, ens: &Ensemble, v: &Vector3<f64>) -> Vector3<f64> {
    let (dp, dd, mu) = (v[0].exp(), v[1].exp(), v[2]);
    let n = ens.total_weight();
    let (cp, cd) = (params.chi_p_n / n, params.chi_d_n / n);
    let r = dd / dp;
    let (mut gp, mut gd, mut nc) = (0.0, 0.0, 0.0);
    for i in 0..ens.len() {
        let e = ens.eta[i];
        let xi = params.j * e * e - mu;
        let en = (xi * xi + local_gap(ens, i, dp, dd).norm_sqr()).sqrt();
        let w = ens.weight[i];
        let c3 = e * e * e * ens.phi[i].cos();
        gp += w * (e * e + r * c3) / (2.0 * en);
        gd += w * (e.powi(4) + c3 / r) / (2.0 * en);
        nc += w * (0.5 - xi / (2.0 * en));
    }
    Vector3::new(1.0 - cp * gp, 1.0 - cd * gd, nc / n - params.n_c)
}

/// Mixed branch via damped Newton in `(ln Δ_p, ln Δ_d, μ)` on a full-ring
/// ensemble (sites or cells). Starts halfway between the pure solutions.
pub fn solve_mixed(params: &ModelParams, ens: &Ensemble, levels: &LevelSet) -> Result<MixedOutcome> {
    params.validate()?;
    if matches!(ens.kind, EnsembleKind::Levels { .. }) {
        return Err(Error::InvalidInput("mixed branch needs the φ ring".into()));
    }
    if params.chi_d_n == 0.0 {
        return solve_p(params, levels).map(MixedOutcome::Collapsed);
    }
    if params.chi_p_n == 0.0 {
        return solve_d(params, levels).map(MixedOutcome::Collapsed);
    }
    let sp = solve_p(params, levels)?;
    let sd = solve_d(params, levels)?;
    let mut v = Vector3::new((0.5 * sp.delta_p.re).ln(), (0.5 * sd.delta_d.re).ln(), 0.5 * (sp.mu + sd.mu));
    let mut f = mixed_residual(params, ens, &v);
    let floor = (COLLAPSE_TOL * params.j).ln();
    for _ in 0..200 {
        if v[0] < floor {
            return Ok(MixedOutcome::Collapsed(sd));
        }
        if v[1] < floor {
            return Ok(MixedOutcome::Collapsed(sp));
        }
        if f.amax() < 1e-12 {
            let (dp, dd, mu) = (v[0].exp(), v[1].exp(), v[2]);
            let n = ens.total_weight();
            return Ok(MixedOutcome::Mixed(MFSolution {
                branch: Branch::Mixed,
                delta_p: Complex64::new(dp, 0.0),
                delta_d: Complex64::new(dd, 0.0),
                mu,
                e_mf: mf_energy_general(params, ens, dp, dd, mu),
                residual: f.amax(),
                n_total: n,
            }));
        }
        let mut jac = Matrix3::zeros();
        for k in 0..3 {
            let h = 1e-7 * (1.0 + v[k].abs());
            let mut vp = v;
            let mut vm = v;
            vp[k] += h;
            vm[k] -= h;
            let col = (mixed_residual(params, ens, &vp) - mixed_residual(params, ens, &vm)) / (2.0 * h);
            jac.set_column(k, &col);
        }
        let step = match jac.lu().solve(&(-f)) {
            Some(s) => s,
            None => break,
        };
        let mut lam = 1.0;
        let f0 = f.norm();
        loop {
            let vt = v + step * lam;
            let ft = mixed_residual(params, ens, &vt);
            if ft.norm() < (1.0 - 1e-4 * lam) * f0 || lam < 1e-6 {
                v = vt;
                f = ft;
                break;
            }
            lam *= 0.5;
        }
    }
    Err(Error::NonConvergence { what: "mixed-branch Newton", residual: f.amax() })
}

/// `E_MF = −Σ E_n + Δ_p²/χ_p + Δ_d²/χ_d − μ(N − 2N_C)` on the solution's levels.
pub fn mf_energy(sol: &MFSolution, params: &ModelParams, levels: &LevelSet) -> f64 {
    match sol.branch {
        Branch::Normal => solve_normal(params, levels).e_mf,
        Branch::POnly | Branch::DOnly => {
            let q = if sol.branch == Branch::POnly { 1 } else { 2 };
            let (delta, chi_n) = if q == 1 {
                (sol.delta_p.norm(), params.chi_p_n)
            } else {
                (sol.delta_d.norm(), params.chi_d_n)
            };
            let n = levels.total_weight();
            let (nc, _, esum) = pure_sums(levels, q, params.j, sol.mu, delta);
            -esum + delta * delta * n / chi_n - sol.mu * (n - 2.0 * nc)
        }
        Branch::Mixed => sol.e_mf,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroundBranch {
    pub solution: MFSolution,
    /// Set when the two pure energies agree to 1e-9 relative.
    pub on_first_order_line: bool,
    pub e_p: Option<f64>,
    pub e_d: Option<f64>,
}

/// Lower-energy pure branch at `(χ_pN, χ_dN)`.
pub fn ground_branch(chi_p_n: f64, chi_d_n: f64, n_c: f64, levels: &LevelSet) -> Result<GroundBranch> {
    let params = ModelParams::new(chi_p_n, chi_d_n, n_c);
    params.validate()?;
    let sp = if chi_p_n > 0.0 { Some(solve_p(&params, levels)?) } else { None };
    let sd = if chi_d_n > 0.0 { Some(solve_d(&params, levels)?) } else { None };
    let (solution, tie) = match (sp, sd) {
        (None, None) => (solve_normal(&params, levels), false),
        (Some(p), None) => (p, false),
        (None, Some(d)) => (d, false),
        (Some(p), Some(d)) => {
            let tie = (p.e_mf - d.e_mf).abs() <= 1e-9 * p.e_mf.abs().max(d.e_mf.abs());
            (if p.e_mf <= d.e_mf { p } else { d }, tie)
        }
    };
    Ok(GroundBranch { solution, on_first_order_line: tie, e_p: sp.map(|s| s.e_mf), e_d: sd.map(|s| s.e_mf) })
}

/// `χ_{p,QCP}N/J = 1/(1/2 − n_c)`.
pub fn qcp_p(n_c: f64) -> Result<f64> {
    if !(n_c > 0.0 && n_c < 0.5) {
        return Err(Error::InvalidInput("p-wave QCP needs 0 < n_c < 1/2".into()));
    }
    Ok(1.0 / (0.5 - n_c))
}

/// `χ_{d,QCP}N/J = 1/(1/4 − n_c/2)`.
pub fn qcp_d(n_c: f64) -> Result<f64> {
    if !(n_c > 0.0 && n_c < 0.5) {
        return Err(Error::InvalidInput("d-wave QCP needs 0 < n_c < 1/2".into()));
    }
    Ok(1.0 / (0.25 - 0.5 * n_c))
}

/// Spin texture aligned with the self-consistent field, optionally seeded with
/// a small admixture of the competing channel (`eps_d` on the p branch,
/// `eps_p` on the d branch).
pub fn texture_from_solution(
    sol: &MFSolution,
    params: &ModelParams,
    ens: &Ensemble,
    eps_d: f64,
    eps_p: f64,
) -> Result<SpinState> {
    if let EnsembleKind::Levels { winding } = ens.kind {
        let ok = match sol.branch {
            Branch::POnly => winding == 1 && eps_d == 0.0,
            Branch::DOnly => winding == 2 && eps_p == 0.0,
            Branch::Normal => true,
            Branch::Mixed => false,
        };
        if !ok {
            return Err(Error::InvalidInput("texture does not have the ensemble's winding".into()));
        }
    }
    let (dp, dd) = match sol.branch {
        Branch::POnly => (sol.delta_p, sol.delta_p * eps_d),
        Branch::DOnly => (sol.delta_d * eps_p, sol.delta_d),
        _ => (sol.delta_p, sol.delta_d),
    };
    let s = (0..ens.len())
        .map(|i| {
            let gap = ens.l_p[i].conj() * dp + ens.l_d[i].conj() * dd;
            let xi = params.j * ens.eta[i] * ens.eta[i] - sol.mu;
            let en = (xi * xi + gap.norm_sqr()).sqrt();
            if en == 0.0 {
                [0.0, 0.0, 0.5]
            } else {
                [gap.re / (2.0 * en), -gap.im / (2.0 * en), -xi / (2.0 * en)]
            }
        })
        .collect();
    Ok(SpinState { s })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChernValue {
    Value(i32),
    /// `μ` within 1e-9·J of zero: the gap closes and the invariant is undefined.
    Critical,
}

pub fn chern_equilibrium(sol: &MFSolution) -> ChernValue {
    if sol.mu.abs() <= 1e-9 {
        return ChernValue::Critical;
    }
    let up = sol.mu > 0.0;
    match sol.branch {
        Branch::POnly => ChernValue::Value(if up { 1 } else { 0 }),
        Branch::DOnly => ChernValue::Value(if up { 2 } else { 0 }),
        Branch::Normal | Branch::Mixed => ChernValue::Critical,
    }
}
