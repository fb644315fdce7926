//! State preparation by driven single-spin rotations.
//!
//! Each pseudospin precesses as `dS/dt = S × B` in the drive field
//! `B^x − iB^y = Ω_p η e^{−iφ} + Ω_d η² e^{−2iφ}`, `B^z = δ − J'η²`.
//! Ending with `B ∝ B_self` of the target leaves every spin aligned with its
//! self-consistent field.

use crate::dynamics::SpinState;
use crate::groundstate::{texture_from_solution, Branch, MFSolution, ModelParams};
use crate::lattice::Ensemble;
use crate::par::{for_each_indexed, map_jobs};
use crate::{dot, norm, Error, Result, Vec3};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Controls {
    pub omega_p: f64,
    pub omega_d: f64,
    pub delta: f64,
    pub j_prime: f64,
}

impl Controls {
    fn lerp(&self, o: &Controls, a: f64) -> Controls {
        let m = |x: f64, y: f64| x + (y - x) * a;
        Controls {
            omega_p: m(self.omega_p, o.omega_p),
            omega_d: m(self.omega_d, o.omega_d),
            delta: m(self.delta, o.delta),
            j_prime: m(self.j_prime, o.j_prime),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Interpolation {
    PiecewiseConstant,
    PiecewiseLinear,
}

/// Drive controls over `[0, t_prep]`. With linear interpolation `knots` holds
/// `n + 1` equally spaced values; with constant interpolation it holds one
/// value per segment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RampSchedule {
    pub t_prep: f64,
    pub interpolation: Interpolation,
    pub knots: Vec<Controls>,
}

impl RampSchedule {
    pub fn constant(t_prep: f64, c: Controls) -> Self {
        RampSchedule { t_prep, interpolation: Interpolation::PiecewiseConstant, knots: vec![c] }
    }

    pub fn segments(&self) -> usize {
        match self.interpolation {
            Interpolation::PiecewiseConstant => self.knots.len(),
            Interpolation::PiecewiseLinear => self.knots.len().saturating_sub(1),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let need = match self.interpolation {
            Interpolation::PiecewiseConstant => 1,
            Interpolation::PiecewiseLinear => 2,
        };
        if !(self.t_prep > 0.0) || self.knots.len() < need {
            return Err(Error::InvalidInput("ramp needs t_prep > 0 and enough knots".into()));
        }
        Ok(())
    }

    pub fn controls_at(&self, t: f64) -> Controls {
        let n = self.segments() as f64;
        let x = (t / self.t_prep).clamp(0.0, 1.0) * n;
        match self.interpolation {
            Interpolation::PiecewiseConstant => self.knots[(x as usize).min(self.knots.len() - 1)],
            Interpolation::PiecewiseLinear => {
                let k = (x as usize).min(self.knots.len() - 2);
                self.knots[k].lerp(&self.knots[k + 1], x - k as f64)
            }
        }
    }

    /// Whether `δ` keeps one sign over the knots.
    pub fn delta_sign_fixed(&self) -> bool {
        self.knots.iter().all(|c| c.delta > 0.0) || self.knots.iter().all(|c| c.delta < 0.0)
    }
}

fn field(c: &Controls, eta: f64, phi: f64) -> Vec3 {
    let (s1, c1) = phi.sin_cos();
    let (s2, c2) = (2.0 * phi).sin_cos();
    let e2 = eta * eta;
    // B^x − iB^y = Ω_p η e^{−iφ} + Ω_d η² e^{−2iφ}
    [c.omega_p * eta * c1 + c.omega_d * e2 * c2, c.omega_p * eta * s1 + c.omega_d * e2 * s2, c.delta - c.j_prime * e2]
}

/// Drive field of every ensemble member at time `t`.
pub fn drive_field(schedule: &RampSchedule, t: f64, ens: &Ensemble) -> Vec<Vec3> {
    let c = schedule.controls_at(t);
    (0..ens.len()).map(|i| field(&c, ens.eta[i], ens.phi[i])).collect()
}

/// Exact rotation of `s` for `dS/dt = S × B` held constant over `dt`.
fn rotate(s: &Vec3, b: &Vec3, dt: f64) -> Vec3 {
    let bn = norm(b);
    if bn == 0.0 {
        return *s;
    }
    // S × B = (−B) × S: rotation about −B̂ by |B|dt
    let k = [-b[0] / bn, -b[1] / bn, -b[2] / bn];
    let (sn, cs) = (bn * dt).sin_cos();
    let kxs = crate::cross(&k, s);
    let kd = dot(&k, s) * (1.0 - cs);
    [
        s[0] * cs + kxs[0] * sn + k[0] * kd,
        s[1] * cs + kxs[1] * sn + k[1] * kd,
        s[2] * cs + kxs[2] * sn + k[2] * kd,
    ]
}

/// Evolve under the drive with `steps` midpoint-field rotations.
pub fn evolve_prep(state0: &SpinState, schedule: &RampSchedule, ens: &Ensemble, steps: usize) -> Result<SpinState> {
    schedule.validate()?;
    if state0.len() != ens.len() || steps == 0 {
        return Err(Error::InvalidInput("state and ensemble sizes differ or steps = 0".into()));
    }
    let dt = schedule.t_prep / steps as f64;
    let ctrl: Vec<Controls> = (0..steps).map(|k| schedule.controls_at((k as f64 + 0.5) * dt)).collect();
    let mut out = state0.clone();
    for_each_indexed(&mut out.s, |i, s| {
        let (e, p) = (ens.eta[i], ens.phi[i]);
        for c in &ctrl {
            *s = rotate(s, &field(c, e, p), dt);
        }
    });
    let drift = out.norm_drift();
    if drift > crate::dynamics::MAX_NORM_DRIFT {
        return Err(Error::StepRejected { t: schedule.t_prep, drift });
    }
    Ok(out)
}

/// Weighted mean and per-member `F_n = 1/2 + 2 s_n·s_n^target`.
pub fn fidelity(state: &SpinState, target: &SpinState, weight: Option<&[f64]>) -> Result<(f64, Vec<f64>)> {
    if state.len() != target.len() || weight.is_some_and(|w| w.len() != state.len()) {
        return Err(Error::InvalidInput("fidelity needs matching states".into()));
    }
    let f: Vec<f64> = state.s.iter().zip(&target.s).map(|(a, b)| 0.5 + 2.0 * dot(a, b)).collect();
    let avg = match weight {
        Some(w) => f.iter().zip(w).map(|(x, w)| x * w).sum::<f64>() / w.iter().sum::<f64>(),
        None => f.iter().sum::<f64>() / f.len() as f64,
    };
    Ok((avg, f))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizeOptions {
    pub t_prep: f64,
    pub n_segments: usize,
    /// Maximum number of schedule evaluations.
    pub budget: usize,
    pub steps: usize,
    pub seed: u64,
    /// Terminal field scale `K`: `B(t_prep) = K·B_self`.
    pub scale: f64,
    /// Required `1 − F_n` for every member.
    pub target_infidelity: f64,
}

impl Default for OptimizeOptions {
    fn default() -> Self {
        OptimizeOptions {
            t_prep: 2.0 * PI,
            n_segments: 20,
            budget: 400,
            steps: 20_000,
            seed: 7,
            scale: 400.0,
            target_infidelity: 1e-2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizedRamp {
    pub schedule: RampSchedule,
    pub f_avg: f64,
    pub min_f: f64,
    pub evaluations: usize,
}

/// Initial state aligned with the starting drive field of a target with
/// chemical potential `mu`.
pub fn initial_state(mu: f64, n: usize) -> SpinState {
    if mu > 0.0 {
        SpinState::all_up(n)
    } else {
        SpinState::all_down(n)
    }
}

/// Seed ramp: `δ` relaxes quadratically from far detuned to `Kμ` by 70% of the
/// ramp, the pairing drive carries a `sin(πs)` boost, `J' = KJ` throughout.
pub fn seed_schedule(target: &MFSolution, params: &ModelParams, opts: &OptimizeOptions) -> Result<RampSchedule> {
    let k = opts.scale;
    let j = params.j;
    let (dp, dd) = (target.delta_p.norm(), target.delta_d.norm());
    let (d_end, d0) = if target.mu > 0.0 {
        (k * target.mu, 1.3 * k * j)
    } else {
        (k * target.mu, k * target.mu - 0.3 * k * j)
    };
    let boost = 100.0 * j;
    let n = opts.n_segments;
    if n == 0 {
        return Err(Error::InvalidInput("need at least one segment".into()));
    }
    let (bp, bd) = match target.branch {
        Branch::POnly => (boost, 0.0),
        Branch::DOnly => (0.0, boost),
        _ => (boost, boost),
    };
    let knots = (0..=n)
        .map(|i| {
            let s = i as f64 / n as f64;
            let w = (1.0 - s / 0.7).max(0.0).powi(2);
            let bump = (PI * s).sin();
            Controls {
                omega_p: k * dp + if dp > 0.0 { bp * bump } else { 0.0 },
                omega_d: k * dd + if dd > 0.0 { bd * bump } else { 0.0 },
                delta: d_end + (d0 - d_end) * w,
                j_prime: k * j,
            }
        })
        .collect();
    Ok(RampSchedule { t_prep: opts.t_prep, interpolation: Interpolation::PiecewiseLinear, knots })
}

struct Problem<'a> {
    ens: &'a Ensemble,
    target: SpinState,
    start: SpinState,
    steps: usize,
    mu_sign: f64,
}

impl Problem<'_> {
    fn score(&self, sch: &RampSchedule) -> Option<(f64, f64)> {
        if !sch.knots.iter().all(|c| c.delta * self.mu_sign > 0.0) {
            return None;
        }
        let out = evolve_prep(&self.start, sch, self.ens, self.steps).ok()?;
        let (avg, f) = fidelity(&out, &self.target, Some(&self.ens.weight)).ok()?;
        Some((avg, f.iter().copied().fold(f64::INFINITY, f64::min)))
    }
}

/// Coordinate descent with a shrinking trust region over the pairing-drive and
/// detuning knots (the final knot stays at the terminal condition).
///
/// Every sweep evaluates all single-coordinate moves in parallel, then tries
/// the sum of the improving moves and keeps whichever is best. Runs are
/// deterministic for a given seed. Returns the best schedule found even when
/// the infidelity target is missed.
pub fn optimize_ramp_best(
    target: &MFSolution,
    params: &ModelParams,
    ens: &Ensemble,
    opts: &OptimizeOptions,
) -> Result<OptimizedRamp> {
    let tgt = texture_from_solution(target, params, ens, 0.0, 0.0)?;
    let prob = Problem {
        ens,
        target: tgt,
        start: initial_state(target.mu, ens.len()),
        steps: opts.steps,
        mu_sign: if target.mu > 0.0 { 1.0 } else { -1.0 },
    };
    let mut best = seed_schedule(target, params, opts)?;
    let (mut f_avg, mut min_f) = prob.score(&best).ok_or_else(|| Error::InvalidInput("seed ramp is not admissible".into()))?;
    let mut evals = 1usize;
    let n = opts.n_segments;
    let use_d = target.branch == Branch::DOnly;
    let scale_omega = best.knots.iter().map(|c| c.omega_p.abs().max(c.omega_d.abs())).fold(0.0, f64::max).max(1e-12);
    let scale_delta = opts.scale * params.j;
    let mut h = 0.05;
    let mut order: Vec<(usize, usize)> = (0..n).flat_map(|k| [(k, 0), (k, 1)]).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let apply = |s: &mut RampSchedule, k: usize, c: usize, step: f64| {
        let kn = &mut s.knots[k];
        match (c, use_d) {
            (0, false) => kn.omega_p += step * scale_omega,
            (0, true) => kn.omega_d += step * scale_omega,
            _ => kn.delta += step * scale_delta,
        }
    };
    while evals < opts.budget && h > 1e-4 {
        order.shuffle(&mut rng);
        let mut moves: Vec<(usize, usize, f64)> = order.iter().flat_map(|&(k, c)| [(k, c, h), (k, c, -h)]).collect();
        moves.truncate(opts.budget - evals);
        let scores = map_jobs(&moves, |&(k, c, step)| {
            let mut s = best.clone();
            apply(&mut s, k, c, step);
            prob.score(&s)
        });
        evals += moves.len();
        let mut improving: Vec<(usize, f64, f64)> = scores
            .iter()
            .enumerate()
            .filter_map(|(i, sc)| sc.filter(|v| v.0 > f_avg).map(|v| (i, v.0, v.1)))
            .collect();
        if improving.is_empty() {
            h *= 0.5;
            continue;
        }
        improving.sort_by(|a, b| b.1.total_cmp(&a.1));
        let (bi, bf, bm) = improving[0];
        let mut cand = best.clone();
        let (k, c, step) = moves[bi];
        apply(&mut cand, k, c, step);
        let (mut nf, mut nm) = (bf, bm);
        if improving.len() > 1 && evals < opts.budget {
            let mut comb = best.clone();
            let mut seen = std::collections::HashSet::new();
            for &(i, _, _) in &improving {
                let (k, c, step) = moves[i];
                if seen.insert((k, c)) {
                    apply(&mut comb, k, c, step);
                }
            }
            evals += 1;
            if let Some((cf, cm)) = prob.score(&comb) {
                if cf > nf {
                    cand = comb;
                    nf = cf;
                    nm = cm;
                }
            }
        }
        best = cand;
        f_avg = nf;
        min_f = nm;
    }
    Ok(OptimizedRamp { schedule: best, f_avg, min_f, evaluations: evals })
}

/// As [`optimize_ramp_best`], failing with `BudgetExhausted` when some member
/// still has `1 − F_n ≥ target_infidelity`.
pub fn optimize_ramp(target: &MFSolution, params: &ModelParams, ens: &Ensemble, opts: &OptimizeOptions) -> Result<OptimizedRamp> {
    let r = optimize_ramp_best(target, params, ens, opts)?;
    if 1.0 - r.min_f >= opts.target_infidelity {
        return Err(Error::BudgetExhausted { best: r.f_avg });
    }
    Ok(r)
}
