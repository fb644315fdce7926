//! Mean-field equations of motion, fixed-step RK4 traces and diagnostics.

mod diagnostics;
mod oracle;

pub use diagnostics::{
    classify_dynamical_phase, competition_onset, extract_mu_inf, long_time_stats, osc_frequency, recurrence_time, ClassifyThresholds,
    Classification, CompetitionOnset, DynPhase, LongTimeStats, MuInf, Window,
};
pub use oracle::exact_lindblad_oracle;

use crate::groundstate::ModelParams;
use crate::lattice::Ensemble;
use crate::par::{chunked_sum, for_each_indexed};
use crate::{cross, norm, Complex64, Error, Result, Vec3};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::ops::Add;

/// Steps per fastest precession period used by [`default_dt`].
pub const DEFAULT_STEPS_PER_PERIOD: f64 = 800.0;
pub const DEFAULT_STRIDE: usize = 10;
/// Norm drift beyond which integration aborts.
pub const MAX_NORM_DRIFT: f64 = 1e-6;

/// Per-member Bloch vectors of length 1/2.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SpinState {
    pub s: Vec<Vec3>,
}

impl SpinState {
    pub fn all_down(n: usize) -> Self {
        SpinState { s: vec![[0.0, 0.0, -0.5]; n] }
    }

    pub fn all_up(n: usize) -> Self {
        SpinState { s: vec![[0.0, 0.0, 0.5]; n] }
    }

    pub fn len(&self) -> usize {
        self.s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.s.is_empty()
    }

    /// `max_n ||s_n| − 1/2|`
    pub fn norm_drift(&self) -> f64 {
        self.s.iter().map(|v| (norm(v) - 0.5).abs()).fold(0.0, f64::max)
    }
}

/// Treatment of the single-spin (`n = m`) terms of the collective operators.
///
/// `MeanField` factorizes every product, including a spin with itself. `Quantum`
/// drops the self terms from the mean fields and adds their exact spin-1/2
/// values (`S⁺S⁻ = 1/2 + S^z`), which reproduces the master equation to first
/// order in time for product states. Only meaningful for unit-weight members.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum OnsiteTerms {
    #[default]
    MeanField,
    Quantum,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
struct Sums {
    a_p: Complex64,
    a_d: Complex64,
}

impl Add for Sums {
    type Output = Sums;
    fn add(self, o: Sums) -> Sums {
        Sums { a_p: self.a_p + o.a_p, a_d: self.a_d + o.a_d }
    }
}

/// Collective amplitudes `A_c = Σ w l_c S⁻` (so `Δ_c = χ_c A_c`).
fn amplitudes(state: &SpinState, ens: &Ensemble) -> (Complex64, Complex64) {
    let s = chunked_sum(ens.len(), Sums::default(), |r| {
        let mut acc = Sums::default();
        for i in r {
            let sm = Complex64::new(state.s[i][0], -state.s[i][1]) * ens.weight[i];
            acc.a_p += ens.l_p[i] * sm;
            acc.a_d += ens.l_d[i] * sm;
        }
        acc
    });
    let a_p = if ens.channel_suppressed(0) { Complex64::default() } else { s.a_p };
    let a_d = if ens.channel_suppressed(1) { Complex64::default() } else { s.a_d };
    (a_p, a_d)
}

/// Per-spin couplings `(χ_p, χ_d)`.
fn per_spin(params: &ModelParams, ens: &Ensemble) -> (f64, f64) {
    let n = ens.total_weight();
    (params.chi_p_n / n, params.chi_d_n / n)
}

/// `(Δ_p, Δ_d) = (χ_p Σ η e^{iφ} S⁻, χ_d Σ η² e^{2iφ} S⁻)`.
pub fn order_parameters(state: &SpinState, params: &ModelParams, ens: &Ensemble) -> (Complex64, Complex64) {
    let (a_p, a_d) = amplitudes(state, ens);
    let (cp, cd) = per_spin(params, ens);
    (a_p * cp, a_d * cd)
}

#[inline]
fn member_field(ens: &Ensemble, i: usize, j: f64, dp: Complex64, dd: Complex64) -> Vec3 {
    let bm = dp * ens.l_p[i].conj() + dd * ens.l_d[i].conj();
    [bm.re, -bm.im, -j * ens.eta[i] * ens.eta[i]]
}

/// Self-consistent field at `μ = 0`: `B^x − iB^y = Δ_p η e^{-iφ} + Δ_d η² e^{-2iφ}`,
/// `B^z = −Jη²`.
pub fn effective_field(state: &SpinState, params: &ModelParams, ens: &Ensemble) -> (Vec<Vec3>, Complex64, Complex64) {
    let (dp, dd) = order_parameters(state, params, ens);
    let b = (0..ens.len()).map(|i| member_field(ens, i, params.j, dp, dd)).collect();
    (b, dp, dd)
}

/// Cavity-frame energy `Σ w 2Jη² S^z − |Δ_p|²/χ_p − |Δ_d|²/χ_d`.
pub fn energy(state: &SpinState, params: &ModelParams, ens: &Ensemble) -> f64 {
    let kin = chunked_sum(ens.len(), 0.0, |r| {
        r.map(|i| ens.weight[i] * 2.0 * params.j * ens.eta[i] * ens.eta[i] * state.s[i][2]).sum::<f64>()
    });
    let (a_p, a_d) = amplitudes(state, ens);
    let (cp, cd) = per_spin(params, ens);
    kin - cp * a_p.norm_sqr() - cd * a_d.norm_sqr()
}

/// Pair number `N_C = Σ w (S^z + 1/2)`.
pub fn pair_number(state: &SpinState, ens: &Ensemble) -> f64 {
    chunked_sum(ens.len(), 0.0, |r| r.map(|i| ens.weight[i] * (state.s[i][2] + 0.5)).sum::<f64>())
}

/// Equations of motion with the dynamics options bundled.
#[derive(Debug, Clone, Copy)]
pub struct Model<'a> {
    pub params: &'a ModelParams,
    pub ens: &'a Ensemble,
    pub onsite: OnsiteTerms,
}

impl<'a> Model<'a> {
    pub fn new(params: &'a ModelParams, ens: &'a Ensemble) -> Self {
        Model { params, ens, onsite: OnsiteTerms::MeanField }
    }

    pub fn with_onsite(mut self, onsite: OnsiteTerms) -> Self {
        self.onsite = onsite;
        self
    }

    /// `dS/dt = 2 S × B` plus the factorized collective-loss drift.
    pub fn derivative(&self, state: &SpinState, out: &mut [Vec3]) {
        let ens = self.ens;
        let (a_p, a_d) = amplitudes(state, ens);
        let (cp, cd) = per_spin(self.params, ens);
        let (gp, gd) = (self.params.loss_p * cp, self.params.loss_d * cd);
        let j = self.params.j;
        let quantum = self.onsite == OnsiteTerms::Quantum;
        for_each_indexed(out, |i, o| {
            let s = &state.s[i];
            let sm = Complex64::new(s[0], -s[1]);
            let (mut ap, mut ad) = (a_p, a_d);
            let lp2 = ens.l_p[i].norm_sqr();
            let ld2 = ens.l_d[i].norm_sqr();
            if quantum {
                ap -= ens.l_p[i] * sm;
                ad -= ens.l_d[i] * sm;
            }
            let mut b = member_field(ens, i, j, ap * cp, ad * cd);
            if quantum {
                b[2] += 0.5 * (cp * lp2 + cd * ld2);
            }
            let c = cross(s, &b);
            let mut d = [2.0 * c[0], 2.0 * c[1], 2.0 * c[2]];
            let sp = sm.conj();
            for (g, l, a, l2) in [(gp, ens.l_p[i], ap, lp2), (gd, ens.l_d[i], ad, ld2)] {
                if g == 0.0 {
                    continue;
                }
                let mut dsp = l * a.conj() * (g * s[2]);
                let mut dsz = -g * (l.conj() * sp * a).re;
                if quantum {
                    dsp -= sp * (0.5 * g * l2);
                    dsz -= g * l2 * (0.5 + s[2]);
                }
                d[0] += dsp.re;
                d[1] += dsp.im;
                d[2] += dsz;
            }
            *o = d;
        });
    }

    /// One classical RK4 step of size `dt`.
    pub fn rk4_step(&self, state: &mut SpinState, dt: f64, work: &mut Rk4Work) {
        let n = state.len();
        work.ensure(n);
        self.derivative(state, &mut work.k[0]);
        for stage in 1..4 {
            let h = if stage == 3 { dt } else { 0.5 * dt };
            let (head, tail) = work.k.split_at_mut(stage);
            let prev = &head[stage - 1];
            for_each_indexed(&mut work.tmp.s, |i, t| {
                for a in 0..3 {
                    t[a] = state.s[i][a] + h * prev[i][a];
                }
            });
            self.derivative(&work.tmp, &mut tail[0]);
        }
        let k = &work.k;
        for_each_indexed(&mut state.s, |i, v| {
            for a in 0..3 {
                v[a] += dt / 6.0 * (k[0][i][a] + 2.0 * k[1][i][a] + 2.0 * k[2][i][a] + k[3][i][a]);
            }
        });
    }
}

/// Scratch buffers reused across RK4 steps.
#[derive(Debug, Default)]
pub struct Rk4Work {
    k: [Vec<Vec3>; 4],
    tmp: SpinState,
}

impl Rk4Work {
    fn ensure(&mut self, n: usize) {
        if self.tmp.s.len() != n {
            for k in self.k.iter_mut() {
                *k = vec![[0.0; 3]; n];
            }
            self.tmp.s = vec![[0.0; 3]; n];
        }
    }
}

/// `dt = 2π/(steps·max(J, χ_pN, χ_dN))`.
pub fn default_dt(params: &ModelParams) -> f64 {
    2.0 * PI / (DEFAULT_STEPS_PER_PERIOD * params.j.max(params.chi_p_n).max(params.chi_d_n))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuenchSpec {
    pub chi_p_i: f64,
    pub chi_d_i: f64,
    pub chi_p_f: f64,
    pub chi_d_f: f64,
    pub eps_d: f64,
    pub eps_p: f64,
    pub t_final: f64,
    /// `None` picks [`default_dt`] for the evolution couplings.
    pub dt: Option<f64>,
    pub stride: usize,
}

impl QuenchSpec {
    /// p-wave quench `χ_{p,i} → χ_{p,f}` over `periods` units of `2π/J`.
    pub fn p_quench(chi_p_i: f64, chi_p_f: f64, periods: f64) -> Self {
        QuenchSpec {
            chi_p_i,
            chi_d_i: 0.0,
            chi_p_f,
            chi_d_f: 0.0,
            eps_d: 0.0,
            eps_p: 0.0,
            t_final: 2.0 * PI * periods,
            dt: None,
            stride: DEFAULT_STRIDE,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_final > 0.0) || self.dt.is_some_and(|d| !(d > 0.0)) || self.stride == 0 {
            return Err(Error::InvalidInput("quench needs t_final > 0, dt > 0, stride ≥ 1".into()));
        }
        if [self.chi_p_i, self.chi_d_i, self.chi_p_f, self.chi_d_f, self.eps_d, self.eps_p]
            .iter()
            .any(|x| !(*x >= 0.0))
        {
            return Err(Error::InvalidInput("couplings and seeds must be non-negative".into()));
        }
        Ok(())
    }
}

/// Sampled time series of a run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub times: Vec<f64>,
    pub delta_p: Vec<Complex64>,
    pub delta_d: Vec<Complex64>,
    pub n_c: Vec<f64>,
    pub energy: Vec<f64>,
    pub alpha_b: Option<Vec<Complex64>>,
    /// Largest spin-norm drift seen at the samples.
    pub max_norm_drift: f64,
}

impl Trace {
    fn record(&mut self, t: f64, state: &SpinState, model: &Model) {
        let (dp, dd) = order_parameters(state, model.params, model.ens);
        self.times.push(t);
        self.delta_p.push(dp);
        self.delta_d.push(dd);
        self.n_c.push(pair_number(state, model.ens));
        self.energy.push(energy(state, model.params, model.ens));
        self.max_norm_drift = self.max_norm_drift.max(state.norm_drift());
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn t_final(&self) -> f64 {
        self.times.last().copied().unwrap_or(0.0)
    }
}

/// Fixed-step RK4 from `state` for `t_final`, sampling every `stride` steps.
/// The step is shrunk so that an integer number of steps lands on `t_final`.
/// Returns the trace; `state` holds the final configuration.
pub fn integrate(model: &Model, state: &mut SpinState, t_final: f64, dt: f64, stride: usize) -> Result<Trace> {
    if state.len() != model.ens.len() {
        return Err(Error::InvalidInput("state and ensemble sizes differ".into()));
    }
    if !(t_final > 0.0 && dt > 0.0) || stride == 0 {
        return Err(Error::InvalidInput("integrate needs t_final > 0, dt > 0, stride ≥ 1".into()));
    }
    let steps = (t_final / dt).ceil() as usize;
    let h = t_final / steps as f64;
    let mut trace = Trace::default();
    let mut work = Rk4Work::default();
    trace.record(0.0, state, model);
    for step in 1..=steps {
        model.rk4_step(state, h, &mut work);
        if step % stride == 0 || step == steps {
            let t = step as f64 * h;
            trace.record(t, state, model);
            let drift = state.norm_drift();
            if drift > MAX_NORM_DRIFT {
                return Err(Error::StepRejected { t, drift });
            }
        }
    }
    Ok(trace)
}

/// Prepare the `χ_i` ground texture (with seeds) and evolve under `χ_f`.
pub fn run_quench(
    base: &ModelParams,
    quench: &QuenchSpec,
    ens: &Ensemble,
    levels: &crate::lattice::LevelSet,
) -> Result<(Trace, crate::groundstate::MFSolution)> {
    use crate::groundstate::{solve_d, solve_p, texture_from_solution};
    quench.validate()?;
    let mut init = *base;
    init.chi_p_n = quench.chi_p_i;
    init.chi_d_n = quench.chi_d_i;
    let sol = if quench.chi_p_i > 0.0 && (quench.chi_d_i == 0.0 || quench.eps_p == 0.0) {
        solve_p(&init, levels)?
    } else {
        solve_d(&init, levels)?
    };
    let mut state = texture_from_solution(&sol, &init, ens, quench.eps_d, quench.eps_p)?;
    let mut fin = *base;
    fin.chi_p_n = quench.chi_p_f;
    fin.chi_d_n = quench.chi_d_f;
    let dt = quench.dt.unwrap_or_else(|| default_dt(&fin));
    let model = Model::new(&fin, ens);
    let trace = integrate(&model, &mut state, quench.t_final, dt, quench.stride)?;
    Ok((trace, sol))
}

/// Cavity couplings and detunings for the output field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CavityReadout {
    /// Effective couplings `𝒢_p`, `𝒢_d`.
    pub g_p: Complex64,
    pub g_d: Complex64,
    /// Cavity detunings `δ_{c,A}`, `δ_{c,B}`.
    pub delta_a: f64,
    pub delta_b: f64,
    pub kappa: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CavityOutput {
    pub alpha_b: Vec<Complex64>,
    /// Photons leaked from each tone over the whole trace.
    pub photons_p: f64,
    pub photons_d: f64,
}

/// `α_b(t) = Δ_p/𝒢_p^* e^{−iδ_{c,A}t} + Δ_d/𝒢_d^* e^{−iδ_{c,B}t}` and leaked
/// photon numbers `κ ∫ |Δ_c/𝒢_c|² dt` by the trapezoid rule.
pub fn cavity_output(trace: &Trace, readout: &CavityReadout) -> CavityOutput {
    let tone = |d: Complex64, g: Complex64| if g.norm() == 0.0 { Complex64::default() } else { d / g.conj() };
    let alpha_b = trace
        .times
        .iter()
        .zip(trace.delta_p.iter().zip(&trace.delta_d))
        .map(|(&t, (&dp, &dd))| {
            tone(dp, readout.g_p) * Complex64::from_polar(1.0, -readout.delta_a * t)
                + tone(dd, readout.g_d) * Complex64::from_polar(1.0, -readout.delta_b * t)
        })
        .collect();
    let leak = |series: &[Complex64], g: Complex64| -> f64 {
        let mut acc = 0.0;
        for k in 1..trace.len() {
            let dt = trace.times[k] - trace.times[k - 1];
            acc += 0.5 * dt * (tone(series[k], g).norm_sqr() + tone(series[k - 1], g).norm_sqr());
        }
        readout.kappa * acc
    };
    CavityOutput {
        photons_p: leak(&trace.delta_p, readout.g_p),
        photons_d: leak(&trace.delta_d, readout.g_d),
        alpha_b,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::Ensemble;

    fn two_sites() -> Ensemble {
        Ensemble::custom(vec![0.8, 0.3], vec![0.4, 2.0], vec![1.0, 1.0]).unwrap()
    }

    #[test]
    fn single_site_order_parameter() {
        let ens = Ensemble::custom(vec![0.7], vec![1.1], vec![1.0]).unwrap();
        let p = ModelParams::new(2.0, 0.0, 0.4);
        let st = SpinState { s: vec![[0.5, 0.0, 0.0]] };
        let (dp, _) = order_parameters(&st, &p, &ens);
        let want = Complex64::from_polar(2.0 * 0.7 / 2.0, 1.1);
        assert!((dp - want).norm() < 1e-15);
    }

    #[test]
    fn polar_states_have_no_pairing() {
        let ens = two_sites();
        let p = ModelParams::new(3.0, 2.0, 0.4);
        let st = SpinState { s: vec![[0.0, 0.0, 0.5], [0.0, 0.0, -0.5]] };
        let (b, dp, dd) = effective_field(&st, &p, &ens);
        assert_eq!((dp.norm(), dd.norm()), (0.0, 0.0));
        assert!(b[0][0] == 0.0 && b[0][1] == 0.0 && (b[0][2] + 0.64).abs() < 1e-15);
    }

    #[test]
    fn dark_state_is_stationary() {
        let ens = two_sites();
        let p = ModelParams::new(3.0, 2.0, 0.4).with_loss(0.5, 0.5);
        let st = SpinState::all_down(2);
        let mut d = vec![[1.0; 3]; 2];
        Model::new(&p, &ens).derivative(&st, &mut d);
        assert!(d.iter().flatten().all(|x| x.abs() < 1e-16));
    }

    #[test]
    fn drift_preserves_spin_length() {
        let ens = two_sites();
        let p = ModelParams::new(3.0, 2.0, 0.4).with_loss(0.3, 0.2);
        let st = SpinState { s: vec![[0.3, -0.2, 0.3464101615137755], [-0.1, 0.4, -0.2645751311064591]] };
        let mut d = vec![[0.0; 3]; 2];
        Model::new(&p, &ens).derivative(&st, &mut d);
        for (s, ds) in st.s.iter().zip(&d) {
            assert!(crate::dot(s, ds).abs() < 1e-15);
        }
    }

    #[test]
    fn cavity_output_single_tone() {
        let trace = Trace {
            times: vec![0.0, 0.5, 1.0],
            delta_p: vec![Complex64::new(1.0, 0.0); 3],
            delta_d: vec![Complex64::default(); 3],
            ..Default::default()
        };
        let r = CavityReadout {
            g_p: Complex64::new(2.0, 0.0),
            g_d: Complex64::new(1.0, 0.0),
            delta_a: 3.0,
            delta_b: 5.0,
            kappa: 0.1,
        };
        let out = cavity_output(&trace, &r);
        for (k, a) in out.alpha_b.iter().enumerate() {
            let t = trace.times[k];
            assert!((a - Complex64::from_polar(0.5, -3.0 * t)).norm() < 1e-15);
        }
        assert!((out.photons_p - 0.1 * 0.25).abs() < 1e-15);
        assert_eq!(out.photons_d, 0.0);
    }
}
