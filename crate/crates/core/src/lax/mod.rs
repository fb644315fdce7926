//! Lax-vector diagnostics for pure p-wave quenches.
//!
//! With the equilibrium texture of `χ_{p,i}` evolved under `χ_{p,f}`, the
//! conserved norm is
//! `L²(u)/N² = β² + β(u−2μ)f(u) + f(u)²E(u)²` where
//! `f(u) = (1/N)Σ w ε/((u−ε)E_ε)`, `ε = 2Jη²`, `β = 2J/(χ_fN) − 2J/(χ_iN)`
//! and `E(u)² = (u/2−μ)² + Δ²u/(2J)`. Clearing the poles gives the degree-2N
//! polynomial `P = [βq + (u/2−μ)p]² + (Δ²u/2J)p²` with `q = Π(u−ε)` and
//! `p = fq`, whose roots are found with Aberth iterations.

mod continuum;

pub use continuum::{
    boundary_iii_star, boundary_iii_star_general, boundary_u0, continuum_p_state, iii_termination,
    phase_diagram_boundaries, BoundaryCurve, BoundarySet, ContinuumState, U0Branch,
};

use crate::dynamics::{DynPhase, SpinState};
use crate::groundstate::{qcp_p, solve_p, MFSolution, ModelParams};
use crate::lattice::{Ensemble, LevelSet};
use crate::{Complex64, Error, Result};
use serde::{Deserialize, Serialize};
use std::ops::{Add, Mul};

/// Distance below which `u` counts as sitting on a pole.
pub const POLE_TOL: f64 = 1e-12;
/// Roots with `|Im u|` below this (times `J`) are real.
pub const REAL_TOL: f64 = 1e-8;

/// Quench data entering the Lax norm on a level set.
#[derive(Debug, Clone)]
pub struct LaxSetup {
    pub j: f64,
    pub delta: f64,
    pub mu: f64,
    pub beta: f64,
    pub chi_p_i: f64,
    pub chi_p_f: f64,
    pub n_c: f64,
    /// Poles `ε = 2Jη²`, ascending.
    pub poles: Vec<f64>,
    /// Residue weights `(w/N)ε/E_ε`.
    pub coef: Vec<f64>,
}

impl LaxSetup {
    /// Equilibrium p texture of `chi_p_i` on `levels`, quenched to `chi_p_f`.
    pub fn new(chi_p_i: f64, chi_p_f: f64, n_c: f64, levels: &LevelSet) -> Result<Self> {
        if !(chi_p_f > 0.0) {
            return Err(Error::InvalidInput("χ_{p,f} must be positive".into()));
        }
        let params = ModelParams::new(chi_p_i, 0.0, n_c);
        let sol = solve_p(&params, levels)?;
        Ok(Self::from_solution(&sol, chi_p_i, chi_p_f, n_c, levels, params.j))
    }

    pub fn from_solution(sol: &MFSolution, chi_p_i: f64, chi_p_f: f64, n_c: f64, levels: &LevelSet, j: f64) -> Self {
        let delta = sol.delta_p.norm();
        let n = levels.total_weight();
        let mut pc: Vec<(f64, f64)> = levels
            .iter()
            .map(|(e, w)| {
                let eps = 2.0 * j * e * e;
                let en = ((j * e * e - sol.mu).powi(2) + delta * delta * e * e).sqrt();
                (eps, w / n * eps / en)
            })
            .collect();
        pc.sort_by(|a, b| a.0.total_cmp(&b.0));
        LaxSetup {
            j,
            delta,
            mu: sol.mu,
            beta: 2.0 * j / chi_p_f - 2.0 * j / chi_p_i,
            chi_p_i,
            chi_p_f,
            n_c,
            poles: pc.iter().map(|x| x.0).collect(),
            coef: pc.iter().map(|x| x.1).collect(),
        }
    }

    pub fn degree(&self) -> usize {
        2 * self.poles.len()
    }

    fn check_pole(&self, u: Complex64) -> Result<()> {
        for &e in &self.poles {
            if (u - e).norm() < POLE_TOL {
                return Err(Error::PoleHit { u: u.re, pole: e });
            }
        }
        Ok(())
    }

    /// `f(u)` and `f'(u)`.
    pub fn f(&self, u: Complex64) -> (Complex64, Complex64) {
        let mut f = Complex64::default();
        let mut df = Complex64::default();
        for (&e, &c) in self.poles.iter().zip(&self.coef) {
            let r = 1.0 / (u - e);
            f += c * r;
            df -= c * r * r;
        }
        (f, df)
    }

    /// `E(u)²`.
    pub fn e2(&self, u: Complex64) -> Complex64 {
        let a = u * 0.5 - self.mu;
        a * a + u * (self.delta * self.delta / (2.0 * self.j))
    }

    /// Cleared polynomial `P(u)` and `P'(u)`.
    pub fn cleared(&self, u: Complex64) -> (Complex64, Complex64) {
        let n = self.poles.len();
        let one = Dual::new(Complex64::new(1.0, 0.0), Complex64::default());
        let fac: Vec<Dual> = self.poles.iter().map(|&e| Dual::new(u - e, Complex64::new(1.0, 0.0))).collect();
        let mut pre = Vec::with_capacity(n + 1);
        pre.push(one);
        for k in 0..n {
            pre.push(pre[k] * fac[k]);
        }
        let mut suf = vec![one; n + 1];
        for k in (0..n).rev() {
            suf[k] = suf[k + 1] * fac[k];
        }
        let q = pre[n];
        let mut p = Dual::new(Complex64::default(), Complex64::default());
        for k in 0..n {
            p = p + (pre[k] * suf[k + 1]).scale(self.coef[k]);
        }
        let half = Dual::new(u * 0.5 - self.mu, Complex64::new(0.5, 0.0));
        let lin = Dual::new(u, Complex64::new(1.0, 0.0)).scale(self.delta * self.delta / (2.0 * self.j));
        let a = q.scale(self.beta) + half * p;
        let out = a * a + lin * p * p;
        (out.v, out.d)
    }
}

#[derive(Debug, Clone, Copy)]
struct Dual {
    v: Complex64,
    d: Complex64,
}

impl Dual {
    fn new(v: Complex64, d: Complex64) -> Self {
        Dual { v, d }
    }

    fn scale(self, s: f64) -> Self {
        Dual { v: self.v * s, d: self.d * s }
    }
}

impl Add for Dual {
    type Output = Dual;
    fn add(self, o: Dual) -> Dual {
        Dual { v: self.v + o.v, d: self.d + o.d }
    }
}

impl Mul for Dual {
    type Output = Dual;
    fn mul(self, o: Dual) -> Dual {
        Dual { v: self.v * o.v, d: self.v * o.d + self.d * o.v }
    }
}

/// `L²(u)/N²` from the closed form.
pub fn lax_norm(u: Complex64, setup: &LaxSetup) -> Result<Complex64> {
    setup.check_pole(u)?;
    let (f, _) = setup.f(u);
    let b = setup.beta;
    Ok(b * b + b * (u - 2.0 * setup.mu) * f + f * f * setup.e2(u))
}

/// `L²(u)/N²` of an arbitrary state on a p-wave ensemble evolved with
/// `chi_p_f`. Spins are taken in the gauge where the pairing phases vanish.
pub fn lax_norm_state(u: Complex64, state: &SpinState, ens: &Ensemble, chi_p_f: f64, j: f64) -> Result<Complex64> {
    let n = ens.total_weight();
    let (mut x, mut y, mut z) = (Complex64::default(), Complex64::default(), Complex64::default());
    for i in 0..ens.len() {
        let eps = 2.0 * j * ens.eta[i] * ens.eta[i];
        if (u - eps).norm() < POLE_TOL {
            return Err(Error::PoleHit { u: u.re, pole: eps });
        }
        let r = ens.weight[i] / (u - eps);
        let (sn, cs) = ens.phi[i].sin_cos();
        let s = &state.s[i];
        // e^{iφ}S⁻ components
        let sx = cs * s[0] + sn * s[1];
        let sy = cs * s[1] - sn * s[0];
        x += r * eps.sqrt() * sx;
        y += r * eps.sqrt() * sy;
        z += r * eps * s[2];
    }
    let (x, y) = (x * (2.0 / n), y * (2.0 / n));
    let z = Complex64::new(2.0 * j / chi_p_f, 0.0) - z * (2.0 / n);
    Ok(u * (x * x + y * y) + z * z)
}

/// Simultaneous Aberth–Ehrlich iteration for all roots of the cleared polynomial.
pub fn cleared_roots(setup: &LaxSetup) -> Result<Vec<Complex64>> {
    let deg = setup.degree();
    let span = setup.poles.last().copied().unwrap_or(1.0).max(setup.j);
    let centre = 0.5 * span;
    let radius = 2.0 * span + setup.mu.abs() + setup.delta * setup.delta / setup.j;
    let mut z: Vec<Complex64> = (0..deg)
        .map(|k| {
            let a = 2.0 * std::f64::consts::PI * k as f64 / deg as f64 + 0.4;
            Complex64::new(centre, 0.0) + Complex64::from_polar(radius, a)
        })
        .collect();
    let mut done = vec![false; deg];
    for _ in 0..2000 {
        let mut moved = 0.0f64;
        for k in 0..deg {
            if done[k] {
                continue;
            }
            let (p, dp) = setup.cleared(z[k]);
            if p == Complex64::default() {
                done[k] = true;
                continue;
            }
            let ratio = p / dp;
            let s: Complex64 = (0..deg).filter(|&i| i != k).map(|i| 1.0 / (z[k] - z[i])).sum();
            let w = ratio / (1.0 - ratio * s);
            if !w.is_finite() {
                continue;
            }
            z[k] -= w;
            let rel = w.norm() / z[k].norm().max(1e-3 * span);
            moved = moved.max(rel);
            if rel < 1e-15 {
                done[k] = true;
            }
        }
        if done.iter().all(|&d| d) || moved < 1e-15 {
            return Ok(z);
        }
    }
    // clustered roots converge only linearly; accept when residuals are tiny
    let scale = z.iter().map(|r| setup.cleared(*r).1.norm()).fold(0.0, f64::max);
    let worst = z.iter().map(|r| setup.cleared(*r).0.norm()).fold(0.0, f64::max);
    if worst <= 1e-10 * scale.max(1.0) {
        Ok(z)
    } else {
        Err(Error::NonConvergence { what: "aberth", residual: worst })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairKind {
    ComplexConjugate,
    NegativeReal,
    /// Real pair outside the pole band on the positive axis.
    PositiveReal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LaxClassification {
    pub roots: Vec<Complex64>,
    pub isolated: Vec<Complex64>,
    pub isolated_pairs: usize,
    pub kinds: Vec<PairKind>,
    pub label: DynPhase,
    /// An isolated root sits at `u = 0`.
    pub u_zero_isolated: bool,
}

/// Whether a root belongs to the continuum: `0 < Re u < 2J` and closer to the
/// real axis than the local pole spacing.
fn is_continuum(u: Complex64, poles: &[f64], j: f64) -> bool {
    if u.re < REAL_TOL * j || u.re > 2.0 * j {
        return false;
    }
    let k = poles.partition_point(|&e| e <= u.re);
    let gap = if k == 0 || k == poles.len() {
        let i = k.min(poles.len() - 1).max(1);
        poles[i] - poles[i - 1]
    } else {
        poles[k] - poles[k - 1]
    };
    u.im.abs() < gap
}

/// Classify the roots of a quench.
pub fn classify_roots(setup: &LaxSetup, roots: Vec<Complex64>) -> Result<LaxClassification> {
    let j = setup.j;
    let isolated: Vec<Complex64> = roots.iter().copied().filter(|&u| !is_continuum(u, &setup.poles, j)).collect();
    let mut complex: Vec<Complex64> = isolated.iter().copied().filter(|u| u.im.abs() > REAL_TOL * j).collect();
    let mut real: Vec<f64> = isolated.iter().filter(|u| u.im.abs() <= REAL_TOL * j).map(|u| u.re).collect();
    real.sort_by(|a, b| a.total_cmp(b));
    let cluster = || isolated.iter().map(|u| (u.re, u.im)).collect::<Vec<_>>();
    let mut kinds = Vec::new();
    complex.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    let upper: Vec<_> = complex.iter().filter(|u| u.im > 0.0).collect();
    let lower: Vec<_> = complex.iter().filter(|u| u.im < 0.0).collect();
    if upper.len() != lower.len() {
        return Err(Error::DegenerateRoots { cluster: cluster() });
    }
    for (a, b) in upper.iter().zip(&lower) {
        if (**a - b.conj()).norm() > 1e-6 * a.norm().max(j) {
            return Err(Error::DegenerateRoots { cluster: cluster() });
        }
        kinds.push(PairKind::ComplexConjugate);
    }
    if !real.len().is_multiple_of(2) {
        return Err(Error::DegenerateRoots { cluster: cluster() });
    }
    for pair in real.chunks(2) {
        if pair[0] < 0.0 && pair[1] < 0.0 {
            kinds.push(PairKind::NegativeReal);
        } else if pair[0] > 0.0 && pair[1] > 0.0 {
            kinds.push(PairKind::PositiveReal);
        } else {
            return Err(Error::DegenerateRoots { cluster: cluster() });
        }
    }
    let pairs = kinds.len();
    let qcp = qcp_p(setup.n_c)?;
    let label = match pairs {
        0 => DynPhase::I,
        1 => {
            if setup.chi_p_f <= qcp {
                DynPhase::IIBcs
            } else {
                DynPhase::IIBec
            }
        }
        2 => {
            if kinds.iter().all(|k| *k == PairKind::NegativeReal) {
                DynPhase::IIIStar
            } else {
                DynPhase::III
            }
        }
        _ => return Err(Error::DegenerateRoots { cluster: cluster() }),
    };
    let u_zero_isolated = isolated.iter().any(|u| u.norm() < REAL_TOL * j);
    Ok(LaxClassification { roots, isolated, isolated_pairs: pairs, kinds, label, u_zero_isolated })
}

/// Roots and phase label for the quench `chi_p_i → chi_p_f` on `levels`.
pub fn isolated_roots(chi_p_i: f64, chi_p_f: f64, n_c: f64, levels: &LevelSet) -> Result<LaxClassification> {
    let setup = LaxSetup::new(chi_p_i, chi_p_f, n_c, levels)?;
    let roots = cleared_roots(&setup)?;
    classify_roots(&setup, roots)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    fn levels() -> LevelSet {
        LevelSet::midpoint(30)
    }

    /// Monomial coefficients (ascending) of the cleared polynomial in `v = u − c`.
    fn coefficients(s: &LaxSetup, c: f64) -> Vec<f64> {
        fn mul(a: &[f64], b: &[f64]) -> Vec<f64> {
            let mut o = vec![0.0; a.len() + b.len() - 1];
            for (i, x) in a.iter().enumerate() {
                for (k, y) in b.iter().enumerate() {
                    o[i + k] += x * y;
                }
            }
            o
        }
        fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
            let mut o = vec![0.0; a.len().max(b.len())];
            for (i, x) in a.iter().enumerate() {
                o[i] += x;
            }
            for (i, x) in b.iter().enumerate() {
                o[i] += x;
            }
            o
        }
        let lin = |e: f64| vec![c - e, 1.0];
        let mut q = vec![1.0];
        for &e in &s.poles {
            q = mul(&q, &lin(e));
        }
        let mut p = vec![0.0];
        for k in 0..s.poles.len() {
            let mut t = vec![s.coef[k]];
            for (i, &e) in s.poles.iter().enumerate() {
                if i != k {
                    t = mul(&t, &lin(e));
                }
            }
            p = add(&p, &t);
        }
        let bq: Vec<f64> = q.iter().map(|x| x * s.beta).collect();
        let a = add(&bq, &mul(&[0.5 * c - s.mu, 0.5], &p));
        let pp = mul(&p, &p);
        let k = s.delta * s.delta / (2.0 * s.j);
        let lin_d = [k * c, k];
        add(&mul(&a, &a), &mul(&lin_d, &pp))
    }

    fn companion_roots(c: &[f64]) -> Vec<Complex64> {
        let n = c.len() - 1;
        let lead = c[n];
        let mut m = DMatrix::<f64>::zeros(n, n);
        for i in 1..n {
            m[(i, i - 1)] = 1.0;
        }
        for i in 0..n {
            m[(i, n - 1)] = -c[i] / lead;
        }
        m.complex_eigenvalues().iter().copied().collect()
    }

    #[test]
    fn cleared_polynomial_matches_rational_form() {
        let s = LaxSetup::new(1.0, 4.0, 0.35, &levels()).unwrap();
        for &u in &[Complex64::new(-0.3, 0.2), Complex64::new(0.71, 0.05), Complex64::new(2.5, -1.0)] {
            let mut q = Complex64::new(1.0, 0.0);
            for &e in &s.poles {
                q *= u - e;
            }
            let l2 = lax_norm(u, &s).unwrap();
            let (p, dp) = s.cleared(u);
            assert!((p - l2 * q * q).norm() < 1e-10 * p.norm());
            let h = 1e-6;
            let fd = (s.cleared(u + h).0 - s.cleared(u - h).0) / (2.0 * h);
            assert!((fd - dp).norm() < 1e-6 * dp.norm());
        }
    }

    /// Damped Newton polish on the rational form `L²(u)/N²`.
    fn polish(s: &LaxSetup, mut u: Complex64) -> Complex64 {
        let l2n = |u: Complex64| lax_norm(u, s).map(|v| v.norm()).unwrap_or(f64::INFINITY);
        for _ in 0..200 {
            let (f, df) = s.f(u);
            let b = s.beta;
            let l2 = lax_norm(u, s).unwrap();
            let de2 = u * 0.5 - s.mu + s.delta * s.delta / (2.0 * s.j);
            let dl2 = b * f + b * (u - 2.0 * s.mu) * df + 2.0 * f * df * s.e2(u) + f * f * de2;
            let mut step = l2 / dl2;
            let now = l2.norm();
            while l2n(u - step) > now && step.norm() > 1e-18 {
                step *= 0.5;
            }
            u -= step;
            if step.norm() < 1e-15 * u.norm().max(1e-3) {
                break;
            }
        }
        u
    }

    /// Zeros minus poles of `L²` inside `|u − c| = r`.
    fn winding(s: &LaxSetup, c: Complex64, r: f64) -> f64 {
        let n = 4000;
        let mut total = 0.0;
        let mut prev = lax_norm(c + r, s).unwrap();
        for k in 1..=n {
            let z = c + Complex64::from_polar(r, 2.0 * std::f64::consts::PI * k as f64 / n as f64);
            let v = lax_norm(z, s).unwrap();
            total += (v / prev).arg();
            prev = v;
        }
        total / (2.0 * std::f64::consts::PI)
    }

    #[test]
    fn isolated_roots_pass_argument_principle() {
        for &(ci, cf) in &[(1.0, 4.0), (1.0, 5.9), (2.0, 3.1), (1.0, 7.0)] {
            let s = LaxSetup::new(ci, cf, 0.35, &levels()).unwrap();
            let cls = isolated_roots(ci, cf, 0.35, &levels()).unwrap();
            for u in &cls.isolated {
                let near = cls
                    .roots
                    .iter()
                    .filter(|v| (*v - u).norm() > 0.0)
                    .map(|v| (v - u).norm())
                    .chain(s.poles.iter().map(|&e| (u - e).norm()))
                    .fold(f64::INFINITY, f64::min);
                let w = winding(&s, *u, 0.3 * near);
                assert!((w - 1.0).abs() < 1e-6, "{ci}->{cf}: winding {w} at {u}");
            }
        }
    }

    #[test]
    fn companion_roots_are_found_by_aberth() {
        for &(ci, cf) in &[(1.0, 4.0), (1.0, 5.9), (2.0, 3.1), (4.0, 1.0)] {
            let s = LaxSetup::new(ci, cf, 0.35, &levels()).unwrap();
            let ab = cleared_roots(&s).unwrap();
            assert_eq!(ab.len(), 60);
            let mut comp: Vec<Complex64> = Vec::new();
            for v in companion_roots(&coefficients(&s, 1.0)) {
                let u = polish(&s, v + 1.0);
                let ok = u.norm() < 1e3 && lax_norm(u, &s).is_ok_and(|v| v.norm() < 1e-12);
                if ok && !is_continuum(u, &s.poles, 1.0) && comp.iter().all(|w| (w - u).norm() > 1e-9) {
                    comp.push(u);
                }
            }
            let cls = classify_roots(&s, ab.clone()).unwrap();
            // the companion matrix is poorly conditioned near the origin, so it
            // only has to find a subset of the isolated roots
            assert!(comp.len() >= cls.isolated.len().min(2), "{ci}->{cf}: {comp:?}");
            for u in &comp {
                let d = cls.isolated.iter().map(|v| (v - u).norm()).fold(f64::INFINITY, f64::min);
                assert!(d < 1e-8, "{ci}->{cf}: companion root {u} not isolated by Aberth ({d})");
            }
            for u in &ab {
                let (p, dp) = s.cleared(*u);
                assert!(p.norm() <= 1e-8 * dp.norm().max(1.0));
            }
        }
    }

    #[test]
    fn roots_come_in_conjugate_pairs() {
        let s = LaxSetup::new(1.0, 4.9, 0.35, &levels()).unwrap();
        let r = cleared_roots(&s).unwrap();
        for u in &r {
            let d = r.iter().map(|v| (v - u.conj()).norm()).fold(f64::INFINITY, f64::min);
            assert!(d < 1e-7);
        }
    }

    #[test]
    fn figure_labels() {
        let cases = [
            (4.0, 1.0, "I"),
            (2.0, 3.1, "II"),
            (1.0, 7.0, "II"),
            (1.0, 4.0, "III"),
            (1.0, 4.9, "III"),
            (1.0, 5.9, "III*"),
        ];
        for (ci, cf, want) in cases {
            let c = isolated_roots(ci, cf, 0.35, &levels()).unwrap();
            assert_eq!(c.label.coarse(), want, "{ci}->{cf}: {:?}", c.isolated);
        }
    }

    #[test]
    fn no_quench_has_one_pair_at_gap() {
        let ls = levels();
        let s = LaxSetup::new(3.0, 3.0, 0.35, &ls).unwrap();
        let c = classify_roots(&s, cleared_roots(&s).unwrap()).unwrap();
        assert_eq!(c.isolated_pairs, 1);
        // E(u) = 0: u = 2μ − Δ²/J ± i(Δ/J)√(4Jμ − Δ²)
        let re = 2.0 * s.mu - s.delta * s.delta;
        let im = s.delta * (4.0 * s.mu - s.delta * s.delta).sqrt();
        for u in &c.isolated {
            assert!((u.re - re).abs() < 1e-8 && (u.im.abs() - im).abs() < 1e-8);
        }
    }

    #[test]
    fn beta_zero_norm_is_square() {
        let s = LaxSetup::new(2.0, 2.0, 0.35, &levels()).unwrap();
        for &u in &[-0.5, -2.0, -0.01] {
            let l2 = lax_norm(Complex64::new(u, 0.0), &s).unwrap();
            assert!(l2.re >= 0.0 && l2.im.abs() < 1e-14);
        }
    }

    #[test]
    fn qcp_quench_has_root_at_origin() {
        let ls = levels();
        let qcp = qcp_p(0.35).unwrap();
        for &ci in &[1.0, 2.5, 9.0] {
            let s = LaxSetup::new(ci, qcp, 0.35, &ls).unwrap();
            let l2 = lax_norm(Complex64::new(0.0, 0.0), &s).unwrap();
            assert!(l2.norm() < 1e-10, "{ci}: {l2}");
        }
    }

    #[test]
    fn pole_is_rejected() {
        let s = LaxSetup::new(2.0, 3.0, 0.35, &levels()).unwrap();
        let u = Complex64::new(s.poles[3], 0.0);
        assert!(matches!(lax_norm(u, &s), Err(Error::PoleHit { .. })));
    }

    #[test]
    fn closed_form_matches_texture_vector() {
        let ls = levels();
        let params = ModelParams::new(2.0, 0.0, 0.35);
        let sol = solve_p(&params, &ls).unwrap();
        let s = LaxSetup::from_solution(&sol, 2.0, 3.5, 0.35, &ls, 1.0);
        let ring: Vec<f64> = (0..7).map(|r| 2.0 * std::f64::consts::PI * r as f64 / 7.0).collect();
        let mut eta = Vec::new();
        let mut phi = Vec::new();
        let mut w = Vec::new();
        for (e, wt) in ls.iter() {
            for &p in &ring {
                eta.push(e);
                phi.push(p);
                w.push(wt / ring.len() as f64);
            }
        }
        let ens = Ensemble::custom(eta, phi, w).unwrap();
        let st = crate::groundstate::texture_from_solution(&sol, &params, &ens, 0.0, 0.0).unwrap();
        for &u in &[Complex64::new(-0.4, 0.0), Complex64::new(0.3, 0.7), Complex64::new(2.4, 0.0)] {
            let a = lax_norm(u, &s).unwrap();
            let b = lax_norm_state(u, &st, &ens, 3.5, 1.0).unwrap();
            assert!((a - b).norm() < 1e-10 * a.norm().max(1e-3), "{a} vs {b}");
        }
    }
}
