//! Long-time statistics, asymptotic chemical potential, oscillation
//! frequency, and dynamical-phase labels.

use super::Trace;
use crate::{Complex64, Error, Result};
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Closed analysis interval `[t0, t1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub t0: f64,
    pub t1: f64,
}

impl Window {
    pub fn second_half(trace: &Trace) -> Self {
        let t = trace.t_final();
        Window { t0: 0.5 * t, t1: t }
    }

    /// Second half of `[0, T]` with `T = min(t_final, 0.85·T_rec)`, where
    /// `T_rec` is the finite-grid revival time of [`recurrence_time`].
    pub fn recurrence_aware(trace: &Trace, eta_levels: &[f64], j: f64) -> Self {
        let t_end = trace.t_final();
        let half: Vec<f64> = trace
            .times
            .iter()
            .zip(&trace.delta_p)
            .filter(|(t, _)| **t <= 0.5 * t_end)
            .map(|(_, d)| d.norm())
            .collect();
        let dd: Vec<f64> = trace
            .times
            .iter()
            .zip(&trace.delta_d)
            .filter(|(t, _)| **t <= 0.5 * t_end)
            .map(|(_, d)| d.norm())
            .collect();
        let mean = |v: &[f64]| if v.is_empty() { 0.0 } else { v.iter().sum::<f64>() / v.len() as f64 };
        let t_rec = recurrence_time(eta_levels, mean(&half), mean(&dd), j);
        let t = t_end.min(0.85 * t_rec);
        Window { t0: 0.5 * t, t1: t }
    }

    fn indices(&self, trace: &Trace) -> Vec<usize> {
        (0..trace.len())
            .filter(|&k| trace.times[k] >= self.t0 - 1e-12 && trace.times[k] <= self.t1 + 1e-12)
            .collect()
    }
}

/// Revival time `2π / max_k |ω_{k+1} − ω_k|` of a discrete level set, with
/// `ω = 2√(J²η⁴ + Δ_p²η² + Δ_d²η⁴)` the free precession rate at gap
/// magnitudes `(Δ_p, Δ_d)`. Levels with `η < 1e-9` are ignored.
pub fn recurrence_time(eta_levels: &[f64], dp: f64, dd: f64, j: f64) -> f64 {
    let mut eta: Vec<f64> = eta_levels.iter().copied().filter(|&e| e >= 1e-9).collect();
    eta.sort_by(|a, b| a.total_cmp(b));
    eta.dedup();
    let w: Vec<f64> = eta
        .iter()
        .map(|&e| {
            let e2 = e * e;
            2.0 * (j * j * e2 * e2 + dp * dp * e2 + dd * dd * e2 * e2).sqrt()
        })
        .collect();
    let gap = w.windows(2).map(|p| (p[1] - p[0]).abs()).fold(0.0, f64::max);
    if gap > 0.0 {
        2.0 * PI / gap
    } else {
        f64::INFINITY
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LongTimeStats {
    pub avg_p: f64,
    pub std_p: f64,
    pub avg_d: f64,
    pub std_d: f64,
    pub samples: usize,
}

fn moments(v: impl Iterator<Item = f64>) -> (f64, f64, usize) {
    let (mut s1, mut s2, mut n) = (0.0, 0.0, 0usize);
    for x in v {
        s1 += x;
        s2 += x * x;
        n += 1;
    }
    if n == 0 {
        return (f64::NAN, f64::NAN, 0);
    }
    let m = s1 / n as f64;
    (m, (s2 / n as f64 - m * m).max(0.0).sqrt(), n)
}

/// `Avg` and `Std = √(Avg(|Δ|²) − Avg(|Δ|)²)` of both order parameters.
pub fn long_time_stats(trace: &Trace, window: &Window) -> LongTimeStats {
    let idx = window.indices(trace);
    let (avg_p, std_p, samples) = moments(idx.iter().map(|&k| trace.delta_p[k].norm()));
    let (avg_d, std_d, _) = moments(idx.iter().map(|&k| trace.delta_d[k].norm()));
    LongTimeStats { avg_p, std_p, avg_d, std_d, samples }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MuInf {
    pub mu_inf: f64,
    /// Largest deviation of the unwrapped phase from the linear fit (rad).
    pub residual: f64,
    pub low_confidence: bool,
}

/// Phase residual above which [`MuInf::low_confidence`] is set.
pub const MU_INF_PHASE_TOL: f64 = 0.05;

fn unwrap_phase(z: &[Complex64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(z.len());
    let mut offset = 0.0;
    let mut prev: Option<f64> = None;
    for v in z {
        let a = v.arg();
        if let Some(p) = prev {
            let mut d = a - p;
            while d > PI {
                d -= 2.0 * PI;
                offset -= 2.0 * PI;
            }
            while d < -PI {
                d += 2.0 * PI;
                offset += 2.0 * PI;
            }
        }
        prev = Some(a);
        out.push(a + offset);
    }
    out
}

/// `μ∞ = −(slope of unwrapped arg Δ_p)/2` from a least-squares line.
pub fn extract_mu_inf(trace: &Trace, window: &Window) -> MuInf {
    let idx = window.indices(trace);
    if idx.len() < 3 {
        return MuInf { mu_inf: f64::NAN, residual: f64::INFINITY, low_confidence: true };
    }
    let z: Vec<Complex64> = idx.iter().map(|&k| trace.delta_p[k]).collect();
    let ph = unwrap_phase(&z);
    let t: Vec<f64> = idx.iter().map(|&k| trace.times[k]).collect();
    let n = t.len() as f64;
    let tm = t.iter().sum::<f64>() / n;
    let pm = ph.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (x, y) in t.iter().zip(&ph) {
        sxy += (x - tm) * (y - pm);
        sxx += (x - tm) * (x - tm);
    }
    let slope = sxy / sxx;
    let residual = t
        .iter()
        .zip(&ph)
        .map(|(x, y)| (y - pm - slope * (x - tm)).abs())
        .fold(0.0, f64::max);
    let tiny = z.iter().any(|v| v.norm() < 1e-12);
    MuInf { mu_inf: -0.5 * slope, residual, low_confidence: tiny || !(residual <= MU_INF_PHASE_TOL) }
}

/// Dominant oscillation frequency (cycles per unit time) of `|Δ_p|` in the
/// window: DFT peak of the mean-subtracted series refined by a parabola
/// through the log-magnitudes of the neighbouring bins.
pub fn osc_frequency(trace: &Trace, window: &Window) -> Result<f64> {
    let idx = window.indices(trace);
    if idx.len() < 8 {
        return Err(Error::NoPeak);
    }
    let x: Vec<f64> = idx.iter().map(|&k| trace.delta_p[k].norm()).collect();
    let n = x.len();
    let mean = x.iter().sum::<f64>() / n as f64;
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
    if !(var.sqrt() > 1e-3 * mean.abs().max(1e-300)) {
        return Err(Error::NoPeak);
    }
    let mut buf: Vec<rustfft::num_complex::Complex<f64>> =
        x.iter().map(|v| rustfft::num_complex::Complex::new(v - mean, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let half = n / 2;
    let mag: Vec<f64> = buf[..=half].iter().map(|c| c.norm()).collect();
    let (kmax, &peak) = mag
        .iter()
        .enumerate()
        .skip(1)
        .max_by(|a, b| a.1.total_cmp(b.1))
        .ok_or(Error::NoPeak)?;
    let floor = mag[1..].iter().sum::<f64>() / (mag.len() - 1) as f64;
    if peak < 3.0 * floor {
        return Err(Error::NoPeak);
    }
    let mut k = kmax as f64;
    if kmax > 1 && kmax < half {
        let (a, b, c) = (mag[kmax - 1].max(1e-300).ln(), peak.ln(), mag[kmax + 1].max(1e-300).ln());
        let den = a - 2.0 * b + c;
        if den < 0.0 {
            k += 0.5 * (a - c) / den;
        }
    }
    let dt = (trace.times[idx[n - 1]] - trace.times[idx[0]]) / (n - 1) as f64;
    Ok(k / (n as f64 * dt))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DynPhase {
    #[serde(rename = "I")]
    I,
    #[serde(rename = "II-BCS")]
    IIBcs,
    #[serde(rename = "II-BEC")]
    IIBec,
    #[serde(rename = "III")]
    III,
    #[serde(rename = "III*")]
    IIIStar,
}

impl DynPhase {
    pub fn as_str(&self) -> &'static str {
        match self {
            DynPhase::I => "I",
            DynPhase::IIBcs => "II-BCS",
            DynPhase::IIBec => "II-BEC",
            DynPhase::III => "III",
            DynPhase::IIIStar => "III*",
        }
    }

    /// Label with the BCS/BEC split of phase II dropped.
    pub fn coarse(&self) -> &'static str {
        match self {
            DynPhase::IIBcs | DynPhase::IIBec => "II",
            other => other.as_str(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassifyThresholds {
    /// Phase I when `Avg < a_tol·Δ_{p,0}`.
    pub a_tol: f64,
    /// Phase II when `Std < s_tol·Avg`.
    pub s_tol: f64,
    /// Within phase III, `Std < iii_star_std·Avg` marks III*.
    pub iii_star_std: f64,
    /// Ratios within this factor of a threshold are flagged ambiguous.
    pub ambiguity_factor: f64,
}

impl Default for ClassifyThresholds {
    fn default() -> Self {
        ClassifyThresholds { a_tol: 1e-2, s_tol: 1e-2, iii_star_std: 0.2, ambiguity_factor: 1.5 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub label: DynPhase,
    pub avg_ratio: f64,
    pub std_ratio: f64,
    pub mu_inf: f64,
    /// `log10` distance of the deciding ratio from its threshold.
    pub margin: f64,
    pub ambiguous: bool,
}

/// Threshold classification of a trace. `lax_iii_star`, when given, settles
/// III versus III* instead of the Std-jump heuristic.
pub fn classify_dynamical_phase(
    stats: &LongTimeStats,
    mu_inf: &MuInf,
    delta_p0: f64,
    th: &ClassifyThresholds,
    lax_iii_star: Option<bool>,
) -> Classification {
    let avg_ratio = stats.avg_p / delta_p0;
    let std_ratio = stats.std_p / stats.avg_p;
    let m_avg = (avg_ratio / th.a_tol).log10().abs();
    let m_std = (std_ratio / th.s_tol).log10().abs();
    let (label, margin) = if avg_ratio < th.a_tol {
        (DynPhase::I, m_avg)
    } else if std_ratio < th.s_tol {
        let l = if mu_inf.mu_inf >= 0.0 { DynPhase::IIBcs } else { DynPhase::IIBec };
        (l, m_avg.min(m_std))
    } else {
        let star = lax_iii_star.unwrap_or(std_ratio < th.iii_star_std);
        (if star { DynPhase::IIIStar } else { DynPhase::III }, m_avg.min(m_std))
    };
    Classification {
        label,
        avg_ratio,
        std_ratio,
        mu_inf: mu_inf.mu_inf,
        margin,
        ambiguous: margin < th.ambiguity_factor.log10(),
    }
}

/// Transient instability of a seeded channel: `|Δ_d|` grows exponentially,
/// then `|Δ_p|` departs from a reference run without the competing coupling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompetitionOnset {
    /// Fitted exponential rate of `|Δ_d|` between the 10× onset and half peak.
    pub rate: f64,
    pub r_squared: f64,
    pub t_onset: f64,
    pub t_peak: f64,
    /// First time `||Δ_p| − |Δ_p^ref||` exceeds 0.2 of the reference scale.
    pub t_departure: f64,
}

/// Detects growth-then-kick in `with_d` against the reference trace
/// `without_d` (same sampling). Requires a ≥ 100× rise of `|Δ_d|`, a
/// log-linear rise with R² > 0.9, `|Δ_p|` within 5% of the reference until
/// onset, and a departure above 20% after onset and within one period of
/// the `|Δ_d|` peak.
pub fn competition_onset(with_d: &Trace, without_d: &Trace) -> Option<CompetitionOnset> {
    let n = with_d.len().min(without_d.len());
    let dd: Vec<f64> = with_d.delta_d[..n].iter().map(|z| z.norm()).collect();
    let start = *dd.first()?;
    let (k_peak, peak) = dd.iter().copied().enumerate().fold((0, 0.0), |a, (k, x)| if x > a.1 { (k, x) } else { a });
    if !(start > 0.0) || peak < 100.0 * start {
        return None;
    }
    let k_on = dd.iter().position(|&x| x > 10.0 * start)?;
    let k_half = dd.iter().position(|&x| x > 0.5 * peak)?;
    if k_half < k_on + 4 {
        return None;
    }
    let xs = &with_d.times[k_on..=k_half];
    let ys: Vec<f64> = dd[k_on..=k_half].iter().map(|x| x.ln()).collect();
    let m = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / m, ys.iter().sum::<f64>() / m);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let rate = sxy / sxx;
    let r_squared = sxy * sxy / (sxx * syy);
    let scale = without_d.delta_p[..n].iter().map(|z| z.norm()).fold(0.0, f64::max);
    let dev = |k: usize| (with_d.delta_p[k].norm() - without_d.delta_p[k].norm()).abs() / scale;
    let (t_onset, t_peak) = (with_d.times[k_on], with_d.times[k_peak]);
    let quiet = (0..=k_on).all(|k| dev(k) < 0.05);
    let k_dep = (0..n).find(|&k| dev(k) > 0.2)?;
    let t_departure = with_d.times[k_dep];
    let ok = quiet && rate > 0.0 && r_squared > 0.9 && t_departure > t_onset && t_departure <= t_peak + 2.0 * PI;
    ok.then_some(CompetitionOnset { rate, r_squared, t_onset, t_peak, t_departure })
}
