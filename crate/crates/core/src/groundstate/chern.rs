//! Discrete Chern number from signed solid angles on the `(k, φ)` grid.

use crate::dynamics::SpinState;
use crate::lattice::{Ensemble, EnsembleKind, MomentumGrid};
use crate::{cross, dot, norm, Error, Result, Vec3};
use std::f64::consts::PI;

/// Bloch vectors on the level × ring grid, level-major with ascending `η`
/// and ascending `φ`.
#[derive(Debug, Clone)]
pub struct KTexture {
    pub n_levels: usize,
    pub n_ring: usize,
    pub spins: Vec<Vec3>,
}

impl KTexture {
    pub fn at(&self, k: usize, r: usize) -> &Vec3 {
        &self.spins[k * self.n_ring + r]
    }

    /// Texture from a cell-ensemble state; every cell must be occupied.
    pub fn from_cells(ens: &Ensemble, state: &SpinState, mg: &MomentumGrid) -> Result<Self> {
        let nr = mg.ring_len();
        if ens.kind != EnsembleKind::Cells || ens.len() != mg.levels.len() * nr {
            return Err(Error::InvalidInput("need a fully occupied cell ensemble".into()));
        }
        Ok(KTexture { n_levels: mg.levels.len(), n_ring: nr, spins: state.s.clone() })
    }

    /// Texture from a per-site state, taking the first site of each cell.
    pub fn from_sites(state: &SpinState, mg: &MomentumGrid) -> Result<Self> {
        let nr = mg.ring_len();
        let mut spins = Vec::with_capacity(mg.levels.len() * nr);
        for k in 0..mg.levels.len() {
            for r in 0..nr {
                let cell = mg.cell(k, r);
                let &s = cell
                    .first()
                    .ok_or_else(|| Error::InvalidInput(format!("empty cell ({k}, {r})")))?;
                spins.push(state.s[s]);
            }
        }
        Ok(KTexture { n_levels: mg.levels.len(), n_ring: nr, spins })
    }

    /// Texture from a winding-`m` level state, rotated onto the ring.
    pub fn from_levels(ens: &Ensemble, state: &SpinState, ring: &[f64]) -> Result<Self> {
        let m = match ens.kind {
            EnsembleKind::Levels { winding } => winding as f64,
            _ => return Err(Error::InvalidInput("need a level ensemble".into())),
        };
        let mut spins = Vec::with_capacity(ens.len() * ring.len());
        for s in &state.s {
            for &phi in ring {
                // S⁻(φ) = e^{-imφ} S⁻(0) rotates (S^x, S^y) by +mφ
                let (sn, cs) = (m * phi).sin_cos();
                spins.push([cs * s[0] - sn * s[1], sn * s[0] + cs * s[1], s[2]]);
            }
        }
        Ok(KTexture { n_levels: ens.len(), n_ring: ring.len(), spins })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChernDiscrete {
    pub value: i32,
    pub raw: f64,
}

fn unit(s: &Vec3) -> Vec3 {
    let n = norm(s);
    if n == 0.0 {
        [0.0, 0.0, -1.0]
    } else {
        [s[0] / n, s[1] / n, s[2] / n]
    }
}

fn solid_angle(a: &Vec3, b: &Vec3, c: &Vec3) -> f64 {
    2.0 * dot(a, &cross(b, c)).atan2(1.0 + dot(a, b) + dot(b, c) + dot(c, a))
}

/// Signed solid-angle sum over the triangulated disk, closed by a fictitious
/// all-down ring beyond the cutoff and a fan at the innermost ring.
pub fn chern_discrete(tex: &KTexture) -> Result<ChernDiscrete> {
    let (nk, nr) = (tex.n_levels, tex.n_ring);
    if nk == 0 || nr < 3 {
        return Err(Error::InvalidInput("Chern grid needs levels and at least 3 ring points".into()));
    }
    let down = [0.0, 0.0, -1.0];
    let sig = |k: usize, r: usize| -> Vec3 {
        if k >= nk {
            down
        } else {
            unit(tex.at(k, r % nr))
        }
    };
    let mut total = 0.0;
    for k in 0..nk {
        for r in 0..nr {
            let a = sig(k, r);
            let b = sig(k + 1, r);
            let c = sig(k + 1, r + 1);
            let d = sig(k, r + 1);
            total += solid_angle(&a, &b, &c) + solid_angle(&a, &c, &d);
        }
    }
    let a = sig(0, 0);
    for r in 1..nr - 1 {
        total += solid_angle(&a, &sig(0, r), &sig(0, r + 1));
    }
    let raw = total / (4.0 * PI);
    let value = raw.round();
    if (raw - value).abs() > 0.01 {
        return Err(Error::NonIntegerChern(raw));
    }
    Ok(ChernDiscrete { value: value as i32, raw })
}
