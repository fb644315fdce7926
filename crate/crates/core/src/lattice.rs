//! Site grid, couplings `η e^{iφ}`, and the momentum-space view.

use crate::{Complex64, Error, Result};
use std::f64::consts::PI;

const MERGE_TOL: f64 = 1e-12;

/// Lattice of `n_x × n_y` sites with couplings `η_n e^{iφ_n} = cos θ_j e^{-iψ_l}`.
///
/// Sites are stored row-major in `j`: site `n = j·n_y + l`.
#[derive(Debug, Clone)]
pub struct LatticeGrid {
    pub n_x: usize,
    pub n_y: usize,
    pub eta: Vec<f64>,
    pub phi: Vec<f64>,
    pub theta_x: Vec<f64>,
    pub psi_y: Vec<f64>,
}

impl LatticeGrid {
    pub fn n_sites(&self) -> usize {
        self.eta.len()
    }

    pub fn site(&self, j: usize, l: usize) -> usize {
        j * self.n_y + l
    }
}

fn wrap_angle(x: f64) -> f64 {
    let y = x.rem_euclid(2.0 * PI);
    if y >= 2.0 * PI - 1e-13 {
        0.0
    } else {
        y
    }
}

pub fn build_grid(n_x: usize, n_y: usize) -> Result<LatticeGrid> {
    if n_x < 2 {
        return Err(Error::InvalidInput(format!("n_x must be at least 2, got {n_x}")));
    }
    if n_y < 1 {
        return Err(Error::InvalidInput("n_y must be at least 1".into()));
    }
    let theta_x: Vec<f64> = (0..n_x).map(|j| 2.0 * PI * j as f64 / n_x as f64).collect();
    let psi_y: Vec<f64> = (0..n_y).map(|l| 2.0 * PI * l as f64 / n_y as f64).collect();
    let mut eta = Vec::with_capacity(n_x * n_y);
    let mut phi = Vec::with_capacity(n_x * n_y);
    for &th in &theta_x {
        let c = th.cos();
        for &ps in &psi_y {
            // negative cosines fold into a π phase shift
            let shift = if c < 0.0 { PI } else { 0.0 };
            eta.push(c.abs());
            phi.push(wrap_angle(shift - ps));
        }
    }
    Ok(LatticeGrid { n_x, n_y, eta, phi, theta_x, psi_y })
}

/// Distinct coupling magnitudes with multiplicities.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelSet {
    pub eta: Vec<f64>,
    pub weight: Vec<f64>,
}

impl LevelSet {
    pub fn new(eta: Vec<f64>, weight: Vec<f64>) -> Result<Self> {
        if eta.len() != weight.len() || eta.is_empty() {
            return Err(Error::InvalidInput("level set needs matching non-empty arrays".into()));
        }
        if eta.iter().any(|&e| !(0.0..=1.0).contains(&e)) || weight.iter().any(|&w| w <= 0.0) {
            return Err(Error::InvalidInput("levels need η in [0,1] and positive weights".into()));
        }
        Ok(LevelSet { eta, weight })
    }

    /// Midpoint levels `η_j = cos(π(j+1/2)/(2n))` with unit weights.
    ///
    /// The `η²` values are the midpoint nodes of the continuum density
    /// `1/(π√(y(1-y)))`, so sums over this set approach continuum averages.
    pub fn midpoint(n: usize) -> Self {
        let mut eta: Vec<f64> = (0..n)
            .map(|j| (PI * (j as f64 + 0.5) / (2.0 * n as f64)).cos())
            .collect();
        eta.reverse();
        LevelSet { eta, weight: vec![1.0; n] }
    }

    pub fn len(&self) -> usize {
        self.eta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eta.is_empty()
    }

    pub fn total_weight(&self) -> f64 {
        self.weight.iter().sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.eta.iter().copied().zip(self.weight.iter().copied())
    }
}

/// Sorted momentum view: ascending levels, periodic phase ring, and the
/// sites sitting at each `(level, ring)` cell.
#[derive(Debug, Clone)]
pub struct MomentumGrid {
    pub levels: LevelSet,
    pub phi_ring: Vec<f64>,
    /// `site_index_map[level * ring_len + ring]` lists lattice sites.
    pub site_index_map: Vec<Vec<usize>>,
    pub site_level: Vec<usize>,
    pub site_ring: Vec<usize>,
}

impl MomentumGrid {
    pub fn ring_len(&self) -> usize {
        self.phi_ring.len()
    }

    pub fn cell(&self, level: usize, ring: usize) -> &[usize] {
        &self.site_index_map[level * self.ring_len() + ring]
    }
}

fn merge_sorted(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(|a, b| a.total_cmp(b));
    let mut out: Vec<f64> = Vec::new();
    for x in v {
        match out.last() {
            Some(&last) if (x - last).abs() <= MERGE_TOL => {}
            _ => out.push(x),
        }
    }
    out
}

fn locate(sorted: &[f64], x: f64) -> usize {
    let i = sorted.partition_point(|&s| s < x - MERGE_TOL);
    debug_assert!(i < sorted.len() && (sorted[i] - x).abs() <= MERGE_TOL);
    i
}

pub fn momentum_grid(grid: &LatticeGrid) -> MomentumGrid {
    let eta_levels = merge_sorted(grid.eta.clone());
    let mut ring = merge_sorted(grid.phi.clone());
    // 2π - tiny already wrapped to 0; guard a trailing alias of 0
    if ring.len() > 1 && (2.0 * PI - ring[ring.len() - 1]) <= MERGE_TOL {
        ring.pop();
    }
    let nr = ring.len();
    let mut weight = vec![0.0; eta_levels.len()];
    let mut map = vec![Vec::new(); eta_levels.len() * nr];
    let mut site_level = Vec::with_capacity(grid.n_sites());
    let mut site_ring = Vec::with_capacity(grid.n_sites());
    for n in 0..grid.n_sites() {
        let k = locate(&eta_levels, grid.eta[n]);
        let r = locate(&ring, grid.phi[n]);
        weight[k] += 1.0;
        map[k * nr + r].push(n);
        site_level.push(k);
        site_ring.push(r);
    }
    MomentumGrid {
        levels: LevelSet { eta: eta_levels, weight },
        phi_ring: ring,
        site_index_map: map,
        site_level,
        site_ring,
    }
}

/// `(Σ η, Σ η², Σ η⁴)` over all sites.
pub fn site_weight_sums(grid: &LatticeGrid) -> (f64, f64, f64) {
    grid.eta.iter().fold((0.0, 0.0, 0.0), |(a, b, c), &e| {
        let e2 = e * e;
        (a + e, b + e2, c + e2 * e2)
    })
}

/// How the members of an [`Ensemble`] stand in for lattice sites.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnsembleKind {
    /// One member per lattice site.
    Sites,
    /// One member per `(level, ring)` cell; exact for states that depend on
    /// `(η, φ)` only.
    Cells,
    /// One member per level at `φ = 0`; exact for states with winding `m`
    /// (`S⁻(φ) = e^{-imφ} S⁻(0)`), i.e. pure p (`m = 1`) or pure d (`m = 2`).
    Levels { winding: u8 },
}

/// Weighted set of pseudospins used by the dynamics and solvers.
#[derive(Debug, Clone)]
pub struct Ensemble {
    pub kind: EnsembleKind,
    pub eta: Vec<f64>,
    pub phi: Vec<f64>,
    pub weight: Vec<f64>,
    /// `η e^{iφ}`
    pub l_p: Vec<Complex64>,
    /// `η² e^{2iφ}`
    pub l_d: Vec<Complex64>,
    total: f64,
}

impl Ensemble {
    fn assemble(kind: EnsembleKind, eta: Vec<f64>, phi: Vec<f64>, weight: Vec<f64>) -> Self {
        let l_p = eta.iter().zip(&phi).map(|(&e, &p)| Complex64::from_polar(e, p)).collect();
        let l_d = eta
            .iter()
            .zip(&phi)
            .map(|(&e, &p)| Complex64::from_polar(e * e, 2.0 * p))
            .collect();
        let total = weight.iter().sum();
        Ensemble { kind, eta, phi, weight, l_p, l_d, total }
    }

    pub fn sites(grid: &LatticeGrid) -> Self {
        Self::assemble(EnsembleKind::Sites, grid.eta.clone(), grid.phi.clone(), vec![1.0; grid.n_sites()])
    }

    /// Cell ensemble; empty cells are skipped.
    pub fn cells(mg: &MomentumGrid) -> Self {
        let nr = mg.ring_len();
        let (mut eta, mut phi, mut weight) = (Vec::new(), Vec::new(), Vec::new());
        for k in 0..mg.levels.len() {
            for r in 0..nr {
                let c = mg.cell(k, r).len();
                if c > 0 {
                    eta.push(mg.levels.eta[k]);
                    phi.push(mg.phi_ring[r]);
                    weight.push(c as f64);
                }
            }
        }
        Self::assemble(EnsembleKind::Cells, eta, phi, weight)
    }

    /// Level ensemble for winding-`m` states.
    pub fn levels(levels: &LevelSet, winding: u8) -> Self {
        assert!(winding == 1 || winding == 2, "winding must be 1 or 2");
        let n = levels.len();
        Self::assemble(
            EnsembleKind::Levels { winding },
            levels.eta.clone(),
            vec![0.0; n],
            levels.weight.clone(),
        )
    }

    /// Arbitrary members, mainly for small test systems.
    pub fn custom(eta: Vec<f64>, phi: Vec<f64>, weight: Vec<f64>) -> Result<Self> {
        if eta.len() != phi.len() || eta.len() != weight.len() || eta.is_empty() {
            return Err(Error::InvalidInput("ensemble arrays must match and be non-empty".into()));
        }
        Ok(Self::assemble(EnsembleKind::Sites, eta, phi, weight))
    }

    pub fn len(&self) -> usize {
        self.eta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eta.is_empty()
    }

    /// Total weight `N`.
    pub fn total_weight(&self) -> f64 {
        self.total
    }

    /// Whether the p (`c = 0`) or d (`c = 1`) sum is identically zero by symmetry.
    pub(crate) fn channel_suppressed(&self, c: usize) -> bool {
        match self.kind {
            EnsembleKind::Levels { winding } => (winding == 1 && c == 1) || (winding == 2 && c == 0),
            _ => false,
        }
    }
}
