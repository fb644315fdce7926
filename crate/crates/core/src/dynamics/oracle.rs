//! Dense density-matrix reference for tiny systems.

use super::SpinState;
use crate::groundstate::ModelParams;
use crate::lattice::Ensemble;
use crate::{Complex64, Error, Result, Vec3};
use nalgebra::DMatrix;

type M = DMatrix<Complex64>;

fn c(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

/// Single-site operator embedded at `site` of `n` spins (site 0 is the most
/// significant factor; basis state 0 is spin up).
fn embed(op: &M, site: usize, n: usize) -> M {
    let mut out = M::from_element(1, 1, c(1.0));
    for k in 0..n {
        let f = if k == site { op.clone() } else { M::identity(2, 2) };
        out = out.kronecker(&f);
    }
    out
}

struct Ops {
    sx: Vec<M>,
    sy: Vec<M>,
    sz: Vec<M>,
}

/// Exact `⟨S_n⟩(t)` under `H = Σ 2Jη² S^z − χ_p A_p†A_p − χ_d A_d†A_d` with
/// jump operators `√Γ_c A_c`, `A_c = Σ l_c S⁻`, starting from the product
/// state `state0`. Classical RK4 with `steps` steps; samples at every step.
pub fn exact_lindblad_oracle(
    ens: &Ensemble,
    params: &ModelParams,
    state0: &SpinState,
    t_final: f64,
    steps: usize,
) -> Result<Vec<(f64, Vec<Vec3>)>> {
    let n = ens.len();
    if n > 4 {
        return Err(Error::SizeExceeded(n));
    }
    if state0.len() != n || steps == 0 {
        return Err(Error::InvalidInput("oracle needs a matching state and steps ≥ 1".into()));
    }
    let dim = 1usize << n;
    let half = c(0.5);
    let i = Complex64::i();
    let sx1 = M::from_row_slice(2, 2, &[c(0.0), half, half, c(0.0)]);
    let sy1 = M::from_row_slice(2, 2, &[c(0.0), -i * 0.5, i * 0.5, c(0.0)]);
    let sz1 = M::from_row_slice(2, 2, &[half, c(0.0), c(0.0), -half]);
    let sm1 = M::from_row_slice(2, 2, &[c(0.0), c(0.0), c(1.0), c(0.0)]);
    let ops = Ops {
        sx: (0..n).map(|k| embed(&sx1, k, n)).collect(),
        sy: (0..n).map(|k| embed(&sy1, k, n)).collect(),
        sz: (0..n).map(|k| embed(&sz1, k, n)).collect(),
    };
    let sm: Vec<M> = (0..n).map(|k| embed(&sm1, k, n)).collect();
    let ntot = ens.total_weight();
    let (cp, cd) = (params.chi_p_n / ntot, params.chi_d_n / ntot);
    let (gp, gd) = (params.loss_p * cp, params.loss_d * cd);
    let mut a_p = M::zeros(dim, dim);
    let mut a_d = M::zeros(dim, dim);
    let mut h = M::zeros(dim, dim);
    for (k, smk) in sm.iter().enumerate() {
        a_p += smk * ens.l_p[k];
        a_d += smk * ens.l_d[k];
        h += &ops.sz[k] * c(2.0 * params.j * ens.eta[k] * ens.eta[k]);
    }
    let apd = a_p.adjoint();
    let add = a_d.adjoint();
    let npp = &apd * &a_p;
    let ndd = &add * &a_d;
    h -= &npp * c(cp) + &ndd * c(cd);
    let rhs = |rho: &M| -> M {
        let mut d = (&h * rho - rho * &h) * (-i);
        if gp != 0.0 {
            d += (&a_p * rho * &apd - (&npp * rho + rho * &npp) * half) * c(gp);
        }
        if gd != 0.0 {
            d += (&a_d * rho * &add - (&ndd * rho + rho * &ndd) * half) * c(gd);
        }
        d
    };
    let mut rho = M::from_element(1, 1, c(1.0));
    for s in &state0.s {
        let r1 = M::identity(2, 2) * half + &sx1 * c(s[0] * 2.0) + &sy1 * c(s[1] * 2.0) + &sz1 * c(s[2] * 2.0);
        rho = rho.kronecker(&r1);
    }
    let expect = |rho: &M| -> Vec<Vec3> {
        (0..n)
            .map(|k| {
                [
                    (&ops.sx[k] * rho).trace().re,
                    (&ops.sy[k] * rho).trace().re,
                    (&ops.sz[k] * rho).trace().re,
                ]
            })
            .collect()
    };
    let dt = t_final / steps as f64;
    let mut out = vec![(0.0, expect(&rho))];
    for step in 1..=steps {
        let k1 = rhs(&rho);
        let k2 = rhs(&(&rho + &k1 * c(0.5 * dt)));
        let k3 = rhs(&(&rho + &k2 * c(0.5 * dt)));
        let k4 = rhs(&(&rho + &k3 * c(dt)));
        rho += (k1 + k2 * c(2.0) + k3 * c(2.0) + k4) * c(dt / 6.0);
        out.push((step as f64 * dt, expect(&rho)));
    }
    Ok(out)
}
