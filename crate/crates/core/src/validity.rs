//! Regime checks for a physical cavity-QED parameter set.
//!
//! Frequencies and rates share one angular unit; lengths are in metres and
//! `speed_of_light` in metres per that unit's inverse.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalParams {
    /// Atomic detuning `δ_e`.
    pub delta_e: f64,
    /// Drive frequencies `ω_{p,A}`, `ω_{p,B}` and cavity frequency `ω_c`.
    pub omega_pa: f64,
    pub omega_pb: f64,
    pub omega_c: f64,
    /// Single-atom cavity coupling `g_c`.
    pub g_c: f64,
    pub n_atoms: f64,
    /// Rabi frequencies `Ω_A`, `Ω_B`.
    pub rabi_a: f64,
    pub rabi_b: f64,
    /// Excited-state linewidth `γ`.
    pub gamma: f64,
    /// Cavity detunings of mode `b` (`δ_{c,A}`, `δ_{c,B}`) and mode `r` (primed).
    pub delta_ca: f64,
    pub delta_cb: f64,
    pub delta_ca_r: f64,
    pub delta_cb_r: f64,
    pub kappa: f64,
    /// Clebsch–Gordan coefficients `C_{↑,e}`, `C_{↓,e}`.
    pub cg_up: f64,
    pub cg_down: f64,
    pub lambda_l: f64,
    pub n_x: f64,
    pub n_y: f64,
    pub speed_of_light: f64,
    /// Rayleigh length and waist of the cavity mode and of drive A.
    pub z_cav: f64,
    pub w_cav: f64,
    pub z_a: f64,
    pub w_a: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EffectiveCouplings {
    pub j: f64,
    pub chi_p: f64,
    pub chi_d: f64,
    pub chi_p_ising: f64,
    pub chi_d_ising: f64,
    pub gamma_p: f64,
    pub gamma_d: f64,
    pub gamma_p_ising: f64,
    pub gamma_d_ising: f64,
}

/// One `big ≫ small` requirement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub group: String,
    pub name: String,
    pub big: f64,
    pub small: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidityReport {
    pub factor: f64,
    pub couplings: EffectiveCouplings,
    pub checks: Vec<Check>,
}

impl ValidityReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

fn exchange(rabi: f64, g: f64, de: f64, dc: f64, kappa: f64) -> f64 {
    -rabi * rabi * g * g * dc / (4.0 * de * de * (dc * dc + kappa * kappa / 4.0))
}

pub fn effective_couplings(p: &PhysicalParams) -> EffectiveCouplings {
    let ratio = (p.cg_up / p.cg_down).powi(2);
    let chi_p = exchange(p.rabi_a, p.g_c, p.delta_e, p.delta_ca, p.kappa);
    let chi_d = exchange(p.rabi_b, p.g_c, p.delta_e, p.delta_cb, p.kappa);
    let chi_p_ising = exchange(p.rabi_a, p.g_c, p.delta_e, p.delta_ca_r, p.kappa) * ratio;
    let chi_d_ising = exchange(p.rabi_b, p.g_c, p.delta_e, p.delta_cb_r, p.kappa) * ratio;
    EffectiveCouplings {
        j: p.rabi_b * p.rabi_b / (8.0 * p.delta_e),
        chi_p,
        chi_d,
        chi_p_ising,
        chi_d_ising,
        gamma_p: p.kappa * (chi_p / p.delta_ca).abs(),
        gamma_d: p.kappa * (chi_d / p.delta_cb).abs(),
        gamma_p_ising: p.kappa * (chi_p_ising / p.delta_ca_r).abs(),
        gamma_d_ising: p.kappa * (chi_d_ising / p.delta_cb_r).abs(),
    }
}

/// Evaluate every approximation with `big ≥ factor·small`.
pub fn validate_regime(p: &PhysicalParams, factor: f64) -> ValidityReport {
    let c = effective_couplings(p);
    let mut checks = Vec::new();
    let mut add = |group: &str, name: &str, big: f64, small: f64| {
        checks.push(Check { group: group.to_string(), name: name.to_string(), big, small, pass: big.abs() >= factor * small.abs() });
    };
    let de = p.delta_e.abs();
    let sqrt_n = p.n_atoms.sqrt();
    let dab = (p.omega_pa - p.omega_pb).abs();
    let dac = (p.omega_pa - p.omega_c).abs();
    let g = "excited-state elimination";
    add(g, "|δ_e| ≫ |ω_pA − ω_pB|", de, dab);
    add(g, "|δ_e| ≫ |ω_pA − ω_c|", de, dac);
    add(g, "|δ_e| ≫ g_c√N", de, p.g_c * sqrt_n);
    add(g, "|δ_e| ≫ |Ω_A|", de, p.rabi_a);
    add(g, "|δ_e| ≫ |Ω_B|", de, p.rabi_b);
    add(g, "|δ_e| ≫ γ", de, p.gamma);
    let g = "cavity elimination";
    let dmin = [p.delta_ca, p.delta_cb, p.delta_ca_r, p.delta_cb_r].iter().map(|x| x.abs()).fold(f64::INFINITY, f64::min);
    add(g, "min|δ_c| ≫ |g_cΩ_A/δ_e|√N", dmin, p.g_c * p.rabi_a / de * sqrt_n);
    add(g, "min|δ_c| ≫ |g_cΩ_B/δ_e|√N", dmin, p.g_c * p.rabi_b / de * sqrt_n);
    add(g, "min|δ_c| ≫ κ", dmin, p.kappa);
    let g = "mode r fluctuations";
    add(g, "|χ_p| ≫ |χ'_p|", c.chi_p, c.chi_p_ising);
    add(g, "|χ_d| ≫ |χ'_d|", c.chi_d, c.chi_d_ising);
    let g = "drive interference";
    add(g, "|ω_pA − ω_pB| ≫ J", dab, c.j);
    add(g, "|ω_pA − ω_pB| ≫ χ_pN", dab, c.chi_p * p.n_atoms);
    add(g, "|ω_pA − ω_pB| ≫ χ_dN", dab, c.chi_d * p.n_atoms);
    let g = "uniform laser phase";
    let fx = 4.0 * std::f64::consts::PI * p.speed_of_light / (p.lambda_l * p.n_x);
    let fy = 4.0 * std::f64::consts::PI * p.speed_of_light / (p.lambda_l * p.n_y);
    for (lbl, d) in [("|ω_pA − ω_pB|", dab), ("|ω_pA − ω_c|", dac)] {
        add(g, &format!("4πc/(λN_x) ≫ {lbl}"), fx, d);
        add(g, &format!("4πc/(λN_y) ≫ {lbl}"), fy, d);
    }
    let g = "flat beam profiles";
    add(g, "4z_cav ≫ λN_x", 4.0 * p.z_cav, p.lambda_l * p.n_x);
    add(g, "4w_cav ≫ λN_y", 4.0 * p.w_cav, p.lambda_l * p.n_y);
    add(g, "4z_A ≫ λN_y", 4.0 * p.z_a, p.lambda_l * p.n_y);
    add(g, "4w_A ≫ λN_x", 4.0 * p.w_a, p.lambda_l * p.n_x);
    ValidityReport { factor, couplings: c, checks }
}

impl Default for PhysicalParams {
    /// A parameter set inside every regime (angular frequencies in rad/s).
    fn default() -> Self {
        let tau = 2.0 * std::f64::consts::PI;
        PhysicalParams {
            delta_e: tau * 5e9,
            omega_pa: 0.0,
            omega_pb: tau * 1e6,
            omega_c: tau * 2e5,
            g_c: tau * 1e4,
            n_atoms: 1e4,
            rabi_a: tau * 2e6,
            rabi_b: tau * 2e6,
            gamma: tau * 6e6,
            delta_ca: -tau * 5e6,
            delta_cb: -tau * 5e6,
            delta_ca_r: -tau * 5e8,
            delta_cb_r: -tau * 5e8,
            kappa: tau * 1e4,
            cg_up: 0.3,
            cg_down: 1.0,
            lambda_l: 8e-7,
            n_x: 500.0,
            n_y: 20.0,
            speed_of_light: 2.998e8,
            z_cav: 0.05,
            w_cav: 1e-4,
            z_a: 0.01,
            w_a: 2e-3,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_set_passes() {
        let r = validate_regime(&PhysicalParams::default(), 10.0);
        let failed: Vec<_> = r.checks.iter().filter(|c| !c.pass).map(|c| c.name.clone()).collect();
        assert!(failed.is_empty(), "{failed:?}");
    }

    #[test]
    fn loss_ratio_sets_dissipation() {
        let mut p = PhysicalParams::default();
        p.kappa = 2e-3 * p.delta_ca.abs();
        let c = effective_couplings(&p);
        assert!((c.gamma_p / c.chi_p.abs() - 2e-3).abs() < 1e-15);
    }

    #[test]
    fn weak_detuning_fails_elimination() {
        let mut p = PhysicalParams::default();
        p.delta_e = 2.0 * p.rabi_a;
        let r = validate_regime(&p, 10.0);
        assert!(!r.checks.iter().find(|c| c.name == "|δ_e| ≫ |Ω_A|").unwrap().pass);
    }

    #[test]
    fn interference_line_reported() {
        let mut p = PhysicalParams::default();
        p.omega_pb = p.omega_pa;
        let r = validate_regime(&p, 10.0);
        assert!(!r.checks.iter().find(|c| c.name == "|ω_pA − ω_pB| ≫ J").unwrap().pass);
    }

    #[test]
    fn couplings_are_attractive_for_red_detuned_cavity() {
        let c = effective_couplings(&PhysicalParams::default());
        assert!(c.chi_p > 0.0 && c.chi_d > 0.0 && c.j > 0.0);
    }
}
