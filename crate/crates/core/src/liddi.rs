//! Laser-induced dipole-dipole interaction between atoms in the two shifted
//! lattices.
//!
//! Geometry: the coupling laser travels along `x` and is polarized along `y`;
//! the lattices are displaced by `l` along `y`. `θ` is the angle between the
//! interatomic axis and `x`.

use std::f64::consts::PI;

use crate::error::{domain, Result};
use crate::parameters::{PhysicalParams, C_LIGHT, EPSILON_0, HBAR};

/// Below this `kR` the closed form loses precision and the near-field
/// asymptote is returned instead.
pub const SMALL_KR: f64 = 1e-4;

/// A value together with whether it was computed inside its validity range.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Flagged {
    pub value: f64,
    pub valid: bool,
}

/// `α = 2ω_A|μ|²/(ħ(ω_A² − ω²))` in C·m²/V.
pub fn polarizability(dipole: f64, omega_a: f64, omega: f64) -> Result<f64> {
    let denom = omega_a * omega_a - omega * omega;
    if denom == 0.0 || !denom.is_finite() {
        return domain(format!("polarizability is singular at resonance (ω = ω_A = {omega_a})"));
    }
    Ok(2.0 * omega_a * dipole * dipole / (HBAR * denom))
}

/// `V_C = α²k³I_C/(4πε₀²c)` in joules.
pub fn coupling_strength(polarizability: f64, k: f64, intensity: f64) -> f64 {
    polarizability * polarizability * k.powi(3) * intensity / (4.0 * PI * EPSILON_0 * EPSILON_0 * C_LIGHT)
}

/// Angular and radial dependence of the interaction, `V = −V_C F_θ(kR)`.
pub fn f_theta(kr: f64, theta: f64) -> Result<Flagged> {
    if !(kr > 0.0) || !kr.is_finite() {
        return domain(format!("f_theta needs kR > 0, got {kr}"));
    }
    let c = theta.cos();
    let c2 = c * c;
    if kr < SMALL_KR {
        return Ok(Flagged { value: (2.0 - 3.0 * c2) / kr.powi(3), valid: false });
    }
    let near = kr.cos() / kr.powi(3) + kr.sin() / (kr * kr);
    let value = (kr * c).cos() * ((2.0 - 3.0 * c2) * near + c2 * kr.cos() / kr);
    Ok(Flagged { value, valid: true })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LiddiField {
    /// rad/m
    pub k: f64,
    /// J
    pub coupling_strength: f64,
    /// C·m²/V
    pub polarizability: f64,
}

impl LiddiField {
    pub fn from_physical(phys: &PhysicalParams) -> Result<Self> {
        let alpha = polarizability(phys.dipole_coupling, phys.transition_freq_coupling, phys.coupling_laser_freq())?;
        let k = 2.0 * PI / phys.lambda_coupling;
        Ok(LiddiField {
            k,
            coupling_strength: coupling_strength(alpha, k, phys.intensity_coupling),
            polarizability: alpha,
        })
    }

    /// Interaction energy (J) for separation `r` (m) at angle `theta`.
    pub fn potential(&self, r: f64, theta: f64) -> Result<Flagged> {
        let f = f_theta(self.k * r, theta)?;
        Ok(Flagged { value: -self.coupling_strength * f.value, valid: f.valid })
    }
}

/// Near-field well depth `−(V_C/4π³)(λ_C/l)³` for atoms on facing sites.
/// Flagged invalid when `l > λ_C/10`.
pub fn vdd_nearest(coupling_strength: f64, lambda_coupling: f64, shift: f64) -> Result<Flagged> {
    if !(shift > 0.0) {
        return domain(format!("lattice shift must be > 0, got {shift}"));
    }
    let value = -coupling_strength / (4.0 * PI.powi(3)) * (lambda_coupling / shift).powi(3);
    Ok(Flagged { value, valid: shift <= lambda_coupling / 10.0 })
}

/// Interaction (J) between atom 1 on site 0 and atom 2 on site `j` of the
/// shifted lattice, for `j` in `-range..=range`.
pub fn vdd_map(field: &LiddiField, shift: f64, lattice_constant: f64, range: i64) -> Result<Vec<(i64, f64)>> {
    if !(shift > 0.0 && lattice_constant > 0.0) {
        return domain("vdd_map needs positive shift and lattice constant");
    }
    (-range..=range)
        .map(|j| {
            let along = j as f64 * lattice_constant;
            let r = (shift * shift + along * along).sqrt();
            let theta = (along / r).acos();
            Ok((j, field.potential(r, theta)?.value))
        })
        .collect()
}

/// `Σ_{1≤|j|≤range} |V(j)| / |V(0)|`: weight of the couplings dropped by
/// keeping only the on-site term.
pub fn truncation_error(field: &LiddiField, shift: f64, lattice_constant: f64, range: i64) -> Result<f64> {
    let map = vdd_map(field, shift, lattice_constant, range)?;
    let center = map.iter().find(|(j, _)| *j == 0).map(|(_, v)| v.abs()).unwrap_or(0.0);
    let rest: f64 = map.iter().filter(|(j, _)| *j != 0).map(|(_, v)| v.abs()).sum();
    Ok(rest / center)
}
