//! Physical inputs, derived tight-binding parameters and the unit system.
//!
//! Everything downstream of this module works in natural units: energies in
//! the recoil energy `E_rec`, lengths in the lattice constant `a`, and
//! `ħ = 1`. Time is then measured in `ħ/E_rec`, momentum in `ħ/a` and mass in
//! `ħ²/(E_rec a²)`; the bare atomic mass is `π²/2` in those units.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::band_structure::{self, BlochSpectrum};
use crate::error::{domain, Result};
use crate::liddi::{self, LiddiField};
use crate::two_atom;

/// Reduced Planck constant, J·s.
pub const HBAR: f64 = 1.054_571_817e-34;
/// Boltzmann constant, J/K.
pub const K_B: f64 = 1.380_649e-23;
/// Vacuum permittivity, F/m.
pub const EPSILON_0: f64 = 8.854_187_812_8e-12;
/// Speed of light, m/s.
pub const C_LIGHT: f64 = 299_792_458.0;
/// Atomic mass unit, kg.
pub const AMU: f64 = 1.660_539_066_60e-27;

/// Plane waves used for the lattice bands when deriving model parameters.
pub const DEFAULT_PLANEWAVES: usize = 41;
/// Brillouin-zone sampling used when deriving model parameters.
pub const DEFAULT_KPOINTS: usize = 64;

/// Bare atomic mass in natural units, from `E_rec = π²ħ²/(2 m a²)`.
pub const BARE_MASS: f64 = PI * PI / 2.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    Open,
    Periodic,
}

impl std::fmt::Display for Boundary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Boundary::Open => f.write_str("open"),
            Boundary::Periodic => f.write_str("periodic"),
        }
    }
}

/// SI-level inputs for the two shifted lattices and the coupling laser.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhysicalParams {
    /// kg
    pub atom_mass: f64,
    /// Lattice laser wavelength, m.
    pub lambda_lattice: f64,
    /// Coupling laser wavelength, m.
    pub lambda_coupling: f64,
    /// W/m²
    pub intensity_lattice: f64,
    /// W/m²
    pub intensity_coupling: f64,
    /// Dipole matrix element of the lattice transition, C·m.
    pub dipole_lattice: f64,
    /// Dipole matrix element of the coupling transition, C·m.
    pub dipole_coupling: f64,
    /// rad/s
    pub detuning_lattice: f64,
    /// rad/s; the coupling laser runs at `ω = ω_A − δ_C`.
    pub detuning_coupling: f64,
    /// Atomic transition frequency `ω_A` addressed by the coupling laser, rad/s.
    pub transition_freq_coupling: f64,
    /// Transverse displacement `l` between the two lattices, m.
    pub lattice_shift: f64,
}

impl PhysicalParams {
    /// Lithium-7 in a 323 nm lattice with a 670.8 nm coupling laser, 40 nm
    /// lattice displacement.
    ///
    /// The atomic mass is the ⁷Li value; it gives `E_rec ≈ 1.81e-28 J`, about
    /// 2% below the 1.85e-28 J usually quoted for this setup.
    pub fn lithium() -> Self {
        let lambda_coupling = 670.8e-9;
        PhysicalParams {
            atom_mass: 7.016_003 * AMU,
            lambda_lattice: 323e-9,
            lambda_coupling,
            intensity_lattice: 0.186e4,
            intensity_coupling: 0.023e4,
            dipole_lattice: 1.26e-30,
            dipole_coupling: 2.7e-29,
            detuning_lattice: 50.0 * 1.2e6,
            detuning_coupling: 100.0 * 3.7e7,
            transition_freq_coupling: 2.0 * PI * C_LIGHT / lambda_coupling,
            lattice_shift: 40e-9,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("atom_mass", self.atom_mass),
            ("lambda_lattice", self.lambda_lattice),
            ("lambda_coupling", self.lambda_coupling),
            ("intensity_coupling", self.intensity_coupling),
            ("dipole_lattice", self.dipole_lattice),
            ("dipole_coupling", self.dipole_coupling),
            ("detuning_lattice", self.detuning_lattice),
            ("detuning_coupling", self.detuning_coupling),
            ("transition_freq_coupling", self.transition_freq_coupling),
            ("lattice_shift", self.lattice_shift),
        ];
        for (name, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return domain(format!("{name} must be finite and > 0, got {value}"));
            }
        }
        // A switched-off lattice is allowed; the hopping is then flagged invalid.
        if !(self.intensity_lattice.is_finite() && self.intensity_lattice >= 0.0) {
            return domain(format!("intensity_lattice must be finite and >= 0, got {}", self.intensity_lattice));
        }
        if self.lattice_shift >= self.lambda_lattice / 2.0 {
            return domain(format!(
                "lattice_shift {} m must stay below the lattice constant {} m",
                self.lattice_shift,
                self.lambda_lattice / 2.0
            ));
        }
        Ok(())
    }

    pub fn lattice_constant(&self) -> f64 {
        self.lambda_lattice / 2.0
    }

    /// Angular frequency of the coupling laser, `ω_A − δ_C`.
    pub fn coupling_laser_freq(&self) -> f64 {
        self.transition_freq_coupling - self.detuning_coupling
    }
}

/// Dimensionless tight-binding parameters. Energies are in units of
/// [`ModelParams::recoil_energy`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// J
    pub recoil_energy: f64,
    pub lattice_depth: f64,
    pub hop: f64,
    pub vdd: f64,
    pub site_count: usize,
    /// m
    pub lattice_constant: f64,
    pub boundary: Boundary,
    /// False when the lowest band is not well described by nearest-neighbour
    /// hopping (shallow or absent lattice).
    pub hop_valid: bool,
}

impl ModelParams {
    /// A model given directly in natural units. The SI anchors default to the
    /// lithium setup and only matter for unit conversions.
    pub fn dimensionless(hop: f64, vdd: f64, site_count: usize, boundary: Boundary) -> Result<Self> {
        let phys = PhysicalParams::lithium();
        let model = ModelParams {
            recoil_energy: recoil_energy(phys.atom_mass, phys.lambda_lattice)?,
            lattice_depth: f64::NAN,
            hop,
            vdd,
            site_count,
            lattice_constant: phys.lattice_constant(),
            boundary,
            hop_valid: true,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        if self.site_count < 3 {
            return domain(format!("site_count must be >= 3, got {}", self.site_count));
        }
        if !self.hop.is_finite() || !self.vdd.is_finite() {
            return domain("hop and vdd must be finite");
        }
        if !(self.lattice_constant > 0.0 && self.recoil_energy > 0.0) {
            return domain("lattice constant and recoil energy must be positive");
        }
        Ok(())
    }

    pub fn with_hop(mut self, hop: f64) -> Self {
        self.hop = hop;
        self
    }

    pub fn with_vdd(mut self, vdd: f64) -> Self {
        self.vdd = vdd;
        self
    }

    pub fn with_sites(mut self, site_count: usize, boundary: Boundary) -> Self {
        self.site_count = site_count;
        self.boundary = boundary;
        self
    }

    pub fn energy_to_joules(&self, e: f64) -> f64 {
        e * self.recoil_energy
    }

    pub fn energy_from_joules(&self, joules: f64) -> f64 {
        joules / self.recoil_energy
    }

    /// Seconds to natural time units `ħ/E_rec`.
    pub fn time_from_seconds(&self, seconds: f64) -> f64 {
        seconds * self.recoil_energy / HBAR
    }

    pub fn time_to_seconds(&self, t: f64) -> f64 {
        t * HBAR / self.recoil_energy
    }

    /// `k_B T` in units of `E_rec`.
    pub fn thermal_energy(&self, kelvin: f64) -> f64 {
        K_B * kelvin / self.recoil_energy
    }

    pub fn length_from_meters(&self, meters: f64) -> f64 {
        meters / self.lattice_constant
    }

    /// The SI momentum unit `ħ/a`.
    pub fn momentum_unit(&self) -> f64 {
        HBAR / self.lattice_constant
    }

    /// The atomic mass implied by the recoil energy and lattice constant.
    pub fn atom_mass(&self) -> f64 {
        PI * PI * HBAR * HBAR / (2.0 * self.recoil_energy * self.lattice_constant.powi(2))
    }
}

/// `E_rec = 2π²ħ²/(m λ_L²)` in joules.
pub fn recoil_energy(mass: f64, lambda_lattice: f64) -> Result<f64> {
    if !(mass > 0.0 && lambda_lattice > 0.0) {
        return domain(format!(
            "recoil energy needs positive mass and wavelength, got m = {mass}, λ = {lambda_lattice}"
        ));
    }
    Ok(2.0 * PI * PI * HBAR * HBAR / (mass * lambda_lattice * lambda_lattice))
}

/// Peak a.c. Stark potential of the lattice, `U₀ = 4|μ_L|² I_L/(ε₀ ħ c δ_L)`, in joules.
pub fn lattice_depth(intensity: f64, dipole: f64, detuning: f64) -> Result<f64> {
    if detuning == 0.0 || !detuning.is_finite() {
        return domain("lattice detuning must be nonzero and finite");
    }
    Ok(4.0 * dipole * dipole * intensity / (EPSILON_0 * HBAR * C_LIGHT * detuning))
}

/// Derive the tight-binding model from the physical inputs.
///
/// Hopping comes from the exact lowest band of the lattice, the pair
/// interaction from the nearest-site LIDDI well.
pub fn to_model(phys: &PhysicalParams, site_count: usize, boundary: Boundary) -> Result<ModelParams> {
    phys.validate()?;
    let e_rec = recoil_energy(phys.atom_mass, phys.lambda_lattice)?;
    let depth = lattice_depth(phys.intensity_lattice, phys.dipole_lattice, phys.detuning_lattice)? / e_rec;
    let spectrum = BlochSpectrum::compute(depth, DEFAULT_PLANEWAVES, DEFAULT_KPOINTS)?;
    let hopping = band_structure::hopping_exact(&spectrum);
    let field = LiddiField::from_physical(phys)?;
    let vdd = liddi::vdd_nearest(field.coupling_strength, phys.lambda_coupling, phys.lattice_shift)?;
    let model = ModelParams {
        recoil_energy: e_rec,
        lattice_depth: depth,
        hop: hopping.hop,
        vdd: vdd.value / e_rec,
        site_count,
        lattice_constant: phys.lattice_constant(),
        boundary,
        hop_valid: hopping.valid,
    };
    model.validate()?;
    Ok(model)
}

/// Everything the `params` subcommand reports, in SI and natural units.
#[derive(Clone, Debug, Serialize)]
pub struct ParameterReport {
    pub recoil_energy_j: f64,
    pub lattice_constant_m: f64,
    pub lattice_depth_j: f64,
    pub lattice_depth_erec: f64,
    pub polarizability_si: f64,
    pub coupling_strength_j: f64,
    pub vdd_j: f64,
    pub vdd_erec: f64,
    pub vdd_nearest_valid: bool,
    pub hop_erec: f64,
    pub hop_approx_erec: f64,
    pub hop_valid: bool,
    pub bandwidth_erec: f64,
    pub beyond_nearest_erec: f64,
    pub effective_mass_ratio: f64,
    pub diatom_hop_erec: f64,
    pub diatom_bandwidth_erec: f64,
    pub diatom_mass_ratio: f64,
    pub gaussian_width_a: f64,
    pub site_count: usize,
    pub boundary: Boundary,
}

pub fn report(phys: &PhysicalParams, site_count: usize, boundary: Boundary) -> Result<ParameterReport> {
    let model = to_model(phys, site_count, boundary)?;
    let e_rec = model.recoil_energy;
    let spectrum = BlochSpectrum::compute(model.lattice_depth, DEFAULT_PLANEWAVES, DEFAULT_KPOINTS)?;
    let hopping = band_structure::hopping_exact(&spectrum);
    let field = LiddiField::from_physical(phys)?;
    let nearest = liddi::vdd_nearest(field.coupling_strength, phys.lambda_coupling, phys.lattice_shift)?;
    let diatom_hop = two_atom::diatom_hopping(model.hop, model.vdd)?;
    Ok(ParameterReport {
        recoil_energy_j: e_rec,
        lattice_constant_m: model.lattice_constant,
        lattice_depth_j: model.lattice_depth * e_rec,
        lattice_depth_erec: model.lattice_depth,
        polarizability_si: field.polarizability,
        coupling_strength_j: field.coupling_strength,
        vdd_j: nearest.value,
        vdd_erec: model.vdd,
        vdd_nearest_valid: nearest.valid,
        hop_erec: model.hop,
        hop_approx_erec: band_structure::hopping_approx(model.lattice_depth),
        hop_valid: model.hop_valid,
        bandwidth_erec: hopping.bandwidth,
        beyond_nearest_erec: hopping.beyond_nearest,
        effective_mass_ratio: band_structure::effective_mass(hopping.bandwidth)? / BARE_MASS,
        diatom_hop_erec: diatom_hop,
        diatom_bandwidth_erec: 4.0 * diatom_hop.abs(),
        diatom_mass_ratio: two_atom::diatom_effective_mass(model.hop, model.vdd)? / BARE_MASS,
        gaussian_width_a: band_structure::gaussian_width(model.lattice_depth)?,
        site_count,
        boundary,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recoil_energy_lithium_scale() {
        let e = recoil_energy(1.1624e-26, 323e-9).unwrap();
        assert!((e - 1.81e-28).abs() / 1.81e-28 < 0.01, "{e}");
        // within 3% of the commonly quoted 1.85e-28 J
        assert!((e - 1.85e-28).abs() / 1.85e-28 < 0.03);
    }

    #[test]
    fn recoil_energy_scalings() {
        let e = recoil_energy(1e-26, 300e-9).unwrap();
        let heavy = recoil_energy(2e-26, 300e-9).unwrap();
        let long = recoil_energy(1e-26, 600e-9).unwrap();
        assert!((heavy / e - 0.5).abs() < 1e-14);
        assert!((long / e - 0.25).abs() < 1e-14);
        assert!(recoil_energy(0.0, 300e-9).is_err());
        assert!(recoil_energy(1e-26, -1.0).is_err());
    }

    #[test]
    fn lattice_depth_lithium() {
        let phys = PhysicalParams::lithium();
        let u0 = lattice_depth(phys.intensity_lattice, phys.dipole_lattice, phys.detuning_lattice).unwrap();
        assert!((u0 - 7.0e-28).abs() / 7.0e-28 < 0.02, "{u0}");
        let e_rec = recoil_energy(phys.atom_mass, phys.lambda_lattice).unwrap();
        assert!((u0 / e_rec - 3.93).abs() / 3.93 < 0.05);
    }

    #[test]
    fn lattice_depth_linear_and_zero() {
        assert_eq!(lattice_depth(0.0, 1e-30, 1e7).unwrap(), 0.0);
        let one = lattice_depth(1000.0, 1e-30, 1e7).unwrap();
        let two = lattice_depth(2000.0, 1e-30, 1e7).unwrap();
        assert!((two / one - 2.0).abs() < 1e-14);
        assert!(lattice_depth(1000.0, 1e-30, 0.0).is_err());
    }

    #[test]
    fn validation_rejects_bad_inputs() {
        let mut phys = PhysicalParams::lithium();
        phys.detuning_lattice = 0.0;
        assert!(phys.validate().is_err());
        let mut phys = PhysicalParams::lithium();
        phys.lattice_shift = 200e-9;
        assert!(phys.validate().is_err());
        assert!(ModelParams::dimensionless(-0.1, -0.5, 2, Boundary::Open).is_err());
    }

    #[test]
    fn unit_round_trip() {
        let model = to_model(&PhysicalParams::lithium(), 25, Boundary::Open).unwrap();
        for e in [model.hop, model.vdd, model.lattice_depth, 1e-6, 123.456] {
            let back = model.energy_from_joules(model.energy_to_joules(e));
            assert!((back - e).abs() <= 1e-12 * e.abs());
        }
        let t = 1.4e-4;
        assert!((model.time_to_seconds(model.time_from_seconds(t)) - t).abs() < 1e-12 * t);
        let m = model.atom_mass();
        assert!((m - PhysicalParams::lithium().atom_mass).abs() / m < 1e-12);
    }

    #[test]
    fn lithium_model_matches_published_values() {
        let model = to_model(&PhysicalParams::lithium(), 25, Boundary::Open).unwrap();
        assert!((model.lattice_depth - 3.93).abs() / 3.93 < 0.05);
        assert!((model.hop + 0.09).abs() / 0.09 < 0.10, "hop {}", model.hop);
        assert!((model.vdd + 0.5).abs() / 0.5 < 0.15, "vdd {}", model.vdd);
        assert!(model.hop_valid);
    }

    #[test]
    fn to_model_is_deterministic() {
        let a = to_model(&PhysicalParams::lithium(), 25, Boundary::Open).unwrap();
        let b = to_model(&PhysicalParams::lithium(), 25, Boundary::Open).unwrap();
        assert_eq!(a.hop.to_bits(), b.hop.to_bits());
        assert_eq!(a.vdd.to_bits(), b.vdd.to_bits());
        assert_eq!(a.lattice_depth.to_bits(), b.lattice_depth.to_bits());
    }

    #[test]
    fn no_lattice_flags_hopping_invalid() {
        let mut phys = PhysicalParams::lithium();
        phys.intensity_lattice = 0.0;
        let model = to_model(&phys, 25, Boundary::Open).unwrap();
        assert!(!model.hop_valid);
    }

    #[test]
    fn doubling_shift_weakens_binding_eightfold() {
        let near = to_model(&PhysicalParams::lithium(), 25, Boundary::Open).unwrap();
        let mut phys = PhysicalParams::lithium();
        phys.lattice_shift = 80e-9;
        let far = to_model(&phys, 25, Boundary::Open).unwrap();
        assert!((near.vdd / far.vdd - 8.0).abs() < 1e-9);
        assert!(near.vdd < 0.0 && far.vdd < 0.0);
    }
}
