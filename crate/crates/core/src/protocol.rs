//! Preparation of bound pairs: a product state cooled in a harmonic trap is
//! loaded into the lattices, then the interaction and a linear potential are
//! switched on so unpaired atoms drift away faster than the heavy pairs.
//!
//! Switching is sudden; the lattice ramp is represented by its outcome, the
//! Wannier product state. Times are in `ħ/E_rec` unless noted.

use std::f64::consts::PI;
use std::ops::Range;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{domain, Error, Result};
use crate::parameters::{ModelParams, HBAR, K_B};
use crate::two_atom::{self, ExternalPotential, MixedState, SpectrumResult, TwoAtomHamiltonian, TwoAtomState};

/// Envelope mass outside the lattice above which the initial state is reported as truncated.
pub const TAIL_WARNING: f64 = 1e-4;
/// Default half-width of the `|j − l|` band counted as paired.
pub const DEFAULT_PAIR_BAND: usize = 1;

/// Normalized Gaussian site envelope `α_j ∝ exp(−(j − j₀)²/(4σ_E²))` and the
/// fraction of the untruncated envelope's weight that falls off the lattice.
pub fn envelope(sigma_e: f64, j0: f64, site_count: usize) -> Result<(Vec<f64>, f64)> {
    if !(sigma_e > 0.0) {
        return domain(format!("sigma_E must be > 0, got {sigma_e}"));
    }
    let weight = |j: f64| (-(j - j0).powi(2) / (2.0 * sigma_e * sigma_e)).exp();
    let alpha: Vec<f64> =
        (0..site_count).map(|j| (-(j as f64 - j0).powi(2) / (4.0 * sigma_e * sigma_e)).exp()).collect();
    let inside: f64 = alpha.iter().map(|a| a * a).sum();
    if !(inside > 0.0) {
        return Err(Error::Numerical("initial envelope has no weight on the lattice".into()));
    }
    let reach = (j0.abs() + site_count as f64 + 40.0 * sigma_e).ceil() as i64;
    let outside: f64 = (-reach..=reach).filter(|&j| j < 0 || j >= site_count as i64).map(|j| weight(j as f64)).sum();
    let norm = inside.sqrt();
    Ok((alpha.into_iter().map(|a| a / norm).collect(), outside / (inside + outside)))
}

#[derive(Clone, Debug)]
pub struct InitialState {
    pub state: TwoAtomState,
    pub alpha: Vec<f64>,
    pub tail_mass: f64,
}

impl InitialState {
    pub fn truncated(&self) -> bool {
        self.tail_mass > TAIL_WARNING
    }
}

/// Product `c_{jl} = α_j α_l` of two identical trap ground states.
pub fn initial_state(sigma_e: f64, j0: f64, site_count: usize) -> Result<InitialState> {
    let (alpha, tail_mass) = envelope(sigma_e, j0, site_count)?;
    Ok(InitialState { state: TwoAtomState::product(&alpha, &alpha)?, alpha, tail_mass })
}

/// Exact propagator from a complete eigendecomposition.
#[derive(Clone, Debug)]
pub struct Propagator {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: DMatrix<f64>,
    pub site_count: usize,
}

impl Propagator {
    pub fn new(h: &TwoAtomHamiltonian) -> Result<Self> {
        let spectrum = two_atom::diagonalize_dense(h, two_atom::DEFAULT_DENSE_BUDGET)?;
        Self::from_spectrum(spectrum)
    }

    pub fn from_spectrum(spectrum: SpectrumResult) -> Result<Self> {
        if !spectrum.complete {
            return domain("spectral propagation needs the complete spectrum");
        }
        Ok(Propagator {
            eigenvalues: spectrum.eigenvalues,
            eigenvectors: spectrum.eigenvectors,
            site_count: spectrum.site_count,
        })
    }

    /// `ψ(t) = Σ_n e^{−iE_n t} ⟨n|ψ⟩ |n⟩`
    pub fn propagate(&self, state: &TwoAtomState, t: f64) -> Result<TwoAtomState> {
        if state.site_count != self.site_count {
            return domain("state and propagator live on different lattices");
        }
        let re = DVector::from_iterator(state.amplitudes.len(), state.amplitudes.iter().map(|a| a.re));
        let im = DVector::from_iterator(state.amplitudes.len(), state.amplitudes.iter().map(|a| a.im));
        let vt = self.eigenvectors.transpose();
        let (cr, ci) = (&vt * re, &vt * im);
        let mut br = DVector::zeros(cr.len());
        let mut bi = DVector::zeros(cr.len());
        for n in 0..cr.len() {
            let phase = Complex64::from_polar(1.0, -self.eigenvalues[n] * t);
            let c = Complex64::new(cr[n], ci[n]) * phase;
            br[n] = c.re;
            bi[n] = c.im;
        }
        let (r, i) = (&self.eigenvectors * br, &self.eigenvectors * bi);
        let amplitudes = r.iter().zip(i.iter()).map(|(a, b)| Complex64::new(*a, *b)).collect();
        Ok(TwoAtomState { site_count: self.site_count, amplitudes })
    }
}

pub fn energy(h: &TwoAtomHamiltonian, state: &TwoAtomState) -> f64 {
    let hpsi = h.apply_complex(&state.amplitudes);
    state.amplitudes.iter().zip(&hpsi).map(|(a, b)| (a.conj() * b).re).sum()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SeparationDiagnostics {
    pub norm: f64,
    /// `Σ_j |c_{jj}|²`
    pub diagonal_weight: f64,
    /// Weight with `|j − l| ≤ band`.
    pub pair_weight: f64,
    /// Mean of `(j + l)/2` over the paired part, sites.
    pub diatom_centroid: Option<f64>,
    /// Mean of `(j + l)/2` over the unpaired part, sites.
    pub single_centroid: Option<f64>,
    /// `|single − origin| / |diatom − origin|`
    pub displacement_ratio: Option<f64>,
}

/// Split a state into paired (`|j − l| ≤ band`) and unpaired parts and
/// locate each relative to `origin`.
pub fn separation_diagnostics(state: &TwoAtomState, origin: f64, band: usize) -> SeparationDiagnostics {
    let n = state.site_count;
    let (mut pair_mass, mut pair_moment, mut single_mass, mut single_moment) = (0.0, 0.0, 0.0, 0.0);
    for j in 0..n {
        for l in 0..n {
            let w = state.amplitude(j, l).norm_sqr();
            let x = (j + l) as f64 / 2.0;
            if j.abs_diff(l) <= band {
                pair_mass += w;
                pair_moment += w * x;
            } else {
                single_mass += w;
                single_moment += w * x;
            }
        }
    }
    let centroid = |mass: f64, moment: f64| if mass > 1e-12 { Some(moment / mass) } else { None };
    let diatom_centroid = centroid(pair_mass, pair_moment);
    let single_centroid = centroid(single_mass, single_moment);
    let displacement_ratio = match (diatom_centroid, single_centroid) {
        (Some(d), Some(s)) if (d - origin).abs() > 1e-9 => Some((s - origin).abs() / (d - origin).abs()),
        _ => None,
    };
    SeparationDiagnostics {
        norm: state.norm_squared(),
        diagonal_weight: state.diagonal_weight(),
        pair_weight: pair_mass,
        diatom_centroid,
        single_centroid,
        displacement_ratio,
    }
}

#[derive(Clone, Debug)]
pub struct ProtocolTrace {
    pub times: Vec<f64>,
    pub states: Vec<TwoAtomState>,
    pub diagnostics: Vec<SeparationDiagnostics>,
}

/// Snapshots of `state` at strictly increasing `times`.
pub fn evolve(
    state: &TwoAtomState,
    propagator: &Propagator,
    times: &[f64],
    origin: f64,
    band: usize,
) -> Result<ProtocolTrace> {
    if times.windows(2).any(|w| !(w[1] > w[0])) {
        return domain("snapshot times must be strictly increasing");
    }
    let mut states = Vec::with_capacity(times.len());
    let mut diagnostics = Vec::with_capacity(times.len());
    for &t in times {
        let s = propagator.propagate(state, t)?;
        let d = separation_diagnostics(&s, origin, band);
        if (d.norm - 1.0).abs() > 1e-8 {
            return Err(Error::Numerical(format!("norm drifted to {} at t = {t}", d.norm)));
        }
        diagnostics.push(d);
        states.push(s);
    }
    Ok(ProtocolTrace { times: times.to_vec(), states, diagnostics })
}

/// Keep amplitudes with `|j − l| ≤ band` and both atoms inside `region`
/// (site coordinates, inclusive), then renormalize. Returns the state and the
/// retained probability.
pub fn postselect_diatoms(state: &TwoAtomState, region: Range<f64>, band: usize) -> Result<(TwoAtomState, f64)> {
    let n = state.site_count;
    let inside = |j: usize| (region.start..=region.end).contains(&(j as f64));
    let amplitudes: Vec<Complex64> = (0..n * n)
        .map(|i| {
            let (j, l) = (i / n, i % n);
            if j.abs_diff(l) <= band && inside(j) && inside(l) {
                state.amplitudes[i]
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
        .collect();
    let retained: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum();
    if retained < 1e-10 {
        return Err(Error::Numerical(format!("post-selection keeps only {retained:.3e} of the state")));
    }
    Ok((TwoAtomState::new(n, amplitudes)?, retained))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CoolingRequirements {
    /// `ħ²/(4 m k_B σ_E²)`, K.
    pub t_max_initial_k: f64,
    /// Diatom bandwidth `4|2V_hop²/V_dd|` over `k_B`, K.
    pub t_max_band_k: f64,
    /// Trap frequency `ω/2π` with `ħω = ħ²/(2mσ_E²)`, Hz.
    pub trap_frequency_hz: f64,
    /// `ħω/k_B`, K.
    pub trap_energy_k: f64,
}

/// Temperature bounds for a trap of ground-state width `sigma_e` (sites).
pub fn cooling_requirements(model: &ModelParams, sigma_e: f64) -> Result<CoolingRequirements> {
    if !(sigma_e > 0.0) {
        return domain(format!("sigma_E must be > 0, got {sigma_e}"));
    }
    let m = model.atom_mass();
    let s = sigma_e * model.lattice_constant;
    let omega = HBAR / (2.0 * m * s * s);
    let band = 4.0 * two_atom::diatom_hopping(model.hop, model.vdd)?.abs();
    Ok(CoolingRequirements {
        t_max_initial_k: HBAR * HBAR / (4.0 * m * K_B * s * s),
        t_max_band_k: model.energy_to_joules(band) / K_B,
        trap_frequency_hz: omega / (2.0 * PI),
        trap_energy_k: HBAR * omega / K_B,
    })
}

/// Pairs retained after cooling at `kt` (`E_rec`) and loading into the lattice.
///
/// Each atom starts in the thermal state of the harmonic trap; its site
/// density matrix is `ρ(j, j') ∝ exp[−(x + x')²/(8X²) − P²(x − x')²/2]`,
/// `x = j − j₀`, with `X² = σ_E² coth(ħω/2k_BT)` and `P² = coth(ħω/2k_BT)/(4σ_E²)`.
/// Keeping only `j = l` leaves `ρ(j, j')²` on the diagonal pairs, returned
/// as an eigen-mixture of pure diagonal states.
pub fn thermal_diatom_state(site_count: usize, j0: f64, sigma_e: f64, kt: f64) -> Result<MixedState> {
    if !(sigma_e > 0.0 && kt >= 0.0) {
        return domain("thermal pair state needs sigma_E > 0 and k_B T >= 0");
    }
    let hw = 1.0 / (PI * PI * sigma_e * sigma_e);
    let coth = if kt == 0.0 { 1.0 } else { 1.0 / (hw / (2.0 * kt)).tanh() };
    let x2 = sigma_e * sigma_e * coth;
    let p2 = coth / (4.0 * sigma_e * sigma_e);
    let n = site_count;
    let rho = DMatrix::from_fn(n, n, |j, k| {
        let (x, y) = (j as f64 - j0, k as f64 - j0);
        (-(x + y).powi(2) / (8.0 * x2) - p2 * (x - y).powi(2) / 2.0).exp().powi(2)
    });
    let eig = SymmetricEigen::new(rho);
    let total: f64 = eig.eigenvalues.iter().filter(|&&v| v > 0.0).sum();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let mut components = Vec::new();
    for i in order {
        let w = eig.eigenvalues[i] / total;
        if w <= 1e-12 {
            continue;
        }
        let v = eig.eigenvectors.column(i);
        let amps: Vec<Complex64> = (0..n * n)
            .map(|k| if k / n == k % n { Complex64::new(v[k / n], 0.0) } else { Complex64::new(0.0, 0.0) })
            .collect();
        components.push((w, TwoAtomState::new(n, amps)?));
    }
    let sum: f64 = components.iter().map(|c| c.0).sum();
    for c in &mut components {
        c.0 /= sum;
    }
    Ok(MixedState { components })
}

/// Settings of one separation run.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SeparationSetup {
    /// Trap ground-state width, sites.
    pub sigma_e: f64,
    /// Trap centre, site index.
    pub center: f64,
    /// Linear potential slope, `E_rec` per site, applied to both atoms.
    pub slope: f64,
    /// Snapshot times, `ħ/E_rec`.
    pub times: Vec<f64>,
    pub pair_band: usize,
}

#[derive(Clone, Debug)]
pub struct SeparationRun {
    pub initial: InitialState,
    pub trace: ProtocolTrace,
    pub hamiltonian: TwoAtomHamiltonian,
}

/// Start from the trap product state and evolve under the interaction plus
/// the linear potential. The lattice is normally open.
pub fn run_separation(model: &ModelParams, setup: &SeparationSetup) -> Result<SeparationRun> {
    let initial = initial_state(setup.sigma_e, setup.center, model.site_count)?;
    let h = two_atom::build(model, &ExternalPotential::Linear { slope: setup.slope, center: setup.center })?;
    let propagator = Propagator::new(&h)?;
    let trace = evolve(&initial.state, &propagator, &setup.times, setup.center, setup.pair_band)?;
    Ok(SeparationRun { initial, trace, hamiltonian: h })
}
