//! Two distinguishable atoms on their own lattices, coupled by an on-site
//! attraction when they sit on facing sites.
//!
//! Product basis `|χ_j⁽¹⁾⟩|χ_l⁽²⁾⟩` is stored row-major, index `j·N + l`.
//! The on-site energy `H₀` is dropped as a global offset.

use std::f64::consts::PI;
use std::ops::Range;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::lanczos::{self, LanczosOptions};
use crate::parameters::{Boundary, ModelParams};

/// Largest lattice handled by the dense solver.
pub const DENSE_SITE_LIMIT: usize = 40;
/// Default memory budget for a dense two-atom matrix, bytes.
pub const DEFAULT_DENSE_BUDGET: usize = 512 << 20;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ExternalPotential {
    None,
    /// Harmonic trap whose single-particle ground state has position
    /// standard deviation `sigma_e` (sites), centred at site `center`.
    Harmonic {
        sigma_e: f64,
        center: f64,
    },
    /// `slope · (j − center)` in `E_rec`.
    Linear {
        slope: f64,
        center: f64,
    },
}

impl ExternalPotential {
    /// Potential at each of `n` sites, in `E_rec`.
    pub fn site_energies(&self, n: usize) -> Result<Vec<f64>> {
        match *self {
            ExternalPotential::None => Ok(vec![0.0; n]),
            ExternalPotential::Harmonic { sigma_e, center } => {
                if !(sigma_e > 0.0) {
                    return domain(format!("harmonic width must be > 0, got {sigma_e}"));
                }
                // ½mω²x² with m = π²/2 and ω = 1/(2mσ²)
                let c = 1.0 / (4.0 * PI * PI * sigma_e.powi(4));
                Ok((0..n).map(|j| c * (j as f64 - center).powi(2)).collect())
            }
            ExternalPotential::Linear { slope, center } => {
                if !slope.is_finite() {
                    return domain("linear slope must be finite");
                }
                Ok((0..n).map(|j| slope * (j as f64 - center)).collect())
            }
        }
    }
}

/// The two-atom Hamiltonian in structured form; see [`TwoAtomHamiltonian::to_dense`].
#[derive(Clone, Debug)]
pub struct TwoAtomHamiltonian {
    pub site_count: usize,
    pub hop: f64,
    pub vdd: f64,
    pub boundary: Boundary,
    pub site_energies_1: Vec<f64>,
    pub site_energies_2: Vec<f64>,
    /// `interaction[d]` couples configurations with `|j − l| = d`; entry 0 is `vdd`.
    pub interaction: Vec<f64>,
}

pub fn build(model: &ModelParams, external: &ExternalPotential) -> Result<TwoAtomHamiltonian> {
    build_with(model, external, external)
}

/// Build with a separate external potential for each atom.
pub fn build_with(
    model: &ModelParams,
    external_1: &ExternalPotential,
    external_2: &ExternalPotential,
) -> Result<TwoAtomHamiltonian> {
    model.validate()?;
    let n = model.site_count;
    Ok(TwoAtomHamiltonian {
        site_count: n,
        hop: model.hop,
        vdd: model.vdd,
        boundary: model.boundary,
        site_energies_1: external_1.site_energies(n)?,
        site_energies_2: external_2.site_energies(n)?,
        interaction: vec![model.vdd],
    })
}

impl TwoAtomHamiltonian {
    pub fn dim(&self) -> usize {
        self.site_count * self.site_count
    }

    /// Replace the on-site interaction with a profile over `|j − l|`, e.g.
    /// from [`crate::liddi::vdd_map`] in `E_rec`.
    pub fn with_interaction_profile(mut self, profile: Vec<f64>) -> Result<Self> {
        if profile.is_empty() || profile.iter().any(|v| !v.is_finite()) {
            return domain("interaction profile must be non-empty and finite");
        }
        self.vdd = profile[0];
        self.interaction = profile;
        Ok(self)
    }

    fn separation(&self, j: usize, l: usize) -> usize {
        let d = j.abs_diff(l);
        match self.boundary {
            Boundary::Open => d,
            Boundary::Periodic => d.min(self.site_count - d),
        }
    }

    pub fn diagonal(&self, j: usize, l: usize) -> f64 {
        let d = self.separation(j, l);
        let u = self.interaction.get(d).copied().unwrap_or(0.0);
        self.site_energies_1[j] + self.site_energies_2[l] + u
    }

    fn neighbours(&self, j: usize) -> impl Iterator<Item = usize> {
        let n = self.site_count;
        let periodic = self.boundary == Boundary::Periodic;
        let left = if j > 0 {
            Some(j - 1)
        } else if periodic {
            Some(n - 1)
        } else {
            None
        };
        let right = if j + 1 < n {
            Some(j + 1)
        } else if periodic {
            Some(0)
        } else {
            None
        };
        left.into_iter().chain(right)
    }

    /// Single-atom tight-binding matrix for atom 1 or 2.
    pub fn single_atom(&self, atom: usize) -> DMatrix<f64> {
        let n = self.site_count;
        let energies = if atom == 1 { &self.site_energies_1 } else { &self.site_energies_2 };
        let mut h = DMatrix::zeros(n, n);
        for j in 0..n {
            h[(j, j)] = energies[j];
            for k in self.neighbours(j) {
                h[(j, k)] += self.hop;
            }
        }
        h
    }

    pub fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        let n = self.site_count;
        let mut y = DVector::zeros(n * n);
        for j in 0..n {
            for l in 0..n {
                let i = j * n + l;
                let mut acc = self.diagonal(j, l) * x[i];
                for jj in self.neighbours(j) {
                    acc += self.hop * x[jj * n + l];
                }
                for ll in self.neighbours(l) {
                    acc += self.hop * x[j * n + ll];
                }
                y[i] = acc;
            }
        }
        y
    }

    pub fn apply_complex(&self, x: &[Complex64]) -> Vec<Complex64> {
        let n = self.site_count;
        let mut y = vec![Complex64::new(0.0, 0.0); n * n];
        for j in 0..n {
            for l in 0..n {
                let i = j * n + l;
                let mut acc = x[i] * self.diagonal(j, l);
                for jj in self.neighbours(j) {
                    acc += x[jj * n + l] * self.hop;
                }
                for ll in self.neighbours(l) {
                    acc += x[j * n + ll] * self.hop;
                }
                y[i] = acc;
            }
        }
        y
    }

    pub fn dense_bytes(&self) -> usize {
        self.dim() * self.dim() * std::mem::size_of::<f64>()
    }

    pub fn to_dense(&self, budget: usize) -> Result<DMatrix<f64>> {
        let bytes = self.dense_bytes();
        if bytes > budget {
            return Err(Error::MemoryBudget { dim: self.dim(), bytes, budget });
        }
        let n = self.site_count;
        let mut h = DMatrix::zeros(n * n, n * n);
        for j in 0..n {
            for l in 0..n {
                let i = j * n + l;
                h[(i, i)] += self.diagonal(j, l);
                for jj in self.neighbours(j) {
                    h[(i, jj * n + l)] += self.hop;
                }
                for ll in self.neighbours(l) {
                    h[(i, j * n + ll)] += self.hop;
                }
            }
        }
        Ok(h)
    }

    /// Lowest energy two non-interacting atoms can have.
    pub fn free_pair_minimum(&self) -> f64 {
        let lowest = |m: DMatrix<f64>| SymmetricEigen::new(m).eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
        lowest(self.single_atom(1)) + lowest(self.single_atom(2))
    }

    pub fn trace(&self) -> f64 {
        let n = self.site_count;
        (0..n).flat_map(|j| (0..n).map(move |l| (j, l))).map(|(j, l)| self.diagonal(j, l)).sum()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TwoAtomState {
    pub site_count: usize,
    /// `c_{jl}` at index `j·N + l`.
    pub amplitudes: Vec<Complex64>,
}

impl TwoAtomState {
    /// Normalizes the amplitudes; fails on a zero vector or wrong length.
    pub fn new(site_count: usize, amplitudes: Vec<Complex64>) -> Result<Self> {
        if amplitudes.len() != site_count * site_count {
            return domain(format!(
                "expected {} amplitudes for {site_count} sites, got {}",
                site_count * site_count,
                amplitudes.len()
            ));
        }
        let mut state = TwoAtomState { site_count, amplitudes };
        let norm = state.norm_squared().sqrt();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::Numerical("cannot normalize a zero or non-finite state".into()));
        }
        for a in &mut state.amplitudes {
            *a /= norm;
        }
        Ok(state)
    }

    pub fn from_real(site_count: usize, amplitudes: &[f64]) -> Result<Self> {
        Self::new(site_count, amplitudes.iter().map(|&a| Complex64::new(a, 0.0)).collect())
    }

    /// `c_{jl} = α_j β_l`.
    pub fn product(alpha: &[f64], beta: &[f64]) -> Result<Self> {
        if alpha.len() != beta.len() {
            return domain("product state needs envelopes of equal length");
        }
        let n = alpha.len();
        let amps = (0..n * n).map(|i| Complex64::new(alpha[i / n] * beta[i % n], 0.0)).collect();
        Self::new(n, amps)
    }

    pub fn amplitude(&self, j: usize, l: usize) -> Complex64 {
        self.amplitudes[j * self.site_count + l]
    }

    pub fn norm_squared(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn inner(&self, other: &TwoAtomState) -> Complex64 {
        self.amplitudes.iter().zip(&other.amplitudes).map(|(a, b)| a.conj() * b).sum()
    }

    pub fn fidelity(&self, other: &TwoAtomState) -> f64 {
        self.inner(other).norm_sqr()
    }

    /// `Σ_j |c_{jj}|²`
    pub fn diagonal_weight(&self) -> f64 {
        (0..self.site_count).map(|j| self.amplitude(j, j).norm_sqr()).sum()
    }

    /// Weight with `|j − l| ≤ band`.
    pub fn band_weight(&self, band: usize) -> f64 {
        let n = self.site_count;
        (0..n)
            .flat_map(|j| (0..n).map(move |l| (j, l)))
            .filter(|(j, l)| j.abs_diff(*l) <= band)
            .map(|(j, l)| self.amplitude(j, l).norm_sqr())
            .sum()
    }

    /// Exchange the roles of the two atoms.
    pub fn swapped(&self) -> TwoAtomState {
        let n = self.site_count;
        let amplitudes = (0..n * n).map(|i| self.amplitude(i % n, i / n)).collect();
        TwoAtomState { site_count: n, amplitudes }
    }

    /// Site-occupation probabilities of atom 1 and atom 2.
    pub fn marginals(&self) -> (Vec<f64>, Vec<f64>) {
        let n = self.site_count;
        let mut p1 = vec![0.0; n];
        let mut p2 = vec![0.0; n];
        for j in 0..n {
            for l in 0..n {
                let w = self.amplitude(j, l).norm_sqr();
                p1[j] += w;
                p2[l] += w;
            }
        }
        (p1, p2)
    }

    /// True when every amplitude off the `j = l` diagonal vanishes.
    pub fn is_diagonal(&self, tol: f64) -> bool {
        let n = self.site_count;
        (0..n * n).filter(|i| i / n != i % n).all(|i| self.amplitudes[i].norm() <= tol)
    }
}

/// Incoherent mixture `Σ w_n |ψ_n⟩⟨ψ_n|`.
#[derive(Clone, Debug)]
pub struct MixedState {
    pub components: Vec<(f64, TwoAtomState)>,
}

impl MixedState {
    pub fn pure(state: TwoAtomState) -> Self {
        MixedState { components: vec![(1.0, state)] }
    }

    pub fn site_count(&self) -> usize {
        self.components.first().map(|c| c.1.site_count).unwrap_or(0)
    }

    pub fn total_weight(&self) -> f64 {
        self.components.iter().map(|c| c.0).sum()
    }
}

#[derive(Clone, Debug)]
pub struct SpectrumResult {
    pub site_count: usize,
    pub eigenvalues: Vec<f64>,
    /// Columns are eigenvectors, ordered like `eigenvalues`.
    pub eigenvectors: DMatrix<f64>,
    /// States split off below the free two-atom continuum.
    pub diatom_band: Range<usize>,
    /// Whether every eigenpair was computed.
    pub complete: bool,
    pub free_pair_minimum: f64,
}

impl SpectrumResult {
    pub fn state(&self, index: usize) -> TwoAtomState {
        let col = self.eigenvectors.column(index);
        TwoAtomState { site_count: self.site_count, amplitudes: col.iter().map(|&a| Complex64::new(a, 0.0)).collect() }
    }

    pub fn diatom_count(&self) -> usize {
        self.diatom_band.len()
    }

    /// Lowest and highest energy of the split-off band.
    pub fn diatom_edges(&self) -> Option<(f64, f64)> {
        if self.diatom_band.is_empty() {
            None
        } else {
            Some((self.eigenvalues[self.diatom_band.start], self.eigenvalues[self.diatom_band.end - 1]))
        }
    }

    pub fn residual(&self, h: &TwoAtomHamiltonian, index: usize) -> f64 {
        let v = self.eigenvectors.column(index).into_owned();
        (h.apply(&v) - &v * self.eigenvalues[index]).norm()
    }
}

fn split_off(eigenvalues: &[f64], free_min: f64, scale: f64) -> Range<usize> {
    let tol = 1e-9 * scale.max(1.0);
    0..eigenvalues.iter().take_while(|&&e| e < free_min - tol).count()
}

/// Full spectrum for `N ≤ 40`, otherwise the lowest `4N` states.
pub fn diagonalize(h: &TwoAtomHamiltonian) -> Result<SpectrumResult> {
    if h.site_count <= DENSE_SITE_LIMIT {
        diagonalize_dense(h, DEFAULT_DENSE_BUDGET)
    } else {
        diagonalize_lowest(h, 4 * h.site_count)
    }
}

pub fn diagonalize_dense(h: &TwoAtomHamiltonian, budget: usize) -> Result<SpectrumResult> {
    let dense = h.to_dense(budget)?;
    let scale = dense.amax();
    let eig = SymmetricEigen::new(dense);
    let dim = h.dim();
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let eigenvalues: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut eigenvectors = DMatrix::zeros(dim, dim);
    for (col, &i) in order.iter().enumerate() {
        eigenvectors.set_column(col, &eig.eigenvectors.column(i));
    }
    let free_pair_minimum = h.free_pair_minimum();
    Ok(SpectrumResult {
        site_count: h.site_count,
        diatom_band: split_off(&eigenvalues, free_pair_minimum, scale),
        eigenvalues,
        eigenvectors,
        complete: true,
        free_pair_minimum,
    })
}

/// Lowest `count` eigenpairs by block Lanczos.
pub fn diagonalize_lowest(h: &TwoAtomHamiltonian, count: usize) -> Result<SpectrumResult> {
    let dim = h.dim();
    let count = count.min(dim);
    let options = LanczosOptions { max_basis: (20 * count).max(400).min(dim), ..Default::default() };
    let found = lanczos::lowest(dim, count, |v| h.apply(v), options)?;
    let scale = h.hop.abs().max(h.vdd.abs());
    let free_pair_minimum = h.free_pair_minimum();
    let mut diatom_band = split_off(&found.eigenvalues, free_pair_minimum, scale);
    if diatom_band.end == count && count < dim {
        // The band may extend beyond what was computed; report only what is known.
        diatom_band = 0..count;
    }
    Ok(SpectrumResult {
        site_count: h.site_count,
        diatom_band,
        eigenvalues: found.eigenvalues,
        eigenvectors: found.eigenvectors,
        complete: count == dim,
        free_pair_minimum,
    })
}

pub fn diatom_ground_state(spectrum: &SpectrumResult) -> TwoAtomState {
    spectrum.state(0)
}

/// Second-order hopping of a bound pair, `2V_hop²/V_dd`.
pub fn diatom_hopping(hop: f64, vdd: f64) -> Result<f64> {
    if vdd == 0.0 {
        return domain("diatom hopping needs a nonzero interaction");
    }
    Ok(2.0 * hop * hop / vdd)
}

/// `|V_dd|/(4V_hop²)` in units of `ħ²/(E_rec a²)`.
pub fn diatom_effective_mass(hop: f64, vdd: f64) -> Result<f64> {
    if hop == 0.0 {
        return domain("diatom mass diverges without hopping");
    }
    Ok(vdd.abs() / (4.0 * hop * hop))
}

/// Eigenvalues at total quasimomentum `K` on a periodic ring: the relative
/// coordinate `d = l − j mod N` with couplings `V_hop(1 + e^{∓iK})` and
/// `V_dd` at `d = 0`.
pub fn k_resolved_spectrum(hop: f64, vdd: f64, site_count: usize, total_k: f64) -> Vec<f64> {
    let n = site_count;
    let mut h = DMatrix::<Complex64>::zeros(n, n);
    h[(0, 0)] = Complex64::new(vdd, 0.0);
    let t = Complex64::new(hop, 0.0) * (Complex64::new(1.0, 0.0) + Complex64::from_polar(1.0, -total_k));
    for d in 0..n {
        let e = (d + 1) % n;
        h[(e, d)] += t;
        h[(d, e)] += t.conj();
    }
    let mut values: Vec<f64> = SymmetricEigen::new(h).eigenvalues.iter().copied().collect();
    values.sort_by(f64::total_cmp);
    values
}

/// Lowest state of each total-quasimomentum block, `K = 2πn/N`.
pub fn diatom_dispersion(hop: f64, vdd: f64, site_count: usize) -> Vec<(f64, f64)> {
    let n = site_count as i64;
    (-(n / 2)..n - n / 2)
        .map(|i| {
            let k = 2.0 * PI * i as f64 / n as f64;
            (k, k_resolved_spectrum(hop, vdd, site_count, k)[0])
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ThermalSelection {
    DiatomBand,
    Full,
}

/// Boltzmann mixture over eigenstates; `kt` in `E_rec`.
pub fn thermal_state(spectrum: &SpectrumResult, kt: f64, selection: ThermalSelection) -> Result<MixedState> {
    if !(kt >= 0.0) {
        return domain(format!("temperature must be >= 0, got k_B T = {kt}"));
    }
    let range = match selection {
        ThermalSelection::DiatomBand => spectrum.diatom_band.clone(),
        ThermalSelection::Full => 0..spectrum.eigenvalues.len(),
    };
    if range.is_empty() {
        return Err(Error::Numerical("no eigenstates in the selected thermal subset".into()));
    }
    let e0 = spectrum.eigenvalues[range.start];
    let weights: Vec<f64> = range
        .clone()
        .map(|i| {
            let de = spectrum.eigenvalues[i] - e0;
            if kt == 0.0 {
                if de <= 1e-12 * e0.abs().max(1.0) {
                    1.0
                } else {
                    0.0
                }
            } else {
                (-de / kt).exp()
            }
        })
        .collect();
    let total: f64 = weights.iter().sum();
    let components =
        range.zip(weights).filter(|(_, w)| *w / total > 1e-12).map(|(i, w)| (w / total, spectrum.state(i))).collect();
    Ok(MixedState { components })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model(hop: f64, vdd: f64, n: usize, boundary: Boundary) -> ModelParams {
        ModelParams::dimensionless(hop, vdd, n, boundary).unwrap()
    }

    fn sorted_pair_sums(single: &DMatrix<f64>) -> Vec<f64> {
        let e: Vec<f64> = SymmetricEigen::new(single.clone()).eigenvalues.iter().copied().collect();
        let mut sums: Vec<f64> = e.iter().flat_map(|a| e.iter().map(move |b| a + b)).collect();
        sums.sort_by(f64::total_cmp);
        sums
    }

    #[test]
    fn three_site_noninteracting() {
        let h = build(&model(-1.0, 0.0, 3, Boundary::Open), &ExternalPotential::None).unwrap();
        let s = diagonalize(&h).unwrap();
        let r = 2f64.sqrt();
        let single = [-r, 0.0, r];
        let mut expected: Vec<f64> = single.iter().flat_map(|a| single.iter().map(move |b| a + b)).collect();
        expected.sort_by(f64::total_cmp);
        for (a, b) in s.eigenvalues.iter().zip(&expected) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(s.diatom_band.is_empty());
    }

    #[test]
    fn dense_matrix_symmetric() {
        for boundary in [Boundary::Open, Boundary::Periodic] {
            let h = build(&model(-0.09, -0.5, 6, boundary), &ExternalPotential::Linear { slope: 0.04, center: 2.0 })
                .unwrap();
            let d = h.to_dense(DEFAULT_DENSE_BUDGET).unwrap();
            assert_eq!(d.clone(), d.transpose());
        }
    }

    #[test]
    fn memory_budget_enforced() {
        let h = build(&model(-0.09, -0.5, 30, Boundary::Open), &ExternalPotential::None).unwrap();
        match h.to_dense(1 << 20) {
            Err(Error::MemoryBudget { dim, .. }) => assert_eq!(dim, 900),
            other => panic!("expected budget error, got {other:?}"),
        }
    }

    #[test]
    fn lithium_pair_binds() {
        let h = build(&model(-0.09, -0.5, 25, Boundary::Open), &ExternalPotential::None).unwrap();
        let s = diagonalize(&h).unwrap();
        assert!(s.eigenvalues[0] < -0.5);
        assert_eq!(s.diatom_count(), 25);
    }

    #[test]
    fn spectral_sum_rule_and_residuals() {
        let h = build(
            &model(-0.09, -0.5, 10, Boundary::Periodic),
            &ExternalPotential::Harmonic { sigma_e: 2.0, center: 4.5 },
        )
        .unwrap();
        let s = diagonalize(&h).unwrap();
        let sum: f64 = s.eigenvalues.iter().sum();
        assert!((sum - h.trace()).abs() <= 1e-8 * h.trace().abs().max(1.0));
        let norm = h.to_dense(DEFAULT_DENSE_BUDGET).unwrap().norm();
        for i in 0..h.dim() {
            assert!(s.residual(&h, i) <= 1e-8 * norm);
        }
    }

    #[test]
    fn noninteracting_factorizes() {
        let h = build(&model(-0.07, 0.0, 7, Boundary::Open), &ExternalPotential::Linear { slope: 0.03, center: 0.0 })
            .unwrap();
        let s = diagonalize(&h).unwrap();
        for (a, b) in s.eigenvalues.iter().zip(sorted_pair_sums(&h.single_atom(1))) {
            assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn brute_force_four_sites() {
        let hop = -0.3;
        let vdd = -0.8;
        let n: usize = 4;
        let mut m = DMatrix::zeros(16, 16);
        for j in 0..n {
            for l in 0..n {
                for jj in 0..n {
                    for ll in 0..n {
                        let mut v = 0.0;
                        if j == jj && l == ll && j == l {
                            v += vdd;
                        }
                        if l == ll && j.abs_diff(jj) == 1 {
                            v += hop;
                        }
                        if j == jj && l.abs_diff(ll) == 1 {
                            v += hop;
                        }
                        m[(j * n + l, jj * n + ll)] = v;
                    }
                }
            }
        }
        let mut expected: Vec<f64> = SymmetricEigen::new(m).eigenvalues.iter().copied().collect();
        expected.sort_by(f64::total_cmp);
        let s = diagonalize(&build(&model(hop, vdd, n, Boundary::Open), &ExternalPotential::None).unwrap()).unwrap();
        for (a, b) in s.eigenvalues.iter().zip(&expected) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn exchange_parity() {
        let h = build(&model(-0.1, -0.6, 6, Boundary::Open), &ExternalPotential::None).unwrap();
        let s = diagonalize(&h).unwrap();
        for i in 0..h.dim() {
            let e = s.eigenvalues[i];
            let degenerate = s.eigenvalues.iter().filter(|&&x| (x - e).abs() < 1e-8).count() > 1;
            if degenerate {
                continue;
            }
            let v = s.state(i);
            let overlap = v.inner(&v.swapped()).re;
            assert!((overlap.abs() - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn lanczos_matches_dense() {
        let h = build(&model(-0.09, -0.5, 14, Boundary::Periodic), &ExternalPotential::None).unwrap();
        let dense = diagonalize(&h).unwrap();
        let sparse = diagonalize_lowest(&h, 20).unwrap();
        for i in 0..20 {
            assert!((dense.eigenvalues[i] - sparse.eigenvalues[i]).abs() < 1e-9);
            assert!(sparse.residual(&h, i) < 1e-8);
        }
        assert_eq!(sparse.diatom_band, 0..14);
    }

    #[test]
    fn ground_state_diagonal_weight() {
        let frozen =
            diagonalize(&build(&model(0.0, -1.0, 8, Boundary::Periodic), &ExternalPotential::None).unwrap()).unwrap();
        assert!((frozen.state(0).diagonal_weight() - 1.0).abs() < 1e-12);
        let tight =
            diagonalize(&build(&model(-0.0355, -1.0, 25, Boundary::Periodic), &ExternalPotential::None).unwrap())
                .unwrap();
        assert!(diatom_ground_state(&tight).diagonal_weight() >= 0.99);
        let loose =
            diagonalize(&build(&model(-0.0355, -0.10, 25, Boundary::Periodic), &ExternalPotential::None).unwrap())
                .unwrap();
        assert!(diatom_ground_state(&loose).diagonal_weight() < 0.9);
    }

    #[test]
    fn diatom_parameters() {
        assert!((diatom_hopping(-0.09, -0.5).unwrap() + 0.0324).abs() < 1e-12);
        assert_eq!(diatom_hopping(0.0, -0.5).unwrap(), 0.0);
        assert!(diatom_hopping(-0.09, 0.0).is_err());
        let m1 = diatom_effective_mass(-0.09, -0.5).unwrap();
        let single = crate::band_structure::effective_mass_from_hop(-0.09).unwrap();
        assert!((m1 / single - 0.09 / 0.0324).abs() < 1e-12);
        assert!((diatom_effective_mass(-0.09, -1.0).unwrap() / m1 - 2.0).abs() < 1e-12);
    }

    #[test]
    fn k_blocks_reproduce_full_spectrum() {
        let (hop, vdd, n) = (-0.05, -0.4, 9);
        let h = build(&model(hop, vdd, n, Boundary::Periodic), &ExternalPotential::None).unwrap();
        let full = diagonalize(&h).unwrap();
        let mut blocks: Vec<f64> =
            (0..n).flat_map(|i| k_resolved_spectrum(hop, vdd, n, 2.0 * PI * i as f64 / n as f64)).collect();
        blocks.sort_by(f64::total_cmp);
        for (a, b) in full.eigenvalues.iter().zip(&blocks) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn diatom_curvature_mass() {
        let (hop, vdd, n) = (-0.0355, -0.5, 200);
        let dk = 2.0 * PI / n as f64;
        let e = |k: f64| k_resolved_spectrum(hop, vdd, n, k)[0];
        let curvature = (e(dk) - 2.0 * e(0.0) + e(-dk)) / (dk * dk);
        let mass = diatom_effective_mass(hop, vdd).unwrap();
        assert!((1.0 / curvature - mass).abs() / mass < 0.20);
        let exact = (vdd * vdd + 16.0 * hop * hop).sqrt() / (4.0 * hop * hop);
        assert!((1.0 / curvature - exact).abs() / exact < 1e-3);
    }

    #[test]
    fn thermal_weights() {
        let h = build(&model(-0.0355, -0.5, 12, Boundary::Periodic), &ExternalPotential::None).unwrap();
        let s = diagonalize(&h).unwrap();
        let cold = thermal_state(&s, 0.0, ThermalSelection::DiatomBand).unwrap();
        assert_eq!(cold.components.len(), 1);
        assert!((cold.components[0].0 - 1.0).abs() < 1e-15);
        let (lo, hi) = s.diatom_edges().unwrap();
        let kt = hi - lo;
        let warm = thermal_state(&s, kt, ThermalSelection::DiatomBand).unwrap();
        let top = warm.components.last().unwrap().0;
        let bottom = warm.components[0].0;
        assert!((top / bottom - (-1.0f64).exp()).abs() < 1e-12);
        assert!((warm.total_weight() - 1.0).abs() < 1e-12);
        assert!(thermal_state(&s, -1.0, ThermalSelection::Full).is_err());
    }

    #[test]
    fn band_splits_further_with_stronger_binding() {
        let mut gaps = Vec::new();
        for vdd in [-0.5, -1.0, -2.0] {
            let s =
                diagonalize(&build(&model(-0.0355, vdd, 15, Boundary::Periodic), &ExternalPotential::None).unwrap())
                    .unwrap();
            let (_, top) = s.diatom_edges().unwrap();
            gaps.push(s.free_pair_minimum - top);
        }
        assert!(gaps[0] < gaps[1] && gaps[1] < gaps[2]);
    }
}
