//! Bloch bands of the 1D cosine lattice, lowest-band Wannier functions and
//! the tight-binding quantities derived from them.
//!
//! The lattice potential is written site-centred, `V(x) = −(U₀/2) cos(2πx)`,
//! so that the wells sit at integer `x`. This is the `+cos` lattice shifted by
//! half a period and has the same spectrum. Plane waves `e^{i(k+2πm)x}`,
//! `m = −M..=M`, are the basis; the Hamiltonian at each `k` is real symmetric.

use std::collections::HashMap;
use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;

use crate::error::{domain, Error, Result};

/// Bands that must be converged in the plane-wave cutoff.
const CONVERGED_BANDS: usize = 3;
const CONVERGENCE_TOL: f64 = 1e-10;

/// Plane-wave Hamiltonian at quasimomentum `k` (units of `1/a`).
pub fn plane_wave_hamiltonian(lattice_depth: f64, k: f64, n_planewaves: usize) -> DMatrix<f64> {
    let half = (n_planewaves / 2) as i64;
    let mut h = DMatrix::zeros(n_planewaves, n_planewaves);
    for i in 0..n_planewaves {
        let q = k + 2.0 * PI * (i as i64 - half) as f64;
        h[(i, i)] = q * q / (PI * PI);
        if i + 1 < n_planewaves {
            h[(i, i + 1)] = -lattice_depth / 4.0;
            h[(i + 1, i)] = -lattice_depth / 4.0;
        }
    }
    h
}

/// Sorted eigenpairs of the plane-wave Hamiltonian; eigenvector columns are
/// sign-fixed so the Bloch function is positive at the site centre.
fn solve_k(lattice_depth: f64, k: f64, n_planewaves: usize) -> (Vec<f64>, DMatrix<f64>) {
    let eig = SymmetricEigen::new(plane_wave_hamiltonian(lattice_depth, k, n_planewaves));
    let mut order: Vec<usize> = (0..n_planewaves).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = DMatrix::zeros(n_planewaves, n_planewaves);
    for (col, &i) in order.iter().enumerate() {
        let v = eig.eigenvectors.column(i);
        let sign = if v.sum() < 0.0 { -1.0 } else { 1.0 };
        vectors.set_column(col, &(v * sign));
    }
    (values, vectors)
}

#[derive(Clone, Debug)]
pub struct BlochSpectrum {
    pub lattice_depth: f64,
    pub n_planewaves: usize,
    /// `k_i = −π + 2πi/n_k`, units of `1/a`.
    pub quasimomenta: Vec<f64>,
    /// `band_energies[band][ik]` in `E_rec`, lowest three bands.
    pub band_energies: Vec<Vec<f64>>,
    /// `band_states[band][ik]`: plane-wave coefficients, index `m + M`.
    pub band_states: Vec<Vec<Vec<f64>>>,
}

impl BlochSpectrum {
    /// Diagonalize on `n_k` quasimomenta and check the lowest bands against a
    /// run with twice the plane-wave cutoff.
    pub fn compute(lattice_depth: f64, n_planewaves: usize, n_k: usize) -> Result<Self> {
        if !lattice_depth.is_finite() || lattice_depth < 0.0 {
            return domain(format!("lattice depth must be finite and >= 0, got {lattice_depth}"));
        }
        if n_planewaves < 21 || n_planewaves.is_multiple_of(2) {
            return domain(format!("n_planewaves must be odd and >= 21, got {n_planewaves}"));
        }
        if n_k < 8 || n_k % 2 == 1 {
            return domain(format!("n_k must be even and >= 8, got {n_k}"));
        }
        let quasimomenta: Vec<f64> = (0..n_k).map(|i| -PI + 2.0 * PI * i as f64 / n_k as f64).collect();
        let solved: Vec<(Vec<f64>, DMatrix<f64>, f64)> = quasimomenta
            .par_iter()
            .map(|&k| {
                let (values, vectors) = solve_k(lattice_depth, k, n_planewaves);
                let (fine, _) = solve_k(lattice_depth, k, 2 * n_planewaves + 1);
                let residual = (0..CONVERGED_BANDS).map(|b| (values[b] - fine[b]).abs()).fold(0.0, f64::max);
                (values, vectors, residual)
            })
            .collect();
        let residual = solved.iter().map(|s| s.2).fold(0.0, f64::max);
        if residual > CONVERGENCE_TOL {
            return Err(Error::Convergence {
                what: format!("plane-wave cutoff {n_planewaves} at U0 = {lattice_depth}"),
                residual,
            });
        }
        let band_energies = (0..CONVERGED_BANDS).map(|b| solved.iter().map(|s| s.0[b]).collect()).collect();
        let band_states = (0..CONVERGED_BANDS)
            .map(|b| solved.iter().map(|s| s.1.column(b).iter().copied().collect()).collect())
            .collect();
        Ok(BlochSpectrum { lattice_depth, n_planewaves, quasimomenta, band_energies, band_states })
    }

    pub fn lowest_band(&self) -> &[f64] {
        &self.band_energies[0]
    }

    pub fn n_k(&self) -> usize {
        self.quasimomenta.len()
    }
}

/// Lowest-band energy at an arbitrary quasimomentum.
pub fn band_energy(lattice_depth: f64, k: f64, n_planewaves: usize) -> f64 {
    solve_k(lattice_depth, k, n_planewaves).0[0]
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HoppingEstimate {
    /// Nearest-neighbour hopping `V_hop`, `E_rec`.
    pub hop: f64,
    /// On-site energy `H₀` (band centre).
    pub center_energy: f64,
    /// Width `V_B` of the lowest band.
    pub bandwidth: f64,
    /// Next-nearest-neighbour hopping.
    pub beyond_nearest: f64,
    /// `|4|hop| − V_B| / V_B ≤ 5%` and `hop < 0`.
    pub valid: bool,
}

/// Fourier coefficients of the lowest-band dispersion.
pub fn hopping_exact(spectrum: &BlochSpectrum) -> HoppingEstimate {
    let band = spectrum.lowest_band();
    let n = band.len() as f64;
    let fourier = |r: f64| band.iter().zip(&spectrum.quasimomenta).map(|(e, k)| e * (r * k).cos()).sum::<f64>() / n;
    let hop = fourier(1.0);
    let max = band.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = band.iter().copied().fold(f64::INFINITY, f64::min);
    let bandwidth = max - min;
    let valid = hop < 0.0 && (4.0 * hop.abs() - bandwidth).abs() <= 0.05 * bandwidth;
    HoppingEstimate { hop, center_energy: fourier(0.0), bandwidth, beyond_nearest: fourier(2.0), valid }
}

/// Magnitude of the empirical hopping law `¼ exp(−0.26 U₀)`.
pub fn hopping_approx(lattice_depth: f64) -> f64 {
    0.25 * (-0.26 * lattice_depth).exp()
}

/// `m_eff = 2ħ²/(a² V_B)`; units `ħ²/(E_rec a²)`, where the bare mass is `π²/2`.
pub fn effective_mass(bandwidth: f64) -> Result<f64> {
    if !(bandwidth > 0.0) {
        return domain(format!("bandwidth must be > 0, got {bandwidth}"));
    }
    Ok(2.0 / bandwidth)
}

/// `ħ²/(2a²|V_hop|)`, the nearest-neighbour form of [`effective_mass`].
pub fn effective_mass_from_hop(hop: f64) -> Result<f64> {
    if hop == 0.0 {
        return domain("hopping must be nonzero");
    }
    Ok(1.0 / (2.0 * hop.abs()))
}

/// Inverse curvature of the lowest band at `k = 0` by central differences.
pub fn curvature_mass(lattice_depth: f64, n_planewaves: usize) -> f64 {
    let dk = 1e-3;
    let e0 = band_energy(lattice_depth, 0.0, n_planewaves);
    let ep = band_energy(lattice_depth, dk, n_planewaves);
    let em = band_energy(lattice_depth, -dk, n_planewaves);
    dk * dk / (ep - 2.0 * e0 + em)
}

/// Width `σ_G` (units of `a`) of the harmonic approximation to a lattice well.
pub fn gaussian_width(lattice_depth: f64) -> Result<f64> {
    if !(lattice_depth > 0.0) {
        return domain(format!("Gaussian width diverges for U0 = {lattice_depth}"));
    }
    Ok(((1.0 / (PI * PI)) * (1.0 / (2.0 * lattice_depth)).sqrt()).sqrt())
}

/// Normalized Gaussian amplitude whose density has standard deviation `sigma`.
pub fn gaussian_amplitude(sigma: f64, x: f64) -> f64 {
    (2.0 * PI * sigma * sigma).powf(-0.25) * (-x * x / (4.0 * sigma * sigma)).exp()
}

/// Nearest-neighbour matrix element of the lattice Hamiltonian between two
/// Gaussians of width `σ_G` one site apart.
pub fn gaussian_hopping(lattice_depth: f64) -> Result<f64> {
    let sigma = gaussian_width(lattice_depth)?;
    let s2 = sigma * sigma;
    let overlap = (-1.0 / (8.0 * s2)).exp();
    let kinetic = -(overlap / (PI * PI)) * (1.0 / (16.0 * s2 * s2) - 1.0 / (4.0 * s2));
    let potential = overlap * (lattice_depth / 2.0) * (-2.0 * PI * PI * s2).exp();
    Ok(kinetic + potential)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GaussianApprox {
    pub sigma: f64,
    /// `|⟨ψ_Gauss|χ₀⟩|²`
    pub fidelity: f64,
}

/// Lowest-band Wannier function centred on site 0.
///
/// Built from `n_k` Bloch states, so it lives on a supercell of `n_k` cells
/// and is sampled at `points_per_cell` points per cell.
#[derive(Clone, Debug)]
pub struct WannierBasis {
    pub lattice_depth: f64,
    pub points_per_cell: usize,
    pub grid: Vec<f64>,
    pub wannier_0: Vec<f64>,
    /// Supercell size, equal to the number of quasimomenta.
    pub site_count: usize,
    pub hop: f64,
    pub center_energy: f64,
    quasimomenta: Vec<f64>,
    coefficients: Vec<Vec<f64>>,
    n_planewaves: usize,
}

impl WannierBasis {
    pub fn new(spectrum: &BlochSpectrum, points_per_cell: usize) -> Result<Self> {
        if points_per_cell < 64 {
            return domain(format!("Wannier grid needs >= 64 points per cell, got {points_per_cell}"));
        }
        // The density contains frequencies up to n_planewaves cycles per cell;
        // a finer grid keeps the discrete norm exact.
        let ppc = points_per_cell.max(spectrum.n_planewaves + 1);
        for (ik, c) in spectrum.band_states[0].iter().enumerate() {
            let at_site: f64 = c.iter().sum();
            if at_site.abs() < 1e-12 {
                return Err(Error::Numerical(format!(
                    "lowest Bloch function vanishes at the site centre for k = {}",
                    spectrum.quasimomenta[ik]
                )));
            }
        }
        let hopping = hopping_exact(spectrum);
        let n_k = spectrum.n_k();
        let mut basis = WannierBasis {
            lattice_depth: spectrum.lattice_depth,
            points_per_cell: ppc,
            grid: Vec::new(),
            wannier_0: Vec::new(),
            site_count: n_k,
            hop: hopping.hop,
            center_energy: hopping.center_energy,
            quasimomenta: spectrum.quasimomenta.clone(),
            coefficients: spectrum.band_states[0].clone(),
            n_planewaves: spectrum.n_planewaves,
        };
        let half = (n_k * ppc / 2) as i64;
        basis.grid = (-half..half).map(|i| i as f64 / ppc as f64).collect();
        basis.wannier_0 = basis.grid.par_iter().map(|&x| basis.value(x)).collect();
        Ok(basis)
    }

    /// `χ₀(x)`, exact for the sampled Bloch states.
    pub fn value(&self, x: f64) -> f64 {
        let half = (self.n_planewaves / 2) as i64;
        let mut sum = 0.0;
        for (k, c) in self.quasimomenta.iter().zip(&self.coefficients) {
            for (i, ci) in c.iter().enumerate() {
                sum += ci * ((k + 2.0 * PI * (i as i64 - half) as f64) * x).cos();
            }
        }
        sum / self.quasimomenta.len() as f64
    }

    /// `χ₀` sampled at `x = i/points_per_cell` for `|x| ≤ half_width`.
    pub fn sample(&self, points_per_cell: usize, half_width: f64) -> Vec<(f64, f64)> {
        let n = (half_width * points_per_cell as f64).floor() as i64;
        (-n..=n)
            .into_par_iter()
            .map(|i| {
                let x = i as f64 / points_per_cell as f64;
                (x, self.value(x))
            })
            .collect()
    }

    pub fn dx(&self) -> f64 {
        1.0 / self.points_per_cell as f64
    }

    pub fn norm_squared(&self) -> f64 {
        self.wannier_0.iter().map(|v| v * v).sum::<f64>() * self.dx()
    }

    /// Norm squared from the plane-wave coefficients.
    pub fn coefficient_norm_squared(&self) -> f64 {
        self.coefficients.iter().flatten().map(|c| c * c).sum::<f64>() / self.quasimomenta.len() as f64
    }

    /// `⟨χ₀|χ_j⟩` on the grid.
    pub fn overlap(&self, j: i64) -> f64 {
        let shift = j * self.points_per_cell as i64;
        let n = self.wannier_0.len() as i64;
        let mut sum = 0.0;
        for i in 0..n {
            let k = i - shift;
            if (0..n).contains(&k) {
                sum += self.wannier_0[i as usize] * self.wannier_0[k as usize];
            }
        }
        sum * self.dx()
    }

    /// Root-mean-square width `√⟨x²⟩`.
    pub fn rms_width(&self) -> f64 {
        let m2: f64 = self.grid.iter().zip(&self.wannier_0).map(|(x, v)| x * x * v * v).sum();
        (m2 * self.dx() / self.norm_squared()).sqrt()
    }

    /// Fourier amplitude `χ̃(p) = (2π)^{-1/2} ∫ χ₀(x) e^{−ipx} dx` with `p` in `ħ/a`.
    pub fn momentum_amplitude(&self, p: f64) -> f64 {
        self.momentum_amplitudes(&[p])[0]
    }

    /// [`Self::momentum_amplitude`] for many momenta; each distinct
    /// quasimomentum is diagonalized once.
    pub fn momentum_amplitudes(&self, ps: &[f64]) -> Vec<f64> {
        let fold = |p: f64| {
            let m = (p / (2.0 * PI)).round();
            (p - 2.0 * PI * m, m as i64)
        };
        let mut distinct: Vec<f64> = Vec::new();
        let mut index: HashMap<u64, usize> = HashMap::new();
        for &p in ps {
            let (k, _) = fold(p);
            index.entry(k.to_bits()).or_insert_with(|| {
                distinct.push(k);
                distinct.len() - 1
            });
        }
        let depth = self.lattice_depth;
        let npw = self.n_planewaves;
        let states: Vec<Vec<f64>> = distinct
            .par_iter()
            .map(|&k| {
                let (_, v) = solve_k(depth, k, npw);
                v.column(0).iter().copied().collect()
            })
            .collect();
        let half = (npw / 2) as i64;
        ps.iter()
            .map(|&p| {
                let (k, m) = fold(p);
                let c = &states[index[&k.to_bits()]];
                let i = m + half;
                if (0..npw as i64).contains(&i) {
                    c[i as usize] / (2.0 * PI).sqrt()
                } else {
                    0.0
                }
            })
            .collect()
    }

    /// Fidelity of the `σ_G` Gaussian against this Wannier function.
    pub fn gaussian_approx(&self) -> Result<GaussianApprox> {
        let sigma = gaussian_width(self.lattice_depth)?;
        let overlap: f64 =
            self.grid.iter().zip(&self.wannier_0).map(|(&x, &w)| w * gaussian_amplitude(sigma, x)).sum::<f64>()
                * self.dx();
        Ok(GaussianApprox { sigma, fidelity: overlap * overlap })
    }
}

/// Convenience: spectrum and Wannier function at the default resolution.
pub fn wannier(lattice_depth: f64) -> Result<WannierBasis> {
    let spectrum = BlochSpectrum::compute(
        lattice_depth,
        crate::parameters::DEFAULT_PLANEWAVES,
        crate::parameters::DEFAULT_KPOINTS,
    )?;
    WannierBasis::new(&spectrum, 64)
}
