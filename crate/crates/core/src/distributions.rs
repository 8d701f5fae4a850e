//! Joint, marginal and conditional position/momentum distributions of
//! two-atom states, EPR widths, and the Gaussian EPR reference state.
//!
//! Positions are in units of `a`, momenta in `ħ/a`. Both atoms share one
//! axis, so sums and differences of grid coordinates land on grid points.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::band_structure::WannierBasis;
use crate::error::{domain, Error, Result};
use crate::two_atom::{MixedState, TwoAtomState};

pub const MIN_POINTS_PER_CELL: usize = 16;
/// Extra cells on each side of the lattice in position grids.
const POSITION_MARGIN: usize = 6;
/// Momentum grids extend until `|χ̃(p)|²` has fallen below this fraction of its peak.
const MOMENTUM_TAIL: f64 = 1e-14;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum DistributionKind {
    Position,
    Momentum,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Atom {
    First,
    Second,
}

#[derive(Clone, Debug)]
pub struct JointDistribution {
    pub kind: DistributionKind,
    pub axis1: Vec<f64>,
    pub axis2: Vec<f64>,
    /// `density[(i1, i2)]` at `(axis1[i1], axis2[i2])`; unit mass.
    pub density: DMatrix<f64>,
    /// Mass on the grid before normalization.
    pub raw_mass: f64,
}

#[derive(Clone, Debug)]
pub struct Distribution1D {
    pub axis: Vec<f64>,
    pub density: Vec<f64>,
}

impl Distribution1D {
    pub fn spacing(&self) -> f64 {
        self.axis[1] - self.axis[0]
    }

    pub fn mass(&self) -> f64 {
        self.density.iter().sum::<f64>() * self.spacing()
    }

    pub fn mean(&self) -> f64 {
        self.axis.iter().zip(&self.density).map(|(x, p)| x * p).sum::<f64>() * self.spacing() / self.mass()
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.axis.iter().zip(&self.density).map(|(x, p)| (x - m).powi(2) * p).sum::<f64>() * self.spacing()
            / self.mass()
    }

    /// Half width at half maximum of the highest peak with `|u − center| ≤ window`.
    pub fn hwhm_central_peak(&self, center: f64, window: f64) -> Result<f64> {
        let candidates: Vec<usize> =
            (0..self.axis.len()).filter(|&i| (self.axis[i] - center).abs() <= window).collect();
        let peak = candidates
            .iter()
            .copied()
            .max_by(|&a, &b| self.density[a].total_cmp(&self.density[b]))
            .ok_or_else(|| Error::Numerical("no grid points near the central peak".into()))?;
        let top = self.density[peak];
        if !(top > 0.0) {
            return Err(Error::Numerical("central peak has zero height".into()));
        }
        let half = top / 2.0;
        let crossing = |step: isize| -> Result<f64> {
            let mut i = peak as isize;
            loop {
                let next = i + step;
                if next < 0 || next as usize >= self.axis.len() {
                    return Err(Error::Numerical("central peak does not fall to half maximum on the grid".into()));
                }
                let (a, b) = (self.density[i as usize], self.density[next as usize]);
                if b < half {
                    let t = (a - half) / (a - b);
                    let (xa, xb) = (self.axis[i as usize], self.axis[next as usize]);
                    return Ok(xa + t * (xb - xa));
                }
                i = next;
            }
        };
        Ok((crossing(1)? - crossing(-1)?) / 2.0)
    }

    /// Standard deviation within `|u − center| ≤ window`.
    pub fn windowed_sigma(&self, center: f64, window: f64) -> f64 {
        let inside: Vec<(f64, f64)> = self
            .axis
            .iter()
            .zip(&self.density)
            .filter(|(x, _)| (*x - center).abs() <= window)
            .map(|(x, p)| (*x, *p))
            .collect();
        let mass: f64 = inside.iter().map(|e| e.1).sum();
        let mean = inside.iter().map(|(x, p)| x * p).sum::<f64>() / mass;
        (inside.iter().map(|(x, p)| (x - mean).powi(2) * p).sum::<f64>() / mass).sqrt()
    }

    /// Mean spacing of local maxima above `fraction` of the global maximum.
    pub fn peak_spacing(&self, fraction: f64) -> Option<f64> {
        let top = self.density.iter().copied().fold(0.0, f64::max);
        let peaks: Vec<f64> = (1..self.density.len().saturating_sub(1))
            .filter(|&i| {
                let p = self.density[i];
                p > fraction * top && p >= self.density[i - 1] && p > self.density[i + 1]
            })
            .map(|i| self.axis[i])
            .collect();
        if peaks.len() < 2 {
            return None;
        }
        Some((peaks[peaks.len() - 1] - peaks[0]) / (peaks.len() - 1) as f64)
    }
}

impl JointDistribution {
    pub fn spacing(&self) -> f64 {
        self.axis1[1] - self.axis1[0]
    }

    pub fn mass(&self) -> f64 {
        self.density.sum() * self.spacing().powi(2)
    }

    pub fn marginal(&self, atom: Atom) -> Distribution1D {
        let h = self.spacing();
        match atom {
            Atom::First => Distribution1D {
                axis: self.axis1.clone(),
                density: self.density.row_iter().map(|r| r.sum() * h).collect(),
            },
            Atom::Second => Distribution1D {
                axis: self.axis2.clone(),
                density: self.density.column_iter().map(|c| c.sum() * h).collect(),
            },
        }
    }

    /// Density of `u₁ + u₂`.
    pub fn sum_marginal(&self) -> Distribution1D {
        let n = self.axis1.len();
        let h = self.spacing();
        let mut density = vec![0.0; 2 * n - 1];
        for i in 0..n {
            for j in 0..n {
                density[i + j] += self.density[(i, j)] * h;
            }
        }
        let axis = (0..2 * n - 1).map(|k| 2.0 * self.axis1[0] + k as f64 * h).collect();
        Distribution1D { axis, density }
    }

    /// Density of `u₁ − u₂`.
    pub fn difference_marginal(&self) -> Distribution1D {
        let n = self.axis1.len();
        let h = self.spacing();
        let mut density = vec![0.0; 2 * n - 1];
        for i in 0..n {
            for j in 0..n {
                density[i + n - 1 - j] += self.density[(i, j)] * h;
            }
        }
        let axis = (0..2 * n - 1).map(|k| (k as f64 - (n - 1) as f64) * h).collect();
        Distribution1D { axis, density }
    }

    /// Pearson correlation of `(u₁, u₂)`, optionally restricted to `|u| ≤ window` on both axes.
    pub fn correlation(&self, window: Option<f64>) -> f64 {
        let keep = |u: f64| window.is_none_or(|w| u.abs() <= w);
        let (mut m, mut s1, mut s2, mut s11, mut s22, mut s12) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
        for (i, &u1) in self.axis1.iter().enumerate() {
            if !keep(u1) {
                continue;
            }
            for (j, &u2) in self.axis2.iter().enumerate() {
                if !keep(u2) {
                    continue;
                }
                let p = self.density[(i, j)];
                m += p;
                s1 += p * u1;
                s2 += p * u2;
                s11 += p * u1 * u1;
                s22 += p * u2 * u2;
                s12 += p * u1 * u2;
            }
        }
        let (e1, e2) = (s1 / m, s2 / m);
        let cov = s12 / m - e1 * e2;
        cov / ((s11 / m - e1 * e1) * (s22 / m - e2 * e2)).sqrt()
    }
}

fn check_state(state: &MixedState) -> Result<usize> {
    let n = state.site_count();
    if n == 0 {
        return domain("mixed state has no components");
    }
    for (w, s) in &state.components {
        if s.site_count != n || !(*w >= 0.0) {
            return domain("mixed-state components must share a lattice and have non-negative weights");
        }
        if (s.norm_squared() - 1.0).abs() > 1e-8 {
            return domain(format!("state is not normalized (norm² = {})", s.norm_squared()));
        }
    }
    Ok(n)
}

fn wannier_value(basis: &WannierBasis, x: f64) -> f64 {
    // Outside half the supercell the exact Bloch sum shows periodic images.
    if x.abs() >= basis.site_count as f64 / 2.0 {
        0.0
    } else {
        basis.value(x)
    }
}

/// `|Σ c_{jl} χ_j(x₁) χ_l(x₂)|²` on a grid of `points_per_cell` points per
/// cell spanning the lattice plus a margin.
pub fn position_joint(state: &MixedState, basis: &WannierBasis, points_per_cell: usize) -> Result<JointDistribution> {
    let n = check_state(state)?;
    if points_per_cell < MIN_POINTS_PER_CELL {
        return domain(format!("position grid needs >= {MIN_POINTS_PER_CELL} points per cell, got {points_per_cell}"));
    }
    let ppc = points_per_cell as i64;
    let margin = POSITION_MARGIN as i64;
    let first = -margin * ppc;
    let last = (n as i64 - 1 + margin) * ppc;
    let axis: Vec<f64> = (first..=last).map(|i| i as f64 / ppc as f64).collect();
    let m = axis.len();
    // χ₀ at every needed offset x_i − j, i.e. multiples of 1/ppc.
    let reach = (n as i64 - 1 + margin) * ppc;
    let samples: Vec<f64> =
        (-reach..=reach).into_par_iter().map(|k| wannier_value(basis, k as f64 / ppc as f64)).collect();
    let x = DMatrix::from_fn(m, n, |i, j| samples[(first + i as i64 - j as i64 * ppc + reach) as usize]);
    let density = accumulate(&state.components, m, |w, s| {
        let re = DMatrix::from_fn(n, n, |j, l| s.amplitude(j, l).re);
        let im = DMatrix::from_fn(n, n, |j, l| s.amplitude(j, l).im);
        let a = &x * re * x.transpose();
        let b = &x * im * x.transpose();
        a.zip_map(&b, |u, v| w * (u * u + v * v))
    });
    finish(DistributionKind::Position, axis, density)
}

/// Weighted sum over mixture components in parallel. Chunk boundaries depend
/// only on the component count, so the floating-point result is reproducible.
fn accumulate<F>(components: &[(f64, TwoAtomState)], m: usize, term: F) -> DMatrix<f64>
where
    F: Fn(f64, &TwoAtomState) -> DMatrix<f64> + Sync,
{
    let chunk = components.len().div_ceil(4).max(1);
    let partial: Vec<DMatrix<f64>> = components
        .par_chunks(chunk)
        .map(|c| c.iter().fold(DMatrix::zeros(m, m), |acc, (w, s)| acc + term(*w, s)))
        .collect();
    partial.into_iter().fold(DMatrix::zeros(m, m), |acc, p| acc + p)
}

fn finish(kind: DistributionKind, axis: Vec<f64>, density: DMatrix<f64>) -> Result<JointDistribution> {
    let h = axis[1] - axis[0];
    let raw_mass = density.sum() * h * h;
    if !(raw_mass > 0.0) {
        return Err(Error::Numerical("joint distribution has no mass on the grid".into()));
    }
    Ok(JointDistribution { kind, axis2: axis.clone(), axis1: axis, density: density / raw_mass, raw_mass })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MomentumGrid {
    /// Points per Brillouin zone (`2π ħ/a`); even.
    pub points_per_zone: usize,
    /// The grid spans `±half_zones · 2π`.
    pub half_zones: usize,
}

impl MomentumGrid {
    /// `8N` points per zone and enough zones to contain the Wannier envelope.
    pub fn for_lattice(basis: &WannierBasis, site_count: usize) -> Self {
        let peak = basis.momentum_amplitude(0.0).powi(2);
        let mut zones = 1;
        while zones < 20 && basis.momentum_amplitude(2.0 * PI * zones as f64).powi(2) > MOMENTUM_TAIL * peak {
            zones += 1;
        }
        MomentumGrid { points_per_zone: (8 * site_count).max(MIN_POINTS_PER_CELL), half_zones: zones }
    }

    pub fn axis(&self) -> Vec<f64> {
        let k = (self.points_per_zone * self.half_zones) as i64;
        let dp = 2.0 * PI / self.points_per_zone as f64;
        (-k..=k).map(|i| i as f64 * dp).collect()
    }
}

/// `|Σ c_{jl} e^{−i(p₁j + p₂l)}|² |χ̃(p₁)χ̃(p₂)|²`.
pub fn momentum_joint(state: &MixedState, basis: &WannierBasis, grid: MomentumGrid) -> Result<JointDistribution> {
    let n = check_state(state)?;
    if grid.points_per_zone < MIN_POINTS_PER_CELL || grid.points_per_zone < 4 * n || grid.points_per_zone % 2 == 1 {
        return domain(format!(
            "momentum grid needs an even number of points per zone >= max(16, 4N) = {}, got {}",
            MIN_POINTS_PER_CELL.max(4 * n),
            grid.points_per_zone
        ));
    }
    let axis = grid.axis();
    let m = axis.len();
    let envelope = basis.momentum_amplitudes(&axis);
    let e = DMatrix::from_fn(m, n, |i, j| Complex64::from_polar(1.0, -axis[i] * j as f64));
    let dp = axis[1] - axis[0];
    // Diagonal components depend only on p₁ + p₂, so their weighted sum
    // collapses to one function of the sum index.
    let (diagonal, general): (Vec<_>, Vec<_>) = state.components.iter().cloned().partition(|(_, s)| s.is_diagonal(0.0));
    let ridge: Vec<f64> = (0..2 * m - 1)
        .into_par_iter()
        .map(|k| {
            let p = 2.0 * axis[0] + k as f64 * dp;
            let phases: Vec<Complex64> = (0..n).map(|j| Complex64::from_polar(1.0, -p * j as f64)).collect();
            diagonal
                .iter()
                .map(|(w, s)| w * (0..n).map(|j| s.amplitude(j, j) * phases[j]).sum::<Complex64>().norm_sqr())
                .sum()
        })
        .collect();
    let mut density = accumulate(&general, m, |w, s| {
        let c = DMatrix::from_fn(n, n, |j, l| s.amplitude(j, l));
        let amp = &e * c * e.transpose();
        DMatrix::from_fn(m, m, |i1, i2| w * amp[(i1, i2)].norm_sqr())
    });
    if !diagonal.is_empty() {
        density += DMatrix::from_fn(m, m, |i1, i2| ridge[i1 + i2]);
    }
    for i1 in 0..m {
        for i2 in 0..m {
            density[(i1, i2)] *= (envelope[i1] * envelope[i2]).powi(2);
        }
    }
    finish(DistributionKind::Momentum, axis, density)
}

/// Slice of the joint at `value` of one atom's coordinate, linearly
/// interpolated between grid lines and renormalized.
pub fn conditional(joint: &JointDistribution, value: f64, measured: Atom) -> Result<Distribution1D> {
    let (axis, other) = match measured {
        Atom::First => (&joint.axis1, &joint.axis2),
        Atom::Second => (&joint.axis2, &joint.axis1),
    };
    let h = joint.spacing();
    let pos = (value - axis[0]) / h;
    if !(pos >= -1e-9 && pos <= (axis.len() - 1) as f64 + 1e-9) {
        return domain(format!("measured value {value} lies outside the grid [{}, {}]", axis[0], axis[axis.len() - 1]));
    }
    let i = (pos.floor().max(0.0) as usize).min(axis.len() - 2);
    let t = (pos - i as f64).clamp(0.0, 1.0);
    let at = |k: usize, j: usize| match measured {
        Atom::First => joint.density[(k, j)],
        Atom::Second => joint.density[(j, k)],
    };
    let density: Vec<f64> = (0..other.len()).map(|j| (1.0 - t) * at(i, j) + t * at(i + 1, j)).collect();
    normalized(other.clone(), density)
}

/// Conditional distribution given that the measured coordinate fell in a bin
/// of `width` centred on `value`.
pub fn conditional_binned(joint: &JointDistribution, value: f64, width: f64, measured: Atom) -> Result<Distribution1D> {
    let (axis, other) = match measured {
        Atom::First => (&joint.axis1, &joint.axis2),
        Atom::Second => (&joint.axis2, &joint.axis1),
    };
    let rows: Vec<usize> = (0..axis.len()).filter(|&k| (axis[k] - value).abs() <= width / 2.0).collect();
    if rows.is_empty() {
        return domain(format!("bin around {value} of width {width} contains no grid points"));
    }
    let density = (0..other.len())
        .map(|j| {
            rows.iter()
                .map(|&k| match measured {
                    Atom::First => joint.density[(k, j)],
                    Atom::Second => joint.density[(j, k)],
                })
                .sum()
        })
        .collect();
    normalized(other.clone(), density)
}

fn normalized(axis: Vec<f64>, density: Vec<f64>) -> Result<Distribution1D> {
    let h = axis[1] - axis[0];
    let mass: f64 = density.iter().sum::<f64>() * h;
    if !(mass >= 1e-12) {
        return Err(Error::Numerical(format!("conditional slice carries too little probability ({mass:.3e})")));
    }
    Ok(Distribution1D { axis, density: density.into_iter().map(|p| p / mass).collect() })
}

/// EPR widths of a two-atom state. Lengths in `a`, momenta in `ħ/a`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EprMetrics {
    /// `√(Var(x₁ − x₂)/2)`; equals the single-site width for a perfectly
    /// paired state.
    pub dx_minus: f64,
    /// HWHM of the central ridge of the `p₁ + p₂` distribution.
    pub dp_plus: f64,
    /// `1/(2 Δx₋ Δp₊)`
    pub s: f64,
    pub peak_spacing_x: Option<f64>,
    pub peak_spacing_p: Option<f64>,
    /// HWHM of the central peak of the `x₁ − x₂` distribution.
    pub dx_minus_hwhm: f64,
    /// Standard deviation of `p₁ + p₂` within the central zone.
    pub dp_plus_sigma: f64,
}

pub fn epr_metrics(position: &JointDistribution, momentum: &JointDistribution) -> Result<EprMetrics> {
    if position.kind != DistributionKind::Position || momentum.kind != DistributionKind::Momentum {
        return domain("epr_metrics needs a position joint and a momentum joint");
    }
    let minus = position.difference_marginal();
    let dx_minus = (minus.variance() / 2.0).sqrt();
    let dx_minus_hwhm = minus.hwhm_central_peak(0.0, 0.5)?;
    let plus = momentum.sum_marginal();
    let dp_plus = plus.hwhm_central_peak(0.0, PI)?;
    let dp_plus_sigma = plus.windowed_sigma(0.0, PI);
    if !(dx_minus > 0.0 && dp_plus > 0.0) {
        return Err(Error::Numerical("degenerate EPR widths".into()));
    }
    Ok(EprMetrics {
        dx_minus,
        dp_plus,
        s: 1.0 / (2.0 * dx_minus * dp_plus),
        peak_spacing_x: position.marginal(Atom::First).peak_spacing(0.1),
        peak_spacing_p: plus.peak_spacing(0.1),
        dx_minus_hwhm,
        dp_plus_sigma,
    })
}

/// `ħ/(√2 σ_E tanh[ħ²/(2σ_E² m k_B T)])` in SI units.
pub fn thermal_dp_plus_si(sigma_e: f64, temperature: f64, mass: f64) -> Result<f64> {
    use crate::parameters::{HBAR, K_B};
    if !(sigma_e > 0.0 && mass > 0.0 && temperature >= 0.0) {
        return domain("thermal Δp₊ needs σ_E > 0, m > 0 and T >= 0");
    }
    let arg = HBAR * HBAR / (2.0 * sigma_e * sigma_e * mass * K_B * temperature);
    Ok(HBAR / (2f64.sqrt() * sigma_e * arg.tanh()))
}

/// [`thermal_dp_plus_si`] in natural units: `sigma_e` in `a`, `kt` in `E_rec`, result in `ħ/a`.
pub fn thermal_dp_plus(sigma_e: f64, kt: f64) -> Result<f64> {
    if !(sigma_e > 0.0 && kt >= 0.0) {
        return domain("thermal Δp₊ needs σ_E > 0 and k_B T >= 0");
    }
    Ok(1.0 / (2f64.sqrt() * sigma_e * thermal_tanh_argument(sigma_e, kt).tanh()))
}

/// `(a/σ_E)² E_rec/(π² k_B T)`
pub fn thermal_tanh_argument(sigma_e: f64, kt: f64) -> f64 {
    1.0 / (PI * PI * sigma_e * sigma_e * kt)
}

/// Closed-form `s ≈ (σ_E/(√2σ)) tanh[(a/σ_E)² E_rec/(π² k_B T)]`.
pub fn s_estimate(sigma_e: f64, sigma: f64, kt: f64) -> Result<f64> {
    if !(sigma_e > 0.0 && sigma > 0.0 && kt >= 0.0) {
        return domain("s estimate needs σ_E > 0, σ > 0 and k_B T >= 0");
    }
    Ok(sigma_e / (2f64.sqrt() * sigma) * thermal_tanh_argument(sigma_e, kt).tanh())
}

/// Gaussian EPR state with relative width `Δx₋` and centre-of-mass width `Δx₊`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GaussianEpr {
    pub dx_minus: f64,
    pub dx_plus: f64,
}

impl GaussianEpr {
    pub fn new(dx_minus: f64, dx_plus: f64) -> Result<Self> {
        if !(dx_minus > 0.0 && dx_plus > 0.0) {
            return domain("Gaussian EPR widths must be > 0");
        }
        Ok(GaussianEpr { dx_minus, dx_plus })
    }

    pub fn dp_minus(&self) -> f64 {
        1.0 / self.dx_minus
    }

    pub fn dp_plus(&self) -> f64 {
        1.0 / self.dx_plus
    }

    fn density(w_minus: f64, w_plus: f64, u1: f64, u2: f64) -> f64 {
        let d = u1 - u2;
        let s = u1 + u2;
        (-(d * d) / (2.0 * w_minus * w_minus) - (s * s) / (2.0 * w_plus * w_plus)).exp() / (PI * w_minus * w_plus)
    }

    pub fn position_density(&self, x1: f64, x2: f64) -> f64 {
        Self::density(self.dx_minus, self.dx_plus, x1, x2)
    }

    pub fn momentum_density(&self, p1: f64, p2: f64) -> f64 {
        Self::density(self.dp_minus(), self.dp_plus(), p1, p2)
    }

    fn ratio_squared(&self) -> f64 {
        (self.dx_minus / self.dx_plus).powi(2)
    }

    /// Mean of `x₂` once `x₁` is known.
    pub fn conditional_center(&self, x1: f64) -> f64 {
        let r2 = self.ratio_squared();
        x1 * (1.0 - r2) / (1.0 + r2)
    }

    /// Standard deviation of `x₂` once `x₁` is known.
    pub fn conditional_width(&self) -> f64 {
        self.dx_minus / (1.0 + self.ratio_squared()).sqrt()
    }
}

/// The basis state `|χ_j⟩|χ_l⟩`.
pub fn single_site_pair(site_count: usize, j: usize, l: usize) -> Result<TwoAtomState> {
    let mut amps = vec![Complex64::new(0.0, 0.0); site_count * site_count];
    amps[j * site_count + l] = Complex64::new(1.0, 0.0);
    TwoAtomState::new(site_count, amps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::band_structure::{self, BlochSpectrum};
    use crate::parameters::{Boundary, ModelParams};
    use crate::two_atom::{self, ExternalPotential};

    fn basis() -> WannierBasis {
        WannierBasis::new(&BlochSpectrum::compute(3.93, 41, 64).unwrap(), 64).unwrap()
    }

    fn ground(hop: f64, vdd: f64, n: usize, boundary: Boundary) -> TwoAtomState {
        let model = ModelParams::dimensionless(hop, vdd, n, boundary).unwrap();
        let h = two_atom::build(&model, &ExternalPotential::None).unwrap();
        two_atom::diatom_ground_state(&two_atom::diagonalize(&h).unwrap())
    }

    #[test]
    fn single_pair_position_peak() {
        let b = basis();
        let state = MixedState::pure(single_site_pair(5, 2, 2).unwrap());
        let joint = position_joint(&state, &b, 32).unwrap();
        assert!((joint.raw_mass - 1.0).abs() < 1e-8);
        let m1 = joint.marginal(Atom::First);
        assert!((m1.mean() - 2.0).abs() < 1e-10);
        assert!((m1.variance().sqrt() - b.rms_width()).abs() < 1e-6);
        let sigma_g = band_structure::gaussian_width(3.93).unwrap();
        assert!((m1.variance().sqrt() - sigma_g).abs() / sigma_g < 0.15);
        assert!(position_joint(&state, &b, 8).is_err());
    }

    #[test]
    fn momentum_and_position_mass_agree() {
        let b = basis();
        let state = MixedState::pure(ground(-0.0355, -0.3, 8, Boundary::Periodic));
        let grid = MomentumGrid::for_lattice(&b, 8);
        let mom = momentum_joint(&state, &b, grid).unwrap();
        let pos = position_joint(&state, &b, 16).unwrap();
        assert!((mom.raw_mass - 1.0).abs() < 1e-8, "{}", mom.raw_mass);
        assert!((pos.raw_mass - 1.0).abs() < 1e-8, "{}", pos.raw_mass);
        assert!(mom.density.iter().all(|&p| p >= 0.0));
    }

    #[test]
    fn momentum_marginal_of_product_is_fourier_transform() {
        let b = basis();
        let n = 6;
        let alpha: Vec<f64> = (0..n).map(|j| (-(j as f64 - 2.5).powi(2) / 4.0).exp()).collect();
        let beta: Vec<f64> = (0..n).map(|j| if j == 1 { 1.0 } else { 0.3 }).collect();
        let state = TwoAtomState::product(&alpha, &beta).unwrap();
        let norm_a: f64 = alpha.iter().map(|a| a * a).sum::<f64>().sqrt();
        let grid = MomentumGrid { points_per_zone: 48, half_zones: 3 };
        let joint = momentum_joint(&MixedState::pure(state), &b, grid).unwrap();
        let m1 = joint.marginal(Atom::First);
        for (i, &p) in m1.axis.iter().enumerate().step_by(7) {
            let ft: Complex64 =
                alpha.iter().enumerate().map(|(j, a)| Complex64::from_polar(a / norm_a, -p * j as f64)).sum();
            let expected = ft.norm_sqr() * b.momentum_amplitude(p).powi(2);
            assert!((m1.density[i] - expected).abs() < 1e-6, "p={p}");
        }
    }

    #[test]
    fn uniform_diagonal_state_structure() {
        let b = basis();
        let n = 10;
        let diag: Vec<f64> = (0..n * n).map(|i| if i / n == i % n { 1.0 } else { 0.0 }).collect();
        let state = MixedState::pure(TwoAtomState::from_real(n, &diag).unwrap());
        let pos = position_joint(&state, &b, 16).unwrap();
        let spacing = pos.marginal(Atom::First).peak_spacing(0.1).unwrap();
        assert!((spacing - 1.0).abs() < 1e-6);
        let mom = momentum_joint(&state, &b, MomentumGrid::for_lattice(&b, n)).unwrap();
        let plus = mom.sum_marginal();
        assert!((plus.peak_spacing(0.1).unwrap() - 2.0 * PI).abs() < 1e-6);
        let hwhm = plus.hwhm_central_peak(0.0, PI).unwrap();
        assert!((hwhm - PI / n as f64).abs() / (PI / n as f64) < 0.2);
    }

    #[test]
    fn ridge_orientation() {
        let b = basis();
        let state = MixedState::pure(ground(-0.0355, -1.0, 25, Boundary::Open));
        let pos = position_joint(&state, &b, 16).unwrap();
        assert!(pos.correlation(None) > 0.9);
        let mom = momentum_joint(&state, &b, MomentumGrid::for_lattice(&b, 25)).unwrap();
        assert!(mom.correlation(Some(PI)) < -0.9);
    }

    #[test]
    fn conditional_slices() {
        let b = basis();
        let state = MixedState::pure(ground(-0.0355, -1.0, 9, Boundary::Open));
        let pos = position_joint(&state, &b, 16).unwrap();
        let c1 = conditional(&pos, 4.0, Atom::First).unwrap();
        let c2 = conditional(&pos, 4.0, Atom::Second).unwrap();
        for (a, b) in c1.density.iter().zip(&c2.density) {
            assert!((a - b).abs() < 1e-10);
        }
        assert!((c1.mean() - 4.0).abs() < 0.05);
        assert!((c1.mass() - 1.0).abs() < 1e-12);
        assert!(conditional(&pos, 100.0, Atom::First).is_err());
        let binned = conditional_binned(&pos, 4.0, 0.5, Atom::First).unwrap();
        assert!((binned.mean() - 4.0).abs() < 0.05);
    }

    #[test]
    fn widths_stable_under_refinement() {
        let b = basis();
        let state = MixedState::pure(ground(-0.0355, -0.5, 8, Boundary::Open));
        let metrics = |ppc: usize, ppz: usize| {
            let pos = position_joint(&state, &b, ppc).unwrap();
            let mom = momentum_joint(&state, &b, MomentumGrid { points_per_zone: ppz, half_zones: 3 }).unwrap();
            epr_metrics(&pos, &mom).unwrap()
        };
        let coarse = metrics(16, 64);
        let fine = metrics(32, 128);
        assert!((coarse.dx_minus - fine.dx_minus).abs() / fine.dx_minus < 0.02);
        assert!((coarse.dp_plus - fine.dp_plus).abs() / fine.dp_plus < 0.02);
        assert!((coarse.s - 1.0 / (2.0 * coarse.dx_minus * coarse.dp_plus)).abs() < 1e-12);
    }

    #[test]
    fn paired_site_width_is_wannier_width() {
        let b = basis();
        let state = MixedState::pure(single_site_pair(6, 2, 2).unwrap());
        let pos = position_joint(&state, &b, 32).unwrap();
        let dx = (pos.difference_marginal().variance() / 2.0).sqrt();
        assert!((dx - b.rms_width()).abs() < 1e-6);
    }

    #[test]
    fn thermal_formulas() {
        assert!((thermal_dp_plus(6.0, 0.0).unwrap() - 1.0 / (2f64.sqrt() * 6.0)).abs() < 1e-15);
        let model = ModelParams::dimensionless(-0.09, -0.5, 25, Boundary::Open).unwrap();
        let a = model.lattice_constant;
        let mass = model.atom_mass();
        for (sigma_e, t) in [(3.0, 5e-9), (6.0, 1e-8), (8.0, 1e-7)] {
            let si = thermal_dp_plus_si(sigma_e * a, t, mass).unwrap();
            let natural = thermal_dp_plus(sigma_e, model.thermal_energy(t)).unwrap();
            assert!((si / model.momentum_unit() - natural).abs() / natural < 1e-10);
        }
        let s = s_estimate(6.0, 0.14, 0.1).unwrap();
        let via_dp = 1.0 / (2.0 * 0.14 * thermal_dp_plus(6.0, 0.1).unwrap());
        assert!((s - via_dp).abs() / s < 1e-12);
    }

    #[test]
    fn gaussian_reference() {
        let g = GaussianEpr::new(0.3, 3.0).unwrap();
        let h = 0.02;
        let mut mass = 0.0;
        let mut pmass = 0.0;
        for i in -600..=600 {
            for j in -600..=600 {
                mass += g.position_density(i as f64 * h, j as f64 * h) * h * h;
                let dp = 2.5 * h;
                pmass += g.momentum_density(i as f64 * dp, j as f64 * dp) * dp * dp;
            }
        }
        assert!((mass - 1.0).abs() < 1e-6);
        assert!((pmass - 1.0).abs() < 1e-6);
        // numerical conditional of x₂ at x₁ = 1
        let x1 = 1.0;
        let (mut m0, mut m1, mut m2) = (0.0, 0.0, 0.0);
        for j in -3000..=3000 {
            let x2 = j as f64 * 0.002;
            let p = g.position_density(x1, x2);
            m0 += p;
            m1 += p * x2;
            m2 += p * x2 * x2;
        }
        let mean = m1 / m0;
        assert!((mean - g.conditional_center(x1)).abs() < 1e-9);
        assert!(((m2 / m0 - mean * mean).sqrt() - g.conditional_width()).abs() < 1e-9);
        let product = GaussianEpr::new(1.0, 1.0).unwrap();
        assert_eq!(product.conditional_center(2.0), 0.0);
        let sharp = GaussianEpr::new(1e-6, 1.0).unwrap();
        assert!((sharp.conditional_center(2.0) - 2.0).abs() < 1e-9);
        assert!((sharp.conditional_width() - 1e-6).abs() < 1e-15);
    }
}
