//! The computations behind each subcommand.

use std::f64::consts::PI;

use nalgebra::SymmetricEigen;
use rayon::prelude::*;
use serde::Serialize;

use super::config::{ExperimentConfig, Grid, StateKind, SweepParameter};
use super::output::{num, opt, Outputs};
use crate::band_structure::{self, BlochSpectrum, HoppingEstimate, WannierBasis};
use crate::distributions::{self, Atom, EprMetrics, JointDistribution, MomentumGrid};
use crate::error::{Error, Result};
use crate::liddi::{self, LiddiField};
use crate::parameters::{self, Boundary, ModelParams};
use crate::protocol::{self, SeparationDiagnostics, SeparationSetup};
use crate::two_atom::{self, ExternalPotential, MixedState, ThermalSelection};

const POSITION_UNITS: &str = "x1_a x2_a density_per_a2";
const MOMENTUM_UNITS: &str = "p1_hbar_per_a p2_hbar_per_a density_a2_per_hbar2";
/// Matrix blocks are thinned to this many points per axis.
const MATRIX_POINTS: usize = 301;

pub fn spectral_boundary(cfg: &ExperimentConfig) -> Boundary {
    cfg.model.boundary.unwrap_or(Boundary::Periodic)
}

pub fn state_boundary(cfg: &ExperimentConfig) -> Boundary {
    cfg.model.boundary.unwrap_or(Boundary::Open)
}

/// Model from the physical inputs, with any hopping or interaction override applied.
pub fn model(cfg: &ExperimentConfig, boundary: Boundary) -> Result<ModelParams> {
    let mut m = parameters::to_model(&cfg.physical(), cfg.model.site_count, boundary)?;
    if let Some(hop) = cfg.model.hop_erec {
        m.hop = hop;
        m.hop_valid = true;
    }
    if let Some(vdd) = cfg.model.vdd_erec {
        m.vdd = vdd;
    }
    m.validate()?;
    Ok(m)
}

pub fn params(cfg: &ExperimentConfig, out: &mut Outputs) -> Result<()> {
    let report = parameters::report(&cfg.physical(), cfg.model.site_count, spectral_boundary(cfg))?;
    let m = model(cfg, spectral_boundary(cfg))?;
    #[derive(Serialize)]
    struct Params {
        #[serde(flatten)]
        report: parameters::ParameterReport,
        model_hop_erec: f64,
        model_vdd_erec: f64,
        model_diatom_hop_erec: Option<f64>,
        cooling: Option<protocol::CoolingRequirements>,
    }
    let diatom = two_atom::diatom_hopping(m.hop, m.vdd).ok();
    out.json(
        "params.json",
        &Params {
            report,
            model_hop_erec: m.hop,
            model_vdd_erec: m.vdd,
            model_diatom_hop_erec: diatom,
            cooling: diatom.and_then(|_| protocol::cooling_requirements(&m, cfg.protocol.sigma_e_sites).ok()),
        },
    )
}

pub fn bands(cfg: &ExperimentConfig, out: &mut Outputs) -> Result<()> {
    let m = model(cfg, spectral_boundary(cfg))?;
    let depth = m.lattice_depth;
    let npw = cfg.model.planewaves;
    let spectrum = BlochSpectrum::compute(depth, npw, cfg.model.kpoints)?;
    let n = cfg.output.band_points;
    let rows: Vec<Vec<String>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let k = -PI + 2.0 * PI * i as f64 / (n - 1) as f64;
            let eig = SymmetricEigen::new(band_structure::plane_wave_hamiltonian(depth, k, npw));
            let mut e: Vec<f64> = eig.eigenvalues.iter().copied().collect();
            e.sort_by(f64::total_cmp);
            vec![num(k), num(e[0]), num(e[1]), num(e[2])]
        })
        .collect();
    out.csv("bands.csv", &["k_per_a", "band0_erec", "band1_erec", "band2_erec"], &rows)?;
    let basis = WannierBasis::new(&spectrum, cfg.output.points_per_cell.max(64))?;
    let rows: Vec<Vec<String>> =
        basis.sample(cfg.output.points_per_cell, 4.0).into_iter().map(|(x, w)| vec![num(x), num(w)]).collect();
    out.csv("wannier.csv", &["x_a", "wannier_per_sqrt_a"], &rows)?;
    let hopping = band_structure::hopping_exact(&spectrum);
    let gauss = basis.gaussian_approx()?;
    #[derive(Serialize)]
    struct Summary {
        lattice_depth_erec: f64,
        hop_erec: f64,
        hop_approx_erec: f64,
        beyond_nearest_erec: f64,
        bandwidth_erec: f64,
        center_energy_erec: f64,
        hop_valid: bool,
        effective_mass_bandwidth: f64,
        effective_mass_curvature: f64,
        bare_mass: f64,
        wannier_rms_width_a: f64,
        gaussian_width_a: f64,
        gaussian_fidelity: f64,
        gaussian_hop_erec: f64,
    }
    let HoppingEstimate { hop, center_energy, bandwidth, beyond_nearest, valid } = hopping;
    out.json(
        "bands.json",
        &Summary {
            lattice_depth_erec: depth,
            hop_erec: hop,
            hop_approx_erec: -band_structure::hopping_approx(depth),
            beyond_nearest_erec: beyond_nearest,
            bandwidth_erec: bandwidth,
            center_energy_erec: center_energy,
            hop_valid: valid,
            effective_mass_bandwidth: band_structure::effective_mass(bandwidth)?,
            effective_mass_curvature: band_structure::curvature_mass(depth, npw),
            bare_mass: parameters::BARE_MASS,
            wannier_rms_width_a: basis.rms_width(),
            gaussian_width_a: gauss.sigma,
            gaussian_fidelity: gauss.fidelity,
            gaussian_hop_erec: band_structure::gaussian_hopping(depth)?,
        },
    )
}

pub fn liddi_scan(cfg: &ExperimentConfig, out: &mut Outputs) -> Result<()> {
    let phys = cfg.physical();
    let field = LiddiField::from_physical(&phys)?;
    let a = phys.lattice_constant();
    let e_rec = parameters::recoil_energy(phys.atom_mass, phys.lambda_lattice)?;
    let map = liddi::vdd_map(&field, phys.lattice_shift, a, cfg.output.liddi_range_sites)?;
    let rows: Vec<Vec<String>> = map
        .iter()
        .map(|&(j, v)| {
            let r = (phys.lattice_shift.powi(2) + (j as f64 * a).powi(2)).sqrt();
            vec![j.to_string(), num(r * 1e9), num(v), num(v / e_rec)]
        })
        .collect();
    out.csv("liddi.csv", &["j", "distance_nm", "v_j", "v_erec"], &rows)?;
    let nearest = liddi::vdd_nearest(field.coupling_strength, phys.lambda_coupling, phys.lattice_shift)?;
    #[derive(Serialize)]
    struct Summary {
        vdd_nearest_erec: f64,
        vdd_nearest_valid: bool,
        vdd_full_erec: f64,
        truncation_error: f64,
    }
    let full = map.iter().find(|(j, _)| *j == 0).map(|(_, v)| *v).unwrap_or(f64::NAN);
    out.json(
        "liddi.json",
        &Summary {
            vdd_nearest_erec: nearest.value / e_rec,
            vdd_nearest_valid: nearest.valid,
            vdd_full_erec: full / e_rec,
            truncation_error: liddi::truncation_error(&field, phys.lattice_shift, a, cfg.output.liddi_range_sites)?,
        },
    )
}

/// Apply one sweep value to a copy of the configuration.
pub fn apply(cfg: &ExperimentConfig, parameter: SweepParameter, value: f64) -> Result<ExperimentConfig> {
    let mut c = cfg.clone();
    match parameter {
        SweepParameter::Vdd => c.model.vdd_erec = Some(0.0 - value.abs()),
        SweepParameter::Vhop => c.model.hop_erec = Some(0.0 - value.abs()),
        SweepParameter::U0 => {
            let spectrum = BlochSpectrum::compute(value, c.model.planewaves, c.model.kpoints)?;
            c.model.hop_erec = Some(band_structure::hopping_exact(&spectrum).hop);
        }
        SweepParameter::T => c.protocol.temperature_k = value * 1e-9,
        SweepParameter::SigmaE => c.protocol.sigma_e_sites = value,
        SweepParameter::L => {
            c.coupling.lattice_shift_nm = value;
            c.model.vdd_erec = None;
        }
        SweepParameter::Slope => c.protocol.slope_erec_per_site = value,
    }
    c.validate().map_err(|e| Error::Config(e.to_string()))?;
    Ok(c)
}

pub fn spectrum(cfg: &ExperimentConfig, parameter: SweepParameter, grid: Grid, out: &mut Outputs) -> Result<()> {
    if !matches!(parameter, SweepParameter::Vdd | SweepParameter::Vhop | SweepParameter::U0 | SweepParameter::L) {
        return Err(Error::Config(format!(
            "spectrum needs a Hamiltonian parameter (vdd, vhop, U0, l), got {parameter}"
        )));
    }
    let values = grid.values();
    let per_point: Vec<Result<Vec<f64>>> = values
        .par_iter()
        .map(|&v| {
            let c = apply(cfg, parameter, v)?;
            let m = model(&c, spectral_boundary(&c))?;
            let h = two_atom::build(&m, &ExternalPotential::None)?;
            Ok(two_atom::diagonalize(&h)?.eigenvalues)
        })
        .collect();
    let mut rows = Vec::new();
    for (v, energies) in values.iter().zip(per_point) {
        for (i, e) in energies?.iter().enumerate() {
            rows.push(vec![num(*v), i.to_string(), num(*e)]);
        }
    }
    out.csv("spectrum.csv", &[parameter.column(), "index", "energy_erec"], &rows)
}

/// Two-atom state handed to the measurement stage.
pub fn measured_state(cfg: &ExperimentConfig, m: &ModelParams) -> Result<MixedState> {
    let kt = m.thermal_energy(cfg.protocol.temperature_k);
    match cfg.measurement.state {
        StateKind::Prepared => {
            protocol::thermal_diatom_state(m.site_count, cfg.center(), cfg.protocol.sigma_e_sites, kt)
        }
        StateKind::Thermal | StateKind::Ground => {
            let spectrum = two_atom::diagonalize(&two_atom::build(m, &ExternalPotential::None)?)?;
            if cfg.measurement.state == StateKind::Ground {
                Ok(MixedState::pure(two_atom::diatom_ground_state(&spectrum)))
            } else {
                two_atom::thermal_state(&spectrum, kt, ThermalSelection::DiatomBand)
            }
        }
    }
}

/// Wannier functions of the measurement lattice on a supercell wide enough
/// for the position grid.
pub fn measurement_basis(cfg: &ExperimentConfig) -> Result<WannierBasis> {
    let reach = 2 * (cfg.model.site_count + 8);
    let n_k = cfg.model.kpoints.max(reach + reach % 2);
    let spectrum = BlochSpectrum::compute(cfg.measurement.lattice_depth_erec, cfg.model.planewaves, n_k)?;
    WannierBasis::new(&spectrum, cfg.output.points_per_cell.max(64))
}

pub struct Measurement {
    pub model: ModelParams,
    pub position: JointDistribution,
    pub momentum: JointDistribution,
    pub metrics: EprMetrics,
    pub s_estimate: Option<f64>,
}

pub fn measure(cfg: &ExperimentConfig) -> Result<Measurement> {
    let m = model(cfg, state_boundary(cfg))?;
    let state = measured_state(cfg, &m)?;
    let basis = measurement_basis(cfg)?;
    let position = distributions::position_joint(&state, &basis, cfg.output.points_per_cell)?;
    let momentum = distributions::momentum_joint(&state, &basis, MomentumGrid::for_lattice(&basis, m.site_count))?;
    let metrics = distributions::epr_metrics(&position, &momentum)?;
    let sigma = band_structure::gaussian_width(cfg.measurement.lattice_depth_erec)?;
    let kt = m.thermal_energy(cfg.protocol.temperature_k);
    let s_estimate = distributions::s_estimate(cfg.protocol.sigma_e_sites, sigma, kt).ok();
    Ok(Measurement { model: m, position, momentum, metrics, s_estimate })
}

pub fn dist(cfg: &ExperimentConfig, out: &mut Outputs) -> Result<()> {
    let r = measure(cfg)?;
    out.matrix("position_joint.dat", POSITION_UNITS, &r.position, None, MATRIX_POINTS)?;
    out.matrix("momentum_joint.dat", MOMENTUM_UNITS, &r.momentum, Some((-2.0 * PI, 2.0 * PI)), MATRIX_POINTS)?;
    out.distribution("position_marginal.csv", &["x_a", "density_per_a"], &r.position.marginal(Atom::First))?;
    out.distribution(
        "position_difference.csv",
        &["x1_minus_x2_a", "density_per_a"],
        &r.position.difference_marginal(),
    )?;
    out.distribution(
        "momentum_marginal.csv",
        &["p_hbar_per_a", "density_a_per_hbar"],
        &r.momentum.marginal(Atom::First),
    )?;
    out.distribution("momentum_sum.csv", &["p1_plus_p2_hbar_per_a", "density_a_per_hbar"], &r.momentum.sum_marginal())?;
    let x1 = cfg.measurement.condition_x_a.unwrap_or(cfg.center());
    let p1 = cfg.measurement.condition_p_hbar_per_a;
    out.distribution(
        "position_conditional.csv",
        &["x2_a", "density_per_a"],
        &distributions::conditional(&r.position, x1, Atom::First)?,
    )?;
    out.distribution(
        "momentum_conditional.csv",
        &["p2_hbar_per_a", "density_a_per_hbar"],
        &distributions::conditional(&r.momentum, p1, Atom::First)?,
    )?;
    #[derive(Serialize)]
    struct Summary {
        #[serde(flatten)]
        metrics: EprMetrics,
        s_estimate: Option<f64>,
        position_raw_mass: f64,
        momentum_raw_mass: f64,
        position_correlation: f64,
        momentum_correlation_zone: f64,
        condition_x_a: f64,
        condition_p_hbar_per_a: f64,
        hop_erec: f64,
        vdd_erec: f64,
        boundary: Boundary,
    }
    out.json(
        "metrics.json",
        &Summary {
            metrics: r.metrics,
            s_estimate: r.s_estimate,
            position_raw_mass: r.position.raw_mass,
            momentum_raw_mass: r.momentum.raw_mass,
            position_correlation: r.position.correlation(None),
            momentum_correlation_zone: r.momentum.correlation(Some(PI)),
            condition_x_a: x1,
            condition_p_hbar_per_a: p1,
            hop_erec: r.model.hop,
            vdd_erec: r.model.vdd,
            boundary: r.model.boundary,
        },
    )
}

/// Default ejection line: half the single-atom Bloch excursion `4|V_hop|/F`
/// downhill of the trap centre.
pub fn ejection_line(cfg: &ExperimentConfig, m: &ModelParams) -> Option<f64> {
    let slope = cfg.protocol.slope_erec_per_site;
    cfg.protocol
        .ejection_line_site
        .or_else(|| (slope != 0.0).then(|| cfg.center() - slope.signum() * 2.0 * m.hop.abs() / slope.abs()))
}

/// Whether a centroid lies past the ejection line in the downhill direction.
fn beyond(centroid: Option<f64>, line: Option<f64>, slope: f64) -> Option<bool> {
    let (c, l) = (centroid?, line?);
    Some(if slope >= 0.0 { c <= l } else { c >= l })
}

#[derive(Debug, Serialize)]
pub struct ProtocolSummary {
    pub initial_tail_mass: f64,
    pub initial_truncated: bool,
    pub initial_diagonal_weight: f64,
    pub ejection_line_site: Option<f64>,
    pub final_time_s: Option<f64>,
    pub retained_mass: Option<f64>,
    pub retained_fidelity_to_ideal: Option<f64>,
    /// `(Σ |c_{jl}| |c^ideal_{jl}|)²`, insensitive to the phase the slope imprints.
    pub retained_profile_overlap: Option<f64>,
    pub cooling: Option<protocol::CoolingRequirements>,
    pub postselection_error: Option<String>,
}

pub struct ProtocolResult {
    pub model: ModelParams,
    pub times_s: Vec<f64>,
    pub diagnostics: Vec<SeparationDiagnostics>,
    pub states: Vec<crate::two_atom::TwoAtomState>,
    pub summary: ProtocolSummary,
}

pub fn run_protocol(cfg: &ExperimentConfig) -> Result<ProtocolResult> {
    let m = model(cfg, state_boundary(cfg))?;
    let center = cfg.center();
    let setup = SeparationSetup {
        sigma_e: cfg.protocol.sigma_e_sites,
        center,
        slope: cfg.protocol.slope_erec_per_site,
        times: cfg.protocol.times_s.iter().map(|&t| m.time_from_seconds(t)).collect(),
        pair_band: cfg.protocol.pair_band,
    };
    let run = protocol::run_separation(&m, &setup)?;
    let line = ejection_line(cfg, &m);
    let n = m.site_count;
    let region = match line {
        Some(l) if cfg.protocol.slope_erec_per_site > 0.0 => l..(n - 1) as f64,
        Some(l) => 0.0..l,
        None => 0.0..(n - 1) as f64,
    };
    let (alpha, _) = protocol::envelope(cfg.protocol.sigma_e_sites, center, n)?;
    let ideal: Vec<f64> = (0..n * n).map(|k| if k / n == k % n { alpha[k / n].powi(2) } else { 0.0 }).collect();
    let ideal = crate::two_atom::TwoAtomState::from_real(n, &ideal)?;
    let last = run.trace.states.last();
    let selected = last.map(|s| protocol::postselect_diatoms(s, region, cfg.protocol.pair_band));
    let profile = |s: &crate::two_atom::TwoAtomState| {
        s.amplitudes.iter().zip(&ideal.amplitudes).map(|(a, b)| a.norm() * b.norm()).sum::<f64>().powi(2)
    };
    let (retained_mass, retained_fidelity_to_ideal, retained_profile_overlap, postselection_error) = match selected {
        Some(Ok((state, mass))) => (Some(mass), Some(state.fidelity(&ideal)), Some(profile(&state)), None),
        Some(Err(e)) => (None, None, None, Some(e.to_string())),
        None => (None, None, None, None),
    };
    let summary = ProtocolSummary {
        initial_tail_mass: run.initial.tail_mass,
        initial_truncated: run.initial.truncated(),
        initial_diagonal_weight: run.initial.state.diagonal_weight(),
        ejection_line_site: line,
        final_time_s: cfg.protocol.times_s.last().copied(),
        retained_mass,
        retained_fidelity_to_ideal,
        retained_profile_overlap,
        cooling: protocol::cooling_requirements(&m, cfg.protocol.sigma_e_sites).ok(),
        postselection_error,
    };
    Ok(ProtocolResult {
        model: m,
        times_s: cfg.protocol.times_s.clone(),
        diagnostics: run.trace.diagnostics,
        states: run.trace.states,
        summary,
    })
}

pub fn protocol_cmd(cfg: &ExperimentConfig, out: &mut Outputs) -> Result<()> {
    let r = run_protocol(cfg)?;
    let n = r.model.site_count;
    let line = r.summary.ejection_line_site;
    let slope = cfg.protocol.slope_erec_per_site;
    let rows: Vec<Vec<String>> = r
        .times_s
        .iter()
        .zip(&r.diagnostics)
        .map(|(t, d)| {
            vec![
                num(*t),
                num(d.norm),
                num(d.diagonal_weight),
                num(d.pair_weight),
                opt(d.diatom_centroid),
                opt(d.single_centroid),
                opt(d.displacement_ratio),
                beyond(d.single_centroid, line, slope).map(|b| b.to_string()).unwrap_or_default(),
            ]
        })
        .collect();
    out.csv(
        "diagnostics.csv",
        &[
            "time_s",
            "norm",
            "diagonal_weight",
            "pair_weight",
            "diatom_centroid_a",
            "single_centroid_a",
            "displacement_ratio",
            "single_beyond_ejection",
        ],
        &rows,
    )?;
    for (i, s) in r.states.iter().enumerate() {
        out.site_matrix(&format!("snapshot_{i}.dat"), "j l probability", n, |j, l| s.amplitude(j, l).norm_sqr())?;
    }
    out.json("protocol.json", &r.summary)
}

#[derive(Clone, Debug, Default)]
pub struct SweepRow {
    pub value: f64,
    pub hop: Option<f64>,
    pub vdd: Option<f64>,
    pub bound_states: Option<usize>,
    pub band_edges: Option<(f64, f64)>,
    pub continuum_min: Option<f64>,
    pub metrics: Option<EprMetrics>,
    pub s_estimate: Option<f64>,
    pub displacement_ratio: Option<f64>,
    pub retained_mass: Option<f64>,
    pub error: Option<String>,
}

pub const SWEEP_HEADER: [&str; 14] = [
    "hop_erec",
    "vdd_erec",
    "bound_states",
    "band_low_erec",
    "band_high_erec",
    "continuum_min_erec",
    "dx_minus_a",
    "dp_plus_hbar_per_a",
    "s",
    "s_estimate",
    "displacement_ratio",
    "retained_mass",
    "dx_minus_hwhm_a",
    "error",
];

impl SweepRow {
    pub fn record(&self) -> Vec<String> {
        vec![
            num(self.value),
            opt(self.hop),
            opt(self.vdd),
            self.bound_states.map(|b| b.to_string()).unwrap_or_default(),
            opt(self.band_edges.map(|e| e.0)),
            opt(self.band_edges.map(|e| e.1)),
            opt(self.continuum_min),
            opt(self.metrics.map(|m| m.dx_minus)),
            opt(self.metrics.map(|m| m.dp_plus)),
            opt(self.metrics.map(|m| m.s)),
            opt(self.s_estimate),
            opt(self.displacement_ratio),
            opt(self.retained_mass),
            opt(self.metrics.map(|m| m.dx_minus_hwhm)),
            self.error.clone().unwrap_or_default(),
        ]
    }
}

fn sweep_point(cfg: &ExperimentConfig, parameter: SweepParameter, value: f64) -> SweepRow {
    let mut row = SweepRow { value, ..Default::default() };
    if let Err(e) = fill_row(cfg, parameter, value, &mut row) {
        row.error = Some(e.to_string());
    }
    row
}

fn fill_row(cfg: &ExperimentConfig, parameter: SweepParameter, value: f64, row: &mut SweepRow) -> Result<()> {
    let c = apply(cfg, parameter, value)?;
    let m = model(&c, spectral_boundary(&c))?;
    row.hop = Some(m.hop);
    row.vdd = Some(m.vdd);
    let spectrum = two_atom::diagonalize(&two_atom::build(&m, &ExternalPotential::None)?)?;
    row.bound_states = Some(spectrum.diatom_count());
    row.band_edges = spectrum.diatom_edges();
    row.continuum_min = Some(spectrum.free_pair_minimum);
    if parameter == SweepParameter::Slope {
        let p = run_protocol(&c)?;
        row.displacement_ratio = p.diagnostics.last().and_then(|d| d.displacement_ratio);
        row.retained_mass = p.summary.retained_mass;
    }
    let measured = measure(&c)?;
    row.metrics = Some(measured.metrics);
    row.s_estimate = measured.s_estimate;
    Ok(())
}

/// One row per grid value, in grid order.
pub fn sweep(cfg: &ExperimentConfig, parameter: SweepParameter, grid: Grid) -> Vec<SweepRow> {
    grid.values().par_iter().map(|&v| sweep_point(cfg, parameter, v)).collect()
}

pub fn sweep_cmd(cfg: &ExperimentConfig, parameter: SweepParameter, grid: Grid, out: &mut Outputs) -> Result<()> {
    let rows: Vec<Vec<String>> = sweep(cfg, parameter, grid).iter().map(SweepRow::record).collect();
    let mut header = vec![parameter.column()];
    header.extend(SWEEP_HEADER);
    out.csv(&format!("sweep_{parameter}.csv"), &header, &rows)
}
