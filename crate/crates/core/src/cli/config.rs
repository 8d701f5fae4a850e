//! Experiment configuration file. Every key carries its unit in the name;
//! missing keys take the lithium defaults and unknown keys are rejected.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::parameters::{Boundary, PhysicalParams, AMU, C_LIGHT};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub atom: AtomSection,
    pub lattice: LatticeSection,
    pub coupling: CouplingSection,
    pub model: ModelSection,
    pub measurement: MeasurementSection,
    pub protocol: ProtocolSection,
    pub output: OutputSection,
    pub sweep: SweepSection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AtomSection {
    pub mass_u: f64,
}

impl Default for AtomSection {
    fn default() -> Self {
        AtomSection { mass_u: 7.016003 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LatticeSection {
    pub lambda_lattice_nm: f64,
    pub intensity_lattice_w_per_cm2: f64,
    pub dipole_lattice_cm: f64,
    pub detuning_lattice_rad_per_s: f64,
}

impl Default for LatticeSection {
    fn default() -> Self {
        LatticeSection {
            lambda_lattice_nm: 323.0,
            intensity_lattice_w_per_cm2: 0.186,
            dipole_lattice_cm: 1.26e-30,
            detuning_lattice_rad_per_s: 6.0e7,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CouplingSection {
    pub lambda_coupling_nm: f64,
    pub intensity_coupling_w_per_cm2: f64,
    pub dipole_coupling_cm: f64,
    pub detuning_coupling_rad_per_s: f64,
    pub lattice_shift_nm: f64,
}

impl Default for CouplingSection {
    fn default() -> Self {
        CouplingSection {
            lambda_coupling_nm: 670.8,
            intensity_coupling_w_per_cm2: 0.023,
            dipole_coupling_cm: 2.7e-29,
            detuning_coupling_rad_per_s: 3.7e9,
            lattice_shift_nm: 40.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSection {
    pub site_count: usize,
    /// Unset: periodic for spectra, open for distributions and the protocol.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub boundary: Option<Boundary>,
    /// Overrides the hopping derived from the lattice.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hop_erec: Option<f64>,
    /// Overrides the interaction derived from the coupling laser.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub vdd_erec: Option<f64>,
    pub planewaves: usize,
    pub kpoints: usize,
}

impl Default for ModelSection {
    fn default() -> Self {
        ModelSection {
            site_count: 25,
            boundary: None,
            hop_erec: None,
            vdd_erec: None,
            planewaves: crate::parameters::DEFAULT_PLANEWAVES,
            kpoints: crate::parameters::DEFAULT_KPOINTS,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StateKind {
    /// Pairs left after cooling in the trap and post-selecting `j = l`.
    Prepared,
    /// Boltzmann mixture over the bound band.
    Thermal,
    /// Lowest two-atom eigenstate.
    Ground,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MeasurementSection {
    pub state: StateKind,
    /// Lattice depth when the atoms are imaged; sets the Wannier functions.
    pub lattice_depth_erec: f64,
    /// Measured position of atom 1; defaults to the lattice centre.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub condition_x_a: Option<f64>,
    pub condition_p_hbar_per_a: f64,
}

impl Default for MeasurementSection {
    fn default() -> Self {
        MeasurementSection {
            state: StateKind::Prepared,
            lattice_depth_erec: 13.4,
            condition_x_a: None,
            condition_p_hbar_per_a: 0.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProtocolSection {
    pub sigma_e_sites: f64,
    /// Trap centre; defaults to the lattice centre.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub center_site: Option<f64>,
    pub slope_erec_per_site: f64,
    pub times_s: Vec<f64>,
    pub temperature_k: f64,
    pub pair_band: usize,
    /// Site coordinate past which an unpaired atom counts as ejected;
    /// defaults to half the single-atom Bloch excursion downhill of the centre.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ejection_line_site: Option<f64>,
}

impl Default for ProtocolSection {
    fn default() -> Self {
        ProtocolSection {
            sigma_e_sites: 5.0,
            center_site: None,
            slope_erec_per_site: 0.04,
            times_s: vec![0.0, 1.4e-4, 2.16e-4],
            temperature_k: 1e-8,
            pair_band: crate::protocol::DEFAULT_PAIR_BAND,
            ejection_line_site: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub directory: String,
    pub points_per_cell: usize,
    pub band_points: usize,
    pub liddi_range_sites: i64,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection { directory: "out".into(), points_per_cell: 32, band_points: 201, liddi_range_sites: 10 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SweepParameter {
    /// `|V_dd|` in `E_rec`, applied as an attraction.
    #[serde(rename = "vdd")]
    Vdd,
    /// `|V_hop|` in `E_rec`.
    #[serde(rename = "vhop")]
    Vhop,
    /// Lattice depth in `E_rec`; the hopping follows from the bands.
    #[serde(rename = "U0")]
    U0,
    /// Temperature in nK.
    #[serde(rename = "T")]
    T,
    /// Trap ground-state width in sites.
    #[serde(rename = "sigma_E")]
    SigmaE,
    /// Lattice shift in nm.
    #[serde(rename = "l")]
    L,
    /// Linear potential in `E_rec` per site.
    #[serde(rename = "slope")]
    Slope,
}

impl SweepParameter {
    pub const ALL: [SweepParameter; 7] = [
        SweepParameter::Vdd,
        SweepParameter::Vhop,
        SweepParameter::U0,
        SweepParameter::T,
        SweepParameter::SigmaE,
        SweepParameter::L,
        SweepParameter::Slope,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SweepParameter::Vdd => "vdd",
            SweepParameter::Vhop => "vhop",
            SweepParameter::U0 => "U0",
            SweepParameter::T => "T",
            SweepParameter::SigmaE => "sigma_E",
            SweepParameter::L => "l",
            SweepParameter::Slope => "slope",
        }
    }

    /// Column header including the unit.
    pub fn column(self) -> &'static str {
        match self {
            SweepParameter::Vdd => "abs_vdd_erec",
            SweepParameter::Vhop => "abs_vhop_erec",
            SweepParameter::U0 => "u0_erec",
            SweepParameter::T => "temperature_nk",
            SweepParameter::SigmaE => "sigma_e_a",
            SweepParameter::L => "lattice_shift_nm",
            SweepParameter::Slope => "slope_erec_per_site",
        }
    }
}

impl fmt::Display for SweepParameter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SweepParameter {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        SweepParameter::ALL
            .into_iter()
            .find(|p| p.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown sweep parameter '{s}' (expected vdd, vhop, U0, T, sigma_E, l or slope)"))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub parameter: Option<SweepParameter>,
    pub start: f64,
    pub stop: f64,
    pub steps: usize,
}

impl Default for SweepSection {
    fn default() -> Self {
        SweepSection { parameter: None, start: 0.0, stop: 2.5, steps: 50 }
    }
}

/// `steps` evenly spaced values from `start` to `stop` inclusive.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid {
    pub start: f64,
    pub stop: f64,
    pub steps: usize,
}

impl Grid {
    pub fn values(&self) -> Vec<f64> {
        match self.steps {
            0 => Vec::new(),
            1 => vec![self.start],
            n => (0..n).map(|i| self.start + (self.stop - self.start) * i as f64 / (n - 1) as f64).collect(),
        }
    }
}

impl FromStr for Grid {
    type Err = String;

    /// `start:stop:steps`
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 3 {
            return Err(format!("grid '{s}' must have the form start:stop:steps"));
        }
        let num = |t: &str| t.trim().parse::<f64>().map_err(|e| format!("bad grid bound '{t}': {e}"));
        let start = num(parts[0])?;
        let stop = num(parts[1])?;
        let steps = parts[2].trim().parse::<usize>().map_err(|e| format!("bad step count '{}': {e}", parts[2]))?;
        if !(start.is_finite() && stop.is_finite()) {
            return Err(format!("grid bounds in '{s}' must be finite"));
        }
        Ok(Grid { start, stop, steps })
    }
}

/// A configuration error, optionally tied to a `section.key`.
#[derive(Clone, Debug, PartialEq)]
pub struct ConfigError {
    pub key: Option<String>,
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (&self.line, &self.key) {
            (Some(line), Some(key)) => write!(f, "line {line}: {key}: {}", self.message),
            (Some(line), None) => write!(f, "line {line}: {}", self.message),
            (None, Some(key)) => write!(f, "{key}: {}", self.message),
            (None, None) => f.write_str(&self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

fn invalid(key: &str, message: impl Into<String>) -> ConfigError {
    ConfigError { key: Some(key.into()), line: None, message: message.into() }
}

impl ExperimentConfig {
    /// Parse and validate. Errors carry the offending line when it can be found.
    pub fn parse(source: &str) -> Result<Self, ConfigError> {
        let config: ExperimentConfig = toml::from_str(source).map_err(|e| {
            let line = e.span().map(|span| source[..span.start.min(source.len())].matches('\n').count() + 1);
            ConfigError { key: None, line, message: e.message().to_string() }
        })?;
        config.validate().map_err(|mut e| {
            if let Some(key) = &e.key {
                e.line = locate(source, key);
            }
            e
        })?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let source = std::fs::read_to_string(path).map_err(|e| ConfigError {
            key: None,
            line: None,
            message: format!("cannot read {}: {e}", path.display()),
        })?;
        Self::parse(&source).map_err(|e| ConfigError { message: format!("{}: {}", path.display(), e.message), ..e })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let positive = [
            ("atom.mass_u", self.atom.mass_u),
            ("lattice.lambda_lattice_nm", self.lattice.lambda_lattice_nm),
            ("lattice.dipole_lattice_cm", self.lattice.dipole_lattice_cm),
            ("lattice.detuning_lattice_rad_per_s", self.lattice.detuning_lattice_rad_per_s),
            ("coupling.lambda_coupling_nm", self.coupling.lambda_coupling_nm),
            ("coupling.intensity_coupling_w_per_cm2", self.coupling.intensity_coupling_w_per_cm2),
            ("coupling.dipole_coupling_cm", self.coupling.dipole_coupling_cm),
            ("coupling.detuning_coupling_rad_per_s", self.coupling.detuning_coupling_rad_per_s),
            ("coupling.lattice_shift_nm", self.coupling.lattice_shift_nm),
            ("measurement.lattice_depth_erec", self.measurement.lattice_depth_erec),
            ("protocol.sigma_e_sites", self.protocol.sigma_e_sites),
        ];
        for (key, value) in positive {
            if !(value > 0.0 && value.is_finite()) {
                return Err(invalid(key, format!("must be positive and finite, got {value}")));
            }
        }
        let non_negative = [
            ("lattice.intensity_lattice_w_per_cm2", self.lattice.intensity_lattice_w_per_cm2),
            ("protocol.temperature_k", self.protocol.temperature_k),
        ];
        for (key, value) in non_negative {
            if !(value >= 0.0 && value.is_finite()) {
                return Err(invalid(key, format!("must be >= 0 and finite, got {value}")));
            }
        }
        if self.coupling.lattice_shift_nm >= self.lattice.lambda_lattice_nm / 2.0 {
            return Err(invalid("coupling.lattice_shift_nm", "must be smaller than the lattice constant"));
        }
        if self.coupling.detuning_coupling_rad_per_s >= self.transition_frequency() {
            return Err(invalid("coupling.detuning_coupling_rad_per_s", "must be below the transition frequency"));
        }
        if self.model.site_count < 3 {
            return Err(invalid("model.site_count", format!("must be >= 3, got {}", self.model.site_count)));
        }
        if self.model.planewaves < 21 || self.model.planewaves.is_multiple_of(2) {
            return Err(invalid("model.planewaves", "must be odd and >= 21"));
        }
        if self.model.kpoints < 8 || self.model.kpoints % 2 == 1 {
            return Err(invalid("model.kpoints", "must be even and >= 8"));
        }
        for (key, value) in [("model.hop_erec", self.model.hop_erec), ("model.vdd_erec", self.model.vdd_erec)] {
            if let Some(v) = value {
                if !v.is_finite() {
                    return Err(invalid(key, "must be finite"));
                }
            }
        }
        let n = self.model.site_count as f64;
        for (key, value) in [
            ("protocol.center_site", self.protocol.center_site),
            ("measurement.condition_x_a", self.measurement.condition_x_a),
            ("protocol.ejection_line_site", self.protocol.ejection_line_site),
        ] {
            if let Some(v) = value {
                if !(v.is_finite() && (-1.0..=n).contains(&v)) {
                    return Err(invalid(key, format!("must lie on the lattice, got {v}")));
                }
            }
        }
        if !self.measurement.condition_p_hbar_per_a.is_finite() {
            return Err(invalid("measurement.condition_p_hbar_per_a", "must be finite"));
        }
        if !self.protocol.slope_erec_per_site.is_finite() {
            return Err(invalid("protocol.slope_erec_per_site", "must be finite"));
        }
        let times = &self.protocol.times_s;
        if times.iter().any(|t| !(t.is_finite() && *t >= 0.0)) || times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(invalid("protocol.times_s", "must be non-negative and strictly increasing"));
        }
        if self.output.points_per_cell < crate::distributions::MIN_POINTS_PER_CELL {
            return Err(invalid(
                "output.points_per_cell",
                format!("must be >= {}", crate::distributions::MIN_POINTS_PER_CELL),
            ));
        }
        if self.output.band_points < 2 {
            return Err(invalid("output.band_points", "must be >= 2"));
        }
        if self.output.liddi_range_sites < 0 {
            return Err(invalid("output.liddi_range_sites", "must be >= 0"));
        }
        if !(self.sweep.start.is_finite() && self.sweep.stop.is_finite()) {
            return Err(invalid("sweep.start", "sweep bounds must be finite"));
        }
        Ok(())
    }

    fn transition_frequency(&self) -> f64 {
        2.0 * std::f64::consts::PI * C_LIGHT / (self.coupling.lambda_coupling_nm * 1e-9)
    }

    pub fn physical(&self) -> PhysicalParams {
        PhysicalParams {
            atom_mass: self.atom.mass_u * AMU,
            lambda_lattice: self.lattice.lambda_lattice_nm * 1e-9,
            lambda_coupling: self.coupling.lambda_coupling_nm * 1e-9,
            intensity_lattice: self.lattice.intensity_lattice_w_per_cm2 * 1e4,
            intensity_coupling: self.coupling.intensity_coupling_w_per_cm2 * 1e4,
            dipole_lattice: self.lattice.dipole_lattice_cm,
            dipole_coupling: self.coupling.dipole_coupling_cm,
            detuning_lattice: self.lattice.detuning_lattice_rad_per_s,
            detuning_coupling: self.coupling.detuning_coupling_rad_per_s,
            transition_freq_coupling: self.transition_frequency(),
            lattice_shift: self.coupling.lattice_shift_nm * 1e-9,
        }
    }

    pub fn center(&self) -> f64 {
        self.protocol.center_site.unwrap_or((self.model.site_count as f64 - 1.0) / 2.0)
    }

    pub fn sweep_grid(&self) -> Grid {
        Grid { start: self.sweep.start, stop: self.sweep.stop, steps: self.sweep.steps }
    }
}

/// Line of `key = ...` inside `[section]`, 1-based.
fn locate(source: &str, dotted: &str) -> Option<usize> {
    let (section, key) = dotted.split_once('.')?;
    let mut current = "";
    for (i, line) in source.lines().enumerate() {
        let t = line.trim();
        if let Some(name) = t.strip_prefix('[').and_then(|r| r.strip_suffix(']')) {
            current = name.trim();
        } else if current == section {
            if let Some((k, _)) = t.split_once('=') {
                if k.trim() == key {
                    return Some(i + 1);
                }
            }
        }
    }
    None
}
