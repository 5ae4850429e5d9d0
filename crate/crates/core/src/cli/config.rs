//! Run configuration: a TOML document with `model`, `geometry`, `run`,
//! `scan` and `output` sections. Quantities are numbers in natural units
//! (GeV powers) or strings with a unit suffix such as `"1e-5 cm"`.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::correlators::{NoiseModel, SpectralShape, SpectralTable};
use crate::dynamics::Sampler;
use crate::error::{Error, Result};
use crate::observables::ParticleSpecies;
use crate::phenomenology::{chemical_factor, dm_temperature, MASSES_KEV, VELOCITIES_KM_S};
use crate::rates::{ParticleGroup, SuperpositionConfig};
use crate::units::{km_per_s_to_c, parse_quantity, parse_unit, KEV, NUCLEON_MASS};

/// A number in natural units or a string carrying its unit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Quantity {
    Number(f64),
    Text(String),
}

impl Quantity {
    pub fn natural(&self, dim: i32) -> Result<f64> {
        match self {
            Quantity::Number(v) => Ok(*v),
            Quantity::Text(s) => parse_quantity(s, dim),
        }
    }

    fn text(s: &str) -> Self {
        Quantity::Text(s.to_string())
    }
}

fn natural_list(values: &[Quantity], dim: i32) -> Result<Vec<f64>> {
    values.iter().map(|q| q.natural(dim)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Spacing {
    #[default]
    Linear,
    Log,
}

/// Evenly spaced grid, linearly or logarithmically.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub start: Quantity,
    pub stop: Quantity,
    pub count: usize,
    #[serde(default)]
    pub spacing: Spacing,
}

impl GridSpec {
    pub fn points(&self, dim: i32) -> Result<Vec<f64>> {
        grid(
            self.start.natural(dim)?,
            self.stop.natural(dim)?,
            self.count,
            self.spacing,
        )
    }
}

pub fn grid(start: f64, stop: f64, count: usize, spacing: Spacing) -> Result<Vec<f64>> {
    if count == 0 {
        return Err(Error::Config("grid count must be positive".into()));
    }
    if count == 1 {
        return Ok(vec![start]);
    }
    let step = |i: usize| i as f64 / (count - 1) as f64;
    match spacing {
        Spacing::Linear => Ok((0..count)
            .map(|i| start + (stop - start) * step(i))
            .collect()),
        Spacing::Log => {
            if !(start > 0.0 && stop > 0.0) {
                return Err(Error::Config("log grid endpoints must be positive".into()));
            }
            let ratio = (stop / start).ln();
            Ok((0..count)
                .map(|i| start * (ratio * step(i)).exp())
                .collect())
        }
    }
}

fn points_or(
    list: &Option<Vec<Quantity>>,
    spec: &Option<GridSpec>,
    dim: i32,
    default: impl FnOnce() -> Result<Vec<f64>>,
) -> Result<Vec<f64>> {
    match (list, spec) {
        (Some(_), Some(_)) => Err(Error::Config(
            "give either an explicit list or a grid, not both".into(),
        )),
        (Some(values), None) => natural_list(values, dim),
        (None, Some(spec)) => spec.points(dim),
        (None, None) => default(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    #[default]
    White,
    CutoffProduct,
    Thermal,
    Dilute,
    Unparticle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum SpectrumKind {
    #[default]
    Constant,
    Step,
    HighPass,
    Tabulated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    #[serde(default)]
    pub family: Family,
    /// γ; mass⁻⁴ for product models and mass⁻² for field models.
    pub coupling: Option<Quantity>,
    /// m_N²γ for the white model, e.g. `"1e-30 cm^3 s^-1"`.
    pub nucleon_coupling: Option<Quantity>,
    pub correlation_length: Option<Quantity>,
    pub spectrum: Option<SpectrumKind>,
    /// γ(ω) plateau, same units as the white coupling.
    pub level: Option<Quantity>,
    pub cutoff: Option<Quantity>,
    pub corner: Option<Quantity>,
    /// CSV of (ω, γ(ω)) in natural units.
    pub table: Option<PathBuf>,
    pub mass: Option<Quantity>,
    pub temperature: Option<Quantity>,
    pub chemical_potential: Option<Quantity>,
    /// rms velocity; fixes T = μv²/3 when no temperature is given.
    pub velocity: Option<Quantity>,
    /// Mass density; fixes ζ for the dilute model when no chemical
    /// potential is given.
    pub density: Option<Quantity>,
    pub dimension: Option<f64>,
    pub scale: Option<Quantity>,
}

const COUPLING_DIM_PRODUCT: i32 = -4;
const COUPLING_DIM_FIELD: i32 = -2;

fn required(q: &Option<Quantity>, name: &str, dim: i32) -> Result<f64> {
    q.as_ref()
        .ok_or_else(|| Error::Config(format!("model.{name} is required for this family")))?
        .natural(dim)
}

fn optional(q: &Option<Quantity>, dim: i32, default: f64) -> Result<f64> {
    q.as_ref().map_or(Ok(default), |q| q.natural(dim))
}

impl ModelSection {
    fn reject(&self, keys: &[(&str, bool)]) -> Result<()> {
        for (name, present) in keys {
            if *present {
                return Err(Error::Config(format!(
                    "model.{name} does not apply to the {:?} family",
                    self.family
                )));
            }
        }
        Ok(())
    }

    pub fn build(&self) -> Result<NoiseModel> {
        match self.family {
            Family::White => {
                self.reject(&[
                    ("mass", self.mass.is_some()),
                    ("temperature", self.temperature.is_some()),
                    ("spectrum", self.spectrum.is_some()),
                ])?;
                let coupling = match (&self.coupling, &self.nucleon_coupling) {
                    (Some(_), Some(_)) => {
                        return Err(Error::Config(
                            "give model.coupling or model.nucleon_coupling, not both".into(),
                        ))
                    }
                    (Some(c), None) => c.natural(COUPLING_DIM_PRODUCT)?,
                    (None, Some(c)) => c.natural(COUPLING_DIM_FIELD)? / NUCLEON_MASS.powi(2),
                    (None, None) => {
                        Quantity::text("1e-30 cm^3 s^-1").natural(COUPLING_DIM_FIELD)?
                            / NUCLEON_MASS.powi(2)
                    }
                };
                let rc = optional(
                    &self.correlation_length,
                    -1,
                    Quantity::text("1e-5 cm").natural(-1)?,
                )?;
                NoiseModel::white(coupling, rc)
            }
            Family::CutoffProduct => {
                self.reject(&[
                    ("coupling", self.coupling.is_some()),
                    ("mass", self.mass.is_some()),
                ])?;
                let level = match (&self.level, &self.nucleon_coupling) {
                    (Some(_), Some(_)) => {
                        return Err(Error::Config(
                            "give model.level or model.nucleon_coupling, not both".into(),
                        ))
                    }
                    (Some(l), None) => l.natural(COUPLING_DIM_PRODUCT)?,
                    (None, Some(c)) => c.natural(COUPLING_DIM_FIELD)? / NUCLEON_MASS.powi(2),
                    (None, None) => {
                        Quantity::text("1e-30 cm^3 s^-1").natural(COUPLING_DIM_FIELD)?
                            / NUCLEON_MASS.powi(2)
                    }
                };
                let shape = match self.spectrum.unwrap_or_default() {
                    SpectrumKind::Constant => SpectralShape::Constant { level },
                    SpectrumKind::Step => SpectralShape::Step {
                        level,
                        cutoff: required(&self.cutoff, "cutoff", 1)?,
                    },
                    SpectrumKind::HighPass => SpectralShape::HighPass {
                        level,
                        corner: required(&self.corner, "corner", 1)?,
                    },
                    SpectrumKind::Tabulated => {
                        let path = self.table.as_ref().ok_or_else(|| {
                            Error::Config("model.table is required for a tabulated spectrum".into())
                        })?;
                        SpectralShape::Tabulated(SpectralTable::from_path(path)?)
                    }
                };
                let rc = optional(
                    &self.correlation_length,
                    -1,
                    Quantity::text("1e-5 cm").natural(-1)?,
                )?;
                NoiseModel::cutoff_product(shape, rc)
            }
            Family::Thermal | Family::Dilute => {
                self.reject(&[
                    ("correlation_length", self.correlation_length.is_some()),
                    ("dimension", self.dimension.is_some()),
                ])?;
                let mass = required(&self.mass, "mass", 1)?;
                let temperature = match (&self.temperature, &self.velocity) {
                    (Some(_), Some(_)) => {
                        return Err(Error::Config(
                            "give model.temperature or model.velocity, not both".into(),
                        ))
                    }
                    (Some(t), None) => t.natural(1)?,
                    (None, Some(v)) => dm_temperature(mass, v.natural(0)?),
                    (None, None) => {
                        return Err(Error::Config(
                            "model.temperature or model.velocity is required".into(),
                        ))
                    }
                };
                let zeta = match (&self.chemical_potential, &self.density) {
                    (Some(_), Some(_)) => {
                        return Err(Error::Config(
                            "give model.chemical_potential or model.density, not both".into(),
                        ))
                    }
                    (Some(z), None) => z.natural(1)?,
                    (None, Some(rho)) => {
                        let r_c = (2.0 * mass * temperature).sqrt().recip();
                        let chem = chemical_factor(rho.natural(4)?, mass, r_c);
                        mass + temperature * chem.ln()
                    }
                    (None, None) => 0.0,
                };
                let coupling = optional(
                    &self.coupling,
                    COUPLING_DIM_FIELD,
                    Quantity::text("1 TeV^-2").natural(-2)?,
                )?;
                if self.family == Family::Thermal {
                    NoiseModel::thermal(mass, temperature, zeta, coupling)
                } else {
                    NoiseModel::dilute(mass, temperature, zeta, coupling)
                }
            }
            Family::Unparticle => {
                self.reject(&[
                    ("mass", self.mass.is_some()),
                    ("correlation_length", self.correlation_length.is_some()),
                ])?;
                let dimension = self
                    .dimension
                    .ok_or_else(|| Error::Config("model.dimension is required".into()))?;
                let temperature = required(&self.temperature, "temperature", 1)?;
                let scale = optional(&self.scale, 1, temperature)?;
                let zeta = optional(&self.chemical_potential, 1, 0.0)?;
                let coupling = optional(
                    &self.coupling,
                    COUPLING_DIM_FIELD,
                    Quantity::text("1 TeV^-2").natural(-2)?,
                )?;
                NoiseModel::unparticle(dimension, scale, temperature, zeta, coupling)
            }
        }
    }
}

/// Slowest natural time scale of a model, used for default time grids.
pub fn time_scale(model: &NoiseModel) -> f64 {
    match model {
        NoiseModel::Thermal(m) => m.temperature.recip(),
        NoiseModel::DiluteNr(m) => m.temperature.recip(),
        NoiseModel::Unparticle(m) => m.temperature.recip(),
        NoiseModel::CutoffProduct(m) => match &m.spectrum {
            SpectralShape::Step { cutoff, .. } => cutoff.recip(),
            SpectralShape::HighPass { corner, .. } => corner.recip(),
            _ => crate::units::seconds_to_natural(1e-9),
        },
        NoiseModel::WhiteCsl(_) => crate::units::seconds_to_natural(1e-9),
    }
}

/// Length over which a model's spatial correlations decay.
pub fn length_scale(model: &NoiseModel) -> f64 {
    match model {
        NoiseModel::Thermal(m) => (2.0 * m.mass * m.temperature).sqrt().recip(),
        NoiseModel::Unparticle(m) => m.temperature.recip(),
        other => other.correlation_length().unwrap_or(1.0),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BranchSpec {
    pub probability: f64,
    /// Coordinates in `geometry.length_unit`.
    pub positions: Vec<[f64; 3]>,
    /// Coupling masses in nucleon masses; one nucleon each by default.
    pub masses: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct GeometrySection {
    /// Unit of explicit branch coordinates.
    pub length_unit: Option<String>,
    /// Branch separation for the default two-branch geometry.
    pub separation: Option<Quantity>,
    /// Nucleons bunched at each point of the default geometry.
    pub nucleons: Option<f64>,
    pub probabilities: Option<Vec<f64>>,
    #[serde(default)]
    pub branch: Vec<BranchSpec>,
}

impl GeometrySection {
    /// Explicit branches, or two branches of one bunch displaced along x
    /// by `separation` (ten correlation lengths by default).
    pub fn build(&self, model: &NoiseModel) -> Result<SuperpositionConfig> {
        if self.branch.is_empty() {
            let separation = optional(&self.separation, -1, 10.0 * length_scale(model))?;
            let nucleons = self.nucleons.unwrap_or(1.0);
            if !(nucleons > 0.0) {
                return Err(Error::Config("geometry.nucleons must be positive".into()));
            }
            let probabilities = self.probabilities.clone().unwrap_or_else(|| vec![0.5, 0.5]);
            let n = probabilities.len();
            let groups = (0..n)
                .map(|b| {
                    ParticleGroup::single(
                        [b as f64 * separation, 0.0, 0.0],
                        nucleons * NUCLEON_MASS,
                    )
                })
                .collect::<Result<Vec<_>>>()?;
            return SuperpositionConfig::new(groups, probabilities);
        }
        if self.separation.is_some() || self.nucleons.is_some() || self.probabilities.is_some() {
            return Err(Error::Config(
                "geometry.separation, nucleons and probabilities apply only without explicit branches".into(),
            ));
        }
        let unit = self.length_unit.as_deref().unwrap_or("cm");
        let (factor, dim) = parse_unit(unit)?;
        if dim != -1 {
            return Err(Error::Config(format!(
                "geometry.length_unit '{unit}' is not a length"
            )));
        }
        let mut groups = Vec::new();
        let mut probabilities = Vec::new();
        for b in &self.branch {
            let masses = b
                .masses
                .clone()
                .unwrap_or_else(|| vec![1.0; b.positions.len()]);
            let positions = b.positions.iter().map(|p| p.map(|x| x * factor)).collect();
            let couplings = masses.iter().map(|m| m * NUCLEON_MASS).collect();
            groups.push(ParticleGroup::new(positions, couplings)?);
            probabilities.push(b.probability);
        }
        SuperpositionConfig::new(groups, probabilities)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpeciesSpec {
    pub coupling_mass: Option<Quantity>,
    pub inertial_mass: Option<Quantity>,
    pub count: Option<f64>,
}

impl SpeciesSpec {
    fn build(&self) -> Result<ParticleSpecies> {
        let m = optional(&self.coupling_mass, 1, NUCLEON_MASS)?;
        let big_m = optional(&self.inertial_mass, 1, m)?;
        ParticleSpecies::new(m, big_m, self.count.unwrap_or(1.0))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub times: Option<Vec<Quantity>>,
    pub time_grid: Option<GridSpec>,
    pub radii: Option<Vec<Quantity>>,
    pub radius_grid: Option<GridSpec>,
    pub wavenumbers: Option<Vec<Quantity>>,
    pub wavenumber_grid: Option<GridSpec>,
    pub photon_energies: Option<Vec<Quantity>>,
    pub photon_grid: Option<GridSpec>,
    pub n_traj: Option<usize>,
    pub seed: Option<u64>,
    /// `reweighted` (default), `physical` or `midpoint`.
    pub sampler: Option<Sampler>,
    /// Use the large-separation asymptote beyond 20 correlation lengths.
    pub far_field: Option<bool>,
    pub species: Option<Vec<SpeciesSpec>>,
}

impl RunSection {
    /// Explicit times or a log grid over [0.1, 10] model time scales.
    pub fn times(&self, model: &NoiseModel) -> Result<Vec<f64>> {
        points_or(&self.times, &self.time_grid, -1, || {
            let tau = time_scale(model);
            grid(0.1 * tau, 10.0 * tau, 9, Spacing::Log)
        })
    }

    pub fn radii(&self, model: &NoiseModel) -> Result<Vec<f64>> {
        points_or(&self.radii, &self.radius_grid, -1, || {
            grid(0.0, 5.0 * length_scale(model), 11, Spacing::Linear)
        })
    }

    pub fn wavenumbers(&self) -> Result<Option<Vec<f64>>> {
        if self.wavenumbers.is_none() && self.wavenumber_grid.is_none() {
            return Ok(None);
        }
        points_or(&self.wavenumbers, &self.wavenumber_grid, 1, || {
            Ok(Vec::new())
        })
        .map(Some)
    }

    /// Explicit photon energies or 21 points over (μ, μ + 20T].
    pub fn photon_energies(&self, model: &NoiseModel) -> Result<Vec<f64>> {
        points_or(
            &self.photon_energies,
            &self.photon_grid,
            1,
            || match model {
                NoiseModel::Thermal(m) => grid(
                    m.mass + m.temperature,
                    m.mass + 20.0 * m.temperature,
                    20,
                    Spacing::Linear,
                ),
                NoiseModel::DiluteNr(m) => grid(
                    m.mass + m.temperature,
                    m.mass + 20.0 * m.temperature,
                    20,
                    Spacing::Linear,
                ),
                other => Err(Error::WrongModel {
                    expected: "thermal or dilute",
                    found: other.tag(),
                }),
            },
        )
    }

    pub fn species(&self) -> Result<Vec<ParticleSpecies>> {
        match &self.species {
            None => Ok(vec![ParticleSpecies::nucleon(1.0)]),
            Some(list) => list.iter().map(SpeciesSpec::build).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct ScanSection {
    pub masses: Option<Vec<Quantity>>,
    /// rms velocities; dimensionless or e.g. `"220 km/s"`.
    pub velocities: Option<Vec<Quantity>>,
    pub density: Option<Quantity>,
    pub coupling: Option<Quantity>,
    pub nucleons_per_bunch: Option<f64>,
    pub bunches: Option<f64>,
    pub fifth_force_scale: Option<Quantity>,
}

/// Resolved dark-matter scan parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanParameters {
    pub masses: Vec<f64>,
    pub velocities: Vec<f64>,
    pub density: f64,
    pub coupling: f64,
    pub nucleons_per_bunch: f64,
    pub bunches: f64,
    pub fifth_force_scale: f64,
}

impl ScanSection {
    pub fn resolve(&self) -> Result<ScanParameters> {
        let masses = match &self.masses {
            Some(list) => natural_list(list, 1)?,
            None => MASSES_KEV.iter().map(|m| m * KEV).collect(),
        };
        let velocities = match &self.velocities {
            Some(list) => natural_list(list, 0)?,
            None => VELOCITIES_KM_S
                .iter()
                .map(|(_, v)| km_per_s_to_c(*v))
                .collect(),
        };
        Ok(ScanParameters {
            masses,
            velocities,
            density: optional(&self.density, 4, Quantity::text("0.3 GeV/cm^3").natural(4)?)?,
            coupling: optional(&self.coupling, -2, Quantity::text("1 TeV^-2").natural(-2)?)?,
            nucleons_per_bunch: self.nucleons_per_bunch.unwrap_or(1e9),
            bunches: self.bunches.unwrap_or(1e4),
            fifth_force_scale: optional(
                &self.fifth_force_scale,
                1,
                Quantity::text("1.4e-3 eV").natural(1)?,
            )?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
    Both,
}

impl Format {
    pub fn csv(self) -> bool {
        matches!(self, Format::Csv | Format::Both)
    }

    pub fn json(self) -> bool {
        matches!(self, Format::Json | Format::Both)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub format: Option<Format>,
    /// Significant digits in CSV; shortest round-trip form when absent.
    pub precision: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub model: ModelSection,
    #[serde(default)]
    pub geometry: GeometrySection,
    #[serde(default)]
    pub run: RunSection,
    #[serde(default)]
    pub scan: ScanSection,
    #[serde(default)]
    pub output: OutputSection,
}

/// Parses a `section.key=value` override. The value is read as a TOML
/// value and falls back to a plain string.
pub fn parse_override(text: &str) -> Result<(Vec<String>, toml::Value)> {
    let (path, value) = text.split_once('=').ok_or_else(|| {
        Error::Config(format!(
            "override '{text}' is not of the form section.key=value"
        ))
    })?;
    let path: Vec<String> = path.trim().split('.').map(str::to_string).collect();
    if path.iter().any(String::is_empty) {
        return Err(Error::Config(format!("override '{text}' has an empty key")));
    }
    let value = value.trim();
    let parsed = toml::from_str::<toml::Table>(&format!("v = {value}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(value.to_string()));
    Ok((path, parsed))
}

pub fn apply_override(table: &mut toml::Table, path: &[String], value: toml::Value) -> Result<()> {
    let (last, parents) = path.split_last().expect("non-empty override path");
    let mut current = table;
    for key in parents {
        let entry = current
            .entry(key.clone())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        current = entry.as_table_mut().ok_or_else(|| {
            Error::Config(format!(
                "override path '{}' crosses a non-table value",
                path.join(".")
            ))
        })?;
    }
    current.insert(last.clone(), value);
    Ok(())
}

/// Parses config text, applies overrides and validates the result.
pub fn resolve(text: &str, overrides: &[String]) -> Result<(toml::Table, RunConfig)> {
    let mut table: toml::Table = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    for o in overrides {
        let (path, value) = parse_override(o)?;
        apply_override(&mut table, &path, value)?;
    }
    let config: RunConfig = toml::Value::Table(table.clone())
        .try_into()
        .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
    Ok((table, config))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phenomenology::dm_correlation_length;

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(resolve("[model]\nfamly = \"white\"", &[]).is_err());
        assert!(resolve("[modle]\n", &[]).is_err());
    }

    #[test]
    fn overrides_create_sections() {
        let (_, c) = resolve(
            "",
            &[
                "run.n_traj=500".into(),
                "model.family=thermal".into(),
                "model.mass=1 keV".into(),
            ],
        )
        .unwrap();
        assert_eq!(c.run.n_traj, Some(500));
        assert_eq!(c.model.family, Family::Thermal);
        assert_eq!(c.model.mass, Some(Quantity::Text("1 keV".into())));
    }

    #[test]
    fn default_white_model() {
        let (_, c) = resolve("", &[]).unwrap();
        let model = c.model.build().unwrap();
        assert_eq!(model.tag(), "white");
        let geometry = c.geometry.build(&model).unwrap();
        assert_eq!(geometry.branches(), 2);
    }

    #[test]
    fn dilute_from_velocity_and_density() {
        let text = "[model]\nfamily = \"dilute\"\nmass = \"1 keV\"\nvelocity = \"220 km/s\"\ndensity = \"0.3 GeV/cm^3\"\n";
        let (_, c) = resolve(text, &[]).unwrap();
        let model = c.model.build().unwrap();
        let NoiseModel::DiluteNr(m) = model else {
            panic!()
        };
        let v = km_per_s_to_c(220.0);
        // ħ/ħc reproduces 1/c to about 6e-10.
        assert!((m.temperature / dm_temperature(KEV, v) - 1.0).abs() < 1e-8);
        let chem = chemical_factor(
            parse_quantity("0.3 GeV/cm^3", 4).unwrap(),
            KEV,
            dm_correlation_length(KEV, v),
        );
        assert!(
            (((m.chemical_potential - m.mass) / m.temperature).exp() / chem - 1.0).abs() < 1e-9
        );
    }

    #[test]
    fn grids() {
        assert!((grid(1.0, 100.0, 3, Spacing::Log).unwrap()[1] - 10.0).abs() < 1e-12);
        assert_eq!(
            grid(0.0, 1.0, 3, Spacing::Linear).unwrap(),
            vec![0.0, 0.5, 1.0]
        );
        assert!(grid(0.0, 1.0, 3, Spacing::Log).is_err());
    }
}
