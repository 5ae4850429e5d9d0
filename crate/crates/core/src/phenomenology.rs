//! Thermal dark-matter scenarios: derived correlation length, temperature and
//! reduction time, reduction exponents, required densities, fifth-force
//! bounds and the tabulated scans.

use std::f64::consts::PI;
use std::fmt::Write as _;

use serde::Serialize;

use crate::correlators::NoiseModel;
use crate::error::{Error, Result};
use crate::units::{
    density_to_natural, km_per_s_to_c, natural_to_cm, natural_to_seconds, HBAR_C_GEV_CM, KEV,
    NUCLEON_MASS, TEV,
};

/// Halo, solar-system-bound and earth-bound rms velocities in km/s.
pub const VELOCITIES_KM_S: [(&str, f64); 3] = [("v_h", 220.0), ("v_s", 30.0), ("v_e", 8.0)];
/// Dark-matter masses of the scan, in keV.
pub const MASSES_KEV: [f64; 6] = [1.0, 10.0, 1e2, 1e3, 1e4, 1e6];
/// Effective displaced-nucleon numbers n²N of the scan.
pub const DISPLACED_NUCLEONS: [f64; 2] = [1e22, 1e8];

/// Coefficient of the reference required-coupling formula, GeV·cm⁻¹ at μ = 1 GeV.
pub const REQUIRED_GAMMA_RHO_COEFFICIENT: f64 = 1.5e13;
/// Coefficient reproducing the reference density table:
/// ρ_m = C·(μ/GeV)⁴/(n²N·γ·GeV²) in GeV·cm⁻³. The ħc-based conversion of
/// the exponent gives about 3.7e40 instead.
pub const TABLE_DENSITY_COEFFICIENT: f64 = 3e40;

/// A dark-matter population acting as the noise field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DarkMatterScenario {
    pub mass: f64,
    /// rms velocity in units of c.
    pub v_rms: f64,
    /// Mass density in natural units (GeV⁴).
    pub density: f64,
    /// Coupling γ = 1/M², GeV⁻².
    pub coupling: f64,
    /// Displaced nucleons per bunch.
    pub nucleons_per_bunch: f64,
    pub bunches: f64,
    /// Fifth-force scale μ₅.
    pub fifth_force_scale: f64,
}

impl DarkMatterScenario {
    pub fn new(
        mass: f64,
        v_rms: f64,
        density: f64,
        coupling: f64,
        nucleons_per_bunch: f64,
        bunches: f64,
        fifth_force_scale: f64,
    ) -> Result<Self> {
        let fields = [
            ("mass", mass),
            ("v_rms", v_rms),
            ("density", density),
            ("coupling", coupling),
            ("nucleons per bunch", nucleons_per_bunch),
            ("bunches", bunches),
            ("fifth-force scale", fifth_force_scale),
        ];
        for (name, value) in fields {
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::Domain(format!(
                    "{name} must be positive and finite, got {value}"
                )));
            }
        }
        if v_rms >= 1.0 {
            return Err(Error::Domain(format!("v_rms must be below c, got {v_rms}")));
        }
        Ok(Self {
            mass,
            v_rms,
            density,
            coupling,
            nucleons_per_bunch,
            bunches,
            fifth_force_scale,
        })
    }

    /// M = γ^{-1/2}.
    pub fn coupling_scale(&self) -> f64 {
        self.coupling.sqrt().recip()
    }

    /// n²N.
    pub fn displaced_nucleons(&self) -> f64 {
        self.nucleons_per_bunch.powi(2) * self.bunches
    }

    /// The dilute noise model this population generates.
    pub fn noise_model(&self) -> Result<NoiseModel> {
        let temperature = dm_temperature(self.mass, self.v_rms);
        let r_c = dm_correlation_length(self.mass, self.v_rms);
        let chem = chemical_factor(self.density, self.mass, r_c);
        let zeta = self.mass + temperature * chem.ln();
        NoiseModel::dilute(self.mass, temperature, zeta, self.coupling)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScenarioDerived {
    pub correlation_length: f64,
    pub temperature: f64,
    pub reduction_time: f64,
    /// e^{−(μ−ζ)/T}.
    pub chem_factor: f64,
    /// 2Γ(∞).
    pub exponent_2gamma: f64,
    /// Set when chem_factor > 1 and the dilute expansion fails.
    pub non_dilute: bool,
}

/// r_C = √(3/2)/(μv).
pub fn dm_correlation_length(mass: f64, v_rms: f64) -> f64 {
    1.5f64.sqrt() / (mass * v_rms)
}

/// T = μv²/3.
pub fn dm_temperature(mass: f64, v_rms: f64) -> f64 {
    mass * v_rms * v_rms / 3.0
}

/// e^{−(μ−ζ)/T} = (ρ_m/μ)·8π^{3/2}r_C³.
pub fn chemical_factor(density: f64, mass: f64, correlation_length: f64) -> f64 {
    density / mass * 8.0 * PI.powf(1.5) * correlation_length.powi(3)
}

pub fn dm_derived(s: &DarkMatterScenario) -> ScenarioDerived {
    let correlation_length = dm_correlation_length(s.mass, s.v_rms);
    let temperature = dm_temperature(s.mass, s.v_rms);
    let chem_factor = chemical_factor(s.density, s.mass, correlation_length);
    ScenarioDerived {
        correlation_length,
        temperature,
        reduction_time: temperature.recip(),
        chem_factor,
        exponent_2gamma: dm_reduction_exponent(s),
        non_dilute: chem_factor > 1.0,
    }
}

/// 2Γ(∞) = 4(m_N/M)²(ρ_m/μ⁴)n²N.
pub fn dm_reduction_exponent(s: &DarkMatterScenario) -> f64 {
    4.0 * NUCLEON_MASS.powi(2) * s.coupling * s.density / s.mass.powi(4) * s.displaced_nucleons()
}

/// Coupling-density product and density needed for 2Γ(∞) = 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RequiredDensity {
    /// γρ_m in GeV·cm⁻¹ from the reference μ² formula.
    pub gamma_rho_m_reference: f64,
    /// γρ_m in GeV·cm⁻¹ from solving the exponent with ħc conversions.
    pub gamma_rho_m_consistent: f64,
    /// ρ_m in GeV·cm⁻³ following the reference density table.
    pub rho_m: f64,
    /// ρ_m in GeV·cm⁻³ from solving the exponent with ħc conversions.
    pub rho_m_consistent: f64,
}

pub fn dm_required_density(
    mass: f64,
    displaced_nucleons: f64,
    coupling: f64,
) -> Result<RequiredDensity> {
    for (name, v) in [
        ("mass", mass),
        ("n_out", displaced_nucleons),
        ("coupling", coupling),
    ] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::Domain(format!("{name} must be positive, got {v}")));
        }
    }
    let gamma_rho_natural = mass.powi(4) / (4.0 * NUCLEON_MASS.powi(2) * displaced_nucleons);
    let rho_natural = gamma_rho_natural / coupling;
    Ok(RequiredDensity {
        gamma_rho_m_reference: REQUIRED_GAMMA_RHO_COEFFICIENT / displaced_nucleons * mass.powi(2),
        gamma_rho_m_consistent: gamma_rho_natural / HBAR_C_GEV_CM,
        rho_m: TABLE_DENSITY_COEFFICIENT * mass.powi(4) / (displaced_nucleons * coupling),
        rho_m_consistent: rho_natural / HBAR_C_GEV_CM.powi(3),
    })
}

/// Lower bound on the coupling scale M from fifth-force searches.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FifthForceBound {
    pub log10_min_scale_gev: f64,
    pub min_scale: f64,
}

/// log₁₀(M/GeV) ≥ 19 − 0.22μ/μ₅.
pub fn fifth_force_bound(mass: f64, fifth_force_scale: f64) -> Result<FifthForceBound> {
    if !(fifth_force_scale > 0.0) || mass < 0.0 {
        return Err(Error::Domain(
            "fifth-force scale must be positive and mass non-negative".into(),
        ));
    }
    let log10 = 19.0 - 0.22 * mass / fifth_force_scale;
    Ok(FifthForceBound {
        log10_min_scale_gev: log10,
        min_scale: 10f64.powf(log10),
    })
}

/// Rounds to one significant figure with ties going up. A relative slack
/// of 1e-9 absorbs representation error in values such as 1.5e-21.
pub fn round_one_sig_fig(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    let sign = x.signum();
    let a = x.abs();
    let mut exponent = a.log10().floor();
    let mut mantissa = a / 10f64.powf(exponent);
    if mantissa >= 10.0 {
        mantissa /= 10.0;
        exponent += 1.0;
    } else if mantissa < 1.0 {
        mantissa *= 10.0;
        exponent -= 1.0;
    }
    let mut digit = (mantissa * (1.0 + 1e-9) + 0.5).floor();
    if digit >= 10.0 {
        digit = 1.0;
        exponent += 1.0;
    }
    let text = format!("{}e{}", sign * digit, exponent);
    text.parse().unwrap_or(sign * digit * 10f64.powf(exponent))
}

/// Formats a one-significant-figure value as `d×10^e` text, e.g. `3e-5`.
pub fn format_one_sig_fig(x: f64) -> String {
    let r = round_one_sig_fig(x);
    if r == 0.0 {
        return "0".into();
    }
    let exponent = r.abs().log10().floor();
    let digit = (r / 10f64.powf(exponent)).round();
    if digit.abs() >= 10.0 {
        return format!("{}e{}", digit / 10.0, exponent + 1.0);
    }
    format!("{digit}e{exponent}")
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TableRow {
    pub label: String,
    pub values: Vec<f64>,
    pub display: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table {
    pub name: String,
    pub quantity: String,
    pub unit: String,
    pub masses_kev: Vec<f64>,
    pub rows: Vec<TableRow>,
}

impl Table {
    fn build<F: Fn(f64) -> f64>(
        name: &str,
        quantity: &str,
        unit: &str,
        rows: Vec<(String, F)>,
    ) -> Self {
        let rows = rows
            .into_iter()
            .map(|(label, f)| {
                let values: Vec<f64> = MASSES_KEV.iter().map(|&m| f(m * KEV)).collect();
                let display = values.iter().map(|&v| round_one_sig_fig(v)).collect();
                TableRow {
                    label,
                    values,
                    display,
                }
            })
            .collect();
        Self {
            name: name.into(),
            quantity: quantity.into(),
            unit: unit.into(),
            masses_kev: MASSES_KEV.to_vec(),
            rows,
        }
    }

    /// Aligned text rendering with rows of the scan variable and columns of μ.
    pub fn render_text(&self) -> String {
        let mut out = format!("{} ({}) vs mu (keV)\n", self.quantity, self.unit);
        let width = 10;
        let _ = write!(out, "{:>width$}", "mu ->");
        for m in &self.masses_kev {
            let _ = write!(out, "{:>width$}", format_one_sig_fig(*m));
        }
        out.push('\n');
        for row in &self.rows {
            let _ = write!(out, "{:>width$}", row.label);
            for v in &row.display {
                let _ = write!(out, "{:>width$}", format_one_sig_fig(*v));
            }
            out.push('\n');
        }
        out
    }

    pub fn value(&self, row: &str, mass_kev: f64) -> Option<f64> {
        let column = self.masses_kev.iter().position(|&m| m == mass_kev)?;
        self.rows
            .iter()
            .find(|r| r.label == row)
            .map(|r| r.values[column])
    }

    pub fn display_value(&self, row: &str, mass_kev: f64) -> Option<f64> {
        self.value(row, mass_kev).map(round_one_sig_fig)
    }
}

fn velocity_rows<F: Fn(f64, f64) -> f64 + Copy>(f: F) -> Vec<(String, impl Fn(f64) -> f64)> {
    VELOCITIES_KM_S
        .iter()
        .map(|&(label, v)| {
            let v = km_per_s_to_c(v);
            (label.to_string(), move |m: f64| f(m, v))
        })
        .collect()
}

fn displaced_rows<F: Fn(f64, f64) -> f64 + Copy>(f: F) -> Vec<(String, impl Fn(f64) -> f64)> {
    DISPLACED_NUCLEONS
        .iter()
        .map(|&n| (format_one_sig_fig(n), move |m: f64| f(m, n)))
        .collect()
}

/// The four scans: correlation length (cm), reduction time (s), required
/// γρ_m (GeV·cm⁻¹) and required ρ_m (GeV·cm⁻³) at γ = 1 TeV⁻².
pub fn make_tables() -> [Table; 4] {
    let coupling = TEV.powi(-2);
    let required =
        move |m: f64, n: f64| dm_required_density(m, n, coupling).expect("positive scan inputs");
    [
        Table::build(
            "correlation_length",
            "r_C",
            "cm",
            velocity_rows(|m, v| natural_to_cm(dm_correlation_length(m, v))),
        ),
        Table::build(
            "reduction_time",
            "t_R",
            "s",
            velocity_rows(|m, v| natural_to_seconds(dm_temperature(m, v).recip())),
        ),
        Table::build(
            "required_gamma_rho",
            "gamma rho_m",
            "GeV/cm",
            displaced_rows(move |m, n| required(m, n).gamma_rho_m_reference),
        ),
        Table::build(
            "required_density",
            "rho_m",
            "GeV/cm^3",
            displaced_rows(move |m, n| required(m, n).rho_m),
        ),
    ]
}

/// Scenario with a density in GeV·cm⁻³ and velocity in km/s.
pub fn scenario_from_lab_units(
    mass: f64,
    v_km_s: f64,
    density_gev_cm3: f64,
    coupling: f64,
    nucleons_per_bunch: f64,
    bunches: f64,
    fifth_force_scale: f64,
) -> Result<DarkMatterScenario> {
    DarkMatterScenario::new(
        mass,
        km_per_s_to_c(v_km_s),
        density_to_natural(density_gev_cm3),
        coupling,
        nucleons_per_bunch,
        bunches,
        fifth_force_scale,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rounding() {
        assert_eq!(round_one_sig_fig(1.5e-21), 2e-21);
        assert_eq!(round_one_sig_fig(3.29e-5), 3e-5);
        assert_eq!(round_one_sig_fig(9.6), 10.0);
        assert_eq!(round_one_sig_fig(0.96), 1.0);
        assert_eq!(format_one_sig_fig(2e-21), "2e-21");
        assert_eq!(format_one_sig_fig(3e4), "3e4");
    }

    #[test]
    fn n_squared_scaling() {
        let s = scenario_from_lab_units(KEV, 220.0, 3.0, 1e-6, 1e9, 1e4, 1e-12).unwrap();
        let mut d = s;
        d.nucleons_per_bunch *= 2.0;
        assert!((dm_reduction_exponent(&d) / dm_reduction_exponent(&s) - 4.0).abs() < 1e-12);
    }

    #[test]
    fn fifth_force_zero_crossing() {
        let mu5 = 1.4e-12;
        let b = fifth_force_bound(mu5 * 19.0 / 0.22, mu5).unwrap();
        assert!(b.log10_min_scale_gev.abs() < 1e-12);
        assert_eq!(fifth_force_bound(0.0, mu5).unwrap().min_scale, 1e19);
    }

    #[test]
    fn table_shape() {
        let tables = make_tables();
        assert_eq!(tables[0].rows.len(), 3);
        assert_eq!(tables[2].rows.len(), 2);
        assert!(tables[3].render_text().contains("rho_m"));
    }
}
