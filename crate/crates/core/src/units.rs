//! Physical constants and conversions to natural units (ħ = c = k_B = 1, GeV).

use crate::error::{Error, Result};

/// ħc in GeV·cm.
pub const HBAR_C_GEV_CM: f64 = 1.973_269_804e-14;
/// ħ in GeV·s.
pub const HBAR_GEV_S: f64 = 6.582_119_569e-25;
/// Nucleon mass in GeV.
pub const NUCLEON_MASS: f64 = 0.938;
pub const SPEED_OF_LIGHT_KM_S: f64 = 299_792.458;
/// Electromagnetic coupling e² = α.
pub const E_SQUARED: f64 = 1.0 / 137.04;
pub const BOHR_RADIUS_CM: f64 = 0.529e-8;
pub const BOLTZMANN_EV_PER_K: f64 = 8.617_333e-5;

pub const EV: f64 = 1e-9;
pub const KEV: f64 = 1e-6;
pub const MEV: f64 = 1e-3;
pub const TEV: f64 = 1e3;

pub fn cm_to_natural(cm: f64) -> f64 {
    cm / HBAR_C_GEV_CM
}

pub fn natural_to_cm(length: f64) -> f64 {
    length * HBAR_C_GEV_CM
}

pub fn seconds_to_natural(s: f64) -> f64 {
    s / HBAR_GEV_S
}

pub fn natural_to_seconds(time: f64) -> f64 {
    time * HBAR_GEV_S
}

pub fn km_per_s_to_c(v: f64) -> f64 {
    v / SPEED_OF_LIGHT_KM_S
}

/// Mass density in GeV·cm⁻³ expressed as GeV⁴.
pub fn density_to_natural(gev_per_cm3: f64) -> f64 {
    gev_per_cm3 * HBAR_C_GEV_CM.powi(3)
}

pub fn natural_to_density(gev4: f64) -> f64 {
    gev4 / HBAR_C_GEV_CM.powi(3)
}

/// Energy in GeV as the equivalent temperature in kelvin.
pub fn gev_to_kelvin(energy: f64) -> f64 {
    energy / EV / BOLTZMANN_EV_PER_K
}

/// A unit symbol: its value in GeV^dim and its mass dimension.
fn base_unit(symbol: &str) -> Option<(f64, i32)> {
    let length = |cm: f64| (cm / HBAR_C_GEV_CM, -1);
    let time = |s: f64| (s / HBAR_GEV_S, -1);
    Some(match symbol {
        "eV" => (EV, 1),
        "keV" => (KEV, 1),
        "MeV" => (MEV, 1),
        "GeV" => (1.0, 1),
        "TeV" => (TEV, 1),
        "fm" => length(1e-13),
        "nm" => length(1e-7),
        "um" => length(1e-4),
        "mm" => length(0.1),
        "cm" => length(1.0),
        "m" => length(100.0),
        "km" => length(1e5),
        "ps" => time(1e-12),
        "ns" => time(1e-9),
        "us" => time(1e-6),
        "ms" => time(1e-3),
        "s" => time(1.0),
        "c" => (1.0, 0),
        "K" => (BOLTZMANN_EV_PER_K * EV, 1),
        _ => return None,
    })
}

/// Parses a unit expression such as `cm^3 s^-1`, `GeV/cm^3` or `km/s`.
pub fn parse_unit(expr: &str) -> Result<(f64, i32)> {
    let mut factor = 1.0;
    let mut dim = 0;
    let mut sign = 1;
    let spaced = expr.replace('/', " / ").replace('*', " ");
    for token in spaced.split_whitespace() {
        if token == "/" {
            sign = -1;
            continue;
        }
        let (name, power) = match token.split_once('^') {
            Some((name, p)) => (
                name,
                p.parse::<i32>()
                    .map_err(|_| Error::Config(format!("bad exponent in unit '{token}'")))?,
            ),
            None => (token, 1),
        };
        let (value, d) =
            base_unit(name).ok_or_else(|| Error::Config(format!("unknown unit '{name}'")))?;
        let power = sign * power;
        factor *= value.powi(power);
        dim += d * power;
    }
    Ok((factor, dim))
}

/// Parses `"<number> <unit>"` into natural units, checking the mass dimension.
pub fn parse_quantity(text: &str, expected_dim: i32) -> Result<f64> {
    let text = text.trim();
    let split = text.find(char::is_whitespace).unwrap_or(text.len());
    let (number, unit) = text.split_at(split);
    let value: f64 = number
        .parse()
        .map_err(|_| Error::Config(format!("cannot parse number in '{text}'")))?;
    let unit = unit.trim();
    if unit.is_empty() || unit == "natural" {
        return Ok(value);
    }
    let (factor, dim) = parse_unit(unit)?;
    if dim != expected_dim {
        return Err(Error::Config(format!(
            "'{text}' has mass dimension {dim}, expected {expected_dim}"
        )));
    }
    Ok(value * factor)
}
