//! Energy production, gamma emission from hydrogen, the Markovian validity
//! diagnostic and the Lindblad kernel.

use std::f64::consts::PI;

use serde::Serialize;

use crate::correlators::{fourier_k4_integral, NoiseModel, SpectralShape};
use crate::error::{Error, Result};
use crate::units::{cm_to_natural, BOHR_RADIUS_CM, E_SQUARED};

/// A particle species: coupling mass m, inertial mass M and multiplicity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ParticleSpecies {
    pub coupling_mass: f64,
    pub inertial_mass: f64,
    pub count: f64,
}

impl ParticleSpecies {
    pub fn new(coupling_mass: f64, inertial_mass: f64, count: f64) -> Result<Self> {
        if !(coupling_mass > 0.0 && coupling_mass.is_finite())
            || !(inertial_mass > 0.0 && inertial_mass.is_finite())
        {
            return Err(Error::Domain(
                "particle masses must be positive and finite".into(),
            ));
        }
        if !(count >= 0.0 && count.is_finite()) {
            return Err(Error::Domain("particle count must be non-negative".into()));
        }
        Ok(Self {
            coupling_mass,
            inertial_mass,
            count,
        })
    }

    /// A nucleon whose coupling and inertial masses coincide.
    pub fn nucleon(count: f64) -> Self {
        let m = crate::units::NUCLEON_MASS;
        Self {
            coupling_mass: m,
            inertial_mass: m,
            count,
        }
    }

    /// count·m²/M.
    pub fn kinetic_weight(&self) -> f64 {
        self.count * self.coupling_mass.powi(2) / self.inertial_mass
    }
}

fn kinetic_weight(species: &[ParticleSpecies]) -> f64 {
    species.iter().map(ParticleSpecies::kinetic_weight).sum()
}

/// dTr(Hρ)/dt at time t. Depends on the kinetic terms only.
pub fn energy_rate(model: &NoiseModel, species: &[ParticleSpecies], t: f64) -> Result<f64> {
    Ok(kinetic_weight(species) * model.energy_rate_kernel(t)?)
}

/// The same rate from a direct k-quadrature of k⁴F̂(k,t).
pub fn energy_rate_fourier(model: &NoiseModel, species: &[ParticleSpecies], t: f64) -> Result<f64> {
    if t < 0.0 || t.is_nan() {
        return Err(Error::Domain(format!("time must be non-negative, got {t}")));
    }
    if t.is_infinite() {
        return Err(Error::Domain(
            "the energy rate has no limit at t = infinity".into(),
        ));
    }
    Ok(kinetic_weight(species) * model.coupling() * fourier_k4_integral(model, t)?)
}

/// The white-noise rate in closed form, 3γΣ(m²/M)/(32π^{3/2}ℓ⁵).
pub fn white_energy_rate_closed(model: &NoiseModel, species: &[ParticleSpecies]) -> Result<f64> {
    match model {
        NoiseModel::WhiteCsl(m) => Ok(kinetic_weight(species) * 3.0 * m.coupling
            / (32.0 * PI.powf(1.5) * m.correlation_length.powi(5))),
        other => Err(Error::WrongModel {
            expected: "white",
            found: other.tag(),
        }),
    }
}

/// Deposited energy: a finite value or an unbounded power-law growth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EnergyTotal {
    Finite { value: f64 },
    Unbounded { exponent: f64, stderr: f64 },
}

impl EnergyTotal {
    pub fn value(&self) -> Option<f64> {
        match self {
            EnergyTotal::Finite { value } => Some(*value),
            EnergyTotal::Unbounded { .. } => None,
        }
    }
}

/// Power-law fit y ∝ t^exponent by least squares on log-log data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GrowthFit {
    pub exponent: f64,
    pub stderr: f64,
    pub log_amplitude: f64,
}

pub fn fit_growth_exponent(times: &[f64], values: &[f64]) -> Result<GrowthFit> {
    if times.len() != values.len() || times.len() < 3 {
        return Err(Error::Domain(
            "growth fit needs at least three matched samples".into(),
        ));
    }
    if times
        .iter()
        .chain(values)
        .any(|v| !(*v > 0.0 && v.is_finite()))
    {
        return Err(Error::Domain(
            "growth fit needs positive finite samples".into(),
        ));
    }
    let xs: Vec<f64> = times.iter().map(|t| t.ln()).collect();
    let ys: Vec<f64> = values.iter().map(|v| v.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ssr: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    Ok(GrowthFit {
        exponent: slope,
        stderr: (ssr / (n - 2.0) / sxx).sqrt(),
        log_amplitude: intercept,
    })
}

/// Samples per decade used when fitting the growth of a divergent total.
const GROWTH_SAMPLES: usize = 11;

/// Start of the fitted decade, in units of the model's slowest time scale.
const GROWTH_DECADE_START: f64 = 1e3;

fn growth_time_scale(model: &NoiseModel) -> f64 {
    match model {
        NoiseModel::Unparticle(m) => m.temperature.recip(),
        NoiseModel::Thermal(m) => m.temperature.recip(),
        NoiseModel::DiluteNr(m) => m.temperature.recip(),
        NoiseModel::CutoffProduct(m) => match &m.spectrum {
            SpectralShape::Step { cutoff, .. } => cutoff.recip(),
            SpectralShape::HighPass { corner, .. } => corner.recip(),
            _ => 1.0,
        },
        NoiseModel::WhiteCsl(_) => 1.0,
    }
}

/// Log-spaced times over one decade starting at `start`.
pub fn decade_times(start: f64, samples: usize) -> Vec<f64> {
    (0..samples)
        .map(|i| start * 10f64.powf(i as f64 / (samples - 1) as f64))
        .collect()
}

/// ΔTr(Hρ) at time t, which may be infinite. Where the infinite-time limit
/// diverges the growth exponent fitted over the decade [10³, 10⁴] of the
/// model's time scale is returned instead.
pub fn energy_total(
    model: &NoiseModel,
    species: &[ParticleSpecies],
    t: f64,
) -> Result<EnergyTotal> {
    let weight = kinetic_weight(species);
    match model.energy_total_kernel(t) {
        Ok(v) => Ok(EnergyTotal::Finite { value: weight * v }),
        Err(Error::Divergent(_)) if t.is_infinite() => {
            let times = decade_times(
                GROWTH_DECADE_START * growth_time_scale(model),
                GROWTH_SAMPLES,
            );
            let values = times
                .iter()
                .map(|&s| model.energy_total_kernel(s))
                .collect::<Result<Vec<_>>>()?;
            let fit = fit_growth_exponent(&times, &values)?;
            Ok(EnergyTotal::Unbounded {
                exponent: fit.exponent,
                stderr: fit.stderr,
            })
        }
        Err(e) => Err(e),
    }
}

/// Photon power per unit photon energy radiated by a hydrogen atom.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpectrumPoint {
    pub photon_energy: f64,
    pub power_per_energy: f64,
    /// ln of `power_per_energy`, finite even when the value underflows.
    pub log_power_per_energy: f64,
    pub below_threshold: bool,
}

/// dP/dp for a hydrogen atom in a thermal or dilute field of mass μ.
/// Photons with p ≤ μ cannot be emitted.
pub fn gamma_spectrum(model: &NoiseModel, photon_energy: f64) -> Result<SpectrumPoint> {
    let (mass, temperature, chemical_potential, coupling, dilute) = match model {
        NoiseModel::Thermal(m) => (
            m.mass,
            m.temperature,
            m.chemical_potential,
            m.coupling,
            false,
        ),
        NoiseModel::DiluteNr(m) => (
            m.mass,
            m.temperature,
            m.chemical_potential,
            m.coupling,
            true,
        ),
        other => {
            return Err(Error::WrongModel {
                expected: "thermal or dilute",
                found: other.tag(),
            })
        }
    };
    let p = photon_energy;
    if !(p > 0.0 && p.is_finite()) {
        return Err(Error::Domain(format!(
            "photon energy must be positive, got {p}"
        )));
    }
    if p <= mass {
        return Ok(SpectrumPoint {
            photon_energy: p,
            power_per_energy: 0.0,
            log_power_per_energy: f64::NEG_INFINITY,
            below_threshold: true,
        });
    }
    let a0 = cm_to_natural(BOHR_RADIUS_CM);
    let x = (0.5 * p * a0).powi(2);
    // 1 − 1/(1+x)² = x(2+x)/(1+x)²
    let atomic = x * (2.0 + x) / (1.0 + x).powi(2);
    let k2 = (p - mass) * (p + mass);
    let exponent = (p - chemical_potential) / temperature;
    let log_occupation = if dilute {
        -exponent
    } else {
        -exponent - (-(-exponent).exp()).ln_1p()
    };
    let log_power = (2.0 * atomic * coupling * E_SQUARED / (3.0 * PI * PI * p)).ln()
        + 1.5 * k2.ln()
        + log_occupation;
    Ok(SpectrumPoint {
        photon_energy: p,
        power_per_energy: log_power.exp(),
        log_power_per_energy: log_power,
        below_threshold: false,
    })
}

/// Boltzmann suppression exponent 3(p−μ)/(μv²) of emission at photon
/// energy p from a dilute field with rms velocity v.
pub fn gamma_suppression_exponent(photon_energy: f64, mass: f64, v_rms: f64) -> f64 {
    3.0 * (photon_energy - mass) / (mass * v_rms * v_rms)
}

/// Result of the Markovian validity diagnostic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MarkovDiagnostic {
    pub k_max: f64,
    pub particle_mass: f64,
    /// k_max/(2m); the Markovian approximation needs this ≪ 1.
    pub ratio: f64,
}

impl MarkovDiagnostic {
    /// The free-particle operator function O(s−t) for wave vector k and
    /// momentum p.
    pub fn operator(&self, k: [f64; 3], p: [f64; 3], lag: f64) -> f64 {
        markov_operator(self.particle_mass, k, p, lag)
    }
}

pub fn markov_operator(mass: f64, k: [f64; 3], p: [f64; 3], lag: f64) -> f64 {
    let k2 = k.iter().map(|v| v * v).sum::<f64>();
    let kp = k.iter().zip(&p).map(|(a, b)| a * b).sum::<f64>();
    let doppler = kp / mass * lag;
    let recoil = k2 / (2.0 * mass) * lag;
    k2 * doppler.cos() * recoil.cos() - 2.0 * kp * doppler.sin() * recoil.sin()
}

/// Wave number at which the spectral weight cuts off.
pub fn cutoff_wavenumber(model: &NoiseModel) -> Result<f64> {
    match model {
        NoiseModel::WhiteCsl(m) => Ok(m.correlation_length.recip()),
        NoiseModel::CutoffProduct(m) if m.spectrum.is_band_limited() => {
            Ok(m.correlation_length.recip())
        }
        NoiseModel::CutoffProduct(_) => Err(Error::Unsupported(
            "product model without a high-frequency cutoff has no characteristic wave number"
                .into(),
        )),
        NoiseModel::Thermal(m) => Ok((2.0 * m.mass * m.temperature).sqrt()),
        NoiseModel::DiluteNr(m) => Ok((2.0 * m.mass * m.temperature).sqrt()),
        NoiseModel::Unparticle(m) => Ok(m.temperature),
    }
}

pub fn markov_diagnostic(model: &NoiseModel, particle_mass: f64) -> Result<MarkovDiagnostic> {
    if !(particle_mass > 0.0 && particle_mass.is_finite()) {
        return Err(Error::Domain("particle mass must be positive".into()));
    }
    let k_max = cutoff_wavenumber(model)?;
    Ok(MarkovDiagnostic {
        k_max,
        particle_mass,
        ratio: k_max / (2.0 * particle_mass),
    })
}

/// Lindblad kernel 2m²γF̂(k,t) of the single-particle master equation.
pub fn lindblad_kernel(model: &NoiseModel, mass: f64, k: f64, t: f64) -> Result<f64> {
    if k < 0.0 || k.is_nan() {
        return Err(Error::Domain(format!(
            "wave number must be non-negative, got {k}"
        )));
    }
    Ok(2.0 * mass * mass * model.coupling() * model.fourier_fhat(k, t)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::units::{parse_quantity, KEV, NUCLEON_MASS};

    #[test]
    fn white_rate_routes_agree() {
        let model = NoiseModel::white(2.0, 1.5).unwrap();
        let sp = [ParticleSpecies::nucleon(3.0)];
        let q = energy_rate(&model, &sp, 1.0).unwrap();
        let c = white_energy_rate_closed(&model, &sp).unwrap();
        assert!((q / c - 1.0).abs() < 1e-8, "{q} {c}");
    }

    #[test]
    fn growth_fit_recovers_power() {
        let t = decade_times(10.0, 11);
        let v: Vec<f64> = t.iter().map(|x| 3.0 * x.powf(0.7)).collect();
        let fit = fit_growth_exponent(&t, &v).unwrap();
        assert!((fit.exponent - 0.7).abs() < 1e-12);
        assert!(fit.stderr < 1e-10);
    }

    #[test]
    fn white_total_is_unbounded_linear() {
        let model = NoiseModel::white(1.0, 1.0).unwrap();
        match energy_total(&model, &[ParticleSpecies::nucleon(1.0)], f64::INFINITY).unwrap() {
            EnergyTotal::Unbounded { exponent, .. } => assert!((exponent - 1.0).abs() < 1e-9),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn spectrum_threshold_and_bracket() {
        let model = NoiseModel::thermal(10.0 * KEV, 1.0 * KEV, 0.0, 1.0).unwrap();
        let below = gamma_spectrum(&model, 5.0 * KEV).unwrap();
        assert!(below.below_threshold && below.power_per_energy == 0.0);
        let above = gamma_spectrum(&model, 10.001 * KEV).unwrap();
        assert!(!above.below_threshold && above.power_per_energy > 0.0);
        assert!((above.power_per_energy.ln() - above.log_power_per_energy).abs() < 1e-9);
    }

    #[test]
    fn markov_operator_at_zero_lag() {
        let diag = markov_diagnostic(&NoiseModel::white(1.0, 1e3).unwrap(), NUCLEON_MASS).unwrap();
        assert_eq!(diag.operator([1.0, 2.0, 2.0], [0.3, -0.1, 5.0], 0.0), 9.0);
    }

    #[test]
    fn unbounded_product_has_no_cutoff() {
        let model =
            NoiseModel::cutoff_product(SpectralShape::Constant { level: 1.0 }, 1.0).unwrap();
        assert!(matches!(
            markov_diagnostic(&model, 1.0),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn lindblad_white() {
        let rc = parse_quantity("1e-5 cm", -1).unwrap();
        let model = NoiseModel::white(3.0, rc).unwrap();
        let k = 0.7 / rc;
        let v = lindblad_kernel(&model, 2.0, k, 5.0).unwrap();
        let expected = 4.0 * 3.0 * (-0.49f64).exp();
        assert!((v / expected - 1.0).abs() < 1e-14);
    }
}
