//! Noise kernels D(r,t), F(r,t) = ∫₀ᵗD, I(r,t) = ∫₀ᵗF and the spatial
//! Fourier transforms F̂(k,t), Î(k,t) for the five correlator families.
//!
//! Everything is in natural units. Kernels are isotropic, so the angular
//! average is taken analytically and only radial integrals remain.

use std::f64::consts::PI;
use std::fs::File;
use std::io::Read;
use std::path::Path;

use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::quadrature::{
    try_integrate_finite, try_integrate_power_finite, try_integrate_power_semi_infinite,
    try_integrate_semi_infinite, QuadError, QuadratureSpec,
};

/// Which time integral of the correlator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelKind {
    /// D(r,t) itself.
    Correlator,
    /// F(r,t) = ∫₀ᵗ D(r,s) ds.
    FirstIntegral,
    /// I(r,t) = ∫₀ᵗ F(r,s) ds.
    SecondIntegral,
}

/// Full kernel K(r) or the subtracted form K(0) − K(r).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Spatial {
    Full,
    Difference,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Temporal {
    Cos,
    Sin,
    OneMinusCos,
}

impl KernelKind {
    fn temporal(self) -> Temporal {
        match self {
            KernelKind::Correlator => Temporal::Cos,
            KernelKind::FirstIntegral => Temporal::Sin,
            KernelKind::SecondIntegral => Temporal::OneMinusCos,
        }
    }

    fn energy_power(self) -> i32 {
        match self {
            KernelKind::Correlator => 1,
            KernelKind::FirstIntegral => 2,
            KernelKind::SecondIntegral => 3,
        }
    }
}

pub fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

/// 1 − sin(x)/x without cancellation at small x.
pub fn one_minus_sinc(x: f64) -> f64 {
    if x.abs() < 1e-2 {
        let x2 = x * x;
        x2 / 6.0 * (1.0 - x2 / 20.0 * (1.0 - x2 / 42.0 * (1.0 - x2 / 72.0)))
    } else {
        1.0 - x.sin() / x
    }
}

/// 1 − cos(x) without cancellation at small x.
pub fn one_minus_cos(x: f64) -> f64 {
    let s = (0.5 * x).sin();
    2.0 * s * s
}

/// Sine integral Si(x) = ∫₀ˣ sin(u)/u du.
pub fn sine_integral(x: f64) -> Result<f64> {
    if x < 0.0 {
        return Ok(-sine_integral(-x)?);
    }
    if x > 50.0 {
        let x2 = x * x;
        let (mut f, mut g) = (0.0, 0.0);
        let (mut tf, mut tg) = (1.0, 1.0);
        for k in 0..10 {
            f += tf;
            g += tg;
            let k = k as f64;
            tf *= -(2.0 * k + 1.0) * (2.0 * k + 2.0) / x2;
            tg *= -(2.0 * k + 2.0) * (2.0 * k + 3.0) / x2;
        }
        return Ok(PI / 2.0 - x.cos() / x * f - x.sin() / x2 * g);
    }
    let spec = QuadratureSpec::default()
        .with_rel_tol(1e-12)
        .with_period(Some(2.0 * PI));
    Ok(try_integrate_finite(|u| Ok(sinc(u)), 0.0, x, &spec)?.into_value()?)
}

/// Normalized Gaussian smearing (4π r_C²)^{-3/2} e^{−r²/4r_C²}.
pub fn gaussian_smearing(r: f64, correlation_length: f64) -> f64 {
    let rc2 = correlation_length * correlation_length;
    (4.0 * PI * rc2).powf(-1.5) * (-r * r / (4.0 * rc2)).exp()
}

/// G(0) − G(r) without cancellation at small r.
fn gaussian_smearing_difference(r: f64, correlation_length: f64) -> f64 {
    let rc2 = correlation_length * correlation_length;
    -(4.0 * PI * rc2).powf(-1.5) * (-r * r / (4.0 * rc2)).exp_m1()
}

fn check_positive(name: &str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "{name} must be positive and finite, got {value}"
        )))
    }
}

fn check_time(t: f64) -> Result<()> {
    if t >= 0.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("time must be >= 0, got {t}")))
    }
}

/// White-noise CSL correlator with Gaussian smearing.
#[derive(Debug, Clone, PartialEq)]
pub struct WhiteCsl {
    /// Coupling γ, mass⁻⁴.
    pub coupling: f64,
    pub correlation_length: f64,
}

/// Tabulated spectral function γ(ω): linear interpolation, zero outside.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralTable {
    omega: Vec<f64>,
    gamma: Vec<f64>,
}

impl SpectralTable {
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::Config(
                "spectral table needs at least two rows".into(),
            ));
        }
        let (omega, gamma): (Vec<f64>, Vec<f64>) = points.into_iter().unzip();
        if omega.windows(2).any(|w| !(w[1] > w[0])) || omega[0] < 0.0 {
            return Err(Error::Config(
                "spectral table frequencies must be >= 0 and strictly increasing".into(),
            ));
        }
        if gamma.iter().any(|g| !(g.is_finite() && *g >= 0.0)) {
            return Err(Error::Config(
                "spectral table values must be finite and >= 0".into(),
            ));
        }
        Ok(Self { omega, gamma })
    }

    /// Reads two-column CSV (ω in GeV, γ); `#` starts a comment and a
    /// non-numeric first row is taken as a header.
    pub fn from_reader<R: Read>(reader: R) -> Result<Self> {
        let mut csv = csv::ReaderBuilder::new()
            .has_headers(false)
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(reader);
        let mut points = Vec::new();
        for (row, record) in csv.records().enumerate() {
            let record = record.map_err(|e| Error::Config(format!("spectral table: {e}")))?;
            if record.len() != 2 {
                return Err(Error::Config(format!(
                    "spectral table row {} needs two columns",
                    row + 1
                )));
            }
            let parsed = (record[0].parse::<f64>(), record[1].parse::<f64>());
            match parsed {
                (Ok(w), Ok(g)) => points.push((w, g)),
                _ if row == 0 => continue,
                _ => {
                    return Err(Error::Config(format!(
                        "spectral table row {} is not numeric",
                        row + 1
                    )))
                }
            }
        }
        Self::new(points)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let file =
            File::open(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_reader(file)
    }

    pub fn eval(&self, omega: f64) -> f64 {
        let n = self.omega.len();
        if omega < self.omega[0] || omega > self.omega[n - 1] {
            return 0.0;
        }
        let i = self.omega.partition_point(|&w| w <= omega).clamp(1, n - 1);
        let (w0, w1) = (self.omega[i - 1], self.omega[i]);
        let (g0, g1) = (self.gamma[i - 1], self.gamma[i]);
        g0 + (g1 - g0) * (omega - w0) / (w1 - w0)
    }

    pub fn points(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.omega.iter().copied().zip(self.gamma.iter().copied())
    }

    fn vanishes_near_zero(&self) -> bool {
        self.omega[0] > 0.0 || (self.gamma[0] == 0.0 && self.gamma[1] == 0.0)
    }

    /// (1/π) Σ over segments of ∫ γ(ω) w(ω) dω.
    fn transform<W>(&self, weight: W, period: Option<f64>) -> Result<f64>
    where
        W: Fn(f64) -> f64,
    {
        let spec = QuadratureSpec::default()
            .with_rel_tol(1e-11)
            .with_period(period);
        let mut total = 0.0;
        for i in 1..self.omega.len() {
            let (a, b) = (self.omega[i - 1], self.omega[i]);
            if self.gamma[i - 1] == 0.0 && self.gamma[i] == 0.0 {
                continue;
            }
            total += try_integrate_finite(|w| Ok(self.eval(w) * weight(w)), a, b, &spec)?
                .into_value()?;
        }
        Ok(total / PI)
    }
}

/// Frequency profile γ(ω) of a product correlator.
#[derive(Debug, Clone, PartialEq)]
pub enum SpectralShape {
    Constant {
        level: f64,
    },
    /// γ₀ θ(ω_c − ω).
    Step {
        level: f64,
        cutoff: f64,
    },
    /// γ₀ ω²/(ω² + ω₀²), vanishing in the infrared.
    HighPass {
        level: f64,
        corner: f64,
    },
    Tabulated(SpectralTable),
}

impl SpectralShape {
    pub fn eval(&self, omega: f64) -> f64 {
        let omega = omega.abs();
        match self {
            SpectralShape::Constant { level } => *level,
            SpectralShape::Step { level, cutoff } => {
                if omega < *cutoff {
                    *level
                } else {
                    0.0
                }
            }
            SpectralShape::HighPass { level, corner } => {
                level * omega * omega / (omega * omega + corner * corner)
            }
            SpectralShape::Tabulated(table) => table.eval(omega),
        }
    }

    /// True when γ(ω) has bounded frequency support.
    pub fn is_band_limited(&self) -> bool {
        matches!(
            self,
            SpectralShape::Step { .. } | SpectralShape::Tabulated(_)
        )
    }

    /// δ_γ(t) = (1/π) ∫₀^∞ γ(ω) cos(ωt) dω.
    fn correlator_factor(&self, t: f64) -> Result<f64> {
        let t = t.abs();
        match self {
            SpectralShape::Constant { .. } => {
                Err(Error::DistributionalKernel("constant-spectrum product"))
            }
            SpectralShape::Step { level, cutoff } => Ok(level * cutoff / PI * sinc(cutoff * t)),
            SpectralShape::HighPass { level, corner } => {
                if t == 0.0 {
                    Err(Error::DistributionalKernel("high-pass product"))
                } else {
                    Ok(-0.5 * level * corner * (-corner * t).exp())
                }
            }
            SpectralShape::Tabulated(table) => {
                table.transform(|w| (w * t).cos(), (t > 0.0).then(|| 2.0 * PI / t))
            }
        }
    }

    /// (1/π) ∫₀^∞ γ(ω) sin(ωt)/ω dω.
    fn first_integral_factor(&self, t: f64) -> Result<f64> {
        if t == 0.0 {
            return Ok(0.0);
        }
        if t.is_infinite() {
            return Ok(0.5 * self.eval(0.0));
        }
        match self {
            SpectralShape::Constant { level } => Ok(0.5 * level),
            SpectralShape::Step { level, cutoff } => Ok(level / PI * sine_integral(cutoff * t)?),
            SpectralShape::HighPass { level, corner } => Ok(0.5 * level * (-corner * t).exp()),
            SpectralShape::Tabulated(table) => {
                table.transform(|w| t * sinc(w * t), Some(2.0 * PI / t))
            }
        }
    }

    /// (1/π) ∫₀^∞ γ(ω)(1 − cos ωt)/ω² dω.
    fn second_integral_factor(&self, t: f64) -> Result<f64> {
        if t == 0.0 {
            return Ok(0.0);
        }
        match self {
            SpectralShape::Constant { level } => {
                if t.is_infinite() {
                    Err(Error::Divergent(
                        "I grows linearly in t for a constant spectrum".into(),
                    ))
                } else {
                    Ok(0.5 * level * t)
                }
            }
            SpectralShape::Step { level, cutoff } => {
                if t.is_infinite() {
                    Err(Error::Divergent(
                        "I grows linearly in t when γ(0) > 0".into(),
                    ))
                } else {
                    let x = cutoff * t;
                    Ok(level / PI * (t * sine_integral(x)? - one_minus_cos(x) / cutoff))
                }
            }
            SpectralShape::HighPass { level, corner } => {
                if t.is_infinite() {
                    Ok(0.5 * level / corner)
                } else {
                    Ok(-0.5 * level / corner * (-corner * t).exp_m1())
                }
            }
            SpectralShape::Tabulated(table) => {
                if t.is_infinite() {
                    if table.vanishes_near_zero() && table.omega[0] > 0.0 {
                        table.transform(|w| 1.0 / (w * w), None)
                    } else {
                        Err(Error::Divergent(
                            "I(∞) diverges unless γ(ω) vanishes on a neighbourhood of 0".into(),
                        ))
                    }
                } else {
                    table.transform(
                        |w| {
                            let half = 0.5 * w * t;
                            0.5 * t * t * sinc(half) * sinc(half)
                        },
                        Some(2.0 * PI / t),
                    )
                }
            }
        }
    }
}

/// Product correlator G(r)·δ_γ(t); γ(ω) carries the full coupling.
#[derive(Debug, Clone, PartialEq)]
pub struct CutoffProduct {
    pub spectrum: SpectralShape,
    pub correlation_length: f64,
}

/// Thermal scalar-field correlator with Bose occupation.
#[derive(Debug, Clone, PartialEq)]
pub struct Thermal {
    pub mass: f64,
    pub temperature: f64,
    pub chemical_potential: f64,
    /// Coupling γ, mass⁻².
    pub coupling: f64,
}

/// Dilute nonrelativistic limit of the thermal correlator.
#[derive(Debug, Clone, PartialEq)]
pub struct DiluteNr {
    pub mass: f64,
    pub temperature: f64,
    pub chemical_potential: f64,
    pub coupling: f64,
}

/// Scale-invariant continuum of masses with scaling dimension d.
#[derive(Debug, Clone, PartialEq)]
pub struct Unparticle {
    pub dimension: f64,
    /// Energy scale Λ of the spectral weight.
    pub scale: f64,
    pub temperature: f64,
    pub chemical_potential: f64,
    pub coupling: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum NoiseModel {
    WhiteCsl(WhiteCsl),
    CutoffProduct(CutoffProduct),
    Thermal(Thermal),
    DiluteNr(DiluteNr),
    Unparticle(Unparticle),
}

/// The three subtracted kernels K(0,t) − K(r,t).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelDifferences {
    pub correlator: f64,
    pub first_integral: f64,
    pub second_integral: f64,
}

impl NoiseModel {
    pub fn white(coupling: f64, correlation_length: f64) -> Result<Self> {
        check_positive("coupling", coupling)?;
        check_positive("correlation length", correlation_length)?;
        Ok(NoiseModel::WhiteCsl(WhiteCsl {
            coupling,
            correlation_length,
        }))
    }

    pub fn cutoff_product(spectrum: SpectralShape, correlation_length: f64) -> Result<Self> {
        check_positive("correlation length", correlation_length)?;
        match &spectrum {
            SpectralShape::Constant { level } => check_positive("spectral level", *level)?,
            SpectralShape::Step { level, cutoff } => {
                check_positive("spectral level", *level)?;
                check_positive("cutoff frequency", *cutoff)?;
            }
            SpectralShape::HighPass { level, corner } => {
                check_positive("spectral level", *level)?;
                check_positive("corner frequency", *corner)?;
            }
            SpectralShape::Tabulated(_) => {}
        }
        Ok(NoiseModel::CutoffProduct(CutoffProduct {
            spectrum,
            correlation_length,
        }))
    }

    pub fn thermal(
        mass: f64,
        temperature: f64,
        chemical_potential: f64,
        coupling: f64,
    ) -> Result<Self> {
        check_positive("mass", mass)?;
        check_positive("temperature", temperature)?;
        check_positive("coupling", coupling)?;
        if !(chemical_potential <= 0.0) {
            return Err(Error::Domain(format!(
                "chemical potential must be <= 0, got {chemical_potential}"
            )));
        }
        Ok(NoiseModel::Thermal(Thermal {
            mass,
            temperature,
            chemical_potential,
            coupling,
        }))
    }

    pub fn dilute(
        mass: f64,
        temperature: f64,
        chemical_potential: f64,
        coupling: f64,
    ) -> Result<Self> {
        check_positive("mass", mass)?;
        check_positive("temperature", temperature)?;
        check_positive("coupling", coupling)?;
        if !(chemical_potential < mass) {
            return Err(Error::Domain(format!(
                "chemical potential {chemical_potential} must lie below the mass {mass}"
            )));
        }
        Ok(NoiseModel::DiluteNr(DiluteNr {
            mass,
            temperature,
            chemical_potential,
            coupling,
        }))
    }

    pub fn unparticle(
        dimension: f64,
        scale: f64,
        temperature: f64,
        chemical_potential: f64,
        coupling: f64,
    ) -> Result<Self> {
        check_positive("scaling dimension", dimension)?;
        check_positive("unparticle scale", scale)?;
        check_positive("temperature", temperature)?;
        check_positive("coupling", coupling)?;
        if !(chemical_potential <= 0.0) {
            return Err(Error::Domain(format!(
                "chemical potential must be <= 0, got {chemical_potential}"
            )));
        }
        Ok(NoiseModel::Unparticle(Unparticle {
            dimension,
            scale,
            temperature,
            chemical_potential,
            coupling,
        }))
    }

    pub fn tag(&self) -> &'static str {
        match self {
            NoiseModel::WhiteCsl(_) => "white",
            NoiseModel::CutoffProduct(_) => "cutoff",
            NoiseModel::Thermal(_) => "thermal",
            NoiseModel::DiluteNr(_) => "dilute",
            NoiseModel::Unparticle(_) => "unparticle",
        }
    }

    /// Coupling multiplying the kernel sums in rates and observables.
    ///
    /// Product correlators fold it into γ(ω), so theirs is 1.
    pub fn coupling(&self) -> f64 {
        match self {
            NoiseModel::WhiteCsl(m) => m.coupling,
            NoiseModel::CutoffProduct(_) => 1.0,
            NoiseModel::Thermal(m) => m.coupling,
            NoiseModel::DiluteNr(m) => m.coupling,
            NoiseModel::Unparticle(m) => m.coupling,
        }
    }

    /// Length beyond which spatial correlations are negligible.
    pub fn correlation_length(&self) -> Option<f64> {
        match self {
            NoiseModel::WhiteCsl(m) => Some(m.correlation_length),
            NoiseModel::CutoffProduct(m) => Some(m.correlation_length),
            NoiseModel::DiluteNr(m) => Some((2.0 * m.mass * m.temperature).sqrt().recip()),
            NoiseModel::Thermal(_) | NoiseModel::Unparticle(_) => None,
        }
    }

    /// Warning text when the dilute expansion is being used outside T ≪ μ.
    pub fn validity_warning(&self) -> Option<String> {
        match self {
            NoiseModel::DiluteNr(m) if m.temperature / m.mass >= 0.1 => Some(format!(
                "dilute nonrelativistic kernel used at T/mu = {:.3}; expansion requires T << mu",
                m.temperature / m.mass
            )),
            _ => None,
        }
    }

    fn radial(&self) -> Option<Radial> {
        match self {
            NoiseModel::Thermal(m) => Some(Radial {
                mass: m.mass,
                temperature: m.temperature,
                chemical_potential: m.chemical_potential,
                dilute: false,
            }),
            NoiseModel::DiluteNr(m) => Some(Radial {
                mass: m.mass,
                temperature: m.temperature,
                chemical_potential: m.chemical_potential,
                dilute: true,
            }),
            _ => None,
        }
    }

    /// General kernel evaluation.
    pub fn kernel(&self, kind: KernelKind, spatial: Spatial, r: f64, t: f64) -> Result<f64> {
        let r = r.abs();
        if kind != KernelKind::Correlator {
            check_time(t)?;
        }
        if spatial == Spatial::Difference && r == 0.0 {
            return Ok(0.0);
        }
        match self {
            NoiseModel::WhiteCsl(m) => {
                let g = match spatial {
                    Spatial::Full => gaussian_smearing(r, m.correlation_length),
                    Spatial::Difference => gaussian_smearing_difference(r, m.correlation_length),
                };
                match kind {
                    KernelKind::Correlator => Err(Error::DistributionalKernel("white-noise")),
                    KernelKind::FirstIntegral => Ok(0.5 * g),
                    KernelKind::SecondIntegral if t.is_infinite() => {
                        Err(Error::Divergent("white-noise I grows linearly in t".into()))
                    }
                    KernelKind::SecondIntegral => Ok(0.5 * g * t),
                }
            }
            NoiseModel::CutoffProduct(m) => {
                let g = match spatial {
                    Spatial::Full => gaussian_smearing(r, m.correlation_length),
                    Spatial::Difference => gaussian_smearing_difference(r, m.correlation_length),
                };
                let factor = match kind {
                    KernelKind::Correlator => m.spectrum.correlator_factor(t)?,
                    KernelKind::FirstIntegral => m.spectrum.first_integral_factor(t)?,
                    KernelKind::SecondIntegral => m.spectrum.second_integral_factor(t)?,
                };
                Ok(g * factor)
            }
            NoiseModel::Thermal(_) => self.radial_quadrature(kind, spatial, r, t),
            NoiseModel::DiluteNr(m) => {
                let (full, diff) = dilute_kernels(m, r, t.abs());
                let pick = |k: &KernelDifferences| match kind {
                    KernelKind::Correlator => k.correlator,
                    KernelKind::FirstIntegral => k.first_integral,
                    KernelKind::SecondIntegral => k.second_integral,
                };
                Ok(match spatial {
                    Spatial::Full => pick(&full),
                    Spatial::Difference => pick(&diff),
                })
            }
            NoiseModel::Unparticle(m) => m.kernel(kind, spatial, r, t),
        }
    }

    /// D(r,t).
    pub fn corr_d(&self, r: f64, t: f64) -> Result<f64> {
        self.kernel(KernelKind::Correlator, Spatial::Full, r, t)
    }

    /// D(0,t) − D(r,t).
    pub fn corr_d_diff(&self, r: f64, t: f64) -> Result<f64> {
        self.kernel(KernelKind::Correlator, Spatial::Difference, r, t)
    }

    /// F(r,t).
    pub fn corr_f(&self, r: f64, t: f64) -> Result<f64> {
        self.kernel(KernelKind::FirstIntegral, Spatial::Full, r, t)
    }

    /// F(0,t) − F(r,t).
    pub fn corr_f_diff(&self, r: f64, t: f64) -> Result<f64> {
        self.kernel(KernelKind::FirstIntegral, Spatial::Difference, r, t)
    }

    /// I(r,t).
    pub fn corr_i(&self, r: f64, t: f64) -> Result<f64> {
        self.kernel(KernelKind::SecondIntegral, Spatial::Full, r, t)
    }

    /// I(0,t) − I(r,t); `t` may be infinite where the limit exists.
    pub fn corr_i_diff(&self, r: f64, t: f64) -> Result<f64> {
        self.kernel(KernelKind::SecondIntegral, Spatial::Difference, r, t)
    }

    /// Spatial Fourier transform F̂(k,t).
    pub fn fourier_fhat(&self, k: f64, t: f64) -> Result<f64> {
        check_time(t)?;
        let k = k.abs();
        match self {
            NoiseModel::WhiteCsl(m) => Ok(0.5 * (-k * k * m.correlation_length.powi(2)).exp()),
            NoiseModel::CutoffProduct(m) => Ok((-k * k * m.correlation_length.powi(2)).exp()
                * m.spectrum.first_integral_factor(t)?),
            NoiseModel::Thermal(_) | NoiseModel::DiluteNr(_) => {
                let radial = self.radial().expect("radial model");
                radial.mode(k, 2, Temporal::Sin, t)
            }
            NoiseModel::Unparticle(m) => m.fourier_fhat(k, t),
        }
    }

    /// Î(k,t) = ∫₀ᵗ F̂(k,s) ds.
    pub fn fourier_ihat(&self, k: f64, t: f64) -> Result<f64> {
        check_time(t)?;
        let k = k.abs();
        match self {
            NoiseModel::WhiteCsl(m) => Ok(0.5 * t * (-k * k * m.correlation_length.powi(2)).exp()),
            NoiseModel::CutoffProduct(m) => Ok((-k * k * m.correlation_length.powi(2)).exp()
                * m.spectrum.second_integral_factor(t)?),
            NoiseModel::Thermal(_) | NoiseModel::DiluteNr(_) => {
                let radial = self.radial().expect("radial model");
                radial.mode(k, 3, Temporal::OneMinusCos, t)
            }
            NoiseModel::Unparticle(_) => Err(Error::Unsupported(
                "time-integrated Fourier kernel for the unparticle model".into(),
            )),
        }
    }

    /// The angular-averaged radial k-integral for thermal-type models,
    /// (1/2π²)∫k² N(k)/ω_kᵖ S(kr) T(ω_k t) dk, evaluated by quadrature.
    ///
    /// For the dilute model N, 1/ω and the phase use their nonrelativistic
    /// forms.
    pub fn radial_quadrature(
        &self,
        kind: KernelKind,
        spatial: Spatial,
        r: f64,
        t: f64,
    ) -> Result<f64> {
        let radial = self.radial().ok_or(Error::WrongModel {
            expected: "thermal or dilute",
            found: self.tag(),
        })?;
        let scaled = radial.integral(
            2,
            kind.energy_power(),
            Some((r.abs(), spatial)),
            kind.temporal(),
            t,
        )?;
        Ok(scaled.value())
    }

    /// Closed-form subtracted kernels of the dilute model.
    pub fn dilute_closed_forms(&self, r: f64, t: f64) -> Result<KernelDifferences> {
        match self {
            NoiseModel::DiluteNr(m) => {
                check_time(t)?;
                Ok(dilute_kernels(m, r.abs(), t).1)
            }
            other => Err(Error::WrongModel {
                expected: "dilute",
                found: other.tag(),
            }),
        }
    }

    /// γ/(2π²) ∫ k⁴ F̂(k,t) dk, the energy production rate per unit Σm²/M.
    pub(crate) fn energy_rate_kernel(&self, t: f64) -> Result<f64> {
        check_time(t)?;
        let coupling = self.coupling();
        match self {
            NoiseModel::Thermal(_) | NoiseModel::DiluteNr(_) => {
                let radial = self.radial().expect("radial model");
                Ok(coupling * radial.integral(4, 2, None, Temporal::Sin, t)?.value())
            }
            NoiseModel::Unparticle(m) => m.energy_kernel(Temporal::Sin, t),
            _ => Ok(coupling * fourier_k4_integral(self, t)?),
        }
    }

    /// γ/(2π²) ∫ k⁴ Î(k,t) dk, the energy deposited per unit Σm²/M.
    pub(crate) fn energy_total_kernel(&self, t: f64) -> Result<f64> {
        check_time(t)?;
        let coupling = self.coupling();
        match self {
            NoiseModel::Thermal(_) | NoiseModel::DiluteNr(_) => {
                let radial = self.radial().expect("radial model");
                Ok(coupling
                    * radial
                        .integral(4, 3, None, Temporal::OneMinusCos, t)?
                        .value())
            }
            NoiseModel::Unparticle(m) => m.energy_kernel(Temporal::OneMinusCos, t),
            NoiseModel::WhiteCsl(_) if t.is_infinite() => Err(Error::Divergent(
                "white noise heats at a constant rate".into(),
            )),
            NoiseModel::WhiteCsl(_) => Ok(t * self.energy_rate_kernel(t)?),
            NoiseModel::CutoffProduct(m) => {
                let rc = m.correlation_length;
                Ok(3.0 / (16.0 * PI.powf(1.5) * rc.powi(5))
                    * m.spectrum.second_integral_factor(t)?)
            }
        }
    }
}

/// (1/2π²) ∫₀^∞ k⁴ F̂(k,t) dk by quadrature over k.
pub(crate) fn fourier_k4_integral(model: &NoiseModel, t: f64) -> Result<f64> {
    let scale = match model {
        NoiseModel::WhiteCsl(m) => m.correlation_length.recip(),
        NoiseModel::CutoffProduct(m) => m.correlation_length.recip(),
        NoiseModel::Thermal(m) => (m.mass * m.temperature).sqrt() + m.temperature,
        NoiseModel::DiluteNr(m) => (m.mass * m.temperature).sqrt(),
        NoiseModel::Unparticle(m) => m.temperature,
    };
    let spec = QuadratureSpec::default();
    let r = try_integrate_semi_infinite(
        |kappa| {
            let k = scale * kappa;
            let fhat = model.fourier_fhat(k, t).map_err(quad_error)?;
            Ok(kappa.powi(4) * fhat)
        },
        &spec,
    )?;
    Ok(scale.powi(5) * r.into_value()? / (2.0 * PI * PI))
}

fn quad_error(e: Error) -> QuadError {
    match e {
        Error::Quadrature(q) => q,
        other => QuadError::InvalidSpec(other.to_string()),
    }
}

/// Value with its logarithmic prefactor kept separate to avoid underflow.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Scaled {
    pub log_scale: f64,
    pub integral: f64,
}

impl Scaled {
    pub fn value(self) -> f64 {
        if self.integral == 0.0 {
            0.0
        } else {
            self.integral * self.log_scale.exp()
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Radial {
    mass: f64,
    temperature: f64,
    chemical_potential: f64,
    dilute: bool,
}

impl Radial {
    fn momentum_scale(&self) -> f64 {
        if self.dilute {
            (self.mass * self.temperature).sqrt()
        } else {
            (self.mass * self.temperature).sqrt() + self.temperature
        }
    }

    fn energy(&self, k: f64) -> f64 {
        (k * k + self.mass * self.mass).sqrt()
    }

    /// ω_k − μ.
    fn energy_offset(&self, k: f64) -> f64 {
        if self.dilute {
            k * k / (2.0 * self.mass)
        } else {
            k * k / (self.energy(k) + self.mass)
        }
    }

    /// Occupation relative to e^{−(μ−ζ)/T}.
    fn occupation(&self, k: f64) -> f64 {
        let offset = self.energy_offset(k) / self.temperature;
        if self.dilute {
            (-offset).exp()
        } else {
            let x = (self.energy(k) - self.chemical_potential) / self.temperature;
            (-offset).exp() / -(-x).exp_m1()
        }
    }

    /// (μ/ω)ᵖ, or 1 in the dilute limit.
    fn energy_ratio(&self, k: f64, power: i32) -> f64 {
        if self.dilute {
            1.0
        } else {
            (self.mass / self.energy(k)).powi(power)
        }
    }

    fn k_max(&self) -> f64 {
        if self.dilute {
            (80.0 * self.mass * self.temperature).sqrt()
        } else {
            let w = self.mass + 40.0 * self.temperature;
            (w * w - self.mass * self.mass).sqrt()
        }
    }

    fn group_velocity(&self, k: f64) -> f64 {
        if self.dilute {
            k / self.mass
        } else {
            k / self.energy(k)
        }
    }

    fn log_prefactor(&self, energy_power: i32) -> f64 {
        -(self.mass - self.chemical_potential) / self.temperature
            - energy_power as f64 * self.mass.ln()
    }

    /// (1/2π²) ∫ k^{k_power} N/ωᵖ S(kr) T(ωt) dk.
    fn integral(
        &self,
        k_power: i32,
        energy_power: i32,
        spatial: Option<(f64, Spatial)>,
        temporal: Temporal,
        t: f64,
    ) -> Result<Scaled> {
        let s = self.momentum_scale();
        let log_scale =
            self.log_prefactor(energy_power) + (k_power + 1) as f64 * s.ln() - (2.0 * PI * PI).ln();
        if t.is_infinite() && temporal != Temporal::OneMinusCos {
            return Err(Error::Domain(
                "the correlator has no limit at t = infinity".into(),
            ));
        }
        let t = if temporal == Temporal::Cos {
            t.abs()
        } else {
            t
        };
        if t == 0.0 && temporal != Temporal::Cos {
            return Ok(Scaled {
                log_scale,
                integral: 0.0,
            });
        }
        let r = spatial.map_or(0.0, |(r, _)| r);
        if let Some((r, Spatial::Difference)) = spatial {
            if r == 0.0 {
                return Ok(Scaled {
                    log_scale,
                    integral: 0.0,
                });
            }
        }
        let phase = Phase::new(self.mass, t);
        let k_max = self.k_max();
        let time_freq = if t.is_finite() {
            t * self.group_velocity(k_max)
        } else {
            0.0
        };
        let total_phase = r * k_max + time_freq * k_max;
        let period = (total_phase > PI).then(|| 2.0 * PI / (s * (r + time_freq)));
        let spec = QuadratureSpec::default().with_period(period);

        let integrand = |kappa: f64| -> std::result::Result<f64, QuadError> {
            let k = s * kappa;
            let occ = self.occupation(k);
            if occ == 0.0 {
                return Ok(0.0);
            }
            let mut v = kappa.powi(k_power) * occ * self.energy_ratio(k, energy_power);
            if let Some((r, sp)) = spatial {
                v *= match sp {
                    Spatial::Full => sinc(k * r),
                    Spatial::Difference => one_minus_sinc(k * r),
                };
            }
            // At t = ∞ only 1 − cos survives, with the cosine dropped.
            if t.is_finite() {
                v *= phase.eval(temporal, self.energy_offset(k) * t);
            }
            Ok(v)
        };
        let r = try_integrate_semi_infinite(integrand, &spec)?;
        Ok(Scaled {
            log_scale,
            integral: r.into_value()?,
        })
    }

    /// Single Fourier mode N(k)/ωᵖ T(ω t).
    fn mode(&self, k: f64, energy_power: i32, temporal: Temporal, t: f64) -> Result<f64> {
        if t.is_infinite() {
            return Err(Error::Domain(
                "the Fourier kernel has no limit at t = infinity".into(),
            ));
        }
        let phase = Phase::new(self.mass, t);
        let log = self.log_prefactor(energy_power);
        let v = self.occupation(k)
            * self.energy_ratio(k, energy_power)
            * phase.eval(temporal, self.energy_offset(k) * t);
        Ok(if v == 0.0 { 0.0 } else { v * log.exp() })
    }
}

/// Trigonometric factors of μt + δ with the large carrier phase μt
/// evaluated once.
#[derive(Debug, Clone, Copy)]
struct Phase {
    cos_full: f64,
    sin_full: f64,
    cos_half: f64,
    sin_half: f64,
}

impl Phase {
    fn new(mass: f64, t: f64) -> Self {
        let carrier = if t.is_finite() { mass * t } else { 0.0 };
        Self {
            cos_full: carrier.cos(),
            sin_full: carrier.sin(),
            cos_half: (0.5 * carrier).cos(),
            sin_half: (0.5 * carrier).sin(),
        }
    }

    fn eval(&self, temporal: Temporal, delta: f64) -> f64 {
        match temporal {
            Temporal::Cos => self.cos_full * delta.cos() - self.sin_full * delta.sin(),
            Temporal::Sin => self.sin_full * delta.cos() + self.cos_full * delta.sin(),
            Temporal::OneMinusCos => {
                let s = self.sin_half * (0.5 * delta).cos() + self.cos_half * (0.5 * delta).sin();
                2.0 * s * s
            }
        }
    }
}

/// Full and subtracted dilute kernels in closed form. `t` may be infinite.
fn dilute_kernels(m: &DiluteNr, r: f64, t: f64) -> (KernelDifferences, KernelDifferences) {
    let (mu, temp) = (m.mass, m.temperature);
    let amp = (-(mu - m.chemical_potential) / temp).exp() * (mu * temp / (2.0 * PI)).powf(1.5);
    let spread = -0.5 * mu * temp * r * r;
    if t.is_infinite() {
        let i_full = amp / mu.powi(3) * spread.exp();
        let i_diff = -amp / mu.powi(3) * spread.exp_m1();
        let zero = KernelDifferences {
            correlator: 0.0,
            first_integral: 0.0,
            second_integral: i_full,
        };
        let diff = KernelDifferences {
            correlator: 0.0,
            first_integral: 0.0,
            second_integral: i_diff,
        };
        return (zero, diff);
    }
    let tt = t * temp;
    let denom = 1.0 + tt * tt;
    let decay = denom.powf(-0.75);
    let theta = mu * t + 1.5 * tt.atan();
    let g = (spread / denom).exp();
    let phi = 0.5 * mu * t * temp * temp * r * r / denom;
    let (c0, s0) = (theta.cos(), theta.sin());
    let (cr, sr) = ((theta - phi).cos(), (theta - phi).sin());
    let full = KernelDifferences {
        correlator: amp / mu * decay * g * cr,
        first_integral: amp / mu.powi(2) * decay * g * sr,
        second_integral: amp / mu.powi(3) * (spread.exp() - decay * g * cr),
    };
    // cos θ − g cos(θ−φ) and sin θ − g sin(θ−φ), split to avoid cancellation
    // when g → 1 and φ → 0.
    let one_minus_g = -(spread / denom).exp_m1();
    let cos_gap = c0 - cr + one_minus_g * cr;
    let sin_gap = s0 - sr + one_minus_g * sr;
    let cos_shift = -2.0 * (theta - 0.5 * phi).sin() * (0.5 * phi).sin();
    let sin_shift = 2.0 * (theta - 0.5 * phi).cos() * (0.5 * phi).sin();
    let cos_gap = if phi.abs() < 1e-3 {
        cos_shift + one_minus_g * cr
    } else {
        cos_gap
    };
    let sin_gap = if phi.abs() < 1e-3 {
        sin_shift + one_minus_g * sr
    } else {
        sin_gap
    };
    let diff = KernelDifferences {
        correlator: amp / mu * decay * cos_gap,
        first_integral: amp / mu.powi(2) * decay * sin_gap,
        second_integral: amp / mu.powi(3) * (-spread.exp_m1() - decay * cos_gap),
    };
    (full, diff)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Angular {
    One,
    Full,
    Difference,
}

const SERIES_LIMIT: f64 = 12.0;
const SERIES_TERMS: usize = 90;

impl Unparticle {
    /// Λ^{2(1−d)}.
    fn weight(&self) -> f64 {
        self.scale.powf(2.0 * (1.0 - self.dimension))
    }

    /// ½B(k+½, d)/(2k)!, the Taylor coefficients of ∫₀¹cos(av)(1−v²)^{d−1}dv.
    fn series_coefficients(&self) -> Vec<f64> {
        let d = self.dimension;
        let mut half_beta = 0.5 * (ln_gamma(0.5) + ln_gamma(d) - ln_gamma(0.5 + d)).exp();
        let mut factorial = 1.0;
        let mut out = Vec::with_capacity(SERIES_TERMS);
        for k in 0..SERIES_TERMS {
            out.push(half_beta / factorial);
            let kf = k as f64;
            half_beta *= (kf + 0.5) / (kf + 0.5 + d);
            factorial *= (2.0 * kf + 1.0) * (2.0 * kf + 2.0);
        }
        out
    }

    /// ∫₀¹ cos(av)(1−v²)^{d−1} dv by quadrature.
    fn angular_quadrature(&self, a: f64) -> std::result::Result<f64, QuadError> {
        let d = self.dimension;
        let period = (a > 0.0).then(|| 2.0 * PI / a);
        let spec = QuadratureSpec::default()
            .with_rel_tol(1e-11)
            .with_abs_tol(1e-15)
            .with_period(period);
        let lower = try_integrate_finite(
            |v| Ok((a * v).cos() * (1.0 - v * v).powf(d - 1.0)),
            0.0,
            0.5,
            &spec,
        )?;
        let upper = try_integrate_power_finite(
            |u| Ok((a * (1.0 - u)).cos() * (2.0 - u).powf(d - 1.0)),
            d - 1.0,
            0.5,
            &spec,
        )?;
        Ok(lower.into_value()? + upper.into_value()?)
    }

    fn kernel(&self, kind: KernelKind, spatial: Spatial, r: f64, t: f64) -> Result<f64> {
        if t.is_infinite() && kind != KernelKind::SecondIntegral {
            return Err(Error::Domain(
                "the correlator has no limit at t = infinity".into(),
            ));
        }
        let t = if kind == KernelKind::Correlator {
            t.abs()
        } else {
            t
        };
        let (power, temporal) = match kind {
            KernelKind::Correlator => (2.0 * self.dimension - 1.0, Temporal::Cos),
            KernelKind::FirstIntegral => (2.0 * self.dimension - 2.0, Temporal::Sin),
            KernelKind::SecondIntegral => (2.0 * self.dimension - 3.0, Temporal::OneMinusCos),
        };
        let angular = match spatial {
            Spatial::Full => Angular::Full,
            Spatial::Difference => Angular::Difference,
        };
        Ok(0.5 * self.weight() * self.omega_integral(power, temporal, angular, r, t)?)
    }

    /// ∫₀^∞ ωᵖ K(ωt) B(ω) A(ωr) dω with B the Bose factor and A the
    /// angular factor (1, V or W).
    fn omega_integral(
        &self,
        power: f64,
        temporal: Temporal,
        angular: Angular,
        r: f64,
        t: f64,
    ) -> Result<f64> {
        let temp = self.temperature;
        let z = self.chemical_potential / temp;
        let tau = if t.is_finite() {
            temp * t
        } else {
            f64::INFINITY
        };
        let rho = temp * r;
        if tau == 0.0 && temporal != Temporal::Cos {
            return Ok(0.0);
        }
        if angular == Angular::Difference && rho == 0.0 {
            return Ok(0.0);
        }
        let drop_cos = tau.is_infinite();
        let bose_order = if z == 0.0 { -1 } else { 0 };
        let time_order = match temporal {
            Temporal::Cos => 0,
            Temporal::Sin => 1,
            Temporal::OneMinusCos if drop_cos => 0,
            Temporal::OneMinusCos => 2,
        };
        let angular_order = if angular == Angular::Difference { 2 } else { 0 };
        let alpha = power + (bose_order + time_order + angular_order) as f64;
        if !(alpha > -1.0) {
            return Err(Error::Divergent(format!(
                "unparticle ω-integral with d = {} diverges at ω → 0 (zeta = 0)",
                self.dimension
            )));
        }
        let coefficients = self.series_coefficients();
        let v0 = coefficients[0] / (PI * PI);
        let mut h = |x: f64| -> std::result::Result<f64, QuadError> {
            let bose = if z == 0.0 {
                if x == 0.0 {
                    1.0
                } else {
                    x / x.exp_m1()
                }
            } else {
                1.0 / (x - z).exp_m1()
            };
            if bose == 0.0 {
                return Ok(0.0);
            }
            let time = match temporal {
                Temporal::Cos => (tau * x).cos(),
                Temporal::Sin => tau * sinc(tau * x),
                Temporal::OneMinusCos if drop_cos => 1.0,
                Temporal::OneMinusCos => {
                    let s = sinc(0.5 * tau * x);
                    0.5 * tau * tau * s * s
                }
            };
            let a = rho * x;
            let ang = match angular {
                Angular::One => 1.0,
                Angular::Full => {
                    if a <= SERIES_LIMIT {
                        series_sum(&coefficients, a, false) / (PI * PI)
                    } else {
                        self.angular_quadrature(a)? / (PI * PI)
                    }
                }
                Angular::Difference => {
                    let w_over_a2 = if a <= SERIES_LIMIT {
                        series_sum(&coefficients, a, true) / (PI * PI)
                    } else {
                        (v0 - self.angular_quadrature(a)? / (PI * PI)) / (a * a)
                    };
                    rho * rho * w_over_a2
                }
            };
            Ok(bose * time * ang)
        };
        let mut freq = 0.0;
        if tau.is_finite() {
            freq += tau;
        }
        if angular != Angular::One {
            freq += rho;
        }
        let period = (freq > 0.5).then(|| 2.0 * PI / freq);
        let spec = QuadratureSpec::default().with_period(period);
        let result = try_integrate_power_semi_infinite(&mut h, alpha, &spec)?;
        Ok(temp.powf(power + 1.0) * result.into_value()?)
    }

    /// F̂(k,t) through the continuation −Λ^{2(1−d)}∫_k^∞(ω²−k²)^{d−1} g′(ω) dω,
    /// g(ω) = sin(ωt)B(ω)/ω², valid for every d > 0 at k > 0.
    fn fourier_fhat(&self, k: f64, t: f64) -> Result<f64> {
        if t == 0.0 {
            return Ok(0.0);
        }
        if t.is_infinite() {
            return Err(Error::Domain(
                "the Fourier kernel has no limit at t = infinity".into(),
            ));
        }
        let d = self.dimension;
        let temp = self.temperature;
        let z = self.chemical_potential / temp;
        let tau = temp * t;
        let kappa = k / temp;
        if kappa == 0.0 {
            return self.fourier_fhat_at_zero(t);
        }
        let dg = |x: f64| -> f64 {
            let bose = 1.0 / (x - z).exp_m1();
            let dbose = -bose * (1.0 + bose);
            let (s, c) = (tau * x).sin_cos();
            (tau * c * bose - 2.0 * s * bose / x + s * dbose) / (x * x)
        };
        let period = (tau > 0.5).then(|| 2.0 * PI / tau);
        // F̂ changes sign in k; near a root only accuracy on the scale of
        // ∫|integrand| is attainable or needed.
        let spec = QuadratureSpec::default()
            .with_period(period)
            .with_scale(1.0_f64.min(kappa.max(1e-3)))
            .with_magnitude_tol(1e-10);
        let r = try_integrate_power_semi_infinite(
            |y| Ok((2.0 * kappa + y).powf(d - 1.0) * dg(kappa + y)),
            d - 1.0,
            &spec,
        )?;
        Ok(-self.weight() * temp.powf(2.0 * d - 4.0) * r.into_value()?)
    }

    fn fourier_fhat_at_zero(&self, t: f64) -> Result<f64> {
        let d = self.dimension;
        let leading = if self.chemical_potential == 0.0 {
            2.0 * d - 5.0
        } else {
            2.0 * d - 4.0
        };
        if leading <= -1.0 {
            return Err(Error::Divergent(format!(
                "unparticle F̂(k = 0) is infrared divergent for d = {d}"
            )));
        }
        let v = self.omega_integral(2.0 * d - 5.0, Temporal::Sin, Angular::One, 0.0, t)?;
        Ok(2.0 * (d - 1.0) * self.weight() * v)
    }

    /// (3γΛ^{2(1−d)}/(2π)²)·Γ(3/2)Γ(d)/Γ(3/2+d)·∫ω^{2d}K(ωt)B dω, with
    /// K = sin for the rate and (1−cos)/ω for the total.
    fn energy_kernel(&self, temporal: Temporal, t: f64) -> Result<f64> {
        let d = self.dimension;
        let coefficient = 3.0 * self.coupling * self.weight() / (4.0 * PI * PI)
            * (ln_gamma(1.5) + ln_gamma(d) - ln_gamma(1.5 + d)).exp();
        let power = match temporal {
            Temporal::Sin => 2.0 * d,
            _ => 2.0 * d - 1.0,
        };
        if t.is_infinite() && temporal == Temporal::Sin {
            return Err(Error::Domain(
                "the energy rate has no limit at t = infinity".into(),
            ));
        }
        Ok(coefficient * self.omega_integral(power, temporal, Angular::One, 0.0, t)?)
    }
}

fn series_sum(coefficients: &[f64], a: f64, difference: bool) -> f64 {
    let a2 = a * a;
    let mut total = 0.0;
    let mut power = 1.0;
    let start = usize::from(difference);
    for (k, c) in coefficients.iter().enumerate().skip(start) {
        let sign = if (k - start) % 2 == 0 { 1.0 } else { -1.0 };
        let term = sign * c * power;
        total += term;
        if term.abs() < 1e-18 * total.abs() && k > 4 {
            break;
        }
        power *= a2;
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1e-300)
    }

    #[test]
    fn white_values() {
        let m = NoiseModel::white(1.0, 2.0).unwrap();
        let expected = 0.5 * (4.0 * PI * 4.0f64).powf(-1.5);
        assert!(rel(m.corr_f(0.0, 3.0).unwrap(), expected) < 1e-14);
        assert_eq!(m.corr_f(0.0, 3.0).unwrap(), m.corr_f(0.0, 7.0).unwrap());
        assert!(matches!(
            m.corr_d(0.0, 1.0),
            Err(Error::DistributionalKernel(_))
        ));
        assert_eq!(m.fourier_fhat(0.0, 5.0).unwrap(), 0.5);
        let idiff = m.corr_i_diff(1.5, 4.0).unwrap();
        let oracle = 4.0 * 0.5 * (gaussian_smearing(0.0, 2.0) - gaussian_smearing(1.5, 2.0));
        assert!(rel(idiff, oracle) < 1e-12);
    }

    #[test]
    fn constant_product_tends_to_half_level() {
        let m = NoiseModel::cutoff_product(SpectralShape::Constant { level: 3.0 }, 1.0).unwrap();
        let f = m.corr_f(0.4, 1e6).unwrap();
        assert!(rel(f, gaussian_smearing(0.4, 1.0) * 1.5) < 1e-14);
        assert_eq!(m.corr_f(0.4, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn step_product_integrals_are_consistent() {
        let shape = SpectralShape::Step {
            level: 2.0,
            cutoff: 3.0,
        };
        let table =
            SpectralShape::Tabulated(SpectralTable::new(vec![(0.0, 2.0), (3.0, 2.0)]).unwrap());
        for t in [0.1, 1.0, 7.5] {
            let a = shape.first_integral_factor(t).unwrap();
            let b = table.first_integral_factor(t).unwrap();
            assert!(rel(a, b) < 1e-9, "t={t}: {a} vs {b}");
            let a = shape.second_integral_factor(t).unwrap();
            let b = table.second_integral_factor(t).unwrap();
            assert!(rel(a, b) < 1e-9, "t={t}: {a} vs {b}");
            let a = shape.correlator_factor(t).unwrap();
            let b = table.correlator_factor(t).unwrap();
            assert!((a - b).abs() < 1e-9 * 2.0, "t={t}: {a} vs {b}");
            let h = 1e-4;
            let di = (shape.second_integral_factor(t + h).unwrap()
                - shape.second_integral_factor(t - h).unwrap())
                / (2.0 * h);
            assert!(rel(di, shape.first_integral_factor(t).unwrap()) < 1e-6);
        }
    }

    #[test]
    fn high_pass_limits() {
        let shape = SpectralShape::HighPass {
            level: 2.0,
            corner: 0.5,
        };
        assert!(shape.first_integral_factor(1e3).unwrap() < 1e-100);
        assert!(rel(shape.second_integral_factor(f64::INFINITY).unwrap(), 2.0) < 1e-15);
    }

    #[test]
    fn sine_integral_values() {
        assert!(rel(sine_integral(1.0).unwrap(), 0.946_083_070_367_183) < 1e-12);
        assert!(rel(sine_integral(10.0).unwrap(), 1.658_347_594_218_874) < 1e-12);
        let a = sine_integral(49.999).unwrap();
        let b = sine_integral(50.001).unwrap();
        assert!((a - b).abs() < 1e-4);
        assert!(rel(sine_integral(100.0).unwrap(), 1.562_225_466_889_056) < 1e-12);
    }

    #[test]
    fn spectral_table_csv() {
        let text = "omega,gamma\n# comment\n0.0, 1.0\n1.0, 3.0\n";
        let table = SpectralTable::from_reader(text.as_bytes()).unwrap();
        assert_eq!(table.eval(0.5), 2.0);
        assert_eq!(table.eval(1.5), 0.0);
        assert!(SpectralTable::from_reader("1,2\n0,1\n".as_bytes()).is_err());
    }

    #[test]
    fn thermal_zero_time() {
        let m = NoiseModel::thermal(1.0, 0.5, -0.1, 1.0).unwrap();
        assert_eq!(m.corr_f(0.3, 0.0).unwrap(), 0.0);
        assert_eq!(m.fourier_fhat(0.3, 0.0).unwrap(), 0.0);
        assert!(m.corr_d(0.0, 0.0).unwrap() > 0.0);
        assert_eq!(m.corr_d(0.7, 1.3).unwrap(), m.corr_d(0.7, -1.3).unwrap());
    }

    #[test]
    fn thermal_derivative_chain() {
        let m = NoiseModel::thermal(1.0, 0.7, -0.2, 1.0).unwrap();
        for &(r, t) in &[(0.0, 0.8), (1.3, 2.0), (0.5, 5.0)] {
            let h = 1e-3;
            let di = (m.corr_i(r, t + h).unwrap() - m.corr_i(r, t - h).unwrap()) / (2.0 * h);
            assert!(
                rel(di, m.corr_f(r, t).unwrap()) < 1e-4,
                "dI/dt at ({r},{t})"
            );
            let df = (m.corr_f(r, t + h).unwrap() - m.corr_f(r, t - h).unwrap()) / (2.0 * h);
            assert!(
                rel(df, m.corr_d(r, t).unwrap()) < 1e-4,
                "dF/dt at ({r},{t})"
            );
        }
    }

    #[test]
    fn dilute_closed_form_matches_quadrature() {
        let m = NoiseModel::dilute(1.0, 1e-2, 0.9, 1.0).unwrap();
        for &(r, t) in &[(5.0, 0.0), (5.0, 300.0), (20.0, 700.0)] {
            let closed = m.dilute_closed_forms(r, t).unwrap();
            let d = m
                .radial_quadrature(KernelKind::Correlator, Spatial::Difference, r, t)
                .unwrap();
            let i = m
                .radial_quadrature(KernelKind::SecondIntegral, Spatial::Difference, r, t)
                .unwrap();
            assert!(
                rel(d, closed.correlator) < 1e-7,
                "D at ({r},{t}): {d} vs {}",
                closed.correlator
            );
            assert!(
                (i - closed.second_integral).abs() < 1e-7 * closed.second_integral.abs().max(1e-12)
            );
        }
    }

    #[test]
    fn dilute_infinite_time_limit() {
        let (mu, temp, zeta, r) = (1.0, 1e-2, 0.95, 12.0);
        let m = NoiseModel::dilute(mu, temp, zeta, 1.0).unwrap();
        let expected = (-(mu - zeta) / temp).exp()
            * (temp / (2.0 * PI * mu)).powf(1.5)
            * (1.0 - (-r * r * mu * temp / 2.0).exp());
        assert!(rel(m.corr_i_diff(r, f64::INFINITY).unwrap(), expected) < 1e-13);
        assert!(rel(m.corr_i_diff(r, 1e9).unwrap(), expected) < 1e-6);
    }

    /// Largest thermal/dilute discrepancy over a grid, measured against the
    /// kernel amplitude at the same time.
    fn dilute_discrepancy(kind: KernelKind, ratio: f64) -> f64 {
        let (mu, temp) = (1.0, ratio);
        let thermal = NoiseModel::thermal(mu, temp, 0.0, 1.0)
            .unwrap()
            .radial()
            .unwrap();
        let dilute = NoiseModel::dilute(mu, temp, 0.0, 1.0)
            .unwrap()
            .radial()
            .unwrap();
        let length = 1.0 / (mu * temp).sqrt();
        let mut worst: f64 = 0.0;
        for t in [0.3 / temp, 2.0 / temp, 10.0 / temp] {
            let p = kind.energy_power();
            let amplitude = dilute.integral(2, p, None, kind.temporal(), t).unwrap();
            for r in [0.3 * length, length, 3.0 * length] {
                let sp = Some((r, Spatial::Difference));
                let a = thermal.integral(2, p, sp, kind.temporal(), t).unwrap();
                let b = dilute.integral(2, p, sp, kind.temporal(), t).unwrap();
                let gap = a.integral * (a.log_scale - b.log_scale).exp() - b.integral;
                worst = worst.max(gap.abs() / amplitude.integral.abs().max(b.integral.abs()));
            }
        }
        worst
    }

    #[test]
    fn dilute_correlator_agrees_with_thermal_at_low_temperature() {
        assert!(dilute_discrepancy(KernelKind::Correlator, 1e-3) < 1e-3);
    }

    #[test]
    fn dilute_kernels_converge_linearly_in_temperature_over_mass() {
        for kind in [
            KernelKind::Correlator,
            KernelKind::FirstIntegral,
            KernelKind::SecondIntegral,
        ] {
            for ratio in [1e-3, 1e-4] {
                let gap = dilute_discrepancy(kind, ratio);
                assert!(gap < 5.0 * ratio, "{kind:?} at T/mu={ratio}: {gap}");
            }
        }
    }

    #[test]
    fn unparticle_angular_series_matches_quadrature() {
        let NoiseModel::Unparticle(u) = NoiseModel::unparticle(0.3, 1.0, 1.0, 0.0, 1.0).unwrap()
        else {
            unreachable!()
        };
        let c = u.series_coefficients();
        for a in [0.0, 1.0, 5.0, 11.5] {
            let s = series_sum(&c, a, false);
            let q = u.angular_quadrature(a).unwrap();
            assert!((s - q).abs() < 1e-10 * c[0], "a={a}: {s} vs {q}");
        }
        let a: f64 = 3.0;
        let w = series_sum(&c, a, true) * a * a;
        assert!((w - (c[0] - u.angular_quadrature(a).unwrap())).abs() < 1e-10);
    }

    /// Raw spectral form: ∫ω^{2(d−1)}K(ωt)B(ω)·∫₀¹ v sin(vωr)(1−v²)^{d−2}dv/(π²r) dω.
    fn raw_unparticle_d(u: &Unparticle, r: f64, t: f64) -> f64 {
        let d = u.dimension;
        let spec = QuadratureSpec::default().with_rel_tol(1e-11);
        let inner = |w: f64| -> std::result::Result<f64, QuadError> {
            let a = w * r;
            let lower = try_integrate_finite(
                |v| Ok(v * (a * v).sin() * (1.0 - v * v).powf(d - 2.0)),
                0.0,
                0.5,
                &spec,
            )?;
            let upper = try_integrate_power_finite(
                |x| Ok((1.0 - x) * (a * (1.0 - x)).sin() * (2.0 - x).powf(d - 2.0)),
                d - 2.0,
                0.5,
                &spec,
            )?;
            Ok((lower.into_value()? + upper.into_value()?) / (PI * PI * r))
        };
        let z = u.chemical_potential;
        let outer = QuadratureSpec::default().with_period(Some(2.0 * PI / (t + r)));
        let val = try_integrate_semi_infinite(
            |w| {
                if w == 0.0 {
                    return Ok(0.0);
                }
                let bose = 1.0 / ((w - z) / u.temperature).exp_m1();
                Ok(w.powf(2.0 * (d - 1.0)) * (w * t).cos() * bose * inner(w)?)
            },
            &outer,
        )
        .unwrap();
        (d - 1.0) * u.weight() * val.into_value().unwrap()
    }

    #[test]
    fn unparticle_parts_form_matches_raw_form() {
        let model = NoiseModel::unparticle(1.5, 1.0, 1.0, -0.3, 1.0).unwrap();
        let NoiseModel::Unparticle(u) = &model else {
            unreachable!()
        };
        for &(r, t) in &[(0.5, 0.3), (1.5, 2.0)] {
            let parts = model.corr_d(r, t).unwrap();
            let raw = raw_unparticle_d(u, r, t);
            assert!(rel(parts, raw) < 1e-6, "({r},{t}): {parts} vs {raw}");
        }
    }

    #[test]
    fn unparticle_fhat_continuation_matches_raw_form() {
        let model = NoiseModel::unparticle(1.5, 2.0, 1.0, -0.2, 1.0).unwrap();
        let NoiseModel::Unparticle(u) = &model else {
            unreachable!()
        };
        for &(k, t) in &[(0.5, 1.0), (2.0, 3.0)] {
            let cont = model.fourier_fhat(k, t).unwrap();
            // 2(d−1)Λ^{2(1−d)}∫_k^∞ dω/ω (ω²−k²)^{d−2} B sin(ωt)
            let d = u.dimension;
            let spec = QuadratureSpec::default().with_period(Some(2.0 * PI / t));
            let raw = try_integrate_power_semi_infinite(
                |y| {
                    let w = k + y;
                    let bose = 1.0 / ((w - u.chemical_potential) / u.temperature).exp_m1();
                    Ok((2.0 * k + y).powf(d - 2.0) * bose * (w * t).sin() / w)
                },
                d - 2.0,
                &spec,
            )
            .unwrap()
            .into_value()
            .unwrap();
            let raw = 2.0 * (d - 1.0) * u.weight() * raw;
            assert!(rel(cont, raw) < 1e-6, "k={k}: {cont} vs {raw}");
        }
        assert!(model.fourier_fhat(0.0, 1.0).is_err());
        let steep = NoiseModel::unparticle(2.5, 1.0, 1.0, -0.2, 1.0).unwrap();
        let at_zero = steep.fourier_fhat(0.0, 1.0).unwrap();
        let near_zero = steep.fourier_fhat(1e-4, 1.0).unwrap();
        assert!(rel(near_zero, at_zero) < 1e-3);
    }

    #[test]
    fn unparticle_idiff_positive() {
        let model = NoiseModel::unparticle(0.75, 1.0, 1.0, 0.0, 1.0).unwrap();
        for &(r, t) in &[(0.1, 0.5), (1.0, 3.0), (20.0, 10.0)] {
            assert!(model.corr_i_diff(r, t).unwrap() > 0.0);
        }
        assert_eq!(model.corr_i_diff(0.0, 3.0).unwrap(), 0.0);
    }
}
