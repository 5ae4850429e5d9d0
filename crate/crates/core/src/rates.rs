//! Integrated reduction rates Γ(t) between localized particle groups.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::Serialize;

use crate::correlators::{sinc, NoiseModel};
use crate::error::{Error, Result};
use crate::quadrature::{try_integrate_semi_infinite, QuadError, QuadratureSpec};
use crate::units::NUCLEON_MASS;

pub type Position = [f64; 3];

pub fn distance(a: &Position, b: &Position) -> f64 {
    let d = [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
    (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt()
}

/// Point particles in one branch of a superposition.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParticleGroup {
    positions: Vec<Position>,
    couplings: Vec<f64>,
}

impl ParticleGroup {
    pub fn new(positions: Vec<Position>, couplings: Vec<f64>) -> Result<Self> {
        if positions.len() != couplings.len() {
            return Err(Error::Config(format!(
                "{} positions but {} couplings",
                positions.len(),
                couplings.len()
            )));
        }
        if let Some(m) = couplings.iter().find(|m| !(**m > 0.0 && m.is_finite())) {
            return Err(Error::Config(format!(
                "particle couplings must be positive, got {m}"
            )));
        }
        if positions.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::Config("particle positions must be finite".into()));
        }
        Ok(Self {
            positions,
            couplings,
        })
    }

    pub fn single(position: Position, coupling: f64) -> Result<Self> {
        Self::new(vec![position], vec![coupling])
    }

    pub fn positions(&self) -> &[Position] {
        &self.positions
    }

    pub fn couplings(&self) -> &[f64] {
        &self.couplings
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// Same couplings, every position shifted by `offset`.
    pub fn displaced(&self, offset: Position) -> Self {
        let positions = self
            .positions
            .iter()
            .map(|p| [p[0] + offset[0], p[1] + offset[1], p[2] + offset[2]])
            .collect();
        Self {
            positions,
            couplings: self.couplings.clone(),
        }
    }

    /// Σ m_i²/M_i with each particle's inertial mass equal to its coupling.
    pub fn kinetic_weight(&self) -> f64 {
        self.couplings.iter().sum()
    }

    fn check_compatible(&self, other: &Self) -> Result<()> {
        if self.couplings != other.couplings {
            return Err(Error::Config(
                "groups must list the same particles with identical couplings".into(),
            ));
        }
        Ok(())
    }
}

/// Branches of a superposition with their probabilities.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuperpositionConfig {
    groups: Vec<ParticleGroup>,
    amplitudes: Vec<f64>,
}

impl SuperpositionConfig {
    pub fn new(groups: Vec<ParticleGroup>, amplitudes: Vec<f64>) -> Result<Self> {
        if groups.len() < 2 || groups.len() != amplitudes.len() {
            return Err(Error::Config(format!(
                "need at least two branches with one probability each, got {} branches and {} probabilities",
                groups.len(),
                amplitudes.len()
            )));
        }
        for g in &groups[1..] {
            groups[0].check_compatible(g)?;
        }
        if amplitudes.iter().any(|p| !(*p >= 0.0 && p.is_finite())) {
            return Err(Error::Config("branch probabilities must be >= 0".into()));
        }
        let total: f64 = amplitudes.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::Config(format!(
                "branch probabilities sum to {total}, not 1"
            )));
        }
        Ok(Self { groups, amplitudes })
    }

    pub fn groups(&self) -> &[ParticleGroup] {
        &self.groups
    }

    pub fn amplitudes(&self) -> &[f64] {
        &self.amplitudes
    }

    pub fn branches(&self) -> usize {
        self.groups.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PairContribution {
    pub i: usize,
    pub j: usize,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateResult {
    pub gamma: f64,
    pub t: f64,
    pub breakdown: Option<Vec<PairContribution>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RateOptions {
    /// Separations beyond this multiple of the correlation length use the
    /// r → ∞ asymptote of the subtracted kernel.
    pub far_field_multiple: Option<f64>,
    pub breakdown: bool,
}

impl RateOptions {
    pub const FAR_FIELD_MULTIPLE: f64 = 20.0;

    pub fn with_far_field(mut self) -> Self {
        self.far_field_multiple = Some(Self::FAR_FIELD_MULTIPLE);
        self
    }
}

/// γ ΣΣ m_i m_j [(K₁₂ + K₂₁) − (K₁₁ + K₂₂)] for a subtracted kernel K.
///
/// Each (i, j) term is formed symmetrically in the two groups, so swapping
/// them gives a bit-identical result. Rows are summed in parallel and then
/// combined in index order.
fn pair_sum<K>(
    g1: &ParticleGroup,
    g2: &ParticleGroup,
    kernel: K,
    breakdown: bool,
) -> Result<(f64, Option<Vec<PairContribution>>)>
where
    K: Fn(f64) -> Result<f64> + Sync,
{
    g1.check_compatible(g2)?;
    let (p1, p2, m) = (g1.positions(), g2.positions(), g1.couplings());
    let rows: Vec<Result<Vec<f64>>> = (0..m.len())
        .into_par_iter()
        .map(|i| {
            (0..m.len())
                .map(|j| {
                    let cross =
                        kernel(distance(&p1[i], &p2[j]))? + kernel(distance(&p2[i], &p1[j]))?;
                    let same =
                        kernel(distance(&p1[i], &p1[j]))? + kernel(distance(&p2[i], &p2[j]))?;
                    Ok(m[i] * m[j] * (cross - same))
                })
                .collect()
        })
        .collect();
    let mut total = 0.0;
    let mut terms = breakdown.then(Vec::new);
    for (i, row) in rows.into_iter().enumerate() {
        let row = row?;
        total += row.iter().sum::<f64>();
        if let Some(terms) = terms.as_mut() {
            terms.extend(row.iter().enumerate().map(|(j, &value)| PairContribution {
                i,
                j,
                value,
            }));
        }
    }
    Ok((total, terms))
}

/// Γ(t) from an arbitrary spatial kernel K(r) = I(r,t) + ξ(t); any
/// uniform shift ξ cancels.
pub fn gamma_from_kernel<K>(
    coupling: f64,
    g1: &ParticleGroup,
    g2: &ParticleGroup,
    kernel: K,
) -> Result<f64>
where
    K: Fn(f64) -> Result<f64> + Sync,
{
    let (sum, _) = pair_sum(g1, g2, |r| Ok(-kernel(r)?), false)?;
    Ok(coupling * sum)
}

pub fn gamma_pair(
    model: &NoiseModel,
    g1: &ParticleGroup,
    g2: &ParticleGroup,
    t: f64,
) -> Result<RateResult> {
    gamma_pair_with(model, g1, g2, t, &RateOptions::default())
}

pub fn gamma_pair_with(
    model: &NoiseModel,
    g1: &ParticleGroup,
    g2: &ParticleGroup,
    t: f64,
    options: &RateOptions,
) -> Result<RateResult> {
    if !(t >= 0.0) {
        return Err(Error::Domain(format!("time must be >= 0, got {t}")));
    }
    let far = match (options.far_field_multiple, model.correlation_length()) {
        (Some(multiple), Some(length)) => Some((multiple * length, model.corr_i(0.0, t)?)),
        _ => None,
    };
    let kernel = |r: f64| match far {
        Some((cut, asymptote)) if r > cut => Ok(asymptote),
        _ => model.corr_i_diff(r, t),
    };
    let (sum, breakdown) = pair_sum(g1, g2, kernel, options.breakdown)?;
    let coupling = model.coupling();
    Ok(RateResult {
        gamma: coupling * sum,
        t,
        breakdown: breakdown.map(|terms| {
            terms
                .into_iter()
                .map(|p| PairContribution {
                    value: coupling * p.value,
                    ..p
                })
                .collect()
        }),
    })
}

/// Γ^{LM}(t) between branches L and M.
pub fn gamma_lm(
    model: &NoiseModel,
    config: &SuperpositionConfig,
    l: usize,
    m: usize,
    t: f64,
) -> Result<RateResult> {
    let n = config.branches();
    if l >= n || m >= n {
        return Err(Error::Config(format!(
            "branch index ({l}, {m}) out of range for {n} branches"
        )));
    }
    if l == m {
        return Ok(RateResult {
            gamma: 0.0,
            t,
            breakdown: None,
        });
    }
    gamma_pair(model, &config.groups[l], &config.groups[m], t)
}

/// ⟨1|ρ(t)|2⟩/⟨1|ρ(0)|2⟩ = e^{−Γ(t)}.
pub fn offdiag_decay(
    model: &NoiseModel,
    g1: &ParticleGroup,
    g2: &ParticleGroup,
    t: f64,
) -> Result<f64> {
    Ok((-gamma_pair(model, g1, g2, t)?.gamma).exp())
}

/// Γ(t) through the Fourier representation,
/// γ/(2π²) ∫ k² Î(k,t) ΣΣ m_i m_j [sinc terms] dk.
pub fn gamma_pair_fourier(
    model: &NoiseModel,
    g1: &ParticleGroup,
    g2: &ParticleGroup,
    t: f64,
) -> Result<f64> {
    g1.check_compatible(g2)?;
    let (p1, p2, m) = (g1.positions(), g2.positions(), g1.couplings());
    let mut pairs = Vec::with_capacity(m.len() * m.len());
    let mut widest: f64 = 0.0;
    for i in 0..m.len() {
        for j in 0..m.len() {
            let d = [
                distance(&p1[i], &p2[j]),
                distance(&p2[i], &p1[j]),
                distance(&p1[i], &p1[j]),
                distance(&p2[i], &p2[j]),
            ];
            widest = d.iter().fold(widest, |w, &x| w.max(x));
            pairs.push((m[i] * m[j], d));
        }
    }
    let scale = match model {
        NoiseModel::WhiteCsl(w) => w.correlation_length.recip(),
        NoiseModel::CutoffProduct(c) => c.correlation_length.recip(),
        NoiseModel::Thermal(th) => (th.mass * th.temperature).sqrt() + th.temperature,
        NoiseModel::DiluteNr(d) => (d.mass * d.temperature).sqrt(),
        NoiseModel::Unparticle(_) => {
            return Err(Error::Unsupported(
                "Fourier-route rate for the unparticle model".into(),
            ))
        }
    };
    let period = (widest * scale > PI).then(|| 2.0 * PI / (widest * scale));
    let spec = QuadratureSpec::default()
        .with_rel_tol(1e-11)
        .with_period(period);
    let structure = |k: f64| -> f64 {
        pairs
            .iter()
            .map(|(w, d)| {
                w * ((sinc(k * d[0]) + sinc(k * d[1])) - (sinc(k * d[2]) + sinc(k * d[3])))
            })
            .sum::<f64>()
    };
    let r = try_integrate_semi_infinite(
        |kappa| {
            let k = scale * kappa;
            let ihat = model
                .fourier_ihat(k, t)
                .map_err(|e| QuadError::InvalidSpec(e.to_string()))?;
            Ok(-kappa * kappa * ihat * structure(k))
        },
        &spec,
    )?;
    Ok(model.coupling() * scale.powi(3) * r.into_value()? / (2.0 * PI * PI))
}

/// dΓ/dt from the F-differences.
pub fn gamma_rate(
    model: &NoiseModel,
    g1: &ParticleGroup,
    g2: &ParticleGroup,
    t: f64,
) -> Result<f64> {
    let (sum, _) = pair_sum(g1, g2, |r| model.corr_f_diff(r, t), false)?;
    Ok(model.coupling() * sum)
}

/// Γ(t) with a flag recording whether dΓ/ds ≥ 0 held at every sample
/// s ∈ (0, t].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CheckedRate {
    pub gamma: f64,
    pub positivity_holds: bool,
}

pub fn gamma_pair_checked(
    model: &NoiseModel,
    g1: &ParticleGroup,
    g2: &ParticleGroup,
    t: f64,
    samples: usize,
) -> Result<CheckedRate> {
    let gamma = gamma_pair(model, g1, g2, t)?.gamma;
    let mut positivity_holds = true;
    for n in 1..=samples.max(1) {
        let s = t * n as f64 / samples.max(1) as f64;
        let rate = gamma_rate(model, g1, g2, s)?;
        if rate < -1e-12 * rate.abs().max(gamma.abs() / t.max(f64::MIN_POSITIVE)) {
            positivity_holds = false;
            break;
        }
    }
    Ok(CheckedRate {
        gamma,
        positivity_holds,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReductionBounds {
    pub lower: f64,
    pub upper: f64,
}

/// Bounds on E[p₁p₂] at integrated rate Γ from initial value e0:
/// e0·e^{−2Γ} ≤ E ≤ e0/(1 + 8·e0·Γ).
pub fn reduction_bounds(gamma: f64, e0: f64) -> Result<ReductionBounds> {
    if !(gamma >= 0.0) {
        return Err(Error::Domain(format!("bounds require Γ >= 0, got {gamma}")));
    }
    if !(0.0..=0.25).contains(&e0) {
        return Err(Error::Domain(format!(
            "initial p1*p2 must lie in [0, 1/4], got {e0}"
        )));
    }
    Ok(ReductionBounds {
        lower: e0 * (-2.0 * gamma).exp(),
        upper: e0 / (1.0 + 8.0 * e0 * gamma),
    })
}

/// White-noise parameters that reproduce a dilute thermal correlator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CslMatch {
    /// r_C = (2μT)^{-1/2}, GeV⁻¹.
    pub correlation_length: f64,
    /// Δt·γ^CSL = 2γ m_N² e^{−(μ−ζ)/T}/μ³, GeV⁻³.
    pub rate_product: f64,
}

pub fn csl_matching(model: &NoiseModel) -> Result<CslMatch> {
    let (mass, temperature, chemical_potential, coupling) = match model {
        NoiseModel::DiluteNr(m) => (m.mass, m.temperature, m.chemical_potential, m.coupling),
        NoiseModel::Thermal(m) => (m.mass, m.temperature, m.chemical_potential, m.coupling),
        other => {
            return Err(Error::WrongModel {
                expected: "thermal or dilute",
                found: other.tag(),
            })
        }
    };
    Ok(CslMatch {
        correlation_length: (2.0 * mass * temperature).sqrt().recip(),
        rate_product: 2.0
            * coupling
            * NUCLEON_MASS
            * NUCLEON_MASS
            * (-(mass - chemical_potential) / temperature).exp()
            / mass.powi(3),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn white() -> NoiseModel {
        NoiseModel::white(2.0, 1.0).unwrap()
    }

    #[test]
    fn identical_groups_give_zero() {
        let g = ParticleGroup::new(vec![[0.0; 3], [0.3, 0.1, 0.0]], vec![1.0, 2.0]).unwrap();
        assert_eq!(gamma_pair(&white(), &g, &g, 3.0).unwrap().gamma, 0.0);
    }

    #[test]
    fn swap_is_bit_identical() {
        let g1 = ParticleGroup::new(
            vec![[0.0; 3], [0.3, 0.1, 0.0], [1.0, 2.0, 0.5]],
            vec![1.0, 2.0, 0.7],
        )
        .unwrap();
        let g2 = g1.displaced([0.4, -0.2, 0.9]);
        let a = gamma_pair(&white(), &g1, &g2, 3.0).unwrap().gamma;
        let b = gamma_pair(&white(), &g2, &g1, 3.0).unwrap().gamma;
        assert_eq!(a.to_bits(), b.to_bits());
    }

    #[test]
    fn mismatched_couplings_rejected() {
        let g1 = ParticleGroup::single([0.0; 3], 1.0).unwrap();
        let g2 = ParticleGroup::single([1.0, 0.0, 0.0], 2.0).unwrap();
        assert!(matches!(
            gamma_pair(&white(), &g1, &g2, 1.0),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn breakdown_sums_to_total() {
        let g1 = ParticleGroup::new(vec![[0.0; 3], [0.5, 0.0, 0.0]], vec![1.0, 1.5]).unwrap();
        let g2 = g1.displaced([1.0, 0.0, 0.0]);
        let opts = RateOptions {
            breakdown: true,
            ..RateOptions::default()
        };
        let r = gamma_pair_with(&white(), &g1, &g2, 2.0, &opts).unwrap();
        let parts: f64 = r.breakdown.unwrap().iter().map(|p| p.value).sum();
        assert!((parts - r.gamma).abs() < 1e-14 * r.gamma);
    }

    #[test]
    fn far_field_cutoff_matches_direct_sum() {
        let g1 = ParticleGroup::new(vec![[0.0; 3], [100.0, 0.0, 0.0]], vec![1.0, 1.0]).unwrap();
        let g2 = g1.displaced([0.0, 3.0, 0.0]);
        let direct = gamma_pair(&white(), &g1, &g2, 2.0).unwrap().gamma;
        let cut = gamma_pair_with(
            &white(),
            &g1,
            &g2,
            2.0,
            &RateOptions::default().with_far_field(),
        )
        .unwrap()
        .gamma;
        assert!((direct - cut).abs() < 1e-12 * direct);
    }

    #[test]
    fn bounds_examples() {
        let b = reduction_bounds(0.0, 0.2).unwrap();
        assert_eq!((b.lower, b.upper), (0.2, 0.2));
        let b = reduction_bounds(1.0, 0.25).unwrap();
        assert!((b.lower - 0.25 * (-2.0f64).exp()).abs() < 1e-15);
        assert!((b.upper - 0.25 / 3.0).abs() < 1e-15);
        assert!(reduction_bounds(1.0, 0.3).is_err());
        assert!(reduction_bounds(-1.0, 0.2).is_err());
    }

    #[test]
    fn csl_matching_scaling() {
        let a = csl_matching(&NoiseModel::dilute(1e-6, 1e-12, 0.0, 1.0).unwrap()).unwrap();
        let b = csl_matching(&NoiseModel::dilute(1e-6, 2e-12, 0.0, 1.0).unwrap()).unwrap();
        assert!((a.correlation_length / b.correlation_length - 2f64.sqrt()).abs() < 1e-12);
        assert!(csl_matching(&white()).is_err());
    }

    #[test]
    fn lm_indices() {
        let g1 = ParticleGroup::single([0.0; 3], 1.0).unwrap();
        let cfg = SuperpositionConfig::new(
            vec![g1.clone(), g1.displaced([1.0, 0.0, 0.0])],
            vec![0.5, 0.5],
        )
        .unwrap();
        assert_eq!(gamma_lm(&white(), &cfg, 1, 1, 1.0).unwrap().gamma, 0.0);
        assert!(gamma_lm(&white(), &cfg, 0, 2, 1.0).is_err());
        assert!(SuperpositionConfig::new(vec![g1.clone(), g1.clone()], vec![0.5, 0.6]).is_err());
    }
}
