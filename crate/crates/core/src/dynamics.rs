//! Exact-solution Monte Carlo of reduction statistics in the linear gauge,
//! the closed-form two-branch expectation and Fokker-Planck coefficients.
//!
//! Under the auxiliary measure Q the time-integrated noise Φ is Gaussian
//! with covariance 2I. A trajectory draws one Φ per branch; branch
//! probabilities follow from a softmax and physical averages reweight by
//! the squared norm w = ⟨χ|χ⟩.
//!
//! Because w = Σ_a p_a exp(x_a − Σ_aa/2) with x ~ N(0, Σ), the physical
//! measure is the mixture Σ_a p_a N(Σe_a, Σ). Sampling that mixture
//! directly gives bounded estimators where reweighting has lognormal tails
//! of log-variance about 4Γ.

use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::correlators::NoiseModel;
use crate::error::{Error, Result};
use crate::quadrature::{integrate_semi_infinite, QuadratureSpec};
use crate::rates::{distance, ParticleGroup, SuperpositionConfig};

const PSD_TOLERANCE: f64 = 1e-10;
const JITTER_STEPS: [f64; 3] = [1e-16, 1e-14, 1e-12];

/// Cov(Φ_a, Φ_b) over branches at one time.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceMatrix {
    pub t: f64,
    pub matrix: DMatrix<f64>,
}

impl CovarianceMatrix {
    pub fn min_eigenvalue(&self) -> f64 {
        SymmetricEigen::new(self.matrix.clone()).eigenvalues.min()
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace()
    }

    /// Lower-triangular factor L with L·Lᵀ ≈ C, adding diagonal jitter of
    /// at most 1e-12·trace when roundoff spoils definiteness.
    pub fn cholesky_factor(&self) -> Result<DMatrix<f64>> {
        let n = self.matrix.nrows();
        let trace = self.trace();
        if trace == 0.0 {
            return Ok(DMatrix::zeros(n, n));
        }
        if let Some(c) = self.matrix.clone().cholesky() {
            return Ok(c.l());
        }
        for jitter in JITTER_STEPS {
            let shifted = &self.matrix + DMatrix::identity(n, n) * (jitter * trace);
            if let Some(c) = shifted.cholesky() {
                return Ok(c.l());
            }
        }
        Err(Error::NotPsd {
            t: self.t,
            min_eigenvalue: self.min_eigenvalue(),
            trace,
        })
    }
}

/// Sum of m_i m_j K(r_i^a − r_j^b) over particle pairs.
fn branch_sum<K>(a: &ParticleGroup, b: &ParticleGroup, kernel: &K) -> Result<f64>
where
    K: Fn(f64) -> Result<f64>,
{
    let (pa, pb, m) = (a.positions(), b.positions(), a.couplings());
    let mut total = 0.0;
    for i in 0..m.len() {
        let mut row = 0.0;
        for j in 0..m.len() {
            row += m[i] * m[j] * kernel(distance(&pa[i], &pb[j]))?;
        }
        total += row;
    }
    Ok(total)
}

/// Symmetric branch matrix of kernel sums, filled in parallel by row.
fn branch_matrix<K>(config: &SuperpositionConfig, kernel: K) -> Result<DMatrix<f64>>
where
    K: Fn(f64) -> Result<f64> + Sync,
{
    let groups = config.groups();
    let n = groups.len();
    let rows: Vec<Result<Vec<f64>>> = (0..n)
        .into_par_iter()
        .map(|a| {
            (a..n)
                .map(|b| branch_sum(&groups[a], &groups[b], &kernel))
                .collect()
        })
        .collect();
    let mut m = DMatrix::zeros(n, n);
    for (a, row) in rows.into_iter().enumerate() {
        for (offset, v) in row?.into_iter().enumerate() {
            m[(a, a + offset)] = v;
            m[(a + offset, a)] = v;
        }
    }
    Ok(m)
}

/// C_ab = 2 Σ_ij m_i m_j I(r_i^a − r_j^b, t), checked for positive
/// semidefiniteness.
pub fn covariance_matrix(
    model: &NoiseModel,
    config: &SuperpositionConfig,
    t: f64,
) -> Result<CovarianceMatrix> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::Domain(format!(
            "time must be finite and >= 0, got {t}"
        )));
    }
    let matrix = branch_matrix(config, |r| Ok(2.0 * model.corr_i(r, t)?))?;
    let cov = CovarianceMatrix { t, matrix };
    let trace = cov.trace();
    let min = cov.min_eigenvalue();
    if !(min >= -PSD_TOLERANCE * trace.abs()) {
        return Err(Error::NotPsd {
            t,
            min_eigenvalue: min,
            trace,
        });
    }
    Ok(cov)
}

/// ln Σ exp(x), skipping −∞ entries.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Log-probabilities of the softmax of `exponents`.
pub fn log_softmax(exponents: &[f64]) -> Vec<f64> {
    let max = exponents.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return exponents.to_vec();
    }
    let spread = exponents.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
    exponents.iter().map(|e| (e - max) - spread).collect()
}

/// How trajectories are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Sampler {
    /// Draw under Q and reweight by w.
    #[default]
    Reweighted,
    /// Draw under the physical measure as a mixture over branches.
    Physical,
    /// Draw under Q tilted to the midpoint of the first two branches'
    /// shifts and reweight. Keeps E_P[p₁p₂] bounded by about e^{−Γ}, so it
    /// resolves the exponential reduction regime.
    Midpoint,
}

/// Mean shift of one trajectory's exponents, as a combination of
/// covariance columns.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Tilt {
    None,
    Branch(usize),
    Midpoint,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnsembleSpec {
    pub n_traj: usize,
    pub seed: u64,
    pub output_times: Vec<f64>,
    /// Keep per-trajectory probabilities and weights in the batch.
    pub keep_trajectories: bool,
    pub sampler: Sampler,
}

impl EnsembleSpec {
    pub fn new(n_traj: usize, seed: u64, output_times: Vec<f64>) -> Result<Self> {
        let spec = Self {
            n_traj,
            seed,
            output_times,
            keep_trajectories: false,
            sampler: Sampler::default(),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_sampler(mut self, sampler: Sampler) -> Self {
        self.sampler = sampler;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_traj == 0 {
            return Err(Error::Config("n_traj must be positive".into()));
        }
        if self.output_times.is_empty() {
            return Err(Error::Config("at least one output time is required".into()));
        }
        if self
            .output_times
            .iter()
            .any(|t| !(*t >= 0.0 && t.is_finite()))
        {
            return Err(Error::Config("output times must be finite and >= 0".into()));
        }
        if self.output_times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Config(
                "output times must be strictly increasing".into(),
            ));
        }
        Ok(())
    }
}

/// Mean and standard error of a sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
}

impl Estimate {
    /// Two-pass estimate, summed in index order.
    pub fn from_samples(samples: &[f64]) -> Self {
        let n = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / n;
        let var = if samples.len() > 1 {
            samples.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        Self {
            mean,
            stderr: (var / n).sqrt(),
        }
    }

    /// |mean − target| in units of the standard error.
    pub fn deviation(&self, target: f64) -> f64 {
        let d = (self.mean - target).abs();
        if self.stderr > 0.0 {
            d / self.stderr
        } else if d == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    }
}

/// Physical-measure statistics at one output time.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimeSummary {
    pub t: f64,
    /// Γ between the first two branches.
    pub gamma: f64,
    /// Measure-change check equal to 1: the mean sample factor when
    /// reweighting, E_P[1/w] when sampling the physical measure.
    pub weight: Estimate,
    /// E_P[p_J] per branch.
    pub probabilities: Vec<Estimate>,
    /// E_P[p₁p₂] for the first two branches.
    pub product: Estimate,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectorySample {
    pub probabilities: Vec<f64>,
    pub log_weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectoryBatch {
    pub n_traj: usize,
    pub seed: u64,
    pub summaries: Vec<TimeSummary>,
    /// Indexed [time][trajectory] when requested.
    pub trajectories: Option<Vec<Vec<TrajectorySample>>>,
}

/// Standard normals for one trajectory, from its own ChaCha stream, and
/// its tilt; physical sampling draws branch a with probability p_a.
fn trajectory_draws(
    seed: u64,
    index: usize,
    probabilities: &[f64],
    sampler: Sampler,
) -> (Vec<f64>, Tilt) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    let n = probabilities.len();
    let normals = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
    let tilt = match sampler {
        Sampler::Reweighted => Tilt::None,
        Sampler::Midpoint => Tilt::Midpoint,
        Sampler::Physical => {
            let u: f64 = rng.random();
            let mut acc = 0.0;
            let mut pick = n - 1;
            for (a, p) in probabilities.iter().enumerate() {
                acc += p;
                if u < acc {
                    pick = a;
                    break;
                }
            }
            Tilt::Branch(pick)
        }
    };
    (normals, tilt)
}

/// One trajectory at one time.
struct State {
    log_p: Vec<f64>,
    log_w: f64,
    /// Log of the factor turning a sample into a physical-measure sample:
    /// log w under Q, 0 under P, log w + log dQ/dR under a tilted law R.
    log_factor: f64,
}

fn trajectory_state(
    log_p0: &[f64],
    stage: &Stage,
    normals: &[f64],
    tilt: Tilt,
    scale: f64,
) -> State {
    let n = log_p0.len();
    let sigma = &stage.exponent_cov;
    let mut xs = Vec::with_capacity(n);
    for a in 0..n {
        let x: f64 = normals[..=a]
            .iter()
            .enumerate()
            .map(|(b, z)| stage.factor[(a, b)] * z)
            .sum();
        let shift = match tilt {
            Tilt::None => 0.0,
            Tilt::Branch(c) => sigma[(a, c)],
            Tilt::Midpoint => 0.5 * (sigma[(a, 0)] + sigma[(a, 1)]),
        };
        xs.push(scale * x + shift);
    }
    let exponents: Vec<f64> = (0..n).map(|a| log_p0[a] + xs[a]).collect();
    let weighted: Vec<f64> = (0..n)
        .map(|a| exponents[a] - 0.5 * stage.variances[a])
        .collect();
    let log_w = log_sum_exp(&weighted);
    let log_factor = match tilt {
        Tilt::None => log_w,
        Tilt::Branch(_) => 0.0,
        Tilt::Midpoint => {
            let u_sigma_u = 0.25 * (sigma[(0, 0)] + sigma[(1, 1)] + 2.0 * sigma[(0, 1)]);
            log_w - 0.5 * (xs[0] + xs[1]) + 0.5 * u_sigma_u
        }
    };
    State {
        log_p: log_softmax(&exponents),
        log_w,
        log_factor,
    }
}

/// Per-time sampling data shared by all trajectories.
struct Stage {
    t: f64,
    factor: DMatrix<f64>,
    /// Covariance of the exponents, 4γC.
    exponent_cov: DMatrix<f64>,
    variances: Vec<f64>,
    gamma: f64,
}

/// Samples branch probabilities and measure weights at each output time.
///
/// The same standard normals are reused at every output time, so each
/// time has the exact marginal law and differences between times carry
/// little Monte Carlo noise.
pub fn sample_reduction_ensemble(
    model: &NoiseModel,
    config: &SuperpositionConfig,
    spec: &EnsembleSpec,
) -> Result<TrajectoryBatch> {
    spec.validate()?;
    let n = config.branches();
    let coupling = model.coupling();
    let scale = 2.0 * coupling.sqrt();
    let log_p0: Vec<f64> = config.amplitudes().iter().map(|p| p.ln()).collect();

    let mut stages = Vec::with_capacity(spec.output_times.len());
    for &t in &spec.output_times {
        let cov = covariance_matrix(model, config, t)?;
        let factor = cov.cholesky_factor()?;
        let exponent_cov = &cov.matrix * (4.0 * coupling);
        let variances: Vec<f64> = (0..n).map(|a| exponent_cov[(a, a)]).collect();
        let m = &cov.matrix;
        let gamma = 0.5 * coupling * (m[(0, 0)] + m[(1, 1)] - 2.0 * m[(0, 1)]);
        stages.push(Stage {
            t,
            factor,
            exponent_cov,
            variances,
            gamma,
        });
    }

    let per_traj: Vec<Vec<State>> = (0..spec.n_traj)
        .into_par_iter()
        .map(|index| {
            let (normals, tilt) =
                trajectory_draws(spec.seed, index, config.amplitudes(), spec.sampler);
            stages
                .iter()
                .map(|stage| trajectory_state(&log_p0, stage, &normals, tilt, scale))
                .collect()
        })
        .collect();

    let mut summaries = Vec::with_capacity(stages.len());
    for (k, stage) in stages.iter().enumerate() {
        let weights: Vec<f64> = per_traj
            .iter()
            .map(|traj| match spec.sampler {
                Sampler::Physical => (-traj[k].log_w).exp(),
                _ => traj[k].log_factor.exp(),
            })
            .collect();
        let probabilities = (0..n)
            .map(|a| {
                let s: Vec<f64> = per_traj
                    .iter()
                    .map(|traj| (traj[k].log_factor + traj[k].log_p[a]).exp())
                    .collect();
                Estimate::from_samples(&s)
            })
            .collect();
        let products: Vec<f64> = per_traj
            .iter()
            .map(|traj| (traj[k].log_factor + traj[k].log_p[0] + traj[k].log_p[1]).exp())
            .collect();
        summaries.push(TimeSummary {
            t: stage.t,
            gamma: stage.gamma,
            weight: Estimate::from_samples(&weights),
            probabilities,
            product: Estimate::from_samples(&products),
        });
    }

    let trajectories = spec.keep_trajectories.then(|| {
        (0..stages.len())
            .map(|k| {
                per_traj
                    .iter()
                    .map(|traj| TrajectorySample {
                        probabilities: traj[k].log_p.iter().map(|lp| lp.exp()).collect(),
                        log_weight: traj[k].log_w,
                    })
                    .collect()
            })
            .collect()
    });

    Ok(TrajectoryBatch {
        n_traj: spec.n_traj,
        seed: spec.seed,
        summaries,
        trajectories,
    })
}

/// E_P[p₁p₂] for two branches at integrated rate Γ:
/// p₁p₂ e^{−Γ}(4πΓ)^{−1/2} ∫ e^{−s²/4Γ}/(p₁eˢ + p₂e⁻ˢ) ds.
pub fn expected_p1p2_closed(gamma: f64, p1: f64, p2: f64) -> Result<f64> {
    if !(gamma >= 0.0) {
        return Err(Error::Domain(format!("Γ must be >= 0, got {gamma}")));
    }
    if !(p1 >= 0.0 && p2 >= 0.0) || (p1 + p2 - 1.0).abs() > 1e-12 {
        return Err(Error::Domain(format!(
            "probabilities must be >= 0 and sum to 1, got {p1} + {p2}"
        )));
    }
    if gamma == 0.0 || p1 == 0.0 || p2 == 0.0 {
        return Ok(p1 * p2);
    }
    // With s = 2√Γ·u the Gaussian and e^{−Γ}/e^{|s|} combine into
    // e^{−(u ± √Γ)²}, which stays representable for large Γ.
    let root = gamma.sqrt();
    let half = |big: f64, small: f64| -> f64 {
        let spec = QuadratureSpec::default()
            .with_rel_tol(1e-13)
            .with_abs_tol(0.0)
            .with_scale((0.5 / root).min(1.0));
        integrate_semi_infinite(
            |u| {
                let s = 2.0 * root * u;
                (-(u + root) * (u + root)).exp() / (big + small * (-2.0 * s).exp())
            },
            &spec,
        )
        .map(|r| r.value)
        .unwrap_or(f64::NAN)
    };
    let value = p1 * p2 * (half(p1, p2) + half(p2, p1)) / PI.sqrt();
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::Divergent(format!(
            "closed-form expectation failed at Γ = {gamma}"
        )))
    }
}

/// K_AB = Σ_ij m_i m_j [F(0,t) − F(r_i^A − r_j^B, t)].
fn subtracted_branch_kernel(
    model: &NoiseModel,
    config: &SuperpositionConfig,
    t: f64,
) -> Result<DMatrix<f64>> {
    branch_matrix(config, |r| model.corr_f_diff(r, t))
}

/// Fokker-Planck diffusion matrix A_MT at the configuration's current
/// probabilities.
pub fn fp_diffusion_matrix(
    model: &NoiseModel,
    config: &SuperpositionConfig,
    t: f64,
) -> Result<DMatrix<f64>> {
    let k = subtracted_branch_kernel(model, config, t)?;
    Ok(diffusion_from_kernel(
        &k,
        config.amplitudes(),
        model.coupling(),
    ))
}

/// A_MT = 4γ p_M p_T Σ_QS p_Q p_S [F_MT + F_QS − F_QT − F_MS] with
/// F = −K (the constant F(0,t) cancels).
fn diffusion_from_kernel(k: &DMatrix<f64>, p: &[f64], coupling: f64) -> DMatrix<f64> {
    let n = p.len();
    let mean_row: Vec<f64> = (0..n)
        .map(|a| (0..n).map(|b| p[b] * k[(a, b)]).sum())
        .collect();
    let mean_all: f64 = (0..n).map(|a| p[a] * mean_row[a]).sum();
    let mut out = DMatrix::zeros(n, n);
    for m in 0..n {
        for t in m..n {
            let bracket = -k[(m, t)] - mean_all + mean_row[t] + mean_row[m];
            let v = 4.0 * coupling * p[m] * p[t] * bracket;
            out[(m, t)] = v;
            out[(t, m)] = v;
        }
    }
    out
}

/// Drift of E[δ_ML p_M − p_M p_L] evaluated at the configuration's
/// probabilities, −(A_ML + A_LM).
pub fn moment_rhs(
    model: &NoiseModel,
    config: &SuperpositionConfig,
    t: f64,
    m: usize,
    l: usize,
) -> Result<f64> {
    let n = config.branches();
    if m >= n || l >= n {
        return Err(Error::Config(format!(
            "branch index ({m}, {l}) out of range for {n} branches"
        )));
    }
    let a = fp_diffusion_matrix(model, config, t)?;
    Ok(-(a[(m, l)] + a[(l, m)]))
}

/// Same drift for many probability points sharing one geometry.
pub fn moment_rhs_at_points(
    model: &NoiseModel,
    config: &SuperpositionConfig,
    t: f64,
    m: usize,
    l: usize,
    points: &[Vec<f64>],
) -> Result<Vec<f64>> {
    let n = config.branches();
    if m >= n || l >= n {
        return Err(Error::Config(format!(
            "branch index ({m}, {l}) out of range for {n} branches"
        )));
    }
    let k = subtracted_branch_kernel(model, config, t)?;
    Ok(points
        .iter()
        .map(|p| {
            let a = diffusion_from_kernel(&k, p, model.coupling());
            -(a[(m, l)] + a[(l, m)])
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rates::gamma_rate;

    fn two_branch(separation: f64, p1: f64) -> SuperpositionConfig {
        let g = ParticleGroup::single([0.0; 3], 1.0).unwrap();
        SuperpositionConfig::new(
            vec![g.clone(), g.displaced([separation, 0.0, 0.0])],
            vec![p1, 1.0 - p1],
        )
        .unwrap()
    }

    #[test]
    fn softmax_shift_is_exact() {
        let e = [0.5, -1.25, 3.0, 0.0];
        let shifted: Vec<f64> = e.iter().map(|x| x + 1024.0).collect();
        assert_eq!(log_softmax(&e), log_softmax(&shifted));
        let p: f64 = log_softmax(&e).iter().map(|x| x.exp()).sum();
        assert!((p - 1.0).abs() < 1e-15);
        assert_eq!(
            log_softmax(&[f64::NEG_INFINITY, 0.0]),
            vec![f64::NEG_INFINITY, 0.0]
        );
    }

    #[test]
    fn covariance_at_zero_time_is_zero() {
        let m = NoiseModel::thermal(1.0, 0.5, -0.1, 1.0).unwrap();
        let c = covariance_matrix(&m, &two_branch(1.0, 0.5), 0.0).unwrap();
        assert_eq!(c.matrix, DMatrix::zeros(2, 2));
        assert_eq!(c.cholesky_factor().unwrap(), DMatrix::zeros(2, 2));
    }

    #[test]
    fn coincident_branches_factor_with_jitter() {
        let m = NoiseModel::white(1.0, 1.0).unwrap();
        let c = covariance_matrix(&m, &two_branch(0.0, 0.5), 2.0).unwrap();
        let l = c.cholesky_factor().unwrap();
        let back = &l * l.transpose();
        assert!((back - &c.matrix).abs().max() < 1e-10 * c.trace());
    }

    #[test]
    fn closed_form_limits() {
        assert_eq!(expected_p1p2_closed(0.0, 0.5, 0.5).unwrap(), 0.25);
        assert!((expected_p1p2_closed(1e-10, 0.5, 0.5).unwrap() - 0.25).abs() < 1e-9);
        assert!(expected_p1p2_closed(-1.0, 0.5, 0.5).is_err());
        assert!(expected_p1p2_closed(1.0, 0.5, 0.6).is_err());
        let bound = 0.25 * (PI.sqrt() / 2.0) * 5f64.powf(-0.5) * (-5f64).exp();
        assert!(expected_p1p2_closed(5.0, 0.5, 0.5).unwrap() <= bound);
        assert!(expected_p1p2_closed(400.0, 0.3, 0.7).unwrap() > 0.0);
    }

    /// Brute-force 2-D integral over the correlated Gaussian pair before
    /// the change of variables, with Γ = 4γm²I(0)(1 − r).
    fn two_dimensional_oracle(gamma: f64, p1: f64, r: f64) -> f64 {
        let p2 = 1.0 - p1;
        let var = 4.0 * gamma / (1.0 - r);
        let cov = r * var;
        let det = var * var - cov * cov;
        let spec = QuadratureSpec::default()
            .with_rel_tol(1e-12)
            .with_abs_tol(1e-300);
        let sd = var.sqrt();
        let lim = 12.0 * sd;
        let inner = |x: f64| {
            crate::quadrature::integrate_finite(
                |y| {
                    let q = (var * x * x - 2.0 * cov * x * y + var * y * y) / (2.0 * det);
                    let w = p1 * (x - 0.5 * var).exp() + p2 * (y - 0.5 * var).exp();
                    let lp1 = x - (p1 * x.exp() + p2 * y.exp()).ln();
                    let lp2 = y - (p1 * x.exp() + p2 * y.exp()).ln();
                    (-q).exp() * w * p1 * p2 * (lp1 + lp2).exp()
                },
                -lim,
                lim,
                &spec,
            )
            .unwrap()
            .value
        };
        let outer = crate::quadrature::integrate_finite(inner, -lim, lim, &spec)
            .unwrap()
            .value;
        outer / (2.0 * PI * det.sqrt())
    }

    #[test]
    fn closed_form_matches_two_dimensional_integral() {
        for r in [0.0, 0.4] {
            let oracle = two_dimensional_oracle(1.0, 0.3, r);
            let closed = expected_p1p2_closed(1.0, 0.3, 0.7).unwrap();
            assert!(
                (oracle - closed).abs() < 1e-8 * closed,
                "r={r}: {oracle} vs {closed}"
            );
        }
    }

    #[test]
    fn diffusion_vanishes_at_pure_states() {
        let m = NoiseModel::white(1.0, 1.0).unwrap();
        let g = ParticleGroup::single([0.0; 3], 1.0).unwrap();
        let cfg = SuperpositionConfig::new(
            vec![
                g.clone(),
                g.displaced([1.0, 0.0, 0.0]),
                g.displaced([0.0, 2.0, 0.0]),
            ],
            vec![1.0, 0.0, 0.0],
        )
        .unwrap();
        assert!(fp_diffusion_matrix(&m, &cfg, 1.0).unwrap().abs().max() < 1e-15);
        let cfg = SuperpositionConfig::new(cfg.groups().to_vec(), vec![0.5, 0.0, 0.5]).unwrap();
        let a = fp_diffusion_matrix(&m, &cfg, 1.0).unwrap();
        assert!(a.row(1).iter().all(|v| *v == 0.0));
        assert_eq!(a, a.transpose());
    }

    #[test]
    fn two_branch_moment_matches_rate_form() {
        let m = NoiseModel::thermal(1.0, 0.5, -0.1, 1.0).unwrap();
        let cfg = two_branch(1.5, 0.3);
        let t = 2.0;
        let rhs = moment_rhs(&m, &cfg, t, 0, 0).unwrap();
        let g = cfg.groups();
        let rate = gamma_rate(&m, &g[0], &g[1], t).unwrap();
        let expected = -8.0 * rate * (0.3f64 * 0.7).powi(2);
        assert!((rhs - expected).abs() < 1e-12 * expected.abs());
    }

    #[test]
    fn coincident_geometry_has_no_drift() {
        let m = NoiseModel::white(1.0, 1.0).unwrap();
        assert_eq!(
            moment_rhs(&m, &two_branch(0.0, 0.4), 1.0, 0, 1).unwrap(),
            0.0
        );
    }

    fn white_times(gammas: &[f64], separation: f64) -> Vec<f64> {
        let m = NoiseModel::white(1.0, 1.0).unwrap();
        let g = ParticleGroup::single([0.0; 3], 1.0).unwrap();
        let rate = gamma_rate(&m, &g, &g.displaced([separation, 0.0, 0.0]), 1.0).unwrap();
        gammas.iter().map(|x| x / rate).collect()
    }

    #[test]
    fn samplers_agree_with_closed_form() {
        let m = NoiseModel::white(1.0, 1.0).unwrap();
        let cfg = two_branch(20.0, 0.4);
        let gammas = [0.5, 2.0];
        let times = white_times(&gammas, 20.0);
        for sampler in [Sampler::Reweighted, Sampler::Physical, Sampler::Midpoint] {
            let spec = EnsembleSpec::new(20_000, 3, times.clone())
                .unwrap()
                .with_sampler(sampler);
            let batch = sample_reduction_ensemble(&m, &cfg, &spec).unwrap();
            for s in &batch.summaries {
                let closed = expected_p1p2_closed(s.gamma, 0.4, 0.6).unwrap();
                let dev = s.product.deviation(closed);
                assert!(dev < 4.0, "{sampler:?} G={}: {dev} se", s.gamma);
                assert!(s.weight.deviation(1.0) < 4.0, "{sampler:?} weight");
            }
        }
    }

    #[test]
    fn physical_sampler_keeps_branch_means() {
        let m = NoiseModel::white(1.0, 1.0).unwrap();
        let g = ParticleGroup::single([0.0; 3], 1.0).unwrap();
        let cfg = SuperpositionConfig::new(
            vec![
                g.clone(),
                g.displaced([2.0, 0.0, 0.0]),
                g.displaced([0.0, 9.0, 0.0]),
            ],
            vec![0.2, 0.3, 0.5],
        )
        .unwrap();
        let spec = EnsembleSpec::new(20_000, 9, white_times(&[1.0, 4.0], 20.0))
            .unwrap()
            .with_sampler(Sampler::Physical);
        let batch = sample_reduction_ensemble(&m, &cfg, &spec).unwrap();
        for s in &batch.summaries {
            for (est, p0) in s.probabilities.iter().zip(cfg.amplitudes()) {
                assert!(est.deviation(*p0) < 4.0, "{est:?} vs {p0}");
            }
        }
    }

    #[test]
    fn zero_time_leaves_probabilities_untouched() {
        let m = NoiseModel::white(1.0, 1.0).unwrap();
        let cfg = two_branch(3.0, 0.25);
        for sampler in [Sampler::Reweighted, Sampler::Physical, Sampler::Midpoint] {
            let spec = EnsembleSpec::new(50, 1, vec![0.0])
                .unwrap()
                .with_sampler(sampler);
            let s = &sample_reduction_ensemble(&m, &cfg, &spec)
                .unwrap()
                .summaries[0];
            assert!((s.probabilities[0].mean - 0.25).abs() < 1e-15);
            assert!(s.probabilities[0].stderr < 1e-15);
            assert!((s.product.mean - 0.1875).abs() < 1e-15);
        }
    }
}
