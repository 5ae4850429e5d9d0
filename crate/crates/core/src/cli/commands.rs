//! Command implementations producing [`CommandOutput`]s.

use serde_json::json;

use super::config::RunConfig;
use super::output::{Cell, Sheet};
use super::{Command, CommandOutput};
use crate::correlators::{KernelKind, NoiseModel, Spatial};
use crate::dynamics::{
    expected_p1p2_closed, fp_diffusion_matrix, moment_rhs, sample_reduction_ensemble, EnsembleSpec,
};
use crate::error::{Error, ErrorCategory, Result};
use crate::observables::{
    energy_rate, energy_total, gamma_spectrum, gamma_suppression_exponent, markov_diagnostic,
    EnergyTotal,
};
use crate::phenomenology::{
    dm_derived, dm_required_density, fifth_force_bound, make_tables, DarkMatterScenario,
};
use crate::rates::{gamma_pair_with, reduction_bounds, RateOptions};
use crate::units::{
    gev_to_kelvin, km_per_s_to_c, natural_to_cm, natural_to_seconds, KEV, NUCLEON_MASS,
};

pub fn execute(command: Command, config: &RunConfig) -> Result<CommandOutput> {
    match command {
        Command::Kernel => kernel(config),
        Command::Rate => rate(config),
        Command::ReduceMc => reduce_mc(config),
        Command::FokkerPlanck => fokker_planck(config),
        Command::Energy => energy(config),
        Command::GammaSpectrum => spectrum(config),
        Command::DmScan => dm_scan(config),
        Command::Tables => tables(),
    }
}

/// Turns values that do not exist for a model (distributional, divergent,
/// unsupported) into NaN with a warning; numerical failures propagate.
fn soft(value: Result<f64>, what: &str, out: &mut CommandOutput) -> Result<f64> {
    match value {
        Ok(v) => Ok(v),
        Err(e) if e.category() == ErrorCategory::Validation => {
            let warning = format!("{what}: {e}");
            if !out.warnings.contains(&warning) {
                out.warnings.push(warning);
            }
            Ok(f64::NAN)
        }
        Err(e) => Err(e),
    }
}

fn model_with_warnings(config: &RunConfig, out: &mut CommandOutput) -> Result<NoiseModel> {
    let model = config.model.build()?;
    if let Some(w) = model.validity_warning() {
        out.warnings.push(w);
    }
    out.notes.insert("model".into(), json!(model.tag()));
    Ok(model)
}

fn kernel(config: &RunConfig) -> Result<CommandOutput> {
    let mut out = CommandOutput::default();
    let model = model_with_warnings(config, &mut out)?;
    let times = config.run.times(&model)?;
    let radii = config.run.radii(&model)?;
    let kinds = [
        ("D", KernelKind::Correlator),
        ("F", KernelKind::FirstIntegral),
        ("I", KernelKind::SecondIntegral),
    ];
    let mut sheet = Sheet::new(
        "kernel",
        &["t", "r", "D", "F", "I", "D_diff", "F_diff", "I_diff"],
    );
    for &t in &times {
        for &r in &radii {
            let mut row: Vec<Cell> = vec![t.into(), r.into()];
            for spatial in [Spatial::Full, Spatial::Difference] {
                for (name, kind) in kinds {
                    row.push(soft(model.kernel(kind, spatial, r, t), name, &mut out)?.into());
                }
            }
            sheet.push(row);
        }
    }
    out.sheets.push(sheet);
    if let Some(ks) = config.run.wavenumbers()? {
        let mut fourier = Sheet::new("kernel_fourier", &["t", "k", "F_hat", "I_hat"]);
        for &t in &times {
            for &k in &ks {
                let f = soft(model.fourier_fhat(k, t), "F_hat", &mut out)?;
                let i = soft(model.fourier_ihat(k, t), "I_hat", &mut out)?;
                fourier.push(vec![t.into(), k.into(), f.into(), i.into()]);
            }
        }
        out.sheets.push(fourier);
    }
    Ok(out)
}

fn rate_options(config: &RunConfig) -> RateOptions {
    let options = RateOptions::default();
    if config.run.far_field.unwrap_or(false) {
        options.with_far_field()
    } else {
        options
    }
}

fn rate(config: &RunConfig) -> Result<CommandOutput> {
    let mut out = CommandOutput::default();
    let model = model_with_warnings(config, &mut out)?;
    let geometry = config.geometry.build(&model)?;
    let times = config.run.times(&model)?;
    let options = rate_options(config);
    let p = geometry.amplitudes();
    let mut sheet = Sheet::new(
        "rate",
        &[
            "t",
            "l",
            "m",
            "gamma",
            "offdiag_decay",
            "bound_lower",
            "bound_upper",
        ],
    );
    for &t in &times {
        for l in 0..geometry.branches() {
            for m in l + 1..geometry.branches() {
                let gamma = gamma_pair_with(
                    &model,
                    &geometry.groups()[l],
                    &geometry.groups()[m],
                    t,
                    &options,
                )?
                .gamma;
                let bounds = reduction_bounds(gamma.max(0.0), p[l] * p[m])?;
                sheet.push(vec![
                    t.into(),
                    l.into(),
                    m.into(),
                    gamma.into(),
                    (-gamma).exp().into(),
                    bounds.lower.into(),
                    bounds.upper.into(),
                ]);
            }
        }
    }
    out.sheets.push(sheet);
    Ok(out)
}

/// Default ensemble size for `reduce-mc`.
const DEFAULT_N_TRAJ: usize = 10_000;

fn reduce_mc(config: &RunConfig) -> Result<CommandOutput> {
    let mut out = CommandOutput::default();
    let model = model_with_warnings(config, &mut out)?;
    let geometry = config.geometry.build(&model)?;
    let times = config.run.times(&model)?;
    let seed = config.run.seed.unwrap_or(0);
    let spec = EnsembleSpec::new(config.run.n_traj.unwrap_or(DEFAULT_N_TRAJ), seed, times)?
        .with_sampler(config.run.sampler.unwrap_or_default());
    let batch = sample_reduction_ensemble(&model, &geometry, &spec)?;
    let n = geometry.branches();
    let p = geometry.amplitudes();
    let mut headers = vec![
        "t",
        "gamma",
        "weight_mean",
        "weight_stderr",
        "p1p2_mean",
        "p1p2_stderr",
        "p1p2_closed",
        "closed_deviation_sigma",
        "bound_lower",
        "bound_upper",
    ];
    let branch_headers: Vec<String> = (0..n)
        .flat_map(|j| [format!("p{j}_mean"), format!("p{j}_stderr")])
        .collect();
    headers.extend(branch_headers.iter().map(String::as_str));
    let mut sheet = Sheet::new("reduce-mc", &headers);
    for s in &batch.summaries {
        let closed = if n == 2 {
            expected_p1p2_closed(s.gamma, p[0], p[1])?
        } else {
            f64::NAN
        };
        let bounds = reduction_bounds(s.gamma.max(0.0), p[0] * p[1])?;
        let mut row: Vec<Cell> = vec![
            s.t.into(),
            s.gamma.into(),
            s.weight.mean.into(),
            s.weight.stderr.into(),
            s.product.mean.into(),
            s.product.stderr.into(),
            closed.into(),
            if n == 2 {
                s.product.deviation(closed)
            } else {
                f64::NAN
            }
            .into(),
            bounds.lower.into(),
            bounds.upper.into(),
        ];
        for e in &s.probabilities {
            row.push(e.mean.into());
            row.push(e.stderr.into());
        }
        sheet.push(row);
    }
    out.notes.insert("n_traj".into(), json!(batch.n_traj));
    out.notes.insert("seed".into(), json!(batch.seed));
    out.notes.insert("sampler".into(), json!(spec.sampler));
    out.sheets.push(sheet);
    Ok(out)
}

fn fokker_planck(config: &RunConfig) -> Result<CommandOutput> {
    let mut out = CommandOutput::default();
    let model = model_with_warnings(config, &mut out)?;
    let geometry = config.geometry.build(&model)?;
    let times = config.run.times(&model)?;
    let mut sheet = Sheet::new(
        "fokker-planck",
        &["t", "m", "l", "diffusion", "moment_drift"],
    );
    for &t in &times {
        let a = fp_diffusion_matrix(&model, &geometry, t)?;
        for m in 0..geometry.branches() {
            for l in m..geometry.branches() {
                let drift = moment_rhs(&model, &geometry, t, m, l)?;
                sheet.push(vec![
                    t.into(),
                    m.into(),
                    l.into(),
                    a[(m, l)].into(),
                    drift.into(),
                ]);
            }
        }
    }
    out.sheets.push(sheet);
    Ok(out)
}

fn energy(config: &RunConfig) -> Result<CommandOutput> {
    let mut out = CommandOutput::default();
    let model = model_with_warnings(config, &mut out)?;
    let species = config.run.species()?;
    let times = config.run.times(&model)?;
    let mut sheet = Sheet::new("energy", &["t", "rate", "total"]);
    for &t in &times {
        let rate = soft(energy_rate(&model, &species, t), "energy rate", &mut out)?;
        let total = match energy_total(&model, &species, t) {
            Ok(EnergyTotal::Finite { value }) => value,
            other => soft(other.map(|_| f64::NAN), "energy total", &mut out)?,
        };
        sheet.push(vec![t.into(), rate.into(), total.into()]);
    }
    out.sheets.push(sheet);
    match energy_total(&model, &species, f64::INFINITY) {
        Ok(EnergyTotal::Finite { value }) => {
            out.notes.insert("total_at_infinity".into(), json!(value));
            out.notes.insert(
                "total_at_infinity_kelvin".into(),
                json!(gev_to_kelvin(value)),
            );
        }
        Ok(EnergyTotal::Unbounded { exponent, stderr }) => {
            out.notes.insert("growth_exponent".into(), json!(exponent));
            out.notes
                .insert("growth_exponent_stderr".into(), json!(stderr));
        }
        Err(e) => {
            soft(Err(e), "energy total at infinity", &mut out)?;
        }
    }
    let heaviest = species
        .iter()
        .map(|s| s.inertial_mass)
        .fold(f64::NAN, f64::min);
    match markov_diagnostic(&model, heaviest) {
        Ok(d) => {
            out.notes.insert("markov_ratio".into(), json!(d.ratio));
            out.notes.insert("markov_k_max".into(), json!(d.k_max));
        }
        Err(e) => {
            soft(Err(e), "Markov diagnostic", &mut out)?;
        }
    }
    Ok(out)
}

fn spectrum(config: &RunConfig) -> Result<CommandOutput> {
    let mut out = CommandOutput::default();
    let model = model_with_warnings(config, &mut out)?;
    let (mass, temperature) = match &model {
        NoiseModel::Thermal(m) => (m.mass, m.temperature),
        NoiseModel::DiluteNr(m) => (m.mass, m.temperature),
        other => {
            return Err(Error::WrongModel {
                expected: "thermal or dilute",
                found: other.tag(),
            })
        }
    };
    let energies = config.run.photon_energies(&model)?;
    let mut sheet = Sheet::new(
        "gamma-spectrum",
        &[
            "p",
            "dP_dp",
            "log_dP_dp",
            "below_threshold",
            "suppression_exponent",
        ],
    );
    for p in energies {
        let point = gamma_spectrum(&model, p)?;
        sheet.push(vec![
            p.into(),
            point.power_per_energy.into(),
            point.log_power_per_energy.into(),
            point.below_threshold.into(),
            ((p - mass) / temperature).into(),
        ]);
    }
    out.sheets.push(sheet);
    Ok(out)
}

fn dm_scan(config: &RunConfig) -> Result<CommandOutput> {
    let mut out = CommandOutput::default();
    let scan = config.scan.resolve()?;
    let mut sheet = Sheet::new(
        "dm-scan",
        &[
            "mu",
            "v_rms",
            "r_c_cm",
            "temperature",
            "t_r_s",
            "chem_factor",
            "non_dilute",
            "exponent_2gamma",
            "gamma_rho_m_reference",
            "gamma_rho_m_consistent",
            "rho_m_table",
            "rho_m_consistent",
            "fifth_force_log10_m_gev",
            "energy_total_kelvin",
        ],
    );
    let n_out = scan.nucleons_per_bunch.powi(2) * scan.bunches;
    for &mu in &scan.masses {
        for &v in &scan.velocities {
            let s = DarkMatterScenario::new(
                mu,
                v,
                scan.density,
                scan.coupling,
                scan.nucleons_per_bunch,
                scan.bunches,
                scan.fifth_force_scale,
            )?;
            let d = dm_derived(&s);
            let required = dm_required_density(mu, n_out, scan.coupling)?;
            let bound = fifth_force_bound(mu, scan.fifth_force_scale)?;
            let heat = if d.non_dilute {
                f64::NAN
            } else {
                let model = s.noise_model()?;
                let species = [crate::observables::ParticleSpecies::nucleon(1.0)];
                energy_total(&model, &species, f64::INFINITY)?
                    .value()
                    .map_or(f64::NAN, gev_to_kelvin)
            };
            sheet.push(vec![
                mu.into(),
                v.into(),
                natural_to_cm(d.correlation_length).into(),
                d.temperature.into(),
                natural_to_seconds(d.reduction_time).into(),
                d.chem_factor.into(),
                d.non_dilute.into(),
                d.exponent_2gamma.into(),
                required.gamma_rho_m_reference.into(),
                required.gamma_rho_m_consistent.into(),
                required.rho_m.into(),
                required.rho_m_consistent.into(),
                bound.log10_min_scale_gev.into(),
                heat.into(),
            ]);
        }
    }
    out.notes.insert("n_out".into(), json!(n_out));
    out.notes.insert("nucleon_mass".into(), json!(NUCLEON_MASS));
    out.sheets.push(sheet);
    Ok(out)
}

fn tables() -> Result<CommandOutput> {
    let mut out = CommandOutput::default();
    let mut text = String::new();
    for (index, table) in make_tables().iter().enumerate() {
        let mut headers = vec!["row".to_string()];
        headers.extend(table.masses_kev.iter().map(|m| format!("mu_{m}_keV")));
        headers.push("kind".into());
        let header_refs: Vec<&str> = headers.iter().map(String::as_str).collect();
        let mut sheet = Sheet::new(&format!("table{}_{}", index + 1, table.name), &header_refs);
        for row in &table.rows {
            for (kind, values) in [("display", &row.display), ("value", &row.values)] {
                let mut cells: Vec<Cell> = vec![row.label.as_str().into()];
                cells.extend(values.iter().map(|&v| Cell::Num(v)));
                cells.push(kind.into());
                sheet.push(cells);
            }
        }
        out.sheets.push(sheet);
        text.push_str(&table.render_text());
        text.push('\n');
    }
    out.extra_files
        .push(("tables.txt".into(), text.into_bytes()));
    // Emission at 11 keV is weakest for the heaviest mass in 1-10 keV.
    let v = km_per_s_to_c(220.0);
    let exponent = [1.0, 10.0]
        .iter()
        .map(|m| gamma_suppression_exponent(11.0 * KEV, m * KEV, v))
        .fold(f64::INFINITY, f64::min);
    out.notes
        .insert("gamma_11kev_min_exponent".into(), json!(exponent));
    Ok(out)
}
