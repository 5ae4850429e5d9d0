//! Adaptive Gauss–Kronrod quadrature on finite and semi-infinite ranges.
//!
//! All integrals in the crate go through this module. The engine keeps a
//! max-heap of subintervals keyed on their error estimate and bisects the
//! worst one until the global tolerance is met. Semi-infinite ranges are
//! covered by a growing sequence of panels that stops once the integrand's
//! absolute mass in the trailing panels is negligible; when an oscillation
//! period is known, panel edges sit on half-period multiples so that the
//! cancellation between lobes is resolved panel by panel.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use thiserror::Error;

use crate::error::{Error, Result};

/// Kronrod abscissae on [-1, 1] (non-negative half, descending).
#[allow(clippy::excessive_precision)]
const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];

#[allow(clippy::excessive_precision)]
const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_208_969_614_319,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

/// Gauss weights for the odd-indexed Kronrod abscissae.
#[allow(clippy::excessive_precision)]
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

const EVALS_PER_RULE: usize = 21;
const MAX_OSC_HALVES_PER_PANEL: f64 = 8.0;
const MAX_PANELS: usize = 400_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QuadError {
    #[error("integrand returned {value} at x = {x:e}")]
    NonFinite { x: f64, value: f64 },
    #[error("quadrature did not converge: value {value:e}, error estimate {error_estimate:e} after {evals} evaluations")]
    NotConverged {
        value: f64,
        error_estimate: f64,
        evals: usize,
    },
    #[error("invalid quadrature spec: {0}")]
    InvalidSpec(String),
}

/// Strategy and tolerances for one integral.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureSpec {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_evals: usize,
    /// Period of the dominant oscillation in the integration variable.
    pub oscillation_period: Option<f64>,
    /// Share of the tolerance that the truncated tail may consume.
    pub tail_cut: f64,
    /// Width of the integrand's main feature; sets the first panel.
    pub scale: f64,
    /// Also accept an error below this multiple of ∫|f|, for integrals that
    /// cancel to near zero and feed a further quadrature.
    pub magnitude_tol: f64,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            rel_tol: 1e-8,
            abs_tol: 1e-14,
            max_evals: 1_000_000,
            oscillation_period: None,
            tail_cut: 0.1,
            scale: 1.0,
            magnitude_tol: 0.0,
        }
    }
}

impl QuadratureSpec {
    pub fn with_rel_tol(mut self, rel_tol: f64) -> Self {
        self.rel_tol = rel_tol;
        self
    }

    pub fn with_abs_tol(mut self, abs_tol: f64) -> Self {
        self.abs_tol = abs_tol;
        self
    }

    pub fn with_max_evals(mut self, max_evals: usize) -> Self {
        self.max_evals = max_evals;
        self
    }

    pub fn with_period(mut self, period: Option<f64>) -> Self {
        self.oscillation_period = period.filter(|p| p.is_finite() && *p > 0.0);
        self
    }

    pub fn with_scale(mut self, scale: f64) -> Self {
        self.scale = scale;
        self
    }

    pub fn with_magnitude_tol(mut self, magnitude_tol: f64) -> Self {
        self.magnitude_tol = magnitude_tol;
        self
    }

    pub fn validate(&self) -> std::result::Result<(), QuadError> {
        if !(self.rel_tol > 0.0) {
            return Err(QuadError::InvalidSpec(format!(
                "rel_tol must be > 0, got {}",
                self.rel_tol
            )));
        }
        if !(self.abs_tol >= 0.0) {
            return Err(QuadError::InvalidSpec(format!(
                "abs_tol must be >= 0, got {}",
                self.abs_tol
            )));
        }
        if self.max_evals == 0 {
            return Err(QuadError::InvalidSpec("max_evals must be > 0".into()));
        }
        if !(self.tail_cut > 0.0 && self.tail_cut < 1.0) {
            return Err(QuadError::InvalidSpec(format!(
                "tail_cut must lie in (0, 1), got {}",
                self.tail_cut
            )));
        }
        if !(self.magnitude_tol >= 0.0) {
            return Err(QuadError::InvalidSpec(format!(
                "magnitude_tol must be >= 0, got {}",
                self.magnitude_tol
            )));
        }
        if !(self.scale > 0.0 && self.scale.is_finite()) {
            return Err(QuadError::InvalidSpec(format!(
                "scale must be positive, got {}",
                self.scale
            )));
        }
        Ok(())
    }

    fn target(&self, value: f64, magnitude: f64) -> f64 {
        self.abs_tol
            .max(self.rel_tol * value.abs())
            .max(self.magnitude_tol * magnitude)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureResult {
    pub value: f64,
    pub error_estimate: f64,
    pub evals: usize,
    pub converged: bool,
    /// Estimate of ∫|f|.
    pub magnitude: f64,
}

impl QuadratureResult {
    /// The value, or `NotConverged` when the tolerance was not reached.
    pub fn into_value(self) -> std::result::Result<f64, QuadError> {
        if self.converged {
            Ok(self.value)
        } else {
            Err(QuadError::NotConverged {
                value: self.value,
                error_estimate: self.error_estimate,
                evals: self.evals,
            })
        }
    }

    fn combine(self, other: QuadratureResult, spec: &QuadratureSpec) -> QuadratureResult {
        let value = self.value + other.value;
        let error_estimate = self.error_estimate + other.error_estimate;
        let magnitude = self.magnitude + other.magnitude;
        QuadratureResult {
            value,
            error_estimate,
            evals: self.evals + other.evals,
            converged: self.converged
                && other.converged
                && error_estimate <= spec.target(value, magnitude),
            magnitude,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
    abs: f64,
}

#[derive(Debug, Clone, Copy)]
struct HeapEntry {
    error: f64,
    index: usize,
}

impl PartialEq for HeapEntry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for HeapEntry {}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error
            .total_cmp(&other.error)
            .then_with(|| other.index.cmp(&self.index))
    }
}

fn gk21<F>(f: &mut F, a: f64, b: f64) -> std::result::Result<Segment, QuadError>
where
    F: FnMut(f64) -> std::result::Result<f64, QuadError>,
{
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut eval = |x: f64| -> std::result::Result<f64, QuadError> {
        let y = f(x)?;
        if y.is_finite() {
            Ok(y)
        } else {
            Err(QuadError::NonFinite { x, value: y })
        }
    };

    let fc = eval(center)?;
    let mut kronrod = WGK[10] * fc;
    let mut gauss = 0.0;
    let mut abs_sum = WGK[10] * fc.abs();
    let mut fv1 = [0.0; 10];
    let mut fv2 = [0.0; 10];
    for j in 0..10 {
        let dx = half * XGK[j];
        let f1 = eval(center - dx)?;
        let f2 = eval(center + dx)?;
        fv1[j] = f1;
        fv2[j] = f2;
        kronrod += WGK[j] * (f1 + f2);
        abs_sum += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            gauss += WG[j / 2] * (f1 + f2);
        }
    }

    let mean = 0.5 * kronrod;
    let mut asc = WGK[10] * (fc - mean).abs();
    for j in 0..10 {
        asc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }

    let value = kronrod * half;
    let abs = abs_sum * half.abs();
    let asc = asc * half.abs();
    let mut error = ((kronrod - gauss) * half).abs();
    if asc != 0.0 && error != 0.0 {
        error = asc * (200.0 * error / asc).powf(1.5).min(1.0);
    }
    if abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        error = error.max(50.0 * f64::EPSILON * abs);
    }
    Ok(Segment {
        a,
        b,
        value,
        error,
        abs,
    })
}

const ROUNDOFF: f64 = 200.0 * f64::EPSILON;

enum Refined {
    Converged,
    Exhausted,
    NeedsTail,
}

struct Engine<'a, F> {
    f: &'a mut F,
    spec: QuadratureSpec,
    segments: Vec<Segment>,
    heap: BinaryHeap<HeapEntry>,
    evals: usize,
}

impl<'a, F> Engine<'a, F>
where
    F: FnMut(f64) -> std::result::Result<f64, QuadError>,
{
    fn new(f: &'a mut F, spec: QuadratureSpec) -> Self {
        Self {
            f,
            spec,
            segments: Vec::new(),
            heap: BinaryHeap::new(),
            evals: 0,
        }
    }

    fn add(&mut self, a: f64, b: f64) -> std::result::Result<Segment, QuadError> {
        let seg = gk21(self.f, a, b)?;
        self.evals += EVALS_PER_RULE;
        self.heap.push(HeapEntry {
            error: seg.error,
            index: self.segments.len(),
        });
        self.segments.push(seg);
        Ok(seg)
    }

    fn budget_left(&self) -> bool {
        self.evals + 2 * EVALS_PER_RULE <= self.spec.max_evals
    }

    /// Value, error and absolute mass summed in ascending order of the
    /// left endpoint.
    fn totals(&self) -> Totals {
        let mut live: Vec<&Segment> = self.heap.iter().map(|e| &self.segments[e.index]).collect();
        live.sort_by(|x, y| x.a.total_cmp(&y.a));
        live.iter().fold(Totals::default(), |t, s| Totals {
            value: t.value + s.value,
            error: t.error + s.error,
            abs: t.abs + s.abs,
        })
    }

    /// Error goal, never below the rounding floor of the rule.
    fn goal(&self, t: &Totals) -> f64 {
        self.spec.target(t.value, t.abs).max(ROUNDOFF * t.abs)
    }

    fn refine(&mut self, reserve: f64) -> std::result::Result<Refined, QuadError> {
        let mut t = self.totals();
        let mut steps = 0usize;
        loop {
            if reserve > 0.5 * self.goal(&t) {
                t = self.totals();
                if reserve > 0.5 * self.goal(&t) {
                    return Ok(Refined::NeedsTail);
                }
            }
            if t.error <= self.goal(&t) - reserve {
                t = self.totals();
                if t.error <= self.goal(&t) - reserve {
                    return Ok(Refined::Converged);
                }
                continue;
            }
            if !self.budget_left() {
                return Ok(Refined::Exhausted);
            }
            let worst = match self.heap.pop() {
                Some(entry) => entry,
                None => return Ok(Refined::Exhausted),
            };
            let seg = self.segments[worst.index];
            let mid = 0.5 * (seg.a + seg.b);
            let tiny = 4.0 * f64::EPSILON * seg.a.abs().max(seg.b.abs()).max(f64::MIN_POSITIVE);
            if seg.b - seg.a <= tiny || mid <= seg.a || mid >= seg.b {
                self.heap.push(worst);
                return Ok(Refined::Exhausted);
            }
            let left = self.add(seg.a, mid)?;
            let right = self.add(mid, seg.b)?;
            t.value += left.value + right.value - seg.value;
            t.error += left.error + right.error - seg.error;
            t.abs += left.abs + right.abs - seg.abs;
            steps += 1;
            if steps.is_multiple_of(64) {
                t = self.totals();
            }
        }
    }

    fn result(&self, extra_error: f64, finished: bool) -> QuadratureResult {
        let t = self.totals();
        let error_estimate = t.error + extra_error;
        QuadratureResult {
            value: t.value,
            error_estimate,
            evals: self.evals,
            converged: finished && error_estimate <= self.goal(&t),
            magnitude: t.abs,
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct Totals {
    value: f64,
    error: f64,
    abs: f64,
}

fn lift<F: FnMut(f64) -> f64>(mut f: F) -> impl FnMut(f64) -> std::result::Result<f64, QuadError> {
    move |x| Ok(f(x))
}

/// ∫₀^∞ f(x) dx.
pub fn integrate_semi_infinite<F>(
    f: F,
    spec: &QuadratureSpec,
) -> std::result::Result<QuadratureResult, QuadError>
where
    F: FnMut(f64) -> f64,
{
    try_integrate_from(lift(f), 0.0, spec)
}

/// ∫₀^∞ f(x) dx for an integrand that may itself fail.
pub fn try_integrate_semi_infinite<F>(
    f: F,
    spec: &QuadratureSpec,
) -> std::result::Result<QuadratureResult, QuadError>
where
    F: FnMut(f64) -> std::result::Result<f64, QuadError>,
{
    try_integrate_from(f, 0.0, spec)
}

/// ∫ₐ^∞ f(x) dx.
pub fn try_integrate_from<F>(
    mut f: F,
    start: f64,
    spec: &QuadratureSpec,
) -> std::result::Result<QuadratureResult, QuadError>
where
    F: FnMut(f64) -> std::result::Result<f64, QuadError>,
{
    spec.validate()?;
    let half_period = spec.oscillation_period.map(|p| 0.5 * p);
    let lobes = if half_period.is_some() { 2 } else { 1 };
    let width = |k: i32| -> f64 {
        let w = spec.scale * 2f64.powi(k.min(1000));
        match half_period {
            Some(h) => (w / h).floor().clamp(1.0, MAX_OSC_HALVES_PER_PANEL) * h,
            None => w,
        }
    };

    let mut engine = Engine::new(&mut f, *spec);
    let mut edge = start;
    let mut k = 0i32;
    let mut recent: Vec<f64> = Vec::new();
    let mut running = 0.0;
    let mut running_abs = 0.0;

    loop {
        // Extend panels past one feature width until the trailing absolute
        // mass is negligible.
        loop {
            let tail: f64 = recent.iter().rev().take(lobes).sum();
            let enough = recent.len() > lobes
                && edge >= start + spec.scale
                && (running_abs > 0.0 || recent.len() >= 64)
                && tail <= spec.tail_cut * spec.target(running, running_abs);
            if enough {
                break;
            }
            if engine.segments.len() >= MAX_PANELS || !engine.budget_left() {
                return Ok(engine.result(tail, false));
            }
            let w = width(k);
            let next = edge + w;
            if !next.is_finite() || next <= edge {
                return Ok(engine.result(tail, false));
            }
            let seg = engine.add(edge, next)?;
            running += seg.value;
            running_abs += seg.abs;
            recent.push(seg.abs);
            edge = next;
            k += 1;
        }
        let tail: f64 = recent.iter().rev().take(lobes).sum();
        match engine.refine(tail)? {
            Refined::Exhausted => return Ok(engine.result(tail, false)),
            Refined::NeedsTail => running = engine.totals().value,
            Refined::Converged => {
                let totals = engine.totals();
                let value = totals.value;
                if tail <= spec.tail_cut * spec.target(value, totals.abs) {
                    return Ok(engine.result(tail, true));
                }
                running = value;
                // The refined value is smaller than the running estimate
                // suggested; keep extending against the new target.
                recent.clear();
            }
        }
    }
}

/// ∫ₐᵇ f(x) dx.
pub fn integrate_finite<F>(
    f: F,
    a: f64,
    b: f64,
    spec: &QuadratureSpec,
) -> std::result::Result<QuadratureResult, QuadError>
where
    F: FnMut(f64) -> f64,
{
    try_integrate_finite(lift(f), a, b, spec)
}

/// ∫ₐᵇ f(x) dx for an integrand that may itself fail.
pub fn try_integrate_finite<F>(
    mut f: F,
    a: f64,
    b: f64,
    spec: &QuadratureSpec,
) -> std::result::Result<QuadratureResult, QuadError>
where
    F: FnMut(f64) -> std::result::Result<f64, QuadError>,
{
    spec.validate()?;
    if !(a.is_finite() && b.is_finite()) {
        return Err(QuadError::InvalidSpec(format!(
            "finite range required, got [{a}, {b}]"
        )));
    }
    if a == b {
        return Ok(QuadratureResult {
            value: 0.0,
            error_estimate: 0.0,
            evals: 0,
            converged: true,
            magnitude: 0.0,
        });
    }
    if b < a {
        let r = try_integrate_finite(f, b, a, spec)?;
        return Ok(QuadratureResult {
            value: -r.value,
            ..r
        });
    }
    let panels = match spec.oscillation_period {
        Some(p) => {
            (((b - a) / (0.5 * p * MAX_OSC_HALVES_PER_PANEL)).ceil() as usize).clamp(1, MAX_PANELS)
        }
        None => 1,
    };
    let mut engine = Engine::new(&mut f, *spec);
    let step = (b - a) / panels as f64;
    for i in 0..panels {
        let lo = a + step * i as f64;
        let hi = if i + 1 == panels {
            b
        } else {
            a + step * (i + 1) as f64
        };
        engine.add(lo, hi)?;
    }
    let finished = matches!(engine.refine(0.0)?, Refined::Converged);
    Ok(engine.result(0.0, finished))
}

/// ∫₀ᶜ x^α h(x) dx for α > −1 with h regular at the origin.
///
/// For α < 0 the substitution x = c·s^{1/(α+1)} removes the endpoint
/// singularity.
pub fn try_integrate_power_finite<F>(
    mut h: F,
    alpha: f64,
    c: f64,
    spec: &QuadratureSpec,
) -> std::result::Result<QuadratureResult, QuadError>
where
    F: FnMut(f64) -> std::result::Result<f64, QuadError>,
{
    if !(alpha > -1.0) {
        return Err(QuadError::InvalidSpec(format!(
            "power weight x^{alpha} is not integrable at 0"
        )));
    }
    if alpha >= 0.0 {
        return try_integrate_finite(|x| Ok(x.powf(alpha) * h(x)?), 0.0, c, spec);
    }
    let q = 1.0 / (alpha + 1.0);
    let pref = c.powf(alpha + 1.0) / (alpha + 1.0);
    let mut local = *spec;
    local.oscillation_period = spec.oscillation_period.map(|p| p / c);
    let r = try_integrate_finite(|s| h(c * s.powf(q)), 0.0, 1.0, &local)?;
    Ok(QuadratureResult {
        value: pref * r.value,
        error_estimate: pref.abs() * r.error_estimate,
        magnitude: pref.abs() * r.magnitude,
        ..r
    })
}

/// ∫₀^∞ x^α h(x) dx for α > −1 with h regular at the origin.
///
/// The range is split at `spec.scale`; the inner piece uses the power
/// substitution and the outer piece the panel scheme.
pub fn try_integrate_power_semi_infinite<F>(
    mut h: F,
    alpha: f64,
    spec: &QuadratureSpec,
) -> std::result::Result<QuadratureResult, QuadError>
where
    F: FnMut(f64) -> std::result::Result<f64, QuadError>,
{
    spec.validate()?;
    let c = match spec.oscillation_period {
        Some(p) => spec.scale.min(0.5 * p),
        None => spec.scale,
    };
    // Each piece gets half the absolute budget. When the two pieces cancel,
    // rerun both against a goal tightened by the cancellation ratio.
    let mut local = *spec;
    local.abs_tol = 0.5 * spec.abs_tol;
    loop {
        let inner = try_integrate_power_finite(&mut h, alpha, c, &local)?;
        let outer = try_integrate_from(|x| Ok(x.powf(alpha) * h(x)?), c, &local)?;
        let pieces = inner.value.abs() + outer.value.abs();
        let combined = inner.combine(outer, spec);
        if combined.converged || !(inner.converged && outer.converged) {
            return Ok(combined);
        }
        let needed = spec.target(combined.value, combined.magnitude) / pieces;
        if !(needed < local.rel_tol) || needed < ROUNDOFF {
            return Ok(combined);
        }
        local.rel_tol = 0.5 * needed;
        local.abs_tol = 0.5 * spec.abs_tol;
    }
}

/// ∫₀^∞ ωⁿ / (e^{(ω−ζ)/T} − 1) dω.
pub fn bose_integral(n: f64, zeta: f64, temperature: f64) -> Result<f64> {
    if !(temperature > 0.0) || !temperature.is_finite() {
        return Err(Error::Domain(format!(
            "temperature must be positive, got {temperature}"
        )));
    }
    if zeta > 0.0 {
        return Err(Error::Domain(format!(
            "chemical potential {zeta} > 0 places a pole inside the integration range"
        )));
    }
    let z = zeta / temperature;
    let spec = QuadratureSpec::default().with_scale(1.0_f64.max(n));
    let result = if z == 0.0 {
        if !(n > 0.0) {
            return Err(Error::Domain(format!(
                "Bose integral diverges at zeta = 0 for n = {n} <= 0"
            )));
        }
        try_integrate_power_semi_infinite(
            |x| Ok(if x == 0.0 { 1.0 } else { x / x.exp_m1() }),
            n - 1.0,
            &spec,
        )?
    } else {
        if !(n > -1.0) {
            return Err(Error::Domain(format!(
                "Bose integral diverges at the origin for n = {n} <= -1"
            )));
        }
        try_integrate_power_semi_infinite(|x| Ok(1.0 / (x - z).exp_m1()), n, &spec)?
    };
    Ok(temperature.powf(n + 1.0) * result.into_value()?)
}
