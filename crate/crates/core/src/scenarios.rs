//! Lens versus free-space comparison: closed-form gains in the three regime
//! pairings, their thermal-noise variants, numerical cross-checks built on
//! the spectra and water-filling, and the pupil-hole screen analysis.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::capacity::{capacity_thermal, optimal_capacity, PhotonBudget};
use crate::error::{Error, Result};
use crate::geometry::{
    classify_regime, fresnel_free_space, fresnel_lens, mixed_regime_check, ratio_r1, ratio_r2,
    OpticalGeometry, Regime, RegimeLabel, RegimeThresholds, Scenario, DEFAULT_MIXED_MARGIN,
};
use crate::kernels::KernelSpec;
use crate::mathfn::g_unchecked;
use crate::spectra::grid::GridOrder;
use crate::spectra::{converge_spectrum, csv_err, fmt_f64, singular_spectrum, Channel, ConvergenceOptions, ModeSpectrum};

/// Ratio of hole to free-space transmission above which the screen is
/// reported as negligible.
pub const NEGLIGIBLE_RATIO: f64 = 0.9;

/// Factor standing in for "much greater than" in the thermal orderings.
pub const ORDERING_MARGIN: f64 = 10.0;

/// Regime pairing that selects the closed-form gain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GainKind {
    /// Both scenarios farfield.
    G1,
    /// Both scenarios nearfield.
    G2,
    /// Lens nearfield, free space farfield.
    G3,
}

/// Regime checks applied before a closed-form gain is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GainSettings {
    pub thresholds: RegimeThresholds,
    pub mixed_margin: f64,
    /// Evaluate the formula even when its regime does not hold.
    pub force: bool,
}

impl Default for GainSettings {
    fn default() -> Self {
        Self {
            thresholds: RegimeThresholds::default(),
            mixed_margin: DEFAULT_MIXED_MARGIN,
            force: false,
        }
    }
}

/// Regime labels of the lens and free-space scenarios for one geometry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegimePair {
    pub lens: RegimeLabel,
    pub free_space: RegimeLabel,
}

impl RegimePair {
    pub fn of(geom: &OpticalGeometry, thresholds: RegimeThresholds) -> Result<Self> {
        Ok(Self {
            lens: classify_regime(fresnel_lens(geom), thresholds)?,
            free_space: classify_regime(fresnel_free_space(geom), thresholds)?,
        })
    }
}

/// The gain whose regime preconditions hold for `geom`, if any.
pub fn applicable_gain(geom: &OpticalGeometry, settings: &GainSettings) -> Result<Option<GainKind>> {
    let pair = RegimePair::of(geom, settings.thresholds)?;
    Ok(match (pair.lens.regime, pair.free_space.regime) {
        (Regime::Farfield, Regime::Farfield) => Some(GainKind::G1),
        (Regime::Nearfield, Regime::Nearfield) => Some(GainKind::G2),
        _ if mixed_regime_check(geom, settings.mixed_margin)?.holds => Some(GainKind::G3),
        _ => None,
    })
}

fn require(kind: GainKind, geom: &OpticalGeometry, settings: &GainSettings) -> Result<()> {
    if settings.force {
        return Ok(());
    }
    let pair = RegimePair::of(geom, settings.thresholds)?;
    let (f, ffs) = (pair.lens.fresnel, pair.free_space.fresnel);
    let violation = match kind {
        GainKind::G1 => {
            if pair.lens.regime != Regime::Farfield {
                Some(format!("lens Fresnel number F = {f:e} is not farfield"))
            } else if pair.free_space.regime != Regime::Farfield {
                Some(format!("free-space Fresnel number F_fs = {ffs:e} is not farfield"))
            } else {
                None
            }
        }
        GainKind::G2 => {
            if pair.lens.regime != Regime::Nearfield {
                Some(format!("lens Fresnel number F = {f:e} is not nearfield"))
            } else if pair.free_space.regime != Regime::Nearfield {
                Some(format!("free-space Fresnel number F_fs = {ffs:e} is not nearfield"))
            } else {
                None
            }
        }
        GainKind::G3 => {
            let check = mixed_regime_check(geom, settings.mixed_margin)?;
            (!check.holds).then(|| {
                format!(
                    "mixed regime fails (F = {f:e}, F_fs = {ffs:e}, slacks {:.3e} / {:.3e})",
                    check.lower_slack, check.upper_slack
                )
            })
        }
    };
    match violation {
        Some(msg) => Err(Error::Regime(format!("{kind:?}: {msg}"))),
        None => Ok(()),
    }
}

fn ratio(num: f64, den: f64) -> Result<f64> {
    if den > 0.0 {
        Ok(num / den)
    } else {
        Err(Error::Domain("gain undefined: free-space capacity is zero".into()))
    }
}

fn check_budget(n: f64) -> Result<()> {
    PhotonBudget::pure_loss(n).map(|_| ())
}

/// `g(r1 eta_fs N) / g(eta_fs N)`.
pub fn g1_formula(r1: f64, eta_fs: f64, n: f64) -> Result<f64> {
    check_budget(n)?;
    ratio(g_unchecked(r1 * eta_fs * n), g_unchecked(eta_fs * n))
}

/// `r2 g(N / nu) / g(r2 N / nu)`.
pub fn g2_formula(r2: f64, nu: f64, n: f64) -> Result<f64> {
    check_budget(n)?;
    let per_mode = n / nu;
    ratio(r2 * g_unchecked(per_mode), g_unchecked(r2 * per_mode))
}

/// `nu g(N / nu) / g(eta_fs N)`.
pub fn g3_formula(nu: f64, eta_fs: f64, n: f64) -> Result<f64> {
    check_budget(n)?;
    ratio(nu * g_unchecked(n / nu), g_unchecked(eta_fs * n))
}

/// Farfield/farfield gain.
pub fn gain_g1(geom: &OpticalGeometry, n: f64, settings: &GainSettings) -> Result<f64> {
    require(GainKind::G1, geom, settings)?;
    g1_formula(ratio_r1(geom), fresnel_free_space(geom), n)
}

/// Nearfield/nearfield gain with the real-valued mode count `nu = F`.
pub fn gain_g2(geom: &OpticalGeometry, n: f64, settings: &GainSettings) -> Result<f64> {
    require(GainKind::G2, geom, settings)?;
    g2_formula(ratio_r2(geom), fresnel_lens(geom), n)
}

/// Nearfield lens against farfield free space.
pub fn gain_g3(geom: &OpticalGeometry, n: f64, settings: &GainSettings) -> Result<f64> {
    require(GainKind::G3, geom, settings)?;
    g3_formula(fresnel_lens(geom), fresnel_free_space(geom), n)
}

/// `(eta, nu)` of the equal-split lens and free-space channels for a pairing.
fn closed_form_channels(kind: GainKind, geom: &OpticalGeometry) -> ((f64, f64), (f64, f64)) {
    let f = fresnel_lens(geom);
    let ffs = fresnel_free_space(geom);
    match kind {
        GainKind::G1 => ((f * f, 1.0), (ffs, 1.0)),
        GainKind::G2 => ((1.0, f), (1.0, ffs)),
        GainKind::G3 => ((1.0, f), (ffs, 1.0)),
    }
}

/// Closed-form lens and free-space capacities (nats) for a pairing.
pub fn closed_form_capacities(
    kind: GainKind,
    geom: &OpticalGeometry,
    n: f64,
    thermal: f64,
) -> Result<(f64, f64)> {
    let ((eta, nu), (eta_fs, nu_fs)) = closed_form_channels(kind, geom);
    Ok((
        capacity_thermal(eta.min(1.0), nu, n, thermal)?,
        capacity_thermal(eta_fs.min(1.0), nu_fs, n, thermal)?,
    ))
}

/// Which of the two thermal-noise orderings holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseOrdering {
    /// `N_th >> max(1, eta N / nu)`.
    Dominant,
    /// `1 >> N_th >> eta N / nu`.
    Weak,
    Neither,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThermalGain {
    pub kind: GainKind,
    pub gain: f64,
    /// Photons per lens mode at the receiver, `eta N / nu`.
    pub signal_per_mode: f64,
    pub ordering: NoiseOrdering,
    /// Asymptote stated for this pairing and ordering.
    pub predicted: Option<f64>,
}

/// Gain with `g(eta N / nu + N_th) - g(N_th)` capacities on both sides.
pub fn thermal_gain_limits(
    geom: &OpticalGeometry,
    n: f64,
    thermal: f64,
    settings: &GainSettings,
) -> Result<ThermalGain> {
    let kind = applicable_gain(geom, settings)?.ok_or_else(|| {
        Error::Regime(format!(
            "no gain formula applies (F = {:e}, F_fs = {:e})",
            fresnel_lens(geom),
            fresnel_free_space(geom)
        ))
    })?;
    thermal_gain_for(kind, geom, n, thermal)
}

/// As [`thermal_gain_limits`] for an explicitly chosen pairing, without regime checks.
pub fn thermal_gain_for(
    kind: GainKind,
    geom: &OpticalGeometry,
    n: f64,
    thermal: f64,
) -> Result<ThermalGain> {
    let ((eta, nu), _) = closed_form_channels(kind, geom);
    let (c_lens, c_fs) = closed_form_capacities(kind, geom, n, thermal)?;
    let gain = ratio(c_lens, c_fs)?;
    let signal_per_mode = eta * n / nu;
    let ordering = if thermal >= ORDERING_MARGIN * signal_per_mode.max(1.0) {
        NoiseOrdering::Dominant
    } else if thermal * ORDERING_MARGIN <= 1.0 && thermal >= ORDERING_MARGIN * signal_per_mode {
        NoiseOrdering::Weak
    } else {
        NoiseOrdering::Neither
    };
    let predicted = match (kind, ordering) {
        (GainKind::G1, NoiseOrdering::Dominant) => Some(ratio_r1(geom)),
        (GainKind::G3, NoiseOrdering::Dominant) => Some(1.0 / fresnel_free_space(geom)),
        (GainKind::G2, NoiseOrdering::Weak) => Some(ratio_r2(geom)),
        (GainKind::G3, NoiseOrdering::Weak) => Some(fresnel_lens(geom)),
        _ => None,
    };
    Ok(ThermalGain { kind, gain, signal_per_mode, ordering, predicted })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GainMethod {
    ClosedForm,
    /// Closed form evaluated outside its regime.
    ClosedFormForced,
    Numerical,
}

impl GainMethod {
    pub fn label(&self) -> &'static str {
        match self {
            GainMethod::ClosedForm => "closed-form",
            GainMethod::ClosedFormForced => "closed-form-forced",
            GainMethod::Numerical => "numerical",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GainPoint {
    pub n: f64,
    pub c_lens: f64,
    pub c_fs: f64,
    /// `None` where the reference capacity vanishes.
    pub gain: Option<f64>,
    pub method: GainMethod,
    pub converged: bool,
}

/// Capacities of two scenarios over a photon-number sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GainCurve {
    pub regimes: RegimePair,
    pub subject: Scenario,
    pub reference: Scenario,
    pub points: Vec<GainPoint>,
}

impl GainCurve {
    /// Writes `N,C_lens_nats,C_fs_nats,gain,method,converged`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["N", "C_lens_nats", "C_fs_nats", "gain", "method", "converged"])
            .map_err(csv_err)?;
        for p in &self.points {
            w.write_record([
                fmt_f64(p.n),
                fmt_f64(p.c_lens),
                fmt_f64(p.c_fs),
                p.gain.map(fmt_f64).unwrap_or_default(),
                p.method.label().to_string(),
                p.converged.to_string(),
            ])
            .map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Closed-form capacities over a sweep, for the pairing that applies
/// (or `forced` when regime checks are overridden).
pub fn compare_closed_form(
    geom: &OpticalGeometry,
    ns: &[f64],
    thermal: f64,
    settings: &GainSettings,
    forced: Option<GainKind>,
) -> Result<GainCurve> {
    let regimes = RegimePair::of(geom, settings.thresholds)?;
    let (kind, method) = match (applicable_gain(geom, settings)?, forced) {
        (Some(kind), _) => (kind, GainMethod::ClosedForm),
        (None, Some(kind)) if settings.force => (kind, GainMethod::ClosedFormForced),
        (None, _) => {
            return Err(Error::Regime(format!(
                "no closed-form gain applies (lens {}, free space {})",
                regimes.lens.regime, regimes.free_space.regime
            )))
        }
    };
    let points = ns
        .iter()
        .map(|&n| {
            let (c_lens, c_fs) = closed_form_capacities(kind, geom, n, thermal)?;
            Ok(GainPoint {
                n,
                c_lens,
                c_fs,
                gain: (c_fs > 0.0).then(|| c_lens / c_fs),
                method,
                converged: true,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(GainCurve { regimes, subject: Scenario::Lens, reference: Scenario::FreeSpace, points })
}

/// Discretisation settings shared by the numerical comparisons.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NumericalSettings {
    pub convergence: ConvergenceOptions,
    pub pupil_order: GridOrder,
    pub include_phase: bool,
}

impl Default for NumericalSettings {
    fn default() -> Self {
        Self {
            convergence: ConvergenceOptions::default(),
            pupil_order: GridOrder::polar(24),
            include_phase: false,
        }
    }
}

impl NumericalSettings {
    pub fn spec(&self, scenario: Scenario, geom: &OpticalGeometry) -> KernelSpec {
        let spec = KernelSpec::new(scenario, *geom).with_phase(self.include_phase);
        if scenario == Scenario::Hole {
            spec.with_pupil_order(self.pupil_order)
        } else {
            spec
        }
    }

    /// Converged spectrum of one scenario.
    pub fn spectrum(&self, scenario: Scenario, geom: &OpticalGeometry) -> Result<ModeSpectrum> {
        let channel = Channel::new(&self.spec(scenario, geom))?;
        converge_spectrum(&channel, geom, &self.convergence)
    }
}

/// Water-filled capacities of two scenarios over a sweep, from converged spectra.
pub fn compare_spectra(
    subject: &ModeSpectrum,
    reference: &ModeSpectrum,
    ns: &[f64],
    thermal: f64,
) -> Result<Vec<GainPoint>> {
    let converged = subject.converged && reference.converged;
    ns.par_iter()
        .map(|&n| {
            let budget = PhotonBudget::new(n, thermal)?;
            let c_lens = optimal_capacity(subject, budget)?.total_nats;
            let c_fs = optimal_capacity(reference, budget)?.total_nats;
            Ok(GainPoint {
                n,
                c_lens,
                c_fs,
                gain: (c_fs > 0.0).then(|| c_lens / c_fs),
                method: GainMethod::Numerical,
                converged,
            })
        })
        .collect()
}

/// Numerical gain curve of `subject` against `reference` (normally lens against free space).
pub fn compare_numerical(
    geom: &OpticalGeometry,
    ns: &[f64],
    thermal: f64,
    numerics: &NumericalSettings,
    subject: Scenario,
    reference: Scenario,
    thresholds: RegimeThresholds,
) -> Result<GainCurve> {
    let subject_spectrum = numerics.spectrum(subject, geom)?;
    let reference_spectrum = if subject == reference {
        subject_spectrum.clone()
    } else {
        numerics.spectrum(reference, geom)?
    };
    let points = compare_spectra(&subject_spectrum, &reference_spectrum, ns, thermal)?;
    Ok(GainCurve { regimes: RegimePair::of(geom, thresholds)?, subject, reference, points })
}

/// Hole-versus-free-space diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScreenReport {
    pub regimes: RegimePair,
    pub fresnel: f64,
    pub fresnel_free_space: f64,
    pub r1: f64,
    pub r2: f64,
    /// Top transmissivity through the hole.
    pub hole_top: f64,
    pub hole_modes: usize,
    /// Top transmissivities of the object-to-screen and screen-to-image stages.
    pub stage_tops: (f64, f64),
    pub stage_modes: (usize, usize),
    /// `F_fs^{o->s} F_fs^{s->i} = F^2`.
    pub product_bound: f64,
    /// Whether the hole obeys the bound appropriate to the lens regime
    /// (`None` if the lens is in neither limit).
    pub bound_holds: Option<bool>,
    /// Hole transmission relative to free space: top transmissivities when
    /// free space is farfield, mode counts otherwise.
    pub ratio_to_free_space: f64,
    pub screen_negligible: bool,
    /// `r1 >= 1` (farfield free space) or `r2 >= 1` (otherwise).
    pub ratio_prediction: bool,
    /// A negligible screen comes with the predicted `r >= 1`.
    pub consistent: bool,
    pub converged: bool,
}

/// Slack on the farfield product bound.
pub const FARFIELD_BOUND_SLACK: f64 = 0.05;
/// Slack on the nearfield mode-count bound.
pub const NEARFIELD_BOUND_SLACK: f64 = 0.15;

/// Computes the hole spectrum and compares it with the free-space and lens limits.
pub fn screen_negligibility(
    geom: &OpticalGeometry,
    numerics: &NumericalSettings,
    thresholds: RegimeThresholds,
) -> Result<ScreenReport> {
    let regimes = RegimePair::of(geom, thresholds)?;
    if regimes.lens.regime == Regime::Intermediate && regimes.free_space.regime == Regime::Intermediate {
        return Err(Error::Regime(format!(
            "screen analysis needs a farfield or nearfield geometry (F = {:e}, F_fs = {:e})",
            regimes.lens.fresnel, regimes.free_space.fresnel
        )));
    }
    let channel = Channel::new(&numerics.spec(Scenario::Hole, geom))?;
    let hole = converge_spectrum(&channel, geom, &numerics.convergence)?;
    let order = match hole.orders.map(|o| o.input) {
        Some(GridOrder::PerAxis(n)) => n,
        _ => numerics.convergence.initial_order,
    };
    let stages = channel.sample_hole_stages(order)?;
    let first = singular_spectrum(&stages.first)?;
    let second = singular_spectrum(&stages.second)?;

    let f = regimes.lens.fresnel;
    let ffs = regimes.free_space.fresnel;
    let product_bound = f * f;
    let bound_holds = match regimes.lens.regime {
        Regime::Farfield => Some(hole.top() <= product_bound * (1.0 + FARFIELD_BOUND_SLACK)),
        Regime::Nearfield => Some(hole.nu_threshold as f64 <= f * (1.0 + NEARFIELD_BOUND_SLACK)),
        Regime::Intermediate => None,
    };
    let (ratio_to_free_space, ratio_prediction) = if regimes.free_space.regime == Regime::Farfield {
        (hole.top() / ffs, ratio_r1(geom) >= 1.0)
    } else {
        (hole.nu_threshold as f64 / ffs, ratio_r2(geom) >= 1.0)
    };
    let screen_negligible = ratio_to_free_space >= NEGLIGIBLE_RATIO;
    Ok(ScreenReport {
        regimes,
        fresnel: f,
        fresnel_free_space: ffs,
        r1: ratio_r1(geom),
        r2: ratio_r2(geom),
        hole_top: hole.top(),
        hole_modes: hole.nu_threshold,
        stage_tops: (first.top(), second.top()),
        stage_modes: (first.nu_threshold, second.nu_threshold),
        product_bound,
        bound_holds,
        ratio_to_free_space,
        screen_negligible,
        ratio_prediction,
        consistent: !screen_negligible || ratio_prediction,
        converged: hole.converged,
    })
}

/// `points` values spaced evenly (or log-evenly) on `[min, max]`.
pub fn sweep(min: f64, max: f64, points: usize, log: bool) -> Result<Vec<f64>> {
    if !min.is_finite() || !max.is_finite() || min >= max || points < 2 {
        return Err(Error::Config(format!(
            "sweep needs min < max and at least 2 points, got [{min}, {max}] x {points}"
        )));
    }
    if log && min <= 0.0 {
        return Err(Error::Config(format!("log sweep needs min > 0, got {min}")));
    }
    let last = (points - 1) as f64;
    Ok((0..points)
        .map(|i| {
            let t = i as f64 / last;
            if i == points - 1 {
                max
            } else if log {
                (min.ln() + t * (max.ln() - min.ln())).exp()
            } else {
                min + t * (max - min)
            }
        })
        .collect())
}
