//! Command-line front end: JSON run configurations, the `classify`,
//! `spectrum`, `capacity` and `compare` subcommands, and CSV/JSON output.
//!
//! All physical quantities in configuration files are SI (metres).

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::capacity::{capacity_thermal, optimal_capacity, CapacityReport, PhotonBudget};
use crate::error::{Error, Result};
use crate::geometry::{
    classify_regime, fresnel_free_space, fresnel_lens, hole_stage_fresnel, mixed_regime_check,
    ratio_r1, ratio_r2, rayleigh_length, scenario_fresnel, GeometryInput, MixedRegimeCheck,
    OpticalGeometry, Regime, RegimeLabel, RegimeThresholds, Scenario, DEFAULT_MIXED_MARGIN,
};
use crate::scenarios::{
    applicable_gain, compare_closed_form, compare_numerical, sweep, GainCurve, GainKind,
    GainSettings, NumericalSettings,
};
use crate::spectra::grid::GridOrder;
use crate::spectra::{ConvergenceOptions, ModeSpectrum, SpectrumMetadata, SpectrumSource};

#[derive(Debug, Parser)]
#[command(
    name = "optcap",
    version,
    about = "Classical capacity of lens, free-space and pupil-hole optical channels",
    long_about = "Classical capacity of lens, free-space and pupil-hole optical channels.\n\n\
        Configurations are JSON files; every length (wavelength, distances, pupil radius, \
        object side) is in metres. Capacities are reported in nats and bits.\n\n\
        Exit codes: 0 success, 2 configuration or regime error, 3 unconverged spectrum \
        (output still written), 4 numerical failure."
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub opts: GlobalOpts,
}

#[derive(Debug, Clone, Args)]
pub struct GlobalOpts {
    /// Run configuration (JSON, SI units).
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Output table path; overrides the configuration. Standard output if absent.
    #[arg(long, global = true, value_name = "PATH")]
    pub out: Option<PathBuf>,
    /// Evaluate closed-form gains outside their regime (rows are flagged).
    #[arg(long, global = true)]
    pub force: bool,
    /// Also write every table as a JSON array to `<out>.json`.
    #[arg(long, global = true)]
    pub json: bool,
    /// Largest grid order (nodes per axis); overrides `grid.max_order`.
    #[arg(long, global = true, value_name = "N")]
    pub grid_order: Option<usize>,
    /// Seed for randomized test utilities; never changes results.
    #[arg(long, global = true, value_name = "INT")]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Print Fresnel numbers, ratios and regime labels.
    Classify,
    /// Compute the converged singular spectrum and write `k,sigma,eta`.
    Spectrum,
    /// Water-filled capacity of a computed or previously exported spectrum.
    Capacity {
        /// Use this `k,sigma,eta` CSV instead of computing the spectrum.
        #[arg(long, value_name = "PATH")]
        spectrum: Option<PathBuf>,
    },
    /// Lens versus free-space gain over a photon-number sweep.
    Compare,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub geometry: GeometryInput,
    #[serde(default = "default_scenario")]
    pub scenario: Scenario,
    /// Reference for `compare` (free space unless set).
    #[serde(default = "default_reference")]
    pub reference_scenario: Scenario,
    #[serde(default)]
    pub include_phase: bool,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub budget: BudgetConfig,
    #[serde(default)]
    pub thresholds: RegimeThresholds,
    #[serde(default = "default_margin")]
    pub mixed_margin: f64,
    /// Add water-filled numerical rows to `compare`.
    #[serde(default)]
    pub numerical: bool,
    /// Pairing used by `compare --force` when no regime applies.
    #[serde(default)]
    pub gain: Option<GainKind>,
    #[serde(default)]
    pub output: OutputConfig,
}

fn default_scenario() -> Scenario {
    Scenario::Lens
}
fn default_reference() -> Scenario {
    Scenario::FreeSpace
}
fn default_margin() -> f64 {
    DEFAULT_MIXED_MARGIN
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    pub initial_order: usize,
    pub max_order: usize,
    pub rtol: f64,
    /// Radial Gauss-Legendre nodes on the pupil (hole scenario).
    pub pupil_radial: usize,
    /// Angular nodes on the pupil; twice the radial count if absent.
    pub pupil_angular: Option<usize>,
}

impl Default for GridConfig {
    fn default() -> Self {
        let c = ConvergenceOptions::default();
        Self {
            initial_order: c.initial_order,
            max_order: c.max_order,
            rtol: c.rtol,
            pupil_radial: 24,
            pupil_angular: None,
        }
    }
}

impl GridConfig {
    pub fn convergence(&self) -> ConvergenceOptions {
        ConvergenceOptions {
            initial_order: self.initial_order,
            max_order: self.max_order,
            rtol: self.rtol,
        }
    }

    pub fn pupil_order(&self) -> GridOrder {
        GridOrder::Polar {
            radial: self.pupil_radial,
            angular: self.pupil_angular.unwrap_or(2 * self.pupil_radial),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BudgetConfig {
    /// Mean photon number per channel use.
    #[serde(default)]
    pub n: Option<f64>,
    #[serde(default)]
    pub sweep: Option<SweepConfig>,
    #[serde(default)]
    pub n_thermal: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub min: f64,
    pub max: f64,
    pub points: usize,
    #[serde(default = "default_log")]
    pub log: bool,
}

fn default_log() -> bool {
    true
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub spectrum: Option<PathBuf>,
    pub capacity: Option<PathBuf>,
    pub compare: Option<PathBuf>,
    pub classify: Option<PathBuf>,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)
            .map_err(|e| Error::Config(format!("invalid configuration: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        OpticalGeometry::new(&self.geometry)?;
        self.thresholds.validate()?;
        self.grid.convergence().validate()?;
        if self.grid.pupil_radial < crate::spectra::grid::MIN_ORDER
            || self.grid.pupil_angular.is_some_and(|a| a < crate::spectra::grid::MIN_ORDER)
        {
            return Err(Error::Config(format!(
                "grid.pupil_radial / grid.pupil_angular must be >= {}",
                crate::spectra::grid::MIN_ORDER
            )));
        }
        if !(self.mixed_margin >= 1.0 && self.mixed_margin.is_finite()) {
            return Err(Error::Config(format!("mixed_margin must be >= 1, got {}", self.mixed_margin)));
        }
        let b = &self.budget;
        if b.n.is_some() && b.sweep.is_some() {
            return Err(Error::Config("budget: give either n or sweep, not both".into()));
        }
        if let Some(n) = b.n {
            PhotonBudget::pure_loss(n).map_err(|e| Error::Config(format!("budget.n: {e}")))?;
        }
        if let Some(s) = b.sweep {
            sweep(s.min, s.max, s.points, s.log).map_err(|e| Error::Config(format!("budget.sweep: {e}")))?;
            if s.min < 0.0 {
                return Err(Error::Config(format!("budget.sweep.min must be >= 0, got {}", s.min)));
            }
        }
        PhotonBudget::new(0.0, b.n_thermal).map_err(|e| Error::Config(format!("budget.n_thermal: {e}")))?;
        Ok(())
    }

    pub fn geometry(&self) -> Result<OpticalGeometry> {
        OpticalGeometry::new(&self.geometry)
    }

    pub fn photon_numbers(&self) -> Result<Vec<f64>> {
        match (self.budget.n, self.budget.sweep) {
            (Some(n), None) => Ok(vec![n]),
            (None, Some(s)) => sweep(s.min, s.max, s.points, s.log),
            _ => Err(Error::Config("budget: missing n or sweep".into())),
        }
    }

    fn numerics(&self, grid_order: Option<usize>) -> Result<NumericalSettings> {
        let mut convergence = self.grid.convergence();
        if let Some(n) = grid_order {
            convergence.max_order = n;
            convergence.initial_order = convergence.initial_order.min(n);
            convergence.validate()?;
        }
        Ok(NumericalSettings {
            convergence,
            pupil_order: self.grid.pupil_order(),
            include_phase: self.include_phase,
        })
    }

    fn gain_settings(&self, force: bool) -> GainSettings {
        GainSettings { thresholds: self.thresholds, mixed_margin: self.mixed_margin, force }
    }
}

/// How a successful run ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Complete,
    /// Output written, but a spectrum did not converge.
    Unconverged,
}

impl Outcome {
    pub fn exit_code(&self) -> i32 {
        match self {
            Outcome::Complete => 0,
            Outcome::Unconverged => 3,
        }
    }

    fn from_converged(converged: bool) -> Self {
        if converged {
            Outcome::Complete
        } else {
            Outcome::Unconverged
        }
    }
}

/// Maps a run result onto the process exit code.
pub fn exit_code(result: &Result<Outcome>) -> i32 {
    match result {
        Ok(o) => o.exit_code(),
        Err(e) => e.exit_code(),
    }
}

pub fn run(cli: &Cli) -> Result<Outcome> {
    let path = cli
        .opts
        .config
        .as_deref()
        .ok_or_else(|| Error::Config("--config <path> is required".into()))?;
    let cfg = RunConfig::load(path)?;
    if let Some(seed) = cli.opts.seed {
        log::debug!("seed {seed} ignored: no randomized step affects results");
    }
    match &cli.command {
        Command::Classify => cmd_classify(&cfg, &cli.opts),
        Command::Spectrum => cmd_spectrum(&cfg, &cli.opts),
        Command::Capacity { spectrum } => cmd_capacity(&cfg, &cli.opts, spectrum.as_deref()),
        Command::Compare => cmd_compare(&cfg, &cli.opts),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ClassifyReport {
    pub fresnel: f64,
    pub fresnel_free_space: f64,
    pub rayleigh_length: f64,
    pub r1: f64,
    pub r2: f64,
    pub lens: RegimeLabel,
    pub free_space: RegimeLabel,
    pub hole_stage_fresnel: (f64, f64),
    pub mixed_regime: MixedRegimeCheck,
    pub applicable_gain: Option<GainKind>,
    pub paraxial_warnings: Vec<String>,
}

pub fn classify(cfg: &RunConfig) -> Result<ClassifyReport> {
    let g = cfg.geometry()?;
    Ok(ClassifyReport {
        fresnel: fresnel_lens(&g),
        fresnel_free_space: fresnel_free_space(&g),
        rayleigh_length: rayleigh_length(&g),
        r1: ratio_r1(&g),
        r2: ratio_r2(&g),
        lens: classify_regime(fresnel_lens(&g), cfg.thresholds)?,
        free_space: classify_regime(fresnel_free_space(&g), cfg.thresholds)?,
        hole_stage_fresnel: hole_stage_fresnel(&g),
        mixed_regime: mixed_regime_check(&g, cfg.mixed_margin)?,
        applicable_gain: applicable_gain(&g, &cfg.gain_settings(false))?,
        paraxial_warnings: g.paraxial_warnings(crate::geometry::DEFAULT_PARAXIAL_RATIO),
    })
}

fn regime_name(r: Regime) -> &'static str {
    match r {
        Regime::Farfield => "Farfield",
        Regime::Nearfield => "Nearfield",
        Regime::Intermediate => "Intermediate",
    }
}

fn render_classify(r: &ClassifyReport) -> String {
    let f = crate::spectra::fmt_f64;
    let mut s = String::new();
    s.push_str(&format!("F = {}\n", f(r.fresnel)));
    s.push_str(&format!("F_fs = {}\n", f(r.fresnel_free_space)));
    s.push_str(&format!("x_R = {} m\n", f(r.rayleigh_length)));
    s.push_str(&format!("r1 = {}\n", f(r.r1)));
    s.push_str(&format!("r2 = {}\n", f(r.r2)));
    s.push_str(&format!("lens: {}\n", regime_name(r.lens.regime)));
    s.push_str(&format!("free space: {}\n", regime_name(r.free_space.regime)));
    s.push_str(&format!(
        "hole stages: F_fs(o->s) = {}, F_fs(s->i) = {}\n",
        f(r.hole_stage_fresnel.0),
        f(r.hole_stage_fresnel.1)
    ));
    s.push_str(&format!(
        "mixed regime: {} (lower slack {}, upper slack {})\n",
        if r.mixed_regime.holds { "holds" } else { "fails" },
        f(r.mixed_regime.lower_slack),
        f(r.mixed_regime.upper_slack)
    ));
    s.push_str(&format!(
        "gain: {}\n",
        r.applicable_gain.map_or("none".to_string(), |k| format!("{k:?}"))
    ));
    for w in &r.paraxial_warnings {
        s.push_str(&format!("warning: {w}\n"));
    }
    s
}

fn cmd_classify(cfg: &RunConfig, opts: &GlobalOpts) -> Result<Outcome> {
    let report = classify(cfg)?;
    let text = if opts.json {
        serde_json::to_string_pretty(&report).map_err(json_err)? + "\n"
    } else {
        render_classify(&report)
    };
    emit(opts.out.as_deref().or(cfg.output.classify.as_deref()), text.as_bytes())?;
    Ok(Outcome::Complete)
}

#[derive(Serialize)]
struct SpectrumRow {
    k: usize,
    sigma: f64,
    eta: f64,
}

fn cmd_spectrum(cfg: &RunConfig, opts: &GlobalOpts) -> Result<Outcome> {
    let geom = cfg.geometry()?;
    let spectrum = cfg.numerics(opts.grid_order)?.spectrum(cfg.scenario, &geom)?;
    let out = opts.out.as_deref().or(cfg.output.spectrum.as_deref());
    let mut buf = Vec::new();
    spectrum.write_csv(&mut buf)?;
    emit(out, &buf)?;
    if let Some(path) = out {
        let meta = SpectrumMetadata::new(cfg.scenario, geom, &spectrum);
        write_json(&sidecar(path, "meta.json"), &meta)?;
        if opts.json {
            let rows: Vec<SpectrumRow> = spectrum
                .sigma()
                .iter()
                .zip(spectrum.eta())
                .take_while(|(_, &e)| e >= crate::spectra::EXPORT_FLOOR)
                .enumerate()
                .map(|(i, (&sigma, &eta))| SpectrumRow { k: i + 1, sigma, eta })
                .collect();
            write_json(&sidecar(path, "json"), &rows)?;
        }
    }
    Ok(Outcome::from_converged(spectrum.converged))
}

/// Equal-split capacity of the configured scenario in its asymptotic regime.
#[derive(Debug, Clone, Serialize)]
pub struct ClosedFormCapacity {
    pub regime: Regime,
    pub eta: f64,
    pub nu: f64,
    pub total_nats: f64,
    pub total_bits: f64,
}

pub fn closed_form_capacity(
    scenario: Scenario,
    geom: &OpticalGeometry,
    budget: PhotonBudget,
    thresholds: RegimeThresholds,
) -> Result<Option<ClosedFormCapacity>> {
    if scenario == Scenario::Hole {
        return Ok(None);
    }
    let fresnel = scenario_fresnel(scenario, geom);
    let label = classify_regime(fresnel, thresholds)?;
    let (eta, nu) = match (scenario, label.regime) {
        (_, Regime::Intermediate) => return Ok(None),
        (Scenario::Lens, Regime::Farfield) => (fresnel * fresnel, 1.0),
        (_, Regime::Farfield) => (fresnel, 1.0),
        (_, Regime::Nearfield) => (1.0, fresnel),
    };
    let total_nats = capacity_thermal(eta, nu, budget.total, budget.thermal)?;
    Ok(Some(ClosedFormCapacity {
        regime: label.regime,
        eta,
        nu,
        total_nats,
        total_bits: total_nats / std::f64::consts::LN_2,
    }))
}

#[derive(Serialize)]
struct CapacityRow {
    k: usize,
    eta: f64,
    n: f64,
    contribution_nats: f64,
}

#[derive(Serialize)]
struct CapacityMetadata<'a> {
    scenario: Scenario,
    source: SpectrumSource,
    spectrum_file: Option<&'a Path>,
    converged: bool,
    budget: PhotonBudget,
    total_nats: f64,
    total_bits: f64,
    multiplier: Option<f64>,
    active_modes: usize,
    truncation_bound: f64,
    closed_form: Option<ClosedFormCapacity>,
}

/// Water-filled capacity for the configuration, from `spectrum_file` if given.
pub fn capacity_report(
    cfg: &RunConfig,
    grid_order: Option<usize>,
    spectrum_file: Option<&Path>,
) -> Result<(CapacityReport, ModeSpectrum, PhotonBudget)> {
    let geom = cfg.geometry()?;
    let n = cfg.budget.n.ok_or_else(|| Error::Config("capacity needs budget.n".into()))?;
    let budget = PhotonBudget::new(n, cfg.budget.n_thermal)?;
    let spectrum = match spectrum_file {
        Some(p) => {
            let f = std::fs::File::open(p)
                .map_err(|e| Error::Config(format!("cannot read {}: {e}", p.display())))?;
            ModeSpectrum::read_csv(std::io::BufReader::new(f))?
        }
        None => cfg.numerics(grid_order)?.spectrum(cfg.scenario, &geom)?,
    };
    Ok((optimal_capacity(&spectrum, budget)?, spectrum, budget))
}

fn cmd_capacity(cfg: &RunConfig, opts: &GlobalOpts, spectrum_file: Option<&Path>) -> Result<Outcome> {
    let (report, spectrum, budget) = capacity_report(cfg, opts.grid_order, spectrum_file)?;
    let geom = cfg.geometry()?;
    let closed = closed_form_capacity(cfg.scenario, &geom, budget, cfg.thresholds)?;
    let out = opts.out.as_deref().or(cfg.output.capacity.as_deref());
    let mut buf = Vec::new();
    report.write_csv(&mut buf)?;
    emit(out, &buf)?;
    if let Some(path) = out {
        let meta = CapacityMetadata {
            scenario: cfg.scenario,
            source: spectrum.source,
            spectrum_file,
            converged: spectrum.converged,
            budget,
            total_nats: report.total_nats,
            total_bits: report.total_bits(),
            multiplier: report.allocation.multiplier,
            active_modes: report.allocation.active,
            truncation_bound: report.allocation.truncation_bound,
            closed_form: closed,
        };
        write_json(&sidecar(path, "meta.json"), &meta)?;
        if opts.json {
            let rows: Vec<CapacityRow> = report
                .eta
                .iter()
                .zip(&report.allocation.photons)
                .zip(&report.contributions)
                .enumerate()
                .map(|(i, ((&eta, &n), &c))| CapacityRow { k: i + 1, eta, n, contribution_nats: c })
                .collect();
            write_json(&sidecar(path, "json"), &rows)?;
        }
    }
    Ok(Outcome::from_converged(spectrum.converged))
}

/// Builds the gain curve for `compare`: closed-form rows where a pairing
/// applies (or is forced), numerical rows when requested or when the
/// scenario pair has no closed form.
pub fn compare_curve(cfg: &RunConfig, grid_order: Option<usize>, force: bool) -> Result<GainCurve> {
    let geom = cfg.geometry()?;
    let ns = cfg.photon_numbers()?;
    let thermal = cfg.budget.n_thermal;
    let settings = cfg.gain_settings(force);
    let standard_pair = cfg.scenario == Scenario::Lens && cfg.reference_scenario == Scenario::FreeSpace;
    let numerical = cfg.numerical || !standard_pair;

    let mut closed = None;
    if standard_pair {
        let forced = cfg.gain.or_else(|| force.then(|| nearest_gain(&geom, cfg.thresholds)));
        match compare_closed_form(&geom, &ns, thermal, &settings, forced) {
            Ok(curve) => closed = Some(curve),
            Err(Error::Regime(msg)) if numerical => log::warn!("closed form skipped: {msg}"),
            Err(e) => return Err(e),
        }
        if force && closed.as_ref().is_some_and(|c| {
            c.points.first().is_some_and(|p| p.method == crate::scenarios::GainMethod::ClosedFormForced)
        }) {
            log::warn!("closed-form gain evaluated outside its regime (--force)");
        }
    }
    let numeric = if numerical {
        Some(compare_numerical(
            &geom,
            &ns,
            thermal,
            &cfg.numerics(grid_order)?,
            cfg.scenario,
            cfg.reference_scenario,
            cfg.thresholds,
        )?)
    } else {
        None
    };
    let mut curve = match (closed, numeric) {
        (Some(mut c), Some(n)) => {
            c.points.extend(n.points);
            c
        }
        (Some(c), None) => c,
        (None, Some(n)) => n,
        (None, None) => unreachable!("at least one method runs"),
    };
    // stable sort keeps closed-form rows ahead of numerical rows at equal N
    curve.points.sort_by(|a, b| a.n.total_cmp(&b.n));
    Ok(curve)
}

/// Pairing closest to the geometry when none applies strictly.
fn nearest_gain(geom: &OpticalGeometry, thresholds: RegimeThresholds) -> GainKind {
    let split = (thresholds.farfield * thresholds.nearfield).sqrt();
    match (fresnel_lens(geom) < split, fresnel_free_space(geom) < split) {
        (true, _) => GainKind::G1,
        (false, false) => GainKind::G2,
        (false, true) => GainKind::G3,
    }
}

#[derive(Serialize)]
struct GainRow {
    #[serde(rename = "N")]
    n: f64,
    #[serde(rename = "C_lens_nats")]
    c_lens: f64,
    #[serde(rename = "C_fs_nats")]
    c_fs: f64,
    gain: Option<f64>,
    method: &'static str,
    converged: bool,
}

#[derive(Serialize)]
struct CompareMetadata<'a> {
    subject: Scenario,
    reference: Scenario,
    regimes: &'a crate::scenarios::RegimePair,
    n_thermal: f64,
    forced: bool,
    rows: usize,
}

fn cmd_compare(cfg: &RunConfig, opts: &GlobalOpts) -> Result<Outcome> {
    let curve = compare_curve(cfg, opts.grid_order, opts.force)?;
    let out = opts.out.as_deref().or(cfg.output.compare.as_deref());
    let mut buf = Vec::new();
    curve.write_csv(&mut buf)?;
    emit(out, &buf)?;
    if let Some(path) = out {
        let meta = CompareMetadata {
            subject: curve.subject,
            reference: curve.reference,
            regimes: &curve.regimes,
            n_thermal: cfg.budget.n_thermal,
            forced: opts.force,
            rows: curve.points.len(),
        };
        write_json(&sidecar(path, "meta.json"), &meta)?;
        if opts.json {
            let rows: Vec<GainRow> = curve
                .points
                .iter()
                .map(|p| GainRow {
                    n: p.n,
                    c_lens: p.c_lens,
                    c_fs: p.c_fs,
                    gain: p.gain,
                    method: p.method.label(),
                    converged: p.converged,
                })
                .collect();
            write_json(&sidecar(path, "json"), &rows)?;
        }
    }
    Ok(Outcome::from_converged(curve.points.iter().all(|p| p.converged)))
}

/// `<out>.<suffix>`, e.g. `spectrum.csv.meta.json`.
pub fn sidecar(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".");
    s.push(suffix);
    PathBuf::from(s)
}

fn emit(path: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, bytes)?,
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(bytes)?;
            stdout.flush()?;
        }
    }
    Ok(())
}

fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(json_err)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

fn json_err(e: serde_json::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}
