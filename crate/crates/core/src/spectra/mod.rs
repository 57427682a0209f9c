//! Nyström discretisation of the propagation kernels and the singular-value
//! decomposition that splits a channel into parallel lossy modes.
//!
//! A kernel `K(r_out, r_in)` sampled on quadrature grids becomes the matrix
//! `sqrt(w_out) K sqrt(w_in)`; its singular values approximate those of the
//! integral operator and their squares are the mode transmissivities.

pub mod grid;

use std::io::Write;
use std::path::Path;

use faer::Mat;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{scenario_fresnel, OpticalGeometry, Scenario};
use crate::kernels::{FreeSpaceKernel, KernelSpec, LensKernel, TransferKernel};
use grid::{build_grid, square_grid, Domain, GridOrder, QuadratureGrid};

/// Overshoot above one that is forgiven as roundoff and clamped.
pub const CLAMP_TOLERANCE: f64 = 1e-6;

/// Transmissivities below this are omitted from exported spectra.
pub const EXPORT_FLOOR: f64 = 1e-30;

/// Below this, convergence is judged on an absolute scale.
const CONVERGENCE_FLOOR: f64 = 1e-12;

/// Where a spectrum came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpectrumSource {
    Numerical,
    Asymptotic,
    External,
}

/// Grid orders used to produce a numerical spectrum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridOrders {
    pub input: GridOrder,
    pub output: GridOrder,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pupil: Option<GridOrder>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ClampDiagnostics {
    /// Number of transmissivities pulled back to one.
    pub clamped: usize,
    /// Largest `eta - 1` seen before clamping (zero if none exceeded one).
    pub max_overshoot: f64,
}

/// Descending per-mode transmissivities of a channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeSpectrum {
    eta: Vec<f64>,
    sigma: Vec<f64>,
    /// Number of modes with `eta > 1/2`.
    pub nu_threshold: usize,
    /// Sum of all transmissivities.
    pub nu_sum: f64,
    /// Unrounded nearfield mode count for asymptotic spectra.
    pub raw_mode_count: Option<f64>,
    pub orders: Option<GridOrders>,
    pub converged: bool,
    pub clamp: ClampDiagnostics,
    pub source: SpectrumSource,
    pub scenario: Option<Scenario>,
}

impl ModeSpectrum {
    /// Wraps externally supplied transmissivities, sorting them in descending order.
    pub fn from_transmissivities(mut eta: Vec<f64>) -> Result<Self> {
        if let Some(bad) = eta.iter().find(|e| !(0.0..=1.0).contains(*e)) {
            return Err(Error::Domain(format!("transmissivity {bad} outside [0, 1]")));
        }
        eta.sort_by(|a, b| b.total_cmp(a));
        let sigma = eta.iter().map(|e| e.sqrt()).collect();
        Ok(Self::assemble(eta, sigma, ClampDiagnostics::default(), SpectrumSource::External))
    }

    fn assemble(
        eta: Vec<f64>,
        sigma: Vec<f64>,
        clamp: ClampDiagnostics,
        source: SpectrumSource,
    ) -> Self {
        let nu_threshold = eta.iter().filter(|&&e| e > 0.5).count();
        let nu_sum = eta.iter().sum();
        Self {
            eta,
            sigma,
            nu_threshold,
            nu_sum,
            raw_mode_count: None,
            orders: None,
            converged: true,
            clamp,
            source,
            scenario: None,
        }
    }

    pub fn eta(&self) -> &[f64] {
        &self.eta
    }
    pub fn sigma(&self) -> &[f64] {
        &self.sigma
    }
    pub fn len(&self) -> usize {
        self.eta.len()
    }
    pub fn is_empty(&self) -> bool {
        self.eta.is_empty()
    }
    /// Largest transmissivity, zero for an empty spectrum.
    pub fn top(&self) -> f64 {
        self.eta.first().copied().unwrap_or(0.0)
    }

    /// Writes `k,sigma,eta` rows for every mode with `eta >= 1e-30`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["k", "sigma", "eta"]).map_err(csv_err)?;
        for (k, (s, e)) in self.sigma.iter().zip(&self.eta).enumerate() {
            if *e < EXPORT_FLOOR {
                break;
            }
            w.write_record([(k + 1).to_string(), fmt_f64(*s), fmt_f64(*e)]).map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads a `k,sigma,eta` table; the `eta` column is authoritative.
    pub fn read_csv<R: std::io::Read>(input: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let headers = r.headers().map_err(csv_err)?.clone();
        if headers.iter().collect::<Vec<_>>() != ["k", "sigma", "eta"] {
            return Err(Error::Config(format!(
                "spectrum CSV header must be k,sigma,eta, got {}",
                headers.iter().collect::<Vec<_>>().join(",")
            )));
        }
        let mut eta = Vec::new();
        for (line, rec) in r.records().enumerate() {
            let rec = rec.map_err(csv_err)?;
            let value: f64 = rec[2].trim().parse().map_err(|e| {
                Error::Config(format!("spectrum CSV row {}: bad eta {:?}: {e}", line + 1, &rec[2]))
            })?;
            eta.push(value);
        }
        Self::from_transmissivities(eta)
    }

    pub fn write_csv_file(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(f))
    }
}

/// Fixed-width scientific rendering with 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub(crate) fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Config(format!("csv: {other:?}")),
    }
}

/// A kernel sampled on input/output grids with Nyström weighting.
#[derive(Debug, Clone)]
pub struct SampledKernel {
    matrix: Mat<Complex64>,
    input: QuadratureGrid,
    output: QuadratureGrid,
    pub scenario: Option<Scenario>,
}

impl SampledKernel {
    pub fn matrix(&self) -> &Mat<Complex64> {
        &self.matrix
    }
    pub fn input_grid(&self) -> &QuadratureGrid {
        &self.input
    }
    pub fn output_grid(&self) -> &QuadratureGrid {
        &self.output
    }

    /// Same operator with the roles of input and output swapped (plain transpose).
    pub fn transposed(&self) -> Self {
        Self {
            matrix: self.matrix.transpose().to_owned(),
            input: self.output.clone(),
            output: self.input.clone(),
            scenario: self.scenario,
        }
    }

    /// Multiplies row `j` by `left[j]` and column `i` by `right[i]`.
    pub fn scaled(&self, left: &[Complex64], right: &[Complex64]) -> Self {
        let m = &self.matrix;
        Self {
            matrix: Mat::from_fn(m.nrows(), m.ncols(), |j, i| left[j] * m[(j, i)] * right[i]),
            input: self.input.clone(),
            output: self.output.clone(),
            scenario: self.scenario,
        }
    }
}

/// Samples `kernel` as `sqrt(w_j) K(r_j, r_i) sqrt(w_i)`.
pub fn assemble(
    kernel: &dyn TransferKernel,
    grid_in: &QuadratureGrid,
    grid_out: &QuadratureGrid,
) -> Result<SampledKernel> {
    if grid_in.domain() != kernel.input_domain() {
        return Err(Error::Config(format!(
            "input grid domain {:?} does not match kernel input {:?}",
            grid_in.domain(),
            kernel.input_domain()
        )));
    }
    if grid_out.domain() != kernel.output_domain() {
        return Err(Error::Config(format!(
            "output grid domain {:?} does not match kernel output {:?}",
            grid_out.domain(),
            kernel.output_domain()
        )));
    }
    let cols = grid_in.len();
    let sqrt_in: Vec<f64> = grid_in.weights().iter().map(|w| w.sqrt()).collect();
    let entries: Vec<Complex64> = grid_out
        .nodes()
        .par_iter()
        .zip(grid_out.weights().par_iter())
        .flat_map_iter(|(&r_out, &w_out)| {
            let row_scale = w_out.sqrt();
            let sqrt_in = &sqrt_in;
            grid_in
                .nodes()
                .iter()
                .enumerate()
                .map(move |(i, &r_in)| kernel.eval(r_out, r_in) * (row_scale * sqrt_in[i]))
        })
        .collect();
    if let Some(bad) = entries.iter().position(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Numerical(format!(
            "kernel produced a non-finite entry at row {}, column {}",
            bad / cols,
            bad % cols
        )));
    }
    let matrix = Mat::from_fn(grid_out.len(), cols, |j, i| entries[j * cols + i]);
    Ok(SampledKernel { matrix, input: grid_in.clone(), output: grid_out.clone(), scenario: None })
}

/// Two-stage product `K2 W K1` through a shared pupil grid, in symmetrised form.
pub fn compose_spectra_matrix(
    stage1: &SampledKernel,
    pupil: &QuadratureGrid,
    stage2: &SampledKernel,
) -> Result<SampledKernel> {
    if stage1.output_grid() != pupil || stage2.input_grid() != pupil {
        return Err(Error::Config(
            "stage grids must share the pupil grid (stage 1 output = stage 2 input)".into(),
        ));
    }
    let matrix = stage2.matrix() * stage1.matrix();
    Ok(SampledKernel {
        matrix,
        input: stage1.input.clone(),
        output: stage2.output.clone(),
        scenario: None,
    })
}

/// Singular values of the sampled kernel, squared into transmissivities.
pub fn singular_spectrum(sampled: &SampledKernel) -> Result<ModeSpectrum> {
    let sigma = sampled.matrix().singular_values().map_err(|e| {
        Error::Numerical(format!(
            "SVD of {}x{} matrix failed ({e:?}); Frobenius norm {:.6e}",
            sampled.matrix().nrows(),
            sampled.matrix().ncols(),
            sampled.matrix().norm_l2()
        ))
    })?;
    spectrum_from_singular_values(sigma, sampled)
}

fn spectrum_from_singular_values(
    mut sigma: Vec<f64>,
    sampled: &SampledKernel,
) -> Result<ModeSpectrum> {
    sigma.sort_by(|a, b| b.total_cmp(a));
    let mut clamp = ClampDiagnostics::default();
    let mut eta = Vec::with_capacity(sigma.len());
    for s in sigma.iter_mut() {
        let e = *s * *s;
        if !e.is_finite() {
            return Err(Error::Numerical("non-finite singular value".into()));
        }
        if e > 1.0 {
            let over = e - 1.0;
            clamp.max_overshoot = clamp.max_overshoot.max(over);
            if over > CLAMP_TOLERANCE {
                return Err(Error::Physicality(format!(
                    "transmissivity {e} exceeds one by {over:.3e}; the discretisation is inconsistent"
                )));
            }
            clamp.clamped += 1;
            *s = 1.0;
            eta.push(1.0);
        } else {
            eta.push(e);
        }
    }
    let mut spectrum = ModeSpectrum::assemble(eta, sigma, clamp, SpectrumSource::Numerical);
    spectrum.scenario = sampled.scenario;
    Ok(spectrum)
}

/// Grid refinement controls for [`converge_spectrum`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergenceOptions {
    /// Initial nodes per axis on the object and image squares.
    pub initial_order: usize,
    /// Largest nodes per axis tried.
    pub max_order: usize,
    /// Relative change tolerated between successive refinements.
    pub rtol: f64,
}

impl Default for ConvergenceOptions {
    fn default() -> Self {
        Self { initial_order: 8, max_order: 48, rtol: 1e-4 }
    }
}

impl ConvergenceOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.rtol > 0.0 && self.rtol.is_finite()) {
            return Err(Error::Config(format!("rtol must be > 0, got {}", self.rtol)));
        }
        if self.initial_order < grid::MIN_ORDER {
            return Err(Error::Config(format!(
                "initial order must be >= {}, got {}",
                grid::MIN_ORDER,
                self.initial_order
            )));
        }
        if self.max_order < self.initial_order {
            return Err(Error::Config(format!(
                "max order {} is below initial order {}",
                self.max_order, self.initial_order
            )));
        }
        Ok(())
    }
}

/// A scenario ready to be discretised at any square-grid order.
#[derive(Debug, Clone)]
pub enum Channel {
    Lens(LensKernel),
    FreeSpace(FreeSpaceKernel),
    Hole(HoleChannel),
}

/// The two free-space stages of the hole scenario and their pupil grid.
#[derive(Debug, Clone)]
pub struct HoleChannel {
    pub first: FreeSpaceKernel,
    pub second: FreeSpaceKernel,
    pub pupil: QuadratureGrid,
}

/// Stage matrices of a hole discretisation, kept for diagnostics.
#[derive(Debug, Clone)]
pub struct HoleStages {
    pub first: SampledKernel,
    pub second: SampledKernel,
    pub composite: SampledKernel,
}

impl Channel {
    pub fn new(spec: &KernelSpec) -> Result<Self> {
        spec.validate()?;
        let geom = &spec.geometry;
        Ok(match spec.scenario {
            Scenario::Lens => Channel::Lens(LensKernel::new(*geom, spec.include_phase)),
            Scenario::FreeSpace => Channel::FreeSpace(FreeSpaceKernel::scenario(geom)?),
            Scenario::Hole => {
                let order = spec.pupil_order.expect("validated");
                Channel::Hole(HoleChannel {
                    first: FreeSpaceKernel::object_to_screen(geom)?,
                    second: FreeSpaceKernel::screen_to_image(geom)?,
                    pupil: build_grid(Domain::Disk { radius: geom.pupil_radius() }, order)?,
                })
            }
        })
    }

    pub fn scenario(&self) -> Scenario {
        match self {
            Channel::Lens(_) => Scenario::Lens,
            Channel::FreeSpace(_) => Scenario::FreeSpace,
            Channel::Hole(_) => Scenario::Hole,
        }
    }

    fn squares(&self) -> (f64, f64) {
        let (input, output) = match self {
            Channel::Lens(k) => (k.input_domain(), k.output_domain()),
            Channel::FreeSpace(k) => (k.input_domain(), k.output_domain()),
            Channel::Hole(h) => (h.first.input_domain(), h.second.output_domain()),
        };
        match (input, output) {
            (Domain::Square { side: a }, Domain::Square { side: b }) => (a, b),
            _ => unreachable!("scenario channels map squares to squares"),
        }
    }

    /// Discretises the channel with `order` nodes per axis on both squares.
    pub fn sample(&self, order: usize) -> Result<SampledKernel> {
        let (side_in, side_out) = self.squares();
        let grid_in = square_grid(side_in, order)?;
        let grid_out = square_grid(side_out, order)?;
        let mut sampled = match self {
            Channel::Lens(k) => assemble(k, &grid_in, &grid_out)?,
            Channel::FreeSpace(k) => assemble(k, &grid_in, &grid_out)?,
            Channel::Hole(_) => self.sample_hole_stages(order)?.composite,
        };
        sampled.scenario = Some(self.scenario());
        Ok(sampled)
    }

    /// Stage and composite matrices of the hole scenario.
    pub fn sample_hole_stages(&self, order: usize) -> Result<HoleStages> {
        let Channel::Hole(h) = self else {
            return Err(Error::Config(format!("{} channel has no stages", self.scenario())));
        };
        let (side_in, side_out) = self.squares();
        let grid_in = square_grid(side_in, order)?;
        let grid_out = square_grid(side_out, order)?;
        let first = assemble(&h.first, &grid_in, &h.pupil)?;
        let second = assemble(&h.second, &h.pupil, &grid_out)?;
        let mut composite = compose_spectra_matrix(&first, &h.pupil, &second)?;
        composite.scenario = Some(Scenario::Hole);
        Ok(HoleStages { first, second, composite })
    }

    fn orders(&self, order: usize) -> GridOrders {
        GridOrders {
            input: GridOrder::PerAxis(order),
            output: GridOrder::PerAxis(order),
            pupil: match self {
                Channel::Hole(h) => Some(h.pupil.order()),
                _ => None,
            },
        }
    }

    /// Spectrum at a fixed grid order.
    pub fn spectrum(&self, order: usize) -> Result<ModeSpectrum> {
        let mut s = singular_spectrum(&self.sample(order)?)?;
        s.orders = Some(self.orders(order));
        Ok(s)
    }
}

/// Number of leading transmissivities compared between refinements.
pub fn compared_modes(scenario: Scenario, geom: &OpticalGeometry) -> usize {
    let f = scenario_fresnel(scenario, geom);
    10usize.max((2.0 * f).ceil() as usize)
}

/// Doubles the grid order until the leading transmissivities settle.
///
/// Returns the finest spectrum with `converged = false` when `max_order` is
/// reached first. Physicality violations at coarse orders are treated as
/// under-resolution and refined away; one at the final order is an error.
pub fn converge_spectrum(
    channel: &Channel,
    geom: &OpticalGeometry,
    opts: &ConvergenceOptions,
) -> Result<ModeSpectrum> {
    opts.validate()?;
    let compared = compared_modes(channel.scenario(), geom);
    let mut order = opts.initial_order;
    let mut previous = channel.spectrum(order);
    loop {
        if order >= opts.max_order {
            let mut last = previous?;
            last.converged = false;
            return Ok(last);
        }
        let next_order = (2 * order).min(opts.max_order);
        let current = channel.spectrum(next_order);
        if let (Ok(prev), Ok(cur)) = (&previous, &current) {
            if spectra_agree(prev, cur, compared, opts.rtol) {
                let mut done = current?;
                done.converged = true;
                return Ok(done);
            }
        }
        if let Err(e) = &previous {
            log::debug!("order {order} rejected: {e}");
        }
        previous = current;
        order = next_order;
    }
}

fn spectra_agree(a: &ModeSpectrum, b: &ModeSpectrum, count: usize, rtol: f64) -> bool {
    (0..count).all(|k| {
        let x = a.eta.get(k).copied().unwrap_or(0.0);
        let y = b.eta.get(k).copied().unwrap_or(0.0);
        (x - y).abs() <= rtol * x.abs().max(y.abs()).max(CONVERGENCE_FLOOR)
    })
}

/// Metadata written next to an exported spectrum.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectrumMetadata {
    pub scenario: Scenario,
    pub geometry: OpticalGeometry,
    pub orders: Option<GridOrders>,
    pub converged: bool,
    pub modes_written: usize,
    pub nu_threshold: usize,
    pub nu_sum: f64,
    pub clamp: ClampDiagnostics,
}

impl SpectrumMetadata {
    pub fn new(scenario: Scenario, geometry: OpticalGeometry, spectrum: &ModeSpectrum) -> Self {
        Self {
            scenario,
            geometry,
            orders: spectrum.orders,
            converged: spectrum.converged,
            modes_written: spectrum.eta.iter().take_while(|&&e| e >= EXPORT_FLOOR).count(),
            nu_threshold: spectrum.nu_threshold,
            nu_sum: spectrum.nu_sum,
            clamp: spectrum.clamp,
        }
    }
}
