//! Propagation kernels for the three scenarios. All kernels have dimension
//! 1/m^2 so that integrating against a field over an area is dimensionless.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{OpticalGeometry, Scenario};
use crate::mathfn::jinc_unchecked;
use crate::spectra::grid::{build_grid, Domain, GridOrder, QuadratureGrid, MIN_ORDER};

/// Cartesian point on a transverse plane, in metres.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PlanarPoint {
    pub x: f64,
    pub y: f64,
}

impl PlanarPoint {
    pub const ORIGIN: Self = Self { x: 0.0, y: 0.0 };

    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }
    pub fn norm_sqr(&self) -> f64 {
        self.x * self.x + self.y * self.y
    }
    pub fn norm(&self) -> f64 {
        self.x.hypot(self.y)
    }
    pub fn scale(&self, s: f64) -> Self {
        Self::new(s * self.x, s * self.y)
    }
    pub fn distance_sqr(&self, other: &Self) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        dx * dx + dy * dy
    }
}

/// A kernel `K(r_out, r_in)` mapping fields on its input domain to its output domain.
pub trait TransferKernel: Sync {
    fn input_domain(&self) -> Domain;
    fn output_domain(&self) -> Domain;
    fn eval(&self, r_out: PlanarPoint, r_in: PlanarPoint) -> Complex64;
}

/// Scenario kernel description.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelSpec {
    pub scenario: Scenario,
    pub geometry: OpticalGeometry,
    /// Multiply the lens PSF by its separable phase `e^{j theta}`.
    pub include_phase: bool,
    /// Pupil quadrature for the hole scenario.
    pub pupil_order: Option<GridOrder>,
}

impl KernelSpec {
    pub fn new(scenario: Scenario, geometry: OpticalGeometry) -> Self {
        Self { scenario, geometry, include_phase: false, pupil_order: None }
    }

    pub fn with_phase(mut self, include_phase: bool) -> Self {
        self.include_phase = include_phase;
        self
    }

    pub fn with_pupil_order(mut self, order: GridOrder) -> Self {
        self.pupil_order = Some(order);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.scenario == Scenario::Hole {
            match self.pupil_order {
                Some(GridOrder::Polar { radial, angular })
                    if radial >= MIN_ORDER && angular >= MIN_ORDER => {}
                Some(other) => {
                    return Err(Error::Config(format!(
                        "hole pupil order must be polar with counts >= {MIN_ORDER}, got {other:?}"
                    )))
                }
                None => return Err(Error::Config("hole scenario needs a pupil order".into())),
            }
        }
        Ok(())
    }
}

/// Phase `theta(r_i, r_o)` of the lens PSF, unreduced.
pub fn lens_phase(geom: &OpticalGeometry, r_i: PlanarPoint, r_o: PlanarPoint) -> f64 {
    let lambda = geom.wavelength();
    let d_o = geom.object_distance();
    let m = geom.magnification();
    PI / (lambda * d_o) * (r_o.norm_sqr() + r_i.norm_sqr() / m) + TAU * d_o / lambda * (1.0 + m)
}

/// Splits the lens phase into image-side and object-side parts. The constant
/// term is attached to the object side.
pub fn lens_phase_parts(geom: &OpticalGeometry, r_i: PlanarPoint, r_o: PlanarPoint) -> (f64, f64) {
    let lambda = geom.wavelength();
    let d_o = geom.object_distance();
    let m = geom.magnification();
    let image = PI * r_i.norm_sqr() / (lambda * d_o * m);
    let object = PI * r_o.norm_sqr() / (lambda * d_o) + TAU * d_o / lambda * (1.0 + m);
    (image, object)
}

/// `lens_phase` reduced modulo 2 pi without losing the quadratic part to the
/// large constant `2 pi D_o (1 + M) / lambda`.
fn lens_phase_reduced(geom: &OpticalGeometry, r_i: PlanarPoint, r_o: PlanarPoint) -> f64 {
    let lambda = geom.wavelength();
    let d_o = geom.object_distance();
    let m = geom.magnification();
    let cycles = (d_o / lambda * (1.0 + m)).rem_euclid(1.0);
    PI / (lambda * d_o) * (r_o.norm_sqr() + r_i.norm_sqr() / m) + TAU * cycles
}

/// Circular-pupil point-spread function of the thin lens.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LensKernel {
    geometry: OpticalGeometry,
    include_phase: bool,
}

impl LensKernel {
    pub fn new(geometry: OpticalGeometry, include_phase: bool) -> Self {
        Self { geometry, include_phase }
    }

    /// Peak modulus `pi R^2 / (lambda^2 D_o D_i)` reached at `r_i = M r_o`.
    pub fn peak(&self) -> f64 {
        let g = &self.geometry;
        PI * g.pupil_radius().powi(2)
            / (g.wavelength().powi(2) * g.object_distance() * g.image_distance())
    }
}

impl TransferKernel for LensKernel {
    fn input_domain(&self) -> Domain {
        Domain::Square { side: self.geometry.object_side() }
    }
    fn output_domain(&self) -> Domain {
        Domain::Square { side: self.geometry.image_side() }
    }
    fn eval(&self, r_i: PlanarPoint, r_o: PlanarPoint) -> Complex64 {
        let g = &self.geometry;
        let lambda = g.wavelength();
        let r = g.pupil_radius();
        let m = g.magnification();
        let d_i = g.image_distance();
        let offset = PlanarPoint::new(r_i.x - m * r_o.x, r_i.y - m * r_o.y);
        let u = r * offset.norm() / (lambda * d_i);
        let amplitude = r * r / (lambda * lambda * g.object_distance() * d_i) * jinc_unchecked(u);
        if self.include_phase {
            Complex64::from_polar(amplitude, lens_phase_reduced(g, r_i, r_o))
        } else {
            Complex64::new(amplitude, 0.0)
        }
    }
}

/// Lens PSF at a point pair.
pub fn lens_psf(spec: &KernelSpec, r_i: PlanarPoint, r_o: PlanarPoint) -> Result<Complex64> {
    if spec.scenario != Scenario::Lens {
        return Err(Error::Config(format!("lens_psf needs the lens scenario, got {}", spec.scenario)));
    }
    Ok(LensKernel::new(spec.geometry, spec.include_phase).eval(r_i, r_o))
}

/// Paraxial (Fresnel) propagator `exp(j pi |r2 - r1|^2 / (lambda d)) / (lambda d)`.
pub fn free_space_kernel(
    distance: f64,
    r2: PlanarPoint,
    r1: PlanarPoint,
    wavelength: f64,
) -> Result<Complex64> {
    if !(distance > 0.0 && distance.is_finite()) {
        return Err(Error::Domain(format!("propagation distance must be > 0, got {distance}")));
    }
    if !(wavelength > 0.0 && wavelength.is_finite()) {
        return Err(Error::Domain(format!("wavelength must be > 0, got {wavelength}")));
    }
    Ok(fresnel_propagator(distance, wavelength, r2, r1))
}

#[inline]
fn fresnel_propagator(distance: f64, wavelength: f64, r2: PlanarPoint, r1: PlanarPoint) -> Complex64 {
    let ld = wavelength * distance;
    Complex64::from_polar(1.0 / ld, PI * r2.distance_sqr(&r1) / ld)
}

/// Free-space propagation between two apertures.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FreeSpaceKernel {
    distance: f64,
    wavelength: f64,
    input: Domain,
    output: Domain,
}

impl FreeSpaceKernel {
    pub fn new(distance: f64, wavelength: f64, input: Domain, output: Domain) -> Result<Self> {
        free_space_kernel(distance, PlanarPoint::ORIGIN, PlanarPoint::ORIGIN, wavelength)?;
        Ok(Self { distance, wavelength, input, output })
    }

    /// Direct object-to-image propagation over `D_o + D_i`.
    pub fn scenario(geom: &OpticalGeometry) -> Result<Self> {
        Self::new(
            geom.total_distance(),
            geom.wavelength(),
            Domain::Square { side: geom.object_side() },
            Domain::Square { side: geom.image_side() },
        )
    }

    /// Object square to pupil disk over `D_o`.
    pub fn object_to_screen(geom: &OpticalGeometry) -> Result<Self> {
        Self::new(
            geom.object_distance(),
            geom.wavelength(),
            Domain::Square { side: geom.object_side() },
            Domain::Disk { radius: geom.pupil_radius() },
        )
    }

    /// Pupil disk to image square over `D_i`.
    pub fn screen_to_image(geom: &OpticalGeometry) -> Result<Self> {
        Self::new(
            geom.image_distance(),
            geom.wavelength(),
            Domain::Disk { radius: geom.pupil_radius() },
            Domain::Square { side: geom.image_side() },
        )
    }

    pub fn distance(&self) -> f64 {
        self.distance
    }
}

impl TransferKernel for FreeSpaceKernel {
    fn input_domain(&self) -> Domain {
        self.input
    }
    fn output_domain(&self) -> Domain {
        self.output
    }
    fn eval(&self, r_out: PlanarPoint, r_in: PlanarPoint) -> Complex64 {
        fresnel_propagator(self.distance, self.wavelength, r_out, r_in)
    }
}

/// Object-to-image kernel through an empty hole of radius `R`, evaluated by
/// quadrature over the pupil.
#[derive(Debug, Clone)]
pub struct HoleKernel {
    first: FreeSpaceKernel,
    second: FreeSpaceKernel,
    pupil: QuadratureGrid,
}

impl HoleKernel {
    pub fn new(spec: &KernelSpec) -> Result<Self> {
        if spec.scenario != Scenario::Hole {
            return Err(Error::Config(format!(
                "hole kernel needs the hole scenario, got {}",
                spec.scenario
            )));
        }
        spec.validate()?;
        let geom = &spec.geometry;
        let order = spec.pupil_order.expect("validated");
        Ok(Self {
            first: FreeSpaceKernel::object_to_screen(geom)?,
            second: FreeSpaceKernel::screen_to_image(geom)?,
            pupil: build_grid(Domain::Disk { radius: geom.pupil_radius() }, order)?,
        })
    }

    pub fn first_stage(&self) -> &FreeSpaceKernel {
        &self.first
    }
    pub fn second_stage(&self) -> &FreeSpaceKernel {
        &self.second
    }
    pub fn pupil(&self) -> &QuadratureGrid {
        &self.pupil
    }
}

impl TransferKernel for HoleKernel {
    fn input_domain(&self) -> Domain {
        self.first.input
    }
    fn output_domain(&self) -> Domain {
        self.second.output
    }
    fn eval(&self, r_i: PlanarPoint, r_o: PlanarPoint) -> Complex64 {
        self.pupil
            .nodes()
            .iter()
            .zip(self.pupil.weights())
            .map(|(&s, &w)| self.second.eval(r_i, s) * self.first.eval(s, r_o) * w)
            .sum()
    }
}

/// Composite kernel of the hole scenario at a point pair.
pub fn hole_composite_kernel(kernel: &HoleKernel, r_i: PlanarPoint, r_o: PlanarPoint) -> Complex64 {
    kernel.eval(r_i, r_o)
}
