//! Physical parameterisation of the three communication scenarios, their
//! Fresnel numbers, regime classification and the closed-form asymptotic
//! spectra.

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectra::{ModeSpectrum, SpectrumSource};

/// Relative mismatch above which over-specified thin-lens input is rejected.
pub const THIN_LENS_TOLERANCE: f64 = 1e-9;

/// Default bound on `L / D_o` and `R / D_o` before a paraxial warning.
pub const DEFAULT_PARAXIAL_RATIO: f64 = 0.1;

/// Which propagation the channel models.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    /// Thin lens with a circular pupil in an absorbing screen.
    Lens,
    /// Direct propagation over `D_o + D_i`.
    FreeSpace,
    /// The lens replaced by an empty hole of the same radius.
    Hole,
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scenario::Lens => "lens",
            Scenario::FreeSpace => "free_space",
            Scenario::Hole => "hole",
        })
    }
}

/// Input for [`OpticalGeometry::new`]. `D_o` is always required together with
/// at least one of image distance, focal length or magnification.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryInput {
    /// Wavelength in metres.
    pub wavelength: f64,
    /// Object-to-lens distance in metres.
    pub object_distance: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image_distance: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub focal_length: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub magnification: Option<f64>,
    /// Pupil radius in metres.
    pub pupil_radius: f64,
    /// Side of the square object patch in metres.
    pub object_side: f64,
}

/// A validated thin-lens imaging geometry. All lengths are in metres.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OpticalGeometry {
    wavelength: f64,
    object_distance: f64,
    image_distance: f64,
    focal_length: f64,
    magnification: f64,
    pupil_radius: f64,
    object_side: f64,
}

fn positive(name: &str, value: f64) -> Result<f64> {
    if value.is_finite() && value > 0.0 {
        Ok(value)
    } else {
        Err(Error::Config(format!("{name} must be finite and > 0, got {value}")))
    }
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs())
}

impl OpticalGeometry {
    /// Solves the thin-lens equation from `D_o` and whichever of `D_i`, `f`,
    /// `M` are given; redundant values must agree to [`THIN_LENS_TOLERANCE`].
    pub fn new(input: &GeometryInput) -> Result<Self> {
        let wavelength = positive("wavelength", input.wavelength)?;
        let d_o = positive("object_distance", input.object_distance)?;
        let pupil_radius = positive("pupil_radius", input.pupil_radius)?;
        let object_side = positive("object_side", input.object_side)?;

        let d_i_from_f = input
            .focal_length
            .map(|f| {
                let f = positive("focal_length", f)?;
                if f >= d_o {
                    return Err(Error::Config(format!(
                        "focal_length {f} must be shorter than object_distance {d_o} for a real image"
                    )));
                }
                Ok(f * d_o / (d_o - f))
            })
            .transpose()?;
        let d_i_from_m = input
            .magnification
            .map(|m| positive("magnification", m).map(|m| m * d_o))
            .transpose()?;
        let d_i_given = input
            .image_distance
            .map(|d| positive("image_distance", d))
            .transpose()?;

        let candidates: Vec<(&str, f64)> = [
            ("image_distance", d_i_given),
            ("focal_length", d_i_from_f),
            ("magnification", d_i_from_m),
        ]
        .into_iter()
        .filter_map(|(n, v)| v.map(|v| (n, v)))
        .collect();

        let Some(&(_, d_i)) = candidates.first() else {
            return Err(Error::Config(
                "geometry needs one of image_distance, focal_length or magnification".into(),
            ));
        };
        for &(name, other) in &candidates[1..] {
            if !close(d_i, other, THIN_LENS_TOLERANCE) {
                return Err(Error::Config(format!(
                    "{name} implies image distance {other}, contradicting {d_i}"
                )));
            }
        }
        Self::from_distances(wavelength, d_o, d_i, pupil_radius, object_side)
    }

    /// Builds the geometry from object and image distances.
    pub fn from_distances(
        wavelength: f64,
        object_distance: f64,
        image_distance: f64,
        pupil_radius: f64,
        object_side: f64,
    ) -> Result<Self> {
        let wavelength = positive("wavelength", wavelength)?;
        let d_o = positive("object_distance", object_distance)?;
        let d_i = positive("image_distance", image_distance)?;
        let geom = Self {
            wavelength,
            object_distance: d_o,
            image_distance: d_i,
            focal_length: d_o * d_i / (d_o + d_i),
            magnification: d_i / d_o,
            pupil_radius: positive("pupil_radius", pupil_radius)?,
            object_side: positive("object_side", object_side)?,
        };
        for w in geom.paraxial_warnings(DEFAULT_PARAXIAL_RATIO) {
            log::warn!("{w}");
        }
        Ok(geom)
    }

    /// Convenience constructor from `(lambda, D_o, M, R, L)`.
    pub fn with_magnification(
        wavelength: f64,
        object_distance: f64,
        magnification: f64,
        pupil_radius: f64,
        object_side: f64,
    ) -> Result<Self> {
        let m = positive("magnification", magnification)?;
        Self::from_distances(
            wavelength,
            object_distance,
            m * object_distance,
            pupil_radius,
            object_side,
        )
    }

    pub fn wavelength(&self) -> f64 {
        self.wavelength
    }
    pub fn object_distance(&self) -> f64 {
        self.object_distance
    }
    pub fn image_distance(&self) -> f64 {
        self.image_distance
    }
    pub fn focal_length(&self) -> f64 {
        self.focal_length
    }
    pub fn magnification(&self) -> f64 {
        self.magnification
    }
    pub fn pupil_radius(&self) -> f64 {
        self.pupil_radius
    }
    pub fn object_side(&self) -> f64 {
        self.object_side
    }
    /// Side `M L` of the geometric image of the object square.
    pub fn image_side(&self) -> f64 {
        self.magnification * self.object_side
    }
    /// Object-to-image distance `D_o (1 + M)`.
    pub fn total_distance(&self) -> f64 {
        self.object_distance + self.image_distance
    }

    /// Returns a copy with every length multiplied by `s`.
    pub fn rescaled(&self, s: f64) -> Result<Self> {
        Self::from_distances(
            s * self.wavelength,
            s * self.object_distance,
            s * self.image_distance,
            s * self.pupil_radius,
            s * self.object_side,
        )
    }

    /// Returns a copy with a different object side.
    pub fn with_object_side(&self, object_side: f64) -> Result<Self> {
        Self::from_distances(
            self.wavelength,
            self.object_distance,
            self.image_distance,
            self.pupil_radius,
            object_side,
        )
    }

    /// Human-readable notes for parameters that stretch the paraxial model.
    pub fn paraxial_warnings(&self, ratio: f64) -> Vec<String> {
        let mut out = Vec::new();
        let d_o = self.object_distance;
        if self.object_side > ratio * d_o {
            out.push(format!(
                "object side {} exceeds {ratio} x object distance {d_o}; paraxial model is approximate",
                self.object_side
            ));
        }
        if self.pupil_radius > ratio * d_o {
            out.push(format!(
                "pupil radius {} exceeds {ratio} x object distance {d_o}; paraxial model is approximate",
                self.pupil_radius
            ));
        }
        out
    }
}

/// Fresnel number of the lens system, `pi R^2 L^2 / (lambda D_o)^2`.
pub fn fresnel_lens(geom: &OpticalGeometry) -> f64 {
    let q = geom.pupil_radius * geom.object_side / (geom.wavelength * geom.object_distance);
    PI * q * q
}

/// Rayleigh length `lambda D_o / R` on the object plane.
pub fn rayleigh_length(geom: &OpticalGeometry) -> f64 {
    geom.wavelength * geom.object_distance / geom.pupil_radius
}

/// Free-space Fresnel number `L^4 / (lambda D_o)^2 * (M / (1 + M))^2`.
pub fn fresnel_free_space(geom: &OpticalGeometry) -> f64 {
    let l2 = geom.object_side * geom.object_side;
    let m = geom.magnification;
    let q = l2 / (geom.wavelength * geom.object_distance) * (m / (1.0 + m));
    q * q
}

/// Fresnel number `A1 A2 / (lambda d)^2` for two apertures a distance `d` apart.
pub fn fresnel_from_areas(area_in: f64, area_out: f64, wavelength: f64, distance: f64) -> f64 {
    let ld = wavelength * distance;
    area_in * area_out / (ld * ld)
}

/// Fresnel numbers of the two free-space stages of the hole scenario,
/// object to screen and screen to image. Both equal [`fresnel_lens`].
pub fn hole_stage_fresnel(geom: &OpticalGeometry) -> (f64, f64) {
    let pupil_area = PI * geom.pupil_radius * geom.pupil_radius;
    let first = fresnel_from_areas(
        geom.object_side * geom.object_side,
        pupil_area,
        geom.wavelength,
        geom.object_distance,
    );
    let ml = geom.image_side();
    let second = fresnel_from_areas(pupil_area, ml * ml, geom.wavelength, geom.image_distance);
    (first, second)
}

/// Fresnel number governing a scenario's mode count.
pub fn scenario_fresnel(scenario: Scenario, geom: &OpticalGeometry) -> f64 {
    match scenario {
        Scenario::Lens | Scenario::Hole => fresnel_lens(geom),
        Scenario::FreeSpace => fresnel_free_space(geom),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Farfield,
    Nearfield,
    Intermediate,
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Regime::Farfield => "Farfield",
            Regime::Nearfield => "Nearfield",
            Regime::Intermediate => "Intermediate",
        })
    }
}

/// Farfield / nearfield decision thresholds on a Fresnel number.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegimeThresholds {
    pub farfield: f64,
    pub nearfield: f64,
}

impl Default for RegimeThresholds {
    fn default() -> Self {
        Self { farfield: 0.1, nearfield: 10.0 }
    }
}

impl RegimeThresholds {
    pub fn validate(&self) -> Result<()> {
        if !(self.farfield > 0.0 && self.farfield < self.nearfield && self.nearfield.is_finite()) {
            return Err(Error::Config(format!(
                "regime thresholds must satisfy 0 < farfield < nearfield, got ({}, {})",
                self.farfield, self.nearfield
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegimeLabel {
    pub regime: Regime,
    pub fresnel: f64,
    pub thresholds: RegimeThresholds,
}

pub fn classify_regime(fresnel: f64, thresholds: RegimeThresholds) -> Result<RegimeLabel> {
    thresholds.validate()?;
    let regime = if fresnel < thresholds.farfield {
        Regime::Farfield
    } else if fresnel > thresholds.nearfield {
        Regime::Nearfield
    } else {
        Regime::Intermediate
    };
    Ok(RegimeLabel { regime, fresnel, thresholds })
}

/// Closed-form spectrum in the farfield (one lossy mode) or nearfield
/// (`ceil(F)` lossless modes) limit.
pub fn asymptotic_spectrum(
    scenario: Scenario,
    geom: &OpticalGeometry,
    thresholds: RegimeThresholds,
) -> Result<ModeSpectrum> {
    if scenario == Scenario::Hole {
        return Err(Error::Unsupported(
            "the hole scenario has no closed-form spectrum; use the numerical path".into(),
        ));
    }
    let fresnel = scenario_fresnel(scenario, geom);
    let label = classify_regime(fresnel, thresholds)?;
    match label.regime {
        Regime::Farfield => {
            let eta = match scenario {
                Scenario::Lens => fresnel * fresnel,
                _ => fresnel,
            };
            ModeSpectrum::asymptotic(vec![eta], None)
        }
        Regime::Nearfield => {
            let count = fresnel.ceil() as usize;
            ModeSpectrum::asymptotic(vec![1.0; count], Some(fresnel))
        }
        Regime::Intermediate => Err(Error::NoClosedForm(format!(
            "{scenario} Fresnel number {fresnel} lies between {} and {}; compute the spectrum numerically",
            thresholds.farfield, thresholds.nearfield
        ))),
    }
}

impl ModeSpectrum {
    fn asymptotic(eta: Vec<f64>, raw_count: Option<f64>) -> Result<Self> {
        let mut spectrum = ModeSpectrum::from_transmissivities(eta)?;
        spectrum.source = SpectrumSource::Asymptotic;
        spectrum.raw_mode_count = raw_count;
        Ok(spectrum)
    }
}

/// Farfield loss ratio `eta / eta_fs = (pi R^2 / (lambda D_o))^2 ((1+M)/M)^2`.
pub fn ratio_r1(geom: &OpticalGeometry) -> f64 {
    let a = PI * geom.pupil_radius * geom.pupil_radius / (geom.wavelength * geom.object_distance);
    let m = geom.magnification;
    let b = (1.0 + m) / m;
    a * a * b * b
}

/// Nearfield mode-count ratio `nu / nu_fs = pi (R/L)^2 ((1+M)/M)^2`.
pub fn ratio_r2(geom: &OpticalGeometry) -> f64 {
    let a = geom.pupil_radius / geom.object_side;
    let m = geom.magnification;
    let b = (1.0 + m) / m;
    PI * a * a * b * b
}

/// Outcome of [`mixed_regime_check`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixedRegimeCheck {
    pub holds: bool,
    /// `lambda / (margin * L^2 M / (D_o (M+1)))`; at least one when the lower bound holds.
    pub lower_slack: f64,
    /// `(L R / D_o) / (margin * lambda)`; at least one when the upper bound holds.
    pub upper_slack: f64,
    pub margin: f64,
}

/// Tests `L^2 M / (D_o (M+1)) << lambda << L R / D_o` with "much less"
/// meaning a factor of at least `margin`.
pub fn mixed_regime_check(geom: &OpticalGeometry, margin: f64) -> Result<MixedRegimeCheck> {
    if !(margin >= 1.0 && margin.is_finite()) {
        return Err(Error::Config(format!("mixed-regime margin must be >= 1, got {margin}")));
    }
    let m = geom.magnification;
    let l = geom.object_side;
    let lower = l * l / geom.object_distance * m / (m + 1.0);
    let upper = l * geom.pupil_radius / geom.object_distance;
    let lower_slack = geom.wavelength / (margin * lower);
    let upper_slack = upper / (margin * geom.wavelength);
    Ok(MixedRegimeCheck {
        holds: lower_slack >= 1.0 && upper_slack >= 1.0,
        lower_slack,
        upper_slack,
        margin,
    })
}

pub const DEFAULT_MIXED_MARGIN: f64 = 10.0;
