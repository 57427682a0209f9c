//! Capacity of parallel lossy bosonic modes under a mean-photon budget.
//!
//! With coherent-state encoding a mode of transmissivity `eta` carrying `n`
//! photons on top of `N_th` thermal photons contributes
//! `g(eta n + N_th) - g(N_th)` nats. Splitting the budget optimally is a
//! concave water-filling problem solved here by bisection on the multiplier.

use std::f64::consts::LN_2;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mathfn::{g_increment_unchecked, g_unchecked};
use crate::spectra::{csv_err, fmt_f64, ModeSpectrum, SpectrumSource};

/// Modes weaker than this are left out of the allocation.
pub const EXCLUSION_FLOOR: f64 = 1e-30;

const MAX_BRACKET_STEPS: usize = 400;
const MAX_BISECTIONS: usize = 400;

/// Total mean photon number and thermal photons per mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhotonBudget {
    pub total: f64,
    pub thermal: f64,
}

impl PhotonBudget {
    pub fn new(total: f64, thermal: f64) -> Result<Self> {
        for (name, v) in [("photon budget", total), ("thermal photons", thermal)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Domain(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        Ok(Self { total, thermal })
    }

    pub fn pure_loss(total: f64) -> Result<Self> {
        Self::new(total, 0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AllocationRule {
    Equal,
    Waterfill,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseModel {
    PureLoss,
    Thermal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FormulaTag {
    pub allocation: AllocationRule,
    pub noise: NoiseModel,
}

/// Per-mode photon numbers for a spectrum, in the spectrum's mode order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Allocation {
    pub photons: Vec<f64>,
    /// Lagrange multiplier in nats per photon (water-filling only).
    pub multiplier: Option<f64>,
    pub active: usize,
    pub rule: AllocationRule,
    /// Upper bound on the capacity lost by excluding modes below [`EXCLUSION_FLOOR`].
    pub truncation_bound: f64,
}

impl Allocation {
    pub fn total(&self) -> f64 {
        self.photons.iter().sum()
    }
}

/// Capacity with per-mode contributions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapacityReport {
    pub total_nats: f64,
    pub contributions: Vec<f64>,
    pub eta: Vec<f64>,
    pub allocation: Allocation,
    pub thermal: f64,
    pub formula: FormulaTag,
    pub provenance: SpectrumSource,
}

impl CapacityReport {
    pub fn total_bits(&self) -> f64 {
        self.total_nats / LN_2
    }

    /// Writes `k,eta,n,contribution_nats` rows followed by a
    /// `total_nats,<C>,total_bits,<C/ln 2>` line.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["k", "eta", "n", "contribution_nats"]).map_err(csv_err)?;
        for (k, ((e, n), c)) in
            self.eta.iter().zip(&self.allocation.photons).zip(&self.contributions).enumerate()
        {
            w.write_record([(k + 1).to_string(), fmt_f64(*e), fmt_f64(*n), fmt_f64(*c)])
                .map_err(csv_err)?;
        }
        w.write_record([
            "total_nats".to_string(),
            fmt_f64(self.total_nats),
            "total_bits".to_string(),
            fmt_f64(self.total_bits()),
        ])
        .map_err(csv_err)?;
        w.flush()?;
        Ok(())
    }
}

fn check_eta(eta: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&eta) {
        return Err(Error::Domain(format!("transmissivity must lie in [0, 1], got {eta}")));
    }
    Ok(())
}

fn check_modes(nu: f64) -> Result<()> {
    if !(nu > 0.0 && nu.is_finite()) {
        return Err(Error::Domain(format!("mode count must be > 0, got {nu}")));
    }
    Ok(())
}

/// `nu g(eta N / nu)`: `nu` identical modes sharing `N` photons equally.
pub fn capacity_equal(eta: f64, nu: f64, total: f64) -> Result<f64> {
    capacity_thermal(eta, nu, total, 0.0)
}

/// `nu [g(eta N / nu + N_th) - g(N_th)]`, the coherent-state rate with
/// `N_th` thermal photons per mode.
pub fn capacity_thermal(eta: f64, nu: f64, total: f64, thermal: f64) -> Result<f64> {
    check_eta(eta)?;
    check_modes(nu)?;
    let budget = PhotonBudget::new(total, thermal)?;
    let per_mode = eta * budget.total / nu;
    Ok(nu * g_increment_unchecked(budget.thermal, per_mode))
}

/// Photons placed on a mode of transmissivity `eta` at multiplier `mu`.
fn photons_at(eta: f64, mu: f64, thermal: f64) -> f64 {
    let occupied = 1.0 / (mu / eta).exp_m1();
    ((occupied - thermal) / eta).max(0.0)
}

/// Optimal split of the budget across the spectrum's modes.
///
/// Active modes satisfy `eta_k ln(1 + 1/(eta_k n_k + N_th)) = mu`. With
/// `N_th = 0` every non-excluded mode is active.
pub fn water_fill(spectrum: &ModeSpectrum, budget: PhotonBudget) -> Result<Allocation> {
    let eta = spectrum.eta();
    let usable: Vec<usize> = (0..eta.len()).filter(|&k| eta[k] >= EXCLUSION_FLOOR).collect();
    if usable.is_empty() {
        return Err(Error::NoChannel);
    }
    let truncation_bound = eta
        .iter()
        .filter(|&&e| e < EXCLUSION_FLOOR)
        .map(|&e| g_unchecked(e * budget.total))
        .sum();
    let mut photons = vec![0.0; eta.len()];
    if budget.total == 0.0 {
        return Ok(Allocation {
            photons,
            multiplier: None,
            active: 0,
            rule: AllocationRule::Waterfill,
            truncation_bound,
        });
    }
    let n_total = budget.total;
    let thermal = budget.thermal;
    let spent = |mu: f64| -> f64 { usable.iter().map(|&k| photons_at(eta[k], mu, thermal)).sum() };

    let eta_max = eta[usable[0]];
    let guess = eta_max * (1.0 / (eta_max * n_total + thermal)).ln_1p();
    let mut lo = guess * 1e-3;
    let mut hi = guess * 1e3;
    let mut steps = 0;
    while spent(lo) < n_total {
        lo *= 1e-3;
        steps += 1;
        if steps > MAX_BRACKET_STEPS || lo == 0.0 {
            return Err(Error::Numerical(format!(
                "water-filling bracket failed: lower multiplier {lo:e} spends {:e} < {n_total:e}",
                spent(lo)
            )));
        }
    }
    while spent(hi) > n_total {
        hi *= 1e3;
        steps += 1;
        if steps > MAX_BRACKET_STEPS || !hi.is_finite() {
            return Err(Error::Numerical(format!(
                "water-filling bracket failed: upper multiplier {hi:e} spends {:e} > {n_total:e}",
                spent(hi)
            )));
        }
    }
    for _ in 0..MAX_BISECTIONS {
        let mid = (lo * hi).sqrt();
        if mid <= lo || mid >= hi {
            break;
        }
        if spent(mid) > n_total {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mu = 0.5 * (lo + hi);
    for &k in &usable {
        photons[k] = photons_at(eta[k], mu, thermal);
    }
    let sum: f64 = photons.iter().sum();
    if !(sum > 0.0 && sum.is_finite()) {
        return Err(Error::Numerical(format!(
            "water-filling produced total {sum:e} at multiplier {mu:e} (bracket [{lo:e}, {hi:e}])"
        )));
    }
    let scale = n_total / sum;
    for p in photons.iter_mut() {
        *p *= scale;
    }
    let active = photons.iter().filter(|&&p| p > 0.0).count();
    Ok(Allocation {
        photons,
        multiplier: Some(mu),
        active,
        rule: AllocationRule::Waterfill,
        truncation_bound,
    })
}

/// `N / nu` photons on each of the spectrum's modes.
pub fn uniform_allocation(spectrum: &ModeSpectrum, budget: PhotonBudget) -> Result<Allocation> {
    if spectrum.is_empty() {
        return Err(Error::NoChannel);
    }
    let share = budget.total / spectrum.len() as f64;
    Ok(Allocation {
        photons: vec![share; spectrum.len()],
        multiplier: None,
        active: if share > 0.0 { spectrum.len() } else { 0 },
        rule: AllocationRule::Equal,
        truncation_bound: 0.0,
    })
}

/// Sums `g(eta_k n_k + N_th) - g(N_th)` over the modes.
pub fn capacity_of(
    allocation: &Allocation,
    spectrum: &ModeSpectrum,
    thermal: f64,
) -> Result<CapacityReport> {
    if allocation.photons.len() != spectrum.len() {
        return Err(Error::Config(format!(
            "allocation has {} modes but the spectrum has {}",
            allocation.photons.len(),
            spectrum.len()
        )));
    }
    PhotonBudget::new(allocation.total(), thermal)?;
    let contributions: Vec<f64> = spectrum
        .eta()
        .iter()
        .zip(&allocation.photons)
        .map(|(&e, &n)| g_increment_unchecked(thermal, e * n))
        .collect();
    let total_nats = contributions.iter().sum();
    Ok(CapacityReport {
        total_nats,
        contributions,
        eta: spectrum.eta().to_vec(),
        allocation: allocation.clone(),
        thermal,
        formula: FormulaTag {
            allocation: allocation.rule,
            noise: if thermal > 0.0 { NoiseModel::Thermal } else { NoiseModel::PureLoss },
        },
        provenance: spectrum.source,
    })
}

/// Water-filled capacity of a spectrum in one call.
pub fn optimal_capacity(spectrum: &ModeSpectrum, budget: PhotonBudget) -> Result<CapacityReport> {
    let allocation = water_fill(spectrum, budget)?;
    capacity_of(&allocation, spectrum, budget.thermal)
}
