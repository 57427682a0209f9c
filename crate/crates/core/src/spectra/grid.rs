//! Tensor-product quadrature rules on the object/image squares and the pupil disk.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::PlanarPoint;

/// Smallest accepted nodes-per-axis (or radial/angular count).
pub const MIN_ORDER: usize = 4;

/// Integration domain on a transverse plane, centred on the optical axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "shape")]
pub enum Domain {
    Square { side: f64 },
    Disk { radius: f64 },
}

impl Domain {
    pub fn area(&self) -> f64 {
        match *self {
            Domain::Square { side } => side * side,
            Domain::Disk { radius } => PI * radius * radius,
        }
    }
}

/// Node counts of a grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridOrder {
    /// Nodes per axis of a square tensor rule.
    PerAxis(usize),
    /// Gauss-Legendre radial nodes times trapezoid angular nodes.
    Polar { radial: usize, angular: usize },
}

impl GridOrder {
    /// Polar order with twice as many angular as radial nodes.
    pub fn polar(radial: usize) -> Self {
        GridOrder::Polar { radial, angular: 2 * radial }
    }

    pub fn node_count(&self) -> usize {
        match *self {
            GridOrder::PerAxis(n) => n * n,
            GridOrder::Polar { radial, angular } => radial * angular,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadratureGrid {
    nodes: Vec<PlanarPoint>,
    weights: Vec<f64>,
    domain: Domain,
    order: GridOrder,
}

impl QuadratureGrid {
    pub fn nodes(&self) -> &[PlanarPoint] {
        &self.nodes
    }
    /// Quadrature weights in square metres.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
    pub fn domain(&self) -> Domain {
        self.domain
    }
    pub fn order(&self) -> GridOrder {
        self.order
    }
    pub fn len(&self) -> usize {
        self.nodes.len()
    }
    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Approximates the integral of `f` over the domain.
    pub fn integrate<F: Fn(PlanarPoint) -> f64>(&self, f: F) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&p, &w)| w * f(p)).sum()
    }
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`, nodes ascending.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        // Tricomi initial guess followed by Newton on P_n
        let mut z = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, z);
        dp = if d.is_finite() { d } else { dp };
        let weight = 2.0 / ((1.0 - z * z) * dp * dp);
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = weight;
        w[n - 1 - i] = weight;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x, w)
}

fn legendre_with_derivative(n: usize, z: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = z;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, d)
}

/// Builds a tensor Gauss-Legendre rule on a square or a polar rule on a disk.
pub fn build_grid(domain: Domain, order: GridOrder) -> Result<QuadratureGrid> {
    match (domain, order) {
        (Domain::Square { side }, GridOrder::PerAxis(n)) => {
            check_order("nodes per axis", n)?;
            check_extent(side)?;
            let (x, w) = gauss_legendre(n);
            let half = 0.5 * side;
            let mut nodes = Vec::with_capacity(n * n);
            let mut weights = Vec::with_capacity(n * n);
            for (xi, wi) in x.iter().zip(&w) {
                for (yj, wj) in x.iter().zip(&w) {
                    nodes.push(PlanarPoint::new(half * xi, half * yj));
                    weights.push(half * half * wi * wj);
                }
            }
            Ok(QuadratureGrid { nodes, weights, domain, order })
        }
        (Domain::Disk { radius }, GridOrder::Polar { radial, angular }) => {
            check_order("radial nodes", radial)?;
            check_order("angular nodes", angular)?;
            check_extent(radius)?;
            let (x, w) = gauss_legendre(radial);
            let half = 0.5 * radius;
            let dphi = 2.0 * PI / angular as f64;
            let mut nodes = Vec::with_capacity(radial * angular);
            let mut weights = Vec::with_capacity(radial * angular);
            for (xi, wi) in x.iter().zip(&w) {
                let r = half * (xi + 1.0);
                let wr = half * wi * r;
                for k in 0..angular {
                    let phi = dphi * (k as f64 + 0.5);
                    nodes.push(PlanarPoint::new(r * phi.cos(), r * phi.sin()));
                    weights.push(wr * dphi);
                }
            }
            Ok(QuadratureGrid { nodes, weights, domain, order })
        }
        (domain, order) => Err(Error::Config(format!(
            "grid order {order:?} does not fit domain {domain:?}"
        ))),
    }
}

/// Square grid of side `side` with `n` nodes per axis.
pub fn square_grid(side: f64, n: usize) -> Result<QuadratureGrid> {
    build_grid(Domain::Square { side }, GridOrder::PerAxis(n))
}

fn check_order(what: &str, n: usize) -> Result<()> {
    if n < MIN_ORDER {
        return Err(Error::Config(format!("{what} must be >= {MIN_ORDER}, got {n}")));
    }
    Ok(())
}

fn check_extent(v: f64) -> Result<()> {
    if !(v.is_finite() && v > 0.0) {
        return Err(Error::Config(format!("domain extent must be finite and > 0, got {v}")));
    }
    Ok(())
}
