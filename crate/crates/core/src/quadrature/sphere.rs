//! Product quadrature on the unit sphere.

use super::gauss::gauss_legendre;
use super::sum::pairwise;
use crate::error::{Error, Result};
use crate::geometry::{orthonormal_frame, Vec3};
use std::f64::consts::PI;

/// Gauss–Legendre in `cos θ` times the trapezoid rule in `φ`, optionally
/// oriented so that the polar axis is a given unit vector.
#[derive(Clone, Debug)]
pub struct SphereRule {
    pub nodes: Vec<Vec3>,
    pub weights: Vec<f64>,
    /// Total degree of spherical polynomials integrated exactly.
    pub degree: usize,
    pub n_theta: usize,
    pub n_phi: usize,
}

impl SphereRule {
    /// Rule with the polar axis along `e_z`.
    pub fn new(n_theta: usize, n_phi: usize) -> Self {
        Self::oriented(n_theta, n_phi, &[0.0, 0.0, 1.0])
    }

    /// Rule whose polar axis is the unit vector `axis`.
    pub fn oriented(n_theta: usize, n_phi: usize, axis: &Vec3) -> Self {
        assert!(n_theta > 0 && n_phi > 0);
        let (e1, e2) = orthonormal_frame(axis);
        let (ct, wt) = gauss_legendre(n_theta);
        let mut nodes = Vec::with_capacity(n_theta * n_phi);
        let mut weights = Vec::with_capacity(n_theta * n_phi);
        let dphi = 2.0 * PI / n_phi as f64;
        for (c, w) in ct.iter().zip(&wt) {
            let st = (1.0 - c * c).max(0.0).sqrt();
            for j in 0..n_phi {
                let phi = (j as f64 + 0.5) * dphi;
                let (sp, cp) = phi.sin_cos();
                let mut v = [0.0; 3];
                for i in 0..3 {
                    v[i] = c * axis[i] + st * (cp * e1[i] + sp * e2[i]);
                }
                nodes.push(v);
                weights.push(w * dphi);
            }
        }
        let degree = (2 * n_theta - 1).min(n_phi - 1);
        Self { nodes, weights, degree, n_theta, n_phi }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// True for nodes with an even `φ` index; the two parity classes are
    /// independent half-rules used for error estimates.
    pub fn phi_parity(&self, index: usize) -> bool {
        (index % self.n_phi) % 2 == 0
    }
}

/// `∫_{S²} h dω`; non-finite integrand values are reported as errors.
pub fn integrate_sphere(h: impl Fn(&Vec3) -> f64, rule: &SphereRule) -> Result<f64> {
    let mut vals = Vec::with_capacity(rule.len());
    for (n, w) in rule.nodes.iter().zip(&rule.weights) {
        let v = h(n);
        if !v.is_finite() {
            return Err(Error::NotFinite(format!("sphere integrand at {n:?}")));
        }
        vals.push(w * v);
    }
    Ok(pairwise(&vals))
}
