//! The normalised Jüttner equilibrium `J(p) = e^{-p⁰}/Z`.

use crate::geometry::FourMomentum;
use crate::quadrature::gauss_legendre_on;
use crate::quadrature::sum::neumaier;
use std::f64::consts::PI;

/// Equilibrium with `∫ J dp = 1`, i.e. `Z = ∫ e^{-p⁰} dp = 4πK₂(1)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Juttner {
    pub z: f64,
}

impl Default for Juttner {
    fn default() -> Self {
        Self::new()
    }
}

impl Juttner {
    /// Computes `Z` by a one-dimensional integral in `t = asinh|p|`.
    pub fn new() -> Self {
        let t_max = 80f64.asinh();
        let panels = 8;
        let mut terms = Vec::new();
        for i in 0..panels {
            let (a, b) = (t_max * i as f64 / panels as f64, t_max * (i + 1) as f64 / panels as f64);
            let (ts, ws) = gauss_legendre_on(40, a, b);
            for (t, w) in ts.iter().zip(&ws) {
                let (sh, ch) = (t.sinh(), t.cosh());
                terms.push(w * 4.0 * PI * sh * sh * ch * (-ch).exp());
            }
        }
        Self { z: neumaier(terms) }
    }

    #[inline]
    pub fn j(&self, p: &FourMomentum) -> f64 {
        (-p.p0).exp() / self.z
    }

    #[inline]
    pub fn sqrt_j(&self, p: &FourMomentum) -> f64 {
        (-0.5 * p.p0).exp() / self.z.sqrt()
    }

    /// `√J` from the energy alone.
    #[inline]
    pub fn sqrt_j_energy(&self, p0: f64) -> f64 {
        (-0.5 * p0).exp() / self.z.sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalisation_constant_matches_reference() {
        // 4πK₂(1), arbitrary-precision reference.
        let reference = 20.418_327_788_876_817_213_421;
        assert!((Juttner::new().z / reference - 1.0).abs() < 1e-14);
    }
}
