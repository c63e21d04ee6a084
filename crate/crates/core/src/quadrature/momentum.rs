//! Tensor-product quadrature on momentum space `ℝ³_p`.
//!
//! Radii use the map `r = sinh t` with Gauss–Legendre panels in `t`, which
//! resolves both the `r²` behaviour at the origin and the `e^{-r}` tail.

use super::gauss::gauss_legendre_on;
use super::sphere::SphereRule;
use super::sum::pairwise;
use crate::error::{Error, Result};
use crate::geometry::{scale, FourMomentum};
use serde::{Deserialize, Serialize};

/// Parameters of a [`MomentumGrid`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MomentumGridSpec {
    /// Gauss nodes per radial panel.
    pub radial_nodes: usize,
    /// Number of equal panels in `t = asinh r`.
    pub radial_panels: usize,
    /// Extra panel boundaries (radii) where integrands have kinks.
    #[serde(default)]
    pub breakpoints: Vec<f64>,
    pub sphere_theta: usize,
    pub sphere_phi: usize,
    /// Momentum cutoff.
    pub r_max: f64,
}

impl Default for MomentumGridSpec {
    fn default() -> Self {
        Self { radial_nodes: 16, radial_panels: 1, breakpoints: vec![], sphere_theta: 4, sphere_phi: 8, r_max: 24.0 }
    }
}

impl MomentumGridSpec {
    pub fn validate(&self) -> Result<()> {
        if self.radial_nodes == 0 || self.radial_panels == 0 || self.sphere_theta == 0 || self.sphere_phi == 0 {
            return Err(Error::Validation("grid node counts must be positive".into()));
        }
        if !(self.r_max > 0.0 && self.r_max.is_finite()) {
            return Err(Error::Validation(format!("r_max = {} must be positive", self.r_max)));
        }
        if self.breakpoints.iter().any(|b| !(*b > 0.0 && *b < self.r_max)) {
            return Err(Error::Validation("breakpoints must lie in (0, r_max)".into()));
        }
        Ok(())
    }

    /// The same grid with twice as many radial nodes.
    pub fn refined(&self) -> Self {
        Self { radial_nodes: 2 * self.radial_nodes, ..self.clone() }
    }
}

/// Nodes `p_i` and weights `w_i` with `∫ f dp ≈ Σ w_i f(p_i)`.
#[derive(Clone, Debug)]
pub struct MomentumGrid {
    pub spec: MomentumGridSpec,
    pub nodes: Vec<FourMomentum>,
    pub weights: Vec<f64>,
    /// Radial nodes and the corresponding `r² dr` weights.
    pub radii: Vec<f64>,
    pub radial_weights: Vec<f64>,
    pub sphere: SphereRule,
}

impl MomentumGrid {
    pub fn new(spec: &MomentumGridSpec) -> Result<Self> {
        spec.validate()?;
        let t_max = spec.r_max.asinh();
        let mut cuts: Vec<f64> = (0..=spec.radial_panels).map(|i| t_max * i as f64 / spec.radial_panels as f64).collect();
        cuts.extend(spec.breakpoints.iter().map(|b| b.asinh()));
        cuts.sort_by(|a, b| a.total_cmp(b));
        cuts.dedup_by(|a, b| (*a - *b).abs() < 1e-14);
        let mut radii = Vec::new();
        let mut radial_weights = Vec::new();
        for w in cuts.windows(2) {
            let (ts, wts) = gauss_legendre_on(spec.radial_nodes, w[0], w[1]);
            for (t, wt) in ts.iter().zip(&wts) {
                let r = t.sinh();
                radii.push(r);
                radial_weights.push(wt * t.cosh() * r * r);
            }
        }
        let sphere = SphereRule::new(spec.sphere_theta, spec.sphere_phi);
        let mut nodes = Vec::with_capacity(radii.len() * sphere.len());
        let mut weights = Vec::with_capacity(radii.len() * sphere.len());
        for (r, wr) in radii.iter().zip(&radial_weights) {
            for (u, wu) in sphere.nodes.iter().zip(&sphere.weights) {
                nodes.push(FourMomentum::on_shell(scale(u, *r)));
                weights.push(wr * wu);
            }
        }
        Ok(Self { spec: spec.clone(), nodes, weights, radii, radial_weights, sphere })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Values of `f` at the nodes.
    pub fn sample(&self, f: impl Fn(&FourMomentum) -> f64) -> Vec<f64> {
        self.nodes.iter().map(f).collect()
    }

    /// `Σ w_i v_i` for precomputed nodal values.
    pub fn integrate_values(&self, values: &[f64]) -> Result<f64> {
        if values.len() != self.len() {
            return Err(Error::Domain("value vector does not match the grid".into()));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NotFinite(format!("integrand at node {i} ({:?})", self.nodes[i].p)));
        }
        Ok(super::sum::weighted(&self.weights, values))
    }

    /// Mean spacing of consecutive radial nodes inside `|p| ≤ r`.
    pub fn radial_spacing(&self, r: f64) -> f64 {
        let inside: Vec<f64> = self.radii.iter().copied().filter(|x| *x <= r).collect();
        if inside.len() < 2 {
            return r;
        }
        let gaps: Vec<f64> = inside.windows(2).map(|w| w[1] - w[0]).collect();
        pairwise(&gaps) / gaps.len() as f64
    }
}

/// `∫_{ℝ³} f(p) dp` on the grid.
pub fn integrate_momentum(f: impl Fn(&FourMomentum) -> f64, grid: &MomentumGrid) -> Result<f64> {
    grid.integrate_values(&grid.sample(f))
}
