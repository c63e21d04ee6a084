//! Lorentz-invariant quadrature on hyperplane sections of a mass shell.
//!
//! The measure `dx δ(ℓ(x))/x⁰` with `ℓ = α + n^μx_μ` is invariant, so the
//! section can be integrated in the frame where it is simplest:
//! - spacelike `n`: boost until `n⁰ = 0`; the section is the plane
//!   `n̂·y = −α/|n|`, parametrised by polar coordinates around a chosen point;
//! - timelike `n`: boost to the rest frame of `n`; the section is a sphere.
//!
//! Node weights integrate `F` against `dx δ(ℓ(x))` in the original frame.

use super::gauss::{gauss_legendre, gauss_legendre_on};
use super::sphere::SphereRule;
use super::surface::{ShellSurface, SurfaceNode};
use crate::error::{Error, Result};
use crate::geometry::{axpy, dot, norm, orthonormal_frame, scale, Boost, FourVector, Vec3};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Resolution of the section parametrisation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SectionRule {
    /// Gauss nodes per radial panel (plane) or in `cos θ` (sphere).
    pub n_radial: usize,
    /// Radial panels in `t = asinh(ρ/ρ_s)`.
    pub radial_panels: usize,
    /// Trapezoid nodes in the azimuth.
    pub n_phi: usize,
    /// Radial scale `ρ_s` of the plane map.
    pub radial_scale: f64,
    /// Nodes whose original-frame momentum exceeds this are dropped.
    pub r_max: f64,
}

impl Default for SectionRule {
    fn default() -> Self {
        Self { n_radial: 16, radial_panels: 2, n_phi: 16, radial_scale: 1.0, r_max: 24.0 }
    }
}

/// A section in its simple frame.
pub enum SectionFrame {
    /// Plane `{y : m̂·y = z}` with frame `(m̂, e₁, e₂)`; `nu = |n|`.
    Plane { boost_back: Boost, normal: Vec3, e1: Vec3, e2: Vec3, z: f64, nu: f64, mass: f64 },
    /// Sphere of radius `radius` with `y⁰ = energy`; `nu = √(−n·n)`.
    Sphere { boost_back: Boost, radius: f64, energy: f64, nu: f64 },
}

impl SectionRule {
    pub fn validate(&self) -> Result<()> {
        if self.n_radial == 0 || self.radial_panels == 0 || self.n_phi < 2 || self.n_phi % 2 == 1 {
            return Err(Error::Validation("section rule needs positive node counts and an even n_phi".into()));
        }
        if !(self.radial_scale > 0.0 && self.r_max > 0.0) {
            return Err(Error::Validation("section rule scales must be positive".into()));
        }
        Ok(())
    }

    /// Frame in which the section is a plane or a sphere; `None` for an empty
    /// or degenerate section.
    pub fn frame(surface: &ShellSurface) -> Option<SectionFrame> {
        let n = surface.n;
        let nn = n.square();
        let m = surface.mass;
        if nn > 0.0 {
            let nx = norm(&n.x);
            let beta = scale(&n.x, n.t / (nx * nx));
            let to = Boost::with_velocity(beta).ok()?;
            let back = Boost::with_velocity(scale(&beta, -1.0)).ok()?;
            let nb = to.apply(&n);
            let nu = norm(&nb.x);
            let normal = scale(&nb.x, 1.0 / nu);
            let (e1, e2) = orthonormal_frame(&normal);
            // α + ν m̂·y = 0
            let z = -surface.alpha / nu;
            Some(SectionFrame::Plane { boost_back: back, normal, e1, e2, z, nu, mass: m })
        } else if nn < 0.0 {
            let nu = (-nn).sqrt();
            let beta = scale(&n.x, 1.0 / n.t);
            let to = Boost::with_velocity(beta).ok()?;
            let back = Boost::with_velocity(scale(&beta, -1.0)).ok()?;
            let nb = to.apply(&n);
            // α − n'⁰ y⁰ = 0 with n'⁰ = ±ν
            let energy = surface.alpha / nb.t;
            if !(energy >= m) {
                return None;
            }
            let radius = (energy * energy - m * m).sqrt();
            let _ = back;
            Some(SectionFrame::Sphere { boost_back: back, radius, energy, nu })
        } else {
            None
        }
    }

    /// Nodes for `∫ dx δ(ℓ) F`; for planes the polar coordinates are centred
    /// on the image of `origin` (a point of the section) when given, else on
    /// the foot point of the plane.
    pub fn nodes(&self, surface: &ShellSurface, origin: Option<&Vec3>) -> Vec<SurfaceNode> {
        match Self::frame(surface) {
            None => Vec::new(),
            Some(SectionFrame::Sphere { boost_back, radius, energy, nu }) => {
                let rule = SphereRule::new(self.n_radial, self.n_phi);
                let mut out = Vec::with_capacity(rule.len());
                for (i, (u, w)) in rule.nodes.iter().zip(&rule.weights).enumerate() {
                    let y = FourVector::new(energy, scale(u, radius));
                    let x = boost_back.apply(&y);
                    if norm(&x.x) > self.r_max {
                        continue;
                    }
                    out.push(SurfaceNode::new(x.x, x.t, x.t * radius / nu * w, rule.phi_parity(i)));
                }
                out
            }
            Some(SectionFrame::Plane { boost_back, normal, e1, e2, z, nu, mass }) => {
                let to = boost_back.inverse();
                let centre = match origin {
                    Some(o) => {
                        let e = (mass * mass + dot(o, o)).sqrt();
                        let y = to.apply(&FourVector::new(e, *o)).x;
                        // project onto the plane to absorb rounding
                        axpy(&y, z - dot(&normal, &y), &normal)
                    }
                    None => scale(&normal, z),
                };
                let rho_max = 2.0 * boost_back.gamma() * (self.r_max + mass) + norm(&centre);
                self.plane_nodes(&boost_back, &centre, &e1, &e2, nu, mass, 0.0, rho_max, false)
            }
        }
    }

    /// Plane nodes on the annulus `ρ ∈ [rho_a, rho_b]` around `origin`, with
    /// Gauss–Legendre in `ln ρ` (for integrands concentrated at the origin).
    pub fn annulus_nodes(&self, surface: &ShellSurface, origin: &Vec3, rho_a: f64, rho_b: f64) -> Vec<SurfaceNode> {
        let Some(SectionFrame::Plane { boost_back, normal, e1, e2, z, nu, mass }) = Self::frame(surface) else {
            return Vec::new();
        };
        let to = boost_back.inverse();
        let e = (mass * mass + dot(origin, origin)).sqrt();
        let y = to.apply(&FourVector::new(e, *origin)).x;
        let centre = axpy(&y, z - dot(&normal, &y), &normal);
        self.plane_nodes(&boost_back, &centre, &e1, &e2, nu, mass, rho_a, rho_b, true)
    }

    /// Image of the boosted-plane polar parametrisation around `centre`.
    #[allow(clippy::too_many_arguments)]
    fn plane_nodes(
        &self,
        back: &Boost,
        centre: &Vec3,
        e1: &Vec3,
        e2: &Vec3,
        nu: f64,
        mass: f64,
        rho_a: f64,
        rho_b: f64,
        logarithmic: bool,
    ) -> Vec<SurfaceNode> {
        let mut radial: Vec<(f64, f64)> = Vec::new(); // (ρ, ρ dρ weight)
        if logarithmic {
            let (la, lb) = (rho_a.ln(), rho_b.ln());
            for i in 0..self.radial_panels {
                let a = la + (lb - la) * i as f64 / self.radial_panels as f64;
                let b = la + (lb - la) * (i + 1) as f64 / self.radial_panels as f64;
                let (us, ws) = gauss_legendre_on(self.n_radial, a, b);
                radial.extend(us.iter().zip(&ws).map(|(u, w)| {
                    let r = u.exp();
                    (r, w * r * r)
                }));
            }
        } else {
            let s = self.radial_scale;
            let (ta, tb) = ((rho_a / s).asinh(), (rho_b / s).asinh());
            let (x, wx) = gauss_legendre(self.n_radial);
            for i in 0..self.radial_panels {
                let a = ta + (tb - ta) * i as f64 / self.radial_panels as f64;
                let b = ta + (tb - ta) * (i + 1) as f64 / self.radial_panels as f64;
                let (h, c) = (0.5 * (b - a), 0.5 * (b + a));
                for (t, w) in x.iter().zip(&wx) {
                    let t = c + h * t;
                    let r = s * t.sinh();
                    radial.push((r, h * w * s * t.cosh() * r));
                }
            }
        }
        let dphi = 2.0 * PI / self.n_phi as f64;
        let mut out = Vec::with_capacity(radial.len() * self.n_phi);
        for (rho, wr) in radial {
            for j in 0..self.n_phi {
                let (sp, cp) = ((j as f64 + 0.5) * dphi).sin_cos();
                let mut y = *centre;
                for i in 0..3 {
                    y[i] += rho * (cp * e1[i] + sp * e2[i]);
                }
                let y0 = (mass * mass + dot(&y, &y)).sqrt();
                let x = back.apply(&FourVector::new(y0, y));
                if norm(&x.x) > self.r_max {
                    continue;
                }
                out.push(SurfaceNode::new(x.x, x.t, x.t / (nu * y0) * wr * dphi, j % 2 == 0));
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::surface::{SurfaceNodes, integrate_nodes};

    fn wrap(nodes: Vec<SurfaceNode>) -> SurfaceNodes {
        SurfaceNodes { nodes, roots_per_ray: [0; 3], tangencies: 0, dropped: 0 }
    }

    #[test]
    fn plane_section_at_rest_is_a_plane() {
        // n = (0, e_z), α = −1/2: the plane z = 1/2, ∫ e^{-|x|²} = π e^{-1/4}.
        let s = ShellSurface::new(1.0, -0.5, FourVector::new(0.0, [0.0, 0.0, 1.0]));
        let rule = SectionRule { n_radial: 24, ..Default::default() };
        let nodes = rule.nodes(&s, None);
        let v = integrate_nodes(&wrap(nodes), |x, _| (-dot(x, x)).exp()).unwrap();
        assert!((v.value - PI * (-0.25f64).exp()).abs() < 1e-9, "{}", v.value);
    }

    #[test]
    fn boosted_sections_satisfy_constraint_and_agree_with_rays() {
        let s = ShellSurface::new(1.0, 0.7, FourVector::new(0.6, [1.1, -0.4, 0.3]));
        let rule = SectionRule { n_radial: 24, n_phi: 24, ..Default::default() };
        let nodes = rule.nodes(&s, None);
        assert!(!nodes.is_empty());
        for n in &nodes {
            assert!(s.level(&n.x).abs() < 1e-9 * (1.0 + n.x0));
        }
        let f = |x: &Vec3, x0: f64| (-x0).exp() * (1.0 + x[0]);
        let a = integrate_nodes(&wrap(nodes), f).unwrap().value;
        let centre = s.inside_point(&s.vertex().unwrap(), 0.1);
        let rays = crate::quadrature::SurfaceRule { n_theta: 400, n_phi: 64, r_max: 24.0 };
        let b = rays.integrate(&s, &centre, &s.inward_normal(&centre), f).unwrap().value;
        assert!((a - b).abs() < 1e-4 * a.abs(), "{a} vs {b}");
    }

    #[test]
    fn sphere_section_area() {
        // Timelike n = (1, 0): ℓ = α − y⁰ = 0 gives |y| = √(α²−1); ∫ dy δ(ℓ) = 4π R y⁰.
        let s = ShellSurface::new(1.0, 2.0, FourVector::new(1.0, [0.0; 3]));
        let rule = SectionRule::default();
        let nodes = rule.nodes(&s, None);
        let v = integrate_nodes(&wrap(nodes), |_, _| 1.0).unwrap().value;
        assert!((v - 4.0 * PI * 3f64.sqrt() * 2.0).abs() < 1e-10, "{v}");
    }
}
