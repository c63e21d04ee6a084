//! Integrals against `δ(ℓ(x))` on sections of a mass shell by a hyperplane.
//!
//! The surface is `{x ∈ ℝ³ : ℓ(x) = α + n^μx_μ = 0}` with `x⁰ = √(m²+|x|²)`.
//! From a centre `c` every direction `u` of a [`SphereRule`] defines the ray
//! `x = c + ru`; along it `h(r) = ℓ(c+ru)` is concave (`n⁰>0`), convex
//! (`n⁰<0`) or linear (`n⁰=0`), so `h'` is monotone and there are at most two
//! roots. Each root contributes `r²/|h'(r)|` times the direction weight:
//! `∫ dx δ(ℓ(x)) F(x) = ∫ du ∫ r² dr δ(h(r)) F`.

use super::sphere::SphereRule;
use crate::error::{Error, Result};
use crate::geometry::{axpy, dot, norm, scale, FourVector, Vec3};
use serde::{Deserialize, Serialize};

/// Root-finding tolerance in `r`.
const ROOT_TOL: f64 = 1e-14;
/// Below this `|h'|` a root is treated as a tangency and skipped.
const TANGENCY_TOL: f64 = 1e-12;

/// A hyperplane section `α + n^μx_μ = 0` of the mass-`m` shell.
#[derive(Clone, Copy, Debug)]
pub struct ShellSurface {
    pub mass: f64,
    pub alpha: f64,
    pub n: FourVector,
}

impl ShellSurface {
    pub fn new(mass: f64, alpha: f64, n: FourVector) -> Self {
        Self { mass, alpha, n }
    }

    #[inline]
    pub fn energy(&self, x: &Vec3) -> f64 {
        (self.mass * self.mass + dot(x, x)).sqrt()
    }

    /// `ℓ(x)`.
    #[inline]
    pub fn level(&self, x: &Vec3) -> f64 {
        self.alpha - self.n.t * self.energy(x) + dot(&self.n.x, x)
    }

    /// Spatial gradient of `ℓ`.
    pub fn gradient(&self, x: &Vec3) -> Vec3 {
        axpy(&self.n.x, -self.n.t / self.energy(x), x)
    }

    /// Spatial part of the point of the section closest to rest in the frame
    /// orthogonal to a spacelike `n`; `None` if `n` is not spacelike or the
    /// section is empty.
    pub fn vertex(&self) -> Option<Vec3> {
        let nn = self.n.square();
        if nn <= 0.0 {
            return None;
        }
        let nu = nn.sqrt();
        let z = -self.alpha / nu;
        let c = self.n.t / nu;
        // t = (e₀ + c n/ν)/√(1+c²),  x* = z n/ν + √(m²+z²) t
        let amp = (self.mass * self.mass + z * z).sqrt() / (1.0 + c * c).sqrt();
        let x = axpy(&scale(&self.n.x, z / nu), amp * c / nu, &self.n.x);
        let t0 = z * self.n.t / nu + amp * (1.0 + c * self.n.t / nu);
        (t0 > 0.0).then_some(x)
    }

    /// `base` shifted by `delta` into the convex side `{sign(n⁰)ℓ > 0}`
    /// (for `n⁰ = 0`, the side `ℓ > 0`).
    pub fn inside_point(&self, base: &Vec3, delta: f64) -> Vec3 {
        let sgn = if self.n.t < 0.0 { -1.0 } else { 1.0 };
        let grad = scale(&self.gradient(base), sgn);
        let gn = norm(&grad);
        if gn == 0.0 {
            return *base;
        }
        axpy(base, delta / gn, &grad)
    }

    /// Unit normal of the convex side at `x` (used to orient direction rules).
    pub fn inward_normal(&self, x: &Vec3) -> Vec3 {
        let sgn = if self.n.t < 0.0 { -1.0 } else { 1.0 };
        let g = scale(&self.gradient(x), sgn);
        let gn = norm(&g);
        if gn == 0.0 {
            [0.0, 0.0, 1.0]
        } else {
            scale(&g, 1.0 / gn)
        }
    }
}

/// Direction rule and cutoff for surface integrals.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SurfaceRule {
    pub n_theta: usize,
    pub n_phi: usize,
    /// Roots with `|x| > r_max` are dropped (and counted).
    pub r_max: f64,
}

impl Default for SurfaceRule {
    fn default() -> Self {
        Self { n_theta: 16, n_phi: 24, r_max: 24.0 }
    }
}

/// A quadrature node on the surface: position, energy `√(m²+|x|²)`,
/// weight (including `r²/|h'|`) and the parity of its `φ` index.
#[derive(Clone, Copy, Debug)]
pub struct SurfaceNode {
    pub x: Vec3,
    pub x0: f64,
    pub weight: f64,
    even: bool,
}

impl SurfaceNode {
    pub fn new(x: Vec3, x0: f64, weight: f64, even: bool) -> Self {
        Self { x, x0, weight, even }
    }
}

/// Value of a surface integral with diagnostics.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SurfaceQuadratureReport {
    pub value: f64,
    /// Even/odd `φ` sub-rule discrepancy plus skipped-node bumps (≥ 0).
    pub error: f64,
    /// Number of rays with 0, 1 and 2 roots.
    pub roots_per_ray: [usize; 3],
    /// Roots skipped because `|h'|` was below the tangency tolerance.
    pub tangencies: usize,
    /// Roots beyond the momentum cutoff.
    pub dropped: usize,
}

/// Surface nodes of `surface` seen from `centre` with directions oriented along `axis`.
pub struct SurfaceNodes {
    pub nodes: Vec<SurfaceNode>,
    pub roots_per_ray: [usize; 3],
    pub tangencies: usize,
    pub dropped: usize,
}

impl SurfaceRule {
    pub fn validate(&self) -> Result<()> {
        if self.n_theta == 0 || self.n_phi < 2 || self.n_phi % 2 == 1 {
            return Err(Error::Validation("surface rule needs n_theta ≥ 1 and an even n_phi ≥ 2".into()));
        }
        if !(self.r_max > 0.0) {
            return Err(Error::Validation("surface rule r_max must be positive".into()));
        }
        Ok(())
    }

    /// Finds all ray roots of the surface.
    pub fn nodes(&self, surface: &ShellSurface, centre: &Vec3, axis: &Vec3) -> SurfaceNodes {
        let rule = SphereRule::oriented(self.n_theta, self.n_phi, axis);
        let mut out = SurfaceNodes { nodes: Vec::new(), roots_per_ray: [0; 3], tangencies: 0, dropped: 0 };
        for (i, (u, wu)) in rule.nodes.iter().zip(&rule.weights).enumerate() {
            let even = rule.phi_parity(i);
            let r_end = ray_exit(centre, u, self.r_max);
            let roots = ray_roots(surface, centre, u, r_end);
            out.roots_per_ray[roots.len().min(2)] += 1;
            for r in roots {
                let x = axpy(centre, r, u);
                let x0 = surface.energy(&x);
                let dh = dot(&surface.gradient(&x), u);
                if dh.abs() < TANGENCY_TOL {
                    out.tangencies += 1;
                    continue;
                }
                out.nodes.push(SurfaceNode { x, x0, weight: wu * r * r / dh.abs(), even });
            }
            if let Some(extra) = beyond_cutoff(surface, centre, u, r_end) {
                out.dropped += extra;
            }
        }
        out
    }

    /// `∫ dx δ(ℓ(x)) F(x, x⁰)` with an error estimate.
    pub fn integrate(
        &self,
        surface: &ShellSurface,
        centre: &Vec3,
        axis: &Vec3,
        f: impl Fn(&Vec3, f64) -> f64,
    ) -> Result<SurfaceQuadratureReport> {
        let nodes = self.nodes(surface, centre, axis);
        integrate_nodes(&nodes, f)
    }
}

/// Integrates `f` against precomputed surface nodes.
pub fn integrate_nodes(nodes: &SurfaceNodes, f: impl Fn(&Vec3, f64) -> f64) -> Result<SurfaceQuadratureReport> {
    let mut all = super::sum::Accumulator::new();
    let mut even = super::sum::Accumulator::new();
    let mut odd = super::sum::Accumulator::new();
    let mut abs_mass = 0.0;
    for n in &nodes.nodes {
        let v = f(&n.x, n.x0);
        if !v.is_finite() {
            return Err(Error::NotFinite(format!("surface integrand at {:?}", n.x)));
        }
        let c = n.weight * v;
        abs_mass += c.abs();
        all.add(c);
        if n.even {
            even.add(2.0 * c);
        } else {
            odd.add(2.0 * c);
        }
    }
    let count = nodes.nodes.len().max(1) as f64;
    let bump = nodes.tangencies as f64 * abs_mass / count;
    Ok(SurfaceQuadratureReport {
        value: all.value(),
        error: 0.5 * (even.value() - odd.value()).abs() + bump,
        roots_per_ray: nodes.roots_per_ray,
        tangencies: nodes.tangencies,
        dropped: nodes.dropped,
    })
}

/// Largest `r` with `|c + ru| ≤ r_max` (0 if the centre is outside).
fn ray_exit(c: &Vec3, u: &Vec3, r_max: f64) -> f64 {
    let b = dot(c, u);
    let disc = b * b - (dot(c, c) - r_max * r_max);
    if disc <= 0.0 {
        return 0.0;
    }
    (-b + disc.sqrt()).max(0.0)
}

fn h_and_dh(s: &ShellSurface, c: &Vec3, u: &Vec3, r: f64) -> (f64, f64) {
    let x = axpy(c, r, u);
    let x0 = s.energy(&x);
    let h = s.alpha - s.n.t * x0 + dot(&s.n.x, &x);
    let dh = -s.n.t * dot(&x, u) / x0 + dot(&s.n.x, u);
    (h, dh)
}

/// Roots of `h` on `[0, r_end]`, using monotonicity of `h'`.
fn ray_roots(s: &ShellSurface, c: &Vec3, u: &Vec3, r_end: f64) -> Vec<f64> {
    let mut roots = Vec::with_capacity(2);
    if r_end <= 0.0 {
        return roots;
    }
    let (h0, d0) = h_and_dh(s, c, u, 0.0);
    let (h1, d1) = h_and_dh(s, c, u, r_end);
    let mut brackets: Vec<(f64, f64, f64, f64)> = Vec::with_capacity(2);
    if d0.signum() == d1.signum() || d0 == 0.0 || d1 == 0.0 {
        brackets.push((0.0, h0, r_end, h1));
    } else {
        // Interior extremum of h: bisect on h'.
        let (mut a, mut b) = (0.0, r_end);
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            let (_, dm) = h_and_dh(s, c, u, m);
            if dm.signum() == d0.signum() {
                a = m;
            } else {
                b = m;
            }
            if b - a <= ROOT_TOL * (1.0 + b) {
                break;
            }
        }
        let rs = 0.5 * (a + b);
        let (hs, _) = h_and_dh(s, c, u, rs);
        brackets.push((0.0, h0, rs, hs));
        brackets.push((rs, hs, r_end, h1));
    }
    for (a, ha, b, hb) in brackets {
        if ha == 0.0 {
            if a == 0.0 {
                roots.push(0.0);
            }
            continue;
        }
        if hb == 0.0 {
            roots.push(b);
            continue;
        }
        if ha.signum() != hb.signum() {
            roots.push(safeguarded_newton(s, c, u, a, ha, b));
        }
    }
    roots.dedup_by(|x, y| (*x - *y).abs() <= 1e-13 * (1.0 + x.abs()));
    roots
}

/// Newton iteration that falls back to bisection whenever a step leaves the bracket.
fn safeguarded_newton(s: &ShellSurface, c: &Vec3, u: &Vec3, mut a: f64, ha: f64, mut b: f64) -> f64 {
    let sa = ha.signum();
    let mut r = 0.5 * (a + b);
    for _ in 0..200 {
        let (h, dh) = h_and_dh(s, c, u, r);
        if h == 0.0 {
            return r;
        }
        if h.signum() == sa {
            a = r;
        } else {
            b = r;
        }
        let newton = if dh != 0.0 { r - h / dh } else { f64::NAN };
        let next = if newton.is_finite() && newton > a && newton < b { newton } else { 0.5 * (a + b) };
        let done = (next - r).abs() <= ROOT_TOL * (1.0 + r.abs()) || b - a <= ROOT_TOL * (1.0 + b);
        r = next;
        if done {
            break;
        }
    }
    r
}

/// Number of roots the ray would have just past the cutoff (diagnostic only).
fn beyond_cutoff(s: &ShellSurface, c: &Vec3, u: &Vec3, r_end: f64) -> Option<usize> {
    if r_end <= 0.0 {
        return None;
    }
    let far = 4.0 * r_end + 10.0;
    let (he, _) = h_and_dh(s, c, u, r_end);
    let (hf, _) = h_and_dh(s, c, u, far);
    (he.signum() != hf.signum()).then_some(1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn gaussian_on_a_plane() {
        // m = 1, n = (0, e_z): the plane z = 1/2.
        let s = ShellSurface::new(1.0, -0.5, FourVector::new(0.0, [0.0, 0.0, 1.0]));
        let rule = SurfaceRule { n_theta: 96, n_phi: 16, r_max: 10.0 };
        let smooth = rule
            .integrate(&s, &[0.0, 0.0, 0.0], &[0.0, 0.0, 1.0], |x, _| (-dot(x, x)).exp())
            .unwrap();
        // ∫_{ℝ²} e^{-(ρ²+1/4)} dρ = π e^{-1/4}
        assert!((smooth.value - PI * (-0.25f64).exp()).abs() < 1e-6, "{}", smooth.value);
        assert_eq!(rule.integrate(&s, &[0.0; 3], &[0.0, 0.0, 1.0], |_, _| 0.0).unwrap().value, 0.0);
    }

    #[test]
    fn ellipsoid_roots_lie_on_surface() {
        // Timelike normal: a closed surface around the centre.
        let p = [0.3, -0.2, 0.5];
        let q = [-1.0, 0.4, 0.1];
        let e = |v: &Vec3| (1.0 + dot(v, v)).sqrt();
        let tot = FourVector::new(e(&p) + e(&q), [p[0] + q[0], p[1] + q[1], p[2] + q[2]]);
        let s_inv = -tot.square();
        let surf = ShellSurface::new(1.0, 0.5 * s_inv, tot);
        let centre = scale(&tot.x, 0.5);
        let rule = SurfaceRule { n_theta: 6, n_phi: 8, r_max: 24.0 };
        let nodes = rule.nodes(&surf, &centre, &surf.inward_normal(&centre));
        assert_eq!(nodes.roots_per_ray[1], 48);
        for n in &nodes.nodes {
            assert!(surf.level(&n.x).abs() < 1e-9);
        }
    }

    #[test]
    fn vertex_is_on_spacelike_section() {
        let surf = ShellSurface::new(1.3, 0.4, FourVector::new(0.5, [1.0, -0.3, 0.8]));
        let v = surf.vertex().unwrap();
        assert!(surf.level(&v).abs() < 1e-12);
        let inside = surf.inside_point(&v, 1e-3);
        assert!(surf.level(&inside) > 0.0);
    }
}
