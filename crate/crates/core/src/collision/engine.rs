//! Angular quadrature of the reduced (`dq dω`) collision integral.
//!
//! For a pair `(p, q)` the scattering angle is measured from the unit vector
//! `k` of the centre-of-momentum frame, `cos θ = k·ω`. Writing
//! `ω = cosθ k + sinθ(cosφ e₁ + sinφ e₂)` makes the post-collision momentum
//! affine in `(cosθ, sinθcosφ, sinθsinφ)`, so each node costs a few flops.
//!
//! Singular kernels are integrated shell by shell in `ḡ = g sin(θ/2)`, with
//! Gauss–Legendre in `ln θ` inside each shell. Gain and loss are always
//! evaluated on the same node, so their difference is paired before any
//! summation.

use crate::geometry::{axpy, dot, norm, orthonormal_frame, scale, sub, FourMomentum, Vec3};
use crate::kernel::{shell_theta_range, CollisionKernel};
use crate::error::{Error, Result};
use crate::quadrature::gauss_legendre;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Angular resolution and dyadic range of the reduced collision integral.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AngularSpec {
    /// First dyadic shell; it is open above (`ḡ ≥ 2^{-k_min-1}`).
    pub k_min: i32,
    /// Last resolved shell; later shells are extrapolated geometrically.
    pub k_max: i32,
    /// Gauss nodes in `ln θ` per shell.
    pub shell_theta: usize,
    /// `φ` nodes for shells with `θ ≤ 1/4`.
    pub shell_phi_small: usize,
    /// `φ` nodes for wider shells.
    pub shell_phi: usize,
    /// Gauss nodes in `cos θ` for bounded kernels.
    pub regular_theta: usize,
    /// `φ` nodes for bounded kernels.
    pub regular_phi: usize,
}

impl Default for AngularSpec {
    fn default() -> Self {
        Self { k_min: -10, k_max: 12, shell_theta: 3, shell_phi_small: 6, shell_phi: 12, regular_theta: 8, regular_phi: 16 }
    }
}

impl AngularSpec {
    pub fn validate(&self) -> Result<()> {
        if self.k_min > self.k_max {
            return Err(Error::Validation(format!("k_min = {} > k_max = {}", self.k_min, self.k_max)));
        }
        if [self.shell_theta, self.shell_phi_small, self.shell_phi, self.regular_theta, self.regular_phi].contains(&0) {
            return Err(Error::Validation("angular node counts must be positive".into()));
        }
        Ok(())
    }

    /// Number of shell slots (one for bounded kernels).
    pub fn slots<K: CollisionKernel + ?Sized>(&self, kernel: &K) -> usize {
        if kernel.singular_exponent().is_some() {
            (self.k_max - self.k_min + 1) as usize
        } else {
            1
        }
    }
}

/// Per-pair quantities shared by all angular nodes.
#[derive(Clone, Copy, Debug)]
pub struct PairGeometry {
    pub p: FourMomentum,
    pub q: FourMomentum,
    pub g: f64,
    pub s: f64,
    pub vphi: f64,
    /// Centre-of-momentum direction with `cos θ = k·ω`.
    pub k: Vec3,
    pub e1: Vec3,
    pub e2: Vec3,
    /// `(g/2)M(v)` with `M(v) = v + (P·v)P/(√s(P⁰+√s))` for `v = k, e₁, e₂`.
    mk: Vec3,
    me1: Vec3,
    me2: Vec3,
}

impl PairGeometry {
    /// `None` when `g` is too small for a scattering direction to exist.
    pub fn new(p: &FourMomentum, q: &FourMomentum) -> Option<Self> {
        let g2 = crate::geometry::relative_momentum_sq(p, q);
        if !(g2 > 1e-24) {
            return None;
        }
        let g = g2.sqrt();
        let s = g2 + 4.0;
        let rs = s.sqrt();
        let e = p.p0 + q.p0;
        let total = [p.p[0] + q.p[0], p.p[1] + q.p[1], p.p[2] + q.p[2]];
        let a = scale(&p.p, rs + 2.0 * q.p0);
        let b = scale(&q.p, rs + 2.0 * p.p0);
        let k = scale(&sub(&a, &b), 1.0 / (g * (e + rs)));
        let kn = norm(&k);
        let k = scale(&k, 1.0 / kn);
        let (e1, e2) = orthonormal_frame(&k);
        let alpha = 1.0 / (rs * (e + rs));
        let m = |v: &Vec3| scale(&axpy(v, alpha * dot(&total, v), &total), 0.5 * g);
        Some(Self {
            p: *p,
            q: *q,
            g,
            s,
            vphi: g * rs / (p.p0 * q.p0),
            k,
            e1,
            e2,
            mk: m(&k),
            me1: m(&e1),
            me2: m(&e2),
        })
    }

    /// Post-collision pair for the direction with angle `θ` from `k` and azimuth `φ`,
    /// given `1 − cos θ`, `sin θ`, `cos φ`, `sin φ`.
    #[inline]
    pub fn post(&self, one_minus_cos: f64, sin: f64, cphi: f64, sphi: f64) -> (FourMomentum, FourMomentum) {
        let (a, b, c) = (-one_minus_cos, sin * cphi, sin * sphi);
        let d = [
            a * self.mk[0] + b * self.me1[0] + c * self.me2[0],
            a * self.mk[1] + b * self.me1[1] + c * self.me2[1],
            a * self.mk[2] + b * self.me1[2] + c * self.me2[2],
        ];
        let pp = FourMomentum::on_shell([self.p.p[0] + d[0], self.p.p[1] + d[1], self.p.p[2] + d[2]]);
        let qp = FourMomentum::on_shell([self.q.p[0] - d[0], self.q.p[1] - d[1], self.q.p[2] - d[2]]);
        (pp, qp)
    }

    /// Unit direction `ω` for given angles.
    pub fn omega(&self, cos: f64, sin: f64, cphi: f64, sphi: f64) -> Vec3 {
        let mut w = [0.0; 3];
        for i in 0..3 {
            w[i] = cos * self.k[i] + sin * (cphi * self.e1[i] + sphi * self.e2[i]);
        }
        w
    }
}

/// Precomputed reference rules for [`CollisionRule::for_each_node`].
#[derive(Clone, Debug)]
pub struct CollisionRule<'a, K: ?Sized> {
    pub kernel: &'a K,
    pub spec: AngularSpec,
    shell_x: Vec<f64>,
    shell_w: Vec<f64>,
    phi_small: Vec<(f64, f64)>,
    phi_wide: Vec<(f64, f64)>,
    reg_x: Vec<f64>,
    reg_w: Vec<f64>,
    phi_reg: Vec<(f64, f64)>,
    singular: bool,
}

fn phi_table(n: usize) -> Vec<(f64, f64)> {
    (0..n).map(|j| ((j as f64 + 0.5) * 2.0 * PI / n as f64).sin_cos()).map(|(s, c)| (c, s)).collect()
}

impl<'a, K: CollisionKernel + ?Sized> CollisionRule<'a, K> {
    pub fn new(kernel: &'a K, spec: &AngularSpec) -> Result<Self> {
        spec.validate()?;
        let (shell_x, shell_w) = gauss_legendre(spec.shell_theta);
        let (reg_x, reg_w) = gauss_legendre(spec.regular_theta);
        Ok(Self {
            kernel,
            spec: spec.clone(),
            shell_x,
            shell_w,
            phi_small: phi_table(spec.shell_phi_small),
            phi_wide: phi_table(spec.shell_phi),
            reg_x,
            reg_w,
            phi_reg: phi_table(spec.regular_phi),
            singular: kernel.singular_exponent().is_some(),
        })
    }

    /// Number of accumulator slots (dyadic shells, or one for a bounded kernel).
    pub fn slots(&self) -> usize {
        self.spec.slots(self.kernel)
    }

    /// Dyadic index of slot `i`.
    pub fn slot_k(&self, i: usize) -> i32 {
        self.spec.k_min + i as i32
    }

    /// Calls `visit(slot, weight, p', q')` for every angular node of the pair.
    /// The weight includes `v_φ σ dω`.
    pub fn for_each_node(&self, pair: &PairGeometry, mut visit: impl FnMut(usize, f64, &FourMomentum, &FourMomentum)) {
        let base = pair.vphi * self.kernel.phi(pair.g, pair.s);
        if !(base.is_finite() && base > 0.0) {
            return;
        }
        if self.singular {
            for (slot, k) in (self.spec.k_min..=self.spec.k_max).enumerate() {
                let Some((ta, tb)) = shell_theta_range(pair.g, k, self.kernel.theta_max()) else { continue };
                let (la, lb) = (ta.ln(), tb.ln());
                let (h, c) = (0.5 * (lb - la), 0.5 * (lb + la));
                let phis = if tb <= 0.25 { &self.phi_small } else { &self.phi_wide };
                let dphi = 2.0 * PI / phis.len() as f64;
                for (x, w) in self.shell_x.iter().zip(&self.shell_w) {
                    let theta = (c + h * x).exp();
                    let weight = base * self.kernel.angular_density(theta) * theta * h * w * dphi;
                    let half = 0.5 * theta;
                    let omc = 2.0 * half.sin().powi(2);
                    let sin = theta.sin();
                    for &(cp, sp) in phis {
                        let (pp, qp) = pair.post(omc, sin, cp, sp);
                        visit(slot, weight, &pp, &qp);
                    }
                }
            }
        } else {
            let cmin = self.kernel.theta_max().cos();
            let (h, c) = (0.5 * (1.0 - cmin), 0.5 * (1.0 + cmin));
            let dphi = 2.0 * PI / self.phi_reg.len() as f64;
            for (x, w) in self.reg_x.iter().zip(&self.reg_w) {
                let cos = c + h * x;
                let sin = (1.0 - cos * cos).max(0.0).sqrt();
                let weight = pair.vphi * self.kernel.sigma(pair.g, pair.s, cos) * h * w * dphi;
                let omc = sin * sin / (1.0 + cos);
                for &(cp, sp) in &self.phi_reg {
                    let (pp, qp) = pair.post(omc, sin, cp, sp);
                    visit(0, weight, &pp, &qp);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{com_direction, post_collision, FourMomentum};
    use crate::kernel::{KernelSpec, PowerLawKernel, RegularKernel};

    #[test]
    fn pair_geometry_reproduces_post_collision_map() {
        let p = FourMomentum::on_shell([0.4, -1.1, 0.3]);
        let q = FourMomentum::on_shell([-0.7, 0.2, 1.5]);
        let pair = PairGeometry::new(&p, &q).unwrap();
        let k = com_direction(&p, &q).unwrap();
        for i in 0..3 {
            assert!((pair.k[i] - k[i]).abs() < 1e-12);
        }
        let (theta, phi): (f64, f64) = (0.9, 2.1);
        let (pp, qp) = pair.post(1.0 - theta.cos(), theta.sin(), phi.cos(), phi.sin());
        let w = pair.omega(theta.cos(), theta.sin(), phi.cos(), phi.sin());
        let (pe, qe) = post_collision(&p, &q, &w).unwrap();
        for i in 0..3 {
            assert!((pp.p[i] - pe.p[i]).abs() < 1e-12);
            assert!((qp.p[i] - qe.p[i]).abs() < 1e-12);
        }
        let (p0, _) = pair.post(0.0, 0.0, 1.0, 0.0);
        assert!((p0.p[0] - p.p[0]).abs() < 1e-15);
    }

    #[test]
    fn shell_weights_sum_to_solid_integral() {
        let kern = PowerLawKernel::new(KernelSpec::default()).unwrap();
        let rule = CollisionRule::new(&kern, &AngularSpec::default()).unwrap();
        let p = FourMomentum::on_shell([0.4, 0.0, 0.3]);
        let q = FourMomentum::on_shell([-0.7, 0.2, 0.5]);
        let pair = PairGeometry::new(&p, &q).unwrap();
        let mut per = vec![0.0; rule.slots()];
        rule.for_each_node(&pair, |s, w, _, _| per[s] += w);
        for (i, v) in per.iter().enumerate() {
            let exact = pair.vphi * crate::kernel::shell_solid_integral(&kern, pair.g, rule.slot_k(i));
            assert!((v - exact).abs() <= 1e-6 * exact.abs().max(1e-300), "slot {i}: {v} vs {exact}");
        }
    }

    #[test]
    fn regular_rule_integrates_sigma() {
        let rule = CollisionRule::new(&RegularKernel, &AngularSpec::default()).unwrap();
        let p = FourMomentum::on_shell([1.0, 0.0, 0.0]);
        let q = FourMomentum::on_shell([0.0, 0.5, 0.0]);
        let pair = PairGeometry::new(&p, &q).unwrap();
        let mut total = 0.0;
        rule.for_each_node(&pair, |_, w, _, _| total += w);
        // ∫ g³ sin⁴θ dω = g³ · 2π · 16/15
        let exact = pair.vphi * pair.g.powi(3) * 2.0 * PI * 16.0 / 15.0;
        assert!((total - exact).abs() < 1e-10 * exact);
    }
}
