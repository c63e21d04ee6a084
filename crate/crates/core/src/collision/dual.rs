//! Dual (Carleman-type) representations of the collision integral, each a
//! surface integral against a delta function, and the coercive kernel.
//!
//! All forms evaluate the same gain-type functional
//! `I[A] = ∫dp∫dq∫dω v_φσ A(p,q,p',q')`. With `sσ` and the normalising
//! constants exactly as written in the source formulas, the raw values are
//! fixed fractions of `I[A]`: `1/4` for the `E^p` (Carleman), `E^{p'}` and
//! `E^q` forms and `1/2` for the `q_s`-form. The module applies the inverse
//! factors and reports both raw and calibrated values.

use super::engine::AngularSpec;
use super::operators::Collision;
use crate::error::{Error, Result};
use crate::geometry::{dot, norm, FourMomentum, FourVector, Vec3};
use crate::kernel::{CollisionKernel};
use crate::quadrature::surface::{integrate_nodes, SurfaceNodes};
use crate::quadrature::SectionRule;
use crate::quadrature::sum::Accumulator;
use crate::quadrature::{MomentumGrid, ShellSurface, SurfaceQuadratureReport};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Exponential rate `C` of the factor `e^{−Cq'⁰}` in the coercive kernel.
pub const COERCIVE_EXPONENT: f64 = 0.25;

/// Inverse of the raw-to-reference ratio of the `E^p` (Carleman) form.
pub const CARLEMAN_FACTOR: f64 = 4.0;
/// Inverse ratio of the `E^{p'}` form.
pub const E_PPRIME_FACTOR: f64 = 4.0;
/// Inverse ratio of the `E^q` form.
pub const E_Q_FACTOR: f64 = 4.0;
/// Inverse ratio of the `q_s` form.
pub const ALTERNATIVE_FACTOR: f64 = 2.0;

/// `A(p, q, p', q')`.
pub type TrilinearIntegrand = Box<dyn Fn(&FourMomentum, &FourMomentum, &FourMomentum, &FourMomentum) -> f64 + Send + Sync>;

/// Raw values of one integrand in every representation.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RepresentationValues {
    pub eight_fold: f64,
    pub carleman_raw: f64,
    pub e_pprime_raw: f64,
    pub e_q_raw: f64,
    pub alternative_raw: f64,
}

impl RepresentationValues {
    pub fn carleman(&self) -> f64 {
        CARLEMAN_FACTOR * self.carleman_raw
    }
    pub fn e_pprime(&self) -> f64 {
        E_PPRIME_FACTOR * self.e_pprime_raw
    }
    pub fn e_q(&self) -> f64 {
        E_Q_FACTOR * self.e_q_raw
    }
    pub fn alternative(&self) -> f64 {
        ALTERNATIVE_FACTOR * self.alternative_raw
    }

    /// Calibrated values in a fixed order: 8-fold, Carleman, `E^{p'}`, `E^q`, alternative.
    pub fn calibrated(&self) -> [f64; 5] {
        [self.eight_fold, self.carleman(), self.e_pprime(), self.e_q(), self.alternative()]
    }

    /// Largest pairwise relative disagreement of the calibrated values.
    pub fn max_pairwise_relative(&self) -> f64 {
        let v = self.calibrated();
        let mut worst: f64 = 0.0;
        for i in 0..v.len() {
            for j in i + 1..v.len() {
                let scale = v[i].abs().max(v[j].abs()).max(1e-300);
                worst = worst.max((v[i] - v[j]).abs() / scale);
            }
        }
        worst
    }
}

/// `(p − q)^μ(p' − q')_μ / g²`, clamped.
fn cos_theta(p: &FourMomentum, q: &FourMomentum, pp: &FourMomentum, qp: &FourMomentum, g2: f64) -> f64 {
    let a = FourVector::new(p.p0 - q.p0, [p.p[0] - q.p[0], p.p[1] - q.p[1], p.p[2] - q.p[2]]);
    let b = FourVector::new(pp.p0 - qp.p0, [pp.p[0] - qp.p[0], pp.p[1] - qp.p[1], pp.p[2] - qp.p[2]]);
    (a.minkowski(&b) / g2).clamp(-1.0, 1.0)
}

fn minus(a: &FourMomentum, b: &FourMomentum) -> FourVector {
    FourVector::new(a.p0 - b.p0, [a.p[0] - b.p[0], a.p[1] - b.p[1], a.p[2] - b.p[2]])
}


/// `E^p_{q−p'}`: `g̃² + 2p^μ(q−p')_μ = 0`, variable `p`.
pub fn setup_e_p(pprime: &FourMomentum, q: &FourMomentum) -> Option<ShellSurface> {
    let w = minus(q, pprime);
    let gt2 = w.square();
    if !(gt2 > 1e-20) {
        return None;
    }
    Some(ShellSurface::new(1.0, gt2, w * 2.0))
}

/// `E^{p'}_{p+q}`: `s/2 + p'^μ(p+q)_μ = 0`, variable `p'` (a closed surface).
pub fn setup_e_pprime(p: &FourMomentum, q: &FourMomentum) -> ShellSurface {
    let total = p.vector() + q.vector();
    let s = -total.square();
    ShellSurface::new(1.0, 0.5 * s, total)
}

/// `E^q_{p'−p}`: `ḡ² + 2q^μ(p−p')_μ = 0`, variable `q`.
pub fn setup_e_q(p: &FourMomentum, pprime: &FourMomentum) -> Option<ShellSurface> {
    let d = minus(p, pprime);
    let gb2 = d.square();
    if !(gb2 > 1e-20) {
        return None;
    }
    Some(ShellSurface::new(1.0, gb2, d * 2.0))
}

/// `q_s^μ(p'−p)_μ = 0` on the shell of mass `√s̄`, `s̄ = 4 + ḡ²`, variable `q_s = q + q'`.
pub fn setup_q_s(p: &FourMomentum, pprime: &FourMomentum) -> Option<ShellSurface> {
    let qg = minus(pprime, p);
    let gb2 = qg.square();
    if !(gb2 > 1e-20) {
        return None;
    }
    Some(ShellSurface::new((4.0 + gb2).sqrt(), 0.0, qg))
}

/// Evaluator of the dual representations on a pair of outer grids.
///
/// When all integrands are rotation invariant the first outer variable can
/// use a radial-only grid (a one-node sphere rule of weight `4π`).
pub struct DualEvaluator<'a, K: ?Sized> {
    pub kernel: &'a K,
    /// Grid of the first outer variable.
    pub outer_a: &'a MomentumGrid,
    /// Grid of the second outer variable.
    pub outer_b: &'a MomentumGrid,
    pub section: SectionRule,
}

impl<'a, K: CollisionKernel + ?Sized> DualEvaluator<'a, K> {
    pub fn new(kernel: &'a K, outer_a: &'a MomentumGrid, outer_b: &'a MomentumGrid, section: SectionRule) -> Result<Self> {
        section.validate()?;
        Ok(Self { kernel, outer_a, outer_b, section })
    }

    /// `sσ` for the collision `(p,q) → (p',q')`.
    fn s_sigma(&self, p: &FourMomentum, q: &FourMomentum, pp: &FourMomentum, qp: &FourMomentum) -> f64 {
        let g2 = crate::geometry::relative_momentum_sq(p, q);
        if !(g2 > 1e-24) {
            return 0.0;
        }
        let s = g2 + 4.0;
        let c = cos_theta(p, q, pp, qp, g2);
        s * self.kernel.sigma(g2.sqrt(), s, c)
    }

    /// Generic batched surface form: for every outer pair `(a, b)` the surface
    /// from `setup`, nodes mapped by `map` to a collision quadruple and a
    /// measure factor.
    fn surface_form(
        &self,
        rule: &SectionRule,
        integrands: &[TrilinearIntegrand],
        setup: impl Fn(&FourMomentum, &FourMomentum) -> Option<ShellSurface> + Sync,
        map: impl Fn(&FourMomentum, &FourMomentum, &Vec3, f64) -> Option<([FourMomentum; 4], f64)> + Sync,
    ) -> Vec<f64> {
        let n = integrands.len();
        let parts: Vec<Vec<Accumulator>> = self
            .outer_a
            .nodes
            .par_iter()
            .zip(self.outer_a.weights.par_iter())
            .map(|(a, wa)| {
                let mut acc = vec![Accumulator::new(); n];
                for (b, wb) in self.outer_b.nodes.iter().zip(&self.outer_b.weights) {
                    let Some(st) = setup(a, b) else { continue };
                    for node in &rule.nodes(&st, None) {
                        let Some(([p, q, pp, qp], factor)) = map(a, b, &node.x, node.x0) else { continue };
                        let w = wa * wb * node.weight * factor * self.s_sigma(&p, &q, &pp, &qp);
                        if w == 0.0 {
                            continue;
                        }
                        for (i, f) in integrands.iter().enumerate() {
                            acc[i].add(w * f(&p, &q, &pp, &qp));
                        }
                    }
                }
                acc
            })
            .collect();
        (0..n)
            .map(|i| {
                let mut t = Accumulator::new();
                parts.iter().for_each(|p| t.merge(&p[i]));
                t.value()
            })
            .collect()
    }

    /// Carleman form `½∫(dp'/p'⁰)∫(dq/q⁰)∫_{E^p}(dπ_p/p⁰)(sσ/g̃)A`, raw;
    /// outer variables `(p', q)`.
    pub fn carleman_raw(&self, integrands: &[TrilinearIntegrand]) -> Vec<f64> {
        self.surface_form(
            &self.section,
            integrands,
            |pp, q| setup_e_p(pp, q),
            |pp, q, x, x0| {
                let p = FourMomentum { p0: x0, p: *x };
                let qp = post_partner(&p, q, pp)?;
                let gt = minus(q, pp).square().sqrt();
                // ½ · 2g̃ (delta scaling) / g̃ / (p⁰ p'⁰ q⁰)
                Some(([p, *q, *pp, qp], 0.5 * 2.0 * gt / gt / (x0 * pp.p0 * q.p0)))
            },
        )
    }

    /// `∫(dp/p⁰)∫(dq/q⁰)∫_{E^{p'}}(dπ_{p'}/(2√s p'⁰)) sσA`, raw; outer `(p, q)`.
    pub fn e_pprime_raw(&self, integrands: &[TrilinearIntegrand]) -> Vec<f64> {
        self.surface_form(
            &self.section,
            integrands,
            |p, q| {
                let g2 = crate::geometry::relative_momentum_sq(p, q);
                (g2 > 1e-24).then(|| setup_e_pprime(p, q))
            },
            |p, q, x, x0| {
                let pp = FourMomentum { p0: x0, p: *x };
                let qp = post_partner(p, q, &pp)?;
                // dπ_{p'} = √s δ(ℓ) dp', measure 1/(2√s p'⁰) and outer 1/(p⁰q⁰)
                Some(([*p, *q, pp, qp], 0.5 / (x0 * p.p0 * q.p0)))
            },
        )
    }

    /// `∫(dp/p⁰)∫(dp'/p'⁰)∫_{E^q}(dπ_q/(2ḡq⁰)) sσA`, raw; outer `(p, p')`.
    pub fn e_q_raw(&self, integrands: &[TrilinearIntegrand]) -> Vec<f64> {
        self.surface_form(
            &self.section,
            integrands,
            |p, pp| setup_e_q(p, pp),
            |p, pp, x, x0| {
                let q = FourMomentum { p0: x0, p: *x };
                let qp = post_partner(p, &q, pp)?;
                // dπ_q = 2ḡ δ(ℓ) dq, measure 1/(2ḡ q⁰)
                Some(([*p, q, *pp, qp], 1.0 / (x0 * p.p0 * pp.p0)))
            },
        )
    }

    /// `∫(dp/p⁰)∫(dp'/p'⁰)∫ dq_s/(2q_s⁰) δ(q_s^μ(p'−p)_μ) sσA`, raw; outer `(p, p')`.
    pub fn alternative_raw(&self, integrands: &[TrilinearIntegrand]) -> Vec<f64> {
        self.surface_form(
            &q_s_rule(&self.section),
            integrands,
            |p, pp| setup_q_s(p, pp),
            |p, pp, x, x0| {
                let (q, qp) = split_q_s(p, pp, x, x0)?;
                Some(([*p, q, *pp, qp], 0.5 / (x0 * p.p0 * pp.p0)))
            },
        )
    }

    /// Reference 8-fold value `∫dp∫dq∫dω v_φσA` on `(outer_a, outer_b)`.
    pub fn eight_fold(&self, integrands: &[TrilinearIntegrand], angular: &AngularSpec) -> Result<Vec<f64>> {
        let coll = Collision::new(self.kernel, self.outer_b, angular)?;
        let n = integrands.len();
        let parts: Vec<Vec<f64>> = self
            .outer_a
            .nodes
            .par_iter()
            .zip(self.outer_a.weights.par_iter())
            .map(|(p, wp)| {
                let mut acc = vec![Accumulator::new(); n];
                for (q, wq) in self.outer_b.nodes.iter().zip(&self.outer_b.weights) {
                    let Some(pair) = super::engine::PairGeometry::new(p, q) else { continue };
                    coll.rule.for_each_node(&pair, |_, w, pp, qp| {
                        let ww = wp * wq * w;
                        for (i, f) in integrands.iter().enumerate() {
                            acc[i].add(ww * f(p, q, pp, qp));
                        }
                    });
                }
                acc.iter().map(Accumulator::value).collect()
            })
            .collect();
        Ok((0..n)
            .map(|i| {
                let mut t = Accumulator::new();
                parts.iter().for_each(|p| t.add(p[i]));
                t.value()
            })
            .collect())
    }

    /// All representations of every integrand.
    pub fn all(&self, integrands: &[TrilinearIntegrand], angular: &AngularSpec) -> Result<Vec<RepresentationValues>> {
        let e8 = self.eight_fold(integrands, angular)?;
        let c = self.carleman_raw(integrands);
        let e = self.e_pprime_raw(integrands);
        let e2 = self.e_q_raw(integrands);
        let alt = self.alternative_raw(integrands);
        for v in e8.iter().chain(&c).chain(&e).chain(&e2).chain(&alt) {
            if !v.is_finite() {
                return Err(Error::NotFinite("representation value".into()));
            }
        }
        Ok((0..integrands.len())
            .map(|i| RepresentationValues {
                eight_fold: e8[i],
                carleman_raw: c[i],
                e_pprime_raw: e[i],
                e_q_raw: e2[i],
                alternative_raw: alt[i],
            })
            .collect())
    }
}

/// The `q_s` section with its cutoff doubled: `|q_s| = |q + q'|` reaches twice
/// the momentum range of `q` and `q'`, and cutting at the grid range would
/// truncate the integrand where it is not yet negligible.
fn q_s_rule(rule: &SectionRule) -> SectionRule {
    SectionRule { r_max: 2.0 * rule.r_max, ..rule.clone() }
}

/// `q' = p + q − p'` as an on-shell momentum; `None` if its energy is not positive
/// (the step function of the surface measures).
fn post_partner(p: &FourMomentum, q: &FourMomentum, pp: &FourMomentum) -> Option<FourMomentum> {
    let e = p.p0 + q.p0 - pp.p0;
    if e <= 0.0 {
        return None;
    }
    Some(FourMomentum::on_shell([p.p[0] + q.p[0] - pp.p[0], p.p[1] + q.p[1] - pp.p[1], p.p[2] + q.p[2] - pp.p[2]]))
}

/// `q = (q_s + q_g)/2`, `q' = (q_s − q_g)/2` with `q_g = p' − p`.
fn split_q_s(p: &FourMomentum, pp: &FourMomentum, x: &Vec3, x0: f64) -> Option<(FourMomentum, FourMomentum)> {
    let qg = minus(pp, p);
    let q0 = 0.5 * (x0 + qg.t);
    let qp0 = 0.5 * (x0 - qg.t);
    if q0 <= 0.0 || qp0 <= 0.0 {
        return None;
    }
    let q = FourMomentum::on_shell([0.5 * (x[0] + qg.x[0]), 0.5 * (x[1] + qg.x[1]), 0.5 * (x[2] + qg.x[2])]);
    let qp = FourMomentum::on_shell([0.5 * (x[0] - qg.x[0]), 0.5 * (x[1] - qg.x[1]), 0.5 * (x[2] - qg.x[2])]);
    Some((q, qp))
}

/// `∫_{E^p_{q−p'}} (dπ_p/p⁰) F(p)` with `dπ_p = dp u(q'⁰) δ((g̃²+2p^μ(q−p')_μ)/(2g̃))`.
pub fn integrate_e_p(
    pprime: &FourMomentum,
    q: &FourMomentum,
    f: impl Fn(&FourMomentum) -> f64,
    rule: &SectionRule,
) -> Result<SurfaceQuadratureReport> {
    let st = setup_e_p(pprime, q).ok_or_else(|| Error::Degenerate("p' = q: E^p is degenerate".into()))?;
    let gt = minus(q, pprime).square().sqrt();
    let nodes = wrap(rule.nodes(&st, None));
    integrate_nodes(&nodes, |x, x0| {
        let p = FourMomentum { p0: x0, p: *x };
        if p.p0 + q.p0 - pprime.p0 <= 0.0 {
            return 0.0;
        }
        2.0 * gt * f(&p) / x0
    })
}

/// Like [`integrate_e_p`] restricted to the annulus `ρ ∈ [rho_a, rho_b]`
/// around `p'` in the plane frame, with Gauss–Legendre in `ln ρ`; resolves
/// integrands concentrated at `p → p'`.
pub fn integrate_e_p_near(
    pprime: &FourMomentum,
    q: &FourMomentum,
    rho_a: f64,
    rho_b: f64,
    f: impl Fn(&FourMomentum) -> f64,
    rule: &SectionRule,
) -> Result<SurfaceQuadratureReport> {
    let w = minus(q, pprime);
    let gt2 = w.square();
    if !(gt2 > 1e-20) {
        return Err(Error::Degenerate("p' = q: E^p is degenerate".into()));
    }
    let surface = ShellSurface::new(1.0, gt2, w * 2.0);
    let gt = gt2.sqrt();
    let nodes = wrap(rule.annulus_nodes(&surface, &pprime.p, rho_a, rho_b));
    integrate_nodes(&nodes, |x, x0| {
        let p = FourMomentum { p0: x0, p: *x };
        if p.p0 + q.p0 - pprime.p0 <= 0.0 {
            return 0.0;
        }
        2.0 * gt * f(&p) / x0
    })
}

/// `∫_{E^{p'}_{p+q}} (dπ_{p'}/(2√s p'⁰)) sσ F(p')`.
pub fn integrate_e_pprime<K: CollisionKernel + ?Sized>(
    p: &FourMomentum,
    q: &FourMomentum,
    kernel: &K,
    f: impl Fn(&FourMomentum) -> f64,
    rule: &SectionRule,
) -> Result<SurfaceQuadratureReport> {
    let g2 = crate::geometry::relative_momentum_sq(p, q);
    if !(g2 > 1e-24) {
        return Err(Error::Degenerate("g = 0: E^{p'} collapses to a point".into()));
    }
    let st = setup_e_pprime(p, q);
    let s = g2 + 4.0;
    let nodes = wrap(rule.nodes(&st, None));
    integrate_nodes(&nodes, |x, x0| {
        let pp = FourMomentum { p0: x0, p: *x };
        let Some(qp) = post_partner(p, q, &pp) else { return 0.0 };
        let c = cos_theta(p, q, &pp, &qp, g2);
        0.5 * s * kernel.sigma(g2.sqrt(), s, c) * f(&pp) / x0
    })
}

/// `∫_{E^q_{p'−p}} (dπ_q/(2ḡq⁰)) sσ F(q)`.
pub fn integrate_e_q<K: CollisionKernel + ?Sized>(
    p: &FourMomentum,
    pprime: &FourMomentum,
    kernel: &K,
    f: impl Fn(&FourMomentum) -> f64,
    rule: &SectionRule,
) -> Result<SurfaceQuadratureReport> {
    let st = setup_e_q(p, pprime).ok_or_else(|| Error::Degenerate("ḡ = 0: E^q is degenerate".into()))?;
    let nodes = wrap(rule.nodes(&st, None));
    integrate_nodes(&nodes, |x, x0| {
        let q = FourMomentum { p0: x0, p: *x };
        let Some(qp) = post_partner(p, &q, pprime) else { return 0.0 };
        let g2 = crate::geometry::relative_momentum_sq(p, &q);
        if !(g2 > 1e-24) {
            return 0.0;
        }
        let s = g2 + 4.0;
        s * kernel.sigma(g2.sqrt(), s, cos_theta(p, &q, pprime, &qp, g2)) * f(&q) / x0
    })
}

fn wrap(nodes: Vec<crate::quadrature::surface::SurfaceNode>) -> SurfaceNodes {
    SurfaceNodes { nodes, roots_per_ray: [0; 3], tangencies: 0, dropped: 0 }
}

/// Coercive kernel `K(p,p') = ∫ dq_s/√(|q_s|²+s̄) δ(q_s^μ(p'−p)_μ) sσ e^{−C q'⁰}`
/// for `ḡ(p,p') ≤ 1`.
pub fn coercive_kernel<K: CollisionKernel + ?Sized>(
    p: &FourMomentum,
    pprime: &FourMomentum,
    kernel: &K,
    c_exp: f64,
    rule: &SectionRule,
) -> Result<SurfaceQuadratureReport> {
    let gb2 = minus(pprime, p).square();
    if !(gb2 > 1e-24) {
        return Err(Error::Singular("K(p,p') is singular at p = p'".into()));
    }
    if gb2 > 1.0 + 1e-12 {
        return Err(Error::Domain(format!("ḡ = {} > 1", gb2.sqrt())));
    }
    let st = setup_q_s(p, pprime).ok_or_else(|| Error::Degenerate("empty q_s surface".into()))?;
    let nodes = wrap(q_s_rule(rule).nodes(&st, None));
    integrate_nodes(&nodes, |x, x0| {
        let Some((q, qp)) = split_q_s(p, pprime, x, x0) else { return 0.0 };
        let g2 = crate::geometry::relative_momentum_sq(p, &q);
        if !(g2 > 1e-24) {
            return 0.0;
        }
        let s = g2 + 4.0;
        let c = cos_theta(p, &q, pprime, &qp, g2);
        s * kernel.sigma(g2.sqrt(), s, c) * (-c_exp * qp.p0).exp() / x0
    })
}

/// `(p'−p)^μ` Minkowski-orthogonality residual of a surface node (diagnostic).
pub fn orthogonality_residual(a: &FourVector, b: &FourVector) -> f64 {
    a.minkowski(b) / (1.0 + dot(&a.x, &a.x).sqrt() + a.t.abs()) / (1.0 + b.t.abs() + norm(&b.x))
}
