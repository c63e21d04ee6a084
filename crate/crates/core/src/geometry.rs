//! Relativistic two-body collision kinematics.
//!
//! Units c = m = 1 and metric signature (−,+,+,+): a particle of momentum
//! `p` has energy `p⁰ = √(1+|p|²)` and `p^μ q_μ = −p⁰q⁰ + p·q`.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::ops::{Add, Mul, Neg, Sub};

/// Spatial 3-vector.
pub type Vec3 = [f64; 3];

#[inline]
pub fn dot(a: &Vec3, b: &Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub fn norm(a: &Vec3) -> f64 {
    dot(a, a).sqrt()
}

#[inline]
pub fn add(a: &Vec3, b: &Vec3) -> Vec3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

#[inline]
pub fn sub(a: &Vec3, b: &Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
pub fn scale(a: &Vec3, s: f64) -> Vec3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

/// `a + s·b`
#[inline]
pub fn axpy(a: &Vec3, s: f64, b: &Vec3) -> Vec3 {
    [a[0] + s * b[0], a[1] + s * b[1], a[2] + s * b[2]]
}

#[inline]
pub fn cross(a: &Vec3, b: &Vec3) -> Vec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

/// Two unit vectors completing `axis` (assumed unit) to a right-handed frame.
pub fn orthonormal_frame(axis: &Vec3) -> (Vec3, Vec3) {
    let helper = if axis[0].abs() < 0.6 {
        [1.0, 0.0, 0.0]
    } else if axis[1].abs() < 0.6 {
        [0.0, 1.0, 0.0]
    } else {
        [0.0, 0.0, 1.0]
    };
    let e1 = cross(axis, &helper);
    let e1 = scale(&e1, 1.0 / norm(&e1));
    let e2 = cross(axis, &e1);
    (e1, e2)
}

/// A general (not necessarily on-shell) 4-vector.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FourVector {
    pub t: f64,
    pub x: Vec3,
}

impl FourVector {
    pub const fn new(t: f64, x: Vec3) -> Self {
        Self { t, x }
    }

    /// Minkowski product `−a⁰b⁰ + a·b`.
    #[inline]
    pub fn minkowski(&self, other: &FourVector) -> f64 {
        -self.t * other.t + dot(&self.x, &other.x)
    }

    #[inline]
    pub fn square(&self) -> f64 {
        self.minkowski(self)
    }
}

impl Add for FourVector {
    type Output = FourVector;
    fn add(self, o: FourVector) -> FourVector {
        FourVector::new(self.t + o.t, add(&self.x, &o.x))
    }
}

impl Sub for FourVector {
    type Output = FourVector;
    fn sub(self, o: FourVector) -> FourVector {
        FourVector::new(self.t - o.t, sub(&self.x, &o.x))
    }
}

impl Mul<f64> for FourVector {
    type Output = FourVector;
    fn mul(self, s: f64) -> FourVector {
        FourVector::new(self.t * s, scale(&self.x, s))
    }
}

impl Neg for FourVector {
    type Output = FourVector;
    fn neg(self) -> FourVector {
        self * -1.0
    }
}

/// On-shell particle 4-momentum `(p⁰, p)` with `p⁰ = √(1+|p|²)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FourMomentum {
    pub p0: f64,
    pub p: Vec3,
}

impl FourMomentum {
    /// Rest momentum `(1, 0)`.
    pub const REST: FourMomentum = FourMomentum { p0: 1.0, p: [0.0; 3] };

    /// Lifts a 3-momentum to the mass shell, rejecting non-finite input.
    pub fn lift(p: Vec3) -> Result<Self> {
        if p.iter().any(|c| !c.is_finite()) {
            return Err(Error::Domain(format!("non-finite momentum {p:?}")));
        }
        Ok(Self::on_shell(p))
    }

    /// Lifts without validation (hot loops).
    #[inline]
    pub fn on_shell(p: Vec3) -> Self {
        Self { p0: (1.0 + dot(&p, &p)).sqrt(), p }
    }

    #[inline]
    pub fn vector(&self) -> FourVector {
        FourVector::new(self.p0, self.p)
    }

    /// Lorentz product with another on-shell momentum.
    #[inline]
    pub fn minkowski(&self, other: &FourMomentum) -> f64 {
        -self.p0 * other.p0 + dot(&self.p, &other.p)
    }

    /// Relativistic velocity `p̂ = p/p⁰`.
    #[inline]
    pub fn velocity(&self) -> Vec3 {
        scale(&self.p, 1.0 / self.p0)
    }
}

/// `p^μ q_μ` for on-shell momenta.
pub fn lorentz_inner(p: &FourMomentum, q: &FourMomentum) -> f64 {
    p.minkowski(q)
}

/// Pure boost, stored through the 4-velocity `u = γ(1, β)` of the moving frame.
#[derive(Clone, Copy, Debug)]
pub struct Boost {
    u0: f64,
    u: Vec3,
}

impl Boost {
    /// Boost into a frame moving with velocity `beta` (|beta| < 1).
    pub fn with_velocity(beta: Vec3) -> Result<Self> {
        let b2 = dot(&beta, &beta);
        if !(b2 < 1.0) {
            return Err(Error::Domain(format!("boost speed {} ≥ 1", b2.sqrt())));
        }
        let gamma = 1.0 / (1.0 - b2).sqrt();
        Ok(Self { u0: gamma, u: scale(&beta, gamma) })
    }

    /// Boost mapping `u` to the rest momentum `(1, 0)`.
    pub fn to_rest_of(u: &FourMomentum) -> Self {
        Self { u0: u.p0, u: u.p }
    }

    /// Boost mapping the rest momentum `(1, 0)` to `u`.
    pub fn from_rest_of(u: &FourMomentum) -> Self {
        Self { u0: u.p0, u: scale(&u.p, -1.0) }
    }

    /// The inverse boost.
    pub fn inverse(&self) -> Self {
        Self { u0: self.u0, u: scale(&self.u, -1.0) }
    }

    /// Lorentz factor `γ`.
    pub fn gamma(&self) -> f64 {
        self.u0
    }

    pub fn apply(&self, v: &FourVector) -> FourVector {
        let ux = dot(&self.u, &v.x);
        let t = self.u0 * v.t - ux;
        let c = ux / (self.u0 + 1.0) - v.t;
        FourVector::new(t, axpy(&v.x, c, &self.u))
    }

    /// Applies the boost to an on-shell momentum, re-lifting to the shell.
    pub fn apply_momentum(&self, p: &FourMomentum) -> FourMomentum {
        FourMomentum::on_shell(self.apply(&p.vector()).x)
    }
}

/// Relative momentum `g` and centre-of-momentum energy squared `s`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PairInvariants {
    pub g: f64,
    pub s: f64,
}

/// All invariants of a collision quadruple `(p, q) → (p', q')`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CollisionInvariants {
    pub g: f64,
    pub s: f64,
    /// `g(p', p)`
    pub gbar: f64,
    /// `g(p', q)`
    pub gtilde: f64,
    pub cos_theta: f64,
}

const RADICAND_TOL: f64 = 1e-12;

/// `g² = 2(−p^μq_μ − 1)` evaluated without cancellation:
/// `g² = |p−q|² − (p⁰−q⁰)²` with `p⁰−q⁰ = (p−q)·(p+q)/(p⁰+q⁰)`.
#[inline]
pub fn relative_momentum_sq(p: &FourMomentum, q: &FourMomentum) -> f64 {
    let d = sub(&p.p, &q.p);
    let e = dot(&d, &add(&p.p, &q.p)) / (p.p0 + q.p0);
    dot(&d, &d) - e * e
}

/// Relative momentum `g(p, q)`; tiny negative radicands from rounding clamp to 0.
pub fn relative_momentum(p: &FourMomentum, q: &FourMomentum) -> Result<f64> {
    let g2 = relative_momentum_sq(p, q);
    let scale = 1.0 + p.p0 * q.p0;
    if g2 < -RADICAND_TOL * scale {
        return Err(Error::Consistency(format!("negative g² = {g2:e}")));
    }
    Ok(g2.max(0.0).sqrt())
}

/// `g` and `s = g² + 4` for an on-shell pair.
pub fn invariants(p: &FourMomentum, q: &FourMomentum) -> Result<PairInvariants> {
    let g = relative_momentum(p, q)?;
    Ok(PairInvariants { g, s: g * g + 4.0 })
}

/// `ḡ = g(p', p)`.
pub fn gbar(p: &FourMomentum, p_post: &FourMomentum) -> Result<f64> {
    relative_momentum(p_post, p)
}

/// `g̃ = g(p', q)`.
pub fn gtilde(p_post: &FourMomentum, q: &FourMomentum) -> Result<f64> {
    relative_momentum(p_post, q)
}

/// Møller velocity in the normalisation of the collision operator,
/// `v_φ = g√s/(p⁰q⁰)`, with values in `[0, 4]`.
///
/// This is twice the kinematic flux factor
/// [`moller_velocity_determinant`]; the factor is absorbed into the kernel.
pub fn moller_velocity(p: &FourMomentum, q: &FourMomentum) -> f64 {
    let g2 = relative_momentum_sq(p, q).max(0.0);
    (g2 * (g2 + 4.0)).sqrt() / (p.p0 * q.p0)
}

/// `√(|p/p⁰ − q/q⁰|² − |p/p⁰ × q/q⁰|²) = g√s/(2p⁰q⁰)`.
pub fn moller_velocity_determinant(p: &FourMomentum, q: &FourMomentum) -> f64 {
    let (vp, vq) = (p.velocity(), q.velocity());
    let d = sub(&vp, &vq);
    let c = cross(&vp, &vq);
    (dot(&d, &d) - dot(&c, &c)).max(0.0).sqrt()
}

/// Lorentz factor of the centre-of-momentum frame, `γ_L = (p⁰+q⁰)/√s`.
pub fn lorentz_factor(p: &FourMomentum, q: &FourMomentum) -> f64 {
    let g2 = relative_momentum_sq(p, q).max(0.0);
    (p.p0 + q.p0) / (g2 + 4.0).sqrt()
}

/// Post-collision momenta for centre-of-momentum direction `ω`:
/// `p' = (p+q)/2 + (g/2)(ω + (γ_L−1)(p+q)((p+q)·ω)/|p+q|²)`, `q' = p + q − p'`.
///
/// The factor `(γ_L−1)/|p+q|²` is evaluated as `1/(√s(p⁰+q⁰+√s))`, which is
/// the same quantity with the removable singularity at `p+q = 0` cancelled.
pub fn post_collision(
    p: &FourMomentum,
    q: &FourMomentum,
    omega: &Vec3,
) -> Result<(FourMomentum, FourMomentum)> {
    if omega.iter().any(|c| !c.is_finite()) || (norm(omega) - 1.0).abs() > 1e-12 {
        return Err(Error::Domain(format!("ω = {omega:?} is not a unit vector")));
    }
    let g = relative_momentum(p, q)?;
    let total = add(&p.p, &q.p);
    let e = p.p0 + q.p0;
    let rs = (g * g + 4.0).sqrt();
    let alpha = 1.0 / (rs * (e + rs));
    let bracket = axpy(omega, alpha * dot(&total, omega), &total);
    let half = scale(&total, 0.5);
    let pp = FourMomentum::on_shell(axpy(&half, 0.5 * g, &bracket));
    let qp = FourMomentum::on_shell(axpy(&half, -0.5 * g, &bracket));
    Ok((pp, qp))
}

/// Closed form `p'⁰ = (p⁰+q⁰)/2 + (g/(2√s))(p+q)·ω`.
pub fn post_collision_energy(p: &FourMomentum, q: &FourMomentum, omega: &Vec3) -> Result<f64> {
    let g = relative_momentum(p, q)?;
    let rs = (g * g + 4.0).sqrt();
    Ok(0.5 * (p.p0 + q.p0) + 0.5 * g / rs * dot(&add(&p.p, &q.p), omega))
}

/// Unit vector `k` with `cos θ = k·ω`:
/// `k = [(√s+2q⁰)p − (√s+2p⁰)q] / (g(p⁰+q⁰+√s))`.
pub fn com_direction(p: &FourMomentum, q: &FourMomentum) -> Result<Vec3> {
    let g = relative_momentum(p, q)?;
    if g < 1e-12 {
        return Err(Error::Degenerate("k undefined for coincident momenta".into()));
    }
    let rs = (g * g + 4.0).sqrt();
    let a = scale(&p.p, rs + 2.0 * q.p0);
    let b = scale(&q.p, rs + 2.0 * p.p0);
    Ok(scale(&sub(&a, &b), 1.0 / (g * (p.p0 + q.p0 + rs))))
}

/// `cos θ = (p−q)^μ(p'−q')_μ / g²`.
pub fn scattering_angle(
    p: &FourMomentum,
    q: &FourMomentum,
    p_post: &FourMomentum,
    q_post: &FourMomentum,
) -> Result<f64> {
    let before = p.vector() - q.vector();
    let after = p_post.vector() - q_post.vector();
    let total_in = p.vector() + q.vector();
    let total_out = p_post.vector() + q_post.vector();
    let mismatch = (total_in - total_out).t.abs() + norm(&(total_in - total_out).x);
    if mismatch > 1e-8 * (1.0 + total_in.t) {
        return Err(Error::Domain(format!("momentum not conserved (|Δ| = {mismatch:e})")));
    }
    let g2 = relative_momentum_sq(p, q);
    if g2 < 1e-24 {
        return Err(Error::Degenerate("scattering angle undefined for g = 0".into()));
    }
    Ok((before.minkowski(&after) / g2).clamp(-1.0, 1.0))
}

/// Invariants of a full collision quadruple.
pub fn collision_invariants(
    p: &FourMomentum,
    q: &FourMomentum,
    p_post: &FourMomentum,
    q_post: &FourMomentum,
) -> Result<CollisionInvariants> {
    let PairInvariants { g, s } = invariants(p, q)?;
    Ok(CollisionInvariants {
        g,
        s,
        gbar: gbar(p, p_post)?,
        gtilde: gtilde(p_post, q)?,
        cos_theta: scattering_angle(p, q, p_post, q_post)?,
    })
}
