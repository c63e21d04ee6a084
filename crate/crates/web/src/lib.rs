//! Browser bindings: single-collision kinematics, dyadic shell scaling of the
//! non-cutoff kernel, and the coercive kernel near the diagonal.
//!
//! Every export returns a flat `Float64Array`; the layouts are documented on
//! the functions. The plain-Rust versions are public so they can be tested
//! natively.

use relboltz::collision::dual::{coercive_kernel as coercive, COERCIVE_EXPONENT};
use relboltz::collision::Juttner;
use relboltz::geometry::{
    collision_invariants, moller_velocity, post_collision, relative_momentum, FourMomentum, Vec3,
};
use relboltz::kernel::{shell_solid_integral, KernelSpec, PowerLawKernel};
use relboltz::quadrature::SectionRule;
use relboltz::Result;
use wasm_bindgen::prelude::*;

fn lift(p: Vec3) -> Result<FourMomentum> {
    FourMomentum::lift(p)
}

fn unit(theta: f64, phi: f64) -> Vec3 {
    [theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos()]
}

fn js(e: relboltz::Error) -> JsError {
    JsError::new(&e.to_string())
}

/// Post-collision state for centre-of-momentum direction `ω(θ_ω, φ_ω)`.
///
/// Layout: `[p'⁰, p'₁, p'₂, p'₃, q'⁰, q'₁, q'₂, q'₃, g, s, ḡ, g̃, cos θ, v_φ, |Δ(p+q)|]`.
pub fn collide_values(p: Vec3, q: Vec3, theta_w: f64, phi_w: f64) -> Result<Vec<f64>> {
    let (p, q) = (lift(p)?, lift(q)?);
    let (pp, qp) = post_collision(&p, &q, &unit(theta_w, phi_w))?;
    let inv = collision_invariants(&p, &q, &pp, &qp)?;
    let residual = (p.p0 + q.p0 - pp.p0 - qp.p0).abs()
        + (0..3).map(|i| (p.p[i] + q.p[i] - pp.p[i] - qp.p[i]).abs()).sum::<f64>();
    Ok(vec![
        pp.p0, pp.p[0], pp.p[1], pp.p[2], qp.p0, qp.p[0], qp.p[1], qp.p[2],
        inv.g, inv.s, inv.gbar, inv.gtilde, inv.cos_theta, moller_velocity(&p, &q), residual,
    ])
}

/// Per-shell solid-angle integrals `∫σχ_k(ḡ)dω` of the power-law kernel at
/// relative momentum `g`, for `k ∈ [k_min, k_max]`.
///
/// Layout: triples `[k, value, log₂(value/value_{k−1})]`; the first ratio is NaN.
pub fn shell_values(g: f64, gamma: f64, k_min: i32, k_max: i32) -> Result<Vec<f64>> {
    if k_min > k_max || k_max - k_min > 200 {
        return Err(relboltz::Error::Validation(format!("shell range [{k_min}, {k_max}] is empty or too long")));
    }
    if !(g > 0.0 && g.is_finite()) {
        return Err(relboltz::Error::Domain(format!("g = {g} must be positive")));
    }
    let spec = KernelSpec { gamma, b: KernelSpec::default().b.max(gamma + 0.5), ..KernelSpec::default() };
    let kernel = PowerLawKernel::new(spec)?;
    let mut out = Vec::new();
    let mut prev = f64::NAN;
    for k in k_min..=k_max {
        let v = shell_solid_integral(&kernel, g, k);
        out.extend([k as f64, v, (v / prev).log2()]);
        prev = v;
    }
    Ok(out)
}

/// Coercive kernel `K(p, p')` and the Jüttner density at both points.
///
/// Layout: `[K, error estimate, ḡ, J(p), J(p')]`.
pub fn coercive_values(p: Vec3, pprime: Vec3) -> Result<Vec<f64>> {
    let (p, pp) = (lift(p)?, lift(pprime)?);
    let kernel = PowerLawKernel::new(KernelSpec::default())?;
    let rule = SectionRule { n_radial: 12, n_phi: 12, ..SectionRule::default() };
    let k = coercive(&p, &pp, &kernel, COERCIVE_EXPONENT, &rule)?;
    let j = Juttner::new();
    Ok(vec![k.value, k.error, relative_momentum(&pp, &p)?, j.j(&p), j.j(&pp)])
}

#[wasm_bindgen]
pub fn collide(p: &[f64], q: &[f64], theta_w: f64, phi_w: f64) -> std::result::Result<Vec<f64>, JsError> {
    collide_values(vec3(p)?, vec3(q)?, theta_w, phi_w).map_err(js)
}

#[wasm_bindgen]
pub fn shells(g: f64, gamma: f64, k_min: i32, k_max: i32) -> std::result::Result<Vec<f64>, JsError> {
    shell_values(g, gamma, k_min, k_max).map_err(js)
}

#[wasm_bindgen]
pub fn coercive_kernel(p: &[f64], pprime: &[f64]) -> std::result::Result<Vec<f64>, JsError> {
    coercive_values(vec3(p)?, vec3(pprime)?).map_err(js)
}

fn vec3(v: &[f64]) -> std::result::Result<Vec3, JsError> {
    v.try_into().map_err(|_| JsError::new("expected three components"))
}
