//! Collision kernels `σ(g,θ) = Φ(g)σ₀(θ)` and the dyadic partition in `ḡ`.
//!
//! The power-law family is non-cutoff: `sinθ·σ₀(θ) ~ θ^{-1-γ}` is not
//! integrable at `θ = 0`, so every angular integral is organised in dyadic
//! shells `ḡ = g sin(θ/2) ∈ [2^{-k-1}, 2^{-k})`.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, PI};

/// Exponents and angular constant of the power-law kernel.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KernelSpec {
    /// Hard-potential exponent of `Φ` at large `g`.
    pub a: f64,
    /// Soft singular exponent of `Φ` at small `g`.
    pub b: f64,
    /// Angular singularity exponent.
    pub gamma: f64,
    /// Angular constant.
    pub c_ang: f64,
}

impl Default for KernelSpec {
    fn default() -> Self {
        Self { a: 1.0, b: 1.0, gamma: 0.5, c_ang: 1.0 }
    }
}

impl KernelSpec {
    /// Checks `γ ∈ (0,2)`, `a+γ ≥ 0`, `γ < b < 3/2+γ` and `c_ang > 0`.
    pub fn validate(&self) -> Result<()> {
        let KernelSpec { a, b, gamma, c_ang } = *self;
        let finite = [a, b, gamma, c_ang].iter().all(|v| v.is_finite());
        if !finite {
            return Err(Error::Validation("kernel parameters must be finite".into()));
        }
        if !(gamma > 0.0 && gamma < 2.0) {
            return Err(Error::Validation(format!("gamma = {gamma} not in (0,2)")));
        }
        if a + gamma < 0.0 {
            return Err(Error::Validation(format!("a + gamma = {} < 0", a + gamma)));
        }
        if !(b > gamma && b < 1.5 + gamma) {
            return Err(Error::Validation(format!("b = {b} not in (gamma, 3/2 + gamma)")));
        }
        if !(c_ang > 0.0) {
            return Err(Error::Validation(format!("c_ang = {c_ang} must be positive")));
        }
        Ok(())
    }
}

/// A kernel `σ(g,θ) = Φ(g,s)σ₀(θ)` as seen by the quadrature engines.
pub trait CollisionKernel: Sync + Send {
    /// Radial factor `Φ(g)`; `s = g²+4` is passed to avoid recomputation.
    fn phi(&self, g: f64, s: f64) -> f64;
    /// Angular density `sinθ·σ₀(θ)` against `dθ dφ`.
    fn angular_density(&self, theta: f64) -> f64;
    /// Largest angle in the support of `σ₀`.
    fn theta_max(&self) -> f64;
    /// `Some(γ)` when `sinθσ₀(θ) ~ θ^{-1-γ}` at zero, `None` for a bounded kernel.
    fn singular_exponent(&self) -> Option<f64>;

    /// `σ(g, θ)` from `cos θ` (zero outside the support).
    fn sigma(&self, g: f64, s: f64, cos_theta: f64) -> f64 {
        let theta = cos_theta.clamp(-1.0, 1.0).acos();
        if theta > self.theta_max() || theta == 0.0 {
            if theta == 0.0 && self.singular_exponent().is_none() {
                return self.phi(g, s) * self.sigma0_limit_at_zero();
            }
            return 0.0;
        }
        self.phi(g, s) * self.angular_density(theta) / theta.sin()
    }

    /// `σ₀(0⁺)` for bounded kernels.
    fn sigma0_limit_at_zero(&self) -> f64 {
        0.0
    }

    /// Closed or numerical value of `∫_{θa}^{θb} sinθσ₀(θ) dθ`.
    fn angular_mass(&self, theta_a: f64, theta_b: f64) -> f64;
}

/// The default non-cutoff hard-potential kernel
/// `Φ(g) = (g/√s)g^a + g^{-b}`, `σ₀(θ) = c_ang/(sinθ·θ^{1+γ})` on `θ ≤ π/2`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PowerLawKernel {
    pub spec: KernelSpec,
}

impl PowerLawKernel {
    pub fn new(spec: KernelSpec) -> Result<Self> {
        spec.validate()?;
        Ok(Self { spec })
    }

    /// `σ₀(θ)`; `θ = 0` is a genuine singularity.
    pub fn sigma0(&self, theta: f64) -> Result<f64> {
        if !(theta > 0.0 && theta <= PI) {
            if theta == 0.0 {
                return Err(Error::Singular("σ₀ is singular at θ = 0".into()));
            }
            return Err(Error::Domain(format!("θ = {theta} outside (0, π]")));
        }
        if theta > FRAC_PI_2 {
            return Ok(0.0);
        }
        Ok(self.spec.c_ang / (theta.sin() * theta.powf(1.0 + self.spec.gamma)))
    }

    /// `Φ(g)`; `g = 0` returns `+∞` (integrable soft singularity).
    pub fn phi_g(&self, g: f64, s: f64) -> f64 {
        if g == 0.0 {
            return f64::INFINITY;
        }
        g / s.sqrt() * g.powf(self.spec.a) + g.powf(-self.spec.b)
    }
}

impl CollisionKernel for PowerLawKernel {
    fn phi(&self, g: f64, s: f64) -> f64 {
        self.phi_g(g, s)
    }

    fn angular_density(&self, theta: f64) -> f64 {
        if theta <= 0.0 || theta > FRAC_PI_2 {
            return 0.0;
        }
        self.spec.c_ang * theta.powf(-1.0 - self.spec.gamma)
    }

    fn theta_max(&self) -> f64 {
        FRAC_PI_2
    }

    fn singular_exponent(&self) -> Option<f64> {
        Some(self.spec.gamma)
    }

    fn angular_mass(&self, theta_a: f64, theta_b: f64) -> f64 {
        let g = self.spec.gamma;
        let b = theta_b.min(FRAC_PI_2);
        if b <= theta_a {
            return 0.0;
        }
        self.spec.c_ang * (theta_a.powf(-g) - b.powf(-g)) / g
    }
}

/// Smooth bounded kernel `σ = g³ sin⁴θ` on the full sphere.
///
/// With it `v_φσ = √s (g sinθ)⁴/(p⁰q⁰)` is smooth in all variables, which is
/// what exact identities between integral representations need to be
/// checked to tight tolerances on modest grids.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct RegularKernel;

impl CollisionKernel for RegularKernel {
    fn phi(&self, g: f64, _s: f64) -> f64 {
        g * g * g
    }

    fn angular_density(&self, theta: f64) -> f64 {
        theta.sin().powi(5)
    }

    fn theta_max(&self) -> f64 {
        PI
    }

    fn singular_exponent(&self) -> Option<f64> {
        None
    }

    fn sigma(&self, g: f64, _s: f64, cos_theta: f64) -> f64 {
        let s2 = (1.0 - cos_theta * cos_theta).max(0.0);
        g * g * g * s2 * s2
    }

    fn angular_mass(&self, theta_a: f64, theta_b: f64) -> f64 {
        // ∫ sin⁵θ dθ = −cosθ + 2cos³θ/3 − cos⁵θ/5
        let f = |t: f64| {
            let c = t.cos();
            -c + 2.0 * c.powi(3) / 3.0 - c.powi(5) / 5.0
        };
        f(theta_b.min(PI)) - f(theta_a.max(0.0))
    }
}

/// `σ̄(θ) = [σ(θ) + σ(π−θ)]·1_{θ≤π/2}`: folds a kernel onto the forward hemisphere.
#[derive(Clone, Copy, Debug)]
pub struct Symmetrized<K> {
    pub inner: K,
}

impl<K: CollisionKernel> Symmetrized<K> {
    pub fn new(inner: K) -> Self {
        Self { inner }
    }
}

impl<K: CollisionKernel> CollisionKernel for Symmetrized<K> {
    fn phi(&self, g: f64, s: f64) -> f64 {
        self.inner.phi(g, s)
    }

    fn angular_density(&self, theta: f64) -> f64 {
        if theta <= 0.0 || theta > FRAC_PI_2 {
            return 0.0;
        }
        let mirror = PI - theta;
        let back = if mirror <= self.inner.theta_max() { self.inner.angular_density(mirror) } else { 0.0 };
        self.inner.angular_density(theta) + back
    }

    fn theta_max(&self) -> f64 {
        FRAC_PI_2
    }

    fn singular_exponent(&self) -> Option<f64> {
        self.inner.singular_exponent()
    }

    fn sigma0_limit_at_zero(&self) -> f64 {
        self.inner.sigma0_limit_at_zero()
    }

    fn angular_mass(&self, theta_a: f64, theta_b: f64) -> f64 {
        let b = theta_b.min(FRAC_PI_2);
        if b <= theta_a {
            return 0.0;
        }
        self.inner.angular_mass(theta_a, b) + self.inner.angular_mass(PI - b, PI - theta_a)
    }
}

/// Dyadic shell index of `ḡ > 0`: the unique `k` with `2^{-k-1} ≤ ḡ < 2^{-k}`.
pub fn dyadic_index(gbar: f64) -> Result<i32> {
    if !(gbar > 0.0) || !gbar.is_finite() {
        return Err(Error::Domain(format!("ḡ = {gbar} must be positive and finite")));
    }
    let mut k = (-gbar.log2()).ceil() as i32 - 1;
    // Correct the floating-point logarithm using exact powers of two.
    while gbar >= 2f64.powi(-k) {
        k -= 1;
    }
    while gbar < 2f64.powi(-k - 1) {
        k += 1;
    }
    Ok(k)
}

/// Sharp shell indicator `χ_k(ḡ) = 1_{[2^{-k-1}, 2^{-k})}(ḡ)`.
pub fn chi_k(k: i32, gbar: f64) -> Result<f64> {
    Ok(if dyadic_index(gbar)? == k { 1.0 } else { 0.0 })
}

/// Scattering-angle interval `[θa, θb)` of shell `k` at relative momentum `g`,
/// using `ḡ = g sin(θ/2)`, clipped to `(0, θ_max]`. `None` if empty.
pub fn shell_theta_range(g: f64, k: i32, theta_max: f64) -> Option<(f64, f64)> {
    if g <= 0.0 {
        return None;
    }
    let lo = 2f64.powi(-k - 1) / g;
    if lo >= 1.0 {
        return None;
    }
    let hi = 2f64.powi(-k) / g;
    let ta = 2.0 * lo.asin();
    let tb = if hi >= 1.0 { PI } else { 2.0 * hi.asin() };
    let tb = tb.min(theta_max);
    if tb <= ta {
        None
    } else {
        Some((ta, tb))
    }
}

/// `∫_{S²} σ(g,θ)χ_k(ḡ) dω` in closed form.
pub fn shell_solid_integral<K: CollisionKernel>(kernel: &K, g: f64, k: i32) -> f64 {
    let s = g * g + 4.0;
    match shell_theta_range(g, k, kernel.theta_max()) {
        Some((ta, tb)) => 2.0 * PI * kernel.phi(g, s) * kernel.angular_mass(ta, tb),
        None => 0.0,
    }
}
