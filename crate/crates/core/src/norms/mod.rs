//! Weighted `L²` norms, the semi-norm `|f|_B`, the fractional norm
//! `I^{a,γ}` and the Littlewood–Paley square function.

pub mod lp;

pub use lp::{LpDecomposition, LpSpec, LpSquareSum, MultiIndex};

use crate::collision::{Collision, MomentumFunction};
use crate::error::{Error, Result};
use crate::geometry::{Boost, FourMomentum, FourVector};
use crate::kernel::{CollisionKernel, KernelSpec};
use crate::quadrature::sum::Accumulator;
use crate::quadrature::{dyadic_sum_terms, gauss_legendre, DyadicReport, MomentumGrid, SphereRule};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// `|f|²_{L²_ℓ} = ∫ (p⁰)^ℓ |f|² dp`.
pub fn weighted_l2(f: &MomentumFunction, ell: f64, grid: &MomentumGrid) -> f64 {
    let mut acc = Accumulator::new();
    for (p, w) in grid.nodes.iter().zip(&grid.weights) {
        let v = f.eval(p);
        acc.add(w * p.p0.powf(ell) * v * v);
    }
    acc.value()
}

/// `|f|²_B = ½∫∫∫ v_φσ (f(p')−f(p))² √(J(q)J(q'))`, dyadically summed.
pub fn seminorm_b<K: CollisionKernel + ?Sized>(coll: &Collision<K>, outer: &MomentumGrid, f: &MomentumFunction) -> Result<f64> {
    Ok(coll.inner_n(outer, f)?.seminorm_b)
}

/// Resolution of the `ḡ`-shell quadrature of fractional difference terms.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FractionalSpec {
    /// Last resolved shell `ḡ ∈ [2^{-k-1}, 2^{-k}]`; later shells are extrapolated.
    pub k_max: i32,
    /// Gauss nodes in `ln ḡ` per shell.
    pub shell_nodes: usize,
    pub sphere_theta: usize,
    pub sphere_phi: usize,
}

impl Default for FractionalSpec {
    fn default() -> Self {
        Self { k_max: 14, shell_nodes: 3, sphere_theta: 4, sphere_phi: 8 }
    }
}

impl FractionalSpec {
    pub fn validate(&self) -> Result<()> {
        if self.k_max < 1 || self.shell_nodes == 0 || self.sphere_theta == 0 || self.sphere_phi == 0 {
            return Err(Error::Validation("fractional quadrature needs k_max ≥ 1 and positive node counts".into()));
        }
        Ok(())
    }
}

/// Shell-resolved value of `∬ (p⁰p'⁰)^w (f(p)−f(p'))²/ḡ^{3+γ} 1_{ḡ≤1} dp dp'`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FractionalReport {
    /// Shell contributions for `k = 0, …, k_max`.
    pub shells: Vec<f64>,
    pub sum: DyadicReport,
    /// False when the shells do not decay: `f` is too rough for the resolution.
    pub finite: bool,
}

impl FractionalReport {
    pub fn value(&self) -> f64 {
        if self.finite {
            self.sum.value()
        } else {
            f64::INFINITY
        }
    }
}

/// Radial nodes `(|y|, y⁰, weight)` per `ḡ`-shell `k = 0..=k_max` in the rest
/// frame of the outer momentum, where `ḡ² = 2(y⁰ − 1)` and `dp' = (p'⁰/y⁰) dy`.
/// The weight contains `ḡ^{-3-γ}` and the Jacobian except for the factor `p'⁰`.
fn fractional_shells(gamma: f64, spec: &FractionalSpec) -> Vec<Vec<(f64, f64, f64)>> {
    let (x, wx) = gauss_legendre(spec.shell_nodes);
    (0..=spec.k_max)
        .map(|k| {
            let (la, lb) = ((0.5f64).powi(k + 1).ln(), (0.5f64).powi(k).ln());
            let (h, c) = (0.5 * (lb - la), 0.5 * (lb + la));
            x.iter()
                .zip(&wx)
                .map(|(t, w)| {
                    let gb = (c + h * t).exp();
                    let root = (1.0 + 0.25 * gb * gb).sqrt();
                    let r = gb * root;
                    let y0 = 1.0 + 0.5 * gb * gb;
                    let dr = root + 0.25 * gb * gb / root;
                    (r, y0, h * w * gb * dr * r * r / (y0 * gb.powf(3.0 + gamma)))
                })
                .collect()
        })
        .collect()
}

/// Calls `visit(shell, p', weight)` for every partner node of `p`; the weight
/// includes `dp'`, `ḡ^{-3-γ}` and `(p⁰p'⁰)^w`.
fn for_each_partner(
    p: &FourMomentum,
    shells: &[Vec<(f64, f64, f64)>],
    sphere: &SphereRule,
    weight_exp: f64,
    mut visit: impl FnMut(usize, &FourMomentum, f64),
) {
    let back = Boost::from_rest_of(p);
    for (k, nodes) in shells.iter().enumerate() {
        for &(r, y0, wr) in nodes {
            for (u, wu) in sphere.nodes.iter().zip(&sphere.weights) {
                let y = FourVector::new(y0, [r * u[0], r * u[1], r * u[2]]);
                let pp = FourMomentum::on_shell(back.apply(&y).x);
                visit(k, &pp, wr * wu * pp.p0 * (p.p0 * pp.p0).powf(weight_exp));
            }
        }
    }
}

/// The fractional difference term with weight `(p⁰p'⁰)^w`.
///
/// For each outer `p` the partner is parametrised in the rest frame of `p`,
/// where `ḡ` shells are spheres.
pub fn fractional_term(
    f: &MomentumFunction,
    weight_exp: f64,
    gamma: f64,
    grid: &MomentumGrid,
    spec: &FractionalSpec,
) -> Result<FractionalReport> {
    spec.validate()?;
    let shells_rule = fractional_shells(gamma, spec);
    let sphere = SphereRule::new(spec.sphere_theta, spec.sphere_phi);
    let n_shells = shells_rule.len();
    let per_node: Vec<Vec<f64>> = grid
        .nodes
        .par_iter()
        .zip(grid.weights.par_iter())
        .map(|(p, wp)| {
            let fp = f.eval(p);
            let mut acc = vec![Accumulator::new(); n_shells];
            for_each_partner(p, &shells_rule, &sphere, weight_exp, |k, pp, w| {
                let d = f.eval(pp) - fp;
                acc[k].add(w * d * d);
            });
            acc.iter().map(|a| wp * a.value()).collect()
        })
        .collect();
    let mut shells = vec![Accumulator::new(); n_shells];
    for node in &per_node {
        for (a, v) in shells.iter_mut().zip(node) {
            a.add(*v);
        }
    }
    let shells: Vec<f64> = shells.iter().map(Accumulator::value).collect();
    if shells.iter().any(|v| !v.is_finite()) {
        return Err(Error::NotFinite("fractional shell".into()));
    }
    let sum = dyadic_sum_terms(&shells);
    let mass: f64 = shells.iter().sum();
    let finite = sum.converged || shells.last().copied().unwrap_or(0.0) <= 1e-12 * mass.max(1e-300);
    Ok(FractionalReport { shells, sum, finite })
}

/// Gram matrix (row-major, `dim × dim`) of the fractional difference form for
/// the functions evaluated by `basis`: `G_mn = ∬ (φ_m'−φ_m)(φ_n'−φ_n) (p⁰p'⁰)^w/ḡ^{3+γ}`.
/// Intended for smooth functions, whose shells decay fast; no tail is added.
pub fn fractional_gram(
    basis: impl Fn(&FourMomentum, &mut [f64]) + Sync,
    dim: usize,
    weight_exp: f64,
    gamma: f64,
    grid: &MomentumGrid,
    spec: &FractionalSpec,
) -> Result<Vec<f64>> {
    spec.validate()?;
    let shells_rule = fractional_shells(gamma, spec);
    let sphere = SphereRule::new(spec.sphere_theta, spec.sphere_phi);
    let parts: Vec<Vec<f64>> = grid
        .nodes
        .par_iter()
        .zip(grid.weights.par_iter())
        .map(|(p, wp)| {
            let mut at_p = vec![0.0; dim];
            basis(p, &mut at_p);
            let mut at_pp = vec![0.0; dim];
            let mut gram = vec![0.0; dim * dim];
            for_each_partner(p, &shells_rule, &sphere, weight_exp, |_, pp, w| {
                basis(pp, &mut at_pp);
                for (d, a) in at_pp.iter_mut().zip(&at_p) {
                    *d -= a;
                }
                let ww = wp * w;
                for m in 0..dim {
                    let dm = ww * at_pp[m];
                    for n in m..dim {
                        gram[m * dim + n] += dm * at_pp[n];
                    }
                }
            });
            gram
        })
        .collect();
    let mut gram = vec![0.0; dim * dim];
    for part in &parts {
        for (g, v) in gram.iter_mut().zip(part) {
            *g += v;
        }
    }
    for m in 0..dim {
        for n in 0..m {
            gram[m * dim + n] = gram[n * dim + m];
        }
    }
    if gram.iter().any(|v| !v.is_finite()) {
        return Err(Error::NotFinite("fractional Gram matrix".into()));
    }
    Ok(gram)
}

/// `|f|²_{I^{a,γ}}` split into its weighted `L²` and difference parts.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct IagNorm {
    pub l2_weighted: f64,
    pub difference: FractionalReport,
}

impl IagNorm {
    /// The squared norm; infinite if the difference shells diverge.
    pub fn squared(&self) -> f64 {
        self.l2_weighted + self.difference.value()
    }
}

/// `|f|²_{I^{a,γ}} = |f|²_{L²_{(a+γ)/2}} + ∬ (f(p')−f(p))²/ḡ^{3+γ} (p⁰p'⁰)^{(a+γ)/4} 1_{ḡ≤1}`.
pub fn norm_iag(f: &MomentumFunction, kernel: &KernelSpec, grid: &MomentumGrid, spec: &FractionalSpec) -> Result<IagNorm> {
    let e = 0.5 * (kernel.a + kernel.gamma);
    Ok(IagNorm {
        l2_weighted: weighted_l2(f, e, grid),
        difference: fractional_term(f, 0.5 * e, kernel.gamma, grid, spec)?,
    })
}

/// All norms of one function.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NormReport {
    pub l2_weighted: f64,
    pub seminorm_b: f64,
    pub norm_iag: f64,
    pub lp_square_sum: f64,
}
