//! Littlewood–Paley decomposition in momentum.
//!
//! `φ` is the bump `e^{1/(|w|²−1)}` on the unit ball, normalised so that its
//! discrete integral is exactly one; `φ_j(w) = 2^{3j}φ(2^jw)`,
//! `S_j f = φ_j * f`, `Δ_0 = S_0` and `Δ_j = S_j − S_{j−1}` (convolution with
//! `ψ_j`, `ψ(w) = φ(w) − 2^{−3}φ(w/2)`). Convolutions are evaluated with a
//! fixed rule on the unit ball, so `Δ_j(1) = 0` holds to rounding.

use crate::collision::MomentumFunction;
use crate::error::{Error, Result};
use crate::geometry::FourMomentum;
use crate::quadrature::sum::Accumulator;
use crate::quadrature::{gauss_legendre_on, MomentumGrid, SphereRule};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Multi-index `α` of a momentum derivative, `|α| ≤ 2`.
pub type MultiIndex = [u8; 3];

/// Levels and resolution of the decomposition.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LpSpec {
    /// Highest level `J_max`.
    pub j_max: u32,
    /// Gauss nodes in `|v|` on the unit ball.
    pub ball_radial: usize,
    pub ball_theta: usize,
    pub ball_phi: usize,
}

impl Default for LpSpec {
    fn default() -> Self {
        Self { j_max: 8, ball_radial: 12, ball_theta: 6, ball_phi: 12 }
    }
}

/// One node of the unit-ball rule with `w·φ`, `w·∇φ` and `w·∇²φ` precomputed.
#[derive(Clone, Debug)]
struct BallNode {
    v: [f64; 3],
    phi: f64,
    grad: [f64; 3],
    hess: [[f64; 3]; 3],
}

/// Result of a square-function evaluation.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LpSquareSum {
    /// `2^{c j} ∫|·_j|² (p⁰)^ρ` per level.
    pub levels: Vec<f64>,
    pub total: f64,
    /// Levels finer than twice the grid spacing.
    pub truncated: Vec<bool>,
}

/// The cached mollifier rule.
#[derive(Clone, Debug)]
pub struct LpDecomposition {
    pub spec: LpSpec,
    nodes: Vec<BallNode>,
}

fn bump(r2: f64) -> f64 {
    if r2 < 1.0 {
        (1.0 / (r2 - 1.0)).exp()
    } else {
        0.0
    }
}

impl LpDecomposition {
    pub fn new(spec: &LpSpec) -> Result<Self> {
        if spec.ball_radial == 0 || spec.ball_theta == 0 || spec.ball_phi == 0 {
            return Err(Error::Validation("ball rule needs positive node counts".into()));
        }
        let (rs, wr) = gauss_legendre_on(spec.ball_radial, 0.0, 1.0);
        let sphere = SphereRule::new(spec.ball_theta, spec.ball_phi);
        let mut nodes = Vec::with_capacity(rs.len() * sphere.len());
        let mut mass = Accumulator::new();
        for (r, w) in rs.iter().zip(&wr) {
            for (u, wu) in sphere.nodes.iter().zip(&sphere.weights) {
                let v = [r * u[0], r * u[1], r * u[2]];
                let r2 = r * r;
                let weight = w * r * r * wu;
                let phi = bump(r2);
                let d = r2 - 1.0;
                let mut grad = [0.0; 3];
                let mut hess = [[0.0; 3]; 3];
                for i in 0..3 {
                    grad[i] = phi * (-2.0 * v[i] / (d * d));
                    for k in 0..3 {
                        let delta = if i == k { 1.0 } else { 0.0 };
                        hess[i][k] = phi * (4.0 * v[i] * v[k] / d.powi(4) - 2.0 * delta / (d * d) + 8.0 * v[i] * v[k] / d.powi(3));
                    }
                }
                mass.add(weight * phi);
                nodes.push(BallNode {
                    v,
                    phi: weight * phi,
                    grad: grad.map(|g| weight * g),
                    hess: hess.map(|row| row.map(|h| weight * h)),
                });
            }
        }
        let c = 1.0 / mass.value();
        for n in &mut nodes {
            n.phi *= c;
            n.grad = n.grad.map(|g| c * g);
            n.hess = n.hess.map(|row| row.map(|h| c * h));
        }
        // ∫∂^αφ = 0 holds only to quadrature accuracy on the rule; remove the
        // discrete residual along φ so derivative kernels annihilate constants.
        let mut g_res = [0.0; 3];
        let mut h_res = [[0.0; 3]; 3];
        for n in &nodes {
            for i in 0..3 {
                g_res[i] += n.grad[i];
                for k in 0..3 {
                    h_res[i][k] += n.hess[i][k];
                }
            }
        }
        for n in &mut nodes {
            for i in 0..3 {
                n.grad[i] -= g_res[i] * n.phi;
                for k in 0..3 {
                    n.hess[i][k] -= h_res[i][k] * n.phi;
                }
            }
        }
        Ok(Self { spec: spec.clone(), nodes })
    }

    /// `∫ m(v) f(p − t v) dv` for the node moment `m`.
    fn convolve(&self, f: &MomentumFunction, p: &FourMomentum, t: f64, m: impl Fn(&BallNode) -> f64) -> f64 {
        let mut acc = Accumulator::new();
        for n in &self.nodes {
            let x = [p.p[0] - t * n.v[0], p.p[1] - t * n.v[1], p.p[2] - t * n.v[2]];
            acc.add(m(n) * f.eval(&FourMomentum::on_shell(x)));
        }
        acc.value()
    }

    /// `S_j f(p)`.
    pub fn partial_sum(&self, f: &MomentumFunction, j: u32, p: &FourMomentum) -> f64 {
        self.convolve(f, p, 0.5f64.powi(j as i32), |n| n.phi)
    }

    /// `Δ_j f(p)`.
    pub fn delta(&self, f: &MomentumFunction, j: u32, p: &FourMomentum) -> f64 {
        let t = 0.5f64.powi(j as i32);
        if j == 0 {
            return self.convolve(f, p, t, |n| n.phi);
        }
        let mut acc = Accumulator::new();
        for n in &self.nodes {
            let a = FourMomentum::on_shell([p.p[0] - t * n.v[0], p.p[1] - t * n.v[1], p.p[2] - t * n.v[2]]);
            let b = FourMomentum::on_shell([p.p[0] - 2.0 * t * n.v[0], p.p[1] - 2.0 * t * n.v[1], p.p[2] - 2.0 * t * n.v[2]]);
            acc.add(n.phi * (f.eval(&a) - f.eval(&b)));
        }
        acc.value()
    }

    /// `∇^α Δ_j f(p)` through the derivative kernels `∂^αφ`.
    pub fn delta_derivative(&self, f: &MomentumFunction, j: u32, alpha: MultiIndex, p: &FourMomentum) -> Result<f64> {
        let order: u32 = alpha.iter().map(|&a| a as u32).sum();
        if order > 2 {
            return Err(Error::Validation(format!("|α| = {order} > 2")));
        }
        if order == 0 {
            return Ok(self.delta(f, j, p));
        }
        let idx: Vec<usize> = (0..3).flat_map(|i| std::iter::repeat(i).take(alpha[i] as usize)).collect();
        let moment = |n: &BallNode| match idx.as_slice() {
            [i] => n.grad[*i],
            [i, k] => n.hess[*i][*k],
            _ => unreachable!(),
        };
        let t = 0.5f64.powi(j as i32);
        let scale = 2f64.powi((order * j) as i32);
        let fine = self.convolve(f, p, t, &moment);
        if j == 0 {
            return Ok(scale * fine);
        }
        let coarse = self.convolve(f, p, 2.0 * t, &moment);
        Ok(scale * (fine - 0.5f64.powi(order as i32) * coarse))
    }

    /// `Δ_j f` on the grid nodes.
    pub fn project(&self, f: &MomentumFunction, j: u32, grid: &MomentumGrid) -> Result<Vec<f64>> {
        if j > self.spec.j_max {
            return Err(Error::Validation(format!("level {j} > J_max = {}", self.spec.j_max)));
        }
        Ok(grid.nodes.par_iter().map(|p| self.delta(f, j, p)).collect())
    }

    /// Levels whose scale `2^{−j}` is below twice the finest radial spacing.
    pub fn truncated(&self, grid: &MomentumGrid) -> Vec<bool> {
        let h = grid.radial_spacing(0.0);
        (0..=self.spec.j_max).map(|j| 0.5f64.powi(j as i32) < 2.0 * h).collect()
    }

    fn weighted_levels(
        &self,
        grid: &MomentumGrid,
        rho: f64,
        level_weight: impl Fn(u32) -> f64,
        value: impl Fn(u32, &FourMomentum) -> Result<f64> + Sync,
    ) -> Result<LpSquareSum> {
        let mut levels = Vec::with_capacity(self.spec.j_max as usize + 1);
        for j in 0..=self.spec.j_max {
            let vals: Vec<f64> = grid.nodes.par_iter().map(|p| value(j, p)).collect::<Result<_>>()?;
            let mut acc = Accumulator::new();
            for ((p, w), v) in grid.nodes.iter().zip(&grid.weights).zip(&vals) {
                acc.add(w * v * v * p.p0.powf(rho));
            }
            levels.push(level_weight(j) * acc.value());
        }
        let total = levels.iter().sum();
        Ok(LpSquareSum { levels, total, truncated: self.truncated(grid) })
    }

    /// `Σ_j 2^{γj} ∫ |Δ_j f|² (p⁰)^ρ dp`.
    pub fn square_sum(&self, f: &MomentumFunction, gamma: f64, rho: f64, grid: &MomentumGrid) -> Result<LpSquareSum> {
        self.weighted_levels(grid, rho, |j| 2f64.powf(gamma * j as f64), |j, p| Ok(self.delta(f, j, p)))
    }

    /// `Σ_j 2^{(γ−|α|)j} ∫ |∇^αΔ_j f|² (p⁰)^ρ dp`.
    pub fn square_sum_grad(
        &self,
        f: &MomentumFunction,
        gamma: f64,
        rho: f64,
        alpha: MultiIndex,
        grid: &MomentumGrid,
    ) -> Result<LpSquareSum> {
        let order: u32 = alpha.iter().map(|&a| a as u32).sum();
        self.weighted_levels(
            grid,
            rho,
            |j| 2f64.powf((gamma - order as f64) * j as f64),
            |j, p| self.delta_derivative(f, j, alpha, p),
        )
    }

    /// `‖S_J f − f‖_{L²}` on the grid.
    pub fn reconstruction_error(&self, f: &MomentumFunction, j: u32, grid: &MomentumGrid) -> f64 {
        let vals: Vec<f64> = grid.nodes.par_iter().map(|p| self.partial_sum(f, j, p) - f.eval(p)).collect();
        let mut acc = Accumulator::new();
        for (w, v) in grid.weights.iter().zip(&vals) {
            acc.add(w * v * v);
        }
        acc.value().sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::MomentumGridSpec;

    fn grid() -> MomentumGrid {
        MomentumGrid::new(&MomentumGridSpec { radial_nodes: 10, sphere_theta: 3, sphere_phi: 6, ..Default::default() }).unwrap()
    }

    #[test]
    fn constants_are_annihilated() {
        let lp = LpDecomposition::new(&LpSpec::default()).unwrap();
        let one = MomentumFunction::constant(1.0);
        let p = FourMomentum::on_shell([0.3, -1.2, 0.8]);
        assert!((lp.delta(&one, 0, &p) - 1.0).abs() < 1e-12);
        for j in 1..=8 {
            assert!(lp.delta(&one, j, &p).abs() < 1e-9);
            for alpha in [[1, 0, 0], [0, 1, 1], [0, 0, 2]] {
                assert!(lp.delta_derivative(&one, j, alpha, &p).unwrap().abs() < 1e-9 * 2f64.powi(2 * j as i32));
            }
        }
        let s = lp.square_sum_grad(&one, 0.5, 0.0, [1, 0, 0], &grid()).unwrap();
        assert!(s.levels.iter().skip(1).all(|v| v.abs() < 1e-12));
        assert!(lp.delta_derivative(&one, 1, [1, 1, 1], &p).is_err());
    }

    #[test]
    fn telescoping_and_reconstruction() {
        let lp = LpDecomposition::new(&LpSpec::default()).unwrap();
        let f = MomentumFunction::new("g", true, |p| (-(p.p[0] * p.p[0] + 2.0 * p.p[1] * p.p[1] + p.p[2] * p.p[2])).exp());
        let p = FourMomentum::on_shell([0.2, 0.1, -0.3]);
        let sum: f64 = (0..=6).map(|j| lp.delta(&f, j, &p)).sum();
        assert!((sum - lp.partial_sum(&f, 6, &p)).abs() < 1e-12);
        let g = grid();
        let errs: Vec<f64> = (0..=6).map(|j| lp.reconstruction_error(&f, j, &g)).collect();
        assert!(errs.windows(2).all(|w| w[1] < w[0]), "{errs:?}");
        assert!(errs[6] < 1e-3);
    }

    #[test]
    fn alpha_zero_is_plain_square_sum() {
        let lp = LpDecomposition::new(&LpSpec { j_max: 4, ..Default::default() }).unwrap();
        let f = MomentumFunction::new("g", true, |p| (-p.p0).exp());
        let g = grid();
        let a = lp.square_sum(&f, 0.5, 1.0, &g).unwrap();
        let b = lp.square_sum_grad(&f, 0.5, 1.0, [0, 0, 0], &g).unwrap();
        assert_eq!(a.total, b.total);
        assert!(lp.project(&f, 5, &g).is_err());
    }
}
