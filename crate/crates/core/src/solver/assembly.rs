//! One-time assembly of the Galerkin matrices and the `Γ` tensor.
//!
//! All collision matrices come from quadratures over `(p, q, ω)` on a coarse
//! assembly grid, in forms that keep the structure exact:
//! `⟨Lφ_n, φ_m⟩ = ¼∫∫∫ v_φσ J J_* ΔP_m ΔP_n` is a sum of squares with the
//! collision invariants in its kernel, and `⟨Nφ_n, φ_m⟩` uses the symmetric
//! form `½∫∫∫ v_φσ (φ_n'−φ_n)(φ_m'−φ_m)√(J_*J'_*) + ∫ζφ_nφ_m`.

use super::basis::{polynomials, BASIS_LEN, NULL_INDICES};
use crate::collision::{AngularSpec, CollisionRule, Juttner, PairGeometry};
use crate::error::{Error, Result};
use crate::kernel::{KernelSpec, PowerLawKernel};
use crate::norms::{fractional_gram, FractionalSpec};
use crate::quadrature::{MomentumGrid, MomentumGridSpec};
use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::time::Instant;

const B: usize = BASIS_LEN;

/// Resolution of the operator assembly.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AssemblySpec {
    pub grid: MomentumGridSpec,
    pub angular: AngularSpec,
    pub fractional: FractionalSpec,
}

impl Default for AssemblySpec {
    fn default() -> Self {
        Self {
            grid: MomentumGridSpec { radial_nodes: 10, radial_panels: 1, breakpoints: vec![], sphere_theta: 3, sphere_phi: 6, r_max: 24.0 },
            angular: AngularSpec { k_min: -6, k_max: 10, shell_theta: 3, shell_phi_small: 6, shell_phi: 8, regular_theta: 6, regular_phi: 8 },
            fractional: FractionalSpec { k_max: 10, shell_nodes: 3, sphere_theta: 3, sphere_phi: 6 },
        }
    }
}

impl AssemblySpec {
    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        self.angular.validate()?;
        self.fractional.validate()
    }

    /// Twice the momentum resolution: radial nodes of the grid.
    pub fn refined(&self) -> Self {
        Self { grid: self.grid.refined(), ..self.clone() }
    }
}

/// Galerkin matrices of the linearized problem in the basis of [`super::basis`].
#[derive(Clone, Debug)]
pub struct GalerkinOperators {
    pub kernel: KernelSpec,
    pub spec: AssemblySpec,
    /// `M_mn = ⟨φ_n, φ_m⟩`.
    pub mass: DMatrix<f64>,
    /// `T^i_mn = ⟨p̂_i φ_n, φ_m⟩`.
    pub transport: [DMatrix<f64>; 3],
    /// `⟨Lφ_n, φ_m⟩`, with exact zero rows and columns on the collision invariants.
    pub linear: DMatrix<f64>,
    /// `⟨Nφ_n, φ_m⟩`.
    pub norm_part: DMatrix<f64>,
    /// `⟨Kφ_n, φ_m⟩ = L − N`.
    pub compact: DMatrix<f64>,
    /// `⟨Γ(φ_n, φ_l), φ_m⟩` symmetrised in `(n, l)`, row-major `[m][n][l]`.
    /// Rows of the collision invariants are zero (conservation of `Γ`).
    pub gamma: Vec<f64>,
    /// Gram matrix of `|·|²_{I^{a,γ}}`.
    pub iag: DMatrix<f64>,
    /// Gram matrix of `|·|²_{L²_{(a+γ)/2}}`.
    pub l2_weighted: DMatrix<f64>,
    pub juttner: Juttner,
    /// Wall-clock assembly time.
    pub assembly_seconds: f64,
}

/// Per-outer-node partial sums.
struct Partial {
    lin: Vec<f64>,
    norm: Vec<f64>,
    zeta: f64,
    bracket: Vec<f64>,
}

impl GalerkinOperators {
    pub fn assemble(kernel: &KernelSpec, spec: &AssemblySpec) -> Result<Self> {
        spec.validate()?;
        let start = Instant::now();
        let kern = PowerLawKernel::new(kernel.clone())?;
        let rule = CollisionRule::new(&kern, &spec.angular)?;
        let grid = MomentumGrid::new(&spec.grid)?;
        let j = Juttner::new();
        let polys: Vec<[f64; B]> = grid.nodes.iter().map(polynomials).collect();
        let sj: Vec<f64> = grid.nodes.iter().map(|p| j.sqrt_j(p)).collect();
        let phi = |i: usize| -> [f64; B] { polys[i].map(|v| v * sj[i]) };

        let mut mass = DMatrix::zeros(B, B);
        let mut transport = [DMatrix::zeros(B, B), DMatrix::zeros(B, B), DMatrix::zeros(B, B)];
        let e = 0.5 * (kernel.a + kernel.gamma);
        let mut l2w = DMatrix::zeros(B, B);
        for (i, (p, w)) in grid.nodes.iter().zip(&grid.weights).enumerate() {
            let f = phi(i);
            let we = w * p.p0.powf(e);
            for m in 0..B {
                for n in 0..B {
                    let v = f[m] * f[n];
                    mass[(m, n)] += w * v;
                    l2w[(m, n)] += we * v;
                    for (d, t) in transport.iter_mut().enumerate() {
                        t[(m, n)] += w * p.p[d] / p.p0 * v;
                    }
                }
            }
        }

        let partials: Vec<Partial> = (0..grid.len())
            .into_par_iter()
            .map(|ip| {
                let p = &grid.nodes[ip];
                let (pp_, sp) = (&polys[ip], sj[ip]);
                let fp = phi(ip);
                let mut part = Partial { lin: vec![0.0; B * B], norm: vec![0.0; B * B], zeta: 0.0, bracket: vec![0.0; B * B] };
                for (iq, (q, wq)) in grid.nodes.iter().zip(&grid.weights).enumerate() {
                    let Some(pair) = PairGeometry::new(p, q) else { continue };
                    let (pq, sq) = (&polys[iq], sj[iq]);
                    let fq = phi(iq);
                    rule.for_each_node(&pair, |_, w, ppost, qpost| {
                        let ww = wq * w;
                        let (a, b) = (polynomials(ppost), polynomials(qpost));
                        let (spp, sqp) = (j.sqrt_j(ppost), j.sqrt_j(qpost));
                        let mut dp = [0.0; B];
                        let mut dphi = [0.0; B];
                        let mut fqp = [0.0; B];
                        let mut fpp = [0.0; B];
                        for n in 0..B {
                            dp[n] = a[n] + b[n] - pp_[n] - pq[n];
                            fpp[n] = a[n] * spp;
                            fqp[n] = b[n] * sqp;
                            dphi[n] = fpp[n] - fp[n];
                        }
                        let wl = 0.25 * ww * sp * sq * spp * sqp;
                        let wn = 0.5 * ww * sq * sqp;
                        let wg = ww * sq;
                        for m in 0..B {
                            let (lm, nm) = (wl * dp[m], wn * dphi[m]);
                            let row = m * B;
                            for n in m..B {
                                part.lin[row + n] += lm * dp[n];
                                part.norm[row + n] += nm * dphi[n];
                            }
                            let (gu, gs) = (wg * fqp[m], wg * fq[m]);
                            for l in 0..B {
                                part.bracket[row + l] += gu * fpp[l] - gs * fp[l];
                            }
                        }
                        let dz = sq - sqp;
                        part.zeta += ww * dz * dz;
                    });
                }
                part
            })
            .collect();

        let mut linear = DMatrix::zeros(B, B);
        let mut norm_part = DMatrix::zeros(B, B);
        let mut gamma = vec![0.0; B * B * B];
        for (ip, part) in partials.iter().enumerate() {
            let wp = grid.weights[ip];
            let fp = phi(ip);
            for m in 0..B {
                for n in m..B {
                    linear[(m, n)] += wp * part.lin[m * B + n];
                    norm_part[(m, n)] += wp * (part.norm[m * B + n] + part.zeta * fp[m] * fp[n]);
                }
                let wm = wp * fp[m];
                for nl in 0..B * B {
                    gamma[m * B * B + nl] += wm * part.bracket[nl];
                }
            }
        }
        for m in 0..B {
            for n in 0..m {
                linear[(m, n)] = linear[(n, m)];
                norm_part[(m, n)] = norm_part[(n, m)];
            }
        }
        for &i in &NULL_INDICES {
            for n in 0..B {
                linear[(i, n)] = 0.0;
                linear[(n, i)] = 0.0;
            }
            gamma[i * B * B..(i + 1) * B * B].iter_mut().for_each(|v| *v = 0.0);
        }
        for m in 0..B {
            for n in 0..B {
                for l in 0..n {
                    let (a, b) = (m * B * B + n * B + l, m * B * B + l * B + n);
                    let s = 0.5 * (gamma[a] + gamma[b]);
                    gamma[a] = s;
                    gamma[b] = s;
                }
            }
        }
        let compact = &linear - &norm_part;

        let basis = |p: &crate::geometry::FourMomentum, out: &mut [f64]| {
            let s = j.sqrt_j(p);
            for (o, v) in out.iter_mut().zip(polynomials(p)) {
                *o = v * s;
            }
        };
        let diff = fractional_gram(basis, B, 0.5 * e, kernel.gamma, &grid, &spec.fractional)?;
        let iag = &l2w + DMatrix::from_row_slice(B, B, &diff);

        let ops = Self {
            kernel: kernel.clone(),
            spec: spec.clone(),
            mass,
            transport,
            linear,
            norm_part,
            compact,
            gamma,
            iag,
            l2_weighted: l2w,
            juttner: j,
            assembly_seconds: start.elapsed().as_secs_f64(),
        };
        ops.check()?;
        Ok(ops)
    }

    fn check(&self) -> Result<()> {
        let all = [&self.mass, &self.linear, &self.norm_part, &self.iag];
        if all.iter().any(|m| m.iter().any(|v| !v.is_finite())) || self.gamma.iter().any(|v| !v.is_finite()) {
            return Err(Error::NotFinite("Galerkin assembly".into()));
        }
        let eig = self.mass.clone().symmetric_eigenvalues();
        let (lo, hi) = (eig.min(), eig.max());
        if !(lo > 0.0) || hi / lo > 1e12 {
            return Err(Error::Conditioning(format!("mass matrix eigenvalues in [{lo:e}, {hi:e}]")));
        }
        Ok(())
    }

    /// `⟨Γ(f,h), φ_m⟩` for real coefficient vectors.
    pub fn gamma_apply(&self, f: &[f64], h: &[f64], out: &mut [f64]) {
        for (m, o) in out.iter_mut().enumerate() {
            let block = &self.gamma[m * B * B..(m + 1) * B * B];
            let mut acc = 0.0;
            for n in 0..B {
                if f[n] == 0.0 {
                    continue;
                }
                let row = &block[n * B..(n + 1) * B];
                acc += f[n] * row.iter().zip(h).map(|(g, x)| g * x).sum::<f64>();
            }
            *o = acc;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::basis::{IDX_A, IDX_C, IDX_IC};

    fn ops() -> GalerkinOperators {
        let spec = AssemblySpec {
            grid: MomentumGridSpec { radial_nodes: 6, ..AssemblySpec::default().grid },
            angular: AngularSpec { k_min: -4, k_max: 6, shell_theta: 2, shell_phi_small: 4, shell_phi: 6, ..AssemblySpec::default().angular },
            ..AssemblySpec::default()
        };
        GalerkinOperators::assemble(&KernelSpec::default(), &spec).unwrap()
    }

    #[test]
    fn structure_of_assembled_operators() {
        let o = ops();
        assert!((o.mass[(IDX_A, IDX_A)] - 1.0).abs() < 2e-2, "{}", o.mass[(IDX_A, IDX_A)]);
        let eig_l = o.linear.clone().symmetric_eigenvalues();
        let eig_n = o.norm_part.clone().symmetric_eigenvalues();
        let scale = eig_l.max();
        assert!(eig_l.min() > -1e-12 * scale, "L not PSD: {}", eig_l.min());
        assert!(eig_n.min() > 0.0, "N not positive: {}", eig_n.min());
        // exactly five null directions
        let small = eig_l.iter().filter(|v| v.abs() <= 1e-10 * scale).count();
        assert_eq!(small, 5);
        for t in &o.transport {
            assert!((t - t.transpose()).amax() < 1e-14);
        }
        // Γ(√J, √J) = 0 and conservation rows
        let mut sq = [0.0; B];
        sq[IDX_A] = 1.0;
        let mut out = [0.0; B];
        o.gamma_apply(&sq, &sq, &mut out);
        let gscale = o.gamma.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        assert!(out.iter().all(|v| v.abs() <= 1e-9 * gscale), "{out:?}");
        let mut f = [0.0; B];
        f[IDX_C] = 0.3;
        f[IDX_IC] = -0.2;
        f[14] = 0.7;
        o.gamma_apply(&f, &f, &mut out);
        for &i in &NULL_INDICES {
            assert_eq!(out[i], 0.0);
        }
        assert!(out.iter().any(|v| v.abs() > 0.0));
        assert!(o.assembly_seconds >= 0.0);
    }
}
