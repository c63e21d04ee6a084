//! The collision operator `Q`, the bilinear form `Γ`, the linearized
//! operator `L = N + K`, the weights `ζ, ζ_K` and the dyadic trilinear pieces.
//!
//! Conventions (`'` = post-collision, `_*` = partner momentum `q`):
//! - `Q(f,h)(p) = ∫dq∫dω v_φσ [f(p')h(q') − f(p)h(q)]`
//! - `Γ(f,h)(p) = ∫dq∫dω v_φσ √J(q)[f(q')h(p') − f(q)h(p)]`
//! - `L f = −Γ(f,√J) − Γ(√J,f)`
//! - `N f = −∫∫ v_φσ (f'−f)√J'_*√J_* + ζ f`, `K f = ζ_K f − Γ(f,√J)`
//! - `ζ = ∫∫ v_φσ (√J_*−√J'_*)²`, `ζ_K = ∫∫ v_φσ (√J_*−√J'_*)√J'_*`

use super::engine::{AngularSpec, CollisionRule, PairGeometry};
use super::function::MomentumFunction;
use super::juttner::Juttner;
use crate::error::{Error, Result};
use crate::geometry::FourMomentum;
use crate::kernel::CollisionKernel;
use crate::quadrature::sum::Accumulator;
use crate::quadrature::{dyadic_sum_terms, DyadicReport, MomentumGrid};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Accumulated shell sums of one quantity.
#[derive(Clone, Debug)]
pub struct ShellSums {
    pub k_min: i32,
    pub slots: Vec<Accumulator>,
    /// Per-shell magnitude of the unpaired gain and loss contributions; a
    /// shell whose paired value is below rounding level of this is noise.
    pub magnitude: Vec<f64>,
}

impl ShellSums {
    pub fn new(k_min: i32, n: usize) -> Self {
        Self { k_min, slots: vec![Accumulator::new(); n], magnitude: vec![0.0; n] }
    }

    #[inline]
    pub fn add(&mut self, slot: usize, v: f64) {
        self.slots[slot].add(v);
    }

    #[inline]
    pub fn add_magnitude(&mut self, slot: usize, v: f64) {
        self.magnitude[slot] += v.abs();
    }

    pub fn merge(&mut self, other: &ShellSums) {
        for (a, b) in self.slots.iter_mut().zip(&other.slots) {
            a.merge(b);
        }
        for (a, b) in self.magnitude.iter_mut().zip(&other.magnitude) {
            *a += b;
        }
    }

    pub fn terms(&self) -> Vec<f64> {
        self.slots.iter().map(Accumulator::value).collect()
    }

    /// Dyadic sum with tail; a non-decaying tail is an error unless it is
    /// negligible against the resolved shells or at rounding level of the
    /// unpaired contributions.
    pub fn report(&self) -> Result<DyadicReport> {
        let terms = self.terms();
        let rep = dyadic_sum_terms(&terms);
        if !rep.converged {
            let mass: f64 = terms.iter().map(|t| t.abs()).sum();
            let last = terms.last().copied().unwrap_or(0.0).abs();
            let noise = 1e-12 * self.magnitude.last().copied().unwrap_or(0.0);
            if last > 1e-6 * mass && last > noise && last > 1e-300 {
                return Err(Error::Convergence(format!(
                    "dyadic shells do not decay (last ratio {:.3}, last term {last:e})",
                    rep.ratio
                )));
            }
            return Ok(DyadicReport { converged: true, ..rep });
        }
        Ok(rep)
    }

    pub fn value(&self) -> Result<f64> {
        Ok(self.report()?.value())
    }
}

/// Per-shell values of the trilinear pieces `T^k_±(f,h,η)`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrilinearShells {
    pub k: Vec<i32>,
    pub plus: Vec<f64>,
    pub minus: Vec<f64>,
    /// `T^k_+ − T^k_−`, paired node by node.
    pub difference: Vec<f64>,
    /// `⟨Γ(f,h),η⟩ = Σ_k (T^k_+ − T^k_−)` including the dyadic tail.
    pub total: f64,
}

/// `⟨Nf,f⟩` split into the semi-norm and the `ζ` part.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct NormPartInner {
    /// `|f|²_B = ½∫∫∫ v_φσ (f'−f)²√(J_*J'_*)`.
    pub seminorm_b: f64,
    /// `∫ ζ|f|² dp`.
    pub zeta_part: f64,
}

impl NormPartInner {
    pub fn total(&self) -> f64 {
        self.seminorm_b + self.zeta_part
    }
}

/// Collision operators evaluated with the reduced `dq dω` quadrature.
pub struct Collision<'a, K: ?Sized> {
    pub rule: CollisionRule<'a, K>,
    /// Grid for the partner momentum `q` (and for outer integrals).
    pub grid: &'a MomentumGrid,
    pub juttner: Juttner,
}

impl<'a, K: CollisionKernel + ?Sized> Collision<'a, K> {
    pub fn new(kernel: &'a K, grid: &'a MomentumGrid, angular: &AngularSpec) -> Result<Self> {
        Ok(Self { rule: CollisionRule::new(kernel, angular)?, grid, juttner: Juttner::new() })
    }

    fn fresh(&self) -> ShellSums {
        ShellSums::new(self.rule.spec.k_min, self.rule.slots())
    }

    /// Folds `M` integrands over `q` and the angular nodes at a fixed `p`:
    /// `out[m][slot] += w_q · w · value[m]`. The integrand also reports the
    /// magnitude of the unpaired parts of each value (used only to recognise
    /// rounding noise; zero is allowed).
    pub fn fold_at<const M: usize>(
        &self,
        p: &FourMomentum,
        integrand: impl Fn(&PairGeometry, &FourMomentum, &FourMomentum, &mut [f64; M], &mut [f64; M]),
    ) -> [ShellSums; M] {
        let mut out: [ShellSums; M] = std::array::from_fn(|_| self.fresh());
        let mut vals = [0.0; M];
        let mut mags = [0.0; M];
        for (q, wq) in self.grid.nodes.iter().zip(&self.grid.weights) {
            let Some(pair) = PairGeometry::new(p, q) else { continue };
            self.rule.for_each_node(&pair, |slot, w, pp, qp| {
                integrand(&pair, pp, qp, &mut vals, &mut mags);
                let ww = wq * w;
                for m in 0..M {
                    out[m].add(slot, ww * vals[m]);
                    out[m].add_magnitude(slot, ww * mags[m]);
                }
            });
        }
        out
    }

    /// Folds over the outer grid too: `Σ_p w_p Σ_q w_q Σ_ω w · value`.
    /// Deterministic: per-`p` partial sums are merged in node order.
    pub fn fold_all<const M: usize>(
        &self,
        outer: &MomentumGrid,
        integrand: impl Fn(&PairGeometry, &FourMomentum, &FourMomentum, &mut [f64; M], &mut [f64; M]) + Sync,
    ) -> [ShellSums; M] {
        let parts: Vec<[ShellSums; M]> = outer
            .nodes
            .par_iter()
            .zip(outer.weights.par_iter())
            .map(|(p, wp)| {
                let mut part = self.fold_at::<M>(p, &integrand);
                for s in part.iter_mut() {
                    for a in s.slots.iter_mut() {
                        let v = a.value() * wp;
                        *a = Accumulator::new();
                        a.add(v);
                    }
                    s.magnitude.iter_mut().for_each(|m| *m *= wp);
                }
                part
            })
            .collect();
        let mut total: [ShellSums; M] = std::array::from_fn(|_| self.fresh());
        for part in &parts {
            for m in 0..M {
                total[m].merge(&part[m]);
            }
        }
        total
    }

    /// `Q(f,h)(p)`.
    pub fn q_omega(&self, f: &MomentumFunction, h: &MomentumFunction, p: &FourMomentum) -> Result<f64> {
        let fp = f.eval(p);
        let [s] = self.fold_at::<1>(p, |pair, pp, qp, out, mag| {
            let (gain, loss) = (f.eval(pp) * h.eval(qp), fp * h.eval(&pair.q));
            out[0] = gain - loss;
            mag[0] = gain.abs() + loss.abs();
        });
        s.value()
    }

    /// `Γ(f,h)(p)`.
    pub fn gamma(&self, f: &MomentumFunction, h: &MomentumFunction, p: &FourMomentum) -> Result<f64> {
        let hp = h.eval(p);
        let j = self.juttner;
        let [s] = self.fold_at::<1>(p, |pair, pp, qp, out, mag| {
            let sq = j.sqrt_j(&pair.q);
            let (gain, loss) = (sq * f.eval(qp) * h.eval(pp), sq * f.eval(&pair.q) * hp);
            out[0] = gain - loss;
            mag[0] = gain.abs() + loss.abs();
        });
        s.value()
    }

    /// `L f(p) = −Γ(f,√J)(p) − Γ(√J,f)(p)`.
    pub fn linearized(&self, f: &MomentumFunction, p: &FourMomentum) -> Result<f64> {
        let j = self.juttner;
        let (fp, sp) = (f.eval(p), j.sqrt_j(p));
        let [s] = self.fold_at::<1>(p, |pair, pp, qp, out, mag| {
            let sq = j.sqrt_j(&pair.q);
            let (a, b) = (sq * f.eval(qp) * j.sqrt_j(pp), sq * f.eval(&pair.q) * sp);
            let (c, d) = (sq * j.sqrt_j(qp) * f.eval(pp), sq * sq * fp);
            out[0] = -(a - b) - (c - d);
            mag[0] = a.abs() + b.abs() + c.abs() + d.abs();
        });
        s.value()
    }

    /// `(N f(p), K f(p))` from a single pass; `L = N + K` node by node.
    pub fn split(&self, f: &MomentumFunction, p: &FourMomentum) -> Result<(f64, f64)> {
        let j = self.juttner;
        let (fp, sp) = (f.eval(p), j.sqrt_j(p));
        let [n, k] = self.fold_at::<2>(p, |pair, pp, qp, out, mag| {
            let (sq, sqp) = (j.sqrt_j(&pair.q), j.sqrt_j(qp));
            let fpp = f.eval(pp);
            out[0] = -(fpp - fp) * sqp * sq + (sq - sqp) * (sq - sqp) * fp;
            let (gain, loss) = (sq * f.eval(qp) * j.sqrt_j(pp), sq * f.eval(&pair.q) * sp);
            out[1] = (sq - sqp) * sqp * fp - (gain - loss);
            mag[0] = (fpp.abs() + fp.abs()) * sqp * sq + (sq * sq + sqp * sqp) * fp.abs();
            mag[1] = (sq + sqp) * sqp * fp.abs() + gain.abs() + loss.abs();
        });
        Ok((n.value()?, k.value()?))
    }

    pub fn n_apply(&self, f: &MomentumFunction, p: &FourMomentum) -> Result<f64> {
        Ok(self.split(f, p)?.0)
    }

    pub fn k_apply(&self, f: &MomentumFunction, p: &FourMomentum) -> Result<f64> {
        Ok(self.split(f, p)?.1)
    }

    /// `(ζ(p), ζ_K(p))`.
    pub fn zeta(&self, p: &FourMomentum) -> Result<(f64, f64)> {
        let j = self.juttner;
        let [z, zk] = self.fold_at::<2>(p, |pair, _, qp, out, mag| {
            let (sq, sqp) = (j.sqrt_j(&pair.q), j.sqrt_j(qp));
            out[0] = (sq - sqp) * (sq - sqp);
            out[1] = (sq - sqp) * sqp;
            mag[0] = sq * sq + sqp * sqp;
            mag[1] = (sq + sqp) * sqp;
        });
        Ok((z.value()?, zk.value()?))
    }

    /// `ζ̃(p) = ∫∫ v_φσ (√J_*−√J'_*)√J_*`, computed independently of the split.
    pub fn zeta_tilde(&self, p: &FourMomentum) -> Result<f64> {
        let j = self.juttner;
        let [z] = self.fold_at::<1>(p, |pair, _, qp, out, mag| {
            let (sq, sqp) = (j.sqrt_j(&pair.q), j.sqrt_j(qp));
            out[0] = (sq - sqp) * sq;
            mag[0] = (sq + sqp) * sq;
        });
        z.value()
    }

    /// `∫ Q(f,f) φ dp` in the symmetric weak form
    /// `½∫∫∫ v_φσ f f_* (φ' + φ'_* − φ − φ_*)` with `p` on `outer` and `q` on the grid.
    pub fn weak_moment(&self, outer: &MomentumGrid, f: &MomentumFunction, phi: impl Fn(&FourMomentum) -> f64 + Sync) -> Result<f64> {
        let [s] = self.fold_all::<1>(outer, |pair, pp, qp, out, mag| {
            let w = 0.5 * f.eval(&pair.p) * f.eval(&pair.q);
            let (after, before) = (phi(pp) + phi(qp), phi(&pair.p) + phi(&pair.q));
            out[0] = w * (after - before);
            mag[0] = w.abs() * (after.abs() + before.abs());
        });
        s.value()
    }

    /// Evaluates a pointwise operator at every node of `grid` (in parallel, ordered).
    pub fn on_grid(&self, grid: &MomentumGrid, op: impl Fn(&FourMomentum) -> Result<f64> + Sync) -> Result<Vec<f64>> {
        grid.nodes.par_iter().map(|p| op(p)).collect()
    }

    /// `T^k_±(f,h,η)` per shell on the outer grid:
    /// `T^k_+ = ∫∫∫ v_φσ_k η(p')√J(q') f(q)h(p)`, `T^k_− = ∫∫∫ v_φσ_k η(p)√J(q) f(q)h(p)`.
    pub fn trilinear(
        &self,
        outer: &MomentumGrid,
        f: &MomentumFunction,
        h: &MomentumFunction,
        eta: &MomentumFunction,
    ) -> Result<TrilinearShells> {
        let j = self.juttner;
        let [plus, minus, diff] = self.fold_all::<3>(outer, |pair, pp, qp, out, mag| {
            let w = f.eval(&pair.q) * h.eval(&pair.p);
            let gain = w * eta.eval(pp) * j.sqrt_j(qp);
            let loss = w * eta.eval(&pair.p) * j.sqrt_j(&pair.q);
            out[0] = gain;
            out[1] = loss;
            out[2] = gain - loss;
            mag[2] = gain.abs() + loss.abs();
        });
        let k: Vec<i32> = (0..self.rule.slots()).map(|i| self.rule.slot_k(i)).collect();
        Ok(TrilinearShells { k, plus: plus.terms(), minus: minus.terms(), difference: diff.terms(), total: diff.value()? })
    }

    /// `⟨Nf, f⟩` in its symmetric (sum of squares) form.
    pub fn inner_n(&self, outer: &MomentumGrid, f: &MomentumFunction) -> Result<NormPartInner> {
        let j = self.juttner;
        let [b, z] = self.fold_all::<2>(outer, |pair, pp, qp, out, mag| {
            let (sq, sqp) = (j.sqrt_j(&pair.q), j.sqrt_j(qp));
            let (fpp, fp) = (f.eval(pp), f.eval(&pair.p));
            let d = fpp - fp;
            out[0] = 0.5 * d * d * sq * sqp;
            out[1] = (sq - sqp) * (sq - sqp) * fp * fp;
            mag[0] = 0.5 * (fpp * fpp + fp * fp) * sq * sqp;
            mag[1] = (sq * sq + sqp * sqp) * fp * fp;
        });
        Ok(NormPartInner { seminorm_b: b.value()?, zeta_part: z.value()? })
    }

    /// `⟨Kf, f⟩ = ∫ f·Kf dp`, from the pointwise `K`.
    pub fn inner_k(&self, outer: &MomentumGrid, f: &MomentumFunction) -> Result<f64> {
        let j = self.juttner;
        let [s] = self.fold_all::<1>(outer, |pair, pp, qp, out, mag| {
            let (sq, sqp) = (j.sqrt_j(&pair.q), j.sqrt_j(qp));
            let fp = f.eval(&pair.p);
            let (gain, loss) = (sq * f.eval(qp) * j.sqrt_j(pp), sq * f.eval(&pair.q) * j.sqrt_j(&pair.p));
            out[0] = fp * ((sq - sqp) * sqp * fp - (gain - loss));
            mag[0] = fp.abs() * ((sq + sqp) * sqp * fp.abs() + gain.abs() + loss.abs());
        });
        s.value()
    }

    /// `⟨Γ(f,h), η⟩` on the outer grid.
    pub fn gamma_inner(
        &self,
        outer: &MomentumGrid,
        f: &MomentumFunction,
        h: &MomentumFunction,
        eta: &MomentumFunction,
    ) -> Result<f64> {
        Ok(self.trilinear(outer, f, h, eta)?.total)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{KernelSpec, PowerLawKernel};
    use crate::quadrature::MomentumGridSpec;

    fn small_grid() -> MomentumGrid {
        MomentumGrid::new(&MomentumGridSpec { radial_nodes: 8, sphere_theta: 2, sphere_phi: 4, ..Default::default() }).unwrap()
    }

    fn points() -> Vec<FourMomentum> {
        vec![
            FourMomentum::on_shell([0.0, 0.0, 0.0]),
            FourMomentum::on_shell([0.7, -0.2, 0.4]),
            FourMomentum::on_shell([3.0, 1.0, -2.0]),
        ]
    }

    #[test]
    fn equilibrium_and_null_space_are_annihilated() {
        let kern = PowerLawKernel::new(KernelSpec::default()).unwrap();
        let grid = small_grid();
        let c = Collision::new(&kern, &grid, &AngularSpec::default()).unwrap();
        let j = c.juttner;
        let jj = MomentumFunction::juttner(j);
        let nulls: Vec<MomentumFunction> = vec![
            MomentumFunction::sqrt_juttner(j),
            MomentumFunction::sqrt_j_times("p1", j, |p| p.p[0]),
            MomentumFunction::sqrt_j_times("p2", j, |p| p.p[1]),
            MomentumFunction::sqrt_j_times("p3", j, |p| p.p[2]),
            MomentumFunction::sqrt_j_times("p0", j, |p| p.p0),
        ];
        let generic = MomentumFunction::sqrt_j_times("generic", j, |p| 1.0 + p.p[0] * p.p[1] + 0.3 * p.p0 * p.p0);
        for p in points() {
            let qjj = c.q_omega(&jj, &jj, &p).unwrap();
            let loss = c.q_omega(&jj, &jj.times(&MomentumFunction::new("w", false, |p| 1.0 + p.p[0] * p.p[0])), &p).unwrap().abs();
            assert!(qjj.abs() <= 1e-10 * loss, "{qjj} vs {loss}");
            let scale = c.linearized(&generic, &p).unwrap().abs();
            assert!(scale > 1e-6);
            for e in &nulls {
                let v = c.linearized(e, &p).unwrap();
                assert!(v.abs() <= 1e-10 * scale, "{}: {v}", e.name);
            }
        }
    }

    #[test]
    fn split_and_weights_are_consistent() {
        let kern = PowerLawKernel::new(KernelSpec::default()).unwrap();
        let grid = small_grid();
        let c = Collision::new(&kern, &grid, &AngularSpec::default()).unwrap();
        let j = c.juttner;
        let f = MomentumFunction::new("f", true, |p| (-(p.p[0] - 0.5).powi(2) - p.p[1] * p.p[1] - p.p[2] * p.p[2]).exp());
        for p in points() {
            let l = c.linearized(&f, &p).unwrap();
            let (n, k) = c.split(&f, &p).unwrap();
            assert!((n + k - l).abs() <= 1e-8 * (n.abs() + k.abs()).max(1e-300), "{l} vs {n} + {k}");
            let (z, zk) = c.zeta(&p).unwrap();
            let zt = c.zeta_tilde(&p).unwrap();
            assert!(z > 0.0);
            assert!((z + zk - zt).abs() <= 1e-9 * zt.abs());
        }
        let _ = j;
        let zero = MomentumFunction::zero();
        let inner = c.inner_n(&grid, &zero).unwrap();
        assert_eq!(inner.total(), 0.0);
        let inner = c.inner_n(&grid, &f).unwrap();
        assert!(inner.seminorm_b > 0.0 && inner.zeta_part > 0.0);
    }

    #[test]
    fn trilinear_of_equilibrium_vanishes() {
        let kern = PowerLawKernel::new(KernelSpec::default()).unwrap();
        let grid = small_grid();
        let c = Collision::new(&kern, &grid, &AngularSpec::default()).unwrap();
        let s = MomentumFunction::sqrt_juttner(c.juttner);
        let t = c.trilinear(&grid, &s, &s, &s).unwrap();
        let scale: f64 = t.minus.iter().map(|v| v.abs()).sum();
        assert!(t.total.abs() <= 1e-10 * scale, "{} vs {scale}", t.total);
        assert_eq!(t.k.len(), t.plus.len());
    }

    #[test]
    fn weak_moments_conserve_collision_invariants() {
        let kern = PowerLawKernel::new(KernelSpec::default()).unwrap();
        let grid = small_grid();
        let c = Collision::new(&kern, &grid, &AngularSpec::default()).unwrap();
        let f = MomentumFunction::new("f", true, |p| (-(p.p[0] - 0.5).powi(2) - p.p[1] * p.p[1] - p.p[2] * p.p[2]).exp());
        let generic = c.weak_moment(&grid, &f, |p| p.p0 * p.p0).unwrap();
        assert!(generic.abs() > 1e-6, "non-invariant moment {generic}");
        for (name, phi) in [("1", 0usize), ("p1", 1), ("p2", 2), ("p3", 3), ("p0", 4)] {
            let v = c.weak_moment(&grid, &f, |p| match phi {
                0 => 1.0,
                4 => p.p0,
                i => p.p[i - 1],
            })
            .unwrap();
            assert!(v.abs() <= 1e-10 * generic.abs(), "{name}: {v}");
        }
    }
}
