//! Hydrodynamic part of the perturbation: `λ`-moments, the projection `P`
//! onto the collision invariants, expansion coefficients in the macroscopic
//! basis, residuals of the local conservation laws and the interaction
//! potential.
//!
//! `Pf = (A + B·p + C p⁰)√J`. All field quantities are Fourier coefficients
//! in `x` on the solver's box.

use crate::collision::{Juttner, MomentumFunction};
use crate::error::{Error, Result};
use crate::quadrature::{integrate_momentum, MomentumGrid};
use crate::solver::basis::{ij_index, polynomials, BASIS_LEN, IDX_A, IDX_C, IDX_IA, IDX_IC, IDX_IJ, MACRO_LEN, NULL_INDICES};
use crate::solver::{DistributionField, Solver, SolverConfig};
use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::Path;

const B: usize = BASIS_LEN;
const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

/// Moments of the normalised Jüttner distribution.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LambdaMoments {
    /// `∫ J dp` (one up to quadrature error).
    pub total: f64,
    /// `λ₀ = ∫ p⁰ J`.
    pub lambda_0: f64,
    /// `λ₀₀ = ∫ (p⁰)² J`.
    pub lambda_00: f64,
    /// `λ₁ = ∫ p₁² J`.
    pub lambda_1: f64,
    /// `λ₁₀ = ∫ p₁²/p⁰ J`.
    pub lambda_10: f64,
    /// `λ₁₂ = ∫ p₁²p₂²/(p⁰)² J`.
    pub lambda_12: f64,
    /// `λ₁₁ = ∫ p₁⁴/(p⁰)² J`.
    pub lambda_11: f64,
    /// `λ₁₀₀ = ∫ p₁²/(p⁰)² J`.
    pub lambda_100: f64,
}

impl LambdaMoments {
    /// Values from one-dimensional radial reductions in extended precision.
    pub const REFERENCE: LambdaMoments = LambdaMoments {
        total: 1.0,
        lambda_0: 3.370_441_174_631_417_9,
        lambda_00: 14.111_323_523_894_254,
        lambda_1: 4.370_441_174_631_417_9,
        lambda_10: 1.0,
        lambda_12: 0.818_648_148_004_679_7,
        lambda_11: 2.455_944_444_014_039,
        lambda_100: 0.277_200_434_608_019_6,
    };

    /// Checks positivity and `λ₀₀ > λ₀²`.
    pub fn validate(&self) -> Result<()> {
        let all = [self.total, self.lambda_0, self.lambda_00, self.lambda_1, self.lambda_10, self.lambda_12, self.lambda_11, self.lambda_100];
        if all.iter().any(|v| !(*v > 0.0)) {
            return Err(Error::Consistency("non-positive λ-moment".into()));
        }
        if !(self.lambda_00 > self.lambda_0 * self.lambda_0) {
            return Err(Error::Consistency("λ₀₀ ≤ λ₀²".into()));
        }
        Ok(())
    }

    /// The same moments read off a Galerkin mass matrix (same quadrature as the solver).
    pub fn from_mass(mass: &DMatrix<f64>) -> Self {
        let d = |i: usize| mass[(i, i)];
        Self {
            total: d(IDX_A),
            lambda_0: mass[(IDX_A, IDX_C)],
            lambda_00: d(IDX_C),
            lambda_1: d(IDX_IC),
            lambda_10: mass[(IDX_IA, IDX_IC)],
            lambda_12: d(IDX_IJ + ij_index(0, 1)),
            lambda_11: d(IDX_IJ + ij_index(0, 0)),
            lambda_100: d(IDX_IA),
        }
    }
}

/// `λ`-moments by quadrature on `grid`.
pub fn lambda_moments(grid: &MomentumGrid) -> Result<LambdaMoments> {
    let j = Juttner::new();
    let m = |w: fn(&[f64; 3], f64) -> f64| integrate_momentum(|p| w(&p.p, p.p0) * j.j(p), grid);
    let out = LambdaMoments {
        total: m(|_, _| 1.0)?,
        lambda_0: m(|_, e| e)?,
        lambda_00: m(|_, e| e * e)?,
        lambda_1: m(|p, _| p[0] * p[0])?,
        lambda_10: m(|p, e| p[0] * p[0] / e)?,
        lambda_12: m(|p, e| p[0] * p[0] * p[1] * p[1] / (e * e))?,
        lambda_11: m(|p, e| p[0].powi(4) / (e * e))?,
        lambda_100: m(|p, e| p[0] * p[0] / (e * e))?,
    };
    out.validate()?;
    Ok(out)
}

/// Largest relative difference between the `p₁²`, `p₂²` and `p₃²` moments.
pub fn isotropy_defect(grid: &MomentumGrid) -> Result<f64> {
    let j = Juttner::new();
    let mut v = [0.0; 3];
    for (i, vi) in v.iter_mut().enumerate() {
        *vi = integrate_momentum(|p| p.p[i] * p.p[i] * j.j(p), grid)?;
    }
    Ok(((v[0] - v[1]).abs().max((v[0] - v[2]).abs())) / v[0])
}

/// Gram matrix of the macroscopic basis with a monitored Cholesky factor.
#[derive(Clone, Debug)]
pub struct MacroBasis {
    pub gram: DMatrix<f64>,
    /// Ratio of extreme eigenvalues.
    pub condition: f64,
    factor: Cholesky<f64, Dyn>,
}

impl MacroBasis {
    /// Largest accepted condition number.
    pub const MAX_CONDITION: f64 = 1e8;

    /// From a Galerkin mass matrix whose leading block is the macroscopic basis.
    pub fn from_mass(mass: &DMatrix<f64>) -> Result<Self> {
        Self::new(mass.view((0, 0), (MACRO_LEN, MACRO_LEN)).into_owned())
    }

    /// Gram matrix `⟨e_j, e_k⟩` on a momentum grid.
    pub fn on_grid(grid: &MomentumGrid) -> Result<Self> {
        let j = Juttner::new();
        let mut gram = DMatrix::zeros(MACRO_LEN, MACRO_LEN);
        for (p, w) in grid.nodes.iter().zip(&grid.weights) {
            let v = polynomials(p);
            let jp = j.j(p);
            for a in 0..MACRO_LEN {
                for b in 0..MACRO_LEN {
                    gram[(a, b)] += w * jp * v[a] * v[b];
                }
            }
        }
        Self::new(gram)
    }

    fn new(gram: DMatrix<f64>) -> Result<Self> {
        let eig = gram.clone().symmetric_eigenvalues();
        let (lo, hi) = (eig.min(), eig.max());
        let condition = if lo > 0.0 { hi / lo } else { f64::INFINITY };
        if !(condition <= Self::MAX_CONDITION) {
            return Err(Error::Conditioning(format!("macroscopic Gram matrix has condition {condition:.3e}")));
        }
        let factor = gram.clone().cholesky().ok_or_else(|| Error::Conditioning("macroscopic Gram matrix is not positive definite".into()))?;
        Ok(Self { gram, condition, factor })
    }

    /// Coefficients `x` with `Σ_k x_k⟨e_k, e_j⟩ = loads_j`.
    pub fn solve(&self, loads: &[Complex64]) -> Vec<Complex64> {
        let re = self.factor.solve(&DVector::from_iterator(MACRO_LEN, loads.iter().map(|c| c.re)));
        let im = self.factor.solve(&DVector::from_iterator(MACRO_LEN, loads.iter().map(|c| c.im)));
        re.iter().zip(im.iter()).map(|(a, b)| Complex64::new(*a, *b)).collect()
    }
}

/// Coefficients of `Pf = (A + B·p + C p⁰)√J` for a function of `p` alone.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProjectionCoefficients {
    pub a: f64,
    pub b: [f64; 3],
    pub c: f64,
}

/// `⟨f, √J⟩`, `⟨f, p_i√J⟩`, `⟨f, p⁰√J⟩` in the order of [`NULL_INDICES`].
fn invariant_loads(f: &MomentumFunction, grid: &MomentumGrid) -> Result<[f64; 5]> {
    let j = Juttner::new();
    let mut out = [0.0; 5];
    for (k, &idx) in NULL_INDICES.iter().enumerate() {
        out[k] = integrate_momentum(|p| f.eval(p) * polynomials(p)[idx] * j.sqrt_j(p), grid)?;
    }
    Ok(out)
}

fn closed_form(loads: &[f64; 5], l: &LambdaMoments) -> ProjectionCoefficients {
    let c = (loads[4] - l.lambda_0 * loads[0]) / (l.lambda_00 - l.lambda_0 * l.lambda_0);
    ProjectionCoefficients { a: loads[0] - l.lambda_0 * c, b: [loads[1], loads[2], loads[3]].map(|v| v / l.lambda_1), c }
}

fn invariant_gram(mass: &DMatrix<f64>) -> Result<Cholesky<f64, Dyn>> {
    DMatrix::from_fn(5, 5, |a, b| mass[(NULL_INDICES[a], NULL_INDICES[b])])
        .cholesky()
        .ok_or_else(|| Error::Conditioning("invariant Gram matrix is not positive definite".into()))
}

/// Projection of a function of `p`: the closed-form coefficients (exact
/// `λ`-moments, `∫J = 1`) and the discrete ones from the 5×5 Gram solve on
/// `grid`, which make `P` an exact projection on the grid.
pub fn project_function(f: &MomentumFunction, grid: &MomentumGrid) -> Result<(ProjectionCoefficients, ProjectionCoefficients)> {
    let loads = invariant_loads(f, grid)?;
    let closed = closed_form(&loads, &LambdaMoments::REFERENCE);
    let j = Juttner::new();
    let mut mass = DMatrix::zeros(B, B);
    for (p, w) in grid.nodes.iter().zip(&grid.weights) {
        let v = polynomials(p);
        for &a in &NULL_INDICES {
            for &b in &NULL_INDICES {
                mass[(a, b)] += w * j.j(p) * v[a] * v[b];
            }
        }
    }
    let x = invariant_gram(&mass)?.solve(&DVector::from_column_slice(&loads));
    Ok((closed, ProjectionCoefficients { a: x[0], b: [x[1], x[2], x[3]], c: x[4] }))
}

/// `Pf` as a function of `p`.
pub fn projection_function(c: &ProjectionCoefficients) -> MomentumFunction {
    let (c, j) = (*c, Juttner::new());
    MomentumFunction::new("Pf", true, move |p| (c.a + c.b[0] * p.p[0] + c.b[1] * p.p[1] + c.b[2] * p.p[2] + c.c * p.p0) * j.sqrt_j(p))
}

/// Fourier coefficients of the macroscopic fields `A`, `B_i`, `C`.
#[derive(Clone, Debug, PartialEq)]
pub struct MacroCoefficients {
    pub n_x: usize,
    pub box_length: f64,
    pub a: Vec<Complex64>,
    pub b: [Vec<Complex64>; 3],
    pub c: Vec<Complex64>,
}

impl MacroCoefficients {
    /// Spatial means `(A, B₁, B₂, B₃, C)` (the `k = 0` coefficients).
    pub fn means(&self, template: &DistributionField) -> [f64; 5] {
        let i = template.mean_index();
        [self.a[i].re, self.b[0][i].re, self.b[1][i].re, self.b[2][i].re, self.c[i].re]
    }

    /// Values `(x, A, B, C)` on the uniform grid with `points` nodes per axis.
    pub fn sample(&self, points: usize) -> Vec<([f64; 3], [f64; 5])> {
        let template = DistributionField::zeros(self.n_x, self.box_length);
        let h = self.box_length / points as f64;
        let mut out = Vec::with_capacity(points.pow(3));
        for i0 in 0..points {
            for i1 in 0..points {
                for i2 in 0..points {
                    let x = [i0 as f64 * h, i1 as f64 * h, i2 as f64 * h];
                    let mut v = [0.0; 5];
                    for m in 0..template.n_modes() {
                        let xi = template.wavenumber(m);
                        let e = Complex64::from_polar(1.0, xi[0] * x[0] + xi[1] * x[1] + xi[2] * x[2]);
                        let fields = [self.a[m], self.b[0][m], self.b[1][m], self.b[2][m], self.c[m]];
                        for (vv, c) in v.iter_mut().zip(fields) {
                            *vv += (c * e).re;
                        }
                    }
                    out.push((x, v));
                }
            }
        }
        out
    }

    /// CSV with columns `x1,x2,x3,A,B1,B2,B3,C`; `preamble` lines are written as `#` comments.
    pub fn write_csv(&self, path: &Path, points: usize, preamble: &[String]) -> Result<()> {
        let mut file = std::fs::File::create(path)?;
        for line in preamble {
            writeln!(file, "# {line}")?;
        }
        let mut w = csv::Writer::from_writer(file);
        let ser = |e: csv::Error| Error::Serialization(e.to_string());
        w.write_record(["x1", "x2", "x3", "A", "B1", "B2", "B3", "C"]).map_err(ser)?;
        for (x, v) in self.sample(points) {
            let row: Vec<String> = x.iter().chain(v.iter()).map(|a| format!("{a:.12e}")).collect();
            w.write_record(&row).map_err(ser)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// `(Pf, A, B, C)` by the Gram solve on the solver's quadrature, mode by mode;
/// `P(Pf) = Pf` holds exactly.
pub fn project_p(solver: &Solver, f: &DistributionField) -> Result<(DistributionField, MacroCoefficients)> {
    let factor = invariant_gram(&solver.ops.mass)?;
    let mass = &solver.ops.mass;
    let mut pf = DistributionField { coeffs: vec![ZERO; f.coeffs.len()], ..f.clone() };
    let n = f.n_modes();
    let mut mc = MacroCoefficients {
        n_x: f.n_x,
        box_length: f.box_length,
        a: vec![ZERO; n],
        b: [vec![ZERO; n], vec![ZERO; n], vec![ZERO; n]],
        c: vec![ZERO; n],
    };
    for i in 0..n {
        let c = f.mode(i);
        let loads: Vec<Complex64> = NULL_INDICES.iter().map(|&r| (0..B).map(|k| mass[(r, k)] * c[k]).sum()).collect();
        let re = factor.solve(&DVector::from_iterator(5, loads.iter().map(|v| v.re)));
        let im = factor.solve(&DVector::from_iterator(5, loads.iter().map(|v| v.im)));
        let x: Vec<Complex64> = (0..5).map(|k| Complex64::new(re[k], im[k])).collect();
        for (k, &idx) in NULL_INDICES.iter().enumerate() {
            pf.mode_mut(i)[idx] = x[k];
        }
        mc.a[i] = x[0];
        for d in 0..3 {
            mc.b[d][i] = x[1 + d];
        }
        mc.c[i] = x[4];
    }
    Ok((pf, mc))
}

/// Closed-form coefficients `C = ⟨f,(p⁰−λ₀)√J⟩/(λ₀₀−λ₀²)`, `A = ⟨f,√J⟩ − λ₀C`,
/// `B_i = ⟨f,p_i√J⟩/λ₁` with the given moments (these formulas assume `∫J = 1`).
pub fn project_p_closed_form(solver: &Solver, f: &DistributionField, l: &LambdaMoments) -> MacroCoefficients {
    let mass = &solver.ops.mass;
    let n = f.n_modes();
    let mut mc = MacroCoefficients {
        n_x: f.n_x,
        box_length: f.box_length,
        a: vec![ZERO; n],
        b: [vec![ZERO; n], vec![ZERO; n], vec![ZERO; n]],
        c: vec![ZERO; n],
    };
    for i in 0..n {
        let c = f.mode(i);
        let load = |r: usize| -> Complex64 { (0..B).map(|k| mass[(r, k)] * c[k]).sum() };
        let cc = (load(IDX_C) - l.lambda_0 * load(IDX_A)) / (l.lambda_00 - l.lambda_0 * l.lambda_0);
        mc.c[i] = cc;
        mc.a[i] = load(IDX_A) - l.lambda_0 * cc;
        for d in 0..3 {
            mc.b[d][i] = load(IDX_IC + d) / l.lambda_1;
        }
    }
    mc
}

/// Which microscopic quantity to expand in the macroscopic basis.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MicroKind {
    /// `{I−P}f`.
    M,
    /// `l{I−P}f = −(p̂·∇_x + L){I−P}f`.
    L,
    /// `Γ(f,f)`.
    G,
}

/// Expansion coefficients in the macroscopic basis, `coeffs[mode * MACRO_LEN + μ]`.
#[derive(Clone, Debug, PartialEq)]
pub struct MicroFields {
    pub kind: MicroKind,
    pub coeffs: Vec<Complex64>,
}

impl MicroFields {
    pub fn mode(&self, i: usize) -> &[Complex64] {
        &self.coeffs[i * MACRO_LEN..(i + 1) * MACRO_LEN]
    }
}

/// `{I−P}f` as a field.
pub fn micro_part(solver: &Solver, f: &DistributionField) -> Result<DistributionField> {
    let (pf, _) = project_p(solver, f)?;
    let mut out = f.clone();
    for (o, p) in out.coeffs.iter_mut().zip(&pf.coeffs) {
        *o -= p;
    }
    Ok(out)
}

/// Coefficients of `{I−P}f`, `l{I−P}f` or `Γ(f,f)` against the macroscopic basis (Gram solve).
pub fn micro_coefficients(solver: &Solver, f: &DistributionField, kind: MicroKind) -> Result<MicroFields> {
    let basis = MacroBasis::from_mass(&solver.ops.mass)?;
    let ops = &solver.ops;
    let loads: Vec<Complex64> = match kind {
        MicroKind::G => solver.gamma_loads(f),
        MicroKind::M | MicroKind::L => {
            let micro = micro_part(solver, f)?;
            let mut out = vec![ZERO; f.coeffs.len()];
            for i in 0..f.n_modes() {
                let xi = f.wavenumber(i);
                let c = micro.mode(i);
                for m in 0..B {
                    let mut s = ZERO;
                    for n in 0..B {
                        let a = match kind {
                            MicroKind::M => Complex64::new(ops.mass[(m, n)], 0.0),
                            _ => {
                                let t = xi[0] * ops.transport[0][(m, n)] + xi[1] * ops.transport[1][(m, n)] + xi[2] * ops.transport[2][(m, n)];
                                -(I * t + ops.linear[(m, n)])
                            }
                        };
                        s += a * c[n];
                    }
                    out[i * B + m] = s;
                }
            }
            out
        }
    };
    let mut coeffs = Vec::with_capacity(f.n_modes() * MACRO_LEN);
    for i in 0..f.n_modes() {
        coeffs.extend(basis.solve(&loads[i * B..i * B + MACRO_LEN]));
    }
    Ok(MicroFields { kind, coeffs })
}

/// Ratio `Σ_μ ‖l_μ‖_{H^{N−1}_x} / Σ_{|α|≤N} ‖{I−P}∂^αf‖_{L²_{(a+γ)/2}}`; `None`
/// when `{I−P}f` vanishes to rounding relative to `f`.
pub fn l_bound_ratio(solver: &Solver, f: &DistributionField) -> Result<Option<f64>> {
    let n = solver.config.derivatives;
    let l = micro_coefficients(solver, f, MicroKind::L)?;
    let mut num = 0.0;
    for mu in 0..MACRO_LEN {
        let mut s = 0.0;
        for i in 0..f.n_modes() {
            s += SolverConfig::derivative_weight(&f.wavenumber(i), n - 1) * l.mode(i)[mu].norm_sqr();
        }
        num += s.sqrt();
    }
    let micro = micro_part(solver, f)?;
    let (mut den, mut full) = (0.0, 0.0);
    for alpha in multi_indices(n) {
        let w = |xi: &[f64; 3]| (0..3).map(|d| xi[d].powi(2 * alpha[d] as i32)).product::<f64>();
        den += micro.weighted_form(&solver.ops.l2_weighted, w).max(0.0).sqrt();
        full += f.weighted_form(&solver.ops.l2_weighted, w).max(0.0).sqrt();
    }
    Ok(if den > 1e-12 * full { Some(num / den) } else { None })
}

fn multi_indices(n: usize) -> Vec<[usize; 3]> {
    let mut out = Vec::new();
    for a in 0..=n {
        for b in 0..=(n - a) {
            for c in 0..=(n - a - b) {
                out.push([a, b, c]);
            }
        }
    }
    out
}

/// Residuals of the three local conservation laws (mass/energy combination,
/// momentum, energy/mass combination).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConservationResiduals {
    /// `‖residual‖ / ‖largest term‖` per law, `L²` over modes.
    pub relative: [f64; 3],
    pub absolute: [f64; 3],
}

impl ConservationResiduals {
    pub fn max_relative(&self) -> f64 {
        self.relative.iter().copied().fold(0.0, f64::max)
    }
}

/// Residuals of
/// `∂_tA(1−λ₀²/λ₀₀) + ∇·B(λ₁₀−λ₀λ₁/λ₀₀) = −∇·⟨{I−P}f, √J p/p⁰⟩`,
/// `λ₁∂_tB + λ₁₀∇A + λ₁∇C = −∇·⟨{I−P}f, √J p⊗p/p⁰⟩` and
/// `(λ₀−λ₀₀/λ₀)∂_tC + (λ₁₀−λ₁/λ₀)∇·B = −∇·⟨{I−P}f, √J p/p⁰⟩`,
/// with a backward difference in time between consecutive states and spatial
/// terms at the later state. The moments are taken from the solver's own
/// quadrature; the mass `∫J` of that quadrature replaces the exact 1.
pub fn conservation_residuals(solver: &Solver, prev: &DistributionField, next: &DistributionField) -> Result<ConservationResiduals> {
    let dt = next.t - prev.t;
    if !(dt > 0.0) {
        return Err(Error::Validation("conservation residuals need two states with increasing time".into()));
    }
    let l = LambdaMoments::from_mass(&solver.ops.mass);
    let (_, m0) = project_p(solver, prev)?;
    let (_, m1) = project_p(solver, next)?;
    let micro = micro_part(solver, next)?;
    let mass = &solver.ops.mass;
    let mut res = [0.0; 3];
    let mut scale = [0.0f64; 3];
    for i in 0..next.n_modes() {
        let xi = next.wavenumber(i);
        let c = micro.mode(i);
        let load = |r: usize| -> Complex64 { (0..B).map(|k| mass[(r, k)] * c[k]).sum() };
        let q: [Complex64; 3] = std::array::from_fn(|d| load(IDX_IA + d));
        let div_q: Complex64 = (0..3).map(|d| I * xi[d] * q[d]).sum();
        let div_b: Complex64 = (0..3).map(|d| I * xi[d] * m1.b[d][i]).sum();
        let da = (m1.a[i] - m0.a[i]) / dt;
        let dc = (m1.c[i] - m0.c[i]) / dt;
        let t1 = [da * (l.total - l.lambda_0 * l.lambda_0 / l.lambda_00), div_b * (l.lambda_10 - l.lambda_0 * l.lambda_1 / l.lambda_00), div_q];
        let t3 = [
            dc * (l.lambda_0 - l.lambda_00 / l.lambda_0),
            div_b * (l.lambda_10 - l.lambda_1 / l.lambda_0),
            div_q,
            da * (l.total - 1.0),
        ];
        let r1: Complex64 = t1.iter().sum();
        let r3: Complex64 = t3.iter().sum();
        res[0] += r1.norm_sqr();
        res[2] += r3.norm_sqr();
        scale[0] += t1.iter().fold(0.0f64, |a, v| a.max(v.norm_sqr()));
        scale[2] += t3.iter().fold(0.0f64, |a, v| a.max(v.norm_sqr()));
        for d in 0..3 {
            let db = (m1.b[d][i] - m0.b[d][i]) / dt;
            let flux: Complex64 = (0..3).map(|e| I * xi[e] * load(IDX_IJ + ij_index(d, e))).sum();
            let t2 = [l.lambda_1 * db, l.lambda_10 * I * xi[d] * m1.a[i], l.lambda_1 * I * xi[d] * m1.c[i], flux];
            let r2: Complex64 = t2.iter().sum();
            res[1] += r2.norm_sqr();
            scale[1] += t2.iter().fold(0.0f64, |a, v| a.max(v.norm_sqr()));
        }
    }
    let absolute = res.map(f64::sqrt);
    let relative = std::array::from_fn(|k| if scale[k] > 0.0 { absolute[k] / scale[k].sqrt() } else { 0.0 });
    Ok(ConservationResiduals { relative, absolute })
}

/// The interaction potential and its three parts.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interaction {
    pub i_a: f64,
    pub i_b: f64,
    pub i_c: f64,
    pub total: f64,
}

/// `I = Σ_{|α|≤N−1} (I_a + I_b + I_c)` with
/// `I_a = Σ_i ∫∂_i∂^α m_{ia} ∂^αA`, `I_b = −Σ_i Σ_{j≠i} ∫∂_j∂^α m_{ij} ∂^αB_i`,
/// `I_c = ∫(∇·∂^αB)∂^αC + Σ_i ∫∂_i∂^α m_{ic} ∂^αC`, where `m` are the
/// coefficients of `{I−P}f`.
pub fn interaction_functionals(solver: &Solver, f: &DistributionField) -> Result<Interaction> {
    let (_, mc) = project_p(solver, f)?;
    let m = micro_coefficients(solver, f, MicroKind::M)?;
    let n = solver.config.derivatives;
    let (mut ia, mut ib, mut ic) = (0.0, 0.0, 0.0);
    for k in 0..f.n_modes() {
        let xi = f.wavenumber(k);
        let w = SolverConfig::derivative_weight(&xi, n - 1);
        let mm = m.mode(k);
        let (a, c) = (mc.a[k], mc.c[k]);
        for i in 0..3 {
            ia += w * (I * xi[i] * mm[IDX_IA + i] * a.conj()).re;
            for j in 0..3 {
                if j != i {
                    ib -= w * (I * xi[j] * mm[IDX_IJ + ij_index(i, j)] * mc.b[i][k].conj()).re;
                }
            }
            ic += w * (I * xi[i] * mc.b[i][k] * c.conj()).re;
            ic += w * (I * xi[i] * mm[IDX_IC + i] * c.conj()).re;
        }
    }
    Ok(Interaction { i_a: ia, i_b: ib, i_c: ic, total: ia + ib + ic })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::MomentumGridSpec;
    use crate::solver::stepper::tests::{coarse_config, coarse_ops};
    use crate::solver::InitialData;

    fn grid() -> MomentumGrid {
        MomentumGrid::new(&MomentumGridSpec { radial_nodes: 24, sphere_theta: 4, sphere_phi: 8, ..Default::default() }).unwrap()
    }

    #[test]
    fn lambda_moments_match_reference() {
        let g = grid();
        let l = lambda_moments(&g).unwrap();
        let r = LambdaMoments::REFERENCE;
        let pairs = [
            (l.total, r.total),
            (l.lambda_0, r.lambda_0),
            (l.lambda_00, r.lambda_00),
            (l.lambda_1, r.lambda_1),
            (l.lambda_10, r.lambda_10),
            (l.lambda_12, r.lambda_12),
            (l.lambda_11, r.lambda_11),
            (l.lambda_100, r.lambda_100),
        ];
        for (a, b) in pairs {
            assert!((a / b - 1.0).abs() < 1e-6, "{a} vs {b}");
        }
        assert!(isotropy_defect(&g).unwrap() < 1e-8);
        assert!(l.lambda_00 > l.lambda_0 * l.lambda_0);
        r.validate().unwrap();
    }

    #[test]
    fn projection_examples() {
        let g = grid();
        let j = Juttner::new();
        let (closed, gram) = project_function(&MomentumFunction::sqrt_juttner(j), &g).unwrap();
        for c in [closed, gram] {
            assert!((c.a - 1.0).abs() < 1e-6 && c.c.abs() < 1e-6 && c.b.iter().all(|v| v.abs() < 1e-9), "{c:?}");
        }
        let (closed, gram) = project_function(&MomentumFunction::sqrt_j_times("p1", j, |p| p.p[0]), &g).unwrap();
        for c in [closed, gram] {
            assert!((c.b[0] - 1.0).abs() < 1e-6 && c.a.abs() < 1e-9 && c.c.abs() < 1e-9, "{c:?}");
        }
        // P² = P on the grid
        let f = MomentumFunction::sqrt_j_times("f", j, |p| 1.0 + p.p[0] * p.p[1] - 0.3 * p.p0 * p.p0 + p.p[2]);
        let (_, c1) = project_function(&f, &g).unwrap();
        let (_, c2) = project_function(&projection_function(&c1), &g).unwrap();
        for (a, b) in [(c1.a, c2.a), (c1.c, c2.c), (c1.b[0], c2.b[0]), (c1.b[2], c2.b[2])] {
            assert!((a - b).abs() < 1e-9 * (1.0 + a.abs()), "{a} vs {b}");
        }
        // orthogonal complement: subtract the projection
        let h = f.plus(&projection_function(&c1).scaled(-1.0));
        let (_, c3) = project_function(&h, &g).unwrap();
        assert!([c3.a, c3.c, c3.b[0], c3.b[1], c3.b[2]].iter().all(|v| v.abs() < 1e-8), "{c3:?}");
    }

    #[test]
    fn macro_basis_is_well_conditioned() {
        let b = MacroBasis::on_grid(&grid()).unwrap();
        assert!(b.condition > 1.0 && b.condition < MacroBasis::MAX_CONDITION);
        let eig = b.gram.clone().symmetric_eigenvalues();
        assert!(eig.min() > 0.0);
    }

    fn solver() -> Solver {
        Solver::with_operators(coarse_config(), coarse_ops()).unwrap()
    }

    #[test]
    fn field_projection_and_micro_coefficients() {
        let s = solver();
        let f = s.init(&InitialData { amplitude: 1e-2, seed: 5 }.build(2, s.config.box_length).unwrap()).unwrap();
        let (pf, mc) = project_p(&s, &f).unwrap();
        let (ppf, _) = project_p(&s, &pf).unwrap();
        let d = pf.coeffs.iter().zip(&ppf.coeffs).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(d < 1e-9 * pf.max_abs(), "{d}");
        // Zero means for data with vanishing conserved moments
        assert!(mc.means(&f).iter().all(|v| v.abs() < 1e-8));
        // closed form agrees up to the quadrature error of the moments
        // the coarse test grid has ∫J = 0.991, which the closed form ignores
        let l = LambdaMoments::from_mass(&s.ops.mass);
        let cf = project_p_closed_form(&s, &f, &l);
        for (x, y) in [(&cf.a, &mc.a), (&cf.c, &mc.c), (&cf.b[1], &mc.b[1])] {
            let dc = x.iter().zip(y).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
            let size = y.iter().fold(0.0f64, |a, v| a.max(v.norm()));
            assert!(dc < 0.1 * (1.0 - l.total).abs() / 0.009 * size, "{dc} vs {size}");
        }
        // micro coefficients of Pf vanish
        let m = micro_coefficients(&s, &pf, MicroKind::M).unwrap();
        assert!(m.coeffs.iter().all(|v| v.norm() < 1e-8 * pf.max_abs()));
        let g = micro_coefficients(&s, &s.zero_field(), MicroKind::G).unwrap();
        assert!(g.coeffs.iter().all(|v| v.norm() == 0.0));
        let l = micro_coefficients(&s, &f, MicroKind::L).unwrap();
        assert!(l.coeffs.iter().any(|v| v.norm() > 0.0));
        let r = l_bound_ratio(&s, &f).unwrap().unwrap();
        assert!(r.is_finite() && r > 0.0);
        assert!(l_bound_ratio(&s, &pf).unwrap().is_none());
    }

    #[test]
    fn interaction_of_uniform_states_vanishes() {
        let s = solver();
        let mut f = s.zero_field();
        f.add_cosine([0, 0, 0], 14, 1e-2, 0.0).unwrap();
        f.add_cosine([0, 0, 0], IDX_IC, 1e-2, 0.0).unwrap();
        let i = interaction_functionals(&s, &f).unwrap();
        assert_eq!(i.total, 0.0);
        let f = s.init(&InitialData::default().build(2, s.config.box_length).unwrap()).unwrap();
        let i = interaction_functionals(&s, &f).unwrap();
        assert!(i.total.is_finite() && (i.i_a + i.i_b + i.i_c - i.total).abs() < 1e-15 * i.total.abs().max(1e-300));
    }

    #[test]
    fn conservation_residuals_of_solver_steps() {
        let s = solver();
        let z = s.zero_field();
        let mut z1 = z.clone();
        z1.t = 0.1;
        assert_eq!(conservation_residuals(&s, &z, &z1).unwrap().max_relative(), 0.0);
        assert!(conservation_residuals(&s, &z, &z).is_err());
        let f = s.init(&InitialData { amplitude: 1e-3, seed: 9 }.build(2, s.config.box_length).unwrap()).unwrap();
        let (g, _) = s.step(&f).unwrap();
        let r = conservation_residuals(&s, &f, &g).unwrap();
        assert!(r.max_relative() < 1e-6, "{r:?}");
    }

    #[test]
    fn csv_export_has_header_and_rows() {
        let s = solver();
        let f = s.init(&InitialData::default().build(2, s.config.box_length).unwrap()).unwrap();
        let (_, mc) = project_p(&s, &f).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("macro.csv");
        mc.write_csv(&path, 3, &["config_hash=abc".into()]).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "# config_hash=abc");
        assert_eq!(lines[1], "x1,x2,x3,A,B1,B2,B3,C");
        assert_eq!(lines.len(), 2 + 27);
    }
}
