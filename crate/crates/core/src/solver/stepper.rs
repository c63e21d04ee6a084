//! Semi-implicit time stepping with inner Picard sweeps.
//!
//! One step of size `dt` solves, mode by mode,
//! `(M + dt(iξ·T + X)) c^{m+1} = M c^n − dt(L − X) c^m + dt g(c^m)`,
//! where `g` is the Galerkin load of `Γ(f,f)` evaluated pseudo-spectrally and
//! `X` is either `L` ([`Splitting::Implicit`]) or `N`
//! ([`Splitting::Lagged`], which lags `K` exactly as in the classical
//! iteration). At convergence both give backward Euler for the full
//! linearized operator.

use super::assembly::{AssemblySpec, GalerkinOperators};
use super::basis::{BASIS_LEN, MACRO_LEN};
use super::field::DistributionField;
use crate::error::{Error, Result};
use crate::kernel::KernelSpec;
use nalgebra::{DMatrix, DVector, Dyn, LU};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};
use std::sync::Arc;

const B: usize = BASIS_LEN;
const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Which part of the linearized operator is treated implicitly.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Splitting {
    /// `L` implicit; Picard sweeps only update `Γ`.
    Implicit,
    /// `N` implicit, `K` and `Γ` lagged across Picard sweeps.
    Lagged,
}

/// Parameters of the time integration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub dt: f64,
    /// Highest resolved wave index per axis.
    pub n_x: usize,
    /// Side of the periodic box.
    pub box_length: f64,
    pub picard_iters: usize,
    pub picard_tol: f64,
    pub t_final: f64,
    pub splitting: Splitting,
    /// Number `N` of spatial derivatives in the energy norm.
    pub derivatives: usize,
    /// Weight of the interaction potential in `ℰ = ‖f‖²_H − κ I`.
    pub energy_kappa: f64,
    /// Largest admissible `‖f₀‖_H`.
    pub small_data_gate: f64,
    /// Include `Γ(f,f)`; off gives the linear problem.
    pub nonlinear: bool,
    /// Supplied by the enclosing run configuration, never serialized here.
    #[serde(skip)]
    pub kernel: KernelSpec,
    pub assembly: AssemblySpec,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            dt: 0.02,
            n_x: 4,
            box_length: 0.25,
            picard_iters: 50,
            picard_tol: 1e-11,
            t_final: 3.0,
            splitting: Splitting::Implicit,
            derivatives: 2,
            energy_kappa: 0.0,
            small_data_gate: 1.0,
            nonlinear: true,
            kernel: KernelSpec::default(),
            assembly: AssemblySpec::default(),
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        self.kernel.validate()?;
        self.assembly.validate()?;
        let positive = [self.dt, self.box_length, self.picard_tol, self.t_final, self.small_data_gate];
        if positive.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::Validation("dt, box_length, picard_tol, t_final and small_data_gate must be positive".into()));
        }
        if self.n_x == 0 || self.picard_iters == 0 || self.derivatives == 0 {
            return Err(Error::Validation("n_x, picard_iters and derivatives must be positive".into()));
        }
        if !(self.energy_kappa >= 0.0 && self.energy_kappa.is_finite()) {
            return Err(Error::Validation("energy_kappa must be non-negative".into()));
        }
        Ok(())
    }

    /// Twice the resolution: `2N_x` modes and twice the radial momentum nodes.
    pub fn refined(&self) -> Self {
        Self { n_x: 2 * self.n_x, assembly: self.assembly.refined(), ..self.clone() }
    }

    /// `Σ_{|α|≤n} ξ^{2α}` over multi-indices.
    pub fn derivative_weight(xi: &[f64; 3], n: usize) -> f64 {
        let mut total = 0.0;
        for a in 0..=n {
            for b in 0..=(n - a) {
                for c in 0..=(n - a - b) {
                    total += xi[0].powi(2 * a as i32) * xi[1].powi(2 * b as i32) * xi[2].powi(2 * c as i32);
                }
            }
        }
        total
    }
}

/// Seeded smooth small initial data on the modes `|k|_∞ ≤ 1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InitialData {
    pub amplitude: f64,
    pub seed: u64,
}

impl Default for InitialData {
    fn default() -> Self {
        Self { amplitude: 5e-5, seed: 7 }
    }
}

impl InitialData {
    pub fn validate(&self) -> Result<()> {
        if !(self.amplitude >= 0.0 && self.amplitude.is_finite()) {
            return Err(Error::Validation(format!("amplitude = {} must be non-negative", self.amplitude)));
        }
        Ok(())
    }

    /// Random coefficients in `[−a, a]` with random phases on the hydrodynamic
    /// basis functions, for every `|k|_∞ ≤ 1`.
    pub fn build(&self, n_x: usize, box_length: f64) -> Result<DistributionField> {
        let mut f = DistributionField::zeros(n_x, box_length);
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        for k0 in -1..=1 {
            for k1 in -1..=1 {
                for k2 in -1..=1 {
                    let k = [k0, k1, k2];
                    // one representative of each ±k pair
                    if k.iter().find(|v| **v != 0).is_some_and(|v| *v < 0) {
                        continue;
                    }
                    for n in 0..MACRO_LEN {
                        let a = self.amplitude * rng.gen_range(-1.0..1.0);
                        let phase = if k == [0, 0, 0] { 0.0 } else { rng.gen_range(0.0..std::f64::consts::TAU) };
                        f.add_cosine(k, n, a, phase)?;
                    }
                }
            }
        }
        Ok(f)
    }
}

/// Diagnostics of one time step.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepInfo {
    pub picard_iterations: usize,
    /// Relative size of the last Picard update.
    pub last_update: f64,
}

/// Pseudo-spectral transform machinery on an `n³` grid, `n ≥ 3N_x + 1`.
struct Transform {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl Transform {
    fn new(n_x: usize) -> Self {
        let n = 3 * n_x + 1;
        let mut planner = FftPlanner::new();
        Self { n, forward: planner.plan_fft_forward(n), inverse: planner.plan_fft_inverse(n) }
    }

    fn fft3(&self, buf: &mut [Complex64], inverse: bool) {
        let n = self.n;
        let plan = if inverse { &self.inverse } else { &self.forward };
        plan.process(buf);
        let mut line = vec![ZERO; n];
        for stride in [n, n * n] {
            for outer in 0..n * n * n / (n * stride) {
                for inner in 0..stride {
                    let base = outer * n * stride + inner;
                    for (t, v) in line.iter_mut().enumerate() {
                        *v = buf[base + t * stride];
                    }
                    plan.process(&mut line);
                    for (t, v) in line.iter().enumerate() {
                        buf[base + t * stride] = *v;
                    }
                }
            }
        }
    }

    fn grid_index(&self, k: [i32; 3]) -> usize {
        let n = self.n as i32;
        let w = k.map(|v| v.rem_euclid(n) as usize);
        (w[0] * self.n + w[1]) * self.n + w[2]
    }

    /// Physical values `u_n(x_j)` of the coefficient fields; `None` for identically zero ones.
    fn to_physical(&self, f: &DistributionField) -> Vec<Option<Vec<f64>>> {
        let size = self.n.pow(3);
        (0..B)
            .into_par_iter()
            .map(|b| {
                if (0..f.n_modes()).all(|i| f.mode(i)[b] == ZERO) {
                    return None;
                }
                let mut buf = vec![ZERO; size];
                for i in 0..f.n_modes() {
                    buf[self.grid_index(f.wave_vector(i))] = f.mode(i)[b];
                }
                self.fft3(&mut buf, true);
                Some(buf.iter().map(|c| c.re).collect())
            })
            .collect()
    }
}

/// A configured solver with its operators and per-mode factorizations.
pub struct Solver {
    pub config: SolverConfig,
    pub ops: Arc<GalerkinOperators>,
    factors: Vec<LU<Complex64, Dyn, Dyn>>,
    lagged: DMatrix<f64>,
    transform: Transform,
    template: DistributionField,
}

impl Solver {
    /// Assembles the operators for `config` and builds the solver.
    pub fn new(config: SolverConfig) -> Result<Self> {
        config.validate()?;
        let ops = GalerkinOperators::assemble(&config.kernel, &config.assembly)?;
        Self::with_operators(config, Arc::new(ops))
    }

    /// Reuses assembled operators; they must match the configured kernel and assembly.
    pub fn with_operators(config: SolverConfig, ops: Arc<GalerkinOperators>) -> Result<Self> {
        config.validate()?;
        if ops.kernel != config.kernel || ops.spec != config.assembly {
            return Err(Error::Validation("operators were assembled for a different kernel or resolution".into()));
        }
        let template = DistributionField::zeros(config.n_x, config.box_length);
        let (implicit, lagged) = match config.splitting {
            Splitting::Implicit => (ops.linear.clone(), DMatrix::zeros(B, B)),
            Splitting::Lagged => (ops.norm_part.clone(), ops.compact.clone()),
        };
        let dt = config.dt;
        let factors = (0..template.n_modes())
            .into_par_iter()
            .map(|i| {
                let xi = template.wavenumber(i);
                let a = DMatrix::from_fn(B, B, |m, n| {
                    let t = xi[0] * ops.transport[0][(m, n)] + xi[1] * ops.transport[1][(m, n)] + xi[2] * ops.transport[2][(m, n)];
                    Complex64::new(ops.mass[(m, n)] + dt * implicit[(m, n)], dt * t)
                });
                a.lu()
            })
            .collect();
        Ok(Self { transform: Transform::new(config.n_x), config, ops, factors, lagged, template })
    }

    /// A zero field of the solver's shape.
    pub fn zero_field(&self) -> DistributionField {
        self.template.clone()
    }

    fn check_shape(&self, f: &DistributionField) -> Result<()> {
        if f.n_x != self.config.n_x || f.box_length != self.config.box_length {
            return Err(Error::Validation("field shape does not match the solver".into()));
        }
        if !f.is_finite() {
            return Err(Error::NotFinite("distribution field".into()));
        }
        Ok(())
    }

    /// Projects out the conserved part of the mean mode and symmetrises.
    pub fn init(&self, f0: &DistributionField) -> Result<DistributionField> {
        self.check_shape(f0)?;
        let mut f = f0.clone();
        f.enforce_reality();
        f.project_out_conserved(&self.ops.mass)?;
        Ok(f)
    }

    /// Galerkin loads `⟨Γ(f,f), φ_m⟩` per mode, dealiased.
    pub fn gamma_loads(&self, f: &DistributionField) -> Vec<Complex64> {
        let mut out = vec![ZERO; f.coeffs.len()];
        let phys = self.transform.to_physical(f);
        if phys.iter().all(Option::is_none) {
            return out;
        }
        let size = self.transform.n.pow(3);
        let values: Vec<[f64; B]> = (0..size)
            .into_par_iter()
            .map(|x| {
                let u: Vec<f64> = phys.iter().map(|v| v.as_ref().map_or(0.0, |v| v[x])).collect();
                let mut g = [0.0; B];
                self.ops.gamma_apply(&u, &u, &mut g);
                g
            })
            .collect();
        let scale = 1.0 / size as f64;
        let loads: Vec<Vec<Complex64>> = (0..B)
            .into_par_iter()
            .map(|m| {
                let mut buf: Vec<Complex64> = values.iter().map(|g| Complex64::new(g[m], 0.0)).collect();
                self.transform.fft3(&mut buf, false);
                buf
            })
            .collect();
        for i in 0..f.n_modes() {
            let gi = self.transform.grid_index(f.wave_vector(i));
            for m in 0..B {
                out[i * B + m] = loads[m][gi] * scale;
            }
        }
        out
    }

    /// Values `u_n(x_j)` of every coefficient field on the dealiasing grid.
    pub fn physical_coefficients(&self, f: &DistributionField) -> Vec<[f64; B]> {
        let phys = self.transform.to_physical(f);
        (0..self.transform.n.pow(3)).map(|x| std::array::from_fn(|b| phys[b].as_ref().map_or(0.0, |v| v[x]))).collect()
    }

    /// Points per axis of the dealiasing grid.
    pub fn physical_points(&self) -> usize {
        self.transform.n
    }

    /// Advances `state` by one step of size `dt`.
    pub fn step(&self, state: &DistributionField) -> Result<(DistributionField, StepInfo)> {
        self.check_shape(state)?;
        let dt = self.config.dt;
        let mass = &self.ops.mass;
        let base: Vec<Complex64> = (0..state.n_modes())
            .flat_map(|i| {
                let c = state.mode(i);
                (0..B).map(move |m| (0..B).map(|n| mass[(m, n)] * c[n]).sum::<Complex64>())
            })
            .collect();
        let linear_only = !self.config.nonlinear && self.config.splitting == Splitting::Implicit;
        let mut cur = state.clone();
        let (mut prev, mut growth, mut last) = (f64::INFINITY, 0usize, 0.0);
        for it in 1..=self.config.picard_iters {
            let loads = if self.config.nonlinear { self.gamma_loads(&cur) } else { vec![ZERO; cur.coeffs.len()] };
            let next: Vec<Complex64> = (0..cur.n_modes())
                .into_par_iter()
                .flat_map_iter(|i| {
                    let c = cur.mode(i);
                    let rhs = DVector::from_fn(B, |m, _| {
                        let lag: Complex64 = (0..B).map(|n| self.lagged[(m, n)] * c[n]).sum();
                        base[i * B + m] - dt * lag + dt * loads[i * B + m]
                    });
                    let sol = self.factors[i].solve(&rhs).unwrap_or_else(|| DVector::from_element(B, Complex64::new(f64::NAN, 0.0)));
                    sol.iter().copied().collect::<Vec<_>>()
                })
                .collect();
            let (mut diff, mut size) = (0.0, 0.0);
            for (a, b) in next.iter().zip(&cur.coeffs) {
                diff += (a - b).norm_sqr();
                size += a.norm_sqr();
            }
            cur.coeffs = next;
            if !cur.is_finite() {
                return Err(Error::Stability("non-finite coefficients; reduce dt or the data size".into()));
            }
            last = if size > 0.0 { (diff / size).sqrt() } else { 0.0 };
            if last < self.config.picard_tol || linear_only {
                cur.t = state.t + dt;
                cur.enforce_reality();
                return Ok((cur, StepInfo { picard_iterations: it, last_update: last }));
            }
            if last > prev {
                growth += 1;
                if growth >= 3 {
                    return Err(Error::Stability(format!(
                        "Picard updates grew for 3 consecutive sweeps at t = {:.4} (last {last:.3e}); reduce dt or the data size",
                        state.t
                    )));
                }
            } else {
                growth = 0;
            }
            prev = last;
        }
        Err(Error::Convergence(format!(
            "Picard iteration stalled at relative update {last:.3e} after {} sweeps",
            self.config.picard_iters
        )))
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::collision::AngularSpec;
    use crate::quadrature::MomentumGridSpec;
    use crate::solver::basis::{IDX_A, IDX_IC};
    use std::sync::OnceLock;

    /// A coarse configuration shared by the solver unit tests.
    pub(crate) fn coarse_config() -> SolverConfig {
        SolverConfig {
            n_x: 2,
            assembly: AssemblySpec {
                grid: MomentumGridSpec { radial_nodes: 6, ..AssemblySpec::default().grid },
                angular: AngularSpec { k_min: -4, k_max: 6, shell_theta: 2, shell_phi_small: 4, shell_phi: 6, ..AssemblySpec::default().angular },
                ..AssemblySpec::default()
            },
            ..SolverConfig::default()
        }
    }

    pub(crate) fn coarse_ops() -> Arc<GalerkinOperators> {
        static OPS: OnceLock<Arc<GalerkinOperators>> = OnceLock::new();
        OPS.get_or_init(|| {
            let c = coarse_config();
            Arc::new(GalerkinOperators::assemble(&c.kernel, &c.assembly).unwrap())
        })
        .clone()
    }

    fn solver(config: SolverConfig) -> Solver {
        Solver::with_operators(config, coarse_ops()).unwrap()
    }

    #[test]
    fn zero_is_a_fixed_point_and_init_examples() {
        let s = solver(coarse_config());
        let z = s.zero_field();
        let (next, info) = s.step(&z).unwrap();
        assert_eq!(next.max_abs(), 0.0);
        assert_eq!(info.picard_iterations, 1);
        let mut f = s.zero_field();
        f.add_cosine([0, 0, 0], IDX_A, 1.0, 0.0).unwrap();
        assert!(s.init(&f).unwrap().max_abs() < 1e-12);
        let mut f = s.zero_field();
        f.add_cosine([1, 0, 0], IDX_IC, 1e-3, -std::f64::consts::FRAC_PI_2).unwrap();
        let g = s.init(&f).unwrap();
        assert!(g.coeffs.iter().zip(&f.coeffs).all(|(a, b)| (a - b).norm() < 1e-12));
    }

    #[test]
    fn gamma_loads_match_direct_convolution() {
        let s = solver(coarse_config());
        let mut f = s.zero_field();
        f.add_cosine([1, 0, 0], 3, 0.2, 0.4).unwrap();
        f.add_cosine([0, 1, -1], 14, -0.1, 1.0).unwrap();
        f.add_cosine([0, 0, 0], 8, 0.05, 0.0).unwrap();
        let loads = s.gamma_loads(&f);
        // direct: g_k = Σ_{k1+k2=k} Γ(c_{k1}, c_{k2})
        for i in 0..f.n_modes() {
            let k = f.wave_vector(i);
            let mut direct = [ZERO; B];
            for i1 in 0..f.n_modes() {
                let k1 = f.wave_vector(i1);
                let Some(i2) = f.mode_index([k[0] - k1[0], k[1] - k1[1], k[2] - k1[2]]) else { continue };
                let (a, b) = (f.mode(i1), f.mode(i2));
                for (m, d) in direct.iter_mut().enumerate() {
                    for n in 0..B {
                        for l in 0..B {
                            *d += s.ops.gamma[m * B * B + n * B + l] * a[n] * b[l];
                        }
                    }
                }
            }
            for m in 0..B {
                assert!((direct[m] - loads[i * B + m]).norm() < 1e-13, "{k:?} {m}: {} vs {}", direct[m], loads[i * B + m]);
            }
        }
    }

    #[test]
    fn splittings_agree_and_conserve() {
        let data = InitialData { amplitude: 1e-3, seed: 3 };
        let mut results = Vec::new();
        for splitting in [Splitting::Implicit, Splitting::Lagged] {
            let s = solver(SolverConfig { splitting, dt: 0.005, picard_iters: 400, ..coarse_config() });
            let mut f = s.init(&data.build(2, s.config.box_length).unwrap()).unwrap();
            for _ in 0..5 {
                f = s.step(&f).unwrap().0;
            }
            let moments = f.conserved_moments(&s.ops.mass);
            assert!(moments.iter().all(|v| v.abs() < 1e-12), "{moments:?}");
            assert!(f.reality_defect() < 1e-15);
            results.push(f);
        }
        let diff = results[0].coeffs.iter().zip(&results[1].coeffs).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(diff < 1e-8 * results[0].max_abs(), "{diff}");
    }

    #[test]
    fn derivative_weights() {
        assert_eq!(SolverConfig::derivative_weight(&[0.0; 3], 2), 1.0);
        // 1 + 4 + 16 for ξ = (2,0,0)
        assert_eq!(SolverConfig::derivative_weight(&[2.0, 0.0, 0.0], 2), 21.0);
        // 1 + (1+1+1) + (1+1+1+1+1+1)
        assert_eq!(SolverConfig::derivative_weight(&[1.0; 3], 2), 10.0);
    }
}
