//! Energy functionals, the decay run and the log-linear rate fit.

use super::basis::{polynomials, BASIS_LEN};
use super::field::DistributionField;
use super::stepper::{Solver, SolverConfig};
use crate::error::{Error, Result};
use crate::macroscopic::{conservation_residuals, interaction_functionals, micro_part, project_p};
use crate::quadrature::MomentumGrid;
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::Path;
use std::time::Instant;

/// Instantaneous norms of a state.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergySnapshot {
    /// `‖f‖²_H = Σ_{|α|≤N} ‖∂^αf‖²_{L²_{x,p}}`.
    pub h_norm: f64,
    /// `‖f‖²_{L²_x I^{a,γ}}` (no derivatives).
    pub i_norm: f64,
    /// `D = Σ_{|α|≤N} ‖∂^αf‖²_{L²_x I^{a,γ}}`.
    pub dissipation: f64,
}

/// `‖f‖²_H`, `‖f‖²_I` and `D` by Parseval over the modes.
pub fn energy_functionals(solver: &Solver, f: &DistributionField) -> EnergySnapshot {
    let n = solver.config.derivatives;
    let ops = &solver.ops;
    EnergySnapshot {
        h_norm: f.weighted_form(&ops.mass, |xi| SolverConfig::derivative_weight(xi, n)),
        i_norm: f.weighted_form(&ops.iag, |_| 1.0),
        dissipation: f.weighted_form(&ops.iag, |xi| SolverConfig::derivative_weight(xi, n)),
    }
}

/// One row of the energy trace.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyRecord {
    pub t: f64,
    pub h_norm: f64,
    pub i_norm: f64,
    /// `M(t) = ‖f(t)‖²_H + ∫₀^t D` (trapezoidal in time).
    pub m: f64,
    pub dissipation: f64,
    /// Interaction potential `I(t)`.
    pub interaction: f64,
    /// `ℰ(t) = ‖f‖²_H − κ I(t)`.
    pub energy: f64,
    /// Dissipation of the microscopic and macroscopic parts, `Σ_α‖{I−P}∂^αf‖²_I` and `Σ_α‖P∂^αf‖²_I`.
    pub micro_dissipation: f64,
    pub macro_dissipation: f64,
    /// Largest conserved moment of the mean mode.
    pub conserved: f64,
    /// Largest relative conservation-law residual of the step ending here.
    pub residual: f64,
    pub picard_iterations: usize,
}

/// Least-squares fit `ln y ≈ c − λt`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub lambda: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub points: usize,
}

/// Fits `ln values` against `times`; `None` with fewer than three positive values.
pub fn fit_decay(times: &[f64], values: &[f64]) -> Option<DecayFit> {
    let pts: Vec<(f64, f64)> = times.iter().zip(values).filter(|(_, v)| **v > 0.0).map(|(t, v)| (*t, v.ln())).collect();
    if pts.len() < 3 {
        return None;
    }
    let n = pts.len() as f64;
    let (mt, my) = (pts.iter().map(|p| p.0).sum::<f64>() / n, pts.iter().map(|p| p.1).sum::<f64>() / n);
    let sxx: f64 = pts.iter().map(|p| (p.0 - mt).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let r_squared = if syy > 0.0 { sxy * sxy / (sxx * syy) } else { 1.0 };
    Some(DecayFit { lambda: -slope, intercept: my - slope * mt, r_squared, points: pts.len() })
}

/// Positive constants `(δ, C)` with `micro ≥ δ·macro − C·dI/dt` on every
/// interior record (centred differences), chosen to maximise `δ`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoercivityFit {
    pub delta: f64,
    pub c: f64,
}

/// Scans `C` on a logarithmic grid; `None` when no positive `δ` exists.
pub fn fit_coercivity(records: &[EnergyRecord]) -> Option<CoercivityFit> {
    if records.len() < 3 {
        return None;
    }
    let rows: Vec<(f64, f64, f64)> = records
        .windows(3)
        .filter(|w| w[1].macro_dissipation > 0.0)
        .map(|w| (w[1].micro_dissipation, w[1].macro_dissipation, (w[2].interaction - w[0].interaction) / (w[2].t - w[0].t)))
        .collect();
    if rows.is_empty() {
        return None;
    }
    let mut best: Option<CoercivityFit> = None;
    for e in -60..=60 {
        let c = 10f64.powf(e as f64 / 6.0);
        let delta = rows.iter().map(|(mi, ma, di)| (mi + c * di) / ma).fold(f64::INFINITY, f64::min);
        if delta > 0.0 && best.is_none_or(|b| delta > b.delta) {
            best = Some(CoercivityFit { delta, c });
        }
    }
    best
}

/// Result of a decay run.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EnergyTrace {
    pub records: Vec<EnergyRecord>,
    /// Fit of `‖f‖²_H` over the second half of the run.
    pub fit: Option<DecayFit>,
    /// Largest step-to-step increase of `ℰ`, relative to `ℰ(0)` (≤ 0 when monotone).
    pub max_energy_increase: f64,
    /// Largest conserved moment through the run.
    pub max_conserved: f64,
    /// Largest relative conservation-law residual.
    pub max_residual: f64,
    /// Minimum of `F/J = 1 + f/√J` over the assembly grid and the dealiasing grid, at checkpoints.
    pub min_density_ratio: f64,
    pub coercivity: Option<CoercivityFit>,
    pub initial_h_norm: f64,
    pub assembly_seconds: f64,
    pub wall_seconds: f64,
}

impl EnergyTrace {
    /// True when `ℰ` never grew by more than `slack·ℰ(0)` in one step.
    pub fn energy_monotone(&self, slack: f64) -> bool {
        self.max_energy_increase <= slack
    }

    /// CSV with columns `t,H_norm,I_norm,M,D,interaction,energy`.
    pub fn write_csv(&self, path: &Path, preamble: &[String]) -> Result<()> {
        let mut file = std::fs::File::create(path)?;
        for line in preamble {
            writeln!(file, "# {line}")?;
        }
        let mut w = csv::Writer::from_writer(file);
        let ser = |e: csv::Error| Error::Serialization(e.to_string());
        w.write_record(["t", "H_norm", "I_norm", "M", "D", "interaction", "energy"]).map_err(ser)?;
        for r in &self.records {
            let row = [r.t, r.h_norm, r.i_norm, r.m, r.dissipation, r.interaction, r.energy].map(|v| format!("{v:.12e}"));
            w.write_record(&row).map_err(ser)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// `min (1 + Σ_n u_n(x) P_n(p))` over the dealiasing grid in `x` and the assembly grid in `p`.
pub fn min_density_ratio(solver: &Solver, f: &DistributionField) -> Result<f64> {
    let grid = MomentumGrid::new(&solver.ops.spec.grid)?;
    let polys: Vec<[f64; BASIS_LEN]> = grid.nodes.iter().map(polynomials).collect();
    let values = solver.physical_coefficients(f);
    let mut lo = f64::INFINITY;
    for u in &values {
        for p in &polys {
            let s: f64 = u.iter().zip(p).map(|(a, b)| a * b).sum();
            lo = lo.min(1.0 + s);
        }
    }
    Ok(lo)
}

fn split_dissipation(solver: &Solver, f: &DistributionField) -> Result<(f64, f64)> {
    let n = solver.config.derivatives;
    let w = |xi: &[f64; 3]| SolverConfig::derivative_weight(xi, n);
    let micro = micro_part(solver, f)?;
    let (pf, _) = project_p(solver, f)?;
    Ok((micro.weighted_form(&solver.ops.iag, w), pf.weighted_form(&solver.ops.iag, w)))
}

/// Integrates from `f0` to `T_final` and fits the decay of `‖f‖²_H`.
///
/// The conserved moments of the mean mode are projected out first; the run is
/// refused when `‖f₀‖_H` exceeds the configured small-data gate.
pub fn run_decay(solver: &Solver, f0: &DistributionField) -> Result<EnergyTrace> {
    let start = Instant::now();
    let cfg = &solver.config;
    let mut state = solver.init(f0)?;
    let e0 = energy_functionals(solver, &state);
    if e0.h_norm.sqrt() > cfg.small_data_gate {
        return Err(Error::Validation(format!(
            "‖f₀‖_H = {:.3e} exceeds the small-data gate {:.3e}",
            e0.h_norm.sqrt(), cfg.small_data_gate
        )));
    }
    let steps = (cfg.t_final / cfg.dt).round().max(1.0) as usize;
    let checkpoint = (steps / 10).max(1);
    let record = |f: &DistributionField, prev: Option<&EnergyRecord>, residual: f64, iters: usize| -> Result<EnergyRecord> {
        let e = energy_functionals(solver, f);
        let interaction = interaction_functionals(solver, f)?.total;
        let (micro, mac) = split_dissipation(solver, f)?;
        let m = match prev {
            Some(p) => p.m - p.h_norm + e.h_norm + 0.5 * (f.t - p.t) * (p.dissipation + e.dissipation),
            None => e.h_norm,
        };
        Ok(EnergyRecord {
            t: f.t,
            h_norm: e.h_norm,
            i_norm: e.i_norm,
            m,
            dissipation: e.dissipation,
            interaction,
            energy: e.h_norm - cfg.energy_kappa * interaction,
            micro_dissipation: micro,
            macro_dissipation: mac,
            conserved: f.conserved_moments(&solver.ops.mass).iter().fold(0.0, |a, v| a.max(v.abs())),
            residual,
            picard_iterations: iters,
        })
    };
    let mut records = vec![record(&state, None, 0.0, 0)?];
    let mut min_ratio = min_density_ratio(solver, &state)?;
    let zero = state.max_abs() == 0.0;
    for s in 1..=steps {
        let (next, info) = solver.step(&state)?;
        let residual = if zero { 0.0 } else { conservation_residuals(solver, &state, &next)?.max_relative() };
        let rec = record(&next, records.last(), residual, info.picard_iterations)?;
        records.push(rec);
        state = next;
        if s % checkpoint == 0 || s == steps {
            min_ratio = min_ratio.min(min_density_ratio(solver, &state)?);
        }
    }
    let e_ref = records[0].energy.abs().max(f64::MIN_POSITIVE);
    let max_energy_increase = records.windows(2).map(|w| (w[1].energy - w[0].energy) / e_ref).fold(f64::NEG_INFINITY, f64::max);
    let half = records.len() / 2;
    let fit = if zero {
        None
    } else {
        let (t, h): (Vec<f64>, Vec<f64>) = records[half..].iter().map(|r| (r.t, r.h_norm)).unzip();
        fit_decay(&t, &h)
    };
    Ok(EnergyTrace {
        max_conserved: records.iter().map(|r| r.conserved).fold(0.0, f64::max),
        max_residual: records.iter().map(|r| r.residual).fold(0.0, f64::max),
        coercivity: fit_coercivity(&records),
        fit,
        max_energy_increase,
        min_density_ratio: min_ratio,
        initial_h_norm: e0.h_norm,
        assembly_seconds: solver.ops.assembly_seconds,
        wall_seconds: start.elapsed().as_secs_f64(),
        records,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::stepper::tests::{coarse_config, coarse_ops};
    use crate::solver::InitialData;

    fn solver(cfg: SolverConfig) -> Solver {
        Solver::with_operators(cfg, coarse_ops()).unwrap()
    }

    #[test]
    fn fit_recovers_exponential() {
        let t: Vec<f64> = (0..20).map(|i| i as f64 * 0.1).collect();
        let v: Vec<f64> = t.iter().map(|t| 3.0 * (-1.7 * t).exp()).collect();
        let f = fit_decay(&t, &v).unwrap();
        assert!((f.lambda - 1.7).abs() < 1e-12 && (f.r_squared - 1.0).abs() < 1e-12);
        assert!(fit_decay(&t[..2], &v[..2]).is_none());
    }

    #[test]
    fn zero_data_gives_flat_trace() {
        let s = solver(SolverConfig { t_final: 0.1, ..coarse_config() });
        let tr = run_decay(&s, &s.zero_field()).unwrap();
        assert!(tr.fit.is_none());
        assert!(tr.records.iter().all(|r| r.h_norm == 0.0 && r.m == 0.0 && r.dissipation == 0.0));
    }

    #[test]
    fn parseval_and_norm_signs() {
        let s = solver(coarse_config());
        let f = s.init(&InitialData::default().build(2, s.config.box_length).unwrap()).unwrap();
        // ‖f‖²_{L²_{x,p}} on the physical grid equals the mode sum
        let u = s.physical_coefficients(&f);
        let mut phys = 0.0;
        for v in &u {
            for m in 0..BASIS_LEN {
                for n in 0..BASIS_LEN {
                    phys += v[m] * s.ops.mass[(m, n)] * v[n];
                }
            }
        }
        phys /= u.len() as f64;
        let modes = f.weighted_form(&s.ops.mass, |_| 1.0);
        assert!((phys - modes).abs() < 1e-10 * modes, "{phys} vs {modes}");
        let e = energy_functionals(&s, &f);
        assert!(e.h_norm > modes && e.i_norm > 0.0 && e.dissipation >= e.i_norm);
    }

    #[test]
    fn short_run_decays_and_gate_refuses_large_data() {
        let s = solver(SolverConfig { t_final: 0.4, ..coarse_config() });
        let f0 = InitialData::default().build(2, s.config.box_length).unwrap();
        let tr = run_decay(&s, &f0).unwrap();
        assert!(tr.energy_monotone(1e-10), "{}", tr.max_energy_increase);
        assert!(tr.max_conserved < 1e-12);
        assert!(tr.max_residual < 1e-6);
        assert!(tr.records.windows(2).all(|w| w[1].m >= w[0].m));
        assert!(tr.fit.unwrap().lambda > 0.0);
        let big = InitialData { amplitude: 10.0, seed: 1 }.build(2, s.config.box_length).unwrap();
        assert!(matches!(run_decay(&s, &big), Err(Error::Validation(_))));
    }
}
