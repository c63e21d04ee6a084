//! Numerical probes of the collision estimates.
//!
//! Each probe evaluates both sides of an inequality on sampled inputs, fits
//! scaling exponents where the estimate has one, and compares empirical
//! constants at two resolutions. Probes never assert universal constants:
//! they check sign, finiteness, fitted slopes within a declared slack, and
//! stability of the constants under grid doubling.

pub mod family;

pub use family::{MemberKind, MemberSpec, TestFunctionFamily, MIN_FAMILY};

use crate::collision::dual::{coercive_kernel, integrate_e_p_near, COERCIVE_EXPONENT};
use crate::collision::{AngularSpec, Collision, MomentumFunction, TrilinearShells};
use crate::error::{Error, Result};
use crate::geometry::{relative_momentum_sq, Boost, FourMomentum, FourVector};
use crate::kernel::{chi_k, KernelSpec, PowerLawKernel};
use crate::norms::{norm_iag, weighted_l2, FractionalSpec, LpDecomposition, LpSpec};
use crate::quadrature::{MomentumGrid, MomentumGridSpec, SectionRule};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Probe resolution, sample sizes and slacks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifyConfig {
    pub seed: u64,
    pub family_size: usize,
    /// Number of `(f, h, η)` triples for the trilinear probes.
    pub triples: usize,
    /// Base momentum grid; the second resolution doubles its radial nodes.
    pub grid: MomentumGridSpec,
    pub angular: AngularSpec,
    pub fractional: FractionalSpec,
    pub lp: LpSpec,
    /// Section rule of the surface probes; the second resolution doubles it.
    pub section: SectionRule,
    /// Exponent `m` of the `L²_{−m}` norms.
    pub m: f64,
    /// Allowed excess of a fitted log₂-slope over its bound.
    pub slope_slack: f64,
    /// Allowed deviation of the `T^k_−` slope from `γ`.
    pub minus_slope_tolerance: f64,
    /// Largest allowed ratio of constants at the two resolutions.
    pub stability_factor: f64,
    /// Largest relative change of the norm-comparability ratios under doubling.
    pub comparability_tolerance: f64,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            seed: 7,
            family_size: 21,
            triples: 50,
            grid: MomentumGridSpec { radial_nodes: 8, sphere_theta: 2, sphere_phi: 4, ..Default::default() },
            angular: AngularSpec { k_min: -4, k_max: 10, ..Default::default() },
            fractional: FractionalSpec::default(),
            lp: LpSpec::default(),
            section: SectionRule::default(),
            m: 2.0,
            slope_slack: 0.3,
            minus_slope_tolerance: 0.2,
            stability_factor: 2.0,
            comparability_tolerance: 0.3,
        }
    }
}

impl VerifyConfig {
    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        self.angular.validate()?;
        self.fractional.validate()?;
        self.section.validate()?;
        if self.angular.k_min > 0 || self.angular.k_max < 8 {
            return Err(Error::Validation("verify needs the dyadic shells k = 0..8 resolved".into()));
        }
        let positive = [self.slope_slack, self.minus_slope_tolerance, self.comparability_tolerance];
        if positive.iter().any(|v| !(*v > 0.0)) || !(self.stability_factor > 1.0) || !(self.m >= 0.0) {
            return Err(Error::Validation("slacks must be positive, stability_factor > 1 and m ≥ 0".into()));
        }
        if self.family_size < MIN_FAMILY || self.triples == 0 {
            return Err(Error::InsufficientSamples(format!(
                "family_size = {} (minimum {MIN_FAMILY}) and triples = {} (minimum 1)",
                self.family_size, self.triples
            )));
        }
        Ok(())
    }
}

/// JSON has no NaN: serde_json writes `null`, and these read it back as NaN.
mod nan_from_null {
    use serde::{Deserialize, Deserializer};
    use std::collections::BTreeMap;

    pub fn scalar<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
    }

    pub fn table<'de, D: Deserializer<'de>>(d: D) -> Result<BTreeMap<String, Vec<f64>>, D::Error> {
        let raw = BTreeMap::<String, Vec<Option<f64>>>::deserialize(d)?;
        Ok(raw.into_iter().map(|(k, v)| (k, v.into_iter().map(|x| x.unwrap_or(f64::NAN)).collect())).collect())
    }

    /// Infinite bounds are also written as `null`; they read back as `[-inf, +inf]`.
    pub fn bounds<'de, D: Deserializer<'de>>(d: D) -> Result<Option<[f64; 2]>, D::Error> {
        let raw = Option::<[Option<f64>; 2]>::deserialize(d)?;
        Ok(raw.map(|[lo, hi]| [lo.unwrap_or(f64::NEG_INFINITY), hi.unwrap_or(f64::INFINITY)]))
    }
}

/// Outcome of one probe.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateProbe {
    pub name: String,
    /// The inequality being probed.
    pub anchor: String,
    /// Samples that entered the statistics.
    pub samples: usize,
    /// Samples dropped because a quadrature failed.
    pub failures: usize,
    /// Empirical constant (sup or inf of the normalised ratio) at the base resolution.
    #[serde(deserialize_with = "nan_from_null::scalar")]
    pub constant: f64,
    /// The same constant at the doubled resolution.
    #[serde(deserialize_with = "nan_from_null::scalar")]
    pub constant_refined: f64,
    /// Fitted exponent, where the estimate has one.
    pub slope: Option<f64>,
    /// Upper or two-sided bound the slope is checked against.
    #[serde(deserialize_with = "nan_from_null::bounds")]
    pub slope_bound: Option<[f64; 2]>,
    pub pass: bool,
    /// Radial nodes (or section nodes) at the two resolutions.
    pub resolution: [usize; 2],
    /// Per-shell constants and other diagnostics.
    #[serde(deserialize_with = "nan_from_null::table")]
    pub detail: BTreeMap<String, Vec<f64>>,
    /// Reasons for failure, if any.
    pub notes: Vec<String>,
}

impl EstimateProbe {
    fn new(name: &str, anchor: &str, resolution: [usize; 2]) -> Self {
        Self {
            name: name.into(),
            anchor: anchor.into(),
            samples: 0,
            failures: 0,
            constant: f64::NAN,
            constant_refined: f64::NAN,
            slope: None,
            slope_bound: None,
            pass: false,
            resolution,
            detail: BTreeMap::new(),
            notes: Vec::new(),
        }
    }

    /// Records a failed condition.
    fn require(&mut self, ok: bool, why: impl FnOnce() -> String) {
        if !ok {
            self.notes.push(why());
        }
    }

    fn finish(mut self) -> Self {
        self.pass = self.notes.is_empty();
        self
    }
}

/// Full verification report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub seed: u64,
    pub kernel: KernelSpec,
    pub config: VerifyConfig,
    pub family: Vec<String>,
    pub probes: Vec<EstimateProbe>,
    pub all_pass: bool,
}

impl VerifyReport {
    pub fn probe(&self, name: &str) -> Option<&EstimateProbe> {
        self.probes.iter().find(|p| p.name == name)
    }
}

/// Least-squares `(slope, intercept)` of `ys` against `xs`.
pub fn fit_line(xs: &[f64], ys: &[f64]) -> Option<(f64, f64)> {
    let n = xs.len();
    if n < 2 || ys.len() != n {
        return None;
    }
    let nf = n as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / nf, ys.iter().sum::<f64>() / nf);
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    Some((slope, my - slope * mx))
}

/// Fitted log₂-slope of positive per-shell constants.
fn log2_slope(ks: &[i32], values: &[f64]) -> Option<f64> {
    let (x, y): (Vec<f64>, Vec<f64>) = ks.iter().zip(values).filter(|(_, v)| **v > 0.0 && v.is_finite()).map(|(k, v)| (*k as f64, v.log2())).unzip();
    if x.len() < ks.len().div_ceil(2).max(2) {
        return None;
    }
    fit_line(&x, &y).map(|(s, _)| s)
}

fn ratio_within(a: f64, b: f64, factor: f64) -> bool {
    a.is_finite() && b.is_finite() && a > 0.0 && b > 0.0 && a / b <= factor && b / a <= factor
}

/// Radially localised test function `exp(−ln²(p⁰/c)/(2s²))`.
fn tail_function(c: f64) -> MomentumFunction {
    const WIDTH: f64 = 0.35;
    MomentumFunction::new(format!("tail-{c}"), true, move |p| (-(p.p0 / c).ln().powi(2) / (2.0 * WIDTH * WIDTH)).exp())
}

/// Centres of the tail functions of the compactness probe.
const TAIL_CENTRES: [f64; 4] = [2.0, 4.0, 8.0, 16.0];

/// Everything the probes need at one resolution.
struct Level {
    radial: usize,
    grid: MomentumGrid,
    l2_minus_m: Vec<f64>,
    l2: Vec<f64>,
    l2_w: Vec<f64>,
    iag: Vec<Option<f64>>,
    n_inner: Vec<Option<f64>>,
    k_inner: Vec<Option<f64>>,
    lp: Vec<Option<f64>>,
    shells: Vec<Option<TrilinearShells>>,
    /// Per tail function: `(|⟨Kf,f⟩|, |f|²_{L²}, |f|²_{L²_w}, ⟨p⁰⟩)`.
    tail: Vec<Option<[f64; 4]>>,
}

impl Level {
    fn compute(
        kernel: &PowerLawKernel,
        spec: &KernelSpec,
        cfg: &VerifyConfig,
        grid_spec: &MomentumGridSpec,
        funcs: &[MomentumFunction],
        triples: &[[usize; 3]],
        lp: &LpDecomposition,
    ) -> Result<Self> {
        let grid = MomentumGrid::new(grid_spec)?;
        let coll = Collision::new(kernel, &grid, &cfg.angular)?;
        let w = 0.5 * (spec.a + spec.gamma);
        let sq = |v: f64| v.sqrt();
        let l2_minus_m = funcs.iter().map(|f| sq(weighted_l2(f, -cfg.m, &grid))).collect();
        let l2 = funcs.iter().map(|f| sq(weighted_l2(f, 0.0, &grid))).collect();
        let l2_w = funcs.iter().map(|f| sq(weighted_l2(f, w, &grid))).collect();
        let iag = funcs
            .iter()
            .map(|f| norm_iag(f, spec, &grid, &cfg.fractional).ok().map(|n| n.squared()).filter(|v| v.is_finite()))
            .collect();
        let n_inner = funcs.iter().map(|f| coll.inner_n(&grid, f).ok().map(|n| n.total())).collect();
        let k_inner = funcs.iter().map(|f| coll.inner_k(&grid, f).ok()).collect();
        let lp = funcs.iter().map(|f| lp.square_sum(f, spec.gamma, w, &grid).ok().map(|s| s.total)).collect();
        let shells = triples.iter().map(|[a, b, c]| coll.trilinear(&grid, &funcs[*a], &funcs[*b], &funcs[*c]).ok()).collect();
        let tail = TAIL_CENTRES
            .iter()
            .map(|&c| {
                let f = tail_function(c);
                let k = coll.inner_k(&grid, &f).ok()?;
                let l0 = weighted_l2(&f, 0.0, &grid);
                let mean = weighted_l2(&f, 1.0, &grid) / l0;
                Some([k.abs(), l0, weighted_l2(&f, w, &grid), mean])
            })
            .collect();
        Ok(Self { radial: grid_spec.radial_nodes, grid, l2_minus_m, l2, l2_w, iag, n_inner, k_inner, lp, shells, tail })
    }

    /// `|f|²_{L²(B_R)}` of member `f`.
    fn ball_norm(&self, f: &MomentumFunction, r: f64) -> f64 {
        self.grid
            .nodes
            .iter()
            .zip(&self.grid.weights)
            .filter(|(p, _)| p.p0 * p.p0 - 1.0 <= r * r)
            .map(|(p, w)| w * f.eval(p).powi(2))
            .sum()
    }
}

/// Per-shell sup of `|value_k|/norm` over the triples, for `k ∈ ks`.
fn shell_constants(
    level: &Level,
    triples: &[[usize; 3]],
    ks: &[i32],
    value: impl Fn(&TrilinearShells, usize) -> f64,
    norm: impl Fn(&Level, [usize; 3]) -> Option<f64>,
) -> (Vec<f64>, usize, usize) {
    let mut sup = vec![0.0f64; ks.len()];
    let (mut used, mut failed) = (0, 0);
    for (t, sh) in triples.iter().zip(&level.shells) {
        let Some(sh) = sh else {
            failed += 1;
            continue;
        };
        let Some(n) = norm(level, *t).filter(|n| *n > 0.0) else { continue };
        used += 1;
        for (i, k) in ks.iter().enumerate() {
            if let Some(slot) = sh.k.iter().position(|kk| kk == k) {
                sup[i] = sup[i].max(value(sh, slot).abs() / n);
            }
        }
    }
    (sup, used, failed)
}

/// Runs every probe. Deterministic for a given configuration.
pub fn run_verify(kernel_spec: &KernelSpec, cfg: &VerifyConfig) -> Result<VerifyReport> {
    kernel_spec.validate()?;
    cfg.validate()?;
    let kernel = PowerLawKernel::new(*kernel_spec)?;
    let family = TestFunctionFamily::new(cfg.seed, cfg.family_size)?;
    let funcs = family.functions();
    let triples = family.triples(cfg.triples);
    let lp = LpDecomposition::new(&cfg.lp)?;
    let base = Level::compute(&kernel, kernel_spec, cfg, &cfg.grid, &funcs, &triples, &lp)?;
    let fine = Level::compute(&kernel, kernel_spec, cfg, &cfg.grid.refined(), &funcs, &triples, &lp)?;
    let levels = [base, fine];
    let probes = vec![
        probe_dyadic(&levels, &triples, kernel_spec, cfg, Side::Minus),
        probe_dyadic(&levels, &triples, kernel_spec, cfg, Side::Plus),
        probe_cancellation(&levels, &triples, kernel_spec, cfg),
        probe_surface_bound(kernel_spec, cfg)?,
        probe_comparability(&levels, cfg),
        probe_coercive_kernel(&kernel, kernel_spec, cfg)?,
        probe_trilinear(&levels, &triples, cfg),
        probe_compact_k(&levels, &funcs, kernel_spec, cfg),
        probe_littlewood_paley(&levels, &lp, cfg),
    ];
    let all_pass = probes.iter().all(|p| p.pass);
    Ok(VerifyReport {
        seed: cfg.seed,
        kernel: *kernel_spec,
        config: cfg.clone(),
        family: family.members.iter().map(|m| m.name.clone()).collect(),
        probes,
        all_pass,
    })
}

#[derive(Clone, Copy, PartialEq)]
enum Side {
    Minus,
    Plus,
}

const DYADIC_KS: [i32; 8] = [1, 2, 3, 4, 5, 6, 7, 8];

fn probe_dyadic(levels: &[Level; 2], triples: &[[usize; 3]], spec: &KernelSpec, cfg: &VerifyConfig, side: Side) -> EstimateProbe {
    let gamma = spec.gamma;
    let (name, anchor) = match side {
        Side::Minus => ("dyadic_minus", "|T^k_-(f,h,η)| ≤ C 2^{kγ} |f|_{L²_{-m}} |h|_{L²_{(a+γ)/2}} |η|_{L²_{(a+γ)/2}}"),
        Side::Plus => ("dyadic_plus", "|T^k_+(f,h,η)| ≤ C 2^{kγ} |f|_{L²} |h|_{L²_{(a+γ)/2}} |η|_{L²_{(a+γ)/2}}"),
    };
    let mut probe = EstimateProbe::new(name, anchor, [levels[0].radial, levels[1].radial]);
    let mut consts = [0.0; 2];
    let mut slopes = [None; 2];
    for (li, level) in levels.iter().enumerate() {
        let (sup, used, failed) = shell_constants(
            level,
            triples,
            &DYADIC_KS,
            |sh, i| if side == Side::Minus { sh.minus[i] } else { sh.plus[i] },
            |l, [a, b, c]| {
                let nf = if side == Side::Minus { l.l2_minus_m[a] } else { l.l2[a] };
                Some(nf * l.l2_w[b] * l.l2_w[c])
            },
        );
        if li == 0 {
            probe.samples = used;
        }
        probe.failures += failed;
        let normalised: Vec<f64> = sup.iter().zip(DYADIC_KS).map(|(c, k)| c / 2f64.powf(gamma * k as f64)).collect();
        consts[li] = normalised.iter().copied().fold(0.0, f64::max);
        slopes[li] = log2_slope(&DYADIC_KS, &sup);
        probe.detail.insert(format!("shell_constant_{}", ["base", "refined"][li]), sup);
    }
    probe.detail.insert("k".into(), DYADIC_KS.iter().map(|k| *k as f64).collect());
    probe.constant = consts[0];
    probe.constant_refined = consts[1];
    probe.slope = slopes[0];
    let bound = match side {
        Side::Minus => [gamma - cfg.minus_slope_tolerance, gamma + cfg.minus_slope_tolerance],
        Side::Plus => [f64::NEG_INFINITY, gamma + cfg.slope_slack],
    };
    probe.slope_bound = Some(bound);
    for (li, s) in slopes.iter().enumerate() {
        probe.require(s.is_some_and(|s| s >= bound[0] && s <= bound[1]), || {
            format!("slope {s:?} outside [{}, {}] at resolution {}", bound[0], bound[1], levels[li].radial)
        });
    }
    probe.require(probe.samples > 0, || "no usable triples".into());
    probe.require(ratio_within(consts[0], consts[1], cfg.stability_factor), || {
        format!("constant {:.4e} vs {:.4e} under grid doubling", consts[0], consts[1])
    });
    probe.finish()
}

const CANCELLATION_KS: [i32; 7] = [2, 3, 4, 5, 6, 7, 8];

fn probe_cancellation(levels: &[Level; 2], triples: &[[usize; 3]], spec: &KernelSpec, cfg: &VerifyConfig) -> EstimateProbe {
    let gamma = spec.gamma;
    let mut probe = EstimateProbe::new(
        "cancellation",
        "|T^k_+ − T^k_-|(f,h,η) ≤ C max{2^{(γ−2)k}, 2^{(γ−3)k/2}} |f|_{L²_{-m}} |h|_{L²_{(a+γ)/2}} |η|_{I^{a,γ}}, k ≥ 2",
        [levels[0].radial, levels[1].radial],
    );
    let rate = (gamma - 2.0).max(0.5 * (gamma - 3.0));
    let bound = rate + cfg.slope_slack;
    let mut consts = [0.0; 2];
    let mut slopes = [None; 2];
    let mut improvement = [None; 2];
    for (li, level) in levels.iter().enumerate() {
        let (sup, used, failed) = shell_constants(
            level,
            triples,
            &CANCELLATION_KS,
            |sh, i| sh.difference[i],
            |l, [a, b, c]| l.iag[c].map(|i| l.l2_minus_m[a] * l.l2_w[b] * i.sqrt()),
        );
        let (minus, _, _) =
            shell_constants(level, triples, &CANCELLATION_KS, |sh, i| sh.minus[i], |l, [a, b, c]| Some(l.l2_minus_m[a] * l.l2_w[b] * l.l2_w[c]));
        if li == 0 {
            probe.samples = used;
        }
        probe.failures += failed;
        consts[li] = sup.iter().zip(CANCELLATION_KS).map(|(c, k)| c / 2f64.powf(rate * k as f64)).fold(0.0, f64::max);
        slopes[li] = log2_slope(&CANCELLATION_KS, &sup);
        improvement[li] = slopes[li].zip(log2_slope(&CANCELLATION_KS, &minus)).map(|(d, m)| m - d);
        probe.detail.insert(format!("shell_constant_{}", ["base", "refined"][li]), sup);
    }
    probe.detail.insert("k".into(), CANCELLATION_KS.iter().map(|k| *k as f64).collect());
    probe.detail.insert("slope_improvement_over_minus".into(), improvement.iter().map(|v| v.unwrap_or(f64::NAN)).collect());
    probe.constant = consts[0];
    probe.constant_refined = consts[1];
    probe.slope = slopes[0];
    probe.slope_bound = Some([f64::NEG_INFINITY, bound]);
    for (li, s) in slopes.iter().enumerate() {
        probe.require(s.is_some_and(|s| s <= bound), || format!("slope {s:?} above {bound} at resolution {}", levels[li].radial));
        probe.require(improvement[li].is_some_and(|d| d >= 1.0), || {
            format!("slope improves on T^k_- by {:?} < 1 at resolution {}", improvement[li], levels[li].radial)
        });
    }
    probe.require(probe.samples > 0, || "no usable triples".into());
    probe.require(ratio_within(consts[0], consts[1], cfg.stability_factor), || {
        format!("constant {:.4e} vs {:.4e} under grid doubling", consts[0], consts[1])
    });
    probe.finish()
}

/// Doubles every node count of a section rule.
fn refined_section(rule: &SectionRule) -> SectionRule {
    SectionRule { n_radial: 2 * rule.n_radial, n_phi: 2 * rule.n_phi, ..rule.clone() }
}

/// Seeded on-shell momenta with `|p| ≤ r`.
fn random_momenta(rng: &mut ChaCha8Rng, n: usize, r: f64) -> Vec<FourMomentum> {
    (0..n)
        .map(|_| FourMomentum::on_shell([rng.gen_range(-r..r), rng.gen_range(-r..r), rng.gen_range(-r..r)]))
        .collect()
}

const SURFACE_KS: [i32; 9] = [0, 1, 2, 3, 4, 5, 6, 7, 8];

fn probe_surface_bound(spec: &KernelSpec, cfg: &VerifyConfig) -> Result<EstimateProbe> {
    let gamma = spec.gamma;
    let rules = [cfg.section.clone(), refined_section(&cfg.section)];
    let mut probe = EstimateProbe::new(
        "surface_bound",
        "∫_{E^p_{q−p'}} dπ_p/p⁰ g̃ ḡ^{−2−γ} χ_k(ḡ) ≤ C 2^{kγ} √q⁰, uniformly in k",
        [rules[0].n_radial, rules[1].n_radial],
    );
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5375_7266);
    let pp = random_momenta(&mut rng, 6, 2.0);
    let qs = random_momenta(&mut rng, 6, 2.0);
    let pairs: Vec<(FourMomentum, FourMomentum)> = pp.into_iter().zip(qs).filter(|(a, b)| relative_momentum_sq(a, b) > 1e-6).collect();
    let mut consts = [0.0; 2];
    for (li, rule) in rules.iter().enumerate() {
        let per_pair: Vec<Option<Vec<f64>>> = pairs
            .par_iter()
            .map(|(pprime, q)| {
                let gt = relative_momentum_sq(pprime, q).sqrt();
                SURFACE_KS
                    .iter()
                    .map(|&k| {
                        let (ra, rb) = (2f64.powi(-k - 1), 2f64.powi(-k) * 16.0);
                        let f = |p: &FourMomentum| {
                            let gb = relative_momentum_sq(p, pprime).sqrt();
                            if gb > 0.0 && chi_k(k, gb).unwrap_or(0.0) > 0.0 {
                                gt * gb.powf(-2.0 - gamma)
                            } else {
                                0.0
                            }
                        };
                        let v = integrate_e_p_near(pprime, q, ra, rb, f, rule).ok()?.value;
                        Some(v / (2f64.powf(k as f64 * gamma) * q.p0.sqrt()))
                    })
                    .collect()
            })
            .collect();
        let mut sup = vec![0.0f64; SURFACE_KS.len()];
        for row in &per_pair {
            match row {
                Some(v) => v.iter().zip(sup.iter_mut()).for_each(|(a, s)| *s = s.max(*a)),
                None => probe.failures += 1,
            }
        }
        if li == 0 {
            probe.samples = per_pair.iter().filter(|r| r.is_some()).count();
        }
        let (lo, hi) = sup.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), v| (lo.min(*v), hi.max(*v)));
        consts[li] = hi;
        probe.require(lo > 0.0 && hi / lo <= cfg.stability_factor, || {
            format!("shell constants range over [{lo:.4e}, {hi:.4e}] at section resolution {}", rule.n_radial)
        });
        probe.detail.insert(format!("shell_constant_{}", ["base", "refined"][li]), sup);
    }
    probe.detail.insert("k".into(), SURFACE_KS.iter().map(|k| *k as f64).collect());
    probe.constant = consts[0];
    probe.constant_refined = consts[1];
    probe.require(probe.samples > 0, || "no usable pairs".into());
    probe.require(ratio_within(consts[0], consts[1], cfg.stability_factor), || {
        format!("constant {:.4e} vs {:.4e} under section refinement", consts[0], consts[1])
    });
    Ok(probe.finish())
}

fn probe_comparability(levels: &[Level; 2], cfg: &VerifyConfig) -> EstimateProbe {
    let mut probe =
        EstimateProbe::new("norm_comparability", "c |f|²_{I^{a,γ}} ≤ ⟨Nf,f⟩ ≤ C |f|²_{I^{a,γ}}", [levels[0].radial, levels[1].radial]);
    let ratios: Vec<[Option<f64>; 2]> = (0..levels[0].iag.len())
        .map(|i| std::array::from_fn(|li| Some(levels[li].n_inner[i]? / levels[li].iag[i].filter(|v| *v > 0.0)?)))
        .collect();
    let mut inf = [f64::INFINITY; 2];
    let mut sup = [0.0f64; 2];
    let mut worst_change = 0.0f64;
    for r in &ratios {
        match r {
            [Some(a), Some(b)] => {
                probe.samples += 1;
                for (li, v) in [a, b].into_iter().enumerate() {
                    inf[li] = inf[li].min(*v);
                    sup[li] = sup[li].max(*v);
                }
                worst_change = worst_change.max((b / a - 1.0).abs());
            }
            _ => probe.failures += 1,
        }
    }
    probe.constant = inf[0];
    probe.constant_refined = inf[1];
    probe.detail.insert("inf".into(), inf.to_vec());
    probe.detail.insert("sup".into(), sup.to_vec());
    probe.detail.insert("max_relative_change".into(), vec![worst_change]);
    let n = probe.samples;
    probe.require(n >= MIN_FAMILY, || format!("only {n} usable members"));
    probe.require(inf.iter().all(|v| *v > 0.0 && v.is_finite()), || format!("inf ratio {inf:?} not positive"));
    probe.require(sup.iter().all(|v| v.is_finite()), || format!("sup ratio {sup:?} not finite"));
    for (name, v) in [("inf", inf), ("sup", sup)] {
        let change = (v[1] / v[0] - 1.0).abs();
        probe.require(change <= cfg.comparability_tolerance, || format!("{name} ratio changes by {change:.3} under grid doubling"));
    }
    probe.finish()
}

/// Sample set of the pointwise coercivity probe: `p'⁰ ∈ [1, 8]`, `ḡ ∈ [1e−3, 1]`.
pub const COERCIVE_ENERGIES: [f64; 4] = [1.0, 2.0, 4.0, 8.0];
pub const COERCIVE_GBARS: [f64; 6] = [1e-3, 1e-2, 0.05, 0.2, 0.5, 1.0];

/// `p` with `ḡ(p, p') = gbar` in direction `u` of the rest frame of `p'`.
pub fn partner_at(pprime: &FourMomentum, gbar: f64, u: [f64; 3]) -> FourMomentum {
    let r = gbar * (1.0 + 0.25 * gbar * gbar).sqrt();
    let y0 = 1.0 + 0.5 * gbar * gbar;
    let n = (u[0] * u[0] + u[1] * u[1] + u[2] * u[2]).sqrt();
    let y = FourVector::new(y0, [r * u[0] / n, r * u[1] / n, r * u[2] / n]);
    FourMomentum::on_shell(Boost::from_rest_of(pprime).apply(&y).x)
}

fn probe_coercive_kernel(kernel: &PowerLawKernel, spec: &KernelSpec, cfg: &VerifyConfig) -> Result<EstimateProbe> {
    let rules = [cfg.section.clone(), refined_section(&cfg.section)];
    let mut probe = EstimateProbe::new(
        "coercive_kernel",
        "K(p,p') ḡ^{3+γ} / (p'⁰)^{2+(a+γ)/2} ≥ c₀ > 0 for ḡ ≤ 1",
        [rules[0].n_radial, rules[1].n_radial],
    );
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x436f_6572);
    let mut samples = Vec::new();
    for &e in &COERCIVE_ENERGIES {
        let r = (e * e - 1.0).sqrt();
        for _ in 0..3 {
            let dir = random_momenta(&mut rng, 2, 1.0);
            let n = dir[0].p.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-12);
            let pprime = FourMomentum::on_shell([r * dir[0].p[0] / n, r * dir[0].p[1] / n, r * dir[0].p[2] / n]);
            for &gb in &COERCIVE_GBARS {
                samples.push((e, gb, pprime, partner_at(&pprime, gb, dir[1].p)));
            }
        }
    }
    let expo = 2.0 + 0.5 * (spec.a + spec.gamma);
    let mut consts = [0.0; 2];
    let mut worst_slope = f64::NEG_INFINITY;
    for (li, rule) in rules.iter().enumerate() {
        let values: Vec<Option<f64>> = samples
            .par_iter()
            .map(|(_, gb, pprime, p)| coercive_kernel(p, pprime, kernel, COERCIVE_EXPONENT, rule).ok().map(|r| r.value * gb.powf(3.0 + spec.gamma)))
            .collect();
        let ratios: Vec<Option<f64>> = values.iter().zip(&samples).map(|(v, (e, ..))| v.map(|v| v / e.powf(expo))).collect();
        let ok: Vec<f64> = ratios.iter().flatten().copied().collect();
        if li == 0 {
            probe.samples = ok.len();
            probe.failures = ratios.len() - ok.len();
        }
        consts[li] = ok.iter().copied().fold(f64::INFINITY, f64::min);
        // Exponent of K in ḡ at fixed p', from K ḡ^{3+γ}.
        for chunk in values.chunks(COERCIVE_GBARS.len()) {
            let (x, y): (Vec<f64>, Vec<f64>) =
                COERCIVE_GBARS.iter().zip(chunk).filter_map(|(g, v)| v.filter(|v| *v > 0.0).map(|v| (g.ln(), v.ln()))).unzip();
            if let Some((s, _)) = fit_line(&x, &y) {
                worst_slope = worst_slope.max(s - (3.0 + spec.gamma));
            }
        }
        let per_energy = ratios
            .chunks(ratios.len() / COERCIVE_ENERGIES.len())
            .map(|c| c.iter().flatten().copied().fold(f64::INFINITY, f64::min))
            .collect();
        probe.detail.insert("energies".into(), COERCIVE_ENERGIES.to_vec());
        probe.detail.insert(format!("min_ratio_per_energy_{}", ["base", "refined"][li]), per_energy);
        probe.detail.insert(format!("ratio_{}", ["base", "refined"][li]), ratios.iter().map(|v| v.unwrap_or(f64::NAN)).collect());
    }
    let bound = -(3.0 + spec.gamma) + cfg.slope_slack;
    probe.constant = consts[0];
    probe.constant_refined = consts[1];
    probe.slope = Some(worst_slope);
    probe.slope_bound = Some([f64::NEG_INFINITY, bound]);
    let (n, failed) = (probe.samples, probe.failures);
    probe.require(n > 0 && failed == 0, || format!("{failed} samples failed"));
    probe.require(consts.iter().all(|c| *c > 0.0 && c.is_finite()), || format!("c₀ = {consts:?} not positive"));
    probe.require(worst_slope <= bound, || format!("ḡ exponent {worst_slope:.3} above {bound:.3}"));
    probe.require(ratio_within(consts[0], consts[1], cfg.stability_factor), || {
        format!("c₀ {:.4e} vs {:.4e} under section refinement", consts[0], consts[1])
    });
    Ok(probe.finish())
}

fn probe_trilinear(levels: &[Level; 2], triples: &[[usize; 3]], cfg: &VerifyConfig) -> EstimateProbe {
    let mut probe = EstimateProbe::new(
        "trilinear",
        "|⟨Γ(f,h),η⟩| ≤ C |f|_{L²} |h|_{I^{a,γ}} |η|_{I^{a,γ}}",
        [levels[0].radial, levels[1].radial],
    );
    let mut consts = [0.0f64; 2];
    for (li, level) in levels.iter().enumerate() {
        let (mut used, mut failed) = (0, 0);
        for ([a, b, c], sh) in triples.iter().zip(&level.shells) {
            let (Some(sh), Some(ib), Some(ic)) = (sh, level.iag[*b], level.iag[*c]) else {
                failed += 1;
                continue;
            };
            let n = level.l2[*a] * ib.sqrt() * ic.sqrt();
            if n > 0.0 {
                used += 1;
                consts[li] = consts[li].max(sh.total.abs() / n);
            }
        }
        if li == 0 {
            probe.samples = used;
        }
        probe.failures += failed;
    }
    probe.constant = consts[0];
    probe.constant_refined = consts[1];
    let n = probe.samples;
    probe.require(n >= 50.min(cfg.triples), || format!("only {n} usable triples"));
    probe.require(ratio_within(consts[0], consts[1], cfg.stability_factor), || {
        format!("constant {:.4e} vs {:.4e} under grid doubling", consts[0], consts[1])
    });
    probe.finish()
}

/// Allowed excess of the `⟨Kf,f⟩` growth exponent over `a+γ−δ`.
pub const GROWTH_SLACK: f64 = 0.2;

/// Tolerances `ε` of the compactness probe.
pub const COMPACT_EPSILONS: [f64; 2] = [0.1, 0.01];

fn probe_compact_k(levels: &[Level; 2], funcs: &[MomentumFunction], spec: &KernelSpec, cfg: &VerifyConfig) -> EstimateProbe {
    let mut probe = EstimateProbe::new(
        "compact_k",
        "|⟨Kf,f⟩| ≤ ε |f|²_{L²_{(a+γ)/2}} + C(ε) |f|²_{L²(B_{R(ε)})}, and |⟨Kf,f⟩| ≲ |f|²_{L²_{a+γ−δ}}, δ = min(γ,2)",
        [levels[0].radial, levels[1].radial],
    );
    let delta = spec.gamma.min(2.0);
    let growth_bound = spec.a + spec.gamma - delta + GROWTH_SLACK;
    let r_max = cfg.grid.r_max;
    let mut consts = [[0.0f64; 2]; 2];
    let mut radii = [[0.0f64; 2]; 2];
    let mut growth = [f64::NAN; 2];
    let mut tail_exp = [f64::NAN; 2];
    for (li, level) in levels.iter().enumerate() {
        let tail: Vec<[f64; 4]> = level.tail.iter().flatten().copied().collect();
        probe.failures += level.tail.len() - tail.len();
        let x: Vec<f64> = tail.iter().map(|t| t[3].ln()).collect();
        let g: Vec<f64> = tail.iter().map(|t| (t[0] / t[1]).ln()).collect();
        let r: Vec<f64> = tail.iter().map(|t| (t[0] / t[2]).ln()).collect();
        growth[li] = fit_line(&x, &g).map_or(f64::NAN, |s| s.0);
        let fit = fit_line(&x, &r);
        tail_exp[li] = fit.map_or(f64::NAN, |s| s.0);
        for (ei, eps) in COMPACT_EPSILONS.iter().enumerate() {
            // Energy at which the fitted tail ratio falls to ε, as a momentum radius.
            let e = match fit {
                Some((s, c)) if s < 0.0 => ((eps.ln() - c) / s).exp(),
                _ => f64::INFINITY,
            };
            let radius = (e * e - 1.0).max(0.0).sqrt();
            radii[ei][li] = radius;
            let ball = radius.min(r_max);
            let mut sup = 0.0f64;
            for (i, f) in funcs.iter().enumerate() {
                let Some(k) = level.k_inner[i] else { continue };
                let excess = (k.abs() - eps * level.l2_w[i].powi(2)).max(0.0);
                if excess > 0.0 {
                    let b = level.ball_norm(f, ball);
                    sup = sup.max(if b > 0.0 { excess / b } else { f64::INFINITY });
                }
            }
            consts[ei][li] = sup;
        }
        if li == 0 {
            probe.samples = level.k_inner.iter().flatten().count() + tail.len();
        }
        probe.failures += level.k_inner.iter().filter(|v| v.is_none()).count();
    }
    probe.constant = consts[0][0];
    probe.constant_refined = consts[0][1];
    probe.slope = Some(growth[0]);
    probe.slope_bound = Some([f64::NEG_INFINITY, growth_bound]);
    probe.detail.insert("epsilon".into(), COMPACT_EPSILONS.to_vec());
    probe.detail.insert("radius_base".into(), vec![radii[0][0], radii[1][0]]);
    probe.detail.insert("radius_refined".into(), vec![radii[0][1], radii[1][1]]);
    probe.detail.insert("constant_base".into(), vec![consts[0][0], consts[1][0]]);
    probe.detail.insert("constant_refined".into(), vec![consts[0][1], consts[1][1]]);
    probe.detail.insert("growth_exponent".into(), growth.to_vec());
    probe.detail.insert("tail_ratio_exponent".into(), tail_exp.to_vec());
    probe.detail.insert("tail_centres".into(), TAIL_CENTRES.to_vec());
    for g in growth {
        probe.require(g <= growth_bound, || format!("growth exponent {g:.3} above {growth_bound:.3}"));
    }
    for ei in 0..2 {
        let [a, b] = consts[ei];
        let stable = (a == 0.0 && b == 0.0) || ratio_within(a, b, cfg.stability_factor);
        probe.require(a.is_finite() && b.is_finite() && stable, || {
            format!("C(ε = {}) = {a:.4e} vs {b:.4e} under grid doubling", COMPACT_EPSILONS[ei])
        });
    }
    probe.finish()
}

fn probe_littlewood_paley(levels: &[Level; 2], lp: &LpDecomposition, cfg: &VerifyConfig) -> EstimateProbe {
    let mut probe = EstimateProbe::new(
        "littlewood_paley",
        "Σ_j 2^{γj} ∫|Δ_j f|²(p⁰)^ρ ≤ C (|f|²_{L²_ρ} + ∬ (p⁰p'⁰)^{ρ/2} (f(p)−f(p'))²/ḡ^{3+γ} 1_{ḡ≤1}), ρ = (a+γ)/2; Δ_j(1) = 0",
        [levels[0].radial, levels[1].radial],
    );
    let mut consts = [0.0f64; 2];
    for (li, level) in levels.iter().enumerate() {
        for (s, rhs) in level.lp.iter().zip(&level.iag) {
            match (s, rhs) {
                (Some(s), Some(r)) if *r > 0.0 => {
                    consts[li] = consts[li].max(s / r);
                    if li == 0 {
                        probe.samples += 1;
                    }
                }
                _ => probe.failures += 1,
            }
        }
    }
    let one = MomentumFunction::constant(1.0);
    let points = [[0.0, 0.0, 0.0], [0.3, -1.2, 0.8], [4.0, 1.0, -2.0]];
    let cancel = (1..=lp.spec.j_max)
        .flat_map(|j| points.iter().map(move |p| (j, p)))
        .map(|(j, p)| lp.delta(&one, j, &FourMomentum::on_shell(*p)).abs())
        .fold(0.0, f64::max);
    probe.detail.insert("max_delta_of_constant".into(), vec![cancel]);
    probe.constant = consts[0];
    probe.constant_refined = consts[1];
    probe.require(cancel <= 1e-9, || format!("|Δ_j(1)| = {cancel:e} > 1e-9"));
    let n = probe.samples;
    probe.require(n >= MIN_FAMILY, || format!("only {n} usable members"));
    probe.require(ratio_within(consts[0], consts[1], cfg.stability_factor), || {
        format!("constant {:.4e} vs {:.4e} under grid doubling", consts[0], consts[1])
    });
    probe.finish()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn probe_json_round_trip_keeps_non_finite_values() {
        let mut p = EstimateProbe::new("x", "y", [8, 16]);
        p.slope_bound = Some([f64::NEG_INFINITY, 0.5]);
        p.detail.insert("k".into(), vec![1.0, f64::NAN]);
        let back: EstimateProbe = serde_json::from_str(&serde_json::to_string(&p).unwrap()).unwrap();
        assert!(back.constant.is_nan() && back.constant_refined.is_nan());
        assert_eq!(back.slope_bound, Some([f64::NEG_INFINITY, 0.5]));
        assert!(back.detail["k"][1].is_nan());
    }

    #[test]
    fn line_fit_and_slopes() {
        let (s, c) = fit_line(&[0.0, 1.0, 2.0], &[1.0, 3.0, 5.0]).unwrap();
        assert!((s - 2.0).abs() < 1e-14 && (c - 1.0).abs() < 1e-14);
        assert!(fit_line(&[1.0], &[1.0]).is_none());
        let v: Vec<f64> = DYADIC_KS.iter().map(|k| 3.0 * 2f64.powf(0.5 * *k as f64)).collect();
        assert!((log2_slope(&DYADIC_KS, &v).unwrap() - 0.5).abs() < 1e-12);
        // Zero shells are dropped; too few remaining gives no slope.
        assert!(log2_slope(&DYADIC_KS, &[0.0; 8]).is_none());
    }

    #[test]
    fn partner_has_requested_gbar() {
        let pp = FourMomentum::on_shell([1.0, -2.0, 0.5]);
        for gb in COERCIVE_GBARS {
            let p = partner_at(&pp, gb, [0.2, 0.9, -0.4]);
            assert!((relative_momentum_sq(&p, &pp).sqrt() / gb - 1.0).abs() < 1e-6, "{gb}");
        }
    }

    /// A configuration small enough for unit tests (the probes need not pass).
    pub(crate) fn tiny_config() -> VerifyConfig {
        VerifyConfig {
            family_size: 3,
            triples: 3,
            grid: MomentumGridSpec { radial_nodes: 4, sphere_theta: 2, sphere_phi: 2, ..Default::default() },
            angular: AngularSpec { k_min: -2, k_max: 8, shell_theta: 2, shell_phi_small: 4, shell_phi: 4, ..Default::default() },
            fractional: FractionalSpec { k_max: 4, shell_nodes: 2, sphere_theta: 2, sphere_phi: 4 },
            lp: LpSpec { j_max: 2, ball_radial: 4, ball_theta: 2, ball_phi: 4 },
            section: SectionRule { n_radial: 4, n_phi: 4, ..Default::default() },
            ..Default::default()
        }
    }

    #[test]
    fn report_is_deterministic_and_complete() {
        let k = KernelSpec::default();
        let a = run_verify(&k, &tiny_config()).unwrap();
        let b = run_verify(&k, &tiny_config()).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        assert_eq!(a.probes.len(), 9);
        assert_eq!(a.all_pass, a.probes.iter().all(|p| p.pass));
        assert!(a.probes.iter().all(|p| p.pass == p.notes.is_empty()));
        assert!(a.probe("trilinear").is_some_and(|p| p.samples <= 3));
    }

    #[test]
    fn comparability_ratio_is_homogeneous() {
        let spec = KernelSpec::default();
        let cfg = tiny_config();
        let kernel = PowerLawKernel::new(spec).unwrap();
        let grid = MomentumGrid::new(&cfg.grid).unwrap();
        let coll = Collision::new(&kernel, &grid, &cfg.angular).unwrap();
        let f = TestFunctionFamily::new(3, 3).unwrap().functions().remove(0);
        let ratio = |f: &MomentumFunction| {
            coll.inner_n(&grid, f).unwrap().total() / norm_iag(f, &spec, &grid, &cfg.fractional).unwrap().squared()
        };
        let (a, b) = (ratio(&f), ratio(&f.scaled(10.0)));
        assert!((a / b - 1.0).abs() < 1e-9, "{a} vs {b}");
        // The zero function is excluded rather than producing 0/0.
        let zero = MomentumFunction::zero();
        assert_eq!(coll.inner_n(&grid, &zero).unwrap().total(), 0.0);
    }

    #[test]
    fn config_guards() {
        assert!(VerifyConfig::default().validate().is_ok());
        let small = VerifyConfig { family_size: 1, ..Default::default() };
        assert!(matches!(small.validate(), Err(Error::InsufficientSamples(_))));
        let narrow = VerifyConfig { angular: AngularSpec { k_max: 5, ..VerifyConfig::default().angular }, ..Default::default() };
        assert!(matches!(narrow.validate(), Err(Error::Validation(_))));
    }
}
