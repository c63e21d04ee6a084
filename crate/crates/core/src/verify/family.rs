//! Seeded families of smooth test functions in momentum.

use crate::collision::{Juttner, MomentumFunction};
use crate::error::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Smallest family the probes accept.
pub const MIN_FAMILY: usize = 3;

/// Generator that produced a member.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MemberKind {
    /// `e^{−|p−c|²/(2w²)}`.
    Gaussian,
    /// `√J(p)·P(p)` with `P` a random polynomial of degree ≤ 2 in `(p, p⁰)`.
    ModulatedPolynomial,
    /// `e^{1/(|p−c|²/R² − 1)}` on the ball `|p−c| < R`.
    CompactBump,
}

/// Description of one member (the function itself is rebuilt from it).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MemberSpec {
    pub kind: MemberKind,
    pub name: String,
    /// Centre (Gaussian, bump) or linear coefficients (polynomial).
    pub centre: [f64; 3],
    /// Width, radius, or the `p⁰` coefficient.
    pub scale: f64,
    /// Remaining polynomial coefficients `(c, p⁰², p₁p₂, p₃²)`.
    pub extra: [f64; 4],
    /// Every generator decays faster than any power of `p⁰`.
    pub decays: bool,
}

impl MemberSpec {
    pub fn build(&self) -> MomentumFunction {
        let (c, s, e) = (self.centre, self.scale, self.extra);
        match self.kind {
            MemberKind::Gaussian => MomentumFunction::new(self.name.clone(), self.decays, move |p| {
                let d2: f64 = (0..3).map(|i| (p.p[i] - c[i]).powi(2)).sum();
                (-0.5 * d2 / (s * s)).exp()
            }),
            MemberKind::ModulatedPolynomial => MomentumFunction::sqrt_j_times(self.name.clone(), Juttner::new(), move |p| {
                e[0] + c[0] * p.p[0] + c[1] * p.p[1] + c[2] * p.p[2] + s * p.p0 + e[1] * p.p0 * p.p0 + e[2] * p.p[0] * p.p[1] + e[3] * p.p[2] * p.p[2]
            }),
            MemberKind::CompactBump => MomentumFunction::new(self.name.clone(), self.decays, move |p| {
                let r2: f64 = (0..3).map(|i| (p.p[i] - c[i]).powi(2)).sum::<f64>() / (s * s);
                if r2 < 1.0 {
                    (1.0 / (r2 - 1.0)).exp()
                } else {
                    0.0
                }
            }),
        }
    }
}

/// Deterministic family cycling through the three generators.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestFunctionFamily {
    pub seed: u64,
    pub members: Vec<MemberSpec>,
}

impl TestFunctionFamily {
    /// Builds `size` members from `seed`; fewer than [`MIN_FAMILY`] is an
    /// insufficient-sample error.
    pub fn new(seed: u64, size: usize) -> Result<Self> {
        if size < MIN_FAMILY {
            return Err(Error::InsufficientSamples(format!("family of {size} members; at least {MIN_FAMILY} are needed")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let uniform3 = |rng: &mut ChaCha8Rng, a: f64| [rng.gen_range(-a..a), rng.gen_range(-a..a), rng.gen_range(-a..a)];
        let members = (0..size)
            .map(|i| {
                let kind = [MemberKind::Gaussian, MemberKind::ModulatedPolynomial, MemberKind::CompactBump][i % 3];
                let (centre, scale, extra) = match kind {
                    MemberKind::Gaussian => (uniform3(&mut rng, 1.5), rng.gen_range(0.5..1.5), [0.0; 4]),
                    MemberKind::ModulatedPolynomial => {
                        let lin = uniform3(&mut rng, 1.0);
                        let s = rng.gen_range(-0.5..0.5);
                        let extra = [rng.gen_range(0.5..1.5), rng.gen_range(-0.2..0.2), rng.gen_range(-0.3..0.3), rng.gen_range(-0.3..0.3)];
                        (lin, s, extra)
                    }
                    MemberKind::CompactBump => (uniform3(&mut rng, 1.0), rng.gen_range(1.0..2.5), [0.0; 4]),
                };
                let tag = match kind {
                    MemberKind::Gaussian => "gaussian",
                    MemberKind::ModulatedPolynomial => "modulated",
                    MemberKind::CompactBump => "bump",
                };
                MemberSpec { kind, name: format!("{tag}-{i}"), centre, scale, extra, decays: true }
            })
            .collect();
        Ok(Self { seed, members })
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn functions(&self) -> Vec<MomentumFunction> {
        self.members.iter().map(MemberSpec::build).collect()
    }

    /// `count` seeded index triples `(f, h, η)`.
    pub fn triples(&self, count: usize) -> Vec<[usize; 3]> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ 0x7472_6970);
        let n = self.len();
        (0..count).map(|_| [rng.gen_range(0..n), rng.gen_range(0..n), rng.gen_range(0..n)]).collect()
    }
}
