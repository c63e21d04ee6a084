//! Test functions of momentum with a declared decay class.

use super::juttner::Juttner;
use crate::geometry::FourMomentum;
use std::fmt;
use std::sync::Arc;

type Eval = dyn Fn(&FourMomentum) -> f64 + Send + Sync;

/// A named function `p ↦ f(p)`; `schwartz` declares at least exponential decay.
#[derive(Clone)]
pub struct MomentumFunction {
    pub name: String,
    pub schwartz: bool,
    eval: Arc<Eval>,
}

impl fmt::Debug for MomentumFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MomentumFunction").field("name", &self.name).field("schwartz", &self.schwartz).finish()
    }
}

impl MomentumFunction {
    pub fn new(name: impl Into<String>, schwartz: bool, f: impl Fn(&FourMomentum) -> f64 + Send + Sync + 'static) -> Self {
        Self { name: name.into(), schwartz, eval: Arc::new(f) }
    }

    #[inline]
    pub fn eval(&self, p: &FourMomentum) -> f64 {
        (self.eval)(p)
    }

    pub fn zero() -> Self {
        Self::new("zero", true, |_| 0.0)
    }

    pub fn constant(c: f64) -> Self {
        Self::new(format!("const({c})"), false, move |_| c)
    }

    pub fn juttner(j: Juttner) -> Self {
        Self::new("J", true, move |p| j.j(p))
    }

    pub fn sqrt_juttner(j: Juttner) -> Self {
        Self::new("sqrtJ", true, move |p| j.sqrt_j(p))
    }

    /// `ψ(p)·√J(p)` for a polynomial-type weight `ψ`.
    pub fn sqrt_j_times(name: impl Into<String>, j: Juttner, psi: impl Fn(&FourMomentum) -> f64 + Send + Sync + 'static) -> Self {
        Self::new(name, true, move |p| psi(p) * j.sqrt_j(p))
    }

    /// `c·f`.
    pub fn scaled(&self, c: f64) -> Self {
        let inner = self.eval.clone();
        Self { name: format!("{c}*{}", self.name), schwartz: self.schwartz, eval: Arc::new(move |p| c * inner(p)) }
    }

    /// `f + g`.
    pub fn plus(&self, other: &MomentumFunction) -> Self {
        let (a, b) = (self.eval.clone(), other.eval.clone());
        Self {
            name: format!("{}+{}", self.name, other.name),
            schwartz: self.schwartz && other.schwartz,
            eval: Arc::new(move |p| a(p) + b(p)),
        }
    }

    /// `f·g`.
    pub fn times(&self, other: &MomentumFunction) -> Self {
        let (a, b) = (self.eval.clone(), other.eval.clone());
        Self {
            name: format!("{}*{}", self.name, other.name),
            schwartz: self.schwartz || other.schwartz,
            eval: Arc::new(move |p| a(p) * b(p)),
        }
    }
}
