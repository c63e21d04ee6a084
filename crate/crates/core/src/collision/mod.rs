//! Collision operator, its linearization and its dual representations.

pub mod dual;
pub mod engine;
pub mod function;
pub mod juttner;
pub mod operators;

pub use dual::{DualEvaluator, RepresentationValues};
pub use engine::{AngularSpec, CollisionRule, PairGeometry};
pub use function::MomentumFunction;
pub use juttner::Juttner;
pub use operators::{Collision, NormPartInner, ShellSums, TrilinearShells};
