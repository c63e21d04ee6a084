//! Deterministic quadrature on momentum space, the sphere and the
//! delta-constrained hypersurfaces of the dual representations.

pub mod dyadic;
pub mod gauss;
pub mod momentum;
pub mod section;
pub mod sphere;
pub mod sum;
pub mod surface;

pub use dyadic::{dyadic_sum, dyadic_sum_terms, DyadicReport};
pub use gauss::{gauss_legendre, gauss_legendre_on};
pub use momentum::{integrate_momentum, MomentumGrid, MomentumGridSpec};
pub use section::SectionRule;
pub use sphere::{integrate_sphere, SphereRule};
pub use surface::{SurfaceQuadratureReport, SurfaceRule, ShellSurface};
