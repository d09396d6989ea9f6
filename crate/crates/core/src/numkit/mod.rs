//! Numerical kernel shared by every geometry module.

pub mod jet;
pub mod linalg;
pub mod ode;
pub mod quad;
pub mod richardson;

pub use jet::{cross3, dot3, local_then_compose, scale3, values3, Jet, Jet3};
pub use linalg::{fit_rigid_motion, g_dot, g_norm, generalized_symmetric_eigen, orthonormal_frame, GeneralizedEigen};
pub use ode::{integrate_ode, FailureKind, OdeFailure, OdeProblem, OutOfDomain, Trajectory};
pub use quad::{gauss_legendre, gauss_legendre_on, quadrature, quadrature_2d};
pub use richardson::{richardson, Extrapolated, ExtrapolationLadder};
