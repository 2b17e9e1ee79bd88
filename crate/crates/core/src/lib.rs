//! Numerical affine differential geometry of hypersurfaces.
//!
//! The crate computes the Blaschke structure `(ξ, h, S, ∇, K)` of parametrized
//! hypersurfaces with exact Taylor-mode derivatives, extracts the canonical
//! frame of hypersurfaces whose cubic form and shape operator are invariant
//! under rotations about one tangent axis, and generates the three warped
//! product families with such a symmetry from a planar generating curve.
//!
//! Module map:
//! - [`taylor`]: truncated multivariate Taylor arithmetic (the derivative engine)
//! - [`multijet`]: immersions and their derivative jets
//! - [`affine`]: Blaschke normal, induced structure, structure-equation residuals
//! - [`symmetry`]: canonical frame, Ricci data, field ODE residuals
//! - [`families`]: ε-quadrics, family immersions, warped-product data
//! - [`curves`]: generating curves, convexity, normal coefficients, sphere conditions

pub mod affine;
pub mod curves;
pub mod error;
pub mod families;
pub mod multijet;
pub mod ode;
pub mod quadrature;
pub mod symmetry;
pub mod taylor;
pub mod tensor;

pub use affine::{structure_at, AffineOptions, InducedStructure, ResidualReport};
pub use error::{Error, Result};
pub use multijet::{eval_jet, Immersion, Jet, JetOptions};
pub use taylor::{Layout, Real, Taylor};
pub use curves::{Case, Curve, CurveDef, CurveJet, Gauge, SphereKind, SphereOdeSpec};
pub use families::{FamilyImmersion, FamilySpec, QuadricImmersion, WarpData};
pub use symmetry::{AxisRoute, CanonicalFrame, FrameFields, FrameOptions};
