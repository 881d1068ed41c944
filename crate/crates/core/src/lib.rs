//! Polyhedral cones, complete fans, and the differential inclusions they
//! generate.
//!
//! The crate is organized around six building blocks:
//!
//! * [`cones`]: convex polyhedral cones with dual generator/halfspace
//!   representations, projections, and face enumeration.
//! * [`fans`]: finite collections of cones closed under faces and pairwise
//!   intersection, including fans generated by hyperplane arrangements.
//! * [`inclusions`]: right-hand sides of toric and quasi-toric differential
//!   inclusions over a fan, plus the distance-threshold certificates that make
//!   the quasi-toric evaluation well defined.
//! * [`embeddings`]: constructions that embed a toric inclusion in a
//!   quasi-toric one and vice versa, with sampled verification.
//! * [`networks`]: Euclidean embedded graphs, mass-action kinetics, and
//!   trajectory membership checks against an inclusion.
//! * [`io`]: serde-friendly wire formats for cones, fans, and graphs.
//!
//! All geometry shares one absolute tolerance, [`tolerance::geo_tol`], used
//! for membership and equality decisions at unit scale.

pub mod cones;
pub mod embeddings;
pub mod fans;
pub mod fixtures;
pub mod inclusions;
pub mod io;
pub mod linalg;
pub mod networks;
pub mod nnls;
pub mod tolerance;
pub mod tubes;

pub use cones::{Cone, ConeError, ProjectionResult};
pub use embeddings::{EmbeddingError, InflationOutcome, VerifyConfig, VerifyReport};
pub use fans::{Completeness, Fan, FanBuildError, ValidationReport};
pub use inclusions::{
    AlphaCertificate, CertMethod, Certificate, DeltaVec, EvalOutcome, FanGeometry,
    InclusionError, InclusionSpec,
};
pub use networks::{
    EGraph, EndotacticReport, MembershipReport, NetworkError, RateSpec, SimOptions, Termination,
    Trajectory,
};

