//! Discrete-velocity solvers for a two-species BGK mixture model.
//!
//! - [`model`]: parameter admissibility, mixture-Maxwellian closure,
//!   exchange terms, presets and the analytic relaxation laws.
//! - [`discretization`]: velocity grids, conservative discrete Maxwellians,
//!   Chu reduction and binary dumps.
//! - [`homogeneous`]: space-homogeneous RK4 / implicit Euler solver.
//! - [`transport`]: periodic 1D IMEX solver on reduced distributions.
//! - [`diagnostics`]: entropy, distances, conservation ledgers, CSV.
//!
//! Quadrature sums run in a fixed sequential order, so results do not
//! depend on the thread count.

pub mod diagnostics;
pub mod discretization;
pub mod error;
pub mod homogeneous;
pub mod model;
pub mod transport;

pub use diagnostics::{Check, ConservationLedger, LedgerTolerances, Totals};
pub use discretization::{DiscreteDistribution, ReducedPair, VelocityGrid};
pub use error::{BgkError, Result};
pub use homogeneous::{HomogeneousConfig, HomogeneousRun, HomogeneousState, InitialCondition, InitialShape, Scheme};
pub use model::{
    CollisionFrequencies, InteractionParams, MixtureModel, MixtureMoments, Moments, RelaxationCoefficients,
    SpeciesParams, ValidationReport,
};
pub use transport::{SpatialField, SpatialMesh, TransportConfig, TransportOrder, TransportRun};
