//! Velocity lattices, quadrature moments, conservative discrete Maxwellians
//! and the Chu reduction.

pub mod chu;
pub mod dump;
pub mod grid;
pub mod maxwellian;

pub use chu::{chu_reduce, reduced_maxwellian, reduced_moments, ReducedPair};
pub use dump::{read_dump, write_dump, Dump, SpatialHeader};
pub use grid::{discrete_moments, raw_moments, Axis, DiscreteDistribution, RawMoments, VelocityGrid};
pub use maxwellian::{
    continuous_maxwellian, continuous_maxwellian_1d, fit_maxwellian, project_maxwellian, DiscreteMaxwellian,
};
