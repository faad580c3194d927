//! Numerical laboratory for diffeomorphism actions on sampled scalar and
//! vector fields, and for measuring how far candidate operators are from
//! commuting with them.
//!
//! Everything is generic over the scalar type ([`Real`]: `f32` or `f64`);
//! the `*F64` aliases below fix the common choice.

pub mod analysis;
pub mod diffeo;
pub mod error;
pub mod fields;
pub mod geometry;
pub mod linalg;
pub mod operators;
pub mod scalar;
pub mod transport;

pub use diffeo::{compose, Diffeo, DiffeoSpec, Support, TransitionProfile};
pub use error::{Error, Result};
pub use fields::{BallRegion, Field, FieldSpec, InterpOrder, ScalarField, VectorField};
pub use geometry::{ChartDomain, ChartKind, MetricField, VolumeDensity};
pub use scalar::Real;
pub use transport::TransportResult;

pub type ChartF64 = ChartDomain<f64>;
pub type ScalarFieldF64 = ScalarField<f64>;
pub type VectorFieldF64 = VectorField<f64>;
pub type FieldF64 = Field<f64>;
pub type DiffeoF64 = Diffeo<f64>;
pub type ChartF32 = ChartDomain<f32>;
pub type ScalarFieldF32 = ScalarField<f32>;
pub type VectorFieldF32 = VectorField<f32>;
pub type FieldF32 = Field<f32>;
pub type DiffeoF32 = Diffeo<f32>;
