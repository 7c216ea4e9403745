//! Weakly centered weighted composition operators on finite discrete
//! measure spaces, with closed-form criteria and a dense matrix oracle.

pub mod analysis;
pub mod battery;
pub mod error;
pub mod gaussian_example;
pub mod generate;
pub mod invariant_subspaces;
pub mod matrix_oracle;
pub mod measure_space;
pub mod properties;
pub mod transforms;
pub mod tree_shifts;
pub mod wco_model;

pub use error::{Result, WcoError};
pub use measure_space::{approx_eq, AeContext, Atom, DiscreteMeasureSpace, Density, ScalarField, DEFAULT_TOLERANCE};
pub use properties::{Outcome, Property, PropertyReport, Witness};
pub use wco_model::{FiberPartition, RadonNikodymData, WcoSystem};
