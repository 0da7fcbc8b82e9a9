//! Numerical laboratory for topological bounds in two-parameter quantum estimation.
//!
//! The model is the two-band Chern insulator `H(k) = d(k)·σ` with
//! `d = (sin k1, sin k2, M − cos k1 − cos k2)`. Estimation is performed on the
//! upper band with rank-one qubit POVMs; the crate computes the quantum geometric
//! tensor, Chern numbers, classical and quantum Fisher information, the SLD and
//! Holevo Cramér-Rao bounds, maximum-likelihood estimates and Monte Carlo
//! covariances, and optimized POVMs.

pub mod band;
pub mod bounds;
pub mod error;
pub mod estimation;
pub mod experiments;
pub mod linalg;
pub mod optimizer;
pub mod povm;
pub mod simplex;

pub use band::{BlochPoint, BlochVector, GeometricTensor, PureQubitState};
pub use bounds::{BoundsReport, FisherKind, FisherMatrix, WeightLabel, WeightMatrix};
pub use error::{Error, Result};
pub use estimation::{CovarianceEstimate, CovarianceMethod, MeasurementRecord};
pub use optimizer::{ObjectiveKind, OptimizationResult};
pub use povm::{NaimarkFrame, Povm, PovmElement};

pub use nalgebra::{Matrix2, Vector2, Vector3};
