//! Geodesic equivalence toolkit.
//!
//! * [`expr`]: expression language used for metric components and block parameters.
//! * [`tensor`]: charts, metric/connection fields, curvature and the projective Weyl tensor.
//! * [`geodesic`]: geodesic integration, reparameterization, jet extraction and families.
//! * [`recon`]: reconstruction of a connection (up to projective gauge) from geodesic jets.
//! * [`metris`]: the metrisability operator and geodesic-equivalence tests.
//! * [`recovery`]: recovery of a Ricci-flat metric from its projective class.
//! * [`rigidity`]: the linear rank test for geodesic rigidity.
//! * [`gluing`]: building blocks, gluing and the Lorentz normal-form catalog.
//! * [`fixtures`]: ready-made metrics used by tests, benchmarks and the CLI.

pub mod error;
pub mod expr;
pub mod fixtures;
pub mod geodesic;
pub mod gluing;
pub mod io;
pub mod linalg;
pub mod metris;
pub mod recon;
pub mod recovery;
pub mod report;
pub mod rigidity;
pub mod tensor;

pub use error::{Error, Result};
pub use expr::{parse, Expr, ExpressionMatrix, Params, Symbols};
pub use tensor::{ChartGrid, ConnectionField, MetricField, Signature, TensorField};
