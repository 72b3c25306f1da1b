//! Charts, metric and connection fields, curvature.

pub mod connection;
pub mod curvature;
pub mod fd;
pub mod field;
pub mod grid;
pub mod metric;

pub use connection::{
    apply_projective_gauge, christoffel, gauge_values, trace_free, trace_free_gauge, ConnJet, ConnectionField,
    ConnectionModel, ConnectionRepr, ExprConnection, ExprOneForm, Flat, Gauged, LeviCivita, OneForm,
    OneFormModel,
};
pub use curvature::{curvature, projective_weyl, projective_weyl_at, ricci, riemann, weyl_from};
pub use field::{Slot, Symmetry, TensorField};
pub use grid::{Axis, ChartGrid};
pub use metric::{ExprMetric, FnMetric, MetricField, MetricJet, MetricModel, MetricRepr, Signature};
