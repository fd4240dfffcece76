//! Double-form calculus and asymptotic invariants of asymptotically flat metrics.

pub mod curvature;
pub mod dforms;
pub mod error;
pub mod fields;
pub mod gbc;
pub mod chartchange;
pub mod invariants;
pub mod parity;
pub mod tps;
pub mod verify;

pub use dforms::{DForm, DoubleForm, JetForm, Metric, MultiIndex, PointMetric, Side};
pub use error::{Error, Result};
pub use fields::{MetricField, MetricModel, Parity};
pub use tps::Tps;
