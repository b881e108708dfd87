//! Cylinder-valued momentum maps on flat symplectic models, and numerical
//! checks of the local-to-global convexity principle for sampled maps into
//! flat cylinders `ℝᵏ/H`.
//!
//! The crate is organised bottom up:
//!
//! - [`metric`]: extended reals, polylines, weighted graphs and the
//!   geodesic containment test for finite subsets.
//! - [`cylinder`]: closed subgroups of `ℝⁿ` and the flat quotient metric.
//! - [`model`]: constant symplectic forms with periodic coordinates and
//!   commuting affine generators.
//! - [`holonomy`]: transport, the holonomy group and the momentum map `K`.
//! - [`normal_form`]: the slice splitting and the local expression of `K`.
//! - [`harness`]: fiber quotients, local conditions and convexity verdicts on
//!   sampled maps.
//! - [`config`], [`registry`] and [`report`]: the batch pipeline.

pub mod config;
pub mod cylinder;
pub mod error;
pub mod harness;
pub mod holonomy;
pub mod mesh;
pub mod metric;
pub mod model;
pub mod normal_form;
pub mod registry;
pub mod report;

pub use config::RunConfig;
pub use cylinder::{ClosedSubgroup, Cylinder, CylinderPoint, GeodesicLift};
pub use error::{Error, Result};
pub use harness::{FiberQuotient, SampledMap};
pub use holonomy::MomentumMap;
pub use metric::{ConvexityReport, ExtReal, MetricSpace, Polyline};
pub use model::{ModelPoint, SymplecticModel};
pub use report::{run, RunReport};
