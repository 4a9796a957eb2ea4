//! Green potentials and equilibrium measures of endomorphisms of the projective
//! line, computed fiber by fiber over archimedean, p-adic and trivially valued places.

pub mod arith;
pub mod affable;
pub mod berkovich;
pub mod error;
pub mod graph;
pub mod green;
pub mod harness;
pub mod maps;
pub mod measures;
pub mod par;
pub mod poly;
pub mod valued_fields;

pub use arith::Q;
pub use berkovich::{BerkPoint, Location, Scalar};
pub use error::{Error, Result};
pub use maps::{CxPoint, HomogeneousLift};
pub use graph::{GraphMeasure, MetricGraph, PLFunction};
pub use par::Execution;
pub use poly::{CPoly, QPoly};
pub use valued_fields::{LogMag, LogUnit, Place};
