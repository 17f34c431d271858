//! Approximation algorithms for maximum edge- and node-disjoint paths on
//! graphs with a tree or path decomposition of bounded width.
//!
//! The pipeline solves the multicommodity flow relaxation, decomposes it
//! into paths and rounds it recursively along the decomposition. Numeric
//! code is generic over [`scalar::Scalar`]; the default is the exact
//! [`Rational`].

pub mod decomp;
pub mod error;
pub mod flow;
pub mod flowkit;
pub mod gen;
pub mod graph;
pub mod hardness;
pub mod io;
pub mod maxflow;
pub mod oracle;
pub mod relax;
pub mod rounding;
pub mod router;
pub mod routing;
pub mod scalar;
pub mod simplex;
pub mod wl;

pub use error::{Error, Result};
pub use scalar::{Rational, Scalar};

pub type ExactFlow = flow::PathFlow<Rational>;
pub type FloatFlow = flow::PathFlow<f64>;
