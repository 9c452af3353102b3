//! Analysis pipeline for papillae-scale protrusions on 3D surface scans.
//!
//! The library covers the full path from a raw triangle mesh to a trained
//! classifier: candidate segments are cut around local surface maxima found
//! against a RANSAC base plane, each segment is summarized by baseline
//! (radius/height), discrete-curvature, and persistent-homology features,
//! and the resulting tables feed small interpretable models (multinomial
//! logistic regression and an RBF-kernel SVM) with permutation importance
//! and leave-one-group-out evaluation. A synthetic surface generator stands
//! in for scan data so the whole pipeline can be exercised end to end.
//!
//! All coordinates are micrometres. Geometry and statistics are generic over
//! the scalar type through [`Real`]; the `*3d` aliases below fix `f64`,
//! which is what the CLI uses.

pub mod curvature;
pub mod error;
pub mod features;
pub mod geom;
pub mod learn;
pub mod linalg;
pub mod map;
pub mod mesh;
pub mod persistence;
pub mod rng;
pub mod segment;
pub mod spatial;
pub mod synth;
pub mod vectorize;

mod num;

pub use error::{Error, Result};
pub use num::Real;

/// `f64` point/vector, the concrete type used by the CLI pipeline.
pub type Point3d = geom::Point3<f64>;
