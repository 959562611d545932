//! Orthonormal functional bases extracted from dictionaries of surface functions.
//!
//! The crate covers the whole matching stack on triangle meshes: mesh
//! representation and area weights, the cotangent Laplace–Beltrami operator and
//! its truncated eigenbasis, edge-path geodesics and vertex sampling, the
//! dictionary recipes, the area-weighted PCA that turns a dictionary into a
//! basis, functional-map estimation and conversion, and the evaluation metrics.
//!
//! Everything here is `no_std` with `alloc`; file formats, configuration and
//! the command line live in the companion `pcd` crate.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod dictionary;
mod error;
pub mod fmap;
pub mod geodesic;
pub mod linalg;
pub mod mesh;
pub mod metrics;
pub mod pcd;
pub mod shapes;
pub mod spectral;

pub use crate::dictionary::{Dictionary, Recipe, RecipeParams, WksParams};
pub use crate::error::{Error, Result};
pub use crate::fmap::{FunctionalMap, GroundTruth, Landmarks, PointwiseMap};
pub use crate::geodesic::{GeodesicField, SampleSet, SamplingMethod};
pub use crate::mesh::{MassMatrix, TriMesh};
pub use crate::pcd::{Basis, BasisSource};
pub use crate::spectral::{EigenBasis, Laplacian};

/// Dense column-major matrix used for bases, dictionaries and functional maps.
pub type Matrix = nalgebra::DMatrix<f64>;
