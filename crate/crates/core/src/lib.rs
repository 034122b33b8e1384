//! Association measures between two spatial processes observed at the same
//! locations: the modified t-test with effective sample size, Tjøstheim's
//! rank coefficient and the codispersion coefficient, plus a Gaussian
//! field-pair simulator for self-checks and timing.
//!
//! All pair sums are streamed (no distance matrix). On regular grids they are
//! computed per lag vector with FFTs instead; see [`Engine`].

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod codispersion;
pub mod crossstats;
mod error;
pub mod fdist;
pub mod geometry;
pub mod lattice;
pub mod mttest;
mod par;
pub mod simulate;
pub mod tjostheim;

pub use codispersion::{
    codisp_binned, codisp_directional, codisp_map, comovement, CodispMap, CodispResult, MapGrid,
};
pub use crossstats::{moran_indices, stratum_covariances, StratumCovariances};
pub use error::{Error, Result};
pub use geometry::{Binning, LagClasses, LagRange, NClass, Point, PointSample};
pub use lattice::Engine;
pub use mttest::{
    modified_ttest, modified_ttest_with, MTTestResult, TTestOptions, VarianceEstimator,
};
pub use par::with_threads;
pub use tjostheim::{tjostheim_coef, TjostheimResult};
