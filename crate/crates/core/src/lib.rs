//! Subadditive thermodynamic formalism on the full shift over a finite
//! alphabet, applied to self-affine iterated function systems.
//!
//! The library enumerates finite words ([`symbolic`]), evaluates cylinder
//! functions such as the singular value function of matrix products
//! ([`linalg`], [`cylinder`]), computes finite-level topological pressure and
//! its zero, the affinity dimension ([`pressure`]), builds the finite-level
//! approximants of equilibrium measures ([`equilibrium`]), and cross-checks
//! dimensions on chaos-game point clouds ([`affine`]).
//!
//! All enumerations are split into fixed prefix blocks and reduced in block
//! order, so numeric results are bitwise reproducible for any thread count.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod affine;
pub mod cache;
pub mod cylinder;
pub mod equilibrium;
pub mod error;
pub mod io;
pub mod linalg;
pub mod pressure;
pub mod reduce;
pub mod rng;
pub mod symbolic;

pub use affine::{
    attractor_points, box_dimension, render_pgm, sample_translations, validate_ifs, AffineIfs, AffineMap, Bounds,
    BoxDimension, Driver, PointCloud, ValidationReport,
};
pub use cache::{CacheKey, FileCache, MemoryCache, PartitionCache};
pub use cylinder::{cf_constants, cf_value, verify_axioms, AxiomReport, Constants, CylinderFunction};
pub use equilibrium::{
    bernoulli_lower_estimate, energy_depth, entropy_depth, invariance_defect, jensen_residual, local_dimension_samples,
    mu_cesaro, nu_weights, CylinderMeasure, EquilibriumDiagnostics, Provenance, TailConvention,
};
pub use error::{Error, Result};
pub use linalg::{singular_values, svf_alpha_t, word_matrix, Matrix, SingularSpectrum};
pub use pressure::{
    affinity_dimension, affinity_dimension_with, log_partition_sum, pressure_curve, pressure_root, pressure_sequence,
    DimensionReport, Pressure, PressureReport, Root,
};
pub use reduce::with_workers;
pub use symbolic::{concat, shift_word, word_metric, words_of_length, Alphabet, Budget, Word};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
