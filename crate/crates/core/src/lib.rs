//! Synthetic spectra of almost-commuting Hermitian tuples, the geometry and
//! index tests built on them, obstruction certificates and commuting
//! approximants.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod error;
pub mod geometry;
pub mod json;
pub mod obstruction;
pub mod operator;
pub mod raster;
pub mod spectrum;
pub mod symbol;
pub mod verify;

pub use error::{Error, Result};
pub use geometry::{
    brick_cover, dilate, region_topology, BrickSet, Hole, PlanarRegion, RegionTopology,
};
pub use obstruction::{
    bott_index, certified_distance_bound, index_hypothesis_check, joint_diagonalize, spin_triple,
    ApproximantReport, BottReport, DistanceCertificate, IndexCheckReport,
};
pub use operator::{
    commutator_norm, func_calc, op_norm, random_almost_commuting, AlmostCommutingGenerator,
    HermitianMatrix, OperatorTuple, PiecewiseLinearFn,
};
pub use spectrum::{
    big_theta_norm, containment_check, grid_points, hausdorff_distance, near_spectrum_witness,
    synthetic_spectrum, BallUnion, GridSpec, Lattice, NearSpectrumWitness, Point, Region,
    SpectrumOptions,
};
pub use symbol::{
    fredholm_index, quasicentral_family, symbol_curve, truncate, SymbolOperator, TruncationFamily,
    WindingReport,
};
