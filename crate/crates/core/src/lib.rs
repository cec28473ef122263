//! Finite-dimensional futures-curve models `f_t(x) = g(x, Y_t)` in the
//! Musiela parametrisation.
//!
//! * [`qe`]: quasi-exponential functions `c . exp(A x) b`
//! * [`curves`]: curve families and their derivatives
//! * [`noarb`]: the risk-neutral drift condition, the volatility-sweep
//!   consistency probe, affine-rank detection and reconstruction
//! * [`sim`]: factor simulation, delivery-period futures and the
//!   statistical checks built on them

// `!(x > 0.0)` is the NaN-rejecting form used throughout argument checks.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod curves;
pub mod error;
pub mod grid;
pub mod lstsq;
pub mod noarb;
pub mod normal;
pub mod qe;
pub mod rng;
pub mod sim;

pub use curves::{
    builtin_affine, builtin_affine_models, AffineMap, AffineModel, ConstantFamily, CurveFamily, DerivativeMode,
    FdSteps, FnFamily, GaussianExampleModel, HilbertNorm, Model,
};
pub use error::{Error, Result};
pub use grid::XGrid;
pub use noarb::{AffineRank, DriftSolveResult, EtaTensor, Residuals, SccReport, SccVerdict};
pub use qe::{LinearOdeFit, QeFunction, QeTerm};
pub use sim::{FuturesSpec, PathSet, SdeSpec};
