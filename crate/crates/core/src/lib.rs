//! A numerical laboratory for transport equations on half-spaces with
//! inflow boundary data, built around a one-sided ("tailored") mollifier.
//!
//! The crate's modules mirror the mathematical pipeline:
//!
//! * [`kernels`] — the symmetric and one-sided bump profiles, their scaled
//!   versions, and the tensor half-space / boundary–time kernels.
//! * [`grid`] — uniform strip grids, sampled fields, quadrature, norms, and
//!   single-point kernel convolutions.
//! * [`fields`] — an analytic velocity-field corpus (with exact gradients
//!   and divergence), boundary/initial data, and exponent bookkeeping.
//! * [`mollify`] — the approximation engine: smoothed solutions and data,
//!   the transport commutator in distributional form, interchange pairings,
//!   and the boundary/initial trace residuals.
//! * [`transport`] — the characteristics solver, the weak-form residual,
//!   renormalization maps, energy (Gronwall) checks, and the uniqueness
//!   experiment.
//! * [`geometry`] — curved boundaries in the plane: signed distance, tubular
//!   coordinates, the curvature Jacobian, and curved-boundary smoothing.
//! * [`report`] — convergence tables and their CSV/JSON serialization.

pub mod error;
pub mod fields;
pub mod geometry;
pub mod grid;
pub mod kernels;
pub mod mollify;
pub mod quad;
pub mod report;
pub mod transport;

pub use error::{Error, Result};
pub use fields::{ScalarDataSpec, VelocityFieldSpec};
pub use geometry::{
    band_integral, curved_trace_residual, solve_on_band, tubular_mollify, ArcTopology, BandSide,
    CurvedTraceResidual, DomainKind, RadialInflow, SmoothDomain2D, TubularField, TubularGrid,
};
pub use grid::{BoundaryField, BoundaryGrid, Region, SampledField, StripGrid, TimeAxis};
pub use kernels::{BoundaryTimeKernel, HalfSpaceKernel, Kernel1D, KernelKind};
pub use report::{ConvergenceReport, GronwallReport, WeakResidualReport};
