//! The approximation engine: mollified solutions u_η, mollified data
//! (b_η, h_η, u_{0,η}), the commutator r_η(u, b) in distributional form,
//! commutator-convergence sweeps, interchange-identity residuals, and the
//! boundary/initial trace residuals.
//!
//! Everything here is built on the one-sided tensor kernel: spatial
//! smoothing samples only {y_d ≥ x_d} (strictly inside the half-space, no
//! extension of u to y_d < 0), and time smoothing samples only the future
//! window [t, t + η]. Because of that one-sidedness the kernel is *not*
//! self-adjoint, which has a measurable consequence probed by the
//! interchange experiments below: the symmetric-kernel interchange
//! identities pick up an O(η) (or O(η³) in the best case) defect at finite
//! η instead of holding to quadrature precision.

use crate::error::{Error, Result};
use crate::fields::{exponent_check, sobolev_seminorm, ScalarDataSpec, VelocityFieldSpec};
use crate::grid::{
    half_space_margins, BoundaryField, BoundaryGrid, BoundaryTimeTable, FieldSlice,
    HalfSpaceTable, Region, SampledField, StripGrid, TimeAxis,
};
use crate::kernels::{BoundaryTimeKernel, HalfSpaceKernel, Kernel1D};
use crate::quad::GL64;
use crate::report::{ConvergenceReport, ConvergenceRow};
use rayon::prelude::*;
use std::time::Instant;

/// Scalar input to the commutator machinery: either grid samples (with
/// multilinear interpolation off-lattice) or an analytic evaluator.
pub enum ScalarInput<'a> {
    Sampled(FieldSlice<'a>),
    Analytic(&'a (dyn Fn(&[f64]) -> f64 + Sync)),
}

impl<'a> ScalarInput<'a> {
    pub fn sample(&self, y: &[f64]) -> Result<f64> {
        match self {
            ScalarInput::Sampled(f) => f.interp(y),
            ScalarInput::Analytic(f) => Ok(f(y)),
        }
    }
}

/// Gauss–Legendre rule for the forward time mollification on [0, η]:
/// matching value weights (discrete-mass renormalized) and derivative
/// weights for differentiating through the kernel. Gauss nodes rather
/// than a trapezoid sub-grid because the ω′-weighted (derivative) sums
/// converge far more slowly under trapezoid than the value sums do.
#[derive(Debug, Clone)]
struct TimeTable {
    sigma: Vec<f64>,
    /// cell·ω_η(σ), renormalized to sum exactly 1.
    w_val: Vec<f64>,
    /// −cell·ω′_η(σ) (shares the value normalization): applying these to
    /// U(x, t+σ) yields ∂_t of the time mollification.
    w_deriv: Vec<f64>,
}

/// Gauss node count used for every kernel-derivative quadrature axis.
pub(crate) const DERIV_GAUSS_NODES: usize = 48;

fn build_time_table(eta: f64) -> TimeTable {
    let rule = crate::quad::GaussRule::new(DERIV_GAUSS_NODES);
    let kernel = Kernel1D::one_sided(eta).expect("validated scale");
    let mut sigma = Vec::with_capacity(DERIV_GAUSS_NODES);
    let mut w_val = Vec::with_capacity(DERIV_GAUSS_NODES);
    let mut w_deriv = Vec::with_capacity(DERIV_GAUSS_NODES);
    let mut mass = 0.0;
    for (s, cell) in rule.mapped(0.0, eta) {
        sigma.push(s);
        let wv = cell * kernel.eval(s);
        mass += wv;
        w_val.push(wv);
        w_deriv.push(-cell * kernel.deriv(s));
    }
    for w in w_val.iter_mut().chain(w_deriv.iter_mut()) {
        *w /= mass;
    }
    TimeTable {
        sigma,
        w_val,
        w_deriv,
    }
}

/// The mollified solution u_η(x, t) = ∫₀^∞ (u(·,s) ∗ ρ̂ᵈ_η)(x) ω_η(s−t) ds:
/// one-sided spatial smoothing composed with forward time smoothing,
/// evaluated by nested quadrature over the kernel supports.
pub struct ApproximateSolution {
    pub eta: f64,
    source: SampledField,
    space: HalfSpaceTable,
    time: TimeTable,
}

/// Build the mollified-solution evaluator. Requires η ≥ 2h so the kernel
/// spans at least two cells of the sample grid.
pub fn mollify_solution(u: SampledField, eta: f64) -> Result<ApproximateSolution> {
    if !(eta > 0.0) || !eta.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "mollification scale must be positive, got {eta}"
        )));
    }
    if eta < 2.0 * u.grid.h {
        return Err(Error::UnderResolvedKernel { eta, h: u.grid.h });
    }
    let kernel = HalfSpaceKernel::new(u.grid.dimension, eta)?;
    let space = HalfSpaceTable::build_gauss(&kernel, DERIV_GAUSS_NODES, true);
    let time = build_time_table(eta);
    Ok(ApproximateSolution {
        eta,
        source: u,
        space,
        time,
    })
}

impl ApproximateSolution {
    pub fn source(&self) -> &SampledField {
        &self.source
    }

    /// Check the admissibility margins x_d + η ≤ L, |x_i| + η ≤ A, t + η ≤ T.
    pub fn admissible(&self, x: &[f64], t: f64) -> Result<()> {
        half_space_margins(&self.source.grid, self.eta, x)?;
        if let Some(axis) = self.source.time {
            if t + self.eta > axis.t_end + 1e-9 * axis.t_end.max(1.0) {
                return Err(Error::OutOfHorizon {
                    t,
                    eta: self.eta,
                    horizon: axis.t_end,
                });
            }
        }
        Ok(())
    }

    /// Inner spatial convolution U(x, s) = (u(·,s) ∗ ρ̂ᵈ_η)(x) with the
    /// source linearly interpolated in time.
    fn inner(&self, x: &[f64], s: f64) -> Result<f64> {
        let d = self.space.dimension;
        let mut y = vec![0.0; d];
        let mut acc = 0.0;
        for (k, &w) in self.space.weights.iter().enumerate() {
            for i in 0..d {
                y[i] = x[i] + self.space.offsets[k * d + i];
            }
            acc += w * self.source.interp_spacetime(&y, s)?;
        }
        Ok(acc)
    }

    /// u_η(x, t).
    pub fn eval(&self, x: &[f64], t: f64) -> Result<f64> {
        self.admissible(x, t)?;
        let mut acc = 0.0;
        for (j, &w) in self.time.w_val.iter().enumerate() {
            acc += w * self.inner(x, t + self.time.sigma[j])?;
        }
        Ok(acc)
    }

    /// ∂_t u_η(x, t), taken analytically through the time kernel.
    pub fn time_deriv(&self, x: &[f64], t: f64) -> Result<f64> {
        self.admissible(x, t)?;
        let mut acc = 0.0;
        for (j, &w) in self.time.w_deriv.iter().enumerate() {
            acc += w * self.inner(x, t + self.time.sigma[j])?;
        }
        Ok(acc)
    }

    /// ∇u_η(x, t), taken analytically through the spatial kernel.
    pub fn gradient(&self, x: &[f64], t: f64, out: &mut [f64]) -> Result<()> {
        self.admissible(x, t)?;
        let d = self.space.dimension;
        debug_assert_eq!(out.len(), d);
        out.fill(0.0);
        let mut y = vec![0.0; d];
        for (j, &wt) in self.time.w_val.iter().enumerate() {
            let s = t + self.time.sigma[j];
            for k in 0..self.space.len() {
                for i in 0..d {
                    y[i] = x[i] + self.space.offsets[k * d + i];
                }
                let u = self.source.interp_spacetime(&y, s)?;
                for i in 0..d {
                    out[i] += wt * self.space.gradient_weights[k * d + i] * u;
                }
            }
        }
        Ok(())
    }

    /// Residual of the approximate transport identity at (x, t):
    /// ∂_t u_η + b·∇u_η + ∫₀^∞ r_η(u(·,s), b(·,s))(x) ω_η(s−t) ds.
    ///
    /// For autonomous b this vanishes identically in the continuum; a
    /// time-dependent b contributes an O(η) defect because the identity
    /// carries b(·, s) inside the time mollification.
    pub fn transport_residual(&self, b: &VelocityFieldSpec, x: &[f64], t: f64) -> Result<f64> {
        self.admissible(x, t)?;
        let d = self.space.dimension;
        let mut grad = vec![0.0; d];
        self.gradient(x, t, &mut grad)?;
        let mut bvec = vec![0.0; d];
        b.eval(x, t, &mut bvec);
        let advect: f64 = bvec.iter().zip(&grad).map(|(a, g)| a * g).sum();
        let mut comm = 0.0;
        for (j, &w) in self.time.w_val.iter().enumerate() {
            let s = t + self.time.sigma[j];
            comm += w * self.commutator_at_time(b, x, s)?;
        }
        Ok(self.time_deriv(x, t)? + advect + comm)
    }

    /// r_η(u(·,s), b(·,s))(x) with u(·,s) linearly interpolated between the
    /// stored slices (exact by linearity of the commutator in u).
    fn commutator_at_time(&self, b: &VelocityFieldSpec, x: &[f64], s: f64) -> Result<f64> {
        let d = self.space.dimension;
        let mut y = vec![0.0; d];
        let mut bx = vec![0.0; d];
        b.eval(x, s, &mut bx);
        let mut by = vec![0.0; d];
        let mut acc = 0.0;
        for k in 0..self.space.len() {
            for i in 0..d {
                y[i] = x[i] + self.space.offsets[k * d + i];
            }
            let u = self.source.interp_spacetime(&y, s)?;
            b.eval(&y, s, &mut by);
            let mut grad_term = 0.0;
            for i in 0..d {
                grad_term += (by[i] - bx[i]) * self.space.gradient_weights[k * d + i];
            }
            acc += u * grad_term - u * b.divergence(&y, s) * self.space.weights[k];
        }
        Ok(acc)
    }
}

/// Reusable evaluator for the commutator
/// r_η(u, b)(x) = ∫ u(y) [b(y) − b(x)]·(∇ρ̂ᵈ_η)(x − y) dy
///              − ∫ u(y) (div b)(y) ρ̂ᵈ_η(x − y) dy,
/// the distributional form: all derivatives fall on the kernel and the
/// integrals run over {y_d > x_d} only.
pub struct CommutatorKernel {
    pub eta: f64,
    table: HalfSpaceTable,
}

impl CommutatorKernel {
    /// Gauss–Legendre quadrature with the default derivative-path node
    /// count per axis (the kernel-gradient weights dominate the error and
    /// converge poorly under uniform sub-grids).
    pub fn new(dimension: usize, eta: f64) -> Result<Self> {
        Self::with_nodes(dimension, eta, DERIV_GAUSS_NODES)
    }

    /// Same, with an explicit Gauss node count per axis.
    pub fn with_nodes(dimension: usize, eta: f64, nodes_per_axis: usize) -> Result<Self> {
        if nodes_per_axis < 2 {
            return Err(Error::InvalidParameter(format!(
                "need at least 2 Gauss nodes per axis, got {nodes_per_axis}"
            )));
        }
        let kernel = HalfSpaceKernel::new(dimension, eta)?;
        Ok(CommutatorKernel {
            eta,
            table: HalfSpaceTable::build_gauss(&kernel, nodes_per_axis, true),
        })
    }

    pub fn eval(
        &self,
        u: &ScalarInput<'_>,
        b: &VelocityFieldSpec,
        x: &[f64],
        s: f64,
    ) -> Result<f64> {
        let d = self.table.dimension;
        if x.len() != d {
            return Err(Error::DimensionMismatch(format!(
                "point has {} coordinates, kernel is {d}-dimensional",
                x.len()
            )));
        }
        let mut y = vec![0.0; d];
        let mut bx = vec![0.0; d];
        let mut by = vec![0.0; d];
        b.eval(x, s, &mut bx);
        let mut acc = 0.0;
        for k in 0..self.table.len() {
            for i in 0..d {
                y[i] = x[i] + self.table.offsets[k * d + i];
            }
            let uv = u.sample(&y)?;
            b.eval(&y, s, &mut by);
            let mut grad_term = 0.0;
            for i in 0..d {
                grad_term += (by[i] - bx[i]) * self.table.gradient_weights[k * d + i];
            }
            acc += uv * grad_term - uv * b.divergence(&y, s) * self.table.weights[k];
        }
        Ok(acc)
    }

    /// (u ∗ ρ̂ᵈ_η)(x) with the same table (used by the generalized
    /// interchange identity's divergence correction).
    pub fn smooth(&self, u: &ScalarInput<'_>, x: &[f64]) -> Result<f64> {
        let d = self.table.dimension;
        let mut y = vec![0.0; d];
        let mut acc = 0.0;
        for k in 0..self.table.len() {
            for i in 0..d {
                y[i] = x[i] + self.table.offsets[k * d + i];
            }
            acc += self.table.weights[k] * u.sample(&y)?;
        }
        Ok(acc)
    }
}

/// One-shot commutator evaluation at a point; sweeping callers should hold
/// a [`CommutatorKernel`] instead to reuse the quadrature table.
pub fn commutator(
    u: &ScalarInput<'_>,
    b: &VelocityFieldSpec,
    eta: f64,
    x: &[f64],
    s: f64,
) -> Result<f64> {
    CommutatorKernel::new(x.len(), eta)?.eval(u, b, x, s)
}

/// The largest sub-box of the strip on which every kernel of scale
/// `margin` fits: tangential extent shrunk by `margin`, normal extent
/// shrunk by `margin`, both snapped down to the lattice.
pub fn admissible_window(grid: &StripGrid, margin: f64) -> Result<StripGrid> {
    let h = grid.h;
    let l_cells = ((grid.l - margin) / h + 1e-9).floor();
    if l_cells < 1.0 {
        return Err(Error::ScaleTooCoarse {
            eta: margin,
            delta: grid.l,
        });
    }
    let a_w = if grid.dimension > 1 {
        let a_cells = ((grid.a - margin) / h + 1e-9).floor();
        if a_cells < 1.0 {
            return Err(Error::ScaleTooCoarse {
                eta: margin,
                delta: grid.a,
            });
        }
        a_cells * h
    } else {
        0.0
    };
    StripGrid::new(grid.dimension, a_w, l_cells * h, h)
}

/// Sweep the commutator over a fixed admissible window for each η in the
/// list, reporting ‖r_η‖_{L^α} and the ratio against the a-priori product
/// ‖u‖_{L^p}·‖∇b‖_{L^β}. The window is fixed by the *largest* η so every
/// row measures the same region.
pub fn commutator_convergence(
    u: &ScalarInput<'_>,
    b: &VelocityFieldSpec,
    p: f64,
    beta: f64,
    eta_list: &[f64],
    grid: &StripGrid,
) -> Result<ConvergenceReport> {
    let alpha = exponent_check(p, beta)?;
    if eta_list.is_empty() {
        return Err(Error::InvalidParameter("empty scale list".into()));
    }
    for w in eta_list.windows(2) {
        if w[1] >= w[0] {
            return Err(Error::InvalidParameter(format!(
                "scale list must be strictly decreasing, got {} before {}",
                w[0], w[1]
            )));
        }
    }
    for &eta in eta_list {
        if eta < 2.0 * grid.h {
            return Err(Error::UnderResolvedKernel { eta, h: grid.h });
        }
    }
    if b.dimension != grid.dimension {
        return Err(Error::DimensionMismatch(format!(
            "field dimension {} vs grid dimension {}",
            b.dimension, grid.dimension
        )));
    }
    let eta_max = eta_list[0];
    let window = admissible_window(grid, eta_max)?;
    // Data norms over the full strip.
    let u_norm = {
        let mut x = vec![0.0; grid.dimension];
        let mut acc = 0.0;
        for idx in 0..grid.node_count() {
            grid.node_coords(idx, &mut x);
            let v = u.sample(&x)?;
            acc += grid.node_weight(idx) * v.abs().powf(p);
        }
        acc.powf(1.0 / p)
    };
    let grad_b_norm = if beta.is_finite() {
        sobolev_seminorm(b, beta, grid)?
    } else {
        let mut x = vec![0.0; grid.dimension];
        let mut sup: f64 = 0.0;
        for idx in 0..grid.node_count() {
            grid.node_coords(idx, &mut x);
            sup = sup.max(b.gradient_norm(&x, 0.0));
        }
        sup
    };
    let denom = u_norm * grad_b_norm;

    let mut rows = Vec::with_capacity(eta_list.len());
    for &eta in eta_list {
        let start = Instant::now();
        let kern = CommutatorKernel::new(grid.dimension, eta)?;
        let n = window.node_count();
        let values: Vec<f64> = (0..n)
            .into_par_iter()
            .map(|idx| {
                let mut x = vec![0.0; window.dimension];
                window.node_coords(idx, &mut x);
                kern.eval(u, b, &x, 0.0)
            })
            .collect::<Result<_>>()?;
        // Ordered sequential reduction keeps the result deterministic.
        let mut acc = 0.0;
        for (idx, v) in values.iter().enumerate() {
            acc += window.node_weight(idx) * v.abs().powf(alpha);
        }
        let norm = acc.powf(1.0 / alpha);
        rows.push(ConvergenceRow {
            eta,
            norm,
            bound_ratio: if denom > 0.0 { norm / denom } else { 0.0 },
            wallclock_s: start.elapsed().as_secs_f64(),
        });
    }
    let metadata = serde_json::json!({
        "experiment": "commutator-convergence",
        "field": b.name,
        "p": p,
        "beta": beta,
        "alpha": alpha,
        "grid_h": grid.h,
        "window_l": window.l,
        "window_a": window.a,
        "u_norm_p": u_norm,
        "grad_b_norm_beta": grad_b_norm,
    });
    Ok(ConvergenceReport::new(rows, metadata))
}

fn interchange_core(
    u: &ScalarInput<'_>,
    v: &ScalarInput<'_>,
    b: &VelocityFieldSpec,
    eta: f64,
    grid: &StripGrid,
    s: f64,
    divergence_correction: bool,
) -> Result<(f64, f64, f64)> {
    if b.dimension != grid.dimension {
        return Err(Error::DimensionMismatch(format!(
            "field dimension {} vs grid dimension {}",
            b.dimension, grid.dimension
        )));
    }
    let kern = CommutatorKernel::new(grid.dimension, eta)?;
    let n = grid.node_count();
    let terms: Vec<(f64, f64)> = (0..n)
        .into_par_iter()
        .map(|idx| -> Result<(f64, f64)> {
            let mut x = vec![0.0; grid.dimension];
            grid.node_coords(idx, &mut x);
            // Integrands vanish where the data's support margins fail
            // (precondition); skip those nodes instead of erroring.
            if half_space_margins(grid, eta, &x).is_err() {
                return Ok((0.0, 0.0));
            }
            let w = grid.node_weight(idx);
            let uv = u.sample(&x)?;
            let vv = v.sample(&x)?;
            let mut ru = kern.eval(u, b, &x, s)?;
            let mut rv = kern.eval(v, b, &x, s)?;
            if divergence_correction {
                let divb = b.divergence(&x, s);
                ru -= kern.smooth(u, &x)? * divb;
                rv -= kern.smooth(v, &x)? * divb;
            }
            Ok((w * ru * vv, w * rv * uv))
        })
        .collect::<Result<_>>()?;
    let mut lhs = 0.0;
    let mut rhs = 0.0;
    for (a, bb) in terms {
        lhs += a;
        rhs += bb;
    }
    Ok((lhs, rhs, (lhs - rhs).abs()))
}

/// Residual of the solenoidal interchange identity
/// ∫ r_η(u,b) v dx = ∫ r_η(v,b) u dx. Requires div b ≡ 0.
pub fn interchange_residual(
    u: &ScalarInput<'_>,
    v: &ScalarInput<'_>,
    b: &VelocityFieldSpec,
    eta: f64,
    grid: &StripGrid,
    s: f64,
) -> Result<(f64, f64, f64)> {
    if !b.solenoidal {
        return Err(Error::HypothesisViolation(format!(
            "field {} has nonzero divergence; use generalized_interchange_residual",
            b.name
        )));
    }
    interchange_core(u, v, b, eta, grid, s, false)
}

/// Residual of the generalized interchange identity
/// ∫ (r_η(u,b) − (u∗ρ̂) div b) v dx = ∫ (r_η(v,b) − (v∗ρ̂) div b) u dx,
/// valid for arbitrary div b (and reducing to the plain identity when
/// div b ≡ 0).
pub fn generalized_interchange_residual(
    u: &ScalarInput<'_>,
    v: &ScalarInput<'_>,
    b: &VelocityFieldSpec,
    eta: f64,
    grid: &StripGrid,
    s: f64,
) -> Result<(f64, f64, f64)> {
    interchange_core(u, v, b, eta, grid, s, true)
}

/// Boundary-trace comparison: the mollified solution against the mollified
/// boundary flux.
#[derive(Debug)]
pub struct TraceResidual {
    /// Pointwise residual on the boundary grid, time-windowed to t + η ≤ T.
    pub field: BoundaryField,
    /// L¹ norm over the whole admissible window.
    pub l1_norm: f64,
    /// L¹ norm over the bulk sub-window t ∈ [η, T − η], away from the t = 0
    /// corner layer where the mollifier still sees the initial data.
    pub bulk_norm: f64,
}

/// Pointwise residual u_η(x′, 0, t)·(b·ν) − ((h·(b·ν)) ∗ ρ̃ᵈ_η)(x′, t) on
/// the boundary grid, with its L¹ norms.
///
/// `u` should come from the transport solver at a finer smoothing scale
/// (η′ ≪ η) so it stands in for a weak solution at the scale under test.
pub fn boundary_trace_residual(
    u: &SampledField,
    b: &VelocityFieldSpec,
    h: &BoundaryField,
    eta: f64,
) -> Result<TraceResidual> {
    let time = u.time.ok_or_else(|| {
        Error::DimensionMismatch("boundary trace needs a time-dependent solution field".into())
    })?;
    if !h.grid.matches_strip(&u.grid) {
        return Err(Error::DimensionMismatch(
            "boundary data grid does not match the solution grid's tangential axes".into(),
        ));
    }
    let d = u.grid.dimension;
    if eta > time.t_end {
        return Err(Error::OutOfHorizon {
            t: 0.0,
            eta,
            horizon: time.t_end,
        });
    }
    let sol = mollify_solution(u.clone(), eta)?;
    // Weighted boundary data g = h·(b·ν).
    let flux = BoundaryField::from_fn(h.grid.clone(), |xp, t| {
        h.interp(xp, t).expect("same grid") * b.normal_trace(xp, t)
    })?;
    let kernel = BoundaryTimeKernel::new(d, eta)?;
    let table = BoundaryTimeTable::build(&kernel, h.grid.h, time.dt);

    // Time window: keep nodes with t + η ≤ T.
    let kept = ((time.t_end - eta) / time.dt + 1e-9).floor() as usize + 1;
    if kept < 2 {
        return Err(Error::OutOfHorizon {
            t: 0.0,
            eta,
            horizon: time.t_end,
        });
    }
    let window_time = TimeAxis::new((kept - 1) as f64 * time.dt, time.dt)?;
    let wgrid = BoundaryGrid::new(d, h.grid.a, h.grid.h, Some(window_time))?;
    let tan_count = wgrid.tangential_count();
    let mut values = Vec::with_capacity(tan_count * kept);
    let mut xp = vec![0.0; d - 1];
    let mut x = vec![0.0; d];
    for k in 0..kept {
        let t = window_time.time(k);
        for idx in 0..tan_count {
            wgrid.tangential_coords(idx, &mut xp);
            // Tangential kernel margins: skip points whose kernel box
            // leaves the boundary patch (data must vanish there).
            let inside = xp.iter().all(|&c| c - eta >= -h.grid.a - 1e-9 && c + eta <= h.grid.a + 1e-9);
            if !inside {
                values.push(0.0);
                continue;
            }
            x[..d - 1].copy_from_slice(&xp);
            x[d - 1] = 0.0;
            let lhs = sol.eval(&x, t)? * b.normal_trace(&xp, t);
            let rhs = table.convolve(&flux, &xp, t)?;
            values.push(lhs - rhs);
        }
    }
    let field = BoundaryField::new(wgrid, values)?;
    let l1_norm = field.lp_norm(1.0)?;
    // Bulk: restrict to t ≥ η.
    let k_lo = (eta / time.dt - 1e-9).ceil() as usize;
    let mut bulk = 0.0;
    for k in k_lo..kept {
        let wt = if k == k_lo || k == kept - 1 { 0.5 } else { 1.0 } * time.dt;
        for idx in 0..tan_count {
            let mut w = 1.0;
            let mut rest = idx;
            for _ in 0..d - 1 {
                let i = rest % field.grid.tangential_nodes;
                w *= if i == 0 || i == field.grid.tangential_nodes - 1 {
                    0.5
                } else {
                    1.0
                } * field.grid.h;
                rest /= field.grid.tangential_nodes;
            }
            bulk += wt * w * field.value(idx, k).abs();
        }
    }
    Ok(TraceResidual {
        field,
        l1_norm,
        bulk_norm: bulk,
    })
}

/// Initial-trace comparison u_η(·, 0) versus u₀ ∗ ρ̂ᵈ_η.
#[derive(Debug)]
pub struct InitialResidual {
    /// Pointwise residual over the spatial window with η-margins.
    pub field: SampledField,
    /// Lᵖ norm over the whole window.
    pub lp_norm: f64,
    /// Lᵖ norm over the bulk x_d ≥ η, away from the boundary corner layer.
    pub bulk_norm: f64,
}

/// Residual u_η(x, 0) − (u₀ ∗ ρ̂ᵈ_η)(x) over the admissible window.
pub fn initial_trace_residual(
    u: &SampledField,
    u0: &(dyn Fn(&[f64]) -> f64 + Sync),
    eta: f64,
    p: f64,
) -> Result<InitialResidual> {
    let sol = mollify_solution(u.clone(), eta)?;
    let window = admissible_window(&u.grid, eta)?;
    let kernel = HalfSpaceKernel::new(u.grid.dimension, eta)?;
    let table = HalfSpaceTable::build_gauss(&kernel, DERIV_GAUSS_NODES, false);
    let d = u.grid.dimension;
    let n = window.node_count();
    let mut values = Vec::with_capacity(n);
    let mut x = vec![0.0; d];
    let mut y = vec![0.0; d];
    for idx in 0..n {
        window.node_coords(idx, &mut x);
        let lhs = sol.eval(&x, 0.0)?;
        let mut rhs = 0.0;
        for k in 0..table.len() {
            for i in 0..d {
                y[i] = x[i] + table.offsets[k * d + i];
            }
            rhs += table.weights[k] * u0(&y);
        }
        values.push(lhs - rhs);
    }
    let field = SampledField::new(window.clone(), None, values)?;
    let lp_norm = field.lp_norm(p, Region::Full)?;
    // Bulk norm: only nodes with x_d ≥ η.
    let mut acc = 0.0;
    for idx in 0..n {
        window.node_coords(idx, &mut x);
        if x[d - 1] + 1e-12 >= eta {
            acc += window.node_weight(idx) * field.values()[idx].abs().powf(p);
        }
    }
    Ok(InitialResidual {
        field,
        lp_norm,
        bulk_norm: acc.powf(1.0 / p),
    })
}

// ---------------------------------------------------------------------------
// Mollified data: b_η, h_η, u_{0,η} from analytic specifications via
// Gauss–Legendre tensor quadrature over the kernel supports.
// ---------------------------------------------------------------------------

/// One Gauss–Legendre axis of a kernel-support quadrature: nodes and
/// weights already multiplied by the kernel factor.
#[derive(Debug, Clone)]
pub(crate) struct GlAxis {
    pub(crate) nodes: Vec<f64>,
    pub(crate) weights: Vec<f64>,
}

pub(crate) fn gl_axis_symmetric(eta: f64) -> GlAxis {
    let k = Kernel1D::symmetric(eta).expect("validated scale");
    let mut nodes = Vec::with_capacity(64);
    let mut weights = Vec::with_capacity(64);
    let mut mass = 0.0;
    for (x, w) in GL64.mapped(-eta, eta) {
        nodes.push(x);
        let ww = w * k.eval(x);
        mass += ww;
        weights.push(ww);
    }
    for w in &mut weights {
        *w /= mass;
    }
    GlAxis { nodes, weights }
}

pub(crate) fn gl_axis_one_sided(eta: f64) -> GlAxis {
    let k = Kernel1D::one_sided(eta).expect("validated scale");
    let mut nodes = Vec::with_capacity(64);
    let mut weights = Vec::with_capacity(64);
    let mut mass = 0.0;
    for (x, w) in GL64.mapped(0.0, eta) {
        nodes.push(x);
        let ww = w * k.eval(x);
        mass += ww;
        weights.push(ww);
    }
    for w in &mut weights {
        *w /= mass;
    }
    GlAxis { nodes, weights }
}

/// Mollified velocity b_η(x, t): spatial one-sided convolution composed
/// with forward time mollification, specialized to the structure of the
/// field (constant fields pass through untouched; fields independent of x
/// need only the time axis; autonomous fields need only the spatial axes).
pub struct MollifiedVelocity {
    pub spec: VelocityFieldSpec,
    pub eta: f64,
    spatial: Option<Vec<GlAxis>>,
    temporal: Option<GlAxis>,
}

impl MollifiedVelocity {
    pub fn new(spec: VelocityFieldSpec, eta: f64) -> Result<Self> {
        if !(eta > 0.0) || !eta.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "mollification scale must be positive, got {eta}"
            )));
        }
        let x_independent = spec.x_independent();
        let autonomous = spec.autonomous();
        let spatial = if x_independent {
            None
        } else {
            let d = spec.dimension;
            let mut axes = vec![gl_axis_symmetric(eta); d - 1];
            axes.push(gl_axis_one_sided(eta));
            Some(axes)
        };
        let temporal = if autonomous {
            None
        } else {
            Some(gl_axis_one_sided(eta))
        };
        Ok(MollifiedVelocity {
            spec,
            eta,
            spatial,
            temporal,
        })
    }

    /// b_η(x, t) into `out`. Points must keep the spatial η-margin inside
    /// the caller's truncation; the time horizon is the caller's to check.
    pub fn eval(&self, x: &[f64], t: f64, out: &mut [f64]) {
        let d = self.spec.dimension;
        match (&self.spatial, &self.temporal) {
            (None, None) => self.spec.eval(x, t, out),
            (None, Some(ta)) => {
                // x-independent, time-dependent: 1-D future average.
                out.fill(0.0);
                let mut b = vec![0.0; d];
                for (j, &w) in ta.weights.iter().enumerate() {
                    self.spec.eval(x, t + ta.nodes[j], &mut b);
                    for i in 0..d {
                        out[i] += w * b[i];
                    }
                }
            }
            (Some(axes), None) => {
                out.fill(0.0);
                let mut y = vec![0.0; d];
                let mut b = vec![0.0; d];
                tensor_sweep(axes, &mut |offsets, w| {
                    for i in 0..d {
                        y[i] = x[i] + offsets[i];
                    }
                    self.spec.eval(&y, t, &mut b);
                    for i in 0..d {
                        out[i] += w * b[i];
                    }
                });
            }
            (Some(axes), Some(ta)) => {
                out.fill(0.0);
                let mut y = vec![0.0; d];
                let mut b = vec![0.0; d];
                for (j, &wt) in ta.weights.iter().enumerate() {
                    let s = t + ta.nodes[j];
                    tensor_sweep(axes, &mut |offsets, w| {
                        for i in 0..d {
                            y[i] = x[i] + offsets[i];
                        }
                        self.spec.eval(&y, s, &mut b);
                        for i in 0..d {
                            out[i] += wt * w * b[i];
                        }
                    });
                }
            }
        }
    }
}

/// Iterate a tensor product of GL axes, calling `f(offsets, weight)` once
/// per node combination.
fn tensor_sweep(axes: &[GlAxis], f: &mut dyn FnMut(&[f64], f64)) {
    let d = axes.len();
    let mut index = vec![0usize; d];
    let mut offsets = vec![0.0; d];
    'outer: loop {
        let mut w = 1.0;
        for i in 0..d {
            offsets[i] = axes[i].nodes[index[i]];
            w *= axes[i].weights[index[i]];
        }
        f(&offsets, w);
        for i in (0..d).rev() {
            index[i] += 1;
            if index[i] < axes[i].nodes.len() {
                continue 'outer;
            }
            index[i] = 0;
            if i == 0 {
                break 'outer;
            }
        }
    }
}

/// Mollified boundary data h_η = h ∗ ρ̃ᵈ_η (symmetric along the boundary,
/// forward in time).
pub struct MollifiedBoundary {
    data: ScalarDataSpec,
    tangential: Vec<GlAxis>,
    temporal: GlAxis,
}

impl MollifiedBoundary {
    pub fn eval(&self, x_prime: &[f64], t: f64) -> f64 {
        let dm1 = self.tangential.len();
        debug_assert_eq!(x_prime.len(), dm1);
        let mut acc = 0.0;
        let mut yp = vec![0.0; dm1];
        for (j, &wt) in self.temporal.weights.iter().enumerate() {
            let s = t + self.temporal.nodes[j];
            if dm1 == 0 {
                acc += wt * self.data.boundary_at(&[], s);
            } else {
                tensor_sweep(&self.tangential, &mut |offsets, w| {
                    for i in 0..dm1 {
                        yp[i] = x_prime[i] + offsets[i];
                    }
                    acc += wt * w * self.data.boundary_at(&yp, s);
                });
            }
        }
        acc
    }
}

/// Mollified initial data u_{0,η} = u₀ ∗ ρ̂ᵈ_η.
pub struct MollifiedInitial {
    data: ScalarDataSpec,
    axes: Vec<GlAxis>,
}

impl MollifiedInitial {
    pub fn eval(&self, x: &[f64]) -> f64 {
        let d = self.axes.len();
        debug_assert_eq!(x.len(), d);
        let mut acc = 0.0;
        let mut y = vec![0.0; d];
        tensor_sweep(&self.axes, &mut |offsets, w| {
            for i in 0..d {
                y[i] = x[i] + offsets[i];
            }
            acc += w * self.data.initial_at(&y);
        });
        acc
    }
}

/// Mollify the full data triple (b, h, u₀) at scale η.
pub fn mollify_data(
    b: &VelocityFieldSpec,
    data: &ScalarDataSpec,
    eta: f64,
) -> Result<(MollifiedVelocity, MollifiedBoundary, MollifiedInitial)> {
    let velocity = MollifiedVelocity::new(b.clone(), eta)?;
    let d = b.dimension;
    let boundary = MollifiedBoundary {
        data: data.clone(),
        tangential: vec![gl_axis_symmetric(eta); d - 1],
        temporal: gl_axis_one_sided(eta),
    };
    let initial = {
        let mut axes = vec![gl_axis_symmetric(eta); d - 1];
        axes.push(gl_axis_one_sided(eta));
        MollifiedInitial {
            data: data.clone(),
            axes,
        }
    };
    Ok((velocity, boundary, initial))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::one_sided_m1;

    fn linear_time_field(h: f64, dt: f64) -> SampledField {
        let grid = StripGrid::new(1, 0.0, 1.0, h).unwrap();
        let time = TimeAxis::new(1.0, dt).unwrap();
        SampledField::from_fn_time(grid, time, |_, t| t).unwrap()
    }

    #[test]
    fn mollified_constant_is_exact() {
        let grid = StripGrid::new(1, 0.0, 1.0, 1.0 / 64.0).unwrap();
        let time = TimeAxis::new(1.0, 1.0 / 64.0).unwrap();
        let u = SampledField::from_fn_time(grid, time, |_, _| 2.5).unwrap();
        let sol = mollify_solution(u, 0.1).unwrap();
        for &(x, t) in &[(0.0, 0.0), (0.3, 0.5), (0.85, 0.9)] {
            let v = sol.eval(&[x], t).unwrap();
            assert!((v - 2.5).abs() < 1e-12, "got {v} at ({x},{t})");
        }
    }

    #[test]
    fn forward_time_mollification_shifts_by_first_moment() {
        // u(x,t) = t: the forward window [t, t+η] averages to t + η m₁ with
        // m₁ = 1/2 — and the renormalized quadrature table reproduces it
        // exactly because the profile is symmetric about its midpoint.
        let u = linear_time_field(1.0 / 64.0, 1.0 / 128.0);
        let sol = mollify_solution(u, 0.1).unwrap();
        let v = sol.eval(&[0.4], 0.3).unwrap();
        assert!((v - (0.3 + 0.05)).abs() < 1e-6, "got {v}");
    }

    #[test]
    fn spatial_mollification_shifts_by_first_moment() {
        let grid = StripGrid::new(1, 0.0, 1.0, 1.0 / 128.0).unwrap();
        let u = SampledField::from_fn(grid, |x| x[0]).unwrap();
        let sol = mollify_solution(u, 0.1).unwrap();
        let v = sol.eval(&[0.4], 0.0).unwrap();
        assert!((v - 0.45).abs() < 1e-6, "got {v}");
    }

    #[test]
    fn under_resolved_kernel_rejected() {
        let u = linear_time_field(1.0 / 8.0, 1.0 / 8.0);
        assert!(matches!(
            mollify_solution(u, 0.1),
            Err(Error::UnderResolvedKernel { .. })
        ));
    }

    #[test]
    fn double_convolution_matches_separable_closed_form() {
        // u(x, s) = x·e^{−s} with η = 0.1:
        //   u_η(x, t) = (x + η m₁)·e^{−t}·L(η),  L(η) = ∫₀¹ e^{−ηz} ω(z) dz.
        let grid = StripGrid::new(1, 0.0, 1.0, 1.0 / 256.0).unwrap();
        let time = TimeAxis::new(1.0, 1.0 / 256.0).unwrap();
        let u = SampledField::from_fn_time(grid, time, |x, s| x[0] * (-s).exp()).unwrap();
        let sol = mollify_solution(u, 0.1).unwrap();
        let l_eta = 0.951_417_440_554_67;
        for &(x, t) in &[(0.2, 0.1), (0.5, 0.4), (0.7, 0.8)] {
            let expect = (x + 0.05) * (-t as f64).exp() * l_eta;
            let got = sol.eval(&[x], t).unwrap();
            assert!(
                (got - expect).abs() < 5e-6,
                "at ({x},{t}): {got} vs {expect}"
            );
        }
    }

    #[test]
    fn analytic_derivatives_match_closed_forms() {
        // Same separable solution: ∂_x u_η = e^{−t} L(η) and
        // ∂_t u_η = −u_η, both exact in the continuum.
        let grid = StripGrid::new(1, 0.0, 1.0, 1.0 / 256.0).unwrap();
        let time = TimeAxis::new(1.0, 1.0 / 256.0).unwrap();
        let u = SampledField::from_fn_time(grid, time, |x, s| x[0] * (-s).exp()).unwrap();
        let sol = mollify_solution(u, 0.1).unwrap();
        let l_eta = 0.951_417_440_554_67;
        let (x, t) = (0.45_f64, 0.3_f64);
        let val = (x + 0.05) * (-t).exp() * l_eta;
        let mut g = [0.0];
        sol.gradient(&[x], t, &mut g).unwrap();
        let expect_x = (-t).exp() * l_eta;
        assert!(
            (g[0] - expect_x).abs() < 5e-6,
            "∂_x: {} vs {expect_x}",
            g[0]
        );
        let an_t = sol.time_deriv(&[x], t).unwrap();
        assert!((an_t + val).abs() < 5e-5, "∂_t: {an_t} vs {}", -val);
    }

    #[test]
    fn gradient_components_follow_their_axes() {
        // d = 2: u = y₁ has tangential slope 1 and normal slope 0 after
        // mollification (linear data is reproduced up to the kernel shift);
        // u = y₂ the reverse. Catches axis mix-ups in the gradient table.
        let grid = StripGrid::new(2, 1.0, 1.0, 1.0 / 32.0).unwrap();
        let ua = SampledField::from_fn(grid.clone(), |y| y[0]).unwrap();
        let sa = mollify_solution(ua, 0.125).unwrap();
        let mut g = [0.0; 2];
        sa.gradient(&[0.2, 0.4], 0.0, &mut g).unwrap();
        assert!(
            (g[0] - 1.0).abs() < 1e-7 && g[1].abs() < 1e-7,
            "u = y₁: ∇ = {g:?}"
        );
        let ub = SampledField::from_fn(grid, |y| y[1]).unwrap();
        let sb = mollify_solution(ub, 0.125).unwrap();
        sb.gradient(&[0.2, 0.4], 0.0, &mut g).unwrap();
        assert!(
            g[0].abs() < 1e-7 && (g[1] - 1.0).abs() < 1e-7,
            "u = y₂: ∇ = {g:?}"
        );
    }

    #[test]
    fn mollified_solution_ignores_past_and_lower_samples() {
        // One-sidedness of the double mollification: values strictly below
        // x_d or strictly before t never enter.
        let grid = StripGrid::new(1, 0.0, 1.0, 1.0 / 64.0).unwrap();
        let time = TimeAxis::new(1.0, 1.0 / 64.0).unwrap();
        let base = SampledField::from_fn_time(grid.clone(), time, |x, s| x[0] + s).unwrap();
        // x and t sit on the sample lattice so interpolation at y ≥ x,
        // s ≥ t never touches the perturbed (strictly lower/earlier) nodes.
        let (x, t, eta) = (0.5, 0.375, 0.125);
        let n = grid.node_count();
        let perturbed = {
            let mut vals = base.values().to_vec();
            for k in 0..time.nodes {
                let s = time.time(k);
                for j in 0..n {
                    let xd = j as f64 * grid.h;
                    if xd < x - 1e-12 || s < t - 1e-12 {
                        vals[k * n + j] += 50.0;
                    }
                }
            }
            SampledField::new(grid, Some(time), vals).unwrap()
        };
        let a = mollify_solution(base, eta).unwrap().eval(&[x], t).unwrap();
        let b = mollify_solution(perturbed, eta)
            .unwrap()
            .eval(&[x], t)
            .unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
    }

    #[test]
    fn transport_residual_vanishes_for_separable_solution() {
        // u(x,s) = x e^{−s} solves u_t + x u_x = 0; the approximate
        // transport identity is exact in the continuum for autonomous b,
        // so the discrete residual is pure quadrature error.
        let grid = StripGrid::new(1, 0.0, 1.0, 1.0 / 256.0).unwrap();
        let time = TimeAxis::new(1.0, 1.0 / 128.0).unwrap();
        let u = SampledField::from_fn_time(grid, time, |x, s| x[0] * (-s).exp()).unwrap();
        let sol = mollify_solution(u, 0.1).unwrap();
        let b = VelocityFieldSpec::compressive(1.0, 1).unwrap();
        for &(x, t) in &[(0.2, 0.2), (0.5, 0.5), (0.8, 0.3)] {
            let r = sol.transport_residual(&b, &[x], t).unwrap();
            let scale = 1.0 + x;
            assert!(
                r.abs() < 1e-4 * scale,
                "residual {r} too large at ({x},{t})"
            );
        }
    }

    #[test]
    fn commutator_of_constant_field_vanishes() {
        let b = VelocityFieldSpec::constant(vec![0.7]).unwrap();
        let u: &(dyn Fn(&[f64]) -> f64 + Sync) = &|x: &[f64]| (3.0 * x[0]).sin();
        let kern = CommutatorKernel::new(1, 0.1).unwrap();
        for &x in &[0.1, 0.35, 0.6] {
            let r = kern.eval(&ScalarInput::Analytic(u), &b, &[x], 0.0).unwrap();
            assert!(r.abs() < 1e-8, "got {r} at {x}");
        }
    }

    #[test]
    fn linear_commutator_equals_eta_half() {
        // d=1, u(y) = y, b(y) = y: r_η(x) = η m₁ for every admissible x.
        let b = VelocityFieldSpec::compressive(1.0, 1).unwrap();
        let u: &(dyn Fn(&[f64]) -> f64 + Sync) = &|x: &[f64]| x[0];
        let eta = 0.1;
        let expect = eta * one_sided_m1();
        let kern = CommutatorKernel::new(1, eta).unwrap();
        for i in 0..50 {
            let x = 0.01 + 0.8 * (i as f64) / 49.0;
            let r = kern.eval(&ScalarInput::Analytic(u), &b, &[x], 0.0).unwrap();
            assert!((r - expect).abs() < 1e-6, "at {x}: {r} vs {expect}");
        }
    }

    #[test]
    fn distributional_form_matches_direct_form_for_smooth_data() {
        // Direct form: (b·∇u) ∗ ρ̂ − b·∇(u ∗ ρ̂), with ∇u analytic.
        let b = VelocityFieldSpec::compressive(2.0, 1).unwrap(); // b = 2x
        let u = |x: &[f64]| (2.5 * x[0]).sin();
        let du = |x: f64| 2.5 * (2.5 * x).cos();
        let eta = 0.08;
        let kern = CommutatorKernel::new(1, eta).unwrap();
        let axis = gl_axis_one_sided(eta);
        for &x in &[0.2, 0.45, 0.7] {
            let dist = kern
                .eval(&ScalarInput::Analytic(&u), &b, &[x], 0.0)
                .unwrap();
            // (b u′) ∗ ρ̂ at x: sample y = x + ζ.
            let mut conv_bdu = 0.0;
            for (j, &w) in axis.weights.iter().enumerate() {
                let y = x + axis.nodes[j];
                conv_bdu += w * 2.0 * y * du(y);
            }
            // b(x)·(u ∗ ρ̂)′(x) via the kernel-derivative table.
            let k1 = Kernel1D::one_sided(eta).unwrap();
            let mut mass = 0.0;
            let mut deriv_acc = 0.0;
            for (zeta, w) in GL64.mapped(0.0, eta) {
                mass += w * k1.eval(zeta);
                // ∂_x ρ̂(x−y) at offset ζ = y−x is −ω′_η(ζ).
                deriv_acc += w * (-k1.deriv(zeta)) * u(&[x + zeta]);
            }
            let conv_u_grad = 2.0 * x * (deriv_acc / mass);
            let direct = conv_bdu - conv_u_grad;
            assert!(
                (dist - direct).abs() < 1e-6,
                "at {x}: distributional {dist} vs direct {direct}"
            );
        }
    }

    #[test]
    fn convergence_table_for_linear_case_matches_closed_form() {
        // d=1, u = y, b = y: every row is η m₁ · |window|^{1/α}.
        let grid = StripGrid::new(1, 0.0, 1.0, 1.0 / 256.0).unwrap();
        let b = VelocityFieldSpec::compressive(1.0, 1).unwrap();
        let u_fn = |x: &[f64]| x[0];
        let etas = [0.2, 0.1, 0.05];
        let report = commutator_convergence(
            &ScalarInput::Analytic(&u_fn),
            &b,
            2.0,
            2.0,
            &etas,
            &grid,
        )
        .unwrap();
        let window = admissible_window(&grid, 0.2).unwrap();
        for (row, &eta) in report.rows.iter().zip(&etas) {
            let expect = eta * one_sided_m1() * window.l; // α = 1: L¹ of a constant
            assert!(
                (row.norm - expect).abs() < 1e-5,
                "η={eta}: {} vs {expect}",
                row.norm
            );
        }
        assert!(report.norms_decreasing());
    }

    #[test]
    fn convergence_rejects_bad_scale_lists() {
        let grid = StripGrid::new(1, 0.0, 1.0, 1.0 / 64.0).unwrap();
        let b = VelocityFieldSpec::compressive(1.0, 1).unwrap();
        let u_fn = |x: &[f64]| x[0];
        let u = ScalarInput::Analytic(&u_fn);
        assert!(commutator_convergence(&u, &b, 2.0, 2.0, &[0.1, 0.2], &grid).is_err());
        assert!(matches!(
            commutator_convergence(&u, &b, 2.0, 2.0, &[0.1, 0.01], &grid),
            Err(Error::UnderResolvedKernel { .. })
        ));
        // β below the conjugate exponent propagates the hypothesis error.
        assert!(matches!(
            commutator_convergence(&u, &b, 2.0, 1.2, &[0.1], &grid),
            Err(Error::HypothesisViolation(_))
        ));
    }

    #[test]
    fn interchange_residual_is_zero_for_identical_inputs() {
        let grid = StripGrid::new(2, 1.0, 1.0, 1.0 / 32.0).unwrap();
        let b = VelocityFieldSpec::rigid_rotation();
        let bump = crate::fields::gaussian(vec![0.1, 0.5], 0.12);
        let u_fn = move |x: &[f64]| bump(x);
        let (lhs, rhs, res) = interchange_residual(
            &ScalarInput::Analytic(&u_fn),
            &ScalarInput::Analytic(&u_fn),
            &b,
            0.1,
            &grid,
            0.0,
        )
        .unwrap();
        assert_eq!(lhs.to_bits(), rhs.to_bits());
        assert_eq!(res, 0.0);
    }

    #[test]
    fn interchange_requires_solenoidal_field() {
        let grid = StripGrid::new(1, 0.0, 1.0, 1.0 / 32.0).unwrap();
        let b = VelocityFieldSpec::compressive(1.0, 1).unwrap();
        let u_fn = |x: &[f64]| x[0];
        let err = interchange_residual(
            &ScalarInput::Analytic(&u_fn),
            &ScalarInput::Analytic(&u_fn),
            &b,
            0.1,
            &grid,
            0.0,
        );
        assert!(matches!(err, Err(Error::HypothesisViolation(_))));
    }

    #[test]
    fn one_sided_interchange_defect_follows_cubic_law_in_1d() {
        // For b(x) = x in d = 1 the generalized-interchange residual has
        // the closed-form leading term (2/3)·η³·m₃·⟨u‴, v⟩ with
        // m₃ = ∫ z³ ω(z) dz — a direct consequence of the kernel's
        // one-sidedness (a symmetric kernel would cancel it).
        let m3 = 0.184_292_613_598_924_34;
        let grid = StripGrid::new(1, 0.0, 1.0, 1.0 / 512.0).unwrap();
        let b = VelocityFieldSpec::compressive(1.0, 1).unwrap();
        let u_fn = |x: &[f64]| (2.0 * std::f64::consts::PI * x[0]).sin();
        let u3 = |x: f64| {
            let w = 2.0 * std::f64::consts::PI;
            -w * w * w * (w * x).cos()
        };
        // v: C² bump supported in (0.25, 0.75).
        let v_fn = |x: &[f64]| {
            let z: f64 = (x[0] - 0.25) / 0.5;
            if z <= 0.0 || z >= 1.0 {
                0.0
            } else {
                let s = z * (1.0 - z);
                (s * s * s) * 64.0
            }
        };
        // ⟨u‴, v⟩ by fine trapezoid.
        let mut inner = 0.0;
        let n = 4096;
        for i in 0..=n {
            let x = i as f64 / n as f64;
            let w = if i == 0 || i == n { 0.5 } else { 1.0 } / n as f64;
            inner += w * u3(x) * v_fn(&[x]);
        }
        for &eta in &[0.05, 0.025] {
            let (_, _, res) = generalized_interchange_residual(
                &ScalarInput::Analytic(&u_fn),
                &ScalarInput::Analytic(&v_fn),
                &b,
                eta,
                &grid,
                0.0,
            )
            .unwrap();
            let law = (2.0 / 3.0) * eta.powi(3) * m3 * inner.abs();
            let ratio = res / law;
            assert!(
                (0.85..1.15).contains(&ratio),
                "η={eta}: residual {res} vs law {law} (ratio {ratio})"
            );
        }
    }

    #[test]
    fn one_sided_interchange_defect_is_first_order_in_2d() {
        // For the rigid rotation with distinct Gaussian bumps the
        // interchange residual decays like O(η): halving η halves it.
        let grid = StripGrid::new(2, 1.0, 1.0, 1.0 / 64.0).unwrap();
        let b = VelocityFieldSpec::rigid_rotation();
        let gu = crate::fields::gaussian(vec![0.15, 0.45], 0.1);
        let gv = crate::fields::gaussian(vec![-0.2, 0.5], 0.09);
        let u_fn = move |x: &[f64]| gu(x);
        let v_fn = move |x: &[f64]| gv(x);
        let res_at = |eta: f64| {
            interchange_residual(
                &ScalarInput::Analytic(&u_fn),
                &ScalarInput::Analytic(&v_fn),
                &b,
                eta,
                &grid,
                0.0,
            )
            .unwrap()
            .2
        };
        let r: Vec<f64> = [0.2, 0.1, 0.05, 0.025].iter().map(|&e| res_at(e)).collect();
        assert!(r[0] > 1e-4, "defect unexpectedly small: {}", r[0]);
        // Halving ratios decrease toward 2 from above (η + O(η²) defect):
        // measured 2.52, 2.20, 2.06 on this configuration.
        let ratios: Vec<f64> = r.windows(2).map(|w| w[0] / w[1]).collect();
        assert!(
            ratios.windows(2).all(|w| w[1] < w[0]),
            "halving ratios should decrease toward 2, got {ratios:?}"
        );
        let last = ratios[ratios.len() - 1];
        assert!(
            (1.9..2.2).contains(&last),
            "expected first-order decay, residuals {r:?} (ratios {ratios:?})"
        );
    }

    #[test]
    fn boundary_trace_identity_exact_in_bulk_for_front_solution() {
        // b = e_d, h ≡ 1, u₀ ≡ 0: the exact solution is the front
        // u(x, t) = 1 if x_d < t. In the bulk t ∈ [η, T − η] the mollified
        // trace identity is exact on aligned tables; the t = 0 corner
        // carries an O(η) layer whose L¹ mass is E·η with
        // E = 1/2 − ∫ W², W the kernel's cumulative mass.
        let h_grid = 1.0 / 256.0;
        let eta = 1.0 / 16.0;
        let grid = StripGrid::new(1, 0.0, 1.0, h_grid).unwrap();
        let time = TimeAxis::new(1.0, h_grid).unwrap();
        let u = SampledField::from_fn_time(grid, time, |x, t| {
            if x[0] < t {
                1.0
            } else {
                0.0
            }
        })
        .unwrap();
        let b = VelocityFieldSpec::constant(vec![1.0]).unwrap();
        let bgrid = BoundaryGrid::new(1, 0.0, h_grid, Some(time)).unwrap();
        let h = BoundaryField::from_fn(bgrid, |_, _| 1.0).unwrap();
        let res = boundary_trace_residual(&u, &b, &h, eta).unwrap();
        assert!(
            res.bulk_norm < 1e-10,
            "bulk residual should vanish: {}",
            res.bulk_norm
        );
        let corner_mass = 0.114_367_989_951_768_18 * eta;
        let ratio = res.l1_norm / corner_mass;
        assert!(
            (0.5..2.0).contains(&ratio),
            "corner layer mass {} vs E·η = {corner_mass}",
            res.l1_norm
        );
    }

    #[test]
    fn initial_trace_identity_exact_in_bulk_for_front_solution() {
        let h_grid = 1.0 / 256.0;
        let eta = 1.0 / 16.0;
        let grid = StripGrid::new(1, 0.0, 1.0, h_grid).unwrap();
        let time = TimeAxis::new(1.0, h_grid).unwrap();
        let u = SampledField::from_fn_time(grid, time, |x, t| {
            if x[0] < t {
                1.0
            } else {
                0.0
            }
        })
        .unwrap();
        let u0 = |_: &[f64]| 0.0;
        let res = initial_trace_residual(&u, &u0, eta, 1.0).unwrap();
        assert!(
            res.bulk_norm < 1e-10,
            "bulk residual should vanish: {}",
            res.bulk_norm
        );
        let corner_mass = 0.114_367_989_951_768_18 * eta;
        let ratio = res.lp_norm / corner_mass;
        assert!(
            (0.5..2.0).contains(&ratio),
            "corner layer mass {} vs E·η = {corner_mass}",
            res.lp_norm
        );
    }

    #[test]
    fn mollified_data_trivia() {
        // Constant b passes through; constant u₀ is exact at the boundary;
        // odd h dies at the symmetry point.
        let b = VelocityFieldSpec::constant(vec![0.0, 1.0]).unwrap();
        let data = ScalarDataSpec::new(2.0, 1.0, |_| 1.0, |xp: &[f64], _| xp[0]).unwrap();
        let (bv, hb, u0) = mollify_data(&b, &data, 0.1).unwrap();
        let mut out = [0.0; 2];
        bv.eval(&[0.3, 0.4], 0.2, &mut out);
        assert!((out[0] - 0.0).abs() < 1e-12 && (out[1] - 1.0).abs() < 1e-12);
        assert!((u0.eval(&[0.2, 0.0]) - 1.0).abs() < 1e-8);
        assert!(hb.eval(&[0.0], 0.3).abs() < 1e-8);
        // Time-modulated inflow: mollified value is the forward average.
        let vi = VelocityFieldSpec::vertical_inflow(1).unwrap();
        let mv = MollifiedVelocity::new(vi.clone(), 0.1).unwrap();
        let mut o = [0.0];
        mv.eval(&[0.5], 0.3, &mut o);
        // Forward average over [t, t+η] of 1 + 0.5 sin²(πs) — bracket it.
        let lo = 1.0 + 0.5 * (std::f64::consts::PI * 0.3).sin().powi(2);
        let hi = 1.0 + 0.5 * (std::f64::consts::PI * 0.4).sin().powi(2);
        assert!(o[0] > lo.min(hi) && o[0] < lo.max(hi), "got {}", o[0]);
    }
}
