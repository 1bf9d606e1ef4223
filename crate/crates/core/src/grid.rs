//! Uniform tensor grids on a truncated half-space strip, sampled fields,
//! trapezoid quadrature and Lᵖ norms, and single-point kernel convolutions.
//!
//! The computational domain is the strip [-A, A]^{d-1} × [0, L] standing in
//! for the half-space; experiments choose A and L large enough that no
//! kernel support or characteristic leaves through an artificial face, so
//! the truncation is exact for compactly supported data.
//!
//! Kernel convolutions are evaluated on a trapezoid sub-grid laid over the
//! kernel's support box. The sub-grid matches the field spacing h when the
//! kernel is well resolved and refines by a factor of 4 when η < 8h (with a
//! floor of 16 subintervals per axis). The discrete kernel mass — which for
//! these flat-endpoint bumps converges only root-exponentially in the node
//! count — is divided out of the table weights, so convolving a constant
//! returns the constant to machine precision at every resolution and no
//! spurious attenuation pollutes boundary-value experiments. Off-lattice
//! sample points fall back to multilinear interpolation of the field.

use crate::error::{Error, Result};
use crate::kernels::{BoundaryTimeKernel, HalfSpaceKernel};
use crate::quad::trapezoid_weights;
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};

/// Relative slack used when testing whether a coordinate sits on the lattice
/// or just inside an interval boundary.
const GEOM_EPS: f64 = 1e-9;

/// Integration region selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Region {
    /// The whole strip (or the whole space-time cylinder for timed fields).
    Full,
    /// The flat boundary face {x_d = 0}, with its (d-1)-dimensional measure.
    Boundary,
}

/// One uniform axis: nodes origin + i·h for i = 0..n.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub(crate) struct Axis {
    pub origin: f64,
    pub h: f64,
    /// Node count (subintervals + 1).
    pub n: usize,
}

impl Axis {
    fn coord(&self, i: usize) -> f64 {
        self.origin + i as f64 * self.h
    }

    fn end(&self) -> f64 {
        self.coord(self.n - 1)
    }

    /// Locate x: returns (lower node index, fractional position in cell).
    fn locate(&self, x: f64) -> Result<(usize, f64)> {
        let u = (x - self.origin) / self.h;
        let slack = GEOM_EPS * self.n as f64;
        if u < -slack || u > (self.n - 1) as f64 + slack {
            return Err(Error::MarginViolation(format!(
                "coordinate {x} outside axis [{}, {}]",
                self.origin,
                self.end()
            )));
        }
        let mut i = u.floor() as isize;
        if i < 0 {
            i = 0;
        }
        if i as usize > self.n - 2 {
            i = (self.n - 2) as isize;
        }
        let frac = (u - i as f64).clamp(0.0, 1.0);
        Ok((i as usize, frac))
    }
}

fn check_positive_multiple(extent: f64, h: f64, what: &str) -> Result<usize> {
    if !(extent > 0.0) || !extent.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "{what} must be positive and finite, got {extent}"
        )));
    }
    let ratio = extent / h;
    let rounded = ratio.round();
    if rounded < 1.0 || (ratio - rounded).abs() > 1e-6 * ratio.max(1.0) {
        return Err(Error::InvalidParameter(format!(
            "{what} = {extent} is not a positive multiple of the spacing h = {h}"
        )));
    }
    Ok(rounded as usize)
}

/// Uniform tensor grid on the strip [-A, A]^{d-1} × [0, L], spacing h on
/// every axis. Node coordinates are exactly index·h + offset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StripGrid {
    pub dimension: usize,
    /// Tangential half-extent A (unused when d = 1).
    pub a: f64,
    /// Normal extent L.
    pub l: f64,
    /// Spacing, identical on all axes.
    pub h: f64,
    /// Nodes per tangential axis (2A/h + 1).
    pub tangential_nodes: usize,
    /// Nodes on the normal axis (L/h + 1).
    pub normal_nodes: usize,
}

impl StripGrid {
    pub fn new(dimension: usize, a: f64, l: f64, h: f64) -> Result<Self> {
        if dimension < 1 {
            return Err(Error::InvalidParameter(format!(
                "grid dimension must be >= 1, got {dimension}"
            )));
        }
        if !(h > 0.0) || !h.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "grid spacing must be positive, got {h}"
            )));
        }
        let normal_nodes = check_positive_multiple(l, h, "normal extent L")? + 1;
        let tangential_nodes = if dimension > 1 {
            2 * check_positive_multiple(a, h, "tangential half-extent A")? + 1
        } else {
            1
        };
        Ok(StripGrid {
            dimension,
            a: if dimension > 1 { a } else { 0.0 },
            l,
            h,
            tangential_nodes,
            normal_nodes,
        })
    }

    /// Total spatial node count.
    pub fn node_count(&self) -> usize {
        self.tangential_nodes.pow(self.dimension as u32 - 1) * self.normal_nodes
    }

    pub(crate) fn axes(&self) -> Vec<Axis> {
        let mut axes = vec![
            Axis {
                origin: -self.a,
                h: self.h,
                n: self.tangential_nodes,
            };
            self.dimension - 1
        ];
        axes.push(Axis {
            origin: 0.0,
            h: self.h,
            n: self.normal_nodes,
        });
        axes
    }

    /// Write the coordinates of flat node `idx` into `out`. The layout is
    /// row-major with the normal axis fastest.
    pub fn node_coords(&self, idx: usize, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.dimension);
        let mut rest = idx;
        let d = self.dimension;
        out[d - 1] = (rest % self.normal_nodes) as f64 * self.h;
        rest /= self.normal_nodes;
        for i in (0..d - 1).rev() {
            out[i] = -self.a + (rest % self.tangential_nodes) as f64 * self.h;
            rest /= self.tangential_nodes;
        }
    }

    /// Trapezoid quadrature weight of flat node `idx` for the full region.
    pub fn node_weight(&self, idx: usize) -> f64 {
        let mut w = 1.0;
        let mut rest = idx;
        let j = rest % self.normal_nodes;
        w *= edge_weight(j, self.normal_nodes) * self.h;
        rest /= self.normal_nodes;
        for _ in 0..self.dimension - 1 {
            let i = rest % self.tangential_nodes;
            w *= edge_weight(i, self.tangential_nodes) * self.h;
            rest /= self.tangential_nodes;
        }
        w
    }
}

fn edge_weight(i: usize, n: usize) -> f64 {
    if i == 0 || i == n - 1 {
        0.5
    } else {
        1.0
    }
}

/// Uniform time axis 0, Δt, …, T.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeAxis {
    pub t_end: f64,
    pub dt: f64,
    /// Node count (steps + 1).
    pub nodes: usize,
}

impl TimeAxis {
    pub fn new(t_end: f64, dt: f64) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "time step must be positive, got {dt}"
            )));
        }
        let nodes = check_positive_multiple(t_end, dt, "final time T")? + 1;
        Ok(TimeAxis { t_end, dt, nodes })
    }

    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.dt
    }

    fn axis(&self) -> Axis {
        Axis {
            origin: 0.0,
            h: self.dt,
            n: self.nodes,
        }
    }
}

/// A scalar field sampled on a [`StripGrid`], optionally carrying a time
/// axis. Values are stored time-major: slice k occupies
/// `values[k·node_count .. (k+1)·node_count]`.
#[derive(Debug, Clone)]
pub struct SampledField {
    pub grid: StripGrid,
    pub time: Option<TimeAxis>,
    values: Vec<f64>,
}

/// Borrowed view of one spatial slice of a [`SampledField`].
#[derive(Debug, Clone, Copy)]
pub struct FieldSlice<'a> {
    pub grid: &'a StripGrid,
    pub values: &'a [f64],
}

impl SampledField {
    /// Wrap raw values, rejecting non-finite samples.
    pub fn new(grid: StripGrid, time: Option<TimeAxis>, values: Vec<f64>) -> Result<Self> {
        let expect = grid.node_count() * time.map_or(1, |t| t.nodes);
        if values.len() != expect {
            return Err(Error::DimensionMismatch(format!(
                "expected {expect} samples, got {}",
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!(
                "sample {pos} is {}; fields must be finite everywhere",
                values[pos]
            )));
        }
        Ok(SampledField { grid, time, values })
    }

    /// Sample an analytic function of space.
    pub fn from_fn(grid: StripGrid, f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        let mut x = vec![0.0; grid.dimension];
        let n = grid.node_count();
        let mut values = Vec::with_capacity(n);
        for idx in 0..n {
            grid.node_coords(idx, &mut x);
            values.push(f(&x));
        }
        SampledField::new(grid, None, values)
    }

    /// Sample an analytic function of space and time.
    pub fn from_fn_time(
        grid: StripGrid,
        time: TimeAxis,
        f: impl Fn(&[f64], f64) -> f64,
    ) -> Result<Self> {
        let n = grid.node_count();
        let mut x = vec![0.0; grid.dimension];
        let mut values = Vec::with_capacity(n * time.nodes);
        for k in 0..time.nodes {
            let t = time.time(k);
            for idx in 0..n {
                grid.node_coords(idx, &mut x);
                values.push(f(&x, t));
            }
        }
        SampledField::new(grid, Some(time), values)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// The spatial slice at time index k (k must be 0 for untimed fields).
    pub fn slice(&self, k: usize) -> FieldSlice<'_> {
        let n = self.grid.node_count();
        FieldSlice {
            grid: &self.grid,
            values: &self.values[k * n..(k + 1) * n],
        }
    }

    pub fn time_nodes(&self) -> usize {
        self.time.map_or(1, |t| t.nodes)
    }

    /// Pointwise map producing a new field (used by renormalization).
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<SampledField> {
        SampledField::new(
            self.grid.clone(),
            self.time,
            self.values.iter().map(|&v| f(v)).collect(),
        )
    }

    /// Multilinear interpolation in space and linear interpolation in time.
    pub fn interp_spacetime(&self, x: &[f64], t: f64) -> Result<f64> {
        match self.time {
            None => self.slice(0).interp(x),
            Some(axis) => {
                let (k, frac) = axis.axis().locate(t)?;
                let lo = self.slice(k).interp(x)?;
                if frac == 0.0 {
                    return Ok(lo);
                }
                let hi = self.slice(k + 1).interp(x)?;
                Ok(lo + frac * (hi - lo))
            }
        }
    }

    /// Composite trapezoid integral over the requested region. Timed fields
    /// integrate over the space-time cylinder for [`Region::Full`].
    pub fn integrate(&self, region: Region) -> Result<f64> {
        match (self.time, region) {
            (None, _) => self.slice(0).integrate(region),
            (Some(axis), _) => {
                let mut acc = 0.0;
                for k in 0..axis.nodes {
                    let w = edge_weight(k, axis.nodes) * axis.dt;
                    acc += w * self.slice(k).integrate(region)?;
                }
                Ok(acc)
            }
        }
    }

    /// (∫ |f|ᵖ)^{1/p} over the region (time included for timed fields).
    pub fn lp_norm(&self, p: f64, region: Region) -> Result<f64> {
        check_exponent(p)?;
        match self.time {
            None => self.slice(0).lp_norm(p, region),
            Some(axis) => {
                let mut acc = 0.0;
                for k in 0..axis.nodes {
                    let w = edge_weight(k, axis.nodes) * axis.dt;
                    acc += w * self.slice(k).lp_norm(p, region)?.powf(p);
                }
                Ok(acc.powf(1.0 / p))
            }
        }
    }
}

fn check_exponent(p: f64) -> Result<()> {
    if !(p >= 1.0) || !p.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "Lebesgue exponent must satisfy 1 <= p < infinity, got {p}"
        )));
    }
    Ok(())
}

impl<'a> FieldSlice<'a> {
    pub fn value(&self, idx: usize) -> f64 {
        self.values[idx]
    }

    /// Multilinear interpolation at an arbitrary point of the strip.
    pub fn interp(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.grid.dimension {
            return Err(Error::DimensionMismatch(format!(
                "point has {} coordinates on a {}-dimensional grid",
                x.len(),
                self.grid.dimension
            )));
        }
        let axes = self.grid.axes();
        let d = self.grid.dimension;
        let mut base = vec![0usize; d];
        let mut frac = vec![0.0; d];
        for i in 0..d {
            let (b, f) = axes[i].locate(x[i])?;
            base[i] = b;
            frac[i] = f;
        }
        // Strides: normal axis fastest.
        let mut strides = vec![0usize; d];
        strides[d - 1] = 1;
        for i in (0..d - 1).rev() {
            strides[i] = strides[i + 1]
                * if i + 1 == d - 1 {
                    self.grid.normal_nodes
                } else {
                    self.grid.tangential_nodes
                };
        }
        let mut acc = 0.0;
        for corner in 0..(1usize << d) {
            let mut w = 1.0;
            let mut idx = 0usize;
            for i in 0..d {
                if corner & (1 << i) != 0 {
                    w *= frac[i];
                    idx += (base[i] + 1) * strides[i];
                } else {
                    w *= 1.0 - frac[i];
                    idx += base[i] * strides[i];
                }
            }
            if w != 0.0 {
                acc += w * self.values[idx];
            }
        }
        Ok(acc)
    }

    /// Trapezoid integral over the strip or its boundary face.
    pub fn integrate(&self, region: Region) -> Result<f64> {
        let g = self.grid;
        match region {
            Region::Full => {
                let mut acc = 0.0;
                for (idx, &v) in self.values.iter().enumerate() {
                    acc += g.node_weight(idx) * v;
                }
                Ok(acc)
            }
            Region::Boundary => {
                // Nodes with normal index 0; weight from tangential axes only.
                let mut acc = 0.0;
                let tan_count = g.tangential_nodes.pow(g.dimension as u32 - 1);
                for flat_tan in 0..tan_count {
                    let mut w = 1.0;
                    let mut rest = flat_tan;
                    for _ in 0..g.dimension - 1 {
                        let i = rest % g.tangential_nodes;
                        w *= edge_weight(i, g.tangential_nodes) * g.h;
                        rest /= g.tangential_nodes;
                    }
                    acc += w * self.values[flat_tan * g.normal_nodes];
                }
                Ok(acc)
            }
        }
    }

    pub fn lp_norm(&self, p: f64, region: Region) -> Result<f64> {
        check_exponent(p)?;
        let g = self.grid;
        match region {
            Region::Full => {
                let mut acc = 0.0;
                for (idx, &v) in self.values.iter().enumerate() {
                    acc += g.node_weight(idx) * v.abs().powf(p);
                }
                Ok(acc.powf(1.0 / p))
            }
            Region::Boundary => {
                let mut acc = 0.0;
                let tan_count = g.tangential_nodes.pow(g.dimension as u32 - 1);
                for flat_tan in 0..tan_count {
                    let mut w = 1.0;
                    let mut rest = flat_tan;
                    for _ in 0..g.dimension - 1 {
                        let i = rest % g.tangential_nodes;
                        w *= edge_weight(i, g.tangential_nodes) * g.h;
                        rest /= g.tangential_nodes;
                    }
                    acc += w * self.values[flat_tan * g.normal_nodes].abs().powf(p);
                }
                Ok(acc.powf(1.0 / p))
            }
        }
    }
}

/// Grid on the flat boundary ∂Ω = [-A, A]^{d-1}, optionally × time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryGrid {
    /// Dimension d of the parent strip (the boundary itself is (d-1)-dim).
    pub dimension: usize,
    pub a: f64,
    pub h: f64,
    pub tangential_nodes: usize,
    pub time: Option<TimeAxis>,
}

impl BoundaryGrid {
    pub fn new(dimension: usize, a: f64, h: f64, time: Option<TimeAxis>) -> Result<Self> {
        if dimension < 1 {
            return Err(Error::InvalidParameter(format!(
                "boundary grid dimension must be >= 1, got {dimension}"
            )));
        }
        if !(h > 0.0) || !h.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "grid spacing must be positive, got {h}"
            )));
        }
        let tangential_nodes = if dimension > 1 {
            2 * check_positive_multiple(a, h, "tangential half-extent A")? + 1
        } else {
            1
        };
        Ok(BoundaryGrid {
            dimension,
            a: if dimension > 1 { a } else { 0.0 },
            h,
            tangential_nodes,
            time,
        })
    }

    /// Consistency with a parent strip grid's tangential axes.
    pub fn matches_strip(&self, strip: &StripGrid) -> bool {
        self.dimension == strip.dimension
            && self.tangential_nodes == strip.tangential_nodes
            && (self.a - strip.a).abs() <= GEOM_EPS
            && (self.h - strip.h).abs() <= GEOM_EPS * strip.h
    }

    pub fn tangential_count(&self) -> usize {
        self.tangential_nodes.pow(self.dimension as u32 - 1)
    }

    pub fn node_count(&self) -> usize {
        self.tangential_count() * self.time.map_or(1, |t| t.nodes)
    }

    /// Tangential coordinates of flat spatial index `idx`.
    pub fn tangential_coords(&self, idx: usize, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.dimension - 1);
        let mut rest = idx;
        for i in (0..self.dimension - 1).rev() {
            out[i] = -self.a + (rest % self.tangential_nodes) as f64 * self.h;
            rest /= self.tangential_nodes;
        }
    }
}

/// Scalar samples on a [`BoundaryGrid`] (time-major like [`SampledField`]).
#[derive(Debug, Clone)]
pub struct BoundaryField {
    pub grid: BoundaryGrid,
    values: Vec<f64>,
}

impl BoundaryField {
    pub fn new(grid: BoundaryGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.node_count() {
            return Err(Error::DimensionMismatch(format!(
                "expected {} boundary samples, got {}",
                grid.node_count(),
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!(
                "boundary sample {pos} is {}",
                values[pos]
            )));
        }
        Ok(BoundaryField { grid, values })
    }

    pub fn from_fn(grid: BoundaryGrid, f: impl Fn(&[f64], f64) -> f64) -> Result<Self> {
        let tan = grid.tangential_count();
        let steps = grid.time.map_or(1, |t| t.nodes);
        let mut xp = vec![0.0; grid.dimension - 1];
        let mut values = Vec::with_capacity(tan * steps);
        for k in 0..steps {
            let t = grid.time.map_or(0.0, |a| a.time(k));
            for idx in 0..tan {
                grid.tangential_coords(idx, &mut xp);
                values.push(f(&xp, t));
            }
        }
        BoundaryField::new(grid, values)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, tan_idx: usize, time_idx: usize) -> f64 {
        self.values[time_idx * self.grid.tangential_count() + tan_idx]
    }

    /// Interpolate at tangential point x′ and time t (linear per axis).
    pub fn interp(&self, x_prime: &[f64], t: f64) -> Result<f64> {
        let d = self.grid.dimension;
        if x_prime.len() != d - 1 {
            return Err(Error::DimensionMismatch(format!(
                "boundary point has {} coordinates, expected {}",
                x_prime.len(),
                d - 1
            )));
        }
        let mut axes: Vec<Axis> = vec![
            Axis {
                origin: -self.grid.a,
                h: self.grid.h,
                n: self.grid.tangential_nodes,
            };
            d - 1
        ];
        let timed = self.grid.time.is_some();
        if let Some(ta) = self.grid.time {
            axes.push(ta.axis());
        }
        let na = axes.len();
        let mut base = vec![0usize; na];
        let mut frac = vec![0.0; na];
        for i in 0..d - 1 {
            let (b, f) = axes[i].locate(x_prime[i])?;
            base[i] = b;
            frac[i] = f;
        }
        if timed {
            let (b, f) = axes[na - 1].locate(t)?;
            base[na - 1] = b;
            frac[na - 1] = f;
        }
        // Strides: spatial fastest within a slice, time slowest.
        let tan_count = self.grid.tangential_count();
        let mut strides = vec![0usize; na];
        if d >= 2 {
            strides[d - 2] = 1;
            for i in (0..d.saturating_sub(2)).rev() {
                strides[i] = strides[i + 1] * self.grid.tangential_nodes;
            }
        }
        if timed {
            strides[na - 1] = tan_count;
        }
        let mut acc = 0.0;
        for corner in 0..(1usize << na) {
            let mut w = 1.0;
            let mut idx = 0usize;
            for i in 0..na {
                if corner & (1 << i) != 0 {
                    w *= frac[i];
                    idx += (base[i] + 1) * strides[i];
                } else {
                    w *= 1.0 - frac[i];
                    idx += base[i] * strides[i];
                }
            }
            if w != 0.0 {
                acc += w * self.values[idx];
            }
        }
        Ok(acc)
    }

    /// Trapezoid integral over ∂Ω × (0, T) (or ∂Ω alone if untimed).
    pub fn integrate(&self) -> f64 {
        self.weighted_sum(|v| v)
    }

    pub fn lp_norm(&self, p: f64) -> Result<f64> {
        check_exponent(p)?;
        Ok(self.weighted_sum(|v| v.abs().powf(p)).powf(1.0 / p))
    }

    fn weighted_sum(&self, f: impl Fn(f64) -> f64) -> f64 {
        let g = &self.grid;
        let tan_count = g.tangential_count();
        let steps = g.time.map_or(1, |t| t.nodes);
        let mut acc = 0.0;
        for k in 0..steps {
            let wt = g
                .time
                .map_or(1.0, |a| edge_weight(k, a.nodes) * a.dt);
            for idx in 0..tan_count {
                let mut w = 1.0;
                let mut rest = idx;
                for _ in 0..g.dimension - 1 {
                    let i = rest % g.tangential_nodes;
                    w *= edge_weight(i, g.tangential_nodes) * g.h;
                    rest /= g.tangential_nodes;
                }
                acc += wt * w * f(self.values[k * tan_count + idx]);
            }
        }
        acc
    }
}

/// Choose the sub-grid node count for one kernel axis of width `width`,
/// given the field spacing `h`: spacing h normally, h/4 when η < 8h, never
/// fewer than 16 subintervals.
pub(crate) fn kernel_subdivisions(width: f64, eta: f64, h: f64) -> usize {
    let spacing = if eta < 8.0 * h { 0.25 * h } else { h };
    ((width / spacing).round() as usize).max(16)
}

/// Precomputed quadrature table for the half-space kernel: flattened tensor
/// offsets (relative to the evaluation point; the normal axis points into
/// the interior) with combined trapezoid-weight × kernel values, divided by
/// the discrete mass so the weights sum to exactly 1. Optional gradient
/// planes carry (∇ρ̂)(-offset) with the same measure normalization.
#[derive(Debug, Clone)]
pub struct HalfSpaceTable {
    pub dimension: usize,
    pub eta: f64,
    /// Sample offsets, node-major: offsets[k·d..(k+1)·d].
    pub offsets: Vec<f64>,
    /// Normalized value weights (sum exactly 1 after renormalization).
    pub weights: Vec<f64>,
    /// Raw quadrature weights (trapezoid cell measures, no kernel factor),
    /// sharing the discrete-mass normalization.
    pub cell_measures: Vec<f64>,
    /// Gradient weights per node, node-major d components; empty unless
    /// requested. Shares the value table's mass normalization.
    pub gradient_weights: Vec<f64>,
}

impl HalfSpaceTable {
    /// Lattice-aligned trapezoid table at the field spacing `h` (refined by
    /// a factor of 4 when η < 8h, floor of 16 subintervals per axis).
    /// Preferred for value-only convolution of sampled fields.
    pub fn build(kernel: &HalfSpaceKernel, h: f64, with_gradients: bool) -> Self {
        let d = kernel.dimension;
        let eta = kernel.scale;
        let n_norm = kernel_subdivisions(eta, eta, h);
        let n_tan = kernel_subdivisions(2.0 * eta, eta, h);
        // Per-axis nodes and weights.
        let mut axis_nodes: Vec<Vec<f64>> = Vec::with_capacity(d);
        let mut axis_weights: Vec<Vec<f64>> = Vec::with_capacity(d);
        for _ in 0..d - 1 {
            let step = 2.0 * eta / n_tan as f64;
            axis_nodes.push((0..=n_tan).map(|i| -eta + i as f64 * step).collect());
            axis_weights.push(trapezoid_weights(n_tan + 1, step));
        }
        let step = eta / n_norm as f64;
        axis_nodes.push((0..=n_norm).map(|i| i as f64 * step).collect());
        axis_weights.push(trapezoid_weights(n_norm + 1, step));
        Self::assemble(kernel, axis_nodes, axis_weights, with_gradients)
    }

    /// Gauss–Legendre table with `nodes_per_axis` points per axis.
    /// Mandatory for kernel-derivative integrals: the trapezoid sub-grid's
    /// error on ω′-weighted moments is orders of magnitude worse than on
    /// value moments (measured ~1e-3 at ~26 points versus ~3e-8 for GL-48),
    /// while Gauss nodes hit ~1e-8 at 48 points uniformly in η.
    pub fn build_gauss(
        kernel: &HalfSpaceKernel,
        nodes_per_axis: usize,
        with_gradients: bool,
    ) -> Self {
        let d = kernel.dimension;
        let eta = kernel.scale;
        let rule = crate::quad::GaussRule::new(nodes_per_axis);
        let mut axis_nodes: Vec<Vec<f64>> = Vec::with_capacity(d);
        let mut axis_weights: Vec<Vec<f64>> = Vec::with_capacity(d);
        for _ in 0..d - 1 {
            let (n, w): (Vec<f64>, Vec<f64>) = rule.mapped(-eta, eta).unzip();
            axis_nodes.push(n);
            axis_weights.push(w);
        }
        let (n, w): (Vec<f64>, Vec<f64>) = rule.mapped(0.0, eta).unzip();
        axis_nodes.push(n);
        axis_weights.push(w);
        Self::assemble(kernel, axis_nodes, axis_weights, with_gradients)
    }

    fn assemble(
        kernel: &HalfSpaceKernel,
        axis_nodes: Vec<Vec<f64>>,
        axis_weights: Vec<Vec<f64>>,
        with_gradients: bool,
    ) -> Self {
        let d = kernel.dimension;
        let eta = kernel.scale;
        let total: usize = axis_nodes.iter().map(|a| a.len()).product();
        let mut offsets = Vec::with_capacity(total * d);
        let mut weights = Vec::with_capacity(total);
        let mut cell_measures = Vec::with_capacity(total);
        let mut gradient_weights = if with_gradients {
            Vec::with_capacity(total * d)
        } else {
            Vec::new()
        };
        let mut index = vec![0usize; d];
        let mut mass = 0.0;
        'outer: loop {
            let mut off = vec![0.0; d];
            let mut cell = 1.0;
            for i in 0..d {
                off[i] = axis_nodes[i][index[i]];
                cell *= axis_weights[i][index[i]];
            }
            // Kernel factors at argument -offset: tangential symmetric parts
            // see -off_i (same value by evenness), the reflected normal part
            // sees ω_η(off_d).
            let mut tan_vals = vec![0.0; d - 1];
            let mut val = kernel.normal.eval(off[d - 1]);
            for i in 0..d - 1 {
                tan_vals[i] = kernel.tangential.eval(off[i]);
                val *= tan_vals[i];
            }
            let w = cell * val;
            mass += w;
            if with_gradients {
                // (∇ρ̂)(-offset): tangential component i is ρ′_η(-off_i)·rest
                // = -ρ′_η(off_i)·rest (odd derivative); the normal component
                // is -ω′_η(off_d)·tangential product.
                let normal_val = kernel.normal.eval(off[d - 1]);
                for i in 0..d - 1 {
                    let mut gi = -kernel.tangential.deriv(off[i]);
                    for (j, &tv) in tan_vals.iter().enumerate() {
                        if j != i {
                            gi *= tv;
                        }
                    }
                    gradient_weights.push(cell * gi * normal_val);
                }
                let mut gd = -kernel.normal.deriv(off[d - 1]);
                for &tv in &tan_vals {
                    gd *= tv;
                }
                gradient_weights.push(cell * gd);
            }
            offsets.extend_from_slice(&off);
            weights.push(w);
            cell_measures.push(cell);

            // Advance the tensor multi-index.
            for i in (0..d).rev() {
                index[i] += 1;
                if index[i] < axis_nodes[i].len() {
                    continue 'outer;
                }
                index[i] = 0;
                if i == 0 {
                    break 'outer;
                }
            }
        }
        // Discrete-mass renormalization: constants convolve to themselves
        // exactly; gradient planes share the measure scaling for consistency.
        for w in &mut weights {
            *w /= mass;
        }
        for c in &mut cell_measures {
            *c /= mass;
        }
        for g in &mut gradient_weights {
            *g /= mass;
        }
        HalfSpaceTable {
            dimension: d,
            eta,
            offsets,
            weights,
            cell_measures,
            gradient_weights,
        }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Convolve the sampled slice with the kernel at point `x`:
    /// Σ_k w_k f(x + offset_k).
    pub fn convolve(&self, f: FieldSlice<'_>, x: &[f64]) -> Result<f64> {
        let d = self.dimension;
        let mut y = vec![0.0; d];
        let mut acc = 0.0;
        for (k, &w) in self.weights.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            for i in 0..d {
                y[i] = x[i] + self.offsets[k * d + i];
            }
            acc += w * f.interp(&y)?;
        }
        Ok(acc)
    }
}

/// Check the margins required to convolve at `x`: the kernel box
/// {|y_i - x_i| ≤ η, y_d ∈ [x_d, x_d + η]} must lie inside the strip.
pub fn half_space_margins(grid: &StripGrid, eta: f64, x: &[f64]) -> Result<()> {
    let d = grid.dimension;
    if x.len() != d {
        return Err(Error::DimensionMismatch(format!(
            "point has {} coordinates on a {d}-dimensional grid",
            x.len()
        )));
    }
    let slack = GEOM_EPS * (1.0 + grid.l.abs());
    if x[d - 1] < -slack || x[d - 1] + eta > grid.l + slack {
        return Err(Error::MarginViolation(format!(
            "normal coordinate {} with eta = {eta} must satisfy 0 <= x_d and x_d + eta <= L = {}",
            x[d - 1],
            grid.l
        )));
    }
    for &xi in &x[..d - 1] {
        if xi - eta < -grid.a - slack || xi + eta > grid.a + slack {
            return Err(Error::MarginViolation(format!(
                "tangential coordinate {xi} with eta = {eta} exceeds the box [-{}, {}]",
                grid.a, grid.a
            )));
        }
    }
    Ok(())
}

/// One-point half-space convolution (u ∗ ρ̂ᵈ_η)(x), sampling only
/// y_d ∈ [x_d, x_d + η] — the interior side of x.
///
/// Convenience form that builds the quadrature table on the fly; sweeping
/// callers should build a [`HalfSpaceTable`] once and reuse it.
pub fn convolve_half_space(f: &SampledField, kernel: &HalfSpaceKernel, x: &[f64]) -> Result<f64> {
    if f.time.is_some() {
        return Err(Error::DimensionMismatch(
            "convolve_half_space expects a spatial field; take a time slice first".into(),
        ));
    }
    if f.grid.dimension != kernel.dimension {
        return Err(Error::DimensionMismatch(format!(
            "field dimension {} vs kernel dimension {}",
            f.grid.dimension, kernel.dimension
        )));
    }
    half_space_margins(&f.grid, kernel.scale, x)?;
    let table = HalfSpaceTable::build(kernel, f.grid.h, false);
    table.convolve(f.slice(0), x)
}

/// Quadrature table for the boundary–time kernel: symmetric tangential axes
/// plus a one-sided *forward* time axis (offsets sample s = t + σ, σ ∈ [0, η]).
#[derive(Debug, Clone)]
pub struct BoundaryTimeTable {
    pub dimension: usize,
    pub eta: f64,
    /// Node-major offsets: d-1 tangential components then the time offset.
    pub offsets: Vec<f64>,
    pub weights: Vec<f64>,
}

impl BoundaryTimeTable {
    pub fn build(kernel: &BoundaryTimeKernel, h: f64, dt: f64) -> Self {
        let d = kernel.dimension;
        let eta = kernel.scale;
        let n_tan = kernel_subdivisions(2.0 * eta, eta, h);
        let n_time = kernel_subdivisions(eta, eta, dt);
        let mut axis_nodes: Vec<Vec<f64>> = Vec::with_capacity(d);
        let mut axis_weights: Vec<Vec<f64>> = Vec::with_capacity(d);
        for _ in 0..d - 1 {
            let step = 2.0 * eta / n_tan as f64;
            axis_nodes.push((0..=n_tan).map(|i| -eta + i as f64 * step).collect());
            axis_weights.push(trapezoid_weights(n_tan + 1, step));
        }
        let step = eta / n_time as f64;
        axis_nodes.push((0..=n_time).map(|i| i as f64 * step).collect());
        axis_weights.push(trapezoid_weights(n_time + 1, step));

        let total: usize = axis_nodes.iter().map(|a| a.len()).product();
        let mut offsets = Vec::with_capacity(total * d);
        let mut weights = Vec::with_capacity(total);
        let mut index = vec![0usize; d];
        let mut mass = 0.0;
        'outer: loop {
            let mut off = vec![0.0; d];
            let mut cell = 1.0;
            for i in 0..d {
                off[i] = axis_nodes[i][index[i]];
                cell *= axis_weights[i][index[i]];
            }
            let mut val = kernel.temporal.eval(off[d - 1]);
            for i in 0..d - 1 {
                val *= kernel.tangential.eval(off[i]);
            }
            let w = cell * val;
            mass += w;
            offsets.extend_from_slice(&off);
            weights.push(w);
            for i in (0..d).rev() {
                index[i] += 1;
                if index[i] < axis_nodes[i].len() {
                    continue 'outer;
                }
                index[i] = 0;
                if i == 0 {
                    break 'outer;
                }
            }
        }
        for w in &mut weights {
            *w /= mass;
        }
        BoundaryTimeTable {
            dimension: d,
            eta,
            offsets,
            weights,
        }
    }

    /// Convolve boundary data at (x′, t): Σ w_k g(x′ + off′_k, t + off_t_k).
    pub fn convolve(&self, g: &BoundaryField, x_prime: &[f64], t: f64) -> Result<f64> {
        let d = self.dimension;
        let mut yp = vec![0.0; d - 1];
        let mut acc = 0.0;
        for (k, &w) in self.weights.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            for i in 0..d - 1 {
                yp[i] = x_prime[i] + self.offsets[k * d + i];
            }
            let s = t + self.offsets[k * d + d - 1];
            acc += w * g.interp(&yp, s)?;
        }
        Ok(acc)
    }
}

/// One-point boundary–space-time convolution (g ∗ ρ̃ᵈ_η)(x′, t): symmetric
/// smoothing along the boundary, one-sided smoothing into the *future*
/// (samples s ∈ [t, t + η]).
pub fn convolve_boundary_spacetime(
    g: &BoundaryField,
    eta: f64,
    x_prime: &[f64],
    t: f64,
) -> Result<f64> {
    let kernel = BoundaryTimeKernel::new(g.grid.dimension, eta)?;
    if let Some(axis) = g.grid.time {
        if t + eta > axis.t_end + GEOM_EPS * axis.t_end.max(1.0) {
            return Err(Error::OutOfHorizon {
                t,
                eta,
                horizon: axis.t_end,
            });
        }
    }
    for &xi in x_prime {
        if xi - eta < -g.grid.a - GEOM_EPS || xi + eta > g.grid.a + GEOM_EPS {
            return Err(Error::MarginViolation(format!(
                "tangential coordinate {xi} with eta = {eta} exceeds the boundary box"
            )));
        }
    }
    let table = BoundaryTimeTable::build(&kernel, g.grid.h, g.grid.time.map_or(g.grid.h, |a| a.dt));
    table.convolve(g, x_prime, t)
}

// ---------------------------------------------------------------------------
// Serialization: flat little-endian binary with a JSON header, and CSV.
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
struct FieldHeader {
    dimension: usize,
    a: f64,
    l: f64,
    h: f64,
    time: Option<(f64, f64)>,
    count: usize,
}

impl SampledField {
    /// Write as a one-line JSON header followed by little-endian f64 samples.
    pub fn write_binary<W: Write>(&self, w: &mut W) -> Result<()> {
        let header = FieldHeader {
            dimension: self.grid.dimension,
            a: self.grid.a,
            l: self.grid.l,
            h: self.grid.h,
            time: self.time.map(|t| (t.t_end, t.dt)),
            count: self.values.len(),
        };
        serde_json::to_writer(&mut *w, &header)?;
        w.write_all(b"\n")?;
        for v in &self.values {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(r: &mut R) -> Result<Self> {
        let mut header_bytes = Vec::new();
        let mut byte = [0u8; 1];
        loop {
            r.read_exact(&mut byte)?;
            if byte[0] == b'\n' {
                break;
            }
            header_bytes.push(byte[0]);
        }
        let header: FieldHeader = serde_json::from_slice(&header_bytes)?;
        let grid = StripGrid::new(header.dimension, header.a, header.l, header.h)?;
        let time = match header.time {
            Some((t_end, dt)) => Some(TimeAxis::new(t_end, dt)?),
            None => None,
        };
        let mut values = vec![0.0f64; header.count];
        let mut buf = [0u8; 8];
        for v in &mut values {
            r.read_exact(&mut buf)?;
            *v = f64::from_le_bytes(buf);
        }
        SampledField::new(grid, time, values)
    }

    /// CSV export: one row per node (time, coordinates…, value), fixed
    /// 12-digit scientific formatting for byte-stable output.
    pub fn write_csv<W: Write>(&self, w: &mut W) -> Result<()> {
        let d = self.grid.dimension;
        match self.time {
            Some(_) => writeln!(w, "t,{},value", coord_names(d))?,
            None => writeln!(w, "{},value", coord_names(d))?,
        }
        let n = self.grid.node_count();
        let mut x = vec![0.0; d];
        for k in 0..self.time_nodes() {
            for idx in 0..n {
                self.grid.node_coords(idx, &mut x);
                if let Some(axis) = self.time {
                    write!(w, "{:.12e},", axis.time(k))?;
                }
                for xi in &x {
                    write!(w, "{xi:.12e},")?;
                }
                writeln!(w, "{:.12e}", self.values[k * n + idx])?;
            }
        }
        Ok(())
    }
}

fn coord_names(d: usize) -> String {
    (1..=d)
        .map(|i| format!("x{i}"))
        .collect::<Vec<_>>()
        .join(",")
}
