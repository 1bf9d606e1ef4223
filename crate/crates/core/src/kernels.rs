//! Mollification kernels.
//!
//! Two 1-D profiles generate everything:
//!
//! * the symmetric bump `ρ(x) ∝ exp(-1/(1-x²))` on (-1, 1), and
//! * the one-sided bump `ω(x) ∝ exp(1/(4x(x-1)))` on (0, 1),
//!
//! each normalized to unit mass. The one-sided profile is the same bump
//! recentred on (0, 1) — written with the factored denominator `4x(x-1)`
//! rather than the algebraically equal `4(x-1/2)²-1`, because the latter
//! cancels catastrophically near the support endpoints and underflows to a
//! division by zero at x ≈ 0 or 1.
//!
//! The half-space kernel is the tensor product of (d-1) symmetric factors in
//! the tangential coordinates and one *reflected* one-sided factor in the
//! normal coordinate: evaluated at an offset x - y it samples only points
//! with y_d ∈ [x_d, x_d + η], i.e. strictly on the interior side. The
//! boundary–time kernel replaces the normal axis by time and samples only
//! the future. All kernels return exactly 0.0 outside their closed support
//! boxes — the trace identities rely on integrals that vanish identically,
//! not approximately.

use crate::error::{Error, Result};
use crate::quad;
use std::sync::LazyLock;

/// Normalizer 1/∫ρ_raw for the symmetric profile, by the reference quadrature.
static RHO_NORM: LazyLock<f64> =
    LazyLock::new(|| 1.0 / quad::adaptive(&rho_raw, -1.0, 1.0, 1e-12).value);
/// Normalizer C = 1/∫ω_raw for the one-sided profile.
static OMEGA_NORM: LazyLock<f64> =
    LazyLock::new(|| 1.0 / quad::adaptive(&omega_raw, 0.0, 1.0, 1e-12).value);

/// Unnormalized symmetric bump on (-1, 1).
fn rho_raw(z: f64) -> f64 {
    if z > -1.0 && z < 1.0 {
        (-1.0 / ((1.0 - z) * (1.0 + z))).exp()
    } else {
        0.0
    }
}

/// d/dz of the raw symmetric bump; zero (to all orders) at the endpoints.
fn rho_raw_deriv(z: f64) -> f64 {
    if z > -1.0 && z < 1.0 {
        let q = (1.0 - z) * (1.0 + z);
        rho_raw(z) * (-2.0 * z / (q * q))
    } else {
        0.0
    }
}

/// Unnormalized one-sided bump on (0, 1).
fn omega_raw(z: f64) -> f64 {
    if z > 0.0 && z < 1.0 {
        (1.0 / (4.0 * z * (z - 1.0))).exp()
    } else {
        0.0
    }
}

/// d/dz of the raw one-sided bump; zero at both endpoints by flatness.
fn omega_raw_deriv(z: f64) -> f64 {
    if z > 0.0 && z < 1.0 {
        let q = 4.0 * z * (z - 1.0);
        omega_raw(z) * (-(8.0 * z - 4.0) / (q * q))
    } else {
        0.0
    }
}

/// Which of the two canonical profiles a 1-D kernel uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelKind {
    /// Even bump supported on [-η, η].
    Symmetric,
    /// Bump supported on [0, η], vanishing at both endpoints.
    OneSided,
}

/// A scaled 1-D mollifier (1/η)·profile(x/η) with cached normalization.
#[derive(Debug, Clone, Copy)]
pub struct Kernel1D {
    pub kind: KernelKind,
    /// Smoothing scale η > 0.
    pub scale: f64,
    /// Profile normalizer (1/∫raw); cached at construction.
    pub normalization: f64,
}

impl Kernel1D {
    pub fn symmetric(scale: f64) -> Result<Self> {
        if !(scale > 0.0) || !scale.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "kernel scale must be a positive finite number, got {scale}"
            )));
        }
        Ok(Kernel1D {
            kind: KernelKind::Symmetric,
            scale,
            normalization: *RHO_NORM,
        })
    }

    pub fn one_sided(scale: f64) -> Result<Self> {
        if !(scale > 0.0) || !scale.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "kernel scale must be a positive finite number, got {scale}"
            )));
        }
        Ok(Kernel1D {
            kind: KernelKind::OneSided,
            scale,
            normalization: *OMEGA_NORM,
        })
    }

    /// Normalized unit-scale profile at z.
    pub fn eval_ref(&self, z: f64) -> f64 {
        match self.kind {
            KernelKind::Symmetric => self.normalization * rho_raw(z),
            KernelKind::OneSided => self.normalization * omega_raw(z),
        }
    }

    /// d/dz of the unit-scale profile.
    pub fn deriv_ref(&self, z: f64) -> f64 {
        match self.kind {
            KernelKind::Symmetric => self.normalization * rho_raw_deriv(z),
            KernelKind::OneSided => self.normalization * omega_raw_deriv(z),
        }
    }

    /// Scaled kernel value: exactly the composed expression (1/η)·ref(x/η),
    /// so scaling covariance holds bit-for-bit.
    pub fn eval(&self, x: f64) -> f64 {
        self.eval_ref(x / self.scale) / self.scale
    }

    /// Scaled derivative (1/η²)·ref′(x/η).
    pub fn deriv(&self, x: f64) -> f64 {
        self.deriv_ref(x / self.scale) / (self.scale * self.scale)
    }

    /// The closed support interval of the scaled kernel.
    pub fn support(&self) -> (f64, f64) {
        match self.kind {
            KernelKind::Symmetric => (-self.scale, self.scale),
            KernelKind::OneSided => (0.0, self.scale),
        }
    }

    /// k-th moment ∫ zᵏ·profile(z) dz of the *unit-scale* profile, by the
    /// reference quadrature. The scaled kernel's k-th moment is ηᵏ times this.
    pub fn moment(&self, k: u32) -> f64 {
        let (a, b) = match self.kind {
            KernelKind::Symmetric => (-1.0, 1.0),
            KernelKind::OneSided => (0.0, 1.0),
        };
        let kr = self.clone_unit();
        quad::adaptive(&|z: f64| z.powi(k as i32) * kr.eval_ref(z), a, b, 1e-12).value
    }

    fn clone_unit(&self) -> Kernel1D {
        Kernel1D {
            kind: self.kind,
            scale: 1.0,
            normalization: self.normalization,
        }
    }
}

/// Spec-level convenience: the symmetric mollifier ρ_η at x.
pub fn eval_symmetric(x: f64, eta: f64) -> Result<f64> {
    Ok(Kernel1D::symmetric(eta)?.eval(x))
}

/// Spec-level convenience: the one-sided mollifier ω_η at x.
pub fn eval_one_sided(x: f64, eta: f64) -> Result<f64> {
    Ok(Kernel1D::one_sided(eta)?.eval(x))
}

/// First moment m₁ = ∫ z ω(z) dz of the one-sided profile (≈ 1/2 exactly,
/// by the profile's symmetry about z = 1/2).
pub fn one_sided_m1() -> f64 {
    Kernel1D::one_sided(1.0).expect("unit scale").moment(1)
}

/// The tensor half-space kernel ρ̂ᵈ_η(x) = ρ^{(d-1)}_η(x′) · ω_η(-x_d).
///
/// Supported on {|x_i| ≤ η for i < d, x_d ∈ [-η, 0]}; as a convolution
/// kernel at offset x - y it reads y_d ∈ [x_d, x_d + η] — interior side only.
/// For d = 1 the tangential product is empty (ρ⁽⁰⁾ ≡ 1) and the kernel
/// degenerates to the reflected one-sided factor alone.
#[derive(Debug, Clone)]
pub struct HalfSpaceKernel {
    pub dimension: usize,
    pub scale: f64,
    pub tangential: Kernel1D,
    pub normal: Kernel1D,
}

impl HalfSpaceKernel {
    pub fn new(dimension: usize, scale: f64) -> Result<Self> {
        if dimension < 1 {
            return Err(Error::InvalidParameter(format!(
                "kernel dimension must be >= 1, got {dimension}"
            )));
        }
        Ok(HalfSpaceKernel {
            dimension,
            scale,
            tangential: Kernel1D::symmetric(scale)?,
            normal: Kernel1D::one_sided(scale)?,
        })
    }

    /// Kernel value at the point x ∈ ℝᵈ.
    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dimension {
            return Err(Error::DimensionMismatch(format!(
                "kernel is {}-dimensional, point has {} coordinates",
                self.dimension,
                x.len()
            )));
        }
        let d = self.dimension;
        let mut v = self.normal.eval(-x[d - 1]);
        for &xi in &x[..d - 1] {
            v *= self.tangential.eval(xi);
        }
        Ok(v)
    }

    /// Analytic gradient of the tensor kernel; the zero vector everywhere
    /// outside the support (the profiles are flat to all orders there).
    pub fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dimension {
            return Err(Error::DimensionMismatch(format!(
                "kernel is {}-dimensional, point has {} coordinates",
                self.dimension,
                x.len()
            )));
        }
        let d = self.dimension;
        let tan_vals: Vec<f64> = x[..d - 1].iter().map(|&xi| self.tangential.eval(xi)).collect();
        let normal_val = self.normal.eval(-x[d - 1]);
        let mut g = vec![0.0; d];
        for i in 0..d - 1 {
            let mut gi = self.tangential.deriv(x[i]);
            for (j, &tv) in tan_vals.iter().enumerate() {
                if j != i {
                    gi *= tv;
                }
            }
            g[i] = gi * normal_val;
        }
        // ∂/∂x_d of ω_η(-x_d) = -ω_η′(-x_d)
        let mut gd = -self.normal.deriv(-x[d - 1]);
        for &tv in &tan_vals {
            gd *= tv;
        }
        g[d - 1] = gd;
        Ok(g)
    }

    /// Per-axis closed support of the kernel: [-η, η] tangentially, [-η, 0]
    /// on the normal axis.
    pub fn support_box(&self) -> Vec<(f64, f64)> {
        let mut b = vec![(-self.scale, self.scale); self.dimension - 1];
        b.push((-self.scale, 0.0));
        b
    }
}

/// Spec-level convenience: evaluate ρ̂ᵈ_η at a point.
pub fn eval_half_space_kernel(x: &[f64], eta: f64, dimension: usize) -> Result<f64> {
    HalfSpaceKernel::new(dimension, eta)?.eval(x)
}

/// Spec-level convenience: analytic gradient of ρ̂ᵈ_η.
pub fn kernel_gradient(x: &[f64], eta: f64, dimension: usize) -> Result<Vec<f64>> {
    HalfSpaceKernel::new(dimension, eta)?.gradient(x)
}

/// The boundary–space-time kernel ρ̃ᵈ_η(x′, t) = ρ^{(d-1)}_η(x′) · ω_η(-t):
/// symmetric along the boundary, one-sided *forward* in time (as a
/// convolution kernel it samples s ∈ [t, t + η]).
#[derive(Debug, Clone)]
pub struct BoundaryTimeKernel {
    /// Dimension d of the bulk domain; the kernel has d-1 tangential axes.
    pub dimension: usize,
    pub scale: f64,
    pub tangential: Kernel1D,
    pub temporal: Kernel1D,
}

impl BoundaryTimeKernel {
    pub fn new(dimension: usize, scale: f64) -> Result<Self> {
        if dimension < 1 {
            return Err(Error::InvalidParameter(format!(
                "kernel dimension must be >= 1, got {dimension}"
            )));
        }
        Ok(BoundaryTimeKernel {
            dimension,
            scale,
            tangential: Kernel1D::symmetric(scale)?,
            temporal: Kernel1D::one_sided(scale)?,
        })
    }

    /// Kernel value at tangential offset x′ (length d-1) and time offset t.
    pub fn eval(&self, x_prime: &[f64], t: f64) -> Result<f64> {
        if x_prime.len() != self.dimension - 1 {
            return Err(Error::DimensionMismatch(format!(
                "boundary kernel expects {} tangential coordinates, got {}",
                self.dimension - 1,
                x_prime.len()
            )));
        }
        let mut v = self.temporal.eval(-t);
        for &xi in x_prime {
            v *= self.tangential.eval(xi);
        }
        Ok(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    // Frozen oracle constants (50-digit arithmetic, computed independently
    // before this module was written).
    const N_RHO: f64 = 0.443_993_816_168_079_44;
    const C_OMEGA: f64 = 4.504_567_242_087_162;
    const OMEGA_HALF: f64 = 1.657_137_679_738_210_3;
    const M2: f64 = 0.289_528_409_065_949_56;

    #[test]
    fn normalizers_match_frozen_oracles() {
        assert!((*RHO_NORM - 1.0 / N_RHO).abs() < 1e-10);
        assert!((*OMEGA_NORM - C_OMEGA).abs() < 1e-9);
    }

    #[test]
    fn one_sided_midpoint_matches_oracle() {
        let k = Kernel1D::one_sided(1.0).unwrap();
        assert!((k.eval(0.5) - OMEGA_HALF).abs() < 1e-10);
        // and equals C·e^{-1} by the closed form at the midpoint
        assert!((k.eval(0.5) - C_OMEGA * (-1.0f64).exp()).abs() < 1e-10);
    }

    #[test]
    fn moments_match_frozen_oracles() {
        let k = Kernel1D::one_sided(1.0).unwrap();
        assert!((k.moment(0) - 1.0).abs() < 1e-10);
        assert!((k.moment(1) - 0.5).abs() < 1e-10); // symmetry about 1/2
        assert!((k.moment(2) - M2).abs() < 1e-10);
        assert!(k.moment(2) > 0.25 && k.moment(2) < 0.5);
    }

    #[test]
    fn support_is_exact_zero() {
        let s = Kernel1D::symmetric(0.3).unwrap();
        assert_eq!(s.eval(0.3), 0.0);
        assert_eq!(s.eval(-0.31), 0.0);
        assert_eq!(s.eval(2.0), 0.0);
        let o = Kernel1D::one_sided(0.3).unwrap();
        assert_eq!(o.eval(0.0), 0.0);
        assert_eq!(o.eval(0.3), 0.0);
        assert_eq!(o.eval(-1e-300), 0.0);
    }

    #[test]
    fn scaling_covariance_is_exact() {
        let eta = 0.17;
        let k = Kernel1D::symmetric(eta).unwrap();
        let unit = Kernel1D::symmetric(1.0).unwrap();
        for &x in &[0.0, 0.05, -0.11, 0.169] {
            assert_eq!(k.eval(x), unit.eval_ref(x / eta) / eta);
        }
    }

    #[test]
    fn half_space_kernel_d1_is_reflected_one_sided() {
        let k = HalfSpaceKernel::new(1, 0.2).unwrap();
        let o = Kernel1D::one_sided(0.2).unwrap();
        for &x in &[-0.15, -0.05, 0.1, -0.3] {
            assert_eq!(k.eval(&[x]).unwrap(), o.eval(-x));
        }
    }

    #[test]
    fn half_space_kernel_vanishes_on_positive_normal_side() {
        let k = HalfSpaceKernel::new(2, 0.4).unwrap();
        assert_eq!(k.eval(&[0.0, 0.2]).unwrap(), 0.0);
        assert_eq!(k.eval(&[0.0, 0.0]).unwrap(), 0.0); // endpoint value 0
        assert!(k.eval(&[0.0, -0.2]).unwrap() > 0.0);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let k = HalfSpaceKernel::new(2, 0.5).unwrap();
        let pts = [[0.1, -0.2], [-0.3, -0.4], [0.05, -0.45], [0.2, -0.1]];
        let step = 1e-6;
        for p in pts {
            let g = k.gradient(&p).unwrap();
            for i in 0..2 {
                let mut hi = p;
                let mut lo = p;
                hi[i] += step;
                lo[i] -= step;
                let fd = (k.eval(&hi).unwrap() - k.eval(&lo).unwrap()) / (2.0 * step);
                let denom = g[i].abs().max(1.0);
                assert!(
                    (g[i] - fd).abs() / denom < 1e-6,
                    "component {i} at {p:?}: analytic {} vs fd {fd}",
                    g[i]
                );
            }
        }
    }

    #[test]
    fn gradient_zero_outside_support() {
        let k = HalfSpaceKernel::new(2, 0.5).unwrap();
        assert_eq!(k.gradient(&[0.1, 0.3]).unwrap(), vec![0.0, 0.0]);
        assert_eq!(k.gradient(&[0.9, -0.2]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn interior_critical_point_of_one_sided_profile() {
        // ω′(1/2) = 0: the profile peaks at the midpoint.
        let k = Kernel1D::one_sided(1.0).unwrap();
        assert!(k.deriv(0.5).abs() < 1e-12);
        let hs = HalfSpaceKernel::new(1, 1.0).unwrap();
        let g = hs.gradient(&[-0.5]).unwrap();
        assert!(g[0].abs() < 1e-12);
    }

    #[test]
    fn nonpositive_scale_rejected() {
        assert!(Kernel1D::symmetric(0.0).is_err());
        assert!(Kernel1D::one_sided(-0.1).is_err());
        assert!(HalfSpaceKernel::new(0, 1.0).is_err());
        assert!(eval_symmetric(0.1, f64::NAN).is_err());
    }

    #[test]
    fn boundary_time_kernel_samples_future_only() {
        let k = BoundaryTimeKernel::new(2, 0.2).unwrap();
        // As a convolution kernel at offset t - s the value is nonzero only
        // for s - t in (0, η), i.e. eval(x', t - s) with t - s in (-η, 0).
        assert!(k.eval(&[0.0], -0.1).unwrap() > 0.0);
        assert_eq!(k.eval(&[0.0], 0.1).unwrap(), 0.0);
        assert_eq!(k.eval(&[0.0], -0.3).unwrap(), 0.0);
    }
}
