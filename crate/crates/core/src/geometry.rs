//! Axisymmetric radial graphs over S² in geodesic polar coordinates.
//!
//! A hypersurface is stored as its radius `u(θ)` sampled on a cell-centered
//! polar-angle grid. The ambient metric is `dr² + ϑ(r)² σ` with `ϑ = r`
//! (Euclidean) or `ϑ = sinh r` (hyperbolic), and all curvature quantities are
//! computed from the rescaled radial variable `φ = ∫ ds / ϑ(s)`.

use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::curvature::CurvatureFunction;
use crate::error::{Error, Result};

/// Dimension of the hypersurface handled by the axisymmetric solver.
pub const DIM: usize = 2;

/// Smallest admissible number of polar cells.
pub const MIN_CELLS: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Ambient {
    Euclidean,
    Hyperbolic,
}

impl Ambient {
    /// Sectional curvature `K_N` of the ambient space.
    pub fn sectional_curvature(self) -> f64 {
        match self {
            Ambient::Euclidean => 0.0,
            Ambient::Hyperbolic => -1.0,
        }
    }

    /// `(ϑ(r), ϑ'(r))` for `r > 0`.
    pub fn theta_fn(self, r: f64) -> Result<(f64, f64)> {
        if !(r > 0.0) || !r.is_finite() {
            return Err(Error::Domain { what: "radius", value: r });
        }
        Ok((self.warp(r), self.warp_prime(r)))
    }

    #[inline]
    pub(crate) fn warp(self, r: f64) -> f64 {
        match self {
            Ambient::Euclidean => r,
            Ambient::Hyperbolic => r.sinh(),
        }
    }

    #[inline]
    pub(crate) fn warp_prime(self, r: f64) -> f64 {
        match self {
            Ambient::Euclidean => 1.0,
            Ambient::Hyperbolic => r.cosh(),
        }
    }

    /// Curvature `ϑ'/ϑ` of the coordinate slice `{r = const}`.
    pub fn slice_curvature(self, r: f64) -> Result<f64> {
        let (w, wp) = self.theta_fn(r)?;
        Ok(wp / w)
    }

    /// Antiderivative of `1/ϑ`: `ln r` resp. `ln tanh(r/2)`.
    pub(crate) fn warp_primitive(self, r: f64) -> f64 {
        match self {
            Ambient::Euclidean => r.ln(),
            Ambient::Hyperbolic => {
                // ln tanh(r/2) = ln(1 - e^{-r}) - ln(1 + e^{-r}), stable for large r
                let e = (-r).exp();
                (-e).ln_1p() - e.ln_1p()
            }
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Ambient::Euclidean => "euclidean",
            Ambient::Hyperbolic => "hyperbolic",
        }
    }
}

/// Cell-centered grid on the polar angle, `θ_i = (i + 1/2)·π/n`.
#[derive(Debug, Clone, PartialEq)]
pub struct AxisymGrid {
    n_theta: usize,
    d_theta: f64,
    theta: Vec<f64>,
    cot: Vec<f64>,
}

impl AxisymGrid {
    pub fn new(n_theta: usize) -> Result<Self> {
        if n_theta < MIN_CELLS {
            return Err(Error::Precondition(format!("n_theta must be at least {MIN_CELLS}, got {n_theta}")));
        }
        let d_theta = PI / n_theta as f64;
        let theta: Vec<f64> = (0..n_theta).map(|i| (i as f64 + 0.5) * d_theta).collect();
        let cot = theta.iter().map(|t| t.cos() / t.sin()).collect();
        Ok(Self { n_theta, d_theta, theta, cot })
    }

    pub fn n_theta(&self) -> usize {
        self.n_theta
    }

    pub fn d_theta(&self) -> f64 {
        self.d_theta
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub(crate) fn cot(&self) -> &[f64] {
        &self.cot
    }

    /// Samples a profile function at the grid nodes.
    pub fn sample(&self, f: impl Fn(f64) -> f64) -> Vec<f64> {
        self.theta.iter().map(|&t| f(t)).collect()
    }

    /// Central first and second differences with even reflection across both
    /// poles (`u(-θ) = u(θ)`, `u(π + δ) = u(π - δ)`).
    pub fn derivatives(&self, u: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let n = u.len();
        let h = self.d_theta;
        let mut d1 = vec![0.0; n];
        let mut d2 = vec![0.0; n];
        for i in 0..n {
            let left = if i == 0 { u[0] } else { u[i - 1] };
            let right = if i + 1 == n { u[n - 1] } else { u[i + 1] };
            d1[i] = (right - left) / (2.0 * h);
            d2[i] = (right - 2.0 * u[i] + left) / (h * h);
        }
        (d1, d2)
    }
}

/// Radial graph `u(θ)` at flow time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphState {
    pub ambient: Ambient,
    pub t: f64,
    pub grid: Arc<AxisymGrid>,
    pub u: Vec<f64>,
}

impl GraphState {
    pub fn new(ambient: Ambient, t: f64, grid: Arc<AxisymGrid>, u: Vec<f64>) -> Result<Self> {
        if u.len() != grid.n_theta() {
            return Err(Error::Precondition(format!(
                "profile has {} samples, grid has {} cells",
                u.len(),
                grid.n_theta()
            )));
        }
        if let Some(i) = u.iter().position(|x| !(*x > 0.0) || !x.is_finite()) {
            return Err(Error::Domain { what: "radius", value: u[i] });
        }
        Ok(Self { ambient, t, grid, u })
    }

    pub fn u_min(&self) -> f64 {
        self.u.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn u_max(&self) -> f64 {
        self.u.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Reflection `θ → π - θ` about the equator.
    pub fn reflected(&self) -> Self {
        let mut u = self.u.clone();
        u.reverse();
        Self { u, ..self.clone() }
    }
}

/// Default reference radius for `φ`: half the smallest initial radius.
pub fn default_phi_ref(u0: &[f64]) -> f64 {
    0.5 * u0.iter().copied().fold(f64::INFINITY, f64::min)
}

/// `φ = ∫_{r0}^{u} ds/ϑ(s)` at every node.
pub fn phi_from_u(state: &GraphState, r0: f64) -> Result<Vec<f64>> {
    if !(r0 > 0.0) || !(state.u_min() > r0) {
        return Err(Error::Precondition(format!(
            "reference radius {r0} must satisfy 0 < r0 < min u = {}",
            state.u_min()
        )));
    }
    let base = state.ambient.warp_primitive(r0);
    Ok(state.u.iter().map(|&u| state.ambient.warp_primitive(u) - base).collect())
}

/// Discrete `φ'`, computed as `u'/ϑ(u)` from the central difference of `u`.
pub fn phi_gradient(state: &GraphState) -> Vec<f64> {
    let (du, _) = state.grid.derivatives(&state.u);
    du.iter().zip(&state.u).map(|(d, &u)| d / state.ambient.warp(u)).collect()
}

/// `v = sqrt(1 + |Dφ|²)` at every node.
pub fn gradient_v(state: &GraphState) -> Vec<f64> {
    phi_gradient(state).iter().map(|d| (1.0 + d * d).sqrt()).collect()
}

/// Principal curvatures and derived per-node fields of a graph.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvatureField {
    pub v: Vec<f64>,
    /// Smaller principal curvature at each node.
    pub kappa1: Vec<f64>,
    /// Larger principal curvature at each node.
    pub kappa2: Vec<f64>,
    /// Curvature in the meridian (θ) direction.
    pub kappa_meridian: Vec<f64>,
    /// Curvature along the rotation orbits.
    pub kappa_orbit: Vec<f64>,
    /// Speed function `F(κ)`; empty when only the curvatures were requested.
    pub speed: Vec<f64>,
    pub phi: Vec<f64>,
}

impl CurvatureField {
    pub fn len(&self) -> usize {
        self.v.len()
    }

    pub fn is_empty(&self) -> bool {
        self.v.is_empty()
    }

    pub fn kappa_min(&self) -> f64 {
        self.kappa1.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn kappa_max(&self) -> f64 {
        self.kappa2.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Principal curvatures of the graph from
/// `h^i_j = v⁻¹ϑ⁻¹(ϑ'δ^i_j − (σ^{ik} − v⁻²φ^iφ^k)φ_{;kj})`, specialised to
/// axisymmetric data on S². The speed vector is left empty.
pub fn principal_curvatures(state: &GraphState, phi_ref: f64) -> Result<CurvatureField> {
    let grid = &state.grid;
    let ambient = state.ambient;
    let phi = phi_from_u(state, phi_ref)?;
    let (du, ddu) = grid.derivatives(&state.u);
    let n = state.u.len();
    let mut field = CurvatureField {
        v: Vec::with_capacity(n),
        kappa1: Vec::with_capacity(n),
        kappa2: Vec::with_capacity(n),
        kappa_meridian: Vec::with_capacity(n),
        kappa_orbit: Vec::with_capacity(n),
        speed: Vec::new(),
        phi,
    };
    for i in 0..n {
        let u = state.u[i];
        let w = ambient.warp(u);
        let wp = ambient.warp_prime(u);
        let dphi = du[i] / w;
        let ddphi = (ddu[i] * w - wp * du[i] * du[i]) / (w * w);
        let v2 = 1.0 + dphi * dphi;
        let v = v2.sqrt();
        let k_mer = (wp - ddphi / v2) / (v * w);
        let k_orb = (wp - grid.cot()[i] * dphi) / (v * w);
        if !(k_mer.is_finite() && k_orb.is_finite()) {
            return Err(Error::NonFinite { what: "principal curvature", node: i });
        }
        field.v.push(v);
        field.kappa_meridian.push(k_mer);
        field.kappa_orbit.push(k_orb);
        field.kappa1.push(k_mer.min(k_orb));
        field.kappa2.push(k_mer.max(k_orb));
    }
    Ok(field)
}

/// Principal curvatures plus the speed `F` from the given curvature function.
pub fn weingarten_axisym(state: &GraphState, f: &CurvatureFunction, phi_ref: f64) -> Result<CurvatureField> {
    let mut field = principal_curvatures(state, phi_ref)?;
    field.speed = f.eval_field(&field.kappa1, &field.kappa2)?;
    Ok(field)
}
