//! Instant loss of convexity under `ẋ = H^{-p}ν`, `p > 1`.
//!
//! The quartic Monge patch
//! `u(ξ) = c1/24·ξ₁⁴ + ½(a2 + b2ξ₁ + ½c2ξ₁²)ξ₂²` with `c1 = 1/4`,
//! `c2 = 2b2²/a2 + 1/4` is weakly convex with `h₁₁(0) = 0` and `H(0) = a2`.
//! Its `h₁₁` at the origin starts to move with slope
//! `p·a2^{-(p+2)}·(a2/2 + (1−p)b2²)`, negative once `b2² > a2/(2(p−1))`.
//! The slope is evaluated three ways: closed form, from the evolution of the
//! Weingarten map with exact or finite-difference derivatives, and by
//! integrating the graph flow on a small square.

use crate::curvature::PhiCalc;
use crate::error::{Error, Result};

/// Tolerance at which the two derivative backends must agree.
pub const BACKEND_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuarticPatch {
    pub a2: f64,
    pub b2: f64,
    pub c1: f64,
    pub c2: f64,
}

impl QuarticPatch {
    pub fn new(a2: f64, b2: f64) -> Result<Self> {
        if !(a2 > 0.0) {
            return Err(Error::Domain { what: "a2", value: a2 });
        }
        if !(b2 > 0.0) {
            return Err(Error::Domain { what: "b2", value: b2 });
        }
        Ok(Self { a2, b2, c1: 0.25, c2: 2.0 * b2 * b2 / a2 + 0.25 })
    }

    pub fn value(&self, x: f64, y: f64) -> f64 {
        self.partial(x, y, 0, 0)
    }

    /// `∂₁^i ∂₂^j u` at `(x, y)`, by exact polynomial differentiation.
    pub fn partial(&self, x: f64, y: f64, i: usize, j: usize) -> f64 {
        // u = A(x) + ½B(x)y², A = c1/24·x⁴, B = a2 + b2x + ½c2x²
        let a = match i {
            0 => self.c1 / 24.0 * x.powi(4),
            1 => self.c1 / 6.0 * x.powi(3),
            2 => self.c1 / 2.0 * x * x,
            3 => self.c1 * x,
            4 => self.c1,
            _ => 0.0,
        };
        let b = match i {
            0 => self.a2 + self.b2 * x + 0.5 * self.c2 * x * x,
            1 => self.b2 + self.c2 * x,
            2 => self.c2,
            _ => 0.0,
        };
        let y_part = match j {
            0 => y * y,
            1 => 2.0 * y,
            2 => 2.0,
            _ => 0.0,
        };
        let a_part = if j == 0 { a } else { 0.0 };
        a_part + 0.5 * b * y_part
    }

    /// Whether the Hessian is positive semidefinite at every node of `grid`.
    pub fn hessian_psd_on(&self, grid: &PatchGrid) -> bool {
        let tol = 1e-14;
        grid.nodes().all(|(x, y)| {
            let uxx = self.partial(x, y, 2, 0);
            let uyy = self.partial(x, y, 0, 2);
            let uxy = self.partial(x, y, 1, 1);
            uxx >= -tol && uyy >= -tol && uxx * uyy - uxy * uxy >= -tol
        })
    }
}

/// Uniform `m × m` grid on `[−L, L]²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PatchGrid {
    pub half_width: f64,
    pub m: usize,
}

impl Default for PatchGrid {
    fn default() -> Self {
        Self { half_width: 0.25, m: 129 }
    }
}

impl PatchGrid {
    pub fn new(half_width: f64, m: usize) -> Result<Self> {
        if !(half_width > 0.0) {
            return Err(Error::Domain { what: "patch half width", value: half_width });
        }
        if m < 9 || m.is_multiple_of(2) {
            return Err(Error::Precondition(format!("patch grid needs an odd m >= 9, got {m}")));
        }
        Ok(Self { half_width, m })
    }

    /// Largest `L = 0.25·0.8^j` on which the patch Hessian is positive
    /// semidefinite at every node.
    pub fn fitted(patch: &QuarticPatch, m: usize) -> Result<Self> {
        let mut grid = Self::new(0.25, m)?;
        while !patch.hessian_psd_on(&grid) {
            grid.half_width *= 0.8;
            if grid.half_width < 1e-6 {
                return Err(Error::Precondition(
                    "no square on which the patch Hessian is semidefinite".into(),
                ));
            }
        }
        Ok(grid)
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / (self.m - 1) as f64
    }

    pub fn center(&self) -> usize {
        (self.m - 1) / 2
    }

    pub fn coord(&self, i: usize) -> f64 {
        -self.half_width + i as f64 * self.spacing()
    }

    pub fn nodes(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        (0..self.m).flat_map(move |i| (0..self.m).map(move |j| (self.coord(i), self.coord(j))))
    }

    /// Row-major samples `f(ξ₁ = coord(i), ξ₂ = coord(j))` at index `i·m + j`.
    pub fn sample(&self, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        self.nodes().map(|(x, y)| f(x, y)).collect()
    }
}

/// Fourth-order central stencils for derivative orders 0 to 4, as
/// `(offset, weight)` pairs to be divided by `h^order`.
fn stencil(order: usize) -> &'static [(i64, f64)] {
    match order {
        0 => &[(0, 1.0)],
        1 => &[(-2, 1.0 / 12.0), (-1, -8.0 / 12.0), (1, 8.0 / 12.0), (2, -1.0 / 12.0)],
        2 => &[(-2, -1.0 / 12.0), (-1, 16.0 / 12.0), (0, -30.0 / 12.0), (1, 16.0 / 12.0), (2, -1.0 / 12.0)],
        3 => &[(-3, 1.0 / 8.0), (-2, -1.0), (-1, 13.0 / 8.0), (1, -13.0 / 8.0), (2, 1.0), (3, -1.0 / 8.0)],
        4 => &[
            (-3, -1.0 / 6.0),
            (-2, 2.0),
            (-1, -39.0 / 6.0),
            (0, 56.0 / 6.0),
            (1, -39.0 / 6.0),
            (2, 2.0),
            (3, -1.0 / 6.0),
        ],
        _ => &[],
    }
}

/// Derivatives of `u` at the origin up to fourth order.
#[derive(Debug, Clone, PartialEq)]
pub struct OriginJet {
    d2: [[f64; 2]; 2],
    d3: [[[f64; 2]; 2]; 2],
    d4: [[[[f64; 2]; 2]; 2]; 2],
}

impl OriginJet {
    fn build(partial: impl Fn(usize, usize) -> f64) -> Self {
        // index value 0 ↦ ξ₁, 1 ↦ ξ₂
        let pd = |idx: &[usize]| {
            let j = idx.iter().sum::<usize>();
            partial(idx.len() - j, j)
        };
        let mut jet = Self { d2: [[0.0; 2]; 2], d3: [[[0.0; 2]; 2]; 2], d4: [[[[0.0; 2]; 2]; 2]; 2] };
        for i in 0..2 {
            for j in 0..2 {
                jet.d2[i][j] = pd(&[i, j]);
                for k in 0..2 {
                    jet.d3[i][j][k] = pd(&[i, j, k]);
                    for l in 0..2 {
                        jet.d4[i][j][k][l] = pd(&[i, j, k, l]);
                    }
                }
            }
        }
        jet
    }

    /// Jet by exact differentiation of the polynomial.
    pub fn exact(patch: &QuarticPatch) -> Self {
        Self::build(|i, j| patch.partial(0.0, 0.0, i, j))
    }

    /// Jet by fourth-order finite differences of the patch sampled on `grid`.
    pub fn finite_difference(patch: &QuarticPatch, grid: &PatchGrid) -> Self {
        let values = grid.sample(|x, y| patch.value(x, y));
        let m = grid.m as i64;
        let c = grid.center() as i64;
        let h = grid.spacing();
        Self::build(|i, j| {
            let mut acc = 0.0;
            for &(di, wi) in stencil(i) {
                for &(dj, wj) in stencil(j) {
                    let (a, b) = (c + di, c + dj);
                    debug_assert!(a >= 0 && a < m && b >= 0 && b < m);
                    acc += wi * wj * values[(a * m + b) as usize];
                }
            }
            acc / h.powi((i + j) as i32)
        })
    }

    /// `h_{ij}` at the origin.
    pub fn h(&self, i: usize, j: usize) -> f64 {
        self.d2[i][j]
    }

    /// `h_{ij;k}` at the origin.
    pub fn h_d(&self, i: usize, j: usize, k: usize) -> f64 {
        self.d3[i][j][k]
    }

    /// `h_{ij;kl} = u_{,ijkl} − u_{,ij}u_{,km}u_{,l}{}^m − u_{,ki}u_{,jm}u_{,l}{}^m
    /// − u_{,kj}u_{,im}u_{,l}{}^m` at the origin, where the metric is flat.
    pub fn h_dd(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        let u = &self.d2;
        let mut corr = 0.0;
        for m in 0..2 {
            corr += u[i][j] * u[k][m] * u[l][m] + u[k][i] * u[j][m] * u[l][m] + u[k][j] * u[i][m] * u[l][m];
        }
        self.d4[i][j][k][l] - corr
    }

    fn max_abs_diff(&self, other: &Self) -> (String, f64, f64) {
        let mut worst = (String::new(), 0.0, 0.0);
        let mut worst_err = -1.0;
        let mut check = |name: String, a: f64, b: f64| {
            let err = (a - b).abs() / a.abs().max(1.0);
            if err > worst_err {
                worst_err = err;
                worst = (name, a, b);
            }
        };
        for i in 0..2 {
            for j in 0..2 {
                check(format!("u_{i}{j}"), self.d2[i][j], other.d2[i][j]);
                for k in 0..2 {
                    check(format!("u_{i}{j}{k}"), self.d3[i][j][k], other.d3[i][j][k]);
                    for l in 0..2 {
                        check(format!("u_{i}{j}{k}{l}"), self.d4[i][j][k][l], other.d4[i][j][k][l]);
                    }
                }
            }
        }
        worst
    }

    /// Time derivative of `h^1_1` at the origin from the evolution of the
    /// Weingarten map in flat space with `F = H` and `Φ = −H^{-p}`.
    pub fn h11_dot(&self, p: f64) -> Result<f64> {
        let mean: f64 = self.h(0, 0) + self.h(1, 1);
        let (phi, dphi, ddphi) = PhiCalc::new(p)?.eval(mean)?;
        let (i, j) = (0, 0);
        let laplace: f64 = (0..2).map(|k| self.h_dd(i, j, k, k)).sum();
        let norm_a2: f64 =
            (0..2).flat_map(|a| (0..2).map(move |b| (a, b))).map(|(a, b)| self.h(a, b).powi(2)).sum();
        let square: f64 = (0..2).map(|k| self.h(i, k) * self.h(k, j)).sum();
        let grad_h = |a: usize| -> f64 { (0..2).map(|k| self.h_d(k, k, a)).sum() };
        Ok(dphi * laplace + dphi * norm_a2 * self.h(i, j) - (dphi * mean - phi) * square
            + ddphi * grad_h(j) * grad_h(i))
    }
}

/// Closed-form slope `p·a2^{-(p+2)}·(a2/2 + (1−p)b2²)` of `h₁₁(t, 0)`.
pub fn h11_dot_closed_form(a2: f64, b2: f64, p: f64) -> f64 {
    p * a2.powf(-(p + 2.0)) * (0.5 * a2 + (1.0 - p) * b2 * b2)
}

/// `b2² > a2/(2(p−1))`: the closed-form slope is negative.
pub fn loses_convexity(a2: f64, b2: f64, p: f64) -> bool {
    p > 1.0 && b2 * b2 > a2 / (2.0 * (p - 1.0))
}

/// Slope of `h₁₁` at the origin from the evolution equation, with both
/// derivative backends required to agree.
pub fn h11_dot_numeric(patch: &QuarticPatch, p: f64) -> Result<f64> {
    h11_dot_numeric_on(patch, p, &PatchGrid::default())
}

pub fn h11_dot_numeric_on(patch: &QuarticPatch, p: f64, grid: &PatchGrid) -> Result<f64> {
    let exact = OriginJet::exact(patch);
    let fd = OriginJet::finite_difference(patch, grid);
    let (what, a, b) = exact.max_abs_diff(&fd);
    if (a - b).abs() > BACKEND_TOL * a.abs().max(1.0) {
        return Err(Error::Inconsistent { what, exact: a, numeric: b });
    }
    let slope_exact = exact.h11_dot(p)?;
    let slope_fd = fd.h11_dot(p)?;
    if (slope_exact - slope_fd).abs() > BACKEND_TOL * slope_exact.abs().max(1.0) {
        return Err(Error::Inconsistent { what: "h11 slope".into(), exact: slope_exact, numeric: slope_fd });
    }
    Ok(slope_exact)
}

/// Result of integrating the patch flow.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchFlow {
    /// `(t, h₁₁(t, 0))` after every step, starting at `t = 0`.
    pub series: Vec<(f64, f64)>,
    pub dt: f64,
    /// One-sided second-order difference of the series at `t = 0`.
    pub initial_slope: f64,
}

impl PatchFlow {
    pub fn min_h11(&self) -> f64 {
        self.series.iter().map(|s| s.1).fold(f64::INFINITY, f64::min)
    }

    /// Whether `h₁₁` at the origin drops below zero at some recorded time.
    pub fn crosses_below_zero(&self) -> bool {
        self.series.iter().any(|s| s.1 < 0.0)
    }
}

struct PatchField {
    m: usize,
    h: f64,
}

impl PatchField {
    fn idx(&self, i: usize, j: usize) -> usize {
        i * self.m + j
    }

    /// First and second difference along one axis at index `k` of a line
    /// accessor; one-sided at the ends.
    fn line(&self, k: usize, at: impl Fn(usize) -> f64) -> (f64, f64) {
        let (m, h) = (self.m, self.h);
        if k == 0 {
            let (a, b, c) = (at(0), at(1), at(2));
            ((-3.0 * a + 4.0 * b - c) / (2.0 * h), (a - 2.0 * b + c) / (h * h))
        } else if k == m - 1 {
            let (a, b, c) = (at(m - 1), at(m - 2), at(m - 3));
            ((3.0 * a - 4.0 * b + c) / (2.0 * h), (a - 2.0 * b + c) / (h * h))
        } else {
            let (a, b, c) = (at(k - 1), at(k), at(k + 1));
            ((c - a) / (2.0 * h), (c - 2.0 * b + a) / (h * h))
        }
    }

    /// `(u_x, u_y, u_xx, u_yy, u_xy)` at node `(i, j)`.
    fn jet(&self, u: &[f64], i: usize, j: usize) -> [f64; 5] {
        let (ux, uxx) = self.line(i, |k| u[self.idx(k, j)]);
        let (uy, uyy) = self.line(j, |k| u[self.idx(i, k)]);
        let (uxy, _) = self.line(i, |k| self.line(j, |l| u[self.idx(k, l)]).0);
        [ux, uy, uxx, uyy, uxy]
    }

    fn mean_curvature(jet: [f64; 5]) -> (f64, f64) {
        let [ux, uy, uxx, uyy, uxy] = jet;
        let w2 = 1.0 + ux * ux + uy * uy;
        let w = w2.sqrt();
        let h = ((1.0 + uy * uy) * uxx - 2.0 * ux * uy * uxy + (1.0 + ux * ux) * uyy) / (w2 * w);
        (h, w)
    }

    fn velocity(&self, u: &[f64], p: f64, grid: &PatchGrid) -> Result<Vec<f64>> {
        let mut out = vec![0.0; u.len()];
        for i in 0..self.m {
            for j in 0..self.m {
                let (h, w) = Self::mean_curvature(self.jet(u, i, j));
                if !(h > 0.0) {
                    return Err(Error::Precondition(format!(
                        "mean curvature {h} not positive at ({:.4}, {:.4})",
                        grid.coord(i),
                        grid.coord(j)
                    )));
                }
                out[self.idx(i, j)] = -w * h.powf(-p);
            }
        }
        Ok(out)
    }

    fn h11_origin(&self, u: &[f64]) -> f64 {
        let c = (self.m - 1) / 2;
        let [ux, uy, uxx, ..] = self.jet(u, c, c);
        uxx / (1.0 + ux * ux + uy * uy).sqrt()
    }
}

/// Horizon over which `max |Δu| ≤ 0.01·a2·L²` at the initial speed.
pub fn default_horizon(patch: &QuarticPatch, p: f64, grid: &PatchGrid) -> Result<f64> {
    let field = PatchField { m: grid.m, h: grid.spacing() };
    let u = grid.sample(|x, y| patch.value(x, y));
    let vel = field.velocity(&u, p, grid)?;
    let vmax = vel.iter().map(|v| v.abs()).fold(0.0, f64::max);
    Ok(0.01 * patch.a2 * grid.half_width * grid.half_width / vmax)
}

/// Integrates `∂u/∂t = −sqrt(1+|Du|²)·H^{-p}` on the patch with explicit
/// midpoint steps, recording `h₁₁` at the origin. The outward normal of a
/// convex graph points down, so expansion lowers `u`.
pub fn patch_flow_short_time(
    patch: &QuarticPatch,
    p: f64,
    grid: &PatchGrid,
    t_max: f64,
) -> Result<PatchFlow> {
    PhiCalc::new(p)?;
    if !patch.hessian_psd_on(grid) {
        return Err(Error::Precondition("patch Hessian is not positive semidefinite on the grid".into()));
    }
    if !(t_max > 0.0) {
        return Err(Error::Domain { what: "patch horizon", value: t_max });
    }
    let field = PatchField { m: grid.m, h: grid.spacing() };
    let mut u = grid.sample(|x, y| patch.value(x, y));

    // diffusion coefficient of the linearised operator is at most p·H^{-(p+1)}
    let mut h_min = f64::INFINITY;
    for i in 0..grid.m {
        for j in 0..grid.m {
            h_min = h_min.min(PatchField::mean_curvature(field.jet(&u, i, j)).0);
        }
    }
    if !(h_min > 0.0) {
        return Err(Error::Precondition(format!("mean curvature not positive (min {h_min})")));
    }
    let diffusion = p * h_min.powf(-(p + 1.0));
    let dt_stable = 0.1 * grid.spacing().powi(2) / diffusion;
    let steps = ((t_max / dt_stable).ceil() as usize).max(3);
    let dt = t_max / steps as f64;

    let mut series = Vec::with_capacity(steps + 1);
    series.push((0.0, field.h11_origin(&u)));
    for s in 1..=steps {
        let k1 = field.velocity(&u, p, grid)?;
        let mid: Vec<f64> = u.iter().zip(&k1).map(|(a, b)| a + 0.5 * dt * b).collect();
        let k2 = field.velocity(&mid, p, grid)?;
        for (a, b) in u.iter_mut().zip(&k2) {
            *a += dt * b;
        }
        series.push((s as f64 * dt, field.h11_origin(&u)));
    }
    let initial_slope = (-3.0 * series[0].1 + 4.0 * series[1].1 - series[2].1) / (2.0 * dt);
    Ok(PatchFlow { series, dt, initial_slope })
}
