//! Monitored quantities along a flow: pinching, convexity, rescaled
//! curvatures, Hausdorff distance to the best-fit sphere and decay fits.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{principal_curvatures, Ambient, CurvatureField, GraphState};

/// Points whose distance underflows this are dropped from exponent fits.
pub const DIST_FLOOR: f64 = 1e-13;

/// Fraction of the time span treated as transient by default decay fits.
pub const TRANSIENT_FRACTION: f64 = 0.2;

/// Pinching constant `c0` and the derived `γ = 1/n + c0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PinchingConfig {
    pub c0: f64,
    pub gamma: f64,
}

impl PinchingConfig {
    pub fn new(c0: f64, n: usize) -> Result<Self> {
        let n = n as f64;
        let bound = 1.0 / (n * (n - 1.0));
        if !(c0 > 0.0 && c0 < bound) {
            return Err(Error::Domain { what: "pinching constant c0", value: c0 });
        }
        Ok(Self { c0, gamma: 1.0 / n + c0 })
    }
}

/// `z = ‖b‖² − γB²` at one node, with `b` eigenvalues `κ_i + K_N`.
pub fn pinching_at(k1: f64, k2: f64, ambient: Ambient, cfg: &PinchingConfig) -> (f64, f64) {
    let kn = ambient.sectional_curvature();
    let (b1, b2) = (k1 + kn, k2 + kn);
    let trace = b1 + b2;
    (b1 * b1 + b2 * b2 - cfg.gamma * trace * trace, trace)
}

/// Maximum of `z` and minimum of `B` over the field.
pub fn pinching_z(field: &CurvatureField, ambient: Ambient, cfg: &PinchingConfig) -> (f64, f64) {
    field
        .kappa1
        .iter()
        .zip(&field.kappa2)
        .map(|(&a, &b)| pinching_at(a, b, ambient, cfg))
        .fold((f64::NEG_INFINITY, f64::INFINITY), |(zm, bm), (z, b)| (zm.max(z), bm.min(b)))
}

/// Convexity in Euclidean space, horospherical convexity (`κ > 1`) in
/// hyperbolic space.
pub fn convexity_threshold(ambient: Ambient) -> f64 {
    -ambient.sectional_curvature()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PinchingCheck {
    pub passed: bool,
    pub z_max: f64,
    pub kappa_min: f64,
    /// Node with the largest `z`.
    pub worst_node: usize,
}

/// Checks the initial pinching condition and the (horo)convexity it implies.
pub fn validate_initial_pinching(
    state: &GraphState,
    phi_ref: f64,
    cfg: &PinchingConfig,
) -> Result<PinchingCheck> {
    let field = principal_curvatures(state, phi_ref)?;
    let (mut worst_node, mut z_max) = (0, f64::NEG_INFINITY);
    for i in 0..field.len() {
        let (z, _) = pinching_at(field.kappa1[i], field.kappa2[i], state.ambient, cfg);
        if z > z_max {
            z_max = z;
            worst_node = i;
        }
    }
    let kappa_min = field.kappa_min();
    let passed = z_max < 0.0 && kappa_min > convexity_threshold(state.ambient);
    Ok(PinchingCheck { passed, z_max, kappa_min, worst_node })
}

/// Best-fit sphere of an axisymmetric graph.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SphereFit {
    /// Centre offset along the symmetry axis.
    pub center_offset: f64,
    pub radius: f64,
    /// Sup-deviation of the radial distance, i.e. the Hausdorff distance for
    /// star-shaped sets about the fitted centre.
    pub dist: f64,
}

/// Radial spread `(max, min)` of the embedded profile about `(0, d)`, or
/// `None` when the curve is not star-shaped about that centre.
fn radial_extent(state: &GraphState, d: f64) -> Option<(f64, f64)> {
    let mut prev_angle = f64::NEG_INFINITY;
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for (&u, &t) in state.u.iter().zip(state.grid.theta()) {
        let x = u * t.sin();
        let z = u * t.cos() - d;
        let angle = x.atan2(z);
        if angle <= prev_angle {
            return None;
        }
        prev_angle = angle;
        let r = x.hypot(z);
        lo = lo.min(r);
        hi = hi.max(r);
    }
    Some((hi, lo))
}

fn spread(state: &GraphState, d: f64) -> f64 {
    radial_extent(state, d).map_or(f64::INFINITY, |(hi, lo)| hi - lo)
}

/// Fits the sphere minimising the sup-deviation of radial distance.
///
/// Euclidean graphs search the centre along the axis with a coarse scan
/// followed by golden-section refinement; hyperbolic graphs use the
/// coordinate origin as centre.
pub fn best_fit_sphere_axisym(state: &GraphState) -> SphereFit {
    let (hi, lo) = (state.u_max(), state.u_min());
    if state.ambient == Ambient::Hyperbolic {
        return SphereFit { center_offset: 0.0, radius: 0.5 * (hi + lo), dist: 0.5 * (hi - lo) };
    }
    const SCAN: usize = 64;
    let reach = 0.9 * lo;
    let grid_d = |i: usize| -reach + 2.0 * reach * i as f64 / SCAN as f64;
    let best = (0..=SCAN).map(|i| (i, spread(state, grid_d(i)))).fold((SCAN / 2, f64::INFINITY), |acc, x| {
        if x.1 < acc.1 {
            x
        } else {
            acc
        }
    });
    let mut a = grid_d(best.0.saturating_sub(1));
    let mut b = grid_d((best.0 + 1).min(SCAN));
    let ratio = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - ratio * (b - a);
    let mut e = a + ratio * (b - a);
    let (mut fc, mut fe) = (spread(state, c), spread(state, e));
    let tol = 1e-14 * hi;
    while b - a > tol {
        if fc <= fe {
            b = e;
            e = c;
            fe = fc;
            c = b - ratio * (b - a);
            fc = spread(state, c);
        } else {
            a = c;
            c = e;
            fc = fe;
            e = a + ratio * (b - a);
            fe = spread(state, e);
        }
    }
    let mut d = 0.5 * (a + b);
    if spread(state, d) > best.1 {
        d = grid_d(best.0);
    }
    match radial_extent(state, d) {
        Some((hi, lo)) => SphereFit { center_offset: d, radius: 0.5 * (hi + lo), dist: 0.5 * (hi - lo) },
        None => SphereFit { center_offset: 0.0, radius: 0.5 * (hi + lo), dist: 0.5 * (hi - lo) },
    }
}

/// Least-squares line `y = a + b x`, returned as `(a, b)`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<(f64, f64)> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::Fit(format!("need at least two paired samples, got {}", x.len())));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    if !(sxx > 0.0) {
        return Err(Error::Fit("abscissae are degenerate".into()));
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    Ok((my - slope * mx, slope))
}

/// Exponential decay rate: the negated slope of `ln y` against `t` over the
/// samples with `t` in `window`.
pub fn fit_decay_rate(samples: &[(f64, f64)], window: (f64, f64)) -> Result<f64> {
    let picked: Vec<(f64, f64)> =
        samples.iter().copied().filter(|(t, _)| *t >= window.0 && *t <= window.1).collect();
    if picked.len() < 10 {
        return Err(Error::Fit(format!("window holds {} samples, need at least 10", picked.len())));
    }
    if let Some((t, y)) = picked.iter().find(|(_, y)| !(*y > 0.0)) {
        return Err(Error::Fit(format!("non-positive value {y} at t = {t}")));
    }
    let t: Vec<f64> = picked.iter().map(|s| s.0).collect();
    let ly: Vec<f64> = picked.iter().map(|s| s.1.ln()).collect();
    Ok(-linear_fit(&t, &ly)?.1)
}

/// Default decay-fit window: the time span after the initial transient.
pub fn default_window(samples: &[(f64, f64)]) -> (f64, f64) {
    let t0 = samples.first().map_or(0.0, |s| s.0);
    let t1 = samples.last().map_or(0.0, |s| s.0);
    (t0 + TRANSIENT_FRACTION * (t1 - t0), t1)
}

/// Slope of `ln dist` against `ln Θ` over the final decade of `Θ`.
pub fn hausdorff_decay_exponent(samples: &[(f64, f64)]) -> Result<f64> {
    let theta_end = samples.iter().map(|s| s.0).fold(f64::NEG_INFINITY, f64::max);
    if !(theta_end > 0.0) {
        return Err(Error::Fit("reference radius must be positive".into()));
    }
    let from = theta_end / 10.0;
    let mut x = Vec::new();
    let mut y = Vec::new();
    for &(theta, dist) in samples {
        if theta < from {
            continue;
        }
        if dist < DIST_FLOOR {
            break;
        }
        x.push(theta.ln());
        y.push(dist.ln());
    }
    if x.len() < 10 {
        return Err(Error::Fit(format!("final decade holds {} usable samples, need 10", x.len())));
    }
    Ok(linear_fit(&x, &y)?.1)
}

/// One row of the diagnostic time series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsRecord {
    pub t: f64,
    pub dt: f64,
    pub u_min: f64,
    pub u_max: f64,
    pub osc: f64,
    pub v_max: f64,
    pub kappa_min: f64,
    pub kappa_max: f64,
    pub f_min: f64,
    pub f_max: f64,
    pub z_max: f64,
    pub b_min: f64,
    pub chi_max: f64,
    pub theta_ref: f64,
    pub u_tilde_min: f64,
    pub u_tilde_max: f64,
    pub kt_min: f64,
    pub kt_max: f64,
    pub dist_sphere: f64,
}

impl DiagnosticsRecord {
    /// Column names, in serialization order.
    pub const COLUMNS: [&'static str; 19] = [
        "t",
        "dt",
        "u_min",
        "u_max",
        "osc",
        "v_max",
        "kappa_min",
        "kappa_max",
        "F_min",
        "F_max",
        "z_max",
        "B_min",
        "chi_max",
        "theta_ref",
        "u_tilde_min",
        "u_tilde_max",
        "kt_min",
        "kt_max",
        "dist_sphere",
    ];

    /// Builds a record from a state and its curvature field. The reference
    /// radius and rescaled columns are filled later by [`Self::rescale`].
    pub fn observe(state: &GraphState, field: &CurvatureField, dt: f64, pinch: &PinchingConfig) -> Self {
        let (u_min, u_max) = (state.u_min(), state.u_max());
        let (z_max, b_min) = pinching_z(field, state.ambient, pinch);
        let fold_max = |v: &[f64]| v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let fold_min = |v: &[f64]| v.iter().copied().fold(f64::INFINITY, f64::min);
        let chi_max = field
            .v
            .iter()
            .zip(&state.u)
            .map(|(v, &u)| v / state.ambient.warp(u))
            .fold(f64::NEG_INFINITY, f64::max);
        Self {
            t: state.t,
            dt,
            u_min,
            u_max,
            osc: u_max - u_min,
            v_max: fold_max(&field.v),
            kappa_min: field.kappa_min(),
            kappa_max: field.kappa_max(),
            f_min: fold_min(&field.speed),
            f_max: fold_max(&field.speed),
            z_max,
            b_min,
            chi_max,
            theta_ref: f64::NAN,
            u_tilde_min: f64::NAN,
            u_tilde_max: f64::NAN,
            kt_min: f64::NAN,
            kt_max: f64::NAN,
            dist_sphere: best_fit_sphere_axisym(state).dist,
        }
    }

    /// Fills the reference radius and the rescaled columns. Euclidean
    /// curvatures are rescaled by the reference radius, hyperbolic ones are
    /// reported as is.
    pub fn rescale(&mut self, theta_ref: f64, ambient: Ambient) {
        self.theta_ref = theta_ref;
        self.u_tilde_min = self.u_min / theta_ref;
        self.u_tilde_max = self.u_max / theta_ref;
        let scale = match ambient {
            Ambient::Euclidean => theta_ref,
            Ambient::Hyperbolic => 1.0,
        };
        self.kt_min = scale * self.kappa_min;
        self.kt_max = scale * self.kappa_max;
    }

    pub fn values(&self) -> [f64; 19] {
        [
            self.t,
            self.dt,
            self.u_min,
            self.u_max,
            self.osc,
            self.v_max,
            self.kappa_min,
            self.kappa_max,
            self.f_min,
            self.f_max,
            self.z_max,
            self.b_min,
            self.chi_max,
            self.theta_ref,
            self.u_tilde_min,
            self.u_tilde_max,
            self.kt_min,
            self.kt_max,
            self.dist_sphere,
        ]
    }

    pub fn from_values(v: [f64; 19]) -> Self {
        Self {
            t: v[0],
            dt: v[1],
            u_min: v[2],
            u_max: v[3],
            osc: v[4],
            v_max: v[5],
            kappa_min: v[6],
            kappa_max: v[7],
            f_min: v[8],
            f_max: v[9],
            z_max: v[10],
            b_min: v[11],
            chi_max: v[12],
            theta_ref: v[13],
            u_tilde_min: v[14],
            u_tilde_max: v[15],
            kt_min: v[16],
            kt_max: v[17],
            dist_sphere: v[18],
        }
    }

    /// `max |κ_i − 1|`, the hyperbolic convergence measure.
    pub fn kappa_deviation(&self) -> f64 {
        (self.kappa_max - 1.0).abs().max((self.kappa_min - 1.0).abs())
    }
}

/// Exponents fitted to a run's diagnostic series. Fits that are not
/// applicable to the ambient, or that lack data, are `None`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct FittedExponents {
    pub lambda_curv: Option<f64>,
    pub lambda_grad: Option<f64>,
    pub hausdorff_slope: Option<f64>,
}

impl FittedExponents {
    pub fn from_records(records: &[DiagnosticsRecord], ambient: Ambient) -> Self {
        match ambient {
            Ambient::Euclidean => {
                let samples: Vec<(f64, f64)> = records
                    .iter()
                    .filter(|r| r.theta_ref.is_finite())
                    .map(|r| (r.theta_ref, r.dist_sphere))
                    .collect();
                Self { hausdorff_slope: hausdorff_decay_exponent(&samples).ok(), ..Self::default() }
            }
            Ambient::Hyperbolic => {
                let curv: Vec<(f64, f64)> = records.iter().map(|r| (r.t, r.kappa_deviation())).collect();
                let grad: Vec<(f64, f64)> = records.iter().map(|r| (r.t, r.v_max - 1.0)).collect();
                let window = default_window(&curv);
                Self {
                    lambda_curv: fit_decay_rate(&curv, window).ok(),
                    lambda_grad: fit_decay_rate(&grad, window).ok(),
                    hausdorff_slope: None,
                }
            }
        }
    }
}

/// Whether a positive series trends monotonically (in log scale) towards 0 or
/// ∞: true when the least-squares slope of `ln y` against record index
/// exceeds `tol` in magnitude and the series' end differs from its start by
/// more than `ratio`.
pub fn has_monotone_trend(y: &[f64], tol: f64, ratio: f64) -> bool {
    if y.len() < 3 || y.iter().any(|v| !(*v > 0.0)) {
        return false;
    }
    let x: Vec<f64> = (0..y.len()).map(|i| i as f64 / (y.len() - 1) as f64).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let slope = linear_fit(&x, &ly).map_or(0.0, |f| f.1);
    let span = (ly[ly.len() - 1] - ly[0]).abs();
    slope.abs() > tol && span > ratio.ln()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::AxisymGrid;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::sync::Arc;

    fn pc(c0: f64) -> PinchingConfig {
        PinchingConfig::new(c0, 2).unwrap()
    }

    fn state(ambient: Ambient, n: usize, f: impl Fn(f64) -> f64) -> GraphState {
        let g = Arc::new(AxisymGrid::new(n).unwrap());
        let u = g.sample(f);
        GraphState::new(ambient, 0.0, g, u).unwrap()
    }

    #[test]
    fn pinching_config_range() {
        assert!(PinchingConfig::new(0.0, 2).is_err());
        assert!(PinchingConfig::new(0.5, 2).is_err());
        assert!(PinchingConfig::new(0.6, 2).is_err());
        assert_relative_eq!(pc(0.1).gamma, 0.6);
    }

    #[test]
    fn pinching_examples() {
        let cfg = pc(0.1);
        let c = 1.7;
        let (z, b) = pinching_at(c, c, Ambient::Euclidean, &cfg);
        assert_relative_eq!(z, (2.0 - 4.0 * cfg.gamma) * c * c, max_relative = 1e-14);
        assert_relative_eq!(b, 2.0 * c);
        let coth = 1.0 / 0.7f64.tanh();
        let (z, _) = pinching_at(coth, coth, Ambient::Hyperbolic, &cfg);
        assert_relative_eq!(z, (2.0 - 4.0 * cfg.gamma) * (coth - 1.0).powi(2), max_relative = 1e-12);
        assert!(z < 0.0);
        // ‖A‖² − H²/2 = 5 − 4.5 = 0.5, then z = 0.5 − 0.1·9
        let (z, _) = pinching_at(1.0, 2.0, Ambient::Euclidean, &cfg);
        assert_relative_eq!(z, -0.4, max_relative = 1e-14);
    }

    #[test]
    fn initial_pinching_validation() {
        let sphere = state(Ambient::Euclidean, 64, |_| 1.0);
        for c0 in [0.01, 0.1, 0.49] {
            assert!(validate_initial_pinching(&sphere, 0.5, &pc(c0)).unwrap().passed);
        }
        let rough = state(Ambient::Euclidean, 64, |t| 1.0 + 0.5 * (4.0 * t).cos());
        let check = validate_initial_pinching(&rough, 0.25, &pc(0.01)).unwrap();
        assert!(!check.passed);
        assert!(check.z_max > 0.0);
        let small = state(Ambient::Hyperbolic, 32, |_| 0.1);
        assert!(validate_initial_pinching(&small, 0.05, &pc(0.1)).unwrap().passed);
    }

    #[test]
    fn best_fit_examples() {
        let s = state(Ambient::Euclidean, 64, |_| 1.3);
        let fit = best_fit_sphere_axisym(&s);
        assert!(fit.center_offset.abs() < 1e-12);
        assert_relative_eq!(fit.radius, 1.3, max_relative = 1e-14);
        assert!(fit.dist < 1e-14);

        let d = 0.3;
        let s = state(Ambient::Euclidean, 64, move |t| d * t.cos() + (1.0 - d * d * t.sin().powi(2)).sqrt());
        let fit = best_fit_sphere_axisym(&s);
        assert!((fit.center_offset - 0.3).abs() < 1e-8, "{fit:?}");
        assert!((fit.radius - 1.0).abs() < 1e-8);
        assert!(fit.dist <= 1e-8);

        let s = state(Ambient::Euclidean, 64, |t| 1.0 + 0.05 * (2.0 * t).cos());
        let fit = best_fit_sphere_axisym(&s);
        // even profile: centred fit, spread of 1 ± 0.05 cos 2θ sampled off the poles
        let h = std::f64::consts::PI / 64.0;
        assert!(fit.center_offset.abs() < 1e-9);
        assert_relative_eq!(fit.dist, 0.05 * (h).cos(), max_relative = 1e-9);
    }

    #[test]
    fn decay_fit_examples() {
        let s: Vec<(f64, f64)> = (0..=20).map(|i| (i as f64, 3.0 * (-0.5 * i as f64).exp())).collect();
        assert_relative_eq!(fit_decay_rate(&s, (0.0, 20.0)).unwrap(), 0.5, epsilon = 1e-10);
        let s: Vec<(f64, f64)> = (0..=300)
            .map(|i| {
                let t = i as f64 * 0.1;
                (t, (-t).exp() * (2.0 + t.cos()))
            })
            .collect();
        assert!((fit_decay_rate(&s, (5.0, 30.0)).unwrap() - 1.0).abs() < 0.05);
        let s: Vec<(f64, f64)> = (0..20).map(|i| (i as f64, 4.0)).collect();
        assert_eq!(fit_decay_rate(&s, (0.0, 20.0)).unwrap(), 0.0);
        let mut bad = s.clone();
        bad[5].1 = 0.0;
        assert!(fit_decay_rate(&bad, (0.0, 20.0)).is_err());
        assert!(fit_decay_rate(&s[..5], (0.0, 20.0)).is_err());
    }

    #[test]
    fn hausdorff_exponent_examples() {
        let thetas: Vec<f64> = (0..=100).map(|i| 10f64.powf(i as f64 / 50.0)).collect();
        for &a in &[1.0, 1.3] {
            let s: Vec<(f64, f64)> = thetas.iter().map(|&r| (r, r.powf(-a))).collect();
            assert_relative_eq!(hausdorff_decay_exponent(&s).unwrap(), -a, epsilon = 1e-12);
        }
        // samples below the floor truncate the window
        let s: Vec<(f64, f64)> = thetas.iter().map(|&r| (r, 1e-12 * r.powf(-2.0))).collect();
        assert!(hausdorff_decay_exponent(&s).is_err());
    }

    #[test]
    fn trend_detection() {
        let flat: Vec<f64> = (0..50).map(|i| 1.0 + 0.1 * (i as f64).sin()).collect();
        assert!(!has_monotone_trend(&flat, 0.5, 2.0));
        let decaying: Vec<f64> = (0..50).map(|i| (-0.2 * i as f64).exp()).collect();
        assert!(has_monotone_trend(&decaying, 0.5, 2.0));
    }

    proptest! {
        #[test]
        fn negative_z_forces_convexity(
            a in -3.0f64..6.0, b in -3.0f64..6.0, c0 in 0.001f64..0.499, hyperbolic in any::<bool>(),
        ) {
            let ambient = if hyperbolic { Ambient::Hyperbolic } else { Ambient::Euclidean };
            let (z, _) = pinching_at(a, b, ambient, &pc(c0));
            if z < 0.0 {
                let thr = convexity_threshold(ambient);
                // z < 0 forces both b-eigenvalues to share the sign of their trace;
                // the trace itself can be negative only for concave pairs
                prop_assert!((a - thr) * (b - thr) > 0.0);
            }
        }

        #[test]
        fn z_sign_is_scale_invariant(a in 0.01f64..5.0, b in 0.01f64..5.0, lambda in 0.01f64..100.0) {
            let cfg = pc(0.1);
            let (z, _) = pinching_at(a, b, Ambient::Euclidean, &cfg);
            let (zs, _) = pinching_at(lambda * a, lambda * b, Ambient::Euclidean, &cfg);
            prop_assert!((zs - lambda * lambda * z).abs() <= 1e-12 * lambda * lambda * (a + b).powi(2));
            prop_assert_eq!(z < 0.0, zs < 0.0);
        }
    }
}
