//! Geodesic sphere solutions of the expanding flow.
//!
//! Spheres stay spheres and their radius obeys `ṙ = (n ϑ'(r)/ϑ(r))^{-p}`.
//! In Euclidean space this integrates in closed form and blows up in finite
//! time; in hyperbolic space it is integrated numerically.

use crate::error::{Error, Result};
use crate::geometry::Ambient;

/// Relative local error target of the adaptive hyperbolic integrator.
const ODE_TOL: f64 = 1e-13;

/// Blow-up time `T*(r0) = nᵖ/(p−1)·r0^{1−p}` of a Euclidean sphere.
pub fn euclid_blowup(r0: f64, n: f64, p: f64) -> f64 {
    n.powf(p) / (p - 1.0) * r0.powf(1.0 - p)
}

/// Radius `Θ(t) = ((1−p)/nᵖ·t + r0^{1−p})^{1/(1−p)}` of a Euclidean sphere.
pub fn euclid_radius(r0: f64, n: f64, p: f64, t: f64) -> Result<f64> {
    check_sphere_args(r0, p)?;
    if !(t >= 0.0) {
        return Err(Error::Domain { what: "time", value: t });
    }
    let t_star = euclid_blowup(r0, n, p);
    if t >= t_star {
        return Err(Error::BeyondBlowup { t, t_star });
    }
    let base = (1.0 - p) / n.powf(p) * t + r0.powf(1.0 - p);
    Ok(base.powf(1.0 / (1.0 - p)))
}

/// Radius of a Euclidean sphere whose blow-up time is `t_star`:
/// `Θ(t) = ((p−1)/nᵖ·(T* − t))^{−1/(p−1)}`.
pub fn euclid_radius_from_blowup(t_star: f64, n: f64, p: f64, t: f64) -> Result<f64> {
    if t >= t_star {
        return Err(Error::BeyondBlowup { t, t_star });
    }
    Ok(((p - 1.0) / n.powf(p) * (t_star - t)).powf(-1.0 / (p - 1.0)))
}

fn check_sphere_args(r0: f64, p: f64) -> Result<()> {
    if !(r0 > 0.0) {
        return Err(Error::Domain { what: "initial radius", value: r0 });
    }
    if !(p > 1.0) {
        return Err(Error::Domain { what: "flow exponent p (need p > 1)", value: p });
    }
    Ok(())
}

fn hyperbolic_speed(r: f64, n: f64, p: f64) -> f64 {
    (r.tanh() / n).powf(p)
}

fn rk4(r: f64, h: f64, n: f64, p: f64) -> f64 {
    let k1 = hyperbolic_speed(r, n, p);
    let k2 = hyperbolic_speed(r + 0.5 * h * k1, n, p);
    let k3 = hyperbolic_speed(r + 0.5 * h * k2, n, p);
    let k4 = hyperbolic_speed(r + h * k3, n, p);
    r + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
}

/// Radius of a hyperbolic geodesic sphere at each of the ascending `times`,
/// integrated with step-doubling RK4 and Richardson correction.
pub fn hyperbolic_radius_series(r0: f64, n: f64, p: f64, times: &[f64]) -> Result<Vec<f64>> {
    check_sphere_args(r0, p)?;
    let mut out = Vec::with_capacity(times.len());
    let mut t = 0.0;
    let mut r = r0;
    let mut h: f64 = 1e-3;
    for &target in times {
        if !(target >= t) {
            return Err(Error::Precondition(format!(
                "times must be non-negative and ascending, got {target} after {t}"
            )));
        }
        while t < target {
            let step = h.min(target - t);
            let coarse = rk4(r, step, n, p);
            let half = rk4(rk4(r, 0.5 * step, n, p), 0.5 * step, n, p);
            let err = (half - coarse).abs() / 15.0;
            let scale = ODE_TOL * r.abs().max(1.0);
            if err <= scale {
                r = half + (half - coarse) / 15.0;
                t = if step == target - t { target } else { t + step };
            }
            let factor = if err == 0.0 { 4.0 } else { 0.9 * (scale / err).powf(0.2) };
            // only grow the step from a full (unclipped) one
            if step == h || factor < 1.0 {
                h = step * factor.clamp(0.2, 4.0);
            }
        }
        out.push(r);
    }
    Ok(out)
}

/// Radius of a hyperbolic geodesic sphere at time `t`.
pub fn hyperbolic_radius(r0: f64, n: f64, p: f64, t: f64) -> Result<f64> {
    Ok(hyperbolic_radius_series(r0, n, p, &[t])?[0])
}

/// A geodesic sphere flowing under the expanding flow.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SphereSolution {
    pub ambient: Ambient,
    pub r0: f64,
    pub n: usize,
    pub p: f64,
}

impl SphereSolution {
    pub fn new(ambient: Ambient, r0: f64, n: usize, p: f64) -> Result<Self> {
        check_sphere_args(r0, p)?;
        Ok(Self { ambient, r0, n, p })
    }

    /// Maximal existence time (`None` in hyperbolic space).
    pub fn blowup_time(&self) -> Option<f64> {
        match self.ambient {
            Ambient::Euclidean => Some(euclid_blowup(self.r0, self.n as f64, self.p)),
            Ambient::Hyperbolic => None,
        }
    }

    pub fn radius(&self, t: f64) -> Result<f64> {
        match self.ambient {
            Ambient::Euclidean => euclid_radius(self.r0, self.n as f64, self.p, t),
            Ambient::Hyperbolic => hyperbolic_radius(self.r0, self.n as f64, self.p, t),
        }
    }

    /// Radii at ascending sample times.
    pub fn radii(&self, times: &[f64]) -> Result<Vec<f64>> {
        match self.ambient {
            Ambient::Euclidean => times.iter().map(|&t| self.radius(t)).collect(),
            Ambient::Hyperbolic => hyperbolic_radius_series(self.r0, self.n as f64, self.p, times),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn euclid_examples() {
        assert_eq!(euclid_radius(1.0, 2.0, 2.0, 0.0).unwrap(), 1.0);
        assert_relative_eq!(euclid_radius(1.0, 2.0, 2.0, 2.0).unwrap(), 2.0, max_relative = 1e-14);
        assert_relative_eq!(euclid_radius(1.0, 2.0, 2.0, 3.9).unwrap(), 40.0, max_relative = 1e-12);
        assert_eq!(euclid_blowup(1.0, 2.0, 2.0), 4.0);
        assert_eq!(euclid_blowup(2.0, 2.0, 2.0), 2.0);
        assert!(euclid_blowup(1.0, 2.0, 1.01) > 100.0);
        match euclid_radius(1.0, 2.0, 2.0, 4.0) {
            Err(Error::BeyondBlowup { t_star, .. }) => assert_eq!(t_star, 4.0),
            other => panic!("expected blow-up error, got {other:?}"),
        }
    }

    #[test]
    fn blowup_parametrisation_agrees() {
        for &(r0, p) in &[(1.0, 2.0), (0.7, 1.5), (1.3, 3.0)] {
            let ts = euclid_blowup(r0, 2.0, p);
            for &t in &[0.0, 0.3 * ts, 0.9 * ts] {
                assert_relative_eq!(
                    euclid_radius(r0, 2.0, p, t).unwrap(),
                    euclid_radius_from_blowup(ts, 2.0, p, t).unwrap(),
                    max_relative = 1e-12
                );
            }
        }
    }

    #[test]
    fn closed_form_satisfies_ode() {
        for &(r0, p) in &[(1.0, 2.0), (0.5, 1.5), (2.0, 3.0)] {
            let ts = euclid_blowup(r0, 2.0, p);
            for frac in [0.1, 0.5, 0.8] {
                let t = frac * ts;
                let h = 1e-5 * ts;
                let d = (euclid_radius(r0, 2.0, p, t + h).unwrap()
                    - euclid_radius(r0, 2.0, p, t - h).unwrap())
                    / (2.0 * h);
                let th = euclid_radius(r0, 2.0, p, t).unwrap();
                assert_relative_eq!(d, th.powf(p) / 2f64.powf(p), max_relative = 1e-8);
            }
        }
    }

    #[test]
    fn hyperbolic_large_radius_drifts_at_unit_rate() {
        let r = hyperbolic_radius(12.0, 2.0, 2.0, 8.0).unwrap();
        assert_relative_eq!(r, 12.0 + 8.0 / 4.0, max_relative = 1e-9);
        assert_eq!(hyperbolic_radius(1.0, 2.0, 2.0, 0.0).unwrap(), 1.0);
    }

    #[test]
    fn hyperbolic_series_is_monotone() {
        let ts: Vec<f64> = (0..=40).map(f64::from).collect();
        let rs = hyperbolic_radius_series(1.0, 2.0, 2.0, &ts).unwrap();
        assert!(rs.windows(2).all(|w| w[1] > w[0]));
        let drift: Vec<f64> = rs.iter().zip(&ts).map(|(r, t)| r - t / 4.0).collect();
        // the speed tanh²r/4 stays below 1/4, so r - t/4 decreases to its limit
        assert!(drift.windows(2).all(|w| w[1] <= w[0] + 1e-12));
        assert!(drift[20] - drift.last().unwrap() < 1e-3);
        assert!(hyperbolic_radius_series(1.0, 2.0, 2.0, &[2.0, 1.0]).is_err());
    }

    #[test]
    fn sphere_solution_bracketing() {
        for amb in [Ambient::Euclidean, Ambient::Hyperbolic] {
            let a = SphereSolution::new(amb, 0.9, 2, 2.0).unwrap();
            let b = SphereSolution::new(amb, 1.1, 2, 2.0).unwrap();
            let t_max = b.blowup_time().unwrap_or(30.0) * 0.99;
            let ts: Vec<f64> = (0..50).map(|i| t_max * i as f64 / 49.0).collect();
            let ra = a.radii(&ts).unwrap();
            let rb = b.radii(&ts).unwrap();
            assert!(ra.iter().zip(&rb).all(|(x, y)| x < y));
        }
    }
}
