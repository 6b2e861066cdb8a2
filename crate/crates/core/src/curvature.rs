//! Speed functions `F(κ)` and the calculus of `Φ(r) = -r^{-p}`.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CurvatureKind {
    /// Mean curvature `H = Σκ_i`.
    MeanH,
    /// `n·(H_k/C(n,k))^{1/k}` with `H_k` the k-th elementary symmetric polynomial.
    RootHk(usize),
}

/// Normalized, 1-homogeneous symmetric curvature function on `n` curvatures.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CurvatureFunction {
    kind: CurvatureKind,
    n: usize,
}

impl CurvatureFunction {
    pub fn new(kind: CurvatureKind, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Precondition("dimension must be positive".into()));
        }
        if let CurvatureKind::RootHk(k) = kind {
            if k == 0 || k > n {
                return Err(Error::Precondition(format!("need 1 <= k <= n = {n}, got k = {k}")));
            }
        }
        Ok(Self { kind, n })
    }

    /// Mean curvature on surfaces (n = 2).
    pub fn mean() -> Self {
        Self { kind: CurvatureKind::MeanH, n: 2 }
    }

    pub fn kind(&self) -> CurvatureKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn is_mean(&self) -> bool {
        matches!(self.kind, CurvatureKind::MeanH | CurvatureKind::RootHk(1))
    }

    /// Evaluates `F(κ)`. The mean curvature also accepts curvatures outside
    /// the positive cone as long as their sum is positive.
    pub fn eval(&self, kappa: &[f64]) -> Result<f64> {
        if kappa.len() != self.n {
            return Err(Error::Precondition(format!("expected {} curvatures, got {}", self.n, kappa.len())));
        }
        match self.kind {
            CurvatureKind::MeanH => {
                let h: f64 = kappa.iter().sum();
                if h > 0.0 {
                    Ok(h)
                } else {
                    Err(Error::ConeViolation { node: None })
                }
            }
            CurvatureKind::RootHk(k) => {
                if !in_positive_cone(kappa) {
                    return Err(Error::ConeViolation { node: None });
                }
                let hk = elementary_symmetric(kappa, k);
                let norm = binomial(self.n, k);
                Ok(self.n as f64 * (hk / norm).powf(1.0 / k as f64))
            }
        }
    }

    /// Fieldwise evaluation on surfaces; errors carry the offending node.
    pub fn eval_field(&self, kappa1: &[f64], kappa2: &[f64]) -> Result<Vec<f64>> {
        kappa1
            .iter()
            .zip(kappa2)
            .enumerate()
            .map(|(i, (&a, &b))| {
                self.eval(&[a, b]).map_err(|e| match e {
                    Error::ConeViolation { .. } => Error::ConeViolation { node: Some(i) },
                    other => other,
                })
            })
            .collect()
    }
}

/// `Γ₊ = {κ_i > 0}`.
pub fn in_positive_cone(kappa: &[f64]) -> bool {
    kappa.iter().all(|&k| k > 0.0)
}

/// k-th elementary symmetric polynomial.
pub fn elementary_symmetric(x: &[f64], k: usize) -> f64 {
    let mut e = vec![0.0; k + 1];
    e[0] = 1.0;
    for &xi in x {
        for j in (1..=k).rev() {
            e[j] += e[j - 1] * xi;
        }
    }
    e[k]
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// `Φ(r) = -r^{-p}` together with its first two derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhiCalc {
    p: f64,
}

impl PhiCalc {
    pub fn new(p: f64) -> Result<Self> {
        if !(p > 1.0) || !p.is_finite() {
            return Err(Error::Domain { what: "flow exponent p (need p > 1)", value: p });
        }
        Ok(Self { p })
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    /// `(Φ, Φ', Φ'')` at `r > 0`.
    pub fn eval(&self, r: f64) -> Result<(f64, f64, f64)> {
        if !(r > 0.0) {
            return Err(Error::Domain { what: "speed value", value: r });
        }
        let p = self.p;
        let rp = r.powf(-p);
        Ok((-rp, p * rp / r, -p * (p + 1.0) * rp / (r * r)))
    }
}

/// Convenience wrapper for `PhiCalc::new(p)?.eval(r)`.
pub fn phi_suite(p: f64, r: f64) -> Result<(f64, f64, f64)> {
    PhiCalc::new(p)?.eval(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn root(k: usize, n: usize) -> CurvatureFunction {
        CurvatureFunction::new(CurvatureKind::RootHk(k), n).unwrap()
    }

    #[test]
    fn normalization() {
        assert_eq!(CurvatureFunction::mean().eval(&[1.0, 1.0]).unwrap(), 2.0);
        assert_eq!(root(2, 2).eval(&[1.0, 1.0]).unwrap(), 2.0);
        for n in 2..6 {
            for k in 1..=n {
                let f = root(k, n);
                assert_relative_eq!(f.eval(&vec![1.0; n]).unwrap(), n as f64, max_relative = 1e-15);
            }
        }
    }

    #[test]
    fn homogeneity_example() {
        let h = CurvatureFunction::mean();
        assert_eq!(h.eval(&[2.0, 4.0]).unwrap(), 6.0);
        assert_eq!(h.eval(&[1.0, 2.0]).unwrap(), 3.0);
    }

    #[test]
    fn cone_violations() {
        let h = CurvatureFunction::mean();
        assert!(h.eval(&[-0.5, 1.0]).is_ok());
        assert!(!in_positive_cone(&[-0.5, 1.0]));
        assert!(h.eval(&[-1.5, 1.0]).is_err());
        assert!(root(2, 2).eval(&[-0.5, 1.0]).is_err());
        let err = root(2, 2).eval_field(&[1.0, 1.0, -1.0], &[1.0, 1.0, 2.0]).unwrap_err();
        assert!(matches!(err, Error::ConeViolation { node: Some(2) }));
        assert!(CurvatureFunction::new(CurvatureKind::RootHk(3), 2).is_err());
    }

    #[test]
    fn phi_suite_examples() {
        assert_eq!(phi_suite(2.0, 1.0).unwrap(), (-1.0, 2.0, -6.0));
        assert_eq!(phi_suite(2.0, 2.0).unwrap(), (-0.25, 0.25, -0.375));
        assert!(phi_suite(2.0, 0.0).is_err());
        assert!(phi_suite(1.0, 1.0).is_err());
    }

    proptest! {
        #[test]
        fn euler_identity(p in 1.01f64..6.0, r in 0.01f64..100.0) {
            let (f, fp, _) = phi_suite(p, r).unwrap();
            prop_assert!((fp * r / (-f) - p).abs() < 1e-12 * p);
        }

        #[test]
        fn phi_derivatives_match_finite_differences(p in 1.01f64..5.0, r in 0.2f64..5.0) {
            let calc = PhiCalc::new(p).unwrap();
            let h = 1e-4 * r;
            let (f0, fp, fpp) = calc.eval(r).unwrap();
            let fm = calc.eval(r - h).unwrap();
            let fpl = calc.eval(r + h).unwrap();
            let d1 = (fpl.0 - fm.0) / (2.0 * h);
            let d2 = (fpl.0 - 2.0 * f0 + fm.0) / (h * h);
            let d2b = (fpl.1 - fm.1) / (2.0 * h);
            prop_assert!((d1 - fp).abs() <= 1e-6 * fp.abs());
            prop_assert!((d2b - fpp).abs() <= 1e-6 * fpp.abs());
            prop_assert!((d2 - fpp).abs() <= 1e-5 * fpp.abs());
            prop_assert!(f0 < 0.0 && fp > 0.0 && fpp < 0.0);
        }

        #[test]
        fn homogeneous_symmetric_monotone(
            a in 0.01f64..10.0, b in 0.01f64..10.0, c in 0.01f64..10.0,
            k in 1usize..=3, li in 0usize..3,
        ) {
            let lambda = [0.5, 2.0, 10.0][li];
            for f in [root(k, 3), CurvatureFunction::new(CurvatureKind::MeanH, 3).unwrap()] {
                let base = f.eval(&[a, b, c]).unwrap();
                let scaled = f.eval(&[lambda * a, lambda * b, lambda * c]).unwrap();
                prop_assert!((scaled - lambda * base).abs() <= 1e-12 * lambda * base);
                let perm = f.eval(&[c, a, b]).unwrap();
                prop_assert!((perm - base).abs() <= 1e-13 * base);
                for i in 0..3 {
                    let mut kp = [a, b, c];
                    kp[i] += 1e-3 * kp[i];
                    prop_assert!(f.eval(&kp).unwrap() > base);
                }
            }
        }
    }
}
