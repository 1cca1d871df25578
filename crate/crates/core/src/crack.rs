//! Crack profiles and crack sets.
//!
//! The crack is the graph-bounded region
//! `Gamma = {(x', x_N, x_{N+1}) : x_N >= g(x'), x_{N+1} = 0}` inside the ball
//! of radius `domain_radius` in R^{N+1}, for a profile `g` with `g(0) = 0`
//! and `grad g(0) = 0`. The straightened (flat) variant replaces `g` by 0.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance for membership in the hyperplane `x_{N+1} = 0`. The crack is
/// measure-zero; mesh conformity carries the real geometric burden.
pub const HYPERPLANE_TOL: f64 = 1e-12;

const MAX_POLY_DEGREE: usize = 4;

/// Admissible crack profile families. All reduce to polynomials with zero
/// constant and linear part, which gives exact derivatives and C^2 regularity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum CrackFamily {
    /// g = 0: the straight crack.
    Flat,
    /// Univariate polynomial `g(t) = sum coeffs[k] t^k` (requires N = 2).
    /// Constant and linear coefficients must vanish; degree at most 4.
    Polynomial { coeffs: Vec<f64> },
    /// `g(x') = c |x'|^2`, any dimension. For c > 0 the complement of the
    /// crack is nowhere star-shaped with respect to the origin.
    RadialQuadratic { c: f64 },
}

/// A crack profile together with the ambient dimension and working radius.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrackSpec {
    #[serde(flatten)]
    pub family: CrackFamily,
    pub dim_n: usize,
    pub domain_radius: f64,
}

/// A point of R^{N+1}, written (x', x_N, x_{N+1}).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub coords: Vec<f64>,
}

impl Point {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::Domain("point has non-finite coordinates".into()));
        }
        Ok(Point { coords })
    }

    pub fn norm(&self) -> f64 {
        self.coords.iter().map(|c| c * c).sum::<f64>().sqrt()
    }
}

/// Local data of the crack boundary at `x'`: the profile value, its gradient,
/// the star-shapedness defect `g - grad g . x'`, and the unit outward normal
/// `(-grad g, 1)/sqrt(1+|grad g|^2)` to the complement of the crack.
#[derive(Debug, Clone, PartialEq)]
pub struct CrackLocalData {
    pub g: f64,
    pub grad_g: Vec<f64>,
    pub star_defect: f64,
    pub normal: Vec<f64>,
}

impl CrackSpec {
    pub fn new(family: CrackFamily, dim_n: usize, domain_radius: f64) -> Result<Self> {
        if dim_n < 2 {
            return Err(Error::UnsupportedDimension(dim_n, "N >= 2 required".into()));
        }
        if !(domain_radius > 0.0) || !domain_radius.is_finite() {
            return Err(Error::Construction("domain_radius must be positive and finite".into()));
        }
        match &family {
            CrackFamily::Flat => {}
            CrackFamily::Polynomial { coeffs } => {
                if dim_n != 2 {
                    return Err(Error::UnsupportedDimension(
                        dim_n,
                        "univariate polynomial profile requires N = 2".into(),
                    ));
                }
                if coeffs.len() > MAX_POLY_DEGREE + 1 {
                    return Err(Error::Construction(format!(
                        "polynomial profile degree {} exceeds {}",
                        coeffs.len().saturating_sub(1),
                        MAX_POLY_DEGREE
                    )));
                }
                if coeffs.iter().any(|c| !c.is_finite()) {
                    return Err(Error::Construction("polynomial coefficients must be finite".into()));
                }
                // g(0) = 0 and g'(0) = 0, exactly.
                if coeffs.first().is_some_and(|&c| c != 0.0) {
                    return Err(Error::Construction("constant coefficient must be exactly zero".into()));
                }
                if coeffs.get(1).is_some_and(|&c| c != 0.0) {
                    return Err(Error::Construction("linear coefficient must be exactly zero".into()));
                }
            }
            CrackFamily::RadialQuadratic { c } => {
                if !c.is_finite() {
                    return Err(Error::Construction("radial quadratic coefficient must be finite".into()));
                }
            }
        }
        Ok(CrackSpec { family, dim_n, domain_radius })
    }

    pub fn flat(dim_n: usize, domain_radius: f64) -> Result<Self> {
        Self::new(CrackFamily::Flat, dim_n, domain_radius)
    }

    pub fn radial_quadratic(c: f64, dim_n: usize, domain_radius: f64) -> Result<Self> {
        Self::new(CrackFamily::RadialQuadratic { c }, dim_n, domain_radius)
    }

    /// Profile value at `x'` (length N-1 slice).
    pub fn g(&self, xp: &[f64]) -> f64 {
        match &self.family {
            CrackFamily::Flat => 0.0,
            CrackFamily::Polynomial { coeffs } => {
                let t = xp[0];
                coeffs.iter().rev().fold(0.0, |acc, &c| acc * t + c)
            }
            CrackFamily::RadialQuadratic { c } => c * xp.iter().map(|t| t * t).sum::<f64>(),
        }
    }

    /// Gradient of the profile at `x'`.
    pub fn grad_g(&self, xp: &[f64]) -> Vec<f64> {
        match &self.family {
            CrackFamily::Flat => vec![0.0; xp.len()],
            CrackFamily::Polynomial { coeffs } => {
                let t = xp[0];
                let mut d = 0.0;
                for (k, &c) in coeffs.iter().enumerate().skip(1) {
                    d += (k as f64) * c * t.powi(k as i32 - 1);
                }
                vec![d]
            }
            CrackFamily::RadialQuadratic { c } => xp.iter().map(|t| 2.0 * c * t).collect(),
        }
    }

    /// Hessian of the profile at `x'`, row-major (N-1)x(N-1).
    pub fn hess_g(&self, xp: &[f64]) -> Vec<Vec<f64>> {
        let d = xp.len();
        match &self.family {
            CrackFamily::Flat => vec![vec![0.0; d]; d],
            CrackFamily::Polynomial { coeffs } => {
                let t = xp[0];
                let mut h = 0.0;
                for (k, &c) in coeffs.iter().enumerate().skip(2) {
                    h += (k * (k - 1)) as f64 * c * t.powi(k as i32 - 2);
                }
                vec![vec![h]]
            }
            CrackFamily::RadialQuadratic { c } => {
                let mut h = vec![vec![0.0; d]; d];
                for (i, row) in h.iter_mut().enumerate() {
                    row[i] = 2.0 * c;
                }
                h
            }
        }
    }
}

/// Profile value, gradient, star-shapedness defect and outward unit normal
/// at a base point `x'` of the crack boundary graph.
pub fn crack_local_data(spec: &CrackSpec, xp: &[f64]) -> Result<CrackLocalData> {
    if xp.len() != spec.dim_n - 1 {
        return Err(Error::Domain(format!(
            "base point has {} coordinates, expected {}",
            xp.len(),
            spec.dim_n - 1
        )));
    }
    let r = xp.iter().map(|t| t * t).sum::<f64>().sqrt();
    if r > spec.domain_radius {
        return Err(Error::Domain(format!(
            "|x'| = {r} exceeds domain radius {}",
            spec.domain_radius
        )));
    }
    let g = spec.g(xp);
    let grad_g = spec.grad_g(xp);
    let dot: f64 = grad_g.iter().zip(xp).map(|(a, b)| a * b).sum();
    let star_defect = g - dot;
    let len = (1.0 + grad_g.iter().map(|t| t * t).sum::<f64>()).sqrt();
    let mut normal: Vec<f64> = grad_g.iter().map(|t| -t / len).collect();
    normal.push(1.0 / len);
    Ok(CrackLocalData { g, grad_g, star_defect, normal })
}

/// Membership of `p` in the closed crack set: the curved crack
/// `{x_N >= g(x'), x_{N+1} = 0}` or, when `straightened` is set, the flat
/// crack `{x_N >= 0, x_{N+1} = 0}`.
pub fn contains_crack(spec: &CrackSpec, p: &Point, straightened: bool) -> bool {
    let n = spec.dim_n;
    if p.coords.len() != n + 1 {
        return false;
    }
    if p.coords[n].abs() > HYPERPLANE_TOL {
        return false;
    }
    let x_n = p.coords[n - 1];
    if straightened {
        x_n >= 0.0
    } else {
        x_n >= spec.g(&p.coords[..n - 1])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quad01() -> CrackSpec {
        CrackSpec::radial_quadratic(0.1, 2, 2.0).unwrap()
    }

    #[test]
    fn flat_crack_local_data_is_trivial() {
        let spec = CrackSpec::flat(2, 0.5).unwrap();
        let d = crack_local_data(&spec, &[0.3]).unwrap();
        assert_eq!(d.g, 0.0);
        assert_eq!(d.grad_g, vec![0.0]);
        assert_eq!(d.star_defect, 0.0);
        assert_eq!(d.normal, vec![0.0, 1.0]);
    }

    #[test]
    fn radial_quadratic_local_data() {
        let spec = quad01();
        let d = crack_local_data(&spec, &[1.0]).unwrap();
        assert!((d.g - 0.1).abs() < 1e-15);
        assert!((d.grad_g[0] - 0.2).abs() < 1e-15);
        // defect = c x'^2 - 2 c x'^2 = -c x'^2
        assert!((d.star_defect + 0.1).abs() < 1e-15);
        let len = 1.04f64.sqrt();
        assert!((d.normal[0] + 0.2 / len).abs() < 1e-15);
        assert!((d.normal[1] - 1.0 / len).abs() < 1e-15);
        let nlen: f64 = d.normal.iter().map(|t| t * t).sum::<f64>().sqrt();
        assert!((nlen - 1.0).abs() < 1e-12);
    }

    #[test]
    fn star_defect_vanishes_at_origin() {
        let d = crack_local_data(&quad01(), &[0.0]).unwrap();
        assert_eq!(d.star_defect, 0.0);
    }

    #[test]
    fn outside_domain_radius_is_rejected() {
        let spec = CrackSpec::radial_quadratic(0.1, 2, 0.5).unwrap();
        assert!(crack_local_data(&spec, &[0.6]).is_err());
    }

    #[test]
    fn construction_rejects_nonzero_low_order() {
        assert!(CrackSpec::new(
            CrackFamily::Polynomial { coeffs: vec![0.1, 0.0, 1.0] },
            2,
            0.5
        )
        .is_err());
        assert!(CrackSpec::new(
            CrackFamily::Polynomial { coeffs: vec![0.0, 0.2, 1.0] },
            2,
            0.5
        )
        .is_err());
        assert!(CrackSpec::new(
            CrackFamily::Polynomial { coeffs: vec![0.0, 0.0, 0.0, 0.0, 0.0, 1.0] },
            2,
            0.5
        )
        .is_err());
    }

    #[test]
    fn crack_membership() {
        let flat = CrackSpec::flat(2, 0.5).unwrap();
        let on = Point::new(vec![0.0, 1.0, 0.0]).unwrap();
        let off = Point::new(vec![0.0, -1.0, 0.0]).unwrap();
        assert!(contains_crack(&flat, &on, false));
        assert!(contains_crack(&flat, &on, true));
        assert!(!contains_crack(&flat, &off, false));

        // below the curved profile: g(1) = 0.1 > 0.05
        let spec = quad01();
        let p = Point::new(vec![1.0, 0.05, 0.0]).unwrap();
        assert!(!contains_crack(&spec, &p, false));
        assert!(contains_crack(&spec, &p, true));
    }

    #[test]
    fn membership_monotone_in_xn() {
        let spec = quad01();
        for xs in [-0.8f64, 0.0, 0.9] {
            let a = spec.g(&[xs]) + 1e-3;
            assert!(contains_crack(&spec, &Point::new(vec![xs, a, 0.0]).unwrap(), false));
            assert!(contains_crack(&spec, &Point::new(vec![xs, a + 1.0, 0.0]).unwrap(), false));
        }
    }

    #[test]
    fn serde_roundtrip() {
        let spec = CrackSpec::new(
            CrackFamily::Polynomial { coeffs: vec![0.0, 0.0, 0.1, 0.0, 0.02] },
            2,
            0.5,
        )
        .unwrap();
        let json = serde_json::to_string(&spec).unwrap();
        let back: CrackSpec = serde_json::from_str(&json).unwrap();
        assert_eq!(spec, back);
        // the serialized object carries the documented fields
        let v: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert_eq!(v["family"], "polynomial");
        assert_eq!(v["dim_n"], 2);
    }
}
