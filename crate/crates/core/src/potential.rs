//! Potential terms on the right-hand side of the equation.
//!
//! Two admissible classes: a singular radial-power envelope
//! `|f(x)| <= amplitude |x|^{delta-2}` with `delta > 0` (realized exactly as
//! `f(x) = amplitude |x|^{delta-2}`), and globally smooth polynomials in the
//! ambient coordinates, which lie in W^{1,p} for every p.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::Vec3;

/// A trivariate polynomial, stored as (exponent triple, coefficient) terms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct TriPoly {
    pub terms: Vec<([u8; 3], f64)>,
}

impl TriPoly {
    pub fn constant(c: f64) -> Self {
        if c == 0.0 {
            TriPoly::default()
        } else {
            TriPoly { terms: vec![([0, 0, 0], c)] }
        }
    }

    pub fn eval(&self, x: Vec3) -> f64 {
        self.terms
            .iter()
            .map(|(e, c)| c * x[0].powi(e[0] as i32) * x[1].powi(e[1] as i32) * x[2].powi(e[2] as i32))
            .sum()
    }

    pub fn grad(&self, x: Vec3) -> Vec3 {
        let mut g = [0.0; 3];
        for (e, c) in &self.terms {
            for (axis, gi) in g.iter_mut().enumerate() {
                if e[axis] > 0 {
                    let mut t = c * e[axis] as f64;
                    for (k, xk) in x.iter().enumerate() {
                        let p = if k == axis { e[k] - 1 } else { e[k] };
                        t *= xk.powi(p as i32);
                    }
                    *gi += t;
                }
            }
        }
        g
    }

    pub fn is_zero(&self) -> bool {
        self.terms.iter().all(|(_, c)| *c == 0.0)
    }

    pub fn hess(&self, x: Vec3) -> crate::geo::Mat3 {
        let mut h = [[0.0; 3]; 3];
        for (e, c) in &self.terms {
            for a in 0..3 {
                for b in 0..3 {
                    let mut exps = [e[0] as i32, e[1] as i32, e[2] as i32];
                    let factor_a = exps[a];
                    exps[a] -= 1;
                    let factor_b = exps[b];
                    exps[b] -= 1;
                    if factor_a <= 0 || factor_b <= 0 {
                        continue;
                    }
                    let mut t = c * factor_a as f64 * factor_b as f64;
                    for (k, xk) in x.iter().enumerate() {
                        t *= xk.powi(exps[k]);
                    }
                    h[a][b] += t;
                }
            }
        }
        h
    }
}

/// Potential specification: mode (a1) singular envelope or (a2) smooth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum PotentialSpec {
    A1 { delta: f64, amplitude: f64 },
    A2 { poly: TriPoly, p: f64 },
}

impl PotentialSpec {
    /// The identically-zero potential (trivially smooth).
    pub fn zero() -> Self {
        PotentialSpec::A2 { poly: TriPoly::default(), p: 4.0 }
    }

    pub fn a1(delta: f64, amplitude: f64) -> Result<Self> {
        if !(delta > 0.0) {
            return Err(Error::Construction("a1 requires delta > 0".into()));
        }
        Ok(PotentialSpec::A1 { delta, amplitude })
    }

    pub fn a2(poly: TriPoly, p: f64, dim_n: usize) -> Result<Self> {
        let lower = (dim_n as f64 + 1.0) / 2.0;
        if !(p > lower) {
            return Err(Error::Construction(format!("a2 requires p > (N+1)/2 = {lower}")));
        }
        Ok(PotentialSpec::A2 { poly, p })
    }

    pub fn is_zero(&self) -> bool {
        match self {
            PotentialSpec::A1 { amplitude, .. } => *amplitude == 0.0,
            PotentialSpec::A2 { poly, .. } => poly.is_zero(),
        }
    }

    /// Value of f at x. In mode a1, x = 0 is a genuine singularity.
    pub fn eval(&self, x: Vec3) -> Result<f64> {
        match self {
            PotentialSpec::A1 { delta, amplitude } => {
                if *amplitude == 0.0 {
                    return Ok(0.0);
                }
                let r = crate::geo::norm(x);
                if r == 0.0 {
                    return Err(Error::Singularity("a1 potential evaluated at the origin".into()));
                }
                Ok(amplitude * r.powf(delta - 2.0))
            }
            PotentialSpec::A2 { poly, .. } => Ok(poly.eval(x)),
        }
    }

    /// Gradient of f at x, where defined.
    pub fn grad(&self, x: Vec3) -> Result<Vec3> {
        match self {
            PotentialSpec::A1 { delta, amplitude } => {
                if *amplitude == 0.0 {
                    return Ok([0.0; 3]);
                }
                let r = crate::geo::norm(x);
                if r == 0.0 {
                    return Err(Error::Singularity("a1 potential gradient at the origin".into()));
                }
                let s = amplitude * (delta - 2.0) * r.powf(delta - 4.0);
                Ok(crate::geo::scale(x, s))
            }
            PotentialSpec::A2 { poly, .. } => Ok(poly.grad(x)),
        }
    }

    /// The decay exponent of the coercivity lemma: delta in mode a1,
    /// (2p - N - 1)/p in mode a2.
    pub fn coercivity_exponent(&self, dim_n: usize) -> f64 {
        match self {
            PotentialSpec::A1 { delta, .. } => *delta,
            PotentialSpec::A2 { p, .. } => (2.0 * p - dim_n as f64 - 1.0) / p,
        }
    }

    /// eps_bar = min(0, eps - 1), the perturbation rate of the frequency
    /// remainder estimates; always in (-1, 0].
    pub fn eps_bar(&self, dim_n: usize) -> f64 {
        (self.coercivity_exponent(dim_n) - 1.0).min(0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn a1_is_radial_power() {
        let f = PotentialSpec::a1(3.0, 1.0).unwrap();
        // delta = 3 gives f = |x|
        assert!((f.eval([0.3, 0.0, 0.0]).unwrap() - 0.3).abs() < 1e-15);
        assert!(f.eval([0.0; 3]).is_err());
        let g = f.grad([0.0, 0.4, 0.0]).unwrap();
        assert!((g[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn a2_polynomial_gradient() {
        let poly = TriPoly { terms: vec![([2, 0, 0], 1.0), ([0, 1, 1], -2.0)] };
        let f = PotentialSpec::a2(poly, 2.0, 2).unwrap();
        let x = [0.5, 0.25, -1.0];
        assert!((f.eval(x).unwrap() - (0.25 + 0.5)).abs() < 1e-15);
        let g = f.grad(x).unwrap();
        assert!((g[0] - 1.0).abs() < 1e-15);
        assert!((g[1] + 2.0 * -1.0).abs() < 1e-15);
        assert!((g[2] + 2.0 * 0.25).abs() < 1e-15);
    }

    #[test]
    fn a2_requires_large_p() {
        assert!(PotentialSpec::a2(TriPoly::constant(1.0), 1.2, 2).is_err());
    }

    #[test]
    fn exponents() {
        let f = PotentialSpec::a1(0.5, 1.0).unwrap();
        assert_eq!(f.coercivity_exponent(2), 0.5);
        assert_eq!(f.eps_bar(2), -0.5);
        let g = PotentialSpec::a2(TriPoly::constant(1.0), 3.0, 2).unwrap();
        assert!((g.coercivity_exponent(2) - 1.0).abs() < 1e-15);
        assert_eq!(g.eps_bar(2), 0.0);
    }
}
