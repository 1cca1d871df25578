//! Quadrature rules: Gauss-Legendre on [-1,1], Keast rules on tetrahedra,
//! and the product rule on the unit sphere used for all surface integrals.

use crate::geo::{self, Vec3};

/// Gauss-Legendre nodes and weights on [-1, 1], by Newton iteration on the
/// Legendre recurrence. Deterministic to the last bit for fixed n.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Chebyshev initial guess
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_and_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
        let (_, d) = legendre_and_derivative(n, 0.0);
        weights[n / 2] = 2.0 / (d * d);
    }
    (nodes, weights)
}

fn legendre_and_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// A quadrature point in barycentric coordinates with a weight that is a
/// fraction of the element volume (weights sum to 1 over the rule).
#[derive(Debug, Clone, Copy)]
pub struct BaryPoint {
    pub bary: [f64; 4],
    pub weight: f64,
}

/// 4-point degree-2 rule.
pub fn tet_rule_4() -> Vec<BaryPoint> {
    let a = (5.0 + 3.0 * 5.0f64.sqrt()) / 20.0;
    let b = (5.0 - 5.0f64.sqrt()) / 20.0;
    (0..4)
        .map(|i| {
            let mut bary = [b; 4];
            bary[i] = a;
            BaryPoint { bary, weight: 0.25 }
        })
        .collect()
}

/// Keast 11-point degree-4 rule (weights normalized to sum to 1).
pub fn tet_rule_11() -> Vec<BaryPoint> {
    let mut pts = Vec::with_capacity(11);
    pts.push(BaryPoint { bary: [0.25; 4], weight: -148.0 / 1875.0 });
    let a = 11.0 / 14.0;
    let b = 1.0 / 14.0;
    for i in 0..4 {
        let mut bary = [b; 4];
        bary[i] = a;
        pts.push(BaryPoint { bary, weight: 343.0 / 7500.0 });
    }
    let c = 0.25 + 0.25 * (5.0f64 / 14.0).sqrt();
    let d = 0.25 - 0.25 * (5.0f64 / 14.0).sqrt();
    let pairs = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)];
    for (i, j) in pairs {
        let mut bary = [d; 4];
        bary[i] = c;
        bary[j] = c;
        pts.push(BaryPoint { bary, weight: 56.0 / 375.0 });
    }
    pts
}

/// Product quadrature over the unit sphere: Gauss-Legendre in cos(psi) with
/// the polar axis e1 (so the slit-edge directions are the poles) and midpoint
/// in phi with a half-cell offset, which keeps every node off the cut
/// meridian phi = 0.
#[derive(Debug, Clone)]
pub struct SphereRule {
    pub dirs: Vec<Vec3>,
    pub weights: Vec<f64>,
}

impl SphereRule {
    pub fn product(n_psi: usize, n_phi: usize) -> Self {
        let (nodes, ws) = gauss_legendre(n_psi);
        let dphi = 2.0 * std::f64::consts::PI / n_phi as f64;
        let mut dirs = Vec::with_capacity(n_psi * n_phi);
        let mut weights = Vec::with_capacity(n_psi * n_phi);
        for (c, wc) in nodes.iter().zip(&ws) {
            let s = (1.0 - c * c).max(0.0).sqrt();
            for j in 0..n_phi {
                let phi = dphi * (j as f64 + 0.5);
                dirs.push([*c, s * phi.cos(), s * phi.sin()]);
                weights.push(wc * dphi);
            }
        }
        SphereRule { dirs, weights }
    }

    /// The default surface rule: 64 x 128 points.
    pub fn standard() -> Self {
        Self::product(64, 128)
    }

    /// Integrate `f(direction)` over the unit sphere.
    pub fn integrate(&self, mut f: impl FnMut(Vec3) -> f64) -> f64 {
        self.dirs.iter().zip(&self.weights).map(|(d, w)| w * f(*d)).sum()
    }
}

/// Recursively subdivide a tetrahedron into 8 children (midpoint scheme).
pub fn subdivide_tet(v: [Vec3; 4]) -> [[Vec3; 4]; 8] {
    let mid = |a: Vec3, b: Vec3| geo::scale(geo::add(a, b), 0.5);
    let m01 = mid(v[0], v[1]);
    let m02 = mid(v[0], v[2]);
    let m03 = mid(v[0], v[3]);
    let m12 = mid(v[1], v[2]);
    let m13 = mid(v[1], v[3]);
    let m23 = mid(v[2], v[3]);
    [
        [v[0], m01, m02, m03],
        [v[1], m01, m12, m13],
        [v[2], m02, m12, m23],
        [v[3], m03, m13, m23],
        // interior octahedron split along the m01-m23 diagonal
        [m01, m02, m03, m23],
        [m01, m02, m12, m23],
        [m01, m03, m13, m23],
        [m01, m12, m13, m23],
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        for n in [2usize, 5, 16, 64] {
            let (x, w) = gauss_legendre(n);
            assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-13);
            // exact through degree 2n-1
            for k in (0..2 * n).step_by(2) {
                let got: f64 = x.iter().zip(&w).map(|(xi, wi)| wi * xi.powi(k as i32)).sum();
                let exact = 2.0 / (k as f64 + 1.0);
                assert!((got - exact).abs() < 1e-12, "n={n}, k={k}: {got} vs {exact}");
            }
        }
    }

    fn tet_monomial_integral(a: u32, b: u32, c: u32) -> f64 {
        // int over reference tet of x^a y^b z^c = a! b! c! / (a+b+c+3)!
        let fact = |m: u32| (1..=m).map(|t| t as f64).product::<f64>().max(1.0);
        fact(a) * fact(b) * fact(c) / fact(a + b + c + 3)
    }

    fn check_rule(rule: &[BaryPoint], degree: u32) {
        // reference tet (0,0,0),(1,0,0),(0,1,0),(0,0,1), volume 1/6
        for a in 0..=degree {
            for b in 0..=degree - a {
                for c in 0..=degree - a - b {
                    let got: f64 = rule
                        .iter()
                        .map(|p| {
                            let x = p.bary[1];
                            let y = p.bary[2];
                            let z = p.bary[3];
                            p.weight / 6.0 * x.powi(a as i32) * y.powi(b as i32) * z.powi(c as i32)
                        })
                        .sum();
                    let exact = tet_monomial_integral(a, b, c);
                    assert!(
                        (got - exact).abs() < 1e-14,
                        "monomial ({a},{b},{c}): {got} vs {exact}"
                    );
                }
            }
        }
    }

    #[test]
    fn tet_rules_are_exact_to_stated_degree() {
        check_rule(&tet_rule_4(), 2);
        check_rule(&tet_rule_11(), 4);
    }

    #[test]
    fn sphere_rule_basics() {
        let rule = SphereRule::standard();
        let area = rule.integrate(|_| 1.0);
        assert!((area - 4.0 * std::f64::consts::PI).abs() < 1e-10);
        // int over S^2 of x3^2 = 4 pi / 3
        let m2 = rule.integrate(|d| d[2] * d[2]);
        assert!((m2 - 4.0 * std::f64::consts::PI / 3.0).abs() < 1e-10);
        // every node stays off the cut meridian {x3 = 0, x2 >= 0}
        for d in &rule.dirs {
            assert!(d[2].abs() > 1e-6 || d[1] < 0.0);
        }
    }

    #[test]
    fn sphere_rule_handles_half_angle_mass() {
        // int over S^2 of sin(psi_e1) sin^2(phi/2) = pi^2 / 2 where psi_e1 is the
        // colatitude from e1 and phi the angle around the slit; this is the mass
        // of the first slit eigenfunction shape and has a sqrt-type kink at the cut.
        let rule = SphereRule::standard();
        let got = rule.integrate(|d| {
            let s = (d[1] * d[1] + d[2] * d[2]).sqrt();
            0.5 * (s - d[1])
        });
        let exact = std::f64::consts::PI.powi(2) / 2.0;
        assert!((got - exact).abs() < 2e-4 * exact, "{got} vs {exact}");
    }

    #[test]
    fn subdivision_preserves_volume() {
        let v = [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.3, 1.1, 0.0], [0.2, 0.1, 0.9]];
        let vol: f64 = geo::tet_signed_volume(v[0], v[1], v[2], v[3]);
        let sum: f64 = subdivide_tet(v)
            .iter()
            .map(|c| geo::tet_signed_volume(c[0], c[1], c[2], c[3]).abs())
            .sum();
        assert!((sum - vol.abs()).abs() < 1e-14);
    }
}
