//! The straightening diffeomorphism and the coefficient fields it induces.
//!
//! The map is the shear `F(x', x_N, x_{N+1}) = (x', x_N + g(x'), x_{N+1})`,
//! which carries the flat crack onto the curved one, has unit Jacobian
//! determinant, and turns the Laplacian into the divergence-form operator
//! with matrix
//!
//! ```text
//! A(x) = JacF(x)^{-1} (JacF(x)^{-1})^T ,
//! mu(x) = (A x . x)/|x|^2 ,   beta(x) = A x / mu(x) ,
//! dA(x) v1 v2 = ( sum_jk  d a_jk/d x_l  v1_j v2_k )_{l=1..N}, 0 ) .
//! ```
//!
//! Everything here is closed-form for polynomial crack profiles; no numerical
//! differentiation is used in production paths. The ambient space is R^3
//! (N = 2).

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::crack::CrackSpec;
use crate::error::{Error, Result};
use crate::geo::{self, Mat3, Vec3};
use crate::potential::PotentialSpec;

/// Coefficient data induced by the crack-straightening shear.
#[derive(Debug, Clone)]
pub struct CoefficientBundle {
    pub crack: CrackSpec,
    /// Radius of validity: the ellipticity and norm normalizations hold on
    /// the ball of this radius.
    pub r_tilde: f64,
    /// Sampled bound for ||A(x)-A(y)|| / |x-y|; audit-report scaling only.
    pub lipschitz_bound: f64,
    flat: bool,
}

/// Direction selector for [`straighten_point`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MapDirection {
    Forward,
    Inverse,
}

pub fn build_bundle(crack: &CrackSpec) -> Result<CoefficientBundle> {
    if crack.dim_n != 2 {
        return Err(Error::UnsupportedDimension(
            crack.dim_n,
            "coefficient bundles are built for N = 2 (ambient R^3)".into(),
        ));
    }
    let flat = matches!(crack.family, crate::crack::CrackFamily::Flat);
    let mut bundle = CoefficientBundle {
        crack: crack.clone(),
        r_tilde: crack.domain_radius,
        lipschitz_bound: 0.0,
        flat,
    };
    if flat {
        return Ok(bundle);
    }
    // Largest radius (halving from domain_radius) at which 1/2-ellipticity
    // and ||A|| <= 2 hold on a sampling grid.
    let mut r = crack.domain_radius;
    loop {
        if bundle.normalization_holds(r, 1000) {
            break;
        }
        r *= 0.5;
        if r < 1e-3 {
            return Err(Error::Construction(
                "ellipticity/norm normalization fails even at radius 1e-3 (crack too wild)".into(),
            ));
        }
    }
    bundle.r_tilde = r;
    bundle.lipschitz_bound = bundle.sample_lipschitz(r);
    Ok(bundle)
}

impl CoefficientBundle {
    pub fn is_identity(&self) -> bool {
        self.flat
    }

    fn profile_slope(&self, x1: f64) -> f64 {
        self.crack.grad_g(&[x1])[0]
    }

    fn profile_curvature(&self, x1: f64) -> f64 {
        self.crack.hess_g(&[x1])[0][0]
    }

    /// F(x) = (x1, x2 + g(x1), x3).
    pub fn f_map(&self, x: Vec3) -> Vec3 {
        [x[0], x[1] + self.crack.g(&[x[0]]), x[2]]
    }

    /// F^{-1}(x) = (x1, x2 - g(x1), x3).
    pub fn f_inv(&self, x: Vec3) -> Vec3 {
        [x[0], x[1] - self.crack.g(&[x[0]]), x[2]]
    }

    pub fn jac_f(&self, x: Vec3) -> Mat3 {
        let a = self.profile_slope(x[0]);
        [[1.0, 0.0, 0.0], [a, 1.0, 0.0], [0.0, 0.0, 1.0]]
    }

    /// det Jac F is identically 1 for the shear.
    pub fn det_jac(&self, _x: Vec3) -> f64 {
        1.0
    }

    /// A(x) = JacF^{-1} (JacF^{-1})^T, a symmetric matrix depending on x1 only.
    pub fn a(&self, x: Vec3) -> Mat3 {
        if self.flat {
            return geo::IDENTITY;
        }
        let a = self.profile_slope(x[0]);
        [[1.0, -a, 0.0], [-a, 1.0 + a * a, 0.0], [0.0, 0.0, 1.0]]
    }

    /// Entry-wise derivative dA/dx_l. Nonzero only for l = 0 (the x' axis).
    pub fn a_partial(&self, x: Vec3, l: usize) -> Mat3 {
        if self.flat || l != 0 {
            return [[0.0; 3]; 3];
        }
        let a = self.profile_slope(x[0]);
        let ap = self.profile_curvature(x[0]);
        [[0.0, -ap, 0.0], [-ap, 2.0 * a * ap, 0.0], [0.0, 0.0, 0.0]]
    }

    /// mu(x) = (A x . x)/|x|^2, continuously extended by 1 at the origin.
    pub fn mu(&self, x: Vec3) -> f64 {
        if self.flat {
            return 1.0;
        }
        let s = geo::dot(x, x);
        if s == 0.0 {
            return 1.0;
        }
        let p = geo::mat_vec(&self.a(x), x);
        geo::dot(p, x) / s
    }

    /// beta(x) = A x / mu(x); beta(0) = 0. Satisfies beta(x) . x = |x|^2.
    pub fn beta(&self, x: Vec3) -> Vec3 {
        if self.flat {
            return x;
        }
        let s = geo::dot(x, x);
        if s == 0.0 {
            return [0.0; 3];
        }
        let p = geo::mat_vec(&self.a(x), x);
        let q = geo::dot(p, x);
        geo::scale(p, s / q)
    }

    /// Jacobian of beta; equals the identity at the origin.
    pub fn jac_beta(&self, x: Vec3) -> Mat3 {
        if self.flat {
            return geo::IDENTITY;
        }
        let s = geo::dot(x, x);
        if s == 0.0 {
            return geo::IDENTITY;
        }
        let amat = self.a(x);
        let p = geo::mat_vec(&amat, x);
        let q = geo::dot(p, x);
        let mut jac = [[0.0; 3]; 3];
        for l in 0..3 {
            let da = self.a_partial(x, l);
            // d_l P_i = sum_j (d_l a_ij) x_j + a_il
            let dp = [
                geo::dot(da[0], x) + amat[0][l],
                geo::dot(da[1], x) + amat[1][l],
                geo::dot(da[2], x) + amat[2][l],
            ];
            // d_l Q = sum_jk (d_l a_jk) x_j x_k + 2 P_l
            let dq = geo::dot(geo::mat_vec(&da, x), x) + 2.0 * p[l];
            for i in 0..3 {
                jac[i][l] = (2.0 * x[l] * p[i] + s * dp[i]) / q - s * p[i] * dq / (q * q);
            }
        }
        jac
    }

    pub fn div_beta(&self, x: Vec3) -> f64 {
        if self.flat {
            return 3.0;
        }
        let j = self.jac_beta(x);
        j[0][0] + j[1][1] + j[2][2]
    }

    /// div(A grad v) for a field with gradient `grad` and Hessian `hess` at x.
    pub fn div_a_grad(&self, x: Vec3, grad: Vec3, hess: &Mat3) -> f64 {
        let amat = self.a(x);
        let mut out = 0.0;
        for i in 0..3 {
            let da = self.a_partial(x, i);
            out += geo::dot(da[i], grad);
            // (A hess[:,i])_i = sum_j a_ij hess[j][i]
            for j in 0..3 {
                out += amat[i][j] * hess[j][i];
            }
        }
        out
    }

    fn normalization_holds(&self, r: f64, samples: usize) -> bool {
        for x in fibonacci_ball(r, samples) {
            let a = self.a(x);
            if geo::sym_min_eigenvalue(&a) < 0.5 || geo::sym_spectral_norm(&a) > 2.0 {
                return false;
            }
        }
        true
    }

    fn sample_lipschitz(&self, r: f64) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_11ab);
        let mut bound: f64 = 0.0;
        for _ in 0..400 {
            let x = random_in_ball(&mut rng, r);
            let y = random_in_ball(&mut rng, r);
            let d = geo::norm(geo::sub(x, y));
            if d < 1e-9 {
                continue;
            }
            let diff = geo::mat_sub(&self.a(x), &self.a(y));
            let fro: f64 = diff.iter().flatten().map(|t| t * t).sum::<f64>().sqrt();
            bound = bound.max(fro / d);
        }
        bound
    }
}

/// dA(x) v1 v2: the closed-form directional derivative vector of A.
/// Its last component is structurally zero and dA v1 v2 = dA v2 v1.
pub fn da_form(bundle: &CoefficientBundle, x: Vec3, v1: Vec3, v2: Vec3) -> Result<Vec3> {
    check_radius(bundle, x)?;
    Ok(da_form_unchecked(bundle, x, v1, v2))
}

pub(crate) fn da_form_unchecked(bundle: &CoefficientBundle, x: Vec3, v1: Vec3, v2: Vec3) -> Vec3 {
    let mut out = [0.0; 3];
    for (l, o) in out.iter_mut().enumerate().take(2) {
        let da = bundle.a_partial(x, l);
        *o = geo::dot(geo::mat_vec(&da, v2), v1);
    }
    out
}

/// ftilde(x) = |det Jac F(x)| f(F(x)).
pub fn transform_potential(bundle: &CoefficientBundle, f: &PotentialSpec, x: Vec3) -> Result<f64> {
    check_radius(bundle, x)?;
    let y = bundle.f_map(x);
    let det = bundle.det_jac(x).abs();
    Ok(det * f.eval(y)?)
}

/// Apply the diffeomorphism (or its inverse) to a point of the working ball.
pub fn straighten_point(bundle: &CoefficientBundle, p: Vec3, direction: MapDirection) -> Result<Vec3> {
    check_radius(bundle, p)?;
    Ok(match direction {
        MapDirection::Forward => bundle.f_map(p),
        MapDirection::Inverse => bundle.f_inv(p),
    })
}

fn check_radius(bundle: &CoefficientBundle, x: Vec3) -> Result<()> {
    let r = geo::norm(x);
    if r > bundle.r_tilde * (1.0 + 1e-12) {
        return Err(Error::Domain(format!(
            "|x| = {r} exceeds bundle validity radius {}",
            bundle.r_tilde
        )));
    }
    Ok(())
}

/// Deterministic quasi-uniform sample of the ball of radius r (golden-angle
/// spiral over shells).
fn fibonacci_ball(r: f64, count: usize) -> Vec<Vec3> {
    let golden = std::f64::consts::PI * (3.0 - 5.0f64.sqrt());
    (0..count)
        .map(|i| {
            let t = (i as f64 + 0.5) / count as f64;
            let radius = r * t.cbrt();
            let z = 1.0 - 2.0 * t;
            let s = (1.0 - z * z).max(0.0).sqrt();
            let phi = golden * i as f64;
            [radius * z, radius * s * phi.cos(), radius * s * phi.sin()]
        })
        .collect()
}

fn random_in_ball(rng: &mut ChaCha8Rng, r: f64) -> Vec3 {
    loop {
        let x = [
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        ];
        if geo::dot(x, x) <= 1.0 {
            return geo::scale(x, r);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crack::CrackSpec;

    fn quad_bundle() -> CoefficientBundle {
        build_bundle(&CrackSpec::radial_quadratic(0.1, 2, 2.0).unwrap()).unwrap()
    }

    #[test]
    fn flat_bundle_is_identity() {
        let b = build_bundle(&CrackSpec::flat(2, 0.5).unwrap()).unwrap();
        assert!(b.is_identity());
        let x = [0.1, -0.2, 0.3];
        assert_eq!(b.a(x), geo::IDENTITY);
        assert_eq!(b.mu(x), 1.0);
        assert_eq!(b.beta(x), x);
        assert_eq!(da_form(&b, x, [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]).unwrap(), [0.0; 3]);
    }

    #[test]
    fn shear_matrix_matches_hand_product() {
        let b = quad_bundle();
        let x = [1.0, 0.0, 0.0];
        let a = b.a(x);
        let expect = [[1.0, -0.2, 0.0], [-0.2, 1.04, 0.0], [0.0, 0.0, 1.0]];
        for i in 0..3 {
            for j in 0..3 {
                assert!((a[i][j] - expect[i][j]).abs() < 1e-14, "A[{i}][{j}]");
            }
        }
        assert_eq!(b.det_jac(x), 1.0);
        assert!((b.mu(x) - 1.0).abs() < 1e-14);
        let beta = b.beta(x);
        assert!((beta[0] - 1.0).abs() < 1e-14);
        assert!((beta[1] + 0.2).abs() < 1e-14);
        assert!(beta[2].abs() < 1e-14);
    }

    #[test]
    fn bundle_invariants_on_samples() {
        let b = quad_bundle();
        for x in fibonacci_ball(b.r_tilde, 200) {
            let a = b.a(x);
            // symmetry and block structure
            for i in 0..3 {
                for j in 0..3 {
                    assert!((a[i][j] - a[j][i]).abs() < 1e-15);
                }
            }
            assert_eq!(a[2][0], 0.0);
            assert_eq!(a[2][1], 0.0);
            assert!((a[2][2] - b.det_jac(x)).abs() < 1e-15);
            assert!(geo::sym_min_eigenvalue(&a) >= 0.5 - 1e-12);
            assert!(geo::sym_spectral_norm(&a) <= 2.0 + 1e-12);
            assert!(b.mu(x) >= 0.5);
            // beta . x = |x|^2, exact by construction
            let s = geo::dot(x, x);
            if s > 0.0 {
                assert!((geo::dot(b.beta(x), x) - s).abs() <= 1e-12 * s);
            }
        }
        assert!((b.mu([0.0; 3]) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn da_matches_central_differences() {
        let b = quad_bundle();
        let step = 1e-5;
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..50 {
            let x = random_in_ball(&mut rng, 0.9 * b.r_tilde);
            let v1 = random_in_ball(&mut rng, 1.0);
            let v2 = random_in_ball(&mut rng, 1.0);
            let d = da_form(&b, x, v1, v2).unwrap();
            for l in 0..3 {
                let mut xp = x;
                let mut xm = x;
                xp[l] += step;
                xm[l] -= step;
                let ap = b.a(xp);
                let am = b.a(xm);
                let mut fd = 0.0;
                for j in 0..3 {
                    for k in 0..3 {
                        fd += (ap[j][k] - am[j][k]) / (2.0 * step) * v1[j] * v2[k];
                    }
                }
                let scale = 1.0_f64.max(d[l].abs());
                assert!(
                    (d[l] - fd).abs() <= 1e-6 * scale,
                    "component {l}: analytic {} vs fd {fd}",
                    d[l]
                );
            }
            // symmetry in the two directions
            let d21 = da_form(&b, x, v2, v1).unwrap();
            for l in 0..3 {
                assert!((d[l] - d21[l]).abs() < 1e-12);
            }
            assert_eq!(d[2], 0.0);
        }
    }

    #[test]
    fn da_example_value() {
        let b = quad_bundle();
        let d = da_form(&b, [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 1.0, 0.0]).unwrap();
        assert!((d[0] - 0.08).abs() < 1e-14);
        assert!(d[1].abs() < 1e-14);
        assert_eq!(d[2], 0.0);
    }

    #[test]
    fn jac_beta_matches_central_differences() {
        let b = quad_bundle();
        let step = 1e-6;
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..30 {
            let x = random_in_ball(&mut rng, 0.9 * b.r_tilde);
            if geo::norm(x) < 0.05 {
                continue;
            }
            let j = b.jac_beta(x);
            for l in 0..3 {
                let mut xp = x;
                let mut xm = x;
                xp[l] += step;
                xm[l] -= step;
                let bp = b.beta(xp);
                let bm = b.beta(xm);
                for i in 0..3 {
                    let fd = (bp[i] - bm[i]) / (2.0 * step);
                    assert!(
                        (j[i][l] - fd).abs() <= 2e-5 * 1.0_f64.max(fd.abs()),
                        "jac beta [{i}][{l}]"
                    );
                }
            }
        }
    }

    #[test]
    fn asymptotic_flags() {
        let b = quad_bundle();
        // ||A - Id|| <= K r, |mu - 1| <= K r, |beta - x| <= K r^2 near 0
        let mut k_fit: f64 = 0.0;
        for &r in &[0.2, 0.1, 0.05, 0.025] {
            let mut worst_a: f64 = 0.0;
            let mut worst_mu: f64 = 0.0;
            let mut worst_beta: f64 = 0.0;
            let mut worst_jb: f64 = 0.0;
            for x in fibonacci_ball(r, 150) {
                let x = geo::scale(x, r / geo::norm(x).max(1e-300));
                let dev = geo::mat_sub(&b.a(x), &geo::IDENTITY);
                worst_a = worst_a.max(geo::sym_spectral_norm(&dev));
                worst_mu = worst_mu.max((b.mu(x) - 1.0).abs());
                worst_beta = worst_beta.max(geo::norm(geo::sub(b.beta(x), x)));
                let jb = geo::mat_sub(&b.jac_beta(x), &geo::IDENTITY);
                let fro: f64 = jb.iter().flatten().map(|t| t * t).sum::<f64>().sqrt();
                worst_jb = worst_jb.max(fro);
            }
            k_fit = k_fit.max(worst_a / r).max(worst_mu / r).max(worst_beta / (r * r));
            // Jac beta -> Id at least linearly along the halving grid
            assert!(worst_jb <= 3.0 * r, "Jac beta deviation {worst_jb} at r={r}");
        }
        assert!(k_fit.is_finite() && k_fit < 10.0, "fitted constant K = {k_fit}");
    }

    #[test]
    fn straighten_roundtrip_and_crack_flattening() {
        let b = quad_bundle();
        assert_eq!(straighten_point(&b, [0.0; 3], MapDirection::Forward).unwrap(), [0.0; 3]);
        let fwd = straighten_point(&b, [1.0, 0.0, 0.0], MapDirection::Forward).unwrap();
        assert!((fwd[1] - 0.1).abs() < 1e-15);

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let p = random_in_ball(&mut rng, b.r_tilde * 0.7);
            let q = straighten_point(&b, p, MapDirection::Forward).unwrap();
            let back = b.f_inv(q);
            for i in 0..3 {
                assert!((back[i] - p[i]).abs() < 1e-12);
            }
            // flat-slit points map onto the curved crack
            let flat = [p[0], p[1].abs(), 0.0];
            let up = b.f_map(flat);
            assert!(up[2].abs() < 1e-15);
            assert!(up[1] >= b.crack.g(&[up[0]]) - 1e-12);
        }
    }

    #[test]
    fn potential_transforms_through_unit_determinant() {
        let b = quad_bundle();
        let one = PotentialSpec::a2(crate::potential::TriPoly::constant(1.0), 2.0, 2).unwrap();
        assert!((transform_potential(&b, &one, [0.3, 0.1, -0.2]).unwrap() - 1.0).abs() < 1e-15);
        let zero = PotentialSpec::zero();
        assert_eq!(transform_potential(&b, &zero, [0.3, 0.1, -0.2]).unwrap(), 0.0);
        let a1 = PotentialSpec::a1(1.0, 1.0).unwrap();
        assert!(transform_potential(&b, &a1, [0.0; 3]).is_err());
    }
}
