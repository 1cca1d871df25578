//! P1 finite elements on the slit-ball and approximating-domain meshes:
//! nodal fields, Galerkin assembly of the divergence-form operator, Dirichlet
//! solves, clipped-ball volume quadrature, surface quadrature on interior
//! spheres, and H1 distances between fields on different meshes.

use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geo::{self, Vec3};
use crate::potential::PotentialSpec;
use crate::quad::{subdivide_tet, tet_rule_11, tet_rule_4, BaryPoint, SphereRule};
use crate::sparse::{cg_solve, CsrMatrix};
use crate::straighten::CoefficientBundle;
use crate::tetmesh::{DomainKind, TetMesh};

/// A P1 nodal field on a tetrahedral mesh. `dirichlet_mask` marks the
/// vertices pinned to zero (crack and gamma vertices of solved fields).
#[derive(Debug, Clone)]
pub struct ScalarField {
    pub mesh: Arc<TetMesh>,
    pub nodal: Vec<f64>,
    pub dirichlet_mask: Vec<bool>,
}

impl ScalarField {
    pub fn zeros(mesh: &Arc<TetMesh>) -> Self {
        ScalarField {
            mesh: mesh.clone(),
            nodal: vec![0.0; mesh.n_vertices()],
            dirichlet_mask: vec![false; mesh.n_vertices()],
        }
    }

    /// Sample an analytic function at the nodes (no mask).
    pub fn from_fn(mesh: &Arc<TetMesh>, f: impl Fn(Vec3) -> f64) -> Self {
        ScalarField {
            mesh: mesh.clone(),
            nodal: mesh.vertices.iter().map(|&p| f(p)).collect(),
            dirichlet_mask: vec![false; mesh.n_vertices()],
        }
    }

    /// Sample an analytic function, forcing zero at crack vertices.
    pub fn from_fn_masked(mesh: &Arc<TetMesh>, f: impl Fn(Vec3) -> f64) -> Self {
        let nodal = mesh
            .vertices
            .iter()
            .enumerate()
            .map(|(v, &p)| if mesh.crack_vertex[v] { 0.0 } else { f(p) })
            .collect();
        ScalarField { mesh: mesh.clone(), nodal, dirichlet_mask: mesh.crack_vertex.clone() }
    }

    pub fn value_in_tet(&self, tet: usize, bary: [f64; 4]) -> f64 {
        let vs = self.mesh.tets[tet];
        (0..4).map(|i| bary[i] * self.nodal[vs[i] as usize]).sum()
    }

    /// Constant gradient on tet `tet`.
    pub fn grad_in_tet(&self, tet: usize) -> Vec3 {
        let grads = self.mesh.shape_gradients(tet);
        let vs = self.mesh.tets[tet];
        let mut g = [0.0; 3];
        for i in 0..4 {
            g = geo::add(g, geo::scale(grads[i], self.nodal[vs[i] as usize]));
        }
        g
    }

    pub fn eval(&self, x: Vec3) -> Result<f64> {
        let (tet, bary) = self.mesh.locate(x)?;
        Ok(self.value_in_tet(tet, bary))
    }

    /// Evaluate, extending by zero outside the mesh domain.
    pub fn eval_extended(&self, x: Vec3) -> f64 {
        match self.mesh.try_locate_extended(x) {
            Some((tet, bary)) => self.value_in_tet(tet, bary),
            None => 0.0,
        }
    }

    pub fn sup_abs(&self) -> f64 {
        self.nodal.iter().fold(0.0f64, |a, v| a.max(v.abs()))
    }

    pub fn is_trivial(&self) -> bool {
        self.sup_abs() <= 1e-14
    }
}

/// The leading slit harmonic sqrt(rho) sin(phi/2) = sqrt((s - x2)/2) with
/// s = sqrt(x2^2 + x3^2): harmonic off the slit, zero on it, homogeneous of
/// degree 1/2.
pub fn slit_harmonic(x: Vec3) -> f64 {
    let s = (x[1] * x[1] + x[2] * x[2]).sqrt();
    (0.5 * (s - x[1])).max(0.0).sqrt()
}

/// Gradient of [`slit_harmonic`] away from the slit.
pub fn slit_harmonic_grad(x: Vec3) -> Vec3 {
    let s = (x[1] * x[1] + x[2] * x[2]).sqrt();
    let u = (0.5 * (s - x[1])).max(0.0).sqrt();
    if u <= 0.0 || s == 0.0 {
        return [0.0; 3];
    }
    [0.0, (x[1] / s - 1.0) / (4.0 * u), x[2] / s / (4.0 * u)]
}

/// Degree-3/2 slit harmonic x1 * sqrt(rho) sin(phi/2).
pub fn slit_harmonic_3half(x: Vec3) -> f64 {
    x[0] * slit_harmonic(x)
}

// ---------------------------------------------------------------------------
// assembly

/// Coefficient of the principal part.
#[derive(Clone, Copy)]
pub enum Coefficient<'a> {
    Identity,
    Bundle(&'a CoefficientBundle),
}

impl Coefficient<'_> {
    fn apply(&self, x: Vec3, g: Vec3) -> Vec3 {
        match self {
            Coefficient::Identity => g,
            Coefficient::Bundle(b) => geo::mat_vec(&b.a(x), g),
        }
    }
    fn is_identity(&self) -> bool {
        match self {
            Coefficient::Identity => true,
            Coefficient::Bundle(b) => b.is_identity(),
        }
    }
}

/// Stiffness matrix of `integral A grad u . grad v` over all vertices.
/// Element contributions are computed in parallel and merged in tet order.
pub fn assemble_stiffness(mesh: &TetMesh, coeff: Coefficient<'_>) -> CsrMatrix {
    let rule = tet_rule_4();
    let identity = coeff.is_identity();
    let locals: Vec<[f64; 16]> = (0..mesh.tets.len())
        .into_par_iter()
        .map(|t| {
            let grads = mesh.shape_gradients(t);
            let vol = mesh.tet_volume(t);
            let pts = mesh.tet_points(t);
            let mut loc = [0.0; 16];
            if identity {
                for i in 0..4 {
                    for j in 0..4 {
                        loc[4 * i + j] = vol * geo::dot(grads[i], grads[j]);
                    }
                }
            } else {
                for q in &rule {
                    let x = bary_point(&pts, q.bary);
                    let w = q.weight * vol;
                    let ag: [Vec3; 4] = [
                        coeff.apply(x, grads[0]),
                        coeff.apply(x, grads[1]),
                        coeff.apply(x, grads[2]),
                        coeff.apply(x, grads[3]),
                    ];
                    for i in 0..4 {
                        for j in 0..4 {
                            loc[4 * i + j] += w * geo::dot(ag[i], grads[j]);
                        }
                    }
                }
            }
            loc
        })
        .collect();
    let mut trip = Vec::with_capacity(16 * mesh.tets.len());
    for (t, loc) in locals.iter().enumerate() {
        let vs = mesh.tets[t];
        for i in 0..4 {
            for j in 0..4 {
                trip.push((vs[i], vs[j], loc[4 * i + j]));
            }
        }
    }
    CsrMatrix::from_triplets(mesh.n_vertices(), trip)
}

/// Mass matrix weighted by the transformed potential `ftilde = f o F` (det
/// Jac F = 1 for the shear): `integral ftilde u v`. With `absolute` set the
/// weight is `|ftilde|`. Tets touching the origin use graded dyadic
/// subdivision (3 levels) to absorb the radial singularity of mode a1.
pub fn assemble_potential_mass(
    mesh: &TetMesh,
    bundle: &CoefficientBundle,
    f: &PotentialSpec,
    absolute: bool,
) -> Result<CsrMatrix> {
    if f.is_zero() {
        return Ok(CsrMatrix::from_triplets(mesh.n_vertices(), Vec::new()));
    }
    let rule = tet_rule_11();
    let locals: Vec<Result<[f64; 16]>> = (0..mesh.tets.len())
        .into_par_iter()
        .map(|t| {
            let pts = mesh.tet_points(t);
            let grads = mesh.shape_gradients(t);
            // affine shape functions lambda_i(x) = c_i + g_i . x
            let consts: [f64; 4] = {
                let mut c = [0.0; 4];
                let bary0 = [1.0, 0.0, 0.0, 0.0];
                for i in 0..4 {
                    c[i] = bary0[i] - geo::dot(grads[i], pts[0]);
                }
                c
            };
            let mut loc = [0.0; 16];
            let mut add_chunk = |verts: &[Vec3; 4]| -> Result<()> {
                let cvol = geo::tet_signed_volume(verts[0], verts[1], verts[2], verts[3]).abs();
                for q in &rule {
                    let x = bary_point(verts, q.bary);
                    let mut ft = f.eval(bundle.f_map(x))?;
                    if absolute {
                        ft = ft.abs();
                    }
                    let w = q.weight * cvol * ft;
                    let lam: [f64; 4] = [
                        consts[0] + geo::dot(grads[0], x),
                        consts[1] + geo::dot(grads[1], x),
                        consts[2] + geo::dot(grads[2], x),
                        consts[3] + geo::dot(grads[3], x),
                    ];
                    for i in 0..4 {
                        for j in 0..4 {
                            loc[4 * i + j] += w * lam[i] * lam[j];
                        }
                    }
                }
                Ok(())
            };
            if mesh.tet_rmin[t] <= 0.0 {
                // graded subdivision toward the origin vertex
                let mut current = pts;
                for _level in 0..3 {
                    let children = subdivide_tet(current);
                    for child in children.iter().skip(1) {
                        add_chunk(child)?;
                    }
                    current = children[0];
                }
                add_chunk(&current)?;
            } else {
                add_chunk(&pts)?;
            }
            Ok(loc)
        })
        .collect();
    let mut trip = Vec::with_capacity(16 * mesh.tets.len());
    for (t, loc) in locals.into_iter().enumerate() {
        let loc = loc?;
        let vs = mesh.tets[t];
        for i in 0..4 {
            for j in 0..4 {
                trip.push((vs[i], vs[j], loc[4 * i + j]));
            }
        }
    }
    Ok(CsrMatrix::from_triplets(mesh.n_vertices(), trip))
}

#[inline]
fn bary_point(pts: &[Vec3; 4], bary: [f64; 4]) -> Vec3 {
    let mut x = [0.0; 3];
    for i in 0..4 {
        x = geo::add(x, geo::scale(pts[i], bary[i]));
    }
    x
}

// ---------------------------------------------------------------------------
// Dirichlet solve

#[derive(Debug, Clone)]
pub struct SolveOptions {
    /// Coercivity radius from the audit probe; solving on a larger mesh is a
    /// well-posedness error.
    pub coercivity_radius: Option<f64>,
    pub rel_tol: f64,
    /// Iteration cap as a multiple of sqrt(#unknowns).
    pub max_iter_mult: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions { coercivity_radius: None, rel_tol: 1e-10, max_iter_mult: 20.0 }
    }
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub iterations: usize,
    pub relative_residual: f64,
    pub unknowns: usize,
}

/// Galerkin solve of `-div(A grad U) = ftilde U` with `U = 0` on the crack
/// (and on gamma) and `U = data` on the outer sphere. On approximating
/// domains the trace is multiplied by a smooth cutoff vanishing within
/// distance `2 f_n(0)` of the approximating surface.
pub fn assemble_solve(
    mesh: &Arc<TetMesh>,
    bundle: &CoefficientBundle,
    f: &PotentialSpec,
    data: &(dyn Fn(Vec3) -> f64 + Sync),
) -> Result<(ScalarField, SolveReport)> {
    assemble_solve_with(mesh, bundle, f, data, &SolveOptions::default())
}

pub fn assemble_solve_with(
    mesh: &Arc<TetMesh>,
    bundle: &CoefficientBundle,
    f: &PotentialSpec,
    data: &(dyn Fn(Vec3) -> f64 + Sync),
    opts: &SolveOptions,
) -> Result<(ScalarField, SolveReport)> {
    let r = mesh.radius();
    if r > bundle.r_tilde * (1.0 + 1e-12) {
        return Err(Error::Precondition(format!(
            "mesh radius {r} exceeds bundle validity radius {}",
            bundle.r_tilde
        )));
    }
    if let Some(r0) = opts.coercivity_radius {
        if r > r0 * (1.0 + 1e-12) {
            return Err(Error::WellPosedness(format!(
                "mesh radius {r} exceeds the coercivity radius {r0}"
            )));
        }
    }

    let stiff = assemble_stiffness(mesh, Coefficient::Bundle(bundle));
    let mass = assemble_potential_mass(mesh, bundle, f, false)?;

    // boundary values: crack/gamma pinned to zero, the sphere carries the
    // trace (times the gamma cutoff on approximating domains)
    let n = mesh.n_vertices();
    let mut constrained = vec![false; n];
    let mut values = vec![0.0; n];
    let cutoff = gamma_cutoff(&mesh.domain_kind);
    for v in 0..n {
        if mesh.crack_vertex[v] {
            constrained[v] = true;
        } else if mesh.outer_vertex[v] {
            constrained[v] = true;
            if !mesh.gamma_vertex[v] {
                let x = mesh.vertices[v];
                values[v] = data(x) * cutoff(x);
            }
        }
    }

    let mut index_of = vec![-1i64; n];
    let mut free: Vec<u32> = Vec::new();
    for v in 0..n {
        if !constrained[v] {
            index_of[v] = free.len() as i64;
            free.push(v as u32);
        }
    }

    // S = K - M; rhs = -S[free, constrained] values
    let mut s_values = stiff.matvec_alloc(&values);
    if mass.nnz() > 0 {
        let mv = mass.matvec_alloc(&values);
        for (si, mi) in s_values.iter_mut().zip(&mv) {
            *si -= mi;
        }
    }
    let rhs: Vec<f64> = free.iter().map(|&v| -s_values[v as usize]).collect();

    // restrict S to the free block
    let restrict = |m: &CsrMatrix, sign: f64, trip: &mut Vec<(u32, u32, f64)>| {
        for (fi, &v) in free.iter().enumerate() {
            let row = v as usize;
            for k in m.row_ptr[row]..m.row_ptr[row + 1] {
                let c = index_of[m.cols[k] as usize];
                if c >= 0 {
                    trip.push((fi as u32, c as u32, sign * m.vals[k]));
                }
            }
        }
    };
    let mut trip = Vec::new();
    restrict(&stiff, 1.0, &mut trip);
    if mass.nnz() > 0 {
        restrict(&mass, -1.0, &mut trip);
    }
    let sys = CsrMatrix::from_triplets(free.len(), trip);

    let max_iter = (opts.max_iter_mult * (free.len() as f64).sqrt()).ceil() as usize + 10;
    let (sol, out) = cg_solve(&sys, &rhs, opts.rel_tol, max_iter)?;

    let mut nodal = values;
    for (fi, &v) in free.iter().enumerate() {
        nodal[v as usize] = sol[fi];
    }
    let mut mask = mesh.crack_vertex.clone();
    for v in 0..n {
        if mesh.gamma_vertex[v] {
            mask[v] = true;
        }
    }
    let field = ScalarField { mesh: mesh.clone(), nodal, dirichlet_mask: mask };
    let report = SolveReport {
        iterations: out.iterations,
        relative_residual: out.relative_residual,
        unknowns: free.len(),
    };
    Ok((field, report))
}

/// Smooth cutoff multiplying boundary data on approximating domains: zero
/// within margin 2 f_n(0) of the approximating surface. The margin is
/// measured by the constraint slack f~_n(x3) - x2.
fn gamma_cutoff(kind: &DomainKind) -> Box<dyn Fn(Vec3) -> f64 + Sync> {
    match kind {
        DomainKind::SlitBall { .. } => Box::new(|_| 1.0),
        DomainKind::ApproxDomain { n, alpha, .. } => {
            let n = *n;
            let alpha = *alpha;
            let tip = crate::profile::approx_profile(n, alpha, 0.0).unwrap().value;
            Box::new(move |x: Vec3| {
                let margin =
                    crate::profile::approx_profile_even(n, alpha, x[2]).unwrap().value - x[1];
                crate::profile::smooth_step(margin / (2.0 * tip))
            })
        }
    }
}

/// Residual of the discrete weak form against all interior (free) basis
/// functions; returns (residual norm, boundary-load norm).
pub fn weak_residual(
    mesh: &TetMesh,
    bundle: &CoefficientBundle,
    f: &PotentialSpec,
    field: &ScalarField,
) -> Result<(f64, f64)> {
    let stiff = assemble_stiffness(mesh, Coefficient::Bundle(bundle));
    let mass = assemble_potential_mass(mesh, bundle, f, false)?;
    let mut res = stiff.matvec_alloc(&field.nodal);
    if mass.nnz() > 0 {
        let my = mass.matvec_alloc(&field.nodal);
        for (ri, mi) in res.iter_mut().zip(&my) {
            *ri -= mi;
        }
    }
    let mut rnorm = 0.0;
    let mut load = 0.0;
    for v in 0..mesh.n_vertices() {
        let interior = !mesh.crack_vertex[v] && !mesh.outer_vertex[v];
        if interior {
            rnorm += res[v] * res[v];
        } else {
            load += res[v] * res[v];
        }
    }
    Ok((rnorm.sqrt(), load.sqrt().max(1e-300)))
}

// ---------------------------------------------------------------------------
// volume quadrature over clipped balls

/// Quadrature order selector for [`integrate_ball`].
#[derive(Clone, Copy, PartialEq, Eq)]
pub enum VolumeRule {
    /// 4-point rule; right for piecewise-constant-gradient integrands.
    Gradient,
    /// 11-point rule with graded origin subdivision, for singular potentials.
    Potential,
}

/// Integrate `f(x, tet)` over `B_rad` intersected with the mesh domain.
/// Tets fully inside integrate with the selected rule; tets cut by the
/// sphere are subdivided dyadically (depth 3) with centroid sampling, which
/// also recovers the slivers between the chordal shell faces and the true
/// sphere. With pinned shell radii no tet straddles and the clipping cost
/// vanishes.
pub fn integrate_ball<F>(mesh: &TetMesh, rad: f64, rule: VolumeRule, f: F) -> f64
where
    F: Fn(Vec3, usize) -> f64 + Sync,
{
    let base: Vec<BaryPoint> = match rule {
        VolumeRule::Gradient => tet_rule_4(),
        VolumeRule::Potential => tet_rule_11(),
    };
    let vals: Vec<f64> = (0..mesh.tets.len())
        .into_par_iter()
        .map(|t| {
            let rmin = mesh.tet_rmin[t];
            let rmax = mesh.tet_rmax[t];
            let edge = mesh.tet_edge[t];
            let margin = edge * edge / (2.0 * rmin.max(edge));
            if rmin - margin >= rad {
                return 0.0;
            }
            let pts = mesh.tet_points(t);
            if rmax <= rad * (1.0 + 1e-12) {
                if rule == VolumeRule::Potential && rmin <= 0.0 {
                    return integrate_origin_graded(&pts, &base, &|x| f(x, t));
                }
                let vol = mesh.tet_volume(t);
                let mut acc = 0.0;
                for q in &base {
                    let x = bary_point(&pts, q.bary);
                    acc += q.weight * vol * f(x, t);
                }
                return acc;
            }
            clip_integrate(&pts, rad, 3, &|x| f(x, t))
        })
        .collect();
    vals.iter().sum()
}

fn clip_integrate(pts: &[Vec3; 4], rad: f64, depth: usize, f: &dyn Fn(Vec3) -> f64) -> f64 {
    let vol = geo::tet_signed_volume(pts[0], pts[1], pts[2], pts[3]).abs();
    if vol == 0.0 {
        return 0.0;
    }
    let radii = pts.map(geo::norm);
    let rmax = radii.iter().cloned().fold(0.0, f64::max);
    let c = centroid(pts);
    if rmax <= rad {
        return vol * f(c);
    }
    if depth == 0 {
        return if geo::norm(c) <= rad { vol * f(c) } else { 0.0 };
    }
    subdivide_tet(*pts).iter().map(|child| clip_integrate(child, rad, depth - 1, f)).sum()
}

fn centroid(pts: &[Vec3; 4]) -> Vec3 {
    let mut c = [0.0; 3];
    for p in pts {
        c = geo::add(c, *p);
    }
    geo::scale(c, 0.25)
}

/// Graded dyadic quadrature toward the origin vertex (assumed at `pts[0]`):
/// 3 levels of subdivision, recursing only into the origin child.
fn integrate_origin_graded(pts: &[Vec3; 4], rule: &[BaryPoint], f: &dyn Fn(Vec3) -> f64) -> f64 {
    let apply = |verts: &[Vec3; 4]| -> f64 {
        let vol = geo::tet_signed_volume(verts[0], verts[1], verts[2], verts[3]).abs();
        rule.iter().map(|q| q.weight * vol * f(bary_point(verts, q.bary))).sum()
    };
    let mut acc = 0.0;
    let mut current = *pts;
    for _ in 0..3 {
        let children = subdivide_tet(current);
        for child in children.iter().skip(1) {
            acc += apply(child);
        }
        current = children[0];
    }
    acc + apply(&current)
}

// ---------------------------------------------------------------------------
// surface quadrature

/// A located product-rule quadrature on the sphere of radius `rad`: weights
/// include the `rad^2` area factor. For approximating domains only the
/// points inside `{x2 < f~_n(x3)}` are kept (the S_{r,n} portion).
pub struct SurfaceQuad {
    pub rad: f64,
    pub points: Vec<SurfPoint>,
}

pub struct SurfPoint {
    pub x: Vec3,
    pub w: f64,
    pub tet: usize,
    pub bary: [f64; 4],
}

impl SurfaceQuad {
    /// Integrate `f(point)` over the sphere portion.
    pub fn integrate(&self, mut f: impl FnMut(&SurfPoint) -> f64) -> f64 {
        self.points.iter().map(|p| p.w * f(p)).sum()
    }
}

/// Build the located surface rule at radius `rad` (64 x 128 product rule).
/// Fails with a resolution error when the sphere cuts through tets larger
/// than rad/4 (with pinned radii the sphere passes between shells and the
/// check is vacuous).
pub fn surface_quad(mesh: &TetMesh, rad: f64) -> Result<SurfaceQuad> {
    surface_quad_sized(mesh, rad, 64, 128)
}

pub fn surface_quad_sized(
    mesh: &TetMesh,
    rad: f64,
    n_psi: usize,
    n_phi: usize,
) -> Result<SurfaceQuad> {
    if rad > mesh.radius() * (1.0 + 1e-12) {
        return Err(Error::Resolution(format!(
            "radius {rad} exceeds mesh radius {}",
            mesh.radius()
        )));
    }
    let local = local_strict_edge(mesh, rad);
    if rad < 4.0 * local {
        return Err(Error::Resolution(format!(
            "surface radius {rad} cuts through elements of size {local:.4}; need rad >= 4x local size"
        )));
    }
    let rule = SphereRule::product(n_psi, n_phi);
    let approx = matches!(mesh.domain_kind, DomainKind::ApproxDomain { .. });
    let mut points = Vec::with_capacity(rule.dirs.len());
    for (dir, wq) in rule.dirs.iter().zip(&rule.weights) {
        let x = geo::scale(*dir, rad);
        if let DomainKind::ApproxDomain { n, alpha, .. } = mesh.domain_kind {
            let lim = crate::profile::approx_profile_even(n, alpha, x[2])?.value;
            if x[1] >= lim {
                continue;
            }
        }
        match mesh.locate(x) {
            Ok((tet, bary)) => points.push(SurfPoint { x, w: wq * rad * rad, tet, bary }),
            // points analytically inside the approximating domain can fall
            // into the corner the chordal gamma facets cut off; they carry
            // no mesh value and drop out of the S_{r,n} portion
            Err(_) if approx => continue,
            Err(e) => return Err(e),
        }
    }
    Ok(SurfaceQuad { rad, points })
}

/// Max edge among tets the sphere of radius `rad` passes strictly through.
/// Cells touching gamma vertices are exempt: the ray-scaled shells stretch
/// across the steep sleeve boundary by construction, and the trace they
/// carry vanishes there.
fn local_strict_edge(mesh: &TetMesh, rad: f64) -> f64 {
    let mut worst: f64 = 0.0;
    for (t, tet) in mesh.tets.iter().enumerate() {
        if mesh.tet_rmin[t] < rad * (1.0 - 1e-12) && rad * (1.0 + 1e-12) < mesh.tet_rmax[t] {
            if tet.iter().any(|&v| mesh.squeezed_vertex[v as usize]) {
                continue;
            }
            worst = worst.max(mesh.tet_edge[t]);
        }
    }
    worst
}

// ---------------------------------------------------------------------------
// H1 distance

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct L2H1 {
    pub l2: f64,
    pub h1: f64,
}

/// L2 and H1 distances between two fields over `B_region`, by quadrature on
/// the finer of the two meshes; the other field is interpolated there and
/// extended by zero outside its own domain.
pub fn h1_distance(u: &ScalarField, v: &ScalarField, region_radius: f64) -> Result<L2H1> {
    let (fine, coarse) = if u.mesh.mesh_size <= v.mesh.mesh_size { (u, v) } else { (v, u) };
    if region_radius > fine.mesh.radius() * (1.0 + 1e-9)
        || region_radius > coarse.mesh.radius() * (1.0 + 1e-9)
    {
        return Err(Error::Domain(format!(
            "region radius {region_radius} exceeds a mesh radius ({}, {})",
            fine.mesh.radius(),
            coarse.mesh.radius()
        )));
    }
    let same_mesh = Arc::ptr_eq(&fine.mesh, &coarse.mesh);
    let grads_fine: Vec<Vec3> = (0..fine.mesh.tets.len()).map(|t| fine.grad_in_tet(t)).collect();
    let grads_coarse: Vec<Vec3> =
        (0..coarse.mesh.tets.len()).map(|t| coarse.grad_in_tet(t)).collect();
    let l2_sq = integrate_ball(&fine.mesh, region_radius, VolumeRule::Gradient, |x, t| {
        let a = eval_at(fine, t, x);
        let b = if same_mesh { eval_at(coarse, t, x) } else { coarse.eval_extended(x) };
        (a - b) * (a - b)
    });
    let h1_extra = integrate_ball(&fine.mesh, region_radius, VolumeRule::Gradient, |x, t| {
        let ga = grads_fine[t];
        let gb = if same_mesh {
            grads_coarse[t]
        } else {
            match coarse.mesh.try_locate_extended(x) {
                Some((tc, _)) => grads_coarse[tc],
                None => [0.0; 3],
            }
        };
        let d = geo::sub(ga, gb);
        geo::dot(d, d)
    });
    Ok(L2H1 { l2: l2_sq.max(0.0).sqrt(), h1: (l2_sq + h1_extra).max(0.0).sqrt() })
}

fn eval_at(field: &ScalarField, tet: usize, x: Vec3) -> f64 {
    let bary = field.mesh.barycentric(tet, x);
    field.value_in_tet(tet, bary)
}
