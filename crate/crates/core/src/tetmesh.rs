//! Conforming tetrahedral meshes of the slit ball `B_r \ {x2 >= 0, x3 = 0}`
//! and of the approximating domains `B_r inter {x2 < f~_n(x3)}`.
//!
//! Both domains are star-shaped with respect to the origin (the slit is
//! measure-zero and resolved as interior faces), so the mesh is built as
//! radial shells over a direction sphere-mesh whose cut meridian conforms to
//! the slit. Prisms between shells split into tetrahedra with the
//! minimum-global-index diagonal rule, which makes shared quad faces agree
//! across neighbors. Grading is geometric: dyadic refinement of the polar
//! direction bands sharpens resolution transverse to the crack edge, and
//! dyadic refinement of the innermost radial cells resolves the origin.

use std::collections::HashMap;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::geo::{self, Vec3};
use crate::profile::approx_profile;
use crate::sphere::{build_sphere_mesh_custom, SphereMesh};

#[derive(Debug, Clone, PartialEq)]
pub enum DomainKind {
    SlitBall { r: f64 },
    ApproxDomain { r: f64, n: u32, alpha: f64 },
}

impl DomainKind {
    pub fn radius(&self) -> f64 {
        match self {
            DomainKind::SlitBall { r } => *r,
            DomainKind::ApproxDomain { r, .. } => *r,
        }
    }
}

/// Mesh construction knobs beyond the spec'd `(r, h)` signature. The radial
/// grid absorbs pinned radii so that profile and blow-up integrals see exact
/// shell interfaces.
#[derive(Debug, Clone)]
pub struct MeshParams {
    pub r: f64,
    pub h: f64,
    /// Dyadic refinement levels of the polar direction bands.
    pub pole_levels: usize,
    /// Dyadic refinement levels of the innermost radial cell.
    pub radial_levels: usize,
    /// Radii forced to coincide with shell interfaces.
    pub pinned_radii: Vec<f64>,
    /// Dyadic refinement levels of the azimuthal cells flanking the cut
    /// meridian. `None` picks the level automatically (0 for slit balls,
    /// enough to resolve the sleeve strip for approximating domains).
    /// Domain comparisons across different n should pin a common value so
    /// all meshes share one direction mesh.
    pub cut_levels: Option<usize>,
    /// Dyadic refinement levels of the outermost radial cell; approximating
    /// domains use them to resolve the boundary layer along gamma.
    pub boundary_levels: usize,
}

impl MeshParams {
    pub fn new(r: f64, h: f64) -> Self {
        MeshParams {
            r,
            h,
            pole_levels: 3,
            radial_levels: 3,
            pinned_radii: Vec::new(),
            cut_levels: None,
            boundary_levels: 0,
        }
    }

    pub fn with_pins(mut self, pins: &[f64]) -> Self {
        self.pinned_radii = pins.to_vec();
        self
    }

    pub fn with_cut_levels(mut self, levels: usize) -> Self {
        self.cut_levels = Some(levels);
        self
    }
}

/// Azimuthal refinement depth that resolves the excised sleeve of the
/// approximating domain `B_{r,n}` at base direction resolution `0.75 h / r`.
pub fn suggested_cut_levels(r: f64, h: f64, n: u32, alpha: f64) -> usize {
    let h_ang = 0.75 * h / r;
    // tail crossing at radius r needs |theta_3| < r^(alpha-1) / sqrt(n)
    let strip = (r.powf(alpha - 1.0) / (n as f64).sqrt()).min(0.5);
    let mut levels = 0usize;
    let mut cell = h_ang;
    while cell > 0.125 * strip && levels < 14 {
        cell *= 0.5;
        levels += 1;
    }
    levels
}

#[derive(Debug)]
pub struct TetMesh {
    pub vertices: Vec<Vec3>,
    pub tets: Vec<[u32; 4]>,
    /// Interior faces lying in the closed slit.
    pub crack_faces: Vec<[u32; 3]>,
    /// Boundary faces whose vertices all lie on the outer sphere.
    pub sphere_faces: Vec<[u32; 3]>,
    /// Boundary faces whose vertices all lie on the approximating surface.
    pub gamma_faces: Vec<[u32; 3]>,
    pub crack_vertex: Vec<bool>,
    /// True at outer-shell vertices (sphere or gamma part of the boundary).
    pub outer_vertex: Vec<bool>,
    /// True at outer-shell vertices that lie on gamma (x2 = f~_n(x3)).
    pub gamma_vertex: Vec<bool>,
    /// True at vertices whose ray hits the approximating surface; their
    /// whole column is radially squeezed by the scaling `t_k R_b`.
    pub squeezed_vertex: Vec<bool>,
    pub mesh_size: f64,
    pub domain_kind: DomainKind,
    /// Direction mesh; its vertices are the ray directions of the shells.
    pub dirs: SphereMesh,
    /// Shell radii of the reference ball, 0 = rho_0 < ... < rho_K = r.
    pub radial: Vec<f64>,
    /// Outer radius per direction (= r on the sphere part, < r on gamma).
    pub boundary_radius: Vec<f64>,
    /// Per-tet min/max vertex radius, for radius classification.
    pub tet_rmin: Vec<f64>,
    pub tet_rmax: Vec<f64>,
    /// Per-tet longest edge.
    pub tet_edge: Vec<f64>,
}

/// Spec'd constructor for the slit ball.
pub fn mesh_slit_ball(r: f64, h: f64) -> Result<Arc<TetMesh>> {
    build_slit_ball(&MeshParams::new(r, h))
}

pub fn build_slit_ball(params: &MeshParams) -> Result<Arc<TetMesh>> {
    check_params(params)?;
    Ok(Arc::new(build(params, DomainKind::SlitBall { r: params.r })))
}

/// Spec'd constructor for the approximating domain `B_{r,n}`.
///
/// Requires `n^{1/(2 alpha)} > 1/r` so that gamma is nonempty, and
/// `h <= f_n(0)/2` so the excised sleeve spans at least two mesh cells.
pub fn mesh_approx_domain(r: f64, n: u32, alpha: f64, h: f64) -> Result<Arc<TetMesh>> {
    build_approx_domain(&MeshParams::new(r, h), n, alpha)
}

pub fn build_approx_domain(params: &MeshParams, n: u32, alpha: f64) -> Result<Arc<TetMesh>> {
    check_params(params)?;
    let tip = approx_profile(n, alpha, 0.0)?.value; // n^{-1/(2 alpha)}
    if tip >= params.r {
        return Err(Error::Precondition(format!(
            "approximating surface is empty inside the ball: need n^(1/(2 alpha)) > 1/r, got {:.6} <= {:.6}",
            1.0 / tip,
            1.0 / params.r
        )));
    }
    if params.h > tip / 2.0 {
        return Err(Error::Precondition(format!(
            "mesh size h = {} too coarse for the excised sleeve: need h <= f_n(0)/2 = {:.6}",
            params.h,
            tip / 2.0
        )));
    }
    let mut params = params.clone();
    if params.boundary_levels == 0 {
        // the solution develops a near-sqrt layer along the sleeve ridge;
        // graded outer shells resolve its radial direction
        params.boundary_levels = 3;
    }
    Ok(Arc::new(build(&params, DomainKind::ApproxDomain { r: params.r, n, alpha })))
}

fn check_params(params: &MeshParams) -> Result<()> {
    if !(params.r > 0.0) {
        return Err(Error::Meshing("radius must be positive".into()));
    }
    if !(params.h > 0.0 && params.h <= params.r / 4.0) {
        return Err(Error::Meshing(format!(
            "mesh size h = {} must satisfy 0 < h <= r/4 = {}",
            params.h,
            params.r / 4.0
        )));
    }
    Ok(())
}

/// Outer radius of the domain along direction theta.
fn boundary_radius_along(kind: &DomainKind, theta: Vec3) -> f64 {
    match kind {
        DomainKind::SlitBall { r } => *r,
        DomainKind::ApproxDomain { r, n, alpha } => {
            if theta[1] <= 0.0 {
                return *r;
            }
            let zeta = |s: f64| -> f64 {
                s * theta[1] - approx_profile(*n, *alpha, (s * theta[2]).abs()).unwrap().value
            };
            if zeta(*r) <= 0.0 {
                return *r;
            }
            // unique crossing: linear grows through a concave positive bound
            let mut lo = 0.0;
            let mut hi = *r;
            for _ in 0..100 {
                let mid = 0.5 * (lo + hi);
                if zeta(mid) <= 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            0.5 * (lo + hi)
        }
    }
}

fn radial_grid(params: &MeshParams) -> Vec<f64> {
    let r = params.r;
    let base_step = 0.75 * params.h;
    // geometric grading toward the origin: shell width <= 0.2 rho keeps the
    // relative resolution of interior spheres (and of blow-up rescalings)
    // uniform in the radius; the dyadic floor bounds the shell count
    let floor = base_step / (1u32 << params.radial_levels) as f64;
    let mut grid: Vec<f64> = vec![r];
    let mut rho = r;
    // graded boundary-layer shells against the outer surface
    for level in 1..=params.boundary_levels {
        grid.push(r - base_step / (1u32 << level) as f64);
    }
    while rho > floor * 1.5 {
        rho -= base_step.min(0.2 * rho);
        grid.push(rho.max(0.0));
    }
    grid.push(0.0);
    for &pin in &params.pinned_radii {
        if pin > 0.0 && pin < r {
            grid.push(pin);
        }
    }
    grid.sort_by(|a, b| a.partial_cmp(b).unwrap());
    grid.dedup_by(|a, b| (*a - *b).abs() < 1e-6 * r);
    grid
}

fn build(params: &MeshParams, kind: DomainKind) -> TetMesh {
    let h_ang = 0.75 * params.h / params.r;
    let cut_levels = params.cut_levels.unwrap_or(match kind {
        DomainKind::SlitBall { .. } => 0,
        DomainKind::ApproxDomain { r, n, alpha } => suggested_cut_levels(r, params.h, n, alpha),
    });
    let dirs = build_sphere_mesh_custom(h_ang, params.pole_levels, cut_levels);
    let radial = radial_grid(params);
    let n_dir = dirs.n_vertices();
    let n_shell = radial.len() - 1; // shells 1..=n_shell

    let boundary_radius: Vec<f64> =
        dirs.vertices.iter().map(|&th| boundary_radius_along(&kind, th)).collect();

    // vertices: origin, then shell-major layout
    let mut vertices = Vec::with_capacity(1 + n_dir * n_shell);
    vertices.push([0.0, 0.0, 0.0]);
    for k in 1..=n_shell {
        let t = radial[k] / params.r;
        for (i, th) in dirs.vertices.iter().enumerate() {
            vertices.push(geo::scale(*th, t * boundary_radius[i]));
        }
    }
    let vid = |k: usize, i: usize| -> u32 {
        debug_assert!(k >= 1);
        (1 + (k - 1) * n_dir + i) as u32
    };

    // tets: innermost shell is a fan from the origin, outer shells are
    // prisms split by the minimum-index diagonal rule
    let n_tri = dirs.triangles.len();
    let mut tets: Vec<[u32; 4]> = Vec::with_capacity(n_tri * (1 + 3 * (n_shell - 1)));
    for tri in &dirs.triangles {
        tets.push([0, vid(1, tri[0] as usize), vid(1, tri[1] as usize), vid(1, tri[2] as usize)]);
    }
    for k in 2..=n_shell {
        for tri in &dirs.triangles {
            let bottom =
                [vid(k - 1, tri[0] as usize), vid(k - 1, tri[1] as usize), vid(k - 1, tri[2] as usize)];
            let top = [vid(k, tri[0] as usize), vid(k, tri[1] as usize), vid(k, tri[2] as usize)];
            split_prism(bottom, top, &mut tets);
        }
    }
    // positive orientation
    for t in &mut tets {
        let vol = geo::tet_signed_volume(
            vertices[t[0] as usize],
            vertices[t[1] as usize],
            vertices[t[2] as usize],
            vertices[t[3] as usize],
        );
        if vol < 0.0 {
            t.swap(2, 3);
        }
    }

    // vertex flags
    let r = params.r;
    let slit_ball = matches!(kind, DomainKind::SlitBall { .. });
    let mut crack_vertex = vec![false; vertices.len()];
    let mut outer_vertex = vec![false; vertices.len()];
    let mut gamma_vertex = vec![false; vertices.len()];
    if slit_ball {
        for (v, &p) in vertices.iter().enumerate() {
            crack_vertex[v] = p[2].abs() <= 1e-12 && p[1] >= -1e-12;
        }
    }
    let mut squeezed_vertex = vec![false; vertices.len()];
    for i in 0..n_dir {
        let v = vid(n_shell, i) as usize;
        outer_vertex[v] = true;
        gamma_vertex[v] = boundary_radius[i] < r * (1.0 - 1e-12);
        if gamma_vertex[v] {
            for k in 1..=n_shell {
                squeezed_vertex[vid(k, i) as usize] = true;
            }
        }
    }

    // face extraction: interior crack faces and classified boundary faces
    let mut face_count: HashMap<[u32; 3], u8> = HashMap::new();
    for t in &tets {
        for f in tet_faces(t) {
            *face_count.entry(sorted3(f)).or_insert(0) += 1;
        }
    }
    let mut crack_faces = Vec::new();
    let mut sphere_faces = Vec::new();
    let mut gamma_faces = Vec::new();
    for (&f, &count) in &face_count {
        let pts = [vertices[f[0] as usize], vertices[f[1] as usize], vertices[f[2] as usize]];
        if count == 2 {
            if slit_ball
                && pts.iter().all(|p| p[2].abs() <= 1e-12)
                && pts.iter().all(|p| p[1] >= -1e-12)
            {
                crack_faces.push(f);
            }
        } else {
            let all_outer = f.iter().all(|&v| outer_vertex[v as usize]);
            if all_outer && f.iter().all(|&v| gamma_vertex[v as usize]) {
                gamma_faces.push(f);
            } else if all_outer && f.iter().all(|&v| !gamma_vertex[v as usize]) {
                sphere_faces.push(f);
            }
            // mixed outer faces (gamma-sphere transition band) stay
            // unclassified; vertexwise data assignment still covers them
        }
    }
    crack_faces.sort_unstable();
    sphere_faces.sort_unstable();
    gamma_faces.sort_unstable();

    let mut tet_rmin = Vec::with_capacity(tets.len());
    let mut tet_rmax = Vec::with_capacity(tets.len());
    let mut tet_edge = Vec::with_capacity(tets.len());
    for t in &tets {
        let ps = [
            vertices[t[0] as usize],
            vertices[t[1] as usize],
            vertices[t[2] as usize],
            vertices[t[3] as usize],
        ];
        let radii = ps.map(geo::norm);
        tet_rmin.push(radii.iter().cloned().fold(f64::INFINITY, f64::min));
        tet_rmax.push(radii.iter().cloned().fold(0.0, f64::max));
        let mut e: f64 = 0.0;
        for a in 0..4 {
            for b in a + 1..4 {
                e = e.max(geo::norm(geo::sub(ps[a], ps[b])));
            }
        }
        tet_edge.push(e);
    }

    TetMesh {
        vertices,
        tets,
        crack_faces,
        sphere_faces,
        gamma_faces,
        crack_vertex,
        outer_vertex,
        gamma_vertex,
        squeezed_vertex,
        mesh_size: params.h,
        domain_kind: kind,
        dirs,
        radial,
        boundary_radius,
        tet_rmin,
        tet_rmax,
        tet_edge,
    }
}

fn tet_faces(t: &[u32; 4]) -> [[u32; 3]; 4] {
    [
        [t[0], t[1], t[2]],
        [t[0], t[1], t[3]],
        [t[0], t[2], t[3]],
        [t[1], t[2], t[3]],
    ]
}

fn sorted3(mut f: [u32; 3]) -> [u32; 3] {
    f.sort_unstable();
    f
}

/// Split the prism (bottom b0 b1 b2, top t0 t1 t2, ti above bi) into three
/// tetrahedra. Every quad face receives the diagonal through its
/// minimum-index corner, so adjacent prisms agree on shared faces.
fn split_prism(bottom: [u32; 3], top: [u32; 3], out: &mut Vec<[u32; 4]>) {
    let mut b = bottom;
    let mut t = top;
    // rotate/flip the minimum global index to position b0
    let all = [b[0], b[1], b[2], t[0], t[1], t[2]];
    let argmin = (0..6).min_by_key(|&i| all[i]).unwrap();
    match argmin {
        0 => {}
        1 => {
            b = [bottom[1], bottom[2], bottom[0]];
            t = [top[1], top[2], top[0]];
        }
        2 => {
            b = [bottom[2], bottom[0], bottom[1]];
            t = [top[2], top[0], top[1]];
        }
        3 => {
            b = [top[0], top[2], top[1]];
            t = [bottom[0], bottom[2], bottom[1]];
        }
        4 => {
            b = [top[1], top[0], top[2]];
            t = [bottom[1], bottom[0], bottom[2]];
        }
        _ => {
            b = [top[2], top[1], top[0]];
            t = [bottom[2], bottom[1], bottom[0]];
        }
    }
    // quad (b1, b2, t2, t1): diagonal through its minimum corner
    if b[1].min(t[2]) < b[2].min(t[1]) {
        out.push([b[0], b[1], b[2], t[2]]);
        out.push([b[0], b[1], t[2], t[1]]);
        out.push([b[0], t[1], t[2], t[0]]);
    } else {
        out.push([b[0], b[1], b[2], t[1]]);
        out.push([b[0], t[1], b[2], t[2]]);
        out.push([b[0], t[1], t[2], t[0]]);
    }
}

impl TetMesh {
    pub fn radius(&self) -> f64 {
        self.domain_kind.radius()
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn tet_volume(&self, t: usize) -> f64 {
        let [a, b, c, d] = self.tets[t];
        geo::tet_signed_volume(
            self.vertices[a as usize],
            self.vertices[b as usize],
            self.vertices[c as usize],
            self.vertices[d as usize],
        )
    }

    pub fn total_volume(&self) -> f64 {
        (0..self.tets.len()).map(|t| self.tet_volume(t)).sum()
    }

    pub fn tet_points(&self, t: usize) -> [Vec3; 4] {
        let [a, b, c, d] = self.tets[t];
        [
            self.vertices[a as usize],
            self.vertices[b as usize],
            self.vertices[c as usize],
            self.vertices[d as usize],
        ]
    }

    /// Constant gradients of the four P1 shape functions on tet `t`.
    pub fn shape_gradients(&self, t: usize) -> [Vec3; 4] {
        let p = self.tet_points(t);
        let m = [
            [p[1][0] - p[0][0], p[2][0] - p[0][0], p[3][0] - p[0][0]],
            [p[1][1] - p[0][1], p[2][1] - p[0][1], p[3][1] - p[0][1]],
            [p[1][2] - p[0][2], p[2][2] - p[0][2], p[3][2] - p[0][2]],
        ];
        // rows of the inverse are the gradients of lambda_1..3
        let inv = invert3(&m);
        let g1 = inv[0];
        let g2 = inv[1];
        let g3 = inv[2];
        let g0 = [-g1[0] - g2[0] - g3[0], -g1[1] - g2[1] - g3[1], -g1[2] - g2[2] - g3[2]];
        [g0, g1, g2, g3]
    }

    /// Barycentric coordinates of x in tet t.
    pub fn barycentric(&self, t: usize, x: Vec3) -> [f64; 4] {
        let p = self.tet_points(t);
        let m = [
            [p[1][0] - p[0][0], p[2][0] - p[0][0], p[3][0] - p[0][0]],
            [p[1][1] - p[0][1], p[2][1] - p[0][1], p[3][1] - p[0][1]],
            [p[1][2] - p[0][2], p[2][2] - p[0][2], p[3][2] - p[0][2]],
        ];
        let rhs = geo::sub(x, p[0]);
        match geo::solve3(&m, rhs) {
            Some(l) => [1.0 - l[0] - l[1] - l[2], l[0], l[1], l[2]],
            None => [f64::NEG_INFINITY; 4],
        }
    }

    fn shell_count(&self) -> usize {
        self.radial.len() - 1
    }

    /// Tet indices belonging to (direction triangle `tri`, shell `k`).
    fn cell_tets(&self, tri: usize, k: usize) -> std::ops::Range<usize> {
        let n_tri = self.dirs.triangles.len();
        if k == 1 {
            tri..tri + 1
        } else {
            let start = n_tri + (k - 2) * 3 * n_tri + 3 * tri;
            start..start + 3
        }
    }

    /// Interpolated outer radius along an arbitrary direction.
    pub fn outer_radius_along(&self, theta: Vec3) -> f64 {
        match self.dirs.locate(theta) {
            Ok((tri, bary)) => {
                let [a, b, c] = self.dirs.triangles[tri];
                bary[0] * self.boundary_radius[a as usize]
                    + bary[1] * self.boundary_radius[b as usize]
                    + bary[2] * self.boundary_radius[c as usize]
            }
            Err(_) => self.radius(),
        }
    }

    /// Locate the tet containing x; returns the tet index and barycentric
    /// coordinates. Points up to a face-sagitta outside the chordal boundary
    /// attach to the nearest boundary tet (linear extrapolation). Ties on
    /// shared faces resolve to the lowest tet index (the inner shell).
    pub fn locate(&self, x: Vec3) -> Result<(usize, [f64; 4])> {
        let rho = geo::norm(x);
        if rho < 1e-14 * self.radius() {
            return Ok((0, self.barycentric(0, x)));
        }
        let theta = geo::scale(x, 1.0 / rho);
        let (tri0, dbary) = self.dirs.locate(theta)?;
        let [da, db, dc] = self.dirs.triangles[tri0];
        let rb = dbary[0] * self.boundary_radius[da as usize]
            + dbary[1] * self.boundary_radius[db as usize]
            + dbary[2] * self.boundary_radius[dc as usize];
        let t_ref = (rho / rb * self.radius()).min(self.radius());
        let k0 = match self.radial.binary_search_by(|p| p.partial_cmp(&t_ref).unwrap()) {
            Ok(i) => i.clamp(1, self.shell_count()),
            Err(i) => i.clamp(1, self.shell_count()),
        };

        let mut best: Option<(usize, [f64; 4], f64)> = None;
        let consider = |tet: usize, best: &mut Option<(usize, [f64; 4], f64)>| {
            let bary = self.barycentric(tet, x);
            let min_b = bary.iter().cloned().fold(f64::INFINITY, f64::min);
            if best.is_none() || min_b > best.unwrap().2 + 1e-14 {
                *best = Some((tet, bary, min_b));
            }
        };
        // expanding search around the guess; pass 1 covers the located
        // direction triangle, pass 2 adds vertex-sharing neighbors
        for pass in 0..2 {
            let tris: Vec<usize> = if pass == 0 {
                vec![tri0]
            } else {
                let verts = self.dirs.triangles[tri0];
                (0..self.dirs.triangles.len())
                    .filter(|&t| t != tri0 && self.dirs.triangles[t].iter().any(|v| verts.contains(v)))
                    .collect()
            };
            for dk in [0isize, -1, 1, -2, 2, -3, 3, -4, 4] {
                let k = k0 as isize + dk;
                if k < 1 || k > self.shell_count() as isize {
                    continue;
                }
                for &tri in &tris {
                    for tet in self.cell_tets(tri, k as usize) {
                        consider(tet, &mut best);
                    }
                }
            }
            if let Some((_, _, min_b)) = best {
                if min_b > -1e-12 {
                    break;
                }
            }
        }
        match best {
            Some((t, bary, min_b)) if min_b > -0.2 => Ok((t, bary)),
            _ => Err(Error::Geometry(format!(
                "point {x:?} not located in the mesh (best barycentric defect {:?})",
                best.map(|b| b.2)
            ))),
        }
    }

    /// Locate, returning None for points beyond the outer boundary (used for
    /// extension by zero outside approximating domains).
    pub fn try_locate_extended(&self, x: Vec3) -> Option<(usize, [f64; 4])> {
        let rho = geo::norm(x);
        if rho > 1e-14 {
            let theta = geo::scale(x, 1.0 / rho);
            let rb = self.outer_radius_along(theta);
            if rho > rb + 0.25 * self.mesh_size {
                return None;
            }
        }
        self.locate(x).ok()
    }

    pub fn max_edge_length(&self) -> f64 {
        self.tet_edge.iter().cloned().fold(0.0, f64::max)
    }

    /// Largest tet edge among tets whose радial span contains `rad`; the
    /// local resolution scale used by surface-quadrature preconditions.
    pub fn local_edge_at_radius(&self, rad: f64) -> f64 {
        let mut worst: f64 = 0.0;
        for t in 0..self.tets.len() {
            if self.tet_rmin[t] <= rad && rad <= self.tet_rmax[t] {
                worst = worst.max(self.tet_edge[t]);
            }
        }
        worst
    }
}

fn invert3(m: &geo::Mat3) -> geo::Mat3 {
    let det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
    let inv_det = 1.0 / det;
    [
        [
            (m[1][1] * m[2][2] - m[1][2] * m[2][1]) * inv_det,
            (m[0][2] * m[2][1] - m[0][1] * m[2][2]) * inv_det,
            (m[0][1] * m[1][2] - m[0][2] * m[1][1]) * inv_det,
        ],
        [
            (m[1][2] * m[2][0] - m[1][0] * m[2][2]) * inv_det,
            (m[0][0] * m[2][2] - m[0][2] * m[2][0]) * inv_det,
            (m[0][2] * m[1][0] - m[0][0] * m[1][2]) * inv_det,
        ],
        [
            (m[1][0] * m[2][1] - m[1][1] * m[2][0]) * inv_det,
            (m[0][1] * m[2][0] - m[0][0] * m[2][1]) * inv_det,
            (m[0][0] * m[1][1] - m[0][1] * m[1][0]) * inv_det,
        ],
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::approx_profile_even;

    #[test]
    fn slit_ball_volume_and_conformity() {
        let mesh = mesh_slit_ball(0.5, 0.1).unwrap();
        let exact = 4.0 / 3.0 * std::f64::consts::PI * 0.5f64.powi(3);
        let vol = mesh.total_volume();
        assert!(
            (vol - exact).abs() < 0.03 * exact,
            "volume {vol} vs {exact} ({:.2}%)",
            (vol / exact - 1.0) * 100.0
        );
        let h = mesh.mesh_size;
        for t in 0..mesh.tets.len() {
            assert!(mesh.tet_volume(t) >= 1e-12 * h * h * h, "tet {t} degenerate");
        }
        for v in &mesh.vertices {
            assert!(geo::norm(*v) <= 0.5 * (1.0 + 1e-10));
        }
        assert!(!mesh.crack_faces.is_empty());
        for f in &mesh.crack_faces {
            for &v in f {
                let p = mesh.vertices[v as usize];
                assert!(p[2].abs() <= 1e-12);
                assert!(p[1] >= -1e-12);
                assert!(mesh.crack_vertex[v as usize]);
            }
        }
        assert!(mesh.max_edge_length() <= 1.5 * h, "max edge {}", mesh.max_edge_length());
    }

    #[test]
    fn boundary_faces_close_the_surface() {
        let mesh = mesh_slit_ball(0.4, 0.1).unwrap();
        let mut area = 0.0;
        for f in &mesh.sphere_faces {
            let p0 = mesh.vertices[f[0] as usize];
            let p1 = mesh.vertices[f[1] as usize];
            let p2 = mesh.vertices[f[2] as usize];
            area += 0.5 * geo::norm(geo::cross(geo::sub(p1, p0), geo::sub(p2, p0)));
        }
        let exact = 4.0 * std::f64::consts::PI * 0.4f64 * 0.4;
        assert!((area - exact).abs() < 0.03 * exact, "area {area} vs {exact}");
        assert!(mesh.gamma_faces.is_empty());
    }

    #[test]
    fn refinement_scales_tet_count() {
        let coarse = mesh_slit_ball(0.5, 0.1).unwrap();
        let fine = mesh_slit_ball(0.5, 0.05).unwrap();
        let ratio = fine.tets.len() as f64 / coarse.tets.len() as f64;
        assert!((4.0..=16.0).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn locate_reproduces_linear_fields() {
        let mesh = mesh_slit_ball(0.5, 0.125).unwrap();
        let lin = |p: Vec3| 1.0 + 0.3 * p[0] - 0.7 * p[1] + 0.2 * p[2];
        let nodal: Vec<f64> = mesh.vertices.iter().map(|p| lin(*p)).collect();
        let golden = std::f64::consts::PI * (3.0 - 5.0f64.sqrt());
        for i in 0..500 {
            let t = (i as f64 + 0.5) / 500.0;
            let rad = 0.49 * t.cbrt();
            let z = 1.0 - 2.0 * t;
            let s = (1.0 - z * z).max(0.0).sqrt();
            let phi = golden * i as f64;
            let x = [rad * z, rad * s * phi.cos(), rad * s * phi.sin()];
            let (tet, bary) = mesh.locate(x).unwrap();
            let vals = mesh.tets[tet].map(|v| nodal[v as usize]);
            let got: f64 = (0..4).map(|j| bary[j] * vals[j]).sum();
            assert!((got - lin(x)).abs() < 1e-9, "at {x:?}: {got} vs {}", lin(x));
        }
        // points on the true sphere attach by extrapolation
        assert!(mesh.locate([0.0, -0.5, 0.0]).is_ok());
        assert!(mesh.locate([0.5, 0.0, 0.0]).is_ok());
    }

    #[test]
    fn approx_domain_geometry() {
        // r = 0.5: the excised sleeve volume is monotone decreasing across
        // n in {64, 256, 1024} (at smaller radii the n = 64 sleeve barely
        // fits inside the ball and the ordering genuinely breaks)
        let r = 0.5;
        let h = 0.08;
        // pin a common direction mesh so volumes compare across n
        let levels = suggested_cut_levels(r, h, 1024, 2.0);
        let ball = build_slit_ball(&MeshParams::new(r, h).with_cut_levels(levels)).unwrap();
        let mut prev_vol = 0.0;
        for n in [64u32, 256, 1024] {
            let mesh =
                build_approx_domain(&MeshParams::new(r, h).with_cut_levels(levels), n, 2.0)
                    .unwrap();
            let vol = mesh.total_volume();
            assert!(vol < ball.total_volume(), "n={n}: domain not a strict subset");
            assert!(vol > prev_vol, "n={n}: volume not increasing");
            prev_vol = vol;
            assert!(!mesh.gamma_faces.is_empty());
            for (v, &is_gamma) in mesh.gamma_vertex.iter().enumerate() {
                if is_gamma {
                    let p = mesh.vertices[v];
                    let want = approx_profile_even(n, 2.0, p[2]).unwrap().value;
                    assert!(
                        (p[1] - want).abs() <= 1e-10,
                        "n={n}, vertex {v}: x2 = {} vs profile {want}",
                        p[1]
                    );
                }
            }
        }
        // precondition failures: empty gamma, then under-resolved sleeve
        assert!(mesh_approx_domain(0.2, 256, 2.0, 0.04).is_err());
        assert!(mesh_approx_domain(0.5, 1024, 2.0, 0.0999).is_err());
    }

    #[test]
    fn extended_location_is_none_in_the_sleeve() {
        let mesh = mesh_approx_domain(0.4, 256, 2.0, 0.05).unwrap();
        assert!(mesh.try_locate_extended([0.0, 0.35, 0.0]).is_none());
        assert!(mesh.try_locate_extended([0.0, -0.2, 0.1]).is_some());
    }

    #[test]
    fn interior_faces_shared_twice() {
        let mesh = mesh_slit_ball(0.5, 0.125).unwrap();
        let mut count: HashMap<[u32; 3], u8> = HashMap::new();
        for t in &mesh.tets {
            for f in tet_faces(t) {
                *count.entry(sorted3(f)).or_insert(0) += 1;
            }
        }
        let boundary: usize = count.values().filter(|&&c| c == 1).count();
        assert!(count.values().all(|&c| c <= 2), "face shared more than twice");
        assert_eq!(boundary, mesh.sphere_faces.len());
        for f in &mesh.crack_faces {
            assert_eq!(count[&sorted3(*f)], 2);
        }
    }

    #[test]
    fn pinned_radii_become_shell_interfaces() {
        let params = MeshParams::new(0.5, 0.1).with_pins(&[0.2, 0.35]);
        let mesh = build_slit_ball(&params).unwrap();
        for pin in [0.2, 0.35] {
            assert!(
                mesh.radial.iter().any(|&r| (r - pin).abs() < 1e-9),
                "pin {pin} missing from radial grid {:?}",
                mesh.radial
            );
        }
    }
}
