use cracklab::crack::CrackSpec;
use cracklab::fem::*;
use cracklab::potential::PotentialSpec;
use cracklab::straighten::build_bundle;
use cracklab::tetmesh::*;
use std::time::Instant;

fn main() {
    let t0 = Instant::now();
    let params = MeshParams::new(0.5, 0.05).with_pins(&[0.1, 0.15, 0.2, 0.25, 0.3, 0.35, 0.4]);
    let mesh = build_slit_ball(&params).unwrap();
    println!("mesh: {} vertices, {} tets, built in {:?}", mesh.n_vertices(), mesh.tets.len(), t0.elapsed());

    let bundle = build_bundle(&CrackSpec::radial_quadratic(0.1, 2, 0.5).unwrap()).unwrap();
    let f = PotentialSpec::a1(3.0, 1.0).unwrap();
    let t1 = Instant::now();
    let data = |x: [f64; 3]| slit_harmonic(bundle_map(&bundle, x));
    let (sol, report) = assemble_solve(&mesh, &bundle, &f, &data).unwrap();
    println!(
        "solve: {} unknowns, {} iters, res {:.2e}, in {:?}",
        report.unknowns, report.iterations, report.relative_residual, t1.elapsed()
    );
    let t2 = Instant::now();
    let quad = surface_quad(&mesh, 0.2).unwrap();
    let h: f64 = quad.integrate(|p| {
        let v = sol.value_in_tet(p.tet, p.bary);
        bundle.mu(p.x) * v * v
    }) / 0.2f64.powi(2);
    println!("H(0.2) = {h:.6} (surface quad {} pts in {:?})", quad.points.len(), t2.elapsed());
}

fn bundle_map(b: &cracklab::straighten::CoefficientBundle, x: [f64; 3]) -> [f64; 3] {
    b.f_map(x)
}
