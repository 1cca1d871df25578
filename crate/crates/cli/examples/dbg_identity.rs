use cracklab::audit::{gamma_term, pohozaev_residual, PohozaevMode};
use cracklab::crack::CrackSpec;
use cracklab::fem::{assemble_solve, slit_harmonic};
use cracklab::potential::PotentialSpec;
use cracklab::straighten::build_bundle;
use cracklab::tetmesh::{build_approx_domain, MeshParams};

fn main() {
    let bundle = build_bundle(&CrackSpec::radial_quadratic(0.1, 2, 0.5).unwrap()).unwrap();
    let f = PotentialSpec::a1(3.0, 1.0).unwrap();
    for (h, n) in [(0.1f64, 256u32), (0.0625, 256), (0.0625, 1024), (0.05, 1024)] {
        let mut params = MeshParams::new(0.5, h).with_pins(&[0.1, 0.15, 0.2, 0.35]);
        params.pole_levels = 3;
        params.radial_levels = 3;
        let mesh = match build_approx_domain(&params, n, 2.0) { Ok(m) => m, Err(e) => { println!("h={h} n={n}: {e}"); continue; } };
        let data_bundle = bundle.clone();
        let data = move |x: [f64; 3]| slit_harmonic(data_bundle.f_map(x));
        let (u, rep0) = assemble_solve(&mesh, &bundle, &f, &data).unwrap();
        for (rid, delta) in [(0.35, 0.1)] {
            let rep = match pohozaev_residual(&u, &bundle, &f, rid, PohozaevMode::ApproxIdentity { delta }, 1.0) { Ok(r) => r, Err(e) => { println!("h={h} n={n} r={rid}: ERR {e}"); continue; } };
            let g = gamma_term(&u, &bundle, rid).unwrap();
            println!(
                "h={h} n={n} ({} tets, {} iters): r={rid} d={delta}: lhs {:+.5} rhs {:+.5} |diff| {:.2e} tol {:.2e} gamma {:+.3e} {}",
                mesh.tets.len(), rep0.iterations, rep.lhs, rep.rhs, (rep.lhs - rep.rhs).abs(), rep.tolerance, g,
                if rep.pass { "ok" } else { "FAIL" }
            );
        }
    }
}
