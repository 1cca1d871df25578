//! The acceptance suite: every headline property of the laboratory as an
//! executable criterion with pinned tolerances. The `verify` subcommand and
//! the `acceptance` integration tests both run through this module, so CI
//! and the command line exercise exactly the same checks.

use std::sync::{Arc, OnceLock};
use std::time::Instant;

use cracklab::audit::{
    coercivity_audit, coercivity_probe_fields, gamma_term, hardy_residual, pohozaev_residual,
    probe_r0, rellich_necas_residual, star_shaped_upstairs, CoercivityConstants, PohozaevMode,
};
use cracklab::crack::CrackSpec;
use cracklab::fem::{
    assemble_solve, h1_distance, slit_harmonic, slit_harmonic_3half, ScalarField,
};
use cracklab::frequency::{
    blowup_convergence, estimate_limit, fourier_coefficient, frequency_profile,
    homogeneous_extension, upsilon_beta, SphericalBasis,
};
use cracklab::potential::{PotentialSpec, TriPoly};
use cracklab::sphere::{build_slit_sphere_mesh, solve_eigenpairs, surface_mass};
use cracklab::straighten::{build_bundle, CoefficientBundle};
use cracklab::tetmesh::{build_approx_domain, build_slit_ball, MeshParams, TetMesh};
use cracklab::{Error, Result};
use rand::Rng;
use rand::SeedableRng;

/// Sizes and knobs of the acceptance runs. Tolerances are fixed by the
/// criteria; `tol_scale` relaxes audit tolerances for coarse smoke runs.
#[derive(Debug, Clone)]
pub struct AcceptanceParams {
    /// (sphere mesh size, relative eigenvalue tolerance) pairs.
    pub sphere_runs: Vec<(f64, f64)>,
    pub spectrum_count: usize,
    pub mesh_r: f64,
    pub mesh_h: f64,
    pub grading_levels: usize,
    pub crack_c: f64,
    pub potential: PotentialSpec,
    pub freq_radii: Vec<f64>,
    pub lambdas: Vec<f64>,
    pub poho_radii: Vec<f64>,
    pub probe_radii: Vec<f64>,
    pub fourier_rs: Vec<f64>,
    pub approx_h: f64,
    pub approx_ns: Vec<u32>,
    pub alpha: f64,
    pub identity_n: u32,
    pub identity_radius: f64,
    pub identity_delta: f64,
    pub tol_scale: f64,
    pub seed: u64,
}

impl AcceptanceParams {
    /// The flagship configuration: the sizes and tolerances the criteria pin.
    pub fn flagship() -> Self {
        AcceptanceParams {
            sphere_runs: vec![(0.05, 0.05), (0.025, 0.025)],
            spectrum_count: 6,
            mesh_r: 0.5,
            mesh_h: 0.05,
            grading_levels: 3,
            crack_c: 0.1,
            potential: PotentialSpec::a1(3.0, 1.0).expect("flagship potential"),
            freq_radii: vec![0.1, 0.125, 0.15, 0.2, 0.25, 0.3, 0.35, 0.4],
            lambdas: vec![0.4, 0.2, 0.1],
            poho_radii: vec![0.15, 0.2, 0.25, 0.3, 0.35],
            probe_radii: vec![0.35, 0.3, 0.25, 0.2],
            fourier_rs: vec![0.2, 0.3, 0.4],
            approx_h: 0.0625,
            approx_ns: vec![64, 256, 1024],
            alpha: 2.0,
            identity_n: 1024,
            identity_radius: 0.35,
            identity_delta: 0.1,
            tol_scale: 1.0,
            seed: 20260808,
        }
    }

    /// Coarse variant for smoke and determinism runs.
    pub fn smoke() -> Self {
        AcceptanceParams {
            sphere_runs: vec![(0.15, 0.12)],
            spectrum_count: 3,
            mesh_h: 0.1,
            approx_h: 0.1,
            freq_radii: vec![0.15, 0.2, 0.25, 0.3, 0.35, 0.4],
            poho_radii: vec![0.2, 0.3],
            probe_radii: vec![0.3, 0.2],
            lambdas: vec![0.4, 0.2],
            approx_ns: vec![64, 256],
            identity_n: 256,
            tol_scale: 5.0,
            ..Self::flagship()
        }
    }

    fn pins(&self) -> Vec<f64> {
        let mut pins = self.freq_radii.clone();
        pins.extend_from_slice(&self.lambdas);
        pins.extend_from_slice(&self.poho_radii);
        pins.extend_from_slice(&self.probe_radii);
        pins.extend_from_slice(&self.fourier_rs);
        pins.push(self.identity_radius);
        pins.push(self.identity_delta);
        pins
    }

    fn mesh_params(&self) -> MeshParams {
        let mut p = MeshParams::new(self.mesh_r, self.mesh_h).with_pins(&self.pins());
        p.pole_levels = self.grading_levels;
        p.radial_levels = self.grading_levels;
        p
    }
}

/// Outcome of one criterion.
#[derive(Debug, Clone, serde::Serialize)]
pub struct CriterionOutcome {
    pub index: usize,
    pub label: String,
    pub pass: bool,
    pub seconds: f64,
    pub lines: Vec<String>,
}

impl CriterionOutcome {
    pub fn summary_line(&self) -> String {
        format!(
            "criterion {:>2} [{}] {} ({:.1}s)",
            self.index,
            if self.pass { "PASS" } else { "FAIL" },
            self.label,
            self.seconds
        )
    }
}

struct Check {
    pass: bool,
    lines: Vec<String>,
}

impl Check {
    fn new() -> Self {
        Check { pass: true, lines: Vec::new() }
    }
    fn require(&mut self, ok: bool, line: String) {
        self.pass &= ok;
        self.lines.push(format!("[{}] {line}", if ok { "ok" } else { "FAIL" }));
    }
    fn note(&mut self, line: String) {
        self.lines.push(format!("     {line}"));
    }
    fn outcome(self, index: usize, label: &str, start: Instant) -> CriterionOutcome {
        CriterionOutcome {
            index,
            label: label.into(),
            pass: self.pass,
            seconds: start.elapsed().as_secs_f64(),
            lines: self.lines,
        }
    }
}

/// Shared heavy artifacts, built lazily and reused across criteria.
pub struct Lab {
    pub params: AcceptanceParams,
    flat: OnceLock<Result<FlatCtx>>,
    flagship: OnceLock<Result<FlagshipCtx>>,
    reference: OnceLock<Result<Arc<TetMesh>>>,
}

pub struct FlatCtx {
    pub bundle: CoefficientBundle,
    pub mesh: Arc<TetMesh>,
}

pub struct FlagshipCtx {
    pub bundle: CoefficientBundle,
    pub potential: PotentialSpec,
    pub mesh: Arc<TetMesh>,
    pub solution: ScalarField,
    pub basis: SphericalBasis,
    pub r0: CoercivityConstants,
}

impl Lab {
    pub fn new(params: AcceptanceParams) -> Self {
        Lab {
            params,
            flat: OnceLock::new(),
            flagship: OnceLock::new(),
            reference: OnceLock::new(),
        }
    }

    pub fn flat(&self) -> Result<&FlatCtx> {
        self.flat
            .get_or_init(|| {
                let bundle = build_bundle(&CrackSpec::flat(2, self.params.mesh_r)?)?;
                let mesh = build_slit_ball(&self.params.mesh_params())?;
                Ok(FlatCtx { bundle, mesh })
            })
            .as_ref()
            .map_err(clone_err)
    }

    pub fn flagship(&self) -> Result<&FlagshipCtx> {
        self.flagship
            .get_or_init(|| {
                let p = &self.params;
                let crack = CrackSpec::radial_quadratic(p.crack_c, 2, p.mesh_r)?;
                let bundle = build_bundle(&crack)?;
                let mesh = build_slit_ball(&p.mesh_params())?;
                let data_bundle = bundle.clone();
                let data = move |x: [f64; 3]| slit_harmonic(bundle_map(&data_bundle, x));
                let (solution, _) = assemble_solve(&mesh, &bundle, &p.potential, &data)?;
                let sphere = Arc::new(mesh.dirs.clone());
                let pairs = solve_eigenpairs(&sphere, p.spectrum_count)?;
                let basis = SphericalBasis::new(sphere, pairs);
                let probes = coercivity_probe_fields(&mesh, p.seed, 5);
                let r0 = probe_r0(&bundle, &p.potential, &probes, &p.probe_radii, p.tol_scale)?;
                Ok(FlagshipCtx { bundle, potential: p.potential.clone(), mesh, solution, basis, r0 })
            })
            .as_ref()
            .map_err(clone_err)
    }

    /// Unit-ball reference mesh for blow-up comparisons.
    pub fn reference(&self) -> Result<&Arc<TetMesh>> {
        self.reference
            .get_or_init(|| {
                let mut p = MeshParams::new(1.0, 2.0 * self.params.mesh_h).with_pins(&[0.5]);
                p.pole_levels = self.params.grading_levels;
                p.radial_levels = self.params.grading_levels;
                build_slit_ball(&p)
            })
            .as_ref()
            .map_err(clone_err)
    }
}

fn bundle_map(b: &CoefficientBundle, x: [f64; 3]) -> [f64; 3] {
    b.f_map(x)
}

fn clone_err(e: &Error) -> Error {
    Error::Domain(format!("shared artifact failed to build: {e}"))
}

// ---------------------------------------------------------------------------
// criteria

/// Criterion 1: the slit-sphere spectrum against the closed-form oracle.
pub fn criterion_1(lab: &Lab) -> Result<CriterionOutcome> {
    let start = Instant::now();
    let mut check = Check::new();
    for (i, &(h, tol)) in lab.params.sphere_runs.iter().enumerate() {
        let t = Instant::now();
        let mesh = build_slit_sphere_mesh(2, h)?;
        let count = if i == 0 { lab.params.spectrum_count } else { 1 };
        let pairs = solve_eigenpairs(&mesh, count)?;
        let mu1 = pairs[0].mu;
        let rel = (mu1 - 0.75) / 0.75;
        check.require(
            rel.abs() <= tol,
            format!("h={h}: mu_1 = {mu1:.6} vs 0.75 oracle (rel {rel:+.4}, tol {tol})"),
        );
        // one-sided bias window from the spec'd example: Dirichlet FEM
        // approaches from above, small conformity error below allowed
        check.require(
            mu1 >= 0.75 * 0.97 && mu1 <= 0.75 * (1.0 + tol),
            format!("h={h}: mu_1 inside [0.75*0.97, 0.75*(1+{tol})]"),
        );
        if count > 1 {
            for p in &pairs {
                check.note(format!(
                    "h={h}: mu = {:.5}, k_index = {:?}, cluster size {}",
                    p.mu, p.k_index, p.multiplicity_cluster
                ));
            }
            let matched = pairs.iter().all(|p| p.k_index.is_some());
            check.require(matched, format!("h={h}: every cluster matches an oracle index"));
        }
        check.note(format!("h={h}: {:.1}s", t.elapsed().as_secs_f64()));
    }
    Ok(check.outcome(1, "slit-sphere spectrum vs oracle", start))
}

/// Criterion 2: frequency of the three closed-form homogeneous fields.
pub fn criterion_2(lab: &Lab) -> Result<CriterionOutcome> {
    let start = Instant::now();
    let mut check = Check::new();
    let flat = lab.flat()?;
    let f = PotentialSpec::zero();
    let cases: [(&str, &(dyn Fn([f64; 3]) -> f64 + Sync), f64); 3] = [
        ("sqrt(rho) sin(phi/2)", &slit_harmonic, 0.5),
        ("x3", &|x: [f64; 3]| x[2], 1.0),
        ("x1 sqrt(rho) sin(phi/2)", &slit_harmonic_3half, 1.5),
    ];
    for (name, field_fn, expect) in cases {
        let u = ScalarField::from_fn_masked(&flat.mesh, field_fn);
        let profile = frequency_profile(&u, &flat.bundle, &f, &lab.params.freq_radii)?;
        let mut worst = 0.0f64;
        for (i, &r) in profile.radii.iter().enumerate() {
            worst = worst.max((profile.frequency[i] - expect).abs() / expect);
            check.note(format!("{name}: N({r:.3}) = {:.5}", profile.frequency[i]));
        }
        check.require(
            worst <= 0.03 * lab.params.tol_scale,
            format!("{name}: max |N - {expect}|/{expect} = {worst:.4} <= 3%"),
        );
    }
    Ok(check.outcome(2, "frequency of homogeneous fields", start))
}

/// Criterion 3: the height law and the stabilized limit of H(r)/r^(2 ell).
pub fn criterion_3(lab: &Lab) -> Result<CriterionOutcome> {
    let start = Instant::now();
    let mut check = Check::new();
    let flat = lab.flat()?;
    let f = PotentialSpec::zero();
    let cases: [(&str, &(dyn Fn([f64; 3]) -> f64 + Sync), f64, &dyn Fn(f64) -> f64); 2] = [
        ("x3", &|x: [f64; 3]| x[2], 1.0, &|r: f64| 4.0 * std::f64::consts::PI / 3.0 * r * r),
        (
            "sqrt(rho) sin(phi/2)",
            &slit_harmonic,
            0.5,
            &|r: f64| std::f64::consts::PI.powi(2) / 2.0 * r,
        ),
    ];
    for (name, field_fn, ell, law) in cases {
        let u = ScalarField::from_fn_masked(&flat.mesh, field_fn);
        let profile = frequency_profile(&u, &flat.bundle, &f, &lab.params.freq_radii)?;
        let mut worst = 0.0f64;
        for (i, &r) in profile.radii.iter().enumerate() {
            worst = worst.max((profile.height[i] - law(r)).abs() / law(r));
        }
        check.require(
            worst <= 0.02 * lab.params.tol_scale,
            format!("{name}: max height-law deviation {worst:.4} <= 2%"),
        );
        // fitted limit of H(r)/r^(2 ell) over the three smallest radii
        let fitted: Vec<f64> = profile
            .radii
            .iter()
            .zip(&profile.height)
            .take(3)
            .map(|(r, h)| h / r.powf(2.0 * ell))
            .collect();
        check.require(fitted.iter().all(|v| *v > 0.0), format!("{name}: fitted limits positive"));
        let drift = (fitted[2] - fitted[1]).abs() / fitted[1];
        check.require(
            drift <= 0.05 * lab.params.tol_scale,
            format!("{name}: last two fitted H/r^(2l) differ by {drift:.4} <= 5%"),
        );
    }
    Ok(check.outcome(3, "height law and stabilized limit", start))
}

/// Criterion 4: the main asymptotic at desk scale for the parabola crack
/// with singular potential.
pub fn criterion_4(lab: &Lab) -> Result<CriterionOutcome> {
    let start = Instant::now();
    let mut check = Check::new();
    let ctx = lab.flagship()?;
    let profile =
        frequency_profile(&ctx.solution, &ctx.bundle, &ctx.potential, &lab.params.freq_radii)?;
    for (i, &r) in profile.radii.iter().enumerate() {
        check.note(format!("N({r:.3}) = {:.5}", profile.frequency[i]));
    }
    let est = estimate_limit(&profile)?;
    let nearest_half = (2.0 * est.ell).round() / 2.0;
    check.require(
        (est.ell - nearest_half).abs() <= 0.05,
        format!("ell = {:.4} within 0.05 of half-integer {nearest_half}", est.ell),
    );
    let k0 = match est.k0 {
        Some(k) => {
            check.require(true, format!("k0 matched: {k}"));
            k
        }
        None => {
            check.require(false, "k0 unmatched".into());
            return Ok(check.outcome(4, "main asymptotic, parabola crack", start));
        }
    };
    let reference = lab.reference()?;
    let errors = blowup_convergence(
        &ctx.solution,
        &ctx.bundle,
        &ctx.potential,
        &lab.params.lambdas,
        &ctx.basis,
        k0,
        reference,
    )?;
    for (l, e) in lab.params.lambdas.iter().zip(&errors) {
        check.note(format!("H1 blow-up error at lambda {l} = {e:.5}"));
    }
    let decreasing = errors.windows(2).all(|w| w[1] < w[0]);
    check.require(decreasing, "blow-up errors strictly decrease along the lambda grid".into());
    Ok(check.outcome(4, "main asymptotic, parabola crack", start))
}

/// Criterion 5: Pohozaev equality, inequality and approximating identity.
pub fn criterion_5(lab: &Lab) -> Result<CriterionOutcome> {
    let start = Instant::now();
    let mut check = Check::new();
    let flat = lab.flat()?;
    let scale = lab.params.tol_scale;
    let zero = PotentialSpec::zero();
    let equality_radius = lab.params.poho_radii[lab.params.poho_radii.len() / 2];
    for (name, field_fn) in [
        ("x3", &(|x: [f64; 3]| x[2]) as &(dyn Fn([f64; 3]) -> f64 + Sync)),
        ("sqrt(rho) sin(phi/2)", &slit_harmonic),
    ] {
        let u = ScalarField::from_fn_masked(&flat.mesh, field_fn);
        let report = pohozaev_residual(
            &u,
            &flat.bundle,
            &zero,
            equality_radius,
            PohozaevMode::A1Inequality,
            scale,
        )?;
        check.require(
            report.residual.abs() <= report.tolerance,
            format!(
                "{name}: equality within 3% at r={equality_radius} (residual {:.3e}, tol {:.3e})",
                report.residual, report.tolerance
            ),
        );
    }
    // inequality for the curved-crack solved field
    let ctx = lab.flagship()?;
    for &r in &lab.params.poho_radii {
        let report = pohozaev_residual(
            &ctx.solution,
            &ctx.bundle,
            &ctx.potential,
            r,
            PohozaevMode::A1Inequality,
            scale,
        )?;
        check.require(
            report.pass,
            format!(
                "solved field: residual {:.3e} >= -tol {:.3e} at r={r}",
                report.residual, report.tolerance
            ),
        );
    }
    // full identity on the approximating domain
    let p = &lab.params;
    let mut mesh_params = MeshParams::new(p.mesh_r, p.approx_h)
        .with_pins(&[p.identity_delta, p.identity_radius, 0.2]);
    mesh_params.pole_levels = p.grading_levels;
    mesh_params.radial_levels = p.grading_levels;
    let approx_mesh = build_approx_domain(&mesh_params, p.identity_n, p.alpha)?;
    let data = move |x: [f64; 3]| slit_harmonic(bundle_map(&ctx.bundle, x));
    let (u_n, _) = assemble_solve(&approx_mesh, &ctx.bundle, &ctx.potential, &data)?;
    let report = pohozaev_residual(
        &u_n,
        &ctx.bundle,
        &ctx.potential,
        p.identity_radius,
        PohozaevMode::ApproxIdentity { delta: p.identity_delta },
        scale,
    )?;
    check.require(
        report.pass,
        format!(
            "approx identity at n={}: |lhs-rhs| = {:.3e} <= tol {:.3e}",
            p.identity_n,
            report.residual.abs(),
            report.tolerance
        ),
    );
    let gamma = gamma_term(&u_n, &ctx.bundle, p.identity_radius)?;
    check.require(gamma >= -1e-12, format!("gamma term = {gamma:.3e} reported nonnegative"));
    Ok(check.outcome(5, "Pohozaev audits", start))
}

/// Criterion 6: Hardy, coercivity and Rellich-Necas audits.
pub fn criterion_6(lab: &Lab) -> Result<CriterionOutcome> {
    let start = Instant::now();
    let mut check = Check::new();
    let ctx = lab.flagship()?;
    let scale = lab.params.tol_scale;
    let fields: Vec<(&str, ScalarField)> = vec![
        ("1", ScalarField::from_fn(&ctx.mesh, |_| 1.0)),
        ("x3", ScalarField::from_fn(&ctx.mesh, |x| x[2])),
        ("solved", ctx.solution.clone()),
    ];
    let probe_radii: Vec<f64> = lab
        .params
        .probe_radii
        .iter()
        .cloned()
        .filter(|r| *r <= ctx.r0.r0 * (1.0 + 1e-12))
        .collect();
    check.note(format!(
        "coercivity constants: C = {:.4}, eps = {:.2}, r0 = {}",
        ctx.r0.c, ctx.r0.eps, ctx.r0.r0
    ));
    for (name, u) in &fields {
        for &r in &probe_radii {
            let hardy = hardy_residual(u, r, scale)?;
            check.require(
                hardy.pass,
                format!("hardy[{name}] at r={r}: residual {:.3e}", hardy.residual),
            );
            let coer = coercivity_audit(u, &ctx.bundle, &ctx.potential, r, ctx.r0.c, scale)?;
            check.require(
                coer.pass,
                format!("coercivity[{name}] at r={r}: residual {:.3e}", coer.residual),
            );
        }
    }
    // Rellich-Necas pointwise identity on random cubics
    let flat = lab.flat()?;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(lab.params.seed ^ 0x6e6563);
    let mut worst_rel = 0.0f64;
    for bundle in [&flat.bundle, &ctx.bundle] {
        for _ in 0..20 {
            let mut terms = Vec::new();
            for a in 0..=3u8 {
                for b in 0..=3 - a {
                    for c in 0..=3 - a - b {
                        terms.push(([a, b, c], rng.random_range(-1.0..1.0)));
                    }
                }
            }
            let v = TriPoly { terms };
            let samples: Vec<[f64; 3]> = (0..50)
                .map(|_| {
                    [
                        rng.random_range(-0.5..0.5),
                        rng.random_range(-0.5..0.5),
                        rng.random_range(-0.5..0.5),
                    ]
                })
                .collect();
            let res = rellich_necas_residual(&v, bundle, &samples)?;
            worst_rel = worst_rel.max(res.max_abs / res.scale);
        }
    }
    check.require(
        worst_rel <= 1e-8,
        format!("Rellich-Necas worst residual/scale = {worst_rel:.3e} <= 1e-8"),
    );
    Ok(check.outcome(6, "Hardy, coercivity, Rellich-Necas", start))
}

/// Criterion 7: approximating domains: star-shapedness and H1 convergence.
pub fn criterion_7(lab: &Lab) -> Result<CriterionOutcome> {
    let start = Instant::now();
    let mut check = Check::new();
    let p = &lab.params;
    let flat_bundle = build_bundle(&CrackSpec::flat(2, p.mesh_r)?)?;
    let curved = lab.flagship()?;
    for (name, bundle) in [("flat", &flat_bundle), ("parabola", &curved.bundle)] {
        for &n in &[256u32, 1024] {
            let star = star_shaped_upstairs(bundle, p.mesh_r, n, p.alpha, 20_000)?;
            check.require(
                star.min_value >= -1e-10,
                format!("star[{name}] n={n}: min A x.nu = {:.3e} >= -1e-10", star.min_value),
            );
        }
    }
    // H1 convergence of the approximating solutions
    let mut mesh_params = MeshParams::new(p.mesh_r, p.approx_h).with_pins(&[0.2, 0.3, 0.4]);
    mesh_params.pole_levels = p.grading_levels;
    mesh_params.radial_levels = p.grading_levels;
    let ball = build_slit_ball(&mesh_params)?;
    let data = move |x: [f64; 3]| slit_harmonic(bundle_map(&curved.bundle, x));
    let (u, _) = assemble_solve(&ball, &curved.bundle, &curved.potential, &data)?;
    let mut prev = f64::INFINITY;
    for &n in &p.approx_ns {
        let approx = build_approx_domain(&mesh_params, n, p.alpha)?;
        let (u_n, _) = assemble_solve(&approx, &curved.bundle, &curved.potential, &data)?;
        let dist = h1_distance(&u_n, &u, p.mesh_r)?;
        check.require(
            dist.h1 < prev,
            format!("h1 distance U_{n} vs U = {:.5} (strictly below {prev:.5})", dist.h1),
        );
        prev = dist.h1;
    }
    Ok(check.outcome(7, "approximating domains", start))
}

/// Criterion 8: Fourier asymptotics: beta R-independence and the exactness
/// of the coefficient quadrature on the matched direction mesh.
pub fn criterion_8(lab: &Lab) -> Result<CriterionOutcome> {
    let start = Instant::now();
    let mut check = Check::new();
    let ctx = lab.flagship()?;
    let p = &lab.params;
    // exact-field coefficients
    let exact = homogeneous_extension(&ctx.mesh, &ctx.basis, 0, 0.5)?;
    for &l in &[0.2, 0.4] {
        let phi = fourier_coefficient(&exact, &ctx.basis, 0, l)?;
        let rel = (phi / l.sqrt() - 1.0).abs();
        check.require(
            rel <= 1e-3,
            format!("exact field: phi({l})/sqrt({l}) = 1 within {rel:.2e} (tol 1e-3)"),
        );
        for other in 1..ctx.basis.pairs.len().min(4) {
            if ctx.basis.pairs[other].k_index == Some(1) {
                continue;
            }
            let cross = fourier_coefficient(&exact, &ctx.basis, other, l)?;
            check.require(
                cross.abs() <= 1e-6,
                format!("exact field: cross-cluster |phi_{other}({l})| = {:.2e} <= 1e-6", cross.abs()),
            );
        }
    }
    // beta R-independence for the solved field
    let lambdas: Vec<f64> = p.freq_radii.clone();
    let mut betas = Vec::new();
    for &r_upper in &p.fourier_rs {
        let grid: Vec<f64> = lambdas.iter().cloned().filter(|l| *l <= r_upper + 1e-12).collect();
        let table =
            upsilon_beta(&ctx.solution, &ctx.bundle, &ctx.potential, &ctx.basis, 1, &grid, r_upper)?;
        check.note(format!("R={r_upper}: beta = {:?}", table.beta));
        betas.push(table.beta[0]);
    }
    let b_ref = betas[betas.len() - 1];
    let spread = betas
        .iter()
        .fold(0.0f64, |acc, b| acc.max((b - b_ref).abs() / b_ref.abs().max(1e-12)));
    check.require(
        spread <= 0.05 * p.tol_scale,
        format!("beta spread across R = {spread:.4} <= 5%"),
    );
    Ok(check.outcome(8, "Fourier asymptotics", start))
}

/// Run criteria 1 through 8 (criterion 9, determinism of the verify suite,
/// is exercised by running the suite twice and comparing artifacts).
pub fn run_all(lab: &Lab) -> Result<Vec<CriterionOutcome>> {
    Ok(vec![
        criterion_1(lab)?,
        criterion_2(lab)?,
        criterion_3(lab)?,
        criterion_4(lab)?,
        criterion_5(lab)?,
        criterion_6(lab)?,
        criterion_7(lab)?,
        criterion_8(lab)?,
    ])
}

/// Spectrum artifacts for the verify stage: mass-orthonormality checked.
pub fn spectrum_invariants(mesh: &cracklab::SphereMesh, pairs: &[cracklab::SphericalEigenpair]) -> Vec<(bool, String)> {
    let mut out = Vec::new();
    let mass = surface_mass(mesh);
    let mut worst = 0.0f64;
    for i in 0..pairs.len() {
        for j in 0..pairs.len() {
            let ip = mass.bilinear(&pairs[i].psi, &pairs[j].psi);
            let expect = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((ip - expect).abs());
        }
    }
    out.push((worst <= 1e-6, format!("mass-orthonormality defect {worst:.2e} <= 1e-6")));
    let dirichlet = pairs
        .iter()
        .all(|p| mesh.cut_vertices.iter().all(|&cv| p.psi[cv as usize] == 0.0));
    out.push((dirichlet, "eigenfunctions vanish on the cut".into()));
    out
}
